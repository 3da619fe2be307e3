"""Elaboration: from a checked script to a choreography functor, its pulse track and the law reports.

Declarations are built first, then directives are applied in the order they
appear. Law violations end up in the report; only structural impossibilities
(a movement that does not fit its interval, a transform whose precondition
fails) abort with ElaborationError.
"""

from __future__ import annotations

import math
from typing import NamedTuple
from dataclasses import field, replace, dataclass
from collections.abc import Callable

import numpy as np

from logger.logger import app_logger

from choreo import script as syntax
from choreo.laws import LawCheck, run_checks, log_findings
from choreo.errors import ChoreoError, ElaborationError, NonComposableError, PathBudgetExceeded
from choreo.pulse import (
    PulseTrack,
    beat_slices,
    group_beats,
    valzer_transform,
    build_pulse_track,
    apply_pulse_functor,
    conducting_assignment,
)
from choreo.gesture import (
    Pose,
    Skeleton,
    Movement,
    Tolerance,
    MovementHomotopy,
    stance_pose,
    curve_distance,
    smooth_movement,
    bezier_movement,
    linear_movement,
    bounding_diagonal,
    homotopy_distance,
)
from choreo.category import (
    DURATION_RTOL,
    Status,
    Diagram,
    Finding,
    Generator,
    LawReport,
    GroupFigure,
    GroupMovement,
    FiniteCategoryGraph,
    project,
    classify,
    check_connected,
    vertical_compose,
    tensor_movements,
    compose_movements,
    identity_homotopy,
    identity_movement,
    check_diagram_commutes,
    compose_group_movements,
)
from choreo.choreography import (
    ScoreMark,
    AffineStyle,
    AttachedCell,
    ChoreographyFunctor,
    style_map,
    leader_swap,
    build_choreography,
    retime_choreography,
)


class Smoothing(NamedTuple):
    """A smoothing directive as applied: the movement before and after, and the 2-cell between them."""

    interval: int
    dancer: str
    original: Movement
    smoothed: Movement
    witness: MovementHomotopy


class Elaboration(NamedTuple):
    functor: ChoreographyFunctor
    track: PulseTrack
    report: LawReport
    eps: float
    eta: float
    title: str = ""


@dataclass
class _Scene:
    """Everything declared so far, plus the state the directives act on."""

    script: syntax.ChoreoScript
    tolerance: Tolerance
    skeletons: dict[str, Skeleton] = field(default_factory=dict)
    poses: dict[str, Pose] = field(default_factory=dict)
    moves: dict[str, Movement] = field(default_factory=dict)
    styles: dict[str, AffineStyle] = field(default_factory=dict)
    track: PulseTrack | None = None
    functor: ChoreographyFunctor | None = None
    smoothings: list[Smoothing] = field(default_factory=list)
    swaps: list[tuple[ChoreographyFunctor, str]] = field(default_factory=list)

    def current_eps(self) -> float:
        assert self.functor is not None
        return self.tolerance.eps_cv(_diagonal(self.functor, self.poses.values()))

    # -- declarations --

    def SkeletonDecl(self, s: syntax.SkeletonDecl) -> None:  # pylint: disable=invalid-name
        if s.default:
            self.skeletons[s.name.name] = Skeleton(s.name.name)
            return
        edges = tuple((a.name, b.name) for a, b in s.edges) or None
        self.skeletons[s.name.name] = Skeleton(s.name.name, tuple(k.name for k in s.keypoints), edges)

    def PoseDecl(self, s: syntax.PoseDecl) -> None:  # pylint: disable=invalid-name
        skeleton = self.skeletons[s.skeleton.name]
        given = {p.label.name: (p.x, p.y) for p in s.points}
        self.poses[s.name.name] = Pose(s.name.name, skeleton, [given[k] for k in skeleton.keypoints])

    def StanceDecl(self, s: syntax.StanceDecl) -> None:  # pylint: disable=invalid-name
        skeleton = self.skeletons[s.skeleton.name]
        self.poses[s.name.name] = stance_pose(s.name.name, skeleton, s.stance.name, s.at or (0.0, 0.0))

    def ShiftedPose(self, s: syntax.ShiftedPose) -> None:  # pylint: disable=invalid-name
        self.poses[s.name.name] = self.poses[s.base.name].translated(s.offset, s.name.name)

    def MirroredPose(self, s: syntax.MirroredPose) -> None:  # pylint: disable=invalid-name
        x0 = s.axis if s.axis is not None else 0.0

        def flip(pts: np.ndarray) -> np.ndarray:
            return np.column_stack([2.0 * x0 - pts[:, 0], pts[:, 1]])

        self.poses[s.name.name] = self.poses[s.base.name].mapped(flip, s.name.name)

    def MoveDecl(self, s: syntax.MoveDecl) -> None:  # pylint: disable=invalid-name
        src, tgt = self.poses[s.source.name], self.poses[s.target.name]
        if s.kind == "linear":
            move = linear_movement(src, tgt, s.beats, s.samples or 2, s.name.name)
        else:
            via = [self.poses[v.name] for v in s.via]
            move = bezier_movement(src, tgt, via, s.beats, s.samples or 24, s.name.name)
        self.moves[s.name.name] = move

    def PulseDecl(self, s: syntax.PulseDecl) -> None:  # pylint: disable=invalid-name
        meter = s.meter or 4
        bars = s.bars
        if bars is None:
            # enough bars to reach the last mark
            block = self.script.choreography
            last = block.marks[-1].beat if block is not None and block.marks else 0.0
            bars = max(1, math.ceil(last / meter - 1e-9))
        self.track = build_pulse_track(s.bpm or 120.0, meter, bars, s.accents or None)

    def StyleDecl(self, s: syntax.StyleDecl) -> None:  # pylint: disable=invalid-name
        scale = s.scale if s.scale is not None else 1.0
        rotate = s.rotate if s.rotate is not None else 0.0
        self.styles[s.name.name] = AffineStyle(scale, rotate, s.translate or (0.0, 0.0), s.mirror, s.name.name)

    def ChoreographyDecl(self, s: syntax.ChoreographyDecl) -> None:  # pylint: disable=invalid-name
        dancers = tuple(d.name for d in s.dancers)
        marks = [ScoreMark(m.name.name, m.beat) for m in s.marks]
        figures = {}
        for m in s.marks:
            chosen = {e.dancer.name: self.poses[e.value.name] for e in m.entries}
            figures[m.name.name] = GroupFigure(dancers, tuple(chosen[d] for d in dancers))
        by_source = {iv.source.name: iv for iv in s.intervals}
        movements = {}
        for a, b in zip(marks, marks[1:]):
            iv = by_source[a.name]
            span = b.beat - a.beat
            assigned = {e.dancer.name: e.value.name for e in iv.entries}
            parts = []
            for d in dancers:
                start, stop = figures[a.name].pose_of(d), figures[b.name].pose_of(d)
                if assigned[d] == syntax.HOLD:
                    if not start.matches(stop):
                        raise ElaborationError(
                            f"non-composable: dancer {d} holds '{start.name}' over {a.name} -> {b.name} "
                            f"but mark '{b.name}' assigns '{stop.name}'"
                        )
                    parts.append(identity_movement(start, span))
                    continue
                parts.append(_fit(self.moves[assigned[d]], d, start, stop, a, b))
            movements[(a.name, b.name)] = GroupMovement(dancers, tuple(parts))
        self.functor = build_choreography(marks, figures, movements)

    # -- directives --

    def Valzer(self, s: syntax.Valzer) -> None:  # pylint: disable=invalid-name
        assert self.track is not None and self.functor is not None
        new = valzer_transform(self.track, s.alpha)
        self.functor = retime_choreography(self.functor, self.track, new, self.tolerance.n_cmp)
        self.track = new

    def Group(self, s: syntax.Group) -> None:  # pylint: disable=invalid-name
        assert self.track is not None
        self.track = group_beats(self.track, s.k)

    def Smooth(self, s: syntax.Smooth) -> None:  # pylint: disable=invalid-name
        f = self.functor
        assert f is not None
        i = f.mark_index(s.source.name)
        gm = f.movements[i]
        original = project(gm, s.dancer.name)
        smoothed, witness = smooth_movement(
            original, s.strength, s.passes if s.passes is not None else 1, samples=self.tolerance.n_cmp
        )
        parts = tuple(smoothed if d == s.dancer.name else m for d, m in zip(gm.dancers, gm.components, strict=True))
        movements = f.movements[:i] + (GroupMovement(gm.dancers, parts),) + f.movements[i + 1 :]
        cells = f.cells + (AttachedCell(i, s.dancer.name, witness, "smooth"),)
        self.functor = replace(f, movements=movements, cells=cells)
        self.smoothings.append(Smoothing(i, s.dancer.name, original, smoothed, witness))

    def Swap(self, s: syntax.Swap) -> None:  # pylint: disable=invalid-name
        assert self.functor is not None
        self.swaps.append((self.functor, s.mark.name))
        self.functor = leader_swap(self.functor, s.mark.name)

    def Apply(self, s: syntax.Apply) -> None:  # pylint: disable=invalid-name
        assert self.functor is not None
        style = self.styles[s.style.name]
        self.functor, _ = style_map(
            self.functor, *style.maps(), eps=self.current_eps(), label=style.name, n_cmp=self.tolerance.n_cmp
        )


def _fit(move: Movement, dancer: str, start: Pose, stop: Pose, a: ScoreMark, b: ScoreMark) -> Movement:
    """The declared movement, checked against the interval it is used in."""
    span = b.beat - a.beat
    where = f"{a.name} -> {b.name}"
    if abs(move.duration - span) > DURATION_RTOL * span:
        raise ElaborationError(
            f"duration mismatch: move '{move.name}' lasts {move.duration:g} beats, interval {where} spans {span:g}"
        )
    if not (move.source.matches(start) and move.target.matches(stop)):
        raise ElaborationError(
            f"non-composable: move '{move.name}' runs '{move.source.name}' -> '{move.target.name}' "
            f"but dancer {dancer} goes from '{start.name}' to '{stop.name}' over {where}"
        )
    return move if move.duration == span else move.retimed(span)


def _diagonal(f: ChoreographyFunctor, poses) -> float:
    arrays = [p.coords for p in poses]
    arrays += [p.coords for fig in f.figures for p in fig.poses]
    arrays += [m.curve.samples for gm in f.movements for m in gm.components]
    return bounding_diagonal(*arrays)


# ---- Law suite ----


def _identity_and_associativity(f: ChoreographyFunctor, eps: float, n_cmp: int) -> LawReport:
    findings = []
    for d in f.dancers:
        moves = [project(gm, d) for gm in f.movements]
        for i, m in enumerate(moves):
            left = compose_movements(identity_movement(m.source, m.duration), m)
            right = compose_movements(m, identity_movement(m.target, m.duration))
            dist = max(curve_distance(left.curve, m.curve, n_cmp), curve_distance(right.curve, m.curve, n_cmp))
            if dist > eps:
                subject = f"{d} {f.interval_name(i)}"
                findings.append(Finding(Diagram.D1, "identity", subject, "id;f or f;id differs from f", dist))
        for i in range(len(moves) - 2):
            a, b, c = moves[i : i + 3]
            subject = f"{d} {f.interval_name(i)}..{f.interval_name(i + 2)}"
            try:
                lhs = compose_movements(compose_movements(a, b), c)
                rhs = compose_movements(a, compose_movements(b, c))
            except NonComposableError as e:
                findings.append(Finding(Diagram.D1, "composition", subject, str(e)))
                continue
            dist = curve_distance(lhs.curve, rhs.curve, n_cmp)
            if dist > eps:
                findings.append(Finding(Diagram.D1, "associativity", subject, "(f;g);h differs from f;(g;h)", dist))
    return LawReport(tuple(findings))


def _cell_identities(f: ChoreographyFunctor, eps: float, n_cmp: int) -> LawReport:
    findings = []
    for cell in f.cells:
        h = cell.homotopy
        right = vertical_compose(h, identity_homotopy(h.target, h.steps, h.samples), eps)
        left = vertical_compose(identity_homotopy(h.source, h.steps, h.samples), h, eps)
        dist = max(homotopy_distance(right, h, n_cmp), homotopy_distance(left, h, n_cmp))
        if dist > eps:
            subject = f"{cell.dancer} {f.interval_name(cell.interval)} {cell.label}".rstrip()
            findings.append(Finding(Diagram.D1, "2-cell identity", subject, "1;a or a;1 differs from a", dist))
    return LawReport(tuple(findings))


def pose_graph(f: ChoreographyFunctor) -> FiniteCategoryGraph:
    """Poses used at the marks, joined by every non-identity movement the dancers perform."""
    objects: dict[str, None] = {}
    for fig in f.figures:
        for p in fig.poses:
            objects.setdefault(p.name, None)
    generators: list[Generator] = []
    seen: dict[str, list[Movement]] = {}
    for src, tgt, m in f.pose_graph():
        if src == tgt and m.name.startswith("id_"):
            continue
        variants = seen.setdefault(m.label, [])
        if any(v == m for v in variants):
            continue
        variants.append(m)
        name = m.label if len(variants) == 1 else f"{m.label}#{len(variants)}"
        objects.setdefault(src, None)
        objects.setdefault(tgt, None)
        generators.append(Generator(src, tgt, name, m))
    return FiniteCategoryGraph(tuple(objects), tuple(generators))


def _parallel_movements(f: ChoreographyFunctor, eps: float, eta: float, n_cmp: int) -> LawReport:
    graph = pose_graph(f)
    findings = []
    try:
        result = check_diagram_commutes(graph, eta, eps, n_cmp=n_cmp)
    except PathBudgetExceeded as e:
        findings.append(Finding(Diagram.D7, "parallel movements", "pose graph", str(e), severity="note"))
    else:
        if result.witness is not None:
            subject = f"{result.witness[0]} vs {result.witness[1]}"
            detail = result.status.value
            findings.append(Finding(Diagram.D7, "parallel movements", subject, detail, result.discrepancy, "note"))
    connectivity = check_connected(graph)
    if not connectivity.connected and connectivity.counterexample is not None:
        a, b = connectivity.counterexample
        findings.append(Finding(Diagram.D1, "connectivity", f"{a} / {b}", "pose graph is not connected", 0.0, "note"))
    return LawReport(tuple(findings))


def _pulse_alignment(f: ChoreographyFunctor, track: PulseTrack, eps: float, n_cmp: int) -> LawReport:
    findings = []
    for m in f.marks:
        if track.index_of(m.beat) is None and abs(m.beat - track.end) > 1e-9:
            findings.append(Finding(Diagram.D4, "alignment", f"mark {m.name}", f"beat {m.beat:g} is not on the pulse"))
    for i, gm in enumerate(f.movements):
        for d, m in zip(gm.dancers, gm.components, strict=True):
            assignment, covered = beat_slices(track, m, f.marks[i].beat)
            if not covered:
                continue
            label = f"{d} {f.interval_name(i)}"
            _, report = apply_pulse_functor(track, assignment, eps, covered, Diagram.D4, label, n_cmp)
            findings.extend(report.findings)
    return LawReport(tuple(findings))


def _conducting(track: PulseTrack, eps: float, n_cmp: int) -> LawReport:
    _, report = apply_pulse_functor(
        track, conducting_assignment(track), eps, diagram=Diagram.D5, label="conductor", n_cmp=n_cmp
    )
    return report


def _interchange(f: ChoreographyFunctor, eps: float, n_cmp: int) -> LawReport:
    """(t x 1);(1 x u), (1 x u);(t x 1) and t x u agree dancer by dancer, for neighbours in every interval."""
    findings = []
    for i, gm in enumerate(f.movements):
        for a, b in zip(gm.dancers, gm.dancers[1:]):
            t, u = project(gm, a), project(gm, b)
            pair = (a, b)
            t_first = compose_group_movements(
                tensor_movements([t, identity_movement(u.source, t.duration)], pair),
                tensor_movements([identity_movement(t.target, u.duration), u], pair),
            )
            u_first = compose_group_movements(
                tensor_movements([identity_movement(t.source, u.duration), u], pair),
                tensor_movements([t, identity_movement(u.target, t.duration)], pair),
            )
            both = tensor_movements([t, u], pair)
            worst = 0.0
            for d in pair:
                curves = [project(x, d).curve for x in (t_first, u_first, both)]
                worst = max(
                    worst,
                    curve_distance(curves[0], curves[1], n_cmp),
                    curve_distance(curves[0], curves[2], n_cmp),
                    curve_distance(curves[1], curves[2], n_cmp),
                )
            if worst > eps:
                subject = f"{a},{b} {f.interval_name(i)}"
                findings.append(Finding(Diagram.D8, "interchange", subject, "tensor and composition disagree", worst))
    return LawReport(tuple(findings))


def _braids(swaps: list[tuple[ChoreographyFunctor, str]]) -> LawReport:
    findings = []
    for before, mark in swaps:
        twice = leader_swap(leader_swap(before, mark), mark)
        if twice.figures != before.figures or twice.movements != before.movements:
            findings.append(Finding(Diagram.D8, "braid involution", f"swap at {mark}", "swapping twice changed F"))
    return LawReport(tuple(findings))


def _smoothings(f: ChoreographyFunctor, smoothings: list[Smoothing], eps: float, eta: float, n_cmp: int) -> LawReport:
    findings = []
    for s in smoothings:
        subject = f"{s.dancer} {f.interval_name(s.interval)}"
        before, after = s.original.curve, s.smoothed.curve
        if not (np.array_equal(before.first, after.first) and np.array_equal(before.last, after.last)):
            findings.append(Finding(Diagram.D9, "endpoints", subject, "smoothing moved an endpoint"))
        growth = after.arc_length() - before.arc_length()
        if growth > 1e-12 * max(1.0, before.arc_length()):
            findings.append(Finding(Diagram.D9, "arc length", subject, "smoothing lengthened the path", growth))
        boundary = max(
            curve_distance(s.witness.source.curve, before, n_cmp),
            curve_distance(s.witness.target.curve, after, n_cmp),
        )
        if boundary > eps:
            detail = "witness does not join the original and smoothed movements"
            findings.append(Finding(Diagram.D9, "2-cell boundary", subject, detail, boundary))
        change = curve_distance(before, after, n_cmp)
        if classify(change, eps, eta) is Status.FAILS:
            findings.append(Finding(Diagram.D9, "smoothing", subject, "path moved by more than eta", change, "note"))
    return LawReport(tuple(findings))


def _law_checks(scene: _Scene, eps: float, eta: float) -> list[LawCheck]:
    f, track, n = scene.functor, scene.track, scene.tolerance.n_cmp
    assert f is not None and track is not None
    checks: list[tuple[str, Diagram, Callable[[], LawReport]]] = [
        ("identity and associativity", Diagram.D1, lambda: _identity_and_associativity(f, eps, n)),
        ("2-cell identities", Diagram.D1, lambda: _cell_identities(f, eps, n)),
        ("parallel movements", Diagram.D7, lambda: _parallel_movements(f, eps, eta, n)),
        ("pulse alignment", Diagram.D4, lambda: _pulse_alignment(f, track, eps, n)),
        ("conducting", Diagram.D5, lambda: _conducting(track, eps, n)),
        ("interchange", Diagram.D8, lambda: _interchange(f, eps, n)),
        ("braids", Diagram.D8, lambda: _braids(scene.swaps)),
        ("smoothing", Diagram.D9, lambda: _smoothings(f, scene.smoothings, eps, eta, n)),
    ]
    return [LawCheck(name, diagram, run) for name, diagram, run in checks]


def elaborate(
    script: syntax.ChoreoScript,
    tolerance: Tolerance = Tolerance(),
    parallel: bool = True,
    workers: int | None = None,
    source: str = "",
) -> Elaboration:
    """Builds the functor and pulse track of a parsed script and runs every law check over them.

    :raises ElaborationError: when the script describes something that cannot be built.
    """
    scene = _Scene(script, tolerance)
    for s in script.statements:
        handler = getattr(scene, type(s).__name__, None)
        if handler is None:
            continue
        try:
            handler(s)
        except ElaborationError:
            app_logger.error("Elaboration failed at line %d", s.pos.line)
            raise
        except ChoreoError as e:
            app_logger.error("Elaboration failed at line %d: %s", s.pos.line, e)
            raise ElaborationError(f"line {s.pos.line}: {e}") from e
    f, track = scene.functor, scene.track
    if f is None or track is None:
        raise ElaborationError("script has no choreography or no pulse")
    diag = _diagonal(f, scene.poses.values())
    eps, eta = tolerance.eps_cv(diag), tolerance.eta_abs(diag)
    report = f.report.merged(run_checks(_law_checks(scene, eps, eta), parallel, workers))
    title = script.title or source
    log_findings(report, source or title)
    app_logger.info(
        "Elaborated '%s': %d dancers, %d marks, %d violations",
        title,
        len(f.dancers),
        len(f.marks),
        len(report.violations),
    )
    return Elaboration(f, track, report, eps, eta, title)
