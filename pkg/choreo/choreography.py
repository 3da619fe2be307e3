"""Group-level semantics built on the categorical kernel.

A choreography functor sends score marks to group figures and the intervals
between consecutive marks to group movements. This module compares two
choreographies (natural transformations), restyles one (style 2-functors),
permutes leaders (braids), tracks the center of attention and checks the
conductor/musician/dancer triangle.
"""

from __future__ import annotations

import math
from typing import NamedTuple
from dataclasses import replace, dataclass
from collections.abc import Mapping, Callable, Sequence

import numpy as np

from logger.logger import app_logger

from choreo.errors import ChoreoError, ChoreographyError
from choreo.pulse import PulseTrack, quantize_onsets
from choreo.gesture import (
    EPS_REL,
    N_CMP,
    Pose,
    Curve,
    Movement,
    MovementHomotopy,
    curve_distance,
    linear_homotopy,
    linear_movement,
    bounding_diagonal,
)
from choreo.category import (
    DURATION_RTOL,
    Status,
    Diagram,
    Finding,
    LawReport,
    GroupFigure,
    GroupMovement,
    CommutativityReport,
    project,
    classify,
    braid_swap,
    compose_movements,
    identity_movement,
)


class ScoreMark(NamedTuple):
    name: str
    beat: float


class AttachedCell(NamedTuple):
    """A 2-cell living on one dancer's movement over interval `interval`."""

    interval: int
    dancer: str
    homotopy: MovementHomotopy
    label: str = ""


@dataclass(frozen=True)
class ChoreographyFunctor:
    marks: tuple[ScoreMark, ...]
    figures: tuple[GroupFigure, ...]
    movements: tuple[GroupMovement, ...] = ()
    cells: tuple[AttachedCell, ...] = ()
    report: LawReport = LawReport()

    @property
    def dancers(self) -> tuple[str, ...]:
        return self.figures[0].dancers

    @property
    def start(self) -> float:
        return self.marks[0].beat

    @property
    def end(self) -> float:
        return self.marks[-1].beat

    @property
    def duration(self) -> float:
        return self.end - self.start

    @property
    def figure_map(self) -> dict[str, GroupFigure]:
        return {m.name: f for m, f in zip(self.marks, self.figures, strict=True)}

    @property
    def movement_map(self) -> dict[tuple[str, str], GroupMovement]:
        return {(a.name, b.name): gm for a, b, gm in zip(self.marks[:-1], self.marks[1:], self.movements, strict=True)}

    def mark_index(self, name: str) -> int:
        for i, m in enumerate(self.marks):
            if m.name == name:
                return i
        raise ChoreographyError(f"unknown mark '{name}'")

    def interval_name(self, i: int) -> str:
        return f"{self.marks[i].name}->{self.marks[i + 1].name}"

    def pose_graph(self) -> list[tuple[str, str, Movement]]:
        """Every dancer's interval movements as (source pose, target pose, movement)."""
        return [(m.source.name, m.target.name, m) for gm in self.movements for m in gm.components]


def _check_marks(marks: Sequence[ScoreMark]) -> None:
    if not marks:
        raise ChoreographyError("a choreography needs at least one mark")
    names = [m.name for m in marks]
    if len(set(names)) != len(names):
        raise ChoreographyError("duplicate mark names")
    beats = [m.beat for m in marks]
    if any(b <= a for a, b in zip(beats, beats[1:])):
        raise ChoreographyError("mark beats must be strictly increasing")


def build_choreography(
    marks: Sequence[ScoreMark],
    figure_map: Mapping[str, GroupFigure],
    movement_map: Mapping[tuple[str, str], GroupMovement],
    cells: Sequence[AttachedCell] = (),
) -> ChoreographyFunctor:
    """Validates the functor; endpoint and duration violations go to its report."""
    marks = tuple(ScoreMark(m.name, float(m.beat)) for m in marks)
    _check_marks(marks)
    missing = [m.name for m in marks if m.name not in figure_map]
    if missing:
        raise ChoreographyError(f"marks without a figure: {', '.join(missing)}")
    figures = tuple(figure_map[m.name] for m in marks)
    dancers = set(figures[0].dancers)
    for m, fig in zip(marks, figures, strict=True):
        if set(fig.dancers) != dancers:
            raise ChoreographyError(f"figure at mark '{m.name}' has dancers {sorted(fig.dancers)}")
    movements = []
    findings: list[Finding] = []
    for a, b, fa, fb in zip(marks, marks[1:], figures, figures[1:]):
        key = (a.name, b.name)
        if key not in movement_map:
            raise ChoreographyError(f"interval {a.name}->{b.name} has no movement")
        gm = movement_map[key]
        movements.append(gm)
        subject = f"{a.name}->{b.name}"
        if set(gm.dancers) != dancers:
            raise ChoreographyError(f"movement over {subject} has dancers {sorted(gm.dancers)}")
        span = b.beat - a.beat
        if abs(gm.duration - span) > DURATION_RTOL * span:
            detail = f"movement lasts {gm.duration:g}, span is {span:g}"
            findings.append(Finding(Diagram.D4, "duration", subject, detail, abs(gm.duration - span)))
        for dancer in gm.dancers:
            move = project(gm, dancer)
            expected_src, expected_tgt = fa.pose_of(dancer), fb.pose_of(dancer)
            if not move.source.matches(expected_src):
                detail = f"starts at '{move.source.name}', figure has '{expected_src.name}'"
                findings.append(Finding(Diagram.D4, "endpoints", f"{dancer} {subject}", detail))
            if not move.target.matches(expected_tgt):
                detail = f"ends at '{move.target.name}', figure has '{expected_tgt.name}'"
                findings.append(Finding(Diagram.D4, "endpoints", f"{dancer} {subject}", detail))
    for f in findings:
        app_logger.warning("Choreography functor: %s", f.render())
    return ChoreographyFunctor(marks, figures, tuple(movements), tuple(cells), LawReport(tuple(findings)))


def configuration_at(f: ChoreographyFunctor, t: float) -> dict[str, np.ndarray]:
    """Every dancer's configuration at beat t (clipped to the choreography's span)."""
    return {d: c[0] for d, c in _sample(f, np.array([t], dtype=float)).items()}


def _interval_index(f: ChoreographyFunctor, times: np.ndarray) -> np.ndarray:
    beats = np.array([m.beat for m in f.marks])
    return np.clip(np.searchsorted(beats, times, side="right") - 1, 0, max(len(f.movements) - 1, 0))


def _sample(f: ChoreographyFunctor, times: np.ndarray, velocity: bool = False) -> dict[str, np.ndarray]:
    times = np.clip(times, f.start, f.end)
    out = {}
    for dancer in f.dancers:
        dim = f.figures[0].pose_of(dancer).skeleton.dim
        if not f.movements:
            pose = f.figures[0].pose_of(dancer)
            out[dancer] = np.zeros((times.size, dim)) if velocity else np.tile(pose.coords, (times.size, 1))
            continue
        idx = _interval_index(f, times)
        values = np.empty((times.size, dim))
        for j in np.unique(idx):
            mask = idx == j
            curve = project(f.movements[j], dancer).curve
            local = times[mask] - f.marks[j].beat
            values[mask] = curve.velocity_at(local) if velocity else curve.at(local)
        out[dancer] = values
    return out


def configurations(f: ChoreographyFunctor, times) -> dict[str, np.ndarray]:
    """Per dancer, one flat configuration per instant of `times` (clipped to the span)."""
    return _sample(f, np.asarray(times, dtype=float).reshape(-1))


def sample_times(f: ChoreographyFunctor, rate: float) -> np.ndarray:
    """duration x rate + 1 instants from the first mark, `rate` per beat."""
    if not rate > 0:
        raise ChoreographyError(f"sample rate must be > 0, got {rate}")
    count = math.floor(f.duration * rate + 1e-9) + 1
    return f.start + np.arange(count) / rate


# ---- Tempo ----


def retime_choreography(
    f: ChoreographyFunctor, old: PulseTrack, new: PulseTrack, samples: int = N_CMP
) -> ChoreographyFunctor:
    """Carries the marks along a change of beat grid and rescales every interval movement.

    Marks between beats move proportionally; before the first beat or after
    the track end they keep their offset. Every rescaled movement gets a
    "tempo" 2-cell from its old timing to the new one.
    """
    if old.size != new.size:
        raise ChoreographyError(f"tempo change must keep the beat count ({old.size} vs {new.size})")
    knots_old = np.append(old.beats, old.end)
    knots_new = np.append(new.beats, new.end)

    def warp(t: float) -> float:
        if t < knots_old[0]:
            return float(t + knots_new[0] - knots_old[0])
        if t > knots_old[-1]:
            return float(t + knots_new[-1] - knots_old[-1])
        return float(np.interp(t, knots_old, knots_new))

    marks = tuple(ScoreMark(m.name, warp(m.beat)) for m in f.marks)
    movements = []
    cells = list(f.cells)
    for i, gm in enumerate(f.movements):
        span = marks[i + 1].beat - marks[i].beat
        if gm.duration == span:
            movements.append(gm)
            continue
        retimed = tuple(m.retimed(span) for m in gm.components)
        movements.append(GroupMovement(gm.dancers, retimed))
        for d, m, r in zip(gm.dancers, gm.components, retimed, strict=True):
            cells.append(AttachedCell(i, d, linear_homotopy(m, r, 2, samples), "tempo"))
    app_logger.info("Retimed %d marks, %d tempo 2-cells", len(marks), len(cells) - len(f.cells))
    return replace(f, marks=marks, movements=tuple(movements), cells=tuple(cells))


# ---- Natural transformations ----


class NaturalitySquare(NamedTuple):
    interval: str
    discrepancy: float
    status: Status
    dancer: str


@dataclass(frozen=True)
class ChoreoNatTransform:
    source: ChoreographyFunctor
    target: ChoreographyFunctor
    components: tuple[GroupMovement, ...]
    squares: tuple[NaturalitySquare, ...] = ()
    report: LawReport = LawReport()


def diff_choreographies(
    f: ChoreographyFunctor,
    g: ChoreographyFunctor,
    steps: int = 2,
    eps: float | None = None,
    eta: float | None = None,
    duration: float = 1.0,
    n_cmp: int = N_CMP,
) -> ChoreoNatTransform:
    """Per-mark straight traces from F's figure to G's, plus every naturality square.

    Square i compares F(i->i+1) ; c(i+1) with c(i) ; G(i->i+1), dancer by dancer,
    and keeps the worst dancer.
    """
    if [(m.name, m.beat) for m in f.marks] != [(m.name, m.beat) for m in g.marks]:
        raise ChoreographyError("choreographies must share their marks")
    if set(f.dancers) != set(g.dancers):
        raise ChoreographyError(f"dancer lists differ: {sorted(f.dancers)} vs {sorted(g.dancers)}")
    if eps is None or eta is None:
        diag = _scene_diagonal(f, g)
        eps = EPS_REL * diag if eps is None else eps
        eta = 0.05 * diag if eta is None else eta
    components = tuple(
        GroupMovement(
            f.dancers,
            tuple(
                linear_movement(ff.pose_of(d), gf.pose_of(d), duration, steps, f"c({m.name})")
                for d in f.dancers
            ),
        )
        for m, ff, gf in zip(f.marks, f.figures, g.figures, strict=True)
    )
    squares = []
    findings = []
    for i in range(len(f.movements)):
        worst, who = 0.0, f.dancers[0]
        for d in f.dancers:
            lhs = compose_movements(project(f.movements[i], d), project(components[i + 1], d))
            rhs = compose_movements(project(components[i], d), project(g.movements[i], d))
            dist = curve_distance(lhs.curve, rhs.curve, n_cmp)
            if dist > worst:
                worst, who = dist, d
        status = classify(worst, eps, eta)
        square = NaturalitySquare(f.interval_name(i), worst, status, who)
        squares.append(square)
        if status is not Status.EXACT:
            severity = "note" if status is Status.UP_TO_2CELL else "violation"
            detail = f"{status.value}, worst dancer {who}"
            findings.append(Finding(Diagram.D2, "naturality", square.interval, detail, worst, severity))
    app_logger.info("Naturality: %d squares, %d not exact", len(squares), len(findings))
    return ChoreoNatTransform(f, g, components, tuple(squares), LawReport(tuple(findings)))


def _scene_diagonal(*fs: ChoreographyFunctor) -> float:
    arrays = [p.coords for f in fs for fig in f.figures for p in fig.poses]
    arrays += [m.curve.samples for f in fs for gm in f.movements for m in gm.components]
    return bounding_diagonal(*arrays) or 1.0


# ---- Style 2-functors ----


@dataclass(frozen=True)
class AffineStyle:
    """Planar similarity (optionally mirrored) applied to every keypoint.

    Order: mirror about the vertical axis, scale, rotate (degrees,
    counterclockwise), translate.
    """

    scale: float = 1.0
    rotate: float = 0.0
    translate: tuple[float, float] = (0.0, 0.0)
    mirror: bool = False
    name: str = ""

    @property
    def matrix(self) -> np.ndarray:
        theta = math.radians(self.rotate)
        rot = np.array([[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]])
        flip = np.diag([-1.0 if self.mirror else 1.0, 1.0])
        return self.scale * rot @ flip

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Maps (..., 2K) flat configurations or (..., 2) points."""
        arr = np.asarray(points, dtype=float)
        pts = arr.reshape(-1, 2)
        out = pts @ self.matrix.T + np.asarray(self.translate, dtype=float)
        return out.reshape(arr.shape)

    def pose(self, p: Pose) -> Pose:
        return Pose(p.name, p.skeleton, self.apply(p.coords))

    def movement(self, m: Movement) -> Movement:
        c = m.curve
        curve = Curve(self.apply(c.samples), c.duration, c.times)
        return Movement(self.pose(m.source), self.pose(m.target), curve, m.name)

    def homotopy(self, h: MovementHomotopy) -> MovementHomotopy:
        return MovementHomotopy(self.movement(h.source), self.movement(h.target), self.apply(h.grid), h.durations)

    def maps(self):
        return self.pose, self.movement, self.homotopy


def style_map(
    f: ChoreographyFunctor,
    pose_map: Callable[[Pose], Pose],
    movement_map: Callable[[Movement], Movement],
    homotopy_map: Callable[[MovementHomotopy], MovementHomotopy],
    eps: float | None = None,
    label: str = "",
    n_cmp: int = N_CMP,
) -> tuple[ChoreographyFunctor, LawReport]:
    """Image of F under a style 2-functor, plus the report on its functoriality.

    Checks endpoints and composition of mapped 1-cells, preservation of
    identities, and that mapped 2-cells connect the mapped 1-cells. The image is
    returned even when violations are found.
    """
    prefix = f"{label}: " if label else ""
    if eps is None:
        eps = EPS_REL * _scene_diagonal(f)
    figures = {
        m.name: GroupFigure(fig.dancers, tuple(pose_map(p) for p in fig.poses))
        for m, fig in zip(f.marks, f.figures, strict=True)
    }
    moves = {}
    findings: list[Finding] = []
    broken: set[tuple[int, str]] = set()
    for i, gm in enumerate(f.movements):
        images = tuple(movement_map(m) for m in gm.components)
        moves[(f.marks[i].name, f.marks[i + 1].name)] = GroupMovement(gm.dancers, images)
        for d, m, image in zip(gm.dancers, gm.components, images, strict=True):
            if not (image.source.matches(pose_map(m.source)) and image.target.matches(pose_map(m.target))):
                broken.add((i, d))
                subject = f"{prefix}{d} {f.interval_name(i)}"
                detail = "mapped movement does not join the mapped poses"
                findings.append(Finding(Diagram.D2, "endpoints", subject, detail))
    for i in range(len(f.movements) - 1):
        for d in f.dancers:
            if (i, d) in broken or (i + 1, d) in broken:
                continue
            m1, m2 = project(f.movements[i], d), project(f.movements[i + 1], d)
            whole = movement_map(compose_movements(m1, m2))
            parts = compose_movements(movement_map(m1), movement_map(m2))
            dist = curve_distance(whole.curve, parts.curve, n_cmp)
            if dist > eps:
                subject = f"{prefix}{d} {f.interval_name(i)};{f.interval_name(i + 1)}"
                findings.append(Finding(Diagram.D2, "composition", subject, "S(g.f) differs from S(g).S(f)", dist))
    seen: set[str] = set()
    for fig in f.figures:
        for p in fig.poses:
            if p.name in seen:
                continue
            seen.add(p.name)
            image = movement_map(identity_movement(p, 1.0))
            ident = identity_movement(pose_map(p), 1.0)
            dist = curve_distance(image.curve, ident.curve, n_cmp)
            if dist > eps or not image.source.matches(ident.source):
                subject = f"{prefix}id_{p.name}"
                findings.append(Finding(Diagram.D2, "identity", subject, "S(id) is not an identity", dist))
    cells = []
    for cell in f.cells:
        image = homotopy_map(cell.homotopy)
        src = movement_map(cell.homotopy.source)
        tgt = movement_map(cell.homotopy.target)
        dist = max(
            curve_distance(image.source.curve, src.curve, n_cmp),
            curve_distance(image.target.curve, tgt.curve, n_cmp),
        )
        if dist > eps:
            subject = f"{prefix}{cell.dancer} {f.interval_name(cell.interval)}"
            detail = "mapped 2-cell does not connect the mapped movements"
            findings.append(Finding(Diagram.D3, "2-cell boundary", subject, detail, dist))
        cells.append(cell._replace(homotopy=image))
    styled = build_choreography(f.marks, figures, moves, cells)
    report = LawReport(tuple(findings))
    app_logger.info("Style map %s: %d findings", label or "(anonymous)", len(report.findings))
    return replace(styled, report=styled.report.merged(report)), report


# ---- Braids ----


def leader_swap(f: ChoreographyFunctor, at_mark: str) -> ChoreographyFunctor:
    """Braids the two dancer slots from `at_mark` onward; applying it twice restores F."""
    if len(f.dancers) != 2:
        raise ChoreographyError(f"leader swap needs a couple, got {len(f.dancers)} dancers")
    k = f.mark_index(at_mark)
    figures = tuple(braid_swap(fig, 0, 1) if i >= k else fig for i, fig in enumerate(f.figures))
    movements = tuple(braid_swap(gm, 0, 1) if i >= k else gm for i, gm in enumerate(f.movements))
    return replace(f, figures=figures, movements=movements)


# ---- Center of attention ----


@dataclass(frozen=True, eq=False)
class AttentionTrajectory:
    """Center-of-attention samples: times (T,), points (T, 2), total weights (T,)."""

    times: np.ndarray
    points: np.ndarray
    weights: np.ndarray | None = None

    def __post_init__(self) -> None:
        times = np.array(self.times, dtype=float).reshape(-1)
        points = np.array(self.points, dtype=float).reshape(-1, 2)
        weights = np.ones(times.size) if self.weights is None else np.array(self.weights, dtype=float).reshape(-1)
        if times.size == 0 or points.shape[0] != times.size or weights.size != times.size:
            raise ChoreographyError("trajectory needs one point and one weight per time sample")
        if np.any(np.diff(times) <= 0):
            raise ChoreographyError("trajectory times must be increasing")
        if np.any(weights <= 0):
            raise ChoreographyError("trajectory weights must be > 0")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "weights", weights)

    def __len__(self) -> int:
        return int(self.times.size)


def center_of_attention(
    f: ChoreographyFunctor,
    kappa: float = 0.5,
    resolution: float = 8.0,
    weights: Mapping[str, float] | None = None,
) -> AttentionTrajectory:
    """Weighted mean of dancer centroids, weight 1 + kappa x (mean keypoint speed).

    `resolution` is samples per beat; `weights` overrides the speed weighting
    with fixed per-dancer weights.
    """
    if kappa < 0:
        raise ChoreographyError(f"kappa must be >= 0, got {kappa}")
    times = sample_times(f, resolution)
    configs = _sample(f, times)
    centroids = np.stack([configs[d].reshape(times.size, -1, 2).mean(axis=1) for d in f.dancers])
    if weights is None and kappa == 0:
        return AttentionTrajectory(times, centroids.mean(axis=0), np.full(times.size, float(len(f.dancers))))
    if weights is not None:
        w = np.stack([np.full(times.size, float(weights[d])) for d in f.dancers])
    else:
        velocities = _sample(f, times, velocity=True)
        speeds = np.stack(
            [np.linalg.norm(velocities[d].reshape(times.size, -1, 2), axis=2).mean(axis=1) for d in f.dancers]
        )
        w = 1.0 + kappa * speeds
    total = w.sum(axis=0)
    points = (w[:, :, None] * centroids).sum(axis=0) / total[:, None]
    return AttentionTrajectory(times, points, total)


def trajectory_distance(a: AttentionTrajectory, b: AttentionTrajectory) -> float:
    """Sup distance on a common uniform grid over the overlap of both time spans."""
    lo = max(a.times[0], b.times[0])
    hi = min(a.times[-1], b.times[-1])
    if lo > hi:
        raise ChoreographyError(f"trajectory spans are disjoint (overlap would be [{lo}, {hi}])")
    grid = np.linspace(lo, hi, max(len(a), len(b))) if hi > lo else np.array([lo])

    def resample(t: AttentionTrajectory) -> np.ndarray:
        return np.stack([np.interp(grid, t.times, t.points[:, k]) for k in range(2)], axis=1)

    return float(np.max(np.linalg.norm(resample(a) - resample(b), axis=1)))


# ---- Ensemble synchronization ----


NO_PULSE_ALIGNMENT = "no pulse alignment"


def check_ensemble_sync(
    conductor: PulseTrack,
    musician_onsets: Sequence[float],
    dancer_onsets: Sequence[float],
    window: float,
    eta: float,
    eps: float | None = None,
) -> CommutativityReport:
    """Compares the composite conductor -> musician -> dancer with the conductor's beats.

    Musician onsets are quantized against the beats, dancer onsets against the
    musician onsets; the discrepancy is the worst |dancer onset - beat| over
    dancer onsets reaching a beat through a musician onset.
    """
    if not window > 0 or not eta > 0:
        raise ChoreographyError("window and eta must be > 0")
    if eps is None:
        eps = EPS_REL * max(conductor.span, 1.0)
    failures: list[str] = []
    music = np.asarray(musician_onsets, dtype=float).reshape(-1)
    dance = np.asarray(dancer_onsets, dtype=float).reshape(-1)
    if music.size == 0:
        return CommutativityReport(Status.FAILS, 0.0, None, (NO_PULSE_ALIGNMENT, "no musician onsets"))
    q_music = quantize_onsets(music, conductor, window)
    failures.extend(f"musician onset {i} unmatched" for i in q_music.unmatched)

    order = np.argsort(music, kind="stable")
    # coincident musician onsets leave the dancer nothing to follow
    try:
        musician_track = PulseTrack(music[order], np.ones(music.size), 1, conductor.bpm)
        q_dance = quantize_onsets(dance, musician_track, window)
    except ChoreoError as e:
        detail = f"musician onsets cannot form a pulse: {e}"
        app_logger.warning("Ensemble sync: %s", detail)
        return CommutativityReport(Status.FAILS, 0.0, None, (NO_PULSE_ALIGNMENT, *failures, detail))
    failures.extend(f"dancer onset {j} unmatched" for j in q_dance.unmatched)

    worst, witness, aligned = 0.0, None, 0
    for j, k in enumerate(q_dance.indices):
        if k < 0:
            continue
        m = int(order[k])
        beat = int(q_music.indices[m])
        if beat < 0:
            failures.append(f"dancer onset {j} follows musician onset {m}, which has no beat")
            continue
        aligned += 1
        d = abs(float(dance[j]) - float(conductor.beats[beat]))
        if witness is None or d > worst:
            worst, witness = d, (f"dancer onset {j}", f"beat {beat}")
    if aligned == 0:
        failures.insert(0, NO_PULSE_ALIGNMENT)
        app_logger.warning("Ensemble sync: %s", NO_PULSE_ALIGNMENT)
        return CommutativityReport(Status.FAILS, worst, witness, tuple(failures))
    status = Status.FAILS if failures else classify(worst, eps, eta)
    app_logger.info("Ensemble sync: %s (%.3g) over %d aligned onsets", status.value, worst, aligned)
    return CommutativityReport(status, worst, witness, tuple(failures))
