"""Categorical engine over gesture space.

Composition of movements (1-cells) and homotopies (2-cells), identities, the
monoidal tensor for simultaneous dancers, braiding, and the generic checkers
used by every higher layer: functor laws, commutativity up to a 2-cell and
connectivity.
"""

from __future__ import annotations

from enum import Enum
from functools import reduce
from itertools import combinations
from typing import NamedTuple
from dataclasses import dataclass
from collections.abc import Mapping, Iterable, Sequence

import numpy as np
import networkx as nx

from logger.logger import app_logger

from choreo.errors import (
    GestureError,
    CategoryError,
    NotParallelError,
    PathBudgetExceeded,
    NonComposableError,
)
from choreo.gesture import (
    EPS_REL,
    N_CMP,
    Pose,
    Curve,
    Movement,
    MovementHomotopy,
    curve_distance,
    bounding_diagonal,
    normalize_movement,
)

PATH_CUTOFF = 8
DURATION_RTOL = 1e-12


class Diagram(str, Enum):
    """Which categorical structure a finding is about."""

    D1 = "D1"
    D2 = "D2"
    D3 = "D3"
    D4 = "D4"
    D5 = "D5"
    D6 = "D6"
    D7 = "D7"
    D8 = "D8"
    D9 = "D9"

    @property
    def title(self) -> str:
        return DIAGRAM_TITLES[self]


DIAGRAM_TITLES = {
    Diagram.D1: "dance 2-category",
    Diagram.D2: "style functor",
    Diagram.D3: "style 2-cells",
    Diagram.D4: "pulse-dance functor",
    Diagram.D5: "pulse-conducting functor",
    Diagram.D6: "conductor/musician/dancer triangle",
    Diagram.D7: "commutativity up to a 2-cell",
    Diagram.D8: "monoidal tensor and braiding",
    Diagram.D9: "smoothing operator",
}


class Status(str, Enum):
    EXACT = "exact"
    UP_TO_2CELL = "up_to_2cell"
    FAILS = "fails"


def classify(discrepancy: float, eps: float, eta: float) -> Status:
    """exact within eps, up to a 2-cell within eta, fails beyond."""
    if discrepancy <= eps:
        return Status.EXACT
    if discrepancy <= eta:
        return Status.UP_TO_2CELL
    return Status.FAILS


class Finding(NamedTuple):
    """One law-check outcome. `severity` is "violation" or "note"."""

    diagram: Diagram
    law: str
    subject: str
    detail: str = ""
    discrepancy: float = 0.0
    severity: str = "violation"

    @property
    def is_violation(self) -> bool:
        return self.severity == "violation"

    def render(self) -> str:
        head = f"[{self.diagram.value}] {self.law}: {self.subject}"
        return f"{head} ({self.detail})" if self.detail else head

    def as_dict(self) -> dict:
        return {
            "diagram": self.diagram.value,
            "law": self.law,
            "subject": self.subject,
            "detail": self.detail,
            "discrepancy": round(float(self.discrepancy), 9),
            "severity": self.severity,
        }


class LawReport(NamedTuple):
    findings: tuple[Finding, ...] = ()

    @property
    def violations(self) -> tuple[Finding, ...]:
        return tuple(f for f in self.findings if f.is_violation)

    @property
    def notes(self) -> tuple[Finding, ...]:
        return tuple(f for f in self.findings if not f.is_violation)

    @property
    def clean(self) -> bool:
        return not self.violations

    def merged(self, *others: LawReport) -> LawReport:
        out = list(self.findings)
        for other in others:
            out.extend(other.findings)
        return LawReport(tuple(out))

    def summary(self) -> dict:
        """Violation counts per diagram label, in label order."""
        counts: dict[str, int] = {}
        for d in Diagram:
            n = sum(1 for f in self.violations if f.diagram is d)
            if n:
                counts[d.value] = n
        return {"violations": len(self.violations), "notes": len(self.notes), "by_diagram": counts}


class CommutativityReport(NamedTuple):
    status: Status
    discrepancy: float
    witness: tuple[str, str] | None = None
    failures: tuple[str, ...] = ()


# ---- 1-cells ----


def identity_movement(p: Pose, duration: float) -> Movement:
    """Constant curve at p: the absence of movement."""
    if not duration > 0:
        raise GestureError(f"identity duration must be > 0, got {duration}")
    return Movement(p, p, Curve(np.vstack([p.coords, p.coords]), duration), f"id_{p.name}")


def compose_movements(f: Movement, g: Movement) -> Movement:
    """f then g. Knots are concatenated, so f keeps its share dur_f / (dur_f + dur_g) of the time."""
    if not f.target.matches(g.source):
        same_body = f.target.skeleton.keypoints == g.source.skeleton.keypoints
        detail = f"off by {f.target.distance(g.source):g}" if same_body else "different skeletons"
        raise NonComposableError(f.target.name, g.source.name, detail)
    fc, gc = f.curve, g.curve
    assert fc.times is not None and gc.times is not None
    samples = np.vstack([fc.samples, gc.samples[1:]])
    times = np.concatenate([fc.times, gc.times[1:] + fc.duration])
    name = f"{f.name};{g.name}" if f.name and g.name else ""
    return Movement(f.source, g.target, Curve(samples, fc.duration + gc.duration, times), name)


def compose_path(movements: Sequence[Movement]) -> Movement:
    if not movements:
        raise CategoryError("cannot compose an empty path")
    return reduce(compose_movements, movements)


# ---- 2-cells ----


def _resample_rows(grid: np.ndarray, durations: np.ndarray, positions: np.ndarray, m: int):
    """Rows at uniform parameters in [0, 1], linear between the rows found at `positions`."""
    targets = np.linspace(0.0, 1.0, m)
    idx = np.clip(np.searchsorted(positions, targets, side="right") - 1, 0, len(positions) - 2)
    span = positions[idx + 1] - positions[idx]
    frac = np.where(span > 0, (targets - positions[idx]) / np.where(span > 0, span, 1.0), 0.0)
    frac = np.where(frac < 1e-12, 0.0, np.where(frac > 1.0 - 1e-12, 1.0, frac))
    rows = (1.0 - frac)[:, None, None] * grid[idx] + frac[:, None, None] * grid[idx + 1]
    durs = (1.0 - frac) * durations[idx] + frac * durations[idx + 1]
    return rows, durs


def vertical_compose(alpha: MovementHomotopy, beta: MovementHomotopy, eps: float | None = None) -> MovementHomotopy:
    """alpha then beta: alpha runs on [0, 1/2], beta on [1/2, 1], resampled to max(M) rows."""
    if alpha.samples != beta.samples:
        raise GestureError(f"homotopy resolutions differ: {alpha.samples} vs {beta.samples} samples")
    middle = curve_distance(alpha.target.curve, beta.source.curve, alpha.samples)
    tol = eps if eps is not None else EPS_REL * (bounding_diagonal(alpha.grid, beta.grid) or 1.0)
    if middle > tol or not alpha.target.source.matches(beta.source.source):
        raise NotParallelError(f"alpha's target movement is not beta's source (off by {middle:g})")
    assert alpha.durations is not None and beta.durations is not None
    stacked = np.concatenate([alpha.grid, beta.grid[1:]])
    durations = np.concatenate([alpha.durations, beta.durations[1:]])
    positions = np.concatenate(
        [np.linspace(0.0, 0.5, alpha.steps), np.linspace(0.5, 1.0, beta.steps)[1:]]
    )
    rows, durs = _resample_rows(stacked, durations, positions, max(alpha.steps, beta.steps))
    return MovementHomotopy(alpha.source, beta.target, rows, durs)


def horizontal_compose(alpha: MovementHomotopy, beta: MovementHomotopy) -> MovementHomotopy:
    """Row k is the composite of row k of alpha and row k of beta, normalized to alpha's resolution."""
    if not alpha.source.target.matches(beta.source.source):
        raise NonComposableError(alpha.source.target.name, beta.source.source.name, "2-cells are not composable")
    m = max(alpha.steps, beta.steps)
    n = alpha.samples
    a_rows, a_durs = _rows_at(alpha, m)
    b_rows, b_durs = _rows_at(beta, m)
    grid = []
    for k in range(m):
        left = Movement(alpha.source.source, alpha.source.target, Curve(a_rows[k], float(a_durs[k])))
        right = Movement(beta.source.source, beta.source.target, Curve(b_rows[k], float(b_durs[k])))
        grid.append(normalize_movement(compose_movements(left, right), n).curve.samples)
    source = normalize_movement(compose_movements(alpha.source, beta.source), n)
    target = normalize_movement(compose_movements(alpha.target, beta.target), n)
    grid[0] = source.curve.samples
    grid[-1] = target.curve.samples
    return MovementHomotopy(source, target, np.stack(grid), a_durs + b_durs)


def _rows_at(h: MovementHomotopy, m: int) -> tuple[np.ndarray, np.ndarray]:
    assert h.durations is not None
    if h.steps == m:
        return h.grid, h.durations
    return _resample_rows(h.grid, h.durations, np.linspace(0.0, 1.0, h.steps), m)


def identity_homotopy(m: Movement, steps: int = 2, samples: int = N_CMP) -> MovementHomotopy:
    nm = normalize_movement(m, samples)
    grid = np.repeat(nm.curve.samples[None, :, :], steps, axis=0)
    return MovementHomotopy(nm, nm, grid, np.full(steps, m.duration))


# ---- Monoidal structure ----


@dataclass(frozen=True)
class GroupFigure:
    """Poses of several dancers held at the same instant."""

    dancers: tuple[str, ...]
    poses: tuple[Pose, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "dancers", tuple(self.dancers))
        object.__setattr__(self, "poses", tuple(self.poses))
        _check_slots(self.dancers, len(self.poses))

    def pose_of(self, dancer: str) -> Pose:
        return self.poses[_slot(self.dancers, dancer)]

    def matches(self, other: GroupFigure) -> bool:
        """Same dancers holding matching poses, slot order ignored."""
        if set(self.dancers) != set(other.dancers):
            return False
        return all(p.matches(other.pose_of(d)) for d, p in zip(self.dancers, self.poses, strict=True))


@dataclass(frozen=True)
class GroupMovement:
    """Simultaneous movements, one per dancer, sharing a duration."""

    dancers: tuple[str, ...]
    components: tuple[Movement, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "dancers", tuple(self.dancers))
        object.__setattr__(self, "components", tuple(self.components))
        _check_slots(self.dancers, len(self.components))
        d0 = self.components[0].duration
        for dancer, m in zip(self.dancers, self.components, strict=True):
            if abs(m.duration - d0) > DURATION_RTOL * d0:
                raise CategoryError(f"component durations disagree: '{dancer}' has {m.duration}, expected {d0}")

    @property
    def duration(self) -> float:
        return self.components[0].duration

    @property
    def source(self) -> GroupFigure:
        return GroupFigure(self.dancers, tuple(m.source for m in self.components))

    @property
    def target(self) -> GroupFigure:
        return GroupFigure(self.dancers, tuple(m.target for m in self.components))


def _check_slots(dancers: tuple[str, ...], count: int) -> None:
    if not dancers:
        raise CategoryError("a group needs at least one dancer")
    if len(dancers) != count:
        raise CategoryError(f"{len(dancers)} dancers but {count} entries")
    if len(set(dancers)) != len(dancers):
        raise CategoryError(f"duplicate dancer identifiers: {', '.join(dancers)}")


def _slot(dancers: tuple[str, ...], dancer: str) -> int:
    try:
        return dancers.index(dancer)
    except ValueError as e:
        raise CategoryError(f"unknown dancer '{dancer}'") from e


def project(gm: GroupMovement, dancer: str) -> Movement:
    return gm.components[_slot(gm.dancers, dancer)]


def _dwell_pad(m: Movement, duration: float) -> Movement:
    if m.duration >= duration:
        return m
    c = m.curve
    assert c.times is not None
    samples = np.vstack([c.samples, c.samples[-1:]])
    times = np.append(c.times, duration)
    return Movement(m.source, m.target, Curve(samples, duration, times), m.name)


def tensor_movements(ms: Sequence[Movement], dancers: Sequence[str] | None = None) -> GroupMovement:
    """Simultaneous product; shorter components dwell at their target until the longest ends."""
    if not ms:
        raise CategoryError("cannot tensor an empty list of movements")
    ids = tuple(dancers) if dancers is not None else tuple(f"dancer{i}" for i in range(len(ms)))
    longest = max(m.duration for m in ms)
    return GroupMovement(ids, tuple(_dwell_pad(m, longest) for m in ms))


def identity_group_movement(figure: GroupFigure, duration: float) -> GroupMovement:
    return GroupMovement(figure.dancers, tuple(identity_movement(p, duration) for p in figure.poses))


def compose_group_movements(a: GroupMovement, b: GroupMovement) -> GroupMovement:
    """Per-dancer composition matched by dancer identifier; slot order follows `a`."""
    if set(a.dancers) != set(b.dancers):
        raise CategoryError(f"dancer sets differ: {sorted(a.dancers)} vs {sorted(b.dancers)}")
    parts = (compose_movements(m, project(b, d)) for d, m in zip(a.dancers, a.components, strict=True))
    return GroupMovement(a.dancers, tuple(parts))


def braid_swap(x: GroupFigure | GroupMovement, i: int, j: int) -> GroupFigure | GroupMovement:
    """Exchanges dancer slots i and j, dancers travelling with their poses or movements."""
    size = len(x.dancers)
    if not (0 <= i < size and 0 <= j < size):
        raise CategoryError(f"braid indices ({i}, {j}) out of range for {size} dancers")
    dancers = list(x.dancers)
    dancers[i], dancers[j] = dancers[j], dancers[i]
    if isinstance(x, GroupFigure):
        poses = list(x.poses)
        poses[i], poses[j] = poses[j], poses[i]
        return GroupFigure(tuple(dancers), tuple(poses))
    comps = list(x.components)
    comps[i], comps[j] = comps[j], comps[i]
    return GroupMovement(tuple(dancers), tuple(comps))


# ---- Law checkers ----


def check_functor_laws(
    object_map: Mapping[str, Pose],
    morphism_map: Mapping[tuple[str, ...], Movement],
    generators: Iterable[tuple[str, str, str]],
    eps: float,
    identities: Mapping[str, Movement] | None = None,
    diagram: Diagram = Diagram.D1,
    n_cmp: int = N_CMP,
) -> LawReport:
    """Checks a candidate functor from a finite category into the dance category.

    `generators` are (source, target, name) triples; `morphism_map` sends paths
    (tuples of generator names) to movements and must contain every
    single-generator path. `identities` optionally gives the images of
    identity arrows per object.
    """
    gens = {name: (src, tgt) for src, tgt, name in generators}
    findings: list[Finding] = []

    for name, (src, tgt) in gens.items():
        image = morphism_map.get((name,))
        if image is None:
            findings.append(Finding(diagram, "totality", name, "generator has no image"))
            continue
        if src not in object_map or tgt not in object_map:
            findings.append(Finding(diagram, "totality", name, "endpoint object has no image"))
            continue
        if not image.source.matches(object_map[src]) or not image.target.matches(object_map[tgt]):
            findings.append(
                Finding(
                    diagram,
                    "endpoints",
                    name,
                    f"image runs {image.source.name}->{image.target.name}, "
                    f"objects map to {object_map[src].name}->{object_map[tgt].name}",
                )
            )

    for obj, image in (identities or {}).items():
        if obj not in object_map:
            findings.append(Finding(diagram, "totality", f"id_{obj}", "object has no image"))
            continue
        d = curve_distance(image.curve, identity_movement(object_map[obj], image.duration).curve, n_cmp)
        if d > eps or not image.source.matches(object_map[obj]) or not image.target.matches(object_map[obj]):
            findings.append(Finding(diagram, "identity", f"id_{obj}", "F(id) is not an identity", d))

    # every composable generator pair, plus any longer paths supplied explicitly
    paths = {p for p in morphism_map if len(p) >= 2}
    paths.update((a, b) for a in gens for b in gens if gens[a][1] == gens[b][0])
    for path in sorted(paths):
        subject = ";".join(path)
        if any(p not in gens for p in path) or any(gens[a][1] != gens[b][0] for a, b in zip(path, path[1:])):
            findings.append(Finding(diagram, "composition", subject, "not a path of generators"))
            continue
        parts = [morphism_map.get((p,)) for p in path]
        if any(m is None for m in parts):
            continue
        try:
            composite = compose_path(parts)  # type: ignore[arg-type]
        except NonComposableError as e:
            findings.append(Finding(diagram, "composition", subject, str(e)))
            continue
        image = morphism_map.get(path)
        if image is None:
            continue
        d = curve_distance(image.curve, composite.curve, n_cmp)
        if d > eps:
            findings.append(Finding(diagram, "composition", subject, "F(g.f) differs from F(g).F(f)", d))
        expected = sum(m.duration for m in parts)  # type: ignore[union-attr]
        if abs(image.duration - expected) > DURATION_RTOL * expected:
            findings.append(
                Finding(
                    diagram,
                    "duration",
                    subject,
                    f"duration {image.duration:g} is not the sum {expected:g}",
                    abs(image.duration - expected),
                )
            )
    return LawReport(tuple(findings))


class Generator(NamedTuple):
    source: str
    target: str
    name: str
    payload: Movement | None = None


@dataclass(frozen=True)
class FiniteCategoryGraph:
    """Objects, generating arrows and optional declared path equalities."""

    objects: tuple[str, ...]
    generators: tuple[Generator, ...] = ()
    relations: tuple[tuple[tuple[str, ...], tuple[str, ...]], ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "objects", tuple(self.objects))
        object.__setattr__(self, "generators", tuple(Generator(*g) for g in self.generators))
        object.__setattr__(self, "relations", tuple((tuple(a), tuple(b)) for a, b in self.relations))
        known = set(self.objects)
        if len(known) != len(self.objects):
            raise CategoryError("duplicate object identifiers")
        names = [g.name for g in self.generators]
        if len(set(names)) != len(names):
            raise CategoryError("duplicate generator names")
        for g in self.generators:
            if g.source not in known or g.target not in known:
                raise CategoryError(f"generator '{g.name}' references an undeclared object")
        for lhs, rhs in self.relations:
            if not lhs or not rhs or self.path_ends(lhs) != self.path_ends(rhs):
                raise CategoryError(f"relation {'.'.join(lhs)} = {'.'.join(rhs)} does not relate parallel paths")

    def generator(self, name: str) -> Generator:
        for g in self.generators:
            if g.name == name:
                return g
        raise CategoryError(f"unknown generator '{name}'")

    def path_ends(self, path: Sequence[str]) -> tuple[str, str]:
        gens = [self.generator(p) for p in path]
        for a, b in zip(gens, gens[1:]):
            if a.target != b.source:
                raise CategoryError(f"'{a.name}' and '{b.name}' are not consecutive")
        return gens[0].source, gens[-1].target

    def to_networkx(self) -> nx.MultiDiGraph:
        g = nx.MultiDiGraph()
        g.add_nodes_from(self.objects)
        for gen in self.generators:
            g.add_edge(gen.source, gen.target, key=gen.name, payload=gen.payload)
        return g


def _parallel_paths(g: FiniteCategoryGraph, max_length: int) -> list[tuple[tuple[str, ...], tuple[str, ...]]]:
    if g.relations:
        return list(g.relations)
    graph = g.to_networkx()
    if not nx.is_directed_acyclic_graph(graph):
        raise PathBudgetExceeded("cyclic graph without declared relations: path enumeration is unbounded")
    if graph.number_of_edges() and nx.dag_longest_path_length(graph) > max_length:
        raise PathBudgetExceeded(f"paths longer than {max_length} arrows")
    pairs = []
    for s in g.objects:
        for t in g.objects:
            if s == t:
                continue
            paths = [tuple(k for _, _, k in p) for p in nx.all_simple_edge_paths(graph, s, t)]
            pairs.extend(combinations(sorted(paths), 2))
    return pairs


def check_diagram_commutes(
    g: FiniteCategoryGraph,
    eta: float,
    eps: float | None = None,
    max_length: int = PATH_CUTOFF,
    n_cmp: int = N_CMP,
) -> CommutativityReport:
    """Worst discrepancy over every pair of parallel paths, classified against eps and eta."""
    pairs = _parallel_paths(g, max_length)
    payloads = {gen.name: gen.payload for gen in g.generators}
    if eps is None:
        diag = bounding_diagonal(*(m.curve.samples for m in payloads.values() if m is not None))
        eps = EPS_REL * (diag if diag > 0 else 1.0)
    worst, witness = 0.0, None
    cache: dict[tuple[str, ...], Movement] = {}
    for lhs, rhs in pairs:
        d = curve_distance(_path_payload(lhs, payloads, cache).curve, _path_payload(rhs, payloads, cache).curve, n_cmp)
        if witness is None or d > worst:
            worst, witness = d, (";".join(lhs), ";".join(rhs))
    status = classify(worst, eps, eta)
    app_logger.info("Commutativity over %d path pairs: %s (%.3g)", len(pairs), status.value, worst)
    return CommutativityReport(status, worst, witness)


def _path_payload(path, payloads, cache) -> Movement:
    if path not in cache:
        missing = [p for p in path if payloads.get(p) is None]
        if missing:
            raise CategoryError(f"generators without payload: {', '.join(missing)}")
        cache[path] = compose_path([payloads[p] for p in path])
    return cache[path]


class ZigzagStep(NamedTuple):
    arrow: str
    forward: bool


class Zigzag(NamedTuple):
    """Objects j0..j2n joined by arrows j0 -> j1 <- j2 -> ... <- j2n."""

    objects: tuple[str, ...]
    steps: tuple[ZigzagStep, ...]


class ConnectivityReport(NamedTuple):
    connected: bool
    zigzags: Mapping[tuple[str, str], Zigzag]
    counterexample: tuple[str, str] | None = None


def check_connected(g: FiniteCategoryGraph) -> ConnectivityReport:
    """Connectivity of the underlying undirected graph, with one alternating zigzag per object pair."""
    if not g.objects:
        return ConnectivityReport(False, {})
    undirected = nx.Graph()
    undirected.add_nodes_from(g.objects)
    for gen in sorted(g.generators, key=lambda x: x.name):
        if gen.source == gen.target:
            continue
        if undirected.has_edge(gen.source, gen.target):
            continue
        undirected.add_edge(gen.source, gen.target, arrow=gen)
    if not nx.is_connected(undirected):
        anchor = g.objects[0]
        reach = nx.node_connected_component(undirected, anchor)
        other = next(o for o in g.objects if o not in reach)
        return ConnectivityReport(False, {}, (anchor, other))
    zigzags = {}
    for a, b in combinations(g.objects, 2):
        zigzags[(a, b)] = _zigzag(undirected, nx.shortest_path(undirected, a, b))
    return ConnectivityReport(True, zigzags)


def _zigzag(undirected: nx.Graph, path: list[str]) -> Zigzag:
    objects = [path[0]]
    steps: list[ZigzagStep] = []
    forward = True
    for u, v in zip(path, path[1:]):
        arrow: Generator = undirected.edges[u, v]["arrow"]
        direction = arrow.source == u
        if direction != forward:
            steps.append(ZigzagStep(f"id_{u}", forward))
            objects.append(u)
            forward = not forward
        steps.append(ZigzagStep(arrow.name, direction))
        objects.append(v)
        forward = not forward
    if not forward:
        steps.append(ZigzagStep(f"id_{path[-1]}", False))
        objects.append(path[-1])
    return Zigzag(tuple(objects), tuple(steps))
