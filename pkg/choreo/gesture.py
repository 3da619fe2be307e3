"""Gesture space: poses, curves and movements in planar body-configuration space.

A configuration of a skeleton with K keypoints is a vector of R^(2K)
laid out as (x0, y0, x1, y1, ...). Curves are piecewise linear in time
between knots. Contents:
- Skeleton / Pose / Curve / Movement / MovementHomotopy value types;
- normalize_curve, curve_distance, homotopy_distance (the comparison layer);
- linear_homotopy, smooth_movement (2-cells);
- linear_movement, bezier_movement, stance_pose (constructors used by the script front end);
- AbstractDiagram / Realization and realize_diagram.
"""

from __future__ import annotations

import math
from types import MappingProxyType
from typing import NamedTuple
from dataclasses import field, dataclass
from collections.abc import Mapping, Callable, Sequence

import numpy as np

from logger.logger import app_logger

from choreo.errors import GestureError, NotParallelError, NotAFunctorError

EPS_PT = 1e-9
EPS_REL = 1e-6
ETA_REL = 0.05
N_CMP = 64

# equal-chord solver
_CHORD_TOL = 1e-10
_NEWTON_TOL = 1e-12
_NEWTON_MAX_ITER = 60
_NEWTON_MIN_STEP = 1.0 / 1024
_RESAMPLE_ROUNDS = 8

DEFAULT_KEYPOINTS = (
    "head",
    "torso",
    "left-hand",
    "right-hand",
    "left-knee",
    "right-knee",
    "left-foot",
    "right-foot",
)
DEFAULT_EDGES = (
    ("head", "torso"),
    ("torso", "left-hand"),
    ("torso", "right-hand"),
    ("torso", "left-knee"),
    ("torso", "right-knee"),
    ("left-knee", "left-foot"),
    ("right-knee", "right-foot"),
)

# y is up, feet on the floor at y = 0
STANCES: Mapping[str, Mapping[str, tuple[float, float]]] = MappingProxyType(
    {
        "standing": {
            "head": (0.0, 1.7),
            "torso": (0.0, 1.2),
            "left-hand": (-0.35, 0.85),
            "right-hand": (0.35, 0.85),
            "left-knee": (-0.12, 0.5),
            "right-knee": (0.12, 0.5),
            "left-foot": (-0.12, 0.0),
            "right-foot": (0.12, 0.0),
        },
        "arms-up": {
            "head": (0.0, 1.7),
            "torso": (0.0, 1.2),
            "left-hand": (-0.3, 2.1),
            "right-hand": (0.3, 2.1),
            "left-knee": (-0.12, 0.5),
            "right-knee": (0.12, 0.5),
            "left-foot": (-0.12, 0.0),
            "right-foot": (0.12, 0.0),
        },
        "plie": {
            "head": (0.0, 1.5),
            "torso": (0.0, 1.0),
            "left-hand": (-0.45, 1.0),
            "right-hand": (0.45, 1.0),
            "left-knee": (-0.35, 0.45),
            "right-knee": (0.35, 0.45),
            "left-foot": (-0.25, 0.0),
            "right-foot": (0.25, 0.0),
        },
        "lunge": {
            "head": (0.25, 1.5),
            "torso": (0.15, 1.0),
            "left-hand": (-0.3, 1.0),
            "right-hand": (0.6, 1.1),
            "left-knee": (-0.35, 0.35),
            "right-knee": (0.5, 0.5),
            "left-foot": (-0.6, 0.0),
            "right-foot": (0.55, 0.0),
        },
        "arabesque": {
            "head": (0.4, 1.45),
            "torso": (0.1, 1.15),
            "left-hand": (0.8, 1.5),
            "right-hand": (-0.5, 1.3),
            "left-knee": (0.0, 0.5),
            "right-knee": (-0.5, 1.0),
            "left-foot": (0.0, 0.0),
            "right-foot": (-0.95, 1.15),
        },
    }
)


class Tolerance(NamedTuple):
    """Comparison tolerances.

    Attributes:
        eps_pt: absolute point tolerance for pose identity.
        eps_rel: ε_cv as a fraction of the bounding-box diagonal.
        eta_rel: 2-cell budget η as a fraction of the bounding-box diagonal.
        n_cmp: comparison resolution (samples per normalized curve).
        eps: absolute ε_cv override (configuration units), None to scale by diagonal.
        eta: absolute η override, None to scale by diagonal.
    """

    eps_pt: float = EPS_PT
    eps_rel: float = EPS_REL
    eta_rel: float = ETA_REL
    n_cmp: int = N_CMP
    eps: float | None = None
    eta: float | None = None

    def eps_cv(self, diag: float) -> float:
        """ε_cv for a scene whose bounding-box diagonal is `diag`."""
        if self.eps is not None:
            return self.eps
        return self.eps_rel * (diag if diag > 0 else 1.0)

    def eta_abs(self, diag: float) -> float:
        """η for a scene whose bounding-box diagonal is `diag`."""
        if self.eta is not None:
            return self.eta
        return self.eta_rel * (diag if diag > 0 else 1.0)


def bounding_diagonal(*arrays) -> float:
    """Diagonal of the planar bounding box of every point in `arrays` (flat configurations or point lists)."""
    pts = [np.asarray(a, dtype=float).reshape(-1, 2) for a in arrays if np.asarray(a).size]
    if not pts:
        return 0.0
    stacked = np.vstack(pts)
    return float(np.linalg.norm(stacked.max(axis=0) - stacked.min(axis=0)))


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Skeleton:
    """Named list of planar keypoints plus the bones drawn between them."""

    name: str
    keypoints: tuple[str, ...] = DEFAULT_KEYPOINTS
    edges: tuple[tuple[str, str], ...] | None = None

    def __post_init__(self) -> None:
        keypoints = tuple(self.keypoints)
        if not keypoints:
            raise GestureError(f"skeleton '{self.name}' has no keypoints")
        if len(set(keypoints)) != len(keypoints):
            raise GestureError(f"skeleton '{self.name}' has duplicate keypoint labels")
        object.__setattr__(self, "keypoints", keypoints)
        if self.edges is None:
            labels = set(keypoints)
            edges = tuple(e for e in DEFAULT_EDGES if e[0] in labels and e[1] in labels)
        else:
            edges = tuple((a, b) for a, b in self.edges)
            unknown = sorted({lbl for e in edges for lbl in e} - set(keypoints))
            if unknown:
                raise GestureError(f"skeleton '{self.name}' edges reference unknown keypoints: {', '.join(unknown)}")
        object.__setattr__(self, "edges", edges)

    @property
    def size(self) -> int:
        return len(self.keypoints)

    @property
    def dim(self) -> int:
        return 2 * len(self.keypoints)

    def index(self, label: str) -> int:
        """Position of `label` in the keypoint list."""
        try:
            return self.keypoints.index(label)
        except ValueError as e:
            raise GestureError(f"skeleton '{self.name}' has no keypoint '{label}'") from e


@dataclass(frozen=True, eq=False)
class Pose:
    """A 0-cell: a skeleton's configuration, stored flat as (x0, y0, x1, y1, ...)."""

    name: str
    skeleton: Skeleton
    coords: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.coords, dtype=float).reshape(-1)
        if arr.size != self.skeleton.dim:
            raise GestureError(
                f"pose '{self.name}' has {arr.size // 2} keypoints, skeleton '{self.skeleton.name}' "
                f"expects {self.skeleton.size}"
            )
        if not np.all(np.isfinite(arr)):
            raise GestureError(f"pose '{self.name}' has non-finite coordinates")
        object.__setattr__(self, "coords", _readonly(arr))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Pose):
            return NotImplemented
        return (
            self.name == other.name
            and self.skeleton == other.skeleton
            and np.array_equal(self.coords, other.coords)
        )

    def __hash__(self) -> int:
        return hash((self.name, self.skeleton))

    def __repr__(self) -> str:
        return f"Pose({self.name!r}, {self.skeleton.name!r})"

    @property
    def points(self) -> np.ndarray:
        """Keypoints as a (K, 2) array."""
        return self.coords.reshape(-1, 2)

    def centroid(self) -> np.ndarray:
        return self.points.mean(axis=0)

    def distance(self, other: Pose) -> float:
        """Euclidean distance in configuration space."""
        return float(np.linalg.norm(self.coords - other.coords))

    def matches(self, other: Pose, eps: float = EPS_PT) -> bool:
        """Pose identity: same keypoint labels and configurations within `eps`."""
        return self.skeleton.keypoints == other.skeleton.keypoints and self.distance(other) <= eps

    def translated(self, offset: Sequence[float], name: str | None = None) -> Pose:
        shifted = self.points + np.asarray(offset, dtype=float).reshape(1, 2)
        return Pose(name or self.name, self.skeleton, shifted)

    def mapped(self, fn: Callable[[np.ndarray], np.ndarray], name: str | None = None) -> Pose:
        """Applies `fn` to the (K, 2) keypoint array."""
        return Pose(name or self.name, self.skeleton, fn(self.points))


@dataclass(frozen=True, eq=False)
class Curve:
    """Sampled curve in configuration space.

    `samples` is (N, D) with N >= 2; `times` are the knot times (nondecreasing,
    from 0 to `duration`), uniform when omitted.
    """

    samples: np.ndarray
    duration: float
    times: np.ndarray | None = None

    def __post_init__(self) -> None:
        arr = np.array(self.samples, dtype=float)
        if arr.ndim != 2 or arr.shape[0] < 2:
            raise GestureError(f"curve needs at least 2 samples of equal dimension, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise GestureError("curve has non-finite samples")
        duration = float(self.duration)
        if not math.isfinite(duration) or duration <= 0:
            raise GestureError(f"curve duration must be > 0, got {self.duration}")
        if self.times is None:
            times = np.linspace(0.0, duration, arr.shape[0])
        else:
            times = np.array(self.times, dtype=float).reshape(-1)
            if times.size != arr.shape[0]:
                raise GestureError(f"curve has {arr.shape[0]} samples but {times.size} knot times")
            if np.any(np.diff(times) < 0):
                raise GestureError("curve knot times must be nondecreasing")
            if abs(times[0]) > 1e-9 * duration or abs(times[-1] - duration) > 1e-9 * duration:
                raise GestureError(f"curve knot times must span [0, {duration}]")
            times[0] = 0.0
            times[-1] = duration
        object.__setattr__(self, "samples", _readonly(arr))
        object.__setattr__(self, "duration", duration)
        object.__setattr__(self, "times", _readonly(times))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Curve):
            return NotImplemented
        return (
            self.duration == other.duration
            and np.array_equal(self.samples, other.samples)
            and np.array_equal(self.times, other.times)
        )

    __hash__ = None  # type: ignore[assignment]

    @property
    def n(self) -> int:
        return int(self.samples.shape[0])

    @property
    def dim(self) -> int:
        return int(self.samples.shape[1])

    @property
    def first(self) -> np.ndarray:
        return self.samples[0]

    @property
    def last(self) -> np.ndarray:
        return self.samples[-1]

    def arc_length(self) -> float:
        return float(np.linalg.norm(np.diff(self.samples, axis=0), axis=1).sum())

    def _locate(self, t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        times = self.times
        assert times is not None
        idx = np.clip(np.searchsorted(times, t, side="right") - 1, 0, self.n - 2)
        dt = times[idx + 1] - times[idx]
        safe = np.where(dt > 0, dt, 1.0)
        frac = np.where(dt > 0, (t - times[idx]) / safe, 1.0)
        return idx, np.clip(frac, 0.0, 1.0)

    def at(self, t) -> np.ndarray:
        """Configuration(s) at time(s) `t` (clipped to [0, duration])."""
        tt = np.clip(np.asarray(t, dtype=float), 0.0, self.duration)
        flat = tt.reshape(-1)
        idx, frac = self._locate(flat)
        out = self.samples[idx] + frac[:, None] * (self.samples[idx + 1] - self.samples[idx])
        return out.reshape(*tt.shape, self.dim)

    def velocity_at(self, t) -> np.ndarray:
        """Piecewise-constant velocity (right-continuous; the last knot uses the final segment)."""
        tt = np.clip(np.asarray(t, dtype=float), 0.0, self.duration)
        flat = tt.reshape(-1)
        idx, _ = self._locate(flat)
        times = self.times
        assert times is not None
        dt = times[idx + 1] - times[idx]
        step = self.samples[idx + 1] - self.samples[idx]
        vel = np.where(dt[:, None] > 0, step / np.where(dt > 0, dt, 1.0)[:, None], 0.0)
        return vel.reshape(*tt.shape, self.dim)

    def window(self, t0: float, t1: float) -> Curve:
        """Restriction to [t0, t1], re-based to start at time 0."""
        if not 0.0 <= t0 < t1 <= self.duration + 1e-12 * self.duration:
            raise GestureError(f"window [{t0}, {t1}] outside curve span [0, {self.duration}]")
        t1 = min(t1, self.duration)
        times = self.times
        assert times is not None
        inner = (times > t0) & (times < t1)
        samples = np.vstack([self.at(t0)[None, :], self.samples[inner], self.at(t1)[None, :]])
        knots = np.concatenate(([t0], times[inner], [t1])) - t0
        return Curve(samples, t1 - t0, knots)

    def rescaled(self, duration: float) -> Curve:
        """Same path, knot times stretched proportionally to the new duration."""
        times = self.times
        assert times is not None
        return Curve(self.samples, duration, times * (float(duration) / self.duration))


@dataclass(frozen=True)
class Movement:
    """A 1-cell: a curve from `source` to `target`."""

    source: Pose
    target: Pose
    curve: Curve
    name: str = ""

    def __post_init__(self) -> None:
        if self.source.skeleton.keypoints != self.target.skeleton.keypoints:
            raise GestureError(f"movement '{self.name}' joins poses of different skeletons")
        if self.curve.dim != self.source.skeleton.dim:
            raise GestureError(
                f"movement '{self.name}' curve has dimension {self.curve.dim}, poses have {self.source.skeleton.dim}"
            )
        d_src = float(np.linalg.norm(self.curve.first - self.source.coords))
        if d_src > EPS_PT:
            raise GestureError(f"movement '{self.name}' does not start at pose '{self.source.name}' (off by {d_src:g})")
        d_tgt = float(np.linalg.norm(self.curve.last - self.target.coords))
        if d_tgt > EPS_PT:
            raise GestureError(f"movement '{self.name}' does not end at pose '{self.target.name}' (off by {d_tgt:g})")

    @property
    def duration(self) -> float:
        return self.curve.duration

    @property
    def label(self) -> str:
        return self.name or f"{self.source.name}->{self.target.name}"

    def retimed(self, duration: float) -> Movement:
        return Movement(self.source, self.target, self.curve.rescaled(duration), self.name)


@dataclass(frozen=True, eq=False)
class MovementHomotopy:
    """A 2-cell: an (M, N, D) grid deforming `source` (row 0) into `target` (row M-1).

    Both boundary movements are stored normalized to N samples; `durations`
    holds one duration per row.
    """

    source: Movement
    target: Movement
    grid: np.ndarray
    durations: np.ndarray | None = None

    def __post_init__(self) -> None:
        grid = np.array(self.grid, dtype=float)
        if grid.ndim != 3 or grid.shape[0] < 2:
            raise GestureError(f"homotopy grid must be (M>=2, N, D), got shape {grid.shape}")
        f, g = self.source, self.target
        if not (f.source.matches(g.source) and f.target.matches(g.target)):
            raise NotParallelError(f"'{f.label}' and '{g.label}' do not share endpoints")
        m, n, dim = grid.shape
        if f.curve.n != n or g.curve.n != n or f.curve.dim != dim:
            raise GestureError(f"homotopy grid shape {grid.shape} does not fit its boundary movements")
        _check_close(grid[0], f.curve.samples, "row 0 differs from the source movement")
        _check_close(grid[-1], g.curve.samples, "last row differs from the target movement")
        _check_close(grid[:, 0], np.broadcast_to(f.source.coords, (m, dim)), "column 0 leaves the source pose")
        _check_close(grid[:, -1], np.broadcast_to(f.target.coords, (m, dim)), "last column leaves the target pose")
        if self.durations is None:
            durations = np.linspace(f.duration, g.duration, m)
        else:
            durations = np.array(self.durations, dtype=float).reshape(-1)
            if durations.size != m or np.any(durations <= 0):
                raise GestureError("homotopy needs one positive duration per row")
        object.__setattr__(self, "grid", _readonly(grid))
        object.__setattr__(self, "durations", _readonly(durations))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MovementHomotopy):
            return NotImplemented
        return (
            self.source == other.source
            and self.target == other.target
            and np.array_equal(self.grid, other.grid)
            and np.array_equal(self.durations, other.durations)
        )

    __hash__ = None  # type: ignore[assignment]

    @property
    def steps(self) -> int:
        return int(self.grid.shape[0])

    @property
    def samples(self) -> int:
        return int(self.grid.shape[1])

    def row_movement(self, k: int) -> Movement:
        """Row k of the grid as a movement between the shared endpoints."""
        durations = self.durations
        assert durations is not None
        return Movement(self.source.source, self.source.target, Curve(self.grid[k], float(durations[k])))

    def is_identity(self, eps: float) -> bool:
        return bool(np.all(np.linalg.norm(self.grid - self.grid[0], axis=2) <= eps))


def _check_close(a: np.ndarray, b: np.ndarray, what: str) -> None:
    err = float(np.max(np.linalg.norm(a - b, axis=-1)))
    if err > EPS_PT:
        raise GestureError(f"homotopy boundary invalid: {what} (off by {err:g})")


# ---- Normalization ----


def _collapse_dwell(points: np.ndarray) -> np.ndarray:
    """Drops samples equal to their predecessor."""
    if len(points) < 2:
        return points
    keep = np.concatenate(([True], np.linalg.norm(np.diff(points, axis=0), axis=1) > 0.0))
    return points[keep]


def _arc_points(points: np.ndarray, cum: np.ndarray, s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Points at arc positions `s` along the polyline, plus the unit direction of the segment under each."""
    idx = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, len(cum) - 2)
    seg = cum[idx + 1] - cum[idx]
    seg = np.where(seg > 0.0, seg, 1.0)
    step = points[idx + 1] - points[idx]
    frac = np.clip((s - cum[idx]) / seg, 0.0, 1.0)
    return points[idx] + frac[:, None] * step, step / seg[:, None]


def _resample_arc(points: np.ndarray, cum: np.ndarray, positions: np.ndarray) -> np.ndarray:
    out, _ = _arc_points(points, cum, positions)
    out[0] = points[0]
    out[-1] = points[-1]
    return out


def _solve_chords(points: np.ndarray, cum: np.ndarray, n: int) -> np.ndarray | None:
    """Newton iteration on the arc positions of the n-2 inner samples and their common chord h.

    Residuals are |x_k - x_(k-1)|^2 - h^2, started from the uniform arc-length
    layout. Returns None when the iteration stalls or the samples leave path order.
    """
    total = float(cum[-1])

    def evaluate(x: np.ndarray):
        s = np.concatenate(([0.0], np.clip(x[:-1], 0.0, total), [total]))
        pos, direction = _arc_points(points, cum, s)
        pos[0] = points[0]
        pos[-1] = points[-1]
        delta = np.diff(pos, axis=0)
        sq = np.einsum("ij,ij->i", delta, delta)
        return s, pos, direction, delta, sq, sq - x[-1] ** 2

    x = np.concatenate((np.linspace(0.0, total, n)[1:-1], [0.0]))
    x[-1] = float(np.sqrt(evaluate(x)[4]).mean())
    inner = np.arange(n - 2)
    for _ in range(_NEWTON_MAX_ITER):
        s, pos, direction, delta, sq, res = evaluate(x)
        if float(np.ptp(np.sqrt(sq))) <= _NEWTON_TOL * total:
            return pos if np.all(np.diff(s) >= -_NEWTON_TOL * total) else None
        jac = np.zeros((n - 1, n - 1))
        jac[inner, inner] = 2.0 * np.einsum("ij,ij->i", delta[:-1], direction[1:-1])
        jac[inner + 1, inner] = -2.0 * np.einsum("ij,ij->i", delta[1:], direction[1:-1])
        jac[:, -1] = -2.0 * x[-1]
        try:
            step = np.linalg.solve(jac, res)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(jac, res, rcond=None)[0]
        before = float(np.linalg.norm(res))
        lam = 1.0
        while lam >= _NEWTON_MIN_STEP:
            trial = x - lam * step
            trial[:-1] = np.clip(trial[:-1], 0.0, total)
            if float(np.linalg.norm(evaluate(trial)[5])) < before:
                x = trial
                break
            lam *= 0.5
        else:
            return None
    return None


def _equal_chord(points: np.ndarray, n: int) -> np.ndarray:
    """n samples on the polyline through `points`, consecutive samples equally spaced, ends kept exactly.

    An input that is already n equally spaced samples comes back unchanged. When
    the solver cannot place the samples in path order the polyline is replaced by
    its uniform arc-length resampling (which cuts corners) and solved again.
    """
    pts = _collapse_dwell(np.asarray(points, dtype=float))
    uniform = pts
    for _ in range(_RESAMPLE_ROUNDS):
        if len(pts) == 1:
            return np.repeat(pts, n, axis=0)
        cum = np.concatenate(([0.0], np.cumsum(np.linalg.norm(np.diff(pts, axis=0), axis=1))))
        total = float(cum[-1])
        uniform = _resample_arc(pts, cum, np.linspace(0.0, total, n))
        chords = np.linalg.norm(np.diff(uniform, axis=0), axis=1)
        if n == 2 or float(np.ptp(chords)) <= _CHORD_TOL * total:
            return uniform
        solved = _solve_chords(pts, cum, n)
        if solved is not None:
            return solved
        pts = _collapse_dwell(uniform)
    app_logger.warning("Equal-chord resampling did not converge; using uniform arc length")
    return uniform


def normalize_curve(c: Curve, n: int) -> Curve:
    """Canonical reparametrization: n samples equally spaced along the curve's own polyline.

    Dwell (zero-length) segments are collapsed, the output is uniform in its
    own cumulative arc length (so normalizing twice changes nothing), knot
    times become uniform and the duration is preserved. A degenerate curve
    yields n copies of its single configuration.
    """
    if n < 2:
        raise GestureError(f"normalization needs n >= 2, got {n}")
    return Curve(_equal_chord(c.samples, n), c.duration)


def normalize_movement(m: Movement, n: int) -> Movement:
    return Movement(m.source, m.target, normalize_curve(m.curve, n), m.name)


def curve_distance(a: Curve, b: Curve, n_cmp: int = N_CMP) -> float:
    """Sup over samples of the configuration distance between both curves normalized to `n_cmp` samples."""
    if a.dim != b.dim:
        raise GestureError(f"dimension mismatch: {a.dim} vs {b.dim}")
    na = _equal_chord(a.samples, n_cmp)
    nb = _equal_chord(b.samples, n_cmp)
    return float(np.max(np.linalg.norm(na - nb, axis=1)))


def movement_distance(f: Movement, g: Movement, n_cmp: int = N_CMP) -> float:
    return curve_distance(f.curve, g.curve, n_cmp)


def homotopy_distance(a: MovementHomotopy, b: MovementHomotopy, n_cmp: int = N_CMP) -> float:
    """Distance between two 2-cells up to reparametrization of the homotopy parameter.

    Each grid is read as a curve of rows; both row-curves are normalized to
    `n_cmp` rows (so constant stretches of rows collapse) and compared sample by sample.
    """
    if a.grid.shape[1:] != b.grid.shape[1:]:
        raise GestureError(f"homotopy resolution mismatch: {a.grid.shape[1:]} vs {b.grid.shape[1:]}")
    _, n, dim = a.grid.shape
    ra = _equal_chord(a.grid.reshape(a.steps, -1), n_cmp).reshape(n_cmp, n, dim)
    rb = _equal_chord(b.grid.reshape(b.steps, -1), n_cmp).reshape(n_cmp, n, dim)
    return float(np.max(np.linalg.norm(ra - rb, axis=2)))


# ---- 2-cells ----


def linear_homotopy(f: Movement, g: Movement, steps: int, samples: int = N_CMP) -> MovementHomotopy:
    """Row k is (1 - k/(M-1))·f + (k/(M-1))·g over the normalized curves of two parallel movements."""
    if steps < 2:
        raise GestureError(f"homotopy needs at least 2 steps, got {steps}")
    if not (f.source.matches(g.source) and f.target.matches(g.target)):
        raise NotParallelError(
            f"'{f.label}' runs {f.source.name}->{f.target.name}, '{g.label}' runs {g.source.name}->{g.target.name}"
        )
    nf = normalize_movement(f, samples)
    ng = normalize_movement(g, samples)
    s = np.linspace(0.0, 1.0, steps)
    grid = (1.0 - s)[:, None, None] * nf.curve.samples + s[:, None, None] * ng.curve.samples
    durations = (1.0 - s) * f.duration + s * g.duration
    return MovementHomotopy(nf, ng, grid, durations)


def smooth_movement(
    m: Movement, strength: float, passes: int = 1, steps: int = 2, samples: int = N_CMP
) -> tuple[Movement, MovementHomotopy]:
    """Endpoint-fixed smoothing plus the 2-cell witnessing it.

    Each pass blends every interior sample toward the three-tap binomial
    average: x_i <- (1 - s)·x_i + s·(x_{i-1} + 2·x_i + x_{i+1})/4. Weights are
    convex, so arc length never grows.
    """
    if not 0.0 <= strength <= 1.0:
        raise GestureError(f"smoothing strength must be in [0, 1], got {strength}")
    if passes < 0:
        raise GestureError(f"smoothing passes must be >= 0, got {passes}")
    x = np.array(m.curve.samples)
    for _ in range(passes):
        if len(x) < 3:
            break
        average = (x[:-2] + 2.0 * x[1:-1] + x[2:]) / 4.0
        x = np.vstack([x[:1], (1.0 - strength) * x[1:-1] + strength * average, x[-1:]])
    smoothed = Movement(m.source, m.target, Curve(x, m.duration, m.curve.times), m.name)
    return smoothed, linear_homotopy(m, smoothed, steps, samples)


# ---- Constructors ----


def stance_pose(name: str, skeleton: Skeleton, stance: str, at: Sequence[float] = (0.0, 0.0)) -> Pose:
    """Built-in stance placed at offset `at`; the skeleton must use the default keypoint labels."""
    if stance not in STANCES:
        raise GestureError(f"unknown stance '{stance}' (known: {', '.join(sorted(STANCES))})")
    table = STANCES[stance]
    missing = [k for k in skeleton.keypoints if k not in table]
    if missing:
        raise GestureError(f"stance '{stance}' has no position for keypoints: {', '.join(missing)}")
    ox, oy = float(at[0]), float(at[1])
    return Pose(name, skeleton, [(table[k][0] + ox, table[k][1] + oy) for k in skeleton.keypoints])


def linear_movement(source: Pose, target: Pose, duration: float, samples: int = 2, name: str = "") -> Movement:
    if samples < 2:
        raise GestureError(f"a movement needs at least 2 samples, got {samples}")
    u = np.linspace(0.0, 1.0, samples)[:, None]
    curve = Curve((1.0 - u) * source.coords + u * target.coords, duration)
    return Movement(source, target, curve, name)


def bezier_movement(
    source: Pose, target: Pose, controls: Sequence[Pose], duration: float, samples: int = 24, name: str = ""
) -> Movement:
    """Bernstein curve with control configurations `controls` between the two poses."""
    if samples < 2:
        raise GestureError(f"a movement needs at least 2 samples, got {samples}")
    ctrl = np.vstack([source.coords, *(c.coords for c in controls), target.coords])
    degree = len(ctrl) - 1
    u = np.linspace(0.0, 1.0, samples)
    basis = np.stack([math.comb(degree, k) * u**k * (1.0 - u) ** (degree - k) for k in range(degree + 1)], axis=1)
    return Movement(source, target, Curve(basis @ ctrl, duration), name)


# ---- Diagram realization ----


@dataclass(frozen=True)
class AbstractDiagram:
    """Vertices and named arrows (source vertex, target vertex, name)."""

    vertices: tuple[str, ...]
    arrows: tuple[tuple[str, str, str], ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "vertices", tuple(self.vertices))
        object.__setattr__(self, "arrows", tuple(tuple(a) for a in self.arrows))
        known = set(self.vertices)
        names = [a[2] for a in self.arrows]
        if len(set(names)) != len(names):
            raise GestureError("diagram arrow names must be unique")
        for src, tgt, name in self.arrows:
            if src not in known or tgt not in known:
                raise GestureError(f"arrow '{name}' references an undeclared vertex")


@dataclass(frozen=True)
class Realization:
    """A diagram mapped into poses and movements."""

    diagram: AbstractDiagram
    vertex_map: Mapping[str, Pose] = field(default_factory=dict)
    arrow_map: Mapping[str, Movement] = field(default_factory=dict)


def realize_diagram(d: AbstractDiagram, vmap: Mapping[str, Pose], amap: Mapping[str, Movement]) -> Realization:
    """Checks that vertex and arrow images fit together and returns the realization."""
    missing = [v for v in d.vertices if v not in vmap]
    if missing:
        raise GestureError(f"vertex map is not total: missing {', '.join(missing)}")
    for src, tgt, name in d.arrows:
        if name not in amap:
            raise NotAFunctorError(name, "has no image")
        move = amap[name]
        if not move.source.matches(vmap[src]):
            raise NotAFunctorError(name, f"starts at '{move.source.name}' but '{src}' maps to '{vmap[src].name}'")
        if not move.target.matches(vmap[tgt]):
            raise NotAFunctorError(name, f"ends at '{move.target.name}' but '{tgt}' maps to '{vmap[tgt].name}'")
    return Realization(
        d,
        MappingProxyType({v: vmap[v] for v in d.vertices}),
        MappingProxyType({a[2]: amap[a[2]] for a in d.arrows}),
    )
