"""Pulse category: beats as objects, intervals between consecutive beats as arrows.

Time is measured in beats throughout; `bpm` only matters when exporting to seconds.
"""

from __future__ import annotations

import math
from typing import NamedTuple
from dataclasses import field, dataclass
from collections.abc import Mapping, Sequence

import numpy as np

from logger.logger import app_logger

from choreo.errors import PulseError, GestureError, NonComposableError
from choreo.gesture import (
    N_CMP,
    Pose,
    Movement,
    Skeleton,
    MovementHomotopy,
    bezier_movement,
    linear_homotopy,
)
from choreo.category import (
    DURATION_RTOL,
    Diagram,
    Finding,
    LawReport,
    compose_movements,
    check_functor_laws,
)

DEFAULT_DOWNBEAT = 1.0
DEFAULT_OFFBEAT = 0.5

CONDUCTOR = Skeleton("conductor", ("right-hand",), ())

# ictus positions of the right hand per beat of the bar
BEAT_PATTERNS: Mapping[int, tuple[tuple[float, float], ...]] = {
    1: ((0.0, 0.0),),
    2: ((0.0, 0.0), (0.2, 0.35)),
    3: ((0.0, 0.0), (0.5, 0.1), (0.15, 0.45)),
    4: ((0.0, 0.0), (-0.45, 0.1), (0.5, 0.1), (0.15, 0.45)),
}
REBOUND = 0.25


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class PulseTrack:
    """Accented beats in beats-time.

    `end` closes the last interval (the track's final instant); when omitted
    the last inter-beat interval is repeated, or one beat for a single-beat track.
    """

    beats: np.ndarray
    accents: np.ndarray
    meter: int = 4
    bpm: float = 120.0
    end: float | None = None

    def __post_init__(self) -> None:
        beats = np.array(self.beats, dtype=float).reshape(-1)
        accents = np.array(self.accents, dtype=float).reshape(-1)
        if beats.size == 0:
            raise PulseError("a pulse track needs at least one beat")
        if not np.all(np.isfinite(beats)) or np.any(np.diff(beats) <= 0):
            raise PulseError("beats must be finite and strictly increasing")
        if accents.size != beats.size:
            raise PulseError(f"{beats.size} beats but {accents.size} accents")
        if np.any((accents < 0) | (accents > 1)):
            raise PulseError("accents must lie in [0, 1]")
        if int(self.meter) != self.meter or self.meter < 1:
            raise PulseError(f"meter must be a positive integer, got {self.meter}")
        if not self.bpm > 0:
            raise PulseError(f"bpm must be > 0, got {self.bpm}")
        if self.end is None:
            end = beats[-1] + (beats[-1] - beats[-2] if beats.size > 1 else 1.0)
        else:
            end = float(self.end)
            if not end > beats[-1]:
                raise PulseError(f"track end {end} must come after the last beat {beats[-1]}")
        object.__setattr__(self, "beats", _readonly(beats))
        object.__setattr__(self, "accents", _readonly(accents))
        object.__setattr__(self, "meter", int(self.meter))
        object.__setattr__(self, "bpm", float(self.bpm))
        object.__setattr__(self, "end", float(end))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PulseTrack):
            return NotImplemented
        return (
            np.array_equal(self.beats, other.beats)
            and np.array_equal(self.accents, other.accents)
            and (self.meter, self.bpm, self.end) == (other.meter, other.bpm, other.end)
        )

    __hash__ = None  # type: ignore[assignment]

    @property
    def size(self) -> int:
        return int(self.beats.size)

    @property
    def start(self) -> float:
        return float(self.beats[0])

    @property
    def span(self) -> float:
        assert self.end is not None
        return self.end - self.start

    def interval(self, i: int) -> float:
        """Length of the arrow i -> i+1."""
        if not 0 <= i < self.size - 1:
            raise PulseError(f"no interval {i} -> {i + 1} in a {self.size}-beat track")
        return float(self.beats[i + 1] - self.beats[i])

    def bar_of(self, i: int) -> int:
        return i // self.meter

    def bars(self) -> list[range]:
        """Beat indices of each bar."""
        return [range(s, min(s + self.meter, self.size)) for s in range(0, self.size, self.meter)]

    def bar_span(self, bar: int) -> float:
        """Time from the bar's downbeat to the next downbeat (the track end for the last bar)."""
        first = bar * self.meter
        if not 0 <= first < self.size:
            raise PulseError(f"no bar {bar}")
        nxt = first + self.meter
        stop = self.beats[nxt] if nxt < self.size else self.end
        return float(stop - self.beats[first])

    def seconds(self, t):
        """Beats-time to seconds at the nominal tempo."""
        return np.asarray(t, dtype=float) * (60.0 / self.bpm)

    def index_of(self, t: float, tol: float = 1e-9) -> int | None:
        """Index of the beat at time t, if any."""
        i = int(np.searchsorted(self.beats, t - tol))
        if i < self.size and abs(self.beats[i] - t) <= tol:
            return i
        return None


def build_pulse_track(
    bpm: float, meter: int, bars: int, accent_pattern: Sequence[float] | None = None
) -> PulseTrack:
    """meter x bars beats at unit spacing, the accent pattern restarting on every downbeat."""
    if not bpm > 0:
        raise PulseError(f"bpm must be > 0, got {bpm}")
    if meter < 1 or bars < 1:
        raise PulseError(f"meter and bars must be >= 1, got meter={meter} bars={bars}")
    pattern = tuple(accent_pattern) if accent_pattern else (DEFAULT_DOWNBEAT,) + (DEFAULT_OFFBEAT,) * (meter - 1)
    count = meter * bars
    accents = [pattern[(i % meter) % len(pattern)] for i in range(count)]
    return PulseTrack(np.arange(count, dtype=float), np.array(accents), meter, bpm, float(count))


def group_beats(t: PulseTrack, k: int) -> PulseTrack:
    """Keeps every k-th beat from index 0; the track end is kept, so the total span is unchanged."""
    if k < 1:
        raise PulseError(f"group size must be >= 1, got {k}")
    if k == 1:
        return t
    if k > t.size:
        return PulseTrack(t.beats[:1], t.accents[:1], 1, t.bpm, t.end)
    meter = t.meter // k if t.meter % k == 0 else 1
    return PulseTrack(t.beats[::k], t.accents[::k], meter, t.bpm, t.end)


def valzer_transform(t: PulseTrack, alpha: float) -> PulseTrack:
    """Prolongs the first beat of every ternary bar.

    Within a bar of span T the inner durations become (1 + a, 1 - a/2, 1 - a/2) * T/3;
    downbeats and bar totals are unchanged.
    """
    if t.meter != 3:
        raise PulseError("ternary meter required")
    if not 0.0 <= alpha < 1.0:
        raise PulseError(f"valzer prolongation must be in [0, 1), got {alpha}")
    beats = np.array(t.beats)
    for bar, idx in enumerate(t.bars()):
        third = t.bar_span(bar) / 3.0
        s = t.beats[idx[0]]
        if len(idx) > 1:
            beats[idx[1]] = s + (1.0 + alpha) * third
        if len(idx) > 2:
            beats[idx[2]] = s + (2.0 + alpha / 2.0) * third
    app_logger.info("Valzer transform with alpha=%s over %d bars", alpha, len(t.bars()))
    return PulseTrack(beats, t.accents, t.meter, t.bpm, t.end)


class Quantization(NamedTuple):
    """Per-onset beat index (-1 when unmatched) and residual onset - beat (NaN when unmatched)."""

    indices: np.ndarray
    residuals: np.ndarray
    unmatched: tuple[int, ...]


def quantize_onsets(onsets: Sequence[float], t: PulseTrack, window: float) -> Quantization:
    """Snaps each onset to the nearest beat within `window`; ties go to the earlier beat."""
    if not window > 0:
        raise PulseError(f"quantization window must be > 0, got {window}")
    if t.size > 1:
        half = float(np.min(np.diff(t.beats))) / 2.0
        if window > half * (1.0 + 1e-12):
            raise PulseError(f"window {window} exceeds half the minimum beat interval ({half})")
    x = np.asarray(onsets, dtype=float).reshape(-1)
    right = np.clip(np.searchsorted(t.beats, x, side="left"), 0, t.size - 1)
    left = np.clip(right - 1, 0, t.size - 1)
    d_left = np.abs(x - t.beats[left])
    d_right = np.abs(t.beats[right] - x)
    nearest = np.where(d_left <= d_right, left, right)
    residuals = x - t.beats[nearest]
    matched = np.abs(residuals) <= window
    indices = np.where(matched, nearest, -1)
    residuals = np.where(matched, residuals, np.nan)
    unmatched = tuple(int(i) for i in np.flatnonzero(~matched))
    if unmatched:
        app_logger.warning("%d of %d onsets outside every quantization window", len(unmatched), x.size)
    return Quantization(indices, residuals, unmatched)


@dataclass(frozen=True)
class PulseFunctorAssignment:
    """Beats to poses and consecutive-beat intervals (keyed by their first beat) to movements."""

    beat_map: Mapping[int, Pose] = field(default_factory=dict)
    interval_map: Mapping[int, Movement] = field(default_factory=dict)


class TimelineEntry(NamedTuple):
    time: float
    pose: Pose | None
    movement: Movement | None


def apply_pulse_functor(
    t: PulseTrack,
    a: PulseFunctorAssignment,
    eps: float = 1e-6,
    beats: Sequence[int] | None = None,
    diagram: Diagram = Diagram.D4,
    label: str = "",
    n_cmp: int = N_CMP,
) -> tuple[tuple[TimelineEntry, ...], LawReport]:
    """Runs the pulse-to-dance functor over `beats` (all of them by default).

    Violations: missing images, movement endpoints off their beats' poses,
    movement durations differing from interval lengths, and composites over
    two-interval spans whose duration is not the span.
    """
    idx = list(range(t.size)) if beats is None else sorted(beats)
    prefix = f"{label} " if label else ""
    findings: list[Finding] = []
    timeline = tuple(TimelineEntry(float(t.beats[i]), a.beat_map.get(i), a.interval_map.get(i)) for i in idx)

    for i in idx:
        if i not in a.beat_map:
            findings.append(Finding(diagram, "totality", f"{prefix}beat {i}", "beat has no pose"))
    arrows = [i for i in idx if i + 1 in idx]
    object_map = {f"b{i}": a.beat_map[i] for i in idx if i in a.beat_map}
    generators = []
    morphism_map: dict[tuple[str, ...], Movement] = {}
    for i in arrows:
        name = f"{prefix}{i}->{i + 1}"
        generators.append((f"b{i}", f"b{i + 1}", name))
        move = a.interval_map.get(i)
        if move is None:
            continue
        morphism_map[(name,)] = move
        length = t.interval(i)
        if abs(move.duration - length) > DURATION_RTOL * length:
            detail = f"movement lasts {move.duration:g}, interval is {length:g}"
            findings.append(Finding(diagram, "duration", name, detail, abs(move.duration - length)))
    report = check_functor_laws(object_map, morphism_map, generators, eps, diagram=diagram, n_cmp=n_cmp)
    findings.extend(report.findings)

    for i in arrows:
        if i + 2 not in idx or i not in a.interval_map or i + 1 not in a.interval_map:
            continue
        try:
            composite = compose_movements(a.interval_map[i], a.interval_map[i + 1])
        except (NonComposableError, GestureError):  # reported by the functor-law check
            continue
        span = float(t.beats[i + 2] - t.beats[i])
        if abs(composite.duration - span) > DURATION_RTOL * span:
            detail = f"composite lasts {composite.duration:g}, span is {span:g}"
            subject = f"{prefix}{i}->{i + 2}"
            findings.append(Finding(diagram, "duration", subject, detail, abs(composite.duration - span)))
    return timeline, LawReport(tuple(findings))


def retime_assignment(
    old: PulseTrack, new: PulseTrack, a: PulseFunctorAssignment, samples: int = N_CMP
) -> tuple[PulseFunctorAssignment, dict[int, MovementHomotopy]]:
    """Tempo change as a 2-cell: every interval movement is rescaled to the new interval length.

    Returns the retimed assignment and, per interval, the homotopy from the old
    movement to the retimed one (same path, durations interpolated across rows).
    """
    if old.size != new.size:
        raise PulseError(f"tempo change must keep the beat count ({old.size} vs {new.size})")
    moves: dict[int, Movement] = {}
    cells: dict[int, MovementHomotopy] = {}
    for i, m in a.interval_map.items():
        retimed = m.retimed(new.interval(i))
        moves[i] = retimed
        cells[i] = linear_homotopy(m, retimed, 2, samples)
    return PulseFunctorAssignment(dict(a.beat_map), moves), cells


def conducting_assignment(t: PulseTrack, samples: int = 12) -> PulseFunctorAssignment:
    """The conductor's right hand: one ictus position per beat of the bar, rebounding arcs between them."""
    pattern = BEAT_PATTERNS.get(t.meter)
    poses = {}
    for i in range(t.size):
        xy = pattern[i % t.meter] if pattern is not None else BEAT_PATTERNS[2][i % 2]
        poses[i] = Pose(f"beat{i}", CONDUCTOR, [xy])
    moves = {}
    for i in range(t.size - 1):
        a, b = poses[i], poses[i + 1]
        mid = (a.points[0] + b.points[0]) / 2.0 + np.array([0.0, REBOUND])
        control = Pose(f"rebound{i}", CONDUCTOR, [mid])
        moves[i] = bezier_movement(a, b, [control], t.interval(i), samples, f"{i}->{i + 1}")
    return PulseFunctorAssignment(poses, moves)


def beat_slices(t: PulseTrack, movement: Movement, start: float) -> tuple[PulseFunctorAssignment, list[int]]:
    """Restricts a movement played from `start` to the beat grid.

    Returns the per-beat assignment (poses at the beats the movement covers,
    movement windows between them) and the covered beat indices.
    """
    stop = start + movement.duration
    tol = 1e-9 * max(1.0, abs(stop))
    covered = [i for i in range(t.size) if start - tol <= t.beats[i] <= stop + tol]
    skeleton = movement.source.skeleton
    beat_map = {}
    for i in covered:
        local = min(max(float(t.beats[i]) - start, 0.0), movement.duration)
        beat_map[i] = Pose(f"{movement.label}@{i}", skeleton, movement.curve.at(local))
    interval_map = {}
    for i in covered:
        if i + 1 not in beat_map:
            continue
        t0 = min(max(float(t.beats[i]) - start, 0.0), movement.duration)
        t1 = min(max(float(t.beats[i + 1]) - start, 0.0), movement.duration)
        if math.isclose(t0, t1):
            continue
        curve = movement.curve.window(t0, t1)
        interval_map[i] = Movement(beat_map[i], beat_map[i + 1], curve, f"{movement.label}[{i}]")
    return PulseFunctorAssignment(beat_map, interval_map), covered
