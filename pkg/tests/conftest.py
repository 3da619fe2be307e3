"""Fixtures and helpers for the choreo test suite."""

from __future__ import annotations

from os import path, environ, listdir
from collections.abc import Sequence

import numpy as np
import pytest
from click.testing import CliRunner

# IMPORTANT: set before anything imports logger.logger.
environ.setdefault("CHOREO_LOG_DIR", path.join(path.dirname(path.abspath(__file__)), "logs"))

from choreo.gesture import Pose, Curve, Movement, Skeleton, linear_movement  # pylint: disable=wrong-import-position

ROOT = path.dirname(path.dirname(path.abspath(__file__)))
CORPUS_DIR = path.join(ROOT, "corpus")
ONSETS_DIR = path.join(CORPUS_DIR, "onsets")

# one keypoint: configurations are plain points of the plane
POINT = Skeleton("point", ("p",), ())

MINIMAL_SCRIPT = """\
skeleton body default
pose rest : body stance standing
pulse { }
choreography {
  dancers A
  mark m0 at 0 { A rest }
}
"""

STEPS_SCRIPT = """\
skeleton body default
pose stand : body stance standing
pose bend : body stance plie
move down : stand -> bend linear beats 1
move up : bend -> stand linear beats 1
pulse {
  meter 2
  bars 1
}
choreography {
  dancers A
  mark m0 at 0 { A stand }
  mark m1 at 1 { A bend }
  mark m2 at 2 { A stand }
  m0 -> m1 { A down }
  m1 -> m2 { A up }
}
"""


def corpus_files() -> list[str]:
    """Every bundled script, sorted by name."""
    return sorted(path.join(CORPUS_DIR, n) for n in listdir(CORPUS_DIR) if n.endswith(".chor"))


def corpus_path(name: str) -> str:
    return path.join(CORPUS_DIR, name)


def point_pose(name: str, x: float, y: float) -> Pose:
    return Pose(name, POINT, [(x, y)])


def point_move(a: Pose, b: Pose, duration: float = 1.0, samples: int = 2, name: str = "") -> Movement:
    return linear_movement(a, b, duration, samples, name)


def polyline(points: Sequence[Sequence[float]], duration: float = 1.0, name: str = "") -> Movement:
    """A one-keypoint movement through `points`, uniform in time."""
    pts = np.asarray(points, dtype=float)
    src = point_pose(f"{name or 'm'}.src", *pts[0])
    tgt = point_pose(f"{name or 'm'}.tgt", *pts[-1])
    return Movement(src, tgt, Curve(pts, duration), name)


@pytest.fixture()
def rng() -> np.random.Generator:
    """Seeded generator: every run sees the same numbers."""
    return np.random.default_rng(20240611)


@pytest.fixture()
def body() -> Skeleton:
    """The default eight-keypoint skeleton."""
    return Skeleton("body")


@pytest.fixture()
def runner() -> CliRunner:
    return CliRunner()


@pytest.fixture()
def write_script(tmp_path):
    """Writes script text under tmp_path and returns the file path."""

    def _write(text: str, name: str = "script.chor") -> str:
        p = tmp_path / name
        p.write_text(text, encoding="utf-8")
        return str(p)

    return _write
