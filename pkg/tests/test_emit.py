"""Tests for choreo.emit: JSON timelines and SVG keyframes."""

from __future__ import annotations

import re
import json

import numpy as np
import pytest

from choreo.emit import TIMELINE_VERSION, emit_svg, frame_times, emit_timeline, timeline_document
from choreo.errors import ChoreographyError
from choreo.category import Diagram, Finding, LawReport
from choreo.script import parse, parse_file
from choreo.elaborate import elaborate

from tests.conftest import MINIMAL_SCRIPT, corpus_path


@pytest.fixture(scope="module")
def duet():
    """The mirror duet: two dancers, three marks, four beats."""
    return elaborate(parse_file(corpus_path("duet_mirror.chor")), parallel=False)


# ---------- timeline ----------


def test_timeline_layout(duet) -> None:
    doc = timeline_document(duet.functor, 1.0, 0.5, duet.report, duet.track)
    assert list(doc) == ["version", "dancers", "rate", "samples", "coa", "reports"]
    assert doc["version"] == TIMELINE_VERSION
    assert [d["name"] for d in doc["dancers"]] == ["A", "B"]
    assert len(doc["dancers"][0]["keypoints"]) == 8
    assert [s["t"] for s in doc["samples"]] == [0.0, 1.0, 2.0, 3.0, 4.0]
    assert len(doc["samples"][2]["dancers"]["B"]) == 8
    assert len(doc["coa"]) == 5
    assert set(doc["reports"]) == {"violations", "notes", "by_diagram", "findings"}


def test_timeline_seconds_follow_the_tempo(duet) -> None:
    """At the default 120 bpm a beat lasts half a second."""
    doc = timeline_document(duet.functor, 2.0, 0.5, duet.report, duet.track)
    assert doc["samples"][4]["seconds"] == pytest.approx(1.0)
    assert "seconds" not in timeline_document(duet.functor, 2.0, 0.5)["samples"][0]


def test_mirror_duet_attention_on_the_axis(duet) -> None:
    doc = timeline_document(duet.functor, 4.0, 0.5)
    assert np.allclose([c["x"] for c in doc["coa"]], 0.0, atol=1e-9)


def test_emit_timeline_is_deterministic(duet) -> None:
    """Identical input, byte-identical output, with no negative zeros."""
    first = emit_timeline(duet.functor, 8.0, 0.5, duet.report, duet.track)
    second = emit_timeline(duet.functor, 8.0, 0.5, duet.report, duet.track)
    assert first == second
    assert first.endswith("}\n")
    assert not re.search(r"-0\.0\b", first)
    assert json.loads(first)["rate"] == 8.0


def test_timeline_carries_findings() -> None:
    offbeat = elaborate(parse_file(corpus_path("offbeat.chor")), parallel=False)
    doc = json.loads(emit_timeline(offbeat.functor, 1.0, 0.5, offbeat.report, offbeat.track))
    assert doc["reports"]["violations"] == 1
    assert doc["reports"]["by_diagram"] == {"D4": 1}
    findings = doc["reports"]["findings"]
    assert findings[0]["law"] == "alignment"
    keys = [(x["diagram"], x["subject"]) for x in findings]
    assert keys == sorted(keys)


def test_timeline_findings_sorted_by_code_then_subject(duet) -> None:
    """Findings come out by diagram code, then subject, whatever order the checks finished in."""
    report = LawReport(
        (
            Finding(Diagram.D7, "parallel movements", "w vs v", "up_to_2cell", 0.01, "note"),
            Finding(Diagram.D4, "alignment", "mark m2", "beat 2.5 is not on the pulse"),
            Finding(Diagram.D4, "alignment", "mark m1", "beat 1.5 is not on the pulse"),
        )
    )
    doc = timeline_document(duet.functor, 1.0, 0.5, report)
    assert [(x["diagram"], x["subject"]) for x in doc["reports"]["findings"]] == [
        ("D4", "mark m1"),
        ("D4", "mark m2"),
        ("D7", "w vs v"),
    ]


def test_single_mark_timeline() -> None:
    f = elaborate(parse(MINIMAL_SCRIPT), parallel=False).functor
    doc = timeline_document(f, 8.0, 0.5)
    assert len(doc["samples"]) == 1 and len(doc["coa"]) == 1


# ---------- svg ----------


def test_frame_times(duet) -> None:
    assert list(frame_times(duet.functor)) == [0.0, 2.0, 4.0]
    assert list(frame_times(duet.functor, 1.5)) == [0.0, 1.5, 3.0]
    for bad in (0.0, -1.0, float("nan")):
        with pytest.raises(ChoreographyError, match="frame spacing"):
            frame_times(duet.functor, bad)


def test_svg_one_frame_per_mark(duet) -> None:
    frames = emit_svg(duet.functor)
    assert [name for name, _ in frames] == ["frame_000.svg", "frame_001.svg", "frame_002.svg"]
    boxes = {re.search(r'viewBox="([^"]+)"', text).group(1) for _, text in frames}
    assert len(boxes) == 1
    text = frames[1][1]
    assert text.startswith('<svg xmlns="http://www.w3.org/2000/svg"')
    assert text.count('class="dancer"') == 2
    assert 'data-name="A"' in text and 'data-name="B"' in text
    assert text.count("<circle ") == 2 * 8 + 1
    assert "<title>t = 2.0000</title>" in text


def test_svg_every_beats_and_determinism(duet) -> None:
    frames = emit_svg(duet.functor, every_beats=1.0)
    assert len(frames) == 5
    assert frames == emit_svg(duet.functor, every_beats=1.0)


def test_svg_of_a_still_choreography() -> None:
    f = elaborate(parse(MINIMAL_SCRIPT), parallel=False).functor
    [(name, text)] = emit_svg(f)
    assert name == "frame_000.svg" and text.endswith("</svg>\n")
