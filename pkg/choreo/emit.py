"""Output documents: the sampled timeline (JSON) and stick-figure keyframes (SVG).

Both are pure functions of their inputs: numbers are rounded and formatted
the same way on every run, so identical input gives byte-identical output.
"""

from __future__ import annotations

import json
import math
from xml.sax.saxutils import escape, quoteattr

import numpy as np

from logger.logger import app_logger

from choreo.errors import ChoreographyError
from choreo.pulse import PulseTrack
from choreo.category import Finding, LawReport
from choreo.choreography import ChoreographyFunctor, sample_times, configurations, center_of_attention

TIMELINE_VERSION = 1
SVG_SIZE = 480
SVG_MARGIN = 0.1
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf")


def _r(v: float) -> float:
    return round(float(v), 9) + 0.0


def _finding_key(x: Finding) -> tuple:
    return (x.diagram.value, x.subject, x.law, x.severity, x.detail)


def timeline_document(
    f: ChoreographyFunctor,
    rate: float,
    kappa: float,
    report: LawReport = LawReport(),
    track: PulseTrack | None = None,
) -> dict:
    """The timeline as plain data, keys in output order.

    `samples` holds duration x rate + 1 instants from the first mark; with a
    pulse track each sample also carries its time in seconds.
    Findings are listed by diagram code, then subject.
    """
    times = sample_times(f, rate)
    configs = configurations(f, times)
    coa = center_of_attention(f, kappa, resolution=rate)
    dancers = []
    for d in f.dancers:
        skeleton = f.figures[0].pose_of(d).skeleton
        dancers.append(
            {
                "name": d,
                "skeleton": skeleton.name,
                "keypoints": list(skeleton.keypoints),
                "edges": [list(e) for e in skeleton.edges or ()],
            }
        )
    samples = []
    for k, t in enumerate(times):
        sample: dict = {"t": _r(t)}
        if track is not None:
            sample["seconds"] = _r(track.seconds(t))
        sample["dancers"] = {d: [[_r(x), _r(y)] for x, y in configs[d][k].reshape(-1, 2)] for d in f.dancers}
        samples.append(sample)
    return {
        "version": TIMELINE_VERSION,
        "dancers": dancers,
        "rate": rate,
        "samples": samples,
        "coa": [
            {"t": _r(t), "x": _r(p[0]), "y": _r(p[1]), "weight": _r(w)}
            for t, p, w in zip(coa.times, coa.points, coa.weights, strict=True)
        ],
        "reports": {**report.summary(), "findings": [x.as_dict() for x in sorted(report.findings, key=_finding_key)]},
    }


def emit_timeline(
    f: ChoreographyFunctor,
    rate: float,
    kappa: float,
    report: LawReport = LawReport(),
    track: PulseTrack | None = None,
) -> str:
    doc = timeline_document(f, rate, kappa, report, track)
    app_logger.info("Timeline: %d samples at rate %s", len(doc["samples"]), rate)
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"


# ---- SVG ----


def frame_times(f: ChoreographyFunctor, every_beats: float | None = None) -> np.ndarray:
    """The marks, or every `every_beats` beats from the first mark."""
    if every_beats is None:
        return np.array([m.beat for m in f.marks])
    if not (math.isfinite(every_beats) and every_beats > 0):
        raise ChoreographyError(f"frame spacing must be > 0 beats, got {every_beats}")
    count = math.floor(f.duration / every_beats + 1e-9) + 1
    return f.start + np.arange(count) * every_beats


def _fmt(v: float) -> str:
    return f"{round(float(v), 4) + 0.0:.4f}"


def _xy(p) -> tuple[str, str]:
    # y-up scene, y-down SVG
    return _fmt(p[0]), _fmt(-p[1])


def emit_svg(
    f: ChoreographyFunctor,
    every_beats: float | None = None,
    kappa: float = 0.5,
    rate: float = 8.0,
    size: int = SVG_SIZE,
) -> list[tuple[str, str]]:
    """One keyframe per selected instant as (file name, SVG text), frame_000.svg first.

    Every frame shares one viewBox covering the whole choreography and
    overlays the full center-of-attention path plus its current point.
    """
    times = frame_times(f, every_beats)
    frames = configurations(f, times)
    coa = center_of_attention(f, kappa, resolution=rate)
    dense = configurations(f, sample_times(f, rate))
    points = np.vstack([c.reshape(-1, 2) for c in (*dense.values(), *frames.values())] + [coa.points])
    lo, hi = points.min(axis=0), points.max(axis=0)
    extent = float(max(hi[0] - lo[0], hi[1] - lo[1])) or 1.0
    pad = SVG_MARGIN * extent
    x0, y0 = lo[0] - pad, -(hi[1] + pad)
    width, height = hi[0] - lo[0] + 2 * pad, hi[1] - lo[1] + 2 * pad
    view_box = f"{_fmt(x0)} {_fmt(y0)} {_fmt(width)} {_fmt(height)}"
    pixels = (size, max(1, round(size * height / width)))
    stroke, radius = 0.008 * extent, 0.015 * extent
    path = " ".join(",".join(_xy(p)) for p in coa.points)

    out = []
    for k, t in enumerate(times):
        here = (np.interp(t, coa.times, coa.points[:, 0]), np.interp(t, coa.times, coa.points[:, 1]))
        lines = [
            f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="{view_box}" width="{pixels[0]}" height="{pixels[1]}">',
            f"  <title>t = {_fmt(t)}</title>",
            f'  <polyline class="coa-path" points="{path}" fill="none" stroke="#999999" '
            f'stroke-width="{_fmt(stroke / 2)}" stroke-dasharray="{_fmt(stroke * 2)}"/>',
        ]
        for i, d in enumerate(f.dancers):
            skeleton = f.figures[0].pose_of(d).skeleton
            pts = frames[d][k].reshape(-1, 2)
            color = PALETTE[i % len(PALETTE)]
            lines.append(f'  <g class="dancer" data-name={quoteattr(d)} stroke="{color}" fill="{color}">')
            for a, b in skeleton.edges or ():
                (xa, ya), (xb, yb) = _xy(pts[skeleton.index(a)]), _xy(pts[skeleton.index(b)])
                lines.append(f'    <line x1="{xa}" y1="{ya}" x2="{xb}" y2="{yb}" stroke-width="{_fmt(stroke)}"/>')
            for label, p in zip(skeleton.keypoints, pts, strict=True):
                cx, cy = _xy(p)
                dot = f'<circle cx="{cx}" cy="{cy}" r="{_fmt(radius)}">'
                lines.append(f"    {dot}<title>{escape(label)}</title></circle>")
            lines.append("  </g>")
        cx, cy = _xy(here)
        ring = _fmt(radius * 1.5)
        lines.append(f'  <circle class="coa" cx="{cx}" cy="{cy}" r="{ring}" fill="none" stroke="#000000"/>')
        lines.append("</svg>")
        out.append((f"frame_{k:03d}.svg", "\n".join(lines) + "\n"))
    app_logger.info("SVG: %d frames", len(out))
    return out
