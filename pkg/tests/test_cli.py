"""End-to-end tests of the command line: check, compile, svg, diff, sync and fmt."""

from __future__ import annotations

import json

import pytest

from app_version import __version__

from cli import SYNC_ETA, EXIT_STRUCTURAL, EXIT_VIOLATIONS, cli
from choreo.script import parse_file, print_script

from tests.conftest import STEPS_SCRIPT, ONSETS_DIR, MINIMAL_SCRIPT, corpus_path

# ---------- basics ----------


def test_version(runner):
    r = runner.invoke(cli, ["--version"])
    assert r.exit_code == 0
    assert f"version {__version__}" in r.output


def test_help_lists_commands(runner):
    r = runner.invoke(cli, ["--help"])
    assert r.exit_code == 0
    for name in ("check", "compile", "svg", "diff", "sync", "fmt"):
        assert name in r.output


# ---------- check ----------


def test_check_clean_script(runner, write_script):
    path = write_script(MINIMAL_SCRIPT)
    r = runner.invoke(cli, ["check", path, "--strict"])
    assert r.exit_code == 0
    assert r.output.strip().endswith(f"{path}: 0 violations, 0 notes")


def test_check_reports_violations(runner):
    """Violations are printed; only --strict turns them into exit status 1."""
    path = corpus_path("offbeat.chor")
    r = runner.invoke(cli, ["check", path])
    assert r.exit_code == 0
    assert "warning: [D4] alignment: mark m1 (beat 1.5 is not on the pulse)" in r.output
    strict = runner.invoke(cli, ["check", path, "--strict"])
    assert strict.exit_code == EXIT_VIOLATIONS


def test_check_prints_notes(runner, write_script):
    r = runner.invoke(cli, ["check", write_script(STEPS_SCRIPT), "--strict"])
    assert r.exit_code == 0
    assert "note: [D7] parallel movements: pose graph" in r.output


@pytest.mark.parametrize(
    "text,message",
    [
        ("pose @", "error: 1:6: unexpected character '@'"),
        (MINIMAL_SCRIPT.replace("{ A rest }", "{ A stand }"), "error: 6:20: undeclared pose 'stand'"),
        (STEPS_SCRIPT.replace("m1 -> m2 { A up }", "m1 -> m2 { A down }"), "error: non-composable: move 'down'"),
    ],
)
def test_check_structural_errors(runner, write_script, text, message):
    """Parse, semantic and elaboration errors exit with status 2 and one message."""
    r = runner.invoke(cli, ["check", write_script(text)])
    assert r.exit_code == EXIT_STRUCTURAL
    assert message in r.output


def test_check_missing_file(runner, tmp_path):
    r = runner.invoke(cli, ["check", str(tmp_path / "missing.chor")])
    assert r.exit_code == 2
    assert "error:" in r.output


@pytest.mark.parametrize(
    "flags,message",
    [
        (["--eps", "0"], "Option '--eps' must be > 0"),
        (["--eps", "0.5", "--eta", "0.1"], "Option '--eta' must be >= '--eps'"),
    ],
)
def test_check_tolerance_flags(runner, write_script, flags, message):
    r = runner.invoke(cli, ["check", write_script(MINIMAL_SCRIPT), *flags])
    assert r.exit_code == 2
    assert message in r.output


# ---------- compile ----------


def test_compile_to_stdout(runner):
    """A four-beat choreography at one sample per beat gives five samples."""
    path = corpus_path("duet_mirror.chor")
    r = runner.invoke(cli, ["compile", path, "--out", "-", "--rate", "1"])
    assert r.exit_code == 0
    doc = json.loads(r.output)
    assert len(doc["samples"]) == 5
    assert doc["samples"][2]["seconds"] == pytest.approx(1.0)
    again = runner.invoke(cli, ["compile", path, "--out", "-", "--rate", "1"])
    assert again.output == r.output


def test_compile_to_file(runner, tmp_path):
    out = tmp_path / "timeline.json"
    r = runner.invoke(cli, ["compile", corpus_path("solo_steps.chor"), "--out", str(out)])
    assert r.exit_code == 0
    assert f"{out}: written" in r.output
    doc = json.loads(out.read_text(encoding="utf-8"))
    assert len(doc["samples"]) == 4 * 8 + 1
    assert doc["reports"]["violations"] == 0


def test_compile_strict_with_violations(runner, tmp_path):
    r = runner.invoke(cli, ["compile", corpus_path("offbeat.chor"), "--out", str(tmp_path / "t.json"), "--strict"])
    assert r.exit_code == EXIT_VIOLATIONS
    assert (tmp_path / "t.json").exists()


@pytest.mark.parametrize(
    "flags,message",
    [(["--rate", "0"], "Option '--rate' must be > 0"), (["--kappa", "-1"], "Option '--kappa' must be >= 0")],
)
def test_compile_flag_errors(runner, flags, message):
    r = runner.invoke(cli, ["compile", corpus_path("minimal.chor"), "--out", "-", *flags])
    assert r.exit_code == 2
    assert message in r.output


# ---------- svg ----------


def test_svg_writes_one_frame_per_mark(runner, tmp_path):
    out = tmp_path / "frames"
    r = runner.invoke(cli, ["svg", corpus_path("duet_mirror.chor"), "--out-dir", str(out)])
    assert r.exit_code == 0
    assert sorted(p.name for p in out.iterdir()) == ["frame_000.svg", "frame_001.svg", "frame_002.svg"]
    assert f"{out}: 3 frames" in r.output


def test_svg_every_beats(runner, tmp_path):
    out = tmp_path / "frames"
    r = runner.invoke(cli, ["svg", corpus_path("solo_steps.chor"), "--out-dir", str(out), "--every-beats", "0.5"])
    assert r.exit_code == 0
    assert len(list(out.iterdir())) == 9


def test_svg_bad_spacing(runner, tmp_path):
    r = runner.invoke(cli, ["svg", corpus_path("minimal.chor"), "--out-dir", str(tmp_path), "--every-beats", "0"])
    assert r.exit_code == EXIT_STRUCTURAL
    assert "frame spacing must be > 0 beats" in r.output


# ---------- diff ----------


def test_diff_with_itself(runner):
    path = corpus_path("duet_mirror.chor")
    r = runner.invoke(cli, ["diff", path, path, "--strict"])
    assert r.exit_code == 0
    lines = r.output.splitlines()
    assert lines[0].startswith("open->wide: exact")
    assert lines[1].startswith("wide->close: exact")
    assert lines[-1] == "center of attention: 0"


def test_diff_needs_the_same_marks(runner):
    r = runner.invoke(cli, ["diff", corpus_path("solo_steps.chor"), corpus_path("duet_mirror.chor")])
    assert r.exit_code == EXIT_STRUCTURAL
    assert "error: choreographies must share their marks" in r.output


# ---------- sync ----------


def test_sync_close_to_the_pulse(runner):
    """Musician and dancer stay within the window: the triangle closes up to a 2-cell."""
    r = runner.invoke(
        cli,
        [
            "sync",
            corpus_path("minimal.chor"),
            "--musician",
            f"{ONSETS_DIR}/musician.txt",
            "--dancer",
            f"{ONSETS_DIR}/dancer.txt",
            "--strict",
        ],
    )
    assert r.exit_code == 0
    assert r.output.startswith("[D6] up_to_2cell (0.03")
    assert "worst: dancer onset 2 vs beat 2" in r.output


def test_sync_budget_has_its_own_default(runner):
    """The sync budget is an explicit 0.1-beat default; --eta tightens it."""
    [eta] = [p for p in cli.commands["sync"].params if p.name == "eta"]
    assert eta.default == SYNC_ETA == 0.1
    assert eta.show_default
    base = [
        "sync",
        corpus_path("minimal.chor"),
        "--musician",
        f"{ONSETS_DIR}/musician.txt",
        "--dancer",
        f"{ONSETS_DIR}/dancer.txt",
    ]
    assert runner.invoke(cli, base).output.startswith("[D6] up_to_2cell (0.03")
    tight = runner.invoke(cli, [*base, "--eta", "0.02", "--strict"])
    assert tight.output.startswith("[D6] fails (0.03")
    assert tight.exit_code == EXIT_VIOLATIONS


def test_sync_without_pulse_alignment(runner):
    args = [
        "sync",
        corpus_path("minimal.chor"),
        "--musician",
        f"{ONSETS_DIR}/musician.txt",
        "--dancer",
        f"{ONSETS_DIR}/unpulsed.txt",
    ]
    r = runner.invoke(cli, args)
    assert r.exit_code == 0
    assert r.output.startswith("[D6] fails")
    assert "  no pulse alignment" in r.output
    assert runner.invoke(cli, [*args, "--strict"]).exit_code == EXIT_VIOLATIONS


def test_sync_missing_onset_file(runner, tmp_path):
    missing = str(tmp_path / "none.txt")
    r = runner.invoke(
        cli, ["sync", corpus_path("minimal.chor"), "--musician", missing, "--dancer", f"{ONSETS_DIR}/dancer.txt"]
    )
    assert r.exit_code == 2
    assert f"File '{missing}' does not exist" in r.output


# ---------- fmt ----------


def test_fmt_prints_canonical_form(runner):
    path = corpus_path("waltz_valzer.chor")
    r = runner.invoke(cli, ["fmt", path])
    assert r.exit_code == 0
    assert r.output == print_script(parse_file(path))
    assert "# " not in r.output
