import hashlib

from app import __version__
from app.surrogate.cli.manifest import PhaseTimer, build_manifest, file_digest


def test_file_digest(tmp_path):
    path = tmp_path / "panel.csv"
    path.write_bytes(b"subject_id,time\n")
    assert file_digest(path) == hashlib.sha256(b"subject_id,time\n").hexdigest()


def test_phase_timer_accumulates():
    timer = PhaseTimer()
    with timer.phase("fit"):
        pass
    with timer.phase("fit"):
        pass
    with timer.phase("write"):
        pass
    assert set(timer.timings) == {"fit", "write"}
    assert timer.timings["fit"] >= 0.0


def test_build_manifest(tmp_path):
    panel = tmp_path / "panel.csv"
    panel.write_text("a\n")
    timer = PhaseTimer()
    manifest = build_manifest(
        "pte",
        "run-1",
        {"max_lag": 1},
        [panel],
        [tmp_path / "pte.json", tmp_path / "pte.csv"],
        7,
        timer,
    )
    assert manifest.command == "pte"
    assert manifest.inputs == {str(panel): file_digest(panel)}
    assert manifest.outputs == ["pte.json", "pte.csv"]
    assert manifest.seed == 7
    assert manifest.version == __version__
    assert manifest.config == {"max_lag": 1}
