import json

from prc_studio.cli.manifest import RunManifest, file_digest


def test_id_ignores_timing():
    first = RunManifest(command="prc", flags={"w": 12}, started_at=1.0)
    later = RunManifest(command="prc", flags={"w": 12}, started_at=99.0, elapsed_seconds=3.0)

    assert first.id == later.id
    assert len(first.id) == 16


def test_id_follows_flags_seeds_and_inputs():
    base = RunManifest(command="prc", flags={"w": 12})

    assert RunManifest(command="prc", flags={"w": 13}).id != base.id
    assert RunManifest(command="prc", flags={"w": 12}, seeds={"prc": 1}).id != base.id
    assert RunManifest(command="prc", flags={"w": 12}, inputs={"a.csv": "00"}).id != base.id


def test_for_command(tmp_path):
    path = tmp_path / "matches.csv"
    path.write_text("finger_a\n")

    manifest = RunManifest.for_command(
        "fit", {"tol": 1e-8, "scheme": "continuous", "labels": (1, 2)}, [str(path)]
    )

    assert list(manifest.flags) == ["labels", "scheme", "tol"]
    assert manifest.flags["labels"] == [1, 2]
    assert manifest.inputs == {str(path): file_digest(str(path))}


def test_sidecar(tmp_path):
    out = tmp_path / "model.json"
    manifest = RunManifest(command="fit", flags={})
    manifest.finish()

    path = manifest.write_sidecar(str(out))

    assert path == f"{out}.manifest.json"
    written = json.loads((tmp_path / "model.json.manifest.json").read_text())
    assert written["id"] == manifest.id
    assert written["elapsed_seconds"] >= 0
