"""Run manifests: provenance records with content hashes."""

import hashlib
import json

from kdvlab import __version__
from kdvlab.manifest import RunManifest, file_sha256


def test_file_sha256_matches_hashlib(tmp_path):
    p = tmp_path / "data.csv"
    p.write_bytes(b"t,l2\n0.0,1.0\n")
    assert file_sha256(str(p)) == hashlib.sha256(b"t,l2\n0.0,1.0\n").hexdigest()


def test_manifest_records_everything(tmp_path):
    out = tmp_path / "out.csv"
    out.write_text("a,b\n1,2\n")
    man = RunManifest(command="kdvlab solve --config c.cfg", config={"grid.N": 64})
    man.add_output(str(out))
    man.finish("PASS")
    path = tmp_path / "manifest.json"
    man.write(str(path))

    obj = json.loads(path.read_text())
    assert obj["command"] == "kdvlab solve --config c.cfg"
    assert obj["config"] == {"grid.N": 64}
    assert obj["code_version"] == __version__
    assert obj["verdict"] == "PASS"
    assert obj["outputs"][str(out)] == file_sha256(str(out))
    assert obj["started"] and obj["finished"]


def test_manifest_hash_tracks_content(tmp_path):
    out = tmp_path / "out.csv"
    out.write_text("x\n")
    man = RunManifest(command="c", config={})
    man.add_output(str(out))
    h1 = man.outputs[str(out)]
    out.write_text("y\n")
    man.add_output(str(out))
    assert man.outputs[str(out)] != h1
