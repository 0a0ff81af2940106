import json
import shutil
import subprocess
import sys

import pytest

from beliefmap.cli import main
from beliefmap.ingest import read_corpus
from beliefmap.workspace import ARTIFACTS, MANIFEST, UndeclaredAccess, Workspace

from conftest import FIXTURES

OUTPUTS = ("map.json", "map.dot", "terms.json", "convergence.csv")


@pytest.fixture(scope="module")
def fixture_ws(tmp_path_factory):
    root = tmp_path_factory.mktemp("ws")
    assert main(["run-all", "--generate", "--workspace", str(root)]) == 0
    return root


def snapshot(root, names=ARTIFACTS):
    return {n: (root / n).read_bytes() for n in names}


def test_run_all_produces_every_artifact(fixture_ws):
    for name in ARTIFACTS:
        assert (fixture_ws / name).is_file(), name
    assert (fixture_ws / "convergence_summary.json").is_file()
    manifest = json.loads((fixture_ws / MANIFEST).read_text())
    assert list(manifest["stages"]) == ["align", "converge", "extract", "generate", "map", "stopwords"]
    assert manifest["stages"]["align"]["params"]["theta"] == 0.8


def test_run_all_labels(fixture_ws):
    doc = json.loads((fixture_ws / "map.json").read_text())
    assert ["-".join(p["label"]) for p in doc["places"]] == [
        "goblin-orc-stairs", "rope-gate-orb", "troll-grogg-box", "coins-dragon-barrier",
    ]


def test_manifest_hashes_match_files(fixture_ws):
    manifest = json.loads((fixture_ws / MANIFEST).read_text())
    hashes = Workspace(fixture_ws).hashes()
    for stage in manifest["stages"].values():
        for name, digest in {**stage["inputs"], **stage["outputs"]}.items():
            if name in hashes:
                assert hashes[name] == digest, name


def test_rerun_is_byte_identical(fixture_ws, tmp_path):
    copy = tmp_path / "again"
    shutil.copytree(fixture_ws, copy)
    before = snapshot(copy)
    assert main(["run-all", "--workspace", str(copy)]) == 0
    assert snapshot(copy) == before


def test_jobs_do_not_change_outputs(fixture_ws, tmp_path):
    ws = tmp_path / "par"
    ws.mkdir()
    shutil.copy(fixture_ws / "corpus.jsonl", ws)
    assert main(["run-all", "--workspace", str(ws), "--jobs", "4"]) == 0
    assert snapshot(ws, OUTPUTS) == snapshot(fixture_ws, OUTPUTS)


def test_missing_corpus_exit_2(tmp_path, capsys):
    assert main(["align", "--workspace", str(tmp_path)]) == 2
    assert "align: missing corpus.jsonl" in capsys.readouterr().err
    assert main(["run-all", "--workspace", str(tmp_path)]) == 2
    assert "missing corpus.jsonl" in capsys.readouterr().err
    assert not any(tmp_path.iterdir())


def test_stage_order_enforced(fixture_ws, tmp_path, capsys):
    shutil.copy(fixture_ws / "corpus.jsonl", tmp_path)
    assert main(["extract", "--workspace", str(tmp_path)]) == 2
    assert "extract: missing stopwords.json" in capsys.readouterr().err


def test_failed_stage_writes_nothing(tmp_path, capsys):
    # Two groups that share no pasted text: alignment must fail with exit 3.
    lines = [
        {"group_id": "a", "seq": 0, "author": "D", "role": "dm", "text": "hello there"},
        {"group_id": "b", "seq": 0, "author": "E", "role": "dm", "text": "good evening"},
    ]
    (tmp_path / "corpus.jsonl").write_text("".join(json.dumps(r) + "\n" for r in lines))
    assert main(["align", "--workspace", str(tmp_path)]) == 3
    assert "align: no common markers" in capsys.readouterr().err
    assert not (tmp_path / "markers.json").exists()
    assert not (tmp_path / "sections.json").exists()
    assert not (tmp_path / MANIFEST).exists()


def test_validate_reports_violations(tmp_path, capsys):
    lines = [
        {"group_id": "a", "seq": 0, "author": "D", "role": "dm", "text": "x"},
        {"group_id": "b", "seq": 0, "author": "P", "role": "player", "text": "y"},
    ]
    (tmp_path / "corpus.jsonl").write_text("".join(json.dumps(r) + "\n" for r in lines))
    assert main(["validate", "--workspace", str(tmp_path)]) == 3
    assert "b\t-\tno-dm" in capsys.readouterr().out


def test_validate_ok(fixture_ws, capsys):
    assert main(["validate", "--workspace", str(fixture_ws)]) == 0
    assert "validate: ok" in capsys.readouterr().out


def test_invalid_corpus_blocks_stages(tmp_path, capsys):
    (tmp_path / "corpus.jsonl").write_text('{"group_id": "a", "seq": 0}\n')
    assert main(["stopwords", "--workspace", str(tmp_path)]) == 3
    assert "missing field author" in capsys.readouterr().err


def test_usage_errors():
    assert main([]) == 2
    assert main(["bogus"]) == 2
    assert main(["align", "--theta", "high"]) == 2


def test_config_file_and_override(fixture_ws, tmp_path):
    ws = tmp_path / "cfg"
    ws.mkdir()
    shutil.copy(fixture_ws / "corpus.jsonl", ws)
    config = tmp_path / "params.json"
    config.write_text(json.dumps({"label-k": 2, "theta": 0.9}))
    assert main(["run-all", "--workspace", str(ws), "--config", str(config)]) == 0
    manifest = json.loads((ws / MANIFEST).read_text())
    assert manifest["stages"]["extract"]["params"]["label_k"] == 2
    assert manifest["stages"]["align"]["params"]["theta"] == 0.9
    assert json.loads((ws / "map.json").read_text())["places"][0]["label"] == ["goblin", "orc"]

    assert main(["extract", "--workspace", str(ws), "--config", str(config), "--label-k", "4"]) == 0
    terms = json.loads((ws / "terms.json").read_text())
    assert terms[0]["label"] == ["goblin", "orc", "stairs", terms[0]["place_terms"][3][0]]


def test_bad_config(tmp_path, capsys):
    config = tmp_path / "c.json"
    config.write_text("[1]")
    assert main(["align", "--workspace", str(tmp_path), "--config", str(config)]) == 2
    assert "must hold an object" in capsys.readouterr().err


def test_generate_with_truth(tmp_path):
    out, truth = tmp_path / "c.jsonl", tmp_path / "t.json"
    assert main(["generate", "--workspace", str(tmp_path), "--seed", "7",
                 "--out", str(out), "--truth", str(truth)]) == 0
    c = read_corpus(out)
    assert c.meta["seed"] == 7
    assert json.loads(truth.read_text())["seed"] == 7


def test_ingest_formats(tmp_path):
    ws = str(tmp_path)
    assert main(["ingest", "--workspace", ws, "--format", "chat-export", "--group", "slack",
                 "--input", str(FIXTURES / "chat_export"),
                 "--user-map", str(FIXTURES / "chat_users.jsonl")]) == 0
    assert main(["ingest", "--workspace", ws, "--format", "bbs-csv", "--append",
                 "--input", str(FIXTURES / "bbs_thread.csv")]) == 0
    c = read_corpus(tmp_path / "corpus.jsonl")
    assert c.group_ids == ["bbs_thread", "slack"]
    assert c.post_count() == 60
    assert main(["validate", "--workspace", ws]) == 0

    copy = tmp_path / "copy.jsonl"
    assert main(["ingest", "--workspace", ws, "--format", "canonical",
                 "--input", str(tmp_path / "corpus.jsonl"), "--out", str(copy)]) == 0
    assert copy.read_bytes() == (tmp_path / "corpus.jsonl").read_bytes()


def test_ingest_errors(tmp_path, capsys):
    ws = str(tmp_path)
    assert main(["ingest", "--workspace", ws, "--format", "bbs-csv", "--input", str(tmp_path / "no.csv")]) == 2
    assert main(["ingest", "--workspace", ws, "--format", "chat-export",
                 "--input", str(FIXTURES / "chat_export")]) == 2
    assert "--group is required" in capsys.readouterr().err
    bad = tmp_path / "bad.csv"
    bad.write_text("post_id,author\n1,x\n")
    assert main(["ingest", "--workspace", ws, "--format", "bbs-csv", "--input", str(bad)]) == 3


def test_undeclared_read_rejected(tmp_path):
    (tmp_path / "corpus.jsonl").write_text("")
    ws = Workspace(tmp_path)
    with pytest.raises(UndeclaredAccess, match="reads undeclared artifact corpus.jsonl"):
        with ws.stage("map", [], ["map.json"]) as st:
            st.read_text("corpus.jsonl")
    with pytest.raises(UndeclaredAccess, match="writes undeclared"):
        with ws.stage("map", [], []) as st:
            st.write_text("map.json", "{}")
    assert not (tmp_path / "map.json").exists()


def test_console_script_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "beliefmap.cli", "align", "--workspace", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 2
    assert proc.stderr.strip() == "align: missing corpus.jsonl"
