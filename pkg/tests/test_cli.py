import json
import os

import pytest

from votewire.cli import main


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    out = str(tmp_path_factory.mktemp("run"))
    assert main(["simulate", "--scale", "0.02", "--seed", "5", "--out", out]) == 0
    assert main(["ingest", "--inputs", out, "--out", out]) == 0
    return out


def _manifest(out, cmd):
    with open(os.path.join(out, f"manifest-{cmd}.json")) as fh:
        return json.load(fh)


def test_simulate_outputs(run_dir):
    for name in ("detail.log", "tallies.csv", "registry.csv", "nas.csv", "truth.jsonl"):
        assert os.path.exists(os.path.join(run_dir, name))


def test_ingest_manifest(run_dir):
    m = _manifest(run_dir, "ingest")
    assert {o["path"] for o in m["outputs"]} == {"dataset.jsonl", "crosscheck.json", "diagnostics.json"}
    assert set(m["inputs"]) >= {"detail", "tallies"}


def test_downstream_commands(run_dir):
    assert main(["classify", "--out", run_dir]) == 0
    assert main(["regress", "--out", run_dir, "--group", "C", "--direction", "incoming"]) == 0
    assert os.path.exists(os.path.join(run_dir, "fit_C_incoming.json"))
    assert main(["compare", "--out", run_dir, "--metric", "abstention_change"]) == 0
    assert main(["report", "--out", run_dir]) == 0
    assert os.path.exists(os.path.join(run_dir, "report.md"))


def test_unknown_metric_exit_2(run_dir):
    assert main(["compare", "--out", run_dir, "--metric", "turnout"]) == 2


def test_missing_dataset_exit_3(tmp_path):
    assert main(["report", "--out", str(tmp_path)]) == 3


def test_corrupt_detail_strict_and_lenient(run_dir, tmp_path):
    with open(os.path.join(run_dir, "detail.log")) as fh:
        text = fh.read()
    bad = tmp_path / "detail.log"
    bad.write_text(text.replace("Acct-Input-Octets = ", "Acct-Input-Octets = x", 1))
    args = ["ingest", "--detail", str(bad), "--tallies", os.path.join(run_dir, "tallies.csv"),
            "--nas", os.path.join(run_dir, "nas.csv")]
    assert main(args + ["--strict", "--out", str(tmp_path / "s")]) == 2
    assert main(args + ["--out", str(tmp_path / "l")]) == 0
    with open(tmp_path / "l" / "crosscheck.json") as fh:
        assert json.load(fh)["skipped_blocks"] == 1


def test_bad_config_exit_2(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text('{"pack": "paper-2004", "p_superior": 7}')
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path)]) == 2
