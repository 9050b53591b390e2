import json
from pathlib import Path

import pytest

from conftest import DOMAINS_DIR, invoke, write_domain
from kohnlab import cli, engine


@pytest.fixture
def cusp(tmp_path):
    return write_domain(tmp_path / "cusp.json", 2, ["z1^2", "z2^3"])


def test_type_reports_invariants(cusp, capsys):
    code, rep = invoke(["type", cusp], capsys)
    assert code == 0 and rep["outcome"] == "success"
    res = rep["result"]
    assert (res["q"], res["s"], res["p"], res["type"]) == (4, 6, 3, 6)


def test_type_of_non_isolated_zero(tmp_path, capsys):
    dom = write_domain(tmp_path / "line.json", 2, ["z1^2"])
    code, rep = invoke(["type", dom], capsys)
    assert code == 3 and "colength" in rep["error"]


def test_run_and_verify_lines(tmp_path, capsys):
    dom = write_domain(tmp_path / "lines.json", 2, ["z1", "z2"])
    cert = tmp_path / "lines.cert.json"
    code, rep = invoke(["run", dom, "--out", cert], capsys)
    assert code == 0
    assert rep["result"]["nodes"] == 3 and rep["result"]["terminal_epsilon"] == "1/4"
    assert rep["artifacts"] == [str(cert)]
    code, rep = invoke(["verify", cert, dom], capsys)
    assert code == 0 and rep["result"]["accepted"] is True


def test_shipped_domain_files_load():
    names = sorted(p.stem for p in DOMAINS_DIR.glob("*.json"))
    assert names == ["cusp", "lines", "mixed2", "squares2", "squares3", "weighted3"]
    for p in DOMAINS_DIR.glob("*.json"):
        dom = cli.load_domain(str(p))
        assert dom.n in (2, 3)


@pytest.mark.parametrize("gens, where", [
    (["z1^2", "z2^"], "generator 2"),
    (["z1^2", "z3"], "generator 2"),
    (["z1^2", "1/0"], "generator 2"),
])
def test_parse_errors_exit_2(tmp_path, capsys, gens, where):
    dom = write_domain(tmp_path / "bad.json", 2, gens)
    code, rep = invoke(["type", dom], capsys)
    assert code == 2 and where in rep["error"]


def test_invalid_json_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"n": 2,')
    code, rep = invoke(["run", bad], capsys)
    assert code == 2 and "invalid JSON" in rep["error"]
    code, rep = invoke(["type", tmp_path / "missing.json"], capsys)
    assert code == 2


def test_verify_against_wrong_domain_exit_6(tmp_path, cusp, capsys):
    cert = tmp_path / "cusp.cert.json"
    assert invoke(["run", cusp, "--out", cert], capsys)[0] == 0
    other = write_domain(tmp_path / "other.json", 2, ["z1^2", "z2^4"])
    code, rep = invoke(["verify", cert, other], capsys)
    assert code == 6 and rep["result"]["accepted"] is False
    assert rep["error"].startswith("rejected at n1")


def test_tampered_epsilon_names_the_node(tmp_path, cusp, capsys):
    cert = tmp_path / "cusp.cert.json"
    invoke(["run", cusp, "--out", cert], capsys)
    data = json.loads(cert.read_text())
    node = next(nd for nd in data["nodes"] if nd.get("epsilon") and nd["kind"] != "PreMultiplier")
    node["epsilon"] = "1"
    cert.write_text(json.dumps(data))
    code, rep = invoke(["verify", cert, cusp], capsys)
    assert code == 6 and rep["result"]["failed_node"] == node["id"]
    assert f"rejected at {node['id']}" in rep["error"]


def test_genericity_failure_exit_4(tmp_path, cusp, capsys, monkeypatch):
    def never(*args, **kw):
        raise engine._DrawFailed("forced")

    monkeypatch.setattr(engine, "_slot_chain", never)
    code, rep = invoke(["run", cusp, "--out", tmp_path / "c.json", "--retries", 2], capsys)
    assert code == 4 and rep["artifacts"] == []
    assert not (tmp_path / "c.json").exists()


def test_budget_exit_5(tmp_path, cusp, capsys):
    code, rep = invoke(["run", cusp, "--out", tmp_path / "c.json", "--max-spairs", 1], capsys)
    assert code == 5 and "budget" in rep["error"]


def test_bad_flag_values_are_usage_errors(cusp):
    with pytest.raises(SystemExit) as exc:
        cli.main(["type", cusp, "--max-degree", "0"])
    assert exc.value.code == 2


def test_suite_command(capsys):
    code, rep = invoke(["suite", "i5", "--seed", 1, "--cases", 50], capsys)
    assert code == 0 and rep["result"]["failed"] == 0
    assert rep["result"]["passed"] + rep["result"]["skipped"] + rep["result"]["resource_skipped"] == 50
    code, rep = invoke(["suite", "a4", "--seed", 2, "--cases", 30], capsys)
    assert code == 0 and rep["result"]["ok"]


def test_suite_failures_exit_7(capsys):
    # case 4 of seed 0 is a two-by-two-minor counterexample in three variables
    code, rep = invoke(["suite", "a3", "--cases", 5], capsys)
    assert code == 7 and "a3" in rep["error"]
    (fail,) = rep["result"]["failures"]
    assert fail["index"] == 4 and fail["input"]["nu"] == 2
    assert {"input", "seed", "suite"} <= set(fail)


def test_human_output(cusp, capsys):
    code = cli.main(["type", cusp, "--human"])
    out = capsys.readouterr().out
    assert code == 0 and out.startswith("kohnlab type: success (exit 0)")


def test_timings_only_on_request(cusp, capsys):
    _, rep = invoke(["type", cusp], capsys)
    assert "timings" not in rep
    _, rep = invoke(["type", cusp, "--timings"], capsys)
    assert rep["timings"]["wall_s"] >= 0


def _twice(argv, files, capsys):
    outs = []
    for _ in range(2):
        capsys.readouterr()
        code = cli.main([str(a) for a in argv])
        outs.append((code, capsys.readouterr().out, [Path(f).read_bytes() for f in files]))
    return outs


def test_outputs_are_byte_identical_on_rerun(tmp_path, cusp, capsys):
    cert = tmp_path / "c.json"
    rep = tmp_path / "t.json"
    suite = tmp_path / "s.json"
    for argv, files in (
        (["type", cusp, "--out", rep], [rep]),
        (["run", cusp, "--out", cert, "--seed", 3], [cert]),
        (["verify", cert, cusp], []),
        (["suite", "iii4", "--cases", 5, "--out", suite], [suite]),
    ):
        first, second = _twice(argv, files, capsys)
        assert first == second, argv
