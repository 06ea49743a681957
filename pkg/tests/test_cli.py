"""Command-line surface: exit codes, reports, fixtures, environment seed."""

import json

import pytest

from deflator_lab import treeio
from deflator_lab.cli import run
from deflator_lab.scenarios import available, write_scenario


def read(path):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


@pytest.fixture()
def fixtures(tmp_path):
    paths = {}
    for name in available():
        d = tmp_path / name
        write_scenario(name, str(d))
        paths[name] = d
    return paths


def test_check_passes_on_binomial(fixtures, tmp_path):
    out = tmp_path / "report.json"
    code = run(["check", "--tree", str(fixtures["insider-binomial"] / "tree.json"),
                "--price", "S", "--both", "--out", str(out)])
    assert code == 0
    report = read(out)
    assert report["verdicts"] == {"na": True, "na1": True}
    assert report["values"]["optimal_value"] == "3/2"
    assert report["schema_version"] == "1"
    assert report["provenance"]["operation"] == "arbitrage.check"


def test_check_fails_on_deterministic_drift(fixtures, tmp_path):
    out = tmp_path / "report.json"
    code = run(["check", "--tree", str(fixtures["exponential-death"] / "tree.json"),
                "--na1", "--out", str(out)])
    assert code == 1
    report = read(out)
    assert report["verdicts"]["na1"] is False
    assert report["values"]["optimal_value"] == "inf"
    assert report["witnesses"]["strategy"]


def test_missing_file_exits_2(tmp_path, capsys):
    assert run(["check", "--tree", str(tmp_path / "absent.json")]) == 2
    assert "not found" in capsys.readouterr().err


def test_malformed_tree_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"horizon": 1, "asset_dim": 1, "nodes": '
                   '[{"id": 0, "time": 0, "parent": null}, '
                   '{"id": 1, "time": 1, "parent": 0}], "P": {"1": "0.3"}}')
    assert run(["check", "--tree", str(bad)]) == 2
    assert "P[1]" in capsys.readouterr().err


def test_deflate_then_verify_and_stopped_check(fixtures, tmp_path):
    tree_in = str(fixtures["insider-binomial"] / "tree.json")
    tree_out = str(tmp_path / "deflated.json")
    report = str(tmp_path / "deflate.json")
    assert run(["deflate", "--tree", tree_in, "--price", "S", "--out", tree_out,
                "--name", "Z", "--normalize", "--report", report]) == 0
    rep = read(report)
    assert rep["verdicts"] == {"na1": True, "constructed": True, "certified": True}
    assert rep["values"]["initial_value"] == "1"
    written = treeio.load(tree_out)
    assert "Z" in written.processes

    ky = str(tmp_path / "ky.json")
    assert run(["ky-verify", "--tree", tree_out, "--deflator", "Z",
                "--price", "S", "--hitting", "5", "--out", ky]) == 0
    assert read(ky)["verdicts"]["kunita_yoeurp"] is True

    sc = str(tmp_path / "stopped.json")
    code = run(["stopped-check", "--tree", tree_out, "--deflator", "Z",
                "--price", "S", "--out", sc])
    stopped = read(sc)
    # strict supermartingale density: drift survives, deflation still certifies
    assert code == 1
    assert stopped["verdicts"]["martingale"] is False
    assert stopped["verdicts"]["deflation"] is True


def test_deflate_reports_offending_atom(fixtures, tmp_path):
    tree_in = str(fixtures["exponential-death"] / "tree.json")
    report = str(tmp_path / "deflate.json")
    code = run(["deflate", "--tree", tree_in, "--price", "S",
                "--out", str(tmp_path / "x.json"), "--report", report])
    assert code == 1
    rep = read(report)
    assert rep["verdicts"] == {"na1": False, "constructed": False}
    assert "atom" in rep["values"]


def test_foellmer_emits_extension_measure(fixtures, tmp_path):
    out = tmp_path / "extension.json"
    code = run(["foellmer", "--tree",
                str(fixtures["exponential-death"] / "tree.json"),
                "--deflator", "Z", "--out", str(out)])
    assert code == 0
    points = read(out)["points"]
    assert {(p["leaf"], p["zeta"], p["mass"]) for p in points} == {
        (2, 1, "1/2"), (2, 2, "1/4"), (2, "inf", "1/4")}


def test_stopped_check_flags_survival_drift(fixtures, tmp_path):
    out = tmp_path / "stopped.json"
    code = run(["stopped-check", "--tree",
                str(fixtures["exponential-death"] / "tree.json"),
                "--deflator", "Z", "--price", "S", "--out", str(out)])
    assert code == 1
    report = read(out)
    assert report["verdicts"]["martingale"] is False
    assert report["values"]["violations"][0]["atom"] == 0
    assert report["values"]["violations"][0]["drift"] == ["1/2"]


def test_enlarge_jacod_and_universal(fixtures, tmp_path):
    tree = str(fixtures["jacod-coins"] / "tree.json")
    labels = str(fixtures["jacod-coins"] / "labels.json")
    out = tmp_path / "jacod.json"
    assert run(["enlarge", "jacod", "--tree", tree, "--label-map", labels,
                "--out", str(out)]) == 0
    report = read(out)
    assert report["verdicts"]["jacod"] is True
    assert report["values"]["density"]["1,h"] == "1"
    assert run(["enlarge", "universal-z", "--tree", tree, "--label-map", labels,
                "--out", str(out)]) == 0
    assert read(out)["values"]["density"]["3,h"] == "1/2"


def test_enlarge_insider_and_logutility(fixtures, tmp_path):
    tree = str(fixtures["insider-binomial"] / "tree.json")
    labels = str(fixtures["insider-binomial"] / "labels.json")
    out = tmp_path / "insider.json"
    assert run(["enlarge", "insider", "--tree", tree, "--label-map", labels,
                "--event", "u", "--out", str(out)]) == 0
    report = read(out)
    assert report["verdicts"] == {"emm_infeasible": True, "na1_enlarged": True,
                                  "certified": True}
    assert report["values"]["replication_cost"] == "1/3"

    assert run(["enlarge", "logutility", "--tree", tree, "--label-map", labels,
                "--out", str(out)]) == 0
    report = read(out)
    assert report["verdicts"]["identity"] is True
    assert abs(report["values"]["mutual_information"] - 0.6931471805599453) < 1e-12


def test_simulate_levy_with_params_and_csv(fixtures, tmp_path):
    params = str(fixtures["levy-counterexample"] / "params.json")
    out = tmp_path / "levy.json"
    csv = tmp_path / "levy.csv"
    paths_csv = tmp_path / "paths.csv"
    code = run(["simulate", "--scenario", "levy", "--params", params,
                "--paths", "5000", "--seed", "3", "--out", str(out),
                "--csv", str(csv), "--paths-csv", str(paths_csv),
                "--sample-paths", "7"])
    assert code == 0
    report = read(out)
    assert report["verdicts"]["frozen_rejects"] is True
    assert report["verdicts"]["repaired_consistent"] is True
    lines = csv.read_text().strip().splitlines()
    assert lines[0] == "name,mean,se,z,n_paths,verdict"
    assert len(lines) == 4
    path_lines = paths_csv.read_text().strip().splitlines()
    assert len(path_lines) == 8
    assert path_lines[0].startswith("path,seed,")


def test_simulate_diffusion_quick(tmp_path):
    out = tmp_path / "diff.json"
    code = run(["simulate", "--scenario", "diffusion", "--paths", "2000",
                "--steps", "64", "--seed", "1", "--out", str(out)])
    assert code == 0
    report = read(out)
    assert set(report["verdicts"]) == {"density_mean", "deflated_price",
                                       "deflated_wealth"}


def test_environment_seed_override(tmp_path, monkeypatch):
    out1 = tmp_path / "a.json"
    out2 = tmp_path / "b.json"
    monkeypatch.setenv("DEFLATOR_LAB_SEED", "99")
    run(["simulate", "--scenario", "levy", "--paths", "500", "--steps", "8",
         "--seed", "1", "--out", str(out1)])
    monkeypatch.delenv("DEFLATOR_LAB_SEED")
    run(["simulate", "--scenario", "levy", "--paths", "500", "--steps", "8",
         "--seed", "99", "--out", str(out2)])
    a, b = read(out1), read(out2)
    assert a["values"]["tests"] == b["values"]["tests"]
    assert a["config"]["seed"] == 99


def test_scenario_unknown_name_lists_available(tmp_path, capsys):
    assert run(["scenario", "nope", "--dir", str(tmp_path)]) == 2
    err = capsys.readouterr().err
    for name in available():
        assert name in err


def test_scenario_files_parse_back(fixtures):
    for name in ("insider-binomial", "exponential-death",
                 "singleton-supermartingale", "jacod-coins"):
        tf = treeio.load(str(fixtures[name] / "tree.json"))
        assert tf.P is not None
        # canonical round trip: serialize(parse(file)) is byte identical
        text = (fixtures[name] / "tree.json").read_text()
        assert treeio.dumps(tf) == text
