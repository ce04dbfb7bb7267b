import json

import pytest

from demosys import acceptance
from demosys.acceptance import Criterion
from demosys.artifacts import read_csv
from demosys.cli import main
from demosys.fundamental import phi_table
from demosys.system import SystemParams, single_norm


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_norm_single(capsys):
    code, out, _ = run(capsys, "norm", "--n", "1", "--l", "1", "--p", "2")
    assert code == 0
    assert float(out.split()[0]) == 1.0
    assert "method=closed-form" in out and "error_bound=" in out
    _, out, _ = run(capsys, "norm", "--n", "1", "--l", "1", "--p", "4")
    assert float(out.split()[0]) == pytest.approx(1.057371, abs=1e-6)


def test_norm_spec_pair(capsys, tmp_path):
    c = 1 / single_norm(1, SystemParams(1.0), 4.0)
    spec = tmp_path / "pair.json"
    spec.write_text(json.dumps({"l": 1, "p": 4, "terms": [{"n": 1, "j": 1, "coeff": c},
                                                          {"n": 1, "j": 2, "coeff": c}]}))
    code, out, _ = run(capsys, "norm", "--spec", str(spec))
    assert code == 0
    assert float(out.split()[0]) == pytest.approx(1.337481, abs=1e-6)
    assert "method=exact" in out


@pytest.mark.parametrize("payload", ['{"l": 1', '{"l": 1, "p": 4}', '[1, 2]',
                                     '{"l": 1, "p": 4, "terms": [{"n": 1, "j": 9, "coeff": 1}]}'])
def test_malformed_spec_exit_2(capsys, tmp_path, payload):
    spec = tmp_path / "bad.json"
    spec.write_text(payload)
    code, _, err = run(capsys, "norm", "--spec", str(spec))
    assert code == 2 and err


def test_missing_flags_exit_2(capsys):
    assert run(capsys, "norm", "--n", "1")[0] == 2
    with pytest.raises(SystemExit) as exc:
        main(["phi", "--l", "1"])
    assert exc.value.code == 2


@pytest.mark.parametrize("argv", [["norm", "--n", "1", "--l", "-1", "--p", "4"],
                                  ["norm", "--n", "1", "--l", "1", "--p", "0.5"],
                                  ["phi", "--l", "1", "--p", "100", "--m", "4"],
                                  ["regime-map", "--p-grid", "1.5"]])
def test_domain_errors_exit_3(capsys, argv):
    assert run(capsys, *argv)[0] == 3


def test_unwritable_output_exit_4(capsys, tmp_path):
    target = tmp_path / "missing" / "out.csv"
    assert run(capsys, "phi", "--l", "1", "--p", "4", "--m", "4", "--out", str(target))[0] == 4


def test_phi_sqrt_in_l2(capsys):
    code, out, _ = run(capsys, "phi", "--l", "1", "--p", "2", "--m", "16")
    config, columns, rows = read_csv(out)
    assert code == 0
    assert columns[:2] == ["m", "phi"]
    assert rows[0]["phi"] == 4.0
    assert config["seed"] == 0 and config["command"] == "phi"


def test_phi_csv_roundtrip_is_bit_identical(capsys):
    _, out, _ = run(capsys, "phi", "--l", "1", "--p", "4", "--m", "4", "16", "64", "--seed", "5")
    config, _, rows = read_csv(out)
    table = phi_table([4, 16, 64], SystemParams(1.0), 4.0)
    assert [r["phi"] for r in rows] == [e.value for e in table]
    assert [r["log2_phi"] for r in rows] == [e.log2 for e in table]
    assert config["seed"] == 5


def test_witness_ratio_column(capsys):
    _, out, _ = run(capsys, "witness", "--l", "2", "--r", "1.5", "--n-max", "12")
    _, _, rows = read_csv(out)
    ratios = [r["ratio"] for r in rows]
    assert [r["n"] for r in rows] == list(range(2, 13))
    assert all(a < b for a, b in zip(ratios, ratios[1:]))


def test_json_mirrors_csv(capsys):
    _, csv_out, _ = run(capsys, "witness", "--l", "2", "--r", "1.5", "--n-max", "5")
    _, json_out, _ = run(capsys, "witness", "--l", "2", "--r", "1.5", "--n-max", "5", "--format", "json")
    _, columns, rows = read_csv(csv_out)
    doc = json.loads(json_out)
    assert doc["columns"] == columns
    assert doc["rows"] == rows
    assert doc["config"]["format"] == "json"


def test_precision_env_and_flag(capsys, monkeypatch):
    monkeypatch.setenv("DEMOSYS_PRECISION_BITS", "200")
    _, out, _ = run(capsys, "norm", "--n", "1", "--l", "1", "--p", "4")
    assert len(out.split()[0]) > 40
    _, out, _ = run(capsys, "norm", "--n", "1", "--l", "1", "--p", "4", "--precision-bits", "53")
    assert out.split()[0] == repr(single_norm(1, SystemParams(1.0), 4.0))
    monkeypatch.setenv("DEMOSYS_PRECISION_BITS", "many")
    assert run(capsys, "norm", "--n", "1", "--l", "1", "--p", "4")[0] == 2


def test_classify(capsys):
    _, out, _ = run(capsys, "classify", "--l", "4", "--p", "4")
    _, _, rows = read_csv(out)
    assert rows[0]["label"] == "democratic-dual-sqrt-nonbidemocratic"


def test_regime_map_deterministic(capsys, tmp_path):
    path = tmp_path / "map.csv"
    runs = []
    for _ in range(2):
        code, _, _ = run(capsys, "regime-map", "--l-grid", "1", "1.5", "--p-grid", "4",
                         "--m-grid", "16", "32", "64", "128", "--out", str(path))
        assert code == 0
        runs.append(path.read_bytes())
    a, b = runs
    assert a == b
    _, columns, rows = read_csv(a.decode())
    assert columns == ["l", "p", "alpha_p", "alpha_p_residual", "alpha_pprime",
                       "alpha_pprime_residual", "product_slope", "witness_monotone",
                       "theory_label", "agree"]
    assert {r["agree"] for r in rows} <= {0, 1}


def test_verify_reports_failure(capsys, monkeypatch):
    bad = lambda: Criterion(99, "always fails", False, "forced")  # noqa: E731
    monkeypatch.setattr(acceptance, "CRITERIA", (bad,))
    code, out, err = run(capsys, "verify")
    assert code == 1
    assert "[FAIL] 99." in err


def test_verify_passes(capsys, tmp_path):
    out_path = tmp_path / "verify.csv"
    code, out, _ = run(capsys, "verify", "--out", str(out_path))
    assert code == 0
    assert out.count("[PASS]") == 12
    _, _, rows = read_csv(out_path.read_text())
    assert all(r["passed"] == 1 for r in rows)
