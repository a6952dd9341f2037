import json
import math
import subprocess
import sys

import numpy as np
import pytest

from commutatorlab import cli
from commutatorlab.funcspace import KatoFunction, SampledFunction
from commutatorlab.kernel import read_matrix_binary, read_matrix_csv
from commutatorlab.scenario import (
    ConfigError,
    ConfigIOError,
    list_checks,
    parse_config,
    resolve,
    run_scenario,
    shipped_names,
    shipped_path,
)

PAIR = {
    "name": "tiny",
    "f": KatoFunction.tanh(1.0).to_json(),
    "g": KatoFunction.tanh(math.pi / 2).to_json(),
    "grid": {"L": 10.0, "N": 128},
    "checks": ["positivity_spectrum", {"name": "trace_check", "tol": 1e-6}],
}


def _write(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


def test_parse_defaults_and_hash():
    (sc,) = parse_config(json.dumps(PAIR))
    assert sc.checks[0]["tol"] == 1e-8 and sc.route == "kernel" and sc.seed == 0
    (again,) = parse_config(json.dumps(dict(reversed(list(PAIR.items())))))
    assert again.config_hash == sc.config_hash
    multi = parse_config(json.dumps({"scenarios": [PAIR, dict(PAIR, name="tiny2")]}))
    assert [s.name for s in multi] == ["tiny", "tiny2"]


@pytest.mark.parametrize(
    "doc",
    [
        "{not json",
        json.dumps({"checks": ["trace_check"]}),
        json.dumps(dict(PAIR, checks=["no_such_check"])),
        json.dumps(dict(PAIR, checks=[])),
        json.dumps(dict(PAIR, route="sideways")),
        json.dumps(dict(PAIR, seed=-1)),
        json.dumps(dict(PAIR, grid={"L": 1.0, "N": 7})),
        json.dumps(dict(PAIR, f={"a": -1.0, "atoms": [[0, 1]]})),
        json.dumps({"scenarios": [PAIR, PAIR]}),
        json.dumps({"name": "x", "g": PAIR["g"], "checks": ["variance_functional"]}),
    ],
)
def test_config_errors(doc):
    with pytest.raises(ConfigError):
        parse_config(doc)


def test_exit_codes(tmp_path, capsys):
    good = _write(tmp_path, PAIR)
    assert cli.main(["run", good, "--out", str(tmp_path / "r")]) == 0
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    assert cli.main(["run", str(bad)]) == 2
    assert cli.main(["run", str(tmp_path / "missing.json")]) == 3
    csv_ref = dict(PAIR, g={"file": "nowhere.csv", "boundary_limits": [-1, 1]})
    assert cli.main(["run", _write(tmp_path, csv_ref, "c.json"), "--out", str(tmp_path / "r")]) == 3
    failing = dict(PAIR, checks=[{"name": "positivity_spectrum", "expect": {"psd_verdict": False}}])
    assert cli.main(["run", _write(tmp_path, failing, "f.json"), "--out", str(tmp_path / "r")]) == 1
    out = capsys.readouterr().out
    assert "PASS tiny" in out and "FAIL tiny (positivity_spectrum)" in out


def test_report_contents(tmp_path):
    out = tmp_path / "r"
    assert cli.main(["run", _write(tmp_path, PAIR), "--out", str(out), "--matrix"]) == 0
    rep = json.loads((out / "tiny.report.json").read_text())
    assert rep["all_pass"] and rep["scenario"] == "tiny" and "timestamp" in rep
    assert [c["name"] for c in rep["checks"]] == ["positivity_spectrum", "trace_check"]
    assert rep["checks"][1]["detail"]["expected"] == pytest.approx(2 / math.pi)
    head = (out / "tiny.plotdata.csv").read_text().splitlines()[0]
    assert head == "series,x,value"
    M = read_matrix_csv(out / "tiny.matrix.csv")
    assert M.shape == (128, 128) and np.allclose(M, M.conj().T)


def test_sampled_function_from_csv(tmp_path):
    x = np.linspace(-10, 10, 128, endpoint=False)
    SampledFunction(x, np.tanh(math.pi / 2 * x), math.pi / 2 / np.cosh(math.pi / 2 * x) ** 2).to_csv(tmp_path / "g.csv")
    doc = dict(PAIR, g={"file": "g.csv", "boundary_limits": [-1, 1], "monotone": True})
    (sc,) = parse_config(json.dumps(doc), str(tmp_path))
    report, _ = run_scenario(sc)
    assert report["all_pass"]


def test_kernel_dump_bit_exact(tmp_path):
    csvp, binp = tmp_path / "k.csv", tmp_path / "k.bin"
    assert cli.main(["kernel-dump", "kato_pair_n1", "--out", str(csvp), "--binary", str(binp)]) == 0
    a, b = read_matrix_csv(csvp), read_matrix_binary(binp)
    assert a.shape == (512, 512)
    assert np.array_equal(a, b)


def test_list_checks_sorted(capsys):
    assert cli.main(["list-checks", "--scenarios"]) == 0
    out = capsys.readouterr().out
    names = [line.split("\t")[0] for line in out.splitlines() if line and not line.startswith("scenario")]
    assert names == sorted(names) == [c.name for c in list_checks()]
    assert "tr C = [f][g]/2π" in out
    assert "scenario\tkato_pair_n1" in out


def test_spectrum_and_probe(tmp_path, capsys):
    assert cli.main(["spectrum", "rank2_not_positive", "--top", "3"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["psd_verdict"] is False and len(doc["top_eigenvalues"]) == 3
    csvp = tmp_path / "p.csv"
    assert cli.main(["probe", "kato_pair_n1", "--family", "width", "--values", "-0.5", "0.5", "--csv", str(csvp)]) == 0
    cat = json.loads(capsys.readouterr().out)
    assert [e["psd_verdict"] for e in cat] == [False, True]
    assert csvp.read_text().splitlines()[0] == "parameter,min_eig,verdict"


def test_resolve_errors():
    with pytest.raises(ConfigIOError):
        resolve("no_such_scenario")
    assert shipped_path("kato_pair_n1").endswith("kato_pair_n1.json")
    assert len(shipped_names()) == 13


def test_console_entry_point_help():
    r = subprocess.run([sys.executable, "-m", "commutatorlab.cli", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "kernel-dump" in r.stdout


def test_parallel_matches_sequential(tmp_path):
    cfg = _write(tmp_path, {"scenarios": [PAIR, dict(PAIR, name="tiny2")]})
    assert cli.main(["run", cfg, "--out", str(tmp_path / "seq")]) == 0
    assert cli.main(["run", cfg, "--out", str(tmp_path / "par"), "--parallel"]) == 0
    for name in ("tiny", "tiny2"):
        a = json.loads((tmp_path / "seq" / f"{name}.report.json").read_text())
        b = json.loads((tmp_path / "par" / name / f"{name}.report.json").read_text())
        a.pop("timestamp")
        b.pop("timestamp")
        assert a == b
