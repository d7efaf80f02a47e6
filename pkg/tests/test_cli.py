import json
import math
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from hybridoam import cli, tomo
from hybridoam.budget import EfficiencyChain
from hybridoam.config import parse_config, resolve_state
from hybridoam.errors import ConfigParseError
from hybridoam.fock2 import Histogram
from hybridoam.reference import reference_suite

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def run(tmp_path, name, *extra):
    out = tmp_path / name
    code = cli.main(["--config", str(CONFIGS / f"{name}.cfg"), "--out", str(out), *extra])
    return code, out


def test_parse_error_positions():
    with pytest.raises(ConfigParseError) as err:
        parse_config("experiment = hom\n\n  M 0.9\n")
    assert (err.value.line, err.value.column) == (3, 3)
    with pytest.raises(ConfigParseError) as err:
        parse_config("experiment = gate\n[case x]\na = R:+9\n")
    assert err.value.line == 3 and err.value.column == 5
    with pytest.raises(ConfigParseError):
        parse_config("experiment = warp\n")
    with pytest.raises(ConfigParseError):
        parse_config("M = 1\n")
    with pytest.raises(ConfigParseError):
        parse_config("experiment = hom\n[oops]\n")


def test_config_round_trip():
    cfg = parse_config((CONFIGS / "hom.cfg").read_text())
    again = parse_config(cfg.as_text())
    assert again.experiment == "hom" and list(again.cases) == list(cfg.cases)
    assert again.cases["phi+_phi-"]["a"] == cfg.cases["phi+_phi-"]["a"]


def test_state_descriptors_agree():
    a = resolve_state("H:0 -> qplate(q=1, a0=0)")
    b = resolve_state("qplate(q=1, a0=0)")
    c = resolve_state("phi+")
    assert np.allclose(a.vector, c.vector) and np.allclose(b.vector, c.vector)


def test_hom_table(tmp_path):
    code, out = run(tmp_path, "hom")
    assert code == 0
    rows = json.loads((out / "hom.json").read_text())["rows"]
    assert [r["V_theory"] for r in rows] == pytest.approx([0, 1, 0, 1, 0.5], abs=1e-12)
    assert (out / "hom_dip_R2_L-2.csv").read_text().startswith("delay_ns,p_cd")


def test_budget_goldens_via_cli(tmp_path):
    code, out = run(tmp_path, "budget")
    assert code == 0
    rep = json.loads((out / "budget.json").read_text())
    assert rep["rate_det_inter_hz"] == pytest.approx(124.8, rel=5e-3)
    assert rep["rate_gen_intra_hz"] == pytest.approx(1.96e6, rel=5e-3)


def test_tomo_exact_gives_unit_fidelity(tmp_path):
    cfg = tmp_path / "t.cfg"
    cfg.write_text("experiment = tomo\nstate = triplet\nn_mc = 50\n")
    assert cli.main(["--config", str(cfg), "--out", str(tmp_path / "o"), "--exact-probabilities"]) == 0
    rep = json.loads((tmp_path / "o" / "tomo.json").read_text())
    assert rep["raw"]["fidelity"] == pytest.approx(1, abs=1e-6)
    rho = tomo.density_matrix_from_csv((tmp_path / "o" / "tomo_rho.csv").read_text())
    assert rho.shape == (4, 4)


@pytest.mark.parametrize("name", ["chsh", "tomo", "histogram", "gate"])
def test_runs_are_byte_identical(tmp_path, name):
    _, a = run(tmp_path / "a", name)
    _, b = run(tmp_path / "b", name)
    files = sorted(p.name for p in a.iterdir())
    assert files == sorted(p.name for p in b.iterdir())
    for f in files:
        assert (a / f).read_bytes() == (b / f).read_bytes()


def test_seed_flag_changes_output(tmp_path):
    _, a = run(tmp_path / "a", "histogram", "--seed", "1")
    _, b = run(tmp_path / "b", "histogram", "--seed", "2")
    assert (a / "histogram_hom.csv").read_text() != (b / "histogram_hom.csv").read_text()
    hist = Histogram.from_csv((a / "histogram_hom.csv").read_text())
    assert hist.counts.size == 11


def test_chsh_corrected_exceeds_raw(tmp_path):
    code, out = run(tmp_path, "chsh")
    rep = json.loads((out / "chsh.json").read_text())
    assert code == 0 and rep["corrected"]["S"] > rep["raw"]["S"]
    assert rep["S_ideal"] == pytest.approx(2 * math.sqrt(2))


def test_csv_format(tmp_path):
    code, out = run(tmp_path, "gate", "--format", "csv")
    assert code == 0
    lines = (out / "gate.csv").read_text().splitlines()
    assert lines[0] == "key,value" and any(l.startswith("success_prob,") for l in lines)


def test_missing_seed_and_errors(tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("experiment = chsh\nstate = triplet\n")
    assert cli.main(["--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    cfg.write_text("experiment = gate\na = R:+2\nb = L:-2\n")
    assert cli.main(["--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
    assert "[gate]" in capsys.readouterr().err
    cfg.write_text("experiment = budget\neta_qplate = 1.5\n")
    assert cli.main(["--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
    assert cli.main(["--config", str(tmp_path / "missing.cfg")]) == 2


def test_reference_suite_isolation():
    base = {c["name"]: c["passed"] for c in reference_suite()["checks"]}
    perturbed = reference_suite(replace(EfficiencyChain(), qplate=0.6))
    results = {c["name"]: c["passed"] for c in perturbed["checks"]}
    for c in perturbed["checks"]:
        if c["group"] == "budget" and c["name"] not in ("fibered_brightness", "first_lens_brightness"):
            assert not c["passed"]
        if c["group"] in ("interference", "gate"):
            assert c["passed"] and base[c["name"]]
    assert perturbed["S_ideal"] == pytest.approx(2 * math.sqrt(2))
    assert results["rate_det_inter_hz"] is False


def test_reference_flag_writes_report(tmp_path, capsys):
    cli.main(["--reference", "--out", str(tmp_path)])
    rep = json.loads((tmp_path / "reference.json").read_text())
    assert rep["n_passed"] + rep["n_failed"] == len(rep["checks"])
    assert "passed" in capsys.readouterr().out
