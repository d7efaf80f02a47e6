"""Batch driver: ``hybridoam --config run.cfg --out results/``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import budget, fock2, gate, tomo
from .config import STOCHASTIC, ExperimentConfig, parse_config, resolve_state
from .errors import ConfigParseError, PhotonicsError
from .reference import HOM_CASES, reference_suite


class Run:
    """Collects the artifacts of one experiment before they are written."""

    def __init__(self, cfg: ExperimentConfig, seed: int | None, exact: bool):
        self.cfg = cfg
        self.seed = seed
        self.exact = exact
        self.summary: dict = {}
        self.files: dict[str, str] = {}

    def child_seed(self, k: int) -> int | None:
        if self.seed is None:
            return None
        return int(np.random.SeedSequence([self.seed, k]).generate_state(1)[0])


def _jsonable(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"cannot serialise {type(x).__name__}")


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n"


def summary_csv(summary: dict) -> str:
    """Flatten nested dicts to ``key,value`` rows; a list of rows becomes a table."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    rows = summary.get("rows")
    if rows:
        keys = list(rows[0])
        w.writerow(keys)
        for r in rows:
            w.writerow([r[k] for k in keys])
        return buf.getvalue()
    w.writerow(["key", "value"])

    def walk(prefix, obj):
        if isinstance(obj, dict):
            for k in sorted(obj):
                walk(f"{prefix}.{k}" if prefix else k, obj[k])
        else:
            w.writerow([prefix, json.dumps(obj, default=_jsonable)])

    walk("", summary)
    return buf.getvalue()


# --- experiments --------------------------------------------------------------

def run_hom(run: Run):
    cfg = run.cfg
    cases = {n: (c["a"], c["b"]) for n, c in cfg.cases.items()} or {n: (a, b) for n, (a, b, _) in HOM_CASES.items()}
    M = cfg.number("M", 1.0)
    tau_c = cfg.number("tau_c")
    model = fock2.IndistinguishabilityModel(M, tau_c=tau_c)
    rows = []
    for name, (a, b) in cases.items():
        ka, kb = resolve_state(a), resolve_state(b)
        p = fock2.pattern_probabilities(fock2.bs_scatter(ka, kb))
        rows.append({
            "case": name,
            "a": a,
            "b": b,
            "V_theory": fock2.hom_visibility(ka, kb),
            "V_model": fock2.hom_visibility(ka, kb, model),
            "p_cd": p.p_cd,
        })
        if tau_c is not None:
            span = cfg.number("dip_span_ns", 3 * tau_c)
            delays = np.linspace(-span, span, cfg.integer("dip_points", 61))
            dip = fock2.hom_dip(ka, kb, model, delays)
            lines = ["delay_ns,p_cd"] + [f"{d:.6g},{p:.12g}" for d, p in zip(delays, dip)]
            run.files[f"hom_dip_{name}.csv"] = "\n".join(lines) + "\n"
    run.summary = {"experiment": "hom", "M": M, "rows": rows}


def _two_qubit_state(cfg: ExperimentConfig, default: str = "triplet"):
    """Pure target plus the (possibly Werner-mixed) state fed to the measurement."""
    if "a" in cfg.params or "b" in cfg.params:
        out = gate.entangling_gate(resolve_state(cfg.get("a", "R:+2")), resolve_state(cfg.get("b", "R:+2")))
        target = out.state
    else:
        name = cfg.get("state", default).lower()
        if name not in gate.BELL_STATES:
            raise ConfigParseError(f"unknown state {name!r}", *cfg._where("state"))
        target = gate.BELL_STATES[name]
    v = cfg.number("visibility")
    if cfg.get("fidelity") is not None:
        v = gate.werner_for_fidelity(cfg.number("fidelity"))
    rho = gate.werner(target, 1.0 if v is None else v)
    return target, rho


def run_gate(run: Run):
    cfg = run.cfg
    out = gate.entangling_gate(resolve_state(cfg.get("a", "R:+2")), resolve_state(cfg.get("b", "R:+2")))
    s, setting = gate.chsh_optimal(out.rho)
    run.summary = {
        "experiment": "gate",
        "success_prob": out.success_prob,
        "leakage": out.leakage,
        "fidelity_triplet": tomo.fidelity(out.rho, gate.TRIPLET),
        "concurrence": gate.concurrence(out.rho),
        "S_max": s,
        "angles_deg": setting.angles_deg(),
        "state_re": out.state.real,
        "state_im": out.state.imag,
    }
    run.files["gate_rho.csv"] = tomo.density_matrix_csv(out.rho)


def run_chsh(run: Run):
    cfg = run.cfg
    target, rho = _two_qubit_state(cfg)
    s_ideal = gate.chsh_optimal(target)[0]
    if cfg.get("setting", "optimal") == "textbook":
        setting = gate.TEXTBOOK_TRIPLET_SETTING
    else:
        setting = gate.chsh_optimal(rho)[1]
    summary = {"experiment": "chsh", "S_ideal": s_ideal, "S_model": gate.chsh_value(rho, setting)}
    if run.exact:
        summary["raw"] = {"S": summary["S_model"], "S_std": 0.0, "angles_deg": setting.angles_deg(), "corrected": False}
    else:
        n = cfg.number("mean_per_pair", 1e4)
        bg = cfg.number("background", 0.0)
        counts = tomo.simulate_chsh_counts(rho, setting, n, bg, rng_seed=run.child_seed(0))
        summary["raw"] = tomo.chsh_from_counts(counts, setting).report()
        if bg > 0:
            summary["corrected"] = tomo.chsh_from_counts(counts, setting, bg).report()
        lines = ["pair,pp,pm,mp,mm"] + [f"{k}," + ",".join(str(int(c)) for c in row) for k, row in enumerate(counts)]
        run.files["chsh_counts.csv"] = "\n".join(lines) + "\n"
    run.summary = summary


def run_tomo(run: Run):
    cfg = run.cfg
    scheme = cfg.get("scheme", "inter")
    target, rho = _two_qubit_state(cfg, "triplet" if scheme == "inter" else "phi+")
    mset = tomo.build_measurements(scheme)
    n_total = cfg.number("N", 1e5)
    bg = cfg.number("background_rate", 0.0)
    time_s = cfg.number("time_s", 1.0)
    # N is the expected signal summed over all nine measurement bases
    records = tomo.simulate_counts(rho, mset, n_total / 9, bg, run.child_seed(0), time_s, exact=run.exact)
    run.files["tomo_counts.csv"] = tomo.records_to_csv(records)
    n_mc = cfg.integer("n_mc", 100)
    reports = {"raw": tomo.reconstruction_report(records, mset, target, n_mc, run.child_seed(1))}
    if bg > 0:
        corrected = tomo.subtract_background(records, cfg.get("background_mode", "dark"))
        reports["corrected"] = tomo.reconstruction_report(corrected, mset, target, n_mc, run.child_seed(2))
        records = corrected
    mle = tomo.mle_reconstruct(records, mset)
    run.files["tomo_rho.csv"] = tomo.density_matrix_csv(mle.rho)
    run.files["tomo_rho_linear.csv"] = tomo.density_matrix_csv(tomo.linear_inversion(records, mset))
    run.summary = {"experiment": "tomo", "scheme": scheme, "N": n_total, **reports}


def run_budget(run: Run):
    cfg = run.cfg
    keys = {k: v for k, v in cfg.params.items() if not k.startswith("__") and k not in ("experiment", "r_det", "seed")}
    chain, extra = budget.parse_chain("\n".join(f"{k} = {v}" for k, v in keys.items()))
    if extra:
        key = sorted(extra)[0]
        raise ConfigParseError(f"unknown budget key {key!r}", *cfg._where(key))
    run.summary = {"experiment": "budget", **budget.report(chain, cfg.number("r_det", 4e6))}


def run_histogram(run: Run):
    cfg = run.cfg
    model = fock2.IndistinguishabilityModel(cfg.number("M", 1.0))
    g2 = cfg.number("g2", 0.0)
    rate = cfg.number("rate", 1e3)
    period = cfg.number("rep_period_ns", 12.5)
    duration = cfg.number("duration_s", 60.0)
    n_side = cfg.integer("n_side", 5)
    inputs = None
    if "a" in cfg.params:
        inputs = (resolve_state(cfg.get("a")), resolve_state(cfg.get("b", cfg.get("a"))))
    hom = fock2.simulate_histogram(rate, period, duration, model, g2, run.child_seed(0), inputs, "hom", n_side)
    hbt = fock2.simulate_histogram(rate, period, duration, model, g2, run.child_seed(1), None, "hbt", n_side)
    run.files["histogram_hom.csv"] = hom.to_csv()
    run.files["histogram_hbt.csv"] = hbt.to_csv()
    vis = fock2.hom_visibility(*inputs, model) if inputs else model.overlap
    run.summary = {
        "experiment": "histogram",
        "V_true": fock2.raw_visibility(vis, g2),
        "g2_true": g2,
        **fock2.visibility_report(hom, hbt),
    }


RUNNERS = {
    "hom": run_hom,
    "gate": run_gate,
    "chsh": run_chsh,
    "tomo": run_tomo,
    "budget": run_budget,
    "histogram": run_histogram,
}


def execute(cfg: ExperimentConfig, seed: int | None = None, exact: bool = False) -> Run:
    if seed is None and cfg.get("seed") is not None:
        seed = cfg.integer("seed")
    if cfg.experiment in STOCHASTIC and seed is None and not (exact and cfg.experiment != "histogram"):
        raise ConfigParseError(f"experiment {cfg.experiment!r} needs a seed", 1, 1)
    run = Run(cfg, seed, exact)
    RUNNERS[cfg.experiment](run)
    run.summary["seed"] = seed
    run.summary["exact_probabilities"] = exact
    return run


def write_outputs(run: Run, out: Path, fmt: str) -> list[Path]:
    out.mkdir(parents=True, exist_ok=True)
    name = run.cfg.experiment
    written = []
    payload = dumps(run.summary) if fmt == "json" else summary_csv(run.summary)
    files = {f"{name}.{fmt}": payload, **run.files}
    for fname, text in files.items():
        path = out / fname
        path.write_text(text)
        written.append(path)
    return written


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hybridoam", description="Run a hybrid OAM/polarization photonics experiment.")
    p.add_argument("--config", type=Path, help="experiment config file")
    p.add_argument("--out", type=Path, default=Path("results"), help="output directory")
    p.add_argument("--seed", type=int, help="master seed (overrides the config)")
    p.add_argument("--format", choices=("json", "csv"), default="json", help="summary format")
    p.add_argument("--exact-probabilities", action="store_true", help="use expected counts instead of sampling")
    p.add_argument("--reference", action="store_true", help="run the golden-value reference suite")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return 2
    if args.reference:
        report = reference_suite()
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "reference.json").write_text(dumps(report))
        for row in report["checks"]:
            print(f"{'PASS' if row['passed'] else 'FAIL'}  {row['name']}  expected={row['expected']:.6g}  got={row['got']:.6g}")
        print(f"{report['n_passed']} passed, {report['n_failed']} failed")
        return 0 if report["n_failed"] == 0 else 1
    if args.config is None:
        print("error: --config is required unless --reference is given", file=sys.stderr)
        return 2
    try:
        cfg = parse_config(args.config.read_text())
        run = execute(cfg, args.seed, args.exact_probabilities)
    except ConfigParseError as err:
        print(f"{args.config}: {err}", file=sys.stderr)
        return 2
    except (PhotonicsError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    for path in write_outputs(run, args.out, args.format):
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
