"""Command line interface: ``dpest measure | estimate | replicate | diagnose``."""
from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import attack, diagnostics, io, quadrature, region, testbed
from .exceptions import ConfigError, DPEstError
from .model import HyperParams
from .sampler import SamplerConfig
from .stats import RngHandle

OUTPUT_ROOT_ENV = "DPEST_OUTPUT_ROOT"

EXIT_CODES = {
    "validation": 3,
    "domain": 4,
    "degenerate-region": 5,
    "not-positive-definite": 6,
    "shape": 7,
    "numerical": 8,
    "insufficient-data": 9,
}


def resolve_out(path) -> Path:
    """Relative output paths are placed under ``$DPEST_OUTPUT_ROOT`` when set."""
    path = Path(path)
    root = os.environ.get(OUTPUT_ROOT_ENV)
    if root and not path.is_absolute():
        return Path(root) / path
    return path


def parse_grid(text: str) -> list[float]:
    """``"0.01:0.99:0.01"`` (start:stop:step, inclusive) or ``"0.05,0.1,0.2"``."""
    try:
        if ":" in text:
            start, stop, step = (float(v) for v in text.split(":"))
            n = int(round((stop - start) / step)) + 1
            return [round(start + i * step, 12) for i in range(n)]
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse grid {text!r}") from None


# --------------------------------------------------------------------------
# measure
# --------------------------------------------------------------------------

def cmd_measure(args) -> dict:
    mech_spec = args.mechanism
    grid = parse_grid(args.alpha_grid) if args.alpha_grid else None
    if grid is not None and args.harness != "fast":
        raise ConfigError("--alpha-grid requires the fast harness")
    if args.n < 0 or args.N < 1:
        raise ConfigError("need --n >= 0 and --N >= 1")
    m0 = args.m0 if args.m0 is not None else args.N
    m1 = args.m1 if args.m1 is not None else args.N

    records, logs, sweeps = [], {}, {}
    draws = 0
    for i in range(args.n):
        mech = testbed.make_mechanism(mech_spec)
        gen = RngHandle(args.seed, i).generator()
        base = testbed.make_base(gen, size=args.base_size, z=args.z)
        bid = f"base-{i}"
        if args.harness == "fast":
            levels = sorted(set(grid or []) | {args.alpha_star})
            res_by_level = dict(attack.roc_sweep(mech, base, args.N, levels, gen))
            res = res_by_level[args.alpha_star]
            if grid is not None:
                sweeps[bid] = [(r.x, r.y, r.n0, r.n1) for r in (res_by_level[a] for a in grid)]
        else:
            res = attack.measure_mia(mech, base, args.N, args.N, m0, m1, args.alpha_star, gen)
        draws += mech.n_draws
        logs[bid] = res
        records.append(io.ChallengeObservation(bid, res.n0, res.n1, res.x, res.y))

    mech = testbed.make_mechanism(mech_spec)
    provenance = {
        "mechanism": mech.name,
        "mechanism_params": mech.params(),
        "alpha_star": args.alpha_star,
        "seed": args.seed,
        "harness": args.harness,
        "base_size": args.base_size,
        "z": args.z,
        "mechanism_draws": draws,
    }
    if args.harness == "slow":
        provenance.update(m0=m0, m1=m1)
    eps_oracle = mech.epsilon_at(args.delta) if args.delta is not None else None
    if eps_oracle is not None:
        provenance["delta"] = args.delta
        provenance["eps_oracle"] = eps_oracle
    counts = io.CountsFile(records, args.N if args.harness == "fast" else None, provenance)
    out = resolve_out(args.out)
    io.write_counts(out, counts)
    written = {"counts": str(out)}
    if grid is not None:
        sweep_out = resolve_out(args.sweep_out or out.with_name(out.stem + ".sweep.json"))
        io.write_sweep(sweep_out, grid, sweeps, provenance)
        written["sweep"] = str(sweep_out)
    if args.decision_log:
        log_out = resolve_out(args.decision_log)
        io.write_decision_log(log_out, logs)
        written["decision_log"] = str(log_out)
    return written


# --------------------------------------------------------------------------
# estimate
# --------------------------------------------------------------------------

_OVERRIDE_FLAGS = {
    "delta": float, "seed": int, "mode": str, "n_chains": int, "iterations": int,
    "burn_in": int, "n_aux": int, "prop_var_eps": float, "prop_var_s": float,
    "prop_var_tau": float, "prop_var_rho": float, "sigma_eps_sq": float,
    "beta_a": float, "beta_b": float, "sigma_tau_sq": float, "fixed_s": float,
    "init_eps": float, "init_s": float, "init_tau": float, "init_rho": float,
}


def _write_run(out_dir: Path, est, config: io.RunConfig, extra=None) -> dict:
    out_dir.mkdir(parents=True, exist_ok=True)
    for i, tr in enumerate(est.traces_):
        io.write_trace(out_dir / ("trace.csv" if i == 0 else f"trace_chain{i}.csv"), tr)
    summary = {
        "schema_version": io.SCHEMA_VERSION,
        "mode": config.sampler.mode,
        "delta": config.hp.delta,
        "n_observations": est.n_observations_,
        **est.summary(),
        **(extra or {}),
    }
    io.write_json(out_dir / "summary.json", summary)
    io.write_json(out_dir / "config.json", config.to_dict())
    return summary


def run_estimate(counts: io.CountsFile, config: io.RunConfig, out_dir: Path, extra=None) -> dict:
    io.check_mode_matches(counts, config)
    est = config.estimator().fit(counts.records)
    return _write_run(out_dir, est, config, extra)


def cmd_estimate(args) -> dict:
    counts = io.read_counts(args.counts)
    overrides = {k: getattr(args, k) for k in _OVERRIDE_FLAGS}
    doc = io._load_structured(args.config) if args.config else {}
    config = io.config_from_dict(doc, overrides)
    out_dir = resolve_out(args.out_dir)
    summary = run_estimate(counts, config, out_dir)
    return {"out_dir": str(out_dir), "eps_ci90": summary["parameters"]["eps"]["ci90"]}


# --------------------------------------------------------------------------
# replicate
# --------------------------------------------------------------------------

REPLICATE_DELTA = 0.05
FIG2_S_GRID = (0.1, 0.3, 0.5, 0.7, 0.9)


def _scaled(n: int, scale: float) -> int:
    return max(10, int(round(n * scale)))


def _config(seed, scale, iterations, burn_in, **kw) -> io.RunConfig:
    hp_keys = {k: kw.pop(k) for k in ("beta_a", "beta_b") if k in kw}
    return io.RunConfig(
        HyperParams(delta=REPLICATE_DELTA, **hp_keys),
        SamplerConfig(iterations=_scaled(iterations, scale), burn_in=_scaled(burn_in, scale),
                      seed=seed, **kw),
    )


def _replicate_fig2(seed, out_dir, scale):
    obs = testbed.scenario_fig2(1000)
    rows = []
    for s in FIG2_S_GRID:
        config = _config(seed, scale, 200_000, 20_000, n_aux=100, prop_var_eps=0.1,
                         fixed_s=s, init_s=s)
        counts = io.CountsFile([obs])
        summary = run_estimate(counts, config, out_dir / f"s={s:g}")
        lo, hi = summary["parameters"]["eps"]["ci90"]
        rows.append({"s": s, "ci90": [lo, hi], "width": hi - lo,
                     "median": summary["parameters"]["eps"]["quantiles"]["0.5"]})
    widths = [r["width"] for r in rows]
    return {"rows": rows,
            "strictly_decreasing": all(a > b for a, b in zip(widths, widths[1:]))}


def _scenario_counts(which, seed):
    if which == "weak":
        return testbed.generate_scenario_weak(10, 1000, RngHandle(seed, 1 << 32))
    return testbed.scenario_strong()


def _replicate_scenario(which, seed, out_dir, scale):
    records = _scenario_counts(which, seed)
    counts = io.CountsFile(records, provenance={"scenario": which, "seed": seed})
    io.write_counts(out_dir / "counts.json", counts)
    config = _config(seed, scale, 100_000, 10_000, n_aux=200)
    summary = run_estimate(counts, config, out_dir)
    implied = [float(region.implied_epsilon(r.x / r.n0, r.y / r.n1, REPLICATE_DELTA))
               for r in records]
    return {
        "scenario": which,
        "eps_ci90": summary["parameters"]["eps"]["ci90"],
        "eps_median": summary["parameters"]["eps"]["quantiles"]["0.5"],
        "s_mean": summary["parameters"]["s"]["mean"],
        "max_implied_eps": max(implied),
    }


ORACLE_CHECK = dict(x=40, y=40, N=100, beta_a=5000.0, beta_b=556.0)
ORACLE_TOLERANCE = 0.02


def _replicate_oracle(seed, out_dir, scale):
    obs = io.ChallengeObservation("oracle", ORACLE_CHECK["N"], ORACLE_CHECK["N"],
                                  ORACLE_CHECK["x"], ORACLE_CHECK["y"])
    config = _config(seed, scale, 1_100_000, 100_000, n_aux=100, prop_var_eps=0.5,
                     prop_var_s=1e-5, init_eps=0.5, init_s=0.9,
                     beta_a=ORACLE_CHECK["beta_a"], beta_b=ORACLE_CHECK["beta_b"])
    est = config.estimator().fit([obs])
    _write_run(out_dir, est, config)
    grid, cdf = quadrature.eps_posterior_cdf(obs, config.hp)
    dist = quadrature.sup_distance(est.samples_["eps"], grid, cdf)
    return {"sup_distance": dist, "tolerance": ORACLE_TOLERANCE, "pass": dist <= ORACLE_TOLERANCE,
            "n_samples": int(est.samples_["eps"].size)}


EXPERIMENTS = ("fig2-ci-vs-s", "scenario-weak", "scenario-strong", "oracle-check")


def cmd_replicate(args) -> dict:
    if args.experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {args.experiment!r}; known: {list(EXPERIMENTS)}")
    if not args.scale > 0:
        raise ConfigError("--scale must be positive")
    out_dir = resolve_out(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.experiment == "fig2-ci-vs-s":
        report = _replicate_fig2(args.seed, out_dir, args.scale)
    elif args.experiment == "oracle-check":
        report = _replicate_oracle(args.seed, out_dir, args.scale)
    else:
        report = _replicate_scenario(args.experiment.split("-")[1], args.seed, out_dir, args.scale)
    report = {"schema_version": io.SCHEMA_VERSION, "experiment": args.experiment,
              "seed": args.seed, "scale": args.scale, **report}
    io.write_json(out_dir / "report.json", report)
    return report


# --------------------------------------------------------------------------
# diagnose
# --------------------------------------------------------------------------

def cmd_diagnose(args) -> dict:
    cols = io.read_trace(args.trace)
    if cols["eps"].size == 0:
        raise ConfigError("trace has no samples")
    names = [n for n in ("eps", "s", "tau", "rho") if n in cols]
    report = {"schema_version": io.SCHEMA_VERSION, "n_samples": int(cols["eps"].size),
              "acceptance_rate": float(cols["accepted"].mean()), "parameters": {}}
    for name in names:
        x = cols[name]
        try:
            lags = diagnostics.acf(x, args.max_lag).tolist()
        except DPEstError:
            lags = None
        idx, vals = diagnostics.decimate(x, args.max_points)
        report["parameters"][name] = {
            "acf": lags,
            "ess": diagnostics.ess(x),
            "series": {"iteration": cols["iteration"][idx].tolist(), "value": vals.tolist()},
        }
    out_dir = resolve_out(args.out_dir)
    io.write_json(out_dir / "diagnostics.json", report)
    return {"out_dir": str(out_dir),
            "ess": {n: report["parameters"][n]["ess"] for n in names}}


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dpest", description="Bayesian estimation of DP epsilon "
                                "from membership-inference error counts.")
    sub = p.add_subparsers(dest="command", required=True)

    m = sub.add_parser("measure", help="attack a testbed mechanism and write counts")
    m.add_argument("--mechanism", required=True,
                   help='e.g. "gaussian:sensitivity=1,sigma=1" or "laplace:eps_true=1"')
    m.add_argument("--n", type=int, default=20, help="number of challenge bases")
    m.add_argument("--N", type=int, default=100, help="challenges per hypothesis")
    m.add_argument("--alpha-star", type=float, default=0.1)
    m.add_argument("--alpha-grid", help="start:stop:step or comma list (fast harness)")
    m.add_argument("--harness", choices=("fast", "slow"), default="fast")
    m.add_argument("--m0", type=int, help="H0 shadow set size (slow harness)")
    m.add_argument("--m1", type=int, help="H1 shadow set size (slow harness)")
    m.add_argument("--base-size", type=int, default=20)
    m.add_argument("--z", type=float, default=1.0, help="value of the challenge record")
    m.add_argument("--delta", type=float, help="record the analytic eps at this delta")
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--out", required=True)
    m.add_argument("--sweep-out")
    m.add_argument("--decision-log")
    m.set_defaults(func=cmd_measure)

    e = sub.add_parser("estimate", help="sample the posterior for a counts file")
    e.add_argument("counts")
    e.add_argument("--config", help="JSON or YAML run config")
    e.add_argument("--out-dir", required=True)
    for flag, typ in _OVERRIDE_FLAGS.items():
        e.add_argument("--" + flag.replace("_", "-"), dest=flag, type=typ)
    e.set_defaults(func=cmd_estimate)

    r = sub.add_parser("replicate", help="run a built-in synthetic experiment")
    r.add_argument("experiment", help=", ".join(EXPERIMENTS))
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--out-dir", required=True)
    r.add_argument("--scale", type=float, default=1.0,
                   help="multiply chain lengths (for quick smoke runs)")
    r.set_defaults(func=cmd_replicate)

    d = sub.add_parser("diagnose", help="ACF, ESS and trace series of a trace file")
    d.add_argument("trace")
    d.add_argument("--out-dir", required=True)
    d.add_argument("--max-lag", type=int, default=100)
    d.add_argument("--max-points", type=int, default=10_000)
    d.set_defaults(func=cmd_diagnose)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        result = args.func(args)
    except DPEstError as exc:
        err = {"error": exc.category, "message": str(exc)}
        print(json.dumps(err), file=sys.stderr)
        return EXIT_CODES.get(exc.category, 1)
    print(json.dumps(result, sort_keys=True, default=float))
    return 0


if __name__ == "__main__":
    sys.exit(main())
