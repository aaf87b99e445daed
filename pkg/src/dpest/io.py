"""File formats: counts, sweeps, decision logs, run configs, traces, summaries.

Structured documents are JSON (configs may also be YAML) with a
``schema_version`` of ``"1"``. JSON output is written with sorted keys and a
trailing newline, and floats in traces use ``%.17g``, so equal inputs give
byte-identical files.
"""
from __future__ import annotations

import dataclasses
import json
import math
import numbers
from pathlib import Path

import numpy as np
import yaml

from .exceptions import ConfigError, DPEstError
from .model import BIVARIATE, ChallengeObservation, HyperParams, common_n
from .sampler import SampleTrace, SamplerConfig

SCHEMA_VERSION = "1"


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_json(path, obj):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(obj))


def _load_structured(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    try:
        if path.suffix.lower() in (".yaml", ".yml"):
            return yaml.safe_load(text)
        return json.loads(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None


def _check_keys(doc, allowed, where):
    if not isinstance(doc, dict):
        raise ConfigError(f"{where} must be a mapping")
    unknown = sorted(set(doc) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {unknown}")


def _check_version(doc, where):
    v = doc.get("schema_version")
    if v != SCHEMA_VERSION:
        raise ConfigError(f"{where}: schema_version must be {SCHEMA_VERSION!r}, got {v!r}")


def _int(v, name):
    if isinstance(v, bool) or not isinstance(v, numbers.Integral):
        raise ConfigError(f"{name} must be an integer, got {v!r}")
    return int(v)


def _float(v, name):
    if isinstance(v, bool) or not isinstance(v, numbers.Real) or not math.isfinite(v):
        raise ConfigError(f"{name} must be a finite number, got {v!r}")
    return float(v)


# --------------------------------------------------------------------------
# Counts
# --------------------------------------------------------------------------

@dataclasses.dataclass
class CountsFile:
    records: list
    N: int | None = None
    provenance: dict = dataclasses.field(default_factory=dict)

    def __post_init__(self):
        if self.N is not None:
            ns = {(r.n0, r.n1) for r in self.records}
            if ns and ns != {(self.N, self.N)}:
                raise ConfigError(f"shared N={self.N} but records have (n0, n1) in {sorted(ns)}")

    def to_dict(self) -> dict:
        doc = {
            "schema_version": SCHEMA_VERSION,
            "records": [dataclasses.asdict(r) for r in self.records],
        }
        if self.N is not None:
            doc["N"] = self.N
        if self.provenance:
            doc["provenance"] = self.provenance
        return doc


def counts_from_dict(doc) -> CountsFile:
    _check_keys(doc, ("schema_version", "records", "N", "provenance"), "counts file")
    _check_version(doc, "counts file")
    raw = doc.get("records")
    if not isinstance(raw, list):
        raise ConfigError("counts file needs a 'records' list")
    records = []
    for i, r in enumerate(raw):
        _check_keys(r, ("id", "n0", "n1", "x", "y"), f"record {i}")
        missing = {"id", "n0", "n1", "x", "y"} - set(r)
        if missing:
            raise ConfigError(f"record {i} is missing {sorted(missing)}")
        if not isinstance(r["id"], str):
            raise ConfigError(f"record {i}: id must be a string")
        try:
            records.append(ChallengeObservation(
                r["id"], *(_int(r[k], f"record {i}.{k}") for k in ("n0", "n1", "x", "y"))
            ))
        except DPEstError as exc:
            raise ConfigError(f"record {i}: {exc}") from None
    ids = [r.id for r in records]
    if len(set(ids)) != len(ids):
        raise ConfigError("record ids must be unique")
    n = doc.get("N")
    n = None if n is None else _int(n, "N")
    prov = doc.get("provenance", {})
    if not isinstance(prov, dict):
        raise ConfigError("provenance must be a mapping")
    return CountsFile(records, n, prov)


def read_counts(path) -> CountsFile:
    return counts_from_dict(_load_structured(path))


def write_counts(path, counts: CountsFile):
    write_json(path, counts.to_dict())


def write_sweep(path, alpha_grid, per_base: dict, provenance=None):
    """One (x, y) per grid level per base: ``per_base[id] = [(x, y, n0, n1), ...]``."""
    doc = {
        "schema_version": SCHEMA_VERSION,
        "alpha_grid": [float(a) for a in alpha_grid],
        "bases": [
            {"id": bid, "points": [
                {"alpha_star": float(a), "x": x, "y": y, "n0": n0, "n1": n1}
                for a, (x, y, n0, n1) in zip(alpha_grid, pts)
            ]}
            for bid, pts in per_base.items()
        ],
    }
    if provenance:
        doc["provenance"] = provenance
    write_json(path, doc)


def write_decision_log(path, logs: dict):
    """CSV of every trial: ``base_id,hypothesis,trial,score,decision``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as fh:
        fh.write("base_id,hypothesis,trial,score,decision\n")
        for bid, res in logs.items():
            trial = np.concatenate([np.arange(res.n0), np.arange(res.n1)])
            for h, t, sc, d in zip(res.hypothesis, trial, res.score, res.decision):
                fh.write(f"{bid},{int(h)},{int(t)},{sc:.17g},{int(d)}\n")


# --------------------------------------------------------------------------
# Run configuration
# --------------------------------------------------------------------------

_PRIOR_KEYS = ("delta", "sigma_eps_sq", "beta_a", "beta_b", "sigma_tau_sq", "sigma_rho_sq")
_SAMPLER_INT = ("iterations", "burn_in", "n_aux")
_SAMPLER_FLOAT = ("prop_var_eps", "prop_var_s", "prop_var_tau", "prop_var_rho")
_INIT_KEYS = ("eps", "s", "tau", "rho")


@dataclasses.dataclass(frozen=True)
class RunConfig:
    """Everything that determines an estimation run."""

    hp: HyperParams
    sampler: SamplerConfig
    n_chains: int = 1

    def __post_init__(self):
        if self.n_chains < 1:
            raise ConfigError("n_chains must be >= 1")

    def to_dict(self) -> dict:
        c = self.sampler
        return {
            "schema_version": SCHEMA_VERSION,
            "mode": c.mode,
            "seed": c.seed,
            "n_chains": self.n_chains,
            "prior": {k: getattr(self.hp, k) for k in _PRIOR_KEYS},
            "sampler": {
                **{k: getattr(c, k) for k in _SAMPLER_INT + _SAMPLER_FLOAT},
                "fixed_s": c.fixed_s,
            },
            "init": {k: getattr(c, f"init_{k}") for k in _INIT_KEYS},
        }

    def estimator(self):
        from .estimator import BayesianDPEstimator

        c = self.sampler
        return BayesianDPEstimator(
            **{k: getattr(self.hp, k) for k in _PRIOR_KEYS},
            **{k: getattr(c, k) for k in _SAMPLER_INT + _SAMPLER_FLOAT},
            mode=c.mode, fixed_s=c.fixed_s, n_chains=self.n_chains, random_state=c.seed,
            **{f"init_{k}": getattr(c, f"init_{k}") for k in _INIT_KEYS},
        )


def config_from_dict(doc, overrides: dict | None = None) -> RunConfig:
    """Validate a config document; ``overrides`` (flat keys) win over the file."""
    doc = {} if doc is None else doc
    _check_keys(doc, ("schema_version", "mode", "seed", "n_chains", "prior", "sampler", "init"),
                "config")
    if "schema_version" in doc:
        _check_version(doc, "config")
    prior = doc.get("prior", {}) or {}
    samp = doc.get("sampler", {}) or {}
    init = doc.get("init", {}) or {}
    _check_keys(prior, _PRIOR_KEYS, "config.prior")
    _check_keys(samp, _SAMPLER_INT + _SAMPLER_FLOAT + ("fixed_s",), "config.sampler")
    _check_keys(init, _INIT_KEYS, "config.init")

    flat = {"mode": doc.get("mode", "independent"), "seed": doc.get("seed", 0),
            "n_chains": doc.get("n_chains", 1)}
    flat.update(prior)
    flat.update(samp)
    flat.update({f"init_{k}": v for k, v in init.items()})
    for k, v in (overrides or {}).items():
        if v is not None:
            flat[k] = v

    if "delta" not in flat:
        raise ConfigError("prior.delta is required")
    if not isinstance(flat["mode"], str):
        raise ConfigError("mode must be a string")
    try:
        hp = HyperParams(**{k: _float(flat[k], k) for k in _PRIOR_KEYS if k in flat})
        kw = {k: _int(flat[k], k) for k in _SAMPLER_INT if k in flat}
        kw.update({k: _float(flat[k], k) for k in _SAMPLER_FLOAT if k in flat})
        kw.update({f"init_{k}": _float(flat[f"init_{k}"], k)
                   for k in _INIT_KEYS if f"init_{k}" in flat})
        fixed = flat.get("fixed_s")
        kw["fixed_s"] = None if fixed is None else _float(fixed, "fixed_s")
        cfg = SamplerConfig(mode=flat["mode"], seed=_int(flat["seed"], "seed"), **kw)
        return RunConfig(hp, cfg, _int(flat["n_chains"], "n_chains"))
    except ConfigError:
        raise
    except DPEstError as exc:
        raise ConfigError(str(exc)) from None


def read_config(path, overrides=None) -> RunConfig:
    return config_from_dict(_load_structured(path), overrides)


def check_mode_matches(counts: CountsFile, config: RunConfig):
    """Bivariate runs need matched counts; a shared N implies bivariate data."""
    mode = config.sampler.mode
    if mode == BIVARIATE:
        try:
            common_n(counts.records)
        except DPEstError as exc:
            raise ConfigError(f"mode mismatch: {exc}") from None
    elif counts.N is not None:
        raise ConfigError("mode mismatch: counts carry a shared N (cross-fed data) "
                          "but the config mode is 'independent'")


# --------------------------------------------------------------------------
# Traces and summaries
# --------------------------------------------------------------------------

def trace_header(mode: str) -> list[str]:
    return ["iteration", "eps", "s"] + (["tau", "rho"] if mode == BIVARIATE else []) + ["accepted"]


def write_trace(path, trace: SampleTrace):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    cols = [trace.column(n) for n in trace.parameter_names]
    data = np.column_stack([trace.iteration, *cols, trace.accepted.astype(np.int64)])
    fmt = ["%d"] + ["%.17g"] * len(cols) + ["%d"]
    header = ",".join(trace_header(trace.mode))
    with path.open("w") as fh:
        fh.write(header + "\n")
        np.savetxt(fh, data, fmt=fmt, delimiter=",")


def read_trace(path) -> dict:
    """Parse a trace file into a dict of column arrays."""
    path = Path(path)
    try:
        with path.open() as fh:
            header = fh.readline().strip().split(",")
            data = np.loadtxt(fh, delimiter=",", ndmin=2)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot parse trace {path}: {exc}") from None
    if header not in (trace_header("independent"), trace_header(BIVARIATE)):
        raise ConfigError(f"unexpected trace header {header}")
    if data.size == 0:
        data = np.empty((0, len(header)))
    if data.shape[1] != len(header):
        raise ConfigError("trace rows do not match the header")
    out = {name: data[:, i] for i, name in enumerate(header)}
    out["iteration"] = out["iteration"].astype(np.int64)
    out["accepted"] = out["accepted"].astype(bool)
    return out
