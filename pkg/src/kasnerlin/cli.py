"""Command line entry point: ``kasnerlin run | verify | sweep``.

Exit codes: 0 success, 1 criterion failure, 2 configuration error,
3 numerical failure.
"""
from __future__ import annotations

import csv
import dataclasses
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import click
import numpy as np

from . import __version__
from . import acceptance as acc
from . import diagnostics as D
from .background import KasnerBackground
from .errors import ConfigError, ForwardParabolic, InsufficientDepth, InsufficientSpan, KasnerLinError
from .gauge_cmc import make_initial_data, normalized_constraint_residuals
from .gauge_parabolic import make_initial_data_parabolic
from .integrator import IntegratorOptions, Trajectory, integrate
from .spectral_state import Gauge, solution_norm, solution_norm_parts, zero_state

THREADS_ENV = "KASNERLIN_THREADS"
DIAGNOSTIC_KINDS = ("energies", "constraints", "identities", "fits", "bang", "monotonicity")
SUITES = ("identities", "constraints", "exponents", "all")
SWEEP_PARAMS = ("sigma", "lambda", "kmax", "sigma_star")
NORM_PARTS = ("K", "dgamma", "pi", "dpsi", "nu_0", "nu_1", "nu_2")


@dataclass
class RunConfig:
    background: object = "flrw"  # "flrw", {"q1", "q2", "strict_positive"} or {"sigma", "angle"}
    gauge: dict = field(default_factory=lambda: {"kind": "cmc"})
    k_max: int = 4
    seed: int = 0
    spectrum: float = 2.0
    initial_data: str = "random"  # or "zero"
    integrator: dict = field(default_factory=dict)
    t_end: float | None = None
    diagnostics: list = field(default_factory=lambda: list(DIAGNOSTIC_KINDS))
    sigma_star: float = 0.1
    N: int = 4
    output_dir: str = "out"

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**d)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            with open(path) as fh:
                d = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(d)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def validate(self):
        g = self.gauge
        if not isinstance(g, dict) or g.get("kind") not in ("cmc", "parabolic"):
            raise ConfigError("gauge must be {'kind': 'cmc'} or {'kind': 'parabolic', 'lambda': ...}")
        if set(g) - {"kind", "lambda"}:
            raise ConfigError(f"unknown gauge keys: {sorted(set(g) - {'kind', 'lambda'})}")
        if g["kind"] == "cmc" and "lambda" in g:
            raise ConfigError("lambda is only meaningful for the parabolic gauge")
        if g["kind"] == "parabolic" and not isinstance(g.get("lambda"), (int, float)):
            raise ConfigError("the parabolic gauge needs a numeric lambda")
        if not isinstance(self.k_max, int) or self.k_max < 0:
            raise ConfigError("k_max must be a nonnegative integer")
        if not isinstance(self.seed, int):
            raise ConfigError("seed must be an integer")
        if not isinstance(self.N, int) or self.N < 0:
            raise ConfigError("N must be a nonnegative integer")
        if self.initial_data not in ("random", "zero"):
            raise ConfigError("initial_data must be 'random' or 'zero'")
        if not (self.sigma_star > 0):
            raise ConfigError("sigma_star must be positive")
        bad = set(self.diagnostics) - set(DIAGNOSTIC_KINDS)
        if bad:
            raise ConfigError(f"unknown diagnostics {sorted(bad)}")
        self.background_obj()
        self.options()

    def background_obj(self) -> KasnerBackground:
        b = self.background
        try:
            if b == "flrw":
                return KasnerBackground.flrw()
            if isinstance(b, dict) and set(b) <= {"q1", "q2", "strict_positive"} and {"q1", "q2"} <= set(b):
                return KasnerBackground.from_exponents(b["q1"], b["q2"], b.get("strict_positive", True))
            if isinstance(b, dict) and set(b) <= {"sigma", "angle", "strict_positive"} and "sigma" in b:
                return KasnerBackground.from_sigma(b["sigma"], b.get("angle", 0.0),
                                                   b.get("strict_positive", True))
        except KasnerLinError as exc:
            raise ConfigError(f"invalid background: {exc}") from exc
        raise ConfigError(f"invalid background specification {b!r}")

    def gauge_obj(self) -> Gauge:
        if self.gauge["kind"] == "cmc":
            return Gauge.cmc()
        return Gauge.parabolic(float(self.gauge["lambda"]))

    def options(self) -> IntegratorOptions:
        names = {f.name for f in dataclasses.fields(IntegratorOptions)}
        unknown = set(self.integrator) - names
        if unknown:
            raise ConfigError(f"unknown integrator options {sorted(unknown)}")
        kw = dict(self.integrator)
        for key in ("orders", "extra_times"):
            if key in kw:
                kw[key] = tuple(kw[key])
        return IntegratorOptions(**kw)

    def initial_state(self):
        bg = self.background_obj()
        gauge = self.gauge_obj()
        if self.initial_data == "zero":
            return zero_state(bg, gauge, self.k_max)
        if gauge.is_parabolic:
            return make_initial_data_parabolic(bg, gauge.lam, self.seed, self.k_max, self.spectrum)
        return make_initial_data(bg, self.seed, self.k_max, self.spectrum)


# ---------------------------------------------------------------- run

def provenance(cfg: RunConfig) -> dict:
    bg = cfg.background_obj()
    gauge = cfg.gauge_obj()
    return {"gauge": gauge.kind, "sigma": bg.sigma, "lambda": gauge.lam if gauge.is_parabolic else None,
            "seed": cfg.seed}


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def timeseries_rows(traj: Trajectory, cfg: RunConfig):
    """Rows of the checkpoint table; the column order is a stable contract."""
    prov = provenance(cfg)
    N = cfg.N
    rows = []
    for s in traj.checkpoints:
        row = {"t": s.t, "gauge": prov["gauge"], "sigma": prov["sigma"], "lambda": prov["lambda"],
               "seed": prov["seed"]}
        row["solution_norm"] = solution_norm(s, N)
        parts = solution_norm_parts(s, N)
        for k in NORM_PARTS:
            row[f"norm_{k}"] = parts.get(k)
        rep = D.energies(s, cfg.sigma_star, 0)
        repN = D.energies(s, cfg.sigma_star, N)
        for name in ("e_metric_sq", "e_scalar_sq", "e_dlapse_sq", "e_lapse_sq", "e_total_sq", "e_almost_total_sq"):
            row[name] = getattr(rep, name)
        for name in ("e_metric_sq", "e_scalar_sq", "e_dlapse_sq", "e_lapse_sq", "e_total_sq", "e_almost_total_sq"):
            row[f"{name}_N"] = getattr(repN, name)
        res = normalized_constraint_residuals(s)
        for k in ("ham", "mom", "mom_up", "sym", "trace", "lapse"):
            row[f"res_{k}"] = res.get(k)
        rows.append(row)
    return rows


def write_csv(path: Path, rows):
    cols = list(rows[0])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in cols])


def _dump(path: Path, obj):
    with open(path, "w") as fh:
        json.dump(acc._jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def identity_records(traj: Trajectory, cfg: RunConfig) -> list:
    prov = provenance(cfg)
    times = [t for t in acc.IDENTITY_TIMES if traj.times[-1] <= t * (1 + 1e-9)]
    times = [t for t in times if np.any(np.abs(traj.times - t) <= 1e-9 * t)]
    out = []
    for t in times:
        if traj.gauge.is_parabolic:
            recs = [D.identity_parabolic(traj, t, w) for w in ("scalar-lapse", "metric")]
        else:
            recs = [D.identity_scalar_lapse(traj, t), D.identity_metric(traj, t)]
        out.extend({**r.to_dict(), **prov} for r in recs)
    return out


def fit_records(traj: Trajectory, cfg: RunConfig) -> dict:
    prov = provenance(cfg)
    out = {"provenance": prov, "decay_fits": [], "bang_limits": None, "growth_bound": None}
    if acc.is_zero_state(traj.checkpoints[0]):
        return out
    series = D.norm_series(traj, cfg.N)
    ts = traj.times
    window = (max(1e-7, ts[-1]), 1e-3)
    for key, vals in series.items():
        try:
            out["decay_fits"].append(D.decay_fit(ts, vals, window, with_log=True, quantity=key).to_dict())
        except InsufficientSpan as exc:
            out["decay_fits"].append({"quantity": key, "error": str(exc)})
    try:
        lim = D.bang_limits(traj)
        out["bang_limits"] = {k: v for k, v in lim.items()}
    except InsufficientDepth as exc:
        out["bang_limits"] = {"error": str(exc)}
    try:
        out["growth_bound"] = D.growth_bound_check(traj, cfg.sigma_star, cfg.N, window=window)
    except InsufficientSpan as exc:
        out["growth_bound"] = {"error": str(exc)}
    return out


def run(cfg: RunConfig, outdir: Path | None = None) -> dict:
    outdir = Path(outdir or cfg.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    wall = time.perf_counter()
    init = cfg.initial_state()
    traj = integrate(init, cfg.options(), cfg.t_end)
    write_csv(outdir / "timeseries.csv", timeseries_rows(traj, cfg))
    kinds = set(cfg.diagnostics)
    if "identities" in kinds:
        _dump(outdir / "identities.json", identity_records(traj, cfg))
    fits = fit_records(traj, cfg) if ({"fits", "bang"} & kinds) else {}
    if "monotonicity" in kinds and len(traj.times) > 2:
        fits["monotonicity"] = D.monotonicity_report(traj, cfg.sigma_star)
    _dump(outdir / "fits.json", fits)
    meta = {"config": cfg.to_dict(), "version": __version__, "wall_time": time.perf_counter() - wall,
            "integrator_stats": traj.stats, "threads": os.environ.get(THREADS_ENV), **provenance(cfg)}
    _dump(outdir / "meta.json", meta)
    return {"trajectory": traj, "fits": fits, "outdir": str(outdir)}


# ---------------------------------------------------------------- verify

def verify(cfg: RunConfig, suite: str = "all") -> list:
    """Run the acceptance criteria that apply to ``cfg``; returns CriterionResult records."""
    if suite not in SUITES:
        raise ConfigError(f"unknown suite {suite!r}")
    init = cfg.initial_state()
    opts = cfg.options()
    if cfg.t_end is not None and cfg.t_end > init.t and init.gauge.is_parabolic:
        raise ForwardParabolic("the parabolic lapse gauge only integrates toward the past")
    session = acc.Session()
    traj = session.run("config", init, opts)
    parabolic = init.gauge.is_parabolic
    results = []
    want = {"constraints": {1, 5}, "identities": {2, 3, 4, 5}, "exponents": {6, 7, 10},
            "all": set(range(1, 11))}[suite]
    if 1 in want and not parabolic:
        results.append(acc.criterion_constraints({"config": traj}))
    if want & {2, 3} and not parabolic:
        pair = acc.refinement_pair(init, min(acc.IDENTITY_TIMES))
        results.append(acc.criterion_identity("scalar", traj, init, refined=pair))
        results.append(acc.criterion_identity("metric", traj, init, refined=pair))
    if 4 in want and parabolic:
        results.append(acc.criterion_parabolic(traj))
    if 6 in want and not parabolic and traj.bg.sigma == 0.0:
        results.append(acc.criterion_exponents(traj, cfg.N))
    if 7 in want and not parabolic:
        results.append(acc.criterion_convergence({"config": traj}, traj.bg))
    if 8 in want:
        results.append(acc.criterion_homogeneous(traj.bg))
    if 9 in want:
        results.append(acc.criterion_background())
    if 10 in want and not parabolic:
        results.append(acc.criterion_growth({"config": traj}, cfg.sigma_star, cfg.N))
    if 5 in want:
        results.append(acc.criterion_sign_audit(session.trajectories))
    results.sort(key=lambda r: r.id)
    return results


# ---------------------------------------------------------------- sweep

def _with_param(cfg: RunConfig, param: str, value) -> RunConfig:
    d = cfg.to_dict()
    if param == "sigma":
        d["background"] = {"sigma": float(value)}
    elif param == "lambda":
        d["gauge"] = {"kind": "parabolic", "lambda": float(value)}
    elif param == "kmax":
        d["k_max"] = int(value)
    elif param == "sigma_star":
        d["sigma_star"] = float(value)
    else:
        raise ConfigError(f"unknown sweep parameter {param!r}")
    return RunConfig.from_dict(d)


def sweep(cfg: RunConfig, param: str, values) -> dict:
    base = Path(cfg.output_dir)
    summary = {"param": param, "runs": []}
    for v in values:
        sub = _with_param(cfg, param, v)
        outdir = base / f"{param}={v}"
        res = run(sub, outdir)
        fits = res["fits"]
        entry = {"value": v, "dir": str(outdir), **provenance(sub)}
        entry["exponents"] = {f["quantity"]: f.get("exponent") for f in fits.get("decay_fits", [])}
        gb = fits.get("growth_bound") or {}
        entry["energy_exponent"] = gb.get("exponent")
        entry["c_fit"] = gb.get("c_fit")
        summary["runs"].append(entry)
    _dump(base / "summary.json", summary)
    return summary


# ---------------------------------------------------------------- click

def _guard(fn):
    try:
        return fn()
    except (ConfigError, ForwardParabolic) as exc:
        click.echo(f"configuration error: {exc}", err=True)
        sys.exit(2)
    except KasnerLinError as exc:
        click.echo(f"numerical failure: {type(exc).__name__}: {exc}", err=True)
        sys.exit(3)
    except FloatingPointError as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        sys.exit(3)


@click.group()
@click.version_option(__version__)
def main():
    """Linearized Kasner perturbations: runs, verification and sweeps."""


@main.command("run")
@click.argument("config", type=click.Path(dir_okay=False))
@click.option("--out", "out", default=None, help="output directory (overrides the config)")
def run_cmd(config, out):
    """Integrate one configuration and write its artifacts."""
    def go():
        cfg = RunConfig.load(config)
        res = run(cfg, out)
        click.echo(f"wrote {res['outdir']}")
    _guard(go)


@main.command("verify")
@click.argument("config", type=click.Path(dir_okay=False))
@click.option("--suite", type=click.Choice(SUITES), default="all")
@click.option("--json-out", default=None, help="write the machine-readable report here")
def verify_cmd(config, suite, json_out):
    """Check the acceptance criteria that apply to a configuration."""
    def go():
        cfg = RunConfig.load(config)
        results = verify(cfg, suite)
        for r in results:
            click.echo(r.line())
        report = {"suite": suite, "passed": all(r.passed for r in results),
                  "criteria": [r.to_dict() for r in results]}
        if json_out:
            _dump(Path(json_out), report)
        else:
            click.echo(json.dumps({str(r.id): r.passed for r in results}))
        return report["passed"]
    ok = _guard(go)
    sys.exit(0 if ok else 1)


@main.command("sweep")
@click.argument("config", type=click.Path(dir_okay=False))
@click.option("--param", type=click.Choice(SWEEP_PARAMS), required=True)
@click.option("--values", required=True, help="comma separated values")
def sweep_cmd(config, param, values):
    """Run one configuration per parameter value plus a summary of fitted exponents."""
    def go():
        cfg = RunConfig.load(config)
        try:
            vals = [float(v) if param != "kmax" else int(v) for v in values.split(",") if v.strip()]
        except ValueError as exc:
            raise ConfigError(f"bad --values: {exc}") from exc
        if any(isinstance(v, float) and not math.isfinite(v) for v in vals):
            raise ConfigError("sweep values must be finite")
        summary = sweep(cfg, param, vals)
        for e in summary["runs"]:
            click.echo(f"{param}={e['value']}: energy exponent {e['energy_exponent']}")
    _guard(go)


if __name__ == "__main__":
    main()
