"""Command-line front end.

Subcommands: sample-zeros, evolve, estimate, ou-lemma, jensen-check, verify,
report.  Runs are configured by a JSON file (--config) with flag overrides
(--seed, --threads, --out); every output embeds the parameters and seed that
produced it, so a saved report replays exactly.  Exit codes: 0 success,
1 check failure, 2 usage/configuration error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import GaflabError
from .estimators import (
    EventSpec,
    estimate_event,
    estimate_event_sweep,
    fit_rate,
    ou_lemma_probe_detailed,
    LEMMA_KINDS,
)
from .gaf import evolve_on_grid, sample_snapshot, truncation_degree
from .streams import RngStream
from .toymodels import MODELS, LatticeSpec, simulate_toy
from .verify import SUITES, DEFAULT_SEED, jensen_suite
from . import serialize as ser
from .zeros import find_zeros

USAGE_ERROR = 2
CHECK_FAILURE = 1


class UsageError(Exception):
    pass


def _load_config(args) -> dict:
    cfg: dict = {}
    if args.config:
        try:
            cfg = json.loads(Path(args.config).read_text())
        except FileNotFoundError:
            raise UsageError(f"config file not found: {args.config}")
        except json.JSONDecodeError as exc:
            raise UsageError(f"config file is not valid JSON: {exc}")
    if not isinstance(cfg, dict):
        raise UsageError("config must be a JSON object")
    # a saved estimate report is itself a valid config: replay its spec+seed
    if "spec" in cfg and "seed_root" in cfg:
        replay = dict(cfg["spec"])
        replay["seed"] = cfg["seed_root"]
        replay["n"] = cfg["n_samples"]
        cfg = replay
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.threads is not None:
        cfg["threads"] = args.threads
    if args.out is not None:
        cfg["out"] = args.out
    cfg.setdefault("seed", DEFAULT_SEED)
    cfg.setdefault("threads", _default_threads())
    cfg.setdefault("out", ".")
    return cfg


def _default_threads() -> int:
    env = os.environ.get("GAFLAB_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise UsageError(f"GAFLAB_THREADS must be an integer, got {env!r}")
    return 1


def _field(cfg: dict, name: str, kind, *, required: bool = True, default=None):
    if cfg.get(name) is None:  # absent and JSON null both mean "not set"
        if required:
            raise UsageError(f"missing config field: {name}")
        return default
    try:
        return kind(cfg[name])
    except (TypeError, ValueError):
        raise UsageError(f"config field {name!r} has invalid value {cfg[name]!r}")


def _positive(cfg: dict, name: str, kind=float, *, required: bool = True, default=None):
    val = _field(cfg, name, kind, required=required, default=default)
    if val is not None and val <= 0:
        raise UsageError(f"config field {name!r} must be positive, got {val!r}")
    return val


def _outdir(cfg: dict) -> Path:
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write(path: Path, text: str) -> None:
    path.write_text(text)
    print(f"wrote {path}")


# ---------------------------------------------------------------------------
# subcommands


def cmd_sample_zeros(cfg: dict) -> int:
    radius = _positive(cfg, "R")
    n = _field(cfg, "n", int, required=False, default=1)
    if n < 0:
        raise UsageError(f"config field 'n' must be >= 0, got {n}")
    t = _field(cfg, "t", float, required=False, default=0.0)
    eps = _positive(cfg, "eps_tail", float, required=False, default=1e-8)
    with_poisson = bool(cfg.get("poisson_panel", False))
    seed = _field(cfg, "seed", int)
    out = _outdir(cfg)

    stream = RngStream(seed)
    m = truncation_degree(radius, eps)
    meta = {"command": "sample-zeros", "R": radius, "n": n, "t": t, "eps_tail": eps, "seed": seed,
            "poisson_panel": with_poisson, "software_version": __version__}
    entries = []
    for k in range(n):
        snap = sample_snapshot(m, stream.child(0, k), time=t, valid_radius=radius)
        entries.append((k, t, find_zeros(snap, radius)))
    _write(out / "zeros.csv", ser.zeros_csv(entries, meta))

    panels = [("zero set", list(entries[0][2].zeros) if entries else [])]
    if with_poisson:
        gen = stream.child(1).generator()
        count = int(gen.poisson(radius * radius))
        rr = radius * np.sqrt(gen.uniform(size=count))
        pts = rr * np.exp(1j * gen.uniform(0.0, math.tau, size=count))
        panels.append(("poisson, same intensity", [complex(z) for z in pts]))
    _write(out / "zeros.svg", ser.svg_scatter(panels, radius, meta))
    return 0


def cmd_evolve(cfg: dict) -> int:
    model = _field(cfg, "model", str, required=False, default="gaf")
    horizon = _positive(cfg, "T")
    step = _positive(cfg, "delta")
    seed = _field(cfg, "seed", int)
    out = _outdir(cfg)
    stream = RngStream(seed)

    if model == "gaf":
        radius = _positive(cfg, "R")
        eps = _positive(cfg, "eps_tail", float, required=False, default=1e-8)
        m = truncation_degree(radius, eps)
        snap = sample_snapshot(m, stream.child(0), valid_radius=radius)
        ev = evolve_on_grid(snap, horizon, step, stream.child(1))
        meta = {"command": "evolve", "model": model, "R": radius, "T": horizon, "delta": step,
                "eps_tail": eps, "seed": seed, "software_version": __version__}
        _write(out / "evolution.json", ser.dumps(ser.evolution_to_dict(ev, meta)))
        return 0

    if model not in MODELS:
        raise UsageError(f"model must be 'gaf' or one of {MODELS}, got {model!r}")
    window = _positive(cfg, "window_radius", float, required=False, default=_positive(cfg, "R", float, required=False, default=2.0))
    c = _field(cfg, "c", float, required=False, default=1.0)
    if c < 0:
        raise UsageError(f"config field 'c' must be nonnegative, got {c}")
    spec = LatticeSpec(model=model, window_radius=window, horizon=horizon, grid_step=step, perturb_scale=c)
    cfgs = simulate_toy(spec, stream.child(0))
    meta = {"command": "evolve", "model": model, "window_radius": window, "T": horizon, "delta": step,
            "c": c, "margin": spec.margin, "seed": seed, "software_version": __version__}
    _write(out / "points.csv", ser.points_csv([(0, cfgs)], model, meta))
    return 0


def _event_spec_from_cfg(cfg: dict, horizon: float) -> EventSpec:
    try:
        return EventSpec(
            kind=_field(cfg, "kind", str),
            model=_field(cfg, "model", str),
            radius=_field(cfg, "R", float),
            horizon=horizon,
            grid_step=_field(cfg, "delta", float),
            min_count=_field(cfg, "N", int, required=False),
        )
    except ValueError as exc:
        raise UsageError(str(exc))


def cmd_estimate(cfg: dict) -> int:
    n = _positive(cfg, "n", int)
    seed = _field(cfg, "seed", int)
    threads = _field(cfg, "threads", int)
    eps = _positive(cfg, "eps_tail", float, required=False, default=1e-8)
    out = _outdir(cfg)
    horizons = cfg.get("T")
    stream = RngStream(seed)

    if isinstance(horizons, list):
        hs = [float(h) for h in horizons]
        spec = _event_spec_from_cfg(cfg, max(hs))
        reports = estimate_event_sweep(spec, hs, n, stream, tail_eps=eps, threads=threads)
        points = [
            {"T": r.spec.horizon, "n_samples": r.n_samples, "successes": r.successes,
             "p_hat": r.p_hat, "ci_low": r.ci_low, "ci_high": r.ci_high}
            for r in reports
        ]
        meta = {"command": "estimate", "spec": ser.spec_to_dict(spec), "T_sweep": hs, "n": n,
                "seed": seed, "eps_tail": eps, "software_version": __version__}
        _write(out / "reports.json", ser.dumps({"reports": [ser.report_to_dict(r) for r in reports], "meta": meta}))
        _write(out / "estimates.csv", ser.estimates_csv(points, meta))
        usable = [r for r in reports if r.successes > 0]
        if len(usable) >= 3:
            fit = fit_rate(usable)
            _write(out / "ratefit.json", ser.dumps(ser.ratefit_to_dict(fit, context=meta)))
        return 0

    spec = _event_spec_from_cfg(cfg, float(_field(cfg, "T", float)))
    report = estimate_event(spec, n, stream, tail_eps=eps, threads=threads)
    _write(out / "report.json", ser.dumps(ser.report_to_dict(report)))
    return 0


def cmd_ou_lemma(cfg: dict) -> int:
    lemma = _field(cfg, "lemma", str)
    if lemma not in LEMMA_KINDS:
        raise UsageError(f"lemma must be one of {LEMMA_KINDS}, got {lemma!r}")
    radius = _positive(cfg, "R")
    step = _positive(cfg, "delta")
    n = _positive(cfg, "n", int)
    t_grid = cfg.get("T_grid")
    if not isinstance(t_grid, list) or len(t_grid) < 3:
        raise UsageError("config field 'T_grid' must be a list of at least 3 horizons")
    rho = _field(cfg, "rho", float, required=False)
    seed = _field(cfg, "seed", int)
    threads = _field(cfg, "threads", int)
    out = _outdir(cfg)

    fit, points = ou_lemma_probe_detailed(
        lemma, radius, [float(t) for t in t_grid], step, n, RngStream(seed), rho=rho, threads=threads
    )
    meta = {"command": "ou-lemma", "lemma": lemma, "R": radius, "rho": rho, "T_grid": t_grid,
            "delta": step, "n": n, "seed": seed, "software_version": __version__}
    _write(out / "ratefit.json", ser.dumps(ser.ratefit_to_dict(fit, context=meta)))
    _write(out / "survival.csv", ser.estimates_csv(points, meta))
    return 0


def cmd_jensen_check(cfg: dict) -> int:
    n = _positive(cfg, "n", int, required=False, default=100)
    radius = _positive(cfg, "r", float, required=False, default=2.0)
    seed = _field(cfg, "seed", int)
    out = _outdir(cfg)
    result = jensen_suite(n=n, radius=radius, seed=seed)
    _write(out / "jensen.json", ser.dumps(result))
    print(f"jensen: max residual {result['checks'][0]['max_residual']:.3e} over n={n} (tol 1e-06)")
    return 0 if result["passed"] else CHECK_FAILURE


def cmd_verify(cfg: dict, suites: list[str]) -> int:
    if not suites:
        raise UsageError(f"verify needs --suite; known suites: {sorted(SUITES)}")
    for s in suites:
        if s not in SUITES:
            raise UsageError(f"unknown suite {s!r}; known suites: {sorted(SUITES)}")
    out = _outdir(cfg)
    seed = _field(cfg, "seed", int)
    threads = _field(cfg, "threads", int)
    results = []
    for s in suites:
        kwargs = {"seed": seed}
        if s == "conditions":
            if "n" in cfg:
                kwargs["n"] = _positive(cfg, "n", int)
            if "R" in cfg:
                kwargs["hole_radii"] = (float(cfg["R"]),)
        elif s == "jensen":
            if "n" in cfg:
                kwargs["n"] = _positive(cfg, "n", int)
            if "r" in cfg:
                kwargs["radius"] = _positive(cfg, "r", float)
        elif s == "intensity" and "n" in cfg:
            kwargs["n"] = _positive(cfg, "n", int)
        elif s == "ou-lemmas":
            kwargs["threads"] = threads
        elif s == "scaling" and "n" in cfg:
            kwargs["n"] = _positive(cfg, "n", int)
        result = SUITES[s](**kwargs)
        results.append(result)
        for check in result["checks"]:
            status = "PASS" if check["passed"] else "FAIL"
            print(f"[{status}] {result['suite']}/{check['name']}")
    log = {"results": results, "seed": seed, "software_version": __version__}
    _write(out / "verify.json", ser.dumps(log))
    failed = [c["name"] for r in results for c in r["checks"] if not c["passed"]]
    if failed:
        print("failed checks: " + ", ".join(failed))
        return CHECK_FAILURE
    return 0


def cmd_report(path: str) -> int:
    try:
        data = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise UsageError(f"report file not found: {path}")
    except json.JSONDecodeError as exc:
        raise UsageError(f"report file is not valid JSON: {exc}")
    if "p_hat" in data:
        spec = data["spec"]
        print(f"event: {spec['kind']} / {spec['model']}  R={spec['R']} N={spec['N']} T={spec['T']} delta={spec['delta']}")
        print(f"n={data['n_samples']}  successes={data['successes']}  p_hat={data['p_hat']:.6g}")
        print(f"95% CI [{data['ci'][0]:.6g}, {data['ci'][1]:.6g}]  log_p_hat={data['log_p_hat']:.6g}"
              + ("  (one-sided)" if data.get("one_sided") else ""))
        print(f"seed_root={data['seed_root']}")
    elif "slope" in data:
        print(f"rate fit over T={data['T_values']}")
        print(f"slope={data['slope']:.6g} per unit time  intercept={data['intercept']:.6g}  r^2={data['r_squared']:.6g}")
    elif "results" in data:
        for r in data["results"]:
            for c in r["checks"]:
                print(f"[{'PASS' if c['passed'] else 'FAIL'}] {r['suite']}/{c['name']}")
    else:
        raise UsageError(f"unrecognized report format in {path}")
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gaflab", description=__doc__)
    p.add_argument("--version", action="version", version=f"gaflab {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON config file")
        sp.add_argument("--seed", type=int, help="root seed (overrides config)")
        sp.add_argument("--threads", type=int, help="worker cap (overrides config / GAFLAB_THREADS)")
        sp.add_argument("--out", help="output directory")

    common(sub.add_parser("sample-zeros", help="extract zeros of sampled snapshots; CSV + SVG"))
    common(sub.add_parser("evolve", help="simulate one evolving snapshot or toy configuration"))
    common(sub.add_parser("estimate", help="Monte Carlo event-probability campaign"))
    common(sub.add_parser("ou-lemma", help="survival-rate probe for the deviation lemmas"))
    common(sub.add_parser("jensen-check", help="Jensen identity residuals on random snapshots"))
    v = sub.add_parser("verify", help="run named verification suites")
    common(v)
    v.add_argument("--suite", action="append", default=[], help="suite name (repeatable)")
    r = sub.add_parser("report", help="pretty-print a saved JSON artifact")
    r.add_argument("path")
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return USAGE_ERROR if exc.code not in (0, None) else 0
    try:
        if args.command == "report":
            return cmd_report(args.path)
        cfg = _load_config(args)
        if args.command == "sample-zeros":
            return cmd_sample_zeros(cfg)
        if args.command == "evolve":
            return cmd_evolve(cfg)
        if args.command == "estimate":
            return cmd_estimate(cfg)
        if args.command == "ou-lemma":
            return cmd_ou_lemma(cfg)
        if args.command == "jensen-check":
            return cmd_jensen_check(cfg)
        if args.command == "verify":
            return cmd_verify(cfg, args.suite)
        raise UsageError(f"unknown command {args.command!r}")
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except GaflabError as exc:
        print(f"check failure: {exc}", file=sys.stderr)
        return CHECK_FAILURE


if __name__ == "__main__":
    sys.exit(main())
