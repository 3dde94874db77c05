"""Command-line entry point: ``bilapeig <command> [--config PATH] [--kmax N] [--out DIR]``.

Exit codes: 0 success, 1 acceptance failure, 2 invalid configuration,
3 numerical failure. Every command writes ``manifest_<command>.json`` next to its
artifacts; wall-clock times appear only there so that all other JSON output
is byte-identical for identical configurations.
"""

from __future__ import annotations

import argparse
import csv
import json
import platform
import sys
import time
from importlib import metadata
from pathlib import Path

import numpy as np

from .config import RunConfig, load_config
from .errors import BilapError, ConfigError

COMMANDS = ("potential", "eigen", "simplicity", "adjoint", "persist", "dichotomy", "verify")
ADJOINT_BOUND_KS = (1, 2, 5, 10, 20, 40)


def _plain(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_plain) + "\n")


class Run:
    """Output directory plus the list of artifacts written so far."""

    def __init__(self, config: RunConfig):
        self.config = config
        self.out = Path(config.output_dir)
        try:
            self.out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise ConfigError(f"output_dir {config.output_dir!r} is not writable: {exc.strerror}") from None
        self.artifacts: list[str] = []
        self.timings: dict = {}

    def path(self, name: str) -> Path:
        self.artifacts.append(name)
        return self.out / name

    def json(self, name: str, obj) -> None:
        write_json(self.path(name), obj)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _potential(config: RunConfig):
    from .model import default_potential

    return default_potential(config.grid())


def _tol(config: RunConfig) -> dict:
    return {"rtol": config.ode_rel_tol, "atol": config.ode_abs_tol}


def _eigen(config: RunConfig):
    from .spectral import find_eigenvalue

    return find_eigenvalue(_potential(config), config.lambda_bracket, **_tol(config))


def cmd_potential(run: Run) -> int:
    pot = _potential(run.config)
    grid = pot.grid
    theta = pot.theta_at(grid.nodes)
    with open(run.path("potential.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["r", "u0", "theta"])
        for r, u, th in zip(grid.nodes, pot.generator_u0.samples, theta):
            writer.writerow([f"{r:.17g}", f"{u:.17g}", f"{th:.17g}"])
    run.json("potential.json", {
        "flat_radius": pot.flat_radius, "flat_value": pot.flat_value,
        "support_radius": pot.support_radius, "theta_max_abs": float(np.max(np.abs(theta))),
        "grid": {"h": grid.h, "r1": grid.r1, "r2": grid.r2, "r3": grid.r3, "r_max": grid.r_max,
                 "nodes": int(grid.nodes.size)}})
    return 0


def cmd_eigen(run: Run) -> int:
    spec = _eigen(run.config)
    run.json("eigen.json", spec.to_json())
    spec.to_csv(run.path("eigenfunction.csv"))
    return 0


def cmd_simplicity(run: Run) -> int:
    from .spectral import restore_simplicity

    cfg = run.config
    pot, spec, scan = restore_simplicity(_potential(cfg), cfg.kmax, bracket=cfg.lambda_bracket,
                                         n_jobs=cfg.n_jobs, **_tol(cfg))
    run.json("simplicity.json", {**scan.to_json(), "lambda0": spec.lambda0})
    run.json("eigen.json", spec.to_json())
    spec.to_csv(run.path("eigenfunction.csv"))
    return 0


def cmd_adjoint(run: Run) -> int:
    from .dichotomy import adjoint_bound_check
    from .persistence import adjoint_w

    cfg = run.config
    spec = _eigen(cfg)
    grid = spec.grid
    adjoints = {k: adjoint_w(k, spec) for k in range(1, cfg.kmax + 1)}
    with open(run.path("adjoint.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k", "r", "w1", "w2", "w3", "w4"])
        for k, w in adjoints.items():
            cov = w.covectors("log")[: grid.i1 + 1]
            for r, c in zip(grid.core, cov):
                writer.writerow([k, f"{r:.17g}"] + [f"{x:.17g}" for x in c])
    ks = [k for k in ADJOINT_BOUND_KS if k <= cfg.kmax]
    report = adjoint_bound_check(ks, spec, adjoints)
    run.json("adjoint.json", {"lambda0": spec.lambda0, "bounds": report.to_json()})
    return 0


def cmd_persist(run: Run) -> int:
    from .estimators import PersistenceTransformer
    from .persistence import bruteforce_radial_check
    from .acceptance import RADIAL_BUMP

    cfg = run.config
    spec = _eigen(cfg)
    model = PersistenceTransformer(cfg.kmax, cfg.n_jobs, seed=cfg.seed).fit(spec)
    table = bruteforce_radial_check(spec, RADIAL_BUMP)
    run.json("persist.json", {**model.report_.to_json(), "bruteforce": table.to_json()})
    model.report_.eta_to_csv(run.path("eta.csv"))
    table.to_csv(run.path("bruteforce.csv"))
    return 0


def cmd_dichotomy(run: Run) -> int:
    from .dichotomy import (DEFAULT_K_LIST, adjoint_bound_check, fit_core_rate, fit_far_rates,
                            samples_to_csv, verify_bessel_inequalities)

    cfg = run.config
    eps = cfg.eps_dichotomy
    spec = _eigen(cfg)
    pot, lam0 = spec.potential, spec.lambda0
    core = [fit_core_rate(k, pot, lam0) for k in (1, 2, 5, 10, 20)]
    far, far_fits = {}, []
    for lam in (0.5 * lam0, lam0, 2.0 * lam0):
        fits = fit_far_rates((0,) + DEFAULT_K_LIST, lam, eps, pot.grid.r1)
        far[repr(lam)] = {str(k): {"stable": f["stable"].to_json(),
                                   "stable_at_bound": f["stable_at_bound"].to_json(),
                                   "centre_unstable": f["centre_unstable"].to_json(),
                                   "stable_bound_rate": f["stable_bound_rate"]}
                          for k, f in fits.items()}
        if lam == lam0:
            far_fits = [f[key] for f in fits.values() for key in ("stable", "centre_unstable")]
    sweep = verify_bessel_inequalities(eps, DEFAULT_K_LIST, pot.grid.r1)
    bounds = adjoint_bound_check([k for k in ADJOINT_BOUND_KS if k <= cfg.kmax], spec)
    run.json("dichotomy.json", {"lambda0": lam0, "eps": eps,
                                "core": [f.to_json() for f in core], "far": far,
                                "bessel": sweep.to_json(), "adjoint_bounds": bounds.to_json()})
    sweep.to_csv(run.path("bessel.csv"))
    samples_to_csv(core + far_fits, run.path("dichotomy_samples.csv"))
    return 0


def cmd_verify(run: Run) -> int:
    from .acceptance import Context, run_all

    results = run_all(Context(run.config), echo=print)
    run.timings = {str(r.number): {"seconds": r.seconds, "budget": r.budget} for r in results}
    failed = [r.number for r in results if not r.ok]
    run.json("acceptance.json", {
        "passed": not failed, "failed": failed,
        "criteria": [{k: v for k, v in r.to_json().items() if k not in ("seconds", "within_budget")}
                     for r in results]})
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed")
    return 1 if failed else 0


HANDLERS = {"potential": cmd_potential, "eigen": cmd_eigen, "simplicity": cmd_simplicity,
            "adjoint": cmd_adjoint, "persist": cmd_persist, "dichotomy": cmd_dichotomy,
            "verify": cmd_verify}


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def _versions() -> dict:
    out = {"python": platform.python_version()}
    for pkg in ("artifact", "numpy", "scipy", "scikit-learn", "joblib"):
        try:
            out[pkg] = metadata.version(pkg)
        except metadata.PackageNotFoundError:
            out[pkg] = None
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bilapeig", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="INI file with every key (see `bilapeig defaults`)")
        p.add_argument("--kmax", type=int, help="override [simplicity] kmax")
        p.add_argument("--out", help="override [run] output_dir")
    d = sub.add_parser("defaults", help="print the default configuration")
    d.add_argument("--out", help="write to this file instead of stdout")
    return parser


def resolve_config(args) -> RunConfig:
    config = load_config(args.config) if args.config else RunConfig()
    changes = {}
    if args.kmax is not None:
        changes["kmax"] = args.kmax
    if args.out is not None:
        changes["output_dir"] = args.out
    return config.replace(**changes) if changes else config


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "defaults":
        text = RunConfig().to_ini()
        if args.out:
            Path(args.out).write_text(text)
        else:
            sys.stdout.write(text)
        return 0
    try:
        config = resolve_config(args)
        run = Run(config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    start = time.perf_counter()
    try:
        status = HANDLERS[args.command](run)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (BilapError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"{args.command} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        status = 3
    write_json(run.out / f"manifest_{args.command}.json", {
        "command": args.command, "exit_status": status, "config": config.to_dict(),
        "versions": _versions(), "wall_time_seconds": time.perf_counter() - start,
        "artifacts": run.artifacts, "timings": run.timings})
    return status


if __name__ == "__main__":
    sys.exit(main())
