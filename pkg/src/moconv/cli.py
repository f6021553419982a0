"""Command-line front end: single-point solves, scans, optimization, sweeps.

Every run writes a ``manifest.json`` capturing the command, arguments and
config snapshot alongside the CSV outputs, so runs can be reproduced
exactly.  Plotting lives in ``scripts/``; the CLI only emits CSV.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .config import (
    ConfigError,
    FieldState,
    ModelConfig,
    load_config,
    parse_quantity,
    thermal_occupation_12,
)
from . import atom as atom_mod
from . import dressed, linear, optimizer, quadrature
from .optimizer import VARIABLE_NAMES


def _parse_args(argv):
    parser = argparse.ArgumentParser(
        prog="moconv",
        description="Microwave-to-optical conversion simulator",
    )
    parser.add_argument("--version", action="version", version=f"moconv {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="model config file")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--workers", type=int, default=os.cpu_count() or 1)
        p.add_argument("--convention", choices=("radiated", "standard"), default=None,
                       help="override the output-field convention")

    steady = sub.add_parser("steady", help="print the single-atom steady state")
    common(steady)
    steady.add_argument("--delta-a-mu", default="0", help="atomic microwave detuning")
    steady.add_argument("--delta-a-o", default="0", help="atomic optical detuning")
    steady.add_argument("--beta", default="0", help="intracavity microwave amplitude")
    steady.add_argument("--alpha", default="0", help="intracavity optical amplitude")

    scan = sub.add_parser("scan", help="map efficiency over the atomic detunings")
    common(scan)
    scan.add_argument("--dmu-min", required=True)
    scan.add_argument("--dmu-max", required=True)
    scan.add_argument("--dmu-points", type=int, default=21)
    scan.add_argument("--dao-min", required=True)
    scan.add_argument("--dao-max", required=True)
    scan.add_argument("--dao-points", type=int, default=21)
    scan.add_argument("--refine", type=int, default=0)

    opt = sub.add_parser("optimize", help="maximize the conversion efficiency")
    common(opt)
    opt.add_argument("--maxfev", type=int, default=4000)
    opt.add_argument("--refine", type=int, default=0)

    swp = sub.add_parser("sweep", help="optimize across a swept parameter")
    common(swp)
    swp.add_argument("--variable", choices=optimizer.SWEEPABLE, required=True)
    swp.add_argument("--values", required=True, help="comma-separated values (units allowed)")
    swp.add_argument("--maxfev", type=int, default=4000)
    swp.add_argument("--refine", type=int, default=0)
    swp.add_argument("--no-warm-start", action="store_true")

    val = sub.add_parser("validate", help="run the built-in analytic oracle checks")
    val.add_argument("--config", required=False, default=None)
    val.add_argument("--out", default=".")

    return parser.parse_args(argv)


def _load(args) -> ModelConfig:
    try:
        config = load_config(args.config)
    except FileNotFoundError:
        print(f"error: config file not found: {args.config}", file=sys.stderr)
        raise SystemExit(2)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        raise SystemExit(2)
    if getattr(args, "convention", None):
        from dataclasses import replace

        config = replace(config, convention=args.convention)
    return config


def _write_manifest(out: Path, args, config_text: str, timings: dict[str, float]) -> None:
    manifest = {
        "tool": "moconv",
        "version": __version__,
        "command": args.command,
        "arguments": {k: v for k, v in vars(args).items() if k != "command"},
        "config": config_text,
        "timings_s": timings,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, default=str) + "\n")


def cmd_steady(args) -> int:
    config = _load(args)
    det = atom_mod.AtomDetunings(
        parse_quantity(args.delta_a_mu, "--delta-a-mu"),
        parse_quantity(args.delta_a_o, "--delta-a-o"),
    )
    fields = FieldState(
        beta=complex(parse_quantity(args.beta, "--beta")),
        alpha=complex(parse_quantity(args.alpha, "--alpha")),
    )
    h = atom_mod.build_hamiltonian(fields, config.drive.rabi, det, config.drive, config.atom)
    liouv = atom_mod.build_liouvillian(
        h, atom_mod.build_damping(config.atom, thermal_occupation_12(config))
    )
    try:
        rho = atom_mod.steady_state(liouv)
    except atom_mod.SteadyStateError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    np.set_printoptions(precision=6, suppress=True)
    print("steady-state density matrix:")
    print(rho)
    print(f"populations: {rho[0, 0].real:.6f} {rho[1, 1].real:.6f} {rho[2, 2].real:.6f}")
    print(f"|rho12| = {abs(rho[0, 1]):.6e}")
    print(f"|rho13| = {abs(rho[0, 2]):.6e}")
    return 0


def _scan_row(task):
    config, x_mu, dao_values, refine = task
    result = optimizer.scan_detunings(config, [x_mu], dao_values, refine=refine)
    return result


def cmd_scan(args) -> int:
    config = _load(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dmu = np.linspace(
        parse_quantity(args.dmu_min, "--dmu-min"),
        parse_quantity(args.dmu_max, "--dmu-max"),
        args.dmu_points,
    )
    dao = np.linspace(
        parse_quantity(args.dao_min, "--dao-min"),
        parse_quantity(args.dao_max, "--dao-max"),
        args.dao_points,
    )
    start = time.perf_counter()
    tasks = [(config, float(x), dao, args.refine) for x in dmu]
    if args.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            rows = list(pool.map(_scan_row, tasks))
    else:
        rows = [_scan_row(t) for t in tasks]
    elapsed = time.perf_counter() - start

    path = out / "scan.csv"
    standard = config.convention == "standard"
    with open(path, "w") as fh:
        fh.write("# moconv scan schema v1\n")
        fh.write(
            "delta_a_mu,delta_a_o,efficiency,microwave_transmission,"
            "optical_transmission,dressed_locus_delta_a_mu\n"
        )
        for row in rows:
            x_mu = row.delta_a_mu[0]
            for j, x_o in enumerate(row.delta_a_o):
                locus = _dressed_locus(config, float(x_o))
                fh.write(
                    f"{x_mu:.12e},{x_o:.12e},{row.efficiency[0, j]:.12e},"
                    f"{row.microwave_transmission[0, j]:.12e},"
                    f"{row.optical_transmission[0, j]:.12e},{locus:.12e}\n"
                )
    n_failures = sum(len(r.failures) for r in rows)
    if n_failures:
        print(f"warning: {n_failures} scan points failed", file=sys.stderr)
    _write_manifest(out, args, Path(args.config).read_text(), {"scan": elapsed})
    print(f"wrote {path} ({len(dmu) * len(dao)} points, {elapsed:.1f} s)")
    return 0


def _dressed_locus(config: ModelConfig, delta_a_o: float) -> float:
    """Small-microwave dressed-degeneracy locus for overlay plotting."""
    query = dressed.DegeneracyQuery(
        delta_a_o=delta_a_o,
        fields=FieldState(),
        rabi=config.drive.rabi,
        delta_mu=config.drive.delta_mu,
        delta_o=config.drive.delta_o,
        g_mu=config.atom.g_mu,
        g_o=config.atom.g_o,
    )
    try:
        return dressed.guess_small_microwave(query)
    except dressed.DegenerateGuessError:
        return float("nan")


def cmd_optimize(args) -> int:
    config = _load(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    problem = optimizer.default_problem(config, max_evaluations=args.maxfev, refine=args.refine)
    result = optimizer.optimize(problem)
    elapsed = time.perf_counter() - start
    path = out / "optimize.csv"
    with open(path, "w") as fh:
        fh.write("# moconv optimize schema v1\n")
        fh.write("efficiency," + ",".join(VARIABLE_NAMES) + ",evaluations,converged\n")
        fh.write(
            f"{result.efficiency:.12e},"
            + ",".join(f"{result.variables.get(n, float('nan')):.12e}" for n in VARIABLE_NAMES)
            + f",{result.evaluations},{int(result.converged)}\n"
        )
    _write_manifest(out, args, Path(args.config).read_text(), {"optimize": elapsed})
    print(f"best conversion efficiency: {result.efficiency:.6f} "
          f"({result.evaluations} evaluations, {elapsed:.1f} s)")
    return 0 if result.converged else 3


def cmd_sweep(args) -> int:
    config = _load(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    values = [parse_quantity(v.strip(), "--values") for v in args.values.split(",") if v.strip()]
    start = time.perf_counter()
    rows = optimizer.sweep(
        args.variable,
        values,
        config,
        max_evaluations=args.maxfev,
        refine=args.refine,
        warm_start=not args.no_warm_start,
    )
    elapsed = time.perf_counter() - start
    path = out / "sweep.csv"
    optimizer.write_sweep_csv(path, args.variable, rows)
    _write_manifest(out, args, Path(args.config).read_text(), {"sweep": elapsed})
    best = max((r.efficiency for r in rows if np.isfinite(r.efficiency)), default=float("nan"))
    print(f"wrote {path}; best efficiency {best:.6f} over {len(rows)} points ({elapsed:.1f} s)")
    failed = [r for r in rows if r.error]
    if failed:
        print(f"warning: {len(failed)} sweep points failed", file=sys.stderr)
        return 3
    return 0


def cmd_validate(args) -> int:
    """Built-in analytic-oracle checks; exits nonzero on any failure."""
    from .config import planck_occupation
    from .quadrature import gauss_lobatto
    from .ensemble import STerms
    from .linear import scattering as scattering_fn
    from .config import CavityParams, DriveSettings

    failures = []

    def check(name, ok):
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
        if not ok:
            failures.append(name)

    n12 = planck_occupation(2 * np.pi * 5e9, 0.1)
    check("planck occupation at 5 GHz / 100 mK", abs(n12 - 0.0998) < 1e-4)

    exact = gauss_lobatto(lambda x: x**5, 0.0, 1.0, 4)
    check("Gauss-Lobatto degree-5 exactness (n=4)", abs(exact - 1.0 / 6.0) < 1e-13)

    # thermal two-level steady state
    from .config import AtomParams

    atom = AtomParams(
        d13=1e-32, d23=1e-32, tau3=1.0, tau2=1.0, gamma_2d=0.0, gamma_3d=0.0,
        g_mu=1.0, g_o=1.0, omega_12=2 * np.pi * 5e9, omega_13=2 * np.pi * 195e12,
    )
    liouv = atom_mod.build_liouvillian(np.zeros((3, 3)), atom_mod.build_damping(atom, 0.1))
    rho = atom_mod.steady_state(liouv)
    check("thermal two-level population", abs(rho[1, 1].real - 0.1 / 1.2) < 1e-10)

    # empty-cavity microwave transmission
    cavity = CavityParams(
        gamma_mu_c=2 * np.pi * 1.5e6, gamma_mu_i=2 * np.pi * 0.65e6,
        gamma_o_c=2 * np.pi * 1.7e6, gamma_o_i=2 * np.pi * 7.95e6,
        omega_c_mu=2 * np.pi * 5e9, omega_c_o=2 * np.pi * 195e12,
    )
    coeffs = scattering_fn(STerms(0j, 0j, 0j, 0j), cavity, DriveSettings())
    expected = cavity.gamma_mu_c / (0.5 * (cavity.gamma_mu_c + cavity.gamma_mu_i))
    check("empty-cavity C_bb", abs(coeffs.c_bb - expected) < 1e-12 * expected)
    check("empty-cavity C_ab", coeffs.c_ab == 0)

    if failures:
        print(f"{len(failures)} checks failed", file=sys.stderr)
        return 1
    print("all checks passed")
    return 0


def main(argv=None) -> int:
    args = _parse_args(argv if argv is not None else sys.argv[1:])
    handlers = {
        "steady": cmd_steady,
        "scan": cmd_scan,
        "optimize": cmd_optimize,
        "sweep": cmd_sweep,
        "validate": cmd_validate,
    }
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
