"""Maximization of the linear-model conversion efficiency.

The efficiency surface is scanned over the atomic detunings with the
cavity detunings slaved to the dispersive cavity-pulling estimate; the
best scan point seeds a bounded Nelder-Mead search over the detunings and
the two cavity coupling rates.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import optimize as sp_optimize

from .config import (
    AtomParams,
    EnsembleSpec,
    ModelConfig,
    effective_microwave_atom_number,
    with_centers,
    with_couplings,
    with_drive_detunings,
)
from .ensemble import QuadratureError
from .linear import (
    AmplificationError,
    DynamicalInstabilityError,
    ResonanceSingularityError,
    compute_sterms,
    conversion_efficiency,
    is_dynamically_stable,
    scattering,
)

#: order of the free variables throughout this module
VARIABLE_NAMES = (
    "delta_a_mu",
    "delta_a_o",
    "delta_mu",
    "delta_o",
    "gamma_mu_c",
    "gamma_o_c",
)


class PullingGuessError(ZeroDivisionError):
    """Cavity pulling is undefined on atomic resonance."""


def pulling_guess(
    delta_a_mu: float,
    delta_a_o: float,
    spec: EnsembleSpec,
    atom: AtomParams,
) -> tuple[float, float]:
    """Dispersive cavity-pulling shifts (delta_c_mu, delta_c_o) for the given
    atomic detunings, treating the ensemble as identical two-level atoms."""
    if delta_a_mu == 0 or delta_a_o == 0:
        raise PullingGuessError("pulling guess undefined at zero atomic detuning")
    n_mu = effective_microwave_atom_number(spec, atom.omega_12)
    delta_c_mu = n_mu * atom.g_mu**2 / delta_a_mu
    delta_c_o = spec.n_o * atom.g_o**2 / delta_a_o
    return delta_c_mu, delta_c_o


def _self_consistent_pull(delta_a: float, n_g_sq: float) -> float:
    """Drive detuning delta solving delta = -N g^2 / (delta_a - delta).

    The dispersive shift depends on the atom-drive detuning, which itself
    moves with the drive; the naive -N g^2/delta_a guess can miss the pulled
    resonance by many linewidths when the shift is comparable to delta_a.
    Picks the branch that reduces to the naive guess for large detunings.
    """
    root = math.sqrt(delta_a * delta_a + 4.0 * n_g_sq)
    return 0.5 * (delta_a - math.copysign(root, delta_a))


def _slaved_config(config: ModelConfig, delta_a_mu: float, delta_a_o: float) -> ModelConfig:
    """Config with the given atomic centers and the drives on the pulled resonances.

    The dispersively shifted cavity-like mode sits at -N g^2/(delta_a - delta)
    relative to the bare cavity; the drive detunings are set to the
    self-consistent solution of that condition.
    """
    cfg = with_centers(config, delta_a_mu, delta_a_o)
    if delta_a_mu == 0 or delta_a_o == 0:
        raise PullingGuessError("pulling guess undefined at zero atomic detuning")
    n_mu = effective_microwave_atom_number(config.ensemble, config.atom.omega_12)
    pull_mu = _self_consistent_pull(delta_a_mu, n_mu * config.atom.g_mu**2)
    pull_o = _self_consistent_pull(delta_a_o, config.ensemble.n_o * config.atom.g_o**2)
    return with_drive_detunings(cfg, pull_mu, pull_o)


@dataclass(frozen=True)
class ScanResult:
    delta_a_mu: np.ndarray
    delta_a_o: np.ndarray
    efficiency: np.ndarray  # shape (len(delta_a_mu), len(delta_a_o))
    microwave_transmission: np.ndarray
    optical_transmission: np.ndarray
    failures: list[tuple[int, int, str]] = field(default_factory=list)

    @property
    def best(self) -> tuple[float, float, float]:
        """(efficiency, delta_a_mu, delta_a_o) of the best scanned point."""
        if self.efficiency.size == 0:
            raise ValueError("empty scan")
        flat = np.nanargmax(self.efficiency)
        i, j = np.unravel_index(flat, self.efficiency.shape)
        return float(self.efficiency[i, j]), float(self.delta_a_mu[i]), float(self.delta_a_o[j])


def scan_detunings(
    config: ModelConfig,
    delta_a_mu_values,
    delta_a_o_values,
    refine: int = 0,
) -> ScanResult:
    """Efficiency and cavity-transmission maps over the atomic detunings.

    Per-point failures are recorded and the scan continues.
    """
    dmu = np.atleast_1d(np.asarray(delta_a_mu_values, dtype=float))
    dao = np.atleast_1d(np.asarray(delta_a_o_values, dtype=float))
    eff = np.full((len(dmu), len(dao)), np.nan)
    t_mu = np.full_like(eff, np.nan)
    t_o = np.full_like(eff, np.nan)
    failures: list[tuple[int, int, str]] = []
    for i, x_mu in enumerate(dmu):
        for j, x_o in enumerate(dao):
            try:
                cfg = _slaved_config(config, x_mu, x_o)
                sterms = compute_sterms(cfg, refine=refine, check_convergence=False)
                if not is_dynamically_stable(sterms, cfg.cavity, cfg.drive):
                    raise DynamicalInstabilityError(
                        "linearized field dynamics are unstable at this scan point"
                    )
                coeffs = scattering(sterms, cfg.cavity, cfg.drive)
            except (
                ResonanceSingularityError,
                DynamicalInstabilityError,
                PullingGuessError,
                np.linalg.LinAlgError,
            ) as exc:
                failures.append((i, j, str(exc)))
                continue
            eff[i, j] = coeffs.conversion_efficiency
            t_mu[i, j] = abs(coeffs.c_bb) ** 2
            t_o[i, j] = abs(coeffs.c_aa) ** 2
    return ScanResult(dmu, dao, eff, t_mu, t_o, failures)


@dataclass(frozen=True)
class OptimizationProblem:
    """Free variables (ordered as VARIABLE_NAMES), box bounds and fixed context."""

    config: ModelConfig
    bounds: dict[str, tuple[float, float]]
    initial: dict[str, float]
    max_evaluations: int = 4000
    refine: int = 0

    def __post_init__(self):
        for name in self.bounds:
            if name not in VARIABLE_NAMES:
                raise ValueError(f"unknown variable {name!r}")
        for name, (lo, hi) in self.bounds.items():
            if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
                raise ValueError(f"invalid bounds for {name!r}")
            if name.startswith("gamma") and lo < 0:
                raise ValueError(f"coupling-rate bounds must be nonnegative ({name!r})")


@dataclass(frozen=True)
class OptimizationResult:
    efficiency: float
    variables: dict[str, float]
    evaluations: int
    converged: bool


def apply_variables(config: ModelConfig, variables: dict[str, float]) -> ModelConfig:
    """Build the config for a point in optimization space."""
    cfg = config
    if "delta_a_mu" in variables or "delta_a_o" in variables:
        cfg = with_centers(
            cfg,
            variables.get("delta_a_mu", cfg.center_delta_a_mu),
            variables.get("delta_a_o", cfg.center_delta_a_o),
        )
    if "gamma_mu_c" in variables or "gamma_o_c" in variables:
        cfg = with_couplings(
            cfg,
            variables.get("gamma_mu_c", cfg.cavity.gamma_mu_c),
            variables.get("gamma_o_c", cfg.cavity.gamma_o_c),
        )
    if "delta_mu" in variables or "delta_o" in variables:
        cfg = with_drive_detunings(
            cfg,
            variables.get("delta_mu", cfg.drive.delta_mu),
            variables.get("delta_o", cfg.drive.delta_o),
        )
    return cfg


def objective(problem: OptimizationProblem, variables: dict[str, float]) -> float:
    """Conversion efficiency at a point in optimization space (0 on failure)."""
    cfg = apply_variables(problem.config, variables)
    try:
        return conversion_efficiency(cfg, refine=problem.refine, check_convergence=False)
    except (
        ResonanceSingularityError,
        DynamicalInstabilityError,
        AmplificationError,
        np.linalg.LinAlgError,
    ):
        return 0.0


def default_problem(config: ModelConfig, max_evaluations: int = 4000, refine: int = 0) -> OptimizationProblem:
    """Standard six-variable problem with decade bounds around the intrinsic losses."""
    sigma_mu = config.ensemble.sigma_mu
    sigma_o = config.ensemble.sigma_o
    bounds = {
        "delta_a_mu": (0.05 * sigma_mu, 50.0 * sigma_mu),
        "delta_a_o": (0.05 * sigma_o, 50.0 * sigma_o),
        "delta_mu": (-20.0 * sigma_mu, 20.0 * sigma_mu),
        "delta_o": (-20.0 * sigma_o, 20.0 * sigma_o),
        "gamma_mu_c": (config.cavity.gamma_mu_i / 10.0, 100.0 * config.cavity.gamma_mu_i),
        "gamma_o_c": (config.cavity.gamma_o_i / 10.0, 100.0 * config.cavity.gamma_o_i),
    }
    initial = {
        "delta_a_mu": 3.0 * sigma_mu,
        "delta_a_o": 3.0 * sigma_o,
        "delta_mu": 0.0,
        "delta_o": 0.0,
        "gamma_mu_c": config.cavity.gamma_mu_c,
        "gamma_o_c": config.cavity.gamma_o_c,
    }
    return OptimizationProblem(config, bounds, initial, max_evaluations, refine)


def seed_from_scan(problem: OptimizationProblem, points: int = 7) -> dict[str, float]:
    """Coarse detuning scan (cavities slaved to the pulling guess) for a seed."""
    lo_mu, hi_mu = problem.bounds["delta_a_mu"]
    lo_o, hi_o = problem.bounds["delta_a_o"]
    dmu = np.geomspace(max(lo_mu, 1e-6 * hi_mu), hi_mu, points)
    dao = np.geomspace(max(lo_o, 1e-6 * hi_o), hi_o, points)
    result = scan_detunings(problem.config, dmu, dao, refine=problem.refine)
    if np.all(np.isnan(result.efficiency)):
        return dict(problem.initial)
    _, best_mu, best_o = result.best
    cfg = _slaved_config(problem.config, best_mu, best_o)
    seed = dict(problem.initial)
    seed.update(
        delta_a_mu=best_mu,
        delta_a_o=best_o,
        delta_mu=cfg.drive.delta_mu,
        delta_o=cfg.drive.delta_o,
    )
    return _clip_to_bounds(seed, problem.bounds)


def _clip_to_bounds(seed: dict[str, float], bounds: dict[str, tuple[float, float]]) -> dict[str, float]:
    out = dict(seed)
    for name, (lo, hi) in bounds.items():
        if name in out:
            span = hi - lo
            out[name] = min(max(out[name], lo + 1e-9 * span), hi - 1e-9 * span)
    return out


def optimize(problem: OptimizationProblem, seed: dict[str, float] | None = None) -> OptimizationResult:
    """Bounded Nelder-Mead maximization of the conversion efficiency.

    Restarts once with a shrunk simplex if the first search converges onto
    a bound.  The reported efficiency is re-evaluated at the returned point.
    """
    if seed is None:
        seed = seed_from_scan(problem)
    seed = _clip_to_bounds(seed, problem.bounds)
    names = [n for n in VARIABLE_NAMES if n in problem.bounds]
    scales = np.array([max(abs(seed[n]), 0.05 * (problem.bounds[n][1] - problem.bounds[n][0])) for n in names])
    evaluations = 0

    def negative_efficiency(x: np.ndarray) -> float:
        nonlocal evaluations
        evaluations += 1
        variables = {n: float(v * s) for n, v, s in zip(names, x, scales)}
        return -objective(problem, variables)

    bounds = sp_optimize.Bounds(
        np.array([problem.bounds[n][0] for n in names]) / scales,
        np.array([problem.bounds[n][1] for n in names]) / scales,
    )
    x0 = np.array([seed[n] for n in names]) / scales
    budget = problem.max_evaluations

    result = sp_optimize.minimize(
        negative_efficiency,
        x0,
        method="Nelder-Mead",
        bounds=bounds,
        options={"maxfev": budget, "xatol": 1e-4, "fatol": 1e-8},
    )
    best_x, best_f = result.x, result.fun
    on_bound = np.any(np.isclose(best_x, bounds.lb) | np.isclose(best_x, bounds.ub))
    if on_bound and evaluations < budget:
        restart = sp_optimize.minimize(
            negative_efficiency,
            best_x,
            method="Nelder-Mead",
            bounds=bounds,
            options={
                "maxfev": budget - evaluations,
                "xatol": 1e-5,
                "fatol": 1e-9,
                "initial_simplex": _shrunk_simplex(best_x, bounds),
            },
        )
        if restart.fun < best_f:
            best_x, best_f = restart.x, restart.fun
    variables = {n: float(v * s) for n, v, s in zip(names, best_x, scales)}
    # report a convergence-checked value at the returned point; the search
    # itself runs on the cheaper unchecked grid
    try:
        efficiency = conversion_efficiency(
            apply_variables(problem.config, variables),
            refine=problem.refine,
            check_convergence=True,
        )
    except (
        ResonanceSingularityError,
        DynamicalInstabilityError,
        AmplificationError,
        QuadratureError,
        np.linalg.LinAlgError,
    ):
        efficiency = objective(problem, variables)
    return OptimizationResult(
        efficiency=efficiency,
        variables=variables,
        evaluations=evaluations,
        converged=bool(result.success) and evaluations <= budget,
    )


def _shrunk_simplex(x0: np.ndarray, bounds: sp_optimize.Bounds, step: float = 0.02) -> np.ndarray:
    simplex = [x0]
    for i in range(len(x0)):
        vertex = x0.copy()
        span = bounds.ub[i] - bounds.lb[i]
        vertex[i] = min(vertex[i] + step * span, bounds.ub[i])
        if vertex[i] == x0[i]:
            vertex[i] = max(x0[i] - step * span, bounds.lb[i])
        simplex.append(vertex)
    return np.array(simplex)


# ---------------------------------------------------------------------------
# Parameter sweeps
# ---------------------------------------------------------------------------

SWEEPABLE = ("temperature", "pump_power", "optical_q")


@dataclass(frozen=True)
class SweepRow:
    value: float
    efficiency: float
    variables: dict[str, float]
    evaluations: int
    converged: bool
    error: str = ""


def _config_for_sweep_value(config: ModelConfig, variable: str, value: float) -> ModelConfig:
    if variable == "temperature":
        return replace(config, ensemble=replace(config.ensemble, temperature=value))
    if variable == "pump_power":
        cfg = replace(config, drive=replace(config.drive, pump_power=value))
        # rederive the Rabi frequency at the current couplings
        return with_couplings(cfg, cfg.cavity.gamma_mu_c, cfg.cavity.gamma_o_c)
    if variable == "optical_q":
        gamma_o_i = config.atom.omega_13 / value
        cfg = replace(config, cavity=replace(config.cavity, gamma_o_i=gamma_o_i))
        return with_couplings(cfg, cfg.cavity.gamma_mu_c, cfg.cavity.gamma_o_c)
    raise ValueError(f"unknown sweep variable {variable!r} (one of {SWEEPABLE})")


def sweep(
    variable: str,
    values,
    config: ModelConfig,
    max_evaluations: int = 4000,
    refine: int = 0,
    warm_start: bool = True,
) -> list[SweepRow]:
    """Optimize the efficiency at each value of the swept variable.

    Each point is warm-started from the previous argmax (configurable off);
    per-point failures are recorded and the sweep continues.
    """
    values = list(values)
    if not values:
        raise ValueError("sweep needs at least one value")
    rows: list[SweepRow] = []
    previous_best: dict[str, float] | None = None
    for value in values:
        cfg = _config_for_sweep_value(config, variable, float(value))
        problem = default_problem(cfg, max_evaluations=max_evaluations, refine=refine)
        try:
            seed = previous_best if (warm_start and previous_best is not None) else None
            result = optimize(problem, seed=seed)
        except Exception as exc:  # keep sweeping past singular points
            rows.append(SweepRow(float(value), math.nan, {}, 0, False, str(exc)))
            continue
        rows.append(
            SweepRow(
                float(value),
                result.efficiency,
                result.variables,
                result.evaluations,
                result.converged,
            )
        )
        if result.variables:
            previous_best = result.variables
    return rows


def write_sweep_csv(path, variable: str, rows: list[SweepRow]) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("# moconv sweep schema v1\n")
        writer = csv.writer(fh)
        writer.writerow([variable, "efficiency", *VARIABLE_NAMES, "evaluations", "converged", "error"])
        for row in rows:
            writer.writerow(
                [
                    f"{row.value:.12e}",
                    f"{row.efficiency:.12e}",
                    *[f"{row.variables.get(n, math.nan):.12e}" for n in VARIABLE_NAMES],
                    row.evaluations,
                    int(row.converged),
                    row.error,
                ]
            )
