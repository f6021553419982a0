"""Self-consistent solution of the full nonlinear cavity field equations.

The intracavity amplitudes obey fixed-point equations whose right-hand
sides contain the ensemble coherence sums, themselves functions of the
fields through the atomic steady states.  A damped fixed-point iteration
(seeded with the empty-cavity solution) solves them; a derivative-free
root finder takes over if the iteration stalls or oscillates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .config import CavityParams, DriveSettings, FieldState, ModelConfig
from .ensemble import EnsembleSums, integrate_nonlinear_sums


class FieldSolverError(RuntimeError):
    """Raised when the field iteration fails to converge."""


class FieldOscillationError(FieldSolverError):
    """Raised when the iteration cycles between states instead of converging."""


def cavity_update(
    sums: EnsembleSums, cavity: CavityParams, drive: DriveSettings
) -> FieldState:
    """Right-hand sides of the fixed-point equations for the intracavity fields."""
    denom_mu = 0.5 * (cavity.gamma_mu_c + cavity.gamma_mu_i) - 1j * drive.delta_mu
    denom_o = 0.5 * (cavity.gamma_o_c + cavity.gamma_o_i) - 1j * drive.delta_o
    beta = (-1j * sums.s12 + math.sqrt(cavity.gamma_mu_c) * drive.beta_in) / denom_mu
    alpha = (-1j * sums.s13 + math.sqrt(cavity.gamma_o_c) * drive.alpha_in) / denom_o
    return FieldState(beta=beta, alpha=alpha)


def output_fields(
    fields: FieldState,
    cavity: CavityParams,
    drive: DriveSettings | None = None,
    convention: str = "radiated",
) -> tuple[complex, complex]:
    """(beta_out, alpha_out) from the intracavity amplitudes.

    The default follows the model's output relation beta_out = sqrt(gamma_c)*beta;
    the 'standard' input-output convention additionally subtracts the input.
    """
    beta_out = math.sqrt(cavity.gamma_mu_c) * fields.beta
    alpha_out = math.sqrt(cavity.gamma_o_c) * fields.alpha
    if convention == "standard":
        if drive is None:
            raise ValueError("standard convention needs the drive to subtract inputs")
        beta_out -= drive.beta_in
        alpha_out -= drive.alpha_in
    elif convention != "radiated":
        raise ValueError("convention must be 'radiated' or 'standard'")
    return beta_out, alpha_out


@dataclass(frozen=True)
class FieldSolution:
    fields: FieldState
    residual: float
    iterations: int
    sums: EnsembleSums


def _pack(fields: FieldState) -> np.ndarray:
    return np.array(
        [fields.beta.real, fields.beta.imag, fields.alpha.real, fields.alpha.imag]
    )


def _unpack(x: np.ndarray) -> FieldState:
    return FieldState(beta=x[0] + 1j * x[1], alpha=x[2] + 1j * x[3])


def _relative_residual(current: FieldState, updated: FieldState, abs_tol: float) -> float:
    diff = np.hypot(
        abs(updated.beta - current.beta), abs(updated.alpha - current.alpha)
    )
    norm = np.hypot(abs(current.beta), abs(current.alpha))
    if norm < abs_tol:
        return diff
    return diff / norm


def solve_fields(
    config: ModelConfig,
    refine: int = 0,
    check_convergence: bool = False,
) -> FieldSolution:
    """Solve the coupled nonlinear cavity equations for the configured inputs.

    Damped fixed-point iteration: the mixing factor halves whenever the
    residual grows, down to a floor of 1/64.  On stall the remaining work
    is handed to a derivative-free root finder on the four real field
    components.
    """
    num = config.numerics

    def sums_at(fields: FieldState) -> EnsembleSums:
        return integrate_nonlinear_sums(
            config, fields, refine=refine, check_convergence=check_convergence
        )

    # empty-cavity seed: exact when the ensemble decouples
    current = cavity_update(EnsembleSums(0j, 0j), config.cavity, config.drive)
    damping = 1.0
    last_residual = math.inf
    history: list[tuple[complex, complex]] = []
    evaluations = 0
    for iteration in range(num.fp_max_iter):
        sums = sums_at(current)
        evaluations += 1
        target = cavity_update(sums, config.cavity, config.drive)
        residual = _relative_residual(current, target, num.fp_abs_tol)
        if residual <= num.fp_tol or (
            abs(target.beta) < num.fp_abs_tol and abs(target.alpha) < num.fp_abs_tol
        ):
            # re-verify the residual at the returned point itself
            final_sums = sums_at(target)
            verified = cavity_update(final_sums, config.cavity, config.drive)
            return FieldSolution(
                target,
                _relative_residual(target, verified, num.fp_abs_tol),
                evaluations + 1,
                final_sums,
            )
        if residual > last_residual:
            damping = max(damping / 2.0, 1.0 / 64.0)
            if damping == 1.0 / 64.0 and iteration > 20:
                return _root_fallback(config, current, sums_at, num)
        if _oscillating(history, current):
            raise FieldOscillationError(
                f"field iteration oscillating after {iteration} steps "
                f"(residual {residual:.3e})"
            )
        history.append((current.beta, current.alpha))
        last_residual = residual
        current = FieldState(
            beta=(1 - damping) * current.beta + damping * target.beta,
            alpha=(1 - damping) * current.alpha + damping * target.alpha,
        )
    raise FieldSolverError(
        f"field iteration did not converge in {num.fp_max_iter} steps "
        f"(last residual {last_residual:.3e})"
    )


def _oscillating(history: list[tuple[complex, complex]], state: FieldState, period: int = 8) -> bool:
    scale = max(abs(state.beta), abs(state.alpha), 1e-300)
    for beta, alpha in history[-period:-1]:
        if abs(beta - state.beta) < 1e-10 * scale and abs(alpha - state.alpha) < 1e-10 * scale:
            return True
    return False


def _root_fallback(config, seed: FieldState, sums_at, num) -> FieldSolution:
    scale = max(abs(seed.beta), abs(seed.alpha), 1.0)

    def objective(x: np.ndarray) -> np.ndarray:
        fields = _unpack(x * scale)
        updated = cavity_update(sums_at(fields), config.cavity, config.drive)
        return (_pack(updated) - _pack(fields)) / scale

    sol = optimize.root(objective, _pack(seed) / scale, method="hybr", tol=num.fp_tol / 10)
    if not sol.success:
        raise FieldSolverError(f"root-finder fallback failed: {sol.message}")
    fields = _unpack(sol.x * scale)
    sums = sums_at(fields)
    updated = cavity_update(sums, config.cavity, config.drive)
    residual = _relative_residual(fields, updated, num.fp_abs_tol)
    return FieldSolution(fields, residual, -1, sums)
