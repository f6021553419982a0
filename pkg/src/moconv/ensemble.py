"""Integration of single-atom responses over the inhomogeneous distribution.

The ensemble sums entering the cavity equations are 2D integrals of
density-matrix elements against the product of the optical and microwave
Gaussian detuning distributions.  The integrand is sharply peaked along
the dressed-state degeneracy loci, so the outer (optical) integral is
panelized around the optical drive and the inner (microwave) integral is
re-panelized at every outer node around the degeneracy locations found by
the dressed module.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import atom as atom_mod
from . import dressed
from .config import (
    AtomParams,
    DriveSettings,
    FieldState,
    ModelConfig,
    NumericsSettings,
    decay_rates_from_lifetimes,
    effective_microwave_atom_number,
    thermal_occupation_12,
)
from .quadrature import panel_nodes, panelize

_CHUNK = 32768  # cap on simultaneously factorized 9x9 systems (memory bound)


class QuadratureError(RuntimeError):
    """Raised when panel refinement fails to converge within the cap."""


@dataclass(frozen=True)
class InhomogeneousDistribution:
    """Separable Gaussian distribution of the atomic detunings (rad/s)."""

    center_o: float
    center_mu: float
    sigma_o: float
    sigma_mu: float

    def __post_init__(self):
        if self.sigma_o <= 0 or self.sigma_mu <= 0:
            raise ValueError("sigmas must be strictly positive")

    def weight_o(self, delta_a_o):
        z = (delta_a_o - self.center_o) / self.sigma_o
        return np.exp(-0.5 * z * z) / (np.sqrt(2 * np.pi) * self.sigma_o)

    def weight_mu(self, delta_a_mu):
        z = (delta_a_mu - self.center_mu) / self.sigma_mu
        return np.exp(-0.5 * z * z) / (np.sqrt(2 * np.pi) * self.sigma_mu)


@dataclass(frozen=True)
class EnsembleSums:
    """Ensemble coherence sums entering the nonlinear cavity equations (rad/s)."""

    s12: complex
    s13: complex


@dataclass(frozen=True)
class STerms:
    """Linearized ensemble response terms (rad/s)."""

    s_alpha_12: complex
    s_beta_12: complex
    s_alpha_13: complex
    s_beta_13: complex


def distribution_from_config(config: ModelConfig) -> InhomogeneousDistribution:
    return InhomogeneousDistribution(
        center_o=config.center_delta_a_o,
        center_mu=config.center_delta_a_mu,
        sigma_o=config.ensemble.sigma_o,
        sigma_mu=config.ensemble.sigma_mu,
    )


# ---------------------------------------------------------------------------
# Grid construction
# ---------------------------------------------------------------------------


def _coherence_widths(atom: AtomParams, n12: float) -> tuple[float, float]:
    """Homogeneous widths of the 1-2 and 1-3 coherences (rad/s)."""
    gamma_12, gamma_13, gamma_23 = decay_rates_from_lifetimes(atom)
    w_mu = gamma_12 * (2 * n12 + 1) / 2 + atom.gamma_2d
    w_o = (gamma_13 + gamma_23) / 2 + atom.gamma_3d
    return w_mu, w_o


def _sigma_boundaries(center: float, sigma: float, k: float) -> np.ndarray:
    steps = np.array([-k, -4.5, -3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0, 4.5, k])
    steps = steps[np.abs(steps) <= k]
    return center + sigma * steps


def _outer_nodes(
    dist: InhomogeneousDistribution,
    drive: DriveSettings,
    width_hint: float,
    numerics: NumericsSettings,
    refine: int,
) -> tuple[np.ndarray, np.ndarray]:
    k = numerics.window_sigmas
    a = dist.center_o - k * dist.sigma_o
    b = dist.center_o + k * dist.sigma_o
    bounds = panelize(a, b, [drive.delta_o], width_hint)
    bounds = np.unique(np.concatenate([bounds, _sigma_boundaries(dist.center_o, dist.sigma_o, k)]))
    return panel_nodes(bounds, numerics.points_per_panel, refine)


def _inner_nodes(
    delta_a_o: float,
    dist: InhomogeneousDistribution,
    query: dressed.DegeneracyQuery,
    width_hint: float,
    numerics: NumericsSettings,
    refine: int,
) -> tuple[np.ndarray, np.ndarray]:
    k = numerics.window_sigmas
    a = dist.center_mu - k * dist.sigma_mu
    b = dist.center_mu + k * dist.sigma_mu
    peaks = list(dressed.discriminant_minima(query, (a, b)))
    peaks.append(query.delta_mu)
    for guess in (dressed.guess_small_pump, dressed.guess_small_microwave):
        try:
            peaks.append(guess(query))
        except dressed.DegenerateGuessError:
            pass
    bounds = panelize(a, b, peaks, width_hint)
    bounds = np.unique(np.concatenate([bounds, _sigma_boundaries(dist.center_mu, dist.sigma_mu, k)]))
    return panel_nodes(bounds, numerics.points_per_panel, refine)


def build_grid(
    fields: FieldState,
    rabi: complex,
    drive: DriveSettings,
    dist: InhomogeneousDistribution,
    atom: AtomParams,
    numerics: NumericsSettings,
    n12: float,
    refine: int = 0,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Flattened (delta_a_o, delta_a_mu, weight) arrays for the 2D quadrature.

    Weights already include both Gaussian densities, so the sums are plain
    weighted sums of the per-atom responses.
    """
    # The panel ladders grow geometrically from the width hint to the full
    # window, so the hint should be the narrowest feature scale: the
    # homogeneous coherence width (power-broadened scales are covered by the
    # outer rungs automatically).
    w_mu, w_o = _coherence_widths(atom, n12)
    width_mu = max(w_mu, 1e-7 * dist.sigma_mu)
    width_o = max(w_o, 1e-7 * dist.sigma_o)

    outer_x, outer_w = _outer_nodes(dist, drive, width_o, numerics, refine)
    outer_w = outer_w * dist.weight_o(outer_x)

    dao_chunks, dmu_chunks, weight_chunks = [], [], []
    for x_o, w_outer in zip(outer_x, outer_w):
        query = dressed.DegeneracyQuery(
            delta_a_o=float(x_o),
            fields=fields,
            rabi=rabi,
            delta_mu=drive.delta_mu,
            delta_o=drive.delta_o,
            g_mu=atom.g_mu,
            g_o=atom.g_o,
        )
        inner_x, inner_w = _inner_nodes(float(x_o), dist, query, width_mu, numerics, refine)
        dao_chunks.append(np.full_like(inner_x, x_o))
        dmu_chunks.append(inner_x)
        weight_chunks.append(w_outer * inner_w * dist.weight_mu(inner_x))
    return (
        np.concatenate(dao_chunks),
        np.concatenate(dmu_chunks),
        np.concatenate(weight_chunks),
    )


# ---------------------------------------------------------------------------
# Batched linear-response evaluation
# ---------------------------------------------------------------------------

_E10 = np.zeros((3, 3))
_E10[1, 0] = 1.0
_E20 = np.zeros((3, 3))
_E20[2, 0] = 1.0

# vec indices of the coherences feeding the cavity equations:
# <sigma_12> = rho[1,0] and <sigma_13> = rho[2,0]
_IDX_C12 = 3
_IDX_C13 = 6


def field_coupling_superoperators(atom: AtomParams) -> tuple[np.ndarray, np.ndarray]:
    """(L_alpha, L_beta): derivative of the Liouvillian w.r.t. each cavity field."""
    l_alpha = atom_mod.commutator_superoperator(atom.g_o * _E20)
    l_beta = atom_mod.commutator_superoperator(atom.g_mu * _E10)
    return l_alpha, l_beta


def _linear_responses_batch(
    base, l_dmu, l_dao, l_alpha, l_beta, dao, dmu
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(rho0, rho_alpha, rho_beta) vectorized responses at every grid node."""
    rho0_out = np.empty((len(dao), 9), dtype=complex)
    ra_out = np.empty((len(dao), 9), dtype=complex)
    rb_out = np.empty((len(dao), 9), dtype=complex)
    for start in range(0, len(dao), _CHUNK):
        sl = slice(start, start + _CHUNK)
        a = atom_mod.assemble_batch(base, l_dmu, l_dao, dmu[sl], dao[sl])
        a[:, 8, :] = atom_mod.TRACE_ROW
        rhs = np.zeros((a.shape[0], 9, 3), dtype=complex)
        rhs[:, 8, 0] = 1.0
        rho0 = np.linalg.solve(a, rhs[:, :, :1])[:, :, 0]
        rhs[:, :, 1] = -rho0 @ l_alpha.T
        rhs[:, :, 2] = -rho0 @ l_beta.T
        rhs[:, 8, 1:] = 0.0
        resp = np.linalg.solve(a, rhs[:, :, 1:])
        rho0_out[sl] = rho0
        ra_out[sl] = resp[:, :, 0]
        rb_out[sl] = resp[:, :, 1]
    return rho0_out, ra_out, rb_out


def integrate_linear_sums(
    config: ModelConfig,
    refine: int = 0,
    check_convergence: bool = True,
    samples_csv: str | None = None,
) -> STerms:
    """Linearized ensemble S terms for the current drive and distribution.

    With ``check_convergence`` the panel grid is subdivided until the terms
    change by less than ``numerics.quad_tol`` relative, up to
    ``numerics.quad_max_refine`` subdivisions.
    """
    n12 = thermal_occupation_12(config)
    dist = distribution_from_config(config)
    l_alpha, l_beta = field_coupling_superoperators(config.atom)
    base, l_dmu, l_dao = atom_mod.liouvillian_detuning_parts(
        FieldState(), config.drive.rabi, config.drive, config.atom, n12
    )
    n_mu = effective_microwave_atom_number(config.ensemble, config.atom.omega_12)
    n_o = config.ensemble.n_o
    g_mu, g_o = config.atom.g_mu, config.atom.g_o

    def evaluate(level: int) -> STerms:
        dao, dmu, w = build_grid(
            FieldState(), config.drive.rabi, config.drive, dist,
            config.atom, config.numerics, n12, refine=level,
        )
        _, ra, rb = _linear_responses_batch(base, l_dmu, l_dao, l_alpha, l_beta, dao, dmu)
        if samples_csv is not None and level == refine:
            _dump_samples(samples_csv, dao, dmu, rb[:, _IDX_C12], rb[:, _IDX_C13])
        return STerms(
            s_alpha_12=n_mu * g_mu * complex(np.sum(w * ra[:, _IDX_C12])),
            s_beta_12=n_mu * g_mu * complex(np.sum(w * rb[:, _IDX_C12])),
            s_alpha_13=n_o * g_o * complex(np.sum(w * ra[:, _IDX_C13])),
            s_beta_13=n_o * g_o * complex(np.sum(w * rb[:, _IDX_C13])),
        )

    if config.ensemble.n_total == 0:
        return STerms(0j, 0j, 0j, 0j)
    if not check_convergence:
        return evaluate(refine)
    previous = evaluate(refine)
    for level in range(refine + 1, config.numerics.quad_max_refine + 1):
        current = evaluate(level)
        if _converged(previous, current, config.numerics.quad_tol):
            return current
        previous = current
    raise QuadratureError(
        f"ensemble quadrature did not converge within {config.numerics.quad_max_refine} refinements"
    )


def _converged(a: STerms, b: STerms, tol: float) -> bool:
    pairs = [
        (a.s_alpha_12, b.s_alpha_12),
        (a.s_beta_12, b.s_beta_12),
        (a.s_alpha_13, b.s_alpha_13),
        (a.s_beta_13, b.s_beta_13),
    ]
    scale = max(abs(y) for _, y in pairs)
    if scale == 0:
        return True
    return all(abs(x - y) <= tol * scale for x, y in pairs)


# ---------------------------------------------------------------------------
# Nonlinear (full steady state) sums
# ---------------------------------------------------------------------------


def integrate_nonlinear_sums(
    config: ModelConfig,
    fields: FieldState,
    refine: int = 0,
    check_convergence: bool = True,
    samples_csv: str | None = None,
) -> EnsembleSums:
    """Full ensemble sums from unlinearized steady states at the given fields."""
    if config.ensemble.n_total == 0:
        return EnsembleSums(0j, 0j)
    n12 = thermal_occupation_12(config)
    dist = distribution_from_config(config)
    base, l_dmu, l_dao = atom_mod.liouvillian_detuning_parts(
        fields, config.drive.rabi, config.drive, config.atom, n12
    )
    n_mu = effective_microwave_atom_number(config.ensemble, config.atom.omega_12)
    n_o = config.ensemble.n_o
    g_mu, g_o = config.atom.g_mu, config.atom.g_o

    def evaluate(level: int) -> EnsembleSums:
        dao, dmu, w = build_grid(
            fields, config.drive.rabi, config.drive, dist,
            config.atom, config.numerics, n12, refine=level,
        )
        c12 = np.empty(len(dao), dtype=complex)
        c13 = np.empty(len(dao), dtype=complex)
        for start in range(0, len(dao), _CHUNK):
            sl = slice(start, start + _CHUNK)
            rho = atom_mod.steady_state_batch(base, l_dmu, l_dao, dmu[sl], dao[sl])
            c12[sl] = rho[:, 1, 0]
            c13[sl] = rho[:, 2, 0]
        if samples_csv is not None and level == refine:
            _dump_samples(samples_csv, dao, dmu, c12, c13)
        return EnsembleSums(
            s12=n_mu * g_mu * complex(np.sum(w * c12)),
            s13=n_o * g_o * complex(np.sum(w * c13)),
        )

    if not check_convergence:
        return evaluate(refine)
    previous = evaluate(refine)
    for level in range(refine + 1, config.numerics.quad_max_refine + 1):
        current = evaluate(level)
        scale = max(abs(current.s12), abs(current.s13))
        if scale == 0 or (
            abs(current.s12 - previous.s12) <= config.numerics.quad_tol * scale
            and abs(current.s13 - previous.s13) <= config.numerics.quad_tol * scale
        ):
            return current
        previous = current
    raise QuadratureError(
        f"ensemble quadrature did not converge within {config.numerics.quad_max_refine} refinements"
    )


def _dump_samples(path: str, dao, dmu, c12, c13) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["delta_a_o", "delta_a_mu", "re_rho12", "im_rho12", "re_rho13", "im_rho13"])
        for row in zip(dao, dmu, c12.real, c12.imag, c13.real, c13.imag):
            writer.writerow([f"{v:.12e}" for v in row])
