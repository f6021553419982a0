"""Small-signal linearization and the 2x2 scattering coefficients.

The Liouvillian is split into a zero-signal part plus terms linear in the
cavity fields; the linear responses feed the ensemble S terms, which in
turn give the closed-form input-to-output scattering coefficients and the
conversion efficiency |C_ab|^2.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import atom as atom_mod
from . import ensemble as ensemble_mod
from .config import (
    AtomParams,
    CavityParams,
    DriveSettings,
    FieldState,
    ModelConfig,
    decay_rates_from_lifetimes,
    thermal_occupation_12,
)
from .ensemble import STerms


class ResonanceSingularityError(ZeroDivisionError):
    """The scattering denominator vanished (parameters sit on a bare resonance)."""


class DynamicalInstabilityError(RuntimeError):
    """The linearized field dynamics are unstable (above oscillation threshold).

    The pump can push the coupled cavity modes past their oscillation
    threshold; the steady-state scattering coefficients are meaningless
    there, so efficiency evaluation refuses such operating points.
    """


class AmplificationError(RuntimeError):
    """|C_ab|^2 exceeds one: the conversion channel shows net Raman gain.

    Such operating points amplify (and add noise to) the input rather than
    faithfully converting it, so |C_ab|^2 is no longer a conversion
    efficiency and efficiency evaluation refuses them.
    """


class LinearRegimeWarning(UserWarning):
    """The cavity fields are too large for the linear model to be trusted."""


@dataclass(frozen=True)
class LiouvillianDecomposition:
    """L(alpha, beta) = l0 + alpha*l_alpha + conj(alpha)*l_alpha_conj + ..."""

    l0: np.ndarray
    l_alpha: np.ndarray
    l_alpha_conj: np.ndarray
    l_beta: np.ndarray
    l_beta_conj: np.ndarray

    def reconstruct(self, alpha: complex, beta: complex) -> np.ndarray:
        return (
            self.l0
            + alpha * self.l_alpha
            + np.conj(alpha) * self.l_alpha_conj
            + beta * self.l_beta
            + np.conj(beta) * self.l_beta_conj
        )


@dataclass(frozen=True)
class ScatteringCoefficients:
    """Input-to-output map: alpha_out = c_aa*alpha_in + c_ab*beta_in, etc."""

    c_aa: complex
    c_ab: complex
    c_ba: complex
    c_bb: complex

    @property
    def conversion_efficiency(self) -> float:
        return abs(self.c_ab) ** 2


_E01 = np.zeros((3, 3))
_E01[0, 1] = 1.0
_E02 = np.zeros((3, 3))
_E02[0, 2] = 1.0


def decompose(
    atom: AtomParams,
    rabi: complex,
    det: atom_mod.AtomDetunings,
    drive: DriveSettings,
    n12: float,
) -> LiouvillianDecomposition:
    """Split the single-atom Liouvillian by powers of the signal fields."""
    h0 = atom_mod.build_hamiltonian(FieldState(), rabi, det, drive, atom)
    l0 = atom_mod.build_liouvillian(h0, atom_mod.build_damping(atom, n12))
    com = atom_mod.commutator_superoperator
    return LiouvillianDecomposition(
        l0=l0,
        l_alpha=com(atom.g_o * ensemble_mod._E20),
        l_alpha_conj=com(atom.g_o * _E02),
        l_beta=com(atom.g_mu * ensemble_mod._E10),
        l_beta_conj=com(atom.g_mu * _E01),
    )


def linear_response(dec: LiouvillianDecomposition) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(rho0, rho_alpha, rho_beta) for one atom.

    rho0 is the zero-signal steady state; each response solves
    l0 rho_x = -l_x rho0 under a zero-trace constraint.
    """
    rho0 = atom_mod.steady_state(dec.l0)
    a, row = atom_mod._constrained_system(dec.l0)
    out = []
    for l_x in (dec.l_alpha, dec.l_beta):
        b = -(l_x @ atom_mod.vec(rho0))
        b[row] = 0.0
        try:
            sol = np.linalg.solve(a, b)
        except np.linalg.LinAlgError as exc:
            raise atom_mod.SteadyStateError("singular linear-response system") from exc
        out.append(atom_mod.unvec(sol))
    return rho0, out[0], out[1]


def scattering(sterms: STerms, cavity: CavityParams, drive: DriveSettings) -> ScatteringCoefficients:
    """Closed-form scattering coefficients from the linearized cavity equations."""
    half_mu = 0.5 * (cavity.gamma_mu_c + cavity.gamma_mu_i)
    half_o = 0.5 * (cavity.gamma_o_c + cavity.gamma_o_i)
    a_mu = 1j * sterms.s_beta_12 - 1j * drive.delta_mu + half_mu
    a_o = 1j * sterms.s_alpha_13 - 1j * drive.delta_o + half_o
    denom = sterms.s_alpha_12 * sterms.s_beta_13 + a_o * a_mu
    scale = max(abs(sterms.s_alpha_12 * sterms.s_beta_13), abs(a_o * a_mu), half_mu * half_o)
    if abs(denom) <= 1e-12 * scale:
        raise ResonanceSingularityError(
            f"scattering denominator vanished (|denom|={abs(denom):.3e}, "
            f"delta_mu={drive.delta_mu:.3e}, delta_o={drive.delta_o:.3e})"
        )
    root = np.sqrt(cavity.gamma_mu_c * cavity.gamma_o_c)
    return ScatteringCoefficients(
        c_aa=cavity.gamma_o_c * a_mu / denom,
        c_ab=-1j * sterms.s_beta_13 * root / denom,
        c_ba=-1j * sterms.s_alpha_12 * root / denom,
        c_bb=cavity.gamma_mu_c * a_o / denom,
    )


def dynamical_matrix(sterms: STerms, cavity: CavityParams, drive: DriveSettings) -> np.ndarray:
    """Coefficient matrix M of the linearized field dynamics d(beta,alpha)/dt = -M(...)+inputs."""
    half_mu = 0.5 * (cavity.gamma_mu_c + cavity.gamma_mu_i)
    half_o = 0.5 * (cavity.gamma_o_c + cavity.gamma_o_i)
    a_mu = 1j * sterms.s_beta_12 - 1j * drive.delta_mu + half_mu
    a_o = 1j * sterms.s_alpha_13 - 1j * drive.delta_o + half_o
    return np.array(
        [
            [a_mu, 1j * sterms.s_alpha_12],
            [1j * sterms.s_beta_13, a_o],
        ],
        dtype=complex,
    )


def is_dynamically_stable(sterms: STerms, cavity: CavityParams, drive: DriveSettings) -> bool:
    """True when both normal modes of the linearized dynamics decay."""
    eigs = np.linalg.eigvals(dynamical_matrix(sterms, cavity, drive))
    return bool(np.all(eigs.real > 0.0))


def intracavity_fields(
    sterms: STerms,
    cavity: CavityParams,
    drive: DriveSettings,
) -> FieldState:
    """Intracavity amplitudes of the linear model for the configured inputs."""
    half_mu = 0.5 * (cavity.gamma_mu_c + cavity.gamma_mu_i)
    half_o = 0.5 * (cavity.gamma_o_c + cavity.gamma_o_i)
    a_mu = 1j * sterms.s_beta_12 - 1j * drive.delta_mu + half_mu
    a_o = 1j * sterms.s_alpha_13 - 1j * drive.delta_o + half_o
    m = np.array(
        [
            [1j * sterms.s_alpha_12, a_mu],
            [a_o, 1j * sterms.s_beta_13],
        ],
        dtype=complex,
    )
    rhs = np.array(
        [
            np.sqrt(cavity.gamma_mu_c) * drive.beta_in,
            np.sqrt(cavity.gamma_o_c) * drive.alpha_in,
        ],
        dtype=complex,
    )
    alpha, beta = np.linalg.solve(m, rhs)
    return FieldState(beta=beta, alpha=alpha)


def compute_sterms(config: ModelConfig, refine: int = 0, check_convergence: bool = True) -> STerms:
    return ensemble_mod.integrate_linear_sums(
        config, refine=refine, check_convergence=check_convergence
    )


def scattering_from_config(
    config: ModelConfig, refine: int = 0, check_convergence: bool = True
) -> ScatteringCoefficients:
    sterms = compute_sterms(config, refine=refine, check_convergence=check_convergence)
    return scattering(sterms, config.cavity, config.drive)


def conversion_efficiency(
    config: ModelConfig, refine: int = 0, check_convergence: bool = True
) -> float:
    """End-to-end |C_ab|^2: linearize, integrate the S terms, and scatter.

    Raises ``DynamicalInstabilityError`` at operating points where the
    pumped system self-oscillates, since scattering is undefined there.
    """
    if config.ensemble.n_total == 0:
        return 0.0
    sterms = compute_sterms(config, refine=refine, check_convergence=check_convergence)
    if not is_dynamically_stable(sterms, config.cavity, config.drive):
        raise DynamicalInstabilityError(
            "linearized field dynamics are unstable at this operating point"
        )
    efficiency = scattering(sterms, config.cavity, config.drive).conversion_efficiency
    if efficiency > 1.0:
        raise AmplificationError(
            f"conversion channel shows net gain (|C_ab|^2 = {efficiency:.3f})"
        )
    return efficiency


def regime_check(config: ModelConfig, fields: FieldState) -> bool:
    """Warn (and return False) when the signal fields leave the linear regime.

    The linearization drops terms quadratic in the fields, so the coupling
    energies g|field| must stay below the coherence linewidths.
    """
    gamma_12, gamma_13, gamma_23 = decay_rates_from_lifetimes(config.atom)
    n12 = thermal_occupation_12(config)
    w_mu = gamma_12 * (2 * n12 + 1) / 2 + config.atom.gamma_2d
    w_o = (gamma_13 + gamma_23) / 2 + config.atom.gamma_3d
    ok = True
    if abs(config.atom.g_mu * fields.beta) > w_mu:
        warnings.warn(
            "microwave field outside the linear regime "
            f"(g_mu*|beta|={abs(config.atom.g_mu * fields.beta):.3e} > {w_mu:.3e})",
            LinearRegimeWarning,
        )
        ok = False
    if abs(config.atom.g_o * fields.alpha) > w_o:
        warnings.warn(
            "optical field outside the linear regime "
            f"(g_o*|alpha|={abs(config.atom.g_o * fields.alpha):.3e} > {w_o:.3e})",
            LinearRegimeWarning,
        )
        ok = False
    return ok
