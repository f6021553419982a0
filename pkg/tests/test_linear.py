import math

import numpy as np
import pytest

from moconv import atom as atom_mod
from moconv.atom import AtomDetunings, build_damping, build_hamiltonian, build_liouvillian
from moconv.config import (
    AtomParams,
    CavityParams,
    DriveSettings,
    FieldState,
)
from moconv.ensemble import STerms
from moconv import linear as linear_mod
from moconv.linear import (
    AmplificationError,
    DynamicalInstabilityError,
    LinearRegimeWarning,
    ResonanceSingularityError,
    conversion_efficiency,
    decompose,
    dynamical_matrix,
    intracavity_fields,
    is_dynamically_stable,
    linear_response,
    regime_check,
    scattering,
)

TWO_PI = 2.0 * math.pi


def make_atom(**overrides):
    base = dict(
        d13=1.63e-32,
        d23=1.15e-32,
        tau3=1e-3,
        tau2=1e-2,
        gamma_2d=1e3,
        gamma_3d=1e3,
        g_mu=1.0,
        g_o=1.0,
        omega_12=TWO_PI * 5e9,
        omega_13=TWO_PI * 195e12,
    )
    base.update(overrides)
    return AtomParams(**base)


def make_cavity(**overrides):
    base = dict(
        gamma_mu_c=TWO_PI * 1.5e6,
        gamma_mu_i=TWO_PI * 650e3,
        gamma_o_c=TWO_PI * 1.7e6,
        gamma_o_i=TWO_PI * 7.95e6,
        omega_c_mu=TWO_PI * 5e9,
        omega_c_o=TWO_PI * 195e12,
    )
    base.update(overrides)
    return CavityParams(**base)


def random_pieces(rng, scale=1e3):
    atom = make_atom(
        tau3=1.0 / (scale * 10 ** rng.uniform(-0.5, 0.5)),
        tau2=1.0 / (scale * 10 ** rng.uniform(-0.5, 0.5)),
        gamma_2d=scale * 10 ** rng.uniform(-0.5, 0.5),
        gamma_3d=scale * 10 ** rng.uniform(-0.5, 0.5),
    )
    drive = DriveSettings(
        rabi=scale * (rng.normal() + 1j * rng.normal()),
        delta_mu=scale * rng.normal(),
        delta_o=scale * rng.normal(),
    )
    det = AtomDetunings(delta_a_mu=scale * rng.normal() * 3, delta_a_o=scale * rng.normal() * 3)
    n12 = rng.uniform(0.0, 0.3)
    return atom, drive, det, n12


def central_difference_response(dec, eps):
    """d(rho)/d(alpha) and d(rho)/d(beta) holding the conjugates fixed.

    With field = x + i*y the analytic response is (d/dx - i*d/dy)/2, each
    partial estimated with a central difference of the full steady state.
    """
    def rho_at(alpha, beta):
        return atom_mod.steady_state(dec.reconstruct(alpha, beta))

    d_alpha = (
        (rho_at(eps, 0) - rho_at(-eps, 0)) / (2 * eps)
        - 1j * (rho_at(1j * eps, 0) - rho_at(-1j * eps, 0)) / (2 * eps)
    ) / 2
    d_beta = (
        (rho_at(0, eps) - rho_at(0, -eps)) / (2 * eps)
        - 1j * (rho_at(0, 1j * eps) - rho_at(0, -1j * eps)) / (2 * eps)
    ) / 2
    return d_alpha, d_beta


class TestDecomposition:
    def test_reconstruct_matches_direct_liouvillian(self):
        rng = np.random.default_rng(23)
        for _ in range(10):
            atom, drive, det, n12 = random_pieces(rng)
            dec = decompose(atom, drive.rabi, det, drive, n12)
            alpha = rng.normal() + 1j * rng.normal()
            beta = rng.normal() + 1j * rng.normal()
            h = build_hamiltonian(FieldState(beta=beta, alpha=alpha), drive.rabi, det, drive, atom)
            direct = build_liouvillian(h, build_damping(atom, n12))
            scale = np.abs(direct).max()
            assert np.abs(dec.reconstruct(alpha, beta) - direct).max() < 1e-12 * scale

    def test_zero_fields_recover_l0(self):
        rng = np.random.default_rng(29)
        atom, drive, det, n12 = random_pieces(rng)
        dec = decompose(atom, drive.rabi, det, drive, n12)
        assert np.array_equal(dec.reconstruct(0.0, 0.0), dec.l0)


class TestLinearResponse:
    def test_matches_finite_differences(self):
        rng = np.random.default_rng(31)
        for _ in range(5):
            atom, drive, det, n12 = random_pieces(rng)
            dec = decompose(atom, drive.rabi, det, drive, n12)
            rho0, rho_a, rho_b = linear_response(dec)
            fd_a, fd_b = central_difference_response(dec, eps=1e-5)
            scale = max(np.abs(rho_a).max(), np.abs(rho_b).max(), 1e-30)
            assert np.abs(rho_a - fd_a).max() < 1e-5 * scale
            assert np.abs(rho_b - fd_b).max() < 1e-5 * scale

    def test_responses_are_traceless(self):
        rng = np.random.default_rng(37)
        atom, drive, det, n12 = random_pieces(rng)
        rho0, rho_a, rho_b = linear_response(decompose(atom, drive.rabi, det, drive, n12))
        assert abs(np.trace(rho0) - 1.0) < 1e-12
        assert abs(np.trace(rho_a)) < 1e-12 * max(np.abs(rho_a).max(), 1.0)
        assert abs(np.trace(rho_b)) < 1e-12 * max(np.abs(rho_b).max(), 1.0)


class TestScattering:
    def test_empty_ensemble_microwave_reflection(self):
        # with no atoms the microwave cavity is a bare single-port filter
        cavity = make_cavity()
        half = 0.5 * (cavity.gamma_mu_c + cavity.gamma_mu_i)
        for delta in (0.0, 1e5, -3e6, 2e7):
            drive = DriveSettings(delta_mu=delta)
            c = scattering(STerms(0j, 0j, 0j, 0j), cavity, drive)
            expected = cavity.gamma_mu_c / (half - 1j * delta)
            assert c.c_bb == pytest.approx(expected, rel=1e-12)
            assert c.c_ab == 0.0
            assert c.c_ba == 0.0

    def test_empty_ensemble_optical_reflection(self):
        cavity = make_cavity()
        half = 0.5 * (cavity.gamma_o_c + cavity.gamma_o_i)
        drive = DriveSettings(delta_o=4e6)
        c = scattering(STerms(0j, 0j, 0j, 0j), cavity, drive)
        assert c.c_aa == pytest.approx(cavity.gamma_o_c / (half - 1j * 4e6), rel=1e-12)

    def test_conversion_efficiency_is_cab_squared(self):
        cavity = make_cavity()
        sterms = STerms(2e5 + 1e5j, 3e5 - 2e5j, -1e5 + 4e5j, 5e4 + 5e4j)
        c = scattering(sterms, cavity, DriveSettings())
        assert c.conversion_efficiency == abs(c.c_ab) ** 2

    def test_singular_denominator_raises(self):
        # choose S_beta_12 so the microwave denominator a_mu vanishes exactly
        cavity = make_cavity()
        delta = 1e6
        half = 0.5 * (cavity.gamma_mu_c + cavity.gamma_mu_i)
        sterms = STerms(0j, delta + 1j * half, 0j, 0j)
        with pytest.raises(ResonanceSingularityError):
            scattering(sterms, cavity, DriveSettings(delta_mu=delta))

    def test_intracavity_fields_consistent_with_scattering(self):
        cavity = make_cavity()
        sterms = STerms(2e5 + 1e5j, 3e5 - 2e5j, -1e5 + 4e5j, 5e4 + 5e4j)
        drive = DriveSettings(beta_in=2.0 + 1.0j, delta_mu=1e5, delta_o=-2e5)
        c = scattering(sterms, cavity, drive)
        fields = intracavity_fields(sterms, cavity, drive)
        beta_out = math.sqrt(cavity.gamma_mu_c) * fields.beta
        alpha_out = math.sqrt(cavity.gamma_o_c) * fields.alpha
        assert beta_out == pytest.approx(c.c_bb * drive.beta_in, rel=1e-10)
        assert alpha_out == pytest.approx(c.c_ab * drive.beta_in, rel=1e-10)


class TestStability:
    def test_empty_cavity_is_stable(self):
        cavity = make_cavity()
        assert is_dynamically_stable(STerms(0j, 0j, 0j, 0j), cavity, DriveSettings())

    def test_gain_medium_is_unstable(self):
        # Im(S_beta_12) > gamma_tot/2 flips the sign of the microwave damping
        cavity = make_cavity()
        half = 0.5 * (cavity.gamma_mu_c + cavity.gamma_mu_i)
        sterms = STerms(0j, 2j * half, 0j, 0j)
        assert not is_dynamically_stable(sterms, cavity, DriveSettings())

    def test_matrix_diagonal(self):
        cavity = make_cavity()
        drive = DriveSettings(delta_mu=1e5, delta_o=-2e5)
        sterms = STerms(1e4 + 2e4j, 3e4 - 1e4j, -2e4j, 5e3)
        m = dynamical_matrix(sterms, cavity, drive)
        half_mu = 0.5 * (cavity.gamma_mu_c + cavity.gamma_mu_i)
        assert m[0, 0] == pytest.approx(1j * sterms.s_beta_12 - 1j * 1e5 + half_mu)
        assert m[0, 1] == 1j * sterms.s_alpha_12
        assert m[1, 0] == 1j * sterms.s_beta_13


class TestEfficiencyGuards:
    def make_config_like(self):
        from moconv.config import EnsembleSpec, ModelConfig

        atom = make_atom()
        ensemble = EnsembleSpec(
            n_total=1e12, n_o=1e12, sigma_o=TWO_PI * 419e6, sigma_mu=TWO_PI * 5e6, temperature=0.1
        )
        return ModelConfig(atom=atom, cavity=make_cavity(), ensemble=ensemble, drive=DriveSettings())

    def test_unstable_point_raises(self, monkeypatch):
        cfg = self.make_config_like()
        half = 0.5 * (cfg.cavity.gamma_mu_c + cfg.cavity.gamma_mu_i)
        sterms = STerms(0j, 2j * half, 0j, 0j)
        monkeypatch.setattr(linear_mod, "compute_sterms", lambda *a, **k: sterms)
        with pytest.raises(DynamicalInstabilityError):
            conversion_efficiency(cfg)

    def test_conversion_gain_raises(self, monkeypatch):
        # s_alpha_12 = s_beta_13 = i*K just below the oscillation threshold:
        # the dynamics are still stable but |C_ab| diverges past unity
        cfg = self.make_config_like()
        half_mu = 0.5 * (cfg.cavity.gamma_mu_c + cfg.cavity.gamma_mu_i)
        half_o = 0.5 * (cfg.cavity.gamma_o_c + cfg.cavity.gamma_o_i)
        k = math.sqrt(0.99 * half_mu * half_o)
        sterms = STerms(1j * k, 0j, 0j, 1j * k)
        assert is_dynamically_stable(sterms, cfg.cavity, cfg.drive)
        assert abs(scattering(sterms, cfg.cavity, cfg.drive).c_ab) > 1.0
        monkeypatch.setattr(linear_mod, "compute_sterms", lambda *a, **k_: sterms)
        with pytest.raises(AmplificationError):
            conversion_efficiency(cfg)


class TestRegimeCheck:
    def make_config_like(self):
        from moconv.config import EnsembleSpec, ModelConfig

        atom = make_atom(gamma_2d=1e3, gamma_3d=1e3, tau3=1e-3, tau2=1e-2)
        ensemble = EnsembleSpec(
            n_total=1e12, n_o=1e12, sigma_o=TWO_PI * 419e6, sigma_mu=TWO_PI * 5e6, temperature=0.1
        )
        return ModelConfig(atom=atom, cavity=make_cavity(), ensemble=ensemble, drive=DriveSettings())

    def test_small_fields_pass(self):
        cfg = self.make_config_like()
        assert regime_check(cfg, FieldState(beta=1e-3, alpha=1e-3))

    def test_large_fields_warn(self):
        cfg = self.make_config_like()
        with pytest.warns(LinearRegimeWarning):
            assert not regime_check(cfg, FieldState(beta=1e9, alpha=0.0))
        with pytest.warns(LinearRegimeWarning):
            assert not regime_check(cfg, FieldState(beta=0.0, alpha=1e9))
