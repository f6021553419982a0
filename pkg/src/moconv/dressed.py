"""Location of atomic detunings where the dressed states become degenerate.

The characteristic polynomial of the 3x3 rotating-frame Hamiltonian is a
cubic whose discriminant vanishes exactly when two eigenvalues coincide.
Because the Hamiltonian is Hermitian the discriminant is a nonnegative
quartic in the microwave atomic detuning, so degeneracies are tangential
zeros: we locate them through the real critical points of the quartic and
confirm each against the eigenvalue gap.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import FieldState


class DegenerateGuessError(ZeroDivisionError):
    """The closed-form guess is undefined (optical drive on atomic resonance)."""


@dataclass(frozen=True)
class DegeneracyQuery:
    """Everything the Hamiltonian needs apart from the microwave atomic detuning."""

    delta_a_o: float
    fields: FieldState
    rabi: complex
    delta_mu: float
    delta_o: float
    g_mu: float
    g_o: float

    @property
    def optical_offset(self) -> float:
        return self.delta_a_o - self.delta_o


def _hamiltonian(q: DegeneracyQuery, delta_a_mu: float) -> np.ndarray:
    b = q.g_mu * q.fields.beta
    a = q.g_o * q.fields.alpha
    return np.array(
        [
            [0.0, np.conj(b), np.conj(a)],
            [b, delta_a_mu - q.delta_mu, np.conj(q.rabi)],
            [a, q.rabi, q.optical_offset],
        ],
        dtype=complex,
    )


def _char_poly_coeffs(q: DegeneracyQuery) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Coefficients (a, b, c) of lambda^3 + a*lambda^2 + b*lambda + c, each as a
    linear polynomial [const, slope] in x = delta_a_mu.  All real for Hermitian H."""
    b2 = abs(q.g_mu * q.fields.beta) ** 2
    a2 = abs(q.g_o * q.fields.alpha) ** 2
    o2 = abs(q.rabi) ** 2
    d_o = q.optical_offset
    # diagonal entry H22 = x - delta_mu =: m
    m = np.array([-q.delta_mu, 1.0])
    one = np.array([1.0, 0.0])
    # trace = m + d_o
    a_poly = -(m + d_o * one)
    # sum of principal 2x2 minors
    b_poly = m * d_o - (b2 + a2 + o2) * one
    # det(H) = -|B|^2*d_o - m*|A|^2 + 2*Re(conj(B)*conj(Omega)*A)
    cross = 2.0 * (np.conj(q.g_mu * q.fields.beta) * np.conj(q.rabi) * q.g_o * q.fields.alpha).real
    det_poly = -b2 * d_o * one - a2 * m + cross * one
    c_poly = -det_poly
    return a_poly, b_poly, c_poly


def discriminant_coeffs(q: DegeneracyQuery) -> np.ndarray:
    """Coefficients (ascending) of the quartic Disc(x) in x = delta_a_mu."""
    a, b, c = _char_poly_coeffs(q)
    P = np.polynomial.polynomial
    term = P.polymul(P.polymul(a, b), c) * 18.0
    term = P.polyadd(term, -4.0 * P.polymul(P.polymul(P.polymul(a, a), a), c))
    term = P.polyadd(term, P.polymul(P.polymul(a, a), P.polymul(b, b)))
    term = P.polyadd(term, -4.0 * P.polymul(P.polymul(b, b), b))
    term = P.polyadd(term, -27.0 * P.polymul(c, c))
    out = np.zeros(5)
    out[: len(term)] = term.real
    return out


def char_poly_discriminant(q: DegeneracyQuery, delta_a_mu: float) -> float:
    """Discriminant of the characteristic cubic; zero iff two eigenvalues coincide."""
    coeffs = discriminant_coeffs(q)
    return float(np.polynomial.polynomial.polyval(delta_a_mu, coeffs))


def eigenvalue_gap(q: DegeneracyQuery, delta_a_mu: float) -> tuple[float, float]:
    """(minimum pairwise gap, spectral range) of H at the given detuning."""
    eigs = np.linalg.eigvalsh(_hamiltonian(q, delta_a_mu))
    gaps = np.diff(np.sort(eigs))
    spread = eigs.max() - eigs.min()
    return float(gaps.min()), float(spread)


def guess_small_pump(q: DegeneracyQuery) -> float:
    """Degeneracy locus when the pump is negligible (microwave dressing only)."""
    d_o = q.optical_offset
    if d_o == 0:
        raise DegenerateGuessError("delta_a_o equals delta_o; guess undefined")
    b2 = abs(q.g_mu * q.fields.beta) ** 2
    return -b2 / d_o + d_o + q.delta_mu


def guess_small_microwave(q: DegeneracyQuery) -> float:
    """Degeneracy locus when the microwave field is negligible (pump dressing only)."""
    d_o = q.optical_offset
    if d_o == 0:
        raise DegenerateGuessError("delta_a_o equals delta_o; guess undefined")
    return abs(q.rabi) ** 2 / d_o + q.delta_mu


def _real_roots(coeffs: np.ndarray, scale: float, imag_tol: float = 1e-6) -> np.ndarray:
    """Real roots of a polynomial given ascending coefficients, x scaled by `scale`."""
    # work in units of `scale` so the companion matrix is well conditioned
    n = len(coeffs)
    scaled = coeffs * scale ** np.arange(n)
    top = np.abs(scaled).max()
    if top == 0:
        return np.array([])
    scaled = scaled / top
    roots = np.polynomial.polynomial.polyroots(np.trim_zeros(scaled, "b"))
    real = roots[np.abs(roots.imag) < imag_tol * (1.0 + np.abs(roots.real))].real
    return real * scale


def discriminant_minima(q: DegeneracyQuery, window: tuple[float, float]) -> list[float]:
    """Local minima of the discriminant inside the window, sorted ascending.

    These are the candidate sharp-feature locations for panelizing the
    inner ensemble integral, whether or not the gap closes exactly.
    """
    lo, hi = window
    coeffs = discriminant_coeffs(q)
    scale = max(abs(lo), abs(hi), abs(q.delta_mu), abs(q.optical_offset), 1.0)
    deriv = np.polynomial.polynomial.polyder(coeffs)
    second = np.polynomial.polynomial.polyder(deriv)
    crit = _real_roots(deriv, scale)
    minima = [
        float(x)
        for x in np.sort(crit)
        if lo <= x <= hi and np.polynomial.polynomial.polyval(x, second) > 0
    ]
    return _dedupe(minima, tol=1e-9 * scale)


def find_degenerate_detunings(
    q: DegeneracyQuery,
    window: tuple[float, float],
    gap_tol: float = 1e-6,
) -> list[float]:
    """Microwave atomic detunings inside the window where H is degenerate.

    Candidates come from the discriminant minima plus both closed-form
    limiting guesses; each is kept only if the eigenvalue gap there is below
    ``gap_tol`` of the spectral range.  An empty list is a valid outcome.
    """
    lo, hi = window
    candidates = list(discriminant_minima(q, window))
    for guess in (guess_small_pump, guess_small_microwave):
        try:
            x = guess(q)
        except DegenerateGuessError:
            continue
        if lo <= x <= hi:
            candidates.append(x)
    scale = max(abs(lo), abs(hi), 1.0)
    roots = []
    for x in sorted(candidates):
        x = _polish(q, x, scale)
        if not lo <= x <= hi:
            continue
        gap, spread = eigenvalue_gap(q, x)
        if spread == 0 or gap <= gap_tol * spread:
            roots.append(x)
    return _dedupe(sorted(roots), tol=1e-9 * scale)


def _polish(q: DegeneracyQuery, x: float, scale: float, steps: int = 3) -> float:
    """A few Newton steps on the discriminant derivative to sharpen a minimum."""
    coeffs = discriminant_coeffs(q)
    P = np.polynomial.polynomial
    d1 = P.polyder(coeffs)
    d2 = P.polyder(d1)
    for _ in range(steps):
        g = P.polyval(x, d1)
        h = P.polyval(x, d2)
        if h <= 0:
            break
        step = g / h
        if abs(step) > 0.1 * scale:
            break
        x -= step
    return float(x)


def _dedupe(values: list[float], tol: float) -> list[float]:
    out: list[float] = []
    for v in values:
        if not out or abs(v - out[-1]) > tol:
            out.append(v)
    return out
