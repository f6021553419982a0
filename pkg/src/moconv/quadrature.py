"""Gauss-Lobatto quadrature with peak-aware panelization.

Gauss-Lobatto rules include both panel endpoints among the nodes, so
splitting the integration interval exactly at a sharp feature guarantees
the feature's center is sampled.  ``panelize`` nests geometrically growing
panels around each known peak; the integrand then varies by at most one
scale factor within any panel.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import Legendre

#: growth factor of the nested panel widths around a peak
LADDER_FACTOR = 4.0


@lru_cache(maxsize=None)
def gauss_lobatto_rule(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of the n-point Gauss-Lobatto rule on [-1, 1].

    Interior nodes are the roots of P'_{n-1}; the rule is exact for
    polynomials of degree <= 2n - 3.
    """
    if n < 3:
        raise ValueError("Gauss-Lobatto rule needs n >= 3")
    leg = Legendre.basis(n - 1)
    interior = leg.deriv().roots().real
    nodes = np.concatenate(([-1.0], np.sort(interior), [1.0]))
    weights = 2.0 / (n * (n - 1) * leg(nodes) ** 2)
    return nodes, weights


def gauss_lobatto(f, a: float, b: float, n: int) -> complex:
    """n-point Gauss-Lobatto estimate of the integral of f over [a, b]."""
    if not a < b:
        raise ValueError("need a < b")
    x, w = gauss_lobatto_rule(n)
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    vals = np.asarray(f(mid + half * x))
    return complex(half * np.sum(w * vals))


def _dedupe_peaks(peaks, tol: float) -> list[float]:
    out: list[float] = []
    for p in sorted(peaks):
        if not out or p - out[-1] > tol:
            out.append(p)
    return out


def panelize(
    a: float,
    b: float,
    peaks,
    width_hint: float,
    factor: float | None = None,
) -> np.ndarray:
    """Sorted panel boundaries over [a, b] nesting geometrically around each peak.

    Each in-range peak p contributes boundaries p and p +- width_hint *
    factor**j for j = 0, 1, ... until the ladder leaves the interval, so a
    feature of width ``width_hint`` is resolved from its core out to the
    integration bounds.  Peaks closer together than the width hint are
    merged; boundaries outside [a, b] are clipped.
    """
    if not a < b:
        raise ValueError("need a < b")
    if width_hint <= 0:
        raise ValueError("width_hint must be positive")
    if factor is None:
        factor = LADDER_FACTOR
    if factor <= 1:
        raise ValueError("ladder factor must exceed 1")
    points = [a, b]
    span = b - a
    for p in _dedupe_peaks(peaks, width_hint):
        if not a <= p <= b:
            continue
        points.append(p)
        step = width_hint
        while step < span:
            points.append(p - step)
            points.append(p + step)
            step *= factor
    points = np.array([x for x in points if a <= x <= b], dtype=float)
    points.sort()
    keep = [points[0]]
    min_sep = 1e-12 * span
    for x in points[1:]:
        if x - keep[-1] > min_sep:
            keep.append(x)
    keep[-1] = b
    return np.array(keep)


def panel_nodes(
    boundaries: np.ndarray, n: int, refine: int = 0
) -> tuple[np.ndarray, np.ndarray]:
    """Flattened Gauss-Lobatto nodes and weights for a set of panels.

    ``refine`` subdivides every panel into 2**refine equal pieces, which is
    the knob the convergence loop turns.
    """
    x, w = gauss_lobatto_rule(n)
    boundaries = np.asarray(boundaries, dtype=float)
    pieces = 2**refine
    if pieces > 1:
        frac = np.arange(pieces) / pieces
        lo = boundaries[:-1]
        width = np.diff(boundaries)
        starts = (lo[:, None] + width[:, None] * frac[None, :]).ravel()
        widths = np.repeat(width / pieces, pieces)
    else:
        starts = boundaries[:-1]
        widths = np.diff(boundaries)
    mids = starts + 0.5 * widths
    halves = 0.5 * widths
    nodes = (mids[:, None] + halves[:, None] * x[None, :]).ravel()
    weights = (halves[:, None] * w[None, :]).ravel()
    return nodes, weights
