"""Single-atom rotating-frame Hamiltonian, Liouvillian and steady state.

Density matrices are vectorized row-major: ``vec(rho)[3*i + j] = rho[i, j]``.
With that convention ``vec(A @ rho) = kron(A, I) @ vec(rho)`` and
``vec(rho @ B) = kron(I, B.T) @ vec(rho)``, so the coherent part of the
Liouvillian is ``-1j * (kron(H, I) - kron(I, H.T))``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .config import AtomParams, DriveSettings, FieldState, decay_rates_from_lifetimes

I3 = np.eye(3)
# trace-constraint row in the vectorized basis (picks out rho11+rho22+rho33)
TRACE_ROW = np.zeros(9)
TRACE_ROW[[0, 4, 8]] = 1.0
# indices of the rows of L generated by the diagonal elements of rho;
# trace conservation makes these three rows linearly dependent
_DIAG_ROWS = (0, 4, 8)


class SteadyStateError(RuntimeError):
    """Raised when the constrained steady-state system is singular."""


class IllConditionedWarning(UserWarning):
    """Emitted when the constrained steady-state system is nearly singular."""


@dataclass(frozen=True)
class AtomDetunings:
    """Detunings of this atom's transitions from the cavity resonances (rad/s)."""

    delta_a_mu: float
    delta_a_o: float


def vec(rho: np.ndarray) -> np.ndarray:
    return np.asarray(rho, dtype=complex).reshape(9)

def unvec(v: np.ndarray) -> np.ndarray:
    return np.asarray(v, dtype=complex).reshape(3, 3)


def build_hamiltonian(
    fields: FieldState,
    rabi: complex,
    det: AtomDetunings,
    drive: DriveSettings,
    atom: AtomParams,
) -> np.ndarray:
    """Rotating-frame Hamiltonian of one atom coupled to both cavity fields (rad/s)."""
    beta, alpha = fields.beta, fields.alpha
    g_mu, g_o = atom.g_mu, atom.g_o
    return np.array(
        [
            [0.0, g_mu * np.conj(beta), g_o * np.conj(alpha)],
            [g_mu * beta, det.delta_a_mu - drive.delta_mu, np.conj(rabi)],
            [g_o * alpha, rabi, det.delta_a_o - drive.delta_o],
        ],
        dtype=complex,
    )


def _lower(n: int, m: int) -> np.ndarray:
    """Transition operator |n><m| (0-indexed)."""
    op = np.zeros((3, 3))
    op[n, m] = 1.0
    return op


def lindblad_superoperator(op: np.ndarray) -> np.ndarray:
    """D[op] rho = op rho op^+  -  (op^+ op rho + rho op^+ op)/2, vectorized."""
    opd = op.conj().T
    anti = opd @ op
    return (
        np.kron(op, opd.T)
        - 0.5 * np.kron(anti, I3)
        - 0.5 * np.kron(I3, anti.T)
    ).astype(complex)


def build_damping(atom: AtomParams, n12: float) -> np.ndarray:
    """Damping superoperator: population decay with thermal excitation on 1-2,
    spontaneous decay on both optical branches, and pure dephasing of |2>, |3>."""
    gamma_12, gamma_13, gamma_23 = decay_rates_from_lifetimes(atom)
    damping = np.zeros((9, 9), dtype=complex)
    # |2> -> |1> with thermal occupation n12 on the microwave transition
    damping += gamma_12 * (n12 + 1) * lindblad_superoperator(_lower(0, 1))
    damping += gamma_12 * n12 * lindblad_superoperator(_lower(1, 0))
    # optical decay, no thermal occupation
    damping += gamma_13 * lindblad_superoperator(_lower(0, 2))
    damping += gamma_23 * lindblad_superoperator(_lower(1, 2))
    # pure dephasing
    damping += atom.gamma_2d * lindblad_superoperator(np.diag([0.0, 1.0, 0.0]))
    damping += atom.gamma_3d * lindblad_superoperator(np.diag([0.0, 0.0, 1.0]))
    return damping


def commutator_superoperator(h: np.ndarray) -> np.ndarray:
    """-1j*(H rho - rho H) in the vectorized basis; H need not be Hermitian."""
    return -1j * (np.kron(h, I3) - np.kron(I3, h.T))


def build_liouvillian(h: np.ndarray, damping: np.ndarray) -> np.ndarray:
    """Full generator L with L@vec(rho) = vec(-1j*[H,rho] + damping(rho))."""
    return commutator_superoperator(h) + damping


def _constrained_system(liouv: np.ndarray) -> tuple[np.ndarray, int]:
    """Replace the most redundant diagonal row of L with the trace constraint.

    Rows 0, 4 and 8 of a trace-preserving generator sum to zero, so any one
    of them can be dropped; pick the smallest-norm one for conditioning.
    """
    norms = [np.abs(liouv[r]).sum() for r in _DIAG_ROWS]
    row = _DIAG_ROWS[int(np.argmin(norms))]
    a = liouv.copy()
    a[row] = TRACE_ROW
    return a, row


def steady_state(liouv: np.ndarray, cond_warn: float = 1e12) -> np.ndarray:
    """Solve L rho = 0 with unit trace; returns the 3x3 density matrix."""
    a, row = _constrained_system(liouv)
    b = np.zeros(9, dtype=complex)
    b[row] = 1.0
    try:
        rho_vec = np.linalg.solve(a, b)
    except np.linalg.LinAlgError as exc:
        raise SteadyStateError("singular constrained steady-state system") from exc
    cond = np.linalg.cond(a)
    if not np.isfinite(cond):
        raise SteadyStateError("singular constrained steady-state system")
    if cond > cond_warn:
        warnings.warn(
            f"steady-state system condition number {cond:.2e}", IllConditionedWarning
        )
    rho = unvec(rho_vec)
    return 0.5 * (rho + rho.conj().T)


def check_density_matrix(rho: np.ndarray, herm_tol=1e-10, trace_tol=1e-10, pos_tol=1e-8):
    """Raise if rho is not Hermitian, unit trace and positive within tolerance."""
    herm = np.abs(rho - rho.conj().T).max()
    if herm > herm_tol:
        raise ValueError(f"density matrix not Hermitian: deviation {herm:.2e}")
    tr = abs(np.trace(rho) - 1.0)
    if tr > trace_tol:
        raise ValueError(f"density matrix trace deviates by {tr:.2e}")
    eigs = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))
    if eigs.min() < -pos_tol:
        raise ValueError(f"density matrix not positive: min eigenvalue {eigs.min():.2e}")


def propagate(rho0: np.ndarray, liouv: np.ndarray, t: float, rtol=1e-10, atol=1e-12) -> np.ndarray:
    """Integrate rho' = L rho for time t with an adaptive explicit integrator."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t == 0:
        return np.array(rho0, dtype=complex)
    sol = solve_ivp(
        lambda _t, y: liouv @ y,
        (0.0, t),
        vec(rho0),
        method="DOP853",
        rtol=rtol,
        atol=atol,
    )
    if not sol.success:
        raise RuntimeError(f"propagation failed: {sol.message}")
    return unvec(sol.y[:, -1])


# ---------------------------------------------------------------------------
# Batched assembly over detuning grids
# ---------------------------------------------------------------------------

# superoperators for the detuning-dependent diagonal entries of H
_L_DMU = commutator_superoperator(np.diag([0.0, 1.0, 0.0]))
_L_DAO = commutator_superoperator(np.diag([0.0, 0.0, 1.0]))


def liouvillian_detuning_parts(
    fields: FieldState,
    rabi: complex,
    drive: DriveSettings,
    atom: AtomParams,
    n12: float,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Split L(delta_a_mu, delta_a_o) = L_base + delta_a_mu*L_dmu + delta_a_o*L_dao.

    The detunings enter H only on the diagonal, so the split is exact and
    lets grids of atoms share one base matrix.
    """
    h0 = build_hamiltonian(fields, rabi, AtomDetunings(0.0, 0.0), drive, atom)
    base = build_liouvillian(h0, build_damping(atom, n12))
    return base, _L_DMU, _L_DAO


def steady_state_batch(
    base: np.ndarray,
    l_dmu: np.ndarray,
    l_dao: np.ndarray,
    delta_a_mu: np.ndarray,
    delta_a_o: np.ndarray,
) -> np.ndarray:
    """Steady states for arrays of detunings; returns (n, 3, 3)."""
    a = assemble_batch(base, l_dmu, l_dao, delta_a_mu, delta_a_o)
    a[:, 8, :] = TRACE_ROW
    b = np.zeros((a.shape[0], 9, 1), dtype=complex)
    b[:, 8, 0] = 1.0
    try:
        rho = np.linalg.solve(a, b)
    except np.linalg.LinAlgError as exc:
        raise SteadyStateError("singular steady-state system in batch solve") from exc
    return rho.reshape(-1, 3, 3)


def assemble_batch(base, l_dmu, l_dao, delta_a_mu, delta_a_o) -> np.ndarray:
    """Stack L(delta_a_mu[i], delta_a_o[i]) into an (n, 9, 9) array."""
    dmu = np.asarray(delta_a_mu, dtype=float).reshape(-1, 1, 1)
    dao = np.asarray(delta_a_o, dtype=float).reshape(-1, 1, 1)
    return base[None, :, :] + dmu * l_dmu[None, :, :] + dao * l_dao[None, :, :]
