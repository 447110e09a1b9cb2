"""Linearized Fokker-Planck operator in h = f / sqrt(M) form, projection and moments.

The collision stencil is the conservative three-point discretization of
``(1/sqrt(M)) d_v (M d_v (h / sqrt(M)))`` with the face Maxwellian taken as
the geometric mean of its neighbours.  Expanded, row j reads

    (h[j+1] + h[j-1]) / dv^2 - (q+ + q-) h[j] / dv^2,
    q+- = sqrt(M[j+-1] / M[j]) = 1 - (+-v dv)/2 + ...,

i.e. the central second difference plus a potential that equals
``1/2 - v^2/4`` up to O(dv^2).  The matrix is symmetric, negative
semidefinite, and annihilates sqrt(M) exactly.  The two outermost faces
carry zero flux.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .grid import PhaseGrid, d_dv, maxwellian, omega_sq_norm, sq_norm

LAMBDA = 0.25


@dataclass
class DistributionState:
    """Weighted unknown h(t, x_i, v_j) on the grid."""

    h: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.h = np.asarray(self.h, dtype=float)
        if self.h.ndim != 2:
            raise ValueError("h must be a 2D array over (x, v)")
        if not np.all(np.isfinite(self.h)):
            raise ValueError("state contains non-finite values")

    def copy(self) -> "DistributionState":
        return DistributionState(self.h.copy(), self.t)


@dataclass
class MacroState:
    sigma: np.ndarray
    u: np.ndarray
    t: float = 0.0


def _values(obj) -> np.ndarray:
    return np.asarray(getattr(obj, "h", obj), dtype=float)


def density(h: np.ndarray, grid: PhaseGrid) -> np.ndarray:
    return _values(h) @ (grid.sqrt_m * grid.w_v)


def flux(h: np.ndarray, grid: PhaseGrid) -> np.ndarray:
    return _values(h) @ (grid.v_nodes * grid.sqrt_m * grid.w_v)


def moments(state, grid: PhaseGrid) -> MacroState:
    h = _values(state)
    return MacroState(density(h, grid), flux(h, grid), getattr(state, "t", 0.0))


def project_pi(state, grid: PhaseGrid) -> np.ndarray:
    """Pi h = sigma(x) sqrt(M(v)), the projection onto the collision null space."""
    return np.outer(density(state, grid), grid.sqrt_m)


def _face_ratios(grid: PhaseGrid) -> np.ndarray:
    """sqrt(M[j+1]/M[j]) for j = 0 .. nv-2."""
    v = grid.v_nodes
    return np.exp(-0.25 * (v[1:] ** 2 - v[:-1] ** 2))


def collision_bands(grid: PhaseGrid) -> tuple[np.ndarray, np.ndarray]:
    """(diagonal, off-diagonal) of the symmetric tridiagonal collision matrix."""
    r = _face_ratios(grid)
    inv = 1.0 / grid.dv ** 2
    diag = np.zeros(grid.nv)
    diag[:-1] -= r * inv          # face j+1/2 seen from j
    diag[1:] -= inv / r           # face j-1/2 seen from j+1
    off = np.full(grid.nv - 1, inv)
    return diag, off


def collision_matrix(grid: PhaseGrid) -> np.ndarray:
    diag, off = collision_bands(grid)
    return np.diag(diag) + np.diag(off, 1) + np.diag(off, -1)


def collision_L(state, grid: PhaseGrid) -> np.ndarray:
    """Apply the discrete collision operator independently on every x column."""
    h = _values(state)
    diag, off = collision_bands(grid)
    out = h * diag
    out[:, :-1] += off * h[:, 1:]
    out[:, 1:] += off * h[:, :-1]
    return out


def dissipation(state, grid: PhaseGrid) -> float:
    """-<L h, h> by summation by parts: sum of M_face (jump of h/sqrt(M))^2 / dv.

    Computed without dividing by sqrt(M), which underflows in the tails.
    """
    h = _values(state)
    q = np.sqrt(_face_ratios(grid))            # (M[j+1]/M[j])^(1/4)
    jump = h[:, 1:] / q - h[:, :-1] * q
    return float(np.sum(jump ** 2) * grid.dx / grid.dv)


def coercivity_check(state, grid: PhaseGrid, lam: float = LAMBDA):
    """Return (lhs, rhs1, rhs2) for the two local coercivity forms.

    lhs  = -<L h, h>
    rhs1 = lam * ||(1 - Pi) h||_omega^2
    rhs2 = lam * (||d_v (1-Pi)h||^2 + ||v (1-Pi)h||^2 - ||(1-Pi)h||^2)
    """
    h = _values(state)
    micro = h - project_pi(h, grid)
    lhs = dissipation(h, grid)
    rhs1 = lam * omega_sq_norm(micro, grid)
    rhs2 = lam * (sq_norm(d_dv(micro, grid), grid)
                  + sq_norm(grid.v_nodes * micro, grid)
                  - sq_norm(micro, grid))
    return lhs, rhs1, rhs2


class CollisionSolver:
    """Factorized (I - theta L) for repeated implicit collision steps.

    The matrix is symmetric positive definite for theta >= 0, so a banded
    Cholesky factor is computed once and reused for every x column and step.
    """

    def __init__(self, grid: PhaseGrid, theta: float):
        if theta < 0:
            raise ValueError("theta must be non-negative")
        self.grid = grid
        self.theta = theta
        diag, off = collision_bands(grid)
        ab = np.zeros((2, grid.nv))
        ab[0, 1:] = -theta * off
        ab[1] = 1.0 - theta * diag
        self._cb = linalg.cholesky_banded(ab, lower=False)

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """Solve column-wise; ``rhs`` has shape (nx, nv)."""
        return linalg.cho_solve_banded((self._cb, False), rhs.T).T


def hermite_functions(n_max: int, v: np.ndarray) -> np.ndarray:
    """Orthonormal eigenfunctions of the continuous operator, rows n = 0..n_max.

    psi_n = He_n(v) sqrt(M(v)) / sqrt(n!), so L psi_n = -n psi_n.
    """
    out = np.empty((n_max + 1, v.size))
    sm = np.sqrt(maxwellian(v))
    prev, cur = np.zeros_like(v), np.ones_like(v)
    for n in range(n_max + 1):
        out[n] = cur * sm
        prev, cur = cur, v * cur - n * prev
    norms = np.sqrt(np.cumprod(np.r_[1.0, np.arange(1, n_max + 1)]))
    return out / norms[:, None]
