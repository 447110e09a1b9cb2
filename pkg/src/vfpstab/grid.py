"""Discrete phase space [0, 1] x [-vmax, vmax], Maxwellian weight and norms."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

SQRT_2PI = math.sqrt(2.0 * math.pi)


def maxwellian(v):
    """Global Maxwellian M(v) = exp(-v^2/2) / sqrt(2 pi). Works on scalars and arrays."""
    return np.exp(-0.5 * np.square(v)) / SQRT_2PI


def required_vmax(tail_tol: float) -> float:
    """Smallest velocity cut-off with M(vmax) <= tail_tol."""
    return math.sqrt(-2.0 * math.log(tail_tol * SQRT_2PI))


@dataclass(frozen=True)
class PhaseGrid:
    """Cell-centred uniform grid on [0, 1] x [-vmax, vmax].

    Nodes are mirrored in v, so ``v[::-1] == -v`` holds bitwise and no node
    sits at v = 0.
    """

    nx: int
    nv: int
    vmax: float
    dx: float = field(init=False)
    dv: float = field(init=False)
    x_nodes: np.ndarray = field(init=False, repr=False)
    v_nodes: np.ndarray = field(init=False, repr=False)
    w_v: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        dx = 1.0 / self.nx
        dv = 2.0 * self.vmax / self.nv
        x = (np.arange(self.nx) + 0.5) * dx
        half = -self.vmax + (np.arange(self.nv // 2) + 0.5) * dv
        v = np.concatenate([half, -half[::-1]])
        for arr in (x, v):
            arr.setflags(write=False)
        w = np.full(self.nv, dv)
        w.setflags(write=False)
        object.__setattr__(self, "dx", dx)
        object.__setattr__(self, "dv", dv)
        object.__setattr__(self, "x_nodes", x)
        object.__setattr__(self, "v_nodes", v)
        object.__setattr__(self, "w_v", w)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.nv)

    @property
    def mirror(self) -> np.ndarray:
        """Index permutation j -> j' with v[j'] = -v[j]."""
        return np.arange(self.nv)[::-1]

    @property
    def positive(self) -> np.ndarray:
        return self.v_nodes > 0

    @property
    def negative(self) -> np.ndarray:
        return self.v_nodes < 0

    @property
    def sqrt_m(self) -> np.ndarray:
        return np.sqrt(maxwellian(self.v_nodes))

    def integrate(self, g: np.ndarray) -> float:
        """Midpoint quadrature of a grid function over the phase space."""
        return float(np.sum(g) * self.dx * self.dv)


def build_grid(nx: int = 64, nv: int = 64, vmax: float = 8.0,
               tail_tol: float = 1e-12) -> PhaseGrid:
    if nx < 4:
        raise ValueError(f"nx must be >= 4, got {nx}")
    if nv % 2:
        raise ValueError(f"nv must be even, got {nv}")
    if nv < 8:
        raise ValueError(f"nv must be >= 8, got {nv}")
    if not (math.isfinite(vmax) and vmax > 0):
        raise ValueError(f"vmax must be positive and finite, got {vmax}")
    if not tail_tol > 0:
        raise ValueError(f"tail_tol must be positive, got {tail_tol}")
    m_edge = float(maxwellian(vmax))
    if m_edge >= tail_tol:
        raise ValueError(
            f"Maxwellian tail M({vmax:g}) = {m_edge:.3e} >= tail_tol = {tail_tol:g}; "
            f"vmax must exceed {required_vmax(tail_tol):.4f}")
    return PhaseGrid(int(nx), int(nv), float(vmax))


@dataclass(frozen=True)
class WeightedNormReport:
    """Squared norms of a grid function: L2, omega, V and (V, omega)."""

    l2: float
    omega: float
    v_norm: float
    v_omega: float


def d_dx(g: np.ndarray, grid: PhaseGrid) -> np.ndarray:
    """Second-order x-derivative (central inside, one-sided at x = 0, 1)."""
    return np.gradient(g, grid.dx, axis=0, edge_order=2)


def d_dv(g: np.ndarray, grid: PhaseGrid) -> np.ndarray:
    return np.gradient(g, grid.dv, axis=-1, edge_order=2)


def sq_norm(g: np.ndarray, grid: PhaseGrid) -> float:
    return grid.integrate(np.square(g))


def omega_sq_norm(g: np.ndarray, grid: PhaseGrid) -> float:
    """||g||^2 + ||d_v g||^2 + ||v g||^2."""
    return (sq_norm(g, grid) + sq_norm(d_dv(g, grid), grid)
            + sq_norm(grid.v_nodes * g, grid))


def norms(g, grid: PhaseGrid) -> WeightedNormReport:
    g = np.asarray(getattr(g, "h", g), dtype=float)
    if g.shape != grid.shape:
        raise ValueError(f"grid function has shape {g.shape}, expected {grid.shape}")
    if not np.all(np.isfinite(g)):
        raise ValueError("grid function contains non-finite values")
    gx = d_dx(g, grid)
    l2 = sq_norm(g, grid)
    omega = omega_sq_norm(g, grid)
    gx2 = sq_norm(gx, grid)
    return WeightedNormReport(
        l2=l2,
        omega=omega,
        v_norm=l2 + gx2,
        v_omega=omega + omega_sq_norm(gx, grid),
    )
