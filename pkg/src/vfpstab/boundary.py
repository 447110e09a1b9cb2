"""Feedback boundary conditions, boundary functionals and constraint checks on K.

Traces follow the upwind convention of the solver: outgoing traces are the
boundary cell values, incoming traces are produced by the feedback matrix

    h(0, v)  = k00 h(0, -v) + k10 h(1, v),   v > 0
    h(1, v)  = k01 h(0, v)  + k11 h(1, -v),  v < 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple

import numpy as np

from .grid import PhaseGrid
from .operators import _values

CONSTRAINT_TOL = 1e-12


@dataclass(frozen=True)
class FeedbackMatrix:
    """Entries of K(eps) and of its eps -> 0 limit K0.

    Limit entries default to the eps-entries when not given.
    """

    k00: float
    k01: float
    k10: float
    k11: float
    k00_0: float | None = None
    k01_0: float | None = None
    k10_0: float | None = None
    k11_0: float | None = None

    def __post_init__(self):
        for name in ("k00", "k01", "k10", "k11"):
            val = getattr(self, name)
            if not math.isfinite(val):
                raise ValueError(f"{name} must be finite, got {val}")
            lim = getattr(self, name + "_0")
            if lim is None:
                object.__setattr__(self, name + "_0", float(val))
            elif not math.isfinite(lim):
                raise ValueError(f"{name}_0 must be finite, got {lim}")

    @classmethod
    def periodic(cls) -> "FeedbackMatrix":
        return cls(0.0, 1.0, 1.0, 0.0)

    @classmethod
    def reflective(cls) -> "FeedbackMatrix":
        return cls(1.0, 0.0, 0.0, 1.0)

    @classmethod
    def symmetric(cls, k: float) -> "FeedbackMatrix":
        """Small-field family k00 = k11 = k, k01 = k10 = 1 - k."""
        return cls(k, 1.0 - k, 1.0 - k, k)

    def limit(self) -> "FeedbackMatrix":
        return FeedbackMatrix(self.k00_0, self.k01_0, self.k10_0, self.k11_0)

    def is_periodic(self, tol: float = CONSTRAINT_TOL) -> bool:
        return (abs(self.k00) <= tol and abs(self.k11) <= tol
                and abs(self.k01 - 1) <= tol and abs(self.k10 - 1) <= tol)


class Traces(NamedTuple):
    """Full velocity traces h(t, 0, .) and h(t, 1, .) (incoming values filled in)."""

    left: np.ndarray
    right: np.ndarray


def incoming_values(state, K: FeedbackMatrix):
    """Incoming boundary values from the outgoing traces.

    Returns ``(in_left, in_right)``: ``in_left[j]`` is h(t, 0, v_j) for v_j > 0
    and ``in_right[j]`` is h(t, 1, v_j) for v_j < 0; entries for the other
    half-line are zero.
    """
    h = _values(state)
    nv = h.shape[1]
    half = nv // 2
    out0 = h[0]          # h(t, 0, v), used for v < 0
    out1 = h[-1]         # h(t, 1, v), used for v > 0
    mir = slice(None, None, -1)
    in_left = np.zeros(nv)
    in_right = np.zeros(nv)
    # v_j > 0 are indices half..nv-1; their mirrors are half-1..0
    in_left[half:] = K.k00 * out0[mir][half:] + K.k10 * out1[half:]
    in_right[:half] = K.k01 * out0[:half] + K.k11 * out1[mir][:half]
    return in_left, in_right


def traces(state, K: FeedbackMatrix) -> Traces:
    h = _values(state)
    half = h.shape[1] // 2
    in_left, in_right = incoming_values(h, K)
    left = h[0].copy()
    left[half:] = in_left[half:]
    right = h[-1].copy()
    right[:half] = in_right[:half]
    return Traces(left, right)


def boundary_dx(h: np.ndarray, grid: PhaseGrid) -> tuple[np.ndarray, np.ndarray]:
    """One-sided second-order d_x h at x = 0 and x = 1 from the three nearest cells."""
    h = _values(h)
    left = (-2.0 * h[0] + 3.0 * h[1] - h[2]) / grid.dx
    right = (2.0 * h[-1] - 3.0 * h[-2] + h[-3]) / grid.dx
    return left, right


@dataclass
class BoundaryFunctionals:
    A: float
    B: float
    A_x: float
    B_x: float
    C_B: float = math.nan
    I: float = math.nan
    flux_residual: float = math.nan

    @property
    def cb_defined(self) -> bool:
        return not math.isnan(self.C_B)


def _outgoing_energy(left: np.ndarray, right: np.ndarray, grid: PhaseGrid):
    v = grid.v_nodes
    neg, pos = grid.negative, grid.positive
    a = -0.5 * float(np.sum(v[neg] * left[neg] ** 2)) * grid.dv
    b = 0.5 * float(np.sum(v[pos] * right[pos] ** 2)) * grid.dv
    return a, b


def boundary_functionals(state, grid: PhaseGrid) -> BoundaryFunctionals:
    """A, B from the outgoing traces of h and A_x, B_x from those of d_x h."""
    h = _values(state)
    A, B = _outgoing_energy(h[0], h[-1], grid)
    dl, dr = boundary_dx(h, grid)
    A_x, B_x = _outgoing_energy(dl, dr, grid)
    return BoundaryFunctionals(A, B, A_x, B_x)


def compute_cb(A: float, B: float, A_x: float, B_x: float) -> float:
    """C_B, or NaN when the denominator vanishes."""
    if min(A, B, A_x, B_x) < 0:
        raise ValueError("boundary functionals must be non-negative")
    sa, sb, sax, sbx = (math.sqrt(t) for t in (A, B, A_x, B_x))
    den = 2.0 * (sa + sb) * (sax + sbx)
    if den == 0.0:
        return math.nan
    return ((sa - sb) ** 2 + (sax - sbx) ** 2) / den


def evaluate_I(K: FeedbackMatrix, A: float, B: float, A_x: float, B_x: float,
               a: float) -> float:
    """Upper bound I(t, eps) on the boundary terms of the energy estimate."""
    k00, k11 = K.k00, K.k11
    sa, sb, sax, sbx = (math.sqrt(t) for t in (A, B, A_x, B_x))
    return (-2.0 * k00 * (1 - k00) * (A + A_x)
            - 2.0 * k11 * (1 - k11) * (B + B_x)
            + 2.0 * (abs(k11 * (1 - k00)) + abs(k00 * (1 - k11)))
            * (math.sqrt(A * B) + math.sqrt(A_x * B_x))
            + 4.0 * a * (abs(1 - k11) * sb + abs(1 - k00) * sa)
            * (abs(k00) * sax + abs(k11) * sbx))


def boundary_fluxes(state, K: FeedbackMatrix, grid: PhaseGrid) -> tuple[float, float]:
    """u(t, 0) and u(t, 1) from the full traces."""
    tr = traces(state, K)
    w = grid.v_nodes * grid.sqrt_m * grid.dv
    return float(tr.left @ w), float(tr.right @ w)


def flux_balance(state, K: FeedbackMatrix, grid: PhaseGrid) -> float:
    u0, u1 = boundary_fluxes(state, K, grid)
    return abs(u1 - u0)


def derivative_bc_residual(state, K: FeedbackMatrix, grid: PhaseGrid) -> float:
    """Max-norm residual of the boundary relations satisfied by d_x h.

    d_x h(0, v) = -k00 d_x h(0, -v) + k10 d_x h(1, v),  v > 0
    d_x h(1, v) =  k01 d_x h(0, v)  - k11 d_x h(1, -v), v < 0
    """
    dl, dr = boundary_dx(state, grid)
    pos, neg = grid.positive, grid.negative
    r0 = dl - (-K.k00 * dl[::-1] + K.k10 * dr)
    r1 = dr - (K.k01 * dl - K.k11 * dr[::-1])
    return float(max(np.max(np.abs(r0[pos])), np.max(np.abs(r1[neg]))))


class Theorem(str, Enum):
    SMALL_FIELD = "small-field"
    PERIODIC_LARGE_FIELD = "periodic-large-field"
    EPSILON_ZERO = "epsilon-zero"
    NONE = "none"


def quadratic_residuals(k00, k01, k10, k11) -> tuple[float, float]:
    """Residuals of (1-k00)(1-k11) = k10 k01 and (1+k00)(1+k11) = k10 k01."""
    p = k10 * k01
    return (1 - k00) * (1 - k11) - p, (1 + k00) * (1 + k11) - p


@dataclass
class ConstraintReport:
    const1_pass: bool
    const1_residuals: tuple[float, float]
    const2_pass: bool
    const2_residuals: tuple[float, float]
    const3_value: float | None
    const3_pass: bool | None
    constraint3_pass: bool
    constraint3_residuals: tuple[float, float]
    theorem_selected: Theorem
    profile_violations: list[str] = field(default_factory=list)
    reasons: list[str] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    def as_dict(self) -> dict:
        d = dict(self.__dict__)
        d["theorem_selected"] = self.theorem_selected.value
        return d


def small_field_violations(K: FeedbackMatrix, tol: float = CONSTRAINT_TOL) -> list[str]:
    """Entry conditions 0 <= k11 = k00 <= 1 and k01 = k10 = 1 - k00."""
    out = []
    if not (-tol <= K.k00 <= 1 + tol):
        out.append(f"k00 = {K.k00:g} not in [0,1]")
    if abs(K.k11 - K.k00) > tol:
        out.append(f"k11 = {K.k11:g} differs from k00 = {K.k00:g}")
    if abs(K.k01 - (1 - K.k00)) > tol:
        out.append(f"k01 = {K.k01:g} differs from 1 - k00 = {1 - K.k00:g}")
    if abs(K.k10 - (1 - K.k00)) > tol:
        out.append(f"k10 = {K.k10:g} differs from 1 - k00 = {1 - K.k00:g}")
    return out


def check_constraints(K: FeedbackMatrix, a: float, C_B_min: float | None = None,
                      I_max: float | None = None, epsilon: float | None = None,
                      tol: float = CONSTRAINT_TOL) -> ConstraintReport:
    """Evaluate the three structural assumptions on K and pick the applicable theorem.

    ``C_B_min`` and ``I_max`` are trajectory extremes (min over t of C_B, max of
    I) when available; without them the C_B-dependent parts are reported as
    unverified rather than failed.  Never raises.
    """
    r1 = quadratic_residuals(K.k00_0, K.k01_0, K.k10_0, K.k11_0)
    c1 = all(abs(r) <= tol for r in r1)
    r2 = (K.k00 + K.k01 - 1.0, K.k10 + K.k11 - 1.0)
    c2 = all(abs(r) <= tol for r in r2)
    c3_pass = None if I_max is None else bool(I_max <= tol)

    reasons: list[str] = []
    notes: list[str] = []
    violations = small_field_violations(K, tol)
    theorem = Theorem.NONE

    if epsilon == 0.0:
        if K.is_periodic(tol):
            theorem = Theorem.EPSILON_ZERO
        else:
            reasons.append("eps = 0 requires the periodic matrix k00 = k11 = 0, k01 = k10 = 1")
    elif K.is_periodic(tol):
        theorem = Theorem.PERIODIC_LARGE_FIELD
    elif not violations:
        theorem = Theorem.SMALL_FIELD
        if C_B_min is None:
            notes.append("a <= C_B(t) cannot be certified a priori; verify along the trajectory")
        elif math.isnan(C_B_min) or a > C_B_min:
            theorem = Theorem.NONE
            reasons.append(f"a = {a:g} exceeds min_t C_B(t) = {C_B_min:g}")
    else:
        reasons.extend(violations)

    if not c2:
        notes.append("row sums of K differ from 1: boundary flux u(t,1) = u(t,0) not guaranteed")
    if not c1:
        notes.append("limit matrix violates the no-boundary-layer quadratics: "
                     "a boundary layer is expected as eps -> 0")
    if c3_pass is False:
        notes.append(f"max_t I(t) = {I_max:g} > 0")
    if theorem is Theorem.NONE and not reasons:
        reasons.append("no stabilization profile matches K")

    return ConstraintReport(
        const1_pass=c1, const1_residuals=r1,
        const2_pass=c2, const2_residuals=r2,
        const3_value=I_max, const3_pass=c3_pass,
        constraint3_pass=c1, constraint3_residuals=r1,
        theorem_selected=theorem,
        profile_violations=violations,
        reasons=reasons, notes=notes,
    )
