"""Finite-volume solver for the drift-diffusion limit d_t s = d_x (d_x s + E s)."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from dataclasses import field as dc_field

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from .boundary import CONSTRAINT_TOL, FeedbackMatrix, quadratic_residuals
from .constants import FieldSpec

EXPLICIT_FACTOR = 0.45
MACRO_FAMILIES = ("cosine", "sine", "constant", "zero", "table")


class ConstraintError(ValueError):
    pass


@dataclass
class MacroConfig:
    """``K0`` is the limit matrix; periodic K0 gives periodic closure.

    ``initial`` selects sigma0: cosine/sine A*cos|sin(2 pi k x), constant A,
    zero, or ``table`` (values at cell centres).
    """

    nx: int = 128
    field: FieldSpec = dc_field(default_factory=FieldSpec)
    K0: FeedbackMatrix = dc_field(default_factory=FeedbackMatrix.periodic)
    t_end: float = 0.01
    dt: float | None = None
    implicit: bool = False
    initial: str = "cosine"
    amplitude: float = 1.0
    mode: int = 1
    table: np.ndarray | None = None
    output_every: int = 0      # 0: only initial and final snapshots

    @property
    def dx(self) -> float:
        return 1.0 / self.nx

    @property
    def x_nodes(self) -> np.ndarray:
        return (np.arange(self.nx) + 0.5) / self.nx


def check_limit_matrix(K0: FeedbackMatrix) -> tuple[bool, tuple[float, float]]:
    res = quadratic_residuals(K0.k00, K0.k01, K0.k10, K0.k11)
    return all(abs(r) <= CONSTRAINT_TOL for r in res), res


def initial_sigma(config: MacroConfig) -> np.ndarray:
    x = config.x_nodes
    A, k = config.amplitude, 2.0 * np.pi * config.mode
    kind = config.initial
    if kind == "cosine":
        return A * np.cos(k * x)
    if kind == "sine":
        return A * np.sin(k * x)
    if kind == "constant":
        return np.full(config.nx, float(A))
    if kind == "zero":
        return np.zeros(config.nx)
    if kind == "table":
        s = np.asarray(config.table, dtype=float)
        if s.shape != (config.nx,) or not np.all(np.isfinite(s)):
            raise ValueError(f"sigma table must be {config.nx} finite values")
        return s.copy()
    raise ValueError(f"unknown macro initial family {kind!r}; expected one of {MACRO_FAMILIES}")


def _closure_scale(K0: FeedbackMatrix) -> float:
    """Jump factor c in sigma(0) = c sigma(1), d_x sigma(0) = c d_x sigma(1)."""
    c = K0.k10
    if c == 0:
        raise ConstraintError("limit closure needs k10 != 0")
    if abs(c - 1.0) > CONSTRAINT_TOL:
        warnings.warn("limit boundary closure with k10 != 1 is experimental", stacklevel=3)
    return c


def _operator(config: MacroConfig) -> sparse.csr_matrix:
    """Matrix of the conservative flux divergence, F = d_x s + E s at faces.

    The faces at x = 0 and x = 1 are one interface across which
    s(0) = c s(1) and F(0) = c F(1).
    """
    n, dx = config.nx, config.dx
    c = _closure_scale(config.K0)
    xf = np.arange(n + 1) * dx
    e = config.field(xf)
    rows, cols, vals = [], [], []

    def add(i, j, v):
        rows.append(i)
        cols.append(j)
        vals.append(v)

    # interior faces i+1/2 between cells i and i+1
    for i in range(n - 1):
        ef = e[i + 1]
        # F = (s[i+1] - s[i])/dx + ef (s[i] + s[i+1])/2
        wl = -1.0 / dx + 0.5 * ef
        wr = 1.0 / dx + 0.5 * ef
        add(i, i, wl / dx)
        add(i, i + 1, wr / dx)
        add(i + 1, i, -wl / dx)
        add(i + 1, i + 1, -wr / dx)
    # boundary face: left ghost of cell 0 is c*s[n-1]; E vanishes at x = 0, 1
    # F0 = (s[0] - c s[n-1]) / dx enters cell 0 from the left; F1 = F0 / c leaves cell n-1
    add(0, 0, -1.0 / dx ** 2)
    add(0, n - 1, c / dx ** 2)
    add(n - 1, 0, 1.0 / (c * dx ** 2))
    add(n - 1, n - 1, -1.0 / dx ** 2)
    return sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))


def max_explicit_dt(config: MacroConfig) -> float:
    dx = config.dx
    emax = config.field.max_abs
    return EXPLICIT_FACTOR * dx * dx / (1.0 + 0.5 * emax * dx)


class MacroStepper:
    def __init__(self, config: MacroConfig, dt: float):
        self.config = config
        self.dt = dt
        self.A = _operator(config)
        if config.implicit:
            n = config.nx
            self._lu = splu((sparse.identity(n, format="csc") - dt * self.A).tocsc())
        elif dt > max_explicit_dt(config) * (1 + 1e-12):
            raise ValueError(f"dt = {dt:g} exceeds the explicit diffusion bound "
                             f"{max_explicit_dt(config):g} (0.45 dx^2); use implicit mode")

    def step(self, sigma: np.ndarray) -> np.ndarray:
        if self.config.implicit:
            return self._lu.solve(sigma)
        return sigma + self.dt * (self.A @ sigma)


def step_macro(sigma: np.ndarray, config: MacroConfig, dt: float) -> np.ndarray:
    return MacroStepper(config, dt).step(np.asarray(sigma, dtype=float))


def _schedule(t_end: float, dt_max: float, times) -> list[tuple[float, int]]:
    """Split [0, t_end] into output intervals, each with an integer step count."""
    if times is None:
        times = [t_end]
    out, prev = [], 0.0
    for t in times:
        if t < prev - 1e-15:
            raise ValueError("output times must be non-decreasing")
        span = t - prev
        n = int(math.ceil(span / dt_max - 1e-9)) if span > 0 else 0
        out.append((t, n))
        prev = t
    return out


def run_macro(config: MacroConfig, times=None) -> list[tuple[float, np.ndarray]]:
    """Snapshots (t, sigma) at t = 0 and at each requested output time.

    Without ``times`` the schedule is every ``output_every`` explicit steps
    (or only the final time when ``output_every`` is 0).
    """
    ok, res = check_limit_matrix(config.K0)
    if not ok:
        raise ConstraintError(
            "limit matrix violates (1-k00)(1-k11) = k10 k01 and (1+k00)(1+k11) = k10 k01: "
            f"residuals ({res[0]:.6g}, {res[1]:.6g})")
    if config.t_end < 0:
        raise ValueError("t_end must be non-negative")
    dt_max = config.dt if config.dt is not None else max_explicit_dt(config)
    if not config.implicit and dt_max > max_explicit_dt(config) * (1 + 1e-12):
        raise ValueError(f"dt = {dt_max:g} exceeds the explicit diffusion bound "
                         f"{max_explicit_dt(config):g}")
    if times is None and config.output_every > 0 and config.t_end > 0:
        n_total = int(math.ceil(config.t_end / dt_max - 1e-9))
        dt = config.t_end / n_total
        times = [min(k * dt, config.t_end)
                 for k in range(config.output_every, n_total, config.output_every)]
        times.append(config.t_end)

    sigma = initial_sigma(config)
    snaps = [(0.0, sigma.copy())]
    steppers: dict[float, MacroStepper] = {}
    prev = 0.0
    for t, n in _schedule(config.t_end, dt_max, times):
        if n:
            dt = (t - prev) / n
            key = round(dt, 15)
            stepper = steppers.get(key)
            if stepper is None:
                stepper = steppers[key] = MacroStepper(config, dt)
            for _ in range(n):
                sigma = stepper.step(sigma)
        snaps.append((t, sigma.copy()))
        prev = t
    return snaps
