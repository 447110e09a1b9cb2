"""IMEX time integration of the weighted kinetic equation with feedback boundaries.

Advanced in the rescaled form

    d_t h + (v/eps) d_x h - (1/eps^2) L h = (E/eps) (d_v - v/2) h

with explicit first-order upwind transport (incoming traces from the feedback
matrix), an explicit conservative central field term, and a backward Euler
collision step solved column-wise with a cached Cholesky factor.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, fields
from dataclasses import field as dc_field

import numpy as np

from .boundary import (FeedbackMatrix, Theorem, boundary_dx, boundary_functionals,
                       check_constraints, compute_cb, evaluate_I, traces)
from .constants import FieldSpec, StabilityConstants, decay_envelope, validate_field
from .grid import PhaseGrid, build_grid, d_dx, norms
from .operators import LAMBDA, CollisionSolver, DistributionState, _face_ratios, density, flux

log = logging.getLogger(__name__)

CFL = 0.9
EQUIV_RTOL = 1e-10
INITIAL_FAMILIES = ("cosine-density", "odd-flux", "custom-table")


class ValidationError(ValueError):
    def __init__(self, reasons):
        self.reasons = list(reasons)
        super().__init__("; ".join(self.reasons))


@dataclass
class InitialCondition:
    """``cosine-density``: f0 = A cos(2 pi k x) M(v);
    ``odd-flux``: f0 = A sin(2 pi k x) v M(v);
    ``custom-table``: f0 given on the grid nodes, shape (nx, nv)."""

    family: str = "cosine-density"
    amplitude: float = 1.0
    mode: int = 1
    table: np.ndarray | None = None

    def __post_init__(self):
        if self.family not in INITIAL_FAMILIES:
            raise ValueError(f"unknown initial family {self.family!r}; "
                             f"expected one of {INITIAL_FAMILIES}")


@dataclass
class SimConfig:
    nx: int = 64
    nv: int = 64
    vmax: float = 8.0
    tail_tol: float = 1e-12
    epsilon: float = 1.0
    K: FeedbackMatrix = dc_field(default_factory=FeedbackMatrix.periodic)
    field: FieldSpec = dc_field(default_factory=FieldSpec)
    a: float = 0.05
    C_s: float = 1.0
    lam: float = LAMBDA
    t_end: float = 1.0
    dt: float | None = None
    output_every: int = 10
    initial: InitialCondition = dc_field(default_factory=InitialCondition)
    exploratory: bool = False

    def grid(self) -> PhaseGrid:
        return build_grid(self.nx, self.nv, self.vmax, self.tail_tol)

    def constants(self, C_B_min: float | None = None) -> StabilityConstants:
        mode = "periodic" if self.K.is_periodic() else "small-field"
        return StabilityConstants(a=self.a, epsilon=self.epsilon, C_E=self.field.C_E,
                                  C_s=self.C_s, lam=self.lam, C_B_min=C_B_min, mode=mode)

    def replace(self, **changes) -> "SimConfig":
        kw = {f.name: getattr(self, f.name) for f in fields(self)}
        kw.update(changes)
        return SimConfig(**kw)


def validate(config: SimConfig) -> list[str]:
    """Hypotheses required before a strict run; empty list means admissible."""
    problems = []
    if not 0 < config.epsilon <= 1:
        problems.append(f"epsilon must lie in (0, 1] for the kinetic solver, got {config.epsilon}")
    fc = validate_field(config.field, config.lam, config.C_s)
    problems.extend(fc.reasons)
    report = check_constraints(config.K, config.a, epsilon=config.epsilon)
    if report.theorem_selected is Theorem.NONE:
        problems.extend(report.reasons)
    if 0 < config.epsilon <= 1:
        consts = config.constants()
        if consts.a_interval.empty:
            problems.append(consts.a_interval.reason)
        elif config.a not in consts.a_interval:
            iv = consts.a_interval
            problems.append(f"a = {config.a:g} outside the admissible interval "
                            f"({iv.lower:.6g}, {iv.upper:.6g})")
    return problems


def prepare_initial(config: SimConfig, grid: PhaseGrid) -> DistributionState:
    """Build h0 = f0 / sqrt(M) and remove the total mass of f0.

    The correction subtracts m M(v) from f0 with m = int f0 / int M, so a
    constant density is annihilated and the discrete mass vanishes.
    """
    ic = config.initial
    x = grid.x_nodes[:, None]
    v = grid.v_nodes[None, :]
    sm = grid.sqrt_m
    k = 2.0 * np.pi * ic.mode
    if ic.family == "cosine-density":
        h = ic.amplitude * np.cos(k * x) * sm
    elif ic.family == "odd-flux":
        h = ic.amplitude * np.sin(k * x) * v * sm
    else:
        if ic.table is None:
            raise ValueError("custom-table initial condition needs a table")
        f0 = np.asarray(ic.table, dtype=float)
        if f0.shape != grid.shape:
            raise ValueError(f"initial table has shape {f0.shape}, expected {grid.shape}")
        if not np.all(np.isfinite(f0)):
            raise ValueError("initial table contains non-finite values")
        h = f0 / sm
    h = np.array(np.broadcast_to(h, grid.shape), dtype=float)
    mass = grid.integrate(h * sm)
    h -= (mass / float(np.sum(sm ** 2) * grid.dv)) * sm
    return DistributionState(h, 0.0)


def stable_dt(config: SimConfig, grid: PhaseGrid) -> float:
    """Largest admissible step: transport CFL and, for nonzero fields, the field term."""
    eps = config.epsilon
    bound = eps * grid.dx / grid.vmax
    emax = config.field.max_abs
    if emax > 0:
        r = _face_ratios(grid)
        rho = float(np.max(np.r_[r, 0.0] + np.r_[0.0, 1.0 / r])) / (2.0 * grid.dv)
        bound = min(bound, eps / (emax * rho))
    return CFL * bound


@dataclass
class EnergyRecord:
    t: float
    l2: float
    v_norm: float
    E_h: float
    cross_term: float
    mass: float
    A: float
    B: float
    A_x: float
    B_x: float
    C_B: float
    I: float
    flux_residual: float
    envelope: float
    boundary_term: float = math.nan
    boundary_term_scaled: float = math.nan
    flux_integral: float = 0.0
    equivalence_ok: bool = True


CSV_COLUMNS = ("t", "l2", "v_norm", "E_h", "cross_term", "mass", "A", "B", "A_x",
               "B_x", "C_B", "I", "flux_residual", "envelope")


def compute_energy(state: DistributionState, config: SimConfig, grid: PhaseGrid,
                   xi: float = math.nan, h0_V2: float = math.nan,
                   flux_integral: float = 0.0) -> EnergyRecord:
    """Lyapunov energy E_h = ||h||_V^2 / 2 + eps a <u, d_x sigma> plus boundary diagnostics."""
    h = state.h
    nr = norms(h, grid)
    sigma = density(h, grid)
    u = flux(h, grid)
    dsig = d_dx(sigma, grid)
    cross = float(np.sum(u * dsig) * grid.dx)
    ea = config.epsilon * config.a
    E_h = 0.5 * nr.v_norm + ea * cross

    slack = EQUIV_RTOL * max(nr.v_norm, 1e-300)
    cs_bound = 0.5 * float(np.sum(u ** 2 + dsig ** 2) * grid.dx)
    ok = (abs(cross) <= cs_bound + slack and cs_bound <= 0.5 * nr.v_norm + slack
          and 0.5 * (1 - ea) * nr.v_norm - slack <= E_h <= 0.5 * (1 + ea) * nr.v_norm + slack)
    if not ok:
        log.warning("norm equivalence violated at t=%g (quadrature inconsistency)", state.t)

    bf = boundary_functionals(h, grid)
    cb = compute_cb(bf.A, bf.B, bf.A_x, bf.B_x)
    I = evaluate_I(config.K, bf.A, bf.B, bf.A_x, bf.B_x, config.a)

    tr = traces(h, config.K)
    w = grid.v_nodes * grid.sqrt_m * grid.dv
    u0, u1 = float(tr.left @ w), float(tr.right @ w)
    dl, dr = boundary_dx(h, grid)
    half_v = 0.5 * grid.v_nodes * grid.dv
    du0, du1 = float(dl @ w), float(dr @ w)
    bterm = (-float(half_v @ (tr.right ** 2 - tr.left ** 2))
             - float(half_v @ (dr ** 2 - dl ** 2))
             - config.a * (u1 * du1 - u0 * du0))

    env = float(decay_envelope(state.t, h0_V2, xi)) if xi > 0 else math.nan
    return EnergyRecord(
        t=state.t, l2=nr.l2, v_norm=nr.v_norm, E_h=E_h, cross_term=cross,
        mass=grid.integrate(h * grid.sqrt_m),
        A=bf.A, B=bf.B, A_x=bf.A_x, B_x=bf.B_x, C_B=cb, I=I,
        flux_residual=abs(u1 - u0), envelope=env,
        boundary_term=bterm, boundary_term_scaled=bterm / config.epsilon,
        flux_integral=flux_integral, equivalence_ok=ok,
    )


class KineticSolver:
    """Stepper bound to one configuration, grid and step size."""

    def __init__(self, config: SimConfig, grid: PhaseGrid | None = None,
                 dt: float | None = None):
        self.config = config
        self.grid = grid or config.grid()
        self.dt_max = stable_dt(config, self.grid)
        dt = config.dt if dt is None else dt
        dt = self.dt_max if dt is None else float(dt)
        if not dt > 0:
            raise ValueError(f"dt must be positive, got {dt}")
        if dt > self.dt_max * (1 + 1e-12):
            raise ValueError(f"dt = {dt:g} exceeds the stability bound {self.dt_max:g} "
                             f"(0.9 * eps * dx / vmax, field-limited when E != 0)")
        self.dt = dt
        g = self.grid
        self._theta = dt / config.epsilon ** 2
        self._collide = CollisionSolver(g, self._theta)
        self._pos = g.v_nodes > 0
        self._courant = dt / (config.epsilon * g.dx) * g.v_nodes
        e = config.field(g.x_nodes)
        self._field = None
        if np.any(e != 0):
            r = _face_ratios(g)
            self._field = (dt / config.epsilon * e[:, None] / (2.0 * g.dv), r)

    def _explicit(self, h: np.ndarray) -> np.ndarray:
        nx, nv = h.shape
        tr = traces(h, self.config.K)
        ext = np.empty((nx + 2, nv))
        ext[1:-1] = h
        ext[0] = tr.left
        ext[-1] = tr.right
        face = np.where(self._pos, ext[:-1], ext[1:])
        out = h - self._courant * (face[1:] - face[:-1])
        if self._field is not None:
            coef, r = self._field
            # (sqrt(M) h)_{j+1} - (sqrt(M) h)_{j-1}, divided by sqrt(M)_j, zero ghosts
            dv_f = np.zeros_like(h)
            dv_f[:, :-1] += r * h[:, 1:]
            dv_f[:, 1:] -= h[:, :-1] / r
            out += coef * dv_f
        return out

    def step(self, state: DistributionState) -> DistributionState:
        h = self._collide.solve(self._explicit(state.h))
        if not np.all(np.isfinite(h)):
            raise FloatingPointError(f"non-finite values after step to t={state.t + self.dt:g}")
        return DistributionState(h, state.t + self.dt)


def step(state: DistributionState, config: SimConfig, grid: PhaseGrid,
         dt: float | None = None) -> DistributionState:
    """One IMEX Euler step. Builds the stepper each call; use KineticSolver in loops."""
    return KineticSolver(config, grid, dt).step(state)


@dataclass
class KineticRun:
    records: list[EnergyRecord]
    state: DistributionState
    grid: PhaseGrid
    constants: StabilityConstants | None
    h0_V2: float
    dt: float
    n_steps: int


def simulate(config: SimConfig, strict: bool | None = None) -> KineticRun:
    """Run to t_end, emitting an EnergyRecord every ``output_every`` steps."""
    strict = (not config.exploratory) if strict is None else strict
    if strict:
        problems = validate(config)
        if problems:
            raise ValidationError(problems)
    grid = config.grid()
    state = prepare_initial(config, grid)
    h0_V2 = norms(state.h, grid).v_norm
    try:
        consts = config.constants()
        xi = consts.xi
    except ValueError:
        consts, xi = None, math.nan

    if config.t_end < 0:
        raise ValueError("t_end must be non-negative")
    dt_max = stable_dt(config, grid)
    dt_req = dt_max if config.dt is None else float(config.dt)
    if dt_req > dt_max * (1 + 1e-12):
        raise ValueError(f"dt = {dt_req:g} exceeds the stability bound {dt_max:g}")
    n_steps = int(math.ceil(config.t_end / dt_req - 1e-9)) if config.t_end > 0 else 0
    dt = config.t_end / n_steps if n_steps else dt_req
    solver = KineticSolver(config, grid, dt)

    flux_int = 0.0
    records = [compute_energy(state, config, grid, xi, h0_V2, flux_int)]
    every = max(1, int(config.output_every))
    for n in range(1, n_steps + 1):
        state = solver.step(state)
        if n == n_steps:
            state.t = config.t_end     # avoid round-off drift in the final time
        tr = traces(state.h, config.K)
        w = grid.v_nodes * grid.sqrt_m * grid.dv
        flux_int += dt * float((tr.right - tr.left) @ w)
        if n % every == 0 or n == n_steps:
            records.append(compute_energy(state, config, grid, xi, h0_V2, flux_int))
    return KineticRun(records, state, grid, consts, h0_V2, dt, n_steps)


def run(config: SimConfig, strict: bool | None = None) -> list[EnergyRecord]:
    return simulate(config, strict).records
