"""Post-processing of run records: decay fits, envelope checks, kinetic vs limit comparison."""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .boundary import FeedbackMatrix
from .constants import decay_envelope
from .kinetic import SimConfig, prepare_initial, simulate
from .macro import MacroConfig, run_macro
from .operators import density

# records below this are treated as zero / denormal
ZERO_FLOOR = 1e-300
# squared norms this far below the largest record sit on the round-off plateau
ROUNDOFF_REL = 1e-26
INTERIOR_FLOOR = 1e-14


class DecayFit(NamedTuple):
    rate: float
    intercept: float
    r2: float
    n_used: int


def fit_decay_rate(records: Sequence, window: tuple[float, float] | None = None) -> DecayFit:
    """Least-squares line through (t, ln v_norm); rate = -slope / 2.

    The default window drops the first 10% of the record span.  Records that
    reached zero or the round-off plateau (relative to the largest record) end
    the window early, with a warning.
    """
    t = np.array([r.t for r in records], dtype=float)
    y = np.array([r.v_norm for r in records], dtype=float)
    if t.size == 0:
        raise ValueError("no records to fit")
    floor = max(ZERO_FLOOR, ROUNDOFF_REL * float(np.max(y)))
    if window is None:
        t0, t1 = t[0], t[-1]
        window = (t0 + 0.1 * (t1 - t0), t1)
    lo, hi = window
    sel = (t >= lo - 1e-12) & (t <= hi + 1e-12)
    t, y = t[sel], y[sel]
    bad = np.flatnonzero(~(y > floor))
    if bad.size:
        cut = bad[0]
        warnings.warn(f"decay fit window truncated at t = {t[cut]:g}: v_norm "
                      f"{y[cut]:.3g} is at or below the floor {floor:.3g}", stacklevel=2)
        t, y = t[:cut], y[:cut]
    if t.size < 5:
        raise ValueError(f"need at least 5 usable records in the fit window, got {t.size}")
    ly = np.log(y)
    tc = t - t.mean()
    slope = float(tc @ (ly - ly[0]) / (tc @ tc))     # shift by ly[0]: constants give exactly 0
    intercept = float(ly.mean() - slope * t.mean())
    yc = ly - ly.mean()
    ss_tot = float(yc @ yc)
    ss_res = float(np.sum((yc - slope * tc) ** 2))
    if ss_tot <= 1e-28 * ly.size * max(1.0, float(np.max(np.abs(ly)))) ** 2:
        r2 = 1.0          # flat data: the line fits exactly
    else:
        r2 = 1.0 - ss_res / ss_tot
    rate = -slope / 2.0
    return DecayFit(float(rate) + 0.0, float(intercept), r2, int(t.size))


def check_envelope(records: Sequence, xi: float, h0_V2: float,
                   allowance: float = 0.0) -> tuple[float, float | None]:
    """Largest v_norm - (1 + allowance) envelope(t) and the first time it is positive."""
    if not xi > 0:
        raise ValueError("xi must be positive")
    t = np.array([r.t for r in records], dtype=float)
    y = np.array([r.v_norm for r in records], dtype=float)
    gap = y - (1.0 + allowance) * decay_envelope(t, h0_V2, xi)
    pos = np.flatnonzero(gap > 0)
    first = float(t[pos[0]]) if pos.size else None
    return float(np.max(gap)), first


class LayerIndicator(NamedTuple):
    value: float
    saturated: bool


def boundary_layer_indicator(sigma_kin, sigma_macro, margin_cells: int = 3) -> LayerIndicator:
    """Max error in the ``margin_cells`` next to each wall over max error in the middle third.

    ``saturated`` is set when the interior error is below 1e-14; the value is
    then nan (nothing anywhere) or inf.
    """
    a = np.asarray(sigma_kin, dtype=float)
    b = np.asarray(sigma_macro, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("sigma arrays must be 1D with the same length")
    n = a.size
    if margin_cells < 1 or 2 * margin_cells > n:
        raise ValueError("margin_cells must be at least 1 and fit twice in the grid")
    err = np.abs(a - b)
    edge = max(err[:margin_cells].max(), err[-margin_cells:].max())
    mid = err[n // 3: n - n // 3].max()
    if mid < INTERIOR_FLOOR:
        return LayerIndicator(math.nan if edge < INTERIOR_FLOOR else math.inf, True)
    return LayerIndicator(float(edge / mid), False)


def l2_difference(a, b, dx: float) -> float:
    d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    return float(np.sqrt(np.sum(d * d) * dx))


@dataclass
class APRow:
    epsilon: float
    l2_diff: float
    layer_indicator: float
    saturated: bool
    sigma_kin: np.ndarray
    sigma_macro: np.ndarray


def _kinetic_density(config: SimConfig) -> np.ndarray:
    r = simulate(config)
    return density(r.state.h, r.grid)


def ap_study(base_config: SimConfig, epsilons: Sequence[float],
             reference_K0: FeedbackMatrix | None = None, margin_cells: int = 3,
             n_jobs: int = 1) -> list[APRow]:
    """Compare kinetic densities at t_end with the drift-diffusion solution.

    Every kinetic run shares the grid, field and initial data of ``base_config``.
    The limit run starts from the same discrete density and uses
    ``reference_K0`` (default: the limit of the kinetic feedback matrix).
    Rows come back ordered by decreasing epsilon.
    """
    eps = sorted({float(e) for e in epsilons}, reverse=True)
    if not eps:
        raise ValueError("need at least one epsilon")
    for e in eps:
        if not (e > 0 and math.isfinite(e)):
            raise ValueError(f"epsilon must be positive and finite, got {e}")
    configs = [base_config.replace(epsilon=e, output_every=10 ** 9) for e in eps]

    grid = base_config.grid()
    sigma0 = density(prepare_initial(base_config, grid).h, grid)
    K0 = reference_K0 if reference_K0 is not None else base_config.K.limit()
    mcfg = MacroConfig(nx=base_config.nx, field=base_config.field, K0=K0,
                       t_end=base_config.t_end, initial="table", table=sigma0)
    sigma_macro = run_macro(mcfg)[-1][1]

    if n_jobs > 1 and len(configs) > 1:
        with ProcessPoolExecutor(max_workers=min(n_jobs, len(configs))) as pool:
            kin = list(pool.map(_kinetic_density, configs))
    else:
        kin = [_kinetic_density(c) for c in configs]

    rows = []
    for e, sk in zip(eps, kin):
        ind = boundary_layer_indicator(sk, sigma_macro, margin_cells)
        rows.append(APRow(e, l2_difference(sk, sigma_macro, grid.dx), ind.value,
                          ind.saturated, sk, sigma_macro))
    return rows
