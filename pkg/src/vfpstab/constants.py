"""Stability constants: field admissibility, the admissible weight a, decay rate xi."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .operators import LAMBDA

# relative slack for boundary-of-admissibility comparisons on exact reals
REL_TOL = 1e-12

FIELD_FAMILIES = ("zero", "sine")


@dataclass(frozen=True)
class FieldSpec:
    """Time-independent electric field; ``sine`` is E(x) = amplitude * sin(2 pi x)."""

    family: str = "zero"
    amplitude: float = 0.0

    def __post_init__(self):
        if self.family not in FIELD_FAMILIES:
            raise ValueError(f"unsupported field family {self.family!r}; "
                             f"expected one of {FIELD_FAMILIES}")
        if not math.isfinite(self.amplitude):
            raise ValueError("field amplitude must be finite")

    def __call__(self, x):
        if self.family == "zero":
            return np.zeros_like(np.asarray(x, dtype=float))
        return self.amplitude * np.sin(2.0 * np.pi * np.asarray(x, dtype=float))

    def sup_norms(self) -> tuple[float, float, float]:
        """Exact (||E||_inf, ||E'||_inf, ||E'''||_inf)."""
        c = abs(self.amplitude) if self.family == "sine" else 0.0
        return c, 2.0 * math.pi * c, 8.0 * math.pi ** 3 * c

    @property
    def C_E(self) -> float:
        return 2.0 * max(self.sup_norms())

    @property
    def max_abs(self) -> float:
        return self.sup_norms()[0]


class FieldCheck(NamedTuple):
    C_E: float
    passed: bool
    reasons: list[str]
    margin: float       # lambda C_s / 8 - C_E


def validate_field(spec: FieldSpec, lam: float = LAMBDA, C_s: float = 1.0) -> FieldCheck:
    """Check the field bound C_E <= lambda C_s / 8 and the boundary identities.

    The sine family satisfies E(0) = E(1) = 0 and E''(0) = E''(1) exactly.
    """
    if spec.family not in FIELD_FAMILIES:
        raise ValueError(f"unsupported field family {spec.family!r}")
    C_E = spec.C_E
    bound = lam * C_s / 8.0
    reasons = []
    if C_E > bound * (1.0 + REL_TOL):
        reasons.append(
            f"field bound violated: sup-norms of E, E', E''' must be <= C_E/2 <= "
            f"lambda C_s/16, but C_E = {C_E:.6g} > lambda C_s/8 = {bound:.6g}")
    return FieldCheck(C_E, not reasons, reasons, bound - C_E)


class AdmissibleInterval(NamedTuple):
    lower: float
    upper: float
    reason: str = ""

    @property
    def empty(self) -> bool:
        return not self.lower < self.upper

    def __contains__(self, a) -> bool:
        return self.lower < a < self.upper


def admissible_a(lam: float, C_s: float, C_E: float, mode: str = "periodic",
                 C_B_min: float | None = None) -> AdmissibleInterval:
    """Open interval of hypocoercivity weights a giving a positive decay rate.

    lower = 4 C_E / (3 C_s - 2 C_E); upper = (lambda - C_E)/4, further capped by
    min_t C_B(t) in small-field mode.
    """
    den = 3.0 * C_s - 2.0 * C_E
    if den <= 0:
        raise ValueError(f"3 C_s - 2 C_E must be positive, got {den:g}")
    if mode not in ("small-field", "periodic"):
        raise ValueError(f"mode must be 'small-field' or 'periodic', got {mode!r}")
    lower = 4.0 * C_E / den
    upper = (lam - C_E) / 4.0
    reason = ""
    if mode == "small-field" and C_B_min is not None:
        if math.isnan(C_B_min):
            reason = "C_B undefined (zero boundary functionals)"
        elif C_B_min < upper:
            upper = C_B_min
    if not lower < upper:
        if mode == "small-field" and C_B_min is not None and C_B_min <= lower:
            reason = (f"empty interval: min C_B = {C_B_min:g} <= lower bound {lower:g}; "
                      f"small-field stabilization needs C_E < 3C_s/2 - 3C_s/(2 + C_B)")
        else:
            reason = f"empty interval: lower bound {lower:g} >= upper bound {upper:g}"
    return AdmissibleInterval(lower, upper, reason)


def compute_xi(lam: float, C_E: float, C_s: float, a: float, epsilon: float) -> float:
    """Decay rate min{(lambda - C_E - 4a)/eps^2, (a(3C_s - 2C_E) - 4C_E)/8}.

    For eps = 0 only the second (macroscopic) branch applies.
    """
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    iv = admissible_a(lam, C_s, C_E)
    if not a > iv.lower:
        raise ValueError(f"a = {a:g} must exceed 4 C_E/(3 C_s - 2 C_E) = {iv.lower:g}")
    if not a < iv.upper:
        raise ValueError(f"a = {a:g} must stay below (lambda - C_E)/4 = {iv.upper:g}")
    macro = (a * (3.0 * C_s - 2.0 * C_E) - 4.0 * C_E) / 8.0
    if epsilon == 0:
        return macro
    return min((lam - C_E - 4.0 * a) / epsilon ** 2, macro)


def decay_envelope(t, h0_V2: float, xi: float):
    """(5/4) ||h0||_V^2 exp(-2 xi t)."""
    return 1.25 * h0_V2 * np.exp(-2.0 * xi * np.asarray(t, dtype=float))


@dataclass
class StabilityConstants:
    """lambda, C_s, C_E, a and eps with the derived rate and admissible interval."""

    a: float = 0.05
    epsilon: float = 1.0
    C_E: float = 0.0
    C_s: float = 1.0
    lam: float = LAMBDA
    C_B_min: float | None = None
    mode: str = "periodic"
    a_interval: AdmissibleInterval = field(init=False)
    xi: float = field(init=False)

    def __post_init__(self):
        if not 0 < self.C_s <= 1:
            raise ValueError(f"C_s must lie in (0, 1], got {self.C_s}")
        self.a_interval = admissible_a(self.lam, self.C_s, self.C_E, self.mode, self.C_B_min)
        if self.a in self.a_interval:
            self.xi = compute_xi(self.lam, self.C_E, self.C_s, self.a, self.epsilon)
        else:
            self.xi = math.nan

    @property
    def valid(self) -> bool:
        return self.xi > 0
