"""INI-style run configuration.

Example::

    [grid]
    nx = 64
    nv = 64
    vmax = 8

    [kinetic]
    epsilon = 1
    t_end = 20
    output_every = 100

    [feedback]
    profile = periodic        ; periodic | reflective | symmetric | custom
    # k = 0.5                 ; for profile = symmetric
    # k00 = 0  k01 = 1  k10 = 1  k11 = 0   (custom; optional k00_0 .. k11_0)

    [field]
    family = zero             ; zero | sine
    amplitude = 0

    [constants]
    a = 0.05
    C_s = 1
    lambda = 0.25

    [initial]
    family = cosine-density   ; cosine-density | odd-flux | custom-table
    amplitude = 1
    mode = 1
    # table = f0.npy          ; (nx, nv) array of f0 values

    [macro]
    # nx, t_end default to the [grid] / [kinetic] values
    implicit = false
    initial = cosine

    [sweep]
    epsilons = 0.5, 0.1, 0.02
    reference = limit         ; limit | periodic
    margin_cells = 3
    jobs = 1

Every section is optional.  Unknown sections or keys are errors.
"""
from __future__ import annotations

import configparser
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .boundary import FeedbackMatrix
from .constants import FieldSpec
from .kinetic import InitialCondition, SimConfig
from .macro import MacroConfig
from .operators import LAMBDA

KNOWN = {
    "grid": {"nx", "nv", "vmax", "tail_tol"},
    "kinetic": {"epsilon", "t_end", "dt", "output_every", "exploratory"},
    "feedback": {"profile", "k", "k00", "k01", "k10", "k11", "k00_0", "k01_0", "k10_0", "k11_0"},
    "field": {"family", "amplitude"},
    "constants": {"a", "c_s", "lambda"},
    "initial": {"family", "amplitude", "mode", "table"},
    "macro": {"nx", "t_end", "dt", "implicit", "initial", "amplitude", "mode", "output_every"},
    "sweep": {"epsilons", "reference", "margin_cells", "jobs"},
}


class ConfigError(ValueError):
    pass


@dataclass
class RunSetup:
    kinetic: SimConfig
    macro: MacroConfig
    epsilons: list[float]
    reference: str
    margin_cells: int
    jobs: int


class _Reader:
    def __init__(self, cp: configparser.ConfigParser, path: str, lines: dict):
        self.cp = cp
        self.path = path
        self.lines = lines

    def where(self, sec: str, key: str) -> str:
        line = self.lines.get((sec, key))
        loc = f"{self.path}:{line}" if line else self.path
        return f"{loc}: {sec}.{key}"

    def has(self, sec, key):
        return self.cp.has_option(sec, key)

    def raw(self, sec, key, default=None):
        if not self.has(sec, key):
            return default
        return self.cp.get(sec, key).strip()

    def real(self, sec, key, default=None, positive=False):
        s = self.raw(sec, key)
        if s is None:
            return default
        try:
            val = float(s)
        except ValueError:
            raise ConfigError(f"{self.where(sec, key)}: expected a real number, got {s!r}") from None
        if not math.isfinite(val):
            raise ConfigError(f"{self.where(sec, key)}: must be finite")
        if positive and not val > 0:
            raise ConfigError(f"{self.where(sec, key)}: must be positive, got {val:g}")
        return val

    def integer(self, sec, key, default=None, minimum=None):
        s = self.raw(sec, key)
        if s is None:
            return default
        try:
            val = int(s)
        except ValueError:
            raise ConfigError(f"{self.where(sec, key)}: expected an integer, got {s!r}") from None
        if minimum is not None and val < minimum:
            raise ConfigError(f"{self.where(sec, key)}: must be >= {minimum}, got {val}")
        return val

    def boolean(self, sec, key, default=False):
        if not self.has(sec, key):
            return default
        try:
            return self.cp.getboolean(sec, key)
        except ValueError:
            raise ConfigError(f"{self.where(sec, key)}: expected true/false") from None

    def choice(self, sec, key, options, default):
        s = self.raw(sec, key, default)
        if s not in options:
            raise ConfigError(f"{self.where(sec, key)}: expected one of {', '.join(options)}, got {s!r}")
        return s


def _line_index(text: str) -> dict:
    """(section, key) -> 1-based line number, for diagnostics."""
    out, sec = {}, None
    for n, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if not s or s[0] in "#;":
            continue
        if s.startswith("[") and s.endswith("]"):
            sec = s[1:-1].strip().lower()
        elif sec and ("=" in s or ":" in s):
            key = s.split("=", 1)[0].split(":", 1)[0].strip().lower()
            out.setdefault((sec, key), n)
    return out


def _feedback(r: _Reader) -> FeedbackMatrix:
    sec = "feedback"
    profile = r.choice(sec, "profile", ("periodic", "reflective", "symmetric", "custom"),
                       "custom" if r.has(sec, "k00") else "periodic")
    if profile == "periodic":
        return FeedbackMatrix.periodic()
    if profile == "reflective":
        return FeedbackMatrix.reflective()
    if profile == "symmetric":
        if not r.has(sec, "k"):
            raise ConfigError(f"{r.where(sec, 'k')}: required for profile = symmetric")
        return FeedbackMatrix.symmetric(r.real(sec, "k"))
    vals = {}
    for name in ("k00", "k01", "k10", "k11"):
        if not r.has(sec, name):
            raise ConfigError(f"{r.where(sec, name)}: required for profile = custom")
        vals[name] = r.real(sec, name)
        vals[name + "_0"] = r.real(sec, name + "_0")
    return FeedbackMatrix(**vals)


def _initial(r: _Reader, base: Path) -> InitialCondition:
    sec = "initial"
    family = r.choice(sec, "family", ("cosine-density", "odd-flux", "custom-table"),
                      "cosine-density")
    table = None
    if family == "custom-table":
        p = r.raw(sec, "table")
        if not p:
            raise ConfigError(f"{r.where(sec, 'table')}: required for family = custom-table")
        path = (base / p) if not Path(p).is_absolute() else Path(p)
        try:
            table = np.load(path) if path.suffix == ".npy" else np.loadtxt(path, delimiter=",")
        except (OSError, ValueError) as exc:
            raise ConfigError(f"{r.where(sec, 'table')}: cannot read {path}: {exc}") from None
    return InitialCondition(family, r.real(sec, "amplitude", 1.0),
                            r.integer(sec, "mode", 1, minimum=0), table)


def parse_config(text: str, path: str = "<config>", base: Path | None = None) -> RunSetup:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        cp.read_string(text, source=path)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    r = _Reader(cp, path, _line_index(text))
    for sec in cp.sections():
        if sec not in KNOWN:
            raise ConfigError(f"{path}: unknown section [{sec}]")
        for key in cp.options(sec):
            if key not in KNOWN[sec]:
                raise ConfigError(f"{r.where(sec, key)}: unknown key")

    base = base or Path(".")
    try:
        field = FieldSpec(r.choice("field", "family", ("zero", "sine"), "zero"),
                          r.real("field", "amplitude", 0.0))
        K = _feedback(r)
        initial = _initial(r, base)
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{path}: {exc}") from None

    nx = r.integer("grid", "nx", 64, minimum=4)
    t_end = r.real("kinetic", "t_end", 1.0)
    if t_end < 0:
        raise ConfigError(f"{r.where('kinetic', 't_end')}: must be non-negative")
    eps = r.real("kinetic", "epsilon", 1.0)
    if not eps > 0:
        raise ConfigError(f"{r.where('kinetic', 'epsilon')}: must be positive, got {eps:g}")
    kin = SimConfig(
        nx=nx,
        nv=r.integer("grid", "nv", 64, minimum=8),
        vmax=r.real("grid", "vmax", 8.0, positive=True),
        tail_tol=r.real("grid", "tail_tol", 1e-12, positive=True),
        epsilon=eps,
        K=K,
        field=field,
        a=r.real("constants", "a", 0.05),
        C_s=r.real("constants", "c_s", 1.0, positive=True),
        lam=r.real("constants", "lambda", LAMBDA, positive=True),
        t_end=t_end,
        dt=r.real("kinetic", "dt", None, positive=True),
        output_every=r.integer("kinetic", "output_every", 10, minimum=1),
        initial=initial,
        exploratory=r.boolean("kinetic", "exploratory", False),
    )

    m_t_end = r.real("macro", "t_end", t_end)
    if m_t_end < 0:
        raise ConfigError(f"{r.where('macro', 't_end')}: must be non-negative")
    macro = MacroConfig(
        nx=r.integer("macro", "nx", nx, minimum=4),
        field=field,
        K0=K.limit(),
        t_end=m_t_end,
        dt=r.real("macro", "dt", None, positive=True),
        implicit=r.boolean("macro", "implicit", False),
        initial=r.choice("macro", "initial", ("cosine", "sine", "constant", "zero"), "cosine"),
        amplitude=r.real("macro", "amplitude", 1.0),
        mode=r.integer("macro", "mode", 1, minimum=0),
        output_every=r.integer("macro", "output_every", 0, minimum=0),
    )

    eps_list = [eps]
    if r.has("sweep", "epsilons"):
        eps_list = []
        for tok in r.raw("sweep", "epsilons").replace(",", " ").split():
            try:
                e = float(tok)
            except ValueError:
                raise ConfigError(f"{r.where('sweep', 'epsilons')}: bad value {tok!r}") from None
            if not (e > 0 and math.isfinite(e)):
                raise ConfigError(f"{r.where('sweep', 'epsilons')}: epsilon must be positive, got {tok}")
            eps_list.append(e)
        if not eps_list:
            raise ConfigError(f"{r.where('sweep', 'epsilons')}: empty list")
    return RunSetup(
        kinetic=kin, macro=macro, epsilons=eps_list,
        reference=r.choice("sweep", "reference", ("limit", "periodic"), "limit"),
        margin_cells=r.integer("sweep", "margin_cells", 3, minimum=1),
        jobs=r.integer("sweep", "jobs", 1, minimum=1),
    )


def load_config(path) -> RunSetup:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from None
    return parse_config(text, str(p), p.parent)
