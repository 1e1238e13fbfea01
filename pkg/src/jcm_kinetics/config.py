"""Line-oriented ``key=value`` run configuration.

One assignment per line, ``#`` starts a comment, complex numbers are written
``re,im`` (a bare real is accepted).  Keys are the field names below; anything
left out takes the default, which is the standard test case: ε = ω = 1,
coupling 0.5, excited atom, coherent field of amplitude 5.

``alpha`` is shorthand for ``B0=alpha, nu0=0, x0=1, y0=0`` and may not be
combined with any of those keys.  If ``x0`` (``u0``) is omitted it is fixed by
the canonicity constraint from ``y0`` (``v0``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .dynamics import RhsOptions
from .integrator import METHODS, IntegratorOptions
from .model import BosonSector, FermionSector, GaussianState, ModelParams, PhysicalityError

MODES = ("exact", "meanfield", "collisional", "compare")
DEFAULT_T_MAX = 8.0


class ConfigError(ValueError):
    def __init__(self, message, line=None):
        super().__init__(f"line {line}: {message}" if line else message)
        self.line = line


def _real(text):
    val = float(text)
    if not math.isfinite(val):
        raise ValueError(f"not finite: {text!r}")
    return val


def _complex(text):
    parts = text.split(",")
    if len(parts) == 1:
        return complex(_real(parts[0]), 0.0)
    if len(parts) == 2:
        return complex(_real(parts[0]), _real(parts[1]))
    raise ValueError(f"expected 're,im', got {text!r}")


def _int_or_auto(text):
    if text.lower() == "auto":
        return None
    val = int(text)
    if val < 1:
        raise ValueError("n_max must be a positive integer")
    return val


def _bool(text):
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _choice(options):
    def parse(text):
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {text!r}")
        return text
    return parse


FIELDS = {
    "epsilon": _real, "omega": _real, "coupling": _real,
    "alpha": _complex, "B0": _complex, "nu0": _real, "x0": _real, "y0": _complex,
    "u0": _complex, "v0": _complex, "p1_0": _real, "pm1_0": _real,
    "dt": _real, "t_max": _real, "method": _choice(METHODS), "rel_tol": _real, "abs_tol": _real,
    "renormalize": _bool, "record_every": int,
    "n_max": _int_or_auto, "mode": _choice(MODES), "out": str,
    "depolarization_guard": _real, "gauge_guard": _real, "clamp": _bool,
    "gauge": _choice(("transport", "real")), "i1_phase": _choice(("derived", "flipped")),
    "window": _real, "threshold": _real,
}


@dataclass(frozen=True)
class RunConfig:
    params: ModelParams = ModelParams()
    initial: GaussianState = GaussianState.coherent_excited(5.0)
    integrator: IntegratorOptions = IntegratorOptions(t_max=DEFAULT_T_MAX)
    rhs: RhsOptions = RhsOptions()
    n_max: int | None = None  # None: smallest n with a negligible Poisson tail
    mode: str = "compare"
    out: str = "."
    window: float = 6.0
    threshold: float = 0.2
    lines: dict = field(default_factory=dict, compare=False)  # key -> source line


def _tokens(text):
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected key=value, got {line!r}", lineno)
        key, val = (p.strip() for p in line.split("=", 1))
        yield lineno, key, val


def parse_config(text: str) -> RunConfig:
    """Parse and validate; every error names the offending line."""
    vals, lines = {}, {}
    for lineno, key, val in _tokens(text):
        if key not in FIELDS:
            raise ConfigError(f"unknown key {key!r}", lineno)
        if key in vals:
            raise ConfigError(f"duplicate key {key!r} (first set on line {lines[key]})", lineno)
        try:
            vals[key] = FIELDS[key](val)
        except ValueError as err:
            raise ConfigError(f"malformed value for {key}: {err}", lineno) from None
        lines[key] = lineno

    def where(*keys):
        hits = [lines[k] for k in keys if k in lines]
        return max(hits) if hits else None

    if "alpha" in vals:
        clash = [k for k in ("B0", "nu0", "x0", "y0") if k in vals]
        if clash:
            raise ConfigError(f"alpha shorthand conflicts with {', '.join(clash)}", where("alpha", *clash))
        vals["B0"] = vals.pop("alpha")

    try:
        params = ModelParams(*(vals.get(k, d) for k, d in
                               (("epsilon", 1.0), ("omega", 1.0), ("coupling", 0.5))))
    except ValueError as err:
        raise ConfigError(str(err), where("epsilon", "omega", "coupling")) from None

    y0 = vals.get("y0", 0j)
    v0 = vals.get("v0", 0j)
    x0 = vals.get("x0", math.sqrt(1.0 + abs(y0) ** 2))
    u0 = vals.get("u0", complex(math.sqrt(max(0.0, 1.0 - abs(v0) ** 2))))
    boson = BosonSector(B=vals.get("B0", 5 + 0j), nu=vals.get("nu0", 0.0), x=x0, y=y0)
    fermion = FermionSector(u=u0, v=v0, p1=vals.get("p1_0", 1.0), pm1=vals.get("pm1_0", 0.0))
    try:
        boson.check()
    except PhysicalityError as err:
        raise ConfigError(f"initial field state: {err}", where("B0", "nu0", "x0", "y0", "alpha")) from None
    try:
        fermion.check()
    except PhysicalityError as err:
        raise ConfigError(f"initial atom state: {err}", where("u0", "v0", "p1_0", "pm1_0")) from None

    ikeys = ("dt", "t_max", "method", "rel_tol", "abs_tol", "renormalize", "record_every")
    try:
        integ = replace(IntegratorOptions(t_max=DEFAULT_T_MAX), **{k: vals[k] for k in ikeys if k in vals})
    except ValueError as err:
        raise ConfigError(f"integrator: {err}", where(*ikeys)) from None
    rkeys = ("depolarization_guard", "gauge_guard", "clamp", "gauge", "i1_phase")
    try:
        rhs = RhsOptions(**{k: vals[k] for k in rkeys if k in vals})
        if rhs.depolarization_guard < 0 or rhs.gauge_guard < 0:
            raise ValueError("guards must be nonnegative")
    except ValueError as err:
        raise ConfigError(str(err), where(*rkeys)) from None

    window = vals.get("window", min(6.0, integ.t_max))
    if not 0 <= window <= integ.t_max:
        raise ConfigError(f"window {window} outside [0, t_max={integ.t_max}]", where("window", "t_max"))
    threshold = vals.get("threshold", 0.2)
    if threshold <= 0:
        raise ConfigError("threshold must be positive", where("threshold"))

    return RunConfig(params=params, initial=GaussianState(boson, fermion), integrator=integ, rhs=rhs,
                     n_max=vals.get("n_max"), mode=vals.get("mode", "compare"), out=vals.get("out", "."),
                     window=window, threshold=threshold, lines=lines)


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
