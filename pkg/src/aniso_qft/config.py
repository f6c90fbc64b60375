"""Run configuration: a flat ``key = value`` document with dotted sections.

Example::

    # anisotropic tanh step, one mode
    model.kind = TanhStep
    model.A1 = 2
    model.A2 = 2
    model.A3 = 2
    model.B1 = 0.5
    model.B2 = -0.5
    model.B3 = 0
    model.rho = 1
    mass = 1
    window.eta0 = -10
    window.eta1 = 10
    output_times = [-5, 0, 5, 10]
    mode.k = 1
    mode.theta = 1.0471975511965976
    mode.phi = 0.7853981633974483

Values are numbers, quoted or bare strings, ``true``/``false`` or lists in
brackets.  Unknown keys are fatal.
"""

from __future__ import annotations

import ast
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .background import BackgroundModel, DomainError, Mode, ModelKind
from .stress_tensor import TII_VARIANTS, MomentumGrid

MODEL_KEYS = {
    ModelKind.STATIC: ("c1", "c2", "c3"),
    ModelKind.POWER_LAW: ("q1", "q2", "q3", "eta_ref"),
    ModelKind.EXPONENTIAL: ("lambda1", "lambda2", "lambda3"),
    ModelKind.TANH_STEP: ("A1", "A2", "A3", "B1", "B2", "B3", "rho"),
    ModelKind.TABULATED: ("table",),
}

KNOWN_KEYS = (
    ["model.kind"]
    + sorted({f"model.{k}" for keys in MODEL_KEYS.values() for k in keys})
    + ["mass", "window.eta0", "window.eta1", "output_times",
       "mode.k", "mode.theta", "mode.phi",
       "spectrum.k_min", "spectrum.k_max", "spectrum.n_k", "spectrum.theta", "spectrum.phi",
       "spectrum.angular_grid",
       "grid.kmax", "grid.npanels", "grid.nk", "grid.ntheta", "grid.nphi", "grid.tail_exponent",
       "grid.max_refine",
       "tol.ode", "tol.quad", "tii_variant", "output.path", "output.format"]
)
SECTIONS = sorted({k.split(".")[0] for k in KNOWN_KEYS})

DEFAULT_TOL_ODE = 1e-10
DEFAULT_TOL_QUAD = 1e-6


class ConfigError(ValueError):
    """Parse or validation failure; the message names the line or key."""


@dataclass(frozen=True)
class SpectrumSpec:
    k_min: float = 0.1
    k_max: float = 10.0
    n_k: int = 20
    theta: float = 0.0
    phi: float = 0.0
    angular_grid: bool = False


@dataclass(frozen=True)
class RunConfig:
    model: BackgroundModel
    mass: float = 0.0
    eta0: float = 0.0
    eta1: float = 1.0
    output_times: tuple = ()
    mode: Mode | None = None
    spectrum: SpectrumSpec = field(default_factory=SpectrumSpec)
    grid: MomentumGrid = field(default_factory=MomentumGrid)
    max_refine: int = 3
    tol_ode: float = DEFAULT_TOL_ODE
    tol_quad: float = DEFAULT_TOL_QUAD
    tii_variant: str = "printed"
    output_path: str | None = None
    output_format: str = "csv"

    @property
    def window(self):
        return (self.eta0, self.eta1)


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

def _osa_distance(a: str, b: str) -> int:
    """Edit distance counting an adjacent transposition as one edit."""
    d = np.zeros((len(a) + 1, len(b) + 1), dtype=int)
    d[:, 0] = np.arange(len(a) + 1)
    d[0, :] = np.arange(len(b) + 1)
    for i in range(1, len(a) + 1):
        for j in range(1, len(b) + 1):
            cost = a[i - 1] != b[j - 1]
            d[i, j] = min(d[i - 1, j] + 1, d[i, j - 1] + 1, d[i - 1, j - 1] + cost)
            if i > 1 and j > 1 and a[i - 1] == b[j - 2] and a[i - 2] == b[j - 1]:
                d[i, j] = min(d[i, j], d[i - 2, j - 2] + 1)
    return int(d[-1, -1])


def suggest_key(key: str) -> str | None:
    candidates = KNOWN_KEYS if "." in key else KNOWN_KEYS + SECTIONS
    best = min(candidates, key=lambda c: (_osa_distance(key, c), abs(len(c) - len(key)), c))
    limit = max(2, len(key) // 3)
    return best if _osa_distance(key, best) <= limit else None


def _parse_value(text: str):
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text


def parse_document(text: str) -> dict:
    """Split a document into ``{key: (value, line_number)}`` without validation."""
    entries = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key or not value:
            raise ConfigError(f"line {lineno}: empty key or value")
        if key not in KNOWN_KEYS:
            hint = suggest_key(key)
            msg = f"line {lineno}: unknown key {key!r}"
            raise ConfigError(msg + (f"; did you mean {hint!r}?" if hint else ""))
        if key in entries:
            raise ConfigError(f"line {lineno}: duplicate key {key!r} (first set on line {entries[key][1]})")
        entries[key] = (_parse_value(value), lineno)
    return entries


class _Reader:
    def __init__(self, entries):
        self.entries = entries
        self.used = set()

    def has(self, key):
        return key in self.entries

    def get(self, key, default=None, kind=float):
        if key not in self.entries:
            return default
        self.used.add(key)
        value, lineno = self.entries[key]
        try:
            if kind is float:
                if isinstance(value, bool):
                    raise TypeError
                return float(value)
            if kind is int:
                if isinstance(value, bool) or float(value) != int(value):
                    raise TypeError
                return int(value)
            if kind is bool:
                if not isinstance(value, bool):
                    raise TypeError
                return value
            if kind is list:
                if isinstance(value, (int, float)) and not isinstance(value, bool):
                    value = [value]
                return [float(v) for v in value]
            return str(value)
        except (TypeError, ValueError):
            raise ConfigError(f"line {lineno}: key {key!r} has invalid value {value!r}") from None

    def require(self, key, kind=float):
        if key not in self.entries:
            raise ConfigError(f"missing required key {key!r}")
        return self.get(key, kind=kind)


def _build_model(r: _Reader, base_dir: Path) -> BackgroundModel:
    kind_text = r.get("model.kind", kind=str)
    if kind_text is None:
        raise ConfigError("missing required key 'model.kind'")
    try:
        kind = ModelKind.parse(kind_text)
    except ValueError as exc:
        raise ConfigError(f"model.kind: {exc}") from None
    allowed = {f"model.{k}" for k in MODEL_KEYS[kind]}
    for key in r.entries:
        if key.startswith("model.") and key != "model.kind" and key not in allowed:
            raise ConfigError(f"line {r.entries[key][1]}: key {key!r} is not a parameter of "
                              f"{kind.value} (allowed: {sorted(allowed)})")
    try:
        if kind is ModelKind.STATIC:
            return BackgroundModel.static([r.get(f"model.c{i}", 1.0) for i in (1, 2, 3)])
        if kind is ModelKind.POWER_LAW:
            return BackgroundModel.power_law([r.require(f"model.q{i}") for i in (1, 2, 3)],
                                             r.get("model.eta_ref", 1.0))
        if kind is ModelKind.EXPONENTIAL:
            return BackgroundModel.exponential([r.require(f"model.lambda{i}") for i in (1, 2, 3)])
        if kind is ModelKind.TANH_STEP:
            return BackgroundModel.tanh_step([r.require(f"model.A{i}") for i in (1, 2, 3)],
                                             [r.get(f"model.B{i}", 0.0) for i in (1, 2, 3)],
                                             r.get("model.rho", 1.0))
        path = Path(r.require("model.table", kind=str))
        if not path.is_absolute():
            path = base_dir / path
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        if data.shape[1] != 4:
            raise ConfigError(f"model.table: {path} needs columns eta,alpha1,alpha2,alpha3")
        return BackgroundModel.tabulated(data[:, 0], data[:, 1:])
    except (DomainError, ValueError, OSError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"model: {exc}") from None


def _check_tol(name, value):
    if not 0 < value <= 1e-2:
        raise ConfigError(f"{name} must lie in (0, 1e-2], got {value}")


def parse_config(text: str, base_dir: str | Path = ".") -> RunConfig:
    """Parse and validate a configuration document."""
    r = _Reader(parse_document(text))
    model = _build_model(r, Path(base_dir))

    mass = r.get("mass", 0.0)
    if mass < 0:
        raise ConfigError("mass must be non-negative")

    eta0 = r.require("window.eta0")
    eta1 = r.require("window.eta1")
    if not eta0 < eta1:
        raise ConfigError(f"window: eta0 < eta1 required (got eta0={eta0}, eta1={eta1})")
    lo, hi = model.validity_window()
    if eta0 < lo or eta1 > hi or (model.kind is ModelKind.POWER_LAW and eta0 <= 0):
        raise ConfigError(f"window: [{eta0}, {eta1}] leaves the {model.kind.value} model's domain")

    times = r.get("output_times", kind=list)
    times = tuple(sorted(set(times))) if times else (eta1,)
    if times[0] < eta0 or times[-1] > eta1:
        raise ConfigError("output_times: every time must lie inside the window")

    mode = None
    if r.has("mode.k"):
        try:
            mode = Mode(r.get("mode.k"), r.get("mode.theta", 0.0), r.get("mode.phi", 0.0))
        except ValueError as exc:
            raise ConfigError(f"mode: {exc}") from None
    elif r.has("mode.theta") or r.has("mode.phi"):
        raise ConfigError("mode: mode.k is required when a mode direction is given")

    spectrum = SpectrumSpec(
        k_min=r.get("spectrum.k_min", 0.1), k_max=r.get("spectrum.k_max", 10.0),
        n_k=r.get("spectrum.n_k", 20, kind=int), theta=r.get("spectrum.theta", 0.0),
        phi=r.get("spectrum.phi", 0.0), angular_grid=r.get("spectrum.angular_grid", False, kind=bool))
    if not 0 < spectrum.k_min <= spectrum.k_max or spectrum.n_k < 1:
        raise ConfigError("spectrum: need 0 < k_min <= k_max and n_k >= 1")

    try:
        default = MomentumGrid()
        grid = MomentumGrid(
            k_max=r.get("grid.kmax", default.k_max), n_panels=r.get("grid.npanels", default.n_panels, kind=int),
            n_k=r.get("grid.nk", default.n_k, kind=int), n_theta=r.get("grid.ntheta", default.n_theta, kind=int),
            n_phi=r.get("grid.nphi", default.n_phi, kind=int),
            tail_exponent=r.get("grid.tail_exponent", default.tail_exponent))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"grid: {exc}") from None
    max_refine = r.get("grid.max_refine", 3, kind=int)
    if max_refine < 0:
        raise ConfigError("grid.max_refine must be non-negative")

    tol_ode = r.get("tol.ode", DEFAULT_TOL_ODE)
    tol_quad = r.get("tol.quad", DEFAULT_TOL_QUAD)
    _check_tol("tol.ode", tol_ode)
    _check_tol("tol.quad", tol_quad)

    variant = r.get("tii_variant", "printed", kind=str)
    if variant not in TII_VARIANTS:
        raise ConfigError(f"tii_variant must be one of {TII_VARIANTS}, got {variant!r}")
    fmt = r.get("output.format", "csv", kind=str)
    if fmt not in ("csv", "json"):
        raise ConfigError(f"output.format must be csv or json, got {fmt!r}")

    return RunConfig(model=model, mass=mass, eta0=eta0, eta1=eta1, output_times=times, mode=mode,
                     spectrum=spectrum, grid=grid, max_refine=max_refine, tol_ode=tol_ode,
                     tol_quad=tol_quad, tii_variant=variant,
                     output_path=r.get("output.path", None, kind=str), output_format=fmt)


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    return parse_config(path.read_text(), base_dir=path.parent)
