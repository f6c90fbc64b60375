"""Scale-factor models and the per-mode geometric quantities built from them.

A background is three axis scale factors alpha_i(eta) of a Bianchi-I metric
written in the evolution parameter eta.  Everything the mode equations need
(mu, K0, g, C_i, Q and the couplings W, Wt) is evaluated here, vectorised
over arrays of times and mode directions.

Derivatives are analytic throughout (chain rule from d alpha_i / d eta);
finite differences appear only in the test-suite.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.interpolate import CubicSpline


class DomainError(ValueError):
    """A geometric quantity was requested outside its domain of definition."""


class OutsideTableError(DomainError):
    """eta lies outside the sample grid of a tabulated background."""


class ModelKind(str, enum.Enum):
    STATIC = "Static"
    POWER_LAW = "PowerLaw"
    EXPONENTIAL = "Exponential"
    TANH_STEP = "TanhStep"
    TABULATED = "Tabulated"

    @classmethod
    def parse(cls, text: str) -> "ModelKind":
        norm = text.replace("_", "").replace("-", "").lower()
        for kind in cls:
            if kind.value.lower() == norm:
                return kind
        raise ValueError(f"unknown model kind {text!r}; expected one of "
                         f"{[k.value for k in cls]}")


def _triple(values, name: str) -> tuple[float, float, float]:
    arr = tuple(float(v) for v in values)
    if len(arr) != 3:
        raise ValueError(f"{name} needs three per-axis values, got {len(arr)}")
    return arr


@dataclass(frozen=True)
class BackgroundModel:
    """Immutable description of the three scale factors.

    Use the constructors (:meth:`static`, :meth:`power_law`, ...) rather than
    filling ``params`` by hand; they validate the per-kind invariants.
    """

    kind: ModelKind
    params: dict = field(default_factory=dict, compare=False)
    _spline: CubicSpline | None = field(default=None, repr=False, compare=False)

    # -- constructors -----------------------------------------------------

    @classmethod
    def static(cls, c=(1.0, 1.0, 1.0)) -> "BackgroundModel":
        c = _triple(c, "c")
        if min(c) <= 0:
            raise DomainError("static scale factors must be positive")
        return cls(ModelKind.STATIC, {"c": c})

    @classmethod
    def power_law(cls, q, eta_ref: float = 1.0) -> "BackgroundModel":
        if eta_ref <= 0:
            raise DomainError("power-law reference time must be positive")
        return cls(ModelKind.POWER_LAW, {"q": _triple(q, "q"), "eta_ref": float(eta_ref)})

    @classmethod
    def exponential(cls, lam) -> "BackgroundModel":
        return cls(ModelKind.EXPONENTIAL, {"lam": _triple(lam, "lambda")})

    @classmethod
    def tanh_step(cls, A, B, rho: float = 1.0) -> "BackgroundModel":
        A, B = _triple(A, "A"), _triple(B, "B")
        if rho <= 0:
            raise DomainError("tanh steepness rho must be positive")
        for a, b in zip(A, B):
            if not a > abs(b):
                raise DomainError(f"tanh step needs A_i > |B_i| (got A={a}, B={b})")
        return cls(ModelKind.TANH_STEP, {"A": A, "B": B, "rho": float(rho)})

    @classmethod
    def tabulated(cls, eta, alpha) -> "BackgroundModel":
        eta = np.asarray(eta, dtype=float)
        alpha = np.asarray(alpha, dtype=float)
        if eta.ndim != 1 or alpha.shape != (eta.size, 3):
            raise ValueError("tabulated model needs eta of shape (n,) and alpha of shape (n, 3)")
        if eta.size < 4:
            raise ValueError("tabulated model needs at least 4 samples for a not-a-knot cubic")
        if np.any(np.diff(eta) <= 0):
            raise ValueError("tabulated eta grid must be strictly increasing")
        if np.any(alpha <= 0):
            raise DomainError("tabulated scale factors must be positive")
        spline = CubicSpline(eta, alpha, axis=0, bc_type="not-a-knot")
        params = {"eta": tuple(eta.tolist()), "alpha": tuple(map(tuple, alpha.tolist()))}
        return cls(ModelKind.TABULATED, params, spline)

    # -- helpers ----------------------------------------------------------

    def permuted(self, perm) -> "BackgroundModel":
        """Same background with the axes relabelled: new axis j is old axis perm[j]."""
        perm = tuple(int(p) for p in perm)
        if sorted(perm) != [0, 1, 2]:
            raise ValueError(f"not a permutation of the axes: {perm}")
        if self.kind is ModelKind.TABULATED:
            alpha = np.asarray(self.params["alpha"])[:, perm]
            return BackgroundModel.tabulated(self.params["eta"], alpha)
        params = {k: (tuple(v[p] for p in perm) if isinstance(v, tuple) else v)
                  for k, v in self.params.items()}
        return replace(self, params=params)

    @property
    def is_isotropic(self) -> bool:
        if self.kind is ModelKind.TABULATED:
            alpha = np.asarray(self.params["alpha"])
            return bool(np.all(alpha == alpha[:, :1]))
        return all(len(set(v)) == 1 for v in self.params.values() if isinstance(v, tuple))

    def validity_window(self) -> tuple[float, float]:
        if self.kind is ModelKind.POWER_LAW:
            return (0.0, np.inf)
        if self.kind is ModelKind.TABULATED:
            return (self.params["eta"][0], self.params["eta"][-1])
        return (-np.inf, np.inf)

    # -- evaluation -------------------------------------------------------

    def scale_factors(self, eta):
        """Return ``(alpha, alpha_dot)``, each of shape ``eta.shape + (3,)``."""
        eta = np.asarray(eta, dtype=float)
        t = eta[..., None]
        p = self.params
        kind = self.kind
        if kind is ModelKind.STATIC:
            alpha = np.broadcast_to(np.asarray(p["c"]), t.shape[:-1] + (3,)).copy()
            alpha_dot = np.zeros_like(alpha)
        elif kind is ModelKind.POWER_LAW:
            if np.any(eta <= 0):
                raise DomainError("power-law background is only defined for eta > 0")
            q = np.asarray(p["q"])
            alpha = (t / p["eta_ref"]) ** q
            alpha_dot = q * alpha / t
        elif kind is ModelKind.EXPONENTIAL:
            lam = np.asarray(p["lam"])
            alpha = np.exp(lam * t)
            alpha_dot = lam * alpha
        elif kind is ModelKind.TANH_STEP:
            A, B, rho = np.asarray(p["A"]), np.asarray(p["B"]), p["rho"]
            th = np.tanh(rho * t)
            alpha = A + B * th
            alpha_dot = B * rho * (1.0 - th * th)
        else:
            lo, hi = p["eta"][0], p["eta"][-1]
            if np.any(eta < lo) or np.any(eta > hi):
                raise OutsideTableError(f"eta outside tabulated range [{lo}, {hi}]")
            alpha = self._spline(eta)
            alpha_dot = self._spline(eta, 1)
        if np.any(alpha <= 0):
            raise DomainError(f"non-positive scale factor in {kind.value} background")
        return alpha, alpha_dot


def eval_scale_factors(model: BackgroundModel, eta):
    return model.scale_factors(eta)


# ---------------------------------------------------------------------------
# Modes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Mode:
    """Comoving wavevector in spherical form."""

    k: float
    theta: float = 0.0
    phi: float = 0.0

    def __post_init__(self):
        if self.k < 0:
            raise ValueError("mode wavenumber must be non-negative")
        if not 0.0 <= self.theta <= np.pi:
            raise ValueError("theta must lie in [0, pi]")

    @property
    def direction(self) -> np.ndarray:
        return unit_vector(self.theta, self.phi)

    @property
    def kvec(self) -> np.ndarray:
        return self.k * self.direction


def unit_vector(theta, phi) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    st = np.sin(theta)
    return np.stack([st * np.cos(phi), st * np.sin(phi), np.cos(theta)], axis=-1)


# ---------------------------------------------------------------------------
# Notation quantities
# ---------------------------------------------------------------------------

def _check_positive(alpha):
    alpha = np.asarray(alpha, dtype=float)
    if np.any(alpha <= 0):
        raise DomainError("scale factors must be positive")
    return alpha


def mean_scale(alpha):
    """Geometric mean (alpha_1 alpha_2 alpha_3)^(1/3) over the last axis."""
    alpha = _check_positive(alpha)
    return np.cbrt(np.prod(alpha, axis=-1))


def expansion_rates(alpha, alpha_dot):
    alpha = _check_positive(alpha)
    return np.asarray(alpha_dot, dtype=float) / alpha


def anisotropy_Q(C):
    C = np.asarray(C, dtype=float)
    c1, c2, c3 = C[..., 0], C[..., 1], C[..., 2]
    return (c1 - c2) ** 2 + (c2 - c3) ** 2 + (c1 - c3) ** 2


def direction_mass_mu(alpha, theta, phi):
    # third term uses cos^2(theta) so that mu is the scaled norm of the unit direction
    alpha = _check_positive(alpha)
    nsq = unit_vector(theta, phi) ** 2
    return np.sqrt(np.sum(nsq / alpha**2, axis=-1))


def effective_frequency_K0(k, m, g):
    k = np.asarray(k, dtype=float)
    g = np.asarray(g, dtype=float)
    if np.any((k == 0) & (m == 0)):
        raise DomainError("K0 vanishes for the massless zero mode")
    return np.sqrt(k * k + (m * g) ** 2)


@dataclass(frozen=True)
class GeometryAtTime:
    """All notation quantities at one eta for one mode direction (or arrays of them).

    ``omega = mu * K0`` is the oscillator frequency; it sets the phase rate of
    the positive/negative-frequency exponentials.
    """

    eta: np.ndarray
    alpha: np.ndarray
    alpha_dot: np.ndarray
    a: np.ndarray
    mu: np.ndarray
    K0: np.ndarray
    g: np.ndarray
    C: np.ndarray
    Q: np.ndarray
    W: np.ndarray
    Wt: np.ndarray
    mu_dot: np.ndarray
    K0_dot: np.ndarray

    @property
    def omega(self):
        return self.mu * self.K0


def geometry_arrays(alpha, alpha_dot, k, nsq, m: float, eta=None) -> GeometryAtTime:
    """Vectorised core of :func:`couplings`.

    ``alpha``, ``alpha_dot`` and ``nsq`` (squared direction cosines) have a
    trailing axis of length 3; ``k`` broadcasts against the leading axes.
    """
    C = alpha_dot / alpha
    a = np.cbrt(alpha[..., 0] * alpha[..., 1] * alpha[..., 2])
    Q = anisotropy_Q(C)
    inv2 = nsq / (alpha * alpha)
    mu2 = inv2[..., 0] + inv2[..., 1] + inv2[..., 2]
    mu = np.sqrt(mu2)
    # d ln mu = -sum n_i^2 C_i / alpha_i^2 / mu^2
    dlnmu = -(inv2[..., 0] * C[..., 0] + inv2[..., 1] * C[..., 1] + inv2[..., 2] * C[..., 2]) / mu2
    g = a / mu
    mg2 = (m * g) ** 2
    K0sq = k * k + mg2
    if np.any(K0sq <= 0):
        raise DomainError("K0 vanishes for the massless zero mode")
    K0 = np.sqrt(K0sq)
    dlna = (C[..., 0] + C[..., 1] + C[..., 2]) / 3.0
    dlnK0 = mg2 * (dlna - dlnmu) / K0sq
    W = dlnmu + dlnK0
    Wt = Q / (mu * K0)
    return GeometryAtTime(eta, alpha, alpha_dot, a, mu, K0, g, C, Q, W, Wt, mu * dlnmu, K0 * dlnK0)


def couplings(model: BackgroundModel, mode: Mode, m: float, eta) -> GeometryAtTime:
    """Evaluate the full set of geometric quantities for ``mode`` at ``eta``."""
    if m < 0:
        raise ValueError("mass must be non-negative")
    alpha, alpha_dot = model.scale_factors(eta)
    nsq = mode.direction**2
    return geometry_arrays(alpha, alpha_dot, mode.k, nsq, m, np.asarray(eta, dtype=float))
