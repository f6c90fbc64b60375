"""Vacuum averages of the diagonal energy-momentum tensor by momentum quadrature.

The d^3k integral is discretised as composite Gauss-Legendre panels in k,
Gauss-Legendre in cos(theta) and the trapezoid rule in phi.  The integrands
depend on the direction only through the squared direction cosines, so the
sphere is folded onto one octant before any mode is evolved: nodes related by
a reflection share one evolution and their weights are merged.

UV behaviour is handled by a hard cutoff k_max with a power-law tail bound;
no renormalisation is attempted.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from numpy.polynomial.legendre import leggauss

from .background import BackgroundModel, mean_scale
from .kinetics import KineticState, ModeBatch, batch_geometry, evolve_suv_batch

TII_VARIANTS = ("printed", "c_squared")
COMPONENTS = ("T00", "T11", "T22", "T33", "trace")


class QuadratureNotConverged(RuntimeError):
    def __init__(self, eta, previous, last):
        super().__init__(
            f"momentum quadrature did not converge at eta={eta}: "
            f"last two iterates {np.asarray(previous).tolist()} and {np.asarray(last).tolist()}")
        self.eta = eta
        self.previous = previous
        self.last = last


# ---------------------------------------------------------------------------
# Grid
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MomentumGrid:
    """Product quadrature for the d^3k integral.

    The radial rule has ``n_panels`` equal panels on ``[k_min, k_max]`` with
    ``n_k`` Gauss-Legendre nodes each, so no node sits on k = 0.

    ``frame`` says which background axis each Cartesian component of the
    quadrature direction is attached to (polar axis = ``frame[2]`` by
    default).  Relabelling the background axes together with the frame maps
    the node set onto itself.
    """

    k_max: float = 8.0
    n_panels: int = 8
    n_k: int = 8
    n_theta: int = 16
    n_phi: int = 32
    tail_exponent: float = 6.0
    k_min: float = 0.0
    frame: tuple = (0, 1, 2)

    def __post_init__(self):
        if not 0 <= self.k_min < self.k_max:
            raise ValueError("momentum grid needs 0 <= k_min < k_max")
        if self.n_panels < 1 or self.n_k < 1 or self.n_theta < 2:
            raise ValueError("momentum grid needs at least one panel, one radial node and two polar nodes")
        if self.n_phi < 4 or self.n_phi % 2:
            raise ValueError("n_phi must be even and at least 4")
        if self.tail_exponent <= 3:
            raise ValueError("tail_exponent must exceed 3 for a finite tail")
        if sorted(self.frame) != [0, 1, 2]:
            raise ValueError(f"frame must be a permutation of the axes, got {self.frame}")

    @property
    def panel_width(self) -> float:
        return (self.k_max - self.k_min) / self.n_panels

    def radial(self):
        """Nodes and weights of the composite rule, plus each node's panel index."""
        x, w = leggauss(self.n_k)
        h = self.panel_width
        left = self.k_min + h * np.arange(self.n_panels)
        nodes = (left[:, None] + 0.5 * h * (x + 1)).ravel()
        weights = np.tile(0.5 * h * w, self.n_panels)
        panel = np.repeat(np.arange(self.n_panels), self.n_k)
        return nodes, weights, panel

    def polar(self):
        return leggauss(self.n_theta)

    def azimuthal(self):
        phi = 2 * np.pi * np.arange(self.n_phi) / self.n_phi
        return phi, np.full(self.n_phi, 2 * np.pi / self.n_phi)

    def permuted(self, perm) -> "MomentumGrid":
        """Grid to pair with ``model.permuted(perm)``."""
        return replace(self, frame=tuple(self.frame[p] for p in perm))

    def refined(self) -> "MomentumGrid":
        return replace(self, n_panels=2 * self.n_panels, n_theta=2 * self.n_theta, n_phi=2 * self.n_phi)

    def folded_directions(self):
        """Octant representatives ``(theta, phi, weight)`` of the angular product rule.

        Weights of reflected nodes are summed onto their representative, so
        the weights still add up to 4 pi.
        """
        x, wx = self.polar()
        phi, wphi = self.azimuthal()
        nt, nphi = self.n_theta, self.n_phi
        i = np.arange(nt)
        i_rep = np.minimum(i, nt - 1 - i)
        j = np.arange(nphi)
        j_rep = np.minimum(j, nphi - j)
        j_rep = np.minimum(j_rep, nphi // 2 - j_rep)
        keys = (i_rep[:, None] * nphi + j_rep[None, :]).ravel()
        w = (wx[:, None] * wphi[None, :]).ravel()
        uniq, inverse = np.unique(keys, return_inverse=True)
        weights = np.bincount(inverse, weights=w)
        theta = np.arccos(x[uniq // nphi])
        return theta, phi[uniq % nphi], weights


# ---------------------------------------------------------------------------
# Integrands (the (2 pi)^-3 a^-4 prefactor and k^2 dk dOmega live in the quadrature)
# ---------------------------------------------------------------------------

def integrand_T00(state: KineticState, geo):
    omega = geo.mu * geo.K0
    return omega * (state.S - geo.Q / (2 * omega**2) * (state.S + 0.5 * state.U))


def _k_component_sq(mode, i):
    if hasattr(mode, "nsq"):
        return mode.k**2 * mode.nsq[..., i]
    return mode.kvec[..., i] ** 2


def integrand_Tii(i: int, state: KineticState, geo, mode, variant: str = "printed"):
    """Pressure integrand along axis ``i`` in {1, 2, 3}.

    ``variant="printed"`` uses (C_i - Q); ``"c_squared"`` substitutes C_i^2 - Q.
    """
    if i not in (1, 2, 3):
        raise ValueError(f"axis index must be 1, 2 or 3, got {i}")
    if variant not in TII_VARIANTS:
        raise ValueError(f"unknown tii_variant {variant!r}")
    ax = i - 1
    omega = geo.mu * geo.K0
    alpha_i = geo.alpha[..., ax]
    C_i = geo.C[..., ax]
    h = state.S + 0.5 * state.U
    rate = C_i - geo.Q if variant == "printed" else C_i**2 - geo.Q
    return omega * (_k_component_sq(mode, ax) / (alpha_i**2 * omega**2) * h
                    - state.U / 6
                    + rate / (6 * omega**2) * h
                    - C_i * state.V / (18 * omega))


def integrand_trace(state: KineticState, geo, m: float):
    omega = geo.mu * geo.K0
    return omega * ((m * geo.g / geo.K0) ** 2 * (state.S + 0.5 * state.U))


# ---------------------------------------------------------------------------
# Assembly
# ---------------------------------------------------------------------------

@dataclass
class StressEnergy:
    eta: float
    T00: float
    Tii: tuple
    trace: float
    tail_estimate: float
    converged: bool = True
    refinements: int = 0
    history: list = field(default_factory=list, repr=False)

    @property
    def T11(self):
        return self.Tii[0]

    @property
    def T22(self):
        return self.Tii[1]

    @property
    def T33(self):
        return self.Tii[2]

    def as_array(self) -> np.ndarray:
        return np.array([self.T00, *self.Tii, self.trace])


@dataclass
class QuadratureResult:
    etas: np.ndarray
    values: np.ndarray      # (n_times, 5) in COMPONENTS order
    tails: np.ndarray       # (n_times,)
    n_modes: int


def _node_set(grid: MomentumGrid):
    """Flattened (k-major) node list with combined weights w_k k^2 w_dir."""
    k, wk, panel = grid.radial()
    theta, phi, wdir = grid.folded_directions()
    K = np.repeat(k, theta.size)
    TH = np.tile(theta, k.size)
    PH = np.tile(phi, k.size)
    weight = np.repeat(wk * k**2, theta.size) * np.tile(wdir, k.size)
    last = np.repeat(panel == grid.n_panels - 1, theta.size)
    batch = ModeBatch.from_angles(K, TH, PH)
    batch = ModeBatch(batch.k, batch.nsq[:, list(grid.frame)])
    return batch, weight, last, theta.size


def _evolve_nodes(model, batch, n_dir, m, eta0, etas, tol_ode, workers):
    if not model.is_isotropic:
        return evolve_suv_batch(model, batch, m, eta0, etas, tol_ode, workers=workers)
    # every direction sees the same mode equation; evolve one per k
    k = batch.k[::n_dir]
    rep = ModeBatch(k, np.tile([0.0, 0.0, 1.0], (k.size, 1)))
    t = evolve_suv_batch(model, rep, m, eta0, etas, tol_ode, workers=workers)
    spread = [np.repeat(x, n_dir, axis=1) for x in (t.S, t.U, t.V, t.Theta)]
    return KineticState(*spread, np.repeat(t.eta, n_dir, axis=1))


def quadrature(model: BackgroundModel, m: float, etas, eta0: float, grid: MomentumGrid,
               tol_ode: float = 1e-10, tii_variant: str = "printed", workers: int = 1) -> QuadratureResult:
    """Evaluate all components on one fixed grid at every time in ``etas``."""
    if tii_variant not in TII_VARIANTS:
        raise ValueError(f"unknown tii_variant {tii_variant!r}")
    etas = np.atleast_1d(np.asarray(etas, dtype=float))
    if np.any(etas < eta0):
        raise ValueError("tensor requested before the initial time")
    batch, weight, last, n_dir = _node_set(grid)
    traj = _evolve_nodes(model, batch, n_dir, m, eta0, etas, tol_ode, workers)
    values = np.empty((etas.size, len(COMPONENTS)))
    tails = np.empty(etas.size)
    tail_factor = grid.k_max / (grid.panel_width * (grid.tail_exponent - 3))
    for n, eta in enumerate(etas):
        geo = batch_geometry(model, batch, m, eta)
        st = KineticState(traj.S[n], traj.U[n], traj.V[n], traj.Theta[n], eta)
        integrands = (integrand_T00(st, geo),
                      *(integrand_Tii(i, st, geo, batch, tii_variant) for i in (1, 2, 3)),
                      integrand_trace(st, geo, m))
        alpha, _ = model.scale_factors(eta)
        pref = 1.0 / ((2 * np.pi) ** 3 * mean_scale(alpha) ** 4)
        for c, f in enumerate(integrands):
            contrib = weight * f
            values[n, c] = pref * np.sum(contrib)
        # density of the last panel extrapolated as k^(2 - p) beyond the cutoff
        last_panel = np.array([abs(np.sum((weight * f)[last])) for f in integrands])
        tails[n] = pref * tail_factor * last_panel.max()
    return QuadratureResult(etas, values, tails, len(batch))


def _converged(old, new, tol):
    return np.all(np.abs(new - old) <= tol * np.maximum(np.abs(new), 1e-30), axis=-1)


def assemble_series(model: BackgroundModel, m: float, etas, eta0: float, grid: MomentumGrid,
                    tol: float = 1e-6, *, tol_ode: float = 1e-10, tii_variant: str = "printed",
                    max_refinements: int = 3, workers: int = 1) -> list[StressEnergy]:
    """Refine the grid (panels, polar and azimuthal nodes doubled together) until
    successive estimates agree to ``tol`` relatively, for every requested time.

    Times that fail to converge within ``max_refinements`` come back with
    ``converged=False`` and the last two iterates in ``history``.
    """
    etas = np.atleast_1d(np.asarray(etas, dtype=float))
    prev = quadrature(model, m, etas, eta0, grid, tol_ode, tii_variant, workers)
    history = [prev.values]
    done = np.zeros(etas.size, dtype=bool)
    final = prev
    level = 0
    while level < max_refinements:
        grid = grid.refined()
        level += 1
        cur = quadrature(model, m, etas, eta0, grid, tol_ode, tii_variant, workers)
        history.append(cur.values)
        done = _converged(prev.values, cur.values, tol)
        final = cur
        if np.all(done):
            break
        prev = cur
    out = []
    for n, eta in enumerate(etas):
        v = final.values[n]
        out.append(StressEnergy(float(eta), float(v[0]), tuple(float(x) for x in v[1:4]), float(v[4]),
                                float(final.tails[n]), bool(done[n]), level,
                                [h[n] for h in history[-2:]]))
    return out


def assemble_stress_energy(model: BackgroundModel, m: float, eta: float, eta0: float,
                           grid: MomentumGrid, tol: float = 1e-6, **kwargs) -> StressEnergy:
    """Single-time assembly; raises :class:`QuadratureNotConverged` on failure."""
    if eta < eta0:
        raise ValueError("tensor requested before the initial time")
    (res,) = assemble_series(model, m, [eta], eta0, grid, tol, **kwargs)
    if not res.converged:
        raise QuadratureNotConverged(eta, *res.history)
    return res
