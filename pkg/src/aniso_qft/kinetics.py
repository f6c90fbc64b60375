"""Single-mode evolution in three equivalent formulations.

* ``suv``         real kinetic triple (S, U, V), the production path;
* ``bogoliubov``  complex coefficients (alpha, conj beta), original sign convention;
* ``oscillator``  the second-order mode equation for g(eta).

Every formulation carries the accumulated phase Theta (d Theta/d eta =
omega = mu K0) as an extra ODE component, so exp(+-2i Theta) is available
without restarting a quadrature.  Theta is reduced mod 2 pi only when states
are handed back to the caller.

The oscillator is matched to the coefficients through

    g  = (2 omega)^(-1/2) [conj(alpha) e+ + beta e-]
    g' = i (omega/2)^(1/2) [conj(alpha) e+ - beta e-],   e+- = exp(+-i Theta)

which is the normalisation under which the coefficient equations follow from
the mode equation with frequency^2 = omega^2 + Q.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .background import BackgroundModel, GeometryAtTime, Mode, geometry_arrays, unit_vector
from .integrator import dopri5

TWO_PI = 2.0 * np.pi
CHUNK = 1024         # nodes per integration batch; fixed so results never depend on worker count


# ---------------------------------------------------------------------------
# States
# ---------------------------------------------------------------------------

@dataclass
class KineticState:
    """(S, U, V) plus phase; fields are scalars or equally shaped arrays."""

    S: np.ndarray
    U: np.ndarray
    V: np.ndarray
    Theta: np.ndarray
    eta: np.ndarray

    @property
    def constraint_residual(self):
        S = np.asarray(self.S)
        return np.abs(np.asarray(self.U) ** 2 + np.asarray(self.V) ** 2 - 4 * S * (S + 1))

    def constraint_ok(self, rtol: float = 1e-8) -> bool:
        S = np.asarray(self.S)
        return bool(np.all(self.constraint_residual <= rtol * (1 + S) ** 2))


@dataclass
class BogoliubovState:
    alpha: np.ndarray
    beta: np.ndarray
    Theta: np.ndarray
    eta: np.ndarray

    @property
    def norm_defect(self):
        return np.abs(np.abs(self.alpha) ** 2 - np.abs(self.beta) ** 2 - 1.0)


@dataclass
class OscillatorState:
    gt: np.ndarray
    gt_dot: np.ndarray
    Theta: np.ndarray
    eta: np.ndarray

    @property
    def wronskian(self):
        return self.gt * np.conj(self.gt_dot) - np.conj(self.gt) * self.gt_dot


def vacuum_initial_state(eta0: float) -> KineticState:
    return KineticState(0.0, 0.0, 0.0, 0.0, float(eta0))


# ---------------------------------------------------------------------------
# Right-hand sides
# ---------------------------------------------------------------------------

def suv_rhs(state: KineticState, geo: GeometryAtTime, variant: str = "corrected"):
    """Kinetic equations; ``variant="printed"`` keeps the constraint-violating dV sign."""
    S, U, V = state.S, state.U, state.V
    W, Wt, omega = geo.W, geo.Wt, geo.omega
    src = 2 * S + 1
    rot = Wt + 2 * omega
    dS = 0.5 * W * U + 0.5 * Wt * V
    dU = W * src - rot * V
    if variant == "corrected":
        dV = Wt * src + rot * U
    elif variant == "printed":
        dV = Wt * src - rot * U
    else:
        raise ValueError(f"unknown kinetic variant {variant!r}")
    return dS, dU, dV, omega


def bogoliubov_rhs(state: BogoliubovState, geo: GeometryAtTime):
    """Coefficient equations in their original form; returns (dalpha, dbeta, dTheta)."""
    alpha, beta_c = state.alpha, np.conj(state.beta)
    W, Wt = geo.W, geo.Wt
    ep2 = np.exp(2j * state.Theta)
    dalpha = (0.5 * W - 0.5j * Wt) * beta_c * ep2 - 0.5j * Wt * alpha
    dbeta_c = (0.5 * W + 0.5j * Wt) * alpha * np.conj(ep2) + 0.5j * Wt * beta_c
    return dalpha, np.conj(dbeta_c), geo.omega


def oscillator_rhs(state: OscillatorState, geo: GeometryAtTime):
    freq2 = geo.omega**2 + geo.Q
    return state.gt_dot, -freq2 * state.gt, geo.omega


# ---------------------------------------------------------------------------
# Maps between formulations
# ---------------------------------------------------------------------------

def suv_from_bogoliubov(state: BogoliubovState, convention: str = "printed") -> KineticState:
    """Real triple from the coefficients.

    ``printed`` uses U + iV = 2 alpha conj(beta) e-^2.  That combination does
    not close onto the kinetic equations; ``consistent`` uses
    U - iV = 2 alpha beta e-^2, which reproduces them exactly.  S = |beta|^2
    in both.
    """
    em2 = np.exp(-2j * np.asarray(state.Theta))
    beta = np.asarray(state.beta)
    if convention == "printed":
        z = 2 * state.alpha * np.conj(beta) * em2
        U, V = z.real, z.imag
    elif convention == "consistent":
        z = 2 * state.alpha * beta * em2
        U, V = z.real, -z.imag
    else:
        raise ValueError(f"unknown convention {convention!r}")
    return KineticState(np.abs(beta) ** 2, U, V, state.Theta, state.eta)


def oscillator_from_bogoliubov(state: BogoliubovState, geo: GeometryAtTime) -> OscillatorState:
    omega = geo.omega
    ep = np.exp(1j * np.asarray(state.Theta))
    plus = np.conj(state.alpha) * ep
    minus = state.beta * np.conj(ep)
    gt = (plus + minus) / np.sqrt(2 * omega)
    gt_dot = 1j * np.sqrt(omega / 2) * (plus - minus)
    return OscillatorState(gt, gt_dot, state.Theta, state.eta)


def bogoliubov_from_oscillator(state: OscillatorState, geo: GeometryAtTime) -> BogoliubovState:
    omega = geo.omega
    A = np.sqrt(2 * omega) * state.gt
    B = -1j * np.sqrt(2 / omega) * state.gt_dot
    ep = np.exp(1j * np.asarray(state.Theta))
    alpha = np.conj(0.5 * (A + B) / ep)
    beta = 0.5 * (A - B) * ep
    return BogoliubovState(alpha, beta, state.Theta, state.eta)


def oscillator_vacuum_initial(geo0: GeometryAtTime) -> OscillatorState:
    omega = geo0.omega
    return OscillatorState(1 / np.sqrt(2 * omega) + 0j, 1j * np.sqrt(omega / 2), 0.0, geo0.eta)


# ---------------------------------------------------------------------------
# Batched evolution
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ModeBatch:
    """Flat list of modes: wavenumbers and squared direction cosines."""

    k: np.ndarray
    nsq: np.ndarray

    @classmethod
    def from_modes(cls, modes) -> "ModeBatch":
        modes = list(modes)
        k = np.array([md.k for md in modes], dtype=float)
        nsq = np.array([md.direction**2 for md in modes], dtype=float).reshape(-1, 3)
        return cls(k, nsq)

    @classmethod
    def from_angles(cls, k, theta, phi) -> "ModeBatch":
        k, theta, phi = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (k, theta, phi)))
        return cls(k.ravel().copy(), (unit_vector(theta, phi) ** 2).reshape(-1, 3))

    def __len__(self):
        return self.k.size

    def take(self, sl) -> "ModeBatch":
        return ModeBatch(self.k[sl], self.nsq[sl])


class _System:
    """Picklable right-hand side of one formulation for a batch of modes."""

    def __init__(self, kind, model, batch, m, variant="corrected"):
        self.kind, self.model, self.batch, self.m, self.variant = kind, model, batch, m, variant

    def geometry(self, t, idx):
        alpha, alpha_dot = self.model.scale_factors(t)
        return geometry_arrays(alpha, alpha_dot, self.batch.k[idx], self.batch.nsq[idx], self.m, t)

    def __call__(self, t, y, idx):
        geo = self.geometry(t, idx)
        if self.kind == "suv":
            st = KineticState(y[:, 0], y[:, 1], y[:, 2], y[:, 3], t)
            return np.stack(suv_rhs(st, geo, self.variant), axis=1)
        if self.kind == "bogoliubov":
            st = BogoliubovState(y[:, 0], y[:, 1], y[:, 2].real, t)
            return np.stack(bogoliubov_rhs(st, geo), axis=1).astype(complex)
        st = OscillatorState(y[:, 0], y[:, 1], y[:, 2].real, t)
        return np.stack(oscillator_rhs(st, geo), axis=1).astype(complex)

    def initial(self, eta0):
        n = len(self.batch)
        if self.kind == "suv":
            return np.zeros((n, 4))
        if self.kind == "bogoliubov":
            # columns: alpha, beta, Theta
            y = np.zeros((n, 3), dtype=complex)
            y[:, 0] = 1.0
            return y
        geo0 = self.geometry(np.full(n, float(eta0)), np.arange(n))
        osc = oscillator_vacuum_initial(geo0)
        return np.stack([osc.gt, osc.gt_dot, np.zeros(n, dtype=complex)], axis=1)


def _solve_chunk(args):
    kind, model, batch, m, eta0, times, tol, variant = args
    system = _System(kind, model, batch, m, variant)
    sol = dopri5(system, eta0, system.initial(eta0), times, tol)
    return sol.y, sol.n_steps


def _evolve(kind, model, batch, m, eta0, times, tol, variant="corrected", workers=1):
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if times.size == 0:
        raise ValueError("no output times requested")
    if times[0] < eta0:
        raise ValueError("output times must not precede eta0")
    if m < 0:
        raise ValueError("mass must be non-negative")
    lo, hi = model.validity_window()
    if eta0 < lo or times[-1] > hi:
        raise ValueError(f"integration window [{eta0}, {times[-1]}] leaves the model's domain [{lo}, {hi}]")
    jobs = [(kind, model, batch.take(slice(s, s + CHUNK)), m, float(eta0), times, tol, variant)
            for s in range(0, len(batch), CHUNK)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_solve_chunk, jobs))
    else:
        parts = [_solve_chunk(j) for j in jobs]
    y = np.concatenate([p[0] for p in parts], axis=1)
    steps = np.concatenate([p[1] for p in parts])
    return times, y, steps


def _output_times(eta0, eta1, output_times):
    if not eta1 > eta0:
        raise ValueError("integration window needs eta0 < eta1")
    if output_times is None:
        return np.array([eta1], dtype=float)
    times = np.unique(np.asarray(output_times, dtype=float))
    if times[0] < eta0 or times[-1] > eta1:
        raise ValueError("output times must lie inside the integration window")
    return times


def evolve_suv_batch(model, batch: ModeBatch, m, eta0, times, tol=1e-10, *, variant="corrected", workers=1):
    """Kinetic triple for every mode of ``batch``; arrays are shaped (n_times, n_modes)."""
    times, y, _ = _evolve("suv", model, batch, m, eta0, times, tol, variant, workers)
    eta = np.broadcast_to(times[:, None], y.shape[:2])
    return KineticState(y[..., 0], y[..., 1], y[..., 2], np.mod(y[..., 3], TWO_PI), eta)


def evolve_bogoliubov_batch(model, batch: ModeBatch, m, eta0, times, tol=1e-10, *, workers=1):
    times, y, _ = _evolve("bogoliubov", model, batch, m, eta0, times, tol, workers=workers)
    eta = np.broadcast_to(times[:, None], y.shape[:2])
    return BogoliubovState(y[..., 0], y[..., 1], np.mod(y[..., 2].real, TWO_PI), eta)


def evolve_oscillator_batch(model, batch: ModeBatch, m, eta0, times, tol=1e-10, *, workers=1):
    times, y, _ = _evolve("oscillator", model, batch, m, eta0, times, tol, workers=workers)
    eta = np.broadcast_to(times[:, None], y.shape[:2])
    return OscillatorState(y[..., 0], y[..., 1], np.mod(y[..., 2].real, TWO_PI), eta)


def batch_geometry(model, batch: ModeBatch, m, eta) -> GeometryAtTime:
    """Geometry for every mode in ``batch`` at one time, shaped (n_modes,)."""
    t = np.full(len(batch), float(eta))
    alpha, alpha_dot = model.scale_factors(t)
    return geometry_arrays(alpha, alpha_dot, batch.k, batch.nsq, m, t)


def oscillator_to_suv(model, batch, m, osc: OscillatorState, convention="printed") -> KineticState:
    """Map an oscillator trajectory (n_times, n_modes) through the coefficients to (S, U, V)."""
    S, U, V = (np.empty(osc.gt.shape) for _ in range(3))
    for i, eta in enumerate(osc.eta[:, 0]):
        geo = batch_geometry(model, batch, m, eta)
        row = OscillatorState(osc.gt[i], osc.gt_dot[i], osc.Theta[i], eta)
        kin = suv_from_bogoliubov(bogoliubov_from_oscillator(row, geo), convention)
        S[i], U[i], V[i] = kin.S, kin.U, kin.V
    return KineticState(S, U, V, osc.Theta, osc.eta)


# single-mode conveniences -------------------------------------------------

def evolve_suv(model: BackgroundModel, mode: Mode, m: float, eta0: float, eta1: float,
               tol: float = 1e-10, output_times=None, *, variant="corrected") -> KineticState:
    """Kinetic trajectory of one mode from the vacuum at eta0; fields shaped (n_times,)."""
    times = _output_times(eta0, eta1, output_times)
    st = evolve_suv_batch(model, ModeBatch.from_modes([mode]), m, eta0, times, tol, variant=variant)
    return KineticState(st.S[:, 0], st.U[:, 0], st.V[:, 0], st.Theta[:, 0], times)


def evolve_bogoliubov(model, mode, m, eta0, eta1, tol=1e-10, output_times=None) -> BogoliubovState:
    times = _output_times(eta0, eta1, output_times)
    st = evolve_bogoliubov_batch(model, ModeBatch.from_modes([mode]), m, eta0, times, tol)
    return BogoliubovState(st.alpha[:, 0], st.beta[:, 0], st.Theta[:, 0], times)


def evolve_oscillator(model, mode, m, eta0, eta1, tol=1e-10, output_times=None) -> OscillatorState:
    times = _output_times(eta0, eta1, output_times)
    st = evolve_oscillator_batch(model, ModeBatch.from_modes([mode]), m, eta0, times, tol)
    return OscillatorState(st.gt[:, 0], st.gt_dot[:, 0], st.Theta[:, 0], times)
