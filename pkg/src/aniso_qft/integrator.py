"""Dormand-Prince 5(4) with independent step-size control per batch member.

Many independent ODE systems of the same form (one per momentum node) are
advanced together with numpy, but every member keeps its own time, step size
and accept/reject history.  The result for one member is therefore identical
whatever else happens to be in the batch.

Steps are clipped so that every requested output time is hit exactly; no
interpolation is involved in reported values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Butcher tableau (Hairer, Norsett & Wanner, table 5.2)
C2, C3, C4, C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
B1, B3, B4, B5, B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
# difference between 5th-order weights and the embedded 4th-order ones
E1 = 71 / 57600
E3 = -71 / 16695
E4 = 71 / 1920
E5 = -17253 / 339200
E6 = 22 / 525
E7 = -1 / 40

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 5.0


class StepSizeUnderflow(RuntimeError):
    """The step size collapsed below round-off; carries the failing time."""

    def __init__(self, eta: float, h: float):
        super().__init__(f"step size underflow at eta={eta:.17g} (h={h:.3g})")
        self.eta = eta
        self.h = h


@dataclass
class Solution:
    t: np.ndarray          # (n_out,)
    y: np.ndarray          # (n_out, n, d)
    n_steps: np.ndarray    # accepted steps per member
    n_rejected: np.ndarray


def _error_norm(err, y, y_new, tol):
    scale = tol + tol * np.maximum(np.abs(y), np.abs(y_new))
    return np.max(np.abs(err) / scale, axis=1)


def _initial_step(rhs, t0, y0, f0, tol, span):
    idx = np.arange(y0.shape[0])
    scale = tol + tol * np.abs(y0)
    d0 = np.max(np.abs(y0) / scale, axis=1)
    d1 = np.max(np.abs(f0) / scale, axis=1)
    h0 = np.where((d0 < 1e-5) | (d1 < 1e-5), 1e-6, 0.01 * d0 / np.maximum(d1, 1e-300))
    h0 = np.minimum(h0, span)
    t1 = np.full(y0.shape[0], t0) + h0
    f1 = rhs(t1, y0 + h0[:, None] * f0, idx)
    d2 = np.max(np.abs(f1 - f0) / scale, axis=1) / h0
    dmax = np.maximum(d1, d2)
    h1 = np.where(dmax <= 1e-15, np.maximum(1e-6, h0 * 1e-3), (0.01 / np.maximum(dmax, 1e-300)) ** 0.2)
    return np.minimum(np.minimum(100 * h0, h1), span)


def dopri5(rhs, t0: float, y0, t_out, tol: float, *, max_steps: int = 1_000_000) -> Solution:
    """Integrate ``y' = rhs(t, y, idx)`` for a batch of independent systems.

    ``y0`` has shape ``(n, d)``; ``rhs`` receives the member times ``t`` of
    shape ``(m,)``, states ``(m, d)`` and the member indices ``idx`` it is
    being evaluated for.  ``t_out`` is increasing with ``t_out[0] >= t0``.
    Local error per step satisfies ``|err| <= tol * (1 + |y|)`` componentwise.
    """
    y0 = np.array(y0)
    n, d = y0.shape
    t_out = np.asarray(t_out, dtype=float)
    if t_out.ndim != 1 or t_out.size == 0 or t_out[0] < t0 or np.any(np.diff(t_out) <= 0):
        raise ValueError("output times must be strictly increasing and start at or after t0")
    if tol <= 0:
        raise ValueError("tolerance must be positive")

    out = np.empty((t_out.size, n, d), dtype=y0.dtype)
    t = np.full(n, float(t0))
    y = y0.copy()
    nxt = np.zeros(n, dtype=int)
    # outputs requested at t0 itself
    at_start = t_out[0] == t0
    if at_start:
        out[0] = y0
        nxt[:] = 1
    n_steps = np.zeros(n, dtype=int)
    n_rej = np.zeros(n, dtype=int)
    if nxt[0] >= t_out.size:
        return Solution(t_out, out, n_steps, n_rej)

    all_idx = np.arange(n)
    k1 = rhs(t, y, all_idx)
    h = _initial_step(rhs, t0, y, k1, tol, t_out[-1] - t0)
    active = all_idx.copy()
    iterations = 0

    while active.size:
        iterations += 1
        if iterations > max_steps:
            raise RuntimeError(f"maximum number of steps ({max_steps}) exceeded")
        ta, ya, ka = t[active], y[active], k1[active]
        target = t_out[nxt[active]]
        remaining = target - ta
        ha = h[active]
        # land on the output time when within a hair of it
        hits = ha >= remaining * (1 - 1e-12)
        ha = np.where(hits, remaining, ha)
        tiny = ha <= 1e-14 * np.maximum(1.0, np.abs(ta))
        if np.any(tiny):
            j = np.flatnonzero(tiny)[0]
            raise StepSizeUnderflow(float(ta[j]), float(ha[j]))

        hc = ha[:, None]
        k2 = rhs(ta + C2 * ha, ya + hc * (A21 * ka), active)
        k3 = rhs(ta + C3 * ha, ya + hc * (A31 * ka + A32 * k2), active)
        k4 = rhs(ta + C4 * ha, ya + hc * (A41 * ka + A42 * k2 + A43 * k3), active)
        k5 = rhs(ta + C5 * ha, ya + hc * (A51 * ka + A52 * k2 + A53 * k3 + A54 * k4), active)
        t_new = np.where(hits, target, ta + ha)
        k6 = rhs(t_new, ya + hc * (A61 * ka + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5), active)
        y_new = ya + hc * (B1 * ka + B3 * k3 + B4 * k4 + B5 * k5 + B6 * k6)
        k7 = rhs(t_new, y_new, active)
        err = hc * (E1 * ka + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7)
        enorm = _error_norm(err, ya, y_new, tol)
        if not np.all(np.isfinite(enorm)):
            j = np.flatnonzero(~np.isfinite(enorm))[0]
            raise StepSizeUnderflow(float(ta[j]), float(ha[j]))

        accept = enorm <= 1.0
        with np.errstate(divide="ignore"):
            factor = SAFETY * np.where(enorm > 0, enorm, 1e-10) ** -0.2
        factor = np.clip(factor, MIN_FACTOR, MAX_FACTOR)
        factor = np.where(accept, factor, np.minimum(factor, 1.0))
        h_next = ha * factor
        # a clipped step that lands on an output should not shrink the next step
        h_next = np.where(accept & hits, np.maximum(h_next, h[active]), h_next)

        acc = active[accept]
        t[acc] = t_new[accept]
        y[acc] = y_new[accept]
        k1[acc] = k7[accept]
        n_steps[acc] += 1
        n_rej[active[~accept]] += 1
        h[active] = h_next

        landed = acc[hits[accept]]
        if landed.size:
            out[nxt[landed], landed] = y[landed]
            nxt[landed] += 1
        active = active[nxt[active] < t_out.size]

    return Solution(t_out, out, n_steps, n_rej)
