"""Deterministic master-equation reference: RK4 propagation and steady states.

These engines never touch the stochastic code path, so ensemble averages can
be validated against them as an independent ground truth.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg as la
from . import tolerances as tol
from .errors import GridMismatch, PositivityLoss
from .model import SystemModel


def liouvillian_rhs(model: SystemModel, t: float, rho: np.ndarray) -> np.ndarray:
    """-i[H, rho] + sum_k D_k(rho) at control value lambda(t)."""
    lam = model.protocol.evaluate(min(max(t, 0.0), model.protocol.tau))
    h = model.bare(lam) + model.drive(lam)
    out = -1j * (h @ rho - rho @ h)
    for c in model.channels:
        L = c.operator(lam)
        ld = la.adjoint(L)
        g = ld @ L
        out += L @ rho @ ld - 0.5 * (g @ rho + rho @ g)
    return out


def liouvillian_matrix(model: SystemModel, lam: complex) -> np.ndarray:
    """Vectorised generator acting on row-major flattened density matrices."""
    d = model.dim
    h = model.bare(lam) + model.drive(lam)
    eye = np.eye(d)
    sup = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
    for c in model.channels:
        L = c.operator(lam)
        g = la.adjoint(L) @ L
        sup += np.kron(L, L.conj())
        sup -= 0.5 * (np.kron(g, eye) + np.kron(eye, g.T))
    return sup


@dataclass
class MasterEquationResult:
    times: np.ndarray
    states: np.ndarray        # (n_checkpoints, d, d)
    trace_drift: float        # max |tr(rho) - 1| over the run

    def at(self, t: float) -> np.ndarray:
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > 1e-9 * max(1.0, abs(t)):
            raise GridMismatch(f"no checkpoint at t={t}")
        return self.states[i]

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


def lindblad_propagate(model: SystemModel, rho0: np.ndarray, tau: float, dt: float,
                       checkpoint_stride: int = 1) -> MasterEquationResult:
    """Classic RK4 integration of the master equation.

    Stores the state every ``checkpoint_stride`` steps (plus t=0 and t=tau),
    keeps the trace drift, and aborts on positivity loss.
    """
    la.check_density_matrix(rho0)
    n_steps = int(round(tau / dt))
    if abs(n_steps * dt - tau) > 1e-9:
        raise GridMismatch(f"tau={tau} is not a multiple of dt={dt}")
    rho = np.array(rho0, dtype=complex)
    times = [0.0]
    states = [rho.copy()]
    drift_max = 0.0
    for i in range(n_steps):
        t = i * dt
        k1 = liouvillian_rhs(model, t, rho)
        k2 = liouvillian_rhs(model, t + 0.5 * dt, rho + 0.5 * dt * k1)
        k3 = liouvillian_rhs(model, t + 0.5 * dt, rho + 0.5 * dt * k2)
        k4 = liouvillian_rhs(model, t + dt, rho + dt * k3)
        rho = rho + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        drift_max = max(drift_max, abs(np.trace(rho).real - 1.0))
        wmin = float(np.linalg.eigvalsh(0.5 * (rho + la.adjoint(rho))).min())
        if wmin < tol.POSITIVITY_ABORT:
            raise PositivityLoss(
                f"eigenvalue {wmin:.3e} below {tol.POSITIVITY_ABORT} at t={t + dt:.6g}"
            )
        if (i + 1) % checkpoint_stride == 0 or i == n_steps - 1:
            times.append((i + 1) * dt)
            states.append(rho.copy())
    return MasterEquationResult(np.array(times), np.array(states), drift_max)


@dataclass
class SteadyStateResult:
    state: np.ndarray
    degeneracy: int
    smallest_eigenvalue: float     # |closest-to-zero generator eigenvalue|
    spectral_gap: float            # |next generator eigenvalue|
    residual: float                # max |L(pi)|


def steady_state(model: SystemModel, lam: complex = 0.0) -> SteadyStateResult:
    """Instantaneous invariant state of the frozen-lambda generator.

    Null space via eigendecomposition of the vectorised Lindbladian.  When
    the stationary space is degenerate and the maximally mixed state is
    stationary (unital case), that canonical choice is returned.
    """
    d = model.dim
    sup = liouvillian_matrix(model, lam)
    w, v = np.linalg.eig(sup)
    order = np.argsort(np.abs(w))
    w, v = w[order], v[:, order]
    n_null = int(np.sum(np.abs(w) < 1e-8))
    n_null = max(n_null, 1)
    smallest = float(np.abs(w[0]))
    gap = float(np.abs(w[n_null])) if n_null < len(w) else np.inf

    def normalize(mat):
        mat = 0.5 * (mat + la.adjoint(mat))
        tr = np.trace(mat).real
        if abs(tr) < 1e-12:
            return None
        mat = mat / tr
        ev = np.linalg.eigvalsh(mat)
        if ev.min() < -1e-8:
            return None
        ev_clipped = np.clip(ev, 0.0, None)
        if abs(ev_clipped.sum() - 1.0) > 1e-8:
            return None
        return mat

    pi = None
    if n_null > 1:
        mixed = np.eye(d, dtype=complex) / d
        if np.max(np.abs(sup @ mixed.reshape(-1))) < tol.STEADY_RESIDUAL:
            pi = mixed
    if pi is None:
        for j in range(n_null):
            cand = normalize(v[:, j].reshape(d, d))
            if cand is not None:
                pi = cand
                break
    if pi is None:  # try symmetrised combinations of a degenerate pair
        for j in range(n_null):
            for k in range(j + 1, n_null):
                cand = normalize(v[:, j].reshape(d, d) + v[:, k].reshape(d, d))
                if cand is not None:
                    pi = cand
                    break
            if pi is not None:
                break
    if pi is None:
        raise PositivityLoss("no positive stationary state found in the null space")
    residual = float(np.max(np.abs((sup @ pi.reshape(-1)).reshape(d, d))))
    return SteadyStateResult(pi, n_null, smallest, gap, residual)


def unconditional_consistency(times_a, states_a, times_b, states_b) -> float:
    """Max trace distance between two state trajectories on matched grids."""
    ta, tb = np.asarray(times_a), np.asarray(times_b)
    if len(ta) != len(tb) or np.max(np.abs(ta - tb)) > 1e-9:
        raise GridMismatch("checkpoint grids differ")
    return max(
        la.trace_distance(a, b) for a, b in zip(states_a, states_b)
    )
