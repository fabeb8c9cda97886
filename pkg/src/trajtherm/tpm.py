"""Two-point-measurement layer.

Initial sampling from the spectral decomposition of rho_0, final projection
in a configurable basis, trajectory operators assembled from the shared step
factors, and forward/backward record probabilities with the
microreversibility diagnostic.

Outcome indices refer to rank-1 projectors sorted by descending eigenvalue;
degenerate eigenspaces are resolved deterministically along the
computational basis, so outcome labels are stable across runs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import linalg as la
from . import tolerances as tol
from .errors import GridMismatch, UnsupportedChannelSet
from .model import SystemModel, endpoint_hamiltonian, theta_conjugate, time_reversed_model
from .operators import StepTable, build_step_table
from .records import JumpEvent, TrajectoryRecord


@dataclass(frozen=True)
class TPMConfig:
    initial_state: np.ndarray
    final_basis: str = "rho_tau"        # "rho_tau" | "energy" | "explicit"
    explicit_kets: Optional[tuple] = None


def _resolved_kets(m: np.ndarray):
    """Rank-1 (eigenvalue, ket) pairs, descending, ties resolved canonically."""
    out = []
    for lam, proj in la.resolved_projectors(m):
        # extract the ket from the rank-1 projector via its largest column
        j = int(np.argmax(np.linalg.norm(proj, axis=0)))
        ket = proj[:, j] / np.linalg.norm(proj[:, j])
        # fix the global phase: first significant component real positive
        nz = int(np.argmax(np.abs(ket) > 1e-8))
        ket = ket * np.exp(-1j * np.angle(ket[nz]))
        out.append((float(lam), ket))
    return out


def initial_outcomes(config: TPMConfig):
    """(probability, ket) per initial outcome, descending probability."""
    la.check_density_matrix(config.initial_state)
    return _resolved_kets(config.initial_state)


def sample_initial(config: TPMConfig, rng):
    """Draw the first projective outcome: (n0, ket, p_n0)."""
    outs = initial_outcomes(config)
    probs = np.maximum(np.array([p for p, _ in outs]), 0.0)
    probs = probs / probs.sum()
    u = float(rng.uniform())
    n0 = int(np.searchsorted(np.cumsum(probs), u, side="right"))
    n0 = min(n0, len(outs) - 1)
    return n0, outs[n0][1], float(probs[n0])


def final_outcomes(model: SystemModel, config: TPMConfig, rho_tau: np.ndarray):
    """(ensemble probability, ket) per final outcome.

    For the default basis these are the eigenvectors of the unconditional
    state at tau; ``energy`` uses the end-point Hamiltonian eigenbasis; an
    explicit ket list is validated for completeness.
    """
    if config.final_basis == "rho_tau":
        kets = [k for _, k in _resolved_kets(rho_tau)]
    elif config.final_basis == "energy":
        h = endpoint_hamiltonian(model, "final")
        kets = [k for _, k in _resolved_kets(h)]
    elif config.final_basis == "explicit":
        kets = [np.asarray(k, dtype=complex) for k in config.explicit_kets]
        gram = np.array([[np.vdot(a, b) for b in kets] for a in kets])
        if np.max(np.abs(gram - np.eye(len(kets)))) > 1e-10 or len(kets) != model.dim:
            raise ValueError("explicit final kets must form a complete orthonormal set")
    else:
        raise ValueError(f"unknown final basis {config.final_basis!r}")
    return [(float(np.vdot(k, rho_tau @ k).real), k) for k in kets]


def final_projective_measurement(psi: np.ndarray, outcomes, rng):
    """Project the conditional state: returns (n_tau, p_ntau, born_weight).

    The outcome is drawn with the Born weight of the conditional state; the
    reported probability is the ensemble one entering the entropy change.
    A zero ensemble probability is flagged by the caller (absolute
    irreversibility), not raised here.
    """
    q = np.array([abs(np.vdot(k, psi)) ** 2 for _, k in outcomes])
    q = q / q.sum()
    u = float(rng.uniform())
    n = min(int(np.searchsorted(np.cumsum(q), u, side="right")), len(outcomes) - 1)
    return n, float(outcomes[n][0]), float(q[n])


# ---------------------------------------------------------------------------
# Record probabilities


@dataclass
class TPMContext:
    """Shared data for evaluating record probabilities on a fixed grid."""

    model: SystemModel
    dt: float
    n_steps: int
    initial: list                     # (p, ket)
    final: list                       # (p, ket)
    table: StepTable = None
    _backward: Optional["TPMContext"] = field(default=None, repr=False)

    def __post_init__(self):
        if self.table is None:
            self.table = build_step_table(self.model, self.dt, self.n_steps)

    def backward(self) -> "TPMContext":
        """Context of the time-reversed process on the mirrored grid."""
        if self._backward is None:
            bmodel = time_reversed_model(self.model)
            theta = lambda k: theta_conjugate(self.model, np.outer(k, k.conj()))
            b_init = [(p, _ket_of(theta(k))) for p, k in self.final]
            b_fin = [(p, _ket_of(theta(k))) for p, k in self.initial]
            self._backward = TPMContext(
                model=bmodel, dt=self.dt, n_steps=self.n_steps,
                initial=b_init, final=b_fin,
            )
        return self._backward


def _ket_of(proj: np.ndarray) -> np.ndarray:
    j = int(np.argmax(np.linalg.norm(proj, axis=0)))
    k = proj[:, j] / np.linalg.norm(proj[:, j])
    nz = int(np.argmax(np.abs(k) > 1e-8))
    return k * np.exp(-1j * np.angle(k[nz]))


def make_context(model: SystemModel, rho0: np.ndarray, rho_tau: np.ndarray,
                 dt: float, n_steps: int, final_basis: str = "rho_tau") -> TPMContext:
    cfg = TPMConfig(initial_state=rho0, final_basis=final_basis)
    return TPMContext(
        model=model, dt=dt, n_steps=n_steps,
        initial=initial_outcomes(cfg),
        final=final_outcomes(model, cfg, rho_tau),
    )


def _slot(t: float, dt: float, n: int) -> int:
    return min(n - 1, max(0, int(np.floor(t / dt + 1e-9))))


def trajectory_operator(ctx: TPMContext, record: TrajectoryRecord):
    """Unnormalised evolution operator conditioned on the measurement record.

    Jump records give the matrix directly; diffusive records return
    ``(matrix, log_ostensible_weight)`` with the scalar reference-measure
    factor kept separate (only ratios of densities are ever used).
    """
    table = ctx.table
    n, dt = ctx.n_steps, ctx.dt
    if abs(record.dt - dt) > 1e-15 or abs(record.tau - n * dt) > 1e-9:
        raise GridMismatch(f"record grid ({record.dt}, {record.tau}) vs context ({dt}, {n * dt})")

    if record.scheme == "jump":
        fired = {}
        for ev in record.events:
            i = ev.step if ev.step >= 0 else _slot(ev.time, dt, n)
            if i in fired:
                raise GridMismatch("two jumps mapped to one step; refine dt")
            fired[i] = ev.channel
        out = np.eye(ctx.model.dim, dtype=complex)
        ids = table.channel_ids
        for i in range(n):
            if i in fired:
                k = ids.index(fired[i])
                out = (np.sqrt(dt) * table.jump_op(k, i)) @ out
            else:
                out = table.drift[i] @ out
        return out

    if record.currents is None:
        raise GridMismatch("diffusive record without stored currents")
    currents = np.asarray(record.currents)
    if currents.shape[0] != n:
        raise GridMismatch(f"current record has {currents.shape[0]} rows, grid has {n}")
    out = np.eye(ctx.model.dim, dtype=complex)
    log_ost = 0.0
    n_ch = len(ctx.model.channels)
    for i in range(n):
        omega = table.drift[i].copy()
        for k in range(n_ch):
            omega = omega + table.jump_op(k, i) * (currents[i, k] * dt)
        out = omega @ out
        log_ost += 0.5 * (
            n_ch * np.log(dt / (2.0 * np.pi)) - float(np.sum(currents[i] ** 2)) * dt
        )
    return out, log_ost


def record_sigma(ctx: TPMContext, record: TrajectoryRecord) -> float:
    """Entropy flow of a record from the per-channel quanta at the jump times."""
    if record.scheme != "jump":
        _require_zero_flow(ctx.model)
        return 0.0
    ids = ctx.table.channel_ids
    out = 0.0
    for ev in record.events:
        i = ev.step if ev.step >= 0 else _slot(ev.time, ctx.dt, ctx.n_steps)
        out += float(ctx.table.ds[i, ids.index(ev.channel)])
    return out


def _require_zero_flow(model: SystemModel):
    for c in model.channels:
        probe = model.protocol.evaluate(0.0)
        if not c.self_adjoint and abs(float(c.ds(probe))) > 1e-14:
            raise UnsupportedChannelSet(
                "diffusive backward processes need ds_k = 0 for every channel"
            )


def forward_record_probability(ctx: TPMContext, record: TrajectoryRecord) -> float:
    """p_n0 * |<n_tau| T(record) |n0>|^2 (a density for diffusive records)."""
    p0, k0 = ctx.initial[record.n0]
    _, k1 = ctx.final[record.n_tau]
    t_op = trajectory_operator(ctx, record)
    if record.scheme == "diffusive":
        t_op, _ = t_op
    amp = np.vdot(k1, t_op @ k0)
    return float(p0 * abs(amp) ** 2)


def reverse_record(ctx: TPMContext, record: TrajectoryRecord) -> TrajectoryRecord:
    """The time-reversed record: mirrored timestamps, end-points swapped.

    Channel ids are preserved because the backward model's channel ``k``
    already implements the adjoint twin of forward channel ``k``.  Mirrored
    jump times are re-binned on the backward grid (left-edge convention, as
    in the forward engine), which is where the O(dt) asymmetry of the
    discrete backward construction comes from.  Reversing a reversed record
    returns the original object.
    """
    if record.reverse_source is not None:
        return record.reverse_source
    tau, dt, n = record.tau, record.dt, ctx.n_steps
    if record.scheme == "jump":
        mirrored = []
        for ev in reversed(record.events):
            i = ev.step if ev.step >= 0 else _slot(ev.time, dt, n)
            t_m = tau - ev.time
            mirrored.append([min(n - 1, n - i), t_m, ev.channel])
        # binning collisions at the boundary: keep the time order strict
        for j in range(len(mirrored) - 2, -1, -1):
            mirrored[j][0] = min(mirrored[j][0], mirrored[j + 1][0] - 1)
        if mirrored and mirrored[0][0] < 0:
            raise GridMismatch("more mirrored jumps than backward grid slots")
        events = tuple(JumpEvent(step=s, time=t, channel=c) for s, t, c in mirrored)
        return TrajectoryRecord(
            scheme="jump", base_seed=record.base_seed, stream=record.stream,
            dt=dt, tau=tau, n0=record.n_tau, p_n0=record.p_ntau,
            n_tau=record.n0, p_ntau=record.p_n0, digest="", ledger=record.ledger,
            events=events, reverse_source=record,
        )
    currents = np.asarray(record.currents)[::-1].copy()
    return TrajectoryRecord(
        scheme="diffusive", base_seed=record.base_seed, stream=record.stream,
        dt=dt, tau=tau, n0=record.n_tau, p_n0=record.p_ntau,
        n_tau=record.n0, p_ntau=record.p_n0, digest="", ledger=record.ledger,
        currents=currents, reverse_source=record,
    )


def backward_record_probability(ctx: TPMContext, record: TrajectoryRecord) -> float:
    """Probability of the time-reversed record in the backward process."""
    if record.scheme == "diffusive":
        _require_zero_flow(ctx.model)
    bctx = ctx.backward()
    brec = reverse_record(ctx, record)
    p_tau = ctx.final[record.n_tau][0]
    _, k_start = bctx.initial[record.n_tau]
    _, k_end = bctx.final[record.n0]
    t_op = trajectory_operator(bctx, brec)
    if record.scheme == "diffusive":
        t_op, _ = t_op
    amp = np.vdot(k_end, t_op @ k_start)
    return float(p_tau * abs(amp) ** 2)


def _theta_sandwich_inv(model: SystemModel, a: np.ndarray) -> np.ndarray:
    """Theta^dag A Theta for Theta = U K."""
    if model.theta_unitary is None:
        return a.conj()
    u = model.theta_unitary
    return (u.conj().T @ a @ u).conj()


def microreversibility_residual(ctx: TPMContext, record: TrajectoryRecord) -> float:
    """max |Theta^dag T_bwd^dag Theta - T_fwd exp(-sigma/2)|; O(dt) on refinement."""
    if record.scheme == "diffusive":
        _require_zero_flow(ctx.model)
    sigma = record_sigma(ctx, record)
    t_f = trajectory_operator(ctx, record)
    bctx = ctx.backward()
    t_b = trajectory_operator(bctx, reverse_record(ctx, record))
    if record.scheme == "diffusive":
        t_f, _ = t_f
        t_b, _ = t_b
    lhs = _theta_sandwich_inv(ctx.model, la.adjoint(t_b))
    return float(np.max(np.abs(lhs - t_f * np.exp(-sigma / 2.0))))
