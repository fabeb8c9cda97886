"""Stochastic trajectory engines (scalar reference implementation).

One step of the jump scheme fires channel k with probability dt <L_k^dag L_k>
(one uniform per step against stacked thresholds) and otherwise applies the
no-detection factor; one diffusive step applies the current-conditioned
measurement operator with I_k = <L_k + L_k^dag> + dw_k/dt.  States are
renormalised after every update.

The ensemble module reruns the same arithmetic over batched state arrays;
this scalar path is the readable reference and the one used for single
trajectories (demos, time-series output).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import linalg as la
from . import tolerances as tol
from .errors import NormCollapse, StepTooLarge, UnsupportedChannelSet
from .lindblad import lindblad_propagate
from .model import SystemModel
from .operators import StepTable, build_step_table, drift_factor, no_jump_propagator  # noqa: F401
from .records import CurrentDigest, JumpEvent, TrajectoryRecord, jump_digest
from .streams import TrajectoryStream, virtual_stream
from .thermo import (
    ThermoLedger,
    diffusive_work_step,
    energy_change,
    finalize_heat,
    finalize_tpm_work,
    switch_work,
    work_decomposition_step,
)
from .tpm import TPMConfig, final_outcomes, final_projective_measurement, sample_initial


def _renorm(psi: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(psi)
    if n < tol.NORM_COLLAPSE:
        raise NormCollapse(f"state norm {n:.3e} below {tol.NORM_COLLAPSE}")
    return psi / n


def jump_step(psi: np.ndarray, model: SystemModel, t: float, dt: float, rng):
    """One detection step: returns (updated state, fired channel id or None)."""
    lam = model.protocol.evaluate(t)
    ops = [c.operator(lam) for c in model.channels]
    probs = np.array([dt * np.vdot(psi, la.adjoint(L) @ (L @ psi)).real for L in ops])
    if probs.size and probs.max() >= 0.1:
        raise StepTooLarge(f"dt * <L^dag L> = {probs.max():.3f} >= 0.1")
    u = float(rng.uniform())
    edges = np.cumsum(probs)
    if probs.size and u < edges[-1]:
        k = int(np.searchsorted(edges, u, side="right"))
        return _renorm(ops[k] @ psi), model.channels[k].id
    return _renorm(drift_factor(model, t, dt) @ psi), None


def diffusive_step(psi: np.ndarray, model: SystemModel, t: float, dt: float, rng):
    """One homodyne-like step: returns (updated state, current samples).

    Only channel sets with ds_k = 0 qualify; the backward construction does
    not exist otherwise.
    """
    lam = model.protocol.evaluate(t)
    for c in model.channels:
        if not c.self_adjoint and abs(float(c.ds(lam))) > 1e-14:
            raise UnsupportedChannelSet("diffusive monitoring needs ds_k = 0 channels")
    ops = [c.operator(lam) for c in model.channels]
    dw = rng.normals(len(ops)) * np.sqrt(dt)
    currents = []
    update = drift_factor(model, t, dt) @ psi
    for k, L in enumerate(ops):
        x = 2.0 * np.vdot(psi, L @ psi).real
        i_k = x + dw[k] / dt
        currents.append((t, model.channels[k].id, float(i_k)))
        update = update + (i_k * dt) * (L @ psi)
    return _renorm(update), currents


@dataclass
class RunSetup:
    """Precomputed per-run data shared by every trajectory of an ensemble."""

    model: SystemModel
    scheme: str
    dt: float
    n_steps: int
    table: StepTable
    config: TPMConfig
    initial: list                # (p, ket)
    final: list                  # (p, ket)
    rho_path: object             # MasterEquationResult at snapshot times
    snapshot_stride: int

    @property
    def rho_tau(self) -> np.ndarray:
        return self.rho_path.final


def prepare_run(model: SystemModel, scheme: str, dt: Optional[float] = None,
                final_basis: str = "rho_tau", snapshot_stride: int = 100,
                oracle_dt: Optional[float] = None) -> RunSetup:
    from .tpm import initial_outcomes

    dt = float(dt if dt is not None else model.default_dt)
    tau = model.protocol.tau
    n_steps = int(round(tau / dt))
    table = build_step_table(model, dt, n_steps)

    # engine validity: jump probabilities must stay deep in the linear regime
    gmax = max(
        float(np.linalg.eigvalsh(table.g_tot(i)).max())
        for i in (0, n_steps // 2, n_steps - 1)
    )
    if dt * gmax >= 0.1:
        raise StepTooLarge(f"dt * max<L^dag L> bound {dt * gmax:.3f} >= 0.1")
    if scheme == "diffusive":
        for k, c in enumerate(model.channels):
            if not c.self_adjoint and np.max(np.abs(table.ds[:, k])) > 1e-14:
                raise UnsupportedChannelSet("diffusive monitoring needs ds_k = 0 channels")

    stride = max(1, int(snapshot_stride))
    odt = float(oracle_dt) if oracle_dt is not None else dt
    per = max(1, int(round(stride * dt / odt)))
    odt = stride * dt / per
    rho_path = lindblad_propagate(model, model.initial_state, tau, odt, checkpoint_stride=per)
    cfg = TPMConfig(initial_state=model.initial_state, final_basis=final_basis)
    return RunSetup(
        model=model, scheme=scheme, dt=dt, n_steps=n_steps, table=table,
        config=cfg, initial=initial_outcomes(cfg),
        final=final_outcomes(model, cfg, rho_path.final),
        rho_path=rho_path, snapshot_stride=stride,
    )


def run_trajectory(model: SystemModel, scheme: str, stream: TrajectoryStream,
                   dt: Optional[float] = None, final_basis: str = "rho_tau",
                   snapshot_stride: int = 100, keep_currents: bool = False,
                   setup: Optional[RunSetup] = None,
                   keep_snapshots: bool = False) -> TrajectoryRecord:
    """Complete TPM trajectory: initial sampling, monitored evolution with
    thermodynamic accounting, final projection."""
    if setup is None:
        setup = prepare_run(model, scheme, dt, final_basis, snapshot_stride)
    table, dt, n = setup.table, setup.dt, setup.n_steps
    model = setup.model

    ledger = ThermoLedger()
    n0, psi, p_n0 = sample_initial(setup.config, stream)
    proj0 = la.projector(psi)
    switch_work(ledger, model, proj0, "on")

    def ledger_snapshot():
        return {
            "sigma": dict(ledger.sigma), "w_drive": ledger.w_drive,
            "w_meas": ledger.w_meas, "w_chem": ledger.w_chem, "w_int": ledger.w_int,
        }

    events = []
    snapshots = [(0.0, psi.copy(), ledger_snapshot())] if keep_snapshots else None
    currents = np.empty((n, len(model.channels))) if (scheme == "diffusive" and keep_currents) else None
    cdigest = CurrentDigest(len(model.channels)) if scheme == "diffusive" else None
    ids = table.channel_ids

    for i in range(n):
        if scheme == "jump":
            probs = np.array(
                [dt * np.vdot(psi, table.g_single(k, i) @ psi).real
                 for k in range(len(ids))]
            )
            u = stream.uniform()
            edges = np.cumsum(probs)
            fired = None
            if probs.size and u < edges[-1]:
                fired = ids[int(np.searchsorted(edges, u, side="right"))]
            if fired is None:
                post = _renorm(table.drift[i] @ psi)
            else:
                k = ids.index(fired)
                post = _renorm(table.jump_op(k, i) @ psi)
                events.append(JumpEvent(step=i, time=i * dt, channel=fired))
            work_decomposition_step(ledger, psi, model, table, i, fired, psi_post=post)
            psi = post
        else:
            dw = stream.normals(len(ids)) * np.sqrt(dt)
            update = table.drift[i] @ psi
            i_dt = np.empty(len(ids))
            for k in range(len(ids)):
                L = table.jump_op(k, i)
                x = 2.0 * np.vdot(psi, L @ psi).real
                i_dt[k] = x * dt + dw[k]
                update = update + i_dt[k] * (L @ psi)
            cdigest.update(i_dt)
            if currents is not None:
                currents[i] = i_dt / dt
            post = _renorm(update)
            diffusive_work_step(ledger, psi, model, table, i, post)
            psi = post
        if keep_snapshots and (i + 1) % setup.snapshot_stride == 0:
            snapshots.append(((i + 1) * dt, psi.copy(), ledger_snapshot()))

    switch_work(ledger, model, psi, "off")
    rho_tau = setup.rho_tau
    s_psi = -np.log(max(np.vdot(psi, rho_tau @ psi).real, 1e-300))
    n_tau, p_ntau, _ = final_projective_measurement(psi, setup.final, stream)
    ket_fin = setup.final[n_tau][1]
    finalize_tpm_work(ledger, psi, la.projector(ket_fin), model)
    finalize_heat(ledger, model)
    ledger.dE = energy_change(model, proj0, la.projector(ket_fin))

    digest = jump_digest(events) if scheme == "jump" else cdigest.hexdigest()
    return TrajectoryRecord(
        scheme=scheme, base_seed=stream.base_seed, stream=stream.stream,
        dt=dt, tau=n * dt, n0=n0, p_n0=p_n0, n_tau=n_tau, p_ntau=p_ntau,
        digest=digest, ledger=ledger, events=tuple(events), s_psi=float(s_psi),
        psi_final=psi, snapshots=snapshots, currents=currents,
        zero_prob=p_ntau < tol.ZERO_PROB,
    )
