"""Monte Carlo ensembles: batched trajectory execution, mergeable statistics,
histograms and FT convergence series.

Trajectories are executed in fixed-size batches over vectorised state
arrays; each trajectory still owns its counter-based stream, so results are
bit-for-bit identical to the scalar engine and independent of batching or
thread count.  Statistics accumulate in a streaming (Welford) form with
log-domain accumulators for the exponential FT functionals.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import linalg as la
from . import tolerances as tol
from .entropy import SplitGate, attach_ep, split_gate
from .errors import EmptyInput, NormCollapse
from .model import SystemModel
from .records import JumpEvent, TrajectoryRecord, current_digest, jump_digest
from .streams import TrajectoryStream, uniform_to_normal
from .thermo import ThermoLedger, jump_work_terms
from .trajectories import RunSetup, prepare_run

BATCH = 16384  # fixed batch size: worker count must not change the arithmetic


# ---------------------------------------------------------------------------
# Streaming statistics


@dataclass
class QuantityStats:
    count: int = 0
    mean: float = 0.0
    m2: float = 0.0
    min: float = math.inf
    max: float = -math.inf

    def push(self, x: float) -> None:
        self.count += 1
        d = x - self.mean
        self.mean += d / self.count
        self.m2 += d * (x - self.mean)
        self.min = min(self.min, x)
        self.max = max(self.max, x)

    def merge(self, other: "QuantityStats") -> "QuantityStats":
        if self.count == 0:
            return QuantityStats(**vars(other))
        if other.count == 0:
            return QuantityStats(**vars(self))
        n = self.count + other.count
        d = other.mean - self.mean
        mean = self.mean + d * other.count / n
        m2 = self.m2 + other.m2 + d * d * self.count * other.count / n
        return QuantityStats(n, mean, m2, min(self.min, other.min), max(self.max, other.max))

    @property
    def variance(self) -> float:
        return self.m2 / (self.count - 1) if self.count > 1 else 0.0

    @property
    def stderr(self) -> float:
        return math.sqrt(self.variance / self.count) if self.count > 1 else 0.0


@dataclass
class FTAccumulator:
    """log-domain accumulator for <exp(-S)> and its standard error."""

    count: int = 0
    lse1: float = -math.inf    # log sum exp(-S)
    lse2: float = -math.inf    # log sum exp(-2S)

    def push(self, s: float) -> None:
        self.count += 1
        self.lse1 = np.logaddexp(self.lse1, -s)
        self.lse2 = np.logaddexp(self.lse2, -2.0 * s)

    def merge(self, other: "FTAccumulator") -> "FTAccumulator":
        return FTAccumulator(
            self.count + other.count,
            np.logaddexp(self.lse1, other.lse1),
            np.logaddexp(self.lse2, other.lse2),
        )

    @property
    def mean(self) -> float:
        return float(np.exp(self.lse1 - math.log(self.count))) if self.count else math.nan

    @property
    def stderr(self) -> float:
        if self.count < 2:
            return math.nan
        m = self.mean
        m2 = float(np.exp(self.lse2 - math.log(self.count)))
        return math.sqrt(max(m2 - m * m, 0.0) / self.count)


_QUANTITIES = (
    "dE", "heat", "sigma", "w_drive", "w_chem", "w_meas", "w_int", "w_tpm",
    "first_law_residual", "s_sys", "s_tot", "s_unc", "s_mar", "s_ad", "s_na",
)
_FT_QUANTITIES = ("s_tot", "s_unc", "s_mar", "s_ad", "s_na")


@dataclass
class EnsembleStats:
    quantities: dict = field(default_factory=lambda: {q: QuantityStats() for q in _QUANTITIES})
    ft: dict = field(default_factory=lambda: {q: FTAccumulator() for q in _FT_QUANTITIES})
    excluded: int = 0            # zero-probability (absolutely irreversible) records

    def push_record(self, rec: TrajectoryRecord) -> None:
        if rec.zero_prob:
            self.excluded += 1
            return
        led, ep = rec.ledger, rec.ep
        vals = {
            "dE": led.dE, "heat": led.heat_total, "sigma": led.sigma_total,
            "w_drive": led.w_drive, "w_chem": led.w_chem, "w_meas": led.w_meas,
            "w_int": led.w_int, "w_tpm": led.w_tpm,
            "first_law_residual": led.first_law_residual,
            "s_sys": ep.ds_system, "s_tot": ep.s_tot, "s_unc": ep.s_unc,
            "s_mar": ep.s_mar, "s_ad": ep.s_ad, "s_na": ep.s_na,
        }
        for q, v in vals.items():
            if v is not None and np.isfinite(v):
                self.quantities[q].push(float(v))
        for q in _FT_QUANTITIES:
            v = vals[q]
            if v is not None and np.isfinite(v):
                self.ft[q].push(float(v))

    def merge(self, other: "EnsembleStats") -> "EnsembleStats":
        out = EnsembleStats()
        out.quantities = {q: self.quantities[q].merge(other.quantities[q]) for q in _QUANTITIES}
        out.ft = {q: self.ft[q].merge(other.ft[q]) for q in _FT_QUANTITIES}
        out.excluded = self.excluded + other.excluded
        return out

    @classmethod
    def from_records(cls, records) -> "EnsembleStats":
        st = cls()
        for r in records:
            st.push_record(r)
        return st


# ---------------------------------------------------------------------------
# Histograms and convergence series


@dataclass
class Histogram:
    edges: np.ndarray
    counts: np.ndarray
    density: np.ndarray


def histogram(samples, binning="auto") -> Histogram:
    """Counts plus density normalised by N * binwidth."""
    s = np.asarray(samples, dtype=float)
    if s.size == 0:
        raise EmptyInput("no samples to histogram")
    if isinstance(binning, str):
        counts, edges = np.histogram(s, bins=binning)
    else:
        counts, edges = np.histogram(s, bins=np.asarray(binning, dtype=float))
    width = np.diff(edges)
    density = counts / (s.size * width)
    return Histogram(edges, counts, density)


def convergence_series(samples) -> np.ndarray:
    """Running mean of exp(-S) in stream order: rows (n, running_mean)."""
    from .entropy import integral_ft_estimate

    _, _, running = integral_ft_estimate(samples)
    return np.column_stack([np.arange(1, len(running) + 1), running])


def support_points(samples, decimals: int = 9) -> int:
    """Number of distinct values in a sample set (atomic distributions)."""
    return int(np.unique(np.round(np.asarray(samples, dtype=float), decimals)).size)


# ---------------------------------------------------------------------------
# Batched execution


def _ev_rows(m: np.ndarray, psi: np.ndarray) -> np.ndarray:
    """Row-wise <psi| m |psi> (real part) for stacked states."""
    return np.einsum("ni,ni->n", psi.conj(), psi @ m.T).real


def _run_batch(setup: RunSetup, base_seed: int, indices, gate: SplitGate,
               cp_steps: np.ndarray):
    """Run one batch of trajectories; returns (records, rho_sums at checkpoints)."""
    model, table = setup.model, setup.table
    dt, n = setup.dt, setup.n_steps
    scheme = setup.scheme
    nrow = len(indices)
    d = model.dim
    ids = table.channel_ids
    n_ch = len(ids)
    res_ids = [r.id for r in model.reservoirs]
    res_of = {c.id: res_ids.index(c.reservoir) for c in model.channels}

    streams = [TrajectoryStream(base_seed, i) for i in indices]
    init_p = np.maximum(np.array([p for p, _ in setup.initial]), 0.0)
    init_p = init_p / init_p.sum()
    init_kets = np.array([k for _, k in setup.initial])
    u0 = np.array([s.uniform() for s in streams])
    n0 = np.minimum(np.searchsorted(np.cumsum(init_p), u0), len(init_p) - 1).astype(int)
    psi = init_kets[n0].astype(complex)

    w_drive = np.zeros(nrow)
    w_meas = np.zeros(nrow)
    w_int = np.zeros(nrow)
    w_chem = np.zeros(nrow)
    sigma = np.zeros((nrow, len(res_ids)))
    heat = np.zeros((nrow, len(res_ids)))
    temps = np.array([r.temperature for r in model.reservoirs])
    events = [[] for _ in range(nrow)]
    dig_sum = np.zeros((nrow, n_ch))
    dig_sum2 = np.zeros((nrow, n_ch))
    dig_first = np.zeros((nrow, n_ch))
    dig_last = np.zeros((nrow, n_ch))

    if model.switched_drive:
        v0 = model.drive(model.protocol.evaluate(0.0))
        w_drive += _ev_rows(v0, psi)

    cp_set = {int(s): j for j, s in enumerate(cp_steps)}
    rho_sums = np.zeros((len(cp_steps), d, d), dtype=complex)
    if 0 in cp_set:
        rho_sums[cp_set[0]] += np.einsum("ni,nj->ij", psi, psi.conj())

    draws_per_step = 1 if scheme == "jump" else n_ch
    block = max(1, min(n, int(6_000_000 / max(1, nrow * draws_per_step))))
    sqdt = np.sqrt(dt)

    i = 0
    while i < n:
        blen = min(block, n - i)
        raw = np.stack([s.uniforms(blen * draws_per_step) for s in streams])
        if scheme == "jump":
            ublock = raw.reshape(nrow, blen)
        else:
            dwblock = uniform_to_normal(raw).reshape(nrow, blen, n_ch) * sqdt

        for b in range(blen):
            step = i + b
            h = table.h[step]
            e_pre = _ev_rows(h, psi)
            hdot_pre = _ev_rows(table.hdot[step], psi)

            if scheme == "jump":
                probs = np.stack(
                    [dt * _ev_rows(table.g_single(k, step), psi) for k in range(n_ch)],
                    axis=1,
                )
                edges = np.cumsum(probs, axis=1)
                u = ublock[:, b]
                kidx = np.sum(u[:, None] >= edges, axis=1)
                fired_rows = np.nonzero(kidx < n_ch)[0]
                new_psi = psi @ table.drift[step].T
                for r in fired_rows:
                    k = int(kidx[r])
                    cid = ids[k]
                    dwm, dwi, dwc = jump_work_terms(psi[r], model, table, step, cid)
                    w_meas[r] += dwm
                    w_int[r] += dwi
                    w_chem[r] += dwc
                    j = res_of[cid]
                    sigma[r, j] += table.ds[step, k]
                    heat[r, j] += -temps[j] * table.ds[step, k]
                    events[r].append(JumpEvent(step=step, time=step * dt, channel=cid))
                    new_psi[r] = table.jump_op(k, step) @ psi[r]
                psi = new_psi
            else:
                dw = dwblock[:, b, :]
                update = psi @ table.drift[step].T
                i_dt = np.empty((nrow, n_ch))
                for k in range(n_ch):
                    L = table.jump_op(k, step)
                    lpsi = psi @ L.T
                    lk = np.einsum("ni,ni->n", psi.conj(), lpsi)
                    i_dt[:, k] = 2.0 * lk.real * dt + dw[:, k]
                    update = update + lpsi * i_dt[:, k, None]
                if step == 0:
                    dig_first[:] = i_dt
                dig_sum += i_dt
                dig_sum2 += i_dt * i_dt
                dig_last[:] = i_dt
                psi = update

            norms = np.linalg.norm(psi, axis=1)
            if norms.min() < tol.NORM_COLLAPSE:
                bad = int(np.argmin(norms))
                raise NormCollapse(
                    f"trajectory {indices[bad]} collapsed at step {step} (norm {norms.min():.2e})"
                )
            psi = psi / norms[:, None]

            # measurement work: realised fixed-time energy change of the
            # update; driving work: trapezoidal midpoint rule (exact dH
            # increment on the post state across fired steps)
            e_post = _ev_rows(h, psi)
            hdot_post = _ev_rows(table.hdot[step], psi)
            if scheme == "jump":
                no_jump = kidx >= n_ch
                w_meas[no_jump] += e_post[no_jump] - e_pre[no_jump]
                w_drive[no_jump] += (
                    0.5 * (hdot_pre[no_jump] + hdot_post[no_jump]) * dt
                )
                if fired_rows.size:
                    fired = ~no_jump
                    w_drive[fired] += _ev_rows(table.h[step + 1] - h, psi[fired])
            else:
                w_meas += e_post - e_pre
                w_drive += 0.5 * (hdot_pre + hdot_post) * dt

            if (step + 1) in cp_set:
                rho_sums[cp_set[step + 1]] += np.einsum("ni,nj->ij", psi, psi.conj())
        i += blen

    if model.switched_drive:
        vt = model.drive(model.protocol.evaluate(model.protocol.tau))
        w_drive -= _ev_rows(vt, psi)

    rho_tau = setup.rho_tau
    overlap = np.maximum(_ev_rows(rho_tau, psi), 1e-300)
    s_psi = -np.log(overlap)

    fin_kets = np.array([k for _, k in setup.final])
    fin_p = np.array([p for p, _ in setup.final])
    born = np.abs(psi @ fin_kets.conj().T) ** 2
    born = born / born.sum(axis=1, keepdims=True)
    uf = np.array([s.uniform() for s in streams])
    n_tau = np.minimum(
        (uf[:, None] >= np.cumsum(born, axis=1)).sum(axis=1), len(fin_p) - 1
    ).astype(int)

    from .model import endpoint_hamiltonian

    h_ini = endpoint_hamiltonian(model, "initial")
    h_fin = endpoint_hamiltonian(model, "final")
    e_ini = np.array([np.vdot(k, h_ini @ k).real for k in init_kets])
    e_fin = np.array([np.vdot(k, h_fin @ k).real for k in fin_kets])
    w_tpm = e_fin[n_tau] - _ev_rows(h_fin, psi)
    de = e_fin[n_tau] - e_ini[n0]

    records = []
    for r in range(nrow):
        ledger = ThermoLedger(
            dE=float(de[r]),
            sigma={rid: float(sigma[r, j]) for j, rid in enumerate(res_ids)},
            heat={rid: float(heat[r, j]) for j, rid in enumerate(res_ids)},
            w_drive=float(w_drive[r]), w_chem=float(w_chem[r]),
            w_meas=float(w_meas[r]), w_int=float(w_int[r]), w_tpm=float(w_tpm[r]),
            t_last=n * dt,
        )
        p_ntau = float(fin_p[n_tau[r]])
        if scheme == "jump":
            digest = jump_digest(events[r])
        else:
            digest = current_digest(n, dig_sum[r], dig_sum2[r],
                                    dig_first[r] if n > 0 else None, dig_last[r])
        rec = TrajectoryRecord(
            scheme=scheme, base_seed=base_seed, stream=int(indices[r]), dt=dt,
            tau=n * dt, n0=int(n0[r]), p_n0=float(init_p[n0[r]]),
            n_tau=int(n_tau[r]), p_ntau=p_ntau, digest=digest, ledger=ledger,
            events=tuple(events[r]), s_psi=float(s_psi[r]), psi_final=psi[r].copy(),
            zero_prob=p_ntau < tol.ZERO_PROB,
        )
        attach_ep(rec, model, gate)
        records.append(rec)
    return records, rho_sums


@dataclass
class EnsembleResult:
    setup: RunSetup
    records: list
    stats: EnsembleStats
    gate: SplitGate
    checkpoint_times: np.ndarray
    mean_states: np.ndarray       # ensemble-averaged conditional states
    oracle_states: np.ndarray
    trace_distances: np.ndarray
    failed: int = 0

    @property
    def max_trace_distance(self) -> float:
        return float(self.trace_distances.max())

    def samples(self, quantity: str, include_excluded: bool = False) -> np.ndarray:
        """Per-record values of a ledger/EP quantity, in stream order."""
        out = []
        for rec in self.records:
            if rec.zero_prob and not include_excluded:
                continue
            led, ep = rec.ledger, rec.ep
            val = {
                "dE": led.dE, "heat": led.heat_total, "sigma": led.sigma_total,
                "w_drive": led.w_drive, "w_chem": led.w_chem, "w_meas": led.w_meas,
                "w_int": led.w_int, "w_tpm": led.w_tpm,
                "first_law_residual": led.first_law_residual,
                "s_sys": ep.ds_system, "s_tot": ep.s_tot, "s_unc": ep.s_unc,
                "s_mar": ep.s_mar, "s_ad": ep.s_ad, "s_na": ep.s_na,
                "p_n0": rec.p_n0, "p_ntau": rec.p_ntau, "n0": rec.n0,
                "n_tau": rec.n_tau, "s_psi": rec.s_psi,
            }[quantity]
            out.append(np.nan if val is None else val)
        return np.asarray(out, dtype=float)


def run_ensemble(model: SystemModel, scheme: str, n: int, base_seed: int,
                 dt: Optional[float] = None, final_basis: str = "rho_tau",
                 snapshot_stride: int = 100, threads: int = 1,
                 oracle_dt: Optional[float] = None,
                 setup: Optional[RunSetup] = None) -> EnsembleResult:
    """N independent trajectories on streams (base_seed, 0..N-1).

    Batches have a fixed size, so the merged result is identical for any
    thread count; statistics are computed in stream order.
    """
    if n < 1:
        raise EmptyInput("need at least one trajectory")
    if setup is None:
        setup = prepare_run(model, scheme, dt, final_basis, snapshot_stride,
                            oracle_dt=oracle_dt)
    gate = split_gate(model)
    n_cp = setup.n_steps // setup.snapshot_stride
    cp_steps = np.arange(0, (n_cp + 1) * setup.snapshot_stride, setup.snapshot_stride)
    cp_steps = cp_steps[cp_steps <= setup.n_steps]
    if cp_steps[-1] != setup.n_steps:
        cp_steps = np.append(cp_steps, setup.n_steps)

    batches = [range(s, min(s + BATCH, n)) for s in range(0, n, BATCH)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(
                pool.map(lambda ix: _run_batch(setup, base_seed, ix, gate, cp_steps), batches)
            )
    else:
        parts = [_run_batch(setup, base_seed, ix, gate, cp_steps) for ix in batches]

    records = []
    rho_sum = np.zeros((len(cp_steps), model.dim, model.dim), dtype=complex)
    for recs, rs in parts:
        records.extend(recs)
        rho_sum += rs
    mean_states = rho_sum / n
    times = cp_steps * setup.dt
    oracle_states = np.array([setup.rho_path.at(t) for t in times])
    dists = np.array(
        [la.trace_distance(a, b) for a, b in zip(mean_states, oracle_states)]
    )
    stats = EnsembleStats.from_records(records)
    return EnsembleResult(
        setup=setup, records=records, stats=stats, gate=gate,
        checkpoint_times=times, mean_states=mean_states,
        oracle_states=oracle_states, trace_distances=dists,
    )
