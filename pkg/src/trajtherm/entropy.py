"""Entropy production per trajectory, its decompositions, and FT estimators.

The total entropy production of a record is the surprisal change of the TPM
end-points plus the entropy flow to the reservoirs.  Two exact splits are
provided: uncertainty/martingale (always defined) and adiabatic/
non-adiabatic (defined only when the channels step the nonequilibrium
potential by fixed quanta, which is checked per model on a control-parameter
grid, not per record).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import linalg as la
from . import tolerances as tol
from .errors import AbsoluteIrreversibility, EmptyInput
from .lindblad import steady_state
from .model import SystemModel
from .records import EPRecord, TrajectoryRecord


def system_entropy_change(p_initial: float, p_final: float) -> float:
    """Surprisal change -log p_final + log p_initial of the end-points."""
    if p_final <= tol.ZERO_PROB:
        raise AbsoluteIrreversibility(f"final outcome probability {p_final} ~ 0")
    return float(-np.log(p_final) + np.log(p_initial))


def total_entropy_production(record: TrajectoryRecord) -> float:
    return system_entropy_change(record.p_n0, record.p_ntau) + record.ledger.sigma_total


def uncertainty_martingale_split(record: TrajectoryRecord):
    """(S_unc, S_mar): final-projection uncertainty vs the end-point-free part.

    S_unc = -log p_ntau - S_psi and S_mar = S_psi + log p_n0 + sigma, which
    sum to the total entropy production identically.
    """
    if record.p_ntau <= tol.ZERO_PROB:
        raise AbsoluteIrreversibility(f"final outcome probability {record.p_ntau} ~ 0")
    s_unc = -np.log(record.p_ntau) - record.s_psi
    s_mar = record.s_psi + np.log(record.p_n0) + record.ledger.sigma_total
    return float(s_unc), float(s_mar)


def uncertainty_bounds(rho_tau_eigenvalues) -> tuple:
    """(lower, upper) = (log(p_min/p_max), log(p_max/p_min)) for S_unc."""
    p = np.clip(np.asarray(rho_tau_eigenvalues, dtype=float), tol.POTENTIAL_FLOOR, None)
    lo = float(np.log(p.min() / p.max()))
    return lo, -lo


# ---------------------------------------------------------------------------
# Adiabatic / non-adiabatic split


@dataclass
class SplitGate:
    """Per-model applicability of the adiabatic/non-adiabatic split.

    ``dphi`` maps channel id to the jump quantum of the nonequilibrium
    potential Phi = -log pi (empty when not applicable).  ``capped`` flags
    steady-state populations that hit the log floor.
    """

    applicable: bool
    reason: str = ""
    dphi: dict = field(default_factory=dict)
    capped: bool = False


def split_gate(model: SystemModel, n_lambda: int = 64) -> SplitGate:
    """Check [Phi_lam, L_k] = dphi_k L_k and [H_lam, Phi_lam] = 0 on a lambda grid."""
    taus = np.linspace(0.0, model.protocol.tau, n_lambda)
    lams = sorted({complex(model.protocol.evaluate(t)) for t in taus}, key=lambda z: (z.real, z.imag))
    dphi_all = {c.id: [] for c in model.channels}
    capped = False
    for lam in lams:
        ss = steady_state(model, lam)
        w, v = np.linalg.eigh(ss.state)
        if w.min() < tol.POTENTIAL_FLOOR:
            capped = True
        w = np.clip(w, tol.POTENTIAL_FLOOR, None)
        phi = (v * (-np.log(w))) @ v.conj().T
        h = model.bare(lam) + model.drive(lam)
        if np.max(np.abs(h @ phi - phi @ h)) > tol.EIGENOP_TOL:
            return SplitGate(False, f"[H, Phi] != 0 at lambda={lam:.4g}")
        for c in model.channels:
            L = c.operator(lam)
            comm = phi @ L - L @ phi
            denom = np.vdot(L, L)
            coef = complex(np.vdot(L, comm) / denom) if abs(denom) > 0 else 0.0
            resid = float(np.max(np.abs(comm - coef * L)))
            if resid > tol.EIGENOP_TOL or abs(coef.imag) > tol.EIGENOP_TOL:
                return SplitGate(
                    False, f"[Phi, L_{c.id}] is not proportional to L_{c.id} at lambda={lam:.4g}"
                )
            dphi_all[c.id].append(coef.real)
    dphi = {}
    for cid, vals in dphi_all.items():
        vals = np.asarray(vals)
        if vals.size and np.ptp(vals) > 1e-6:
            # quantum varies with the control parameter; store the grid for lookup
            dphi[cid] = ("grid", lams, vals)
        else:
            dphi[cid] = ("const", float(vals[0]) if vals.size else 0.0)
    return SplitGate(True, dphi=dphi, capped=capped)


def _dphi_at(gate: SplitGate, cid: str, lam: complex) -> float:
    spec = gate.dphi[cid]
    if spec[0] == "const":
        return spec[1]
    _, lams, vals = spec
    j = int(np.argmin([abs(l - lam) for l in lams]))
    return float(vals[j])


def adiabatic_nonadiabatic_split(record: TrajectoryRecord, model: SystemModel,
                                 gate: SplitGate):
    """(S_ad, S_na) when the gate is open, otherwise None.

    S_ad = sigma + dPhi accumulates over jumps only; S_na = dS - dPhi.
    """
    if not gate.applicable:
        return None
    dphi = 0.0
    for ev in record.events:
        lam = model.protocol.evaluate(min(max(ev.time, 0.0), model.protocol.tau))
        dphi += _dphi_at(gate, ev.channel, lam)
    ds = system_entropy_change(record.p_n0, record.p_ntau)
    s_ad = record.ledger.sigma_total + dphi
    s_na = ds - dphi
    return float(s_ad), float(s_na)


def attach_ep(record: TrajectoryRecord, model: SystemModel, gate: SplitGate) -> EPRecord:
    """Fill the EP fields of a record; zero-probability outcomes are flagged
    (infinite entropy production) instead of raised."""
    ep = EPRecord()
    if record.zero_prob:
        ep.zero_prob = True
        ep.ds_system = np.inf
        ep.s_tot = np.inf
        ep.s_unc = np.inf
        ep.s_mar = record.s_psi + np.log(record.p_n0) + record.ledger.sigma_total
        record.ep = ep
        return ep
    ep.ds_system = system_entropy_change(record.p_n0, record.p_ntau)
    ep.s_tot = ep.ds_system + record.ledger.sigma_total
    ep.s_unc, ep.s_mar = uncertainty_martingale_split(record)
    split = adiabatic_nonadiabatic_split(record, model, gate)
    if split is not None:
        ep.s_ad, ep.s_na = split
    record.ep = ep
    return ep


# ---------------------------------------------------------------------------
# Fluctuation-theorem estimators


def integral_ft_estimate(samples):
    """Mean of exp(-S) with its standard error and the running-mean series.

    Accumulation happens in the log domain, so very negative S values do not
    overflow.  Infinite samples must be excluded (and counted) upstream.
    """
    s = np.asarray(samples, dtype=float)
    if s.size == 0:
        raise EmptyInput("no samples")
    if not np.all(np.isfinite(s)):
        raise ValueError("non-finite entropy samples; exclude flagged records first")
    neg = -s
    m = neg.max()
    exps = np.exp(neg - m)
    cum = np.cumsum(exps)
    running = np.exp(m) * cum / np.arange(1, s.size + 1)
    mean = float(running[-1])
    # second moment via the same shift
    mean2 = float(np.exp(2 * m) * np.mean(np.exp(2 * (neg - m))))
    var = max(mean2 - mean ** 2, 0.0)
    stderr = float(np.sqrt(var / s.size))
    return mean, stderr, running


def tail_bound_check(samples, x: float):
    """(empirical P(S <= -x), bound e^-x, pass) for x >= 0."""
    if x < 0:
        raise ValueError("x must be >= 0")
    s = np.asarray(samples, dtype=float)
    freq = float(np.mean(s <= -x))
    bound = float(np.exp(-x))
    stderr = np.sqrt(max(freq * (1 - freq), 1.0 / s.size) / s.size)
    return freq, bound, bool(freq <= bound + 3.0 * stderr)


def kl_irreversibility(samples):
    """Sample mean of S_tot (the forward/backward KL divergence) with stderr."""
    s = np.asarray(samples, dtype=float)
    mean = float(np.mean(s))
    stderr = float(np.std(s, ddof=1) / np.sqrt(s.size)) if s.size > 1 else 0.0
    return mean, stderr
