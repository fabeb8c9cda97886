"""Trajectory records and their one-line persistence format.

A records file starts with a self-describing header line and then carries
one record per line, tab-separated, fields in this fixed order::

    scheme seed stream dt tau n0 p_n0 digest n_tau p_ntau
    dE heat sigma w_drive w_chem w_meas w_int w_tpm
    s_sys s_tot s_unc s_mar s_ad s_na flag

Floats are printed with %.17g so that parse(serialize(r)) reproduces the
row exactly.  ``s_ad``/``s_na`` are ``NA`` when the adiabatic split does not
apply to the model.  ``digest`` is a short fingerprint of the measurement
record: the exact event list for jump trajectories, and a running summary
(count, per-channel sums of I dt and (I dt)^2, first/last samples) for
diffusive ones.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .thermo import ThermoLedger

HEADER = (
    "# trajtherm-records v1\t"
    "scheme\tseed\tstream\tdt\ttau\tn0\tp_n0\tdigest\tn_tau\tp_ntau\t"
    "dE\theat\tsigma\tw_drive\tw_chem\tw_meas\tw_int\tw_tpm\t"
    "s_sys\ts_tot\ts_unc\ts_mar\ts_ad\ts_na\tflag"
)


@dataclass(frozen=True)
class JumpEvent:
    step: int
    time: float
    channel: str


@dataclass
class EPRecord:
    ds_system: float = np.nan
    s_tot: float = np.nan
    s_unc: float = np.nan
    s_mar: float = np.nan
    s_ad: Optional[float] = None   # None = split not applicable
    s_na: Optional[float] = None
    zero_prob: bool = False


@dataclass
class TrajectoryRecord:
    scheme: str                   # "jump" | "diffusive"
    base_seed: int
    stream: int
    dt: float
    tau: float
    n0: int
    p_n0: float
    n_tau: int
    p_ntau: float
    digest: str
    ledger: ThermoLedger
    events: tuple = ()            # jump scheme
    s_psi: float = np.nan         # -log <psi_tau| rho_tau |psi_tau>
    ep: EPRecord = field(default_factory=EPRecord)
    psi_final: Optional[np.ndarray] = None
    snapshots: Optional[list] = None
    currents: Optional[np.ndarray] = None
    zero_prob: bool = False
    reverse_source: Optional["TrajectoryRecord"] = None


def jump_digest(events) -> str:
    h = hashlib.sha256(b"J")
    h.update(np.int64(len(events)).tobytes())
    for ev in events:
        h.update(np.int64(ev.step).tobytes())
        h.update(ev.channel.encode())
    return h.hexdigest()[:16]


def current_digest(count: int, sum_idt: np.ndarray, sum_idt2: np.ndarray,
                   first, last) -> str:
    """Fingerprint of a diffusive current record from its running summary.

    Values are quantised to 1e-9 before hashing so that equivalent
    accumulation orders (scalar vs batched) fingerprint identically.
    """
    def q(x):
        return np.round(np.asarray(x, dtype=float), 9).tobytes()

    h = hashlib.sha256(b"D")
    h.update(np.int64(count).tobytes())
    h.update(q(sum_idt))
    h.update(q(sum_idt2))
    if first is not None:
        h.update(q(first))
        h.update(q(last))
    return h.hexdigest()[:16]


class CurrentDigest:
    """Streaming fingerprint of a diffusive current record."""

    def __init__(self, n_channels: int):
        self.count = 0
        self.sum_idt = np.zeros(n_channels)
        self.sum_idt2 = np.zeros(n_channels)
        self.first = None
        self.last = np.zeros(n_channels)

    def update(self, i_dt: np.ndarray) -> None:
        if self.first is None:
            self.first = np.array(i_dt, dtype=float)
        self.count += 1
        self.sum_idt += i_dt
        self.sum_idt2 += i_dt * i_dt
        self.last = np.array(i_dt, dtype=float)

    def hexdigest(self) -> str:
        return current_digest(self.count, self.sum_idt, self.sum_idt2, self.first, self.last)


def _f(x: float) -> str:
    return "%.17g" % float(x)


def _opt(x) -> str:
    return "NA" if x is None else _f(x)


def serialize_record(rec: TrajectoryRecord) -> str:
    led = rec.ledger
    ep = rec.ep
    fields = [
        rec.scheme,
        str(rec.base_seed),
        str(rec.stream),
        _f(rec.dt),
        _f(rec.tau),
        str(rec.n0),
        _f(rec.p_n0),
        rec.digest,
        str(rec.n_tau),
        _f(rec.p_ntau),
        _f(led.dE),
        _f(led.heat_total),
        _f(led.sigma_total),
        _f(led.w_drive),
        _f(led.w_chem),
        _f(led.w_meas),
        _f(led.w_int),
        _f(led.w_tpm),
        _f(ep.ds_system),
        _f(ep.s_tot),
        _f(ep.s_unc),
        _f(ep.s_mar),
        _opt(ep.s_ad),
        _opt(ep.s_na),
        "1" if rec.zero_prob else "0",
    ]
    return "\t".join(fields)


def parse_record_line(line: str) -> dict:
    """Parse one record line back into a field dict (exact float round-trip)."""
    parts = line.rstrip("\n").split("\t")
    names = [
        "scheme", "seed", "stream", "dt", "tau", "n0", "p_n0", "digest",
        "n_tau", "p_ntau", "dE", "heat", "sigma", "w_drive", "w_chem",
        "w_meas", "w_int", "w_tpm", "s_sys", "s_tot", "s_unc", "s_mar",
        "s_ad", "s_na", "flag",
    ]
    if len(parts) != len(names):
        raise ValueError(f"record line has {len(parts)} fields, expected {len(names)}")
    out = {}
    ints = {"seed", "stream", "n0", "n_tau"}
    strs = {"scheme", "digest"}
    opts = {"s_ad", "s_na"}
    for name, val in zip(names, parts):
        if name in strs:
            out[name] = val
        elif name in ints:
            out[name] = int(val)
        elif name == "flag":
            out[name] = val == "1"
        elif name in opts:
            out[name] = None if val == "NA" else float(val)
        else:
            out[name] = float(val)
    return out


def record_row(rec: TrajectoryRecord) -> dict:
    """The persisted-field projection of a record (what the line format keeps)."""
    return parse_record_line(serialize_record(rec))


def write_records(path, records) -> None:
    with open(path, "w") as fh:
        fh.write(HEADER + "\n")
        for rec in records:
            fh.write(serialize_record(rec) + "\n")


def read_records(path) -> list:
    rows = []
    with open(path) as fh:
        header = fh.readline()
        if not header.startswith("# trajtherm-records"):
            raise ValueError("not a trajtherm records file")
        for line in fh:
            if line.strip():
                rows.append(parse_record_line(line))
    return rows
