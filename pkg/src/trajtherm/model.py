"""Declarative description of a monitored open quantum system.

A :class:`SystemModel` bundles the Hamiltonian split ``H = H_S + V(lambda)``,
the control protocol ``lambda(t)``, the monitoring channels with their
reservoir attribution and local-detailed-balance entropy quanta, the
conserved charges, and the initial state of the two-point-measurement
scenario.  Two presets reproduce the standard textbook situations:

* ``driven_qubit_thermal`` -- a resonantly driven two-level system whose
  photon emission/absorption into a thermal environment is counted
  (quantum-jump unraveling),
* ``dispersive_qubit`` -- a Rabi-driven qubit under continuous dispersive
  energy monitoring (pure dephasing, diffusive unraveling).

Energies are in units of hbar*omega, temperatures in energy units (k_B = 1).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from . import linalg as la
from . import tolerances as tol
from .errors import InvalidParam, OutOfWindow, UnknownPreset, ZeroRate

OperatorFn = Callable[[complex], np.ndarray]


@dataclass(frozen=True)
class ControlProtocol:
    """Control parameter lambda(t) on the window [0, tau].

    ``reversed_`` protocols evaluate the base function at tau - t, so that
    reversing twice reproduces the original evaluations exactly.
    """

    tau: float
    base: Callable[[float], complex]
    reversed_: bool = False

    def evaluate(self, t: float) -> complex:
        if t < -1e-12 or t > self.tau + 1e-12:
            raise OutOfWindow(f"t={t} outside [0, {self.tau}]")
        t = min(max(t, 0.0), self.tau)
        return self.base(self.tau - t) if self.reversed_ else self.base(t)

    def reverse(self) -> "ControlProtocol":
        return ControlProtocol(self.tau, self.base, not self.reversed_)


@dataclass(frozen=True)
class Reservoir:
    """Thermal (or generalised Gibbs) reservoir attached to some channels.

    ``potentials`` maps charge id to the generalised potential nu_i; the
    energy charge carries nu = +1 so that the average heat current reduces
    to sum_k tr[H_S D_k(rho)] in the pure-energy-exchange case.
    """

    id: str
    temperature: float
    potentials: dict = field(default_factory=lambda: {"energy": 1.0})

    def __post_init__(self):
        if self.temperature <= 0.0:
            raise InvalidParam(f"reservoir {self.id}: temperature must be > 0")


@dataclass(frozen=True)
class Charge:
    """Globally conserved quantity exchanged with the reservoirs."""

    id: str
    operator: OperatorFn
    commuting: bool = True


@dataclass(frozen=True)
class Channel:
    """A Lindblad monitoring channel.

    Self-adjoint channels (``partner is None``) satisfy L = L^dag and carry
    zero entropy quantum.  Paired channels satisfy the local detailed
    balance relation ``L_k = L_partner^dag * exp(ds_k / 2)`` with
    ``ds_k = log(rate_k / rate_partner)``.
    """

    id: str
    operator: OperatorFn
    reservoir: str
    partner: Optional[str] = None
    rate: Optional[float] = None
    ds: Callable[[complex], float] = lambda lam: 0.0

    @property
    def self_adjoint(self) -> bool:
        return self.partner is None


@dataclass(frozen=True)
class SystemModel:
    dim: int
    bare: OperatorFn                       # H_S(lambda)
    drive: OperatorFn                      # V(lambda)
    channels: tuple
    reservoirs: tuple
    charges: tuple
    protocol: ControlProtocol
    initial_state: Optional[np.ndarray] = None
    theta_unitary: Optional[np.ndarray] = None  # Theta = U * complex conjugation
    switched_drive: bool = True            # V on after the first projection, off before the last
    default_dt: float = 1e-2
    name: str = "custom"

    def reservoir(self, rid: str) -> Reservoir:
        for r in self.reservoirs:
            if r.id == rid:
                return r
        raise KeyError(rid)

    def channel(self, cid: str) -> Channel:
        for c in self.channels:
            if c.id == cid:
                return c
        raise KeyError(cid)


def hamiltonian_at(model: SystemModel, t: float) -> np.ndarray:
    """Full H(lambda_t) = H_S(lambda_t) + V(lambda_t) inside the drive window."""
    lam = model.protocol.evaluate(t)
    return model.bare(lam) + model.drive(lam)


def endpoint_hamiltonian(model: SystemModel, which: str) -> np.ndarray:
    """Hamiltonian against which the projective end-point energies are taken.

    With a switched drive the end-point measurements happen while V is off,
    so only the bare part enters; otherwise the full Hamiltonian does.
    """
    t = 0.0 if which == "initial" else model.protocol.tau
    lam = model.protocol.evaluate(t)
    h = model.bare(lam)
    if not model.switched_drive:
        h = h + model.drive(lam)
    return h


def theta_conjugate(model: SystemModel, op: np.ndarray) -> np.ndarray:
    """Antiunitary time-reversal action Theta A Theta^dag (default: entrywise conjugation)."""
    if model.theta_unitary is None:
        return op.conj()
    u = model.theta_unitary
    return u @ op.conj() @ u.conj().T


def channel_entropy_changes(model: SystemModel, lam: complex) -> dict:
    """Entropy quantum ds_k(lambda) per channel; zero for self-adjoint channels."""
    out = {}
    for ch in model.channels:
        if not ch.self_adjoint:
            if ch.rate is not None and ch.rate == 0.0:
                raise ZeroRate(f"channel {ch.id} has zero rate")
            partner = model.channel(ch.partner)
            if partner.rate is not None and partner.rate == 0.0:
                raise ZeroRate(f"channel {partner.id} has zero rate")
        out[ch.id] = 0.0 if ch.self_adjoint else float(ch.ds(lam))
    return out


@dataclass
class ValidationReport:
    hermiticity_ok: bool = True
    set_closed: bool = True
    pairing_residuals: dict = field(default_factory=dict)
    self_adjoint_residuals: dict = field(default_factory=dict)
    energy_jump: dict = field(default_factory=dict)  # id -> (holds, dE, residual)
    messages: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return (
            self.hermiticity_ok
            and self.set_closed
            and all(r < tol.PAIRING_TOL for r in self.pairing_residuals.values())
            and all(r < tol.PAIRING_TOL for r in self.self_adjoint_residuals.values())
        )


def validate_channel_set(model: SystemModel, n_lambda: int = 16) -> ValidationReport:
    """Structural checks on the channel set at sampled protocol values.

    Verifies Hamiltonian Hermiticity, closure of the channel set under
    adjoints, the local-detailed-balance pairing residual, and whether each
    channel promotes jumps in the bare-Hamiltonian basis, ``[H_S, L_k] =
    dE_k L_k``, extracting the system energy change dE_k when it does.
    """
    rep = ValidationReport()
    ts = np.linspace(0.0, model.protocol.tau, n_lambda)
    lams = [model.protocol.evaluate(t) for t in ts]

    for lam in lams:
        h = model.bare(lam) + model.drive(lam)
        if np.max(np.abs(h - la.adjoint(h))) > 1e-12 * max(1.0, np.max(np.abs(h))):
            rep.hermiticity_ok = False
            rep.messages.append(f"H(lambda={lam}) not Hermitian")
            break

    ids = {c.id for c in model.channels}
    for ch in model.channels:
        if ch.self_adjoint:
            r = max(
                float(np.max(np.abs(ch.operator(lam) - la.adjoint(ch.operator(lam)))))
                for lam in lams
            )
            rep.self_adjoint_residuals[ch.id] = r
            if r > tol.PAIRING_TOL:
                rep.messages.append(f"channel {ch.id} declared self-adjoint but L != L^dag")
        else:
            if ch.partner not in ids:
                rep.set_closed = False
                rep.messages.append(f"channel {ch.id} pairs with missing channel {ch.partner}")
                continue
            partner = model.channel(ch.partner)
            r = max(
                float(
                    np.max(
                        np.abs(
                            ch.operator(lam)
                            - la.adjoint(partner.operator(lam)) * np.exp(ch.ds(lam) / 2.0)
                        )
                    )
                )
                for lam in lams
            )
            rep.pairing_residuals[ch.id] = r
            if r > tol.PAIRING_TOL:
                rep.messages.append(f"channel pair ({ch.id}, {ch.partner}) violates detailed balance")

    for ch in model.channels:
        lam0 = lams[0]
        hs = model.bare(lam0)
        L = ch.operator(lam0)
        comm = hs @ L - L @ hs
        denom = np.vdot(L, L)
        c = complex(np.vdot(L, comm) / denom) if abs(denom) > 0 else 0.0
        resid = float(np.max(np.abs(comm - c * L)))
        holds = resid < tol.EIGENOP_TOL and abs(c.imag) < tol.EIGENOP_TOL
        rep.energy_jump[ch.id] = (holds, c.real if holds else None, resid)
    return rep


def time_reversed_model(model: SystemModel) -> SystemModel:
    """Backward-process model: reversed protocol, Theta-conjugated operators.

    Each backward channel keeps its forward id and implements
    ``Theta L_k^dag Theta^dag * exp(-ds_k/2)`` (the adjoint twin), so its
    entropy quantum is the negative of the forward one.
    """
    def conj_op(f: OperatorFn) -> OperatorFn:
        return lambda lam: theta_conjugate(model, f(lam))

    channels = []
    for ch in model.channels:
        fwd_op, fwd_ds = ch.operator, ch.ds
        def op(lam, _f=fwd_op, _ds=fwd_ds):
            return theta_conjugate(model, la.adjoint(_f(lam))) * np.exp(-float(_ds(lam)) / 2.0)
        partner_rate = None
        if ch.partner is not None:
            partner_rate = model.channel(ch.partner).rate
        channels.append(
            Channel(
                id=ch.id,
                operator=op,
                reservoir=ch.reservoir,
                partner=ch.partner,
                rate=partner_rate,
                ds=lambda lam, _ds=fwd_ds: -float(_ds(lam)),
            )
        )

    return replace(
        model,
        bare=conj_op(model.bare),
        drive=conj_op(model.drive),
        channels=tuple(channels),
        charges=tuple(
            Charge(c.id, conj_op(c.operator), c.commuting) for c in model.charges
        ),
        protocol=model.protocol.reverse(),
        initial_state=None,
        name=model.name + "~",
    )


# ---------------------------------------------------------------------------
# Presets

_DRIVEN_KEYS = {"omega", "gamma0", "epsilon", "T", "tau", "dt"}
_DISPERSIVE_KEYS = {"omega_q", "kappa", "omega_r", "T", "tau", "dt"}


def bose_occupation(omega: float, temperature: float) -> float:
    """Mean thermal photon number 1/(exp(omega/T) - 1)."""
    return 1.0 / np.expm1(omega / temperature)


def build_preset(name: str, params: Optional[dict] = None) -> SystemModel:
    """Construct one of the two bundled scenarios with optional overrides."""
    params = dict(params or {})
    if name == "driven_qubit_thermal":
        unknown = set(params) - _DRIVEN_KEYS
        if unknown:
            raise InvalidParam(f"unknown override(s) {sorted(unknown)} for {name}")
        omega = float(params.get("omega", 1.0))
        gamma0 = float(params.get("gamma0", 1e-3))
        eps = float(params.get("epsilon", 1e-2))
        temperature = float(params.get("T", 5.0))
        tau = float(params.get("tau", 100.0))
        dt = float(params.get("dt", 1e-2))
        if temperature <= 0 or gamma0 < 0 or omega <= 0:
            raise InvalidParam("need T > 0, gamma0 >= 0, omega > 0")

        nbar = bose_occupation(omega, temperature)
        hs = omega * np.array([[0.0, 0.0], [0.0, 1.0]], dtype=complex)
        ds_minus = omega / temperature

        def lam_fn(t, _eps=eps, _omega=omega):
            return _eps * np.exp(1j * _omega * t)

        def drive(lam):
            return np.conj(lam) * la.SIGMA_PLUS + lam * la.SIGMA_MINUS

        l_minus = np.sqrt(gamma0 * (nbar + 1.0)) * la.SIGMA_MINUS
        l_plus = np.sqrt(gamma0 * nbar) * la.SIGMA_PLUS
        channels = (
            Channel("minus", lambda lam: l_minus, "bath", partner="plus",
                    rate=gamma0 * (nbar + 1.0), ds=lambda lam: ds_minus),
            Channel("plus", lambda lam: l_plus, "bath", partner="minus",
                    rate=gamma0 * nbar, ds=lambda lam: -ds_minus),
        )
        return SystemModel(
            dim=2,
            bare=lambda lam: hs,
            drive=drive,
            channels=channels,
            reservoirs=(Reservoir("bath", temperature),),
            charges=(Charge("energy", lambda lam: hs),),
            protocol=ControlProtocol(tau, lam_fn),
            initial_state=la.gibbs_state(hs, temperature),
            default_dt=dt,
            name=name,
        )

    if name == "dispersive_qubit":
        unknown = set(params) - _DISPERSIVE_KEYS
        if unknown:
            raise InvalidParam(f"unknown override(s) {sorted(unknown)} for {name}")
        omega_q = float(params.get("omega_q", 1.0))
        kappa = float(params.get("kappa", 1e-3))
        omega_r = float(params.get("omega_r", 1e-2 * omega_q))
        temperature = float(params.get("T", omega_q))  # beta * omega_q = 1
        tau = float(params.get("tau", 1000.0))
        dt = float(params.get("dt", 1e-2))
        if temperature <= 0 or kappa <= 0:
            raise InvalidParam("need T > 0 and kappa > 0")

        hs = -0.5 * omega_q * la.SIGMA_Z

        def lam_fn(t, _or=omega_r, _oq=omega_q):
            return _or * np.cos(_oq * t)

        l_z = np.sqrt(kappa) * la.SIGMA_Z
        channels = (
            Channel("z", lambda lam: l_z, "meter", rate=kappa),
        )
        return SystemModel(
            dim=2,
            bare=lambda lam: hs,
            drive=lambda lam: float(np.real(lam)) * la.SIGMA_Y,
            channels=channels,
            reservoirs=(Reservoir("meter", temperature),),
            charges=(Charge("energy", lambda lam: hs),),
            protocol=ControlProtocol(tau, lam_fn),
            initial_state=la.gibbs_state(hs, temperature),
            default_dt=dt,
            name=name,
        )

    raise UnknownPreset(name)


def preset_names() -> tuple:
    return ("driven_qubit_thermal", "dispersive_qubit")
