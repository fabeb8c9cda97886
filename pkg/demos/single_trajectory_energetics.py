"""Energetics of a single monitored trajectory.

A resonantly driven two-level system sits in a thermal environment whose
photon emissions and absorptions are counted.  Starting from a thermally
sampled eigenstate, the conditional wave function drifts smoothly between
detector clicks; every click exchanges one energy quantum with the bath.
This script runs one trajectory, prints its detector record, and closes the
books: the end-point energy change splits into quantised heat plus five work
components, and the leftover is the finite-step integration error.

Run:  python3 demos/single_trajectory_energetics.py
"""

import numpy as np

from trajtherm import build_preset, run_trajectory
from trajtherm.streams import TrajectoryStream
from trajtherm.trajectories import prepare_run

model = build_preset("driven_qubit_thermal", {"tau": 2500.0, "gamma0": 2e-3})
setup = prepare_run(model, "jump", dt=0.01, snapshot_stride=1000)

record = run_trajectory(model, "jump", TrajectoryStream(base_seed=21, stream=0),
                        setup=setup, keep_snapshots=True)

print(f"initial outcome  n0 = {record.n0} (p = {record.p_n0:.4f})")
print(f"final outcome    n_tau = {record.n_tau} (p = {record.p_ntau:.4f})")
print(f"detector record  ({len(record.events)} clicks):")
for ev in record.events:
    kind = "emission " if ev.channel == "minus" else "absorption"
    print(f"  t = {ev.time:8.2f}  {kind}")

led = record.ledger
print("\nledger (units of hbar*omega):")
print(f"  dE       = {led.dE:+.4f}")
print(f"  Q        = {led.heat_total:+.4f}   (exactly {round(led.heat_total)} quanta)")
print(f"  W_drive  = {led.w_drive:+.4f}")
print(f"  W_meas   = {led.w_meas:+.4f}")
print(f"  W_int    = {led.w_int:+.4e}")
print(f"  W_chem   = {led.w_chem:+.4f}")
print(f"  W_TPM    = {led.w_tpm:+.4f}")
print(f"  first-law residual = {led.first_law_residual:+.2e}")

# Bloch coordinates of the stored snapshots show the drive pulling the state
# toward the equator between clicks
print("\nBloch trace (every 10 hbar/omega):")
for t, psi, _ in record.snapshots[:: max(1, len(record.snapshots) // 12)]:
    x = 2 * (psi[0].conjugate() * psi[1]).real
    z = abs(psi[0]) ** 2 - abs(psi[1]) ** 2
    bar = "#" * int(22 * (1 + x) / 2)
    print(f"  t={t:7.1f}  x={x:+.3f} z={z:+.3f}  |{bar:<22s}|")
