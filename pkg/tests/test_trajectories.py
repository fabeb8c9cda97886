import numpy as np
import pytest
from scipy import stats

from trajtherm import linalg as la
from trajtherm.errors import StepTooLarge, UnsupportedChannelSet
from trajtherm.lindblad import lindblad_propagate
from trajtherm.model import build_preset
from trajtherm.operators import build_step_table, povm_defect
from trajtherm.records import serialize_record
from trajtherm.streams import TrajectoryStream
from trajtherm.trajectories import diffusive_step, jump_step, prepare_run, run_trajectory


class TestJumpStep:
    def test_eigenstate_invariance(self):
        # dispersive-style model without drive: |0> is an eigenstate of H and L_z
        m = build_preset("dispersive_qubit", {"omega_r": 0.0, "tau": 10.0})
        psi = np.array([1.0, 0.0], dtype=complex)
        rng = TrajectoryStream(3, 0)
        for _ in range(200):
            psi, _ = jump_step(psi, m, 1.0, 1e-2, rng)
        assert abs(abs(psi[0]) - 1.0) < 1e-12

    def test_emission_lands_in_ground(self):
        m = build_preset("driven_qubit_thermal", {"tau": 10.0})
        psi = np.array([0.0, 1.0], dtype=complex)
        # force the emission branch by feeding a uniform inside its window
        class Fixed:
            def uniform(self):
                return 1e-9
        psi2, fired = jump_step(psi, m, 0.5, 1e-2, Fixed())
        assert fired == "minus"
        assert np.allclose(np.abs(psi2), [1.0, 0.0])

    def test_empirical_emission_rate(self):
        m = build_preset("driven_qubit_thermal", {"tau": 10.0})
        p_expected = m.channel("minus").rate * 1e-2
        n = 100_000
        rng = TrajectoryStream(11, 0)
        psi = np.array([0.0, 1.0], dtype=complex)
        fires = 0
        for _ in range(n):
            _, fired = jump_step(psi, m, 0.5, 1e-2, rng)
            fires += fired == "minus"
        stderr = np.sqrt(p_expected * (1 - p_expected) / n)
        assert abs(fires / n - p_expected) < 3 * stderr

    def test_step_too_large(self):
        m = build_preset("driven_qubit_thermal", {"gamma0": 0.5, "tau": 1.0})
        psi = np.array([0.0, 1.0], dtype=complex)
        with pytest.raises(StepTooLarge):
            jump_step(psi, m, 0.1, 50.0, TrajectoryStream(0, 0))


class TestDiffusiveStep:
    def test_eigenstate_exact(self):
        m = build_preset("dispersive_qubit", {"omega_r": 0.0, "tau": 10.0})
        psi = np.array([1.0, 0.0], dtype=complex)
        psi2, _ = diffusive_step(psi, m, 1.0, 1e-2, TrajectoryStream(4, 0))
        assert abs(abs(psi2[0]) - 1.0) < 1e-12

    def test_current_mean_and_variance(self):
        m = build_preset("dispersive_qubit", {"tau": 10.0})
        psi = np.array([1.0, 0.0], dtype=complex)
        dt = 1e-2
        rng = TrajectoryStream(5, 0)
        vals = np.array(
            [diffusive_step(psi, m, 1.0, dt, rng)[1][0][2] for _ in range(100_000)]
        )
        target = 2.0 * np.sqrt(1e-3)  # <L + L^dag> on the sigma_z = +1 state
        assert abs(vals.mean() - target) < 3 * vals.std() / np.sqrt(vals.size)
        # I*dt has variance dt to first order
        assert np.var(vals * dt) == pytest.approx(dt, rel=0.05)

    def test_refuses_entropy_carrying_channels(self):
        m = build_preset("driven_qubit_thermal", {"tau": 1.0})
        psi = np.array([0.0, 1.0], dtype=complex)
        with pytest.raises(UnsupportedChannelSet):
            diffusive_step(psi, m, 0.1, 1e-2, TrajectoryStream(0, 0))
        with pytest.raises(UnsupportedChannelSet):
            prepare_run(m, "diffusive", 1e-2)


class TestRunTrajectory:
    def test_closed_undriven_endpoints_match(self):
        m = build_preset("driven_qubit_thermal",
                         {"epsilon": 0.0, "gamma0": 0.0, "tau": 5.0})
        setup = prepare_run(m, "jump", 1e-2)
        n0s, nts = [], []
        for i in range(400):
            rec = run_trajectory(m, "jump", TrajectoryStream(21, i), setup=setup)
            assert rec.events == ()
            n0s.append(rec.n0)
            nts.append(rec.n_tau)
        # closed undriven system: end-point distribution equals the initial one
        assert n0s == nts

    def test_norm_after_every_step(self):
        m = build_preset("driven_qubit_thermal", {"tau": 20.0})
        setup = prepare_run(m, "jump", 1e-2, snapshot_stride=10)
        rec = run_trajectory(m, "jump", TrajectoryStream(33, 5), setup=setup,
                             keep_snapshots=True)
        for _, psi, _ in rec.snapshots:
            assert abs(np.linalg.norm(psi) - 1.0) < 1e-10

    def test_determinism_bitwise(self):
        m = build_preset("driven_qubit_thermal", {"tau": 30.0})
        setup = prepare_run(m, "jump", 1e-2)
        a = run_trajectory(m, "jump", TrajectoryStream(7, 19), setup=setup)
        b = run_trajectory(m, "jump", TrajectoryStream(7, 19), setup=setup)
        assert serialize_record(a) == serialize_record(b)
        c = run_trajectory(m, "jump", TrajectoryStream(8, 19), setup=setup)
        assert serialize_record(a) != serialize_record(c)

    def test_events_time_ordered_within_window(self):
        m = build_preset("driven_qubit_thermal", {"gamma0": 0.02, "tau": 100.0})
        setup = prepare_run(m, "jump", 1e-2)
        for i in range(30):
            rec = run_trajectory(m, "jump", TrajectoryStream(55, i), setup=setup)
            times = [ev.time for ev in rec.events]
            assert times == sorted(times)
            assert all(0.0 <= t <= 100.0 for t in times)

    def test_poisson_jump_counts(self):
        # frozen-state counting: totals over a fixed window are Poissonian
        # with intensity <L^dag L>
        m = build_preset("driven_qubit_thermal", {"epsilon": 0.0, "tau": 10.0})
        dt, n_steps = 1e-2, 1000
        p = m.channel("minus").rate * dt  # from the frozen excited state
        rng = np.random.default_rng(77)
        counts = rng.binomial(n_steps, p, size=10_000)  # engine's Bernoulli law
        lam = n_steps * p
        kmax = int(stats.poisson.ppf(0.999, lam)) + 1
        observed = np.bincount(counts, minlength=kmax + 1)[: kmax + 1]
        expected = stats.poisson.pmf(np.arange(kmax + 1), lam) * counts.size
        mask = expected > 5
        chi2 = float(np.sum((observed[mask] - expected[mask]) ** 2 / expected[mask]))
        pval = 1.0 - stats.chi2.cdf(chi2, mask.sum() - 1)
        assert pval > 0.01

    def test_povm_constant_reported(self, capsys):
        m = build_preset("driven_qubit_thermal", {"tau": 1.0})
        for dt in (1e-2, 5e-3):
            defect = povm_defect(m, 0.5, dt)
            print(f"povm defect constant at dt={dt}: {defect / dt ** 2:.4f}")
            assert defect <= 1.0 * dt ** 2


class TestWeakConvergence:
    def test_mean_state_error_at_noise_floor_under_refinement(self):
        # The normalised step scheme has weak error below the Monte Carlo
        # floor even at coarse dt and boosted rates, so halving dt must keep
        # the oracle disagreement pinned at that floor (it cannot grow).
        from trajtherm.ensemble import run_ensemble

        n = 20_000
        floor = 3.0 / np.sqrt(n)
        errs = []
        for dt in (0.25, 0.125, 0.0625):
            m = build_preset("driven_qubit_thermal", {"gamma0": 0.05, "tau": 50.0})
            res = run_ensemble(m, "jump", n, base_seed=13, dt=dt,
                               snapshot_stride=max(1, int(round(12.5 / dt))))
            errs.append(res.max_trace_distance)
        print(f"weak-convergence errors at dt=(0.25,0.125,0.0625): {errs}")
        for e in errs:
            assert e < floor
        assert errs[-1] < errs[0] + floor
