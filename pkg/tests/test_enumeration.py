import numpy as np
import pytest

from trajtherm.enumeration import (
    enumerate_jump_records,
    forward_probability_deficit,
    max_detailed_ft_residual,
)
from trajtherm.errors import TooLarge
from trajtherm.lindblad import lindblad_propagate
from trajtherm.model import build_preset


def undriven(tau, gamma0=0.05):
    return build_preset("driven_qubit_thermal",
                        {"epsilon": 0.0, "tau": tau, "gamma0": gamma0})


class TestEnumeration:
    def test_closed_system_single_record(self):
        tau, n = 0.3, 3
        m = build_preset("driven_qubit_thermal",
                         {"epsilon": 0.0, "gamma0": 0.0, "tau": tau})
        rho0 = np.diag([1.0, 0.0]).astype(complex)
        res = lindblad_propagate(m, rho0, tau, tau / n)
        recs, _ = enumerate_jump_records(m, n, tau / n, rho0, res.final)
        live = [r for r in recs if r.p_fwd > 1e-12]
        assert len(live) == 1
        assert live[0].p_fwd == pytest.approx(1.0, abs=1e-9)
        assert live[0].events == ()

    def test_completeness_deficit_fixed_duration(self):
        # fixed duration, refining dt: deficit ~ dt (log-log slope 1 +- 0.2)
        tau = 0.6
        deficits = []
        for n in (2, 4, 8):
            m = undriven(tau)
            res = lindblad_propagate(m, m.initial_state, tau, tau / n / 10)
            recs, _ = enumerate_jump_records(m, n, tau / n, m.initial_state, res.final)
            deficits.append(abs(forward_probability_deficit(recs)))
        slopes = -np.diff(np.log2(deficits))
        for s in slopes:
            assert 0.8 < s < 1.2

    def test_completeness_deficit_fixed_steps(self):
        # fixed n = 3, shrinking dt: deficit ~ dt^2, so C = deficit/dt halves
        n = 3
        coeffs = []
        for dt in (0.2, 0.1, 0.05):
            m = undriven(n * dt)
            res = lindblad_propagate(m, m.initial_state, n * dt, dt / 10)
            recs, _ = enumerate_jump_records(m, n, dt, m.initial_state, res.final)
            coeffs.append(abs(forward_probability_deficit(recs)) / dt)
        assert coeffs[1] < 0.65 * coeffs[0]
        assert coeffs[2] < 0.65 * coeffs[1]

    def test_detailed_ft_residual_scaling(self):
        tau = 0.6
        resids = []
        for n in (3, 6):
            m = undriven(tau)
            res = lindblad_propagate(m, m.initial_state, tau, tau / n / 10)
            recs, _ = enumerate_jump_records(m, n, tau / n, m.initial_state, res.final)
            resids.append(max_detailed_ft_residual(recs))
        slope = np.log2(resids[0] / resids[1])
        assert 0.8 <= slope <= 1.2
        assert resids[0] <= 1.0 * (tau / 3)

    def test_per_record_detailed_ft(self):
        tau, n = 0.6, 3
        m = undriven(tau)
        res = lindblad_propagate(m, m.initial_state, tau, tau / n / 10)
        recs, _ = enumerate_jump_records(m, n, tau / n, m.initial_state, res.final)
        for r in recs:
            if r.p_fwd > 1e-12 and np.isfinite(r.detailed_ft_residual):
                assert abs(np.log(r.p_fwd / r.p_bwd) - r.s_tot) == r.detailed_ft_residual

    def test_too_large(self):
        m = undriven(1.0)
        with pytest.raises(TooLarge):
            enumerate_jump_records(m, 14, 1.0 / 14, m.initial_state, m.initial_state)
