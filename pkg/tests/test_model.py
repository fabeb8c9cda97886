import numpy as np
import pytest

from trajtherm import linalg as la
from trajtherm.errors import InvalidParam, OutOfWindow, UnknownPreset, ZeroRate
from trajtherm.model import (
    Channel,
    ControlProtocol,
    Reservoir,
    SystemModel,
    bose_occupation,
    build_preset,
    channel_entropy_changes,
    endpoint_hamiltonian,
    hamiltonian_at,
    time_reversed_model,
    validate_channel_set,
)


class TestPresets:
    def test_driven_defaults(self):
        m = build_preset("driven_qubit_thermal")
        assert m.channel("minus").rate == pytest.approx(1e-3 * (bose_occupation(1.0, 5.0) + 1))
        assert m.channel("plus").rate == pytest.approx(1e-3 * bose_occupation(1.0, 5.0))
        assert abs(m.protocol.evaluate(0.0)) == pytest.approx(1e-2)
        assert m.reservoir("bath").temperature == 5.0

    def test_nbar_analytic(self):
        # 1/(e^{omega/T} - 1) at T = 5 omega
        assert bose_occupation(1.0, 5.0) == pytest.approx(4.5167, abs=5e-5)

    def test_dispersive_defaults(self):
        m = build_preset("dispersive_qubit")
        assert m.channel("z").rate == pytest.approx(1e-3)
        assert abs(m.protocol.evaluate(0.0)) == pytest.approx(1e-2)
        # beta * omega_q = 1 puts the excited-state weight at 0.269
        p_exc = np.linalg.eigvalsh(m.initial_state).min()
        assert p_exc == pytest.approx(0.2689, abs=5e-5)

    def test_gibbs_initial_occupation(self):
        m = build_preset("driven_qubit_thermal")
        p1 = m.initial_state[1, 1].real
        assert p1 == pytest.approx(np.exp(-0.2) / (1 + np.exp(-0.2)), abs=1e-12)
        assert p1 == pytest.approx(0.4502, abs=5e-5)

    def test_unknown_preset(self):
        with pytest.raises(UnknownPreset):
            build_preset("nope")

    def test_invalid_params(self):
        with pytest.raises(InvalidParam):
            build_preset("driven_qubit_thermal", {"T": -1.0})
        with pytest.raises(InvalidParam):
            build_preset("dispersive_qubit", {"kappa": 0.0})
        with pytest.raises(InvalidParam):
            build_preset("driven_qubit_thermal", {"bogus": 1.0})


class TestHamiltonian:
    def test_driven_at_zero(self):
        m = build_preset("driven_qubit_thermal")
        h = hamiltonian_at(m, 0.0)
        expected = np.diag([0.0, 1.0]) + 0.01 * la.SIGMA_X
        assert np.max(np.abs(h - expected)) < 1e-14

    def test_dispersive_no_drive(self):
        m = build_preset("dispersive_qubit", {"omega_r": 0.0})
        for t in (0.0, 3.7, 500.0):
            assert np.max(np.abs(hamiltonian_at(m, t) + 0.5 * la.SIGMA_Z)) < 1e-14

    def test_zero_drive_strength(self):
        m = build_preset("driven_qubit_thermal", {"epsilon": 0.0})
        for t in (0.0, 11.0, 99.9):
            assert np.max(np.abs(hamiltonian_at(m, t) - m.bare(0))) < 1e-15

    def test_out_of_window(self):
        m = build_preset("driven_qubit_thermal", {"tau": 10.0})
        with pytest.raises(OutOfWindow):
            hamiltonian_at(m, 11.0)

    def test_hermitian_over_protocol(self):
        for name in ("driven_qubit_thermal", "dispersive_qubit"):
            m = build_preset(name)
            rng = np.random.default_rng(5)
            for t in rng.uniform(0, m.protocol.tau, size=100):
                h = hamiltonian_at(m, t)
                assert np.max(np.abs(h - la.adjoint(h))) < 1e-12

    def test_endpoints_are_bare(self):
        # switched drive: the TPM end-points see H_S only
        m = build_preset("driven_qubit_thermal")
        assert np.allclose(endpoint_hamiltonian(m, "initial"), np.diag([0, 1.0]))
        assert np.allclose(endpoint_hamiltonian(m, "final"), np.diag([0, 1.0]))


class TestEntropyQuanta:
    def test_driven_thermal_quanta(self):
        m = build_preset("driven_qubit_thermal")
        ds = channel_entropy_changes(m, 0.0)
        assert ds["minus"] == pytest.approx(0.2, abs=1e-12)
        assert ds["plus"] == pytest.approx(-0.2, abs=1e-12)

    def test_dispersive_zero(self):
        m = build_preset("dispersive_qubit")
        assert channel_entropy_changes(m, 0.0) == {"z": 0.0}

    def test_equal_rates_zero(self):
        # infinite-temperature limit: both directions at equal rates
        L = la.SIGMA_MINUS
        chans = (
            Channel("down", lambda lam: L, "bath", partner="up", rate=1.0,
                    ds=lambda lam: 0.0),
            Channel("up", lambda lam: la.SIGMA_PLUS, "bath", partner="down", rate=1.0,
                    ds=lambda lam: 0.0),
        )
        m = SystemModel(
            dim=2, bare=lambda lam: np.zeros((2, 2), complex),
            drive=lambda lam: np.zeros((2, 2), complex), channels=chans,
            reservoirs=(Reservoir("bath", 1.0),), charges=(),
            protocol=ControlProtocol(1.0, lambda t: 0.0),
        )
        ds = channel_entropy_changes(m, 0.0)
        assert ds == {"down": 0.0, "up": 0.0}

    def test_zero_rate_rejected(self):
        m = build_preset("driven_qubit_thermal")
        bad = Channel("minus", m.channel("minus").operator, "bath",
                      partner="plus", rate=0.0, ds=lambda lam: 0.2)
        m2 = SystemModel(**{**vars(m), "channels": (bad, m.channel("plus"))})
        with pytest.raises(ZeroRate):
            channel_entropy_changes(m2, 0.0)


class TestValidation:
    def test_pairing_residual_small(self):
        for name in ("driven_qubit_thermal", "dispersive_qubit"):
            rep = validate_channel_set(build_preset(name), n_lambda=100)
            assert rep.ok
            for r in rep.pairing_residuals.values():
                assert r < 1e-10

    def test_energy_jump_extraction(self):
        rep = validate_channel_set(build_preset("driven_qubit_thermal"))
        holds, de, _ = rep.energy_jump["minus"]
        assert holds and de == pytest.approx(-1.0)
        holds, de, _ = rep.energy_jump["plus"]
        assert holds and de == pytest.approx(1.0)

    def test_dispersive_energy_jump_zero(self):
        rep = validate_channel_set(build_preset("dispersive_qubit"))
        holds, de, _ = rep.energy_jump["z"]
        assert holds and de == pytest.approx(0.0, abs=1e-12)

    def test_unpaired_channel_reported(self):
        m = build_preset("driven_qubit_thermal")
        lonely = Channel("minus", m.channel("minus").operator, "bath",
                         partner="ghost", rate=1.0, ds=lambda lam: 0.2)
        m2 = SystemModel(**{**vars(m), "channels": (lonely,)})
        rep = validate_channel_set(m2)
        assert not rep.set_closed and not rep.ok


class TestProtocol:
    def test_double_reverse_pointwise(self):
        m = build_preset("driven_qubit_thermal")
        p2 = m.protocol.reverse().reverse()
        rng = np.random.default_rng(6)
        for t in rng.uniform(0, m.protocol.tau, size=50):
            assert abs(p2.evaluate(t) - m.protocol.evaluate(t)) < 1e-15

    def test_reversed_evaluates_mirrored(self):
        m = build_preset("dispersive_qubit", {"tau": 10.0})
        rev = m.protocol.reverse()
        for t in (0.0, 2.5, 7.0):
            assert rev.evaluate(t) == pytest.approx(m.protocol.evaluate(10.0 - t))


class TestTimeReversedModel:
    def test_backward_channels_are_adjoint_twins(self):
        m = build_preset("driven_qubit_thermal")
        bm = time_reversed_model(m)
        # Theta L_minus^dag Theta^dag e^{-ds/2} equals the plus operator
        lb = bm.channel("minus").operator(0.0)
        expected = np.conj(la.adjoint(m.channel("minus").operator(0.0))) * np.exp(-0.1)
        assert np.max(np.abs(lb - expected)) < 1e-14
        assert bm.channel("minus").ds(0.0) == pytest.approx(-0.2)
        # the backward dissipator strength is unchanged as a set
        g_f = sum(la.adjoint(c.operator(0.0)) @ c.operator(0.0) for c in m.channels)
        g_b = sum(la.adjoint(c.operator(0.0)) @ c.operator(0.0) for c in bm.channels)
        assert np.max(np.abs(g_f - g_b)) < 1e-15


class TestGibbsFixedPoint:
    def test_undriven_dissipator_fixes_gibbs(self):
        from trajtherm.lindblad import liouvillian_rhs

        m = build_preset("driven_qubit_thermal", {"epsilon": 0.0})
        gibbs = la.gibbs_state(m.bare(0), 5.0)
        assert np.max(np.abs(liouvillian_rhs(m, 0.0, gibbs))) < 1e-10
