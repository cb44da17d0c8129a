import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cavity_ecs.propagator import (
    PropagatorError,
    SystemParams,
    aux_frequencies,
    fast_period,
    generator_matrix,
    mode_coefficients,
    propagator_numeric,
    revival_half_period,
)

RESONANT = SystemParams(omega_c=0.0, delta=0.0, g=30.0, c_hop=1.0)
DETUNED = SystemParams(delta=-500.0)
LOSSY = SystemParams(gamma_c=0.05, gamma_e=0.001)

params_st = st.builds(
    SystemParams,
    omega_c=st.floats(-5, 5),
    delta=st.floats(-600, 600),
    g=st.floats(0.01, 50),
    c_hop=st.floats(0, 5),
    gamma_c=st.floats(0, 0.2),
    gamma_e=st.floats(0, 0.2),
)
times_st = st.floats(0, 1)


class TestSystemParams:
    @pytest.mark.parametrize("field", ["g", "c_hop", "gamma_c", "gamma_e"])
    def test_rejects_negative(self, field):
        with pytest.raises(PropagatorError, match=field):
            SystemParams(**{field: -0.1})

    @pytest.mark.parametrize("value", [np.nan, np.inf])
    def test_rejects_non_finite(self, value):
        with pytest.raises(PropagatorError):
            SystemParams(delta=value)

    def test_effective_substitution(self):
        p = SystemParams(omega_c=2.0, delta=-3.0, gamma_c=0.05, gamma_e=0.001)
        assert p.effective(False) == (2.0, -3.0)
        wc, d = p.effective(True)
        assert wc == 2.0 - 0.05j
        assert d == pytest.approx(-3.0 + 1j * (0.001 - 0.05))

    def test_replace(self):
        assert RESONANT.replace(delta=-500.0) == DETUNED


class TestAuxFrequencies:
    def test_resonant_values(self):
        aux = aux_frequencies(RESONANT)
        assert aux.a_freq == pytest.approx(np.sqrt(3604))
        assert aux.b_freq == pytest.approx(np.sqrt(3601))
        assert aux.a_freq.real == pytest.approx(60.03332, abs=1e-5)
        assert aux.b_freq.real == pytest.approx(60.00833, abs=1e-5)

    def test_all_zero(self):
        aux = aux_frequencies(SystemParams(g=0.0, c_hop=0.0))
        assert aux.a_freq == 0 and aux.b_freq == 0

    def test_detuned_values(self):
        aux = aux_frequencies(DETUNED)
        assert aux.a_freq == pytest.approx(np.sqrt(251604))
        assert aux.b_freq == pytest.approx(np.sqrt(254601))

    @given(params_st)
    def test_closed_real_positive(self, p):
        aux = aux_frequencies(p)
        assert aux.a_freq.imag == 0 and aux.a_freq.real > 0
        assert aux.b_freq.imag == 0 and aux.b_freq.real > 0

    @given(params_st)
    def test_squares(self, p):
        aux = aux_frequencies(p, dissipative=True)
        _, d = p.effective(True)
        c, g = p.c_hop, p.g
        scale = max(1.0, abs(d) ** 2)
        assert abs(aux.a_freq**2 - (4 * c**2 + 4 * c * d + d**2 + 4 * g**2)) < 1e-10 * scale
        assert abs(aux.b_freq**2 - (c**2 - 2 * c * d + d**2 + 4 * g**2)) < 1e-10 * scale


class TestModeCoefficients:
    @pytest.mark.parametrize("params", [RESONANT, DETUNED, LOSSY])
    @pytest.mark.parametrize("dissipative", [False, True])
    def test_identity_at_zero(self, params, dissipative):
        np.testing.assert_allclose(mode_coefficients(params, 0.0, dissipative).matrix(), np.eye(6), atol=1e-15)

    def test_rejects_negative_time(self):
        with pytest.raises(PropagatorError):
            mode_coefficients(RESONANT, -1.0)

    def test_rejects_zero_coupling(self):
        with pytest.raises(PropagatorError, match="g = 0"):
            mode_coefficients(SystemParams(g=0.0), 1.0)

    def test_symmetry_resonant(self):
        t = np.linspace(0, 5, 101)
        m = mode_coefficients(RESONANT, t)
        np.testing.assert_allclose(m.u21, m.v11, atol=1e-14)
        np.testing.assert_allclose(m.u22, m.v12, atol=1e-14)

    def test_lossy_row_norms_below_one(self):
        u = mode_coefficients(LOSSY, 1.0, dissipative=True).matrix()
        assert np.all(np.linalg.norm(u, axis=1) < 1)

    def test_vectorised_matches_scalar(self):
        t = np.array([0.0, 0.3, 1.7])
        vec = mode_coefficients(DETUNED, t)
        for i, ti in enumerate(t):
            scalar = mode_coefficients(DETUNED, ti)
            assert vec.v21[i] == pytest.approx(scalar.v21, abs=1e-15)

    @given(params_st, times_st, st.booleans())
    def test_matches_numeric_exponential(self, p, t, dissipative):
        closed = mode_coefficients(p, t, dissipative).matrix()
        np.testing.assert_allclose(closed, propagator_numeric(p, t, dissipative), atol=1e-9, rtol=0)

    @given(params_st, times_st)
    def test_unitary_closed(self, p, t):
        u = mode_coefficients(p, t).matrix()
        np.testing.assert_allclose(u @ u.conj().T, np.eye(6), atol=1e-12)
        m = mode_coefficients(p, t)
        assert abs(m.cavity_weight() + m.exciton_weight() - 1) < 1e-12

    @given(params_st, times_st, st.booleans())
    def test_complex_symmetric(self, p, t, dissipative):
        u = mode_coefficients(p, t, dissipative).matrix()
        np.testing.assert_allclose(u, u.T, atol=1e-12)

    @given(params_st, times_st, st.booleans(), st.sampled_from([(1, -1), (-1, 1), (-1, -1)]))
    def test_branch_invariance(self, p, t, dissipative, signs):
        a = mode_coefficients(p, t, dissipative).matrix()
        b = mode_coefficients(p, t, dissipative, branch_signs=signs).matrix()
        np.testing.assert_allclose(a, b, atol=1e-13)

    @given(params_st, times_st, st.floats(-10, 10))
    def test_omega_c_only_a_phase(self, p, t, shift):
        a = np.abs(mode_coefficients(p, t, True).matrix())
        b = np.abs(mode_coefficients(p.replace(omega_c=p.omega_c + shift), t, True).matrix())
        np.testing.assert_allclose(a, b, atol=1e-12)

    def test_unscaled_prefactor_is_wrong(self):
        bad = mode_coefficients(RESONANT, 0.4, omit_coupling_prefactor=True).matrix()
        assert np.abs(bad - propagator_numeric(RESONANT, 0.4)).max() > 1e-3


class TestGenerator:
    def test_layout(self):
        m = generator_matrix(RESONANT)
        expected = np.zeros((6, 6))
        for i, j in [(0, 1), (0, 2), (1, 2)]:
            expected[i, j] = expected[j, i] = 1
        for i in range(3):
            expected[i, i + 3] = expected[i + 3, i] = 30
        np.testing.assert_array_equal(m, expected)

    def test_zero(self):
        np.testing.assert_array_equal(generator_matrix(SystemParams(g=0.0, c_hop=0.0)), 0)

    def test_uniform_damping(self):
        p = SystemParams(gamma_c=0.1, gamma_e=0.1, delta=3.0)
        np.testing.assert_allclose(generator_matrix(p, True), generator_matrix(p) - 0.1j * np.eye(6))

    def test_exciton_diagonal(self):
        m = generator_matrix(SystemParams(omega_c=2.0, delta=-5.0, gamma_e=0.3), True)
        assert m[4, 4] == 7.0 - 0.3j


class TestNumericPropagator:
    def test_identity(self):
        np.testing.assert_allclose(propagator_numeric(LOSSY, 0.0, True), np.eye(6), atol=1e-15)

    def test_unitary(self):
        rng = np.random.default_rng(3)
        p = SystemParams(omega_c=rng.uniform(-5, 5), delta=rng.uniform(-600, 600), g=rng.uniform(1, 50))
        u = propagator_numeric(p, 0.3)
        np.testing.assert_allclose(u @ u.conj().T, np.eye(6), atol=1e-12)

    def test_entry_matches_v21(self):
        assert propagator_numeric(RESONANT, 0.1)[3, 3] == pytest.approx(
            complex(mode_coefficients(RESONANT, 0.1).v21), abs=1e-10
        )

    def test_solves_ode(self):
        t, h = 0.37, 1e-6
        m = generator_matrix(LOSSY, True)
        du = (propagator_numeric(LOSSY, t + h, True) - propagator_numeric(LOSSY, t - h, True)) / (2 * h)
        np.testing.assert_allclose(du, -1j * m @ propagator_numeric(LOSSY, t, True), atol=1e-6)

    def test_defective_generator_falls_back(self):
        # forcing the fallback path must agree with the eigen route
        a = propagator_numeric(LOSSY, 0.8, True)
        b = propagator_numeric(LOSSY, 0.8, True, max_condition=0.0)
        np.testing.assert_allclose(a, b, atol=1e-12)


class TestTimescales:
    def test_resonant_half_period(self):
        assert revival_half_period(RESONANT) == pytest.approx(2.112, abs=1e-3)

    def test_detuned_half_period(self):
        assert revival_half_period(DETUNED) == pytest.approx(293.4, abs=0.1)

    def test_fast_period(self):
        assert fast_period(RESONANT) == pytest.approx(2 * np.pi / np.sqrt(3604))
