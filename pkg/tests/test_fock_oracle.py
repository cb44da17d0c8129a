import math

import numpy as np
import pytest

from cavity_ecs import fock_oracle as fo
from cavity_ecs.cat_dynamics import (
    CatStateSpec,
    CoherenceModel,
    DegenerateSuperpositionError,
    ReducedExcitonState,
    branch_amplitudes,
    reduced_exciton_state,
)
from cavity_ecs.propagator import SystemParams, generator_matrix, mode_coefficients, propagator_numeric
from cavity_ecs.qubit_witness import Target, encode_qubits, fidelity_squared

RESONANT = SystemParams()
LOSSY = SystemParams(gamma_c=0.05, gamma_e=0.001)


def unit(basis, occupation):
    v = np.zeros(basis.dim, dtype=complex)
    v[basis.index(occupation)] = 1
    return fo.OracleState(basis, 0.0, vector=v)


class TestBasis:
    @pytest.mark.parametrize("n_max,count", [(0, 1), (1, 7), (2, 28), (10, 8008)])
    def test_counts(self, n_max, count):
        assert fo.build_basis(n_max).dim == count == math.comb(n_max + 6, 6)

    def test_symmetric_count(self):
        assert fo.build_basis(8, "symmetric").dim == math.comb(12, 4)

    def test_graded_lexicographic(self):
        b = fo.build_basis(3)
        rows = [tuple(r) for r in b.states]
        assert rows == sorted(rows, key=lambda r: (sum(r), r))
        assert len(set(rows)) == len(rows)
        assert all(sum(r) <= 3 for r in rows)

    def test_index_round_trip(self):
        b = fo.build_basis(4)
        for i in (0, 5, 77, b.dim - 1):
            assert b.index(tuple(b.states[i])) == i
        with pytest.raises(KeyError):
            b.index((5, 0, 0, 0, 0, 0))
        assert b.lookup(np.array([[0, 0, 0, -1, 0, 0]]))[0] == -1

    def test_sectors_contiguous(self):
        b = fo.build_basis(4)
        for n in range(5):
            assert np.all(b.states[b.sector(n)].sum(axis=1) == n)

    def test_memory_refusal(self):
        with pytest.raises(fo.OracleMemoryError) as info:
            fo.build_basis(20)
        assert info.value.dim == math.comb(26, 6)
        assert str(info.value.dim) in str(info.value)

    def test_budget_from_environment(self, monkeypatch):
        monkeypatch.setenv(fo.BUDGET_ENV, "1000")
        with pytest.raises(fo.OracleMemoryError):
            fo.build_basis(2)

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            fo.build_basis(-1)


class TestHamiltonian:
    def test_single_excitation_block_is_generator(self):
        b = fo.build_basis(1)
        h = fo.build_hamiltonian(RESONANT, b).toarray()
        order = [b.index(tuple(int(k == m) for k in range(6))) for m in range(6)]
        np.testing.assert_array_equal(h[np.ix_(order, order)], generator_matrix(RESONANT))

    def test_single_excitation_block_general(self):
        p = SystemParams(omega_c=1.3, delta=-7.0, g=4.0, c_hop=0.7)
        h = fo.build_hamiltonian(p, fo.build_basis(1)).toarray()
        # sector 1 is ordered lexicographically: b3, b2, b1, a3, a2, a1
        order = [6, 5, 4, 3, 2, 1]
        np.testing.assert_allclose(h[np.ix_(order, order)], generator_matrix(p), atol=1e-15)

    def test_vacuum_row_zero(self):
        h = fo.build_hamiltonian(RESONANT, fo.build_basis(3)).toarray()
        assert not np.any(h[0]) and not np.any(h[:, 0])

    def test_hermitian(self):
        h = fo.build_hamiltonian(SystemParams(delta=-3.0, omega_c=1.0), fo.build_basis(3))
        assert abs(h - h.conj().T).max() == 0

    @pytest.mark.parametrize("layout", ["full", "symmetric"])
    def test_sector_closure(self, layout):
        b = fo.build_basis(4, layout)
        h = fo.build_hamiltonian(RESONANT, b).tocoo()
        total = b.states.sum(axis=1)
        assert np.all(total[h.row] == total[h.col])
        for op in fo.loss_operators(LOSSY, b):
            op = op.tocoo()
            assert np.all(total[op.row] == total[op.col] - 1)

    def test_bosonic_elements(self):
        b = fo.build_basis(3)
        a = fo.annihilation(b, 3)
        src = b.index((0, 0, 0, 3, 0, 0))
        dst = b.index((0, 0, 0, 2, 0, 0))
        assert a[dst, src] == pytest.approx(np.sqrt(3))

    def test_symmetric_layout_spectrum(self):
        # the symmetric layout's spectrum is a subset of the six-mode one
        p = SystemParams(delta=-4.0, c_hop=1.3, g=2.0)
        full = np.linalg.eigvalsh(fo.build_hamiltonian(p, fo.build_basis(2)).toarray())
        sym = np.linalg.eigvalsh(fo.build_hamiltonian(p, fo.build_basis(2, "symmetric")).toarray())
        assert all(np.min(np.abs(full - e)) < 1e-10 for e in sym)


class TestInitialState:
    def test_vacuum(self):
        b = fo.build_basis(3)
        psi = fo.cat_initial_vector(CatStateSpec(0, 0, 0), b)
        assert abs(psi.vector[0]) == pytest.approx(1)

    def test_even_cat_parity(self):
        b = fo.build_basis(10)
        psi = fo.cat_initial_vector(CatStateSpec.symmetric(0.5), b)
        odd = b.states.sum(axis=1) % 2 == 1
        assert np.all(psi.vector[odd] == 0)
        assert np.linalg.norm(psi.vector) == pytest.approx(1)

    def test_small_odd_cat(self):
        b = fo.build_basis(6)
        psi = fo.cat_initial_vector(CatStateSpec.symmetric(0.01, np.pi), b)
        assert abs(psi.vector[b.index((0, 0, 0, 1, 0, 0))]) == pytest.approx(1, abs=1e-4)

    def test_norm_consistency(self):
        # unnormalised Fock expansion has squared norm N, matching the overlap algebra
        cat = CatStateSpec(0.4, -0.3j, 0.8)
        n = np.arange(11)
        fact = np.array([math.factorial(k) for k in n], float)

        def coherent(a):
            return np.exp(-abs(a) ** 2 / 2) * a**n / np.sqrt(fact)

        raw = coherent(0.4) + np.exp(0.8j) * coherent(-0.3j)
        from cavity_ecs.cat_dynamics import normalization

        assert np.vdot(raw, raw).real == pytest.approx(normalization(cat), abs=1e-10)
        psi = fo.cat_initial_vector(cat, fo.build_basis(10))
        b = psi.basis
        along = np.array([psi.vector[b.index((0, 0, 0, k, 0, 0))] for k in n])
        np.testing.assert_allclose(along, raw / np.linalg.norm(raw), atol=1e-12)

    def test_tail_violation(self):
        with pytest.raises(fo.OracleTruncationError, match="n_max >= "):
            fo.cat_initial_vector(CatStateSpec.symmetric(2.0), fo.build_basis(6))

    def test_degenerate(self):
        with pytest.raises(DegenerateSuperpositionError):
            fo.cat_initial_vector(CatStateSpec(0.3, 0.3, np.pi), fo.build_basis(6))

    def test_required_n_max(self):
        assert fo.required_n_max(CatStateSpec.symmetric(0.5)) == 8


class TestClosedEvolution:
    def test_identity_at_zero(self):
        b = fo.build_basis(6)
        psi = fo.cat_initial_vector(CatStateSpec.symmetric(0.3), b)
        np.testing.assert_allclose(fo.evolve_closed(RESONANT, psi, 0.0).vector, psi.vector, atol=1e-14)

    @pytest.mark.parametrize("params", [RESONANT, SystemParams(delta=-500.0, omega_c=1.0)])
    def test_single_excitation_occupations(self, params):
        b = fo.build_basis(1)
        for t in (0.05, 0.4, 2.0):
            out = fo.evolve_closed(params, unit(b, (0, 0, 0, 1, 0, 0)), t)
            m = mode_coefficients(params, t)
            expected = np.abs([m.v11, m.v12, m.v12, m.v21, m.v22, m.v22]) ** 2
            np.testing.assert_allclose(fo.mode_occupations(out), expected, atol=1e-10)

    def test_norm_preserved(self):
        b = fo.build_basis(8)
        psi = fo.cat_initial_vector(CatStateSpec.symmetric(0.5), b)
        for t in (0.3, 3.0, 30.0):
            assert np.linalg.norm(fo.evolve_closed(RESONANT, psi, t).vector) == pytest.approx(1, abs=1e-10)

    @pytest.mark.parametrize("layout", ["full", "symmetric"])
    def test_matches_closed_form(self, layout):
        cat = CatStateSpec.symmetric(0.5)
        b = fo.build_basis(8, layout)
        psi = fo.cat_initial_vector(cat, b)
        for t in (0.4, 1.37, 4.0):
            reduced = fo.reduce_to_excitons(fo.evolve_closed(RESONANT, psi, t))
            closed = fo.closed_form_exciton_fock(reduced_exciton_state(RESONANT, cat, t), 8, layout)
            assert fo.trace_distance(reduced, closed) < 1e-6

    def test_encoded_fidelity_matches(self):
        cat = CatStateSpec.symmetric(0.5)
        b = fo.build_basis(8)
        psi = fo.cat_initial_vector(cat, b)
        for t in (0.0, 0.7, 1.36):
            state = reduced_exciton_state(RESONANT, cat, t)
            reduced = fo.reduce_to_excitons(fo.evolve_closed(RESONANT, psi, t))
            for target in Target:
                assert fo.encoded_fidelity(reduced, state, target, 8) == pytest.approx(
                    fidelity_squared(encode_qubits(state), target), abs=1e-6
                )


class TestLindblad:
    def test_step_limit(self):
        b = fo.build_basis(1)
        with pytest.raises(fo.OracleStepError):
            fo.LindbladIntegrator(RESONANT, b, dt=1.0)

    def test_lossless_matches_closed(self):
        cat = CatStateSpec.symmetric(0.3)
        b = fo.build_basis(fo.required_n_max(cat), "symmetric")
        psi = fo.cat_initial_vector(cat, b)
        rho = fo.evolve_lindblad(RESONANT, psi, 0.5)
        ref = fo.evolve_closed(RESONANT, psi, 0.5).density_matrix()
        assert np.abs(rho.density - ref).max() < 1e-9

    def test_single_photon_decay(self):
        p = SystemParams(g=0.0, c_hop=0.0, gamma_c=0.3)
        b = fo.build_basis(1)
        rho0 = unit(b, (1, 0, 0, 0, 0, 0))
        states = fo.LindbladIntegrator(p, b).trajectory(rho0, [0.5, 1.0, 4.0])
        for st in states:
            assert fo.mode_occupations(st)[0] == pytest.approx(np.exp(-2 * 0.3 * st.t), abs=1e-8)
            assert np.trace(st.density).real == pytest.approx(1, abs=1e-12)

    def test_first_moments_follow_damped_propagator(self):
        cat = CatStateSpec(0.2, 0.1j, 0.3)
        b = fo.build_basis(fo.required_n_max(cat), "full")
        psi = fo.cat_initial_vector(cat, b)
        b1_0 = fo.mode_means(psi)[3]
        for st in fo.LindbladIntegrator(LOSSY, b).trajectory(psi, [0.1, 0.3]):
            expected = propagator_numeric(LOSSY, st.t, True)[:, 3] * b1_0
            np.testing.assert_allclose(fo.mode_means(st), expected, atol=1e-6)

    def test_exciton_means_match_branches(self):
        cat = CatStateSpec(0.3, 0.1j, 0.3)
        b = fo.build_basis(fo.required_n_max(cat), "symmetric")
        psi = fo.cat_initial_vector(cat, b)
        b1_0 = fo.mode_means(psi)[2]
        st = fo.evolve_lindblad(LOSSY, psi, 0.5)
        col = branch_amplitudes(LOSSY, CatStateSpec(1.0, 0.0), 0.5, True).beta1
        expected = np.array([col[3], (col[4] + col[5]) / np.sqrt(2)]) * b1_0
        np.testing.assert_allclose(fo.mode_means(st)[2:], expected, atol=1e-6)

    def test_trace_and_positivity(self):
        cat = CatStateSpec.symmetric(0.3)
        b = fo.build_basis(fo.required_n_max(cat), "symmetric")
        for st in fo.LindbladIntegrator(LOSSY, b).trajectory(fo.cat_initial_vector(cat, b), [0.5, 1.5]):
            assert abs(np.trace(st.density).real - 1) < 1e-8
            assert np.linalg.eigvalsh(st.density).min() > -1e-8
            np.testing.assert_allclose(st.density, st.density.conj().T, atol=0)

    def test_liouvillian_matches_matrix_form(self):
        b = fo.build_basis(3, "symmetric")
        integ = fo.LindbladIntegrator(LOSSY, b)
        rng = np.random.default_rng(1)
        x = rng.normal(size=(b.dim, b.dim)) + 1j * rng.normal(size=(b.dim, b.dim))
        rho = x @ x.conj().T
        via_super = (integ.liouvillian() @ rho.ravel()).reshape(b.dim, b.dim)
        np.testing.assert_allclose(via_super, integ.rhs(rho), atol=1e-12)

    def test_dilation_model_matches_small_cat(self):
        cat = CatStateSpec.symmetric(0.3)
        n_max = fo.required_n_max(cat)
        b = fo.build_basis(n_max, "symmetric")
        states = fo.LindbladIntegrator(LOSSY, b).trajectory(fo.cat_initial_vector(cat, b), [0.5, 1.0])
        for st in states:
            reduced = fo.reduce_to_excitons(st)
            dist = {
                m: fo.trace_distance(
                    reduced,
                    fo.closed_form_exciton_fock(reduced_exciton_state(LOSSY, cat, st.t, True, m), n_max, "symmetric"),
                )
                for m in CoherenceModel
            }
            assert dist[CoherenceModel.DILATION_CONSISTENT] < 1e-6
            assert dist[CoherenceModel.DILATION_CONSISTENT] < dist[CoherenceModel.CAVITY_ONLY]

    def test_liouvillian_memory_refusal(self, monkeypatch):
        b = fo.build_basis(3)
        integ = fo.LindbladIntegrator(LOSSY, b)
        monkeypatch.setenv(fo.BUDGET_ENV, str(10**6))
        with pytest.raises(fo.OracleMemoryError):
            integ.liouvillian()

    def test_rejects_decreasing_times(self):
        b = fo.build_basis(1)
        with pytest.raises(ValueError):
            fo.LindbladIntegrator(LOSSY, b).trajectory(unit(b, (0, 0, 0, 1, 0, 0)), [1.0, 0.5])


class TestReduction:
    def test_product_state(self):
        b = fo.build_basis(2)
        v = np.zeros(b.dim, dtype=complex)
        v[b.index((0, 0, 0, 0, 1, 0))] = 0.6
        v[b.index((0, 0, 0, 1, 0, 0))] = 0.8j
        sigma = fo.reduce_to_excitons(fo.OracleState(b, 0.0, vector=v))
        eb = fo.build_basis(2, "excitons")
        expected = np.zeros((eb.dim, eb.dim), dtype=complex)
        e = np.zeros(eb.dim, dtype=complex)
        e[eb.index((0, 1, 0))] = 0.6
        e[eb.index((1, 0, 0))] = 0.8j
        np.testing.assert_allclose(sigma, np.outer(e, e.conj()), atol=1e-15)

    def test_density_and_vector_paths_agree(self):
        b = fo.build_basis(5)
        psi = fo.evolve_closed(RESONANT, fo.cat_initial_vector(CatStateSpec.symmetric(0.2), b), 0.9)
        as_rho = fo.OracleState(b, psi.t, density=psi.density_matrix())
        np.testing.assert_allclose(fo.reduce_to_excitons(psi), fo.reduce_to_excitons(as_rho), atol=1e-14)

    def test_initial_cat_in_mode_one(self):
        cat = CatStateSpec.symmetric(0.5)
        b = fo.build_basis(8)
        reduced = fo.reduce_to_excitons(fo.cat_initial_vector(cat, b))
        closed = fo.closed_form_exciton_fock(reduced_exciton_state(RESONANT, cat, 0.0), 8)
        assert fo.trace_distance(reduced, closed) < 1e-9
        assert np.trace(reduced @ reduced).real == pytest.approx(1, abs=1e-10)

    def test_trace_one(self):
        b = fo.build_basis(6)
        psi = fo.evolve_closed(RESONANT, fo.cat_initial_vector(CatStateSpec.symmetric(0.3), b), 2.0)
        assert np.trace(fo.reduce_to_excitons(psi)).real == pytest.approx(1, abs=1e-12)


class TestClosedFormFock:
    def test_rank_one(self):
        beta = np.array([0.3, 0.1j, -0.2])
        state = ReducedExcitonState(beta, beta, 4.0, 1.0, 0.0, CoherenceModel.DILATION_CONSISTENT)
        rho = fo.closed_form_exciton_fock(state, 8)
        w = np.linalg.eigvalsh(rho)
        assert w[-1] == pytest.approx(1, abs=1e-9)
        assert abs(w[:-1]).max() < 1e-12

    def test_tail_violation(self):
        state = reduced_exciton_state(RESONANT, CatStateSpec.symmetric(2.0), 0.0)
        with pytest.raises(fo.OracleTruncationError):
            fo.closed_form_exciton_fock(state, 6)


class TestTraceDistance:
    def test_examples(self):
        rho = np.diag([1.0, 0.0])
        assert fo.trace_distance(rho, rho) == 0
        assert fo.trace_distance(rho, np.diag([0.0, 1.0])) == pytest.approx(1)
        assert fo.trace_distance(np.eye(2) / 2, rho) == pytest.approx(0.5)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            fo.trace_distance(np.eye(2), np.eye(3))
