"""Ground-state solver, degenerate averaging and the exact response oracle."""

import numpy as np
import pytest
import scipy.sparse as sp

from qepsim.eigensolver import (
    ConvergenceError,
    DegenerateGroundState,
    exact_susceptibility,
    ground_expectation,
    ground_state,
)
from qepsim.hamiltonian import ParameterizedHamiltonian, Role, Term, build_cluster_ising
from qepsim.pauli import PauliString, realize

ANALYTIC_CHI = 1.0 * 0.5 / (1.0 ** 2 + 0.5 ** 2) ** 1.5  # 0.357771...


def two_level(theta: float, nu: float) -> ParameterizedHamiltonian:
    terms = (
        Term("z", "theta", Role.TRAINABLE, 1.0, PauliString("Z")),
        Term("x", "nu_x", Role.INPUT, 1.0, PauliString("X")),
    )
    return ParameterizedHamiltonian(1, terms, {"theta": theta, "nu_x": nu})


def random_pauli_hamiltonian(rng, n=4, n_terms=6, scale=1.0, require_gap=1e-4):
    """Random labeled-parameter Hamiltonian from 1- and 2-local strings,
    resampled until the ground state is comfortably nondegenerate."""
    while True:
        terms = []
        values = {}
        for k in range(n_terms):
            sites = rng.choice(n, size=int(rng.integers(1, 3)), replace=False)
            letters = {int(s): "XYZ"[int(rng.integers(3))] for s in sites}
            terms.append(
                Term(f"t{k}", f"p{k}", Role.TRAINABLE, 1.0, PauliString.from_sites(n, letters))
            )
            values[f"p{k}"] = float(rng.uniform(-scale, scale))
        h = ParameterizedHamiltonian(n, tuple(terms), values)
        res = ground_state(h.assemble())
        if res.gap > require_gap:
            return h


class TestGroundState:
    def test_transverse_field_product_state(self):
        n = 6
        h = build_cluster_ising(0, 0, 1, n)
        res = ground_state(h.assemble())
        assert res.energy == pytest.approx(-n, abs=1e-9)
        plus = np.full(2 ** n, 2 ** (-n / 2))
        # global phase is fixed, so the amplitudes match directly
        np.testing.assert_allclose(res.state, plus, atol=1e-8)

    def test_diagonal_two_level(self):
        op = sp.csr_matrix(np.diag([2.0, -2.0]))
        res = ground_state(op)
        assert res.energy == pytest.approx(-2.0)
        np.testing.assert_allclose(np.abs(res.state), [0, 1], atol=1e-12)

    def test_matches_dense_oracle_random_cluster(self):
        rng = np.random.default_rng(21)
        for _ in range(3):
            g = rng.uniform(0.2, 1.5, 3)
            h = build_cluster_ising(*g, 4)
            want = np.linalg.eigvalsh(h.assemble().toarray())[0]
            assert ground_state(h.assemble()).energy == pytest.approx(want, abs=1e-10)

    def test_residual_invariant(self):
        h = build_cluster_ising(1.3, 0.9, 0.5, 7)
        op = h.assemble()
        res = ground_state(op, tol=1e-9)
        assert np.linalg.norm(op @ res.state - res.energy * res.state) <= 1e-9

    def test_variational_vs_random_trials(self):
        rng = np.random.default_rng(2)
        h = build_cluster_ising(1.0, 0.8, 0.6, 5)
        op = h.assemble()
        energy = ground_state(op).energy
        for _ in range(10):
            v = rng.standard_normal(2 ** 5)
            v = v / np.linalg.norm(v)
            assert energy <= np.vdot(v, op @ v).real + 1e-10

    def test_deterministic_bitwise(self):
        # above the dense cutoff so the Lanczos path is exercised
        h = build_cluster_ising(1.1, 0.6, 0.9, 9)
        a = ground_state(h.assemble(), seed=5)
        b = ground_state(h.assemble(), seed=5)
        assert a.energy == b.energy
        assert np.array_equal(a.state, b.state)

    def test_gap_reported(self):
        op = sp.csr_matrix(np.diag([0.0, 0.3, 1.0, 2.0]))
        res = ground_state(op)
        assert res.gap == pytest.approx(0.3, abs=1e-12)

    def test_degenerate_space_detected(self):
        h = build_cluster_ising(0, 1, 0, 4)  # pure ferromagnet, doubly degenerate
        res = ground_state(h.assemble())
        assert res.is_degenerate
        assert len(res.degenerate_states) == 2
        # orthonormal basis
        overlap = abs(np.vdot(res.degenerate_states[0], res.degenerate_states[1]))
        assert overlap < 1e-10

    def test_nonconvergence_raises_with_residual(self):
        h = build_cluster_ising(1.2, 0.8, 0.4, 9)
        with pytest.raises(ConvergenceError) as err:
            ground_state(h.assemble(), max_iter=1)
        assert err.value.best_residual is None or err.value.best_residual > 0


class TestGroundExpectation:
    def test_degenerate_average_is_symmetric(self):
        # -Z0 Z1: ground space spanned by |00>, |11>; Z0 averages to zero
        op_h = -realize(PauliString("ZZ"))
        op_a = realize(PauliString.from_sites(2, {0: "Z"}))
        assert ground_expectation(op_h, op_a) == pytest.approx(0.0, abs=1e-12)

    def test_nondegenerate_reduces_to_plain_expectation(self):
        h = build_cluster_ising(0.3, 0.4, 1.2, 4)
        res = ground_state(h.assemble())
        op = realize(PauliString.from_sites(4, {0: "X"}))
        from qepsim.pauli import expectation

        assert ground_expectation(h.assemble(), op) == pytest.approx(
            expectation(op, res.state), abs=1e-12
        )

    def test_degenerate_matches_projector_trace_oracle(self):
        # 3-qubit Hamiltonian with an exactly degenerate ground space
        op_h = -realize(PauliString("ZZI")) - realize(PauliString("IZZ"))
        op_a = realize(PauliString.from_sites(3, {0: "Z", 2: "Z"}))
        dense = op_h.toarray()
        vals, vecs = np.linalg.eigh(dense)
        ground = vecs[:, vals <= vals[0] + 1e-9]
        proj = ground @ ground.conj().T
        want = np.trace(proj @ op_a.toarray()).real / np.trace(proj).real
        assert ground_expectation(op_h, op_a) == pytest.approx(want, abs=1e-9)


class TestExactSusceptibility:
    def test_two_level_analytic_value(self):
        chi = exact_susceptibility(two_level(1.0, 0.5), "theta", "nu_x")
        assert chi == pytest.approx(ANALYTIC_CHI, abs=1e-10)

    def test_onsager_symmetry_two_level(self):
        h = two_level(1.0, 0.5)
        assert exact_susceptibility(h, "theta", "nu_x") == pytest.approx(
            exact_susceptibility(h, "nu_x", "theta"), abs=1e-10
        )

    def test_matches_finite_differences(self):
        rng = np.random.default_rng(17)
        h = random_pauli_hamiltonian(rng)
        params = h.parameters()
        j, l = params[0], params[1]
        chi = exact_susceptibility(h, j, l)
        delta = 1e-4
        op_l = h.observable_matrix(l)
        up = ground_expectation(h.with_values({j: h.value(j) + delta}).assemble(), op_l)
        dn = ground_expectation(h.with_values({j: h.value(j) - delta}).assemble(), op_l)
        assert chi == pytest.approx((up - dn) / (2 * delta), abs=1e-6)

    def test_susceptibility_matrix_symmetric(self):
        rng = np.random.default_rng(29)
        h = random_pauli_hamiltonian(rng, n_terms=4)
        params = h.parameters()
        chi = np.array([[exact_susceptibility(h, j, l) for j in params] for l in params])
        assert np.abs(chi - chi.T).max() < 1e-8

    def test_degenerate_point_rejected(self):
        h = build_cluster_ising(0.0, 1.0, 0.0, 4)  # exact ferromagnetic degeneracy
        with pytest.raises(DegenerateGroundState, match="finite differences"):
            exact_susceptibility(h, "g_zz", "g_x")
