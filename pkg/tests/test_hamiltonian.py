"""Builders and assembly of parameterized Hamiltonians."""

import json

import numpy as np
import pytest

from qepsim.eigensolver import ground_expectation, ground_state
from qepsim.hamiltonian import (
    OUTPUT_COMBOS,
    ParameterizedHamiltonian,
    Role,
    SensorArchitecture,
    Term,
    build_cluster_ising,
    build_sensor_system,
    projector_label,
    sensor_parameter_layout,
)
from qepsim.pauli import PauliString, expectation, realize


def dense(h):
    return h.assemble().toarray()


class TestClusterIsing:
    def test_periodic_term_count_and_hermiticity(self):
        h = build_cluster_ising(1.0, 0.5, 0.25, 8)
        assert len(h.terms) == 24
        mat = h.assemble()
        assert mat.shape == (256, 256)
        diff = (mat - mat.conjugate().T).toarray()
        assert np.abs(diff).max() == 0.0

    def test_open_term_count(self):
        h = build_cluster_ising(1.0, 1.0, 1.0, 6, boundary="open")
        assert len(h.terms) == (6 - 2) + (6 - 1) + 6

    def test_pure_transverse_field_ground_state(self):
        n = 6
        h = build_cluster_ising(0.0, 0.0, 1.0, n)
        res = ground_state(h.assemble())
        assert res.energy == pytest.approx(-n, abs=1e-9)
        plus = np.full(2 ** n, 2 ** (-n / 2))
        overlap = abs(np.vdot(plus, res.state))
        assert overlap == pytest.approx(1.0, abs=1e-9)
        xx = realize(PauliString.from_sites(n, {0: "X", 4: "X"}))
        assert expectation(xx, res.state) == pytest.approx(1.0, abs=1e-9)

    def test_ground_energy_matches_dense_oracle(self):
        h = build_cluster_ising(1.0, 0.7, 0.3, 4)
        want = np.linalg.eigvalsh(dense(h))[0]
        res = ground_state(h.assemble())
        assert res.energy == pytest.approx(want, abs=1e-10)

    def test_signs_follow_convention(self):
        # +g_zxz ZXZ - g_zz ZZ - g_x X, checked against an explicit sum
        h = build_cluster_ising(0.8, 0.6, 0.4, 3)
        explicit = np.zeros((8, 8), dtype=complex)
        for j in range(3):
            explicit += 0.8 * realize(
                PauliString.from_sites(3, {j: "Z", (j + 1) % 3: "X", (j + 2) % 3: "Z"})
            ).toarray()
            explicit -= 0.6 * realize(
                PauliString.from_sites(3, {j: "Z", (j + 1) % 3: "Z"})
            ).toarray()
            explicit -= 0.4 * realize(PauliString.from_sites(3, {j: "X"})).toarray()
        np.testing.assert_allclose(dense(h), explicit, atol=1e-14)

    def test_too_short_chain_rejected(self):
        with pytest.raises(ValueError, match="n >= 3"):
            build_cluster_ising(1, 1, 1, 2)


class TestAssembly:
    def test_empty_terms_zero_operator(self):
        h = ParameterizedHamiltonian(n_sites=2, terms=(), values={})
        assert h.assemble().nnz == 0

    def test_single_term_scaling(self):
        term = Term("z", "c", Role.INPUT, 1.0, PauliString("Z"))
        h = ParameterizedHamiltonian(1, (term,), {"c": 2.0})
        np.testing.assert_array_equal(dense(h), [[2, 0], [0, -2]])

    def test_random_hamiltonian_matches_dense_summation(self):
        rng = np.random.default_rng(3)
        n = 4
        letters = ["ZXIZ", "IYYX", "XXII", "ZIIZ", "IZXI"]
        coeffs = rng.standard_normal(len(letters))
        terms = tuple(
            Term(f"t{k}", f"p{k}", Role.INPUT, 1.0, PauliString(s))
            for k, s in enumerate(letters)
        )
        h = ParameterizedHamiltonian(n, terms, {f"p{k}": float(c) for k, c in enumerate(coeffs)})
        want = sum(c * realize(PauliString(s)).toarray() for c, s in zip(coeffs, letters))
        np.testing.assert_allclose(dense(h), want, atol=1e-14)

    def test_linearity_in_coefficients(self):
        h = build_cluster_ising(1.0, 0.5, 0.25, 4)
        shifted = h.with_values({"g_zz": 0.5 + 0.125})
        diff = (shifted.assemble() - h.assemble()).toarray()
        conj = sum(w * realize(s).toarray() for w, s in h.conjugate_observable("g_zz"))
        np.testing.assert_allclose(diff, 0.125 * conj, atol=1e-12)

    def test_role_partition_is_disjoint(self):
        h = build_cluster_ising(1, 1, 1, 4).with_roles({"g_x": Role.TRAINABLE})
        roles = {}
        for t in h.terms:
            roles.setdefault(t.parameter, set()).add(t.role)
        assert all(len(r) == 1 for r in roles.values())
        assert set(h.parameters(Role.TRAINABLE)) == {"g_x"}
        assert set(h.parameters(Role.INPUT)) == {"g_zxz", "g_zz"}

    def test_conflicting_roles_rejected(self):
        terms = (
            Term("a", "p", Role.INPUT, 1.0, PauliString("Z")),
            Term("b", "p", Role.TRAINABLE, 1.0, PauliString("X")),
        )
        with pytest.raises(ValueError, match="two roles"):
            ParameterizedHamiltonian(1, terms, {"p": 1.0})


class TestNudge:
    def _with_projector_output(self):
        h = build_cluster_ising(1.0, 0.5, 0.25, 4)
        from qepsim.hamiltonian import outcome_projector_terms

        return h.with_observable("P", outcome_projector_terms(+1, -1, 0, 1, 4), output=True)

    def test_zero_nudge_identical_matrix(self):
        h = self._with_projector_output()
        diff = (h.with_nudge([0.0]).assemble() - h.assemble()).toarray()
        assert np.abs(diff).max() == 0.0

    def test_projector_nudge_entrywise(self):
        h = self._with_projector_output()
        beta = 0.3
        proj = h.observable_matrix("P").toarray()
        want = h.assemble().toarray() + beta * proj
        np.testing.assert_allclose(h.with_nudge([beta]).assemble().toarray(), want, atol=1e-14)

    def test_variational_bound(self):
        h = self._with_projector_output()
        free = ground_state(h.assemble())
        p_free = expectation(h.observable_matrix("P"), free.state)
        for beta in (0.01, 0.1, 0.5):
            nudged = ground_state(h.with_nudge([beta]).assemble())
            assert nudged.energy <= free.energy + beta * p_free + 1e-10

    def test_original_unmodified(self):
        h = self._with_projector_output()
        n_terms = len(h.terms)
        h.with_nudge([0.7])
        assert len(h.terms) == n_terms
        assert "nudge:P" not in h.values


class TestSensorSystem:
    def test_dimension_and_parameter_count(self):
        chain = build_cluster_ising(1, 1, 1, 8)
        arch = SensorArchitecture()
        assert arch.n_parameters == 51
        theta = np.zeros(51)
        h = build_sensor_system(chain, arch, theta)
        assert h.n_sites == 10
        assert h.assemble().shape == (1024, 1024)
        assert len(h.parameters(Role.TRAINABLE)) == 51

    def test_layout_counts(self):
        arch = SensorArchitecture()
        layout = sensor_parameter_layout(arch, 8)
        assert len(layout) == 51
        intra_single = [l for l, sites in layout if len(sites) == 1]
        assert len(intra_single) == 6
        two_site = [sites for _, sites in layout if len(sites) == 2]
        intra_pairs = [s for s in two_site if min(s) >= 8]
        chain_couplings = [s for s in two_site if min(s) < 8]
        assert len(intra_pairs) == 9
        assert len(chain_couplings) == 36

    def test_ablation_counts(self):
        assert SensorArchitecture(chain_letters=("Z",)).n_parameters == 27
        assert SensorArchitecture(chain_letters=("X", "Z")).n_parameters == 39

    def test_decoupled_sensor_keeps_chain_energy(self):
        chain = build_cluster_ising(1.2, 0.7, 0.4, 6)
        bare = ground_state(chain.assemble())
        h = build_sensor_system(chain, SensorArchitecture(chain_attach_sites=(2, 3)), np.zeros(51))
        coupled = ground_state(h.assemble())
        assert coupled.energy == pytest.approx(bare.energy, abs=1e-9)

    def test_decoupled_sensor_keeps_chain_observables(self):
        chain = build_cluster_ising(1.2, 0.7, 0.4, 6)
        obs = PauliString.from_sites(6, {0: "Z", 1: "Z"})
        bare = ground_expectation(chain.assemble(), realize(obs))
        h = build_sensor_system(chain, SensorArchitecture(chain_attach_sites=(2, 3)), np.zeros(51))
        padded = realize(obs.embed(8))
        coupled = ground_expectation(h.assemble(), padded)
        assert coupled == pytest.approx(bare, abs=1e-10)

    def test_theta_length_checked(self):
        chain = build_cluster_ising(1, 1, 1, 8)
        with pytest.raises(ValueError, match="length"):
            build_sensor_system(chain, SensorArchitecture(), np.zeros(50))

    def test_output_projectors_declared(self):
        chain = build_cluster_ising(1, 1, 1, 8)
        h = build_sensor_system(chain, SensorArchitecture(), np.zeros(51))
        assert h.output_observables == tuple(projector_label(z1, z2) for z1, z2 in OUTPUT_COMBOS)
        assert (-1, +1) not in OUTPUT_COMBOS


class TestSerialization:
    def test_json_round_trip(self):
        chain = build_cluster_ising(1.5, 0.5, 2.0, 8)
        h = build_sensor_system(chain, SensorArchitecture(), np.linspace(-0.1, 0.1, 51))
        doc = json.loads(h.to_json())
        back = ParameterizedHamiltonian.from_json(json.dumps(doc))
        assert back == h
        diff = (back.assemble() - h.assemble()).toarray()
        assert np.abs(diff).max() == 0.0
