"""Pauli-string realization against dense tensor-product oracles."""

import numpy as np
import pytest

from qepsim.pauli import PauliString, expectation, normalized, pauli_sum, realize

SINGLE = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def dense_oracle(letters: str) -> np.ndarray:
    """Independent Kronecker-product construction, site 0 leftmost."""
    out = np.array([[1.0 + 0j]])
    for letter in letters:
        out = np.kron(out, SINGLE[letter])
    return out


def test_single_x_matrix():
    assert np.array_equal(realize(PauliString("X")).toarray(), [[0, 1], [1, 0]])


def test_zz_is_diagonal_signs():
    mat = realize(PauliString("ZZ")).toarray()
    assert np.array_equal(np.diag(mat), [1, -1, -1, 1])
    assert np.count_nonzero(mat - np.diag(np.diag(mat))) == 0


def test_zxz_matches_dense_oracle():
    got = realize(PauliString("ZXZ")).toarray()
    np.testing.assert_array_equal(got, dense_oracle("ZXZ"))


@pytest.mark.parametrize("letters", ["Y", "XY", "ZYX", "IYIZ", "YYXZ"])
def test_matches_dense_oracle(letters):
    np.testing.assert_array_equal(realize(PauliString(letters)).toarray(),
                                  dense_oracle(letters))


def test_one_nonzero_per_row():
    for letters in ("XYZ", "ZZI", "YIX"):
        mat = realize(PauliString(letters)).tocsr()
        counts = np.diff(mat.indptr)
        assert np.all(counts == 1)


@pytest.mark.parametrize("letters", ["X", "ZZ", "XYZ", "IYZX"])
def test_hermitian_and_involution(letters):
    mat = realize(PauliString(letters)).toarray()
    np.testing.assert_array_equal(mat, mat.conj().T)
    np.testing.assert_allclose(mat @ mat, np.eye(mat.shape[0]), atol=1e-14)


def test_commutation_on_random_vectors():
    rng = np.random.default_rng(11)
    n = 3
    z0 = realize(PauliString.from_sites(n, {0: "Z"}))
    z1 = realize(PauliString.from_sites(n, {1: "Z"}))
    x0 = realize(PauliString.from_sites(n, {0: "X"}))
    for _ in range(5):
        v = rng.standard_normal(2 ** n) + 1j * rng.standard_normal(2 ** n)
        np.testing.assert_allclose(z0 @ (z1 @ v), z1 @ (z0 @ v), atol=1e-14)
        np.testing.assert_allclose(x0 @ (z0 @ v) + z0 @ (x0 @ v),
                                   np.zeros_like(v), atol=1e-14)


def test_expectation_plus_state():
    plus = normalized(np.ones(2))
    assert expectation(realize(PauliString("X")), plus) == pytest.approx(1.0)


def test_expectation_computational_state():
    zero = np.array([1.0, 0.0], dtype=complex)
    assert expectation(realize(PauliString("X")), zero) == pytest.approx(0.0)


def test_expectation_matches_dense_oracle():
    rng = np.random.default_rng(5)
    n = 3
    strings = [PauliString("ZXZ"), PauliString("IYX"), PauliString("ZZI")]
    coeffs = rng.standard_normal(len(strings))
    op = pauli_sum(list(zip(coeffs, strings)), n)
    dense = sum(c * dense_oracle(s.letters) for c, s in zip(coeffs, strings))
    psi = normalized(rng.standard_normal(8) + 1j * rng.standard_normal(8))
    want = np.vdot(psi, dense @ psi).real
    assert expectation(op, psi) == pytest.approx(want, abs=1e-12)


def test_expectation_real_for_hermitian():
    rng = np.random.default_rng(7)
    for letters in ("XY", "YZ", "ZI"):
        psi = normalized(rng.standard_normal(4) + 1j * rng.standard_normal(4))
        value = expectation(realize(PauliString(letters)), psi)
        assert isinstance(value, float)


def test_expectation_dimension_mismatch():
    with pytest.raises(ValueError, match="dim"):
        expectation(realize(PauliString("X")), np.ones(4) / 2.0)


def test_pauli_sum_merges_identical_strings():
    n = 2
    s = PauliString("ZZ")
    merged = pauli_sum([(0.5, s), (0.25, s)], n)
    np.testing.assert_allclose(merged.toarray(), 0.75 * dense_oracle("ZZ"), atol=0)


def test_pauli_sum_real_cast():
    # even number of Y letters -> real matrix
    op = pauli_sum([(1.0, PauliString("YY"))], 2)
    assert op.dtype == np.float64
    op = pauli_sum([(1.0, PauliString("YI"))], 2)
    assert op.dtype == np.complex128


def test_invalid_letters_rejected():
    with pytest.raises(ValueError):
        PauliString("XQ")
    with pytest.raises(ValueError):
        PauliString("")
