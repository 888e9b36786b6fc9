"""Multi-qubit Pauli strings realized as sparse matrices.

Conventions used throughout the package:

* Site 0 is the most significant bit of the computational basis index,
  i.e. ``|b_0 b_1 ... b_{n-1}>`` has index ``sum_s b_s * 2**(n-1-s)``.
* States are plain complex numpy vectors of unit Euclidean norm.
* Operators are ``scipy.sparse`` matrices (CSR); a single Pauli string is a
  signed permutation matrix with exactly one nonzero per row.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np
import scipy.sparse as sp

LETTERS = "IXYZ"


@dataclass(frozen=True)
class PauliString:
    """Tensor product of single-site Pauli letters, one per qubit."""

    letters: str

    def __post_init__(self):
        if not self.letters:
            raise ValueError("PauliString needs at least one site")
        bad = set(self.letters) - set(LETTERS)
        if bad:
            raise ValueError(f"invalid Pauli letters: {sorted(bad)}")

    @property
    def n_sites(self) -> int:
        return len(self.letters)

    @property
    def dim(self) -> int:
        return 2 ** self.n_sites

    @classmethod
    def from_sites(cls, n_sites: int, sites: Mapping[int, str]) -> "PauliString":
        """Build a string that is identity everywhere except at ``sites``.

        ``sites`` maps site index to one of "XYZ" (or "I").
        """
        letters = ["I"] * n_sites
        for site, letter in sites.items():
            if not 0 <= site < n_sites:
                raise ValueError(f"site {site} out of range for {n_sites} sites")
            letters[site] = letter
        return cls("".join(letters))

    def embed(self, n_sites: int, offset: int = 0) -> "PauliString":
        """Pad with identities to act on a larger register."""
        if offset < 0 or offset + self.n_sites > n_sites:
            raise ValueError("embedded string does not fit the target register")
        return PauliString(
            "I" * offset + self.letters + "I" * (n_sites - offset - self.n_sites)
        )

    def __str__(self):
        return self.letters


# Realized strings are cached both as CSR matrices and as raw coordinate
# triples (for fast summation); treat everything returned as immutable.
_realize_cache: dict[str, sp.csr_matrix] = {}
_coord_cache: dict[str, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}


def _coords(p: PauliString):
    """(rows, cols, values) of a Pauli string, one entry per column.

    Exploits that a Pauli string is a signed permutation: basis state ``b``
    maps to ``b XOR flipmask`` with a phase collected from the Y and Z
    letters, so assembly is O(2^n) without any Kronecker products.
    """
    cached = _coord_cache.get(p.letters)
    if cached is not None:
        return cached
    n = p.n_sites
    cols = np.arange(p.dim, dtype=np.int64)
    flipmask = 0
    phase = np.ones(p.dim, dtype=np.complex128)
    for site, letter in enumerate(p.letters):
        bit = (cols >> (n - 1 - site)) & 1
        if letter == "X":
            flipmask |= 1 << (n - 1 - site)
        elif letter == "Y":
            flipmask |= 1 << (n - 1 - site)
            phase *= 1j * (1 - 2 * bit)
        elif letter == "Z":
            phase *= 1 - 2 * bit
    rows = cols ^ flipmask
    _coord_cache[p.letters] = (rows, cols, phase)
    return rows, cols, phase


def realize(p: PauliString) -> sp.csr_matrix:
    """Sparse matrix of a Pauli string on the full register."""
    cached = _realize_cache.get(p.letters)
    if cached is not None:
        return cached
    rows, cols, phase = _coords(p)
    mat = sp.csr_matrix((phase, (rows, cols)), shape=(p.dim, p.dim))
    _realize_cache[p.letters] = mat
    return mat


def pauli_sum(terms: Iterable[tuple[float, PauliString]], n_sites: int) -> sp.csr_matrix:
    """Weighted sum of Pauli strings as one sparse matrix.

    Coefficients of identical strings are merged first; exact-zero
    coefficients are dropped. Assembled in one coordinate pass (overlapping
    entries summed by the CSR conversion). Returns a real matrix when the
    result carries no imaginary part (strings with an even number of Y
    letters).
    """
    merged: dict[str, float] = {}
    for coeff, string in terms:
        if string.n_sites != n_sites:
            raise ValueError(
                f"string {string} acts on {string.n_sites} sites, expected {n_sites}"
            )
        merged[string.letters] = merged.get(string.letters, 0.0) + coeff
    dim = 2 ** n_sites
    live = [(letters, coeff) for letters, coeff in merged.items() if coeff != 0.0]
    if not live:
        return sp.csr_matrix((dim, dim), dtype=np.complex128)
    rows, cols, data = [], [], []
    for letters, coeff in live:
        r, c, phase = _coords(PauliString(letters))
        rows.append(r)
        cols.append(c)
        data.append(coeff * phase)
    total = sp.coo_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
        shape=(dim, dim),
    ).tocsr()
    total.eliminate_zeros()
    if total.nnz == 0 or np.abs(total.imag).max() == 0.0:
        return total.real.tocsr()
    return total


def expectation(op, psi: np.ndarray) -> float:
    """Real expectation value <psi|op|psi> of a Hermitian operator.

    The imaginary part of the raw inner product must be numerical noise
    (below 1e-10); anything larger signals a non-Hermitian operator and
    raises.
    """
    psi = np.asarray(psi)
    if op.shape[1] != psi.shape[0]:
        raise ValueError(f"operator dim {op.shape[1]} != state dim {psi.shape[0]}")
    raw = np.vdot(psi, op @ psi)
    if abs(raw.imag) > 1e-10:
        raise ValueError(f"expectation has imaginary part {raw.imag:.3e}; operator not Hermitian?")
    return float(raw.real)


def variance(op, psi: np.ndarray) -> float:
    """Var(op) = <op^2> - <op>^2 in the given state (clamped at zero)."""
    psi = np.asarray(psi)
    if op.shape[1] != psi.shape[0]:
        raise ValueError(f"operator dim {op.shape[1]} != state dim {psi.shape[0]}")
    opsi = op @ psi
    mean = np.vdot(psi, opsi).real
    second = np.vdot(opsi, opsi).real
    return float(max(second - mean * mean, 0.0))


def normalized(psi: np.ndarray) -> np.ndarray:
    nrm = np.linalg.norm(psi)
    if nrm == 0:
        raise ValueError("cannot normalize the zero vector")
    return np.asarray(psi, dtype=np.complex128) / nrm
