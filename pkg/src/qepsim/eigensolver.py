"""Ground states of sparse Hermitian operators, with degeneracy handling.

Large systems use ARPACK's implicitly restarted Lanczos iteration
(``scipy.sparse.linalg.eigsh``) with a seeded deterministic start vector and
a fixed Krylov width; small systems fall back to dense diagonalization,
which is both faster and exact for degenerate subspaces at those sizes.

Every ground-state solve increments a module-level equilibration counter so
tests and the CLI can audit how many "experiments" an estimator performed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .hamiltonian import ParameterizedHamiltonian
from .pauli import expectation

DEG_TOL = 1e-8
DENSE_CUTOFF = 256

_equilibrations = 0


def equilibration_count() -> int:
    return _equilibrations


def reset_equilibration_count():
    global _equilibrations
    _equilibrations = 0


class ConvergenceError(RuntimeError):
    """Eigensolver failed to reach the requested residual."""

    def __init__(self, message, best_residual=None):
        super().__init__(message)
        self.best_residual = best_residual


class DegenerateGroundState(RuntimeError):
    """Operation requires a unique ground state but the gap closed."""


@dataclass
class GroundStateResult:
    energy: float
    state: np.ndarray
    gap: float
    degenerate_states: list[np.ndarray] | None = None

    @property
    def is_degenerate(self) -> bool:
        return self.degenerate_states is not None

    def ground_space(self) -> list[np.ndarray]:
        return self.degenerate_states if self.is_degenerate else [self.state]


def _fix_phase(vec: np.ndarray) -> np.ndarray:
    """Make the largest-magnitude amplitude real and positive."""
    idx = int(np.argmax(np.abs(vec)))
    amp = vec[idx]
    if amp == 0:
        return vec
    return vec * (np.conj(amp) / abs(amp))


def _start_vector(dim: int, seed: int, complex_dtype: bool) -> np.ndarray:
    rng = np.random.default_rng(seed)
    v0 = rng.standard_normal(dim)
    if complex_dtype:
        v0 = v0 + 1j * rng.standard_normal(dim)
    return v0 / np.linalg.norm(v0)


def _lowest_eigh(op, k: int, seed: int, max_iter, tol: float):
    """k lowest eigenpairs, ascending. Dense below DENSE_CUTOFF else ARPACK."""
    dim = op.shape[0]
    if dim <= DENSE_CUTOFF:
        dense = op.toarray() if sp.issparse(op) else np.asarray(op)
        vals, vecs = np.linalg.eigh(dense)
        return vals[:k], vecs[:, :k]
    v0 = _start_vector(dim, seed, np.issubdtype(op.dtype, np.complexfloating))
    best = None
    ladder = sorted({min(dim, max(2 * k + 8, width)) for width in (20, 40, 80)})
    for ncv in ladder:
        try:
            vals, vecs = spla.eigsh(
                op, k=k, which="SA", v0=v0, ncv=ncv, maxiter=max_iter, tol=0
            )
        except spla.ArpackNoConvergence as exc:
            if len(exc.eigenvalues):
                i = int(np.argmin(exc.eigenvalues))
                vec = exc.eigenvectors[:, i]
                best = float(np.linalg.norm(op @ vec - exc.eigenvalues[i] * vec))
            continue  # widen the Krylov basis and retry
        order = np.argsort(vals)
        return vals[order], vecs[:, order]
    raise ConvergenceError(
        f"Lanczos did not converge within {max_iter or 'default'} iterations "
        f"(best residual {best})",
        best_residual=best,
    )


def ground_state(
    op,
    tol: float = 1e-9,
    max_iter: int | None = None,
    seed: int = 0,
    deg_tol: float = DEG_TOL,
) -> GroundStateResult:
    """Lowest eigenpair of a Hermitian operator plus the spectral gap.

    Deterministic for fixed (op, tol, seed). When the gap falls below
    ``deg_tol`` the result also carries an orthonormal basis of the
    near-degenerate ground space. Raises ConvergenceError if the residual
    of the returned state exceeds ``tol``.
    """
    global _equilibrations
    dim = op.shape[0]
    if dim < 2:
        raise ValueError("operator must act on at least a qubit")
    _equilibrations += 1

    k = min(2, dim - 1) if dim > DENSE_CUTOFF else min(2, dim)
    vals, vecs = _lowest_eigh(op, k, seed, max_iter, tol)
    energy = float(vals[0])
    state = _fix_phase(vecs[:, 0])
    residual = float(np.linalg.norm(op @ state - energy * state))
    if residual > tol:
        raise ConvergenceError(
            f"ground-state residual {residual:.3e} exceeds tol {tol:.1e}",
            best_residual=residual,
        )
    gap = float(vals[1] - vals[0]) if len(vals) > 1 else 0.0

    degenerate = None
    if gap <= deg_tol:
        _, space_vecs = _ground_space(op, energy, deg_tol, seed, max_iter, tol)
        degenerate = [_fix_phase(space_vecs[:, i]) for i in range(space_vecs.shape[1])]
    return GroundStateResult(energy=energy, state=state, gap=max(gap, 0.0), degenerate_states=degenerate)


def _ground_space(op, energy, deg_tol, seed, max_iter, tol, k_cap: int = 16):
    """All eigenpairs within deg_tol of the ground energy (plus the next one)."""
    dim = op.shape[0]
    k = min(4, dim if dim <= DENSE_CUTOFF else dim - 1)
    while True:
        vals, vecs = _lowest_eigh(op, k, seed, max_iter, tol)
        inside = vals <= energy + deg_tol
        if not inside.all() or k >= min(k_cap, dim if dim <= DENSE_CUTOFF else dim - 1):
            break
        k = min(2 * k, dim if dim <= DENSE_CUTOFF else dim - 1)
    if inside.all():
        raise ConvergenceError(
            f"ground space larger than {k_cap} states; refusing to average"
        )
    keep = int(np.sum(inside))
    return vals, vecs[:, :keep]


def ground_expectation(
    op_h,
    op_a,
    deg_tol: float = DEG_TOL,
    tol: float = 1e-9,
    seed: int = 0,
) -> float:
    """<A> in the ground state, averaged uniformly over a degenerate subspace."""
    if op_h.shape != op_a.shape:
        raise ValueError("operator dimensions differ")
    res = ground_state(op_h, tol=tol, seed=seed, deg_tol=deg_tol)
    return subspace_expectation(op_a, res.ground_space())


def subspace_expectation(op_a, states) -> float:
    """Uniform average of <psi|A|psi> over an orthonormal set of states."""
    return float(np.mean([expectation(op_a, psi) for psi in states]))


def _complement_solve(op_h, energy, psi, rhs, rtol: float = 1e-10, maxiter: int | None = None):
    """Apply (E - H)^{-1} to rhs on the orthogonal complement of psi.

    H - E is positive semidefinite with its kernel spanned by psi, so the
    projected system is solved with conjugate gradients and the sign flipped
    at the end.
    """
    dim = op_h.shape[0]
    psi = np.asarray(psi, dtype=np.complex128)

    def project(v):
        return v - psi * np.vdot(psi, v)

    def matvec(v):
        pv = project(v)
        return project(op_h @ pv - energy * pv)

    lin = spla.LinearOperator((dim, dim), matvec=matvec, dtype=np.complex128)
    b = project(np.asarray(rhs, dtype=np.complex128))
    x, info = spla.cg(lin, b, rtol=rtol, atol=0.0, maxiter=maxiter or 20 * dim)
    if info != 0:
        raise ConvergenceError(f"projected linear solve failed (info={info})")
    return -project(x)


def state_derivative(op_h, energy, psi, op_a, rtol: float = 1e-10):
    """First-order deformation of the ground state under a force on A.

    Returns (E - H)^{-1} (A - <A>) |psi>, the perturbation-theory expression
    for d|psi>/d(lambda_A).
    """
    apsi = op_a @ psi
    mean = np.vdot(psi, apsi)
    return _complement_solve(op_h, energy, psi, apsi - mean * psi, rtol=rtol)


def exact_susceptibility(
    h: ParameterizedHamiltonian,
    j: str,
    l: str,
    deg_tol: float = DEG_TOL,
    tol: float = 1e-9,
    seed: int = 0,
    rtol: float = 1e-10,
) -> float:
    """Static susceptibility chi_{lj} = d<O_l>/d(lambda_j), exactly.

    Computed from first-order perturbation theory via one projected linear
    solve; requires a nondegenerate ground state.
    """
    op_h = h.assemble()
    res = ground_state(op_h, tol=tol, seed=seed, deg_tol=deg_tol)
    if res.gap <= deg_tol:
        raise DegenerateGroundState(
            f"gap {res.gap:.3e} <= deg_tol {deg_tol:.1e}; "
            "use finite differences with degenerate averaging instead"
        )
    op_j = h.observable_matrix(j)
    op_l = h.observable_matrix(l)
    psi = res.state.astype(np.complex128)
    dpsi = state_derivative(op_h, res.energy, psi, op_j, rtol=rtol)
    return float(2.0 * np.real(np.vdot(psi, op_l @ dpsi)))
