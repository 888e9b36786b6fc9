"""Gradient estimation by nudged ground-state response.

The estimator compares expectation values of the operators conjugate to the
trainable parameters between a free equilibration and equilibrations where
a small force (the loss error signal, scaled by beta) couples to the output
observables. Reciprocity of the static susceptibility makes that difference
quotient an estimate of the loss gradient with a number of ground-state
solves independent of the parameter count:

    one-sided:  (<A_j>|_{nu=beta*eps} - <A_j>|_{nu=0}) / beta
    symmetric:  (<A_j>|_{+beta*eps} - <A_j>|_{-beta*eps}) / (2 beta)

The symmetric variant cancels the leading finite-beta error and is the
default. The module also carries the slow reference estimators (per
parameter shifts and the exact linear-response solve) and a reciprocity
audit used in tests and the CLI.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import eigensolver
from .eigensolver import (
    DEG_TOL,
    DegenerateGroundState,
    ground_state,
    state_derivative,
)
from .hamiltonian import ParameterizedHamiltonian, Role
from .measurement import INFINITE_SHOTS, ShotModel
from .seeding import substream

NUDGE_KINDS = ("one-sided", "symmetric")


@dataclass(frozen=True)
class NudgeScheme:
    beta: float
    kind: str = "symmetric"

    def __post_init__(self):
        if self.beta <= 0:
            raise ValueError("beta > 0 required")
        if self.kind not in NUDGE_KINDS:
            raise ValueError(f"kind must be one of {NUDGE_KINDS}")

    @property
    def symmetric(self) -> bool:
        return self.kind == "symmetric"


@dataclass
class GradientEstimate:
    values: np.ndarray
    parameters: tuple[str, ...]
    scheme: NudgeScheme
    shots: ShotModel
    error_signal: np.ndarray
    free_outputs: np.ndarray
    free_expectations: np.ndarray
    free_energy: float
    free_gap: float


def mse_error_signal(y, y_target) -> np.ndarray:
    """Derivative 2 (y - y_target) of the summed-square loss."""
    y = np.asarray(y, dtype=float)
    y_target = np.asarray(y_target, dtype=float)
    if y.shape != y_target.shape:
        raise ValueError(f"output shape {y.shape} != target shape {y_target.shape}")
    return 2.0 * (y - y_target)


def _noisy_subspace_expectation(op, states, shots: ShotModel, rng) -> float:
    """Degeneracy-averaged <A> with Gaussian shot noise of the mixed state."""
    means = []
    seconds = []
    for psi in states:
        opsi = op @ psi
        means.append(np.vdot(psi, opsi).real)
        seconds.append(np.vdot(opsi, opsi).real)
    mean = float(np.mean(means))
    if shots.infinite:
        return mean
    var = max(float(np.mean(seconds)) - mean * mean, 0.0)
    return mean + np.sqrt(var / shots.shots) * rng.standard_normal()


def _measure_phase(op_h, observables, shots, rng, tol, seed, deg_tol):
    res = ground_state(op_h, tol=tol, seed=seed, deg_tol=deg_tol)
    states = res.ground_space()
    values = np.array(
        [_noisy_subspace_expectation(op, states, shots, rng) for op in observables]
    )
    return res, values


def qep_gradient(
    h: ParameterizedHamiltonian,
    eps=None,
    *,
    error_fn=None,
    scheme: NudgeScheme,
    shots: ShotModel = INFINITE_SHOTS,
    noise_key: tuple = (),
    deg_tol: float = DEG_TOL,
    tol: float = 1e-9,
    seed: int = 0,
    op_cache: dict | None = None,
) -> GradientEstimate:
    """Estimate the loss gradient for every trainable parameter of ``h``.

    The error signal can be given directly (``eps``) or computed from the
    measured free-phase outputs (``error_fn(y) -> eps``), mirroring an
    experiment where inference and training share the free equilibration.
    Expectation values are degeneracy-averaged and independently corrupted
    by the shot model in every phase; ``noise_key`` namespaces the noise
    streams (e.g. per training sample) so batch order cannot matter.

    Ground-state solves: 2 for the one-sided scheme, 3 for the symmetric
    scheme (the free phase is still solved to produce outputs and logs),
    independent of the number of trainable parameters.
    """
    trainables = h.parameters(Role.TRAINABLE)
    outputs = h.output_observables
    if not trainables:
        raise ValueError("Hamiltonian has no trainable parameters")
    if not outputs:
        raise ValueError("Hamiltonian declares no output observables")
    if (eps is None) == (error_fn is None):
        raise ValueError("give exactly one of eps or error_fn")

    # Observable matrices depend only on the term structure, so callers that
    # re-evaluate the same system at many parameter values can share a cache.
    if op_cache is None:
        op_cache = {}

    def matrix(label):
        if label not in op_cache:
            op_cache[label] = h.observable_matrix(label)
        return op_cache[label]

    conj_ops = [matrix(p) for p in trainables]
    out_ops = [matrix(l) for l in outputs]

    free_res, free_y = _measure_phase(
        h.assemble(), out_ops, shots, substream(shots.seed, *noise_key, "free-out"),
        tol, seed, deg_tol,
    )
    free_states = free_res.ground_space()
    rng_free = substream(shots.seed, *noise_key, "free")
    free_expect = np.array(
        [_noisy_subspace_expectation(op, free_states, shots, rng_free) for op in conj_ops]
    )

    if error_fn is not None:
        eps = error_fn(free_y)
    eps = np.asarray(eps, dtype=float)
    if eps.shape != (len(outputs),):
        raise ValueError(f"error signal must have length {len(outputs)}")
    if not np.all(np.isfinite(eps)):
        raise ValueError("error signal contains non-finite entries")

    beta = scheme.beta
    try:
        _, plus = _measure_phase(
            h.with_nudge(beta * eps).assemble(), conj_ops, shots,
            substream(shots.seed, *noise_key, "plus"), tol, seed, deg_tol,
        )
        if scheme.symmetric:
            _, minus = _measure_phase(
                h.with_nudge(-beta * eps).assemble(), conj_ops, shots,
                substream(shots.seed, *noise_key, "minus"), tol, seed, deg_tol,
            )
            values = (plus - minus) / (2.0 * beta)
        else:
            values = (plus - free_expect) / beta
    except eigensolver.ConvergenceError as exc:
        raise eigensolver.ConvergenceError(
            f"nudged phase failed: {exc}", best_residual=exc.best_residual
        ) from exc

    return GradientEstimate(
        values=values,
        parameters=tuple(trainables),
        scheme=scheme,
        shots=shots,
        error_signal=eps,
        free_outputs=free_y,
        free_expectations=free_expect,
        free_energy=free_res.energy,
        free_gap=free_res.gap,
    )


def parameter_shift_oracle(
    h: ParameterizedHamiltonian,
    output_label: str,
    delta: float = 1e-4,
    deg_tol: float = DEG_TOL,
    tol: float = 1e-9,
    seed: int = 0,
) -> np.ndarray:
    """d<O>/d(theta_j) for every trainable j by central finite differences.

    The inefficient baseline: two ground-state solves per parameter.
    Expectation values are degeneracy-averaged, so the oracle stays defined
    across symmetry-broken regions.
    """
    op_out = h.observable_matrix(output_label)
    grads = []
    for p in h.parameters(Role.TRAINABLE):
        v = h.value(p)
        plus = eigensolver.ground_expectation(
            h.with_values({p: v + delta}).assemble(), op_out, deg_tol, tol, seed
        )
        minus = eigensolver.ground_expectation(
            h.with_values({p: v - delta}).assemble(), op_out, deg_tol, tol, seed
        )
        grads.append((plus - minus) / (2.0 * delta))
    return np.array(grads)


def exact_loss_gradient(
    h: ParameterizedHamiltonian,
    eps,
    deg_tol: float = DEG_TOL,
    tol: float = 1e-9,
    seed: int = 0,
    rtol: float = 1e-10,
) -> np.ndarray:
    """Exact beta -> 0 loss gradient via one projected linear solve.

    Applies first-order perturbation theory with the error-weighted output
    operator as the force; reciprocity turns the state deformation into the
    full gradient over all trainable parameters at once. Requires a
    nondegenerate ground state.
    """
    eps = np.asarray(eps, dtype=float)
    outputs = h.output_observables
    if eps.shape != (len(outputs),):
        raise ValueError(f"error signal must have length {len(outputs)}")
    op_h = h.assemble()
    res = ground_state(op_h, tol=tol, seed=seed, deg_tol=deg_tol)
    if res.gap <= deg_tol:
        raise DegenerateGroundState("exact gradient needs a unique ground state")
    psi = res.state.astype(np.complex128)
    op_eps = sum(e * h.observable_matrix(l) for e, l in zip(eps, outputs))
    dpsi = state_derivative(op_h, res.energy, psi, op_eps, rtol=rtol)
    return np.array(
        [
            2.0 * np.real(np.vdot(psi, h.observable_matrix(p) @ dpsi))
            for p in h.parameters(Role.TRAINABLE)
        ]
    )


def onsager_audit(
    h: ParameterizedHamiltonian,
    pairs,
    delta: float = 1e-4,
    deg_tol: float = DEG_TOL,
    tol: float = 1e-9,
    seed: int = 0,
) -> float:
    """Max |chi_{jl} - chi_{lj}| over parameter pairs, by finite differences.

    Both cross-susceptibilities are measured for each pair; their agreement
    is the reciprocity property the whole training scheme rests on.
    """
    res = ground_state(h.assemble(), tol=tol, seed=seed, deg_tol=deg_tol)
    if res.gap <= deg_tol:
        raise DegenerateGroundState("audit point has a degenerate ground state")

    def chi(obs_label: str, param: str) -> float:
        op = h.observable_matrix(obs_label)
        v = h.value(param)
        plus = eigensolver.ground_expectation(
            h.with_values({param: v + delta}).assemble(), op, deg_tol, tol, seed
        )
        minus = eigensolver.ground_expectation(
            h.with_values({param: v - delta}).assemble(), op, deg_tol, tol, seed
        )
        return (plus - minus) / (2.0 * delta)

    worst = 0.0
    for j, l in pairs:
        worst = max(worst, abs(chi(l, j) - chi(j, l)))
    return worst


def gradient_overlap(estimate, reference) -> float:
    """Cosine of the angle between two gradient vectors (0 if either is 0)."""
    a = np.asarray(estimate, dtype=float)
    b = np.asarray(reference, dtype=float)
    if a.shape != b.shape or a.ndim != 1 or a.size == 0:
        raise ValueError("gradients must be equal-length nonempty vectors")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))
