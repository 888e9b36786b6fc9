"""Measurement of output observables: projectors, shot noise, accuracies.

Finite measurement budgets are modeled by replacing an exact expectation
value with a Gaussian draw centered on it with variance Var(A)/M, a good
approximation already for moderate M. Single-shot readout of the two sensor
qubits samples one of the four sign sectors from the Born distribution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .hamiltonian import outcome_projector_terms
from .pauli import expectation, pauli_sum, variance


@dataclass(frozen=True)
class ShotModel:
    """Number of measurement shots per expectation value; None = infinite."""

    shots: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.shots is not None and self.shots < 1:
            raise ValueError("shot count must be >= 1 (or None for infinite)")

    @property
    def infinite(self) -> bool:
        return self.shots is None


INFINITE_SHOTS = ShotModel(None)


@dataclass(frozen=True)
class OutcomeCombo:
    """Joint sign of the two sensor-qubit Z readouts."""

    z1: int
    z2: int

    def __post_init__(self):
        if self.z1 not in (-1, +1) or self.z2 not in (-1, +1):
            raise ValueError("outcome components must be +1 or -1")


ALL_COMBOS = tuple(OutcomeCombo(z1, z2) for z1 in (+1, -1) for z2 in (+1, -1))


def outcome_projector(combo: OutcomeCombo, sensor_sites: tuple[int, int], n_total: int):
    """Orthogonal projector onto one sign sector of two Z readouts."""
    s1, s2 = sensor_sites
    if s1 == s2 or not (0 <= s1 < n_total and 0 <= s2 < n_total):
        raise ValueError("sensor sites must be two distinct sites in range")
    return pauli_sum(outcome_projector_terms(combo.z1, combo.z2, s1, s2, n_total), n_total)


def noisy_expectation(op, psi, shots: ShotModel, rng=None) -> float:
    """<A>, corrupted by Gaussian shot noise with variance Var(A)/M.

    Infinite shots return the exact value. The noise stream defaults to a
    generator seeded by the shot model; pass an explicit ``rng`` to use a
    derived substream.
    """
    exact = expectation(op, psi)
    if shots.infinite:
        return exact
    if rng is None:
        rng = np.random.default_rng(shots.seed)
    sigma = np.sqrt(variance(op, psi) / shots.shots)
    return float(exact + sigma * rng.standard_normal())


def born_probabilities(psi, sensor_sites: tuple[int, int]) -> np.ndarray:
    """Probabilities of the four (z1, z2) sectors, ordered as ALL_COMBOS.

    Read directly off the amplitudes: site s contributes bit
    (index >> (n-1-s)) & 1, with bit 0 meaning z = +1.
    """
    psi = np.asarray(psi)
    dim = psi.shape[0]
    n = int(np.log2(dim))
    if 2 ** n != dim:
        raise ValueError("state dimension is not a power of two")
    s1, s2 = sensor_sites
    idx = np.arange(dim)
    b1 = (idx >> (n - 1 - s1)) & 1
    b2 = (idx >> (n - 1 - s2)) & 1
    weights = np.abs(psi) ** 2
    probs = np.empty(4)
    for k, combo in enumerate(ALL_COMBOS):
        mask = (b1 == (combo.z1 == -1)) & (b2 == (combo.z2 == -1))
        probs[k] = weights[mask].sum()
    return probs


def single_shot(psi, sensor_sites: tuple[int, int], rng) -> OutcomeCombo:
    """One projective measurement of both sensor Z operators."""
    probs = born_probabilities(psi, sensor_sites)
    probs = probs / probs.sum()
    return ALL_COMBOS[int(rng.choice(4, p=probs))]


def many_queries_accuracy(predicted_probs, labels) -> float:
    """Fraction of samples whose argmax output matches the integer label.

    Ties break to the lowest index, so the result is deterministic.
    """
    probs = np.asarray(predicted_probs, dtype=float)
    labels = np.asarray(labels, dtype=int)
    if probs.ndim != 2 or probs.shape[1] != 3:
        raise ValueError("expected one 3-vector of probabilities per sample")
    if probs.shape[0] != labels.shape[0]:
        raise ValueError("probability rows and labels differ in length")
    if (probs < 0).any():
        raise ValueError("probabilities must be nonnegative")
    return float(np.mean(np.argmax(probs, axis=1) == labels))


def single_shot_accuracy(states, labels, sensor_sites, rng, n_shots: int = 1) -> float:
    """Fraction of samples where sampled readout matches the label combo.

    With ``n_shots`` > 1 a plurality vote is taken; the sample counts as
    correct only if the labeled sector is drawn strictly more often than any
    other sector (outcomes in the unused sector can never match).
    """
    if len(states) != len(labels):
        raise ValueError("states and labels differ in length")
    correct = 0
    for psi, label in zip(states, labels):
        counts: dict[OutcomeCombo, int] = {}
        for _ in range(n_shots):
            combo = single_shot(psi, sensor_sites, rng)
            counts[combo] = counts.get(combo, 0) + 1
        hits = counts.get(label, 0)
        if hits > 0 and all(c < hits for k, c in counts.items() if k != label):
            correct += 1
    return correct / len(states)
