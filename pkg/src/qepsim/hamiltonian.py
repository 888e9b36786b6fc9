"""Parameterized spin Hamiltonians H(lambda) = sum_j lambda_j A_j.

A Hamiltonian is a list of Pauli-string terms, each owned by a named logical
parameter. One logical parameter may fan out over several physical terms
(e.g. one chain coupling multiplying every bond); the term ``weight`` is the
fixed factor linking the two, so the physical coefficient of a term is
``weight * value(parameter)`` and the observable conjugate to a parameter is
the weight-summed collection of its strings.

Parameters carry a role: inputs (fixed per sample), trainables (updated by
the optimizer) and output-nudge couplings (zero during inference, switched
on to nudge the ground state towards lower loss).
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .pauli import PauliString, pauli_sum

PauliSum = tuple[tuple[float, PauliString], ...]


class Role(enum.Enum):
    INPUT = "input"
    TRAINABLE = "trainable"
    OUTPUT_NUDGE = "output_nudge"


@dataclass(frozen=True)
class Term:
    label: str
    parameter: str
    role: Role
    weight: float
    string: PauliString


@dataclass(frozen=True)
class ParameterizedHamiltonian:
    n_sites: int
    terms: tuple[Term, ...]
    values: dict[str, float]
    observables: dict[str, PauliSum] = field(default_factory=dict)
    output_observables: tuple[str, ...] = ()

    def __post_init__(self):
        labels = [t.label for t in self.terms]
        if len(set(labels)) != len(labels):
            raise ValueError("term labels must be unique")
        roles: dict[str, Role] = {}
        for t in self.terms:
            if t.string.n_sites != self.n_sites:
                raise ValueError(f"term {t.label} acts on wrong register size")
            if not np.isfinite(t.weight):
                raise ValueError(f"term {t.label} has non-finite weight")
            prev = roles.setdefault(t.parameter, t.role)
            if prev is not t.role:
                raise ValueError(f"parameter {t.parameter} appears with two roles")
            if t.parameter not in self.values:
                raise ValueError(f"no value given for parameter {t.parameter}")
        for name, val in self.values.items():
            if not np.isfinite(val):
                raise ValueError(f"parameter {name} has non-finite value {val}")
        for label in self.output_observables:
            self.observable_terms(label)  # raises on dangling label

    # -- parameter bookkeeping -------------------------------------------

    def parameters(self, role: Role | None = None) -> list[str]:
        """Logical parameter names in order of first appearance."""
        seen: list[str] = []
        for t in self.terms:
            if role is not None and t.role is not role:
                continue
            if t.parameter not in seen:
                seen.append(t.parameter)
        return seen

    def value(self, name: str) -> float:
        return self.values[name]

    def role_of(self, name: str) -> Role:
        for t in self.terms:
            if t.parameter == name:
                return t.role
        raise KeyError(name)

    def with_values(self, updates: Mapping[str, float]) -> "ParameterizedHamiltonian":
        unknown = set(updates) - set(self.values)
        if unknown:
            raise KeyError(f"unknown parameters: {sorted(unknown)}")
        new_values = dict(self.values)
        new_values.update({k: float(v) for k, v in updates.items()})
        return replace(self, values=new_values)

    def with_roles(self, updates: Mapping[str, Role]) -> "ParameterizedHamiltonian":
        new_terms = tuple(
            replace(t, role=updates.get(t.parameter, t.role)) for t in self.terms
        )
        return replace(self, terms=new_terms)

    def with_observable(self, label: str, obs: PauliSum, output: bool = False):
        observables = dict(self.observables)
        observables[label] = tuple(obs)
        outputs = self.output_observables
        if output and label not in outputs:
            outputs = outputs + (label,)
        return replace(self, observables=observables, output_observables=outputs)

    # -- observables -------------------------------------------------------

    def conjugate_observable(self, parameter: str) -> PauliSum:
        """dH/d(parameter): the weight-summed strings owned by a parameter."""
        obs = tuple((t.weight, t.string) for t in self.terms if t.parameter == parameter)
        if not obs:
            raise KeyError(f"unknown parameter {parameter}")
        return obs

    def observable_terms(self, label: str) -> PauliSum:
        """Resolve an observable label.

        Lookup order: standalone observable definitions, then logical
        parameters (conjugate observable), then single term labels.
        """
        if label in self.observables:
            return self.observables[label]
        if label in self.values:
            return self.conjugate_observable(label)
        for t in self.terms:
            if t.label == label:
                return ((1.0, t.string),)
        raise KeyError(f"unknown observable {label}")

    def observable_matrix(self, label: str) -> sp.csr_matrix:
        return pauli_sum(self.observable_terms(label), self.n_sites)

    # -- assembly ----------------------------------------------------------

    def coefficient(self, term: Term) -> float:
        return term.weight * self.values[term.parameter]

    def assemble(self) -> sp.csr_matrix:
        """Coefficient-weighted sparse sum, identical strings merged."""
        return pauli_sum(
            ((self.coefficient(t), t.string) for t in self.terms), self.n_sites
        )

    def with_nudge(self, nu: Sequence[float]) -> "ParameterizedHamiltonian":
        """Add output-nudge terms nu_l * O_l for every output observable."""
        nu = np.asarray(nu, dtype=float)
        if nu.shape != (len(self.output_observables),):
            raise ValueError(
                f"nudge vector length {nu.shape} does not match "
                f"{len(self.output_observables)} output observables"
            )
        new_terms = list(self.terms)
        new_values = dict(self.values)
        for nu_l, label in zip(nu, self.output_observables):
            pname = f"nudge:{label}"
            if pname in new_values:
                raise ValueError(f"{label} already nudged")
            new_values[pname] = float(nu_l)
            for k, (coeff, string) in enumerate(self.observable_terms(label)):
                new_terms.append(
                    Term(f"{pname}[{k}]", pname, Role.OUTPUT_NUDGE, coeff, string)
                )
        return replace(self, terms=tuple(new_terms), values=new_values)

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "n_sites": self.n_sites,
            "terms": [
                {
                    "label": t.label,
                    "parameter": t.parameter,
                    "role": t.role.value,
                    "weight": t.weight,
                    "letters": t.string.letters,
                }
                for t in self.terms
            ],
            "values": dict(self.values),
            "observables": {
                label: [[c, s.letters] for c, s in obs]
                for label, obs in self.observables.items()
            },
            "output_observables": list(self.output_observables),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ParameterizedHamiltonian":
        terms = tuple(
            Term(
                d["label"],
                d["parameter"],
                Role(d["role"]),
                float(d["weight"]),
                PauliString(d["letters"]),
            )
            for d in doc["terms"]
        )
        observables = {
            label: tuple((float(c), PauliString(letters)) for c, letters in obs)
            for label, obs in doc.get("observables", {}).items()
        }
        return cls(
            n_sites=int(doc["n_sites"]),
            terms=terms,
            values={k: float(v) for k, v in doc["values"].items()},
            observables=observables,
            output_observables=tuple(doc.get("output_observables", ())),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ParameterizedHamiltonian":
        return cls.from_dict(json.loads(text))


# -- cluster Ising chain ----------------------------------------------------


def build_cluster_ising(
    g_zxz: float,
    g_zz: float,
    g_x: float,
    n: int,
    boundary: str = "periodic",
    role: Role = Role.INPUT,
) -> ParameterizedHamiltonian:
    """Cluster Ising chain: +g_zxz sum ZXZ - g_zz sum ZZ - g_x sum X.

    The three couplings are logical parameters fanned out over their chain
    terms (the minus signs live in the term weights). Periodic boundaries
    wrap all three sums over n sites; open boundaries truncate windows that
    would wrap.
    """
    if n < 3:
        raise ValueError("cluster chain needs n >= 3 (three-site ZXZ windows)")
    if boundary not in ("periodic", "open"):
        raise ValueError(f"boundary must be 'periodic' or 'open', got {boundary!r}")
    wrap = boundary == "periodic"
    terms: list[Term] = []
    for j in range(n if wrap else n - 2):
        s = PauliString.from_sites(n, {j: "Z", (j + 1) % n: "X", (j + 2) % n: "Z"})
        terms.append(Term(f"zxz[{j}]", "g_zxz", role, +1.0, s))
    for j in range(n if wrap else n - 1):
        s = PauliString.from_sites(n, {j: "Z", (j + 1) % n: "Z"})
        terms.append(Term(f"zz[{j}]", "g_zz", role, -1.0, s))
    for j in range(n):
        terms.append(Term(f"x[{j}]", "g_x", role, -1.0, PauliString.from_sites(n, {j: "X"})))
    return ParameterizedHamiltonian(
        n_sites=n,
        terms=tuple(terms),
        values={"g_zxz": float(g_zxz), "g_zz": float(g_zz), "g_x": float(g_x)},
    )


# -- two-qubit sensor ---------------------------------------------------------

PAULI_AXES = ("X", "Y", "Z")

# The three readout sign sectors used for classification; (-1, +1) is never
# an output.
OUTPUT_COMBOS = ((+1, +1), (+1, -1), (-1, -1))


@dataclass(frozen=True)
class SensorArchitecture:
    """Two extra qubits coupled to two chain sites, all 2-local couplings.

    ``chain_letters`` restricts which chain-side Pauli axes the sensor may
    couple through (ablation studies); the intra-sensor terms are always the
    full 6 single-qubit + 9 two-qubit set.
    """

    chain_attach_sites: tuple[int, int] = (3, 4)
    chain_letters: tuple[str, ...] = PAULI_AXES
    n_sensor_qubits: int = 2

    def __post_init__(self):
        if self.n_sensor_qubits != 2:
            raise ValueError("only the two-qubit sensor is implemented")
        if len(set(self.chain_attach_sites)) != 2:
            raise ValueError("need two distinct attach sites")
        bad = set(self.chain_letters) - set(PAULI_AXES)
        if bad:
            raise ValueError(f"invalid chain letters {sorted(bad)}")

    @property
    def n_parameters(self) -> int:
        intra = 2 * 3 + 3 * 3
        coupling = 2 * 2 * len(self.chain_letters) * 3
        return intra + coupling


def sensor_parameter_layout(arch: SensorArchitecture, n_chain: int):
    """Ordered (label, sites->letters) pairs defining the trainable terms.

    Order: single-qubit sensor terms, intra-sensor pairs, then chain-sensor
    couplings grouped by attach site and sensor qubit. Trainable vectors map
    onto this order everywhere in the package.
    """
    s1, s2 = n_chain, n_chain + 1
    layout: list[tuple[str, dict[int, str]]] = []
    for q, site in (("1'", s1), ("2'", s2)):
        for a in PAULI_AXES:
            layout.append((f"{a}{q}", {site: a}))
    for a in PAULI_AXES:
        for b in PAULI_AXES:
            layout.append((f"{a}1'*{b}2'", {s1: a, s2: b}))
    for c in arch.chain_attach_sites:
        for q, site in (("1'", s1), ("2'", s2)):
            for a in arch.chain_letters:
                for b in PAULI_AXES:
                    layout.append((f"{a}[{c}]*{b}{q}", {c: a, site: b}))
    return layout


def outcome_projector_terms(z1: int, z2: int, s1: int, s2: int, n_total: int) -> PauliSum:
    """Projector (1 + z1 Z_{s1})(1 + z2 Z_{s2})/4 as a Pauli sum."""
    if z1 not in (-1, +1) or z2 not in (-1, +1):
        raise ValueError("sign sector components must be +1 or -1")
    return (
        (0.25, PauliString.from_sites(n_total, {})),
        (0.25 * z1, PauliString.from_sites(n_total, {s1: "Z"})),
        (0.25 * z2, PauliString.from_sites(n_total, {s2: "Z"})),
        (0.25 * z1 * z2, PauliString.from_sites(n_total, {s1: "Z", s2: "Z"})),
    )


def build_sensor_system(
    chain: ParameterizedHamiltonian,
    arch: SensorArchitecture,
    theta: Sequence[float],
) -> ParameterizedHamiltonian:
    """Couple the trainable sensor to a chain; outputs are the sign-sector
    projectors on the two sensor qubits.

    ``theta`` maps one-to-one onto the trainable terms in the order given by
    :func:`sensor_parameter_layout`.
    """
    n_chain = chain.n_sites
    for c in arch.chain_attach_sites:
        if not 0 <= c < n_chain:
            raise ValueError(f"attach site {c} outside the chain")
    layout = sensor_parameter_layout(arch, n_chain)
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (len(layout),):
        raise ValueError(f"theta must have length {len(layout)}, got {theta.shape}")

    n_total = n_chain + arch.n_sensor_qubits
    terms = [replace(t, string=t.string.embed(n_total)) for t in chain.terms]
    values = dict(chain.values)
    for (label, sites), val in zip(layout, theta):
        terms.append(
            Term(label, label, Role.TRAINABLE, 1.0, PauliString.from_sites(n_total, sites))
        )
        values[label] = float(val)

    s1, s2 = n_chain, n_chain + 1
    observables = {
        projector_label(z1, z2): outcome_projector_terms(z1, z2, s1, s2, n_total)
        for z1, z2 in OUTPUT_COMBOS
    }
    return ParameterizedHamiltonian(
        n_sites=n_total,
        terms=tuple(terms),
        values=values,
        observables=observables,
        output_observables=tuple(projector_label(z1, z2) for z1, z2 in OUTPUT_COMBOS),
    )


def projector_label(z1: int, z2: int) -> str:
    return f"P({z1:+d},{z2:+d})"
