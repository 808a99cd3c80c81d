"""Multiqubit states, dichotomic observables and quantum probability tensors.

Conventions shared by every module in this package:

* observer 1 owns the most significant bit of computational-basis indices,
* measurement outcome -1 maps to bit 0 and +1 to bit 1,
* setting combinations are mixed-radix integers with observer 1 most
  significant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import reduce
from typing import Iterable, Sequence

import numpy as np

HERMITICITY_TOL = 1e-12
TRACE_TOL = 1e-12
EIGENVALUE_SLACK = 1e-9
NORMALIZATION_TOL = 1e-10

_MAX_COUNT = 2**63 - 1

STATE_FAMILIES = (
    "ghz",
    "w",
    "psi4",
    "psi6",
    "dicke",
    "cluster",
    "bennett",
    "dur",
    "smolin",
    "mixed",
    "singlet",
    "singlet-noise",
    "external",
)


def wrap_angle(value: float, period: float) -> float:
    """Reduce an angle into [0, period)."""
    wrapped = value % period
    if wrapped >= period:  # value % period can round up to the period itself
        wrapped -= period
    return wrapped


@dataclass(frozen=True)
class DensityMatrix:
    """Validated Hermitian, unit-trace, positive-semidefinite operator."""

    entries: np.ndarray

    def __post_init__(self):
        mat = np.asarray(self.entries, dtype=complex)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError(f"density matrix must be square, got shape {mat.shape}")
        dim = mat.shape[0]
        if dim < 2 or dim & (dim - 1):
            raise ValueError(f"dimension {dim} is not a power of two >= 2")
        herm = np.max(np.abs(mat - mat.conj().T))
        if herm > HERMITICITY_TOL:
            raise ValueError(f"matrix is not Hermitian (deviation {herm:.3e})")
        trace = mat.trace()
        if abs(trace - 1.0) > TRACE_TOL:
            raise ValueError(f"trace is {trace:.15g}, expected 1")
        smallest = float(np.linalg.eigvalsh(mat)[0])
        if smallest < -EIGENVALUE_SLACK:
            raise ValueError(f"matrix is not positive semidefinite (lambda_min {smallest:.3e})")
        mat = mat.copy()
        mat.setflags(write=False)
        object.__setattr__(self, "entries", mat)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def num_qubits(self) -> int:
        return self.dim.bit_length() - 1

    def purity(self) -> float:
        return float(np.real(np.trace(self.entries @ self.entries)))


@dataclass(frozen=True)
class Observable:
    """Dichotomic qubit observable parametrized by two angles.

    The +1/-1 eigenvectors are cos(+-pi/4 + theta)|0> + e^{i phi} sin(+-pi/4 + theta)|1>.
    theta is canonical in [0, pi) (the projector pair has period pi), phi in [0, 2 pi).
    """

    theta: float
    phi: float

    def __post_init__(self):
        object.__setattr__(self, "theta", wrap_angle(float(self.theta), math.pi))
        object.__setattr__(self, "phi", wrap_angle(float(self.phi), 2.0 * math.pi))

    def eigenvector(self, outcome: int) -> np.ndarray:
        if outcome not in (+1, -1):
            raise ValueError(f"outcome must be +1 or -1, got {outcome}")
        angle = outcome * (math.pi / 4.0) + self.theta
        return np.array([math.cos(angle), math.sin(angle) * np.exp(1j * self.phi)])

    def basis(self) -> np.ndarray:
        """2x2 matrix whose row b is the bra of the outcome with bit b (0 -> -1, 1 -> +1)."""
        return np.array([self.eigenvector(-1).conj(), self.eigenvector(+1).conj()])


def projector(obs: Observable, outcome: int) -> np.ndarray:
    """Rank-1 projector onto the +-1 eigenvector of the observable."""
    ket = obs.eigenvector(outcome)
    return np.outer(ket, ket.conj())


@dataclass(frozen=True)
class Scenario:
    """Measurement scenario: observer count and per-observer setting counts."""

    settings: tuple[int, ...]

    def __init__(self, settings: Iterable[int]):
        object.__setattr__(self, "settings", tuple(int(m) for m in settings))

    def __post_init__(self):
        if len(self.settings) < 2:
            raise ValueError("a scenario needs at least two observers")
        if any(m < 1 for m in self.settings):
            raise ValueError(f"every observer needs at least one setting, got {self.settings}")
        if self.total_settings >= 63 or self.atom_count > _MAX_COUNT or self.constraint_count > _MAX_COUNT:
            raise ValueError(f"scenario {self.settings} exceeds the native integer range")

    @property
    def num_observers(self) -> int:
        return len(self.settings)

    @property
    def total_settings(self) -> int:
        return sum(self.settings)

    @property
    def atom_count(self) -> int:
        """Joint distribution size: one atom per outcome assignment to every setting."""
        return 1 << self.total_settings

    @property
    def num_combinations(self) -> int:
        return math.prod(self.settings)

    @property
    def constraint_count(self) -> int:
        return self.num_combinations * (1 << self.num_observers)

    def combination(self, index: int) -> tuple[int, ...]:
        """Decode a setting-combination index into per-observer setting choices."""
        if not 0 <= index < self.num_combinations:
            raise IndexError(f"setting combination {index} out of range")
        digits = []
        for m in reversed(self.settings):
            digits.append(index % m)
            index //= m
        return tuple(reversed(digits))

    def combination_index(self, choices: Sequence[int]) -> int:
        if len(choices) != self.num_observers:
            raise ValueError("one setting choice per observer required")
        index = 0
        for m, choice in zip(self.settings, choices):
            if not 0 <= choice < m:
                raise IndexError(f"setting choice {choice} out of range for {m} settings")
            index = index * m + choice
        return index

    def label(self) -> str:
        return "x".join(str(m) for m in self.settings)

    @classmethod
    def from_label(cls, text: str) -> "Scenario":
        parts = text.replace(",", "x").split("x")
        return cls(int(p) for p in parts)


@dataclass(frozen=True)
class AngleConfiguration:
    """Per observer, per setting, the (theta, phi) pair of one observable."""

    observables: tuple[tuple[Observable, ...], ...]

    @classmethod
    def from_pairs(cls, pairs: Sequence[Sequence[tuple[float, float]]]) -> "AngleConfiguration":
        return cls(tuple(tuple(Observable(t, p) for t, p in row) for row in pairs))

    @classmethod
    def from_flat(cls, values: Sequence[float], scenario: Scenario) -> "AngleConfiguration":
        """Unflatten [theta, phi, theta, phi, ...] ordered observer-major."""
        values = np.asarray(values, dtype=float)
        if values.size != 2 * scenario.total_settings:
            raise ValueError(
                f"expected {2 * scenario.total_settings} angles for scenario {scenario.label()}, got {values.size}"
            )
        rows = []
        pos = 0
        for m in scenario.settings:
            rows.append(tuple(Observable(values[pos + 2 * j], values[pos + 2 * j + 1]) for j in range(m)))
            pos += 2 * m
        return cls(tuple(rows))

    def to_flat(self) -> np.ndarray:
        flat = []
        for row in self.observables:
            for obs in row:
                flat.extend((obs.theta, obs.phi))
        return np.array(flat)

    @classmethod
    def random(cls, scenario: Scenario, rng: np.random.Generator) -> "AngleConfiguration":
        draws = rng.random((scenario.total_settings, 2)) * np.array([math.pi, 2.0 * math.pi])
        return cls.from_flat(draws.reshape(-1), scenario)

    def matches(self, scenario: Scenario) -> bool:
        return tuple(len(row) for row in self.observables) == scenario.settings

    def permuted(self, order: Sequence[int]) -> "AngleConfiguration":
        """Reorder observers: new observer i gets old observer order[i]."""
        return AngleConfiguration(tuple(self.observables[k] for k in order))


@dataclass(frozen=True)
class ProbabilityTensor:
    """P(outcome tuple | setting combination) for every combination and tuple.

    values[s, r] indexes setting combination s (mixed radix) and outcome
    tuple r (bits, observer 1 most significant, bit 1 = outcome +1).
    """

    scenario: Scenario
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        expected = (self.scenario.num_combinations, 1 << self.scenario.num_observers)
        if vals.shape != expected:
            raise ValueError(f"tensor shape {vals.shape} does not match scenario {expected}")
        if vals.min() < -1e-12 or vals.max() > 1.0 + 1e-12:
            raise ValueError("probabilities escape [0, 1] beyond rounding slack")
        sums = vals.sum(axis=1)
        worst = float(np.max(np.abs(sums - 1.0)))
        if worst > NORMALIZATION_TOL:
            raise ValueError(f"outcome distributions are not normalized (deviation {worst:.3e})")
        vals = np.clip(vals, 0.0, 1.0)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def marginal(self, observers: Sequence[int], combination: int) -> np.ndarray:
        """Outcome distribution of an observer subset under one setting combination."""
        n = self.scenario.num_observers
        table = self.values[combination].reshape((2,) * n)
        drop = tuple(i for i in range(n) if i not in set(observers))
        return table.sum(axis=drop).reshape(-1)

    def no_signaling_deviation(self, rng: np.random.Generator | None = None, draws: int = 12) -> float:
        """Largest marginal mismatch between combinations agreeing on a subset.

        Exhaustive over all combination pairs unless a generator is given,
        in which case `draws` random (subset, pair) probes are taken.
        """
        scen = self.scenario
        worst = 0.0
        combos = range(scen.num_combinations)
        if rng is None:
            probes = []
            for a in combos:
                for b in combos:
                    if a >= b:
                        continue
                    ca, cb = scen.combination(a), scen.combination(b)
                    shared = tuple(i for i in range(scen.num_observers) if ca[i] == cb[i])
                    if shared:
                        probes.append((shared, a, b))
        else:
            probes = []
            for _ in range(draws):
                a = int(rng.integers(scen.num_combinations))
                ca = scen.combination(a)
                keep = [i for i in range(scen.num_observers) if rng.random() < 0.5]
                if not keep:
                    keep = [int(rng.integers(scen.num_observers))]
                cb = tuple(
                    ca[i] if i in keep else int(rng.integers(scen.settings[i]))
                    for i in range(scen.num_observers)
                )
                probes.append((tuple(keep), a, scen.combination_index(cb)))
        for shared, a, b in probes:
            diff = self.marginal(shared, a) - self.marginal(shared, b)
            worst = max(worst, float(np.max(np.abs(diff))))
        return worst


@dataclass(frozen=True)
class StateSpec:
    """Catalog entry naming a state family and its parameters."""

    family: str
    qubits: int | None = None
    alpha: float | None = None
    excitations: int | None = None
    phase: float = 0.0
    path: str | None = None
    matrix: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        family = self.family.lower()
        object.__setattr__(self, "family", family)
        if family not in STATE_FAMILIES:
            raise ValueError(f"unknown state family '{family}' (choose from {', '.join(STATE_FAMILIES)})")
        n = self.qubits
        if family == "ghz":
            if n is None or n < 2:
                raise ValueError("ghz needs qubits >= 2")
            if self.alpha is None:
                object.__setattr__(self, "alpha", math.pi / 4.0)
        elif family == "w":
            if n is None or n < 2:
                raise ValueError("w needs qubits >= 2")
        elif family == "psi4":
            object.__setattr__(self, "qubits", 4)
        elif family == "psi6":
            object.__setattr__(self, "qubits", 6)
        elif family == "dicke":
            if n is None or n < 2:
                raise ValueError("dicke needs qubits >= 2")
            if self.excitations is None:
                if n % 2:
                    raise ValueError("dicke with odd qubit count needs an explicit excitation number")
                object.__setattr__(self, "excitations", n // 2)
            if not 0 <= self.excitations <= n:
                raise ValueError(f"dicke excitations must lie in [0, {n}], got {self.excitations}")
        elif family == "cluster":
            if n not in (4, 5):
                raise ValueError("cluster states are catalogued for 4 or 5 qubits")
        elif family == "bennett":
            if n not in (None, 3):
                raise ValueError("the bennett state has exactly 3 qubits")
            object.__setattr__(self, "qubits", 3)
        elif family == "dur":
            if n is None or n < 3:
                raise ValueError("dur needs qubits >= 3")
        elif family == "smolin":
            if n is None or n < 2 or n % 2:
                raise ValueError("smolin needs an even qubit count >= 2")
        elif family == "mixed":
            if n is None or n < 1:
                raise ValueError("mixed needs qubits >= 1")
        elif family == "singlet":
            if n not in (None, 2):
                raise ValueError("the singlet has exactly 2 qubits")
            object.__setattr__(self, "qubits", 2)
        elif family == "singlet-noise":
            if n is None:
                object.__setattr__(self, "qubits", 3)
            elif n < 3:
                raise ValueError("singlet-noise needs qubits >= 3 (singlet plus idle qubits)")
        elif family == "external":
            if self.path is None and self.matrix is None:
                raise ValueError("external state needs a file path")

    def describe(self) -> str:
        bits = [self.family]
        if self.family == "ghz":
            bits.append(f"alpha={self.alpha:.6g}")
        if self.family == "dicke":
            bits.append(f"k={self.excitations}")
        if self.family == "dur" and self.phase:
            bits.append(f"phase={self.phase:.6g}")
        if self.qubits is not None:
            bits.append(f"N={self.qubits}")
        return " ".join(bits)


def _ket(amplitudes: dict[int, complex], dim: int) -> np.ndarray:
    vec = np.zeros(dim, dtype=complex)
    for index, amp in amplitudes.items():
        vec[index] = amp
    return vec


def _pure(vec: np.ndarray) -> np.ndarray:
    vec = vec / np.linalg.norm(vec)
    return np.outer(vec, vec.conj())


def _w_vector(n: int, flipped: bool = False) -> np.ndarray:
    dim = 1 << n
    vec = np.zeros(dim, dtype=complex)
    for i in range(n):
        index = 1 << i
        if flipped:
            index = (dim - 1) ^ index
        vec[index] = 1.0
    return vec / math.sqrt(n)


def _dicke_vector(n: int, k: int) -> np.ndarray:
    vec = np.zeros(1 << n, dtype=complex)
    for index in range(1 << n):
        if bin(index).count("1") == k:
            vec[index] = 1.0
    return vec / np.linalg.norm(vec)


def _cluster_vector(n: int) -> np.ndarray:
    if n == 4:
        # |0000> + |0011> + |1100> - |1111>, all weight 1/2
        return _ket({0b0000: 0.5, 0b0011: 0.5, 0b1100: 0.5, 0b1111: -0.5}, 16)
    # linear cluster: uniform superposition with a -1 for every adjacent 1-pair
    vec = np.zeros(1 << n, dtype=complex)
    for index in range(1 << n):
        bits = [(index >> (n - 1 - i)) & 1 for i in range(n)]
        sign = (-1) ** sum(bits[i] * bits[i + 1] for i in range(n - 1))
        vec[index] = sign
    return vec / math.sqrt(1 << n)


def _bennett_matrix() -> np.ndarray:
    plus = np.array([1.0, 1.0]) / math.sqrt(2.0)
    minus = np.array([1.0, -1.0]) / math.sqrt(2.0)
    zero = np.array([1.0, 0.0])
    one = np.array([0.0, 1.0])
    members = [
        (zero, one, plus),
        (one, plus, zero),
        (plus, zero, one),
        (minus, minus, minus),
    ]
    total = np.eye(8, dtype=complex)
    for a, b, c in members:
        vec = reduce(np.kron, (a, b, c)).astype(complex)
        total -= np.outer(vec, vec.conj())
    return total / 4.0


def _dur_matrix(n: int, phase: float) -> np.ndarray:
    dim = 1 << n
    ghz = _ket({0: 1.0 / math.sqrt(2.0), dim - 1: np.exp(1j * phase) / math.sqrt(2.0)}, dim)
    mat = np.outer(ghz, ghz.conj())
    for k in range(n):
        single = 1 << (n - 1 - k)
        mat[single, single] += 0.5
        flipped = (dim - 1) ^ single
        mat[flipped, flipped] += 0.5
    return mat / (n + 1)


def _smolin_matrix(n: int) -> np.ndarray:
    paulis = (
        np.array([[0, 1], [1, 0]], dtype=complex),
        np.array([[0, -1j], [1j, 0]], dtype=complex),
        np.array([[1, 0], [0, -1]], dtype=complex),
    )
    dim = 1 << n
    mat = np.eye(dim, dtype=complex)
    sign = (-1) ** (n // 2)
    for sigma in paulis:
        mat += sign * reduce(np.kron, [sigma] * n)
    return mat / dim


def make_state(spec: StateSpec) -> DensityMatrix:
    """Construct the density matrix of a catalog state."""
    family, n = spec.family, spec.qubits
    if family == "ghz":
        dim = 1 << n
        vec = _ket({0: math.cos(spec.alpha), dim - 1: math.sin(spec.alpha)}, dim)
        return DensityMatrix(np.outer(vec, vec.conj()))
    if family == "w":
        return DensityMatrix(_pure(_w_vector(n)))
    if family == "psi4":
        s3, s12 = 1.0 / math.sqrt(3.0), 1.0 / math.sqrt(12.0)
        vec = _ket(
            {0b0011: s3, 0b1100: s3, 0b0101: -s12, 0b0110: -s12, 0b1001: -s12, 0b1010: -s12},
            16,
        )
        return DensityMatrix(_pure(vec))
    if family == "psi6":
        ghz_minus = _ket({0b000111: 1.0, 0b111000: -1.0}, 64) / math.sqrt(2.0)
        w3, w3bar = _w_vector(3), _w_vector(3, flipped=True)
        vec = ghz_minus / math.sqrt(2.0) + 0.5 * (np.kron(w3bar, w3) - np.kron(w3, w3bar))
        return DensityMatrix(_pure(vec))
    if family == "dicke":
        return DensityMatrix(_pure(_dicke_vector(n, spec.excitations)))
    if family == "cluster":
        return DensityMatrix(_pure(_cluster_vector(n)))
    if family == "bennett":
        return DensityMatrix(_bennett_matrix())
    if family == "dur":
        return DensityMatrix(_dur_matrix(n, spec.phase))
    if family == "smolin":
        return DensityMatrix(_smolin_matrix(n))
    if family == "mixed":
        dim = 1 << n
        return DensityMatrix(np.eye(dim, dtype=complex) / dim)
    if family == "singlet":
        return DensityMatrix(_pure(_ket({0b01: 1.0, 0b10: -1.0}, 4)))
    if family == "singlet-noise":
        singlet = _pure(_ket({0b01: 1.0, 0b10: -1.0}, 4))
        idle = np.eye(1 << (n - 2), dtype=complex) / (1 << (n - 2))
        return DensityMatrix(np.kron(singlet, idle))
    if family == "external":
        if spec.matrix is not None:
            return DensityMatrix(spec.matrix)
        from . import scenario_io

        return scenario_io.read_density_matrix(spec.path)
    raise ValueError(f"unknown state family '{family}'")


def mix_white_noise(rho: DensityMatrix, visibility: float) -> DensityMatrix:
    """v * rho + (1 - v)/2^N * identity."""
    if not 0.0 <= visibility <= 1.0:
        raise ValueError(f"visibility must lie in [0, 1], got {visibility}")
    dim = rho.dim
    mixed = visibility * rho.entries + (1.0 - visibility) / dim * np.eye(dim)
    return DensityMatrix(mixed)


def probability_tensor(rho: DensityMatrix, angles: AngleConfiguration, scenario: Scenario) -> ProbabilityTensor:
    """Quantum outcome probabilities Tr(rho . tensor of eigenprojectors).

    The per-observer measurement bases are computed once per angle set; each
    setting combination then costs one basis change of rho, which yields all
    2^N outcome probabilities at once.
    """
    n = scenario.num_observers
    if rho.dim != 1 << n:
        raise ValueError(f"state has {rho.num_qubits} qubits but scenario expects {n}")
    if not angles.matches(scenario):
        raise ValueError(
            f"angle configuration supplies {[len(row) for row in angles.observables]} observables, "
            f"scenario needs {list(scenario.settings)}"
        )
    bases = [[obs.basis() for obs in row] for row in angles.observables]
    values = np.empty((scenario.num_combinations, 1 << n))
    for s in range(scenario.num_combinations):
        choice = scenario.combination(s)
        transform = reduce(np.kron, (bases[i][choice[i]] for i in range(n)))
        half = transform @ rho.entries
        values[s] = np.einsum("ij,ij->i", half, transform.conj()).real
    return ProbabilityTensor(scenario, values)


def apply_noise_to_tensor(tensor: ProbabilityTensor, visibility: float) -> ProbabilityTensor:
    """Map every entry to v * P + (1 - v)/2^N; commutes with mix_white_noise."""
    if not 0.0 <= visibility <= 1.0:
        raise ValueError(f"visibility must lie in [0, 1], got {visibility}")
    offset = (1.0 - visibility) / (1 << tensor.scenario.num_observers)
    return ProbabilityTensor(tensor.scenario, visibility * tensor.values + offset)
