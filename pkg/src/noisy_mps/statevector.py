"""Exact dense state-vector simulator used as ground truth.

Qubit 0 is the slowest-varying (most significant) bit of the amplitude index:
the bitstring ``"i0 i1 ... i_{N-1}"`` has index ``sum_k i_k 2^(N-1-k)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .circuits import Circuit
from .errors import CapacityError, DimensionError, ValidationError

MAX_QUBITS = 26
UNITARY_CHECK = 1e-8


def parse_bits(x: str | Sequence[int], n: int | None = None) -> tuple[int, ...]:
    """Bitstring (``"0110"`` or a sequence of 0/1) as a tuple of ints."""
    bits = tuple(int(c) for c in x)
    if any(b not in (0, 1) for b in bits):
        raise ValidationError(f"bitstring must contain only 0/1, got {x!r}")
    if n is not None and len(bits) != n:
        raise DimensionError(f"bitstring has length {len(bits)}, expected {n}")
    return bits


def bits_to_index(bits: Sequence[int]) -> int:
    idx = 0
    for b in bits:
        idx = 2 * idx + b
    return idx


def index_to_bits(idx: int, n: int) -> str:
    return format(idx, f"0{n}b")


def _check_capacity(n: int) -> None:
    if n > MAX_QUBITS:
        raise CapacityError(f"{n} qubits exceed the state-vector cap of {MAX_QUBITS}")


@dataclass
class StateVector:
    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        _check_capacity(self.n_qubits)
        self.amplitudes = np.asarray(self.amplitudes, dtype=np.complex128)
        if self.amplitudes.shape != (2**self.n_qubits,):
            raise DimensionError(f"expected {2**self.n_qubits} amplitudes, got {self.amplitudes.shape}")

    @classmethod
    def zeros(cls, n: int) -> StateVector:
        return cls.basis(n, "0" * n)

    @classmethod
    def basis(cls, n: int, x: str | Sequence[int]) -> StateVector:
        _check_capacity(n)
        amps = np.zeros(2**n, dtype=np.complex128)
        amps[bits_to_index(parse_bits(x, n))] = 1.0
        return cls(n, amps)

    @classmethod
    def uniform(cls, n: int) -> StateVector:
        _check_capacity(n)
        return cls(n, np.full(2**n, 2.0 ** (-n / 2), dtype=np.complex128))

    def copy(self) -> StateVector:
        return StateVector(self.n_qubits, self.amplitudes.copy())

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def apply_gate(self, u: np.ndarray, targets: Sequence[int]) -> StateVector:
        """Apply ``u`` in place to ``targets`` (first target = most significant bit of ``u``)."""
        u = np.asarray(u, dtype=np.complex128)
        k = len(targets)
        if k not in (1, 2) or u.shape != (2**k, 2**k):
            raise DimensionError(f"gate of shape {u.shape} does not match {k} targets")
        if len(set(targets)) != k or any(not 0 <= t < self.n_qubits for t in targets):
            raise ValidationError(f"invalid targets {tuple(targets)} for {self.n_qubits} qubits")
        if np.max(np.abs(u.conj().T @ u - np.eye(2**k))) > UNITARY_CHECK:
            raise ValidationError("gate matrix is not unitary")
        psi = self.amplitudes.reshape((2,) * self.n_qubits)
        psi = np.tensordot(u.reshape((2,) * (2 * k)), psi, axes=(list(range(k, 2 * k)), list(targets)))
        psi = np.moveaxis(psi, list(range(k)), list(targets))
        self.amplitudes = np.ascontiguousarray(psi).reshape(-1)
        return self

    def run(self, circuit: Circuit, depth: int | None = None) -> StateVector:
        """Apply every gate of ``circuit`` (or its first ``depth`` two-qubit layers)."""
        if circuit.n_qubits != self.n_qubits:
            raise DimensionError("circuit and state sizes differ")
        for d, g in circuit.iter_gates():
            if depth is not None and d > depth:
                break
            self.apply_gate(g.matrix, g.targets)
        return self

    def amplitude(self, x: str | Sequence[int]) -> complex:
        return complex(self.amplitudes[bits_to_index(parse_bits(x, self.n_qubits))])

    def entropy(self, cut: int) -> float:
        """Entanglement entropy between qubits ``< cut`` and ``>= cut`` from the reduced density matrix."""
        psi = self.amplitudes.reshape(2**cut, -1)
        rho = psi @ psi.conj().T
        w = np.linalg.eigvalsh(rho)
        w = w[w > 1e-300]
        return float(-np.sum(w * np.log(w)))


def overlap(a: StateVector, b: StateVector) -> complex:
    """``<a|b>``."""
    if a.n_qubits != b.n_qubits:
        raise DimensionError(f"size mismatch: {a.n_qubits} vs {b.n_qubits} qubits")
    return complex(np.vdot(a.amplitudes, b.amplitudes))


def from_mps(m) -> StateVector:
    """Dense vector of an MPS or grouped MPS (at most 26 qubits)."""
    _check_capacity(m.n_qubits)
    return StateVector(m.n_qubits, m.to_dense())


def simulate(circuit: Circuit, depth: int | None = None) -> StateVector:
    return StateVector.zeros(circuit.n_qubits).run(circuit, depth)
