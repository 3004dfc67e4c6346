"""Matrix-product-state simulation with bond-dimension truncation.

Site tensors have shape ``(chi_left, d, chi_right)`` with ``d = 2`` for a plain
qubit chain. Bitstrings follow the state-vector convention: character ``k``
is qubit ``k`` and qubit 0 is the most significant bit of dense indices.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import tensor as tc
from .circuits import Circuit, Gate, swap_qubit_order
from .errors import DimensionError, ValidationError
from .statevector import parse_bits

UNITARY_CHECK = 1e-8


def check_unitary(u: np.ndarray, dim: int) -> np.ndarray:
    u = np.asarray(u, dtype=np.complex128)
    if u.shape != (dim, dim):
        raise DimensionError(f"expected a {dim}x{dim} gate, got {u.shape}")
    if np.max(np.abs(u.conj().T @ u - np.eye(dim))) > UNITARY_CHECK:
        raise ValidationError("gate matrix is not unitary")
    return u


# ---------------------------------------------------------------------------
# fidelity bookkeeping


@dataclass(frozen=True)
class FidelityEntry:
    ordinal: int
    qubits: tuple[int, ...]
    f: float
    depth: int
    kind: str = "gate"  # "gate": truncated two-qubit gate, "exact": in-group gate, "split": regrouping


@dataclass
class FidelityLog:
    """Per-operation truncation fidelities.

    ``f_av`` is ``(prod f)^(1/n)`` with ``n`` the number of two-qubit gates
    (kinds "gate" and "exact"); "split" factors from regrouping enter the
    product but do not count as gates.
    """

    entries: list[FidelityEntry] = field(default_factory=list)
    cumulative_log_f: float = 0.0

    def append(self, qubits: Sequence[int], f: float, depth: int, kind: str = "gate") -> FidelityEntry:
        if not 0.0 < f <= 1.0:
            raise ValueError(f"fidelity {f} outside (0, 1]")
        ordinal = self.n_gates + 1 if kind != "split" else self.n_gates
        entry = FidelityEntry(ordinal, tuple(qubits), float(f), depth, kind)
        self.entries.append(entry)
        self.cumulative_log_f += math.log(f)
        return entry

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def n_gates(self) -> int:
        return sum(e.kind != "split" for e in self.entries)

    @property
    def fidelities(self) -> np.ndarray:
        return np.array([e.f for e in self.entries])

    def product(self) -> float:
        return math.exp(self.cumulative_log_f)

    def f_av(self) -> float:
        n = self.n_gates
        return math.exp(self.cumulative_log_f / n) if n else 1.0

    def select(self, keep: Callable[[FidelityEntry], bool]) -> FidelityLog:
        out = FidelityLog()
        for e in self.entries:
            if keep(e):
                out.entries.append(e)
                out.cumulative_log_f += math.log(e.f)
        return out

    def windowed(self, depth: int, width: int = 2) -> float:
        """Geometric mean of gate fidelities with ``depth - width < d <= depth``."""
        return self.select(lambda e: depth - width < e.depth <= depth and e.kind != "split").f_av()

    def product_through(self, depth: int) -> float:
        return self.select(lambda e: e.depth <= depth).product()

    def depths(self) -> list[int]:
        return sorted({e.depth for e in self.entries})


# ---------------------------------------------------------------------------
# shared kernels


def two_site_update(
    a: np.ndarray, b: np.ndarray, u: np.ndarray, chi: int, absorb: str = "right"
) -> tuple[np.ndarray, np.ndarray, float, np.ndarray]:
    """Contract ``a (l,2,m)`` and ``b (m,2,r)``, apply ``u``, SVD and truncate to ``chi``.

    Returns the new pair, the kept weight fraction and the full spectrum of
    the gated two-site tensor. The kept singular values are rescaled to unit
    norm and multiplied into the right (default) or left factor.
    """
    theta = tc.contract(a, b, [(2, 0)])  # (l, i, j, r)
    theta = np.einsum("abij,lijr->labr", u.reshape(2, 2, 2, 2), theta, optimize=True)
    full = tc.svd(theta, left=[0, 1])
    kept, f = tc.truncate(full, chi, drop_zeros=True)
    s = kept.s / np.linalg.norm(kept.s)
    if absorb == "right":
        return kept.u, s[:, None, None] * kept.v, f, full.s
    return kept.u * s, kept.v, f, full.s


def _shift_right(tensors: list[np.ndarray], i: int) -> None:
    q, r = tc.qr(tensors[i], left=[0, 1])
    tensors[i] = q
    tensors[i + 1] = tc.contract(r, tensors[i + 1], [(1, 0)])


def _shift_left(tensors: list[np.ndarray], i: int) -> None:
    # LQ through a QR of the (d, r) x l matricization
    q, r = tc.qr(tensors[i], left=[1, 2])  # q (d, r, k), r (k, l)
    tensors[i] = q.transpose(2, 0, 1)
    tensors[i - 1] = tc.contract(tensors[i - 1], r, [(2, 1)])


class TensorTrain:
    """Ordered site tensors with a tracked orthogonality center."""

    def __init__(self, tensors: list[np.ndarray], chi_max: int, center: int | None = None):
        self.tensors = [tc.as_tensor(t) for t in tensors]
        self.chi_max = int(chi_max)
        self.center = center
        self.log = FidelityLog()
        for left, right in zip(self.tensors, self.tensors[1:]):
            if left.shape[2] != right.shape[0]:
                raise DimensionError(f"bond mismatch {left.shape} / {right.shape}")
        if self.tensors[0].shape[0] != 1 or self.tensors[-1].shape[2] != 1:
            raise DimensionError("outer bonds must have extent 1")

    @property
    def n_sites(self) -> int:
        return len(self.tensors)

    @property
    def bond_dims(self) -> list[int]:
        return [t.shape[2] for t in self.tensors[:-1]]

    def copy(self):
        return copy.deepcopy(self)

    def move_center(self, target: int) -> None:
        """Move the orthogonality center to ``target`` with QR sweeps."""
        if not 0 <= target < self.n_sites:
            raise IndexError(f"site {target} out of range")
        if self.center is None:
            for i in range(target):
                _shift_right(self.tensors, i)
            for i in range(self.n_sites - 1, target, -1):
                _shift_left(self.tensors, i)
        else:
            for i in range(self.center, target):
                _shift_right(self.tensors, i)
            for i in range(self.center, target, -1):
                _shift_left(self.tensors, i)
        self.center = target

    def canonicalize(self, center: int):
        self.move_center(center)
        return self

    def is_canonical(self, center: int | None = None, tol: float = 1e-10) -> bool:
        c = self.center if center is None else center
        if c is None:
            return False
        for t in self.tensors[:c]:
            m = t.reshape(-1, t.shape[2])
            if np.max(np.abs(m.conj().T @ m - np.eye(m.shape[1]))) > tol:
                return False
        for t in self.tensors[c + 1 :]:
            m = t.reshape(t.shape[0], -1)
            if np.max(np.abs(m @ m.conj().T - np.eye(m.shape[0]))) > tol:
                return False
        return True

    def norm(self) -> float:
        if self.center is not None:
            return float(np.linalg.norm(self.tensors[self.center]))
        return math.sqrt(abs(tt_overlap(self.tensors, self.tensors)))

    def site_dense(self) -> np.ndarray:
        """Amplitudes in site order (first site slowest)."""
        psi = self.tensors[0].reshape(-1, self.tensors[0].shape[2])
        for t in self.tensors[1:]:
            psi = (psi @ t.reshape(t.shape[0], -1)).reshape(-1, t.shape[2])
        return psi.reshape(-1)

    def bond_spectrum(self, bond: int) -> np.ndarray:
        """Schmidt values across the bond between sites ``bond`` and ``bond + 1``."""
        self.move_center(bond)
        return tc.svd(self.tensors[bond], left=[0, 1]).s


def tt_overlap(a: Sequence[np.ndarray], b: Sequence[np.ndarray]) -> complex:
    """``<a|b>`` for two tensor trains with matching physical extents."""
    if len(a) != len(b):
        raise DimensionError("tensor trains differ in length")
    env = np.ones((1, 1), dtype=np.complex128)
    for x, y in zip(a, b):
        if x.shape[1] != y.shape[1]:
            raise DimensionError(f"physical extents differ: {x.shape[1]} vs {y.shape[1]}")
        tmp = np.tensordot(env, y, axes=(1, 0))  # (la, d, rb)
        env = np.tensordot(x.conj(), tmp, axes=([0, 1], [0, 1]))  # (ra, rb)
    return complex(env[0, 0])


# ---------------------------------------------------------------------------
# qubit chain


class MpsState(TensorTrain):
    """Qubit-chain MPS; one site per qubit, physical extent 2."""

    def __init__(self, tensors: list[np.ndarray], chi_max: int, center: int | None = None):
        super().__init__(tensors, chi_max, center)
        if any(t.shape[1] != 2 for t in self.tensors):
            raise DimensionError("qubit MPS tensors need physical extent 2")
        self.last_spectrum: np.ndarray | None = None

    @property
    def n_qubits(self) -> int:
        return self.n_sites

    @classmethod
    def product_state(cls, n: int, x: str | Sequence[int] | None = None, chi_max: int = 64) -> MpsState:
        bits = parse_bits("0" * n if x is None else x, n)
        tensors = []
        for b in bits:
            t = np.zeros((1, 2, 1), dtype=np.complex128)
            t[0, b, 0] = 1.0
            tensors.append(t)
        return cls(tensors, chi_max, center=0)

    def to_dense(self) -> np.ndarray:
        return self.site_dense()

    def apply_1q(self, u: np.ndarray, site: int) -> MpsState:
        u = check_unitary(u, 2)
        if not 0 <= site < self.n_sites:
            raise IndexError(f"site {site} out of range")
        # a unitary on the physical leg keeps left/right orthonormality intact
        self.tensors[site] = np.einsum("ij,ljr->lir", u, self.tensors[site])
        return self

    def apply_2q(self, u: np.ndarray, site: int, depth: int = 0) -> float:
        """Apply ``u`` to qubits ``(site, site + 1)``; returns the logged fidelity."""
        u = check_unitary(u, 4)
        if not 0 <= site < self.n_sites - 1:
            raise IndexError(f"no bond ({site}, {site + 1}) in a chain of {self.n_sites}")
        if self.center not in (site, site + 1):
            self.move_center(site if self.center is None or self.center <= site else site + 1)
        a, b, f, spectrum = two_site_update(self.tensors[site], self.tensors[site + 1], u, self.chi_max)
        self.tensors[site], self.tensors[site + 1] = a, b
        self.center = site + 1
        self.last_spectrum = spectrum
        self.log.append((site, site + 1), f, depth)
        return f

    def run(
        self,
        circuit: Circuit,
        depth: int | None = None,
        on_gate: Callable[[FidelityEntry, np.ndarray], None] | None = None,
    ) -> FidelityLog:
        """Apply ``circuit`` in recorded order (optionally only its first ``depth`` layers)."""
        if circuit.n_qubits != self.n_qubits:
            raise DimensionError("circuit and state sizes differ")
        for d, g in circuit.iter_gates():
            if depth is not None and d > depth:
                break
            self.apply(g, d)
            if g.n_targets == 2 and on_gate is not None:
                on_gate(self.log.entries[-1], self.last_spectrum)
        return self.log

    def apply(self, gate: Gate, depth: int = 0) -> float:
        """Apply a one- or nearest-neighbour two-qubit gate; returns its fidelity (1 for one-qubit gates)."""
        if gate.n_targets == 1:
            self.apply_1q(gate.matrix, gate.targets[0])
            return 1.0
        a, b = gate.targets
        if b == a + 1:
            return self.apply_2q(gate.matrix, a, depth=depth)
        if a == b + 1:
            return self.apply_2q(swap_qubit_order(gate.matrix), b, depth=depth)
        raise ValidationError(f"{gate} is not a nearest-neighbour gate")

    def amplitude(self, x: str | Sequence[int]) -> complex:
        bits = parse_bits(x, self.n_qubits)
        v = np.ones(1, dtype=np.complex128)
        for t, b in zip(self.tensors, bits):
            v = v @ t[:, b, :]
        return complex(v[0])

    def sample_many(self, rng: np.random.Generator, shots: int) -> list[str]:
        """Draw ``shots`` bitstrings by sequential conditional sampling."""
        self.move_center(0)
        env = np.ones((shots, 1), dtype=np.complex128)
        out = np.zeros((shots, self.n_qubits), dtype=np.int8)
        rows = np.arange(shots)
        for k, t in enumerate(self.tensors):
            amp = np.tensordot(env, t, axes=(1, 0))  # (shots, 2, r)
            w = np.sum(np.abs(amp) ** 2, axis=2)
            p1 = w[:, 1] / (w[:, 0] + w[:, 1])
            pick = (rng.random(shots) < p1).astype(np.int8)
            out[:, k] = pick
            env = amp[rows, pick, :] / np.sqrt(w[rows, pick])[:, None]
        return ["".join("1" if b else "0" for b in row) for row in out]

    def sample(self, rng: np.random.Generator) -> str:
        return self.sample_many(rng, 1)[0]

    def overlap(self, other: MpsState) -> complex:
        """``<self|other>``."""
        return tt_overlap(self.tensors, other.tensors)

    def entropy(self, cut: int) -> float:
        """Entanglement entropy between qubits ``< cut`` and ``>= cut``."""
        if not 1 <= cut <= self.n_qubits - 1:
            raise IndexError(f"cut {cut} out of range 1..{self.n_qubits - 1}")
        return tc.entropy_from_spectrum(self.bond_spectrum(cut - 1))


def product_state(n: int, x: str | Sequence[int] | None = None, chi_max: int = 64) -> MpsState:
    return MpsState.product_state(n, x, chi_max)


def run_circuit(m: MpsState, circuit: Circuit, depth: int | None = None) -> tuple[MpsState, FidelityLog]:
    log = m.run(circuit, depth)
    return m, log


def random_mps(n: int, chi: int, rng: np.random.Generator) -> MpsState:
    """Normalized MPS with Gaussian tensors, bonds capped at ``min(chi, 2^min(k, n-k))``."""
    dims = [1] + [min(chi, 2 ** min(k, n - k)) for k in range(1, n)] + [1]
    tensors = [
        rng.standard_normal((dims[k], 2, dims[k + 1])) + 1j * rng.standard_normal((dims[k], 2, dims[k + 1]))
        for k in range(n)
    ]
    m = MpsState(tensors, chi)
    m.move_center(0)
    m.tensors[0] /= np.linalg.norm(m.tensors[0])
    return m
