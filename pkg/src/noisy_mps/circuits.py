"""Gates and seeded random-circuit generators.

Qubit convention for multi-qubit matrices: for a gate on ``targets = (a, b)``
the row/column index is ``2 * i_a + i_b``, i.e. the first target is the most
significant bit.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .errors import ValidationError

UNITARY_TOL = 1e-12
CIRCUIT_SCHEMA = "noisy-mps-circuit v1"

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
W = (X + Y) / math.sqrt(2)


def unitarity_error(u: np.ndarray) -> float:
    u = np.asarray(u)
    return float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))))


@dataclass(frozen=True, eq=False)
class Gate:
    matrix: np.ndarray
    targets: tuple[int, ...]
    tag: str

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        k = len(self.targets)
        if k not in (1, 2) or m.shape != (2**k, 2**k):
            raise ValidationError(f"gate {self.tag}: matrix shape {m.shape} does not fit targets {self.targets}")
        if len(set(self.targets)) != k:
            raise ValidationError(f"gate {self.tag}: repeated target in {self.targets}")
        err = unitarity_error(m)
        if err > UNITARY_TOL:
            raise ValidationError(f"gate {self.tag} is not unitary (max deviation {err:.3g})")
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))

    @property
    def n_targets(self) -> int:
        return len(self.targets)

    def on(self, *targets: int) -> Gate:
        return Gate(self.matrix, tuple(targets), self.tag)

    def __eq__(self, other):
        if not isinstance(other, Gate):
            return NotImplemented
        return (
            self.tag == other.tag
            and self.targets == other.targets
            and np.array_equal(self.matrix, other.matrix)
        )

    def __repr__(self):
        return f"Gate({self.tag!r}, targets={self.targets})"


def swap_qubit_order(u: np.ndarray) -> np.ndarray:
    """Re-express a two-qubit matrix with its two targets exchanged."""
    return np.asarray(u).reshape(2, 2, 2, 2).transpose(1, 0, 3, 2).reshape(4, 4)


# ---------------------------------------------------------------------------
# one-qubit gates


def rotation(theta: float, alpha: float, phi: float) -> np.ndarray:
    """``exp(-i theta sigma.m)`` about ``m = (sin a cos p, sin a sin p, cos a)``."""
    m = (math.sin(alpha) * math.cos(phi), math.sin(alpha) * math.sin(phi), math.cos(alpha))
    sm = m[0] * X + m[1] * Y + m[2] * Z
    return math.cos(theta) * I2 - 1j * math.sin(theta) * sm


def random_1q(rng: np.random.Generator, target: int = 0) -> Gate:
    """Random rotation with theta, phi uniform on [0, 2pi) and alpha uniform on [0, pi].

    Not Haar distributed over U(2).
    """
    theta = rng.uniform(0.0, 2 * math.pi)
    alpha = rng.uniform(0.0, math.pi)
    phi = rng.uniform(0.0, 2 * math.pi)
    return Gate(rotation(theta, alpha, phi), (target,), "R")


def _sqrt_involution(p: np.ndarray) -> np.ndarray:
    # principal square root of a matrix with eigenvalues +-1
    return 0.5 * ((1 + 1j) * I2 + (1 - 1j) * p)


def iswap_theta(theta: float) -> np.ndarray:
    """iSWAP followed by a controlled phase ``exp(-i theta)`` on ``|11>``."""
    return np.array(
        [
            [1, 0, 0, 0],
            [0, 0, -1j, 0],
            [0, -1j, 0, 0],
            [0, 0, 0, np.exp(-1j * theta)],
        ],
        dtype=complex,
    )


ONE_QUBIT_GATES = {
    "I": I2,
    "X": X,
    "Y": Y,
    "Z": Z,
    "H": np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2),
    "SX": _sqrt_involution(X),
    "SY": _sqrt_involution(Y),
    "SW": _sqrt_involution(W),
}

TWO_QUBIT_GATES = {
    "I4": np.eye(4, dtype=complex),
    "CZ": np.diag([1, 1, 1, -1]).astype(complex),
    "CX": np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex),
    "SWAP": np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex),
    "iS": iswap_theta(0.0),
}

#: theta used for the iS_theta gate when no angle is given
DEFAULT_ISWAP_THETA = 1.0

_ALIASES = {"ISWAP": "iS", "iSWAP": "iS", "CNOT": "CX", "sqrtX": "SX", "sqrtY": "SY", "sqrtW": "SW"}


def gate_matrix(tag: str) -> np.ndarray:
    """Matrix for a named gate.

    ``iS_theta`` uses theta = 1; ``iS_theta:<angle>`` (or ``iS_<angle>``) picks the angle.
    """
    tag = _ALIASES.get(tag, tag)
    if tag in ONE_QUBIT_GATES:
        return ONE_QUBIT_GATES[tag].copy()
    if tag in TWO_QUBIT_GATES:
        return TWO_QUBIT_GATES[tag].copy()
    if tag.startswith("iS_"):
        arg = tag[3:]
        if arg.startswith("theta"):
            arg = arg[5:].lstrip(":")
        if arg in ("", None):
            return iswap_theta(DEFAULT_ISWAP_THETA)
        if arg.startswith("pi/"):
            return iswap_theta(math.pi / float(arg[3:]))
        try:
            return iswap_theta(float(arg))
        except ValueError:
            pass
    raise ValidationError(f"unknown gate tag {tag!r}")


def named_gate(tag: str, *targets: int) -> Gate:
    m = gate_matrix(tag)
    if not targets:
        targets = tuple(range(int(math.log2(m.shape[0]))))
    return Gate(m, tuple(targets), tag)


def _unit_traceless_hermitian(rng: np.random.Generator, dim: int) -> np.ndarray:
    a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    h = (a + a.conj().T) / 2
    h -= np.trace(h) / dim * np.eye(dim)
    return h / np.linalg.norm(h)


def haar_average_fidelity(v: np.ndarray) -> float:
    """``E_psi |<psi|v|psi>|^2`` over Haar-random pure states, in closed form."""
    d = v.shape[0]
    return float((d + abs(np.trace(v)) ** 2) / (d * (d + 1)))


def noisy_gate(gate: Gate, f_target: float, rng: np.random.Generator) -> Gate:
    """Perturb ``gate`` to ``U exp(-i delta H)`` with Haar-averaged fidelity ``f_target``.

    ``H`` is a random traceless Hermitian of unit Frobenius norm drawn from
    ``rng``; ``delta`` is found by bisection on the closed-form state average.
    """
    if not 0.0 < f_target <= 1.0:
        raise ValidationError(f"f_target must lie in (0, 1], got {f_target}")
    if f_target == 1.0:
        return gate
    dim = gate.matrix.shape[0]
    h = _unit_traceless_hermitian(rng, dim)
    evals, evecs = np.linalg.eigh(h)

    def fid(delta: float) -> float:
        return float((dim + abs(np.sum(np.exp(-1j * delta * evals))) ** 2) / (dim * (dim + 1)))

    # bracket on the first descending branch of fid(delta)
    lo, hi, step = 0.0, 0.0, 0.05
    while fid(hi) > f_target:
        lo, hi = hi, hi + step
        if hi > 50.0 or fid(hi) > fid(lo) + 1e-15:
            raise ValidationError(f"f_target {f_target} is below the reachable range for this perturbation")
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if fid(mid) > f_target:
            lo = mid
        else:
            hi = mid
    delta = 0.5 * (lo + hi)
    perturb = (evecs * np.exp(-1j * delta * evals)) @ evecs.conj().T
    m = gate.matrix @ perturb
    # polish unitarity to working precision before the gatekeeper check
    u, _, vh = np.linalg.svd(m)
    return Gate(u @ vh, gate.targets, f"{gate.tag}~{f_target:g}")


# ---------------------------------------------------------------------------
# circuits


@dataclass(eq=False)
class Circuit:
    """Recorded gate sequence.

    ``layers`` alternate one-qubit layers and two-qubit layers; within a layer
    the targets are pairwise disjoint. ``depth`` counts the two-qubit layers.
    """

    n_qubits: int
    layers: list[list[Gate]] = field(default_factory=list)
    seed: int | None = None
    generator: str = "manual"
    meta: dict = field(default_factory=dict)

    @property
    def depth(self) -> int:
        return sum(1 for layer in self.layers if any(g.n_targets == 2 for g in layer))

    @property
    def n_two_qubit_gates(self) -> int:
        return sum(g.n_targets == 2 for layer in self.layers for g in layer)

    def append_layer(self, gates: Sequence[Gate]) -> None:
        used: set[int] = set()
        for g in gates:
            if any(t >= self.n_qubits or t < 0 for t in g.targets):
                raise ValidationError(f"{g} targets outside 0..{self.n_qubits - 1}")
            if used.intersection(g.targets):
                raise ValidationError(f"{g} overlaps another gate in the same layer")
            used.update(g.targets)
        self.layers.append(list(gates))

    def iter_gates(self) -> Iterator[tuple[int, Gate]]:
        """Yield ``(depth, gate)``; depth is the 1-based two-qubit layer count reached so far."""
        depth = 0
        for layer in self.layers:
            if any(g.n_targets == 2 for g in layer):
                depth += 1
            for g in layer:
                yield depth, g

    def truncated(self, depth: int) -> Circuit:
        """Prefix containing the first ``depth`` two-qubit layers and the one-qubit layers before them."""
        out = Circuit(self.n_qubits, seed=self.seed, generator=self.generator, meta=dict(self.meta))
        d = 0
        for layer in self.layers:
            if any(g.n_targets == 2 for g in layer):
                if d == depth:
                    break
                d += 1
            out.layers.append(list(layer))
        return out

    def two_qubit_layers(self) -> list[int]:
        return [i for i, layer in enumerate(self.layers) if any(g.n_targets == 2 for g in layer)]

    def __eq__(self, other):
        if not isinstance(other, Circuit):
            return NotImplemented
        return (
            self.n_qubits == other.n_qubits
            and self.seed == other.seed
            and self.generator == other.generator
            and self.meta == other.meta
            and self.layers == other.layers
        )

    # -- serialization -----------------------------------------------------

    def dumps(self) -> str:
        lines = [
            f"# {CIRCUIT_SCHEMA}",
            f"n_qubits {self.n_qubits}",
            f"seed {'none' if self.seed is None else self.seed}",
            f"generator {self.generator}",
            f"meta {json.dumps(self.meta, sort_keys=True)}",
        ]
        for i, layer in enumerate(self.layers):
            if not layer:
                lines.append(f"{i} EMPTY")
            for g in layer:
                comps = np.column_stack([g.matrix.real.ravel(), g.matrix.imag.ravel()]).ravel()
                lines.append(
                    f"{i} {g.tag} {','.join(map(str, g.targets))} " + " ".join(repr(float(c)) for c in comps)
                )
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> Circuit:
        lines = text.splitlines()
        if not lines or lines[0].strip() != f"# {CIRCUIT_SCHEMA}":
            raise ValidationError(f"unsupported circuit schema header: {lines[0] if lines else ''!r}")
        header = {}
        for ln in lines[1:5]:
            key, _, value = ln.partition(" ")
            header[key] = value
        circ = cls(
            int(header["n_qubits"]),
            seed=None if header["seed"] == "none" else int(header["seed"]),
            generator=header["generator"],
            meta=json.loads(header["meta"]),
        )
        for ln in lines[5:]:
            if not ln.strip():
                continue
            parts = ln.split()
            idx = int(parts[0])
            while len(circ.layers) <= idx:
                circ.layers.append([])
            if parts[1] == "EMPTY":
                continue
            targets = tuple(int(t) for t in parts[2].split(","))
            comps = np.array([float(c) for c in parts[3:]])
            dim = 2 ** len(targets)
            if comps.size != 2 * dim * dim:
                raise ValidationError(f"gate record has {comps.size} components, expected {2 * dim * dim}")
            m = (comps[0::2] + 1j * comps[1::2]).reshape(dim, dim)
            circ.layers[idx].append(Gate(m, targets, parts[1]))
        return circ

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.dumps())

    @classmethod
    def load(cls, path) -> Circuit:
        with open(path) as fh:
            return cls.loads(fh.read())


def brick_1d(n: int, depth: int, seed: int, two_q: str = "CZ") -> Circuit:
    """Alternating one-qubit / two-qubit brick circuit on a chain.

    Before every two-qubit layer each qubit receives a fresh random rotation.
    Two-qubit layer ``k`` acts on bonds ``(i, i+1)`` with ``i = k mod 2`` (mod 2).
    A chain of two qubits has no odd bonds, so every layer reuses bond (0, 1).
    """
    if n < 2:
        raise ValidationError("brick circuit needs at least two qubits")
    rng = np.random.default_rng(seed)
    u2 = gate_matrix(two_q)
    circ = Circuit(n, seed=seed, generator="brick_1d", meta={"two_q": two_q})
    for k in range(depth):
        circ.append_layer([random_1q(rng, q) for q in range(n)])
        start = k % 2 if n > 2 else 0
        circ.append_layer([Gate(u2, (i, i + 1), two_q) for i in range(start, n - 1, 2)])
    return circ


# ---------------------------------------------------------------------------
# 2D grid


SYCAMORE_COLUMNS = (5, 4) * 6
COLOR_ORDER = ("A", "B", "C", "D", "C", "D", "A", "B")
XYW = ("SX", "SY", "SW")


@dataclass(frozen=True)
class Grid:
    """Diagonal lattice of qubit columns.

    Column ``c`` holds ``heights[c]`` qubits at vertical positions
    ``y = 2 r + (c mod 2)``; neighbours are the qubits of adjacent columns at
    ``|dy| = 1``. Qubits are numbered column-major: down each column, columns
    left to right.
    """

    heights: tuple[int, ...]

    @property
    def n_qubits(self) -> int:
        return sum(self.heights)

    def column_start(self, c: int) -> int:
        return sum(self.heights[:c])

    def qubit(self, c: int, r: int) -> int:
        return self.column_start(c) + r

    def column_of(self, q: int) -> int:
        acc = 0
        for c, h in enumerate(self.heights):
            acc += h
            if q < acc:
                return c
        raise IndexError(q)

    def edges(self) -> dict[str, list[tuple[int, int]]]:
        """Edges partitioned into four matchings.

        A: up-going from even columns, B: up-going from odd columns,
        C: down-going from even columns, D: down-going from odd columns.
        """
        classes: dict[str, list[tuple[int, int]]] = {k: [] for k in "ABCD"}
        for c in range(len(self.heights) - 1):
            for r in range(self.heights[c]):
                y = 2 * r + (c % 2)
                for dy, (even_cls, odd_cls) in ((1, ("A", "B")), (-1, ("C", "D"))):
                    y2 = y + dy
                    if (y2 - ((c + 1) % 2)) % 2:
                        continue
                    r2 = (y2 - ((c + 1) % 2)) // 2
                    if 0 <= r2 < self.heights[c + 1]:
                        cls = even_cls if c % 2 == 0 else odd_cls
                        classes[cls].append((self.qubit(c, r), self.qubit(c + 1, r2)))
        return classes


def parse_grid(layout: str | Sequence[int] | None) -> Grid:
    """``None``/"sycamore54" -> 12 columns of 5,4,...; ``"RxC"`` -> C columns of R; or a list of heights."""
    if layout is None or layout == "sycamore54":
        return Grid(SYCAMORE_COLUMNS)
    if isinstance(layout, str):
        if "x" in layout:
            rows, cols = layout.split("x")
            return Grid((int(rows),) * int(cols))
        return Grid(tuple(int(h) for h in layout.strip("[]").split(",")))
    return Grid(tuple(int(h) for h in layout))


def grid_2d(
    grid: Grid | str | Sequence[int] | None,
    depth: int,
    seed: int,
    gate_set: str = "CZ",
    color_order: Sequence[str] = COLOR_ORDER,
) -> Circuit:
    """Cycles of (one-qubit layer, two-qubit layer on one color class).

    ``gate_set`` is the two-qubit gate tag. With ``gate_set`` starting with
    ``iS`` the one-qubit gates are drawn from {SX, SY, SW}; otherwise random
    rotations are used.
    """
    if not isinstance(grid, Grid):
        grid = parse_grid(grid)
    if depth < 0:
        raise ValidationError("depth must be >= 0")
    rng = np.random.default_rng(seed)
    u2 = gate_matrix(gate_set)
    xyw = gate_set.startswith("iS")
    classes = grid.edges()
    circ = Circuit(
        grid.n_qubits,
        seed=seed,
        generator="grid_2d",
        meta={"heights": list(grid.heights), "two_q": gate_set, "color_order": list(color_order)},
    )
    for k in range(depth):
        if xyw:
            picks = rng.integers(3, size=grid.n_qubits)
            circ.append_layer(
                [Gate(ONE_QUBIT_GATES[XYW[i]], (q,), XYW[i]) for q, i in enumerate(picks)]
            )
        else:
            circ.append_layer([random_1q(rng, q) for q in range(grid.n_qubits)])
        color = color_order[k % len(color_order)]
        circ.append_layer([Gate(u2, e, gate_set) for e in classes[color]])
    return circ


def with_noisy_gates(circuit: Circuit, f_target: float, seed: int) -> Circuit:
    """Copy of ``circuit`` with every two-qubit gate replaced by a noisy version."""
    rng = np.random.default_rng(seed)
    out = Circuit(
        circuit.n_qubits,
        seed=circuit.seed,
        generator=circuit.generator + "+noise",
        meta={**circuit.meta, "f_target": f_target, "noise_seed": seed},
    )
    for layer in circuit.layers:
        out.layers.append([noisy_gate(g, f_target, rng) if g.n_targets == 2 else g for g in layer])
    return out
