"""MPS whose sites each carry a contiguous group of qubits.

Site ``n`` has shape ``(chi_left, 2^k_n, chi_right)``. The physical index is
row-major over the site's current slot order ``slots[n]`` (a permutation of
the group's qubits), so moving a qubit to a boundary slot is an exact
transpose. Gates inside a group are exact; gates between neighbouring
groups go through a QR extraction of the two involved qubits followed by the
truncated two-site update of the chain engine.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import tensor as tc
from .circuits import Circuit, Gate, Grid, swap_qubit_order
from .errors import DimensionError, ValidationError
from .mps import FidelityEntry, TensorTrain, check_unitary, tt_overlap, two_site_update
from .statevector import parse_bits

_SUPERSCRIPT = str.maketrans("⁰¹²³⁴⁵⁶⁷⁸⁹", "0123456789")


@dataclass(frozen=True)
class Grouping:
    """Partition of the ordered qubits ``0..N-1`` into contiguous groups."""

    groups: tuple[tuple[int, ...], ...]
    tag: str = ""

    def __post_init__(self):
        flat = [q for g in self.groups for q in g]
        if not self.groups or any(len(g) == 0 for g in self.groups):
            raise ValidationError("groups must be non-empty")
        if flat != list(range(len(flat))):
            raise ValidationError("groups must partition 0..N-1 into contiguous runs")

    @property
    def n_qubits(self) -> int:
        return sum(len(g) for g in self.groups)

    @property
    def sizes(self) -> list[int]:
        return [len(g) for g in self.groups]

    @property
    def cuts(self) -> set[int]:
        """Qubit positions where a new group starts (excluding 0)."""
        out, acc = set(), 0
        for g in self.groups[:-1]:
            acc += len(g)
            out.add(acc)
        return out

    def group_of(self, q: int) -> int:
        for n, g in enumerate(self.groups):
            if q in g:
                return n
        raise IndexError(q)

    @classmethod
    def singletons(cls, n: int) -> Grouping:
        return cls(tuple((q,) for q in range(n)), f"[1^{n}]")

    @classmethod
    def from_sizes(cls, sizes: Sequence[int], tag: str = "") -> Grouping:
        groups, start = [], 0
        for s in sizes:
            groups.append(tuple(range(start, start + s)))
            start += s
        return cls(tuple(groups), tag or "[" + ",".join(map(str, sizes)) + "]")

    @classmethod
    def from_columns(cls, grid: Grid, column_counts: Sequence[int], tag: str = "") -> Grouping:
        if sum(column_counts) != len(grid.heights):
            raise ValidationError(
                f"grouping covers {sum(column_counts)} columns, grid has {len(grid.heights)}"
            )
        sizes, c = [], 0
        for k in column_counts:
            sizes.append(sum(grid.heights[c : c + k]))
            c += k
        return cls.from_sizes(sizes, tag or "[" + ",".join(map(str, column_counts)) + "]")


def parse_grouping_tag(tag: str) -> list[int]:
    """``"[4,2,2,4]"``, ``"[1^12]"``, ``"[2⁶]"`` -> list of block sizes."""
    body = tag.strip().translate(_SUPERSCRIPT)
    if not (body.startswith("[") and body.endswith("]")):
        raise ValidationError(f"grouping tag must be bracketed, got {tag!r}")
    body = body[1:-1]
    out = []
    for part in body.split(","):
        part = part.strip()
        m = re.fullmatch(r"(\d+)(?:\^(\d+))?", part)
        if m is None:
            # "[1¹²]" becomes "[112]" after translation; only single-digit bases are ambiguous
            raise ValidationError(f"cannot parse grouping component {part!r} in {tag!r}")
        out.extend([int(m.group(1))] * int(m.group(2) or 1))
    return out


def parse_grouping(tag: str, grid: Grid | None = None, n_qubits: int | None = None) -> Grouping:
    """Column grouping on ``grid`` or, without a grid, block sizes in qubits."""
    raw = tag.strip()
    if "^" not in raw and any(ch in raw for ch in "⁰¹²³⁴⁵⁶⁷⁸⁹"):
        # unicode exponent form like [1¹²]: base is the first digit before the superscripts
        m = re.fullmatch(r"\[(\d)([⁰¹²³⁴⁵⁶⁷⁸⁹]+)\]", raw)
        if m:
            raw = f"[{m.group(1)}^{m.group(2).translate(_SUPERSCRIPT)}]"
    counts = parse_grouping_tag(raw)
    if grid is not None:
        return Grouping.from_columns(grid, counts, tag)
    g = Grouping.from_sizes(counts, tag)
    if n_qubits is not None and g.n_qubits != n_qubits:
        raise ValidationError(f"grouping {tag} covers {g.n_qubits} qubits, expected {n_qubits}")
    return g


class GroupedMpsState(TensorTrain):
    def __init__(self, tensors, slots: Sequence[Sequence[int]], chi_max: int, center: int | None = None):
        super().__init__(tensors, chi_max, center)
        self.slots = [list(s) for s in slots]
        for t, s in zip(self.tensors, self.slots):
            if t.shape[1] != 2 ** len(s):
                raise DimensionError(f"site with {len(s)} qubits has physical extent {t.shape[1]}")
        self.last_spectrum: np.ndarray | None = None
        self.depth = 0

    @classmethod
    def from_grouping(cls, x: str | Sequence[int] | None, grouping: Grouping, chi_max: int) -> GroupedMpsState:
        n = grouping.n_qubits
        bits = parse_bits("0" * n if x is None else x, n)
        tensors = []
        for g in grouping.groups:
            t = np.zeros((1, 2 ** len(g), 1), dtype=np.complex128)
            idx = 0
            for q in g:
                idx = 2 * idx + bits[q]
            t[0, idx, 0] = 1.0
            tensors.append(t)
        return cls(tensors, [list(g) for g in grouping.groups], chi_max, center=0)

    @property
    def n_qubits(self) -> int:
        return sum(len(s) for s in self.slots)

    @property
    def grouping(self) -> Grouping:
        return Grouping(tuple(tuple(sorted(s)) for s in self.slots))

    def group_of(self, q: int) -> int:
        for n, s in enumerate(self.slots):
            if q in s:
                return n
        raise IndexError(f"qubit {q} out of range")

    # -- dense conversion ---------------------------------------------------

    def to_dense(self) -> np.ndarray:
        psi = self.site_dense()
        order = [q for s in self.slots for q in s]
        if order == sorted(order):
            return psi
        n = self.n_qubits
        return np.ascontiguousarray(psi.reshape((2,) * n).transpose(np.argsort(order))).reshape(-1)

    def amplitude(self, x: str | Sequence[int]) -> complex:
        bits = parse_bits(x, self.n_qubits)
        v = np.ones(1, dtype=np.complex128)
        for t, s in zip(self.tensors, self.slots):
            idx = 0
            for q in s:
                idx = 2 * idx + bits[q]
            v = v @ t[:, idx, :]
        return complex(v[0])

    # -- slot permutations ----------------------------------------------------

    def permute_slots(self, site: int, order: Sequence[int]) -> None:
        """Reorder the qubits of ``site`` to ``order`` (an exact reindexing)."""
        cur = self.slots[site]
        if sorted(order) != sorted(cur):
            raise ValidationError(f"{order} is not a permutation of {cur}")
        if list(order) == cur:
            return
        t = self.tensors[site]
        k = len(cur)
        perm = [cur.index(q) for q in order]
        t = t.reshape((t.shape[0],) + (2,) * k + (t.shape[2],))
        t = t.transpose([0] + [p + 1 for p in perm] + [k + 1])
        self.tensors[site] = np.ascontiguousarray(t).reshape(t.shape[0], 2**k, t.shape[-1])
        self.slots[site] = list(order)

    def sort_slots(self) -> None:
        for n, s in enumerate(self.slots):
            self.permute_slots(n, sorted(s))

    # -- gates ------------------------------------------------------------------

    def apply_1q(self, u: np.ndarray, q: int) -> GroupedMpsState:
        u = check_unitary(u, 2)
        n = self.group_of(q)
        t = self.tensors[n]
        if len(self.slots[n]) == 1:
            self.tensors[n] = np.einsum("ij,ljr->lir", u, t)
            return self
        j = self.slots[n].index(q)
        k = len(self.slots[n])
        t = t.reshape(t.shape[0], 2**j, 2, 2 ** (k - j - 1), t.shape[2])
        t = np.einsum("ij,lajbr->laibr", u, t, optimize=True)
        self.tensors[n] = t.reshape(t.shape[0], 2**k, t.shape[-1])
        return self

    def apply_in_group(self, u: np.ndarray, qubits: Sequence[int], depth: int | None = None) -> GroupedMpsState:
        """Apply a one- or two-qubit gate whose qubits share a group; exact, logged with f = 1."""
        if len(qubits) == 1:
            return self.apply_1q(u, qubits[0])
        u = check_unitary(u, 4)
        a, b = qubits
        n = self.group_of(a)
        if self.group_of(b) != n:
            raise ValidationError(f"qubits {a}, {b} are not in the same group")
        slots = self.slots[n]
        k = len(slots)
        t = self.tensors[n]
        t = t.reshape((t.shape[0],) + (2,) * k + (t.shape[2],))
        ia, ib = slots.index(a) + 1, slots.index(b) + 1
        t = np.tensordot(u.reshape(2, 2, 2, 2), t, axes=([2, 3], [ia, ib]))
        t = np.moveaxis(t, [0, 1], [ia, ib])
        self.tensors[n] = np.ascontiguousarray(t).reshape(t.shape[0], 2**k, t.shape[-1])
        self.log.append((a, b), 1.0, self.depth if depth is None else depth, kind="exact")
        return self

    def apply_across_groups(self, u: np.ndarray, qa: int, qb: int, depth: int | None = None) -> float:
        """Gate on qubits in neighbouring groups; returns the truncation fidelity."""
        u = check_unitary(u, 4)
        n, m = self.group_of(qa), self.group_of(qb)
        if m == n - 1:
            qa, qb, n, m = qb, qa, m, n
            u = swap_qubit_order(u)
        if m != n + 1:
            raise ValidationError(f"qubits {qa}, {qb} are not in adjacent groups")
        if self.center not in (n, n + 1):
            self.move_center(n if self.center is None or self.center <= n else n + 1)

        left_order = [q for q in self.slots[n] if q != qa] + [qa]
        right_order = [qb] + [q for q in self.slots[n + 1] if q != qb]
        self.permute_slots(n, left_order)
        self.permute_slots(n + 1, right_order)
        kl, kr = len(left_order), len(right_order)

        a, b = self.tensors[n], self.tensors[n + 1]
        q_left = q_right = None
        if kl > 1:
            a4 = a.reshape(a.shape[0], 2 ** (kl - 1), 2, a.shape[2])
            q_left, a = tc.qr(a4, left=[0, 1])  # (l, 2^(kl-1), s), (s, 2, m)
        if kr > 1:
            b4 = b.reshape(b.shape[0], 2, 2 ** (kr - 1), b.shape[2])
            q, r = tc.qr(b4, left=[2, 3])  # (2^(kr-1), r, s'), (s', m, 2)
            q_right = q.transpose(2, 0, 1)
            b = r.transpose(1, 2, 0)

        x, y, f, spectrum = two_site_update(a, b, u, self.chi_max)

        if q_left is not None:
            x = tc.contract(q_left, x, [(2, 0)]).reshape(q_left.shape[0], 2**kl, -1)
        if q_right is not None:
            y = tc.contract(y, q_right, [(2, 0)]).reshape(y.shape[0], 2**kr, -1)
        self.tensors[n], self.tensors[n + 1] = x, y
        self.center = n + 1
        self.last_spectrum = spectrum
        self.log.append((qa, qb), f, self.depth if depth is None else depth)
        return f

    def apply(self, gate: Gate, depth: int | None = None) -> float:
        if gate.n_targets == 1:
            self.apply_1q(gate.matrix, gate.targets[0])
            return 1.0
        a, b = gate.targets
        if self.group_of(a) == self.group_of(b):
            self.apply_in_group(gate.matrix, (a, b), depth)
            return 1.0
        return self.apply_across_groups(gate.matrix, a, b, depth)

    def run(
        self,
        circuit: Circuit,
        depth: int | None = None,
        groupings: Sequence[Grouping] | None = None,
        on_gate: Callable[[FidelityEntry, np.ndarray | None], None] | None = None,
    ):
        """Apply ``circuit`` in recorded order.

        With ``groupings`` (split-and-merge), before each two-qubit layer the
        state switches to the grouping with the fewest cross-group gates for
        that layer, staying put on ties.
        """
        if circuit.n_qubits != self.n_qubits:
            raise DimensionError("circuit and state sizes differ")
        d = 0
        for layer in circuit.layers:
            two_q = [g for g in layer if g.n_targets == 2]
            if two_q:
                d += 1
                if depth is not None and d > depth:
                    break
                self.depth = d
                if groupings:
                    self.choose_grouping(two_q, groupings)
            for g in layer:
                self.apply(g, d)
                if g.n_targets == 2 and on_gate is not None:
                    on_gate(self.log.entries[-1], self.last_spectrum)
        return self.log

    def choose_grouping(self, gates: Sequence[Gate], groupings: Sequence[Grouping]) -> None:
        def cross(g: Grouping) -> int:
            return sum(g.group_of(x.targets[0]) != g.group_of(x.targets[1]) for x in gates)

        current = self.grouping
        best = min(groupings, key=cross)
        if cross(best) < cross(current):
            self.regroup(best)

    # -- split and merge ----------------------------------------------------------

    def _split(self, site: int, position: int) -> float:
        slots = sorted(self.slots[site])
        self.permute_slots(site, slots)
        j = position - slots[0]
        k = len(slots)
        self.move_center(site)
        t = self.tensors[site]
        t4 = t.reshape(t.shape[0], 2**j, 2 ** (k - j), t.shape[2])
        kept, f = tc.truncate(tc.svd(t4, left=[0, 1]), self.chi_max, drop_zeros=True)
        s = kept.s / np.linalg.norm(kept.s)
        self.tensors[site : site + 1] = [kept.u, s[:, None, None] * kept.v]
        self.slots[site : site + 1] = [slots[:j], slots[j:]]
        self.center = site + 1
        self.log.append((position - 1, position), f, self.depth, kind="split")
        return f

    def _merge(self, site: int) -> None:
        a, b = self.tensors[site], self.tensors[site + 1]
        t = tc.contract(a, b, [(2, 0)])
        self.tensors[site : site + 2] = [t.reshape(a.shape[0], a.shape[1] * b.shape[1], b.shape[2])]
        self.slots[site : site + 2] = [self.slots[site] + self.slots[site + 1]]
        if self.center is not None and self.center > site:
            self.center -= 1

    def regroup(self, target: Grouping) -> list[float]:
        """Move group boundaries to match ``target``; returns the fidelities of the splits."""
        if target.n_qubits != self.n_qubits:
            raise ValidationError("target grouping has a different qubit count")
        current = self.grouping
        new_cuts = sorted(target.cuts - current.cuts)
        old_cuts = sorted(current.cuts - target.cuts, reverse=True)
        fids = []
        for cut in new_cuts:
            fids.append(self._split(self.group_of(cut), cut))
        for cut in old_cuts:
            self._merge(self.group_of(cut) - 1)
        return fids

    # -- measurements ---------------------------------------------------------

    def overlap(self, other: GroupedMpsState) -> complex:
        """``<self|other>``; both states must share the grouping."""
        if self.grouping != other.grouping:
            raise ValidationError("overlap needs identical groupings")
        a, b = self.copy(), other.copy()
        a.sort_slots()
        b.sort_slots()
        return tt_overlap(a.tensors, b.tensors)

    def memory_bytes(self) -> int:
        return sum(t.nbytes for t in self.tensors)


def from_grouping(x, grouping: Grouping, chi: int) -> GroupedMpsState:
    return GroupedMpsState.from_grouping(x, grouping, chi)


def element_count_ok(state: GroupedMpsState) -> bool:
    """Each tensor holds ``chi_l * chi_r * 2^k`` elements."""
    return all(t.size == t.shape[0] * t.shape[2] * 2 ** len(s) for t, s in zip(state.tensors, state.slots))


