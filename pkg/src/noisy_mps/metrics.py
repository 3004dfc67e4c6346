"""Fidelity and benchmarking metrics.

A *distribution source* is anything holding a state: a :class:`StateVector`,
an :class:`MpsState` or a :class:`GroupedMpsState`. Exact sums run over all
``2^N`` outcomes; above :data:`EXACT_SUM_MAX_QUBITS` (or whenever ``shots``
is given) the estimators sample bitstrings from the first argument instead.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field, fields
from typing import IO, Iterable, NamedTuple, Sequence

import numpy as np

from .errors import DimensionError, ValidationError
from .mps import FidelityLog
from .statevector import StateVector, bits_to_index, index_to_bits, parse_bits

EXACT_SUM_MAX_QUBITS = 20
DEFAULT_SHOTS = 10_000
TABLE_VERSION = "v1"


class Estimate(NamedTuple):
    value: float
    stderr: float = 0.0
    shots: int | None = None
    offending: str | None = None  # bitstring with p_P(x) = 0 that made the cross entropy infinite


def _n_qubits(src) -> int:
    return src.n_qubits


def probabilities(src) -> np.ndarray:
    if isinstance(src, StateVector):
        return src.probabilities()
    return np.abs(src.to_dense()) ** 2


def _prob_of(src, x: str) -> float:
    if isinstance(src, StateVector):
        return float(abs(src.amplitudes[bits_to_index(parse_bits(x))]) ** 2)
    return abs(src.amplitude(x)) ** 2


def _draw(src, shots: int, rng: np.random.Generator) -> list[str]:
    if isinstance(src, StateVector):
        p = src.probabilities()
        idx = rng.choice(p.size, size=shots, p=p / p.sum())
        return [index_to_bits(int(i), src.n_qubits) for i in idx]
    return src.sample_many(rng, shots)


def _use_sampling(t, shots: int | None) -> bool:
    return shots is not None or _n_qubits(t) > EXACT_SUM_MAX_QUBITS


# ---------------------------------------------------------------------------
# fidelities


def estimated_fidelity(log: FidelityLog) -> float:
    """Product of the logged per-gate fidelities."""
    return log.product()


def average_gate_fidelity(log: FidelityLog) -> float:
    return log.f_av()


def exact_fidelity(state, oracle: StateVector) -> float:
    """``|<oracle|state>|^2``."""
    if state.n_qubits != oracle.n_qubits:
        raise DimensionError("state and oracle sizes differ")
    vec = state.amplitudes if isinstance(state, StateVector) else state.to_dense()
    return float(abs(np.vdot(oracle.amplitudes, vec)) ** 2)


def fidelity_lower_bound(fidelities: Iterable[float]) -> float:
    """``1 - 2 sum_i sqrt(1 - f_i)``; a rigorous lower bound on the exact fidelity."""
    eps = np.clip(1.0 - np.asarray(list(fidelities), dtype=float), 0.0, None)
    return float(1.0 - 2.0 * np.sum(np.sqrt(eps)))


def lower_bound_series(fidelities: Sequence[float]) -> np.ndarray:
    eps = np.clip(1.0 - np.asarray(fidelities, dtype=float), 0.0, None)
    return 1.0 - 2.0 * np.cumsum(np.sqrt(eps))


# ---------------------------------------------------------------------------
# sampled metrics


def cross_entropy(t, p, shots: int | None = None, rng: np.random.Generator | None = None) -> Estimate:
    """``C = -sum_x p_T(x) log p_P(x)`` with ``t`` the truncated/noisy source and ``p`` the reference."""
    if _n_qubits(t) != _n_qubits(p):
        raise DimensionError("sources differ in qubit count")
    if _use_sampling(t, shots):
        shots = shots or DEFAULT_SHOTS
        rng = rng if rng is not None else np.random.default_rng()
        xs = _draw(t, shots, rng)
        pp = np.array([_prob_of(p, x) for x in xs])
        if np.any(pp == 0):
            return Estimate(math.inf, math.inf, shots, xs[int(np.argmin(pp))])
        vals = -np.log(pp)
        return Estimate(float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(shots)), shots)
    pt, pp = probabilities(t), probabilities(p)
    bad = (pp == 0) & (pt > 0)
    if np.any(bad):
        return Estimate(math.inf, 0.0, None, index_to_bits(int(np.argmax(bad)), _n_qubits(t)))
    mask = pt > 0
    return Estimate(float(-np.sum(pt[mask] * np.log(pp[mask]))))


def xeb(t, p, shots: int | None = None, rng: np.random.Generator | None = None) -> Estimate:
    """Linear cross-entropy benchmark ``B = -1 + 2^N sum_x p_T(x) p_P(x)``."""
    n = _n_qubits(t)
    if n != _n_qubits(p):
        raise DimensionError("sources differ in qubit count")
    if _use_sampling(t, shots):
        shots = shots or DEFAULT_SHOTS
        rng = rng if rng is not None else np.random.default_rng()
        vals = np.array([_prob_of(p, x) for x in _draw(t, shots, rng)]) * 2.0**n
        return Estimate(float(vals.mean() - 1.0), float(vals.std(ddof=1) / math.sqrt(shots)), shots)
    return Estimate(float(-1.0 + 2.0**n * np.dot(probabilities(t), probabilities(p))))


def find_d_star(depths: Sequence[int], b_values: Sequence[float], tol: float = 0.05) -> int:
    """First depth at which ``B <= 1 + tol``."""
    for d, b in zip(depths, b_values):
        if b <= 1.0 + tol:
            return int(d)
    raise ValidationError(f"XEB never drops below {1 + tol}")


def fidelity_from_xeb(b_values: Sequence[float], f_at_d_star: float) -> np.ndarray:
    """``F_n ~ F(D*) B_n``."""
    return float(f_at_d_star) * np.asarray(b_values, dtype=float)


def fit_decay_rate(x: Sequence[float], y: Sequence[float]) -> float:
    """Least-squares rate ``r`` of ``y ~ A exp(-r x)``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0):
        raise ValidationError("decay fit needs positive values")
    slope, _ = np.polyfit(x, np.log(y), 1)
    return float(-slope)


# ---------------------------------------------------------------------------
# Porter-Thomas


def porter_thomas_cdf(rho, n_qubits: int):
    """``P(p_x < rho) = 1 - (1 - rho)^(2^N - 1)``."""
    rho = np.clip(np.asarray(rho, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore"):  # rho = 1 gives log(0) = -inf and a CDF of exactly 1
        return -np.expm1((2.0**n_qubits - 1) * np.log1p(-rho))


def porter_thomas_distance(values, n_qubits: int) -> float:
    """Kolmogorov-Smirnov distance between the empirical CDF of ``values`` and Porter-Thomas.

    ``values`` are outcome probabilities ``p_x`` (all of them, or those of
    sampled bitstrings).
    """
    p = np.sort(np.asarray(values, dtype=float).ravel())
    if p.size == 0:
        raise ValidationError("no values given")
    cdf = porter_thomas_cdf(p, n_qubits)
    k = np.arange(1, p.size + 1)
    return float(max(np.max(k / p.size - cdf), np.max(cdf - (k - 1) / p.size)))


# ---------------------------------------------------------------------------
# reports and tables


@dataclass
class MetricsRow:
    depth: int
    n_gates: int
    F_est: float
    f_av: float
    f_window: float
    F_exact: float = math.nan
    B: float = math.nan
    C: float = math.nan
    bound: float = math.nan


@dataclass
class MetricsReport:
    rows: list[MetricsRow] = field(default_factory=list)

    COLUMNS = tuple(f.name for f in fields(MetricsRow))

    @classmethod
    def from_log(cls, log: FidelityLog) -> MetricsReport:
        """Per-depth estimated fidelity, running f_av, windowed f and lower bound."""
        rep = cls()
        gates = [e for e in log.entries]
        for d in log.depths():
            upto = [e for e in gates if e.depth <= d]
            n = sum(e.kind != "split" for e in upto)
            logf = sum(math.log(e.f) for e in upto)
            rep.rows.append(
                MetricsRow(
                    depth=d,
                    n_gates=n,
                    F_est=math.exp(logf),
                    f_av=math.exp(logf / n) if n else 1.0,
                    f_window=log.windowed(d),
                    bound=fidelity_lower_bound(e.f for e in upto),
                )
            )
        return rep

    def row(self, depth: int) -> MetricsRow:
        for r in self.rows:
            if r.depth == depth:
                return r
        raise KeyError(depth)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows], dtype=float)

    def dumps(self) -> str:
        buf = io.StringIO()
        write_table(buf, "metrics", self.COLUMNS, ([getattr(r, c) for c in self.COLUMNS] for r in self.rows))
        return buf.getvalue()

    @classmethod
    def loads(cls, text: str) -> MetricsReport:
        cols, rows = read_table(io.StringIO(text), "metrics")
        if tuple(cols) != cls.COLUMNS:
            raise ValidationError(f"unexpected metrics columns {cols}")
        rep = cls()
        for r in rows:
            vals = dict(zip(cols, r))
            vals["depth"] = int(vals["depth"])
            vals["n_gates"] = int(vals["n_gates"])
            rep.rows.append(MetricsRow(**vals))
        return rep


LOG_COLUMNS = ("depth", "gate_ordinal", "site", "f_n", "cum_F", "f_av", "B", "C", "bound", "kind")


def log_table_rows(log: FidelityLog, extra: dict[int, dict[str, float]] | None = None):
    """Rows of the per-gate table; ``extra`` maps a depth to B/C values shown on its last gate."""
    extra = extra or {}
    logf, n, sqrt_eps = 0.0, 0, 0.0
    entries = log.entries
    for i, e in enumerate(entries):
        logf += math.log(e.f)
        n += e.kind != "split"
        sqrt_eps += math.sqrt(max(0.0, 1.0 - e.f))
        last_of_depth = i + 1 == len(entries) or entries[i + 1].depth != e.depth
        b = extra.get(e.depth, {}).get("B", math.nan) if last_of_depth else math.nan
        c = extra.get(e.depth, {}).get("C", math.nan) if last_of_depth else math.nan
        yield [
            e.depth,
            e.ordinal,
            "-".join(map(str, e.qubits)),
            e.f,
            math.exp(logf),
            math.exp(logf / n) if n else 1.0,
            b,
            c,
            1.0 - 2.0 * sqrt_eps,
            e.kind,
        ]


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_table(stream: IO[str], kind: str, columns: Sequence[str], rows: Iterable[Sequence]) -> None:
    """Tab-separated table preceded by ``# noisy-mps <kind> v1`` and a column line."""
    stream.write(f"# noisy-mps {kind} {TABLE_VERSION}\n")
    stream.write("\t".join(columns) + "\n")
    for r in rows:
        stream.write("\t".join(_fmt(v) for v in r) + "\n")


def read_table(stream: IO[str], kind: str) -> tuple[list[str], list[list]]:
    header = stream.readline().strip()
    parts = header.split()
    if len(parts) != 4 or parts[:2] != ["#", "noisy-mps"] or parts[2] != kind:
        raise ValidationError(f"not a noisy-mps {kind} table: {header!r}")
    if parts[3] != TABLE_VERSION:
        raise ValidationError(f"unsupported table version {parts[3]!r}")
    cols = stream.readline().rstrip("\n").split("\t")
    rows = []
    for line in stream:
        if not line.strip():
            continue
        rows.append([_parse(v) for v in line.rstrip("\n").split("\t")])
    return cols, rows


def _parse(v: str):
    try:
        return int(v)
    except ValueError:
        pass
    try:
        return float(v)
    except ValueError:
        return v
