"""Gaussian tensor ensemble (GTE) experiments.

Two neighbouring MPS tensors are replaced by tensors with independent complex
Gaussian entries (real and imaginary parts standard normal), the maximally
scrambled worst case. A two-qubit gate is applied to their contraction and
the fraction of weight kept when truncating the ``2 beta chi`` singular
values back to ``chi`` is the GTE fidelity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .circuits import Circuit, gate_matrix
from .errors import ValidationError
from .mps import FidelityEntry, MpsState


@dataclass(frozen=True)
class GteSample:
    chi: int
    beta: int
    gate: str
    singular_values: np.ndarray  # 2 beta chi values, descending, sum of squares 1
    f: float


def sample_gte_tensor(chi: int, beta: int, rng: np.random.Generator) -> np.ndarray:
    """Tensor of shape ``(beta chi, 2, chi)`` with standard complex Gaussian entries."""
    if chi < 1 or beta not in (1, 2):
        raise ValidationError(f"need chi >= 1 and beta in (1, 2), got chi={chi}, beta={beta}")
    shape = (beta * chi, 2, chi)
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def kept_fraction(s: np.ndarray, chi: int) -> float:
    w = np.asarray(s) ** 2
    return float(np.sum(w[:chi]) / np.sum(w))


def gte_trial(gate: str, chi: int, beta: int, rng: np.random.Generator) -> GteSample:
    """One GTE draw: contract, normalize, apply ``gate``, return the spectrum and kept fraction."""
    u = gate_matrix(gate).reshape(2, 2, 2, 2)
    a = sample_gte_tensor(chi, beta, rng)  # (beta chi, 2, chi)
    b = sample_gte_tensor(chi, beta, rng).transpose(2, 1, 0)  # (chi, 2, beta chi)
    t = np.tensordot(a, b, axes=(2, 0))  # (beta chi, i, j, beta chi)
    t /= np.linalg.norm(t)
    t = np.einsum("klij,aijc->aklc", u, t, optimize=True)
    m = t.reshape(2 * beta * chi, 2 * beta * chi)
    s = np.linalg.svd(m, compute_uv=False)
    return GteSample(chi, beta, gate, s, kept_fraction(s, chi))


def gte_samples(gate: str, chi: int, beta: int, trials: int, rng: np.random.Generator) -> list[GteSample]:
    """``trials`` independent draws, each with its own RNG substream."""
    if trials < 1:
        raise ValidationError("need at least one trial")
    return [gte_trial(gate, chi, beta, r) for r in rng.spawn(trials)]


def estimate_f_gte(gate: str, chi: int, beta: int, trials: int, rng: np.random.Generator) -> tuple[float, float]:
    """Mean kept fraction and its standard error over ``trials`` draws."""
    f = np.array([s.f for s in gte_samples(gate, chi, beta, trials, rng)])
    stderr = float(f.std(ddof=1) / math.sqrt(f.size)) if f.size > 1 else math.nan
    return float(f.mean()), stderr


def mean_scaled_spectrum(samples: Sequence[GteSample]) -> tuple[np.ndarray, np.ndarray]:
    """``(x_mu, chi * <S_mu^2>)`` averaged over samples of one chi.

    ``x_mu = (mu - 1/2) / chi`` places the mu-th value at the centre of its
    bin of width ``1 / chi``, which removes the O(1/chi) offset between
    curves of different chi near the top of the spectrum.
    """
    chi = samples[0].chi
    s2 = np.mean([s.singular_values**2 for s in samples], axis=0)
    return bin_centres(s2.size, chi), chi * s2


def bin_centres(n: int, chi: int) -> np.ndarray:
    return (np.arange(1, n + 1) - 0.5) / chi


@dataclass
class CollapseReport:
    gate: str
    curves: dict[int, tuple[np.ndarray, np.ndarray]]
    grid: np.ndarray
    interpolated: dict[int, np.ndarray]
    peak: float
    max_deviation: float  # largest pairwise gap between chi curves, over the grid

    @property
    def relative_deviation(self) -> float:
        return self.max_deviation / self.peak


def _common_grid(curves: dict[int, tuple[np.ndarray, np.ndarray]], points: int) -> np.ndarray:
    lo = max(x[0] for x, _ in curves.values())
    hi = min(x[-1] for x, _ in curves.values())
    return np.linspace(lo, hi, points)


def scaling_collapse(
    gate: str,
    chis: Sequence[int],
    trials: int,
    rng: np.random.Generator,
    beta: int = 1,
    points: int = 400,
) -> CollapseReport:
    """Mean ``chi S_mu^2`` against ``mu / chi`` for each chi, compared on a shared grid."""
    curves = {chi: mean_scaled_spectrum(gte_samples(gate, chi, beta, trials, rng)) for chi in chis}
    grid = _common_grid(curves, points)
    interp = {chi: np.interp(grid, x, y) for chi, (x, y) in curves.items()}
    stack = np.array(list(interp.values()))
    peak = float(stack.max())
    dev = float(np.max(stack.max(axis=0) - stack.min(axis=0)))
    return CollapseReport(gate, curves, grid, interp, peak, dev)


def bundle_distance(a: CollapseReport, b: CollapseReport) -> float:
    """Largest gap between the mean curves of two reports, relative to the larger peak."""
    lo = max(a.grid[0], b.grid[0])
    hi = min(a.grid[-1], b.grid[-1])
    grid = np.linspace(lo, hi, a.grid.size)
    ya = np.mean([np.interp(grid, a.grid, y) for y in a.interpolated.values()], axis=0)
    yb = np.mean([np.interp(grid, b.grid, y) for y in b.interpolated.values()], axis=0)
    return float(np.max(np.abs(ya - yb)) / max(a.peak, b.peak))


# ---------------------------------------------------------------------------
# comparison with a chain simulation


@dataclass
class MpsComparison:
    gate: str
    chi: int
    site: int
    spectra: list[np.ndarray]  # normalized post-gate spectra at the watched bond
    f_mps: float  # geometric mean of the watched gate fidelities
    f_gte: float
    f_gte_stderr: float
    gte_curve: tuple[np.ndarray, np.ndarray]

    @property
    def mps_curve(self) -> tuple[np.ndarray, np.ndarray]:
        n = max(s.size for s in self.spectra)
        padded = np.array([np.pad(s**2, (0, n - s.size)) for s in self.spectra])
        return bin_centres(n, self.chi), self.chi * padded.mean(axis=0)

    @property
    def bound_holds(self) -> bool:
        """``f_mps >= f_gte`` up to one standard error."""
        return self.f_mps >= self.f_gte - self.f_gte_stderr


def capture_spectra(
    circuit: Circuit, chi: int, site: int, min_depth: int
) -> tuple[MpsState, list[FidelityEntry], list[np.ndarray]]:
    """Run ``circuit`` on a chain and keep the spectra of gates on ``(site, site + 1)`` past ``min_depth``."""
    entries: list[FidelityEntry] = []
    spectra: list[np.ndarray] = []

    def watch(entry: FidelityEntry, spectrum: np.ndarray) -> None:
        if entry.qubits == (site, site + 1) and entry.depth > min_depth:
            entries.append(entry)
            spectra.append(spectrum / np.linalg.norm(spectrum))

    m = MpsState.product_state(circuit.n_qubits, chi_max=chi)
    m.run(circuit, on_gate=watch)
    return m, entries, spectra


def compare_to_mps(
    circuit: Circuit,
    chi: int,
    site: int,
    min_depth: int,
    trials: int,
    rng: np.random.Generator,
    gate: str | None = None,
) -> MpsComparison:
    """Overlay stationary chain spectra at one bond with the GTE prediction for the same gate and chi."""
    gate = gate or circuit.meta.get("two_q", "CZ")
    _, entries, spectra = capture_spectra(circuit, chi, site, min_depth)
    if not entries:
        raise ValidationError(f"no gates on bond ({site}, {site + 1}) beyond depth {min_depth}")
    f_mps = math.exp(np.mean([math.log(e.f) for e in entries]))
    samples = gte_samples(gate, chi, 1, trials, rng)
    f = np.array([s.f for s in samples])
    return MpsComparison(
        gate=gate,
        chi=chi,
        site=site,
        spectra=spectra,
        f_mps=f_mps,
        f_gte=float(f.mean()),
        f_gte_stderr=float(f.std(ddof=1) / math.sqrt(f.size)) if f.size > 1 else 0.0,
        gte_curve=mean_scaled_spectrum(samples),
    )
