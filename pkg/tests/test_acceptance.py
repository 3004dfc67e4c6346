"""Acceptance suite: one recorded verdict per criterion, printed at the end of the run.

Tolerances are the stated ones. Two checks are known not to hold at the
stated settings and are marked ``xfail(strict=True)``: they still assert the
stated tolerance, and the printed verdict for their criterion is FAIL.
"""

from __future__ import annotations

import io
import math
import os
import time

import numpy as np
import pytest

from noisy_mps import harness as hn
from noisy_mps import metrics as mt
from noisy_mps.circuits import Grid, brick_1d, grid_2d
from noisy_mps.gte import bundle_distance, estimate_f_gte, scaling_collapse
from noisy_mps.grouped import GroupedMpsState, Grouping, element_count_ok, parse_grouping
from noisy_mps.mps import MpsState
from noisy_mps.statevector import StateVector, simulate

TITLES = {
    1: "exactness gate: N=12, D=24, chi=64",
    2: "fidelity multiplicativity |F_exact - prod f_n| <= 0.02",
    3: "exact lower bound F_exact >= 1 - 2 sum sqrt(eps)",
    4: "Porter-Thomas KS distance",
    5: "GTE values at chi=256, 100 trials",
    6: "scaling collapse over chi in {64, 128, 256}",
    7: "1D saturation: N=40, D=200, chi=64",
    8: "XEB behaviour",
    9: "grouped equivalence on a 5x4 grid",
    10: "split-and-merge round trip",
    11: "extended 54-qubit run",
    12: "desk-scale stand-ins for the large-N study",
}


def _cfg(**kw) -> hn.ExperimentConfig:
    return hn.ExperimentConfig(**kw).validate()


# ---------------------------------------------------------------------------
# 1


def test_criterion_1_exactness_gate(acceptance):
    t0 = time.perf_counter()
    res = hn.run(_cfg(kind="compare-exact", seed=0, n_qubits=12, depth=24, chis=[64], gate="CZ"))
    elapsed = time.perf_counter() - t0
    s = res.summary
    ok = s["all_f_one"] and s["max_amplitude_deviation"] <= 1e-10 and elapsed < 60
    acceptance.record(
        1,
        TITLES[1],
        ok,
        f"all f_n = 1: {s['all_f_one']}, max |amp diff| = {s['max_amplitude_deviation']:.2e}, {elapsed:.1f} s",
    )
    assert s["all_f_one"]
    assert s["max_amplitude_deviation"] <= 1e-10
    assert elapsed < 60


# ---------------------------------------------------------------------------
# 2 and 3


def _multiplicativity_cases():
    for chi in (8, 16, 32):
        for seed in (0, 1, 2):
            marks = []
            if (chi, seed) == (16, 1):
                marks.append(
                    pytest.mark.xfail(
                        strict=True, reason="deviation 0.0201 at this seed exceeds 0.02; see decisions ledger"
                    )
                )
            yield pytest.param(chi, seed, marks=marks, id=f"chi{chi}-seed{seed}")


@pytest.fixture(scope="module")
def exact_comparisons():
    cache = {}

    def get(chi, seed):
        if (chi, seed) not in cache:
            cache[chi, seed] = hn.run(
                _cfg(kind="compare-exact", seed=seed, n_qubits=16, depth=40, chis=[chi], gate="CZ")
            )
        return cache[chi, seed]

    return get


@pytest.mark.parametrize("chi,seed", list(_multiplicativity_cases()))
def test_criterion_2_multiplicativity(acceptance, exact_comparisons, chi, seed):
    rep = mt.MetricsReport.loads(exact_comparisons(chi, seed).tables["metrics.tsv"])
    dev = float(np.max(np.abs(rep.column("F_exact") - rep.column("F_est"))))
    acceptance.record(2, TITLES[2], dev <= 0.02, f"chi={chi} seed={seed}: max deviation {dev:.4f}")
    assert dev <= 0.02


@pytest.mark.parametrize("chi", [8, 16, 32])
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_criterion_3_bound(acceptance, exact_comparisons, chi, seed):
    rep = mt.MetricsReport.loads(exact_comparisons(chi, seed).tables["metrics.tsv"])
    violations = int(np.sum(rep.column("F_exact") < rep.column("bound") - 1e-12))  # rounding slack only
    acceptance.record(3, TITLES[3], violations == 0, f"chi={chi} seed={seed}: {violations} violations")
    assert violations == 0


# ---------------------------------------------------------------------------
# 4


def test_criterion_4_shallow_far_from_porter_thomas(acceptance):
    t0 = time.perf_counter()
    dist = mt.porter_thomas_distance(simulate(brick_1d(12, 2, seed=0)).probabilities(), 12)
    elapsed = time.perf_counter() - t0
    acceptance.record(4, TITLES[4], dist > 0.1 and elapsed < 60, f"D=2: KS = {dist:.3f} (needs > 0.1)")
    assert dist > 0.1


@pytest.mark.xfail(strict=True, reason="KS < 0.01 is below the finite-size floor at N=12; see decisions ledger")
def test_criterion_4_scrambled_close_to_porter_thomas(acceptance):
    t0 = time.perf_counter()
    dist = mt.porter_thomas_distance(simulate(brick_1d(12, 24, seed=0)).probabilities(), 12)
    elapsed = time.perf_counter() - t0
    acceptance.record(4, TITLES[4], dist < 0.01 and elapsed < 60, f"D=24: KS = {dist:.4f} (needs < 0.01)")
    assert dist < 0.01


# ---------------------------------------------------------------------------
# 5


@pytest.mark.parametrize(
    "gate,beta,target",
    [("CZ", 1, 0.962), ("iS", 1, 0.932), ("CZ", 2, 0.874)],
    ids=["CZ-beta1", "iS-beta1", "CZ-beta2"],
)
def test_criterion_5_gte_values(acceptance, gate, beta, target):
    mean, err = estimate_f_gte(gate, 256, beta, 100, np.random.default_rng(2024))
    ok = abs(mean - target) <= 0.005
    acceptance.record(5, TITLES[5], ok, f"{gate} beta={beta}: {mean:.4f} +- {err:.1e} (target {target} +- 0.005)")
    assert ok


# ---------------------------------------------------------------------------
# 6


def test_criterion_6_scaling_collapse(acceptance):
    rng = np.random.default_rng(6)
    chis = [64, 128, 256]
    cz = scaling_collapse("CZ", chis, 20, rng)
    iswap = scaling_collapse("iS", chis, 20, rng)
    gap = bundle_distance(cz, iswap)
    ok = cz.relative_deviation <= 0.03 and iswap.relative_deviation <= 0.03 and gap > 0.03
    acceptance.record(
        6,
        TITLES[6],
        ok,
        f"spread CZ {cz.relative_deviation:.2%}, iS {iswap.relative_deviation:.2%} of peak; "
        f"CZ-iS bundle distance {gap:.2%} of peak",
    )
    assert cz.relative_deviation <= 0.03
    assert iswap.relative_deviation <= 0.03
    assert gap > 0.03  # bundles are further apart than the allowed spread within one


# ---------------------------------------------------------------------------
# 7 and 12 share one long run


@pytest.fixture(scope="module")
def saturation_run():
    t0 = time.perf_counter()
    res = hn.run(_cfg(kind="run-1d", seed=0, n_qubits=40, depth=200, chis=[64], gate="CZ", deterministic=True))
    return res, time.perf_counter() - t0


def test_criterion_7_saturation(acceptance, saturation_run):
    res, elapsed = saturation_run
    circuit = hn.build_circuit(res.config)
    m = MpsState.product_state(40, chi_max=64)
    m.run(circuit.truncated(11))
    early_exact = bool(np.all(m.log.fidelities == 1.0))
    f_stat = res.summary["f_stationary"]
    ok = 0.985 <= f_stat <= 0.992 and early_exact and elapsed <= 3600
    acceptance.record(
        7,
        TITLES[7],
        ok,
        f"stationary f (D > 100) = {f_stat:.4f}; f_n = 1 for D < 12: {early_exact}; {elapsed:.0f} s",
    )
    assert 0.985 <= f_stat <= 0.992
    assert early_exact
    assert elapsed <= 3600


# ---------------------------------------------------------------------------
# 8


def test_criterion_8_noisy_decay_rates(acceptance):
    curves = hn.noisy_xeb_experiment(12, 60, [0.995, 0.99, 0.98], seeds=range(10), two_q="iS")
    for c in curves:
        acceptance.record(
            8,
            TITLES[8],
            c.rate_mismatch <= 0.10,
            f"f={c.f_target}: rate F {c.rate_F:.5f}, rate B {c.rate_B:.5f}, mismatch {c.rate_mismatch:.1%}",
        )
    assert all(c.rate_mismatch <= 0.10 for c in curves)


def test_criterion_8_special_values(acceptance):
    n = 12
    zero = StateVector.zeros(n)
    b_uniform_basis = mt.xeb(StateVector.uniform(n), zero).value
    b_uniform_random = mt.xeb(StateVector.uniform(n), simulate(brick_1d(n, 10, seed=0))).value
    b_zero = mt.xeb(zero, zero).value
    ok = b_uniform_basis == 0.0 and abs(b_uniform_random) < 1e-12 and b_zero == 2**n - 1
    acceptance.record(
        8,
        TITLES[8],
        ok,
        f"B(uniform) = {b_uniform_basis} (vs |0..0>), {b_uniform_random:.1e} (vs a random state); "
        f"B at D=0 = {b_zero}",
    )
    assert b_uniform_basis == 0.0
    assert abs(b_uniform_random) < 1e-12  # exact up to floating-point summation
    assert b_zero == 2**n - 1


def test_criterion_8_scrambled_xeb(acceptance):
    vals = []
    for seed in range(5):
        p = simulate(brick_1d(12, 100, seed=seed))
        vals.append(mt.xeb(p, p).value)
    ok = all(abs(b - 1) <= 0.05 for b in vals)
    acceptance.record(8, TITLES[8], ok, "self-XEB of scrambled states: " + ", ".join(f"{b:.3f}" for b in vals))
    assert ok


# ---------------------------------------------------------------------------
# 9


def test_criterion_9_grouped_equivalence(acceptance):
    base = dict(kind="run-2d", seed=0, grid="4x5", depth=12, chis=[8])
    plain = hn.run(_cfg(**base))
    grouped = hn.run(_cfg(**base, groupings=["[1^5]"]))
    same_columns = plain.tables["fidelity_log.tsv"] == grouped.tables["fidelity_log.tsv"]

    chain_circuit = brick_1d(20, 16, seed=0)
    chain = MpsState.product_state(20, chi_max=8)
    chain.run(chain_circuit)
    singletons = GroupedMpsState.from_grouping(None, Grouping.singletons(20), 8)
    singletons.run(chain_circuit)
    same_chain = [e.f for e in chain.log.entries] == [e.f for e in singletons.log.entries]

    grid = Grid((4,) * 5)
    c = grid_2d(grid, 12, seed=0)
    oracle = simulate(c).amplitudes
    worst, in_group_exact = 0.0, True
    for tag in ("[1^5]", "[2,1,2]", "[3,2]"):
        g = parse_grouping(tag, grid=grid)
        m = GroupedMpsState.from_grouping(None, g, chi_max=2**20)
        m.run(c)
        worst = max(worst, float(np.max(np.abs(m.to_dense() - oracle))))
        in_group_exact &= element_count_ok(m)
        for e in m.log.entries:
            if g.group_of(e.qubits[0]) == g.group_of(e.qubits[1]):
                in_group_exact &= e.kind == "exact" and e.f == 1.0
    ok = same_columns and same_chain and worst <= 1e-9 and in_group_exact
    acceptance.record(
        9,
        TITLES[9],
        ok,
        f"[1^5] log bit-identical: {same_columns}; qubit singletons vs chain: {same_chain}; "
        f"max |amp diff| uncapped = {worst:.1e}; in-group f = 1: {in_group_exact}",
    )
    assert same_columns and same_chain
    assert plain.summary["f_av"] < 1  # the comparison covers truncating gates
    assert worst <= 1e-9
    assert in_group_exact


# ---------------------------------------------------------------------------
# 10


def test_criterion_10_split_and_merge(acceptance):
    grid = Grid((2, 1, 2) * 4)  # 12 columns, 20 qubits
    a = parse_grouping("[4,2,2,4]", grid=grid)
    b = parse_grouping("[5,2,5]", grid=grid)
    m = GroupedMpsState.from_grouping(None, a, chi_max=4096)
    m.run(grid_2d(grid, 12, seed=0))
    ref = m.copy()
    fids = m.regroup(b) + m.regroup(a)
    ov = abs(m.overlap(ref))
    ok = abs(ov - 1) <= 1e-10 and grid.n_qubits == 20
    acceptance.record(10, TITLES[10], ok, f"20 qubits, bonds {ref.bond_dims}: |overlap| - 1 = {ov - 1:.1e}")
    assert grid.n_qubits == 20
    assert all(f == pytest.approx(1.0, abs=1e-12) for f in fids)
    assert abs(ov - 1) <= 1e-10


# ---------------------------------------------------------------------------
# 11


@pytest.mark.extended
def test_criterion_11_extended(acceptance, tmp_path):
    if os.environ.get("NOISY_MPS_EXTENDED") != "1":
        acceptance.record(11, TITLES[11], None, "set NOISY_MPS_EXTENDED=1 to run (hours, up to 8 GB)")
        pytest.skip("extended run; set NOISY_MPS_EXTENDED=1")
    t0 = time.perf_counter()
    res = hn.run(
        _cfg(
            kind="run-2d",
            seed=0,
            grid="sycamore54",
            depth=20,
            chis=[320],
            gate="CZ",
            groupings=["[4,2,2,4]"],
            extended=True,
            deterministic=True,
            out=str(tmp_path),
        )
    )
    elapsed = time.perf_counter() - t0
    s = res.summary
    ok = s["eps_av"] <= 0.014 and s["F_estimated"] >= 0.002 and s["peak_state_bytes"] <= 8e9 and elapsed <= 48 * 3600
    acceptance.record(
        11,
        TITLES[11],
        ok,
        f"eps_av = {s['eps_av']:.4f}, F = {s['F_estimated']:.2e}, peak state {s['peak_state_bytes'] / 1e9:.2f} GB, "
        f"{elapsed / 3600:.1f} h",
    )
    assert s["eps_av"] <= 0.014
    assert s["F_estimated"] >= 0.002
    assert s["peak_state_bytes"] <= 8e9


# ---------------------------------------------------------------------------
# 12


def test_criterion_12_property_stand_ins(acceptance, saturation_run):
    sweep = hn.run(_cfg(kind="sweep", seed=0, n_qubits=16, depth=20, chis=[2, 4, 8, 16, 32], trials=2))
    rows = mt.read_table(io.StringIO(sweep.tables["sweep.tsv"]), "sweep")[1]
    monotone = True
    for seed in (0, 1):
        eps = [r[4] for r in rows if r[1] == seed]
        monotone &= all(x >= y for x, y in zip(eps, eps[1:]))

    c = brick_1d(16, 20, seed=3)
    m = MpsState.product_state(16, chi_max=4)
    m.run(c)
    edges = [e.f for e in m.log.entries if set(e.qubits) in ({0, 1}, {14, 15})]
    edge_exact = bool(edges) and all(f == 1.0 for f in edges)

    res, _ = saturation_run
    f_inf = res.summary["f_stationary"]
    f_gte, err = estimate_f_gte("CZ", 64, 1, 100, np.random.default_rng(12))
    bound = f_inf >= f_gte - err
    ok = monotone and edge_exact and bound
    acceptance.record(
        12,
        TITLES[12],
        ok,
        f"eps_av non-increasing in chi: {monotone}; edge gates exact: {edge_exact}; "
        f"f_inf {f_inf:.4f} >= f_GTE {f_gte:.4f} - {err:.4f}: {bound}",
    )
    assert monotone and edge_exact and bound
    assert math.isfinite(f_inf)
