from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from noisy_mps import tensor as tc
from noisy_mps.errors import DimensionError


def _random(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def _loop_contract(a, b, ia, ib):
    """Single-pair contraction written as explicit loops."""
    free_a = [k for k in range(a.ndim) if k != ia]
    free_b = [k for k in range(b.ndim) if k != ib]
    out = np.zeros([a.shape[k] for k in free_a] + [b.shape[k] for k in free_b], dtype=complex)
    for idx_a in itertools.product(*(range(a.shape[k]) for k in free_a)):
        for idx_b in itertools.product(*(range(b.shape[k]) for k in free_b)):
            acc = 0j
            for m in range(a.shape[ia]):
                full_a = list(idx_a)
                full_a.insert(ia, m)
                full_b = list(idx_b)
                full_b.insert(ib, m)
                acc += a[tuple(full_a)] * b[tuple(full_b)]
            out[idx_a + idx_b] = acc
    return out


def test_contract_matches_nested_loops():
    rng = np.random.default_rng(0)
    a = _random(rng, (2, 3, 4))
    b = _random(rng, (3, 5, 2))
    got = tc.contract(a, b, [(1, 0)])
    assert got.shape == (2, 4, 5, 2)
    np.testing.assert_allclose(got, _loop_contract(a, b, 1, 0), atol=1e-12)


def test_contract_two_pairs_matches_einsum():
    rng = np.random.default_rng(1)
    a = _random(rng, (2, 3, 4))
    b = _random(rng, (4, 3, 5))
    np.testing.assert_allclose(tc.contract(a, b, [(1, 1), (2, 0)]), np.einsum("ijk,kjl->il", a, b), atol=1e-12)


def test_contract_extent_mismatch():
    with pytest.raises(DimensionError):
        tc.contract(np.ones((2, 3)), np.ones((4, 2)), [(1, 0)])


def test_as_tensor_rejects_zero_extent():
    with pytest.raises(DimensionError):
        tc.as_tensor(np.ones((2, 0)))


def test_svd_reconstructs_and_orders():
    rng = np.random.default_rng(2)
    t = _random(rng, (3, 2, 2, 5))
    res = tc.svd(t, left=[0, 2])
    assert res.u.shape == (3, 2, 6) and res.v.shape == (6, 2, 5)
    assert np.all(np.diff(res.s) <= 0)
    rebuilt = np.einsum("ack,k,kbd->abcd", res.u, res.s, res.v)
    np.testing.assert_allclose(rebuilt, t, atol=1e-12)


def test_svd_values_match_eigenvalue_oracle():
    rng = np.random.default_rng(3)
    t = _random(rng, (4, 2, 6))
    m = t.reshape(8, 6)
    eig = np.sort(np.linalg.eigvalsh(m.conj().T @ m))[::-1]
    np.testing.assert_allclose(tc.svd(t, left=[0, 1]).s ** 2, eig, rtol=1e-10)


def test_svd_bad_left():
    with pytest.raises(DimensionError):
        tc.svd(np.ones((2, 2)), left=[0, 1])


def test_truncate_kept_fraction():
    rng = np.random.default_rng(4)
    res = tc.svd(_random(rng, (6, 6)), left=[0])
    kept, f = tc.truncate(res, 2)
    s2 = res.s**2
    assert f == pytest.approx(s2[:2].sum() / s2.sum(), abs=1e-14)
    assert kept.s.size == 2
    assert kept.discarded_weight == pytest.approx(s2[2:].sum())


def test_truncate_above_rank_is_exact():
    rng = np.random.default_rng(5)
    low = _random(rng, (6, 2)) @ _random(rng, (2, 6))
    res = tc.svd(low, left=[0])
    kept, f = tc.truncate(res, 4, drop_zeros=True)
    assert f == 1.0
    assert kept.s.size == 2
    _, f_full = tc.truncate(res, 6)
    assert f_full == 1.0


def test_truncate_rejects_bad_chi():
    res = tc.svd(np.eye(2), left=[0])
    with pytest.raises(ValueError):
        tc.truncate(res, 0)


def test_qr_isometry_and_product():
    rng = np.random.default_rng(6)
    t = _random(rng, (3, 2, 4))
    q, r = tc.qr(t, left=[0, 1])
    qm = q.reshape(6, -1)
    np.testing.assert_allclose(qm.conj().T @ qm, np.eye(qm.shape[1]), atol=1e-12)
    np.testing.assert_allclose(tc.contract(q, r, [(2, 0)]), t, atol=1e-12)


def test_entropy_from_spectrum():
    assert tc.entropy_from_spectrum(np.array([1.0])) == 0.0
    assert tc.entropy_from_spectrum(np.array([1.0, 1.0])) == pytest.approx(np.log(2))


@settings(max_examples=30, deadline=None)
@given(
    dims=st.lists(st.integers(1, 4), min_size=2, max_size=4),
    seed=st.integers(0, 2**31),
    chi=st.integers(1, 8),
)
def test_truncation_fidelity_is_kept_weight(dims, seed, chi):
    rng = np.random.default_rng(seed)
    t = _random(rng, tuple(dims))
    res = tc.svd(t, left=[0])
    kept, f = tc.truncate(res, chi)
    approx = np.tensordot(kept.u * kept.s, kept.v, axes=(1, 0))
    # the discarded weight is exactly the squared error of the truncated reconstruction
    err = np.linalg.norm(approx - t) ** 2 / np.linalg.norm(t) ** 2
    assert 0 < f <= 1
    assert err == pytest.approx(1 - f, abs=1e-10)
