"""Dense complex tensor algebra.

Tensors are plain ``numpy.ndarray`` objects of dtype ``complex128`` stored in
C (row-major) order over the declared index order. Every matricization below
is defined relative to that layout: ``left`` indices become the row index
(first listed index varies slowest) and the remaining indices, in their
original order, become the column index.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg

from .errors import DimensionError, NumericError

#: Relative cutoff below which a singular value counts as an exact zero.
RANK_CUTOFF = 1e-14


def as_tensor(data) -> np.ndarray:
    """Return ``data`` as a C-contiguous complex128 array with all extents >= 1."""
    t = np.ascontiguousarray(data, dtype=np.complex128)
    if any(extent < 1 for extent in t.shape):
        raise DimensionError(f"tensor extents must be >= 1, got {t.shape}")
    return t


def contract(a: np.ndarray, b: np.ndarray, pairs: Sequence[tuple[int, int]]) -> np.ndarray:
    """Sum over paired indices of ``a`` and ``b``.

    The result carries the unpaired indices of ``a`` (in order) followed by the
    unpaired indices of ``b``.
    """
    axes_a = [p[0] for p in pairs]
    axes_b = [p[1] for p in pairs]
    for i, j in pairs:
        if a.shape[i] != b.shape[j]:
            raise DimensionError(
                f"cannot contract index {i} (extent {a.shape[i]}) with index {j} (extent {b.shape[j]})"
            )
    return np.tensordot(a, b, axes=(axes_a, axes_b))


def _split(t: np.ndarray, left: Sequence[int]) -> tuple[np.ndarray, tuple[int, ...], tuple[int, ...]]:
    left = [ax % t.ndim for ax in left]
    if not left or len(left) >= t.ndim or len(set(left)) != len(left):
        raise DimensionError(f"left must be a nonempty proper subset of the {t.ndim} indices, got {left}")
    right = [ax for ax in range(t.ndim) if ax not in left]
    perm = t.transpose(left + right)
    lshape = tuple(t.shape[ax] for ax in left)
    rshape = tuple(t.shape[ax] for ax in right)
    mat = perm.reshape(int(np.prod(lshape)), int(np.prod(rshape)))
    return mat, lshape, rshape


@dataclass(frozen=True)
class SvdResult:
    """Thin SVD ``t = u . diag(s) . v`` of a matricized tensor.

    ``u`` has shape ``left_shape + (k,)`` and ``v`` has shape ``(k,) + right_shape``.
    ``discarded_weight`` is the summed squared weight removed by truncation
    (zero for a full decomposition).
    """

    u: np.ndarray
    s: np.ndarray
    v: np.ndarray
    discarded_weight: float = 0.0

    @property
    def rank(self) -> int:
        if self.s.size == 0 or self.s[0] == 0:
            return 0
        return int(np.count_nonzero(self.s > RANK_CUTOFF * self.s[0]))


def _matrix_svd(mat: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    try:
        return np.linalg.svd(mat, full_matrices=False)
    except np.linalg.LinAlgError:
        pass
    try:
        # gesvd is slower than gesdd but converges on inputs where gesdd does not
        return scipy.linalg.svd(mat, full_matrices=False, lapack_driver="gesvd")
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericError(f"SVD did not converge: {exc}", mat.shape) from exc


def svd(t: np.ndarray, left: Sequence[int]) -> SvdResult:
    """Full-rank thin SVD of ``t`` matricized as ``(left) x (rest)``."""
    mat, lshape, rshape = _split(t, left)
    u, s, v = _matrix_svd(mat)
    order = np.argsort(-s, kind="stable")
    if np.any(order != np.arange(s.size)):
        u, s, v = u[:, order], s[order], v[order, :]
    k = s.size
    return SvdResult(u.reshape(lshape + (k,)), s, v.reshape((k,) + rshape))


def qr(t: np.ndarray, left: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
    """Thin QR of ``t`` matricized as ``(left) x (rest)``.

    Returns ``q`` with shape ``left_shape + (k,)`` (orthonormal columns) and
    ``r`` with shape ``(k,) + right_shape``.
    """
    mat, lshape, rshape = _split(t, left)
    try:
        q, r = np.linalg.qr(mat)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"QR failed: {exc}", mat.shape) from exc
    k = q.shape[1]
    return q.reshape(lshape + (k,)), r.reshape((k,) + rshape)


def truncate(res: SvdResult, chi: int, *, drop_zeros: bool = False) -> tuple[SvdResult, float]:
    """Keep the ``chi`` largest singular values.

    Returns the truncated decomposition and the kept fraction of squared weight
    ``sum_{mu <= chi} s_mu^2 / sum_mu s_mu^2``. With ``drop_zeros`` the values
    under the rank cutoff are dropped as well. Kept values are not rescaled.
    """
    if chi < 1:
        raise ValueError(f"chi must be >= 1, got {chi}")
    s = res.s
    keep = min(chi, s.size)
    if drop_zeros:
        keep = max(1, min(keep, res.rank))
    s2 = s * s
    total = float(np.sum(s2))
    discarded = float(np.sum(s2[keep:]))
    fidelity = 1.0 - discarded / total if total > 0 else 1.0
    out = SvdResult(
        res.u[..., :keep],
        s[:keep],
        res.v[:keep],
        discarded_weight=res.discarded_weight + discarded,
    )
    return out, fidelity


def entropy_from_spectrum(s: np.ndarray) -> float:
    """Von Neumann entropy ``-sum p log p`` with ``p = s^2 / sum s^2``."""
    p = np.asarray(s, dtype=float) ** 2
    p = p / p.sum()
    p = p[p > 0]
    return float(-np.sum(p * np.log(p)))
