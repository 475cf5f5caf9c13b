"""SINR of an MMSE selective-Rake combiner.

Three evaluators share one signature:

* :func:`exact_sinr` -- the MMSE output SINR for a chosen set of paths,
* :func:`individual_sinr` -- the SINR of a single path taken alone,
* :func:`approx_sinr` -- the first-order expansion in the interference,
  a concave quadratic in the assignment vector ``x``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .model import MaiSignature

__all__ = [
    "QpData",
    "as_indices",
    "indices_to_bits",
    "exact_sinr",
    "exact_sinr_batch",
    "individual_sinr",
    "build_qp_data",
    "approx_sinr",
    "to_db",
]


def to_db(x):
    return 10.0 * np.log10(x)


def as_indices(sel, L: int) -> np.ndarray:
    """Normalize a selection to a sorted array of distinct path indices.

    ``sel`` may be a boolean mask of length ``L``, an object exposing
    ``indices``, or any sequence of integer indices.
    """
    sel = getattr(sel, "indices", sel)
    arr = np.asarray(sel)
    if arr.dtype == bool:
        if arr.shape != (L,):
            raise ValueError(f"boolean selection must have length {L}")
        idx = np.flatnonzero(arr)
    else:
        idx = np.unique(arr.astype(np.int64).ravel())
        if idx.size != arr.size:
            raise ValueError("selection contains repeated indices")
    if idx.size == 0:
        raise ValueError("selection is empty")
    if idx[0] < 0 or idx[-1] >= L:
        raise ValueError(f"path index out of range [0, {L})")
    return idx


def indices_to_bits(indices, L: int) -> np.ndarray:
    bits = np.zeros(L, dtype=np.int64)
    bits[np.asarray(indices, dtype=np.int64)] = 1
    return bits


def exact_sinr(sel, sig: MaiSignature, e1: float, nv: float) -> float:
    """MMSE SINR ``(E1/nv) a^T (I + B B^T / nv)^{-1} a``.

    ``a`` holds the selected desired-user taps and ``B`` the selected rows of
    the amplitude-weighted MAI signature.
    """
    idx = as_indices(sel, sig.L)
    a = sig.alpha1[idx]
    B = sig.weighted[idx]
    R = np.eye(idx.size) + (B @ B.T) / nv
    y = cho_solve(cho_factor(R, lower=True), a)
    return float(e1 / nv * (a @ y))


def exact_sinr_batch(subsets, sig: MaiSignature, e1: float, nv: float) -> np.ndarray:
    """:func:`exact_sinr` for every row of an ``(N, M)`` index array.

    Uses a batched Cholesky factorization and a forward substitution
    vectorized over the batch; ``a^T R^{-1} a = ||C^{-1} a||^2`` for
    ``R = C C^T``.
    """
    subsets = np.asarray(subsets, dtype=np.int64)
    if subsets.ndim != 2 or subsets.shape[1] == 0:
        raise ValueError("subsets must be a nonempty (N, M) index array")
    a = sig.alpha1[subsets]
    B = sig.weighted[subsets]
    R = np.einsum("nik,njk->nij", B, B) / nv
    m = subsets.shape[1]
    R[:, np.arange(m), np.arange(m)] += 1.0
    C = np.linalg.cholesky(R)
    z = np.empty_like(a)
    for i in range(m):
        z[:, i] = (a[:, i] - np.einsum("nj,nj->n", C[:, i, :i], z[:, :i])) / C[:, i, i]
    return e1 / nv * np.einsum("ni,ni->n", z, z)


def individual_sinr(l, sig: MaiSignature, e1: float, nv: float):
    """Per-path SINR ignoring correlation with other paths.

    ``l`` may be a single index or an array of indices; ``l=None`` returns
    all ``L`` values.
    """
    if l is None:
        l = np.arange(sig.L)
    w = sig.weighted[l]
    mai = np.sum(w * w, axis=-1)
    out = e1 * sig.alpha1[l] ** 2 / (mai + nv)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class QpData:
    """Quadratic-form data of the linearized SINR.

    ``q`` holds the squared desired taps and ``P = G G^T`` with
    ``G = diag(alpha1) S_MAI diag(amat)``, so ``P`` is symmetric PSD by
    construction (rank at most ``K-1``).
    """

    q: np.ndarray
    P: np.ndarray
    e1: float
    nv: float
    G: np.ndarray


def build_qp_data(sig: MaiSignature, e1: float, nv: float) -> QpData:
    G = sig.alpha1[:, None] * sig.weighted
    P = G @ G.T
    P = 0.5 * (P + P.T)
    return QpData(q=sig.alpha1**2, P=P, e1=float(e1), nv=float(nv), G=G)


def approx_sinr(x, qp: QpData) -> float:
    x = np.asarray(x, dtype=float)
    return float(qp.e1 / qp.nv * (qp.q @ x - (x @ qp.P @ x) / qp.nv))
