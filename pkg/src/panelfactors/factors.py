"""Eigen-analysis of panel residuals: spectrum, factor counting, extraction.

The spectrum is taken from the T x T second-moment matrix U'U/(NT) after
per-unit demeaning.  Factor counts use the eigenvalue-ratio (ER) and
growth-rate (GR) criteria; extraction returns components normalized so
that PC'PC/T is the identity, with a deterministic sign convention
anchored on the cross-section average of the input.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSpectrumError, RankError, SchemaError

CLAMP_REL = 1e-12


@dataclass(frozen=True)
class FactorSet:
    """Extracted components with their spectrum bookkeeping.

    ``components`` is T x m with ``components.T @ components / T = I``;
    ``eigenvalues`` is the full clamped spectrum (descending); ``shares``
    are the extracted components' fractions of the total eigenvalue mass;
    ``sign_anchor`` records, per component, whether the sign was fixed on
    the cross-section average ("csa") or on the first element ("first").
    """

    components: np.ndarray
    eigenvalues: np.ndarray
    shares: np.ndarray
    sign_anchor: tuple[str, ...]

    @property
    def n_components(self) -> int:
        return self.components.shape[1]

    def all_shares(self) -> np.ndarray:
        total = self.eigenvalues.sum()
        return self.eigenvalues / total if total > 0 else self.eigenvalues


def _prepare(U: np.ndarray, center: bool) -> np.ndarray:
    U = np.asarray(U, dtype=float)
    if U.ndim != 2 or U.shape[0] < 2 or U.shape[1] < 2:
        raise SchemaError("expected an N x T matrix with N >= 2, T >= 2")
    if center:
        U = U - U.mean(axis=1, keepdims=True)
    if not np.any(U):
        raise DegenerateSpectrumError("input matrix is identically zero")
    return U


def _clamped_spectrum(U: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n, t = U.shape
    second_moment = U.T @ U / (n * t)
    values, vectors = np.linalg.eigh(second_moment)
    order = np.argsort(values)[::-1]
    values = values[order]
    vectors = vectors[:, order]
    clamp = CLAMP_REL * values[0]
    values = np.where(values > clamp, values, 0.0)
    return values, vectors


def eigen_spectrum(U: np.ndarray, center: bool = True) -> np.ndarray:
    """Descending eigenvalues of U'U/(NT), per-unit demeaned when ``center``.

    Values below ``1e-12`` of the leading eigenvalue (including roundoff
    negatives) are clamped to zero.
    """
    values, _ = _clamped_spectrum(_prepare(U, center))
    return values


@dataclass(frozen=True)
class FactorCount:
    k_er: int
    k_gr: int
    er: np.ndarray                    # ER(k) for k = 1..kmax_used
    gr: np.ndarray
    kmax: int                         # range actually scanned
    truncated: bool


def ahn_horenstein(eigenvalues: np.ndarray, kmax: int) -> FactorCount:
    """Eigenvalue-ratio and growth-rate factor counts.

    ``ER(k) = lam_k / lam_{k+1}``; with ``V(k)`` the eigenvalue mass beyond
    k, ``GR(k) = ln(V(k-1)/V(k)) / ln(V(k)/V(k+1))``.  Both are maximized
    over ``1 <= k <= kmax`` with ties broken toward the smallest k.  A zero
    eigenvalue inside the range truncates the scan with a warning rather
    than failing.
    """
    lam = np.asarray(eigenvalues, dtype=float)
    if kmax < 1:
        raise SchemaError("kmax must be >= 1")
    if lam.ndim != 1 or lam.size < kmax + 2:
        raise SchemaError(f"need at least kmax+2 = {kmax + 2} eigenvalues, got {lam.size}")
    if np.any(lam < 0):
        raise SchemaError("eigenvalues must be nonnegative (clamp roundoff first)")
    if np.any(np.diff(lam) > 1e-12 * max(lam[0], 1.0)):
        raise SchemaError("eigenvalues must be in descending order")
    if lam[0] <= 0:
        raise DegenerateSpectrumError("leading eigenvalue is zero")

    tail = np.concatenate([np.cumsum(lam[::-1])[::-1], [0.0]])  # tail[k] = sum_{j>k} lam_j, 1-based lam

    kmax_used = kmax
    truncated = False
    for k in range(1, kmax + 1):
        # ER(k) needs lam_{k+1} > 0; GR(k) needs V(k+1) > 0
        if lam[k] <= 0 or tail[k + 1] <= 0:
            kmax_used = k - 1
            truncated = True
            break
    if kmax_used < 1:
        raise DegenerateSpectrumError("spectrum too degenerate to form any ratio")
    if truncated:
        warnings.warn(
            f"zero eigenvalue mass inside the scan range; kmax truncated to {kmax_used}",
            RuntimeWarning, stacklevel=2)

    ks = np.arange(1, kmax_used + 1)
    er = lam[ks - 1] / lam[ks]
    gr = np.log(tail[ks - 1] / tail[ks]) / np.log(tail[ks] / tail[ks + 1])
    return FactorCount(k_er=int(ks[np.argmax(er)]), k_gr=int(ks[np.argmax(gr)]),
                       er=er, gr=gr, kmax=kmax_used, truncated=truncated)


def default_kmax(n: int, t: int) -> int:
    return max(1, min(n, t) // 2)


def extract_pcs(U: np.ndarray, m: int, center: bool = True) -> FactorSet:
    """Top-``m`` principal components of U'U/(NT), scaled to PC'PC/T = I.

    Each component's sign is fixed so that it correlates nonnegatively with
    the cross-section average of ``U``; when that correlation is exactly
    zero the first element is made nonnegative instead.
    """
    U = _prepare(U, center)
    n, t = U.shape
    if m < 1 or m > min(n, t):
        raise SchemaError(f"m must be in 1..min(N,T) = {min(n, t)}")
    values, vectors = _clamped_spectrum(U)
    effective_rank = int(np.sum(values > 0))
    if m > effective_rank:
        raise RankError(m, effective_rank)

    components = np.sqrt(t) * vectors[:, :m]
    anchor_series = U.mean(axis=0)
    anchors: list[str] = []
    for k in range(m):
        comp = components[:, k]
        c = float(comp @ anchor_series)
        scale = np.linalg.norm(comp) * np.linalg.norm(anchor_series)
        if scale > 0 and abs(c) > 1e-12 * scale:
            if c < 0:
                components[:, k] = -comp
            anchors.append("csa")
        else:
            j = int(np.argmax(np.abs(comp) > 0))
            if comp[j] < 0:
                components[:, k] = -comp
            anchors.append("first")

    total = values.sum()
    shares = values[:m] / total if total > 0 else np.zeros(m)
    return FactorSet(components=components, eigenvalues=values, shares=shares,
                     sign_anchor=tuple(anchors))


def count_factors(U: np.ndarray, kmax: int | None = None, center: bool = True) -> FactorCount:
    """Convenience wrapper: spectrum then ER/GR counting."""
    U = np.asarray(U, dtype=float)
    if kmax is None:
        kmax = default_kmax(*U.shape)
    lam = eigen_spectrum(U, center=center)
    kmax = min(kmax, lam.size - 2)
    return ahn_horenstein(lam, kmax)
