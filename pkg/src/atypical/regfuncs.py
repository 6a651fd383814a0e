"""Pointwise regularity indicators for a polynomial map.

The three matrix functions measure how far a p x n Jacobian is from rank
deficiency: the Rabier function (smallest singular value), the Kuo distance
(min distance from a row to the span of the others), and the Gaffney minor
ratio (l2 norm of the p x p minors over the l2 norm of the (p-1) x (p-1)
minors).  The two scan indicators multiply by the point norm:

    kos_indicator(x)       = ||x|| * nu(Df(x))
    malgrange_indicator(x) = ||x|| * gaffney_ratio(Df(x))

All three matrix functions vanish together exactly when rank Df < p; only
that co-vanishing is asserted, not any comparability constants.  The norm is
Euclidean throughout.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

import numpy as np

from .polymap import PolyMap


class _Unbounded:
    """Tag for a Gaffney ratio whose denominator minors all vanish.

    Kept as an explicit marker instead of float('inf') so downstream logic
    has to branch on it rather than let an infinity leak through arithmetic.
    """

    __slots__ = ()

    def __repr__(self):
        return "UNBOUNDED"


UNBOUNDED = _Unbounded()


def _as_matrix(A) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2:
        raise ValueError("expected a 2-D matrix")
    p, n = A.shape
    if p > n:
        raise ValueError(f"need p <= n, got shape {A.shape}")
    return A


def rabier_nu(A) -> float:
    """Smallest singular value of A, i.e. inf over unit covectors of ||A^T phi||."""
    A = _as_matrix(A)
    return float(np.linalg.svd(A, compute_uv=False)[-1])


def kuo_kappa(A) -> float:
    """Minimum over rows of the distance from that row to the span of the others."""
    A = _as_matrix(A)
    p = A.shape[0]
    if p == 1:
        return float(np.linalg.norm(A[0]))
    best = np.inf
    for j in range(p):
        rest = np.delete(A, j, axis=0)
        # distance from row j to the row space of the others
        coeffs, *_ = np.linalg.lstsq(rest.T, A[j], rcond=None)
        dist = float(np.linalg.norm(A[j] - rest.T @ coeffs))
        best = min(best, dist)
    return best


def _det_batch(mats: np.ndarray) -> np.ndarray:
    """Determinants of a (N, k, k) stack via cofactor expansion for k <= 3.

    Cofactor expansion is exact for small-integer entries (no LU pivoting
    noise), which keeps minors of exactly rank-deficient integer matrices at
    exactly zero; that exactness is what the co-vanishing dichotomy rests on.
    """
    k = mats.shape[-1]
    if k == 1:
        return mats[..., 0, 0].copy()
    if k == 2:
        return mats[..., 0, 0] * mats[..., 1, 1] - mats[..., 0, 1] * mats[..., 1, 0]
    if k == 3:
        a, b, c = mats[..., 0, 0], mats[..., 0, 1], mats[..., 0, 2]
        d, e, f = mats[..., 1, 0], mats[..., 1, 1], mats[..., 1, 2]
        g, h, i = mats[..., 2, 0], mats[..., 2, 1], mats[..., 2, 2]
        return a * (e * i - f * h) - b * (d * i - f * g) + c * (d * h - e * g)
    return np.linalg.det(mats)


def _square_minors(A: np.ndarray, rows: Sequence[int], size: int) -> np.ndarray:
    """All size x size minors of A restricted to the given rows, over column subsets."""
    sub = A[list(rows), :]
    n = A.shape[1]
    if size == 0:
        return np.array([1.0])
    cols = list(combinations(range(n), size))
    mats = np.stack([sub[:, list(c)] for c in cols])
    return _det_batch(mats)


def gaffney_ratio(A) -> float | _Unbounded:
    """l2 norm of all maximal minors over l2 norm of all one-smaller minors.

    For p = 1 the denominator is 1 by convention.  Returns UNBOUNDED when the
    denominator vanishes but the numerator does not, and 0.0 (degenerate) when
    both vanish.
    """
    A = _as_matrix(A)
    p = A.shape[0]
    num = float(np.linalg.norm(_square_minors(A, range(p), p)))
    if p == 1:
        return num
    den_sq = 0.0
    for j in range(p):
        rows = [i for i in range(p) if i != j]
        den_sq += float(np.sum(_square_minors(A, rows, p - 1) ** 2))
    den = np.sqrt(den_sq)
    if den == 0.0:
        return 0.0 if num == 0.0 else UNBOUNDED
    return num / den


def kos_indicator(pm: PolyMap, x: Sequence[float]) -> float:
    """||x|| times the Rabier function of Df(x)."""
    x = np.asarray(x, dtype=float)
    if x.shape != (pm.n,):
        raise ValueError(f"expected point of length {pm.n}")
    Df = pm.jacobian_batch(x.reshape(1, -1))[0]
    return float(np.linalg.norm(x)) * rabier_nu(Df)


def malgrange_indicator(pm: PolyMap, x: Sequence[float]) -> float | _Unbounded:
    """||x|| times the Gaffney minor ratio of Df(x); the unbounded tag propagates."""
    x = np.asarray(x, dtype=float)
    if x.shape != (pm.n,):
        raise ValueError(f"expected point of length {pm.n}")
    Df = pm.jacobian_batch(x.reshape(1, -1))[0]
    ratio = gaffney_ratio(Df)
    if isinstance(ratio, _Unbounded):
        return UNBOUNDED
    return float(np.linalg.norm(x)) * ratio


@dataclass(frozen=True)
class RegularityPanel:
    """All pointwise indicators of a map at one point."""

    point: tuple[float, ...]
    nu: float
    kappa: float
    gaffney: float | _Unbounded
    kos_indicator: float
    malgrange_indicator: float | _Unbounded


def panel(pm: PolyMap, x: Sequence[float]) -> RegularityPanel:
    """Evaluate every regularity indicator of the map at one point."""
    x = np.asarray(x, dtype=float)
    if x.shape != (pm.n,):
        raise ValueError(f"expected point of length {pm.n}")
    Df = pm.jacobian_batch(x.reshape(1, -1))[0]
    nrm = float(np.linalg.norm(x))
    nu = rabier_nu(Df)
    ratio = gaffney_ratio(Df)
    malg = UNBOUNDED if isinstance(ratio, _Unbounded) else nrm * ratio
    return RegularityPanel(
        point=tuple(float(v) for v in x),
        nu=nu,
        kappa=kuo_kappa(Df),
        gaffney=ratio,
        kos_indicator=nrm * nu,
        malgrange_indicator=malg,
    )


# ---------------------------------------------------------------------------
# Batched versions used by the sweep engine


def rabier_nu_batch(mats: np.ndarray) -> np.ndarray:
    """Smallest singular value per matrix of a (N, p, n) stack."""
    return np.linalg.svd(mats, compute_uv=False)[..., -1]


def gaffney_ratio_batch(mats: np.ndarray) -> np.ndarray:
    """Gaffney ratio per matrix; unbounded entries come back as +inf.

    Internal helper for sweeps: the float inf never feeds arithmetic, callers
    compare against thresholds only.
    """
    N, p, n = mats.shape
    with np.errstate(over="ignore", invalid="ignore"):
        num_sq = np.zeros(N)
        for cols in combinations(range(n), p):
            num_sq += _det_batch(mats[:, :, list(cols)]) ** 2
        num = np.sqrt(num_sq)
        if p == 1:
            return num
        den_sq = np.zeros(N)
        for j in range(p):
            rows = [i for i in range(p) if i != j]
            sub = mats[:, rows, :]
            for cols in combinations(range(n), p - 1):
                den_sq += _det_batch(sub[:, :, list(cols)]) ** 2
        den = np.sqrt(den_sq)
        out = np.full(N, np.inf)
        ok = (den > 0) & np.isfinite(den)
        out[ok] = num[ok] / den[ok]
        out[(den == 0) & (num == 0)] = 0.0
    return out
