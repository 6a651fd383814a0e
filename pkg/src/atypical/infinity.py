"""Localization at infinity: the t-regularity gap, Milnor-set residual, and
the exact singular locus through maximal minors.

The t-gap measures, in a chart at infinity, the smallest singular value of
the chart Jacobian with the y_0 column removed; it stays bounded away from
zero along sequences into a point at infinity exactly when no limit of
tangent hyperplanes there contains the horizontal subspace.  The Milnor
residual measures transversality of the fibers to the levels of a distance
function rho (Euclidean or weighted), as the smallest singular value of the
row-normalized stack of Df with the gradient direction of rho.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from math import lcm
from typing import Sequence

import numpy as np

from .polymap import ChartMap, PolyMap, Polynomial, chart_partials
from .sampling import ScanConfig, ValueCluster, Witness, cluster_values, sobol_unit, sphere_directions


@dataclass(frozen=True)
class PointAtInfinity:
    """A point of the boundary at infinity: unit direction plus target value.

    Antipodal directions are identified; the stored representative has its
    first nonzero coordinate positive.
    """

    direction: tuple[float, ...]
    value: tuple[float, ...]

    @classmethod
    def make(cls, direction: Sequence[float], value: Sequence[float]) -> "PointAtInfinity":
        u = np.asarray(direction, dtype=float)
        nrm = float(np.linalg.norm(u))
        if nrm == 0:
            raise ValueError("direction must be nonzero")
        u = u / nrm
        for v in u:
            if v != 0:
                if v < 0:
                    u = -u
                break
        return cls(tuple(float(v) for v in u), tuple(float(v) for v in value))


@dataclass(frozen=True)
class RhoSpec:
    """Distance function used for the Milnor set: Euclidean or weighted.

    The weighted form is rho(x) = (sum |x_i|^{2 p_i})^{1/2p} with
    p = lcm(w_1, ..., w_n) and p_i = p / w_i, defined for positive integer
    weights; it is adapted to maps quasihomogeneous of type (w_1, ..., w_n).
    """

    kind: str = "euclidean"
    weights: tuple[int, ...] = ()

    def __post_init__(self):
        if self.kind not in ("euclidean", "weighted"):
            raise ValueError(f"unknown rho kind {self.kind!r}")
        if self.kind == "weighted":
            if not self.weights or any((not isinstance(w, int)) or w < 1 for w in self.weights):
                raise ValueError("weighted rho needs positive integer weights")

    @classmethod
    def euclidean(cls) -> "RhoSpec":
        return cls("euclidean", ())

    @classmethod
    def weighted(cls, weights: Sequence[int]) -> "RhoSpec":
        return cls("weighted", tuple(int(w) for w in weights))

    @property
    def lcm_p(self) -> int:
        return lcm(*self.weights)

    @property
    def exponents(self) -> tuple[int, ...]:
        p = self.lcm_p
        return tuple(p // w for w in self.weights)

    def rho(self, x: Sequence[float]) -> float:
        x = np.asarray(x, dtype=float)
        if self.kind == "euclidean":
            return float(np.linalg.norm(x))
        p = self.lcm_p
        return float(np.sum(np.abs(x) ** (2 * np.array(self.exponents))) ** (1.0 / (2 * p)))

    def gradient_rows(self, X: np.ndarray) -> np.ndarray:
        """Direction of grad rho at each row of X (not normalized)."""
        X = np.asarray(X, dtype=float)
        if self.kind == "euclidean":
            return X.copy()
        p_i = np.array(self.exponents, dtype=float)
        return np.sign(X) * p_i[None, :] * np.abs(X) ** (2 * p_i[None, :] - 1)


@dataclass(frozen=True, eq=False)
class MilnorResidualEval:
    """Milnor-set membership residual at one point."""

    point: tuple[float, ...]
    residual: float
    stacked_rank_hint: int


def t_gap(cm: ChartMap, y: Sequence[float], t: Sequence[float]) -> float:
    """Smallest singular value of the chart Jacobian with the y_0 column removed.

    The map is t-regular at a point at infinity exactly when this gap stays
    bounded away from zero along every sequence into the point; dropping the
    y_0 column matches absorbing that component into the normal direction of
    the hyperplane at infinity.
    """
    dFdy, _ = chart_partials(cm, y, t)
    return float(np.linalg.svd(dFdy[:, 1:], compute_uv=False)[-1])


def t_gap_at_points(cm: ChartMap, X: np.ndarray) -> np.ndarray:
    """t-gap evaluated at affine points (batched); points must avoid the chart hyperplane."""
    X = np.asarray(X, dtype=float)
    pm = cm.base
    Q = cm.rotation_float
    xr = X @ Q.T
    j = cm.chart_index - 1
    xj = xr[:, j]
    Df = pm.jacobian_batch(X)
    Dg = Df @ Q.T
    trunc = xj[:, None, None] * Dg[:, :, cm._other_axes]
    return np.linalg.svd(trunc, compute_uv=False)[..., -1]


def milnor_residual_batch(pm: PolyMap, X: np.ndarray, rho: RhoSpec) -> np.ndarray:
    """Row-normalized stacked residual at each row of X.

    Stacks Df(x) with the gradient direction of rho, normalizes every nonzero
    row to unit length, and returns the (p+1)-th singular value.  Points with
    a vanishing Jacobian row sit in Sing f and get residual zero outright.
    """
    X = np.asarray(X, dtype=float)
    N = X.shape[0]
    Df = pm.jacobian_batch(X)
    rho_rows = rho.gradient_rows(X)
    stack = np.concatenate([Df, rho_rows[:, None, :]], axis=1)
    norms = np.linalg.norm(stack, axis=2)
    zero_df_row = np.any(norms[:, : pm.p] == 0, axis=1)
    safe = np.where(norms == 0, 1.0, norms)
    stack = stack / safe[:, :, None]
    res = np.linalg.svd(stack, compute_uv=False)[..., -1]
    res[zero_df_row] = 0.0
    return res


def milnor_residual(pm: PolyMap, x: Sequence[float], rho: RhoSpec) -> MilnorResidualEval:
    """Transversality residual of the fiber through x against the levels of rho."""
    x = np.asarray(x, dtype=float)
    if x.shape != (pm.n,):
        raise ValueError(f"expected point of length {pm.n}")
    if not np.any(x):
        raise ValueError("the Milnor residual is undefined at the origin")
    if rho.kind == "weighted" and len(rho.weights) != pm.n:
        raise ValueError("weight count does not match the map dimension")
    res = float(milnor_residual_batch(pm, x.reshape(1, -1), rho)[0])
    Df = pm.jacobian_batch(x.reshape(1, -1))[0]
    stack = np.concatenate([Df, rho.gradient_rows(x.reshape(1, -1))], axis=0)
    rank = int(np.linalg.matrix_rank(stack))
    return MilnorResidualEval(point=tuple(float(v) for v in x), residual=res, stacked_rank_hint=rank)


# ---------------------------------------------------------------------------
# Exact singular locus


def _poly_det(mat: list[list[Polynomial]]) -> Polynomial:
    size = len(mat)
    n_vars = mat[0][0].n_vars
    if size == 1:
        return mat[0][0]
    total = Polynomial.zero(n_vars)
    for j in range(size):
        minor = [row[:j] + row[j + 1:] for row in mat[1:]]
        cof = mat[0][j] * _poly_det(minor)
        total = total + (cof if j % 2 == 0 else -cof)
    return total


def sing_minors(pm: PolyMap) -> list[Polynomial]:
    """All maximal (p x p) minors of the Jacobian as exact polynomials.

    The singular locus of the map is their common zero set.  Minors are
    ordered by the lexicographic column subset.
    """
    if pm.p > pm.n:
        raise ValueError("need p <= n")
    rows = [[pm.partials[i][j] for j in range(pm.n)] for i in range(pm.p)]
    out = []
    for cols in combinations(range(pm.n), pm.p):
        out.append(_poly_det([[rows[i][j] for j in cols] for i in range(pm.p)]))
    return out


def singular_values_estimate(pm: PolyMap, cfg: ScanConfig) -> list[ValueCluster]:
    """Estimate f(Sing f) by descending the squared-minors sum from random starts.

    Starting points fill the ball of the first scan radius (log-spread toward
    the origin); candidates count only when the final squared-minors sum drops
    below eps_sing, the final point stays inside that ball, and the value lies
    in the scan window.  Minimizer trajectories that escape the ball are
    discarded: a vanishing minors-sum along an unbounded valley signals an
    asymptotic value, which is the Milnor scan's job, not a singular point.
    """
    from .numerics import batched_lm

    cfg.check_map(pm.n)
    minors = sing_minors(pm)
    live = [q for q in minors if not q.is_zero]

    def residuals(X: np.ndarray) -> np.ndarray:
        if not live:
            return np.zeros((X.shape[0], 1))
        from .polymap import _eval_polys_batch

        vals = _eval_polys_batch(live, X)
        return np.stack(vals, axis=1)

    r0 = cfg.radii[0]
    count = cfg.n_dirs * cfg.radii_count
    dirs = sphere_directions(count, pm.n, cfg.seed + 101)
    frac = sobol_unit(count, 1, cfg.seed + 202)[:, 0]
    radii = r0 * 10.0 ** (-3.0 * frac)  # log-spread in [r0/1000, r0]
    X0 = dirs * radii[:, None]
    X, cost = batched_lm(residuals, X0, cfg.opt_budget)

    norms = np.linalg.norm(X, axis=1)
    keep = (cost < cfg.eps_sing) & (norms <= r0)
    if not keep.any():
        return []
    vals = pm.eval_batch(X[keep])
    in_window = np.all(np.abs(vals) <= cfg.value_window, axis=1)
    pts = X[keep][in_window]
    vals = vals[in_window]
    costs = cost[keep][in_window]
    if not len(vals):
        return []
    samples = [(vals[i], 1.0) for i in range(len(vals))]
    clusters = []
    for centroid, members in cluster_values(samples, cfg.cluster_tol):
        best = min(members, key=lambda k: (costs[k], k))
        wit = Witness(
            point=tuple(float(v) for v in pts[best]),
            radius=float(np.linalg.norm(pts[best])),
            indicator=float(costs[best]),
        )
        clusters.append(ValueCluster(value=centroid, kind="singular", witnesses=(wit,)))
    return clusters
