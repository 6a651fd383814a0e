"""Batched local optimizers used by the sweeps.

Both routines advance a whole population of starts in lockstep with numpy
array operations; each start's trajectory depends only on its own state, so
results are independent of batching and thread counts.

The sphere optimizer is a multi-scale pattern search rather than a gradient
method: the objectives it faces (indicator plus value penalty) have curved
valleys whose width shrinks like a high negative power of the radius, far
below any fixed finite-difference resolution.  Pattern steps along projected
coordinate axes with a per-start geometric step ladder track such valleys
down to float spacing.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

Objective = Callable[[np.ndarray, np.ndarray], np.ndarray]


_LADDER = np.array([1.0, 1.0 / 32.0, 1.0 / 1024.0])


def sphere_descent(
    obj: Objective,
    X0: np.ndarray,
    anchors: np.ndarray,
    radius: float,
    budget: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Minimize obj on the sphere ||x|| = radius from a batch of starts.

    obj(X, T) evaluates the objective at points X (rows) with per-row anchor
    values T.  Each iteration tries pattern moves along both signs of every
    coordinate axis projected to the tangent space, plus the previously
    accepted move, at three scales of the start's step ladder; a success
    recenters the ladder just above the winning scale, a total failure
    collapses it by three decades.  Runs at most ``budget`` iterations; rows
    whose ladder falls below float resolution freeze early.
    """
    X = np.array(X0, dtype=float)
    N, n = X.shape
    X *= radius / np.linalg.norm(X, axis=1)[:, None]
    f = obj(X, anchors)
    sigma = np.full(N, 0.3 * radius)
    sigma_min = 1e-26 * radius
    sigma_max = 0.5 * radius
    last_move = np.zeros_like(X)
    active = np.ones(N, dtype=bool)
    eye = np.eye(n)
    n_scales = len(_LADDER)

    for _ in range(budget):
        if not active.any():
            break
        idx = np.flatnonzero(active)
        Xa = X[idx]
        m = len(idx)
        xhat = Xa / radius
        # candidate directions: +-(e_j projected to tangent), plus momentum
        dirs = np.broadcast_to(eye, (m, n, n)) - xhat[:, None, :] * xhat[:, :, None]
        nrm = np.linalg.norm(dirs, axis=2)
        ok = nrm > 1e-12
        dirs = np.where(ok[:, :, None], dirs / np.where(ok, nrm, 1.0)[:, :, None], 0.0)
        mom = last_move[idx]
        mom_n = np.linalg.norm(mom, axis=1)
        has_mom = mom_n > 0
        mom = np.where(has_mom[:, None], mom / np.where(has_mom, mom_n, 1.0)[:, None], 0.0)
        base = np.concatenate(
            [dirs, -dirs, mom[:, None, :], -mom[:, None, :]], axis=1
        )  # (m, 2n+2, n)
        steps = sigma[idx][:, None] * _LADDER[None, :]  # (m, n_scales)
        cands = base[:, :, None, :] * steps[:, None, :, None]  # (m, 2n+2, n_scales, n)
        k = base.shape[1] * n_scales
        trial = Xa[:, None, None, :] + cands
        trial = trial.reshape(m, k, n)
        tn = np.linalg.norm(trial, axis=2)
        trial *= (radius / tn)[:, :, None]
        ft = obj(trial.reshape(m * k, n), np.repeat(anchors[idx], k, axis=0)).reshape(m, k)
        best = np.argmin(ft, axis=1)
        fbest = ft[np.arange(m), best]
        improved = fbest < f[idx] - 1e-18 * (1.0 + np.abs(f[idx]))
        win = idx[improved]
        sel = best[improved]
        moved = trial[improved, sel, :]
        last_move[win] = moved - X[win]
        X[win] = moved
        f[win] = fbest[improved]
        win_scale = steps[improved, sel % n_scales]
        sigma[win] = np.minimum(8.0 * win_scale, sigma_max)
        lose = idx[~improved]
        sigma[lose] *= 1e-3
        last_move[lose] = 0.0
        frozen = lose[sigma[lose] < sigma_min]
        active[frozen] = False
    return X, f


def batched_lm(
    res_fn: Callable[[np.ndarray], np.ndarray],
    X0: np.ndarray,
    budget: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Levenberg-Marquardt on a batch of starts for a shared residual vector.

    res_fn(X) -> (N, m) residuals.  The budget counts residual evaluations per
    start (Jacobians cost n of them).  Returns final points and costs, where
    cost = sum of squared residuals.
    """
    X = np.array(X0, dtype=float)
    N, n = X.shape
    r = res_fn(X)
    cost = np.sum(r * r, axis=1)
    lam = np.full(N, 1e-3)
    evals = 1
    eye = np.eye(n)
    while evals + n + 1 <= budget:
        h = 1e-7 * (1.0 + np.abs(X))
        pert = X[:, None, :] + h[:, None, :] * eye[None, :, :]
        r_pert = res_fn(pert.reshape(-1, n)).reshape(N, n, -1)
        evals += n
        J = (r_pert - r[:, None, :]) / h[:, :, None]  # (N, n, m) = d r / d x
        g = np.einsum("njm,nm->nj", J, r)
        H = np.einsum("nim,njm->nij", J, J)
        A = H + (lam[:, None, None] + 1e-15) * eye[None, :, :]
        try:
            d = -np.linalg.solve(A, g[..., None])[..., 0]
        except np.linalg.LinAlgError:
            d = -np.linalg.lstsq(A.reshape(-1, n), g.reshape(-1), rcond=None)[0].reshape(N, n)
        Xt = X + d
        rt = res_fn(Xt)
        evals += 1
        ct = np.sum(rt * rt, axis=1)
        better = ct < cost
        X[better] = Xt[better]
        r[better] = rt[better]
        cost[better] = ct[better]
        lam[better] = np.maximum(lam[better] * 0.33, 1e-12)
        lam[~better] = np.minimum(lam[~better] * 3.0, 1e12)
    return X, cost
