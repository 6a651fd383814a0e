"""Fiber component counting for planar scalar maps.

For f: R^2 -> R, extracts the level curve {f = t} clipped to the box
[-L, L]^2 by marching squares on a regular grid, then counts connected
components of the extracted segments with union-find.  Component counting is
the coarsest fibration invariant: a jump in the count between nearby target
values witnesses an atypical value between them.  Arcs clipped by the box
boundary count as one component each; claims are always about the clipped
curve, never extrapolated to the whole plane.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .polymap import PolyMap
from .sampling import ScanConfig


class DegenerateMapError(ValueError):
    """Raised when the map has no level curves to extract (constant component)."""


def _grid_values(pm: PolyMap, L: float, res: int) -> np.ndarray:
    xs = np.linspace(-L, L, res + 1)
    out = np.empty((res + 1, res + 1))
    # evaluate in row blocks to bound the powers-table memory
    block = max(1, 2_000_000 // (res + 1))
    for lo in range(0, res + 1, block):
        hi = min(lo + block, res + 1)
        XX, YY = np.meshgrid(xs[lo:hi], xs, indexing="ij")
        pts = np.column_stack([XX.ravel(), YY.ravel()])
        out[lo:hi, :] = pm.eval_batch(pts)[:, 0].reshape(hi - lo, res + 1)
    return out


class _UnionFind:
    def __init__(self, size: int):
        self.parent = np.arange(size, dtype=np.int64)

    def find(self, a: int) -> int:
        p = self.parent
        while p[a] != a:
            p[a] = p[p[a]]
            a = p[a]
        return a

    def union(self, a: int, b: int):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def fiber_components_2d(pm: PolyMap, t: float, L: float, res: int) -> int:
    """Number of connected components of {f = t} clipped to [-L, L]^2.

    Marching squares on a (res x res)-cell grid; grid values equal to t count
    as positive, and saddle cells are disambiguated by the cell-center value.
    """
    if pm.n != 2 or pm.p != 1:
        raise ValueError("fiber probing supports n=2, p=1 maps only")
    if res < 64:
        raise ValueError("resolution must be at least 64 cells per axis")
    if L <= 0:
        raise ValueError("box half-width must be positive")
    deg = pm.components[0].degree
    if deg is None or deg < 1:
        raise DegenerateMapError("component polynomial is constant")

    V = _grid_values(pm, L, res) - t
    S = V >= 0  # zeros count as positive

    m = res + 1
    # horizontal edge (ix, iy): nodes (ix, iy)-(ix+1, iy); vertical: (ix, iy)-(ix, iy+1)
    h_cross = S[:-1, :] != S[1:, :]  # (res, m)
    v_cross = S[:, :-1] != S[:, 1:]  # (m, res)
    n_h = res * m

    def h_id(ix: int, iy: int) -> int:
        return ix * m + iy

    def v_id(ix: int, iy: int) -> int:
        return n_h + ix * res + iy

    uf = _UnionFind(n_h + m * res)
    any_edge = np.zeros(n_h + m * res, dtype=bool)

    # cells where some corner differs in sign
    cell_mix = h_cross[:, :-1] | h_cross[:, 1:] | v_cross[:-1, :] | v_cross[1:, :]
    cells = np.argwhere(cell_mix)
    saddle_centers: dict[tuple[int, int], bool] = {}
    if len(cells):
        # precompute center signs only for potential saddles
        s00 = S[cells[:, 0], cells[:, 1]]
        s10 = S[cells[:, 0] + 1, cells[:, 1]]
        s01 = S[cells[:, 0], cells[:, 1] + 1]
        s11 = S[cells[:, 0] + 1, cells[:, 1] + 1]
        saddle_mask = (s00 == s11) & (s10 == s01) & (s00 != s10)
        saddles = cells[saddle_mask]
        if len(saddles):
            xs = np.linspace(-L, L, m)
            cx = 0.5 * (xs[saddles[:, 0]] + xs[saddles[:, 0] + 1])
            cy = 0.5 * (xs[saddles[:, 1]] + xs[saddles[:, 1] + 1])
            centers = pm.eval_batch(np.column_stack([cx, cy]))[:, 0] - t
            for (ix, iy), c in zip(map(tuple, saddles), centers):
                saddle_centers[(ix, iy)] = c >= 0

    for ix, iy in cells:
        bottom = h_cross[ix, iy]
        top = h_cross[ix, iy + 1]
        left = v_cross[ix, iy]
        right = v_cross[ix + 1, iy]
        ids = []
        if bottom:
            ids.append(h_id(ix, iy))
        if right:
            ids.append(v_id(ix + 1, iy))
        if top:
            ids.append(h_id(ix, iy + 1))
        if left:
            ids.append(v_id(ix, iy))
        for e in ids:
            any_edge[e] = True
        if len(ids) == 2:
            uf.union(ids[0], ids[1])
        elif len(ids) == 4:
            # saddle: pair crossings so the diagonal corner pair indicated by
            # the center sign stays connected
            center_pos = saddle_centers[(int(ix), int(iy))]
            s00 = S[ix, iy]
            if center_pos == s00:
                # segments isolate the (ix+1, iy) and (ix, iy+1) corners
                uf.union(h_id(ix, iy), v_id(ix + 1, iy))
                uf.union(h_id(ix, iy + 1), v_id(ix, iy))
            else:
                uf.union(h_id(ix, iy), v_id(ix, iy))
                uf.union(h_id(ix, iy + 1), v_id(ix + 1, iy))

    live = np.flatnonzero(any_edge)
    roots = {uf.find(int(e)) for e in live}
    return len(roots)


@dataclass(frozen=True)
class FiberCensus:
    """Component counts over a grid of target values on one shared box."""

    t_grid: tuple[float, ...]
    box: float
    resolution: int
    counts: tuple[int, ...]
    jumps: tuple[tuple[float, float, int, int], ...]

    def witnessed(self, candidate: float) -> bool:
        """True when a count jump brackets the candidate value."""
        return any(lo <= candidate <= hi for lo, hi, _, _ in self.jumps)


_DEFAULT_BACKGROUND = (-1.0, -0.5, 0.5, 1.0)


def atypical_witness(
    pm: PolyMap,
    candidate_values: Sequence[float],
    cfg: ScanConfig | None = None,
    *,
    L: float = 20.0,
    res: int = 1000,
    background: Sequence[float] | None = None,
) -> FiberCensus:
    """Census of fiber component counts refined around each candidate value.

    Each candidate contributes five grid points within +-0.1 of itself on top
    of the background grid; a candidate is witnessed atypical when a count
    jump brackets it.
    """
    del cfg  # reserved for future radius-aware boxes; censuses are box-explicit
    grid = set(background if background is not None else _DEFAULT_BACKGROUND)
    for c in candidate_values:
        grid.update((c - 0.1, c - 0.05, c, c + 0.05, c + 0.1))
    ts = tuple(sorted(float(v) for v in grid))
    counts = tuple(fiber_components_2d(pm, t, L, res) for t in ts)
    jumps = tuple(
        (ts[i], ts[i + 1], counts[i], counts[i + 1])
        for i in range(len(ts) - 1)
        if counts[i] != counts[i + 1]
    )
    return FiberCensus(t_grid=ts, box=L, resolution=res, counts=counts, jumps=jumps)
