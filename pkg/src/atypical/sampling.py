"""Scan configuration, value clustering, and low-discrepancy sampling.

Shared by the sphere-sweep scanners and the singular-locus estimator.  All
randomness flows from the single 64-bit seed in :class:`ScanConfig` through
scrambled Sobol streams, so identical configurations reproduce identical
samples regardless of how the work is scheduled.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict
from typing import Sequence

import numpy as np
from scipy.stats import qmc, norm


class ConfigError(ValueError):
    """Raised for invalid scan configurations or command options."""


@dataclass(frozen=True)
class ScanConfig:
    """Knobs for the structured sampling at infinity.

    radii_start/factor/count give the geometric radius schedule; n_dirs is the
    number of sweep directions per radius; delta is the Malgrange acceptance
    level; eps_res and eps_sing accept Milnor-residual and singular-locus
    hits; cluster_tol merges nearby values; opt_budget caps local-descent
    iterations per start; decay_slope is the log-log slope below which an
    indicator counts as tending to zero; value_window bounds the box of
    target values scanned (half-width per coordinate).
    """

    radii_start: float = 1e2
    radii_factor: float = 10.0
    radii_count: int = 5
    n_dirs: int = 512
    seed: int = 0
    delta: float = 1e-2
    eps_res: float = 1e-6
    eps_sing: float = 1e-10
    cluster_tol: float = 1e-2
    opt_budget: int = 200
    decay_slope: float = -0.2
    value_window: float = 10.0

    def __post_init__(self):
        if self.radii_start <= 0 or self.radii_factor <= 1 or self.radii_count < 1:
            raise ConfigError("radii schedule must be positive and increasing")
        for name in ("delta", "eps_res", "eps_sing", "cluster_tol", "value_window"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.n_dirs < 2:
            raise ConfigError("n_dirs must be at least 2")
        if self.opt_budget < 1:
            raise ConfigError("opt_budget must be at least 1")
        if self.decay_slope >= 0:
            raise ConfigError("decay_slope must be negative")

    @property
    def radii(self) -> tuple[float, ...]:
        return tuple(self.radii_start * self.radii_factor ** k for k in range(self.radii_count))

    def check_map(self, n: int):
        if self.n_dirs < 2 * n:
            raise ConfigError(f"n_dirs={self.n_dirs} must be >= 2n = {2 * n}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Witness:
    """A sample point supporting a cluster."""

    point: tuple[float, ...]
    radius: float
    indicator: float


@dataclass(frozen=True)
class ValueCluster:
    """An estimated asymptotic value with its supporting evidence.

    kind is 'kos', 'milnor', or 'singular'.  decay_trace lists
    (radius, minimum indicator) pairs over the radii where the cluster has
    samples; trace_nonincreasing records honestly whether that trace never
    increases.
    """

    value: tuple[float, ...]
    kind: str
    witnesses: tuple[Witness, ...] = field(default_factory=tuple)
    decay_trace: tuple[tuple[float, float], ...] = field(default_factory=tuple)
    trace_nonincreasing: bool = True


def cluster_values(samples: Sequence[tuple[Sequence[float], float]], tol: float):
    """Single-linkage clustering of weighted value vectors with merge radius tol.

    Two samples at distance exactly tol merge (closed-ball convention).  The
    input is sorted lexicographically first so the result is deterministic.
    Returns a list of (centroid, member_indices) where centroid is the
    weighted mean and the indices point back into the input sequence.
    """
    if tol <= 0:
        raise ConfigError("cluster tolerance must be positive")
    pts = [(tuple(float(v) for v in vec), float(w), i) for i, (vec, w) in enumerate(samples)]
    pts.sort(key=lambda s: s[0])
    m = len(pts)
    if m == 0:
        return []
    coords = np.array([s[0] for s in pts])
    weights = np.array([s[1] for s in pts])
    parent = list(range(m))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    # pairwise merge; m stays small (thousands), chunk the distance matrix
    chunk = 1024
    for lo in range(0, m, chunk):
        hi = min(lo + chunk, m)
        d = np.linalg.norm(coords[lo:hi, None, :] - coords[None, :, :], axis=2)
        close = np.argwhere(d <= tol)
        for a, b in close:
            ra, rb = find(lo + int(a)), find(int(b))
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
    groups: dict[int, list[int]] = {}
    for i in range(m):
        groups.setdefault(find(i), []).append(i)
    out = []
    for root in sorted(groups):
        idx = groups[root]
        w = weights[idx]
        wsum = float(w.sum())
        if wsum == 0:
            centroid = coords[idx].mean(axis=0)
        else:
            centroid = (coords[idx] * w[:, None]).sum(axis=0) / wsum
        out.append((tuple(float(v) for v in centroid), [pts[i][2] for i in idx]))
    return out


# ---------------------------------------------------------------------------
# Low-discrepancy streams


def sobol_unit(count: int, dim: int, seed: int) -> np.ndarray:
    """Scrambled Sobol points in the open unit cube, deterministic per seed."""
    eng = qmc.Sobol(d=dim, scramble=True, seed=seed)
    # draw a power-of-two block to keep the balance properties (and silence
    # the library's warning), then truncate
    m = max(1, int(np.ceil(np.log2(max(count, 2)))))
    pts = eng.random_base2(m)[:count]
    return np.clip(pts, 1e-12, 1 - 1e-12)


def sphere_directions(count: int, dim: int, seed: int) -> np.ndarray:
    """Low-discrepancy unit directions on S^{dim-1}."""
    if dim == 1:
        signs = np.where(np.arange(count) % 2 == 0, 1.0, -1.0)
        return signs.reshape(-1, 1)
    raw = norm.ppf(sobol_unit(count, dim, seed))
    nrm = np.linalg.norm(raw, axis=1)
    nrm[nrm == 0] = 1.0
    return raw / nrm[:, None]


def window_anchors(count: int, dim: int, half_width: float, seed: int) -> np.ndarray:
    """Low-discrepancy target values filling the box [-w, w]^dim."""
    pts = sobol_unit(count, dim, seed)
    return (2.0 * pts - 1.0) * half_width


def fit_loglog_slope(radii: Sequence[float], values: Sequence[float]) -> float:
    """Least-squares slope of log(value) against log(radius).

    Zero or negative values are clamped to a tiny floor, so exactly vanishing
    traces come out steeply negative rather than NaN.
    """
    r = np.asarray(radii, dtype=float)
    v = np.maximum(np.asarray(values, dtype=float), 1e-300)
    if len(r) < 2:
        return 0.0
    return float(np.polyfit(np.log(r), np.log(v), 1)[0])
