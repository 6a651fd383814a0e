"""Exact multivariate polynomial maps and their charts at infinity.

Polynomials are stored sparsely with exact rational coefficients:

    Polynomial.terms = ((exponents, coefficient), ...)
    exponents = tuple of n_vars non-negative ints, coefficient = Fraction

The zero polynomial has an empty term tuple and its ``degree`` is ``None``
(a distinguished marker, never an integer sentinel).  Evaluation converts
the rational coefficients to binary floating point once per polynomial and
is vectorized over batches of points.

A ``PolyMap`` packages p component polynomials in n shared variables.  A
``ChartMap`` views a map near the hyperplane at infinity through the
projective chart ``x_j = 1/y_0``, optionally after an exact orthogonal
change of coordinates (a Householder reflection with rational entries).
Complex polynomial maps are carried by ``ComplexPolyMap`` and lowered to
real maps of twice the dimension by :func:`realify`.

Variable indices in the public operations are 1-based, matching the usual
mathematical numbering x_1, ..., x_n.
"""

from __future__ import annotations

import json
import hashlib
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

Exponents = tuple[int, ...]
Term = tuple[Exponents, Fraction]


class MapFileError(ValueError):
    """Raised when a map file cannot be parsed into a valid map."""


def _canonical_terms(n_vars: int, terms: Iterable[tuple[Sequence[int], Fraction]]) -> tuple[Term, ...]:
    acc: dict[Exponents, Fraction] = {}
    for exps, coeff in terms:
        e = tuple(int(v) for v in exps)
        if len(e) != n_vars:
            raise ValueError(f"exponent vector {e} has length {len(e)}, expected {n_vars}")
        if any(v < 0 for v in e):
            raise ValueError(f"negative exponent in {e}")
        acc[e] = acc.get(e, Fraction(0)) + Fraction(coeff)
    return tuple(sorted((e, c) for e, c in acc.items() if c != 0))


@dataclass(frozen=True)
class Polynomial:
    """Sparse exact polynomial in ``n_vars`` real variables."""

    n_vars: int
    terms: tuple[Term, ...]

    def __post_init__(self):
        if self.n_vars < 1:
            raise ValueError("n_vars must be >= 1")

    @classmethod
    def from_terms(cls, n_vars: int, terms: Iterable[tuple[Sequence[int], Fraction | int | str]]) -> "Polynomial":
        return cls(n_vars, _canonical_terms(n_vars, ((e, Fraction(c)) for e, c in terms)))

    @classmethod
    def zero(cls, n_vars: int) -> "Polynomial":
        return cls(n_vars, ())

    @classmethod
    def constant(cls, n_vars: int, c) -> "Polynomial":
        return cls.from_terms(n_vars, [((0,) * n_vars, Fraction(c))])

    @classmethod
    def variable(cls, n_vars: int, i: int) -> "Polynomial":
        """The monomial x_i (1-based index)."""
        if not 1 <= i <= n_vars:
            raise IndexError(f"variable index {i} out of range 1..{n_vars}")
        e = [0] * n_vars
        e[i - 1] = 1
        return cls.from_terms(n_vars, [(e, 1)])

    @property
    def degree(self) -> int | None:
        """Total degree, or None for the zero polynomial."""
        if not self.terms:
            return None
        return max(sum(e) for e, _ in self.terms)

    @property
    def is_zero(self) -> bool:
        return not self.terms

    def _require_same_vars(self, other: "Polynomial"):
        if self.n_vars != other.n_vars:
            raise ValueError("polynomials live in different variable counts")

    def __add__(self, other: "Polynomial") -> "Polynomial":
        self._require_same_vars(other)
        return Polynomial(self.n_vars, _canonical_terms(self.n_vars, list(self.terms) + list(other.terms)))

    def __sub__(self, other: "Polynomial") -> "Polynomial":
        return self + (-other)

    def __neg__(self) -> "Polynomial":
        return Polynomial(self.n_vars, tuple((e, -c) for e, c in self.terms))

    def scale(self, c) -> "Polynomial":
        c = Fraction(c)
        if c == 0:
            return Polynomial.zero(self.n_vars)
        return Polynomial(self.n_vars, tuple((e, c * coeff) for e, coeff in self.terms))

    def __mul__(self, other: "Polynomial") -> "Polynomial":
        self._require_same_vars(other)
        prods = []
        for e1, c1 in self.terms:
            for e2, c2 in other.terms:
                prods.append((tuple(a + b for a, b in zip(e1, e2)), c1 * c2))
        return Polynomial(self.n_vars, _canonical_terms(self.n_vars, prods))

    def diff(self, i: int) -> "Polynomial":
        """Formal partial derivative with respect to x_i (1-based)."""
        if not 1 <= i <= self.n_vars:
            raise IndexError(f"variable index {i} out of range 1..{self.n_vars}")
        j = i - 1
        out = []
        for e, c in self.terms:
            if e[j] == 0:
                continue
            e2 = list(e)
            e2[j] -= 1
            out.append((tuple(e2), c * e[j]))
        return Polynomial(self.n_vars, _canonical_terms(self.n_vars, out))

    @cached_property
    def _float_view(self) -> tuple[np.ndarray, np.ndarray]:
        # Coefficients converted to float64 exactly once; exponents as int array.
        if not self.terms:
            return np.zeros(0), np.zeros((0, self.n_vars), dtype=np.int64)
        coeffs = np.array([float(c) for _, c in self.terms])
        exps = np.array([e for e, _ in self.terms], dtype=np.int64)
        return coeffs, exps

    def eval(self, x: Sequence[float]) -> float:
        return float(self.eval_batch(np.asarray(x, dtype=float).reshape(1, -1))[0])

    def eval_batch(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_vars:
            raise ValueError(f"expected points of shape (N, {self.n_vars})")
        return _eval_polys_batch([self], X)[0]

    def __repr__(self):
        if not self.terms:
            return "Polynomial(0)"
        bits = []
        for e, c in self.terms:
            mono = "*".join(f"x{j + 1}^{k}" for j, k in enumerate(e) if k) or "1"
            bits.append(f"{c}*{mono}")
        return "Polynomial(" + " + ".join(bits) + ")"


def _eval_polys_batch(polys: Sequence[Polynomial], X: np.ndarray) -> list[np.ndarray]:
    """Evaluate several polynomials (same variables) at the same batch of points.

    Shares one table of per-variable powers across all polynomials, which is
    what makes the sweep loops affordable for the larger corpus maps.
    """
    N, n = X.shape
    max_deg = np.zeros(n, dtype=np.int64)
    views = []
    for p in polys:
        coeffs, exps = p._float_view
        views.append((coeffs, exps))
        if len(coeffs):
            max_deg = np.maximum(max_deg, exps.max(axis=0))
    # powers[j][:, d] = X[:, j] ** d
    powers = []
    for j in range(n):
        tab = np.empty((N, max_deg[j] + 1))
        tab[:, 0] = 1.0
        for d in range(1, max_deg[j] + 1):
            tab[:, d] = tab[:, d - 1] * X[:, j]
        powers.append(tab)
    out = []
    for coeffs, exps in views:
        if not len(coeffs):
            out.append(np.zeros(N))
            continue
        acc = powers[0][:, exps[:, 0]].copy()
        for j in range(1, n):
            acc *= powers[j][:, exps[:, j]]
        out.append(acc @ coeffs)
    return out


@dataclass(frozen=True)
class PolyMap:
    """Polynomial mapping R^n -> R^p given by p component polynomials."""

    name: str
    n: int
    p: int
    components: tuple[Polynomial, ...]

    def __post_init__(self):
        if self.p < 1 or self.n < 1:
            raise ValueError("need n >= 1 and p >= 1")
        if len(self.components) != self.p:
            raise ValueError("component count does not match p")
        for c in self.components:
            if c.n_vars != self.n:
                raise ValueError("component variable count does not match n")

    @classmethod
    def from_components(cls, name: str, n: int, components: Sequence[Polynomial]) -> "PolyMap":
        return cls(name, n, len(components), tuple(components))

    @cached_property
    def partials(self) -> tuple[tuple[Polynomial, ...], ...]:
        """partials[i][j] = d f_{i+1} / d x_{j+1}, exact."""
        return tuple(tuple(f.diff(j + 1) for j in range(self.n)) for f in self.components)

    @property
    def max_degree(self) -> int:
        degs = [f.degree for f in self.components if f.degree is not None]
        return max(degs) if degs else 0

    def eval(self, x: Sequence[float]) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n,):
            raise ValueError(f"expected point of length {self.n}, got shape {x.shape}")
        return self.eval_batch(x.reshape(1, -1))[0]

    def eval_batch(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n:
            raise ValueError(f"expected points of shape (N, {self.n})")
        cols = _eval_polys_batch(self.components, X)
        return np.stack(cols, axis=1)

    def jacobian_batch(self, X: np.ndarray) -> np.ndarray:
        """Df at each point of X, shape (N, p, n)."""
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n:
            raise ValueError(f"expected points of shape (N, {self.n})")
        flat = [self.partials[i][j] for i in range(self.p) for j in range(self.n)]
        vals = _eval_polys_batch(flat, X)
        out = np.empty((X.shape[0], self.p, self.n))
        k = 0
        for i in range(self.p):
            for j in range(self.n):
                out[:, i, j] = vals[k]
                k += 1
        return out


@dataclass(frozen=True, eq=False)
class JacobianEval:
    """Jacobian matrix of a map evaluated at one point (rows = gradients)."""

    point: tuple[float, ...]
    matrix: np.ndarray


def eval_map(pm: PolyMap, x: Sequence[float]) -> np.ndarray:
    """Evaluate the map at a point; exact coefficients, float arithmetic."""
    return pm.eval(x)


def partial(poly: Polynomial, i: int) -> Polynomial:
    """Exact formal partial derivative d poly / d x_i (1-based index)."""
    return poly.diff(i)


def jacobian_eval(pm: PolyMap, x: Sequence[float]) -> JacobianEval:
    """Evaluate Df(x); row i is the gradient of the i-th component."""
    x = np.asarray(x, dtype=float)
    if x.shape != (pm.n,):
        raise ValueError(f"expected point of length {pm.n}")
    mat = pm.jacobian_batch(x.reshape(1, -1))[0]
    return JacobianEval(point=tuple(float(v) for v in x), matrix=mat)


# ---------------------------------------------------------------------------
# Charts at infinity


def _identity_rational(n: int) -> tuple[tuple[Fraction, ...], ...]:
    return tuple(tuple(Fraction(int(i == j)) for j in range(n)) for i in range(n))


@dataclass(frozen=True)
class ChartMap:
    """View of a map in the projective chart where coordinate ``chart_index`` is large.

    Coordinates are first rotated by an exact orthogonal matrix Q (x' = Q x),
    then the chart sets x'_j = 1/y_0 and x'_i = y_k / y_0 for the remaining
    coordinates in ascending order.  Evaluation is only defined for y_0 != 0.
    """

    base: PolyMap
    chart_index: int = field(default=0)  # 0 means "last coordinate" sentinel resolved in __post_init__
    rotation: tuple[tuple[Fraction, ...], ...] | None = None

    def __post_init__(self):
        n = self.base.n
        j = self.chart_index if self.chart_index else n
        if not 1 <= j <= n:
            raise ValueError(f"chart_index {j} out of range 1..{n}")
        object.__setattr__(self, "chart_index", j)
        if self.rotation is None:
            object.__setattr__(self, "rotation", _identity_rational(n))
        R = self.rotation
        if len(R) != n or any(len(row) != n for row in R):
            raise ValueError("rotation must be n x n")
        # Exact orthogonality check: R R^T == I in rational arithmetic.
        for a in range(n):
            for b in range(n):
                s = sum(R[a][k] * R[b][k] for k in range(n))
                if s != (1 if a == b else 0):
                    raise ValueError("rotation matrix is not exactly orthogonal")

    @cached_property
    def rotation_float(self) -> np.ndarray:
        return np.array([[float(v) for v in row] for row in self.rotation])

    @cached_property
    def _other_axes(self) -> np.ndarray:
        # 0-based rotated-coordinate indices mapped to y_1..y_{n-1}, ascending.
        j = self.chart_index - 1
        return np.array([i for i in range(self.base.n) if i != j], dtype=np.int64)

    def points_from_chart(self, Y: np.ndarray) -> np.ndarray:
        """Affine points x for chart coordinates Y (batch, y_0 in column 0)."""
        Y = np.asarray(Y, dtype=float)
        squeeze = Y.ndim == 1
        if squeeze:
            Y = Y.reshape(1, -1)
        if Y.shape[1] != self.base.n:
            raise ValueError("chart coordinate vector has wrong length")
        y0 = Y[:, 0]
        if np.any(y0 == 0):
            raise ValueError("chart evaluation requires y_0 != 0")
        xr = np.empty_like(Y)
        j = self.chart_index - 1
        xr[:, j] = 1.0 / y0
        xr[:, self._other_axes] = Y[:, 1:] / y0[:, None]
        X = xr @ self.rotation_float  # x = Q^T x'  (row form)
        return X[0] if squeeze else X

    def chart_coords(self, X: np.ndarray) -> np.ndarray:
        """Chart coordinates y for affine points x (requires rotated x'_j != 0)."""
        X = np.asarray(X, dtype=float)
        squeeze = X.ndim == 1
        if squeeze:
            X = X.reshape(1, -1)
        xr = X @ self.rotation_float.T
        j = self.chart_index - 1
        xj = xr[:, j]
        if np.any(xj == 0):
            raise ValueError("point lies on the chart's coordinate hyperplane")
        Y = np.empty_like(X)
        Y[:, 0] = 1.0 / xj
        Y[:, 1:] = xr[:, self._other_axes] / xj[:, None]
        return Y[0] if squeeze else Y

    def eval_F(self, y: Sequence[float], t: Sequence[float]) -> np.ndarray:
        """Direct composition F(y, t) = f(x(y)) - t."""
        x = self.points_from_chart(np.asarray(y, dtype=float))
        return self.base.eval(x) - np.asarray(t, dtype=float)


def chart_partials(cm: ChartMap, y: Sequence[float], t: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    """Partial derivatives of the chart composition F(y, t) = f(x(y)) - t.

    Returns (dFdy, dFdt) with dFdy of shape (p, n) ordered (y_0, ..., y_{n-1})
    and dFdt = -I_p.  Uses the closed-form relations between dF/dy and the
    affine partials of f instead of symbolic rational functions:

        dF_l/dy_k = x'_j * dg_l/dx'_i(k)            k = 1..n-1
        dF_l/dy_0 = -x'_j * sum_i x'_i dg_l/dx'_i
        dF_l/dt_m = -delta_{l,m}

    where g = f after the rotation and x'_j = 1/y_0 is the chart coordinate.
    """
    y = np.asarray(y, dtype=float)
    t = np.asarray(t, dtype=float)
    pm = cm.base
    if y.shape != (pm.n,):
        raise ValueError(f"expected chart coordinates of length {pm.n}")
    if t.shape != (pm.p,):
        raise ValueError(f"expected target value of length {pm.p}")
    if y[0] == 0:
        raise ValueError("chart partials require y_0 != 0")
    x = cm.points_from_chart(y)
    Q = cm.rotation_float
    xr = Q @ x
    j = cm.chart_index - 1
    xj = xr[j]
    Df = pm.jacobian_batch(x.reshape(1, -1))[0]
    Dg = Df @ Q.T  # dg/dx'
    dFdy = np.empty((pm.p, pm.n))
    dFdy[:, 0] = -xj * (Dg @ xr)
    dFdy[:, 1:] = xj * Dg[:, cm._other_axes]
    dFdt = -np.eye(pm.p)
    return dFdy, dFdt


def _rationalize(v: float, sig: int = 12) -> Fraction:
    """Rational number matching v to ``sig`` significant decimal digits."""
    return Fraction(Decimal(f"{v:.{sig}g}"))


def householder_rotation(direction: Sequence[float]) -> tuple[tuple[Fraction, ...], ...]:
    """Exactly orthogonal rational reflection sending ``direction`` close to the last axis.

    The direction is normalized in floats, rationalized to 12 significant
    digits, and reflected through w = a + sign(a_n) e_n.  The result is exactly
    orthogonal for any rational w; only the axis alignment is approximate.
    """
    u = np.asarray(direction, dtype=float)
    nrm = float(np.linalg.norm(u))
    if nrm == 0:
        raise ValueError("direction must be nonzero")
    a = [_rationalize(v) for v in (u / nrm)]
    n = len(a)
    s = 1 if a[-1] >= 0 else -1
    w = list(a)
    w[-1] = w[-1] + s
    ww = sum(v * v for v in w)
    rows = []
    for i in range(n):
        row = []
        for j in range(n):
            val = Fraction(int(i == j)) - 2 * w[i] * w[j] / ww
            row.append(val)
        rows.append(tuple(row))
    return tuple(rows)


def chart_for_direction(pm: PolyMap, direction: Sequence[float]) -> ChartMap:
    """Chart at infinity aligned with an escape direction via a Householder rotation."""
    return ChartMap(base=pm, chart_index=pm.n, rotation=householder_rotation(direction))


# ---------------------------------------------------------------------------
# Complex maps and realification


@dataclass(frozen=True)
class ComplexPolyMap:
    """Polynomial map C^m -> C^q with Gaussian rational coefficients.

    Each component is stored as a pair (re, im) of rational-coefficient
    polynomials in the m complex variables treated formally.
    """

    name: str
    m: int
    q: int
    components: tuple[tuple[Polynomial, Polynomial], ...]

    def __post_init__(self):
        if self.m < 1 or self.q < 1:
            raise ValueError("need m >= 1 and q >= 1")
        if len(self.components) != self.q:
            raise ValueError("component count does not match q")
        for re, im in self.components:
            if re.n_vars != self.m or im.n_vars != self.m:
                raise ValueError("component variable count does not match m")

    def eval(self, z: Sequence[complex]) -> np.ndarray:
        """Evaluate with python complex arithmetic (test oracle for realify)."""
        z = np.asarray(z, dtype=complex)
        out = np.empty(self.q, dtype=complex)
        for i, (re, im) in enumerate(self.components):
            out[i] = complex(_eval_exact_complex(re, z)) + 1j * complex(_eval_exact_complex(im, z))
        return out


def _eval_exact_complex(poly: Polynomial, z: np.ndarray) -> complex:
    total = 0j
    for e, c in poly.terms:
        mono = 1 + 0j
        for zj, k in zip(z, e):
            mono *= zj ** k
        total += float(c) * mono
    return total


def realify(cmap: ComplexPolyMap) -> PolyMap:
    """Lower a complex map to the real map R^{2m} -> R^{2q} of its Re/Im parts.

    Variables interleave as (u_1, v_1, ..., u_m, v_m) with z_j = u_j + i v_j;
    components come out as (Re f_1, Im f_1, Re f_2, Im f_2, ...).
    """
    m = cmap.m
    n = 2 * m
    # z_j as a complex pair of real polynomials in the 2m real variables
    var_pairs = [
        (Polynomial.variable(n, 2 * j + 1), Polynomial.variable(n, 2 * j + 2))
        for j in range(m)
    ]

    def cmul(a: tuple[Polynomial, Polynomial], b: tuple[Polynomial, Polynomial]):
        return (a[0] * b[0] - a[1] * b[1], a[0] * b[1] + a[1] * b[0])

    def cpow(base: tuple[Polynomial, Polynomial], k: int):
        out = (Polynomial.constant(n, 1), Polynomial.zero(n))
        for _ in range(k):
            out = cmul(out, base)
        return out

    def lower_poly(re_part: Polynomial, im_part: Polynomial) -> tuple[Polynomial, Polynomial]:
        acc = (Polynomial.zero(n), Polynomial.zero(n))
        # coefficient (a + b i) with a from re_part, b from im_part, shared exponents
        coeff_map: dict[Exponents, tuple[Fraction, Fraction]] = {}
        for e, c in re_part.terms:
            coeff_map[e] = (c, Fraction(0))
        for e, c in im_part.terms:
            a, _ = coeff_map.get(e, (Fraction(0), Fraction(0)))
            coeff_map[e] = (a, c)
        for e, (a, b) in sorted(coeff_map.items()):
            mono = (Polynomial.constant(n, 1), Polynomial.zero(n))
            for j, k in enumerate(e):
                if k:
                    mono = cmul(mono, cpow(var_pairs[j], k))
            term = (mono[0].scale(a) - mono[1].scale(b), mono[1].scale(a) + mono[0].scale(b))
            acc = (acc[0] + term[0], acc[1] + term[1])
        return acc

    comps: list[Polynomial] = []
    for re_part, im_part in cmap.components:
        re_low, im_low = lower_poly(re_part, im_part)
        comps.append(re_low)
        comps.append(im_low)
    return PolyMap(name=cmap.name, n=n, p=2 * cmap.q, components=tuple(comps))


# ---------------------------------------------------------------------------
# Map files


def _parse_rational(text) -> Fraction:
    if isinstance(text, bool):
        raise MapFileError("coefficient must be a string or integer")
    if isinstance(text, int):
        return Fraction(text)
    if isinstance(text, float):
        raise MapFileError(
            f"floating-point coefficient {text!r} rejected; use a decimal or rational string"
        )
    if not isinstance(text, str):
        raise MapFileError(f"unparsable coefficient {text!r}")
    s = text.strip()
    try:
        if "/" in s:
            return Fraction(s)
        return Fraction(Decimal(s))
    except (ValueError, ZeroDivisionError, InvalidOperation) as exc:
        raise MapFileError(f"unparsable coefficient {text!r}: {exc}") from None


def _parse_gaussian(text) -> tuple[Fraction, Fraction]:
    """Parse 'a/b', 'c/di', or 'a/b+c/di' into (re, im)."""
    if isinstance(text, int):
        return Fraction(text), Fraction(0)
    if not isinstance(text, str):
        raise MapFileError(f"unparsable complex coefficient {text!r}")
    s = text.strip().replace(" ", "")
    if not s:
        raise MapFileError("empty coefficient")
    if not s.endswith("i"):
        return _parse_rational(s), Fraction(0)
    body = s[:-1]
    # split off a leading real part at the last top-level '+'/'-' (not the sign)
    split = -1
    for k in range(len(body) - 1, 0, -1):
        if body[k] in "+-" and body[k - 1] not in "eE/":
            split = k
            break
    if split > 0:
        re_part = _parse_rational(body[:split])
        im_text = body[split:]
    else:
        re_part = Fraction(0)
        im_text = body
    if im_text in ("", "+"):
        im_part = Fraction(1)
    elif im_text == "-":
        im_part = Fraction(-1)
    else:
        im_part = _parse_rational(im_text)
    return re_part, im_part


def parse_map(text: str) -> PolyMap | ComplexPolyMap:
    """Parse map-file JSON into a map with canonicalized terms.

    Real files produce a :class:`PolyMap`, complex files a
    :class:`ComplexPolyMap`.  Raises :class:`MapFileError` with a distinct
    diagnostic for malformed JSON, n <= p, inconsistent exponent lengths, or
    unparsable coefficients.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MapFileError(f"malformed JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise MapFileError("map file must be a JSON object")
    name = doc.get("name")
    if not isinstance(name, str) or not name:
        raise MapFileError("map file needs a non-empty string 'name'")
    space = doc.get("space")
    if space not in ("real", "complex"):
        raise MapFileError(f"unknown space {space!r}; expected 'real' or 'complex'")
    vars_ = doc.get("vars")
    if not isinstance(vars_, list) or not vars_ or not all(isinstance(v, str) for v in vars_):
        raise MapFileError("'vars' must be a non-empty list of strings")
    n = len(vars_)
    comps = doc.get("components")
    if not isinstance(comps, list) or not comps:
        raise MapFileError("'components' must be a non-empty list")
    p = len(comps)
    if n <= p:
        raise MapFileError(f"need more variables than components (n={n} <= p={p})")

    def read_terms(comp) -> list[tuple[tuple[int, ...], object]]:
        if not isinstance(comp, dict) or "terms" not in comp or not isinstance(comp["terms"], list):
            raise MapFileError("each component must be an object with a 'terms' list")
        out = []
        for term in comp["terms"]:
            if not isinstance(term, dict) or "c" not in term or "e" not in term:
                raise MapFileError("each term must carry 'c' and 'e'")
            e = term["e"]
            if (not isinstance(e, list) or len(e) != n
                    or not all(isinstance(v, int) and not isinstance(v, bool) and v >= 0 for v in e)):
                raise MapFileError(
                    f"exponent vector {e!r} inconsistent with {n} variables"
                )
            out.append((tuple(e), term["c"]))
        return out

    if space == "real":
        components = []
        for comp in comps:
            terms = [(e, _parse_rational(c)) for e, c in read_terms(comp)]
            components.append(Polynomial.from_terms(n, terms))
        return PolyMap(name=name, n=n, p=p, components=tuple(components))

    components_c = []
    for comp in comps:
        re_terms, im_terms = [], []
        for e, c in read_terms(comp):
            re_c, im_c = _parse_gaussian(c)
            if re_c:
                re_terms.append((e, re_c))
            if im_c:
                im_terms.append((e, im_c))
        components_c.append((Polynomial.from_terms(n, re_terms), Polynomial.from_terms(n, im_terms)))
    return ComplexPolyMap(name=name, m=n, q=p, components=tuple(components_c))


def _coeff_str(c: Fraction) -> str:
    return str(c)


def canonical_map_json(m: PolyMap | ComplexPolyMap) -> str:
    """Canonical serialization (sorted keys, normalized rationals, sorted terms)."""
    if isinstance(m, PolyMap):
        doc = {
            "name": m.name,
            "space": "real",
            "vars": [f"x{i + 1}" for i in range(m.n)],
            "components": [
                {"terms": [{"c": _coeff_str(c), "e": list(e)} for e, c in comp.terms]}
                for comp in m.components
            ],
        }
    else:
        def gauss_str(re_c: Fraction, im_c: Fraction) -> str:
            if im_c == 0:
                return _coeff_str(re_c)
            sign = "+" if im_c >= 0 else "-"
            return f"{_coeff_str(re_c)}{sign}{_coeff_str(abs(im_c))}i"

        comps = []
        for re_p, im_p in m.components:
            merged: dict[Exponents, tuple[Fraction, Fraction]] = {}
            for e, c in re_p.terms:
                merged[e] = (c, Fraction(0))
            for e, c in im_p.terms:
                a, _ = merged.get(e, (Fraction(0), Fraction(0)))
                merged[e] = (a, c)
            comps.append({
                "terms": [
                    {"c": gauss_str(a, b), "e": list(e)} for e, (a, b) in sorted(merged.items())
                ]
            })
        doc = {
            "name": m.name,
            "space": "complex",
            "vars": [f"z{i + 1}" for i in range(m.m)],
            "components": comps,
        }
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def map_hash(m: PolyMap | ComplexPolyMap) -> str:
    """SHA-256 of the canonical map serialization."""
    return hashlib.sha256(canonical_map_json(m).encode("utf-8")).hexdigest()
