"""Truncated multivariate jet algebra.

A ``JetMap`` stores the Taylor coefficients, up to a fixed total degree
``order``, of a smooth map from ``R^source_dim`` to ``R^target_dim`` anchored
at the origin.  Coefficients are kept densely, one real ``target_dim``-vector
per multi-index ``I`` with ``|I| <= order``, so that the coefficient of
``y^I`` in component ``c`` is ``coefficients[row(I), c]``.  Multi-indices are
enumerated by total degree and, within a degree, lexicographically with the
first variable's exponent decreasing; this enumeration is the wire order used
by the report serialization.

The operations below implement the group-like calculus of such jets:
truncated composition, degree-by-degree inversion, order truncation,
polynomial evaluation and translation conjugation.  Jets with equal source
and target dimension, zero constant term and invertible linear part
(``DiffeoJet``) are closed under composition and inversion up to truncation,
and every holonomy computation in this package reduces to arithmetic in that
group.

All values are immutable after construction and every operation is pure.
"""

from __future__ import annotations

import math
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

DEFAULT_TOL = 1e-9
SINGULARITY_THRESHOLD = 1e-12
MAX_ORDER = 128


class JetError(ValueError):
    """Raised for malformed jets or incompatible jet operands."""


# ---------------------------------------------------------------------------
# multi-index bookkeeping


@lru_cache(maxsize=None)
def monomials(nvars: int, order: int) -> tuple[tuple[int, ...], ...]:
    """All exponent tuples with ``|I| <= order``, in the canonical order."""
    if nvars < 1:
        raise JetError(f"need at least one variable, got {nvars}")
    if order < 0:
        raise JetError(f"order must be >= 0, got {order}")
    out: list[tuple[int, ...]] = []
    for degree in range(order + 1):
        out.extend(_degree_monomials(nvars, degree))
    return tuple(out)


def _degree_monomials(nvars: int, degree: int) -> Iterable[tuple[int, ...]]:
    if nvars == 1:
        yield (degree,)
        return
    for lead in range(degree, -1, -1):
        for rest in _degree_monomials(nvars - 1, degree - lead):
            yield (lead,) + rest


@lru_cache(maxsize=None)
def monomial_index(nvars: int, order: int) -> dict[tuple[int, ...], int]:
    return {mono: i for i, mono in enumerate(monomials(nvars, order))}


def table_size(nvars: int, order: int) -> int:
    return math.comb(nvars + order, order)


@lru_cache(maxsize=None)
def _mul_table(nvars: int, order: int):
    """Index triples (ia, ib, iout) for truncated coefficient products."""
    mons = monomials(nvars, order)
    index = monomial_index(nvars, order)
    degs = [sum(m) for m in mons]
    triples = []
    for ia, ma in enumerate(mons):
        for ib, mb in enumerate(mons):
            if degs[ia] + degs[ib] > order:
                continue
            iout = index[tuple(a + b for a, b in zip(ma, mb))]
            triples.append((iout, ia, ib))
    triples.sort()
    arr = np.array(triples, dtype=np.intp)
    return arr[:, 1].copy(), arr[:, 2].copy(), arr[:, 0].copy()


def _series_mul(a: np.ndarray, b: np.ndarray, nvars: int, order: int) -> np.ndarray:
    if nvars == 1:
        return np.convolve(a, b)[: order + 1]
    ia, ib, iout = _mul_table(nvars, order)
    out = np.zeros(table_size(nvars, order))
    np.add.at(out, iout, a[ia] * b[ib])
    return out


# ---------------------------------------------------------------------------
# scalar truncated series (used by the expression evaluator)


class Series:
    """A scalar truncated power series in ``nvars`` variables.

    Supports ring arithmetic, division by series with nonzero constant term,
    integer powers and the entire functions sin, cos, exp.  All results are
    truncated at ``order``.
    """

    __slots__ = ("nvars", "order", "coeffs")

    def __init__(self, nvars: int, order: int, coeffs: np.ndarray):
        self.nvars = nvars
        self.order = order
        self.coeffs = np.asarray(coeffs, dtype=float)
        if self.coeffs.shape != (table_size(nvars, order),):
            raise JetError("series coefficient array has the wrong length")

    @classmethod
    def constant(cls, nvars: int, order: int, value: float) -> "Series":
        c = np.zeros(table_size(nvars, order))
        c[0] = value
        return cls(nvars, order, c)

    @classmethod
    def variable(cls, nvars: int, order: int, i: int, base: float = 0.0) -> "Series":
        """The series ``base + y_i``."""
        if order == 0:
            return cls.constant(nvars, order, base)
        c = np.zeros(table_size(nvars, order))
        c[0] = base
        unit = tuple(1 if j == i else 0 for j in range(nvars))
        c[monomial_index(nvars, order)[unit]] = 1.0
        return cls(nvars, order, c)

    def _like(self, coeffs: np.ndarray) -> "Series":
        return Series(self.nvars, self.order, coeffs)

    def _coerce(self, other) -> "Series":
        if isinstance(other, Series):
            if (other.nvars, other.order) != (self.nvars, self.order):
                raise JetError("series shape mismatch")
            return other
        return Series.constant(self.nvars, self.order, float(other))

    def __add__(self, other) -> "Series":
        return self._like(self.coeffs + self._coerce(other).coeffs)

    __radd__ = __add__

    def __neg__(self) -> "Series":
        return self._like(-self.coeffs)

    def __sub__(self, other) -> "Series":
        return self._like(self.coeffs - self._coerce(other).coeffs)

    def __rsub__(self, other) -> "Series":
        return (-self).__add__(other)

    def __mul__(self, other) -> "Series":
        o = self._coerce(other)
        return self._like(_series_mul(self.coeffs, o.coeffs, self.nvars, self.order))

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Series":
        return self * self._coerce(other).reciprocal()

    def __pow__(self, n: int) -> "Series":
        if not isinstance(n, int) or n < 0:
            raise JetError("series powers must be non-negative integers")
        result = Series.constant(self.nvars, self.order, 1.0)
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    def reciprocal(self) -> "Series":
        c0 = self.coeffs[0]
        if c0 == 0.0:
            raise ZeroDivisionError("division by a series with zero constant term")
        # Newton iteration doubles the correct order each step.
        r = Series.constant(self.nvars, self.order, 1.0 / c0)
        steps = max(1, (self.order).bit_length() + 1)
        for _ in range(steps):
            r = r * (2.0 - self * r)
        return r

    def _compose_entire(self, taylor_at_c: Sequence[float]) -> "Series":
        """Sum taylor_at_c[j] * u^j where u = self minus its constant term."""
        u = self._like(self.coeffs.copy())
        u.coeffs[0] = 0.0
        acc = Series.constant(self.nvars, self.order, taylor_at_c[0])
        upow = Series.constant(self.nvars, self.order, 1.0)
        for j in range(1, self.order + 1):
            upow = upow * u
            acc = acc + taylor_at_c[j] * upow
        return acc

    def exp(self) -> "Series":
        c = self.coeffs[0]
        ec = math.exp(c)
        coeffs = [ec / math.factorial(j) for j in range(self.order + 1)]
        return self._compose_entire(coeffs)

    def sin(self) -> "Series":
        c = self.coeffs[0]
        sc, cc = math.sin(c), math.cos(c)
        cycle = [sc, cc, -sc, -cc]
        coeffs = [cycle[j % 4] / math.factorial(j) for j in range(self.order + 1)]
        return self._compose_entire(coeffs)

    def cos(self) -> "Series":
        c = self.coeffs[0]
        sc, cc = math.sin(c), math.cos(c)
        cycle = [cc, -sc, -cc, sc]
        coeffs = [cycle[j % 4] / math.factorial(j) for j in range(self.order + 1)]
        return self._compose_entire(coeffs)


# ---------------------------------------------------------------------------
# jet maps


class JetMap:
    """Truncated Taylor data of a map ``R^source_dim -> R^target_dim`` at 0."""

    __slots__ = ("source_dim", "target_dim", "order", "coefficients")

    def __init__(self, source_dim: int, target_dim: int, order: int,
                 coefficients: np.ndarray):
        if source_dim < 1 or target_dim < 1:
            raise JetError("jet dimensions must be positive")
        if order < 0 or order > MAX_ORDER:
            raise JetError(f"jet order must lie in 0..{MAX_ORDER}")
        coeffs = np.array(coefficients, dtype=float)
        expected = (table_size(source_dim, order), target_dim)
        if coeffs.shape != expected:
            raise JetError(
                f"coefficient table has shape {coeffs.shape}, expected {expected}")
        if not np.all(np.isfinite(coeffs)):
            raise JetError("jet coefficients must be finite")
        coeffs.flags.writeable = False
        self.source_dim = source_dim
        self.target_dim = target_dim
        self.order = order
        self.coefficients = coeffs

    def __repr__(self) -> str:
        return (f"JetMap(q={self.source_dim}, m={self.target_dim}, "
                f"k={self.order})")

    def coefficient(self, index: tuple[int, ...]) -> np.ndarray:
        row = monomial_index(self.source_dim, self.order)[tuple(index)]
        return self.coefficients[row]

    @property
    def constant_term(self) -> np.ndarray:
        return self.coefficients[0]

    @property
    def linear_part(self) -> np.ndarray:
        """The ``target_dim x source_dim`` matrix of first-order coefficients."""
        if self.order < 1:
            return np.zeros((self.target_dim, self.source_dim))
        return self.coefficients[1:1 + self.source_dim].T

    def component(self, c: int) -> np.ndarray:
        return self.coefficients[:, c]

    def to_wire(self) -> dict:
        """Serialization used by configuration files and reports."""
        return {
            "source_dim": self.source_dim,
            "target_dim": self.target_dim,
            "order": self.order,
            "coefficients": [list(row) for row in self.coefficients],
        }

    @classmethod
    def from_wire(cls, data: dict) -> "JetMap":
        return cls(data["source_dim"], data["target_dim"], data["order"],
                   np.array(data["coefficients"], dtype=float))

    @classmethod
    def from_columns(cls, source_dim: int, order: int,
                     columns: Sequence[Series]) -> "JetMap":
        coeffs = np.stack([s.coeffs for s in columns], axis=1)
        return cls(source_dim, len(columns), order, coeffs)

    def column_series(self) -> list[Series]:
        return [Series(self.source_dim, self.order, self.coefficients[:, c].copy())
                for c in range(self.target_dim)]


class DiffeoJet(JetMap):
    """A JetMap with q = m, zero constant term and invertible linear part."""

    def __init__(self, source_dim: int, target_dim: int, order: int,
                 coefficients: np.ndarray,
                 det_threshold: float = SINGULARITY_THRESHOLD):
        super().__init__(source_dim, target_dim, order, coefficients)
        if source_dim != target_dim:
            raise JetError("a diffeomorphism jet needs equal dimensions")
        if np.any(self.constant_term != 0.0):
            raise JetError("a diffeomorphism jet must fix the origin")
        if order < 1:
            return
        det = np.linalg.det(self.linear_part)
        if abs(det) <= det_threshold:
            raise JetError(
                f"linear part is numerically singular (|det|={abs(det):.3e})")


def as_diffeo(jet: JetMap,
              det_threshold: float = SINGULARITY_THRESHOLD) -> DiffeoJet:
    if isinstance(jet, DiffeoJet):
        return jet
    return DiffeoJet(jet.source_dim, jet.target_dim, jet.order,
                     jet.coefficients, det_threshold)


def identity_jet(q: int, k: int) -> DiffeoJet:
    coeffs = np.zeros((table_size(q, k), q))
    if k >= 1:
        coeffs[1:1 + q] = np.eye(q)
    return DiffeoJet(q, q, k, coeffs)


def compose(f: JetMap, g: JetMap) -> JetMap:
    """The order-k jet of ``f o g``; ``g`` must have zero constant term."""
    if g.target_dim != f.source_dim:
        raise JetError(
            f"cannot compose: inner target dim {g.target_dim} != "
            f"outer source dim {f.source_dim}")
    if f.order != g.order:
        raise JetError(f"order mismatch: {f.order} != {g.order}")
    if np.any(g.constant_term != 0.0):
        raise JetError("inner jet must have zero constant term")
    k = f.order
    q = g.source_dim
    p = f.source_dim
    mons = monomials(p, k)
    index = monomial_index(p, k)
    tsize = table_size(q, k)
    # monomial_series[row(J)] holds the series of g^J over the source variables
    monomial_series = np.zeros((len(mons), tsize))
    monomial_series[0, 0] = 1.0
    for row, mono in enumerate(mons):
        if row == 0:
            continue
        i = next(j for j, e in enumerate(mono) if e > 0)
        prev = index[tuple(e - 1 if j == i else e for j, e in enumerate(mono))]
        monomial_series[row] = _series_mul(
            monomial_series[prev], g.coefficients[:, i], q, k)
    coeffs = monomial_series.T @ f.coefficients
    return JetMap(q, f.target_dim, k, coeffs)


def invert(f: JetMap, det_threshold: float = SINGULARITY_THRESHOLD) -> DiffeoJet:
    """The order-k jet ``g`` with ``compose(f, g) = identity`` up to order k.

    The linear part is inverted directly; higher coefficients are solved
    degree by degree against the inverted linear part.
    """
    f = as_diffeo(f, det_threshold)
    k = f.order
    q = f.source_dim
    if k == 0:
        return DiffeoJet(q, q, 0, np.zeros((1, q)))
    lin_inv = np.linalg.inv(f.linear_part)
    coeffs = np.zeros((table_size(q, k), q))
    if k >= 1:
        coeffs[1:1 + q] = lin_inv.T
    g = DiffeoJet(q, q, k, coeffs, det_threshold)
    if k <= 1:
        return g
    ident = identity_jet(q, k)
    mons = monomials(q, k)
    degs = np.array([sum(m) for m in mons])
    work = np.array(coeffs)
    for degree in range(2, k + 1):
        residual = compose(f, g).coefficients - ident.coefficients
        rows = degs == degree
        work[rows] = -residual[rows] @ lin_inv.T
        g = DiffeoJet(q, q, k, work, det_threshold)
    return g


def truncate(f: JetMap, l: int) -> JetMap:
    if l < 0 or l > f.order:
        raise JetError(f"cannot truncate an order-{f.order} jet to order {l}")
    rows = table_size(f.source_dim, l)
    out = JetMap(f.source_dim, f.target_dim, l, f.coefficients[:rows])
    if isinstance(f, DiffeoJet) and l >= 1:
        return as_diffeo(out)
    return out


def evaluate(f: JetMap, point: Sequence[float]) -> np.ndarray:
    """Polynomial evaluation sum_I coeff(I) * point^I."""
    pt = np.asarray(point, dtype=float)
    if pt.shape != (f.source_dim,):
        raise JetError(f"point has shape {pt.shape}, expected ({f.source_dim},)")
    mons = monomials(f.source_dim, f.order)
    values = np.empty(len(mons))
    index = monomial_index(f.source_dim, f.order)
    values[0] = 1.0
    for row, mono in enumerate(mons):
        if row == 0:
            continue
        i = next(j for j, e in enumerate(mono) if e > 0)
        prev = index[tuple(e - 1 if j == i else e for j, e in enumerate(mono))]
        values[row] = values[prev] * pt[i]
    return values @ f.coefficients


def jets_equal(f: JetMap, g: JetMap, tol: float = DEFAULT_TOL) -> bool:
    """Coefficient-wise comparison with combined absolute/relative scaling."""
    if (f.source_dim, f.target_dim, f.order) != (g.source_dim, g.target_dim, g.order):
        raise JetError("cannot compare jets of different shapes")
    a, b = f.coefficients, g.coefficients
    scale = np.maximum(1.0, np.maximum(np.abs(a), np.abs(b)))
    return bool(np.all(np.abs(a - b) <= tol * scale))


def substitute(f: JetMap, args: Sequence[Series]) -> list[Series]:
    """Evaluate the polynomial of ``f`` over series arguments.

    Unlike ``compose`` the arguments may have nonzero constant terms, so the
    result is a plain polynomial substitution truncated at the arguments'
    order.  Returns one series per target component.
    """
    if len(args) != f.source_dim:
        raise JetError(f"expected {f.source_dim} argument series, got {len(args)}")
    nvars = args[0].nvars
    order = args[0].order
    mons = monomials(f.source_dim, f.order)
    index = monomial_index(f.source_dim, f.order)
    tsize = table_size(nvars, order)
    monomial_series = np.zeros((len(mons), tsize))
    monomial_series[0, 0] = 1.0
    for row, mono in enumerate(mons):
        if row == 0:
            continue
        i = next(j for j, e in enumerate(mono) if e > 0)
        prev = index[tuple(e - 1 if j == i else e for j, e in enumerate(mono))]
        monomial_series[row] = _series_mul(
            monomial_series[prev], args[i].coeffs, nvars, order)
    out = monomial_series.T @ f.coefficients
    return [Series(nvars, order, out[:, c]) for c in range(f.target_dim)]


def translate_conjugate(f: JetMap, source_shift: Sequence[float],
                        target_shift: Sequence[float], k: int) -> JetMap:
    """The k-jet at 0 of ``x -> f(x + source_shift) - target_shift``."""
    s = np.asarray(source_shift, dtype=float)
    t = np.asarray(target_shift, dtype=float)
    if s.shape != (f.source_dim,) or t.shape != (f.target_dim,):
        raise JetError("shift dimensions do not match the jet")
    # The full polynomial of f must be substituted even when k < f.order:
    # translation mixes high-degree coefficients into low-degree ones.
    args = [Series.variable(f.source_dim, k, i, base=s[i])
            for i in range(f.source_dim)]
    cols = substitute(f, args)
    coeffs = np.stack([c.coeffs for c in cols], axis=1)
    coeffs[0] -= t
    return JetMap(f.source_dim, f.target_dim, k, coeffs)
