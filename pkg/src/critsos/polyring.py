"""Exact sparse multivariate polynomials over the rationals.

A :class:`Polynomial` maps exponent tuples to :class:`fractions.Fraction`
coefficients.  Values are immutable; every operation returns a new object.
Iteration and printing follow graded reverse-lexicographic order, highest
term first.
"""

from __future__ import annotations

import itertools
import math
import numbers
from fractions import Fraction
from typing import Iterable, Iterator, Mapping, Sequence

Monomial = tuple  # tuple[int, ...] of length n


def grevlex_key(mono: Monomial) -> tuple:
    """Sort key; larger key means larger monomial in grevlex order."""
    return (sum(mono), tuple(-a for a in reversed(mono)))


def _as_fraction(c) -> Fraction:
    if isinstance(c, Fraction):
        return c
    if isinstance(c, (int, numbers.Integral)):
        return Fraction(int(c))
    if isinstance(c, float):
        if not math.isfinite(c):
            raise ValueError(f"non-finite coefficient {c!r}")
        return Fraction(c)
    if isinstance(c, str):
        return Fraction(c)
    if isinstance(c, numbers.Rational):
        return Fraction(c.numerator, c.denominator)
    if isinstance(c, numbers.Real):
        return Fraction(float(c))
    raise TypeError(f"cannot use {type(c).__name__} as a coefficient")


class Polynomial:
    """Immutable sparse polynomial in ``n`` variables with rational coefficients."""

    __slots__ = ("_terms", "_n", "_hash")

    def __init__(self, terms: Mapping[Monomial, object] | None = None, n: int | None = None):
        if n is None:
            if not terms:
                raise ValueError("variable count required for an empty polynomial")
            n = len(next(iter(terms)))
        clean = {}
        for mono, c in (terms or {}).items():
            mono = tuple(int(a) for a in mono)
            if len(mono) != n:
                raise ValueError(f"monomial {mono} does not have length {n}")
            if any(a < 0 for a in mono):
                raise ValueError(f"negative exponent in {mono}")
            c = _as_fraction(c)
            if c:
                clean[mono] = clean.get(mono, 0) + c
                if not clean[mono]:
                    del clean[mono]
        self._terms = clean
        self._n = n
        self._hash = None

    @classmethod
    def _raw(cls, terms: dict, n: int) -> "Polynomial":
        # trusted constructor: keys valid, no zero coefficients
        p = object.__new__(cls)
        p._terms = terms
        p._n = n
        p._hash = None
        return p

    @classmethod
    def zero(cls, n: int) -> "Polynomial":
        return cls._raw({}, n)

    @classmethod
    def constant(cls, c, n: int) -> "Polynomial":
        c = _as_fraction(c)
        return cls._raw({(0,) * n: c} if c else {}, n)

    @classmethod
    def variable(cls, i: int, n: int) -> "Polynomial":
        if not 0 <= i < n:
            raise IndexError(f"variable index {i} out of range for n={n}")
        mono = tuple(1 if k == i else 0 for k in range(n))
        return cls._raw({mono: Fraction(1)}, n)

    @classmethod
    def monomial(cls, mono: Monomial, c=1) -> "Polynomial":
        return cls({tuple(mono): c}, len(mono))

    # -- basic accessors ---------------------------------------------------

    @property
    def n(self) -> int:
        return self._n

    @property
    def terms(self) -> dict:
        return dict(self._terms)

    def __len__(self) -> int:
        return len(self._terms)

    def __bool__(self) -> bool:
        return bool(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def is_constant(self) -> bool:
        return all(not any(m) for m in self._terms)

    def coeff(self, mono: Monomial) -> Fraction:
        return self._terms.get(tuple(mono), Fraction(0))

    def constant_term(self) -> Fraction:
        return self.coeff((0,) * self._n)

    def degree(self) -> int:
        """Total degree; -1 for the zero polynomial."""
        return max((sum(m) for m in self._terms), default=-1)

    def items(self) -> Iterator[tuple[Monomial, Fraction]]:
        """Terms in descending grevlex order."""
        for mono in sorted(self._terms, key=grevlex_key, reverse=True):
            yield mono, self._terms[mono]

    def leading_term(self) -> tuple[Monomial, Fraction]:
        if not self._terms:
            raise ValueError("zero polynomial has no leading term")
        mono = max(self._terms, key=grevlex_key)
        return mono, self._terms[mono]

    def norm_inf(self) -> Fraction:
        return max((abs(c) for c in self._terms.values()), default=Fraction(0))

    def norm_1(self) -> Fraction:
        return sum((abs(c) for c in self._terms.values()), Fraction(0))

    # -- arithmetic --------------------------------------------------------

    def _check(self, other: "Polynomial") -> None:
        if other._n != self._n:
            raise ValueError(f"variable count mismatch: {self._n} vs {other._n}")

    def _coerce(self, other) -> "Polynomial":
        if isinstance(other, Polynomial):
            self._check(other)
            return other
        return Polynomial.constant(other, self._n)

    def __add__(self, other) -> "Polynomial":
        other = self._coerce(other)
        out = dict(self._terms)
        for mono, c in other._terms.items():
            v = out.get(mono, 0) + c
            if v:
                out[mono] = v
            else:
                out.pop(mono, None)
        return Polynomial._raw(out, self._n)

    __radd__ = __add__

    def __neg__(self) -> "Polynomial":
        return Polynomial._raw({m: -c for m, c in self._terms.items()}, self._n)

    def __sub__(self, other) -> "Polynomial":
        return self + (-self._coerce(other))

    def __rsub__(self, other) -> "Polynomial":
        return self._coerce(other) - self

    def __mul__(self, other) -> "Polynomial":
        if not isinstance(other, Polynomial):
            return self.scale(other)
        self._check(other)
        out: dict = {}
        for m1, c1 in self._terms.items():
            for m2, c2 in other._terms.items():
                mono = tuple(a + b for a, b in zip(m1, m2))
                out[mono] = out.get(mono, 0) + c1 * c2
        return Polynomial._raw({m: c for m, c in out.items() if c}, self._n)

    def __rmul__(self, other) -> "Polynomial":
        return self.scale(other)

    def scale(self, c) -> "Polynomial":
        c = _as_fraction(c)
        if not c:
            return Polynomial.zero(self._n)
        return Polynomial._raw({m: v * c for m, v in self._terms.items()}, self._n)

    def __pow__(self, k: int) -> "Polynomial":
        if not isinstance(k, numbers.Integral) or k < 0:
            raise ValueError(f"exponent must be a non-negative integer, got {k!r}")
        result = Polynomial.constant(1, self._n)
        base = self
        while k:
            if k & 1:
                result = result * base
            k >>= 1
            if k:
                base = base * base
        return result

    def __eq__(self, other) -> bool:
        if isinstance(other, Polynomial):
            return self._n == other._n and self._terms == other._terms
        if isinstance(other, (numbers.Rational, float)):
            return self.is_constant() and self.constant_term() == other
        return NotImplemented

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((self._n, frozenset(self._terms.items())))
        return self._hash

    def diff(self, i: int) -> "Polynomial":
        """Formal partial derivative in variable ``i`` (0-based)."""
        if not 0 <= i < self._n:
            raise IndexError(f"variable index {i} out of range for n={self._n}")
        out = {}
        for mono, c in self._terms.items():
            a = mono[i]
            if a:
                out[mono[:i] + (a - 1,) + mono[i + 1:]] = c * a
        return Polynomial._raw(out, self._n)

    def gradient(self) -> list["Polynomial"]:
        return [self.diff(i) for i in range(self._n)]

    def __call__(self, point: Sequence):
        return evaluate(self, point)

    def map_coeffs(self, fn) -> "Polynomial":
        return Polynomial({m: fn(c) for m, c in self._terms.items()}, self._n)

    def exact_div(self, other: "Polynomial") -> "Polynomial":
        """Quotient of an exact division; raises ArithmeticError on a remainder."""
        self._check(other)
        if other.is_zero():
            raise ZeroDivisionError("division by the zero polynomial")
        lead_m, lead_c = other.leading_term()
        rem = dict(self._terms)
        quot = {}
        while rem:
            m = max(rem, key=grevlex_key)
            c = rem[m]
            shift = tuple(a - b for a, b in zip(m, lead_m))
            if any(s < 0 for s in shift):
                raise ArithmeticError("division is not exact")
            q = c / lead_c
            quot[shift] = q
            for om, oc in other._terms.items():
                mono = tuple(a + b for a, b in zip(om, shift))
                v = rem.get(mono, 0) - q * oc
                if v:
                    rem[mono] = v
                else:
                    rem.pop(mono, None)
        return Polynomial._raw(quot, self._n)

    # -- display -----------------------------------------------------------

    def to_string(self, names: Sequence[str] | None = None) -> str:
        names = list(names) if names is not None else default_names(self._n)
        if len(names) != self._n:
            raise ValueError("wrong number of variable names")
        if not self._terms:
            return "0"
        parts = []
        for k, (mono, c) in enumerate(self.items()):
            sign = "-" if c < 0 else "+"
            c = abs(c)
            factors = []
            for name, a in zip(names, mono):
                if a == 1:
                    factors.append(name)
                elif a > 1:
                    factors.append(f"{name}^{a}")
            if c != 1 or not factors:
                factors.insert(0, format_rational(c))
            body = "*".join(factors)
            if k == 0:
                parts.append(body if sign == "+" else "-" + body)
            else:
                parts.append(f" {sign} {body}")
        return "".join(parts)

    def __str__(self) -> str:
        return self.to_string()

    def __repr__(self) -> str:
        return f"Polynomial({self.to_string()!r}, n={self._n})"


def default_names(n: int) -> list[str]:
    if n <= 3:
        return ["x", "y", "z"][:n]
    return [f"x{i + 1}" for i in range(n)]


def format_rational(c: Fraction) -> str:
    """Shortest exact literal: integer, finite decimal, or ``p/q``."""
    c = Fraction(c)
    if c.denominator == 1:
        return str(c.numerator)
    den = c.denominator
    twos = fives = 0
    while den % 2 == 0:
        den //= 2
        twos += 1
    while den % 5 == 0:
        den //= 5
        fives += 1
    if den == 1:
        digits = max(twos, fives)
        if digits <= 64:
            scaled = abs(c.numerator) * (10**digits // c.denominator)
            whole, frac = divmod(scaled, 10**digits)
            frac_s = str(frac).rjust(digits, "0").rstrip("0")
            return ("-" if c < 0 else "") + f"{whole}.{frac_s}"
    return f"{c.numerator}/{c.denominator}"


# -- free functions mirroring the ring operations ---------------------------

def add(p: Polynomial, q: Polynomial) -> Polynomial:
    return p + q


def mul(p: Polynomial, q: Polynomial) -> Polynomial:
    return p * q


def scale(p: Polynomial, c) -> Polynomial:
    return p.scale(c)


def power(p: Polynomial, k: int) -> Polynomial:
    return p**k


def differentiate(p: Polynomial, i: int) -> Polynomial:
    return p.diff(i)


def evaluate(p: Polynomial, point: Sequence):
    """Evaluate ``p`` at ``point``.

    Exact (Fraction) when every coordinate is an int or rational, double
    precision as soon as any coordinate is a float.
    """
    point = list(point)
    if len(point) != p.n:
        raise ValueError(f"point has length {len(point)}, expected {p.n}")
    exact = all(isinstance(v, numbers.Rational) for v in point)
    if exact:
        vals = [Fraction(v) for v in point]
        total = Fraction(0)
        for mono, c in p._terms.items():
            term = c
            for v, a in zip(vals, mono):
                if a:
                    term *= v**a
            total += term
        return total
    vals = [float(v) for v in point]
    total = 0.0
    for mono, c in p._terms.items():
        term = float(c)
        for v, a in zip(vals, mono):
            if a:
                term *= v**a
        total += term
    return total


def monomials_up_to(n: int, d: int) -> list[Monomial]:
    """All exponent vectors of total degree <= d: graded, grevlex-descending within a degree."""
    out = []
    for deg in range(d + 1):
        layer = [
            m for m in itertools.product(range(deg + 1), repeat=n) if sum(m) == deg
        ]
        layer.sort(key=grevlex_key, reverse=True)
        out.extend(layer)
    return out


# -- polynomial matrices ------------------------------------------------------

class PolyMatrix:
    """Dense row-major matrix of polynomials sharing one variable count."""

    __slots__ = ("rows", "cols", "entries")

    def __init__(self, rows: int, cols: int, entries: Iterable[Polynomial]):
        entries = list(entries)
        if rows <= 0 or cols <= 0:
            raise ValueError("matrix dimensions must be positive")
        if len(entries) != rows * cols:
            raise ValueError(f"expected {rows * cols} entries, got {len(entries)}")
        ns = {e.n for e in entries}
        if len(ns) != 1:
            raise ValueError("entries must share a variable count")
        self.rows = rows
        self.cols = cols
        self.entries = tuple(entries)

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[Polynomial]]) -> "PolyMatrix":
        rows = [list(r) for r in rows]
        width = len(rows[0])
        if any(len(r) != width for r in rows):
            raise ValueError("ragged rows")
        return cls(len(rows), width, [e for r in rows for e in r])

    @property
    def n(self) -> int:
        return self.entries[0].n

    def __getitem__(self, ij: tuple[int, int]) -> Polynomial:
        i, j = ij
        return self.entries[i * self.cols + j]

    def row(self, i: int) -> list[Polynomial]:
        return list(self.entries[i * self.cols:(i + 1) * self.cols])

    def to_rows(self) -> list[list[Polynomial]]:
        return [self.row(i) for i in range(self.rows)]

    def transpose(self) -> "PolyMatrix":
        return PolyMatrix(
            self.cols, self.rows,
            [self[i, j] for j in range(self.cols) for i in range(self.rows)],
        )

    def __matmul__(self, other: "PolyMatrix") -> "PolyMatrix":
        if self.cols != other.rows:
            raise ValueError("inner dimensions do not agree")
        out = []
        for i in range(self.rows):
            for j in range(other.cols):
                acc = Polynomial.zero(self.n)
                for k in range(self.cols):
                    a, b = self[i, k], other[k, j]
                    if a and b:
                        acc = acc + a * b
                out.append(acc)
        return PolyMatrix(self.rows, other.cols, out)

    def gram(self) -> "PolyMatrix":
        """``M @ M.T``, computing each symmetric entry once."""
        n = self.n
        vals: dict = {}
        for i in range(self.rows):
            for j in range(i, self.rows):
                acc = Polynomial.zero(n)
                for k in range(self.cols):
                    a, b = self[i, k], self[j, k]
                    if a and b:
                        acc = acc + a * b
                vals[i, j] = vals[j, i] = acc
        return PolyMatrix(self.rows, self.rows,
                          [vals[i, j] for i in range(self.rows) for j in range(self.rows)])

    def __eq__(self, other) -> bool:
        return (isinstance(other, PolyMatrix) and self.rows == other.rows
                and self.cols == other.cols and self.entries == other.entries)

    def __repr__(self) -> str:
        body = "; ".join(", ".join(str(e) for e in self.row(i)) for i in range(self.rows))
        return f"PolyMatrix([{body}])"


def _det_cofactor(m: list[list[Polynomial]]) -> Polynomial:
    size = len(m)
    if size == 1:
        return m[0][0]
    if size == 2:
        return m[0][0] * m[1][1] - m[0][1] * m[1][0]
    n = m[0][0].n
    total = Polynomial.zero(n)
    for j, pivot in enumerate(m[0]):
        if not pivot:
            continue
        minor = [row[:j] + row[j + 1:] for row in m[1:]]
        term = pivot * _det_cofactor(minor)
        total = total + term if j % 2 == 0 else total - term
    return total


def _det_bareiss(m: list[list[Polynomial]]) -> Polynomial:
    a = [list(r) for r in m]
    size = len(a)
    n = a[0][0].n
    sign = 1
    prev = Polynomial.constant(1, n)
    for k in range(size - 1):
        if not a[k][k]:
            swap = next((r for r in range(k + 1, size) if a[r][k]), None)
            if swap is None:
                return Polynomial.zero(n)
            a[k], a[swap] = a[swap], a[k]
            sign = -sign
        for i in range(k + 1, size):
            for j in range(k + 1, size):
                num = a[i][j] * a[k][k] - a[i][k] * a[k][j]
                a[i][j] = num.exact_div(prev)
        prev = a[k][k]
    det = a[-1][-1]
    return det if sign > 0 else -det


def poly_matrix_det(M: PolyMatrix) -> Polynomial:
    """Exact determinant: cofactor expansion up to 4x4, Bareiss elimination above."""
    if M.rows != M.cols:
        raise ValueError(f"determinant of a non-square {M.rows}x{M.cols} matrix")
    rows = M.to_rows()
    if M.rows <= 4:
        return _det_cofactor(rows)
    return _det_bareiss(rows)
