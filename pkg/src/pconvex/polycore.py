"""Exact sparse multivariate polynomials over the rationals.

A :class:`Polynomial` maps exponent tuples to nonzero :class:`fractions.Fraction`
coefficients.  Derivatives are plain partial derivatives; the ``-i`` factors of
``D_j`` are dropped since only moduli of derivatives are ever used downstream.

Terms are kept in graded-lexicographic order (higher total degree first, then
lexicographically larger exponent first) so iteration and formatting are
reproducible.
"""

from __future__ import annotations

import math
import re
from fractions import Fraction
from numbers import Rational
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

__all__ = [
    "Polynomial",
    "ParseError",
    "DimensionMismatch",
    "parse",
    "evaluate",
    "derivative",
    "gradient",
    "taylor_shift",
    "principal_part",
    "power",
    "add",
    "mul",
    "augment",
    "is_homogeneous",
    "restrict",
    "restrict_line_integer",
    "shift_coefficients",
    "shift_integer_coefficients",
    "as_fraction",
    "as_fractions",
]


class ParseError(ValueError):
    """Malformed polynomial text; ``position`` is the 0-based character offset."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class DimensionMismatch(ValueError):
    pass


def as_fraction(value) -> Fraction:
    """Exact rational view of an int, Fraction, float or numeric string."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, Rational)):
        return Fraction(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError(f"non-finite coordinate {value!r}")
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value.strip())
    # numpy scalars and the like
    return Fraction(float(value))


def as_fractions(vector: Iterable) -> tuple[Fraction, ...]:
    return tuple(as_fraction(v) for v in vector)


def _grlex_key(alpha: tuple[int, ...]):
    return (-sum(alpha), tuple(-a for a in alpha))


class Polynomial:
    """Immutable sparse polynomial in ``dim`` variables ``x1..x{dim}``."""

    __slots__ = ("_dim", "_terms", "_hash")

    def __init__(self, dim: int, terms: Mapping[Sequence[int], object] | None = None):
        if int(dim) < 1:
            raise ValueError("dimension must be a positive integer")
        self._dim = int(dim)
        clean: dict[tuple[int, ...], Fraction] = {}
        for alpha, coef in (terms or {}).items():
            alpha = tuple(int(a) for a in alpha)
            if len(alpha) != self._dim:
                raise DimensionMismatch(
                    f"multi-index {alpha} has length {len(alpha)}, expected {self._dim}"
                )
            if any(a < 0 for a in alpha):
                raise ValueError(f"negative exponent in {alpha}")
            c = clean.get(alpha, Fraction(0)) + as_fraction(coef)
            clean[alpha] = c
        self._terms = {
            a: clean[a] for a in sorted(clean, key=_grlex_key) if clean[a] != 0
        }
        self._hash = None

    # -- constructors -------------------------------------------------------
    @classmethod
    def constant(cls, dim: int, value=1) -> "Polynomial":
        return cls(dim, {(0,) * dim: value})

    @classmethod
    def variable(cls, dim: int, index: int) -> "Polynomial":
        """The coordinate ``x{index}`` (1-based, as in the text grammar)."""
        if not 1 <= index <= dim:
            raise DimensionMismatch(f"variable x{index} outside dimension {dim}")
        alpha = [0] * dim
        alpha[index - 1] = 1
        return cls(dim, {tuple(alpha): 1})

    @classmethod
    def linear_form(cls, coefficients: Sequence) -> "Polynomial":
        dim = len(coefficients)
        terms = {}
        for j, c in enumerate(coefficients):
            alpha = [0] * dim
            alpha[j] = 1
            terms[tuple(alpha)] = c
        return cls(dim, terms)

    # -- basic properties ---------------------------------------------------
    @property
    def dim(self) -> int:
        return self._dim

    @property
    def terms(self) -> Mapping[tuple[int, ...], Fraction]:
        return MappingProxyType(self._terms)

    @property
    def degree(self) -> int:
        """Total degree; ``-1`` for the zero polynomial."""
        return max((sum(a) for a in self._terms), default=-1)

    def is_zero(self) -> bool:
        return not self._terms

    def coefficient(self, alpha: Sequence[int]) -> Fraction:
        return self._terms.get(tuple(alpha), Fraction(0))

    def coefficient_scale(self) -> Fraction:
        return max((abs(c) for c in self._terms.values()), default=Fraction(0))

    def __len__(self) -> int:
        return len(self._terms)

    def __iter__(self):
        return iter(self._terms.items())

    def __eq__(self, other) -> bool:
        if isinstance(other, Polynomial):
            return self._dim == other._dim and self._terms == other._terms
        if isinstance(other, (int, Fraction)):
            return self == Polynomial.constant(self._dim, other)
        return NotImplemented

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((self._dim, tuple(self._terms.items())))
        return self._hash

    def __repr__(self) -> str:
        return f"Polynomial({self._dim}, {self.format()!r})"

    def __str__(self) -> str:
        return self.format()

    # -- arithmetic ---------------------------------------------------------
    def _coerce(self, other) -> "Polynomial":
        if isinstance(other, Polynomial):
            if other._dim != self._dim:
                raise DimensionMismatch(
                    f"dimensions differ: {self._dim} vs {other._dim}"
                )
            return other
        if isinstance(other, (int, Fraction, float)):
            return Polynomial.constant(self._dim, other)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        terms = dict(self._terms)
        for a, c in other._terms.items():
            terms[a] = terms.get(a, 0) + c
        return Polynomial(self._dim, terms)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(self._dim, {a: -c for a, c in self._terms.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, Fraction, float)):
            c = as_fraction(other)
            return Polynomial(self._dim, {a: v * c for a, v in self._terms.items()})
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        terms: dict[tuple[int, ...], Fraction] = {}
        for a, ca in self._terms.items():
            for b, cb in other._terms.items():
                key = tuple(x + y for x, y in zip(a, b))
                terms[key] = terms.get(key, 0) + ca * cb
        return Polynomial(self._dim, terms)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, (int, Fraction)):
            return self * (Fraction(1) / Fraction(other))
        return NotImplemented

    def __pow__(self, k: int):
        if not isinstance(k, int) or k < 0:
            raise ValueError("exponent must be a nonnegative integer")
        result = Polynomial.constant(self._dim, 1)
        base = self
        while k:
            if k & 1:
                result = result * base
            k >>= 1
            if k:
                base = base * base
        return result

    # -- calculus -----------------------------------------------------------
    def __call__(self, point):
        return self.evaluate(point)

    def _check_point(self, point) -> tuple[Fraction, ...]:
        pt = as_fractions(point)
        if len(pt) != self._dim:
            raise DimensionMismatch(
                f"point has {len(pt)} coordinates, polynomial has dimension {self._dim}"
            )
        return pt

    def evaluate(self, point) -> Fraction:
        """Exact value at ``point`` (any mix of ints, Fractions, floats)."""
        pt = self._check_point(point)
        if not self._terms:
            return Fraction(0)
        deg = self.degree
        powers = [_powers(x, deg) for x in pt]
        total = Fraction(0)
        for alpha, c in self._terms.items():
            m = c
            for i, a in enumerate(alpha):
                if a:
                    m *= powers[i][a]
            total += m
        return total

    def derivative(self, alpha: Sequence[int]) -> "Polynomial":
        alpha = tuple(int(a) for a in alpha)
        if len(alpha) != self._dim:
            raise DimensionMismatch(
                f"multi-index {alpha} has length {len(alpha)}, expected {self._dim}"
            )
        if any(a < 0 for a in alpha):
            raise ValueError("multi-index entries must be nonnegative")
        terms = {}
        for beta, c in self._terms.items():
            if any(b < a for a, b in zip(alpha, beta)):
                continue
            factor = 1
            for a, b in zip(alpha, beta):
                factor *= math.perm(b, a)
            terms[tuple(b - a for a, b in zip(alpha, beta))] = c * factor
        return Polynomial(self._dim, terms)

    def gradient(self) -> list["Polynomial"]:
        out = []
        for j in range(self._dim):
            e = [0] * self._dim
            e[j] = 1
            out.append(self.derivative(e))
        return out

    def taylor_shift(self, xi) -> "Polynomial":
        """The polynomial ``x -> P(x + xi)``, computed exactly.

        The coefficient of ``x^alpha`` in the result is ``P^(alpha)(xi) / alpha!``.
        """
        return Polynomial(self._dim, shift_coefficients(self, xi))

    def principal_part(self) -> "Polynomial":
        if not self._terms:
            raise ValueError("the zero polynomial has no principal part")
        m = self.degree
        return Polynomial(self._dim, {a: c for a, c in self._terms.items() if sum(a) == m})

    def is_homogeneous(self) -> int | None:
        """Common degree of all terms, ``0`` for the zero polynomial, else ``None``."""
        degrees = {sum(a) for a in self._terms}
        if not degrees:
            return 0
        if len(degrees) == 1:
            return degrees.pop()
        return None

    def augment(self, extra: int = 1) -> "Polynomial":
        """Regard the polynomial in ``extra`` further variables it does not depend on."""
        if int(extra) < 1:
            raise ValueError("extra must be >= 1")
        pad = (0,) * int(extra)
        return Polynomial(self._dim + int(extra), {a + pad: c for a, c in self._terms.items()})

    # -- formatting ---------------------------------------------------------
    def format(self) -> str:
        if not self._terms:
            return "0"
        parts = []
        for n, (alpha, c) in enumerate(self._terms.items()):
            sign = "-" if c < 0 else "+"
            mag = abs(c)
            factors = []
            for i, a in enumerate(alpha):
                if a == 1:
                    factors.append(f"x{i + 1}")
                elif a > 1:
                    factors.append(f"x{i + 1}^{a}")
            if not factors:
                body = str(mag)
            elif mag == 1:
                body = "*".join(factors)
            else:
                body = f"{mag}*" + "*".join(factors)
            if n == 0:
                parts.append(body if sign == "+" else f"-{body}")
            else:
                parts.append(f"{sign} {body}")
        return " ".join(parts)


def _powers(x, deg: int) -> list:
    out = [Fraction(1)] if isinstance(x, Fraction) else [1]
    for _ in range(deg):
        out.append(out[-1] * x)
    return out


def _common_denominator(values: Iterable[Fraction]) -> int:
    den = 1
    for v in values:
        den = den * v.denominator // math.gcd(den, v.denominator)
    return den


def shift_integer_coefficients(p: Polynomial, xi) -> tuple[dict[tuple[int, ...], int], int]:
    """Taylor coefficients of ``P(. + xi)`` as integer numerators over one denominator.

    The shift is applied one variable at a time in integer arithmetic
    (``xi = n / D`` with a common ``D``); the result satisfies
    ``P^(alpha)(xi)/alpha! == numerators[alpha] / denominator``.
    """
    pt = p._check_point(xi)
    if not p._terms:
        return {}, 1
    big_d = _common_denominator(pt)
    nums = [int(x * big_d) for x in pt]
    big_l = _common_denominator(p._terms.values())
    cur: dict[tuple[int, ...], int] = {
        a: c.numerator * (big_l // c.denominator) for a, c in p._terms.items()
    }
    denom = big_l
    for i, n in enumerate(nums):
        if n == 0:
            continue
        top = max(a[i] for a in cur)
        if top == 0:
            continue
        npow = _powers(n, top)
        dpow = _powers(big_d, top)
        # weight[b][j] = C(b, j) n^(b-j) D^(top-(b-j))
        weight = [
            [math.comb(b, j) * npow[b - j] * dpow[top - b + j] for j in range(b + 1)]
            for b in range(top + 1)
        ]
        nxt: dict[tuple[int, ...], int] = {}
        for alpha, c in cur.items():
            b = alpha[i]
            head, tail = alpha[:i], alpha[i + 1:]
            wb = weight[b]
            for j in range(b + 1):
                key = head + (j,) + tail
                nxt[key] = nxt.get(key, 0) + c * wb[j]
        cur = nxt
        denom *= dpow[top]
    return {a: v for a, v in cur.items() if v}, denom


def shift_coefficients(p: Polynomial, xi) -> dict[tuple[int, ...], Fraction]:
    """Exact Taylor coefficients ``P^(alpha)(xi)/alpha!`` keyed by ``alpha``."""
    nums, den = shift_integer_coefficients(p, xi)
    return {a: Fraction(v, den) for a, v in nums.items()}


def restrict_line_integer(nums: Mapping[tuple[int, ...], int], den: int, y) -> tuple[dict[tuple[int], int], int]:
    """Integer form of ``s -> sum_alpha (nums[alpha]/den) (s*y)^alpha``."""
    yy = as_fractions(y)
    deg = max((sum(a) for a in nums), default=0)
    dy = _common_denominator(yy)
    ny = [int(c * dy) for c in yy]
    ypow = [_powers(c, deg) for c in ny]
    dpow = _powers(dy, deg)
    out: dict[tuple[int], int] = {}
    for alpha, c in nums.items():
        m = c
        for i, a in enumerate(alpha):
            if a:
                m *= ypow[i][a]
        j = sum(alpha)
        out[(j,)] = out.get((j,), 0) + m * dpow[deg - j]
    return {a: v for a, v in out.items() if v}, den * dpow[deg]


def restrict(p: Polynomial, basis: Sequence[Sequence]) -> Polynomial:
    """Exact pull-back ``s -> P(sum_j s_j b_j)`` onto the span of ``basis``.

    The result lives in ``len(basis)`` variables.  Basis entries may be floats;
    they are taken at their exact binary value.
    """
    k = len(basis)
    if k == 0:
        raise ValueError("restrict needs at least one basis vector")
    vecs = [as_fractions(b) for b in basis]
    for v in vecs:
        if len(v) != p.dim:
            raise DimensionMismatch("basis vector length differs from polynomial dimension")
    if k == 1:
        y = vecs[0]
        deg = max(p.degree, 0)
        ypow = [_powers(c, deg) for c in y]
        terms: dict[tuple[int, ...], Fraction] = {}
        for alpha, c in p._terms.items():
            m = c
            for i, a in enumerate(alpha):
                if a:
                    m *= ypow[i][a]
            key = (sum(alpha),)
            terms[key] = terms.get(key, 0) + m
        return Polynomial(1, terms)
    linear = [
        Polynomial(k, {tuple(1 if j == jj else 0 for jj in range(k)): vecs[j][i] for j in range(k)})
        for i in range(p.dim)
    ]
    cache: dict[tuple[int, int], Polynomial] = {}

    def lpow(i: int, e: int) -> Polynomial:
        if (i, e) not in cache:
            cache[(i, e)] = linear[i] ** e
        return cache[(i, e)]

    out = Polynomial(k)
    for alpha, c in p._terms.items():
        m = Polynomial.constant(k, c)
        for i, a in enumerate(alpha):
            if a:
                m = m * lpow(i, a)
        out = out + m
    return out


# -- text grammar -------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d+)?)|(?P<var>x(?P<idx>\d+))|(?P<op>\*\*|[-+*/^()]))"
)


class _Parser:
    def __init__(self, text: str, dim: int):
        self.text = text
        self.dim = dim
        self.tokens = []
        pos = 0
        stripped = text.rstrip()
        while pos < len(stripped):
            m = _TOKEN.match(stripped, pos)
            if not m or m.end() == pos:
                bad = pos + (len(stripped[pos:]) - len(stripped[pos:].lstrip()))
                raise ParseError(f"unexpected character {stripped[bad]!r}", bad)
            if m.group("num") is not None:
                self.tokens.append(("num", m.group("num"), m.start("num")))
            elif m.group("var") is not None:
                self.tokens.append(("var", int(m.group("idx")), m.start("var")))
            else:
                op = m.group("op")
                self.tokens.append(("op", "^" if op == "**" else op, m.start("op")))
            pos = m.end()
        self.i = 0

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def take(self):
        tok = self.peek()
        self.i += 1
        return tok

    def _end_pos(self) -> int:
        return len(self.text.rstrip())

    def parse(self) -> Polynomial:
        if not self.tokens:
            raise ParseError("empty expression", 0)
        p = self.expr()
        tok = self.peek()
        if tok is not None:
            raise ParseError(f"unexpected token {tok[1]!r}", tok[2])
        return p

    def expr(self) -> Polynomial:
        p = self.term()
        while (tok := self.peek()) is not None and tok[0] == "op" and tok[1] in "+-":
            self.take()
            q = self.term()
            p = p + q if tok[1] == "+" else p - q
        return p

    def term(self) -> Polynomial:
        p = self.factor()
        while (tok := self.peek()) is not None:
            if tok[0] == "op" and tok[1] == "*":
                self.take()
                p = p * self.factor()
            elif tok[0] == "op" and tok[1] == "/":
                self.take()
                q = self.factor()
                if q.degree > 0 or q.is_zero():
                    raise ParseError("division only by nonzero constants", tok[2])
                p = p * (1 / q.coefficient((0,) * self.dim))
            elif tok[0] in ("num", "var") or (tok[0] == "op" and tok[1] == "("):
                p = p * self.factor()  # implicit multiplication
            else:
                break
        return p

    def factor(self) -> Polynomial:
        tok = self.peek()
        if tok is not None and tok[0] == "op" and tok[1] in "+-":
            self.take()
            p = self.factor()
            return -p if tok[1] == "-" else p
        return self.power()

    def power(self) -> Polynomial:
        base = self.atom()
        tok = self.peek()
        if tok is not None and tok[0] == "op" and tok[1] == "^":
            self.take()
            exp = self.take()
            if exp is None or exp[0] != "num" or not exp[1].isdigit():
                raise ParseError(
                    "exponent must be a nonnegative integer",
                    exp[2] if exp else self._end_pos(),
                )
            return base ** int(exp[1])
        return base

    def atom(self) -> Polynomial:
        tok = self.take()
        if tok is None:
            raise ParseError("unexpected end of expression", self._end_pos())
        kind, value, pos = tok
        if kind == "num":
            return Polynomial.constant(self.dim, Fraction(value))
        if kind == "var":
            if not 1 <= value <= self.dim:
                raise DimensionMismatch(
                    f"variable x{value} at position {pos} exceeds dimension {self.dim}"
                )
            return Polynomial.variable(self.dim, value)
        if value == "(":
            p = self.expr()
            close = self.take()
            if close is None or close[1] != ")":
                raise ParseError(
                    "expected ')'", close[2] if close else self._end_pos()
                )
            return p
        raise ParseError(f"unexpected token {value!r}", pos)


def parse(text: str, dimension: int) -> Polynomial:
    """Parse ``text`` such as ``"x1^2 - x2^2 - 3/2*x3"`` in ``dimension`` variables."""
    return _Parser(text, int(dimension)).parse()


# -- functional aliases ---------------------------------------------------------

def evaluate(p: Polynomial, point) -> Fraction:
    return p.evaluate(point)


def derivative(p: Polynomial, alpha: Sequence[int]) -> Polynomial:
    return p.derivative(alpha)


def gradient(p: Polynomial) -> list[Polynomial]:
    return p.gradient()


def taylor_shift(p: Polynomial, xi) -> Polynomial:
    return p.taylor_shift(xi)


def principal_part(p: Polynomial) -> Polynomial:
    return p.principal_part()


def power(p: Polynomial, k: int) -> Polynomial:
    if int(k) < 1:
        raise ValueError("k must be a positive integer")
    return p ** int(k)


def add(p: Polynomial, q: Polynomial) -> Polynomial:
    return p + q


def mul(p: Polynomial, q: Polynomial) -> Polynomial:
    return p * q


def augment(p: Polynomial, extra: int = 1) -> Polynomial:
    return p.augment(extra)


def is_homogeneous(p: Polynomial) -> int | None:
    return p.is_homogeneous()
