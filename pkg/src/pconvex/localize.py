"""Linear localizations at infinity at simple characteristics.

If ``P`` is homogeneous, ``P(xi) = 0`` and ``grad P(xi) != 0``, then
``x -> <grad P(xi), x>`` is a localization of ``P`` at infinity: the translates
``P(. + n*xi)``, normalized by their sup over the unit ball, approach a
multiple of it.  :func:`verify_localization` measures that convergence, and
:func:`localization_upper_bound` gives the exact bound it implies for sigma.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy import optimize

from ._exact import det, solve
from .hfunc import ProbeConfig, Subspace, _ascend, _NumPoly, unit_ball_samples
from .polycore import Polynomial, as_fractions, shift_integer_coefficients

__all__ = [
    "LocalizationError",
    "NotHomogeneous",
    "NotCharacteristic",
    "DegenerateCharacteristic",
    "ConvergenceReport",
    "LocalizationBound",
    "simple_characteristic_localization",
    "verify_localization",
    "localization_upper_bound",
    "default_schedule",
]


class LocalizationError(ValueError):
    pass


class NotHomogeneous(LocalizationError):
    pass


class NotCharacteristic(LocalizationError):
    """``P(xi) != 0``."""


class DegenerateCharacteristic(LocalizationError):
    """``grad P(xi) == 0``: not a simple characteristic."""


def simple_characteristic_localization(p: Polynomial, xi) -> Polynomial:
    """The linear form ``x -> <grad P(xi), x>`` with exact coefficients."""
    if p.is_homogeneous() is None or p.is_zero():
        raise NotHomogeneous("P must be a nonzero homogeneous polynomial")
    pt = as_fractions(xi)
    if len(pt) != p.dim:
        raise ValueError(f"xi has {len(pt)} coordinates, P has dimension {p.dim}")
    value = p.evaluate(pt)
    if value != 0:
        raise NotCharacteristic(f"P(xi) = {value} is not zero")
    grad = [g.evaluate(pt) for g in p.gradient()]
    if all(g == 0 for g in grad):
        raise DegenerateCharacteristic("grad P(xi) vanishes; xi is not a simple characteristic")
    return Polynomial.linear_form(grad)


def default_schedule() -> list[int]:
    return [2 ** k for k in range(4, 15)]


@dataclass
class ConvergenceReport:
    """Residuals ``r_n = min_c sup_{|x|<=1} |P(x+n xi)/P~(n xi,1) - c L(x)/|L||``.

    ``residuals`` come from ball sampling plus ascent (a lower estimate of the
    sup at the fitted ``c_n``); ``residual_bounds`` are the coefficient
    l1-norms of the same difference, an upper bound.  ``a_n`` is the
    derivative norm ``sqrt(sum |P^(alpha)(n xi)|^2) / n^(m-1)`` and
    ``b_n = a_n / |grad P(xi)|``.
    """

    schedule: list[int]
    residuals: list[float]
    residual_bounds: list[float]
    c: list[float]
    a: list[float]
    b: list[float]
    tolerance: float
    slope: float | None
    passed: bool
    notes: list[str] = field(default_factory=list)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(["n", "residual", "c_n"])
            for n, r, c in zip(self.schedule, self.residuals, self.c):
                writer.writerow([n, repr(r), repr(c)])

    def to_json(self) -> dict:
        return {
            "schedule": self.schedule,
            "residuals": self.residuals,
            "residual_bounds": self.residual_bounds,
            "c_n": self.c,
            "a_n": self.a,
            "b_n": self.b,
            "tolerance": self.tolerance,
            "loglog_slope": self.slope,
            "verdict": "pass" if self.passed else "fail",
            "notes": self.notes,
        }


def _loglog_slope(ns: Sequence[int], rs: Sequence[float]) -> float | None:
    pts = [(math.log(n), math.log(r)) for n, r in zip(ns, rs) if r > 0]
    if len(pts) < 2 or len(pts) < len(ns):
        return None
    x, y = np.array(pts).T
    return float(np.polyfit(x, y, 1)[0])


def verify_localization(p: Polynomial, xi, l: Polynomial, schedule: Sequence[int] | None = None,
                        cfg: ProbeConfig | None = None, tolerance: float = 1e-3) -> ConvergenceReport:
    """Measure how fast normalized translates ``P(. + n xi)`` approach ``c * L/|L|``."""
    cfg = cfg or ProbeConfig()
    simple_characteristic_localization(p, xi)  # precondition check
    if l.is_zero() or l.is_homogeneous() != 1:
        raise LocalizationError("L must be a nonzero linear form")
    if l.dim != p.dim:
        raise ValueError("L and P have different dimensions")
    schedule = list(schedule or default_schedule())
    d = p.dim
    m = p.degree
    pt = as_fractions(xi)
    lvec = [l.coefficient(tuple(1 if i == j else 0 for i in range(d))) for j in range(d)]
    lnorm = math.sqrt(sum(c * c for c in lvec))
    target = {tuple(1 if i == j else 0 for i in range(d)): float(c) / lnorm for j, c in enumerate(lvec) if c}
    grad_norm = math.sqrt(sum(g.evaluate(pt) ** 2 for g in p.gradient()))
    pts = unit_ball_samples(d, cfg.ball_samples, cfg.seed)

    residuals, bounds, cs, a_seq, b_seq = [], [], [], [], []
    for n in schedule:
        nums, den = shift_integer_coefficients(p, tuple(n * x for x in pt))
        # normalizer: sup of |P(. + n xi)| over the unit ball
        big = max(abs(v) for v in nums.values())
        h = {a: v / big for a, v in nums.items()}
        hp = _NumPoly(h, d)
        vals = np.abs(hp.value(pts))
        order = np.argsort(-vals, kind="stable")[: cfg.ascent_starts]
        s, _ = _ascend(hp, pts[order], cfg)
        s = max(s, float(vals[order[0]]))
        shifted = {a: v / s for a, v in h.items()}  # P(. + n xi) / P~(n xi, 1)

        # derivative-norm internals of the convergence argument
        sq = Fraction(0)
        for a, v in nums.items():
            w = Fraction(v, den)
            for ai in a:
                w *= math.factorial(ai)
            sq += w * w
        a_n = math.sqrt(sq) / float(n) ** (m - 1)
        a_seq.append(a_n)
        b_seq.append(a_n / grad_norm)

        def diff(c):
            out = dict(shifted)
            for a, v in target.items():
                out[a] = out.get(a, 0.0) - c * v
            return out

        def sup_residual(c):
            dp = _NumPoly(diff(c), d)
            dv = np.abs(dp.value(pts))
            top = np.argsort(-dv, kind="stable")[: cfg.ascent_starts]
            val, _ = _ascend(dp, pts[top], cfg)
            return max(val, float(dv[top[0]]))

        # least-squares start on the samples, then convex 1-D minimization
        tv = _NumPoly(target, d).value(pts)
        sv = _NumPoly(shifted, d).value(pts)
        c0 = float(tv @ sv / (tv @ tv))
        res = optimize.minimize_scalar(sup_residual, bracket=(c0 - 0.05, c0 + 0.05),
                                       options={"xtol": 1e-10})
        c_n, r_n = float(res.x), float(res.fun)
        r0 = sup_residual(c0)
        if r0 < r_n:
            c_n, r_n = c0, r0
        cs.append(c_n)
        residuals.append(r_n)
        bounds.append(float(sum(abs(v) for v in diff(c_n).values())))

    tail = residuals[-5:]
    decreasing = all(b <= a for a, b in zip(tail, tail[1:]))
    passed = decreasing and residuals[-1] < tolerance
    notes = []
    if not decreasing:
        notes.append("residual not decreasing over the last five entries")
    if residuals[-1] >= tolerance:
        notes.append(f"final residual {residuals[-1]:.3g} >= tolerance {tolerance:g}")
    return ConvergenceReport(schedule, residuals, bounds, cs, a_seq, b_seq, tolerance,
                             _loglog_slope(schedule, residuals), passed, notes)


@dataclass(frozen=True)
class LocalizationBound:
    """``inf_t L~_V(0,t)/L~(0,t)`` for a linear ``L``; ``squared`` is exact."""

    squared: Fraction

    @property
    def value(self) -> float:
        return math.sqrt(self.squared)

    @property
    def is_zero(self) -> bool:
        return self.squared == 0

    def to_json(self) -> dict:
        return {"squared": str(self.squared), "value": self.value, "exact_zero": self.is_zero}


def localization_upper_bound(l: Polynomial, v) -> LocalizationBound:
    """Exact ``|proj_V grad L|^2 / |grad L|^2`` for a linear form ``L``.

    For linear ``L`` both ball-sups are ``t`` times a coefficient norm, so the
    ratio does not depend on ``t``.  ``v`` is a :class:`Subspace` or a list of
    spanning vectors; rational spanning vectors give an exact projection.
    """
    if l.is_zero():
        raise LocalizationError("L is the zero polynomial")
    if l.is_homogeneous() != 1:
        raise LocalizationError("L must be a linear form without constant term")
    d = l.dim
    c = [l.coefficient(tuple(1 if i == j else 0 for i in range(d))) for j in range(d)]
    total = sum(x * x for x in c)
    vectors = [as_fractions(b) for b in (v.basis if isinstance(v, Subspace) else v)]
    vectors = [w for w in vectors if any(w)]
    if not vectors:
        return LocalizationBound(Fraction(0))
    if any(len(w) != d for w in vectors):
        raise ValueError("subspace dimension differs from L")
    # drop dependent vectors (exact elimination)
    basis: list[tuple[Fraction, ...]] = []
    for w in vectors:
        trial = basis + [w]
        gram = [[sum(x * y for x, y in zip(p, q)) for q in trial] for p in trial]
        if det(gram) != 0:
            basis.append(w)
    gram = [[sum(x * y for x, y in zip(p, q)) for q in basis] for p in basis]
    proj = [sum(x * y for x, y in zip(w, c)) for w in basis]
    coeffs = solve(gram, proj)
    projected = sum(a * b for a, b in zip(coeffs, proj))
    return LocalizationBound(projected / total)

