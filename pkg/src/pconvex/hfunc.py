"""Ball-sup functions of a polynomial and sampled estimates of sigma / sigma0.

For a subspace ``V`` the ball-sup ``sup{|P(xi + eta)| : eta in V, |eta| <= t}``
is computed on the exact Taylor shift ``P(xi + .)``; only the shifted,
rescaled coefficients are rounded to floats.  That keeps evaluations far out
(``|xi| ~ 2**40``) free of the cancellation a direct float evaluation of
``P`` would suffer.

Everything reported by :func:`estimate_sigma` and :func:`estimate_sigma0` is
an upper bound coming from finitely many samples, never a certified value.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import lru_cache
from itertools import combinations_with_replacement
from typing import Sequence

import numpy as np
from scipy import optimize
from scipy.stats import norm, qmc

from . import _kernels
from .polycore import (
    DimensionMismatch,
    Polynomial,
    as_fraction,
    as_fractions,
    restrict,
    restrict_line_integer,
    shift_integer_coefficients,
)

__all__ = [
    "Subspace",
    "ProbeConfig",
    "RatioSample",
    "RatioTrace",
    "SigmaEstimate",
    "HypoellipticityVerdict",
    "ball_sup",
    "derivative_norm",
    "derivative_norm_squared",
    "sigma_ratio",
    "sampled_sigma_ratio",
    "unit_ball_samples",
    "estimate_sigma",
    "estimate_sigma0",
    "singular_directions",
    "is_hypoelliptic_numeric",
    "is_decaying",
]

VANISH_TOL = 1e-3
BOUNDED_TOL = 1e-2


# ---------------------------------------------------------------------------
# subspaces and configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Subspace:
    """Linear subspace of R^d given by an orthonormal basis (empty = {0})."""

    dim: int
    basis: tuple[tuple[float, ...], ...] = ()

    def __post_init__(self):
        for b in self.basis:
            if len(b) != self.dim:
                raise DimensionMismatch("basis vector length differs from ambient dimension")
        if self.basis:
            g = np.array(self.basis) @ np.array(self.basis).T
            if not np.allclose(g, np.eye(len(self.basis)), atol=1e-12, rtol=0):
                raise ValueError("subspace basis must be orthonormal")

    @classmethod
    def span(cls, vectors: Sequence[Sequence], dim: int | None = None) -> "Subspace":
        """Orthonormalize ``vectors`` in floating point (Gram-Schmidt, dependent vectors dropped)."""
        vecs = [np.asarray([float(v) for v in vec], dtype=float) for vec in vectors]
        if dim is None:
            if not vecs:
                raise ValueError("dimension needed for an empty span")
            dim = len(vecs[0])
        basis: list[np.ndarray] = []
        for v in vecs:
            if len(v) != dim:
                raise DimensionMismatch("vector length differs from ambient dimension")
            w = v.copy()
            for _ in range(2):
                for b in basis:
                    w = w - (w @ b) * b
            n = np.linalg.norm(w)
            if n > 1e-12 * max(1.0, np.linalg.norm(v)):
                basis.append(w / n)
        return cls(dim, tuple(tuple(float(x) for x in b) for b in basis))

    @classmethod
    def line(cls, y: Sequence) -> "Subspace":
        return cls.span([y])

    @classmethod
    def full(cls, dim: int) -> "Subspace":
        return cls(dim, tuple(tuple(1.0 if i == j else 0.0 for i in range(dim)) for j in range(dim)))

    @classmethod
    def zero(cls, dim: int) -> "Subspace":
        return cls(dim, ())

    @classmethod
    def coordinate(cls, dim: int, indices: Sequence[int]) -> "Subspace":
        """Span of ``e_i`` for the given 1-based indices."""
        return cls(dim, tuple(tuple(1.0 if i == j - 1 else 0.0 for i in range(dim)) for j in indices))

    @property
    def rank(self) -> int:
        return len(self.basis)

    @property
    def is_full(self) -> bool:
        return self.rank == self.dim

    def matrix(self) -> np.ndarray:
        return np.array(self.basis, dtype=float).reshape(self.rank, self.dim)

    def contains(self, other: "Subspace", tol: float = 1e-10) -> bool:
        if other.rank == 0:
            return True
        if self.rank == 0:
            return False
        b = self.matrix()
        o = other.matrix()
        resid = o - (o @ b.T) @ b
        return bool(np.max(np.abs(resid)) <= tol)

    def to_json(self) -> dict:
        return {"dim": self.dim, "basis": [list(b) for b in self.basis]}


@dataclass(frozen=True)
class ProbeConfig:
    """Deterministic sampling schedule for the asymptotic probes.

    Radii are ``r0 * rho**k`` for ``k < n_radii`` (``n_radii <= 41``).  The
    ``sigma0_*`` fields widen the search used for the global infimum; the
    ``hypo_*`` fields drive the hypoellipticity probe curves.
    """

    seed: int = 0
    r0: float = 1.0
    rho: float = 2.0
    n_radii: int = 21
    t_grid: tuple[float, ...] = (2.0, 4.0, 8.0, 16.0)
    n_random_directions: int = 4
    directions: tuple[tuple[float, ...], ...] = ()
    max_singular: int = 4
    tail_shells: int = 5
    ball_samples: int = 256
    ascent_starts: int = 4
    ascent_iters: int = 300
    ascent_tol: float = 1e-11
    sigma0_t_max: float = 2.0 ** 16
    sigma0_radius_stride: int = 2
    sigma0_wide_curves: int = 3
    sigma0_descent_starts: int = 2
    sigma0_descent_evals: int = 120
    sigma0_scale_max_exp: int = 40
    hypo_max_exp: int = 20
    hypo_exp_stride: int = 2
    hypo_gammas: tuple[float, ...] = (0.25, 0.5, 0.75, 1.0)
    hypo_tol: float = 1e-2
    cone_rays: int = 6
    cone_samples: int = 512

    def __post_init__(self):
        if any(t <= 1 for t in self.t_grid) or not self.t_grid:
            raise ValueError("all t values must be > 1")
        if self.r0 <= 0 or self.rho <= 1:
            raise ValueError("radii must be strictly increasing: need r0 > 0 and rho > 1")
        if not 1 <= self.n_radii <= 41:
            raise ValueError("n_radii must lie in 1..41")
        if self.tail_shells < 1:
            raise ValueError("tail_shells must be >= 1")
        if self.sigma0_t_max <= 1:
            raise ValueError("sigma0_t_max must be > 1")

    @property
    def radii(self) -> tuple[float, ...]:
        return tuple(self.r0 * self.rho ** k for k in range(self.n_radii))

    def with_directions(self, *dirs: Sequence) -> "ProbeConfig":
        extra = tuple(tuple(float(x) for x in d) for d in dirs)
        return replace(self, directions=self.directions + extra)

    def to_json(self) -> dict:
        out = {}
        for k, v in self.__dict__.items():
            out[k] = [list(x) for x in v] if k == "directions" else (list(v) if isinstance(v, tuple) else v)
        return out


# ---------------------------------------------------------------------------
# traces
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RatioSample:
    direction_id: int
    radius: float
    t: float
    ratio: float
    xi: tuple[float, ...]


@dataclass
class RatioTrace:
    """Sampled values of ``P~_V(xi,t) / P~(xi,t)`` in schedule order.

    ``curves`` describes each direction id (a ray, or a scaled witness path).
    """

    samples: list[RatioSample] = field(default_factory=list)
    curves: dict[int, dict] = field(default_factory=dict)

    def add(self, sample: RatioSample) -> None:
        self.samples.append(sample)

    def extend(self, other: "RatioTrace", offset: int | None = None) -> int:
        if offset is None:
            offset = (max(self.curves) + 1) if self.curves else 0
        for cid, desc in other.curves.items():
            self.curves[cid + offset] = desc
        for s in other.samples:
            self.samples.append(replace(s, direction_id=s.direction_id + offset))
        return offset

    def running_minimum(self) -> list[float]:
        out, cur = [], math.inf
        for s in self.samples:
            cur = min(cur, s.ratio)
            out.append(cur)
        return out

    def shell_infima(self, direction_id: int | None = None) -> dict[float, float]:
        """Minimum ratio per radius (over t and, unless given, directions)."""
        out: dict[float, float] = {}
        for s in self.samples:
            if direction_id is not None and s.direction_id != direction_id:
                continue
            out[s.radius] = min(out.get(s.radius, math.inf), s.ratio)
        return dict(sorted(out.items()))

    def curve(self, direction_id: int, t: float | None = None) -> list[RatioSample]:
        pts = [s for s in self.samples if s.direction_id == direction_id and (t is None or s.t == t)]
        return sorted(pts, key=lambda s: s.radius)

    def minimum(self) -> RatioSample | None:
        return min(self.samples, key=lambda s: s.ratio, default=None)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(["direction_id", "radius", "t", "ratio"])
            for s in self.samples:
                writer.writerow([s.direction_id, repr(s.radius), repr(s.t), repr(s.ratio)])


def is_decaying(values: Sequence[float], rel: float = 1e-6) -> bool:
    """True when a scale-ordered sequence ends at its minimum and below its start."""
    vals = [float(v) for v in values]
    if len(vals) < 2:
        return False
    last = vals[-1]
    return last < vals[0] and last <= min(vals) * (1 + rel) + 1e-300


@dataclass
class SigmaEstimate:
    upper_bound: float
    witness_xi: tuple[float, ...] | None
    witness_t: float | None
    trace: RatioTrace
    witness_curve: int | None = None
    decaying: bool = False
    per_t: dict[float, float] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "upper_bound": self.upper_bound,
            "witness": None
            if self.witness_xi is None
            else {"xi": list(self.witness_xi), "t": self.witness_t, "curve": self.witness_curve},
            "decaying": self.decaying,
            "per_t": {repr(k): v for k, v in self.per_t.items()},
            "samples": len(self.trace.samples),
        }


# ---------------------------------------------------------------------------
# numeric evaluation of shifted polynomials
# ---------------------------------------------------------------------------

class _NumPoly:
    """Float polynomial in k variables backed by compiled kernels."""

    def __init__(self, coeffs: dict[tuple[int, ...], float], k: int):
        self.k = k
        items = list(coeffs.items())
        self.exps = np.array([a for a, _ in items], dtype=np.int64).reshape(len(items), k)
        self.coef = np.array([c for _, c in items], dtype=float)
        self.deg = int(self.exps.sum(axis=1).max()) if items else 0

    def value(self, z: np.ndarray) -> np.ndarray:
        return _kernels.poly_values(self.exps, self.coef, self.deg, np.ascontiguousarray(z, dtype=float))

    def value_and_grad(self, z: np.ndarray):
        z = np.ascontiguousarray(z, dtype=float).reshape(-1, self.k)
        vals = np.empty(len(z))
        grads = np.empty((len(z), self.k))
        for i in range(len(z)):
            vals[i] = _kernels._value_grad(self.exps, self.coef, self.deg, z[i], grads[i])
        return vals, grads


def _scaled_float_coeffs(nums: dict[tuple[int, ...], int], den: int, t: Fraction):
    """``(h, M)`` with floats ``h_alpha = c_alpha t^|alpha| / M`` and ``M = max|c_alpha t^|alpha||``.

    ``c_alpha = nums[alpha] / den``; all scaling is done on integers.
    """
    if not nums:
        return {}, Fraction(0)
    deg = max(sum(a) for a in nums)
    tn, td = t.numerator, t.denominator
    tnp = [1]
    tdp = [1]
    for _ in range(deg):
        tnp.append(tnp[-1] * tn)
        tdp.append(tdp[-1] * td)
    g = {}
    for a, c in nums.items():
        j = sum(a)
        g[a] = c * tnp[j] * tdp[deg - j]
    big = max(abs(v) for v in g.values())
    return {a: v / big for a, v in g.items()}, Fraction(big, den * tdp[deg])


@lru_cache(maxsize=64)
def unit_ball_samples(k: int, n: int, seed: int) -> np.ndarray:
    """Deterministic low-discrepancy points in the closed unit ball of R^k.

    Scrambled Sobol points mapped to Gaussian directions and radius ``u^(1/k)``;
    the same directions pushed to the sphere, the origin and ``+-e_i`` are
    appended.
    """
    # draw a power of two (Sobol balance) and keep the first n points
    m = max(0, math.ceil(math.log2(max(n, 1))))
    sob = qmc.Sobol(d=k + 1, scramble=True, seed=np.random.default_rng(seed)).random_base2(m)[:n]
    g = norm.ppf(np.clip(sob[:, :k], 1e-12, 1 - 1e-12))
    nrm = np.linalg.norm(g, axis=1, keepdims=True)
    nrm[nrm == 0] = 1.0
    dirs = g / nrm
    rad = sob[:, k:] ** (1.0 / k)
    eye = np.eye(k)
    pts = np.vstack([np.zeros((1, k)), eye, -eye, dirs, dirs * rad])
    pts.setflags(write=False)
    return pts


def _ascend(poly: _NumPoly, starts: np.ndarray, cfg: ProbeConfig) -> tuple[float, np.ndarray]:
    """Projected normalized-gradient ascent of ``|poly|`` on the unit ball.

    Steps are accepted only if ``|poly|`` increases, so the iterates depend on
    ``|poly|`` only through comparisons and its gradient direction.
    """
    val, z = _kernels.ascend(poly.exps, poly.coef, poly.deg, np.ascontiguousarray(starts, dtype=float),
                             cfg.ascent_iters, cfg.ascent_tol)
    return float(val), z


def _univariate_sup(h: dict[tuple[int, ...], float]) -> tuple[float, float]:
    """``max |p(u)|`` over ``[-1, 1]`` for ``p = sum h_j u^j``; returns ``(value, argmax)``.

    Critical points come from the roots of ``p'`` (Newton polished); a grid
    local maximum not matched by a root is refined by bounded Brent search.
    """
    deg = max((a[0] for a in h), default=0)
    c = np.zeros(deg + 1)
    for a, v in h.items():
        c[a[0]] = v
    poly = np.polynomial.Polynomial(c)
    grid = _GRID
    gvals = np.abs(poly(grid))
    cand = np.array([-1.0, 0.0, 1.0])
    if deg >= 2:
        dp = poly.deriv()
        roots = dp.roots()
        real = roots[np.abs(roots.imag) <= 1e-6 * np.maximum(1.0, np.abs(roots))].real
        real = real[(real >= -1.0 - 1e-9) & (real <= 1.0 + 1e-9)]
        ddp = dp.deriv()
        for _ in range(3):
            d2 = ddp(real)
            safe = np.abs(d2) > 0
            real = np.where(safe, real - dp(real) / np.where(safe, d2, 1.0), real)
            real = np.clip(real, -1.0, 1.0)
        cand = np.concatenate([cand, real])
    cvals = np.abs(poly(cand))
    i = int(np.argmax(cvals))
    best_u, best_v = float(cand[i]), float(cvals[i])
    j = int(np.argmax(gvals))
    if gvals[j] > best_v * (1 - 1e-9) and np.min(np.abs(cand - grid[j])) > 1e-3:
        lo, hi = grid[max(j - 1, 0)], grid[min(j + 1, len(grid) - 1)]
        res = optimize.minimize_scalar(lambda x: -abs(poly(x)), bounds=(lo, hi), method="bounded",
                                       options={"xatol": 1e-13})
        for u in (float(res.x), float(grid[j])):
            val = float(abs(poly(u)))
            if val > best_v:
                best_u, best_v = u, val
    return best_v, best_u


_GRID = np.linspace(-1.0, 1.0, 257)


class _Shifted:
    """Exact ``eta -> P(xi + eta)`` with cached restrictions to subspaces."""

    def __init__(self, p: Polynomial, xi):
        self.p = p
        self.xi = as_fractions(xi)
        self.nums, self.den = shift_integer_coefficients(p, self.xi)
        self._restricted: dict[tuple, tuple[dict, int]] = {}

    @property
    def value_at_xi(self) -> Fraction:
        return Fraction(self.nums.get((0,) * self.p.dim, 0), self.den)

    def restricted(self, v: Subspace) -> tuple[dict[tuple[int, ...], int], int]:
        key = v.basis
        if key not in self._restricted:
            if v.basis == _standard_basis(v.dim):
                self._restricted[key] = (self.nums, self.den)
            elif v.rank == 1:
                self._restricted[key] = restrict_line_integer(self.nums, self.den, v.basis[0])
            else:
                shifted = Polynomial(self.p.dim, {a: Fraction(c, self.den) for a, c in self.nums.items()})
                terms = restrict(shifted, v.basis).terms
                den = 1
                for c in terms.values():
                    den = den * c.denominator // math.gcd(den, c.denominator)
                self._restricted[key] = ({a: int(c * den) for a, c in terms.items()}, den)
        return self._restricted[key]

    def restricted_fractions(self, v: Subspace) -> dict[tuple[int, ...], Fraction]:
        nums, den = self.restricted(v)
        return {a: Fraction(c, den) for a, c in nums.items()}

    def sup(self, v: Subspace, t, cfg: ProbeConfig, extra_starts: np.ndarray | None = None):
        """``(M, s, z)``: the ball-sup equals ``M * s``; ``z`` is the argmax in unit-ball coordinates of ``v``."""
        t = as_fraction(t)
        if v.rank == 0:
            c0 = abs(self.value_at_xi)
            return (c0 if c0 else Fraction(1)), (1.0 if c0 else 0.0), np.zeros(0)
        nums, den = self.restricted(v)
        h, big = _scaled_float_coeffs(nums, den, t)
        if big == 0:
            return Fraction(1), 0.0, np.zeros(v.rank)
        k = v.rank
        if k == 1:
            s, u = _univariate_sup(h)
            return big, s, np.array([u])
        poly = _NumPoly(h, k)
        pts = unit_ball_samples(k, cfg.ball_samples, cfg.seed)
        vals = np.abs(poly.value(pts))
        order = np.argsort(-vals, kind="stable")[: cfg.ascent_starts]
        starts = pts[order]
        if extra_starts is not None and len(extra_starts):
            starts = np.vstack([starts, extra_starts])
        s, z = _ascend(poly, starts, cfg)
        return big, max(s, float(vals[order[0]])), z


@lru_cache(maxsize=16)
def _standard_basis(d: int):
    return tuple(tuple(1.0 if i == j else 0.0 for i in range(d)) for j in range(d))


def _ratio_on(sh: _Shifted, v: Subspace, t, cfg: ProbeConfig) -> float:
    d = sh.p.dim
    if v.is_full:
        return 1.0
    m_num, s_num, z_num = sh.sup(v, t, cfg)
    if s_num == 0.0:
        return 0.0
    extra = None
    if v.rank:
        extra = (z_num @ v.matrix()).reshape(1, d)
    m_den, s_den, _ = sh.sup(Subspace.full(d), t, cfg, extra_starts=extra)
    r = float(m_num / m_den) * (s_num / s_den)
    return min(1.0, max(0.0, r))


def _check_dims(p: Polynomial, xi, v: Subspace | None = None):
    if len(xi) != p.dim:
        raise DimensionMismatch(f"point has {len(xi)} coordinates, polynomial dimension is {p.dim}")
    if v is not None and v.dim != p.dim:
        raise DimensionMismatch(f"subspace dimension {v.dim} differs from polynomial dimension {p.dim}")


# ---------------------------------------------------------------------------
# public pointwise functions
# ---------------------------------------------------------------------------

def ball_sup(p: Polynomial, xi, t, v: Subspace | None = None, cfg: ProbeConfig | None = None) -> float:
    """Lower estimate of ``sup{|P(xi+eta)| : eta in V, |eta| <= t}`` (``V`` defaults to R^d).

    One-dimensional ``V`` is resolved to about 1e-9 relative accuracy; larger
    ``V`` use seeded ball samples refined by projected gradient ascent.
    """
    if float(t) <= 0:
        raise ValueError("t must be positive")
    _check_dims(p, xi, v)
    v = Subspace.full(p.dim) if v is None else v
    cfg = cfg or ProbeConfig()
    sh = _Shifted(p, xi)
    big, s, _ = sh.sup(v, t, cfg)
    at_xi = float(abs(sh.value_at_xi))
    try:
        val = float(big) * s
    except OverflowError:
        return math.inf
    return max(val, at_xi)


def derivative_norm_squared(p: Polynomial, xi, t, v: Subspace | None = None) -> Fraction:
    """Exact ``sum_beta |c_beta|^2 t^(2|beta|)`` over Taylor coefficients in V-coordinates."""
    _check_dims(p, xi, v)
    v = Subspace.full(p.dim) if v is None else v
    t = as_fraction(t)
    sh = _Shifted(p, xi)
    if v.rank == 0:
        return sh.value_at_xi ** 2
    coeffs = sh.restricted_fractions(v)
    return sum((c * c * t ** (2 * sum(a)) for a, c in coeffs.items()), Fraction(0))


def derivative_norm(p: Polynomial, xi, t, v: Subspace | None = None) -> float:
    """Derivative-norm surrogate of the ball-sup, comparable to it up to constants."""
    return math.sqrt(derivative_norm_squared(p, xi, t, v))


def sigma_ratio(p: Polynomial, v: Subspace, xi, t, cfg: ProbeConfig | None = None) -> float:
    """``P~_V(xi,t) / P~(xi,t)`` in ``[0, 1]``."""
    if float(t) <= 1:
        raise ValueError("t must be > 1")
    _check_dims(p, xi, v)
    return _ratio_on(_Shifted(p, xi), v, t, cfg or ProbeConfig())


def sampled_sigma_ratio(p: Polynomial, v: Subspace, xi, t, num_points: np.ndarray, den_points: np.ndarray) -> float:
    """Ratio of maxima of ``|P(xi + t*z)|`` over two fixed finite point sets.

    ``num_points`` are coordinates in ``V`` (shape ``(n, rank V)``), ``den_points``
    in ``R^d``.  No refinement is done, so for a power ``P^k`` the result is
    exactly the k-th power of the ratio for ``P`` up to rounding.
    """
    _check_dims(p, xi, v)
    sh = _Shifted(p, xi)
    tt = as_fraction(t)
    if v.rank == 0:
        num_big, num_val = abs(sh.value_at_xi), 1.0
    else:
        h, num_big = _scaled_float_coeffs(*sh.restricted(v), tt)
        num_val = float(np.max(np.abs(_NumPoly(h, v.rank).value(np.asarray(num_points, float))))) if h else 0.0
    h, den_big = _scaled_float_coeffs(sh.nums, sh.den, tt)
    if not h:
        return 0.0
    den_val = float(np.max(np.abs(_NumPoly(h, p.dim).value(np.asarray(den_points, float)))))
    if num_big == 0 or num_val == 0.0:
        return 0.0
    return float(num_big / den_big) * num_val / den_val


# ---------------------------------------------------------------------------
# singular directions of the principal part
# ---------------------------------------------------------------------------

def _sphere_points(d: int, n: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((n, d))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def singular_directions(pm: Polynomial, v: Subspace | None = None, count: int = 4, seed: int = 0,
                        starts: int = 48) -> list[tuple[float, ...]]:
    return list(_singular_directions(pm, v, count, seed, starts))


@lru_cache(maxsize=128)
def _singular_directions(pm: Polynomial, v: Subspace | None, count: int, seed: int,
                         starts: int) -> tuple[tuple[float, ...], ...]:
    """Unit zeros ``y`` of a homogeneous ``pm`` with ``grad pm(y)`` orthogonal to ``V``.

    Multistart least squares on the Newton step ``f grad f / |grad f|^2``
    (smooth and regular also at multiple zeros such as those of ``Q**4``)
    and on the V-components of the unit gradient, its sign pinned to the
    start point so it stays smooth across the zero set.  These are the rays
    along which the linear localization annihilates ``V``.
    """
    d = pm.dim
    if pm.is_zero() or pm.degree < 1:
        return ()
    scale = float(pm.coefficient_scale())
    f = _NumPoly({a: float(c) / scale for a, c in pm.terms.items()}, d)
    vm = v.matrix() if v is not None and v.rank else np.zeros((0, d))

    units = [tuple(1 if i == j else 0 for i in range(d)) for j in range(d)]

    def exact_value_grad(y):
        nums, den = shift_integer_coefficients(pm, tuple(float(c) for c in y))
        val = nums.get((0,) * d, 0) / den / scale
        return val, np.array([nums.get(e, 0) / den / scale for e in units])

    def make_resid(evaluate, g_ref):
        def resid(y):
            val, g = evaluate(y)
            g2 = float(g @ g)
            if g2 == 0.0:
                return np.full(d + len(vm) + 1, 1.0)
            sgn = 1.0 if g @ g_ref >= 0 else -1.0
            return np.concatenate([val * g / g2, sgn * (vm @ g) / math.sqrt(g2), [y @ y - 1.0]])
        return resid

    def float_value_grad(y):
        val, g = f.value_and_grad(y.reshape(1, d))
        return val[0], g[0]

    found: list[np.ndarray] = []
    rough: list[np.ndarray] = []
    for y0 in _sphere_points(d, starts, seed):
        g_ref = float_value_grad(y0)[1]
        resid = make_resid(float_value_grad, g_ref)
        try:
            sol = optimize.least_squares(resid, y0, method="trf", xtol=1e-15, ftol=1e-15, gtol=1e-15,
                                         max_nfev=100)
        except (ValueError, FloatingPointError):
            continue
        y = sol.x / np.linalg.norm(sol.x)
        if not np.all(np.isfinite(y)) or np.max(np.abs(resid(y))) > 1e-3:
            continue
        if any(min(np.linalg.norm(y - z), np.linalg.norm(y + z)) < 1e-3 for z in rough):
            continue
        rough.append(y)
        # float noise limits multiple zeros to ~eps**(1/multiplicity); polish exactly
        resid_x = make_resid(exact_value_grad, g_ref)
        try:
            sol = optimize.least_squares(resid_x, y, method="trf", xtol=1e-15, ftol=1e-15, gtol=1e-15,
                                         max_nfev=40)
        except (ValueError, FloatingPointError):
            continue
        y = sol.x / np.linalg.norm(sol.x)
        if not np.all(np.isfinite(y)) or np.max(np.abs(resid_x(y))) > 1e-10:
            continue
        nz = np.flatnonzero(np.abs(y) > 1e-12)
        if len(nz) and y[nz[0]] < 0:
            y = -y
        if any(np.linalg.norm(y - z) < 1e-6 for z in found):
            continue
        found.append(y)
        if len(found) >= count:
            break
    found.sort(key=lambda z: tuple(-np.round(z, 9)))
    return tuple(tuple(float(x) for x in y) for y in found)


# ---------------------------------------------------------------------------
# sigma and sigma0 estimates
# ---------------------------------------------------------------------------

def _probe_directions(p: Polynomial, v: Subspace, cfg: ProbeConfig) -> list[tuple[str, np.ndarray]]:
    d = p.dim
    out: list[tuple[str, np.ndarray]] = []
    for u in cfg.directions:
        u = np.asarray(u, float)
        if len(u) != d:
            raise DimensionMismatch("probe direction length differs from polynomial dimension")
        out.append(("user", u / np.linalg.norm(u)))
    pm = p.principal_part()
    singular = singular_directions(pm, v, cfg.max_singular, cfg.seed)
    for y in singular:
        out.append(("singular", np.asarray(y)))
    # zeros of the principal part that are not tied to V
    for y in singular_directions(pm, None, max(1, cfg.max_singular // 2), cfg.seed):
        if all(abs(abs(float(np.dot(y, z))) - 1.0) > 1e-9 for z in singular):
            out.append(("characteristic", np.asarray(y)))
    for u in _sphere_points(d, cfg.n_random_directions, cfg.seed + 1):
        out.append(("random", u))
    return out


def _estimate_sigma_trace(p: Polynomial, v: Subspace, cfg: ProbeConfig):
    trace = RatioTrace()
    dirs = _probe_directions(p, v, cfg)
    radii = cfg.radii
    for did, (kind, u) in enumerate(dirs):
        trace.curves[did] = {"kind": kind, "direction": [float(x) for x in u]}
        for r in radii:
            xi = tuple(float(x) for x in r * u)
            sh = _Shifted(p, xi)
            for t in cfg.t_grid:
                trace.add(RatioSample(did, float(r), float(t), _ratio_on(sh, v, t, cfg), xi))
    return trace


def estimate_sigma(p: Polynomial, v: Subspace, cfg: ProbeConfig | None = None) -> SigmaEstimate:
    """Upper-bound estimate of ``inf_t liminf_{xi->oo} P~_V(xi,t)/P~(xi,t)``.

    The liminf is approximated along each probe ray by the minimum over the
    last ``cfg.tail_shells`` radius shells; the estimate is the minimum over
    rays and the t grid.  Results are memoized; treat them as read-only.
    """
    return _estimate_sigma(p, v, cfg or ProbeConfig())


@lru_cache(maxsize=64)
def _estimate_sigma(p: Polynomial, v: Subspace, cfg: ProbeConfig) -> SigmaEstimate:
    if p.is_zero():
        raise ValueError("the zero polynomial is excluded")
    if v.dim != p.dim:
        raise DimensionMismatch("subspace and polynomial dimensions differ")
    if v.is_full:
        trace = RatioTrace()
        return SigmaEstimate(1.0, None, None, trace, per_t={float(t): 1.0 for t in cfg.t_grid})
    trace = _estimate_sigma_trace(p, v, cfg)
    tail = set(cfg.radii[-cfg.tail_shells:])
    per_t: dict[float, float] = {}
    best = None
    for s in trace.samples:
        if s.radius not in tail:
            continue
        per_t[s.t] = min(per_t.get(s.t, math.inf), s.ratio)
        if best is None or s.ratio < best.ratio:
            best = s
    decaying = False
    if best is not None:
        decaying = is_decaying([s.ratio for s in trace.curve(best.direction_id, best.t)])
    return SigmaEstimate(
        upper_bound=best.ratio,
        witness_xi=best.xi,
        witness_t=best.t,
        trace=trace,
        witness_curve=best.direction_id,
        decaying=decaying,
        per_t=per_t,
    )


def _float_limit(p: Polynomial) -> float:
    """Largest |xi| + t keeping float evaluations of P well inside range."""
    deg = max(p.degree, 1)
    return 2.0 ** min(60, int(900 / deg))


def estimate_sigma0(p: Polynomial, v: Subspace, cfg: ProbeConfig | None = None) -> SigmaEstimate:
    """Upper-bound estimate of ``inf_{t>1, xi} P~_V(xi,t)/P~(xi,t)``.

    Candidates: the samples of :func:`estimate_sigma`, a wider sweep in t along
    the rays with the smallest ratios, homogeneous rescalings ``(lam*xi, lam*t)`` of the principal
    part's own best point (the limit of these ratios is the principal part's
    ratio), and finally Nelder-Mead descent in ``(xi, log t)``.  Results are
    memoized; treat them as read-only.
    """
    return _estimate_sigma0(p, v, cfg or ProbeConfig())


@lru_cache(maxsize=64)
def _estimate_sigma0(p: Polynomial, v: Subspace, cfg: ProbeConfig) -> SigmaEstimate:
    base = estimate_sigma(p, v, cfg)
    trace = RatioTrace()
    trace.extend(base.trace, 0)
    if v.is_full:
        return SigmaEstimate(1.0, (0.0,) * p.dim, float(cfg.t_grid[0]), trace, per_t=dict(base.per_t))
    d = p.dim

    def ratio_at(xi, t) -> float:
        return _ratio_on(_Shifted(p, xi), v, t, cfg)

    # wider t sweep along the probe rays
    next_id = max(trace.curves, default=-1) + 1
    t_wide = []
    t = min(cfg.t_grid)
    while t <= cfg.sigma0_t_max:
        if t not in cfg.t_grid:
            t_wide.append(t)
        t *= 4.0
    limit = _float_limit(p)
    curve_min: dict[int, float] = {}
    for smp in base.trace.samples:
        curve_min[smp.direction_id] = min(curve_min.get(smp.direction_id, math.inf), smp.ratio)
    best_curves = sorted(curve_min, key=lambda c: (curve_min[c], c))[: cfg.sigma0_wide_curves]
    for cid in sorted(best_curves):
        u = np.asarray(base.trace.curves[cid]["direction"])
        for r in cfg.radii[:: cfg.sigma0_radius_stride]:
            xi = tuple(float(x) for x in r * u)
            sh = _Shifted(p, xi)
            for tw in t_wide:
                if r + tw > limit:
                    continue
                trace.add(RatioSample(cid, float(r), float(tw), _ratio_on(sh, v, tw, cfg), xi))

    # the origin, at every t of the grid
    trace.curves[next_id] = {"kind": "origin"}
    origin = (0.0,) * d
    sh0 = _Shifted(p, origin)
    for tt in cfg.t_grid:
        trace.add(RatioSample(next_id, 0.0, float(tt), _ratio_on(sh0, v, tt, cfg), origin))
    next_id += 1

    # transfer of the principal part's witness along the homogeneous scaling
    pm = p.principal_part()
    if p.is_homogeneous() is None:
        est_m = estimate_sigma0(pm, v, cfg)
        if est_m.witness_xi is not None:
            xi_m = np.asarray(est_m.witness_xi, float)
            t_m = float(est_m.witness_t)
            nrm = np.linalg.norm(xi_m) + t_m
            trace.curves[next_id] = {
                "kind": "principal-scaling",
                "xi": [float(x) for x in xi_m],
                "t": t_m,
                "principal_ratio": est_m.upper_bound,
            }
            for j in range(0, cfg.sigma0_scale_max_exp + 1, 2):
                lam = 2.0 ** j
                if lam * nrm > limit:
                    break
                xi = tuple(float(x) for x in lam * xi_m)
                trace.add(RatioSample(next_id, lam, lam * t_m, ratio_at(xi, lam * t_m), xi))
            next_id += 1

    # local descent from the best distinct candidates
    seen = set()
    starts = []
    for s in sorted(trace.samples, key=lambda s: s.ratio):
        key = (s.xi, s.t)
        if key in seen:
            continue
        seen.add(key)
        starts.append(s)
        if len(starts) >= cfg.sigma0_descent_starts:
            break
    for s in starts:
        if s.ratio == 0.0:
            continue
        x0 = np.concatenate([np.asarray(s.xi, float), [math.log(s.t)]])
        best: dict = {"r": s.ratio, "x": x0}

        def obj(x):
            tt = math.exp(min(x[-1], math.log(limit)))
            if tt <= 1.0 or not np.all(np.isfinite(x)):
                return 2.0
            r = ratio_at(tuple(float(c) for c in x[:-1]), tt)
            if r < best["r"]:
                best["r"], best["x"] = r, x.copy()
            return r

        scale = max(1.0, float(np.linalg.norm(x0[:-1])))
        simplex = [x0]
        for i in range(d + 1):
            e = x0.copy()
            e[i] += 0.05 * scale if i < d else 0.25
            simplex.append(e)
        optimize.minimize(obj, x0, method="Nelder-Mead",
                          options={"maxfev": cfg.sigma0_descent_evals, "initial_simplex": np.array(simplex),
                                   "xatol": 1e-9, "fatol": 1e-15})
        if best["r"] < s.ratio:
            xb = best["x"]
            trace.curves[next_id] = {"kind": "descent", "start_curve": s.direction_id}
            trace.add(RatioSample(next_id, float(np.linalg.norm(xb[:-1])), float(math.exp(xb[-1])),
                                  best["r"], tuple(float(c) for c in xb[:-1])))
            next_id += 1

    w = trace.minimum()
    # a witness on a descent curve inherits the decay test of its start curve
    cid = w.direction_id
    desc = trace.curves.get(cid, {})
    if desc.get("kind") == "descent":
        cid = desc["start_curve"]
    curve = [s for s in trace.samples if s.direction_id == cid]
    if trace.curves.get(cid, {}).get("kind") != "principal-scaling":
        curve = [s for s in curve if s.t == (w.t if w.direction_id == cid else curve[0].t)] or curve
        # best per radius along the ray
        per_r: dict[float, float] = {}
        for s in trace.samples:
            if s.direction_id == cid:
                per_r[s.radius] = min(per_r.get(s.radius, math.inf), s.ratio)
        vals = [per_r[r] for r in sorted(per_r)]
    else:
        vals = [s.ratio for s in sorted(curve, key=lambda s: s.radius)]
    decaying = is_decaying(vals) or (w.ratio == 0.0)
    per_t: dict[float, float] = {}
    for s in trace.samples:
        per_t[s.t] = min(per_t.get(s.t, math.inf), s.ratio)
    return SigmaEstimate(w.ratio, w.xi, w.t, trace, witness_curve=w.direction_id, decaying=decaying,
                         per_t=per_t)


# ---------------------------------------------------------------------------
# hypoellipticity
# ---------------------------------------------------------------------------

@dataclass
class HypoellipticityVerdict:
    supported: bool
    max_final_ratio: float
    curves: list[dict]
    witness: dict | None = None

    @property
    def label(self) -> str:
        return "supported" if self.supported else "refuted"

    def to_json(self) -> dict:
        return {
            "verdict": self.label,
            "max_final_ratio": self.max_final_ratio,
            "witness": self.witness,
            "curves": self.curves,
        }


def _derivative_ratio(p: Polynomial, xi) -> float:
    """``max_{alpha != 0} |P^(alpha)(xi)| / |P(xi)|`` (``inf`` when ``P(xi) = 0``)."""
    nums, _ = shift_integer_coefficients(p, as_fractions(xi))
    zero = (0,) * p.dim
    c0 = abs(nums.get(zero, 0))
    if c0 == 0:
        return math.inf
    top = 0
    for a, c in nums.items():
        if a == zero:
            continue
        w = abs(c)
        for ai in a:
            if ai > 1:
                w *= math.factorial(ai)
        top = max(top, w)
    return float(Fraction(top, c0))


def _variety_normal(pm: Polynomial, y0: np.ndarray) -> np.ndarray:
    """Unit normal to ``{Pm = 0}`` at ``y0``, also at zeros of higher multiplicity.

    Uses the gradient of the lowest-order derivative ``d^beta Pm`` whose
    gradient does not vanish at ``y0``.
    """
    d = pm.dim
    scale = float(pm.coefficient_scale())
    for order in range(pm.degree):
        best = None
        for idx in combinations_with_replacement(range(d), order):
            beta = [0] * d
            for i in idx:
                beta[i] += 1
            q = pm.derivative(tuple(beta))
            if q.is_zero():
                continue
            _, g = _NumPoly({a: float(c) for a, c in q.terms.items()}, d).value_and_grad(y0.reshape(1, d))
            g = g[0]
            if best is None or np.linalg.norm(g) > np.linalg.norm(best):
                best = g
        if best is not None and np.linalg.norm(best) > 1e-8 * scale:
            return best / np.linalg.norm(best)
    n = np.zeros(d)
    n[int(np.argmin(np.abs(y0)))] = 1.0
    n -= (n @ y0) * y0
    return n / np.linalg.norm(n)


def is_hypoelliptic_numeric(p: Polynomial, cfg: ProbeConfig | None = None) -> HypoellipticityVerdict:
    """Probe ``max_alpha |P^(alpha)|/|P| -> 0`` along rays and curves near ``{P_m = 0}``.

    Curves near the characteristic variety are ``r*y0 + s*r**gamma*n`` with
    ``y0`` a unit zero of the principal part, ``n`` its unit normal and
    ``s = +-1``; ``gamma = 0`` means the unshifted ray ``r*y0``.
    """
    cfg = cfg or ProbeConfig()
    if p.degree < 1:
        raise ValueError("hypoellipticity probe needs a nonconstant polynomial")
    d = p.dim
    exps = list(range(0, cfg.hypo_max_exp + 1, cfg.hypo_exp_stride))
    if exps[-1] != cfg.hypo_max_exp:
        exps.append(cfg.hypo_max_exp)
    radii = [2.0 ** e for e in exps]

    curves: list[tuple[dict, callable]] = []
    for u in cfg.directions:
        u = np.asarray(u, float) / np.linalg.norm(u)
        curves.append(({"kind": "ray", "direction": u.tolist()}, lambda r, u=u: r * u))
    for u in _sphere_points(d, cfg.n_random_directions, cfg.seed + 2):
        curves.append(({"kind": "ray", "direction": u.tolist()}, lambda r, u=u: r * u))
    pm = p.principal_part()
    zeros = [np.asarray(y) for y in cfg.directions if pm.evaluate(y) == 0]
    zeros += [np.asarray(y) for y in singular_directions(pm, None, cfg.max_singular, cfg.seed)]
    for y0 in zeros:
        y0 = y0 / np.linalg.norm(y0)
        n = _variety_normal(pm, y0)
        curves.append(({"kind": "variety", "direction": y0.tolist(), "gamma": 0.0, "side": 0},
                       lambda r, y0=y0: r * y0))
        for gamma in cfg.hypo_gammas:
            for side in (1.0, -1.0):
                curves.append((
                    {"kind": "variety", "direction": y0.tolist(), "gamma": gamma, "side": side},
                    lambda r, y0=y0, n=n, g=gamma, s=side: r * y0 + s * r ** g * n,
                ))

    report = []
    witness = None
    worst = 0.0
    supported = True
    for desc, path in curves:
        vals = []
        point = None
        for r in radii:
            point = tuple(float(x) for x in path(r))
            vals.append(_derivative_ratio(p, point))
        final = vals[-1]
        tail = vals[-4:]
        finite = all(math.isfinite(x) for x in tail)
        trend = finite and all(b <= a * (1 + 1e-9) for a, b in zip(tail, tail[1:])) and tail[-1] < tail[0]
        ok = finite and final < cfg.hypo_tol and trend
        entry = dict(desc, radii=radii, ratios=vals, final=final, ok=ok)
        report.append(entry)
        worst = max(worst, final)
        if not ok and supported:
            supported = False
            witness = {"curve": desc, "xi": list(point), "ratio": final}
    return HypoellipticityVerdict(supported, worst, report, witness)
