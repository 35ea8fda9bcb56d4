"""Open convex cones, their duals, and seeded ray sampling.

Two kinds of cone are supported.  A round cone ``{y : <a,y> > |a||y| cos(theta)}``
stores its axis direction and ``cos(theta)^2`` as exact rationals, so membership
of rational points is decided exactly.  A generated cone is the interior of the
conic hull of finitely many vectors; membership goes through its facet normals,
computed exactly from ``(d-1)``-subsets of the generators.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from itertools import combinations
from typing import Sequence

import numpy as np
from scipy import optimize

from .polycore import as_fraction, as_fractions

__all__ = [
    "ROUND",
    "GENERATED",
    "Cone",
    "DualCone",
    "ComplementOfDual",
    "cone_around",
    "generated_cone",
    "contains",
    "dual_cone",
    "is_proper",
    "sample_rays",
    "NEAR_BOUNDARY_FRACTION",
]

ROUND = "round"
GENERATED = "generated"
NEAR_BOUNDARY_FRACTION = 0.2


def _dot(a, b):
    return sum(x * y for x, y in zip(a, b))


def _snap_cos2(value: float) -> Fraction:
    """Rational cos^2 for an angle, snapping to a small denominator when within 1e-15."""
    exact = Fraction(value)
    near = exact.limit_denominator(10 ** 6)
    return near if abs(float(near) - value) <= 1e-15 else exact


def _nullspace_vector(rows: Sequence[Sequence[Fraction]], d: int) -> tuple[Fraction, ...] | None:
    """A nonzero vector orthogonal to ``rows`` when they have rank ``d-1``."""
    a = [list(r) for r in rows]
    pivots = []
    r = 0
    for c in range(d):
        piv = next((i for i in range(r, len(a)) if a[i][c] != 0), None)
        if piv is None:
            continue
        a[r], a[piv] = a[piv], a[r]
        inv = 1 / a[r][c]
        a[r] = [x * inv for x in a[r]]
        for i in range(len(a)):
            if i != r and a[i][c] != 0:
                f = a[i][c]
                a[i] = [x - f * y for x, y in zip(a[i], a[r])]
        pivots.append(c)
        r += 1
    if r != d - 1:
        return None
    free = next(c for c in range(d) if c not in pivots)
    v = [Fraction(0)] * d
    v[free] = Fraction(1)
    for i, c in enumerate(pivots):
        v[c] = -a[i][free]
    return _primitive(v)


def _primitive(v: Sequence[Fraction]) -> tuple[Fraction, ...]:
    den = math.lcm(*(x.denominator for x in v))
    ints = [int(x * den) for x in v]
    g = math.gcd(*ints)
    return tuple(Fraction(x // g) for x in ints)


def _rank(vectors: Sequence[Sequence[Fraction]], d: int) -> int:
    a = [list(v) for v in vectors]
    r = 0
    for c in range(d):
        piv = next((i for i in range(r, len(a)) if a[i][c] != 0), None)
        if piv is None:
            continue
        a[r], a[piv] = a[piv], a[r]
        for i in range(r + 1, len(a)):
            if a[i][c] != 0:
                f = a[i][c] / a[r][c]
                a[i] = [x - f * y for x, y in zip(a[i], a[r])]
        r += 1
    return r


@dataclass(frozen=True)
class Cone:
    """An open convex cone in ``R^d``.

    For ``ROUND`` cones ``direction`` is the exact (not necessarily unit) axis
    and ``cos2`` is ``cos(half_angle)^2``; ``axis`` gives the unit axis.  For
    ``GENERATED`` cones ``generators`` holds exact vectors.
    """

    dim: int
    kind: str
    direction: tuple[Fraction, ...] = ()
    cos2: Fraction | None = None
    generators: tuple[tuple[Fraction, ...], ...] = ()

    def __post_init__(self):
        if self.kind == ROUND:
            if len(self.direction) != self.dim or not any(self.direction):
                raise ValueError("round cone needs a nonzero axis of the ambient dimension")
            if self.cos2 is None or not 0 <= self.cos2 < 1:
                raise ValueError("cos^2 of the half-angle must lie in [0, 1)")
        elif self.kind == GENERATED:
            if not self.generators:
                raise ValueError("generated cone needs at least one nonzero generator")
            if any(len(g) != self.dim for g in self.generators):
                raise ValueError("generator dimension mismatch")
        else:
            raise ValueError(f"unknown cone kind {self.kind!r}")

    @property
    def axis(self) -> tuple[float, ...]:
        if self.kind != ROUND:
            raise AttributeError("generated cones have no axis")
        n = math.sqrt(_dot(self.direction, self.direction))
        return tuple(float(x) / n for x in self.direction)

    @property
    def half_angle(self) -> float:
        if self.kind != ROUND:
            raise AttributeError("generated cones have no half-angle")
        return math.acos(math.sqrt(self.cos2))

    @cached_property
    def facets(self) -> tuple[tuple[Fraction, ...], ...]:
        """Inward facet normals of a full-dimensional generated cone."""
        if self.kind != GENERATED:
            raise AttributeError("round cones have no facets")
        d = self.dim
        if d == 1:
            signs = {g[0] > 0 for g in self.generators}
            return ((Fraction(1),),) if signs == {True} else ((Fraction(-1),),) if signs == {False} else ()
        normals = set()
        for subset in combinations(self.generators, d - 1):
            n = _nullspace_vector(subset, d)
            if n is None:
                continue
            vals = [_dot(n, g) for g in self.generators]
            if all(v >= 0 for v in vals):
                normals.add(n)
            elif all(v <= 0 for v in vals):
                normals.add(tuple(-x for x in n))
        return tuple(sorted(normals))

    @property
    def is_empty(self) -> bool:
        return self.kind == GENERATED and _rank(self.generators, self.dim) < self.dim

    def contains(self, y) -> bool:
        y = as_fractions(y)
        if len(y) != self.dim:
            raise ValueError(f"point has {len(y)} coordinates, cone has dimension {self.dim}")
        if self.kind == ROUND:
            s = _dot(self.direction, y)
            return s > 0 and s * s > self.cos2 * _dot(self.direction, self.direction) * _dot(y, y)
        if self.is_empty:
            return False
        return all(_dot(n, y) > 0 for n in self.facets)

    def is_proper(self) -> bool:
        if self.kind == ROUND:
            return True  # half-angle < pi/2 by construction
        g = np.array([[float(x) for x in v] for v in self.generators]).T
        m = g.shape[1]
        # a line in the closed hull <=> sum(l_i g_i) = 0 with l >= 0, l != 0
        res = optimize.linprog(-np.ones(m), A_eq=g, b_eq=np.zeros(self.dim),
                               bounds=[(0, 1)] * m, method="highs")
        return bool(res.status == 0 and -res.fun <= 1e-9)

    def dual(self) -> "DualCone":
        return DualCone(self)

    def to_json(self) -> dict:
        if self.kind == ROUND:
            return {"type": ROUND, "axis": list(self.axis), "cos2_half_angle": str(self.cos2)}
        return {"type": GENERATED, "generators": [[str(x) for x in g] for g in self.generators],
                "cos2_half_angle": None}


@dataclass(frozen=True)
class DualCone:
    """The closed dual ``{xi : <y, xi> >= 0 for all y in cone}``."""

    cone: Cone

    @property
    def dim(self) -> int:
        return self.cone.dim

    @property
    def cos2(self) -> Fraction:
        """cos^2 of the dual half-angle ``pi/2 - theta`` for round cones."""
        if self.cone.kind != ROUND:
            raise AttributeError("only round duals have a half-angle")
        return 1 - self.cone.cos2

    def in_dual(self, xi) -> bool:
        xi = as_fractions(xi)
        if len(xi) != self.dim:
            raise ValueError("dimension mismatch")
        c = self.cone
        if c.kind == ROUND:
            s = _dot(c.direction, xi)
            return s >= 0 and s * s >= self.cos2 * _dot(c.direction, c.direction) * _dot(xi, xi)
        return all(_dot(g, xi) >= 0 for g in c.generators)

    __contains__ = in_dual

    def to_json(self) -> dict:
        if self.cone.kind == ROUND:
            return {"type": ROUND, "closed": True, "axis": list(self.cone.axis),
                    "cos2_half_angle": str(self.cos2)}
        return {"type": GENERATED, "closed": True, "halfspace_normals":
                [[str(x) for x in g] for g in self.cone.generators]}


@dataclass(frozen=True)
class ComplementOfDual:
    """The open set ``X = R^d minus the dual cone``."""

    cone: Cone

    def contains(self, x) -> bool:
        return not self.cone.dual().in_dual(x)

    def to_json(self) -> dict:
        return {"type": "complement_of_dual_cone", "cone": self.cone.to_json()}


def cone_around(x, half_angle: float | None = None, *, cos2=None) -> Cone:
    """Round cone with axis ``x``; give either ``half_angle`` in (0, pi/2) or exact ``cos2``."""
    direction = as_fractions(x)
    if not any(direction):
        raise ValueError("cone axis must be nonzero")
    if (half_angle is None) == (cos2 is None):
        raise ValueError("give exactly one of half_angle and cos2")
    if cos2 is None:
        if not 0 < half_angle < math.pi / 2:
            raise ValueError("half-angle must lie strictly between 0 and pi/2")
        cos2 = _snap_cos2(math.cos(half_angle) ** 2)
    else:
        cos2 = as_fraction(cos2)
        if not 0 < cos2 < 1:
            raise ValueError("cos^2 of the half-angle must lie strictly between 0 and 1")
    return Cone(len(direction), ROUND, direction=direction, cos2=cos2)


def generated_cone(generators) -> Cone:
    gens = tuple(as_fractions(g) for g in generators)
    if not gens:
        raise ValueError("no generators")
    d = len(gens[0])
    nonzero = tuple(g for g in gens if any(g))
    if any(len(g) != d for g in gens):
        raise ValueError("generators have different dimensions")
    if not nonzero:
        raise ValueError("all generators are zero")
    return Cone(d, GENERATED, generators=nonzero)


def contains(cone: Cone, y) -> bool:
    return cone.contains(y)


def dual_cone(cone: Cone) -> DualCone:
    return cone.dual()


def is_proper(cone: Cone) -> bool:
    return cone.is_proper()


def _orthonormal_complement(a: np.ndarray) -> np.ndarray:
    q, _ = np.linalg.qr(np.column_stack([a, np.eye(len(a))]))
    return q[:, 1:len(a)]


def sample_rays(cone: Cone, count: int, seed: int = 0) -> list[tuple[float, ...]]:
    """Seeded unit vectors strictly inside the cone.

    The first ray is the axis (round) or the normalized generator sum; a fixed
    fraction of the rest lies near the boundary (angle at least 0.95 of the
    half-angle for round cones).
    """
    if count < 0:
        raise ValueError("count must be nonnegative")
    if cone.is_empty:
        raise ValueError("cone is empty")
    if count == 0:
        return []
    if not cone.is_proper():
        raise ValueError("cone is not proper")
    rng = np.random.default_rng(seed)
    d = cone.dim
    n_edge = int(round(NEAR_BOUNDARY_FRACTION * (count - 1)))
    out: list[tuple[float, ...]] = []

    if cone.kind == ROUND:
        a = np.array(cone.axis)
        out.append(tuple(float(v) for v in a))
        if d == 1:
            return out * count
        theta = cone.half_angle
        perp = _orthonormal_complement(a)
        for i in range(count - 1):
            edge = i < n_edge
            frac = rng.uniform(0.95, 0.995) if edge else rng.uniform(0.0, 0.95)
            u = perp @ rng.standard_normal(d - 1)
            u /= np.linalg.norm(u)
            phi = frac * theta
            while True:
                y = math.cos(phi) * a + math.sin(phi) * u
                y /= np.linalg.norm(y)
                if cone.contains(tuple(y)):
                    break
                phi *= 0.999
            out.append(tuple(float(v) for v in y))
        return out

    g = np.array([[float(x) for x in v] for v in cone.generators])
    g /= np.linalg.norm(g, axis=1)[:, None]
    centre = g.sum(axis=0)
    centre /= np.linalg.norm(centre)
    if cone.contains(tuple(centre)):
        out.append(tuple(float(v) for v in centre))
    attempts = 0
    while len(out) < count:
        attempts += 1
        if attempts > 1000 * count:
            raise ValueError("could not sample interior rays")
        lam = rng.exponential(1.0, len(g))
        if len(out) - 1 < n_edge:
            lam[rng.integers(len(g))] *= 0.02
        y = lam @ g
        nrm = np.linalg.norm(y)
        if nrm == 0:
            continue
        y /= nrm
        if cone.contains(tuple(y)):
            out.append(tuple(float(v) for v in y))
    return out
