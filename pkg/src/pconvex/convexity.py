"""Convexity verdicts for complements of dual cones and the surjectivity report.

For ``X = R^d minus the dual of an open proper cone G``:

* ``X`` is P-convex for supports iff the principal part ``Pm`` has no zero in
  ``G``.  :func:`check_principal_nonvanishing` decides this exactly when
  ``Pm = a * G2^k`` for a quadratic form ``G2`` and ``G`` is round (an S-lemma
  certificate), and by seeded minimization otherwise.
* ``X x R`` is P+-convex for singular supports iff ``sigma0_P(span{y}) != 0``
  for all ``y`` in ``G``; :func:`pplus_singsupp_verdict` probes sampled rays.

Verdicts carry a basis tag (``exact``, ``evidence``, ``witness``) so that a
sampled check is never reported as a proof.
"""

from __future__ import annotations

import itertools
import json
import math
import os
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy import optimize

from ._exact import det, is_psd
from .cones import ROUND, ComplementOfDual, Cone, sample_rays
from .hfunc import (
    BOUNDED_TOL,
    VANISH_TOL,
    HypoellipticityVerdict,
    ProbeConfig,
    SigmaEstimate,
    Subspace,
    _NumPoly,
    estimate_sigma,
    estimate_sigma0,
    is_hypoelliptic_numeric,
    sampled_sigma_ratio,
    unit_ball_samples,
)
from .localize import (
    LocalizationError,
    localization_upper_bound,
    simple_characteristic_localization,
)
from .polycore import Polynomial, as_fractions

__all__ = [
    "SCHEMA_VERSION",
    "WITNESS_TOL",
    "LINK_TOL",
    "ZERO_TOL",
    "Verdict",
    "KeyInequalityChain",
    "AnalysisReport",
    "quadratic_power_root",
    "check_principal_nonvanishing",
    "p_convex_supports_verdict",
    "pplus_singsupp_verdict",
    "power_identity_check",
    "key_inequality_report",
    "surjectivity_report",
]

SCHEMA_VERSION = 1
WITNESS_TOL = 1e-10
LINK_TOL = 1e-6
# ratios this small come from exact cancellation, not from a trend
ZERO_TOL = 1e-12


@dataclass
class Verdict:
    """``holds`` is True, False, or None (indeterminate)."""

    holds: bool | None
    basis: str
    statement: str
    witness: list[float] | None = None
    details: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "holds": self.holds,
            "basis": self.basis,
            "statement": self.statement,
            "witness": self.witness,
            "details": self.details,
        }


# ---------------------------------------------------------------------------
# principal part on the cone
# ---------------------------------------------------------------------------

def _lex_leading(p: Polynomial):
    return max(p.terms.items(), key=lambda kv: kv[0])


def quadratic_power_root(pm: Polynomial) -> tuple[Fraction, Polynomial, int] | None:
    """Write ``pm = a * G**k`` with ``G`` a quadratic form, or return None.

    The root is extracted term by term in lexicographic order: the leading
    term of ``pm/a - G**k`` determines the next term of ``G``.
    """
    m = pm.is_homogeneous()
    if pm.is_zero() or m is None or m < 2 or m % 2:
        return None
    k = m // 2
    d = pm.dim
    lead, a = _lex_leading(pm)
    if any(e % k for e in lead):
        return None
    target = pm * (1 / a)
    gamma = tuple(e // k for e in lead)
    g_terms = {gamma: Fraction(1)}
    shift = tuple((k - 1) * e for e in gamma)
    for _ in range(d * (d + 1) // 2 + 1):
        rest = target - Polynomial(d, g_terms) ** k
        if rest.is_zero():
            return a, Polynomial(d, g_terms), k
        delta, c = _lex_leading(rest)
        expo = tuple(x - y for x, y in zip(delta, shift))
        if min(expo) < 0 or sum(expo) != 2 or expo in g_terms or expo > min(g_terms):
            return None
        g_terms[expo] = c / k
    return None


def _quadratic_matrix(g: Polynomial) -> list[list[Fraction]]:
    d = g.dim
    m = [[Fraction(0)] * d for _ in range(d)]
    for a, c in g.terms.items():
        idx = [i for i, e in enumerate(a) for _ in range(e)]
        i, j = idx
        if i == j:
            m[i][i] += c
        else:
            m[i][j] += c / 2
            m[j][i] += c / 2
    return m


def _round_cone_certificate(g: Polynomial, cone: Cone) -> dict | None:
    """An exact certificate that the quadratic form ``g`` has no zero in a round cone.

    Either ``s*G`` is positive definite for the sign ``s`` of ``G`` on the
    axis, or there is a rational ``mu > 0`` with ``s*G - mu*H`` positive
    semidefinite, where ``H(y) = <a,y>^2 - cos2 |a|^2 |y|^2`` is
    positive exactly on the cone and its negative.  Then ``s*G >= mu*H > 0`` on
    the cone.
    """
    a = cone.direction
    d = cone.dim
    gmat = _quadratic_matrix(g)
    na2 = sum(x * x for x in a)
    hmat = [[a[i] * a[j] - (cone.cos2 * na2 if i == j else 0) for j in range(d)] for i in range(d)]
    sign = 1 if g.evaluate(a) > 0 else -1 if g.evaluate(a) < 0 else 0
    if sign == 0:
        return None
    definite = [[sign * x for x in row] for row in gmat]
    if all(det([r[:k] for r in definite[:k]]) > 0 for k in range(1, d + 1)):
        return {"sign": sign, "mu": "0", "quadratic_form": g.format(), "definite": True}
    gf = np.array(gmat, dtype=float) * sign
    hf = np.array(hmat, dtype=float)

    def neg_min_eig(mu):
        return -float(np.linalg.eigvalsh(gf - mu * hf)[0])

    hi = 1.0
    while neg_min_eig(hi) > neg_min_eig(hi / 2) and hi < 1e8:
        hi *= 2
    res = optimize.minimize_scalar(neg_min_eig, bounds=(0.0, 2 * hi), method="bounded",
                                   options={"xatol": 1e-13})
    candidates = []
    for limit in (1, 10, 100, 10 ** 4, 10 ** 6, 10 ** 9, 10 ** 12):
        mu = Fraction(float(res.x)).limit_denominator(limit)
        if mu > 0 and mu not in candidates:
            candidates.append(mu)
    for mu in candidates:
        cert = [[sign * gmat[i][j] - mu * hmat[i][j] for j in range(d)] for i in range(d)]
        if is_psd(cert):
            return {"sign": sign, "mu": str(mu), "quadratic_form": g.format()}
    return None


def _float_margin(cone: Cone, y: np.ndarray) -> float:
    """Positive inside the cone (scale-free), nonpositive outside."""
    y = y / np.linalg.norm(y)
    if cone.kind == ROUND:
        a = np.array(cone.axis)
        s = float(a @ y)
        return s * abs(s) - float(cone.cos2)
    normals = [np.array([float(x) for x in n]) for n in cone.facets]
    return min((float(n @ y) / np.linalg.norm(n) for n in normals), default=1.0)


def _generic_minimum(pm: Polynomial, cone: Cone, cfg: ProbeConfig) -> tuple[float, np.ndarray | None, bool]:
    """Seeded multistart minimization of ``|Pm|/scale`` over the unit sphere inside the cone."""
    d = pm.dim
    scale = float(pm.coefficient_scale())
    num = _NumPoly({a: float(c) / scale for a, c in pm.terms.items()}, d)
    rays = np.array(sample_rays(cone, cfg.cone_samples, cfg.seed))
    vals = np.abs(num.value(rays))
    order = np.argsort(vals, kind="stable")[:8]

    def obj(y):
        n = np.linalg.norm(y)
        if n == 0:
            return 10.0
        y = y / n
        margin = _float_margin(cone, y)
        if margin <= 0:
            return 2.0 - margin
        return float(abs(num.value(y.reshape(1, d))[0]))

    best_val, best_y = math.inf, None
    for i in order:
        res = optimize.minimize(obj, rays[i], method="Nelder-Mead",
                                options={"xatol": 1e-12, "fatol": 1e-16, "maxfev": 400 * d})
        y = res.x / np.linalg.norm(res.x)
        # Newton polish toward the variety, trying multiplicity-scaled steps
        for _ in range(40):
            v, g = num.value_and_grad(y.reshape(1, d))
            v, g = float(v[0]), g[0]
            gg = float(g @ g)
            if v == 0.0 or gg == 0.0:
                break
            cands = []
            for mult in (1, 2, 4, 8):
                z = y - mult * v * g / gg
                nz = np.linalg.norm(z)
                if nz == 0:
                    continue
                z /= nz
                if _float_margin(cone, z) > 0:
                    cands.append((abs(float(num.value(z.reshape(1, d))[0])), tuple(z)))
            if not cands:
                break
            nv, z = min(cands)
            if nv >= abs(v):
                break
            y = np.array(z)
        val = abs(float(num.value(y.reshape(1, d))[0]))
        if val < best_val:
            best_val, best_y = val, y
    exact_zero = False
    if best_y is not None and best_val <= WITNESS_TOL:
        pt = as_fractions(best_y)
        exact = abs(pm.evaluate(pt)) / pm.coefficient_scale()
        exact_zero = (exact <= WITNESS_TOL and cone.contains(pt)
                      and _float_margin(cone, best_y) > 1e-6)
    return best_val, best_y, exact_zero


def check_principal_nonvanishing(pm: Polynomial, cone: Cone, cfg: ProbeConfig | None = None) -> Verdict:
    """Does the homogeneous ``pm`` vanish nowhere on the open cone?"""
    cfg = cfg or ProbeConfig()
    if pm.is_zero() or pm.is_homogeneous() is None:
        raise ValueError("principal part must be a nonzero homogeneous polynomial")
    if pm.dim != cone.dim:
        raise ValueError("cone and polynomial dimensions differ")
    if not cone.is_proper():
        raise ValueError("cone must be proper")
    statement = "principal part has no zero in the cone"
    if pm.degree == 0:
        return Verdict(True, "exact", statement, details={"path": "constant"})
    if cone.kind == ROUND:
        root = quadratic_power_root(pm)
        if root is not None:
            a, g, k = root
            cert = _round_cone_certificate(g, cone)
            if cert is not None:
                cert.update({"path": "quadratic-power", "power": k, "leading_factor": str(a)})
                return Verdict(True, "exact", statement, details=cert)
            if g.evaluate(cone.direction) == 0:
                return Verdict(False, "witness", statement, witness=list(cone.axis),
                               details={"path": "quadratic-power", "value_at_witness": "0"})
    best, y, is_zero = _generic_minimum(pm, cone, cfg)
    details = {"path": "sampled-minimization", "observed_minimum": best, "samples": cfg.cone_samples}
    if is_zero:
        return Verdict(False, "witness", statement, witness=[float(x) for x in y], details=details)
    return Verdict(True, "evidence", statement, details=details)


def p_convex_supports_verdict(p: Polynomial, cone: Cone, cfg: ProbeConfig | None = None) -> Verdict:
    if p.degree < 1:
        raise ValueError("P must be nonconstant")
    v = check_principal_nonvanishing(p.principal_part(), cone, cfg)
    v.statement = "X = R^d minus the dual cone is P-convex for supports"
    return v


# ---------------------------------------------------------------------------
# sigma0 along rays of the cone
# ---------------------------------------------------------------------------

def pplus_singsupp_verdict(p: Polynomial, cone: Cone, cfg: ProbeConfig | None = None) -> Verdict:
    """Probe ``sigma0_P(span{y})`` on sampled rays ``y`` of the cone.

    Stops at the first ray whose estimate is below the vanishing threshold
    with a decaying trace (or below ``ZERO_TOL``).  Such a witness is re-checked with the asymptotic
    estimate ``sigma_P(span{y})``; if that does not also fall below the
    bounded-below threshold the witness is tagged ``sigma0-only``.
    """
    cfg = cfg or ProbeConfig()
    if p.degree < 1:
        raise ValueError("P must be nonconstant")
    statement = "X x R is P+-convex for singular supports"
    rays = sample_rays(cone, cfg.cone_rays, cfg.seed)
    checks = []
    estimates: list[SigmaEstimate] = []
    for y in rays:
        est = estimate_sigma0(p, Subspace.line(y), cfg)
        estimates.append(est)
        entry = {"ray": list(y), **est.to_json()}
        checks.append(entry)
        if est.upper_bound < VANISH_TOL and (est.decaying or est.upper_bound <= ZERO_TOL):
            sig = estimate_sigma(p, Subspace.line(y), cfg)
            kind = "asymptotic" if sig.upper_bound < BOUNDED_TOL else "sigma0-only"
            entry["sigma_upper_bound"] = sig.upper_bound
            return Verdict(False, "witness", statement, witness=list(y),
                           details={"checks": checks, "witness_kind": kind,
                                    "rays_sampled": len(rays), "rays_checked": len(checks),
                                    "_estimates": estimates})
    if all(c["upper_bound"] >= BOUNDED_TOL for c in checks):
        return Verdict(True, "evidence", statement,
                       details={"checks": checks, "rays_sampled": len(rays), "rays_checked": len(checks),
                                "_estimates": estimates})
    return Verdict(None, "indeterminate", statement,
                   details={"checks": checks, "rays_sampled": len(rays), "rays_checked": len(checks),
                            "_estimates": estimates})


# ---------------------------------------------------------------------------
# the key inequality chain
# ---------------------------------------------------------------------------

def power_identity_check(q: Polynomial, k: int, v: Subspace, cfg: ProbeConfig | None = None,
                         pairs: int = 8, points: int = 256) -> dict:
    """Compare sampled ratios of ``Q**k`` and ``Q`` on shared point sets."""
    cfg = cfg or ProbeConfig()
    rng = np.random.default_rng(cfg.seed + 11)
    d = q.dim
    qk = q ** k
    num_pts = unit_ball_samples(v.rank, points, cfg.seed) if v.rank else np.zeros((1, 0))
    basis = v.matrix()
    den_pts = unit_ball_samples(d, points, cfg.seed + 1)
    # the slice points are also offered to the full-ball maximum
    den_pts = np.vstack([den_pts, num_pts @ basis]) if v.rank else den_pts
    worst = 0.0
    for _ in range(pairs):
        xi = tuple(float(x) for x in rng.standard_normal(d) * 2.0 ** rng.integers(0, 12))
        t = float(2.0 ** rng.uniform(0.1, 6))
        r1 = sampled_sigma_ratio(q, v, xi, t, num_pts, den_pts)
        rk = sampled_sigma_ratio(qk, v, xi, t, num_pts, den_pts)
        worst = max(worst, abs(rk - r1 ** k))
    return {"power": k, "pairs": pairs, "points": points, "max_abs_error": worst}


def _find_characteristic(q: Polynomial, x) -> tuple[tuple[int, ...], Polynomial] | None:
    """Small integer simple characteristic of ``q``, preferring one whose localization bound on span{x} is 0."""
    d = q.dim
    cands = [c for c in itertools.product(range(-2, 3), repeat=d) if any(c)]
    cands.sort(key=lambda c: (sum(e * e for e in c), tuple(-e for e in c)))
    first = None
    for c in cands:
        try:
            l = simple_characteristic_localization(q, c)
        except LocalizationError:
            continue
        if localization_upper_bound(l, [x]).is_zero:
            return c, l
        if first is None:
            first = (c, l)
    return first


@dataclass
class KeyInequalityChain:
    """``s0_P <= s0_Pm = s0_{Q^k} = (s0_Q)^k <= (s_Q)^k <= loc_bound^k``."""

    x: list[float]
    power: int
    values: dict
    links: list[dict]
    characteristic: list[int] | None
    localization: str | None
    estimates: dict = field(default_factory=dict, repr=False)

    @property
    def passed(self) -> bool:
        return all(link["passed"] for link in self.links)

    @property
    def forces_zero(self) -> bool:
        return self.passed and self.values.get("localization_bound_squared") == "0"

    @property
    def consistent(self) -> bool:
        """Recorded estimates respect the chain within ``LINK_TOL``.

        The last comparison (estimated ``sigma_Q^k`` against the localization
        bound) is made only when the bound is exactly zero: the estimate is an
        upper bound for ``sigma_Q`` and cannot be compared with a positive one.
        """
        v = self.values
        ok = (v["sigma0_P"] <= v["sigma0_Pm"] + LINK_TOL
              and abs(v["sigma0_Pm"] - v["sigma0_Q_pow"]) <= LINK_TOL
              and v["sigma0_Q_pow"] <= v["sigma_Q_pow"] + LINK_TOL)
        if v.get("localization_bound_squared") == "0":
            ok = ok and v["sigma_Q_pow"] <= LINK_TOL
        return ok

    def to_json(self) -> dict:
        return {
            "x": self.x,
            "power": self.power,
            "values": self.values,
            "links": self.links,
            "simple_characteristic": self.characteristic,
            "localization": self.localization,
            "all_links_pass": self.passed,
            "consistent": self.consistent,
            "forces_zero": self.forces_zero,
        }


def key_inequality_report(p: Polynomial, q: Polynomial, x, cfg: ProbeConfig | None = None,
                          xi=None) -> KeyInequalityChain:
    """Evaluate each link of the chain bounding ``sigma0_P(span{x})`` by the localization of ``Q``."""
    cfg = cfg or ProbeConfig()
    if q.is_zero() or q.is_homogeneous() is None or q.degree < 1:
        raise ValueError("Q must be a nonconstant homogeneous polynomial")
    if p.dim != q.dim:
        raise ValueError("P and Q have different dimensions")
    if p.degree % q.degree:
        raise ValueError("deg P is not a multiple of deg Q")
    k = p.degree // q.degree
    pm = p.principal_part()
    if pm != q ** k:
        raise ValueError("principal part of P is not a power of Q")
    xv = as_fractions(x)
    if not any(xv):
        raise ValueError("x must be nonzero")
    v = Subspace.line(x)

    s0_p = estimate_sigma0(p, v, cfg)
    s0_pm = estimate_sigma0(pm, v, cfg)
    s0_q = estimate_sigma0(q, v, cfg)
    s_q = estimate_sigma(q, v, cfg)
    power = power_identity_check(q, k, v, cfg)

    if xi is None:
        found = _find_characteristic(q, xv)
    else:
        found = (tuple(xi), simple_characteristic_localization(q, xi))
    bound = localization_upper_bound(found[1], [xv]) if found else None

    values = {
        "sigma0_P": s0_p.upper_bound,
        "sigma0_Pm": s0_pm.upper_bound,
        "sigma0_Q_pow": s0_q.upper_bound ** k,
        "sigma_Q_pow": s_q.upper_bound ** k,
        "sigma0_Q": s0_q.upper_bound,
        "sigma_Q": s_q.upper_bound,
        "localization_bound_squared": str(bound.squared) if bound else None,
        "localization_bound_pow": bound.value ** k if bound else None,
    }
    links = [
        {"link": "a", "claim": "sigma0_P <= sigma0_Pm", "lhs": s0_p.upper_bound, "rhs": s0_pm.upper_bound,
         "passed": s0_p.upper_bound <= s0_pm.upper_bound + LINK_TOL},
        {"link": "b", "claim": "sampled ratio of Q^k equals k-th power of sampled ratio of Q",
         "principal_part_equals_power": True, **power,
         "passed": power["max_abs_error"] <= 1e-12},
        {"link": "c", "claim": "sigma0_Q <= sigma_Q", "lhs": s0_q.upper_bound, "rhs": s_q.upper_bound,
         "passed": s0_q.upper_bound <= s_q.upper_bound + LINK_TOL},
    ]
    if bound is None:
        links.append({"link": "d", "claim": "sigma_Q <= localization bound = 0", "applicable": False,
                      "reason": "no real simple characteristic found", "passed": False})
    else:
        links.append({"link": "d", "claim": "sigma_Q <= localization bound = 0", "applicable": True,
                      "bound_squared": str(bound.squared), "exact": True, "passed": bound.is_zero})
    return KeyInequalityChain(
        x=[float(c) for c in xv], power=k, values=values, links=links,
        characteristic=list(found[0]) if found else None,
        localization=found[1].format() if found else None,
        estimates={"sigma0_P": s0_p, "sigma0_Pm": s0_pm, "sigma0_Q": s0_q, "sigma_Q": s_q},
    )


# ---------------------------------------------------------------------------
# the report
# ---------------------------------------------------------------------------

def _hypo_summary(h: HypoellipticityVerdict) -> dict:
    return {
        "verdict": h.label,
        "max_final_ratio": h.max_final_ratio,
        "witness": h.witness,
        "curves_probed": len(h.curves),
    }


@dataclass
class AnalysisReport:
    polynomial: Polynomial
    cone: Cone
    supports: Verdict
    singular_supports_x: Verdict
    pplus: Verdict
    hypoellipticity: HypoellipticityVerdict
    chain: KeyInequalityChain | None
    conclusions: dict
    traces: dict[str, object] = field(default_factory=dict, repr=False)

    def to_json(self) -> dict:
        pplus = self.pplus.to_json()
        pplus["details"] = {k: v for k, v in pplus["details"].items() if not k.startswith("_")}
        checks = pplus["details"].get("checks", [])
        names = sorted(n for n in self.traces if n.startswith("sigma0_ray"))
        for c, name in zip(checks, names):
            c["trace"] = name
        return {
            "schema_version": SCHEMA_VERSION,
            "inputs": {
                "P": self.polynomial.format(),
                "dim": self.polynomial.dim,
                "cone": self.cone.to_json(),
                "X": ComplementOfDual(self.cone).to_json(),
            },
            "principal_part_check": self.supports.to_json(),
            "sigma0_checks": checks,
            "pplus_verdict": {k: v for k, v in pplus.items() if k != "details"}
            | {"witness_kind": pplus["details"].get("witness_kind"),
               "rays_sampled": pplus["details"].get("rays_sampled"),
               "rays_checked": pplus["details"].get("rays_checked")},
            "key_inequality_chain": self.chain.to_json() if self.chain else None,
            "hypoellipticity": _hypo_summary(self.hypoellipticity),
            "singular_supports_X": self.singular_supports_x.to_json(),
            "conclusions": self.conclusions,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n"

    def write_traces(self, directory) -> list[str]:
        os.makedirs(directory, exist_ok=True)
        written = []
        for name, obj in sorted(self.traces.items()):
            path = os.path.join(directory, name)
            obj.to_csv(path)
            written.append(path)
        return written


def surjectivity_report(p: Polynomial, cone: Cone, cfg: ProbeConfig | None = None, *,
                        chain: KeyInequalityChain | None = None,
                        hypo: HypoellipticityVerdict | None = None) -> AnalysisReport:
    """Assemble the convexity verdicts and the two surjectivity conclusions."""
    cfg = cfg or ProbeConfig()
    if p.degree < 1:
        raise ValueError("P must be nonconstant")
    if not cone.is_proper():
        raise ValueError("cone must be proper")
    if p.dim != cone.dim:
        raise ValueError("cone and polynomial dimensions differ")
    supports = p_convex_supports_verdict(p, cone, cfg)
    hypo = hypo or is_hypoelliptic_numeric(p, cfg)
    if hypo.supported:
        sing = Verdict(True, "evidence", "X is P-convex for singular supports",
                       details={"via": "hypoellipticity (numeric, supported)"})
    else:
        sing = Verdict(None, "not established", "X is P-convex for singular supports",
                       details={"via": "hypoellipticity refuted; no other criterion is applied"})
    pplus = pplus_singsupp_verdict(p, cone, cfg)

    traces: dict[str, object] = {}
    for i, est in enumerate(pplus.details.get("_estimates", [])):
        traces[f"sigma0_ray{i}.csv"] = est.trace

    if supports.holds is False:
        p_surj = {"value": False, "basis": "principal part vanishes in the cone (witness)",
                  "witness": supports.witness}
    elif supports.holds and sing.holds:
        p_surj = {"value": True, "basis": f"supports: {supports.basis}; singular supports: evidence "
                  "(hypoellipticity)"}
    else:
        p_surj = {"value": None, "basis": "not established"}
    if pplus.holds is False:
        pp_surj = {"value": False, "basis": f"sigma0 vanishes on a ray of the cone (witness, "
                   f"{pplus.details['witness_kind']})", "witness": pplus.witness}
    elif pplus.holds and supports.holds:
        pp_surj = {"value": True, "basis": f"supports: {supports.basis}; singular supports: evidence"}
    else:
        pp_surj = {"value": None, "basis": "not established"}
    conclusions = {"P_surjective_on_X": p_surj, "Pplus_surjective_on_XxR": pp_surj}
    return AnalysisReport(p, cone, supports, sing, pplus, hypo, chain, conclusions, traces)
