"""Construction of the cone counterexample in dimension d >= 3.

``Q = x1^2 - x2^2 - ... - xd^2`` has a simple characteristic at
``(1, 1, 0, ..., 0)`` whose linear localization ``2x1 - 2x2`` is orthogonal
to ``e_d``, so ``sigma_Q(e_d) = 0``.  ``P = Q^4 + R`` with a lower-order
``R`` making ``P`` hypoelliptic then gives, for the round cone around
``e_d``, an operator surjective on ``X`` whose augmentation ``P+`` is not
surjective on ``X x R``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction

from .cones import ComplementOfDual, Cone, cone_around
from .convexity import AnalysisReport, KeyInequalityChain, key_inequality_report, surjectivity_report
from .hfunc import HypoellipticityVerdict, ProbeConfig, is_hypoelliptic_numeric
from .localize import (
    ConvergenceReport,
    LocalizationBound,
    localization_upper_bound,
    simple_characteristic_localization,
    verify_localization,
)
from .polycore import Polynomial, parse

__all__ = ["PipelineSpec", "PipelineError", "PaperExample", "build_paper_example", "default_r"]


class PipelineError(RuntimeError):
    """A failed precondition or assertion; ``code`` is the CLI exit status."""

    def __init__(self, message: str, code: int = 3, partial: dict | None = None):
        super().__init__(message)
        self.code = code
        self.partial = partial or {}


@dataclass(frozen=True)
class PipelineSpec:
    dim: int = 3
    r_text: str | None = None
    cos2: Fraction = Fraction(1, 2)
    seed: int = 0
    probe: ProbeConfig | None = None

    def config(self) -> ProbeConfig:
        return replace(self.probe or ProbeConfig(), seed=self.seed)


def default_r(dim: int, m: int = 2) -> Polynomial:
    """``(x1^2 + ... + xd^2)^(2m-1)``, of degree ``4m - 2``."""
    s = sum((Polynomial.variable(dim, i) ** 2 for i in range(1, dim + 1)), Polynomial.constant(dim, 0))
    return s ** (2 * m - 1)


@dataclass
class PaperExample:
    q: Polynomial
    p: Polynomial
    r: Polynomial
    cone: Cone
    xi: tuple[int, ...]
    localization: Polynomial
    bound: LocalizationBound
    hypoellipticity: HypoellipticityVerdict
    convergence: ConvergenceReport
    chain: KeyInequalityChain
    report: AnalysisReport
    checks: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        out = self.report.to_json()
        out["construction"] = {
            "Q": self.q.format(),
            "R": self.r.format(),
            "P": self.p.format(),
            "x": [0] * (self.q.dim - 1) + [1],
            "xi": list(self.xi),
            "localization": self.localization.format(),
            "localization_bound": self.bound.to_json(),
            "checks": self.checks,
        }
        out["convergence"] = self.convergence.to_json()
        return out


def build_paper_example(spec: PipelineSpec) -> PaperExample:
    d = spec.dim
    if d < 3:
        raise PipelineError(f"dimension must be at least 3, got {d}", code=2)
    cfg = spec.config()
    partial: dict = {"dim": d, "seed": spec.seed}

    q = Polynomial.variable(d, 1) ** 2
    for j in range(2, d + 1):
        q = q - Polynomial.variable(d, j) ** 2
    e_d = tuple([0] * (d - 1) + [1])
    q_at_ed = q.evaluate(e_d)
    if q_at_ed != -1:
        raise PipelineError(f"Q(e_d) = {q_at_ed}, expected -1", partial=partial)
    xi = tuple([1, 1] + [0] * (d - 2))
    l = simple_characteristic_localization(q, xi)
    expected = Polynomial.linear_form([2, -2] + [0] * (d - 2))
    if l != expected:
        raise PipelineError(f"localization {l.format()} differs from 2*x1 - 2*x2", partial=partial)
    bound = localization_upper_bound(l, [e_d])
    if not bound.is_zero:
        raise PipelineError("localization bound on span{e_d} is not zero", partial=partial)
    partial.update({"Q": q.format(), "localization": l.format(), "localization_bound": bound.to_json()})

    if spec.r_text is None:
        r = default_r(d)
    else:
        r = parse(spec.r_text, d)
        if r.degree >= 8:
            raise PipelineError("R must have degree below deg Q^4 = 8", code=2, partial=partial)
    p = q ** 4 + r
    partial["P"] = p.format()

    hypo = is_hypoelliptic_numeric(p, cfg)
    partial["hypoellipticity"] = {"verdict": hypo.label, "max_final_ratio": hypo.max_final_ratio,
                                  "witness": hypo.witness}
    if not hypo.supported:
        raise PipelineError("hypoellipticity of P = Q^4 + R is refuted; witness curve attached",
                            partial=partial)

    cone = cone_around(e_d, cos2=spec.cos2)
    if not (cone.contains(e_d) and cone.is_proper()):
        raise PipelineError("cone hypotheses fail", partial=partial)
    convergence = verify_localization(q, xi, l, cfg=cfg)
    chain = key_inequality_report(p, q, e_d, cfg, xi=xi)
    report = surjectivity_report(p, cone, cfg, chain=chain, hypo=hypo)
    report.traces["localization_convergence.csv"] = convergence

    conclusions = report.conclusions
    got = (conclusions["P_surjective_on_X"]["value"], conclusions["Pplus_surjective_on_XxR"]["value"])
    checks = {
        "Q_at_e_d": str(q_at_ed),
        "cone_contains_e_d": True,
        "cone_is_proper": True,
        "X": ComplementOfDual(cone).to_json(),
        "localization_converges": convergence.passed,
        "chain_forces_zero": chain.forces_zero,
    }
    example = PaperExample(q, p, r, cone, xi, l, bound, hypo, convergence, chain, report, checks)
    if got != (True, False):
        partial.update(example.to_json())
        raise PipelineError(f"conclusions {got} differ from the expected (True, False)", partial=partial)
    return example
