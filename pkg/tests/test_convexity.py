import json
from fractions import Fraction

import pytest

from pconvex.cones import cone_around, generated_cone, sample_rays
from pconvex.convexity import (
    check_principal_nonvanishing,
    key_inequality_report,
    pplus_singsupp_verdict,
    quadratic_power_root,
    surjectivity_report,
)
from pconvex.polycore import parse

Q3 = parse("x1^2 - x2^2 - x3^2", 3)
R3 = parse("(x1^2 + x2^2 + x3^2)^3", 3)
P3 = Q3 ** 4 + R3
GAMMA = cone_around((0, 0, 1), cos2=Fraction(1, 2))


def test_quadratic_power_root():
    a, g, k = quadratic_power_root(3 * Q3 ** 4)
    assert (a, k) == (3, 4)
    assert g == Q3 or g == -Q3
    assert quadratic_power_root(parse("x1^4 + x2^4 - x3^4", 3)) is None
    assert quadratic_power_root(parse("x1^3", 3)) is None


def test_q_negative_on_gamma():
    # exact evaluation on sampled rays, and the algebraic certificate
    for y in sample_rays(GAMMA, 200, seed=0):
        yq = tuple(Fraction(v) for v in y)
        assert Q3.evaluate(yq) < 0
    v = check_principal_nonvanishing(Q3 ** 4, GAMMA)
    assert v.holds is True and v.basis == "exact"
    assert v.details["path"] == "quadratic-power"


def test_nonvanishing_fails_on_wide_cone():
    v = check_principal_nonvanishing(Q3, cone_around((1, 0, 0), 0.9))
    assert v.holds is False
    y = tuple(Fraction(x) for x in v.witness)
    assert abs(float(Q3.evaluate(y))) < 1e-9


def test_nonvanishing_evidence_paths():
    assert check_principal_nonvanishing(parse("x1", 3), generated_cone([(1, 0, 0), (1, 1, 0), (1, 0, 1)])).holds
    v = check_principal_nonvanishing(parse("x1^4 + x2^4 - x3^4", 3), cone_around((1, 0, 0), cos2=Fraction(1, 2)))
    assert v.holds is True and v.basis == "evidence"


def test_pplus_linear_witness():
    v = pplus_singsupp_verdict(parse("x1", 2), cone_around((0, 1), cos2=Fraction(1, 2)))
    assert v.holds is False
    assert v.details["witness_kind"] == "asymptotic"


def test_pplus_elliptic_holds():
    v = pplus_singsupp_verdict(parse("x1^2 + x2^2 + x3^2", 3), GAMMA)
    assert v.holds is True


def test_chain_along_e_d():
    chain = key_inequality_report(P3, Q3, (0, 0, 1), xi=(1, 1, 0))
    assert chain.passed
    assert chain.forces_zero
    assert chain.consistent
    assert chain.values["sigma0_P"] < 1e-3
    assert chain.values["localization_bound_squared"] == "0"


def test_chain_along_e1():
    chain = key_inequality_report(P3, Q3, (1, 0, 0))
    assert not chain.forces_zero
    assert chain.consistent
    assert chain.values["localization_bound_squared"] == "1/2"


def test_chain_rejects_wrong_principal_part():
    with pytest.raises(ValueError):
        key_inequality_report(P3 + parse("x1^8", 3), Q3, (0, 0, 1))


def test_report_elliptic():
    rep = surjectivity_report(parse("x1^2 + x2^2 + x3^2", 3), GAMMA)
    c = rep.conclusions
    assert c["P_surjective_on_X"]["value"] is True
    assert c["Pplus_surjective_on_XxR"]["value"] is True


def test_report_deterministic_and_serializable(tmp_path):
    a = surjectivity_report(P3, GAMMA)
    b = surjectivity_report(P3, GAMMA)
    assert a.dumps() == b.dumps()
    doc = json.loads(a.dumps())
    assert doc["conclusions"]["P_surjective_on_X"]["value"] is True
    assert doc["conclusions"]["Pplus_surjective_on_XxR"]["value"] is False
    names = a.write_traces(tmp_path)
    assert names and all((tmp_path / n).exists() for n in names)
