from fractions import Fraction

import pytest

from pconvex.hfunc import Subspace
from pconvex.localize import (
    DegenerateCharacteristic,
    LocalizationError,
    NotCharacteristic,
    NotHomogeneous,
    localization_upper_bound,
    simple_characteristic_localization,
    verify_localization,
)
from pconvex.polycore import Polynomial, parse

Q3 = parse("x1^2 - x2^2 - x3^2", 3)


def test_localization_of_q():
    l = simple_characteristic_localization(Q3, (1, 1, 0))
    assert l == Polynomial.linear_form([2, -2, 0])


def test_localization_errors():
    with pytest.raises(NotCharacteristic):
        simple_characteristic_localization(Q3, (1, 0, 0))
    with pytest.raises(DegenerateCharacteristic):
        simple_characteristic_localization(Q3, (0, 0, 0))
    with pytest.raises(NotHomogeneous):
        simple_characteristic_localization(Q3 + 1, (1, 1, 0))
    with pytest.raises(DegenerateCharacteristic):
        simple_characteristic_localization(Q3 ** 2, (1, 1, 0))


def test_upper_bound_values():
    l = Polynomial.linear_form([2, -2, 0])
    assert localization_upper_bound(l, [(0, 0, 1)]).squared == 0
    assert localization_upper_bound(l, [(1, 0, 0)]).squared == Fraction(1, 2)
    assert localization_upper_bound(l, [(1, -1, 0)]).squared == 1
    assert localization_upper_bound(l, Subspace.full(3)).squared == 1
    assert localization_upper_bound(l, []).is_zero
    # dependent spanning vectors are dropped
    assert localization_upper_bound(l, [(1, 0, 0), (2, 0, 0)]).squared == Fraction(1, 2)


def test_upper_bound_rejects_nonlinear():
    with pytest.raises(LocalizationError):
        localization_upper_bound(Q3, [(0, 0, 1)])
    with pytest.raises(LocalizationError):
        localization_upper_bound(Polynomial.linear_form([1, 0, 0]) + 1, [(0, 0, 1)])


def test_convergence_for_q():
    l = simple_characteristic_localization(Q3, (1, 1, 0))
    rep = verify_localization(Q3, (1, 1, 0), l)
    assert rep.passed
    assert rep.residuals[-1] < 1e-3
    assert -1.3 <= rep.slope <= -0.7
    # the sampled residual is a lower estimate, the l1 bound an upper one
    assert all(r <= b + 1e-12 for r, b in zip(rep.residuals, rep.residual_bounds))


def test_wrong_localization_fails():
    rep = verify_localization(Q3, (1, 1, 0), parse("x3", 3), schedule=[16, 64, 256, 1024, 4096])
    assert not rep.passed
    assert rep.residuals[-1] > 0.5


def test_linear_polynomial_is_its_own_localization(tmp_path):
    p = parse("x1", 2)
    l = simple_characteristic_localization(p, (0, 1))
    rep = verify_localization(p, (0, 1), l, schedule=[1, 2, 4, 8, 16])
    assert rep.passed
    assert max(rep.residuals) < 1e-12
    path = tmp_path / "conv.csv"
    rep.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "n,residual,c_n"
    assert len(lines) == 6
