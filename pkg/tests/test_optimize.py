import numpy as np
import pytest

from gepkit.optimize import (
    SearchSettings,
    _axis,
    maximize_rho_s,
    maximize_scalar,
)

GRID_ONLY = SearchSettings(refine_rounds=0, polish=False)


def test_axis_is_nested_under_doubling():
    a = set(np.round(_axis(1e-6, 1.0, 16), 15))
    b = set(np.round(_axis(1e-6, 1.0, 32), 15))
    assert a <= b


def test_scalar_known_maximum():
    f = lambda x: -(np.asarray(x) - 0.37) ** 2
    res = maximize_scalar(f, 1e-6, 1.0)
    assert res.argmax[0] == pytest.approx(0.37, abs=1e-9)
    assert res.value == pytest.approx(0.0, abs=1e-15)


def test_scalar_boundary_maximum_exact():
    f = lambda x: np.asarray(x) * 2.0
    res = maximize_scalar(f, 1e-6, 1.0)
    assert res.argmax[0] == 1.0
    assert res.value == 2.0


def test_grid_refinement_monotone():
    f = lambda x: np.sin(7.0 * np.asarray(x))
    coarse = maximize_scalar(f, 1e-6, 1.0, SearchSettings(
        base_grid=16, refine_rounds=0, polish=False))
    fine = maximize_scalar(f, 1e-6, 1.0, SearchSettings(
        base_grid=32, refine_rounds=0, polish=False))
    assert fine.value >= coarse.value


def test_rho_s_known_maximum():
    def f(rho, s):
        s = np.asarray(s)
        return -(rho - 0.4) ** 2 - (s - 0.6) ** 2
    res = maximize_rho_s(f)
    assert res.argmax[0] == pytest.approx(0.4, abs=1e-7)
    assert res.argmax[1] == pytest.approx(0.6, abs=1e-7)
    assert res.value == pytest.approx(0.0, abs=1e-13)


def test_rho_s_coupled_constraint_respected():
    calls = []

    def f(rho, s):
        s = np.asarray(s)
        calls.append((rho, s.copy()))
        return rho + s  # pushes toward the s = 1 - rho boundary

    res = maximize_rho_s(f, s_cap=lambda r: 1.0 - r)
    for rho, s in calls:
        assert np.all(s <= 1.0 - rho + 1e-12)
    assert res.value == pytest.approx(1.0, abs=1e-9)


def test_shift_equivariance_is_exact():
    def base(rho, s):
        s = np.asarray(s)
        return -((rho - 0.3) ** 2) * (1 + s) - np.log1p(s * rho)

    r0 = maximize_rho_s(base)
    r1 = maximize_rho_s(lambda rho, s: base(rho, s) + 0.7)
    assert r1.value - r0.value == pytest.approx(0.7, abs=1e-12)
