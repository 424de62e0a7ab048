from fractions import Fraction

import pytest

from turbo.coupling import Family
from turbo.optimize import SearchSpec, _check_unimodal, _grid, joint_search, tie_run
from turbo.settings import ConfigError


def test_search_spec_defaults():
    spec = SearchSpec("pic", "1/2")
    assert spec.family is Family.PIC
    assert spec.lam_max == Fraction(1, 2)
    assert SearchSpec("PPC", "2/3").lam_max == Fraction(99, 100)
    with pytest.raises(ConfigError):
        SearchSpec("PIC", 1)


def test_grid_is_exact():
    grid = _grid(Fraction(0), Fraction(1, 2), Fraction(1, 10))
    assert grid == [Fraction(k, 10) for k in range(6)]


def test_infeasible_rate_has_no_candidates(small_transfer):
    spec = SearchSpec("PIC", Fraction(1, 10), lam_min=Fraction(2, 5))
    with pytest.raises(ConfigError):
        joint_search(spec, small_transfer, threads=1)


def test_unimodality_warning(capsys):
    _check_unimodal([{"eps_bp": x} for x in (0.5, 0.6, 0.55, 0.65)], 1e-4)
    assert "niet unimodaal" in capsys.readouterr().err
    _check_unimodal([{"eps_bp": x} for x in (0.5, 0.6, 0.55, 0.5)], 1e-4)
    assert capsys.readouterr().err == ""


def test_tie_run_is_contiguous_around_peak():
    rows = [{"lambda": Fraction(k, 10), "eps_bp": e} for k, e in enumerate([0.70, 0.69, 0.65, 0.69, 0.70, 0.68])]
    assert [r["lambda"] for r in tie_run(rows, 0.015)] == [Fraction(0), Fraction(1, 10)]
    assert [r["lambda"] for r in tie_run(rows, 0.005)] == [Fraction(0)]
    assert [r["lambda"] for r in tie_run(rows, 0.1)] == [Fraction(k, 10) for k in range(6)]


# Optimale drempels bij m = 1 en het gerapporteerde λ-interval
TABLE_RATES = [
    ("PIC", "9/10", 0.0863, 0.50, 0.50),
    ("PPC", "9/10", 0.0931, 0.19, 0.20),
    ("PIC", "4/5", 0.1811, 0.50, 0.50),
    ("PPC", "4/5", 0.1896, 0.25, 0.28),
    ("PIC", "3/4", 0.2307, 0.50, 0.50),
    ("PPC", "3/4", 0.2385, 0.28, 0.30),
    ("PIC", "2/3", 0.3151, 0.50, 0.50),
    ("PPC", "2/3", 0.3206, 0.30, 0.31),
    ("PIC", "1/2", 0.4865, 0.44, 0.48),
    ("PPC", "1/2", 0.4865, 0.32, 0.33),
    ("PIC", "1/3", 0.6576, 0.37, 0.42),
    ("PPC", "1/3", 0.6545, 0.32, 0.35),
]


@pytest.mark.slow
@pytest.mark.parametrize("family,rate,eps_bp,lam_lo,lam_hi", TABLE_RATES)
def test_joint_search_memory_one(full_transfer, family, rate, eps_bp, lam_lo, lam_hi):
    spec = SearchSpec(family, Fraction(rate))
    res = joint_search(spec, full_transfer)
    assert res.eps_bp == pytest.approx(eps_bp, abs=1e-3)
    step = float(spec.lam_step)
    assert float(res.tie_low) <= lam_hi + step + 1e-9
    assert float(res.tie_high) >= lam_lo - step - 1e-9
    assert res.tie_low <= res.best_lam <= res.tie_high
    assert res.rho == (1 / Fraction(rate) - 1) / 2 * (1 - res.best_lam)
    assert set(res.curve["stage"]) == {"grof", "fijn"}
