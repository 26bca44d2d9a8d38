"""Cost functions, cutoffs, analyzer agreement, selection, Dorfman."""

import math
import time
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pooltest.costs import (NoCoverage, best_family_cost, closed_form_cost,
                            cutoff, dorfman_cost, dorfman_opt,
                            dorfman_opt_int, entropy, find_99,
                            generic_cutoff, lambert_w, select_best)
from pooltest.errors import DomainError
from pooltest.mixed import m3_run_cost, mixed_performance, mixed_select
from pooltest.risk import homogeneous, two_group
from pooltest.strategy import build_mixed, get_strategy
from pooltest.treewalk import analyze

GRID = [i / 100 for i in range(1, 100)]

CUTOFF_VALUES = [0.381966011250105, 0.245122333753307, 0.170516459041503,
                 0.149636955876700, 0.113817389150325]


def test_known_cost_values():
    assert math.isclose(float(closed_form_cost("A3", 0.2)),
                        0.723834196891192, rel_tol=0, abs_tol=1e-12)
    assert closed_form_cost("A1", Fraction(1, 2)) == 1
    assert closed_form_cost("A2", Fraction(0)) == Fraction(1, 2)


def test_cost_undefined_at_one_for_pools():
    with pytest.raises(DomainError):
        closed_form_cost("A2", 1.0)
    assert closed_form_cost("A1", 1.0) == 1


def test_doubling_recurrence_matches_explicit():
    # f_{2n}(x) = (x2 + f_n(x2)) / (2 - x) with x2 = 2x - x^2
    for x in GRID:
        x2 = 2 * x - x * x
        lhs = float(closed_form_cost("A4", x))
        rhs = (x2 + float(closed_form_cost("A2", x2))) / (2 - x)
        assert abs(lhs - rhs) <= 1e-12, x


def test_cutoffs_match_reference_decimals():
    start = time.monotonic()
    for i, ref in enumerate(CUTOFF_VALUES, start=1):
        assert abs(cutoff(i) - ref) <= 1e-9, i
    assert time.monotonic() - start < 1.0


def test_cutoff_consistency_costs_cross():
    # at the boundary between A_n-family neighbors the two costs agree
    pairs = [("A1", "A2"), ("A2", "A3"), ("A3", "A4"), ("A4", "A5"),
             ("A5", "A6")]
    for i, (a, b) in enumerate(pairs, start=1):
        g = cutoff(i)
        ca = float(closed_form_cost(a, g))
        cb = float(closed_form_cost(b, g))
        assert abs(ca - cb) <= 1e-10, (a, b, ca - cb)


def test_generic_cutoff_brackets():
    g = generic_cutoff("A12", "A16", (0.045, 0.05))
    assert 0.045 < g < 0.05
    diff = (float(closed_form_cost("A12", g))
            - float(closed_form_cost("A16", g)))
    assert abs(diff) <= 1e-10


def test_analyzer_matches_closed_forms():
    for name in ["A1", "A2", "A3", "A4", "A5", "A6", "A8", "A12", "A16"]:
        for x in GRID[::7]:
            res = analyze(get_strategy(name), homogeneous(x))
            assert abs(res.tests_per_person
                       - float(closed_form_cost(name, x))) <= 1e-10, (name, x)


def test_entropy_lower_bound_on_grid():
    names = ["A1", "A2", "A3", "A4", "A5", "A6", "A8", "A10", "A12", "A15",
             "A16", "A20", "A24"]
    for name in names:
        for x in GRID:
            assert float(closed_form_cost(name, x)) >= entropy(x) - 1e-12, \
                (name, x)


def test_select_best_boundaries():
    assert select_best(0.45).name == "A1"
    assert select_best(0.3).name == "A2"
    assert select_best(0.2).name == "A3"
    assert select_best(0.12).name == "A5"
    # just either side of the first cutoff
    g1 = cutoff(1)
    assert select_best(g1 + 1e-6).name == "A1"
    assert select_best(g1 - 1e-6).name == "A2"


def test_find_99_examples():
    assert find_99(0.15, 64).name == "A4"
    assert find_99(0.40, 64) == NoCoverage()
    assert find_99(0.01, 1024).name == "A80"


def test_improved_family_replaces_16():
    names = {s.name for s in
             __import__("pooltest.strategy",
                        fromlist=["enumerate_family"])
             .enumerate_family(64, improved=True)}
    assert "A15" in names and "A16" not in names
    assert "A30" in names and "A32" not in names


def test_lambert_w_residual():
    for z in [-0.3, -0.1, -0.01, 0.0, 0.5, 1.0, 2.0]:
        w = lambert_w(z)
        assert abs(w * math.exp(w) - z) <= 1e-12, z


def test_dorfman_integer_opt_matches_brute_force():
    for p in [0.001, 0.01, 0.05, 0.1]:
        n = dorfman_opt_int(p)
        best = min(range(2, 201), key=lambda k: dorfman_cost(k, p, k) / k)
        assert n == best, p


def test_dorfman_real_opt_is_stationary():
    for p in [0.001, 0.01, 0.05, 0.1]:
        n = dorfman_opt(p)
        c = lambda k: dorfman_cost(k, p, k) / k
        eps = 1e-4
        assert c(n) <= c(n - eps) + 1e-12 and c(n) <= c(n + eps) + 1e-12


def test_m3_closed_matches_analyzer():
    x, y = 0.35, 0.15
    expected = (1 + y) * (1 + x - x * y) / (1 - y)
    res = analyze(build_mixed("M3"), two_group(x, y))
    assert abs(res.tests_per_run - expected) <= 1e-10
    assert abs(m3_run_cost(x, y) - expected) <= 1e-12


def test_m3_degenerates_to_homogeneous():
    # y -> 0: information per test approaches H(x) / (1 + x), the A2 ratio
    x = 0.3
    lim = entropy(x) / (1 + x)
    assert abs(mixed_performance("M3", x, 1e-9) - lim) <= 1e-6


def test_mixed_select_examples():
    sid = mixed_select(0.38, 0.15)
    assert sid.name == "M1"
    assert mixed_performance(sid, 0.38, 0.15) >= 0.99
    sid = mixed_select(0.25, 0.10)
    assert sid.name.startswith("M4:")
    assert 2 <= int(sid.name.split(":")[1]) <= 5
    assert mixed_performance(sid, 0.25, 0.10) >= 0.99


def test_mixed_select_swap_symmetric():
    # selection treats the two strata by rate, not by argument order
    assert mixed_select(0.38, 0.15).name == mixed_select(0.15, 0.38).name
    assert mixed_select(0.25, 0.10).name == mixed_select(0.10, 0.25).name


@given(st.floats(min_value=0.02, max_value=0.6),
       st.floats(min_value=0.02, max_value=0.6))
@settings(max_examples=30, deadline=None)
def test_mixed_performance_never_beats_entropy_rate(x, y):
    sid = mixed_select(x, y)
    ratio = mixed_performance(sid, x, y)
    assert 0 < ratio <= 1 + 1e-9, (x, y, sid)
