import csv

import numpy as np
import pytest

from fracwell.energy import FractionalOrder
from fracwell.profile import (
    ProfileProblem,
    initial_profile,
    solve_profile,
    sweep_s,
    sweep_T,
    write_sweep_csv,
)

TANH_CONSTANT = 8 / 3


@pytest.fixture(scope="module")
def integer_profile():
    return solve_profile(ProfileProblem(FractionalOrder(1), T=10, n=2001))


@pytest.fixture(scope="module")
def fractional_sweep():
    return sweep_T(ProfileProblem(FractionalOrder(0, 0.75), T=20), [20, 40])


def test_integer_profile_constant(integer_profile):
    assert integer_profile.converged
    assert abs(integer_profile.m_hat - TANH_CONSTANT) <= 0.01 * TANH_CONSTANT


def test_integer_profile_is_tanh(integer_profile):
    u = integer_profile.profile
    # the optimal profile solves u' = 1 - u^2, so u = tanh(x)
    assert np.max(np.abs(u.values - np.tanh(u.x))) < 1e-3


def test_profile_is_odd(integer_profile, fractional_sweep):
    u = integer_profile.profile.values
    assert np.max(np.abs(u + u[::-1])) <= 1e-3
    frac = solve_profile(ProfileProblem(FractionalOrder(0, 0.75), T=20)).profile.values
    assert np.max(np.abs(frac + frac[::-1])) <= 1e-3


def test_profile_is_pinned_beyond_T(integer_profile):
    u = integer_profile.profile
    assert np.all(u.values[u.x <= -10] == -1.0) and np.all(u.values[u.x >= 10] == 1.0)


def test_wider_truncation_does_not_raise_the_constant(fractional_sweep):
    m20, m40 = (row["m_hat"] for row in fractional_sweep)
    assert m40 <= m20 + 1e-4
    assert fractional_sweep[1]["n"] > fractional_sweep[0]["n"]


def test_integer_truncation_plateaus():
    rows = sweep_T(ProfileProblem(FractionalOrder(1), T=5), [5, 10, 20])
    m = [r["m_hat"] for r in rows]
    assert m[1] <= m[0] + 1e-4 and m[2] <= m[1] + 1e-4
    assert abs(m[2] - m[1]) <= 1e-4


def test_fractional_truncation_cauchy_differences_shrink():
    rows = sweep_T(ProfileProblem(FractionalOrder(0, 0.6), T=10, n=501), [10, 20, 40])
    m = [r["m_hat"] for r in rows]
    assert all(r["converged"] for r in rows)
    assert abs(m[2] - m[1]) < abs(m[1] - m[0])


def test_sweep_T_keeps_spacing():
    p = ProfileProblem(FractionalOrder(1), T=5, n=257)
    rows = sweep_T(p, [5])
    assert len(rows) == 1 and rows[0]["n"] == 257
    with pytest.raises(ValueError):
        sweep_T(p, [10, 5])


def test_empty_s_list():
    assert sweep_s(0, []) == []


def test_sweep_s_refines_near_integers():
    rows = sweep_s(0, [0.6, 0.95], T=5, n=201)
    assert [r["s"] for r in rows] == [0.6, 0.95, 0.95]
    assert rows[2]["n"] == 2 * rows[1]["n"] - 1
    assert abs(rows[2]["m_hat"] - rows[1]["m_hat"]) < 0.05 * rows[1]["m_hat"]


def test_sweep_s_records_invalid_orders():
    rows = sweep_s(0, [0.3, 0.7], T=5, n=201, refine_near_integers=False)
    assert rows[0]["error"] and np.isnan(rows[0]["m_hat"])
    assert rows[1]["error"] == "" and rows[1]["converged"]


def test_sweep_csv(tmp_path):
    rows = sweep_s(1, [0.5], T=5, n=201)
    path = tmp_path / "sweep.csv"
    write_sweep_csv(rows, path)
    back = list(csv.DictReader(open(path)))
    assert list(back[0]) == ["s", "T", "n", "m_hat", "well", "seminorm", "converged"]
    assert float(back[0]["m_hat"]) == rows[0]["m_hat"]


def test_problem_validation():
    with pytest.raises(ValueError):
        ProfileProblem(FractionalOrder(1), T=10, n=101)  # h > T/50
    with pytest.raises(ValueError):
        ProfileProblem(FractionalOrder(1), T=-1)
    with pytest.raises(ValueError):
        ProfileProblem(FractionalOrder(2), T=10, n=2001, domain_half_width=10.005).pad_nodes()


def test_initial_profile_is_pinned():
    p = ProfileProblem(FractionalOrder(1), T=5, n=301)
    u = initial_profile(p.grid, p.T, 1.0)
    x = p.grid.nodes
    assert np.all(u[x <= -5] == -1) and np.all(u[x >= 5] == 1)


def test_best_start_is_kept():
    res = solve_profile(ProfileProblem(FractionalOrder(1, 0.5), T=5, n=201))
    assert len(res.starts) == 3
    assert res.m_hat == min(st["m_hat"] for st in res.starts)
