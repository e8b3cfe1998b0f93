import math

import numpy as np
import pytest

from _oracles import (
    constant_potential_one_step_a,
    drifted_ruin_probability,
    enumerate_paths_survival,
    path_sum_survival,
)
from killedwalk.env import Environment, EnvironmentSource, make_distribution, sample_environment
from killedwalk.line_solver import (
    F_limit,
    F_r,
    WindowModel,
    green_function_window,
    solve_survival_window,
    two_point_a,
    two_point_e,
)

BERN = make_distribution({"kind": "finite", "atoms": [[0.0, 0.5], [1.0, 0.5]]})


def zero_env(r, hi):
    return Environment(r, hi, np.zeros(hi - r + 1))


def bern_env(seed, r, hi, stream=0):
    return sample_environment(BERN, (r, hi), seed=seed, stream_id=stream)


# ---------------------------------------------------------------------------
# the oracle chain: explicit enumeration -> time-stepped path sum -> solver
# ---------------------------------------------------------------------------


def test_path_sum_oracle_matches_explicit_enumeration():
    rng = np.random.default_rng(5)
    for p in (0.5, 0.65):
        for _ in range(4):
            r, y = -2, 2
            omega = rng.exponential(0.7, size=y - r - 1)
            by_site = {site: omega[site - (r + 1)] for site in range(r + 1, y)}
            for x in (0, 1):
                brute = enumerate_paths_survival(by_site, r, x, y, p, max_len=11)
                dp, _ = path_sum_survival(omega, r, x, y, p, max_len=11)
                assert dp == pytest.approx(brute, rel=1e-12)


@pytest.mark.parametrize("p", [0.5, 0.3, 0.7])
def test_solver_matches_path_sum_on_small_windows(p):
    rng = np.random.default_rng(42)
    for trial in range(6):
        r = -int(rng.integers(2, 6))
        y = int(rng.integers(1, 12 + r + 1 if 12 + r >= 1 else 2))
        y = max(y, 1)
        omega = rng.exponential(1.0, size=y - r - 1)
        env = Environment(r, y, np.concatenate([[0.0], omega, [0.0]]))
        for max_len, slack in ((30, 0.0), (3000, 1e-12)):
            oracle, tail = path_sum_survival(omega, r, 0, y, p, max_len=max_len)
            got = solve_survival_window(WindowModel(env, r, y, 0, p)).e_value
            assert oracle <= got + 1e-13
            assert abs(got - oracle) <= tail + slack + 1e-13


def test_forward_sweep_equals_banded_solve():
    for seed in range(8):
        env = bern_env(seed, -6, 9)
        for y in (1, 4, 9):
            banded = solve_survival_window(WindowModel(env, -6, y, 0, 0.5))
            sweep_a = two_point_a(env, 0, y, -6, 0.5)
            assert sweep_a == pytest.approx(banded.a_value, rel=1e-12, abs=1e-13)


def test_batch_solver_preserves_order_across_threads():
    from killedwalk.line_solver import solve_survival_batch

    models = [WindowModel(bern_env(seed, -6, 6), -6, 5, 0, 0.5) for seed in range(12)]
    one = solve_survival_batch(models, threads=1)
    four = solve_survival_batch(models, threads=4)
    assert [r.e_value for r in one] == [r.e_value for r in four]
    assert len({round(r.e_value, 15) for r in one}) > 1


# ---------------------------------------------------------------------------
# closed forms
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("r", [-1, -4, -9])
def test_gamblers_ruin(r):
    res = F_r(zero_env(r, 1), r)
    assert res.e_value == pytest.approx(-r / (1.0 - r), rel=1e-14)
    assert res.a_value == pytest.approx(-math.log(-r / (1.0 - r)), rel=1e-14)


@pytest.mark.parametrize("p", [0.55, 0.7, 0.35])
@pytest.mark.parametrize("r", [-3, -8])
def test_drifted_gamblers_ruin(p, r):
    res = F_r(zero_env(r, 1), r, p=p)
    assert res.e_value == pytest.approx(drifted_ruin_probability(r, p), rel=1e-12)


def test_target_equals_start_is_empty_sum():
    env = bern_env(3, -4, 4)
    res = solve_survival_window(WindowModel(env, -4, 2, 2, 0.5))
    assert res.e_value == 1.0 and res.a_value == 0.0
    assert two_point_a(env, 2, 2, -4) == 0.0


def test_constant_potential_limit_is_hitting_time_gf():
    for s in (0.8, 0.5, 0.95):
        dist = make_distribution({"kind": "point", "value": -math.log(s)})
        res = F_limit(EnvironmentSource(dist, seed=0), tol=1e-12)
        assert res.converged
        assert res.a_value == pytest.approx(constant_potential_one_step_a(s), abs=1e-10)


def test_delta_zero_limit_flags_slow_mode():
    env = zero_env(-(2**14), 1)
    res = F_limit(env, tol=1e-9)
    assert not res.converged
    assert "not converged" in res.note
    assert 0.0 <= res.a_value <= 1e-3  # ln((1-r)/-r) at the last barrier

    dist_source = EnvironmentSource(make_distribution({"kind": "point", "value": 0.0}), seed=0)
    exact = F_limit(dist_source, tol=1e-9)
    assert exact.converged and exact.a_value == 0.0 and "trivial" in exact.note


def test_drifted_zero_potential_limit_vanishes():
    res = F_limit(zero_env(-64, 1), tol=1e-12, p=0.7)
    assert res.converged
    assert abs(res.a_value) <= 1e-10
    # p -> 1 drives the one-step weight to exp(-omega(0))
    env = bern_env(1, -16, 1)
    res = F_r(env, -16, p=1.0 - 1e-12)
    assert res.a_value == pytest.approx(env.value_at(0), abs=1e-9)


def test_huge_potential_underflows_gracefully():
    big = 1e12
    env = Environment(-4, 1, np.array([0.0, 0.0, 0.0, 0.0, big, 0.0]))
    res = F_r(env, -4)
    assert res.e_value == 0.0
    assert res.underflowed
    assert math.isfinite(res.a_value)
    assert res.a_value == pytest.approx(big + math.log(2.0), rel=1e-12)


# ---------------------------------------------------------------------------
# structural invariants
# ---------------------------------------------------------------------------


def test_additivity_and_multiplication_with_shared_barrier():
    for seed in range(10):
        env = bern_env(seed, -5, 10)
        for y in range(0, 11):
            for z in range(y, 11):
                lhs_a = two_point_a(env, 0, z, -5)
                rhs_a = two_point_a(env, 0, y, -5) + two_point_a(env, y, z, -5)
                assert lhs_a == pytest.approx(rhs_a, rel=1e-12, abs=1e-13)
                lhs_e = two_point_e(env, 0, z, -5)
                rhs_e = two_point_e(env, 0, y, -5) * two_point_e(env, y, z, -5)
                assert lhs_e == pytest.approx(rhs_e, rel=1e-12)


def test_barrier_monotonicity_and_envelope():
    for seed in range(6):
        env = bern_env(seed, -64, 1)
        results = [F_r(env, r) for r in (-1, -2, -4, -8, -16, -32, -64)]
        e_vals = [res.e_value for res in results]
        assert all(b >= a for a, b in zip(e_vals, e_vals[1:]))  # deeper barrier admits more paths
        bound = env.value_at(0) + math.log(2.0)
        for res in results:
            assert 0.0 <= res.a_value <= bound + 1e-12


def test_limit_certificate_brackets_deeper_barrier():
    for seed in range(5):
        env = bern_env(seed, -(2**12), 1)
        res = F_limit(env, tol=1e-7)
        deep = F_r(env, -(2**12))
        assert res.converged
        assert deep.a_value <= res.a_value + 1e-15
        assert res.a_value - deep.a_value <= res.trunc_bound


def test_limit_accepts_custom_schedules():
    env = bern_env(2, -64, 1)
    res = F_limit(env, tol=1e-6, r_schedule=[-4, -16, -64])
    assert res.r_used in (-16, -64)
    with pytest.raises(ValueError, match="negative"):
        F_limit(env, tol=1e-6, r_schedule=[-4, 2])
    with pytest.raises(ValueError, match="tol"):
        F_limit(env, tol=0.0)


def test_window_model_validation():
    env = zero_env(-3, 3)
    with pytest.raises(ValueError, match="barrier"):
        WindowModel(env, 2, 3, 0)
    with pytest.raises(ValueError, match="target"):
        WindowModel(env, -3, -3, 0)
    with pytest.raises(ValueError, match="ill-posed"):
        WindowModel(env, -3, 1, 2)
    with pytest.raises(ValueError, match="window too small"):
        F_r(zero_env(-2, 1), -5)
    with pytest.raises(ValueError, match="step probability"):
        WindowModel(env, -3, 3, 0, 1.5)


# ---------------------------------------------------------------------------
# green function
# ---------------------------------------------------------------------------


def test_green_immediate_death():
    env = Environment(-10, 10, np.full(21, 1e12))
    assert green_function_window(env, 0, 3, (-10, 10)) == pytest.approx(0.0, abs=1e-200)


def test_green_widening_window_is_monotone():
    for seed in range(4):
        env = bern_env(seed, -20, 20)
        for x, y in ((0, 4), (0, 0), (-3, 5)):
            narrow = green_function_window(env, x, y, (-10, 10))
            wide = green_function_window(env, x, y, (-20, 20))
            assert wide >= narrow - 1e-15


def test_green_constant_potential_closed_form():
    # with survival s per visit: g(0, n) = s * G(s)^n / sqrt(1 - s^2)
    s = 0.8
    dist = make_distribution({"kind": "point", "value": -math.log(s)})
    env = sample_environment(dist, (-200, 200), seed=0)
    gf = (1.0 - math.sqrt(1.0 - s * s)) / s
    for n in (0, 1, 5, 12):
        want = s * gf**n / math.sqrt(1.0 - s * s)
        if n == 0:
            want -= s  # the resolvent's identity term is excluded
        got = green_function_window(env, 0, n, (-200, 200))
        assert got == pytest.approx(want, rel=1e-10)


def test_green_requires_interior_points():
    env = zero_env(-5, 5)
    with pytest.raises(ValueError, match="strictly inside"):
        green_function_window(env, -5, 0, (-5, 5))
