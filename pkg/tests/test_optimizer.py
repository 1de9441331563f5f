import math

import numpy as np
import pytest

from qsopt.errors import InvalidInputError, SingularSystemError
from qsopt.grover import simulated_average_success, standard_count
from qsopt.optimizer import (
    _factor,
    build_system,
    curvature_breakdown,
    curvature_S,
    first_order_directions,
    optimize,
)
from qsopt.twovalue import TwoValueSpec, first_order_direction_closed, s_factor


def test_uniform_system_has_zero_rhs():
    for n in (4, 16, 64):
        system = build_system(np.full(n, 1 / n))
        assert np.array_equal(system.V, np.zeros(2 * n))
        d_psi, d_phi = first_order_directions(system)
        assert np.abs(d_psi).max() < 1e-15 and np.abs(d_phi).max() < 1e-15


def test_top_left_block_is_twice_identity():
    rng = np.random.default_rng(1)
    p = rng.random(11)
    system = build_system(p / p.sum())
    assert np.array_equal(system.M[:11, :11], 2 * np.eye(11))


def test_directions_are_tangent():
    rng = np.random.default_rng(2)
    p = rng.random(20)
    system = build_system(p / p.sum())
    d_psi, d_phi = first_order_directions(system)
    assert abs(system.psi0 @ d_psi) < 1e-12 and abs(system.psi0 @ d_phi) < 1e-12


def test_two_value_direction_matches_closed_form():
    spec = TwoValueSpec(100, 10, 0.05)
    d_psi, d_phi = first_order_directions(build_system(spec.probs()))
    closed, _ = first_order_direction_closed(spec)
    assert np.abs(d_psi - closed).max() < 1e-9
    assert np.abs(d_phi - closed).max() < 1e-9
    assert len(np.unique(np.round(d_psi, 12))) == 2


def test_curvature_examples():
    assert curvature_S(np.full(16, 1 / 16)) == pytest.approx(-2, abs=1e-6)
    spec = TwoValueSpec(100, 10, 0.05)
    assert curvature_S(spec.probs()) == pytest.approx(-50 / 41, rel=1e-4)


def test_curvature_vanishes_with_a_suppressed_block():
    n = 60
    values = [curvature_S(TwoValueSpec(n, k, 1e-6).probs()) for k in (5, 15, 30, 45)]
    assert np.all(np.diff(np.abs(values)) < 0)
    assert abs(curvature_S(TwoValueSpec(n, 15, 1e-9).probs())) < 1e-6


def test_exactly_zero_block_is_singular():
    # S = 0: no finite trade-off exists, and M loses rank
    with pytest.raises(SingularSystemError):
        curvature_S(TwoValueSpec(60, 15, 0.0).probs())


def test_curvature_agrees_with_fitted_curve():
    from qsopt.verify import empirical_curvature

    rng = np.random.default_rng(3)
    p = rng.random(12)
    p /= p.sum()
    br = curvature_breakdown(p)
    assert len(br.terms) == 5 and br.s == pytest.approx(sum(br.terms))
    assert empirical_curvature(p) == pytest.approx(br.s, rel=1e-3)


def test_curvature_is_bounded_for_random_priors():
    rng = np.random.default_rng(4)
    for _ in range(8):
        n = int(rng.integers(4, 40))
        p = rng.random(n) ** 3
        s = curvature_S(p / p.sum())
        assert -2 - 1e-6 <= s < 0


def test_optimize_zero_budget():
    rng = np.random.default_rng(5)
    p = rng.random(30)
    out = optimize(p / p.sum(), delta_p=0.0)
    psi0 = np.full(30, 1 / math.sqrt(30))
    assert out.delta_lambda == 0 and out.j_min == out.j_standard == standard_count(30)
    assert np.array_equal(out.psi_opt, psi0) and np.array_equal(out.phi_opt, psi0)


def test_optimize_uniform_large():
    out = optimize(np.full(1000, 1e-3), delta_p=0.01)
    assert out.delta_lambda == pytest.approx(-0.1, abs=1e-6)


def test_optimize_two_value_budget():
    spec = TwoValueSpec(100, 10, 0.05)
    out = optimize(spec.probs(), delta_p=0.005)
    assert out.j_min <= out.j_standard
    assert simulated_average_success(out.psi_opt, out.phi_opt, spec.probs(), out.j_min) >= 1 - 0.005 - 0.002
    assert out.s_factor == pytest.approx(s_factor(spec), rel=1e-4)
    assert out.lambda_opt == pytest.approx(math.pi / 2 - math.asin(0.1) + out.delta_lambda)


def test_repair_can_be_disabled():
    spec = TwoValueSpec(50, 10, 0.002)
    plain = optimize(spec.probs(), delta_p=1e-3, repair=False)
    fixed = optimize(spec.probs(), delta_p=1e-3)
    assert plain.repair_steps == 0
    assert fixed.j_min == plain.j_min + fixed.repair_steps
    assert fixed.predicted_success >= 1 - 1e-3 - 1e-12


@pytest.mark.parametrize("bad", [-0.1, 1.0, 1.5, float("nan")])
def test_optimize_rejects_bad_budget(bad):
    with pytest.raises(InvalidInputError):
        optimize(np.full(4, 0.25), delta_p=bad)


def test_singular_system_error():
    m = np.ones((4, 4))
    with pytest.raises(SingularSystemError) as info:
        _factor(m)
    assert info.value.condition > 1e12
