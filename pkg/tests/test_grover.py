import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qsopt.errors import InvalidInputError, InvalidTargetError
from qsopt.grover import (
    GroverSchedule,
    apply_diffusion,
    apply_oracle,
    average_failure,
    average_success,
    j_of_lambda,
    lambda_of_j,
    run_iterations,
    simulated_average_success,
    standard_count,
    standard_grover_prob,
    std_lambda,
    success_probability_analytic,
    success_probability_exact,
)
from qsopt.states import normalize, uniform_state
from qsopt.twovalue import TwoValueSpec


def test_oracle_examples():
    out = apply_oracle([0.5, 0.5, 0.5, 0.5], 0)
    assert np.array_equal(out, [-0.5, 0.5, 0.5, 0.5])
    s = np.array([0.0, 0.6, 0.8])
    assert np.array_equal(apply_oracle(s, 0), s)
    with pytest.raises(InvalidTargetError):
        apply_oracle(s, 3)


def test_diffusion_examples():
    rng = np.random.default_rng(0)
    axis = normalize(rng.normal(size=16))
    assert np.allclose(apply_diffusion(axis, axis), axis, atol=1e-15)
    perp = rng.normal(size=16)
    perp -= axis * (axis @ perp)
    assert np.allclose(apply_diffusion(perp, axis), -perp, atol=1e-14)
    x = normalize(rng.normal(size=16))
    assert np.allclose(apply_diffusion(apply_diffusion(x, axis), axis), x, atol=1e-12)


def test_run_iterations():
    rng = np.random.default_rng(1)
    psi = normalize(rng.normal(size=32))
    phi = normalize(rng.normal(size=32))
    assert np.array_equal(run_iterations(psi, phi, 3, 0), psi)
    assert abs(np.linalg.norm(run_iterations(psi, phi, 3, 25)) - 1) < 1e-11
    u = np.asarray(uniform_state(4))
    for t in range(4):
        assert abs(abs(run_iterations(u, u, t, 1)[t]) - 1) < 1e-12
    with pytest.raises(InvalidInputError):
        run_iterations(psi, phi, 0, -1)


def test_exact_success_examples():
    u4 = uniform_state(4)
    assert abs(success_probability_exact(u4, u4, 2, 1) - 1) < 1e-12
    rng = np.random.default_rng(2)
    psi = normalize(rng.normal(size=5))
    assert success_probability_exact(psi, psi, 1, 0) == pytest.approx(psi[1] ** 2, abs=1e-15)
    u16 = uniform_state(16)
    for j in range(21):
        expected = math.sin((2 * j + 1) * math.asin(0.25)) ** 2
        assert abs(success_probability_exact(u16, u16, 0, j) - expected) < 1e-12


def test_analytic_success_examples():
    rng = np.random.default_rng(3)
    psi = normalize(rng.normal(size=10))
    for t in range(10):
        for j in (0, 1, 4, 11):
            assert abs(success_probability_analytic(psi, psi, t, j) - success_probability_exact(psi, psi, t, j)) < 1e-12
    phi = normalize([0.5, 1.0, 0.3])
    assert success_probability_analytic([1.0, 0.0, 0.0], phi, 0, 0) == pytest.approx(1.0, abs=1e-12)


st_instance = st.tuples(st.integers(2, 40), st.integers(0, 50), st.integers(0, 2**32 - 1))


@settings(max_examples=150, deadline=None)
@given(st_instance)
def test_analytic_matches_exact(instance):
    n, j, seed = instance
    rng = np.random.default_rng(seed)
    psi = normalize(rng.normal(size=n))
    phi = normalize(rng.normal(size=n))
    t = int(rng.integers(n))
    assert abs(success_probability_analytic(psi, phi, t, j) - success_probability_exact(psi, phi, t, j)) < 1e-10


def test_orthogonal_component_only_flips_sign():
    rng = np.random.default_rng(4)
    psi = normalize(rng.normal(size=9))
    phi = normalize(rng.normal(size=9))
    t = 2
    basis, _ = np.linalg.qr(np.column_stack([np.eye(9)[t], phi]))
    perp = lambda v: v - basis @ (basis.T @ v)
    # each reflection acts as -1 off its axis, so the component only flips sign
    for j in (6, 7):
        out = run_iterations(psi, phi, t, j)
        assert np.allclose(perp(out), (-1) ** j * perp(psi), atol=1e-12)


def test_average_success_examples():
    for n in (2, 4, 16, 1000):
        u = uniform_state(n)
        probs = np.full(n, 1 / n)
        assert abs(average_success(u, u, probs, std_lambda(n), n) - 1) < 1e-12
        assert abs(average_success(u, u, probs, 0.0, n) - 1 / n) < 1e-12


def test_average_success_peak_for_two_value():
    spec = TwoValueSpec(100, 10, 0.05)
    u = uniform_state(100)
    grid = np.linspace(1.0, 1.8, 801)
    vals = [average_success(u, u, spec.probs(), lam, 100) for lam in grid]
    step = grid[1] - grid[0]
    assert abs(grid[int(np.argmax(vals))] - (math.pi / 2 - math.asin(0.1))) <= step


def test_average_failure_complements_success():
    rng = np.random.default_rng(5)
    for _ in range(20):
        n = int(rng.integers(3, 30))
        psi = normalize(rng.normal(size=n))
        phi = normalize(rng.normal(size=n))
        probs = rng.random(n)
        probs /= probs.sum()
        lam = float(rng.uniform(0, 3))
        assert abs(average_failure(psi, phi, probs, lam, n) + average_success(psi, phi, probs, lam, n) - 1) < 1e-12


def test_average_failure_keeps_resolution_near_one():
    n = 10**4
    u = uniform_state(n)
    probs = np.full(n, 1 / n)
    lam = std_lambda(n) - 1e-6
    # exact: sin^2 away from its peak by 1e-6 gives a failure of 1e-12
    assert average_failure(u, u, probs, lam, n) == pytest.approx(1e-12, rel=1e-6)


def test_simulated_average_success_matches_analytic():
    rng = np.random.default_rng(6)
    psi = normalize(rng.normal(size=12))
    phi = normalize(rng.normal(size=12))
    probs = rng.random(12)
    probs /= probs.sum()
    for j in (0, 2, 5):
        sim = simulated_average_success(psi, phi, probs, j)
        ana = average_success(psi, phi, probs, lambda_of_j(12, j), 12)
        assert abs(sim - ana) < 1e-12


def test_standard_grover_prob():
    assert standard_grover_prob(4, 1) == pytest.approx(1.0, abs=1e-12)
    assert standard_grover_prob(4, 0) == pytest.approx(0.25, abs=1e-15)
    n = 10**6
    assert standard_grover_prob(n, math.ceil(math.pi * math.sqrt(n) / 4)) >= 0.999


def test_count_conversions():
    assert lambda_of_j(4, 1) == pytest.approx(math.pi / 3, abs=1e-15)
    assert j_of_lambda(4, math.pi / 3) == 1
    assert j_of_lambda(10, 0.0) == 0
    assert j_of_lambda(10**4, math.pi / 2 - math.asin(0.01)) == 79
    assert standard_count(10**4) == 79
    for n in (5, 64, 999):
        for j in range(0, 40):
            assert j_of_lambda(n, lambda_of_j(n, j)) == j
    with pytest.raises(InvalidInputError):
        j_of_lambda(4, -0.1)
    assert std_lambda(4) == pytest.approx(math.pi / 3)
    assert std_lambda(2) == pytest.approx(math.pi / 4)


def test_schedule():
    sch = GroverSchedule.from_j(16, 3)
    assert sch.lam == pytest.approx(lambda_of_j(16, 3))
    assert GroverSchedule.from_lambda(16, sch.lam).j == 3
    with pytest.raises(InvalidInputError):
        GroverSchedule(4, -1, 0.0)
