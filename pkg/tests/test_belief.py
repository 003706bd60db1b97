from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from posmg import catalog
from posmg.belief import (
    Belief,
    canonical_key,
    filter_update,
    goal_tail_mass,
    initial_belief,
    point_belief,
    y_marginal,
)
from posmg.errors import ImpossibleObservation
from posmg.model import build_model

F = Fraction
H2 = ("y0", "y1")


def test_initial_belief_m1(m1):
    mu = initial_belief(m1)
    assert mu.as_dict() == {("y0", 1): 0.5, ("y1", 1): 0.5}


def test_initial_belief_drops_zero_weights():
    m = build_model(["x0"], ["y0", "y1"], {"x0": ["a"]}, {"x0": ["b"]},
                    {("x0", y, "a", "b"): [(1, "x0", y, 1)] for y in H2},
                    {("x0", y, "a", "b"): 0 for y in H2},
                    horizon_ticks=1, initial_goal=0, initial_hidden=[1, 0])
    assert initial_belief(m).as_dict() == {("y0", 0): 1.0}


def test_y_marginal_examples(m2):
    assert list(y_marginal(Belief.from_atoms(H2, [(0, 1, F(1, 2)), (1, 1, F(1, 2))]))) == [0.5, 0.5]
    assert list(y_marginal(Belief.from_atoms(H2, [(0, 3, F(1, 5)), (0, -1, F(4, 5))]))) == [1.0, 0.0]
    assert np.allclose(y_marginal(initial_belief(m2)), [0.25, 0.75], atol=0)


def test_goal_tail_mass_examples():
    assert goal_tail_mass(Belief.from_atoms(H2, [(0, 3, F(7, 10)), (0, -1, F(3, 10))])) == 0.7
    assert goal_tail_mass(Belief.from_atoms(H2, [(0, 0, F(1, 2)), (1, 4, F(1, 2))])) == 1.0
    assert goal_tail_mass(Belief.from_atoms(H2, [(0, -1, F(1, 2)), (1, F(-1, 3), F(1, 2))])) == 0.0


def test_filter_update_m1(m1):
    mu = filter_update(m1, 1, "x0", initial_belief(m1), "a", "b", 1, "x0")
    assert mu.as_dict() == {("y0", 1): 0.5, ("y1", -1): 0.5}


def test_filter_update_deterministic_shift():
    m = build_model(["x0"], ["y0"], {"x0": ["a"]}, {"x0": ["b"]},
                    {("x0", "y0", "a", "b"): [(2, "x0", "y0", 1)]}, {("x0", "y0", "a", "b"): 1},
                    horizon_ticks=10, initial_goal=5, initial_hidden=[1])
    mu = filter_update(m, 10, "x0", point_belief(m, "y0", 5), "a", "b", 2, "x0")
    assert mu.as_dict() == {("y0", 3): 1.0}
    # censored at the remaining horizon
    mu = filter_update(m, 1, "x0", point_belief(m, "y0", 5), "a", "b", 2, "x0")
    assert mu.as_dict() == {("y0", 4): 1.0}


def test_filter_update_zero_likelihood(m1, m3):
    with pytest.raises(ImpossibleObservation):
        filter_update(m1, 1, "x0", initial_belief(m1), "a", "b", 2, "x0")
    m = catalog.random_model(3, n_observed=1, n_hidden=1, max_sojourn=1)
    with pytest.raises(ImpossibleObservation):
        filter_update(m, 3, "x0", initial_belief(m), "a0", "b0", 2, "x0")


def test_filter_update_m3_posterior(m3):
    mu = filter_update(m3, 2, "x0", initial_belief(m3), "a", "b", 1, "x1")
    got = mu.as_dict()
    expected = {("y0", 2): 0.18, ("y1", 2): 0.02, ("y0", 0): 0.08, ("y1", 0): 0.72}
    assert set(got) == set(expected)
    for k, v in expected.items():
        assert got[k] == pytest.approx(v, abs=1e-15)


def test_fully_revealing_kernel():
    kernel = {("x0", y, "a", "b"): [(1, "x" + y[1], y, 1)] for y in H2}
    kernel.update({("x1", y, "a", "b"): [(1, "x" + y[1], y, 1)] for y in H2})
    acts = {"x0": ["a"], "x1": ["a"]}
    m = build_model(["x0", "x1"], H2, acts, {"x0": ["b"], "x1": ["b"]}, kernel,
                    {k: (1 if k[1] == "y1" else 0) for k in kernel},
                    horizon_ticks=2, initial_goal=1, initial_hidden=["1/3", "2/3"])
    mu = filter_update(m, 2, "x0", initial_belief(m), "a", "b", 1, "x1")
    assert mu.as_dict() == {("y1", 0): 1.0}


def test_canonical_key_contract():
    a = Belief.from_atoms(H2, [(0, 1, F(1, 3)), (1, 2, F(2, 3))])
    b = Belief.from_atoms(H2, [(1, 2, F(2, 3)), (0, 1, F(1, 3))])
    assert canonical_key(a) == canonical_key(b)
    w = F(1, 4)
    c = Belief.from_atoms(H2, [(0, 1, w), (1, 2, 1 - w)])
    d = Belief.from_atoms(H2, [(0, 1, w + F(1, 10**13)), (1, 2, 1 - w - F(1, 10**13))])
    assert c != d
    assert canonical_key(c) == canonical_key(d)
    e = Belief.from_atoms(H2, [(0, 1, w), (1, 3, 1 - w)])
    assert canonical_key(c) != canonical_key(e)


def test_json_round_trip(m3):
    mu = filter_update(m3, 2, "x0", initial_belief(m3), "a", "b", 1, "x1")
    again = Belief.from_json(mu.hidden, mu.to_json())
    assert again.key == mu.key


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 3))
def test_filter_normalized_and_support_bound(seed, n_steps):
    model = catalog.random_model(seed, n_observed=2, n_hidden=3, horizon=n_steps + 2)
    rng = np.random.default_rng(seed)
    x, t, mu = "x0", model.horizon_ticks, initial_belief(model)
    a, b = model.actions1[x][0], model.actions2[x][0]
    for n in range(1, n_steps + 1):
        # sample an observation with positive likelihood under the fixed action pair
        obs = sorted({(e.theta, e.x_next)
                      for i, w in enumerate(mu.y_weights) if w
                      for e in model.kernel[(x, model.hidden_states[i], a, b)]})
        theta, xn = obs[int(rng.integers(len(obs)))]
        mu = filter_update(model, t, x, mu, a, b, theta, xn)
        assert sum(float(at.w) for at in mu.atoms) == pytest.approx(1.0, abs=1e-9)
        assert len(mu) <= len(model.hidden_states) * (n + 1)
        t, x = max(t - theta, 0), xn
        a, b = model.actions1[x][0], model.actions2[x][0]
        if t == 0:
            break


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_hidden_independent_kernel_is_pure_shift(seed):
    rng = np.random.default_rng(seed)
    ys = ("y0", "y1", "y2")
    rate = int(rng.integers(0, 3))
    row = [(1, "x0", "y0", "1/2"), (2, "x0", "y0", "1/2")]
    m = build_model(["x0"], ys, {"x0": ["a"]}, {"x0": ["b"]},
                    {("x0", y, "a", "b"): row for y in ys}, {("x0", y, "a", "b"): rate for y in ys},
                    horizon_ticks=3, initial_goal=2, initial_hidden=["1/3"] * 3)
    lams = [F(int(v), 3) for v in rng.integers(-6, 7, size=3)]
    mu = Belief.from_atoms(ys, [(0, lams[0], F(1, 5)), (0, lams[1], F(3, 10)), (0, lams[2], F(1, 2))])
    theta = int(rng.integers(1, 3))
    out = filter_update(m, 3, "x0", mu, "a", "b", theta, "x0")
    shifted = {("y0", a.lam - rate * theta): float(a.w) for a in mu.atoms}
    assert out.as_dict() == pytest.approx(shifted, abs=1e-15)
