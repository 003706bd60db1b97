"""Small reference models and a random instance generator for tests and demos."""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from .model import GameModel, build_model
from .solver import PolicyTable


def m1() -> GameModel:
    """One observed state, two persistent hidden states with rates 0 and 2,
    one tick of horizon, goal 1, uniform prior."""
    kernel = {("x0", y, "a", "b"): [(1, "x0", y, 1)] for y in ("y0", "y1")}
    rates = {("x0", "y0", "a", "b"): 0, ("x0", "y1", "a", "b"): 2}
    return build_model(["x0"], ["y0", "y1"], {"x0": ["a"]}, {"x0": ["b"]},
                       kernel, rates, horizon_ticks=1, initial_goal=1,
                       initial_hidden=["1/2", "1/2"])


def m3() -> GameModel:
    """M1 with a second observed state that partially reveals the hidden one.

    From either observed state, ``y0`` moves to ``x0`` w.p. 4/5 and ``y1`` moves
    to ``x1`` w.p. 4/5; the hidden state flips w.p. 1/10 on every jump.  The
    horizon is two ticks and the goal is 2.
    """
    kernel = {}
    for x in ("x0", "x1"):
        for y, home in (("y0", "x0"), ("y1", "x1")):
            away = "x1" if home == "x0" else "x0"
            other = "y1" if y == "y0" else "y0"
            kernel[(x, y, "a", "b")] = [
                (1, home, y, "36/50"), (1, home, other, "4/50"),
                (1, away, y, "9/50"), (1, away, other, "1/50"),
            ]
    rates = {(x, y, "a", "b"): (0 if y == "y0" else 2) for x in ("x0", "x1") for y in ("y0", "y1")}
    return build_model(["x0", "x1"], ["y0", "y1"], {"x0": ["a"], "x1": ["a"]},
                       {"x0": ["b"], "x1": ["b"]}, kernel, rates,
                       horizon_ticks=2, initial_goal=2, initial_hidden=["1/2", "1/2"])


def m2() -> GameModel:
    """A 2x2-action game on one observed state with a hidden regime.

    Player 1 picks an effort level, player 2 a defence; rates depend on the
    pair and on the hidden regime.  Sojourns of one or two ticks have
    regime-dependent odds, so observed jump times are informative.
    """
    ys = ("y0", "y1")
    rate = {
        ("lo", "d0"): (1, 1), ("lo", "d1"): (0, 1),
        ("hi", "d0"): (2, 3), ("hi", "d1"): (1, 2),
    }
    kernel = {}
    rates = {}
    for (a, b), rs in rate.items():
        for y, r in zip(ys, rs):
            stay = {("lo", "y0"): "3/5", ("lo", "y1"): "1/5",
                    ("hi", "y0"): "2/5", ("hi", "y1"): "4/5"}[(a, y)]
            kernel[("x0", y, a, b)] = [(1, "x0", y, stay), (2, "x0", y, str(1 - Fraction(stay)))]
            rates[("x0", y, a, b)] = r
    return build_model(["x0"], list(ys), {"x0": ["lo", "hi"]}, {"x0": ["d0", "d1"]},
                       kernel, rates, horizon_ticks=3, initial_goal=3,
                       initial_hidden=["1/4", "3/4"])


def _random_simplex(rng: np.random.Generator, k: int, den: int) -> list[Fraction]:
    # k positive integers summing to den, then scaled
    cuts = np.sort(rng.choice(np.arange(1, den), size=k - 1, replace=False)) if k > 1 else []
    parts = np.diff(np.concatenate([[0], cuts, [den]])).astype(int)
    return [Fraction(int(p), den) for p in parts]


def random_model(
    rng: np.random.Generator | int,
    n_observed: int = 2,
    n_hidden: int = 2,
    n_actions1: int = 2,
    n_actions2: int = 2,
    horizon: int = 3,
    max_sojourn: int = 2,
    max_branches: int = 3,
    rates: tuple = (0, 1, 2),
    goals: tuple = (1, 2, 3, 4),
    den: int = 20,
) -> GameModel:
    """A random valid model.  Probabilities are multiples of ``1/den``."""
    rng = np.random.default_rng(rng)
    xs = [f"x{i}" for i in range(n_observed)]
    ys = [f"y{i}" for i in range(n_hidden)]
    a1 = {x: [f"a{i}" for i in range(n_actions1)] for x in xs}
    a2 = {x: [f"b{i}" for i in range(n_actions2)] for x in xs}
    outcomes = [(th, x, y) for th in range(1, max_sojourn + 1) for x in xs for y in ys]
    kernel = {}
    rate = {}
    for x in xs:
        for y in ys:
            for a in a1[x]:
                for b in a2[x]:
                    k = int(rng.integers(1, min(max_branches, len(outcomes)) + 1))
                    idx = rng.choice(len(outcomes), size=k, replace=False)
                    probs = _random_simplex(rng, k, den)
                    kernel[(x, y, a, b)] = [outcomes[i] + (p,) for i, p in zip(sorted(idx), probs)]
                    rate[(x, y, a, b)] = rates[int(rng.integers(len(rates)))]
    q0 = _random_simplex(rng, n_hidden, den) if n_hidden > 1 else [Fraction(1)]
    return build_model(xs, ys, a1, a2, kernel, rate, horizon_ticks=horizon,
                       initial_goal=goals[int(rng.integers(len(goals)))], initial_hidden=q0)


def random_policy(model: GameModel, states, player: int, rng: np.random.Generator | int,
                  pure: bool = False) -> PolicyTable:
    """Random stationary policy over ``states`` (a mapping key -> AugmentedState)."""
    rng = np.random.default_rng(rng)
    table = {}
    for key, s in states.items():
        acts = model.actions1[s.x] if player == 1 else model.actions2[s.x]
        if pure:
            table[key] = {acts[int(rng.integers(len(acts)))]: 1.0}
        else:
            w = rng.dirichlet(np.ones(len(acts)))
            table[key] = {a: float(p) for a, p in zip(acts, w / w.sum())}
    return PolicyTable(player, table)
