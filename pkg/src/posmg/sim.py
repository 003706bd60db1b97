"""Monte Carlo rollouts and brute-force oracles.

Nothing here calls the solver's backup: ``enumerate_exact`` walks every joint
trajectory (hidden states included) and checks the reward-vs-goal event on
the realized path, so it is an independent check of ``evaluate_policies``.
The belief filter is used only to look up policy entries, which are keyed by
augmented state.
"""

from __future__ import annotations

import itertools
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, NamedTuple, Sequence

import numpy as np

from .belief import Belief, filter_update, initial_belief
from .errors import ImpossibleObservation, ModelFormatError, ResourceLimitError
from .model import GameModel, joint_mass
from .solver import AugmentedState, PolicyTable, root_state, state_key

DEFAULT_NODE_CAP = 2_000_000


class Step(NamedTuple):
    """One observed transition: actions played, sojourn, next observed state."""

    a: str
    b: str
    theta: int
    x_next: str


class Jump(NamedTuple):
    n: int
    s: int  # decision time in ticks
    x: str
    y: str
    a: str
    b: str
    theta: int


@dataclass
class RolloutRecord:
    jumps: list[Jump]
    accumulated_reward: Fraction
    success: bool

    def to_json(self) -> dict:
        r = self.accumulated_reward
        return {
            "jumps": [j._asdict() for j in self.jumps],
            "accumulated_reward": f"{r.numerator}/{r.denominator}",
            "success": self.success,
        }


@dataclass(frozen=True)
class RiskEstimate:
    mean: float
    stderr: float
    n: int
    seed: int

    def to_json(self) -> dict:
        return {"mean": self.mean, "stderr": self.stderr, "n": self.n, "seed": self.seed}


def rollout_rng(seed: int, index: int) -> np.random.Generator:
    """Counter-based stream for rollout ``index``: Philox keyed by ``(seed, index)``.

    Draw ``k`` of a rollout is the ``k``-th output of its own stream, so
    rollouts are independent of evaluation order.
    """
    if not (0 <= seed < 2**64 and 0 <= index < 2**64):
        raise ValueError("seed and index must fit in 64 bits")
    return np.random.Generator(np.random.Philox(key=(seed << 64) | index))


def _pick(u: float, items):
    """Inverse-CDF draw from ``[(item, prob), ...]``."""
    acc = 0.0
    last = None
    for item, p in items:
        if p <= 0:
            continue
        acc += p
        last = item
        if u < acc:
            return item
    return last


class _Simulator:
    """Per-(model, policies) caches shared by all rollouts of one estimate."""

    def __init__(self, model: GameModel, p1: PolicyTable, p2: PolicyTable, root: AugmentedState):
        self.model = model
        self.p1 = p1
        self.p2 = p2
        self.root = root
        self.root_key = root.key
        self._states = {self.root_key: root}
        self._next: dict = {}
        self._mixes: dict = {}
        self._rows: dict = {}
        hidden = model.hidden_states
        self._prior = [(hidden[a.y], a.lam, float(a.w)) for a in root.mu.atoms]

    def mixes(self, key: str):
        m = self._mixes.get(key)
        if m is None:
            m = (list(self.p1.mix(key).items()), list(self.p2.mix(key).items()))
            self._mixes[key] = m
        return m

    def row(self, x, y, a, b):
        k = (x, y, a, b)
        r = self._rows.get(k)
        if r is None:
            r = [((e.theta, e.x_next, e.y_next), float(e.p)) for e in self.model.kernel[k]]
            self._rows[k] = r
        return r

    def successor(self, key: str, a, b, theta: int, xn) -> str:
        ck = (key, a, b, theta, xn)
        nk = self._next.get(ck)
        if nk is None:
            s = self._states[key]
            mu2 = filter_update(self.model, s.t, s.x, s.mu, a, b, theta, xn)
            s2 = AugmentedState(max(s.t - theta, 0), xn, mu2)
            nk = s2.key
            self._states.setdefault(nk, s2)
            self._next[ck] = nk
        return nk

    def run(self, seed: int, index: int, record: bool = False) -> RolloutRecord | bool:
        model = self.model
        t = self.root.t
        u = rollout_rng(seed, index).random(1 + 3 * max(t, 1)).tolist()
        draw = iter(u)
        y, lam0 = _pick(next(draw), (((yy, ll), w) for yy, ll, w in self._prior))
        x = self.root.x
        key = self.root_key
        acc = Fraction(0)
        clock = 0
        n = 0
        jumps = [] if record else None
        while t > 0:
            m1, m2 = self.mixes(key)
            a = _pick(next(draw), m1)
            b = _pick(next(draw), m2)
            theta, xn, yn = _pick(next(draw), self.row(x, y, a, b))
            acc += model.rate(x, y, a, b) * min(theta, t)
            if record:
                jumps.append(Jump(n, clock, x, y, a, b, theta))
            if theta >= t:
                break
            key = self.successor(key, a, b, theta, xn)
            t -= theta
            clock += theta
            x, y = xn, yn
            n += 1
        success = acc <= lam0
        if record:
            return RolloutRecord(jumps, acc, success)
        return success


def rollout(model: GameModel, p1: PolicyTable, p2: PolicyTable, seed: int, index: int,
            x0: str | None = None) -> RolloutRecord:
    """Sample one trajectory from the initial belief under the stationary pair ``(p1, p2)``."""
    return _Simulator(model, p1, p2, root_state(model, x0)).run(seed, index, record=True)


def _count_successes(model, p1, p2, x0, seed, start, stop) -> int:
    sim = _Simulator(model, p1, p2, root_state(model, x0))
    return sum(1 for i in range(start, stop) if sim.run(seed, i))


def estimate_risk(model: GameModel, p1: PolicyTable, p2: PolicyTable, n: int, seed: int,
                  x0: str | None = None, workers: int | None = None) -> RiskEstimate:
    """Monte Carlo estimate of the risk probability from ``n`` rollouts.

    The result depends only on ``(model, policies, n, seed)``; ``workers``
    splits the index range across processes without changing it.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    workers = max(1, min(workers or 1, n // 10_000 or 1))
    if workers == 1:
        hits = _count_successes(model, p1, p2, x0, seed, 0, n)
    else:
        bounds = np.linspace(0, n, workers + 1).astype(int)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futs = [pool.submit(_count_successes, model, p1, p2, x0, seed, int(lo), int(hi))
                    for lo, hi in zip(bounds[:-1], bounds[1:])]
            hits = sum(f.result() for f in futs)
    mean = hits / n
    return RiskEstimate(mean, math.sqrt(mean * (1 - mean) / n), n, seed)


def threads_from_env(default: int = 1) -> int:
    raw = os.environ.get("POSMG_THREADS")
    if not raw:
        return default
    try:
        return max(1, int(raw))
    except ValueError:
        return default


# ---------------------------------------------------------------- oracles


def enumerate_exact(model: GameModel, p1: PolicyTable, p2: PolicyTable,
                    x0: str | None = None, root: AugmentedState | None = None,
                    node_cap: int = DEFAULT_NODE_CAP) -> float:
    """Risk probability by summing over every joint trajectory.

    Each branch carries the true hidden state and its own remaining goal; a
    path succeeds when the reward accumulated up to the horizon stays within
    the initial goal.
    """
    root = root_state(model, x0) if root is None else root
    nodes = 0
    beliefs: dict = {}

    def next_belief(t, x, mu, key, a, b, theta, xn):
        ck = (key, a, b, theta, xn)
        mu2 = beliefs.get(ck)
        if mu2 is None:
            mu2 = filter_update(model, t, x, mu, a, b, theta, xn)
            beliefs[ck] = mu2
        return mu2

    def walk(t: int, x: str, y: str, lam: Fraction, mu: Belief, prob: float) -> float:
        nonlocal nodes
        nodes += 1
        if nodes > node_cap:
            raise ResourceLimitError(f"trajectory enumeration exceeds the node cap of {node_cap}")
        if t == 0:
            return prob if lam >= 0 else 0.0
        key = state_key(t, x, mu)
        total = 0.0
        for a, pa in p1.mix(key).items():
            for b, pb in p2.mix(key).items():
                w = prob * pa * pb
                if w <= 0:
                    continue
                r = model.reward_rate[(x, y, a, b)]
                for e in model.kernel[(x, y, a, b)]:
                    q = w * float(e.p)
                    if e.theta > t:
                        if r * t <= lam:
                            total += q
                    else:
                        mu2 = next_belief(t, x, mu, key, a, b, e.theta, e.x_next)
                        total += walk(t - e.theta, e.x_next, e.y_next, lam - r * e.theta, mu2, q)
        return total

    hidden = model.hidden_states
    return sum(walk(root.t, root.x, hidden[a.y], a.lam, root.mu, float(a.w)) for a in root.mu.atoms)


def _parse_steps(history) -> list[Step]:
    out = []
    for i, st in enumerate(history):
        if isinstance(st, Step):
            out.append(st)
            continue
        try:
            if isinstance(st, dict):
                step = Step(st["a"], st["b"], st["theta"], st["x_next"])
            else:
                step = Step(*st)
        except (KeyError, TypeError):
            raise ModelFormatError(f"history step {i} needs a, b, theta, x_next") from None
        if isinstance(step.theta, bool) or not isinstance(step.theta, int):
            raise ModelFormatError(f"history step {i}: theta must be an integer")
        out.append(step)
    return out


def filter_trace(model: GameModel, history: Sequence, x0: str | None = None,
                 p1: PolicyTable | None = None, p2: PolicyTable | None = None,
                 root: AugmentedState | None = None) -> list[Belief]:
    """Beliefs ``mu_0, mu_1, ...`` along an observable history.

    When policies are given, each recorded action must have positive
    probability under them.
    """
    s = root_state(model, x0) if root is None else root
    out = [s.mu]
    for i, step in enumerate(_parse_steps(history)):
        if s.t == 0:
            raise ImpossibleObservation(f"history step {i} occurs after the horizon")
        for pol, act in ((p1, step.a), (p2, step.b)):
            if pol is not None and pol.mix(s.key).get(act, 0.0) <= 0:
                raise ImpossibleObservation(
                    f"history step {i}: player {pol.player} never plays {act!r} at this state"
                )
        mu2 = filter_update(model, s.t, s.x, s.mu, step.a, step.b, step.theta, step.x_next)
        s = AugmentedState(max(s.t - step.theta, 0), step.x_next, mu2)
        out.append(mu2)
    return out


def exhaustive_posterior(model: GameModel, history: Sequence, x0: str | None = None,
                         prior: Belief | None = None, t0: int | None = None) -> list[dict]:
    """Conditional law of ``(Y_n, Lambda_n)`` given each prefix of the history.

    Brute force: every hidden sequence ``y_0..y_n`` is weighted by its joint
    probability with the observations, in floating point, independently of the
    filter.  Returns one ``{(hidden label, goal): prob}`` dict per prefix.
    """
    x0 = model.observed_states[0] if x0 is None else x0
    prior = initial_belief(model) if prior is None else prior
    t0 = model.horizon_ticks if t0 is None else t0
    steps = _parse_steps(history)
    hidden = model.hidden_states
    starts = [(hidden[a.y], a.lam, float(a.w)) for a in prior.atoms]
    laws = []
    for n in range(len(steps) + 1):
        joint: dict = {}
        for y0, lam0, w0 in starts:
            for tail in itertools.product(hidden, repeat=n):
                path = (y0,) + tail
                prob = w0
                lam = lam0
                t = t0
                x = x0
                for k in range(n):
                    st = steps[k]
                    prob *= joint_mass(model, x, path[k], st.a, st.b, st.theta, st.x_next, path[k + 1])
                    if prob == 0.0:
                        break
                    lam = lam - model.reward_rate[(x, path[k], st.a, st.b)] * min(st.theta, t)
                    t = max(t - st.theta, 0)
                    x = st.x_next
                if prob > 0.0:
                    k2 = (path[-1], lam)
                    joint[k2] = joint.get(k2, 0.0) + prob
        total = math.fsum(joint.values())
        if total <= 0.0:
            raise ImpossibleObservation(f"history prefix of length {n} has zero probability")
        laws.append({k: v / total for k, v in joint.items()})
    return laws


def posterior_tree(model: GameModel, x0: str | None = None,
                   max_depth: int | None = None) -> Iterator[tuple[list[Step], list[dict]]]:
    """Brute-force conditional laws over the whole tree of observable histories.

    Walks every observable history with positive probability under
    full-support play, carrying the unmerged list of joint hidden trajectories
    consistent with it.  Yields ``(history, laws)`` for each maximal history
    (horizon exhausted or ``max_depth`` reached), where ``laws[n]`` is the
    ``{(hidden label, goal): prob}`` law after the first ``n`` steps.  Every
    positive-probability history is a prefix of some yielded one.
    """
    x0 = model.observed_states[0] if x0 is None else x0
    hidden = model.hidden_states
    prior = initial_belief(model)
    paths0 = [((hidden[a.y],), a.lam, float(a.w)) for a in prior.atoms]

    def law(paths):
        joint: dict = {}
        for path, lam, p in paths:
            k = (path[-1], lam)
            joint[k] = joint.get(k, 0.0) + p
        total = math.fsum(joint.values())
        return {k: v / total for k, v in joint.items()}

    def rec(t, x, paths, history, laws):
        children = False
        if t > 0 and (max_depth is None or len(history) < max_depth):
            for a in model.actions1[x]:
                for b in model.actions2[x]:
                    grouped: dict = {}
                    for path, lam, p in paths:
                        y = path[-1]
                        r = model.reward_rate[(x, y, a, b)]
                        for e in model.kernel[(x, y, a, b)]:
                            grouped.setdefault((e.theta, e.x_next), []).append(
                                (path + (e.y_next,), lam - r * min(e.theta, t), p * float(e.p))
                            )
                    for (theta, xn) in sorted(grouped):
                        nxt = grouped[(theta, xn)]
                        if math.fsum(p for _, _, p in nxt) <= 0.0:
                            continue
                        children = True
                        yield from rec(max(t - theta, 0), xn, nxt,
                                       history + [Step(a, b, theta, xn)], laws + [law(nxt)])
        if not children:
            yield history, laws

    yield from rec(model.horizon_ticks, x0, paths0, [], [law(paths0)])


def enumerate_pure_policies(model: GameModel, player: int, opponent: PolicyTable | None = None,
                            x0: str | None = None, root: AugmentedState | None = None,
                            limit: int = 10_000) -> Iterator[PolicyTable]:
    """All pure stationary policies of ``player``, up to behavior off the reachable set.

    States are those reachable from the root under the policy itself and the
    opponent's support (every opponent action when ``opponent`` is None).
    Two policies that differ only on unreachable states are yielded once.
    """
    root = root_state(model, x0) if root is None else root
    succ_cache: dict = {}
    count = 0

    def successors(s: AugmentedState, a, b):
        ck = (s.key, a, b)
        out = succ_cache.get(ck)
        if out is None:
            out = []
            obs = set()
            for i, w in enumerate(s.mu.y_weights):
                if w:
                    obs.update(k for k in model.marginal_row(s.x, model.hidden_states[i], a, b)
                               if k[0] <= s.t)
            for theta, xn in sorted(obs):
                mu2 = filter_update(model, s.t, s.x, s.mu, a, b, theta, xn)
                out.append(AugmentedState(s.t - theta, xn, mu2))
            succ_cache[ck] = out
        return out

    def first_unassigned(assign):
        seen = {root.key}
        stack = [root]
        while stack:
            s = stack.pop(0)
            if s.t == 0:
                continue
            k = s.key
            if k not in assign:
                return s
            own = [assign[k]]
            if opponent is None:
                other = model.actions2[s.x] if player == 1 else model.actions1[s.x]
            else:
                other = [act for act, p in opponent.mix(k).items() if p > 0]
            for o in other:
                for act in own:
                    a, b = (act, o) if player == 1 else (o, act)
                    for s2 in successors(s, a, b):
                        if s2.key not in seen:
                            seen.add(s2.key)
                            stack.append(s2)
        return None

    def rec(assign):
        nonlocal count
        s = first_unassigned(assign)
        if s is None:
            count += 1
            if count > limit:
                raise ResourceLimitError(f"more than {limit} pure policies")
            yield PolicyTable(player, {k: {act: 1.0} for k, act in assign.items()})
            return
        for act in (model.actions1[s.x] if player == 1 else model.actions2[s.x]):
            assign[s.key] = act
            yield from rec(assign)
            del assign[s.key]

    yield from rec({})
