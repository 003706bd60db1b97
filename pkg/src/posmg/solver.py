"""Belief-augmented Shapley backups on the tick grid.

An augmented state is ``(t, x, mu)``: remaining ticks, observed state and the
joint belief over hidden state and remaining goal.  Every jump consumes at
least one tick, so from any root the set of augmented states reachable
through the filter is finite and the value recursion terminates.

The stage payoff for actions ``(a, b)`` at ``(t, x, mu)`` is

    sum_atoms  w * [0 <= r(x,y,a,b) t <= lam] * P(sojourn > t | x, y, a, b)
  + sum_{theta <= t, x'} V(t - theta, x', filter(mu)) * P(theta, x' | x, mu^Y, a, b)

Player 1 (rows) minimizes the risk probability, player 2 (columns) maximizes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping

import numpy as np

from .belief import Belief, filter_update, goal_tail_exact, initial_belief
from .errors import InvalidModelError, LabelError, ModelFormatError, PolicyCoverageError, ResourceLimitError
from .matgame import SaddleSolution, solve_zero_sum
from .model import GameModel, validate

DEFAULT_STATE_CAP = 5_000_000
POLICY_TOL = 1e-12


@dataclass(frozen=True)
class AugmentedState:
    t: int
    x: str
    mu: Belief

    @property
    def key(self) -> str:
        return state_key(self.t, self.x, self.mu)


def state_key(t: int, x: str, mu: Belief) -> str:
    return f"{t}|{json.dumps(x)}|{mu.key}"


def root_state(model: GameModel, x0: str | None = None, belief: Belief | None = None,
               t: int | None = None) -> AugmentedState:
    """The default root: full horizon, the first observed state, the initial belief."""
    x0 = model.observed_states[0] if x0 is None else x0
    if x0 not in model.observed_states:
        raise LabelError(f"unknown observed state {x0!r}")
    return AugmentedState(
        model.horizon_ticks if t is None else t,
        x0,
        initial_belief(model) if belief is None else belief,
    )


@dataclass
class PolicyTable:
    """Stationary policy of one player: state key -> ``{action: probability}``."""

    player: int
    table: dict[str, dict[str, float]] = field(default_factory=dict)

    def __contains__(self, key):
        return key in self.table

    def __len__(self):
        return len(self.table)

    def mix(self, key: str) -> dict[str, float]:
        try:
            return self.table[key]
        except KeyError:
            raise PolicyCoverageError(
                f"player {self.player} policy has no entry for state {key}"
            ) from None

    def to_json(self) -> dict:
        return {"player": self.player, "policy": self.table}

    @classmethod
    def from_json(cls, data, player: int | None = None) -> "PolicyTable":
        """Accepts a policy file or a full solve result carrying ``"policies"``."""
        if isinstance(data, dict) and "policies" in data and player is not None:
            data = data["policies"].get(f"player{player}")
        if not isinstance(data, dict) or not isinstance(data.get("policy"), dict):
            raise ModelFormatError("policy file must be an object with a 'policy' table")
        pl = data.get("player", player)
        if player is not None and pl != player:
            raise ModelFormatError(f"policy file is for player {pl}, expected player {player}")
        table = {}
        for k, mix in data["policy"].items():
            if not isinstance(mix, dict):
                raise ModelFormatError(f"policy entry for {k} must map actions to probabilities")
            try:
                table[k] = {str(a): float(p) for a, p in mix.items()}
            except (TypeError, ValueError):
                raise ModelFormatError(f"non-numeric probability in policy entry {k}") from None
        return cls(int(pl), table)


@dataclass
class SolveResult:
    value: float
    root_key: str
    value_table: dict[str, float]
    policy1: PolicyTable
    policy2: PolicyTable
    reachable_count: int
    backup_count: int
    states: dict[str, AugmentedState] = field(repr=False, default_factory=dict)

    def to_json(self, full: bool = False) -> dict:
        out = {
            "value": self.value,
            "root": self.root_key,
            "reachable_count": self.reachable_count,
            "backup_count": self.backup_count,
        }
        if full:
            out["value_table"] = self.value_table
            out["policies"] = {
                "player1": self.policy1.to_json(),
                "player2": self.policy2.to_json(),
            }
        return out


# ----------------------------------------------------------- transitions


@dataclass(frozen=True)
class Jump:
    theta: int
    x_next: str
    prob: float
    state: AugmentedState
    mass: Fraction


def _jump_cache(model: GameModel) -> dict:
    return model._index.setdefault("solver_jumps", {})


def jumps(model: GameModel, s: AugmentedState, a, b) -> list[Jump]:
    """One-jump successors of ``s`` under ``(a, b)`` with ``theta <= t``.

    Observations with zero likelihood are skipped, so the filter is never
    asked to condition on an impossible event.
    """
    cache = _jump_cache(model)
    ck = (s.t, s.x, s.mu.key, a, b)
    hit = cache.get(ck)
    if hit is not None:
        return hit
    model.check_labels(s.x, None, a, b)
    yw = s.mu.y_weights
    hidden = model.hidden_states
    likelihood: dict[tuple[int, str], Fraction] = {}
    for i, w in enumerate(yw):
        if not w:
            continue
        for (theta, xn), m in model.marginal_row(s.x, hidden[i], a, b).items():
            if theta <= s.t:
                likelihood[(theta, xn)] = likelihood.get((theta, xn), Fraction(0)) + m * w
    order = model._index["observed_pos"]
    out = []
    for (theta, xn) in sorted(likelihood, key=lambda k: (k[0], order[k[1]])):
        m = likelihood[(theta, xn)]
        if m <= 0:
            continue
        mu2 = filter_update(model, s.t, s.x, s.mu, a, b, theta, xn)
        out.append(Jump(theta, xn, float(m), AugmentedState(s.t - theta, xn, mu2), m))
    cache[ck] = out
    return out


def _censored_success(model: GameModel, s: AugmentedState, a, b) -> Fraction:
    total = Fraction(0)
    hidden = model.hidden_states
    surv: dict[int, Fraction] = {}
    for atom in s.mu.atoms:
        y = hidden[atom.y]
        if not 0 <= model.rate(s.x, y, a, b) * s.t <= atom.lam:
            continue
        if atom.y not in surv:
            surv[atom.y] = model.survival_exact(s.x, y, a, b, s.t)
        total += surv[atom.y] * atom.w
    return total


def stage_payoff(model: GameModel, s: AugmentedState, a, b, V: Callable[[AugmentedState], float]) -> float:
    """Risk probability from ``s`` when ``(a, b)`` is played now and ``V`` scores the successor.

    The first term is the probability of no jump within ``t`` ticks while the
    accumulated reward ``r * t`` stays within the goal; the second integrates
    ``V`` over jumps at ``theta <= t``.
    """
    # masses sharing a successor value are summed exactly before weighting, so
    # a constant V reproduces the exact total mass
    groups: dict[float, Fraction] = {1.0: _censored_success(model, s, a, b)}
    for j in jumps(model, s, a, b):
        v = V(j.state)
        groups[v] = groups.get(v, Fraction(0)) + j.mass
    return math.fsum(v * float(m) for v, m in groups.items())


def stage_matrix(model: GameModel, s: AugmentedState, V) -> np.ndarray:
    A = model.actions1[s.x]
    B = model.actions2[s.x]
    return np.array([[stage_payoff(model, s, a, b, V) for b in B] for a in A])


def shapley_backup(model: GameModel, s: AugmentedState, V) -> tuple[float, dict, dict]:
    """Minimax of the stage matrix; returns ``(value, mix1, mix2)`` as action dicts."""
    sol = solve_zero_sum(stage_matrix(model, s, V))
    return sol.value, _as_mix(model.actions1[s.x], sol.row_mix), _as_mix(model.actions2[s.x], sol.col_mix)


def _as_mix(actions, probs) -> dict[str, float]:
    return {a: float(p) for a, p in zip(actions, probs) if p > 0}


def _terminal_value(s: AugmentedState) -> float:
    return float(goal_tail_exact(s.mu))


def _pure_first(actions) -> dict[str, float]:
    return {actions[0]: 1.0}


# ----------------------------------------------------------------- solving


def _require_valid(model: GameModel) -> None:
    report = validate(model)
    if not report.ok:
        raise InvalidModelError(report)


def reachable_states(model: GameModel, root: AugmentedState, cap: int = DEFAULT_STATE_CAP) -> dict[str, AugmentedState]:
    """Every augmented state reachable from ``root`` under some action sequence."""
    seen = {root.key: root}
    stack = [root]
    while stack:
        s = stack.pop()
        if s.t == 0:
            continue
        for a in model.actions1[s.x]:
            for b in model.actions2[s.x]:
                for j in jumps(model, s, a, b):
                    k = j.state.key
                    if k not in seen:
                        if len(seen) >= cap:
                            raise ResourceLimitError(f"reachable set exceeds the cap of {cap} states")
                        seen[k] = j.state
                        stack.append(j.state)
    return seen


def solve(model: GameModel, x0: str | None = None, root: AugmentedState | None = None,
          cap: int = DEFAULT_STATE_CAP) -> SolveResult:
    """Game value and a stationary equilibrium on the reachable augmented states."""
    _require_valid(model)
    root = root_state(model, x0) if root is None else root
    values: dict[str, float] = {}
    states: dict[str, AugmentedState] = {}
    p1 = PolicyTable(1)
    p2 = PolicyTable(2)
    backups = 0

    def value(s: AugmentedState) -> float:
        nonlocal backups
        k = s.key
        v = values.get(k)
        if v is not None:
            return v
        if len(values) >= cap:
            raise ResourceLimitError(f"reachable set exceeds the cap of {cap} states")
        if s.t == 0:
            v = _terminal_value(s)
            m1, m2 = _pure_first(model.actions1[s.x]), _pure_first(model.actions2[s.x])
        else:
            v, m1, m2 = shapley_backup(model, s, value)
            backups += 1
        values[k] = v
        states[k] = s
        p1.table[k] = m1
        p2.table[k] = m2
        return v

    v0 = value(root)
    return SolveResult(v0, root.key, values, p1, p2, len(values), backups, states)


def value_iteration_trace(model: GameModel, kmax: int, x0: str | None = None,
                          root: AugmentedState | None = None,
                          cap: int = DEFAULT_STATE_CAP) -> list[dict[str, float]]:
    """``[u^{-1}, u^0, ..., u^{kmax}]`` on the reachable set.

    ``u^{-1}`` is the goal tail mass and ``u^{k+1} = T u^k``; entry ``i`` of the
    returned list is ``u^{i-1}``.
    """
    _require_valid(model)
    root = root_state(model, x0) if root is None else root
    states = reachable_states(model, root, cap)
    trace = [{k: _terminal_value(s) for k, s in states.items()}]
    for _ in range(kmax + 1):
        prev = trace[-1]

        def lookup(s, prev=prev):
            return prev[s.key]

        trace.append({k: shapley_backup(model, s, lookup)[0] for k, s in states.items()})
    return trace


def _check_mix(model: GameModel, s: AugmentedState, mix: Mapping[str, float], player: int) -> None:
    avail = model.actions1[s.x] if player == 1 else model.actions2[s.x]
    for act in mix:
        if act not in avail:
            raise PolicyCoverageError(f"player {player} policy plays {act!r} outside its actions at {s.key}")
    if abs(sum(mix.values()) - 1.0) > 1e-9 or any(p < 0 for p in mix.values()):
        raise PolicyCoverageError(f"player {player} policy entry at {s.key} is not a distribution")


def evaluate_policies(model: GameModel, p1: PolicyTable, p2: PolicyTable,
                      x0: str | None = None, root: AugmentedState | None = None) -> float:
    """Exact risk probability of the stationary pair ``(p1, p2)`` from the root.

    Same recursion as :func:`solve` with the stage matrix contracted by the two
    mixes.  Terminal states (``t == 0``) need no policy entry.
    """
    root = root_state(model, x0) if root is None else root
    memo: dict[str, float] = {}

    def F(s: AugmentedState) -> float:
        k = s.key
        v = memo.get(k)
        if v is not None:
            return v
        if s.t == 0:
            v = _terminal_value(s)
        else:
            m1, m2 = p1.mix(k), p2.mix(k)
            _check_mix(model, s, m1, 1)
            _check_mix(model, s, m2, 2)
            v = 0.0
            for a, pa in m1.items():
                if pa <= 0:
                    continue
                for b, pb in m2.items():
                    if pb > 0:
                        v += pa * pb * stage_payoff(model, s, a, b, F)
        memo[k] = v
        return v

    return F(root)


def best_response(model: GameModel, fixed: PolicyTable, side: str,
                  x0: str | None = None, root: AugmentedState | None = None) -> tuple[float, PolicyTable]:
    """One-sided recursion against a fixed stationary opponent.

    ``side="fix2"`` fixes player 2 and minimizes over player 1's actions;
    ``side="fix1"`` fixes player 1 and maximizes over player 2's.  The optimum
    of a linear objective on the simplex is attained at a vertex, so the
    returned responder policy is pure (first optimal action on ties).
    """
    if side not in ("fix1", "fix2"):
        raise ValueError(f"side must be 'fix1' or 'fix2', not {side!r}")
    root = root_state(model, x0) if root is None else root
    responder = 1 if side == "fix2" else 2
    policy = PolicyTable(responder)
    memo: dict[str, float] = {}

    def G(s: AugmentedState) -> float:
        k = s.key
        v = memo.get(k)
        if v is not None:
            return v
        if s.t == 0:
            v = _terminal_value(s)
        else:
            fmix = fixed.mix(k)
            _check_mix(model, s, fmix, 3 - responder)
            best_act = None
            for act in (model.actions1[s.x] if responder == 1 else model.actions2[s.x]):
                total = 0.0
                for other, po in fmix.items():
                    if po <= 0:
                        continue
                    a, b = (act, other) if responder == 1 else (other, act)
                    total += po * stage_payoff(model, s, a, b, G)
                if best_act is None or (total < v if responder == 1 else total > v):
                    best_act, v = act, total
            policy.table[k] = {best_act: 1.0}
        memo[k] = v
        return v

    return G(root), policy


def one_sided_backup_solve(model: GameModel, fixed: PolicyTable, side: str,
                           x0: str | None = None, root: AugmentedState | None = None) -> float:
    """Lower (``fix2``) or upper (``fix1``) bound on the risk against a fixed opponent."""
    return best_response(model, fixed, side, x0, root)[0]
