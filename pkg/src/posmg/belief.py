"""Finite-support joint beliefs over (hidden state, remaining goal).

Goals and weights are exact fractions, so the Bayes update is exact and two
beliefs reached along different observable histories compare equal whenever
they are the same measure.  Floats only appear at the edges (``y_marginal``,
``goal_tail_mass``, serialization).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Iterable, NamedTuple

import numpy as np

from .errors import DistributionError, ImpossibleObservation, ModelFormatError
from .model import GameModel, parse_probability, parse_rational

PRUNE_BELOW = Fraction(1, 10**15)
LIKELIHOOD_FLOOR = 1e-15
KEY_DIGITS = 12


class Atom(NamedTuple):
    y: int  # index into the model's hidden_states
    lam: Fraction
    w: Fraction


@dataclass(frozen=True)
class Belief:
    """A probability measure on ``E_Y x R`` with finitely many atoms.

    Build instances with :meth:`from_atoms`, which merges duplicates, prunes
    negligible weights, renormalizes and sorts by ``(hidden index, goal)``.
    """

    hidden: tuple[str, ...]
    atoms: tuple[Atom, ...]

    @classmethod
    def from_atoms(cls, hidden: tuple[str, ...], atoms: Iterable[tuple]) -> "Belief":
        merged: dict[tuple[int, Fraction], Fraction] = {}
        for y, lam, w in atoms:
            if w < 0:
                raise DistributionError(f"negative weight {w}")
            k = (y, lam)
            merged[k] = merged.get(k, Fraction(0)) + Fraction(w)
        total = sum(merged.values(), Fraction(0))
        if total <= 0:
            raise DistributionError("belief has no mass")
        kept = {k: w / total for k, w in merged.items() if w / total >= PRUNE_BELOW}
        total = sum(kept.values(), Fraction(0))
        out = tuple(Atom(y, lam, w / total) for (y, lam), w in sorted(kept.items()))
        return cls(tuple(hidden), out)

    def __len__(self):
        return len(self.atoms)

    @cached_property
    def key(self) -> str:
        return canonical_key(self)

    @cached_property
    def y_weights(self) -> tuple[Fraction, ...]:
        out = [Fraction(0)] * len(self.hidden)
        for a in self.atoms:
            out[a.y] += a.w
        return tuple(out)

    def to_json(self) -> list[dict]:
        return [
            {"y": self.hidden[a.y], "lambda": _fmt(a.lam), "w": float(a.w)}
            for a in self.atoms
        ]

    @classmethod
    def from_json(cls, hidden: tuple[str, ...], data) -> "Belief":
        if not isinstance(data, list):
            raise ModelFormatError("belief must be an array of atoms")
        pos = {y: i for i, y in enumerate(hidden)}
        atoms = []
        for rec in data:
            try:
                y = pos[rec["y"]]
            except (KeyError, TypeError):
                raise ModelFormatError(f"bad belief atom {rec!r}") from None
            atoms.append((y, parse_rational(rec.get("lambda"), "lambda"),
                          parse_probability(rec.get("w"), "w")))
        return cls.from_atoms(hidden, atoms)

    def as_dict(self) -> dict[tuple[str, Fraction], float]:
        """``{(hidden label, goal): weight}`` with float weights."""
        return {(self.hidden[a.y], a.lam): float(a.w) for a in self.atoms}


def _fmt(q: Fraction) -> str:
    return f"{q.numerator}/{q.denominator}"


def initial_belief(model: GameModel) -> Belief:
    """Product of the initial hidden distribution with a point mass at the goal."""
    lam = model.initial_goal
    return Belief.from_atoms(
        model.hidden_states,
        [(i, lam, w) for i, w in enumerate(model.initial_hidden) if w > 0],
    )


def point_belief(model: GameModel, y: str, lam) -> Belief:
    return Belief.from_atoms(model.hidden_states,
                             [(model.hidden_index(y), Fraction(lam), Fraction(1))])


def y_marginal(belief: Belief) -> np.ndarray:
    return np.array([float(w) for w in belief.y_weights])


def goal_tail_mass(belief: Belief) -> float:
    """Mass of atoms with nonnegative remaining goal."""
    return float(goal_tail_exact(belief))


def goal_tail_exact(belief: Belief) -> Fraction:
    return sum((a.w for a in belief.atoms if a.lam >= 0), Fraction(0))


def filter_update(model: GameModel, t: int, x, belief: Belief, a, b, theta: int, x_next) -> Belief:
    """Posterior over ``(y', lambda')`` after observing sojourn ``theta`` and ``x_next``.

    Each atom ``(y, lam, w)`` feeds ``(y', lam - r(x,y,a,b) * min(theta, t))``
    with weight ``q(theta, x_next, y' | x, y, a, b) * w``.  The caller tracks
    the remaining horizon ``max(t - theta, 0)``.
    """
    model.check_labels(x, None, a, b, x_next)
    if theta < 1:
        raise ValueError("theta must be at least one tick")
    hidden = model.hidden_states
    elapsed = min(theta, t)
    out: dict[tuple[int, Fraction], Fraction] = {}
    for atom in belief.atoms:
        y = hidden[atom.y]
        entries = model.jump_rows(x, y, a, b).get((theta, x_next))
        if not entries:
            continue
        lam2 = atom.lam - model.rate(x, y, a, b) * elapsed
        for y2, p in entries:
            k = (model.hidden_index(y2), lam2)
            out[k] = out.get(k, Fraction(0)) + p * atom.w
    # the normalizer equals sum_y q^X(theta, x' | x, y, a, b) mu^Y(y)
    denom = sum(out.values(), Fraction(0))
    if float(denom) <= LIKELIHOOD_FLOOR:
        raise ImpossibleObservation(
            f"observation (theta={theta}, x'={x_next!r}) has zero likelihood at {x!r} "
            f"under actions ({a!r}, {b!r})"
        )
    return Belief.from_atoms(hidden, ((y, lam, w) for (y, lam), w in out.items()))


def canonical_key(belief: Belief) -> str:
    """Printable, hashable key: sorted atoms, exact goals, weights to 12 decimals."""
    return json.dumps(
        [[belief.hidden[a.y], _fmt(a.lam), f"{float(a.w):.{KEY_DIGITS}f}"] for a in belief.atoms],
        separators=(",", ":"),
    )
