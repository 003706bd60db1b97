"""Finite, tick-discretized partially observable semi-Markov game instances.

A model pairs an observed component ``x`` (seen by both players) with a
hidden component ``y``.  The semi-Markov kernel is a sparse mass function:
for each admissible ``(x, y, a, b)`` a list of entries
``(theta, x_next, y_next, p)`` with integer sojourn ``theta >= 1``.

Reward rates and goals are exact :class:`fractions.Fraction` values.  Kernel
masses and the initial hidden distribution are stored as fractions too; JSON
numbers are converted through their shortest decimal repr, so ``0.3`` becomes
``3/10``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Iterable, Mapping, NamedTuple, Sequence

from .errors import DistributionError, LabelError, ModelFormatError

KERNEL_TOL = 1e-12
MIXING_TOL = 1e-9

KNOWN_KEYS = frozenset({
    "observed_states", "hidden_states", "actions1", "actions2", "kernel",
    "reward_rate", "horizon_ticks", "initial_goal", "initial_hidden",
})


class KernelEntry(NamedTuple):
    theta: int
    x_next: str
    y_next: str
    p: Fraction


class Issue(NamedTuple):
    severity: str  # "error" | "warning"
    code: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    issues: tuple[Issue, ...] = ()

    @property
    def ok(self) -> bool:
        return not any(i.severity == "error" for i in self.issues)

    @property
    def errors(self) -> list[Issue]:
        return [i for i in self.issues if i.severity == "error"]

    @property
    def warnings(self) -> list[Issue]:
        return [i for i in self.issues if i.severity == "warning"]

    def codes(self) -> set[str]:
        return {i.code for i in self.issues}

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "issues": [
                {"severity": i.severity, "code": i.code, "message": i.message}
                for i in self.issues
            ],
        }


Key = tuple  # (x, y, a, b)


@dataclass(frozen=True, eq=True)
class GameModel:
    observed_states: tuple[str, ...]
    hidden_states: tuple[str, ...]
    actions1: Mapping[str, tuple[str, ...]]
    actions2: Mapping[str, tuple[str, ...]]
    kernel: Mapping[Key, tuple[KernelEntry, ...]]
    reward_rate: Mapping[Key, Fraction]
    horizon_ticks: int
    initial_goal: Fraction
    initial_hidden: tuple[Fraction, ...]
    extra_keys: tuple[str, ...] = ()
    _index: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        # (x, y, a, b) -> {(theta, x_next): [(y_next, p), ...]} and the
        # matching marginal masses; built once, read-only afterwards.
        by_obs: dict = {}
        marginal: dict = {}
        for key, entries in self.kernel.items():
            rows: dict = {}
            marg: dict = {}
            for e in entries:
                rows.setdefault((e.theta, e.x_next), []).append((e.y_next, e.p))
                marg[(e.theta, e.x_next)] = marg.get((e.theta, e.x_next), 0) + e.p
            by_obs[key] = {k: tuple(v) for k, v in rows.items()}
            marginal[key] = marg
        self._index["by_obs"] = by_obs
        self._index["marginal"] = marginal
        self._index["hidden_pos"] = {y: i for i, y in enumerate(self.hidden_states)}
        self._index["observed_pos"] = {x: i for i, x in enumerate(self.observed_states)}

    __hash__ = object.__hash__

    @property
    def max_sojourn(self) -> int:
        thetas = [e.theta for row in self.kernel.values() for e in row]
        return max(thetas, default=0)

    def hidden_index(self, y: str) -> int:
        try:
            return self._index["hidden_pos"][y]
        except KeyError:
            raise LabelError(f"unknown hidden state {y!r}") from None

    def admissible(self) -> Iterable[Key]:
        """All ``(x, y, a, b)`` with ``a in A(x)`` and ``b in B(x)``, in model order."""
        for x in self.observed_states:
            for y in self.hidden_states:
                for a in self.actions1.get(x, ()):
                    for b in self.actions2.get(x, ()):
                        yield (x, y, a, b)

    def check_labels(self, x, y, a, b, x_next=None, y_next=None) -> None:
        if x not in self._index["observed_pos"]:
            raise LabelError(f"unknown observed state {x!r}")
        if y is not None and y not in self._index["hidden_pos"]:
            raise LabelError(f"unknown hidden state {y!r}")
        if a not in self.actions1.get(x, ()):
            raise LabelError(f"action {a!r} not available to player 1 at {x!r}")
        if b not in self.actions2.get(x, ()):
            raise LabelError(f"action {b!r} not available to player 2 at {x!r}")
        if x_next is not None and x_next not in self._index["observed_pos"]:
            raise LabelError(f"unknown observed state {x_next!r}")
        if y_next is not None and y_next not in self._index["hidden_pos"]:
            raise LabelError(f"unknown hidden state {y_next!r}")

    # exact accessors used by the belief filter and the solver

    def rate(self, x, y, a, b) -> Fraction:
        return self.reward_rate[(x, y, a, b)]

    def jump_rows(self, x, y, a, b) -> dict:
        """``{(theta, x_next): ((y_next, p), ...)}`` for one kernel row."""
        return self._index["by_obs"].get((x, y, a, b), {})

    def marginal_row(self, x, y, a, b) -> dict:
        """``{(theta, x_next): mass}`` summed over ``y_next``."""
        return self._index["marginal"].get((x, y, a, b), {})

    def survival_exact(self, x, y, a, b, t: int) -> Fraction:
        """Probability that the sojourn strictly exceeds ``t`` ticks."""
        jumped = sum(
            (m for (theta, _), m in self.marginal_row(x, y, a, b).items() if theta <= t),
            Fraction(0),
        )
        return 1 - jumped


def joint_mass(model: GameModel, x, y, a, b, theta: int, x_next, y_next) -> float:
    """Kernel mass at ``(theta, x_next, y_next)``; zero when absent."""
    model.check_labels(x, y, a, b, x_next, y_next)
    for yn, p in model.jump_rows(x, y, a, b).get((theta, x_next), ()):
        if yn == y_next:
            return float(p)
    return 0.0


def marginal_mass(model: GameModel, x, y, a, b, theta: int, x_next) -> float:
    model.check_labels(x, y, a, b, x_next)
    return float(model.marginal_row(x, y, a, b).get((theta, x_next), 0))


def mixed_marginal(model: GameModel, x, mu_y: Sequence[float], a, b, theta: int, x_next) -> float:
    """Observation likelihood of ``(theta, x_next)`` under a hidden-state mixture."""
    model.check_labels(x, None, a, b, x_next)
    if len(mu_y) != len(model.hidden_states):
        raise DistributionError(
            f"hidden distribution has {len(mu_y)} entries, model has {len(model.hidden_states)}"
        )
    if any(w < 0 for w in mu_y) or abs(math.fsum(mu_y) - 1.0) > MIXING_TOL:
        raise DistributionError("hidden distribution is not normalized")
    total = 0.0
    for y, w in zip(model.hidden_states, mu_y):
        if w:
            total += float(model.marginal_row(x, y, a, b).get((theta, x_next), 0)) * w
    return total


def survival(model: GameModel, x, y, a, b, t: int) -> float:
    """``1 - Q^X(t, E_X | x, y, a, b)``.  Mass exactly at ``theta == t`` counts as a jump."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    model.check_labels(x, y, a, b)
    return float(model.survival_exact(x, y, a, b, t))


def validate(model: GameModel) -> ValidationReport:
    """Check every structural invariant; never raises.

    The ``theta >= 1`` check is the tick-grid form of the sufficient condition
    for finitely many jumps in a finite horizon: with no mass at zero sojourn,
    ``Q(1/2, E) = 0``, so each jump consumes at least one tick.
    """
    issues: list[Issue] = []

    def err(code, msg):
        issues.append(Issue("error", code, msg))

    def warn(code, msg):
        issues.append(Issue("warning", code, msg))

    for k in model.extra_keys:
        warn("unknown-key", f"unrecognized top-level key {k!r}")

    if not model.observed_states:
        err("labels", "observed_states is empty")
    if not model.hidden_states:
        err("labels", "hidden_states is empty")
    for name, labels in (("observed_states", model.observed_states),
                         ("hidden_states", model.hidden_states)):
        if len(set(labels)) != len(labels):
            err("labels", f"duplicate labels in {name}")

    obs = set(model.observed_states)
    hid = set(model.hidden_states)
    for which, acts in (("actions1", model.actions1), ("actions2", model.actions2)):
        for x in model.observed_states:
            if not acts.get(x):
                err("empty-actions", f"{which} has no actions at {x!r}")
            elif len(set(acts[x])) != len(acts[x]):
                err("labels", f"duplicate actions in {which}[{x!r}]")
        for x in acts:
            if x not in obs:
                err("unknown-label", f"{which} names unknown observed state {x!r}")

    if not isinstance(model.horizon_ticks, int) or model.horizon_ticks < 1:
        err("horizon", f"horizon_ticks must be a positive integer, got {model.horizon_ticks!r}")

    admissible = set(model.admissible())
    for key in model.kernel:
        if key not in admissible:
            x, y, a, b = key
            if x not in obs or y not in hid:
                err("unknown-label", f"kernel row {key} names an unknown state")
            else:
                warn("inadmissible-row", f"kernel row {key} uses actions outside A(x) x B(x)")
    for key in model.reward_rate:
        if key not in admissible:
            warn("inadmissible-row", f"reward rate {key} is outside the admissible set")

    for key in model.admissible():
        entries = model.kernel.get(key)
        if not entries:
            err("missing-kernel-row", f"no kernel entries for {key}")
        else:
            total = Fraction(0)
            for e in entries:
                if e.x_next not in obs or e.y_next not in hid:
                    err("unknown-label", f"kernel entry {key} -> ({e.x_next!r}, {e.y_next!r})")
                if not isinstance(e.theta, int):
                    err("bad-sojourn", f"non-integer sojourn {e.theta!r} in {key}")
                elif e.theta == 0 and e.p > 0:
                    err("zero-sojourn", f"positive mass at theta = 0 in {key}")
                elif e.theta < 0:
                    err("bad-sojourn", f"negative sojourn {e.theta} in {key}")
                if not 0 <= e.p <= 1:
                    err("bad-probability", f"mass {e.p} outside [0, 1] in {key}")
                total += e.p
            if abs(float(total) - 1.0) > KERNEL_TOL:
                err("kernel-mass", f"kernel row {key} sums to {float(total)!r}, expected 1")
        rate = model.reward_rate.get(key)
        if rate is None:
            err("missing-rate", f"no reward rate for {key}")
        elif rate < 0:
            err("negative-rate", f"reward rate {rate} < 0 at {key}")

    q0 = model.initial_hidden
    if len(q0) != len(model.hidden_states):
        err("initial-hidden", "initial_hidden does not match hidden_states")
    elif any(w < 0 for w in q0) or abs(float(sum(q0)) - 1.0) > KERNEL_TOL:
        err("initial-hidden", "initial_hidden is not a probability vector")

    if model.max_sojourn > model.horizon_ticks:
        warn("long-sojourn",
             f"max sojourn {model.max_sojourn} exceeds horizon {model.horizon_ticks}; "
             "those transitions are censored")
    return ValidationReport(tuple(issues))


# ---------------------------------------------------------------- parsing


def parse_rational(value: Any, what: str) -> Fraction:
    """Exact rational from an integer or a ``"num/den"`` string.  Floats are refused."""
    if isinstance(value, bool):
        raise ModelFormatError(f"{what}: expected rational, got boolean")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, Fraction):
        return value
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError):
            raise ModelFormatError(f"{what}: cannot parse rational {value!r}") from None
    if isinstance(value, float):
        raise ModelFormatError(
            f"{what}: bare float {value!r} is not exact; write it as a \"num/den\" string"
        )
    raise ModelFormatError(f"{what}: expected rational, got {type(value).__name__}")


def parse_probability(value: Any, what: str) -> Fraction:
    if isinstance(value, bool):
        raise ModelFormatError(f"{what}: expected number, got boolean")
    if isinstance(value, (int, Fraction)):
        return Fraction(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ModelFormatError(f"{what}: non-finite probability")
        return Fraction(repr(value))
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError):
            raise ModelFormatError(f"{what}: cannot parse probability {value!r}") from None
    raise ModelFormatError(f"{what}: expected number, got {type(value).__name__}")


def _labels(data, name) -> tuple[str, ...]:
    seq = data.get(name)
    if not isinstance(seq, list) or not all(isinstance(s, str) for s in seq):
        raise ModelFormatError(f"{name} must be an array of strings")
    return tuple(seq)


def _action_map(data, name) -> dict[str, tuple[str, ...]]:
    m = data.get(name)
    if not isinstance(m, dict):
        raise ModelFormatError(f"{name} must be an object mapping states to action arrays")
    out = {}
    for x, acts in m.items():
        if not isinstance(acts, list) or not all(isinstance(s, str) for s in acts):
            raise ModelFormatError(f"{name}[{x!r}] must be an array of strings")
        out[x] = tuple(acts)
    return out


def _record_key(rec, where) -> Key:
    try:
        key = (rec["x"], rec["y"], rec["a"], rec["b"])
    except (KeyError, TypeError):
        raise ModelFormatError(f"{where}: record needs x, y, a, b") from None
    if not all(isinstance(k, str) for k in key):
        raise ModelFormatError(f"{where}: x, y, a, b must be strings")
    return key


def model_from_dict(data: Mapping) -> GameModel:
    """Build a model from the JSON object form.  Structural problems raise
    :class:`ModelFormatError`; semantic ones are left for :func:`validate`."""
    if not isinstance(data, Mapping):
        raise ModelFormatError("model must be a JSON object")
    for k in ("observed_states", "hidden_states", "actions1", "actions2", "kernel",
              "reward_rate", "horizon_ticks", "initial_goal", "initial_hidden"):
        if k not in data:
            raise ModelFormatError(f"missing required key {k!r}")
    observed = _labels(data, "observed_states")
    hidden = _labels(data, "hidden_states")

    kernel: dict[Key, dict] = {}
    if not isinstance(data["kernel"], list):
        raise ModelFormatError("kernel must be an array of records")
    for i, rec in enumerate(data["kernel"]):
        key = _record_key(rec, f"kernel[{i}]")
        theta = rec.get("theta")
        if isinstance(theta, bool) or not isinstance(theta, int):
            raise ModelFormatError(f"kernel[{i}]: theta must be an integer")
        xn, yn = rec.get("x_next"), rec.get("y_next")
        if not isinstance(xn, str) or not isinstance(yn, str):
            raise ModelFormatError(f"kernel[{i}]: x_next and y_next must be strings")
        p = parse_probability(rec.get("p"), f"kernel[{i}].p")
        row = kernel.setdefault(key, {})
        # duplicate (theta, x', y') entries merge by addition
        row[(theta, xn, yn)] = row.get((theta, xn, yn), Fraction(0)) + p

    rates: dict[Key, Fraction] = {}
    if not isinstance(data["reward_rate"], list):
        raise ModelFormatError("reward_rate must be an array of records")
    for i, rec in enumerate(data["reward_rate"]):
        key = _record_key(rec, f"reward_rate[{i}]")
        rates[key] = parse_rational(rec.get("rate"), f"reward_rate[{i}].rate")

    horizon = data["horizon_ticks"]
    if isinstance(horizon, bool) or not isinstance(horizon, int):
        raise ModelFormatError("horizon_ticks must be an integer")

    q0_raw = data["initial_hidden"]
    if not isinstance(q0_raw, dict):
        raise ModelFormatError("initial_hidden must be an object mapping hidden labels to numbers")
    unknown = set(q0_raw) - set(hidden)
    if unknown:
        raise ModelFormatError(f"initial_hidden names unknown hidden states {sorted(unknown)}")
    q0 = tuple(parse_probability(q0_raw.get(y, 0), f"initial_hidden[{y!r}]") for y in hidden)

    return GameModel(
        observed_states=observed,
        hidden_states=hidden,
        actions1=_action_map(data, "actions1"),
        actions2=_action_map(data, "actions2"),
        kernel=_freeze_kernel(kernel),
        reward_rate=rates,
        horizon_ticks=horizon,
        initial_goal=parse_rational(data["initial_goal"], "initial_goal"),
        initial_hidden=q0,
        extra_keys=tuple(sorted(set(data) - KNOWN_KEYS)),
    )


def _freeze_kernel(kernel: Mapping[Key, Mapping]) -> dict[Key, tuple[KernelEntry, ...]]:
    out = {}
    for key, row in kernel.items():
        entries = [KernelEntry(th, xn, yn, p) for (th, xn, yn), p in row.items() if p != 0]
        entries.sort(key=lambda e: (e.theta, e.x_next, e.y_next))
        out[key] = tuple(entries)
    return out


def build_model(
    observed_states: Sequence[str],
    hidden_states: Sequence[str],
    actions1: Mapping[str, Sequence[str]],
    actions2: Mapping[str, Sequence[str]],
    kernel: Mapping[Key, Iterable[tuple]],
    reward_rate: Mapping[Key, Any],
    horizon_ticks: int,
    initial_goal: Any,
    initial_hidden: Sequence[Any],
) -> GameModel:
    """Programmatic constructor.  ``kernel`` maps ``(x, y, a, b)`` to an iterable of
    ``(theta, x_next, y_next, p)``; rates and goal accept ints, strings or Fractions."""
    rows: dict[Key, dict] = {}
    for key, entries in kernel.items():
        row = rows.setdefault(tuple(key), {})
        for th, xn, yn, p in entries:
            p = parse_probability(p, f"kernel{key}")
            row[(th, xn, yn)] = row.get((th, xn, yn), Fraction(0)) + p
    return GameModel(
        observed_states=tuple(observed_states),
        hidden_states=tuple(hidden_states),
        actions1={x: tuple(v) for x, v in actions1.items()},
        actions2={x: tuple(v) for x, v in actions2.items()},
        kernel=_freeze_kernel(rows),
        reward_rate={tuple(k): parse_rational(v, f"rate{k}") for k, v in reward_rate.items()},
        horizon_ticks=horizon_ticks,
        initial_goal=parse_rational(initial_goal, "initial_goal"),
        initial_hidden=tuple(parse_probability(w, "initial_hidden") for w in initial_hidden),
    )


def _fmt_rational(q: Fraction) -> str | int:
    return int(q) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def model_to_dict(model: GameModel) -> dict:
    """Inverse of :func:`model_from_dict` (probabilities written as ``"num/den"``)."""
    return {
        "observed_states": list(model.observed_states),
        "hidden_states": list(model.hidden_states),
        "actions1": {x: list(v) for x, v in model.actions1.items()},
        "actions2": {x: list(v) for x, v in model.actions2.items()},
        "kernel": [
            {"x": x, "y": y, "a": a, "b": b, "theta": e.theta,
             "x_next": e.x_next, "y_next": e.y_next, "p": str(e.p)}
            for (x, y, a, b), row in model.kernel.items() for e in row
        ],
        "reward_rate": [
            {"x": x, "y": y, "a": a, "b": b, "rate": _fmt_rational(r)}
            for (x, y, a, b), r in model.reward_rate.items()
        ],
        "horizon_ticks": model.horizon_ticks,
        "initial_goal": _fmt_rational(model.initial_goal),
        "initial_hidden": {y: str(w) for y, w in zip(model.hidden_states, model.initial_hidden)},
    }


def load_model(path) -> GameModel:
    """Read a model file.  I/O and JSON errors surface as :class:`ModelFormatError`."""
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ModelFormatError(f"cannot read {path}: {exc.strerror or exc}") from None
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: invalid JSON ({exc})") from None
    return model_from_dict(data)
