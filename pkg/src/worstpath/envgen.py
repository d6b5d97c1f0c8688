"""Reproducible synthetic tree MDPs shaped like retrosynthesis problems.

The generator wires three state pools. Live states form a random order
in which every state owns at least one action whose children sit
strictly later in the order (or are building blocks), so each live
state has a finite all-building-block decomposition. Doomed states only
ever reach other doomed states, realising unsalvageable dead ends. A
configurable share of live states additionally receives a trap action
with at least one doomed child: choosing it poisons the subtree, the
failure mode worst-path values exist to punish.

Alongside the MDP a base prior policy is generated: a softmax over
seeded standard-normal logits with a fraction of actions hard-masked to
zero probability. The mask defines the support that trained policies
must respect.

All randomness flows from NumPy's PCG64 via SeedSequence, so identical
configs produce bit-identical environments on every platform.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mdp import TreeMdp
from .values import StochasticPolicy, value_iteration

_MAX_ATTEMPTS = 100


class GenerationError(RuntimeError):
    """No solvable environment found within the resampling budget."""


class ParseError(ValueError):
    """A malformed environment document; carries the offending line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class EnvValidationError(ValueError):
    """A parsed document whose structures violate the MDP or policy invariants."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


@dataclass(frozen=True)
class EnvConfig:
    """Knobs for the synthetic generator.

    ``child_count_weights[i]`` is the probability that an action yields
    i+1 children; the default keeps actions at three or fewer children,
    concentrated on one and two. ``dead_end_fraction`` is the share of
    non-building-block states given at least one action whose subtree
    cannot reach an all-building-block frontier. ``bb_child_bias`` is
    the probability that a child of a guaranteed-good action is a
    building block rather than a later live state; lower values make
    solvable routes deeper. ``slow_route_fraction`` gives that share of
    live states an extra good-but-slow action stepping to the next live
    state in order, a needlessly deep route that a depth-aware policy
    should learn to skip.
    """

    num_states: int = 50
    max_actions_per_state: int = 3
    child_count_weights: tuple = (0.55, 0.35, 0.10)
    bb_fraction: float = 0.35
    dead_end_fraction: float = 0.25
    bb_child_bias: float = 0.35
    slow_route_fraction: float = 0.5
    base_mask_fraction: float = 0.15
    seed: int = 0
    gamma: float = 0.95

    def __post_init__(self):
        if self.num_states < 2:
            raise ValueError("num_states must be at least 2")
        if not 0.0 < self.bb_fraction < 1.0:
            raise ValueError("bb_fraction must lie in (0, 1)")
        if not 0.0 <= self.dead_end_fraction < 1.0:
            raise ValueError("dead_end_fraction must lie in [0, 1)")
        if not 0.0 <= self.bb_child_bias <= 1.0:
            raise ValueError("bb_child_bias must lie in [0, 1]")
        if not 0.0 <= self.slow_route_fraction <= 1.0:
            raise ValueError("slow_route_fraction must lie in [0, 1]")
        if not 0.0 <= self.base_mask_fraction < 1.0:
            raise ValueError("base_mask_fraction must lie in [0, 1)")
        if self.max_actions_per_state < 1:
            raise ValueError("max_actions_per_state must be positive")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must lie in (0, 1)")
        w = np.asarray(self.child_count_weights, dtype=np.float64)
        if w.size == 0 or np.any(w < 0) or abs(float(w.sum()) - 1.0) > 1e-9:
            raise ValueError("child_count_weights must be non-negative and sum to 1")


def generate(config: EnvConfig):
    """Build a validating (TreeMdp, base policy) pair from ``config``.

    Resamples until at least half the non-building-block states are
    solvable (V* > 0), raising :class:`GenerationError` if the budget of
    attempts runs out. Identical configs give bit-identical results.
    """
    root_seq = np.random.SeedSequence(config.seed)
    for child_seq in root_seq.spawn(_MAX_ATTEMPTS):
        rng = np.random.default_rng(child_seq)
        mdp, base = _build(config, rng)
        if mdp.validate():
            continue
        if _is_solvable(mdp):
            return mdp, base
    raise GenerationError(
        f"no solvable environment in {_MAX_ATTEMPTS} attempts for {config}"
    )


def _is_solvable(mdp: TreeMdp) -> bool:
    """At least half the non-building-block states must have V* > 0."""
    vstar = value_iteration(mdp, tol=1e-9)
    non_bb = ~mdp.building_block
    if not non_bb.any():
        return False
    return float((vstar[non_bb] > 0.0).mean()) >= 0.5


def solvable_states(mdp: TreeMdp) -> np.ndarray:
    """Non-building-block states with V* > 0, in ascending id order."""
    vstar = value_iteration(mdp, tol=1e-9)
    return np.flatnonzero((vstar > 0.0) & ~mdp.building_block)


def _build(config: EnvConfig, rng: np.random.Generator):
    n = config.num_states
    weights = np.asarray(config.child_count_weights, dtype=np.float64)
    weights = weights / weights.sum()

    n_bb = int(round(config.bb_fraction * n))
    n_bb = min(max(n_bb, 1), n - 1)
    bb_ids = rng.choice(n, size=n_bb, replace=False)
    is_bb = np.zeros(n, dtype=bool)
    is_bb[bb_ids] = True
    non_bb = np.flatnonzero(~is_bb)

    n_dead_target = int(round(config.dead_end_fraction * non_bb.size))
    n_doomed = 0
    if n_dead_target > 0:
        n_doomed = min(non_bb.size // 2, max(1, n_dead_target // 3))
    doomed = rng.choice(non_bb, size=n_doomed, replace=False) if n_doomed else np.array([], dtype=np.int64)
    is_doomed = np.zeros(n, dtype=bool)
    is_doomed[doomed] = True
    live = non_bb[~is_doomed[non_bb]]

    n_trapped = min(max(0, n_dead_target - n_doomed), live.size)
    trapped = rng.choice(live, size=n_trapped, replace=False) if n_trapped else np.array([], dtype=np.int64)
    is_trapped = np.zeros(n, dtype=bool)
    is_trapped[trapped] = True

    # Live states follow a random order; "good" actions only point later
    # in the order or at building blocks, so they terminate.
    order = rng.permutation(live)
    position = {int(s): i for i, s in enumerate(order)}

    def draw_count():
        return int(rng.choice(weights.size, p=weights)) + 1

    def child_list(pool) -> list:
        return [int(c) for c in rng.choice(pool, size=draw_count(), replace=True)]

    def good_action(pos: int) -> list:
        later = order[pos + 1:]
        out = []
        for _ in range(draw_count()):
            if later.size == 0 or rng.random() < config.bb_child_bias:
                out.append(int(rng.choice(bb_ids)))
            else:
                out.append(int(rng.choice(later)))
        return out

    max_a = config.max_actions_per_state
    children = [[] for _ in range(n)]
    for s in order:
        s = int(s)
        pos = position[s]
        acts = [good_action(pos)]
        if (
            config.slow_route_fraction > 0
            and pos + 1 < order.size
            and len(acts) < max_a
            and rng.random() < config.slow_route_fraction
        ):
            acts.append([int(order[pos + 1])])
        n_fixed = len(acts)
        room = max_a - n_fixed
        n_extra = int(rng.integers(0, room + 1)) if room > 0 else 0
        if is_trapped[s] and n_extra == 0 and room > 0:
            n_extra = 1
        for _ in range(n_extra):
            acts.append(child_list(np.arange(n)))
        if is_trapped[s] and len(acts) > n_fixed:
            # overwrite one filler action with a guaranteed trap
            trap = child_list(np.arange(n))
            trap[int(rng.integers(len(trap)))] = int(rng.choice(doomed))
            acts[int(rng.integers(n_fixed, len(acts)))] = trap
        perm = rng.permutation(len(acts))
        children[s] = [acts[int(i)] for i in perm]
    for s in doomed:
        s = int(s)
        n_acts = int(rng.integers(1, max_a + 1))
        children[s] = [child_list(doomed) for _ in range(n_acts)]

    mdp = TreeMdp(children, is_bb, config.gamma)
    base = _base_policy(mdp, config.base_mask_fraction, rng)
    return mdp, base


def _base_policy(mdp: TreeMdp, mask_fraction: float, rng: np.random.Generator) -> StochasticPolicy:
    logits = rng.standard_normal(mdp.num_pairs)
    probs = np.zeros(mdp.num_pairs)
    support = np.zeros(mdp.num_pairs, dtype=bool)
    for s in mdp.sweep_states:
        sl = mdp.pair_slice(int(s))
        n_a = sl.stop - sl.start
        keep = np.ones(n_a, dtype=bool)
        if n_a > 1 and mask_fraction > 0.0:
            keep = rng.random(n_a) >= mask_fraction
            if not keep.any():
                keep[int(rng.integers(n_a))] = True
        z = logits[sl][keep]
        z = np.exp(z - z.max())
        block = np.zeros(n_a)
        block[keep] = z / z.sum()
        probs[sl] = block
        support[sl] = keep
    return StochasticPolicy(mdp, probs, support)


# -- text format ---------------------------------------------------------------
#
#   states <N> gamma <g>
#   bb <id> <id> ...
#   t <s> <a> -> <c1> <c2> ...
#   pi0 <s> <p1> <p2> ...          (one probability per action, action order)
#
# Lines starting with "#" are ignored on read. Floats are written with
# repr so that deserialize(serialize(x)) reproduces x exactly.


def serialize(mdp: TreeMdp, base: StochasticPolicy) -> str:
    lines = [f"states {mdp.num_states} gamma {mdp.gamma!r}"]
    lines.append("bb " + " ".join(str(s) for s in np.flatnonzero(mdp.building_block)))
    for s in range(mdp.num_states):
        for a, act in enumerate(mdp.children[s]):
            lines.append(f"t {s} {a} -> " + " ".join(str(c) for c in act))
    for s in range(mdp.num_states):
        if mdp.num_actions(s) == 0:
            continue
        probs = " ".join(repr(float(p)) for p in base.at(s))
        lines.append(f"pi0 {s} {probs}")
    return "\n".join(lines) + "\n"


def deserialize(doc: str):
    """Parse an environment document back into (TreeMdp, base policy).

    Raises :class:`ParseError` with the offending line number on malformed
    input, and :class:`EnvValidationError` when the parsed structures break
    an invariant (the document was well-formed but describes a bad MDP).
    """
    num_states = None
    gamma = None
    bb_ids = None
    transitions = {}
    pi0 = {}
    last_line_no = 0

    for line_no, raw in enumerate(doc.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        last_line_no = line_no
        fields = line.split()
        tag = fields[0]
        try:
            if tag == "states":
                if len(fields) != 4 or fields[2] != "gamma":
                    raise ValueError("expected 'states <N> gamma <g>'")
                num_states = int(fields[1])
                gamma = float(fields[3])
            elif tag == "bb":
                bb_ids = [int(f) for f in fields[1:]]
            elif tag == "t":
                if len(fields) < 5 or fields[3] != "->":
                    raise ValueError("expected 't <s> <a> -> <children...>'")
                s, a = int(fields[1]), int(fields[2])
                if (s, a) in transitions:
                    raise ValueError(f"duplicate transition ({s}, {a})")
                transitions[(s, a)] = [int(f) for f in fields[4:]]
            elif tag == "pi0":
                s = int(fields[1])
                if s in pi0:
                    raise ValueError(f"duplicate pi0 line for state {s}")
                pi0[s] = [float(f) for f in fields[2:]]
            else:
                raise ValueError(f"unknown directive {tag!r}")
        except ValueError as exc:
            raise ParseError(line_no, str(exc)) from None

    if num_states is None or bb_ids is None:
        raise ParseError(last_line_no or 1, "missing 'states' or 'bb' header")

    counts = {}
    for s, a in transitions:
        counts[s] = max(counts.get(s, -1), a)
    children = [[] for _ in range(num_states)]
    for s, top in counts.items():
        if not 0 <= s < num_states:
            raise ParseError(last_line_no, f"transition references state {s} out of range")
        for a in range(top + 1):
            if (s, a) not in transitions:
                raise ParseError(
                    last_line_no,
                    f"unexpected end of document: state {s} is missing action {a}",
                )
            children[s].append(transitions[(s, a)])

    is_bb = np.zeros(num_states, dtype=bool)
    for s in bb_ids:
        if not 0 <= s < num_states:
            raise ParseError(last_line_no, f"building block {s} out of range")
        is_bb[s] = True

    mdp = TreeMdp(children, is_bb, gamma if gamma is not None else 0.95)
    violations = mdp.validate()

    probs = np.zeros(mdp.num_pairs)
    for s in range(num_states):
        n_a = mdp.num_actions(s)
        if n_a == 0:
            if s in pi0:
                violations.append(f"state {s}: pi0 given for a terminal state")
            continue
        if s not in pi0:
            raise ParseError(
                last_line_no, f"unexpected end of document: missing pi0 for state {s}"
            )
        row = pi0[s]
        if len(row) != n_a:
            raise ParseError(
                last_line_no, f"pi0 for state {s} has {len(row)} entries, expected {n_a}"
            )
        probs[mdp.pair_slice(s)] = row

    violations.extend(_policy_violations(mdp, probs))
    if violations:
        raise EnvValidationError(violations)
    return mdp, StochasticPolicy(mdp, probs, probs > 0.0)


def _policy_violations(mdp: TreeMdp, probs: np.ndarray) -> list:
    out = []
    if np.any(probs < 0):
        for k in np.flatnonzero(probs < 0):
            s = int(mdp.pair_state[k])
            out.append(f"state {s}: negative probability {probs[k]}")
    for s in mdp.sweep_states:
        row = probs[mdp.pair_slice(int(s))]
        if np.any(row < 0):
            continue  # already reported above
        if abs(float(row.sum()) - 1.0) > 1e-9:
            out.append(f"state {s}: probabilities sum to {float(row.sum())}")
        elif not np.any(row > 0):
            out.append(f"state {s}: no strictly positive action probability")
    return out


def save_env(path, mdp: TreeMdp, base: StochasticPolicy) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize(mdp, base))


def load_env(path):
    with open(path, encoding="utf-8") as fh:
        return deserialize(fh.read())
