"""Horizon-limited exact simulation on large graphs.

An agent's first T actions depend only on the signals inside its
radius-T ball, so each agent can be simulated exactly by running the
full engine on that ball alone.  `BallSimulator` compiles the per-agent
ball runs once (they do not depend on the realized signals) and then
answers any realized world with table lookups, which makes Monte Carlo
over worlds cheap.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .engine import DynamicsRun, TieBreak, run_on_adjacency
from .errors import BallBudgetExceeded, ValidationError
from .graphs import SocialGraph, ball
from .seeding import Stream, split
from .signals import SignalModel

DEFAULT_BALL_BUDGET = 1 << 22


@dataclass(frozen=True)
class RealizedProfile:
    """One sampled world: the state and every agent's signal index."""

    state: int
    signals: tuple[int, ...]
    seed: int | None = None

    def __post_init__(self):
        if self.state not in (0, 1):
            raise ValidationError(f"state must be 0 or 1, got {self.state}")


def sample_world(model: SignalModel, graph: SocialGraph, seed: int) -> RealizedProfile:
    """Draw (state, signals) from the model on the graph, reproducibly."""
    stream = Stream(split(seed))
    state = stream.next_bit()
    n0, n1, den = model.numerators()
    nums = n1 if state == 1 else n0
    cumulative = []
    acc = 0
    for w in nums:
        acc += w
        cumulative.append(acc)
    signals = tuple(stream.choose(cumulative, den) for _ in range(graph.n))
    return RealizedProfile(state, signals, seed)


@dataclass
class LocalRunResult:
    """Per-agent trajectories for one realized world, horizon T."""

    horizon: int
    actions: dict[int, tuple[int, ...]]
    beliefs: dict[int, tuple[Fraction, ...]]
    ball_sizes: dict[int, int]


class BallSimulator:
    """Compiled per-agent ball engines for a fixed (graph, model, horizon)."""

    def __init__(self, graph: SocialGraph, model: SignalModel, horizon: int,
                 tiebreak: TieBreak, budget: int | None = None):
        if horizon < 1:
            raise ValidationError(f"horizon must be >= 1, got {horizon}")
        limit = DEFAULT_BALL_BUDGET if budget is None else budget
        self.graph = graph
        self.model = model
        self.horizon = horizon
        self.tiebreak = tiebreak
        self._balls: dict[int, tuple[list[int], DynamicsRun]] = {}
        m = model.m
        for u in range(graph.n):
            b = ball(graph, u, horizon)
            states = m ** b.size
            if states > limit:
                raise BallBudgetExceeded(
                    f"agent {u}: ball of radius {horizon} has {b.size} vertices, "
                    f"m^size = {states} exceeds budget {limit}"
                )
            members = list(b.vertices)
            index = {v: k for k, v in enumerate(members)}
            adj = [
                tuple(sorted(index[w] for w in b.adjacency()[v]))
                for v in members
            ]
            run = run_on_adjacency(adj, model, tiebreak, t_cap=horizon,
                                   coin_ids=members, keep_history=True)
            self._balls[u] = (members, run)

    def ball_size(self, u: int) -> int:
        return len(self._balls[u][0])

    def run(self, realized: RealizedProfile) -> LocalRunResult:
        if len(realized.signals) != self.graph.n:
            raise ValidationError(
                f"realized profile has {len(realized.signals)} signals, graph has {self.graph.n}"
            )
        m = self.model.m
        actions: dict[int, tuple[int, ...]] = {}
        beliefs: dict[int, tuple[Fraction, ...]] = {}
        sizes: dict[int, int] = {}
        for u in range(self.graph.n):
            members, run = self._balls[u]
            root_pos = members.index(u)
            digits = [realized.signals[v] for v in members]
            profile = run.space.index_of(digits)
            horizon = self.horizon
            acts = tuple(run.action(profile, root_pos, t) for t in range(1, horizon + 1))
            xs = tuple(run.belief(profile, root_pos, t) for t in range(1, horizon + 1))
            actions[u] = acts
            beliefs[u] = xs
            sizes[u] = len(members)
        return LocalRunResult(self.horizon, actions, beliefs, sizes)


def run_local(graph: SocialGraph, model: SignalModel, realized: RealizedProfile,
              horizon: int, tiebreak: TieBreak, budget: int | None = None) -> LocalRunResult:
    """One-shot locality-based run (compiles the balls, then evaluates)."""
    return BallSimulator(graph, model, horizon, tiebreak, budget).run(realized)
