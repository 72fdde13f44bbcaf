"""Exact signal models for a uniform binary state.

A model holds two rational probability vectors over a finite signal
support: the signal distribution under state 0 and under state 1.  Every
weight is strictly positive (so the two measures are mutually absolutely
continuous on the support) and everything downstream stays in exact
rational arithmetic.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from math import lcm
from typing import Sequence

from .errors import (
    DistributionsEqual,
    LengthMismatch,
    MTooSmall,
    QOutOfRange,
    UnknownSignal,
    ValidationError,
    WeightNotPositive,
    WeightsDoNotSumToOne,
)

RationalLike = Fraction | int | str


def as_fraction(x: RationalLike) -> Fraction:
    """Parse exact rationals from Fraction, int, 'num/den' or decimal strings."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        raise ValidationError(
            f"floats are not accepted as probabilities (got {x!r}); "
            "pass a string like '11/20' or '0.55'"
        )
    return Fraction(str(x))


@dataclass(frozen=True)
class SignalModel:
    """Finite signal support with exact per-state weights."""

    support: tuple
    mu0: tuple[Fraction, ...]
    mu1: tuple[Fraction, ...]

    @property
    def m(self) -> int:
        return len(self.support)

    def index(self, signal) -> int:
        try:
            return self.support.index(signal)
        except ValueError:
            raise UnknownSignal(f"signal {signal!r} not in support {self.support!r}") from None

    def common_denominator(self) -> int:
        return lcm(*(w.denominator for w in self.mu0 + self.mu1))

    def numerators(self, denominator: int | None = None) -> tuple[list[int], list[int], int]:
        """Integer weight numerators over a shared denominator (mu0, mu1, den)."""
        den = denominator or self.common_denominator()
        n0 = [int(w * den) for w in self.mu0]
        n1 = [int(w * den) for w in self.mu1]
        return n0, n1, den


@dataclass(frozen=True)
class SignalPosterior:
    """Posterior for the state given one signal, under the uniform prior."""

    belief: Fraction
    odds: Fraction

    def __post_init__(self):
        assert self.belief == self.odds / (1 + self.odds)
        assert 0 < self.belief < 1


def make_model(support: Sequence, mu0_weights: Sequence[RationalLike],
               mu1_weights: Sequence[RationalLike]) -> SignalModel:
    """Validate and build a signal model from explicit weights."""
    support = tuple(support)
    if not (len(support) == len(mu0_weights) == len(mu1_weights)):
        raise LengthMismatch(
            f"support/mu0/mu1 lengths differ: {len(support)}/{len(mu0_weights)}/{len(mu1_weights)}"
        )
    if len(support) < 2:
        raise MTooSmall("support must contain at least 2 signals")
    if len(set(support)) != len(support):
        raise ValidationError(f"support labels must be distinct: {support!r}")
    mu0 = tuple(as_fraction(w) for w in mu0_weights)
    mu1 = tuple(as_fraction(w) for w in mu1_weights)
    for mu in (mu0, mu1):
        if any(w <= 0 for w in mu):
            raise WeightNotPositive(f"all weights must be strictly positive: {mu}")
        if sum(mu) != 1:
            raise WeightsDoNotSumToOne(f"weights sum to {sum(mu)}, expected 1")
    if mu0 == mu1:
        raise DistributionsEqual("mu0 and mu1 must differ")
    return SignalModel(support, mu0, mu1)


def make_binary_model(q: RationalLike) -> SignalModel:
    """Binary signals that match the state with probability q, 1/2 < q < 1."""
    q = as_fraction(q)
    if not Fraction(1, 2) < q < 1:
        raise QOutOfRange(f"q must lie strictly between 1/2 and 1, got {q}")
    return make_model((0, 1), (q, 1 - q), (1 - q, q))


def make_quantile_model(m: int) -> SignalModel:
    """Evenly spread signal strengths: signal i has belief i/(m+1).

    Serves as a finite stand-in for a continuous (atomless) initial
    belief distribution; refining m doubles the number of distinct
    belief levels.
    """
    if m < 2:
        raise MTooSmall(f"quantile model needs m >= 2, got {m}")
    den = m * (m + 1)
    mu1 = tuple(Fraction(2 * i, den) for i in range(1, m + 1))
    mu0 = tuple(Fraction(2 * (m + 1 - i), den) for i in range(1, m + 1))
    return make_model(tuple(range(1, m + 1)), mu0, mu1)


def belief_of_signal(model: SignalModel, signal) -> SignalPosterior:
    """Exact posterior P(state=1 | signal) under the uniform prior."""
    i = model.index(signal)
    w0, w1 = model.mu0[i], model.mu1[i]
    return SignalPosterior(belief=w1 / (w0 + w1), odds=w1 / w0)


def tv_distance(p: Sequence[RationalLike], q: Sequence[RationalLike]) -> Fraction:
    """Total variation distance between two weight vectors."""
    if len(p) != len(q):
        raise LengthMismatch(f"length mismatch: {len(p)} vs {len(q)}")
    pf = [as_fraction(x) for x in p]
    qf = [as_fraction(x) for x in q]
    return Fraction(1, 2) * sum(abs(a - b) for a, b in zip(pf, qf))


def first_round_accuracy(model: SignalModel) -> Fraction:
    """Probability that the single-signal guess matches the state.

    Equals 1/2 + TV(mu0, mu1)/2, which is strictly above 1/2 for any
    valid model.
    """
    return Fraction(1, 2) + Fraction(1, 2) * tv_distance(model.mu0, model.mu1)


# -- config literals ------------------------------------------------------

def model_from_config(config) -> SignalModel:
    """Build a model from a JSON-style literal.

    Accepts {"kind": "binary", "q": "2/3"}, {"kind": "quantile", "m": 8},
    or {"kind": "explicit", "mu0": [...], "mu1": [...]} with rationals as
    "num/den" strings.  A JSON string is parsed first.
    """
    if isinstance(config, str):
        config = json.loads(config)
    if not isinstance(config, dict) or "kind" not in config:
        raise ValidationError(f"model config must be an object with a 'kind': {config!r}")
    kind = config["kind"]
    if kind == "binary":
        return make_binary_model(config["q"])
    if kind == "quantile":
        return make_quantile_model(int(config["m"]))
    if kind == "explicit":
        mu0, mu1 = config["mu0"], config["mu1"]
        support = config.get("support", tuple(range(len(mu0))))
        return make_model(tuple(support), mu0, mu1)
    raise ValidationError(f"unknown model kind {kind!r}")


def model_to_config(model: SignalModel) -> dict:
    """Explicit-weights literal that reproduces the model exactly."""
    return {
        "kind": "explicit",
        "support": list(model.support),
        "mu0": [str(w) for w in model.mu0],
        "mu1": [str(w) for w in model.mu1],
    }
