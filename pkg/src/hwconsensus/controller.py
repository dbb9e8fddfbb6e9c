"""Distributed root-seeking control law with expanding truncations.

Per round k each agent: pools the largest truncation count seen in its
closed neighborhood, aggregates weighted observation differences, and either
(a) adopts a larger pooled count -- in which case the round is a pure
restart: the estimate returns to the reset point u* and no correction step
or truncation test happens until the next round -- or (b) runs the usual
stochastic-approximation update with step 1/k, truncating back to u* and
incrementing its count whenever the candidate leaves the expanding bound
M_sigma = ln(sigma + c_M).

All functions are pure over a snapshot of neighbor values taken at the start
of the round, so agents may be stepped in any order within a round.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ValidationError


@dataclass(frozen=True)
class Schedule:
    """Step sizes a_k = 1/k and truncation bounds M_sigma = ln(sigma + c_M)."""

    c_M: float

    def __post_init__(self):
        if not (self.c_M > 0 and math.isfinite(self.c_M)):
            raise ValidationError(f"c_M must be positive and finite, got {self.c_M!r}")

    def a(self, k: int) -> float:
        return 1.0 / k

    def bound(self, sigma: int) -> float:
        return math.log(sigma + self.c_M)


@dataclass(frozen=True)
class ControllerState:
    u: float
    sigma: int
    u_star: float


@dataclass(frozen=True)
class StepInputs:
    """Snapshot an agent sees at the end of round k.

    The three maps must share one key set, the agent's neighbor set.
    """

    own_output: float
    neighbor_obs: dict      # j -> z_ij (neighbor output plus noise)
    neighbor_sigmas: dict   # j -> sigma_j at the snapshot
    weights: dict           # j -> p_ij

    def __post_init__(self):
        if not (set(self.neighbor_obs) == set(self.neighbor_sigmas) == set(self.weights)):
            raise ValidationError("neighbor maps must share one key set")


def pooled_sigma(s: ControllerState, neighbor_sigmas: dict) -> int:
    """Largest truncation count in the closed neighborhood."""
    sp = s.sigma
    for v in neighbor_sigmas.values():
        if v > sp:
            sp = v
    return sp


def catch_up(s: ControllerState, sigma_pooled: int) -> float:
    """Working estimate for the round: own u if the count is current, else u*."""
    if sigma_pooled < s.sigma:
        raise ValidationError("pooled count below own count")
    return s.u if sigma_pooled == s.sigma else s.u_star


def aggregate_observation(inputs: StepInputs) -> float:
    """Weighted sum of observed neighbor-minus-own output differences."""
    y = inputs.own_output
    O = 0.0
    for j, z in inputs.neighbor_obs.items():
        O += inputs.weights[j] * (z - y)
    return O


def update(s: ControllerState, u_prime: float, sigma_pooled: int, O: float,
           k: int, sched: Schedule) -> ControllerState:
    """One correction step with the expanding truncation test.

    Candidate u' + (1/k) O is kept iff strictly inside M_{sigma_pooled};
    hitting or crossing the bound resets to u* and increments the count.
    """
    cand = u_prime + (1.0 / k) * O
    if abs(cand) < sched.bound(sigma_pooled):
        out = ControllerState(u=cand, sigma=sigma_pooled, u_star=s.u_star)
    else:
        out = ControllerState(u=s.u_star, sigma=sigma_pooled + 1, u_star=s.u_star)
    assert abs(out.u) < sched.bound(sigma_pooled)
    return out


@dataclass(frozen=True)
class StepRecord:
    sigma_prime: int
    u_prime: float
    O: float
    fired: bool  # agent's own truncation test tripped this round


def step_agent(s: ControllerState, inputs: StepInputs, k: int,
               sched: Schedule) -> tuple[ControllerState, StepRecord]:
    """Full round for one agent: pool, aggregate, then restart or update.

    A round in which the pooled count exceeds the agent's own is a pure
    restart: the next state is (u*, pooled count) and the observation is
    discarded. The correction step runs only when the count is current.
    """
    sp = pooled_sigma(s, inputs.neighbor_sigmas)
    up = catch_up(s, sp)
    O = aggregate_observation(inputs)
    if sp > s.sigma:
        nxt = ControllerState(u=s.u_star, sigma=sp, u_star=s.u_star)
        fired = False
    else:
        nxt = update(s, up, sp, O, k, sched)
        fired = nxt.sigma == sp + 1
    return nxt, StepRecord(sigma_prime=sp, u_prime=up, O=O, fired=fired)
