"""Turning repeated site detections into evidence about who posted.

Each pseudonymous post is one observation: was the suspect's line seen
loading the site at that time? Observations are treated as independent,
which is a modelling assumption, not a property of real browsing.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import datetime
from typing import Sequence

from .errors import InvalidArgument


@dataclass(frozen=True)
class Event:
    post_time: datetime
    detected: bool


@dataclass(frozen=True)
class EventLog:
    events: tuple

    def __post_init__(self):
        events = tuple(self.events)
        times = [e.post_time for e in events]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise InvalidArgument("event timestamps must be strictly increasing")
        object.__setattr__(self, "events", events)

    @classmethod
    def from_pairs(cls, pairs: Sequence[tuple]) -> "EventLog":
        return cls(tuple(Event(t, bool(d)) for t, d in pairs))

    @property
    def hits(self) -> int:
        return sum(e.detected for e in self.events)

    @property
    def misses(self) -> int:
        return len(self.events) - self.hits


@dataclass(frozen=True)
class Evidence:
    posterior: float
    log_lr: float


def session_overlap_fp(avg_session: float, window: float) -> float:
    """Chance a randomly placed visit of ``avg_session`` minutes covers a post instant in ``window``."""
    if not 0 < avg_session <= window:
        raise InvalidArgument("need 0 < avg_session <= window")
    return avg_session / window


def combine_evidence(log: EventLog, fp: float, fn: float, prior: float) -> Evidence:
    """Bayesian update of ``prior`` over independent detection outcomes."""
    for name, v in (("fp", fp), ("fn", fn), ("prior", prior)):
        if not 0 < v < 1:
            raise InvalidArgument(f"{name} must lie in (0, 1)")
    if not log.events:
        raise InvalidArgument("event log is empty")
    log_lr = log.hits * (math.log1p(-fn) - math.log(fp)) + log.misses * (math.log(fn) - math.log1p(-fp))
    prior_logit = math.log(prior) - math.log1p(-prior)
    z = prior_logit + log_lr
    posterior = 1.0 / (1.0 + math.exp(-z)) if z >= 0 else math.exp(z) / (1.0 + math.exp(z))
    return Evidence(posterior, log_lr)
