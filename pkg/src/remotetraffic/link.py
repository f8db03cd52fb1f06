"""FIFO bottleneck link simulator.

A single downstream queue is served at a constant bit rate. Victim packets
occupy the server for ``size * 8 / bandwidth``; attacker probes take zero
service time and only observe how long the queue takes to drain. Everything
else on the path is folded into a constant ``base_rtt`` plus non-negative
i.i.d. noise.

Times are float milliseconds, sizes integer bytes, bandwidths bits/second.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import accumulate
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidArgument

NOISE_KINDS = ("none", "uniform", "truncated-gaussian")


@dataclass(frozen=True)
class NoiseModel:
    """Extra queueing on the non-bottleneck links of the probe path.

    ``magnitude`` is the upper bound of a sample for every kind: ``uniform``
    draws from ``[0, magnitude]``; ``truncated-gaussian`` draws a zero-mean
    normal with sigma ``magnitude / 2`` restricted to ``[0, magnitude]``.
    """

    kind: str = "none"
    magnitude: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise InvalidArgument(f"unknown noise kind {self.kind!r}")
        if not self.magnitude >= 0:
            raise InvalidArgument("noise magnitude must be >= 0")

    def sample(self, n: int, rng: np.random.Generator | None = None) -> np.ndarray:
        if self.kind == "none" or self.magnitude == 0:
            return np.zeros(n)
        if rng is None:
            rng = np.random.default_rng(self.seed)
        if self.kind == "uniform":
            return rng.uniform(0.0, self.magnitude, size=n)
        # rejection sampling of |N(0, sigma)| on [0, 2 sigma]; acceptance ~95%
        sigma = self.magnitude / 2.0
        out = np.empty(n)
        filled = 0
        while filled < n:
            draw = np.abs(rng.normal(0.0, sigma, size=max(16, 2 * (n - filled))))
            draw = draw[draw <= self.magnitude][: n - filled]
            out[filled : filled + len(draw)] = draw
            filled += len(draw)
        return out


@dataclass(frozen=True)
class LinkConfig:
    downstream_bandwidth: float = 3e6
    base_rtt: float = 40.0
    mtu: int = 1500
    probe_period: float = 2.0
    probe_count: int = 1000
    noise: NoiseModel = field(default_factory=NoiseModel)

    def __post_init__(self):
        if not self.downstream_bandwidth > 0:
            raise InvalidArgument("downstream_bandwidth must be > 0")
        if not self.base_rtt >= 0:
            raise InvalidArgument("base_rtt must be >= 0")
        if not self.probe_period > 0:
            raise InvalidArgument("probe_period must be > 0")
        if int(self.probe_count) != self.probe_count or self.probe_count < 1:
            raise InvalidArgument("probe_count must be an integer >= 1")
        if not self.mtu > 0:
            raise InvalidArgument("mtu must be > 0")

    def probe_times(self) -> np.ndarray:
        return self.probe_period * np.arange(self.probe_count)


@dataclass(frozen=True)
class PacketArrival:
    time: float
    size: int

    def __post_init__(self):
        if not self.time >= 0:
            raise InvalidArgument(f"packet time must be >= 0, got {self.time}")
        if not self.size > 0:
            raise InvalidArgument(f"packet size must be > 0, got {self.size}")


@dataclass(frozen=True, eq=False)
class RttTrace:
    """Probe RTTs; ``rtts[i]`` belongs to the probe sent at ``probe_period * i``.

    Lost probes are listed in ``lost`` and carry NaN in ``rtts``.
    """

    probe_period: float
    rtts: np.ndarray
    lost: frozenset = frozenset()

    def __post_init__(self):
        rtts = np.array(self.rtts, dtype=float)
        if rtts.ndim != 1:
            raise InvalidArgument("rtts must be one-dimensional")
        lost = frozenset(int(i) for i in self.lost)
        if any(i < 0 or i >= len(rtts) for i in lost):
            raise InvalidArgument("lost probe index out of range")
        lost |= frozenset(np.flatnonzero(np.isnan(rtts)).tolist())
        if lost:
            rtts[sorted(lost)] = np.nan
        rtts.setflags(write=False)
        object.__setattr__(self, "rtts", rtts)
        object.__setattr__(self, "lost", lost)
        if not self.probe_period > 0:
            raise InvalidArgument("probe_period must be > 0")

    def __len__(self):
        return len(self.rtts)

    def __eq__(self, other):
        if not isinstance(other, RttTrace):
            return NotImplemented
        return (
            self.probe_period == other.probe_period
            and self.lost == other.lost
            and np.array_equal(self.rtts, other.rtts, equal_nan=True)
        )

    @property
    def present(self) -> np.ndarray:
        return self.rtts[~np.isnan(self.rtts)]

    def send_times(self) -> np.ndarray:
        return self.probe_period * np.arange(len(self.rtts))

    def shifted(self, c: float) -> "RttTrace":
        return RttTrace(self.probe_period, self.rtts + c, self.lost)


def service_time(size, bandwidth) -> float:
    """Milliseconds needed to clock ``size`` bytes onto a ``bandwidth`` bit/s link."""
    if not size > 0 or not bandwidth > 0:
        raise InvalidArgument("size and bandwidth must be > 0")
    return size * 8 * 1000.0 / bandwidth


def as_arrays(traffic) -> tuple[np.ndarray, np.ndarray]:
    """Split a traffic trace into (times, sizes) arrays and validate it."""
    if isinstance(traffic, tuple) and len(traffic) == 2 and isinstance(traffic[0], np.ndarray):
        times, sizes = traffic
        times = np.asarray(times, dtype=float)
        sizes = np.asarray(sizes, dtype=np.int64)
    else:
        traffic = list(traffic)
        times = np.array([p.time for p in traffic], dtype=float)
        sizes = np.array([p.size for p in traffic], dtype=np.int64)
    if len(times) != len(sizes):
        raise InvalidArgument("times and sizes differ in length")
    if len(times):
        if np.any(~(times >= 0)) or np.any(sizes <= 0):
            raise InvalidArgument("packet times must be >= 0 and sizes > 0")
        if np.any(np.diff(times) < 0):
            raise InvalidArgument("traffic must be sorted by time")
    return times, sizes


def queue_clear_times(times: np.ndarray, sizes: np.ndarray, bandwidth: float) -> np.ndarray:
    """Queue-clear time V after each arrival: ``V_k = max(V_{k-1}, t_k) + s_k``.

    Evaluated sequentially: max and rounded addition are both monotone, so
    adding a packet can never lower any V, not even by one ulp.
    """
    service = (sizes * 8 * 1000.0 / bandwidth).tolist()
    steps = accumulate(zip(times.tolist(), service), lambda v, ts: max(v, ts[0]) + ts[1], initial=0.0)
    return np.fromiter(steps, dtype=float, count=len(service) + 1)[1:]


def simulate(traffic, cfg: LinkConfig, lost: Iterable[int] = ()) -> RttTrace:
    """Probe RTTs seen while ``traffic`` crosses the bottleneck described by ``cfg``.

    A probe sent at ``t_i`` sees every victim packet with arrival time <= t_i
    (victim first on ties) and waits ``max(V - t_i, 0)``.
    """
    times, sizes = as_arrays(traffic)
    probe_t = cfg.probe_times()
    if len(times):
        clear = queue_clear_times(times, sizes, cfg.downstream_bandwidth)
        last = np.searchsorted(times, probe_t, side="right") - 1
        v = np.where(last >= 0, clear[np.maximum(last, 0)], 0.0)
        delay = np.maximum(v - probe_t, 0.0)
    else:
        delay = np.zeros(cfg.probe_count)
    rtts = cfg.base_rtt + delay + cfg.noise.sample(cfg.probe_count)
    return RttTrace(cfg.probe_period, rtts, frozenset(lost))


def rtt_span(trace: RttTrace, percentile: float = 0.95) -> float:
    """Nearest-rank ``percentile`` of the present RTTs minus their minimum."""
    if not 0 < percentile <= 1:
        raise InvalidArgument("percentile must lie in (0, 1]")
    values = np.sort(trace.present)
    if len(values) == 0:
        raise InvalidArgument("trace has no present RTTs")
    # round() guards against p*n landing a hair above an integer
    rank = max(1, math.ceil(round(percentile * len(values), 9)))
    return float(values[rank - 1] - values[0])


def total_service(traffic: Sequence[PacketArrival] | tuple, bandwidth: float) -> float:
    _, sizes = as_arrays(traffic)
    return float(np.sum(sizes * 8 * 1000.0 / bandwidth))
