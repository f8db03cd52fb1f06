"""Synthetic page-load traffic.

Each server pushes its objects as MTU-sized packets in slow-start-like
rounds: a round of ``w`` packets arrives at once, the next one an RTT
later, and ``w`` grows geometrically up to a cap. The streams of all
servers are merged into one downstream arrival trace.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidArgument
from .link import PacketArrival

WINDOW_CAP = 64


@dataclass(frozen=True)
class Server:
    rtt: float
    objects: tuple

    def __post_init__(self):
        objects = tuple(int(x) for x in self.objects)
        if not self.rtt > 0:
            raise InvalidArgument("server rtt must be > 0")
        if any(x <= 0 for x in objects):
            raise InvalidArgument("object sizes must be > 0")
        object.__setattr__(self, "objects", objects)


@dataclass(frozen=True)
class SiteProfile:
    site_id: str
    servers: tuple = field(default_factory=tuple)
    initial_window: int = 2
    window_growth: float = 2.0
    mtu: int = 1500
    jitter: float = 0.0
    think_time: float = 0.0

    def __post_init__(self):
        servers = tuple(s if isinstance(s, Server) else Server(**s) for s in self.servers)
        object.__setattr__(self, "servers", servers)
        if self.initial_window < 1:
            raise InvalidArgument("initial_window must be >= 1")
        if not self.window_growth >= 1:
            raise InvalidArgument("window_growth must be >= 1")
        if not self.mtu > 0:
            raise InvalidArgument("mtu must be > 0")
        if not 0 <= self.jitter < 1:
            raise InvalidArgument("jitter must lie in [0, 1)")
        if not self.think_time >= 0:
            raise InvalidArgument("think_time must be >= 0")

    @property
    def total_bytes(self) -> int:
        return sum(sum(s.objects) for s in self.servers)

    @property
    def packet_count(self) -> int:
        return sum(math.ceil(x / self.mtu) for s in self.servers for x in s.objects)


def _packets(objects, mtu):
    for size in objects:
        full, rest = divmod(size, mtu)
        yield from [mtu] * full
        if rest:
            yield rest


def generate_arrays(profile: SiteProfile, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Like :func:`generate` but returns ``(times, sizes)`` arrays."""
    rng = np.random.default_rng(seed)
    times, sizes = [], []
    for server in profile.servers:
        pkts = list(_packets(server.objects, profile.mtu))
        t = profile.think_time
        w = float(profile.initial_window)
        k = 0
        while k < len(pkts):
            n = min(WINDOW_CAP, int(w))
            batch = pkts[k : k + n]
            times.extend([t] * len(batch))
            sizes.extend(batch)
            k += n
            w = min(w * profile.window_growth, WINDOW_CAP)
            if k < len(pkts):
                t += server.rtt * (1 + profile.jitter * rng.uniform(-1.0, 1.0))
    times = np.asarray(times, dtype=float)
    sizes = np.asarray(sizes, dtype=np.int64)
    order = np.argsort(times, kind="stable")
    return times[order], sizes[order]


def generate(profile: SiteProfile, seed: int = 0) -> list[PacketArrival]:
    """Downstream packet arrivals for one page load, sorted by time."""
    times, sizes = generate_arrays(profile, seed)
    return [PacketArrival(float(t), int(s)) for t, s in zip(times, sizes)]


def perturb(profile: SiteProfile, separation: float) -> SiteProfile:
    """Scale object sizes and server RTTs by ``1 + separation`` under a new site id."""
    if not separation >= 0:
        raise InvalidArgument("separation must be >= 0")
    k = 1.0 + separation
    servers = tuple(
        Server(s.rtt * k, tuple(max(1, round(x * k)) for x in s.objects)) for s in profile.servers
    )
    return replace(profile, site_id=f"{profile.site_id}~{separation:g}", servers=servers)
