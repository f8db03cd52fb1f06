"""Packet-train estimation of the downstream bottleneck rate."""
from __future__ import annotations

import numpy as np

from .errors import InvalidArgument
from .link import LinkConfig, service_time

DEFAULT_PROBE_SIZE = 1000


def simulate_train(cfg: LinkConfig, n: int, probe_size: int = DEFAULT_PROBE_SIZE, rng=None) -> np.ndarray:
    """Response times of ``n`` back-to-back sized probes sent at t=0.

    The probes queue behind each other at the bottleneck, so response ``i``
    returns at ``base_rtt + (i + 1) * service_time`` plus path noise.
    """
    if n < 2:
        raise InvalidArgument("a train needs at least two probes")
    st = service_time(probe_size, cfg.downstream_bandwidth)
    return cfg.base_rtt + st * np.arange(1, n + 1) + cfg.noise.sample(n, rng)


def estimate_bandwidth(responses, probe_size: int = DEFAULT_PROBE_SIZE) -> float:
    """Bits per second implied by the median spacing of train responses.

    Reported in whole bits per second; finer digits are timestamp rounding.
    """
    r = np.sort(np.asarray(responses, dtype=float))
    if len(r) < 2:
        raise InvalidArgument("need at least two responses")
    if not probe_size > 0:
        raise InvalidArgument("probe_size must be > 0")
    gaps = np.diff(r)
    if np.any(gaps <= 0):
        raise InvalidArgument("responses must be strictly increasing")
    return float(round(probe_size * 8 * 1000.0 / float(np.median(gaps))))
