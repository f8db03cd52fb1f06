"""Traffic pattern recovery from probe RTTs.

Each probe's excess delay over the minimum RTT tells when it left the
bottleneck queue. The queue-clear time reached in one probe interval,
minus the later of the previous probe's departure and this probe's send
time, is the service time of the victim bytes that arrived in between.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import minimum_filter1d

from .errors import InvalidArgument
from .link import RttTrace, service_time

DEFAULT_ETA = 1.0
UNITS = ("milliseconds", "bytes")


@dataclass(frozen=True, eq=False)
class RecoveredSeries:
    probe_period: float
    values: np.ndarray
    units: str = "milliseconds"
    eta: float | None = None

    def __post_init__(self):
        if self.units not in UNITS:
            raise InvalidArgument(f"units must be one of {UNITS}")
        values = np.array(self.values, dtype=float)
        if values.ndim != 1:
            raise InvalidArgument("values must be one-dimensional")
        if np.any(~(values >= 0)):
            raise InvalidArgument("recovered values must be finite and >= 0")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return len(self.values)

    def __eq__(self, other):
        if not isinstance(other, RecoveredSeries):
            return NotImplemented
        return (
            self.probe_period == other.probe_period
            and self.units == other.units
            and self.eta == other.eta
            and np.array_equal(self.values, other.values)
        )


def _baseline(rtts: np.ndarray, window: int | None) -> np.ndarray | float:
    if window is None:
        return np.nanmin(rtts)
    if window < 1:
        raise InvalidArgument("min_window must be >= 1")
    filled = np.where(np.isnan(rtts), np.inf, rtts)
    return minimum_filter1d(filled, size=window, mode="nearest")


def recover(trace: RttTrace, eta: float = DEFAULT_ETA, min_window: int | None = None) -> RecoveredSeries:
    """Per-probe-interval queueing time of victim arrivals, in milliseconds.

    ``min_window`` replaces the global RTT minimum with a centred sliding
    minimum over that many probes, for long traces whose route drifts.
    Lost probes record 0 and hand on ``max(t'_{i-1}, t_i)`` as their
    departure time.
    """
    if not eta >= 0:
        raise InvalidArgument("eta must be >= 0")
    rtts = trace.rtts
    present = ~np.isnan(rtts)
    if not present.any():
        raise InvalidArgument("every probe in the trace was lost")

    send = trace.send_times()
    depart = rtts - _baseline(rtts, min_window) + send
    # a lost probe's departure: last known departure (or 0) pushed up to t_i
    idx = np.where(present, np.arange(len(rtts)), -1)
    np.maximum.accumulate(idx, out=idx)
    carried = np.where(idx >= 0, depart[np.maximum(idx, 0)], 0.0)
    depart = np.where(present, depart, np.maximum(carried, send))

    prev = np.concatenate(([0.0], depart[:-1]))
    s = depart - np.maximum(prev, send)
    s[~present] = 0.0
    s = np.maximum(s, 0.0)
    s[s < eta] = 0.0
    return RecoveredSeries(trace.probe_period, s, "milliseconds", eta)


def delay_to_bytes(series: RecoveredSeries, bandwidth: float) -> RecoveredSeries:
    if series.units != "milliseconds":
        raise InvalidArgument("series is already in bytes")
    if not bandwidth > 0:
        raise InvalidArgument("bandwidth must be > 0")
    return RecoveredSeries(series.probe_period, series.values * bandwidth / 8000.0, "bytes", series.eta)


def probe_period_bound(mtu, bandwidth) -> float:
    """Longest probe period that still catches every MTU-sized packet in the queue."""
    return service_time(mtu, bandwidth)
