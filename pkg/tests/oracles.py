"""Slow, obviously-correct reference implementations used as test oracles.

Nothing here imports the package's own algorithms.
"""
import math
from collections import deque

import numpy as np


def fifo_event_sim(times, sizes, bandwidth, probe_times):
    """Step a FIFO queue event by event.

    Returns (probe waiting times, per-packet service start, per-packet finish).
    Victim packets arriving at the same instant as a probe are enqueued first.
    """
    service = [s * 8 * 1000.0 / bandwidth for s in sizes]
    events = [(t, 0, k) for k, t in enumerate(times)] + [(t, 1, k) for k, t in enumerate(probe_times)]
    events.sort()
    queue = deque()  # [packet index, remaining service]
    now = 0.0
    start = [math.nan] * len(times)
    finish = [math.nan] * len(times)
    waits = [0.0] * len(probe_times)

    def advance(to):
        nonlocal now
        while queue and now < to:
            k, rem = queue[0]
            if math.isnan(start[k]):
                start[k] = now
            if now + rem <= to:
                now += rem
                finish[k] = now
                queue.popleft()
            else:
                queue[0][1] = rem - (to - now)
                now = to
        now = max(now, to)

    for t, kind, k in events:
        advance(t)
        if kind == 0:
            queue.append([k, service[k]])
        else:
            waits[k] = sum(rem for _, rem in queue)
    advance(math.inf)
    return np.array(waits), np.array(start), np.array(finish)


def observed_service(times, start, finish, probe_times):
    """Per probe interval: service time of that interval's arrivals still pending at its probe.

    A packet belongs to the first probe sent at or after its arrival.
    """
    probe_times = np.asarray(probe_times)
    out = np.zeros(len(probe_times))
    for t, s, f in zip(times, start, finish):
        j = int(np.searchsorted(probe_times, t, side="left"))
        if j >= len(probe_times):
            continue
        out[j] += max(0.0, f - max(s, probe_times[j]))
    return out


def warp_paths(n_a, n_b):
    """Every admissible warp path as a list of (i, j, step) with step 0=diag,1=horiz,2=vert."""
    out = []

    def rec(i, j, acc):
        if (i, j) == (n_a - 1, n_b - 1):
            out.append(list(acc))
            return
        for di, dj, step in ((1, 1, 0), (0, 1, 1), (1, 0, 2)):
            if i + di < n_a and j + dj < n_b:
                acc.append((i + di, j + dj, step))
                rec(i + di, j + dj, acc)
                acc.pop()

    rec(0, 0, [(0, 0, 0)])
    return out


def brute_dtw(a, b, weights=(1.0, 1.0, 1.0), normalize=True, window=None):
    best = math.inf
    for path in warp_paths(len(a), len(b)):
        if window is not None and any(abs(i - j) > window for i, j, _ in path):
            continue
        cost = 0.0
        wsum = 0.0
        for i, j, step in path:
            cost += weights[step] * abs(a[i] - b[j])
            wsum += weights[step]
        best = min(best, cost / wsum if normalize else cost)
    return best


def binom_cdf(k, n, p):
    return math.fsum(math.comb(n, i) * p**i * (1 - p) ** (n - i) for i in range(k + 1))


def cp_upper_by_bisection(k, n, confidence):
    """One-sided upper bound: the p at which P(X <= k) falls to 1 - confidence."""
    if k == n:
        return 1.0
    lo, hi = 0.0, 1.0
    for _ in range(200):
        mid = (lo + hi) / 2
        if binom_cdf(k, n, mid) > 1 - confidence:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2
