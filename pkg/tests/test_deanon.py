import math
from datetime import datetime, timedelta

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from remotetraffic.deanon import Event, EventLog, combine_evidence, session_overlap_fp
from remotetraffic.errors import InvalidArgument

T0 = datetime(2024, 3, 1, 19, 0)


def log_of(flags):
    return EventLog.from_pairs([(T0 + timedelta(minutes=7 * k), d) for k, d in enumerate(flags)])


def test_session_overlap_examples():
    assert session_overlap_fp(10, 180) == pytest.approx(0.0556, abs=1e-4)
    assert session_overlap_fp(10, 180) <= 0.06
    assert session_overlap_fp(180, 180) == 1.0
    for bad in ((0, 180), (200, 180), (-1, 10)):
        with pytest.raises(InvalidArgument):
            session_overlap_fp(*bad)


def test_single_hit_example():
    ev = combine_evidence(log_of([True]), 0.005, 0.17, 0.5)
    assert math.exp(ev.log_lr) == pytest.approx(166.0, abs=1e-9)
    assert ev.posterior == pytest.approx(166 / 167, rel=1e-12)


def test_single_miss():
    ev = combine_evidence(log_of([False]), 0.005, 0.17, 0.5)
    assert math.exp(ev.log_lr) == pytest.approx(0.17 / 0.995, rel=1e-12)


@pytest.mark.parametrize("flags", [[True], [False, True, False], [True] * 5])
def test_uninformative_test_leaves_prior(flags):
    ev = combine_evidence(log_of(flags), 0.3, 0.7, 0.2)
    assert ev.posterior == pytest.approx(0.2, abs=1e-12)
    assert ev.log_lr == pytest.approx(0.0, abs=1e-12)


def test_misses_lower_posterior_monotonically():
    post = [combine_evidence(log_of([False] * k), 0.01, 0.05, 0.3).posterior for k in range(1, 8)]
    assert all(p < 0.3 for p in post)
    assert all(b < a for a, b in zip(post, post[1:]))
    closed = [0.3 * 0.05**k / (0.3 * 0.05**k + 0.7 * 0.99**k) for k in range(1, 8)]
    assert post == pytest.approx(closed, rel=1e-9)


def test_extreme_evidence_stays_finite():
    ev = combine_evidence(log_of([True] * 400), 0.001, 0.01, 0.5)
    assert ev.posterior == 1.0
    ev = combine_evidence(log_of([False] * 400), 0.001, 0.01, 0.5)
    assert 0.0 <= ev.posterior < 1e-100


rates = st.floats(0.001, 0.45)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 6), st.integers(0, 6), rates, rates, st.floats(0.01, 0.99))
def test_monotone_in_hits_and_misses(h, m, fp, fn, prior):
    if h + m == 0:
        return

    def post(hh, mm):
        return combine_evidence(log_of([True] * hh + [False] * mm), fp, fn, prior).posterior

    assert post(h + 1, m) >= post(h, m)
    assert post(h, m + 1) <= post(h, m)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.booleans(), min_size=1, max_size=12), st.randoms(use_true_random=False), rates, rates)
def test_order_invariance(flags, rnd, fp, fn):
    shuffled = list(flags)
    rnd.shuffle(shuffled)
    a = combine_evidence(log_of(flags), fp, fn, 0.1)
    b = combine_evidence(log_of(shuffled), fp, fn, 0.1)
    assert a.posterior == pytest.approx(b.posterior, rel=1e-12, abs=1e-300)


def test_validation():
    with pytest.raises(InvalidArgument):
        EventLog([Event(T0, True), Event(T0, False)])
    with pytest.raises(InvalidArgument):
        combine_evidence(EventLog(()), 0.1, 0.1, 0.5)
    for fp, fn, prior in ((0, 0.1, 0.5), (0.1, 1, 0.5), (0.1, 0.1, 1.0)):
        with pytest.raises(InvalidArgument):
            combine_evidence(log_of([True]), fp, fn, prior)


def test_counts():
    log = log_of([True, False, True])
    assert (log.hits, log.misses) == (2, 1)
