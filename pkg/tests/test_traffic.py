import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from remotetraffic.errors import InvalidArgument
from remotetraffic.traffic import WINDOW_CAP, Server, SiteProfile, generate, generate_arrays, perturb


def test_single_packet_at_think_time():
    p = SiteProfile("s", [Server(50.0, [1500])], think_time=7.0)
    out = generate(p, 0)
    assert [(a.time, a.size) for a in out] == [(7.0, 1500)]


def test_hand_unrolled_rounds():
    p = SiteProfile("s", [Server(100.0, [4500])], initial_window=2, window_growth=2, jitter=0.0)
    assert [(a.time, a.size) for a in generate(p, 0)] == [(0.0, 1500), (0.0, 1500), (100.0, 1500)]


def test_rounds_grow_and_cap():
    p = SiteProfile("s", [Server(10.0, [1500 * 300])], initial_window=2, window_growth=2)
    times, _ = generate_arrays(p)
    _, counts = np.unique(times, return_counts=True)
    assert counts.tolist() == [2, 4, 8, 16, 32, 64, 64, 64, 46]
    assert counts.max() == WINDOW_CAP


def test_fractional_growth_floors_round_size():
    p = SiteProfile("s", [Server(10.0, [1500 * 10])], initial_window=2, window_growth=1.5)
    _, counts = np.unique(generate_arrays(p)[0], return_counts=True)
    # w: 2, 3, 4.5, 6.75 -> rounds of 2, 3, 4, then the last 1
    assert counts.tolist() == [2, 3, 4, 1]


def test_servers_merge_sorted():
    p = SiteProfile("s", [Server(30.0, [3000, 800]), Server(7.0, [1500] * 4)], initial_window=1)
    out = generate(p, 1)
    times = [a.time for a in out]
    assert times == sorted(times)
    assert sum(a.size for a in out) == 3000 + 800 + 6000


def test_determinism_and_seed_dependence():
    p = SiteProfile("s", [Server(40.0, [20000, 5000]), Server(80.0, [9000])], jitter=0.3)
    a, b = generate_arrays(p, 5), generate_arrays(p, 5)
    assert a[0].tobytes() == b[0].tobytes() and a[1].tobytes() == b[1].tobytes()
    assert not np.array_equal(generate_arrays(p, 6)[0], a[0])


def test_jitter_bounds_gaps():
    p = SiteProfile("s", [Server(40.0, [1500 * 200])], initial_window=1, jitter=0.25)
    t = np.unique(generate_arrays(p, 3)[0])
    gaps = np.diff(t)
    assert np.all(gaps >= 30.0 - 1e-9) and np.all(gaps <= 50.0 + 1e-9)


profiles = st.builds(
    SiteProfile,
    st.just("p"),
    st.lists(
        st.builds(Server, st.floats(1, 200), st.lists(st.integers(1, 40000), min_size=1, max_size=5)),
        min_size=1,
        max_size=4,
    ),
    st.integers(1, 10),
    st.floats(1, 3),
    st.sampled_from([500, 1460, 1500]),
    st.floats(0, 0.9),
    st.floats(0, 100),
)


@settings(max_examples=100, deadline=None)
@given(profiles, st.integers(0, 2**32))
def test_conservation_and_sortedness(p, seed):
    times, sizes = generate_arrays(p, seed)
    assert int(sizes.sum()) == p.total_bytes
    assert len(sizes) == p.packet_count == sum(math.ceil(x / p.mtu) for s in p.servers for x in s.objects)
    assert np.all(np.diff(times) >= 0)
    assert np.all(sizes <= p.mtu) and np.all(sizes > 0)
    assert times.min() >= p.think_time


def test_profile_validation():
    with pytest.raises(InvalidArgument):
        Server(0.0, [100])
    with pytest.raises(InvalidArgument):
        Server(10.0, [0])
    with pytest.raises(InvalidArgument):
        SiteProfile("s", [], initial_window=0)
    with pytest.raises(InvalidArgument):
        SiteProfile("s", [], window_growth=0.5)
    with pytest.raises(InvalidArgument):
        SiteProfile("s", [], jitter=1.0)
    with pytest.raises(InvalidArgument):
        SiteProfile("s", [], think_time=-1)


def test_perturb():
    p = SiteProfile("news", [Server(40.0, [1000, 3001])], jitter=0.1)
    same = perturb(p, 0)
    assert same.servers == p.servers and same.site_id != p.site_id
    double = perturb(p, 1)
    assert double.servers[0].rtt == 80.0
    assert double.servers[0].objects == (2000, 6002)
    assert double.jitter == p.jitter
    assert perturb(p, 2).servers[0].objects == (3000, 9003)
    with pytest.raises(InvalidArgument):
        perturb(p, -0.5)
