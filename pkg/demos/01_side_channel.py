"""
Reading a neighbour's traffic from ping times
=============================================

A victim loads a web page over a 3 Mbps DSL line. The attacker pings the
victim's router every 2 ms. The pings share the downstream queue with the
page's packets, so every burst of page data shows up as extra delay.
"""

# %%
# A page with two servers: a nearby CDN and a slower origin.
import numpy as np

from remotetraffic import LinkConfig, NoiseModel, Server, SiteProfile, generate_arrays, recover, simulate
from remotetraffic.link import total_service

page = SiteProfile("news", (Server(18.0, (24000, 6000)), Server(70.0, (15000, 3000))), jitter=0.05)
times, sizes = generate_arrays(page, seed=1)
print(f"{len(sizes)} packets, {sizes.sum()} bytes, last arrival at {times.max():.1f} ms")

# %%
# Probe at the 2 ms cadence. A 1500 byte packet takes 4 ms to drain at
# 3 Mbps, so a 2 ms period sees every full-sized packet in the queue.
link = LinkConfig(3e6, base_rtt=40.0, probe_period=2.0, probe_count=200,
                  noise=NoiseModel("truncated-gaussian", 0.5, seed=7))
trace = simulate((times, sizes), link)
print(f"RTT range {np.nanmin(trace.rtts):.2f} .. {np.nanmax(trace.rtts):.2f} ms")

# %%
# Recovery turns RTTs into the queueing time of the bytes that arrived in
# each 2 ms interval. Anything under the 1 ms floor is treated as jitter.
series = recover(trace, eta=1.0)
busy = np.flatnonzero(series.values)
print(f"{len(busy)} of {len(series)} intervals carry traffic")
for i in busy[:12]:
    bar = "#" * int(round(series.values[i]))
    print(f"  t={2 * i:4d} ms  {series.values[i]:6.2f} ms  {bar}")

# %%
# The recovered total falls short of the true service time by the work the
# link finished before the next probe saw it: at most one period per burst.
true_ms = total_service((times, sizes), 3e6)
print(f"true service {true_ms:.1f} ms, recovered {series.values.sum():.1f} ms, "
      f"{len(np.unique(times))} bursts")
