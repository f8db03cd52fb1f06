"""
Choosing the probe period
=========================

Before probing, the attacker measures the victim's downstream rate with a
packet train: back-to-back 1000 byte probes leave the bottleneck one
service time apart, so the response spacing gives the rate.
"""

# %%
import numpy as np

from remotetraffic import LinkConfig, NoiseModel, estimate_bandwidth, probe_period_bound, simulate_train
from remotetraffic.link import service_time

rng = np.random.default_rng(3)
for mbps in (1, 3, 6, 24):
    bw = mbps * 1e6
    noise = NoiseModel("truncated-gaussian", 0.1 * service_time(1000, bw))
    responses = simulate_train(LinkConfig(bw, 40.0, noise=noise), 32, rng=rng)
    est = estimate_bandwidth(responses)
    # probing faster than one MTU service time catches every full-size packet
    print(f"{mbps:>3} Mbps line: estimate {est / 1e6:6.3f} Mbps, "
          f"probe period <= {probe_period_bound(1500, est):.2f} ms")
