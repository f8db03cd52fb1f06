"""
Telling pages apart with dynamic time warping
=============================================

Each page load gives a recovered series. Loads of the same page differ in
timing jitter, so series are compared with DTW, which lets one series
stretch against the other. A site is detected when a trace's mean DTW
distance to its training samples falls below a calibrated threshold.
"""

# %%
import numpy as np

from remotetraffic import (
    LinkConfig,
    NoiseModel,
    Sample,
    Server,
    SiteProfile,
    distance_matrix,
    fn_curve,
    generate_arrays,
    perturb,
    recover,
    simulate,
)

base = SiteProfile("shop", (Server(20.0, (9000, 3000)), Server(35.0, (6000,))), jitter=0.1)
sites = [base, perturb(base, 0.5), perturb(base, 2.0),
         SiteProfile("blog", (Server(50.0, (40000,)),), initial_window=4, jitter=0.1)]


def load(profile, k, site_no):
    times, sizes = generate_arrays(profile, seed=1000 * site_no + k)
    link = LinkConfig(3e6, 40.0, 1500, 2.0, 250, NoiseModel("truncated-gaussian", 0.5, seed=10_000 * site_no + k))
    return recover(simulate((times, sizes), link))


# %%
# 64 loads per site, so each site is calibrated against 192 loads of others.
corpus = [Sample(p.site_id, k, load(p, k, i)) for i, p in enumerate(sites) for k in range(64)]
d = distance_matrix([s.series for s in corpus], jobs=4)

ids = np.array([s.site_id for s in corpus])
print("mean DTW distance between sites")
names = [p.site_id for p in sites]
print("        " + "".join(f"{n:>10}" for n in names))
for a in names:
    row = [d[np.ix_(ids == a, ids == b)].mean() for b in names]
    print(f"{a:>8}" + "".join(f"{x:10.3f}" for x in row))

# %%
# Calibrate every site at the three preset false-positive targets. Even a
# clean zero count over 192 samples only bounds the false-positive rate at
# 1.5% with 95% confidence, so the 0.5% and 1% targets cannot be certified:
# those calibrations come back degenerate, with threshold 0 and nothing
# detected. Certifying 0.5% takes about 600 other-site samples.
for target in (0.005, 0.01, 0.05):
    curve = fn_curve(corpus, names, target, distances=d)
    rates = ", ".join(f"{r.site_id} {r.fn_estimate:.2f}" for r in curve.reports)
    flag = " (degenerate)" if all(r.degenerate for r in curve.reports) else ""
    print(f"target FP {target:>5}: false-negative rates {rates}{flag}")

# %%
# At 5% the 50% perturbation is the only site that loses any of its own
# loads: it sits closest to the original page.
