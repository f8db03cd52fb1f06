"""
From detections to an identity
==============================

A pseudonymous forum member posts in the evening. Each time a post appears,
the attacker checks whether the suspect's line was loading the forum. One
hit is weak evidence on its own; several agree or disagree.

Events are treated as independent, which real browsing need not be.
"""

# %%
from datetime import datetime, timedelta

from remotetraffic import EventLog, combine_evidence, session_overlap_fp

# An innocent user who spends 10 minutes on the forum somewhere in a
# three-hour evening overlaps a given post instant with this probability.
page_confusion = session_overlap_fp(10, 180)
print(f"chance overlap: {page_confusion:.4f}")

fp, fn = 0.005, 0.17
start = datetime(2024, 3, 1, 19, 0)
for outcome in ([True], [True, True], [True, False, True], [False, False, False]):
    log = EventLog.from_pairs([(start + timedelta(days=k), hit) for k, hit in enumerate(outcome)])
    for label, rate in (("detector only", fp), ("with page confusion", fp + page_confusion)):
        ev = combine_evidence(log, rate, fn, prior=0.01)
        print(f"{str(outcome):<22} {label:<20} posterior {ev.posterior:.4f}")
