"""Remote traffic analysis through a queueing side channel.

Simulate a FIFO last-mile link carrying a victim's page loads plus an
attacker's probes, recover the victim's traffic pattern from probe RTTs,
and detect target websites with DTW fingerprints and calibrated
thresholds.
"""
__version__ = "0.1.0"

from .bandwidth import estimate_bandwidth, simulate_train
from .deanon import Event, EventLog, Evidence, combine_evidence, session_overlap_fp
from .dtw import DtwConfig, DtwResult, WarpPath, distance_matrix, dtw_distance
from .errors import FormatError, InvalidArgument
from .fingerprint import (
    FP_PRESETS,
    CalibrationReport,
    Fingerprint,
    FnCurve,
    Sample,
    avg_distance,
    clopper_pearson_upper,
    detect,
    estimate_fn,
    estimate_fp,
    fn_curve,
    select_threshold,
)
from .link import LinkConfig, NoiseModel, PacketArrival, RttTrace, rtt_span, service_time, simulate
from .recovery import RecoveredSeries, delay_to_bytes, probe_period_bound, recover
from .traffic import Server, SiteProfile, generate, generate_arrays, perturb
from .io import load_trace
