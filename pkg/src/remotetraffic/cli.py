"""Command-line front end: ``remotetraffic <subcommand> [flags]``.

Exit status: 0 success, 2 invalid input (bad flags, values or file
contents), 3 I/O failure.

Seeds: one root ``--seed`` feeds every stochastic step. The seed for stream
``s`` of sample ``k`` of site number ``i`` (manifest order) is the first
word of ``numpy.random.SeedSequence([root, s, i, k]).generate_state(1)``,
with ``s = 0`` for traffic generation and ``s = 1`` for link noise.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import __version__
from . import io as fio
from .bandwidth import DEFAULT_PROBE_SIZE, estimate_bandwidth, simulate_train
from .deanon import combine_evidence, session_overlap_fp
from .dtw import DtwConfig, distance_matrix
from .errors import FormatError, InvalidArgument
from .fingerprint import FP_PRESETS, Fingerprint, avg_distance, check_corpus, fn_curve
from .link import LinkConfig, NoiseModel, simulate
from .recovery import DEFAULT_ETA, delay_to_bytes, probe_period_bound, recover
from .traffic import generate

STREAM_TRAFFIC, STREAM_NOISE = 0, 1
EXIT_OK, EXIT_INVALID, EXIT_IO = 0, 2, 3

# flags that never change results; kept out of provenance so reruns compare equal
_UNRECORDED = {"out", "out_dir", "jobs", "func", "command"}


def child_seed(root: int, stream: int, site: int = 0, sample: int = 0) -> int:
    return int(np.random.SeedSequence([root, stream, site, sample]).generate_state(1)[0])


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _provenance(args) -> list[str]:
    flags = {k: v for k, v in sorted(vars(args).items()) if k not in _UNRECORDED and k != "seed"}
    return [
        f"remotetraffic {__version__} {args.command}",
        "flags: " + json.dumps(flags, sort_keys=True, default=str),
        f"seed: {args.seed}",
    ]


def _link_flags(p):
    g = p.add_argument_group("link (override --config)")
    g.add_argument("--config", type=Path, help="INI file with a [link] section")
    g.add_argument("--downstream-bandwidth", type=float, help="bits per second")
    g.add_argument("--base-rtt", type=float, help="ms")
    g.add_argument("--mtu", type=int, help="bytes")
    g.add_argument("--probe-period", type=float, help="ms between probes")
    g.add_argument("--probe-count", type=int)
    g.add_argument("--noise-kind", choices=["none", "uniform", "truncated-gaussian"])
    g.add_argument("--noise-magnitude", type=float, help="ms, upper bound of a noise sample")
    g.add_argument("--noise-seed", type=int)


def _link_config(args) -> LinkConfig:
    fields = fio.link_config_fields(args.config) if args.config else {}
    for key in ("downstream_bandwidth", "base_rtt", "mtu", "probe_period", "probe_count",
                "noise_kind", "noise_magnitude", "noise_seed"):
        value = getattr(args, key, None)
        if value is not None:
            fields[key] = value
    return fio.link_config_from_fields(fields)


def _dtw_flags(p):
    g = p.add_argument_group("DTW")
    g.add_argument("--weights", type=float, nargs=3, default=(1.0, 1.0, 1.0),
                   metavar=("DIAG", "HORIZ", "VERT"))
    g.add_argument("--window", type=int, help="Sakoe-Chiba band half-width")
    g.add_argument("--no-normalize", action="store_true")
    g.add_argument("--trim", action="store_true", help="strip leading/trailing zeros")


def _dtw_config(args) -> DtwConfig:
    return DtwConfig(tuple(args.weights), args.window, not args.no_normalize, args.trim)


def _write_json(path, obj):
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


# -- subcommands ------------------------------------------------------------

def cmd_gen(args):
    profile = fio.read_site_profile(args.profile)
    traffic = generate(profile, child_seed(args.seed, STREAM_TRAFFIC))
    fio.write_trace(args.out, traffic, _provenance(args))


def cmd_simulate(args):
    cfg = _link_config(args)
    if args.noise_seed is None and not (args.config and "noise_seed" in fio.link_config_fields(args.config)):
        cfg = replace(cfg, noise=replace(cfg.noise, seed=child_seed(args.seed, STREAM_NOISE)))
    traffic = fio.load_trace(args.traffic)
    trace = simulate(traffic, cfg, lost=args.lost or ())
    fio.write_rtt_trace(args.out, trace, _provenance(args))


def cmd_recover(args):
    trace = fio.read_rtt_trace(args.rtt)
    series = recover(trace, args.eta, args.min_window)
    if args.bytes is not None:
        series = delay_to_bytes(series, args.bytes)
    fio.write_series(args.out, series, _provenance(args))


def _load_samples(args):
    if args.manifest:
        return fio.read_manifest(args.manifest)
    from .fingerprint import Sample

    return [Sample(Path(p).stem, 0, fio.read_series(p)) for p in args.series]


def cmd_dtw(args):
    samples = _load_samples(args)
    if not samples:
        raise InvalidArgument("no samples given")
    m = distance_matrix([s.series for s in samples], _dtw_config(args), jobs=args.jobs)
    ids = [f"{s.site_id}#{s.sample_index}" for s in samples]
    fio.write_distance_matrix(args.out, ids, m, _provenance(args))


def _corpus_distances(args, corpus):
    if getattr(args, "distances", None):
        ids, m = fio.read_distance_matrix(args.distances)
        if ids != [f"{s.site_id}#{s.sample_index}" for s in corpus]:
            raise InvalidArgument("distance matrix does not match the manifest order")
        return m
    return distance_matrix([s.series for s in corpus], _dtw_config(args), jobs=args.jobs)


def _targets(args, corpus):
    return args.site or list(dict.fromkeys(s.site_id for s in corpus))


def cmd_calibrate(args):
    corpus = fio.read_manifest(args.manifest)
    check_corpus(corpus)
    m = _corpus_distances(args, corpus)
    curve = fn_curve(corpus, _targets(args, corpus), args.target_fp, _dtw_config(args),
                     args.confidence, distances=m)
    fio.write_calibration(args.out, curve.reports, _provenance(args))


def cmd_curve(args):
    corpus = fio.read_manifest(args.manifest)
    check_corpus(corpus)
    m = _corpus_distances(args, corpus)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for fp in args.target_fp or FP_PRESETS:
        curve = fn_curve(corpus, _targets(args, corpus), fp, _dtw_config(args), args.confidence, distances=m)
        fio.write_calibration(out / f"calibration_fp{fp:g}.csv", curve.reports, _provenance(args))
        fio.write_curve(out / f"curve_fp{fp:g}.csv", curve.cumulative, _provenance(args))


def cmd_detect(args):
    corpus = fio.read_manifest(args.manifest)
    f = Fingerprint(args.site, tuple(s for s in corpus if s.site_id == args.site))
    threshold = args.threshold
    if threshold is None:
        if args.calibration is None:
            raise InvalidArgument("give --threshold or --calibration")
        table = fio.read_calibration(args.calibration)
        if args.site not in table:
            raise InvalidArgument(f"site {args.site!r} not in calibration file")
        threshold = table[args.site]["threshold"]
    f = f.with_threshold(threshold)
    cfg = _dtw_config(args)
    rows = []
    for path in args.series:
        score = avg_distance(fio.read_series(path), f, cfg)
        rows.append({"series": str(path), "avg_distance": score, "threshold": threshold,
                     "detected": bool(score < threshold)})
    _write_json(args.out, {"site_id": args.site, "results": rows})


def cmd_bwest(args):
    cfg = _link_config(args)
    if args.responses:
        with open(args.responses) as fh:
            values = [float(x) for line in fh if line.strip() and not line.startswith("#")
                      for x in line.replace(",", " ").split()]
    else:
        if args.noise_seed is None:
            cfg = replace(cfg, noise=replace(cfg.noise, seed=child_seed(args.seed, STREAM_NOISE)))
        values = simulate_train(cfg, args.n, args.probe_size)
    bw = estimate_bandwidth(values, args.probe_size)
    _write_json(args.out, {
        "estimated_bandwidth_bps": bw,
        "recommended_probe_period_ms": probe_period_bound(cfg.mtu, bw),
        "mtu": cfg.mtu,
        "probe_size": args.probe_size,
        "responses": len(values),
    })


def cmd_deanon(args):
    result = {}
    if args.session is not None:
        result["session_overlap_fp"] = session_overlap_fp(args.session, args.window)
    if args.events:
        log = fio.read_event_log(args.events)
        ev = combine_evidence(log, args.fp, args.fn, args.prior)
        result.update(posterior=ev.posterior, log_lr=ev.log_lr, hits=log.hits, misses=log.misses)
    if not result:
        raise InvalidArgument("give --events and/or --session")
    _write_json(args.out, result)


def _read_profile_manifest(path):
    out = []
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(ln for ln in fh if ln.strip() and not ln.startswith("#"))]
    if not rows or [c.strip() for c in rows[0]] != ["profile_file"]:
        raise FormatError("expected header profile_file", 1, path)
    for row in rows[1:]:
        out.append(fio.read_site_profile(Path(path).parent / row[0].strip()))
    return out


def cmd_e2e(args):
    t0 = time.perf_counter()
    profiles = _read_profile_manifest(args.profiles)
    ids = [p.site_id for p in profiles]
    if len(set(ids)) != len(ids):
        raise InvalidArgument("profile site ids must be unique")
    cfg = _link_config(args)
    dcfg = _dtw_config(args)
    out = Path(args.out_dir)
    for sub in ("traces", "rtt", "series"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    prov = _provenance(args)
    timing = {}

    def run_site(i):
        start = time.perf_counter()
        p = profiles[i]
        entries = []
        for k in range(args.samples):
            traffic = generate(p, child_seed(args.seed, STREAM_TRAFFIC, i, k))
            noise = replace(cfg.noise, seed=child_seed(args.seed, STREAM_NOISE, i, k))
            trace = simulate(traffic, replace(cfg, noise=noise))
            series = recover(trace, args.eta)
            name = f"{p.site_id}_{k:03d}.csv"
            fio.write_trace(out / "traces" / name, traffic, prov)
            fio.write_rtt_trace(out / "rtt" / name, trace, prov)
            fio.write_series(out / "series" / name, series, prov)
            entries.append((p.site_id, k, f"series/{name}"))
        timing[p.site_id] = time.perf_counter() - start
        return entries

    with ThreadPoolExecutor(max(1, args.jobs)) as pool:
        entries = [e for site in pool.map(run_site, range(len(profiles))) for e in site]
    fio.write_manifest(out / "manifest.csv", entries, prov)
    corpus = fio.read_manifest(out / "manifest.csv")
    start = time.perf_counter()
    m = distance_matrix([s.series for s in corpus], dcfg, jobs=args.jobs)
    timing["distance_matrix"] = time.perf_counter() - start
    fio.write_distance_matrix(out / "distances.csv", [f"{s.site_id}#{s.sample_index}" for s in corpus], m, prov)

    summary = {
        "provenance": {"tool": "remotetraffic", "version": __version__, "seed": args.seed,
                       "flags": json.loads(prov[1][len("flags: "):])},
        "link": {**{k: v for k, v in asdict(cfg).items() if k != "noise"},
                 "noise": {"kind": cfg.noise.kind, "magnitude": cfg.noise.magnitude}},
        "eta": args.eta,
        "samples_per_site": args.samples,
        "confidence": args.confidence,
        "sites": {p.site_id: {"calibrations": []} for p in profiles},
        "curves": {},
    }
    for fp in args.target_fp or FP_PRESETS:
        curve = fn_curve(corpus, ids, fp, dcfg, args.confidence, distances=m)
        fio.write_calibration(out / f"calibration_fp{fp:g}.csv", curve.reports, prov)
        fio.write_curve(out / f"curve_fp{fp:g}.csv", curve.cumulative, prov)
        for r in curve.reports:
            summary["sites"][r.site_id]["calibrations"].append({
                "target_fp": fp, "threshold": r.threshold, "fp_hat": r.fp_point_estimate,
                "fp_ci_upper": r.fp_ci_upper, "fn_hat": r.fn_estimate, "degenerate": r.degenerate,
            })
        summary["curves"][f"{fp:g}"] = [[e, c] for e, c in curve.cumulative]
    _write_json(out / "summary.json", summary)
    timing["total"] = time.perf_counter() - t0
    # wall-clock numbers live apart from the summary so the summary stays reproducible
    _write_json(out / "timing.json", {k: round(v, 6) for k, v in timing.items()})


# -- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="root seed for all stochastic steps")
    common.add_argument("--jobs", type=int, default=1, help="worker threads for per-site / per-pair work")

    parser = _Parser(prog="remotetraffic", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"remotetraffic {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen", parents=[common], help="synthesize a page-load traffic trace")
    p.add_argument("--profile", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("simulate", parents=[common], help="probe RTTs through the FIFO link")
    _link_flags(p)
    p.add_argument("--traffic", type=Path, required=True)
    p.add_argument("--lost", type=int, nargs="*", help="probe indices to drop")
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("recover", parents=[common], help="recover the traffic pattern from RTTs")
    p.add_argument("--rtt", type=Path, required=True)
    p.add_argument("--eta", type=float, default=DEFAULT_ETA, help="noise floor in ms")
    p.add_argument("--min-window", type=int, help="sliding RTT-minimum window in probes")
    p.add_argument("--bytes", type=float, metavar="BANDWIDTH", help="convert to bytes at this bit rate")
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_recover)

    p = sub.add_parser("dtw", parents=[common], help="pairwise DTW distance matrix")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--manifest", type=Path)
    src.add_argument("--series", type=Path, nargs="+")
    _dtw_flags(p)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_dtw)

    for name, func, helptext in (("calibrate", cmd_calibrate, "per-site detection thresholds"),
                                 ("curve", cmd_curve, "cumulative false-negative curves")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("--manifest", type=Path, required=True)
        p.add_argument("--distances", type=Path, help="reuse a matrix written by `dtw`")
        p.add_argument("--site", action="append", help="target site (repeatable; default all)")
        p.add_argument("--confidence", type=float, default=0.95)
        _dtw_flags(p)
        if name == "calibrate":
            p.add_argument("--target-fp", type=float, default=0.05)
            p.add_argument("--out", type=Path, required=True)
        else:
            p.add_argument("--target-fp", type=float, action="append",
                           help="repeatable; default 0.005, 0.01, 0.05")
            p.add_argument("--out-dir", type=Path, required=True)
        p.set_defaults(func=func)

    p = sub.add_parser("detect", parents=[common], help="test series against a site fingerprint")
    p.add_argument("--manifest", type=Path, required=True, help="training corpus")
    p.add_argument("--site", required=True)
    p.add_argument("--threshold", type=float)
    p.add_argument("--calibration", type=Path)
    p.add_argument("--series", type=Path, nargs="+", required=True)
    _dtw_flags(p)
    p.add_argument("--out", type=Path, help="JSON output (default stdout)")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("bwest", parents=[common], help="packet-train bandwidth estimate")
    _link_flags(p)
    p.add_argument("--n", type=int, default=32, help="train length")
    p.add_argument("--probe-size", type=int, default=DEFAULT_PROBE_SIZE)
    p.add_argument("--responses", type=Path, help="measured response times (ms) instead of simulating")
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_bwest)

    p = sub.add_parser("deanon", parents=[common], help="combine detections into identity evidence")
    p.add_argument("--events", type=Path)
    p.add_argument("--fp", type=float, default=0.005)
    p.add_argument("--fn", type=float, default=0.17)
    p.add_argument("--prior", type=float, default=0.5)
    p.add_argument("--session", type=float, help="average session length (min)")
    p.add_argument("--window", type=float, default=180.0, help="observation window (min)")
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_deanon)

    p = sub.add_parser("e2e", parents=[common], help="generate, simulate, recover, calibrate, curve")
    _link_flags(p)
    p.add_argument("--profiles", type=Path, required=True, help="CSV with a profile_file column")
    p.add_argument("--samples", type=int, default=12, help="samples per site")
    p.add_argument("--eta", type=float, default=DEFAULT_ETA)
    p.add_argument("--confidence", type=float, default=0.95)
    p.add_argument("--target-fp", type=float, action="append")
    _dtw_flags(p)
    p.add_argument("--out-dir", type=Path, required=True)
    p.set_defaults(func=cmd_e2e)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except ValueError as exc:  # InvalidArgument, FormatError and stray parse errors
        print(f"remotetraffic {args.command}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"remotetraffic {args.command}: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
