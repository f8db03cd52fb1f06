"""Readers and writers for the on-disk formats.

All CSV files may start with ``#`` comment lines (the provenance header
written by the command-line tool); readers skip them. Config and profile
files are INI files read with :mod:`configparser`::

    [link]                         [site]
    downstream_bandwidth = 3e6     site_id = news
    base_rtt = 40                  initial_window = 2
    mtu = 1500                     window_growth = 2
    probe_period = 2               mtu = 1500
    probe_count = 1000             jitter = 0.1
    noise_kind = truncated-gaussian think_time = 0
    noise_magnitude = 0.5
    noise_seed = 0                 [server.1]
                                   rtt = 80
                                   objects = 14000, 3000, 1500
"""
from __future__ import annotations

import configparser
import csv
import math
import os
from datetime import datetime
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .deanon import Event, EventLog
from .errors import FormatError
from .fingerprint import CalibrationReport, Sample
from .link import LinkConfig, NoiseModel, PacketArrival, RttTrace
from .recovery import RecoveredSeries
from .traffic import Server, SiteProfile

TRAFFIC_HEADER = ["time_ms", "size_bytes"]
RTT_HEADER = ["probe_index", "send_ms", "rtt_ms"]
SERIES_HEADER = ["interval_index", "value", "units"]
MANIFEST_HEADER = ["site_id", "sample_index", "series_file"]
CALIBRATION_HEADER = ["site_id", "threshold", "fp_hat", "fp_ci_upper", "fn_hat"]
CURVE_HEADER = ["fn_bin_upper", "count"]
EVENT_HEADER = ["post_time_iso8601", "detected"]

LINK_KEYS = {
    "downstream_bandwidth": float,
    "base_rtt": float,
    "mtu": int,
    "probe_period": float,
    "probe_count": int,
}


def _header_lines(provenance: Sequence[str] | None) -> str:
    return "".join(f"# {line}\n" for line in provenance or ())


def _rows(path, header: list[str]):
    """Yield (line_number, row) for data rows after checking the header."""
    path = Path(path)
    with open(path, newline="") as fh:
        seen_header = False
        for lineno, line in enumerate(fh, 1):
            if not line.strip() or line.startswith("#"):
                continue
            row = next(csv.reader([line]))
            if not seen_header:
                if [c.strip() for c in row] != header:
                    raise FormatError(f"expected header {','.join(header)}", lineno, path)
                seen_header = True
                continue
            if len(row) != len(header):
                raise FormatError(f"expected {len(header)} fields, got {len(row)}", lineno, path)
            yield lineno, [c.strip() for c in row]
        if not seen_header:
            raise FormatError(f"missing header {','.join(header)}", None, path)


def _number(text: str, kind, lineno, path, what):
    try:
        value = kind(text)
    except ValueError:
        raise FormatError(f"bad {what}: {text!r}", lineno, path) from None
    if isinstance(value, float) and not math.isfinite(value):
        raise FormatError(f"bad {what}: {text!r}", lineno, path)
    return value


def _write_csv(path, header, rows, provenance=None):
    with open(path, "w", newline="") as fh:
        fh.write(_header_lines(provenance))
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _fmt(x: float) -> str:
    return repr(float(x))


# -- traffic traces ---------------------------------------------------------

def load_trace(path) -> list[PacketArrival]:
    """Packet arrivals from a ``time_ms,size_bytes`` CSV, stably sorted by time."""
    out = []
    for lineno, (t, s) in _rows(path, TRAFFIC_HEADER):
        t = _number(t, float, lineno, path, "time_ms")
        s = _number(s, int, lineno, path, "size_bytes")
        if t < 0 or s <= 0:
            raise FormatError("time must be >= 0 and size > 0", lineno, path)
        out.append(PacketArrival(t, s))
    out.sort(key=lambda p: p.time)
    return out


def write_trace(path, traffic: Iterable[PacketArrival], provenance=None) -> None:
    _write_csv(path, TRAFFIC_HEADER, ([_fmt(p.time), int(p.size)] for p in traffic), provenance)


# -- RTT traces -------------------------------------------------------------

def write_rtt_trace(path, trace: RttTrace, provenance=None) -> None:
    send = trace.send_times()
    rows = (
        [i, _fmt(send[i]), "" if i in trace.lost else _fmt(r)] for i, r in enumerate(trace.rtts)
    )
    _write_csv(path, RTT_HEADER, rows, provenance)


def read_rtt_trace(path) -> RttTrace:
    rtts, sends, lost = [], [], set()
    for lineno, (idx, send, rtt) in _rows(path, RTT_HEADER):
        idx = _number(idx, int, lineno, path, "probe_index")
        if idx != len(rtts):
            raise FormatError(f"probe_index {idx} out of sequence", lineno, path)
        sends.append(_number(send, float, lineno, path, "send_ms"))
        if rtt == "":
            lost.add(idx)
            rtts.append(np.nan)
        else:
            value = _number(rtt, float, lineno, path, "rtt_ms")
            if value < 0:
                raise FormatError("rtt must be >= 0", lineno, path)
            rtts.append(value)
    if not rtts:
        raise FormatError("RTT trace has no probes", None, path)
    period = sends[1] - sends[0] if len(sends) > 1 else 1.0
    if len(sends) > 1 and not np.allclose(np.diff(sends), period, rtol=1e-9, atol=1e-9):
        raise FormatError("probes are not evenly spaced", None, path)
    if len(sends) > 1 and not period > 0:
        raise FormatError("probe period must be > 0", None, path)
    return RttTrace(period, np.array(rtts), frozenset(lost))


# -- recovered series -------------------------------------------------------

def write_series(path, series: RecoveredSeries, provenance=None) -> None:
    eta = "" if series.eta is None else _fmt(series.eta)
    meta = [f"series: probe_period_ms={_fmt(series.probe_period)} eta_ms={eta}"]
    rows = ([i, _fmt(v), series.units] for i, v in enumerate(series.values))
    _write_csv(path, SERIES_HEADER, rows, list(provenance or ()) + meta)


def read_series(path) -> RecoveredSeries:
    meta = {}
    with open(path) as fh:
        for line in fh:
            if line.startswith("# series:"):
                for item in line[len("# series:"):].split():
                    key, _, value = item.partition("=")
                    meta[key] = value
            elif not line.startswith("#"):
                break
    if "probe_period_ms" not in meta:
        raise FormatError("missing '# series: probe_period_ms=...' metadata line", None, path)
    values, units = [], set()
    for lineno, (idx, v, u) in _rows(path, SERIES_HEADER):
        if _number(idx, int, lineno, path, "interval_index") != len(values):
            raise FormatError("interval_index out of sequence", lineno, path)
        value = _number(v, float, lineno, path, "value")
        if value < 0:
            raise FormatError("recovered values must be >= 0", lineno, path)
        values.append(value)
        units.add(u)
    if len(units) > 1:
        raise FormatError(f"mixed units {sorted(units)}", None, path)
    try:
        period = float(meta["probe_period_ms"])
        eta = float(meta["eta_ms"]) if meta.get("eta_ms") else None
        return RecoveredSeries(period, np.array(values), units.pop() if units else "milliseconds", eta)
    except ValueError as exc:
        raise FormatError(str(exc), None, path) from None


# -- distance matrices ------------------------------------------------------

def write_distance_matrix(path, ids: Sequence[str], matrix: np.ndarray, provenance=None) -> None:
    rows = ([name, *(_fmt(x) for x in row)] for name, row in zip(ids, matrix))
    _write_csv(path, ["id", *ids], rows, provenance)


def read_distance_matrix(path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if ln.strip() and not ln.startswith("#")]
    rows = list(csv.reader(lines))
    if not rows or rows[0][0] != "id":
        raise FormatError("distance matrix must start with an 'id' header", None, path)
    ids = rows[0][1:]
    if [r[0] for r in rows[1:]] != ids:
        raise FormatError("row and column identifiers differ", None, path)
    try:
        m = np.array([[float(x) for x in r[1:]] for r in rows[1:]])
    except ValueError as exc:
        raise FormatError(str(exc), None, path) from None
    return ids, m.reshape(len(ids), len(ids))


# -- corpora ----------------------------------------------------------------

def read_manifest(path) -> list[Sample]:
    """Samples listed in a ``site_id,sample_index,series_file`` manifest.

    Relative series paths resolve against the manifest's directory.
    """
    base = Path(path).parent
    out = []
    seen = set()
    for lineno, (site, idx, file) in _rows(path, MANIFEST_HEADER):
        idx = _number(idx, int, lineno, path, "sample_index")
        if (site, idx) in seen:
            raise FormatError(f"duplicate sample ({site}, {idx})", lineno, path)
        seen.add((site, idx))
        out.append(Sample(site, idx, read_series(base / file)))
    return out


def write_manifest(path, entries: Iterable[tuple[str, int, str]], provenance=None) -> None:
    _write_csv(path, MANIFEST_HEADER, ([s, i, f] for s, i, f in entries), provenance)


def write_calibration(path, reports: Iterable[CalibrationReport], provenance=None) -> None:
    rows = (
        [r.site_id, _fmt(r.threshold), _fmt(r.fp_point_estimate), _fmt(r.fp_ci_upper), _fmt(r.fn_estimate)]
        for r in reports
    )
    _write_csv(path, CALIBRATION_HEADER, rows, provenance)


def read_calibration(path) -> dict[str, dict[str, float]]:
    out = {}
    for lineno, row in _rows(path, CALIBRATION_HEADER):
        site, *nums = row
        out[site] = {k: _number(v, float, lineno, path, k) for k, v in zip(CALIBRATION_HEADER[1:], nums)}
    return out


def write_curve(path, cumulative: Iterable[tuple[float, int]], provenance=None) -> None:
    _write_csv(path, CURVE_HEADER, ([f"{e:.2f}", c] for e, c in cumulative), provenance)


# -- event logs -------------------------------------------------------------

def read_event_log(path) -> EventLog:
    events = []
    for lineno, (ts, det) in _rows(path, EVENT_HEADER):
        try:
            t = datetime.fromisoformat(ts.replace("Z", "+00:00"))
        except ValueError:
            raise FormatError(f"bad timestamp {ts!r}", lineno, path) from None
        flag = det.lower()
        if flag not in ("true", "false", "1", "0"):
            raise FormatError(f"detected must be true/false, got {det!r}", lineno, path)
        events.append(Event(t, flag in ("true", "1")))
    try:
        return EventLog(tuple(events))
    except ValueError as exc:
        raise FormatError(str(exc), None, path) from None


def write_event_log(path, log: EventLog, provenance=None) -> None:
    rows = ([e.post_time.isoformat(), "true" if e.detected else "false"] for e in log.events)
    _write_csv(path, EVENT_HEADER, rows, provenance)


# -- INI configs ------------------------------------------------------------

def _ini(path) -> configparser.ConfigParser:
    cp = configparser.ConfigParser()
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except configparser.Error as exc:
        raise FormatError(str(exc), getattr(exc, "lineno", None), path) from None
    return cp


def link_config_fields(path) -> dict:
    """Raw LinkConfig keyword arguments from the ``[link]`` section."""
    cp = _ini(path)
    if "link" not in cp:
        raise FormatError("missing [link] section", None, path)
    sec = cp["link"]
    out = {}
    try:
        for key, kind in LINK_KEYS.items():
            if key in sec:
                out[key] = kind(sec[key])
        if "noise_kind" in sec:
            out["noise_kind"] = sec["noise_kind"]
        if "noise_magnitude" in sec:
            out["noise_magnitude"] = float(sec["noise_magnitude"])
        if "noise_seed" in sec:
            out["noise_seed"] = int(sec["noise_seed"])
    except ValueError as exc:
        raise FormatError(str(exc), None, path) from None
    unknown = set(sec) - set(LINK_KEYS) - {"noise_kind", "noise_magnitude", "noise_seed"}
    if unknown:
        raise FormatError(f"unknown keys {sorted(unknown)}", None, path)
    return out


def link_config_from_fields(fields: dict) -> LinkConfig:
    fields = dict(fields)
    noise = NoiseModel(
        fields.pop("noise_kind", "none"), fields.pop("noise_magnitude", 0.0), fields.pop("noise_seed", 0)
    )
    return LinkConfig(noise=noise, **fields)


def read_link_config(path) -> LinkConfig:
    try:
        return link_config_from_fields(link_config_fields(path))
    except FormatError:
        raise
    except ValueError as exc:
        raise FormatError(str(exc), None, path) from None


def write_link_config(path, cfg: LinkConfig) -> None:
    cp = configparser.ConfigParser()
    cp["link"] = {
        "downstream_bandwidth": repr(float(cfg.downstream_bandwidth)),
        "base_rtt": repr(float(cfg.base_rtt)),
        "mtu": str(cfg.mtu),
        "probe_period": repr(float(cfg.probe_period)),
        "probe_count": str(cfg.probe_count),
        "noise_kind": cfg.noise.kind,
        "noise_magnitude": repr(float(cfg.noise.magnitude)),
        "noise_seed": str(cfg.noise.seed),
    }
    with open(path, "w") as fh:
        cp.write(fh)


def read_site_profile(path) -> SiteProfile:
    cp = _ini(path)
    if "site" not in cp:
        raise FormatError("missing [site] section", None, path)
    sec = cp["site"]
    try:
        servers = []
        for name in sorted((s for s in cp.sections() if s.startswith("server")), key=_server_order):
            srv = cp[name]
            objects = tuple(int(x) for x in srv["objects"].replace(",", " ").split())
            servers.append(Server(float(srv["rtt"]), objects))
        return SiteProfile(
            site_id=sec.get("site_id", Path(path).stem),
            servers=tuple(servers),
            initial_window=int(sec.get("initial_window", 2)),
            window_growth=float(sec.get("window_growth", 2.0)),
            mtu=int(sec.get("mtu", 1500)),
            jitter=float(sec.get("jitter", 0.0)),
            think_time=float(sec.get("think_time", 0.0)),
        )
    except (KeyError, ValueError) as exc:
        raise FormatError(f"bad site profile: {exc}", None, path) from None


def _server_order(name: str):
    tail = name.partition(".")[2]
    return (0, int(tail)) if tail.isdigit() else (1, tail)


def write_site_profile(path, profile: SiteProfile) -> None:
    cp = configparser.ConfigParser()
    cp["site"] = {
        "site_id": profile.site_id,
        "initial_window": str(profile.initial_window),
        "window_growth": repr(float(profile.window_growth)),
        "mtu": str(profile.mtu),
        "jitter": repr(float(profile.jitter)),
        "think_time": repr(float(profile.think_time)),
    }
    for k, s in enumerate(profile.servers, 1):
        cp[f"server.{k}"] = {"rtt": repr(float(s.rtt)), "objects": ", ".join(map(str, s.objects))}
    with open(path, "w") as fh:
        cp.write(fh)


def relpath(target, start) -> str:
    return os.path.relpath(target, start)
