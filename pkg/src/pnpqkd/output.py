"""Deterministic writers for run results.

Everything here is plain CSV or ``key=value`` text, sorted where order is
not inherent, with floats in shortest round-trip form. Identical inputs
produce byte-identical files; nothing embeds a timestamp or hostname.
"""

from __future__ import annotations

import csv
import dataclasses
import math
from typing import Iterable, Mapping

from .network import BinnedIntensity
from .protocol import SlotRecords
from .visibility import FringeScan


def fmt(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return repr(value)
    return str(value)


def write_fringe_csv(path: str, scan: FringeScan) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["phi_a_rad", "intensity"])
        for phi, inten in zip(scan.phi_a_rad, scan.intensity):
            w.writerow([fmt(float(phi)), fmt(float(inten))])


def write_bins_csv(path: str, bins: Mapping[str, Iterable[BinnedIntensity]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["port", "bin_ns", "intensity", "n_segments"])
        for port in sorted(bins):
            for b in bins[port]:
                w.writerow([port, fmt(b.bin_ns), fmt(b.intensity), b.n_segments])


def write_records_csv(path: str, records: SlotRecords) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(
            [
                "slot",
                "alice_symbol",
                "bob_symbol",
                "click_d0",
                "click_d1",
                "reference_seen",
                "monitor_alarm",
                "eve_conclusive",
            ]
        )
        for i in range(records.n_slots):
            w.writerow(
                [
                    i,
                    int(records.alice_symbol[i]),
                    int(records.bob_symbol[i]),
                    fmt(bool(records.click_d0[i])),
                    fmt(bool(records.click_d1[i])),
                    fmt(bool(records.reference_seen[i])),
                    fmt(bool(records.monitor_alarm[i])),
                    fmt(bool(records.eve_conclusive[i])),
                ]
            )


def write_sweep_csv(path: str, points) -> None:
    """One row per sweep step, headed by the swept parameter and metric names."""
    points = list(points)
    if not points:
        raise ValueError("sweep produced no rows")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([points[0].parameter, points[0].metric])
        for p in points:
            w.writerow([fmt(p.value), fmt(p.result)])


def stats_text(stats) -> str:
    """``key=value`` lines, sorted by key, one stat per line."""
    if dataclasses.is_dataclass(stats) and not isinstance(stats, type):
        stats = dataclasses.asdict(stats)
    return "".join(f"{k}={fmt(stats[k])}\n" for k in sorted(stats))


def write_stats(path: str, stats) -> str:
    text = stats_text(stats)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
    return text
