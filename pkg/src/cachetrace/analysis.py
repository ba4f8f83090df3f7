"""Memory-footprint characterization over access logs.

An access log is a sequence of ``(level, cycle, address)`` entries, stored
as CSV ``level,cycle,address`` with hexadecimal addresses. Counting is by
byte address. All functions are pure; percentages are recomputed from
counts every time.
"""

from __future__ import annotations

import csv
import io
import os
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Iterator, NamedTuple

import numpy as np


class AnalysisError(ValueError):
    pass


class AccessLogEntry(NamedTuple):
    level: str
    cycle: int
    address: int


def read_log(path_or_file) -> Iterator[AccessLogEntry]:
    fh = open(path_or_file, newline="") if isinstance(path_or_file, (str, os.PathLike)) else path_or_file
    try:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["level", "cycle", "address"]:
            raise AnalysisError(f"unexpected access-log header {header}")
        for row in reader:
            yield AccessLogEntry(row[0], int(row[1]), int(row[2], 16))
    finally:
        if fh is not path_or_file:
            fh.close()


def write_log(path_or_file, entries: Iterable) -> int:
    own = isinstance(path_or_file, (str, os.PathLike))
    fh = open(path_or_file, "w", newline="") if own else path_or_file
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["level", "cycle", "address"])
        n = 0
        for level, cycle, address in entries:
            w.writerow([level, cycle, f"{address:#x}"])
            n += 1
        return n
    finally:
        if own:
            fh.close()


def _filter(log, level):
    for e in log:
        if level is None or e[0] == level:
            yield e


def count_accesses(log: Iterable, level: str | None = None) -> Counter:
    """Exact access count per address (the frequency table)."""
    return Counter(e[2] for e in _filter(log, level))


@dataclass(frozen=True)
class FrequencySummary:
    special_count: int
    once: int
    special: int
    other: int

    @property
    def total(self) -> int:
        return self.once + self.special + self.other

    def percentage(self, bucket: str) -> float:
        n = getattr(self, bucket)
        return 100.0 * n / self.total if self.total else 0.0

    def rows(self) -> list[tuple[str, int, float]]:
        labels = ("1", str(self.special_count), "other")
        if self.special_count == 1:
            labels = ("1", "1", "other")
        return [(lab, getattr(self, b), self.percentage(b))
                for lab, b in zip(labels, ("once", "special", "other"))]


def summarize_frequencies(table: Counter, special_count: int) -> FrequencySummary:
    """Bucket distinct addresses by count: exactly 1, exactly ``special_count``, other.

    With ``special_count == 1`` both named buckets hold the same addresses.
    """
    if special_count < 1:
        raise AnalysisError("special_count must be >= 1")
    hist = Counter(table.values())
    once = hist.get(1, 0)
    special = hist.get(special_count, 0)
    distinct = len(table)
    other = distinct - once - (special if special_count != 1 else 0)
    return FrequencySummary(special_count, once, special, other)


class StrideRow(NamedTuple):
    cycle: int
    delta_to_next: int | None


def stride_table_for_address(log: Iterable, address: int, level: str | None = None) -> list[StrideRow]:
    cycles = sorted(e[1] for e in _filter(log, level) if e[2] == address)
    if len(cycles) < 2:
        raise AnalysisError(
            f"address {address:#x} seen {len(cycles)} time(s); need at least 2"
        )
    deltas = np.diff(np.asarray(cycles, dtype=np.int64)).tolist()
    return [StrideRow(c, d) for c, d in zip(cycles, deltas)] + [StrideRow(cycles[-1], None)]


@dataclass(frozen=True)
class Band:
    band_id: int
    low_address: int
    high_address: int  # inclusive: highest logged address in the band
    total_accesses: int
    address_count: int


def classify_bands(table: Counter, granularity: int = 1 << 20) -> list[Band]:
    """Group addresses by ``address // granularity`` and merge adjacent non-empty groups."""
    if granularity < 1 or granularity & (granularity - 1):
        raise AnalysisError("granularity must be a power of two")
    shift = granularity.bit_length() - 1
    groups: dict[int, list[int]] = {}
    for addr in table:
        groups.setdefault(addr >> shift, []).append(addr)
    bands: list[Band] = []
    run: list[int] = []
    prev = None
    for g in sorted(groups):
        if prev is not None and g != prev + 1:
            bands.append(_make_band(len(bands), run, table))
            run = []
        run.extend(groups[g])
        prev = g
    if run:
        bands.append(_make_band(len(bands), run, table))
    return bands


def _make_band(band_id, addrs, table):
    return Band(band_id, min(addrs), max(addrs), sum(table[a] for a in addrs), len(addrs))


def band_of(bands: list[Band], address: int) -> Band | None:
    for b in bands:
        if b.low_address <= address <= b.high_address:
            return b
    return None


def export_scatter(log: Iterable, start: int, end: int, level: str | None = None) -> list[tuple[int, int]]:
    """``(cycle, address)`` points with ``start <= cycle < end``, cycle-sorted."""
    if start >= end:
        raise AnalysisError("window start must be below end")
    pts = [(e[1], e[2]) for e in _filter(log, level) if start <= e[1] < end]
    pts.sort(key=lambda p: p[0])
    return pts


# -- CSV outputs ---------------------------------------------------------

def _csv(rows, header) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return out.getvalue()


def frequency_csv(table: Counter) -> str:
    return _csv(((f"{a:#x}", n) for a, n in sorted(table.items())), ["address", "count"])


def summary_csv(summary: FrequencySummary) -> str:
    return _csv(((lab, n, f"{p:.3f}") for lab, n, p in summary.rows()),
                ["bucket", "addresses", "percentage"])


def stride_csv(rows: list[StrideRow]) -> str:
    return _csv(((r.cycle, "" if r.delta_to_next is None else r.delta_to_next) for r in rows),
                ["cycle", "delta_to_next"])


def bands_csv(bands: list[Band]) -> str:
    return _csv(((b.band_id, f"{b.low_address:#x}", f"{b.high_address:#x}", b.total_accesses,
                  b.address_count) for b in bands),
                ["band_id", "low_address", "high_address", "total_accesses", "address_count"])


def scatter_csv(points) -> str:
    return _csv(((c, f"{a:#x}") for c, a in points), ["cycle", "address"])
