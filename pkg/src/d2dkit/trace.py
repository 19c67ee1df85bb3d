"""Trace records, the event-log / relationship file formats, and splitting.

Events are kept in two shapes: :class:`SharingEvent` records (what the
parser returns and what tests construct by hand) and the columnar
:class:`Trace`, which every analysis module consumes.
"""

from __future__ import annotations

import enum
import io
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional, Sequence

import numpy as np

CATEGORIES = ("app", "video", "music", "image", "other")
CATEGORY_CODE = {name: i for i, name in enumerate(CATEGORIES)}

HEADER_RE = re.compile(r"^#d2dtrace v1 min_ts=(-?\d+) max_ts=(-?\d+)\s*$")


class TraceFormatError(ValueError):
    """Raised for unreadable headers or, in strict mode, the first bad line."""


class Tier(enum.IntEnum):
    STRANGER = 0
    FRIEND = 1
    FAMILY = 2

    @classmethod
    def parse(cls, value) -> "Tier":
        if isinstance(value, cls):
            return value
        if isinstance(value, str) and not value.strip().lstrip("-").isdigit():
            return cls[value.strip().upper()]
        return cls(int(value))


@dataclass(frozen=True)
class GeoPoint:
    lat: float
    lon: float

    def __post_init__(self):
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"latitude out of range: {self.lat}")
        if not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"longitude out of range: {self.lon}")


@dataclass(frozen=True)
class SharingEvent:
    timestamp: int
    sender: int
    receiver: int
    file: int
    size_bytes: int
    category: str
    geo: Optional[GeoPoint] = None

    def __post_init__(self):
        if self.sender == self.receiver:
            raise ValueError("sender==receiver")
        if self.sender < 0 or self.receiver < 0 or self.file < 0:
            raise ValueError("ids must be non-negative")
        if self.size_bytes < 0:
            raise ValueError("size_bytes must be non-negative")
        if self.category not in CATEGORY_CODE:
            raise ValueError(f"unknown category {self.category!r}")

    def to_line(self) -> str:
        geo = "" if self.geo is None else f"{self.geo.lat:.6f};{self.geo.lon:.6f}"
        return (f"{self.timestamp},{self.sender},{self.receiver},{self.file},"
                f"{self.size_bytes},{self.category},{geo}")


@dataclass(frozen=True)
class RelationshipTier:
    user_a: int
    user_b: int
    tier: Tier

    def __post_init__(self):
        if not self.user_a < self.user_b:
            raise ValueError("relationship pairs are stored with user_a < user_b")


@dataclass(frozen=True)
class LineError:
    line_no: int
    reason: str


@dataclass
class TraceSummary:
    num_events: int = 0
    num_users: int = 0
    num_files: int = 0
    num_gps_records: int = 0
    time_span: Optional[tuple] = None
    per_category_counts: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "num_events": self.num_events,
            "num_users": self.num_users,
            "num_files": self.num_files,
            "num_gps_records": self.num_gps_records,
            "time_span": None if self.time_span is None else list(self.time_span),
            "per_category_counts": {
                c: {"events": e, "bytes": b} for c, (e, b) in self.per_category_counts.items()
            },
        }


# --------------------------------------------------------------------------
# columnar trace


@dataclass
class Trace:
    """Columnar event table. ``lat``/``lon`` are NaN where geo is missing.

    ``min_ts``/``max_ts`` are the declared span from the header, which may be
    wider than the observed timestamps.
    """

    ts: np.ndarray
    sender: np.ndarray
    receiver: np.ndarray
    file: np.ndarray
    size: np.ndarray
    category: np.ndarray
    lat: np.ndarray
    lon: np.ndarray
    min_ts: int = 0
    max_ts: int = 0

    def __len__(self) -> int:
        return int(self.ts.shape[0])

    @classmethod
    def empty(cls, min_ts: int = 0, max_ts: int = 0) -> "Trace":
        i = np.zeros(0, dtype=np.int64)
        f = np.zeros(0, dtype=np.float64)
        return cls(i, i.copy(), i.copy(), i.copy(), i.copy(), np.zeros(0, dtype=np.int8),
                   f, f.copy(), min_ts, max_ts)

    @classmethod
    def from_events(cls, events: Sequence[SharingEvent], min_ts: Optional[int] = None,
                    max_ts: Optional[int] = None) -> "Trace":
        n = len(events)
        ts = np.fromiter((e.timestamp for e in events), dtype=np.int64, count=n)
        lat = np.fromiter((math.nan if e.geo is None else e.geo.lat for e in events), dtype=np.float64, count=n)
        lon = np.fromiter((math.nan if e.geo is None else e.geo.lon for e in events), dtype=np.float64, count=n)
        if min_ts is None:
            min_ts = int(ts.min()) if n else 0
        if max_ts is None:
            max_ts = int(ts.max()) if n else 0
        return cls(
            ts=ts,
            sender=np.fromiter((e.sender for e in events), dtype=np.int64, count=n),
            receiver=np.fromiter((e.receiver for e in events), dtype=np.int64, count=n),
            file=np.fromiter((e.file for e in events), dtype=np.int64, count=n),
            size=np.fromiter((e.size_bytes for e in events), dtype=np.int64, count=n),
            category=np.fromiter((CATEGORY_CODE[e.category] for e in events), dtype=np.int8, count=n),
            lat=lat, lon=lon, min_ts=int(min_ts), max_ts=int(max_ts),
        )

    def events(self) -> list[SharingEvent]:
        out = []
        for i in range(len(self)):
            geo = None if math.isnan(self.lat[i]) else GeoPoint(float(self.lat[i]), float(self.lon[i]))
            out.append(SharingEvent(int(self.ts[i]), int(self.sender[i]), int(self.receiver[i]),
                                    int(self.file[i]), int(self.size[i]),
                                    CATEGORIES[self.category[i]], geo))
        return out

    def take(self, idx) -> "Trace":
        return Trace(self.ts[idx], self.sender[idx], self.receiver[idx], self.file[idx],
                     self.size[idx], self.category[idx], self.lat[idx], self.lon[idx],
                     self.min_ts, self.max_ts)

    def order(self) -> np.ndarray:
        """Canonical processing order: timestamp, then (sender, receiver)."""
        return np.lexsort((self.file, self.receiver, self.sender, self.ts))

    def sorted(self) -> "Trace":
        return self.take(self.order())

    def users(self) -> np.ndarray:
        return np.unique(np.concatenate([self.sender, self.receiver]))

    def with_span(self, min_ts: int, max_ts: int) -> "Trace":
        t = self.take(slice(None))
        t.min_ts, t.max_ts = int(min_ts), int(max_ts)
        return t


def as_trace(events) -> Trace:
    if isinstance(events, Trace):
        return events
    return Trace.from_events(list(events))


# --------------------------------------------------------------------------
# event log format


def format_header(min_ts: int, max_ts: int) -> str:
    return f"#d2dtrace v1 min_ts={int(min_ts)} max_ts={int(max_ts)}"


def _parse_line(line: str, span: Optional[tuple]) -> SharingEvent:
    parts = line.split(",")
    if len(parts) != 7:
        raise ValueError("bad field count")
    try:
        ts, snd, rcv, fil, size = (int(p) for p in parts[:5])
    except ValueError:
        raise ValueError("unparsable integer") from None
    if snd == rcv:
        raise ValueError("sender==receiver")
    if min(snd, rcv, fil, size) < 0:
        raise ValueError("negative id or size")
    cat = parts[5].strip()
    if cat not in CATEGORY_CODE:
        raise ValueError("unknown category")
    geo = None
    g = parts[6].strip()
    if g:
        try:
            lat_s, lon_s = g.split(";")
            lat, lon = float(lat_s), float(lon_s)
        except ValueError:
            raise ValueError("out-of-range coordinate") from None
        if not (-90.0 <= lat <= 90.0 and -180.0 <= lon <= 180.0):
            raise ValueError("out-of-range coordinate")
        geo = GeoPoint(lat, lon)
    if span is not None and not span[0] <= ts <= span[1]:
        raise ValueError("timestamp outside declared span")
    return SharingEvent(ts, snd, rcv, fil, size, cat, geo)


def parse_event_log(lines: Iterable[str], strict: bool = False, require_header: bool = True):
    """Parse an event log.

    Returns ``(events, errors)``; ``errors`` holds one :class:`LineError`
    per malformed line. With ``strict`` the first bad line raises
    :class:`TraceFormatError` instead. Use :func:`read_trace` when the
    header span is needed too.
    """
    events, errors, _ = _parse(lines, strict, require_header)
    return events, errors


def _parse(lines: Iterable[str], strict: bool, require_header: bool):
    events: list[SharingEvent] = []
    errors: list[LineError] = []
    span = None
    it: Iterator[str] = iter(lines)
    line_no = 0
    if require_header:
        first = next(it, None)
        line_no = 1
        m = HEADER_RE.match(first.rstrip("\r\n")) if first is not None else None
        if m is None:
            raise TraceFormatError("missing or malformed '#d2dtrace v1' header")
        span = (int(m.group(1)), int(m.group(2)))
        if span[0] > span[1]:
            raise TraceFormatError("header min_ts exceeds max_ts")
    for raw in it:
        line_no += 1
        line = raw.rstrip("\r\n")
        if not line or line.startswith("#"):
            continue
        try:
            events.append(_parse_line(line, span))
        except ValueError as exc:
            if strict:
                raise TraceFormatError(f"line {line_no}: {exc}") from None
            errors.append(LineError(line_no, str(exc)))
    return events, errors, span


def write_event_log(out, events, min_ts: Optional[int] = None, max_ts: Optional[int] = None) -> None:
    """Write a header plus one line per event to a text stream."""
    trace = as_trace(events)
    if min_ts is None:
        min_ts = trace.min_ts
    if max_ts is None:
        max_ts = trace.max_ts
    out.write(format_header(min_ts, max_ts) + "\n")
    has_geo = ~np.isnan(trace.lat)
    cols = zip(trace.ts.tolist(), trace.sender.tolist(), trace.receiver.tolist(), trace.file.tolist(),
               trace.size.tolist(), trace.category.tolist(), has_geo.tolist(),
               trace.lat.tolist(), trace.lon.tolist())
    buf = []
    for ts, s, r, f, sz, c, hg, la, lo in cols:
        geo = f"{la:.6f};{lo:.6f}" if hg else ""
        buf.append(f"{ts},{s},{r},{f},{sz},{CATEGORIES[c]},{geo}\n")
        if len(buf) >= 65536:
            out.write("".join(buf))
            buf.clear()
    out.write("".join(buf))


def dumps_event_log(events, min_ts=None, max_ts=None) -> str:
    sio = io.StringIO()
    write_event_log(sio, events, min_ts, max_ts)
    return sio.getvalue()


def read_trace(path, strict: bool = False) -> tuple[Trace, list[LineError]]:
    with open(path, encoding="utf-8") as fh:
        events, errors, span = _parse(fh, strict, require_header=True)
    return Trace.from_events(events, span[0], span[1]), errors


# --------------------------------------------------------------------------
# summaries and splitting


def summarize(events) -> TraceSummary:
    trace = as_trace(events)
    n = len(trace)
    if n == 0:
        return TraceSummary()
    cats = {}
    ev_counts = np.bincount(trace.category, minlength=len(CATEGORIES))
    for code, name in enumerate(CATEGORIES):
        if ev_counts[code]:
            # exact integer byte sums; bincount weights would go through float64
            cats[name] = (int(ev_counts[code]), int(trace.size[trace.category == code].sum()))
    return TraceSummary(
        num_events=n,
        num_users=int(trace.users().size),
        num_files=int(np.unique(trace.file).size),
        num_gps_records=int((~np.isnan(trace.lat)).sum()),
        time_span=(int(trace.ts.min()), int(trace.ts.max())),
        per_category_counts=cats,
    )


def split_by_time(events, boundary=None, *, fraction: Optional[float] = None):
    """Split into (ts < boundary, ts >= boundary), both sorted canonically.

    Pass either an absolute ``boundary`` timestamp or a ``fraction`` of the
    observed time span. A float ``boundary`` strictly inside (0, 1) is read
    as a fraction.
    """
    trace = as_trace(events).sorted()
    if boundary is not None and fraction is None and isinstance(boundary, float) and 0.0 < boundary < 1.0:
        fraction, boundary = boundary, None
    if len(trace) == 0:
        return trace, trace.take(slice(0, 0))
    if fraction is not None:
        if not 0.0 < fraction < 1.0:
            raise ValueError("fraction must be in (0, 1)")
        lo, hi = int(trace.ts.min()), int(trace.ts.max())
        boundary = lo + fraction * (hi - lo)
    if boundary is None:
        raise ValueError("need a boundary or a fraction")
    cut = int(np.searchsorted(trace.ts, boundary, side="left"))
    # searchsorted(side=left) on a float boundary gives the first ts >= boundary
    return trace.take(slice(0, cut)), trace.take(slice(cut, None))


# --------------------------------------------------------------------------
# relationships / permission gate


class TierIndex:
    """Unordered-pair lookup of relationship tiers; missing pairs are strangers."""

    def __init__(self, records: Iterable[RelationshipTier] = ()):
        self._tiers: dict[tuple, Tier] = {}
        self._packed = None
        for r in records:
            key = (r.user_a, r.user_b)
            if key in self._tiers:
                raise ValueError(f"duplicate relationship record for pair {key}")
            self._tiers[key] = Tier(r.tier)

    def __len__(self) -> int:
        return len(self._tiers)

    def tier(self, u: int, v: int) -> Tier:
        key = (u, v) if u < v else (v, u)
        return self._tiers.get(key, Tier.STRANGER)

    def records(self) -> list[RelationshipTier]:
        return [RelationshipTier(a, b, t) for (a, b), t in sorted(self._tiers.items())]

    def tiers_for(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Vectorised ``tier`` over pair arrays."""
        if not self._tiers:
            return np.zeros(len(u), dtype=np.int64)
        if self._packed is None:
            keys = sorted(self._tiers)
            kk = np.array([a * (1 << 32) + b for a, b in keys], dtype=np.int64)
            vals = np.array([int(self._tiers[k]) for k in keys], dtype=np.int64)
            self._packed = (kk, vals)
        kk, vals = self._packed
        lo = np.minimum(u, v).astype(np.int64)
        hi = np.maximum(u, v).astype(np.int64)
        q = lo * (1 << 32) + hi
        pos = np.searchsorted(kk, q)
        pos_c = np.minimum(pos, len(kk) - 1)
        hit = kk[pos_c] == q
        return np.where(hit, vals[pos_c], 0)


def permission_allows(tiers: TierIndex, u: int, v: int, threshold=Tier.STRANGER) -> bool:
    return tiers.tier(u, v) >= Tier.parse(threshold)


def parse_relationships(lines: Iterable[str]) -> TierIndex:
    records = []
    for line_no, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line or line.startswith("#") or line.startswith("user_a"):
            continue
        parts = line.split(",")
        if len(parts) != 3:
            raise TraceFormatError(f"relationship line {line_no}: bad field count")
        try:
            a, b, t = (int(p) for p in parts)
            a, b = min(a, b), max(a, b)
            records.append(RelationshipTier(a, b, Tier(t)))
        except ValueError as exc:
            raise TraceFormatError(f"relationship line {line_no}: {exc}") from None
    return TierIndex(records)


def read_relationships(path) -> TierIndex:
    with open(path, encoding="utf-8") as fh:
        return parse_relationships(fh)


def write_relationships(out, tiers) -> None:
    records = tiers.records() if isinstance(tiers, TierIndex) else sorted(tiers, key=lambda r: (r.user_a, r.user_b))
    out.write("user_a,user_b,tier\n")
    out.write("".join(f"{r.user_a},{r.user_b},{int(r.tier)}\n" for r in records))


def category_counts(trace: Trace) -> Counter:
    return Counter(CATEGORIES[c] for c in trace.category.tolist())
