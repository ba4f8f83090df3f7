"""Prefetchers attached to a cache level.

A prefetcher sees every demand access to its level through
``observe(ip, block, cycle, hit, prefetch_hit)`` and returns candidate block
addresses (address >> 6). The level drops candidates that are resident, in
flight, equal to the trigger or outside the address space, then fills them
into itself. ``on_fill`` reports demand-miss fills with their latency and
``on_evict`` reports blocks leaving the level; most designs ignore both.

These are mechanism-level models (tables, signatures, footprints, timely
deltas), not bit-exact copies of the championship submissions.
"""

from __future__ import annotations

from collections import OrderedDict, deque
from dataclasses import dataclass, field

BLOCK_BITS = 6
PAGE_BLOCKS = 64  # 4 KiB pages
MAX_BLOCK = (1 << (64 - BLOCK_BITS)) - 1


class Prefetcher:
    name = "none"

    def observe(self, ip: int, block: int, cycle: int = 0, hit: bool = False,
                prefetch_hit: bool = False) -> list[int]:
        return []

    def on_fill(self, block: int, cycle: int, latency: int) -> None:
        pass

    def on_evict(self, block: int) -> None:
        pass


class NextLine(Prefetcher):
    name = "next_line"

    def observe(self, ip, block, cycle=0, hit=False, prefetch_hit=False):
        return [block + 1]


def _stride_update(stride, conf, delta):
    """Shared 2-bit confidence automaton for stride tables.

    The first stride observed for an entry counts as one sighting; a
    mismatch costs one confidence step and a stride is replaced only once
    confidence has drained to zero.
    """
    if stride is None:
        return delta, 1
    if delta == stride:
        return stride, min(3, conf + 1)
    conf = max(0, conf - 1)
    if conf == 0:
        stride = delta
    return stride, conf


class IPStride(Prefetcher):
    """Direct-mapped per-IP stride table with a 2-bit confidence counter."""

    name = "ip_stride"

    def __init__(self, entries: int = 256, degree: int = 1, threshold: int = 2):
        self.entries = entries
        self.degree = degree
        self.threshold = threshold
        # slot -> [ip_tag, last_block, stride, confidence]
        self.table: list[list | None] = [None] * entries

    def observe(self, ip, block, cycle=0, hit=False, prefetch_hit=False):
        slot = (ip ^ (ip >> 8) ^ (ip >> 16)) % self.entries
        e = self.table[slot]
        if e is None or e[0] != ip:
            self.table[slot] = [ip, block, None, 0]
            return []
        delta = block - e[1]
        if delta == 0:
            return []
        e[2], e[3] = _stride_update(e[2], e[3], delta)
        e[1] = block
        if e[3] >= self.threshold:
            return [block + k * e[2] for k in range(1, self.degree + 1)]
        return []


def _encode_delta(delta: int) -> int:
    return (-delta & 0x3F) | 0x40 if delta < 0 else delta & 0x3F


@dataclass
class _PatternEntry:
    deltas: dict = field(default_factory=dict)
    total: int = 0


@dataclass
class _GhrEntry:
    signature: int
    confidence: float
    last_offset: int
    delta: int


class SPP(Prefetcher):
    """Signature-path prefetching with a global history register.

    Each page keeps its last offset and a 12-bit signature of recent
    deltas. The pattern table maps a signature to delta counts; lookahead
    follows the most likely delta while the path confidence (product of
    per-step ratios, damped by ``accuracy`` after the first step) stays at or
    above ``threshold``. A path that runs off the page is recorded in the
    GHR so the next page resumes with a trained signature.
    """

    name = "spp"
    SIG_BITS = 12
    COUNTER_MAX = 15

    def __init__(self, st_entries: int = 64, pt_entries: int = 512, ghr_entries: int = 8,
                 threshold: float = 0.25, accuracy: float = 0.9, max_depth: int = 32,
                 max_deltas: int = 4):
        self.st_entries = st_entries
        self.pt_entries = pt_entries
        self.threshold = threshold
        self.accuracy = accuracy
        self.max_depth = max_depth
        self.max_deltas = max_deltas
        self.signature_table: OrderedDict[int, list[int]] = OrderedDict()
        self.pattern_table: dict[int, _PatternEntry] = {}
        self.ghr: deque[_GhrEntry] = deque(maxlen=ghr_entries)

    @classmethod
    def next_signature(cls, sig: int, delta: int) -> int:
        return ((sig << 3) ^ _encode_delta(delta)) & ((1 << cls.SIG_BITS) - 1)

    def _train(self, sig, delta):
        entry = self.pattern_table.setdefault(sig % self.pt_entries, _PatternEntry())
        if delta not in entry.deltas and len(entry.deltas) >= self.max_deltas:
            weakest = min(entry.deltas, key=lambda d: (entry.deltas[d], d))
            entry.total -= entry.deltas.pop(weakest)
        entry.deltas[delta] = entry.deltas.get(delta, 0) + 1
        entry.total += 1
        if entry.total > self.COUNTER_MAX:
            for d in list(entry.deltas):
                entry.deltas[d] //= 2
                if not entry.deltas[d]:
                    del entry.deltas[d]
            entry.total = sum(entry.deltas.values())

    def _lookahead(self, page, offset, sig):
        base = page * PAGE_BLOCKS
        out = []
        conf = 1.0
        cur = offset
        crossed = False
        for depth in range(self.max_depth):
            entry = self.pattern_table.get(sig % self.pt_entries)
            if entry is None or entry.total == 0:
                break
            damp = self.accuracy if depth else 1.0
            best, best_count = None, 0
            for d in sorted(entry.deltas):
                c = entry.deltas[d]
                if conf * damp * c / entry.total >= self.threshold:
                    out.append(base + cur + d)
                if c > best_count:
                    best, best_count = d, c
            conf = conf * damp * best_count / entry.total
            if conf < self.threshold:
                break
            nxt = cur + best
            if not crossed and not 0 <= nxt < PAGE_BLOCKS:
                self.ghr.append(_GhrEntry(sig, conf, cur % PAGE_BLOCKS, best))
                crossed = True
            cur = nxt
            sig = self.next_signature(sig, best)
        return out

    def observe(self, ip, block, cycle=0, hit=False, prefetch_hit=False):
        page, offset = divmod(block, PAGE_BLOCKS)
        st = self.signature_table
        if page in st:
            st.move_to_end(page)
            last, sig = st[page]
            delta = offset - last
            if delta == 0:
                return []
            self._train(sig, delta)
            sig = self.next_signature(sig, delta)
            st[page] = [offset, sig]
            return self._lookahead(page, offset, sig)

        match = None
        for g in self.ghr:
            if (g.last_offset + g.delta) % PAGE_BLOCKS == offset:
                if match is None or g.confidence > match.confidence:
                    match = g
        sig = self.next_signature(match.signature, match.delta) if match else 0
        st[page] = [offset, sig]
        if len(st) > self.st_entries:
            st.popitem(last=False)
        return self._lookahead(page, offset, sig) if match else []


class Bingo(Prefetcher):
    """Footprint prefetching keyed by long (IP, region) and short (IP, offset) events."""

    name = "bingo"

    def __init__(self, region_blocks: int = 32, history_entries: int = 2048,
                 active_regions: int = 64):
        self.region_blocks = region_blocks
        self.history_entries = history_entries
        self.active_regions = active_regions
        # region -> [trigger_ip, trigger_offset, footprint bits]
        self.active: OrderedDict[int, list[int]] = OrderedDict()
        self.long_events: OrderedDict[tuple[int, int], int] = OrderedDict()
        self.short_events: OrderedDict[tuple[int, int], int] = OrderedDict()

    def _remember(self, table, key, bits):
        table[key] = bits
        table.move_to_end(key)
        if len(table) > self.history_entries:
            table.popitem(last=False)

    def end_generation(self, region: int) -> None:
        gen = self.active.pop(region, None)
        if gen is None:
            return
        ip, off, bits = gen
        self._remember(self.long_events, (ip, region), bits)
        self._remember(self.short_events, (ip, off), bits)

    def lookup(self, ip: int, region: int, offset: int) -> int | None:
        bits = self.long_events.get((ip, region))
        if bits is None:
            bits = self.short_events.get((ip, offset))
        return bits

    def observe(self, ip, block, cycle=0, hit=False, prefetch_hit=False):
        region, off = divmod(block, self.region_blocks)
        gen = self.active.get(region)
        if gen is not None:
            gen[2] |= 1 << off
            return []
        self.active[region] = [ip, off, 1 << off]
        if len(self.active) > self.active_regions:
            self.end_generation(next(iter(self.active)))
        bits = self.lookup(ip, region, off)
        if not bits:
            return []
        base = region * self.region_blocks
        return [base + i for i in range(self.region_blocks) if bits >> i & 1 and i != off]

    def on_evict(self, block):
        region = block // self.region_blocks
        if region in self.active:
            self.end_generation(region)


class IPCP(Prefetcher):
    """IP classifier: global stream, constant stride, complex stride.

    An IP belongs to at most one class at a time, with priority
    GS > CS > CPLX. Constant stride enters at confidence 2 and is kept until
    confidence drains to 0, so a single off-stride access does not
    declassify the IP.
    """

    name = "ipcp"
    NONE, CS, CPLX, GS = "none", "constant", "complex", "global_stream"
    SIG_MASK = 0x7F

    def __init__(self, ip_entries: int = 64, cspt_entries: int = 128, cs_degree: int = 2,
                 cplx_degree: int = 2, gs_degree: int = 4, region_blocks: int = 32,
                 regions: int = 8, dense_fraction: float = 0.75):
        self.ip_entries = ip_entries
        self.cspt_entries = cspt_entries
        self.cs_degree = cs_degree
        self.cplx_degree = cplx_degree
        self.gs_degree = gs_degree
        self.region_blocks = region_blocks
        self.regions = regions
        self.dense_threshold = max(1, int(region_blocks * dense_fraction))
        # slot -> dict(ip, last, stride, conf, sig, cls, gs, direction)
        self.table: list[dict | None] = [None] * ip_entries
        self.cspt: list[list] = [[None, 0] for _ in range(cspt_entries)]
        # region -> [bits, trigger_ip]
        self.region_table: OrderedDict[int, list[int]] = OrderedDict()

    def _next_sig(self, sig, delta):
        return ((sig << 1) ^ (delta & self.SIG_MASK)) & self.SIG_MASK

    def _region_dense(self, ip, block) -> bool:
        region, off = divmod(block, self.region_blocks)
        rt = self.region_table
        if region not in rt:
            rt[region] = [0, ip]
            if len(rt) > self.regions:
                rt.popitem(last=False)
        rt.move_to_end(region)
        r = rt[region]
        r[0] |= 1 << off
        return r[0].bit_count() >= self.dense_threshold

    def classify(self, ip: int) -> str:
        e = self.table[ip % self.ip_entries]
        return e["cls"] if e is not None and e["ip"] == ip else self.NONE

    def observe(self, ip, block, cycle=0, hit=False, prefetch_hit=False):
        dense = self._region_dense(ip, block)
        slot = ip % self.ip_entries
        e = self.table[slot]
        if e is None or e["ip"] != ip:
            self.table[slot] = dict(ip=ip, last=block, stride=None, conf=0, sig=0,
                                    cls=self.NONE, gs=False, direction=1)
            return []
        delta = block - e["last"]
        if delta == 0:
            return []
        e["last"] = block
        e["direction"] = 1 if delta > 0 else -1

        e["stride"], e["conf"] = _stride_update(e["stride"], e["conf"], delta)

        c = self.cspt[e["sig"] % self.cspt_entries]
        if c[0] is None:
            c[0], c[1] = delta, 1
        else:
            c[0], c[1] = _stride_update(c[0], c[1], delta)
        e["sig"] = self._next_sig(e["sig"], delta)

        if dense:
            e["gs"] = True
        elif abs(delta) > self.region_blocks:
            e["gs"] = False

        if e["gs"]:
            e["cls"] = self.GS
        elif e["conf"] >= 2 or (e["cls"] == self.CS and e["conf"] > 0):
            e["cls"] = self.CS
        elif self.cspt[e["sig"] % self.cspt_entries][1] >= 2:
            e["cls"] = self.CPLX
        else:
            e["cls"] = self.NONE

        if e["cls"] == self.GS:
            d = e["direction"]
            return [block + d * k for k in range(1, self.gs_degree + 1)]
        if e["cls"] == self.CS:
            return [block + e["stride"] * k for k in range(1, self.cs_degree + 1)]
        if e["cls"] == self.CPLX:
            out = []
            sig, cur = e["sig"], block
            for _ in range(self.cplx_degree):
                d, conf = self.cspt[sig % self.cspt_entries]
                if d is None or conf < 2:
                    break
                cur += d
                out.append(cur)
                sig = self._next_sig(sig, d)
            return out
        return []


@dataclass
class _BertiPage:
    history: deque = field(default_factory=lambda: deque(maxlen=16))
    timely: dict = field(default_factory=dict)
    covered: dict = field(default_factory=dict)
    searches: int = 0
    latency: int | None = None
    active: int | None = None


class Berti(Prefetcher):
    """Per-page timely-delta prefetching with a cold-page burst.

    Each demand-miss fill asks: which earlier accesses in this page came at
    least one fill latency before the miss? Their deltas to the missing
    offset are timely. A delta that was timely in at least
    ``coverage_threshold`` of the page's searches is active; the best active
    delta drives prefetching. Scores reset every ``history`` searches while
    the last active delta is kept.
    """

    name = "berti"

    def __init__(self, pages: int = 16, history: int = 16, coverage_threshold: float = 0.65):
        self.pages = pages
        self.history_len = history
        self.coverage_threshold = coverage_threshold
        self.table: OrderedDict[int, _BertiPage] = OrderedDict()
        self.learned_delta: int | None = None

    def _page(self, page):
        st = self.table.get(page)
        if st is None:
            st = _BertiPage(history=deque(maxlen=self.history_len))
            self.table[page] = st
            if len(self.table) > self.pages:
                self.table.popitem(last=False)
        else:
            self.table.move_to_end(page)
        return st

    def best_delta(self, st: _BertiPage) -> int | None:
        if st.searches == 0:
            return st.active
        best = None
        for d, n in st.timely.items():
            if n / st.searches >= self.coverage_threshold:
                if best is None or (n, -abs(d)) > (st.timely[best], -abs(best)):
                    best = d
        return best

    def _search(self, st, offset, demand_cycle, latency):
        found = False
        seen = set()
        for o, t in st.history:
            if t >= demand_cycle:
                continue
            d = offset - o
            if d == 0 or d in seen:
                continue
            seen.add(d)
            found = True
            st.covered[d] = st.covered.get(d, 0) + 1
            if t + latency <= demand_cycle:
                st.timely[d] = st.timely.get(d, 0) + 1
        if not found:
            return
        st.searches += 1
        best = self.best_delta(st)
        if best is not None:
            st.active = best
            self.learned_delta = best
        if st.searches >= self.history_len:
            st.timely.clear()
            st.covered.clear()
            st.searches = 0

    def observe(self, ip, block, cycle=0, hit=False, prefetch_hit=False):
        page, offset = divmod(block, PAGE_BLOCKS)
        cold = page not in self.table
        st = self._page(page)
        out = []
        if cold:
            d = self.learned_delta
            if d:
                end = min(PAGE_BLOCKS - 1, offset + d) if d > 0 else max(0, offset + d)
                step = 1 if d > 0 else -1
                out = [page * PAGE_BLOCKS + o for o in range(offset + step, end + step, step)]
        else:
            d = self.best_delta(st)
            if d is not None and 0 <= offset + d < PAGE_BLOCKS:
                out = [block + d]
        if prefetch_hit and st.latency:
            self._search(st, offset, cycle, st.latency)
        st.history.append((offset, cycle))
        return out

    def on_fill(self, block, cycle, latency):
        page, offset = divmod(block, PAGE_BLOCKS)
        st = self.table.get(page)
        if st is None:
            return
        st.latency = latency
        self._search(st, offset, cycle - latency, latency)


PREFETCHERS = {cls.name: cls for cls in (Prefetcher, NextLine, IPStride, SPP, Bingo, IPCP, Berti)}


def make_prefetcher(name: str) -> Prefetcher:
    try:
        cls = PREFETCHERS[name.lower()]
    except KeyError:
        raise ValueError(f"unknown prefetcher {name!r}; choose from {sorted(PREFETCHERS)}") from None
    return cls()
