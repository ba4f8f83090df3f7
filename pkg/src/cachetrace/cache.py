"""Set-associative, non-inclusive, write-back cache levels and their wiring.

Timing is latency composition rather than an event queue: a request walks
down the hierarchy at its arrival cycle and each level returns the cycle at
which the data is available. Misses park in an MSHR entry until that cycle;
an entry is filled into the set lazily, the next time the level is touched
at or after its ready cycle. Blocks are 64 bytes everywhere.
"""

from __future__ import annotations

import heapq
import json
import os
import re
from collections import deque
from dataclasses import asdict, dataclass, field
from importlib import resources

from .prefetch import MAX_BLOCK, Prefetcher, make_prefetcher
from .replacement import make_policy

BLOCK_SIZE = 64
BLOCK_BITS = 6
LEVEL_NAMES = ("L1I", "L1D", "L2C", "LLC")

HIT, MISS, MERGED = "hit", "miss", "merged"
_DEMAND, _UPPER_PREFETCH = 0, 1


class ConfigError(ValueError):
    pass


def parse_size(value) -> int:
    """``32768``, ``"32kB"``, ``"4MB"`` -> bytes (binary multiples)."""
    if isinstance(value, int):
        return value
    m = re.fullmatch(r"\s*(\d+)\s*([kKmMgG]?)[iI]?[bB]?\s*", str(value))
    if not m:
        raise ConfigError(f"cannot parse cache size {value!r}")
    scale = {"": 1, "k": 1 << 10, "m": 1 << 20, "g": 1 << 30}[m.group(2).lower()]
    return int(m.group(1)) * scale


@dataclass
class CacheConfig:
    name: str
    size_bytes: int
    sets: int
    ways: int
    rq_size: int
    wq_size: int
    mshr_size: int
    latency: int = 4
    prefetcher: str = "none"
    replacement: str = "lru"

    def __post_init__(self):
        self.size_bytes = parse_size(self.size_bytes)
        if self.sets < 1 or self.ways < 1:
            raise ConfigError(f"{self.name}: sets and ways must be positive")
        if self.size_bytes != self.sets * self.ways * BLOCK_SIZE:
            raise ConfigError(
                f"{self.name}: size {self.size_bytes} != sets {self.sets} x ways {self.ways} x {BLOCK_SIZE}"
            )
        for q in ("rq_size", "wq_size", "mshr_size"):
            if getattr(self, q) < 1:
                raise ConfigError(f"{self.name}: {q} must be >= 1")
        if self.latency < 0:
            raise ConfigError(f"{self.name}: latency must be >= 0")

    @classmethod
    def from_dict(cls, d: dict) -> "CacheConfig":
        d = dict(d)
        if "size" in d:
            d["size_bytes"] = d.pop("size")
        if "hit_latency_cycles" in d:
            d["latency"] = d.pop("hit_latency_cycles")
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown cache fields: {sorted(unknown)}")
        try:
            return cls(**d)
        except TypeError as e:
            raise ConfigError(str(e)) from None


@dataclass
class HierarchyConfig:
    levels: dict[str, CacheConfig]
    memory_latency: int = 200

    def __post_init__(self):
        missing = [n for n in LEVEL_NAMES if n not in self.levels]
        if missing:
            raise ConfigError(f"hierarchy is missing levels {missing}")

    @classmethod
    def from_dict(cls, d: dict) -> "HierarchyConfig":
        levels = {}
        for entry in d.get("levels", []):
            cfg = CacheConfig.from_dict(entry)
            levels[cfg.name] = cfg
        return cls(levels=levels, memory_latency=int(d.get("memory_latency", 200)))

    @classmethod
    def from_json(cls, path) -> "HierarchyConfig":
        with open(path) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as e:
                raise ConfigError(f"{path}: {e}") from None
        return cls.from_dict(data)

    @classmethod
    def preset(cls, name: str = "paper") -> "HierarchyConfig":
        """Bundled configurations: ``paper`` (full size) or ``desk`` (1/16 scale)."""
        text = resources.files("cachetrace.configs").joinpath(f"{name}.json").read_text()
        return cls.from_dict(json.loads(text))

    def to_dict(self) -> dict:
        return {
            "memory_latency": self.memory_latency,
            "levels": [asdict(self.levels[n]) for n in LEVEL_NAMES],
        }

    def with_level(self, name: str, **changes) -> "HierarchyConfig":
        levels = dict(self.levels)
        levels[name] = CacheConfig(**{**asdict(levels[name]), **changes})
        return HierarchyConfig(levels, self.memory_latency)


@dataclass
class LevelStats:
    demand_accesses: int = 0
    hits: int = 0
    misses: int = 0
    merged: int = 0
    prefetches_issued: int = 0
    prefetches_dropped: int = 0
    useful_prefetches: int = 0
    prefetch_fills: int = 0
    upper_prefetch_requests: int = 0
    writebacks_in: int = 0
    writebacks_out: int = 0
    evictions: int = 0
    mshr_stalls: int = 0
    rq_rejections: int = 0
    wq_rejections: int = 0


@dataclass
class MshrEntry:
    block_address: int
    ready_cycle: int
    requested_cycle: int
    is_prefetch: bool
    demand: bool
    dirty: bool = False
    ip: int = 0
    epoch: int = 0
    requestors: list = field(default_factory=list)


@dataclass(frozen=True)
class Eviction:
    address: int
    dirty: bool


class RequestQueue:
    """Occupancy model for a read or write queue.

    Each accepted request holds a slot for ``hold`` cycles. A request that
    finds the queue full is rejected and re-presented when the oldest slot
    frees, which is the cycle returned by ``admit``.
    """

    def __init__(self, size: int, hold: int):
        self.size = size
        self.hold = max(1, hold)
        self.release: deque[int] = deque()
        self.rejections = 0

    def admit(self, cycle: int) -> int:
        rel = self.release
        while rel and rel[0] <= cycle:
            rel.popleft()
        if len(rel) >= self.size:
            self.rejections += 1
            cycle = rel.popleft()
            while rel and rel[0] <= cycle:
                rel.popleft()
        rel.append(cycle + self.hold)
        return cycle


class Memory:
    def __init__(self, latency: int = 200):
        self.latency = latency
        self.reads = 0
        self.writes = 0

    def read(self, block: int, cycle: int, kind: int = _DEMAND, ip: int = 0) -> int:
        self.reads += 1
        return cycle + self.latency

    def writeback(self, block: int, cycle: int) -> None:
        self.writes += 1


class CacheLevel:
    def __init__(self, config: CacheConfig, lower: "CacheLevel | Memory",
                 prefetcher: Prefetcher | None = None, policy=None):
        self.config = config
        self.name = config.name
        self.sets = config.sets
        self.ways = config.ways
        self.latency = config.latency
        self.lower = lower
        self.policy = policy or make_policy(config.replacement, config.sets, config.ways)
        self.prefetcher = prefetcher or make_prefetcher(config.prefetcher)
        self._prefetching = type(self.prefetcher) is not Prefetcher
        self.tags = [[-1] * config.ways for _ in range(config.sets)]
        self.dirty = [[False] * config.ways for _ in range(config.sets)]
        # 0 = not prefetched, otherwise (stats epoch + 1) at prefetch time
        self.pref = [[0] * config.ways for _ in range(config.sets)]
        self.where: dict[int, int] = {}
        self.mshr: dict[int, MshrEntry] = {}
        self._pending: list[tuple[int, int, int]] = []
        self._seq = 0
        self.rq = RequestQueue(config.rq_size, config.latency)
        self.wq = RequestQueue(config.wq_size, config.latency)
        self.stats = LevelStats()
        self.epoch = 0
        self.log: list[tuple[int, int]] | None = None

    def reset_stats(self) -> None:
        """Zero the counters; prefetches issued before now never count as useful."""
        self.stats = LevelStats()
        self.epoch += 1
        self.rq.rejections = self.wq.rejections = 0

    # -- state queries -------------------------------------------------

    def contains(self, address: int) -> bool:
        return (address >> BLOCK_BITS) in self.where

    def set_index(self, address: int) -> int:
        return (address >> BLOCK_BITS) % self.sets

    def resident_blocks(self, s: int) -> list[int]:
        return [b for b in self.tags[s] if b >= 0]

    # -- fills -----------------------------------------------------------

    def drain(self, cycle: int) -> None:
        """Install every in-flight block whose data has arrived by ``cycle``."""
        pending = self._pending
        while pending and pending[0][0] <= cycle:
            ready, _, block = heapq.heappop(pending)
            e = self.mshr.pop(block)
            self.fill(block, ready, prefetch=e.is_prefetch, dirty=e.dirty, ip=e.ip, epoch=e.epoch)
            if e.demand and self._prefetching:
                self.prefetcher.on_fill(block, ready, ready - e.requested_cycle)

    def fill(self, block: int, cycle: int, prefetch: bool = False, dirty: bool = False,
             ip: int = 0, epoch: int | None = None) -> Eviction | None:
        """Install ``block``; returns the eviction it caused, if any."""
        s = block % self.sets
        tags = self.tags[s]
        if block in self.where:
            if dirty:
                self.dirty[s][self.where[block]] = True
            return None
        evicted = None
        try:
            way = tags.index(-1)
        except ValueError:
            way = self.policy.select_victim(s)
            evicted = self._evict(s, way, cycle)
        tags[way] = block
        self.where[block] = way
        self.dirty[s][way] = dirty
        self.pref[s][way] = (self.epoch if epoch is None else epoch) + 1 if prefetch else 0
        if prefetch:
            self.stats.prefetch_fills += 1
        self.policy.on_fill(s, way, ip)
        return evicted

    def _evict(self, s: int, way: int, cycle: int) -> Eviction:
        old = self.tags[s][way]
        was_dirty = self.dirty[s][way]
        self.policy.on_evict(s, way)
        del self.where[old]
        self.tags[s][way] = -1
        self.stats.evictions += 1
        if self._prefetching:
            self.prefetcher.on_evict(old)
        if was_dirty:
            self.stats.writebacks_out += 1
            self.lower.writeback(old, cycle)
        return Eviction(old << BLOCK_BITS, was_dirty)

    def writeback(self, block: int, cycle: int) -> None:
        """Dirty data arriving from the level above (write-allocate, no fetch)."""
        self.stats.writebacks_in += 1
        before = self.wq.rejections
        cycle = self.wq.admit(cycle)
        self.stats.wq_rejections += self.wq.rejections - before
        way = self.where.get(block)
        if way is not None:
            self.dirty[block % self.sets][way] = True
        elif block in self.mshr:
            self.mshr[block].dirty = True
        else:
            self.fill(block, cycle, dirty=True)

    # -- requests --------------------------------------------------------

    def _allocate(self, block, cycle, kind_below, prefetch, demand, dirty, ip) -> int:
        ready = self.lower.read(block, cycle + self.latency, kind_below, ip)
        self.mshr[block] = MshrEntry(block, ready, cycle, prefetch, demand, dirty, ip, self.epoch)
        self._seq += 1
        heapq.heappush(self._pending, (ready, self._seq, block))
        return ready

    def _wait_for_mshr(self, cycle: int) -> int:
        while len(self.mshr) >= self.config.mshr_size:
            self.stats.mshr_stalls += 1
            cycle = max(cycle, self._pending[0][0])
            self.drain(cycle)
        return cycle

    def read(self, block: int, cycle: int, kind: int = _DEMAND, ip: int = 0) -> int:
        """Request from the level above; returns the cycle the data is available."""
        if kind == _DEMAND:
            return self.access(block << BLOCK_BITS, cycle, False, ip)[1]
        return self._upper_prefetch(block, cycle, ip)

    def _upper_prefetch(self, block, cycle, ip):
        if self._pending and self._pending[0][0] <= cycle:
            self.drain(cycle)
        self.stats.upper_prefetch_requests += 1
        before = self.rq.rejections
        cycle = self.rq.admit(cycle)
        self.stats.rq_rejections += self.rq.rejections - before
        if block in self.where:
            return cycle + self.latency
        e = self.mshr.get(block)
        if e is not None:
            return max(e.ready_cycle, cycle + self.latency)
        cycle = self._wait_for_mshr(cycle)
        return self._allocate(block, cycle, _UPPER_PREFETCH, False, False, False, ip)

    def access(self, address: int, cycle: int, is_write: bool = False, ip: int = 0) -> tuple[str, int]:
        """Demand access. Returns ``(hit|miss|merged, completion_cycle)``."""
        if self._pending and self._pending[0][0] <= cycle:
            self.drain(cycle)
        st = self.stats
        rq = self.rq
        if not is_write:
            before = rq.rejections
            cycle = rq.admit(cycle)
            if rq.rejections != before:
                st.rq_rejections += 1
        block = address >> BLOCK_BITS
        st.demand_accesses += 1
        if self.log is not None and not is_write:
            self.log.append((cycle, address))
        way = self.where.get(block)
        prefetch_hit = False
        if way is not None:
            st.hits += 1
            s = block % self.sets
            pf = self.pref[s][way]
            if pf:
                self.pref[s][way] = 0
                prefetch_hit = True
                if pf == self.epoch + 1:
                    st.useful_prefetches += 1
            if is_write:
                self.dirty[s][way] = True
            self.policy.on_hit(s, way, ip)
            result, done = HIT, cycle + self.latency
        else:
            st.misses += 1
            e = self.mshr.get(block)
            if e is not None:
                st.merged += 1
                e.is_prefetch = False
                e.demand = True
                e.dirty |= is_write
                result, done = MERGED, max(e.ready_cycle, cycle + self.latency)
            else:
                if len(self.mshr) >= self.config.mshr_size:
                    # stall: equivalent to the requester retrying every cycle
                    cycle = self._wait_for_mshr(cycle)
                done = self._allocate(block, cycle, _DEMAND, False, True, is_write, ip)
                result = MISS
        if self._prefetching:
            for cand in self.prefetcher.observe(ip, block, cycle, result == HIT, prefetch_hit):
                self.issue_prefetch(cand, cycle, ip, block)
        return result, done

    def issue_prefetch(self, block: int, cycle: int, ip: int = 0, trigger: int | None = None) -> bool:
        """Send a prefetch for ``block`` below and track it in the MSHR.

        Returns False when the candidate is filtered (self, out of range,
        already present or in flight) or the MSHR is full.
        """
        if block == trigger or block < 0 or block > MAX_BLOCK:
            return False
        if block in self.where or block in self.mshr:
            return False
        if len(self.mshr) >= self.config.mshr_size:
            self.stats.prefetches_dropped += 1
            return False
        self.stats.prefetches_issued += 1
        self._allocate(block, cycle, _UPPER_PREFETCH, True, False, False, ip)
        return True


class Hierarchy:
    """L1I and L1D over a shared L2C, then LLC, then memory."""

    def __init__(self, config: HierarchyConfig):
        self.config = config
        self.memory = Memory(config.memory_latency)
        self.llc = CacheLevel(config.levels["LLC"], self.memory)
        self.l2c = CacheLevel(config.levels["L2C"], self.llc)
        self.l1d = CacheLevel(config.levels["L1D"], self.l2c)
        self.l1i = CacheLevel(config.levels["L1I"], self.l2c)
        self.levels = {"L1I": self.l1i, "L1D": self.l1d, "L2C": self.l2c, "LLC": self.llc}

    def reset_stats(self) -> None:
        for lvl in self.levels.values():
            lvl.reset_stats()
        self.memory.reads = self.memory.writes = 0

    def enable_logging(self, names) -> None:
        for n in names:
            if n not in self.levels:
                raise ConfigError(f"cannot log unknown level {n!r}")
            self.levels[n].log = []


def load_config(path_or_name: str | os.PathLike) -> HierarchyConfig:
    """Load a JSON hierarchy file, or a bundled preset by bare name."""
    p = os.fspath(path_or_name)
    if not os.path.exists(p) and p in ("paper", "desk"):
        return HierarchyConfig.preset(p)
    return HierarchyConfig.from_json(p)
