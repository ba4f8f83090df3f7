"""Trace-driven simulation: an in-order core feeding the cache hierarchy.

Core model: one instruction per cycle. Each instruction fetches from L1I at
its IP, then issues its memory operands to L1D in slot order (sources,
then destinations) in the same cycle. L1 hit latency is pipelined away;
anything slower stalls the core until the slowest operand completes. Branch
fields are counted but have no timing effect.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from operator import itemgetter

from .cache import Hierarchy, HierarchyConfig, LEVEL_NAMES
from .trace import TraceStream


class SimulationError(RuntimeError):
    pass


class TraceTruncatedError(SimulationError):
    """The trace ended before warmup + simulation instructions were retired."""

    def __init__(self, message: str, partial: "SimReport"):
        super().__init__(message)
        self.partial = partial


@dataclass
class SimConfig:
    warmup_instructions: int
    simulation_instructions: int
    hierarchy: HierarchyConfig = field(default_factory=HierarchyConfig.preset)
    log_levels: tuple[str, ...] = ()

    def __post_init__(self):
        if self.warmup_instructions < 0 or self.simulation_instructions < 0:
            raise SimulationError("instruction counts must be non-negative")


@dataclass
class LevelReport:
    name: str
    demand_accesses: int
    hits: int
    misses: int
    prefetches_issued: int = 0
    useful_prefetches: int = 0
    no_accesses: bool = False

    @property
    def miss_percentage(self) -> float:
        if self.demand_accesses == 0:
            return 0.0
        return 100.0 * self.misses / self.demand_accesses


@dataclass
class SimReport:
    levels: dict[str, LevelReport]
    instructions_retired: int
    cycles_elapsed: int
    branches: int = 0
    memory_reads: int = 0
    memory_writes: int = 0

    @property
    def ipc(self) -> float:
        return self.instructions_retired / self.cycles_elapsed if self.cycles_elapsed else 0.0

    def to_text(self) -> str:
        lines = [
            f"instructions  {self.instructions_retired}",
            f"cycles        {self.cycles_elapsed}",
            f"IPC           {self.ipc:.3f}",
            f"branches      {self.branches}",
            "",
            f"{'level':<6}{'accesses':>12}{'hits':>12}{'misses':>12}{'miss %':>10}"
            f"{'pf issued':>12}{'pf useful':>12}",
        ]
        for lv in self.levels.values():
            pct = f"{lv.miss_percentage:.3f}" + ("*" if lv.no_accesses else "")
            lines.append(
                f"{lv.name:<6}{lv.demand_accesses:>12}{lv.hits:>12}{lv.misses:>12}{pct:>10}"
                f"{lv.prefetches_issued:>12}{lv.useful_prefetches:>12}"
            )
        if any(lv.no_accesses for lv in self.levels.values()):
            lines.append("* level saw no demand accesses")
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["level", "ipc", "instructions", "cycles", "demand_accesses", "hits", "misses",
                    "miss_percentage", "prefetches_issued", "useful_prefetches", "no_accesses"])
        for lv in self.levels.values():
            w.writerow([lv.name, f"{self.ipc:.6f}", self.instructions_retired, self.cycles_elapsed,
                        lv.demand_accesses, lv.hits, lv.misses, f"{lv.miss_percentage:.3f}",
                        lv.prefetches_issued, lv.useful_prefetches, int(lv.no_accesses)])
        return out.getvalue()


def compute_report(counters: dict, instructions: int, cycles: int, **extra) -> SimReport:
    """Build a report from raw per-level counters.

    ``counters`` maps a level name to a mapping with ``demand_accesses``,
    ``hits``, ``misses`` and optionally prefetch counts.
    """
    levels = {}
    for name, c in counters.items():
        acc, hits, misses = c["demand_accesses"], c["hits"], c["misses"]
        if hits + misses != acc:
            raise SimulationError(f"{name}: hits {hits} + misses {misses} != accesses {acc}")
        levels[name] = LevelReport(
            name, acc, hits, misses,
            prefetches_issued=c.get("prefetches_issued", 0),
            useful_prefetches=c.get("useful_prefetches", 0),
            no_accesses=acc == 0,
        )
    return SimReport(levels, instructions, cycles, **extra)


def implied_misses(accesses: int, miss_percentage: float) -> int:
    """Miss count implied by a rounded percentage, e.g. from a published table."""
    return round(accesses * miss_percentage / 100)


class Simulator:
    """Holds a hierarchy and core clock; ``run`` streams a trace through it."""

    def __init__(self, config: SimConfig):
        self.config = config
        self.hierarchy = Hierarchy(config.hierarchy)
        self.hierarchy.enable_logging(config.log_levels)
        self.cycle = 0
        self.retired = 0
        self.branches = 0
        self._measure_start_cycle = 0
        self._measure_start_retired = 0

    def report(self) -> SimReport:
        h = self.hierarchy
        counters = {n: vars(h.levels[n].stats) for n in LEVEL_NAMES}
        return compute_report(
            counters,
            self.retired - self._measure_start_retired,
            self.cycle - self._measure_start_cycle,
            branches=self.branches,
            memory_reads=h.memory.reads,
            memory_writes=h.memory.writes,
        )

    def _start_measurement(self):
        self.hierarchy.reset_stats()
        self.branches = 0
        self._measure_start_cycle = self.cycle
        self._measure_start_retired = self.retired

    def run(self, trace: TraceStream) -> SimReport:
        cfg = self.config
        warmup = cfg.warmup_instructions
        total = warmup + cfg.simulation_instructions
        if cfg.simulation_instructions == 0:
            raise SimulationError("nothing to simulate: simulation_instructions is 0")
        h = self.hierarchy
        l1i_access = h.l1i.access
        l1d_access = h.l1d.access
        l1i_lat = h.l1i.latency
        l1d_lat = h.l1d.latency
        if warmup == 0:
            self._start_measurement()

        cycle = self.cycle
        n = self.retired
        branches = 0
        for batch in trace.iter_batches():
            if n >= total:
                break
            take = min(len(batch), total - n)
            batch = batch[:take]
            ips = batch["ip"].tolist()
            srcs = batch["src_memory"].tolist()
            dsts = batch["dest_memory"].tolist()
            brs = batch["is_branch"].tolist()
            for ip, src, dst, br in zip(ips, srcs, dsts, brs):
                done = l1i_access(ip, cycle, False, ip)[1]
                issue = done - l1i_lat if done > cycle + l1i_lat else cycle
                slowest = issue + l1d_lat
                for a in src:
                    if a:
                        c = l1d_access(a, issue, False, ip)[1]
                        if c > slowest:
                            slowest = c
                for a in dst:
                    if a:
                        c = l1d_access(a, issue, True, ip)[1]
                        if c > slowest:
                            slowest = c
                cycle = slowest - l1d_lat + 1
                branches += br
                n += 1
                if n == warmup:
                    self.cycle, self.retired = cycle, n
                    self._start_measurement()
                    branches = 0
            self.cycle, self.retired = cycle, n
            self.branches = branches

        self.cycle, self.retired = cycle, n
        self.branches = branches
        if n < total:
            raise TraceTruncatedError(
                f"trace ended after {n} instructions; warmup+simulation needs {total}",
                self.report(),
            )
        return self.report()

    def access_log(self) -> list[tuple[str, int, int]]:
        """All logged demand reads as ``(level, cycle, address)``, cycle-sorted per level."""
        out = []
        for name in LEVEL_NAMES:
            lvl = self.hierarchy.levels[name]
            if lvl.log is not None:
                out.extend((name, c, a) for c, a in sorted(lvl.log, key=itemgetter(0)))
        return out


def run_simulation(trace: TraceStream, config: SimConfig) -> SimReport:
    return Simulator(config).run(trace)
