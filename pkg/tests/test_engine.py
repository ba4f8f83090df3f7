import pytest

from cachetrace.cache import HierarchyConfig
from cachetrace.engine import (
    SimConfig,
    SimulationError,
    Simulator,
    TraceTruncatedError,
    compute_report,
    implied_misses,
    run_simulation,
)
from cachetrace.trace import TraceRecord, TraceStream, records_to_array

DESK = HierarchyConfig.preset("desk")


def _stream(records):
    return TraceStream(records_to_array(records).tobytes())


def test_nothing_to_simulate():
    with pytest.raises(SimulationError):
        run_simulation(_stream([]), SimConfig(0, 0, DESK))


def test_register_only_stream_runs_at_ipc_one():
    n = 5000
    recs = [TraceRecord(ip=0x400000, dest_registers=(1,))] * (n + 1)
    rep = run_simulation(_stream(recs), SimConfig(1, n, DESK))
    assert rep.cycles_elapsed == n
    assert rep.ipc == 1.0


def test_cold_instruction_fetch_costs_cycles():
    recs = [TraceRecord(ip=0x400000)] * 10
    sim = Simulator(SimConfig(0, 10, DESK))
    rep = sim.run(_stream(recs))
    assert rep.cycles_elapsed > 10
    # hit latency is pipelined, so the next fetches overlap the miss and merge
    l1i = sim.hierarchy.l1i.stats
    assert l1i.misses - l1i.merged == 1
    assert l1i.merged == DESK.levels["L1I"].latency - 1


def test_counters_zero_at_warmup_boundary():
    recs = [TraceRecord(ip=0x400000 + 4 * (i % 8), src_memory=(0x10000 + 64 * i,)) for i in range(400)]
    sim = Simulator(SimConfig(200, 200, DESK))

    boundary = {}
    orig = sim._start_measurement

    def spy():
        orig()
        boundary.update({n: vars(lv.stats).copy() for n, lv in sim.hierarchy.levels.items()})

    sim._start_measurement = spy
    rep = sim.run(_stream(recs))
    assert all(v == 0 for stats in boundary.values() for v in stats.values())
    assert rep.instructions_retired == 200
    assert rep.levels["L1D"].demand_accesses == 200


def test_warmup_state_is_kept():
    # the same 40 blocks twice (the desk L1D holds 48): warmup pays the misses
    recs = [TraceRecord(ip=0x400000, src_memory=(0x20000 + 64 * (i % 40),)) for i in range(80)]
    rep = run_simulation(_stream(recs), SimConfig(40, 40, DESK))
    assert rep.levels["L1D"].misses == 0
    assert rep.levels["L1D"].hits == 40


def test_sources_before_destinations():
    rec = TraceRecord(ip=0x400000, src_memory=(0x1000,), dest_memory=(0x2000,))
    sim = Simulator(SimConfig(0, 1, DESK, log_levels=("L1D",)))
    sim.run(_stream([rec]))
    # destinations are writes and are not logged; the single read is the source
    assert [a for _, _, a in sim.access_log()] == [0x1000]
    assert sim.hierarchy.l1d.stats.demand_accesses == 2


def test_truncation_carries_partial_report():
    recs = [TraceRecord(ip=0x400000)] * 50
    with pytest.raises(TraceTruncatedError) as exc:
        run_simulation(_stream(recs), SimConfig(10, 100, DESK))
    assert exc.value.partial.instructions_retired == 40


def test_branch_fields_counted_only():
    plain = [TraceRecord(ip=0x400000)] * 100
    branchy = [TraceRecord(ip=0x400000, is_branch=True, branch_taken=bool(i % 2)) for i in range(100)]
    a = run_simulation(_stream(plain), SimConfig(0, 100, DESK))
    b = run_simulation(_stream(branchy), SimConfig(0, 100, DESK))
    assert b.branches == 100
    assert a.cycles_elapsed == b.cycles_elapsed


def test_access_log_covers_warmup_and_is_sorted():
    recs = [TraceRecord(ip=0x400000, src_memory=(0x8000 + 64 * i,)) for i in range(60)]
    sim = Simulator(SimConfig(30, 30, DESK, log_levels=("L1D", "L1I")))
    sim.run(_stream(recs))
    log = sim.access_log()
    l1d = [c for lvl, c, _ in log if lvl == "L1D"]
    assert len(l1d) == 60
    assert l1d == sorted(l1d)
    assert sum(1 for e in log if e[0] == "L1I") == 60


def test_implied_misses_from_table():
    assert implied_misses(10_807_473, 69.884) == 7_552_694


def test_report_percentages():
    rep = compute_report({"L1D": dict(demand_accesses=4, hits=3, misses=1),
                          "L2C": dict(demand_accesses=0, hits=0, misses=0)}, 10, 20)
    assert rep.levels["L1D"].miss_percentage == 25.0
    assert rep.levels["L2C"].miss_percentage == 0.0
    assert rep.levels["L2C"].no_accesses
    assert rep.ipc == 0.5
    assert "25.000" in rep.to_text()
    assert "0.000*" in rep.to_text()


def test_report_rejects_inconsistent_counters():
    with pytest.raises(SimulationError):
        compute_report({"L1D": dict(demand_accesses=4, hits=3, misses=2)}, 1, 1)


def test_prefetcher_never_adds_stall_on_clean_stream():
    # sequential stream with gaps: next-line has no harmful prefetches here
    recs = []
    for i in range(300):
        recs.append(TraceRecord(ip=0x400000, src_memory=(0x100000 + 64 * i,)))
        recs.extend([TraceRecord(ip=0x400004)] * 20)
    base = run_simulation(_stream(recs), SimConfig(0, len(recs), DESK))
    nl = run_simulation(_stream(recs), SimConfig(0, len(recs), DESK.with_level("L1D", prefetcher="next_line")))
    assert nl.cycles_elapsed <= base.cycles_elapsed
    assert nl.levels["L1D"].misses < base.levels["L1D"].misses
