from collections import Counter

from hypothesis import given, settings
from hypothesis import strategies as st

from cachetrace.analysis import classify_bands, export_scatter, summarize_frequencies
from cachetrace.trace import TraceRecord, decode_record, encode_record
from conftest import make_level
from oracles import lru_reference, srrip_reference

u64 = st.integers(1, (1 << 64) - 1)
reg = st.integers(1, 255)

records = st.builds(
    lambda ip, br, taken, dr, sr, dm, sm: TraceRecord(ip, br, br and taken, tuple(dr), tuple(sr),
                                                      tuple(dm), tuple(sm)),
    st.integers(0, (1 << 64) - 1), st.booleans(), st.booleans(),
    st.lists(reg, max_size=2), st.lists(reg, max_size=4),
    st.lists(u64, max_size=2), st.lists(u64, max_size=4),
)


@given(records)
def test_codec_round_trip(r):
    data = encode_record(r)
    assert len(data) == 64
    assert decode_record(data) == r


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 40), min_size=1, max_size=300),
       st.sampled_from(["lru", "srrip"]))
def test_level_agrees_with_reference(blocks, policy):
    level = make_level(4, 2, policy)
    got = [level.access(b << 6, i * 1000)[0] == "hit" for i, b in enumerate(blocks)]
    ref = lru_reference if policy == "lru" else srrip_reference
    assert got == ref(blocks, 4, 2)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 200), max_size=400),
       st.sampled_from(["lru", "nru", "srrip", "drrip", "ship"]),
       st.sampled_from(["none", "next_line", "ip_stride", "spp", "bingo", "ipcp", "berti"]))
def test_level_invariants(blocks, policy, prefetcher):
    level = make_level(4, 4, policy, prefetcher, mshr=4)
    cycle = 0
    for b in blocks:
        _, done = level.access(b << 6, cycle, ip=0x400 + (b % 3))
        cycle = max(cycle + 1, done - 50)
        s = level.stats
        assert s.hits + s.misses == s.demand_accesses
        assert s.useful_prefetches <= s.prefetches_issued
        assert len(level.mshr) <= level.config.mshr_size
    resident = [t for row in level.tags for t in row if t >= 0]
    assert len(resident) == len(set(resident)) == len(level.where)


counts = st.dictionaries(st.integers(1, 1 << 48), st.integers(1, 200), max_size=200)


@given(counts, st.integers(1, 200))
def test_buckets_partition(table, t):
    s = summarize_frequencies(Counter(table), t)
    if t == 1:
        assert s.once + s.other == len(table)
    else:
        assert s.total == len(table)


@given(counts, st.integers(6, 40))
def test_bands_complete_and_disjoint(table, k):
    table = Counter(table)
    bands = classify_bands(table, 1 << k)
    assert sum(b.total_accesses for b in bands) == sum(table.values())
    assert sum(b.address_count for b in bands) == len(table)
    for a, b in zip(bands, bands[1:]):
        assert a.high_address < b.low_address
    for addr in table:
        assert sum(b.low_address <= addr <= b.high_address for b in bands) == 1


@given(st.lists(st.integers(0, 10_000), max_size=200), st.integers(1, 500))
def test_scatter_windows_partition(cycles, width):
    log = [("L1D", c, i + 1) for i, c in enumerate(sorted(cycles))]
    out = []
    for start in range(0, 10_001, width):
        out += export_scatter(log, start, start + width)
    assert out == [(c, a) for _, c, a in log]
