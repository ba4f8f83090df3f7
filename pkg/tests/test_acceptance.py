"""Acceptance criteria 1-9.

Each criterion is a function returning ``(ok, detail)``; the pytest wrapper
times it, records a one-line PASS/FAIL summary (printed at the end of the
run by conftest) and fails if the check or the runtime limit fails.
Run directly with ``python tests/test_acceptance.py`` to print the lines
without pytest.
"""

import filecmp
import os
import random
import sys
import tempfile
import time
from pathlib import Path

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from cachetrace.analysis import (  # noqa: E402
    classify_bands,
    count_accesses,
    stride_table_for_address,
    summarize_frequencies,
)
from cachetrace.cache import HierarchyConfig, parse_size  # noqa: E402
from cachetrace.cli import main as cli_main  # noqa: E402
from cachetrace.engine import SimConfig, Simulator  # noqa: E402
from cachetrace.prefetch import PAGE_BLOCKS  # noqa: E402
from cachetrace.replacement import DRRIP, PSEL_MID  # noqa: E402
from cachetrace.synth import WorkloadSpec, generate_decoder_trace  # noqa: E402
from cachetrace.trace import (  # noqa: E402
    TraceRecord,
    TraceStream,
    TraceWriter,
    decode_record,
    encode_record,
    read_trace,
)
from conftest import ACCEPTANCE_LINES, make_level  # noqa: E402
from oracles import lru_reference, srrip_reference  # noqa: E402

_DEFAULT = {}


def default_trace():
    """Generate the default synthetic trace once; returns (path, truth, seconds)."""
    if not _DEFAULT:
        d = tempfile.mkdtemp(prefix="cachetrace-acc-")
        path = Path(d) / "default.trace.xz"
        t0 = time.perf_counter()
        truth = generate_decoder_trace(WorkloadSpec(), path)
        _DEFAULT.update(path=path, truth=truth, seconds=time.perf_counter() - t0)
    return _DEFAULT["path"], _DEFAULT["truth"], _DEFAULT["seconds"]


def _random_record(rng):
    br = rng.random() < 0.3
    return TraceRecord(
        ip=rng.getrandbits(64),
        is_branch=br,
        branch_taken=br and rng.random() < 0.5,
        dest_registers=tuple(rng.randint(1, 255) for _ in range(rng.randint(0, 2))),
        src_registers=tuple(rng.randint(1, 255) for _ in range(rng.randint(0, 4))),
        dest_memory=tuple(rng.randint(1, (1 << 64) - 1) for _ in range(rng.randint(0, 2))),
        src_memory=tuple(rng.randint(1, (1 << 64) - 1) for _ in range(rng.randint(0, 4))),
    )


def criterion_1():
    rng = random.Random(1)
    recs = [_random_record(rng) for _ in range(100_000)]
    blobs = [encode_record(r) for r in recs]
    sizes_ok = all(len(b) == 64 for b in blobs)
    round_trip = all(decode_record(b) == r for b, r in zip(blobs, recs))
    with tempfile.TemporaryDirectory() as d:
        path = Path(d) / "r.trace.xz"
        with TraceWriter(path) as w:
            for r in recs:
                w.write(r)
        xz_ok = path.read_bytes()[:6] == b"\xfd7zXZ\x00" and read_trace(path) == recs
    ok = sizes_ok and round_trip and xz_ok
    return ok, f"1e5 records: 64-byte={sizes_ok} round-trip={round_trip} xz={xz_ok}"


def criterion_2():
    mismatches = 0
    for seed in range(100):
        rng = random.Random(seed)
        blocks = [rng.randrange(64) for _ in range(10_000)]
        for policy, ref in (("lru", lru_reference), ("srrip", srrip_reference)):
            level = make_level(8, 4, policy)
            got = [level.access(b << 6, i * 1000)[0] == "hit" for i, b in enumerate(blocks)]
            mismatches += got != ref(blocks, 8, 4)
    return mismatches == 0, f"100 sequences x 2 policies, 8x4, 1e4 accesses: {mismatches} mismatching"


def _cyclic_same_set(policy, rounds=60, sets=128, ways=16):
    """K = 2*ways blocks per set, cycled in an SRRIP leader, a BRRIP leader and a follower."""
    level = make_level(sets, ways, policy)
    watched = (0, 2, 1) if policy == "drrip" else (0,)
    psel_trace = []
    if policy == "drrip":
        assert [level.policy.set_kind[s] for s in watched] == [
            DRRIP.SRRIP_LEADER, DRRIP.BRRIP_LEADER, DRRIP.FOLLOWER]
        fill = level.policy.on_fill

        def on_fill(s, way, ip=0):
            fill(s, way, ip)
            psel_trace.append(level.policy.psel)

        level.policy.on_fill = on_fill
    cycle = 0
    hits_after_warmup = 0
    for r in range(rounds):
        for j in range(2 * ways):
            for s in watched:
                result, _ = level.access((s + sets * j) << 6, cycle)
                cycle += 1000
                if r > 0 and result == "hit":
                    hits_after_warmup += 1
    return hits_after_warmup, psel_trace


def criterion_3():
    lru_hits, _ = _cyclic_same_set("lru")
    drrip_hits, psel = _cyclic_same_set("drrip")
    # last fill at which followers were not on the BRRIP side
    last_srrip = max((i for i, p in enumerate(psel) if p <= PSEL_MID), default=-1)
    converged_at = last_srrip + 1
    ok = lru_hits == 0 and drrip_hits > 0 and converged_at <= 2000 and len(psel) > 2000
    return ok, (f"LRU hits {lru_hits}, DRRIP hits {drrip_hits}, psel on BRRIP side from fill "
                f"{converged_at} of {len(psel)} (final psel {psel[-1]})")


def criterion_4():
    path, truth, _ = default_trace()
    period = truth.period
    total = truth.total_instructions
    desk = HierarchyConfig.preset("desk")
    miss = {}
    pf = {}
    for name in ("none", "next_line"):
        cfg = SimConfig(period, total - period, desk.with_level("L2C", prefetcher=name))
        with TraceStream(path) as s:
            rep = Simulator(cfg).run(s)
        miss[name] = rep.levels["L2C"].miss_percentage
        pf[name] = (rep.levels["L2C"].prefetches_issued, rep.levels["L2C"].useful_prefetches)
    halving = miss["next_line"] <= 0.5 * miss["none"]

    level = make_level(64, 8, prefetcher="next_line")
    for i in range(10_000):
        level.access((0x10000 + i) << 6, i * 1000)
    acc = level.stats.useful_prefetches / level.stats.prefetches_issued
    ok = halving and acc >= 0.9
    return ok, (f"desk L2C miss {miss['none']:.3f}% -> {miss['next_line']:.3f}% "
                f"(ratio {miss['next_line'] / miss['none']:.3f}); trace useful/issued "
                f"{pf['next_line'][1]}/{pf['next_line'][0]}; sequential useful/issued {acc:.4f}")


def criterion_5():
    base = 0x100000

    def misses(prefetcher):
        level = make_level(64, 12, prefetcher=prefetcher)
        for i in range(10_000):
            level.access((base + 3 * i) << 6, i * 1000, ip=0x401000)
        return level.stats.misses

    none, stride = misses("none"), misses("ip_stride")
    removed = 1 - stride / none
    return removed >= 0.9, f"demand misses {none} -> {stride} ({100 * removed:.2f}% eliminated)"


def criterion_6():
    level = make_level(64, 12, prefetcher="spp", mshr=32)
    spp = level.prefetcher
    observe = spp.observe
    first_access_candidates = {}

    def spy(ip, block, cycle=0, hit=False, prefetch_hit=False):
        page, off = divmod(block, PAGE_BLOCKS)
        new_page = page not in spp.signature_table
        out = observe(ip, block, cycle, hit, prefetch_hit)
        if new_page:
            first_access_candidates[page] = list(out)
        return out

    spp.observe = spy
    start = 0x2000
    later_misses = 0
    for i in range(17 * PAGE_BLOCKS):
        result, _ = level.access((start * PAGE_BLOCKS + i) << 6, i * 1000, ip=0x401000)
        if i >= PAGE_BLOCKS and result != "hit":
            later_misses += 1
    silent = [p for p, c in first_access_candidates.items() if p != start and not c]
    crossings = len(first_access_candidates) - 1
    ok = crossings == 16 and not silent and later_misses == 0
    return ok, (f"{crossings} page crossings, {crossings - len(silent)} issued candidates on the "
                f"first access; misses beyond the first page {later_misses}")


def criterion_7():
    path, truth, _ = default_trace()
    period = truth.period
    cfg = SimConfig(period, truth.total_instructions - period, HierarchyConfig.preset("desk"),
                    log_levels=("L1D",))
    sim = Simulator(cfg)
    with TraceStream(path) as s:
        rep = sim.run(s)
    log = sim.access_log()
    table = count_accesses(log, "L1D")
    summary = summarize_frequencies(table, 128)

    rows = stride_table_for_address(log, truth.marker_address, "L1D")
    deltas = [r.delta_to_next for r in rows[1:-1]]  # the first delta includes cold start
    expected = period / rep.ipc
    worst = max(abs(d - expected) / expected for d in deltas)

    bands = classify_bands(table)
    regions = sorted(truth.regions.values())
    bands_ok = len(bands) == len(regions) == 3 and all(
        lo <= b.low_address and b.high_address < hi for b, (lo, hi) in zip(bands, regions))

    ok = summary.special == 1000 and len(rows) == 128 and worst <= 0.05 and bands_ok
    return ok, (f"128-bucket {summary.special} addresses; {len(deltas)} marker deltas within "
                f"{100 * worst:.2f}% of P/IPC={expected:.0f} cycles (P={period} instructions, "
                f"mean delta {sum(deltas) / len(deltas):.0f}); bands {len(bands)} matching={bands_ok}")


def _pipeline(workdir):
    cwd = os.getcwd()
    os.chdir(workdir)
    try:
        codes = [
            cli_main(["gen", "--out", "t.trace.xz", "--manifest", "manifest.csv", "--seed", "11"]),
            cli_main(["simulate", "--config", "desk", "--warmup-instructions", "42000",
                      "--simulation-instructions", "5334000", "--log-accesses",
                      "--log-levels", "L1D", "--out-dir", "sim", "t.trace.xz"]),
            cli_main(["analyze", "--log", "sim/desk.accesses.csv", "--out-dir", "an",
                      "--tokens", "128", "--address", "0x1900000", "--window", "0:100000"]),
        ]
    finally:
        os.chdir(cwd)
    return codes


def criterion_9():
    with tempfile.TemporaryDirectory() as a, tempfile.TemporaryDirectory() as b:
        codes = _pipeline(a) + _pipeline(b)
        files = sorted(str(p.relative_to(a)) for p in Path(a).rglob("*")
                       if p.is_file() and p.suffix in (".csv", ".json", ".txt"))
        _, mismatch, errors = filecmp.cmpfiles(a, b, files, shallow=False)
        same_trace = filecmp.cmp(Path(a) / "t.trace.xz", Path(b) / "t.trace.xz", shallow=False)
    ok = codes == [0] * 6 and not mismatch and not errors and same_trace and len(files) >= 8
    return ok, f"exit codes {codes}; {len(files)} output files compared, differing {mismatch + errors}"


def criterion_8():
    checks = {
        "cycle stride": 22_092_689 - 13_868_707 == 8_223_982,
        "token array end": 0x32D6544 + 151_936 * 24 == 0x3650944,
        "token array bytes": 151_936 * 24 == 3_646_464,
    }
    table = [("32kB", 64, 8), ("48kB", 64, 12), ("512kB", 1024, 8), ("4096kB", 4096, 16)]
    checks["cache rows"] = all(parse_size(size) == sets * ways * 64 for size, sets, ways in table)
    preset = HierarchyConfig.preset("paper")
    checks["bundled preset"] = [(c.size_bytes, c.sets, c.ways) for c in preset.levels.values()] == [
        (parse_size(s), a, w) for s, a, w in table]
    bad = [k for k, v in checks.items() if not v]
    return not bad, f"{len(checks) - len(bad)}/{len(checks)} arithmetic checks hold {bad or ''}"


LIMITS = {1: 10, 2: 30, 3: 5, 4: 60, 5: 10, 6: 10, 7: 60, 8: 1, 9: 120}
CRITERIA = {n: globals()[f"criterion_{n}"] for n in LIMITS}


def run_criterion(n):
    shared = 0.0
    if n in (4, 7):  # both reuse the default trace; its generation is charged to each
        shared = default_trace()[2]
    t0 = time.perf_counter()
    ok, detail = CRITERIA[n]()
    elapsed = time.perf_counter() - t0 + shared
    fast = elapsed < LIMITS[n]
    verdict = "PASS" if ok and fast else "FAIL"
    line = (f"criterion {n}: {verdict}  ({elapsed:.1f}s / limit {LIMITS[n]}s"
            f"{'' if fast else ', TOO SLOW'})  {detail}")
    ACCEPTANCE_LINES[n] = line
    return ok, fast, line


@pytest.mark.parametrize("n", sorted(LIMITS))
def test_criterion(n):
    ok, fast, line = run_criterion(n)
    print(line)
    assert ok, line
    assert fast, line


if __name__ == "__main__":
    results = [run_criterion(n) for n in sorted(LIMITS)]
    for _, _, line in results:
        print(line)
    sys.exit(0 if all(ok and fast for ok, fast, _ in results) else 1)
