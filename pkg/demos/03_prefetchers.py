# Prefetchers on three access shapes: sequential, strided, and a repeated spatial footprint.
from cachetrace.cache import CacheConfig, CacheLevel, Memory
from cachetrace.prefetch import PREFETCHERS


def level(prefetcher):
    cfg = CacheConfig("L2C", 512 * 1024, 1024, 8, 32, 32, 32, 12, prefetcher, "lru")
    return CacheLevel(cfg, Memory(200))


streams = {
    "sequential": [0x40000 + i for i in range(4000)],
    "stride 3": [0x80000 + 3 * i for i in range(4000)],
    # the same sparse footprint {0, 5, 9, 17, 30} in 800 different 2KB regions
    "footprint": [0xC0000 + 32 * r + o for r in range(800) for o in (0, 5, 9, 17, 30)],
}

print(f"{'prefetcher':12s}" + "".join(f"{k:>22s}" for k in streams))
for name in PREFETCHERS:
    row = []
    for blocks in streams.values():
        lv = level(name)
        for i, b in enumerate(blocks):
            lv.access(b << 6, i * 500, ip=0x401000)
        s = lv.stats
        row.append(f"{100 * s.misses / s.demand_accesses:6.1f}% ({s.useful_prefetches}/{s.prefetches_issued})")
    print(f"{name:12s}" + "".join(f"{c:>22s}" for c in row))
# columns: demand miss rate, then useful/issued prefetches
