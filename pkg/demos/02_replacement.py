# Replacement policies on a thrashing loop: 2x more blocks than ways, cycled in one set.
from cachetrace.cache import CacheConfig, CacheLevel, Memory
from cachetrace.replacement import DRRIP

SETS, WAYS = 128, 16


def run(policy, sets_used, rounds=40):
    cfg = CacheConfig("LLC", SETS * WAYS * 64, SETS, WAYS, 32, 32, 64, 40, "none", policy)
    llc = CacheLevel(cfg, Memory(200))
    cycle = 0
    for _ in range(rounds):
        for j in range(2 * WAYS):
            for s in sets_used:
                llc.access((s + SETS * j) << 6, cycle)
                cycle += 1000
    return llc


# set 0 is an SRRIP leader, set 2 a BRRIP leader, set 1 follows the winner
kinds = DRRIP(SETS, WAYS).set_kind[:4]
print("set kinds (0=SRRIP leader, 1=BRRIP leader, 2=follower):", kinds)

for policy in ("lru", "nru", "srrip", "drrip", "ship"):
    llc = run(policy, (0, 2, 1))
    s = llc.stats
    extra = f"  psel={llc.policy.psel}" if policy == "drrip" else ""
    print(f"{policy:6s} hits {s.hits:5d}  misses {s.misses:5d}  miss% {100 * s.misses / s.demand_accesses:6.2f}{extra}")
# LRU evicts each block just before its reuse; bimodal insertion keeps part of the loop resident.
