"""Replacement policies: LRU, NRU, SRRIP, DRRIP, SHiP.

Every policy exposes the same hooks, called by the owning cache level:

* ``on_hit(set, way, ip)`` after a demand hit,
* ``on_fill(set, way, ip)`` after a block is installed,
* ``select_victim(set)`` when the set has no invalid way,
* ``on_evict(set, way)`` just before a valid block leaves the set.

Ties always go to the lowest way index.
"""

from __future__ import annotations

RRPV_MAX = 3
RRPV_LONG = 2
PSEL_MAX = 1023
PSEL_MID = 512
BIMODAL_PERIOD = 32
SHIP_SIG_BITS = 14
SHCT_SIZE = 1 << SHIP_SIG_BITS
SHCT_MAX = 3


class ReplacementPolicy:
    name = "base"

    def __init__(self, sets: int, ways: int):
        self.sets = sets
        self.ways = ways

    def on_hit(self, s: int, way: int, ip: int = 0) -> None:
        raise NotImplementedError

    def on_fill(self, s: int, way: int, ip: int = 0) -> None:
        raise NotImplementedError

    def select_victim(self, s: int) -> int:
        raise NotImplementedError

    def on_evict(self, s: int, way: int) -> None:
        pass


class LRU(ReplacementPolicy):
    name = "lru"

    def __init__(self, sets, ways):
        super().__init__(sets, ways)
        self.stamp = [[0] * ways for _ in range(sets)]
        self.clock = 0

    def _touch(self, s, way):
        self.clock += 1
        self.stamp[s][way] = self.clock

    def on_hit(self, s, way, ip=0):
        self._touch(s, way)

    def on_fill(self, s, way, ip=0):
        self._touch(s, way)

    def select_victim(self, s):
        row = self.stamp[s]
        return row.index(min(row))


class NRU(ReplacementPolicy):
    """One bit per block; 1 means a distant re-reference is predicted."""

    name = "nru"

    def __init__(self, sets, ways):
        super().__init__(sets, ways)
        self.bits = [[1] * ways for _ in range(sets)]

    def on_hit(self, s, way, ip=0):
        self.bits[s][way] = 0

    def on_fill(self, s, way, ip=0):
        self.bits[s][way] = 0

    def select_victim(self, s):
        row = self.bits[s]
        if 1 not in row:
            row[:] = [1] * self.ways
        return row.index(1)


class SRRIP(ReplacementPolicy):
    name = "srrip"

    def __init__(self, sets, ways):
        super().__init__(sets, ways)
        self.rrpv = [[RRPV_MAX] * ways for _ in range(sets)]

    def on_hit(self, s, way, ip=0):
        self.rrpv[s][way] = 0

    def insertion_rrpv(self, s: int, ip: int) -> int:
        return RRPV_LONG

    def on_fill(self, s, way, ip=0):
        self.rrpv[s][way] = self.insertion_rrpv(s, ip)

    def select_victim(self, s):
        row = self.rrpv[s]
        top = max(row)
        if top < RRPV_MAX:
            # equivalent to repeated +1 rounds until some block reaches RRPV_MAX
            bump = RRPV_MAX - top
            for i in range(self.ways):
                row[i] += bump
        return row.index(RRPV_MAX)


class DRRIP(SRRIP):
    """Set dueling between SRRIP and bimodal RRIP insertion.

    Leader sets are spread evenly: with ``spacing = max(2, sets // 32)``,
    sets with ``index % spacing == 0`` are SRRIP leaders and those with
    ``index % spacing == spacing // 2`` are BRRIP leaders (for a 4096-set
    cache: 0 mod 128 and 64 mod 128). A miss in an SRRIP leader pushes
    ``psel`` up, a miss in a BRRIP leader pulls it down; followers use BRRIP
    while ``psel`` is above the midpoint.
    """

    name = "drrip"
    SRRIP_LEADER, BRRIP_LEADER, FOLLOWER = 0, 1, 2

    def __init__(self, sets, ways):
        super().__init__(sets, ways)
        self.psel = PSEL_MID
        self.bimodal_count = 0
        spacing = max(2, sets // 32)
        self.set_kind = []
        for i in range(sets):
            if i % spacing == 0:
                self.set_kind.append(self.SRRIP_LEADER)
            elif i % spacing == spacing // 2:
                self.set_kind.append(self.BRRIP_LEADER)
            else:
                self.set_kind.append(self.FOLLOWER)

    @property
    def followers_use_brrip(self) -> bool:
        return self.psel > PSEL_MID

    def _brrip_rrpv(self) -> int:
        self.bimodal_count = (self.bimodal_count + 1) % BIMODAL_PERIOD
        return RRPV_LONG if self.bimodal_count == 0 else RRPV_MAX

    def insertion_rrpv(self, s, ip):
        kind = self.set_kind[s]
        if kind == self.SRRIP_LEADER:
            self.psel = min(PSEL_MAX, self.psel + 1)
            return RRPV_LONG
        if kind == self.BRRIP_LEADER:
            self.psel = max(0, self.psel - 1)
            return self._brrip_rrpv()
        return self._brrip_rrpv() if self.followers_use_brrip else RRPV_LONG


def ship_signature(ip: int) -> int:
    """14-bit multiplicative (Fibonacci) hash of an instruction pointer."""
    return ((ip * 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF) >> (64 - SHIP_SIG_BITS)


class SHiP(SRRIP):
    """SRRIP whose insertion depth is predicted per requesting-IP signature."""

    name = "ship"

    def __init__(self, sets, ways):
        super().__init__(sets, ways)
        self.shct = [0] * SHCT_SIZE
        self.signature = [[0] * ways for _ in range(sets)]
        self.outcome = [[0] * ways for _ in range(sets)]

    def on_hit(self, s, way, ip=0):
        self.rrpv[s][way] = 0
        self.outcome[s][way] = 1
        sig = self.signature[s][way]
        if self.shct[sig] < SHCT_MAX:
            self.shct[sig] += 1

    def on_fill(self, s, way, ip=0):
        sig = ship_signature(ip)
        self.signature[s][way] = sig
        self.outcome[s][way] = 0
        self.rrpv[s][way] = RRPV_MAX if self.shct[sig] == 0 else RRPV_LONG

    def on_evict(self, s, way):
        if not self.outcome[s][way]:
            sig = self.signature[s][way]
            if self.shct[sig] > 0:
                self.shct[sig] -= 1


POLICIES = {cls.name: cls for cls in (LRU, NRU, SRRIP, DRRIP, SHiP)}


def make_policy(name: str, sets: int, ways: int) -> ReplacementPolicy:
    try:
        cls = POLICIES[name.lower()]
    except KeyError:
        raise ValueError(f"unknown replacement policy {name!r}; choose from {sorted(POLICIES)}") from None
    return cls(sets, ways)
