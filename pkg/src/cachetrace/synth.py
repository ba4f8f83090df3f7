"""Synthetic LLM-decoder traces with exact ground truth.

Each token runs the same instruction program:

1. a sequential sweep over the weight region, one load per 64-byte block,
   each followed by ``compute_per_block`` register-only instructions;
2. a walk over a ``token_slice``-element window of the token array
   (24-byte elements), the window advancing ``token_stride`` elements per
   token and wrapping;
3. ``hot_repeats`` loads of each hot-stack slot, in a seeded order;
4. (first token only) the one-shot loads;
5. padding so every token spans exactly ``token_period_instructions``.

The first weight block is the marker: it is touched exactly once per token,
at the first instruction of the token, so its access cycles trace the token
cadence.
"""

from __future__ import annotations

import csv
import json
import os
from collections import Counter
from dataclasses import asdict, dataclass, field

import numpy as np

from .trace import RECORD_DTYPE, TraceWriter

BLOCK = 64
STACK_SLOT = 8
CODE_BASE = 0x400000


class SpecError(ValueError):
    pass


@dataclass
class WorkloadSpec:
    tokens: int = 128
    weight_blocks: int = 1000
    weight_base: int = 0x1900000
    token_array_base: int = 0x32D6544
    token_element_size: int = 24
    token_elements: int = 512
    token_slice: int = 16
    token_stride: int = 4
    hot_stack_addresses: int = 100
    hot_repeats: int = 4
    stack_base: int = 0x7FFC00000000
    one_shot_addresses: int = 5
    compute_per_block: int = 40
    token_period_instructions: int = 42000
    rng_seed: int = 0

    def __post_init__(self):
        self.validate()

    @classmethod
    def from_dict(cls, d: dict) -> "WorkloadSpec":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise SpecError(f"unknown workload fields: {sorted(unknown)}")
        return cls(**{k: int(v, 0) if isinstance(v, str) else v for k, v in d.items()})

    @classmethod
    def from_json(cls, path) -> "WorkloadSpec":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return asdict(self)

    @property
    def instructions_per_token(self) -> int:
        """Instructions of the longest (first) token before padding."""
        return (self.weight_blocks * (1 + self.compute_per_block) + self.token_slice
                + self.hot_stack_addresses * self.hot_repeats + self.one_shot_addresses)

    def regions(self) -> dict[str, tuple[int, int]]:
        """Half-open ``[low, high)`` byte ranges of each data region."""
        stack_len = (self.hot_stack_addresses + self.one_shot_addresses) * STACK_SLOT
        return {
            "weights": (self.weight_base, self.weight_base + self.weight_blocks * BLOCK),
            "token_array": (self.token_array_base,
                            self.token_array_base + self.token_elements * self.token_element_size),
            "stack": (self.stack_base, self.stack_base + stack_len),
        }

    def validate(self) -> None:
        for name in ("tokens", "weight_blocks", "token_elements", "token_element_size"):
            if getattr(self, name) < 1:
                raise SpecError(f"{name} must be >= 1")
        for name in ("token_slice", "token_stride", "hot_stack_addresses", "hot_repeats",
                     "one_shot_addresses", "compute_per_block"):
            if getattr(self, name) < 0:
                raise SpecError(f"{name} must be >= 0")
        if self.token_slice > self.token_elements:
            raise SpecError("token_slice exceeds token_elements")
        if self.weight_base % BLOCK:
            raise SpecError("weight_base must be block aligned")
        for name in ("weight_base", "token_array_base", "stack_base"):
            if getattr(self, name) <= 0:
                raise SpecError(f"{name} must be positive (address 0 means unused)")
        spans = sorted(self.regions().items(), key=lambda kv: kv[1])
        for (n1, (_, hi)), (n2, (lo, _)) in zip(spans, spans[1:]):
            if lo < hi:
                raise SpecError(f"regions {n1} and {n2} overlap")
        if spans[-1][1][1] > 1 << 64:
            raise SpecError("region extends past the 64-bit address space")
        if self.token_period_instructions < self.instructions_per_token:
            raise SpecError(
                f"token_period_instructions {self.token_period_instructions} is below the "
                f"{self.instructions_per_token} instructions emitted per token"
            )


@dataclass
class GroundTruth:
    expected_counts: dict[int, int]
    marker_address: int
    marker_instructions: list[int]
    regions: dict[str, tuple[int, int]]
    params: dict = field(default_factory=dict)

    @property
    def period(self) -> int:
        return self.params["token_period_instructions"]

    @property
    def total_instructions(self) -> int:
        return self.params["tokens"] * self.period

    def bucket_counts(self) -> dict[str, int]:
        t = self.params["tokens"]
        hist = Counter(self.expected_counts.values())
        once, special = hist.get(1, 0), hist.get(t, 0)
        return {"1": once, str(t): special,
                "other": len(self.expected_counts) - once - (special if t != 1 else 0)}


# -- per-token programs ---------------------------------------------------

# IP layout: one static code address per program slot so L1I stays warm.
_IP_WEIGHT = CODE_BASE
_IP_COMPUTE = CODE_BASE + 0x100
_IP_TOKEN = CODE_BASE + 0x1000
_IP_STACK = CODE_BASE + 0x1100
_IP_ONESHOT = CODE_BASE + 0x1200
_IP_PAD = CODE_BASE + 0x1300
_PAD_LOOP = 16


def _token_addresses(spec: WorkloadSpec, t: int, rng: np.random.Generator) -> list[np.ndarray]:
    weights = spec.weight_base + BLOCK * np.arange(spec.weight_blocks, dtype=np.uint64)
    idx = (t * spec.token_stride + np.arange(spec.token_slice)) % spec.token_elements
    tok = spec.token_array_base + spec.token_element_size * idx.astype(np.uint64)
    hot = np.repeat(np.arange(spec.hot_stack_addresses), spec.hot_repeats)
    hot = spec.stack_base + STACK_SLOT * rng.permutation(hot).astype(np.uint64)
    if t == 0:
        shots = np.arange(spec.hot_stack_addresses,
                          spec.hot_stack_addresses + spec.one_shot_addresses)
        once = spec.stack_base + STACK_SLOT * shots.astype(np.uint64)
    else:
        once = np.zeros(0, dtype=np.uint64)
    return [weights, tok, hot, once]


def _token_records(spec: WorkloadSpec, t: int, rng: np.random.Generator) -> np.ndarray:
    weights, tok, hot, once = _token_addresses(spec, t, rng)
    c = spec.compute_per_block
    recs = np.zeros(spec.token_period_instructions, dtype=RECORD_DTYPE)

    stride = 1 + c
    n_w = spec.weight_blocks * stride
    sweep = recs[:n_w]
    sweep["ip"] = np.tile(_IP_COMPUTE + 4 * np.arange(stride, dtype=np.uint64) - 4, spec.weight_blocks)
    sweep["ip"][::stride] = _IP_WEIGHT
    sweep["src_memory"][::stride, 0] = weights
    sweep["dest_registers"][:, 0] = 1
    sweep["src_registers"][:, 0] = 2

    pos = n_w
    for ip, addrs in ((_IP_TOKEN, tok), (_IP_STACK, hot), (_IP_ONESHOT, once)):
        seg = recs[pos:pos + len(addrs)]
        seg["ip"] = ip + 4 * (np.arange(len(addrs), dtype=np.uint64) % _PAD_LOOP)
        seg["src_memory"][:, 0] = addrs
        seg["dest_registers"][:, 0] = 3
        pos += len(addrs)

    pad = recs[pos:]
    pad["ip"] = _IP_PAD + 4 * (np.arange(len(pad), dtype=np.uint64) % _PAD_LOOP)
    pad["dest_registers"][:, 0] = 4
    pad["src_registers"][:, 0] = 4
    return recs


def generate_decoder_trace(spec: WorkloadSpec, out_path) -> GroundTruth:
    """Write the trace to ``out_path`` (xz if it ends in .xz) and return its ground truth."""
    spec.validate()
    rng = np.random.default_rng(spec.rng_seed)
    counts: Counter = Counter()
    with TraceWriter(out_path) as w:
        for t in range(spec.tokens):
            recs = _token_records(spec, t, rng)
            addrs = recs["src_memory"][:, 0]
            counts.update(addrs[addrs != 0].tolist())
            w.write_array(recs)
    P = spec.token_period_instructions
    return GroundTruth(
        expected_counts=dict(sorted(counts.items())),
        marker_address=spec.weight_base,
        marker_instructions=[t * P for t in range(spec.tokens)],
        regions=spec.regions(),
        params=spec.to_dict(),
    )


# -- manifest CSV ---------------------------------------------------------

def write_manifest(truth: GroundTruth, path_or_file) -> None:
    own = isinstance(path_or_file, (str, os.PathLike))
    fh = open(path_or_file, "w", newline="") if own else path_or_file
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["kind", "key", "address", "value"])
        for k, v in truth.params.items():
            w.writerow(["param", k, "", v])
        for name, (lo, hi) in truth.regions.items():
            w.writerow(["region", name, f"{lo:#x}", f"{hi:#x}"])
        for t, instr in enumerate(truth.marker_instructions):
            w.writerow(["marker", t, f"{truth.marker_address:#x}", instr])
        for addr, n in truth.expected_counts.items():
            w.writerow(["count", "", f"{addr:#x}", n])
    finally:
        if own:
            fh.close()


def read_manifest(path_or_file) -> GroundTruth:
    own = isinstance(path_or_file, (str, os.PathLike))
    fh = open(path_or_file, newline="") if own else path_or_file
    try:
        reader = csv.reader(fh)
        if next(reader, None) != ["kind", "key", "address", "value"]:
            raise SpecError("not a workload manifest")
        params, regions, counts, markers = {}, {}, {}, []
        marker_address = 0
        for kind, key, address, value in reader:
            if kind == "param":
                params[key] = int(value)
            elif kind == "region":
                regions[key] = (int(address, 16), int(value, 16))
            elif kind == "marker":
                marker_address = int(address, 16)
                markers.append(int(value))
            elif kind == "count":
                counts[int(address, 16)] = int(value)
            else:
                raise SpecError(f"unknown manifest row kind {kind!r}")
    finally:
        if own:
            fh.close()
    return GroundTruth(counts, marker_address, markers, regions, params)
