"""Instruction trace records: 64-byte codec, streaming reader/writer, splitting.

Record layout (little-endian, 64 bytes)::

    0..7    instruction pointer
    8       is_branch
    9       branch_taken
    10..11  destination register ids (0 = unused)
    12..15  source register ids (0 = unused)
    16..31  destination memory addresses, 2 x u64 (0 = unused)
    32..63  source memory addresses, 4 x u64 (0 = unused)

Register id 0 and address 0 double as "unused", so neither can be
represented as a real operand.
"""

from __future__ import annotations

import io
import lzma
import os
import struct
from dataclasses import dataclass, field
from typing import BinaryIO, Iterable, Iterator

import numpy as np

RECORD_SIZE = 64
NUM_DEST_REGS = 2
NUM_SRC_REGS = 4
NUM_DEST_MEM = 2
NUM_SRC_MEM = 4

XZ_MAGIC = b"\xfd7zXZ\x00"

_STRUCT = struct.Struct("<QBB2B4B2Q4Q")
assert _STRUCT.size == RECORD_SIZE

RECORD_DTYPE = np.dtype(
    [
        ("ip", "<u8"),
        ("is_branch", "u1"),
        ("branch_taken", "u1"),
        ("dest_registers", "u1", (NUM_DEST_REGS,)),
        ("src_registers", "u1", (NUM_SRC_REGS,)),
        ("dest_memory", "<u8", (NUM_DEST_MEM,)),
        ("src_memory", "<u8", (NUM_SRC_MEM,)),
    ]
)
assert RECORD_DTYPE.itemsize == RECORD_SIZE

_U64 = (1 << 64) - 1


class TraceFormatError(ValueError):
    """Malformed record bytes or trace container."""


class CapacityError(ValueError):
    """A record holds more operands than the fixed layout has slots for."""


class TraceRangeError(IndexError):
    """A split point lies beyond the end of the trace."""


@dataclass(frozen=True)
class TraceRecord:
    ip: int = 0
    is_branch: bool = False
    branch_taken: bool = False
    dest_registers: tuple[int, ...] = ()
    src_registers: tuple[int, ...] = ()
    dest_memory: tuple[int, ...] = ()
    src_memory: tuple[int, ...] = ()

    def __post_init__(self):
        for name in ("dest_registers", "src_registers", "dest_memory", "src_memory"):
            value = getattr(self, name)
            if not isinstance(value, tuple):
                object.__setattr__(self, name, tuple(value))

    def validate(self) -> None:
        if not 0 <= self.ip <= _U64:
            raise TraceFormatError(f"ip out of range: {self.ip:#x}")
        if self.branch_taken and not self.is_branch:
            raise TraceFormatError("branch_taken set on a non-branch record")
        for name, slots in (
            ("dest_registers", NUM_DEST_REGS),
            ("src_registers", NUM_SRC_REGS),
            ("dest_memory", NUM_DEST_MEM),
            ("src_memory", NUM_SRC_MEM),
        ):
            values = getattr(self, name)
            if len(values) > slots:
                raise CapacityError(f"{name}: {len(values)} operands, {slots} slots")
            upper = 255 if name.endswith("registers") else _U64
            for v in values:
                if not 1 <= v <= upper:
                    raise TraceFormatError(f"{name}: operand {v:#x} not in [1, {upper:#x}]")

    @property
    def memory_operands(self) -> tuple[int, ...]:
        """Sources first, then destinations, in slot order."""
        return self.src_memory + self.dest_memory


def _pad(values: tuple[int, ...], n: int) -> tuple[int, ...]:
    return values + (0,) * (n - len(values))


def encode_record(record: TraceRecord) -> bytes:
    record.validate()
    return _STRUCT.pack(
        record.ip,
        int(record.is_branch),
        int(record.branch_taken),
        *_pad(record.dest_registers, NUM_DEST_REGS),
        *_pad(record.src_registers, NUM_SRC_REGS),
        *_pad(record.dest_memory, NUM_DEST_MEM),
        *_pad(record.src_memory, NUM_SRC_MEM),
    )


def decode_record(data: bytes) -> TraceRecord:
    if len(data) != RECORD_SIZE:
        raise TraceFormatError(f"expected {RECORD_SIZE} bytes, got {len(data)}")
    f = _STRUCT.unpack(data)
    if f[1] > 1 or f[2] > 1:
        raise TraceFormatError(f"branch flags must be 0/1, got {f[1]}, {f[2]}")
    if f[2] and not f[1]:
        raise TraceFormatError("branch_taken set on a non-branch record")
    return TraceRecord(
        ip=f[0],
        is_branch=bool(f[1]),
        branch_taken=bool(f[2]),
        dest_registers=tuple(v for v in f[3:5] if v),
        src_registers=tuple(v for v in f[5:9] if v),
        dest_memory=tuple(v for v in f[9:11] if v),
        src_memory=tuple(v for v in f[11:15] if v),
    )


def records_to_array(records: Iterable[TraceRecord]) -> np.ndarray:
    """Pack records into a structured array with the on-disk layout."""
    buf = b"".join(encode_record(r) for r in records)
    return np.frombuffer(buf, dtype=RECORD_DTYPE).copy()


def open_trace(path: str | os.PathLike, mode: str = "rb") -> BinaryIO:
    """Open a trace file; xz is detected by magic on read and by suffix on write."""
    path = os.fspath(path)
    if "r" in mode:
        with open(path, "rb") as fh:
            head = fh.read(len(XZ_MAGIC))
        if head == XZ_MAGIC:
            return lzma.open(path, "rb")
        return open(path, "rb")
    if path.endswith(".xz"):
        return lzma.open(path, "wb", preset=1)
    return open(path, "wb")


class TraceStream:
    """Single-consumer stream of records read from a binary source.

    ``source`` is a path, raw bytes, or a binary file object. Compression is
    detected from the xz magic bytes.
    """

    def __init__(self, source, compression: str | None = None):
        self._owned = False
        if isinstance(source, (bytes, bytearray, memoryview)):
            data = bytes(source)
            if compression is None:
                compression = "xz" if data.startswith(XZ_MAGIC) else "none"
            self._fh: BinaryIO = io.BytesIO(data)
            if compression == "xz":
                self._fh = lzma.open(self._fh, "rb")
        elif isinstance(source, (str, os.PathLike)):
            self._fh = open_trace(source)
            self._owned = True
            if compression is None:
                compression = "xz" if isinstance(self._fh, lzma.LZMAFile) else "none"
        else:
            self._fh = source
            compression = compression or "none"
            if compression == "xz":
                self._fh = lzma.open(source, "rb")
        if compression not in ("none", "xz"):
            raise ValueError(f"unknown compression {compression!r}")
        self.compression = compression
        self.records_read = 0

    def close(self) -> None:
        if self._owned:
            self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def read_raw(self, max_records: int) -> bytes:
        """Read up to ``max_records`` whole records as bytes."""
        want = max_records * RECORD_SIZE
        chunks = []
        got = 0
        while got < want:
            chunk = self._fh.read(want - got)
            if not chunk:
                break
            chunks.append(chunk)
            got += len(chunk)
        data = b"".join(chunks)
        if len(data) % RECORD_SIZE:
            raise TraceFormatError(
                f"trace ends with a partial record ({len(data) % RECORD_SIZE} bytes)"
            )
        self.records_read += len(data) // RECORD_SIZE
        return data

    def iter_batches(self, batch_size: int = 65536) -> Iterator[np.ndarray]:
        while True:
            data = self.read_raw(batch_size)
            if not data:
                return
            yield np.frombuffer(data, dtype=RECORD_DTYPE)

    def __iter__(self) -> Iterator[TraceRecord]:
        while True:
            data = self.read_raw(4096)
            if not data:
                return
            for off in range(0, len(data), RECORD_SIZE):
                yield decode_record(data[off : off + RECORD_SIZE])


class TraceWriter:
    """Append records (or structured arrays) to a raw or xz trace file."""

    def __init__(self, target, compression: str | None = None):
        self._owned = isinstance(target, (str, os.PathLike))
        if self._owned:
            path = os.fspath(target)
            if compression is None:
                compression = "xz" if path.endswith(".xz") else "none"
            self._fh = lzma.open(path, "wb", preset=1) if compression == "xz" else open(path, "wb")
        else:
            self._fh = lzma.open(target, "wb", preset=1) if compression == "xz" else target
            self._owned = compression == "xz"
        self.records_written = 0

    def write(self, record: TraceRecord) -> None:
        self._fh.write(encode_record(record))
        self.records_written += 1

    def write_array(self, arr: np.ndarray) -> None:
        if arr.dtype != RECORD_DTYPE:
            raise TraceFormatError(f"array dtype {arr.dtype} is not the record dtype")
        self._fh.write(np.ascontiguousarray(arr).tobytes())
        self.records_written += len(arr)

    def write_raw(self, data: bytes) -> None:
        if len(data) % RECORD_SIZE:
            raise TraceFormatError("raw data is not a whole number of records")
        self._fh.write(data)
        self.records_written += len(data) // RECORD_SIZE

    def close(self) -> None:
        if self._owned:
            self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def write_trace(path, records: Iterable[TraceRecord]) -> int:
    with TraceWriter(path) as w:
        for r in records:
            w.write(r)
        return w.records_written


def read_trace(source) -> list[TraceRecord]:
    with TraceStream(source) as s:
        return list(s)


def split_sizes(total: int, split_at: int) -> tuple[int, int]:
    if split_at < 0:
        raise ValueError("split_at must be non-negative")
    if split_at > total:
        raise TraceRangeError(f"split point {split_at} beyond trace length {total}")
    return split_at, total - split_at


def split_trace(stream: TraceStream, split_at: int) -> tuple[TraceStream, TraceStream]:
    """Split a stream into in-memory prefix and suffix streams."""
    if split_at < 0:
        raise ValueError("split_at must be non-negative")
    prefix = stream.read_raw(split_at)
    if len(prefix) // RECORD_SIZE < split_at:
        raise TraceRangeError(
            f"split point {split_at} beyond trace length {len(prefix) // RECORD_SIZE}"
        )
    rest = []
    while chunk := stream.read_raw(65536):
        rest.append(chunk)
    return TraceStream(prefix, "none"), TraceStream(b"".join(rest), "none")


def split_trace_file(src, split_at: int, prefix_path, suffix_path, batch: int = 1 << 16) -> tuple[int, int]:
    """Stream-split a trace file; each output gets its own container (xz by suffix).

    The prefix is written first, so a range error leaves a partial prefix
    file behind; callers that care should remove it.
    """
    if split_at < 0:
        raise ValueError("split_at must be non-negative")
    n_prefix = n_suffix = 0
    with TraceStream(src) as s, TraceWriter(prefix_path) as pw:
        remaining = split_at
        while remaining:
            data = s.read_raw(min(batch, remaining))
            if not data:
                raise TraceRangeError(
                    f"split point {split_at} beyond trace length {n_prefix}"
                )
            pw.write_raw(data)
            n = len(data) // RECORD_SIZE
            n_prefix += n
            remaining -= n
        with TraceWriter(suffix_path) as sw:
            while data := s.read_raw(batch):
                sw.write_raw(data)
                n_suffix += len(data) // RECORD_SIZE
    return n_prefix, n_suffix
