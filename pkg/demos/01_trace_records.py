# Trace records: the 64-byte instruction format, one record per instruction.
import tempfile
from pathlib import Path

import numpy as np

from cachetrace.trace import (
    RECORD_DTYPE, TraceRecord, TraceStream, decode_record, encode_record,
    records_to_array, split_trace_file, write_trace,
)

# a load from the token-data array, issued by one instruction
r = TraceRecord(ip=0x401000, dest_registers=(3,), src_memory=(0x32E8910,))
raw = encode_record(r)
print(len(raw), "bytes:", raw.hex())
print(decode_record(raw))

# the same layout as a numpy structured dtype, handy for batch work
arr = records_to_array([r] * 4)
print(arr.dtype == RECORD_DTYPE, arr["src_memory"][:, 0])

# write 1000 records to an xz container, read them back in batches
tmp = Path(tempfile.mkdtemp())
recs = [TraceRecord(ip=0x400000 + 4 * i, src_memory=(0x100000 + 64 * i,)) for i in range(1000)]
write_trace(tmp / "demo.trace.xz", recs)
with TraceStream(tmp / "demo.trace.xz") as s:
    print(s.compression, [len(b) for b in s.iter_batches(256)])

# split into a warmup prefix and a measured suffix
n_pre, n_suf = split_trace_file(tmp / "demo.trace.xz", 600, tmp / "pre.trace.xz", tmp / "suf.trace.xz")
print("prefix", n_pre, "suffix", n_suf)
