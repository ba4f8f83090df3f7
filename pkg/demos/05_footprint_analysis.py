# Footprint analysis on an L1D access log: counts, buckets, token cadence, memory bands.
import tempfile
from pathlib import Path

import numpy as np

from cachetrace import analysis
from cachetrace.cache import HierarchyConfig
from cachetrace.engine import SimConfig, Simulator
from cachetrace.synth import WorkloadSpec, generate_decoder_trace
from cachetrace.trace import TraceStream

T = 16
spec = WorkloadSpec(tokens=T)
out = Path(tempfile.mkdtemp())
truth = generate_decoder_trace(spec, out / "decoder.trace.xz")

P = spec.token_period_instructions
sim = Simulator(SimConfig(P, (T - 1) * P, HierarchyConfig.preset("desk"), log_levels=("L1D",)))
with TraceStream(out / "decoder.trace.xz") as s:
    report = sim.run(s)
log = sim.access_log()
analysis.write_log(out / "accesses.csv", log)
print(len(log), "logged L1D reads ->", out / "accesses.csv")

table = analysis.count_accesses(log, "L1D")
summary = analysis.summarize_frequencies(table, T)
print(analysis.summary_csv(summary))

# histogram of counts, the same data the paper plots as address vs times accessed
counts = np.array(list(table.values()))
values, freq = np.unique(counts, return_counts=True)
print("count -> addresses:", dict(zip(values.tolist(), freq.tolist())))

# the marker (first weight block) is touched once per token: its cycle stride is the token period
rows = analysis.stride_table_for_address(log, truth.marker_address)
print(analysis.stride_csv(rows[:5]))
print("expected about", round(P / report.ipc), "cycles per token")

for b in analysis.classify_bands(table):
    print(f"band {b.band_id}: {b.low_address:#x}..{b.high_address:#x} "
          f"{b.address_count} addresses, {b.total_accesses} accesses")

# one token's footprint as scatter points
start = rows[3].cycle
pts = analysis.export_scatter(log, start, start + rows[3].delta_to_next)
(out / "token3.csv").write_text(analysis.scatter_csv(pts))
print(len(pts), "points in token 3 ->", out / "token3.csv")
