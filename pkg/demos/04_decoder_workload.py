# A synthetic decoder workload through the desk-scale hierarchy, with and without L2C next-line.
import tempfile
from pathlib import Path

from cachetrace.cache import HierarchyConfig
from cachetrace.engine import SimConfig, run_simulation
from cachetrace.synth import WorkloadSpec, generate_decoder_trace
from cachetrace.trace import TraceStream

spec = WorkloadSpec(tokens=16)  # default shape, fewer tokens to keep the demo short
path = Path(tempfile.mkdtemp()) / "decoder.trace.xz"
truth = generate_decoder_trace(spec, path)
print("instructions", truth.total_instructions, "buckets", truth.bucket_counts())

P = spec.token_period_instructions
desk = HierarchyConfig.preset("desk")  # the paper's cache table scaled by 1/16
for pf in ("none", "next_line", "spp"):
    cfg = SimConfig(P, truth.total_instructions - P, desk.with_level("L2C", prefetcher=pf))
    with TraceStream(path) as s:
        report = run_simulation(s, cfg)
    print(f"--- L2C prefetcher: {pf}")
    print(report.to_text())
