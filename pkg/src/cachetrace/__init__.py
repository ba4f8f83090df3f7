"""Trace-driven cache hierarchy simulation and memory-footprint analysis."""

__version__ = "0.1.0"

from .cache import CacheConfig, Hierarchy, HierarchyConfig, load_config
from .engine import SimConfig, SimReport, Simulator, run_simulation
from .synth import GroundTruth, WorkloadSpec, generate_decoder_trace
from .trace import TraceRecord, TraceStream, TraceWriter, decode_record, encode_record

__all__ = [
    "CacheConfig", "Hierarchy", "HierarchyConfig", "load_config",
    "SimConfig", "SimReport", "Simulator", "run_simulation",
    "GroundTruth", "WorkloadSpec", "generate_decoder_trace",
    "TraceRecord", "TraceStream", "TraceWriter", "decode_record", "encode_record",
]
