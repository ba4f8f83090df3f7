"""Command-line entry point: ``simulate``, ``analyze``, ``split``, ``gen``.

Exit status: 0 success, 1 usage, 2 input/format error, 3 simulation error.
Every subcommand writes ``run_manifest.<subcommand>.json`` next to its
outputs. The manifest holds no timestamps, so identical runs produce
identical files.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor

from . import __version__, analysis
from .cache import LEVEL_NAMES, ConfigError, load_config
from .engine import SimConfig, SimulationError, Simulator, TraceTruncatedError
from .synth import SpecError, WorkloadSpec, generate_decoder_trace, write_manifest
from .trace import TraceFormatError, TraceRangeError, TraceStream, split_trace_file

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_SIM = 0, 1, 2, 3
LOGGED_LEVELS = ("L1I", "L1D", "LLC")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _int(text: str) -> int:
    """Integer with optional 0x prefix or underscores."""
    try:
        return int(text.replace("_", ""), 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None


def _window(text: str) -> tuple[int, int]:
    try:
        a, b = text.split(":")
        return _int(a), _int(b)
    except (ValueError, argparse.ArgumentTypeError):
        raise argparse.ArgumentTypeError(f"window must be START:END, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="cachetrace", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    s = sub.add_parser("simulate", help="run a trace through one or more cache hierarchies")
    s.add_argument("trace")
    s.add_argument("--config", action="append", default=None,
                   help="hierarchy JSON file or bundled preset (paper, desk); repeatable")
    s.add_argument("--warmup-instructions", type=_int, required=True)
    s.add_argument("--simulation-instructions", type=_int, required=True)
    s.add_argument("--out-dir", default=".")
    s.add_argument("--log-accesses", action="store_true",
                   help="write a level,cycle,address CSV of demand reads")
    s.add_argument("--log-levels", default=",".join(LOGGED_LEVELS))
    s.add_argument("--jobs", type=_int, default=1)

    a = sub.add_parser("analyze", help="characterize an access log")
    a.add_argument("--log", required=True)
    a.add_argument("--out-dir", default=".")
    a.add_argument("--level", default="L1D", help="level to analyze, or 'all'")
    a.add_argument("--tokens", type=_int, default=128, help="count defining the special bucket")
    a.add_argument("--address", type=_int, help="address for the cycle-stride table")
    a.add_argument("--granularity", type=_int, default=1 << 20)
    a.add_argument("--window", type=_window, help="START:END cycle window for the scatter export")

    sp = sub.add_parser("split", help="split a trace at an instruction index")
    sp.add_argument("trace")
    sp.add_argument("--at", type=_int, required=True)
    sp.add_argument("--prefix", required=True)
    sp.add_argument("--suffix", required=True)

    g = sub.add_parser("gen", help="generate a synthetic decoder trace")
    g.add_argument("--spec", help="workload JSON (defaults apply to missing fields)")
    g.add_argument("--out", required=True)
    g.add_argument("--manifest", required=True)
    g.add_argument("--seed", type=_int)
    return p


def _write_run_manifest(directory, subcommand, config, inputs, outputs, seed=None):
    doc = {
        "subcommand": subcommand,
        "tool_version": __version__,
        "config": config,
        "inputs": inputs,
        "outputs": outputs,
        "seed": seed,
    }
    path = os.path.join(directory or ".", f"run_manifest.{subcommand}.json")
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write(path, text):
    with open(path, "w", newline="") as fh:
        fh.write(text)


# -- simulate -------------------------------------------------------------

def _job_names(configs):
    names, seen = [], {}
    for c in configs:
        stem = os.path.basename(c)
        stem = stem[:-5] if stem.endswith(".json") else stem
        seen[stem] = seen.get(stem, 0) + 1
        names.append(stem if seen[stem] == 1 else f"{stem}-{seen[stem]}")
    return names


def _simulate_job(job):
    """Run one isolated simulation and write its outputs; returns (status, message)."""
    name, hcfg, trace, warmup, sim_n, out_dir, log_levels = job
    cfg = SimConfig(warmup, sim_n, hcfg, log_levels)
    simulator = Simulator(cfg)
    status, message = EXIT_OK, ""
    try:
        with TraceStream(trace) as stream:
            report = simulator.run(stream)
    except TraceTruncatedError as e:
        report, status, message = e.partial, EXIT_SIM, f"{name}: {e} (partial report written)"
    except SimulationError as e:
        return EXIT_SIM, f"{name}: {e}"
    except (OSError, TraceFormatError) as e:
        return EXIT_INPUT, f"{name}: {e}"
    _write(os.path.join(out_dir, f"{name}.report.txt"), report.to_text())
    _write(os.path.join(out_dir, f"{name}.report.csv"), report.to_csv())
    if log_levels:
        analysis.write_log(os.path.join(out_dir, f"{name}.accesses.csv"), simulator.access_log())
    return status, message


def cmd_simulate(args) -> int:
    configs = args.config or ["paper"]
    levels = ()
    if args.log_accesses:
        levels = tuple(x.strip() for x in args.log_levels.split(",") if x.strip())
        bad = [x for x in levels if x not in LEVEL_NAMES]
        if bad:
            raise UsageError(f"unknown log levels {bad}; choose from {list(LEVEL_NAMES)}")
    if args.jobs < 1:
        raise UsageError("--jobs must be >= 1")
    if not os.path.exists(args.trace):
        raise FileNotFoundError(f"trace not found: {args.trace}")
    os.makedirs(args.out_dir, exist_ok=True)
    names = _job_names(configs)
    hcfgs = [load_config(c) for c in configs]
    jobs = [(n, h, args.trace, args.warmup_instructions, args.simulation_instructions,
             args.out_dir, levels) for n, h in zip(names, hcfgs)]
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(args.jobs, len(jobs))) as ex:
            results = list(ex.map(_simulate_job, jobs))
    else:
        results = [_simulate_job(j) for j in jobs]

    outputs = []
    for n in names:
        outputs += [f"{n}.report.txt", f"{n}.report.csv"] + ([f"{n}.accesses.csv"] if levels else [])
    _write_run_manifest(
        args.out_dir, "simulate",
        {
            "warmup_instructions": args.warmup_instructions,
            "simulation_instructions": args.simulation_instructions,
            "log_levels": list(levels),
            "hierarchies": {n: h.to_dict() for n, h in zip(names, hcfgs)},
        },
        [args.trace], outputs,
    )
    status = EXIT_OK
    for code, msg in results:
        if msg:
            print(msg, file=sys.stderr)
        status = max(status, code)
    return status


# -- analyze --------------------------------------------------------------

def cmd_analyze(args) -> int:
    level = None if args.level == "all" else args.level
    if level is not None and level not in LEVEL_NAMES:
        raise UsageError(f"unknown level {level!r}")
    if args.tokens < 1:
        raise UsageError("--tokens must be >= 1")
    log = [e for e in analysis.read_log(args.log) if level is None or e.level == level]
    os.makedirs(args.out_dir, exist_ok=True)
    table = analysis.count_accesses(log)
    out = {
        "frequency.csv": analysis.frequency_csv(table),
        "summary.csv": analysis.summary_csv(analysis.summarize_frequencies(table, args.tokens)),
        "bands.csv": analysis.bands_csv(analysis.classify_bands(table, args.granularity)),
    }
    if args.address is not None:
        out["stride.csv"] = analysis.stride_csv(analysis.stride_table_for_address(log, args.address))
    if args.window is not None:
        out["scatter.csv"] = analysis.scatter_csv(analysis.export_scatter(log, *args.window))
    for name, text in out.items():
        _write(os.path.join(args.out_dir, name), text)
    _write_run_manifest(
        args.out_dir, "analyze",
        {"level": args.level, "tokens": args.tokens, "granularity": args.granularity,
         "address": args.address, "window": list(args.window) if args.window else None},
        [args.log], list(out),
    )
    return EXIT_OK


# -- split / gen ----------------------------------------------------------

def cmd_split(args) -> int:
    try:
        n_pre, n_suf = split_trace_file(args.trace, args.at, args.prefix, args.suffix)
    except TraceRangeError:
        for p in (args.prefix, args.suffix):
            if os.path.exists(p):
                os.remove(p)
        raise
    print(f"prefix {n_pre} instructions -> {args.prefix}")
    print(f"suffix {n_suf} instructions -> {args.suffix}")
    _write_run_manifest(os.path.dirname(args.prefix), "split", {"at": args.at},
                        [args.trace], [args.prefix, args.suffix])
    return EXIT_OK


def cmd_gen(args) -> int:
    fields = {}
    if args.spec:
        with open(args.spec) as fh:
            fields = json.load(fh)
    if args.seed is not None:
        fields["rng_seed"] = args.seed
    spec = WorkloadSpec.from_dict(fields)
    truth = generate_decoder_trace(spec, args.out)
    write_manifest(truth, args.manifest)
    print(f"wrote {truth.total_instructions} instructions to {args.out}")
    _write_run_manifest(os.path.dirname(args.out), "gen", spec.to_dict(),
                        [args.spec] if args.spec else [], [args.out, args.manifest],
                        seed=spec.rng_seed)
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "analyze": cmd_analyze, "split": cmd_split, "gen": cmd_gen}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_usage(sys.stderr)
            return EXIT_USAGE
        return COMMANDS[args.command](args)
    except SystemExit as e:  # --help / --version
        return e.code if isinstance(e.code, int) else EXIT_OK
    except UsageError as e:
        print(e, file=sys.stderr)
        return EXIT_USAGE
    except SimulationError as e:
        print(f"simulation error: {e}", file=sys.stderr)
        return EXIT_SIM
    except (OSError, ConfigError, SpecError, TraceFormatError, TraceRangeError,
            analysis.AnalysisError, ValueError) as e:
        print(f"input error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
