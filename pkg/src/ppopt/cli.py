"""Command-line entry point: ``optimize`` one circuit or ``bench`` a suite.

Metrics are always recomputed by parsing the emitted QASM text again, so the
numbers describe the file that was written rather than the optimizer's own
bookkeeping.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

from .hardware import CouplingGraph, connectivity_audit, hw_optimize
from .qasm import Circuit, QasmError, emit_qasm, parse_qasm, read_qasm
from .search import EngineConfig, optimize_circuit
from .verify import MAX_DENSE_QUBITS, unitary_equal

SCHEMA = 1

EXIT_OK = 0
EXIT_PARSE = 1
EXIT_VERIFY = 2
EXIT_TIMEOUT = 3

SUITES = {
    "small": ["tof_3", "barenco_tof_3", "mod5_4", "tof_4", "tof_5", "barenco_tof_4", "vbe_adder_3"],
}

CSV_COLUMNS = ["circuit", "qubits", "orig_gates", "orig_cx", "opt_gates", "opt_cx",
               "gate_red_pct", "cx_red_pct", "verified", "time_s"]

log = logging.getLogger("ppopt")


@dataclass
class Metrics:
    """Counts of an emitted circuit.

    ``total_gates`` counts a SWAP as the three CNOTs it stands for, matching
    ``weighted_cnot``.
    """

    total_gates: int
    cnot_count: int
    rz_count: int
    swap_count: int
    weighted_cnot: int
    wall_time_s: float = 0.0
    per_block: list = field(default_factory=list)

    @classmethod
    def of_text(cls, text: str, wall_time_s: float = 0.0, per_block=None) -> Metrics:
        return cls.of_circuit(parse_qasm(text), wall_time_s, per_block)

    @classmethod
    def of_circuit(cls, c: Circuit, wall_time_s: float = 0.0, per_block=None) -> Metrics:
        swaps = c.count("swap")
        cnots = c.count("cx")
        return cls(
            total_gates=len(c.gates) + 2 * swaps,
            cnot_count=cnots,
            rz_count=c.count("rz"),
            swap_count=swaps,
            weighted_cnot=cnots + 3 * swaps,
            wall_time_s=round(wall_time_s, 3),
            per_block=list(per_block or []),
        )


def reduction_pct(orig: int, opt: int) -> float:
    if orig == 0:
        return 0.0
    return 100.0 * (orig - opt) / orig


def geo_mean_reduction(pcts: list[float]) -> float:
    """Geometric mean of reductions: 1 - exp(mean(ln(1 - r)))."""
    if not pcts:
        return 0.0
    logs = [math.log(max(1e-12, 1 - p / 100.0)) for p in pcts]
    return 100.0 * (1 - math.exp(sum(logs) / len(logs)))


# -- optimize -----------------------------------------------------------------


@dataclass
class RunResult:
    text: str
    verified: bool | None
    timed_out: bool
    wall_time: float
    per_block: list
    initial: list | None = None
    final: list | None = None


def _config(args) -> EngineConfig:
    return EngineConfig(queue_capacity=args.queue_size, solution_count=args.solutions,
                        per_block_timeout=args.timeout)


def run_one(c: Circuit, cfg: EngineConfig, group_size: int = 1, coupling: str | None = None,
            verify: bool = False) -> RunResult:
    """Optimize ``c`` and optionally check it against the dense oracle."""
    t0 = time.monotonic()
    initial = final = None
    if coupling:
        g = CouplingGraph.parse(coupling)
        rep = hw_optimize(c, g, cfg)
        out = rep.circuit
        initial, final = rep.initial, rep.final
        if not connectivity_audit(out, g):
            raise AssertionError("hardware output uses a non-adjacent pair")
    else:
        rep = optimize_circuit(c, group_size, cfg)
        out = rep.circuit
    wall = time.monotonic() - t0
    text = emit_qasm(out)
    verified = None
    if verify:
        n = max(c.qubit_count, out.qubit_count)
        if n <= MAX_DENSE_QUBITS:
            verified = unitary_equal(c, parse_qasm(text), perm=final, initial_perm=initial)
        else:
            log.warning("%d qubits: too large for the dense check, skipped", n)
    per_block = [asdict(s) for s in rep.block_stats]
    for s in per_block:
        s["wall_time"] = round(s["wall_time"], 4)
    return RunResult(text, verified, rep.timed_out, wall, per_block, initial, final)


def cmd_optimize(args) -> int:
    try:
        c = read_qasm(args.input)
    except (OSError, QasmError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    res = run_one(c, _config(args), args.group_size, args.coupling, args.verify)
    if args.output:
        Path(args.output).write_text(res.text, encoding="utf-8")
        text = Path(args.output).read_text(encoding="utf-8")
    else:
        sys.stdout.write(res.text)
        text = res.text
    m = Metrics.of_text(text, res.wall_time, res.per_block)
    orig = Metrics.of_circuit(c)
    report = {"schema": SCHEMA, "circuit": c.name, "qubits": c.qubit_count,
              "original": {k: v for k, v in asdict(orig).items() if k not in ("wall_time_s", "per_block")},
              **asdict(m), "verified": res.verified, "timed_out": res.timed_out}
    if res.initial is not None:
        report["initial_mapping"] = res.initial
        report["final_mapping"] = res.final
    # metrics go to stdout when the circuit went to a file, else to stderr
    stream = sys.stdout if args.output else sys.stderr
    print(json.dumps(report, indent=None if args.output is None else 2), file=stream)
    if res.verified is False:
        return EXIT_VERIFY
    if res.timed_out:
        return EXIT_TIMEOUT
    return EXIT_OK


# -- bench --------------------------------------------------------------------


def suite_files(name: str) -> list[Path]:
    """Bundled suite by name, or every ``.qasm`` file in a directory."""
    if name in SUITES:
        root = resources.files("ppopt") / "benchmarks"
        return [Path(str(root / f"{b}.qasm")) for b in SUITES[name]]
    path = Path(name)
    if path.is_dir():
        return sorted(path.glob("*.qasm"))
    raise ValueError(f"unknown suite '{name}'")


def _bench_row(path, cfg, group_size, coupling, verify):
    c = read_qasm(path)
    res = run_one(c, cfg, group_size, coupling, verify)
    m = Metrics.of_text(res.text)
    orig = Metrics.of_circuit(c)
    return {
        "circuit": c.name,
        "qubits": c.qubit_count,
        "orig_gates": orig.total_gates,
        "orig_cx": orig.weighted_cnot,
        "opt_gates": m.total_gates,
        "opt_cx": m.weighted_cnot,
        "gate_red_pct": round(reduction_pct(orig.total_gates, m.total_gates), 2),
        "cx_red_pct": round(reduction_pct(orig.weighted_cnot, m.weighted_cnot), 2),
        "verified": "" if res.verified is None else str(res.verified).lower(),
        "time_s": round(res.wall_time, 2),
    }


def bench_rows(files, cfg, group_size=1, coupling=None, verify=True, jobs=1) -> list[dict]:
    args = [(f, cfg, group_size, coupling, verify) for f in files]
    if jobs > 1 and len(args) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_bench_row, *zip(*args)))
    return [_bench_row(*a) for a in args]


def geo_row(rows: list[dict]) -> dict:
    return {
        "circuit": "geo_mean", "qubits": "", "orig_gates": "", "orig_cx": "", "opt_gates": "", "opt_cx": "",
        "gate_red_pct": round(geo_mean_reduction([r["gate_red_pct"] for r in rows]), 2),
        "cx_red_pct": round(geo_mean_reduction([r["cx_red_pct"] for r in rows]), 2),
        "verified": "", "time_s": round(sum(r["time_s"] for r in rows), 2),
    }


def to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow(r)
    if rows:
        w.writerow(geo_row(rows))
    return buf.getvalue()


def to_pretty(rows: list[dict]) -> str:
    table = [CSV_COLUMNS] + [[str(r[k]) for k in CSV_COLUMNS] for r in rows + ([geo_row(rows)] if rows else [])]
    widths = [max(len(row[i]) for row in table) for i in range(len(CSV_COLUMNS))]
    return "\n".join("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in table) + "\n"


def cmd_bench(args) -> int:
    try:
        files = suite_files(args.suite)
        rows = bench_rows(files, _config(args), args.group_size, args.coupling, not args.no_verify, args.jobs)
    except (OSError, QasmError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    text = to_csv(rows)
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
        sys.stdout.write(to_pretty(rows))
    else:
        sys.stdout.write(text)
        sys.stderr.write(to_pretty(rows))
    if any(r["verified"] == "false" for r in rows):
        return EXIT_VERIFY
    return EXIT_OK


# -- argument parsing ---------------------------------------------------------


def _engine_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--group-size", type=int, default=1, help="blocks merged per synthesis unit")
    p.add_argument("--queue-size", type=int, default=10_000, help="priority queue capacity")
    p.add_argument("--solutions", type=int, default=10_000, help="solutions explored per block")
    p.add_argument("--timeout", type=float, default=400.0, help="seconds per block")
    p.add_argument("--coupling", help="file, line:n, grid:RxC or complete:n (enables hardware mode)")
    p.add_argument("--seed", type=int, default=None, help="accepted for reproducibility; the engine is deterministic")
    p.add_argument("-o", "--output", help="output path")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ppopt", description="Phase-polynomial circuit optimizer")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    po = sub.add_parser("optimize", help="optimize one QASM file")
    po.add_argument("input")
    _engine_flags(po)
    po.add_argument("--verify", action="store_true", help="check against the dense unitary (<= 10 qubits)")
    po.set_defaults(func=cmd_optimize)

    pb = sub.add_parser("bench", help="run a benchmark suite and print a CSV report")
    pb.add_argument("--suite", default="small", help="suite name or directory of .qasm files")
    pb.add_argument("--jobs", type=int, default=1, help="circuits optimized in parallel")
    pb.add_argument("--no-verify", action="store_true")
    _engine_flags(pb)
    pb.set_defaults(func=cmd_bench)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    if args.group_size < 1 or args.queue_size < 1 or args.solutions < 1 or args.timeout <= 0:
        print("error: engine limits must be positive", file=sys.stderr)
        return EXIT_PARSE
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
