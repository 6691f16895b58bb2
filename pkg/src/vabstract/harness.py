"""Simulator-backed scoring: compile/functional checks, pass@k, reports.

Candidates are checked with an external two-step compile+run simulator
invocation (iverilog-compatible by default, fully configurable). Scoring
folds per-sample outcomes into per-run pass@k values and cross-run
mean +/- sample-standard-deviation statistics with token accounting.
"""

from __future__ import annotations

import logging
import math
import re
import shlex
import shutil
import statistics
import subprocess
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

from .errors import ReportError, SimulatorMissingError
from .problems import AbstractionTrace, DesignProblem, Stage, StrategyConfig

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SimulatorConfig:
    """Command templates for the compile and run steps.

    Placeholders: ``{candidate}``, ``{testbench}``, ``{out}``. The run step's
    stdout is matched against ``mismatch_pattern``; functional means exit
    status zero and a zero mismatch count.
    """

    compile_cmd: str = "iverilog -g2012 -o {out} {candidate} {testbench}"
    run_cmd: str = "vvp {out}"
    timeout_s: float = 30.0
    mismatch_pattern: str = r"[Mm]ismatch(?:es|ed samples)?[^0-9]*(\d+)"

    def binaries(self) -> List[str]:
        return [shlex.split(self.compile_cmd)[0], shlex.split(self.run_cmd)[0]]


def require_simulator(sim: SimulatorConfig) -> None:
    """Abort the whole evaluation if the simulator binaries are missing."""
    for binary in sim.binaries():
        if shutil.which(binary) is None and not Path(binary).exists():
            raise SimulatorMissingError(
                f"simulator binary {binary!r} not found on PATH")


@dataclass(frozen=True)
class SampleOutcome:
    task_id: str
    sample_index: int
    run_index: int
    compiled: bool
    functional: bool
    log_excerpt: str = ""
    wall_time_s: float = 0.0
    timed_out: bool = False

    def __post_init__(self):
        if self.functional and not self.compiled:
            raise ReportError("functional outcome requires compilation")


def assemble_candidate(problem: DesignProblem, verilog: str) -> str:
    """Complete a header-less module body with the problem's header."""
    if re.search(r"\bmodule\b", verilog):
        return verilog
    header = problem.module_header.rstrip()
    body = verilog.rstrip()
    if not body.endswith("endmodule"):
        body += "\nendmodule"
    return f"{header}\n{body}\n"


def _format_cmd(template: str, **values: str) -> List[str]:
    return [part.format(**values) for part in shlex.split(template)]


def check_sample(problem: DesignProblem, verilog: str, sim: SimulatorConfig,
                 sample_index: int = 0, run_index: int = 0,
                 keep_scratch_on_failure: bool = False) -> SampleOutcome:
    """Compile and functionally check one candidate against its testbench."""
    require_simulator(sim)
    if not verilog.strip():
        return SampleOutcome(problem.task_id, sample_index, run_index,
                             compiled=False, functional=False,
                             log_excerpt="empty candidate")
    scratch = Path(tempfile.mkdtemp(prefix=f"vabstract_{problem.task_id}_"))
    start = time.monotonic()
    compiled = False
    functional = False
    timed_out = False
    log = ""
    try:
        candidate = scratch / "candidate.v"
        testbench = scratch / "testbench.v"
        out = scratch / "sim.out"
        candidate.write_text(assemble_candidate(problem, verilog),
                             encoding="utf-8")
        testbench.write_text(problem.testbench, encoding="utf-8")
        values = {"candidate": str(candidate), "testbench": str(testbench),
                  "out": str(out)}
        try:
            compile_proc = subprocess.run(
                _format_cmd(sim.compile_cmd, **values),
                capture_output=True, text=True, timeout=sim.timeout_s)
        except subprocess.TimeoutExpired:
            return SampleOutcome(problem.task_id, sample_index, run_index,
                                 compiled=False, functional=False,
                                 log_excerpt="compile timeout",
                                 timed_out=True,
                                 wall_time_s=time.monotonic() - start)
        log = (compile_proc.stdout + compile_proc.stderr)[-2000:]
        compiled = compile_proc.returncode == 0
        if compiled:
            try:
                run_proc = subprocess.run(
                    _format_cmd(sim.run_cmd, **values),
                    capture_output=True, text=True, timeout=sim.timeout_s)
                log = (run_proc.stdout + run_proc.stderr)[-2000:]
                if run_proc.returncode == 0:
                    m = re.search(sim.mismatch_pattern, run_proc.stdout)
                    functional = m is not None and int(m.group(1)) == 0
            except subprocess.TimeoutExpired:
                timed_out = True
                log = "run timeout"
        return SampleOutcome(problem.task_id, sample_index, run_index,
                             compiled=compiled, functional=functional,
                             log_excerpt=log, timed_out=timed_out,
                             wall_time_s=time.monotonic() - start)
    finally:
        failed = not functional
        if failed and keep_scratch_on_failure:
            logger.info("scratch retained at %s", scratch)
        else:
            shutil.rmtree(scratch, ignore_errors=True)


def check_traces(problems: List[DesignProblem],
                 traces: List[AbstractionTrace], sim: SimulatorConfig,
                 max_workers: int = 1,
                 keep_scratch_on_failure: bool = False) -> List[SampleOutcome]:
    """check_sample over every trace; failed traces score as non-compiling."""
    require_simulator(sim)
    by_id = {p.task_id: p for p in problems}

    def check(trace: AbstractionTrace) -> SampleOutcome:
        problem = by_id[trace.task_id]
        if trace.final_verilog is None:
            return SampleOutcome(trace.task_id, trace.sample_index,
                                 trace.run_index, compiled=False,
                                 functional=False,
                                 log_excerpt="no final module extracted")
        return check_sample(problem, trace.final_verilog, sim,
                            trace.sample_index, trace.run_index,
                            keep_scratch_on_failure=keep_scratch_on_failure)

    if max_workers <= 1:
        return [check(t) for t in traces]
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(check, traces))


_RESET_NAMES = ("reset", "rst", "areset", "rst_n", "resetn")


def builtin_check_sample(problem: DesignProblem, verilog: str,
                         sample_index: int = 0, run_index: int = 0,
                         cycles: int = 48, seed: int = 0) -> SampleOutcome:
    """Check a candidate with the built-in interpreter, no subprocesses.

    Compiled means the interpreter accepts the module. Functional means the
    candidate matches the problem's reference solution under exhaustive
    stimulus (combinational, up to 14 input bits) or seeded random stimulus
    (sequential, or wide combinational).
    """
    import random

    from . import vsim

    start = time.monotonic()

    def done(compiled, functional, log):
        return SampleOutcome(problem.task_id, sample_index, run_index,
                             compiled=compiled, functional=functional,
                             log_excerpt=log,
                             wall_time_s=time.monotonic() - start)

    if not verilog.strip():
        return done(False, False, "empty candidate")
    try:
        cand = vsim.SimulatedModule.compile(assemble_candidate(problem, verilog))
    except vsim.VsimError as exc:
        return done(False, False, f"candidate rejected: {exc}")
    if problem.canonical_solution is None:
        return done(True, False, "no reference solution to compare against")
    try:
        ref = vsim.SimulatedModule.compile(
            assemble_candidate(problem, problem.canonical_solution))
    except vsim.VsimError as exc:
        return done(True, False, f"reference not simulatable: {exc}")
    if sorted(cand.inputs()) != sorted(ref.inputs()) or \
            not set(ref.outputs()) <= set(cand.outputs()):
        return done(True, False, "port mismatch against the reference")

    clock = next((c for c in ("clk", "clock") if c in ref.inputs()), None)
    data_inputs = [i for i in ref.inputs() if i != clock]
    widths = {i: ref.width(i) for i in data_inputs}
    rng = random.Random(seed)

    def compare(tag: str) -> Optional[SampleOutcome]:
        for out in ref.outputs():
            if cand.get(out) != ref.get(out):
                return done(True, False,
                            f"{tag}: output {out} = {cand.get(out)}, "
                            f"reference = {ref.get(out)}")
        return None

    if clock is None:
        total_bits = sum(widths.values())
        if total_bits <= 14:
            vectors = []
            for index in range(1 << total_bits):
                vec, shift = {}, 0
                for name in data_inputs:
                    vec[name] = (index >> shift) & ((1 << widths[name]) - 1)
                    shift += widths[name]
                vectors.append(vec)
        else:
            vectors = [{name: rng.getrandbits(widths[name])
                        for name in data_inputs} for _ in range(256)]
        for vec in vectors:
            for module in (cand, ref):
                for name, value in vec.items():
                    module.set(name, value)
                module.settle()
            mismatch = compare(f"inputs {vec}")
            if mismatch:
                return mismatch
    else:
        for cycle in range(cycles):
            vec = {}
            for name in data_inputs:
                if name.lower() in _RESET_NAMES:
                    vec[name] = 1 if cycle < 2 else int(rng.random() < 0.1)
                else:
                    vec[name] = rng.getrandbits(widths[name])
            for module in (cand, ref):
                for name, value in vec.items():
                    module.set(name, value)
                module.posedge(clock)
            mismatch = compare(f"cycle {cycle}")
            if mismatch:
                return mismatch
    return done(True, True, "")


def builtin_check_traces(problems: List[DesignProblem],
                         traces: List[AbstractionTrace],
                         seed: int = 0) -> List[SampleOutcome]:
    """builtin_check_sample over every trace."""
    by_id = {p.task_id: p for p in problems}
    outcomes = []
    for trace in traces:
        if trace.final_verilog is None:
            outcomes.append(SampleOutcome(
                trace.task_id, trace.sample_index, trace.run_index,
                compiled=False, functional=False,
                log_excerpt="no final module extracted"))
            continue
        problem = by_id[trace.task_id]
        outcomes.append(builtin_check_sample(
            problem, trace.final_verilog, trace.sample_index,
            trace.run_index, seed=seed))
    return outcomes


def pass_at_k(n: int, c: int, k: int) -> float:
    """Unbiased estimate that at least one of k draws from n is correct.

    Computed as 1 - C(n-c, k)/C(n, k) in iterative ratio form, which never
    forms large intermediate binomials.
    """
    if not (0 <= c <= n):
        raise ValueError(f"c={c} outside [0, n={n}]")
    if not (1 <= k <= n):
        raise ValueError(f"k={k} outside [1, n={n}]")
    if c == 0:
        return 0.0
    if n - c < k:
        return 1.0
    miss = 1.0
    for i in range(k):
        miss *= (n - c - i) / (n - i)
    return 1.0 - miss


def mean_sd(values: Sequence[float]) -> Tuple[float, Optional[float]]:
    """Arithmetic mean and sample standard deviation (n-1 denominator).

    The deviation is None for a single value, where it is undefined.
    """
    if not values:
        raise ValueError("mean_sd requires at least one value")
    mean = statistics.fmean(values)
    if len(values) < 2:
        return mean, None
    return mean, statistics.stdev(values)


@dataclass
class EvalReport:
    """Aggregated benchmark results plus token accounting."""

    n: int
    k_values: List[int]
    runs: int
    problem_ids: List[str]
    # outcome[run_index][task_id] = (compiled_count, functional_count)
    outcome_matrix: Dict[int, Dict[str, Tuple[int, int]]]
    per_run_compilation: Dict[int, Dict[int, float]]   # k -> run -> value
    per_run_functionality: Dict[int, Dict[int, float]]
    compilation_stats: Dict[int, Tuple[float, Optional[float]]]
    functionality_stats: Dict[int, Tuple[float, Optional[float]]]
    avg_input_tokens: float
    avg_output_tokens: float
    avg_abstraction_output_tokens: float
    per_abstraction_tokens: float
    config_snapshot: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        def stats_dict(stats):
            return {str(k): {"mean": m, "sd": sd} for k, (m, sd) in stats.items()}
        return {
            "n": self.n,
            "k_values": self.k_values,
            "runs": self.runs,
            "problem_ids": self.problem_ids,
            "outcome_matrix": {
                str(run): {tid: {"compiled": comp, "functional": func}
                           for tid, (comp, func) in row.items()}
                for run, row in self.outcome_matrix.items()},
            "per_run_compilation": {
                str(k): {str(r): v for r, v in runs.items()}
                for k, runs in self.per_run_compilation.items()},
            "per_run_functionality": {
                str(k): {str(r): v for r, v in runs.items()}
                for k, runs in self.per_run_functionality.items()},
            "compilation": stats_dict(self.compilation_stats),
            "functionality": stats_dict(self.functionality_stats),
            "tokens": {
                "avg_input": self.avg_input_tokens,
                "avg_output": self.avg_output_tokens,
                "avg_abstraction_output": self.avg_abstraction_output_tokens,
                "per_abstraction": self.per_abstraction_tokens,
            },
            "config": self.config_snapshot,
        }

    def summary_lines(self) -> List[str]:
        lines = [f"problems: {len(self.problem_ids)}  n: {self.n}  "
                 f"runs: {self.runs}"]
        for k in self.k_values:
            cm, csd = self.compilation_stats[k]
            fm, fsd = self.functionality_stats[k]
            csd_text = f" +/- {100 * csd:.1f}" if csd is not None else ""
            fsd_text = f" +/- {100 * fsd:.1f}" if fsd is not None else ""
            lines.append(f"pass@{k}  compilation {100 * cm:.1f}{csd_text}%  "
                         f"functionality {100 * fm:.1f}{fsd_text}%")
        lines.append(f"tokens  avg input {self.avg_input_tokens:.1f}  "
                     f"avg output {self.avg_output_tokens:.1f}  "
                     f"per abstraction {self.per_abstraction_tokens:.1f}")
        return lines


def score_run(traces: List[AbstractionTrace], outcomes: List[SampleOutcome],
              cfg: StrategyConfig,
              k_values: Optional[Sequence[int]] = None) -> EvalReport:
    """Fold traces and outcomes into an EvalReport.

    Per run, pass@k for compilation and functionality is averaged over
    problems; across runs the mean and sample SD are reported. The
    per-abstraction token statistic divides total abstraction-stage output
    tokens by the three abstraction layers.
    """
    n = cfg.samples_per_problem
    runs = cfg.runs
    if k_values is None:
        k_values = sorted({1, n} if n > 1 else {1})
    for k in k_values:
        if not 1 <= k <= n:
            raise ReportError(f"k={k} outside [1, n={n}]")

    outcome_index = {(o.task_id, o.sample_index, o.run_index): o
                     for o in outcomes}
    problem_ids: List[str] = []
    for trace in traces:
        if trace.task_id not in problem_ids:
            problem_ids.append(trace.task_id)
        key = (trace.task_id, trace.sample_index, trace.run_index)
        if key not in outcome_index:
            raise ReportError(f"no outcome for trace {key}")
    expected = len(problem_ids) * n * runs
    if len(traces) != expected:
        raise ReportError(f"expected {expected} traces "
                          f"({len(problem_ids)} problems x n={n} x "
                          f"runs={runs}), got {len(traces)}")

    matrix: Dict[int, Dict[str, Tuple[int, int]]] = {
        run: {tid: (0, 0) for tid in problem_ids} for run in range(runs)}
    for trace in traces:
        o = outcome_index[(trace.task_id, trace.sample_index, trace.run_index)]
        comp, func = matrix[trace.run_index][trace.task_id]
        matrix[trace.run_index][trace.task_id] = (
            comp + int(o.compiled), func + int(o.functional))

    per_run_comp: Dict[int, Dict[int, float]] = {k: {} for k in k_values}
    per_run_func: Dict[int, Dict[int, float]] = {k: {} for k in k_values}
    for k in k_values:
        for run in range(runs):
            comp_vals = [pass_at_k(n, comp, k)
                         for comp, _ in matrix[run].values()]
            func_vals = [pass_at_k(n, func, k)
                         for _, func in matrix[run].values()]
            per_run_comp[k][run] = statistics.fmean(comp_vals) if comp_vals else 0.0
            per_run_func[k][run] = statistics.fmean(func_vals) if func_vals else 0.0

    comp_stats = {k: mean_sd(list(per_run_comp[k].values()))
                  for k in k_values}
    func_stats = {k: mean_sd(list(per_run_func[k].values()))
                  for k in k_values}

    total_traces = len(traces)
    avg_in = sum(t.total_input_tokens for t in traces) / total_traces
    avg_out = sum(t.total_output_tokens for t in traces) / total_traces
    avg_abs = sum(t.abstraction_output_tokens() for t in traces) / total_traces

    return EvalReport(
        n=n, k_values=list(k_values), runs=runs, problem_ids=problem_ids,
        outcome_matrix=matrix,
        per_run_compilation=per_run_comp,
        per_run_functionality=per_run_func,
        compilation_stats=comp_stats,
        functionality_stats=func_stats,
        avg_input_tokens=avg_in,
        avg_output_tokens=avg_out,
        avg_abstraction_output_tokens=avg_abs,
        per_abstraction_tokens=avg_abs / 3.0,
        config_snapshot=cfg.config_hash_fields(),
    )
