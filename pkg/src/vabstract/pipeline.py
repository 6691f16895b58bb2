"""Orchestration of the staged abstraction pipeline over a problem set.

For each (problem, sample, run) unit the pipeline runs classification, an
optional structure-specific IR, optional pseudocode, and the final Verilog
translation, recording every prompt and response in an AbstractionTrace.
Comparison strategies (baseline, one-shot, chain-of-thought) run their own
shorter flows through the same machinery.
"""

from __future__ import annotations

import hashlib
import json
import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Set, Tuple

from . import extract, prompts
from .backend import BackendHandle, GenerationRequest, RequestTag
from .errors import (BackendError, ExtractionError, IrSchemaError,
                     IrValidationError, UnsupportedStrategyError,
                     VabstractError)
from .ir import parse_ir
from .problems import (AbstractionStage, AbstractionTrace, Classification1,
                       Classification2, COMBINATIONAL_C2_TERMS, DesignProblem,
                       Stage, StageRecord, StrategyConfig, StrategyName,
                       check_classification_pair)

logger = logging.getLogger(__name__)

_ABSTRACTION_STAGES = (Stage.CLS1, Stage.CLS2, Stage.IR, Stage.PSEUDOCODE,
                       Stage.COT)

#: extract_final_word vocabulary for the second classification, including
#: spaced spellings models commonly produce.
_C2_VOCABULARY = COMBINATIONAL_C2_TERMS + ("truth table", "boolean expression",
                                           "kmap", "mux mapping")

_C2_CANONICAL = {
    "truth table": "truth_table",
    "boolean expression": "boolean_expression",
    "kmap": "k-map",
    "mux mapping": "mux_mapping",
}


@dataclass(frozen=True)
class StageRouting:
    """Model id serving each pipeline stage."""

    routes: Dict[Stage, str] = field(hash=False, default_factory=dict)

    def model_for(self, stage: Stage) -> str:
        if stage not in self.routes:
            raise VabstractError(f"no model routed for stage {stage.value!r}")
        return self.routes[stage]

    @classmethod
    def from_config(cls, cfg: StrategyConfig) -> "StageRouting":
        routes = {stage: cfg.abstraction_model for stage in _ABSTRACTION_STAGES}
        for stage in (Stage.FINAL, Stage.BASELINE, Stage.ONE_SHOT):
            routes[stage] = cfg.translation_model
        if cfg.strategy in (StrategyName.BASELINE, StrategyName.ONE_SHOT,
                            StrategyName.COT):
            # single-prompt strategies: everything is the translation model
            routes = {stage: cfg.translation_model for stage in routes}
        return cls(routes=routes)


class BackendRegistry:
    """Maps model ids to backend handles; '*' is the wildcard fallback."""

    def __init__(self, handles: Dict[str, BackendHandle]):
        self.handles = dict(handles)

    def resolve(self, model_id: str) -> BackendHandle:
        if model_id in self.handles:
            return self.handles[model_id]
        if "*" in self.handles:
            return self.handles["*"]
        raise VabstractError(f"no backend registered for model {model_id!r}")

    @classmethod
    def single(cls, handle: BackendHandle) -> "BackendRegistry":
        return cls({"*": handle})


class _SampleContext:
    """Bookkeeping for one (problem, sample, run) pipeline execution."""

    def __init__(self, problem: DesignProblem, cfg: StrategyConfig,
                 routing: StageRouting, registry: BackendRegistry,
                 sample_index: int, run_index: int):
        self.problem = problem
        self.cfg = cfg
        self.routing = routing
        self.registry = registry
        self.trace = AbstractionTrace(task_id=problem.task_id,
                                      sample_index=sample_index,
                                      run_index=run_index)

    def generate(self, stage: Stage, prompt_text: str) -> str:
        model_id = self.routing.model_for(stage)
        request = GenerationRequest(
            model_id=model_id,
            prompt=prompt_text,
            temperature=self.cfg.temperature,
            top_p=self.cfg.top_p,
            tag=RequestTag(task_id=self.problem.task_id, stage=stage,
                           sample_index=self.trace.sample_index,
                           run_index=self.trace.run_index),
        )
        result = self.registry.resolve(model_id).generate(request)
        self.trace.record(StageRecord(
            stage=stage, prompt=prompt_text, response=result.text,
            model_id=result.model_id, input_tokens=result.input_tokens,
            output_tokens=result.output_tokens))
        return result.text

    def degrade(self, note: str) -> None:
        logger.warning("%s sample %d run %d: %s", self.problem.task_id,
                       self.trace.sample_index, self.trace.run_index, note)
        self.trace.degradations.append(note)


_REPROMPT_NOTE = ("\n\nThe previous response could not be parsed. "
                  "Respond again, following the required format exactly.")


def _generate_with_retry(ctx: _SampleContext, stage: Stage, prompt_text: str,
                         parse, failure_note: str):
    """Generate, parse; on a parse failure re-prompt once, then degrade."""
    response = ctx.generate(stage, prompt_text)
    try:
        return parse(response)
    except (ExtractionError, IrSchemaError, IrValidationError) as exc:
        first_error = exc
    response = ctx.generate(stage, prompt_text + _REPROMPT_NOTE)
    try:
        return parse(response)
    except (ExtractionError, IrSchemaError, IrValidationError) as exc:
        ctx.degrade(f"{failure_note}: {first_error}; retry failed: {exc}")
        return None


def _run_classification(ctx: _SampleContext) -> None:
    trace = ctx.trace
    cls1_prompt = prompts.render_cls1(ctx.problem)

    def parse_c1(text: str) -> Classification1:
        word = extract.extract_final_word(text, ("combinational", "sequential"))
        return Classification1(word)

    c1 = _generate_with_retry(ctx, Stage.CLS1, cls1_prompt.text, parse_c1,
                              "classification stage 1 unparseable")
    if c1 is None:
        return
    trace.c1 = c1
    if c1 is Classification1.SEQUENTIAL:
        trace.c2 = Classification2.FSM_IMPLIED
        return
    cls2_prompt = prompts.render_cls2(ctx.problem, c1)
    assert cls2_prompt is not None

    def parse_c2(text: str) -> Classification2:
        term = extract.extract_final_word(text, _C2_VOCABULARY)
        return Classification2(_C2_CANONICAL.get(term, term))

    c2 = _generate_with_retry(ctx, Stage.CLS2, cls2_prompt.text, parse_c2,
                              "classification stage 2 unparseable")
    if c2 is not None:
        check_classification_pair(c1, c2)
        trace.c2 = c2


def _run_ir_stage(ctx: _SampleContext) -> None:
    trace = ctx.trace
    if trace.c1 is None or trace.c2 is None:
        ctx.degrade("ir stage skipped: no classification available")
        return
    if trace.c2 is Classification2.OTHER:
        # no structure fits; skip straight ahead without an IR stage record
        return
    ir_prompt = prompts.render_ir(ctx.problem, trace.c1, trace.c2)

    def parse(text: str):
        raw = extract.extract_json_block(text)
        return parse_ir(raw, trace.c2, strict=False)

    ir = _generate_with_retry(ctx, Stage.IR, ir_prompt.text, parse,
                              "ir stage unparseable")
    if ir is not None:
        trace.ir = ir


def _run_pseudocode_stage(ctx: _SampleContext) -> None:
    trace = ctx.trace
    prompt = prompts.render_pseudocode(ctx.problem, trace.c1, trace.c2,
                                       trace.ir)
    lines = _generate_with_retry(ctx, Stage.PSEUDOCODE, prompt.text,
                                 extract.extract_pseudocode,
                                 "pseudocode stage unparseable")
    if lines is not None:
        trace.pseudocode = lines


def _available_stages(trace: AbstractionTrace, wanted: frozenset) -> frozenset:
    available: Set[AbstractionStage] = set()
    for stage in wanted:
        if stage is AbstractionStage.BASE:
            available.add(stage)
        elif stage is AbstractionStage.IR and trace.ir is not None:
            available.add(stage)
        elif stage is AbstractionStage.PSEUDOCODE and trace.pseudocode is not None:
            available.add(stage)
    return frozenset(available)


def _run_final(ctx: _SampleContext, prompt_text: str) -> None:
    trace = ctx.trace
    response = ctx.generate(Stage.FINAL, prompt_text)
    try:
        trace.final_verilog = extract.extract_verilog_module(
            response, ctx.problem.module_name)
    except ExtractionError as exc:
        ctx.degrade(f"final stage unparseable: {exc}")
        trace.failed_stage = Stage.FINAL


def _run_abstraction_strategy(ctx: _SampleContext) -> None:
    cfg = ctx.cfg
    trace = ctx.trace
    needs_classification = bool(cfg.stages - {AbstractionStage.BASE})
    if needs_classification:
        _run_classification(ctx)
    if AbstractionStage.IR in cfg.stages:
        _run_ir_stage(ctx)
    if AbstractionStage.PSEUDOCODE in cfg.stages:
        _run_pseudocode_stage(ctx)
    stages = _available_stages(trace, cfg.stages)
    if not stages:
        ctx.degrade("all abstraction stages degraded; using the base prompt")
        stages = frozenset({AbstractionStage.BASE})
    final_prompt = prompts.render_final(ctx.problem, trace, stages)
    _run_final(ctx, final_prompt.text)


def _run_comparison_strategy(ctx: _SampleContext) -> None:
    strategy = ctx.cfg.strategy
    if strategy is StrategyName.COT_IMPLICIT:
        reasoning_prompt = prompts.render_comparison(ctx.problem, strategy)
        reasoning = ctx.generate(Stage.COT, reasoning_prompt.text)
        intro = prompts._load_template("final_intro")
        final_prompt = (f"{intro}\n\n{prompts.problem_text(ctx.problem)}\n\n"
                        f"Step-by-step analysis:\n{reasoning.strip()}")
        _run_final(ctx, final_prompt)
        return
    stage = {StrategyName.BASELINE: Stage.BASELINE,
             StrategyName.ONE_SHOT: Stage.ONE_SHOT,
             StrategyName.COT: Stage.COT}.get(strategy)
    if stage is None:
        raise UnsupportedStrategyError(f"strategy {strategy!r} not supported")
    prompt = prompts.render_comparison(ctx.problem, strategy)
    response = ctx.generate(stage, prompt.text)
    try:
        ctx.trace.final_verilog = extract.extract_verilog_module(
            response, ctx.problem.module_name)
    except ExtractionError as exc:
        ctx.degrade(f"comparison response unparseable: {exc}")
        ctx.trace.failed_stage = stage


def run_sample(problem: DesignProblem, cfg: StrategyConfig,
               routing: StageRouting, registry: BackendRegistry,
               sample_index: int, run_index: int = 0) -> AbstractionTrace:
    """Execute one full pipeline pass and return its complete trace.

    Backend hard failures mark the trace failed at the offending stage
    rather than raising; such samples score as non-compiling.
    """
    ctx = _SampleContext(problem, cfg, routing, registry, sample_index,
                         run_index)
    try:
        if cfg.strategy is StrategyName.ABSTRACTION:
            _run_abstraction_strategy(ctx)
        else:
            _run_comparison_strategy(ctx)
    except BackendError as exc:
        running = ctx.trace.stages_run()
        at = running[-1] if running else Stage.CLS1
        logger.error("%s sample %d: backend failure at %s: %s",
                     problem.task_id, sample_index, at.value, exc)
        ctx.trace.failed_stage = at
        ctx.trace.degradations.append(f"backend failure: {exc}")
    return ctx.trace


def config_hash(cfg: StrategyConfig) -> str:
    payload = json.dumps(cfg.config_hash_fields(), sort_keys=True)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


class TraceWriter:
    """Append-serialized JSON Lines persistence for traces."""

    SCHEMA_VERSION = 1

    def __init__(self, path):
        self.path = Path(path)
        self._lock = threading.Lock()

    def append(self, trace: AbstractionTrace, cfg_hash: str) -> None:
        record = {"schema_version": self.SCHEMA_VERSION,
                  "config_hash": cfg_hash}
        record.update(trace.to_dict())
        with self._lock:
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(record) + "\n")

    def load_completed(self, cfg_hash: str) -> Dict[Tuple[str, int, int],
                                                    AbstractionTrace]:
        completed = {}
        if not self.path.exists():
            return completed
        with open(self.path, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                record = json.loads(line)
                if record.get("config_hash") != cfg_hash:
                    continue
                trace = AbstractionTrace.from_dict(record)
                key = (trace.task_id, trace.sample_index, trace.run_index)
                completed[key] = trace
        return completed


def run_benchmark(problems: List[DesignProblem], cfg: StrategyConfig,
                  routing: Optional[StageRouting] = None,
                  registry: Optional[BackendRegistry] = None,
                  trace_file=None, max_workers: int = 1
                  ) -> List[AbstractionTrace]:
    """Run every (run, sample, problem) unit; returns runs*n*|problems| traces.

    Traces are persisted incrementally when ``trace_file`` is given, and
    units already present there (same config hash) are not re-executed.
    Problem-level failures are isolated; the run continues.
    """
    if registry is None:
        raise VabstractError("a backend registry is required")
    if routing is None:
        routing = StageRouting.from_config(cfg)
    cfg_hash = config_hash(cfg)
    writer = TraceWriter(trace_file) if trace_file else None
    completed = writer.load_completed(cfg_hash) if writer else {}

    units = [(run_index, sample_index, problem)
             for run_index in range(cfg.runs)
             for sample_index in range(cfg.samples_per_problem)
             for problem in problems]

    def execute(unit):
        run_index, sample_index, problem = unit
        key = (problem.task_id, sample_index, run_index)
        if key in completed:
            return completed[key]
        trace = run_sample(problem, cfg, routing, registry, sample_index,
                           run_index)
        if writer:
            writer.append(trace, cfg_hash)
        return trace

    if max_workers <= 1:
        results = [execute(u) for u in units]
    else:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            results = list(pool.map(execute, units))
    return results
