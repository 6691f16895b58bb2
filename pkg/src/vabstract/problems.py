"""Core domain types and benchmark-file ingestion.

Problem sets are stored as JSON Lines: one record per line with fields
``task_id``, ``prompt`` (module header region), ``test`` (testbench) and an
optional ``canonical_solution``. A separate description file maps ``task_id``
to ``detail_description``. Unknown fields are preserved on round-trip but
otherwise ignored.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from .errors import ProblemParseError, ProblemValidationError

logger = logging.getLogger(__name__)

_PORT_RE = re.compile(r"\b(input|output|inout)\b")


class Classification1(Enum):
    """First-level circuit classification."""

    COMBINATIONAL = "combinational"
    SEQUENTIAL = "sequential"


class Classification2(Enum):
    """Second-level structural classification.

    FSM_IMPLIED is the fixed choice for sequential circuits (no second
    prompt is issued); OTHER is only legal for combinational circuits.
    """

    TRUTH_TABLE = "truth_table"
    BOOLEAN_EXPRESSION = "boolean_expression"
    KMAP = "k-map"
    MUX_MAPPING = "mux_mapping"
    FSM_IMPLIED = "fsm"
    OTHER = "other"


#: Answer vocabulary offered by the second classification prompt.
COMBINATIONAL_C2_TERMS = ("truth_table", "boolean_expression", "k-map",
                          "mux_mapping", "other")


def check_classification_pair(c1: Classification1, c2: Classification2) -> None:
    """Enforce the pairing invariants between the two classification levels."""
    if c2 is Classification2.FSM_IMPLIED and c1 is not Classification1.SEQUENTIAL:
        raise ProblemValidationError("fsm classification requires a sequential circuit")
    if c1 is Classification1.SEQUENTIAL and c2 is not Classification2.FSM_IMPLIED:
        raise ProblemValidationError("sequential circuits always classify as fsm")


@dataclass(frozen=True)
class DesignProblem:
    """One benchmark item: description, module header and testbench."""

    task_id: str
    description: str
    module_header: str
    testbench: str
    canonical_solution: Optional[str] = None
    extra: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if not self.task_id:
            raise ProblemValidationError("task_id must be non-empty")
        if "module" not in self.module_header:
            raise ProblemValidationError(
                f"{self.task_id}: module_header lacks a 'module' declaration")
        if not _PORT_RE.search(self.module_header):
            raise ProblemValidationError(
                f"{self.task_id}: module_header declares no ports")

    @property
    def module_name(self) -> str:
        m = re.search(r"\bmodule\s+([A-Za-z_][A-Za-z0-9_$]*)", self.module_header)
        if m is None:
            raise ProblemValidationError(
                f"{self.task_id}: cannot find module name in header")
        return m.group(1)


class Stage(Enum):
    """Pipeline stages in execution order."""

    CLS1 = "cls1"
    CLS2 = "cls2"
    IR = "ir"
    PSEUDOCODE = "pseudocode"
    FINAL = "final"
    BASELINE = "baseline"
    ONE_SHOT = "one_shot"
    COT = "cot"


STAGE_ORDER = [Stage.CLS1, Stage.CLS2, Stage.IR, Stage.PSEUDOCODE, Stage.FINAL]


@dataclass(frozen=True)
class StageRecord:
    """One backend interaction: rendered prompt, raw response, accounting."""

    stage: Stage
    prompt: str
    response: str
    model_id: str
    input_tokens: int
    output_tokens: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            "stage": self.stage.value,
            "prompt": self.prompt,
            "response": self.response,
            "model_id": self.model_id,
            "input_tokens": self.input_tokens,
            "output_tokens": self.output_tokens,
        }

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "StageRecord":
        return cls(
            stage=Stage(d["stage"]),
            prompt=d["prompt"],
            response=d["response"],
            model_id=d["model_id"],
            input_tokens=int(d["input_tokens"]),
            output_tokens=int(d["output_tokens"]),
        )


@dataclass
class AbstractionTrace:
    """Per-sample record of every stage's prompt, response and artifact."""

    task_id: str
    sample_index: int
    run_index: int = 0
    c1: Optional[Classification1] = None
    c2: Optional[Classification2] = None
    ir: Optional[Any] = None  # IntermediateRep; kept loose to avoid a cycle
    pseudocode: Optional[List[str]] = None
    final_verilog: Optional[str] = None
    stage_records: List[StageRecord] = field(default_factory=list)
    degradations: List[str] = field(default_factory=list)
    failed_stage: Optional[Stage] = None

    def record(self, rec: StageRecord) -> None:
        self.stage_records.append(rec)

    @property
    def total_input_tokens(self) -> int:
        return sum(r.input_tokens for r in self.stage_records)

    @property
    def total_output_tokens(self) -> int:
        return sum(r.output_tokens for r in self.stage_records)

    def abstraction_output_tokens(self) -> int:
        """Output tokens spent on every stage before the final translation."""
        return sum(r.output_tokens for r in self.stage_records
                   if r.stage is not Stage.FINAL)

    def stages_run(self) -> List[Stage]:
        return [r.stage for r in self.stage_records]

    def to_dict(self) -> Dict[str, Any]:
        from .ir import serialize_ir  # local import to avoid a module cycle

        return {
            "task_id": self.task_id,
            "sample_index": self.sample_index,
            "run_index": self.run_index,
            "c1": self.c1.value if self.c1 else None,
            "c2": self.c2.value if self.c2 else None,
            "ir": serialize_ir(self.ir) if self.ir is not None else None,
            "pseudocode": self.pseudocode,
            "final_verilog": self.final_verilog,
            "stage_records": [r.to_dict() for r in self.stage_records],
            "degradations": list(self.degradations),
            "failed_stage": self.failed_stage.value if self.failed_stage else None,
        }

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "AbstractionTrace":
        from .ir import parse_ir

        c2 = Classification2(d["c2"]) if d.get("c2") else None
        ir = None
        if d.get("ir") is not None and c2 is not None:
            ir = parse_ir(json.dumps(d["ir"]), c2)
        return cls(
            task_id=d["task_id"],
            sample_index=int(d["sample_index"]),
            run_index=int(d.get("run_index", 0)),
            c1=Classification1(d["c1"]) if d.get("c1") else None,
            c2=c2,
            ir=ir,
            pseudocode=d.get("pseudocode"),
            final_verilog=d.get("final_verilog"),
            stage_records=[StageRecord.from_dict(r) for r in d.get("stage_records", [])],
            degradations=list(d.get("degradations", [])),
            failed_stage=Stage(d["failed_stage"]) if d.get("failed_stage") else None,
        )


class StrategyName(Enum):
    """Inference strategies the pipeline can execute."""

    BASELINE = "baseline"
    ONE_SHOT = "one_shot"
    COT = "cot"
    COT_IMPLICIT = "cot_implicit"
    ABSTRACTION = "abstraction"


class AbstractionStage(Enum):
    """Stage-set members for ablation configurations."""

    BASE = "base"
    IR = "ir"
    PSEUDOCODE = "pseudocode"


#: The six ablation stage-set configurations, in reporting order.
ABLATION_STAGE_SETS: List[frozenset] = [
    frozenset({AbstractionStage.BASE}),
    frozenset({AbstractionStage.PSEUDOCODE}),
    frozenset({AbstractionStage.BASE, AbstractionStage.PSEUDOCODE}),
    frozenset({AbstractionStage.IR}),
    frozenset({AbstractionStage.BASE, AbstractionStage.IR}),
    frozenset({AbstractionStage.BASE, AbstractionStage.IR,
               AbstractionStage.PSEUDOCODE}),
]


@dataclass(frozen=True)
class StrategyConfig:
    """Which stages run, which model serves each stage, sampling knobs."""

    strategy: StrategyName = StrategyName.ABSTRACTION
    stages: frozenset = frozenset({AbstractionStage.BASE, AbstractionStage.IR,
                                   AbstractionStage.PSEUDOCODE})
    abstraction_model: str = "default"
    translation_model: str = "default"
    samples_per_problem: int = 5
    temperature: float = 0.6
    top_p: float = 0.99
    runs: int = 1

    def __post_init__(self):
        if self.samples_per_problem < 1:
            raise ProblemValidationError("samples_per_problem must be >= 1")
        if self.runs < 1:
            raise ProblemValidationError("runs must be >= 1")
        if not 0.0 <= self.temperature <= 2.0:
            raise ProblemValidationError("temperature out of [0, 2]")
        if not 0.0 < self.top_p <= 1.0:
            raise ProblemValidationError("top_p out of (0, 1]")
        if self.strategy is not StrategyName.ABSTRACTION and \
                self.stages != frozenset():
            object.__setattr__(self, "stages", frozenset())

    @property
    def single_model(self) -> bool:
        return self.abstraction_model == self.translation_model

    def config_hash_fields(self) -> Dict[str, Any]:
        return {
            "strategy": self.strategy.value,
            "stages": sorted(s.value for s in self.stages),
            "abstraction_model": self.abstraction_model,
            "translation_model": self.translation_model,
            "n": self.samples_per_problem,
            "temperature": self.temperature,
            "top_p": self.top_p,
            "runs": self.runs,
        }


def _parse_jsonl(path: Path) -> List[Tuple[int, Dict[str, Any]]]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ProblemParseError(str(path), lineno, f"invalid JSON: {exc}")
            if not isinstance(obj, dict):
                raise ProblemParseError(str(path), lineno, "record is not an object")
            records.append((lineno, obj))
    return records


_CORE_FIELDS = ("task_id", "prompt", "test", "canonical_solution")


def load_problems(problem_file, description_file=None) -> List[DesignProblem]:
    """Load a problem set, preserving input order.

    With a description file, every problem must have a matching
    ``detail_description`` entry; description entries with no problem record
    are skipped with a warning. Without one, the problem's own ``prompt``
    text doubles as the description.
    """
    problem_file = Path(problem_file)
    descriptions: Dict[str, str] = {}
    if description_file is not None:
        for lineno, obj in _parse_jsonl(Path(description_file)):
            tid = obj.get("task_id")
            if tid is None:
                raise ProblemParseError(str(description_file), lineno,
                                        "missing field 'task_id'")
            if "detail_description" not in obj:
                raise ProblemParseError(str(description_file), lineno,
                                        "missing field 'detail_description'")
            descriptions[tid] = obj["detail_description"]

    problems: List[DesignProblem] = []
    seen = set()
    for lineno, obj in _parse_jsonl(problem_file):
        for req in ("task_id", "prompt", "test"):
            if req not in obj:
                raise ProblemParseError(str(problem_file), lineno,
                                        f"missing field '{req}'")
        tid = obj["task_id"]
        if tid in seen:
            raise ProblemValidationError(f"duplicate task_id {tid!r}")
        seen.add(tid)
        if description_file is not None:
            if tid not in descriptions:
                raise ProblemValidationError(
                    f"problem {tid!r} has no entry in the description file")
            description = descriptions[tid]
        else:
            description = obj["prompt"]
        extra = {k: v for k, v in obj.items() if k not in _CORE_FIELDS}
        problems.append(DesignProblem(
            task_id=tid,
            description=description,
            module_header=obj["prompt"],
            testbench=obj["test"],
            canonical_solution=obj.get("canonical_solution"),
            extra=extra,
        ))

    for tid in descriptions:
        if tid not in seen:
            logger.warning("description for unknown task_id %r skipped", tid)
    return problems


def save_problems(problems: List[DesignProblem], problem_file,
                  description_file=None) -> None:
    """Write problems back in the ingestion format (round-trip inverse)."""
    with open(problem_file, "w", encoding="utf-8") as fh:
        for p in problems:
            rec: Dict[str, Any] = {
                "task_id": p.task_id,
                "prompt": p.module_header,
                "test": p.testbench,
            }
            if p.canonical_solution is not None:
                rec["canonical_solution"] = p.canonical_solution
            rec.update(p.extra)
            fh.write(json.dumps(rec) + "\n")
    if description_file is not None:
        with open(description_file, "w", encoding="utf-8") as fh:
            for p in problems:
                fh.write(json.dumps({"task_id": p.task_id,
                                     "detail_description": p.description}) + "\n")
