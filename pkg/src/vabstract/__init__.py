"""Staged-abstraction Verilog generation: pipeline, oracle, and scoring.

The package walks a hardware design problem through explicit intermediate
abstractions (circuit classification, a typed JSON representation,
line-by-line pseudocode) before the final Verilog translation, and scores
the result against simulator-backed pass@k metrics. A deterministic
IR-to-Verilog lowering path plus a built-in interpreter make the whole
stack testable without any language model or external simulator.
"""

from .backend import (Backend, BackendHandle, GenerationRequest,
                      GenerationResult, MockBackend, OpenAICompatBackend,
                      RequestTag, ResponseCache, ScriptEntry,
                      mock_from_script, mock_from_script_file,
                      whitespace_token_count)
from .errors import (BackendError, CompositionError, ConfigError,
                     ExpressionError, ExtractionError, IrSchemaError,
                     IrValidationError, LoweringError, ProblemParseError,
                     ProblemValidationError, ReportError,
                     SimulatorMissingError, StructureError, TemplateError,
                     UnsupportedStrategyError, VabstractError,
                     VerilogLeakError)
from .extract import (extract_final_word, extract_json_block,
                      extract_pseudocode, extract_verilog_module)
from .harness import (EvalReport, SampleOutcome, SimulatorConfig,
                      assemble_candidate, builtin_check_sample,
                      builtin_check_traces, check_sample, check_traces,
                      mean_sd, pass_at_k, score_run)
from .ir import (BooleanEqnsIr, FsmIr, FsmOutput, FsmTransition,
                 IntermediateRep, KMapIr, MuxIr, TruthRow, TruthTableIr,
                 ir_json_text, parse_ir, serialize_ir)
from .lower import lower_to_verilog, parse_header_ports
from .pipeline import (BackendRegistry, StageRouting, TraceWriter,
                       config_hash, run_benchmark, run_sample)
from .problems import (ABLATION_STAGE_SETS, AbstractionStage,
                       AbstractionTrace, Classification1, Classification2,
                       DesignProblem, Stage, StageRecord, StrategyConfig,
                       StrategyName, check_classification_pair,
                       load_problems, save_problems)
from .prompts import (RenderedPrompt, render_cls1, render_cls2,
                      render_comparison, render_final, render_ir,
                      render_pseudocode)
from .qm import minimize_kmap, minimum_cover, prime_implicants
from .vsim import SimulatedModule

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
