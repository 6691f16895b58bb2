"""Command-line entry point: benchmark runs, ablations, and IR tools.

One JSON config file drives everything; any key can be overridden with a
flag of the same dotted name (``--sampling.n 3``) or one of the short
aliases. Sample failures are recorded as data; only environment problems
(bad config, missing simulator) produce a nonzero exit.
"""

from __future__ import annotations

import argparse
import copy
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from . import harness, ir as ir_mod, lower, pipeline, qm
from .backend import (BackendHandle, OpenAICompatBackend, ResponseCache,
                      mock_from_script_file)
from .errors import (ConfigError, IrSchemaError, IrValidationError,
                     SimulatorMissingError, VabstractError)
from .problems import (ABLATION_STAGE_SETS, AbstractionStage, Classification2,
                       StrategyConfig, StrategyName, load_problems)

logger = logging.getLogger(__name__)

DEFAULT_CONFIG: Dict[str, Dict[str, Any]] = {
    "models": {
        "abstraction_model": "default",
        "translation_model": "default",
        "base_url": None,
        "api_key_env": "OPENAI_API_KEY",
        "retry_cap": 3,
        "cache_dir": None,
        "mock_script": None,
    },
    "strategy": {
        "name": "abstraction",
        "stages": ["base", "ir", "pseudocode"],
    },
    "sampling": {
        "temperature": 0.6,
        "top_p": 0.99,
        "n": 5,
        "runs": 5,
        "k": [1],
    },
    "simulator": {
        "mode": "external",  # external | builtin | none
        "compile_cmd": "iverilog -g2012 -o {out} {candidate} {testbench}",
        "run_cmd": "vvp {out}",
        "timeout_s": 30.0,
    },
    "problems": {
        "problem_file": None,
        "description_file": None,
        "limit": None,
    },
    "output": {
        "dir": "out",
        "debug_keep_scratch": False,
        "max_workers": 1,
    },
}


def _merge_config(base: Dict[str, Any], user: Dict[str, Any]) -> Dict[str, Any]:
    merged = copy.deepcopy(base)
    bad_keys: List[str] = []
    for section, values in user.items():
        if section not in merged:
            bad_keys.append(section)
            continue
        if not isinstance(values, dict):
            bad_keys.append(section)
            continue
        for key, value in values.items():
            if key not in merged[section]:
                bad_keys.append(f"{section}.{key}")
            else:
                merged[section][key] = value
    if bad_keys:
        raise ConfigError("unknown configuration keys", keys=bad_keys)
    return merged


def load_config(path: Optional[str]) -> Dict[str, Any]:
    """The default config, deep-merged with the user's JSON file if given."""
    if path is None:
        return copy.deepcopy(DEFAULT_CONFIG)
    try:
        with open(path, encoding="utf-8") as fh:
            user = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}", keys=[str(path)])
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}",
                          keys=[str(path)])
    if not isinstance(user, dict):
        raise ConfigError("config root must be a JSON object",
                          keys=[str(path)])
    return _merge_config(DEFAULT_CONFIG, user)


def _coerce(text: str, current: Any) -> Any:
    """Parse an override string against the current value's type."""
    if text == "null":
        return None
    if isinstance(current, bool):
        if text.lower() in ("true", "1", "yes"):
            return True
        if text.lower() in ("false", "0", "no"):
            return False
        raise ValueError(f"not a boolean: {text!r}")
    if isinstance(current, int) and not isinstance(current, bool):
        return int(text)
    if isinstance(current, float):
        return float(text)
    if isinstance(current, list):
        return json.loads(text) if text.startswith("[") else \
            [part.strip() for part in text.split(",") if part.strip()]
    if current is None:
        try:
            return json.loads(text)
        except json.JSONDecodeError:
            return text
    return text


def apply_dotted_overrides(config: Dict[str, Any],
                           extras: List[str]) -> Dict[str, Any]:
    """Apply leftover ``--section.key value`` (or ``=value``) arguments."""
    bad: List[str] = []
    index = 0
    while index < len(extras):
        token = extras[index]
        if not token.startswith("--") or "." not in token:
            bad.append(token)
            index += 1
            continue
        name = token[2:]
        if "=" in name:
            name, value_text = name.split("=", 1)
            index += 1
        else:
            if index + 1 >= len(extras):
                bad.append(token)
                break
            value_text = extras[index + 1]
            index += 2
        section, _, key = name.partition(".")
        if section not in config or key not in config[section]:
            bad.append(name)
            continue
        try:
            config[section][key] = _coerce(value_text, config[section][key])
        except (ValueError, json.JSONDecodeError):
            bad.append(f"{name}={value_text}")
    if bad:
        raise ConfigError("bad override flags", keys=bad)
    return config


_ALIAS_PATHS = {
    "strategy": ("strategy", "name"),
    "stages": ("strategy", "stages"),
    "abstraction_model": ("models", "abstraction_model"),
    "translation_model": ("models", "translation_model"),
    "n": ("sampling", "n"),
    "runs": ("sampling", "runs"),
    "k": ("sampling", "k"),
    "mock": ("models", "mock_script"),
    "out": ("output", "dir"),
    "debug_keep_scratch": ("output", "debug_keep_scratch"),
}


def _apply_aliases(config: Dict[str, Any], args: argparse.Namespace) -> None:
    for attr, (section, key) in _ALIAS_PATHS.items():
        value = getattr(args, attr, None)
        if value is None or (attr == "debug_keep_scratch" and value is False):
            continue
        if isinstance(value, str) and isinstance(config[section][key], list):
            value = [part.strip() for part in value.split(",") if part.strip()]
        config[section][key] = value


def strategy_config_from(config: Dict[str, Any]) -> StrategyConfig:
    strat = config["strategy"]
    sampling = config["sampling"]
    models = config["models"]
    try:
        name = StrategyName(strat["name"])
    except ValueError:
        raise ConfigError(f"unknown strategy {strat['name']!r}",
                          keys=["strategy.name"])
    try:
        stages = frozenset(AbstractionStage(s) for s in strat["stages"])
    except ValueError as exc:
        raise ConfigError(f"bad stage name: {exc}", keys=["strategy.stages"])
    if name is not StrategyName.ABSTRACTION:
        stages = frozenset()
    return StrategyConfig(
        strategy=name,
        stages=stages,
        abstraction_model=models["abstraction_model"],
        translation_model=models["translation_model"],
        samples_per_problem=int(sampling["n"]),
        temperature=float(sampling["temperature"]),
        top_p=float(sampling["top_p"]),
        runs=int(sampling["runs"]),
    )


def build_registry(config: Dict[str, Any]) -> pipeline.BackendRegistry:
    models = config["models"]
    if models["mock_script"]:
        backend = mock_from_script_file(models["mock_script"])
    elif models["base_url"]:
        backend = OpenAICompatBackend(models["base_url"],
                                      api_key_env=models["api_key_env"])
    else:
        raise ConfigError("no backend configured; set models.base_url or "
                          "pass --mock", keys=["models.base_url"])
    cache = ResponseCache(models["cache_dir"])
    handle = BackendHandle(backend, retry_cap=int(models["retry_cap"]),
                           cache=cache)
    return pipeline.BackendRegistry.single(handle)


def _load_problem_set(config: Dict[str, Any]):
    section = config["problems"]
    if not section["problem_file"]:
        raise ConfigError("problems.problem_file is required",
                          keys=["problems.problem_file"])
    problems = load_problems(section["problem_file"],
                             section["description_file"])
    if section["limit"]:
        problems = problems[:int(section["limit"])]
    if not problems:
        raise ConfigError("problem set is empty",
                          keys=["problems.problem_file"])
    return problems


def _evaluate(config: Dict[str, Any], problems, traces):
    sim_cfg = config["simulator"]
    mode = sim_cfg["mode"]
    if mode == "external":
        sim = harness.SimulatorConfig(
            compile_cmd=sim_cfg["compile_cmd"],
            run_cmd=sim_cfg["run_cmd"],
            timeout_s=float(sim_cfg["timeout_s"]))
        return harness.check_traces(
            problems, traces, sim,
            max_workers=int(config["output"]["max_workers"]),
            keep_scratch_on_failure=config["output"]["debug_keep_scratch"])
    if mode == "builtin":
        return harness.builtin_check_traces(problems, traces)
    if mode == "none":
        # no correctness judgement: extraction success stands in for
        # compilation and nothing is marked functional
        return [harness.SampleOutcome(
            t.task_id, t.sample_index, t.run_index,
            compiled=t.final_verilog is not None, functional=False,
            log_excerpt="not evaluated (simulator.mode = none)")
            for t in traces]
    raise ConfigError(f"unknown simulator mode {mode!r}",
                      keys=["simulator.mode"])


def _write_json(path: Path, payload: Any) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")


def _k_values(config: Dict[str, Any], n: int) -> List[int]:
    raw = config["sampling"]["k"]
    if isinstance(raw, int):
        raw = [raw]
    values = sorted({int(k) for k in raw})
    for k in values:
        if not 1 <= k <= n:
            raise ConfigError(f"k={k} outside [1, n={n}]", keys=["sampling.k"])
    return values


def cmd_run(args: argparse.Namespace, extras: List[str]) -> int:
    config = apply_dotted_overrides(load_config(args.config), extras)
    _apply_aliases(config, args)
    cfg = strategy_config_from(config)
    problems = _load_problem_set(config)
    registry = build_registry(config)
    out_dir = Path(config["output"]["dir"])
    out_dir.mkdir(parents=True, exist_ok=True)

    traces = pipeline.run_benchmark(
        problems, cfg, registry=registry,
        trace_file=out_dir / "traces.jsonl",
        max_workers=int(config["output"]["max_workers"]))
    outcomes = _evaluate(config, problems, traces)
    report = harness.score_run(traces, outcomes, cfg,
                               k_values=_k_values(config, cfg.samples_per_problem))

    with open(out_dir / "outcomes.jsonl", "w", encoding="utf-8") as fh:
        for o in outcomes:
            fh.write(json.dumps({
                "task_id": o.task_id, "sample_index": o.sample_index,
                "run_index": o.run_index, "compiled": o.compiled,
                "functional": o.functional, "timed_out": o.timed_out,
                "log_excerpt": o.log_excerpt}) + "\n")
    _write_json(out_dir / "report.json", report.to_dict())
    for line in report.summary_lines():
        print(line)
    print(f"report written to {out_dir / 'report.json'}")
    return 0


def stage_set_label(stages: frozenset) -> str:
    names = []
    if AbstractionStage.BASE in stages:
        names.append("Base")
    if AbstractionStage.IR in stages:
        names.append("IR")
    if AbstractionStage.PSEUDOCODE in stages:
        names.append("Pseudo")
    return " + ".join(names) if names else "(none)"


def cmd_ablate(args: argparse.Namespace, extras: List[str]) -> int:
    config = apply_dotted_overrides(load_config(args.config), extras)
    _apply_aliases(config, args)
    config["strategy"]["name"] = "abstraction"
    problems = _load_problem_set(config)
    registry = build_registry(config)
    out_dir = Path(config["output"]["dir"])
    out_dir.mkdir(parents=True, exist_ok=True)

    rows = []
    base_cfg = strategy_config_from(config)
    k_values = _k_values(config, base_cfg.samples_per_problem)
    for stages in ABLATION_STAGE_SETS:
        cfg = StrategyConfig(
            strategy=StrategyName.ABSTRACTION, stages=stages,
            abstraction_model=base_cfg.abstraction_model,
            translation_model=base_cfg.translation_model,
            samples_per_problem=base_cfg.samples_per_problem,
            temperature=base_cfg.temperature, top_p=base_cfg.top_p,
            runs=base_cfg.runs)
        traces = pipeline.run_benchmark(
            problems, cfg, registry=registry,
            trace_file=out_dir / "traces.jsonl",
            max_workers=int(config["output"]["max_workers"]))
        outcomes = _evaluate(config, problems, traces)
        report = harness.score_run(traces, outcomes, cfg, k_values=k_values)
        rows.append({"stages": stage_set_label(stages),
                     "report": report.to_dict()})

    _write_json(out_dir / "ablation_report.json", {"rows": rows})
    header = f"{'stages':<22}"
    for k in k_values:
        header += f"  comp@{k:<4}  func@{k:<4}"
    header += "  out tokens"
    print(header)
    for row in rows:
        rpt = row["report"]
        line = f"{row['stages']:<22}"
        for k in k_values:
            comp = rpt["compilation"][str(k)]["mean"]
            func = rpt["functionality"][str(k)]["mean"]
            line += f"  {100 * comp:6.1f}%  {100 * func:6.1f}%"
        line += f"  {rpt['tokens']['avg_output']:.1f}"
        print(line)
    print(f"report written to {out_dir / 'ablation_report.json'}")
    return 0


_IR_KIND_KEYS = [
    ("states", Classification2.FSM_IMPLIED),
    ("rows", Classification2.TRUTH_TABLE),
    ("expressions", Classification2.BOOLEAN_EXPRESSION),
    ("cells", Classification2.KMAP),
    ("mapping", Classification2.MUX_MAPPING),
]

_IR_KIND_NAMES = {
    "fsm": Classification2.FSM_IMPLIED,
    "truth_table": Classification2.TRUTH_TABLE,
    "boolean_expression": Classification2.BOOLEAN_EXPRESSION,
    "k-map": Classification2.KMAP,
    "mux_mapping": Classification2.MUX_MAPPING,
}


def _infer_ir_kind(raw: str, explicit: Optional[str]) -> Classification2:
    if explicit:
        return _IR_KIND_NAMES[explicit]
    obj = json.loads(raw)
    if not isinstance(obj, dict):
        raise IrSchemaError("IR file root must be a JSON object")
    for key, kind in _IR_KIND_KEYS:
        if key in obj:
            return kind
    raise IrSchemaError("cannot infer IR kind; pass --kind",
                        key="kind")


def cmd_ir(args: argparse.Namespace) -> int:
    raw = Path(args.input).read_text(encoding="utf-8")
    kind = _infer_ir_kind(raw, args.kind)
    if args.ir_command == "validate":
        parsed = ir_mod.parse_ir(raw, kind)
        print(f"valid {parsed.tag.value} IR")
        return 0
    if args.ir_command == "lower":
        if not args.header:
            raise ConfigError("lower needs a module header file",
                              keys=["header"])
        parsed = ir_mod.parse_ir(raw, kind)
        header = Path(args.header).read_text(encoding="utf-8")
        verilog = lower.lower_to_verilog(parsed, header)
        out = Path(args.out) if args.out else Path(args.input).with_suffix(".v")
        out.write_text(verilog, encoding="utf-8")
        print(f"wrote {out}")
        return 0
    if args.ir_command == "minimize":
        parsed = ir_mod.parse_ir(raw, Classification2.KMAP)
        eqns = qm.minimize_kmap(parsed.structure,
                                output_name=args.output_name)
        minimized = ir_mod.IntermediateRep(
            tag=Classification2.BOOLEAN_EXPRESSION, structure=eqns)
        out = Path(args.out) if args.out else \
            Path(args.input).with_suffix(".min.json")
        out.write_text(ir_mod.ir_json_text(minimized) + "\n",
                       encoding="utf-8")
        print(f"wrote {out}")
        return 0
    raise ConfigError(f"unknown ir subcommand {args.ir_command!r}",
                      keys=["ir_command"])


def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON configuration file")
    parser.add_argument("--mock", help="scripted mock backend JSON file")
    parser.add_argument("--strategy",
                        choices=[s.value for s in StrategyName])
    parser.add_argument("--stages",
                        help="comma list from base,ir,pseudocode")
    parser.add_argument("--abstraction-model", dest="abstraction_model")
    parser.add_argument("--translation-model", dest="translation_model")
    parser.add_argument("--n", type=int, help="samples per problem")
    parser.add_argument("--runs", type=int)
    parser.add_argument("--k", help="comma list of pass@k cutoffs")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--debug-keep-scratch", dest="debug_keep_scratch",
                        action="store_true", default=False)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vabstract",
        description="Staged-abstraction Verilog generation benchmark")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one benchmark configuration")
    _add_common_flags(run)

    ablate = sub.add_parser("ablate",
                            help="run all six stage-set configurations")
    _add_common_flags(ablate)

    ir_parser = sub.add_parser("ir", help="IR file utilities")
    ir_sub = ir_parser.add_subparsers(dest="ir_command", required=True)
    for name, extra_help in (("validate", "check an IR file"),
                             ("lower", "emit Verilog for an IR file"),
                             ("minimize", "minimize a Karnaugh map IR")):
        p = ir_sub.add_parser(name, help=extra_help)
        p.add_argument("input", help="IR JSON file")
        if name == "lower":
            p.add_argument("header", nargs="?",
                           help="module header Verilog file")
        p.add_argument("--kind", choices=sorted(_IR_KIND_NAMES))
        p.add_argument("--out")
        if name == "minimize":
            p.add_argument("--output-name", dest="output_name", default="f")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args, extras = parser.parse_known_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "run":
            return cmd_run(args, extras)
        if args.command == "ablate":
            return cmd_ablate(args, extras)
        if args.command == "ir":
            if extras:
                raise ConfigError("unrecognized arguments", keys=extras)
            return cmd_ir(args)
        parser.error(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except SimulatorMissingError as exc:
        print(f"environment error: {exc}", file=sys.stderr)
        return 3
    except (IrSchemaError, IrValidationError) as exc:
        print(f"IR error: {exc}", file=sys.stderr)
        return 4
    except VabstractError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
