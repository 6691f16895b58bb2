"""Exception hierarchy shared across the package."""


class VabstractError(Exception):
    """Base class for all package-specific errors."""


class ProblemParseError(VabstractError):
    """A problem or description file line could not be parsed."""

    def __init__(self, path, line_number, reason):
        self.path = path
        self.line_number = line_number
        self.reason = reason
        super().__init__(f"{path}:{line_number}: {reason}")


class ProblemValidationError(VabstractError):
    """A problem record violates an invariant (e.g. duplicate task_id)."""


class TemplateError(VabstractError):
    """Prompt rendering failed (missing input or unfilled placeholder)."""


class CompositionError(VabstractError):
    """Final-prompt composition requested a stage whose artifact is absent."""

    def __init__(self, stage):
        self.stage = stage
        super().__init__(f"stage '{stage}' requested but its artifact is absent")


class UnsupportedStrategyError(VabstractError):
    """A comparison strategy outside the supported set was requested."""


class BackendError(VabstractError):
    """Base class for generation-backend failures."""


class AuthenticationError(BackendError):
    """Credentials rejected by the provider. Not retryable."""


class RateLimitError(BackendError):
    """Provider rate limit hit. Retryable."""


class MalformedResponseError(BackendError):
    """Provider returned a payload we cannot interpret. Not retryable."""

    def __init__(self, message, payload=None):
        self.payload = payload
        super().__init__(message)


class NoScriptEntryError(BackendError):
    """The scripted mock backend has no entry matching a request."""


class ExtractionError(VabstractError):
    """A typed artifact could not be extracted from a model response."""

    def __init__(self, message, raw_text=""):
        self.raw_text = raw_text
        super().__init__(message)


class VerilogLeakError(ExtractionError):
    """Pseudocode response contained actual Verilog code."""


class StructureError(ExtractionError):
    """Extracted Verilog has unbalanced module/endmodule structure."""


class IrSchemaError(VabstractError):
    """IR JSON is missing a required key or has a wrong value type."""

    def __init__(self, message, key=None):
        self.key = key
        super().__init__(message)


class IrValidationError(VabstractError):
    """IR is structurally well formed but violates invariants."""

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class ExpressionError(VabstractError):
    """A Boolean expression failed to parse or referenced unknown names."""

    def __init__(self, message, position=None):
        self.position = position
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)


class LoweringError(VabstractError):
    """IR-to-Verilog lowering cannot proceed (e.g. missing header port)."""


class SimulatorMissingError(VabstractError):
    """Configured simulator binaries are not available. Aborts the run."""


class ReportError(VabstractError):
    """Traces and outcomes passed to scoring have mismatched dimensions."""


class ConfigError(VabstractError):
    """CLI or file configuration is invalid."""

    def __init__(self, message, keys=()):
        self.keys = list(keys)
        if self.keys:
            message = f"{message}: {', '.join(self.keys)}"
        super().__init__(message)
