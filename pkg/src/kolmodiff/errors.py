"""Error types shared across the toolkit.

Every error carries a short machine-readable ``code`` so reports and the CLI
can record failures without parsing messages.
"""


class ToolkitError(Exception):
    code = "error"

    def __init__(self, message: str = ""):
        super().__init__(message or self.code)


class UnsupportedGeometryError(ToolkitError):
    code = "unsupported-geometry"


class SingularChartError(ToolkitError):
    code = "singular-chart"


class InsufficientSmoothnessError(ToolkitError):
    code = "insufficient-smoothness"


class CutLocusError(ToolkitError):
    code = "cut-locus"


class NotTangentError(ToolkitError):
    code = "not-tangent"


class BudgetExceededError(ToolkitError):
    code = "budget-exceeded"


class InvalidAlphaError(ToolkitError):
    code = "invalid-alpha"


class VarianceUnsafeError(ToolkitError):
    code = "variance-unsafe"


class HypothesisViolatedError(ToolkitError):
    code = "hypothesis-violated"


class FieldClassError(ToolkitError):
    code = "field-class"


class ConfigError(ToolkitError):
    code = "config-error"
