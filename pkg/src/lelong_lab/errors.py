"""Error type shared by every module of the package."""


class LabError(Exception):
    """An error carrying a short machine-readable ``code``.

    Codes used across the package include ``singular-stencil``,
    ``arity-mismatch``, ``metric-degenerate``, ``frame-not-tangent``,
    ``non-integrable``, ``unsupported-kind``, ``not-invertible-on-region``,
    ``zero-lambda``, ``newton-diverged``, ``nonfinite-sample``,
    ``tail-divergent``, ``insufficient-samples`` and ``precondition``.
    """

    def __init__(self, code, message="", **context):
        self.code = code
        self.message = message
        self.context = context
        super().__init__(f"{code}: {message}" if message else code)
