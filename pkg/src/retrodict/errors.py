"""Exception types shared across the package."""


class UndefinedConditionalError(ValueError):
    """Conditioning on an outcome whose probability is zero under the flat prior."""


class NoActiveReverseError(ValueError):
    """The adjoint of the transformation is not a valid quantum channel."""


class ScenarioError(ValueError):
    """A scenario document is malformed or inconsistent.

    ``code`` is a stable machine-readable identifier, e.g. ``"malformed-document"``,
    ``"dimension-mismatch"``, ``"non-cptp-channel"``, ``"unknown-task"``.
    """

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code
