"""
Slit Tomography Errors

Exception hierarchy shared by every module. Each error carries a
status_code which the command line wrapper turns into the process exit code:
2 for invalid input, 3 for numerical failures.
"""


class SlitTomographyError(Exception):
    """Base error with an attached status code"""

    def __init__(self, message, status_code=1):
        super().__init__(message)
        self.status_code = status_code


class ValidationError(SlitTomographyError):
    def __init__(self, message, status_code=2):
        super().__init__(message, status_code)


class NumericalError(SlitTomographyError):
    def __init__(self, message, status_code=3):
        super().__init__(message, status_code)


class NormalizationError(ValidationError):
    pass


class DimensionMismatchError(ValidationError):
    pass


class InvalidSeedError(ValidationError):
    """Seed vector violates the flat-amplitude condition |b_l|^2 = 1/d"""


class InvalidProbabilityError(ValidationError):
    pass


class ConfigurationError(ValidationError):
    pass


class DegenerateInputError(NumericalError):
    pass


class DegeneratePatternError(NumericalError):
    pass


class IllConditionedEnvelopeError(NumericalError):
    pass


class NotInformationallyCompleteError(NumericalError):
    pass
