"""Exception types and the violation record shared by all validators."""
from dataclasses import dataclass


@dataclass(frozen=True)
class Violation:
    rule: str
    message: str

    def __str__(self):
        return f"{self.rule}: {self.message}"


class NrError(Exception):
    """Base class for every error raised by this package."""


class UnsupportedNumerology(NrError):
    pass


class InvalidNesting(NrError):
    pass


class CarrierTooNarrow(NrError):
    pass


class OffsetOutOfBand(NrError):
    pass


class NumerologyNotConfigured(NrError):
    pass


class UnknownBwp(NrError):
    pass


class SwitchInProgress(NrError):
    pass


class PrbOutOfBwp(NrError):
    pass


class InvalidProfile(NrError):
    pass


class CannotAcquireSsBlock(NrError):
    pass


class NotMonitored(NrError):
    pass


class UeOutOfSpan(NrError):
    def __init__(self, offenders):
        self.offenders = tuple(offenders)
        super().__init__(f"span outside active BWP of UE(s) {list(self.offenders)}")


class EmptyGroup(NrError):
    pass


class ScenarioError(NrError):
    """Raised when a scenario fails to parse or validate.

    ``violations`` holds every problem found, not just the first.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("\n".join(str(v) for v in self.violations))


class ScenarioSyntaxError(ScenarioError):
    def __init__(self, line, message):
        self.line = line
        super().__init__([Violation("syntax", f"line {line}: {message}")])
