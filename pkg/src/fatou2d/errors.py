"""Exception hierarchy shared by every stage of the pipeline."""


class Fatou2dError(Exception):
    """Base class; ``tag`` is the short machine-readable name used in certificates."""

    tag = "error"


class TruncationUnderflow(Fatou2dError):
    tag = "truncation-underflow"


class NonUnitLeadingTerm(Fatou2dError):
    tag = "non-unit-leading-term"


class IdentityGerm(Fatou2dError):
    tag = "identity-germ"


class NotTangentToIdentity(Fatou2dError):
    tag = "not-tangent-to-identity"


class DicriticalGerm(Fatou2dError):
    """Every direction is characteristic (x*P2 - y*P1 vanishes identically)."""

    tag = "every-direction-characteristic"


class NotApplicable(Fatou2dError):
    tag = "not-applicable"


class NotUniqueDirection(Fatou2dError):
    tag = "not-unique-direction"


class ChartSingular(Fatou2dError):
    tag = "chart-singular"


class OutOfRegion(Fatou2dError):
    tag = "out-of-region"


class CannotCertifyRegion(Fatou2dError):
    tag = "cannot-certify-region"


class FitDiverged(Fatou2dError):
    tag = "fit-diverged"


class QuadratureFailure(Fatou2dError):
    tag = "quadrature-failure"


class InvarianceViolation(Fatou2dError):
    tag = "invariance-violation"


class InverseRecoveryFailure(Fatou2dError):
    tag = "inverse-recovery-failure"


class GermParseError(Fatou2dError):
    tag = "parse-error"

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ConfigError(Fatou2dError):
    tag = "config-error"
