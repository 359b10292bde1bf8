"""Exception vocabulary shared by every stage of the engine.

Errors split into three families: precision shortfalls (the object is fine
but we cannot certify the requested property from the stored truncation),
structural violations (the request itself is malformed), and budget stops.
Precision errors carry whatever bound *is* known so callers can retry with
a larger truncation.
"""


class LogresError(Exception):
    """Base class for everything raised on purpose."""


class InsufficientPrecision(LogresError):
    """A classifier needs terms beyond the stored truncation.

    ``known_bound`` is a lower bound for the quantity that could not be
    pinned down (or None when not even that is available).
    """

    def __init__(self, message, known_bound=None):
        super().__init__(message)
        self.known_bound = known_bound


class InsufficientArcPrecision(LogresError):
    """An arc is too short to determine a leading term or residue."""


class PrecisionExhausted(LogresError):
    """A transformation consumed the whole precision budget."""


class NonRationalResidue(LogresError):
    """A translation constant exists but does not lie in the rationals."""


class BasisNotClosed(LogresError):
    """A product of basis radicals leaves the declared weight basis."""


class ValueConstraintViolated(LogresError):
    """A coordinate change term breaks the value ordering it must respect."""


class DegreeOverflow(LogresError):
    """A wedge product would exceed the supported form degree."""


class IntegrabilityDefect(LogresError):
    """The integrability bound required by a preparation step fails."""


class NotIntegrable(LogresError):
    """An exact integrability hypothesis (omega ^ d omega = 0) fails."""


class BudgetExhausted(LogresError):
    """A driver loop hit its step, gamma, or depth cap.

    ``diagnostic`` names the exhausted resource.
    """

    def __init__(self, diagnostic):
        super().__init__(diagnostic)
        self.diagnostic = diagnostic
