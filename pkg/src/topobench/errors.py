"""Exception hierarchy shared by all topobench modules."""


class TopoBenchError(Exception):
    """Base class; ``code`` is the machine-readable name used by the CLI."""

    code = "TopoBenchError"

    def __init__(self, message: str = ""):
        super().__init__(message)
        self.message = message

    def to_dict(self) -> dict:
        return {"error": self.code, "message": self.message}


def _make(name: str, doc: str, base=TopoBenchError):
    return type(name, (base,), {"code": name, "__doc__": doc})


NotPrimePower = _make("NotPrimePower", "Field order has two distinct prime factors.")
FieldMismatch = _make("FieldMismatch", "Operands belong to different fields.")
InvalidQ = _make("InvalidQ", "q is not a prime power of the form 4w + delta.")
ConstructionInvalid = _make("ConstructionInvalid", "Post-construction validation failed.")
BadParams = _make("BadParams", "Parameters are illegal for the requested kind.")
NoFormula = _make("NoFormula", "No closed-form expression exists for this kind.")
NoPath = _make("NoPath", "Source and destination are disconnected.")
RouteTooLong = _make("RouteTooLong", "Route needs more virtual channels than available.")
BadPatternSize = _make("BadPatternSize", "Bit-permutation traffic needs a power-of-two size.")
NonSteady = _make("NonSteady", "Warmup did not converge before the cycle cap.")
Deadlock = _make("Deadlock", "Watchdog saw buffered flits but no progress.")
UnsupportedGrouping = _make("UnsupportedGrouping", "No rack grouping is defined for this topology.")
RadixTooSmall = _make("RadixTooSmall", "Router cost fit is non-positive at this radix.")
NoBalancedVariant = _make("NoBalancedVariant", "No balanced topology variant exists for this size.")
