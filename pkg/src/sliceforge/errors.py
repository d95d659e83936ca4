"""Exception hierarchy shared by all sliceforge modules.

Every domain error derives from SliceforgeError so callers (CLI, gateway)
can map the whole family to one exit code / HTTP status class.
"""

from __future__ import annotations


class SliceforgeError(Exception):
    """Base class for all domain errors."""


class SchemaError(SliceforgeError):
    """A document failed validation; carries a machine-readable path."""

    def __init__(self, path: str, reason: str):
        super().__init__(f"{path}: {reason}")
        self.path = path
        self.reason = reason


# -- substrate ---------------------------------------------------------------

class DisconnectedGraph(SliceforgeError):
    pass


class DanglingLinkEndpoint(SliceforgeError):
    pass


class NonPositiveCapacity(SliceforgeError):
    pass


class NoBorderNodes(SliceforgeError):
    pass


class DuplicateDomain(SliceforgeError):
    pass


class ForeignEndpoint(SliceforgeError):
    pass


class UnknownElement(SliceforgeError):
    pass


class InsufficientCapacity(SliceforgeError):
    def __init__(self, element_id: str, shortfall: float, dimension: str = ""):
        dim = f" {dimension}" if dimension else ""
        super().__init__(f"{element_id}: short by {shortfall:g}{dim}")
        self.element_id = element_id
        self.shortfall = shortfall
        self.dimension = dimension


class UnknownReceipt(SliceforgeError):
    pass


class DoubleRelease(SliceforgeError):
    pass


class StateDrift(SliceforgeError):
    """Allocations were mutated outside the receipt machinery."""


# -- profiles ----------------------------------------------------------------

class UnknownServiceType(SliceforgeError):
    pass


class IncompletePlan(SliceforgeError):
    pass


# -- intent ------------------------------------------------------------------

class UntranslatableIntent(SliceforgeError):
    """No service or quality keyword matched; carries the scan result."""

    def __init__(self, hits):
        super().__init__("intent matched no service or quality keyword")
        self.hits = hits


class AdapterFailure(SliceforgeError):
    pass


class NoViableRelaxation(SliceforgeError):
    def __init__(self, attempts):
        super().__init__(
            "no single-attribute relaxation is feasible; attempted "
            + ", ".join(f"{a.attribute}={a.value}" for a in attempts)
        )
        self.attempts = attempts


class StaleProposal(SliceforgeError):
    pass


# -- embedder ----------------------------------------------------------------

class EmptyResourceDB(SliceforgeError):
    pass


class InstanceTooLarge(SliceforgeError):
    pass


class DanglingReference(SliceforgeError):
    pass


# -- orchestrator ------------------------------------------------------------

class StaleSnapshot(SliceforgeError):
    def __init__(self, violations):
        super().__init__("plan no longer valid against live state: " + "; ".join(violations))
        self.violations = violations


class UnstitchablePath(SliceforgeError):
    pass


class InvalidTransition(SliceforgeError):
    pass


class UnknownNsi(SliceforgeError):
    pass


class UnknownSegment(SliceforgeError):
    pass


class NonMonotonicTimestamp(SliceforgeError):
    pass


class InsufficientSamples(SliceforgeError):
    pass


class EmptyWindow(SliceforgeError):
    pass


class AlreadyTerminated(SliceforgeError):
    pass


# -- agents ------------------------------------------------------------------

class UnresolvedAgentReference(SliceforgeError):
    pass


class DuplicateAgentName(SliceforgeError):
    pass


class NoApplicableTool(SliceforgeError):
    pass


class NotAwaitingChoice(SliceforgeError):
    pass


class IndexOutOfRange(SliceforgeError):
    pass


class BindingError(SliceforgeError):
    pass


class NonDeterministicSource(SliceforgeError):
    pass


class ReplayIntegrityError(SliceforgeError):
    pass


# -- gateway -----------------------------------------------------------------

class PortInUse(SliceforgeError):
    pass


class CorruptInventory(SliceforgeError):
    pass


class SchemaVersionMismatch(SliceforgeError):
    pass
