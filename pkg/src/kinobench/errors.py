"""Shared exception types."""


class KinobenchError(Exception):
    """Base class for all library errors."""


class ContractError(KinobenchError):
    """A caller violated an operation precondition (bad control, bad config)."""


class StructuralError(KinobenchError):
    """Inconsistent data structures (id mismatch, unsupported shape pair)."""
