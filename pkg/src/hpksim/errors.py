"""Exception hierarchy shared by every engine component."""

from __future__ import annotations


class HpkError(Exception):
    """Base class for all engine errors."""


# manifest ingestion

class ManifestError(HpkError):
    pass


class MalformedYaml(ManifestError):
    pass


class MissingField(ManifestError):
    def __init__(self, path: str):
        super().__init__(f"missing required field {path}")
        self.path = path


class UnsupportedKind(ManifestError):
    def __init__(self, kind: str):
        super().__init__(f"unsupported kind {kind!r}")
        self.kind = kind


class BadQuantity(ManifestError):
    def __init__(self, text: str):
        super().__init__(f"bad quantity {text!r}")
        self.text = text


# control plane

class ValidationFailed(HpkError):
    def __init__(self, violations: list[str]):
        super().__init__("; ".join(violations))
        self.violations = list(violations)


class CycleDetected(ValidationFailed):
    def __init__(self, cycle: list[str]):
        super().__init__([f"dependency cycle: {' -> '.join(cycle)}"])
        self.cycle = cycle


class AdmissionRejected(HpkError):
    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


class NotFound(HpkError):
    pass


class VersionCompacted(HpkError):
    pass


# translation

class BadAnnotationSyntax(HpkError):
    pass


class UnallocatedIP(HpkError):
    pass


# simulator

class NeverSchedulable(HpkError):
    pass


class UnknownJob(HpkError):
    pass


class DemandMismatch(HpkError):
    pass


# network

class SubnetExhausted(HpkError):
    pass


class AlreadyAllocated(HpkError):
    pass


class NotAllocated(HpkError):
    pass


# kubelet / engine

class EmptyCluster(HpkError):
    pass


class NonQuiescent(HpkError):
    def __init__(self, limit: int):
        super().__init__(f"no quiescence within {limit} ticks")
        self.limit = limit


class NotSubmitted(HpkError):
    pass


# workflow

class UnboundParameter(HpkError):
    def __init__(self, name: str):
        super().__init__(f"parameter {name!r} has no binding")
        self.name = name


class UndeclaredPlaceholder(HpkError):
    def __init__(self, name: str):
        super().__init__(f"placeholder {name!r} is not declared")
        self.name = name
