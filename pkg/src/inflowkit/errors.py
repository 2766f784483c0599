"""Exception hierarchy shared by all inflowkit modules."""

from __future__ import annotations


class InflowError(Exception):
    """Base class for every error raised by inflowkit."""


# corpus


class CorpusError(InflowError):
    pass


class ParseError(CorpusError):
    def __init__(self, row: int, column: str, reason: str, path: str | None = None):
        self.row = row
        self.column = column
        self.reason = reason
        self.path = path
        where = f"{path}: " if path else ""
        super().__init__(f"{where}row {row}, column {column!r}: {reason}")


class DuplicateKey(CorpusError):
    def __init__(self, kind: str, key: str):
        self.kind = kind
        self.key = key
        super().__init__(f"duplicate {kind} id {key!r}")


class DanglingReference(CorpusError):
    def __init__(self, kind: str, key: str, owner: str | None = None):
        self.kind = kind
        self.key = key
        self.owner = owner
        msg = f"{kind} references unknown id {key!r}"
        if owner:
            msg += f" (in {owner})"
        super().__init__(msg)


class NoReports(CorpusError):
    def __init__(self, release_id: str):
        self.release_id = release_id
        super().__init__(f"no trouble reports attributed to release {release_id!r}")


class UnknownRelease(CorpusError):
    def __init__(self, release_id: str):
        self.release_id = release_id
        super().__init__(f"unknown release {release_id!r}")


# dataset


class EmptyCorpus(InflowError):
    pass


class TooFewRows(InflowError):
    def __init__(self, needed: int, got: int):
        self.needed = needed
        self.got = got
        super().__init__(f"need at least {needed} rows, got {got}")


class UnknownFeature(InflowError):
    def __init__(self, feature_id: str):
        self.feature_id = feature_id
        super().__init__(f"unknown feature {feature_id!r}")


# numeric input validation (preprocess, learn, evaluate)


class EmptyInput(InflowError):
    pass


class NonFiniteValue(InflowError):
    def __init__(self, row: int, col: int):
        self.row = row
        self.col = col
        super().__init__(f"non-finite value at row {row}, column {col}")


class DimensionMismatch(InflowError):
    pass


class NotInvertible(InflowError):
    def __init__(self, kind: str):
        self.kind = kind
        super().__init__(f"scaler kind {kind!r} has no inverse transform")


class ZeroVariance(InflowError):
    pass


# cluster


class TooFewPoints(InflowError):
    pass


class UndefinedScore(InflowError):
    pass


class NoFeasibleCandidate(InflowError):
    def __init__(self, reasons: list[str]):
        self.reasons = reasons
        shown = "; ".join(reasons[:5])
        more = f" (+{len(reasons) - 5} more)" if len(reasons) > 5 else ""
        super().__init__(f"no feasible clustering candidate: {shown}{more}")


# learn / evaluate


class SingleClass(InflowError):
    pass


class UnfittedModel(InflowError):
    pass


class UnknownCluster(InflowError):
    def __init__(self, cluster_id: int):
        self.cluster_id = cluster_id
        super().__init__(f"cluster {cluster_id} has no count column in the dataset")


class InvalidConfig(InflowError):
    pass
