"""Exception hierarchy. Every pipeline error derives from ``User2VecError`` so the
CLI can map them to exit status 1 and print the class name."""


class User2VecError(Exception):
    pass


# ingestion
class MalformedRecord(User2VecError):
    def __init__(self, path, line, reason=""):
        self.path = path
        self.line = line
        super().__init__(f"{path}:{line}: malformed record {reason}".rstrip())


class EmptyDataset(User2VecError):
    pass


class DuplicateAppId(User2VecError):
    pass


class FieldOutOfRange(User2VecError):
    def __init__(self, field, value, where=""):
        self.field = field
        self.value = value
        super().__init__(f"{where}field {field!r} out of range: {value!r}")


class UnknownLabelValue(User2VecError):
    pass


# documents
class EmptyDocument(User2VecError):
    pass


class MissingUserMetadata(User2VecError):
    pass


class UnknownApp(User2VecError):
    pass


# embedding
class EmptyVocabulary(User2VecError):
    pass


class ConfigInvalid(User2VecError):
    pass


class NonFiniteUpdate(User2VecError):
    pass


class AllTokensOOV(User2VecError):
    pass


class IoFailure(User2VecError):
    pass


class FormatVersionMismatch(User2VecError):
    pass


# baselines
class EmptyCorpus(User2VecError):
    pass


class RankDeficient(User2VecError):
    pass


# recsys
class ZeroVector(User2VecError):
    pass


class DimensionMismatch(User2VecError):
    pass


class UnknownTag(User2VecError):
    pass


# lookalike
class SourceMissingUser(User2VecError):
    pass


class EmptyIntersection(User2VecError):
    pass


class SingleClassTrainingSet(User2VecError):
    pass


class SingleClassEvalSet(User2VecError):
    pass


class FoldClassStarvation(User2VecError):
    pass


# synth
class InfeasibleConfig(User2VecError):
    pass


class IndexOutOfRange(User2VecError):
    pass
