"""Exception hierarchy shared across the toolkit."""


class LflcError(Exception):
    """Base class for all toolkit errors."""


class MissingView(LflcError):
    def __init__(self, s, t):
        self.coord = (s, t)
        super().__init__(f"missing view for angular coordinate (s={s}, t={t})")


class DimensionMismatch(LflcError):
    pass


class UnparseableName(LflcError):
    pass


class TranslationOutOfBounds(LflcError):
    pass


class RankTooLarge(LflcError):
    pass


class BadRowCount(LflcError):
    pass


class CodecUnavailable(LflcError):
    pass


class CorruptPayload(LflcError):
    pass


class VersionMismatch(LflcError):
    pass


class BadMagic(LflcError):
    pass


class SectionTableMismatch(LflcError):
    pass


class SingularSystem(LflcError):
    pass


class NoOverlap(LflcError):
    pass
