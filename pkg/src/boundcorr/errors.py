"""Exception types raised across the toolkit."""


class BoundcorrError(Exception):
    """Base class for every error raised by this package."""


# label files and phone sets

class EmptyFileError(BoundcorrError):
    pass


class MalformedLineError(BoundcorrError):
    def __init__(self, line_no, detail=""):
        self.line_no = line_no
        super().__init__(f"line {line_no}: malformed record{': ' + detail if detail else ''}")


class NonContiguousError(BoundcorrError):
    def __init__(self, line_no, detail=""):
        self.line_no = line_no
        super().__init__(f"line {line_no}: segments are not contiguous{': ' + detail if detail else ''}")


class UnknownPhoneError(BoundcorrError):
    def __init__(self, symbol, line_no=None):
        self.symbol = symbol
        self.line_no = line_no
        where = f"line {line_no}: " if line_no is not None else ""
        super().__init__(f"{where}unknown phone {symbol!r}")


class InvalidAlignmentError(BoundcorrError):
    pass


class DuplicateSymbolError(BoundcorrError):
    pass


class UnknownClassError(BoundcorrError):
    pass


class NoSilenceSymbolError(BoundcorrError):
    pass


# comparison

class UtteranceMismatchError(BoundcorrError):
    pass


# linguistic structure and features

class EmptySyllableError(BoundcorrError):
    pass


class PhoneNotInPhoneSetError(BoundcorrError):
    pass


class StructureAlignmentMismatchError(BoundcorrError):
    pass


class InvalidStructureError(BoundcorrError):
    pass


class IndexOutOfRangeError(BoundcorrError, IndexError):
    pass


class UnknownFeatureError(BoundcorrError):
    pass


class SchemaError(BoundcorrError):
    pass


# trees

class EmptyExamplesError(BoundcorrError):
    pass


class SchemaMismatchError(BoundcorrError):
    pass


class ParseError(BoundcorrError):
    def __init__(self, position, detail):
        self.position = position
        super().__init__(f"offset {position}: {detail}")


class SchemaHashMissingError(BoundcorrError):
    pass


# reporting

class EmptyRecordsError(BoundcorrError):
    pass


class LengthMismatchError(BoundcorrError):
    pass


class ZeroBaselineError(BoundcorrError):
    pass


# simulation and CLI

class InvalidConfigError(BoundcorrError):
    pass


class EmptyTrainingSetError(BoundcorrError):
    pass
