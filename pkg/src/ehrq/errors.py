"""Exception hierarchy shared by every stage of the pipeline."""


class EhrqError(Exception):
    """Base class for all errors raised by ehrq."""


# schema / loading

class ParseError(EhrqError):
    """A manifest or template file is malformed."""


class SchemaError(EhrqError):
    pass


class NoPath(EhrqError):
    """Target node is unreachable along parent->child edges."""


class LoadError(EhrqError):
    pass


class MissingTableFile(LoadError):
    pass


class HeaderMismatch(LoadError):
    pass


class TypeCoercionError(LoadError):
    pass


class IntegrityError(LoadError):
    pass


# query text

class QuerySyntaxError(EhrqError):
    def __init__(self, message, position=None):
        if position is not None:
            message = f"{message} (token {position})"
        super().__init__(message)
        self.position = position


class SqlSyntaxError(QuerySyntaxError):
    pass


class SparqlSyntaxError(QuerySyntaxError):
    pass


class UnsupportedFeature(QuerySyntaxError):
    pass


class UnboundProjectionVariable(SparqlSyntaxError):
    pass


# execution

class ExecutionError(EhrqError):
    pass


class UnknownTable(ExecutionError):
    pass


class UnknownColumn(ExecutionError):
    pass


class UnknownPredicate(ExecutionError):
    pass


class TypeMismatch(ExecutionError):
    pass


class InvalidJoin(ExecutionError):
    pass


# transpilation / corpus

class UnmappedColumn(EhrqError):
    pass


class EmptyColumn(EhrqError):
    pass


class FileFormatError(EhrqError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class EvaluationError(EhrqError):
    """Gold query failed; accuracy is undefined for the pair."""
