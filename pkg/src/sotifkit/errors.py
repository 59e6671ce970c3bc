"""Exception hierarchy shared by all modules."""


class SotifError(Exception):
    """Base class for every error raised by sotifkit."""


class DocumentSyntaxError(SotifError, ValueError):
    """A document is malformed or does not follow its file schema."""

    def __init__(self, message, line=None, column=None, entity=None):
        self.line = line
        self.column = column
        self.entity = entity
        where = []
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column}")
        if entity is not None:
            where.append(f"entity {entity}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


class DuplicateId(SotifError, ValueError):
    def __init__(self, ident, what="id"):
        self.ident = ident
        super().__init__(f"duplicate {what}: {ident}")


class DanglingParent(SotifError, ValueError):
    def __init__(self, ident, parent):
        self.ident = ident
        self.parent = parent
        super().__init__(f"{ident}: parent {parent} does not exist")


class NotFound(SotifError, LookupError):
    pass


class WrongKind(SotifError, TypeError):
    pass


class UnknownSubCondition(SotifError, LookupError):
    pass


class CyclicComposition(SotifError, ValueError):
    pass


class UnresolvedParam(SotifError, LookupError):
    pass


class InfeasibleConstraints(SotifError, ValueError):
    """Constraints on one parameter contradict and no override can resolve them."""


class EmptySamplingRange(SotifError, ValueError):
    """A triggering condition cannot occur within the scenario's parameter range."""


class InvalidLevels(SotifError, ValueError):
    pass


class DegenerateFriction(SotifError, ValueError):
    pass


class NotSimulatable(SotifError, ValueError):
    pass


class NonFiniteState(SotifError, ArithmeticError):
    pass


class EmptyMatrix(SotifError, ValueError):
    pass


class NotBracketed(SotifError, ValueError):
    pass


class ValidationFailed(SotifError, ValueError):
    def __init__(self, message, report):
        self.report = report
        super().__init__(message)


class DigestMismatch(SotifError, IOError):
    pass
