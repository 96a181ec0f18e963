"""Exception types shared across the package."""


class SubcbError(Exception):
    """Base class for all package errors."""


class DomainError(SubcbError, ValueError):
    """An argument lies outside the domain of the operation."""


class PreconditionError(SubcbError, ValueError):
    """An operation was called on inputs violating its precondition."""


class CapacityError(SubcbError, RuntimeError):
    """An exhaustive enumeration would exceed its configured budget."""


class ConfigError(SubcbError, ValueError):
    """An experiment configuration is malformed or inconsistent."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if path:
            where.append(path)
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)
