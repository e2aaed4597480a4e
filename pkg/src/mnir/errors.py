"""Exception hierarchy shared by the library and the command line."""


class MnirError(Exception):
    """Base class for all errors raised by this package."""


class InputError(MnirError, ValueError):
    """Invalid user input: malformed files, bad shapes, violated preconditions."""


class CorpusFormatError(InputError):
    """A corpus or sidecar file could not be parsed.

    Carries the offending path and 1-based line number when known.
    """

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)


class DegenerateDataError(InputError):
    """Data that is well-formed but leaves a quantity undefined
    (single response group, constant projection, zero-length document)."""


class NumericalError(MnirError, RuntimeError):
    """A numerical procedure failed (non-convergence beyond tolerance,
    too many failed Monte Carlo replicates)."""
