"""Exception types shared by every module."""


class InvalidArgument(ValueError):
    """An argument violates an operation's precondition."""


class FormatError(InvalidArgument):
    """A trace/config file could not be parsed.

    ``line`` is the 1-based line number of the offending row, when known.
    """

    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)
