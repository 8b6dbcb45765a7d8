"""Exception types shared across modules."""


class FormatError(ValueError):
    """Malformed input data: stream headers, label lines, config documents.

    ``where`` carries a human-readable location (``line 3``, ``byte offset 9``)
    and is prefixed to the message.
    """

    def __init__(self, message: str, where: str | None = None):
        self.where = where
        super().__init__(f"{where}: {message}" if where else message)


class InvariantError(RuntimeError):
    """An internal consistency check failed. Indicates a bug, not bad input."""
