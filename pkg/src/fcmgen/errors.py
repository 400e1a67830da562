class FCMError(Exception):
    """Base class for errors raised by fcmgen."""


class DimensionError(FCMError, ValueError):
    def __init__(self, what, expected, actual):
        self.what = what
        self.expected = expected
        self.actual = actual
        super().__init__(f"{what}: expected n={expected}, got {actual}")


class ConfigError(FCMError, ValueError):
    pass


class DataError(FCMError, ValueError):
    """Malformed or inconsistent input data.

    ``row`` is the 1-based line number in the source file when known.
    """

    def __init__(self, message, row=None, path=None):
        self.row = row
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}"
        if row is not None:
            where += f"{':' if where else 'line '}{row}"
        super().__init__(f"{where}: {message}" if where else message)


class DegenerateDistributionError(FCMError, ValueError):
    pass
