"""Exception hierarchy shared across waypath modules."""


class WaypathError(Exception):
    """Base class for all errors raised by waypath."""


class InvalidGeometry(WaypathError, ValueError):
    pass


class ParseError(WaypathError):
    """Raised when an input model cannot be read."""


class MalformedLine(ParseError):
    def __init__(self, line_no, text="", reason="unparseable coordinate word"):
        self.line_no = line_no
        self.text = text
        super().__init__(f"line {line_no}: {reason}: {text.strip()!r}")


class UnsupportedMode(ParseError):
    def __init__(self, line_no, reason):
        self.line_no = line_no
        super().__init__(f"line {line_no}: unsupported: {reason}")


class EmptyModel(ParseError):
    pass


class SchemaError(ParseError):
    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}")


class InfeasibleToolpath(WaypathError):
    pass


class NotAPermutation(WaypathError, ValueError):
    pass


class SameContour(WaypathError, ValueError):
    pass


class TooLarge(WaypathError):
    pass


class LayerOutOfRange(WaypathError, IndexError):
    pass
