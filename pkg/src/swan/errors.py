"""Exception hierarchy shared across the package."""


class SwanError(Exception):
    """Base class for all errors raised by this package."""


class PenmanSyntaxError(SwanError, ValueError):
    """Malformed Penman text. ``position`` is a character offset into the input."""

    def __init__(self, position: int, message: str):
        self.position = position
        self.message = message
        super().__init__(f"{message} (at offset {position})")


class OracleTooLarge(SwanError, ValueError):
    pass


class EmptyBank(SwanError, ValueError):
    pass


class InsufficientTemplates(SwanError):
    def __init__(self, found: int, needed: int):
        self.found = found
        self.needed = needed
        super().__init__(f"only {found} templates survive filtering, {needed} needed")


class FormatError(SwanError, ValueError):
    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}")


class DomainError(SwanError, ValueError):
    pass


class EmptyParagraph(SwanError, ValueError):
    pass


class EmptyInput(SwanError, ValueError):
    pass


class JudgeFormatError(SwanError, ValueError):
    pass


# External service failures. The CLI maps all of these to exit code 3.


class ServiceError(SwanError):
    pass


class TransportError(ServiceError):
    def __init__(self, status: int | None, body: str = ""):
        self.status = status
        self.body = body
        super().__init__(f"transport error (status={status}): {body[:200]}")


class ServiceTimeout(ServiceError):
    pass


class RateLimited(ServiceError):
    def __init__(self, retry_after: float | None):
        self.retry_after = retry_after
        super().__init__(f"rate limited (retry_after={retry_after})")


class ParserUnavailable(ServiceError):
    pass


class Unparseable(SwanError):
    """The parser produced no graph for ``text``. Not a service failure."""

    def __init__(self, text: str):
        self.text = text
        super().__init__(f"no AMR graph for sentence: {text[:80]!r}")
