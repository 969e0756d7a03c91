"""Exception hierarchy shared across the toolkit."""


class TopoBiError(Exception):
    """Base class for all domain failures (CLI exit status 1)."""


class ConfigurationError(TopoBiError):
    pass


class NotInVocabulary(TopoBiError, KeyError):
    def __str__(self) -> str:
        return Exception.__str__(self)


class CapacityError(TopoBiError):
    """A device family or port class exceeded its vocabulary cap."""


class BadPinSet(TopoBiError):
    pass


class DuplicateTerminal(TopoBiError):
    """A terminal role was bound to a second, different net."""

    def __init__(self, message: str, position: int | None = None):
        super().__init__(message if position is None else f"{message} (position {position})")
        self.position = position


class GrammarViolation(TopoBiError):
    def __init__(self, message: str, position: int | None = None):
        super().__init__(message if position is None else f"{message} (position {position})")
        self.position = position


class ParseError(TopoBiError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class InvalidGraph(TopoBiError):
    pass


class SequenceOverflow(TopoBiError):
    pass


class NoSupplyPath(TopoBiError):
    pass


class TranslationFail(TopoBiError):
    pass


class SessionError(TopoBiError):
    pass


class ProtocolError(SessionError):
    pass
