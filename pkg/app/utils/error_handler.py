"""
Error types and logging helpers shared by the toolkit.

Library code logs through the ``anm_toolkit`` logger namespace; the CLI calls
``configure_logging`` once so records render on stderr and stdout stays free
for CSV and graph output.
"""

import functools
import logging
from typing import Any, Callable, Optional, Sequence

from rich.console import Console
from rich.logging import RichHandler

LOGGER_NAME = "anm_toolkit"


class ToolkitError(Exception):
    """Base class for every failure raised on purpose by the toolkit"""


class InvalidInputError(ToolkitError, ValueError):
    """Arguments that violate an operation's preconditions"""


class RefusalError(ToolkitError):
    """Request refused because it would grow combinatorially past a cap"""


class StructuralError(ToolkitError):
    """A graph or matrix lacks the structure an operation needs"""


class DataFormatError(ToolkitError):
    """A file could not be parsed; the message names where"""


class RegressionFailure(ToolkitError):
    """A regression fit failed for a specific (response, predictors) pair"""

    def __init__(self, response: int, predictors: Sequence[int], cause: BaseException):
        self.response = response
        self.predictors = tuple(predictors)
        self.cause = cause
        super().__init__(
            f"regression of node {response} on {list(self.predictors)} failed: {cause}"
        )


def get_logger(name: Optional[str] = None) -> logging.Logger:
    """Return the package logger or one of its children"""
    if not name or name == LOGGER_NAME:
        return logging.getLogger(LOGGER_NAME)
    return logging.getLogger(f"{LOGGER_NAME}.{name.split('.')[-1]}")


def configure_logging(level: str = "INFO") -> logging.Logger:
    """Attach a rich handler on stderr to the package logger (idempotent)"""
    logger = get_logger()
    logger.setLevel(level.upper())
    if not any(isinstance(h, RichHandler) for h in logger.handlers):
        handler = RichHandler(
            console=Console(stderr=True),
            show_path=False,
            rich_tracebacks=True,
        )
        handler.setFormatter(logging.Formatter("%(message)s"))
        logger.addHandler(handler)
    logger.propagate = False
    return logger


class BasicErrorHandler:
    """Context-tagged logging front end used by long-running components"""

    def __init__(self, logger_name: str = LOGGER_NAME):
        self.logger = get_logger(logger_name)

    def log_error(self, message: str, context: str = ""):
        self.logger.error(self._format(message, context))

    def log_warning(self, message: str, context: str = ""):
        self.logger.warning(self._format(message, context))

    def log_info(self, message: str, context: str = ""):
        self.logger.info(self._format(message, context))

    @staticmethod
    def _format(message: str, context: str) -> str:
        return f"{context}: {message}" if context else message


error_handler = BasicErrorHandler()


def safe_execute(
    operation_name: str,
    on_failure: Optional[Callable[[Exception], Any]] = None,
):
    """
    Decorator that logs an exception raised by the wrapped call and returns
    ``on_failure(exc)`` instead (``None`` when no factory is given).
    """

    def decorator(func: Callable) -> Callable:
        @functools.wraps(func)
        def wrapper(*args, **kwargs):
            try:
                return func(*args, **kwargs)
            except Exception as exc:
                error_handler.log_error(f"{type(exc).__name__}: {exc}", operation_name)
                return on_failure(exc) if on_failure is not None else None

        return wrapper

    return decorator
