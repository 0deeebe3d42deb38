"""Result and error response shaping."""

import traceback
from collections.abc import Mapping
from typing import Any

from ..models import ErrorResponse, ItemResult

GLOBAL_ERROR_KEY = "__global__"


def error_response(
    message: str,
    code: str = "error",
    exception: str | None = None,
    details: dict[str, Any] | None = None,
) -> dict[str, Any]:
    """Create a standardized error response dictionary.

    Args:
        message: Human-readable error description
        code: Error code for programmatic handling
        exception: Stringified exception
        details: Additional error context information

    Returns:
        Standardized error response dictionary
    """
    return ErrorResponse(
        message=message,
        code=code,
        exception=exception,
        details=details,
    ).model_dump(exclude_none=True)


def exception_response(exc: BaseException) -> dict[str, Any]:
    """Error payload for a domain exception, keeping its ``code`` and details."""
    details = getattr(exc, "details", None)
    field = getattr(exc, "field", None) or getattr(exc, "key", None)
    if field is not None:
        details = {**(details or {}), "field": field}
    return error_response(
        str(exc),
        code=getattr(exc, "code", "error"),
        exception=type(exc).__name__,
        details=details,
    )


def format_results(outcomes: Mapping[str, Any]) -> dict[str, Any]:
    """Shape raw per-item outcomes into a standardized dictionary.

    Each outcome is either the item's output or the exception it raised.

    Args:
        outcomes: Mapping of item key to output or exception

    Returns:
        Dictionary {key: ItemResult dump}
    """
    formatted: dict[str, Any] = {}

    for key, outcome in outcomes.items():
        if isinstance(outcome, BaseException):
            res = ItemResult(
                success=False,
                error=ErrorResponse(
                    code=getattr(outcome, "code", "task_failed"),
                    message=str(outcome) or "Task failed",
                    exception=type(outcome).__name__,
                    details={
                        "traceback": "".join(traceback.format_tb(outcome.__traceback__))
                    }
                    if outcome.__traceback__
                    else None,
                ),
            )
        else:
            res = ItemResult(success=True, output=outcome)

        formatted[key] = res.model_dump(exclude_none=True)

    return formatted


def first_failure(raw: dict[str, Any]) -> dict[str, Any] | None:
    """The global error or the first failed item's error, if any."""
    if GLOBAL_ERROR_KEY in raw:
        return raw[GLOBAL_ERROR_KEY]
    for data in raw.values():
        if not data.get("success", False):
            return data.get("error")
    return None


def require_outputs(raw: dict[str, Any]) -> dict[str, Any]:
    """Outputs keyed by item; raises if the batch or any item failed.

    Raises:
        BatchFailure: Carrying the error payload of the first failure
    """
    failure = first_failure(raw)
    if failure is not None:
        raise BatchFailure(failure)
    return {key: data.get("output") for key, data in raw.items()}


class BatchFailure(ValueError):
    def __init__(self, payload: dict[str, Any]) -> None:
        super().__init__(payload.get("message", "Batch failed"))
        self.code = payload.get("code", "execution_error")
        self.payload = payload


__all__: list[str] = [
    "GLOBAL_ERROR_KEY",
    "BatchFailure",
    "error_response",
    "exception_response",
    "first_failure",
    "format_results",
    "require_outputs",
]
