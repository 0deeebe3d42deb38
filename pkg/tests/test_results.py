import pytest

from hopper_est.models import ErrorResponse, ItemResult
from hopper_est.services.config import ConfigError
from hopper_est.services.dataset import DataError
from hopper_est.services.dynamics import DynamicsFault
from hopper_est.utils.results import (
    GLOBAL_ERROR_KEY,
    BatchFailure,
    error_response,
    exception_response,
    first_failure,
    format_results,
    require_outputs,
)


def _raised(exc: Exception) -> Exception:
    try:
        raise exc
    except Exception as caught:
        return caught


def test_error_response_omits_empty_fields() -> None:
    assert error_response("bad seed", code="config_error") == {
        "error": True,
        "code": "config_error",
        "message": "bad seed",
    }


def test_exception_response_names_the_offending_key() -> None:
    payload = exception_response(ConfigError("Unknown filter kind 'kf9'", key="hvse.filter"))

    assert payload["code"] == "config_error"
    assert payload["exception"] == "ConfigError"
    assert payload["details"] == {"field": "hvse.filter"}
    ErrorResponse.model_validate(payload)


def test_exception_response_keeps_details() -> None:
    exc = DataError("Log x is missing columns: t", details={"missing": ["t"]})

    payload = exception_response(exc)

    assert payload["code"] == "data_error"
    assert payload["details"] == {"missing": ["t"]}


def test_exception_response_for_dynamics_fault() -> None:
    payload = exception_response(DynamicsFault("dt must be positive, got 0.0", field="dt"))

    assert payload["code"] == "dynamics_fault"
    assert payload["details"] == {"field": "dt"}


def test_exception_response_defaults_code() -> None:
    payload = exception_response(RuntimeError("boom"))

    assert payload["code"] == "error"
    assert "details" not in payload


def test_format_results_success() -> None:
    formatted = format_results({"trial_000": {"rows": 421}})

    assert formatted == {"trial_000": {"success": True, "output": {"rows": 421}}}
    ItemResult.model_validate(formatted["trial_000"])


def test_format_results_failure_with_traceback() -> None:
    formatted = format_results({"trial_001": _raised(ValueError("Something went wrong"))})

    res = formatted["trial_001"]
    assert res["success"] is False
    assert res["error"]["code"] == "task_failed"
    assert res["error"]["message"] == "Something went wrong"
    assert res["error"]["exception"] == "ValueError"
    assert "raise exc" in res["error"]["details"]["traceback"]
    ItemResult.model_validate(res)


def test_format_results_failure_without_message() -> None:
    formatted = format_results({"k": RuntimeError()})

    assert formatted["k"]["error"]["message"] == "Task failed"
    assert "details" not in formatted["k"]["error"]


def test_first_failure_prefers_global_error() -> None:
    raw = {
        GLOBAL_ERROR_KEY: error_response("timed out", code="timeout"),
        "a": {"success": True, "output": 1},
    }

    assert first_failure(raw)["code"] == "timeout"


def test_first_failure_finds_failed_item() -> None:
    raw = {
        "a": {"success": True, "output": 1},
        "b": {"success": False, "error": {"code": "estimator_fault", "message": "nan"}},
    }

    assert first_failure(raw) == {"code": "estimator_fault", "message": "nan"}
    assert first_failure({"a": {"success": True, "output": 1}}) is None


def test_require_outputs() -> None:
    assert require_outputs({"a": {"success": True, "output": 1}}) == {"a": 1}


def test_require_outputs_raises_batch_failure() -> None:
    raw = {"b": {"success": False, "error": {"code": "estimator_fault", "message": "nan"}}}

    with pytest.raises(BatchFailure, match="nan") as exc_info:
        require_outputs(raw)

    assert exc_info.value.code == "estimator_fault"
    assert exc_info.value.payload["message"] == "nan"
