import json
import time
from dataclasses import is_dataclass
from enum import Enum
from typing import Any, Dict, List, Optional

import click
import numpy as np

from app.models.base import GaudinError, InputError

# Exit codes
EXIT_OK = 0
EXIT_VERIFICATION_FAILED = 1
EXIT_INPUT_ERROR = 2
EXIT_NUMERICAL_ERROR = 3


class DocumentKind(str, Enum):
    PROBLEM = 'problem'
    SOLUTIONS = 'solutions'
    OPER = 'oper'
    CONNECTION = 'connection'
    MONODROMY = 'monodromy'
    TRANSFORM = 'transform'
    REPCHECK = 'repcheck'
    REPORT = 'report'
    ERROR = 'error'


# ===========================================
# JSON encoding
# ===========================================

def to_jsonable(value: Any) -> Any:
    """Complex numbers become [re, im]; arrays become nested lists."""
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (complex, np.complexfloating)):
        return [float(value.real), float(value.imag)]
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, np.ndarray):
        return [to_jsonable(v) for v in value.tolist()]
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if hasattr(value, 'to_dict'):
        return to_jsonable(value.to_dict())
    if is_dataclass(value):
        return to_jsonable(value.__dict__)
    return value


def dumps(document: Dict[str, Any]) -> str:
    return json.dumps(to_jsonable(document), indent=2)


def load_document(path: str, kinds: Optional[List[DocumentKind]] = None) -> Dict[str, Any]:
    """Read a JSON document, unwrapping run reports to their results payload."""
    try:
        with click.open_file(path, 'r') as handle:
            data = json.load(handle)
    except json.JSONDecodeError as e:
        raise InputError(f"Malformed JSON in {path}: {e}", error_code='malformed_json')
    except OSError as e:
        raise InputError(f"Cannot read {path}: {e}", error_code='unreadable_input')
    if not isinstance(data, dict):
        raise InputError("Top-level JSON value must be an object", error_code='malformed_json')
    if data.get('kind') == DocumentKind.REPORT.value:
        data = data.get('results') or {}
    if kinds:
        kind = data.get('kind', kinds[0].value)
        if kind not in [k.value for k in kinds]:
            raise InputError(
                f"Expected a document of kind {[k.value for k in kinds]}, got {kind!r}",
                error_code='wrong_document_kind'
            )
    return data


def write_document(document: Dict[str, Any], output: str) -> None:
    with click.open_file(output, 'w') as handle:
        handle.write(dumps(document))
        handle.write('\n')


# ===========================================
# Report documents
# ===========================================

def success_response(
    command: str,
    results: Any,
    inputs: Optional[Dict] = None,
    tolerances: Optional[Dict] = None,
    started_at: Optional[float] = None,
    version: str = '1.0.0',
    verified: Optional[bool] = None
) -> Dict[str, Any]:
    response: Dict[str, Any] = {
        'kind': DocumentKind.REPORT.value,
        'success': True,
        'command': command,
        'inputs': inputs or {},
        'results': results,
        'tolerances': tolerances or {},
    }
    if verified is not None:
        response['verified'] = verified
    response['wall_time'] = time.perf_counter() - started_at if started_at is not None else 0.0
    response['version'] = version
    return response


def error_response(
    message: str,
    error_code: str = 'error',
    command: Optional[str] = None,
    stage: Optional[str] = None,
    errors: Optional[List[str]] = None,
    data: Optional[Dict] = None
) -> Dict[str, Any]:
    response: Dict[str, Any] = {
        'kind': DocumentKind.ERROR.value,
        'success': False,
        'message': message,
        'error': error_code
    }
    if command:
        response['command'] = command
    if stage:
        response['stage'] = stage
    if errors:
        response['errors'] = errors
    if data:
        response['data'] = data
    return response


def validation_error(errors: List[str]) -> InputError:
    return InputError("Validation failed: " + '; '.join(errors), error_code='validation_error',
                      details={'errors': errors})


def gaudin_error_response(error: GaudinError, command: Optional[str] = None) -> Dict[str, Any]:
    return error_response(
        message=error.message,
        error_code=error.error_code,
        command=command,
        stage=error.stage,
        errors=error.details.get('errors'),
        data={k: v for k, v in error.details.items() if k != 'errors'} or None
    )


def exit_code_for(error: Exception) -> int:
    if isinstance(error, InputError):
        return EXIT_INPUT_ERROR
    return EXIT_NUMERICAL_ERROR
