from typing import Any, Dict, List, Optional


# =============================================================================
# Error Hierarchy
# =============================================================================

class GaudinError(Exception):
    error_code: str = 'error'

    def __init__(self, message: str, error_code: Optional[str] = None,
                 stage: Optional[str] = None, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        if error_code:
            self.error_code = error_code
        self.stage = stage
        self.details = details or {}

    def with_stage(self, stage: str) -> 'GaudinError':
        if self.stage is None:
            self.stage = stage
        return self

    def to_dict(self) -> Dict[str, Any]:
        result = {
            'success': False,
            'message': self.message,
            'error': self.error_code
        }
        if self.stage:
            result['stage'] = self.stage
        if self.details:
            result['details'] = self.details
        return result


class InputError(GaudinError):
    error_code = 'invalid_input'


class NumericalError(GaudinError):
    error_code = 'numerical_failure'


class RootFindingError(NumericalError):
    error_code = 'root_not_converged'

    def __init__(self, message: str, best_iterate: Optional[List[complex]] = None, **kwargs):
        super().__init__(message, **kwargs)
        self.best_iterate = list(best_iterate) if best_iterate is not None else []


class ClusteredPolesError(NumericalError):
    error_code = 'clustered_poles'

    def __init__(self, message: str, cluster: Optional[List[complex]] = None, **kwargs):
        super().__init__(message, **kwargs)
        self.cluster = list(cluster or [])


class CollisionError(NumericalError):
    error_code = 'collision'

    def __init__(self, message: str, indices: Optional[List[Any]] = None, **kwargs):
        super().__init__(message, **kwargs)
        self.indices = list(indices or [])


class ClearanceError(NumericalError):
    error_code = 'clearance_violation'


class StepUnderflowError(NumericalError):
    error_code = 'step_underflow'


class NontrivialBundleError(NumericalError):
    error_code = 'nontrivial_bundle_type'


class DirectionMismatchError(NumericalError):
    error_code = 'direction_mismatch'


class DegenerateDualError(NumericalError):
    error_code = 'degenerate_dual'


class MultipleZeroError(NumericalError):
    error_code = 'multiple_zero'


class BethePreconditionError(NumericalError):
    error_code = 'bethe_precondition'
