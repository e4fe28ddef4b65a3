import json
from typing import Any, Dict, Optional


class MedTestException(Exception):
    """Base exception of the package.

    An optional context dict is appended to the message as a JSON details block.
    """

    def __init__(self, msg: str, context: Optional[Dict[str, Any]] = None):
        self.context = context or {}
        if not context:
            super().__init__(msg)
            return
        super().__init__(
            f"{msg}\nDetails: {json.dumps(context, indent=2, default=str)}"
        )


class DomainError(MedTestException, ValueError):
    """
    Exception class raised when an argument lies outside its mathematical domain.
    """


class DimensionError(DomainError):
    """
    Exception class raised when array dimensions do not agree.
    """


class EmptyFamilyError(DomainError):
    """
    Exception class raised when a family of mediator hypotheses is empty.
    """

    def __init__(self) -> None:
        super().__init__("At least one mediator fit is required")


class HeterogeneousSampleSizeError(DomainError):
    """
    Exception class raised when fits of one family disagree on the sample size.
    """

    def __init__(self, sizes: Any) -> None:
        super().__init__(
            "All mediator fits must share the same sample size",
            {"sample_sizes": sorted(set(sizes))},
        )


class NumericalError(MedTestException):
    """
    Base exception class for numerical failures.
    """


class DecompositionError(NumericalError):
    """
    Exception class raised when a Cholesky factorisation failed.
    """

    def __init__(self, pivot: int, reason: str = "pivot is not positive") -> None:
        self.pivot = pivot
        super().__init__(f"Cholesky decomposition failed at pivot {pivot}: {reason}")


class CalibrationError(NumericalError):
    """
    Exception class raised when censoring calibration failed.
    """

    def __init__(self, target: float, bracket: Any) -> None:
        super().__init__(
            "Censoring calibration failed",
            {"target": target, "bracket": list(bracket)},
        )


class ModelFitError(NumericalError):
    """
    Base exception class for regression fitters.
    """


class SingularDesignError(ModelFitError):
    """
    Exception class raised when a design matrix is rank deficient.
    """

    def __init__(self, rank: int, columns: int) -> None:
        super().__init__(
            f"Design matrix is rank deficient: rank {rank} for {columns} columns"
        )


class InsufficientDataError(ModelFitError):
    """
    Exception class raised when there are no more observations than parameters.
    """

    def __init__(self, n: int, p: int) -> None:
        super().__init__(f"Insufficient data: n={n} observations for p={p} parameters")


class SeparationError(ModelFitError):
    """
    Exception class raised when a logistic fit hit complete or quasi-complete
    separation.
    """

    def __init__(self, reason: str) -> None:
        super().__init__(f"Logistic fit failed from separation: {reason}")


class ConvergenceError(ModelFitError):
    """
    Exception class raised when a Newton fit did not converge.
    """

    def __init__(self, iterations: int, score_norm: float) -> None:
        self.iterations = iterations
        super().__init__(
            f"Fit did not converge in {iterations} iterations",
            {"score_sup_norm": score_norm},
        )


class DivergenceError(ModelFitError):
    """
    Exception class raised when a Cox partial likelihood is monotone and a
    coefficient diverges.
    """

    def __init__(self, reason: str) -> None:
        super().__init__(f"Cox fit diverged: {reason}")


class DegenerateFitError(ModelFitError):
    """
    Exception class raised when a fit is degenerate (constant outcome, no events,
    zero standard error).
    """

    def __init__(self, reason: str) -> None:
        super().__init__(f"Degenerate fit: {reason}")


class MediatorFitError(ModelFitError):
    """
    Exception class raised when a fitter failed inside a mediation fit.

    The mediator index is 1-based; `None` marks the joint outcome model.
    """

    def __init__(self, mediator_index: Optional[int], e: ModelFitError) -> None:
        self.mediator_index = mediator_index
        self.error = e
        where = (
            "outcome model"
            if mediator_index is None
            else f"mediator model {mediator_index}"
        )
        super().__init__(f"Fitting the {where} failed: {e}")


class DataError(MedTestException):
    """
    Base exception class for invalid input data.
    """


class InvalidDatasetError(DataError):
    """
    Exception class raised when a dataset breaks its invariants.
    """


class MissingColumnError(DataError):
    """
    Exception class raised when a named column is absent from a CSV file.
    """

    def __init__(self, column: str, available: Any) -> None:
        super().__init__(
            f"Column {column!r} not found", {"available_columns": list(available)}
        )


class NonNumericCellError(DataError):
    """
    Exception class raised when a cell cannot be read as a finite number.
    """

    def __init__(self, row: int, column: str, value: Any) -> None:
        self.row = row
        self.column = column
        super().__init__(
            f"Non-numeric value {value!r} at row {row}, column {column!r}"
        )


class PValueRangeError(DataError):
    """
    Exception class raised when a p-value lies outside [0, 1].
    """

    def __init__(self, row: int, value: float) -> None:
        self.row = row
        super().__init__(f"p-value {value!r} at row {row} is outside [0, 1]")


class FitFailureWarning(UserWarning):
    """Warning emitted when too many replications of a simulation failed to fit."""
