from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Union

from medtest.configuration.base_config import BaseConfig, InvalidConfiguration
from medtest.defaults import DEFAULT_DELTA
from medtest.utils.constants import NaPolicy, OutcomeFamily

MEDIATORS_NOT_VALID = "mediator_columns: at least one mediator column is required."
COLUMNS_NOT_DISJOINT = "{}: column {!r} is used more than once."
OUTCOME_REQUIRED = "outcome_column: required for the {} family."
SURVIVAL_REQUIRED = "{}: required for the cox family."
OUTCOME_NOT_ALLOWED = (
    "outcome_column: the cox family uses time_column and event_column."
)
SURVIVAL_NOT_ALLOWED = "{}: only the cox family takes survival columns."
DELTA_NOT_VALID = "delta: must lie in (0, 1). Not {}."
CHOICE_NOT_VALID = "{}: {} is not valid. Must be one of {}."


@dataclass
class AnalysisSpec(BaseConfig):
    """Inputs of a mediation analysis on a CSV file.

    Args:
        data_path (str): CSV file with a header row.
        exposure_column (str): Column holding the exposure X.
        mediator_columns (list[str]): Columns holding the mediators, at least one.
        outcome_family (OutcomeFamily): linear, logistic or cox.
        covariate_columns (list[str]): Adjustment covariates. Defaults to none.
        outcome_column (str, optional): Outcome for the linear and logistic families.
        time_column (str, optional): Observed times for the cox family.
        event_column (str, optional): Event indicators for the cox family.
        delta (float): Per-mediator level of tests and intervals. Defaults to 0.05.
        na_policy (NaPolicy): Drop rows with missing or non-numeric cells, or stop.
    """

    data_path: str
    exposure_column: str
    mediator_columns: List[str]
    outcome_family: Union[OutcomeFamily, str]
    covariate_columns: List[str] = field(default_factory=list)
    outcome_column: Optional[str] = None
    time_column: Optional[str] = None
    event_column: Optional[str] = None
    delta: float = DEFAULT_DELTA
    na_policy: Union[NaPolicy, str] = NaPolicy.DROP_ROWS

    def __post_init__(self) -> None:
        for name, enum in (("outcome_family", OutcomeFamily), ("na_policy", NaPolicy)):
            try:
                setattr(self, name, enum.parse(str(getattr(self, name))))
            except ValueError:
                raise InvalidConfiguration(
                    CHOICE_NOT_VALID.format(name, getattr(self, name), enum.list())
                ) from None

    @property
    def outcome_columns(self) -> List[str]:
        if self.outcome_family == OutcomeFamily.COX:
            return [str(self.time_column), str(self.event_column)]
        return [str(self.outcome_column)]

    @property
    def used_columns(self) -> List[str]:
        return [
            self.exposure_column,
            *self.mediator_columns,
            *self.covariate_columns,
            *self.outcome_columns,
        ]

    def _validate(self) -> None:
        if not self.mediator_columns:
            raise InvalidConfiguration(MEDIATORS_NOT_VALID)
        if self.outcome_family == OutcomeFamily.COX:
            for name in ("time_column", "event_column"):
                if not getattr(self, name):
                    raise InvalidConfiguration(SURVIVAL_REQUIRED.format(name))
            if self.outcome_column:
                raise InvalidConfiguration(OUTCOME_NOT_ALLOWED)
        else:
            if not self.outcome_column:
                raise InvalidConfiguration(OUTCOME_REQUIRED.format(self.outcome_family))
            for name in ("time_column", "event_column"):
                if getattr(self, name):
                    raise InvalidConfiguration(SURVIVAL_NOT_ALLOWED.format(name))
        seen = set()
        for column in self.used_columns:
            if column in seen:
                raise InvalidConfiguration(
                    COLUMNS_NOT_DISJOINT.format("columns", column)
                )
            seen.add(column)
        if not 0.0 < self.delta < 1.0:
            raise InvalidConfiguration(DELTA_NOT_VALID.format(self.delta))
        super()._validate()
