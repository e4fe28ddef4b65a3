from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Union

from medtest.configuration.base_config import (
    NOT_A_MAPPING_ERROR_MSG,
    BaseConfig,
    InvalidConfiguration,
)
from medtest.configuration.scenario import ScenarioConfig
from medtest.utils.constants import StudyKind

STUDY_NOT_VALID = "study: {} is not valid. Must be one of {}."
SCENARIOS_NOT_VALID = "scenarios: must be a non-empty list of objects."
SCENARIO_ERROR = "scenarios[{}].{}"
SIZE_POWER_NEEDS_ONE = (
    "scenarios[{}].alpha: size/power studies take one mediator, got {}."
)
FWER_NEEDS_SEVERAL = (
    "scenarios[{}].alpha: FWER studies take at least two mediators, got {}."
)
UNREADABLE_PLAN = "{}: cannot read simulation plan ({})."


@dataclass
class SimulationPlan(BaseConfig):
    """A bundle of scenarios run by one study driver.

    In the JSON form, every top-level key other than `name`, `study` and
    `scenarios` is a default copied into each scenario that does not set it.

    Args:
        name (str): Plan name, used for output file names.
        study (StudyKind): Study driver shared by all scenarios.
        scenarios (list[ScenarioConfig]): Scenarios, in table row order.
    """

    name: str
    study: Union[StudyKind, str]
    scenarios: List[ScenarioConfig] = field(default_factory=list)

    def __post_init__(self) -> None:
        try:
            self.study = StudyKind.parse(str(self.study))
        except ValueError:
            raise InvalidConfiguration(
                STUDY_NOT_VALID.format(self.study, StudyKind.list())
            ) from None

    @classmethod
    def from_dict(cls, conf: Mapping[str, Any]) -> SimulationPlan:
        if not isinstance(conf, Mapping):
            raise InvalidConfiguration(
                NOT_A_MAPPING_ERROR_MSG.format(type(conf).__name__)
            )
        defaults = {
            k: v for k, v in conf.items() if k not in ("name", "study", "scenarios")
        }
        raw = conf.get("scenarios")
        if not isinstance(raw, list) or not raw:
            raise InvalidConfiguration(SCENARIOS_NOT_VALID)
        scenarios = []
        for i, entry in enumerate(raw):
            if not isinstance(entry, Mapping):
                raise InvalidConfiguration(SCENARIOS_NOT_VALID)
            try:
                scenarios.append(ScenarioConfig.from_dict({**defaults, **entry}))
            except InvalidConfiguration as e:
                raise InvalidConfiguration(SCENARIO_ERROR.format(i, e)) from e
        plan = cls(
            name=str(conf.get("name", "simulation")),
            study=conf.get("study", ""),
            scenarios=scenarios,
        )
        plan._validate()
        return plan

    @classmethod
    def load(cls, path: Union[str, Path]) -> SimulationPlan:
        try:
            with open(path, encoding="utf-8") as config_file:
                conf = json.load(config_file)
        except (OSError, json.JSONDecodeError) as e:
            raise InvalidConfiguration(UNREADABLE_PLAN.format(path, e)) from e
        return cls.from_dict(conf)

    def to_dict(self) -> Dict[str, Any]:
        self._validate()
        return {
            "name": self.name,
            "study": str(self.study),
            "scenarios": [scenario.to_dict() for scenario in self.scenarios],
        }

    def with_overrides(
        self, reps: Optional[int] = None, base_seed: Optional[int] = None
    ) -> SimulationPlan:
        changes: Dict[str, Any] = {}
        if reps is not None:
            changes["reps"] = reps
        if base_seed is not None:
            changes["base_seed"] = base_seed
        if not changes:
            return self
        scenarios = []
        for i, scenario in enumerate(self.scenarios):
            try:
                scenarios.append(scenario.with_overrides(**changes))
            except InvalidConfiguration as e:
                raise InvalidConfiguration(SCENARIO_ERROR.format(i, e)) from e
        return SimulationPlan(name=self.name, study=self.study, scenarios=scenarios)

    def _validate(self) -> None:
        if not self.scenarios:
            raise InvalidConfiguration(SCENARIOS_NOT_VALID)
        for i, scenario in enumerate(self.scenarios):
            if self.study == StudyKind.SIZE_POWER and scenario.d != 1:
                raise InvalidConfiguration(SIZE_POWER_NEEDS_ONE.format(i, scenario.d))
            if self.study == StudyKind.FWER and scenario.d < 2:
                raise InvalidConfiguration(FWER_NEEDS_SEVERAL.format(i, scenario.d))
        super()._validate()
