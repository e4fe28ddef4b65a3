from __future__ import annotations

from dataclasses import MISSING, asdict, dataclass, fields
from enum import Enum
from typing import Any, Dict, Mapping, Type, TypeVar

from medtest.errors import MedTestException


class InvalidConfiguration(MedTestException):
    pass


INVALID_KEY_ERROR_MSG = "{}: unknown configuration key. Allowed keys are {}."
MISSING_KEY_ERROR_MSG = "{}: required configuration key is missing."
NOT_A_MAPPING_ERROR_MSG = "Configuration must be a JSON object, not {}."

C = TypeVar("C", bound="BaseConfig")


@dataclass
class BaseConfig:
    """Base class for all declarative configuration classes.

    Configurations round-trip through plain dictionaries so that they can be
    read from and written to JSON. Validation errors are raised as
    `InvalidConfiguration` with a message that starts with the offending field.
    """

    def to_dict(self) -> Dict[str, Any]:
        """Converts the configuration to a dictionary.

        Enum members are replaced by their values.

        Returns:
            dict: Configuration dictionary.
        """
        self._validate()
        return self._plain(asdict(self))

    @classmethod
    def from_dict(cls: Type[C], conf: Mapping[str, Any]) -> C:
        """Creates a configuration object from a dictionary.

        Args:
            conf (dict): Configuration dictionary.

        Returns:
            BaseConfig: Validated configuration object.

        Raises:
            InvalidConfiguration: for unknown or missing keys and invalid values.
        """
        if not isinstance(conf, Mapping):
            raise InvalidConfiguration(
                NOT_A_MAPPING_ERROR_MSG.format(type(conf).__name__)
            )
        allowed = [field.name for field in fields(cls) if field.init]
        for key in conf:
            if key not in allowed:
                raise InvalidConfiguration(INVALID_KEY_ERROR_MSG.format(key, allowed))
        for field in fields(cls):
            required = field.default is MISSING and field.default_factory is MISSING
            if field.init and required and field.name not in conf:
                raise InvalidConfiguration(MISSING_KEY_ERROR_MSG.format(field.name))
        config = cls(**conf)
        config._validate()
        return config

    def validate(self) -> None:
        self._validate()

    @classmethod
    def _plain(cls, value: Any) -> Any:
        if isinstance(value, Enum):
            return value.value
        if isinstance(value, dict):
            return {k: cls._plain(v) for k, v in value.items()}
        if isinstance(value, (list, tuple)):
            return [cls._plain(v) for v in value]
        return value

    def _validate(self) -> None:
        pass
