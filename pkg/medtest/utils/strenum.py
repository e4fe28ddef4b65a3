from enum import Enum
from typing import List, Type, TypeVar

E = TypeVar("E", bound="StrEnum")


class StrEnum(str, Enum):
    def __str__(self) -> str:
        """Used when dumping enum fields in a table or JSON document."""
        ret: str = self.value
        return ret

    @classmethod
    def list(cls) -> List[str]:
        return [c.value for c in cls]

    @classmethod
    def parse(cls: Type[E], value: str) -> E:
        """Look a member up by value, case-insensitively.

        Raises:
            ValueError: with the list of accepted values.
        """
        for member in cls:
            if member.value.lower() == str(value).lower():
                return member
        raise ValueError(f"{value!r} is not one of {cls.list()}")
