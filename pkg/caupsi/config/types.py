import abc
from typing import Any, Optional, Sequence

from ..errors import ConfigError


class Type(abc.ABC):

    """
    A typed configuration field. `parse` reads the textual form used in config
    files and on the command line, `format` writes it back so that
    `parse(format(v)) == v` for every valid value.
    """

    type: Any = object

    def __init__(self, default: Any):
        self.name = ""
        self.default = self.validate(default) if default is not None else None

    def __set_name__(self, owner: Any, name: str) -> None:
        self.name = name

    @abc.abstractmethod
    def validate(self, value: Any) -> Any:
        raise NotImplementedError

    @abc.abstractmethod
    def parse(self, text: str) -> Any:
        raise NotImplementedError

    def format(self, value: Any) -> str:
        return str(value)

    def fail(self, message: str) -> ConfigError:
        return ConfigError(f"{self.name or 'value'}: {message}")


class Numeric(Type):
    def __init__(self, default: Any, min: Any, max: Any):
        self.min = min
        self.max = max
        super().__init__(default)

    def check_range(self, value: Any) -> Any:
        if self.min is not None and value < self.min:
            raise self.fail(f"{value} is below the minimum {self.min}")
        if self.max is not None and value > self.max:
            raise self.fail(f"{value} is above the maximum {self.max}")
        return value


class Integer(Numeric):
    """
    Represents integer settings
    """

    type = int

    def __init__(
        self, default: int, min: Optional[int] = None, max: Optional[int] = None
    ):
        super().__init__(default, min, max)

    def validate(self, value: Any) -> int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise self.fail(f"expected an integer, got {value!r}")
        return self.check_range(value)

    def parse(self, text: str) -> int:
        try:
            value = int(text.strip())
        except ValueError:
            raise self.fail(f"expected an integer, got {text!r}")
        return self.validate(value)


class Float(Numeric):
    """
    Represents real-valued settings; written with `repr` so that values
    round-trip exactly.
    """

    type = float

    def __init__(
        self, default: float, min: Optional[float] = None, max: Optional[float] = None
    ):
        super().__init__(default, min, max)

    def validate(self, value: Any) -> float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise self.fail(f"expected a number, got {value!r}")
        value = float(value)
        if value != value:
            raise self.fail("NaN is not a valid setting")
        return self.check_range(value)

    def parse(self, text: str) -> float:
        try:
            value = float(text.strip())
        except ValueError:
            raise self.fail(f"expected a number, got {text!r}")
        return self.validate(value)

    def format(self, value: Any) -> str:
        return repr(float(value))


class Boolean(Type):

    type = bool

    truthy = ("true", "yes", "on", "1")
    falsy = ("false", "no", "off", "0")

    def validate(self, value: Any) -> bool:
        if not isinstance(value, bool):
            raise self.fail(f"expected true or false, got {value!r}")
        return value

    def parse(self, text: str) -> bool:
        lowered = text.strip().lower()
        if lowered in self.truthy:
            return True
        if lowered in self.falsy:
            return False
        raise self.fail(f"expected true or false, got {text!r}")

    def format(self, value: Any) -> str:
        return "true" if value else "false"


class Choice(Type):
    """
    Represents a setting with a fixed set of textual options
    """

    type = str

    def __init__(self, options: Sequence[str], default: str):
        self.options = tuple(options)
        super().__init__(default)

    def validate(self, value: Any) -> str:
        if value not in self.options:
            raise self.fail(f"expected one of {', '.join(self.options)}, got {value!r}")
        return value

    def parse(self, text: str) -> str:
        return self.validate(text.strip())
