from typing import Any, Dict

from ..errors import ConfigError
from .types import Type


class ConfigSchemaMeta(type):
    def __init__(cls, name, bases, namespace):
        fields: Dict[str, Type] = {}
        for base in reversed(cls.__mro__[1:]):
            fields.update(getattr(base, "fields", {}))
        for key, value in namespace.items():
            if isinstance(value, Type):
                fields[key] = value
        cls.fields = fields
        super().__init__(name, bases, namespace)


class ConfigSchema(metaclass=ConfigSchemaMeta):

    """
    A section of settings. Fields are declared as class attributes holding
    typed field descriptions; instances hold validated values, start from
    the declared defaults and are checked for cross-field consistency after
    every change.
    """

    fields: Dict[str, Type] = {}

    def __init__(self, **values: Any):
        for key, field in self.fields.items():
            object.__setattr__(self, key, field.default)
        self.update(**values)

    def __setattr__(self, key: str, value: Any) -> None:
        self.update(**{key: value})

    def __eq__(self, other: object) -> bool:
        if type(self) is not type(other):
            return False
        return self.as_dict() == other.as_dict()  # type: ignore

    def __repr__(self) -> str:
        args = ", ".join(f"{k}={v!r}" for k, v in self.as_dict().items())
        return f"{type(self).__name__}({args})"

    def update(self, **values: Any) -> "ConfigSchema":
        previous = self.as_dict()
        try:
            for key, value in values.items():
                if key not in self.fields:
                    raise ConfigError(f"unknown setting {key}")
                object.__setattr__(self, key, self.fields[key].validate(value))
            self.check()
        except ConfigError:
            for key, value in previous.items():
                object.__setattr__(self, key, value)
            raise
        return self

    def replace(self, **values: Any) -> Any:
        return type(self)(**{**self.as_dict(), **values})

    def set_text(self, key: str, text: str) -> None:
        if key not in self.fields:
            raise ConfigError(f"unknown setting {key}")
        self.update(**{key: self.fields[key].parse(text)})

    def format(self, key: str) -> str:
        return self.fields[key].format(getattr(self, key))

    def as_dict(self) -> Dict[str, Any]:
        return {key: getattr(self, key) for key in self.fields}

    def check(self) -> None:
        """
        Cross-field invariants; raises `ConfigError`.
        """
