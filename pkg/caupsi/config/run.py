import logging
from pathlib import Path
from typing import Any, Dict, Iterable, Mapping, Optional, Tuple, Union

from ..errors import ConfigError, MissingFileError, StorageError
from .schema import ConfigSchema
from .sections import GeneratorConfig, LossConfig, ModelConfig, TrainConfig

logger = logging.getLogger(__name__)


class RunConfig:

    """
    All settings of a run as one flat key space. The textual form has one
    `key = value` per line; `#` starts a comment. Unknown and duplicate keys
    are rejected.

    Overrides are applied per section in a single update, so cross-field
    checks see the final values regardless of the order of the lines.
    """

    section_names = ("model", "train", "loss", "generator")

    def __init__(
        self,
        model: Optional[ModelConfig] = None,
        train: Optional[TrainConfig] = None,
        loss: Optional[LossConfig] = None,
        generator: Optional[GeneratorConfig] = None,
    ):
        self.model = model or ModelConfig()
        self.train = train or TrainConfig()
        self.loss = loss or LossConfig()
        self.generator = generator or GeneratorConfig()

    @property
    def sections(self) -> Tuple[ConfigSchema, ...]:
        return tuple(getattr(self, name) for name in self.section_names)

    def section_of(self, key: str) -> ConfigSchema:
        for section in self.sections:
            if key in section.fields:
                return section
        raise ConfigError(f"unknown setting {key}")

    def keys(self) -> Iterable[str]:
        for section in self.sections:
            yield from section.fields

    def get(self, key: str) -> Any:
        return getattr(self.section_of(key), key)

    def override(self, values: Mapping[str, str]) -> None:
        """
        Applies textual values, such as `{"max_epochs": "30"}`.
        """
        staged: Dict[int, Dict[str, Any]] = {}
        for key, text in values.items():
            section = self.section_of(key)
            staged.setdefault(id(section), {})[key] = section.fields[key].parse(text)
        for section in self.sections:
            if id(section) in staged:
                section.update(**staged[id(section)])

    def apply(self, pairs: Iterable[str]) -> None:
        """
        Applies `key=value` overrides as given on the command line.
        """
        values = {}
        for pair in pairs:
            key, sep, value = pair.partition("=")
            if not sep:
                raise ConfigError(f"expected key=value, got {pair!r}")
            values[key.strip()] = value
        self.override(values)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RunConfig):
            return False
        return self.sections == other.sections

    def copy(self) -> "RunConfig":
        return RunConfig(*(section.replace() for section in self.sections))

    def dumps(self) -> str:
        lines = []
        for name, section in zip(self.section_names, self.sections):
            lines.append(f"# {name}")
            for key in section.fields:
                lines.append(f"{key} = {section.format(key)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def parse(cls, text: str, source: str = "<config>") -> "RunConfig":
        config = cls()
        values: Dict[str, str] = {}
        lines: Dict[str, int] = {}
        for number, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            key = key.strip()
            if not sep:
                raise ConfigError(f"{source}:{number}: expected key = value")
            if key in lines:
                raise ConfigError(
                    f"{source}:{number}: {key} already set on line {lines[key]}"
                )
            try:
                config.section_of(key)
            except ConfigError as e:
                raise ConfigError(f"{source}:{number}: {e}")
            lines[key] = number
            values[key] = value
        try:
            config.override(values)
        except ConfigError as e:
            raise ConfigError(f"{source}: {e}")
        return config

    @classmethod
    def load(cls, path: Union[str, Path]) -> "RunConfig":
        path = Path(path)
        if not path.exists():
            raise MissingFileError(f"config file {path} does not exist")
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as e:
            raise StorageError(f"cannot read {path}: {e}")
        return cls.parse(text, str(path))

    def save(self, path: Union[str, Path]) -> None:
        try:
            Path(path).write_text(self.dumps(), encoding="utf-8")
        except OSError as e:
            raise StorageError(f"cannot write {path}: {e}")
        logger.debug("wrote config snapshot to %s", path)
