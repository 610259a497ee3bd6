# exciton_pimc/config.py
"""Reading and writing run configurations (TOML, validated by pydantic)."""

import re
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Optional, Sequence

import tomli_w
from pydantic import ValidationError

from exciton_pimc.errors import ConfigError
from exciton_pimc.logger import get_logger, log_error, log_info
from exciton_pimc.models.config_models import RunConfig
from exciton_pimc.models.parameter_models import AlexanderParameters, DimerParameters

logger = get_logger(__name__)

PARAMETER_RECORDS = {"alexander": AlexanderParameters, "dimer": DimerParameters}

_SECTION = re.compile(r"^\s*\[\s*([A-Za-z0-9_.\-]+)\s*\]\s*(#.*)?$")


def locate_key(text: str, loc: Sequence) -> Optional[int]:
    """1-based line of the key named by a pydantic error location, if present."""
    names = [str(part) for part in loc if not isinstance(part, int)]
    if not names:
        return None
    section, key = ".".join(names[:-1]), names[-1]
    current = ""
    key_pattern = re.compile(rf"^\s*{re.escape(key)}\s*=")
    header_line = None
    for number, line in enumerate(text.splitlines(), start=1):
        header = _SECTION.match(line)
        if header:
            current = header.group(1)
            if current == ".".join(names):
                header_line = number
            continue
        if current == section and key_pattern.match(line):
            return number
    return header_line


def _raise_validation(text: str, error: ValidationError, prefix: Sequence = ()):
    first = error.errors()[0]
    loc = tuple(prefix) + tuple(first["loc"])
    key = ".".join(str(part) for part in loc)
    line = locate_key(text, loc)
    message = f"{key}: {first['msg']}" if key else first["msg"]
    log_error(logger, f"Config rejected: {message} (line {line})")
    raise ConfigError(message, line=line, key=key or None) from error


def parse_config(text: str) -> RunConfig:
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        match = re.search(r"line (\d+)", str(exc))
        raise ConfigError(f"syntax error: {exc}", line=int(match.group(1)) if match else None) from exc
    try:
        config = RunConfig.model_validate(raw)
    except ValidationError as exc:
        _raise_validation(text, exc)
    record = PARAMETER_RECORDS.get(config.model.name)
    if record is not None:
        try:
            record.model_validate(config.model.parameters)
        except ValidationError as exc:
            _raise_validation(text, exc, prefix=("model", "parameters"))
    return config


def load_config(path) -> RunConfig:
    path = Path(path)
    log_info(logger, f"Loading run configuration from '{path}'")
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file '{path}': {exc}") from exc
    return parse_config(text)


def dump_config(config: RunConfig) -> str:
    """TOML text that parses back to an equal RunConfig."""
    return tomli_w.dumps(config.model_dump(exclude_none=True))
