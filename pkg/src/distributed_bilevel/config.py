"""Experiment configuration files.

The format is sectioned key=value text:

    [stepsizes]
    alpha = 0.0007   # comments run to end of line
    lambda = 20

Lists are comma-separated. Every key keeps its line number so validation
errors point at the offending line.
"""

import logging
from pathlib import Path

from pydantic import ValidationError
from typing_extensions import Optional

from distributed_bilevel.errors import ConfigurationError
from distributed_bilevel.state_experiment import LIST_KEYS, PATH_KEYS, ExperimentConfig

logger = logging.getLogger(__name__)

SECTIONS = ("problem", "network", "stepsizes", "run", "monitors")

# ===== PARSING =====

def _split(raw: str) -> tuple[str, str]:
    key, _, value = raw.partition("=")
    return key.strip(), value.strip()


def _convert(section: str, key: str, value: str, base_dir: Optional[Path]) -> object:
    if key in LIST_KEYS.get(section, ()):
        return [item.strip() for item in value.split(",") if item.strip()]
    if key in PATH_KEYS.get(section, ()):
        path = Path(value).expanduser()
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        return path
    return value


def parse_config_text(text: str, base_dir: Optional[Path] = None) -> ExperimentConfig:
    """Parse and validate configuration text.

    Args:
        text: File contents
        base_dir: Directory relative paths are resolved against

    Returns:
        Validated ExperimentConfig

    Raises:
        ConfigurationError: with the line number of the offending key
    """
    raw: dict[str, dict[str, object]] = {}
    lines: dict[tuple[str, ...], int] = {}
    section: Optional[str] = None

    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if body.startswith("[") and body.endswith("]"):
            section = body[1:-1].strip()
            if section not in SECTIONS:
                raise ConfigurationError(f"unknown section [{section}]", line=lineno)
            if section in raw:
                raise ConfigurationError(f"section [{section}] appears twice", line=lineno)
            raw[section] = {}
            lines[(section,)] = lineno
            continue
        if "=" not in body:
            raise ConfigurationError(f"expected 'key = value', got {line.strip()!r}", line=lineno)
        if section is None:
            raise ConfigurationError("key outside of any section", line=lineno)
        key, value = _split(body)
        if not key:
            raise ConfigurationError("empty key", line=lineno)
        if key in raw[section]:
            raise ConfigurationError(f"duplicate key {key!r} in [{section}]", line=lineno, key=key)
        raw[section][key] = _convert(section, key, value, base_dir)
        lines[(section, key)] = lineno

    try:
        return ExperimentConfig.model_validate(raw)
    except ValidationError as exc:
        error = exc.errors()[0]
        loc = tuple(str(part) for part in error["loc"])
        key = loc[1] if len(loc) > 1 else (loc[0] if loc else None)
        line = lines.get(loc[:2]) or lines.get(loc[:1])
        where = f"[{loc[0]}] {key}" if len(loc) > 1 else f"[{key}]"
        if error["type"] == "missing":
            message = f"{where}: missing required key" if len(loc) > 1 else f"missing section [{key}]"
        else:
            message = f"{where}: {error['msg']}"
        raise ConfigurationError(message, line=line, key=key) from exc


def parse_config(path: Path) -> ExperimentConfig:
    """Read and validate a configuration file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    try:
        config = parse_config_text(text, base_dir=path.resolve().parent)
    except ConfigurationError as exc:
        raise ConfigurationError(f"{path}: {exc.detail}", line=exc.line, key=exc.key) from exc
    logger.info("Loaded %s config from %s", config.problem.family, path)
    return config

# ===== SERIALIZATION =====

def _format(value: object) -> str:
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, list):
        return ", ".join(_format(v) for v in value)
    return str(value)


def serialize_config(config: ExperimentConfig) -> str:
    """Canonical text form with every default applied; parses back to an equal config."""
    blocks = []
    for section in SECTIONS:
        values = getattr(config, section).model_dump(by_alias=True, exclude_none=True)
        lines = [f"[{section}]"] + [f"{key} = {_format(value)}" for key, value in values.items()]
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + "\n"


def with_seed(config: ExperimentConfig, seed: Optional[int]) -> ExperimentConfig:
    """Override the network and initialization seeds (the --seed flag)."""
    if seed is None:
        return config
    if not 0 <= seed < 2**64:
        raise ConfigurationError(f"seed must be an unsigned 64-bit integer, got {seed}", key="seed")
    return config.model_copy(
        update={
            "network": config.network.model_copy(update={"seed": seed}),
            "run": config.run.model_copy(update={"init_seed": seed}),
        }
    )


def with_stepsizes(config: ExperimentConfig, **updates: object) -> ExperimentConfig:
    """Copy of the config with [stepsizes] fields replaced (used by sweeps)."""
    fields = config.stepsizes.model_dump(by_alias=False)
    fields.update(updates)
    section = type(config.stepsizes).model_validate({("lambda" if k == "lam" else k): v for k, v in fields.items()})
    return config.model_copy(update={"stepsizes": section})


def with_output_dir(config: ExperimentConfig, output_dir: Path) -> ExperimentConfig:
    """Copy of the config writing to another directory."""
    return config.model_copy(update={"run": config.run.model_copy(update={"output_dir": Path(output_dir)})})
