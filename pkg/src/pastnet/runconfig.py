"""Flat JSON run configuration with strict schema validation.

Every key is documented in config_schema.json (shipped with the package);
unknown keys are rejected and validation reports every violation rather than
stopping at the first. The raw document round-trips unchanged: defaults are
applied on access, never written back.
"""

import json
from dataclasses import fields
from importlib import resources

from .config import ModelConfig
from .errors import ConfigurationError

__all__ = ["RunConfig", "load_config", "validate_config", "schema"]

_TYPES = {"int": int, "float": (int, float), "str": str, "bool": bool}


def schema() -> dict:
    with resources.files("pastnet").joinpath("config_schema.json").open("r") as fh:
        return json.load(fh)


class RunConfig:
    """A validated view over a flat key/value JSON document."""

    def __init__(self, raw: dict):
        if not isinstance(raw, dict):
            raise ConfigurationError(f"config root must be a JSON object, got {type(raw).__name__}")
        self.raw = raw
        self._schema = schema()

    def get(self, key: str):
        if key not in self._schema:
            raise KeyError(key)
        if key in self.raw:
            return self.raw[key]
        return self._schema[key].get("default")

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.raw, **kwargs)

    def violations(self) -> list[str]:
        problems = []
        type_problems = []
        for key in self.raw:
            if key not in self._schema:
                problems.append(f"unknown key {key!r}")
        for key, spec in self._schema.items():
            if key in self.raw:
                value = self.raw[key]
                if value is None:
                    if spec.get("required", False):
                        type_problems.append(f"{key}: null is not allowed for a required key")
                    continue
                expected = _TYPES[spec["type"]]
                if isinstance(value, bool) and spec["type"] != "bool":
                    type_problems.append(f"{key}: expected {spec['type']}, got bool")
                elif not isinstance(value, expected):
                    type_problems.append(
                        f"{key}: expected {spec['type']}, got {type(value).__name__} ({value!r})"
                    )
            elif spec.get("required", False):
                type_problems.append(f"missing required key {key!r}")
        problems.extend(type_problems)
        if type_problems:
            return problems  # constraint checks need well-typed values
        try:
            problems.extend(self.to_model_config().validate())
        except ConfigurationError as exc:
            problems.append(str(exc))
        return problems

    def to_model_config(self) -> ModelConfig:
        model_keys = {f.name for f in fields(ModelConfig)}
        values = {k: self.get(k) for k in model_keys}
        return ModelConfig(**values)


def load_config(path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"config {path} is not valid JSON: {exc}") from exc
    return RunConfig(raw)


def validate_config(cfg: RunConfig) -> list[str]:
    """All violations in the document; an empty list means valid."""
    return cfg.violations()
