#!/usr/bin/env python3
"""Small JSON-schema subset validator for report payloads and input descriptors."""

from __future__ import annotations

import json
import re
from pathlib import Path
from typing import Any

from errors import ConfigError


RATIONAL_PATTERN = r"^-?[0-9]+(/[0-9]+)?$"


def repo_root() -> Path:
    return Path(__file__).resolve().parents[2]


def report_schema_path(subcommand: str) -> Path:
    return repo_root() / "schemas" / "json" / "reports" / f"{subcommand}.result.schema.json"


def descriptor_schema_path(name: str) -> Path:
    return repo_root() / "schemas" / "json" / "descriptors" / f"{name}.schema.json"


def _is_int(value: Any) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


_TYPE_CHECKS = {
    "object": lambda v: isinstance(v, dict),
    "array": lambda v: isinstance(v, list),
    "string": lambda v: isinstance(v, str),
    "integer": _is_int,
    "number": _is_number,
    "boolean": lambda v: isinstance(v, bool),
    "null": lambda v: v is None,
}


def _matches_type(expected: str, value: Any) -> bool:
    check = _TYPE_CHECKS.get(expected)
    return bool(check and check(value))


def _validate(schema: dict[str, Any], value: Any, path: str, errors: list[str]) -> None:
    schema_type = schema.get("type")
    if schema_type is not None:
        options = schema_type if isinstance(schema_type, list) else [schema_type]
        if not any(_matches_type(str(t), value) for t in options):
            errors.append(f"{path}: expected {' | '.join(map(str, options))}, got {type(value).__name__}")
            return

    if "const" in schema and value != schema["const"]:
        errors.append(f"{path}: value {value!r} != const {schema['const']!r}")

    enum_values = schema.get("enum")
    if enum_values is not None and value not in enum_values:
        errors.append(f"{path}: value {value!r} not in enum {enum_values}")

    if isinstance(value, str):
        pattern = schema.get("pattern")
        if pattern is not None and re.search(pattern, value) is None:
            errors.append(f"{path}: {value!r} does not match {pattern}")

    if _is_number(value):
        minimum = schema.get("minimum")
        if minimum is not None and value < minimum:
            errors.append(f"{path}: value {value} < minimum {minimum}")
        maximum = schema.get("maximum")
        if maximum is not None and value > maximum:
            errors.append(f"{path}: value {value} > maximum {maximum}")

    if isinstance(value, dict):
        for key in schema.get("required", []):
            if key not in value:
                errors.append(f"{path}: missing required property {key!r}")

        properties = schema.get("properties", {})
        additional = schema.get("additionalProperties", True)
        for key, item in value.items():
            child_path = f"{path}.{key}"
            if key in properties:
                if isinstance(properties[key], dict):
                    _validate(properties[key], item, child_path, errors)
            elif additional is False:
                errors.append(f"{path}: additional property {key!r} is not allowed")
            elif isinstance(additional, dict):
                _validate(additional, item, child_path, errors)

    if isinstance(value, list):
        min_items = schema.get("minItems")
        if min_items is not None and len(value) < min_items:
            errors.append(f"{path}: expected at least {min_items} items, got {len(value)}")
        item_schema = schema.get("items")
        if isinstance(item_schema, dict):
            for idx, item in enumerate(value):
                _validate(item_schema, item, f"{path}[{idx}]", errors)


def load_schema(schema_path: Path) -> dict[str, Any]:
    if not schema_path.exists():
        raise FileNotFoundError(f"contract schema not found: {schema_path}")
    with schema_path.open("r", encoding="utf-8") as f:
        schema = json.load(f)
    if not isinstance(schema, dict):
        raise ValueError(f"invalid schema format: {schema_path}")
    return schema


def contract_errors(schema_path: Path, payload: Any) -> list[str]:
    errors: list[str] = []
    _validate(load_schema(schema_path), payload, "$", errors)
    return errors


def validate_contract(schema_path: Path, payload: Any) -> None:
    errors = contract_errors(schema_path, payload)
    if errors:
        joined = "; ".join(errors[:10])
        raise ValueError(f"payload does not match contract {schema_path.name}: {joined}")


def require_descriptor(name: str, payload: Any) -> None:
    """Raises ConfigError listing the first schema violations of an input descriptor."""
    errors = contract_errors(descriptor_schema_path(name), payload)
    if errors:
        raise ConfigError(f"invalid {name} descriptor: {'; '.join(errors[:5])}")
