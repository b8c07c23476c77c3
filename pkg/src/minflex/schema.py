"""JSON schemas for input descriptors and CLI reports, plus loaders."""
from __future__ import annotations

import json
import os

import jsonschema

from .errors import ParseError

_NUM = {"type": "number"}
_VEC = {"type": "array", "items": _NUM, "minItems": 1}
_MAT = {"type": "array", "items": _VEC}

BODY_SCHEMA = {
    "type": "object",
    "required": ["dim"],
    "properties": {
        "dim": {"type": "integer", "minimum": 1},
        "halfspaces": {
            "type": "array",
            "items": {"type": "object", "required": ["a", "b"],
                      "properties": {"a": _VEC, "b": _NUM}},
        },
        "support": {"enum": ["ball", "cylinder", "disc-product", "none"]},
        "params": {"type": "object"},
        "lineality_hint": {"type": "integer", "minimum": 0},
        "empty": {"type": "boolean"},
    },
}

DOMAIN_SCHEMA = {
    "type": "object",
    "required": ["variant"],
    "properties": {"variant": {"enum": ["full_space", "convex_complement", "wedge",
                                        "quadric_graph", "wedge_graph", "halfspace",
                                        "slab", "union_chain"]}},
    "allOf": [
        {"if": {"properties": {"variant": {"const": "full_space"}}},
         "then": {"required": ["dim"]}},
        {"if": {"properties": {"variant": {"const": "convex_complement"}}},
         "then": {"required": ["body"], "properties": {"body": BODY_SCHEMA}}},
        {"if": {"properties": {"variant": {"const": "wedge"}}},
         "then": {"required": ["angle"],
                  "properties": {"angle": _NUM, "dim": {"type": "integer"},
                                 "frame": {"type": "object",
                                           "properties": {"rotation": _MAT,
                                                          "translation": _VEC}}}}},
        {"if": {"properties": {"variant": {"const": "quadric_graph"}}},
         "then": {"required": ["a1", "a2", "a3"]}},
        {"if": {"properties": {"variant": {"const": "wedge_graph"}}},
         "then": {"required": ["a2", "a3"]}},
        {"if": {"properties": {"variant": {"const": "halfspace"}}},
         "then": {"required": ["normal", "offset"],
                  "properties": {"normal": _VEC, "offset": _NUM}}},
        {"if": {"properties": {"variant": {"const": "slab"}}},
         "then": {"required": ["normal", "lo", "hi"],
                  "properties": {"normal": _VEC, "lo": _NUM, "hi": _NUM}}},
        {"if": {"properties": {"variant": {"const": "union_chain"}}},
         "then": {"required": ["members"],
                  "properties": {"members": {"type": "array", "minItems": 1}}}},
    ],
}

TAU_SCHEMA = {
    "type": "object",
    "required": ["expr", "dim"],
    "properties": {
        "expr": {"type": "string", "minLength": 1},
        "dim": {"type": "integer", "minimum": 1},
        "box": {"type": "array",
                "items": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}},
        "analytic": {"type": "boolean"},
    },
}

REPORT_SCHEMA = {
    "type": "object",
    "required": ["command", "status", "exit_code", "config", "result"],
    "properties": {
        "command": {"enum": ["classify", "check-psh", "verify-surface", "witness",
                             "extend-arc", "catalogue"]},
        "status": {"type": "string"},
        "exit_code": {"enum": [0, 1, 2]},
        "config": {"type": "object", "required": ["seed"]},
        "result": {"type": ["object", "null"]},
        "error": {"type": ["object", "null"]},
    },
}


def validate(data, schema, what="input"):
    try:
        jsonschema.validate(data, schema)
    except jsonschema.ValidationError as exc:
        raise ParseError(f"{what} does not match its schema: {exc.message}") from exc
    return data


def load_json(arg, schema=None, what="input"):
    """Parse ``arg`` as inline JSON (if it starts with ``{``) or a file path."""
    text = arg.strip()
    try:
        if not text.startswith("{"):
            if not os.path.exists(arg):
                raise ParseError(f"{what} file {arg!r} not found")
            with open(arg, encoding="utf-8") as fh:
                text = fh.read()
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{what} is not valid JSON: {exc}") from exc
    return validate(data, schema, what) if schema is not None else data
