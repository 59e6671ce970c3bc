"""Strict JSON helpers: finite numbers only, positions on syntax errors."""
from __future__ import annotations

import json
import math

from .errors import DocumentSyntaxError


def _reject_constant(name):
    raise ValueError(f"non-finite number {name} is not allowed")


def parse(text, what="document"):
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    try:
        return json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise DocumentSyntaxError(f"malformed {what}: {exc.msg}", line=exc.lineno, column=exc.colno) from None
    except ValueError as exc:
        raise DocumentSyntaxError(f"malformed {what}: {exc}") from None


def dumps(obj, indent=2):
    return json.dumps(obj, indent=indent, sort_keys=False, allow_nan=False) + ("\n" if indent else "")


def check_keys(obj, allowed, required=(), entity=None, what="object"):
    if not isinstance(obj, dict):
        raise DocumentSyntaxError(f"{what} must be a JSON object", entity=entity)
    unknown = sorted(set(obj) - set(allowed))
    if unknown:
        raise DocumentSyntaxError(f"unknown key(s) in {what}: {', '.join(unknown)}", entity=entity)
    missing = [k for k in required if k not in obj]
    if missing:
        raise DocumentSyntaxError(f"missing key(s) in {what}: {', '.join(missing)}", entity=entity)


def number(value, entity=None, what="value"):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise DocumentSyntaxError(f"{what} must be a number", entity=entity)
    value = float(value)
    if not math.isfinite(value):
        raise DocumentSyntaxError(f"{what} must be finite", entity=entity)
    return value


def pair(value, entity=None, what="interval"):
    if not isinstance(value, list) or len(value) != 2:
        raise DocumentSyntaxError(f"{what} must be a [lo, hi] pair", entity=entity)
    return (number(value[0], entity, what), number(value[1], entity, what))


def string(value, entity=None, what="value", optional=False):
    if value is None and optional:
        return None
    if not isinstance(value, str):
        raise DocumentSyntaxError(f"{what} must be a string", entity=entity)
    return value


def compact(value):
    """Render floats that hold integers as ints so round-trips stay tidy."""
    if isinstance(value, float) and value.is_integer() and abs(value) < 2**53:
        return int(value)
    return value
