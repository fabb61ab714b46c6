from __future__  import annotations
from dataclasses import fields
from enum        import Enum
from types       import NotImplementedType
from typing      import Any

import numpy as np


SHORT_BYTES_LIMIT = 16
SIMPLE_ITEM_WIDTH = 40
MAX_INLINE_FIELDS = 3

Formatted = tuple[str, bool]  # (text, fits on one line inside a parent)


class RepresentationImplementation:
    """
    Skeleton of a recursive formatter. Subclasses add rules through
    `implement_special_cases` or by overriding `format_value`; the base falls back
    to builtin repr.
    """

    def __init__(self, /, *, level_offset: int = 0, indent: int | str | None = 4) -> None:
        self.level_offset = level_offset
        self.indent = " " * indent if isinstance(indent, int) else indent

    def recursively_format(self, obj: Any) -> str:
        return self.format_value(obj, self.level_offset)[0]

    def implement_special_cases(self, obj: Any, level: int) -> Formatted | str | NotImplementedType:
        return NotImplemented

    def special_case(self, obj: Any, level: int) -> Formatted | None:
        result = self.implement_special_cases(obj, level)
        if result is NotImplemented:
            return None
        return result if isinstance(result, tuple) else (result, True)

    def format_value(self, obj: Any, level: int) -> Formatted:
        return self.special_case(obj, level) or (repr(obj), True)


class GreprRepresentationImplementation(RepresentationImplementation):
    """
    Records in the style of ast.dump, one field per line once they nest. Arrays show
    shape and dtype only, and residue code strings longer than 16 bytes only their size.
    """

    def __init__(self, /, *, level_offset: int = 0, annotate_fields: bool = True, indent: int | str | None = 4) -> None:
        super().__init__(level_offset=level_offset, indent=indent)
        self.annotate_fields = annotate_fields

    def implement_special_cases(self, obj: Any, level: int) -> Formatted | str | NotImplementedType:
        if isinstance(obj, np.ndarray):
            return f"ndarray(shape={obj.shape}, dtype={obj.dtype})"
        if isinstance(obj, bytes) and len(obj) > SHORT_BYTES_LIMIT:
            return f"<bytes:{len(obj)}>"
        return NotImplemented

    def enclose(self, opening: str, closing: str, parts: list[str], level: int) -> str:
        """Wrap already formatted parts, one per line at `level + 1` unless indent is None."""
        if self.indent is None:
            return f"{opening}{', '.join(parts)}{closing}"
        inner = self.indent * (level + 1)
        body = "".join(f"\n{inner}{part}," for part in parts)
        return f"{opening}{body}\n{self.indent * level}{closing}"

    def format_value(self, obj: Any, level: int) -> Formatted:
        special = self.special_case(obj, level)
        if special is not None:
            return special
        if isinstance(obj, str):
            return self.format_string(obj), True
        if isinstance(obj, (list, tuple, set)):
            return self.format_collection(obj, level)
        if isinstance(obj, dict):
            return self.format_dict(obj, level)
        if getattr(obj, "__has_grepr__", False) and not isinstance(obj, type):
            return self.format_record(obj, level)
        return repr(obj), True

    def format_collection(self, obj: list | tuple | set, level: int) -> Formatted:
        opening, closing = "[]" if isinstance(obj, list) else "()" if isinstance(obj, tuple) else "{}"
        if not obj:
            return opening + closing, True
        formatted = [self.format_value(item, level + 1) for item in obj]
        parts = [text for text, _ in formatted]
        if all(simple and len(text) <= SIMPLE_ITEM_WIDTH for text, simple in formatted):
            return f"{opening}{', '.join(parts)}{closing}", True
        return self.enclose(opening, closing, parts, level), False

    def format_dict(self, obj: dict, level: int) -> Formatted:
        if not obj:
            return "{}", True
        parts = [
            f"{self.format_value(key, level + 1)[0]}: {self.format_value(value, level + 1)[0]}"
            for key, value in obj.items()
        ]
        return self.enclose("{", "}", parts, level), False

    def format_string(self, text: str) -> str:
        text = text.replace("\\", "\\\\")
        if '"' not in text:
            return f'"{text}"'
        if "'" not in text:
            return f"'{text}'"
        return '"' + text.replace('"', '\\"') + '"'

    def format_record(self, obj: Any, level: int) -> Formatted:
        from swsearch.base import get_field_options

        parts, all_simple = [], True
        for record_field in fields(obj):
            if not get_field_options(record_field)["grepr"]:
                continue
            text, simple = self.format_value(getattr(obj, record_field.name), level + 1)
            all_simple = all_simple and simple
            parts.append(f"{record_field.name}={text}" if self.annotate_fields else text)
        name = type(obj).__name__
        if all_simple and len(parts) <= MAX_INLINE_FIELDS:
            # a record with fields never counts as simple, so collections of records go multi-line
            return f"{name}({', '.join(parts)})", not parts
        return self.enclose(f"{name}(", ")", parts, level), False


def grepr(obj, /, level_offset: int = 0, annotate_fields: bool = True, *, indent: int | str | None = 4) -> str:
    """
    Readable, multi-line representation of records, collections and arrays.

    Args:
        level_offset: indentation level the output starts at
        annotate_fields: prefix record values with their field names
        indent: spaces (int) or indent string per level; None for single-line output
    """
    return GreprRepresentationImplementation(
        level_offset=level_offset, annotate_fields=annotate_fields, indent=indent,
    ).recursively_format(obj)


class GEnum(Enum):
    """Enum with a concise `Class.Member` repr."""

    def __repr__(self) -> str:
        return f"{type(self).__name__}.{self.name}"


__all__ = ["RepresentationImplementation", "GreprRepresentationImplementation", "grepr", "GEnum"]
