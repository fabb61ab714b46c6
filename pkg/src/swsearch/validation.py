from __future__ import annotations
import inspect
from functools import cached_property
from typing import Any, Callable

from swsearch.base import grepr_dataclass, AbstractTreePath
from swsearch.decorators import enforce_type, _repr_type
from swsearch.errors import (
    SW_PathValidationError, SW_TypeValidationError, SW_RangeValidationError, SW_InvalidValueError,
)


def _value_and_descr(obj, attr: str) -> tuple[Any, str]:
    return getattr(obj, attr), f"{attr} of a {_repr_type(obj.__class__)}"

def _passes(fn: Callable[..., Any], *args, **kwargs) -> bool:
    try:
        fn(*args, **kwargs)
        return True
    except SW_PathValidationError:
        return False

@grepr_dataclass(frozen=True, unsafe_hash=True)
class Validator(Callable[..., None]):
    """
    Validates a single attribute of a record, raising a SW_PathValidationError subclass on failure.

    `is_valid_fn` receives the attribute value plus the extra positional arguments of the
    call; `create_error_fn` receives the value, a description of the attribute and the same
    extra arguments.

    Raises:
        TypeError: if the wrong number of extra arguments is given
        SW_PathValidationError: if validation fails
    """
    is_valid_fn: Callable[..., bool]
    error_cls: type[SW_PathValidationError]
    create_error_fn: Callable[..., str]

    @cached_property
    def is_valid_arg_count(self) -> int:
        return len(inspect.signature(self.is_valid_fn).parameters) + 2 # - attr_value + self, path, attr

    def __call__(self, obj: Any, path: AbstractTreePath, attr: str, *args, condition: str | None = None) -> None:
        arg_count = len(args) + 3 # self, path, attr
        if arg_count != self.is_valid_arg_count:
            raise TypeError(f"Validator expected {self.is_valid_arg_count} positional argument(s) but got {arg_count}")

        attr_value, descr = _value_and_descr(obj, attr)
        if not self.is_valid_fn(attr_value, *args):
            raise self.error_cls(path.add_attribute(attr), self.create_error_fn(attr_value, descr, *args), condition)


class ValidateAttribute:
    """Collection of the attribute validators used by the records' post_validate hooks."""
    # TYPE
    VA_TYPE = Validator(
        is_valid_fn=lambda attr_value, t: _passes(enforce_type, attr_value, t),
        error_cls=SW_TypeValidationError,
        create_error_fn=lambda attr_value, descr, t: f"{descr} must be of type {_repr_type(t)} not {_repr_type(attr_value.__class__)}"
    )

    # RANGE
    VA_MIN = Validator(
        is_valid_fn=lambda attr_value, min: attr_value >= min,
        error_cls=SW_RangeValidationError,
        create_error_fn=lambda attr_value, descr, min: f"{descr} must be at least {min} not {attr_value}"
    )

    VA_MAX = Validator(
        is_valid_fn=lambda attr_value, max: attr_value <= max,
        error_cls=SW_RangeValidationError,
        create_error_fn=lambda attr_value, descr, max: f"{descr} must be at most {max} not {attr_value}"
    )

    VA_RANGE = Validator(
        is_valid_fn=lambda attr_value, min, max: (attr_value >= min) and (attr_value <= max),
        error_cls=SW_RangeValidationError,
        create_error_fn=lambda attr_value, descr, min, max: f"{descr} must be at least {min} and at most {max} not {attr_value}"
    )

    VA_LESS_THAN = Validator(
        is_valid_fn=lambda attr_value, bound: attr_value < bound,
        error_cls=SW_RangeValidationError,
        create_error_fn=lambda attr_value, descr, bound: f"{descr} must be less than {bound} not {attr_value}"
    )

    # LEN-RANGE
    VA_MIN_LEN = Validator(
        is_valid_fn=lambda attr_value, min_len: len(attr_value) >= min_len,
        error_cls=SW_RangeValidationError,
        create_error_fn=lambda attr_value, descr, min_len: f"{descr} must contain at least {min_len} element(s)"
    )

    VA_EXACT_LEN = Validator(
        is_valid_fn=lambda attr_value, length: len(attr_value) == length,
        error_cls=SW_RangeValidationError,
        create_error_fn=lambda attr_value, descr, length: f"{descr} must contain exactly {length} element(s) not {len(attr_value)}"
    )

    VA_CODES_BELOW = Validator(
        is_valid_fn=lambda attr_value, size: (len(attr_value) == 0) or (max(attr_value) < size),
        error_cls=SW_RangeValidationError,
        create_error_fn=lambda attr_value, descr, size: f"{descr} must only contain codes below {size} not {max(attr_value)}"
    )

    # CONSTANT-COMPARE
    VA_EQUAL = Validator(
        is_valid_fn=lambda attr_value, value: attr_value == value,
        error_cls=SW_InvalidValueError,
        create_error_fn=lambda attr_value, descr, value: f"{descr} must be {value!r} not {attr_value!r}"
    )

    VA_ONE_OF = Validator(
        is_valid_fn=lambda attr_value, allowed_values: attr_value in allowed_values,
        error_cls=SW_InvalidValueError,
        create_error_fn=lambda attr_value, descr, allowed_values: f"{descr} must be one of {allowed_values!r} not {attr_value!r}"
    )

    # MATCH-FORMAT
    VA_NON_BLANK = Validator(
        is_valid_fn=lambda attr_value: isinstance(attr_value, str) and bool(attr_value.strip()),
        error_cls=SW_InvalidValueError,
        create_error_fn=lambda attr_value, descr: f"{descr} must not be empty or blank"
    )


__all__ = ["Validator", "ValidateAttribute"]
