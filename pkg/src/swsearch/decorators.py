from __future__      import annotations
from collections.abc import Iterable, Callable as ABCCallable, Mapping, Sequence
from functools       import wraps
from inspect         import signature
from sys             import modules as sys_modules
from types           import UnionType
from typing          import (
    Any, Literal, Callable, Union, ParamSpec, TypeVar,
    get_origin, get_args, get_type_hints,
)

from swsearch.base   import AbstractTreePath
from swsearch.errors import SW_TypeValidationError


PARAM_SPEC = ParamSpec("PARAM_SPEC")
RETURN_T = TypeVar("RETURN_T")

type Checker = Callable[[Any, tuple[Any, ...], AbstractTreePath, str | None], None]


def enforce_argument_types(func: Callable[PARAM_SPEC, RETURN_T]) -> Callable[PARAM_SPEC, RETURN_T]:
    """
    Check every annotated argument with `enforce_type` before each call.

    A leading `self`/`cls` and TypeVar annotations are skipped. Hints are resolved on the
    first call, so annotations may name classes defined further down the module.
    Works on classmethod and staticmethod objects too.

    Raises:
        SW_TypeValidationError: if any argument does not match its annotation
    """
    if isinstance(func, (classmethod, staticmethod)):
        return type(func)(enforce_argument_types(func.__func__))

    sig = signature(func)
    resolved: dict[str, Any] = {}

    @wraps(func)
    def wrapper(*args: PARAM_SPEC.args, **kwargs: PARAM_SPEC.kwargs) -> RETURN_T:
        if not resolved:
            resolved.update(get_type_hints(func, globalns=sys_modules[func.__module__].__dict__))
            resolved.pop("return", None)
        bound = sig.bind(*args, **kwargs)
        bound.apply_defaults()
        for position, (name, value) in enumerate(bound.arguments.items()):
            expected = resolved.get(name)
            if expected is None or isinstance(expected, TypeVar) or (position == 0 and name in ("self", "cls")):
                continue
            enforce_type(value, expected, AbstractTreePath().add_attribute(name))
        return func(*args, **kwargs)

    return wrapper


def _repr_type(t: type | Any) -> str:
    """Type name for error messages: builtins bare, package types as swsearch.<Name>."""
    if not isinstance(t, type):
        return str(t)
    if t.__module__ == "builtins":
        return t.__name__
    if t.__module__.startswith("swsearch."):
        return f"swsearch.{t.__name__}"
    return f"{t.__module__}.{t.__name__}"

def _mismatch(path: AbstractTreePath, wanted: str, value: Any, condition: str | None) -> SW_TypeValidationError:
    return SW_TypeValidationError(path, f"must be {wanted} not {_repr_type(type(value))}", condition)

def _check_items(items: Iterable[Any], element: Any, path: AbstractTreePath, condition: str | None) -> None:
    if element is Any:
        return
    for i, item in enumerate(items):
        enforce_type(item, element, path.add_index_or_key(i), condition)


def _check_union(value: Any, arms: tuple[Any, ...], path: AbstractTreePath, condition: str | None) -> None:
    for arm in arms:
        try:
            enforce_type(value, arm, path, condition)
            return
        except SW_TypeValidationError:
            pass
    raise _mismatch(path, f"one of types {' | '.join(_repr_type(arm) for arm in arms)}", value, condition)

def _check_class(value: Any, args: tuple[Any, ...], path: AbstractTreePath, condition: str | None) -> None:
    if not isinstance(value, type):
        raise _mismatch(path, "a class", value, condition)
    target = args[0] if args else object
    bases = get_args(target) if get_origin(target) is Union or isinstance(target, UnionType) else (target,)
    if target is not object and not issubclass(value, bases):
        raise SW_TypeValidationError(path, f"must be a subclass of {' | '.join(map(_repr_type, bases))} not {_repr_type(value)}", condition)

def _check_mapping_of(container: type) -> Checker:
    def check(value: Any, args: tuple[Any, ...], path: AbstractTreePath, condition: str | None) -> None:
        if not isinstance(value, container):
            raise _mismatch(path, f"a {container.__name__}", value, condition)
        key_t, value_t = (*args, Any, Any)[:2]
        for i, (key, item) in enumerate(value.items()):
            enforce_type(key, key_t, path.add_attribute("keys()").add_index_or_key(i), condition)
            enforce_type(item, value_t, path.add_index_or_key(key), condition)
    return check

def _check_tuple(value: Any, args: tuple[Any, ...], path: AbstractTreePath, condition: str | None) -> None:
    if not isinstance(value, tuple):
        raise _mismatch(path, "a tuple", value, condition)
    if len(args) == 2 and args[1] is Ellipsis:
        _check_items(value, args[0], path, condition)
    elif args:
        if len(value) != len(args):
            raise SW_TypeValidationError(path, f"must be a tuple of length {len(args)} not length {len(value)}", condition)
        for i, (item, item_t) in enumerate(zip(value, args)):
            enforce_type(item, item_t, path.add_index_or_key(i), condition)

def _check_collection_of(container: type) -> Checker:
    def check(value: Any, args: tuple[Any, ...], path: AbstractTreePath, condition: str | None) -> None:
        if not isinstance(value, container):
            raise _mismatch(path, f"a {container.__name__}", value, condition)
        _check_items(value, args[0] if args else Any, path, condition)
    return check

def _check_abstract_collection_of(container: type) -> Checker:
    def check(value: Any, args: tuple[Any, ...], path: AbstractTreePath, condition: str | None) -> None:
        if not isinstance(value, container):
            raise _mismatch(path, f"a {container.__name__}", value, condition)
        # str and bytes contain themselves; one-shot iterators must not be consumed here
        if isinstance(value, (str, bytes)) or not isinstance(value, (Sequence, set, frozenset)):
            return
        _check_items(value, args[0] if args else Any, path, condition)
    return check

def _check_callable(value: Any, args: tuple[Any, ...], path: AbstractTreePath, condition: str | None) -> None:
    if not callable(value):
        raise _mismatch(path, "callable", value, condition)

def _check_literal(value: Any, args: tuple[Any, ...], path: AbstractTreePath, condition: str | None) -> None:
    if value not in args:
        raise SW_TypeValidationError(path, f"must be one of {', '.join(map(repr, args))} not {value!r}", condition)

CHECKERS: dict[Any, Checker] = {
    type: _check_class,
    dict: _check_mapping_of(dict),
    Mapping: _check_mapping_of(Mapping),
    tuple: _check_tuple,
    list: _check_collection_of(list),
    set: _check_collection_of(set),
    frozenset: _check_collection_of(frozenset),
    Sequence: _check_abstract_collection_of(Sequence),
    Iterable: _check_abstract_collection_of(Iterable),
    ABCCallable: _check_callable,
    Literal: _check_literal,
}

def enforce_type(value: Any, expected: Any, path: AbstractTreePath | None = None, condition: str | None = None) -> None:
    """
    Recursively check `value` against a type annotation: plain classes (numpy types
    included), unions, bound TypeVars, type[T], Literal, Callable, tuples (fixed and
    variadic), list/set/frozenset/dict, and Sequence/Iterable/Mapping. Other
    parameterized generics are checked against their origin only.

    Raises:
        SW_TypeValidationError: if the value does not match
    """
    path = AbstractTreePath() if path is None else path
    if expected is Any:
        return
    if isinstance(expected, TypeVar):
        if expected.__bound__ is not None:
            enforce_type(value, expected.__bound__, path, condition)
        return

    origin = get_origin(expected)
    if origin is Union or isinstance(expected, UnionType):
        _check_union(value, get_args(expected), path, condition)
        return
    if origin is None and expected is ABCCallable:
        origin = ABCCallable

    checker = CHECKERS.get(origin)
    if checker is not None:
        checker(value, get_args(expected), path, condition)
        return

    target = expected if origin is None else origin
    try:
        matches = isinstance(value, target)
    except TypeError:
        matches = False
    if not matches:
        raise _mismatch(path, f"of type {_repr_type(target) if isinstance(target, type) else getattr(target, '__name__', target)}", value, condition)


__all__ = ["enforce_argument_types", "enforce_type"]
