from __future__  import annotations
from dataclasses import dataclass, fields, field as dataclass_field, Field, MISSING
from types       import MappingProxyType
from typing      import Any, Callable, Iterable, Iterator, Protocol, get_type_hints, dataclass_transform


FIELD_OPTIONS_KEY = "swsearch"
DEFAULT_FIELD_OPTIONS = MappingProxyType({"grepr": True, "validate_type": True})


def field(*, default: Any = MISSING, default_factory: Callable[[], Any] = MISSING,  # type: ignore[assignment]
        init: bool = True, grepr: bool = True, hash: bool | None = None, compare: bool = True,
        metadata: dict[str, Any] | None = None, kw_only: bool = MISSING,  # type: ignore[assignment]
        validate_type: bool = True) -> Field:
    """
    `dataclasses.field` with two more switches, stored in the field metadata:
    `grepr` (shown by the generated repr) and `validate_type` (checked by `validate()`).
    """
    options = {"grepr": grepr, "validate_type": validate_type}
    return dataclass_field(
        default=default, default_factory=default_factory, init=init, repr=False, hash=hash,
        compare=compare, metadata={**(metadata or {}), FIELD_OPTIONS_KEY: options}, kw_only=kw_only,
    )

def get_field_options(record_field: Field) -> MappingProxyType | dict[str, bool]:
    """Options of a record field; fields declared without `field()` get the defaults."""
    return record_field.metadata.get(FIELD_OPTIONS_KEY, DEFAULT_FIELD_OPTIONS)


def _install_repr(cls: type) -> None:
    def __repr__(self, /, *, level_offset: int = 0, annotate_fields: bool = True, indent: int | str | None = 4) -> str:
        from swsearch.repr import grepr
        return grepr(self, level_offset, annotate_fields, indent=indent)

    cls.__repr__ = __repr__
    cls.__has_grepr__ = True

def _install_validate(cls: type) -> None:
    def validate(self, path: AbstractTreePath | None = None, *args, **kwargs) -> None:
        from swsearch.decorators import enforce_type
        path = AbstractTreePath() if path is None else path
        hints = get_type_hints(type(self))
        for record_field in fields(self):
            if get_field_options(record_field)["validate_type"]:
                enforce_type(getattr(self, record_field.name), hints.get(record_field.name, record_field.type),
                    path.add_attribute(record_field.name))
        post_validate = getattr(self, "post_validate", None)
        if callable(post_validate):
            post_validate(path, *args, **kwargs)

    cls.validate = validate

@dataclass_transform(eq_default=True, order_default=True, kw_only_default=False, frozen_default=False, field_specifiers=(field,))
def grepr_dataclass(*, grepr: bool = True,
        init: bool = True, eq: bool = True, order: bool = True,
        unsafe_hash: bool = False, frozen: bool = False,
        kw_only: bool = False, slots: bool = False,
        validate: bool = True):
    """
    @dataclass plus the grepr representation and a `validate(path=None, *args)` method.
    `order` defaults to True here; pass order=False together with eq=False.
    """
    def decorator[T](cls: T) -> T:
        cls = dataclass(cls, init=init, repr=False, eq=eq, order=order, unsafe_hash=unsafe_hash,
            frozen=frozen, kw_only=kw_only, slots=slots)
        if grepr:
            _install_repr(cls)
        if validate:
            _install_validate(cls)
        return cls

    return decorator


class HasGreprValidate(Protocol):
    """What @grepr_dataclass adds with grepr=True and validate=True, for type checkers."""

    def __repr__(self, /, *, level_offset: int = 0, annotate_fields: bool = True, indent: int | str | None = 4) -> str:
        ...

    def validate(self, path: AbstractTreePath | None = None, *args, **kwargs) -> None:
        """
        Type-check every field (unless declared with validate_type=False), then call
        `post_validate(path, *args, **kwargs)` when the record defines it.

        Raises:
            SW_TypeValidationError: if a field does not match its annotation
            SW_PathValidationError: subclasses, from post_validate
        """
        ...


@grepr_dataclass(frozen=True, unsafe_hash=True)
class ATPathAttribute(HasGreprValidate):
    value: str

@grepr_dataclass(frozen=True, unsafe_hash=True)
class ATPathIndexOrKey(HasGreprValidate):
    value: Any

PathStep = ATPathAttribute | ATPathIndexOrKey

@grepr_dataclass(frozen=True, unsafe_hash=True, init=False, grepr=False, validate=False)
class AbstractTreePath:
    """
    Where a value sits inside nested records, e.g. `.sequences[3].codes`. Validation
    errors carry one so messages point at the failing field. Immutable.
    """
    path: tuple[PathStep, ...]

    def __init__(self, steps: Iterable[PathStep] = ()) -> None:
        steps = tuple(steps)
        for step in steps:
            if not isinstance(step, (ATPathAttribute, ATPathIndexOrKey)):
                raise ValueError(f"path steps must be ATPathAttribute or ATPathIndexOrKey not {step!r}")
        object.__setattr__(self, "path", steps)

    def _extended(self, step: PathStep) -> AbstractTreePath:
        return AbstractTreePath((*self.path, step))

    def add_attribute(self, attr: str) -> AbstractTreePath:
        if not isinstance(attr, str):
            raise ValueError(f"attribute names must be strings not {attr!r}")
        return self._extended(ATPathAttribute(attr))

    def add_index_or_key(self, index_or_key: Any) -> AbstractTreePath:
        return self._extended(ATPathIndexOrKey(index_or_key))

    def __len__(self) -> int:
        return len(self.path)

    def __iter__(self) -> Iterator[PathStep]:
        return iter(self.path)

    def __getitem__(self, i: int | slice, /) -> PathStep | AbstractTreePath:
        return AbstractTreePath(self.path[i]) if isinstance(i, slice) else self.path[i]

    def repr_as_python_code(self) -> str:
        return "".join(
            f".{step.value}" if isinstance(step, ATPathAttribute) else f"[{step.value!r}]"
            for step in self.path
        )

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.repr_as_python_code()})"


__all__ = [
    "field", "get_field_options", "grepr_dataclass", "HasGreprValidate",
    "ATPathAttribute", "ATPathIndexOrKey", "AbstractTreePath",
]
