from __future__ import annotations

import numpy as np

from swsearch.base import grepr_dataclass, field
from swsearch.repr import grepr, GEnum, RepresentationImplementation, GreprRepresentationImplementation
from swsearch.scheduler import Hit, Route
from swsearch.scoring import GapModel


class TestGrepr:
    """Test grepr function."""

    def test_basic_values(self):
        """Test ints, strings and flat lists."""
        assert grepr(42) == "42"
        assert grepr("ARND") == '"ARND"'
        assert grepr([1, 2, 3]) == "[1, 2, 3]"
        assert grepr(()) == "()"
        assert grepr({}) == "{}"

    def test_string_quoting_cases(self):
        """Test quote selection and escaping."""
        assert grepr('say "hi"') == "'say \"hi\"'"
        assert grepr("both ' and \"") == '"both \' and \\""'
        assert grepr("back\\slash") == '"back\\\\slash"'

    def test_record(self):
        """Test a flat record on one line."""
        assert grepr(GapModel(open_penalty=10, extend_penalty=2)) == "GapModel(open_penalty=10, extend_penalty=2)"

    def test_annotate_fields_flag(self):
        """Test positional output without field names."""
        assert grepr(GapModel(10, 2), annotate_fields=False) == "GapModel(10, 2)"

    def test_nested_records_are_indented(self):
        """Test that a collection of records goes multi-line."""
        text = grepr((Hit(db_index=0, score=12), Hit(db_index=3, score=7)))
        assert text == (
            "(\n"
            "    Hit(db_index=0, score=12, alignment=None),\n"
            "    Hit(db_index=3, score=7, alignment=None),\n"
            ")"
        )

    def test_indent_none(self):
        """Test single-line output."""
        text = grepr((Hit(db_index=0, score=12), Hit(db_index=3, score=7)), indent=None)
        assert text == "(Hit(db_index=0, score=12, alignment=None), Hit(db_index=3, score=7, alignment=None))"

    def test_ndarray_special_case(self):
        """Test that arrays show shape and dtype only."""
        assert grepr(np.zeros((24, 5), dtype=np.int32)) == "ndarray(shape=(24, 5), dtype=int32)"

    def test_bytes_special_case(self):
        """Test that long residue code strings are summarised."""
        assert grepr(bytes(17)) == "<bytes:17>"
        assert grepr(b"\x00\x01") == repr(b"\x00\x01")

    def test_grepr_false_fields_are_skipped(self):
        """Test that field(grepr=False) hides a field."""
        @grepr_dataclass()
        class Report:
            mean: float
            measures: tuple = field(default=(), grepr=False)

        assert grepr(Report(mean=1.5, measures=(1.0, 2.0))) == "Report(mean=1.5)"

    def test_dict(self):
        """Test dict formatting."""
        assert grepr({"k": 1}) == '{\n    "k": 1,\n}'

    def test_fallback_repr_for_unknown_obj(self):
        """Test that other objects use builtin repr."""
        class Opaque:
            def __repr__(self):
                return "<opaque>"

        assert grepr(Opaque()) == "<opaque>"


class TestGEnum:
    """Test GEnum."""

    def test_repr(self):
        """Test the Class.Member repr."""
        assert repr(Route.INTER_TASK) == "Route.INTER_TASK"
        assert grepr([Route.INTRA_TASK]) == "[Route.INTRA_TASK]"

    def test_values(self):
        """Test member values."""
        class Colour(GEnum):
            RED = 1

        assert Colour.RED.value == 1
        assert Colour.RED.name == "RED"


class TestRepresentationImplementation:
    """Test the formatter base classes."""

    def test_base_defaults_to_builtin_repr(self):
        """Test the base implementation."""
        assert RepresentationImplementation().recursively_format([1, "a"]) == repr([1, "a"])

    def test_special_case_hook(self):
        """Test that a subclass can override special cases."""
        class Upper(GreprRepresentationImplementation):
            def implement_special_cases(self, obj, level):
                if isinstance(obj, str):
                    return obj.upper()
                return super().implement_special_cases(obj, level)

        assert Upper().recursively_format(["ab", 1]) == "[AB, 1]"
