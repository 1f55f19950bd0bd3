import numpy as np
import pytest

from odrelease import (
    AttributeSchema,
    DataError,
    EmptyInputError,
    Histogram,
    SchemaError,
    group_by,
    marginalize,
    merge,
    normalize,
    read_histogram_csv,
    support_union,
    write_histogram_csv,
)


def two_attr_schema():
    return AttributeSchema((("first", ("a", "b", "c")), ("second", ("0", "1"))))


def worked_histogram():
    return Histogram(two_attr_schema(), {("a", "0"): 3, ("a", "1"): 1, ("b", "0"): 1, ("b", "1"): 3})


class TestSchema:
    def test_duplicate_names_rejected(self):
        with pytest.raises(SchemaError):
            AttributeSchema((("x", ("a",)), ("x", ("b",))))

    def test_empty_domain_rejected(self):
        with pytest.raises(SchemaError):
            AttributeSchema((("x", ()),))

    def test_duplicate_labels_rejected(self):
        with pytest.raises(SchemaError):
            AttributeSchema((("x", ("a", "a")),))

    def test_global_size_overflow_checked(self):
        domain = tuple(str(i) for i in range(256))
        attrs = tuple((f"x{i}", domain) for i in range(8))  # 256**8 == 2**64
        with pytest.raises(SchemaError):
            AttributeSchema(attrs)

    def test_global_size(self):
        assert two_attr_schema().global_size == 6

    def test_index_roundtrip(self):
        schema = AttributeSchema((("x", ("a", "b", "c")), ("y", ("0", "1")), ("z", ("p", "q"))))
        rng = np.random.default_rng(0)
        for _ in range(50):
            idx = int(rng.integers(0, schema.global_size))
            assert schema.index_of(schema.key_at(idx)) == idx

    def test_json_roundtrip(self, tmp_path):
        schema = two_attr_schema()
        schema.save(tmp_path / "schema.json")
        assert AttributeSchema.load(tmp_path / "schema.json") == schema


class TestHistogramConstruction:
    def test_zero_counts_dropped(self):
        h = Histogram(two_attr_schema(), {("a", "0"): 2, ("b", "0"): 0})
        assert len(h) == 1 and h.total == 2

    def test_negative_count_rejected(self):
        with pytest.raises(DataError):
            Histogram(two_attr_schema(), {("a", "0"): -1})

    def test_non_integer_count_rejected_in_integer_mode(self):
        with pytest.raises(DataError):
            Histogram(two_attr_schema(), {("a", "0"): 1.5})

    def test_unknown_label_rejected(self):
        with pytest.raises(SchemaError):
            Histogram(two_attr_schema(), {("z", "0"): 1})

    def test_wrong_arity_rejected(self):
        with pytest.raises(SchemaError):
            Histogram(two_attr_schema(), {("a",): 1})

    def test_lookup_validates_key(self):
        h = worked_histogram()
        assert h[("c", "0")] == 0
        with pytest.raises(SchemaError):
            h[("nope", "0")]


class TestMarginalize:
    def test_sum_by_first(self):
        m = marginalize(worked_histogram(), ["first"])
        assert m.counts == {("a",): 4, ("b",): 4}

    def test_empty_projection_is_grand_total(self):
        m = marginalize(worked_histogram(), [])
        assert m.counts == {(): 8}

    def test_identity_projection(self):
        h = worked_histogram()
        m = marginalize(h, ["first", "second"])
        assert m.counts == dict(h.items())

    def test_absent_key_is_zero(self):
        m = marginalize(worked_histogram(), ["first"])
        assert m.get(("c",)) == 0

    def test_unknown_attribute(self):
        with pytest.raises(SchemaError):
            marginalize(worked_histogram(), ["nope"])

    def test_random_properties(self):
        rng = np.random.default_rng(7)
        schema = AttributeSchema(
            (("x", ("a", "b", "c")), ("y", ("0", "1")), ("z", ("p", "q", "r")))
        )
        for _ in range(20):
            counts = {}
            for _ in range(int(rng.integers(1, 12))):
                key = tuple(rng.choice(d) for d in schema.domains)
                counts[key] = int(rng.integers(1, 50))
            h = Histogram(schema, counts)
            # total preserved exactly for any projection
            for attrs in (["x"], ["y", "z"], [], ["x", "y", "z"]):
                assert sum(marginalize(h, attrs).counts.values()) == h.total
            # chained projection T <= S equals direct projection
            inner = marginalize(h, ["x", "z"])
            direct = marginalize(h, ["z"])
            chained = {}
            for key, c in inner.counts.items():
                chained[(key[1],)] = chained.get((key[1],), 0) + c
            assert chained == direct.counts


class TestNormalize:
    def test_uniform(self):
        h = Histogram(two_attr_schema(), {("a", "0"): 2, ("b", "0"): 2})
        assert normalize(h) == {("a", "0"): 0.5, ("b", "0"): 0.5}

    def test_division(self):
        h = Histogram(two_attr_schema(), {("a", "0"): 3, ("b", "0"): 1})
        assert normalize(h) == {("a", "0"): 0.75, ("b", "0"): 0.25}

    def test_empty_errors(self):
        with pytest.raises(EmptyInputError):
            normalize(Histogram(two_attr_schema(), {}))

    def test_sums_to_one_and_rescales(self):
        rng = np.random.default_rng(3)
        schema = two_attr_schema()
        for _ in range(20):
            counts = {
                key: float(rng.integers(1, 1000)) / 8.0
                for key in {("a", "0"), ("b", "1"), ("c", "0")}
            }
            h = Histogram(schema, counts, integral=False)
            dist = normalize(h)
            assert abs(sum(dist.values()) - 1.0) <= 1e-12
            for key, p in dist.items():
                assert abs(p * h.total - h.get(key)) <= 1e-12 * h.total


class TestGroupBy:
    def test_od_aggregation_preserves_total(self):
        schema = AttributeSchema(
            (
                ("origin", ("o1", "o2")),
                ("destination", ("d1", "d2")),
                ("gender", ("m", "f")),
                ("rating", ("1", "2")),
            )
        )
        rng = np.random.default_rng(11)
        counts = {}
        for _ in range(10):
            key = tuple(rng.choice(d) for d in schema.domains)
            counts[key] = int(rng.integers(1, 20))
        h = Histogram(schema, counts)
        g = group_by(h, ["origin", "destination"])
        assert g.total == h.total
        assert g.schema.names == ("origin", "destination")
        assert len(g) <= len(h)

    def test_sum_example(self):
        schema = AttributeSchema(
            (("o", ("o1",)), ("d", ("d1",)), ("g", ("m", "f")))
        )
        h = Histogram(schema, {("o1", "d1", "m"): 2, ("o1", "d1", "f"): 3})
        g = group_by(h, ["o", "d"])
        assert dict(g.items()) == {("o1", "d1"): 5}

    def test_keep_all_is_identity(self):
        h = worked_histogram()
        g = group_by(h, ["first", "second"])
        assert g == h


class TestSupportUnion:
    def test_sort_rule(self):
        schema = AttributeSchema((("x", ("a", "b", "c")),))
        h1 = Histogram(schema, {("a",): 5, ("b",): 1})
        h2 = Histogram(schema, {("b",): 2, ("c",): 4})
        assert support_union(h1, h2) == [("a",), ("b",), ("c",)]

    def test_identical_histograms(self):
        h = worked_histogram()
        union = support_union(h, h)
        assert union == sorted(h.keys(), key=lambda k: (-h.get(k), k))

    def test_lexicographic_tiebreak(self):
        schema = AttributeSchema((("x", ("a", "b")),))
        h1 = Histogram(schema, {("a",): 1, ("b",): 1})
        h2 = Histogram(schema, {})
        assert support_union(h1, h2) == [("a",), ("b",)]

    def test_schema_mismatch(self):
        h1 = worked_histogram()
        h2 = Histogram(AttributeSchema((("other", ("a",)),)), {("a",): 1})
        with pytest.raises(SchemaError):
            support_union(h1, h2)


class TestCsv:
    def test_integer_roundtrip(self, tmp_path):
        h = worked_histogram()
        path = tmp_path / "h.csv"
        write_histogram_csv(h, path)
        again = read_histogram_csv(path, h.schema)
        assert again == h

    def test_fractional_roundtrip_nine_decimals(self, tmp_path):
        schema = two_attr_schema()
        h = Histogram(schema, {("a", "0"): 1.5, ("b", "1"): 0.333333333}, integral=False)
        path = tmp_path / "h.csv"
        write_histogram_csv(h, path)
        text = path.read_text()
        assert "1.500000000" in text and "0.333333333" in text
        again = read_histogram_csv(path, schema)
        assert not again.integral
        assert again.get(("a", "0")) == pytest.approx(1.5, abs=1e-9)

    def test_duplicate_keys_rejected(self, tmp_path):
        path = tmp_path / "h.csv"
        path.write_text("first,second,count\na,0,1\na,0,2\n")
        with pytest.raises(DataError):
            read_histogram_csv(path, two_attr_schema())

    def test_negative_count_rejected(self, tmp_path):
        path = tmp_path / "h.csv"
        path.write_text("first,second,count\na,0,-1\n")
        with pytest.raises(DataError):
            read_histogram_csv(path, two_attr_schema())

    def test_header_mismatch_rejected(self, tmp_path):
        path = tmp_path / "h.csv"
        path.write_text("wrong,second,count\na,0,1\n")
        with pytest.raises(SchemaError):
            read_histogram_csv(path, two_attr_schema())


def test_merge_adds_counts():
    h1 = worked_histogram()
    h2 = Histogram(two_attr_schema(), {("a", "0"): 1, ("c", "1"): 2})
    m = merge(h1, h2)
    assert m.get(("a", "0")) == 4
    assert m.get(("c", "1")) == 2
    assert m.total == h1.total + h2.total
