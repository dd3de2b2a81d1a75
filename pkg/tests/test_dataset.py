import io
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from moviegross import schema
from moviegross.dataset import (
    Dataset,
    FilterConfig,
    apply_filters,
    drop_empty_genres,
    log_transform,
    parse_dataset,
    split,
    write_filter_report,
)
from moviegross.errors import DomainError, SchemaError
from moviegross.synth import generate


def make_csv(rows):
    header = ",".join(schema.ALL_COLUMNS)
    return "\n".join([header] + rows) + "\n"


def make_row(**overrides):
    values = {
        "Movie.Name": "A Film", "Year": "2012", "Month": "Jun", "Sequel": "0",
        "Budget": "50000000", "Runtime": "110", "MPAA": "PG-13",
        "Vote": "1200", "Ratings": "6.5", "Opening.Week": "9000000",
        "Screens": "2500", "Gross.Revenue": "45000000",
    }
    for genre in schema.GENRE_COLUMNS:
        values[genre] = "0"
    values["Drama"] = "1"
    values.update(overrides)
    return ",".join(values[c] for c in schema.ALL_COLUMNS)


class TestParse:
    def test_minimal_file(self):
        d = parse_dataset(io.StringIO(make_csv([make_row()])))
        assert d.n == 1
        record = d.records()[0]
        assert record.year == 2012
        assert record.genres["Drama"] == 1.0

    def test_missing_cell_passthrough(self):
        d = parse_dataset(io.StringIO(make_csv([make_row(Budget="")])))
        assert d.records()[0].budget is None

    def test_unparseable_cell_becomes_missing(self):
        d = parse_dataset(io.StringIO(make_csv([make_row(Runtime="long")])))
        assert d.records()[0].runtime is None

    def test_bad_genre_flag_becomes_missing(self):
        d = parse_dataset(io.StringIO(make_csv([make_row(Drama="2")])))
        assert d.records()[0].genres["Drama"] is None

    def test_771_rows(self):
        rows = [make_row(**{"Movie.Name": f"F{i}"}) for i in range(771)]
        assert parse_dataset(io.StringIO(make_csv(rows))).n == 771

    def test_missing_header_column(self):
        text = "Movie.Name,Year\nX,2012\n"
        with pytest.raises(SchemaError, match="missing required"):
            parse_dataset(io.StringIO(text))

    def test_duplicate_column(self):
        header = ",".join(schema.ALL_COLUMNS) + ",Year"
        with pytest.raises(SchemaError, match="duplicate"):
            parse_dataset(io.StringIO(header + "\n"))

    def test_empty_input(self):
        with pytest.raises(SchemaError):
            parse_dataset(io.StringIO(""))

    def test_alternate_delimiter(self):
        text = make_csv([make_row()]).replace(",", ";")
        assert parse_dataset(io.StringIO(text), delimiter=";").n == 1


class TestFilters:
    def base(self, *rows):
        return parse_dataset(io.StringIO(make_csv(list(rows))))

    def test_gross_floor(self):
        d = self.base(make_row(**{"Gross.Revenue": "900000"}))
        out, counts = apply_filters(d, FilterConfig())
        assert out.n == 0
        assert counts["removed_min_gross"] == 1

    def test_mpaa_exclusion(self):
        d = self.base(make_row(MPAA="NC-17"))
        out, counts = apply_filters(d, FilterConfig())
        assert out.n == 0
        assert counts["removed_mpaa"] == 1

    def test_permissive_config_is_identity(self):
        d = self.base(make_row(), make_row(**{"Movie.Name": "B"}))
        config = FilterConfig(year_range=(1900, 2100), min_gross=1.0,
                              gross_cap=1e15,
                              required_mpaa=frozenset(schema.MPAA_LEVELS),
                              drop_missing=False)
        out, _ = apply_filters(d, config)
        assert out.frame.equals(d.frame)

    def test_gross_cap(self):
        d = self.base(make_row(**{"Gross.Revenue": "700000000"}))
        out, counts = apply_filters(d, FilterConfig())
        assert out.n == 0
        assert counts["removed_gross_cap"] == 1

    def test_missing_dropped(self):
        d = self.base(make_row(Budget=""), make_row(**{"Movie.Name": "B"}))
        out, counts = apply_filters(d, FilterConfig())
        assert out.n == 1
        assert counts["removed_missing"] == 1

    def test_idempotent(self):
        frame = generate(seed=3, n=120)
        d = parse_dataset(io.StringIO(frame.to_csv(index=False)))
        config = FilterConfig()
        once, _ = apply_filters(d, config)
        twice, counts = apply_filters(once, config)
        assert twice.frame.equals(once.frame)
        assert counts["input"] == counts["output"]

    def test_order_preserved(self):
        d = self.base(
            make_row(**{"Movie.Name": "A"}),
            make_row(**{"Movie.Name": "B", "Gross.Revenue": "1000"}),
            make_row(**{"Movie.Name": "C"}),
        )
        out, _ = apply_filters(d, FilterConfig())
        assert list(out.frame["Movie.Name"]) == ["A", "C"]

    def test_config_invariant(self):
        with pytest.raises(DomainError):
            FilterConfig(min_gross=2e9, gross_cap=1e9)

    def test_report_format(self):
        buffer = io.StringIO()
        write_filter_report({"input": 3, "output": 2}, buffer)
        assert buffer.getvalue() == "input = 3\noutput = 2\n"


class TestLogTransform:
    def test_ln_e(self):
        d = parse_dataset(io.StringIO(make_csv(
            [make_row(**{"Gross.Revenue": repr(math.e)})])))
        out = log_transform(d, ["Gross.Revenue"])
        assert out.frame["Gross.Revenue"].iloc[0] == pytest.approx(1.0,
                                                                   abs=1e-12)
        assert "Gross.Revenue" in out.transform_log

    def test_ln_one(self):
        d = parse_dataset(io.StringIO(make_csv([make_row(Budget="1")])))
        assert log_transform(d, ["Budget"]).frame["Budget"].iloc[0] == 0.0

    def test_high_precision_oracle(self):
        value = "2718281.8285"
        d = parse_dataset(io.StringIO(make_csv(
            [make_row(**{"Gross.Revenue": value})])))
        out = log_transform(d, ["Gross.Revenue"])
        expected = float(mpmath.log(mpmath.mpf(value)))
        assert out.frame["Gross.Revenue"].iloc[0] == pytest.approx(expected,
                                                                   abs=1e-12)

    def test_roundtrip(self):
        frame = generate(seed=9, n=50)
        d = parse_dataset(io.StringIO(frame.to_csv(index=False)))
        out = log_transform(d, schema.LOG_COLUMNS)
        for column in schema.LOG_COLUMNS:
            back = np.exp(out.frame[column].to_numpy())
            original = d.frame[column].to_numpy()
            assert np.allclose(back, original, rtol=1e-9)

    def test_nonpositive_named(self):
        d = parse_dataset(io.StringIO(make_csv(
            [make_row(**{"Movie.Name": "Flop", "Vote": "0"})])))
        with pytest.raises(DomainError, match="Flop"):
            log_transform(d, ["Vote"])


class TestDropEmptyGenres:
    def test_noop_when_populated(self):
        frame = generate(seed=2, n=40).drop(columns=["Short", "Adult",
                                                     "Film.Noir"])
        d = Dataset(frame=frame)
        out, dropped = drop_empty_genres(d)
        assert dropped == []
        assert out.column_labels == d.column_labels

    def test_bundled_empty_genres(self):
        frame = generate(seed=2, n=40)
        d = Dataset(frame=frame)
        out, dropped = drop_empty_genres(d)
        assert sorted(dropped) == ["Adult", "Film.Noir", "Short"]
        assert len(out.genre_columns()) == 20

    def test_values_untouched(self):
        frame = generate(seed=2, n=40)
        d = Dataset(frame=frame)
        out, _ = drop_empty_genres(d)
        for column in out.column_labels:
            assert out.frame[column].equals(frame[column])

    def test_single_record(self):
        row = make_row()
        d = parse_dataset(io.StringIO(make_csv([row])))
        out, dropped = drop_empty_genres(d)
        assert out.genre_columns() == ("Drama",)
        assert len(dropped) == 22


class TestSplit:
    def _dataset(self, n, seed=0):
        frame = generate(seed=seed, n=max(n, 3)).head(n)
        return Dataset(frame=frame.reset_index(drop=True))

    def test_769_row_sizes(self):
        parts = split(self._dataset(769), (0.6, 0.2, 0.2), seed=1)
        assert (parts.train.n, parts.validation.n, parts.test.n) == \
            (461, 153, 155)

    def test_exact_division(self):
        parts = split(self._dataset(10), (0.6, 0.2, 0.2), seed=1)
        assert (parts.train.n, parts.validation.n, parts.test.n) == (6, 2, 2)

    def test_same_seed_identical(self):
        d = self._dataset(50)
        a = split(d, (0.6, 0.2, 0.2), seed=7)
        b = split(d, (0.6, 0.2, 0.2), seed=7)
        assert a.train.frame.equals(b.train.frame)
        assert a.test.frame.equals(b.test.frame)

    def test_too_small(self):
        with pytest.raises(DomainError):
            split(self._dataset(2), (0.6, 0.2, 0.2), seed=0)

    def test_bad_ratios(self):
        with pytest.raises(DomainError):
            split(self._dataset(10), (0.6, 0.2, 0.3), seed=0)

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 10_000), n=st.integers(3, 120))
    def test_partition_property(self, seed, n):
        d = self._dataset(n, seed=1)
        parts = split(d, (0.6, 0.2, 0.2), seed=seed)
        names = [list(p.frame["Movie.Name"]) for p in
                 (parts.train, parts.validation, parts.test)]
        combined = sum(names, [])
        assert len(combined) == n
        assert set(combined) == set(d.frame["Movie.Name"])
        assert len(set(combined)) == n


def test_dataset_write_roundtrip():
    frame = generate(seed=5, n=20)
    d = parse_dataset(io.StringIO(frame.to_csv(index=False)))
    buffer = io.StringIO()
    d.write(buffer)
    again = parse_dataset(io.StringIO(buffer.getvalue()))
    assert again.frame["Gross.Revenue"].equals(d.frame["Gross.Revenue"])
