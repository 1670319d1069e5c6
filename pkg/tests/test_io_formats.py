import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tropfit.io_formats import (
    ParseError,
    parse_dataset,
    parse_document,
    parse_matrix,
    parse_model,
    parse_report,
    parse_vector,
    write_dataset,
    write_matrix,
    write_model,
    write_plot_data,
    write_report,
    write_vector,
)
from tropfit.regression import Dataset, PwlModel
from tropfit.solver import FitProblem, greedy_sparse_solve

NEG = -np.inf

ext_values = st.one_of(
    st.floats(-1e300, 1e300, allow_nan=False, allow_infinity=False),
    st.just(math.inf),
    st.just(-math.inf),
)


class TestMatrixVector:
    def test_worked_matrix(self):
        got = parse_matrix("0,5,2\n4,1,0\n0,1,0")
        assert np.array_equal(got, [[0, 5, 2], [4, 1, 0], [0, 1, 0]])

    def test_single_bottom_cell(self):
        assert np.array_equal(parse_matrix("-inf"), [[NEG]])

    def test_inf_token_casings(self):
        got = parse_matrix("-inf,-Inf,-INF\ninf,Inf,+inf")
        assert np.isneginf(got[0]).all() and np.isposinf(got[1]).all()

    def test_header_checked(self):
        assert parse_matrix("# 2 2\n1,2\n3,4").shape == (2, 2)
        with pytest.raises(ParseError):
            parse_matrix("# 3 2\n1,2\n3,4")
        with pytest.raises(ParseError):
            parse_matrix("# nonsense\n1,2")

    def test_malformed_cell_position(self):
        with pytest.raises(ParseError) as exc:
            parse_matrix("1,x")
        assert exc.value.row == 1 and exc.value.col == 2

    def test_ragged_rejected(self):
        with pytest.raises(ParseError):
            parse_matrix("1,2\n3")

    def test_rejects_nan_and_overflow(self):
        with pytest.raises(ParseError):
            parse_matrix("nan")
        with pytest.raises(ParseError):
            parse_matrix("1e999")
        with pytest.raises(ParseError):
            parse_matrix("infinity")

    def test_empty_rejected(self):
        with pytest.raises(ParseError):
            parse_matrix("")
        with pytest.raises(ParseError):
            parse_matrix("# 1 1\n")

    def test_vector_both_layouts(self):
        assert np.array_equal(parse_vector("1\n2\n3"), [1, 2, 3])
        assert np.array_equal(parse_vector("1,2,3"), [1, 2, 3])
        with pytest.raises(ParseError):
            parse_vector("1,2\n3,4")

    @settings(max_examples=80, deadline=None)
    @given(st.lists(st.lists(ext_values, min_size=1, max_size=4), min_size=1, max_size=4))
    def test_round_trip(self, rows):
        if len({len(r) for r in rows}) != 1:
            rows = [r[: min(len(r) for r in rows)] for r in rows]
        mat = np.array(rows, dtype=float)
        again = parse_matrix(write_matrix(mat))
        assert np.array_equal(mat, again)
        again2 = parse_matrix(write_matrix(mat, header=True))
        assert np.array_equal(mat, again2)

    def test_vector_round_trip_exact(self):
        v = np.array([0.1, -1e300, NEG, math.pi, 3.0])
        assert np.array_equal(parse_vector(write_vector(v)), v)


class TestDataset:
    def test_basic(self):
        d = parse_dataset("1,2,3\n4,5,6")
        assert d.dim == 2 and len(d) == 2
        assert np.array_equal(d.f, [3, 6])

    def test_header_skipped(self):
        d = parse_dataset("x,y,f\n1,2,3")
        assert len(d) == 1

    def test_rejects_infinite_values(self):
        with pytest.raises(ParseError):
            parse_dataset("1,inf\n2,3")

    def test_needs_two_columns(self):
        with pytest.raises(ParseError):
            parse_dataset("1\n2")

    def test_round_trip(self):
        d = Dataset(np.array([[1.5, -2.0], [0.25, 1e-8]]), np.array([3.0, -4.5]))
        again = parse_dataset(write_dataset(d))
        assert np.array_equal(d.x, again.x) and np.array_equal(d.f, again.f)

    def test_comment_lines_skipped(self):
        d = Dataset(np.array([[1.0], [2.0]]), np.array([3.0, 4.0]))
        text = write_dataset(d, comment='config: {"seed": 0}')
        assert text.startswith("# config")
        again = parse_dataset(text)
        assert np.array_equal(d.f, again.f)


def sample_model(**kw):
    defaults = dict(
        slopes=np.array([[1.0, 2.0], [0.0, -1.0], [3.5, 0.25]]),
        intercepts=np.array([0.5, NEG, -2.0]),
        p=2.0,
        theta=0.75,
        estimator="smmae",
        seed=7,
        rms=0.125,
        max_abs=0.5,
    )
    defaults.update(kw)
    return PwlModel(**defaults)


class TestModelJson:
    def test_round_trip_with_pruned_region(self):
        m = sample_model()
        again = parse_model(write_model(m))
        assert np.array_equal(m.slopes, again.slopes)
        assert np.array_equal(m.intercepts, again.intercepts)
        assert (m.p, m.theta, m.estimator, m.seed) == (again.p, again.theta, again.estimator, again.seed)
        assert (m.rms, m.max_abs) == (again.rms, again.max_abs)

    def test_infinite_p_round_trips(self):
        m = sample_model(p=math.inf)
        assert parse_model(write_model(m)).p == math.inf

    def test_missing_estimator_is_schema_error(self):
        doc = json.loads(write_model(sample_model()))
        del doc["estimator"]
        with pytest.raises(ParseError, match="estimator"):
            parse_model(json.dumps(doc))

    def test_support_consistency_checked(self):
        doc = json.loads(write_model(sample_model()))
        doc["support"] = 3
        with pytest.raises(ParseError, match="support"):
            parse_model(json.dumps(doc))

    def test_invalid_json(self):
        with pytest.raises(ParseError):
            parse_model("{not json")
        with pytest.raises(ParseError):
            parse_model("[1,2]")


class TestReportJson:
    def test_round_trip(self):
        A = np.array([[0.0, 5, 2], [4, 1, 0], [0, 1, 0]])
        sol = greedy_sparse_solve(FitProblem(A, np.array([3.0, 1, 0]), p=1, theta=1.0))
        text = write_report(sol, config={"command": "solve", "seed": 0})
        doc = parse_report(text)
        assert doc["support"] == [2, 0]
        assert doc["error_p"] == 1.0
        assert doc["infeasible"] is False
        assert doc["config"]["seed"] == 0

    def test_infeasible_report(self):
        doc = parse_report(write_report(None))
        assert doc["infeasible"] is True and doc["support"] == []

    def test_infinite_bound_token(self):
        text = write_report(None).replace('"ratio_bound": null', '"ratio_bound": "inf"')
        assert parse_report(text)["ratio_bound"] == math.inf


def test_plot_data_columns():
    d = Dataset(np.array([[1.0], [2.0]]), np.array([3.0, 4.0]))
    text = write_plot_data(d, [2.5, 4.0])
    rows = [line.split(",") for line in text.strip().splitlines()]
    assert [float(c) for c in rows[0]] == [1.0, 3.0, 2.5]


class TestFuzz:
    def test_parse_document_dispatch(self):
        assert parse_document("1,2", "vector").kind == "vector"
        with pytest.raises(ValueError):
            parse_document("1", "mystery")

    def test_mutations_never_crash(self):
        # a smaller sibling of the acceptance-scale fuzz run
        rng = np.random.default_rng(0)
        seeds = {
            "matrix": write_matrix(np.array([[1.0, NEG], [2.5, math.inf]]), header=True),
            "vector": write_vector(np.array([1.0, -2.0, NEG])),
            "dataset": write_dataset(Dataset(np.array([[1.0], [2.0]]), np.array([0.5, 1.5]))),
            "model": write_model(sample_model()),
            "report": write_report(None),
        }
        alphabet = b"0123456789.,-+einf{}[]\"\n #"
        for _ in range(3000):
            kind = list(seeds)[rng.integers(len(seeds))]
            raw = bytearray(seeds[kind].encode())
            for _ in range(rng.integers(1, 4)):
                op = rng.integers(3)
                pos = rng.integers(max(len(raw), 1))
                if op == 0 and raw:
                    raw[pos % len(raw)] = alphabet[rng.integers(len(alphabet))]
                elif op == 1:
                    raw.insert(pos, alphabet[rng.integers(len(alphabet))])
                elif raw:
                    del raw[pos % len(raw)]
            try:
                parse_document(raw.decode(errors="replace"), kind)
            except ParseError:
                pass
