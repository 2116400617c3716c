import numpy as np
import pytest

from psmatch.data import ColumnLayout, load_dataset, validate
from psmatch.errors import DegenerateArmError, DomainError, MissingFileError, ParseError, ShapeError
from psmatch.models import Dataset, Observation


def write(tmp_path, text, name="data.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


GOOD = "y,w,x1\n5,1,0.3\n1,0,-0.2\n3,1,0.1\n2,0,0.4\n"


def test_load_four_rows(tmp_path):
    ds = load_dataset(write(tmp_path, GOOD))
    assert (ds.n, ds.n1, ds.n0, ds.k) == (4, 2, 2, 1)
    np.testing.assert_array_equal(ds.y, [5, 1, 3, 2])
    np.testing.assert_array_equal(ds.w, [1, 0, 1, 0])
    np.testing.assert_allclose(ds.x[:, 0], [0.3, -0.2, 0.1, 0.4])


def test_columns_matched_by_name(tmp_path):
    ds = load_dataset(write(tmp_path, "x2,w,y,x1\n1,1,5,0.3\n2,0,1,-0.2\n"))
    np.testing.assert_allclose(ds.x, [[0.3, 1.0], [-0.2, 2.0]])


def test_custom_layout(tmp_path):
    layout = ColumnLayout(outcome="outcome", treatment="treated", covariate_prefix="z")
    ds = load_dataset(write(tmp_path, "outcome,treated,z1\n1,1,0\n2,0,1\n"), layout)
    assert ds.n == 2


def test_identical_bytes_identical_dataset(tmp_path):
    assert load_dataset(write(tmp_path, GOOD, "a.csv")) == load_dataset(write(tmp_path, GOOD, "b.csv"))


def test_treatment_two_names_row(tmp_path):
    with pytest.raises(DomainError) as err:
        load_dataset(write(tmp_path, "y,w,x1\n5,1,0.3\n1,0,-0.2\n3,2,0.1\n2,0,0.4\n"))
    assert err.value.row == 3
    assert err.value.column == "w"
    assert "row 3" in str(err.value)


def test_all_treated(tmp_path):
    with pytest.raises(DegenerateArmError):
        load_dataset(write(tmp_path, "y,w,x1\n5,1,0.3\n1,1,-0.2\n"))


def test_non_numeric_cell(tmp_path):
    with pytest.raises(ParseError) as err:
        load_dataset(write(tmp_path, "y,w,x1\n5,1,0.3\n1,0,abc\n"))
    assert (err.value.row, err.value.column) == (2, "x1")


def test_missing_cell(tmp_path):
    with pytest.raises(ParseError) as err:
        load_dataset(write(tmp_path, "y,w,x1\n5,1,0.3\n,0,0.1\n"))
    assert err.value.row == 2
    assert "missing" in str(err.value)


def test_extra_field_on_every_row(tmp_path):
    with pytest.raises(ParseError) as err:
        load_dataset(write(tmp_path, "y,w,x1\n5,1,0,7\n1,0,1,8\n3,1,0,9\n"))
    assert err.value.row == 1


def test_extra_field_on_one_row(tmp_path):
    with pytest.raises(ParseError) as err:
        load_dataset(write(tmp_path, "y,w,x1\n5,1,0.3\n1,0,-0.2\n3,1,0.1,9\n"))
    assert err.value.row == 3


def test_short_row_is_missing_cell(tmp_path):
    with pytest.raises(ParseError) as err:
        load_dataset(write(tmp_path, "y,w,x1\n5,1,0.3\n1,0\n"))
    assert err.value.row == 2
    assert err.value.column == "x1"


def test_duplicate_column(tmp_path):
    with pytest.raises(ShapeError):
        load_dataset(write(tmp_path, "y,w,x1,x1\n5,1,0.3,1\n1,0,-0.2,2\n"))


def test_missing_file(tmp_path):
    with pytest.raises(MissingFileError):
        load_dataset(tmp_path / "nope.csv")


def test_gap_in_covariates(tmp_path):
    with pytest.raises(ShapeError):
        load_dataset(write(tmp_path, "y,w,x1,x3\n5,1,0.3,1\n1,0,-0.2,2\n"))


def test_missing_treatment_column(tmp_path):
    with pytest.raises(ShapeError):
        load_dataset(write(tmp_path, "y,x1\n5,0.3\n1,-0.2\n"))


def test_dataset_rejects_non_finite():
    with pytest.raises(DomainError):
        Dataset([[0.0], [np.inf]], [1, 0], [1.0, 2.0])


def test_dataset_shape_mismatch():
    with pytest.raises(ShapeError):
        Dataset([[0.0], [1.0], [2.0]], [1, 0], [1.0, 2.0])


def test_dataset_is_read_only(t4):
    ds, _ = t4
    with pytest.raises(ValueError):
        ds.y[0] = 10.0


def test_observations_round_trip(t4):
    ds, _ = t4
    assert Dataset.from_observations(ds.observations) == ds
    assert ds.observations[0] == Observation((0.62,), 1, 5.0)


def test_validate_interior(t4):
    ds, _ = t4
    report = validate(ds, np.array([0.3, 0.7, 0.5, 0.4]))
    assert report.warnings == ()
    assert report.min_score[1] == 0.3
    assert report.max_score[0] == 0.7


def test_validate_flags_one_unit(t4):
    ds, _ = t4
    report = validate(ds, np.array([0.5, 0.995, 0.5, 0.5]))
    assert report.warnings == (1,)
    assert "overlap_warnings=1" in report.to_lines()


def test_validate_rejects_boundary(t4):
    ds, _ = t4
    with pytest.raises(DomainError):
        validate(ds, np.array([0.5, 1.0, 0.5, 0.5]))


def test_arm_sizes_add_up(tmp_path):
    rng = np.random.default_rng(31)
    for case in range(50):
        n = int(rng.integers(2, 40))
        w = rng.integers(0, 2, size=n)
        w[:2] = (0, 1)
        rows = "".join(f"{rng.normal():.6f},{wi},{rng.normal():.6f}\n" for wi in w)
        ds = load_dataset(write(tmp_path, "y,w,x1\n" + rows, f"case{case}.csv"))
        assert ds.n == ds.n0 + ds.n1 == n
        assert ds.n1 == int(w.sum())
