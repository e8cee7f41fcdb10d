import numpy as np
import pytest

from latent_groups.data import (
    DOG_LYMPHOMA,
    Dataset,
    TwoWayLayout,
    builtin_dataset,
    load_ancova_csv,
    load_twoway_csv,
    load_twoway_long_csv,
    transpose_layout,
    write_ancova_csv,
    write_twoway_csv,
)
from latent_groups.errors import ConfigurationError, DataValidationError, ParseError


def _write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def test_small_long_file(tmp_path):
    f = _write(tmp_path / "d.csv", "y,level,x\n1.0,a,0.5\n2.0,b,0.1\n3.5,a,0.2\n")
    d = load_ancova_csv(f, "y", "level", "x")
    assert d.K == 2 and d.N == 3
    assert d.level.tolist() == [1, 2, 1]
    assert d.level_labels == ("a", "b")
    np.testing.assert_array_equal(d.covariate, [0.5, 0.1, 0.2])


def test_blank_response_names_row(tmp_path):
    f = _write(tmp_path / "d.csv", "y,level\n1.0,a\n,b\n")
    with pytest.raises(ParseError, match="row 3"):
        load_ancova_csv(f, "y", "level")


def test_non_numeric_cell(tmp_path):
    f = _write(tmp_path / "d.csv", "y,level\n1.0,a\nabc,b\n")
    with pytest.raises(ParseError, match="non-numeric"):
        load_ancova_csv(f, "y", "level")


def test_missing_column_is_configuration_error(tmp_path):
    f = _write(tmp_path / "d.csv", "y,level\n1.0,a\n2.0,b\n")
    with pytest.raises(ConfigurationError, match="thickness"):
        load_ancova_csv(f, "y", "level", "thickness")


def test_missing_file():
    with pytest.raises(ConfigurationError):
        load_ancova_csv("/nonexistent/file.csv", "y", "level")


def test_flurry_style_columns(tmp_path):
    rows = ["strength,plant,thickness"]
    rng = np.random.default_rng(0)
    for plant in ("canna", "corn", "potato"):
        for _ in range(4):
            rows.append(f"{rng.normal(10, 1):.3f},{plant},{rng.uniform(5, 15):.2f}")
    f = _write(tmp_path / "flurry.csv", "\n".join(rows) + "\n")
    d = load_ancova_csv(f, "strength", "plant", "thickness")
    assert d.K == 3
    assert d.level_labels == ("canna", "corn", "potato")


def test_levels_follow_first_appearance(tmp_path):
    f = _write(tmp_path / "d.csv", "y,g\n1,zeta\n2,alpha\n3,zeta\n4,mid\n")
    first = load_ancova_csv(f, "y", "g")
    again = load_ancova_csv(f, "y", "g")
    assert first.level_labels == ("zeta", "alpha", "mid")
    assert again.level_labels == first.level_labels
    assert again.level.tolist() == first.level.tolist()


def test_dataset_rejects_single_level():
    with pytest.raises(DataValidationError):
        Dataset(y=[1.0, 2.0], level=[1, 1], level_labels=("a",))


def test_dataset_rejects_empty_level():
    with pytest.raises(DataValidationError, match="no observations"):
        Dataset(y=[1.0, 2.0], level=[1, 1], level_labels=("a", "b"))


def test_dataset_rejects_nonfinite():
    with pytest.raises(DataValidationError):
        Dataset(y=[1.0, np.nan], level=[1, 2], level_labels=("a", "b"))


def test_dog_table_dimensions():
    assert (DOG_LYMPHOMA.R, DOG_LYMPHOMA.C, DOG_LYMPHOMA.N) == (6, 2, 12)
    assert builtin_dataset("builtin:dog-lymphoma") is DOG_LYMPHOMA
    with pytest.raises(ConfigurationError):
        builtin_dataset("builtin:nope")


def test_twoway_matrix_file(tmp_path):
    f = _write(tmp_path / "t.csv", "dog,normal,tumor\nd1,9.33,9.22\nd2,9.51,9.39\nd3,8.75,9.42\nd4,8.64,9.25\n")
    t = load_twoway_csv(f)
    assert (t.R, t.C) == (4, 2)
    assert t.row_labels == ("d1", "d2", "d3", "d4")
    assert t.cells[2, 1] == 9.42


def test_zero_table_loads(tmp_path):
    f = _write(tmp_path / "z.csv", "r,a,b\nx,0,0\ny,0,0\n")
    t = load_twoway_csv(f)
    assert t.cells.shape == (2, 2)


def test_five_by_five(tmp_path):
    lines = ["r," + ",".join(f"c{j}" for j in range(5))]
    lines += [f"r{i}," + ",".join(str(i * 5 + j) for j in range(5)) for i in range(5)]
    t = load_twoway_csv(_write(tmp_path / "t.csv", "\n".join(lines)))
    assert (t.R, t.C, t.N) == (5, 5, 25)


def test_ragged_table(tmp_path):
    f = _write(tmp_path / "t.csv", "r,a,b\nx,1,2\ny,3\n")
    with pytest.raises(ParseError, match="ragged"):
        load_twoway_csv(f)


def test_missing_cell(tmp_path):
    f = _write(tmp_path / "t.csv", "r,a,b\nx,1,2\ny,3,\n")
    with pytest.raises(DataValidationError):
        load_twoway_csv(f)


def test_long_twoway_rejects_duplicates(tmp_path):
    f = _write(tmp_path / "l.csv", "v,r,c\n1,a,x\n2,a,y\n3,a,x\n")
    with pytest.raises(DataValidationError, match="duplicate"):
        load_twoway_long_csv(f, "v", "r", "c")


def test_long_twoway_matches_matrix(tmp_path):
    f = _write(tmp_path / "l.csv", "v,r,c\n1,a,x\n2,a,y\n3,b,x\n4,b,y\n")
    t = load_twoway_long_csv(f, "v", "r", "c")
    np.testing.assert_array_equal(t.cells, [[1, 2], [3, 4]])


def test_transpose():
    t = transpose_layout(DOG_LYMPHOMA)
    assert (t.R, t.C) == (2, 6)
    assert t.row_labels == DOG_LYMPHOMA.col_labels
    for i in range(6):
        for j in range(2):
            assert t.cells[j, i] == DOG_LYMPHOMA.cells[i, j]
    back = transpose_layout(t)
    np.testing.assert_array_equal(back.cells, DOG_LYMPHOMA.cells)
    assert back.row_labels == DOG_LYMPHOMA.row_labels


def test_round_trip_long(tmp_path):
    rng = np.random.default_rng(4)
    d = Dataset(y=rng.normal(size=9) / 3, level=[1, 2, 3] * 3, level_labels=("p", "q", "r"),
                covariate=rng.normal(size=9) * 1e-7, covariate_name="x")
    write_ancova_csv(d, tmp_path / "d.csv")
    e = load_ancova_csv(tmp_path / "d.csv", "y", "level", "x")
    assert np.array_equal(e.y, d.y) and np.array_equal(e.covariate, d.covariate)
    assert e.level_labels == d.level_labels


def test_round_trip_matrix(tmp_path):
    rng = np.random.default_rng(5)
    t = TwoWayLayout(rng.normal(size=(4, 3)) * np.pi, ("a", "b", "c", "d"), ("x", "y", "z"))
    write_twoway_csv(t, tmp_path / "t.csv")
    u = load_twoway_csv(tmp_path / "t.csv")
    assert np.array_equal(u.cells, t.cells)
    assert u.row_labels == t.row_labels and u.col_labels == t.col_labels
