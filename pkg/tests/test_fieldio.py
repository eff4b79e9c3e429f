import numpy as np
import pytest

from confspec.fieldio import export_csv, read_field, write_field
from confspec.grids import CovectorField, Grid, MetricField, ScalarField, SymTensorField

from conftest import random_traceless, trig_scalar_field


@pytest.fixture
def grid():
    return Grid((6, 4, 5), (1.0, 2.0, 0.5))


def test_scalar_round_trip(tmp_path, grid):
    f = trig_scalar_field(grid, 3, 0.8)
    path = tmp_path / "scalar.csf"
    write_field(path, f)
    back = read_field(path)
    assert isinstance(back, ScalarField)
    assert back.grid == grid
    assert np.array_equal(back.values, f.values)


def test_covector_round_trip(tmp_path, grid):
    rng = np.random.default_rng(1)
    v = CovectorField(grid, rng.standard_normal((3,) + grid.shape))
    path = tmp_path / "covector.csf"
    write_field(path, v)
    back = read_field(path)
    assert isinstance(back, CovectorField)
    assert np.array_equal(back.values, v.values)


def test_tensor_and_metric_round_trip(tmp_path, grid):
    h = random_traceless(grid, 2, 0.3)
    write_field(tmp_path / "tensor.csf", h)
    back = read_field(tmp_path / "tensor.csf")
    assert isinstance(back, SymTensorField)
    assert np.array_equal(back.values, h.values)

    g = MetricField.flat(grid, 2.0)
    write_field(tmp_path / "metric.csf", g)
    back = read_field(tmp_path / "metric.csf")
    assert np.array_equal(back.values, g.tensor.values)
    assert isinstance(MetricField(back), MetricField)


def test_bad_magic_rejected(tmp_path):
    path = tmp_path / "bad.csf"
    path.write_bytes(b"NOPE" + b"\x00" * 64)
    with pytest.raises(ValueError, match="magic"):
        read_field(path)


def test_trailing_bytes_rejected(tmp_path, grid):
    f = ScalarField.constant(grid, 1.0)
    path = tmp_path / "padded.csf"
    write_field(path, f)
    with open(path, "ab") as fh:
        fh.write(b"\x00")
    with pytest.raises(ValueError, match="trailing"):
        read_field(path)


def test_csv_export_layout(tmp_path, grid):
    f = trig_scalar_field(grid, 5, 0.2)
    path = tmp_path / "field.csv"
    export_csv(path, f)
    lines = path.read_text().splitlines()
    assert lines[0] == "x0,x1,x2,value"
    assert len(lines) == 1 + grid.num_nodes
    first = [float(v) for v in lines[1].split(",")]
    assert first[:3] == [0.0, 0.0, 0.0]
    assert first[3] == f.values[0, 0, 0]


def test_csv_export_tensor_columns(tmp_path, grid):
    h = random_traceless(grid, 8, 0.5)
    path = tmp_path / "tensor.csv"
    export_csv(path, h)
    header = path.read_text().splitlines()[0]
    assert header == "x0,x1,x2,t00,t01,t02,t11,t12,t22"
