"""Tests for path file ingestion and export"""

import json

import numpy as np
import pandas as pd
import pytest
from numpy.testing import assert_allclose

from data_loader import PathDataLoader, grid_from_times, validate_frame
from exceptions import NonUniformGrid, SchemaError
from utils.data_conversion import bundle_to_dataframe


def _write(path, text):
    path.write_text(text)
    return path


class TestPathDataLoader:

    def test_export_then_ingest(self, tmp_path, random_bundle):
        loader = PathDataLoader(data_dir=str(tmp_path))
        written = loader.export_paths(random_bundle, "walk.csv")
        assert written == tmp_path / "walk.csv"
        assert (tmp_path / "walk.meta.json").exists()

        bundle = loader.ingest_paths(written)
        assert bundle.grid == random_bundle.grid
        assert bundle.labels == ["C1", "C2"]
        assert bundle.meta["variant"] == "ingested"
        assert_allclose(bundle.values, random_bundle.values, rtol=1e-12)
        assert_allclose(bundle.increments, random_bundle.increments, rtol=1e-12, atol=1e-12)

    def test_header_written(self, tmp_path, random_bundle):
        path = PathDataLoader(data_dir=str(tmp_path)).export_paths(random_bundle, "walk.csv")
        assert path.read_text().splitlines()[0] == "time,C1,C2"

    def test_sidecar_labels_are_used(self, tmp_path, random_bundle):
        loader = PathDataLoader(data_dir=str(tmp_path))
        path = loader.export_paths(random_bundle, "walk.csv")
        side = tmp_path / "walk.meta.json"
        stored = json.loads(side.read_text())
        stored["labels"] = ["bid", "ask"]
        side.write_text(json.dumps(stored))
        assert loader.ingest_paths(path).labels == ["bid", "ask"]

    def test_file_without_sidecar(self, tmp_path):
        path = _write(tmp_path / "raw.csv", "time,C1\n0,0\n0.25,1\n0.5,3\n0.75,2\n1.0,2.5\n")
        bundle = PathDataLoader(data_dir=str(tmp_path)).ingest_paths(path)
        assert bundle.grid.n == 4
        assert bundle.grid.T == pytest.approx(1.0)
        assert_allclose(bundle.increments[:, 0], [1.0, 2.0, -1.0, 0.5])

    def test_empty_file(self, tmp_path):
        path = _write(tmp_path / "empty.csv", "")
        with pytest.raises(SchemaError):
            PathDataLoader(data_dir=str(tmp_path)).ingest_paths(path)

    def test_header_only(self, tmp_path):
        path = _write(tmp_path / "header.csv", "time,C1\n")
        with pytest.raises(SchemaError):
            PathDataLoader(data_dir=str(tmp_path)).ingest_paths(path)

    def test_missing_cell_reports_location(self, tmp_path):
        path = _write(tmp_path / "gap.csv", "time,C1,C2\n0,0,0\n0.5,1,\n1.0,2,2\n")
        with pytest.raises(SchemaError) as info:
            PathDataLoader(data_dir=str(tmp_path)).ingest_paths(path)
        assert info.value.row == 2
        assert info.value.column == "C2"

    def test_non_uniform_grid(self, tmp_path):
        path = _write(tmp_path / "uneven.csv", "time,C1\n0,0\n0.25,1\n0.6,2\n1.0,3\n")
        with pytest.raises(NonUniformGrid):
            PathDataLoader(data_dir=str(tmp_path)).ingest_paths(path)

    def test_parquet_export(self, tmp_path, random_bundle):
        pytest.importorskip("pyarrow")
        path = PathDataLoader(data_dir=str(tmp_path)).export_parquet([random_bundle, random_bundle], "all.parquet")
        frame = pd.read_parquet(path)
        assert len(frame) == 2 * (random_bundle.grid.N + 1)
        assert frame.columns.tolist() == ["path", "time", "C1", "C2"]


class TestValidateFrame:

    @pytest.mark.parametrize("columns", [["t", "C1"], ["time", "X1"], ["time", "C2"], ["time"]])
    def test_bad_headers(self, columns):
        df = pd.DataFrame([["0"] * len(columns), ["1"] * len(columns)], columns=columns)
        with pytest.raises(SchemaError):
            validate_frame(df)

    def test_non_numeric_cell(self):
        df = pd.DataFrame([["0", "0"], ["1", "abc"]], columns=["time", "C1"])
        with pytest.raises(SchemaError):
            validate_frame(df)

    def test_decreasing_times(self):
        df = pd.DataFrame([["0", "0"], ["1", "1"], ["0.5", "2"]], columns=["time", "C1"])
        with pytest.raises(NonUniformGrid):
            validate_frame(df)


class TestGridFromTimes:

    def test_uniform(self):
        grid = grid_from_times(np.arange(11) / 5.0)
        assert grid.n == 5
        assert grid.N == 10
        assert grid.T == pytest.approx(2.0)

    def test_spacing_not_reciprocal_integer(self):
        with pytest.raises(NonUniformGrid):
            grid_from_times(np.arange(5) * 0.3)


class TestDataConversion:

    def test_frame_layout(self, random_bundle):
        df = bundle_to_dataframe(random_bundle)
        assert df.columns.tolist() == ["time", "C1", "C2"]
        assert len(df) == random_bundle.grid.N + 1
        assert df["C1"].iloc[0] == 0.0
        assert df["time"].iloc[-1] == pytest.approx(random_bundle.grid.T)
