"""
Data Loader Module - Reads and writes paths in the delimiter-separated exchange format
Header `time,C1,...,Cp`, one row per grid time starting at t_0, with a JSON
metadata sidecar. Simulated and real-world data enter the covariation
statistics through the same route.
"""

import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
import pandas as pd

from config.paths import DEFAULT_DATA_DIR
from exceptions import NonUniformGrid, SchemaError
from simulate import GridSpec, PathBundle
from utils.data_conversion import bundle_to_dataframe, dataframe_to_bundle

logger = logging.getLogger(__name__)

SPACING_RTOL = 1e-9


def _sidecar(path: Path) -> Path:
    return path.with_suffix(".meta.json")


def validate_frame(df: pd.DataFrame) -> None:
    """
    Check header, cell values and time column of a raw frame

    Raises:
        SchemaError: empty file, bad header, non-numeric or missing cells, too few rows
        NonUniformGrid: times not strictly increasing or not uniformly spaced
    """
    if df.shape[0] == 0 or df.shape[1] == 0:
        raise SchemaError("File holds no data rows")
    columns = list(df.columns)
    if columns[0] != "time":
        raise SchemaError(f"First column must be 'time', got '{columns[0]}'", row=0, column=columns[0])
    expected = [f"C{k}" for k in range(1, len(columns))]
    if len(columns) < 2 or columns[1:] != expected:
        raise SchemaError(f"Header must be time,{','.join(expected) or 'C1'}; got {','.join(columns)}", row=0)
    if df.shape[0] < 2:
        raise SchemaError("At least two rows (t_0 and t_1) are required")

    numeric = df.apply(pd.to_numeric, errors="coerce")
    bad = ~np.isfinite(numeric.to_numpy(dtype=float))
    if bad.any():
        r, c = np.argwhere(bad)[0]
        raise SchemaError(f"Cell value '{df.iat[r, c]}' is not a finite number", row=int(r) + 1, column=columns[c])

    times = numeric["time"].to_numpy(dtype=float)
    steps = np.diff(times)
    if np.any(steps <= 0.0):
        r = int(np.argmax(steps <= 0.0)) + 1
        raise NonUniformGrid(f"Times must be strictly increasing (row {r + 1})")
    if np.max(np.abs(steps - steps[0])) > SPACING_RTOL * steps[0]:
        r = int(np.argmax(np.abs(steps - steps[0]) > SPACING_RTOL * steps[0])) + 1
        raise NonUniformGrid(f"Spacing deviates from {steps[0]:.12g} beyond {SPACING_RTOL:g} relative (row {r + 1})")


def grid_from_times(times: np.ndarray) -> GridSpec:
    """Infer GridSpec(T, n) from a uniform time column starting at t_0"""
    step = float(times[1] - times[0])
    n = int(round(1.0 / step))
    if n < 1 or abs(n * step - 1.0) > 1e-6:
        raise NonUniformGrid(f"Spacing {step:.12g} is not 1/n for an integer n")
    steps = len(times) - 1
    return GridSpec(T=steps / n, n=n)


class PathDataLoader:
    """
    Loads and stores path bundles for the covariation statistics
    """

    def __init__(self, data_dir: str = DEFAULT_DATA_DIR):
        """
        Initialize the data loader

        Args:
            data_dir: Directory for exported paths
        """
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)

    def ingest_paths(self, file: Union[str, Path]) -> PathBundle:
        """
        Read and validate one path file

        Args:
            file: CSV file with header time,C1..Cp; a .meta.json sidecar is used when present

        Returns:
            PathBundle: Levels at t_1..t_N with the t_0 row as origin
        """
        path = Path(file)
        try:
            df = pd.read_csv(path, dtype=str, skipinitialspace=True)
        except pd.errors.EmptyDataError as e:
            raise SchemaError(f"{path} is empty") from e
        validate_frame(df)
        df = df.astype(float)
        grid = grid_from_times(df["time"].to_numpy())

        meta: Dict[str, Any] = {"variant": "ingested", "source": str(path)}
        labels: Optional[List[str]] = None
        side = _sidecar(path)
        if side.exists():
            with open(side) as f:
                stored = json.load(f)
            meta.update(stored.get("meta", {}))
            labels = stored.get("labels")
            if "grid" in stored and not math.isclose(stored["grid"]["T"], grid.T, rel_tol=1e-9):
                logger.warning("Sidecar horizon %s differs from file horizon %s", stored["grid"]["T"], grid.T)
        bundle = dataframe_to_bundle(df, grid, labels=labels, meta=meta)
        logger.info("Ingested %s: p=%d, N=%d, n=%d", path.name, bundle.p, grid.N, grid.n)
        return bundle

    def export_paths(self, bundle: PathBundle, name: str) -> Path:
        """
        Write a bundle as CSV plus metadata sidecar

        Args:
            bundle: Path to write
            name: File name (relative names land in data_dir)

        Returns:
            Path: CSV file written
        """
        path = Path(name)
        if not path.is_absolute() and path.parent == Path("."):
            path = self.data_dir / path
        path.parent.mkdir(parents=True, exist_ok=True)
        df = bundle_to_dataframe(bundle)
        sidecar = {"grid": bundle.grid.to_dict(), "labels": list(bundle.labels), "meta": bundle.meta}
        try:
            df.to_csv(path, index=False, float_format="%.17g")
            with open(_sidecar(path), "w") as f:
                json.dump(sidecar, f, indent=2, sort_keys=True, default=str)
        except Exception as e:
            print(f"Error saving paths: {e}")
            raise
        return path

    def export_parquet(self, bundles: List[PathBundle], name: str) -> Path:
        """Write many paths into one parquet file keyed by path index"""
        frames = []
        for i, bundle in enumerate(bundles):
            df = bundle_to_dataframe(bundle)
            df.insert(0, "path", bundle.meta.get("path", i))
            frames.append(df)
        path = self.data_dir / name
        try:
            pd.concat(frames, ignore_index=True).to_parquet(path, index=False)
        except Exception as e:
            print(f"Error saving parquet: {e}")
            raise
        return path


def main() -> None:
    """Example usage"""
    import sys

    loader = PathDataLoader()
    for file in sys.argv[1:]:
        bundle = loader.ingest_paths(file)
        print(f"\n{file}: p={bundle.p}, N={bundle.grid.N}, n={bundle.grid.n}, T={bundle.grid.T}")
        print(bundle_to_dataframe(bundle).head())


if __name__ == "__main__":
    main()
