"""Data conversion utilities between pandas frames and path bundles"""

from typing import Any, Dict, Optional

import numpy as np
import pandas as pd

from simulate import GridSpec, PathBundle


def bundle_to_dataframe(bundle: PathBundle) -> pd.DataFrame:
    """
    Convert a PathBundle to a frame with columns [time, C1, ..., Cp]

    The first row is the level at t_0, followed by one row per grid time.

    Args:
        bundle: Path to convert

    Returns:
        DataFrame: N + 1 rows of levels
    """
    levels = np.vstack([bundle.origin[None, :], bundle.levels])
    df = pd.DataFrame(levels, columns=[f"C{k + 1}" for k in range(bundle.p)])
    df.insert(0, "time", bundle.grid.all_times)
    return df


def dataframe_to_bundle(df: pd.DataFrame, grid: GridSpec, labels: Optional[list] = None,
                        meta: Optional[Dict[str, Any]] = None) -> PathBundle:
    """
    Convert a validated [time, C1..Cp] frame back to a PathBundle

    Args:
        df: Frame with N + 1 rows, the first at t_0
        grid: Grid matching the time column
        labels: Component names (defaults to the column names)
        meta: Metadata to attach

    Returns:
        PathBundle: Levels at t_1..t_N with the first row as origin
    """
    values = df.drop(columns=["time"]).to_numpy(dtype=float)
    names = list(df.columns[1:]) if labels is None else list(labels)
    return PathBundle(grid, values[1:], names, dict(meta or {}), origin=values[0])
