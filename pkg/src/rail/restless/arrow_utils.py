from __future__ import annotations

import os
from typing import Any, Sequence

import numpy as np
import pyarrow as pa
import pyarrow.csv as pa_csv
from numpy.typing import NDArray

SIGNIFICANT_DIGITS = 10


def round_significant(
    values: Sequence[float] | NDArray[np.float64], digits: int = SIGNIFICANT_DIGITS
) -> NDArray[np.float64]:
    """Round values to a number of significant digits

    Parameters
    ----------
    values:
        Values to round

    digits:
        Number of significant digits to keep

    Returns
    -------
        Rounded values, such that their shortest decimal representation has
        at most ``digits`` significant digits
    """
    return np.array([float(f"{value_:.{digits}g}") for value_ in values], dtype=np.float64)


def make_table(columns: dict[str, Any]) -> pa.Table:
    """Build an arrow table from a dict of columns

    Floating point columns are rounded to SIGNIFICANT_DIGITS
    """
    arrays: dict[str, pa.Array] = {}
    for key, val in columns.items():
        the_array = np.asarray(val)
        if the_array.dtype.kind == "f":
            arrays[key] = pa.array(round_significant(the_array), type=pa.float64())
        else:
            arrays[key] = pa.array(the_array.astype(np.int64), type=pa.int64())
    return pa.table(arrays)


def write_csv_table(columns: dict[str, Any], path: str) -> None:
    """Write a dict of columns to a csv file

    The header is written as a bare comma separated list of names, numbers
    are never quoted.
    """
    table = make_table(columns)
    output_dir = os.path.dirname(path)
    if output_dir:
        os.makedirs(output_dir, exist_ok=True)
    with open(path, "wb") as fout:
        fout.write((",".join(table.column_names) + "\n").encode("utf-8"))
        pa_csv.write_csv(table, fout, write_options=pa_csv.WriteOptions(include_header=False))


def read_csv_table(path: str) -> dict[str, NDArray]:
    """Read a csv file written by :py:func:`write_csv_table`

    Returns
    -------
        Dict mapping column name to numpy array
    """
    table = pa_csv.read_csv(path)
    return {name_: table.column(name_).to_numpy() for name_ in table.column_names}
