import json
import math
import os

import pandas as pd

from config.log_config import app_logger

FLOAT_FORMAT = "%.12g"


def _clean(value):
    # JSON has no NaN; empty cells become null
    if isinstance(value, float) and math.isnan(value):
        return None
    if isinstance(value, dict):
        return {k: _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    return value


def _prepare_folder(path):
    folder = os.path.dirname(os.path.abspath(path))
    os.makedirs(folder, exist_ok=True)


def write_table(frame: pd.DataFrame, path: str, fmt: str = "csv") -> str:
    """Write a table as CSV (header row, "." decimals) or as a JSON list of records."""
    _prepare_folder(path)
    if fmt == "csv":
        frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    elif fmt == "json":
        records = [_clean(record) for record in frame.to_dict(orient="records")]
        with open(path, "w", encoding="utf-8", newline="\n") as json_file:
            json.dump(records, json_file, ensure_ascii=False, indent=4)
    else:
        raise ValueError(f"Unsupported output format: {fmt}")
    app_logger.info(f"{len(frame)} row(s) saved to: {path}")
    return path


def write_document(document: dict, path: str, fmt: str = "json") -> str:
    """Write a nested result; CSV flattens it to (key, value) rows."""
    if fmt == "csv":
        rows = [{"key": key, "value": value} for key, value in _flatten(document)]
        return write_table(pd.DataFrame(rows, columns=["key", "value"]), path, "csv")
    if fmt != "json":
        raise ValueError(f"Unsupported output format: {fmt}")
    _prepare_folder(path)
    with open(path, "w", encoding="utf-8", newline="\n") as json_file:
        json.dump(_clean(document), json_file, ensure_ascii=False, indent=4)
    app_logger.info(f"Result saved to: {path}")
    return path


def _flatten(document, prefix=""):
    for key, value in document.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            yield from _flatten(value, f"{name}.")
        elif isinstance(value, (list, tuple)):
            yield name, ";".join(str(v) for v in value)
        elif isinstance(value, float):
            yield name, FLOAT_FORMAT % value
        else:
            yield name, value


def read_table(path: str) -> pd.DataFrame:
    """Read a CSV table or a JSON list of records written by write_table."""
    if not os.path.isfile(path):
        raise ValueError(f"Data file not found: {path}")
    extension = os.path.splitext(path)[1].lower()
    if extension == ".json":
        with open(path, "r", encoding="utf-8") as json_file:
            data = json.load(json_file)
        if not isinstance(data, list):
            raise ValueError(f"{path} must hold a JSON list of records")
        return pd.DataFrame(data)
    return pd.read_csv(path)
