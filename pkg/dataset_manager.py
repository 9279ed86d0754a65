# v1.0.0 - Work Package 5: Dataset & Document Manager
import os
from typing import Type

import numpy as np
import pandas as pd

from console import log
from errors import InputFileError, InvalidValueError, OutputPathError
from grid import Dataset
from models import JsonDocument

LABEL_COLUMN = "label"


class DatasetManager:
    """
    Reads and writes the on-disk formats: CSV datasets (header row, empty cell =
    missing, optional 1-based "label" column), label files and JSON documents.
    """
    def __init__(self, base_dir: str = "."):
        self.base_dir = base_dir

    def _path(self, path: str) -> str:
        return path if os.path.isabs(path) else os.path.join(self.base_dir, path)

    def _ensure_parent(self, path: str):
        parent = os.path.dirname(path)
        if parent and not os.path.exists(parent):
            try:
                os.makedirs(parent)
            except OSError as e:
                raise OutputPathError(f"Cannot create directory {parent}: {e}") from e

    def _read_csv(self, path: str) -> pd.DataFrame:
        path = self._path(path)
        if not os.path.exists(path):
            raise InputFileError(f"File not found: {path}")
        try:
            return pd.read_csv(path, skipinitialspace=True)
        except Exception as e:
            raise InputFileError(f"Cannot read CSV {path}: {e}") from e

    def load_dataset(self, path: str) -> Dataset:
        frame = self._read_csv(path)
        labels = None
        if LABEL_COLUMN in frame.columns:
            raw = frame.pop(LABEL_COLUMN)
            if raw.isna().any():
                raise InvalidValueError(f"Column '{LABEL_COLUMN}' has missing entries in {path}")
            labels = raw.to_numpy(dtype=int) - 1
        try:
            values = frame.apply(pd.to_numeric, errors="raise").to_numpy(dtype=float)
        except (ValueError, TypeError) as e:
            raise InvalidValueError(f"Non-numeric cell in {path}: {e}") from e
        data = Dataset(values, tuple(str(c) for c in frame.columns), labels)
        log("DatasetManager", f"Loaded {data.M} records x {data.N} variables from {path}.")
        return data

    def save_dataset(self, data: Dataset, path: str):
        path = self._path(path)
        self._ensure_parent(path)
        frame = pd.DataFrame(data.values, columns=list(data.names))
        if data.labels is not None:
            frame[LABEL_COLUMN] = data.labels + 1
        try:
            frame.to_csv(path, index=False, na_rep="")
        except OSError as e:
            raise OutputPathError(f"Cannot write {path}: {e}") from e
        log("DatasetManager", f"Saved {data.M} records to {path}.")

    def load_labels(self, path: str) -> np.ndarray:
        """0-based labels from a CSV whose first (or "label") column is 1-based."""
        frame = self._read_csv(path)
        column = frame[LABEL_COLUMN] if LABEL_COLUMN in frame.columns else frame.iloc[:, 0]
        if column.isna().any():
            raise InvalidValueError(f"Missing labels in {path}")
        return column.to_numpy(dtype=int) - 1

    def save_labels(self, labels: np.ndarray, path: str):
        path = self._path(path)
        self._ensure_parent(path)
        try:
            pd.DataFrame({LABEL_COLUMN: np.asarray(labels, dtype=int) + 1}).to_csv(path, index=False)
        except OSError as e:
            raise OutputPathError(f"Cannot write {path}: {e}") from e

    def save_table(self, frame: pd.DataFrame, path: str):
        path = self._path(path)
        self._ensure_parent(path)
        try:
            frame.to_csv(path, index=False)
        except OSError as e:
            raise OutputPathError(f"Cannot write {path}: {e}") from e
        log("DatasetManager", f"Saved {len(frame)} rows to {path}.")

    def save_document(self, doc: JsonDocument, path: str):
        path = self._path(path)
        self._ensure_parent(path)
        try:
            with open(path, "w", encoding="utf-8") as f:
                f.write(doc.to_json())
        except OSError as e:
            raise OutputPathError(f"Cannot write {path}: {e}") from e
        log("DatasetManager", f"Saved {type(doc).__name__} to {path}.")

    def load_document(self, path: str, cls: Type[JsonDocument]):
        path = self._path(path)
        if not os.path.exists(path):
            raise InputFileError(f"File not found: {path}")
        try:
            with open(path, "r", encoding="utf-8") as f:
                return cls.from_json(f.read())
        except OSError as e:
            raise InputFileError(f"Cannot read {path}: {e}") from e


def sidecar_path(csv_path: str, suffix: str = "truth") -> str:
    """data/run.csv -> data/run.truth.json"""
    root, _ = os.path.splitext(csv_path)
    return f"{root}.{suffix}.json"
