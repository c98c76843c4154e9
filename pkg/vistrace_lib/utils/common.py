"""
General file and value helpers shared by the toolkit: directory creation, YAML and JSON
(lines) reading and writing, and the 6-significant-digit float formatting used by every
output file.
"""

import os
import json
from pathlib import Path
from typing import Any, Dict, Iterable, List, Union

import numpy as np
import yaml
from ensure import ensure_annotations

from vistrace_lib.utils.errors import IOFailure
from vistrace_lib.utils.logger import logger

PathLike = Union[str, Path]


@ensure_annotations
def create_directories(path_to_directories: list, verbose: bool = True):
    """
    Creates directories if they do not exist.

    Args:
        path_to_directories (list): List of directory paths to create.
        verbose (bool): If True, logs the status of directory creation.
    """
    for directory in path_to_directories:
        os.makedirs(directory, exist_ok=True)
        if verbose:
            logger.info("Directory %s created successfully.", directory)


def round_floats(value: Any, digits: int = 6) -> Any:
    """
    Recursively round every float in a JSON-like value to ``digits`` significant digits.
    Numpy scalars and arrays are converted to plain Python values on the way.

    Args:
        value (Any): Nested dicts / lists / tuples / scalars.
        digits (int): Number of significant digits to keep.
    Returns:
        Any: The same structure with rounded floats (tuples become lists).
    """
    if isinstance(value, dict):
        return {key: round_floats(item, digits) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [round_floats(item, digits) for item in value]
    if isinstance(value, np.ndarray):
        return round_floats(value.tolist(), digits)
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(f"{float(value):.{digits}g}")
    return value


def read_yaml(path: PathLike) -> Dict[str, Any]:
    """
    Read a YAML document into a dictionary. An empty file yields an empty dictionary.

    Args:
        path (PathLike): Path of the YAML file.
    Returns:
        Dict[str, Any]: Parsed content.
    """
    try:
        with open(path, "r", encoding="utf-8") as f:
            content = yaml.safe_load(f)
    except (OSError, yaml.YAMLError) as exc:
        raise IOFailure(f"cannot read YAML file {path}: {exc}") from exc
    return content or {}


def load_json(path: PathLike) -> Any:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        raise IOFailure(f"cannot read JSON file {path}: {exc}") from exc


def dumps_json(data: Any) -> str:
    """Deterministic JSON text: insertion key order, 2-space indent, rounded floats."""
    return json.dumps(round_floats(data), indent=2, ensure_ascii=False) + "\n"


def save_json(path: PathLike, data: Any):
    """
    Save data as a deterministic JSON document (key order preserved, floats at 6
    significant digits), creating the parent directory when needed.

    Args:
        path (PathLike): Destination file.
        data (Any): JSON-serialisable content.
    """
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(dumps_json(data), encoding="utf-8")
    except OSError as exc:
        raise IOFailure(f"cannot write {path}: {exc}") from exc
    logger.info("JSON file saved at: %s", path)


def read_jsonl(path: PathLike) -> List[Dict[str, Any]]:
    """
    Read newline-delimited JSON records, skipping blank lines.

    Args:
        path (PathLike): Path of the ``.jsonl`` file.
    Returns:
        List[Dict[str, Any]]: One dictionary per non-blank line.
    """
    records = []
    try:
        with open(path, "r", encoding="utf-8") as f:
            for line_no, line in enumerate(f, start=1):
                if not line.strip():
                    continue
                try:
                    records.append(json.loads(line))
                except json.JSONDecodeError as exc:
                    raise IOFailure(f"{path}:{line_no}: invalid JSON record: {exc}") from exc
    except OSError as exc:
        raise IOFailure(f"cannot read {path}: {exc}") from exc
    return records


def write_jsonl(path: PathLike, records: Iterable[Dict[str, Any]]):
    """Write one compact JSON document per line; values are written without rounding."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            for record in records:
                f.write(json.dumps(record, ensure_ascii=False) + "\n")
    except OSError as exc:
        raise IOFailure(f"cannot write {path}: {exc}") from exc
    logger.info("JSONL file saved at: %s", path)
