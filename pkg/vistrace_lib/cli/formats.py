"""
Embedding files.

First line ``d T``, then T lines of d decimals each (blank lines and ``#`` comments are
ignored). A query embedding file is the same format with T = 1.
"""

from pathlib import Path
from typing import Union

import numpy as np

from vistrace_lib.utils.errors import InputFormatError, IOFailure
from vistrace_lib.utils.logger import logger


def parse_embeddings(text: str, name: str = "<embeddings>") -> np.ndarray:
    rows = [line.split("#", 1)[0].split() for line in text.splitlines()]
    rows = [row for row in rows if row]
    if not rows:
        raise InputFormatError(f"{name}: missing 'd T' header")
    try:
        d, T = (int(value) for value in rows[0])
    except ValueError as exc:
        raise InputFormatError(f"{name}: header must be two integers 'd T', got {' '.join(rows[0])!r}") from exc
    if d < 1 or T < 1:
        raise InputFormatError(f"{name}: header needs d >= 1 and T >= 1, got d={d} T={T}")
    body = rows[1:]
    if len(body) != T:
        raise InputFormatError(f"{name}: header announces {T} rows, found {len(body)}")
    try:
        matrix = np.array([[float(value) for value in row] for row in body if len(row) == d], dtype=float)
    except ValueError as exc:
        raise InputFormatError(f"{name}: {exc}") from exc
    if matrix.shape != (T, d):
        raise InputFormatError(f"{name}: every row must have {d} values")
    if not np.all(np.isfinite(matrix)):
        raise InputFormatError(f"{name}: embeddings contain non-finite values")
    return matrix


def read_embeddings(path: Union[str, Path]) -> np.ndarray:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IOFailure(f"cannot read {path}: {exc}") from exc
    return parse_embeddings(text, str(path))


def read_query_embedding(path: Union[str, Path]) -> np.ndarray:
    matrix = read_embeddings(path)
    if matrix.shape[0] != 1:
        raise InputFormatError(f"{path}: a query embedding file holds exactly one row, found {matrix.shape[0]}")
    return matrix[0]


def format_embeddings(matrix: np.ndarray) -> str:
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    lines = [f"{matrix.shape[1]} {matrix.shape[0]}"]
    lines += [" ".join(f"{value:.6g}" for value in row) for row in matrix]
    return "\n".join(lines) + "\n"


def write_embeddings(matrix: np.ndarray, path: Union[str, Path]):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(format_embeddings(matrix), encoding="utf-8")
    except OSError as exc:
        raise IOFailure(f"cannot write {path}: {exc}") from exc
    logger.info("Embedding file saved at: %s", path)
