"""
Domain types of the embedding kernel: unit-norm embedding vectors and the dense DPP
similarity kernel built from them.
"""

from dataclasses import dataclass

import numpy as np

from vistrace_lib.utils.errors import InvalidKernel


@dataclass(frozen=True)
class EmbeddingVector:
    """
    An l2-normalized d-dimensional feature of a frame or of a text query.
    The underlying array is read-only; build instances with ``normalize``.
    """
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float).reshape(-1)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def d(self) -> int:
        return int(self.values.shape[0])

    def dot(self, other: "EmbeddingVector") -> float:
        return float(np.dot(self.values, other.values))

    def __eq__(self, other) -> bool:
        return isinstance(other, EmbeddingVector) and np.array_equal(self.values, other.values)

    def __hash__(self) -> int:
        return hash(self.values.tobytes())


@dataclass(frozen=True)
class SimilarityKernel:
    """
    Dense T x T kernel with entries L_pq = exp(i_p . i_q), stored row-major in double
    precision. Positive semidefiniteness is a property of the construction and is checked by
    ``min_eigenvalue`` in tests rather than enforced here.
    """
    entries: np.ndarray

    def __post_init__(self):
        entries = np.array(self.entries, dtype=float)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise InvalidKernel(f"kernel must be square, got shape {entries.shape}")
        if entries.shape[0] == 0:
            raise InvalidKernel("kernel must have at least one row")
        if not np.all(np.isfinite(entries)):
            raise InvalidKernel("kernel contains NaN or infinite entries")
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)

    @property
    def size(self) -> int:
        return int(self.entries.shape[0])

    def restrict(self, indices) -> "SimilarityKernel":
        """Principal submatrix on ``indices`` (rows and columns gathered, not recomputed)."""
        idx = np.asarray(indices, dtype=int)
        return SimilarityKernel(self.entries[np.ix_(idx, idx)])

    def is_symmetric(self, tol: float = 1e-12) -> bool:
        return bool(np.max(np.abs(self.entries - self.entries.T)) <= tol)

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.entries).min())
