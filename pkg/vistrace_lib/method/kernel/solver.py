from typing import Sequence, Union

import numpy as np

from vistrace_lib.method.kernel.components import EmbeddingVector, SimilarityKernel
from vistrace_lib.utils.errors import DimensionMismatch, EmptyInput, ZeroVector

ZERO_NORM = 1e-12

FrameEmbeddings = Union[Sequence[EmbeddingVector], np.ndarray]


def normalize(v) -> EmbeddingVector:
    """
    l2-normalize a vector, preserving its direction.
    Args:
        v: Real vector (sequence or array), at least one nonzero entry.
    Returns:
        EmbeddingVector: Unit-norm vector.
    """
    values = np.asarray(v, dtype=float).reshape(-1)
    norm = float(np.linalg.norm(values))
    if values.size == 0 or norm < ZERO_NORM:
        raise ZeroVector(f"cannot normalize a vector of norm {norm:g}")
    return EmbeddingVector(values / norm)


def as_matrix(frames: FrameEmbeddings) -> np.ndarray:
    """
    Stack frame embeddings into a T x d matrix, checking that every row has the same d.
    A 2-D array is accepted as-is (rows assumed unit norm).
    """
    if isinstance(frames, np.ndarray):
        matrix = np.asarray(frames, dtype=float)
        if matrix.ndim != 2:
            raise DimensionMismatch(f"frame matrix must be 2-D, got shape {matrix.shape}")
        if matrix.shape[0] == 0:
            raise EmptyInput("no frames given")
        return matrix
    if len(frames) == 0:
        raise EmptyInput("no frames given")
    dims = {frame.d for frame in frames}
    if len(dims) != 1:
        raise DimensionMismatch(f"frames have mixed dimensions {sorted(dims)}")
    return np.vstack([frame.values for frame in frames])


def relevance_scores(q: EmbeddingVector, frames: FrameEmbeddings) -> np.ndarray:
    """
    Query-frame relevance score_k = q . i_k for every frame.
    Args:
        q (EmbeddingVector): Unit query embedding.
        frames (FrameEmbeddings): T unit frame embeddings.
    Returns:
        np.ndarray: Scores of length T, each in [-1, 1].
    """
    matrix = as_matrix(frames)
    if matrix.shape[1] != q.d:
        raise DimensionMismatch(f"query has d={q.d} but frames have d={matrix.shape[1]}")
    return matrix @ q.values


def build_kernel(frames: FrameEmbeddings) -> SimilarityKernel:
    """
    Build the DPP similarity kernel L_pq = exp(i_p . i_q).
    Args:
        frames (FrameEmbeddings): Nonempty list of unit frame embeddings.
    Returns:
        SimilarityKernel: Dense symmetric kernel; diagonal equals e for unit vectors.
    """
    matrix = as_matrix(frames)
    gram = matrix @ matrix.T
    # exact symmetry regardless of BLAS accumulation order
    gram = 0.5 * (gram + gram.T)
    return SimilarityKernel(np.exp(gram))
