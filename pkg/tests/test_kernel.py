import math

import numpy as np
import pytest

from conftest import unit_rows
from vistrace_lib.method.kernel.components import EmbeddingVector, SimilarityKernel
from vistrace_lib.method.kernel.solver import as_matrix, build_kernel, normalize, relevance_scores
from vistrace_lib.utils.errors import DimensionMismatch, EmptyInput, InvalidKernel, ZeroVector


class TestNormalize:
    def test_unit_norm(self):
        v = normalize([3.0, 4.0])
        assert v.d == 2
        assert v.values.tolist() == pytest.approx([0.6, 0.8])

    def test_zero_vector(self):
        with pytest.raises(ZeroVector):
            normalize([0.0, 0.0, 0.0])

    def test_values_read_only(self):
        v = normalize([1.0, 1.0])
        with pytest.raises(ValueError):
            v.values[0] = 2.0

    def test_equality_and_hash(self):
        assert normalize([2.0, 0.0]) == EmbeddingVector(np.array([1.0, 0.0]))
        assert len({normalize([2.0, 0.0]), normalize([5.0, 0.0])}) == 1


class TestKernel:
    def test_diagonal_is_e(self, rng):
        L = build_kernel(unit_rows(rng, 6, 4))
        assert np.diag(L.entries) == pytest.approx([math.e] * 6)

    def test_symmetric_psd(self, rng):
        L = build_kernel(unit_rows(rng, 20, 5))
        assert L.is_symmetric(0.0)
        assert L.min_eigenvalue() > -1e-9

    def test_identical_embeddings_give_constant_kernel(self):
        v = normalize([1.0, 2.0, 3.0])
        L = build_kernel([v, v, v])
        assert np.allclose(L.entries, math.e)

    def test_orthogonal_embeddings(self):
        L = build_kernel(np.eye(3))
        assert L.entries[0, 1] == pytest.approx(1.0)

    def test_restrict(self, rng):
        L = build_kernel(unit_rows(rng, 5, 3))
        sub = L.restrict([1, 3])
        assert sub.size == 2
        assert sub.entries[0, 1] == L.entries[1, 3]

    def test_invalid_kernels(self):
        with pytest.raises(InvalidKernel):
            SimilarityKernel(np.ones((2, 3)))
        with pytest.raises(InvalidKernel):
            SimilarityKernel(np.array([[1.0, np.nan], [np.nan, 1.0]]))
        with pytest.raises(InvalidKernel):
            SimilarityKernel(np.zeros((0, 0)))


class TestRelevance:
    def test_scores(self):
        frames = np.array([[1.0, 0.0], [0.0, 1.0]])
        q = normalize([1.0, 1.0])
        assert relevance_scores(q, frames).tolist() == pytest.approx([math.sqrt(0.5)] * 2)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            relevance_scores(normalize([1.0, 0.0, 0.0]), np.eye(2))

    def test_mixed_dimensions(self):
        with pytest.raises(DimensionMismatch):
            as_matrix([normalize([1.0, 0.0]), normalize([1.0, 0.0, 0.0])])

    def test_empty(self):
        with pytest.raises(EmptyInput):
            as_matrix([])
