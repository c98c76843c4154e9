import math
from itertools import combinations
from typing import List, Optional, Tuple

import numpy as np

from vistrace_lib.method.config.configuration import SelectionConfig
from vistrace_lib.method.kernel.components import EmbeddingVector, SimilarityKernel
from vistrace_lib.method.kernel.solver import FrameEmbeddings, as_matrix, build_kernel, relevance_scores
from vistrace_lib.method.selection.components import OpCounter, SelectionResult
from vistrace_lib.utils.errors import TooLarge
from vistrace_lib.utils.logger import logger

DEFAULT_EPSILON = 1e-5
BRUTE_FORCE_LIMIT = 10 ** 6


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def uniform_sample(T: int, K: int) -> List[int]:
    """
    Evenly spaced, endpoint-inclusive sample of K out of T frame indices.

    index_j = round(j * (T - 1) / (K - 1)) with half-up rounding; K is clamped to T and
    K = 1 picks the middle frame. Duplicates (not produced when T >= K, kept as a guard)
    are replaced by the nearest unused index.

    Args:
        T (int): Number of frames.
        K (int): Number of frames to keep.
    Returns:
        List[int]: Strictly ascending indices.
    """
    if T < 1 or K < 1:
        raise ValueError(f"T and K must be >= 1, got T={T}, K={K}")
    K = min(K, T)
    if K == T:
        return list(range(T))
    if K == 1:
        return [_round_half_up((T - 1) / 2)]

    raw = [_round_half_up(j * (T - 1) / (K - 1)) for j in range(K)]
    chosen = []
    for position in raw:
        if position not in chosen:
            chosen.append(position)
            continue
        taken = set(chosen)
        for offset in range(1, T):
            if position - offset >= 0 and position - offset not in taken:
                chosen.append(position - offset)
                break
            if position + offset < T and position + offset not in taken:
                chosen.append(position + offset)
                break
    return sorted(chosen)


def _rank_by_score(scores: np.ndarray) -> np.ndarray:
    return np.lexsort((np.arange(scores.shape[0]), -scores))


def top_k_relevance(q: EmbeddingVector, frames: FrameEmbeddings, k: int) -> List[int]:
    """
    The k frames most similar to the query.
    Args:
        q (EmbeddingVector): Unit query embedding.
        frames (FrameEmbeddings): T unit frame embeddings.
        k (int): Number of frames to keep; k >= T returns every index.
    Returns:
        List[int]: Indices by descending score, ties by ascending index.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    return [int(i) for i in _rank_by_score(relevance_scores(q, frames))[:k]]


def greedy_dpp_map(L: SimilarityKernel,
                   K: int,
                   epsilon: float = DEFAULT_EPSILON,
                   counter: Optional[OpCounter] = None,
                   record_pivots: bool = False) -> SelectionResult:
    """
    Fast greedy MAP inference for a DPP via incremental Cholesky pivots.

    Initialize d_i^2 = L_ii and empty c_i, pick j = argmax d_i^2; each round, for every
    unselected i compute e_i = (L_ji - <c_j, c_i>) / d_j, append e_i to c_i and set
    d_i^2 <- d_i^2 - e_i^2, then pick the next argmax. Stops once K items are selected or
    the best remaining d_j^2 drops below epsilon. Every argmax breaks ties by lowest index.
    Runs in O(K^2 T) time and O(K T) extra space.

    Args:
        L (SimilarityKernel): PSD kernel.
        K (int): Target number of items.
        epsilon (float): Stopping threshold on the squared pivot.
        counter (Optional[OpCounter]): Receives inner-loop operation counts.
        record_pivots (bool): Keep the d^2 vector after every round (selected items set to -inf).
    Returns:
        SelectionResult: Selection order, pivot gains and log-determinant.
    """
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    if not epsilon > 0:
        raise ValueError(f"epsilon must be > 0, got {epsilon}")

    entries = L.entries
    T = L.size
    K = min(K, T)
    cis = np.zeros((K, T))
    di2s = np.array(np.diag(entries), dtype=float)
    available = np.ones(T, dtype=bool)
    history = [di2s.copy()] if record_pivots else None

    # ===== 1) First pick =====
    j = int(np.argmax(di2s))
    if di2s[j] < epsilon:
        logger.warning("Largest diagonal entry %.3g is below epsilon; nothing selected.", di2s[j])
        return SelectionResult.from_selection([], [], stopped_early=True, pivot_history=history)
    selected = [j]
    gains = [float(di2s[j])]
    available[j] = False
    stopped_early = False

    # ===== 2) Incremental Cholesky rounds =====
    while len(selected) < K:
        k = len(selected) - 1
        rest = np.flatnonzero(available)
        d_j = math.sqrt(di2s[j])
        eis = (entries[j, rest] - cis[:k, j] @ cis[:k, rest]) / d_j
        cis[k, rest] = eis
        di2s[rest] -= np.square(eis)
        if counter is not None:
            counter.add(rest.size * (k + 1))
            counter.rounds += 1
        if history is not None:
            snapshot = di2s.copy()
            snapshot[~available] = -np.inf
            history.append(snapshot)

        j = int(rest[np.argmax(di2s[rest])])
        if di2s[j] < epsilon:
            stopped_early = True
            logger.debug("Greedy MAP stopped at %d/%d items: best pivot %.3g < %.3g",
                         len(selected), K, di2s[j], epsilon)
            break
        selected.append(j)
        gains.append(float(di2s[j]))
        available[j] = False

    return SelectionResult.from_selection(selected, gains, stopped_early=stopped_early,
                                          method="dpp", pivot_history=history)


def naive_greedy_reference(L: SimilarityKernel, K: int, epsilon: float = DEFAULT_EPSILON) -> List[int]:
    """
    Reference greedy MAP: at every step add the item that maximizes det(L_{S + i}),
    computed directly with dense determinants. Ties go to the lowest index; stops when the
    best determinant ratio det(L_{S + i}) / det(L_S) falls below epsilon.

    Args:
        L (SimilarityKernel): PSD kernel.
        K (int): Target number of items.
        epsilon (float): Stopping threshold on the determinant ratio.
    Returns:
        List[int]: Indices in selection order.
    """
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    entries = L.entries
    T = L.size
    selected: List[int] = []
    current_det = 1.0
    for _ in range(min(K, T)):
        best, best_det = -1, -np.inf
        for i in range(T):
            if i in selected:
                continue
            idx = selected + [i]
            det = float(np.linalg.det(entries[np.ix_(idx, idx)]))
            if det > best_det:
                best, best_det = i, det
        if best_det / current_det < epsilon:
            break
        selected.append(best)
        current_det = best_det
    return selected


def brute_force_map(L: SimilarityKernel, K: int) -> Tuple[List[int], float]:
    """
    Exact MAP by enumerating every size-K subset.
    Args:
        L (SimilarityKernel): PSD kernel.
        K (int): Subset size, K <= T.
    Returns:
        Tuple[List[int], float]: Best subset (lexicographically smallest on ties) and its determinant.
    """
    T = L.size
    if K < 1 or K > T:
        raise ValueError(f"K must be in [1, {T}], got {K}")
    n_subsets = math.comb(T, K)
    if n_subsets > BRUTE_FORCE_LIMIT:
        raise TooLarge(f"C({T}, {K}) = {n_subsets} subsets exceeds the limit {BRUTE_FORCE_LIMIT}")

    entries = L.entries
    best_subset, best_det = None, -np.inf
    for subset in combinations(range(T), K):
        det = float(np.linalg.det(entries[np.ix_(subset, subset)]))
        # relative tolerance keeps numerically equal determinants on the earliest subset
        if best_subset is None or det > best_det + 1e-12 * max(1.0, abs(best_det)):
            best_subset, best_det = list(subset), det
    return best_subset, best_det


def pivot_gains(L: SimilarityKernel, indices: List[int]) -> List[float]:
    """
    Squared Cholesky pivots of ``indices`` taken in the given order; their product is
    det(L_S). Used to score baseline selections on the same scale as greedy MAP.
    """
    if not indices:
        return []
    sub = L.entries[np.ix_(indices, indices)]
    n = len(indices)
    cis = np.zeros((n, n))
    di2s = np.array(np.diag(sub), dtype=float)
    gains = []
    for k in range(n):
        gains.append(float(di2s[k]))
        if di2s[k] <= 0 or k == n - 1:
            continue
        rest = np.arange(k + 1, n)
        eis = (sub[k, rest] - cis[:k, k] @ cis[:k, rest]) / math.sqrt(di2s[k])
        cis[k, rest] = eis
        di2s[rest] -= np.square(eis)
    return gains


def pad_with_uniform(result: SelectionResult, T: int, K: int) -> SelectionResult:
    """
    Top up an early-stopped selection to K frames with unused uniform-sample indices,
    falling back to the unused index nearest to a uniform position.
    """
    have = set(result.presented_indices)
    target = min(K, T)
    if len(have) >= target:
        return result
    padded = []
    for position in uniform_sample(T, target):
        if len(have) >= target:
            break
        if position in have:
            continue
        have.add(position)
        padded.append(position)
    for position in uniform_sample(T, target):
        for offset in range(T):
            if len(have) >= target:
                break
            for candidate in (position - offset, position + offset):
                if 0 <= candidate < T and candidate not in have and len(have) < target:
                    have.add(candidate)
                    padded.append(candidate)
    logger.info("Padded selection with %d uniform frames to reach %d.", len(padded), target)
    result.padded_indices = sorted(padded)
    result.presented_indices = sorted(have)
    return result


def select_frames(q: EmbeddingVector,
                  frames: FrameEmbeddings,
                  cfg: SelectionConfig,
                  kernel: Optional[SimilarityKernel] = None,
                  counter: Optional[OpCounter] = None) -> SelectionResult:
    """
    Combined relevance-then-diversity selection.

    Stage 1 keeps the pool_multiplier * K frames most relevant to the query (skipped when
    T is not larger than the pool). Stage 2 runs greedy MAP inference on the kernel rows and
    columns of the pool, taken in ascending frame order, and maps the picks back to the
    original frame numbering.

    Args:
        q (EmbeddingVector): Unit query embedding.
        frames (FrameEmbeddings): T unit frame embeddings.
        cfg (SelectionConfig): K, pool multiplier and epsilon.
        kernel (Optional[SimilarityKernel]): Precomputed kernel over all T frames.
        counter (Optional[OpCounter]): Receives inner-loop operation counts.
    Returns:
        SelectionResult: Picks in original indices; presented in temporal order.
    """
    matrix = as_matrix(frames)
    T = matrix.shape[0]
    scores = relevance_scores(q, matrix)

    if T <= cfg.pool_size:
        pool = np.arange(T)
    else:
        pool = np.sort(_rank_by_score(scores)[:cfg.pool_size])

    full_kernel = kernel if kernel is not None else build_kernel(matrix)
    if full_kernel.size != T:
        raise ValueError(f"kernel has size {full_kernel.size} but there are {T} frames")
    local = greedy_dpp_map(full_kernel.restrict(pool), cfg.k, cfg.epsilon, counter=counter)

    result = SelectionResult.from_selection(
        [int(pool[i]) for i in local.indices], local.gains,
        stopped_early=local.stopped_early, method="combined", pool=[int(p) for p in pool],
    )
    if cfg.pad == "uniform" and result.stopped_early:
        result = pad_with_uniform(result, T, cfg.k)
    logger.info("Selected %d/%d frames (pool %d, log_det %.4f).",
                len(result.indices), T, len(pool), result.log_det)
    return result


class FrameSelector:
    """
    FrameSelector dispatches a selection request to one of the strategies
    'uniform', 'relevance', 'dpp' or 'combined' according to its configuration.
    """

    def __init__(self, config: SelectionConfig):
        """
        Initialize the FrameSelector with the given configuration.
        Args:
            config (SelectionConfig): Selection settings, including the strategy name.
        """
        self.config = config

    def _score(self, kernel: SimilarityKernel, indices: List[int], method: str) -> SelectionResult:
        return SelectionResult.from_selection(indices, pivot_gains(kernel, indices), method=method)

    def select(self, q: Optional[EmbeddingVector], frames: FrameEmbeddings) -> SelectionResult:
        """
        Run the configured strategy.
        Args:
            q (Optional[EmbeddingVector]): Query embedding (unused by 'uniform' and 'dpp').
            frames (FrameEmbeddings): T unit frame embeddings.
        Returns:
            SelectionResult: Selected frames.
        """
        method = self.config.method
        if method == "combined":
            return select_frames(q, frames, self.config)

        matrix = as_matrix(frames)
        T = matrix.shape[0]
        kernel = build_kernel(matrix)
        if method == "uniform":
            result = self._score(kernel, uniform_sample(T, self.config.k), method)
        elif method == "relevance":
            result = self._score(kernel, top_k_relevance(q, matrix, self.config.k), method)
        else:
            result = greedy_dpp_map(kernel, self.config.k, self.config.epsilon)
            if self.config.pad == "uniform" and result.stopped_early:
                result = pad_with_uniform(result, T, self.config.k)
        logger.info("Selected %d/%d frames with method '%s'.", len(result), T, method)
        return result
