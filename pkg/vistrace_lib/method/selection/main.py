from typing import Any, Dict, Optional

import numpy as np

from vistrace_lib.method.config.configuration import SelectionConfig
from vistrace_lib.method.kernel.components import EmbeddingVector
from vistrace_lib.method.kernel.solver import normalize
from vistrace_lib.method.selection.components import SelectionResult
from vistrace_lib.method.selection.solver import FrameSelector


def run_selection(frames: np.ndarray,
                  query: Optional[np.ndarray],
                  config: SelectionConfig) -> SelectionResult:
    """
    Normalize raw embeddings and run the configured selection strategy.
    Args:
        frames (np.ndarray): T x d raw frame embeddings (rows are normalized here).
        query (Optional[np.ndarray]): Raw query embedding; required except for 'uniform' and 'dpp'.
        config (SelectionConfig): Selection settings.
    Returns:
        SelectionResult: The selection.
    """
    matrix = np.vstack([normalize(row).values for row in np.atleast_2d(frames)])
    q: Optional[EmbeddingVector] = normalize(query) if query is not None else None
    if q is None and config.method in ("relevance", "combined"):
        raise ValueError(f"method '{config.method}' needs a query embedding")
    return FrameSelector(config).select(q, matrix)


def selection_report(result: SelectionResult, T: int, config: SelectionConfig) -> Dict[str, Any]:
    """Report dictionary written by the command line for one selection."""
    return {
        "T": T,
        "K": config.k,
        "pool_multiplier": config.pool_multiplier,
        "epsilon": config.epsilon,
        **result.to_dict(),
    }
