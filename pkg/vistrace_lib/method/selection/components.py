"""
Result and bookkeeping types of frame selection.
"""

import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np


@dataclass
class OpCounter:
    """
    Counts inner-loop multiply-accumulate operations of greedy MAP inference.
    One unit per term of the <c_j, c_i> inner product plus one for the e_i^2 update.
    """
    multiply_accumulates: int = 0
    rounds: int = 0

    def add(self, count: int):
        self.multiply_accumulates += int(count)


@dataclass
class SelectionResult:
    """
    Outcome of a frame selection.

    ``indices`` are in selection order and ``gains`` are the squared pivots d_j^2 at the
    time each index was chosen, so ``log_det`` equals the sum of their logarithms.
    ``presented_indices`` is the temporal (ascending) order handed to the model, including
    any frames added by uniform padding.
    """
    indices: List[int]
    gains: List[float]
    log_det: float
    presented_indices: List[int]
    stopped_early: bool = False
    method: str = "dpp"
    pool: Optional[List[int]] = None
    padded_indices: List[int] = field(default_factory=list)
    pivot_history: Optional[List[np.ndarray]] = None

    @classmethod
    def from_selection(cls, indices: List[int], gains: List[float], **kwargs) -> "SelectionResult":
        indices = [int(i) for i in indices]
        gains = [float(g) for g in gains]
        if gains and all(g > 0 for g in gains):
            log_det = float(sum(math.log(g) for g in gains))
        elif gains:
            log_det = float("-inf")
        else:
            log_det = 0.0
        return cls(indices=indices, gains=gains, log_det=log_det,
                   presented_indices=sorted(indices), **kwargs)

    def __len__(self) -> int:
        return len(self.presented_indices)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "method": self.method,
            "indices": list(self.indices),
            "presented_indices": list(self.presented_indices),
            "gains": list(self.gains),
            "log_det": self.log_det,
            "stopped_early": self.stopped_early,
            "padded_indices": list(self.padded_indices),
        }
