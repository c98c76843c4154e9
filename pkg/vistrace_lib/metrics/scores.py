"""
Answer scoring: exact and relaxed match for open answers, option-letter accuracy for
multiple choice and mean relative accuracy for numerical answers.
"""

import math
import re
import string
from typing import Iterable, Optional, Sequence

import numpy as np
from ensure import ensure_annotations

from vistrace_lib.utils.errors import EmptyInput, ZeroGroundTruth

# Bump OPTION_LETTER_VERSION whenever OPTION_LETTER changes; reports carry it.
OPTION_LETTER = re.compile(r"\b([A-E])\b")
OPTION_LETTER_VERSION = "v1"
NUMBER = re.compile(r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?")
MRA_THRESHOLDS = tuple(round(0.50 + 0.05 * i, 2) for i in range(10))
ARTICLES = ("a", "an", "the")


def normalize_answer(text: str) -> str:
    """Lowercase, trim, collapse whitespace, strip terminal punctuation and a leading article."""
    text = " ".join(text.lower().split())
    text = text.rstrip(string.punctuation + " ").strip()
    words = text.split(" ")
    if len(words) > 1 and words[0] in ARTICLES:
        words = words[1:]
    return " ".join(words)


@ensure_annotations
def em1(pred: str, gt: str) -> int:
    return int(normalize_answer(pred) == normalize_answer(gt))


def _contains_on_boundary(haystack: str, needle: str) -> bool:
    if not needle:
        return False
    return f" {needle} " in f" {haystack} "


@ensure_annotations
def em_r1(pred: str, gt: str) -> int:
    """Exact match, or one normalized answer appears in the other as whole words."""
    if em1(pred, gt):
        return 1
    p, g = normalize_answer(pred), normalize_answer(gt)
    return int(_contains_on_boundary(p, g) or _contains_on_boundary(g, p))


def extract_option_letter(text: str) -> Optional[str]:
    match = OPTION_LETTER.search(text)
    return match.group(1) if match else None


def mca_correct(pred: str, gt: str) -> int:
    letter = extract_option_letter(pred)
    key = gt.strip().upper() if len(gt.strip()) == 1 else extract_option_letter(gt)
    return int(letter is not None and letter == key)


def mca_accuracy(records: Iterable) -> float:
    """
    Multiple-choice accuracy.
    Args:
        records (Iterable): Evaluation records, or (prediction, ground-truth letter) pairs.
    Returns:
        float: Fraction of predictions whose first standalone A-E letter equals the key.
    """
    pairs = [(r.prediction, str(r.ground_truth)) if hasattr(r, "prediction") else r for r in records]
    scores = [mca_correct(pred, gt) for pred, gt in pairs]
    if not scores:
        raise EmptyInput("mca_accuracy needs at least one record")
    return float(np.mean(scores))


def parse_number(text) -> Optional[float]:
    """First finite real number in ``text`` (numbers pass through), or None."""
    if isinstance(text, (int, float)) and not isinstance(text, bool):
        return float(text) if math.isfinite(text) else None
    match = NUMBER.search(str(text))
    if match is None:
        return None
    value = float(match.group(0))
    return value if math.isfinite(value) else None


def mra(pred: float, gt: float, thresholds: Sequence[float] = MRA_THRESHOLDS) -> float:
    """
    Mean relative accuracy: share of thresholds t with |pred - gt| / |gt| < 1 - t.
    Args:
        pred (float): Predicted value.
        gt (float): Ground truth, nonzero.
        thresholds (Sequence[float]): Confidence thresholds.
    Returns:
        float: Value in [0, 1].
    """
    if gt == 0:
        raise ZeroGroundTruth("relative accuracy is undefined for a zero ground truth")
    if not thresholds:
        raise EmptyInput("mra needs at least one threshold")
    relative_error = abs(pred - gt) / abs(gt)
    return float(np.mean([relative_error < 1.0 - t for t in thresholds]))
