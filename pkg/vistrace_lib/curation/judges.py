"""Correctness judges: ``judge(answer, key) -> bool``."""

from typing import Callable, Optional

from vistrace_lib.metrics.scores import em1, extract_option_letter, mca_correct
from vistrace_lib.utils.errors import ConfigError

Judge = Callable[[Optional[str], str], bool]


def exact_judge(answer: Optional[str], key: str) -> bool:
    return answer is not None and bool(em1(answer, key))


def option_judge(answer: Optional[str], key: str) -> bool:
    return answer is not None and bool(mca_correct(answer, key))


def auto_judge(answer: Optional[str], key: str) -> bool:
    """Option-letter match when the key is a single letter A-E, exact match otherwise."""
    stripped = key.strip()
    if len(stripped) == 1 and extract_option_letter(stripped.upper()):
        return option_judge(answer, stripped)
    return exact_judge(answer, key)


JUDGES = {"exact": exact_judge, "option": option_judge, "auto": auto_judge}


def make_judge(name: str) -> Judge:
    if name not in JUDGES:
        raise ConfigError(f"unknown judge '{name}'; choose one of {list(JUDGES)}")
    return JUDGES[name]
