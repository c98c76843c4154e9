"""
Training-record files: a header line followed by one record per retained sample.

The header carries the discards so that corpus statistics can be recomputed from the file.
"""

from pathlib import Path
from typing import Any, Dict, List, Sequence, Tuple, Union

from vistrace_lib.curation.components import DISCARD, CorpusStats, Outcome, TrainingSample
from vistrace_lib.utils.common import read_jsonl, write_jsonl
from vistrace_lib.utils.errors import InputFormatError

RECORD_FORMAT = "vistrace-training"
RECORD_VERSION = 1


def export_training_records(dataset: Sequence[TrainingSample],
                            path: Union[str, Path],
                            discards: Sequence[Dict[str, Any]] = ()):
    header = {"format": RECORD_FORMAT, "version": RECORD_VERSION, "count": len(dataset),
              "discards": [dict(d) for d in discards]}
    write_jsonl(path, [header] + [sample.to_dict() for sample in dataset])


def load_training_records(path: Union[str, Path]) -> Tuple[List[TrainingSample], List[Dict[str, Any]]]:
    """
    Read a training-record file.
    Returns:
        Tuple[List[TrainingSample], List[Dict[str, Any]]]: Samples and discard entries.
    """
    records = read_jsonl(path)
    if not records or records[0].get("format") != RECORD_FORMAT:
        raise InputFormatError(f"{path}: missing '{RECORD_FORMAT}' header record")
    header, body = records[0], records[1:]
    if header.get("version") != RECORD_VERSION:
        raise InputFormatError(f"{path}: unsupported version {header.get('version')}")
    if header.get("count") != len(body):
        raise InputFormatError(f"{path}: header announces {header.get('count')} records, found {len(body)}")
    try:
        dataset = [TrainingSample.from_dict(record) for record in body]
    except (KeyError, ValueError) as exc:
        raise InputFormatError(f"{path}: invalid training record: {exc}") from exc
    return dataset, list(header.get("discards", []))


def outcomes_from_records(dataset: Sequence[TrainingSample], discards: Sequence[Dict[str, Any]]) -> List[Outcome]:
    outcomes = [Outcome(sample.id, sample.kind, sample.source, sample) for sample in dataset]
    outcomes += [Outcome(str(d["id"]), DISCARD, d.get("source", "llava_video"), reason=d.get("reason"))
                 for d in discards]
    return outcomes


def stats_from_file(path: Union[str, Path]) -> CorpusStats:
    dataset, discards = load_training_records(path)
    return CorpusStats.from_outcomes(outcomes_from_records(dataset, discards))
