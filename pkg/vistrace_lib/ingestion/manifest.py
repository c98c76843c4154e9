"""
Reading and writing frame manifests.

Format (line oriented, ``#`` starts a comment)::

    fps=<real> duration=<real>
    <index> <timestamp> <width> <height> <uri> [embedding_row]
    ...
"""

from pathlib import Path
from typing import List, Optional, Union

from vistrace_lib.ingestion.components import FrameMeta, VideoManifest
from vistrace_lib.utils.errors import InputFormatError, IOFailure
from vistrace_lib.utils.logger import logger


def _parse_header(line: str, where: str):
    fields = {}
    for token in line.split():
        key, sep, value = token.partition("=")
        if not sep:
            raise InputFormatError(f"{where}: header token '{token}' is not key=value")
        fields[key] = value
    try:
        return float(fields["fps"]), float(fields["duration"])
    except (KeyError, ValueError) as exc:
        raise InputFormatError(f"{where}: header must be 'fps=<real> duration=<real>'") from exc


def parse_manifest(text: str, name: str = "<manifest>", source: Optional[str] = None) -> VideoManifest:
    lines = [(no, line.split("#", 1)[0].strip()) for no, line in enumerate(text.splitlines(), start=1)]
    lines = [(no, line) for no, line in lines if line]
    if not lines:
        raise InputFormatError(f"{name}: missing header line")
    header_no, header = lines[0]
    fps, duration = _parse_header(header, f"{name}:{header_no}")

    frames: List[FrameMeta] = []
    for line_no, line in lines[1:]:
        parts = line.split()
        if len(parts) not in (5, 6):
            raise InputFormatError(f"{name}:{line_no}: expected 'index timestamp width height uri [embedding_row]'")
        try:
            frames.append(FrameMeta(
                index=int(parts[0]),
                timestamp=float(parts[1]),
                width=int(parts[2]),
                height=int(parts[3]),
                uri=parts[4],
                embedding_row=int(parts[5]) if len(parts) == 6 else None,
            ))
        except ValueError as exc:
            raise InputFormatError(f"{name}:{line_no}: {exc}") from exc
    return VideoManifest(frames=tuple(frames), native_fps=fps, duration=duration, source=source)


def load_manifest(path: Union[str, Path]) -> VideoManifest:
    """
    Load a manifest file.
    Args:
        path (Union[str, Path]): Manifest location.
    Returns:
        VideoManifest: Parsed manifest (frame uris are kept verbatim).
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise IOFailure(f"cannot read manifest {path}: {exc}") from exc
    manifest = parse_manifest(text, name=str(path), source=str(path))
    logger.info("Loaded manifest %s with %d frames.", path, len(manifest))
    return manifest


def format_manifest(m: VideoManifest) -> str:
    lines = [f"fps={m.native_fps:g} duration={m.duration:g}"]
    for meta in m.frames:
        row = f" {meta.embedding_row}" if meta.embedding_row is not None else ""
        lines.append(f"{meta.index} {meta.timestamp:.6f} {meta.width} {meta.height} {meta.uri}{row}")
    return "\n".join(lines) + "\n"


def write_manifest(m: VideoManifest, path: Union[str, Path]):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(format_manifest(m), encoding="utf-8")
    except OSError as exc:
        raise IOFailure(f"cannot write manifest {path}: {exc}") from exc
