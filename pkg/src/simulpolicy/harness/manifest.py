"""JSON-lines corpus manifests.

One object per line::

    {"id": "utt1", "audio": "wav/utt1.wav", "reference": "ein satz"}
    {"id": "utt2", "logits": "ctc/utt2.logits", "frame_ms": 40, "reference": "...", "transcript": "..."}

Relative paths are resolved against the manifest's directory.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from ..errors import ManifestError
from ..metrics import tokenize_for_bleu


@dataclass(frozen=True)
class Utterance:
    id: str
    reference: tuple[str, ...]
    audio_path: Path | None = None
    logits_path: Path | None = None
    source_transcript: tuple[str, ...] | None = None
    frame_ms: float = 40.0


def _words(value, what, lineno):
    if isinstance(value, str):
        return tuple(tokenize_for_bleu(value))
    if isinstance(value, list) and all(isinstance(w, str) for w in value):
        return tuple(value)
    raise ManifestError(f"line {lineno}: {what} must be a string or a list of strings")


def load_manifest(path) -> list[Utterance]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}") from exc
    base = path.parent
    utts: list[Utterance] = []
    seen: set[str] = set()
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ManifestError(f"line {lineno}: invalid JSON ({exc.msg})") from exc
        if not isinstance(obj, dict):
            raise ManifestError(f"line {lineno}: expected a JSON object")
        for key in ("id", "reference"):
            if key not in obj:
                raise ManifestError(f"line {lineno}: missing key {key!r}")
        uid = str(obj["id"])
        if uid in seen:
            raise ManifestError(f"line {lineno}: duplicate id {uid!r}")
        seen.add(uid)
        if ("audio" in obj) == ("logits" in obj):
            raise ManifestError(f"line {lineno}: exactly one of 'audio' or 'logits' is required")
        key = "audio" if "audio" in obj else "logits"
        file = base / obj[key]
        if not file.is_file():
            raise ManifestError(f"line {lineno}: referenced file {file} does not exist")
        transcript = obj.get("transcript")
        try:
            frame_ms = float(obj.get("frame_ms", 40.0))
        except (TypeError, ValueError):
            raise ManifestError(f"line {lineno}: frame_ms must be a number") from None
        utts.append(
            Utterance(
                id=uid,
                reference=_words(obj["reference"], "reference", lineno),
                audio_path=file if key == "audio" else None,
                logits_path=file if key == "logits" else None,
                source_transcript=None if transcript is None else _words(transcript, "transcript", lineno),
                frame_ms=frame_ms,
            )
        )
    if not utts:
        raise ManifestError(f"manifest {path} is empty")
    return utts


def write_manifest(path, entries) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for e in entries:
            fh.write(json.dumps(e, ensure_ascii=False) + "\n")
