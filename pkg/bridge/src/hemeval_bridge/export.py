"""Export operations: captions, image embeddings, token embeddings.

Output formats are exactly what the evaluation toolkit ingests:

- captions:        {"image_id", "candidate"} per line (pairs-ready)
- embeddings:      {"meta": {...}} header with the dimension and pooling,
                   then {"id", "vector"} per line
- token vectors:   {"token", "vector"} per line, unit-norm, plus "<unk>"

Unreadable images are skipped with a logged warning and written to a
sidecar rejects file next to the output.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

from PIL import Image, UnidentifiedImageError

from . import __version__
from .backends import BridgeError, ImageStats, compute_stats, resolve_checkpoint

logger = logging.getLogger("hemeval_bridge")

IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff", ".webp", ".ppm"}


@dataclass(frozen=True)
class ExportSummary:
    written: int
    rejected: int
    out_path: Path
    rejects_path: Path | None


def _rejects_path(out_path: Path) -> Path:
    return out_path.with_name(out_path.name + ".rejects.jsonl")


def _scan_images(image_dir: str | Path) -> list[tuple[str, Path]]:
    root = Path(image_dir)
    if not root.is_dir():
        raise BridgeError(f"image directory not found: {root}")
    files = sorted(
        (p for p in root.iterdir() if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES),
        key=lambda p: p.name,
    )
    if not files:
        raise BridgeError(f"no image files in {root}")
    return [(p.stem, p) for p in files]


def _load_stats(path: Path) -> ImageStats:
    with Image.open(path) as image:
        return compute_stats(image)


def _write_rejects(out_path: Path, rejects: list[dict]) -> Path | None:
    if not rejects:
        return None
    path = _rejects_path(out_path)
    with open(path, "w", encoding="utf-8") as fh:
        for entry in rejects:
            fh.write(json.dumps(entry, sort_keys=True) + "\n")
    return path


def export_captions(
    image_dir: str | Path,
    checkpoint_id: str,
    out_path: str | Path,
    sample_seed: int | None = None,
) -> ExportSummary:
    """One caption line per readable image, in filename order."""
    backend = resolve_checkpoint(checkpoint_id)
    out_path = Path(out_path)
    rejects: list[dict] = []
    written = 0
    with open(out_path, "w", encoding="utf-8") as fh:
        for image_id, path in _scan_images(image_dir):
            try:
                stats = _load_stats(path)
            except (UnidentifiedImageError, OSError, BridgeError) as exc:
                logger.warning("skipping unreadable image %s: %s", path.name, exc)
                rejects.append({"file": path.name, "reason": str(exc)})
                continue
            caption = backend.describe(stats, image_id, sample_seed=sample_seed)
            fh.write(
                json.dumps({"image_id": image_id, "candidate": caption}, sort_keys=True) + "\n"
            )
            written += 1
    return ExportSummary(written, len(rejects), out_path, _write_rejects(out_path, rejects))


def export_embeddings(
    image_dir: str | Path, checkpoint_id: str, out_path: str | Path
) -> ExportSummary:
    """One embedding line per readable image; header records the dimension."""
    backend = resolve_checkpoint(checkpoint_id)
    out_path = Path(out_path)
    rejects: list[dict] = []
    written = 0
    meta = {
        "tool": "hemeval-bridge",
        "version": __version__,
        "checkpoint": checkpoint_id,
        "dimension": backend.dimension,
        "pooling": backend.pooling,
    }
    with open(out_path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"meta": meta}, sort_keys=True) + "\n")
        for image_id, path in _scan_images(image_dir):
            try:
                stats = _load_stats(path)
            except (UnidentifiedImageError, OSError, BridgeError) as exc:
                logger.warning("skipping unreadable image %s: %s", path.name, exc)
                rejects.append({"file": path.name, "reason": str(exc)})
                continue
            vector = [float(x) for x in backend.embed(stats)]
            fh.write(json.dumps({"id": image_id, "vector": vector}, sort_keys=True) + "\n")
            written += 1
    return ExportSummary(written, len(rejects), out_path, _write_rejects(out_path, rejects))


def export_token_embeddings(
    vocabulary_file: str | Path, checkpoint_id: str, out_path: str | Path
) -> ExportSummary:
    """Unit-norm vector per vocabulary token plus an `<unk>` fallback."""
    backend = resolve_checkpoint(checkpoint_id)
    out_path = Path(out_path)
    tokens: list[str] = []
    with open(vocabulary_file, "r", encoding="utf-8") as fh:
        for line in fh:
            token = line.strip()
            if token and token not in tokens:
                tokens.append(token)
    if not tokens:
        raise BridgeError(f"vocabulary file {vocabulary_file} has no tokens")
    if "<unk>" not in tokens:
        tokens.append("<unk>")
    with open(out_path, "w", encoding="utf-8") as fh:
        for token in tokens:
            vector = [float(x) for x in backend.token_vector(token)]
            fh.write(json.dumps({"token": token, "vector": vector}, sort_keys=True) + "\n")
    return ExportSummary(len(tokens), 0, out_path, None)
