"""Checkpoint backends.

A backend turns a decoded image into a caption and a fixed-dimension
embedding. The built-in `statproj-<dim>` family is a deterministic,
dependency-light stand-in suitable for fixtures and offline tests: image
statistics are computed with integer arithmetic and pushed through a
checkpoint-seeded random projection. Real model checkpoints plug in by
registering another backend with the same interface.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .rng import SeedStream, fnv1a64


class BridgeError(Exception):
    pass


@dataclass(frozen=True)
class ImageStats:
    """Integer image statistics (exact, platform-independent)."""

    mean_r: int  # per-channel means scaled by 1000
    mean_g: int
    mean_b: int
    brightness: int  # scaled by 1000, 0..255000
    gradient: int  # mean |horizontal difference| of luma, scaled by 1000
    extent: int  # pixel count


def compute_stats(image: Image.Image) -> ImageStats:
    rgb = image.convert("RGB")
    width, height = rgb.size
    if width == 0 or height == 0:
        raise BridgeError("image has no pixels")
    raw = rgb.tobytes()  # packed RGB, 3 bytes per pixel
    count = width * height
    sum_r = sum(raw[0::3])
    sum_g = sum(raw[1::3])
    sum_b = sum(raw[2::3])
    luma = [
        (raw[i] * 299 + raw[i + 1] * 587 + raw[i + 2] * 114) // 1000
        for i in range(0, 3 * count, 3)
    ]
    grad_total = 0
    grad_count = 0
    for y in range(height):
        row = y * width
        for x in range(1, width):
            grad_total += abs(luma[row + x] - luma[row + x - 1])
            grad_count += 1
    brightness = (sum_r * 299 + sum_g * 587 + sum_b * 114) // 1000
    return ImageStats(
        mean_r=sum_r * 1000 // count,
        mean_g=sum_g * 1000 // count,
        mean_b=sum_b * 1000 // count,
        brightness=brightness * 1000 // count,
        gradient=(grad_total * 1000 // grad_count) if grad_count else 0,
        extent=count,
    )


def _bucket(value_x1000: int, ceiling: int, levels: int = 3) -> int:
    bucket = value_x1000 * levels // (ceiling * 1000)
    return min(levels - 1, max(0, bucket))


_SIZE_WORDS = (("small",), ("medium-sized", "intermediate"), ("large", "sizable"))
_TEXTURE_WORDS = (("smooth",), ("finely granular", "fine"), ("coarse", "clumped"))
_CYTO_WORDS = (("scant",), ("moderate",), ("abundant", "ample"))
_STAIN_WORDS = (("mild",), ("moderate",), ("marked", "deep"))


def _pick(words: tuple[str, ...], stream: SeedStream | None) -> str:
    if stream is None or len(words) == 1:
        return words[0]
    return words[stream.choice_index(len(words))]


class StatProjBackend:
    """Deterministic captioner/encoder driven by pixel statistics."""

    def __init__(self, checkpoint_id: str, dimension: int) -> None:
        if dimension < 4:
            raise BridgeError("statproj dimension must be >= 4")
        self.checkpoint_id = checkpoint_id
        self.dimension = dimension
        self.pooling = "global_integer_statistics"

    def describe(self, stats: ImageStats, image_id: str, sample_seed: int | None = None) -> str:
        """Caption for one image; greedy (deterministic) unless seeded."""
        stream = None
        if sample_seed is not None:
            key = fnv1a64(
                self.checkpoint_id.encode() + b"\x00" + image_id.encode() + b"\x00"
                + sample_seed.to_bytes(8, "little")
            )
            stream = SeedStream(key)
        size = _pick(_SIZE_WORDS[_bucket(stats.brightness, 256)], stream)
        texture = _pick(_TEXTURE_WORDS[_bucket(stats.gradient, 96)], stream)
        cyto = _pick(_CYTO_WORDS[_bucket(stats.mean_g, 256)], stream)
        stain = _pick(_STAIN_WORDS[_bucket(stats.mean_b, 256)], stream)
        article = "An" if size[0] in "aeiou" else "A"
        return (
            f"{article} {size} cell with {texture} chromatin texture, "
            f"{cyto} cytoplasm, and {stain} basophilic staining."
        )

    def _projection(self, n_features: int) -> np.ndarray:
        stream = SeedStream(fnv1a64(self.checkpoint_id.encode() + b"\x01proj"))
        matrix = np.empty((self.dimension, n_features), dtype=np.float64)
        for i in range(self.dimension):
            for j in range(n_features):
                matrix[i, j] = stream.uniform() * 2.0 - 1.0
        return matrix

    def embed(self, stats: ImageStats) -> np.ndarray:
        features = np.array(
            [
                stats.mean_r / 255000.0,
                stats.mean_g / 255000.0,
                stats.mean_b / 255000.0,
                stats.brightness / 255000.0,
                stats.gradient / 96000.0,
                1.0,
            ],
            dtype=np.float64,
        )
        vector = self._projection(features.shape[0]) @ features
        norm = float(np.linalg.norm(vector))
        if norm < 1e-12:
            vector = np.zeros(self.dimension)
            vector[0] = 1.0
            return vector
        return vector / norm

    def token_vector(self, token: str) -> np.ndarray:
        stream = SeedStream(
            fnv1a64(self.checkpoint_id.encode() + b"\x02tok\x00" + token.encode("utf-8"))
        )
        vector = np.array(
            [stream.uniform() * 2.0 - 1.0 for _ in range(self.dimension)], dtype=np.float64
        )
        norm = float(np.linalg.norm(vector))
        if norm < 1e-12:
            vector = np.zeros(self.dimension)
            vector[0] = 1.0
            return vector
        return vector / norm


_STATPROJ_RE = re.compile(r"^statproj-(\d+)$")


def resolve_checkpoint(checkpoint_id: str) -> StatProjBackend:
    """Look up a checkpoint id; `statproj-<dim>` is always available."""
    match = _STATPROJ_RE.match(checkpoint_id)
    if match:
        return StatProjBackend(checkpoint_id, int(match.group(1)))
    raise BridgeError(
        f"unknown checkpoint {checkpoint_id!r}; available: statproj-<dim> (e.g. statproj-16)"
    )
