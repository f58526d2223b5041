from __future__ import annotations

from pathlib import Path

import pytest
from PIL import Image


def _make_image(path: Path, base: tuple[int, int, int], stripe: int) -> None:
    """Small deterministic RGB image with horizontal structure."""
    image = Image.new("RGB", (24, 16))
    pixels = image.load()
    for y in range(16):
        for x in range(24):
            if (x // stripe) % 2 == 0:
                pixels[x, y] = base
            else:
                pixels[x, y] = tuple(min(255, c + 60) for c in base)
    image.save(path)


@pytest.fixture(scope="session")
def image_dir(tmp_path_factory) -> Path:
    root = tmp_path_factory.mktemp("images")
    _make_image(root / "cell_a.png", (40, 60, 150), 3)
    _make_image(root / "cell_b.png", (150, 120, 90), 6)
    _make_image(root / "cell_c.png", (90, 160, 130), 2)
    return root


@pytest.fixture()
def image_dir_with_corrupt(image_dir, tmp_path) -> Path:
    root = tmp_path / "images"
    root.mkdir()
    for path in image_dir.iterdir():
        (root / path.name).write_bytes(path.read_bytes())
    (root / "broken.png").write_bytes(b"this is not a png")
    return root
