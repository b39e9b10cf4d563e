"""Bridge test fixtures: deterministically rendered shape images."""

from __future__ import annotations

from pathlib import Path

import pytest
from PIL import Image, ImageDraw

SIZE = 96


def render_shape(path: Path, shape: str, color: tuple[int, int, int]) -> Path:
    img = Image.new("RGB", (SIZE, SIZE), (255, 255, 255))
    draw = ImageDraw.Draw(img)
    lo, hi = 16, SIZE - 16
    if shape == "square":
        draw.rectangle([lo, lo, hi, hi], fill=color)
    elif shape == "circle":
        draw.ellipse([lo, lo, hi, hi], fill=color)
    elif shape == "triangle":
        draw.polygon([(SIZE // 2, lo), (hi, hi), (lo, hi)], fill=color)
    else:
        raise ValueError(shape)
    img.save(path)
    return path


@pytest.fixture()
def shape_images(tmp_path):
    return {
        "red_square": render_shape(tmp_path / "red_square.png", "square", (220, 20, 20)),
        "blue_circle": render_shape(tmp_path / "blue_circle.png", "circle", (20, 20, 220)),
        "green_triangle": render_shape(
            tmp_path / "green_triangle.png", "triangle", (20, 200, 20)
        ),
    }
