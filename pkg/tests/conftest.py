import numpy as np
import pytest

from adapatch.imageio import Image


def constant_image(h: int, w: int, c: int = 3, value: float = 0.5) -> Image:
    return Image(np.full((h, w, c), value, dtype=np.float32))


def noise_image(rng: np.random.Generator, h: int, w: int, c: int = 3) -> Image:
    return Image(rng.random((h, w, c), dtype=np.float32))


def half_noise_image(rng: np.random.Generator, size: int = 64, c: int = 3) -> Image:
    """Left half constant 0.5, right half i.i.d. uniform noise."""
    data = np.full((size, size, c), 0.5, dtype=np.float32)
    data[:, size // 2 :] = rng.random((size, size // 2, c), dtype=np.float32)
    return Image(data)


def mixed_image(rng: np.random.Generator, h: int, w: int, c: int = 3) -> Image:
    """Flat base with a few random noisy rectangles: all scales show up."""
    data = np.full((h, w, c), float(rng.uniform(0.2, 0.8)), dtype=np.float32)
    for _ in range(int(rng.integers(1, 4))):
        x0 = int(rng.integers(0, w))
        y0 = int(rng.integers(0, h))
        x1 = int(rng.integers(x0 + 1, w + 1))
        y1 = int(rng.integers(y0 + 1, h + 1))
        data[y0:y1, x0:x1] = rng.random((y1 - y0, x1 - x0, c), dtype=np.float32)
    return Image(data)


def write_ppm(path, arr: np.ndarray) -> None:
    """Binary P6 writer used as the test-side encoder."""
    arr = np.asarray(arr, dtype=np.uint8)
    h, w = arr.shape[:2]
    with open(path, "wb") as f:
        f.write(b"P6\n%d %d\n255\n" % (w, h))
        f.write(arr.tobytes())


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(0)


@pytest.fixture(scope="session")
def corpus_dir():
    from pathlib import Path

    path = Path(__file__).resolve().parent.parent / "assets" / "mini_corpus"
    if not path.is_dir() or len(list(path.glob("*.png"))) < 20:
        pytest.fail("assets/mini_corpus missing; run scripts/make_corpus.py")
    return path
