"""Dataset ingestion, netpbm rasters, resizing, splitting and synthetic data.

Datasets use a folder-per-class layout, ``<root>/<class_name>/<image>``.
Class indices follow the lexicographic order of folder names.
"""
from __future__ import annotations

import itertools
import logging
import math
import os
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .tensor import Rng

log = logging.getLogger(__name__)

# stream keys for Rng.derived
_SYNTH_KEY = 0x5947
_SPLIT_KEY = 0x5350


class RasterError(ValueError):
    pass


class DatasetError(ValueError):
    pass


@dataclass
class LabeledSample:
    image: np.ndarray  # [H, W, C] in [0, 1]
    class_index: int
    source: str | None = None


@dataclass
class Dataset:
    samples: list[LabeledSample]
    class_names: list[str]
    skipped: list[str] = field(default_factory=list)

    def __post_init__(self):
        if list(self.class_names) != sorted(self.class_names):
            raise DatasetError("class names must be sorted lexicographically")
        shapes = {s.image.shape for s in self.samples}
        if len(shapes) > 1:
            raise DatasetError(f"mixed image shapes in dataset: {sorted(shapes)}")
        for s in self.samples:
            if not 0 <= s.class_index < len(self.class_names):
                raise DatasetError(f"class index {s.class_index} out of range")

    def __len__(self):
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    @property
    def image_shape(self) -> tuple:
        return self.samples[0].image.shape if self.samples else ()

    def arrays(self):
        """Stacked ``(images [N,H,W,C], labels [N])``."""
        if not self.samples:
            return np.zeros((0,)), np.zeros((0,), dtype=np.int64)
        images = np.stack([s.image for s in self.samples]).astype(np.float64, copy=False)
        labels = np.array([s.class_index for s in self.samples], dtype=np.int64)
        return images, labels

    def class_counts(self) -> list[int]:
        counts = [0] * self.n_classes
        for s in self.samples:
            counts[s.class_index] += 1
        return counts


class TrainSplit(Dataset):
    """Training partition; the only dataset type augmentation accepts."""


class TestSplit(Dataset):
    """Held-out partition."""


# ---------------------------------------------------------------- rasters

_TOKEN = re.compile(rb"\s*(?:#[^\n]*\n?\s*)*([^\s#]+)")


def _tokens(data: bytes, pos: int, count: int):
    out = []
    for _ in range(count):
        m = _TOKEN.match(data, pos)
        if not m:
            raise RasterError("malformed header: unexpected end of data")
        out.append(m.group(1))
        pos = m.end()
    return out, pos


def _parse_raster(data: bytes):
    magic = data[:2]
    if magic not in (b"P2", b"P3", b"P5", b"P6"):
        raise RasterError(f"unsupported format (magic {magic!r})")
    channels = 3 if magic in (b"P3", b"P6") else 1
    try:
        (w, h, maxval), pos = _tokens(data, 2, 3)
        width, height, maxval = int(w), int(h), int(maxval)
    except ValueError:
        raise RasterError("malformed header") from None
    if width < 1 or height < 1 or maxval < 1:
        raise RasterError(f"malformed header: {width}x{height}, maxval {maxval}")
    if maxval > 255:
        raise RasterError(f"maxval {maxval} > 255 is not supported")
    count = width * height * channels
    if magic in (b"P5", b"P6"):
        if pos >= len(data) or not data[pos : pos + 1].isspace():
            raise RasterError("malformed header: missing whitespace before raster")
        payload = data[pos + 1 :]
        if len(payload) != count:
            raise RasterError(f"pixel count mismatch: expected {count} bytes, got {len(payload)}")
        pixels = np.frombuffer(payload, dtype=np.uint8).astype(np.int64)
    else:
        body = re.sub(rb"#[^\n]*", b"", data[pos:]).split()
        if len(body) != count:
            raise RasterError(f"pixel count mismatch: expected {count} values, got {len(body)}")
        try:
            pixels = np.array([int(t) for t in body], dtype=np.int64)
        except ValueError:
            raise RasterError("malformed pixel data") from None
    if pixels.size and (pixels.max() > maxval or pixels.min() < 0):
        raise RasterError(f"pixel value outside [0, {maxval}]")
    return pixels.reshape(height, width, channels), maxval


def decode_raster(data: bytes) -> np.ndarray:
    """Decode a P2/P3/P5/P6 anymap into an integer ``[H, W, C]`` array."""
    return _parse_raster(data)[0]


def encode_raster(pixels, binary: bool = True, maxval: int = 255) -> bytes:
    """Encode integer ``[H, W, 1|3]`` pixels as PGM/PPM."""
    pixels = np.asarray(pixels)
    if pixels.ndim == 2:
        pixels = pixels[..., None]
    h, w, c = pixels.shape
    if c not in (1, 3):
        raise RasterError(f"cannot encode {c} channels")
    if pixels.min() < 0 or pixels.max() > maxval:
        raise RasterError(f"pixel value outside [0, {maxval}]")
    magic = {(1, True): b"P5", (3, True): b"P6", (1, False): b"P2", (3, False): b"P3"}[(c, binary)]
    header = magic + f"\n{w} {h}\n{maxval}\n".encode()
    if binary:
        return header + pixels.astype(np.uint8).tobytes()
    rows = [" ".join(str(int(v)) for v in row.ravel()) for row in pixels]
    return header + ("\n".join(rows) + "\n").encode()


def read_image(path) -> np.ndarray:
    """Decode a file and normalise to [0, 1] by its maxval."""
    pixels, maxval = _parse_raster(Path(path).read_bytes())
    return pixels.astype(np.float64) / maxval


# ---------------------------------------------------------- image helpers

def resize_bilinear(image, target) -> np.ndarray:
    """Corner-aligned bilinear resize of ``[H, W, C]`` to ``target = (H', W')``.

    Output corners coincide with input corners; a 1-pixel target axis samples
    the input centre.
    """
    image = np.asarray(image, dtype=np.float64)
    h, w, _ = image.shape
    th, tw = int(target[0]), int(target[1])
    if min(h, w, th, tw) < 1:
        raise ValueError(f"cannot resize {image.shape} to {target}")
    if (th, tw) == (h, w):
        return image.copy()
    sy = (h - 1) / (th - 1) if th > 1 else 0.0
    sx = (w - 1) / (tw - 1) if tw > 1 else 0.0
    oy = 0.0 if th > 1 else (h - 1) / 2
    ox = 0.0 if tw > 1 else (w - 1) / 2
    coeffs = np.array([sx, 0.0, ox, 0.0, sy, oy])
    return kernels.warp_bilinear(np.ascontiguousarray(image), th, tw, coeffs, True)


def to_channels(image, channels: int) -> np.ndarray:
    """RGB to gray by 0.299R + 0.587G + 0.114B; gray to RGB by replication."""
    c = image.shape[-1]
    if c == channels:
        return image
    if c == 3 and channels == 1:
        return image @ np.array([[0.299], [0.587], [0.114]])
    if c == 1 and channels == 3:
        return np.repeat(image, 3, axis=-1)
    raise ValueError(f"cannot convert {c} channels to {channels}")


def prepare_image(image, target_size=None, channels=None) -> np.ndarray:
    if channels is not None:
        image = to_channels(image, channels)
    if target_size is not None and tuple(image.shape[:2]) != tuple(target_size):
        image = resize_bilinear(image, target_size)
    return np.clip(image, 0.0, 1.0)


# --------------------------------------------------------------- datasets

def load_dataset(root_dir, target_size=None, channels: int | None = 1, strict: bool = False) -> Dataset:
    """Load ``<root>/<class>/<image>`` into a :class:`Dataset`.

    Images are normalised to [0, 1], converted to ``channels`` and resized to
    ``target_size`` (default: the size of the first image).  Undecodable
    files are logged and skipped, or raise in ``strict`` mode.
    """
    root = Path(root_dir)
    if not root.is_dir():
        raise DatasetError(f"dataset root not found: {root}")
    class_dirs = sorted(
        (p for p in root.iterdir() if p.is_dir() and not p.name.startswith(".")),
        key=lambda p: p.name,
    )
    if not class_dirs:
        raise DatasetError(f"no classes found under {root}")
    samples, skipped = [], []
    for idx, cdir in enumerate(class_dirs):
        for path in sorted(cdir.iterdir(), key=lambda p: p.name):
            if not path.is_file() or path.name.startswith("."):
                continue
            try:
                img = read_image(path)
            except (RasterError, OSError) as exc:
                if strict:
                    raise DatasetError(f"cannot decode {path}: {exc}") from exc
                log.warning("skipping %s: %s", path, exc)
                skipped.append(str(path))
                continue
            if target_size is None:
                target_size = img.shape[:2]
            img = prepare_image(img, target_size, channels)
            samples.append(LabeledSample(img, idx, f"{cdir.name}/{path.name}"))
    if not samples:
        raise DatasetError(f"no images found under {root}")
    return Dataset(samples, [p.name for p in class_dirs], skipped)


def split_train_test(ds: Dataset, train_fraction: float, seed: int):
    """Stratified split into ``(TrainSplit, TestSplit)``.

    Each class with ``n`` samples sends ``floor(train_fraction * n)`` of them,
    clamped to ``[1, n - 1]``, to the training side.  Both partitions keep
    the original sample order.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train fraction must be in (0, 1), got {train_fraction}")
    by_class: list[list[int]] = [[] for _ in range(ds.n_classes)]
    for i, s in enumerate(ds.samples):
        by_class[s.class_index].append(i)
    train_idx = []
    for c, members in enumerate(by_class):
        n = len(members)
        if n < 2:
            raise ValueError(f"class {ds.class_names[c]!r} has {n} sample(s); need at least 2")
        k = min(max(math.floor(train_fraction * n + 1e-9), 1), n - 1)
        perm = Rng.derived(seed, _SPLIT_KEY, c).permutation(n)
        train_idx.extend(members[j] for j in perm[:k])
    chosen = set(train_idx)
    train = [s for i, s in enumerate(ds.samples) if i in chosen]
    test = [s for i, s in enumerate(ds.samples) if i not in chosen]
    return TrainSplit(train, list(ds.class_names)), TestSplit(test, list(ds.class_names))


def write_dataset(ds: Dataset, root) -> list[Path]:
    """Write every sample as a binary PGM/PPM under ``<root>/<class>/``."""
    root = Path(root)
    written = []
    counters = [0] * ds.n_classes
    for s in ds.samples:
        name = ds.class_names[s.class_index]
        folder = root / name
        folder.mkdir(parents=True, exist_ok=True)
        ext = ".pgm" if s.image.shape[-1] == 1 else ".ppm"
        path = folder / f"{name}_{counters[s.class_index]:04d}{ext}"
        counters[s.class_index] += 1
        pixels = np.rint(np.clip(s.image, 0.0, 1.0) * 255).astype(np.int64)
        path.write_bytes(encode_raster(pixels))
        written.append(path)
    return written


# ------------------------------------------------------- synthetic glyphs

# Glyphs are stylised hands in normalised coordinates (x right, y down, image
# spans [-1, 1]): a palm ring plus five fingers radiating upwards, each finger
# absent, extended or curled.  Strokes are ("seg", x0, y0, x1, y1) or
# ("arc", cx, cy, r, start, sweep).
_PALM_CENTER = (0.0, 0.35)
_PALM_RADIUS = 0.28
_FINGER_ANGLES = (-160.0, -125.0, -90.0, -55.0, -20.0)
_FINGER_LENGTH = {1: 0.5, 2: 0.22}  # extended, curled
_STROKE_HALF_WIDTH = 0.06
MAX_SYNTH_CLASSES = 36
# stride through the 3**5 - 1 finger states; coprime with 242 so it visits all of them
_STATE_STRIDE = 37


def _finger_states():
    states = [s for s in itertools.product(range(3), repeat=5) if any(s)]
    return [states[(k * _STATE_STRIDE) % len(states)] for k in range(MAX_SYNTH_CLASSES)]


GLYPHS = _finger_states()


def glyph_strokes(class_index: int) -> list:
    cx, cy = _PALM_CENTER
    strokes = [("arc", cx, cy, _PALM_RADIUS, 0.0, 2 * math.pi)]
    for angle, state in zip(_FINGER_ANGLES, GLYPHS[class_index]):
        if state:
            a = math.radians(angle)
            r0, r1 = _PALM_RADIUS, _PALM_RADIUS + _FINGER_LENGTH[state]
            strokes.append(("seg", cx + r0 * math.cos(a), cy + r0 * math.sin(a),
                            cx + r1 * math.cos(a), cy + r1 * math.sin(a)))
    return strokes


def _distance(prim, x, y):
    if prim[0] == "seg":
        _, x0, y0, x1, y1 = prim
        dx, dy = x1 - x0, y1 - y0
        t = np.clip(((x - x0) * dx + (y - y0) * dy) / (dx * dx + dy * dy), 0.0, 1.0)
        return np.hypot(x - (x0 + t * dx), y - (y0 + t * dy))
    _, cx, cy, r, start, sweep = prim
    px, py = x - cx, y - cy
    radial = np.abs(np.hypot(px, py) - r)
    if sweep >= 2 * math.pi:
        return radial
    ang = np.mod(np.arctan2(py, px) - start, 2 * math.pi)
    ends = [(cx + r * math.cos(a), cy + r * math.sin(a)) for a in (start, start + sweep)]
    end_d = np.minimum(*(np.hypot(x - ex, y - ey) for ex, ey in ends))
    return np.where(ang <= sweep, radial, end_d)


def render_glyph(class_index: int, size, angle_deg=0.0, shift=(0.0, 0.0)) -> np.ndarray:
    """Noise-free ``[H, W]`` rendering of a class glyph under rotation and shift.

    ``shift`` is a fraction of the image extent along (x, y).
    """
    h, w = size
    ys, xs = np.meshgrid(
        (np.arange(h) + 0.5) / h * 2 - 1, (np.arange(w) + 0.5) / w * 2 - 1, indexing="ij"
    )
    # inverse transform: undo translation then rotation
    xs = xs - 2 * shift[0]
    ys = ys - 2 * shift[1]
    t = math.radians(angle_deg)
    u = math.cos(t) * xs - math.sin(t) * ys
    v = math.sin(t) * xs + math.cos(t) * ys
    pixel = 2.0 / min(h, w)
    d = np.min([_distance(p, u, v) for p in glyph_strokes(class_index)], axis=0)
    return np.clip((_STROKE_HALF_WIDTH - d) / pixel + 0.5, 0.0, 1.0)


def synth_generate(n_classes: int, per_class: int, size, seed: int,
                   max_rotation: float = 15.0, max_shift: float = 0.10, noise: float = 0.05) -> Dataset:
    """Synthetic glyph dataset, ``n_classes`` classes named ``c00``, ``c01``, ...

    Every class is a fixed hand glyph (see :func:`glyph_strokes`).  Each sample gets a
    random rotation in ``[-max_rotation, max_rotation]`` degrees, a shift of up
    to ``max_shift`` of the image size per axis and Gaussian pixel noise, and
    is clamped to [0, 1].  Output is a pure function of the arguments.
    """
    if not 2 <= n_classes <= MAX_SYNTH_CLASSES:
        raise ValueError(f"n_classes must be in [2, {MAX_SYNTH_CLASSES}], got {n_classes}")
    if per_class < 2:
        raise ValueError(f"per_class must be >= 2, got {per_class}")
    if isinstance(size, int):
        size = (size, size)
    h, w = int(size[0]), int(size[1])
    if h < 4 or w < 4:
        raise ValueError(f"image size must be at least 4x4, got {h}x{w}")
    samples = []
    for c in range(n_classes):
        for i in range(per_class):
            rng = Rng.derived(seed, _SYNTH_KEY, c, i)
            angle = rng.uniform(-max_rotation, max_rotation)
            shift = (rng.uniform(-max_shift, max_shift), rng.uniform(-max_shift, max_shift))
            img = render_glyph(c, (h, w), angle, shift) + rng.normal(0.0, noise, (h, w))
            samples.append(LabeledSample(np.clip(img, 0.0, 1.0)[..., None], c, f"c{c:02d}/{i}"))
    return Dataset(samples, [f"c{c:02d}" for c in range(n_classes)])


def default_workers() -> int:
    """Thread cap from ``SIGNCORE_THREADS`` (0 or unset: CPU count)."""
    raw = os.environ.get("SIGNCORE_THREADS", "0").strip() or "0"
    n = int(raw)
    return n if n > 0 else (os.cpu_count() or 1)
