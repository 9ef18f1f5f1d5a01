"""Complex datasets: synthetic bars, CPXD files, coefficient thresholding, PPM rendering."""
import re
from dataclasses import dataclass

import numpy as np

from . import formats
from .errors import DomainError, ShapeError
from .special import TWO_PI, make_rng, wrap_angle

# two wavelet bands of 6 orientations: 7x7 and 4x4 positions
MNIST_BANDS = ((0, 7 * 7 * 6), (7 * 7 * 6, 7 * 7 * 6 + 4 * 4 * 6))


@dataclass(frozen=True)
class ComplexDataset:
    samples: np.ndarray
    shape: tuple = None

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=complex)
        if samples.ndim != 2:
            raise ShapeError("samples must be a 2-D array (n_samples, n_units)")
        if not np.all(np.isfinite(samples)):
            raise DomainError("samples must be finite")
        shape = None if self.shape is None else tuple(int(s) for s in self.shape)
        if shape is not None and shape[0] * shape[1] != samples.shape[1]:
            raise ShapeError(f"shape {shape} does not cover {samples.shape[1]} units")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "shape", shape)

    @property
    def n_samples(self):
        return self.samples.shape[0]

    @property
    def n_units(self):
        return self.samples.shape[1]

    def __len__(self):
        return self.n_samples

    def subset(self, idx):
        return ComplexDataset(self.samples[idx], self.shape)


@dataclass(frozen=True)
class BarsConfig:
    side: int = 24
    bar_width: int = 2
    min_bars: int = 2
    max_bars: int = 4
    phase_noise_max: float = 0.6
    seed: int = 0

    def __post_init__(self):
        if min(self.side, self.bar_width, self.min_bars, self.max_bars) <= 0 or self.phase_noise_max < 0:
            raise ValueError("bar configuration fields must be positive")
        if self.max_bars < self.min_bars or self.max_bars * self.bar_width > self.side:
            raise ValueError("bar counts do not fit on the image")


@dataclass(frozen=True)
class Bar:
    horizontal: bool
    start: int
    offset: float


def gen_bars(cfg, n, return_bars=False):
    """Random horizontal and vertical bars with a noisy travelling-wave phase.

    Each direction gets a uniform count in [min_bars, max_bars] of bars placed
    in distinct ``bar_width``-aligned slots. Along a bar the phase is
    ``offset + 2*pi*x/side + U(0, phase_noise_max)``, one period over the bar
    length, with a fresh uniform offset per bar. Horizontal bars are drawn
    first, so vertical bars win at crossings.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = make_rng(cfg.seed)
    side, width = cfg.side, cfg.bar_width
    n_slots = side // width
    ramp = TWO_PI * np.arange(side) / side
    samples = np.zeros((n, side, side), dtype=complex)
    all_bars = []
    for i in range(n):
        img = samples[i]
        bars = []
        for horizontal in (True, False):
            count = rng.integers(cfg.min_bars, cfg.max_bars + 1)
            slots = rng.choice(n_slots, size=count, replace=False)
            for slot in slots:
                offset = rng.uniform(0.0, TWO_PI)
                noise = rng.uniform(0.0, cfg.phase_noise_max, size=(width, side))
                patch = np.exp(1j * (offset + ramp + noise))
                lo = slot * width
                if horizontal:
                    img[lo : lo + width, :] = patch
                else:
                    img[:, lo : lo + width] = patch.T
                bars.append(Bar(horizontal, int(lo), float(offset)))
        all_bars.append(bars)
    ds = ComplexDataset(samples.reshape(n, side * side), (side, side))
    return (ds, all_bars) if return_bars else ds


def save_dataset(ds, path):
    with open(path, "wb") as f:
        f.write(formats.encode_dataset(ds.samples, ds.shape))


def load_dataset(path):
    with open(path, "rb") as f:
        samples, shape = formats.decode_dataset(f.read())
    return ComplexDataset(samples, shape)


def read_band_partition(path):
    """Parse ``start:end`` lines (half-open ranges); blank lines and ``#`` comments are skipped."""
    bands = []
    with open(path) as f:
        for line in f:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            start, end = line.split(":")
            bands.append((int(start), int(end)))
    return bands


def write_band_partition(bands, path):
    with open(path, "w") as f:
        for start, end in bands:
            f.write(f"{start}:{end}\n")


def _check_partition(bands, n_units):
    covered = np.zeros(n_units, dtype=int)
    for start, end in bands:
        if not 0 <= start < end <= n_units:
            raise ValueError(f"empty or out-of-range band {start}:{end}")
        covered[start:end] += 1
    if np.any(covered != 1):
        raise ValueError("band partition must cover every unit exactly once")


def threshold_normalize(ds, cutoff=0.15, band_partition=None):
    """Normalise each band by its dataset-wide maximum modulus, zero entries below
    ``cutoff`` and set the survivors to modulus 1 with their phase kept."""
    bands = band_partition if band_partition is not None else [(0, ds.n_units)]
    _check_partition(bands, ds.n_units)
    out = np.zeros_like(ds.samples)
    for start, end in bands:
        block = ds.samples[:, start:end]
        mod = np.abs(block)
        peak = mod.max() if mod.size else 0.0
        if peak == 0:
            raise ValueError(f"band {start}:{end} is all zero; cannot normalise")
        keep = mod / peak >= cutoff
        out[:, start:end] = np.where(keep, block / np.where(keep, mod, 1.0), 0.0)
    return ComplexDataset(out, ds.shape)


def _hsv_to_rgb(h, s, v):
    """Vectorised HSV -> RGB, all channels in [0, 1]; ``h`` in turns."""
    i = np.floor(h * 6.0)
    f = h * 6.0 - i
    p = v * (1.0 - s)
    q = v * (1.0 - s * f)
    t = v * (1.0 - s * (1.0 - f))
    i = i.astype(int) % 6
    r = np.choose(i, [v, q, p, p, t, v])
    g = np.choose(i, [t, v, v, q, p, p])
    b = np.choose(i, [p, p, t, v, v, q])
    return np.stack([r, g, b], axis=-1)


def complex_to_rgb(sample, shape, global_phase=0.0):
    """(height, width, 3) uint8 array: hue from phase, value from modulus (clipped to 1)."""
    if shape is None:
        raise ShapeError("rendering needs a 2-D shape")
    width, height = shape
    z = np.asarray(sample, dtype=complex).reshape(height, width)
    hue = np.asarray(wrap_angle(np.angle(z) + global_phase)) / TWO_PI
    val = np.minimum(np.abs(z), 1.0)
    rgb = _hsv_to_rgb(hue, np.ones_like(val), val)
    return np.round(rgb * 255.0).astype(np.uint8)


def write_ppm(rgb, path):
    height, width, _ = rgb.shape
    with open(path, "wb") as f:
        f.write(f"P6\n{width} {height}\n255\n".encode("ascii"))
        f.write(np.ascontiguousarray(rgb, dtype=np.uint8).tobytes())


def read_ppm(path):
    with open(path, "rb") as f:
        data = f.read()
    m = re.match(rb"P6\s+(\d+)\s+(\d+)\s+255\s", data)
    if m is None:
        raise ValueError("not an 8-bit binary PPM")
    width, height = int(m.group(1)), int(m.group(2))
    pixels = np.frombuffer(data[m.end() :], dtype=np.uint8)
    return pixels.reshape(height, width, 3)


def render_complex_image(sample, shape, path, global_phase=0.0):
    write_ppm(complex_to_rgb(sample, shape, global_phase), path)


def render_grid(rows, shape, path, global_phase=0.0, pad=1):
    """Tile a list of rows (each a list of samples) into one PPM with black padding."""
    width, height = shape
    n_rows = len(rows)
    n_cols = max(len(r) for r in rows)
    canvas = np.zeros((n_rows * (height + pad) + pad, n_cols * (width + pad) + pad, 3), dtype=np.uint8)
    for i, row in enumerate(rows):
        for j, sample in enumerate(row):
            y = pad + i * (height + pad)
            x = pad + j * (width + pad)
            canvas[y : y + height, x : x + width] = complex_to_rgb(sample, shape, global_phase)
    write_ppm(canvas, path)
