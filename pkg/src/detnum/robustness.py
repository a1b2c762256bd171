"""Degradation protocols: brightness sweeps, noise sweeps, PSNR banding.

Grayscale images carry real-valued pixels on the 0..255 scale (quantization
to 8 bits happens only at IO / histogram time). Brightness is *mean
luminance*, set by multiplicative rescaling with an iterative correction
when clamping to [0, 255] shifts the mean. Gaussian noise is injected on
the normalized [0, 1] scale and PSNR uses MAX = 1 on that scale.

A sweep evaluates an external scorer (clean / miss / fail per level) on a
coarse grid, then refines every outcome transition at the fine step so band
boundaries are localized to fine-step resolution. The evaluated levels are
then partitioned into contiguous same-outcome bands. The detector under
test is external — this module classifies and bands its outcomes, it does
not detect anything itself.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .metrics import confusion_counts

__all__ = [
    "GrayImage", "BrightnessResult", "MaskRect", "SweepConfig", "SweepEntry",
    "RobustnessBand", "SweepResult", "OUTCOMES",
    "set_brightness", "set_brightness_result", "add_gaussian_noise", "psnr",
    "mask_histogram", "classify_outcome", "outcome_from_records",
    "grid_levels", "sweep", "synthetic_gray", "write_pgm", "read_pgm",
    "sweep_to_csv", "bands_to_json",
]

OUTCOMES = ("clean", "miss", "fail")

_BRIGHTNESS_MAX_ITERS = 8


@dataclass(frozen=True, eq=False)
class GrayImage:
    """2-d luminance image; values are reals in [0, 255]."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.float64)
        if px.ndim != 2 or px.size == 0:
            raise ValueError(f"pixels must be a non-empty 2-d array, got shape {px.shape}")
        if not np.all(np.isfinite(px)):
            raise ValueError("pixels must be finite")
        if px.min() < 0.0 or px.max() > 255.0:
            raise ValueError("pixels must lie in [0, 255]")
        px = px.copy()
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def mean(self) -> float:
        return float(self.pixels.mean())

    @property
    def quantized(self) -> np.ndarray:
        """8-bit view: round-half-even then clip."""
        return np.clip(np.rint(self.pixels), 0, 255).astype(np.uint8)

    @property
    def normalized(self) -> np.ndarray:
        return self.pixels / 255.0

    @classmethod
    def constant(cls, value: float, height: int, width: int) -> "GrayImage":
        return cls(np.full((height, width), float(value)))


@dataclass(frozen=True)
class BrightnessResult:
    image: GrayImage
    achieved_mean: float
    iterations: int
    used_additive_fallback: bool


def set_brightness_result(img: GrayImage, target_gray: float) -> BrightnessResult:
    """Rescale so the mean luminance lands on target_gray (within ±1).

    Multiplicative rescale preserves contrast structure; when clamping at
    255 (or 0) drags the mean off target, the scale is corrected for up to
    8 rounds. An all-zero image cannot be rescaled anywhere, so a nonzero
    target falls back to an additive constant (flagged).
    """
    t = float(target_gray)
    if not (0.0 <= t <= 255.0):
        raise ValueError(f"target_gray must lie in [0, 255], got {t!r}")
    current = img.mean
    if current <= 0.0:
        if t <= 0.0:
            return BrightnessResult(img, 0.0, 0, False)
        flat = GrayImage(np.full_like(img.pixels, t))
        return BrightnessResult(flat, flat.mean, 0, True)
    if t <= 0.0:
        out = GrayImage(np.zeros_like(img.pixels))
        return BrightnessResult(out, 0.0, 1, False)

    # mean(clip(scale * px)) is increasing and concave in scale, so a
    # secant step from (0, 0) and the unclipped guess approaches the root
    # from below without overshoot; plain proportional correction crawls
    # once clipping flattens the curve (e.g. targets near white).
    scale = t / current
    prev_scale, prev_f = 0.0, -t
    out = img.pixels
    iters = 0
    for _ in range(_BRIGHTNESS_MAX_ITERS):
        iters += 1
        out = np.clip(img.pixels * scale, 0.0, 255.0)
        achieved = float(out.mean())
        f = achieved - t
        if abs(f) <= 0.5 or achieved <= 0.0:
            break
        if f != prev_f:
            step = f * (scale - prev_scale) / (f - prev_f)
        else:                       # flat stretch: probe outward instead
            step = -scale if f < 0.0 else scale * 0.5
        prev_scale, prev_f = scale, f
        scale = max(scale - step, prev_scale * 0.25)
    result = GrayImage(out)
    return BrightnessResult(result, result.mean, iters, False)


def set_brightness(img: GrayImage, target_gray: float) -> GrayImage:
    return set_brightness_result(img, target_gray).image


def add_gaussian_noise(img: GrayImage, mean: float, var: float, seed=0) -> GrayImage:
    """Seeded Gaussian noise on the normalized scale, clamped to range."""
    mean = float(mean)
    var = float(var)
    if var < 0.0:
        raise ValueError(f"var must be >= 0, got {var!r}")
    if var == 0.0 and mean == 0.0:
        return img
    rng = np.random.default_rng(seed)
    x = img.normalized + rng.normal(mean, math.sqrt(var), size=img.pixels.shape)
    return GrayImage(np.clip(x, 0.0, 1.0) * 255.0)


def psnr(a: GrayImage, b: GrayImage) -> float:
    """Peak signal-to-noise ratio in dB; identical images give math.inf."""
    if a.pixels.shape != b.pixels.shape:
        raise ValueError(f"shape mismatch: {a.pixels.shape} vs {b.pixels.shape}")
    diff = a.pixels - b.pixels
    sumsq = float(np.sum(diff * diff))
    if sumsq <= 0.0:
        return math.inf
    # MAX^2/MSE is scale invariant; evaluating it on the raw 0..255 scale
    # keeps quarter-integer pixel values exact in the squaring, so round
    # decibel ratios (MSE 0.01 -> 20 dB, 0.001 -> 30 dB) are exact floats.
    return 10.0 * math.log10(255.0 * 255.0 * diff.size / sumsq)


@dataclass(frozen=True)
class MaskRect:
    """Rectangular region: top-left corner (x, y), size w × h, in pixels."""

    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        for name in ("x", "y", "w", "h"):
            object.__setattr__(self, name, int(getattr(self, name)))
        if self.x < 0 or self.y < 0:
            raise ValueError("mask origin must be non-negative")
        if self.w < 1 or self.h < 1:
            raise ValueError("mask must cover at least one pixel")


def mask_histogram(img: GrayImage, mask: MaskRect) -> np.ndarray:
    """256-bin histogram of the quantized pixels inside the mask."""
    if mask.x + mask.w > img.width or mask.y + mask.h > img.height:
        raise ValueError(
            f"mask {mask} exceeds image bounds {img.width}x{img.height}")
    region = img.quantized[mask.y:mask.y + mask.h, mask.x:mask.x + mask.w]
    return np.bincount(region.ravel(), minlength=256)


def classify_outcome(tp: int, fp: int, fn: int) -> str:
    """fail = nothing found; miss = partial/spurious; clean = exact.

    With no ground truths at all the tp==0 rule would misfire, so that case
    is scored on false positives alone.
    """
    if tp < 0 or fp < 0 or fn < 0:
        raise ValueError("counts must be >= 0")
    if tp == 0 and fn == 0:       # no ground truths present
        return "clean" if fp == 0 else "miss"
    if tp == 0:
        return "fail"
    if fn > 0 or fp > 0:
        return "miss"
    return "clean"


def outcome_from_records(dets, gts, iou_threshold: float = 0.5) -> str:
    """Classify a detector's output for one level against ground truth."""
    counts = confusion_counts(dets, gts, iou_threshold)
    tp = sum(c.tp for c in counts.values())
    fp = sum(c.fp for c in counts.values())
    fn = sum(c.fn for c in counts.values())
    return classify_outcome(tp, fp, fn)


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepConfig:
    mode: str                      # "brightness" | "noise"
    lo: float
    hi: float
    coarse_step: float
    fine_step: float
    noise_axis: str = "joint"      # "joint" | "mean" | "var"
    fixed_mean: float = 0.0        # held constant when noise_axis == "var"
    fixed_var: float = 0.0         # held constant when noise_axis == "mean"
    seed: int = 42

    def __post_init__(self):
        if self.mode not in ("brightness", "noise"):
            raise ValueError(f"mode must be brightness or noise, got {self.mode!r}")
        if self.noise_axis not in ("joint", "mean", "var"):
            raise ValueError(f"noise_axis must be joint, mean or var, got {self.noise_axis!r}")
        for name in ("lo", "hi", "coarse_step", "fine_step", "fixed_mean", "fixed_var"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if not (self.lo <= self.hi):
            raise ValueError(f"need lo <= hi, got {self.lo} > {self.hi}")
        if self.coarse_step <= 0 or self.fine_step <= 0:
            raise ValueError("steps must be positive")
        if self.fine_step >= self.coarse_step:
            raise ValueError(
                f"fine_step must be smaller than coarse_step "
                f"({self.fine_step} >= {self.coarse_step})")
        if self.mode == "brightness" and not (0.0 <= self.lo and self.hi <= 255.0):
            raise ValueError("brightness range must lie within [0, 255]")
        if self.mode == "noise" and self.lo < 0.0:
            raise ValueError("noise levels must be >= 0")


@dataclass(frozen=True)
class SweepEntry:
    level: float
    psnr_db: float
    outcome: str
    achieved_mean: float | None = None   # brightness mode only


@dataclass(frozen=True)
class RobustnessBand:
    band: str
    interval: tuple[float, float]


@dataclass(frozen=True)
class SweepResult:
    config: SweepConfig
    entries: tuple[SweepEntry, ...]
    bands: tuple[RobustnessBand, ...]


def grid_levels(lo: float, hi: float, step: float) -> list[float]:
    """lo, lo+step, ... while <= hi. hi itself appears only if the grid
    lands on it exactly (range semantics, not linspace)."""
    lo, hi, step = float(lo), float(hi), float(step)
    if step <= 0:
        raise ValueError("step must be positive")
    if hi < lo:
        return []
    count = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return [round(lo + k * step, 12) for k in range(count)]


def _noise_params(cfg: SweepConfig, level: float) -> tuple[float, float]:
    if cfg.noise_axis == "joint":
        return level, level
    if cfg.noise_axis == "mean":
        return level, cfg.fixed_var
    return cfg.fixed_mean, level


def _degrade(img: GrayImage, cfg: SweepConfig, level: float):
    if cfg.mode == "brightness":
        res = set_brightness_result(img, level)
        return res.image, res.achieved_mean
    mean, var = _noise_params(cfg, level)
    return add_gaussian_noise(img, mean, var, seed=cfg.seed), None


def sweep(img: GrayImage, cfg: SweepConfig,
          scorer: Callable[[float, GrayImage], str]) -> SweepResult:
    """Coarse pass, fine refinement at every outcome transition, banding.

    scorer(level, degraded_image) must return one of clean/miss/fail.
    Non-monotone outcome sequences are banded as-is — every contiguous run
    becomes its own band, so the same outcome may own several intervals.
    """
    evaluated: dict[float, SweepEntry] = {}

    def run(level: float):
        if level in evaluated:
            return
        degraded, achieved = _degrade(img, cfg, level)
        outcome = scorer(level, degraded)
        if outcome not in OUTCOMES:
            raise ValueError(f"scorer returned {outcome!r}; expected one of {OUTCOMES}")
        evaluated[level] = SweepEntry(level, psnr(img, degraded), outcome, achieved)

    coarse = grid_levels(cfg.lo, cfg.hi, cfg.coarse_step)
    if not coarse:
        return SweepResult(cfg, (), ())
    for lv in coarse:
        run(lv)
    for a, b in zip(coarse, coarse[1:]):
        if evaluated[a].outcome == evaluated[b].outcome:
            continue
        k = 1
        while True:
            lv = round(a + k * cfg.fine_step, 12)
            if lv >= b - 1e-12:
                break
            run(lv)
            k += 1
    entries = tuple(evaluated[lv] for lv in sorted(evaluated))
    return SweepResult(cfg, entries, _assemble_bands(entries))


def _assemble_bands(entries) -> tuple[RobustnessBand, ...]:
    bands = []
    start = None
    prev = None
    for e in entries:
        if prev is None or e.outcome != prev.outcome:
            if prev is not None:
                bands.append(RobustnessBand(prev.outcome, (start.level, prev.level)))
            start = e
        prev = e
    if prev is not None:
        bands.append(RobustnessBand(prev.outcome, (start.level, prev.level)))
    return tuple(bands)


def _fmt(x: float) -> str:
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(float(x))


def sweep_to_csv(result: SweepResult) -> str:
    lines = ["level,psnr_db,outcome"]
    for e in result.entries:
        lines.append(f"{_fmt(e.level)},{_fmt(e.psnr_db)},{e.outcome}")
    return "\n".join(lines)


def bands_to_json(result: SweepResult) -> list[dict]:
    return [{"band": b.band, "lo": b.interval[0], "hi": b.interval[1]}
            for b in result.bands]


# ---------------------------------------------------------------------------
# image helpers / PGM IO
# ---------------------------------------------------------------------------

def synthetic_gray(seed: int = 42, height: int = 64, width: int = 64) -> GrayImage:
    """Deterministic mid-range test image (no saturation headroom issues:
    values stay in [60, 196] so brightness targets up to ~165 rescale
    without clamping)."""
    rng = np.random.default_rng(seed)
    return GrayImage(rng.uniform(60.0, 196.0, size=(height, width)))


def write_pgm(img: GrayImage, path) -> None:
    q = img.quantized
    with open(path, "wb") as fh:
        fh.write(f"P5\n{img.width} {img.height}\n255\n".encode("ascii"))
        fh.write(q.tobytes(order="C"))


def read_pgm(path) -> GrayImage:
    with open(path, "rb") as fh:
        blob = fh.read()
    # header: magic, width, height, maxval — whitespace separated, with
    # optional '#' comment lines
    tokens = []
    pos = 0
    while len(tokens) < 4:
        m = re.match(rb"\s*(#[^\n]*\n|\S+)", blob[pos:])
        if m is None:
            raise ValueError(f"{path}: truncated PGM header")
        pos += m.end()
        tok = m.group(1)
        if not tok.startswith(b"#"):
            tokens.append(tok)
    if tokens[0] != b"P5":
        raise ValueError(f"{path}: not a binary PGM (magic {tokens[0]!r})")
    width, height, maxval = (int(t) for t in tokens[1:])
    if maxval <= 0 or maxval > 255:
        raise ValueError(f"{path}: unsupported maxval {maxval}")
    pos += 1  # single whitespace byte after maxval
    data = blob[pos:]
    if len(data) != width * height:
        raise ValueError(f"{path}: expected {width * height} pixel bytes, got {len(data)}")
    px = np.frombuffer(data, dtype=np.uint8).reshape(height, width)
    return GrayImage(px.astype(np.float64))
