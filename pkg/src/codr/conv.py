"""Layer geometry, integer quantization, and reference convolutions.

Two independent convolution routes are provided: ``direct_conv`` computes
each output feature as a windowed dot product and serves as the ground
truth for everything else in the package; ``scalar_matrix_conv`` iterates
weights as scalars against shifted input regions and must agree with it
exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

ACTIVATIONS = ("none", "relu")


@dataclass(frozen=True)
class LayerShape:
    """Geometry of one convolutional layer; output extents are derived."""

    n_in: int
    m_out: int
    k_rows: int
    k_cols: int
    in_rows: int
    in_cols: int
    stride: int = 1
    pad: int = 0

    def __post_init__(self):
        for name in ("n_in", "m_out", "k_rows", "k_cols", "in_rows", "in_cols", "stride"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.pad < 0:
            raise ConfigError(f"pad must be >= 0, got {self.pad}")
        for dim, span, kern in (("rows", self.in_rows, self.k_rows),
                                ("cols", self.in_cols, self.k_cols)):
            room = span + 2 * self.pad - kern
            if room < 0 or room % self.stride != 0:
                raise ConfigError(
                    f"stride {self.stride} does not tile the padded input exactly "
                    f"along {dim} (extent {span}, kernel {kern}, pad {self.pad})")

    @property
    def out_rows(self) -> int:
        return (self.in_rows + 2 * self.pad - self.k_rows) // self.stride + 1

    @property
    def out_cols(self) -> int:
        return (self.in_cols + 2 * self.pad - self.k_cols) // self.stride + 1

    @property
    def weight_count(self) -> int:
        return self.m_out * self.n_in * self.k_rows * self.k_cols

    def to_dict(self) -> dict:
        return {"n_in": self.n_in, "m_out": self.m_out,
                "k_rows": self.k_rows, "k_cols": self.k_cols,
                "in_rows": self.in_rows, "in_cols": self.in_cols,
                "stride": self.stride, "pad": self.pad}

    @classmethod
    def from_dict(cls, d: dict) -> "LayerShape":
        known = {f: d[f] for f in ("n_in", "m_out", "k_rows", "k_cols",
                                   "in_rows", "in_cols") if f in d}
        missing = {"n_in", "m_out", "k_rows", "k_cols", "in_rows", "in_cols"} - set(known)
        if missing:
            raise ConfigError(f"layer config missing fields: {sorted(missing)}")
        return cls(stride=d.get("stride", 1), pad=d.get("pad", 0), **known)


@dataclass(frozen=True)
class QuantParams:
    """Symmetric per-tensor quantization parameters (zero point fixed at 0)."""

    bit_width: int
    scale: float
    scheme: str = "symmetric"

    def __post_init__(self):
        if self.bit_width not in (8, 16):
            raise ConfigError(f"bit_width must be 8 or 16, got {self.bit_width}")
        if not self.scale > 0:
            raise ConfigError(f"scale must be positive, got {self.scale}")

    @property
    def q_min(self) -> int:
        return -(1 << (self.bit_width - 1))

    @property
    def q_max(self) -> int:
        return (1 << (self.bit_width - 1)) - 1


@dataclass
class WeightTensor:
    """4D weight values (m_out, n_in, k_rows, k_cols) with a per-channel bias."""

    values: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.int64)
        self.bias = np.asarray(self.bias, dtype=np.int64)
        if self.values.ndim != 4:
            raise ConfigError(f"weights must be 4D, got shape {self.values.shape}")
        if self.bias.shape != (self.values.shape[0],):
            raise ConfigError(
                f"bias shape {self.bias.shape} does not match {self.values.shape[0]} output channels")

    @classmethod
    def zeros(cls, shape: LayerShape) -> "WeightTensor":
        return cls(np.zeros((shape.m_out, shape.n_in, shape.k_rows, shape.k_cols), np.int64),
                   np.zeros(shape.m_out, np.int64))


def check_range(values: np.ndarray, bit_width: int, what: str = "values") -> None:
    lo, hi = -(1 << (bit_width - 1)), (1 << (bit_width - 1)) - 1
    if values.size and (values.min() < lo or values.max() > hi):
        raise ConfigError(f"{what} exceed the signed {bit_width}-bit range [{lo}, {hi}]")


def _round_half_away(x: np.ndarray) -> np.ndarray:
    # np.round is round-half-even; the codec pins half-away-from-zero.
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def quantize_tensor(real: np.ndarray, bit_width: int) -> tuple[np.ndarray, QuantParams]:
    """Quantize a real tensor symmetrically to signed ``bit_width`` integers."""
    real = np.asarray(real, dtype=np.float64)
    if real.size == 0:
        raise ValueError("cannot quantize an empty tensor")
    if not np.all(np.isfinite(real)):
        bad = int(np.count_nonzero(~np.isfinite(real)))
        raise ValueError(f"tensor contains {bad} non-finite value(s)")
    q_max = (1 << (bit_width - 1)) - 1
    max_abs = float(np.max(np.abs(real)))
    scale = max_abs / q_max if max_abs > 0 else 1.0
    q = _round_half_away(real / scale)
    q = np.clip(q, -(q_max + 1), q_max).astype(np.int64)
    return q, QuantParams(bit_width=bit_width, scale=scale)


def _check_conv_args(inp: np.ndarray, weights: WeightTensor, shape: LayerShape) -> None:
    if inp.shape != (shape.n_in, shape.in_rows, shape.in_cols):
        raise ConfigError(f"input shape {inp.shape} does not match layer "
                          f"{(shape.n_in, shape.in_rows, shape.in_cols)}")
    expect = (shape.m_out, shape.n_in, shape.k_rows, shape.k_cols)
    if weights.values.shape != expect:
        raise ConfigError(f"weight shape {weights.values.shape} does not match layer {expect}")


def _padded(inp: np.ndarray, pad: int) -> np.ndarray:
    if pad == 0:
        return inp
    return np.pad(inp, ((0, 0), (pad, pad), (pad, pad)))


def direct_conv(inp: np.ndarray, weights: WeightTensor, shape: LayerShape) -> np.ndarray:
    """Windowed-dot-product convolution; the oracle for the whole package.

    Returns int64 accumulator values; no saturation is applied here.
    """
    inp = np.asarray(inp, dtype=np.int64)
    _check_conv_args(inp, weights, shape)
    padded = _padded(inp, shape.pad)
    out = np.empty((shape.m_out, shape.out_rows, shape.out_cols), np.int64)
    s = shape.stride
    for m in range(shape.m_out):
        w = weights.values[m]
        for r in range(shape.out_rows):
            for c in range(shape.out_cols):
                window = padded[:, r * s:r * s + shape.k_rows, c * s:c * s + shape.k_cols]
                out[m, r, c] = weights.bias[m] + int(np.sum(w * window))
    return out


def scalar_matrix_conv(inp: np.ndarray, weights: WeightTensor, shape: LayerShape) -> np.ndarray:
    """Per-scalar-weight convolution: each non-zero weight multiplies a shifted
    input region and the partial matrices accumulate per output channel."""
    inp = np.asarray(inp, dtype=np.int64)
    _check_conv_args(inp, weights, shape)
    padded = _padded(inp, shape.pad)
    s = shape.stride
    r_span = (shape.out_rows - 1) * s + 1
    c_span = (shape.out_cols - 1) * s + 1
    out = np.empty((shape.m_out, shape.out_rows, shape.out_cols), np.int64)
    for m in range(shape.m_out):
        acc = np.full((shape.out_rows, shape.out_cols), weights.bias[m], np.int64)
        for n in range(shape.n_in):
            for kr in range(shape.k_rows):
                for kc in range(shape.k_cols):
                    w = int(weights.values[m, n, kr, kc])
                    if w == 0:
                        continue
                    region = padded[n, kr:kr + r_span:s, kc:kc + c_span:s]
                    acc = acc + w * region
        out[m] = acc
    return out


def apply_activation(features: np.ndarray, mode: str) -> np.ndarray:
    if mode == "none":
        return features
    if mode == "relu":
        return np.maximum(features, 0)
    raise ConfigError(f"unknown activation {mode!r}; expected one of {ACTIVATIONS}")


def saturate(features: np.ndarray, bit_width: int) -> np.ndarray:
    """Clamp to the signed bit_width range (saturating, not wrapping)."""
    lo, hi = -(1 << (bit_width - 1)), (1 << (bit_width - 1)) - 1
    return np.clip(features, lo, hi)


def reference_output(inp: np.ndarray, weights: WeightTensor, shape: LayerShape,
                     activation: str = "none", bit_width: int = 8) -> np.ndarray:
    """Oracle for the full pipeline: convolve, activate, saturate to W bits."""
    return saturate(apply_activation(direct_conv(inp, weights, shape), activation), bit_width)
