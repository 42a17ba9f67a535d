"""Learned transmitter: bits -> one-hot -> SDNR-conditioned constellation -> symbol."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .neural import DenseNet, forward, backward, glorot_init

SDNR_CENTER_DB = 10.0
SDNR_SCALE_DB = 10.0


def sdnr_feature(sdnr_db: float) -> float:
    """Network input for a given SDNR (dB), scaled to roughly unit range."""
    return (sdnr_db - SDNR_CENTER_DB) / SDNR_SCALE_DB


def check_order(m: int) -> int:
    if not 1 <= int(m) <= 8:
        raise ValueError(f"bits per symbol must be in 1..8, got {m}")
    return int(m)


@dataclass(frozen=True)
class OneHot:
    index: int
    dim: int

    @property
    def vector(self) -> np.ndarray:
        u = np.zeros(self.dim)
        u[self.index] = 1.0
        return u


def bits_to_index(bits) -> np.ndarray:
    """Big-endian integer value of each row of ``bits`` (first bit is the MSB)."""
    b = np.asarray(bits, dtype=np.int64)
    if np.any((b != 0) & (b != 1)):
        raise ValueError("bits must be 0 or 1")
    m = b.shape[-1]
    weights = 1 << np.arange(m - 1, -1, -1, dtype=np.int64)
    return b @ weights


def index_to_bits(idx, m: int) -> np.ndarray:
    idx = np.asarray(idx, dtype=np.int64)
    shifts = np.arange(m - 1, -1, -1, dtype=np.int64)
    return (idx[..., None] >> shifts) & 1


def bits_to_onehot(bits) -> OneHot:
    bits = np.asarray(bits)
    m = check_order(bits.shape[-1])
    return OneHot(int(bits_to_index(bits)), 2**m)


@dataclass
class Constellation:
    points: np.ndarray  # complex, index order
    m: int

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=complex)
        if self.points.shape != (2**self.m,):
            raise ValueError(f"need {2**self.m} points for m={self.m}")

    @property
    def mean_power(self) -> float:
        return float(np.mean(np.abs(self.points) ** 2))

    def min_distance(self) -> float:
        d = np.abs(self.points[:, None] - self.points[None, :])
        return float(d[~np.eye(len(d), dtype=bool)].min())


def select_symbol(c: Constellation, u: OneHot) -> complex:
    if u.dim != len(c.points):
        raise ValueError("one-hot size does not match the constellation")
    return complex(c.points[u.index])


def build_mapper(m: int, rng: np.random.Generator) -> DenseNet:
    """Mapper network: 1 -> 2^(m+1) ReLU -> 2^(m+1) linear.

    Besides the Glorot weights, the output bias is drawn from the same uniform law:
    with an all-zero bias the constellation would collapse to the origin whenever
    the SDNR feature is exactly zero.
    """
    width = 2 ** (check_order(m) + 1)
    net = glorot_init([1, width, width], ["relu", "linear"], rng)
    bound = math.sqrt(6.0 / (2 * width))
    net.layers[-1].bias[:] = rng.uniform(-bound, bound, size=width)
    return net


def mapper_order(net: DenseNet) -> int:
    m = int(round(math.log2(net.output_size))) - 1
    if net.input_size != 1 or 2 ** (m + 1) != net.output_size:
        raise ValueError("not a mapper network")
    return m


@dataclass
class MapperCache:
    net_cache: object
    raw: np.ndarray  # (2^(m+1),) interleaved re/im
    scale: float  # sqrt of the raw mean power


def constellation_forward(net: DenseNet, sdnr_db: float) -> tuple[Constellation, MapperCache]:
    m = mapper_order(net)
    out, cache = forward(net, np.array([[sdnr_feature(sdnr_db)]]))
    raw = out[0]
    if not np.all(np.isfinite(raw)):
        raise FloatingPointError("mapper produced non-finite output")
    scale = math.sqrt(float(np.sum(raw**2)) / 2**m)
    if scale == 0.0:
        raise FloatingPointError("mapper produced an all-zero constellation")
    pts = raw / scale
    return Constellation(pts[0::2] + 1j * pts[1::2], m), MapperCache(cache, raw, scale)


def generate_constellation(net: DenseNet, sdnr_db: float) -> Constellation:
    return constellation_forward(net, sdnr_db)[0]


def constellation_backward(net: DenseNet, cache: MapperCache, grad_points: np.ndarray):
    """Parameter gradients given ``dL/dRe(c_i)`` and ``dL/dIm(c_i)``.

    ``grad_points`` is complex with real part holding the gradient w.r.t. the real
    coordinate and imaginary part the gradient w.r.t. the imaginary coordinate.
    The power normalization is differentiated through.
    """
    grad_points = np.asarray(grad_points, dtype=complex)
    g = np.empty(2 * len(grad_points))
    g[0::2] = grad_points.real
    g[1::2] = grad_points.imag
    n_points = len(grad_points)
    raw, s = cache.raw, cache.scale
    g_raw = g / s - raw * float(g @ raw) / (n_points * s**3)
    return backward(net, cache.net_cache, g_raw[None, :])


# -- constellation records -----------------------------------------------------

_HEADER = "iqinet-constellation 1"


def constellation_dumps(c: Constellation, sdnr_db: float) -> str:
    lines = [_HEADER, f"m {c.m}", f"sdnr_db {float(sdnr_db)!r}"]
    for i, p in enumerate(c.points):
        lines.append(f"{i} {float(p.real)!r} {float(p.imag)!r}")
    return "\n".join(lines) + "\n"


def constellation_loads(text: str) -> tuple[Constellation, float]:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != _HEADER:
        raise ValueError("not an iqinet constellation record")
    m = int(lines[1].split()[1])
    sdnr_db = float(lines[2].split()[1])
    pts = []
    for k, ln in enumerate(lines[3:]):
        i, re, im = ln.split()
        if int(i) != k:
            raise ValueError("constellation points out of order")
        pts.append(complex(float(re), float(im)))
    return Constellation(np.array(pts), m), sdnr_db


def save_constellation(c: Constellation, sdnr_db: float, path) -> None:
    Path(path).write_text(constellation_dumps(c, sdnr_db))


def load_constellation(path) -> tuple[Constellation, float]:
    return constellation_loads(Path(path).read_text())
