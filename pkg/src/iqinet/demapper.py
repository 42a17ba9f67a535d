"""Learned receiver: SDNR-conditioned posterior over messages and hard decisions."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .mapper import check_order, index_to_bits, sdnr_feature
from .neural import DenseNet, forward, glorot_init

DEFAULT_HIDDEN = 128


@dataclass(frozen=True)
class DemapperInput:
    r_re: float
    r_im: float
    sdnr_feature: float


def build_demapper(m: int, rng: np.random.Generator, hidden: int = DEFAULT_HIDDEN) -> DenseNet:
    """3 -> N ReLU -> N ReLU -> 2^m softmax."""
    k = 2 ** check_order(m)
    return glorot_init([3, hidden, hidden, k], ["relu", "relu", "softmax"], rng)


def demapper_order(net: DenseNet) -> int:
    m = int(round(math.log2(net.output_size)))
    if net.input_size != 3 or 2**m != net.output_size:
        raise ValueError("not a demapper network")
    return m


def features(r, sdnr_db: float) -> np.ndarray:
    """Stack ``(Re r, Im r, scaled SDNR)`` rows for a batch of received samples."""
    r = np.atleast_1d(np.asarray(r, dtype=complex))
    out = np.empty((len(r), 3))
    out[:, 0] = r.real
    out[:, 1] = r.imag
    out[:, 2] = sdnr_feature(sdnr_db)
    return out


def demap_soft(net: DenseNet, x) -> np.ndarray:
    """Posterior over the 2^m messages; accepts a :class:`DemapperInput` or a feature batch."""
    if isinstance(x, DemapperInput):
        return forward(net, np.array([x.r_re, x.r_im, x.sdnr_feature]))[0]
    return forward(net, x)[0]


def demap_hard(probs, m: int | None = None) -> np.ndarray:
    """Bits of the most probable message; ties go to the lower index."""
    probs = np.asarray(probs)
    if m is None:
        m = int(round(math.log2(probs.shape[-1])))
    return index_to_bits(np.argmax(probs, axis=-1), m)
