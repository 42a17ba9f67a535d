"""Uncoded Gray-mapped square QAM with an IQI-unaware nearest-neighbour detector."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .impairments import IqiCoefficients, effective_leakage
from .mapper import bits_to_index, index_to_bits


def gray(n):
    return n ^ (n >> 1)


def inverse_gray(g):
    g = np.asarray(g, dtype=np.int64)
    n = g.copy()
    shift = g >> 1
    while np.any(shift):
        n ^= shift
        shift >>= 1
    return n


@dataclass(frozen=True)
class QamGrid:
    """Square 2^m-QAM with unit mean power.

    ``points[i]`` is the symbol whose Gray label, read big-endian, equals ``i``:
    the first m/2 bits select the in-phase level and the last m/2 the quadrature level.
    """

    m: int
    points: np.ndarray

    @classmethod
    def build(cls, m: int) -> "QamGrid":
        if m < 2 or m % 2:
            raise ValueError(f"square QAM needs an even number of bits, got {m}")
        half = m // 2
        side = 2**half
        labels = np.arange(2**m)
        i_level = inverse_gray(labels >> half)
        q_level = inverse_gray(labels & (side - 1))
        amp = np.arange(side) * 2 - (side - 1)
        scale = math.sqrt(2 * (side**2 - 1) / 3)
        pts = (amp[i_level] + 1j * amp[q_level]) / scale
        return cls(m, pts)


def qam_modulate(bits, grid: QamGrid):
    bits = np.asarray(bits)
    if bits.shape[-1] != grid.m:
        raise ValueError(f"expected {grid.m} bits per symbol")
    return grid.points[bits_to_index(bits)]


def nearest_index(r, points: np.ndarray, chunk: int = 1 << 15) -> np.ndarray:
    """Index of the closest point; exact ties resolve to the lower index."""
    r = np.atleast_1d(np.asarray(r, dtype=complex))
    out = np.empty(len(r), dtype=np.int64)
    p2 = np.abs(points) ** 2
    for lo in range(0, len(r), chunk):
        rr = r[lo:lo + chunk]
        # |r - p|^2 minus the common |r|^2 term
        d = p2[None, :] - 2 * (rr.real[:, None] * points.real[None, :] + rr.imag[:, None] * points.imag[None, :])
        out[lo:lo + chunk] = np.argmin(d, axis=1)
    return out


def qam_detect_unaware(r, grid: QamGrid, h: float, ps: float) -> np.ndarray:
    """Hard bits from the grid point nearest to ``r / (h sqrt(ps))``, ignoring IQI."""
    return index_to_bits(nearest_index(np.asarray(r) / (h * math.sqrt(ps)), grid.points), grid.m)


def qam_floor_oracle(grid: QamGrid, g: IqiCoefficients, k: IqiCoefficients) -> float:
    """Noise-free BER of the unaware detector, enumerating every message once."""
    x = effective_leakage(g, k)
    r = x.xi1 * grid.points + x.xi2 * np.conj(grid.points)
    sent = index_to_bits(np.arange(2**grid.m), grid.m)
    got = index_to_bits(nearest_index(r, grid.points), grid.m)
    return float(np.mean(sent != got))
