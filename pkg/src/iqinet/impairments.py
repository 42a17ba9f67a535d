"""I/Q imbalance algebra.

Transmit and receive IQI are modelled as widely-linear maps
``y = c1 * s + c2 * conj(s)``. All functions accept scalars or numpy arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TX = "TX"
RX = "RX"


@dataclass(frozen=True)
class Mismatch:
    """Amplitude (``epsilon``) and phase (``phi``, radians) mismatch of one I/Q mixer."""

    epsilon: float = 1.0
    phi: float = 0.0

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if not -math.pi < self.phi <= math.pi:
            raise ValueError(f"phi must lie in (-pi, pi], got {self.phi}")


@dataclass(frozen=True)
class IqiCoefficients:
    c1: complex
    c2: complex
    side: str

    def __post_init__(self):
        if self.side not in (TX, RX):
            raise ValueError(f"side must be {TX!r} or {RX!r}, got {self.side!r}")

    @classmethod
    def ideal(cls, side: str) -> "IqiCoefficients":
        return cls(1.0 + 0j, 0j, side)


@dataclass(frozen=True)
class EffectiveLeakage:
    """Direct (``xi1``) and image (``xi2``) gains of the cascaded TX+RX imbalance."""

    xi1: complex
    xi2: complex


def _pair(epsilon: float, phi: float) -> tuple[complex, complex]:
    """``(1 + eps e^{j phi}) / 2`` and ``(1 - eps e^{-j phi}) / 2``.

    ``1 - eps cos(phi)`` is evaluated as ``(1 - eps) + 2 eps sin^2(phi / 2)`` so
    nearly ideal mixers keep full relative precision in the image coefficient.
    """
    re_img = (1.0 - epsilon) + 2.0 * epsilon * math.sin(0.5 * phi) ** 2
    c1 = complex(0.5 * (1.0 + epsilon * math.cos(phi)), 0.5 * epsilon * math.sin(phi))
    c2 = complex(0.5 * re_img, 0.5 * epsilon * math.sin(phi))
    return c1, c2


def tx_coeffs(mm: Mismatch) -> IqiCoefficients:
    return IqiCoefficients(*_pair(mm.epsilon, mm.phi), TX)


def rx_coeffs(mm: Mismatch) -> IqiCoefficients:
    # conjugate sign convention relative to the modulator: phi -> -phi
    return IqiCoefficients(*_pair(mm.epsilon, -mm.phi), RX)


def irr(c: IqiCoefficients) -> float:
    """Image rejection ratio ``|c1|^2 / |c2|^2`` in dB (``inf`` when ``c2 == 0``)."""
    p2 = abs(c.c2) ** 2
    if p2 == 0.0:
        return math.inf
    return 10.0 * math.log10(abs(c.c1) ** 2 / p2)


def irr_closed_form(epsilon: float, phi: float) -> float:
    """IRR in dB of a mixer with mismatch (epsilon, phi); identical for TX and RX."""
    half = 4 * epsilon * math.sin(0.5 * phi) ** 2
    num = (1 + epsilon) ** 2 - half
    den = (1 - epsilon) ** 2 + half
    if den == 0.0:
        return math.inf
    return 10.0 * math.log10(num / den)


def mismatch_from_irr(irr_db: float, mode: str = "amplitude") -> Mismatch:
    """Mismatch producing the requested IRR.

    ``mode="amplitude"`` puts all imbalance in the gain (phi = 0, epsilon < 1),
    ``mode="phase"`` puts it all in the phase (epsilon = 1).
    """
    if math.isnan(irr_db) or irr_db <= 0:
        raise ValueError(f"IRR must be positive, got {irr_db} dB")
    if math.isinf(irr_db):
        return Mismatch(1.0, 0.0)
    ratio = 10.0 ** (irr_db / 10.0)
    if mode == "amplitude":
        root = math.sqrt(ratio)
        return Mismatch((root - 1.0) / (root + 1.0), 0.0)
    if mode == "phase":
        return Mismatch(1.0, math.acos((ratio - 1.0) / (ratio + 1.0)))
    raise ValueError(f"unknown mode {mode!r}; expected 'amplitude' or 'phase'")


def coeffs_from_irr(irr_db: float, mode: str = "amplitude") -> tuple[IqiCoefficients, IqiCoefficients]:
    """(TX, RX) coefficients for equal IRR on both sides."""
    mm = mismatch_from_irr(irr_db, mode)
    return tx_coeffs(mm), rx_coeffs(mm)


def widely_linear(s, c1: complex, c2: complex):
    return c1 * s + c2 * np.conj(s)


def apply_tx_iqi(s, g: IqiCoefficients):
    if g.side != TX:
        raise ValueError("apply_tx_iqi needs transmitter coefficients")
    return widely_linear(s, g.c1, g.c2)


def apply_rx_iqi(y, k: IqiCoefficients):
    if k.side != RX:
        raise ValueError("apply_rx_iqi needs receiver coefficients")
    return widely_linear(y, k.c1, k.c2)


def effective_leakage(g: IqiCoefficients, k: IqiCoefficients) -> EffectiveLeakage:
    if g.side != TX or k.side != RX:
        raise ValueError("effective_leakage expects (TX, RX) coefficients")
    xi1 = k.c1 * g.c1 + k.c2 * np.conj(g.c2)
    xi2 = k.c1 * g.c2 + k.c2 * np.conj(g.c1)
    return EffectiveLeakage(complex(xi1), complex(xi2))


def sdnr(x: EffectiveLeakage, k: IqiCoefficients, h: float, ps: float, no: float) -> float:
    """Signal-to-distortion-plus-noise ratio (linear)."""
    if not (h > 0 and ps > 0 and no > 0):
        raise ValueError("h, ps and no must all be positive")
    signal = abs(x.xi1) ** 2 * h**2 * ps
    distortion = abs(x.xi2) ** 2 * h**2 * ps
    noise = (abs(k.c1) ** 2 + abs(k.c2) ** 2) * no
    return signal / (distortion + noise)


def widely_linear_matrix(c1: complex, c2: complex) -> np.ndarray:
    """Real 2x2 matrix acting on ``[Re s, Im s]`` equivalent to ``c1*s + c2*conj(s)``."""
    a = c1 + c2
    b = c1 - c2
    return np.array([[a.real, -b.imag], [a.imag, b.real]])
