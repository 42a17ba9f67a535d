"""Line-of-sight THz channel gain, AWGN and the impaired receive chain."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .impairments import (
    IqiCoefficients,
    coeffs_from_irr,
    effective_leakage,
    sdnr,
    widely_linear_matrix,
)

SPEED_OF_LIGHT = 299_792_458.0

# Coarse molecular absorption coefficient (1/m) at 50 % RH, 300.15 K, 101325 Pa,
# sampled every 10 GHz over 100-450 GHz. Stand-in values shaped after the
# O2 (118.75, 424.76 GHz) and H2O (183.3, 325.2, 380.2, 448 GHz) lines;
# use Atmosphere.kappa_override when an exact value matters.
KAPPA_TABLE_FREQ_HZ = np.arange(100e9, 451e9, 10e9)
KAPPA_TABLE_PER_M = np.array([
    1.1e-4, 1.6e-4, 4.6e-4, 2.3e-4, 2.0e-4, 2.2e-4, 2.6e-4, 3.2e-4,  # 100-170
    1.2e-3, 7.5e-3, 1.3e-3, 8.5e-4, 8.0e-4, 8.2e-4, 8.8e-4, 9.5e-4,  # 180-250
    1.05e-3, 1.2e-3, 1.4e-3, 1.7e-3, 2.1e-3, 3.2e-3, 9.5e-3, 3.6e-3,  # 260-330
    2.9e-3, 3.1e-3, 3.8e-3, 5.6e-3, 3.4e-2, 9.0e-3, 6.8e-3, 7.5e-3,  # 340-410
    9.0e-3, 1.3e-2, 2.0e-2, 5.0e-2,  # 420-450
])


@dataclass(frozen=True)
class LinkGeometry:
    distance_m: float = 10.0
    freq_hz: float = 100e9
    gt_dbi: float = 30.0
    gr_dbi: float = 30.0

    def __post_init__(self):
        if self.distance_m < 0:
            raise ValueError("distance must be non-negative")
        if not self.freq_hz > 0:
            raise ValueError("frequency must be positive")


@dataclass(frozen=True)
class Atmosphere:
    rel_humidity: float = 50.0
    temperature_k: float = 300.15
    pressure_pa: float = 101325.0
    kappa_override: Optional[float] = None

    def __post_init__(self):
        if not 0 <= self.rel_humidity <= 100:
            raise ValueError("relative humidity must be within [0, 100] %")
        if not self.pressure_pa > 0:
            raise ValueError("pressure must be positive")


@dataclass(frozen=True)
class LinkState:
    """Amplitude gain ``h``, transmit power ``ps`` and noise power ``no`` (watts)."""

    h: float
    ps: float
    no: float

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError("channel gain must be positive")
        if self.ps < 0 or self.no < 0:
            raise ValueError("powers must be non-negative")

    @property
    def snr(self) -> float:
        return self.h**2 * self.ps / self.no

    @property
    def snr_db(self) -> float:
        return 10.0 * math.log10(self.snr)


def db_to_linear(x_db: float) -> float:
    return 10.0 ** (x_db / 10.0)


def path_gain(geom: LinkGeometry) -> float:
    """Free-space (Friis) power gain including antenna gains."""
    if geom.distance_m <= 0:
        raise ValueError("path gain needs a positive distance")
    gt = db_to_linear(geom.gt_dbi)
    gr = db_to_linear(geom.gr_dbi)
    return gt * gr * SPEED_OF_LIGHT**2 / ((4 * math.pi) ** 2 * geom.freq_hz**2 * geom.distance_m**2)


def absorption_coefficient(atm: Atmosphere, freq_hz: float) -> float:
    if atm.kappa_override is not None:
        return float(atm.kappa_override)
    lo, hi = KAPPA_TABLE_FREQ_HZ[0], KAPPA_TABLE_FREQ_HZ[-1]
    if not lo <= freq_hz <= hi:
        raise ValueError(
            f"no built-in absorption data at {freq_hz / 1e9:g} GHz "
            f"(table covers {lo / 1e9:g}-{hi / 1e9:g} GHz); set kappa_override"
        )
    return float(np.interp(freq_hz, KAPPA_TABLE_FREQ_HZ, KAPPA_TABLE_PER_M))


def absorption_gain(atm: Atmosphere, geom: LinkGeometry) -> float:
    return math.exp(-absorption_coefficient(atm, geom.freq_hz) * geom.distance_m)


def channel_gain(geom: LinkGeometry, atm: Atmosphere) -> float:
    return math.sqrt(path_gain(geom) * absorption_gain(atm, geom))


def calibrate_snr(snr_db: float) -> LinkState:
    """Link with unit gain and unit noise power whose SNR is ``snr_db``."""
    if not math.isfinite(snr_db):
        raise ValueError("snr_db must be finite")
    return LinkState(h=1.0, ps=db_to_linear(snr_db), no=1.0)


def complex_awgn(rng: np.random.Generator, size, no: float) -> np.ndarray:
    """Circular complex Gaussian noise with total power ``no``."""
    re_im = rng.standard_normal((2,) + tuple(np.atleast_1d(size)))
    return math.sqrt(no / 2.0) * (re_im[0] + 1j * re_im[1])


def transmit_through(s, g: IqiCoefficients, k: IqiCoefficients, link: LinkState,
                     rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """Pass baseband symbols ``s`` through TX IQI, the LoS gain, AWGN and RX IQI.

    ``s`` already carries the transmit amplitude (``E|s|^2 = ps``). With
    ``rng=None`` or ``link.no == 0`` the channel is noiseless.
    """
    s = np.asarray(s, dtype=complex)
    x = effective_leakage(g, k)
    r = link.h * (x.xi1 * s + x.xi2 * np.conj(s))
    if rng is not None and link.no > 0:
        n = complex_awgn(rng, s.shape, link.no)
        r = r + k.c1 * n + k.c2 * np.conj(n)
    return r


def link_sdnr(g: IqiCoefficients, k: IqiCoefficients, link: LinkState) -> float:
    return sdnr(effective_leakage(g, k), k, link.h, link.ps, link.no)


def link_budget_report(geom: LinkGeometry, atm: Atmosphere, ps_w: float, no_w: float,
                       g: IqiCoefficients, k: IqiCoefficients) -> str:
    hp = path_gain(geom)
    hm = absorption_gain(atm, geom)
    h = math.sqrt(hp * hm)
    gamma = sdnr(effective_leakage(g, k), k, h, ps_w, no_w)
    lines = [
        f"distance_m = {geom.distance_m:g}",
        f"freq_hz = {geom.freq_hz:g}",
        f"h_p = {hp:.6e} ({10 * math.log10(hp):.3f} dB)",
        f"h_m = {hm:.6f} ({10 * math.log10(hm):.4f} dB)",
        f"h = {h:.6e}",
        f"snr_db = {10 * math.log10(h**2 * ps_w / no_w):.3f}",
        f"sdnr_db = {10 * math.log10(gamma):.3f}",
    ]
    return "\n".join(lines) + "\n"


class ImpairedLink:
    """SNR-calibrated link (h = 1, no = 1) with fixed TX/RX imbalance.

    Receivers see samples divided by the known ``h * sqrt(ps)``, so the noiseless
    part of :meth:`transmit` is ``xi1 * s + xi2 * conj(s)`` for unit-power ``s``.
    """

    def __init__(self, g: IqiCoefficients, k: IqiCoefficients):
        self.g = g
        self.k = k
        self.leakage = effective_leakage(g, k)

    @classmethod
    def from_irr(cls, irr_db: float, mode: str = "amplitude") -> "ImpairedLink":
        return cls(*coeffs_from_irr(irr_db, mode))

    def sdnr_db(self, snr_db: float) -> float:
        return 10.0 * math.log10(link_sdnr(self.g, self.k, calibrate_snr(snr_db)))

    def transmit(self, s_unit, snr_db: float, rng: Optional[np.random.Generator]) -> np.ndarray:
        link = calibrate_snr(snr_db)
        scale = link.h * math.sqrt(link.ps)
        return transmit_through(np.asarray(s_unit) * math.sqrt(link.ps), self.g, self.k, link, rng) / scale

    def jacobian(self) -> np.ndarray:
        """Real 2x2 derivative of the noiseless normalized output w.r.t. ``[Re s, Im s]``."""
        return widely_linear_matrix(self.leakage.xi1, self.leakage.xi2)
