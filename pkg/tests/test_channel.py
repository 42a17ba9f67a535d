import math

import numpy as np
import pytest

from iqinet.channel import (
    SPEED_OF_LIGHT,
    Atmosphere,
    ImpairedLink,
    LinkGeometry,
    LinkState,
    absorption_gain,
    calibrate_snr,
    channel_gain,
    link_budget_report,
    link_sdnr,
    path_gain,
    transmit_through,
)
from iqinet.impairments import (
    RX,
    TX,
    IqiCoefficients,
    Mismatch,
    apply_rx_iqi,
    apply_tx_iqi,
    coeffs_from_irr,
    rx_coeffs,
    tx_coeffs,
)

IDEAL = (IqiCoefficients.ideal(TX), IqiCoefficients.ideal(RX))


class TestGains:
    def test_friis_paper_scenario(self):
        # 1e3 * 1e3 * c^2 / ((4 pi)^2 * (1e11)^2 * 10^2), worked by hand: 5.6914e-4
        hp = path_gain(LinkGeometry(10.0, 100e9, 30.0, 30.0))
        assert hp == pytest.approx(5.6914e-4, rel=1e-4)
        assert 10 * math.log10(hp) == pytest.approx(-32.45, abs=0.01)

    def test_inverse_square(self):
        a = path_gain(LinkGeometry(5.0, 300e9, 20, 20))
        b = path_gain(LinkGeometry(10.0, 300e9, 20, 20))
        assert b == pytest.approx(a / 4, rel=1e-14)

    def test_unit_identity(self):
        assert path_gain(LinkGeometry(1.0, SPEED_OF_LIGHT / (4 * math.pi), 0, 0)) == pytest.approx(1.0, rel=1e-14)

    def test_absorption(self):
        geom = LinkGeometry(10.0, 100e9)
        assert absorption_gain(Atmosphere(kappa_override=0.0), geom) == 1.0
        assert absorption_gain(Atmosphere(kappa_override=1e-3), geom) == pytest.approx(math.exp(-0.01), rel=1e-15)
        assert absorption_gain(Atmosphere(), LinkGeometry(0.0, 200e9)) == 1.0

    def test_absorption_table_range(self):
        with pytest.raises(ValueError):
            absorption_gain(Atmosphere(), LinkGeometry(10.0, 60e9))
        assert absorption_gain(Atmosphere(kappa_override=0.0), LinkGeometry(10.0, 60e9)) == 1.0

    def test_table_default_is_near_transparent_at_100ghz(self):
        assert 0.99 < absorption_gain(Atmosphere(), LinkGeometry(10.0, 100e9)) < 1.0

    def test_channel_gain(self):
        geom = LinkGeometry(1.0, SPEED_OF_LIGHT / (4 * math.pi), 0, 0)
        assert channel_gain(geom, Atmosphere(kappa_override=0.0)) == pytest.approx(1.0)
        assert channel_gain(geom, Atmosphere(kappa_override=0.00999667 / 1.0)) == pytest.approx(
            math.sqrt(math.exp(-0.00999667)), rel=1e-12)
        h = channel_gain(LinkGeometry(10.0, 100e9, 30, 30), Atmosphere())
        assert h == pytest.approx(2.386e-2, rel=2e-3)

    def test_invalid_atmosphere(self):
        with pytest.raises(ValueError):
            Atmosphere(rel_humidity=120)
        with pytest.raises(ValueError):
            Atmosphere(pressure_pa=0)

    def test_report(self):
        g, k = coeffs_from_irr(15.0)
        text = link_budget_report(LinkGeometry(), Atmosphere(), 1.0, 1e-12, g, k)
        for key in ("h_p", "h_m", "h =", "sdnr_db"):
            assert key in text


class TestCalibration:
    @pytest.mark.parametrize("snr_db, ps", [(0.0, 1.0), (10.0, 10.0)])
    def test_values(self, snr_db, ps):
        link = calibrate_snr(snr_db)
        assert (link.h, link.no) == (1.0, 1.0)
        assert link.ps == pytest.approx(ps, rel=1e-15)

    def test_snr_identity(self):
        for snr_db in np.linspace(-5, 40, 19):
            link = calibrate_snr(snr_db)
            assert link.h**2 * link.ps / link.no == 10 ** (snr_db / 10)

    def test_distortion_reduces_sdnr(self):
        g, k = coeffs_from_irr(20.0)
        assert link_sdnr(g, k, calibrate_snr(5.0)) < 10**0.5

    def test_non_finite(self):
        with pytest.raises(ValueError):
            calibrate_snr(math.inf)


class TestTransmit:
    def test_ideal_noiseless(self):
        rng = np.random.default_rng(0)
        s = rng.normal(size=100) + 1j * rng.normal(size=100)
        link = LinkState(0.37, 1.0, 0.0)
        r = transmit_through(s, *IDEAL, link, rng)
        np.testing.assert_array_equal(r, 0.37 * s)

    def test_noise_power_through_rx_iqi(self):
        rng = np.random.default_rng(1)
        g, k = tx_coeffs(Mismatch(0.8, 0.1)), rx_coeffs(Mismatch(0.7, -0.2))
        no = 2.5
        r = transmit_through(np.zeros(1_000_000), g, k, LinkState(1.0, 1.0, no), rng)
        expected = (abs(k.c1) ** 2 + abs(k.c2) ** 2) * no
        # |K1|^2+|K2|^2 scaling holds for circular noise: E[n^2] = 0
        assert np.mean(np.abs(r) ** 2) == pytest.approx(expected, rel=0.01)

    def test_awgn_moments(self):
        rng = np.random.default_rng(2)
        n = transmit_through(np.zeros(1_000_000), *IDEAL, LinkState(1.0, 1.0, 1.0), rng)
        sigma = math.sqrt(0.5 / len(n))
        assert abs(n.real.mean()) < 3 * sigma and abs(n.imag.mean()) < 3 * sigma
        assert np.mean(np.abs(n) ** 2) == pytest.approx(1.0, rel=0.01)
        assert np.var(n.real) == pytest.approx(0.5, rel=0.01)

    def test_seeded_determinism(self):
        g, k = coeffs_from_irr(15.0)
        s = np.exp(1j * np.linspace(0, 6, 64))
        a = transmit_through(s, g, k, LinkState(1.0, 3.0, 1.0), np.random.default_rng(7))
        b = transmit_through(s, g, k, LinkState(1.0, 3.0, 1.0), np.random.default_rng(7))
        assert a.tobytes() == b.tobytes()

    def test_matches_unfused_pipeline(self):
        g, k = tx_coeffs(Mismatch(1.2, 0.25)), rx_coeffs(Mismatch(0.85, -0.1))
        link = LinkState(0.6, 4.0, 0.3)
        s = np.random.default_rng(3).normal(size=500) + 1j * np.random.default_rng(4).normal(size=500)
        r = transmit_through(s, g, k, link, np.random.default_rng(9))
        # same noise stream, applied step by step
        noise_rng = np.random.default_rng(9)
        re_im = noise_rng.standard_normal((2, 500))
        n = math.sqrt(link.no / 2) * (re_im[0] + 1j * re_im[1])
        y = link.h * apply_tx_iqi(s, g) + n
        np.testing.assert_allclose(r, apply_rx_iqi(y, k), atol=1e-12)


class TestImpairedLink:
    def test_normalized_noiseless_output(self):
        link = ImpairedLink.from_irr(15.0)
        s = np.array([1 + 1j, -0.3 + 0.2j]) / math.sqrt(2)
        x = link.leakage
        np.testing.assert_allclose(link.transmit(s, 12.0, None), x.xi1 * s + x.xi2 * np.conj(s), atol=1e-14)

    def test_jacobian(self):
        link = ImpairedLink.from_irr(12.0, "phase")
        s = np.array([0.3 - 0.7j])
        r = link.transmit(s, 5.0, None)
        v = link.jacobian() @ np.array([s.real[0], s.imag[0]])
        assert v[0] + 1j * v[1] == pytest.approx(r[0], abs=1e-14)

    def test_noise_scales_with_snr(self):
        link = ImpairedLink.from_irr(math.inf)
        r = link.transmit(np.zeros(400_000), 10.0, np.random.default_rng(0))
        assert np.mean(np.abs(r) ** 2) == pytest.approx(0.1, rel=0.02)
