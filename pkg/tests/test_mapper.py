import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from iqinet.demapper import (
    DemapperInput,
    build_demapper,
    demap_hard,
    demap_soft,
    demapper_order,
    features,
)
from iqinet.mapper import (
    Constellation,
    OneHot,
    bits_to_index,
    bits_to_onehot,
    build_mapper,
    constellation_backward,
    constellation_dumps,
    constellation_forward,
    constellation_loads,
    index_to_bits,
    load_constellation,
    mapper_order,
    save_constellation,
    sdnr_feature,
    select_symbol,
)
from iqinet.neural import Dense, DenseNet, forward


class TestBits:
    @pytest.mark.parametrize("bits, index", [([0, 0], 0), ([1, 0], 2), ([1, 0, 1, 0, 1, 0], 42)])
    def test_examples(self, bits, index):
        assert bits_to_index(bits) == index
        u = bits_to_onehot(bits)
        assert (u.index, u.dim) == (index, 2 ** len(bits))
        assert u.vector.sum() == 1.0 and u.vector[index] == 1.0

    @settings(max_examples=100, deadline=None)
    @given(st.integers(1, 8), st.data())
    def test_round_trip(self, m, data):
        idx = data.draw(st.integers(0, 2**m - 1))
        assert bits_to_index(index_to_bits(idx, m)) == idx

    def test_rejects_non_binary(self):
        with pytest.raises(ValueError):
            bits_to_index([0, 2])
        with pytest.raises(ValueError):
            bits_to_onehot(np.zeros(9, dtype=int))


class TestMapper:
    @pytest.mark.parametrize("m", [1, 2, 4, 6])
    def test_unit_power(self, m):
        net = build_mapper(m, np.random.default_rng(m))
        assert net.shape == [1, 2 ** (m + 1), 2 ** (m + 1)]
        assert mapper_order(net) == m
        for sdnr in (-5.0, 10.0, 30.0):
            c, _ = constellation_forward(net, sdnr)
            assert len(c.points) == 2**m
            assert c.mean_power == pytest.approx(1.0, abs=1e-9)

    def test_normalization_preserves_shape(self):
        raw = np.array([1.0, 2.0, -3.0, 0.5, 0.2, -1.0, 2.0, 2.0])
        net = DenseNet([Dense(np.zeros((8, 1)), np.zeros(8), "relu"), Dense(np.zeros((8, 8)), raw)])
        c, _ = constellation_forward(net, 10.0)
        pts = raw[0::2] + 1j * raw[1::2]
        d_raw = np.abs(pts[:, None] - pts[None, :])
        d_out = np.abs(c.points[:, None] - c.points[None, :])
        mask = ~np.eye(4, dtype=bool)
        ratios = d_out[mask] / d_raw[mask]
        np.testing.assert_allclose(ratios, ratios[0], rtol=1e-12)

    def test_all_zero_output_is_an_error(self):
        net = DenseNet([Dense(np.zeros((8, 1)), np.zeros(8), "relu"), Dense(np.zeros((8, 8)), np.zeros(8))])
        with pytest.raises(FloatingPointError):
            constellation_forward(net, 10.0)

    def test_backward_through_normalization(self):
        rng = np.random.default_rng(4)
        net = build_mapper(2, rng)
        sdnr = 7.0
        w = rng.normal(size=4) + 1j * rng.normal(size=4)

        def objective():
            c, _ = constellation_forward(net, sdnr)
            return float(np.sum(w.real * c.points.real + w.imag * c.points.imag))

        _, cache = constellation_forward(net, sdnr)
        grads = constellation_backward(net, cache, w)
        h = 1e-6
        for p, g in zip(net.parameters(), grads.parameters()):
            flat, gflat = p.reshape(-1), g.reshape(-1)
            for i in range(flat.size):
                old = flat[i]
                flat[i] = old + h
                up = objective()
                flat[i] = old - h
                down = objective()
                flat[i] = old
                assert gflat[i] == pytest.approx((up - down) / (2 * h), abs=1e-6)

    def test_select_is_table_lookup(self):
        m = 4
        c, _ = constellation_forward(build_mapper(m, np.random.default_rng(0)), 10.0)
        seen = set()
        for i in range(2**m):
            s = select_symbol(c, bits_to_onehot(index_to_bits(i, m)))
            assert s == c.points[i]
            seen.add(s)
        assert len(seen) == 2**m
        assert select_symbol(c, OneHot(0, 16)) == c.points[0]
        with pytest.raises(ValueError):
            select_symbol(c, OneHot(0, 8))

    def test_feature_scaling(self):
        assert sdnr_feature(10.0) == 0.0
        assert sdnr_feature(20.0) == 1.0

    def test_bad_orders(self):
        with pytest.raises(ValueError):
            build_mapper(0, np.random.default_rng(0))
        with pytest.raises(ValueError):
            Constellation(np.zeros(3), 2)


class TestConstellationRecord:
    def test_round_trip_is_byte_identical(self, tmp_path):
        c, _ = constellation_forward(build_mapper(3, np.random.default_rng(1)), 12.5)
        path = tmp_path / "c.txt"
        save_constellation(c, 12.5, path)
        back, sdnr = load_constellation(path)
        assert sdnr == 12.5
        assert back.points.tobytes() == c.points.tobytes()
        assert constellation_dumps(back, sdnr) == path.read_text()

    def test_rejects_bad_records(self):
        with pytest.raises(ValueError):
            constellation_loads("nope\n")
        text = "iqinet-constellation 1\nm 1\nsdnr_db 0.0\n1 0.0 0.0\n0 1.0 0.0\n"
        with pytest.raises(ValueError):
            constellation_loads(text)


class TestDemapper:
    def test_topology(self):
        net = build_demapper(4, np.random.default_rng(0))
        assert net.shape == [3, 128, 128, 16]
        assert demapper_order(net) == 4

    def test_zero_weight_net_is_uniform(self):
        net = build_demapper(3, np.random.default_rng(0), hidden=8)
        for p in net.parameters():
            p[:] = 0.0
        x = features(np.array([0.3 + 1j, -2.0]), 5.0)
        np.testing.assert_allclose(demap_soft(net, x), 1 / 8, atol=1e-15)
        np.testing.assert_allclose(demap_soft(net, DemapperInput(0.1, 0.2, 0.0)), 1 / 8, atol=1e-15)

    def test_features(self):
        x = features(np.array([1 - 2j]), 20.0)
        np.testing.assert_array_equal(x, [[1.0, -2.0, 1.0]])

    def test_hard_decisions(self):
        assert demap_hard(np.eye(4)[3]).tolist() == [1, 1]
        assert demap_hard(np.array([0.1, 0.45, 0.45, 0.0])).tolist() == [0, 1]
        assert demap_hard(np.full(8, 1 / 8)).tolist() == [0, 0, 0]
        assert demap_hard(np.eye(4)[[1, 2]], m=2).tolist() == [[0, 1], [1, 0]]

    def test_batch_matches_single(self):
        net = build_demapper(2, np.random.default_rng(2), hidden=16)
        r = np.array([0.5 + 0.5j, -0.7 + 0.1j])
        batch = demap_soft(net, features(r, 3.0))
        for i, ri in enumerate(r):
            single = forward(net, features(ri, 3.0))[0][0]
            np.testing.assert_allclose(batch[i], single, atol=1e-15)
