"""Factor projections and distance correlation."""

import numpy as np
import pytest

from oracles import dcor_oracle, sigmoid

from sessrec import tape
from sessrec.disentangle import (FactorProjection, dcor, independence_loss,
                                 project)
from sessrec.rng import substream
from sessrec.tape import Parameter, Tensor


def make_proj(d=6, d_f=3, k=2, seed=0):
    return FactorProjection.init(d, d_f, k, substream(seed, "init"))


class TestProjection:
    def test_shapes_and_count(self):
        proj = make_proj()
        out = project(np.ones((4, 6)), proj)
        assert len(out) == 2
        assert all(o.value.shape == (4, 3) for o in out)

    def test_matches_direct_formula(self):
        proj = make_proj()
        x = substream(1, "x").normal(size=(5, 6))
        out = project(x, proj)
        for k in range(2):
            expect = sigmoid(x @ proj.weights[k].value) + proj.biases[k].value
            np.testing.assert_allclose(out[k].value, expect, atol=1e-12)

    def test_bias_inside_variant(self):
        proj = make_proj()
        proj.bias_inside = True
        x = substream(2, "x").normal(size=(3, 6))
        out = project(x, proj)
        expect = sigmoid(x @ proj.weights[0].value + proj.biases[0].value)
        np.testing.assert_allclose(out[0].value, expect, atol=1e-12)

    def test_batched_input(self):
        proj = make_proj()
        x = substream(3, "x").normal(size=(2, 4, 6))
        out = project(x, proj)
        assert out[0].value.shape == (2, 4, 3)

    def test_gradient_reaches_weights(self):
        proj = make_proj()
        x = Tensor(substream(4, "x").normal(size=(3, 6)))
        loss = tape.tsum(tape.mul(project(x, proj)[0], project(x, proj)[0]))
        loss.backward()
        assert proj.weights[0].grad is not None
        assert np.abs(proj.weights[0].grad).max() > 0


class TestDcorOracle:
    def test_matches_oracle_on_random_data(self):
        rng = substream(5, "x")
        for trial in range(10):
            x = rng.normal(size=(7, 3))
            y = rng.normal(size=(7, 4))
            mine = float(dcor(x, y).value)
            ref = dcor_oracle(x, y)
            assert abs(mine - ref) <= 1e-10, f"trial {trial}"

    def test_matches_oracle_on_dependent_data(self):
        rng = substream(6, "x")
        x = rng.normal(size=(9, 2))
        y = np.tanh(x @ rng.normal(size=(2, 5)))
        assert abs(float(dcor(x, y).value) - dcor_oracle(x, y)) <= 1e-10


class TestDcorProperties:
    def test_self_is_one(self):
        rng = substream(7, "x")
        for _ in range(20):
            x = rng.normal(size=(6, 4))
            assert abs(float(dcor(x, x).value) - 1.0) < 1e-9

    def test_positive_scaling_invariant(self):
        rng = substream(8, "x")
        x = rng.normal(size=(6, 4))
        for c in (0.5, 3.0, 100.0):
            assert abs(float(dcor(x, c * x).value) - 1.0) < 1e-9

    def test_symmetric(self):
        rng = substream(9, "x")
        x, y = rng.normal(size=(8, 3)), rng.normal(size=(8, 5))
        assert abs(float(dcor(x, y).value)
                   - float(dcor(y, x).value)) < 1e-12

    def test_constant_side_is_zero(self):
        rng = substream(10, "x")
        x = rng.normal(size=(6, 3))
        const = np.ones((6, 2)) * 4.2
        assert float(dcor(x, const).value) == 0.0

    def test_range(self):
        rng = substream(11, "x")
        for _ in range(10):
            v = float(dcor(rng.normal(size=(7, 2)),
                           rng.normal(size=(7, 2))).value)
            assert 0.0 <= v <= 1.0 + 1e-12

    def test_row_count_mismatch_rejected(self):
        with pytest.raises(ValueError):
            dcor(np.ones((3, 2)), np.ones((4, 2)))

    def test_single_row_rejected(self):
        with pytest.raises(ValueError):
            dcor(np.ones((1, 2)), np.ones((1, 2)))


class TestIndependenceLoss:
    def test_ordered_pair_sum(self):
        rng = substream(12, "x")
        fs = [rng.normal(size=(6, 3)) for _ in range(3)]
        total = float(independence_loss(fs).value)
        expect = 0.0
        for i in range(3):
            for j in range(3):
                if i != j:
                    expect += dcor_oracle(fs[i], fs[j])
        assert total == pytest.approx(expect, abs=1e-10)

    def test_single_factor_is_zero(self):
        assert float(independence_loss([np.ones((4, 2))]).value) == 0.0

    def test_gradient_flows(self):
        rng = substream(13, "x")
        a = Parameter(rng.normal(size=(6, 3)))
        b = Parameter(rng.normal(size=(6, 3)))
        independence_loss([a, b]).backward()
        assert np.abs(a.grad).max() > 0
        assert np.abs(b.grad).max() > 0

    def test_decreases_under_gradient_descent(self):
        rng = substream(14, "x")
        a = Parameter(rng.normal(size=(8, 2)))
        b = Parameter(a.value * 2.0 + 0.1 * rng.normal(size=(8, 2)))
        first = None
        for _ in range(30):
            loss = independence_loss([a, b])
            if first is None:
                first = float(loss.value)
            a.grad = None
            b.grad = None
            loss.backward()
            a.value = a.value - 0.05 * a.grad
            b.value = b.value - 0.05 * b.grad
        assert float(independence_loss([a, b]).value) < first
