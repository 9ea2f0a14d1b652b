"""Gated propagation: oracle equivalence and the star channel."""

import numpy as np

from oracles import ggnn_step_oracle

from sessrec import tape
from sessrec.graphs import build_session_graph, build_star_graph
from sessrec.propagation import (GGNNWeights, ggnn_step, run_factor,
                                 run_original, run_star, star_step)
from sessrec.rng import substream


def weights_for(dim, seed=0, layers=1):
    return GGNNWeights.init(dim, substream(seed, "init"), layers)


def as_dict(w):
    return {name.split(".")[-1]: p.value
            for name, p in w.named_parameters("g")}


class TestCellOracle:
    def test_matches_oracle(self):
        rng = substream(1, "x")
        w = weights_for(4, seed=2)
        for trial in range(5):
            g = build_session_graph(rng.integers(0, 6, size=5).tolist())
            x = rng.normal(size=(g.n_nodes, 4))
            mine = ggnn_step(x, g.adj_in, g.adj_out, w).value
            ref = ggnn_step_oracle(x, g.adj_in, g.adj_out, as_dict(w))
            np.testing.assert_allclose(mine, ref, atol=1e-10, rtol=0)

    def test_batched_matches_oracle_per_session(self):
        rng = substream(2, "x")
        w = weights_for(3, seed=3)
        adj_in = np.zeros((2, 3, 3))
        adj_out = np.zeros((2, 3, 3))
        xs = rng.normal(size=(2, 3, 3))
        for b in range(2):
            g = build_session_graph([1, 2, 3] if b == 0 else [4, 5, 4])
            k = g.n_nodes
            adj_in[b, :k, :k] = g.adj_in
            adj_out[b, :k, :k] = g.adj_out
        out = ggnn_step(xs, adj_in, adj_out, w).value
        for b in range(2):
            ref = ggnn_step_oracle(xs[b], adj_in[b], adj_out[b], as_dict(w))
            np.testing.assert_allclose(out[b], ref, atol=1e-10, rtol=0)

    def test_zero_everything_halves_state(self):
        # zero adjacency and zero weights leave z = 0.5 and cand = 0,
        # so one step exactly halves the state
        d = 4
        w = weights_for(d)
        for _, p in w.named_parameters("g"):
            p.value = np.zeros_like(p.value)
        x = substream(3, "x").normal(size=(3, d))
        out = ggnn_step(x, np.zeros((3, 3)), np.zeros((3, 3)), w).value
        np.testing.assert_allclose(out, 0.5 * x, atol=1e-12)

    def test_isolated_node_sees_only_biases(self):
        # with no edges the concatenated aggregate is [bias_in, bias_out]
        d = 3
        w = weights_for(d, seed=4)
        x = substream(4, "x").normal(size=(2, d))
        mine = ggnn_step(x, np.zeros((2, 2)), np.zeros((2, 2)), w).value
        c = np.concatenate([np.broadcast_to(w.bias_in.value, (2, d)),
                            np.broadcast_to(w.bias_out.value, (2, d))], axis=1)
        z = 1 / (1 + np.exp(-(c @ w.weight_update.value + x @ w.u_update.value)))
        r = 1 / (1 + np.exp(-(c @ w.weight_reset.value + x @ w.u_reset.value)))
        cand = np.tanh(c @ w.weight_cand.value + (r * x) @ w.u_cand.value)
        np.testing.assert_allclose(mine, (1 - z) * x + z * cand, atol=1e-12)


class TestChannels:
    def test_run_original_layers_compose(self):
        w = weights_for(4, seed=5, layers=2)
        g = build_session_graph([1, 2, 3, 1])
        x = substream(5, "x").normal(size=(g.n_nodes, 4))
        out = run_original(g, x, w)
        assert out.channel == "original"
        step1 = ggnn_step(x, g.adj_in, g.adj_out, w).value
        step2 = ggnn_step(step1, g.adj_in, g.adj_out, w).value
        np.testing.assert_allclose(out.embeddings.value, step2, atol=1e-12)

    def test_run_factor_uses_similarity_edges(self):
        from sessrec.graphs import build_factor_adjacency
        w = weights_for(3, seed=6)
        g = build_session_graph([1, 2, 3])
        f = substream(6, "x").normal(size=(3, 3))
        fa = build_factor_adjacency(g, f, k=1)
        out = run_factor(fa, f, w)
        assert out.channel == "factor1"
        ref = ggnn_step_oracle(f, fa.matrix.T, fa.matrix, as_dict(w))
        np.testing.assert_allclose(out.embeddings.value, ref, atol=1e-10,
                                   rtol=0)


class TestStarChannel:
    def test_theta_zero_bit_identical(self):
        rng = substream(7, "x")
        w = weights_for(5, seed=8, layers=2)
        for _ in range(20):
            session = rng.integers(0, 8, size=int(rng.integers(2, 7))).tolist()
            g = build_session_graph(session)
            x = rng.normal(size=(g.n_nodes, 5))
            star, satellite = build_star_graph(g, x, theta=0.0, seed=1)
            plain = run_original(g, x, w).embeddings.value
            hubbed = run_star(star, x, satellite, w).embeddings.value
            assert hubbed.shape == plain.shape
            assert (hubbed == plain).all(), "theta=0 must not change bits"

    def test_hub_edges_change_connected_nodes_only(self):
        w = weights_for(4, seed=9)
        g = build_session_graph([1, 2, 3])
        x = substream(8, "x").normal(size=(3, 4))
        sat = x.mean(axis=0)
        base = ggnn_step(x, g.adj_in, g.adj_out, w).value
        # hub points at node 1 only; nothing points back
        to_real = np.array([0.0, 1.0, 0.0])
        from_real = np.zeros(3)
        out, _ = star_step(x, sat, g.adj_in, g.adj_out, to_real, from_real, w)
        changed = np.abs(out.value - base).max(axis=1)
        assert changed[1] > 0
        assert changed[0] == 0 and changed[2] == 0

    def test_hub_state_receives_from_real(self):
        w = weights_for(3, seed=10)
        g = build_session_graph([1, 2])
        x = substream(9, "x").normal(size=(2, 3))
        sat = x.mean(axis=0)
        to_real = np.zeros(2)
        from_real = np.array([1.0, 1.0])
        _, sat_next = star_step(x, sat, g.adj_in, g.adj_out, to_real,
                                from_real, w)
        # the hub aggregate is the sum over pointing nodes
        agg = x.sum(axis=0)
        c = np.concatenate([agg @ w.weight_in.value + w.bias_in.value,
                            (to_real[None, :] @ x)[0] @ w.weight_out.value
                            + w.bias_out.value])
        z = 1 / (1 + np.exp(-(c @ w.weight_update.value
                              + sat @ w.u_update.value)))
        r = 1 / (1 + np.exp(-(c @ w.weight_reset.value
                              + sat @ w.u_reset.value)))
        cand = np.tanh(c @ w.weight_cand.value + (r * sat) @ w.u_cand.value)
        np.testing.assert_allclose(sat_next.value, (1 - z) * sat + z * cand,
                                   atol=1e-12)

    def test_gradients_flow_through_star(self):
        w = weights_for(3, seed=11)
        g = build_session_graph([1, 2, 3])
        x = tape.Parameter(substream(10, "x").normal(size=(3, 3)))
        star, _ = build_star_graph(g, x.value, theta=1.0, seed=2)
        sat = tape.tmean(x, axis=0)
        out = run_star(star, x, sat, w)
        tape.tsum(tape.mul(out.embeddings, out.embeddings)).backward()
        assert np.abs(x.grad).max() > 0
        assert np.abs(w.weight_in.grad).max() > 0
