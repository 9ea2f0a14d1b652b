"""Gated graph propagation over session graphs and their views.

One shared cell implementation serves all three channels; only the
adjacency pair and the weight set differ.  Inputs may be single graphs
(n, d) or padded batches (B, n, d); everything broadcasts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tape
from .tape import Parameter

from .graphs import FactorAdjacency, SessionGraph, StarGraph


@dataclass
class GGNNWeights:
    """Weights of one gated propagation channel.

    The incoming and outgoing aggregations get separate linear maps and
    biases; the update and reset gates and the candidate state each mix
    the concatenated aggregation (width 2d) with the previous state.
    Gates carry no bias terms.
    """
    weight_in: Parameter       # (d, d)
    weight_out: Parameter      # (d, d)
    bias_in: Parameter         # (d,)
    bias_out: Parameter        # (d,)
    weight_update: Parameter   # (2d, d)
    weight_reset: Parameter    # (2d, d)
    weight_cand: Parameter     # (2d, d)
    u_update: Parameter        # (d, d)
    u_reset: Parameter         # (d, d)
    u_cand: Parameter          # (d, d)
    layers: int = 1

    @classmethod
    def init(cls, dim, rng, layers=1):
        stdv = 1.0 / np.sqrt(dim)

        def u(*shape):
            return Parameter(rng.uniform(-stdv, stdv, shape))

        return cls(
            weight_in=u(dim, dim), weight_out=u(dim, dim),
            bias_in=u(dim), bias_out=u(dim),
            weight_update=u(2 * dim, dim), weight_reset=u(2 * dim, dim),
            weight_cand=u(2 * dim, dim),
            u_update=u(dim, dim), u_reset=u(dim, dim), u_cand=u(dim, dim),
            layers=layers,
        )

    def named_parameters(self, prefix):
        for name in ("weight_in", "weight_out", "bias_in", "bias_out",
                     "weight_update", "weight_reset", "weight_cand",
                     "u_update", "u_reset", "u_cand"):
            yield f"{prefix}.{name}", getattr(self, name)


@dataclass
class ChannelOutput:
    """Per-node embeddings produced by one propagation channel."""
    embeddings: object         # Tensor, (..., n, d)
    channel: str


def _aggregate(x, adj_in, adj_out, w: GGNNWeights, star_terms=None):
    """Concatenated neighborhood summary [incoming, outgoing] + biases.

    ``star_terms``, when given, is a pair of extra contribution tensors
    added inside the respective halves before the linear maps; the base
    matmuls stay untouched, which keeps a hub with no edges bit-identical
    to plain propagation.
    """
    agg_in = tape.matmul(tape.as_tensor(adj_in), x)
    agg_out = tape.matmul(tape.as_tensor(adj_out), x)
    if star_terms is not None:
        extra_in, extra_out = star_terms
        if extra_in is not None:
            agg_in = tape.add(agg_in, extra_in)
        if extra_out is not None:
            agg_out = tape.add(agg_out, extra_out)
    part_in = tape.add(tape.matmul(agg_in, w.weight_in), w.bias_in)
    part_out = tape.add(tape.matmul(agg_out, w.weight_out), w.bias_out)
    return tape.concat([part_in, part_out], axis=-1)


def _gated_update(x, c, w: GGNNWeights):
    z = tape.sigmoid(tape.add(tape.matmul(c, w.weight_update),
                              tape.matmul(x, w.u_update)))
    r = tape.sigmoid(tape.add(tape.matmul(c, w.weight_reset),
                              tape.matmul(x, w.u_reset)))
    cand = tape.tanh(tape.add(tape.matmul(c, w.weight_cand),
                              tape.matmul(tape.mul(r, x), w.u_cand)))
    one = tape.Tensor(np.float64(1.0))
    return tape.add(tape.mul(tape.sub(one, z), x), tape.mul(z, cand))


def ggnn_step(x, adj_in, adj_out, w: GGNNWeights, star_terms=None):
    """One propagation layer: aggregate neighbors, then gate the update."""
    x = tape.as_tensor(x)
    c = _aggregate(x, adj_in, adj_out, w, star_terms)
    return _gated_update(x, c, w)


def run_layers(x, adj_in, adj_out, w: GGNNWeights):
    x = tape.as_tensor(x)
    for _ in range(w.layers):
        x = ggnn_step(x, adj_in, adj_out, w)
    return x


def run_original(graph: SessionGraph, x0, w: GGNNWeights) -> ChannelOutput:
    """Propagate item embeddings over the observed transition graph."""
    out = run_layers(x0, graph.adj_in, graph.adj_out, w)
    return ChannelOutput(embeddings=out, channel="original")


def run_factor(adj: FactorAdjacency, f0, w: GGNNWeights) -> ChannelOutput:
    """Propagate one factor view over its similarity-weighted edges."""
    out = run_layers(f0, adj.matrix_in, adj.matrix, w)
    return ChannelOutput(embeddings=out, channel=f"factor{adj.factor}")


def star_step(x, x_sat, adj_in, adj_out, to_real, from_real, w: GGNNWeights):
    """One layer over a star-augmented graph, hub row updated separately.

    ``x`` holds the real nodes (..., n, d), ``x_sat`` the hub state
    (..., d).  ``to_real``/``from_real`` are the 0/1 hub edge indicator
    vectors (..., n).  The real-node update reuses exactly the base
    adjacency matmuls and adds the hub contribution as a separate term,
    skipped entirely when no hub edge exists, so a hub with no edges
    leaves the real nodes bit-identical to plain propagation.  Returns
    ``(x_next, x_sat_next)``.
    """
    x = tape.as_tensor(x)
    x_sat = tape.as_tensor(x_sat)
    to_real = np.asarray(to_real, dtype=np.float64)
    from_real = np.asarray(from_real, dtype=np.float64)
    has_edges = bool(to_real.any() or from_real.any())

    star_terms = None
    if has_edges:
        # node i receives the hub state when to_real[i] is set
        sat_col = tape.reshape(x_sat, x_sat.value.shape[:-1] + (1, x_sat.value.shape[-1]))
        extra_in = tape.mul(tape.Tensor(to_real[..., :, None]), sat_col)
        extra_out = tape.mul(tape.Tensor(from_real[..., :, None]), sat_col)
        star_terms = (extra_in, extra_out)

    c = _aggregate(x, adj_in, adj_out, w, star_terms)
    x_next = _gated_update(x, c, w)

    # hub update: it receives from_real nodes and points at to_real nodes
    row_in = tape.matmul(tape.Tensor(from_real[..., None, :]), x)
    row_out = tape.matmul(tape.Tensor(to_real[..., None, :]), x)
    c_sat = tape.concat([
        tape.add(tape.matmul(row_in, w.weight_in), w.bias_in),
        tape.add(tape.matmul(row_out, w.weight_out), w.bias_out),
    ], axis=-1)
    sat_row = tape.reshape(x_sat, x_sat.value.shape[:-1] + (1, x_sat.value.shape[-1]))
    sat_next = _gated_update(sat_row, c_sat, w)
    x_sat_next = tape.reshape(sat_next, x_sat.value.shape)
    return x_next, x_sat_next


def run_star(star: StarGraph, x0, satellite_embedding, w: GGNNWeights) -> ChannelOutput:
    """Propagate over the star view; the returned embeddings exclude the hub."""
    x = tape.as_tensor(x0)
    x_sat = tape.as_tensor(satellite_embedding)
    for _ in range(w.layers):
        x, x_sat = star_step(x, x_sat, star.base.adj_in, star.base.adj_out,
                             star.to_real, star.from_real, w)
    return ChannelOutput(embeddings=x, channel="star")
