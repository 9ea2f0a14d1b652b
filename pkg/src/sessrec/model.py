"""Batch assembly and the end-to-end forward pass.

Sessions are padded into dense (B, n, ...) arrays so one pass serves a
whole batch; masks keep padded slots from ever touching a real value.
The training forward runs the original channel, the per-factor channels
over similarity-weighted edges, and the star (or dropout) augmentation
channel, then assembles the prediction, contrastive and independence
terms.  Inference reuses the original channel and the projections only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tape
from .contrast import ContrastConfig
from .disentangle import independence_loss, project
from .encoder import encode, encode_factors
from .graphs import build_session_graph
from .params import ParameterSet
from .predictor import (ScoreVector, catalog_factor_embeddings,
                        prediction_loss, score, total_loss)
from .propagation import ggnn_step, star_step
from .rng import substream
from .tape import Tensor

VARIANTS = ("full", "fcl", "star", "fp")


@dataclass
class PackedBatch:
    node_ids: np.ndarray       # (B, n) catalog indices, 0-padded
    node_mask: np.ndarray      # (B, n) 1 on real node slots
    adj_in: np.ndarray         # (B, n, n) degree-normalized, 0-padded
    adj_out: np.ndarray        # (B, n, n)
    edge_out: np.ndarray       # (B, n, n) binary pattern
    alias: np.ndarray          # (B, T) position -> node slot
    pos_mask: np.ndarray       # (B, T) 1 on real positions
    last_pos: np.ndarray       # (B,)
    lengths: np.ndarray        # (B,)
    n_nodes: np.ndarray        # (B,)
    targets: np.ndarray        # (B,)
    session_indices: np.ndarray  # (B,) stable example ids for rng streams

    @property
    def size(self) -> int:
        return len(self.targets)


def pack_batch(examples, session_indices=None) -> PackedBatch:
    """Pad a list of prefix examples into one dense batch.

    ``session_indices`` are the stable per-example ids used to key the
    random substreams; they default to 0..B-1.
    """
    graphs = [build_session_graph(ex.prefix) for ex in examples]
    b = len(examples)
    n = max(g.n_nodes for g in graphs)
    t = max(len(ex.prefix) for ex in examples)

    node_ids = np.zeros((b, n), dtype=np.int64)
    node_mask = np.zeros((b, n))
    adj_in = np.zeros((b, n, n))
    adj_out = np.zeros((b, n, n))
    edge_out = np.zeros((b, n, n))
    alias = np.zeros((b, t), dtype=np.int64)
    pos_mask = np.zeros((b, t))
    lengths = np.empty(b, dtype=np.int64)
    n_nodes = np.empty(b, dtype=np.int64)
    targets = np.empty(b, dtype=np.int64)

    for i, (ex, g) in enumerate(zip(examples, graphs)):
        k, ln = g.n_nodes, len(ex.prefix)
        node_ids[i, :k] = g.nodes
        node_mask[i, :k] = 1.0
        adj_in[i, :k, :k] = g.adj_in
        adj_out[i, :k, :k] = g.adj_out
        edge_out[i, :k, :k] = g.edge_out
        alias[i, :ln] = g.alias
        pos_mask[i, :ln] = 1.0
        lengths[i] = ln
        n_nodes[i] = k
        targets[i] = ex.target

    if session_indices is None:
        session_indices = np.arange(b)
    return PackedBatch(node_ids, node_mask, adj_in, adj_out, edge_out,
                       alias, pos_mask, last_pos=lengths - 1, lengths=lengths,
                       n_nodes=n_nodes, targets=targets,
                       session_indices=np.asarray(session_indices, dtype=np.int64))


def _gather_sequence(h, pack: PackedBatch):
    """Lay node states back along positions: (B, n, d) -> (B, T, d)."""
    b_idx = np.arange(pack.size)[:, None]
    return tape.getitem(h, (b_idx, pack.alias))


def _run_channel(x, adj_in, adj_out, weights):
    for _ in range(weights.layers):
        x = ggnn_step(x, adj_in, adj_out, weights)
    return x


def _factor_adjacency(f0_k, pack: PackedBatch):
    """Cosine of the raw factor embeddings at the session's edge slots.

    Built on the tape so edge weights pass gradient back into the
    projections; signed, unclamped, incoming view is the transpose.
    """
    unit = tape.normalize_rows(f0_k)
    sim = tape.matmul(unit, tape.swap_last(unit))
    a_out = tape.mul(sim, Tensor(pack.edge_out))
    return tape.swap_last(a_out), a_out


def _star_edges(pack: PackedBatch, theta, seed, epoch):
    """Sample hub edge indicators per session; padded slots stay 0."""
    b, n = pack.node_ids.shape
    to_real = np.zeros((b, n))
    from_real = np.zeros((b, n))
    for i in range(b):
        k = int(pack.n_nodes[i])
        rng = substream(seed, "star", epoch, int(pack.session_indices[i]))
        draws = rng.random((2, k))
        to_real[i, :k] = draws[0] < theta
        from_real[i, :k] = draws[1] < theta
    return to_real, from_real


def _dropout_adjacency(pack: PackedBatch, edge_rate, node_rate, seed, epoch):
    """Perturbed copy of each session's pattern for the dropout variant.

    Edges vanish independently; nodes other than the last-position node
    are isolated (row and column cleared); the survivors are re-
    normalized by degree.
    """
    b, n = pack.node_ids.shape
    pattern = np.zeros_like(pack.edge_out)
    for i in range(b):
        k = int(pack.n_nodes[i])
        rng = substream(seed, "dropout", epoch, int(pack.session_indices[i]))
        keep_edge = rng.random((k, k)) >= edge_rate
        pat = pack.edge_out[i, :k, :k] * keep_edge
        node_draws = rng.random(k)
        last_slot = int(pack.alias[i, pack.last_pos[i]])
        for slot in range(k):
            if slot != last_slot and node_draws[slot] < node_rate:
                pat[slot, :] = 0.0
                pat[:, slot] = 0.0
        pattern[i, :k, :k] = pat

    out_deg = pattern.sum(axis=2, keepdims=True)
    adj_out = np.divide(pattern, out_deg, out=np.zeros_like(pattern),
                        where=out_deg > 0)
    pat_t = np.swapaxes(pattern, 1, 2)
    in_deg = pat_t.sum(axis=2, keepdims=True)
    adj_in = np.divide(pat_t, in_deg, out=np.zeros_like(pattern),
                       where=in_deg > 0)
    return adj_in, adj_out


def _masked_session_mean(per_node, pack: PackedBatch):
    """Mean over real nodes per session, then mean over sessions with
    at least 2 nodes; returns a scalar tensor (0 if none qualify)."""
    session_ok = (pack.n_nodes >= 2).astype(np.float64)
    if session_ok.sum() == 0:
        return Tensor(np.float64(0.0))
    inv = np.divide(1.0, pack.n_nodes, where=pack.n_nodes > 0,
                    out=np.zeros(pack.size)) * session_ok
    masked = tape.mul(per_node, Tensor(pack.node_mask))
    per_session = tape.mul(tape.tsum(masked, axis=-1), Tensor(inv))
    return tape.mul(tape.tsum(per_session),
                    Tensor(np.float64(1.0 / session_ok.sum())))


def _pairwise_terms(anchor, positive, partner, neg_idx, disc):
    """softplus(-H_pos) + mean_j softplus(H_neg_j) per node slot."""
    pos = disc.score(anchor, positive)
    b_idx = np.arange(anchor.value.shape[0])[:, None, None]
    i_idx = np.arange(anchor.value.shape[1])[None, :, None]
    neg = disc.score(tape.getitem(anchor, (b_idx, i_idx)),
                     tape.getitem(partner, (b_idx, neg_idx)))
    pos_term = tape.softplus(tape.mul(pos, Tensor(np.float64(-1.0))))
    neg_term = tape.tmean(tape.softplus(neg), axis=-1)
    return tape.add(pos_term, neg_term)


def _negative_draws(pack: PackedBatch, seed, epoch, stream_tag, per, count=1):
    """Per-session negative slot indices, shape (count, B, n, per).

    ``count`` consecutive draws come from one substream per session, so
    factor levels consume the same stream in sequence.
    """
    b, n = pack.node_ids.shape
    out = np.zeros((count, b, n, per), dtype=np.int64)
    for i in range(b):
        k = int(pack.n_nodes[i])
        if k < 2:
            continue
        rng = substream(seed, "negatives", epoch,
                        int(pack.session_indices[i]), stream_tag)
        for c in range(count):
            draws = rng.integers(0, k - 1, size=(k, per))
            anchors = np.arange(k)[:, None]
            out[c, i, :k] = draws + (draws >= anchors)
    return out


@dataclass
class ForwardResult:
    loss: object               # scalar Tensor
    prediction: object
    contrastive: object
    independence: object
    scores: ScoreVector


def _readout(params: ParameterSet, pack: PackedBatch, h_orig,
             normalize_scores: bool):
    seq = _gather_sequence(h_orig, pack)
    e_item = encode(seq, params.attn_item, pack.last_pos, pack.pos_mask,
                    normalize_scores)
    orig_factors = project(h_orig, params.proj)
    factor_seqs = [_gather_sequence(f, pack) for f in orig_factors]
    e_factor = encode_factors(factor_seqs, params.attn_factors, pack.last_pos,
                              pack.pos_mask, normalize_scores)
    return e_item, e_factor, orig_factors


def training_forward(params: ParameterSet, pack: PackedBatch, cfg,
                     epoch: int) -> ForwardResult:
    """Full objective for one padded batch.

    ``cfg`` carries the run configuration (see harness.TrainConfig).
    The variant switches: ``fcl`` drops the factor channels and their
    contrastive term, ``star`` swaps the hub augmentation for graph
    dropout, ``fp`` scores with the item head alone.
    """
    if cfg.variant not in VARIANTS:
        raise ValueError(f"unknown variant {cfg.variant!r}")
    x0 = tape.getitem(params.embeddings, pack.node_ids)
    h_orig = _run_channel(x0, Tensor(pack.adj_in), Tensor(pack.adj_out),
                          params.ggnn_original)

    # augmentation channel for the item-level contrast
    if cfg.variant == "star":
        adj_in_d, adj_out_d = _dropout_adjacency(
            pack, cfg.dropout_edge, cfg.dropout_node, cfg.seed, epoch)
        h_aug = _run_channel(x0, Tensor(adj_in_d), Tensor(adj_out_d),
                             params.ggnn_star)
    else:
        seq0 = _gather_sequence(x0, pack)
        masked0 = tape.mul(seq0, Tensor(pack.pos_mask[..., None]))
        x_sat = tape.mul(tape.tsum(masked0, axis=-2),
                         Tensor((1.0 / pack.lengths)[:, None]))
        to_real, from_real = _star_edges(pack, cfg.theta, cfg.seed, epoch)
        h_aug, sat = x0, x_sat
        for _ in range(params.ggnn_star.layers):
            h_aug, sat = star_step(h_aug, sat, Tensor(pack.adj_in),
                                   Tensor(pack.adj_out), to_real, from_real,
                                   params.ggnn_star)

    ccfg = ContrastConfig(alpha=cfg.alpha,
                          negatives_per_positive=cfg.negatives_per_positive,
                          factor_negatives=cfg.factor_negatives)

    neg_item = _negative_draws(pack, cfg.seed, epoch, 0,
                               ccfg.negatives_per_positive)[0]
    item_terms = _pairwise_terms(h_orig, h_aug, h_aug, neg_item,
                                 params.disc_item)
    l_item = _masked_session_mean(item_terms, pack)

    e_item, e_factor, orig_factors = _readout(params, pack, h_orig,
                                              cfg.normalize_attention)

    f0 = project(x0, params.proj)
    if cfg.variant == "fcl":
        l_contrast = l_item
    else:
        neg_fac = _negative_draws(pack, cfg.seed, epoch, 1,
                                  ccfg.negatives_per_positive,
                                  count=params.proj.num_factors)
        l_factor = None
        for k in range(params.proj.num_factors):
            a_in, a_out = _factor_adjacency(f0[k], pack)
            h_fac = _run_channel(f0[k], a_in, a_out, params.ggnn_factors[k])
            partner = orig_factors[k] if ccfg.factor_negatives == "within_view" \
                else h_fac
            terms = _pairwise_terms(orig_factors[k], h_fac, partner,
                                    neg_fac[k], params.disc_factor)
            lk = _masked_session_mean(terms, pack)
            l_factor = lk if l_factor is None else tape.add(l_factor, lk)
        l_contrast = tape.add(
            tape.mul(l_item, Tensor(np.float64(ccfg.alpha))),
            tape.mul(l_factor, Tensor(np.float64(1.0 - ccfg.alpha))))

    rows = np.nonzero(pack.node_mask)
    l_ind = independence_loss([tape.getitem(f, rows) for f in f0])

    catalog_factors = catalog_factor_embeddings(params.embeddings, params.proj)
    sv = score(e_item, e_factor, params.embeddings,
               catalog_factors=catalog_factors,
               use_factor_head=cfg.variant != "fp")
    l_pred = prediction_loss(sv, pack.targets)
    loss = total_loss(l_pred, l_contrast, l_ind, cfg.beta_cl, cfg.beta_ind)
    return ForwardResult(loss=loss, prediction=l_pred, contrastive=l_contrast,
                         independence=l_ind, scores=sv)


def score_batch(params: ParameterSet, pack: PackedBatch, cfg) -> np.ndarray:
    """Inference probabilities (B, N); only the original channel runs."""
    x0 = tape.getitem(Tensor(params.embeddings.value), pack.node_ids)
    h_orig = _run_channel(x0, Tensor(pack.adj_in), Tensor(pack.adj_out),
                          _frozen(params.ggnn_original))
    frozen = _frozen_set(params)
    e_item, e_factor, _ = _readout(frozen, pack, h_orig,
                                   cfg.normalize_attention)
    catalog = Tensor(params.embeddings.value)
    catalog_factors = catalog_factor_embeddings(catalog, frozen.proj)
    sv = score(e_item, e_factor, catalog, catalog_factors=catalog_factors,
               use_factor_head=cfg.variant != "fp")
    return np.asarray(sv.combined.value)


def _frozen(weights):
    """Copy of a weight container with grad tracking off."""
    import copy
    out = copy.copy(weights)
    for name in vars(weights):
        v = getattr(weights, name)
        if isinstance(v, Tensor):
            setattr(out, name, Tensor(v.value))
    return out


def _frozen_set(params: ParameterSet) -> ParameterSet:
    from .contrast import Discriminator
    from .disentangle import FactorProjection
    proj = FactorProjection(
        params.proj.num_factors, params.proj.input_dim, params.proj.factor_dim,
        [Tensor(w.value) for w in params.proj.weights],
        [Tensor(b.value) for b in params.proj.biases],
        params.proj.bias_inside)
    return ParameterSet(
        embeddings=Tensor(params.embeddings.value),
        proj=proj,
        ggnn_original=_frozen(params.ggnn_original),
        ggnn_factors=[_frozen(g) for g in params.ggnn_factors],
        ggnn_star=_frozen(params.ggnn_star),
        attn_item=_frozen(params.attn_item),
        attn_factors=[_frozen(a) for a in params.attn_factors],
        disc_item=params.disc_item,
        disc_factor=params.disc_factor,
    )
