"""Session readout: soft attention over positions, anchored on the last item.

A session embedding is built from the propagated node states laid back
out along the sequence (repeated items share their node state).  Each
position is scored against the last position, the weighted sum is
concatenated with the last state, and a linear merge brings the result
back to embedding width.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tape
from .tape import Parameter


@dataclass
class AttentionWeights:
    query: Parameter           # (d,)
    w_current: Parameter       # (d, d)
    w_last: Parameter          # (d, d)
    w_merge: Parameter         # (2d, d)

    @classmethod
    def init(cls, dim, rng):
        stdv = 1.0 / np.sqrt(dim)
        return cls(
            query=Parameter(rng.uniform(-stdv, stdv, dim)),
            w_current=Parameter(rng.uniform(-stdv, stdv, (dim, dim))),
            w_last=Parameter(rng.uniform(-stdv, stdv, (dim, dim))),
            w_merge=Parameter(rng.uniform(-stdv, stdv, (2 * dim, dim))),
        )

    def named_parameters(self, prefix):
        for name in ("query", "w_current", "w_last", "w_merge"):
            yield f"{prefix}.{name}", getattr(self, name)


def attention_scores(seq, last, w: AttentionWeights):
    """Unnormalized score per position: q . sigmoid(e_i Wc + e_last Wl).

    ``seq`` is (..., T, d); ``last`` is the last position's state
    (..., d).  Scores stay raw by design; see ``encode`` for the
    optional softmax.
    """
    seq = tape.as_tensor(seq)
    last = tape.as_tensor(last)
    last_row = tape.reshape(last, last.value.shape[:-1] + (1, last.value.shape[-1]))
    h = tape.sigmoid(tape.add(tape.matmul(seq, w.w_current),
                              tape.matmul(last_row, w.w_last)))
    d = w.query.value.shape[0]
    q_col = tape.reshape(w.query, (d, 1))
    return tape.matmul(h, q_col)      # (..., T, 1)


def encode(seq, w: AttentionWeights, last_position=None, pos_mask=None,
           normalize_scores: bool = False):
    """Compress position-aligned states (..., T, d) into one embedding (..., d).

    ``last_position`` defaults to the final position; for padded batches
    pass the per-session index array and a 0/1 ``pos_mask`` so padding
    neither scores nor contributes.  ``normalize_scores`` switches the
    raw attention weights to a softmax over (real) positions.
    """
    seq = tape.as_tensor(seq)
    shape = seq.value.shape
    t = shape[-2]

    if last_position is None:
        if seq.value.ndim == 2:
            last = tape.getitem(seq, t - 1)
        else:
            idx = np.full(shape[:-2], t - 1, dtype=np.int64)
            last = _gather_positions(seq, idx)
    else:
        idx = np.asarray(last_position, dtype=np.int64)
        if seq.value.ndim == 2:
            last = tape.getitem(seq, int(idx))
        else:
            last = _gather_positions(seq, idx)

    scores = attention_scores(seq, last, w)
    if pos_mask is not None:
        mask = np.asarray(pos_mask, dtype=np.float64)[..., None]
    else:
        mask = None

    if normalize_scores:
        if mask is not None:
            neg = tape.Tensor((1.0 - mask) * -1e30)
            scores = tape.add(scores, neg)
        alpha = tape.exp(tape.log_softmax(scores, axis=-2))
        if mask is not None:
            alpha = tape.mul(alpha, tape.Tensor(mask))
    else:
        alpha = scores if mask is None else tape.mul(scores, tape.Tensor(mask))

    mixed = tape.tsum(tape.mul(alpha, seq), axis=-2)      # (..., d)
    merged = tape.concat([last, mixed], axis=-1)          # (..., 2d)
    if merged.value.ndim == 1:
        wide = tape.reshape(merged, (1, merged.value.shape[-1]))
        out = tape.matmul(wide, w.w_merge)
        return tape.reshape(out, (out.value.shape[-1],))
    return tape.matmul(merged, w.w_merge)


def _gather_positions(seq, idx):
    """Pick one (d,) row per leading index from (..., T, d)."""
    lead = np.indices(idx.shape)
    return tape.getitem(seq, tuple(lead) + (idx,))


def encode_factors(factor_seqs, weights, last_position=None, pos_mask=None,
                   normalize_scores: bool = False):
    """Encode each factor view with its own attention, concatenated last.

    ``factor_seqs`` is a list of K position-aligned (..., T, d_f)
    tensors; ``weights`` a matching list of AttentionWeights.  Returns
    (..., K * d_f).
    """
    if len(factor_seqs) != len(weights):
        raise ValueError("one attention weight set per factor required")
    parts = [encode(f, w, last_position, pos_mask, normalize_scores)
             for f, w in zip(factor_seqs, weights)]
    return tape.concat(parts, axis=-1)
