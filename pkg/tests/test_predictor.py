"""Dual-head scoring, the training loss, and ranking helpers."""

import numpy as np
import pytest

from oracles import bce_oracle, scores_oracle

from sessrec import tape
from sessrec.disentangle import FactorProjection, project
from sessrec.predictor import (catalog_factor_embeddings, prediction_loss,
                               rank_of, score, top_k_items, total_loss)
from sessrec.rng import substream
from sessrec.tape import Parameter, Tensor


def setup_scoring(seed=0, n=8, d=5, d_f=3, k=2):
    rng = substream(seed, "x")
    catalog = rng.normal(size=(n, d))
    proj = FactorProjection.init(d, d_f, k, substream(seed, "init"))
    e_item = rng.normal(size=d)
    e_factor = rng.normal(size=k * d_f)
    return catalog, proj, e_item, e_factor


class TestScore:
    def test_matches_oracle(self):
        catalog, proj, e_item, e_factor = setup_scoring()
        sv = score(e_item, e_factor, catalog, proj=proj)
        cat_f = np.concatenate([p.value for p in project(catalog, proj)],
                               axis=-1)
        expect = scores_oracle(e_item, e_factor, catalog, cat_f)
        np.testing.assert_allclose(sv.combined.value, expect, atol=1e-10,
                                   rtol=0)

    def test_heads_are_distributions(self):
        catalog, proj, e_item, e_factor = setup_scoring(1)
        sv = score(e_item, e_factor, catalog, proj=proj)
        assert float(tape.tsum(sv.item_head).value) == pytest.approx(1.0)
        assert float(tape.tsum(sv.factor_head).value) == pytest.approx(1.0)
        assert float(tape.tsum(sv.combined).value) == pytest.approx(1.0)

    def test_item_only_head(self):
        catalog, proj, e_item, e_factor = setup_scoring(2)
        sv = score(e_item, e_factor, catalog, proj=proj,
                   use_factor_head=False)
        assert sv.factor_head is None
        np.testing.assert_array_equal(sv.combined.value, sv.item_head.value)

    def test_precomputed_factors_match_proj_path(self):
        catalog, proj, e_item, e_factor = setup_scoring(3)
        cat_f = catalog_factor_embeddings(Tensor(catalog), proj)
        a = score(e_item, e_factor, catalog, catalog_factors=cat_f)
        b = score(e_item, e_factor, catalog, proj=proj)
        np.testing.assert_allclose(a.combined.value, b.combined.value,
                                   atol=1e-12)

    def test_batched_scoring(self):
        catalog, proj, _, _ = setup_scoring(4)
        rng = substream(5, "x")
        e_item = rng.normal(size=(3, 5))
        e_factor = rng.normal(size=(3, 6))
        sv = score(e_item, e_factor, catalog, proj=proj)
        assert sv.combined.value.shape == (3, 8)
        for b in range(3):
            single = score(e_item[b], e_factor[b], catalog, proj=proj)
            np.testing.assert_allclose(sv.combined.value[b],
                                       single.combined.value, atol=1e-10)


class TestPredictionLoss:
    def test_matches_oracle(self):
        catalog, proj, e_item, e_factor = setup_scoring(6)
        sv = score(e_item, e_factor, catalog, proj=proj)
        loss = prediction_loss(sv, target=3)
        expect = bce_oracle(sv.combined.value, 3)
        assert float(loss.value) == pytest.approx(expect, abs=1e-10)

    def test_batch_mean(self):
        catalog, proj, _, _ = setup_scoring(7)
        rng = substream(8, "x")
        e_item = rng.normal(size=(2, 5))
        e_factor = rng.normal(size=(2, 6))
        sv = score(e_item, e_factor, catalog, proj=proj)
        loss = float(prediction_loss(sv, np.array([1, 4])).value)
        singles = []
        for b, t in enumerate([1, 4]):
            row = score(e_item[b], e_factor[b], catalog, proj=proj)
            singles.append(float(prediction_loss(row, t).value))
        assert loss == pytest.approx(np.mean(singles), abs=1e-10)

    def test_clamp_keeps_loss_finite(self):
        p = np.zeros(4)
        p[2] = 1.0
        from sessrec.predictor import ScoreVector
        loss = prediction_loss(ScoreVector(Tensor(p), Tensor(p)), target=0)
        assert np.isfinite(float(loss.value))

    def test_correct_target_lowers_loss(self):
        catalog, proj, e_item, e_factor = setup_scoring(9)
        sv = score(e_item, e_factor, catalog, proj=proj)
        best = int(np.argmax(sv.combined.value))
        worst = int(np.argmin(sv.combined.value))
        l_best = float(prediction_loss(sv, best).value)
        l_worst = float(prediction_loss(sv, worst).value)
        assert l_best < l_worst

    def test_gradient_flows_to_catalog(self):
        rng = substream(10, "x")
        catalog = Parameter(rng.normal(size=(6, 4)))
        e = rng.normal(size=4)
        sv = score(e, None, catalog, use_factor_head=False)
        prediction_loss(sv, 2).backward()
        assert np.abs(catalog.grad).max() > 0


def test_total_loss_weighting():
    out = total_loss(Tensor(np.float64(1.0)), Tensor(np.float64(10.0)),
                     Tensor(np.float64(100.0)), beta_cl=0.05, beta_ind=0.01)
    assert float(out.value) == pytest.approx(1.0 + 0.5 + 1.0)


class TestRanking:
    def test_rank_basic(self):
        p = np.array([0.1, 0.5, 0.2, 0.2])
        assert rank_of(p, 1) == 1
        assert rank_of(p, 0) == 4

    def test_tie_breaks_toward_lower_index(self):
        p = np.array([0.3, 0.3, 0.3])
        assert rank_of(p, 0) == 1
        assert rank_of(p, 1) == 2
        assert rank_of(p, 2) == 3

    def test_top_k_consistent_with_rank(self):
        rng = substream(11, "x")
        p = rng.random(20)
        p[5] = p[7]           # force a tie
        top = set(top_k_items(p, 10).tolist())
        for j in range(20):
            assert (rank_of(p, j) <= 10) == (j in top)
