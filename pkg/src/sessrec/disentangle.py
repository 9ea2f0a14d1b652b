"""Factor projections and the distance-correlation independence penalty.

Item embeddings are mapped to K low-dimensional factor spaces by
per-factor sigmoid projections.  Training pushes the factors apart with
a penalty summing pairwise distance correlation over all ordered factor
pairs, so that each factor captures a distinct aspect of the items.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tape
from .tape import Parameter, Tensor


@dataclass
class FactorProjection:
    """K independent projections from item space to factor space."""
    num_factors: int
    input_dim: int
    factor_dim: int
    weights: list = field(default_factory=list)    # K Parameters (d, d_f)
    biases: list = field(default_factory=list)     # K Parameters (d_f,)
    bias_inside: bool = False

    @classmethod
    def init(cls, input_dim, factor_dim, num_factors, rng, bias_inside=False):
        stdv = 1.0 / np.sqrt(factor_dim)
        weights = [Parameter(rng.uniform(-stdv, stdv, (input_dim, factor_dim)))
                   for _ in range(num_factors)]
        biases = [Parameter(rng.uniform(-stdv, stdv, factor_dim))
                  for _ in range(num_factors)]
        return cls(num_factors, input_dim, factor_dim, weights, biases, bias_inside)

    def named_parameters(self):
        for k in range(self.num_factors):
            yield f"factor_proj.{k}.weight", self.weights[k]
            yield f"factor_proj.{k}.bias", self.biases[k]


def project(items, proj: FactorProjection):
    """Map item embeddings (..., d) to K factor views, each (..., d_f).

    The gate squashes the linear map through a sigmoid; by default the
    bias is added after the squash, ``bias_inside`` moves it before.
    """
    x = tape.as_tensor(items)
    out = []
    for k in range(proj.num_factors):
        h = tape.matmul(x, proj.weights[k])
        if proj.bias_inside:
            out.append(tape.sigmoid(tape.add(h, proj.biases[k])))
        else:
            out.append(tape.add(tape.sigmoid(h), proj.biases[k]))
    return out


def _centered_distances(x: Tensor) -> Tensor:
    """Double-centered pairwise Euclidean distance matrix of rows of x."""
    d = tape.pairwise_distances(x)
    row = tape.tmean(d, axis=1, keepdims=True)
    col = tape.tmean(d, axis=0, keepdims=True)
    grand = tape.tmean(d)
    return tape.add(tape.sub(tape.sub(d, row), col), grand)


def _dcor_from_centered(a: Tensor, b: Tensor):
    dcov2 = tape.tmean(tape.mul(a, b))
    dvar_x2 = tape.tmean(tape.mul(a, a))
    dvar_y2 = tape.tmean(tape.mul(b, b))
    # Degenerate cases carry no usable signal: a factor with zero
    # distance variance, or a squared covariance that cancels to <= 0
    # in floating point, defines the correlation as exactly 0.
    if float(dvar_x2.value) == 0.0 or float(dvar_y2.value) == 0.0:
        return Tensor(np.float64(0.0))
    if float(dcov2.value) <= 0.0:
        return Tensor(np.float64(0.0))
    num = tape.sqrt(dcov2)
    den = tape.sqrt(tape.mul(tape.sqrt(dvar_x2), tape.sqrt(dvar_y2)))
    return tape.div(num, den)


def dcor(x, y):
    """Distance correlation between two samples with matching row count.

    Rows are observations.  Returns a scalar in [0, 1]; independent
    samples score near 0, any exact monotone relation scores 1.
    """
    x = tape.as_tensor(x)
    y = tape.as_tensor(y)
    if x.value.ndim != 2 or y.value.ndim != 2:
        raise ValueError("dcor expects 2-d inputs (rows are observations)")
    if x.value.shape[0] != y.value.shape[0]:
        raise ValueError(
            f"row count mismatch: {x.value.shape[0]} vs {y.value.shape[0]}")
    if x.value.shape[0] < 2:
        raise ValueError("dcor needs at least 2 observations")
    return _dcor_from_centered(_centered_distances(x), _centered_distances(y))


def independence_loss(factors):
    """Sum of dcor over all ordered pairs of factor views.

    ``factors`` is a list of (m, d_f) views of the same m items.  Each
    unordered pair appears twice in the ordered sum and dcor is
    symmetric, so the pair sum is doubled.  With fewer than two factors
    there is nothing to separate and the loss is 0.
    """
    k = len(factors)
    if k < 2:
        return Tensor(np.float64(0.0))
    centered = [_centered_distances(tape.as_tensor(f)) for f in factors]
    total = None
    for i in range(k):
        for j in range(i + 1, k):
            term = _dcor_from_centered(centered[i], centered[j])
            total = term if total is None else tape.add(total, term)
    return tape.mul(total, Tensor(np.float64(2.0)))
