"""
Trust, then verify the gradients
================================

Every loss here backpropagates through a small reverse-mode tape, so
there is exactly one thing that can silently go wrong: an op with a
bad derivative.  The check below builds a two-session batch, takes the
analytic gradient of the full objective for every weight tensor, and
compares against central finite differences.

With float64 and a 1e-5 step the two agree to about 1e-5 relative or
better; anything near 1e-2 means a broken op.
"""

from sessrec.dataio import Example
from sessrec.gradcheck import gradient_errors
from sessrec.harness import TrainConfig
from sessrec.model import pack_batch, training_forward
from sessrec.params import init_parameters

examples = [Example([0, 1, 2], 3), Example([4, 5, 4], 1)]
pack = pack_batch(examples)
params = init_parameters(n_items=6, dim=3, factor_dim=2, num_factors=2,
                         layers=1, seed=0)
cfg = TrainConfig(dim=3, factor_dim=2, num_factors=2, epochs=1,
                  batch_size=2, seed=0)

errors = gradient_errors(
    lambda: training_forward(params, pack, cfg, epoch=0).loss,
    dict(params.named_parameters()))

width = max(len(n) for n in errors)
for name, err in sorted(errors.items(), key=lambda kv: -kv[1]):
    print(f"{name:<{width}}  {err:.2e}")
print(f"\nworst of {len(errors)} parameter tensors: {max(errors.values()):.2e}")
