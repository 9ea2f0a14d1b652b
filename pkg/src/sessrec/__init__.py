"""Session-based recommendation with dual-granularity contrastive learning.

A numpy library implementing the full pipeline: raw interaction logs to
prefix-augmented sessions (dataio), three graph views per session
(graphs), factor disentanglement with a distance-correlation penalty
(disentangle), gated graph propagation per view (propagation), item- and
factor-level contrastive losses (contrast), soft-attention session
encoding (encoder), dual-head scoring (predictor), and a training /
evaluation / ablation harness with a CLI (harness, cli).
"""

__version__ = "0.1.0"
