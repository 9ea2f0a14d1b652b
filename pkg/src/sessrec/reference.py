"""Published full-scale reference targets.

These numbers describe the two standard benchmark runs at full data
scale with tuned training.  They are documentation, not test oracles:
desk-scale runs cannot and should not reproduce them.  They exist so a
full-scale reimplementation has something concrete to aim at.
"""

DATASET_STATS = {
    "yoochoose1_64": {
        "interactions": 557_248,
        "train_sessions": 369_859,
        "test_sessions": 55_898,
        "items": 16_766,
        "avg_length": 6.16,
    },
    "diginetica": {
        "interactions": 982_961,
        "train_sessions": 719_470,
        "test_sessions": 60_858,
        "items": 43_097,
        "avg_length": 5.12,
    },
}

# Full-scale ranking targets, averaged over 10 runs.
FULL_SCALE_TARGETS = {
    "yoochoose1_64": {"P@10": 0.6509, "M@10": 0.2889,
                      "P@20": 0.7469, "M@20": 0.3289},
    "diginetica": {"P@10": 0.4305, "M@10": 0.1824,
                   "P@20": 0.5501, "M@20": 0.1911},
}

# Full-scale P@20 / M@20 of the ablation variants.
VARIANT_TARGETS = {
    "yoochoose1_64": {
        "full": {"P@20": 0.7469, "M@20": 0.3289},
        "fcl": {"P@20": 0.7391, "M@20": 0.3201},
        "star": {"P@20": 0.7415, "M@20": 0.3227},
        "fp": {"P@20": 0.7388, "M@20": 0.3211},
    },
    "diginetica": {
        "full": {"P@20": 0.5501, "M@20": 0.1911},
        "fcl": {"P@20": 0.5432, "M@20": 0.1895},
        "star": {"P@20": 0.5459, "M@20": 0.1902},
        "fp": {"P@20": 0.5369, "M@20": 0.1889},
    },
}
