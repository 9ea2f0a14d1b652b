"""The full trainable parameter set, its initialization, and checkpoints.

All weights are created in one fixed order from a single named RNG
substream, so a seed pins every initial value regardless of which
variant later trains.  Checkpoints are a flat little-endian float64
binary next to a JSON manifest recording names, shapes, offsets (in
elements) and the run configuration.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .contrast import Discriminator
from .disentangle import FactorProjection
from .encoder import AttentionWeights
from .propagation import GGNNWeights
from .rng import substream
from .tape import Parameter

CHECKPOINT_FORMAT = 1


@dataclass
class ParameterSet:
    embeddings: Parameter
    proj: FactorProjection
    ggnn_original: GGNNWeights
    ggnn_factors: list
    ggnn_star: GGNNWeights
    attn_item: AttentionWeights
    attn_factors: list
    disc_item: Discriminator
    disc_factor: Discriminator

    def named_parameters(self):
        """(name, Parameter) pairs in the fixed checkpoint order."""
        out = [("embeddings", self.embeddings)]
        out.extend(self.proj.named_parameters())
        out.extend(self.ggnn_original.named_parameters("ggnn.original"))
        for k, g in enumerate(self.ggnn_factors):
            out.extend(g.named_parameters(f"ggnn.factor{k}"))
        out.extend(self.ggnn_star.named_parameters("ggnn.star"))
        out.extend(self.attn_item.named_parameters("attention.item"))
        for k, a in enumerate(self.attn_factors):
            out.extend(a.named_parameters(f"attention.factor{k}"))
        out.extend(self.disc_item.named_parameters("discriminator.item"))
        out.extend(self.disc_factor.named_parameters("discriminator.factor"))
        return out

    def parameters(self):
        return [p for _, p in self.named_parameters()]


def init_parameters(n_items, dim, factor_dim, num_factors, layers, seed,
                    disc_form: str = "dot") -> ParameterSet:
    """Create all weights from the ``init`` substream of ``seed``.

    Everything draws uniform from +-1/sqrt(width of its own space):
    embeddings and item-space weights use 1/sqrt(dim), factor-space
    weights 1/sqrt(factor_dim).
    """
    rng = substream(seed, "init")
    stdv = 1.0 / np.sqrt(dim)
    embeddings = Parameter(rng.uniform(-stdv, stdv, (n_items, dim)))
    proj = FactorProjection.init(dim, factor_dim, num_factors, rng)
    ggnn_original = GGNNWeights.init(dim, rng, layers)
    ggnn_factors = [GGNNWeights.init(factor_dim, rng, layers)
                    for _ in range(num_factors)]
    ggnn_star = GGNNWeights.init(dim, rng, layers)
    attn_item = AttentionWeights.init(dim, rng)
    attn_factors = [AttentionWeights.init(factor_dim, rng)
                    for _ in range(num_factors)]
    disc_item = Discriminator.init(disc_form, dim, rng)
    disc_factor = Discriminator.init(disc_form, factor_dim, rng)
    return ParameterSet(embeddings, proj, ggnn_original, ggnn_factors,
                        ggnn_star, attn_item, attn_factors, disc_item,
                        disc_factor)


class CheckpointError(Exception):
    pass


def _paths(base):
    base = Path(base)
    if base.suffix in (".bin", ".json"):
        base = base.with_suffix("")
    return base.with_suffix(".bin"), base.with_suffix(".json")


def save_checkpoint(base, params: ParameterSet, config: dict, n_items: int):
    """Write ``<base>.bin`` and ``<base>.json``."""
    bin_path, json_path = _paths(base)
    entries = []
    chunks = []
    offset = 0
    for name, p in params.named_parameters():
        a = np.ascontiguousarray(p.value, dtype="<f8")
        entries.append({"name": name, "shape": list(a.shape), "offset": offset})
        chunks.append(a.tobytes())
        offset += a.size
    bin_path.write_bytes(b"".join(chunks))
    manifest = {
        "format_version": CHECKPOINT_FORMAT,
        "total_elements": offset,
        "n_items": int(n_items),
        "config": config,
        "entries": entries,
    }
    json_path.write_text(json.dumps(manifest, indent=1), encoding="utf-8")


def load_checkpoint(base):
    """Rebuild a ParameterSet from ``<base>.bin`` / ``<base>.json``.

    The structural fields of the stored config (dims, factor count,
    layers, discriminator form) drive reconstruction; every stored
    array must match its rebuilt shape exactly.  Returns
    ``(params, config, n_items)``.
    """
    bin_path, json_path = _paths(base)
    try:
        manifest = json.loads(json_path.read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise CheckpointError(f"cannot read manifest {json_path}: {exc}") from exc
    if manifest.get("format_version") != CHECKPOINT_FORMAT:
        raise CheckpointError(
            f"unsupported checkpoint format {manifest.get('format_version')!r}")
    try:
        raw = np.frombuffer(bin_path.read_bytes(), dtype="<f8")
    except OSError as exc:
        raise CheckpointError(f"cannot read weights {bin_path}: {exc}") from exc
    if raw.size != manifest["total_elements"]:
        raise CheckpointError(
            f"{bin_path}: holds {raw.size} elements, manifest says "
            f"{manifest['total_elements']}")

    config = manifest["config"]
    n_items = int(manifest["n_items"])
    params = init_parameters(
        n_items=n_items, dim=int(config["dim"]),
        factor_dim=int(config["factor_dim"]),
        num_factors=int(config["num_factors"]),
        layers=int(config["layers"]), seed=int(config.get("seed", 0)),
        disc_form=config.get("disc_form", "dot"))

    stored = {e["name"]: e for e in manifest["entries"]}
    expected = [name for name, _ in params.named_parameters()]
    missing = [n for n in expected if n not in stored]
    extra = [n for n in stored if n not in expected]
    if missing or extra:
        raise CheckpointError(
            f"parameter name mismatch: missing={missing} extra={extra}")
    for name, p in params.named_parameters():
        e = stored[name]
        shape = tuple(e["shape"])
        if shape != p.value.shape:
            raise CheckpointError(
                f"{name}: stored shape {shape} != expected {p.value.shape}")
        size = int(np.prod(shape)) if shape else 1
        block = raw[e["offset"]:e["offset"] + size]
        if block.size != size:
            raise CheckpointError(f"{name}: binary blob truncated")
        p.value = block.reshape(shape).astype(np.float64).copy()
        p.grad = None
    return params, config, n_items
