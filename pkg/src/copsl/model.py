"""The shared-trunk, per-problem-head network and its gradient routing.

A model conditions on a preference vector p: the trunk (the first
``shared_depth`` hidden layers, rectified) maps p to a shared representation,
and one head per problem (remaining hidden layers plus a sigmoid output
layer) maps that representation to a point in the problem's unit cube. The
backward pass routes gradients asymmetrically: each head receives only its
own problem's gradient, while the trunk accumulates the weighted sum over
problems.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import CheckpointError, ConfigurationError, InputError, InternalError
from .ioutil import atomic_write_bytes, atomic_write_text
from .nn import DenseLayer, ForwardCache, init_layer, layer_backward, layer_forward
from .sampling import RngStream

SIMPLEX_TOLERANCE = 1e-9

CHECKPOINT_MAGIC = "copsl-checkpoint"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class ModelArchitecture:
    """Static shape of a model.

    ``shared_depth`` counts how many leading hidden layers form the trunk;
    the output layer is always problem-specific. ``output_dims`` lists the
    decision-space dimension of each problem, one entry per head.
    """

    num_objectives: int
    hidden_sizes: tuple[int, ...]
    shared_depth: int
    output_dims: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))
        object.__setattr__(self, "output_dims", tuple(int(n) for n in self.output_dims))
        if self.num_objectives < 2:
            raise ConfigurationError(f"need at least 2 objectives, got {self.num_objectives}")
        if not self.output_dims:
            raise ConfigurationError("need at least one problem head")
        if any(h < 1 for h in self.hidden_sizes) or any(n < 1 for n in self.output_dims):
            raise ConfigurationError("all layer sizes must be >= 1")
        if not 0 <= self.shared_depth <= len(self.hidden_sizes):
            raise ConfigurationError(
                f"shared_depth must lie in [0, {len(self.hidden_sizes)}], got {self.shared_depth}"
            )

    @property
    def num_mops(self) -> int:
        return len(self.output_dims)

    def trunk_plan(self) -> list[tuple[int, int]]:
        dims = (self.num_objectives,) + self.hidden_sizes
        return [(dims[i], dims[i + 1]) for i in range(self.shared_depth)]

    def head_plan(self, mop_index: int) -> list[tuple[int, int, str]]:
        dims = (self.num_objectives,) + self.hidden_sizes
        plan = [
            (dims[i], dims[i + 1], "relu")
            for i in range(self.shared_depth, len(self.hidden_sizes))
        ]
        plan.append((dims[len(self.hidden_sizes)], self.output_dims[mop_index], "sigmoid"))
        return plan

    def to_dict(self) -> dict:
        return {
            "num_objectives": self.num_objectives,
            "hidden_sizes": list(self.hidden_sizes),
            "shared_depth": self.shared_depth,
            "output_dims": list(self.output_dims),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ModelArchitecture":
        try:
            return cls(
                num_objectives=int(data["num_objectives"]),
                hidden_sizes=tuple(data["hidden_sizes"]),
                shared_depth=int(data["shared_depth"]),
                output_dims=tuple(data["output_dims"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigurationError(f"malformed architecture description: {exc}") from exc


@dataclass(frozen=True)
class CoPslModel:
    """Trunk layers plus one layer stack per problem."""

    arch: ModelArchitecture
    trunk: tuple[DenseLayer, ...]
    heads: tuple[tuple[DenseLayer, ...], ...]


@dataclass
class ForwardCaches:
    trunk: list[ForwardCache]
    heads: list[list[ForwardCache]]


@dataclass
class ParamGrads:
    """Gradients shaped like the model: per-layer (d_weights, d_biases)."""

    trunk: list[tuple[np.ndarray, np.ndarray]]
    heads: list[list[tuple[np.ndarray, np.ndarray]]] = field(default_factory=list)

    def arrays(self) -> list[np.ndarray]:
        flat: list[np.ndarray] = []
        for dw, db in self.trunk:
            flat.extend((dw, db))
        for head in self.heads:
            for dw, db in head:
                flat.extend((dw, db))
        return flat


def build_model(arch: ModelArchitecture, rng: RngStream) -> CoPslModel:
    """Initialize a model for the given architecture.

    Layers are drawn in a fixed order (trunk first, then heads in problem
    order), so identical streams give bitwise-identical models.
    """
    trunk = tuple(
        init_layer(rng, fan_in, fan_out, "relu") for fan_in, fan_out in arch.trunk_plan()
    )
    heads = tuple(
        tuple(
            init_layer(rng, fan_in, fan_out, activation)
            for fan_in, fan_out, activation in arch.head_plan(i)
        )
        for i in range(arch.num_mops)
    )
    return CoPslModel(arch=arch, trunk=trunk, heads=heads)


def _check_preferences(prefs: np.ndarray, num_objectives: int) -> np.ndarray:
    p = np.asarray(prefs, dtype=np.float64)
    if p.ndim != 2 or p.shape[1] != num_objectives:
        raise InputError(f"expected preferences of shape (batch, {num_objectives}), got {p.shape}")
    if (p < 0.0).any():
        raise InputError("preference components must be nonnegative")
    if np.abs(p.sum(axis=1) - 1.0).max() > SIMPLEX_TOLERANCE:
        raise InputError("preference rows must sum to 1")
    return p


def forward_all(model: CoPslModel, preferences) -> tuple[list[np.ndarray], ForwardCaches]:
    """Run a batch of preference vectors through the trunk and every head.

    Returns one (batch, n_i) matrix of unit-cube outputs per problem plus the
    caches required by :func:`backward_all`.
    """
    x = _check_preferences(preferences, model.arch.num_objectives)
    trunk_caches: list[ForwardCache] = []
    for layer in model.trunk:
        x, cache = layer_forward(layer, x)
        trunk_caches.append(cache)
    outputs: list[np.ndarray] = []
    head_caches: list[list[ForwardCache]] = []
    for head in model.heads:
        h = x
        caches: list[ForwardCache] = []
        for layer in head:
            h, cache = layer_forward(layer, h)
            caches.append(cache)
        outputs.append(h)
        head_caches.append(caches)
    return outputs, ForwardCaches(trunk=trunk_caches, heads=head_caches)


def backward_all(model: CoPslModel, caches: ForwardCaches, output_grads, weights) -> ParamGrads:
    """Route gradients: own loss per head, weighted sum into the trunk.

    ``output_grads[i]`` is dL_i/d(head-i output). Head i's parameter
    gradients are exactly the backpropagation of L_i; trunk parameter
    gradients are the backpropagation of sum_i w_i L_i.
    """
    arch = model.arch
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (arch.num_mops,):
        raise InputError(f"expected {arch.num_mops} weights, got shape {w.shape}")
    if (w < 0.0).any() or not np.isfinite(w).all():
        raise InputError("weights must be finite and nonnegative")
    if len(output_grads) != arch.num_mops:
        raise InternalError(f"expected {arch.num_mops} output gradients, got {len(output_grads)}")

    head_grads: list[list[tuple[np.ndarray, np.ndarray]]] = []
    trunk_upstream: np.ndarray | None = None
    for i, head in enumerate(model.heads):
        upstream = np.asarray(output_grads[i], dtype=np.float64)
        grads_rev: list[tuple[np.ndarray, np.ndarray]] = []
        for layer, cache in zip(reversed(head), reversed(caches.heads[i])):
            if upstream.shape != cache.pre_activation.shape:
                raise InternalError(
                    f"gradient shape {upstream.shape} does not match head {i} cache"
                )
            dw, db, upstream = layer_backward(layer, cache, upstream)
            grads_rev.append((dw, db))
        head_grads.append(grads_rev[::-1])
        contribution = w[i] * upstream
        trunk_upstream = contribution if trunk_upstream is None else trunk_upstream + contribution

    trunk_grads: list[tuple[np.ndarray, np.ndarray]] = []
    upstream = trunk_upstream
    for layer, cache in zip(reversed(model.trunk), reversed(caches.trunk)):
        dw, db, upstream = layer_backward(layer, cache, upstream)
        trunk_grads.append((dw, db))
    return ParamGrads(trunk=trunk_grads[::-1], heads=head_grads)


# ---------------------------------------------------------------------------
# Parameter bookkeeping
# ---------------------------------------------------------------------------


def iter_layers(model: CoPslModel):
    """All layers in canonical order: trunk, then heads in problem order."""
    yield from model.trunk
    for head in model.heads:
        yield from head


def parameter_arrays(model: CoPslModel) -> list[np.ndarray]:
    flat: list[np.ndarray] = []
    for layer in iter_layers(model):
        flat.extend((layer.weights, layer.biases))
    return flat


def with_parameters(model: CoPslModel, arrays) -> CoPslModel:
    """Rebuild the model from a flat array list in canonical order."""
    it = iter(arrays)

    def rebuild(layer: DenseLayer) -> DenseLayer:
        weights = next(it)
        biases = next(it)
        if weights.shape != layer.weights.shape or biases.shape != layer.biases.shape:
            raise InternalError("replacement parameters have the wrong shape")
        return DenseLayer(weights=weights, biases=biases, activation=layer.activation)

    trunk = tuple(rebuild(layer) for layer in model.trunk)
    heads = tuple(tuple(rebuild(layer) for layer in head) for head in model.heads)
    return CoPslModel(arch=model.arch, trunk=trunk, heads=heads)


def count_params(model: CoPslModel) -> int:
    """Total scalar parameters: sum of fan_in * fan_out + fan_out per layer."""
    return sum(layer.weights.size + layer.biases.size for layer in iter_layers(model))


def count_flops(model: CoPslModel, batch: int) -> int:
    """Forward multiply-accumulate count, two FLOPs per MAC, times the batch.

    Bias additions and activations are excluded; only the dense weight
    products are counted.
    """
    if batch < 1:
        raise InputError(f"batch must be >= 1, got {batch}")
    return batch * sum(2 * layer.weights.size for layer in iter_layers(model))


def enumerate_shared_variants(
    num_objectives: int, hidden_sizes, num_mops: int, output_dims
) -> list[ModelArchitecture]:
    """One architecture per shared depth, from fully separate to fully shared."""
    hidden = tuple(int(h) for h in hidden_sizes)
    if not hidden:
        raise ConfigurationError("need at least one hidden layer to enumerate variants")
    if isinstance(output_dims, int):
        dims = (output_dims,) * num_mops
    else:
        dims = tuple(int(n) for n in output_dims)
    if len(dims) != num_mops:
        raise ConfigurationError(f"expected {num_mops} output dims, got {len(dims)}")
    return [
        ModelArchitecture(num_objectives, hidden, depth, dims)
        for depth in range(len(hidden) + 1)
    ]


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------


def save_checkpoint(model: CoPslModel, path: str, metadata: dict | None = None) -> None:
    """Write a self-describing checkpoint.

    Layout: one JSON header line (format name, version, architecture,
    optional metadata), then the raw little-endian float64 parameter data in
    canonical layer order, weights before biases.
    """
    header = {
        "format": CHECKPOINT_MAGIC,
        "version": CHECKPOINT_VERSION,
        "architecture": model.arch.to_dict(),
        "metadata": metadata or {},
    }
    body = b"".join(
        np.ascontiguousarray(a, dtype="<f8").tobytes() for a in parameter_arrays(model)
    )
    atomic_write_bytes(path, json.dumps(header, sort_keys=True).encode("utf-8") + b"\n" + body)


def load_checkpoint(path: str, expected_objectives: int | None = None) -> tuple[CoPslModel, dict]:
    """Read a checkpoint back; returns the model and the stored metadata."""
    try:
        with open(path, "rb") as handle:
            raw = handle.read()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path!r}: {exc}") from exc
    newline = raw.find(b"\n")
    if newline < 0:
        raise CheckpointError("checkpoint has no header line")
    try:
        header = json.loads(raw[:newline].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"checkpoint header is corrupt: {exc}") from exc
    if not isinstance(header, dict) or header.get("format") != CHECKPOINT_MAGIC:
        raise CheckpointError("not a model checkpoint")
    if header.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"unsupported checkpoint version {header.get('version')!r}, expected {CHECKPOINT_VERSION}"
        )
    try:
        arch = ModelArchitecture.from_dict(header["architecture"])
    except (KeyError, ConfigurationError) as exc:
        raise CheckpointError(f"checkpoint architecture is invalid: {exc}") from exc
    if expected_objectives is not None and arch.num_objectives != expected_objectives:
        raise CheckpointError(
            f"checkpoint has {arch.num_objectives} objectives, expected {expected_objectives}"
        )

    shapes: list[tuple[int, ...]] = []
    for fan_in, fan_out in arch.trunk_plan():
        shapes.extend([(fan_out, fan_in), (fan_out,)])
    for i in range(arch.num_mops):
        for fan_in, fan_out, _ in arch.head_plan(i):
            shapes.extend([(fan_out, fan_in), (fan_out,)])
    expected_bytes = 8 * sum(int(np.prod(s)) for s in shapes)
    body = raw[newline + 1 :]
    if len(body) != expected_bytes:
        raise CheckpointError(
            f"checkpoint body has {len(body)} bytes, expected {expected_bytes} (truncated or padded)"
        )

    flat = np.frombuffer(body, dtype="<f8")
    arrays: list[np.ndarray] = []
    offset = 0
    for shape in shapes:
        size = int(np.prod(shape))
        arrays.append(flat[offset : offset + size].reshape(shape).astype(np.float64))
        offset += size

    it = iter(arrays)
    trunk = tuple(
        DenseLayer(weights=next(it), biases=next(it), activation="relu")
        for _ in arch.trunk_plan()
    )
    heads = tuple(
        tuple(
            DenseLayer(weights=next(it), biases=next(it), activation=activation)
            for _, _, activation in arch.head_plan(i)
        )
        for i in range(arch.num_mops)
    )
    metadata = header.get("metadata", {})
    return CoPslModel(arch=arch, trunk=trunk, heads=heads), metadata


def export_architecture(arch: ModelArchitecture, path: str) -> None:
    """Write the architecture alone as standalone JSON."""
    atomic_write_text(path, json.dumps(arch.to_dict(), indent=2, sort_keys=True) + "\n")
