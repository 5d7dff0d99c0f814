"""Model assembly, training, evaluation, and checkpointing.

Three architectures share a common trunk of two vertex convolutions, two
pooling stages, and a three-layer dense head; the edge variant threads edge
convolutions around the third vertex convolution and before the head, and
the attention variant gates features entering the first pooling stage.
Default widths put every variant near 300k parameters.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from enum import Enum

import numpy as np

from . import numerics as nm
from .errors import (
    CheckpointVersionError,
    CorruptCheckpointError,
    NumericError,
    ShapeError,
    ValidationError,
)
from .graph import NucleusGraph
from .layers import (
    LEAKY_SLOPE,
    AttentionGate,
    DenseLayer,
    EdgeConvLayer,
    PoolLayer,
    VertexConvLayer,
)
from .numerics import AdamState, SplitMix64, Tape, Tensor, adam_step, backward

CHECKPOINT_VERSION = 1


class Variant(str, Enum):
    RSF = "rsf"
    RSF_EDGE = "rsf-edge"
    RSF_ATTENTION = "rsf-attention"


@dataclass(frozen=True)
class ModelSpec:
    variant: Variant = Variant.RSF
    in_features: int = 2
    conv1: int = 16
    conv2: int = 32
    conv3: int = 96
    pool1_nodes: int = 48
    pool2_nodes: int = 32
    edge_channels: tuple[int, int, int] = (4, 4, 1)
    fc1: int = 76
    fc2: int = 96
    n_classes: int = 2
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        object.__setattr__(self, "edge_channels", tuple(self.edge_channels))
        widths = (self.in_features, self.conv1, self.conv2, self.conv3,
                  self.pool1_nodes, self.pool2_nodes, self.fc1, self.fc2)
        if any(w < 1 for w in widths):
            raise ValidationError("all layer widths must be positive")
        if self.n_classes < 2:
            raise ValidationError("n_classes must be at least 2")
        if len(self.edge_channels) != 3 or any(c < 1 for c in self.edge_channels):
            raise ValidationError("edge_channels must be three positive counts")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["variant"] = self.variant.value
        d["edge_channels"] = list(self.edge_channels)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        try:
            return cls(
                variant=Variant(d["variant"]),
                in_features=int(d["in_features"]),
                conv1=int(d["conv1"]),
                conv2=int(d["conv2"]),
                conv3=int(d["conv3"]),
                pool1_nodes=int(d["pool1_nodes"]),
                pool2_nodes=int(d["pool2_nodes"]),
                edge_channels=tuple(int(c) for c in d["edge_channels"]),
                fc1=int(d["fc1"]),
                fc2=int(d["fc2"]),
                n_classes=int(d["n_classes"]),
                seed=int(d["seed"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"invalid model spec: {exc}") from exc


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    learning_rate: float = 0.01
    shuffle_seed: int = 0
    # Smoothing keeps the posterior off the float64 saturation plateau; with
    # a hard one-hot target Adam inflates the margins of separable graphs
    # until occlusion probability drops underflow to exactly zero.
    label_smoothing: float = 0.05

    def __post_init__(self):
        if self.epochs < 1:
            raise ValidationError("epochs must be at least 1")
        if self.learning_rate < 0:
            raise ValidationError("learning_rate must be non-negative")
        if not 0.0 <= self.label_smoothing < 0.5:
            raise ValidationError("label_smoothing must lie in [0, 0.5)")


@dataclass
class Prediction:
    probabilities: np.ndarray  # (n_classes,)
    attention: np.ndarray | None  # (N,) for the attention variant, else None

    @property
    def predicted_class(self) -> int:
        # ties break toward the lower class index (argmax takes the first max)
        return int(np.argmax(self.probabilities))


class Model:
    """A layer stack for one spec, with named parameters in build order."""

    def __init__(self, spec: ModelSpec):
        self.spec = spec
        rng = SplitMix64(spec.seed)
        s = spec
        edge = s.variant is Variant.RSF_EDGE
        ec1, ec2, ec3 = s.edge_channels if edge else (1, 1, 1)
        l_final = ec3 if edge else 1

        self.vc1 = VertexConvLayer(s.in_features, s.conv1, 1, rng)
        self.vc2 = VertexConvLayer(s.conv1, s.conv2, 1, rng)
        self.gate = AttentionGate(s.conv2, rng) if s.variant is Variant.RSF_ATTENTION else None
        self.pool1 = PoolLayer(s.conv2, s.pool1_nodes, 1, rng)
        self.ec1 = EdgeConvLayer(1, s.conv2, ec1, rng) if edge else None
        self.vc3 = VertexConvLayer(s.conv2, s.conv3, ec1 if edge else 1, rng)
        self.ec2 = EdgeConvLayer(ec1, s.conv3, ec2, rng) if edge else None
        self.pool2 = PoolLayer(s.conv3, s.pool2_nodes, ec2 if edge else 1, rng)
        self.ec3 = EdgeConvLayer(ec2, s.conv3, ec3, rng) if edge else None

        n2 = s.pool2_nodes
        self._triu_flat = (np.triu_indices(n2)[0] * n2 + np.triu_indices(n2)[1])
        readout = n2 * s.conv3 + l_final * (n2 * (n2 + 1)) // 2
        self.fc1 = DenseLayer(readout, s.fc1, True, rng)
        self.fc2 = DenseLayer(s.fc1, s.fc2, True, rng)
        self.fc3 = DenseLayer(s.fc2, s.n_classes, False, rng)

        stack = [("vc1", self.vc1), ("vc2", self.vc2)]
        if self.gate is not None:
            stack.append(("gate", self.gate))
        stack.append(("pool1", self.pool1))
        if self.ec1 is not None:
            stack.append(("ec1", self.ec1))
        stack.append(("vc3", self.vc3))
        if self.ec2 is not None:
            stack.append(("ec2", self.ec2))
        stack.append(("pool2", self.pool2))
        if self.ec3 is not None:
            stack.append(("ec3", self.ec3))
        stack += [("fc1", self.fc1), ("fc2", self.fc2), ("fc3", self.fc3)]
        self._named = [(f"{prefix}.{name}", t)
                       for prefix, layer in stack
                       for name, t in layer.params()]

    def named_params(self) -> list[tuple[str, Tensor]]:
        return list(self._named)

    def params(self) -> list[Tensor]:
        return [t for _, t in self._named]

    def param_count(self) -> int:
        return sum(t.data.size for t in self.params())

    def zero_grads(self) -> None:
        for t in self.params():
            t.zero_grad()

    def logits(self, g: NucleusGraph) -> tuple[Tensor, Tensor | None]:
        """Forward pass to class logits; records on the active tape if any."""
        if g.n_features != self.spec.in_features:
            raise ShapeError(
                f"graph has {g.n_features} features, model expects {self.spec.in_features}")
        v = nm.constant(g.vertex_features)
        a = [nm.constant(g.adjacency[:, :, l]) for l in range(g.n_edge_channels)]

        x = nm.leaky_relu(self.vc1.forward(v, a), LEAKY_SLOPE)
        x = nm.leaky_relu(self.vc2.forward(x, a), LEAKY_SLOPE)
        attention = None
        if self.gate is not None:
            x, attention = self.gate.forward(x)
        x, a = self.pool1.forward(x, a)
        if self.ec1 is not None:
            a = self.ec1.forward(x, a)
        x = nm.leaky_relu(self.vc3.forward(x, a), LEAKY_SLOPE)
        if self.ec2 is not None:
            a = self.ec2.forward(x, a)
        x, a = self.pool2.forward(x, a)
        if self.ec3 is not None:
            a = self.ec3.forward(x, a)

        n2 = self.spec.pool2_nodes
        pieces = [nm.reshape(x, (1, n2 * self.spec.conv3))]
        pieces += [nm.take(a_l, self._triu_flat) for a_l in a]
        h = self.fc1.forward(nm.concat(pieces, axis=1))
        h = self.fc2.forward(h)
        return self.fc3.forward(h), attention

    def forward(self, g: NucleusGraph) -> Prediction:
        """Pure evaluation: class probabilities plus attention scores when
        the variant has a gate. Safe to call concurrently on a frozen model.
        """
        logits, attention = self.logits(g)
        probs = nm.softmax(logits, axis=1).data[0]
        att = None if attention is None else attention.data.reshape(-1).copy()
        return Prediction(probabilities=probs, attention=att)


def build_model(spec: ModelSpec) -> Model:
    return Model(spec)


# ---------------------------------------------------------------------------
# Training


@dataclass
class Checkpoint:
    spec: ModelSpec
    params: dict[str, np.ndarray]
    meta: dict = field(default_factory=dict)


@dataclass
class TrainResult:
    checkpoint: Checkpoint
    loss_curve: list[float]


def _graph_loss(model: Model, g: NucleusGraph, smoothing: float = 0.0) -> Tensor:
    logits, _ = model.logits(g)
    log_probs = nm.log_softmax(logits, axis=1)
    if smoothing == 0.0:
        return nm.scale(nm.take(log_probs, [g.label]), -1.0)
    k = model.spec.n_classes
    target = np.full((1, k), smoothing / k)
    target[0, g.label] += 1.0 - smoothing
    return nm.scale(nm.sum_all(nm.mul(log_probs, nm.constant(target))), -1.0)


def train(model: Model, dataset: list[NucleusGraph], cfg: TrainConfig) -> TrainResult:
    """Per-graph cross-entropy with Adam; deterministic for a fixed seed."""
    if not dataset:
        raise ValidationError("training dataset is empty")
    labels = {g.label for g in dataset}
    if None in labels:
        raise ValidationError("every training graph needs a label")
    if any(not 0 <= lbl < model.spec.n_classes for lbl in labels):
        raise ValidationError(f"labels must lie in [0, {model.spec.n_classes})")
    if len(labels) < 2:
        raise ValidationError("training dataset contains a single class")

    params = model.params()
    state = AdamState.for_params(params, learning_rate=cfg.learning_rate)
    shuffler = SplitMix64(cfg.shuffle_seed)
    order = list(range(len(dataset)))
    loss_curve: list[float] = []

    for epoch in range(cfg.epochs):
        shuffler.shuffle(order)
        total = 0.0
        try:
            for idx in order:
                g = dataset[idx]
                model.zero_grads()
                with Tape() as tape:
                    loss = _graph_loss(model, g, cfg.label_smoothing)
                backward(loss, tape)
                grads = [p.grad if p.grad is not None else np.zeros_like(p.data)
                         for p in params]
                adam_step(params, grads, state)
                total += loss.data.item()
        except NumericError as exc:
            raise NumericError(f"numeric failure during epoch {epoch}: {exc}") from exc
        loss_curve.append(total / len(dataset))

    model.zero_grads()
    ckpt = checkpoint_from_model(model, meta={
        "epochs": cfg.epochs,
        "final_train_loss": loss_curve[-1],
        "seed": model.spec.seed,
        "shuffle_seed": cfg.shuffle_seed,
        "learning_rate": cfg.learning_rate,
    })
    return TrainResult(checkpoint=ckpt, loss_curve=loss_curve)


# ---------------------------------------------------------------------------
# Evaluation


@dataclass
class EvalReport:
    accuracy: float
    per_class_counts: list[int]
    confusion: list[list[int]]  # confusion[true][predicted]
    predictions: list[dict]

    def to_dict(self) -> dict:
        return asdict(self)


def evaluate(model: Model, dataset: list[NucleusGraph]) -> EvalReport:
    if not dataset:
        raise ValidationError("evaluation dataset is empty")
    if any(g.label is None for g in dataset):
        raise ValidationError("every evaluation graph needs a label")
    c = model.spec.n_classes
    confusion = [[0] * c for _ in range(c)]
    predictions = []
    correct = 0
    for g in dataset:
        pred = model.forward(g)
        k = pred.predicted_class
        confusion[g.label][k] += 1
        correct += int(k == g.label)
        predictions.append({
            "label": g.label,
            "predicted": k,
            "probabilities": pred.probabilities.tolist(),
        })
    per_class = [sum(confusion[t]) for t in range(c)]
    return EvalReport(
        accuracy=correct / len(dataset),
        per_class_counts=per_class,
        confusion=confusion,
        predictions=predictions,
    )


# ---------------------------------------------------------------------------
# Checkpoint persistence


def checkpoint_from_model(model: Model, meta: dict | None = None) -> Checkpoint:
    return Checkpoint(
        spec=model.spec,
        params={name: t.data.copy() for name, t in model.named_params()},
        meta=dict(meta or {}),
    )


def model_from_checkpoint(ckpt: Checkpoint) -> Model:
    model = Model(ckpt.spec)
    expected = dict(model.named_params())
    if set(expected) != set(ckpt.params):
        missing = sorted(set(expected) ^ set(ckpt.params))
        raise ShapeError(f"checkpoint parameters do not match spec: {missing}")
    for name, tensor in expected.items():
        arr = ckpt.params[name]
        if arr.shape != tensor.data.shape:
            raise ShapeError(
                f"checkpoint parameter {name} has shape {arr.shape}, "
                f"expected {tensor.data.shape}")
        tensor.data = arr.copy()
    return model


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    payload = {
        "version": CHECKPOINT_VERSION,
        "spec": ckpt.spec.to_dict(),
        "params": {
            name: {"shape": list(arr.shape), "data": arr.reshape(-1).tolist()}
            for name, arr in ckpt.params.items()
        },
        "meta": ckpt.meta,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)
        fh.write("\n")


def load_checkpoint(path) -> Checkpoint:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise CorruptCheckpointError(f"unreadable checkpoint: {exc}") from exc
    if not isinstance(payload, dict) or "version" not in payload:
        raise CorruptCheckpointError("checkpoint is missing its version field")
    version = payload["version"]
    if version != CHECKPOINT_VERSION:
        raise CheckpointVersionError(
            f"checkpoint version {version} is not supported (this build reads "
            f"version {CHECKPOINT_VERSION})")
    try:
        spec = ModelSpec.from_dict(payload["spec"])
        params = {}
        for name, entry in payload["params"].items():
            shape = tuple(int(s) for s in entry["shape"])
            data = np.array(entry["data"], dtype=np.float64)
            if data.size != int(np.prod(shape)):
                raise ShapeError(
                    f"checkpoint parameter {name}: {data.size} values for shape {shape}")
            params[name] = data.reshape(shape)
        meta = dict(payload.get("meta", {}))
    except ShapeError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptCheckpointError(f"malformed checkpoint: {exc}") from exc
    return Checkpoint(spec=spec, params=params, meta=meta)
