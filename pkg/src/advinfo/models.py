"""Architecture descriptions and the network runtime built from them.

A :class:`ModelSpec` is an immutable, value-comparable list of layer blocks.
Each block is one row of the architecture table: a convolution (optionally
followed by an activation and 2x2 max pooling) or a dense layer (optionally
followed by an activation). Blocks flagged ``probe`` have their output
captured during :meth:`Network.forward`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

Activation = Literal["relu", "tanh", "none"]


class ShapeError(ValueError):
    pass


@dataclass(frozen=True)
class LayerSpec:
    kind: Literal["conv", "dense"]
    out: int
    name: str
    kernel: int = 0
    padding: int = 0
    activation: Activation = "relu"
    pool: int = 0
    probe: bool = False


@dataclass(frozen=True)
class ProbePoint:
    index: int
    name: str


@dataclass(frozen=True)
class ModelSpec:
    name: str
    input_shape: tuple[int, int, int]
    classes: int
    layers: tuple[LayerSpec, ...] = ()

    def __post_init__(self):
        if self.classes < 2:
            raise ValueError(f"a classifier needs at least 2 classes, got {self.classes}")
        shapes = self.layer_shapes()
        if self.layers and shapes[-1] != (self.classes,):
            raise ShapeError(f"last layer produces {shapes[-1]}, expected ({self.classes},)")

    @property
    def probe_points(self) -> tuple[ProbePoint, ...]:
        return tuple(ProbePoint(i, l.name) for i, l in enumerate(self.layers) if l.probe)

    def layer_shapes(self) -> list[tuple[int, ...]]:
        """Per-sample output shape of every layer, validating composition."""
        shape: tuple[int, ...] = tuple(self.input_shape)
        out = []
        for i, layer in enumerate(self.layers):
            if layer.kind == "conv":
                if len(shape) != 3:
                    raise ShapeError(f"layer {i} ({layer.name}): conv needs (C, H, W) input, got {shape}")
                c, h, w = shape
                h = h + 2 * layer.padding - layer.kernel + 1
                w = w + 2 * layer.padding - layer.kernel + 1
                if h < 1 or w < 1:
                    raise ShapeError(f"layer {i} ({layer.name}): kernel {layer.kernel} too large for {shape}")
                if layer.pool:
                    if h % layer.pool or w % layer.pool:
                        raise ShapeError(f"layer {i} ({layer.name}): {h}x{w} not divisible by pool {layer.pool}")
                    h, w = h // layer.pool, w // layer.pool
                shape = (layer.out, h, w)
            elif layer.kind == "dense":
                shape = (layer.out,)
            else:
                raise ValueError(f"layer {i}: unknown kind {layer.kind!r}")
            out.append(shape)
        return out

    def fan_in(self, index: int) -> int:
        prev = self.input_shape if index == 0 else self.layer_shapes()[index - 1]
        layer = self.layers[index]
        if layer.kind == "conv":
            return prev[0] * layer.kernel * layer.kernel
        return math.prod(prev)

    def parameter_shapes(self) -> list[tuple[str, tuple[int, ...]]]:
        shapes = []
        for i, layer in enumerate(self.layers):
            fan = self.fan_in(i)
            if layer.kind == "conv":
                c = fan // (layer.kernel * layer.kernel)
                shapes.append((f"{layer.name}.weight", (layer.out, c, layer.kernel, layer.kernel)))
            else:
                shapes.append((f"{layer.name}.weight", (fan, layer.out)))
            shapes.append((f"{layer.name}.bias", (layer.out,)))
        return shapes

    def parameter_count(self) -> int:
        return sum(math.prod(s) for _, s in self.parameter_shapes())


def build_lenet5() -> ModelSpec:
    """LeNet-5 for 1x28x28 inputs; all five weight layers are probed.

    The first convolution pads by 2 so that two conv/pool blocks leave a
    16x5x5 = 400 feature map ahead of the first fully connected layer.
    """
    return ModelSpec(
        name="lenet5",
        input_shape=(1, 28, 28),
        classes=10,
        layers=(
            LayerSpec("conv", 6, "conv1", kernel=5, padding=2, pool=2, probe=True),
            LayerSpec("conv", 16, "conv2", kernel=5, padding=0, pool=2, probe=True),
            LayerSpec("dense", 120, "fc1", probe=True),
            LayerSpec("dense", 84, "fc2", probe=True),
            LayerSpec("dense", 10, "fc3", activation="none", probe=True),
        ),
    )


def build_toy_mlp(
    input_dim: int, hidden_dims: list[int] | tuple[int, ...], classes: int, activation: Activation = "relu"
) -> ModelSpec:
    if input_dim < 1 or classes < 1 or any(h < 1 for h in hidden_dims):
        raise ValueError("all dimensions must be positive")
    layers = [LayerSpec("dense", h, f"fc{i + 1}", activation=activation, probe=True) for i, h in enumerate(hidden_dims)]
    layers.append(LayerSpec("dense", classes, f"fc{len(hidden_dims) + 1}", activation="none", probe=True))
    return ModelSpec(
        name=f"toy_mlp_{input_dim}_{'x'.join(map(str, hidden_dims)) or 'linear'}_{classes}",
        input_shape=(input_dim, 1, 1),
        classes=classes,
        layers=tuple(layers),
    )


def identity_spec(input_shape: tuple[int, int, int]) -> ModelSpec:
    """A model without layers: logits are the flattened input."""
    return ModelSpec(name="identity", input_shape=input_shape, classes=math.prod(input_shape))


MODEL_BUILDERS = {"lenet5": build_lenet5}


def spec_by_name(name: str) -> ModelSpec:
    """Resolve ``lenet5`` or ``toy_mlp:<in>:<h1,h2,...>:<classes>``."""
    if name in MODEL_BUILDERS:
        return MODEL_BUILDERS[name]()
    if name.startswith("toy_mlp:"):
        _, d, hidden, m = name.split(":")
        return build_toy_mlp(int(d), [int(h) for h in hidden.split(",") if h], int(m))
    raise KeyError(f"unknown model {name!r}; known: {sorted(MODEL_BUILDERS)} or toy_mlp:<in>:<hidden>:<classes>")


@dataclass
class Network:
    """Parameters plus forward evaluation for a :class:`ModelSpec`."""

    spec: ModelSpec
    params: dict[str, Tensor] = field(default_factory=dict)

    @classmethod
    def init(cls, spec: ModelSpec, rng: np.random.Generator, dtype=np.float64) -> "Network":
        """Kaiming-uniform weights (bound ``sqrt(6 / fan_in)``), zero biases."""
        params = {}
        for i, layer in enumerate(spec.layers):
            fan = spec.fan_in(i)
            bound = math.sqrt(6.0 / fan)
            for pname, shape in spec.parameter_shapes()[2 * i : 2 * i + 2]:
                if pname.endswith(".weight"):
                    data = rng.uniform(-bound, bound, size=shape)
                else:
                    data = np.zeros(shape)
                params[pname] = Tensor(data.astype(dtype), requires_grad=True)
        return cls(spec, params)

    @property
    def dtype(self):
        for p in self.params.values():
            return p.data.dtype
        return np.float64

    def parameters(self) -> list[Tensor]:
        return list(self.params.values())

    def set_trainable(self, flag: bool) -> None:
        for p in self.params.values():
            p.requires_grad = flag

    def checksum(self) -> str:
        import hashlib

        h = hashlib.sha256()
        for name, p in self.params.items():
            h.update(name.encode())
            h.update(np.ascontiguousarray(p.data).tobytes())
        return h.hexdigest()

    def copy(self) -> "Network":
        return Network(self.spec, {k: Tensor(v.data.copy(), requires_grad=v.requires_grad) for k, v in self.params.items()})

    def apply_layer(self, index: int, x: Tensor) -> Tensor:
        layer = self.spec.layers[index]
        w = self.params[f"{layer.name}.weight"]
        b = self.params[f"{layer.name}.bias"]
        if layer.kind == "conv":
            h = ad.conv2d(x, w, b, padding=layer.padding)
        else:
            if x.data.ndim != 2:
                x = ad.flatten(x)
            h = ad.dense(x, w, b)
        if layer.activation == "relu":
            h = ad.relu(h)
        elif layer.activation == "tanh":
            h = ad.tanh(h)
        if layer.kind == "conv" and layer.pool:
            h = ad.max_pool2d(h, layer.pool)
        return h

    def forward(self, batch: Tensor | np.ndarray, probe: bool = True) -> tuple[Tensor, dict[str, np.ndarray]]:
        """Return logits (N, M) and flattened outputs of every probed layer."""
        x = batch if isinstance(batch, Tensor) else Tensor(batch)
        expected = tuple(self.spec.input_shape)
        if x.data.ndim != 4 or tuple(x.shape[1:]) != expected:
            raise ShapeError(f"layer 0 ({self.spec.name} input): expected (N, {', '.join(map(str, expected))}), got {x.shape}")
        probes: dict[str, np.ndarray] = {}
        h = x
        for i, layer in enumerate(self.spec.layers):
            h = self.apply_layer(i, h)
            if probe and layer.probe:
                probes[layer.name] = h.data.reshape(h.shape[0], -1)
        if h.data.ndim != 2:
            h = ad.flatten(h)
        return h, probes

    def logits(self, batch: np.ndarray) -> np.ndarray:
        return self.forward(batch, probe=False)[0].data
