"""The two embedding functions and the base-class classifier head.

The point encoder is a per-point shared MLP followed by a symmetric max-pool
and a post-pool MLP, so it is permutation invariant by construction. The
image encoder flattens non-overlapping patches, applies a shared per-patch
affine+relu, concatenates, and runs a trunk MLP. Both output embeddings of
the same dimension d; that equality is enforced at construction time.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .numerics import (
    Parameter,
    Tensor,
    affine,
    no_grad,
    relu,
    reshape,
    set_max_pool,
    slice_rows,
    stack_rows,
)


@dataclass
class Embedding:
    vector: np.ndarray
    modality: str  # "image" | "pointcloud"
    instance_id: str = ""
    category_id: int | None = None


def _init_affine(rng, fan_in: int, fan_out: int, prefix: str, idx: int):
    w = rng.normal(scale=np.sqrt(2.0 / fan_in), size=(fan_in, fan_out))
    return (
        Parameter(f"{prefix}.{idx}.W", Tensor(w)),
        Parameter(f"{prefix}.{idx}.b", Tensor(np.zeros(fan_out))),
    )


class _Mlp:
    """A chain of affine layers with relu between (linear final layer)."""

    def __init__(self, rng, widths, prefix: str, final_relu: bool = False):
        self.layers = []
        self.final_relu = final_relu
        for i, (fan_in, fan_out) in enumerate(zip(widths, widths[1:])):
            self.layers.append(_init_affine(rng, fan_in, fan_out, prefix, i))

    def __call__(self, x: Tensor) -> Tensor:
        last = len(self.layers) - 1
        for i, (w, b) in enumerate(self.layers):
            x = affine(x, w.value, b.value)
            if i < last or self.final_relu:
                x = relu(x)
        return x

    def parameters(self):
        return [p for pair in self.layers for p in pair]


@dataclass
class PointEncoderConfig:
    point_widths: tuple = (64, 128)  # hidden widths of the per-point MLP
    post_widths: tuple = ()  # hidden widths after pooling
    embed_dim: int = 64


class PointEncoder:
    """Permutation-invariant point-cloud embedding function."""

    def __init__(self, config: PointEncoderConfig, seed: int = 0):
        if config.embed_dim < 1 or any(w < 1 for w in config.point_widths):
            raise ConfigError(f"bad point-encoder widths: {config}")
        self.config = config
        rng = np.random.default_rng(seed)
        self.point_mlp = _Mlp(
            rng, (3, *config.point_widths), "fp.point", final_relu=True
        )
        pooled = config.point_widths[-1]
        self.post_mlp = _Mlp(rng, (pooled, *config.post_widths, config.embed_dim), "fp.post")

    @property
    def embed_dim(self) -> int:
        return self.config.embed_dim

    def parameters(self):
        return self.point_mlp.parameters() + self.post_mlp.parameters()

    def forward_batch(self, clouds) -> Tensor:
        """Encode a list of (possibly differently sized) Nx3 clouds to Bxd."""
        sizes = [c.shape[0] for c in clouds]
        stacked = Tensor(np.concatenate([np.asarray(c, dtype=np.float64) for c in clouds]))
        feats = self.point_mlp(stacked)
        pooled, start = [], 0
        for n in sizes:
            pooled.append(set_max_pool(slice_rows(feats, start, start + n)))
            start += n
        return self.post_mlp(stack_rows(pooled))

    def embed(self, points: np.ndarray) -> np.ndarray:
        with no_grad():
            return self.forward_batch([points]).data[0]

    def embed_many(self, clouds) -> np.ndarray:
        with no_grad():
            return self.forward_batch(clouds).data


@dataclass
class ImageEncoderConfig:
    patch_size: int = 8
    patch_width: int = 64  # shared per-patch feature width
    trunk_widths: tuple = (256,)
    embed_dim: int = 64
    channels: int = 2


class ImageEncoder:
    """Patch-MLP image embedding function mapping into the shape space."""

    def __init__(self, config: ImageEncoderConfig, image_size: int, seed: int = 0):
        if image_size % config.patch_size != 0:
            raise ConfigError(
                f"image size {image_size} not divisible by patch size "
                f"{config.patch_size}"
            )
        self.config = config
        self.image_size = image_size
        self.n_patches = (image_size // config.patch_size) ** 2
        patch_dim = config.channels * config.patch_size**2
        rng = np.random.default_rng(seed)
        self.patch_mlp = _Mlp(rng, (patch_dim, config.patch_width), "fi.patch", final_relu=True)
        trunk_in = self.n_patches * config.patch_width
        self.trunk_mlp = _Mlp(rng, (trunk_in, *config.trunk_widths, config.embed_dim), "fi.trunk")

    @property
    def embed_dim(self) -> int:
        return self.config.embed_dim

    def parameters(self):
        return self.patch_mlp.parameters() + self.trunk_mlp.parameters()

    def _patches(self, image: np.ndarray) -> np.ndarray:
        """Split a CxHxW image into flattened non-overlapping patches."""
        c, h, w = image.shape
        ps = self.config.patch_size
        if c != self.config.channels or h != self.image_size or w != self.image_size:
            raise ConfigError(
                f"image shape {image.shape} does not match encoder "
                f"({self.config.channels}x{self.image_size}x{self.image_size})"
            )
        grid = image.reshape(c, h // ps, ps, w // ps, ps)
        return grid.transpose(1, 3, 0, 2, 4).reshape(self.n_patches, -1)

    def forward_batch(self, images) -> Tensor:
        """Encode a list of CxHxW arrays to Bxd."""
        batch = np.concatenate(
            [self._patches(np.asarray(img, dtype=np.float64)) for img in images]
        )
        feats = self.patch_mlp(Tensor(batch))
        per_image = reshape(feats, (len(images), self.n_patches * self.config.patch_width))
        return self.trunk_mlp(per_image)

    def embed(self, image: np.ndarray) -> np.ndarray:
        with no_grad():
            return self.forward_batch([image]).data[0]

    def embed_many(self, images) -> np.ndarray:
        with no_grad():
            return self.forward_batch(images).data


class ClassifierHead:
    """Affine map from embeddings to base-class logits."""

    def __init__(self, embed_dim: int, n_classes: int, seed: int = 0):
        if n_classes < 2:
            raise ConfigError(f"need at least 2 classes, got {n_classes}")
        rng = np.random.default_rng(seed)
        w = rng.normal(scale=np.sqrt(1.0 / embed_dim), size=(embed_dim, n_classes))
        self.weight = Parameter("head.W", Tensor(w))
        self.bias = Parameter("head.b", Tensor(np.zeros(n_classes)))

    def parameters(self):
        return [self.weight, self.bias]

    def __call__(self, embeddings: Tensor) -> Tensor:
        return affine(embeddings, self.weight.value, self.bias.value)


def params_to_dict(params) -> dict:
    return {p.name: p.value.data.copy() for p in params}


def load_param_dict(params, values: dict):
    """Copy checkpoint arrays into matching parameters in place."""
    for p in params:
        key = p.name
        if key not in values:
            raise ConfigError(f"checkpoint is missing parameter {key!r}")
        if values[key].shape != p.value.data.shape:
            raise ConfigError(
                f"checkpoint shape mismatch for {key!r}: "
                f"{values[key].shape} vs {p.value.data.shape}"
            )
        p.value.data[...] = values[key]
