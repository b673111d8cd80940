"""Procedural object categories: part-based recipes and their realization.

A recipe is a short list of primitive parts in a canonical upright pose
(z-up) plus jitter ranges for instance-level variation. Realizing a recipe
with a seed perturbs sizes, offsets and orientations inside those ranges;
the same (recipe, seed) pair always reproduces identical parameters.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError
from .primitives import euler_matrix, sample_primitive, surface_area

HALF_PI = math.pi / 2.0


@dataclass(frozen=True)
class PartSpec:
    kind: str
    size: tuple
    offset: tuple = (0.0, 0.0, 0.0)
    euler: tuple = (0.0, 0.0, 0.0)


@dataclass(frozen=True)
class JitterRanges:
    """Uniform half-widths for instance variation; size jitter is relative."""

    size_frac: float = 0.12
    offset_abs: float = 0.04
    angle_rad: float = 0.08


@dataclass(frozen=True)
class CategoryRecipe:
    category_id: int
    name: str
    parts: tuple
    jitter: JitterRanges = field(default_factory=JitterRanges)

    def __post_init__(self):
        if not self.parts:
            raise ConfigError(f"recipe {self.name!r} has no parts")
        if not (0.0 <= self.jitter.size_frac < 1.0):
            raise ConfigError(
                f"recipe {self.name!r}: size jitter must keep extents positive"
            )


@dataclass(frozen=True)
class RealizedPart:
    kind: str
    size: tuple
    offset: tuple
    euler: tuple


@dataclass(frozen=True)
class ShapeInstance:
    instance_id: str
    category_id: int
    category_name: str
    parts: tuple  # RealizedPart
    rng_seed: int


def realize(recipe: CategoryRecipe, seed: int, index: int = 0) -> ShapeInstance:
    """Draw one instance's part parameters from the recipe's jitter ranges."""
    rng = np.random.default_rng(seed)
    jit = recipe.jitter
    parts = []
    for part in recipe.parts:
        size = tuple(
            s * (1.0 + rng.uniform(-jit.size_frac, jit.size_frac))
            for s in part.size
        )
        offset = tuple(
            o + rng.uniform(-jit.offset_abs, jit.offset_abs) for o in part.offset
        )
        euler = tuple(
            e + rng.uniform(-jit.angle_rad, jit.angle_rad) for e in part.euler
        )
        parts.append(RealizedPart(part.kind, size, offset, euler))
    return ShapeInstance(
        instance_id=f"c{recipe.category_id:02d}_i{index:03d}",
        category_id=recipe.category_id,
        category_name=recipe.name,
        parts=tuple(parts),
        rng_seed=seed,
    )


def normalize_pointcloud(points: np.ndarray) -> np.ndarray:
    """Center at the centroid and scale the max radius to exactly 1."""
    pts = np.asarray(points, dtype=np.float64)
    pts = pts - pts.mean(axis=0)
    radius = np.linalg.norm(pts, axis=1).max()
    if radius == 0.0:
        raise ValueError("cannot normalize a degenerate (single-position) cloud")
    return pts / radius


def sample_surface_points(
    instance: ShapeInstance, n: int, rng: np.random.Generator
) -> np.ndarray:
    """n area-weighted surface points over all parts, unit-sphere normalized.

    Points falling inside other parts are kept; occlusion is a render-time
    concern.
    """
    if n < 8:
        raise ValueError(f"need at least 8 points, got {n}")
    areas = np.array([surface_area(p.kind, p.size) for p in instance.parts])
    part_idx = rng.choice(len(areas), size=n, p=areas / areas.sum())
    pts = np.empty((n, 3))
    for i, part in enumerate(instance.parts):
        mask = part_idx == i
        local = sample_primitive(part.kind, part.size, int(mask.sum()), rng)
        rot = euler_matrix(part.euler)
        pts[mask] = local @ rot.T + np.asarray(part.offset)
    return normalize_pointcloud(pts)


def _legs(radius, height, z, spots):
    return tuple(
        PartSpec("cylinder", (radius, height), (x, y, z)) for x, y in spots
    )


def builtin_recipes() -> tuple:
    """The shipped 24-category recipe table."""
    four = [(0.6, 0.35), (-0.6, 0.35), (0.6, -0.35), (-0.6, -0.35)]
    square = [(0.3, 0.3), (-0.3, 0.3), (0.3, -0.3), (-0.3, -0.3)]
    tripod = [
        (0.35 * math.cos(a), 0.35 * math.sin(a))
        for a in (HALF_PI, HALF_PI + 2 * math.pi / 3, HALF_PI + 4 * math.pi / 3)
    ]
    recipes = [
        ("ball", (PartSpec("sphere", (0.8,)),)),
        ("crate", (PartSpec("box", (1.1, 1.0, 0.9)),)),
        ("plank", (PartSpec("box", (1.6, 0.5, 0.12)),)),
        ("pipe", (PartSpec("cylinder", (0.22, 1.7)),)),
        ("puck", (PartSpec("cylinder", (0.8, 0.25)),)),
        ("cone_marker", (PartSpec("cone", (0.6, 1.3)),)),
        ("donut", (PartSpec("torus", (0.7, 0.25)),)),
        (
            "mug",
            (
                PartSpec("cylinder", (0.45, 0.9)),
                PartSpec("torus", (0.3, 0.08), (0.55, 0.0, 0.0), (HALF_PI, 0.0, 0.0)),
            ),
        ),
        (
            "table",
            (PartSpec("box", (1.4, 0.9, 0.1), (0.0, 0.0, 0.45)),)
            + _legs(0.06, 0.9, 0.0, four),
        ),
        (
            "chair",
            (
                PartSpec("box", (0.7, 0.7, 0.08)),
                PartSpec("box", (0.7, 0.08, 0.8), (0.0, -0.31, 0.44)),
            )
            + _legs(0.05, 0.7, -0.39, square),
        ),
        (
            "barbell",
            (
                PartSpec("cylinder", (0.07, 1.6), (0.0, 0.0, 0.0), (0.0, HALF_PI, 0.0)),
                PartSpec("sphere", (0.28,), (0.8, 0.0, 0.0)),
                PartSpec("sphere", (0.28,), (-0.8, 0.0, 0.0)),
            ),
        ),
        (
            "hammer",
            (
                PartSpec("cylinder", (0.07, 1.2)),
                PartSpec("box", (0.65, 0.22, 0.22), (0.0, 0.0, 0.6)),
            ),
        ),
        (
            "snowman",
            (
                PartSpec("sphere", (0.45,)),
                PartSpec("sphere", (0.32,), (0.0, 0.0, 0.6)),
                PartSpec("sphere", (0.22,), (0.0, 0.0, 1.03)),
            ),
        ),
        (
            "tree",
            (
                PartSpec("cone", (0.6, 1.1), (0.0, 0.0, 0.45)),
                PartSpec("cylinder", (0.12, 0.5), (0.0, 0.0, -0.5)),
            ),
        ),
        (
            "rocket",
            (
                PartSpec("cylinder", (0.3, 1.2)),
                PartSpec("cone", (0.3, 0.5), (0.0, 0.0, 0.85)),
            )
            + tuple(
                PartSpec(
                    "box",
                    (0.35, 0.06, 0.4),
                    (0.3 * math.cos(a), 0.3 * math.sin(a), -0.55),
                    (0.0, 0.0, a),
                )
                for a in (0.0, 2 * math.pi / 3, 4 * math.pi / 3)
            ),
        ),
        (
            "lamp",
            (
                PartSpec("cone", (0.5, 0.5), (0.0, 0.0, 0.7)),
                PartSpec("cylinder", (0.05, 1.0)),
                PartSpec("cylinder", (0.35, 0.08), (0.0, 0.0, -0.55)),
            ),
        ),
        (
            "stool",
            (PartSpec("cylinder", (0.5, 0.1), (0.0, 0.0, 0.35)),)
            + _legs(0.05, 0.8, -0.1, tripod),
        ),
        (
            "bottle",
            (
                PartSpec("cylinder", (0.35, 0.9)),
                PartSpec("cylinder", (0.12, 0.45), (0.0, 0.0, 0.65)),
            ),
        ),
        (
            "plate",
            (
                PartSpec("cylinder", (0.85, 0.08)),
                PartSpec("cylinder", (0.3, 0.06), (0.0, 0.0, -0.07)),
            ),
        ),
        (
            "wheel",
            (
                PartSpec("torus", (0.65, 0.18), (0.0, 0.0, 0.0), (HALF_PI, 0.0, 0.0)),
                PartSpec(
                    "cylinder", (0.12, 0.3), (0.0, 0.0, 0.0), (HALF_PI, 0.0, 0.0)
                ),
            ),
        ),
        (
            "hourglass",
            (
                PartSpec("cone", (0.5, 0.7), (0.0, 0.0, 0.35), (math.pi, 0.0, 0.0)),
                PartSpec("cone", (0.5, 0.7), (0.0, 0.0, -0.35)),
            ),
        ),
        (
            "goblet",
            (
                PartSpec("cone", (0.45, 0.5), (0.0, 0.0, 0.3), (math.pi, 0.0, 0.0)),
                PartSpec("cylinder", (0.06, 0.5), (0.0, 0.0, -0.05)),
                PartSpec("cylinder", (0.3, 0.06), (0.0, 0.0, -0.33)),
            ),
        ),
        (
            "cross_frame",
            (
                PartSpec("box", (1.5, 0.2, 0.2)),
                PartSpec("box", (0.2, 0.2, 1.5)),
            ),
        ),
        (
            "arch",
            (
                PartSpec("box", (0.25, 0.25, 1.0), (0.55, 0.0, -0.1)),
                PartSpec("box", (0.25, 0.25, 1.0), (-0.55, 0.0, -0.1)),
                PartSpec("box", (1.5, 0.3, 0.25), (0.0, 0.0, 0.52)),
            ),
        ),
    ]
    return tuple(
        CategoryRecipe(category_id=i, name=name, parts=parts)
        for i, (name, parts) in enumerate(recipes)
    )
