from .augment import OFF, AugmentPolicy, augment_pointcloud, random_rotation
from .primitives import (
    PRIMITIVE_KINDS,
    euler_matrix,
    sample_primitive,
    surface_area,
)
from .recipes import (
    CategoryRecipe,
    JitterRanges,
    PartSpec,
    RealizedPart,
    ShapeInstance,
    builtin_recipes,
    normalize_pointcloud,
    realize,
    sample_surface_points,
)

__all__ = [
    "OFF",
    "AugmentPolicy",
    "CategoryRecipe",
    "JitterRanges",
    "PRIMITIVE_KINDS",
    "PartSpec",
    "RealizedPart",
    "ShapeInstance",
    "augment_pointcloud",
    "builtin_recipes",
    "euler_matrix",
    "normalize_pointcloud",
    "random_rotation",
    "realize",
    "sample_primitive",
    "sample_surface_points",
    "surface_area",
]
