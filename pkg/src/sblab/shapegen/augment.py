"""Point-cloud training augmentations: SO3 rotation, translation, jitter, dropout.

Applied in that fixed order. Jitter is clipped Gaussian noise (3 sigma);
dropout removes a uniform number of points up to a max fraction and never
empties the cloud.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class AugmentPolicy:
    so3_rotation: bool = True
    translation_range: float = 0.1
    jitter_sigma: float = 0.01
    dropout_max_fraction: float = 0.875

    def __post_init__(self):
        if not (0.0 <= self.dropout_max_fraction < 1.0):
            raise ValueError("dropout_max_fraction must lie in [0, 1)")


OFF = AugmentPolicy(
    so3_rotation=False, translation_range=0.0, jitter_sigma=0.0, dropout_max_fraction=0.0
)


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Uniform random rotation via a normalized 4-normal quaternion."""
    q = rng.standard_normal(4)
    w, x, y, z = q / np.linalg.norm(q)
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def augment_pointcloud(
    points: np.ndarray, policy: AugmentPolicy, rng: np.random.Generator
) -> np.ndarray:
    """Rotate, translate, jitter, then drop points, per the policy."""
    pts = np.array(points, dtype=np.float64)
    if pts.shape[0] == 0:
        raise ValueError("cannot augment an empty point cloud")
    if policy.so3_rotation:
        pts = pts @ random_rotation(rng).T
    if policy.translation_range > 0.0:
        pts = pts + rng.uniform(
            -policy.translation_range, policy.translation_range, size=3
        )
    if policy.jitter_sigma > 0.0:
        sigma = policy.jitter_sigma
        noise = np.clip(
            rng.standard_normal(pts.shape) * sigma, -3.0 * sigma, 3.0 * sigma
        )
        pts = pts + noise
    if policy.dropout_max_fraction > 0.0:
        n = pts.shape[0]
        k_max = int(np.floor(n * policy.dropout_max_fraction))
        k = int(rng.integers(0, k_max + 1))
        if k > 0:
            drop = rng.choice(n, size=k, replace=False)
            keep = np.setdiff1d(np.arange(n), drop, assume_unique=True)
            pts = pts[keep]
    return pts
