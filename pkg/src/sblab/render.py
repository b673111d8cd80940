"""Analytic orthographic depth/silhouette rendering of point clouds.

A camera pose is an azimuth psi in [0, 360) degrees about the vertical (z)
axis and an elevation theta in [-50, 50] degrees. Points are rotated into
the camera frame (azimuth first, then tilt), orthographically projected
onto the [-1.1, 1.1]^2 window, and z-buffer splatted as small discs.
Foreground depths are min-max normalized to [0, 1]; background pixels hold
the sentinel +1e9 in memory and 0 in the stored file (the silhouette
channel disambiguates).
"""

import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

BACKGROUND = 1e9
WINDOW = 1.1  # half-width of the projection window

AZIMUTH_RANGE = (0.0, 360.0)
ELEVATION_RANGE = (-50.0, 50.0)


@dataclass(frozen=True)
class CameraPose:
    azimuth: float  # degrees in [0, 360)
    elevation: float  # degrees in [-50, 50]

    def __post_init__(self):
        if not (AZIMUTH_RANGE[0] <= self.azimuth < AZIMUTH_RANGE[1]):
            raise ValueError(f"azimuth out of range: {self.azimuth}")
        if not (ELEVATION_RANGE[0] <= self.elevation <= ELEVATION_RANGE[1]):
            raise ValueError(f"elevation out of range: {self.elevation}")


@dataclass
class DepthImage:
    width: int
    height: int
    depth: np.ndarray  # HxW float64; normalized foreground, BACKGROUND elsewhere
    silhouette: np.ndarray  # HxW uint8 in {0, 1}
    pose: CameraPose

    def channels(self) -> np.ndarray:
        """2xHxW float64: normalized depth (background 0), silhouette."""
        ch0 = np.where(self.silhouette > 0, self.depth, 0.0)
        return np.stack([ch0, self.silhouette.astype(np.float64)])


def sample_camera_pose(rng: np.random.Generator) -> CameraPose:
    return CameraPose(
        azimuth=float(rng.uniform(*AZIMUTH_RANGE)),
        elevation=float(rng.uniform(*ELEVATION_RANGE)),
    )


def camera_rotation(pose: CameraPose) -> np.ndarray:
    """World-to-camera rotation: azimuth about z, then elevation tilt about x."""
    psi = math.radians(pose.azimuth)
    theta = math.radians(pose.elevation)
    cz, sz = math.cos(psi), math.sin(psi)
    cx, sx = math.cos(theta), math.sin(theta)
    rz = np.array([[cz, -sz, 0.0], [sz, cz, 0.0], [0.0, 0.0, 1.0]])
    rx = np.array([[1.0, 0.0, 0.0], [0.0, cx, -sx], [0.0, sx, cx]])
    return rx @ rz


def _disc_offsets(radius: int) -> np.ndarray:
    span = np.arange(-radius, radius + 1)
    dx, dy = np.meshgrid(span, span)
    keep = dx**2 + dy**2 <= radius**2
    return np.column_stack([dy[keep], dx[keep]])  # (row, col) offsets


def render_depth(
    points: np.ndarray,
    pose: CameraPose,
    width: int,
    height: int,
    splat_radius: int = 1,
) -> DepthImage:
    """Z-buffer splat a normalized cloud into a depth/silhouette image."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.shape[0] == 0:
        raise ValueError("cannot render an empty point cloud")
    if width < 8 or height < 8:
        raise ValueError(f"image size too small: {width}x{height}")
    cam = pts @ camera_rotation(pose).T
    # screen x -> columns, camera z -> rows (up), camera y -> depth
    cols = np.floor((cam[:, 0] + WINDOW) / (2 * WINDOW) * width).astype(np.int64)
    rows = np.floor((WINDOW - cam[:, 2]) / (2 * WINDOW) * height).astype(np.int64)
    depth_vals = cam[:, 1]

    buf = np.full((height, width), BACKGROUND)
    offsets = _disc_offsets(int(splat_radius))
    rr = rows[:, None] + offsets[None, :, 0]
    cc = cols[:, None] + offsets[None, :, 1]
    dd = np.broadcast_to(depth_vals[:, None], rr.shape)
    inside = (rr >= 0) & (rr < height) & (cc >= 0) & (cc < width)
    np.minimum.at(buf, (rr[inside], cc[inside]), dd[inside])

    sil = (buf < BACKGROUND).astype(np.uint8)
    fg = sil > 0
    if fg.any():
        lo = buf[fg].min()
        hi = buf[fg].max()
        span = hi - lo
        if span < 1e-12:
            buf[fg] = 0.5
        else:
            buf[fg] = (buf[fg] - lo) / span
    return DepthImage(width=width, height=height, depth=buf, silhouette=sil, pose=pose)


def render_views(
    points: np.ndarray,
    n_views: int,
    rng: np.random.Generator,
    width: int,
    height: int,
    splat_radius: int = 1,
) -> list:
    """Render n_views independently sampled poses of one cloud."""
    if n_views < 1:
        raise ValueError("n_views must be at least 1")
    return [
        render_depth(points, sample_camera_pose(rng), width, height, splat_radius)
        for _ in range(n_views)
    ]


# -- image file format -------------------------------------------------------

IMAGE_MAGIC = b"IM01"


def write_image(path, img: DepthImage):
    """IM01: magic, u32 W/H/channels=2, float32 channel-planar data, pose."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    chans = img.channels().astype("<f4")
    with open(path, "wb") as fh:
        fh.write(IMAGE_MAGIC)
        fh.write(struct.pack("<III", img.width, img.height, 2))
        fh.write(chans.tobytes())
        fh.write(struct.pack("<ff", img.pose.azimuth, img.pose.elevation))


def read_image(path):
    """Read an IM01 file; returns (channels 2xHxW float64, CameraPose)."""
    blob = Path(path).read_bytes()
    if blob[:4] != IMAGE_MAGIC:
        raise ValueError(f"{path}: bad image magic {blob[:4]!r}")
    width, height, n_chan = struct.unpack_from("<III", blob, 4)
    count = n_chan * height * width
    data = np.frombuffer(blob, dtype="<f4", count=count, offset=16)
    psi, theta = struct.unpack_from("<ff", blob, 16 + 4 * count)
    chans = data.reshape(n_chan, height, width).astype(np.float64)
    # float32 roundtrip can graze the range edges; fold back in
    return chans, CameraPose(
        azimuth=psi % 360.0, elevation=min(max(theta, -50.0), 50.0)
    )
