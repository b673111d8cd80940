"""Dataset directory layout: manifest.json plus binary point/image files.

    <root>/manifest.json
    <root>/ptcld/<instance_id>.f32      "PC01", u32 LE count, float32 LE xyz
    <root>/img/<instance_id>_<v>.f32    IM01 (see render module)
"""

import json
import struct
from pathlib import Path

import numpy as np

from .render import read_image

POINTS_MAGIC = b"PC01"


def write_pointcloud(path, points: np.ndarray):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pts = np.ascontiguousarray(points, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(POINTS_MAGIC)
        fh.write(struct.pack("<I", pts.shape[0]))
        fh.write(pts.tobytes())


def read_pointcloud(path) -> np.ndarray:
    blob = Path(path).read_bytes()
    if blob[:4] != POINTS_MAGIC:
        raise ValueError(f"{path}: bad point-cloud magic {blob[:4]!r}")
    (count,) = struct.unpack_from("<I", blob, 4)
    data = np.frombuffer(blob, dtype="<f4", count=count * 3, offset=8)
    return data.reshape(count, 3).astype(np.float64)


class Dataset:
    """Read-side view of a generated dataset directory, with caching."""

    def __init__(self, root, manifest: dict):
        self.root = Path(root)
        self.name = manifest["name"]
        self.seed = manifest["seed"]
        self.instances = manifest["instances"]
        self._by_id = {rec["instance_id"]: rec for rec in self.instances}
        self._points_cache = {}
        self._image_cache = {}

    @classmethod
    def open(cls, root) -> "Dataset":
        root = Path(root)
        manifest_path = root / "manifest.json"
        if not manifest_path.exists():
            raise FileNotFoundError(f"no manifest at {manifest_path}")
        return cls(root, json.loads(manifest_path.read_text()))

    @property
    def category_ids(self) -> list:
        return sorted({rec["category_id"] for rec in self.instances})

    def category_name(self, category_id: int) -> str:
        for rec in self.instances:
            if rec["category_id"] == category_id:
                return rec["category_name"]
        raise KeyError(category_id)

    def instances_of(self, category_id: int) -> list:
        return [r["instance_id"] for r in self.instances if r["category_id"] == category_id]

    def category_of(self, instance_id: str) -> int:
        return self._by_id[instance_id]["category_id"]

    def n_views(self, instance_id: str) -> int:
        return len(self._by_id[instance_id]["image_files"])

    def load_points(self, instance_id: str) -> np.ndarray:
        if instance_id not in self._points_cache:
            rec = self._by_id[instance_id]
            self._points_cache[instance_id] = read_pointcloud(
                self.root / rec["point_file"]
            )
        return self._points_cache[instance_id]

    def load_image(self, instance_id: str, view: int) -> np.ndarray:
        """2xHxW channel array (normalized depth with background 0, silhouette)."""
        key = (instance_id, view)
        if key not in self._image_cache:
            rec = self._by_id[instance_id]
            chans, _pose = read_image(self.root / rec["image_files"][view])
            self._image_cache[key] = chans
        return self._image_cache[key]


def write_manifest(root, name: str, seed: int, records: list):
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    manifest = {"name": name, "seed": seed, "instances": records}
    (root / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True))
