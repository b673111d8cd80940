"""Dataset generation: realize recipes, sample clouds, render views, write files.

Each instance owns RNG streams derived from (dataset seed, category, index),
so generation is embarrassingly parallel and the output bytes are identical
for any thread count.
"""

from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from .dataio import write_manifest, write_pointcloud
from .errors import ConfigError
from .render import render_views, write_image
from .rng import derive_seed, rng_from
from .shapegen.recipes import realize, sample_surface_points


def generate_dataset(recipes, instances_per_category: int, seed: int) -> list:
    """Realize all instances; returns the list of ShapeInstance records."""
    seen = set()
    for recipe in recipes:
        if recipe.category_id in seen:
            raise ConfigError(f"duplicate category_id {recipe.category_id}")
        seen.add(recipe.category_id)
    instances = []
    for recipe in recipes:
        for idx in range(instances_per_category):
            inst_seed = derive_seed(seed, recipe.category_id, idx)
            instances.append(realize(recipe, inst_seed, index=idx))
    return instances


def _emit_instance(root: Path, instance, n_points, n_views, image_size, splat_radius):
    points = sample_surface_points(
        instance, n_points, rng_from(instance.rng_seed, "points")
    )
    point_file = f"ptcld/{instance.instance_id}.f32"
    write_pointcloud(root / point_file, points)
    views = render_views(
        points,
        n_views,
        rng_from(instance.rng_seed, "views"),
        width=image_size,
        height=image_size,
        splat_radius=splat_radius,
    )
    image_files = []
    for v, img in enumerate(views):
        name = f"img/{instance.instance_id}_{v}.f32"
        write_image(root / name, img)
        image_files.append(name)
    return {
        "instance_id": instance.instance_id,
        "category_id": instance.category_id,
        "category_name": instance.category_name,
        "point_file": point_file,
        "image_files": image_files,
    }


def build_dataset_dir(
    root,
    recipes,
    instances_per_category: int,
    n_points: int,
    n_views: int,
    image_size: int,
    splat_radius: int,
    seed: int,
    name: str = "procedural",
    threads: int = 1,
):
    """Generate and write the full dataset directory; returns the manifest records."""
    root = Path(root)
    instances = generate_dataset(recipes, instances_per_category, seed)

    def emit(instance):
        return _emit_instance(
            root, instance, n_points, n_views, image_size, splat_radius
        )

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(emit, instances))
    else:
        records = [emit(instance) for instance in instances]
    write_manifest(root, name, seed, records)
    return records
