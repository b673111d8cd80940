"""Desk-scale lab for shape-biased low-shot image classification.

Pipeline: procedurally generate labeled 3D object instances, sample surface
point clouds, render orthographic depth/silhouette views, train a point-cloud
embedding space, align an image encoder into it, and evaluate low-shot
episodes against image-only and oracle baselines.
"""

__version__ = "0.1.0"
