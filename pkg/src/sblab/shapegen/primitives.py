"""Closed-form surface areas and area-uniform surface samplers.

Five primitive kinds: box, sphere, cylinder, cone, torus. Samplers draw
points uniformly by surface area in the primitive's local frame (z-up,
centered at the origin), fully vectorized over the numpy Generator passed
in, so point identity is a pure function of the generator state.

Local-frame conventions:
    box      size=(sx, sy, sz) full extents
    sphere   size=(r,)
    cylinder size=(r, h), axis z, caps included
    cone     size=(r, h), base disc at z=-h/2, apex at z=+h/2
    torus    size=(R, r), ring in the xy-plane (axis z), R > r
"""

import math

import numpy as np


def surface_area(kind: str, size) -> float:
    if kind == "box":
        sx, sy, sz = size
        return 2.0 * (sx * sy + sy * sz + sx * sz)
    if kind == "sphere":
        return 4.0 * math.pi * size[0] ** 2
    if kind == "cylinder":
        r, h = size
        return 2.0 * math.pi * r * h + 2.0 * math.pi * r**2
    if kind == "cone":
        r, h = size
        return math.pi * r * math.hypot(r, h) + math.pi * r**2
    if kind == "torus":
        big_r, small_r = size
        return 4.0 * math.pi**2 * big_r * small_r
    raise ValueError(f"unknown primitive kind: {kind!r}")


def _sample_box(rng: np.random.Generator, n: int, size) -> np.ndarray:
    sx, sy, sz = size
    # faces: +x, -x, +y, -y, +z, -z with areas sy*sz, sy*sz, sx*sz, sx*sz, sx*sy, sx*sy
    areas = np.array([sy * sz, sy * sz, sx * sz, sx * sz, sx * sy, sx * sy])
    face = rng.choice(6, size=n, p=areas / areas.sum())
    u = rng.uniform(-0.5, 0.5, size=n)
    v = rng.uniform(-0.5, 0.5, size=n)
    pts = np.empty((n, 3))
    axis = face // 2  # 0=x, 1=y, 2=z
    sign = np.where(face % 2 == 0, 1.0, -1.0)
    half = np.array([sx, sy, sz]) / 2.0
    for ax, (ua, va) in enumerate([(1, 2), (0, 2), (0, 1)]):
        m = axis == ax
        pts[m, ax] = sign[m] * half[ax]
        pts[m, ua] = u[m] * 2.0 * half[ua]
        pts[m, va] = v[m] * 2.0 * half[va]
    return pts


def _sample_sphere(rng: np.random.Generator, n: int, size) -> np.ndarray:
    r = size[0]
    # Archimedes: z uniform on [-r, r] with uniform azimuth is area-uniform
    z = rng.uniform(-r, r, size=n)
    phi = rng.uniform(0.0, 2.0 * math.pi, size=n)
    rho = np.sqrt(np.maximum(r**2 - z**2, 0.0))
    return np.column_stack([rho * np.cos(phi), rho * np.sin(phi), z])


def _sample_cylinder(rng: np.random.Generator, n: int, size) -> np.ndarray:
    r, h = size
    lateral = 2.0 * math.pi * r * h
    cap = math.pi * r**2
    areas = np.array([lateral, cap, cap])
    comp = rng.choice(3, size=n, p=areas / areas.sum())
    phi = rng.uniform(0.0, 2.0 * math.pi, size=n)
    u = rng.uniform(0.0, 1.0, size=n)
    pts = np.empty((n, 3))
    m = comp == 0
    pts[m, 0] = r * np.cos(phi[m])
    pts[m, 1] = r * np.sin(phi[m])
    pts[m, 2] = (u[m] - 0.5) * h
    for which, zsign in ((1, 1.0), (2, -1.0)):
        m = comp == which
        rho = r * np.sqrt(u[m])
        pts[m, 0] = rho * np.cos(phi[m])
        pts[m, 1] = rho * np.sin(phi[m])
        pts[m, 2] = zsign * h / 2.0
    return pts


def _sample_cone(rng: np.random.Generator, n: int, size) -> np.ndarray:
    r, h = size
    lateral = math.pi * r * math.hypot(r, h)
    base = math.pi * r**2
    comp = rng.choice(2, size=n, p=np.array([lateral, base]) / (lateral + base))
    phi = rng.uniform(0.0, 2.0 * math.pi, size=n)
    u = rng.uniform(0.0, 1.0, size=n)
    pts = np.empty((n, 3))
    m = comp == 0
    # unrolled lateral surface is a sector: distance from apex goes as sqrt(u)
    t = np.sqrt(u[m])
    pts[m, 0] = t * r * np.cos(phi[m])
    pts[m, 1] = t * r * np.sin(phi[m])
    pts[m, 2] = h / 2.0 - t * h
    m = comp == 1
    rho = r * np.sqrt(u[m])
    pts[m, 0] = rho * np.cos(phi[m])
    pts[m, 1] = rho * np.sin(phi[m])
    pts[m, 2] = -h / 2.0
    return pts


def _sample_torus(rng: np.random.Generator, n: int, size) -> np.ndarray:
    big_r, small_r = size
    phi = rng.uniform(0.0, 2.0 * math.pi, size=n)
    # tube angle has density proportional to (R + r*cos(theta)); rejection-sample it
    theta = np.empty(n)
    need = np.arange(n)
    while need.size:
        cand = rng.uniform(-math.pi, math.pi, size=need.size)
        accept = rng.uniform(0.0, 1.0, size=need.size) <= (
            (big_r + small_r * np.cos(cand)) / (big_r + small_r)
        )
        theta[need[accept]] = cand[accept]
        need = need[~accept]
    ring = big_r + small_r * np.cos(theta)
    return np.column_stack(
        [ring * np.cos(phi), ring * np.sin(phi), small_r * np.sin(theta)]
    )


_SAMPLERS = {
    "box": _sample_box,
    "sphere": _sample_sphere,
    "cylinder": _sample_cylinder,
    "cone": _sample_cone,
    "torus": _sample_torus,
}

PRIMITIVE_KINDS = tuple(sorted(_SAMPLERS))


def sample_primitive(kind: str, size, n: int, rng: np.random.Generator) -> np.ndarray:
    """n area-uniform surface points of one primitive, local frame."""
    if kind not in _SAMPLERS:
        raise ValueError(f"unknown primitive kind: {kind!r}")
    if n <= 0:
        return np.zeros((0, 3))
    return _SAMPLERS[kind](rng, n, size)


def euler_matrix(angles) -> np.ndarray:
    """Rotation matrix for intrinsic Rz(c) @ Ry(b) @ Rx(a)."""
    a, b, c = angles
    ca, sa = math.cos(a), math.sin(a)
    cb, sb = math.cos(b), math.sin(b)
    cc, sc = math.cos(c), math.sin(c)
    rx = np.array([[1, 0, 0], [0, ca, -sa], [0, sa, ca]])
    ry = np.array([[cb, 0, sb], [0, 1, 0], [-sb, 0, cb]])
    rz = np.array([[cc, -sc, 0], [sc, cc, 0], [0, 0, 1]])
    return rz @ ry @ rx
