"""Generated test meshes.

All generators are deterministic; the noisy ones take an explicit seed.
"""

from __future__ import annotations

import numpy as np

from .mesh import Mesh

__all__ = [
    "tetrahedron",
    "single_triangle",
    "two_triangles",
    "fin",
    "grid",
    "saddle_grid",
    "icosphere",
    "torus",
    "spiked_icosphere",
    "noisy_torus",
    "roof",
    "cube_corner",
    "pyramid",
    "sphere_and_saddle",
    "valence_spike_grid",
    "valence_spike_sphere",
    "pulled_vertex_sphere",
    "FIXTURES",
    "make_fixture",
]


def tetrahedron(edge: float = 1.0) -> Mesh:
    """Regular tetrahedron with outward (counter-clockwise) winding."""
    v = np.array(
        [[1.0, 1.0, 1.0], [1.0, -1.0, -1.0], [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]]
    )
    v *= edge / np.sqrt(8.0)
    f = [[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]]
    return Mesh(v, f)


def single_triangle() -> Mesh:
    h = np.sqrt(3.0) / 2
    return Mesh([[0, 0, 0], [1, 0, 0], [0.5, h, 0]], [[0, 1, 2]])


def two_triangles() -> Mesh:
    return Mesh([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]], [[0, 1, 2], [0, 2, 3]])


def fin() -> Mesh:
    """Three triangles hinged on the edge (0, 1)."""
    v = [[0, 0, 0], [1, 0, 0], [0.5, 1, 0], [0.5, -1, 0], [0.5, 0, 1]]
    return Mesh(v, [[0, 1, 2], [1, 0, 3], [0, 1, 4]])


def grid(n: int = 3, spacing: float = 1.0, height=None) -> Mesh:
    """``n`` x ``n`` vertex grid in the z=0 plane, each cell split along
    its main diagonal. ``height(x, y)`` lifts it to a height field."""
    xs = np.arange(n, dtype=np.float64) * spacing
    X, Y = np.meshgrid(xs, xs, indexing="xy")
    x = X.ravel()
    y = Y.ravel()
    z = np.zeros_like(x) if height is None else np.asarray(height(x, y), dtype=np.float64)
    faces = []
    for j in range(n - 1):
        for i in range(n - 1):
            a = j * n + i
            b, c, d = a + 1, a + n + 1, a + n
            faces += [[a, b, c], [a, c, d]]
    return Mesh(np.column_stack([x, y, z]), faces)


def saddle_grid(n: int = 9, half_width: float = 1.0) -> Mesh:
    """Height field z = x^2 - y^2 on a centered square."""
    spacing = 2 * half_width / (n - 1)
    m = grid(n, spacing)
    v = m.vertices - np.array([half_width, half_width, 0.0])
    v[:, 2] = v[:, 0] ** 2 - v[:, 1] ** 2
    return Mesh(v, m.faces)


def _icosahedron():
    # poles on the z axis so the north pole survives subdivision at (0, 0, 1)
    z = 1 / np.sqrt(5.0)
    r = 2 / np.sqrt(5.0)
    v = [[0.0, 0.0, 1.0]]
    v += [[r * np.cos(2 * np.pi * k / 5), r * np.sin(2 * np.pi * k / 5), z] for k in range(5)]
    v += [
        [r * np.cos(2 * np.pi * (k + 0.5) / 5), r * np.sin(2 * np.pi * (k + 0.5) / 5), -z]
        for k in range(5)
    ]
    v += [[0.0, 0.0, -1.0]]
    f = []
    for k in range(5):
        u0, u1 = 1 + k, 1 + (k + 1) % 5
        l0, l1 = 6 + k, 6 + (k + 1) % 5
        f.append([0, u0, u1])
        f.append([u0, l0, u1])
        f.append([u1, l0, l1])
        f.append([11, l1, l0])
    return np.array(v), np.array(f)


def icosphere(subdivisions: int = 3, radius: float = 1.0) -> Mesh:
    v, f = _icosahedron()
    verts = [tuple(p) for p in v]
    for _ in range(subdivisions):
        cache: dict[tuple[int, int], int] = {}

        def mid(a, b):
            key = (a, b) if a < b else (b, a)
            idx = cache.get(key)
            if idx is None:
                p = (np.asarray(verts[a]) + np.asarray(verts[b])) / 2
                p = p / np.linalg.norm(p)
                idx = len(verts)
                verts.append(tuple(p))
                cache[key] = idx
            return idx

        nf = []
        for a, b, c in f:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            nf += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        f = np.array(nf)
    return Mesh(np.array(verts) * radius, f)


def torus(nu: int = 32, nv: int = 16, major: float = 1.0, minor: float = 0.4) -> Mesh:
    """Quad grid with wraparound in both directions, split into triangles."""
    u = 2 * np.pi * np.arange(nu) / nu
    w = 2 * np.pi * np.arange(nv) / nv
    U, W = np.meshgrid(u, w, indexing="ij")
    x = (major + minor * np.cos(W)) * np.cos(U)
    y = (major + minor * np.cos(W)) * np.sin(U)
    z = minor * np.sin(W)
    v = np.column_stack([x.ravel(), y.ravel(), z.ravel()])
    faces = []
    for i in range(nu):
        for j in range(nv):
            a = i * nv + j
            b = ((i + 1) % nu) * nv + j
            c = ((i + 1) % nu) * nv + (j + 1) % nv
            d = i * nv + (j + 1) % nv
            faces += [[a, b, c], [a, c, d]]
    return Mesh(v, faces)


def spiked_icosphere(
    subdivisions: int = 5,
    n_spikes: int = 60,
    height: float = 0.2,
    roughness: float = 0.005,
    seed: int = 0,
) -> Mesh:
    """Icosphere with ``n_spikes`` vertices pushed outward.

    A smooth low-frequency bump field is superimposed, then every vertex is
    scaled radially by ``1 + N(0, roughness)`` to mimic scan noise. Spike
    heights are drawn uniformly in ``[height/4, height]`` (relative to the
    radius).
    """
    m = icosphere(subdivisions)
    rng = np.random.default_rng(seed)
    v = m.vertices.copy()
    bumps = 1.0 + 0.05 * np.sin(3 * v[:, 0]) * np.cos(2 * v[:, 1]) + 0.03 * np.sin(4 * v[:, 2])
    v *= bumps[:, None]
    if roughness:
        v *= (1.0 + rng.normal(0.0, roughness, size=len(v)))[:, None]
    idx = rng.choice(len(v), size=n_spikes, replace=False)
    v[idx] *= 1.0 + rng.uniform(height / 4, height, size=n_spikes)[:, None]
    return Mesh(v, m.faces)


def noisy_torus(
    nu: int = 100, nv: int = 60, noise: float = 0.01, seed: int = 0,
    major: float = 1.0, minor: float = 0.4,
) -> Mesh:
    """Torus with Gaussian displacement along the tube normal."""
    m = torus(nu, nv, major, minor)
    rng = np.random.default_rng(seed)
    v = m.vertices.copy()
    ring = v.copy()
    ring[:, 2] = 0
    ring *= (major / np.linalg.norm(ring, axis=1))[:, None]
    normal = v - ring
    normal /= np.linalg.norm(normal, axis=1)[:, None]
    v += normal * rng.normal(0.0, noise, size=len(v))[:, None]
    return Mesh(v, m.faces)


def roof(n: int = 5, width: float = 1.0) -> Mesh:
    """Two planar strips meeting along the y axis at a 90 degree crease
    (each strip tilted 45 degrees), ridge up. Outward normals point up."""
    xs = np.linspace(-width, width, 2 * n - 1)
    ys = np.linspace(0, width * 2, n)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    Z = width - np.abs(X)
    v = np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])
    nx = len(xs)
    faces = []
    for j in range(n - 1):
        for i in range(nx - 1):
            a = j * nx + i
            b, c, d = a + 1, a + nx + 1, a + nx
            faces += [[a, b, c], [a, c, d]]
    return Mesh(v, faces)


def cube_corner() -> Mesh:
    """Corner of a unit cube: three unit squares meeting at the origin,
    normals pointing away from the cube interior."""
    v = [
        [0, 0, 0],
        [1, 0, 0], [1, 1, 0], [0, 1, 0],
        [0, 1, 1], [0, 0, 1], [1, 0, 1],
    ]
    # bottom (z=0), left (x=0), front (y=0); outward = -z, -x, -y
    f = [
        [0, 2, 1], [0, 3, 2],
        [0, 4, 3], [0, 5, 4],
        [0, 6, 5], [0, 1, 6],
    ]
    return Mesh(v, f)


def pyramid(height: float = 1.0, sides: int = 6) -> Mesh:
    """Apex 0 above a regular polygon in the z=0 plane."""
    ang = 2 * np.pi * np.arange(sides) / sides
    v = [[0.0, 0.0, height]] + [[np.cos(a), np.sin(a), 0.0] for a in ang]
    f = [[0, 1 + k, 1 + (k + 1) % sides] for k in range(sides)]
    return Mesh(v, f)


def sphere_and_saddle(
    subdivisions: int = 4, n: int = 60, jitter: float = 0.25, seed: int = 0
) -> Mesh:
    """Two components: a unit icosphere and a jittered saddle patch beside it.

    The saddle patch vertices are jittered in the parameter plane so that the
    triangulation is irregular (Voronoi and barycentric areas differ).
    """
    s = icosphere(subdivisions)
    rng = np.random.default_rng(seed)
    g = grid(n, 2.0 / (n - 1))
    uv = g.vertices[:, :2] - 1.0
    interior = (np.abs(uv) < 1 - 1e-9).all(1)
    step = 2.0 / (n - 1)
    uv[interior] += rng.uniform(-jitter, jitter, size=(interior.sum(), 2)) * step
    z = 0.5 * (uv[:, 0] ** 2 - uv[:, 1] ** 2)
    patch = np.column_stack([uv[:, 0] + 3.0, uv[:, 1], z])
    v = np.vstack([s.vertices, patch])
    f = np.vstack([s.faces, g.faces + s.n_vertices])
    return Mesh(v, f)


def valence_spike_grid(n: int = 7, fan: int = 20) -> Mesh:
    """Planar grid plus one extra vertex, outside the grid, that is
    joined by a fan of ``fan`` triangles to a row of new collinear points."""
    g = grid(n)
    v = list(map(list, g.vertices))
    faces = [list(t) for t in g.faces]
    hub = len(v)
    v.append([(n - 1) / 2, -3.0, 0.0])
    start = len(v)
    xs = np.linspace(-1.0, n, fan + 1)
    for x in xs:
        v.append([x, -1.0, 0.0])
    for k in range(fan):
        faces.append([hub, start + k + 1, start + k])
    return Mesh(v, faces)


def valence_spike_sphere(subdivisions: int = 3) -> Mesh:
    """Icosphere whose north pole (vertex 0) is joined directly to its
    second ring: the first ring is removed and the hole refanned from the
    pole, giving one high-valence vertex with long thin faces."""
    m = icosphere(subdivisions)
    v, f = m.vertices, m.faces
    touch = (f == 0).any(1)
    ring = set(np.unique(f[touch]).tolist()) - {0}
    keep = ~np.isin(f, list(ring) + [0]).any(1)
    outer = sorted(set(np.unique(f[np.isin(f, list(ring)).any(1)]).tolist()) - ring - {0})
    outer.sort(key=lambda k: np.arctan2(v[k, 1], v[k, 0]))
    fan = [[0, outer[k], outer[(k + 1) % len(outer)]] for k in range(len(outer))]
    faces = np.vstack([f[keep], np.array(fan)])
    used = np.unique(faces)
    remap = np.full(len(v), -1)
    remap[used] = np.arange(len(used))
    return Mesh(v[used], remap[faces])


def pulled_vertex_sphere(subdivisions: int = 3, factor: float = 1.2, vertex: int = 0) -> Mesh:
    """Icosphere with one vertex moved radially outward by ``factor``."""
    m = icosphere(subdivisions)
    v = m.vertices.copy()
    v[vertex] *= factor
    return Mesh(v, m.faces)


FIXTURES = {
    "tetrahedron": tetrahedron,
    "grid": lambda: grid(9),
    "icosphere": lambda: icosphere(3),
    "torus": torus,
    "spiked-icosphere": spiked_icosphere,
    "noisy-torus": noisy_torus,
    "roof": roof,
    "cube-corner": cube_corner,
    "saddle": saddle_grid,
    "sphere-saddle": sphere_and_saddle,
}


def make_fixture(name: str) -> Mesh:
    try:
        return FIXTURES[name]()
    except KeyError:
        raise ValueError(f"unknown fixture {name!r}; choose from {sorted(FIXTURES)}") from None
