"""Surface extraction, vertex coloring, mirroring, and mesh file round trips."""

from collections import Counter

import numpy as np
import pytest
from scipy.ndimage import gaussian_filter

from oracles import nearest_center_color_oracle
from voxdetail.grids import ColorGrid, DensityGrid
from voxdetail.mesh import (ColoredMesh, colorize, marching_cubes,
                            mirror_symmetric, read_mesh, write_mesh)


def edge_counts(mesh):
    cnt = Counter()
    for a, b, c in mesh.triangles:
        for e in ((a, b), (b, c), (c, a)):
            cnt[tuple(sorted(e))] += 1
    return cnt


def signed_volume(mesh):
    v = mesh.vertices.astype(np.float64)
    t = mesh.triangles
    return np.einsum("ij,ij->i", v[t[:, 0]],
                     np.cross(v[t[:, 1]], v[t[:, 2]])).sum() / 6.0


def blob(dims=12, seed=0, sigma=1.2):
    rng = np.random.default_rng(seed)
    d = gaussian_filter(rng.random((dims,) * 3), sigma)
    d = (d - d.min()) / (d.max() - d.min())
    return DensityGrid(d.astype(np.float32))


# five-face unit cube, open at x=1, wound outward
_CORNERS = np.array([[x, y, z] for x in (0, 1) for y in (0, 1) for z in (0, 1)],
                    np.float32)
_OPEN_BOX_QUADS = [  # all faces except x=1
    (0, 1, 3, 2),    # x=0, normal -x
    (0, 4, 5, 1),    # y=0, normal -y
    (2, 3, 7, 6),    # y=1, normal +y
    (0, 2, 6, 4),    # z=0, normal -z
    (1, 5, 7, 3),    # z=1, normal +z
]


def open_box():
    tris = []
    for a, b, c, d in _OPEN_BOX_QUADS:
        tris += [(a, b, c), (a, c, d)]
    colors = np.linspace(0, 1, 24).reshape(8, 3).astype(np.float32)
    return ColoredMesh(_CORNERS.copy(), np.array(tris, np.int32), colors)


# ------------------------------------------------------------ marching cubes


def test_solid_cube_is_closed_with_outward_normals():
    vol = np.zeros((10, 10, 10), np.float32)
    vol[1:9, 1:9, 1:9] = 1.0
    m = marching_cubes(DensityGrid(vol), 0.5)
    cnt = edge_counts(m)
    assert set(cnt.values()) == {2}
    assert m.n_vertices - len(cnt) + m.n_triangles == 2
    assert signed_volume(m) > 0


def test_all_zero_gives_empty_mesh():
    m = marching_cubes(DensityGrid(np.zeros((6, 6, 6), np.float32)), 0.5)
    assert m.n_vertices == 0 and m.n_triangles == 0


def test_iso_level_validation():
    d = DensityGrid(np.zeros((4, 4, 4), np.float32))
    for iso in (0.0, 1.0, -0.5, 2.0):
        with pytest.raises(ValueError):
            marching_cubes(d, iso)


def test_vertices_interpolate_straddling_edges():
    d = blob()
    m = marching_cubes(d, 0.5)
    assert m.n_vertices > 100
    for p in m.vertices:
        frac = p - np.floor(p)
        axis = int(np.argmax(frac))
        lo = np.floor(p).astype(int)
        hi = lo.copy()
        hi[axis] += 1
        d0, d1 = float(d.data[tuple(lo)]), float(d.data[tuple(hi)])
        assert (d0 < 0.5) != (d1 < 0.5)
        t = float(p[axis]) - lo[axis]
        assert abs(d0 + t * (d1 - d0) - 0.5) < 1e-6


def test_pad_closes_boundary_shapes():
    m = marching_cubes(DensityGrid(np.ones((4, 4, 4), np.float32)), 0.5,
                       pad=True)
    cnt = edge_counts(m)
    assert set(cnt.values()) == {2}
    assert m.n_vertices - len(cnt) + m.n_triangles == 2
    assert m.vertices.min() == -0.5 and m.vertices.max() == 3.5
    # without padding the all-ones volume has no crossings at all
    assert marching_cubes(DensityGrid(np.ones((4, 4, 4), np.float32)),
                          0.5).n_vertices == 0


def test_extraction_is_deterministic_and_welded():
    d = blob(seed=3)
    m1 = marching_cubes(d, 0.5)
    m2 = marching_cubes(d, 0.5)
    assert np.array_equal(m1.vertices, m2.vertices)
    assert np.array_equal(m1.triangles, m2.triangles)
    assert len(np.unique(m1.vertices, axis=0)) == m1.n_vertices


def test_mesh_validation():
    with pytest.raises(ValueError):
        ColoredMesh(np.array([[0, 0, np.nan]]), np.zeros((0, 3), np.int32))
    with pytest.raises(ValueError):
        ColoredMesh(np.zeros((2, 3)), np.array([[0, 1, 2]]))
    with pytest.raises(ValueError):
        ColoredMesh(np.zeros((2, 3)), np.zeros((0, 3), np.int32),
                    np.zeros((3, 3)))


# ----------------------------------------------------------------- colorize


def test_colorize_constant_texture():
    m = marching_cubes(blob(), 0.5)
    tex = ColorGrid(np.full((12, 12, 12, 3), 0.25, np.float32))
    assert np.all(colorize(m, tex).colors == 0.25)


def test_colorize_vertex_at_center_and_tie_rule():
    tex = np.zeros((4, 4, 4, 3), np.float32)
    tex[1, 2, 3] = (0.1, 0.2, 0.3)
    tex[2, 0, 0] = (0.9, 0.8, 0.7)
    m = ColoredMesh(np.array([[1, 2, 3], [1.5, 0, 0]], np.float32),
                    np.zeros((0, 3), np.int32))
    got = colorize(m, ColorGrid(tex)).colors
    assert np.array_equal(got[0], tex[1, 2, 3])
    # exactly halfway rounds up to index 2
    assert np.array_equal(got[1], tex[2, 0, 0])


def test_colorize_matches_nearest_center_oracle():
    m = marching_cubes(blob(seed=5), 0.5)
    rng = np.random.default_rng(9)
    tex = rng.random((12, 12, 12, 3)).astype(np.float32)
    got = colorize(m, ColorGrid(tex)).colors
    for p, c in zip(m.vertices[::7], got[::7]):
        assert np.array_equal(c, nearest_center_color_oracle(p, tex))


def test_colorize_trilinear_ramp():
    tex = np.zeros((4, 4, 4, 3), np.float32)
    tex[..., 0] = (np.arange(4) / 3.0)[:, None, None]
    m = ColoredMesh(np.array([[1.25, 1, 1]], np.float32),
                    np.zeros((0, 3), np.int32))
    got = colorize(m, ColorGrid(tex), interpolate=True).colors
    assert abs(got[0, 0] - 1.25 / 3.0) < 1e-6
    assert got[0, 1] == got[0, 2] == 0.0


# --------------------------------------------------------------- mirroring


def test_mirror_welds_and_closes():
    m = mirror_symmetric(open_box(), (0, 1.0))
    assert m.n_vertices == 12          # 8 + 4 mirrored, 4 welded on plane
    assert m.n_triangles == 20
    cnt = edge_counts(m)
    assert set(cnt.values()) == {2}
    assert m.n_vertices - len(cnt) + m.n_triangles == 2
    assert abs(signed_volume(m) - 2.0) < 1e-6   # 1x1x2 box


def test_mirror_reflection_is_involution():
    half = open_box()
    m = mirror_symmetric(half, (0, 1.0))
    appended = m.vertices[half.n_vertices:]
    back = appended.copy()
    back[:, 0] = 2.0 - back[:, 0]
    off_plane = half.vertices[np.abs(half.vertices[:, 0] - 1.0) >= 1e-6]
    a = np.array(sorted(map(tuple, back)))
    b = np.array(sorted(map(tuple, off_plane)))
    assert np.allclose(a, b, atol=1e-6)


def test_mirror_carries_colors_and_flips_winding():
    half = open_box()
    m = mirror_symmetric(half, (0, 1.0))
    src = np.nonzero(np.abs(half.vertices[:, 0] - 1.0) >= 1e-6)[0]
    assert np.array_equal(m.colors[half.n_vertices:], half.colors[src])
    with pytest.raises(ValueError):
        mirror_symmetric(half, (3, 0.0))


# -------------------------------------------------------------- file formats


def test_ply_round_trip():
    m = colorize(marching_cubes(blob(seed=2), 0.5),
                 ColorGrid(np.random.default_rng(1).random((12, 12, 12, 3))
                           .astype(np.float32)))
    write_mesh(m, "ply", "/tmp/mesh_rt.ply")
    r = read_mesh("/tmp/mesh_rt.ply")
    assert np.array_equal(r.vertices, m.vertices)
    assert np.array_equal(r.triangles, m.triangles)
    assert np.abs(r.colors - m.colors).max() <= 0.5 / 255 + 1e-7


def test_obj_round_trip_exact():
    m = colorize(marching_cubes(blob(seed=4), 0.5),
                 ColorGrid(np.random.default_rng(2).random((12, 12, 12, 3))
                           .astype(np.float32)))
    write_mesh(m, "obj", "/tmp/mesh_rt.obj")
    r = read_mesh("/tmp/mesh_rt.obj")
    assert np.array_equal(r.vertices, m.vertices)
    assert np.array_equal(r.triangles, m.triangles)
    assert np.array_equal(r.colors, m.colors)


def test_empty_mesh_round_trip():
    empty = ColoredMesh(np.zeros((0, 3), np.float32), np.zeros((0, 3), np.int32))
    for fmt, path in (("ply", "/tmp/empty.ply"), ("obj", "/tmp/empty.obj")):
        write_mesh(empty, fmt, path)
        r = read_mesh(path)
        assert r.n_vertices == 0 and r.n_triangles == 0
    with pytest.raises(ValueError):
        write_mesh(empty, "stl", "/tmp/x.stl")
