import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jonesfem.mesh import (
    MeshError,
    MeshFormatError,
    SigmaSelector,
    generate_annulus,
    generate_disk,
    generate_rectangle,
    load_mesh,
    mesh_from_spec,
    polygon_perimeter,
    save_mesh,
    sigma_measure,
)


def test_rectangle_counts():
    m = generate_rectangle(1, 1, 1, 1)
    assert (m.n_vertices, m.n_triangles, m.n_facets) == (4, 2, 4)
    m = generate_rectangle(1, 1, 2, 2)
    assert (m.n_vertices, m.n_triangles, m.n_facets) == (9, 8, 8)


def test_rectangle_bottom_length_exact():
    m = generate_rectangle(2, 1, 4, 2)
    assert sigma_measure(m, SigmaSelector([1])) == 2.0


def test_rectangle_tags_and_normals():
    m = generate_rectangle(2, 1, 4, 2)
    expected = {1: (0, -1), 2: (1, 0), 3: (0, 1), 4: (-1, 0)}
    n = m.facet_normals()
    for tag, vec in expected.items():
        sel = m.facet_tags == tag
        assert sel.any()
        assert np.array_equal(n[sel], np.tile(vec, (sel.sum(), 1)).astype(float))


@pytest.mark.parametrize("args", [(0, 1, 2, 2), (1, -1, 2, 2), (1, 1, 0, 2), (1, 1, 2, 1.5)])
def test_rectangle_invalid(args):
    with pytest.raises(MeshError):
        generate_rectangle(*args)


def test_disk_small_polygon():
    m = generate_disk(1, 8, 1)
    assert m.n_facets == 8
    assert m.facet_lengths().sum() < 2 * math.pi


def test_disk_midpoints_on_inscribed_circle(disk256):
    r = np.hypot(*disk256.facet_midpoints().T)
    assert np.all(np.abs(r - math.cos(math.pi / 256)) < disk256.facet_lengths() ** 2)


def test_disk_normals_nearly_radial(disk64):
    mid = disk64.facet_midpoints()
    radial = mid / np.hypot(*mid.T)[:, None]
    cos = np.einsum("ij,ij->i", disk64.facet_normals(), radial)
    assert np.all(np.abs(cos - 1) <= (math.pi / 64) ** 2)


def test_disk_chord_bound(disk64):
    assert disk64.facet_lengths().max() <= 2 * math.pi / 64


@pytest.mark.parametrize("args", [(1, 7, 2), (1, 16, 0), (0, 16, 2)])
def test_disk_invalid(args):
    with pytest.raises(MeshError):
        generate_disk(*args)


def test_annulus_inner_normals_point_inward():
    m = generate_annulus(0.5, 1.0, 64, 4)
    inner = m.facet_tags == 1
    mid = m.facet_midpoints()[inner]
    assert np.all(np.einsum("ij,ij->i", m.facet_normals()[inner], mid) < 0)


def test_annulus_counts_and_lengths():
    assert generate_annulus(0.5, 1.0, 8, 1).n_facets == 16
    m = generate_annulus(0.25, 1.0, 128, 8)
    for tag, r in ((1, 0.25), (2, 1.0)):
        length = sigma_measure(m, SigmaSelector([tag]))
        assert abs(length - 2 * math.pi * r) < 0.01 * 2 * math.pi * r


def test_annulus_invalid():
    with pytest.raises(MeshError):
        generate_annulus(1.0, 1.0, 16, 2)


def test_sigma_measure(square8, disk256):
    assert sigma_measure(square8, SigmaSelector([1])) == pytest.approx(1.0, abs=1e-15)
    assert sigma_measure(square8, SigmaSelector([1, 4])) == pytest.approx(2.0, abs=1e-15)
    assert sigma_measure(disk256, SigmaSelector([1])) == pytest.approx(polygon_perimeter(256), rel=1e-13)


def test_sigma_empty_or_missing(square8):
    with pytest.raises(MeshError, match="empty"):
        SigmaSelector([]).mask(square8)
    with pytest.raises(MeshError, match="do not exist"):
        SigmaSelector([7]).mask(square8)


def test_euler_characteristic(square8, disk64, annulus):
    assert square8.euler_characteristic() == 1
    assert disk64.euler_characteristic() == 1
    # the annulus has a hole
    assert annulus.euler_characteristic() == 0


def test_normals_follow_orientation(disk64):
    d = disk64.vertices[disk64.facets[:, 1]] - disk64.vertices[disk64.facets[:, 0]]
    rot = np.column_stack([d[:, 1], -d[:, 0]]) / np.hypot(*d.T)[:, None]
    assert np.array_equal(rot, disk64.facet_normals())
    # adjacent triangle's third vertex lies on the inner side
    tri = disk64.triangles[disk64.facet_triangle]
    centroid = disk64.vertices[tri].mean(axis=1)
    assert np.all(np.einsum("ij,ij->i", centroid - disk64.facet_midpoints(), rot) < 0)


def test_perimeter_increases_with_refinement():
    per = [generate_disk(1, n, 2).facet_lengths().sum() for n in (8, 16, 32, 64)]
    assert all(a < b < 2 * math.pi for a, b in zip(per, per[1:]))


def test_all_areas_positive(disk256, annulus):
    assert disk256.signed_areas().min() > 0
    assert annulus.signed_areas().min() > 0
    assert disk256.signed_areas().sum() == pytest.approx(0.5 * 256 * math.sin(2 * math.pi / 256), rel=1e-12)


def test_save_load_roundtrip(tmp_path, disk64):
    for mesh in (generate_rectangle(1, 1, 2, 2), disk64):
        path = tmp_path / "m.m2d"
        save_mesh(mesh, path)
        back = load_mesh(path)
        assert back.equals(mesh)
        assert np.array_equal(back.vertices, mesh.vertices)


def test_load_comments_ignored(tmp_path):
    path = tmp_path / "m.m2d"
    save_mesh(generate_rectangle(1, 1, 1, 1), path)
    lines = path.read_text().splitlines()
    path.write_text("# header comment\n" + "\n".join(lines[:3] + ["# inside"] + lines[3:]) + "\n")
    assert load_mesh(path).n_triangles == 2


def _write(tmp_path, text):
    p = tmp_path / "bad.m2d"
    p.write_text(text)
    return p


def test_load_index_out_of_range(tmp_path):
    p = _write(tmp_path, "mesh2d 1\nvertices 3\n0 0\n1 0\n0 1\ntriangles 1\n0 1 3\nboundary 0\n")
    with pytest.raises(MeshFormatError) as err:
        load_mesh(p)
    assert err.value.lineno == 7
    assert "line 7" in str(err.value)


def test_load_no_elements(tmp_path):
    p = _write(tmp_path, "mesh2d 1\nvertices 3\n0 0\n1 0\n0 1\ntriangles 0\nboundary 0\n")
    with pytest.raises(MeshFormatError, match="no elements"):
        load_mesh(p)


def test_load_bad_header(tmp_path):
    with pytest.raises(MeshFormatError, match="line 1"):
        load_mesh(_write(tmp_path, "mesh3d 1\n"))


def test_load_non_boundary_facet(tmp_path):
    text = "mesh2d 1\nvertices 4\n0 0\n1 0\n1 1\n0 1\ntriangles 2\n0 1 2\n0 2 3\nboundary 1\n0 2 1\n"
    with pytest.raises(MeshFormatError, match="not a boundary edge"):
        load_mesh(_write(tmp_path, text))


def test_mesh_from_spec():
    assert mesh_from_spec({"shape": "rect", "nx": 8}).n_vertices == 81
    with pytest.raises(MeshError, match="valid shapes"):
        mesh_from_spec({"shape": "hexagon"})


@settings(max_examples=25, deadline=None)
@given(
    a=st.floats(0.1, 10),
    b=st.floats(0.1, 10),
    nx=st.integers(1, 6),
    ny=st.integers(1, 6),
)
def test_rectangle_properties(a, b, nx, ny):
    m = generate_rectangle(a, b, nx, ny)
    assert m.n_triangles == 2 * nx * ny
    assert m.n_vertices == (nx + 1) * (ny + 1)
    assert m.euler_characteristic() == 1
    assert np.all(m.signed_areas() > 0)
    assert m.signed_areas().sum() == pytest.approx(a * b, rel=1e-12)
    assert np.allclose(np.hypot(*m.facet_normals().T), 1.0, atol=1e-15)


@settings(max_examples=15, deadline=None)
@given(nb=st.integers(8, 80), nr=st.integers(1, 6), r=st.floats(0.1, 5))
def test_disk_properties(nb, nr, r):
    m = generate_disk(r, nb, nr)
    assert m.n_facets == nb
    assert m.euler_characteristic() == 1
    assert np.all(m.signed_areas() > 0)
    assert m.facet_lengths().max() <= 2 * math.pi * r / nb
