import numpy as np
import pytest
from hypothesis import given, strategies as st

from holrecon.errors import ConfigurationError
from holrecon.mesh import BOUNDARY_TOL, boundary_edges, boundary_normals, build_disk_mesh


def check_valid(mesh):
    assert np.all(mesh.signed_areas() > 0)
    t = mesh.triangles
    e = np.sort(np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]]), axis=1)
    uniq, counts = np.unique(e, axis=0, return_counts=True)
    assert counts.max() <= 2
    bset = set(mesh.boundary_vertices.tolist())
    for a, b in uniq[counts == 1]:
        assert a in bset and b in bset
    r = np.hypot(*mesh.vertices.T)
    assert r.max() <= 1 + 1e-12
    assert np.all(np.abs(r[mesh.boundary_vertices] - 1) <= BOUNDARY_TOL)
    lengths = mesh.edge_lengths()
    assert lengths.max() <= 3 * lengths.min()


@given(st.integers(4, 40))
def test_mesh_invariants(n):
    check_valid(build_disk_mesh(n))


def test_resolution_below_four_rejected():
    with pytest.raises(ConfigurationError):
        build_disk_mesh(3)


def test_coarse_area():
    assert abs(build_disk_mesh(4).area() - np.pi) / np.pi < 0.02


def test_res32_area():
    assert abs(build_disk_mesh(32).area() - np.pi) / np.pi < 1e-3


def test_area_converges_second_order():
    errs = [np.pi - build_disk_mesh(n).area() for n in (8, 16, 32, 64)]
    ratios = [errs[i] / errs[i + 1] for i in range(3)]
    assert all(3.5 <= r <= 4.5 for r in ratios), ratios


def test_mean_edge_at_64():
    # ring construction gives a mean edge slightly below the nominal 2/64
    mesh = build_disk_mesh(64)
    assert abs(mesh.mean_edge_length() - 3.1e-2) / 3.1e-2 < 0.10
    assert mesh.h_target == pytest.approx(2 / 64)


@pytest.mark.parametrize("n,tol", [(8, 0.01), (64, 5e-4)])
def test_boundary_loop_length(n, tol):
    mesh = build_disk_mesh(n)
    e = boundary_edges(mesh)
    length = np.linalg.norm(mesh.vertices[e[:, 1]] - mesh.vertices[e[:, 0]], axis=1).sum()
    assert abs(length - 2 * np.pi) / (2 * np.pi) < tol
    nb = len(mesh.boundary_vertices)
    assert length == pytest.approx(2 * nb * np.sin(np.pi / nb), rel=1e-12)


@given(st.integers(4, 30))
def test_boundary_loop_closed_ccw_outward(n):
    mesh = build_disk_mesh(n)
    e = boundary_edges(mesh)
    assert e[0, 0] == e[-1, 1]
    assert np.all(e[1:, 0] == e[:-1, 1])
    p = mesh.vertices
    signed = 0.5 * np.sum(p[e[:, 0], 0] * p[e[:, 1], 1] - p[e[:, 1], 0] * p[e[:, 0], 1])
    assert signed > 0
    mid = 0.5 * (p[e[:, 0]] + p[e[:, 1]])
    nrm = boundary_normals(mesh, e)
    assert np.all(np.sum(nrm * mid, axis=1) > 0.9)


def test_write_text(tmp_path):
    mesh = build_disk_mesh(4)
    path = tmp_path / "m.txt"
    mesh.write_text(path)
    lines = path.read_text().splitlines()
    assert int(lines[0]) == mesh.n_vertices
    assert int(lines[mesh.n_vertices + 1]) == mesh.n_triangles
