import numpy as np
import pytest

from kernelrom.errors import InvalidGridError, InvalidParameterError
from kernelrom.geometry import (LENGTHSCALE_SENTINEL, fill_distance, make_grid,
                                make_periodic_grid, maximin_order, sparsity_pattern)


def brute_force_maximin(points, seed):
    """Independent O(M^3) greedy selection used as the oracle."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    m = len(pts)
    chosen = [seed]
    lengths = [np.inf]
    while len(chosen) < m:
        best, best_d = None, -1.0
        for i in range(m):
            if i in chosen:
                continue
            d = min(np.linalg.norm(pts[i] - pts[j]) for j in chosen)
            if d > best_d + 1e-15:
                best, best_d = i, d
        chosen.append(best)
        lengths.append(best_d)
    return chosen, lengths


class TestMakeGrid:
    def test_two_by_two_is_all_corners(self):
        g = make_grid([[0, 1], [0, 1]], (2, 2))
        assert g.n_points == 4
        assert g.boundary_mask.all()
        assert sorted(map(tuple, g.points)) == [(0, 0), (0, 1), (1, 0), (1, 1)]

    def test_1d_three_points(self):
        g = make_grid([[0, 1]], 3)
        assert np.allclose(g.points[:, 0], [0.0, 0.5, 1.0])
        assert list(g.boundary_mask) == [True, False, True]

    def test_32_grid_boundary_count(self):
        g = make_grid([[0, 1], [0, 1]], (32, 32))
        assert g.n_points == 1024
        # oracle: enumerate lattice points on a face
        count = sum(1 for i in range(32) for j in range(32)
                    if i in (0, 31) or j in (0, 31))
        assert count == 4 * 32 - 4 == 124
        assert g.boundary_mask.sum() == count

    def test_rejects_single_point_axis(self):
        with pytest.raises(InvalidGridError):
            make_grid([[0, 1]], 1)

    def test_points_inside_bounds_and_distinct(self):
        g = make_grid([[0, 2], [-1, 1]], (5, 4))
        assert (g.points[:, 0] >= 0).all() and (g.points[:, 0] <= 2).all()
        assert (g.points[:, 1] >= -1).all() and (g.points[:, 1] <= 1).all()
        d = np.linalg.norm(g.points[:, None] - g.points[None, :], axis=2)
        np.fill_diagonal(d, 1.0)
        assert d.min() > 0

    def test_periodic_grid_excludes_upper_edge(self):
        g = make_periodic_grid([[0, 2 * np.pi]] * 2, 8)
        assert g.n_points == 64
        assert not g.boundary_mask.any()
        assert g.points[:, 0].max() < 2 * np.pi


class TestMaximinOrder:
    def test_1d_example(self):
        pts = np.array([[0.0], [0.25], [1.0]])
        o = maximin_order(pts, seed_index=0)
        assert list(o.perm) == [0, 2, 1]
        assert o.lengthscales[0] == LENGTHSCALE_SENTINEL
        assert np.allclose(o.lengthscales[1:], [1.0, 0.25])

    def test_singleton(self):
        o = maximin_order(np.array([[0.3]]), seed_index=0)
        assert list(o.perm) == [0]
        assert o.lengthscales[0] == LENGTHSCALE_SENTINEL

    def test_tie_break_lowest_index(self):
        pts = np.array([[0.0], [0.5], [1.0]])
        o = maximin_order(pts, seed_index=1)
        assert list(o.perm) == [1, 0, 2]
        assert np.allclose(o.lengthscales[1:], [0.5, 0.5])

    def test_matches_brute_force(self):
        rng = np.random.default_rng(7)
        pts = rng.uniform(size=(60, 2))
        o = maximin_order(pts, seed_index=11)
        chosen, lengths = brute_force_maximin(pts, 11)
        assert list(o.perm) == chosen
        assert np.allclose(o.lengthscales[1:], lengths[1:])

    def test_selection_distances_non_increasing(self):
        rng = np.random.default_rng(3)
        for trial in range(4):
            pts = rng.uniform(size=(100, 2))
            o = maximin_order(pts, seed_index=0)
            assert np.all(np.diff(o.lengthscales[1:]) <= 1e-14)

    def test_lengthscale_is_min_distance_to_earlier(self):
        rng = np.random.default_rng(5)
        pts = rng.uniform(size=(120, 2))
        o = maximin_order(pts, seed_index=4)
        ordered = pts[o.perm]
        for q in range(1, 120):
            d = np.linalg.norm(ordered[:q] - ordered[q], axis=1).min()
            assert np.isclose(o.lengthscales[q], d)

    def test_empty_rejected(self):
        with pytest.raises(InvalidParameterError):
            maximin_order(np.empty((0, 2)))

    def test_default_seed_near_centroid(self):
        g = make_grid([[0, 1], [0, 1]], 9)
        o = maximin_order(g)
        assert np.allclose(g.points[o.seed_index], [0.5, 0.5])


class TestSparsityPattern:
    def test_large_rho_gives_dense_lower_triangle(self):
        g = make_grid([[0, 1]], 9)
        o = maximin_order(g, seed_index=0)
        p = sparsity_pattern(o, g, rho=1e6)
        for j, s in enumerate(p.columns):
            assert list(s) == list(range(j + 1))

    def test_1d_example_includes_and_excludes(self):
        pts = np.array([[0.0], [1.0], [0.25]])
        o = maximin_order(pts, seed_index=0)
        assert list(o.perm) == [0, 1, 2]
        p = sparsity_pattern(o, pts, rho=1.0)
        # column of x=0.25 (ordered index 2, lengthscale 0.25): keeps x=0, drops x=1
        assert list(p.columns[2]) == [0, 2]

    def test_nested_in_rho(self):
        rng = np.random.default_rng(9)
        pts = rng.uniform(size=(50, 2))
        o = maximin_order(pts, seed_index=0)
        p2 = sparsity_pattern(o, pts, rho=2.0)
        p4 = sparsity_pattern(o, pts, rho=4.0)
        for s_small, s_big in zip(p2.columns, p4.columns):
            assert set(s_small) <= set(s_big)

    def test_diagonal_always_present(self):
        rng = np.random.default_rng(1)
        pts = rng.uniform(size=(40, 2))
        o = maximin_order(pts, seed_index=0)
        p = sparsity_pattern(o, pts, rho=0.01)
        for j, s in enumerate(p.columns):
            assert j in set(s)

    def test_rejects_nonpositive_rho(self):
        g = make_grid([[0, 1]], 4)
        o = maximin_order(g, seed_index=0)
        with pytest.raises(InvalidParameterError):
            sparsity_pattern(o, g, rho=0.0)


class TestFillDistance:
    def test_uniform_1d_half_spacing(self):
        g = make_grid([[0, 1]], 11)  # h = 0.1
        fd = fill_distance(g, 201)
        assert abs(fd - 0.05) <= 0.005

    def test_uniform_2d_cell_center(self):
        g = make_grid([[0, 1], [0, 1]], 9)  # h = 1/8
        # probe with midpoints present: exact sup at cell centers
        fd = fill_distance(g, 17)
        assert np.isclose(fd, (1 / 8) * np.sqrt(2) / 2)

    def test_self_cover_is_zero(self):
        g = make_grid([[0, 1], [0, 1]], 5)
        assert fill_distance(g, 5) == 0.0


class TestStencilNeighborErrors:
    def test_missing_neighbor_raises(self):
        from kernelrom.errors import StencilError
        from kernelrom.fdops import neg_laplacian_rows
        g = make_grid([[0, 1], [0, 1]], 5)
        with pytest.raises(StencilError):
            neg_laplacian_rows(g, [0])  # corner point has no left/down neighbor

    def test_periodic_wraps_instead(self):
        from kernelrom.fdops import neg_laplacian_rows
        g = make_periodic_grid([[0, 1], [0, 1]], 5)
        rows = neg_laplacian_rows(g, [0])
        assert rows.nnz == 5
