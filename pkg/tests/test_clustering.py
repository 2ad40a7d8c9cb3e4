import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fuzzylos.clustering import (
    block_partition,
    exhaustive_partition,
    ivat_transform,
    minimax_distance,
    partition_objective,
    pgm_bytes,
    read_pgm,
    render_grayscale,
    vat_order,
    write_matrix_csv,
    write_pgm,
)


def random_dissimilarity(rng, m, dim=3):
    pts = rng.uniform(size=(m, dim))
    D = ((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2)
    return D / D.max() if D.max() > 0 else D


def floyd_minimax(D):
    """Minimax path distance by a Floyd-Warshall style closure."""
    M = np.array(D, dtype=float)
    for k in range(len(M)):
        M = np.minimum(M, np.maximum(M[:, k:k + 1], M[k:k + 1, :]))
    return M


def brute_objective(D, cuts, mult):
    """Between-minus-within score computed on the fully expanded sample matrix."""
    idx = np.repeat(np.arange(len(D)), mult)
    E = D[np.ix_(idx, idx)]
    labels = np.zeros(len(D), dtype=int)
    for c in cuts:
        labels[c:] += 1
    lab = labels[idx]
    within, between = [], []
    for i, j in itertools.permutations(range(len(idx)), 2):
        (within if lab[i] == lab[j] else between).append(E[i, j])
    if not within or not between:
        return 0.0
    return float(np.mean(between) - np.mean(within))


def brute_best(D, mult, k_max):
    m = len(D)
    best = (0.0, 1)
    for k in range(2, k_max + 1):
        for cuts in itertools.combinations(range(1, m), k - 1):
            val = brute_objective(D, cuts, mult)
            if val > best[0] + 1e-12:
                best = (val, k)
    return best


class TestVat:
    def test_single(self):
        V = vat_order([[0.0]])
        assert V.order.tolist() == [0]

    def test_close_pair_adjacent(self):
        D = np.array([[0, 0.1, 1], [0.1, 0, 1], [1, 1, 0]])
        order = vat_order(D).order.tolist()
        assert abs(order.index(0) - order.index(1)) == 1

    def test_blocks_contiguous(self, rng):
        for _ in range(20):
            labels = rng.integers(0, 2, size=6)
            D = (labels[:, None] != labels[None, :]).astype(float)
            order = vat_order(D).order
            changes = np.count_nonzero(np.diff(labels[order]))
            assert changes <= 1

    @settings(max_examples=50)
    @given(st.integers(1, 12), st.integers(0, 2**31))
    def test_permutation_and_relabel(self, m, seed):
        D = random_dissimilarity(np.random.default_rng(seed), m)
        V = vat_order(D)
        assert sorted(V.order.tolist()) == list(range(m))
        assert np.array_equal(V.reordered, D[np.ix_(V.order, V.order)])


class TestIvat:
    def test_three_point_path(self):
        D = np.array([[0, 1, 5], [1, 0, 2], [5, 2, 0]], dtype=float)
        assert minimax_distance(D)[0, 2] == 2.0

    def test_ultrametric_unchanged(self):
        D = np.array([[0, 1, 3, 3], [1, 0, 3, 3], [3, 3, 0, 2], [3, 3, 2, 0]], dtype=float)
        assert np.array_equal(minimax_distance(D), D)

    @settings(max_examples=60)
    @given(st.integers(1, 15), st.integers(0, 2**31))
    def test_properties(self, m, seed):
        D = random_dissimilarity(np.random.default_rng(seed), m)
        V = vat_order(D)
        Dp = ivat_transform(V)
        R = V.reordered
        assert np.all(Dp <= R)
        assert np.array_equal(Dp, Dp.T)
        assert np.all(np.diag(Dp) == 0)
        assert np.array_equal(Dp, floyd_minimax(R))
        again = vat_order(Dp)
        assert np.array_equal(minimax_distance(Dp), Dp)
        assert np.array_equal(ivat_transform(again), again.reordered)


class TestPartition:
    def test_all_equal_gives_one_block(self):
        assert block_partition(np.full((5, 5), 0.3) - np.diag([0.3] * 5)).k == 1

    def test_two_blocks(self):
        D = np.full((4, 4), 0.9)
        D[:2, :2] = D[2:, 2:] = 0.0
        part = block_partition(D)
        assert part.k == 2 and part.cuts == (2,)
        assert part.objective == pytest.approx(0.9, abs=1e-15)

    def test_k_max_range(self):
        with pytest.raises(ValueError):
            block_partition(np.zeros((3, 3)), k_max=4)
        with pytest.raises(ValueError):
            block_partition(np.zeros((3, 3)), k_max=0)

    def test_objective_matches_expansion(self, rng):
        for _ in range(30):
            m = int(rng.integers(2, 7))
            D = minimax_distance(random_dissimilarity(rng, m))
            mult = rng.integers(1, 4, size=m)
            cuts = tuple(sorted(rng.choice(np.arange(1, m), size=int(rng.integers(0, m)), replace=False).tolist()))
            assert partition_objective(D, cuts, mult) == pytest.approx(
                brute_objective(D, cuts, mult), abs=1e-12
            )

    def test_matches_brute_force(self, rng):
        for _ in range(40):
            m = int(rng.integers(1, 8))
            V = vat_order(random_dissimilarity(rng, m))
            D = ivat_transform(V)
            mult = rng.integers(1, 4, size=m)
            part = block_partition(D, m, weights=mult)
            val, k = brute_best(D, mult, m)
            assert part.objective == pytest.approx(val, abs=1e-12)
            assert part.k == k

    def test_linearized_fallback_is_flagged(self, rng):
        D = ivat_transform(vat_order(random_dissimilarity(rng, 8)))
        heur = block_partition(D, 8, exact=False)
        assert not heur.exact
        assert heur.objective <= block_partition(D, 8).objective + 1e-12

    def test_labels_cover(self):
        D = np.full((6, 6), 1.0)
        for blk in ([0, 1], [2, 3, 4], [5]):
            D[np.ix_(blk, blk)] = 0.0
        part = block_partition(D)
        assert part.labels().tolist() == [0, 0, 1, 1, 1, 2]


class TestRender:
    def test_zero_is_white(self):
        assert render_grayscale(np.zeros((1, 1))).tolist() == [[255]]

    def test_one_is_black(self):
        assert render_grayscale(np.array([[0, 1.0], [1.0, 0]]))[0, 1] == 0

    def test_dark_similar_inverts(self):
        D = np.array([[0, 0.4], [0.4, 0]])
        assert np.array_equal(render_grayscale(D, dark_similar=True), 255 - render_grayscale(D))

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            render_grayscale(np.array([[0, 1.2], [1.2, 0]]))

    def test_pgm_round_trip(self, tmp_path, rng):
        # include bytes that look like whitespace right after the header
        img = rng.integers(0, 256, size=(7, 5)).astype(np.uint8)
        img[0, :3] = [10, 32, 9]
        data = pgm_bytes(img)
        assert data.startswith(b"P5\n5 7\n255\n")
        assert np.array_equal(read_pgm(data), img)
        write_pgm(tmp_path / "x.pgm", img)
        assert (tmp_path / "x.pgm").read_bytes() == data

    def test_csv_dump(self, tmp_path, rng):
        D = rng.uniform(size=(3, 3))
        write_matrix_csv(tmp_path / "d.csv", D)
        assert np.array_equal(np.loadtxt(tmp_path / "d.csv", delimiter=","), D)


def test_library_exhaustive_reference_agrees(rng):
    for _ in range(20):
        m = int(rng.integers(2, 7))
        D = ivat_transform(vat_order(random_dissimilarity(rng, m)))
        mult = rng.integers(1, 3, size=m)
        a = exhaustive_partition(D, weights=mult)
        b = block_partition(D, m, weights=mult)
        assert a.objective == pytest.approx(b.objective, abs=1e-12) and a.k == b.k
