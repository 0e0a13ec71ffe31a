import numpy as np
import pytest

from cpgd.blocks import BlockPartition, extract_block, make_partition, scatter_block


def test_contiguous_split():
    P = make_partition(4, [2, 2])
    assert P.N == 2
    assert [list(b) for b in P.blocks] == [[0, 1], [2, 3]]
    assert P.sizes == (2, 2)


def test_single_block_degenerates_to_full_vector():
    P = make_partition(3, [3])
    assert P.N == 1
    assert list(P.indices(1)) == [0, 1, 2]


def test_size_mismatch_rejected():
    with pytest.raises(ValueError, match="sum"):
        make_partition(3, [2, 2])
    with pytest.raises(ValueError, match=">= 1"):
        make_partition(3, [3, 0])


def test_explicit_indices_validate():
    P = BlockPartition(4, [[3, 0], [1, 2]])
    # block-internal order is ascending original index
    assert list(P.indices(1)) == [0, 3]
    assert list(P.indices(2)) == [1, 2]
    with pytest.raises(ValueError, match="overlap"):
        BlockPartition(4, [[0, 1], [1, 2, 3]])
    with pytest.raises(ValueError, match="cover"):
        BlockPartition(4, [[0, 1], [3]])
    with pytest.raises(ValueError, match="empty"):
        BlockPartition(2, [[0, 1], []])
    with pytest.raises(ValueError, match="repeats"):
        BlockPartition(2, [[0, 0], [1]])
    with pytest.raises(ValueError, match="outside"):
        BlockPartition(2, [[0], [4]])


def test_extract_examples():
    P = make_partition(4, [2, 2])
    x = np.array([1.0, 2.0, 3.0, 4.0])
    assert list(extract_block(x, 2, P)) == [3.0, 4.0]
    single = make_partition(1, [1])
    assert list(extract_block(np.array([5.0]), 1, single)) == [5.0]
    with pytest.raises(IndexError):
        extract_block(x, 3, P)
    with pytest.raises(IndexError):
        extract_block(x, 0, P)


def test_extract_does_not_mutate_and_scatter_roundtrips():
    P = make_partition(4, [2, 2])
    x = np.array([1.0, 2.0, 3.0, 4.0])
    v = extract_block(x, 1, P)
    v[0] = 99.0
    assert x[0] == 1.0

    y = scatter_block(x, 1, [9.0, 8.0], P)
    assert list(y) == [9.0, 8.0, 3.0, 4.0]
    assert list(x) == [1.0, 2.0, 3.0, 4.0]

    # scatter then extract returns v exactly; identity scatter is a no-op
    w = np.array([0.25, -1.5])
    assert np.array_equal(extract_block(scatter_block(x, 2, w, P), 2, P), w)
    assert np.array_equal(scatter_block(x, 2, extract_block(x, 2, P), P), x)


def test_scatter_length_mismatch():
    P = make_partition(4, [2, 2])
    with pytest.raises(ValueError, match="size 2"):
        scatter_block(np.zeros(4), 1, [1.0, 2.0, 3.0], P)


@pytest.mark.parametrize("n,sizes", [(1, [1]), (7, [3, 2, 2]), (10, [4, 1, 5])])
def test_partition_completeness(n, sizes):
    # scattering every extracted block into zeros reassembles the point
    rng = np.random.default_rng(42)
    P = make_partition(n, sizes)
    x = rng.standard_normal(n)
    acc = np.zeros(n)
    for i in range(1, P.N + 1):
        acc += scatter_block(np.zeros(n), i, extract_block(x, i, P), P)
    assert np.array_equal(acc, x)


def test_roundtrip_bitwise_on_permuted_partition():
    rng = np.random.default_rng(7)
    perm = rng.permutation(9)
    P = BlockPartition(9, [perm[:4], perm[4:6], perm[6:]])
    x = rng.standard_normal(9)
    for i in range(1, 4):
        v = extract_block(x, i, P)
        assert np.array_equal(extract_block(scatter_block(x, i, v, P), i, P), v)


def test_sweep_order_deterministic():
    P1 = make_partition(6, [2, 2, 2])
    P2 = make_partition(6, [2, 2, 2])
    for i in range(1, 4):
        assert np.array_equal(P1.indices(i), P2.indices(i))
