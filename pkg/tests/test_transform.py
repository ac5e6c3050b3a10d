import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from codr.conv import LayerShape, WeightTensor
from codr.errors import ConfigError, CorruptionError
from codr.transform import (TilingConfig, UnifiedStream, build_weight_vectors,
                            partition_into_tiles, reconstruct_weight_vector,
                            unify_weight_vector)


def brute_force_unify(values):
    """Independent oracle: group non-zero values by value, indexes ascending."""
    by_value = {}
    for i, v in enumerate(values):
        if v != 0:
            by_value.setdefault(int(v), []).append(i)
    uniques = sorted(by_value)
    if not uniques:
        return UnifiedStream.empty()
    return UnifiedStream(uniques[0],
                         [b - a for a, b in zip(uniques, uniques[1:])],
                         [len(by_value[v]) for v in uniques],
                         [by_value[v] for v in uniques])


class TestTilingConfig:
    def test_defaults(self):
        cfg = TilingConfig()
        assert (cfg.t_pu, cfg.t_m, cfg.t_n) == (8, 4, 4)
        assert (cfg.t_ro, cfg.t_co, cfg.t_ri, cfg.t_ci) == (8, 8, 20, 20)
        assert cfg.mults_per_pu == 64

    def test_halo_violation_names_dimension(self):
        # (t_ro-1)*stride + k = 21 exceeds the 20-cell input tile
        shape = LayerShape(n_in=1, m_out=1, k_rows=7, k_cols=3, in_rows=21, in_cols=21,
                           stride=2)
        with pytest.raises(ConfigError, match="t_ri"):
            TilingConfig().validate_for(shape)
        shape = LayerShape(n_in=1, m_out=1, k_rows=3, k_cols=7, in_rows=21, in_cols=21,
                           stride=2)
        with pytest.raises(ConfigError, match="t_ci"):
            TilingConfig().validate_for(shape)

    def test_dict_round_trip(self):
        cfg = TilingConfig(t_pu=2, t_m=3, t_ri=24, t_ci=24)
        assert TilingConfig.from_dict(cfg.to_dict()) == cfg

    def test_unknown_field_rejected(self):
        with pytest.raises(ConfigError):
            TilingConfig.from_dict({"t_pu": 2, "bogus": 1})


class TestPartition:
    def test_channel_group_count(self):
        shape = LayerShape(n_in=4, m_out=64, k_rows=3, k_cols=3, in_rows=10, in_cols=10)
        plan = partition_into_tiles(shape, TilingConfig())
        assert plan.n_channel_groups == 2

    def test_degenerate_single_channel(self):
        shape = LayerShape(n_in=1, m_out=1, k_rows=3, k_cols=3, in_rows=10, in_cols=10)
        plan = partition_into_tiles(shape, TilingConfig())
        assert plan.n_channel_groups == 1
        valid = sum(len(plan.group_channels(0, pu)) for pu in range(8))
        assert valid == 1  # 31 of 32 lanes masked

    def test_spatial_tiles_with_partials(self):
        shape = LayerShape(n_in=1, m_out=1, k_rows=2, k_cols=2, in_rows=10, in_cols=10)
        assert (shape.out_rows, shape.out_cols) == (9, 9)
        plan = partition_into_tiles(shape, TilingConfig())
        assert len(plan.spatial_tiles) == 4
        partial = [t for t in plan.spatial_tiles if t.rows < 8 or t.cols < 8]
        assert len(partial) == 3

    def test_rejects_bad_halo(self):
        shape = LayerShape(n_in=1, m_out=1, k_rows=5, k_cols=5, in_rows=20, in_cols=20,
                           stride=3)
        with pytest.raises(ConfigError):
            partition_into_tiles(shape, TilingConfig())

    def test_vector_order_and_index_agree(self):
        shape = LayerShape(n_in=3, m_out=40, k_rows=1, k_cols=1, in_rows=8, in_cols=8)
        plan = partition_into_tiles(shape, TilingConfig())
        for i, (g, pu, n) in enumerate(plan.vector_order()):
            assert plan.vector_index(g, pu, n) == i
        assert plan.n_vectors == 2 * 8 * 3


class TestBuildWeightVectors:
    def test_lane_index_formula(self):
        # t_m=2, 2x2 kernel: lane of w[m_local=1][kr=1][kc=0] is 1*4+1*2+0 = 6
        cfg = TilingConfig(t_pu=1, t_m=2, t_n=1, t_ro=4, t_co=4, t_ri=8, t_ci=8)
        shape = LayerShape(n_in=1, m_out=2, k_rows=2, k_cols=2, in_rows=5, in_cols=5)
        values = np.zeros((2, 1, 2, 2), np.int64)
        values[1, 0, 1, 0] = 42
        vectors = build_weight_vectors(WeightTensor(values, np.zeros(2, np.int64)),
                                       partition_into_tiles(shape, cfg))
        assert len(vectors) == 1
        assert vectors[0].values.tolist() == [0, 0, 0, 0, 0, 0, 42, 0]

    def test_all_zero(self):
        shape = LayerShape(n_in=2, m_out=2, k_rows=2, k_cols=2, in_rows=5, in_cols=5)
        plan = partition_into_tiles(shape, TilingConfig())
        vectors = build_weight_vectors(WeightTensor.zeros(shape), plan)
        assert all(not v.values.any() for v in vectors)

    def test_scatter_back_inverse(self):
        # oracle: undo the linearization and compare with the tensor slice
        rng = np.random.default_rng(5)
        shape = LayerShape(n_in=3, m_out=37, k_rows=3, k_cols=2, in_rows=8, in_cols=8)
        cfg = TilingConfig()
        plan = partition_into_tiles(shape, cfg)
        weights = WeightTensor(rng.integers(-50, 50, size=(37, 3, 3, 2)),
                               np.zeros(37, np.int64))
        vectors = build_weight_vectors(weights, plan)
        kk = shape.k_rows * shape.k_cols
        rebuilt = np.zeros_like(weights.values)
        for vec in vectors:
            for m_local, m in plan.group_channels(vec.group, vec.pu):
                block = vec.values[m_local * kk:(m_local + 1) * kk]
                rebuilt[m, vec.channel] = block.reshape(shape.k_rows, shape.k_cols)
        assert np.array_equal(rebuilt, weights.values)
        # masked lanes hold zero
        for vec in vectors:
            valid = {ml for ml, _ in plan.group_channels(vec.group, vec.pu)}
            for ml in range(cfg.t_m):
                if ml not in valid:
                    assert not vec.values[ml * kk:(ml + 1) * kk].any()


class TestUnify:
    def test_worked_example(self):
        s = unify_weight_vector(np.array([3, 0, 1, 3, -2, 1, 0, 3]))
        assert s.first_value == -2
        assert s.deltas == [3, 2]
        assert s.counts == [1, 2, 3]
        assert s.indexes == [[4], [2, 5], [0, 3, 7]]
        assert s.values() == [-2, 1, 3]

    def test_all_zero(self):
        s = unify_weight_vector(np.zeros(10, np.int64))
        assert s.unique_count == 0
        assert s.first_value is None

    def test_singleton(self):
        v = np.zeros(9, np.int64)
        v[4] = -7
        s = unify_weight_vector(v)
        assert (s.first_value, s.deltas, s.counts, s.indexes) == (-7, [], [1], [[4]])

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.integers(-128, 127), min_size=0, max_size=40))
    def test_matches_brute_force(self, values):
        got = unify_weight_vector(np.array(values, np.int64))
        want = brute_force_unify(values)
        assert got == want

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.integers(-128, 127), min_size=1, max_size=40))
    def test_round_trip(self, values):
        arr = np.array(values, np.int64)
        back = reconstruct_weight_vector(unify_weight_vector(arr), len(arr))
        assert np.array_equal(back, arr)

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.integers(-128, 127), min_size=1, max_size=40))
    def test_values_strictly_increase_and_nonzero(self, values):
        s = unify_weight_vector(np.array(values, np.int64))
        vals = s.values()
        assert all(b > a for a, b in zip(vals, vals[1:]))
        assert 0 not in vals
        assert sum(s.counts) == int(np.count_nonzero(values))

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.integers(-128, 127), min_size=1, max_size=40),
           st.integers(0, 10**9))
    def test_sparsifying_never_increases_uniques(self, values, seed):
        arr = np.array(values, np.int64)
        u_before = unify_weight_vector(arr).unique_count
        rng = np.random.default_rng(seed)
        arr2 = arr.copy()
        arr2[rng.random(len(arr2)) < 0.5] = 0
        assert unify_weight_vector(arr2).unique_count <= u_before

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.integers(-128, 127), min_size=1, max_size=40),
           st.integers(1, 7))
    def test_lsb_masking_never_increases_uniques(self, values, shift):
        arr = np.array(values, np.int64)
        u_before = unify_weight_vector(arr).unique_count
        masked = (arr >> shift) << shift
        assert unify_weight_vector(masked).unique_count <= u_before


class TestReconstruct:
    def test_empty_stream(self):
        assert not reconstruct_weight_vector(UnifiedStream.empty(), 8).any()

    def test_worked_example(self):
        s = UnifiedStream(-2, [3, 2], [1, 2, 3], [[4], [2, 5], [0, 3, 7]])
        assert reconstruct_weight_vector(s, 8).tolist() == [3, 0, 1, 3, -2, 1, 0, 3]

    def test_duplicate_index_rejected(self):
        s = UnifiedStream(1, [2], [1, 1], [[0], [0]])
        with pytest.raises(CorruptionError, match="more than one entry"):
            reconstruct_weight_vector(s, 4)

    def test_out_of_range_index_rejected(self):
        s = UnifiedStream(1, [], [1], [[9]])
        with pytest.raises(CorruptionError):
            reconstruct_weight_vector(s, 4)
