import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ptnas.errors import ContractViolation
from ptnas.genome import Genome
from ptnas.graph import gen_sbm
from ptnas.model import build_model
from ptnas.smoothness import SmoothnessTrace, graph_smoothness, node_smoothness, smoothness_trace
from ptnas.training import TrainConfig, train_eval

ORTHO_2 = 1.0 - np.sqrt(2.0) / 2.0


def is_connected(graph) -> bool:
    seen = np.zeros(graph.num_nodes, dtype=bool)
    stack = [0]
    seen[0] = True
    while stack:
        u = stack.pop()
        for v in graph.col_indices[graph.row_offsets[u] : graph.row_offsets[u + 1]]:
            if not seen[v]:
                seen[v] = True
                stack.append(int(v))
    return bool(seen.all())


class TestNodeSmoothness:
    def test_identical_rows_exactly_one(self):
        e = np.tile(np.array([0.3, -1.2, 4.0]), (7, 1))
        assert np.array_equal(node_smoothness(e), np.ones(7))
        assert graph_smoothness(e) == 1.0

    def test_orthogonal_pair(self):
        e = np.array([[1.0, 0.0], [0.0, 1.0]])
        s = node_smoothness(e)
        assert np.max(np.abs(s - ORTHO_2)) <= 1e-12
        assert abs(graph_smoothness(e) - ORTHO_2) <= 1e-12

    def test_antipodal_pair_zero(self):
        e = np.array([[1.0, 0.0], [-1.0, 0.0]])
        assert np.array_equal(node_smoothness(e), np.zeros(2))

    def test_row_scale_invariance(self):
        rng = np.random.default_rng(0)
        e = rng.standard_normal((12, 6))
        scale = rng.uniform(0.1, 10.0, size=(12, 1))
        assert np.max(np.abs(node_smoothness(e) - node_smoothness(e * scale))) <= 1e-12

    def test_zero_rows_use_floor_not_error(self):
        e = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 0.0]])
        s = node_smoothness(e)
        assert np.all(np.isfinite(s))
        # the two zero rows coincide, the unit row is at distance 1 from them
        assert s[0] == s[2]

    def test_requires_two_rows(self):
        with pytest.raises(ContractViolation):
            node_smoothness(np.ones((1, 4)))

    @settings(max_examples=60, deadline=None)
    @given(
        arrays(
            np.float64,
            st.tuples(st.integers(2, 12), st.integers(1, 6)),
            elements=st.floats(-1e6, 1e6, allow_nan=False),
        )
    )
    def test_bounds_hold_for_arbitrary_inputs(self, e):
        s = node_smoothness(e)
        assert np.all(s >= 0.0) and np.all(s <= 1.0)
        assert 0.0 <= graph_smoothness(e) <= 1.0


@pytest.fixture(scope="module")
def bundle():
    b = gen_sbm(4, 25, 0.3, 0.02, 16, seed=0)
    assert is_connected(b.graph)
    return b


class TestTrace:
    def test_length_is_genome_length_plus_one(self, bundle):
        model = build_model("TPPT", 16, 8, 4, seed=0)
        trace = smoothness_trace(model, bundle)
        assert len(trace.values) == 5
        rows = trace.rows()
        assert rows[0][1] == "input"
        assert [op for _, op, _ in rows[1:]] == ["T", "P", "P", "T"]

    def test_deep_propagation_approaches_collapse(self, bundle):
        model = build_model("P" * 40 + "T", 16, 8, 4, seed=0)
        trace = smoothness_trace(model, bundle)
        assert trace.values[40] >= 0.99
        assert trace.values[40] > trace.values[0]
        # smoothing is monotone-ish: far past mixing it stays high
        assert trace.values[40] > trace.values[10] > trace.values[0]

    def test_trained_transform_reduces_smoothness(self, bundle):
        # mirrors the observed trace shape: a fitted transform pulls heavily
        # smoothed embeddings apart. (An untrained random transform is a
        # coin flip here; training it makes the reduction reliable.)
        genome = "PPPPPPPPTT"
        cfg = TrainConfig(lr=0.02, weight_decay=5e-4, epochs=60, hidden=16, input_dropout=0.0, layer_dropout=0.0)
        drops = 0
        for seed in range(10):
            res = train_eval(genome, bundle, cfg, seed=seed)
            model = build_model(genome, 16, 16, 4, seed=seed)
            model.restore(res.best_params)
            trace = smoothness_trace(model, bundle)
            drops += trace.values[9] < trace.values[8]
        assert drops >= 8

    def test_values_within_bounds(self, bundle):
        model = build_model("TPPTPPT", 16, 8, 4, gate_enabled=True, skip_enabled=True, seed=1)
        trace = smoothness_trace(model, bundle)
        assert np.all(trace.values >= 0.0) and np.all(trace.values <= 1.0)
        assert isinstance(trace, SmoothnessTrace)
        assert trace.genome == Genome("TPPTPPT")
