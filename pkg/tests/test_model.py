import numpy as np
import pytest

from ptnas.errors import ContractViolation, InvalidGenomeError
from ptnas.genome import Genome
from ptnas.graph import gen_sbm, graph_from_pairs, normalize_adjacency
from ptnas.model import build_model, forward, weight_shapes
from ptnas.optim import finite_diff_check
from ptnas.rng import substream
from ptnas.tape import softmax_cross_entropy


def straight_line_forward(genome, dense_a, x, weights, gate, gate_on, skip_on):
    """Independent plain-numpy evaluation of the layer semantics."""
    o = x
    p_zs, t_outs = [], []
    wi = 0
    last = len(genome) - 1
    for l, op in enumerate(genome):
        if op == "P":
            z = dense_a @ o
            p_zs.append(z)
            if gate_on and genome[l + 1] == "T":
                scores = np.stack([1.0 / (1.0 + np.exp(-(zz @ gate[:, 0]))) for zz in p_zs], axis=1)
                e = np.exp(scores - scores.max(axis=1, keepdims=True))
                wts = e / e.sum(axis=1, keepdims=True)
                o = sum(wts[:, i : i + 1] * p_zs[i] for i in range(len(p_zs)))
            else:
                o = z
        else:
            z = o if not (skip_on and len(t_outs) >= 2) else o + sum(t_outs[:-1])
            h = z @ weights[wi]
            wi += 1
            if l == last:
                o = h
            else:
                o = np.maximum(h, 0.0)
                t_outs.append(o)
    return o


def small_fixture(seed=0, n_blocks=3, per_block=8, dim=5):
    bundle = gen_sbm(n_blocks, per_block, 0.5, 0.15, dim, seed=seed)
    return normalize_adjacency(bundle.graph), bundle.features


class TestBuildModel:
    def test_shape_chaining_tt(self):
        assert weight_shapes(Genome("TT"), 4, 8, 3) == [(4, 8), (8, 3)]
        m = build_model("TT", 4, 8, 3)
        assert [w.shape for w in m.weights] == [(4, 8), (8, 3)]
        assert m.gate is None

    def test_shape_chaining_tppt_with_gate(self):
        m = build_model("TPPT", 4, 8, 3, gate_enabled=True)
        assert [w.shape for w in m.weights] == [(4, 8), (8, 3)]
        assert m.gate.shape == (8, 1)
        assert np.array_equal(m.gate, np.zeros((8, 1)))

    def test_single_t_direct(self):
        assert weight_shapes(Genome("T"), 6, 8, 2) == [(6, 2)]
        assert weight_shapes(Genome("PT"), 6, 8, 2) == [(6, 2)]

    def test_same_seed_identical(self):
        a = build_model("TPPT", 4, 8, 3, seed=9)
        b = build_model("TPPT", 4, 8, 3, seed=9)
        assert all(np.array_equal(x, y) for x, y in zip(a.weights, b.weights))

    def test_gate_requires_leading_t(self):
        with pytest.raises(InvalidGenomeError):
            build_model("PT", 4, 8, 3, gate_enabled=True)
        build_model("PT", 4, 8, 3, gate_enabled=False)


class TestForward:
    def test_tppt_compositional_oracle(self):
        a_hat, x = small_fixture()
        m = build_model("TPPT", x.shape[1], 7, 3, seed=1)
        logits = forward(m, a_hat, x).logits.values
        dense = a_hat.to_dense()
        expected = (dense @ (dense @ np.maximum(x @ m.weights[0], 0.0))) @ m.weights[1]
        assert np.max(np.abs(logits - expected)) <= 1e-12

    def test_matches_straight_line_oracle_across_flags(self):
        rng = np.random.default_rng(4)
        genomes = ["T", "TT", "TPT", "TPPT", "TPTT", "TPPTPPT", "TPTPTPT", "TTPPTT", "TPPPPPTPPT"]
        a_hat, x = small_fixture(seed=2, n_blocks=3, per_block=10, dim=6)
        dense = a_hat.to_dense()
        for ops in genomes:
            for gate_on in (False, True):
                for skip_on in (False, True):
                    m = build_model(ops, x.shape[1], 6, 3, gate_enabled=gate_on, skip_enabled=skip_on, seed=11)
                    if m.gate is not None:
                        m.gate[:] = rng.standard_normal(m.gate.shape)
                    got = forward(m, a_hat, x).logits.values
                    want = straight_line_forward(ops, dense, x, m.weights, m.gate, gate_on, skip_on)
                    assert np.max(np.abs(got - want)) <= 1e-12, (ops, gate_on, skip_on)

    def test_ungated_pt_forward_matches(self):
        # gate-off genomes may start with P
        a_hat, x = small_fixture(seed=5)
        dense = a_hat.to_dense()
        for ops in ["PT", "PPTT", "PTPT"]:
            m = build_model(ops, x.shape[1], 6, 3, seed=3)
            got = forward(m, a_hat, x).logits.values
            want = straight_line_forward(ops, dense, x, m.weights, None, False, False)
            assert np.max(np.abs(got - want)) <= 1e-12

    def test_single_p_gating_bitwise_equals_gate_off(self):
        a_hat, x = small_fixture(seed=7)
        on = build_model("TPT", x.shape[1], 8, 3, gate_enabled=True, seed=13)
        off = build_model("TPT", x.shape[1], 8, 3, gate_enabled=False, seed=13)
        on.gate[:] = np.random.default_rng(0).standard_normal(on.gate.shape)
        lo = forward(on, a_hat, x).logits.values
        lf = forward(off, a_hat, x).logits.values
        assert np.array_equal(lo, lf)

    def test_gate_weights_sum_to_one(self):
        a_hat, x = small_fixture(seed=8, n_blocks=3, per_block=10)
        m = build_model("TPPTPPPT", x.shape[1], 6, 3, gate_enabled=True, seed=17)
        m.gate[:] = np.random.default_rng(1).standard_normal(m.gate.shape)
        res = forward(m, a_hat, x, collect=True)
        assert len(res.gate_weights) == 2  # one aggregation per P-run boundary
        for w in res.gate_weights:
            assert np.max(np.abs(w.sum(axis=1) - 1.0)) <= 1e-9
            assert np.all(w > 0)

    def test_gated_output_of_identical_p_outputs(self):
        # one node with only its self-loop: propagation is the identity, so
        # both P outputs coincide and the convex combination returns that row
        a_hat = normalize_adjacency(graph_from_pairs(1, np.empty((0, 2), np.int64)))
        x = np.array([[1.0, -2.0, 0.5]])
        m = build_model("TPPT", 3, 4, 2, gate_enabled=True, seed=19)
        m.gate[:] = np.random.default_rng(2).standard_normal(m.gate.shape)
        res = forward(m, a_hat, x, collect=True)
        gated = res.layer_outputs[2]
        assert np.max(np.abs(gated - res.layer_outputs[1])) <= 1e-12
        # propagation over the single self-loop left the hidden row unchanged
        assert np.array_equal(res.layer_outputs[1], res.layer_outputs[0])

    def test_eval_mode_deterministic_bitwise(self):
        a_hat, x = small_fixture(seed=9)
        m = build_model("TPPT", x.shape[1], 6, 3, gate_enabled=True, skip_enabled=True, seed=23)
        one = forward(m, a_hat, x).logits.values
        two = forward(m, a_hat, x).logits.values
        assert np.array_equal(one, two)

    def test_train_mode_dropout_draws_are_reproducible(self):
        a_hat, x = small_fixture(seed=10)
        m = build_model("TPT", x.shape[1], 6, 3, input_dropout=0.4, layer_dropout=0.3, seed=29)
        la = forward(m, a_hat, x, mode="train", rng=substream(5, "dropout")).logits.values
        lb = forward(m, a_hat, x, mode="train", rng=substream(5, "dropout")).logits.values
        assert np.array_equal(la, lb)

    def test_dimension_mismatch(self):
        a_hat, x = small_fixture(seed=11)
        m = build_model("TPT", x.shape[1] + 1, 6, 3)
        with pytest.raises(ContractViolation):
            forward(m, a_hat, x)

    def test_gradients_through_gate_and_skip(self):
        a_hat, x = small_fixture(seed=12, n_blocks=2, per_block=6, dim=4)
        labels = np.arange(12) % 2
        mask = np.arange(12)
        m = build_model("TPPTPT", 4, 5, 2, gate_enabled=True, skip_enabled=True, seed=31)
        m.gate[:] = 0.3

        def loss_fn():
            res = forward(m, a_hat, x)
            return softmax_cross_entropy(res.logits, labels, mask)

        assert finite_diff_check(loss_fn, m.parameters(), eps=1e-5) <= 1e-4
