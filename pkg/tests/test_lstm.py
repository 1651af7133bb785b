import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from chaoscast.errors import NumericalError
from chaoscast.grid import BinGrid
from chaoscast.lstm import (
    Checkpoint,
    LstmParams,
    LstmState,
    init_params,
    run_sequence,
    softmax,
    step,
)


def reference_step(params, s_prev, h_prev, y):
    """Scalar-loop transcription of the model equations, one entry at a time."""
    nc, no = params.n_cells, params.n_bins

    def affine(m, x):
        return [sum(m.weight[i][j] * x[j] for j in range(len(x))) + m.bias[i] for i in range(m.weight.shape[0])]

    sig = lambda v: 1.0 / (1.0 + math.exp(-v))
    emb = [math.tanh(v) for v in affine(params.input_embed, [y])]
    z = affine(params.input_mix, [emb[i] + h_prev[i] for i in range(nc)])
    g1, g2, g3, g4 = (affine(g, z) for g in params.gate_maps)
    g1, g2, g3 = ([sig(v) for v in g] for g in (g1, g2, g3))
    g4 = [math.tanh(v) for v in g4]
    s = [(1 - g1[i]) * s_prev[i] + g2[i] * g4[i] for i in range(nc)]
    h = [g3[i] * s[i] for i in range(nc)]
    r1 = [math.log1p(math.exp(v)) for v in affine(params.out_hidden1, h)]
    r2 = [math.tanh(v) for v in affine(params.out_hidden2, r1)]
    o = affine(params.out_final, r2)
    e = [math.exp(v) for v in o]
    tot = sum(e)
    return [v / tot for v in e], s, h


def perturbed(seed, nc=4, no=5):
    params = init_params(nc, no, seed)
    rng = np.random.default_rng(seed + 100)
    for a in params.arrays():
        a += rng.normal(0.0, 0.3, a.shape)
    return params


def test_zero_params_give_uniform():
    params = LstmParams.zeros(6, 7)
    p, st_, _ = step(params, LstmState.zeros(6), 1.7)
    assert np.allclose(p, 1 / 7, atol=0, rtol=1e-15)
    assert np.all(st_.s == 0)


def test_softmax_symmetry():
    assert np.array_equal(softmax(np.array([0.0, 0.0])), [0.5, 0.5])


@pytest.mark.parametrize("seed", range(5))
def test_step_matches_reference(seed):
    params = perturbed(seed)
    rng = np.random.default_rng(seed)
    s0, h0 = rng.normal(size=4), rng.normal(size=4)
    y = float(rng.normal())
    p, new, _ = step(params, LstmState(s0, h0), y)
    p_ref, s_ref, h_ref = reference_step(params, s0, h0, y)
    assert np.max(np.abs(p - p_ref)) < 1e-14
    assert np.max(np.abs(new.s - s_ref)) < 1e-14
    assert np.max(np.abs(new.h - h_ref)) < 1e-14


def test_run_sequence_matches_repeated_steps():
    params = perturbed(3)
    y = np.random.default_rng(1).normal(size=9)
    p_seq, final, _ = run_sequence(params, LstmState.zeros(4), y)
    state = LstmState.zeros(4)
    for k, v in enumerate(y):
        p, state, _ = step(params, state, v)
        assert np.max(np.abs(p - p_seq[k])) < 1e-14
    assert np.max(np.abs(state.s - final.s)) < 1e-14


def test_length_one_sequence_equals_step():
    params = perturbed(4)
    p_seq, fin, _ = run_sequence(params, LstmState.zeros(4), [0.3])
    p, st_, _ = step(params, LstmState.zeros(4), 0.3)
    assert np.max(np.abs(p_seq[0] - p)) < 1e-15
    assert np.max(np.abs(fin.h - st_.h)) < 1e-15


@pytest.mark.parametrize("split", [1, 4, 10])
def test_sequence_compositionality(split):
    params = perturbed(5)
    y = np.random.default_rng(2).normal(size=11)
    p_all, fin_all, _ = run_sequence(params, LstmState.zeros(4), y)
    p1, mid, _ = run_sequence(params, LstmState.zeros(4), y[:split])
    p2, fin, _ = run_sequence(params, mid, y[split:])
    assert np.max(np.abs(np.concatenate([p1, p2]) - p_all)) < 1e-14
    assert np.max(np.abs(fin.s - fin_all.s)) < 1e-14


def test_batched_sequence_matches_columns():
    params = perturbed(6)
    y = np.random.default_rng(3).normal(size=(8, 3))
    p, fin, _ = run_sequence(params, LstmState.zeros(4, (3,)), y)
    for b in range(3):
        pb, fb, _ = run_sequence(params, LstmState.zeros(4), y[:, b])
        assert np.max(np.abs(pb - p[:, b])) < 1e-14
        assert np.max(np.abs(fb.h - fin.h[b])) < 1e-14


@settings(max_examples=200)
@given(arrays(np.float64, st.integers(2, 40), elements=st.floats(-700, 700)))
def test_softmax_is_a_distribution(o):
    p = softmax(o)
    assert np.all(p >= 0)
    assert abs(p.sum() - 1.0) < 1e-12


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10_000), y=st.floats(-3, 3))
def test_gate_ranges(seed, y):
    params = perturbed(seed % 97)
    _, _, c = step(params, LstmState.zeros(4), y)
    g = c["gates"]
    assert np.all((g[:12] > 0) & (g[:12] < 1))
    assert np.all(np.abs(g[12:]) < 1)
    assert np.all(np.abs(c["u"]) < 1) and np.all(np.abs(c["r2"]) < 1)


def test_init_is_deterministic_and_scaled():
    a, b = init_params(128, 50, 7), init_params(128, 50, 7)
    for x, y in zip(a.arrays(), b.arrays()):
        assert np.array_equal(x, y)
    assert a.n_cells == 128 and a.n_bins == 50
    assert np.max(np.abs(a.input_mix.weight)) <= 1 / np.sqrt(128)
    assert np.all(a.gates.bias == 0)
    assert not np.array_equal(a.input_mix.weight, init_params(128, 50, 8).input_mix.weight)


def test_init_rejects_bad_sizes():
    with pytest.raises(ValueError):
        init_params(4, 2)


def test_non_finite_input_rejected():
    with pytest.raises(NumericalError, match="input"):
        step(perturbed(0), LstmState.zeros(4), float("nan"))


def test_non_finite_layer_named():
    params = perturbed(0)
    params.out_final.weight[0, 0] = np.inf
    with pytest.raises(NumericalError, match="out_final"):
        step(params, LstmState.zeros(4), 0.1)


def test_checkpoint_round_trip(tmp_path):
    params = perturbed(8, nc=3, no=6)
    grid = BinGrid.uniform(-0.3, 0.1, 6)
    ck = Checkpoint(params, grid, 0.9, 0.23, {"note": "x"})
    ck.save(tmp_path / "c.json")
    back = Checkpoint.load(tmp_path / "c.json")
    for x, y in zip(params.arrays(), back.params.arrays()):
        assert np.array_equal(x, y)
    assert back.grid == grid and (back.mean, back.sd) == (0.9, 0.23)
    assert set(ck.to_dict()["params"]) >= {"gate_1", "gate_2", "gate_3", "gate_4"}
