"""Learner forward/loss contracts and end-to-end gradient checks."""

import numpy as np
import numpy.testing as npt
import pytest

from metapred import autodiff as ad
from metapred.episodes import make_batch
from metapred.models import Batch, NormState, batch_loss, \
    cross_entropy_loss, encoder_param_names, init_params, learner_forward

from conftest import tiny_arch, toy_domain


def small_batch(arch, rng, n=4, n_visits=4):
    dom = toy_domain("d", n_cases=n, n_controls=n, seed=int(rng.integers(1 << 16)),
                     vocab=arch.vocab_size, n_visits=n_visits)
    return make_batch(dom.patients[:n], arch.vocab_size, arch.max_seq_len,
                      split="train", min_seq_len=max(arch.filter_sizes))


# ------------------------------------------------------------------ init

def test_lstm_gate_matrix_shapes():
    arch = tiny_arch("lstm", embed_dim=4)
    params = init_params(arch, seed=0)
    assert params["lstm.w_rec"].shape == (4, 16)
    assert params["lstm.w_in"].shape == (4, 16)


def test_init_deterministic_and_seed_sensitive():
    arch = tiny_arch()
    a, b = init_params(arch, 7), init_params(arch, 7)
    assert all(a[k].value.tobytes() == b[k].value.tobytes() for k in a)
    c = init_params(arch, 8)
    assert any(a[k].value.tobytes() != c[k].value.tobytes() for k in a)


def test_padding_embedding_row_is_zero():
    params = init_params(tiny_arch(), 3)
    npt.assert_array_equal(params["embed.weight"].value[0], 0.0)


def test_same_structure_across_seeds():
    arch = tiny_arch()
    assert init_params(arch, 0).same_structure(init_params(arch, 99))


# --------------------------------------------------------------- forward

@pytest.mark.parametrize("encoder", ["cnn", "lstm", "mlp", "logistic"])
def test_probabilities_sum_to_one(encoder, rng):
    arch = tiny_arch(encoder)
    params = init_params(arch, 0)
    batch = small_batch(arch, rng)
    state = NormState.for_arch(arch)
    probs = learner_forward(batch, params, arch, mode="train", norm_state=state)
    npt.assert_allclose(probs.value.sum(axis=1), 1.0, atol=1e-6)
    assert probs.shape == (batch.size, 2)


@pytest.mark.parametrize("encoder", ["cnn", "lstm", "mlp"])
def test_all_zero_parameters_give_coin_flip(encoder, rng):
    arch = tiny_arch(encoder)
    params = init_params(arch, 0)
    zeros = ad.param_set_from_arrays(
        {k: np.zeros_like(v) for k, v in params.arrays().items()}, params.arch_tag)
    batch = small_batch(arch, rng)
    probs = learner_forward(batch, zeros, arch, mode="train",
                            norm_state=NormState.for_arch(arch))
    npt.assert_allclose(probs.value, 0.5, atol=1e-7)


def test_eval_mode_is_per_patient_permutation_equivariant(rng):
    arch = tiny_arch("cnn")
    params = init_params(arch, 1)
    state = NormState.for_arch(arch)
    batch = small_batch(arch, rng, n=6)
    # populate running stats, then evaluate
    learner_forward(batch, params, arch, mode="train", norm_state=state)
    perm = np.array([3, 0, 5, 1, 4, 2])
    permuted = Batch(codes=batch.codes[perm], lengths=batch.lengths[perm],
                     labels=batch.labels[perm], domain=batch.domain,
                     split=batch.split,
                     patient_ids=tuple(batch.patient_ids[i] for i in perm))
    out = learner_forward(batch, params, arch, mode="eval", norm_state=state).value
    out_p = learner_forward(permuted, params, arch, mode="eval", norm_state=state).value
    npt.assert_allclose(out_p, out[perm], atol=1e-12)


def test_lstm_output_invariant_to_trailing_padding():
    arch = tiny_arch("lstm", max_seq_len=6)
    params = init_params(arch, 2)
    visits = ((1, 3), (2,), (4, 5))
    codes_short = np.zeros((1, 3, 2), dtype=np.int32)
    codes_long = np.zeros((1, 6, 2), dtype=np.int32)
    for t, v in enumerate(visits):
        codes_short[0, t, :len(v)] = v
        codes_long[0, t, :len(v)] = v
    labels = np.array([[1.0, 0.0]])
    short = Batch(codes_short, np.array([3]), labels, "d", "train")
    padded = Batch(codes_long, np.array([3]), labels, "d", "train")
    out_s = learner_forward(short, params, arch, mode="train").value
    out_p = learner_forward(padded, params, arch, mode="train").value
    npt.assert_allclose(out_s, out_p, atol=1e-6)


def test_cnn_pooled_vector_is_filter_permutation_covariant(rng):
    arch = tiny_arch("cnn", filter_sizes=(2,), filters_per_size=3,
                     normalization="none", mlp_hidden=())
    params = init_params(arch, 5)
    batch = small_batch(arch, rng)
    perm = np.array([2, 0, 1])
    permuted = ad.ParamSet({
        "embed.weight": params["embed.weight"],
        "embed.bias": params["embed.bias"],
        "conv2.weight": ad.leaf(params["conv2.weight"].value[perm]),
        "conv2.bias": ad.leaf(params["conv2.bias"].value[perm]),
        "head0.weight": params["head0.weight"],
        "head0.bias": params["head0.bias"],
    }, params.arch_tag)

    def pooled(ps):
        from metapred.models import _embed_visits, _encode_cnn
        emb = _embed_visits(batch, ps, arch)
        return _encode_cnn(emb, batch, ps, arch).value

    npt.assert_allclose(pooled(permuted), pooled(params)[:, perm], atol=1e-12)


def test_out_of_range_code_rejected(rng):
    arch = tiny_arch()
    params = init_params(arch, 0)
    batch = small_batch(arch, rng)
    bad = Batch(codes=np.full_like(batch.codes, arch.vocab_size),
                lengths=batch.lengths, labels=batch.labels,
                domain=batch.domain, split=batch.split)
    with pytest.raises(ValueError, match="out of range"):
        learner_forward(bad, params, arch)


def test_zero_length_patient_rejected():
    with pytest.raises(ValueError, match="at least one visit"):
        Batch(codes=np.zeros((1, 2, 1), dtype=np.int32),
              lengths=np.array([0]), labels=np.array([[1.0, 0.0]]),
              domain="d", split="train")


# ------------------------------------------------------------------ loss

def test_loss_examples():
    eps = 1e-7
    perfect = ad.leaf(np.array([[1 - eps, eps]]))
    assert cross_entropy_loss(perfect, np.array([[1.0, 0.0]])).item() < 1e-5
    coin = ad.leaf(np.array([[0.5, 0.5]]))
    npt.assert_allclose(cross_entropy_loss(coin, np.array([[1.0, 0.0]])).item(),
                        2 * np.log(2), rtol=1e-6)


def test_loss_mean_normalization():
    one = ad.leaf(np.array([[0.7, 0.3]]))
    two = ad.leaf(np.array([[0.7, 0.3], [0.7, 0.3]]))
    y1 = np.array([[1.0, 0.0]])
    y2 = np.array([[1.0, 0.0], [1.0, 0.0]])
    npt.assert_allclose(cross_entropy_loss(one, y1).item(),
                        cross_entropy_loss(two, y2).item(), rtol=1e-12)


def test_loss_nonnegative_random(rng):
    for _ in range(25):
        p1 = rng.uniform(0.0, 1.0, size=(3, 1))
        probs = np.concatenate([p1, 1 - p1], axis=1)
        labels = np.eye(2)[rng.integers(0, 2, size=3)]
        val = cross_entropy_loss(ad.leaf(probs), labels).item()
        assert val >= 0.0


def test_loss_rejects_empty_batch():
    with pytest.raises(ValueError, match="empty"):
        cross_entropy_loss(ad.leaf(np.zeros((0, 2))), np.zeros((0, 2)))


# --------------------------------------------------- end-to-end gradients

@pytest.mark.parametrize("encoder", ["cnn", "lstm", "mlp", "logistic"])
def test_learner_gradients_match_finite_differences(encoder, rng):
    arch = tiny_arch(encoder)
    params = init_params(arch, 11)
    batch = small_batch(arch, rng, n=4)

    def loss_from(p: ad.ParamSet) -> ad.Expr:
        return batch_loss(batch, p, arch, mode="train")

    grads = ad.gradient(loss_from(params), params)
    oracle = ad.finite_difference_oracle(lambda p: loss_from(p).item(), params,
                                         epsilon=1e-6)
    for name in params:
        got, want = grads[name].value, oracle[name]
        denom = max(np.abs(want).max(), 1e-3)
        assert np.abs(got - want).max() / denom < 1e-3, name


def test_frozen_default_set_is_everything_but_head():
    params = init_params(tiny_arch("cnn"), 0)
    frozen = encoder_param_names(params)
    assert all(not n.startswith("head") for n in frozen)
    assert set(params) - frozen == {"head0.weight", "head0.bias",
                                    "head1.weight", "head1.bias"}
