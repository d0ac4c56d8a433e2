import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import best_path_bruteforce, collapse_ref, collapsed_masses, ctc_prob_bruteforce
from pinrefine.ctc import (
    InfeasibleTargetError,
    collapse,
    ctc_loss,
    greedy_decode,
    min_frames,
    prefix_beam_search,
)
from pinrefine.losses import finite_diff_check
from pinrefine.posteriors import PosteriorMatrix, synth_posteriors

A, B = 1, 2


def random_probs(rng, T, V, sharp=1.0):
    logits = rng.normal(scale=sharp, size=(T, V))
    p = np.exp(logits)
    return p / p.sum(axis=1, keepdims=True)


@pytest.mark.parametrize(
    "alignment,expected",
    [([A, A, 0, A], [A, A]), ([0, 0], []), ([A, B, B, 0, B], [A, B, B]), ([], [])],
)
def test_collapse_examples(alignment, expected):
    assert collapse(alignment) == expected


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(0, 3), max_size=12))
def test_collapse_matches_reference(path):
    assert tuple(collapse(path)) == collapse_ref(path)


def test_loss_zero_for_certain_alignment():
    loss, grad = ctc_loss(np.log(np.array([[1e-300, 1.0]])).clip(min=-700), [A])
    assert loss == pytest.approx(0.0, abs=1e-12)
    assert grad[0, A] == pytest.approx(-1.0)


def test_uniform_two_frames_single_label():
    # enumeration over 9 paths: [a,a], [a,blank], [blank,a] collapse to [a]
    probs = np.full((2, 3), 1 / 3)
    assert ctc_prob_bruteforce(probs, [A]) == pytest.approx(3 / 9)
    loss, _ = ctc_loss(np.log(probs), [A])
    assert loss == pytest.approx(math.log(3), rel=1e-12)


def test_infeasible_target():
    with pytest.raises(InfeasibleTargetError):
        ctc_loss(np.log(np.full((2, 3), 1 / 3)), [A, B, A])
    with pytest.raises(InfeasibleTargetError):
        ctc_loss(np.log(np.full((2, 3), 1 / 3)), [A, A])  # repeat needs a blank
    assert min_frames([A, A, B]) == 4


def test_zero_probability_is_not_infeasibility():
    with np.errstate(divide="ignore"):
        lp = np.log(np.array([[1.0, 0.0, 0.0], [1.0, 0.0, 0.0]]))
    loss, grad = ctc_loss(lp, [A])
    assert loss == math.inf and not grad.any()


def test_blank_in_target_rejected():
    with pytest.raises(ValueError):
        ctc_loss(np.log(np.full((2, 3), 1 / 3)), [0])


def test_oracle_equivalence_small():
    rng = np.random.default_rng(0)
    for _ in range(60):
        T, V = rng.integers(1, 5), rng.integers(2, 4)
        probs = random_probs(rng, T, V, sharp=2.0)
        L = rng.integers(0, 3)
        target = rng.integers(1, V, size=L).tolist()
        if T < min_frames(target):
            continue
        loss, _ = ctc_loss(np.log(probs), target)
        assert math.exp(-loss) == pytest.approx(ctc_prob_bruteforce(probs, target), rel=1e-6)


def test_conservation_exhaustive():
    rng = np.random.default_rng(1)
    probs = random_probs(rng, 4, 3)
    masses = collapsed_masses(probs)
    total = 0.0
    for seq in masses:
        loss, _ = ctc_loss(np.log(probs), list(seq))
        total += math.exp(-loss)
    assert abs(total - 1.0) <= 1e-9


def test_gradient_is_negative_occupancy():
    rng = np.random.default_rng(2)
    lp = np.log(random_probs(rng, 6, 4))
    _, grad = ctc_loss(lp, [1, 2, 2])
    # each frame is occupied by exactly one symbol on every alignment
    np.testing.assert_allclose(grad.sum(axis=1), -1.0, atol=1e-12)


@pytest.mark.parametrize("seed", range(10))
def test_gradient_finite_differences(seed):
    rng = np.random.default_rng(seed)
    T, V = int(rng.integers(3, 7)), int(rng.integers(3, 5))
    lp = np.log(random_probs(rng, T, V))
    target = rng.integers(1, V, size=int(rng.integers(1, 3))).tolist()
    if T < min_frames(target):
        target = target[:1]
    assert finite_diff_check(lambda x: ctc_loss(x, target), lp) <= 1e-4


def test_greedy_blank_single_frame():
    h = greedy_decode(np.log(np.array([[0.6, 0.4]])))
    assert h.tokens == () and h.log_score == pytest.approx(math.log(0.6))


def test_greedy_tie_goes_to_lowest_id():
    h = greedy_decode(np.log(np.array([[0.25, 0.375, 0.375]])))
    assert h.tokens == (1,)


@pytest.mark.parametrize("seed", range(20))
def test_greedy_matches_best_path(seed):
    rng = np.random.default_rng(100 + seed)
    lp = np.log(random_probs(rng, 4, 3))
    path, score = best_path_bruteforce(lp)
    h = greedy_decode(lp)
    assert h.tokens == collapse_ref(path)
    assert h.log_score == pytest.approx(score, abs=1e-12)


def test_greedy_zero_noise_synth():
    target = [3, 1, 1, 4]
    assert list(greedy_decode(synth_posteriors(target, 5)).tokens) == target


def exhaustive_argmax(probs):
    masses = collapsed_masses(probs)
    return min(masses.items(), key=lambda kv: (-kv[1], len(kv[0]), kv[0]))


@pytest.mark.parametrize("seed", range(40))
def test_beam_saturation(seed):
    rng = np.random.default_rng(200 + seed)
    T, V = int(rng.integers(1, 6)), int(rng.integers(2, 5))
    probs = random_probs(rng, T, V, sharp=2.0)
    seq, mass = exhaustive_argmax(probs)
    nbest = prefix_beam_search(np.log(probs), beam_width=V**T, k=1)
    assert nbest[0].tokens == seq
    assert math.exp(nbest[0].log_score) == pytest.approx(mass, rel=1e-9)


def test_designed_three_best():
    probs = np.array([[1.0, 0.0, 0.0], [0.24, 0.58, 0.18]])
    masses = {seq: m for seq, m in collapsed_masses(probs).items() if m > 0}
    assert masses == pytest.approx({(): 0.24, (A,): 0.58, (B,): 0.18})
    with np.errstate(divide="ignore"):
        lp = np.log(probs)
    nbest = prefix_beam_search(lp, beam_width=8, k=3)
    assert [h.tokens for h in nbest] == [(A,), (), (B,)]
    assert [math.exp(h.log_score) for h in nbest] == pytest.approx([0.58, 0.24, 0.18])


def test_zero_noise_beam_recovers_target():
    target = [2, 2, 5, 1]
    nbest = prefix_beam_search(synth_posteriors(target, 6), beam_width=4, k=1)
    assert list(nbest[0].tokens) == target
    assert abs(nbest[0].log_score) <= 1e-6


@pytest.mark.parametrize("seed", range(20))
def test_nbest_sorted_and_distinct(seed):
    rng = np.random.default_rng(300 + seed)
    lp = np.log(random_probs(rng, 8, 5))
    nbest = prefix_beam_search(lp, beam_width=10, k=6)
    scores = [h.log_score for h in nbest]
    assert scores == sorted(scores, reverse=True)
    assert len({h.tokens for h in nbest}) == len(nbest)
    assert all(0 not in h.tokens and h.log_score <= 0 for h in nbest)


@pytest.mark.parametrize("seed", range(30))
def test_top1_monotone_in_beam_width(seed):
    rng = np.random.default_rng(400 + seed)
    T, V = int(rng.integers(2, 6)), int(rng.integers(2, 5))
    lp = np.log(random_probs(rng, T, V, sharp=1.5))
    tops = [prefix_beam_search(lp, beam_width=w, k=1)[0].log_score for w in range(1, V**T + 1)]
    assert all(b >= a - 1e-12 for a, b in zip(tops, tops[1:]))


def test_beam_rejects_bad_widths():
    lp = np.log(np.full((2, 3), 1 / 3))
    with pytest.raises(ValueError):
        prefix_beam_search(lp, beam_width=2, k=3)
    with pytest.raises(ValueError):
        prefix_beam_search(lp, beam_width=2, k=0)


def test_top_n_restricts_labels():
    probs = np.array([[0.1, 0.6, 0.3]])
    # the blank is always expanded; top_n only prunes labels
    nbest = prefix_beam_search(np.log(probs), beam_width=4, k=3, top_n=2)
    assert [h.tokens for h in nbest] == [(1,), (2,), ()]
    nbest = prefix_beam_search(np.log(probs), beam_width=4, k=3, top_n=1)
    assert [h.tokens for h in nbest] == [(1,), ()]


def test_accepts_posterior_matrix():
    m = PosteriorMatrix.from_probs(np.array([[0.2, 0.8]]))
    assert prefix_beam_search(m, 2, 1)[0].tokens == (1,)
