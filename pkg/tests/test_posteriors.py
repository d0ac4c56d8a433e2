import io
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from pinrefine.ctc import greedy_decode
from pinrefine.metrics import corpus_cer
from pinrefine.posteriors import (
    BLANK,
    BadMagicError,
    NormalizationError,
    PosteriorMatrix,
    StreamVocab,
    TruncatedError,
    VersionMismatchError,
    read_posteriors,
    synth_posteriors,
    write_posteriors,
)


def roundtrip(m):
    buf = io.BytesIO()
    n = write_posteriors(m, buf)
    buf.seek(0)
    return n, read_posteriors(buf)


def random_matrix(rng, T, V):
    logits = rng.normal(scale=3.0, size=(T, V))
    logp = logits - np.logaddexp.reduce(logits, axis=1, keepdims=True)
    return PosteriorMatrix(logp.astype(np.float32))


def test_one_by_two_size():
    m = PosteriorMatrix(np.log(np.array([[0.5, 0.5]], dtype=np.float32)))
    buf = io.BytesIO()
    n = write_posteriors(m, buf)
    # 4 magic bytes + 12 header bytes + 2 f32
    assert n == 4 + 12 + 8 == len(buf.getvalue())
    assert buf.getvalue()[:4] == b"VPPM"


def test_header_fields():
    m = random_matrix(np.random.default_rng(0), 3, 5)
    buf = io.BytesIO()
    write_posteriors(m, buf)
    raw = buf.getvalue()
    assert raw[4] == 1 and raw[5] & 1 and raw[6:8] == b"\x00\x00"
    assert int.from_bytes(raw[8:12], "little") == 3
    assert int.from_bytes(raw[12:16], "little") == 5


def bits(a):
    return np.ascontiguousarray(a, dtype=np.float32).view(np.uint32)


def test_roundtrip_is_bit_exact_with_neg_inf():
    probs = np.array([[1.0, 0.0, 0.0], [0.25, 0.25, 0.5]])
    m = PosteriorMatrix.from_probs(probs, dtype=np.float32)
    _, back = roundtrip(m)
    assert np.isneginf(back.values[0, 1])
    assert np.array_equal(bits(back.values), bits(m.values))


@settings(max_examples=100, deadline=None)
@given(T=st.integers(1, 50), V=st.integers(1, 500), seed=st.integers(0, 2**32 - 1))
def test_roundtrip_property(T, V, seed):
    m = random_matrix(np.random.default_rng(seed), T, V)
    n, back = roundtrip(m)
    assert n == 16 + 4 * T * V
    assert back.values.shape == (T, V)
    assert np.array_equal(bits(back.values), bits(m.values))


def test_unnormalized_write_refused():
    m = PosteriorMatrix(np.log(np.array([[0.5, 0.4]], dtype=np.float32)))
    with pytest.raises(NormalizationError):
        write_posteriors(m, io.BytesIO())


def test_nan_refused():
    m = PosteriorMatrix(np.array([[np.nan, 0.0]], dtype=np.float32))
    with pytest.raises(NormalizationError):
        write_posteriors(m, io.BytesIO())


def encoded(m):
    buf = io.BytesIO()
    write_posteriors(m, buf)
    return bytearray(buf.getvalue())


def test_bad_magic():
    raw = encoded(random_matrix(np.random.default_rng(1), 2, 3))
    raw[0:4] = b"XXXX"
    with pytest.raises(BadMagicError):
        read_posteriors(io.BytesIO(bytes(raw)))


def test_version_mismatch():
    raw = encoded(random_matrix(np.random.default_rng(1), 2, 3))
    raw[4] = 2
    with pytest.raises(VersionMismatchError):
        read_posteriors(io.BytesIO(bytes(raw)))


def test_truncated_payload_names_sizes():
    raw = encoded(random_matrix(np.random.default_rng(1), 2, 3))
    with pytest.raises(TruncatedError) as err:
        read_posteriors(io.BytesIO(bytes(raw[:-5])))
    assert (err.value.expected, err.value.actual) == (24, 19)
    assert "24" in str(err.value) and "19" in str(err.value)


def test_truncated_header():
    with pytest.raises(TruncatedError):
        read_posteriors(io.BytesIO(b"VPPM\x01"))


def test_read_rejects_unnormalized_payload():
    raw = encoded(random_matrix(np.random.default_rng(1), 2, 3))
    raw[16:20] = np.float32(5.0).tobytes()
    with pytest.raises(NormalizationError):
        read_posteriors(io.BytesIO(bytes(raw)))


def test_errors_are_distinct_types():
    kinds = {BadMagicError, VersionMismatchError, TruncatedError, NormalizationError}
    assert len(kinds) == 4
    for a in kinds:
        for b in kinds - {a}:
            assert not issubclass(a, b)


def test_linear_domain_file_is_renormalized():
    m = random_matrix(np.random.default_rng(4), 4, 6)
    buf = io.BytesIO()
    write_posteriors(m, buf, log_domain=False)
    raw = buf.getvalue()
    assert raw[5] & 1 == 0
    back = read_posteriors(io.BytesIO(raw))
    np.testing.assert_allclose(back.values, m.values, atol=1e-5)


def test_synth_zero_noise_greedy_recovers_target():
    m = synth_posteriors([2, 3], vocab_size=5, noise=0.0, seed=0)
    assert greedy_decode(m).tokens == (2, 3)


@pytest.mark.parametrize("fpt,gap", [(1, 0), (2, 0), (1, 1), (3, 2)])
def test_synth_repeats_survive_collapse(fpt, gap):
    target = [1, 1, 2, 2, 2, 1]
    m = synth_posteriors(target, vocab_size=3, frames_per_token=fpt, blank_gap=gap)
    assert list(greedy_decode(m).tokens) == target


def test_synth_is_deterministic():
    a = synth_posteriors([1, 2, 3], 6, noise=0.4, seed=11)
    b = synth_posteriors([1, 2, 3], 6, noise=0.4, seed=11)
    assert np.array_equal(bits(a.values), bits(b.values))
    c = synth_posteriors([1, 2, 3], 6, noise=0.4, seed=12)
    assert not np.array_equal(a.values, c.values)


def test_synth_output_is_valid():
    m = synth_posteriors([1, 4, 2], 6, noise=0.3, seed=5)
    m.validate()
    _, back = roundtrip(m)
    assert np.array_equal(bits(back.values), bits(m.values))


def test_synth_noise_makes_greedy_imperfect():
    # 100 seeds, target length 4, V = 6, noise 0.3
    rng = np.random.default_rng(7)
    pairs = []
    for seed in range(100):
        target = rng.integers(1, 6, size=4).tolist()
        hyp = greedy_decode(synth_posteriors(target, 6, noise=0.3, seed=seed)).tokens
        pairs.append((list(map(str, target)), list(map(str, hyp))))
    rate = corpus_cer(pairs).cer
    assert 0.0 < rate < 1.0


def test_synth_rejects_out_of_range():
    with pytest.raises(ValueError):
        synth_posteriors([6], vocab_size=6)
    with pytest.raises(ValueError):
        synth_posteriors([0], vocab_size=6)
    with pytest.raises(ValueError):
        synth_posteriors([1], vocab_size=6, frames_per_token=0)


def test_stream_vocab_roundtrip():
    v = StreamVocab.build(["银", "行"])
    assert v.tokens[0] == BLANK and v.id("行") == 2
    buf = io.StringIO()
    v.dump(buf)
    buf.seek(0)
    assert StreamVocab.load(buf) == v
    with pytest.raises(ValueError):
        StreamVocab(("a", "b"))
    with pytest.raises(ValueError):
        StreamVocab((BLANK, "a", "a"))
