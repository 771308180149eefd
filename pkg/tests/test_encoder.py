import numpy as np
import pytest

from hdstream.encoder import (Encoder, EncoderConfig, encode_features, encode_timestep, encode_window, gen_tables,
                              quantize, quantize_array, ranges_from_data)
from hdstream.hdcore import bind, cosine, hamming, is_bipolar, permute, sign


def cfg(**kw):
    base = dict(dim=1000, n_levels=5, flip_frac=0.01, n_features=2, window_len=1, seed=3,
                ranges=[(0.0, 10.0), (0.0, 10.0)])
    base.update(kw)
    return EncoderConfig(**base)


@pytest.mark.parametrize("bad", [dict(flip_frac=0.0), dict(flip_frac=0.5), dict(n_levels=1), dict(dim=0),
                                 dict(n_features=0), dict(window_len=0)])
def test_config_rejects(bad):
    with pytest.raises(ValueError):
        cfg(**{**bad, "ranges": None})


def test_ranges_must_be_ordered():
    with pytest.raises(ValueError):
        cfg(ranges=[(0, 1), (2, 2)])
    with pytest.raises(ValueError):
        cfg(ranges=[(0, 1)])


def test_adjacent_levels_exact_flips():
    c = cfg(dim=1000, n_levels=30, flip_frac=0.01)
    t = gen_tables(c)
    for i in range(c.n_levels - 1):
        assert hamming(t.levels[i], t.levels[i + 1]) == 10
        assert cosine(t.levels[i], t.levels[i + 1]) == pytest.approx(0.98, abs=1e-15)


def test_tables_deterministic_and_bipolar():
    a, b = gen_tables(cfg()), gen_tables(cfg())
    assert np.array_equal(a.levels, b.levels) and np.array_equal(a.ids, b.ids)
    assert is_bipolar(a.levels) and is_bipolar(a.ids)
    assert not np.array_equal(gen_tables(cfg(seed=4)).levels, a.levels)
    with pytest.raises(ValueError):
        a.levels[0, 0] = 1  # read-only


def test_level_similarity_decays():
    for s in range(20):
        t = gen_tables(EncoderConfig(dim=10000, n_levels=100, flip_frac=0.01, seed=s))
        assert cosine(t.levels[0], t.levels[99]) < cosine(t.levels[0], t.levels[10])


def test_ids_nearly_orthogonal():
    t = gen_tables(EncoderConfig(dim=2000, n_levels=2, flip_frac=0.01, n_features=12, seed=0))
    C = t.ids.astype(float) @ t.ids.T.astype(float) / 2000
    np.fill_diagonal(C, 0)
    assert np.abs(C).max() < 0.2


def test_quantize_examples():
    c = EncoderConfig(dim=10, n_levels=5, flip_frac=0.1, n_features=1, ranges=[(0, 10)])
    assert quantize(7.3, 0, c) == 3
    assert quantize(0.0, 0, c) == 0
    assert quantize(10.0, 0, c) == 4
    assert quantize(-5, 0, c) == 0
    assert quantize(99, 0, c) == 4
    with pytest.raises(ValueError):
        quantize(float("nan"), 0, c)
    assert quantize_array(np.array([[7.3], [-1], [10]]), c).ravel().tolist() == [3, 0, 4]
    with pytest.raises(ValueError):
        quantize_array(np.array([[np.inf]]), c)


def test_quantize_without_ranges():
    c = EncoderConfig(dim=10, n_levels=5, flip_frac=0.1, n_features=1)
    with pytest.raises(ValueError):
        quantize_array(np.zeros((1, 1)), c)


def test_ranges_from_data():
    r = ranges_from_data(np.array([[0.0, 3.0], [2.0, 3.0]]))
    assert r == [(0.0, 2.0), (2.5, 3.5)]


def test_timestep_single_sensor():
    c = cfg(n_features=1, ranges=[(0, 10)])
    t = gen_tables(c)
    q = quantize(4.1, 0, c)
    assert np.array_equal(encode_timestep([4.1], t, c), bind(t.ids[0], t.levels[q]))
    with pytest.raises(ValueError):
        encode_timestep([1.0, 2.0], t, c)


def test_timestep_matches_reference():
    c = cfg(n_features=4, ranges=[(0, 10)] * 4)
    t = gen_tables(c)
    x = np.array([1.0, 5.5, 9.9, 3.2])
    acc = sum(t.ids[i].astype(int) * t.levels[quantize(x[i], i, c)] for i in range(4))
    assert np.array_equal(encode_timestep(x, t, c), sign(acc))
    # sensor order does not matter once ids travel with their readings
    perm = [2, 0, 3, 1]
    acc2 = sum(t.ids[i].astype(int) * t.levels[quantize(x[i], i, c)] for i in perm)
    assert np.array_equal(sign(acc), sign(acc2))


def test_window_reference_and_reductions():
    c = cfg(window_len=3)
    t = gen_tables(c)
    X = np.array([[1.0, 2.0], [5.0, 6.0], [9.0, 0.5]])
    ref = np.ones(c.dim, np.int8)
    for tau in range(1, 4):
        ref = bind(ref, permute(encode_timestep(X[tau - 1], t, c), tau))
    assert np.array_equal(encode_window(X, t, c), ref)
    assert np.array_equal(encode_window(X, t, c), encode_window(X.copy(), t, c))
    c1 = cfg()
    t1 = gen_tables(c1)
    assert np.array_equal(encode_window(X[:1], t1, c1), permute(encode_timestep(X[0], t1, c1), 1))
    with pytest.raises(ValueError):
        encode_window(X[:2], t, c)


def test_window_order_matters():
    c = EncoderConfig(dim=10000, n_levels=10, flip_frac=0.01, n_features=2, window_len=4, seed=1,
                      ranges=[(0, 10), (0, 10)])
    t = gen_tables(c)
    X = np.array([[0.5, 9.5], [3.5, 6.5], [6.5, 3.5], [9.5, 0.5]])
    assert cosine(encode_window(X, t, c), encode_window(X[::-1], t, c)) < 0.9


def test_features_path():
    c = cfg()
    t = gen_tables(c)
    f = np.array([3.3, 7.7])
    assert np.array_equal(encode_features(f, t, c), encode_window(f[None], t, c))
    assert np.array_equal(encode_features(f, t, c), encode_features(f + 0.01, t, c))  # same bins
    with pytest.raises(ValueError):
        encode_features(f, t, cfg(window_len=2))
    with pytest.raises(ValueError):
        encode_features(np.ones(3), t, c)


def test_features_in_different_bins_dissimilar():
    # D=10000, Q=100, P=0.02 with every feature at least 50 levels apart;
    # max over these 20 seeds was 0.245 when derived
    rng = np.random.default_rng(0)
    sims = []
    for s in range(20):
        c = EncoderConfig(dim=10000, n_levels=100, flip_frac=0.02, n_features=8, seed=s, ranges=[(0, 100)] * 8)
        t = gen_tables(c)
        x = rng.integers(0, 50, 8)
        y = np.maximum(rng.integers(50, 100, 8), x + 50)
        sims.append(cosine(encode_features(x + 0.5, t, c), encode_features(y + 0.5, t, c)))
    assert max(sims) < 0.3


def test_even_feature_count_ties_raise_similarity():
    # zero-sum ties go to +1 in both encodings, so even d correlates more than odd d
    far = {}
    for d in (8, 9):
        c = EncoderConfig(dim=10000, n_levels=100, flip_frac=0.01, n_features=d, seed=0, ranges=[(0, 100)] * d)
        t = gen_tables(c)
        far[d] = cosine(encode_features(np.full(d, 0.5), t, c), encode_features(np.full(d, 99.5), t, c))
    single = cosine(gen_tables(EncoderConfig(dim=10000, n_levels=100, flip_frac=0.01, seed=0)).levels[0],
                    gen_tables(EncoderConfig(dim=10000, n_levels=100, flip_frac=0.01, seed=0)).levels[99])
    assert far[9] == pytest.approx(single)
    assert far[8] > far[9]


def test_similarity_preserved_single_sensor():
    # non-increasing in level distance, all pairs, Q <= 20
    for s in range(10):
        c = EncoderConfig(dim=10000, n_levels=20, flip_frac=0.01, n_features=1, seed=s, ranges=[(0, 20)])
        t = gen_tables(c)
        H = np.stack([encode_timestep([i + 0.5], t, c) for i in range(20)]).astype(float)
        S = H @ H.T / c.dim
        for i in range(20):
            row = S[i]
            right = row[i:]
            left = row[: i + 1][::-1]
            assert np.all(np.diff(right) <= 1e-12)
            assert np.all(np.diff(left) <= 1e-12)


def test_encoder_object():
    c = cfg(window_len=2)
    enc = Encoder(c)
    X = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert np.array_equal(enc(X), encode_window(X, enc.tables, c))
    assert enc.encode_many([X, X]).shape == (2, c.dim)
    assert enc.encode_many([]).shape == (0, c.dim)
    e1 = Encoder(cfg())
    assert np.array_equal(e1(np.array([1.0, 2.0])), encode_features(np.array([1.0, 2.0]), e1.tables, e1.cfg))
