"""Distinctiveness scores and selection against the brute-force oracle."""
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from descsel.errors import ConfigError, DataError
from descsel.neighborhood import CandidateSet
from descsel.selector import (
    SelectionConfig,
    assign_llm,
    assign_random,
    distinctiveness,
    dump_distinctiveness,
    select,
    select_batch,
)
from descsel.store import DescriptionPool
from oracles import oracle_distinctiveness, oracle_select

# lookup rows for two classes over a four-description pool
S2 = np.array([[0.9, 0.2, 0.5, 0.1], [0.3, 0.8, 0.5, 0.4]])


def _cand(ids, image_index=0):
    ids = np.asarray(ids, dtype=np.int64)
    return CandidateSet(image_index=image_index, class_ids=ids, scores=np.zeros(len(ids)))


def test_hand_scores_two_classes():
    assert distinctiveness(S2, [0, 1], 0, "clamp") == pytest.approx(
        [0.6, 0.0, 0.0, 0.0], abs=1e-12
    )
    assert distinctiveness(S2, [0, 1], 1, "clamp") == pytest.approx(
        [0.0, 0.6, 0.0, 0.3], abs=1e-12
    )
    # col 2 ties at 0.5: zero margin distinguishes nothing in either mode
    assert distinctiveness(S2, [0, 1], 0, "strict") == pytest.approx(
        [0.6, 0.0, 0.0, 0.0], abs=1e-12
    )


def test_hand_scores_three_classes():
    S3 = np.array([[0.5], [0.1], [0.7]])
    # diffs for target 0 are +0.4 and -0.2
    assert distinctiveness(S3, [0, 1, 2], 0, "clamp") == pytest.approx([0.2], abs=1e-12)
    assert distinctiveness(S3, [0, 1, 2], 0, "strict") == [0.0]
    both_pos = np.array([[0.5], [0.1], [0.3]])
    assert distinctiveness(both_pos, [0, 1, 2], 0, "clamp") == pytest.approx(
        [0.3], abs=1e-12
    )
    assert distinctiveness(both_pos, [0, 1, 2], 0, "strict") == pytest.approx(
        [0.3], abs=1e-12
    )


def test_hand_selection():
    cfg = SelectionConfig(m=1)
    out = select(S2, _cand([0, 1]), cfg)
    assert out.selected == {0: [0], 1: [1]}
    assert out.scores[0] == pytest.approx([0.6], abs=1e-12)

    wide = select(S2, _cand([0, 1]), SelectionConfig(m=5))
    assert wide.selected[1] == [1, 3]  # descending score, zeros dropped


def test_dump_distinctiveness_lists_positive_scores():
    dump = dump_distinctiveness(S2, _cand([0, 1]), 0)
    assert [pid for pid, _ in dump] == [0]
    assert dump[0][1] == pytest.approx(0.6, abs=1e-12)


def test_identical_rows_select_nothing():
    flat = np.tile(np.array([[0.4, 0.2, 0.1]]), (3, 1))
    out = select(flat, _cand([0, 1, 2]), SelectionConfig(m=4))
    assert all(out.selected[c] == [] for c in (0, 1, 2))


def test_ties_break_toward_smaller_pool_id():
    S = np.array([[0.8, 0.8, 0.2], [0.1, 0.1, 0.1]])
    out = select(S, _cand([0, 1]), SelectionConfig(m=2))
    assert out.selected[0] == [0, 1]


def test_rejects_bad_arguments():
    with pytest.raises(ValueError):
        distinctiveness(S2, [0], 0, "clamp")  # no rival
    with pytest.raises(ValueError):
        distinctiveness(S2, [0, 1], 3, "clamp")  # target not a candidate
    with pytest.raises(ConfigError):
        distinctiveness(S2, [0, 1], 0, "softmax")
    with pytest.raises(ConfigError):
        SelectionConfig(m=0)
    with pytest.raises(ConfigError):
        SelectionConfig(positivity_mode="loose")


@pytest.mark.parametrize("mode", ["clamp", "strict"])
def test_matches_oracle_on_random_instances(mode):
    rng = np.random.default_rng(0 if mode == "clamp" else 1)
    for _ in range(200):
        n_classes = int(rng.integers(2, 9))
        pool = int(rng.integers(1, 31))
        k = int(rng.integers(2, min(n_classes, 5) + 1))
        m = int(rng.integers(1, 6))
        S = rng.uniform(-1, 1, size=(n_classes, pool)).astype(np.float32)
        ids = rng.choice(n_classes, size=k, replace=False)
        expected = oracle_select(S, ids, m, mode)
        got = select(S, _cand(ids), SelectionConfig(m=m, positivity_mode=mode))
        for target in (int(c) for c in ids):
            exp_ids, exp_scores = expected[target]
            assert got.selected[target] == exp_ids
            assert got.scores[target] == exp_scores  # bit-identical accumulation


def test_select_batch_matches_single_calls():
    rng = np.random.default_rng(3)
    S = rng.uniform(-1, 1, size=(5, 12))
    cands = [_cand(rng.choice(5, size=3, replace=False), i) for i in range(4)]
    cfg = SelectionConfig(m=3)
    batch = select_batch(S, cands, cfg)
    for cand, got in zip(cands, batch):
        one = select(S, cand, cfg)
        assert got.selected == one.selected and got.scores == one.scores


# ---------------------------------------------------------------------------
# properties

matrices = st.integers(min_value=0, max_value=10**9)


def _random_matrix(seed, n_classes, pool):
    return np.random.default_rng(seed).uniform(-1, 1, size=(n_classes, pool))


@given(matrices)
@settings(max_examples=50, deadline=None)
def test_two_candidate_scores_are_antisymmetric(seed):
    S = _random_matrix(seed, 2, 15)
    a = distinctiveness(S, [0, 1], 0, "clamp")
    b = distinctiveness(S, [0, 1], 1, "clamp")
    # with one rival only one side of each difference survives the clamp
    assert np.all((a == 0.0) | (b == 0.0))
    assert np.allclose(np.where(a > 0, a, -b), S[0] - S[1])


@given(matrices, st.integers(min_value=2, max_value=5))
@settings(max_examples=50, deadline=None)
def test_strict_selections_are_disjoint(seed, k):
    S = _random_matrix(seed, k, 12)
    out = select(S, _cand(range(k)), SelectionConfig(m=12, positivity_mode="strict"))
    seen: set[int] = set()
    for c in range(k):
        assert seen.isdisjoint(out.selected[c])
        seen.update(out.selected[c])


@given(matrices, st.integers(min_value=2, max_value=5))
@settings(max_examples=50, deadline=None)
def test_strict_equals_clamp_where_strict_is_positive(seed, k):
    S = _random_matrix(seed, k, 10)
    strict = distinctiveness(S, range(k), 0, "strict")
    clamp = distinctiveness(S, range(k), 0, "clamp")
    assert np.all(strict >= 0.0) and np.all(clamp >= 0.0)
    positive = strict > 0.0
    assert np.array_equal(strict[positive], clamp[positive])


@given(matrices, st.floats(min_value=-0.5, max_value=0.5))
@settings(max_examples=50, deadline=None)
def test_column_shift_leaves_scores_unchanged(seed, shift):
    # adding a constant to one description's column for every class cannot
    # change a difference-based score
    S = _random_matrix(seed, 3, 8)
    shifted = S.copy()
    shifted[:, 2] += shift
    base = distinctiveness(S, [0, 1, 2], 1, "clamp")
    moved = distinctiveness(shifted, [0, 1, 2], 1, "clamp")
    assert moved == pytest.approx(base, abs=1e-9)


@given(matrices)
@settings(max_examples=50, deadline=None)
def test_class_permutation_equivariance(seed):
    # relabeling classes and candidates together must not change selections
    S = _random_matrix(seed, 5, 9)
    perm = np.random.default_rng(seed + 1).permutation(5)
    inv = np.argsort(perm)
    ids = [0, 2, 4]
    base = select(S, _cand(ids), SelectionConfig(m=4))
    permuted = select(S[perm], _cand([int(inv[c]) for c in ids]), SelectionConfig(m=4))
    for c in ids:
        assert permuted.selected[int(inv[c])] == base.selected[c]
        assert permuted.scores[int(inv[c])] == base.scores[c]


def test_m_prefix_monotonicity():
    rng = np.random.default_rng(9)
    S = rng.uniform(-1, 1, size=(4, 20))
    small = select(S, _cand([0, 1, 2]), SelectionConfig(m=2))
    large = select(S, _cand([0, 1, 2]), SelectionConfig(m=6))
    for c in (0, 1, 2):
        assert large.selected[c][:2] == small.selected[c]


# ---------------------------------------------------------------------------
# class-level baselines

def _pool(origins):
    n = 1 if origins is None else len(origins)
    emb = np.eye(max(n, 2), dtype=np.float32)[:n]
    return DescriptionPool(
        texts=[f"d{i}" for i in range(n)], embeddings=emb, origin_class=origins
    )


def test_assign_llm_groups_by_origin():
    pool = _pool([0, None, 1, 0, None])
    assert assign_llm(pool, n_classes=2) == {0: [0, 3], 1: [2]}
    assert assign_llm(pool, n_classes=3) == {0: [0, 3], 1: [2], 2: []}
    assert assign_llm(pool, n_classes=2, cap=1) == {0: [0], 1: [2]}
    assert assign_llm(pool, n_classes=2, cap=0) == {0: [], 1: []}


def test_assign_llm_rejects_bad_metadata():
    with pytest.raises(DataError):
        assign_llm(_pool(None), n_classes=2)
    with pytest.raises(DataError):
        assign_llm(_pool([5]), n_classes=2)
    with pytest.raises(ConfigError):
        assign_llm(_pool([0]), n_classes=1, cap=-1)


def test_assign_random_draws_are_deterministic():
    a = assign_random(pool_size=50, per_class=5, seed=0, n_classes=4)
    b = assign_random(pool_size=50, per_class=5, seed=0, n_classes=4)
    assert a == b
    c = assign_random(pool_size=50, per_class=5, seed=1, n_classes=4)
    assert a != c
    assert a[0] != a[1]  # per-class streams differ


def test_assign_random_draws_without_replacement():
    out = assign_random(pool_size=20, per_class=20, seed=3, n_classes=3)
    for ids in out.values():
        assert sorted(ids) == list(range(20))


def test_assign_random_rejects_overdraw():
    with pytest.raises(ConfigError):
        assign_random(pool_size=3, per_class=4, seed=0, n_classes=2)
