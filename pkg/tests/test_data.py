import numpy as np
import pytest

from fhescale.data import (Dataset, RatingsParseError, build_dataset,
                           load_dataset, parse_ratings, save_dataset,
                           select_pool, synth_dataset, synth_ratings,
                           write_ratings)


def test_parse_single_row():
    table = parse_ratings("1\t50\t5\t881250949")
    assert len(table) == 1
    assert table.user_ids[0] == 1
    assert table.item_ids[0] == 50
    assert table.ratings[0] == 5.0
    assert table.timestamps[0] == 881250949


def test_parse_arity_error_names_line():
    with pytest.raises(RatingsParseError, match="line 1"):
        parse_ratings("1\t50\t5")
    with pytest.raises(RatingsParseError, match="line 2"):
        parse_ratings("1\t50\t5\t881250949\n2\t3\tbad\t7")


def test_parse_validates_ranges():
    with pytest.raises(RatingsParseError, match="line 1"):
        parse_ratings("1\t2\t9.5\t3")
    with pytest.raises(RatingsParseError, match="duplicate"):
        parse_ratings("1\t2\t3\t4\n1\t2\t3\t4")
    assert len(parse_ratings("")) == 0


def test_write_then_parse_roundtrip():
    table = synth_ratings(seed=3, n_users=20)
    assert parse_ratings(write_ratings(table)) == table


def test_single_positive_rating_yields_zero_feature_sample():
    # 49 other users cover the pool; user 99 rates exactly one pool film
    lines = []
    stamp = 0
    for user in range(50):
        lines.append(f"{user}\t{user}\t3\t{stamp}")
        stamp += 1
    lines.append(f"99\t7\t5\t{stamp}")
    dataset = build_dataset(parse_ratings("\n".join(lines)))
    # user 99 contributes the only positive sample
    assert dataset.n_samples == 1
    assert np.all(dataset.features[0] == 0.0)
    assert dataset.film_index[dataset.labels[0]] == 7


def test_too_few_items_rejected():
    lines = [f"1\t{i}\t4\t{i}" for i in range(49)]
    with pytest.raises(ValueError, match="50"):
        build_dataset(parse_ratings("\n".join(lines)))


def test_pool_selection_by_count_then_id():
    lines = []
    stamp = 0
    # items 0..50: item 50 rated twice, others once -> item 50 first
    for user in range(2):
        lines.append(f"{user}\t50\t4\t{stamp}")
        stamp += 1
    for item in range(50):
        lines.append(f"5\t{item}\t4\t{stamp}")
        stamp += 1
    pool = select_pool(parse_ratings("\n".join(lines)))
    assert pool[0] == 50
    assert pool[1:].tolist() == list(range(49))  # count ties break by lower id


def test_no_label_leakage():
    dataset = synth_dataset(seed=5, n_users=60)
    # label column is excluded: features have pool-1 width
    assert dataset.features.shape[1] == 49
    assert np.all(dataset.labels >= 0) and np.all(dataset.labels < 50)


def test_synth_deterministic_and_sized():
    a = synth_dataset(seed=9, n_users=100)
    b = synth_dataset(seed=9, n_users=100)
    assert a == b
    assert a.n_samples >= 100
    c = synth_dataset(seed=10, n_users=100)
    assert c != a


def test_synth_single_user_still_has_full_pool():
    dataset = synth_dataset(seed=2, n_users=1)
    assert len(dataset.film_index) == 50
    assert dataset.n_samples >= 1


def test_artifact_roundtrip(tmp_path):
    dataset = synth_dataset(seed=4, n_users=30)
    save_dataset(dataset, tmp_path / "d.npz")
    assert load_dataset(tmp_path / "d.npz") == dataset
