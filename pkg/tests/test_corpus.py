from collections import Counter

import pytest
from hypothesis import given, settings, strategies as st

from codeswitch_st.corpus import (CorpusError, Dataset, DatasetKind, Example, SentimentLabel, load_dataset,
                                  save_dataset, train_dev_split, upsample_minority)

from conftest import NEG, POS


def make(counts, name="d"):
    exs = []
    for label, n in counts.items():
        exs += [Example(f"{label.value[0]}{i}", f"text {label.value} {i}", label) for i in range(n)]
    return Dataset(name, tuple(exs))


def test_load_tsv_labels(data_dir):
    d = load_dataset(data_dir / "source_small.tsv")
    assert len(d) == 3 and d.kind is DatasetKind.SOURCE_LABELED
    assert [ex.gold for ex in d] == [POS, NEG, POS]
    assert d.ids == ["a", "b", "c"]


def test_unknown_label_names_row(data_dir):
    with pytest.raises(CorpusError, match="line 3.*neutral"):
        load_dataset(data_dir / "bad_label.tsv")


def test_jsonl_without_labels_synthesizes_ids(data_dir):
    d = load_dataset(data_dir / "unlabeled.jsonl", kind=DatasetKind.TARGET_UNLABELED)
    assert len(d) == 10
    assert d.ids == [str(i) for i in range(10)]
    assert d["4"].text == "yeh movie ka song bahut awesome"
    assert all(ex.gold is None for ex in d)


def test_empty_file(tmp_path):
    p = tmp_path / "e.tsv"
    p.write_text("")
    with pytest.raises(CorpusError, match="empty"):
        load_dataset(p)


def test_header_only_is_empty(tmp_path):
    p = tmp_path / "e.tsv"
    p.write_text("id\ttext\tlabel\n")
    with pytest.raises(CorpusError, match="empty"):
        load_dataset(p)


def test_bad_json_reports_line(tmp_path):
    p = tmp_path / "x.jsonl"
    p.write_text('{"text": "ok"}\n{oops\n')
    with pytest.raises(CorpusError, match="line 2"):
        load_dataset(p, kind=DatasetKind.TARGET_UNLABELED)


def test_duplicate_ids_rejected(tmp_path):
    p = tmp_path / "d.tsv"
    p.write_text("id\ttext\tlabel\n1\ta\tpos\n1\tb\tneg\n")
    with pytest.raises(CorpusError, match="duplicate"):
        load_dataset(p)


def test_source_requires_labels(tmp_path):
    p = tmp_path / "d.tsv"
    p.write_text("id\ttext\n1\ta\n")
    with pytest.raises(CorpusError, match="unlabeled"):
        load_dataset(p)


def test_blank_text_rejected():
    with pytest.raises(CorpusError):
        Example("1", "   ")


def test_labels_case_insensitive():
    assert SentimentLabel.parse("Positive") is POS
    assert SentimentLabel.parse(" NEG ") is NEG


@pytest.mark.parametrize("fmt", ["tsv", "csv", "jsonl"])
def test_round_trip(tmp_path, fmt):
    d = Dataset("rt", (Example("a", "hello, \"world\"", POS), Example("b", "नमस्ते दुनिया", NEG),
                       Example("c", "plain", POS)))
    path = tmp_path / f"rt.{fmt}"
    save_dataset(d, path)
    assert load_dataset(path, name="rt") == d
    # second round trip is byte-stable
    first = path.read_bytes()
    save_dataset(load_dataset(path, name="rt"), path)
    assert path.read_bytes() == first


texts = st.text(alphabet=st.characters(blacklist_categories=("Cs", "Cc", "Zl", "Zp")), min_size=1,
                max_size=30).filter(lambda s: s.strip())


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(texts, st.sampled_from([POS, NEG])), min_size=1, max_size=20),
       st.sampled_from(["csv", "jsonl"]))
def test_round_trip_property(tmp_path_factory, rows, fmt):
    d = Dataset("p", tuple(Example(str(i), t, l) for i, (t, l) in enumerate(rows)))
    path = tmp_path_factory.mktemp("rt") / f"p.{fmt}"
    save_dataset(d, path)
    assert load_dataset(path, name="p") == d


def test_split_stratified_example():
    d = make({POS: 5, NEG: 5})
    train, dev = train_dev_split(d, 0.2, seed=3)
    assert Counter(ex.gold for ex in dev) == {POS: 1, NEG: 1}
    assert len(train) == 8


def test_split_deterministic():
    d = make({POS: 30, NEG: 12})
    assert train_dev_split(d, 0.2, 7) == train_dev_split(d, 0.2, 7)
    assert train_dev_split(d, 0.2, 7)[1].ids != train_dev_split(d, 0.2, 8)[1].ids


def test_split_large_skewed():
    # 19799 positive + 7809 negative
    d = make({POS: 19799, NEG: 7809})
    _, dev = train_dev_split(d, 0.2, 0)
    assert len(dev) in (5521, 5522)


def test_split_empty_side_is_error():
    with pytest.raises(CorpusError):
        train_dev_split(make({POS: 1, NEG: 1}), 0.2, 0)


def test_split_needs_source_kind():
    d = Dataset("t", (Example("1", "a"),), DatasetKind.TARGET_UNLABELED)
    with pytest.raises(CorpusError):
        train_dev_split(d, 0.2, 0)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 60), st.integers(1, 60), st.floats(0.05, 0.5), st.integers(0, 2 ** 16))
def test_split_is_stratified_partition(n_pos, n_neg, frac, seed):
    d = make({POS: n_pos, NEG: n_neg})
    try:
        train, dev = train_dev_split(d, frac, seed)
    except CorpusError:
        return
    assert set(train.ids).isdisjoint(dev.ids)
    assert set(train.ids) | set(dev.ids) == set(d.ids)
    for label, n in ((POS, n_pos), (NEG, n_neg)):
        in_dev = sum(ex.gold is label for ex in dev)
        assert abs(in_dev - frac * n) <= 1
        assert abs((n - in_dev) - (1 - frac) * n) <= 1


def test_upsample_large_skewed():
    out = upsample_minority(make({POS: 8484, NEG: 1613}), seed=0)
    assert Counter(ex.gold for ex in out) == {POS: 8484, NEG: 8484}


def test_upsample_balanced_is_fixed_point():
    d = make({POS: 5, NEG: 5})
    assert upsample_minority(d, 1) is d


def test_upsample_three_to_one():
    d = make({POS: 3, NEG: 1})
    out = upsample_minority(d, seed=7)
    assert len(out) == 6
    added = out.examples[len(d):]
    assert [ex.id for ex in added] == ["n0#dup1", "n0#dup2"]
    assert all(ex.text == d["n0"].text and ex.gold is NEG for ex in added)
    assert Counter(ex.gold for ex in out) == {POS: 3, NEG: 3}


def test_upsample_single_class_error():
    with pytest.raises(CorpusError):
        upsample_minority(make({POS: 4}), 0)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 40), st.integers(1, 40), st.integers(0, 1000))
def test_upsample_properties(n_pos, n_neg, seed):
    d = make({POS: n_pos, NEG: n_neg})
    out = upsample_minority(d, seed)
    assert out.examples[:len(d)] == d.examples
    assert len(out) == 2 * max(n_pos, n_neg)
    minority = NEG if n_neg < n_pos else POS
    for ex in out.examples[len(d):]:
        src = d[ex.id.split("#dup")[0]]
        assert src.gold is minority and src.text == ex.text
