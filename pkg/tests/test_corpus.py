import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gentext.corpus import (
    MULTICLASS_NAMES,
    Dataset,
    Document,
    FoldAssignment,
    LabelSpace,
    SpaceKind,
    assign_folds,
    concat,
    dumps_dataset,
    fold_class_counts,
    load_dataset,
    parse_dataset,
    write_dataset,
)
from gentext.errors import (
    DuplicateId,
    EmptyText,
    InputError,
    MissingColumn,
    SpaceMismatch,
    TooFewDocuments,
    UnknownLabel,
)

from conftest import make_dataset


def test_label_spaces_fixed_order():
    assert LabelSpace.binary().names == ("H", "M")
    assert LabelSpace.multiclass().names[:3] == ("M2M-100", "Human", "OPUS-MT")
    assert len(LabelSpace.multiclass()) == 14
    assert len(set(MULTICLASS_NAMES)) == 14
    with pytest.raises(InputError):
        LabelSpace(SpaceKind.BINARY, ("M", "H"))


def test_load_multiclass_row(tmp_path, multiclass):
    path = tmp_path / "d.tsv"
    path.write_text("id\ttext\tlabel\n42\tСколько учеников в вашем классе?\tM2M-100\n",
                    encoding="utf-8")
    d = load_dataset(path, multiclass)
    assert d.documents[0] == Document("42", "Сколько учеников в вашем классе?")
    assert d.labels == (multiclass.names.index("M2M-100"),)


def test_header_only_is_empty(binary):
    assert len(parse_dataset("id\ttext\tlabel\n", binary)) == 0
    assert len(parse_dataset("id\ttext\tlabel", binary)) == 0


def test_unknown_label_names_row(binary):
    with pytest.raises(UnknownLabel) as err:
        parse_dataset("id\ttext\tlabel\n1\tok\tH\n2\tfoo\tGPT-9\n", binary)
    assert err.value.name == "GPT-9"
    assert err.value.row == 3


def test_label_match_is_case_sensitive(multiclass):
    with pytest.raises(UnknownLabel):
        parse_dataset("id\ttext\tlabel\n1\tx\thuman\n", multiclass)
    d = parse_dataset("id\ttext\tlabel\n1\tx\t Human \n", multiclass)
    assert d.labels == (1,)


@pytest.mark.parametrize(
    "content, error",
    [
        ("id\tlabel\n1\tH\n", MissingColumn),
        ("id\ttext\tlabel\n1\ta\tH\n1\tb\tM\n", DuplicateId),
        ("id\ttext\tlabel\n1\t   \tH\n", EmptyText),
        ("id\ttext\tlabel\n1\ta\tb\tH\n", MissingColumn),  # tab inside text
    ],
)
def test_load_errors(binary, content, error):
    with pytest.raises(error):
        parse_dataset(content, binary)


def test_unlabeled_and_crlf(binary):
    d = parse_dataset("id\ttext\r\n1\tПрочла автобиографию\r\n2\tещё\r\n", binary, has_labels=False)
    assert d.labels is None
    assert [doc.text for doc in d.documents] == ["Прочла автобиографию", "ещё"]


def test_invalid_utf8(tmp_path, binary):
    path = tmp_path / "bad.tsv"
    path.write_bytes(b"id\ttext\tlabel\n1\t\xff\xfe\tH\n")
    with pytest.raises(InputError):
        load_dataset(path, binary)


text_strategy = st.text(
    st.characters(blacklist_categories=("Cs",), blacklist_characters="\t\n\r"), min_size=1
).filter(lambda s: s.strip())


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(text_strategy, st.integers(0, 1)), max_size=12))
def test_round_trip(tmp_path_factory, rows):
    d = make_dataset([t for t, _ in rows], [y for _, y in rows])
    path = tmp_path_factory.mktemp("rt") / "d.tsv"
    write_dataset(d, path)
    assert load_dataset(path, d.space) == d


def test_write_rejects_tabs(binary):
    d = Dataset((Document("1", "a\tb"),), binary, (0,))
    with pytest.raises(InputError):
        dumps_dataset(d)


def test_concat():
    a = make_dataset([f"a{i}" for i in range(100)], [i % 2 for i in range(100)], prefix="a")
    b = make_dataset([f"b{i}" for i in range(30)], [0] * 30, prefix="b")
    c = concat(a, b)
    assert len(c) == 130
    assert c.documents[:100] == a.documents and c.documents[100:] == b.documents
    assert c.labels == a.labels + b.labels
    empty = make_dataset([], [])
    assert concat(a, empty) == a


def test_concat_errors(multiclass):
    a = make_dataset(["x"], [0], prefix="")
    b = make_dataset(["y"], [1], prefix="")
    with pytest.raises(DuplicateId):
        concat(a, b)
    with pytest.raises(SpaceMismatch):
        concat(a, make_dataset(["y"], [1], space=multiclass, prefix="z"))
    with pytest.raises(SpaceMismatch):
        concat(a, make_dataset(["y"], None, prefix="u"))


def test_concat_associative():
    a = make_dataset(["1", "2"], [0, 1], prefix="a")
    b = make_dataset(["3"], [1], prefix="b")
    c = make_dataset(["4", "5"], [0, 0], prefix="c")
    assert concat(concat(a, b), c) == concat(a, concat(b, c))


def test_folds_balanced_small():
    d = make_dataset([str(i) for i in range(10)], [0] * 5 + [1] * 5)
    folds = assign_folds(d, k=5, seed=0)
    assert (fold_class_counts(d, folds) == 1).all()
    assert assign_folds(d, k=5, seed=0).fold_of == folds.fold_of


def test_folds_errors():
    with pytest.raises(TooFewDocuments):
        assign_folds(make_dataset(list("abcd"), [0, 1, 0, 1]), k=5, seed=0)
    with pytest.raises(InputError):
        assign_folds(make_dataset(list("abcd")), k=2, seed=0)


def test_seed_changes_assignment():
    d = make_dataset([str(i) for i in range(40)], [i % 2 for i in range(40)])
    assert assign_folds(d, 5, 0).fold_of != assign_folds(d, 5, 1).fold_of


@settings(max_examples=80, deadline=None)
@given(
    st.lists(st.integers(0, 13), min_size=2, max_size=120),
    st.integers(2, 7),
    st.integers(0, 2**31),
)
def test_fold_invariants(labels, k, seed):
    if len(labels) < k:
        return
    d = make_dataset([f"t{i}" for i in range(len(labels))], labels, space=LabelSpace.multiclass())
    folds = assign_folds(d, k, seed)
    assert set(folds.fold_of) == set(d.ids)
    assert all(0 <= f < k for f in folds.fold_of.values())
    sizes = np.bincount(list(folds.fold_of.values()), minlength=k)
    target = -(-len(d) // k)
    assert np.all(np.abs(sizes - target) <= 1)
    counts = fold_class_counts(d, folds)
    for c in set(labels):
        assert counts[:, c].max() - counts[:, c].min() <= 1


def test_fold_csv_round_trip():
    d = make_dataset([str(i) for i in range(12)], [i % 2 for i in range(12)])
    folds = assign_folds(d, 3, 5)
    again = FoldAssignment.from_csv(folds.to_csv(), 3, 5)
    assert again == folds
    assert folds.to_csv().startswith("id,fold\n")
