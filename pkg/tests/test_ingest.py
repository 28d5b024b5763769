import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spata.ingest import (
    ColumnKind,
    DataError,
    Dataset,
    encode_categoricals,
    encode_like,
    load_csv,
    stratified_indices,
    stratified_split,
)


def write(tmp_path, text, name="in.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


class TestLoadCsv:
    def test_kinds_and_labels(self, labelled_csv):
        table = load_csv(labelled_csv, label_column="label")
        assert table.names == ["duration", "bytes", "proto"]
        assert table.kinds == [ColumnKind.NUMERIC, ColumnKind.NUMERIC, ColumnKind.CATEGORICAL]
        assert table.n_rows == 120
        assert set(table.labels) == {"attack", "benign"}
        assert table.numeric["bytes"].dtype == np.float64

    def test_override(self, tmp_path):
        path = write(tmp_path, "zip,y\n10115,a\n80331,b\n")
        table = load_csv(path, "y", {"zip": ColumnKind.CATEGORICAL})
        assert table.kinds == [ColumnKind.CATEGORICAL]
        with pytest.raises(DataError, match="unknown"):
            load_csv(path, "y", {"nope": ColumnKind.NUMERIC})

    def test_forced_numeric_rejects_text(self, tmp_path):
        path = write(tmp_path, "p,y\ntcp,a\n")
        with pytest.raises(DataError, match="forced numeric"):
            load_csv(path, "y", {"p": ColumnKind.NUMERIC})

    @pytest.mark.parametrize(
        "text, match",
        [
            ("", "empty"),
            ("a,a,y\n1,2,k\n", "duplicate"),
            ("a,y\n1,k\n2\n", "line 3"),
        ],
    )
    def test_errors(self, tmp_path, text, match):
        with pytest.raises(DataError, match=match):
            load_csv(write(tmp_path, text), "y")

    def test_missing_file_and_label(self, tmp_path):
        with pytest.raises(DataError, match="not found"):
            load_csv(tmp_path / "absent.csv")
        with pytest.raises(DataError, match="label column"):
            load_csv(write(tmp_path, "a,b\n1,2\n"), "y")

    def test_non_finite_is_categorical(self, tmp_path):
        table = load_csv(write(tmp_path, "a,y\n1,k\ninf,k\n"), "y")
        assert table.kinds == [ColumnKind.CATEGORICAL]

    def test_empty_numeric_cells(self, tmp_path):
        path = write(tmp_path, "a,y\n1,k\n,k\n3,k\n")
        with pytest.raises(DataError, match="empty cell"):
            load_csv(path, "y")
        table = load_csv(path, "y", missing_as_out_of_domain=True)
        col = table.numeric["a"]
        assert col[0] == 1.0 and np.isnan(col[1]) and col[2] == 3.0


class TestEncode:
    def test_one_hot_order(self, tmp_path):
        path = write(tmp_path, "p,y\nudp,a\ntcp,a\ntcp,b\n")
        data = encode_categoricals(load_csv(path, "y"))
        assert data.feature_names == ("p=tcp", "p=udp")
        assert data.columns[0].tolist() == [0.0, 1.0, 1.0]

    def test_rare_pooled(self, tmp_path):
        path = write(tmp_path, "c,y\na,k\na,k\na,k\nb,k\nc,k\n")
        data = encode_categoricals(load_csv(path, "y"), min_frequency=0.3)
        assert data.feature_names == ("c=a", "c=__other__")
        assert data.columns[1].tolist() == [0, 0, 0, 1, 1]

    def test_numeric_identity(self, tmp_path):
        path = write(tmp_path, "x,z,y\n1.5,-2,k\n3,4e3,m\n")
        data = encode_categoricals(load_csv(path, "y"))
        assert data.feature_names == ("x", "z")
        assert data.columns[1].tolist() == [-2.0, 4000.0]
        assert data.labels.tolist() == ["k", "m"]

    def test_rows_sum_to_one(self, labelled_csv):
        data = encode_categoricals(load_csv(labelled_csv, "label"), min_frequency=0.1)
        onehot = [c for n, c in zip(data.feature_names, data.columns) if n.startswith("proto=")]
        assert "proto=__other__" in data.feature_names  # the rare "gre" rows
        assert np.all(np.sum(onehot, axis=0) == 1.0)

    def test_encode_like(self, tmp_path, labelled_csv):
        train = encode_categoricals(load_csv(labelled_csv, "label"), min_frequency=0.1)
        path = write(tmp_path, "duration,bytes,proto,label\n1.0,60,sctp,x\n2.0,70,tcp,y\n", "new.csv")
        data, missing, unexpected = encode_like(load_csv(path, "label"), train.feature_names)
        assert not missing and not unexpected
        assert data.feature_names == train.feature_names
        other = data.columns[data.feature_names.index("proto=__other__")]
        assert other.tolist() == [1.0, 0.0]

    def test_encode_like_mismatch(self, tmp_path):
        path = write(tmp_path, "a,extra,y\n1,2,k\n")
        _, missing, unexpected = encode_like(load_csv(path, "y"), ["a", "b"])
        assert missing == ["b"] and unexpected == ["extra"]


class TestSplit:
    def test_per_class_counts(self):
        labels = ["A"] * 10 + ["B"] * 10
        train, test = stratified_indices(labels, 0.3, seed=1)
        assert len(test) == 6 and len(train) == 14
        assert sorted(np.asarray(labels)[test].tolist()) == ["A"] * 3 + ["B"] * 3

    def test_deterministic(self):
        labels = list("ABCABCABCAAB")
        first = stratified_indices(labels, 0.5, seed=7)
        second = stratified_indices(labels, 0.5, seed=7)
        assert all(np.array_equal(a, b) for a, b in zip(first, second))

    def test_single_class_half(self):
        train, test = stratified_indices(["k"] * 4, 0.5, seed=0)
        assert len(train) == 2 and len(test) == 2

    def test_singleton_stays_in_train(self, caplog):
        with caplog.at_level(logging.WARNING):
            train, test = stratified_indices(["A", "A", "A", "B"], 0.5, seed=0)
        assert 3 in train.tolist()
        assert "single instance" in caplog.text

    @pytest.mark.parametrize("f", [0.0, 1.0, -0.1, 1.5])
    def test_rejects_fraction(self, f):
        with pytest.raises(ValueError):
            stratified_indices(["a", "b"], f, 0)

    def test_split_dataset(self):
        data = Dataset(("x",), (np.arange(20.0),), np.array(["a", "b"] * 10))
        train, test = stratified_split(data, 0.25, seed=3)
        assert train.n_rows + test.n_rows == 20
        assert set(train.columns[0]).isdisjoint(test.columns[0])
        assert np.all(np.diff(train.columns[0]) > 0)

    @given(st.lists(st.sampled_from("abcd"), min_size=2, max_size=80), st.floats(0.05, 0.95), st.integers(0, 99))
    @settings(max_examples=100)
    def test_partition_property(self, labels, f, seed):
        train, test = stratified_indices(labels, f, seed)
        assert sorted(train.tolist() + test.tolist()) == list(range(len(labels)))
        arr = np.asarray(labels)
        for k in set(labels):
            c = int((arr == k).sum())
            if c > 1:
                assert int((arr[test] == k).sum()) == int(np.floor(f * c + 0.5))
