import json

import numpy as np
import pytest

import mpmix
from mpmix.data import (
    BINARY,
    CONTINUOUS,
    COUNT,
    DataError,
    DataSet,
    ModelError,
    ModelSpec,
    MultiPartition,
    canonicalize_model,
    categorical,
    load_dataset,
    reduce_spec,
    schema_of,
    validate_model,
    write_csv,
)


def _write(tmp_path, text, name="d.csv"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def test_small_csv_with_schema(tmp_path):
    path = _write(tmp_path, "age,children\n31.5,2\n40,0\n22.25,1\n")
    ds = load_dataset(path, {"age": "continuous", "children": "count"})
    assert (ds.n, ds.d) == (3, 2)
    assert ds.kinds == (CONTINUOUS, COUNT)
    assert ds.columns[1].dtype == np.int64


def test_cmc_bundled_dataset():
    ds = mpmix.load_cmc()
    assert (ds.n, ds.d) == (1473, 9)
    assert ds.kinds[0] == CONTINUOUS and ds.kinds[1] == COUNT
    assert all(k.is_discrete for k in ds.kinds[2:])


def test_count_with_decimal_names_row_and_column(tmp_path):
    path = _write(tmp_path, "a,b\n1,2\n2,2.5\n")
    with pytest.raises(DataError, match=r"row 2.*'b'.*2\.5"):
        load_dataset(path, {"a": "count", "b": "count"})


def test_missing_values_rejected(tmp_path):
    path = _write(tmp_path, "a,b\n1,NA\n2,3\n")
    with pytest.raises(DataError, match="missing"):
        load_dataset(path)


def test_ragged_rows_rejected(tmp_path):
    path = _write(tmp_path, "a,b\n1,2\n3\n")
    with pytest.raises(DataError, match="row 2"):
        load_dataset(path)


def test_unreadable_file(tmp_path):
    with pytest.raises(DataError):
        load_dataset(tmp_path / "absent.csv")


def test_binary_out_of_range(tmp_path):
    path = _write(tmp_path, "a\n0\n1\n2\n")
    with pytest.raises(DataError):
        load_dataset(path, {"a": "binary"})


def test_auto_kinds(tmp_path):
    rows = ["cat,cnt,real,few"]
    for i in range(30):
        rows.append(f"{'xyz'[i % 3]},{i},{i / 7:.4f},{i % 4}")
    ds = load_dataset(_write(tmp_path, "\n".join(rows) + "\n"))
    assert ds.kinds[0] == categorical(3)
    assert ds.kinds[1] == COUNT
    assert ds.kinds[2] == CONTINUOUS
    # integers with few distinct values are not counts under the rule, so continuous
    assert ds.kinds[3] == CONTINUOUS


def test_categorical_first_appearance_order(tmp_path):
    ds = load_dataset(_write(tmp_path, "c\nlow\nhigh\nlow\nmid\n"), {"c": "categorical"})
    assert ds.encodings[0] == ("low", "high", "mid")
    assert ds.columns[0].tolist() == [0, 1, 0, 2]


def test_ignore_column(tmp_path):
    ds = load_dataset(_write(tmp_path, "a,b\n1.5,x\n2.5,y\n"), {"b": "ignore"})
    assert ds.names == ("a",)


@pytest.mark.parametrize("schema", [
    {"r": "continuous", "k": "count", "b": "binary", "c": "categorical"},
])
def test_roundtrip_is_bit_exact(tmp_path, schema):
    rng = np.random.default_rng(0)
    n = 40
    r = rng.normal(size=n) * 1e3
    ds = DataSet(
        (r, rng.poisson(3, n), rng.integers(0, 2, n), rng.integers(0, 3, n)),
        (CONTINUOUS, COUNT, BINARY, categorical(3)),
        ("r", "k", "b", "c"),
        (None, None, ("0", "1"), ("u", "v", "w")),
    )
    path = tmp_path / "rt.csv"
    write_csv(ds, path)
    back = load_dataset(path, schema_of(ds))
    for a, b in zip(ds.columns, back.columns):
        assert np.array_equal(a, b)
    assert back.columns[0].tobytes() == r.tobytes()
    assert back.encodings == ds.encodings
    again = tmp_path / "rt2.csv"
    write_csv(back, again)
    assert again.read_bytes() == path.read_bytes()


def test_dataset_dict_roundtrip():
    ds = DataSet(([0.1, 0.2], [1, 0]), (CONTINUOUS, BINARY), ("a", "b"))
    back = DataSet.from_dict(json.loads(json.dumps(ds.to_dict())))
    assert back.names == ds.names and back.kinds == ds.kinds
    assert all(np.array_equal(x, y) for x, y in zip(back.columns, ds.columns))


def test_dataset_validation():
    with pytest.raises(DataError):
        DataSet(([1.0, 2.0], [1.0]), (CONTINUOUS, CONTINUOUS), ("a", "b"))
    with pytest.raises(DataError):
        DataSet(([1, -1],), (COUNT,), ("a",))
    with pytest.raises(ValueError):
        categorical(1)


def _four_gaussian():
    rng = np.random.default_rng(1)
    return DataSet(tuple(rng.normal(size=10) for _ in range(4)), (CONTINUOUS,) * 4, tuple("abcd"))


def test_validate_well_formed_spec_has_no_warning():
    spec, warnings = validate_model(ModelSpec((2, 2), (0, 0, 1, 1)), _four_gaussian())
    assert warnings == []


def test_validate_warns_on_all_categorical_block():
    ds = DataSet(([0, 1, 1, 0], [1, 0, 2, 2]), (BINARY, categorical(3)), ("a", "b"))
    _, warnings = validate_model(ModelSpec((2,), (0, 0)), ds)
    assert len(warnings) == 1 and "identifiable" in warnings[0]


def test_validate_errors():
    ds = _four_gaussian()
    with pytest.raises(ModelError, match="outside"):
        validate_model(ModelSpec((2, 2), (0, 0, 2, 2)), ds)
    with pytest.raises(ModelError, match="empty"):
        validate_model(ModelSpec((2, 2, 2), (0, 0, 1, 1)), ds)
    with pytest.raises(ModelError):
        validate_model(ModelSpec((2, 0), (0, 0, 1, 1)), ds)
    with pytest.raises(ModelError):
        validate_model(ModelSpec((2,), (0, 0, 0)), ds)


def test_canonicalize_examples():
    assert canonicalize_model(ModelSpec((3, 2), (1, 1, 0, 0))) == ModelSpec((2, 3), (0, 0, 1, 1))
    assert canonicalize_model(ModelSpec((4, 5, 6), (2, 0, 1))) == ModelSpec((6, 4, 5), (0, 1, 2))
    spec = ModelSpec((2, 3), (0, 1, 0))
    assert canonicalize_model(spec) == spec


def test_spec_dict_is_one_based():
    spec = ModelSpec((2, 3), (0, 1, 1))
    assert spec.to_dict() == {"B": 2, "G": [2, 3], "omega": [1, 2, 2]}
    assert ModelSpec.from_dict(spec.to_dict()) == spec


def test_reduce_spec_merges_single_component_blocks():
    spec, order = reduce_spec(ModelSpec((1, 3, 1, 2), (2, 1, 0, 3, 2)))
    assert spec == ModelSpec((1, 3, 2), (0, 1, 0, 2, 0))
    assert order == [0, 1, 3]


def test_reduce_spec_drops_empty_blocks():
    spec, order = reduce_spec(ModelSpec((2, 2, 2), (2, 2, 0)))
    assert spec == ModelSpec((2, 2), (0, 0, 1))
    assert order == [2, 0]


def test_multipartition_range_check():
    with pytest.raises(ModelError):
        MultiPartition(([0, 2],), (2,))
    assert MultiPartition(([0, 1, 1],), (2,)).to_lists() == [[1, 2, 2]]
