import numpy as np
import pytest

from fairminmax.data import (
    ColumnSchema,
    DataError,
    Dataset,
    IngestionError,
    balance_undersample,
    generate_moons,
    load_csv,
    read_exported_csv,
    split,
    standardize,
    write_csv,
)


def test_moon_conditionals():
    ds = generate_moons(15000, seed=3)
    y, z = ds.labels, ds.groups
    n = len(ds)
    checks = [
        (y[z == 1].mean(), 0.35, (z == 1).sum()),
        (y[z == 0].mean(), 0.65, (z == 0).sum()),
        (y.mean(), 0.5, n),
    ]
    for est, target, m in checks:
        se = np.sqrt(target * (1 - target) / m)
        assert abs(est - target) < 3 * se


def test_moon_bayes_arithmetic():
    # P(Z=1) = 0.35*0.5 + 0.65*0.5 and Bayes gives back the target conditional
    pz1 = 0.35 * 0.5 + 0.65 * 0.5
    assert pz1 == pytest.approx(0.5)
    assert 0.35 * 0.5 / pz1 == pytest.approx(0.35)


def test_moon_noiseless_on_arcs():
    ds = generate_moons(4, noise_sd=0.0, seed=1)
    for (a, b), y in zip(ds.features, ds.labels):
        if y == 0:
            assert a * a + b * b == pytest.approx(1.0) and b >= -1e-12
        else:
            assert (1 - a) ** 2 + (0.5 - b) ** 2 == pytest.approx(1.0) and b <= 0.5 + 1e-12
    assert ds.labels.sum() == 2


def test_moon_errors_and_determinism():
    with pytest.raises(DataError):
        generate_moons(1)
    a, b = generate_moons(50, seed=9), generate_moons(50, seed=9)
    assert np.array_equal(a.features, b.features) and np.array_equal(a.groups, b.groups)


def test_dataset_immutable():
    ds = generate_moons(10)
    with pytest.raises(ValueError):
        ds.features[0, 0] = 1.0


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def test_load_toy_csv(tmp_path):
    p = write(tmp_path / "t.csv", "age,color,label,race\n30,red,yes,C\n41,blue,no,O\n25,red,yes,O\n")
    schema = ColumnSchema(label="label", sensitive=["race"], numeric=["age"], categorical={"color": []}, label_positive="yes")
    ds = load_csv(p, schema)
    assert len(ds) == 3 and ds.n_features == 3
    assert list(ds.labels) == [1, 0, 1]
    assert list(ds.groups) == [0, 1, 1]
    assert ds.feature_names == ("age", "color=blue", "color=red")
    assert "race" not in " ".join(ds.feature_names)


def test_multiple_sensitive_columns(tmp_path):
    p = write(tmp_path / "t.csv", "x,y,race,sex\n1,1,C,M\n2,0,C,F\n3,1,O,M\n4,0,O,F\n")
    ds = load_csv(p, ColumnSchema(label="y", sensitive=["race", "sex"], numeric=["x"],
                                  group_values={"race": {"C": 0, "O": 1}, "sex": {"M": 0, "F": 1}}))
    assert list(ds.groups) == [0, 1, 2, 3] and ds.n_groups == 4


@pytest.mark.parametrize("text,match", [
    ("a,a,label,g\n1,2,1,0\n", "duplicate"),
    ("a,label\n1,1\n", "missing"),
    ("a,label,g\nfoo,1,0\n", "line 2"),
    ("a,label,g\n1,1\n", "line 2"),
])
def test_ingestion_errors(tmp_path, text, match):
    p = write(tmp_path / "bad.csv", text)
    with pytest.raises(IngestionError, match=match):
        load_csv(p, ColumnSchema(label="label", sensitive=["g"], numeric=["a"]))


def test_unknown_category(tmp_path):
    p = write(tmp_path / "c.csv", "c,label,g\nred,1,0\ngreen,0,1\n")
    with pytest.raises(IngestionError, match="unknown category"):
        load_csv(p, ColumnSchema(label="label", sensitive=["g"], categorical={"c": ["red", "blue"]}))


def test_schema_rejects_double_role():
    with pytest.raises(IngestionError):
        ColumnSchema(label="y", sensitive=["race"], numeric=["race"])


def test_export_roundtrip(tmp_path):
    ds = generate_moons(200, seed=4)
    write_csv(ds, tmp_path / "m.csv")
    back = read_exported_csv(tmp_path / "m.csv")
    assert back.features.tobytes() == ds.features.tobytes()
    assert np.array_equal(back.labels, ds.labels) and np.array_equal(back.groups, ds.groups)


def test_export_roundtrip_through_schema(tmp_path):
    ds = generate_moons(50, seed=5)
    write_csv(ds, tmp_path / "m.csv")
    back = load_csv(tmp_path / "m.csv", ColumnSchema(label="label", sensitive=["group"], numeric=["x0", "x1"]))
    assert back.features.tobytes() == ds.features.tobytes()
    assert np.array_equal(back.groups, ds.groups)


def test_balance_toy():
    ds = Dataset(np.arange(13.0), [1] * 10 + [0] * 3, [0] * 13)
    out = balance_undersample(ds, seed=1)
    assert (out.labels == 1).sum() == 3 and (out.labels == 0).sum() == 3
    assert set(out.features[:, 0]) <= set(ds.features[:, 0])
    assert set(out.features[out.labels == 0, 0]) == {10.0, 11.0, 12.0}


def test_balance_law_counts():
    y = np.r_[np.ones(19360, dtype=int), np.zeros(2431, dtype=int)]
    ds = Dataset(np.zeros((y.size, 1)), y, np.zeros(y.size, dtype=int))
    out = balance_undersample(ds, seed=0)
    assert (out.labels == 1).sum() == 2431 and (out.labels == 0).sum() == 2431


def test_balance_already_balanced_and_single_class():
    ds = Dataset(np.arange(4.0), [0, 1, 0, 1], [0] * 4)
    assert len(balance_undersample(ds)) == 4
    with pytest.raises(DataError):
        balance_undersample(Dataset(np.arange(3.0), [1, 1, 1], [0] * 3))


def test_standardize():
    tr = Dataset([[1.0, 5.0], [3.0, 5.0]], [0, 1], [0, 1])
    te = Dataset([[2.0, 7.0], [5.0, 1.0]], [0, 1], [0, 1])
    a, b, st = standardize(tr, te)
    assert a.features[:, 0].tolist() == [-1.0, 1.0]
    assert a.features[:, 1].tolist() == [0.0, 0.0] and b.features[:, 1].tolist() == [0.0, 0.0]
    assert b.features[:, 0].tolist() == [0.0, 3.0]


def test_split_fraction_and_seed():
    ds = Dataset(np.arange(10.0), [0, 1] * 5, [0] * 10)
    tr, te = split(ds, 0.5, seed=2)
    assert len(tr) == 5 and len(te) == 5
    tr2, _ = split(ds, 0.5, seed=2)
    assert np.array_equal(tr.features, tr2.features)
    assert sorted(np.r_[tr.features[:, 0], te.features[:, 0]]) == list(range(10))
    with pytest.raises(DataError):
        split(ds, 1.0)


def test_split_fixed_counts_compas(tmp_path):
    rng = np.random.default_rng(0)
    n = 7214
    rows = ["age,priors,charge,two_year_recid,race"]
    for _ in range(n):
        rows.append(f"{rng.integers(18, 70)},{rng.integers(0, 20)},{rng.choice(['F', 'M'])},{rng.integers(0, 2)},{rng.choice(['Caucasian', 'Other'])}")
    p = write(tmp_path / "compas.csv", "\n".join(rows) + "\n")
    ds = load_csv(p, ColumnSchema(label="two_year_recid", sensitive=["race"], numeric=["age", "priors"], categorical={"charge": []}))
    tr, te = split(ds, None, seed=0, n_train=5049, n_test=2165)
    assert (len(tr), len(te)) == (5049, 2165)


def test_group_map_wildcard(tmp_path):
    path = tmp_path / "g.csv"
    path.write_text("x,race,y\n1,Caucasian,1\n2,Asian,0\n3,African-American,1\n4,Caucasian,0\n")
    schema = ColumnSchema(label="y", sensitive=["race"], numeric=["x"],
                          group_values={"race": {"Caucasian": 0, "*": 1}})
    ds = load_csv(path, schema)
    assert ds.groups.tolist() == [0, 1, 1, 0] and ds.n_groups == 2
    strict = ColumnSchema(label="y", sensitive=["race"], numeric=["x"], group_values={"race": {"Caucasian": 0}})
    with pytest.raises(IngestionError, match="line 3"):
        load_csv(path, strict)
