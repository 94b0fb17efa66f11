"""Dataset ingestion, orientation, and partitioning."""

import io

import numpy as np
import pytest

from permrank import (ConfigError, DataError, Dataset, VariableMeta,
                      load_dataset, orient, partition_views)

CLASSROOM_CONFIG = {
    "group": "classroom",
    "variables": [
        {"name": "thermal", "kind": "ordinal", "levels": [1, 2, 3, 4, 5]},
        {"name": "acoustic", "kind": "ordinal", "levels": [1, 2, 3, 4, 5]},
    ],
}

# cross-tabulated survey counts: (thermal, acoustic) -> count per classroom
CLASSROOM_FREQS = {
    "C1": {(3, 3): 2, (3, 4): 3, (3, 5): 1, (4, 3): 2, (4, 4): 6, (4, 5): 2,
           (5, 3): 1, (5, 4): 1, (5, 5): 7},
    "C2": {(3, 3): 3, (3, 4): 2, (3, 5): 2, (4, 4): 4, (4, 5): 2,
           (5, 3): 2, (5, 4): 2, (5, 5): 8},
    "C3": {(3, 3): 6, (3, 4): 3, (3, 5): 1, (4, 3): 2, (4, 4): 5, (4, 5): 2,
           (5, 3): 1, (5, 4): 2, (5, 5): 3},
}


def classroom_csv(frequency_column=False):
    lines = ["classroom,thermal,acoustic" +
             (",count" if frequency_column else "")]
    for room, freqs in CLASSROOM_FREQS.items():
        for (t, a), cnt in freqs.items():
            if frequency_column:
                lines.append(f"{room},{t},{a},{cnt}")
            else:
                lines.extend([f"{room},{t},{a}"] * cnt)
    return io.StringIO("\n".join(lines))


class TestLoad:
    def test_survey_shape(self):
        ds = load_dataset(classroom_csv(), CLASSROOM_CONFIG)
        assert ds.n == 75 and ds.p == 2 and ds.n_groups == 3
        assert set(ds.group_sizes().values()) == {25}

    def test_frequency_expansion(self):
        cfg = dict(CLASSROOM_CONFIG, frequency="count")
        ds = load_dataset(classroom_csv(frequency_column=True), cfg)
        assert ds.n == 75
        plain = load_dataset(classroom_csv(), CLASSROOM_CONFIG)
        assert sorted(map(tuple, ds.values.tolist())) == \
            sorted(map(tuple, plain.values.tolist()))

    def test_empty_table(self):
        with pytest.raises(DataError, match="no units"):
            load_dataset(io.StringIO("g,y\n"), {
                "group": "g", "variables": [{"name": "y"}]})

    def test_single_group(self):
        with pytest.raises(DataError, match="C >= 2"):
            load_dataset(io.StringIO("g,y\na,1\na,2\n"), {
                "group": "g", "variables": [{"name": "y"}]})

    def test_unknown_ordinal_level_with_location(self):
        src = io.StringIO("g,y\na,low\na,low\nb,weird\nb,low\n")
        cfg = {"group": "g", "variables": [
            {"name": "y", "kind": "ordinal", "levels": ["low", "high"]}]}
        with pytest.raises(DataError, match=r"row 4, column 'y'.*'weird'"):
            load_dataset(src, cfg)

    def test_undersized_group(self):
        src = io.StringIO("g,y\na,1\na,2\nb,3\n")
        with pytest.raises(DataError, match="n_j >= 2"):
            load_dataset(src, {"group": "g", "variables": [{"name": "y"}]})

    def test_no_variables(self):
        with pytest.raises(ConfigError, match="variables"):
            load_dataset(io.StringIO("g\na\nb\n"), {"group": "g",
                                                    "variables": []})

    def test_missing_cells_flagged_not_imputed(self):
        src = io.StringIO("g,y\na,1\na,\nb,3\nb,4\n")
        ds = load_dataset(src, {"group": "g", "variables": [{"name": "y"}]})
        assert np.isnan(ds.values[1, 0])

    def test_missing_token(self):
        src = io.StringIO("g,y\na,1\na,NA\nb,3\nb,4\n")
        cfg = {"group": "g", "missing_token": "NA",
               "variables": [{"name": "y"}]}
        assert np.isnan(load_dataset(src, cfg).values[1, 0])

    def test_binary_rejects_other_values(self):
        src = io.StringIO("g,y\na,0\na,2\nb,1\nb,0\n")
        cfg = {"group": "g", "variables": [{"name": "y", "kind": "binary"}]}
        with pytest.raises(DataError, match="binary"):
            load_dataset(src, cfg)

    def test_target_transform(self):
        src = io.StringIO("g,y\na,9\na,11\nb,10\nb,14\n")
        cfg = {"group": "g",
               "variables": [{"name": "y", "target": 10}]}
        ds = load_dataset(src, cfg)
        assert ds.values[:, 0].tolist() == [-1.0, -1.0, 0.0, -4.0]
        assert ds.meta[0].direction == "higher_better"

    def test_group_column_missing(self):
        with pytest.raises(DataError, match="group"):
            load_dataset(io.StringIO("x,y\n1,2\n"), {
                "group": "g", "variables": [{"name": "y"}]})

    def test_block_must_cover_groups(self):
        with pytest.raises(DataError, match="block"):
            Dataset(values=np.arange(4.0)[:, None],
                    groups=("a", "a", "b", "b"),
                    meta=(VariableMeta("y"),),
                    block=("b1", "b1", "b1", "b2"))


class TestOrient:
    def test_numeric_flip(self):
        ds = Dataset(values=np.array([[3.2], [1.0], [0.5], [2.0]]),
                     groups=("a", "a", "b", "b"),
                     meta=(VariableMeta("y", direction="lower_better"),))
        out = orient(ds)
        assert out.values[0, 0] == -3.2
        assert out.meta[0].direction == "higher_better"

    def test_ordinal_reflection(self):
        meta = VariableMeta("y", kind="ordinal", direction="lower_better",
                            levels=("a", "b", "c", "d", "e"))
        ds = Dataset(values=np.array([[2.0], [1.0], [5.0], [3.0]]),
                     groups=("g1", "g1", "g2", "g2"), meta=(meta,))
        out = orient(ds)
        assert out.values[:, 0].tolist() == [4.0, 5.0, 1.0, 3.0]
        assert out.meta[0].levels == ("e", "d", "c", "b", "a")

    def test_higher_better_unchanged(self, rng):
        from conftest import make_numeric_dataset
        ds = make_numeric_dataset(rng, (4, 4), p=3)
        out = orient(ds)
        assert np.array_equal(out.values, ds.values)

    def test_involution(self, rng):
        values = np.column_stack([
            rng.standard_normal(8),
            rng.integers(1, 6, size=8).astype(float),
        ])
        meta = (VariableMeta("num", direction="lower_better"),
                VariableMeta("ord", kind="ordinal", direction="lower_better",
                             levels=("1", "2", "3", "4", "5")))
        ds = Dataset(values=values, groups=("a",) * 4 + ("b",) * 4, meta=meta)
        once = orient(ds)
        reflipped = Dataset(
            values=once.values,
            groups=once.groups,
            meta=tuple(
                VariableMeta(m.name, m.kind, "lower_better", m.domain,
                             m.levels) for m in once.meta))
        twice = orient(reflipped)
        assert np.array_equal(twice.values, ds.values)


class TestPartition:
    def test_identity_partition(self, rng):
        from conftest import make_numeric_dataset
        ds = make_numeric_dataset(rng, (3, 3), p=2)
        views = partition_views(ds)
        assert len(views) == 1
        assert views[0].values.shape == (6, 2)

    def test_strata_times_domains(self, rng):
        values = rng.standard_normal((12, 3))
        meta = (VariableMeta("x", domain="A"), VariableMeta("y", domain="A"),
                VariableMeta("z", domain="B"))
        ds = Dataset(values=values, groups=("a", "b") * 6, meta=meta,
                     stratum=("s0",) * 6 + ("s1",) * 6)
        views = partition_views(ds)
        assert len(views) == 4  # 2 strata x 2 domains
        widths = sorted(v.p for v in views if v.stratum_label == "s0")
        assert widths == [1, 2]

    def test_domain_views_partition_columns(self, rng):
        values = rng.standard_normal((8, 3))
        meta = (VariableMeta("x", domain="A"), VariableMeta("y"),
                VariableMeta("z", domain="A"))
        ds = Dataset(values=values, groups=("a", "b") * 4, meta=meta)
        views = partition_views(ds)
        cols = sorted(c for v in views for c in v.cols.tolist())
        assert cols == [0, 1, 2]
        rebuilt = np.column_stack(
            [v.values for v in views])[:, np.argsort(
                [c for v in views for c in v.cols.tolist()])]
        assert np.array_equal(rebuilt, ds.values)

    def test_stratum_missing_group(self, rng):
        values = rng.standard_normal((8, 1))
        ds = Dataset(values=values, groups=("a",) * 4 + ("b",) * 4,
                     meta=(VariableMeta("y"),),
                     stratum=("s0",) * 4 + ("s1",) * 4)
        with pytest.raises(DataError, match="stratum"):
            partition_views(ds)

    def test_views_reference_parent(self, rng):
        from conftest import make_numeric_dataset
        ds = make_numeric_dataset(rng, (3, 3), p=2)
        view = partition_views(ds)[0]
        assert view.dataset is ds


class TestVariableMeta:
    def test_ordinal_needs_levels(self):
        with pytest.raises(ConfigError):
            VariableMeta("y", kind="ordinal")

    def test_single_level_rejected(self):
        with pytest.raises(ConfigError):
            VariableMeta("y", kind="ordinal", levels=("only",))

    def test_levels_on_numeric_rejected(self):
        with pytest.raises(ConfigError):
            VariableMeta("y", levels=("a", "b"))
