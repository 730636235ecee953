import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from classgen.core import Example
from classgen.data import (AttributeRule, CsvSchema, GeneratorSpec, box_muller, load_csv,
                           sample_arrays, sample_iid, save_csv)
from classgen.errors import InvalidArgumentError, LoadError
from classgen.learners import LearnerSpec, fit_arrays

SEPARATED = GeneratorSpec("gaussian-mixture", ((-5.0, -5.0), (5.0, 5.0)))


class TestGeneratorSpec:
    @pytest.mark.parametrize("kwargs", [
        dict(priors=(0.5, 0.6)),
        dict(label_noise=(1.0, 0.0)),
        dict(scale=0.0),
        dict(means=((0.0,), (0.0, 1.0))),
        dict(kind="spiral"),
    ])
    def test_invalid_specs(self, kwargs):
        base = dict(kind="gaussian-mixture", means=((0.0, 0.0), (1.0, 1.0)))
        base.update(kwargs)
        with pytest.raises(InvalidArgumentError):
            GeneratorSpec(**base)

    def test_priors_tolerance(self):
        GeneratorSpec("xor", ((1.0, 1.0), (1.0, -1.0)), priors=(0.3, 0.7 + 5e-13))

    def test_xor_is_binary(self):
        with pytest.raises(InvalidArgumentError):
            GeneratorSpec("xor", ((1.0,), (2.0,), (3.0,)))


class TestSampleIid:
    def test_empty(self):
        assert sample_iid(SEPARATED, 0, 1) == []

    def test_negative_count(self):
        with pytest.raises(InvalidArgumentError):
            sample_iid(SEPARATED, -1, 1)

    def test_deterministic(self):
        assert sample_iid(SEPARATED, 20, 7) == sample_iid(SEPARATED, 20, 7)
        assert sample_iid(SEPARATED, 20, 7) != sample_iid(SEPARATED, 20, 8)

    def test_one_nn_separates_well_separated_gaussians(self):
        x, _, y, _ = sample_arrays(SEPARATED, 100, 1)
        model = fit_arrays(LearnerSpec.knn(1), x, y, 0, 2)
        xt, _, yt, _ = sample_arrays(SEPARATED, 10_000, 2)
        assert np.mean(model.predict(xt) == yt) >= 0.99

    def test_class_noise_rate(self):
        spec = GeneratorSpec("gaussian-mixture", ((0.0,), (1.0,)), label_noise=(0.05, 0.0))
        _, clean, observed, _ = sample_arrays(spec, 100_000, 3)
        rate = np.mean(observed[clean == 0] != 0)
        assert 0.04 <= rate <= 0.06
        assert np.all(observed[clean == 1] == 1)

    def test_noise_moves_to_other_classes_uniformly(self):
        spec = GeneratorSpec("gaussian-mixture", ((0.0,), (1.0,), (2.0,)), label_noise=(0.5, 0.0, 0.0))
        _, clean, observed, _ = sample_arrays(spec, 60_000, 4)
        flipped = observed[(clean == 0) & (observed != 0)]
        share = np.mean(flipped == 1)
        assert 0.47 < share < 0.53

    def test_priors_respected(self):
        spec = GeneratorSpec("gaussian-mixture", ((0.0,), (1.0,)), priors=(0.2, 0.8))
        _, y, _, _ = sample_arrays(spec, 50_000, 5)
        assert abs(np.mean(y == 0) - 0.2) < 0.01

    def test_concentric_radius(self):
        spec = GeneratorSpec("concentric", ((1.0, 0.0), (0.0, 4.0)), scale=0.01)
        x, y, _, _ = sample_arrays(spec, 2000, 6)
        r = np.linalg.norm(x, axis=1)
        assert abs(r[y == 0].mean() - 1.0) < 0.01 and abs(r[y == 1].mean() - 4.0) < 0.01

    def test_attribute_rule(self):
        spec = GeneratorSpec("gaussian-mixture", ((-1.0, 0.0), (1.0, 0.0)), attribute_rule=AttributeRule(0, 0.0))
        for ex in sample_iid(spec, 50, 3):
            assert ex.attribute == int(ex.features[0] > 0)

    def test_exchangeable_label_counts(self):
        # label counts of the first and second halves of one call follow the same law
        spec = GeneratorSpec("gaussian-mixture", ((0.0,), (1.0,)), priors=(0.3, 0.7))
        firsts, seconds = [], []
        for seed in range(400):
            _, _, y, _ = sample_arrays(spec, 40, seed)
            firsts.append(np.sum(y[:20] == 0))
            seconds.append(np.sum(y[20:] == 0))
        assert abs(np.mean(firsts) - np.mean(seconds)) < 0.5
        assert abs(np.mean(firsts) - 6.0) < 0.5

    def test_box_muller_moments(self, rng):
        z = box_muller(rng, (200_000,))
        assert abs(z.mean()) < 0.01 and abs(z.std() - 1.0) < 0.01


class TestCsv:
    def test_three_rows_two_features(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("a,b,label\n1,2,0\n3,4,1\n5,6,0\n")
        loaded = load_csv(path, CsvSchema(("a", "b"), "label"))
        assert len(loaded.examples) == 3
        assert all(ex.dimension == 2 for ex in loaded.examples)

    def test_empty_data_section(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("x0,label\n# nothing here\n")
        loaded = load_csv(path)
        assert loaded.examples == [] and loaded.num_classes == 0

    def test_string_labels_first_appearance(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("x,label\n0.1,cat\n0.2,dog\n0.3,cat\n")
        loaded = load_csv(path)
        assert [ex.label for ex in loaded.examples] == [0, 1, 0]
        assert loaded.label_map == {"cat": 0, "dog": 1}

    def test_comment_lines_skipped(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("# header comment\nx,label\n1,a\n# mid\n2,b\n")
        assert len(load_csv(path).examples) == 2

    def test_unknown_column(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("x,label\n1,0\n")
        with pytest.raises(LoadError, match="unknown column"):
            load_csv(path, CsvSchema(("z",), "label"))

    def test_non_numeric_feature_reports_line(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("x,label\n1,0\nabc,1\n")
        with pytest.raises(LoadError, match="line 3") as info:
            load_csv(path)
        assert info.value.line == 3

    def test_ragged_row(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("x,label\n1,0,9\n")
        with pytest.raises(LoadError, match="line 2"):
            load_csv(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(LoadError):
            load_csv(tmp_path / "nope.csv")

    def test_attribute_column(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("x,label,attribute\n1,0,1\n2,1,0\n")
        assert [ex.attribute for ex in load_csv(path).examples] == [1, 0]

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.tuples(st.floats(-1e6, 1e6, allow_nan=False), st.floats(-1e6, 1e6, allow_nan=False),
                              st.integers(0, 4)), min_size=1, max_size=20))
    def test_round_trip(self, tmp_path_factory, rows):
        path = tmp_path_factory.mktemp("rt") / "d.csv"
        examples = [Example((a, b), y) for a, b, y in rows]
        assert save_csv(path, examples) == len(examples)
        loaded = load_csv(path)
        assert loaded.examples == examples

    def test_round_trip_generated(self, tmp_path):
        spec = GeneratorSpec("gaussian-mixture", ((-1.0, 0.0), (1.0, 0.0)), attribute_rule=AttributeRule(1))
        examples = sample_iid(spec, 30, 11)
        save_csv(tmp_path / "g.csv", examples)
        assert load_csv(tmp_path / "g.csv").examples == examples
