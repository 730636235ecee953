import json
import textwrap
from dataclasses import replace

import numpy as np
import pytest

from classgen.bounds import DrawTrials
from classgen.data import AttributeRule, GeneratorSpec, sample_iid, save_csv
from classgen.errors import InsufficientSamplesError, InvalidArgumentError, LoadError
from classgen.harness import (CsvSource, ExperimentConfig, _splitmix, derive, load_config, parse_config,
                              run_exact, run_experiment)
from classgen.learners import LearnerSpec
from classgen.report import validate_summary
from conftest import make_supersample

MIXTURE = GeneratorSpec("gaussian-mixture", ((-1.0, -1.0), (1.0, 1.0)))


def _config(**kw):
    base = dict(data=MIXTURE, learner=LearnerSpec.knn(1), n_grid=(4, 8), m1=2, m2=6, master_seed=3)
    base.update(kw)
    return ExperimentConfig(**base)


class TestDerive:
    def test_splitmix_reference_output(self):
        # first output of the reference SplitMix64 generator seeded with 0
        assert _splitmix(0) == 0xE220A8397B1DCDAF

    def test_definition(self):
        assert derive(5) == _splitmix(_splitmix(5) ^ 0)
        assert derive(5, 9) == _splitmix(_splitmix(_splitmix(5) ^ 1) ^ 9)

    def test_length_matters(self):
        assert derive(1, 0) != derive(1, 0, 0)
        assert derive(1) != derive(1, 0)

    def test_negative_rejected(self):
        with pytest.raises(InvalidArgumentError):
            derive(-1)
        with pytest.raises(InvalidArgumentError):
            derive(0, -2)

    def test_no_collisions_over_a_million_seeds(self):
        seeds = {derive(7, n, draw) for n in range(1000) for draw in range(1000)}
        assert len(seeds) == 1_000_000

    def test_range(self):
        assert all(0 <= derive(2**64 - 1, i) < 2**64 for i in range(100))


class TestConfig:
    def test_validation(self):
        for kw in (dict(n_grid=()), dict(m1=0), dict(m2=1), dict(bins=1), dict(mi_correction="bayes"),
                   dict(mask_mode="sobol"), dict(workers=0), dict(subtask_weights=(1.0,)),
                   dict(subtask_classes=(0,), subtask_weights=(0.5,))):
            with pytest.raises(InvalidArgumentError):
                _config(**kw)

    def test_exhaustive_allows_m2_below_two(self):
        _config(m2=1, mask_mode="exhaustive")

    def test_fingerprint_ignores_workers(self):
        assert _config().fingerprint() == _config(workers=4).fingerprint()
        assert _config().fingerprint() != _config(master_seed=4).fingerprint()

    def test_parse(self, tmp_path):
        text = json.dumps({"data": {"generator": {"kind": "xor", "means": [[1, 1], [1, -1]]}},
                           "learner": {"kind": "logistic", "steps": 5, "loss": "clipped_ce", "cap": 4},
                           "n_grid": [2], "m1": 1, "m2": 3, "subtask": {"classes": [0]}})
        config = parse_config(text)
        assert config.learner.loss.cap == 4.0 and config.subtask_classes == (0,)
        assert config.subtask_weights is None

    def test_unknown_key_reports_line(self):
        text = textwrap.dedent("""\
            {
              "data": {"generator": {"kind": "xor", "means": [[1, 1], [1, -1]]}},
              "learner": {"kind": "knn"},
              "n_grid": [2], "m1": 1, "m2": 3,
              "bogus": 1
            }
            """)
        with pytest.raises(LoadError, match=r"line 5: unknown key 'bogus'"):
            parse_config(text)

    def test_bad_value_reports_line(self):
        text = '{\n"data": {"generator": {"kind": "xor", "means": [[1, 1], [1, -1]]}},\n' \
               '"learner": {"kind": "knn"},\n"n_grid": [2], "m1": 1,\n"m2": 1\n}'
        with pytest.raises(LoadError) as info:
            parse_config(text)
        assert info.value.line == 5

    def test_invalid_json(self):
        with pytest.raises(LoadError) as info:
            parse_config('{\n  "data": ,\n}')
        assert info.value.line == 2

    def test_semantic_error(self):
        text = json.dumps({"data": {"generator": {"kind": "xor", "means": [[1, 1], [1, -1]]}},
                           "learner": {"kind": "knn", "k": 0}, "n_grid": [2], "m1": 1, "m2": 3})
        with pytest.raises(LoadError):
            parse_config(text)

    def test_relative_paths(self, tmp_path):
        (tmp_path / "h.txt").write_text("0:0 1:0\n0:1 1:1\n")
        save_csv(tmp_path / "d.csv", sample_iid(MIXTURE, 10, 0))
        (tmp_path / "c.json").write_text(json.dumps({
            "data": {"csv": {"path": "d.csv"}}, "learner": {"kind": "finite_erm", "hypotheses_file": "h.txt"},
            "n_grid": [1], "m1": 1, "m2": 2}))
        config = load_config(tmp_path / "c.json")
        assert config.learner.hypotheses == ((0, 0), (1, 1))
        assert config.data.path == str(tmp_path / "d.csv")

    def test_missing_file(self, tmp_path):
        with pytest.raises(LoadError) as info:
            load_config(tmp_path / "none.json")
        assert isinstance(info.value.__cause__, OSError)


class TestEngine:
    def test_deterministic(self):
        assert run_experiment(_config()).to_json() == run_experiment(_config()).to_json()

    def test_workers_do_not_change_output(self):
        assert run_experiment(_config()).to_json() == run_experiment(_config(workers=3)).to_json()

    def test_seed_changes_output(self):
        assert run_experiment(_config()).to_json() != run_experiment(_config(master_seed=4)).to_json()

    def test_summary_validates(self):
        config = _config(subtask_classes=(1,), attributes=True,
                         data=replace(MIXTURE, attribute_rule=AttributeRule(0)))
        validate_summary(json.loads(run_experiment(config).to_json()))

    def test_structure(self):
        result = run_experiment(_config(), keep_trials=True)
        assert [r.n for r in result.per_n] == [4, 8]
        for nres in result.per_n:
            assert len(nres.draws) == 2
            assert all(d.num_masks == 6 for d in nres.draws)
        assert set(result.draw_trials) == {(4, 0), (4, 1), (8, 0), (8, 1)}
        assert isinstance(result.draw_trials[(4, 0)], DrawTrials)

    def test_seeds_follow_derivation(self):
        result = run_experiment(_config())
        assert result.per_n[1].draws[1].seed == derive(3, 8, 1)

    def test_minimal_constant_run(self):
        config = _config(learner=LearnerSpec.constant(0), n_grid=(1,), m1=1, m2=2)
        nres = run_experiment(config).per_n[0]
        for r in nres.class_summary:
            assert r.gen_estimate == 0.0 and r.bound_delta_l_cmi == 0.0

    def test_distinct_masks(self):
        result = run_experiment(_config(n_grid=(3,), m1=1, m2=8, mask_mode="distinct"), keep_trials=True)
        masks = {tuple(tr.mask) for tr in result.draw_trials[(3, 0)].trials}
        assert len(masks) == 8
        with pytest.raises(InvalidArgumentError):
            run_experiment(_config(n_grid=(3,), m2=9, mask_mode="distinct"))

    def test_exhaustive_masks(self):
        result = run_experiment(_config(n_grid=(3,), m1=1, mask_mode="exhaustive"), keep_trials=True)
        draw = result.draw_trials[(3, 0)]
        assert draw.m == 8 and draw.exhaustive
        assert all(r.mc_stderr == 0.0 for r in result.per_n[0].class_summary)

    def test_nested_supersamples_are_prefixes(self):
        result = run_experiment(_config(nested=True, m1=1), keep_trials=True)
        small = result.draw_trials[(4, 0)].supersample.pairs
        large = result.draw_trials[(8, 0)].supersample.pairs
        assert large[:4] == small

    def test_csv_source(self, tmp_path):
        save_csv(tmp_path / "d.csv", sample_iid(MIXTURE, 40, 1))
        result = run_experiment(_config(data=CsvSource(str(tmp_path / "d.csv"))))
        assert result.num_classes == 2
        with pytest.raises(InsufficientSamplesError):
            run_experiment(_config(data=CsvSource(str(tmp_path / "d.csv")), n_grid=(30,)))

    def test_fixed_supersample(self):
        ss = make_supersample([0, 1, 1, 0, 0, 1])
        result = run_experiment(_config(data=ss, n_grid=(2, 3)), keep_trials=True)
        assert result.draw_trials[(2, 1)].supersample.pairs == ss.pairs[:2]
        with pytest.raises(InsufficientSamplesError):
            run_experiment(_config(data=ss, n_grid=(4,)))

    def test_absent_class_noted(self):
        three = GeneratorSpec("gaussian-mixture", ((0.0,), (1.0,), (2.0,)), priors=(0.5, 0.5, 0.0))
        nres = run_experiment(_config(data=three, n_grid=(2,), m1=2)).per_n[0]
        assert any("class 2 absent" in note for note in nres.notes)
        assert all(2 in d.skipped_classes for d in nres.draws)

    def test_subtask_default_weights_are_observed_shares(self):
        nres = run_experiment(_config(subtask_classes=(0, 1))).per_n[0]
        total = sum(r.n_y_half for r in nres.class_summary)
        assert nres.subtask.weights == pytest.approx(tuple(r.n_y_half / total for r in nres.class_summary))

    def test_recall_for_binary_zero_one(self):
        nres = run_experiment(_config()).per_n[0]
        assert nres.recall is not None
        assert nres.recall.recall_gap == pytest.approx(nres.class_summary[1].gen_estimate)


class TestRunExact:
    def test_single_draw_with_exact_block(self):
        from classgen.exact import random_instance
        inst = random_instance(1)
        result = run_exact(inst)
        assert result.exact is not None
        assert result.per_n[0].draws[0].num_masks == 2 ** inst.n
        validate_summary(json.loads(result.to_json()))
        assert np.all([r.mc_stderr == 0.0 for r in result.per_n[0].class_summary])
