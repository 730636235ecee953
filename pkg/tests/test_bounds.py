import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from classgen.bounds import (ClassBoundReport, SubtaskSpec, aggregate_reports, attribute_report, class_delta_l_cmi_bound,
                             class_e_cmi_bound, class_f_cmi_bound, class_gen_error, class_reports, draw_report,
                             recall_specificity, sampled_class_cmi_bound, standard_gen_bound, subtask_report)
from classgen.core import Example, SuperSample
from classgen.errors import EmptyClassError, InsufficientSamplesError, InvalidArgumentError, UnsupportedError
from classgen.learners import LearnerSpec, LossSpec
from conftest import all_masks, make_supersample, run_draw

ROOT = math.sqrt(2.0 * math.log(2.0))  # sqrt(2 ln 2)
CONSTANTS = LearnerSpec.finite_erm(((0, 0), (1, 1)))


def _hand_draw():
    # pair 0: input 0 with labels (0, 1); pair 1: input 1 with labels (1, 1).
    # ERM over the two constant hypotheses picks "always 1" iff U_0 = +1.
    ss = SuperSample(((Example((0.0,), 0), Example((0.0,), 1)), (Example((1.0,), 1), Example((1.0,), 1))), 2, 1)
    return run_draw(ss, CONSTANTS, all_masks(2), exhaustive=True)


def _report(reports=None, **kw):
    base = dict(y=0, n_y_half=1.0, gen_estimate=0.0, mc_stderr=0.0, bound_f_cmi=0.0, bound_e_cmi=0.0,
                bound_delta_l_cmi=0.0)
    base.update(kw)
    return ClassBoundReport(**base)


class TestHandInstance:
    def test_class_zero(self):
        r = draw_report(_hand_draw(), 0)
        assert r.n_y_half == 0.5
        assert r.gen_estimate == pytest.approx(1.0, abs=1e-15)
        assert r.mc_stderr == 0.0
        for value in (r.bound_class_cmi, r.bound_f_cmi, r.bound_e_cmi, r.bound_delta_l_cmi):
            assert value == pytest.approx(2 * ROOT, abs=1e-12)

    def test_class_one(self):
        r = draw_report(_hand_draw(), 1)
        assert r.n_y_half == 1.5
        assert r.gen_estimate == pytest.approx(1 / 3, abs=1e-15)
        for value in (r.bound_class_cmi, r.bound_f_cmi, r.bound_e_cmi, r.bound_delta_l_cmi):
            assert value == pytest.approx(2 * ROOT / 3, abs=1e-12)

    def test_pair_without_class_is_filtered(self):
        r = draw_report(_hand_draw(), 0)
        second = r.per_pair_cmi[1]
        assert second.indicator_max == 0
        assert (second.mi_f, second.mi_e, second.mi_delta, second.mi_w) == (0.0, 0.0, 0.0, 0.0)

    def test_recall_and_specificity(self):
        out = recall_specificity([_hand_draw()], positive_class=1)
        assert out.recall_gap == pytest.approx(1 / 3, abs=1e-15)
        assert out.specificity_gap == pytest.approx(1.0, abs=1e-15)
        assert out.max_identity_residual <= 1e-12

    def test_multi_draw_wrappers(self):
        draws = [_hand_draw()]
        assert class_gen_error(draws, 0).estimate == pytest.approx(1.0)
        assert class_f_cmi_bound(draws, 0) == pytest.approx(2 * ROOT)
        assert class_e_cmi_bound(draws, 0) == pytest.approx(2 * ROOT)
        assert class_delta_l_cmi_bound(draws, 0) == pytest.approx(2 * ROOT)
        assert sampled_class_cmi_bound(draws, 0) == pytest.approx(2 * ROOT)


class TestIndependence:
    def test_constant_learner_gives_zero(self):
        ss = make_supersample([0, 1, 1, 0, 0, 0, 1, 1])
        draw = run_draw(ss, LearnerSpec.constant(1), all_masks(4), exhaustive=True)
        for y in (0, 1):
            r = draw_report(draw, y)
            assert r.gen_estimate == 0.0
            assert (r.bound_f_cmi, r.bound_e_cmi, r.bound_delta_l_cmi, r.bound_class_cmi) == (0.0, 0.0, 0.0, 0.0)

    def test_absent_class_returns_none(self):
        ss = make_supersample([0, 1, 1, 0], num_classes=3)
        assert draw_report(run_draw(ss, LearnerSpec.knn(), all_masks(2)), 2) is None


class TestErrors:
    def test_single_mask(self):
        draw = run_draw(make_supersample([0, 1]), LearnerSpec.knn(), [(1,)])
        with pytest.raises(InsufficientSamplesError):
            draw_report(draw, 0)

    def test_absent_everywhere(self):
        draw = run_draw(make_supersample([0, 1], num_classes=3), LearnerSpec.knn(), all_masks(1))
        with pytest.raises(EmptyClassError):
            class_gen_error([draw], 2)
        with pytest.raises(EmptyClassError):
            class_f_cmi_bound([draw], 2)

    def test_no_draws(self):
        with pytest.raises(InvalidArgumentError):
            class_gen_error([], 0)

    def test_class_cmi_needs_finite_learner(self):
        draw = run_draw(make_supersample([0, 1, 1, 0]), LearnerSpec.knn(), all_masks(2))
        assert draw_report(draw, 0).bound_class_cmi is None
        with pytest.raises(UnsupportedError):
            sampled_class_cmi_bound([draw], 0)

    def test_recall_needs_binary_zero_one(self):
        three = run_draw(make_supersample([0, 1, 2, 0], num_classes=3), LearnerSpec.knn(), all_masks(2))
        with pytest.raises(UnsupportedError):
            recall_specificity([three])
        ce = run_draw(make_supersample([0, 1, 1, 0]), LearnerSpec.logistic(steps=1, loss=LossSpec("clipped_ce")),
                      all_masks(2))
        with pytest.raises(UnsupportedError):
            recall_specificity([ce])

    def test_attribute_needs_attributes(self):
        draw = run_draw(make_supersample([0, 1]), LearnerSpec.knn(), all_masks(1))
        with pytest.raises(EmptyClassError):
            attribute_report([draw], 0)


class TestMultiDraw:
    def test_skipped_draws_are_counted(self):
        with_two = run_draw(make_supersample([0, 2, 1, 0], num_classes=3), LearnerSpec.knn(), all_masks(2))
        without = run_draw(make_supersample([0, 1, 1, 0], num_classes=3), LearnerSpec.knn(), all_masks(2))
        est = class_gen_error([with_two, without], 2)
        assert (est.draws_used, est.draws_skipped) == (1, 1)

    def test_single_draw_stderr_falls_back_to_masks(self, rng):
        labels = rng.integers(0, 2, size=12).tolist()
        masks = [tuple(rng.choice([-1, 1], size=6)) for _ in range(20)]
        draw = run_draw(make_supersample(labels, features=rng.normal(size=(12, 1))), LearnerSpec.knn(), masks)
        y = labels[0]
        assert class_gen_error([draw], y).stderr == draw_report(draw, y).mc_stderr
        assert draw_report(draw, y).mc_stderr > 0

    def test_across_draw_stderr(self):
        draws = [_hand_draw(), _hand_draw()]
        est = class_gen_error(draws, 0)
        assert est.stderr == 0.0 and est.draws_used == 2

    def test_aggregate_means(self):
        agg = aggregate_reports([_report(gen_estimate=0.2, bound_f_cmi=1.0), _report(gen_estimate=0.4, bound_f_cmi=3.0)])
        assert agg.gen_estimate == pytest.approx(0.3)
        assert agg.bound_f_cmi == pytest.approx(2.0)
        assert agg.mc_stderr == pytest.approx(0.1)
        assert agg.bound_class_cmi is None


class TestAggregation:
    def test_weighted_sum(self):
        reports = [_report(y=0, gen_estimate=0.2), _report(y=1, gen_estimate=0.4)]
        assert standard_gen_bound(reports, {0: 0.5, 1: 0.5}, "gen") == pytest.approx(0.3, abs=1e-15)

    def test_empirical_weights(self):
        reports = [_report(y=0, n_y_half=1.0, bound_delta_l_cmi=1.0), _report(y=1, n_y_half=3.0, bound_delta_l_cmi=2.0)]
        assert standard_gen_bound(reports) == pytest.approx(0.25 + 1.5, abs=1e-15)

    def test_missing_bound_gives_none(self):
        assert standard_gen_bound([_report()], which="class_cmi") is None

    @pytest.mark.parametrize("weights, which", [({0: 0.4}, "gen"), ({0: 1.0, 1: 0.0}, "gen"), ({0: 1.0}, "bogus")])
    def test_invalid(self, weights, which):
        with pytest.raises(InvalidArgumentError):
            standard_gen_bound([_report()], weights, which)

    def test_subtask_of_one_class_is_that_class(self):
        draws = [_hand_draw()]
        sub = subtask_report(draws, SubtaskSpec((1,), (1.0,)))
        r = class_reports(draws, values=[1])[0]
        assert sub.gen_estimate == r.gen_estimate
        assert sub.bound_delta_l_cmi == r.bound_delta_l_cmi
        assert sub.bound_class_cmi == r.bound_class_cmi

    def test_subtask_missing_class(self):
        with pytest.raises(EmptyClassError):
            subtask_report([_hand_draw()], SubtaskSpec((0, 5), (0.5, 0.5)))

    def test_subtask_spec_validation(self):
        with pytest.raises(InvalidArgumentError):
            SubtaskSpec((0, 0), (0.5, 0.5))
        with pytest.raises(InvalidArgumentError):
            SubtaskSpec((0, 1), (0.7, 0.7))
        assert SubtaskSpec.proportional((0, 2), {0: 0.1, 1: 0.5, 2: 0.3}).weights == pytest.approx((0.25, 0.75))


supersamples = st.integers(1, 5).flatmap(lambda n: st.tuples(
    st.lists(st.integers(0, 2), min_size=2 * n, max_size=2 * n),
    st.lists(st.integers(-3, 3), min_size=2 * n, max_size=2 * n),
    st.lists(st.lists(st.sampled_from((-1, 1)), min_size=n, max_size=n).map(tuple), min_size=2, max_size=12)))


class TestProperties:
    @settings(max_examples=60, deadline=None)
    @given(supersamples)
    def test_plugin_ordering_is_exact(self, data):
        labels, xs, masks = data
        # inputs are ids 0..6 for a table of 23 ternary hypotheses
        table = tuple(tuple((h // 3 ** i) % 3 for i in range(7)) for h in range(0, 3 ** 7, 97))
        ss = make_supersample(labels, num_classes=3, features=[(x + 3,) for x in xs])
        draw = run_draw(ss, LearnerSpec.finite_erm(table), masks)
        for y in set(labels):
            r = draw_report(draw, y)
            assert r.bound_delta_l_cmi <= r.bound_e_cmi + 1e-12
            assert r.bound_e_cmi <= r.bound_f_cmi + 1e-12
            assert r.bound_f_cmi <= r.bound_class_cmi + 1e-12

    @settings(max_examples=60, deadline=None)
    @given(supersamples)
    def test_swapping_halves_with_negated_masks(self, data):
        labels, xs, masks = data
        feats = [(float(x),) for x in xs]
        ss = make_supersample(labels, num_classes=3, features=feats)
        swapped_labels = [labels[j ^ 1] for j in range(len(labels))]
        swapped = make_supersample(swapped_labels, num_classes=3, features=[feats[j ^ 1] for j in range(len(feats))])
        a = run_draw(ss, LearnerSpec.knn(1), masks)
        b = run_draw(swapped, LearnerSpec.knn(1), [tuple(-u for u in m) for m in masks])
        for y in set(labels):
            ra, rb = draw_report(a, y), draw_report(b, y)
            assert ra.gen_estimate == pytest.approx(rb.gen_estimate, abs=1e-12)
            assert ra.bound_e_cmi == pytest.approx(rb.bound_e_cmi, abs=1e-12)
            assert ra.bound_delta_l_cmi == pytest.approx(rb.bound_delta_l_cmi, abs=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(supersamples)
    def test_class_gaps_sum_to_standard_gap(self, data):
        labels, xs, masks = data
        ss = make_supersample(labels, num_classes=3, features=[(float(x),) for x in xs])
        draw = run_draw(ss, LearnerSpec.knn(1), masks)
        reports = [draw_report(draw, y) for y in sorted(set(labels))]
        s = draw.stacked
        plus = s["mask"] == 1
        test = np.where(plus, s["loss_minus"], s["loss_plus"]).mean(axis=1)
        train = np.where(plus, s["loss_plus"], s["loss_minus"]).mean(axis=1)
        assert standard_gen_bound(reports, which="gen") == pytest.approx(float(np.mean(test - train)), abs=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(supersamples)
    def test_attribute_equal_to_label_matches_class(self, data):
        labels, xs, masks = data
        ss = make_supersample(labels, num_classes=3, features=[(float(x),) for x in xs], attributes=labels)
        draw = run_draw(ss, LearnerSpec.knn(1), masks)
        for y in set(labels):
            by_class = class_reports([draw], values=[y])[0]
            by_attr = attribute_report([draw], y)
            assert by_attr.gen_estimate == by_class.gen_estimate
            assert by_attr.bound_delta_l_cmi == by_class.bound_delta_l_cmi
