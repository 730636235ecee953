import itertools

import numpy as np
import pytest

from classgen.bounds import DrawTrials
from classgen.core import Example, SuperSample, TrialRecord
from classgen.learners import fit_arrays


def make_supersample(labels, num_classes=2, features=None, attributes=None):
    """Super-sample whose i-th pair is (labels[2i], labels[2i+1])."""
    examples = []
    for j, y in enumerate(labels):
        x = (float(j),) if features is None else tuple(features[j])
        t = None if attributes is None else attributes[j]
        examples.append(Example(x, y, t))
    num_attr = None if attributes is None else max(attributes) + 1
    return SuperSample.from_examples(examples, num_classes, num_attr)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def run_draw(supersample, spec, masks, *, seed=0, exhaustive=False, draw_id=0):
    """Train ``spec`` once per mask and collect the trials as one draw."""
    a = supersample.arrays
    trials = []
    for j, entries in enumerate(masks):
        mask = np.asarray(entries)
        plus = mask == 1
        x_train = np.where(plus[:, None], a["x_plus"], a["x_minus"])
        y_train = np.where(plus, a["y_plus"], a["y_minus"])
        model = fit_arrays(spec, x_train, y_train, seed + j, supersample.num_classes)
        trials.append(TrialRecord(
            draw_id, j, mask, model.predict(a["x_minus"]), model.predict(a["x_plus"]),
            model.loss(a["x_minus"], a["y_minus"]), model.loss(a["x_plus"], a["y_plus"]),
            a["y_minus"], a["y_plus"], a.get("t_minus"), a.get("t_plus"),
            model.hypothesis_index if spec.is_finite else None))
    return DrawTrials(supersample, trials, supersample_id=draw_id, exhaustive=exhaustive,
                      discrete_loss=spec.loss.is_discrete)


def all_masks(n):
    return [tuple(m) for m in itertools.product((-1, 1), repeat=n)]
