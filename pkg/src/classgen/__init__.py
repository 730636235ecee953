"""Class-wise generalization errors and their information-theoretic bounds."""

from .bounds import (ClassBoundReport, DrawTrials, PairCMI, SubtaskReport, SubtaskSpec,
                     attribute_report, class_delta_l_cmi_bound, class_e_cmi_bound,
                     class_f_cmi_bound, class_gen_error, recall_specificity,
                     sampled_class_cmi_bound, standard_gen_bound, subtask_report)
from .core import (ClassStats, Example, Mask, SuperSample, TrialRecord, attribute_stats,
                   class_stats, draw_mask, split)
from .data import AttributeRule, CsvSchema, GeneratorSpec, load_csv, sample_iid, save_csv
from .errors import (ClassGenError, EmptyClassError, InfiniteDivergenceError,
                     InsufficientSamplesError, InvalidArgumentError, LoadError, UnsupportedError)
from .exact import (ExactInstance, class_cmi_bound, kl_attribute_bound, kl_class_bound,
                    random_instance)
from .harness import ExperimentConfig, derive, load_config, run_exact, run_experiment
from .info import JointCounts, JointPmf, entropy, exact_mi, kl_divergence, plugin_mi, quantize
from .learners import LearnerSpec, LossSpec, eval_loss, train

__version__ = "0.1.0"
