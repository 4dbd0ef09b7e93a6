"""Meta-learning for low-resource longitudinal sequence classification.

Subpackages/modules:
  autodiff   -- expression graph, primitives, gradients (second-order capable)
  kernels    -- compiled/numpy numeric kernel backends
  models     -- CNN/LSTM/MLP/logistic risk predictors and the learner loss
  episodes   -- multi-domain datasets, splits, episode sampling
  training   -- inner fast adaptation, meta-objective, meta-gradient, Adam loop
  evaluation -- meta-testing, target fine-tuning, representation export
  baselines  -- supervised / parameter-transfer / multitask comparison methods
  cohort     -- synthetic multi-domain longitudinal cohort generator
  metrics    -- AUROC, F1, multi-run aggregation
  cli        -- experiment driver (`metapred` console script)
"""

__version__ = "0.1.0"

from .autodiff import Expr, ParamSet, gradient, finite_difference_oracle  # noqa: F401
