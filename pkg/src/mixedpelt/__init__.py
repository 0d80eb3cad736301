"""Changepoint detection with mixed-effects segment models inside PELT."""

__version__ = "0.1.0"

from .panel import (GroupSpec, PanelError, Segmentation, TimeSeriesPanel, demean, load_csv,
                    load_groups, prewhiten_ar, slice_panel, write_csv, write_groups)
from .pelt import (CostModel, CostEvaluationError, DetectionError, DetectionResult, FunctionCost,
                   PenaltySpec, default_min_seg, default_penalty, exhaustive_detect, pelt_detect)
from .lmec import (BlockCovParams, LmecCost, SampleCov, assemble_cov, estimate_hb, estimate_ub,
                   lmec_cost, logdet_quadform, sample_cov)
from .glmer import (ConvergenceError, GlmerCost, GlmerFit, bootstrap_fixed_effect_ci, fit_glmer,
                    glmer_cost)
from .sim import (BenchmarkConfig, BernoulliScenario, LmecScenario, gen_bernoulli, gen_lmec, mae,
                  run_benchmark)
