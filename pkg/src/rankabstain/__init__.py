"""Score-based ranking with abstention.

Loss functions, norm-constrained scorers, exact finite-support risks,
consistency-bound transforms with numerical verification, negative-result
constructions, and a projected-SGD trainer with a scikit-learn style wrapper.
"""

from .losses import (EXPONENTIAL, HINGE, PHI_KINDS, SIGMOID, AbstentionConfig,
                     PhiSpec, SaturationError, ScoredPair, abstention_loss,
                     bipartite_abstention_loss, bipartite_misranking_loss,
                     bipartite_surrogate_loss, misranking_loss, phi_eval,
                     phi_grad, sign, surrogate_loss)
from .models import (LINEAR, RELU_NN, ConstraintSpec, LinearModel, Model,
                     ReluNetModel, is_feasible, margin_range, null_model,
                     project, random_model, score, scores)
from .distribution import (BipartiteDistribution, GeneralDistribution,
                           load_bipartite, load_general, sample_bipartite,
                           sample_general)
from .risk import (BIPARTITE, GENERAL, GRID, PGD, TARGET, BestInClassResult,
                   RiskReport, best_in_class_risk, calibration_gap,
                   conditional_risk_bipartite, conditional_risk_general,
                   expected_risk, mean_min_conditional_risk,
                   min_conditional_risk_closed, min_conditional_risk_oracle,
                   minimizability_gap, risk_report)
from .bounds import (APPENDIX_VARIANT, THEOREM_VARIANT, BoundReport,
                     DegenerateBoundError, NegativeRow, gamma_transform,
                     generic_gamma_transfer, negative_construct,
                     negative_report, psi_exp, verify_theorem_bound)
from .trainer import TrainConfig, TrainingDiverged, train
from .estimator import PairwiseRankingSGD

__version__ = "1.0.0"
