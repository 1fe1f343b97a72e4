"""Truncated correlation-function hierarchy on a torus grid."""
from .dual import (check_dissipativity, dissipativity_identity, dual_norm, flow_dual_norms,
                   operator_norms, predual_block, random_test_vectors, weighted_norm)
from .engines import (Engine, ReducedEngine, TensorEngine, apply_A, apply_B, apply_C, apply_D,
                      apply_L, make_engine)
from .solve import (ABSemigroup, BlowUpError, DivergenceError, HorizonWarning, PicardResult,
                    Trajectory, integrate, picard_solve)
from .state import ClosureRule, CorrelationVector, OrderError, norm_theta, theta_zero

__all__ = [
    "CorrelationVector", "ClosureRule", "OrderError", "norm_theta", "theta_zero",
    "Engine", "ReducedEngine", "TensorEngine", "make_engine",
    "apply_A", "apply_B", "apply_C", "apply_D", "apply_L",
    "integrate", "picard_solve", "ABSemigroup", "Trajectory", "PicardResult",
    "BlowUpError", "DivergenceError", "HorizonWarning",
    "check_dissipativity", "dissipativity_identity", "random_test_vectors", "predual_block",
    "dual_norm", "flow_dual_norms", "operator_norms", "weighted_norm",
]
