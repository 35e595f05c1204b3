"""Decentralized multi-block ADMM for demand-side primary frequency control."""
from .algorithms import (
    AgentState,
    DMADMMParams,
    DualAscentParams,
    LoadPopulation,
    PJADMMParams,
    dm_admm_step,
    dual_ascent_step,
    lyapunov_value,
    pj_admm_step,
    pj_dual_update,
    step_size_bound,
    strong_convexity_xi,
)
from .disutility import (
    AsymmetricQuadratic,
    Box,
    KinkedQuadratic,
    Quadratic,
    evaluate,
    prox_step,
    strong_convexity_modulus,
    subgradient_interval,
)
from .oracle import OracleSolution, ProblemInstance, best_response, solve

__version__ = "0.1.0"
