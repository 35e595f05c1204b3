"""Scenario construction, closed-loop and offline drivers."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from ..algorithms import (
    AgentState,
    LoadPopulation,
    PJADMMParams,
    lyapunov_from_arrays,
    prop1_slack,
    require_smooth,
    step_size_bound,
    strong_convexity_xi,
)
from ..comm import CommGraph, average_all
from ..disutility import AsymmetricQuadratic, Box, KinkedQuadratic, Quadratic
from ..errors import ConfigError, FreqAdmmError, InvariantViolationError
from ..estimator import ResidualEstimator
from ..grid import GridState, grid_step, measure_frequency, scheduled_generation
from ..oracle import OracleSolution, ProblemInstance, solve
from .config import ScenarioConfig
from .trace import Trace

log = logging.getLogger(__name__)

LYAPUNOV_SLACK = 1e-9
PROP1_SLACK = 1e-9


class SimulationError(FreqAdmmError):
    """A closed-loop run failed; ``trace`` holds the steps completed so far."""

    def __init__(self, message, trace: Trace, cause: BaseException | None = None):
        super().__init__(message)
        self.trace = trace
        self.cause = cause


@dataclass
class ScenarioInstance:
    functions: tuple
    boxes: tuple
    agents: list

    @property
    def n(self) -> int:
        return len(self.functions)

    def problem(self, C: float) -> ProblemInstance:
        return ProblemInstance(self.functions, self.boxes, C)

    def population(self, workers: int = 1) -> LoadPopulation:
        return LoadPopulation(self.functions, self.boxes, workers=workers)


def _streams(seed: int):
    ss = np.random.SeedSequence(seed)
    return [np.random.Generator(np.random.Philox(s)) for s in ss.spawn(3)]


def build_instance(cfg: ScenarioConfig) -> ScenarioInstance:
    """Draw bounds and disutilities for ``cfg.n`` loads, deterministically from ``cfg.seed``.

    ``b_i`` are uniform draws rescaled to sum to ``cfg.sum_b_mw``; ``1/q`` is
    uniform on ``[inv_q_low, inv_q_high]``; kinks sit at ``eta_frac * b_i``.
    """
    rng = _streams(cfg.seed)[0]
    n, rule = cfg.n, cfg.disutility
    u = rng.uniform(0.0, 1.0, size=n)
    inv_q = rng.uniform(rule.inv_q_low, rule.inv_q_high, size=n)
    inv_q2 = rng.uniform(rule.inv_q_low, rule.inv_q_high, size=n)
    variant = rng.integers(0, 3, size=n)
    b = cfg.sum_b_mw * (u / u.sum())
    a = np.full(n, cfg.a_mw)
    if np.any(b < a):
        raise ConfigError("drawn upper bounds fall below the lower bound")

    kinds = {"quadratic": 0, "kinked": 1, "asymmetric": 2}
    functions = []
    for i in range(n):
        kind = variant[i] if rule.model == "mixed" else kinds[rule.model]
        if kind == 0:
            functions.append(Quadratic(q=1.0 / inv_q[i]))
        elif kind == 1:
            functions.append(KinkedQuadratic(q=1.0 / inv_q[i], eta=rule.eta_frac * b[i],
                                             raw=rule.raw_kink))
        else:
            functions.append(AsymmetricQuadratic(q_minus=1.0 / inv_q[i], q_plus=1.0 / inv_q2[i]))
    boxes = tuple(Box(float(a[i]), float(b[i])) for i in range(n))

    lo, hi = a.sum(), b.sum()
    demands = [cfg.schedule.g0 - g for _, g in cfg.schedule.breakpoints] + [cfg.offline_c_mw]
    for C in demands:
        if not lo - 1e-9 <= C <= hi + 1e-9:
            raise ConfigError(f"balance constant {C} MW outside load capacity [{lo}, {hi}]")
    agents = [AgentState(id=i, x=0.0, y=cfg.algorithm.y0, box=boxes[i], f=functions[i])
              for i in range(n)]
    return ScenarioInstance(tuple(functions), boxes, agents)


def _pj_params(cfg: ScenarioConfig) -> PJADMMParams:
    al = cfg.algorithm
    tau = al.tau if al.tau is not None else al.rho * max(cfg.n - 1, 1)
    gamma = al.gamma if al.gamma is not None else 0.5
    return PJADMMParams(rho=al.rho, tau=tau, gamma=gamma)


def _dual_gamma(cfg: ScenarioConfig) -> float:
    return cfg.algorithm.gamma if cfg.algorithm.gamma is not None else cfg.algorithm.rho


def _xi_or_zero(inst: ScenarioInstance) -> float:
    try:
        return strong_convexity_xi(inst.problem(0.0))
    except ValueError:  # raw kinked form: no modulus
        return 0.0


class _Oracles:
    """Oracle solutions cached per balance constant."""

    def __init__(self, inst: ScenarioInstance):
        self.inst = inst
        self._cache: dict[float, OracleSolution] = {}

    def __call__(self, C: float) -> OracleSolution | None:
        if C not in self._cache:
            try:
                self._cache[C] = solve(self.inst.problem(C), tol=1e-9)
            except FreqAdmmError as exc:
                log.warning("no oracle for C=%g (%s); Lyapunov column left NaN", C, exc)
                self._cache[C] = None
        return self._cache[C]


def run_closed_loop(cfg: ScenarioConfig, workers: int | None = None,
                    record_x: bool = False) -> Trace:
    """Simulate grid, estimators and load agents together.

    Per step ``k``: the grid advances with ``sum(x[k])`` and ``g[k]``; every
    load reads the new frequency and recovers ``r[k]``; optional neighbour
    averaging; then all loads update at once (Jacobi) to ``x[k+1]``.

    Raises
    ------
    UnsupportedDisutilityError
        Dual ascent with a non-quadratic disutility, before any step runs.
    SimulationError
        Any failure mid-run; carries the partial trace.
    """
    inst = build_instance(cfg)
    algo = cfg.algorithm.name
    if algo == "dual":
        require_smooth(inst.functions)
    workers = cfg.workers if workers is None else workers
    pop = inst.population(workers=workers)
    gp, sched = cfg.grid, cfg.schedule
    n, K, rho = inst.n, cfg.steps, cfg.algorithm.rho
    _, rng_zeta, rng_delta = _streams(cfg.seed)
    graph = CommGraph(n=n, n0=cfg.n0, mode=cfg.comm_mode)
    estimator = ResidualEstimator(n, gp, smoothing=cfg.smoothing)
    oracle = _Oracles(inst)
    xi = _xi_or_zero(inst)
    pj = _pj_params(cfg) if algo == "pjadmm" else None
    gamma = _dual_gamma(cfg)

    cols = {name: np.zeros(K + 1) for name in ("t_s", "omega_hz", "g_mw", "sum_x_mw",
                                               "r_mw", "p_obj", "v_lyap")}
    r_hat_err = np.zeros((K, n))
    r_used_err = np.zeros((K, n))
    x_hist = np.zeros((K + 1, n)) if record_x else None

    x = np.zeros(n)
    y = np.full(n, cfg.algorithm.y0)
    state = GridState()

    def noise_delta():
        return gp.sigma_delta * rng_delta.standard_normal(n) if cfg.noise else np.zeros(n)

    def record(k):
        t = k * gp.T
        g = scheduled_generation(sched, t)
        C = sched.g0 - g
        sx = float(x.sum())
        r = sx - C
        sol = oracle(C)
        cols["t_s"][k] = t
        cols["omega_hz"][k] = gp.omega0 + state.delta_omega
        cols["g_mw"][k] = g
        cols["sum_x_mw"][k] = sx
        cols["r_mw"][k] = r
        cols["p_obj"][k] = pop.objective(x)
        cols["v_lyap"][k] = (np.nan if sol is None else
                             lyapunov_from_arrays(x, float(y.mean()) + rho * r, sol, rho, xi))
        if x_hist is not None:
            x_hist[k] = x
        return g, r

    def partial(k_done):
        tr = Trace(k=np.arange(k_done), **{c: v[:k_done] for c, v in cols.items()},
                   r_hat_error=r_hat_err[:max(k_done - 1, 0)],
                   r_used_error=r_used_err[:max(k_done - 1, 0)],
                   x=None if x_hist is None else x_hist[:k_done], label=algo)
        tr.meta.update(algorithm=algo, n=n, seed=cfg.seed, noise=cfg.noise, xi=xi, rho=rho)
        return tr

    k = recorded = 0
    try:
        estimator.step(measure_frequency(state, noise_delta(), gp))
        for k in range(K + 1):
            g, r = record(k)
            recorded = k + 1
            if k == K:
                break
            zeta = gp.sigma_zeta * rng_zeta.standard_normal() if cfg.noise else 0.0
            state = grid_step(state, gp, float(x.sum()), g, sched.g0, zeta)
            r_hat = estimator.step(measure_frequency(state, noise_delta(), gp))
            r_used = average_all(graph, r_hat)
            r_hat_err[k] = r_hat - r
            r_used_err[k] = r_used - r
            if algo == "dmadmm":
                x, y = pop.dm_admm(x, average_all(graph, y), r_used, rho)
            elif algo == "pjadmm":
                y_used = average_all(graph, y)
                if k > 0:
                    # deferred dual half of the previous iteration, now that r[k] is known
                    y_used = y_used + pj.gamma * pj.rho * r_used
                y = y_used
                x = pop.pj_admm_primal(x, y, r_used, pj)
            elif algo == "dual":
                x, y = pop.dual_ascent(y, r_used, gamma)
    except Exception as exc:
        raise SimulationError(f"closed-loop run failed at step {k}: {exc}", partial(recorded), exc) from exc
    return partial(K + 1)


# -- offline convergence driver --------------------------------------------------

@dataclass
class ConvergenceReport:
    algorithm: str
    n: int
    C: float
    rho: float
    xi: float
    rho_max: float
    rho_ok: bool
    converged: bool
    iterations: int
    final_residual: float
    final_x_error: float
    final_p_error: float
    rate_slope: float
    rate_r2: float
    min_lyapunov_margin: float
    min_prop1_slack: float
    max_dual_spread: float
    invariants: dict
    oracle: OracleSolution
    residuals: np.ndarray = field(repr=False)
    x_errors: np.ndarray = field(repr=False)
    p_errors: np.ndarray = field(repr=False)
    lyapunov: np.ndarray = field(repr=False)

    @property
    def passed(self) -> bool:
        return all(v is not False for v in self.invariants.values())

    def summary(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "n": self.n,
            "C_mw": self.C,
            "rho": self.rho,
            "xi": self.xi,
            "rho_max": self.rho_max,
            "rho_within_bound": self.rho_ok,
            "converged": self.converged,
            "iterations": self.iterations,
            "final_residual_mw": self.final_residual,
            "final_x_error_mw": self.final_x_error,
            "final_p_error": self.final_p_error,
            "rate_slope_log10_per_iter": self.rate_slope,
            "rate_r2": self.rate_r2,
            "min_lyapunov_margin": self.min_lyapunov_margin,
            "min_prop1_slack": self.min_prop1_slack,
            "max_dual_spread": self.max_dual_spread,
            "invariants": self.invariants,
            "oracle": {"y_star": self.oracle.y_star, "p_star": self.oracle.p_star},
        }


def empirical_rate(errors, floor: float = 1e-12, tail: float = 0.5) -> tuple[float, float]:
    """Slope and R^2 of ``log10(error)`` against iteration over the tail.

    Only errors above ``floor`` count; the tail is the last ``tail``
    fraction of those. Returns ``(nan, nan)`` with fewer than 5 points.
    """
    e = np.asarray(errors, dtype=float)
    ks = np.flatnonzero(e > floor)
    ks = ks[int(len(ks) * (1.0 - tail)):]
    if len(ks) < 5:
        return float("nan"), float("nan")
    fit = stats.linregress(ks, np.log10(e[ks]))
    return float(fit.slope), float(fit.rvalue**2)


def run_offline(cfg: ScenarioConfig, tol: float = 1e-6, x_tol: float = 1e-5,
                p_tol: float = 1e-6, max_iter: int = 100_000, C: float | None = None,
                strict: bool = True, instance: ScenarioInstance | None = None) -> ConvergenceReport:
    """Iterate the chosen algorithm with the exact residual and check the certificates.

    For DM-ADMM every step checks: common dual across agents, the objective
    bound (``min_prop1_slack >= -1e-9``) and, when ``rho`` is within the
    step-size bound, ``V[k] - V[k+1] >= rho r[k]^2 - 1e-9``. The run stops
    once ``|r| <= tol``, ``||x - x*|| <= x_tol`` and ``|p - p*| <= p_tol``
    hold together.

    Raises
    ------
    InvariantViolationError
        With ``strict`` and a guaranteed certificate failing.
    """
    inst = instance if instance is not None else build_instance(cfg)
    C = cfg.offline_c_mw if C is None else C
    problem = inst.problem(C)
    sol = solve(problem, tol=1e-9)
    xi = strong_convexity_xi(problem)
    n, algo, rho = inst.n, cfg.algorithm.name, cfg.algorithm.rho
    rho_max = step_size_bound(xi, n)
    rho_ok = rho <= rho_max
    pop = inst.population(workers=cfg.workers)
    if algo == "dual":
        require_smooth(inst.functions)
    pj = _pj_params(cfg) if algo == "pjadmm" else None
    gamma = _dual_gamma(cfg)
    certify = algo == "dmadmm"

    x = np.zeros(n)
    y = np.full(n, cfg.algorithm.y0)
    r = float(x.sum()) - C
    residuals, x_errors, p_errors, lyap = [], [], [], []
    min_margin = min_slack = np.inf
    max_spread = 0.0
    converged = False
    V_prev = None
    k = 0
    for k in range(max_iter + 1):
        dx = x - sol.x_star
        x_err = float(np.sqrt(dx @ dx))
        p_err = abs(pop.objective(x) - sol.p_star)
        residuals.append(r)
        x_errors.append(x_err)
        p_errors.append(p_err)
        if not np.isfinite(r):
            break
        if abs(r) <= tol and x_err <= x_tol and p_err <= p_tol:
            converged = True
            break
        if k == max_iter:
            break
        r_vec = np.full(n, r)
        if algo == "dmadmm":
            x_new, y_new = pop.dm_admm(x, y, r_vec, rho)
        elif algo == "pjadmm":
            y_new = y + pj.gamma * pj.rho * r_vec if k > 0 else y
            x_new = pop.pj_admm_primal(x, y_new, r_vec, pj)
        elif algo == "dual":
            x_new, y_new = pop.dual_ascent(y, r_vec, gamma)
        else:
            raise ConfigError("offline driver needs an algorithm other than 'none'")
        r_new = float(x_new.sum()) - C
        if certify:
            spread = float(y_new.max() - y_new.min())
            max_spread = max(max_spread, spread)
            y_common = float(y_new[0])
            V = lyapunov_from_arrays(x, y_common, sol, rho, xi)
            lyap.append(V)
            if V_prev is not None:
                min_margin = min(min_margin, V_prev - V - rho * residuals[-2] ** 2)
            V_prev = V
            slack = prop1_slack(pop.pop, x, x_new, y_common + rho * r_new, r, r_new, rho, sol)
            min_slack = min(min_slack, slack)
            if strict and spread != 0.0:
                raise InvariantViolationError(f"dual consensus lost at iteration {k}: spread {spread}")
            if strict and slack < -PROP1_SLACK:
                raise InvariantViolationError(f"objective bound violated at iteration {k}: slack {slack}")
            if strict and rho_ok and min_margin < -LYAPUNOV_SLACK:
                raise InvariantViolationError(
                    f"Lyapunov decrease violated at iteration {k}: margin {min_margin}")
        x, y, r = x_new, y_new, r_new

    slope, r2 = empirical_rate(x_errors)
    # convergence is only guaranteed inside the step-size bound
    invariants = {"converged": converged if (rho_ok or converged) else None}
    if certify:
        invariants["dual_consensus"] = max_spread == 0.0
        invariants["prop1_bound"] = bool(min_slack >= -PROP1_SLACK)
        invariants["lyapunov_decrease"] = bool(min_margin >= -LYAPUNOV_SLACK) if rho_ok else None
    if not rho_ok:
        log.warning("rho=%g exceeds the step-size bound %g; decrease not guaranteed", rho, rho_max)
    return ConvergenceReport(
        algorithm=algo, n=n, C=C, rho=rho, xi=xi, rho_max=rho_max, rho_ok=rho_ok,
        converged=converged, iterations=k, final_residual=residuals[-1],
        final_x_error=x_errors[-1], final_p_error=p_errors[-1], rate_slope=slope, rate_r2=r2,
        min_lyapunov_margin=float(min_margin), min_prop1_slack=float(min_slack),
        max_dual_spread=max_spread, invariants=invariants, oracle=sol,
        residuals=np.array(residuals), x_errors=np.array(x_errors),
        p_errors=np.array(p_errors), lyapunov=np.array(lyap),
    )
