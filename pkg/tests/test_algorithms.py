import math

import numpy as np
import pytest

from freqadmm.algorithms import (
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
from freqadmm.disutility import AsymmetricQuadratic, Box, KinkedQuadratic, Quadratic, subgradient_interval
from freqadmm.errors import AssumptionViolationError, NotStronglyConvexError, UnsupportedDisutilityError
from freqadmm.estimator import ResidualEstimate
from freqadmm.oracle import OracleSolution, ProblemInstance

from oracles import f_ld, grid_trisection_min, LD


def agent(f, x=0.0, y=0.0, box=Box(-100, 100)):
    return AgentState(id=0, x=x, y=y, box=box, f=f)


def test_dm_admm_fixed_point_at_optimum():
    for rho in (1e-4, 2.5e-3, 1.0):
        out = dm_admm_step(agent(Quadratic(1)), 0.0, DMADMMParams(rho))
        assert (out.x, out.y) == (0.0, 0.0)


def test_dm_admm_closed_form_example():
    out = dm_admm_step(agent(Quadratic(1)), 10.0, DMADMMParams(2.5e-3))
    assert out.y == pytest.approx(0.025, abs=1e-15)
    assert out.x == pytest.approx(-0.05 / 1.0025, abs=1e-15)
    assert out.x == pytest.approx(-0.049875, abs=1e-6)


def test_dm_admm_accepts_estimate_objects():
    est = ResidualEstimate(value=10.0, k_ref=3, agent=0)
    a = dm_admm_step(agent(Quadratic(1)), est, DMADMMParams(2.5e-3))
    b = dm_admm_step(agent(Quadratic(1)), 10.0, DMADMMParams(2.5e-3))
    assert (a.x, a.y) == (b.x, b.y)


def test_dm_admm_kinked_step_satisfies_subgradient_inclusion():
    rng = np.random.default_rng(0)
    for _ in range(500):
        f = KinkedQuadratic(rng.uniform(0.3, 1.0), rng.uniform(0.0, 1.0))
        lo = rng.uniform(-2, 0)
        box = Box(lo, lo + rng.uniform(0, 4))
        x0 = float(np.clip(rng.uniform(-2, 2), box.a, box.b))
        rho, r = rng.uniform(1e-3, 2.0), rng.uniform(-5, 5)
        out = dm_admm_step(agent(f, x=x0, y=rng.uniform(-1, 1), box=box), r, DMADMMParams(rho))
        assert box.a <= out.x <= box.b
        g_lo, g_hi = subgradient_interval(f, out.x)
        # 0 in df(x') + y' + rho (x' - x + r) + normal cone of the box
        shift = out.y + rho * (out.x - x0 + r)
        if out.x > box.a:
            assert g_lo + shift <= 1e-8
        if out.x < box.b:
            assert g_hi + shift >= -1e-8


def test_pj_admm_examples():
    out = pj_admm_step(agent(Quadratic(1)), 0.0, PJADMMParams(rho=1, tau=1))
    assert out.x == 0.0
    out = pj_admm_step(agent(Quadratic(1), box=Box(-10, 10)), 1.0, PJADMMParams(rho=1, tau=1))
    assert out.x == pytest.approx(-1 / 3, abs=1e-15)
    assert out.y == 0.0
    assert pj_dual_update(out, 2.0, PJADMMParams(rho=1, tau=1, gamma=0.5)).y == 1.0


def test_pj_admm_against_grid_oracle():
    rng = np.random.default_rng(1)
    for _ in range(200):
        q, q2 = rng.uniform(0.3, 3.0, size=2)
        f = [Quadratic(q), KinkedQuadratic(q, rng.uniform(0, 1)), AsymmetricQuadratic(q, q2)][rng.integers(3)]
        lo = rng.uniform(-2, 0)
        box = Box(lo, lo + rng.uniform(0, 3))
        x0 = float(np.clip(rng.uniform(-2, 2), box.a, box.b))
        y, r = rng.uniform(-2, 2), rng.uniform(-3, 3)
        params = PJADMMParams(rho=rng.uniform(0.1, 3), tau=rng.uniform(0.1, 3))
        out = pj_admm_step(agent(f, x=x0, y=y, box=box), r, params)
        rho, tau = LD(params.rho), LD(params.tau)

        def obj(x):
            d = x - LD(x0) + LD(r)
            return f_ld(f, x) + LD(y) * d + rho / 2 * d * d + tau / 2 * (x - LD(x0)) ** 2

        assert out.x == pytest.approx(grid_trisection_min(obj, box.a, box.b), abs=1e-6)


def test_pj_params_validation_and_defaults():
    p = PJADMMParams.default(2.5e-3, 11)
    assert p.tau == pytest.approx(0.025) and p.gamma == 0.5
    for bad in (dict(rho=0, tau=1), dict(rho=1, tau=0), dict(rho=1, tau=1, gamma=2.0)):
        with pytest.raises(ValueError):
            PJADMMParams(**bad)


def test_dual_ascent_examples():
    out = dual_ascent_step(agent(Quadratic(2), box=Box(-10, 10)), -4.0, DualAscentParams(0.1))
    assert out.y == pytest.approx(-0.4, abs=1e-15)
    assert out.x == pytest.approx(0.2, abs=1e-15)
    fixed = dual_ascent_step(agent(Quadratic(2), x=1.0, y=-2.0), 0.0, DualAscentParams(0.1))
    assert (fixed.x, fixed.y) == (1.0, -2.0)


@pytest.mark.parametrize("f", [KinkedQuadratic(1, 0.1), AsymmetricQuadratic(1, 2)])
def test_dual_ascent_rejects_nonsmooth(f):
    with pytest.raises(UnsupportedDisutilityError):
        dual_ascent_step(agent(f), 1.0, DualAscentParams(0.1))


def test_step_size_bound_examples():
    assert step_size_bound(1.0, 2) == 0.5
    assert step_size_bound(0.5, 11) == pytest.approx(0.025, abs=1e-17)
    assert step_size_bound(1.0, 1) == math.inf


def test_strong_convexity_xi_examples():
    boxes = [Box(-1, 1)] * 3
    assert strong_convexity_xi(ProblemInstance([Quadratic(1)] * 3, boxes, 0.0)) == 0.5
    mixed = [Quadratic(2), Quadratic(0.7), Quadratic(1.3)]
    assert strong_convexity_xi(ProblemInstance(mixed, boxes, 0.0)) == pytest.approx(0.35)
    # asymmetric modulus is min(q-, q+)
    assert strong_convexity_xi(ProblemInstance([AsymmetricQuadratic(2, 0.4)], [Box(-1, 1)], 0.0)) == 0.2


def test_strong_convexity_xi_rejects_zero_modulus(monkeypatch):
    from freqadmm import algorithms

    monkeypatch.setattr(algorithms, "strong_convexity_modulus", lambda f: 0.0)
    with pytest.raises(NotStronglyConvexError):
        strong_convexity_xi(ProblemInstance([Quadratic(1)], [Box(-1, 1)], 0.0))


def test_lyapunov_examples():
    sol = OracleSolution(x_star=np.array([1.0, 2.0]), y_star=-0.5, p_star=0.0)
    at_opt = [AgentState(i, x, -0.5, Box(-10, 10), Quadratic(1)) for i, x in enumerate([1.0, 2.0])]
    assert lyapunov_value(at_opt, sol, rho=0.3, xi=0.5) == 0.0
    one = OracleSolution(x_star=np.array([0.0]), y_star=0.0, p_star=0.0)
    assert lyapunov_value([agent(Quadratic(1), x=1.0)], one, rho=1.0, xi=1.0) == 2.0


def test_lyapunov_requires_common_dual():
    sol = OracleSolution(x_star=np.array([0.0, 0.0]), y_star=0.0, p_star=0.0)
    agents = [AgentState(0, 0.0, 0.0, Box(-1, 1), Quadratic(1)),
              AgentState(1, 0.0, 1e-9, Box(-1, 1), Quadratic(1))]
    with pytest.raises(AssumptionViolationError):
        lyapunov_value(agents, sol, 1.0, 1.0)


def test_lyapunov_non_increasing_along_scalar_trajectory():
    from freqadmm.oracle import solve

    rng = np.random.default_rng(3)
    fs = [Quadratic(1 / rng.uniform(1, 3)), KinkedQuadratic(0.5, 0.2), AsymmetricQuadratic(0.4, 0.9),
          Quadratic(0.6)]
    boxes = [Box(0, 3)] * 4
    p = ProblemInstance(fs, boxes, 4.0)
    sol = solve(p, tol=1e-12)
    xi = strong_convexity_xi(p)
    rho = step_size_bound(xi, 4)
    agents = [AgentState(i, 0.0, 0.0, boxes[i], fs[i]) for i in range(4)]
    r = sum(a.x for a in agents) - p.C
    V_prev = None
    for _ in range(3000):
        nxt = [dm_admm_step(a, r, DMADMMParams(rho)) for a in agents]
        # pair the new dual with the old primal
        V = lyapunov_value([AgentState(a.id, a.x, b.y, a.box, a.f) for a, b in zip(agents, nxt)],
                           sol, rho, xi)
        if V_prev is not None:
            assert V_prev - V >= rho * r_prev**2 - 1e-9
        V_prev, r_prev = V, r
        agents = nxt
        r = sum(a.x for a in agents) - p.C
    assert abs(r) < 1e-6


def test_population_matches_scalar_steps_bitwise():
    rng = np.random.default_rng(5)
    n = 40
    fs = [[Quadratic(1 / rng.uniform(1, 3)), KinkedQuadratic(0.4, 0.1),
           AsymmetricQuadratic(0.3, 0.8)][i % 3] for i in range(n)]
    boxes = [Box(0.0, float(rng.uniform(0.5, 2))) for _ in range(n)]
    x = np.array([rng.uniform(bx.a, bx.b) for bx in boxes])
    y = rng.normal(size=n)
    r = rng.normal(size=n)
    for workers in (1, 3, 8):
        pop = LoadPopulation(fs, boxes, workers=workers)
        xv, yv = pop.dm_admm(x, y, r, 0.01)
        for i in range(n):
            s = dm_admm_step(AgentState(i, float(x[i]), float(y[i]), boxes[i], fs[i]), float(r[i]),
                             DMADMMParams(0.01))
            assert (xv[i], yv[i]) == (s.x, s.y)
