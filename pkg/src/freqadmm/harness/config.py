"""Scenario configuration and its JSON file format.

Keys carry their unit as a suffix (``_mw``, ``_s``, ``_hz``...). Every key is
optional; missing keys take the defaults below.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from ..errors import ConfigError
from ..grid import GenerationSchedule, GridParams

ALGORITHMS = ("dmadmm", "pjadmm", "dual", "none")
MODELS = ("quadratic", "kinked", "asymmetric", "mixed")


@dataclass(frozen=True)
class DisutilityRule:
    model: str = "quadratic"
    inv_q_low: float = 1.0
    inv_q_high: float = 3.0
    eta_frac: float = 0.1
    raw_kink: bool = False

    def __post_init__(self):
        if self.model not in MODELS:
            raise ConfigError(f"unknown disutility model {self.model!r}; choose from {MODELS}")
        if not 0 < self.inv_q_low <= self.inv_q_high:
            raise ConfigError("need 0 < inv_q_low <= inv_q_high")
        if self.eta_frac < 0:
            raise ConfigError("eta_frac must be non-negative")


@dataclass(frozen=True)
class AlgorithmConfig:
    name: str = "dmadmm"
    rho: float = 2.5e-3
    y0: float = 0.0
    tau: float | None = None     # PJ-ADMM; default rho*(n-1)
    gamma: float | None = None   # PJ-ADMM default 0.5; dual ascent default rho

    def __post_init__(self):
        if self.name not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.name!r}; choose from {ALGORITHMS}")
        if not self.rho > 0:
            raise ConfigError("rho must be positive")


@dataclass(frozen=True)
class ScenarioConfig:
    n: int = 100
    seed: int = 0
    a_mw: float = 0.0
    sum_b_mw: float = 60.0
    disutility: DisutilityRule = field(default_factory=DisutilityRule)
    algorithm: AlgorithmConfig = field(default_factory=AlgorithmConfig)
    grid: GridParams = field(default_factory=GridParams)
    schedule: GenerationSchedule = field(default_factory=GenerationSchedule)
    noise: bool = False
    comm_mode: str = "none"
    n0: int = 2
    smoothing: float = 0.0
    horizon_s: float = 100.0
    offline_c_mw: float = 6.0
    workers: int = 1
    out_dir: str = "out"

    def __post_init__(self):
        if self.n < 1:
            raise ConfigError("need at least one load")
        if self.comm_mode not in ("none", "grid1d"):
            raise ConfigError(f"unknown comm mode {self.comm_mode!r}")
        if self.n0 < 0:
            raise ConfigError("n0 must be non-negative")
        if not self.horizon_s > 0:
            raise ConfigError("horizon must be positive")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")

    @property
    def steps(self) -> int:
        return int(round(self.horizon_s / self.grid.T))

    def with_algorithm(self, name: str, **kw) -> "ScenarioConfig":
        return replace(self, algorithm=replace(self.algorithm, name=name, **kw))

    # -- serialization ----------------------------------------------------------

    def to_dict(self) -> dict:
        g, s, d, al = self.grid, self.schedule, self.disutility, self.algorithm
        return {
            "n_loads": self.n,
            "seed": self.seed,
            "bounds": {"a_mw": self.a_mw, "sum_b_mw": self.sum_b_mw},
            "disutility": {
                "model": d.model,
                "inv_q_range": [d.inv_q_low, d.inv_q_high],
                "eta_frac_of_b": d.eta_frac,
                "raw_kink": d.raw_kink,
            },
            "algorithm": {
                "name": al.name,
                "rho": al.rho,
                "y0": al.y0,
                "tau": al.tau,
                "gamma": al.gamma,
            },
            "grid": {
                "T_s": g.T,
                "M_mw_s2": g.M,
                "D_mw_s": g.D,
                "R_droop": g.R,
                "Tg_s": g.T_g,
                "omega0_hz": g.omega0,
                "sigma_zeta_mw": g.sigma_zeta,
                "sigma_delta_hz": g.sigma_delta,
                "discretization": g.discretization,
            },
            "schedule": {
                "g0_mw": s.g0,
                "breakpoints_s_mw": [list(bp) for bp in s.breakpoints],
            },
            "noise": self.noise,
            "comm": {"mode": self.comm_mode, "n0": self.n0},
            "estimator": {"smoothing": self.smoothing},
            "horizon_s": self.horizon_s,
            "offline_c_mw": self.offline_c_mw,
            "workers": self.workers,
            "out_dir": self.out_dir,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "ScenarioConfig":
        base = cls()
        try:
            bounds = raw.get("bounds", {})
            dis = raw.get("disutility", {})
            alg = raw.get("algorithm", {})
            grd = raw.get("grid", {})
            sch = raw.get("schedule", {})
            comm = raw.get("comm", {})
            est = raw.get("estimator", {})
            q_lo, q_hi = dis.get("inv_q_range", [base.disutility.inv_q_low, base.disutility.inv_q_high])
            g0 = base.grid
            return cls(
                n=int(raw.get("n_loads", base.n)),
                seed=int(raw.get("seed", base.seed)),
                a_mw=float(bounds.get("a_mw", base.a_mw)),
                sum_b_mw=float(bounds.get("sum_b_mw", base.sum_b_mw)),
                disutility=DisutilityRule(
                    model=dis.get("model", base.disutility.model),
                    inv_q_low=float(q_lo),
                    inv_q_high=float(q_hi),
                    eta_frac=float(dis.get("eta_frac_of_b", base.disutility.eta_frac)),
                    raw_kink=bool(dis.get("raw_kink", base.disutility.raw_kink)),
                ),
                algorithm=AlgorithmConfig(
                    name=alg.get("name", base.algorithm.name),
                    rho=float(alg.get("rho", base.algorithm.rho)),
                    y0=float(alg.get("y0", base.algorithm.y0)),
                    tau=None if alg.get("tau") is None else float(alg["tau"]),
                    gamma=None if alg.get("gamma") is None else float(alg["gamma"]),
                ),
                grid=GridParams(
                    T=float(grd.get("T_s", g0.T)),
                    M=float(grd.get("M_mw_s2", g0.M)),
                    D=float(grd.get("D_mw_s", g0.D)),
                    R=float(grd.get("R_droop", g0.R)),
                    T_g=float(grd.get("Tg_s", g0.T_g)),
                    omega0=float(grd.get("omega0_hz", g0.omega0)),
                    sigma_zeta=float(grd.get("sigma_zeta_mw", g0.sigma_zeta)),
                    sigma_delta=float(grd.get("sigma_delta_hz", g0.sigma_delta)),
                    discretization=grd.get("discretization", g0.discretization),
                ),
                schedule=GenerationSchedule(
                    breakpoints=tuple(tuple(bp) for bp in sch.get(
                        "breakpoints_s_mw", base.schedule.breakpoints)),
                    g0=float(sch.get("g0_mw", base.schedule.g0)),
                ),
                noise=bool(raw.get("noise", base.noise)),
                comm_mode=comm.get("mode", base.comm_mode),
                n0=int(comm.get("n0", base.n0)),
                smoothing=float(est.get("smoothing", base.smoothing)),
                horizon_s=float(raw.get("horizon_s", base.horizon_s)),
                offline_c_mw=float(raw.get("offline_c_mw", base.offline_c_mw)),
                workers=int(raw.get("workers", base.workers)),
                out_dir=str(raw.get("out_dir", base.out_dir)),
            )
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"bad scenario config: {exc}") from exc


def load_config(path) -> ScenarioConfig:
    with open(path) as fh:
        return ScenarioConfig.from_dict(json.load(fh))


def save_config(cfg: ScenarioConfig, path) -> None:
    Path(path).write_text(json.dumps(cfg.to_dict(), indent=2) + "\n")
