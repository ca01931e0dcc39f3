"""Assemble plant, reference and controller from an :class:`ExperimentConfig` and run it."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .config import ExperimentConfig
from .controller import (
    AdaptiveController, FirstOrderSMC, IdealSTC, NoControl, SlidingSpec, SuperTwistingGains,
    build_adaptive_controller, make_sets,
)
from .plant import PLANT_PRESETS, NoiseSpec, PlantModel, ReferenceSignal, custom_plant
from .sim import Metrics, SimConfig, Trajectory, run_closed_loop


def build_plant(cfg: ExperimentConfig) -> PlantModel:
    p = cfg.plant
    if p.preset == "custom":
        return custom_plant(p.order, p.f, p.delta_f, p.disturbance)
    return PLANT_PRESETS[p.preset]()


def build_reference(cfg: ExperimentConfig) -> ReferenceSignal:
    r = cfg.reference
    return ReferenceSignal(r.amplitude, tuple(r.coefs), tuple(r.freqs))


def build_spec(cfg: ExperimentConfig, plant: PlantModel) -> SlidingSpec:
    return SlidingSpec(plant.n, cfg.controller.lam)


def _sets(mf):
    return make_sets(mf.means, mf.sigma)


def build_controller(cfg: ExperimentConfig, plant: PlantModel, kind: Optional[str] = None):
    """Fresh controller of ``kind`` (default ``cfg.controller.kind``).

    The baselines know the nominal dynamics only; uncertainty and
    disturbance are left to their switching terms.
    """
    c = cfg.controller
    kind = c.kind if kind is None else kind
    spec = build_spec(cfg, plant)
    if kind == "none":
        return NoControl()
    if kind == "ideal_stc":
        gains = SuperTwistingGains(c.lambda1, c.lambda2, c.eta, plant.bounds.total_uncertainty)
        return IdealSTC(spec, gains, plant.f_nominal)
    if kind == "first_order_smc":
        return FirstOrderSMC(spec, c.k_switch, plant.f_nominal)
    if kind == "adaptive_t2_stc":
        return build_adaptive_controller(
            spec, c.gamma_f, c.gamma_1, c.gamma_2,
            state_sets=[_sets(cfg.mf.x)] * plant.n,
            surface_sets=_sets(cfg.mf.s1),
            surface2_sets=_sets(cfg.mf.s2),
            radii=c.radii,
        )
    raise ValueError(f"unknown controller kind {kind!r}")


def sim_config(cfg: ExperimentConfig, kind: Optional[str] = None) -> SimConfig:
    s = cfg.sim
    return SimConfig(
        t_end=s.t_end, h=s.h, x0=tuple(s.x0),
        controller_kind=cfg.controller.kind if kind is None else kind,
        seed=cfg.noise.seed,
        noise=NoiseSpec(cfg.noise.snr_db, cfg.noise.seed),
        decimate=s.decimate,
    )


@dataclass
class RunResult:
    kind: str
    trajectory: Trajectory
    metrics: Optional[Metrics]
    controller: object


def run_experiment(cfg: ExperimentConfig, kind: Optional[str] = None,
                   k_switch: Optional[float] = None) -> RunResult:
    plant = build_plant(cfg)
    if k_switch is not None:
        cfg = cfg.replace(**{"controller.k_switch": float(k_switch)})
    ctrl = build_controller(cfg, plant, kind)
    sc = sim_config(cfg, kind)
    traj, metrics = run_closed_loop(
        sc, plant, ctrl, build_reference(cfg), build_spec(cfg, plant),
        metrics_window=tuple(cfg.sim.window), band=cfg.sim.band,
    )
    return RunResult(sc.controller_kind, traj, metrics, ctrl)


def tune_switching_gain(cfg: ExperimentConfig, target_rmse: float, rel_tol: float = 0.2,
                        k_grid=None, max_bisect: int = 30) -> tuple[float, RunResult]:
    """Switching gain whose e1 RMSE lies within ``rel_tol`` of ``target_rmse``.

    The gain is scanned upward over a geometric grid; the first grid point
    inside the band wins.  If the RMSE jumps across the band between two
    grid points, the gap is bisected in ``log k``.  Raises ``RuntimeError``
    when neither finds a match.
    """
    if k_grid is None:
        k_grid = 0.05 * 2.0 ** (np.arange(0, 28) / 2.0)
    lo, hi = (1 - rel_tol) * target_rmse, (1 + rel_tol) * target_rmse

    def rmse(k):
        res = run_experiment(cfg, "first_order_smc", float(k))
        return res.metrics.rmse_e1, res

    tried = []
    prev = None
    for k in k_grid:
        r, res = rmse(k)
        tried.append((float(k), r))
        if lo <= r <= hi:
            return float(k), res
        if prev is not None and (prev[1] - target_rmse) * (r - target_rmse) < 0:
            a, b = prev[0], float(k)
            ra = prev[1]
            for _ in range(max_bisect):
                m = math.sqrt(a * b)
                rm, res = rmse(m)
                tried.append((m, rm))
                if lo <= rm <= hi:
                    return m, res
                if (ra - target_rmse) * (rm - target_rmse) < 0:
                    b = m
                else:
                    a, ra = m, rm
        prev = (float(k), r)
    raise RuntimeError(
        f"no switching gain reaches e1 RMSE in [{lo:.3g}, {hi:.3g}]; tried {tried}")


@dataclass(frozen=True)
class CompareRow:
    kind: str
    rmse_e1: float
    rmse_e2: float
    tv_u: float
    settle_time: float
    note: str = ""


def compare(cfg: ExperimentConfig, tune: bool = True) -> tuple[list[CompareRow], dict[str, RunResult]]:
    """Adaptive controller against ideal super-twisting and first-order SMC.

    With ``tune`` the first-order gain is matched to the adaptive RMSE; if no
    gain matches, the configured ``controller.k_switch`` is used and noted.
    """
    runs = {"adaptive_t2_stc": run_experiment(cfg, "adaptive_t2_stc"),
            "ideal_stc": run_experiment(cfg, "ideal_stc")}
    note = f"k_switch={cfg.controller.k_switch:g}"
    smc = None
    if tune:
        try:
            k, smc = tune_switching_gain(cfg, runs["adaptive_t2_stc"].metrics.rmse_e1)
            note = f"k_switch={k:g} (RMSE-matched)"
        except RuntimeError:
            note += " (no RMSE match)"
    runs["first_order_smc"] = smc if smc is not None else run_experiment(cfg, "first_order_smc")
    rows = []
    for kind, res in runs.items():
        m = res.metrics
        rows.append(CompareRow(kind, m.rmse_e1, m.rmse_e2, m.tv_u, m.settle_time,
                               note if kind == "first_order_smc" else ""))
    return rows, runs


def format_table(rows) -> str:
    head = f"{'controller':<18}{'rmse_e1':>12}{'rmse_e2':>12}{'tv_u':>14}{'settle_s':>10}  note"
    lines = [head]
    for r in rows:
        settle = f"{r.settle_time:.3f}" if math.isfinite(r.settle_time) else "unsettled"
        lines.append(f"{r.kind:<18}{r.rmse_e1:>12.4g}{r.rmse_e2:>12.4g}{r.tv_u:>14.6g}{settle:>10}  {r.note}")
    return "\n".join(lines) + "\n"
