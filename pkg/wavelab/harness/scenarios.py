"""
Scenario orchestration: each kind runs a family of checks and writes its
artifacts (tables, field dumps and a machine-readable summary.json) into its
own output directory.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Union

import numpy as np
import pandas as pd

from wavelab.config import config
from wavelab.core.model import AbcdParams, BottomSpec, t_epsilon
from wavelab.core.spectral import FieldPair, GridSpec, h1h1_norm, helmholtz_inv, shift_pair
from wavelab.dynamics import evolve
from wavelab.dynamics.diagnostics import DIAGNOSTIC_COLUMNS
from wavelab.dynamics.tracker import ModulationTrack, ProfileFamily, lyapunov_series, track
from wavelab.errors import ConfigurationError, WavelabError
from wavelab.harness.scaling import SweepReport, fit_scaling
from wavelab.logging_config import get_logger
from wavelab.schemas import ScenarioConfig
from wavelab.storage import field_io
from wavelab.telemetry import trace_operation
from wavelab.waves import linop
from wavelab.waves.approx import (
    ApproxBuilder,
    KernelCache,
    approx_grid,
    integrate_effective_ode,
    residual_R_sharp,
)
from wavelab.waves.solitary import (
    SolitonProfile,
    chen_profile,
    continue_profile,
    momentum_closed_form,
    profile_energy,
    profile_momentum,
    slope_dP_domega,
)

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_CHECKS_FAILED = 3

IDENTITY_RTOL = 1e-4
IDENTITY_FLOOR = 1e-10
IDENTITY_FRACTION = 0.95
LYAPUNOV_FRACTION = 0.9
LINEAR_AMPLITUDE = 1e-9
LINEAR_TIME = 5.0


@dataclass
class ScenarioOutcome:
    """Result of one scenario run."""
    kind: str
    passed: bool
    summary: Dict[str, Any]
    output_dir: Path

    @property
    def exit_code(self) -> int:
        return EXIT_OK if self.passed else EXIT_CHECKS_FAILED


def _check(name: str, value: float, passed: bool, **limits) -> Dict[str, Any]:
    return {"name": name, "value": value, "passed": bool(passed), **limits}


def _member_dir(root: Path, eps: float) -> Path:
    path = root / f"eps_{eps:.4g}"
    path.mkdir(parents=True, exist_ok=True)
    return path


def _map_epsilons(fn: Callable[[ScenarioConfig, float, Path], Dict[str, Any]],
                  cfg: ScenarioConfig, root: Path) -> Dict[float, Dict[str, Any]]:
    """Run one member per epsilon in a worker pool capped by WAVELAB_THREADS."""
    epsilons = cfg.scenario.epsilons
    workers = max(1, min(config.THREADS, len(epsilons)))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = {eps: pool.submit(fn, cfg, eps, _member_dir(root, eps)) for eps in epsilons}
        return {eps: futures[eps].result() for eps in epsilons}


# -- shared builders -----------------------------------------------------------

def solve_profile(
    params: AbcdParams,
    grid: GridSpec,
    alpha: Optional[float] = None,
    omega: Optional[float] = None,
    branch: str = "plus",
) -> SolitonProfile:
    """Chen wave from alpha when a = c = -1, otherwise a continued Newton profile at omega."""
    if params.is_chen and alpha is not None:
        return chen_profile(alpha, branch, grid, params)
    if omega is None:
        raise ConfigurationError("a speed is required unless a = c = -1 and alpha is given")
    return continue_profile(params, omega, grid, branch)


def write_profile(profile: SolitonProfile, stem: Union[str, Path]) -> Dict[str, str]:
    """Binary dumps <stem>_eta.bin, <stem>_u.bin and a text table <stem>.txt with a header."""
    stem = Path(stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    paths = field_io.write_pair(stem.parent, stem.name, profile.pair)
    text = stem.with_suffix(".txt")
    header = {
        **profile.summary(),
        "energy": profile_energy(profile),
        "momentum": profile_momentum(profile),
    }
    with open(text, "w", encoding="utf-8") as fh:
        for key, value in header.items():
            fh.write(f"# {key}\t{value}\n")
    frame = pd.DataFrame({"x": profile.grid.x, "R": profile.R, "Q": profile.Q})
    frame.to_csv(text, sep="\t", index=False, mode="a", float_format=field_io.FLOAT_FORMAT)
    paths["text"] = str(text)
    return paths


def load_seed(path: Union[str, Path]) -> FieldPair:
    """Reload a snapshot from the path of its <stem>_eta.bin dump."""
    path = Path(path)
    if not path.name.endswith("_eta.bin"):
        raise ConfigurationError(f"seed path must name an _eta.bin dump, got {path}")
    return field_io.read_pair(path.parent, path.name[: -len("_eta.bin")])


# -- soliton-validate -----------------------------------------------------------

def _soliton_validate(cfg: ScenarioConfig, out: Path) -> Dict[str, Any]:
    params, grid, sc = cfg.params.to_params(), cfg.grid.to_grid(), cfg.scenario
    profile = solve_profile(params, grid, sc.alpha, sc.omega0, sc.branch)
    op = linop.assemble_L(profile, params)
    report = linop.stability_report(op, count=sc.count)

    residual_limit = 1e-10 if profile.is_analytic else 1e-8
    checks = [
        _check("profile_residual", profile.residual, profile.residual < residual_limit, limit=residual_limit),
        _check("kernel_residual", report.kernel_residual, report.kernel_residual < 1e-8, limit=1e-8),
        _check("negative_count", report.negative_count, report.negative_count == 1, expected=1),
        _check("vk", report.vk, report.vk < 0),
        _check("coercivity_h1", report.c0_h1, report.c0_h1 > 0),
    ]
    if profile.is_analytic:
        exact = momentum_closed_form(profile.omega, profile.branch)
        quad = profile_momentum(profile)
        rel = abs(quad - exact) / abs(exact)
        checks.append(_check("momentum_closed_form", rel, rel < 1e-8, limit=1e-8))
    else:
        slope = slope_dP_domega(params, profile.omega, sc.branch, seed=profile)
        rel = abs(slope - report.vk) / abs(slope)
        checks.append(_check("vk_vs_slope", rel, rel < 1e-3, limit=1e-3))

    artifacts = write_profile(profile, out / "profile")
    field_io.write_table(
        out / "spectrum.tsv",
        [{"index": j, "eigenvalue": v} for j, v in enumerate(report.lowest_eigenvalues)],
    )
    return {"checks": checks, "stability": report.to_dict(), "profile": profile.summary(), "artifacts": artifacts}


# -- linear-validate ----------------------------------------------------------

def _linear_validate(cfg: ScenarioConfig, out: Path) -> Dict[str, Any]:
    params, grid = cfg.params.to_params(), cfg.grid.to_grid()
    flat = BottomSpec(kind="zero")
    bump = LINEAR_AMPLITUDE * np.exp(-grid.x ** 2)
    state = FieldPair(bump, 0.5 * bump, grid)

    dt = min(0.1 * grid.dx, 0.01)
    n_steps = max(1, math.ceil(LINEAR_TIME / dt))
    dt = LINEAR_TIME / n_steps
    numeric = state
    for j in range(n_steps):
        numeric = evolve.step_rk4(numeric, j * dt, dt, params, flat)
    exact = evolve.linear_exact_step(state, LINEAR_TIME, params)
    rel = h1h1_norm(numeric - exact) / h1h1_norm(exact)

    checks = [_check("rk4_vs_exact", rel, rel < 1e-6, limit=1e-6)]
    if params.is_chen:
        sigma_defect = float(np.max(np.abs(evolve.dispersion_sigma(grid, params) - 1.0)))
        checks.append(_check("sigma_unit", sigma_defect, sigma_defect < 1e-14, limit=1e-14))
    field_io.write_pair(out, "linear_final", numeric)
    return {"checks": checks, "steps": n_steps, "dt": dt}


# -- identity-check -----------------------------------------------------------

def _identity_check(cfg: ScenarioConfig, out: Path) -> Dict[str, Any]:
    params, grid, sc = cfg.params.to_params(), cfg.grid.to_grid(), cfg.scenario
    spec = cfg.bottom.to_spec()
    run_cfg = replace(cfg.evolve.to_config(-10.0, 10.0), output_stride=1, diagnostics=True)
    profile = solve_profile(params, grid, None, sc.omega0, sc.branch)
    initial = shift_pair(profile.pair, sc.omega0 * run_cfg.t_start)

    trajectory = evolve.run(initial, run_cfg, params, spec)
    rows = trajectory.rows
    step = trajectory.dt
    matches = {"H_h": [], "P": []}
    for i in range(1, len(rows) - 1):
        for name, analytic in (("H_h", rows[i].dHh_dt_analytic), ("P", rows[i].dP_dt_analytic)):
            numeric = (getattr(rows[i + 1], name) - getattr(rows[i - 1], name)) / (2.0 * step)
            matches[name].append(abs(numeric - analytic) <= IDENTITY_RTOL * abs(analytic) + IDENTITY_FLOOR)

    field_io.write_table(out / "diagnostics.tsv", [r.to_dict() for r in rows], DIAGNOSTIC_COLUMNS)
    checks = [
        _check(f"d{name}_dt_fraction", float(np.mean(ok)), np.mean(ok) >= IDENTITY_FRACTION,
               limit=IDENTITY_FRACTION)
        for name, ok in matches.items()
    ]
    return {"checks": checks, "snapshots": len(rows), "epsilon": spec.epsilon}


# -- approx-sweep -------------------------------------------------------------

def kernel_cache(cfg: ScenarioConfig) -> KernelCache:
    """Omega-lattice kernels on the scenario grid."""
    return KernelCache(cfg.params.to_params(), cfg.grid.to_grid(), cfg.scenario.branch)


def approx_member(cfg: ScenarioConfig, eps: float, out: Path,
                  cache: Optional[KernelCache] = None) -> Dict[str, Any]:
    """W#, both residuals and the effective ODE at one epsilon."""
    params, sc = cfg.params.to_params(), cfg.scenario
    spec = cfg.bottom.to_spec(eps)
    cache = cache or kernel_cache(cfg)
    trajectory = integrate_effective_ode(sc.omega0, spec, cache, T_end=max(t_epsilon(spec), sc.t + 1.0))
    builder = ApproxBuilder(params, spec, approx_grid(eps), trajectory, sc.branch)

    second = builder.build(sc.t, order=2)
    first = builder.build(sc.t, order=1)
    result = {
        "epsilon": eps,
        **second.norms(),
        "R_sharp": residual_R_sharp(second, params, spec, builder),
        "R_first_order": residual_R_sharp(first, params, spec, builder),
        "omega_deviation_ratio": trajectory.max_omega_deviation() / eps,
        "f1": second.f1,
        "f2": second.f2,
    }
    field_io.write_pair(out, "w_sharp", second.W_sharp)
    field_io.write_table(out / "effective_ode.tsv", trajectory.to_frame())
    logger.info("approximation member finished", **result)
    return result


def _approx_sweep(cfg: ScenarioConfig, out: Path) -> Dict[str, Any]:
    cache = kernel_cache(cfg)
    members = _map_epsilons(lambda c, e, d: approx_member(c, e, d, cache), cfg, out)
    field_io.write_table(out / "sweep.tsv", [members[e] for e in cfg.scenario.epsilons])

    reports: List[SweepReport] = [
        fit_scaling({e: m["W_l2"] for e, m in members.items()}, (0.4, 0.7), "W_l2"),
        fit_scaling({e: m["W_linf"] for e, m in members.items()}, (0.85, 1.15), "W_linf"),
        fit_scaling({e: m["R_sharp"] for e, m in members.items()}, (1.2, 2.2), "R_sharp"),
        fit_scaling({e: m["R_first_order"] for e, m in members.items()}, None, "R_first_order"),
    ]
    ratios = [m["omega_deviation_ratio"] for m in members.values()]
    spread = max(ratios) / min(ratios) if min(ratios) > 0 else 1.0
    checks = [_check(r.label, r.exponent, r.passed, window=r.window) for r in reports[:3]]
    checks.append(_check("first_order_worse", reports[3].exponent,
                         reports[3].exponent < reports[2].exponent, compare=reports[2].exponent))
    checks.append(_check("omega_deviation_spread", spread, spread < 3.0, limit=3.0))
    return {"checks": checks, "fits": [r.to_dict() for r in reports]}


# -- interaction --------------------------------------------------------------

def interaction_member(cfg: ScenarioConfig, eps: float, out: Path) -> Dict[str, Any]:
    """Solitary wave from t = -T_eps through the bump to t = T_eps, tracked."""
    params, grid, sc = cfg.params.to_params(), cfg.grid.to_grid(), cfg.scenario
    spec = cfg.bottom.to_spec(eps)
    T = t_epsilon(spec)
    family = ProfileFamily(params, grid, sc.branch)
    profile = family.profile_at(sc.omega0)
    run_cfg = replace(cfg.evolve.to_config(-T, T), comoving=True)

    trajectory = evolve.run(profile.pair, run_cfg, params, spec, frame_offset=-sc.omega0 * T)
    modulation = track(trajectory, family, sc.omega0, sc.tracker_mode, sc.weighted_pairing)
    F2 = lyapunov_series(trajectory, modulation, family, spec, sc.omega0)

    times = np.asarray(modulation.times)
    residual = np.asarray(modulation.residual_h1h1)
    pre = times <= -0.5 * T
    post = times >= 0.5 * T
    pre_slope = float(np.polyfit(times[pre], residual[pre], 1)[0]) if pre.sum() >= 2 else 0.0
    speed_gap = np.abs(modulation.rho_slope() - np.asarray(modulation.omega))
    tube = 0.5 * h1h1_norm(profile.pair)

    field_io.write_table(out / "track.tsv", modulation.to_frame())
    field_io.write_table(out / "diagnostics.tsv", [r.to_dict() for r in trajectory.rows],
                         DIAGNOSTIC_COLUMNS)
    field_io.write_pair(out, "snap_final", trajectory.snapshots[-1])
    return {
        "epsilon": eps,
        "T_eps": T,
        "pre_residual_slope": pre_slope,
        "post_residual_max": float(np.max(residual[post])),
        "post_speed_gap": float(np.max(speed_gap[post])),
        "max_residual": float(np.max(residual)),
        "tube_radius": tube,
        "recenterings": trajectory.recenterings,
        "F2_finite": bool(np.all(np.isfinite(F2))),
        "F2_final": float(F2[-1]),
    }


def _interaction(cfg: ScenarioConfig, out: Path) -> Dict[str, Any]:
    members = _map_epsilons(interaction_member, cfg, out)
    field_io.write_table(out / "interaction.tsv", [members[e] for e in cfg.scenario.epsilons])
    checks = []
    for eps, m in members.items():
        checks.append(_check(f"pre_trend_eps_{eps:g}", m["pre_residual_slope"], m["pre_residual_slope"] >= 0))
        checks.append(_check(f"survives_eps_{eps:g}", m["max_residual"], m["max_residual"] < m["tube_radius"],
                             limit=m["tube_radius"]))
        checks.append(_check(f"F2_finite_eps_{eps:g}", m["F2_final"], m["F2_finite"]))
    fits = []
    if len(members) >= 3:
        residual_fit = fit_scaling({e: m["post_residual_max"] for e, m in members.items()},
                                   (0.35, 5.0), "post_residual")
        gap_fit = fit_scaling({e: max(m["post_speed_gap"], 1e-300) for e, m in members.items()},
                              None, "post_speed_gap")
        fits = [residual_fit.to_dict(), gap_fit.to_dict()]
        checks.append(_check("post_residual_exponent", residual_fit.exponent, residual_fit.passed, minimum=0.35))
        checks.append(_check("post_speed_gap_exponent", gap_fit.exponent, gap_fit.exponent > 0))
    return {"checks": checks, "members": {repr(e): m for e, m in members.items()}, "fits": fits}


# -- exit-stability -------------------------------------------------------------

def _perturbation(grid: GridSpec, amplitude: float, seed: int) -> FieldPair:
    rng = np.random.default_rng(seed)
    envelope = np.exp(-(grid.x / 10.0) ** 2)

    def smooth():
        f = helmholtz_inv(helmholtz_inv(rng.standard_normal(grid.n), grid), grid) * envelope
        return amplitude * f / max(np.max(np.abs(f)), 1e-300)

    return FieldPair(smooth(), smooth(), grid)


def _lyapunov_ratio(trajectory: evolve.Trajectory, modulation: ModulationTrack, family: ProfileFamily,
                    F2: np.ndarray, c0: float) -> float:
    """Smallest F2 / (c0 / 2 ||eta2||^2) over snapshots with a visible remainder."""
    ratios = []
    for i, state in enumerate(trajectory.snapshots):
        profile = family.profile_at(modulation.omega[i])
        eta2 = state - shift_pair(profile.pair, modulation.rho[i] - trajectory.offsets[i])
        bound = 0.5 * c0 * h1h1_norm(eta2) ** 2
        if bound > 1e-14:
            ratios.append(F2[i] / bound)
    return float(min(ratios)) if ratios else 1.0


def _exit_stability(cfg: ScenarioConfig, out: Path) -> Dict[str, Any]:
    params, grid, sc = cfg.params.to_params(), cfg.grid.to_grid(), cfg.scenario
    family = ProfileFamily(params, grid, sc.branch)
    profile = family.profile_at(sc.omega0)
    if sc.seed_paths:
        initial = load_seed(sc.seed_paths[0])
    else:
        initial = profile.pair + _perturbation(grid, sc.perturbation, sc.seed)
    run_cfg = replace(cfg.evolve.to_config(0.0, 50.0), comoving=True)

    flat = BottomSpec(kind="zero")
    trajectory = evolve.run(initial, run_cfg, params, flat)
    modulation = track(trajectory, family, sc.omega0, sc.tracker_mode, sc.weighted_pairing)
    report = linop.stability_report(linop.assemble_L(profile, params), count=sc.count)
    F2 = lyapunov_series(trajectory, modulation, family, flat, sc.omega0)

    residual = np.asarray(modulation.residual_h1h1)
    growth = float(np.max(residual) / max(residual[0], 1e-300))
    field_io.write_table(out / "track.tsv", modulation.to_frame())
    checks = [
        _check("stable_profile", report.c0_h1, report.stable),
        _check("residual_growth", growth, growth < 10.0, limit=10.0),
        _check("max_defect", float(np.max(modulation.defect)), np.max(modulation.defect) < 1e-6, limit=1e-6),
        _check("F2_finite", float(F2[-1]), bool(np.all(np.isfinite(F2)))),
    ]
    if sc.tracker_mode == "shift-speed":
        ratio = _lyapunov_ratio(trajectory, modulation, family, F2, report.c0_h1)
        checks.append(_check("F2_coercive", ratio, ratio >= LYAPUNOV_FRACTION, limit=LYAPUNOV_FRACTION))
    field_io.write_table(out / "diagnostics.tsv", [r.to_dict() for r in trajectory.rows],
                         DIAGNOSTIC_COLUMNS)
    return {
        "checks": checks,
        "max_weighted_defect": float(np.max(modulation.weighted_defect)),
        "stability": report.to_dict(),
    }


SCENARIOS: Dict[str, Callable[[ScenarioConfig, Path], Dict[str, Any]]] = {
    "soliton-validate": _soliton_validate,
    "linear-validate": _linear_validate,
    "identity-check": _identity_check,
    "approx-sweep": _approx_sweep,
    "interaction": _interaction,
    "exit-stability": _exit_stability,
}


def run_scenario(cfg: ScenarioConfig, out_dir: Optional[Union[str, Path]] = None) -> ScenarioOutcome:
    """
    Run the scenario named in cfg.scenario.kind and write summary.json.

    Failed checks give exit code 3; WavelabError propagates to the caller.
    """
    kind = cfg.scenario.kind
    root = Path(out_dir or cfg.scenario.output_dir or config.OUTPUT_DIR) / kind
    root.mkdir(parents=True, exist_ok=True)
    logger.info("scenario started", kind=kind, output_dir=str(root))

    with trace_operation("run_scenario", {"kind": kind}):
        try:
            result = SCENARIOS[kind](cfg, root)
        except WavelabError as exc:
            logger.error("scenario aborted", error=exc, kind=kind)
            raise

    passed = all(c["passed"] for c in result["checks"])
    summary = {
        "kind": kind,
        "passed": passed,
        "config": cfg.model_dump(mode="json", by_alias=True),
        **result,
    }
    field_io.write_summary(root / "summary.json", summary)
    logger.info("scenario finished", kind=kind, passed=passed, output_dir=str(root))
    return ScenarioOutcome(kind, passed, summary, root)
