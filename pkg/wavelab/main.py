"""
wavelab command line.

    wavelab soliton|spectrum|approx|evolve|interact|sweep|run [--config FILE] [--out-dir DIR]

Exit status: 0 on success, 3 when a scenario's checks fail, 2 for expected
wavelab errors (invalid configuration, failed solves), 1 otherwise.
"""

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from wavelab import __version__
from wavelab.config import config
from wavelab.dynamics import evolve
from wavelab.dynamics.diagnostics import DIAGNOSTIC_COLUMNS
from wavelab.errors import WavelabError
from wavelab.harness import scenarios
from wavelab.logging_config import get_logger
from wavelab.schemas import ScenarioConfig
from wavelab.storage import field_io
from wavelab.telemetry import configure_tracing
from wavelab.waves import linop

logger = get_logger(__name__)

EXIT_ERROR = 1
EXIT_WAVELAB_ERROR = 2


def _load(args: argparse.Namespace, **overrides: Dict[str, Any]) -> ScenarioConfig:
    """Scenario file (or defaults) with CLI overrides applied per section."""
    cfg = ScenarioConfig.from_toml(args.config) if args.config else ScenarioConfig()
    updates = {section: {k: v for k, v in values.items() if v is not None}
               for section, values in overrides.items()}
    if not any(updates.values()):
        return cfg
    data = cfg.model_dump(by_alias=True)
    for section, values in updates.items():
        data[section].update(values)
    return ScenarioConfig.from_dict(data)


def _out_dir(args: argparse.Namespace, cfg: ScenarioConfig) -> Path:
    path = Path(args.out_dir or cfg.scenario.output_dir or config.OUTPUT_DIR)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _emit(payload: Dict[str, Any]):
    print(json.dumps(payload, indent=2, sort_keys=True, default=field_io.to_jsonable))


def cmd_soliton(args: argparse.Namespace) -> int:
    cfg = _load(
        args,
        params={"a": args.a, "c": args.c},
        grid={"n": args.grid_n, "half_length": args.grid_L},
        scenario={"alpha": args.alpha, "omega0": args.omega, "branch": args.branch},
    )
    params, grid, sc = cfg.params.to_params(), cfg.grid.to_grid(), cfg.scenario
    alpha = sc.alpha if args.omega is None else None
    profile = scenarios.solve_profile(params, grid, alpha, sc.omega0, sc.branch)
    stem = Path(args.out) if args.out else _out_dir(args, cfg) / "profile"
    paths = scenarios.write_profile(profile, stem)
    _emit({"profile": profile.summary(), "artifacts": paths})
    return 0


def cmd_spectrum(args: argparse.Namespace) -> int:
    cfg = _load(args, scenario={"alpha": args.alpha, "omega0": args.omega, "count": args.count})
    params, grid, sc = cfg.params.to_params(), cfg.grid.to_grid(), cfg.scenario
    alpha = sc.alpha if args.omega is None else None
    profile = scenarios.solve_profile(params, grid, alpha, sc.omega0, sc.branch)
    report = linop.stability_report(linop.assemble_L(profile, params), count=sc.count)
    out = _out_dir(args, cfg)
    field_io.write_table(
        out / "spectrum.tsv",
        [{"index": j, "eigenvalue": v} for j, v in enumerate(report.lowest_eigenvalues)],
    )
    _emit(report.to_dict())
    return 0


def cmd_approx(args: argparse.Namespace) -> int:
    cfg = _load(args, bottom={"epsilon": args.epsilon}, scenario={"omega0": args.omega0, "t": args.t})
    out = Path(args.out) if args.out else _out_dir(args, cfg) / "approx"
    out.mkdir(parents=True, exist_ok=True)
    result = scenarios.approx_member(cfg, cfg.bottom.epsilon, out)
    field_io.write_summary(out / "summary.json", {"passed": True, **result})
    _emit(result)
    return 0


def cmd_evolve(args: argparse.Namespace) -> int:
    cfg = _load(args)
    params, grid, sc = cfg.params.to_params(), cfg.grid.to_grid(), cfg.scenario
    spec = cfg.bottom.to_spec()
    if sc.seed_paths:
        initial = scenarios.load_seed(sc.seed_paths[0])
    else:
        initial = scenarios.solve_profile(params, grid, None, sc.omega0, sc.branch).pair
    run_cfg = cfg.evolve.to_config(0.0, 50.0)
    trajectory = evolve.run(initial, run_cfg, params, spec)

    out = _out_dir(args, cfg) / "evolve"
    for j, snapshot in enumerate(trajectory.snapshots):
        field_io.write_pair(out, f"snap_{j:04d}", snapshot)
    field_io.write_table(out / "diagnostics.tsv", [r.to_dict() for r in trajectory.rows],
                         DIAGNOSTIC_COLUMNS)
    field_io.write_table(out / "offsets.tsv", [{"t": t, "frame_offset": o}
                                               for t, o in zip(trajectory.times, trajectory.offsets)])
    _emit({"snapshots": len(trajectory.times), "dt": trajectory.dt,
           "recenterings": trajectory.recenterings, "output_dir": str(out)})
    return 0


def _scenario(args: argparse.Namespace, kind: Optional[str]) -> int:
    cfg = _load(args, scenario={"kind": kind})
    outcome = scenarios.run_scenario(cfg, args.out_dir)
    _emit({"kind": outcome.kind, "passed": outcome.passed, "output_dir": str(outcome.output_dir)})
    return outcome.exit_code


def cmd_interact(args: argparse.Namespace) -> int:
    return _scenario(args, "interaction")


def cmd_sweep(args: argparse.Namespace) -> int:
    return _scenario(args, "approx-sweep")


def cmd_run(args: argparse.Namespace) -> int:
    return _scenario(args, None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wavelab", description="Solitary waves of the abcd system over a moving bottom")
    parser.add_argument("--version", action="version", version=f"wavelab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, handler, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="TOML scenario file")
        p.add_argument("--out-dir", dest="out_dir", help="Output directory")
        p.set_defaults(handler=handler)
        return p

    p = add("soliton", cmd_soliton, "Compute and dump a solitary-wave profile")
    p.add_argument("--alpha", type=float)
    p.add_argument("--omega", type=float)
    p.add_argument("--branch", choices=("plus", "minus"))
    p.add_argument("--a", type=float)
    p.add_argument("--c", type=float)
    p.add_argument("--grid-n", dest="grid_n", type=int)
    p.add_argument("--grid-L", dest="grid_L", type=float)
    p.add_argument("--out", help="Output stem for the dumps")

    p = add("spectrum", cmd_spectrum, "Low spectrum, VK value and coercivity of L")
    p.add_argument("--alpha", type=float)
    p.add_argument("--omega", type=float)
    p.add_argument("--count", type=int)

    p = add("approx", cmd_approx, "Approximate solution and its residual at one epsilon")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--omega0", type=float)
    p.add_argument("--t", type=float)
    p.add_argument("--out", help="Output directory for the member artifacts")

    add("evolve", cmd_evolve, "Time evolution with diagnostics")
    add("interact", cmd_interact, "Wave-bottom interaction experiment with tracking")
    add("sweep", cmd_sweep, "Epsilon-scaling study of the approximate solution")
    add("run", cmd_run, "Run the scenario kind named in the config file")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    validation = config.validate()
    if not validation["valid"]:
        logger.error("Configuration validation failed", issues=validation["issues"])
        return EXIT_WAVELAB_ERROR
    configure_tracing()
    try:
        return args.handler(args)
    except WavelabError as exc:
        logger.error("wavelab command failed", error=exc, command=args.command)
        return EXIT_WAVELAB_ERROR
    except Exception as exc:
        logger.error("unexpected failure", error=exc, command=args.command)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
