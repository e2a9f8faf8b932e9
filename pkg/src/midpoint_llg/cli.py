"""Command-line driver: ``simulate``, ``cfl-sweep``, ``eps-sweep`` and ``validate``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import ConfigError, build_model, initial_state, load_config
from .diagnostics import validate
from .integrator import SchemeMode, run
from .mesh import build_unit_cube_mesh
from .output import write_csv, write_fits_csv, write_thresholds_csv, write_vtk_snapshot
from .sweeps import SweepResult, cfl_sweep, eps_sweep


def _log(msg: str) -> None:
    print(msg, file=sys.stderr, flush=True)


def _outdir(args, cfg) -> Path:
    out = Path(args.output or cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load(args):
    cfg = load_config(args.config)
    if args.paper_literal_pi:
        cfg.paper_literal_pi = True
    if args.vtk_every is not None:
        cfg.vtk_every = args.vtk_every
    return cfg


def _echo_config(cfg, out: Path) -> None:
    lines = [f"{k} = {v}" for k, v in cfg.as_dict().items()]
    (out / "config_used.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")


def cmd_simulate(args) -> int:
    cfg = _load(args)
    out = _outdir(args, cfg)
    mesh = build_unit_cube_mesh(cfg.N)
    model = build_model(cfg, mesh)
    m0 = initial_state(cfg, mesh)
    mode = SchemeMode(cfg.mode, cfg.eps)
    every = cfg.vtk_every
    if every:
        write_vtk_snapshot(mesh, m0, out / "m_000000.vtk")

    def snapshot(i, m, _report):
        if every and i % every == 0:
            write_vtk_snapshot(mesh, m, out / f"m_{i:06d}.vtk")

    traj = run(mesh, model, m0, cfg.k, cfg.T, mode, cfg.iteration_cap, cfg.linear_tol,
               keep_states=False, callback=snapshot, linear_max_iter=cfg.linear_max_iter)
    write_csv(traj, out / "trajectory.csv")
    _echo_config(cfg, out)
    last = traj.records[-1] if traj.records else None
    _log(f"{len(traj.records)} steps, N={cfg.N}, k={cfg.k:g}, mode={cfg.mode}, eps={cfg.eps:g}")
    if last is not None:
        _log(f"E(m0)={traj.initial_energy:.10g}  E(end)={last.energy:.10g}  "
             f"identity residual={last.identity_residual:.3e}  deviation=({last.max_dev:.3e}, {last.min_dev:.3e})")
    if not traj.feasible:
        _log(f"infeasible at step {traj.infeasible_step}: {traj.failure}")
        return 2
    return 0


def _print_point(p) -> None:
    extra = f" dev=({p.max_dev:.3e},{p.min_dev:.3e})" if p.max_dev == p.max_dev else ""
    _log(f"  {p.mode:10s} N={p.N:<3d} k={p.k:.6g} eps={p.eps:.3g} "
         f"{'ok ' if p.feasible else 'FAIL'} its={p.iterations}{extra}")


def _run_cfl(cfg) -> SweepResult:
    merged = SweepResult(kind="cfl")
    h_list = [1.0 / n for n in cfg.N_list]
    for mode in cfg.sweep_modes:
        res = cfl_sweep(h_list, cfg.k_schedule(), cfg.eps, mode, build_model(cfg), cfg.iteration_cap,
                        cfg.linear_tol, cfg.linear_max_iter, cfg.stop_at_first_infeasible, progress=_print_point)
        merged.points += res.points
        merged.thresholds.update(res.thresholds)
        merged.fits.update(res.fits)
    return merged


def cmd_cfl_sweep(args) -> int:
    cfg = _load(args)
    out = _outdir(args, cfg)
    res = _run_cfl(cfg)
    write_csv(res, out / "cfl_points.csv")
    write_thresholds_csv(res, out / "cfl_thresholds.csv")
    write_fits_csv(res, out / "cfl_fits.csv")
    _echo_config(cfg, out)
    for (mode, N), t in sorted(res.thresholds.items()):
        _log(f"{mode:10s} h=1/{N:<3d} bracket=({t.k_feasible}, {t.k_infeasible}) k_thresh={t.k_thresh}")
    for key, f in res.fits.items():
        _log(f"{' '.join(map(str, key))}: beta={f.slope:.4f} (rms log residual {f.residual:.3g}, {f.n_points} points)")
    return 0


def cmd_eps_sweep(args) -> int:
    cfg = _load(args)
    out = _outdir(args, cfg)
    h_list = [1.0 / n for n in cfg.N_list]
    if cfg.k_list:
        k_per_h = list(cfg.k_list)
    else:
        _log("no k_list given: estimating fixed-point thresholds first")
        thr = cfl_sweep(h_list, cfg.k_schedule(), 1e-8, "fixedpoint", build_model(cfg), cfg.iteration_cap)
        k_per_h = []
        for N in cfg.N_list:
            t = thr.thresholds[("fixedpoint", N)]
            if t.k_thresh is None:
                raise ConfigError(f"no feasibility bracket for N={N} on the k grid; give k_list explicitly")
            k_per_h.append(cfg.k_fraction * t.k_thresh)
    res = eps_sweep(h_list, k_per_h, cfg.eps_list(), cfg.T, cfg.sweep_modes, build_model(cfg),
                    cfg.iteration_cap, cfg.linear_tol, cfg.linear_max_iter, progress=_print_point)
    write_csv(res, out / "eps_points.csv")
    write_fits_csv(res, out / "eps_fits.csv")
    _echo_config(cfg, out)
    for key, f in res.fits.items():
        _log(f"{' '.join(map(str, key))}: slope={f.slope:.4f} (rms log residual {f.residual:.3g})")
    return 0


def cmd_validate(args) -> int:
    report = validate(paper_literal_pi=args.paper_literal_pi)
    print(report.format())
    if args.output:
        out = Path(args.output)
        out.mkdir(parents=True, exist_ok=True)
        (out / "validate.txt").write_text(report.format() + "\n", encoding="utf-8")
    return 0 if report.passed else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="midpoint-llg", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_config=True):
        if with_config:
            p.add_argument("config", help="flat 'key = value' configuration file")
        p.add_argument("--output", help="output directory (overrides the config)")
        p.add_argument("--paper-literal-pi", action="store_true",
                       help="DMI preset with the literal lower-order scaling ldm/(2 lex^2)")

    p = sub.add_parser("simulate", help="run one trajectory and write trajectory.csv")
    common(p)
    p.add_argument("--vtk-every", type=int, help="write a VTK snapshot every n steps (0 disables)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("cfl-sweep", help="first-step feasibility over the (h, k) grid")
    common(p)
    p.add_argument("--vtk-every", type=int, help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_cfl_sweep)

    p = sub.add_parser("eps-sweep", help="unit-length deviation over the solver tolerance")
    common(p)
    p.add_argument("--vtk-every", type=int, help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_eps_sweep)

    p = sub.add_parser("validate", help="run the property suite and print measured constants")
    common(p, with_config=False)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, OSError) as exc:
        _log(f"error: {exc}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
