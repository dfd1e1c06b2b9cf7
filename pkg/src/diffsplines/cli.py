"""Command-line front end.

Subcommands mirror the library layers: kernel evaluation, the two geodesic
integrators, the acceleration/defect functionals, the measure functional
utilities, the Riccati optimality tests, and the full comparison
experiment.  CSV artifacts carry header rows and 17-significant-digit
floats so runs are reproducible bit for bit.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .coords import constraint_residuals
from .experiment import ExperimentConfig, report_dict, run_section7
from .fisher_rao import (AtomicMeasurePath, GridMeasurePair,
                         check_inequality_condition, fr_atomic, fr_grid,
                         synthesize_oscillations)
from .functional import acceleration_J0, eta_probe_series, relaxed_F
from .geodesic_pq import PQTrajectory, initial_p_from_velocity, integrate_geodesic
from .kernel import KernelModel, kernel_eval, velocity_field
from .landmark import (LandmarkState, hamiltonian_series, integrate_landmarks,
                       reconstruct_flow)
from .numerics import PathField, ScalarField, SpatialGrid, TimeGrid
from .riccati import certify_sufficient, necessary_condition_test


def _fmt(v: float) -> str:
    return f"{v:.17g}"


def _write_rows(path: Path, header: str, rows):
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(_fmt(float(v)) for v in row) + "\n")


def _write_matrix(path: Path, times: np.ndarray, nodes: np.ndarray,
                  values: np.ndarray):
    header = "t," + ",".join(_fmt(x) for x in nodes)
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for t, row in zip(times, values):
            fh.write(_fmt(t) + "," + ",".join(_fmt(v) for v in row) + "\n")


def _read_matrix(path: Path):
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        nodes = np.array([float(v) for v in header[1:]])
        body = np.loadtxt(fh, delimiter=",", ndmin=2)
    return body[:, 0], nodes, body[:, 1:]


def _load_trajectory(traj_dir: Path) -> PQTrajectory:
    t, nodes, q = _read_matrix(traj_dir / "q_path.csv")
    _, _, p = _read_matrix(traj_dir / "p_path.csv")
    grid = SpatialGrid.uniform(nodes.size)
    times = TimeGrid.from_step(float(t[-1]), float(t[1] - t[0]))
    res = np.array([constraint_residuals(row, grid.h) for row in q])
    return PQTrajectory(times, grid, q, p, res)


def _parse_defect(spec: str, times: TimeGrid):
    if not spec.startswith("atomic:"):
        raise ValueError("only atomic defects are supported, e.g. "
                         "atomic:x0=0.5,profile=sin2")
    x0, profile, scale = 0.5, "sin2", 1.0
    for item in spec.split(":", 1)[1].split(","):
        key, _, val = item.partition("=")
        if key == "x0":
            x0 = float(val)
        elif key == "profile":
            profile = val
        elif key == "scale":
            scale = float(val)
        else:
            raise ValueError(f"unknown defect field {key!r}")
    t = times.times
    if profile == "sin2":
        f = np.abs(np.sin(2 * np.pi * t))
    elif profile == "sin1":
        f = np.abs(np.sin(np.pi * t))
    else:
        raise ValueError(f"unknown profile {profile!r}")
    f[0] = 0.0
    return AtomicMeasurePath(x0, np.sqrt(scale) * f, times)


def _cmd_kernel(args):
    model = KernelModel(args.variant)
    payload = {
        "variant": model.variant,
        "s": args.s,
        "t": args.t,
        "value": kernel_eval(model, args.s, args.t, 0),
        "d1": kernel_eval(model, args.s, args.t, 1),
        "d2": kernel_eval(model, args.s, args.t, 2),
    }
    print(json.dumps(payload))


def _cmd_geodesic_landmark(args):
    model = KernelModel(args.kernel)
    q = np.array([float(v) for v in args.positions.split(",")])
    p = np.array([float(v) for v in args.momenta.split(",")])
    times = TimeGrid.from_step(args.t_final, args.dt)
    grid = SpatialGrid.uniform(args.nx)
    traj = integrate_landmarks(model, LandmarkState(q, p), times)
    flow = reconstruct_flow(model, traj, grid, probe_x=0.5)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    H = hamiltonian_series(traj)
    _write_rows(out / "trajectory.csv",
                "t," + ",".join(f"q{i+1}" for i in range(q.size))
                + "," + ",".join(f"p{i+1}" for i in range(q.size)) + ",H",
                np.column_stack([times.times, traj.q, traj.p, H]))
    stride = args.flow_stride or max(1, times.m // 200)
    rows = []
    for k in range(0, times.m + 1, stride):
        t = times.times[k]
        for j, x in enumerate(grid.nodes):
            rows.append((t, x, flow.phi.values[k, j]))
    _write_rows(out / "flow.csv", "t,x,phi", rows)
    _write_rows(out / "jacobian.csv", "t,phix_at_half",
                np.column_stack([times.times, flow.phix_mid]))
    print(json.dumps({"out": str(out), "hamiltonian_drift": traj.hamiltonian_drift}))


def _cmd_geodesic_pq(args):
    pos_str, mom_str = args.init_from_landmarks.split(":")
    q_lm = np.array([float(v) for v in pos_str.split(",")])
    p_lm = np.array([float(v) for v in mom_str.split(",")])
    model = KernelModel(args.kernel)
    grid = SpatialGrid.uniform(args.nx)
    state = LandmarkState(q_lm, p_lm)
    v0 = ScalarField(grid, velocity_field(model, state, grid.nodes))
    p0 = initial_p_from_velocity(v0)
    q0 = ScalarField(grid, np.zeros(grid.n))
    times = TimeGrid.from_step(args.t_final, args.dt)
    reproject = {"auto": None, "on": True, "off": False}[args.reproject]
    traj = integrate_geodesic(p0, q0, times, reproject=reproject)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_matrix(out / "q_path.csv", times.times, grid.nodes, traj.q_path)
    _write_matrix(out / "p_path.csv", times.times, grid.nodes, traj.p_path)
    _write_rows(out / "constraints.csv", "t,r1,r2",
                np.column_stack([times.times, traj.residuals]))
    print(json.dumps({"out": str(out),
                      "max_residual": float(np.abs(traj.residuals).max())}))


def _cmd_acceleration(args):
    traj = _load_trajectory(Path(args.traj))
    J0 = acceleration_J0(traj)
    payload = {"J0": J0, "penalty": 0.0}
    if args.defect:
        delta = _parse_defect(args.defect, traj.times)
        F = relaxed_F(traj, delta)
        fr = fr_atomic(delta, eta_probe_series(traj, delta.x0))
        payload.update({"FR": fr, "F": F, "cross_term": F - J0 - fr})
    else:
        payload.update({"FR": 0.0, "F": J0, "cross_term": 0.0})
    text = json.dumps(payload)
    if args.out:
        Path(args.out).write_text(text)
    print(text)


def _cmd_fisher_rao(args):
    t, nodes, mu = _read_matrix(Path(args.mu))
    _, _, nu = _read_matrix(Path(args.nu))
    grid = SpatialGrid.uniform(nodes.size)
    times = TimeGrid.from_step(float(t[-1]), float(t[1] - t[0]))
    pair = GridMeasurePair(PathField(times, grid, mu), PathField(times, grid, nu))
    if args.weight.startswith("const:"):
        weight = float(args.weight.split(":")[1])
    else:
        _, _, w = _read_matrix(Path(args.weight))
        weight = PathField(times, grid, w)
    value = fr_grid(pair.rho_mu, pair.rho_nu, weight)
    margin = check_inequality_condition(pair)
    print(json.dumps({"value": value, "finite": bool(np.isfinite(value)),
                      "margins": margin}))


def _cmd_oscillate(args):
    t, nodes, mu = _read_matrix(Path(args.mu))
    _, _, nu = _read_matrix(Path(args.nu))
    grid = SpatialGrid.uniform(nodes.size)
    times = TimeGrid.from_step(float(t[-1]), float(t[1] - t[0]))
    pn = synthesize_oscillations(PathField(times, grid, mu),
                                 PathField(times, grid, nu), args.n)
    _write_matrix(Path(args.out), times.times, grid.nodes, pn.values)
    print(json.dumps({"out": args.out, "n": args.n}))


def _cmd_riccati(args):
    traj = _load_trajectory(Path(args.from_traj))
    delta = _parse_defect(args.defect, traj.times) if args.defect else None
    payload = {}
    if args.mode in ("necessary", "both"):
        candidates = [delta] if delta is not None else [
            _parse_defect("atomic:x0=0.5,profile=sin2", traj.times)]
        rep = necessary_condition_test(traj, delta, candidates)
        payload["necessary"] = {
            "margins": [float(v) for v in rep.necessary_margins],
            "equality_gap": rep.equality_gap,
            "verdict": rep.verdict,
        }
    if args.mode in ("sufficient", "both"):
        rep = certify_sufficient(traj, delta)
        out = rep.sufficient_status
        payload["sufficient"] = {
            "status": out.status,
            "verdict": rep.verdict,
            "equality_gap": rep.equality_gap,
            "terminal_error": rep.terminal_error,
            "blowup_fraction": float(np.mean(out.blown)),
        }
    verdicts = [v.get("verdict") for v in payload.values()]
    payload["verdict"] = ("not_minimum" if "not_minimum" in verdicts else
                          "certified_minimum" if "certified_minimum" in verdicts
                          else "inconclusive")
    print(json.dumps(payload))


def _cmd_experiment(args):
    if args.what != "section7":
        raise SystemExit(f"unknown experiment {args.what!r}")
    config = ExperimentConfig(lam=args.lam, reparam=args.reparam,
                              kernel=args.kernel, nx=args.nx,
                              dt_geodesic=args.dt, dt_functional=args.dt)
    if args.config:
        overrides = {}
        for line in Path(args.config).read_text().splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, val = line.partition("=")
            overrides[key.strip()] = val.strip()
        for key, val in overrides.items():
            if not hasattr(config, key):
                raise SystemExit(f"unknown config key {key!r}")
            cur = getattr(config, key)
            if isinstance(cur, bool):
                val = val.lower() in ("1", "true", "yes")
            elif isinstance(cur, int):
                val = int(val)
            elif isinstance(cur, float):
                val = float(val)
            setattr(config, key, val)
    report = run_section7(config, out_dir=args.out)
    print(json.dumps(report_dict(report), indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="diffsplines")
    sub = parser.add_subparsers(dest="command", required=True)

    k = sub.add_parser("kernel", help="evaluate the reproducing kernel")
    k.add_argument("--s", type=float, required=True)
    k.add_argument("--t", type=float, required=True)
    k.add_argument("--variant", default="clamped",
                   choices=["clamped", "paper"])
    k.set_defaults(func=_cmd_kernel)

    g = sub.add_parser("geodesic-landmark", help="integrate the landmark system")
    g.add_argument("--positions", default="0.25,0.75")
    g.add_argument("--momenta", default="15,-15")
    g.add_argument("--t-final", type=float, default=16.0)
    g.add_argument("--dt", type=float, default=1e-3)
    g.add_argument("--nx", type=int, default=513)
    g.add_argument("--kernel", default="clamped", choices=["clamped", "paper"])
    g.add_argument("--flow-stride", type=int, default=0,
                   help="time stride for flow.csv rows (0 = about 200 rows)")
    g.add_argument("--out", required=True)
    g.set_defaults(func=_cmd_geodesic_landmark)

    q = sub.add_parser("geodesic-pq", help="integrate the momentum system")
    q.add_argument("--init-from-landmarks", default="0.25,0.75:15,-15")
    q.add_argument("--t-final", type=float, default=2.0)
    q.add_argument("--dt", type=float, default=1e-3)
    q.add_argument("--nx", type=int, default=513)
    q.add_argument("--kernel", default="clamped", choices=["clamped", "paper"])
    q.add_argument("--reproject", default="auto", choices=["auto", "on", "off"])
    q.add_argument("--out", required=True)
    q.set_defaults(func=_cmd_geodesic_pq)

    a = sub.add_parser("acceleration", help="evaluate the acceleration functionals")
    a.add_argument("--traj", required=True)
    a.add_argument("--defect", default="")
    a.add_argument("--out", default="")
    a.set_defaults(func=_cmd_acceleration)

    f = sub.add_parser("fisher-rao", help="evaluate the measure functional")
    f.add_argument("--mu", required=True)
    f.add_argument("--nu", required=True)
    f.add_argument("--weight", default="const:1")
    f.set_defaults(func=_cmd_fisher_rao)

    o = sub.add_parser("oscillate", help="synthesize oscillating approximants")
    o.add_argument("--mu", required=True)
    o.add_argument("--nu", required=True)
    o.add_argument("--n", type=int, default=64)
    o.add_argument("--out", required=True)
    o.set_defaults(func=_cmd_oscillate)

    r = sub.add_parser("riccati", help="run the optimality tests")
    r.add_argument("--from-traj", required=True)
    r.add_argument("--defect", default="")
    r.add_argument("--mode", default="both",
                   choices=["necessary", "sufficient", "both"])
    r.set_defaults(func=_cmd_riccati)

    e = sub.add_parser("experiment", help="run the comparison experiment")
    e.add_argument("what", nargs="?", default="section7")
    e.add_argument("--lambda", dest="lam", type=float, default=15.0)
    e.add_argument("--reparam", default="cubic")
    e.add_argument("--kernel", default="both",
                   choices=["clamped", "paper", "both"])
    e.add_argument("--nx", type=int, default=513)
    e.add_argument("--dt", type=float, default=1e-3)
    e.add_argument("--config", default="")
    e.add_argument("--out", required=True)
    e.set_defaults(func=_cmd_experiment)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    result = args.func(args)
    return int(result or 0)


if __name__ == "__main__":
    sys.exit(main())
