"""Command-line entry point ``ddyn``.

Results go to stdout (or files), diagnostics to stderr. Exit codes: 0 ok,
2 invalid model or arguments, 3 singular topology or pose, 4 numeric failure.
"""

import argparse
import math
import os
import sys
from dataclasses import replace

import numpy as np

from . import dissipative as dv
from . import metrics as mt
from . import model_io, report
from . import redundant as rd
from . import rigid_body as rb
from . import wedge as wg
from .errors import DdynError, ModelError
from .flow import FlowDirection

CASE_STUDY_GRID = "0.5:1.0:0.01"
DIRECTIONS = {"z": (0.0, 1.0), "x": (1.0, 0.0), "-z": (0.0, -1.0), "-x": (-1.0, 0.0)}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ModelError(message)


def _numbers(text, name):
    try:
        return [model_io.eval_number(tok, None) for tok in text.replace(",", " ").split()]
    except ModelError as exc:
        raise ModelError(f"--{name}: {exc}") from None


def _direction(text):
    if text in DIRECTIONS:
        return np.array(DIRECTIONS[text])
    vals = _numbers(text, "direction")
    if len(vals) != 2:
        raise ModelError(f"--direction must be one of {sorted(DIRECTIONS)} or 'dx,dz'")
    return np.array(vals)


def _load(path):
    if path == "builtin:case-study":
        return model_io.builtin_case_study()
    return model_io.load_model(path)


def _with_pose(model, pose):
    if pose is None:
        return model
    q = _numbers(pose, "pose")
    if len(q) != model.m:
        raise ModelError(f"--pose needs {model.m} joint angles, got {len(q)}")
    return replace(model, pose=tuple(q))


def _out(text):
    sys.stdout.write(text)


# commands ----------------------------------------------------------------

def cmd_wedge(args):
    p = wg.WedgeParams(args.block_mass, args.wedge_mass, math.radians(args.alpha_deg), args.mu)
    eff = wg.efficiencies(p)
    rows = [
        ["gear_ratio", p.gear_ratio],
        ["eta_f", eff.eta_f],
        ["eta_b", eff.eta_b],
    ]
    try:
        rows.append(["impedance_fwd", wg.impedance_coefficient(p, "fwd")])
    except ModelError:
        rows.append(["impedance_fwd", math.inf])
        print("forward-locked wedge: forward impedance reported as inf", file=sys.stderr)
    rows.append(["impedance_bwd", wg.impedance_coefficient(p, "bwd")])
    _out(report.csv_text(["quantity", "value"], rows))
    return 0


def _backward_note(lossy):
    reading = "inertia built with backward efficiencies" if lossy else "equal to the conventional tensor"
    print(f"backward GIT: {reading}", file=sys.stderr)


def _git_set(model, q, variants, lossy):
    fixed = model.locked_base(q)
    qf = fixed.default_q()
    if mt.Variant.BACKWARD in variants:
        _backward_note(lossy)
    return [mt.git(fixed, qf, v, backward_uses_efficiency=lossy) for v in variants]


def cmd_analyze(args):
    model = _with_pose(_load(args.model), args.pose)
    mode = FlowDirection.parse(args.mode)
    q = model.default_q()
    wanted = [w.strip() for w in args.metrics.split(",") if w.strip()]
    unknown = set(wanted) - {"git", "fc", "imf", "eom"}
    if unknown:
        raise ModelError(f"unknown metrics: {', '.join(sorted(unknown))}")
    parts = []
    if "eom" in wanted:
        dd = dv.assemble(model, q, None, mode)
        k = dd.H.shape[0]
        header = ["quantity", "row"] + [f"c{j}" for j in range(k)]
        rows = [["H", str(i)] + list(dd.H[i]) for i in range(k)]
        rows.append(["c", "0"] + list(dd.c))
        parts.append(report.csv_text(header, rows))
    if "git" in wanted:
        second = mt.Variant.FORWARD if mode is FlowDirection.FWD else mt.Variant.BACKWARD
        parts.append(report.git_csv(_git_set(model, q, (mt.Variant.CONVENTIONAL, second), args.backward_git == "lossy")))
    if "fc" in wanted:
        second = mt.Variant.FORWARD if mode is FlowDirection.FWD else mt.Variant.BACKWARD
        polys = [mt.force_capability(model, q, variant=v) for v in (mt.Variant.CONVENTIONAL, second)]
        parts.append(report.fc_csv(polys))
    if "imf" in wanted:
        if model.b != 3:
            print("imf skipped: model has a fixed base", file=sys.stderr)
        else:
            n = _direction(args.direction)
            res = mt.imf(model, q, n, args.reference)
            parts.append(report.csv_text(["metric", "reference", "nx", "nz", "value"],
                                         [["imf", res.reference, res.direction[0], res.direction[1], res.value]]))
    _out("\n".join(parts))
    return 0


def _sweep(model, grid, direction, reference, workers):
    print(f"efficiency map: {model.transmissions.efficiency_map.label}", file=sys.stderr)
    return mt.efficiency_sweep(model, model.default_q(), grid, direction, reference, workers)


def cmd_sweep(args):
    model = _with_pose(_load(args.model), args.pose)
    rows = _sweep(model, mt.parse_grid(args.eta_f), _direction(args.direction), args.reference, args.workers)
    _out(report.sweep_csv(rows))
    return 0


def cmd_case_study(args):
    model = model_io.builtin_case_study()
    q = model.default_q()
    gits = _git_set(model, q, tuple(mt.Variant), args.backward_git == "lossy")
    polys = [mt.force_capability(model, q, variant=v) for v in mt.Variant]
    rows = _sweep(model, mt.parse_grid(args.eta_f), np.array(DIRECTIONS["z"]), args.reference, args.workers)
    os.makedirs(args.out_dir, exist_ok=True)
    outputs = {
        "git.csv": report.git_csv(gits),
        "fc.csv": report.fc_csv(polys),
        "sweep.csv": report.sweep_csv(rows),
    }
    if args.svg:
        outputs.update({
            "git.svg": report.git_svg(gits),
            "fc.svg": report.fc_svg(polys),
            "sweep.svg": report.sweep_svg(rows, model.transmissions.efficiency_map.label),
        })
    for name, text in outputs.items():
        report.write_text(os.path.join(args.out_dir, name), text)
    _out("".join(f"{os.path.join(args.out_dir, name)}\n" for name in outputs))
    return 0


def cmd_simulate(args):
    model = _with_pose(_load(args.model), args.pose)
    tau = _numbers(args.tau, "tau") if args.tau else [0.0] * model.m
    fext = _numbers(args.fext, "fext") if args.fext else [0.0, 0.0]
    if len(tau) != model.m or len(fext) != 2:
        raise ModelError(f"--tau needs {model.m} values and --fext needs 2")
    if args.every < 1:
        raise ModelError("--every must be >= 1")
    state = rb.SystemState.from_reduced(model, model.default_q())
    tr = rd.simulate_redundant_system(
        model, state, np.array(tau), np.array(fext), dt=args.dt, steps=args.steps, mode=args.mode,
        check_power=not args.no_power_check,
    )
    ns = model.n_redundant
    header = (["t"] + [f"s{i}" for i in range(ns)] + [f"sd{i}" for i in range(ns)]
              + ["energy", "dissipated", "power_residual"])
    rows = (
        [tr.t[k]] + list(tr.s[k]) + list(tr.sd[k]) + [tr.energy[k], tr.dissipated_energy[k], tr.power_residual[k]]
        for k in range(0, len(tr.t), args.every)
    )
    _out(report.csv_text(header, rows))
    return 0


def build_parser():
    p = _Parser(prog="ddyn", description="Dynamics and design metrics for robots with lossy transmissions.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    w = sub.add_parser("wedge", help="wedge-block efficiencies and impedance")
    w.add_argument("--mu", type=float, required=True)
    w.add_argument("--alpha-deg", type=float, required=True)
    w.add_argument("--block-mass", type=float, default=1.0, help="M, kg (default 1)")
    w.add_argument("--wedge-mass", type=float, default=1.0, help="m, kg (default 1)")
    w.set_defaults(func=cmd_wedge)

    def model_arg(sp):
        sp.add_argument("model", help="model file, or builtin:case-study")
        sp.add_argument("--pose", help="joint angles, e.g. 'pi/3,pi/3'")

    a = sub.add_parser("analyze", help="GIT, force capability and IMF at one pose")
    model_arg(a)
    a.add_argument("--mode", choices=["fwd", "bwd"], default="fwd")
    a.add_argument("--metrics", default="git,fc,imf", help="comma list of git,fc,imf,eom")
    a.add_argument("--direction", default="z")
    a.add_argument("--reference", choices=["joints", "base"], default="joints")
    a.add_argument("--backward-git", choices=["lossy", "conventional"], default="lossy",
                   help="backward GIT from efficiency-weighted H (default) or plain H")
    a.set_defaults(func=cmd_analyze)

    s = sub.add_parser("sweep", help="force capability and IMF versus forward efficiency")
    model_arg(s)
    s.add_argument("--eta-f", default=CASE_STUDY_GRID, help="lo:hi:step or comma list")
    s.add_argument("--direction", default="z")
    s.add_argument("--reference", choices=["joints", "base"], default="joints")
    s.add_argument("--workers", type=int, default=1)
    s.set_defaults(func=cmd_sweep)

    c = sub.add_parser("case-study", help="write the 2-DoF leg tables")
    c.add_argument("--out-dir", default=".")
    c.add_argument("--eta-f", default=CASE_STUDY_GRID)
    c.add_argument("--reference", choices=["joints", "base"], default="joints")
    c.add_argument("--workers", type=int, default=1)
    c.add_argument("--svg", action="store_true", help="also write SVG sketches")
    c.add_argument("--backward-git", choices=["lossy", "conventional"], default="lossy")
    c.set_defaults(func=cmd_case_study)

    r = sub.add_parser("simulate", help="redundant-coordinate simulation with friction")
    model_arg(r)
    r.add_argument("--dt", type=float, default=1e-4)
    r.add_argument("--steps", type=int, default=1000)
    r.add_argument("--tau", help="rotor torques, comma separated")
    r.add_argument("--fext", help="foot force fx,fz")
    r.add_argument("--mode", choices=["fwd", "bwd"], default="fwd")
    r.add_argument("--every", type=int, default=1, help="print every k-th sample")
    r.add_argument("--no-power-check", action="store_true")
    r.set_defaults(func=cmd_simulate)
    return p


def run_cli(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except DdynError as exc:
        print(f"ddyn: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except np.linalg.LinAlgError as exc:
        print(f"ddyn: error: {exc}", file=sys.stderr)
        return 3


def main():
    sys.exit(run_cli())
