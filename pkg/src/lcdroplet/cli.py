"""Command-line interface: scenario runner, verification suite, mesh audit.

    lcdroplet simulate --preset droplet_corner --set mesh.nx=32 --out run/
    lcdroplet verify --seed 7 --report checks.jsonl
    lcdroplet mesh-audit --nx 32 --ny 32

A simulation writes, into the output directory: the resolved scenario
document (config.yaml), an energy trace CSV with one row per step, VTK
snapshots of the fields at the configured cadence, and a final-state
archive sufficient to restart.
"""
from __future__ import annotations

import argparse
import os
import sys

import numpy as np
import yaml

from . import assembly, config as cfgmod, solver as sv, verify as vf, vtkio
from .mesh import audit_weak_acuteness, build_structured_mesh, mesh_size

CSV_COLUMNS = (
    "step", "time", "e_erk", "e_dw", "e_chdw", "e_chgd", "e_wan", "e_was",
    "total", "mass_drift", "newton_iters", "min_s", "max_s",
)


def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


class EnergyCSVSink:
    """Streams one energy-trace row per step (plus the initial row)."""

    def __init__(self, path):
        self.path = path
        self._fh = None

    def on_start(self, state, energy_report):
        os.makedirs(os.path.dirname(os.path.abspath(self.path)), exist_ok=True)
        self._fh = open(self.path, "w", encoding="utf-8")
        self._fh.write(",".join(CSV_COLUMNS) + "\n")
        r = energy_report
        self._write_row(
            state.step_index, state.time, r, mass_drift=0.0, newton_iters=0,
            min_s=float(state.s.values.min()), max_s=float(state.s.values.max()),
        )

    def on_step(self, state, report):
        r = report.after
        self._write_row(
            state.step_index, state.time, r, mass_drift=report.mass_drift,
            newton_iters=report.newton_iters, min_s=report.min_s,
            max_s=report.max_s,
        )

    def on_finish(self, state):
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def _write_row(self, step, time, r, *, mass_drift, newton_iters, min_s, max_s):
        row = [
            step, time, r.e_erk, r.e_dw, r.e_chdw, r.e_chgd, r.e_wan, r.e_was,
            r.total, mass_drift, newton_iters, min_s, max_s,
        ]
        self._fh.write(",".join(_fmt(v) for v in row) + "\n")
        self._fh.flush()


class SnapshotSink:
    """Writes fields_<step>.vtk every ``every`` steps (and at start/end)."""

    def __init__(self, out_dir, every: int):
        self.out_dir = out_dir
        self.every = max(1, int(every))

    def _write(self, state):
        path = os.path.join(self.out_dir, f"fields_{state.step_index}.vtk")
        vtkio.write_vtk(
            path, state.mesh,
            point_scalars={
                "orientation": state.s.values,
                "phase": state.phi.values,
                "chemical_potential": state.mu.values,
            },
            point_vectors={"director": state.n.values},
            title=f"droplet state at t={state.time:g}",
        )

    def on_start(self, state, energy_report):
        self._write(state)

    def on_step(self, state, report):
        if state.step_index % self.every == 0:
            self._write(state)

    def on_finish(self, state):
        if state.step_index % self.every != 0:
            self._write(state)


class FinalStateSink:
    def __init__(self, path):
        self.path = path

    def on_finish(self, state):
        np.savez(
            self.path,
            s=state.s.values, n=state.n.values, phi=state.phi.values,
            mu=state.mu.values, time=state.time, step_index=state.step_index,
        )


def run_scenario(cfg: cfgmod.ScenarioConfig, out_dir: str | None = None):
    """Build and run a scenario; returns (final_state, exit_code)."""
    problem = cfgmod.build_problem(cfg)
    out = out_dir or problem.config.output.get("dir", "out/run")
    os.makedirs(out, exist_ok=True)

    resolved = problem.config.to_dict()
    resolved["weights"]["eps"] = problem.weights.eps
    resolved["output"]["dir"] = out
    resolved["output"]["snapshot_every"] = problem.snapshot_every
    with open(os.path.join(out, "config.yaml"), "w", encoding="utf-8") as fh:
        yaml.safe_dump(resolved, fh, sort_keys=False)

    sinks = [
        EnergyCSVSink(os.path.join(out, cfg.output.get("energy_log", "energy.csv"))),
        SnapshotSink(out, problem.snapshot_every),
        FinalStateSink(os.path.join(out, "final_state.npz")),
    ]
    try:
        final = sv.run(
            problem.ops, problem.initial, problem.weights, problem.scheme,
            problem.bc, sinks,
        )
    except sv.StepError as exc:
        print(f"simulation aborted: {exc}", file=sys.stderr)
        return None, 1
    return final, 0


def load_state(path, mesh):
    """Load a final-state archive back into a PhaseState."""
    data = np.load(path)
    return sv.make_state(
        mesh, data["s"], data["n"], data["phi"], data["mu"],
        time=float(data["time"]), step_index=int(data["step_index"]),
    )


def _cmd_simulate(args) -> int:
    preset_cfg = cfgmod.preset(args.preset) if args.preset else None
    file_data = cfgmod.load_config_file(args.config) if args.config else None
    if preset_cfg is None and file_data is None:
        print("simulate requires --preset and/or --config", file=sys.stderr)
        return 2
    cfg = cfgmod.merge_config(preset_cfg, file_data, args.set or ())
    _, code = run_scenario(cfg, args.out)
    return code


def _cmd_verify(args) -> int:
    outcomes = vf.run_suite(seed=args.seed, mutate=args.mutate)
    if args.report:
        vf.write_report(outcomes, args.report)
    failed = [oc for oc in outcomes if not oc.passed]
    for oc in outcomes:
        status = "PASS" if oc.passed else "FAIL"
        print(f"[{status}] {oc.name}: measured={oc.measured:.3e} "
              f"tolerance={oc.tolerance:.3e}")
    print(f"{len(outcomes) - len(failed)}/{len(outcomes)} checks passed")
    return 1 if failed else 0


def _cmd_mesh_audit(args) -> int:
    mesh = build_structured_mesh(args.nx, args.ny)
    report = audit_weak_acuteness(mesh, assembly.assemble_stiffness(mesh))
    print(
        f"mesh {args.nx}x{args.ny}: nodes={mesh.n_nodes} "
        f"elements={mesh.n_elements} h={mesh_size(mesh):.6g}"
    )
    print(
        f"weakly acute: {report.is_weakly_acute} "
        f"(min offdiagonal coupling {report.min_offdiag_kij:.3e})"
    )
    for i, j, k in report.violating_pairs[:10]:
        print(f"  violating pair ({i}, {j}): k_ij = {k:.6g}")
    return 0 if report.is_weakly_acute else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lcdroplet",
        description="Gradient-flow simulator for nematic liquid crystal droplets",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a droplet scenario")
    sim.add_argument("--preset", choices=cfgmod.PRESET_NAMES,
                     help="one of the built-in experiments")
    sim.add_argument("--config", help="YAML scenario file (overrides preset)")
    sim.add_argument("--set", action="append", metavar="KEY=VALUE",
                     help="override a single config key, e.g. mesh.nx=32")
    sim.add_argument("--out", help="output directory (default from config)")
    sim.set_defaults(func=_cmd_simulate)

    ver = sub.add_parser("verify", help="run the verification suite")
    ver.add_argument("--seed", type=int, default=0)
    ver.add_argument("--report", help="write a JSON-lines check report here")
    ver.add_argument("--mutate", help=argparse.SUPPRESS)
    ver.set_defaults(func=_cmd_verify)

    aud = sub.add_parser("mesh-audit", help="weak-acuteness audit of a structured mesh")
    aud.add_argument("--nx", type=int, required=True)
    aud.add_argument("--ny", type=int, required=True)
    aud.set_defaults(func=_cmd_mesh_audit)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
