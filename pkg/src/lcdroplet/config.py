"""Scenario configuration: presets, config files, and overrides.

A scenario is described by a nested document with six sections (mesh,
weights, scheme, initial, bc, output).  The four droplet experiments are
available as presets; a YAML config file and ``--set key=value`` strings
override preset values with precedence flag > file > preset.

The interfacial width may be the literal string ``"auto"``, meaning
3 h / sqrt(2) for the mesh actually used (3 cells across the diffuse
interface); overriding the mesh then rescales the width, while an
explicit number pins it.
"""
from __future__ import annotations

import copy
import math
from dataclasses import asdict, dataclass, field

import numpy as np
import yaml

from . import solver as sv
from .assembly import Operators, build_operators
from .energy import DoubleWell, ModelWeights
from .expressions import compile_expression
from .fields import normalized
from .mesh import TriMesh, build_structured_mesh, mesh_size

PRESET_NAMES = ("droplet_move", "droplet_corner", "droplet_collide", "droplet_split")

_FC_DEFAULT = [0.0, 0.0, 63.0]
_FE_DEFAULT = [0.0, 0.0, 57.0, 64.0 / 3.0, -16.0]


@dataclass
class ScenarioConfig:
    """Self-describing scenario document (plain nested data)."""

    mesh: dict = field(default_factory=dict)
    weights: dict = field(default_factory=dict)
    scheme: dict = field(default_factory=dict)
    initial: dict = field(default_factory=dict)
    bc: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return copy.deepcopy(asdict(self))

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        known = {"mesh", "weights", "scheme", "initial", "bc", "output"}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config sections: {sorted(unknown)}")
        return cls(**{k: copy.deepcopy(data.get(k, {})) for k in known})


def _base_config(name: str, t_final: float, w_chgd: float, w_wan: float,
                 w_was: float) -> ScenarioConfig:
    return ScenarioConfig(
        mesh={"nx": 64, "ny": 64, "rect": [[0.0, 0.0], [1.0, 1.0]]},
        weights={
            "w_erk": 1.0,
            "w_dw": 100.0,
            "w_chdw": 1.0,
            "w_chgd": w_chgd,
            "w_wan": w_wan,
            "w_was": w_was,
            "kappa": 1.0,
            "rho": 1.0,
            # interfacial width 3h/sqrt(2) at the experiment's h = sqrt(2)/64;
            # stored literally so mesh overrides do not alter the physics
            "eps": 3.0 / 64.0,
            "s_star": 0.750025,
            "dw": {"fc": list(_FC_DEFAULT), "fe": list(_FE_DEFAULT)},
        },
        scheme={
            "tau": 0.002,
            "t_final": t_final,
            "newton_abs_tol": 1e-15,
            "newton_res_tol": 1e-7,
            "newton_max_iter": 50,
            "linear_solver": "direct",
            "mass_lumping_timederiv": False,
        },
        initial={"s": "s_star"},
        bc={"s": "s_star"},
        output={"dir": f"out/{name}", "snapshot_every": "auto",
                "energy_log": "energy.csv"},
    )


def _tanh_droplet(cx: float, cy: float, r2: float) -> str:
    return (
        f"-tanh(((x - {cx})**2/{r2} + (y - {cy})**2/{r2} - 1)/(2*eps))"
    )


def preset(name: str) -> ScenarioConfig:
    """Exact parameter sets of the four droplet experiments."""
    if name == "droplet_move":
        cfg = _base_config(name, t_final=20.0, w_chgd=41.0, w_wan=20.0, w_was=20.0)
        cfg.initial["n"] = ["x - 0.26", "y - 0.25"]
        cfg.initial["phi"] = _tanh_droplet(0.25, 0.25, 0.02)
        cfg.bc["n"] = ["x - 0.85", "y - 0.85"]
        return cfg
    if name == "droplet_corner":
        cfg = _base_config(name, t_final=2.0, w_chgd=41.0, w_wan=20.0, w_was=20.0)
        cfg.initial["n"] = ["1", "0"]
        cfg.initial["phi"] = _tanh_droplet(0.5, 0.5, 0.02)
        cfg.bc["n"] = ["1", "0"]
        return cfg
    if name == "droplet_collide":
        cfg = _base_config(name, t_final=2.0, w_chgd=21.0, w_wan=10.0, w_was=10.0)
        cfg.initial["n"] = [
            "where(x <= 0.5, x - 0.3, -(x - 0.7))",
            "where(x <= 0.5, y - 0.5, -(y - 0.5))",
        ]
        cfg.initial["phi"] = (
            f"where(x <= 0.5, {_tanh_droplet(0.3, 0.5, 0.02)}, "
            f"{_tanh_droplet(0.7, 0.5, 0.02)})"
        )
        cfg.bc["n"] = ["1", "0"]
        return cfg
    if name == "droplet_split":
        cfg = _base_config(name, t_final=2.0, w_chgd=11.0, w_wan=20.0, w_was=20.0)
        cfg.initial["n"] = [
            "where(x <= 0.5, x - 0.35, -(x - 0.65))",
            "where(x <= 0.5, y - 0.5, -(y - 0.5))",
        ]
        cfg.initial["phi"] = _tanh_droplet(0.5, 0.5, 0.03)
        cfg.bc["n"] = [
            "where(x <= 0.5, x - 0.3, -(x - 0.7))",
            "where(x <= 0.5, y - 0.5, -(y - 0.5))",
        ]
        return cfg
    raise ValueError(
        f"unknown preset {name!r}; available presets: {', '.join(PRESET_NAMES)}"
    )


def load_config_file(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        data = yaml.safe_load(fh)
    if not isinstance(data, dict):
        raise ValueError(f"config file {path} must contain a mapping")
    return data


def _deep_merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, val in override.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def apply_overrides(cfg: ScenarioConfig, assignments) -> ScenarioConfig:
    """Apply ``section.key[.subkey]=value`` strings (highest precedence)."""
    data = cfg.to_dict()
    for item in assignments:
        if "=" not in item:
            raise ValueError(f"override {item!r} is not of the form key=value")
        key, raw = item.split("=", 1)
        value = yaml.safe_load(raw)
        parts = key.strip().split(".")
        node = data
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ValueError(f"cannot descend into {key!r}")
        node[parts[-1]] = value
    return ScenarioConfig.from_dict(data)


def merge_config(preset_cfg: ScenarioConfig | None, file_data: dict | None,
                 assignments=()) -> ScenarioConfig:
    base = preset_cfg.to_dict() if preset_cfg else ScenarioConfig().to_dict()
    if file_data:
        base = _deep_merge(base, file_data)
    return apply_overrides(ScenarioConfig.from_dict(base), assignments)


# ---------------------------------------------------------------------------
# problem construction
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Problem:
    """A fully resolved scenario, ready to run."""

    config: ScenarioConfig
    mesh: TriMesh
    ops: Operators
    weights: ModelWeights
    scheme: sv.SchemeConfig
    bc: sv.BoundaryConditions
    initial: sv.PhaseState
    snapshot_every: int


def _eval_vector(exprs, x, y, constants) -> np.ndarray:
    comps = []
    for src in exprs:
        fn = compile_expression(str(src), constants)
        comps.append(np.broadcast_to(np.asarray(fn(x, y), dtype=float), x.shape))
    return np.column_stack(comps)


def build_problem(cfg: ScenarioConfig) -> Problem:
    mesh_cfg = cfg.mesh
    rect = mesh_cfg.get("rect", [[0.0, 0.0], [1.0, 1.0]])
    mesh = build_structured_mesh(
        int(mesh_cfg.get("nx", 64)), int(mesh_cfg.get("ny", 64)),
        (tuple(rect[0]), tuple(rect[1])),
    )
    ops = build_operators(mesh)

    wcfg = dict(cfg.weights)
    eps = wcfg.get("eps", "auto")
    if eps == "auto":
        eps = 3.0 * mesh_size(mesh) / math.sqrt(2.0)
    dw_cfg = wcfg.get("dw", {})
    dw = DoubleWell(
        tuple(dw_cfg.get("fc", _FC_DEFAULT)), tuple(dw_cfg.get("fe", _FE_DEFAULT))
    )
    weights = ModelWeights(
        w_erk=float(wcfg.get("w_erk", 1.0)),
        w_dw=float(wcfg.get("w_dw", 1.0)),
        w_chdw=float(wcfg.get("w_chdw", 1.0)),
        w_chgd=float(wcfg.get("w_chgd", 1.0)),
        w_wan=float(wcfg.get("w_wan", 1.0)),
        w_was=float(wcfg.get("w_was", 1.0)),
        kappa=float(wcfg.get("kappa", 1.0)),
        rho=float(wcfg.get("rho", 1.0)),
        eps=float(eps),
        s_star=float(wcfg.get("s_star", 0.750025)),
        dw=dw,
    )

    scfg = dict(cfg.scheme)
    scheme = sv.SchemeConfig(
        tau=float(scfg.get("tau", 0.002)),
        t_final=float(scfg.get("t_final", 1.0)),
        newton_abs_tol=float(scfg.get("newton_abs_tol", 1e-15)),
        newton_res_tol=float(scfg.get("newton_res_tol", 1e-7)),
        newton_max_iter=int(scfg.get("newton_max_iter", 50)),
        linear_solver=str(scfg.get("linear_solver", "direct")),
        cg_tol=float(scfg.get("cg_tol", 1e-12)),
        cg_maxiter=int(scfg.get("cg_maxiter", 20000)),
        mass_lumping_timederiv=bool(scfg.get("mass_lumping_timederiv", False)),
    )

    consts = {"eps": weights.eps, "s_star": weights.s_star}
    x, y = mesh.nodes[:, 0], mesh.nodes[:, 1]

    icfg = cfg.initial
    for key in ("s", "n", "phi"):
        if key not in icfg:
            raise ValueError(f"initial.{key} missing from configuration")
    s0 = np.broadcast_to(
        np.asarray(compile_expression(str(icfg["s"]), consts)(x, y), dtype=float),
        x.shape,
    ).copy()
    phi0 = np.broadcast_to(
        np.asarray(compile_expression(str(icfg["phi"]), consts)(x, y), dtype=float),
        x.shape,
    ).copy()
    n_raw = _eval_vector(icfg["n"], x, y, consts)
    try:
        n0 = normalized(n_raw)
    except ValueError as exc:
        raise ValueError(f"initial director: {exc}") from exc

    bcfg = cfg.bc
    bnodes = mesh.boundary_nodes
    xb, yb = mesh.nodes[bnodes, 0], mesh.nodes[bnodes, 1]
    s_bc = np.broadcast_to(
        np.asarray(compile_expression(str(bcfg["s"]), consts)(xb, yb), dtype=float),
        xb.shape,
    ).copy()
    n_bc_raw = _eval_vector(bcfg["n"], xb, yb, consts)
    try:
        n_bc = normalized(n_bc_raw)
    except ValueError as exc:
        raise ValueError(f"boundary director: {exc}") from exc
    bc = sv.BoundaryConditions(bnodes, s_bc, bnodes, n_bc)

    # the discrete flow lives in the boundary-constrained spaces, so the
    # initial fields take the prescribed values on the boundary
    s0[bnodes] = s_bc
    n0[bnodes] = n_bc

    initial = sv.make_state(mesh, s0, n0, phi0)

    n_steps = int(round(scheme.t_final / scheme.tau))
    snap = cfg.output.get("snapshot_every", "auto")
    if snap == "auto":
        snap = max(1, n_steps // 12) if n_steps else 1
    return Problem(cfg, mesh, ops, weights, scheme, bc, initial, int(snap))
