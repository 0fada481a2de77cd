"""Command line front end: JSON config in, deterministic CSV tables out.

    beamnet check          --config run.json --out DIR [--strict]
    beamnet spectrum       --config run.json --out DIR [--num-eigs N]
    beamnet evolve         --config run.json --out DIR --kind wave|heat|damped [--kappa K]
    beamnet heat-analysis  --config run.json --out DIR
    beamnet square-compare --config run.json --out DIR

Exit status is 0 on success, 1 on invalid input or a failed check and 2 on a
numerical failure; errors are also written to stderr as one JSON object.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import sys
from pathlib import Path

import numpy as np

from .conditions import make_conditions, preset, validate
from .discretization import Mesh, assemble, evaluation_matrix, uniform_points
from .evolution import damped_evolve, eigenmode, heat_evolve, wave_evolve
from .fields import field_from_descriptor
from .graph import build_graph
from .numerics import ConvergenceError, NotPositiveDefiniteError, asymmetry
from .semigroup import (norm_2_to_inf, positivity_probe, resolved_floor, semigroup_trace,
                        square_comparison, submarkov_onset, ultracontractivity_exponent,
                        wentzell_residual)
from .traces import EdgewisePolynomial, greens_identity_terms

SYMMETRY_TOL = 1e-10
GREEN_TOL = 1e-10


class ConfigError(ValueError):
    pass


class CheckFailed(Exception):
    pass


@dataclasses.dataclass
class RunConfig:
    order_j: int
    edges: list
    conditions: dict
    mesh: dict
    num_eigs: int = 10
    times: dict = dataclasses.field(default_factory=lambda: {"t0": 0.0, "t1": 1.0, "samples": 11})
    initial: dict = dataclasses.field(default_factory=lambda: {"f": None, "g": None})
    kappa: float = 0.0
    analysis: dict = dataclasses.field(default_factory=dict)
    square: dict = dataclasses.field(default_factory=dict)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config fields: {', '.join(unknown)}")
        missing = sorted(f.name for f in dataclasses.fields(cls)
                         if f.default is dataclasses.MISSING and f.default_factory is dataclasses.MISSING
                         and f.name not in data)
        if missing:
            raise ConfigError(f"missing config fields: {', '.join(missing)}")
        cfg = cls(**data)
        cfg._check()
        return cfg

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def _check(self):
        if not isinstance(self.order_j, int) or self.order_j < 1:
            raise ConfigError("order_j must be a positive integer")
        if not isinstance(self.edges, list) or not self.edges:
            raise ConfigError("edges must be a nonempty list")
        if "elements_per_edge" not in self.mesh or set(self.mesh) != {"elements_per_edge"}:
            raise ConfigError("mesh must be {\"elements_per_edge\": n}")
        unknown = set(self.times) - {"t0", "t1", "samples"}
        if unknown:
            raise ConfigError(f"unknown times fields: {', '.join(sorted(unknown))}")
        unknown = set(self.initial) - {"f", "g"}
        if unknown:
            raise ConfigError(f"unknown initial fields: {', '.join(sorted(unknown))}")
        unknown = set(self.analysis) - {"fit_t0", "fit_t1", "fit_samples", "wentzell_modes", "grid_points"}
        if unknown:
            raise ConfigError(f"unknown analysis fields: {', '.join(sorted(unknown))}")
        unknown = set(self.square) - {"elements_per_edge", "num_modes", "v1"}
        if unknown:
            raise ConfigError(f"unknown square fields: {', '.join(sorted(unknown))}")

    # ------------------------------------------------------------ builders

    def graph(self):
        return build_graph(self.edges)

    def vertex_conditions(self, graph):
        c = dict(self.conditions)
        if "preset" in c:
            extra = set(c) - {"preset", "v1"}
            if extra:
                raise ConfigError(f"unknown condition fields: {', '.join(sorted(extra))}")
            return preset(c["preset"], graph, self.order_j, v1=c.get("v1"))
        extra = set(c) - {"Yd", "Ys", "S", "D", "Pi"}
        if extra:
            raise ConfigError(f"unknown condition fields: {', '.join(sorted(extra))}")
        dim = 2 * self.order_j * graph.num_edges

        def basis(key):
            vecs = c.get(key) or []
            return np.array(vecs, dtype=float).T if vecs else np.zeros((dim, 0))

        return make_conditions(self.order_j, basis("Yd"), basis("Ys"), S=c.get("S"), D=c.get("D"),
                               Pi=c.get("Pi"), dim=dim)

    def condition_label(self) -> str:
        return self.conditions.get("preset", "explicit")

    def time_grid(self) -> np.ndarray:
        t = {"t0": 0.0, "t1": 1.0, "samples": 11, **self.times}
        if int(t["samples"]) < 1:
            raise ConfigError("samples must be >= 1")
        return np.linspace(float(t["t0"]), float(t["t1"]), int(t["samples"]))


# ---------------------------------------------------------------- output


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_table(path: Path, comment: str, header, rows):
    with open(path, "w", newline="") as fh:
        fh.write(f"# {comment}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


class Context:
    def __init__(self, cfg: RunConfig, out: Path):
        self.cfg = cfg
        self.out = out
        self.graph = cfg.graph()
        self.conditions = cfg.vertex_conditions(self.graph)
        self.mesh = Mesh.uniform(self.graph, cfg.mesh["elements_per_edge"])
        self._op = None

    @property
    def op(self):
        if self._op is None:
            self._op = assemble(self.graph, self.conditions, self.mesh)
        return self._op

    def comment(self, **extra) -> str:
        parts = [f"j={self.cfg.order_j}", f"mesh={json.dumps(self.cfg.mesh['elements_per_edge'])}",
                 f"preset={self.cfg.condition_label()}"]
        parts += [f"{k}={v}" for k, v in extra.items()]
        return " ".join(parts)

    def write(self, name, header, rows, **extra):
        write_table(self.out / name, self.comment(**extra), header, rows)

    def data(self, key):
        desc = self.cfg.initial.get(key)
        if desc is None or desc.get("shape") == "zero":
            return None
        if desc.get("shape") == "eigenmode":
            return eigenmode(self.op, int(desc.get("k", 0))) * float(desc.get("amplitude", 1.0))
        try:
            return field_from_descriptor(self.graph, desc)
        except TypeError as exc:
            raise ConfigError(f"bad initial-data descriptor {desc}: {exc}") from None

    def grid(self):
        per_edge = int(self.cfg.analysis.get("grid_points", 129))
        points, _ = uniform_points(self.graph, per_edge)
        return evaluation_matrix(self.op, points) @ self.op.Z


# ------------------------------------------------------------ subcommands


def _green_selftest(graph, j, trials=20, seed=0):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        deg = 2 * j + 1
        u = EdgewisePolynomial(graph, rng.standard_normal((graph.num_edges, deg + 1)))
        v = EdgewisePolynomial(graph, rng.standard_normal((graph.num_edges, deg + 1)))
        bulk, en, bd = greens_identity_terms(u, v, j)
        scale = max(abs(bulk), abs(en), abs(bd), 1.0)
        worst = max(worst, abs(bulk - en - bd) / scale)
    return worst


def cmd_check(ctx: Context, args):
    report = validate(ctx.conditions)
    rows = [(k, report.flags[k], report.violations[k]) for k in report.flags]
    structural = report.structural_ok
    if structural:
        asym = asymmetry(ctx.op.A_red)
        rows.append(("A_red_symmetric", asym <= SYMMETRY_TOL, asym))
    else:
        asym = math.nan
        rows.append(("A_red_symmetric", False, asym))
    green = _green_selftest(ctx.graph, ctx.cfg.order_j)
    rows.append(("greens_identity", green <= GREEN_TOL, green))
    ctx.write("check.csv", ["item", "ok", "value"], rows)
    ok = structural and green <= GREEN_TOL
    if args.strict:
        ok = ok and all(r[1] for r in rows)
    if not ok:
        failed = [r[0] for r in rows if not r[1]]
        raise CheckFailed(f"check failed: {', '.join(failed)}")


def cmd_spectrum(ctx: Context, args):
    op = ctx.op
    basis = op.eigenbasis()
    n = min(args.num_eigs if args.num_eigs is not None else ctx.cfg.num_eigs, len(basis))
    scale = max(np.linalg.norm(op.A_red), 1e-300)
    rows = []
    for k in range(n):
        phi = basis.vectors[:, k]
        lam = basis.values[k]
        res = np.linalg.norm(op.A_red @ phi - lam * (op.M_red @ phi)) / scale
        rows.append((k, lam, res))
    ctx.write("spectrum.csv", ["index", "eigenvalue", "residual"], rows)


def cmd_evolve(ctx: Context, args):
    times = ctx.cfg.time_grid()
    f, g = ctx.data("f"), ctx.data("g")
    kappa = args.kappa if args.kappa is not None else ctx.cfg.kappa
    if args.kind == "wave":
        traj = wave_evolve(ctx.op, f, g, times)
    elif args.kind == "heat":
        traj = heat_evolve(ctx.op, f, times)
    else:
        traj = damped_evolve(ctx.op, f, g, float(kappa), times)
    ev = ctx.grid()
    rows = []
    for s in traj:
        u = ev @ s.c
        rows.append((s.t, s.K, s.P, s.E, float(u.min()), float(u.max()), float(np.linalg.norm(s.theta))))
    extra = {"kind": args.kind}
    if args.kind == "damped":
        extra["kappa"] = repr(float(kappa))
    ctx.write("trajectory.csv", ["t", "K", "P", "E", "min_u", "max_u", "theta_norm"], rows, **extra)


def cmd_heat_analysis(ctx: Context, args):
    op = ctx.op
    times = ctx.cfg.time_grid()
    if np.any(times <= 0):
        raise ConfigError("heat-analysis needs strictly positive times (set t0 > 0)")
    per_edge = int(ctx.cfg.analysis.get("grid_points", 129))
    f = ctx.data("f")
    probe = positivity_probe(op, f, times, per_edge) if f is not None else None
    rows = []
    for i, t in enumerate(times):
        min_u = probe[i].min_u if probe else math.nan
        flag = probe[i].submarkov if probe else ""
        rows.append((t, semigroup_trace(op, t), norm_2_to_inf(op, t, per_edge), min_u, flag))
    ctx.write("heat.csv", ["t", "trace", "norm2inf", "min_u", "submarkov_flag"], rows)

    an = ctx.cfg.analysis
    floor = resolved_floor(op)
    fit_t0 = float(an.get("fit_t0", floor))
    fit_t1 = float(an.get("fit_t1", max(100 * fit_t0, 1e-3)))
    fit_times = np.geomspace(fit_t0, fit_t1, int(an.get("fit_samples", 12)))
    fit = ultracontractivity_exponent(op, fit_times, per_edge)
    summary = [("alpha", fit.alpha), ("prefactor", fit.prefactor), ("bound", fit.bound),
               ("fit_t0", fit_t0), ("fit_t1", fit_t1), ("resolved_floor", floor)]
    if probe:
        onset = submarkov_onset(probe)
        summary.append(("submarkov_onset", onset if onset is not None else "none"))
    ctx.write("summary.csv", ["quantity", "value"], summary)

    if op.conditions.d_d:
        modes = min(int(an.get("wentzell_modes", 5)), op.size)
        values = op.eigenbasis().values
        ctx.write("wentzell.csv", ["index", "eigenvalue", "residual"],
                  [(k, values[k], wentzell_residual(op, k)) for k in range(modes)])


def cmd_square_compare(ctx: Context, args):
    sq = ctx.cfg.square
    meshes = sq.get("elements_per_edge", [ctx.cfg.mesh["elements_per_edge"]])
    if not isinstance(meshes, list):
        meshes = [meshes]
    rows = []
    for n in meshes:
        for r in square_comparison(ctx.graph, n, int(sq.get("num_modes", 4)), v1=sq.get("v1")):
            rows.append((json.dumps(n), r.k, r.lam_B, r.lam_B_squared, r.lam_A, r.gap, r.kernel))
    ctx.write("square.csv", ["mesh", "k", "lambda_B", "lambda_B_squared", "lambda_A", "gap", "kernel"], rows)


COMMANDS = {
    "check": cmd_check,
    "spectrum": cmd_spectrum,
    "evolve": cmd_evolve,
    "heat-analysis": cmd_heat_analysis,
    "square-compare": cmd_square_compare,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="beamnet", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, type=Path)
        p.add_argument("--out", type=Path, default=Path("."))
        p.add_argument("--num-eigs", type=int, default=None)
        p.add_argument("--t0", type=float, default=None)
        p.add_argument("--t1", type=float, default=None)
        p.add_argument("--samples", type=int, default=None)
        p.add_argument("--kind", choices=("wave", "heat", "damped"), default="wave")
        p.add_argument("--kappa", type=float, default=None)
        p.add_argument("--strict", action="store_true")
    return parser


def _error(kind: str, message: str, code: int) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": message}, sort_keys=True) + "\n")
    return code


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig.from_json(Path(args.config).read_text())
        for key in ("t0", "t1", "samples"):
            if getattr(args, key) is not None:
                cfg.times[key] = getattr(args, key)
        args.out.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command](Context(cfg, args.out), args)
    except CheckFailed as exc:
        return _error("check", str(exc), 1)
    except (ConvergenceError, NotPositiveDefiniteError, np.linalg.LinAlgError) as exc:
        return _error("numerical", str(exc), 2)
    except (ValueError, KeyError, TypeError, OSError) as exc:
        return _error("validation", str(exc), 1)
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
