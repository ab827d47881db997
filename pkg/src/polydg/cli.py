"""Batch driver: ``polydg {mesh,solve,convergence,temporal,stability,props}``.

Exit codes: 0 all gates pass, 1 configuration error, 2 numerical failure,
3 gate failure.
"""
import argparse
import hashlib
import json
import logging
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from fractions import Fraction
from importlib import resources

import numpy as np

from . import __version__
from . import mesh as meshmod
from .forms import ModelParams
from .solver import SolverError
from .space import build_space
from .stepper import stability_constant, write_history_csv
from . import verify

log = logging.getLogger("polydg")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_GATE = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


def _number(x, name):
    try:
        return float(Fraction(x)) if isinstance(x, str) else float(x)
    except (ValueError, ZeroDivisionError, TypeError):
        raise ConfigError(f"field '{name}': cannot parse {x!r} as a number")


@dataclass
class RunConfig:
    command: str = "solve"
    example: int = 1
    family: str = "nonconvex"
    h: list = field(default_factory=lambda: [0.25])
    mesh_seed: int = 0
    lloyd_iters: int = 20
    k: int = 1
    theta: float = 0.25
    penalty: float = None
    tau: list = None
    T: float = 1.0
    params: dict = field(default_factory=lambda: asdict(ModelParams()))
    tol: float = 1e-10
    seed: int = 0
    trials: int = 1000
    zero_source: bool = False
    gates: dict = field(default_factory=dict)
    out: str = "polydg-out"

    def validate(self):
        if not 0 <= self.theta <= 0.5:
            raise ConfigError(f"field 'theta': {self.theta} not in [0, 1/2]")
        if self.k not in (1, 2, 3):
            raise ConfigError(f"field 'k': {self.k} not in {{1, 2, 3}}")
        if self.example not in (1, 2):
            raise ConfigError(f"field 'example': {self.example} not in {{1, 2}}")
        try:
            ModelParams(**self.params)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"field 'params': {exc}")
        return self


def parse_config(data):
    known = {f.name for f in fields(RunConfig)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown field(s): {', '.join(sorted(unknown))}")
    cfg = RunConfig(**data)
    cfg.h = [_number(x, "h") for x in (cfg.h if isinstance(cfg.h, list) else [cfg.h])]
    if cfg.tau is not None:
        cfg.tau = [_number(x, "tau") for x in (cfg.tau if isinstance(cfg.tau, list) else [cfg.tau])]
    cfg.theta = _number(cfg.theta, "theta")
    cfg.T = _number(cfg.T, "T")
    return cfg.validate()


def preset_names():
    return sorted(p.name for p in resources.files("polydg.presets").iterdir() if p.name.endswith(".json"))


def load_config(path):
    if not os.path.isfile(path):
        name = os.path.basename(path)
        if not name.endswith(".json"):
            name += ".json"
        res = resources.files("polydg.presets") / name
        if not res.is_file():
            raise ConfigError(f"config {path!r} not found (presets: {', '.join(preset_names())})")
        text = res.read_text()
    else:
        with open(path) as fh:
            text = fh.read()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}")
    return parse_config(data)


class Manifest:
    def __init__(self, cfg):
        self.cfg = cfg
        self.stages = {}
        blob = json.dumps(asdict(cfg), sort_keys=True).encode()
        self.config_hash = hashlib.sha256(blob).hexdigest()

    def stage(self, name):
        manifest = self

        class _Timer:
            def __enter__(self):
                self.t = time.perf_counter()

            def __exit__(self, *exc):
                manifest.stages[name] = time.perf_counter() - self.t
        return _Timer()

    def write(self, out):
        with open(os.path.join(out, "manifest.json"), "w") as fh:
            json.dump({"config_hash": self.config_hash, "version": __version__,
                       "stages_seconds": self.stages}, fh, indent=2, sort_keys=True, default=_plain)
        with open(os.path.join(out, "config.json"), "w") as fh:
            json.dump(asdict(self.cfg), fh, indent=2, sort_keys=True)


def _plain(obj):
    # numpy scalars and arrays leak into verdicts
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not serializable: {type(obj).__name__}")


def _gate(value, bounds):
    return bounds is None or (value is not None and bounds[0] <= value <= bounds[1])


def _write(out, name, text):
    with open(os.path.join(out, name), "w", newline="") as fh:
        fh.write(text)


def _verdict(out, gates):
    ok = all(g["passed"] for g in gates.values())
    with open(os.path.join(out, "verdict.json"), "w") as fh:
        json.dump({"passed": bool(ok), "gates": gates}, fh, indent=2, sort_keys=True, default=_plain)
    return EXIT_OK if ok else EXIT_GATE


def _params(cfg):
    return ModelParams(**cfg.params)


def cmd_mesh(args):
    family = args.family
    m = meshmod.generate(family, args.n, seed=args.seed, lloyd_iters=args.lloyd_iters)
    data = m.to_json()
    data.update({"family": m.family, "domain": m.domain, "seed": args.seed})
    q = meshmod.quality_report(m)
    data["quality"] = asdict(q)
    out = args.out or f"{family}-{args.n}.json"
    with open(out, "w") as fh:
        json.dump(data, fh, default=_plain)
    print(f"{family}: {m.n_cells} cells, {len(m.edges)} edges, h={q.h:.6g}, "
          f"rho={q.quasi_uniformity_ratio:.4f} -> {out}")
    return EXIT_OK


def _convergence(cfg, man, threads):
    case = verify.CASES[str(cfg.example)]
    tau = cfg.tau[0] if cfg.tau else None
    with man.stage("convergence"):
        if threads > 1 and len(cfg.h) > 1:
            tau = tau or verify.default_tau(min(cfg.h), cfg.k)

            def one(h):
                return verify.spatial_convergence(case, cfg.family, cfg.k, cfg.theta, [h], tau,
                                                  cfg.T, _params(cfg), cfg.penalty, cfg.tol,
                                                  cfg.mesh_seed, cfg.lloyd_iters)
            with ThreadPoolExecutor(threads) as ex:
                parts = list(ex.map(one, cfg.h))
            table = verify.ConvergenceTable("h", cfg.h, [p.l2[0] for p in parts],
                                            [p.h1[0] for p in parts], dict(parts[0].meta, tau=tau))
        else:
            table = verify.spatial_convergence(case, cfg.family, cfg.k, cfg.theta, cfg.h, tau,
                                               cfg.T, _params(cfg), cfg.penalty, cfg.tol,
                                               cfg.mesh_seed, cfg.lloyd_iters)
    return table


def cmd_convergence(cfg, man, out, threads):
    table = _convergence(cfg, man, threads)
    _write(out, "table.csv", table.to_csv())
    _write(out, "table.md", table.to_markdown())
    print(table.to_markdown())
    l2o, h1o = table.finest_orders()
    gates = {
        "l2_order": {"value": l2o, "bounds": cfg.gates.get("l2_order"),
                     "passed": _gate(l2o, cfg.gates.get("l2_order"))},
        "h1_order": {"value": h1o, "bounds": cfg.gates.get("h1_order"),
                     "passed": _gate(h1o, cfg.gates.get("h1_order"))},
    }
    return _verdict(out, gates)


def cmd_temporal(cfg, man, out, threads):
    case = verify.CASES[str(cfg.example)]
    with man.stage("mesh"):
        m = meshmod.family_for_h(cfg.family, cfg.h[0], seed=cfg.mesh_seed, lloyd_iters=cfg.lloyd_iters)
    with man.stage("temporal"):
        table = verify.temporal_convergence(case, m, cfg.k, cfg.theta, cfg.tau, cfg.T,
                                            _params(cfg), cfg.penalty, cfg.tol)
    _write(out, "table.csv", table.to_csv())
    _write(out, "table.md", table.to_markdown())
    print(table.to_markdown())
    bounds = cfg.gates.get("l2_order")
    tau_max = _number(cfg.gates.get("tau_max", 1.0), "gates.tau_max")
    checked = [o for o, t in zip(table.l2_orders, table.steps) if o is not None and t <= tau_max]
    gates = {"l2_orders": {"value": checked, "bounds": bounds,
                           "passed": all(_gate(o, bounds) for o in checked)}}
    return _verdict(out, gates)


def cmd_solve(cfg, man, out, threads):
    case = verify.CASES[str(cfg.example)]
    with man.stage("mesh"):
        m = meshmod.family_for_h(cfg.family, cfg.h[0], seed=cfg.mesh_seed, lloyd_iters=cfg.lloyd_iters)
    tau = cfg.tau[0] if cfg.tau else verify.default_tau(cfg.h[0], cfg.k)
    with man.stage("solve"):
        space, res = verify.solve_case(case, m, cfg.k, cfg.theta, tau, cfg.T, _params(cfg),
                                       cfg.penalty, cfg.tol, zero_source=cfg.zero_source)
    write_history_csv(os.path.join(out, "history.csv"), res)
    res.final.save(os.path.join(out, "final_field.json"), space, step=len(res.times) - 1)
    m.save(os.path.join(out, "mesh.json"))
    gates = {}
    if not cfg.zero_source:
        l2, h1 = verify.final_errors(space, res.final, case, res.times[-1])
        print(f"L2 error {l2:.5e}  H1 error {h1:.5e}")
        gates["errors"] = {"value": [l2, h1], "passed": True}
    C1 = stability_constant(_params(cfg).gamma, cfg.T)
    bound = max(res.l2_history) <= C1 * res.l2_history[0]
    gates["stability"] = {"value": max(res.l2_history) / res.l2_history[0], "bounds": [0, C1],
                          "passed": bound or not cfg.zero_source}
    return _verdict(out, gates)


def cmd_stability(cfg, man, out, threads):
    case = verify.CASES[str(cfg.example)]
    with man.stage("mesh"):
        m = meshmod.family_for_h(cfg.family, cfg.h[0], seed=cfg.mesh_seed, lloyd_iters=cfg.lloyd_iters)
    tau = cfg.tau[0] if cfg.tau else 0.01
    with man.stage("solve"):
        res, C1, ok = verify.stability_run(m, cfg.k, cfg.theta, tau, cfg.T, _params(cfg), case, cfg.penalty)
    write_history_csv(os.path.join(out, "history.csv"), res)
    hist = res.l2_history
    ratio = max(hist) / hist[0]
    tail = hist[len(hist) // 4:]
    decreasing = all(b <= a for a, b in zip(tail[:-1], tail[1:]))
    print(f"max ||u^n|| / ||u^0|| = {ratio:.6f}, C1 = {C1:.6g}, eventually decreasing: {decreasing}")
    gates = {"bound": {"value": ratio, "bounds": [0, C1], "passed": ok},
             "eventually_decreasing": {"value": decreasing, "passed": decreasing}}
    return _verdict(out, gates)


def cmd_props(cfg, man, out, threads):
    with man.stage("props"):
        rep = verify.lemma_property_suite(cfg.seed, cfg.trials)
    with open(os.path.join(out, "verdict.json"), "w") as fh:
        json.dump(rep.to_json(), fh, indent=2, sort_keys=True, default=_plain)
    for name, r in rep.results.items():
        print(f"{name}: {'PASS' if r['passed'] else 'FAIL'}")
    return EXIT_OK if rep.passed else EXIT_GATE


COMMANDS = {"solve": cmd_solve, "convergence": cmd_convergence, "temporal": cmd_temporal,
            "stability": cmd_stability, "props": cmd_props}


def build_parser():
    p = argparse.ArgumentParser(prog="polydg", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON run configuration or preset name (e.g. table1.json)")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--seed", type=int, help="RNG seed")
        sp.add_argument("--threads", type=int, default=1, help="parallel mesh levels")
        sp.add_argument("--tol", type=float, help="relative solver tolerance")
        sp.add_argument("-v", "--verbose", action="store_true")

    m = sub.add_parser("mesh", help="generate a mesh and write it as JSON")
    m.add_argument("--family", required=True, choices=["nonconvex", "voronoi", "mixed", "disk", "quad"])
    m.add_argument("--n", type=int, required=True, help="sub-quads per side or number of seeds")
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--lloyd-iters", type=int, default=None)
    m.add_argument("--out")
    m.add_argument("-v", "--verbose", action="store_true")

    for name in ("solve", "convergence", "temporal", "props"):
        common(sub.add_parser(name))
    props = sub.choices["props"]
    props.add_argument("--trials", type=int)
    st = sub.add_parser("stability", help="zero-source L2-norm history against the stability bound")
    common(st)
    st.add_argument("--example", type=int, default=None)
    st.add_argument("--zero-source", action="store_true", default=True)
    st.add_argument("--tau", type=str)
    st.add_argument("--h", type=str)
    st.add_argument("--k", type=int)
    return p


def resolve(args):
    if getattr(args, "config", None):
        cfg = load_config(args.config)
    elif args.command == "stability":
        cfg = load_config("fig5.json")
    else:
        cfg = RunConfig()
    cfg.command = args.command
    if args.seed is not None:
        cfg.seed = args.seed
    if args.tol is not None:
        cfg.tol = args.tol
    if getattr(args, "trials", None) is not None:
        cfg.trials = args.trials
    if args.command == "stability":
        if args.example is not None:
            cfg.example = args.example
        if args.tau is not None:
            cfg.tau = [_number(args.tau, "tau")]
        if args.h is not None:
            cfg.h = [_number(args.h, "h")]
        if args.k is not None:
            cfg.k = args.k
        cfg.zero_source = True
    if args.out:
        cfg.out = args.out
    return cfg.validate()


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "mesh":
        return cmd_mesh(args)
    try:
        cfg = resolve(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    os.makedirs(cfg.out, exist_ok=True)
    print(json.dumps(asdict(cfg), sort_keys=True))
    man = Manifest(cfg)
    try:
        code = COMMANDS[args.command](cfg, man, cfg.out, max(1, args.threads))
    except SolverError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        code = EXIT_NUMERICAL
    man.write(cfg.out)
    return code


if __name__ == "__main__":
    sys.exit(main())
