"""``cartan-lab`` command line: one subcommand per experiment, INI configs, batches.

Exit status: 0 when every asserted invariant holds, 1 on an invariant
failure, 2 when the configuration or an input file does not validate.
"""
from __future__ import annotations

import argparse
import configparser
import datetime as _dt
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import __version__
from .cartan import (BallCover, Power, cartan_bound, cartan_cover, disjointness_violations,
                     gorin_budget_sum, gorin_cover, verify_cartan)
from .errors import ConfigError
from .functions import DiscreteMeasure, function_from_dict, normalize_m1m2
from .geometry import (DSet, builtin_maps, certify, embed, generate_ifs_set, maps_from_dicts,
                       regularity_constants, resolvable_scales)
from .io import dumps, read_json, write_csv, write_json
from .multidim import (HolomorphicMapSample, ellipticity_probe, envelope_check, gallery,
                       half_ball_sample, multidim_cartan)
from .protocols import (calibrate_validate, calibration_batch, envelope, mcol1_model,
                        remez_model, validation_batch)
from .sampling import GridSpec
from .trace import (RemezExperiment, bmo_norm, distribution_check, dyadic_ball_family,
                    fit_constant_c, reverse_holder, reverse_holder_bound, sharpness_experiment)

EXIT_OK, EXIT_FAIL, EXIT_SCHEMA = 0, 1, 2
PROTOCOL_COMMANDS = ("remez", "mcol1")


@dataclass
class Outcome:
    result: dict
    violations: list = field(default_factory=list)
    curves: dict = field(default_factory=dict)  # name -> (header, rows)
    timings: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return not self.violations


class _Timer:
    def __init__(self, timings: dict, name: str):
        self.timings, self.name = timings, name

    def __enter__(self):
        self.t0 = time.perf_counter()

    def __exit__(self, *exc):
        self.timings[self.name] = time.perf_counter() - self.t0


# ------------------------------------------------------------------ argument parsing

def parse_float(text) -> float:
    """Float that also accepts the names ``e``, ``pi`` and ``inf``."""
    named = {"e": math.e, "pi": math.pi, "inf": math.inf, "-inf": -math.inf}
    key = str(text).strip().lower()
    return named[key] if key in named else float(key)


def parse_floats(text: str) -> list[float]:
    return [parse_float(v) for v in str(text).split(",") if v.strip()]


def parse_point(text: str) -> np.ndarray:
    """Real coordinates ``x1,y1[,x2,y2,...]``."""
    vals = parse_floats(text)
    if len(vals) % 2:
        raise ConfigError(f"point {text!r} needs an even number of real coordinates")
    return np.array(vals)


def parse_lambda_grid(text: str) -> np.ndarray:
    vals = parse_floats(text)
    if len(vals) != 3 or vals[2] < 2 or vals[2] != int(vals[2]):
        raise ConfigError("lambda grid needs 'start,stop,count' with count >= 2")
    return np.linspace(vals[0], vals[1], int(vals[2]))


def _load(path, loader: Callable[[dict], object], what: str):
    try:
        data = read_json(path)
    except FileNotFoundError as exc:
        raise ConfigError(f"{what} file {path} does not exist") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{what} file {path} is not valid JSON: {exc}") from exc
    try:
        return loader(data)
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"{what} file {path} does not match the schema: {exc!r}") from exc


def load_set(path) -> DSet:
    return _load(path, DSet.from_dict, "set")


def load_function(path):
    return _load(path, function_from_dict, "function")


def load_measure(path) -> DiscreteMeasure:
    return _load(path, DiscreteMeasure.from_dict, "measure")


def load_cover(path) -> BallCover:
    return _load(path, BallCover.from_dict, "cover")


def load_map(args) -> HolomorphicMapSample:
    if getattr(args, "map", None):
        return _load(args.map, HolomorphicMapSample.from_dict, "map")
    if getattr(args, "gallery", None):
        return gallery(args.gallery)
    raise ConfigError("give --map FILE or --gallery NAME")


def _require(args, *names):
    missing = [n for n in names if getattr(args, n, None) is None]
    if missing:
        raise ConfigError("missing required option(s): "
                          + ", ".join("--" + n.replace("_", "-") for n in missing))


# ------------------------------------------------------------------ geometry

def cmd_gen_set(args) -> Outcome:
    _require(args, "ifs", "depth")
    spec = args.ifs
    maps = (_load(spec, lambda d: maps_from_dicts(d["maps"] if isinstance(d, dict) else d), "IFS")
            if spec.endswith(".json") else builtin_maps(spec))
    timings: dict = {}
    with _Timer(timings, "generate"):
        set_ = generate_ifs_set(maps, args.depth)
        if args.embed:
            set_ = embed(set_, args.embed)
    if args.certify:
        with _Timer(timings, "certify"):
            set_ = certify(set_)
    violations = []
    if abs(set_.total_mass - 1.0) > 1e-12:
        violations.append(f"natural measure has total mass {set_.total_mass}")
    return Outcome(set_.to_dict(), violations, timings=timings)


def cmd_regularity(args) -> Outcome:
    _require(args, "set")
    set_ = load_set(args.set)
    scales = parse_floats(args.scales) if args.scales else resolvable_scales(set_)
    rep = regularity_constants(set_, scales, args.max_centers)
    violations = []
    if not (math.isfinite(rep.a) and rep.a > 0 and math.isfinite(rep.b) and rep.b > 0):
        violations.append(f"regularity constants a={rep.a}, b={rep.b} are not finite and positive")
    return Outcome(rep.to_dict(), violations)


# ------------------------------------------------------------------ Cartan

def cmd_cover(args) -> Outcome:
    _require(args, "measure")
    mu = load_measure(args.measure)
    timings: dict = {}
    violations = []
    if args.cartan:
        H, d = parse_floats(args.cartan)
        with _Timer(timings, "cartan_cover"):
            cover = cartan_cover(mu, H, d, mass=args.mass)
        result = cover.to_dict()
    else:
        _require(args, "majorant")
        phi = Power.parse(args.majorant)
        with _Timer(timings, "gorin_cover"):
            cover = gorin_cover(mu, phi, args.alpha, args.beta, args.gamma)
        result = cover.to_dict()
        result["gorin_budget_sum"] = gorin_budget_sum(cover, phi)
    overlaps = disjointness_violations(cover)
    result["disjointness_violations"] = [list(map(int, p)) for p in overlaps]
    if not cover.within_budget:
        violations.append(f"budget {cover.budget_used} exceeds {cover.budget_limit}")
    if overlaps:
        violations.append(f"{len(overlaps)} pairs of tau-balls overlap")
    return Outcome(result, violations, timings=timings)


def cmd_verify(args) -> Outcome:
    _require(args, "function", "cover", "grid")
    f = load_function(args.function)
    cover = load_cover(args.cover)
    if args.bound is None or str(args.bound).lower() == "cartan":
        try:
            bound = cartan_bound(float(cover.params["k"]), float(cover.params["H"]))
        except KeyError as exc:
            raise ConfigError("--bound is required unless the cover came from a Cartan run") from exc
    else:
        bound = parse_float(args.bound)
    timings: dict = {}
    with _Timer(timings, "verify"):
        rep = verify_cartan(f, cover, bound, GridSpec.parse(args.grid))
    violations = []
    if rep.violations:
        violations.append(f"{rep.extra['violation_count']} grid points fall below {bound}")
    if not cover.within_budget:
        violations.append("cover exceeds its budget")
    return Outcome(rep.to_dict(), violations, timings=timings)


# ------------------------------------------------------------------ trace

def cmd_bmo(args) -> Outcome:
    _require(args, "set", "function")
    set_, f = load_set(args.set), load_function(args.function)
    centers, radii = dyadic_ball_family(set_, args.max_centers, args.finest, args.coarsest)
    timings: dict = {}
    with _Timer(timings, "bmo_norm"):
        rep = bmo_norm(f, set_, centers, radii)
    violations = [] if math.isfinite(rep.bmo_norm) else ["bmo norm is not finite"]
    return Outcome(rep.to_dict(), violations, timings=timings)


def cmd_revholder(args) -> Outcome:
    _require(args, "set", "function", "x", "t")
    set_, f = load_set(args.set), load_function(args.function)
    p_list = parse_floats(args.p_list)
    rep = reverse_holder(f, set_, parse_point(args.x), args.t, p_list)
    result = rep.to_dict()
    violations = []
    ratios = [rec["ratio"] for rec in sorted(rep.records, key=lambda rec: rec["p"])]
    if 1.0 in p_list and rep.ratio(1.0) != 1.0:
        violations.append(f"ratio at p = 1 is {rep.ratio(1.0)}, not 1")
    if any(b < a * (1 - 1e-12) for a, b in zip(ratios, ratios[1:])):
        violations.append("ratio decreases in p")
    if args.c is not None:
        M1, M2 = normalize_m1m2(f, args.r)
        set_ = set_ if set_.reg_a is not None else certify(set_)
        bound = reverse_holder_bound(args.c, M1, M2, set_.reg_a, set_.reg_b, args.r,
                                     set_.dimension_d)
        result["bound"] = bound
        if math.inf in p_list and rep.ratio(math.inf) > bound:
            violations.append(f"sup ratio {rep.ratio(math.inf)} exceeds the bound {bound}")
    curve = (["p", "ratio"], [[rec["p"], rec["ratio"]] for rec in rep.records])
    return Outcome(result, violations, {"ratio": curve})


def cmd_distcheck(args) -> Outcome:
    _require(args, "set", "function", "x", "t", "c")
    set_, f = load_set(args.set), load_function(args.function)
    M1, M2 = normalize_m1m2(f, args.r)
    rep = distribution_check(f, set_, parse_point(args.x), args.t,
                             parse_lambda_grid(args.lambda_grid), args.r, M1, M2, args.c)
    violations = []
    if not rep.nonincreasing:
        violations.append("distribution function increases")
    if not rep.layer_cake_ok:
        violations.append(f"layer cake mismatch {rep.mean_direct} vs {rep.mean_layer_cake}")
    curve = (["lambda", "D", "bound"],
             [list(row) for row in zip(rep.lambda_grid, rep.D_values, rep.bound_curve)])
    return Outcome(rep.to_dict(), violations, {"distribution": curve})


def cmd_sharpness(args) -> Outcome:
    _require(args, "set", "d", "scales")
    set_ = load_set(args.set)
    rep = sharpness_experiment(set_, args.d, parse_floats(args.scales), args.C, args.max_centers)
    violations = []
    verdict = "divergent" if rep.divergent else "bounded"
    if args.expect and args.expect != verdict:
        violations.append(f"expected {args.expect}, observed {verdict}")
    result = rep.to_dict()
    result["verdict"] = verdict
    return Outcome(result, violations)


def _protocol(args, model) -> Outcome:
    kw = {"t_values": tuple(parse_floats(args.t_values))}
    timings: dict = {}
    result: dict = {"role": args.role, "seed": args.seed}
    violations = []
    if args.role in ("calibration", "both"):
        with _Timer(timings, "calibration"):
            sample, sweep = calibration_batch(model, args.seed, args.n_sample, args.n_sweep, **kw)
        fit = fit_constant_c(sample)
        result["calibration"] = [e.to_dict() for e in sample]
        result["calibration_fit"] = {"c_hat": fit.c_hat, "c_sup": fit.c_sup}
        result["sweep"] = {"count": len(sweep), "envelope": envelope(sweep)}
        if not fit.c_hat > 0:
            violations.append("fitted constant is not positive")
    if args.role in ("validation", "both"):
        with _Timer(timings, "validation"):
            validation = validation_batch(model, args.seed, args.n_sample, **kw)
        result["validation"] = [e.to_dict() for e in validation]
    if args.role == "both":
        res = calibrate_validate(sample, validation, envelope(sweep), len(sweep), args.tolerance)
        result["protocol"] = res.to_dict()
        if not res.stable:
            violations.append(f"fitted constant unstable: {res.stability:.3f} > {args.tolerance}")
        if res.validation_pass_rate < 1.0:
            violations.append(f"validation pass rate {res.validation_pass_rate:.4f} < 1")
    return Outcome(result, violations, timings=timings)


def cmd_remez(args) -> Outcome:
    _require(args, "set", "function")
    set_, f = load_set(args.set), load_function(args.function)
    set_ = set_ if set_.reg_a is not None else certify(set_)
    return _protocol(args, remez_model(f, set_, args.r))


# ------------------------------------------------------------------ multidim

def cmd_mdim_cartan(args) -> Outcome:
    F = load_map(args)
    timings: dict = {}
    with _Timer(timings, "multidim_cartan"):
        rep = multidim_cartan(F, args.H, args.d, half_ball_sample(F.n, args.points, args.seed),
                              mass=args.mass)
    violations = []
    if rep.violations:
        violations.append(f"{rep.extra['violation_count']} sample points fall below {rep.bound}")
    if not rep.cover.within_budget:
        violations.append("cover exceeds its budget")
    return Outcome(rep.to_dict(), violations, timings=timings)


def cmd_envelope(args) -> Outcome:
    F = load_map(args)
    rep = envelope_check(F, half_ball_sample(F.n, args.points, args.seed))
    violations = [f"{rep.violations} envelope violations"] if rep.violations else []
    return Outcome(rep.to_dict(), violations)


def cmd_ellipticity(args) -> Outcome:
    F = load_map(args)
    zeros = F.known_zeros if args.zero_index is None else [F.known_zeros[args.zero_index]]
    probes = [ellipticity_probe(F, z, args.n_directions, seed=args.seed) for z, _ in zeros]
    violations = []
    if args.expect:
        violations += [f"zero {p.zero}: expected {args.expect}, observed {p.verdict}"
                       for p in probes if p.verdict != args.expect]
    return Outcome({"map": F.name, "probes": [p.to_dict() for p in probes]}, violations)


def cmd_mcol1(args) -> Outcome:
    _require(args, "set")
    F = load_map(args)
    set_ = load_set(args.set)
    set_ = set_ if set_.reg_a is not None else certify(set_)
    return _protocol(args, mcol1_model(F, set_, args.r))


# ------------------------------------------------------------------ parser

def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="INI file supplying defaults for these flags")
    p.add_argument("--out", help="output directory, or a .json report path")
    p.add_argument("--seed", type=int, default=0)


def _map_args(p):
    p.add_argument("--map", help="map spec JSON")
    p.add_argument("--gallery", help="built-in map name")


def _protocol_args(p, r_default):
    p.add_argument("--r", type=float, default=r_default)
    p.add_argument("--role", choices=("calibration", "validation", "both"), default="both")
    p.add_argument("--n-sample", type=int, default=80, help="(x, t) centres per sampled batch")
    p.add_argument("--n-sweep", type=int, default=100, help="centres in the worst-case sweep")
    p.add_argument("--t-values", default="0.05,0.1,0.2")
    p.add_argument("--tolerance", type=float, default=0.2)


COMMANDS: dict[str, Callable] = {}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cartan-lab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_)
        _common(p)
        p.set_defaults(func=func)
        COMMANDS[name] = func
        return p

    p = add("gen-set", cmd_gen_set, "sample an IFS attractor")
    p.add_argument("--ifs", help="built-in spec such as 'cantor:0,1' or a maps JSON file")
    p.add_argument("--depth", type=int)
    p.add_argument("--embed", type=int, help="embed into C^n (first coordinate)")
    p.add_argument("--certify", action="store_true", help="attach regularity constants")

    p = add("regularity", cmd_regularity, "upper/lower regularity constants of a set")
    p.add_argument("--set")
    p.add_argument("--scales", help="comma-separated radii (default: resolvable scales)")
    p.add_argument("--max-centers", type=int, default=8192)

    p = add("cover", cmd_cover, "greedy exceptional-ball cover of an atomic measure")
    p.add_argument("--measure")
    p.add_argument("--majorant", help="'power:p,d'")
    p.add_argument("--alpha", type=float, default=0.999)
    p.add_argument("--beta", type=float, default=2.001)
    p.add_argument("--gamma", type=float, default=0.49)
    p.add_argument("--cartan", help="'H,d': Cartan cover with budget (2H)^d/d")
    p.add_argument("--mass", type=float, help="override the total mass in the Cartan majorant")

    p = add("verify", cmd_verify, "check a lower bound off a cover on a grid")
    p.add_argument("--function")
    p.add_argument("--cover")
    p.add_argument("--bound", help="number, or 'cartan' for k log(H/e) from the cover")
    p.add_argument("--grid", help="'xmin,xmax,ymin,ymax,n'")

    p = add("remez", cmd_remez, "fit-then-validate Remez gap protocol")
    p.add_argument("--set")
    p.add_argument("--function")
    _protocol_args(p, 2.0 / 3.0)

    p = add("bmo", cmd_bmo, "mean-oscillation norm over dyadic balls")
    p.add_argument("--set")
    p.add_argument("--function")
    p.add_argument("--max-centers", type=int, default=64)
    p.add_argument("--finest", type=float)
    p.add_argument("--coarsest", type=float)

    p = add("revholder", cmd_revholder, "reverse Hoelder ratios on one ball")
    p.add_argument("--set")
    p.add_argument("--function")
    p.add_argument("--x", help="centre as real coordinates 'x,y'")
    p.add_argument("--t", type=float)
    p.add_argument("--p-list", default="1,2,4,8,inf")
    p.add_argument("--c", type=float, help="fitted constant for the sup bound")
    p.add_argument("--r", type=float, default=2.0 / 3.0)

    p = add("distcheck", cmd_distcheck, "distribution function of the local deficit")
    p.add_argument("--set")
    p.add_argument("--function")
    p.add_argument("--x")
    p.add_argument("--t", type=float)
    p.add_argument("--r", type=float, default=2.0 / 3.0)
    p.add_argument("--c", type=float)
    p.add_argument("--lambda-grid", default="0,10,41", help="'start,stop,count'")

    p = add("sharpness", cmd_sharpness, "mass ratios eps_t / t^d across scales")
    p.add_argument("--set")
    p.add_argument("--d", type=float)
    p.add_argument("--scales")
    p.add_argument("--C", type=float, default=1.0)
    p.add_argument("--max-centers", type=int, default=4096)
    p.add_argument("--expect", choices=("bounded", "divergent"))

    p = add("mdim-cartan", cmd_mdim_cartan, "Cartan bound for log|F| in the half ball")
    _map_args(p)
    p.add_argument("--H", type=parse_float, default=0.1)
    p.add_argument("--d", type=float, default=2.0)
    p.add_argument("--mass", type=float)
    p.add_argument("--points", type=int, default=100_000)

    p = add("envelope", cmd_envelope, "zero-counting lower envelope of log|F|")
    _map_args(p)
    p.add_argument("--points", type=int, default=100_000)

    p = add("ellipticity", cmd_ellipticity, "directional growth exponents at zeros")
    _map_args(p)
    p.add_argument("--zero-index", type=int)
    p.add_argument("--n-directions", type=int, default=64)
    p.add_argument("--expect", choices=("elliptic", "non-elliptic", "inconclusive"))

    p = add("mcol1", cmd_mcol1, "fit-then-validate gap protocol for log|F| in C^n")
    _map_args(p)
    p.add_argument("--set")
    _protocol_args(p, 0.6)

    p = sub.add_parser("run", help="run one INI experiment config")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.add_argument("--seed", type=int)

    p = sub.add_parser("batch", help="run several configs and aggregate")
    p.add_argument("configs", nargs="*")
    p.add_argument("--out")
    p.add_argument("--only", help="keep only configs of this kind")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--tolerance", type=float, default=0.2)
    return parser


# ------------------------------------------------------------------ configs

CONFIG_SECTIONS = ("experiment", "inputs", "params")


def read_config(path) -> tuple[str | None, list[str]]:
    """(kind, argv tokens) from an INI file with [experiment], [inputs], [params].

    Relative input paths resolve against the config file's directory;
    ``true``/``false`` values toggle bare flags.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} does not exist")
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigError(f"config {path}: {exc}") from exc
    unknown = [s for s in cp.sections() if s not in CONFIG_SECTIONS]
    if unknown:
        raise ConfigError(f"config {path}: unknown sections {unknown}")
    kind = cp.get("experiment", "kind", fallback=None)
    tokens: list[str] = []
    for section in CONFIG_SECTIONS:
        if section not in cp:
            continue
        for key, value in cp[section].items():
            if section == "experiment" and key == "kind":
                continue
            flag = "--" + key.replace("_", "-")
            if section == "inputs":
                p = Path(value)
                p = p if p.is_absolute() else path.parent / p
                if not p.exists():
                    raise ConfigError(f"config {path}: input {key} = {value} does not exist")
                value = str(p)
            if section == "experiment" and key == "out":
                p = Path(value)
                value = str(p if p.is_absolute() else path.parent / p)
            low = value.strip().lower()
            if low == "true":
                tokens.append(flag)
            elif low != "false":
                tokens += [flag, value]
    return kind, tokens


def _parse(parser, argv):
    try:
        return parser.parse_args(argv)
    except SystemExit as exc:
        if exc.code not in (0, None):
            raise ConfigError(f"invalid arguments: {' '.join(argv)}") from None
        raise


def resolve_args(argv: Sequence[str]) -> argparse.Namespace:
    """Parse ``argv``, folding any --config file in underneath the explicit flags."""
    parser = build_parser()
    args = _parse(parser, list(argv))
    if args.command in ("run", "batch"):
        return args
    if args.config:
        kind, tokens = read_config(args.config)
        if kind is not None and kind != args.command:
            raise ConfigError(f"config kind {kind!r} does not match subcommand {args.command!r}")
        args = _parse(parser, [args.command] + tokens + list(argv)[1:])
    return args


def run_config(path, out=None, seed=None) -> tuple[int, dict]:
    kind, tokens = read_config(path)
    if kind is None:
        raise ConfigError(f"config {path} lacks [experiment] kind")
    if kind not in _command_names():
        raise ConfigError(f"unknown experiment kind {kind!r}")
    argv = [kind] + tokens
    if out is not None:
        argv += ["--out", str(out)]
    if seed is not None:
        argv += ["--seed", str(seed)]
    args = _parse(build_parser(), argv)
    return execute(args, config_path=str(path))


def _command_names() -> set:
    if not COMMANDS:
        build_parser()
    return set(COMMANDS)


# ------------------------------------------------------------------ execution

def _echo(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("func",)}


def _paths(out: str | None):
    """(report, manifest, curve path builder) for --out; None prints to stdout."""
    if out is None:
        return None, None, None
    p = Path(out)
    if p.suffix == ".json":
        return (p, p.with_name(p.stem + ".manifest.json"),
                lambda name: p.with_name(f"{p.stem}.{name}.csv"))
    return p / "report.json", p / "manifest.json", lambda name: p / f"{name}.csv"


def execute(args, config_path: str | None = None) -> tuple[int, dict]:
    """Run one parsed subcommand, write its outputs and return (exit code, manifest)."""
    started = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    t0 = time.perf_counter()
    outcome: Outcome = args.func(args)
    wall = time.perf_counter() - t0
    report_path, manifest_path, curve_path = _paths(args.out)
    curve_files = {}
    for name, (header, rows) in sorted(outcome.curves.items()):
        if curve_path is not None:
            path = curve_path(name)
            write_csv(path, header, rows)
            curve_files[name] = path.name
    report = dict(outcome.result)
    report["run"] = {"command": args.command, "seed": args.seed, "passed": outcome.passed,
                     "violations": outcome.violations,
                     "manifest": manifest_path.name if manifest_path else None,
                     "curves": curve_files}
    manifest = {"config": _echo(args), "config_file": config_path, "version": __version__,
                "started": started, "wall_clock_s": wall, "timings": outcome.timings,
                "passed": outcome.passed, "violations": outcome.violations,
                "report": report_path.name if report_path else None, "curves": curve_files}
    if report_path is None:
        sys.stdout.write(dumps(report))
    else:
        write_json(report_path, report)
        write_json(manifest_path, manifest)
    for v in outcome.violations:
        print(f"violation: {v}", file=sys.stderr)
    return (EXIT_OK if outcome.passed else EXIT_FAIL), manifest


def _batch_child(job):
    path, out, seed = job
    try:
        code, _ = run_config(path, out, seed)
    except ValueError as exc:
        return str(path), EXIT_SCHEMA, str(exc)
    return str(path), code, None


def _aggregate_protocol(children: list, tolerance: float) -> dict | None:
    """Combine calibration- and validation-role protocol reports per command."""
    out = {}
    for command in PROTOCOL_COMMANDS:
        cal = [c for c in children if c.get("command") == command and c["role"] == "calibration"]
        val = [c for c in children if c.get("command") == command and c["role"] == "validation"]
        if not cal or not val:
            continue
        sample = [RemezExperiment.from_dict(e) for c in cal for e in c["report"]["calibration"]]
        validation = [RemezExperiment.from_dict(e) for c in val for e in c["report"]["validation"]]
        sweep_env = max(c["report"]["sweep"]["envelope"] for c in cal)
        n_sweep = sum(c["report"]["sweep"]["count"] for c in cal)
        out[command] = calibrate_validate(sample, validation, sweep_env, n_sweep,
                                          tolerance).to_dict()
    return out or None


def run_batch(args) -> int:
    configs = [Path(c) for c in args.configs]
    kinds = {c: read_config(c)[0] for c in configs}
    if args.only:
        configs = [c for c in configs if kinds[c] == args.only]
    if not configs:
        raise ConfigError("batch is empty" + (f" after filtering on {args.only!r}" if args.only else ""))
    out = Path(args.out) if args.out else Path("cartan-lab-batch")
    names = [c.stem for c in configs]
    if len(set(names)) != len(names):
        raise ConfigError("batch configs need distinct file names")
    jobs = [(str(c), str(out / c.stem), None) for c in configs]
    t0 = time.perf_counter()
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_batch_child, jobs))
    else:
        results = [_batch_child(j) for j in jobs]
    children = []
    for (path, code, err), c in zip(results, configs):
        entry = {"config": path, "kind": kinds[c], "exit_code": code, "error": err,
                 "report": None, "command": kinds[c], "role": None}
        report_file = out / c.stem / "report.json"
        if code != EXIT_SCHEMA and report_file.exists():
            rep = read_json(report_file)
            entry["report"] = rep
            entry["role"] = rep.get("role")
        children.append(entry)
    protocol = _aggregate_protocol(children, args.tolerance)
    passed = all(ch["exit_code"] == EXIT_OK for ch in children)
    if protocol:
        passed = passed and all(p["passed"] for p in protocol.values())
    summary = {"children": [{k: ch[k] for k in ("config", "kind", "exit_code", "error", "role")}
                            for ch in sorted(children, key=lambda ch: ch["config"])],
               "protocol": protocol, "passed": passed}
    write_json(out / "aggregate.json", summary)
    write_json(out / "aggregate.manifest.json",
               {"version": __version__, "wall_clock_s": time.perf_counter() - t0,
                "configs": [str(c) for c in configs], "passed": passed, "jobs": args.jobs})
    return EXIT_OK if passed else EXIT_FAIL


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = resolve_args(argv)
        if args.command == "run":
            code, _ = run_config(args.config, args.out, args.seed)
        elif args.command == "batch":
            code = run_batch(args)
        else:
            code, _ = execute(args)
    except ValueError as exc:  # CartanLabError included
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    return code


if __name__ == "__main__":
    sys.exit(main())
