"""Command-line driver: ``slicelab <command> [--config FILE] [--out DIR] [--seed N] ...``.

Parameters come from built-in defaults, then the JSON config file, then
flags. Reports are JSON (schema ``slicelab-report/1``); plot data is CSV.
Exit status: 0 ok, 1 violated invariant, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import __version__
from .analysis import exponent_table, heavy_part_cover
from .constructions import (BlockParams, build_block, build_LF, build_LG, build_R, frostman_measure,
                            projection_count, verify_P1, verify_P2)
from .dyadic import CubeSet, Scale, ScaleSequence, TubeSet, as_scale
from .errors import (InvalidInputError, InvalidParameterError, InvalidScaleError, SlicelabError)
from .incidence import (count_incidences, count_incidences_bruteforce, incidence_quotient,
                        quotients_csv)
from .reports import csv_text, dumps, make_report, to_jsonable, write_csv, write_report
from .scan import scan_scales
from .uniformity import decompose_subuniform
from . import verify as _verify

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    """Invalid configuration, naming the offending field."""


# ---------------------------------------------------------------- value parsers


def _scale(v) -> Scale:
    return as_scale(v)


def _bool(v) -> bool:
    if isinstance(v, bool):
        return v
    if isinstance(v, str) and v.lower() in ("1", "true", "yes", "on"):
        return True
    if isinstance(v, str) and v.lower() in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {v!r}")


def _number(v) -> float:
    if isinstance(v, bool):
        raise ValueError(f"expected a number, got {v!r}")
    return float(Fraction(v)) if isinstance(v, str) else float(v)


def _int(v) -> int:
    if isinstance(v, bool) or (isinstance(v, float) and not v.is_integer()):
        raise ValueError(f"expected an integer, got {v!r}")
    return int(v)


def _listof(conv: Callable) -> Callable:
    def parse(v):
        items = v.split(",") if isinstance(v, str) else v
        if not isinstance(items, (list, tuple)):
            raise ValueError(f"expected a list, got {v!r}")
        return [conv(x.strip() if isinstance(x, str) else x) for x in items if x != ""]
    return parse


def _direction(v):
    if isinstance(v, str) and v.strip().lower() in ("inf", "vertical"):
        return math.inf
    if isinstance(v, float) and math.isinf(v):
        return math.inf
    return Fraction(v)


def _path(v) -> str:
    if not isinstance(v, str) or not v:
        raise ValueError(f"expected a path, got {v!r}")
    return v


@dataclass(frozen=True)
class Param:
    name: str
    conv: Callable
    default: Any
    help: str
    flag: bool = False  # store_true switch


# ---------------------------------------------------------------- shared helpers


def _read_family(path: str, field: str, kind: type):
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"field '{field}': no such file {path!r}")
    try:
        return kind.from_csv(p.read_text(encoding="utf-8"))
    except (InvalidInputError, ValueError) as exc:
        raise UsageError(f"field '{field}': {exc}") from exc


def _random_family(kind: type, k: int, n: int, rng: np.random.Generator):
    N = 1 << k
    n = min(n, N * N)
    flat = rng.choice(N * N, size=n, replace=False)
    return kind(k, np.stack([flat // N, flat % N], axis=1))


def _families(cfg: dict, seed: int):
    """Cubes and tubes from files, or seeded random / full-grid families at ``delta``."""
    rng = np.random.default_rng(seed)
    k = cfg["delta"].k
    if cfg["cubes"]:
        P = _read_family(cfg["cubes"], "cubes", CubeSet)
    elif cfg["full"]:
        P = CubeSet.full(k)
    else:
        P = _random_family(CubeSet, k, cfg["num_cubes"], rng)
    if cfg["tubes"]:
        Ts = _read_family(cfg["tubes"], "tubes", TubeSet)
    elif cfg["full"]:
        Ts = TubeSet.full(k)
    else:
        Ts = _random_family(TubeSet, k, cfg["num_tubes"], rng)
    if P.k != Ts.k:
        raise UsageError(f"field 'tubes': scale {Ts.scale} differs from the cubes' {P.scale}")
    return P, Ts


_FAMILY_PARAMS = [
    Param("cubes", _path, None, "CSV of cubes (k,ix,iy); random if omitted"),
    Param("tubes", _path, None, "CSV of tubes (k,ia,ib); random if omitted"),
    Param("delta", _scale, "2^-6", "scale of random families"),
    Param("num_cubes", _int, 400, "random cube count"),
    Param("num_tubes", _int, 100, "random tube count"),
    Param("full", _bool, False, "use the full grid of cubes and tubes", flag=True),
]


# ---------------------------------------------------------------- commands


def cmd_block(cfg, seed):
    params = BlockParams(cfg["delta"], cfg["tau"], cfg["s"], cfg["allow_rounding"])
    block = build_block(params)
    result = {"block": block.as_dict()}
    ok = True
    csvs = {"block_cubes": block.cubes.to_csv()}
    if cfg["verify"]:
        p1, p2 = verify_P1(block), verify_P2(block)
        result["P1"], result["P2"] = p1.as_dict(), p2.as_dict()
        ok = p1.ok and p2.kernel_ok
        csvs["block_projections"] = csv_text(
            ["e", "count", "perturbed_count", "bound"],
            [(str(e), c, pc, p2.bound) for e, c, pc in
             zip(p2.directions, p2.counts, p2.perturbed_counts)])
    else:
        csvs["block_projections"] = csv_text(
            ["e", "count"], [(str(e), projection_count(block.cubes, e)) for e in block.directions])
    return result, ok, csvs


def cmd_decompose(cfg, seed):
    kind = TubeSet if cfg["kind"] == "tubes" else CubeSet
    fam = _read_family(cfg["input"], "input", kind)
    ladder = ScaleSequence(fam.scale, cfg["step"])
    part = decompose_subuniform(fam, ladder, verify=True)
    ok = all(c <= 2 for c in part.constants) and len(part) <= part.count_bound
    rows = [(i, "-".join(map(str, sig)), len(p), float(c))
            for i, (sig, p, c) in enumerate(zip(part.signatures, part.parts, part.constants))]
    result = {"input_size": len(fam), "kind": cfg["kind"], **part.as_dict(),
              "constants_exact": list(part.constants)}
    return result, ok, {"decompose_parts": csv_text(["part", "signature", "size", "constant"], rows)}


def cmd_incidences(cfg, seed):
    P, Ts = _families(cfg, seed)
    A = cfg["A"]
    I = count_incidences(P, Ts, A)
    result = {"delta": str(P.scale), "cubes": len(P), "tubes": len(Ts), "A": A,
              "incidences": len(I)}
    ok = True
    if cfg["check"]:
        same = I == count_incidences_bruteforce(P, Ts, A)
        result["oracle_agrees"] = same
        ok = same
    recs = [incidence_quotient(P, Ts, Scale(j)) for j in range(P.k + 1)] if len(P) and len(Ts) else []
    result["quotients"] = [r.as_dict() for r in recs]
    return result, ok, {"quotients": quotients_csv(recs)}


def cmd_scan(cfg, seed):
    P, Ts = _families(cfg, seed)
    ladder = ScaleSequence(P.scale, cfg["step"])
    res = scan_scales(P, Ts, None, cfg["kappa"], scales=ladder, C0=cfg["C0"])
    rows = [(str(q.delta), q.num_incidences, q.num_cubes, q.num_tubes, float(q.iota))
            for q in res.quotients]
    return (res.as_dict(), True,
            {"scan_profile": csv_text(["scale", "incidences", "cubes", "tubes", "iota"], rows)})


def cmd_heavy(cfg, seed):
    if cfg["input"]:
        K = _read_family(cfg["input"], "input", CubeSet)
        t = cfg["t"]
        if t is None:
            raise UsageError("field 't': required with an input file")
    else:
        K = _verify.cantor_instance()
        t = 1.0 if cfg["t"] is None else cfg["t"]
    dirs = cfg["directions"] or _verify.instance_directions()
    r = heavy_part_cover(K, dirs, t, cfg["s"], cfg["eta"], None, cfg["scales"],
                         ladder_step=cfg["ladder_step"])
    ok = all(all(o) for o in r.covers_ok)
    rows = [(str(d), str(e), c, h, cf) for d, cs, hs, cfs in
            zip(r.scales, r.content, r.heavy_counts, r.covered_fraction)
            for e, c, h, cf in zip(r.directions, cs, hs, cfs)]
    result = {"set_size": len(K), "set_scale": str(K.scale), **r.as_dict()}
    return result, ok, {"heavy_content": csv_text(
        ["delta", "direction", "content", "heavy_tubes", "covered_fraction"], rows)}


def cmd_cantor(cfg, seed):
    tau, s = cfg["tau"], cfg["s"]
    R = build_R(cfg["exponents"], tau, s, enforce_decay=cfg["enforce_decay"],
                allow_rounding=cfg["allow_rounding"])
    u = cfg["u"] if cfg["u"] is not None else tau - 0.1
    mu = frostman_measure(R.levels, u)
    result = {"R": R.as_dict(), "frostman": mu.as_dict()}
    ok = mu.total_mass == 1 and mu.level_bound_ok
    if cfg["lines"]:
        LF = build_LF(R)
        LG = build_LG(R.exponents, tau)
        result["L_F"], result["L_G"] = LF.as_dict(), LG.as_dict()
        ok &= LF.E_nonempty and all(b[2] for b in LG.size_bounds())
    prof = R.profile()
    return result, ok, {"cantor_profile": csv_text(["scale", "log2_inverse_scale", "count"],
                                                   [(str(d), d.k, n) for d, n in prof])}


def cmd_exponents(cfg, seed):
    rows = [exponent_table(t, s) for t in cfg["t"] for s in cfg["s"]]
    fields = list(rows[0].as_dict())
    csv = csv_text(fields, [[r.as_dict()[f] for f in fields] for r in rows])
    result = {"rows": [r.as_dict() for r in rows]}
    return result, all(r.borelHeavyBound <= r.t for r in rows), {"exponents": csv}


def cmd_verify_all(cfg, seed):
    crit = _verify.run_all(seed, cfg["only"] or None,
                           progress=lambda c: print(c.line(), file=sys.stderr, flush=True))
    result = {"criteria": [c.as_dict() for c in crit],
              "failed": [c.id for c in crit if not c.passed]}
    rows = [(c.id, c.title, int(c.passed)) for c in crit]
    return result, all(c.passed for c in crit), {"verify_summary": csv_text(["id", "title", "passed"], rows)}


COMMANDS: dict[str, tuple[Callable, list[Param], str]] = {
    "block": (cmd_block, [
        Param("delta", _scale, "2^-8", "block scale 2^-k"),
        Param("tau", _number, 1.5, "grid dimension in (1, 2]"),
        Param("s", _number, 0.5, "direction dimension in [0, 2 - tau]"),
        Param("allow_rounding", _bool, False, "round a non-integral grid stride", flag=True),
        Param("verify", _bool, False, "run the progression and projection checks", flag=True),
    ], "build a building block"),
    "decompose": (cmd_decompose, [
        Param("input", _path, None, "CSV of cells (k,ix,iy)"),
        Param("kind", str, "cubes", "cubes or tubes"),
        Param("step", _int, 1, "ladder ratio 2^step"),
    ], "split a family into sub-uniform parts"),
    "incidences": (cmd_incidences, _FAMILY_PARAMS + [
        Param("A", lambda v: Fraction(v), "1", "thickening factor"),
        Param("check", _bool, False, "compare with the all-pairs oracle", flag=True),
    ], "count incidences and quotients over all dyadic scales"),
    "scan": (cmd_scan, _FAMILY_PARAMS + [
        Param("kappa", _number, 0.5, "kappa in (0, 1)"),
        Param("step", _int, 2, "ladder ratio 2^step"),
        Param("C0", _number, 1.0, "scan constant"),
    ], "scan the scale ladder for a good coarse scale"),
    "heavy": (cmd_heavy, [
        Param("input", _path, None, "CSV of cubes; the product-Cantor set if omitted"),
        Param("t", _number, None, "dimension of the set"),
        Param("s", _number, 0.75, "heavy exponent s"),
        Param("eta", _number, 0.08, "eta"),
        Param("scales", _listof(_scale), list(_verify.HEAVY_SCALES), "scales, e.g. 2^-6,2^-8"),
        Param("directions", _listof(_direction), None, "slopes, e.g. 0,1/2,inf"),
        Param("ladder_step", _int, 2, "ladder ratio 2^step inside each scale"),
    ], "cover heavy parts along directions"),
    "cantor": (cmd_cantor, [
        Param("exponents", _listof(_int), [0, 2, 6, 8, 12], "scale exponents 0,k0,K1,k1,..."),
        Param("tau", _number, 1.5, "block grid dimension"),
        Param("s", _number, 0.5, "block direction dimension"),
        Param("enforce_decay", _bool, False, "reject exponents violating rapid decay", flag=True),
        Param("allow_rounding", _bool, False, "round non-integral block strides", flag=True),
        Param("u", _number, None, "Frostman exponent (default tau - 0.1)"),
        Param("lines", _bool, False, "also build the line families", flag=True),
    ], "build the nested Cantor set, its measure and line families"),
    "exponents": (cmd_exponents, [
        Param("t", _listof(_number), [1.8], "t values"),
        Param("s", _listof(_number), [0.7], "s values"),
    ], "evaluate the exponent table"),
    "verify-all": (cmd_verify_all, [
        Param("only", _listof(_int), None, "criterion ids (default all)"),
    ], "run the acceptance suite"),
}


# ---------------------------------------------------------------- plumbing


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="slicelab", description="Discretized incidence geometry tools.")
    ap.add_argument("--version", action="version", version=f"slicelab {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, (_, params, help_) in COMMANDS.items():
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", help="JSON file with parameter values")
        sp.add_argument("--out", help="directory for report and CSV files (stdout if omitted)")
        sp.add_argument("--seed", type=int, default=None, help="randomization seed (default 0)")
        for p in params:
            opt = "--" + p.name.replace("_", "-")
            if p.flag:
                sp.add_argument(opt, dest=p.name, action="store_const", const=True, default=None,
                                help=p.help)
                sp.add_argument("--no-" + p.name.replace("_", "-"), dest=p.name,
                                action="store_const", const=False, help=argparse.SUPPRESS)
            else:
                sp.add_argument(opt, dest=p.name, default=None, help=p.help)
    return ap


def resolve_config(command: str, ns: argparse.Namespace) -> tuple[dict, int, dict]:
    """Merge defaults, config file and flags; return (parsed, seed, raw) or raise UsageError."""
    params = COMMANDS[command][1]
    raw: dict[str, Any] = {p.name: p.default for p in params}
    seed = 0
    if ns.config:
        try:
            data = json.loads(Path(ns.config).read_text(encoding="utf-8"))
        except OSError as exc:
            raise UsageError(f"field 'config': cannot read {ns.config!r}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise UsageError(f"field 'config': invalid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise UsageError("field 'config': expected a JSON object")
        data = data.get(command, data) if isinstance(data.get(command), dict) else data
        known = {p.name for p in params} | {"seed"}
        for key, val in data.items():
            if key not in known:
                raise UsageError(f"field '{key}': unknown parameter for '{command}'")
            if key == "seed":
                seed = val
            else:
                raw[key] = val
    for p in params:
        v = getattr(ns, p.name)
        if v is not None:
            raw[p.name] = v
    if ns.seed is not None:
        seed = ns.seed
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise UsageError(f"field 'seed': expected a non-negative integer, got {seed!r}")
    cfg = {}
    for p in params:
        v = raw[p.name]
        if v is None:
            cfg[p.name] = None
            continue
        try:
            cfg[p.name] = p.conv(v)
        except (ValueError, TypeError, ZeroDivisionError, SlicelabError) as exc:
            raise UsageError(f"field '{p.name}': {exc}") from exc
    if command == "decompose" and not cfg["input"]:
        raise UsageError("field 'input': required")
    if command == "decompose" and cfg["kind"] not in ("cubes", "tubes"):
        raise UsageError("field 'kind': must be 'cubes' or 'tubes'")
    return cfg, seed, {k: _config_value(v) for k, v in cfg.items()}


def _config_value(v):
    if isinstance(v, list):
        return [_config_value(x) for x in v]
    if isinstance(v, float) and math.isinf(v):
        return "inf"
    return to_jsonable(v)


def main(argv=None) -> int:
    ap = build_parser()
    ns = ap.parse_args(argv)
    command = ns.command
    fn = COMMANDS[command][0]
    try:
        cfg, seed, shown = resolve_config(command, ns)
        result, ok, csvs = fn(cfg, seed)
    except UsageError as exc:
        print(f"slicelab {command}: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InvalidInputError, InvalidParameterError, InvalidScaleError) as exc:
        print(f"slicelab {command}: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SlicelabError as exc:
        print(f"slicelab {command}: error: {exc}", file=sys.stderr)
        return EXIT_VIOLATION
    name = command.replace("-", "_")
    report = make_report(command, shown, seed, result, ok=ok)
    if ns.out:
        path = write_report(ns.out, name, report)
        for cname, text in csvs.items():
            write_csv(ns.out, cname, text)
        print(f"{'ok' if ok else 'FAILED'}: report written to {path}")
    else:
        sys.stdout.write(dumps(report))
    if not ok:
        where = f"{ns.out}/{name}.json" if ns.out else "the report above"
        print(f"slicelab {command}: invariant violated; see 'result' in {where}", file=sys.stderr)
        return EXIT_VIOLATION
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
