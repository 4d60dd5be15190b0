"""Command line harness: ``elastica <command> --config file.toml --out dir``.

Exit codes: 0 success, 1 configuration or validation error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import sys
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import experiments as X
from .arcspline import dense_polyline_dict, planar_arcspline
from .errors import ElasticaError, InvalidArgument, UndefinedRequest, UnsupportedDimension
from .mesh import Partition, graded_partition, uniform_partition
from .solver import SolveOptions, initial_guess, minimize, regularity_report
from .transfer import reconstruct

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2
SCHEMA_VERSION = 1

COMMANDS = ("solve", "converge", "transfer-test", "reference", "demo-tilted")

# allowed keys per section; anything else is reported as a config error
SECTIONS = {
    "boundary": {"preset", "p0", "pL", "N0", "NL", "L"},
    "partition": {"n", "breakpoints"},
    "solver": {"max_iter", "kkt_tol", "armijo", "backtrack", "max_backtracks", "starts", "seed", "barrier", "restore_tol"},
    "converge": {"resolutions", "delta_c", "reference", "self_n"},
    "transfer": {"resolutions", "curve"},
    "demo": {"ns", "resolution", "box"},
    "output": {"dense_polyline", "polyline_samples"},
}


class ConfigError(Exception):
    pass


def build_id() -> str:
    """Short sha1 over the package sources, stable across machines."""
    h = hashlib.sha1()
    root = Path(__file__).resolve().parent
    for p in sorted(root.glob("*.py")):
        h.update(p.name.encode())
        h.update(p.read_bytes())
    return h.hexdigest()[:12]


# --- config ---------------------------------------------------------------


def load_config(path) -> dict:
    try:
        with open(path, "rb") as fh:
            cfg = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"{path}: no such file")
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}")
    for name, body in cfg.items():
        if name not in SECTIONS:
            raise ConfigError(f"{path}: unknown section [{name}]")
        if not isinstance(body, dict):
            raise ConfigError(f"{path}: [{name}] must be a table")
        extra = set(body) - SECTIONS[name]
        if extra:
            raise ConfigError(f"{path}: [{name}] unknown key(s) {', '.join(sorted(extra))}")
    return cfg


def _boundary(cfg):
    sec = cfg.get("boundary")
    if sec is None:
        raise ConfigError("missing [boundary] section")
    if "preset" in sec:
        if len(sec) > 1:
            raise ConfigError("[boundary] preset cannot be combined with explicit data")
        return X.preset(sec["preset"])
    return X.boundary_from_dict(sec)


def _partition(cfg, L) -> Partition:
    sec = cfg.get("partition", {})
    if "breakpoints" in sec:
        T = graded_partition(sec["breakpoints"])
        if abs(T.length - L) > 1e-12 * L:
            raise ConfigError(f"[partition] breakpoints end at {T.length!r}, expected L = {L!r}")
        return T
    n = sec.get("n", 64)
    if not isinstance(n, int):
        raise ConfigError("[partition] n must be an integer")
    return uniform_partition(L, n)


def _options(cfg, args) -> SolveOptions:
    sec = dict(cfg.get("solver", {}))
    if args.seed is not None:
        sec["seed"] = args.seed
    if args.threads is not None:
        sec["threads"] = args.threads
    return SolveOptions(**sec)


def _output(cfg, default_samples):
    """``(dense_polyline, polyline_samples)`` from the optional [output] section."""
    sec = cfg.get("output", {})
    dense = sec.get("dense_polyline", False)
    samples = sec.get("polyline_samples", default_samples)
    if not isinstance(dense, bool):
        raise ConfigError("[output] dense_polyline must be true or false")
    if not isinstance(samples, int) or samples < 1:
        raise ConfigError("[output] polyline_samples must be a positive integer")
    return dense, samples


def _int_list(sec, key, default):
    v = sec.get(key, default)
    if not isinstance(v, list) or not v or not all(isinstance(i, int) and i > 0 for i in v):
        raise ConfigError(f"{key} must be a nonempty list of positive integers")
    return v


# --- output ---------------------------------------------------------------


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else ""
    return str(v)


def write_csv(path: Path, rows: list[dict], extra: dict):
    cols = ["h", "seed", "build"] + [k for k in rows[0] if k not in ("h", "seed", "build")] if rows else ["h", "seed", "build"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            full = {**r, **extra}
            w.writerow([_fmt(full.get(c)) for c in cols])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if hasattr(obj, "to_dict"):
        return _jsonable(obj.to_dict())
    return obj


def write_json(path: Path, data: dict):
    payload = {"schema_version": SCHEMA_VERSION, **_jsonable(data)}
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


# --- commands -------------------------------------------------------------


def cmd_solve(cfg, args, out: Path) -> int:
    bd = _boundary(cfg)
    T = _partition(cfg, bd.L)
    opts = _options(cfg, args)
    # samples per arc segment of the reconstructed minimizer
    dense, samples = _output(cfg, 16)
    trace = out / "trace.jsonl"
    trace.write_text("", encoding="utf-8")
    opts.trace = str(trace)
    P, rep = minimize(initial_guess(bd, T, opts.restore_tol), bd, opts)
    reg = regularity_report(P)
    meta = {"h": T.h, "seed": opts.seed, "build": build_id()}
    (out / "minimizer.json").write_text(P.to_json() + "\n", encoding="utf-8")
    write_json(out / "kkt.json", {**meta, **rep.to_dict()})
    write_json(out / "regularity.json", {**meta, **reg})
    row = {
        "h": T.h,
        "n": T.n_edges,
        "energy": rep.energy,
        "kkt_residual": rep.kkt_residual,
        "feasibility": rep.feasibility,
        "iterations": rep.iterations,
        **{k: reg[k] for k in ("w2inf", "tv3", "w3inf")},
    }
    write_csv(out / "solve.csv", [row], meta)
    if dense:
        # smooth companion of the minimizer, sampled per arc segment
        gamma, _ = reconstruct(P, bd)
        write_json(out / "minimizer_polyline.json", gamma.to_polyline(per_segment=samples))
    print(f"energy {rep.energy!r} kkt {rep.kkt_residual:.3g} feasibility {rep.feasibility:.3g}")
    return EXIT_OK


def cmd_converge(cfg, args, out: Path) -> int:
    bd = _boundary(cfg)
    sec = cfg.get("converge", {})
    ns = _int_list(sec, "resolutions", [8, 16, 32, 64, 128, 256])
    mode = sec.get("reference", "analytic")
    opts = _options(cfg, args)
    res = X.convergence_study(
        bd,
        ns,
        c=float(sec.get("delta_c", 1.0)),
        reference=mode,
        opts=opts,
        threads=opts.threads,
        self_n=int(sec.get("self_n", 1024)),
    )
    meta = {"seed": opts.seed, "build": build_id()}
    rows = []
    for r in res["rows"]:
        row = dict(r)
        for key, rate in res["rates"].items():
            row[f"rate_{key}"] = None if rate is None else rate["slope"]
        rows.append(row)
    write_csv(out / "converge.csv", rows, meta)
    write_json(out / "converge.json", {**meta, **res})
    print(f"reference {res['reference_mode']}; w1inf rate {_fmt(rows[0]['rate_w1inf']) or 'null'}")
    return EXIT_OK


def _quarter_circle(segments=64):
    return planar_arcspline(np.zeros(2), 0.0, np.linspace(0, math.pi / 2, segments + 1), np.ones(segments))


def cmd_transfer_test(cfg, args, out: Path) -> int:
    sec = cfg.get("transfer", {})
    ns = _int_list(sec, "resolutions", [16, 32, 64, 128, 256])
    kind = sec.get("curve", "quarter-circle")
    if kind == "quarter-circle":
        bd = X.preset("quarter-arc")
        curve = _quarter_circle()
    elif kind == "elastica":
        bd = _boundary(cfg)
        sol = X.reference_solution(bd, args.threads or 1)
        if not sol["info"]["success"]:
            raise ElasticaError("shooting did not reach the acceptance residual")
        curve = sol["curve"]
    else:
        raise ConfigError("[transfer] curve must be 'quarter-circle' or 'elastica'")
    rt = X.roundtrip_study(bd, curve, ns)
    en = X.reconstruction_energy_study(bd, curve, ns)
    rows = [{**a, "energy_gap": b["energy_gap"]} for a, b in zip(rt["rows"], en["rows"])]
    seed = args.seed if args.seed is not None else 0
    meta = {"seed": seed, "build": build_id()}
    for r in rows:
        r["rate_w2inf"] = None if rt["rate"] is None else rt["rate"]["slope"]
    write_csv(out / "transfer.csv", rows, meta)
    write_json(out / "transfer.json", {**meta, "curve": kind, "roundtrip": rt, "energy": en})
    print(f"roundtrip slope {_fmt(rows[0]['rate_w2inf']) or 'null'}")
    return EXIT_OK


def cmd_reference(cfg, args, out: Path) -> int:
    bd = _boundary(cfg)
    if bd.m != 2:
        raise UnsupportedDimension("analytic reference needs planar data")
    sol = X.reference_solution(bd, args.threads or 1)
    info = sol["info"]
    curve = sol["curve"]
    seed = args.seed if args.seed is not None else 0
    meta = {"seed": seed, "build": build_id()}
    if not info["success"]:
        write_json(out / "reference.json", {**meta, "info": info})
        print("shooting did not reach the acceptance residual; use a self reference", file=sys.stderr)
        return EXIT_NUMERIC
    ode = sol.get("ode", {})
    row = {
        "h": curve.length / (len(curve.samples) - 1),
        "family": sol["params"].family,
        "k": sol["params"].k,
        "omega": sol["params"].omega,
        "energy": info["energy"],
        "boundary_residual": info["residual"],
        "ode_residual": ode.get("residual"),
        "success": info["success"],
    }
    write_csv(out / "reference.csv", [row], meta)
    write_json(out / "reference.json", {**meta, "params": sol["params"], "info": info, "ode_residual": ode.get("residual")})
    # samples along the whole reference curve
    _, samples = _output(cfg, 1024)
    s = np.linspace(0.0, curve.length, samples + 1)
    write_json(out / "reference_polyline.json", dense_polyline_dict(s, curve.position(s), curve.velocity(s)))
    print(f"{row['family']} k={row['k']!r} energy {info['energy']!r} residual {info['residual']:.3g}")
    return EXIT_OK


def cmd_demo_tilted(cfg, args, out: Path) -> int:
    sec = cfg.get("demo", {})
    ns = _int_list(sec, "ns", [16, 64, 256])
    rows = X.tilted_demo(ns, int(sec.get("resolution", 1024)), float(sec.get("box", 2.0)))
    seed = args.seed if args.seed is not None else 0
    meta = {"seed": seed, "build": build_id()}
    for r in rows:
        r["h"] = r.pop("grid_step")
    write_csv(out / "demo.csv", rows, meta)
    write_json(out / "demo.json", {**meta, "rows": rows})
    for r in rows:
        print(f"n={r['n']} hausdorff {r['hausdorff']:.4f} bound {r['bound']:.4f}")
    return EXIT_OK


HANDLERS = {
    "solve": cmd_solve,
    "converge": cmd_converge,
    "transfer-test": cmd_transfer_test,
    "reference": cmd_reference,
    "demo-tilted": cmd_demo_tilted,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="elastica", description="Discrete Euler elastica harness")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="TOML configuration file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=int, default=None)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    if args.threads is not None and args.threads < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load_config(args.config)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        return HANDLERS[args.command](cfg, args, out)
    except (ConfigError, InvalidArgument, UndefinedRequest, UnsupportedDimension, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ElasticaError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
