"""Command-line front end: predict, sweep, simulate, analyze, calibrate, continuum."""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import calibration, continuum, counts_io, protocol, sampler
from .constants import FORMAT_VERSION
from .imperfect import NoiseParams


class CLIError(Exception):
    pass


def parse_grid(text: str) -> list[float]:
    """'0.1,0.2' (list) or 'start:stop:n' (inclusive linspace)."""
    try:
        if ":" in text:
            start, stop, n = text.split(":")
            if int(n) < 1:
                raise ValueError("n must be >= 1")
            return [float(x) for x in np.linspace(float(start), float(stop), int(n))]
        values = [float(x) for x in text.split(",") if x.strip()]
        if not values:
            raise ValueError("empty grid")
        return values
    except ValueError as exc:
        raise CLIError(f"bad grid {text!r}: {exc}") from None


def write_manifest(out: Path, command: str, config: str | None, seed: int | None) -> Path:
    target = out / "manifest.json" if out.is_dir() else out.with_name(out.name + ".manifest.json")
    manifest = {
        "version": FORMAT_VERSION,
        "command": command,
        "config": config,
        "seed": seed,
        "output": str(out),
    }
    target.write_text(json.dumps(manifest, indent=2) + "\n")
    return target


def _emit(args, payload: dict, text: str) -> None:
    if args.json:
        print(json.dumps(payload, indent=2, allow_nan=False, default=_jsonable))
    else:
        print(text)


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    raise TypeError(type(x))


def _finite(x):
    return None if x is None or not math.isfinite(x) else x


# ---------------------------------------------------------------------------


def _noise(arg) -> NoiseParams:
    if not arg:
        return NoiseParams()
    text = Path(arg).read_text() if Path(arg).exists() else arg
    return NoiseParams.from_dict(json.loads(text))


def cmd_predict(args) -> int:
    rep = protocol.predict(args.psi, args.theta, args.order, _noise(args.noise_a), _noise(args.noise_b))
    comp = rep.components.as_dict()
    payload = {"version": FORMAT_VERSION, "psi": args.psi, "theta": args.theta, "order": args.order,
               "lambda": math.sin(args.theta), "expectations": comp,
               "lhs": _finite(rep.lhs), "indeterminate": rep.indeterminate, "violated": rep.violated,
               "mode": "limit" if args.theta == 0 else "exact"}
    lines = [f"{k:>4} = {v:.12g}" for k, v in comp.items()]
    if rep.indeterminate:
        print("warning: ratio is indeterminate (0/0)", file=sys.stderr)
        lines.append(" lhs = indeterminate")
    else:
        lines.append(f" lhs = {rep.lhs:.12g}  ({'violated' if rep.violated else 'not violated'}, bound 1)")
    _emit(args, payload, "\n".join(lines))
    return 0


def cmd_sweep(args) -> int:
    rows = protocol.sweep(parse_grid(args.psi_grid), parse_grid(args.lambda_grid), args.threads)
    if args.out:
        out = Path(args.out)
        protocol.write_sweep_csv(rows, out, FORMAT_VERSION)
        write_manifest(out, "sweep", None, None)
    payload = {"version": FORMAT_VERSION,
               "rows": [{"psi": r.psi, "lambda": r.lam, "lhs": _finite(r.lhs), "indeterminate": r.indeterminate} for r in rows]}
    text = "\n".join(f"{r.psi:.6g},{r.lam:.6g},{'indeterminate' if r.indeterminate else f'{r.lhs:.10g}'}" for r in rows)
    _emit(args, payload, f"{len(rows)} rows" + (f" written to {args.out}" if args.out else "\n" + text))
    return 0


def load_run_config(args) -> dict:
    cfg = {}
    if args.config:
        try:
            cfg = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise CLIError(f"cannot read config {args.config}: {exc}") from None
    for key in ("psi", "theta", "shots", "reps", "jobs"):
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    missing = [k for k in ("psi", "theta") if k not in cfg]
    if missing:
        raise CLIError(f"missing {', '.join(missing)} (give --config or flags)")
    return cfg


def _report(est: sampler.EstimatedExpectations, boot=None) -> dict:
    d = {q: {"value": v, "sigma": s} for q, v, s in est.rows()}
    out = {"order": est.order, "psi": est.psi, "theta": est.theta, "estimates": d}
    try:
        sig = sampler.violation_significance(est)
        out.update(lhs=sig.lhs.value, lhs_sigma=sig.lhs.sigma, z_score=_finite(sig.z_score), exact=sig.exact)
    except ValueError as exc:
        out.update(lhs=None, error=str(exc))
    if boot is not None:
        out["lhs_sigma_bootstrap"] = boot.sigma
    return out


def _summary_line(r: dict) -> str:
    if r.get("lhs") is None:
        return f"{r['order']}: lhs indeterminate ({r.get('error')})"
    z = r["z_score"]
    zs = "inf" if z is None else f"{z:.2f}"
    extra = f", bootstrap sigma {r['lhs_sigma_bootstrap']:.4g}" if "lhs_sigma_bootstrap" in r else ""
    return f"{r['order']}: lhs = {r['lhs']:.5f} +- {r['lhs_sigma']:.5f}  z = {zs}{extra}"


def cmd_simulate(args) -> int:
    cfg = load_run_config(args)
    pc = protocol.ProtocolConfig(float(cfg["psi"]), float(cfg["theta"]), noise_a=NoiseParams.from_dict(cfg.get("noise_a")),
                                 noise_b=NoiseParams.from_dict(cfg.get("noise_b")))
    orders = tuple(cfg.get("orders", ("AB", "BA")))
    tables = sampler.sample_counts(pc, int(cfg.get("shots", 10_000)), int(cfg.get("reps", 25)), int(cfg.get("jobs", 1)),
                                   args.seed, orders)
    out = Path(args.out) if args.out else None
    if out:
        out.mkdir(parents=True, exist_ok=True)
        for t in tables:
            counts_io.write(t, out / f"counts_{t.order}_job{t.job}.json")
    reports = []
    for order in orders:
        group = [t for t in tables if t.order == order]
        est = sampler.estimate(group)
        reports.append(_report(est))
        if out:
            sampler.write_estimates_csv(est, out / f"estimates_{order}.csv", FORMAT_VERSION)
    if out:
        write_manifest(out, "simulate", args.config, args.seed)
    _emit(args, {"version": FORMAT_VERSION, "seed": args.seed, "reports": reports},
          "\n".join(_summary_line(r) for r in reports))
    return 0


def cmd_analyze(args) -> int:
    tables = []
    for p in args.files:
        try:
            tables.append(counts_io.read(p))
        except OSError as exc:
            raise CLIError(f"cannot read {p}: {exc}") from None
    reports = []
    for order in ("AB", "BA"):
        group = [t for t in tables if t.order == order]
        if not group:
            continue
        est = sampler.estimate(group)
        boot = sampler.bootstrap_sigma(group, args.bootstrap, args.seed) if args.bootstrap else None
        reports.append(_report(est, boot))
        if args.out:
            out = Path(args.out)
            out.mkdir(parents=True, exist_ok=True)
            sampler.write_estimates_csv(est, out / f"estimates_{order}.csv", FORMAT_VERSION)
    if args.out:
        write_manifest(Path(args.out), "analyze", None, args.seed)
    _emit(args, {"version": FORMAT_VERSION, "reports": reports}, "\n".join(_summary_line(r) for r in reports))
    return 0


def cmd_calibrate(args) -> int:
    try:
        preps, povm, q, lam = calibration.load_fixture(args.fixture)
    except (OSError, KeyError, TypeError, ValueError) as exc:
        raise CLIError(f"bad calibration fixture {args.fixture}: {exc}") from None
    pm = calibration.prob_matrices(preps, povm, q, lam)
    res = calibration.calibrate(pm)
    M, P = res.contrast_operators(preps, povm)
    payload = {"version": FORMAT_VERSION, **res.to_dict(),
               "anticommutation_residual": calibration.anticommutation_residual(M, P)}
    if args.out:
        out = Path(args.out)
        out.write_text(json.dumps(payload, indent=2, default=_jsonable) + "\n")
        write_manifest(out, "calibrate", args.fixture, None)
    text = (f"pbar = {np.array2string(res.pbar, precision=6)}\n"
            f"mbar = {np.array2string(res.mbar, precision=6)}\n"
            f"|rhobar| in [{res.bounds['rho'][0]:.4g}, {res.bounds['rho'][1]:.4g}], "
            f"|mubar| in [{res.bounds['mu'][0]:.4g}, {res.bounds['mu'][1]:.4g}]\n"
            f"anticommutation residual {payload['anticommutation_residual']:.2e}")
    _emit(args, payload, text)
    return 0


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# {FORMAT_VERSION}\n")
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def cmd_continuum(args) -> int:
    task = args.task
    if task == "cat-sweep":
        header = ("a", "ratio")
        rows = continuum.cat_ratio_table(np.linspace(0, 2.5, args.points))
    elif task == "wigner":
        g = np.linspace(-args.limit, args.limit, args.points)
        header = ("x", "q", "W")
        rows = [(x, q, float(continuum.wigner_cat(x, q, args.a))) for x in g for q in g]
    elif task == "fock":
        header = ("n", "max_alpha_second", "violates")
        rows = [(n, (r := continuum.fock_check(n)).max_alpha_second, str(r.violates).lower()) for n in range(args.nmax + 1)]
    elif task == "responsive":
        header = ("z", "lhs", "rhs", "violated")
        rows = []
        for z in np.linspace(-2, 2, args.points):
            r = continuum.classical_responsive_ratio(lambda x: -x * x, float(z))
            rows.append((float(z), float(r.lhs), float(r.rhs), str(r.violated).lower()))
    else:  # pragma: no cover - argparse restricts choices
        raise CLIError(f"unknown task {task}")
    if args.out:
        out = Path(args.out)
        _write_csv(out, header, rows)
        write_manifest(out, f"continuum {task}", None, None)
    payload = {"version": FORMAT_VERSION, "task": task, "header": list(header), "rows": [list(r) for r in rows]}
    text = ",".join(header) + "\n" + "\n".join(",".join(f"{v:.8g}" if isinstance(v, float) else str(v) for v in r) for r in rows)
    _emit(args, payload, text if not args.out else f"{len(rows)} rows written to {args.out}")
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="machine-readable output")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", help="output file or directory")

    p = argparse.ArgumentParser(prog="weakreal", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("predict", parents=[common], help="exact prediction of the ratio")
    s.add_argument("--psi", type=float, required=True, help="radians")
    s.add_argument("--theta", type=float, required=True, help="radians; 0 selects the weak limit")
    s.add_argument("--order", choices=("AB", "BA"), default="AB")
    s.add_argument("--noise-a", help="NoiseParams JSON (inline or file)")
    s.add_argument("--noise-b", help="NoiseParams JSON (inline or file)")
    s.set_defaults(fn=cmd_predict)

    s = sub.add_parser("sweep", parents=[common], help="(psi, lambda) grid of the ratio")
    s.add_argument("--psi-grid", required=True, help="'a,b,c' or 'start:stop:n'")
    s.add_argument("--lambda-grid", required=True, help="'a,b,c' or 'start:stop:n'")
    s.add_argument("--threads", type=int, default=None)
    s.set_defaults(fn=cmd_sweep)

    s = sub.add_parser("simulate", parents=[common], help="finite-shot simulation")
    s.add_argument("config", nargs="?", help="run config JSON")
    s.add_argument("--psi", type=float)
    s.add_argument("--theta", type=float)
    s.add_argument("--shots", type=int)
    s.add_argument("--reps", type=int)
    s.add_argument("--jobs", type=int)
    s.set_defaults(fn=cmd_simulate)

    s = sub.add_parser("analyze", parents=[common], help="estimate from counts files")
    s.add_argument("files", nargs="+")
    s.add_argument("--bootstrap", type=int, default=0, help="resamples for the bootstrap sigma (>= 100)")
    s.set_defaults(fn=cmd_analyze)

    s = sub.add_parser("calibrate", parents=[common], help="calibrate from a fixture")
    s.add_argument("fixture")
    s.set_defaults(fn=cmd_calibrate)

    s = sub.add_parser("continuum", parents=[common], help="continuous-variable tables")
    s.add_argument("task", choices=("cat-sweep", "wigner", "fock", "responsive"))
    s.add_argument("--points", type=int, default=26)
    s.add_argument("--a", type=float, default=2.0)
    s.add_argument("--limit", type=float, default=3.0)
    s.add_argument("--nmax", type=int, default=10)
    s.set_defaults(fn=cmd_continuum)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except counts_io.SchemaError as exc:
        print(f"error: schema violation at {exc}", file=sys.stderr)
        return 2
    except (CLIError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
