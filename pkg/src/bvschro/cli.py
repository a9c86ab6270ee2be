"""Batch command-line front end.

Subcommands: validate, resolve, sweep, carleman, resonances, evolve.
Each run writes command-specific CSV files, a provenance JSON (spec hash,
seed, tolerances, parameters, kernel backend) and a generic plot script into
the output directory.  Exit codes: 0 success, 1 I/O or parse error,
2 hypothesis failure, 3 numerical non-convergence.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .carleman import (HypothesisFailureError, build_mu, build_weight,
                       check_atom_inequalities, choose_phase_slope, constant_report,
                       evaluate_estimate)
from .kernels import BACKEND
from .operator import SpectralPoint
from .propagator import decay_fit, schrodinger_evolve, wave_evolve
from .resonance import (CutoffSpec, UnresolvedClusterError, find_resonances,
                        strip_certificate, zero_resonance_test)
from .solve import SingularMatchingError, lap_sweep, solve, weighted_norm
from .specfile import SpecParseError, parse_spec

EXIT_OK = 0
EXIT_PARSE = 1
EXIT_HYPOTHESIS = 2
EXIT_NUMERICAL = 3

_FLOAT = "%.17g"


def _fmt(x):
    if isinstance(x, complex):
        return (_FLOAT % x.real) + (("+" if x.imag >= 0 else "-") + (_FLOAT % abs(x.imag)) + "j")
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    return _FLOAT % float(x)


def _write_csv(path: Path, columns, rows):
    with open(path, "w") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(row.get(c)) for c in columns) + "\n")


def _grid_arg(text):
    """Parse 'a,b,n' or 'a,b,n,log' into an array."""
    parts = text.split(",")
    if len(parts) not in (3, 4):
        raise argparse.ArgumentTypeError("grid must be 'start,stop,count[,log]'")
    a, b, n = float(parts[0]), float(parts[1]), int(parts[2])
    if len(parts) == 4 and parts[3] == "log":
        return np.geomspace(a, b, n)
    return np.linspace(a, b, n)


def _rect_arg(text):
    parts = [float(p) for p in text.split(",")]
    if len(parts) != 4:
        raise argparse.ArgumentTypeError("rect must be 're0,re1,im0,im1'")
    return tuple(parts)


def _list_arg(text):
    return [float(p) for p in text.split(",")]


PLOT_SCRIPT = """\
#!/usr/bin/env python3
# Generic plotting helper for the CSV files in this directory.
# Usage: python3 plot.py <file.csv> <x-column> <y-column> [logy]
import csv, sys

path, xc, yc = sys.argv[1], sys.argv[2], sys.argv[3]
logy = len(sys.argv) > 4 and sys.argv[4] == "logy"
with open(path) as fh:
    rows = list(csv.DictReader(fh))
xs = [float(r[xc]) for r in rows if r[yc] not in ("", None)]
ys = [float(r[yc]) for r in rows if r[yc] not in ("", None)]
try:
    import matplotlib.pyplot as plt
    plt.plot(xs, ys, "o-")
    if logy:
        plt.yscale("log")
    plt.xlabel(xc); plt.ylabel(yc); plt.grid(True)
    plt.savefig(path.rsplit(".", 1)[0] + ".png", dpi=150)
    print("wrote", path.rsplit(".", 1)[0] + ".png")
except ImportError:
    for x, y in zip(xs, ys):
        print(x, y)
"""


def _provenance(args, spec_path, extra=None):
    data = Path(spec_path).read_bytes()
    info = {
        "version": __version__,
        "kernel_backend": BACKEND,
        "spec_path": str(spec_path),
        "spec_sha256": hashlib.sha256(data).hexdigest(),
        "seed": args.seed,
        "tolerance": args.tol,
        "command": args.command,
        "parameters": {k: (v.tolist() if isinstance(v, np.ndarray) else v)
                       for k, v in vars(args).items()
                       if k not in ("func", "command") and not callable(v)},
    }
    if extra:
        info.update(extra)
    return info


def _emit(outdir: Path, name, provenance, csvs):
    outdir.mkdir(parents=True, exist_ok=True)
    for fname, (cols, rows) in csvs.items():
        _write_csv(outdir / fname, cols, rows)
    with open(outdir / f"{name}_provenance.json", "w") as fh:
        json.dump(provenance, fh, indent=2, sort_keys=True, default=_fmt)
    script = outdir / "plot.py"
    if not script.exists():
        script.write_text(PLOT_SCRIPT)


def cmd_validate(args):
    spec = parse_spec(args.spec)
    info = _provenance(args, args.spec, {
        "h": spec.h,
        "alpha_inf": spec.alpha_inf,
        "beta_inf": spec.beta_inf,
        "V0_total_mass": spec.V0_mass,
        "b0_l1": spec.b0_l1,
        "b0_l2_sq": spec.b0_l2_sq,
        "b1_sup": spec.b1_sup,
        "body_radius": spec.body_radius,
        "atoms": [[x, m] for x, m in spec.atoms],
    })
    _emit(Path(args.out), "validate", info, {})
    print(f"valid spec: h={spec.h}, body radius {spec.body_radius}")
    return EXIT_OK


def _probe_function(seed, radius):
    rng = np.random.default_rng(seed)
    ks = rng.uniform(0.3, 2.5, 3)
    cs = rng.standard_normal(3) + 1j * rng.standard_normal(3)

    def f(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape, dtype=complex)
        for k, c in zip(ks, cs):
            out += c * np.cos(k * x) * np.exp(-(x / radius) ** 2)
        return out

    return f


def cmd_resolve(args):
    spec = parse_spec(args.spec)
    point = SpectralPoint(args.E, args.eps, outgoing=(args.eps == 0.0))
    f = _probe_function(args.seed, max(2.0, spec.body_radius))
    rhs = lambda x: (1.0 + np.asarray(x) ** 2) ** (-args.s / 2.0) * f(x)
    sol = solve(spec, point, rhs, domain_radius=args.radius)
    if sol.residual > args.tol:
        print(f"solve residual {sol.residual:.3e} exceeds tolerance {args.tol}",
              file=sys.stderr)
        return EXIT_NUMERICAL
    rows = []
    for p in range(sol.grid.n_panels):
        for k in range(sol.grid.n):
            rows.append({"x": sol.grid.x[p, k],
                         "re_v": sol.v[p, k].real, "im_v": sol.v[p, k].imag,
                         "re_p": sol.p[p, k].real, "im_p": sol.p[p, k].imag})
    wn = weighted_norm(sol, args.s)
    info = _provenance(args, args.spec, {
        "residual": sol.residual, "condition": sol.condition,
        "weighted_norm": wn, "kappa": _fmt(sol.kappa),
        "truncation_radius": sol.domain_radius,
    })
    _emit(Path(args.out), "resolve", info,
          {"solution.csv": (["x", "re_v", "im_v", "re_p", "im_p"], rows)})
    print(f"residual {sol.residual:.3e}; weighted norm {wn:.6g}")
    return EXIT_OK


def cmd_sweep(args):
    spec = parse_spec(args.spec)
    rep = lap_sweep(spec, args.s, args.h_grid, args.E, args.eps,
                    domain_radius=args.radius, seed=args.seed,
                    iters=args.iters, probes=2)
    cols = ["h", "E", "eps", "ext_norm", "full_norm", "h_times_ext_norm",
            "h_times_log_full_norm", "converged", "error"]
    info = _provenance(args, args.spec, {"fits": rep.fits, "meta": rep.meta})
    _emit(Path(args.out), "sweep", info, {"sweep.csv": (cols, rep.rows)})
    bad = [r for r in rep.rows if "error" in r]
    print(f"{len(rep.rows)} rows ({len(bad)} failed); fits: {rep.fits}")
    if any(not r.get("converged", True) for r in rep.rows if "error" not in r):
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_carleman(args):
    spec = parse_spec(args.spec)
    R1 = args.R1 if args.R1 is not None else spec.body_radius
    phase = choose_phase_slope(spec, args.E, R1, tau_target=args.tau_target)
    mu = build_mu(spec, phase, args.E)
    weight = build_weight(spec, phase, args.E, s=args.s, mu=mu)
    checks = check_atom_inequalities(weight)
    report = constant_report(spec, phase, weight, args.E, eps0=max(abs(args.eps), 0.1))
    point = SpectralPoint(args.E, args.eps, outgoing=(args.eps == 0.0))
    f = _probe_function(args.seed, max(2.0, spec.body_radius))
    est = evaluate_estimate(spec, phase, weight, point, f)
    rows = [{"x": x, "mass": mu.atom_mass(x), "W": weight.W.get(x, 0.0),
             "gamma": weight.gamma.get(x, float("nan")),
             "expr1": e1, "expr2": e2, "nonnegative": (e1 >= 0 and e2 >= 0)}
            for x, (e1, e2) in sorted(checks.items())]
    ratio_log = (np.log(est["lhs"]) - np.log(est["rhs_f"] + est["rhs_eps"])
                 if est["lhs"] > 0 and est["rhs_f"] + est["rhs_eps"] > 0 else -np.inf)
    info = _provenance(args, args.spec, {
        "phase": {"R1": phase.R1, "k": phase.k, "sup_phi": phase.sup_phi},
        "tau": weight.tau, "kappa": weight.kappa, "M": weight.M,
        "log_C": report.log_value,
        "constant_factors": report.factors,
        "estimate": {k: v for k, v in est.items() if k != "solution"},
        "log_lhs_over_rhs": float(ratio_log),
        "estimate_holds": bool(ratio_log <= report.log_value),
    })
    _emit(Path(args.out), "carleman", info,
          {"atoms.csv": (["x", "mass", "W", "gamma", "expr1", "expr2", "nonnegative"], rows)})
    print(f"tau={weight.tau:.6g} k={phase.k:.6g} log C(h)={report.log_value:.6g} "
          f"log(lhs/rhs)={float(ratio_log):.6g}")
    return EXIT_OK


def cmd_resonances(args):
    spec = parse_spec(args.spec)
    if args.lambda0 is not None:
        cutoff = CutoffSpec.for_spec(spec)
        rep = strip_certificate(spec, args.lambda0, args.rect[1], args.theta_grid,
                                cutoff=cutoff)
        rows = [{"lam_re": r["lam"].real, "lam_im": r["lam"].imag, "k1": r["k1"],
                 "k2": r["k2"], "norm": r["norm"], "accepted": r["accepted"]}
                for r in rep.norm_rows]
        info = _provenance(args, args.spec, {"strip": rep.strip, "notes": _json_safe(rep.notes)})
        _emit(Path(args.out), "resonances", info,
              {"norm_rows.csv": (["lam_re", "lam_im", "k1", "k2", "norm", "accepted"], rows)})
        print(f"strip: {rep.strip}")
        return EXIT_OK if rep.strip["theta0"] is not None else EXIT_NUMERICAL
    zr = zero_resonance_test(spec)
    rep = find_resonances(spec, args.rect, tolerance=args.tol)
    rows = [{"lam_re": z["lam"].real, "lam_im": z["lam"].imag,
             "multiplicity": z["multiplicity"], "residual": z["residual"]}
            for z in rep.zeros]
    info = _provenance(args, args.spec, {
        "rectangle": list(args.rect),
        "n_zeros": len(rep.zeros),
        "n_verified_rectangles": len(rep.verified_rectangles),
        "zero_resonance": {"has_zero_resonance": zr["has_zero_resonance"],
                           "margin": zr["margin"],
                           "inconclusive": zr["inconclusive"]},
    })
    _emit(Path(args.out), "resonances", info,
          {"zeros.csv": (["lam_re", "lam_im", "multiplicity", "residual"], rows)})
    print(f"{len(rep.zeros)} zero(s); threshold resonance: {zr['has_zero_resonance']}")
    return EXIT_OK


def _json_safe(obj):
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, complex):
        return _fmt(obj)
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return obj


def cmd_evolve(args):
    spec = parse_spec(args.spec)
    zr = zero_resonance_test(spec)
    if zr["has_zero_resonance"] or zr["inconclusive"]:
        print("zero-resonance gate failed: spectral quadrature at the threshold "
              f"is not certified (margin {zr['margin']:.3e})", file=sys.stderr)
        return EXIT_HYPOTHESIS
    cutoff = CutoffSpec.for_spec(spec)
    rng = np.random.default_rng(args.seed)
    width = max(1.0, spec.body_radius)
    c0, c1 = rng.standard_normal(2)
    v = lambda x: (c0 + c1 * np.cos(x)) * np.exp(-(np.asarray(x) / width) ** 2)
    t_grid = args.t_grid
    if args.kind == "schrodinger":
        res = schrodinger_evolve(spec, cutoff, v, t_grid, args.Lambda)
    else:
        res = wave_evolve(spec, cutoff, v, t_grid, args.Lambda, kind=args.kind)
    rows = [{"t": t, "norm": n} for t, n in zip(res.t, res.norms)]
    fit = None
    pos = res.norms > 0
    if np.sum(pos) >= 2 and args.kind != "schrodinger":
        lo = float(res.t[1]) if len(res.t) > 1 else 0.0
        fit = decay_fit(res.t, res.norms, (lo, float(res.t[-1])))
    info = _provenance(args, args.spec, {
        "Lambda": args.Lambda, "kind": args.kind,
        "halving_error": res.halving_error,
        "tail_estimate": res.tail_estimate,
        "jump_positivity": res.meta["jump_positivity"],
        "decay_fit": fit,
        "zero_resonance_margin": zr["margin"],
    })
    _emit(Path(args.out), "evolve", info, {"evolution.csv": (["t", "norm"], rows)})
    print(f"{len(rows)} samples; halving error {res.halving_error:.3e}"
          + (f"; decay rate {fit['rate']:.4f} (r2 {fit['r_squared']:.3f})" if fit else ""))
    return EXIT_NUMERICAL if res.refinement_needed else EXIT_OK


def build_parser():
    # allow_abbrev off: --s is a real flag and must not clash with --spec/--seed
    ap = argparse.ArgumentParser(prog="bvschro", description=__doc__,
                                 allow_abbrev=False)
    ap.add_argument("--spec", required=True, help="coefficient spec file")
    ap.add_argument("--out", default="out", help="output directory")
    ap.add_argument("--seed", type=int, default=0, help="probe RNG seed")
    ap.add_argument("--tol", type=float, default=1e-9, help="solver tolerance")
    sub = ap.add_subparsers(dest="command", required=True)

    sub.add_parser("validate", help="parse + invariant checks")

    p = sub.add_parser("resolve", help="single resolvent solve")
    p.add_argument("--E", type=float, required=True)
    p.add_argument("--eps", type=float, default=0.01)
    p.add_argument("--s", type=float, default=1.0)
    p.add_argument("--radius", type=float, default=None)

    p = sub.add_parser("sweep", help="limiting-absorption h-sweep")
    p.add_argument("--h-grid", dest="h_grid", type=_grid_arg, required=True)
    p.add_argument("--E", type=float, required=True)
    p.add_argument("--eps", type=float, default=0.0)
    p.add_argument("--s", type=float, default=1.0)
    p.add_argument("--radius", type=float, default=None)
    p.add_argument("--iters", type=int, default=120,
                   help="power-iteration cap per norm estimate")

    p = sub.add_parser("carleman", help="weight construction + estimate check")
    p.add_argument("--E", type=float, required=True)
    p.add_argument("--eps", type=float, default=0.01)
    p.add_argument("--s", type=float, default=1.0)
    p.add_argument("--R1", type=float, default=None)
    p.add_argument("--tau-target", dest="tau_target", type=float, default=None)

    p = sub.add_parser("resonances", help="pole search / strip certificate")
    p.add_argument("--rect", type=_rect_arg, required=True)
    p.add_argument("--lambda0", type=float, default=None,
                   help="certify a strip instead of searching the rectangle")
    p.add_argument("--theta-grid", dest="theta_grid", type=_list_arg,
                   default=[0.05, 0.1, 0.2, 0.4, 0.8])

    p = sub.add_parser("evolve", help="propagator time series")
    p.add_argument("--t-grid", dest="t_grid", type=_grid_arg, required=True)
    p.add_argument("--Lambda", type=float, default=40.0)
    p.add_argument("--kind", choices=("schrodinger", "cosine", "sine"),
                   default="cosine")
    return ap


_COMMANDS = {
    "validate": cmd_validate,
    "resolve": cmd_resolve,
    "sweep": cmd_sweep,
    "carleman": cmd_carleman,
    "resonances": cmd_resonances,
    "evolve": cmd_evolve,
}


def main(argv=None):
    import os
    threads = os.environ.get("BVSCHRO_THREADS")
    if threads:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, threads)
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (SpecParseError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except HypothesisFailureError as exc:
        print(f"hypothesis failure: {exc}", file=sys.stderr)
        return EXIT_HYPOTHESIS
    except (SingularMatchingError, UnresolvedClusterError, OverflowError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
