"""Command-line front end: repstab {gen,check,stabilize,equiv,scan,trace-fit}."""
import argparse
import csv
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .cmx import read_cmx, round15, to_dict, write_cmx
from .equivalence import equivalence_scan, sphere_family, torus_family
from .errors import FitError, RepstabError, ValidationError
from .liealg import AlmostRep, newton_stabilize, rep_distance, su2_algebra, su2_almost_rep
from .qtorus import TorusPair, build_exact_qtorus, perturbed_pair, qtorus_defects, stabilize_qtorus
from .quantization import (SphereFunction, TorusFunction, axiom_residuals, drifted_quantization,
                           order_fit, parse_function, sphere_quadrature_quantization,
                           sphere_spin_quantization, torus_quadrature_quantization,
                           torus_theta_quantization, trace_profile)
from .linalg import comm, operator_norm
from .su2 import Su2Triple, build_exact_su2, casimir, perturbed_triple, stabilize_su2, su2_defects


def make_rng(*words):
    """PCG64 seeded through SeedSequence; extra words split independent streams."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(w) for w in words])))


def _clean(x):
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return round15(x) if np.isfinite(x) else str(x)
    if isinstance(x, (complex, np.complexfloating)):
        return {"re": round15(x.real), "im": round15(x.imag)}
    return x


def _envelope(args, result):
    cfg = {k: v for k, v in vars(args).items() if k != "func"}
    return {"tool": "repstab", "version": __version__, "command": args.command,
            "config": cfg, "seed": getattr(args, "seed", None), "result": result}


def _emit(args, result, path=None):
    text = json.dumps(_clean(_envelope(args, result)), sort_keys=True, indent=1)
    if path:
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        with open(path, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _write_csv(path, header, rows, meta):
    with open(path, "w", newline="") as fh:
        fh.write(f"# repstab {__version__} {json.dumps(_clean(meta), sort_keys=True)}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow(["" if v is None else v if isinstance(v, str) else _clean(v) for v in r])


def _ints(text):
    out = []
    for part in str(text).split(","):
        if ".." in part:
            a, b = part.split("..")
            out.extend(range(int(a), int(b) + 1))
        elif part:
            out.append(int(part))
    return out


def _floats(text):
    return tuple(float(x) for x in str(text).split(","))


# ---------------------------------------------------------------- gen

def cmd_gen(args):
    out = args.out or "."
    os.makedirs(out, exist_ok=True)
    files, measured = [], {}
    if args.kind == "su2":
        rep = build_exact_su2(args.n)
        mats = rep.X
        cas = casimir(*mats) + (args.n**2 - 1) / 4 * np.eye(args.n)
        measured = {"casimir_residual": operator_norm(cas),
                    "bracket_residual": max(operator_norm(comm(mats[j], mats[(j + 1) % 3]) - mats[(j + 2) % 3])
                                            for j in range(3))}
    elif args.kind == "qtorus":
        rep = build_exact_qtorus(args.n, args.theta1, args.theta2)
        mats = rep.X
        q = np.exp(2j * np.pi / args.n)
        measured = {"commutation_residual": operator_norm(mats[0] @ mats[1] - q * mats[1] @ mats[0])}
    elif args.kind == "perturb":
        rng = make_rng(args.seed)
        k = args.k or args.n
        if args.target == "su2":
            t = perturbed_triple(args.n, k, args.scale, rng, c=args.c)
            mats = t.x
            r1, r2, _ = su2_defects(t)
            measured = {"r1": r1, "r2": r2}
        elif args.target == "qtorus":
            t = perturbed_pair(args.n, k, args.scale * k**2, rng, c=args.c)
            mats = t.x
            r1, r2, _ = qtorus_defects(t)
            measured = {"r1": r1, "r2": r2}
        else:
            t = su2_almost_rep(args.n, args.scale, rng)
            mats = t.images
            mu, K, eps = t.stats
            measured = {"mu": mu, "K": K, "eps": eps}
    elif args.kind == "quantization":
        Q = _quantization(args.manifold, args.backend, args)
        gens = (1, 2, 3) if args.manifold == "sphere" else (1, 2)
        cls = SphereFunction if args.manifold == "sphere" else TorusFunction
        mats = [Q(args.k, cls.u(j)) for j in gens]
        measured = {"dim": Q.dim(args.k)}
    else:
        raise ValidationError(f"unknown gen kind {args.kind}")
    for j, M in enumerate(mats, 1):
        path = os.path.join(out, f"x{j}.cmx")
        write_cmx(path, M, binary=args.binary)
        files.append(path)
    _emit(args, {"files": files, "measured": measured}, os.path.join(out, "manifest.json"))
    return 0


# ---------------------------------------------------------------- check / stabilize

def _load(args):
    mats = [read_cmx(p) for p in args.inputs]
    return mats


def _triple(args, mats):
    if len(mats) != 3:
        raise ValidationError("su2 input needs three matrices")
    return Su2Triple(mats[0], mats[1], mats[2], args.k, args.c)


def _pair(args, mats):
    if len(mats) != 2:
        raise ValidationError("qtorus input needs two matrices")
    return TorusPair(mats[0], mats[1], args.k, args.c)


def cmd_check(args):
    mats = _load(args)
    if args.mode == "su2":
        r1, r2, n = su2_defects(_triple(args, mats))
    elif args.mode == "qtorus":
        r1, r2, n = qtorus_defects(_pair(args, mats))
    else:
        mu, K, eps = AlmostRep(su2_algebra(), mats).stats
        _emit(args, {"mu": mu, "K": K, "eps": eps, "dim": mats[0].shape[0]}, args.out)
        return 0
    _emit(args, {"r1": r1, "r2": r2, "dim": n, "dim_bound_ok": n < 2 * (args.k + args.c)}, args.out)
    return 0


def cmd_stabilize(args):
    mats = _load(args)
    if args.mode == "su2":
        rep = stabilize_su2(_triple(args, mats))
        res = {"distances": rep.distances, "chain_eigenvalues": rep.chain_eigenvalues,
               "R1": rep.residual_R1, "R2": rep.residual_R2, "dim": rep.rep.n,
               "basis": to_dict(rep.rep.basis)}
    elif args.mode == "qtorus":
        rep = stabilize_qtorus(_pair(args, mats))
        res = {"distances": rep.distances, "theta": [rep.rep.theta1, rep.rep.theta2],
               "R1": rep.residual_R1, "R2": rep.residual_R2, "drift": rep.drift,
               "dim": rep.rep.n, "basis": to_dict(rep.rep.basis)}
    else:
        t = AlmostRep(su2_algebra(), mats)
        fixed, hist = newton_stabilize(t)
        res = {"history": [{"mu": h[0], "K": h[1], "eps": h[2]} for h in hist],
               "iterations": len(hist) - 1, "distance": rep_distance(t, fixed)}
    _emit(args, res, args.out)
    return 0


# ---------------------------------------------------------------- quantizations

def _quantization(manifold, backend, args, c=None):
    c = args.c if c is None else c
    if manifold == "sphere":
        table = {"spin": lambda: sphere_spin_quantization(int(c)),
                 "quadrature": lambda: sphere_quadrature_quantization(int(c))}
    else:
        table = {"theta": torus_theta_quantization, "quadrature": torus_quadrature_quantization,
                 "drift": lambda: drifted_quantization(
                     torus_theta_quantization(), p=_floats(args.p), a=args.a, b=args.b,
                     eta=args.eta, seed=args.seed)}
    if backend not in table:
        raise ValidationError(f"unknown {manifold} backend {backend!r}; choose from {sorted(table)}")
    return table[backend]()


def _functions(args):
    if args.f:
        fs = [parse_function(s, args.manifold) for s in args.f]
        return fs, list(args.f)
    return sphere_family() if args.manifold == "sphere" else torus_family()


def cmd_equiv(args):
    names = args.backend.split(":")
    if len(names) != 2:
        raise ValidationError("--backend takes T:Q, e.g. quadrature:spin")
    T = _quantization(args.manifold, names[0], args)
    Q = _quantization(args.manifold, names[1], args, c=args.c2 if args.c2 is not None else args.c)
    fs, ids = _functions(args)
    ks = _ints(args.k)
    res = equivalence_scan(T, Q, ks, fs, ids, mode=args.mode)
    prefix = args.out or "equiv"
    _emit(args, res.to_dict(), prefix + ".json")
    _write_csv(prefix + ".csv", ["k", "f", "residual"], res.rows(),
               {"command": "equiv", "seed": args.seed})
    print(json.dumps(_clean({"slopes": res.slopes, "fitted_order": res.fitted_order}), sort_keys=True))
    return 0


# ---------------------------------------------------------------- scan

def _threads():
    try:
        return max(1, int(os.environ.get("REPSTAB_THREADS", "") or (os.cpu_count() or 1)))
    except ValueError:
        raise ValidationError("REPSTAB_THREADS must be a positive integer")


def _scan_task(args, k, s):
    if args.ensemble == "su2-stability":
        r = stabilize_su2(perturbed_triple(k, k, args.scale / k**2, make_rng(s, k)))
        return (k, s, max(r.distances), r.rep.n == k)
    if args.ensemble == "qtorus-stability":
        r = stabilize_qtorus(perturbed_pair(k, k, args.scale, make_rng(s, k)))
        return (k, s, max(r.distances), r.rep.n == k)
    if args.ensemble in ("sphere-p2-residual", "torus-p2-residual"):
        if args.ensemble.startswith("sphere"):
            Q, cls = sphere_spin_quantization(int(args.c)), SphereFunction
        else:
            Q, cls = torus_theta_quantization(), TorusFunction
        e1, e2, e3 = axiom_residuals(Q, k, cls.u(1), cls.u(2))
        return (k, s, e2, True)
    t = su2_almost_rep(k, args.scale, make_rng(s, k))
    fixed, hist = newton_stabilize(t)
    return (k, s, rep_distance(t, fixed), len(hist) - 1)


def _scan_rows(args, ks, seeds):
    # residual ensembles are deterministic, so they run once per k
    seeds = [0] if args.ensemble.endswith("p2-residual") else seeds
    tasks = [(k, s) for k in ks for s in seeds]
    # map keeps task order, so the merged rows do not depend on the thread count
    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        return list(pool.map(lambda ks_: _scan_task(args, *ks_), tasks))


def cmd_scan(args):
    ks = _ints(args.k)
    seeds = _ints(args.seeds)
    rows = _scan_rows(args, ks, seeds)
    per_k = [max(r[2] for r in rows if r[0] == k) for k in ks]
    slope, icpt, r2 = order_fit(ks, per_k)
    path = args.out or f"scan-{args.ensemble}.csv"
    rows = list(rows) + [("summary", "slope", slope, r2)]
    _write_csv(path, ["k", "seed", "metric", "extra"], rows,
               {"command": "scan", "ensemble": args.ensemble, "seed": args.seed, "scale": args.scale})
    print(json.dumps(_clean({"slope": slope, "intercept": icpt, "r2": r2, "csv": path})))
    return 0


# ---------------------------------------------------------------- trace-fit

def _re(x):
    return None if x is None else complex(x).real


def cmd_trace_fit(args):
    Q = _quantization(args.manifold, args.backend, args)
    fs = [parse_function(s, args.manifold) for s in (args.f or ["1"])]
    ks = _ints(args.k)
    rows, fits, dims = trace_profile(Q, fs, ks)
    names = list(args.f or ["1"])
    prefix = args.out or "trace"
    out_rows = [(k, names[i], tr.real, tr.imag, _re(kf), _re(rk), _re(lo)) for k, i, tr, kf, rk, lo in rows]
    _write_csv(prefix + ".csv", ["k", "f", "trace_re", "trace_im", "k_mean", "R_k", "local_R"], out_rows,
               {"command": "trace-fit", "seed": args.seed})
    for fit in fits:
        fit["f"] = names[fit["f"]]
    _emit(args, {"fits": fits, "dim_minus_k": dims}, prefix + ".json")
    print(json.dumps(_clean({"fits": fits, "dim_minus_k": dims}), sort_keys=True))
    return 0


# ---------------------------------------------------------------- parser

def build_parser():
    p = argparse.ArgumentParser(prog="repstab", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--k", default=None)
        sp.add_argument("--c", type=float, default=0.0)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", default=None)

    g = sub.add_parser("gen", help="write exact, perturbed or quantization matrices as CMX")
    g.add_argument("kind", choices=["su2", "qtorus", "perturb", "quantization"])
    common(g)
    g.add_argument("--n", type=int, default=4)
    g.add_argument("--theta1", type=float, default=0.0)
    g.add_argument("--theta2", type=float, default=0.0)
    g.add_argument("--scale", type=float, default=1e-3)
    g.add_argument("--target", choices=["su2", "qtorus", "newton"], default="su2")
    g.add_argument("--manifold", choices=["sphere", "torus"], default="sphere")
    g.add_argument("--backend", default=None)
    g.add_argument("--binary", action="store_true")
    g.set_defaults(func=cmd_gen)

    for name, fn, help_ in (("check", cmd_check, "measure axiom residuals of input matrices"),
                            ("stabilize", cmd_stabilize, "recover an exact representation")):
        s = sub.add_parser(name, help=help_)
        s.add_argument("inputs", nargs="+")
        common(s)
        s.add_argument("--mode", choices=["su2", "qtorus", "newton"], default="su2")
        s.set_defaults(func=fn)

    e = sub.add_parser("equiv", help="equivalence of two quantizations over a k list")
    common(e)
    e.add_argument("--manifold", choices=["sphere", "torus"], default="sphere")
    e.add_argument("--backend", default=None, help="T:Q, default quadrature:spin or theta:drift")
    e.add_argument("--mode", "--order", dest="mode", choices=["standard", "three_halves"],
                   default="standard")
    e.add_argument("--c2", type=float, default=None, help="dimension offset of the second backend")
    e.add_argument("--f", action="append", help="function literal; repeat for several")
    e.add_argument("--p", default="0,0")
    e.add_argument("--a", type=float, default=0.0)
    e.add_argument("--b", type=float, default=0.0)
    e.add_argument("--eta", type=float, default=1.0)
    e.set_defaults(func=cmd_equiv)

    s = sub.add_parser("scan", help="ensemble sweep over k with a fitted slope")
    s.add_argument("ensemble", choices=["su2-stability", "qtorus-stability", "sphere-p2-residual",
                                        "torus-p2-residual", "newton"])
    common(s)
    s.add_argument("--seeds", default="0")
    s.add_argument("--scale", type=float, default=1.0)
    s.set_defaults(func=cmd_scan)

    t = sub.add_parser("trace-fit", help="trace table and R estimates")
    common(t)
    t.add_argument("--manifold", choices=["sphere", "torus"], default="sphere")
    t.add_argument("--backend", default=None)
    t.add_argument("--f", action="append")
    t.set_defaults(func=cmd_trace_fit)
    return p


def _defaults(args):
    if getattr(args, "backend", "") is None:
        pair = args.command == "equiv"
        if args.manifold == "sphere":
            args.backend = "quadrature:spin" if pair else "spin"
        else:
            args.backend = "theta:drift" if pair else "theta"
    if args.command in ("equiv", "trace-fit", "scan") and args.k is None:
        args.k = "8,16,32,64"
    if args.command in ("gen",):
        args.k = int(args.k) if args.k is not None else None
        if args.kind == "quantization" and args.k is None:
            args.k = args.n
        if args.kind == "quantization" and args.manifold == "sphere" and args.c == 0.0:
            args.c = 1.0
    if args.command in ("check", "stabilize"):
        if args.k is None and args.mode != "newton":
            raise ValidationError("--k is required")
        args.k = int(args.k) if args.k is not None else None
    if args.command in ("equiv", "trace-fit") and args.manifold == "sphere" and args.c == 0.0:
        args.c = 1.0
    return args


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args = _defaults(args)
        return args.func(args)
    except FitError as err:
        print(f"repstab: fit error: {err}", file=sys.stderr)
        return err.exit_code
    except RepstabError as err:
        print(f"repstab: {type(err).__name__}: {err}", file=sys.stderr)
        return err.exit_code
    except (OSError, ValueError) as err:
        print(f"repstab: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
