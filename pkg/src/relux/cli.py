"""Command-line entry point: ``relux <subcommand> ...``.

Exit codes: 0 success, 1 contract violation (a verification failed), 2 usage
error or malformed input.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import random
import sys
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction

import numpy as np

from . import bounds as bd
from .approx import (PrecisionError, get_activation, relu_activation_approx_net, relu_from_activation_net,
                     relu_polynomial_net, sawtooth_square_net, square_block, transform_activation_to_relu,
                     transform_relu_to_activation)
from .compile1d import CaseAnalysisError, build_max_region_network, compile_width3, compile_widthW
from .compilend import (PwlSimplicial, ReconstructionMismatch, compile_simplicial, kuhn_grid_interpolant,
                        random_probe_points)
from .core import (BINARY64, RATIONAL, NetworkFormatError, eval_network, load_network, load_pwl,
                   network_to_pwl1d, region_report, save_network)
from .core.pwl import pwl_from_json
from .core.scalars import MPFR, parse_rational
from .separation import (TARGETS, CertificateFailure, random_candidate, separation_certificate,
                         sobolev_rate_experiment)


class UsageError(Exception):
    pass


class ContractViolation(Exception):
    pass


def _ints(s):
    try:
        return [int(v) for v in s.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"expected comma-separated integers, got {s!r}") from None


def _rationals(s):
    try:
        return [parse_rational(v.strip()) for v in s.split(",") if v.strip()]
    except (ValueError, ZeroDivisionError):
        raise UsageError(f"expected comma-separated rationals, got {s!r}") from None


def _write_json(path, obj):
    text = json.dumps(obj, indent=1, sort_keys=True) + "\n"
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _write_text(path, text):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _save(net, args):
    if args.out:
        save_network(net, args.out)


def _probe_1d(seed, count=200, den=997):
    rng = random.Random(seed)
    return [Fraction(rng.randint(-4 * den, 4 * den), den) for _ in range(count)]


# --- subcommands ---------------------------------------------------------------------

def cmd_analyze(args):
    net = load_network(args.net)
    bbox = tuple(_rationals(args.bbox)) if args.bbox else None
    rep = region_report(net, bbox=bbox, seed=args.seed)
    out = {"regions": rep.regions, "nonconstant_regions": rep.nonconstant_regions,
           "monotone_regions": rep.monotone_regions, "method": rep.method, "design": list(net.design)}
    if args.verify and net.n_in == 1 and net.n_out == 1 and net.mode == RATIONAL:
        f = network_to_pwl1d(net)
        bad = [x for x in _probe_1d(args.seed) if f(x) != eval_network(net, [x])[0]]
        out["verified"] = not bad
        if bad:
            raise ContractViolation(f"symbolic form disagrees with evaluation at {bad[0]}")
    print(f"regions {rep.regions}, nonconstant {rep.nonconstant_regions}, monotone {rep.monotone_regions}, "
          f"method {rep.method}")
    if args.report:
        _write_json(args.report, out)


def cmd_bounds(args):
    design = _ints(args.design)
    try:
        out = {"design": design}
        if design[0] == 1 and all(n >= 2 for n in design[1:-1]):
            R, Rt = bd.r_exact_1d(design)
            out.update(exact_regions=R, exact_nonconstant=Rt)
            print(f"R = {R} (exact, n0 = 1); nonconstant {Rt}")
        if len(design) >= 3:
            for v in bd.VARIANTS:
                br = bd.upper_bound_general(design, v)
                out[f"upper_{v}"] = br.value
                print(f"upper bound ({v}) = {br.value}")
            if args.report:
                _write_text(args.report, bd.upper_bound_general(design, "corrected").to_csv())
    except ValueError as e:
        raise UsageError(str(e)) from None
    if args.verify and "exact_regions" in out and "upper_corrected" in out:
        if out["upper_corrected"] < out["exact_regions"]:
            raise ContractViolation("corrected bound below the exact count")
    if args.out:
        _write_json(args.out, out)


def cmd_maxnet(args):
    design = _ints(args.design)
    try:
        net = build_max_region_network(design)
        R, _ = bd.r_exact_1d(design)
    except ValueError as e:
        raise UsageError(str(e)) from None
    _save(net, args)
    got = region_report(net).regions
    print(f"design {design}: {got} regions (formula {R})")
    if args.verify and got != R:
        raise ContractViolation(f"network has {got} regions, formula says {R}")
    if args.report:
        _write_json(args.report, {"design": design, "regions": got, "formula": R})


def cmd_compile1d(args):
    f = load_pwl(args.pwl)
    try:
        net = compile_width3(f) if args.width == 3 else compile_widthW(f, args.width)
    except CaseAnalysisError as e:
        raise ContractViolation(str(e)) from None
    except ValueError as e:
        raise UsageError(str(e)) from None
    _save(net, args)
    rec = {"k": f.k, "width": net.width, "depth": net.depth}
    if args.verify:
        rec["exact"] = network_to_pwl1d(net) == f
        if not rec["exact"]:
            raise ContractViolation("compiled network differs from the input function")
    print(json.dumps(rec, sort_keys=True))
    if args.report:
        _write_json(args.report, rec)


def cmd_compilend(args):
    if args.complex:
        try:
            with open(args.complex) as fh:
                cx = PwlSimplicial.from_json(json.load(fh))
        except (KeyError, TypeError, ValueError) as e:
            raise UsageError(f"{args.complex}: {e}") from None
    elif args.target:
        f, _ = TARGETS[args.target]
        cx = kuhn_grid_interpolant(f, 2, args.res)
    else:
        raise UsageError("give --complex FILE or --target NAME --res R")
    try:
        net = compile_simplicial(cx, validate=args.verify)
    except ReconstructionMismatch as e:
        raise ContractViolation(str(e)) from None
    _save(net, args)
    rec = {"vertices": len(cx.vertices), "simplices": len(cx.simplices), "width": net.width, "depth": net.depth}
    if args.verify:
        pts = list(cx.vertices) + random_probe_points(cx.dim, 200, seed=args.seed)
        bad = [p for p in pts if eval_network(net, list(p))[0] != cx(p)]
        rec["exact"] = not bad
        if bad:
            raise ContractViolation(f"mismatch at {bad[0]}")
    print(json.dumps(rec, sort_keys=True))
    if args.report:
        _write_json(args.report, rec)


def cmd_approx(args):
    op = args.op
    try:
        if op == "square" and args.act:
            blk, rep = square_block(args.act, args.h)
            net = blk.network()
        elif op == "square":
            net, rep = sawtooth_square_net(args.n if args.n is not None else 5)
        elif op == "relu":
            if not args.act:
                raise UsageError("--op relu needs --act")
            net, rep = relu_from_activation_net(args.act, args.n or 9, mode=args.mode or MPFR)
        elif op == "poly":
            coeffs = _rationals(args.coeffs or "0,0,1")
            net, rep = relu_polynomial_net(coeffs, args.eps or 1e-3)
        else:
            if not args.act:
                raise UsageError("--op activation needs --act")
            net, rep = relu_activation_approx_net(args.act, args.eps or 1e-2)
    except PrecisionError as e:
        raise ContractViolation(str(e)) from None
    except ValueError as e:
        raise UsageError(str(e)) from None
    _save(net, args)
    print(json.dumps(rep.as_dict(), sort_keys=True))
    if args.report:
        _write_json(args.report, rep.as_dict())
    if args.verify and not rep.ok:
        raise ContractViolation(f"error {rep.max_abs_error:.3g} exceeds bound {rep.bound:.3g}")


def cmd_transform(args):
    net = load_network(args.net)
    try:
        if args.to == "relu":
            new, rep = transform_activation_to_relu(net, args.eps)
        else:
            get_activation(args.to)
            new, rep = transform_relu_to_activation(net, args.to, args.eps)
    except PrecisionError as e:
        raise ContractViolation(str(e)) from None
    except ValueError as e:
        raise UsageError(str(e)) from None
    _save(new, args)
    print(json.dumps(rep.as_dict(), sort_keys=True))
    if args.report:
        _write_json(args.report, rep.as_dict())
    if args.verify and not rep.ok:
        raise ContractViolation(f"error {rep.max_abs_error:.3g} exceeds eps {rep.bound:.3g}")


def _load_candidates(spec, seed):
    if spec.startswith("random:"):
        count = int(spec.split(":", 1)[1])
        rng = random.Random(seed)
        return [random_candidate(rng) for _ in range(count)]
    with open(spec) as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as e:
            raise UsageError(f"{spec}: line {e.lineno}: {e.msg}") from None
    items = d if isinstance(d, list) else [d]
    return [pwl_from_json(x) for x in items]


def _certify(job):
    f, L, regions = job
    try:
        return separation_certificate(f, L, regions).row()
    except CertificateFailure as e:
        return {"error": str(e)}


def cmd_separation(args):
    cands = _load_candidates(args.candidates, args.seed)
    jobs = [(f, args.L, args.regions) for f in cands]
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as ex:
            rows = list(ex.map(_certify, jobs))
    else:
        rows = [_certify(j) for j in jobs]
    failed = [r for r in rows if "error" in r or not r["holds"]]
    cols = ["L", "gadget_regions", "candidate_regions", "non_good_intervals", "good_pairs", "crossings",
            "lower_bound", "measured_l1", "holds"]
    buf = io.StringIO()
    w = csv.DictWriter(buf, cols + ["error"], lineterminator="\n", restval="")
    w.writeheader()
    for r in rows:
        w.writerow(r)
    if args.report:
        _write_text(args.report, buf.getvalue())
    print(f"{len(rows)} candidates, {len(failed)} failures")
    if failed:
        raise ContractViolation(f"{len(failed)} certificates failed")


def _sobolev_one(job):
    target, r = job
    return sobolev_rate_experiment(target, [r])


def cmd_sobolev(args):
    res = _ints(args.res)
    if args.target not in TARGETS:
        raise UsageError(f"unknown target {args.target!r}; choose from {sorted(TARGETS)}")
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as ex:
            parts = list(ex.map(_sobolev_one, [(args.target, r) for r in res]))
        rep = parts[0]
        for p in parts[1:]:
            for k in ("resolutions", "l1_errors", "grad_errors", "depths", "widths"):
                getattr(rep, k).extend(getattr(p, k))
        e = rep.errors
        rep.order = float(-np.polyfit(np.log(np.asarray(res, float)), np.log(e), 1)[0]) if len(e) > 1 else float("nan")
    else:
        rep = sobolev_rate_experiment(args.target, res)
    text = rep.to_csv()
    _write_text(args.report, text) if args.report else sys.stdout.write(text)
    print(f"fitted order {rep.order:.3f}; ratios {', '.join(f'{r:.3f}' for r in rep.ratios)}")
    if args.verify and len(res) > 1 and rep.order < 0.8:
        raise ContractViolation(f"fitted order {rep.order:.3f} < 0.8")


# --- parser ------------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(2)


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="seed for all randomness")
    common.add_argument("--mode", choices=[RATIONAL, BINARY64, MPFR], default=None, help="scalar mode")
    common.add_argument("--verify", action=argparse.BooleanOptionalAction, default=True,
                        help="re-check the output (default on)")
    common.add_argument("--jobs", type=int, default=1, help="worker processes for sweeps")
    common.add_argument("--out", help="output artifact path")
    common.add_argument("--report", help="report path (JSON or CSV)")

    p = _Parser(prog="relux", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    s = sub.add_parser("analyze", parents=[common], help="region report of a network file")
    s.add_argument("--net", required=True)
    s.add_argument("--bbox", help="x0,y0,x1,y1 for two-input networks")
    s.set_defaults(func=cmd_analyze)

    s = sub.add_parser("bounds", parents=[common], help="exact count and upper bounds for a design")
    s.add_argument("--design", required=True, help="comma-separated widths n0,...,n_{L+1}")
    s.set_defaults(func=cmd_bounds)

    s = sub.add_parser("maxnet", parents=[common], help="network attaining the one-dimensional maximum")
    s.add_argument("--design", required=True)
    s.set_defaults(func=cmd_maxnet)

    s = sub.add_parser("compile1d", parents=[common], help="compile a Pwl1D file")
    s.add_argument("--pwl", required=True)
    s.add_argument("--width", type=int, default=3)
    s.set_defaults(func=cmd_compile1d)

    s = sub.add_parser("compilend", parents=[common], help="compile a simplicial PWL function")
    s.add_argument("--complex", help="PwlSimplicial JSON file")
    s.add_argument("--target", choices=sorted(TARGETS))
    s.add_argument("--res", type=int, default=4)
    s.set_defaults(func=cmd_compilend)

    s = sub.add_parser("approx", parents=[common], help="approximation blocks")
    s.add_argument("--op", required=True, choices=["square", "relu", "poly", "activation"])
    s.add_argument("--act")
    s.add_argument("--n", type=int)
    s.add_argument("--eps", type=float)
    s.add_argument("--h", type=float, default=1e-3)
    s.add_argument("--coeffs", help="polynomial coefficients, lowest degree first")
    s.set_defaults(func=cmd_approx)

    s = sub.add_parser("transform", parents=[common], help="swap a network's activation")
    s.add_argument("--net", required=True)
    s.add_argument("--to", required=True, help="relu or a catalog activation")
    s.add_argument("--eps", type=float, required=True)
    s.set_defaults(func=cmd_transform)

    s = sub.add_parser("separation", parents=[common], help="width-inefficiency certificates")
    s.add_argument("--L", type=int, default=2)
    s.add_argument("--candidates", default="random:200", help="Pwl1D JSON file (object or list) or random:N")
    s.add_argument("--regions", type=int, help="region budget of the candidate class")
    s.set_defaults(func=cmd_separation)

    s = sub.add_parser("sobolev", parents=[common], help="W^{1,1} rate of compiled interpolants")
    s.add_argument("--target", default="bump2d")
    s.add_argument("--res", default="4,8,16")
    s.set_defaults(func=cmd_sobolev)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except (UsageError, NetworkFormatError, FileNotFoundError) as e:
        sys.stderr.write(f"relux {args.cmd}: {e}\n")
        return 2
    except ContractViolation as e:
        sys.stderr.write(f"relux {args.cmd}: verification failed: {e}\n")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
