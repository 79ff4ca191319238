"""Command line entry point: ``hermanlab <command> [action] [options]``."""
from __future__ import annotations

import argparse
import os
import json
import sys
from pathlib import Path

from . import __version__
from .config import RunConfig, dumps, provenance


def _complex_pair(text: str) -> list:
    re_, im = text.split(",")
    return [float(re_), float(im)]


def _pair(text: str) -> list:
    a, b = text.split(",")
    return [float(a), float(b)]


def _floats(text: str) -> list:
    return [float(x) for x in text.split(",")]


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hermanlab", description="Herman curve laboratory")
    ap.add_argument("--version", action="version", version=f"hermanlab {__version__}")
    ap.add_argument("--threads", type=int, default=None)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, out=True):
        if out:
            p.add_argument("--out", default=None, help="output path (stdout when omitted)")
        return p

    solve = sub.add_parser("solve", help="solve for a parameter").add_subparsers(dest="action", required=True)
    p = common(solve.add_parser("herman"))
    p.add_argument("--d0", type=int, default=2)
    p.add_argument("--dinf", type=int, default=4)
    p.add_argument("--theta", required=True)
    p.add_argument("--depth", type=int, default=16)
    p.add_argument("--tol", type=float, default=1e-12)
    p.add_argument("--precision", choices=["double", "extended"], default="double")
    p.add_argument("--validation", choices=["angular", "jordan"], default=None)
    p = common(solve.add_parser("blaschke"))
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--theta", required=True)
    p.add_argument("--tol", type=float, default=1e-10)
    p = common(solve.add_parser("bbm"))
    p.add_argument("--theta", required=True)
    p.add_argument("--depth", type=int, default=14)
    p.add_argument("--tol", type=float, default=1e-12)
    p = common(solve.add_parser("periodic"))
    p.add_argument("--d0", type=int, default=2)
    p.add_argument("--dinf", type=int, default=4)
    p.add_argument("--pq", dest="p_over_q", required=True, help="rotation number p/q")
    p.add_argument("--seed", type=_complex_pair, required=True, help="re,im")
    p.add_argument("--tol", type=float, default=1e-12)

    p = common(sub.add_parser("verify", help="verify a candidate"))
    p.add_argument("--cand", required=True)
    p.add_argument("--levels", type=int, default=12)
    p = common(sub.add_parser("comb", help="critical-point combinatorics of a candidate"))
    p.add_argument("--cand", required=True)

    ren = sub.add_parser("renorm", help="renormalization data").add_subparsers(dest="action", required=True)
    p = common(ren.add_parser("scaling"))
    p.add_argument("--cand", required=True)
    p.add_argument("--levels", type=int, default=12)
    p = common(ren.add_parser("rescale"))
    p.add_argument("--cand", required=True)
    p.add_argument("--n", type=int, default=6)
    p.add_argument("--radius", type=float, default=0.5)
    p = common(ren.add_parser("selfsim"))
    p.add_argument("--d0", type=int, default=2)
    p.add_argument("--dinf", type=int, default=4)
    p.add_argument("--theta", required=True)
    p.add_argument("--center", type=_complex_pair, required=True)
    p.add_argument("--width", type=float, default=0.02)
    p.add_argument("--scales", type=_floats, required=True)
    p.add_argument("--px", type=int, default=128)
    p.add_argument("--maxiter", type=int, default=2000)

    wid = sub.add_parser("width", help="extremal width probes").add_subparsers(dest="action", required=True)
    for name in ("single", "profile", "qs"):
        p = common(wid.add_parser(name))
        src = p.add_mutually_exclusive_group(required=True)
        src.add_argument("--cand")
        src.add_argument("--round", action="store_true", help="round circle sampled by rotation")
        p.add_argument("--theta", default="(1)", help="rotation number for --round")
        p.add_argument("--alpha", type=float, default=3.0)
        p.add_argument("--resolution", type=int, default=256 if name == "single" else 96)
        if name == "single":
            p.add_argument("--interval", type=_pair, required=True, help="a,b in turns")
        else:
            p.add_argument("--levels", type=int, default=8)
        if name == "profile":
            p.add_argument("--pieces", type=int, default=4)

    ren = sub.add_parser("render", help="images").add_subparsers(dest="action", required=True)
    for name in ("julia", "param"):
        p = ren.add_parser(name)
        p.add_argument("--out", required=True)
        p.add_argument("--center", type=_complex_pair, default=[0.0, 0.0])
        p.add_argument("--width", type=float, default=4.0)
        p.add_argument("--px", type=int, default=512)
        p.add_argument("--maxiter", type=int, default=2000)
        p.add_argument("--d0", type=int, default=2)
        p.add_argument("--dinf", type=int, default=4)
        if name == "julia":
            p.add_argument("--cand")
            p.add_argument("--param", type=_complex_pair, help="re,im of c in the unicritical family")
            p.add_argument("--overlay", action="store_true", help="mark the critical orbit")

    common(sub.add_parser("selftest", help="run the analytic quick checks"), out=False)
    return ap


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    fields = {k: v for k, v in vars(ns).items() if v is not None}
    return RunConfig(**fields)


# --------------------------------------------------------------------------
# workflows

def _load_candidate(path: str):
    from .solver import HermanCandidate
    doc = json.loads(Path(path).read_text())
    return HermanCandidate.from_json(doc.get("result", doc))


def _theta(text: str):
    from .cf import ContinuedFraction
    return ContinuedFraction.parse(text)


def _emit(cfg: RunConfig, result) -> None:
    text = dumps(cfg, result)
    if cfg.out:
        Path(cfg.out).write_text(text)
    else:
        sys.stdout.write(text)


def _emit_csv(cfg: RunConfig, csv: str) -> None:
    head = "# " + json.dumps(provenance(cfg), sort_keys=True) + "\n"
    Path(cfg.out).write_text(head + csv)


def _solve(cfg: RunConfig) -> None:
    from . import solver
    if cfg.action == "herman":
        kw = {"validation": cfg.validation} if cfg.validation else {}
        cand = solver.solve_herman_parameter(cfg.d0, cfg.dinf, _theta(cfg.theta), cfg.depth, cfg.tol,
                                             cfg.precision, **kw)
        _emit(cfg, cand.to_json())
    elif cfg.action == "bbm":
        cand = solver.solve_bbm_parameter(_theta(cfg.theta), cfg.depth, cfg.tol)
        _emit(cfg, cand.to_json())
    elif cfg.action == "blaschke":
        import cmath
        from .circle import solve_blaschke_parameter
        res = solve_blaschke_parameter(cfg.d, _theta(cfg.theta), tol=cfg.tol)
        c = cmath.exp(2j * cmath.pi * res.t)
        _emit(cfg, {"t": res.t, "parameter": [c.real, c.imag], "rho": res.rho.value,
                    "rho_error": res.rho.error, "level": res.rho.level, "steps": res.steps})
    elif cfg.action == "periodic":
        from fractions import Fraction
        pq = Fraction(cfg.p_over_q)
        c = solver.solve_periodic_parameter(cfg.d0, cfg.dinf, pq, complex(*cfg.seed), cfg.tol)
        _emit(cfg, {"p": pq.numerator, "q": pq.denominator, "parameter": [c.real, c.imag]})


def _verify(cfg: RunConfig) -> int:
    from .solver import verify_herman_candidate
    rep = verify_herman_candidate(_load_candidate(cfg.cand), cfg.levels)
    _emit(cfg, rep.to_json())
    return 0 if rep.passed else 1


def _comb(cfg: RunConfig) -> None:
    from .solver import compute_combinatorics
    cb = compute_combinatorics(_load_candidate(cfg.cand)).canonical()
    _emit(cfg, {"inner": list(cb.inner), "outer": list(cb.outer)})


def _renorm(cfg: RunConfig) -> None:
    from . import renorm
    if cfg.action == "scaling":
        tab = renorm.return_scaling(_load_candidate(cfg.cand), cfg.levels)
        if cfg.out and cfg.out.endswith(".csv"):
            _emit_csv(cfg, tab.to_csv())
        else:
            _emit(cfg, tab.to_json())
    elif cfg.action == "rescale":
        cand = _load_candidate(cfg.cand)
        m = renorm.rescaled_return_map(cand, cfg.n, renorm.sample_grid(cfg.radius))
        doc = m.to_json()
        doc["winding_at_zero"] = renorm.winding_at_zero(cand, cfg.n)
        _emit(cfg, doc)
    elif cfg.action == "selfsim":
        rep = renorm.self_similarity_probe(cfg.d0, cfg.dinf, _theta(cfg.theta), complex(*cfg.center),
                                           cfg.width, cfg.scales, cfg.px, cfg.maxiter)
        _emit(cfg, rep.to_json())


def _curve(cfg: RunConfig):
    from .width import CurveModel
    if cfg.round:
        return CurveModel.round_circle(_theta(cfg.theta))
    return CurveModel.from_candidate(_load_candidate(cfg.cand))


def _width(cfg: RunConfig) -> None:
    from . import width
    curve = _curve(cfg)
    if cfg.action == "single":
        r = width.alpha_width(curve, tuple(cfg.interval), cfg.alpha, cfg.resolution)
        _emit(cfg, {"width": r.value, "fine": r.fine, "coarse": r.coarse,
                    "resolution": r.resolution, "density": len(curve)})
    elif cfg.action == "profile":
        prof = width.width_profile(curve, cfg.levels, cfg.alpha, cfg.pieces, cfg.resolution)
        if cfg.out and cfg.out.endswith(".csv"):
            _emit_csv(cfg, prof.to_csv())
        else:
            _emit(cfg, {"rows": [list(r) for r in prof.rows],
                        "maxima": {str(k): v for k, v in prof.maxima.items()},
                        "alpha": prof.alpha, "density": prof.density})
    elif cfg.action == "qs":
        out = []
        for n in range(1, cfg.levels + 1):
            q = width.quasisymmetry_distortion(curve, n)
            out.append({"level": n, "value": q.value, "pairs": q.pairs, "reason": q.reason})
        _emit(cfg, {"levels": out, "density": len(curve)})


def _render(cfg: RunConfig) -> None:
    from . import render
    render.set_threads(cfg.thread_budget())
    vp = render.Viewport(complex(*cfg.center), cfg.width, cfg.px, cfg.px)
    comment = json.dumps(provenance(cfg), sort_keys=True)
    if cfg.action == "julia":
        overlay = None
        if cfg.param is not None:
            from .rmap import make_unicritical
            f = make_unicritical(cfg.d0, cfg.dinf, complex(*cfg.param))
        elif cfg.cand:
            cand = _load_candidate(cfg.cand)
            f = cand.rmap()
            overlay = cand.orbit if cfg.overlay else None
        else:
            raise ValueError("render julia needs --cand or --param")
        img = render.render_julia(f, vp, cfg.maxiter, overlay, cfg.out, comment=comment)
    else:
        img = render.render_param(cfg.d0, cfg.dinf, vp, cfg.maxiter, cfg.out, comment=comment)
    sys.stdout.write(json.dumps({"out": cfg.out, "undecided": img.fraction(render.OrbitClass.Undecided)}) + "\n")


def _selftest(cfg: RunConfig) -> int:
    from .selftest import run_selftest
    res = run_selftest()
    for name, ok, detail in res:
        print(f"{'PASS' if ok else 'FAIL'}  {name}{'  ' + detail if detail else ''}")
    return 0 if all(ok for _, ok, _ in res) else 1


def dispatch(cfg: RunConfig) -> int:
    handlers = {"solve": _solve, "verify": _verify, "comb": _comb, "renorm": _renorm,
                "width": _width, "render": _render, "selftest": _selftest}
    if cfg.command not in handlers:
        raise ValueError(f"unknown subcommand {cfg.command!r}")
    status = handlers[cfg.command](cfg)
    return 0 if status is None else int(status)


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(ns)
        if cfg.threads is not None or "HERMANLAB_THREADS" in os.environ:
            from .render import set_threads
            set_threads(cfg.thread_budget())
        return dispatch(cfg)
    except Exception as exc:
        err = {"error": type(exc).__name__, "message": str(exc),
               "command": getattr(ns, "command", None), "action": getattr(ns, "action", None)}
        sys.stderr.write(json.dumps(err) + "\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
