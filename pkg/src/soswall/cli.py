"""Command line: ``soswall <command> [--config FILE] [--set section.key=value ...]``.

Exit codes: 0 ok, 1 usage or configuration error, 2 runtime failure,
3 acceptance failure.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from .config import ConfigError, load_config
from .field import VERSION

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME, EXIT_ACCEPTANCE = 0, 1, 2, 3

log = logging.getLogger("soswall")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# --- shared helpers ------------------------------------------------------------------------

def _provenance(cfg, command):
    p = {"command": command}
    p.update(cfg.provenance())
    p["tau"] = cfg.tau
    return p


def _write(path, text):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise RuntimeError(f"cannot write {path}: {exc}") from exc
    return path


def _tension(cfg):
    from .tension import tau_directed_walk, tension_from_table_file

    if cfg.tau == "directed-walk":
        if cfg.beta < 1:
            return None
        return tau_directed_walk(cfg.beta)
    return tension_from_table_file(cfg.tau)


def _shape_setup(cfg):
    """(tension, Wulff body, shape constants) or Nones when tau is unavailable."""
    from .wulff import shape_constants, wulff_unit

    model = _tension(cfg)
    if model is None:
        return None, None, None
    w = wulff_unit(model)
    return model, w, shape_constants(cfg.beta, w, numeric=False)


def _c_inf(cfg):
    if cfg.c_inf != "estimate":
        return float(cfg.c_inf), 0.0
    from .cinf import estimate_c_infinity

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        r = estimate_c_infinity(cfg.beta, 32, h_max=4, num_samples=cfg.c_inf_samples, seed=0)
    if not math.isfinite(r.c_inf):
        return float(r.a[-1]), float("inf")
    return r.c_inf, r.c_inf_ci


def _params(cfg, L, c_inf=None, sc=None):
    from .params import classify, derive_params

    c, hw = c_inf if c_inf is not None else _c_inf(cfg)
    lam_c = sc.lambda_c if sc is not None else None
    if cfg.lam is None:
        return derive_params(cfg.beta, L, c, hw, lambda_c=lam_c)
    # lambda given directly: c_inf plays no role, 1.0 only fills the slot
    p = derive_params(cfg.beta, L, 1.0, 0.0, lambda_c=lam_c)
    return type(p)(**{**p.__dict__, "c_inf": float("nan"), "c_inf_halfwidth": float("nan"),
                      "lam": cfg.lam, "regime": classify(cfg.lam, p.lambda_c)})


VERDICTS = {
    "supercritical": "lambda > lambda_c: supercritical, E_H dominates",
    "subcritical": "lambda < lambda_c: subcritical, E_(H-1) dominates",
    "critical": "lambda = lambda_c: critical, no prediction",
    "undetermined": "lambda_c undetermined (no surface tension model at this beta): no prediction",
}


def _specs(cfg, L):
    from .runs import ReplicaSpec

    return [ReplicaSpec(beta=cfg.beta, L=L, seed=s, floor=cfg.floor, init=cfg.init,
                        sweeps=cfg.total_sweeps(L), boundary=cfg.boundary, schedule=cfg.schedule)
            for s in cfg.seeds]


def _snapshots(cfg):
    from .runs import cached_replica, replica_path

    root = Path(cfg.output) / "snapshots"
    out = []
    for L in cfg.L:
        for spec in _specs(cfg, L):
            f = cached_replica(spec, root)
            if f is None:
                raise RuntimeError(f"missing snapshot {replica_path(root, spec)}; run 'soswall sample' first")
            out.append((spec, f))
    return out


# --- commands ------------------------------------------------------------------------------

def cmd_params(cfg, args):
    _, w, sc = _shape_setup(cfg)
    c = _c_inf(cfg) if cfg.lam is None else (float("nan"), 0.0)
    lines = [f"beta = {cfg.beta:g}", f"tau model = {cfg.tau}"]
    if sc is not None:
        lines += [f"tau(0) = {sc.tau0:.10f}", f"w1 = {sc.w1:.10f}", f"ell_tau = {sc.ell_tau:.10f}",
                  f"lambda_hat = {sc.lambda_hat:.10f}", f"lambda_c = {sc.lambda_c:.10f}"]
    if cfg.lam is None:
        lines.append(f"c_inf = {c[0]:.6f} +- {c[1]:.2g}")
    for L in cfg.L:
        p = _params(cfg, L, c, sc)
        gap = p.distance_to_critical()
        lines.append(f"L = {L}: H = {p.H}, alpha = {p.alpha:.6f}, lambda = {p.lam:.6f}, "
                     f"distance to lambda_c = {'n/a' if gap is None else f'{gap:.2%}'}")
        lines.append(f"  verdict: {VERDICTS[p.regime]}")
    print("\n".join(lines))
    return EXIT_OK


def cmd_shape(cfg, args):
    from .svg import shapes_csv, shapes_svg

    model, w, sc = _shape_setup(cfg)
    if model is None:
        raise RuntimeError(f"no surface tension at beta = {cfg.beta:g}: the directed-walk model needs beta >= 1")
    from .wulff import limit_shape

    prov = _provenance(cfg, "shape")
    c = _c_inf(cfg) if cfg.lam is None else None
    out = Path(cfg.output)
    for L in cfg.L:
        p = _params(cfg, L, c, sc)
        rows, labels, skipped = [], [], []
        for n in range(cfg.n_max + 1):
            lam_n = p.lambda_n(n)
            try:
                shape = limit_shape(lam_n, 1.0, 0.0, w, beta=cfg.beta)
            except ValueError:
                skipped.append(n)
                continue
            rows.append((n, lam_n, shape))
            labels.append(f"n={n} lambda={lam_n:.4g}")
        _write(out / f"shape_L{L}.csv", shapes_csv(rows, prov))
        _write(out / f"shapes_L{L}.svg", shapes_svg([r[2] for r in rows], labels, prov))
        msg = f"L = {L}: {len(rows)} shapes written"
        if skipped:
            msg += f" (levels {skipped} have no limit shape: scaled Wulff body larger than the box)"
        print(msg)
    _write(out / "shape_constants.txt",
           "".join(f"# {k}={v}\n" for k, v in prov.items())
           + f"tau0={sc.tau0:.12g}\nw1={sc.w1:.12g}\nell_tau={sc.ell_tau:.12g}\n"
             f"lambda_hat={sc.lambda_hat:.12g}\nlambda_c={sc.lambda_c:.12g}\n")
    return EXIT_OK


def cmd_sample(cfg, args):
    from .runs import replica_path, run_replica
    from .svg import csv_preamble

    root = Path(cfg.output) / "snapshots"
    rows = [csv_preamble(_provenance(cfg, "sample")) + "L,seed,sweeps,floor,file,sha256,max_height,mean_height"]
    for L in cfg.L:
        for spec in _specs(cfg, L):
            f = run_replica(spec, root, workers=cfg.workers, provenance={"config_sha256": cfg.digest()})
            rows.append(f"{L},{spec.seed},{f.sweeps},{int(f.floor)},{replica_path(root, spec).name},"
                        f"{f.checksum()},{int(f.heights.max())},{float(f.heights.mean()):.6f}")
    _write(Path(cfg.output) / "sample.csv", "\n".join(rows) + "\n")
    print(f"{len(rows) - 1} replicas in {root}")
    return EXIT_OK


def cmd_contours(cfg, args):
    from .contours import contour_loops, loops_csv, loops_paths, nesting_forest
    from .params import macro_threshold
    from .svg import csv_preamble, loops_svg

    prov = _provenance(cfg, "contours")
    c = _c_inf(cfg) if cfg.lam is None else None
    out = Path(cfg.output) / "contours"
    for spec, f in _snapshots(cfg):
        p = _params(cfg, spec.L, c)
        cut = min(macro_threshold(spec.L), cfg.svg_min_length)
        loops = []
        for h in range(p.H + 1, p.H - cfg.n_max - 1, -1):
            loops += contour_loops(f, h, cfg.pairing, min_length=cut)
        for k, lp in enumerate(loops):
            lp.id = k
        nesting_forest(loops)
        stem = f"L{spec.L}_s{spec.seed}"
        p2 = dict(prov, L=spec.L, seed=spec.seed, sweeps=f.sweeps, H=p.H, min_length=cut)
        _write(out / f"{stem}_loops.csv", csv_preamble(p2) + loops_csv(loops))
        _write(out / f"{stem}_paths.txt", csv_preamble(p2) + loops_paths(loops))
        _write(out / f"{stem}.svg", loops_svg(spec.L, loops, cfg.svg_min_length, p2))
        print(f"{stem}: {len(loops)} loops at levels {p.H + 1}..{p.H - cfg.n_max}")
    return EXIT_OK


def cmd_interface(cfg, args):
    from .bridge import bridge_stats, build_bridge, compare_profile, sup_fluctuation_scaling
    from .svg import csv_preamble

    model = _tension(cfg)
    if model is None:
        raise RuntimeError(f"no surface tension at beta = {cfg.beta:g}: the directed-walk model needs beta >= 1")
    from .params import critical_lambda

    mu = cfg.mu if cfg.mu is not None else critical_lambda(cfg.beta)
    prov = dict(_provenance(cfg, "interface"), mu=mu)
    out = Path(cfg.output) / "interface"
    summary = [csv_preamble(prov) + "d,L,mean_mid,Y,var_mid,sigma2,mean_rel,var_rel"]
    for d in cfg.interface_d:
        L = round(d ** (1 / 0.7))
        bm = build_bridge(cfg.beta, mu / L, d, 0, 0)
        st = bridge_stats(bm)
        cols = "\n".join(f"{k},{m:.10g},{v:.10g}" for k, (m, v) in enumerate(zip(st.mean, st.var)))
        _write(out / f"moments_d{d}.csv", csv_preamble(dict(prov, d=d, L=L)) + "x,mean,var\n" + cols + "\n")
        c = compare_profile(bm, L, model)
        summary.append(f"{d},{L},{c['mean']:.10g},{c['Y']:.10g},{c['var']:.10g},{c['sigma2']:.10g},"
                       f"{c['mean_rel']:.6g},{c['var_rel']:.6g}")
        print(f"d = {d}: mean {c['mean']:.3f} vs Y {c['Y']:.3f}, var {c['var']:.3f} vs sigma^2 {c['sigma2']:.3f}")
    _write(out / "profile.csv", "\n".join(summary) + "\n")
    rows = [csv_preamble(prov) + "case,L,sup_mean,sup_se,slope,stderr"]
    for case, m in (("tilted", mu), ("untilted", 0.0)):
        r = sup_fluctuation_scaling(cfg.beta, m, cfg.interface_L, seed=cfg.seeds[0], n_paths=cfg.interface_paths)
        for L, s, e in zip(r.L, r.sup_mean, r.sup_se):
            rows.append(f"{case},{int(L)},{s:.10g},{e:.10g},{r.slope:.6g},{r.stderr:.6g}")
        print(f"{case}: sup slope {r.slope:.3f} +- {r.stderr:.3f}")
    _write(out / "scaling.csv", "\n".join(rows) + "\n")
    return EXIT_OK


def cmd_analyze(cfg, args):
    from .analysis import height_concentration
    from .svg import csv_preamble

    prov = _provenance(cfg, "analyze")
    c = _c_inf(cfg) if cfg.lam is None else None
    _, _, sc = _shape_setup(cfg)
    rows = [csv_preamble(prov) + "L,seed,sweeps,H,regime,frac_H,frac_H1,coverage,strict,relaxed,dominant,max_height,max_center"]
    text = []
    by_L = {}
    for spec, f in _snapshots(cfg):
        p = _params(cfg, spec.L, c, sc)
        conc = height_concentration(f, p, cfg.relaxed)
        # predicted centring of the maximum
        center = 3 * math.log(spec.L) / (4 * cfg.beta) if cfg.floor else math.log(spec.L) / (2 * cfg.beta)
        mx = int(f.heights.max())
        by_L.setdefault(spec.L, []).append((conc, mx, center, p))
        rows.append(f"{spec.L},{spec.seed},{f.sweeps},{p.H},{p.regime},{conc.fractions.get(p.H, 0.0):.6f},"
                    f"{conc.fractions.get(p.H - 1, 0.0):.6f},{conc.coverage:.6f},{int(conc.holds_strict)},"
                    f"{int(conc.holds_relaxed)},{conc.dominant},{mx},{center:.6f}")
    for L, items in by_L.items():
        cov = np.array([i[0].coverage for i in items])
        mxs = np.array([i[1] for i in items], dtype=float)
        p = items[0][3]
        text.append(f"L = {L}: H = {p.H}, regime {p.regime}; coverage mean {cov.mean():.3f}, "
                    f"relaxed ({cfg.relaxed:g}) in {np.mean(cov >= cfg.relaxed):.0%} of replicas, "
                    f"strict (0.9) in {np.mean(cov >= 0.9):.0%}; mean max {mxs.mean():.2f} "
                    f"vs center {items[0][2]:.2f} (window +-{cfg.max_window:g})")
    out = Path(cfg.output)
    _write(out / "analysis.csv", "\n".join(rows) + "\n")
    _write(out / "analysis.txt", "".join(f"# {k}={v}\n" for k, v in prov.items()) + "\n".join(text) + "\n")
    print("\n".join(text))
    return EXIT_OK


def cmd_report(cfg, args):
    from . import acceptance
    from .svg import csv_preamble

    only = set(args.only) if args.only else None
    cache = Path(args.cache) if args.cache else None
    results = acceptance.run_all(cache=cache, only=only)
    prov = _provenance(cfg, "report")
    from . import ensembles as E
    prov.update({
        "ensemble_cache": cache or E.DEFAULT_CACHE,
        "concentration_runs": f"beta={E.CONCENTRATION_BETA} L={list(E.CONCENTRATION_SIZES)} "
                              f"replicas={E.REPLICAS} sweeps=20L seeds=100L+i (+50 without floor)",
        "shape_runs": f"beta={E.SHAPE_BETA} L={E.SHAPE_L} replicas={E.REPLICAS} sweeps={E.SHAPE_SWEEPS} "
                      f"seeds=7000000+i",
        "tau_model": "directed-walk",
    })
    rows = [csv_preamble(prov) + "criterion,name,passed,seconds,detail"]
    for r in results:
        detail = r.detail.replace('"', "'")
        rows.append(f'{r.number},{r.name},{int(r.passed)},{r.seconds:.1f},"{detail}"')
        print(r.line())
    out = Path(cfg.output)
    _write(out / "report.csv", "\n".join(rows) + "\n")
    n_ok = sum(r.passed for r in results)
    _write(out / "report.txt", "".join(f"# {k}={v}\n" for k, v in prov.items())
           + "\n".join(r.line() for r in results) + f"\n{n_ok}/{len(results)} criteria passed\n")
    print(f"{n_ok}/{len(results)} criteria passed")
    return EXIT_OK if n_ok == len(results) else EXIT_ACCEPTANCE


COMMANDS = {
    "params": cmd_params,
    "shape": cmd_shape,
    "sample": cmd_sample,
    "contours": cmd_contours,
    "interface": cmd_interface,
    "analyze": cmd_analyze,
    "report": cmd_report,
}


def build_parser():
    p = _Parser(prog="soswall", description="SOS surface above a wall: sampling, level lines, limit shapes.")
    p.add_argument("--version", action="version", version=f"soswall {VERSION}")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", "-c", help="configuration file")
        s.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                       help="override a configuration value (repeatable)")
        s.add_argument("--output", "-o", help="output directory (overrides [output] dir)")
        s.add_argument("--workers", type=int, help="worker threads for sweeps")
        s.add_argument("--verbose", "-v", action="store_true")
        if name == "report":
            s.add_argument("--only", type=int, nargs="+", help="criterion numbers to run")
            s.add_argument("--cache", help="ensemble cache directory")
    return p


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    try:
        args = build_parser().parse_args(argv)
        if args.command is None:
            raise UsageError("soswall: a command is required: " + " | ".join(COMMANDS))
        overrides = list(args.set)
        if args.output:
            overrides.append(f"output.dir={args.output}")
        if args.workers is not None:
            overrides.append(f"run.workers={args.workers}")
        cfg = load_config(args.config, overrides)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (RuntimeError, ValueError, OSError) as exc:
        print(f"error: {args.command}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
