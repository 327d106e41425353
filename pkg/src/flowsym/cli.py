"""Command-line interface: ``flowsym {escherize, density, verify, sweep-omega}``.

Exit codes: 0 ok, 1 input error, 2 optimization abort, 3 verification failure.
Options may also come from a flat ``key = value`` file given with
``--config``; flags on the command line take precedence over the file,
which takes precedence over the built-in defaults.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .errors import FlowsymError, OptimizationAborted
from .escher import EscherConfig, embed_params, escherize, load_target, render_tile, target_from_polygon
from .field import dumps_field, loads_field
from .flow import IntegratorConfig
from .geom import hausdorff_distance
from .identspace import (DensityConfig, IdentSpace, Target, TargetDistribution, default_kappa, density_grid,
                         kl_estimate, make_model, stiffness, train_density)
from .isohedral import IsohedralClass, default_template, tiling_svg
from .report import RunReport, Stopwatch, atomic_write, write_csv, write_grid_csv, write_pgm

log = logging.getLogger("flowsym")

EXIT_OK, EXIT_INPUT, EXIT_ABORT, EXIT_VERIFY = 0, 1, 2, 3


class InputError(Exception):
    pass


# --------------------------------------------------------------------------
# configuration


def read_config_file(path) -> dict[str, str]:
    """Flat ``key = value`` lines; ``#`` starts a comment. Keys use ``_`` or ``-``."""
    p = Path(path)
    if not p.is_file():
        raise InputError(f"config file not found: {p}")
    out = {}
    for n, line in enumerate(p.read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputError(f"{p}:{n}: expected key = value")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k.replace("-", "_")] = v
    return out


def _coerce(value: str, like):
    if isinstance(like, bool):
        return value.strip().lower() in ("1", "true", "yes", "on")
    if isinstance(like, int):
        return int(value)
    if isinstance(like, float):
        return float(value)
    return value


def merge_options(args: argparse.Namespace, parser: argparse.ArgumentParser) -> argparse.Namespace:
    """Apply config-file values to options not given on the command line."""
    if not getattr(args, "config", None):
        return args
    filecfg = read_config_file(args.config)
    given = getattr(args, "_given", set())
    for k, v in filecfg.items():
        if not hasattr(args, k):
            raise InputError(f"unknown config key {k!r}")
        if k in given:
            continue
        default = parser.get_default(k)
        typ = next((a.type for a in parser._actions if a.dest == k and a.type is not None), None)
        try:
            if typ is not None:
                setattr(args, k, typ(v))
            else:
                setattr(args, k, _coerce(v, default) if default is not None else v)
        except ValueError:
            raise InputError(f"bad value for {k}: {v!r}") from None
    return args


class _Tracked(argparse.Action):
    """Records which destinations were set explicitly (for config precedence)."""

    def __call__(self, parser, namespace, values, option_string=None):
        setattr(namespace, self.dest, values)
        given = getattr(namespace, "_given", set())
        given.add(self.dest)
        namespace._given = given


class _TrackedTrue(argparse.Action):
    def __init__(self, option_strings, dest, default=False, **kw):
        super().__init__(option_strings, dest, nargs=0, default=default, **kw)

    def __call__(self, parser, namespace, values, option_string=None):
        setattr(namespace, self.dest, True)
        given = getattr(namespace, "_given", set())
        given.add(self.dest)
        namespace._given = given


def _add(p, *names, **kw):
    if kw.get("action") == "store_true":
        kw["action"] = _TrackedTrue
    else:
        kw.setdefault("action", _Tracked)
    p.add_argument(*names, **kw)


# --------------------------------------------------------------------------
# escherize


def _escher_args(p):
    d = EscherConfig()
    _add(p, "--target", required=True, help="mask file (PGM/PNG) or 'template' for a self-test target")
    _add(p, "--class", dest="cls", default="IH1", help="IH1..IH28 or 'all'")
    _add(p, "--omega", type=int, default=d.omega1)
    _add(p, "--tau", type=float, default=d.tau)
    _add(p, "--iters-affine", dest="iters_affine", type=int, default=d.iters_affine)
    _add(p, "--iters-flow", dest="iters_flow", type=int, default=d.iters_flow)
    _add(p, "--restarts", type=int, default=d.restarts)
    _add(p, "--n-samples", dest="n_samples", type=int, default=d.n_samples)
    _add(p, "--eval-samples", dest="eval_samples", type=int, default=d.eval_samples)
    _add(p, "--lr-affine", dest="lr_affine", type=float, default=d.lr_affine)
    _add(p, "--lr-flow", dest="lr_flow", type=float, default=d.lr_flow)
    _add(p, "--steps", type=int, default=d.steps)
    _add(p, "--affine-mode", dest="affine_mode", default=d.affine_mode, choices=["conjugate", "precompose"])
    _add(p, "--extent", type=float, default=4.0, help="world width of the mask")
    _add(p, "--invert", action="store_true", help="treat light pixels as foreground")
    _add(p, "--verify-samples", dest="verify_samples", type=int, default=20000)
    _add(p, "--seed", type=int, default=0)
    _add(p, "--out", default="out")
    _add(p, "--config", default=None)


def _escher_config(args, cls, omega=None) -> EscherConfig:
    om = args.omega if omega is None else omega
    return EscherConfig(cls=cls.value, omega1=om, omega2=om, tau=args.tau, iters_affine=args.iters_affine,
                        iters_flow=args.iters_flow, restarts=args.restarts, n_samples=args.n_samples,
                        eval_samples=args.eval_samples, lr_affine=args.lr_affine, lr_flow=args.lr_flow,
                        steps=args.steps, seed=args.seed, affine_mode=args.affine_mode).validate()


def _parse_classes(spec: str) -> list[IsohedralClass]:
    if spec.strip().lower() == "all":
        return list(IsohedralClass)
    try:
        return [IsohedralClass.parse(s) for s in spec.split(",") if s.strip()]
    except ValueError as exc:
        raise InputError(str(exc)) from None


def _load_target(args, cls):
    if args.target == "template":
        return target_from_polygon(default_template(cls).polygon)
    path = Path(args.target)
    if not path.is_file():
        raise InputError(f"target file not found: {path}")
    return load_target(path, extent=args.extent, invert=args.invert)


def _write_escher_outputs(res, target, out: Path) -> dict[str, str]:
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "svg": out / "tiling.svg",
        "tile_pgm": out / "tile.pgm",
        "loss_csv": out / "loss.csv",
        "field": out / "field.txt",
        "report": out / "report.json",
    }
    atomic_write(paths["svg"], tiling_svg(res.tile, res.template, affine=res.affine))
    write_pgm(paths["tile_pgm"], render_tile(res.tile, target))
    n_aff = len(res.affine_trace)
    rows = [(i, "affine", v) for i, v in enumerate(res.affine_trace)]
    rows += [(n_aff + i, "flow", v) for i, v in enumerate(res.flow.trace)]
    write_csv(paths["loss_csv"], ["iteration", "phase", "loss"], rows)
    atomic_write(paths["field"], dumps_field(res.field))
    return {k: str(v) for k, v in paths.items()}


def _run_escher_one(args, cls, out: Path, omega=None, affine=None, init=None):
    target = _load_target(args, cls)
    cfg = _escher_config(args, cls, omega)
    res = escherize(target, cls, cfg, affine=affine, verify_samples=args.verify_samples, init=init)
    res.report.outputs = _write_escher_outputs(res, target, out)
    res.report.save(out / "report.json")
    return res


def cmd_escherize(args) -> int:
    classes = _parse_classes(args.cls)
    if not classes:
        raise InputError("no isohedral class given")
    root = Path(args.out)
    fan = len(classes) > 1
    for cls in classes:
        out = root / cls.value if fan else root
        res = _run_escher_one(args, cls, out)
        print(f"{cls.value}: iou={res.iou:.4f} pixel_accuracy={res.pixel_accuracy:.4f} "
              f"tiling_valid={res.report.tiling_valid} -> {out}")
    return EXIT_OK


def parse_omegas(text: str) -> list[int]:
    try:
        om = [int(s) for s in str(text).replace(" ", "").split(",") if s != ""]
    except ValueError:
        raise InputError(f"bad omega list {text!r}") from None
    if not om:
        raise InputError("empty omega list")
    if any(o < 0 for o in om):
        raise InputError("frequencies must be non-negative")
    return om


def cmd_sweep_omega(args) -> int:
    """One run per maximum frequency with a shared affine fit and seed schedule.

    Each run starts from the previous run's best coefficients, zero-padded,
    so the best evaluation loss cannot increase with the frequency range.
    """
    omegas = sorted(set(parse_omegas(args.omegas)))
    classes = _parse_classes(args.cls)
    if len(classes) != 1:
        raise InputError("sweep-omega takes a single class")
    cls = classes[0]
    root = Path(args.out)
    sw = Stopwatch()
    _load_target(args, cls)  # fail early on a bad target
    runs = []
    affine = None
    prev = None
    for om in omegas:
        init = embed_params(prev, om) if prev is not None else None
        res = _run_escher_one(args, cls, root / f"omega_{om}", omega=om, affine=affine, init=init)
        affine = res.affine
        prev = res.params
        tmpl = res.template.polygon.transformed(res.affine.linear, res.affine.translation)
        haus = hausdorff_distance(res.tile, tmpl)
        # at omega=0 glide classes keep a constant field along the axis: a pure translation
        shifted = tmpl.transformed(np.eye(2), res.tile.centroid - tmpl.centroid)
        haus_t = hausdorff_distance(res.tile, shifted)
        runs.append({
            "omega": om,
            "iou": res.iou,
            "pixel_accuracy": res.pixel_accuracy,
            "best_eval_loss": res.flow.best_eval_loss,
            "tiling_valid": res.report.tiling_valid,
            "hausdorff_to_placed_template": haus,
            "hausdorff_relative": haus / tmpl.diameter,
            "hausdorff_mod_translation_relative": haus_t / tmpl.diameter,
            "report": str(root / f"omega_{om}" / "report.json"),
        })
        print(f"omega={om}: iou={res.iou:.4f} best_loss={res.flow.best_eval_loss:.5f} "
              f"hausdorff/diam={haus / tmpl.diameter:.2e} (mod translation {haus_t / tmpl.diameter:.2e})")
    rep = RunReport(kind="sweep_omega", config={**vars_clean(args), "omegas": omegas}, seed=args.seed,
                    trace=[r["best_eval_loss"] for r in runs], metrics={"runs": runs, "class": cls.value},
                    wall_time=sw.elapsed(), tiling_valid=all(r["tiling_valid"] for r in runs),
                    outputs={f"omega_{r['omega']}": r["report"] for r in runs})
    rep.save(root / "sweep.json")
    write_csv(root / "sweep.csv", ["omega", "iou", "pixel_accuracy", "best_eval_loss", "hausdorff_relative",
                                   "hausdorff_mod_translation_relative"],
              [(r["omega"], r["iou"], r["pixel_accuracy"], r["best_eval_loss"], r["hausdorff_relative"],
                r["hausdorff_mod_translation_relative"])
               for r in runs])
    return EXIT_OK


def vars_clean(args) -> dict:
    return {k: v for k, v in vars(args).items() if not k.startswith("_") and k != "func"}


# --------------------------------------------------------------------------
# density


def _density_args(p):
    d = DensityConfig()
    _add(p, "--space", default=d.space)
    _add(p, "--target", default=d.target, help="4g, 6g or checker")
    _add(p, "--omega", type=int, default=d.omega)
    _add(p, "--iters", type=int, default=d.iters)
    _add(p, "--batch", type=int, default=d.batch)
    _add(p, "--lr", type=float, default=d.lr)
    _add(p, "--lr-final", dest="lr_final", type=float, default=d.lr_final)
    _add(p, "--steps", type=int, default=d.steps)
    _add(p, "--stiffness-cap", dest="stiffness_cap", type=float, default=d.stiffness_cap,
         help="bound on h*max|J| enforced during training; 0 disables")
    _add(p, "--kappa", type=float, default=None, help="von Mises concentration of the base density")
    _add(p, "--sigma", type=float, default=d.sigma)
    _add(p, "--kl-samples", dest="kl_samples", type=int, default=d.kl_samples)
    _add(p, "--grid", dest="grid_resolution", type=int, default=d.grid_resolution)
    _add(p, "--kl-only", dest="kl_only", action="store_true", help="evaluate a checkpoint without training")
    _add(p, "--checkpoint", default=None, help="field file written by a previous run")
    _add(p, "--seed", type=int, default=0)
    _add(p, "--out", default="out")
    _add(p, "--config", default=None)


def cmd_density(args) -> int:
    try:
        space = IdentSpace.parse(args.space)
        dist = TargetDistribution.parse(args.target)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"density_pgm": out / "density.pgm", "density_csv": out / "density.csv",
             "nll_csv": out / "nll.csv", "field": out / "field.txt", "report": out / "report.json"}
    if args.kl_only:
        if not args.checkpoint:
            raise InputError("--kl-only needs --checkpoint")
        ck = Path(args.checkpoint)
        if not ck.is_file():
            raise InputError(f"checkpoint not found: {ck}")
        sw = Stopwatch()
        try:
            field = loads_field(ck.read_text(encoding="utf-8"))
        except (ValueError, IndexError) as exc:
            raise InputError(f"cannot parse checkpoint {ck}: {exc}") from None
        kappa = default_kappa(space) if args.kappa is None else args.kappa
        model = make_model(space, field.params.omega1, kappa, IntegratorConfig(steps=args.steps), field.params)
        tgt = Target(dist, args.sigma)
        kl, se = kl_estimate(model, tgt, args.kl_samples, rng=args.seed)
        grid = density_grid(model, args.grid_resolution)
        rep = RunReport(kind="density_eval", config=vars_clean(args), seed=args.seed,
                        metrics={"kl_target_model": kl, "kl_stderr": se, "normalization": float(grid.mean()),
                                 "stiffness": stiffness(model),
                                 "space": space.value, "target": dist.value},
                        wall_time=sw.elapsed())
        paths.pop("nll_csv")
        paths.pop("field")
    else:
        cfg = DensityConfig(space=space.value, target=dist.value, omega=args.omega, kappa=args.kappa,
                            sigma=args.sigma, iters=args.iters, batch=args.batch, lr=args.lr,
                            lr_final=args.lr_final, steps=args.steps, seed=args.seed, kl_samples=args.kl_samples,
                            grid_resolution=args.grid_resolution, stiffness_cap=args.stiffness_cap or None)
        try:
            cfg.validate()
        except ValueError as exc:
            raise InputError(str(exc)) from None
        res = train_density(config=cfg)
        rep, grid, model = res.report, res.grid, res.model
        write_csv(paths["nll_csv"], ["iteration", "nll"], enumerate(res.trace))
        atomic_write(paths["field"], dumps_field(model.field))
        kl, se = res.kl, res.kl_stderr
    write_pgm(paths["density_pgm"], grid / max(float(grid.max()), 1e-300))
    write_grid_csv(paths["density_csv"], grid)
    rep.outputs = {k: str(v) for k, v in paths.items()}
    rep.save(paths["report"])
    print(f"{space.value}/{dist.value}: KL={kl:.4f} (+/- {se:.4f}) normalization={rep.metrics['normalization']:.4f}"
          f" -> {out}")
    return EXIT_OK


# --------------------------------------------------------------------------
# verify


def cmd_verify(args) -> int:
    from .verify import run_battery

    classes = _parse_classes(args.cls) if args.cls else list(IsohedralClass)
    try:
        spaces = [IdentSpace.parse(s) for s in args.space.split(",")] if args.space else list(IdentSpace)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    t = time.perf_counter()
    rows = run_battery(classes, spaces, quick=args.quick, seed=args.seed)
    w = max(len(r.name) for r in rows)
    print(f"{'check':<{w}}  status  max error")
    for r in rows:
        print(f"{r.name:<{w}}  {'PASS' if r.passed else 'FAIL':<6}  {r.error:.3e}  {r.detail}")
    failed = [r.name for r in rows if not r.passed]
    print(f"{len(rows) - len(failed)}/{len(rows)} checks passed in {time.perf_counter() - t:.1f} s")
    if failed:
        print("failed: " + ", ".join(failed), file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="flowsym", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"flowsym {__version__}")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("escherize", help="fit a tiling shape to a target mask")
    _escher_args(p)
    p.set_defaults(func=cmd_escherize)

    p = sub.add_parser("sweep-omega", help="escherize over a list of maximum frequencies")
    _escher_args(p)
    _add(p, "--omegas", default="0,1,2,3,5")
    p.set_defaults(func=cmd_sweep_omega)

    p = sub.add_parser("density", help="train or evaluate a density on an identification space")
    _density_args(p)
    p.set_defaults(func=cmd_density)

    p = sub.add_parser("verify", help="run the invariant battery")
    _add(p, "--class", dest="cls", default=None)
    _add(p, "--space", default=None)
    _add(p, "--quick", action="store_true")
    _add(p, "--seed", type=int, default=0)
    _add(p, "--config", default=None)
    p.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:  # argparse reports usage errors with code 2
        return EXIT_INPUT if exc.code not in (0, None) else EXIT_OK
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(message)s")
    sub = ap._subparsers._group_actions[0].choices[args.command]
    try:
        args = merge_options(args, sub)
        return args.func(args)
    except InputError as exc:
        print(f"flowsym: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OptimizationAborted as exc:
        print(f"flowsym: optimization aborted: {exc}", file=sys.stderr)
        return EXIT_ABORT
    except (FlowsymError, ValueError, OSError) as exc:
        print(f"flowsym: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
