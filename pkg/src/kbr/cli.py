"""Command-line front end: ``kbr <command> [options]``.

Every command writes its CSV tables, an SVG plot, the fully resolved
configuration (YAML) and a JSON summary into the output directory, which
is ``--out``, else ``$KBR_OUTPUT_DIR``, else ``./kbr_output``.

Exit status: 0 on success, 2 for a bad configuration (the offending key is
named), 3 for a numerical failure (the error class is named).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import io
from .baselines.euler import cons_to_prim, sod_exact
from .derivatives import explicit_field, implicit_field
from .errors import InvalidConfig, InvalidInput, KBRError, SchemaError
from .functions import FUNCTIONS, get_function
from .grid import Grid1D
from .kernel import TrainingSet, predict
from .metrics import SOD_WINDOWS, level_crossing, normalized_rmse, rmse, shock_metrics
from .pde import SolverConfig, run_simulation
from .studies import convergence_study, dnn_table, noise_study, sample_points
from .training import NoiseConfig, SweepConfig, _inside, add_noise, fit_theta, sweep_theta

log = logging.getLogger("kbr")

ENV_OUTPUT = "KBR_OUTPUT_DIR"
DEFAULT_OUTPUT = "kbr_output"

SWEEP_DEFAULTS = {"k_min": 0.01, "k_max": 100.0, "n_sweep": 15, "knn": 5,
                  "split_ratio": 0.9, "refine": False}

DEFAULTS = {
    "fit": {"fn": "camel1d", "data": None, "n": 501, "n_query": 201, "noise": 0.0,
            "seed": 0, "sweep": SWEEP_DEFAULTS},
    "derive": {"fn": "camel1d", "data": None, "scheme": "explicit", "n": 501, "n_test": 1000,
               "noise": 0.0, "seed": 0, "sweep": SWEEP_DEFAULTS},
    "converge": {"fn": "camel1d", "scheme": "explicit", "ns": [100, 300, 1000, 3000, 10000],
                 "n_test": 5000, "seed": 0, "sweep": SWEEP_DEFAULTS},
    "noise-sweep": {"fn": "camel1d", "n": 501, "levels": [0.0, 0.01, 0.02, 0.05],
                    "schemes": ["explicit", "implicit", "spline"], "n_test": 5000, "seed": 0,
                    "sweep": SWEEP_DEFAULTS},
    "dnn-table": {"n": 1001, "n_test": 1000, "seed": 0, "sweep": SWEEP_DEFAULTS},
    "pde-burgers": {"scheme": "kbr-maccormack", "n": 251, "t_end": 0.3, "cfl": 0.4,
                    "retrain_every": 10, "snapshot_every": 0, "seed": 0,
                    "sweep": SWEEP_DEFAULTS},
    "pde-sod": {"scheme": "kbr-roe", "n": 251, "t_end": 0.15, "cfl": 0.4, "retrain_every": 10,
                "snapshot_every": 0, "seed": 0, "sweep": SWEEP_DEFAULTS},
    "metrics": {"snapshot": None, "scheme": "unknown", "t": None},
}

BURGERS_SCHEMES = {"maccormack": "burgers-maccormack", "kbr-maccormack": "burgers-maccormack-kbr"}
SOD_SCHEMES = {"roe": "sod-roe", "kbr-roe": "sod-roe-kbr", "muscl": "sod-muscl"}


# ---------------------------------------------------------------------------
# helpers


def output_dir(arg) -> Path:
    out = Path(arg or os.environ.get(ENV_OUTPUT) or DEFAULT_OUTPUT)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _sweep(cfg) -> SweepConfig:
    return SweepConfig(seed=int(cfg.get("seed", 0)), **cfg["sweep"])


def _write_json(path, obj):
    with Path(path).open("w") as fh:
        json.dump(io._plain(obj), fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")


def _finish(out, stem, cfg, summary):
    io.dump_config(out / f"{stem}_config.yaml", cfg)
    _write_json(out / f"{stem}_summary.json", summary)
    log.info("wrote %s outputs to %s", stem, out)


def _figure():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt, plt.subplots(figsize=(5.5, 4.0))


def _save(plt, fig, path):
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def _training_data(cfg):
    """Training set from ``data`` (CSV) or sampled from the named test field."""
    if cfg["data"]:
        path = Path(cfg["data"])
        with path.open() as fh:
            header = fh.readline().strip().split(",")
        if header[-1] != "phi" or len(header) < 2:
            raise SchemaError("training CSV must end with a 'phi' column", column="phi")
        rows = io.read_csv(path, header)
        pts = np.array([[r[c] for c in header[:-1]] for r in rows])
        vals = np.array([r["phi"] for r in rows])
        fn = None
    else:
        fn = get_function(cfg["fn"])
        rng = np.random.default_rng(cfg["seed"])
        pts = sample_points(int(cfg["n"]), rng, fn.domain, fn.dim)
        vals = fn.value(pts)
    vals = add_noise(vals, NoiseConfig(s=float(cfg["noise"]), seed=int(cfg["seed"]) + 1))
    if pts.ndim == 2 and pts.shape[1] == 1:
        pts = pts[:, 0]
    return TrainingSet(pts, vals), fn


def _grid_rows(grid: Grid1D):
    right = np.append(grid.interfaces, grid.nodes[-1])
    return [{"i": i, "x_node": float(x), "x_interface_right": float(r)}
            for i, (x, r) in enumerate(zip(grid.nodes, right))]


# ---------------------------------------------------------------------------
# commands


def cmd_fit(cfg, out):
    data, fn = _training_data(cfg)
    sweep_cfg = _sweep(cfg)
    model, sweep = fit_theta(data, sweep_cfg, return_sweep=True)
    name = fn.name if fn else Path(cfg["data"]).stem
    if data.dimension == 1:
        self_err = sweep_theta(data, sweep_cfg, method="self").error
        rows = [{"k": k, "theta": th, "rmse_exact": e, "rmse_self": s}
                for k, th, e, s in zip(sweep.k, sweep.theta, sweep.error, self_err)]
        schema = "sweep"
    else:
        rows = [{"k": k, "theta": th, "rmse_implicit": e}
                for k, th, e in zip(sweep.k, sweep.theta, sweep.error)]
        schema = {"k": float, "theta": float, "rmse_implicit": float}
    # failed sweep points are stored as inf, which is a valid float
    io.write_csv(out / f"fit_{name}_sweep.csv", rows, schema)
    summary = {"k": model.k, "theta": model.k * model.d_typ ** 2, "d_typ": model.d_typ,
               "n_points": len(data)}
    if data.dimension == 1:
        xq = np.linspace(data.points.min(), data.points.max(), int(cfg["n_query"]))
        pred = predict(model, xq)
        pred_rows = [{"x": x, "phi": p} for x, p in zip(xq, pred)]
        io.write_csv(out / f"fit_{name}_prediction.csv", pred_rows, ("x", "phi"))
        if fn is not None:
            summary["normalized_rmse"] = normalized_rmse(
                pred, fn.value(xq), float(np.max(np.abs(fn.value(xq)))))
    plt, (fig, ax) = _figure()
    for key in [c for c in rows[0] if c.startswith("rmse")]:
        ax.loglog(sweep.k, [r[key] for r in rows], "o-", label=key[5:])
    ax.set_xlabel("k = theta / d_typ^2")
    ax.set_ylabel("validation RMSE (normalized)")
    ax.legend()
    _save(plt, fig, out / f"fit_{name}_sweep.svg")
    _finish(out, f"fit_{name}", cfg, summary)


def cmd_derive(cfg, out):
    data, fn = _training_data(cfg)
    scheme = cfg["scheme"]
    if scheme not in ("explicit", "implicit"):
        raise InvalidConfig(f"unknown scheme {scheme!r}", key="scheme")
    model = fit_theta(data, _sweep(cfg))
    name = fn.name if fn else Path(cfg["data"]).stem
    rng = np.random.default_rng(int(cfg["seed"]) + 2)
    lo, hi = data.points.min(axis=0), data.points.max(axis=0)
    xq = rng.uniform(lo, hi, (int(cfg["n_test"]), data.dimension))
    xq = xq[_inside(data.points, xq)]
    if data.dimension == 1:
        xq = np.sort(xq[:, 0])
    elif scheme != "implicit":
        raise InvalidConfig("the explicit scheme is 1D only; use implicit", key="scheme")
    if scheme == "explicit":
        res = explicit_field(model, xq)
    else:
        res = implicit_field(model, xq, strict=False)
    # points whose implicit system stayed ill-conditioned are left out
    ok = np.isfinite(res.lap)
    xq, grad, lap = xq[ok], res.grad[ok], res.lap[ok]
    if data.dimension == 1:
        rows = [{"x": x, "grad": g, "lap": l} for x, g, l in zip(xq, grad, lap)]
        io.write_csv(out / f"derive_{name}_{scheme}.csv", rows, "derivatives_1d")
    else:
        cols = [f"x{a + 1}" for a in range(data.dimension)]
        cols += [f"grad{a + 1}" for a in range(data.dimension)] + ["lap"]
        rows = [dict(zip(cols, [*p, *g, l])) for p, g, l in zip(xq, grad, lap)]
        io.write_csv(out / f"derive_{name}_{scheme}.csv", rows, cols)
    summary = {"k": model.k, "scheme": scheme, "n_test": len(xq), "n_skipped": int((~ok).sum())}
    if fn is not None:
        summary["rmse_grad"] = rmse(grad, fn.grad(xq))
        summary["rmse_lap"] = rmse(lap, fn.laplacian(xq))
    plt, (fig, ax) = _figure()
    if data.dimension == 1:
        ax.plot(xq, grad, ".", ms=2, label="grad")
        if fn is not None:
            ax.plot(xq, fn.grad(xq), "-", lw=0.8, label="exact grad")
        ax.set_xlabel("x")
        ax.legend()
    else:
        sc = ax.scatter(xq[:, 0], xq[:, 1], c=lap, s=4)
        fig.colorbar(sc, ax=ax, label="Laplacian")
    _save(plt, fig, out / f"derive_{name}_{scheme}.svg")
    _finish(out, f"derive_{name}_{scheme}", cfg, summary)


def cmd_converge(cfg, out):
    fn, scheme = cfg["fn"], cfg["scheme"]
    rows, slopes = convergence_study(fn, cfg["ns"], scheme, seed=int(cfg["seed"]),
                                     n_test=int(cfg["n_test"]), sweep=_sweep(cfg))
    stem = f"converge_{fn}_{scheme}"
    io.write_csv(out / f"{stem}.csv", [{k: r[k] for k in io.SCHEMAS["convergence"]}
                                       for r in rows], "convergence")
    plt, (fig, ax) = _figure()
    ns = [r["N"] for r in rows]
    ax.loglog(ns, [r["rmse_grad"] for r in rows], "o-", label="RMSE grad")
    ax.loglog(ns, [r["rmse_lap"] for r in rows], "s-", label="RMSE Laplacian")
    ax.set_xlabel("N")
    ax.set_ylabel("RMSE")
    ax.legend()
    _save(plt, fig, out / f"{stem}.svg")
    _finish(out, stem, cfg, {"slope_grad": slopes[0], "slope_lap": slopes[1],
                             "n_skipped": [r["n_skipped"] for r in rows]})


def cmd_noise(cfg, out):
    fn = cfg["fn"]
    rows = noise_study(fn, int(cfg["n"]), cfg["levels"], tuple(cfg["schemes"]),
                       seed=int(cfg["seed"]), n_test=int(cfg["n_test"]), sweep=_sweep(cfg))
    stem = f"noise_{fn}"
    io.write_csv(out / f"{stem}.csv", [{k: r[k] for k in io.SCHEMAS["noise"]} for r in rows],
                 "noise")
    plt, (fig, ax) = _figure()
    for scheme in cfg["schemes"]:
        sub = [r for r in rows if r["scheme"] == scheme]
        ax.plot([r["s"] for r in sub], [r["rmse_grad"] for r in sub], "o-", label=scheme)
    ax.set_yscale("log")
    ax.set_xlabel("noise scale s")
    ax.set_ylabel("RMSE grad")
    ax.legend()
    _save(plt, fig, out / f"{stem}.svg")
    _finish(out, stem, cfg, {"n_skipped": sum(r["n_skipped"] for r in rows)})


def cmd_dnn(cfg, out):
    rows = dnn_table(int(cfg["n"]), int(cfg["n_test"]), int(cfg["seed"]), _sweep(cfg))
    io.write_csv(out / "dnn_table.csv", [{k: r[k] for k in io.SCHEMAS["dnn_table"]}
                                         for r in rows], "dnn_table")
    plt, (fig, ax) = _figure()
    pos = np.arange(len(rows))
    for j, key in enumerate(("dnn_mse_grad", "implicit_mse_grad", "explicit_mse_grad")):
        ax.bar(pos + 0.25 * j, [max(r[key], 1e-32) for r in rows], 0.25, label=key[:-9])
    ax.set_xticks(pos + 0.25, [r["function"] for r in rows])
    ax.set_yscale("log")
    ax.set_ylabel("MSE of the gradient")
    ax.legend()
    _save(plt, fig, out / "dnn_table.svg")
    _finish(out, "dnn_table", cfg, {"k": {r["function"]: r["k"] for r in rows}})


def _solver_cfg(cfg):
    return SolverConfig(cfl=float(cfg["cfl"]), t_end=float(cfg["t_end"]),
                        retrain_every=int(cfg["retrain_every"]),
                        snapshot_every=int(cfg["snapshot_every"]), sweep=_sweep(cfg))


def cmd_burgers(cfg, out):
    scheme = cfg["scheme"]
    if scheme not in BURGERS_SCHEMES:
        raise InvalidConfig(f"unknown Burgers scheme {scheme!r}; choose from "
                            f"{', '.join(BURGERS_SCHEMES)}", key="scheme")
    res = run_simulation(BURGERS_SCHEMES[scheme], _solver_cfg(cfg), n=int(cfg["n"]))
    stem = f"burgers_{scheme}"
    x = res.grid.nodes
    rows = [{"t": t, "x": xi, "u": ui} for t, u in zip(res.times, res.snapshots)
            for xi, ui in zip(x, u)]
    io.write_csv(out / f"{stem}_snapshots.csv", rows, "burgers_snapshot")
    io.write_csv(out / "burgers_grid.csv", _grid_rows(res.grid), "grid")
    u = res.snapshots[-1]
    summary = {"steps": res.steps, "t": res.times[-1],
               "max_conservation_residual": res.max_conservation_residual,
               "shock_position": level_crossing(x, u, 0.5),
               "k_history": [k for _, k in res.k_history]}
    plt, (fig, ax) = _figure()
    ax.plot(x, u, ".-", ms=2, label=scheme)
    exact = np.where(x < 0.5 * res.times[-1] + 0.5, 1.0, 0.0)
    ax.plot(x, exact, "k--", lw=0.8, label="exact")
    ax.set_xlabel("x")
    ax.set_ylabel("u")
    ax.legend()
    _save(plt, fig, out / f"{stem}.svg")
    _finish(out, stem, cfg, summary)


def sod_metric_rows(x, rho, t, scheme):
    """Shock metrics of a density profile against the exact solution, per region."""
    ex = sod_exact(x, t).rho
    rows = []
    for region, (ws, wp) in SOD_WINDOWS.items():
        m = shock_metrics(rho, ex, x, ws, wp)
        rows.append({"scheme": scheme, "region": region, "l1": m.l1, "linf": m.linf,
                     "thickness": np.inf if m.thickness is None else m.thickness,
                     "post_shock_osc": m.post_shock_osc, "tv": m.tv})
    return rows


def cmd_sod(cfg, out):
    scheme = cfg["scheme"]
    if scheme not in SOD_SCHEMES:
        raise InvalidConfig(f"unknown Sod scheme {scheme!r}; choose from "
                            f"{', '.join(SOD_SCHEMES)}", key="scheme")
    res = run_simulation(SOD_SCHEMES[scheme], _solver_cfg(cfg), n=int(cfg["n"]))
    stem = f"sod_{scheme}"
    x = res.grid.nodes
    rows = []
    for t, U in zip(res.times, res.snapshots):
        rho, u, p = cons_to_prim(U)
        rows += [{"t": t, "x": a, "rho": b, "u": c, "p": d} for a, b, c, d in zip(x, rho, u, p)]
    io.write_csv(out / f"{stem}_snapshots.csv", rows, "euler_snapshot")
    io.write_csv(out / "sod_grid.csv", _grid_rows(res.grid), "grid")
    rho = cons_to_prim(res.snapshots[-1])[0]
    metrics = sod_metric_rows(x, rho, res.times[-1], scheme)
    io.write_csv(out / "sod_metrics.csv", metrics, "sod_metrics")
    plt, (fig, ax) = _figure()
    ax.plot(x, rho, ".-", ms=2, label=scheme)
    xf = np.linspace(0, 1, 2001)
    ax.plot(xf, sod_exact(xf, res.times[-1]).rho, "k--", lw=0.8, label="exact")
    ax.set_xlabel("x")
    ax.set_ylabel("density")
    ax.legend()
    _save(plt, fig, out / f"{stem}.svg")
    summary = {"steps": res.steps, "t": res.times[-1], "l1": metrics[0]["l1"],
               "linf": metrics[0]["linf"],
               "max_conservation_residual": res.max_conservation_residual}
    _finish(out, stem, cfg, summary)


def cmd_metrics(cfg, out):
    if not cfg["snapshot"]:
        raise InvalidConfig("metrics needs a snapshot CSV", key="snapshot")
    rows = io.read_csv(cfg["snapshot"], "euler_snapshot")
    if not rows:
        raise InvalidInput("snapshot file holds no rows")
    times = np.array([r["t"] for r in rows])
    t = times.max() if cfg["t"] is None else float(cfg["t"])
    sel = [r for r, tt in zip(rows, times) if tt == t]
    if not sel:
        raise InvalidConfig(f"no snapshot at t = {t!r}", key="t")
    x = np.array([r["x"] for r in sel])
    rho = np.array([r["rho"] for r in sel])
    metrics = sod_metric_rows(x, rho, t, cfg["scheme"])
    io.write_csv(out / "sod_metrics.csv", metrics, "sod_metrics")
    _finish(out, "metrics", cfg, {"t": t, "rows": metrics})


COMMANDS = {
    "fit": cmd_fit, "derive": cmd_derive, "converge": cmd_converge, "noise-sweep": cmd_noise,
    "dnn-table": cmd_dnn, "pde-burgers": cmd_burgers, "pde-sod": cmd_sod,
    "metrics": cmd_metrics,
}


# ---------------------------------------------------------------------------
# argument parsing


def _floats(text):
    return [float(v) for v in text.split(",") if v]


def _ints(text):
    return [int(v) for v in text.split(",") if v]


def _strs(text):
    return [v for v in text.split(",") if v]


def _common(p, seed=True):
    p.add_argument("--config", help="YAML file with values for this command")
    p.add_argument("--out", help=f"output directory (default ${ENV_OUTPUT} or ./{DEFAULT_OUTPUT})")
    if seed:
        p.add_argument("--seed", type=int)


def _sweep_args(p):
    p.add_argument("--k-min", type=float)
    p.add_argument("--k-max", type=float)
    p.add_argument("--n-sweep", type=int)
    p.add_argument("--refine", action="store_true", default=None)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="kbr", description="Kernel regression derivatives and "
                                 "flux prediction benchmarks.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    fn_choices = sorted(FUNCTIONS)

    p = sub.add_parser("fit", help="select the kernel width and predict the field")
    _common(p)
    _sweep_args(p)
    p.add_argument("--fn", choices=fn_choices)
    p.add_argument("--data", help="training CSV with columns x,phi or x1,...,xD,phi")
    p.add_argument("--n", type=int)
    p.add_argument("--n-query", type=int)
    p.add_argument("--noise", type=float)

    p = sub.add_parser("derive", help="derivatives at random points inside the data")
    _common(p)
    _sweep_args(p)
    p.add_argument("--fn", choices=fn_choices)
    p.add_argument("--data")
    p.add_argument("--scheme", choices=["explicit", "implicit"])
    p.add_argument("--n", type=int)
    p.add_argument("--n-test", type=int)
    p.add_argument("--noise", type=float)

    p = sub.add_parser("converge", help="derivative RMSE against N")
    _common(p)
    _sweep_args(p)
    p.add_argument("--fn", choices=fn_choices)
    p.add_argument("--scheme", choices=["explicit", "implicit", "fd", "spline"])
    p.add_argument("--ns", type=_ints, help="comma-separated increasing N values")
    p.add_argument("--n-test", type=int)

    p = sub.add_parser("noise-sweep", help="derivative RMSE against the noise scale")
    _common(p)
    _sweep_args(p)
    p.add_argument("--fn", choices=fn_choices)
    p.add_argument("--n", type=int)
    p.add_argument("--levels", type=_floats, help="comma-separated noise scales s")
    p.add_argument("--schemes", type=_strs)
    p.add_argument("--n-test", type=int)

    p = sub.add_parser("dnn-table", help="MSE table of the benchmark fields")
    _common(p)
    _sweep_args(p)
    p.add_argument("--n", type=int)
    p.add_argument("--n-test", type=int)

    pde = sub.add_parser("pde", help="conservative solvers")
    pde_sub = pde.add_subparsers(dest="problem", required=True)
    for name, schemes in (("burgers", BURGERS_SCHEMES), ("sod", SOD_SCHEMES)):
        p = pde_sub.add_parser(name)
        _common(p)
        _sweep_args(p)
        p.add_argument("--scheme", choices=sorted(schemes))
        p.add_argument("--n", type=int)
        p.add_argument("--t-end", type=float)
        p.add_argument("--cfl", type=float)
        p.add_argument("--retrain-every", type=int)
        p.add_argument("--snapshot-every", type=int)

    p = sub.add_parser("metrics", help="shock metrics of a stored Sod snapshot")
    _common(p, seed=False)
    p.add_argument("--snapshot", help="snapshot CSV written by 'pde sod'")
    p.add_argument("--scheme", help="label for the metrics table")
    p.add_argument("--t", type=float, help="snapshot time (default: the last one)")
    return ap


_SWEEP_FLAGS = {"k_min", "k_max", "n_sweep", "refine"}
_GLOBAL_FLAGS = {"command", "problem", "config", "out", "verbose"}


def resolve_config(args) -> tuple[str, dict]:
    """Merge defaults, the optional YAML file and explicit flags."""
    name = args.command if args.command != "pde" else f"pde-{args.problem}"
    defaults = DEFAULTS[name]
    file_cfg = io.load_config(args.config) if args.config else {}
    flags = {k: v for k, v in vars(args).items() if k not in _GLOBAL_FLAGS | _SWEEP_FLAGS}
    sweep_flags = {k: v for k, v in vars(args).items() if k in _SWEEP_FLAGS}
    if any(v is not None for v in sweep_flags.values()):
        flags["sweep"] = sweep_flags
    return name, io.merge_config(defaults, file_cfg, flags)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        name, cfg = resolve_config(args)
        out = output_dir(args.out)
        COMMANDS[name](cfg, out)
    except InvalidConfig as exc:
        print(f"kbr: bad config ({exc.key}): {exc}", file=sys.stderr)
        return 2
    except (InvalidInput, SchemaError) as exc:
        key = getattr(exc, "column", None)
        print(f"kbr: bad input{f' ({key})' if key else ''}: {exc}", file=sys.stderr)
        return 2
    except KBRError as exc:
        print(f"kbr: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
