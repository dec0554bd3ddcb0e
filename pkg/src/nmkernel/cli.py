"""Command-line front end.

Subcommands: density, kernel, correlation, limits, verify, sample, figure.
Results go to --out (stdout by default) as JSON with a metadata block, or as
CSV with a one-line header.  Exit status: 0 success, 2 invalid input,
3 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .asymptotics import (
    EdgeFrame,
    Regime,
    f_gradient,
    f_U_value,
    f_value,
    g_pm,
    h_coeffs,
    limit_correlation,
    limit_density,
)
from .errors import NMKError
from .geometry import ellipse_point, focus_distance, normal_angle, semi_axes, u_map
from .kernel import (
    correlation,
    density_grid,
    general_density_grid,
    general_kernel_matrix,
    identity_report,
    normalized_kernel_matrix,
)
from .orthopoly import (
    CanonicalModel,
    GeneralPotential,
    derivative_relation_residual,
    hermite_closed_form,
    poly_sequence,
)
from .sampler import RNG_ALGORITHM, GasConfig, Grid, run_chain

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_VERIFY_FAILED = 3

DEFAULT_TOLERANCES = {
    "identity": 1e-8,
    "closed_form": 1e-9,
    "derivative": 1e-10,
    "boundary": 1e-10,
}

FIGURES = ("f-real", "gpm", "erfc-profile", "gw-phase")


class UsageError(Exception):
    pass


# ----------------------------------------------------------------------
# parsing helpers

def parse_grid(spec: str) -> Grid:
    """'xmin:xmax:nx[,ymin:ymax:ny]'; without a y part the grid is the real line."""
    parts = spec.split(",")
    if len(parts) not in (1, 2):
        raise UsageError(f"bad grid {spec!r}")

    def axis(text):
        bits = text.split(":")
        if len(bits) != 3:
            raise UsageError(f"bad grid axis {text!r}, expected lo:hi:count")
        try:
            lo, hi, cnt = float(bits[0]), float(bits[1]), int(bits[2])
        except ValueError:
            raise UsageError(f"bad grid axis {text!r}") from None
        if cnt < 1 or hi < lo or not (math.isfinite(lo) and math.isfinite(hi)):
            raise UsageError(f"bad grid axis {text!r}")
        return lo, hi, cnt

    x = axis(parts[0])
    y = axis(parts[1]) if len(parts) == 2 else (0.0, 0.0, 1)
    return Grid(x[0], x[1], x[2], y[0], y[1], y[2])


def parse_complex(text: str) -> complex:
    """A complex number written as '1.5', '0.2-0.3j' or 're,im'."""
    text = text.strip()
    try:
        if "," in text:
            re_, im_ = text.split(",")
            z = complex(float(re_), float(im_))
        else:
            z = complex(text.replace("i", "j"))
    except ValueError:
        raise UsageError(f"cannot read complex number {text!r}") from None
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise UsageError(f"non-finite value {text!r}")
    return z


def parse_points(text: str) -> list:
    return [parse_complex(p) for p in text.split(";") if p.strip()]


def cx(z) -> dict:
    z = complex(z)
    return {"re": float(z.real), "im": float(z.imag)}


def _num(x):
    """JSON-safe float: non-finite values become null."""
    x = float(x)
    return x if math.isfinite(x) else None


def thread_count() -> int:
    raw = os.environ.get("NKL_THREADS", "")
    try:
        k = int(raw)
    except ValueError:
        k = os.cpu_count() or 1
    return max(1, k)


_CHUNK = 256


def map_chunks(func, points: np.ndarray):
    """Evaluate func on fixed-size chunks of ``points`` in worker threads, in order.

    The chunking does not depend on the thread count, so vectorised
    rounding is the same for any NKL_THREADS.
    """
    flat = points.ravel()
    chunks = [flat[k:k + _CHUNK] for k in range(0, flat.size, _CHUNK)] or [flat]
    workers = min(thread_count(), len(chunks))
    if workers == 1:
        parts = [func(c) for c in chunks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(func, chunks))
    return np.concatenate(parts).reshape(points.shape)


# ----------------------------------------------------------------------
# model selection

def _general_given(args) -> bool:
    return any(getattr(args, k, None) is not None for k in ("t0", "t1_re", "t1_im", "t2_re", "t2_im"))


def resolve_model(args, allow_general: bool):
    if args.n is None:
        raise UsageError("--n is required")
    general = _general_given(args)
    if general and args.t is not None:
        raise UsageError("give either --t or the --t0/--t1-*/--t2-* set, not both")
    if general:
        if not allow_general:
            raise UsageError(f"{args.command} works with the canonical model only (--t)")
        if args.t0 is None:
            raise UsageError("--t0 is required for a general potential")
        pot = GeneralPotential(args.t0, complex(args.t1_re or 0.0, args.t1_im or 0.0),
                               complex(args.t2_re or 0.0, args.t2_im or 0.0))
        return "general", pot
    if args.t is None:
        raise UsageError("--t is required")
    return "canonical", CanonicalModel(args.n, args.t)


def model_params(kind, model, n) -> dict:
    if kind == "canonical":
        return {"n": model.n, "t": model.t}
    return {"n": n, "t0": model.t0, "t1": cx(model.t1), "t2": cx(model.t2)}


# ----------------------------------------------------------------------
# output

def metadata(args, params: dict) -> dict:
    return {
        "version": __version__,
        "command": args.command,
        "parameters": params,
        "rng": {"algorithm": RNG_ALGORITHM, "seed": args.seed},
    }


def write_output(args, payload: dict, header: list, rows: list) -> None:
    fmt = args.format
    if fmt == "json":
        text = json.dumps(payload, indent=1, sort_keys=True, allow_nan=False) + "\n"
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow(["" if v is None else (repr(float(v)) if isinstance(v, float) else v) for v in row])
        text = buf.getvalue()
    if args.out in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def grid_payload(grid: Grid) -> dict:
    return {"x": [float(v) for v in grid.xs()], "y": [float(v) for v in grid.ys()], "order": "row-major (y, x)"}


# ----------------------------------------------------------------------
# commands

def cmd_density(args):
    kind, model = resolve_model(args, allow_general=True)
    grid = parse_grid(args.grid)
    pts = grid.points()
    if kind == "canonical":
        vals = map_chunks(lambda z: density_grid(model, z), pts)
    else:
        vals = map_chunks(lambda z: general_density_grid(model, args.n, z), pts)
    params = model_params(kind, model, args.n)
    params["grid"] = args.grid
    payload = {"metadata": metadata(args, params), "grid": grid_payload(grid),
               "density": [[_num(v) for v in row] for row in vals]}
    rows = [(float(z.real), float(z.imag), _num(v)) for z, v in zip(pts.ravel(), vals.ravel())]
    write_output(args, payload, ["x [plane]", "y [plane]", "density [per unit area]"], rows)
    return EXIT_OK


def cmd_kernel(args):
    kind, model = resolve_model(args, allow_general=True)
    grid = parse_grid(args.grid)
    w = parse_complex(args.w)
    pts = grid.points()
    if kind == "canonical":
        f = lambda z: normalized_kernel_matrix(model, [w], z)[0]
    else:
        f = lambda z: general_kernel_matrix(model, args.n, [w], z)[0]
    vals = map_chunks(f, pts)
    params = model_params(kind, model, args.n)
    params.update(grid=args.grid, w=cx(w))
    payload = {"metadata": metadata(args, params), "grid": grid_payload(grid),
               "kernel": [[cx(v) for v in row] for row in vals]}
    rows = [(float(z.real), float(z.imag), float(v.real), float(v.imag))
            for z, v in zip(pts.ravel(), vals.ravel())]
    write_output(args, payload, ["x [plane]", "y [plane]", "kernel_re [per unit area]",
                                 "kernel_im [per unit area]"], rows)
    return EXIT_OK


def cmd_correlation(args):
    _, model = resolve_model(args, allow_general=False)
    pts = parse_points(args.points)
    cm = correlation(model, pts)
    params = model_params("canonical", model, args.n)
    params["points"] = [cx(p) for p in pts]
    payload = {
        "metadata": metadata(args, params),
        "entries": [[cx(v) for v in row] for row in cm.entries],
        "det": _num(cm.det),
        "det_rescaled": _num(cm.det_rescaled),
        "logdet": _num(cm.logdet),
        "sign": cm.sign,
        "min_eigenvalue": cm.min_eigenvalue(),
    }
    rows = [(k, l, float(v.real), float(v.imag)) for k, row in enumerate(cm.entries) for l, v in enumerate(row)]
    write_output(args, payload, ["row [index]", "col [index]", "entry_re [per unit area]",
                                 "entry_im [per unit area]"], rows)
    return EXIT_OK


def cmd_limits(args):
    if args.t is None:
        raise UsageError("--t is required")
    regime = Regime(args.regime)
    frame = EdgeFrame.from_phi(args.t, args.phi) if regime is Regime.EDGE else None
    grid = parse_grid(args.grid)
    offs = grid.points()
    dens = np.vectorize(lambda a: limit_density(args.t, regime, a, frame))(offs)
    params = {"t": args.t, "regime": regime.value, "phi": args.phi, "grid": args.grid}
    payload = {"metadata": metadata(args, params), "grid": grid_payload(grid),
               "limit_density": [[float(v) for v in row] for row in dens]}
    if args.points:
        pts = parse_points(args.points)
        payload["limit_correlation"] = limit_correlation(args.t, regime, pts, phi=args.phi)
        payload["limit_correlation_renormalized"] = limit_correlation(args.t, regime, pts, phi=args.phi,
                                                                      renormalized=True)
        params["points"] = [cx(p) for p in pts]
    rows = [(float(a.real), float(a.imag), float(v)) for a, v in zip(offs.ravel(), dens.ravel())]
    write_output(args, payload, ["a_re [rescaled]", "a_im [rescaled]", "density [per unit area]"], rows)
    return EXIT_OK


def run_verification(n: int, t: float, seed: int, samples: int, tol: dict) -> dict:
    """Residual suites for one (n, t); every entry records worst value and pass flag."""
    rng = np.random.default_rng(seed)
    model = CanonicalModel(n, t)
    suites = {}

    worst = 0.0
    for _ in range(samples):
        w, z = (complex(*rng.uniform(-2, 2, 2)) for _ in range(2))
        r = identity_report(model, w, z)
        worst = max(worst, r.plus, r.minus, r.dw, r.dz)
    suites["identities"] = (worst, tol["identity"])

    worst = 0.0
    mmax = min(200, max(4 * n, 20))
    for _ in range(max(1, samples // 10)):
        z = complex(*rng.uniform(-2, 2, 2))
        a = poly_sequence(model, z, mmax)
        b = hermite_closed_form(model, z, mmax)
        for k in range(mmax + 1):
            d = a[k] - b[k]
            if not d.is_zero():
                worst = max(worst, math.exp(d.log_abs() - b[k].log_abs()))
    suites["closed_form"] = (worst, tol["closed_form"])

    worst = 0.0
    for _ in range(samples):
        z = complex(*rng.uniform(-2, 2, 2))
        r = derivative_relation_residual(model, z, int(rng.integers(1, 51)))
        worst = max(worst, r.residual)
    suites["derivative"] = (worst, tol["derivative"])

    if t > 0:
        worst = 0.0
        F = focus_distance(t)
        for phi in np.linspace(-math.pi, math.pi, 100):
            z = ellipse_point(t, phi)
            h = h_coeffs(t, z)
            vals = [f_value(t, z), *f_gradient(t, z), abs(h.h1), abs(h.h1bar),
                    abs(2 * h.h2) - 1, abs(h.gw) - 1, f_U_value(t, u_map(z, F)) - f_value(t, z)]
            worst = max(worst, max(abs(v) for v in vals))
        suites["boundary"] = (worst, tol["boundary"])

    return {k: {"worst": v, "tolerance": tl, "passed": bool(v <= tl)} for k, (v, tl) in suites.items()}


def cmd_verify(args):
    _, model = resolve_model(args, allow_general=False)
    tol = dict(DEFAULT_TOLERANCES)
    for key in tol:
        override = getattr(args, f"tol_{key}")
        if override is not None:
            tol[key] = override
    report = run_verification(model.n, model.t, args.seed, args.samples, tol)
    ok = all(s["passed"] for s in report.values())
    params = model_params("canonical", model, args.n)
    params.update(samples=args.samples, tolerances=tol)
    payload = {"metadata": metadata(args, params), "suites": report, "passed": ok,
               "failures": sorted(k for k, s in report.items() if not s["passed"])}
    rows = [(k, s["worst"], s["tolerance"], int(s["passed"])) for k, s in sorted(report.items())]
    write_output(args, payload, ["suite [name]", "worst [relative]", "tolerance [relative]", "passed [bool]"], rows)
    return EXIT_OK if ok else EXIT_VERIFY_FAILED


def cmd_sample(args):
    _, model = resolve_model(args, allow_general=False)
    cfg = GasConfig(model.n, model.t, sweeps=args.sweeps, burnin=args.burnin, seed=args.seed,
                    step=args.step, thin=args.thin)
    res = run_chain(cfg, model)
    params = model_params("canonical", model, args.n)
    params.update(sweeps=cfg.sweeps, burnin=cfg.burnin, thin=cfg.thin, step=cfg.step_size)
    payload = {
        "metadata": metadata(args, params),
        "acceptance_rate": res.acceptance_rate,
        "snapshots": [{"sweep": s.sweep, "log_weight": s.log_weight,
                       "positions": [cx(z) for z in s.positions]} for s in res.snapshots],
    }
    rows = [(s.sweep, k, float(z.real), float(z.imag))
            for s in res.snapshots for k, z in enumerate(s.positions)]
    write_output(args, payload, ["sweep [index]", "particle [index]", "x [plane]", "y [plane]"], rows)
    return EXIT_OK


def cmd_figure(args):
    target = args.target
    count = args.samples
    t = args.t
    if target == "f-real":
        t = math.sqrt(5.0) - 2.0 if t is None else t
        F = focus_distance(t)
        xs = np.linspace(-args.xmax, args.xmax, count)
        vals = [None if abs(x) <= F else f_value(t, complex(x)) for x in xs]
        header = ["x [plane]", "f [dimensionless]"]
        rows = [(float(x), v) for x, v in zip(xs, vals)]
        data = {"x": [float(x) for x in xs], "f": vals, "focus": F}
    elif target in ("gpm", "gw-phase"):
        if t is None:
            raise UsageError("--t is required")
        phis = np.linspace(-math.pi, math.pi, count)
        if target == "gpm":
            gs = [g_pm(t, ellipse_point(t, p)) for p in phis]
            header = ["phi [rad]", "g_plus [dimensionless]", "g_minus [dimensionless]"]
            rows = [(float(p), g[0], g[1]) for p, g in zip(phis, gs)]
            data = {"phi": [float(p) for p in phis], "g_plus": [g[0] for g in gs],
                    "g_minus": [g[1] for g in gs]}
        else:
            ph = [math.atan2(-h.gw.imag, -h.gw.real) for h in (h_coeffs(t, ellipse_point(t, p)) for p in phis)]
            header = ["phi [rad]", "phase_minus_gw [rad]"]
            rows = [(float(p), v) for p, v in zip(phis, ph)]
            data = {"phi": [float(p) for p in phis], "phase_minus_gw": ph}
    elif target == "erfc-profile":
        if t is None or args.n is None:
            raise UsageError("--t and --n are required")
        from .scaledcx import complex_erfc
        model = CanonicalModel(args.n, t)
        frame = EdgeFrame.from_phi(t, args.phi)
        a = np.linspace(-2.0, 2.0, count)
        pts = frame.z0 + a * np.exp(1j * frame.psi) / math.sqrt(args.n)
        rho = 2.0 * math.pi * density_grid(model, pts)
        ref = [complex_erfc(math.sqrt(2.0) * v).real for v in a]
        header = ["a [rescaled]", "two_pi_density [dimensionless]", "erfc_sqrt2_a [dimensionless]"]
        rows = [(float(x), float(r), e) for x, r, e in zip(a, rho, ref)]
        data = {"a": [float(x) for x in a], "two_pi_density": [float(r) for r in rho], "erfc_sqrt2_a": ref}
    else:
        raise UsageError(f"unknown figure {target!r}")
    params = {"target": target, "t": t, "n": args.n, "samples": count, "phi": args.phi}
    write_output(args, {"metadata": metadata(args, params), "data": data}, header, rows)
    return EXIT_OK


# ----------------------------------------------------------------------
# argument parser

def _common(p, model=True):
    if model:
        p.add_argument("--n", type=int)
        p.add_argument("--t", type=float)
        p.add_argument("--t0", type=float)
        p.add_argument("--t1-re", type=float, dest="t1_re")
        p.add_argument("--t1-im", type=float, dest="t1_im")
        p.add_argument("--t2-re", type=float, dest="t2_re")
        p.add_argument("--t2-im", type=float, dest="t2_im")
    p.add_argument("--out", default=None, help="output path (default stdout)")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nmkernel", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("density", help="density rho_n on a grid")
    _common(p)
    p.add_argument("--grid", required=True, help="xmin:xmax:nx[,ymin:ymax:ny]")

    p = sub.add_parser("kernel", help="normalised kernel K~_n(w, z)/n for z on a grid")
    _common(p)
    p.add_argument("--grid", required=True)
    p.add_argument("--w", required=True, help="fixed first argument, e.g. 0.1+0.2j")

    p = sub.add_parser("correlation", help="correlation matrix and determinant")
    _common(p)
    p.add_argument("--points", required=True, help="semicolon-separated complex numbers")

    p = sub.add_parser("limits", help="limiting density and correlations")
    _common(p)
    p.add_argument("--regime", choices=[r.value for r in Regime], default="inside")
    p.add_argument("--phi", type=float, default=0.0)
    p.add_argument("--grid", default="-2:2:21")
    p.add_argument("--points", default=None)

    p = sub.add_parser("verify", help="identity and closed-form residual suites")
    _common(p)
    p.add_argument("--samples", type=int, default=50)
    for key, val in DEFAULT_TOLERANCES.items():
        p.add_argument(f"--tol-{key.replace('_', '-')}", type=float, dest=f"tol_{key}", default=None,
                       help=f"tolerance override (default {val:g})")

    p = sub.add_parser("sample", help="Metropolis chain for the eigenvalue gas")
    _common(p)
    p.add_argument("--sweeps", type=int, default=10000)
    p.add_argument("--burnin", type=int, default=1000)
    p.add_argument("--thin", type=int, default=100)
    p.add_argument("--step", type=float, default=None)

    p = sub.add_parser("figure", help="plot data for the standard figures")
    p.add_argument("target", choices=FIGURES)
    _common(p)
    p.add_argument("--samples", type=int, default=201)
    p.add_argument("--phi", type=float, default=0.0)
    p.add_argument("--xmax", type=float, default=3.0)
    return parser


COMMANDS = {
    "density": cmd_density,
    "kernel": cmd_kernel,
    "correlation": cmd_correlation,
    "limits": cmd_limits,
    "verify": cmd_verify,
    "sample": cmd_sample,
    "figure": cmd_figure,
}


_VALUE_FLAGS = ("--grid", "--points", "--w")


def _join_values(argv):
    # "--grid -2:2:5" would read -2:2:5 as an option; pass it as "--grid=-2:2:5"
    out = []
    it = iter(argv)
    for tok in it:
        if tok in _VALUE_FLAGS:
            nxt = next(it, None)
            out.append(tok if nxt is None else f"{tok}={nxt}")
        else:
            out.append(tok)
    return out


def main(argv=None) -> int:
    parser = build_parser()
    argv = _join_values(sys.argv[1:] if argv is None else list(argv))
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        return COMMANDS[args.command](args)
    except (UsageError, NMKError) as exc:
        sys.stderr.write(f"nmkernel {args.command}: {exc}\n")
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
