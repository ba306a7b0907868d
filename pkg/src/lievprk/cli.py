"""Command-line driver: ``lievprk {simulate,converge,poincare,compare,selftest}``."""

from __future__ import annotations

import argparse
import io
import os
import sys
import tempfile
from datetime import datetime, timezone

import numpy as np

from . import runconfig
from .diagnostics import (
    Trajectory,
    convergence_order,
    dlp_residuals,
    drift_series,
    poincare_section,
    simulate,
)
from .errors import NoConvergence, OutOfDomain, ReferenceUnconverged
from .integrators import get_tableau, is_variational, make_stepper
from .retraction import Retraction
from .state import initial_state

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2
EXIT_NO_CONVERGENCE = 3
EXIT_OUT_OF_DOMAIN = 4


def fmt(x) -> str:
    """Render a float with 17 significant digits (lossless round trip)."""
    return f"{float(x):.17g}"


def write_atomic(path: str, text: str) -> None:
    """Write ``text`` to a temporary file beside ``path`` and rename it into place."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(path, text):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        write_atomic(path, text)


def metadata(config, extra=None, timestamp=False) -> str:
    lines = ["# lievprk run configuration"]
    lines += [f"# {line}" for line in runconfig.serialize(config).splitlines()]
    for key, value in (extra or {}).items():
        lines.append(f"# {key} = {value}")
    if timestamp:
        lines.append(f"# timestamp = {datetime.now(timezone.utc).isoformat()}")
    return "\n".join(lines) + "\n"


# -- trajectory CSV -----------------------------------------------------------


def trajectory_columns(group, stages=None) -> list:
    n, d = group.n, group.dim
    cols = ["step", "t"]
    cols += [f"g_{i}{j}" for i in range(n) for j in range(n)]
    cols += [f"xi_{k}" for k in range(d)]
    cols += [f"mu_{k}" for k in range(d)]
    cols += ["energy"]
    cols += [f"spatial_momentum_{k}" for k in range(d)]
    cols += ["group_residual", "newton_iters", "residual"]
    if stages:
        for i in range(stages):
            for name in ("Theta", "Xi", "M", "mu"):
                cols += [f"stage{i}_{name}_{k}" for k in range(d)]
    return cols


def trajectory_rows(traj: Trajectory, stages=None) -> list:
    model = traj.model
    group = model.group
    g = traj.g
    xi = traj.xi
    mu = traj.mu
    energy = model.energy(g, xi)
    spatial = group.spatial_momentum(g, mu)
    resid = group.residual(g)
    rows = []
    for k in range(len(traj)):
        report = traj.reports[k - 1] if k > 0 else None
        fields = [str(k), fmt(traj.states[k].t)]
        fields += [fmt(v) for v in g[k].ravel()]
        fields += [fmt(v) for v in xi[k]]
        fields += [fmt(v) for v in mu[k]]
        fields.append(fmt(energy[k]))
        fields += [fmt(v) for v in spatial[k]]
        fields.append(fmt(resid[k]))
        fields.append(str(report.newton_iterations if report else 0))
        fields.append(fmt(report.residual if report else 0.0))
        if stages:
            data = report.stages if report else None
            for i in range(stages):
                for name in ("Theta", "Xi", "M", "mu"):
                    values = getattr(data, name)[i] if data is not None else np.zeros(group.dim)
                    fields += [fmt(v) for v in values]
        rows.append(",".join(fields))
    return rows


def _abort_line(exc) -> str:
    return f"# ABORTED: {type(exc).__name__}: {exc}\n"


def _exit_code(exc) -> int:
    if isinstance(exc, NoConvergence):
        return EXIT_NO_CONVERGENCE
    if isinstance(exc, OutOfDomain):
        return EXIT_OUT_OF_DOMAIN
    raise exc


# -- commands -----------------------------------------------------------------


def _setup(config, debug_stages=False):
    model = config.build_model()
    g, xi = config.initial_arrays(model)
    state = initial_state(model, g, xi, config.t_span[0])
    step = make_stepper(
        config.method, model, config.retraction, config.numerics, config.build_tableau(), debug_stages
    )
    return model, state, step


def _run(config, method=None, debug_stages=False):
    if method is not None:
        config = runconfig.RunConfig(**{**config.__dict__, "method": method})
    model, state, step = _setup(config, debug_stages)
    return simulate(step, state, config.h, config.steps, config.method, model, stop_on_error=True)


def cmd_simulate(config, output=None, debug_stages=False, timestamp=False) -> int:
    stages = None
    if debug_stages:
        if not config.method.startswith("vprk:"):
            raise runconfig.ConfigError("--debug-stages needs a vprk:<tableau> method")
        arg = config.method.partition(":")[2]
        stages = (config.build_tableau() if arg == "inline" else get_tableau(arg)).s
    traj = _run(config, debug_stages=debug_stages)
    buf = io.StringIO()
    buf.write(metadata(config, timestamp=timestamp))
    buf.write(",".join(trajectory_columns(traj.model.group, stages)) + "\n")
    for row in trajectory_rows(traj, stages):
        buf.write(row + "\n")
    code = EXIT_OK
    if traj.aborted is not None:
        buf.write(_abort_line(traj.aborted))
        code = _exit_code(traj.aborted)
        print(f"error: {traj.aborted}", file=sys.stderr)
    _emit(output or config.output, buf.getvalue())
    return code


def cmd_converge(config, h_list=None, output=None, timestamp=False) -> int:
    h_list = h_list if h_list is not None else config.h_list
    if h_list is None or len(h_list) < 4:
        raise runconfig.ConfigError("need >= 4 step sizes (--h-list or h_list)")
    if any(not h > 0 for h in h_list):
        raise runconfig.ConfigError("step sizes must be positive")
    model, state, step = _setup(config)
    T = config.t_span[1] - config.t_span[0]
    try:
        result = convergence_order(step, model, h_list, T, state)
    except (NoConvergence, OutOfDomain) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _exit_code(exc)
    except ReferenceUnconverged as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    buf = io.StringIO()
    buf.write(metadata(config, {"slope": fmt(result.slope), "reference_gap": fmt(result.reference_gap)}, timestamp))
    buf.write("h,error\n")
    for h, err in zip(result.h, result.errors):
        buf.write(f"{fmt(h)},{fmt(err)}\n")
    _emit(output or config.output, buf.getvalue())
    print(f"slope = {result.slope:.4f}")
    return EXIT_OK


def cmd_poincare(config, output=None, timestamp=False) -> int:
    if config.section is None:
        raise runconfig.ConfigError("poincare needs section.coordinate, section.level and section.direction")
    traj = _run(config)
    section = poincare_section(traj, config.section)
    extra = {f"section.{k}": v for k, v in config.section.to_dict().items()}
    buf = io.StringIO()
    buf.write(metadata(config, extra, timestamp))
    buf.write(",".join(["t"] + section.names) + "\n")
    for t, row in zip(section.times, section.points):
        buf.write(",".join([fmt(t)] + [fmt(v) for v in row]) + "\n")
    code = EXIT_OK
    if traj.aborted is not None:
        buf.write(_abort_line(traj.aborted))
        code = _exit_code(traj.aborted)
        print(f"error: {traj.aborted}", file=sys.stderr)
    _emit(output or config.output, buf.getvalue())
    print(f"{len(section)} section points")
    return code


COMPARE_COLUMNS = [
    "method",
    "energy_slope",
    "energy_slope_stderr",
    "energy_excursion",
    "energy_slope_ratio",
    "momentum_slope",
    "momentum_excursion",
    "group_residual_final",
    "dlp_residual_max",
]


def cmd_compare(config, methods=None, output=None, timestamp=False) -> int:
    methods = methods if methods is not None else config.methods
    if methods is None or len(methods) < 2:
        raise runconfig.ConfigError("compare needs >= 2 methods (--methods or methods)")
    rows = []
    code = EXIT_OK
    base_slope = None
    for method in methods:
        traj = _run(config, method)
        if traj.aborted is not None:
            print(f"error: {method}: {traj.aborted}", file=sys.stderr)
            code = _exit_code(traj.aborted)
            break
        energy = drift_series(traj, "energy")
        d = traj.model.group.dim
        momentum = [drift_series(traj, "momentum_component", k) for k in range(d)]
        worst = max(momentum, key=lambda f: abs(f.slope))
        if base_slope is None:
            base_slope = abs(energy.slope)
        ratio = abs(energy.slope) / base_slope if base_slope > 0 else float("inf")
        dlp = float("nan")
        if is_variational(method) and traj.model.is_left_invariant and traj.reports:
            retraction = method.partition(":")[2] if method.startswith("ep:") else config.retraction
            res = dlp_residuals(traj, Retraction.from_config(retraction, traj.model.group, config.numerics))
            dlp = float(res.max()) if res.size else 0.0
        rows.append(
            [
                method,
                fmt(energy.slope),
                fmt(energy.stderr),
                fmt(energy.excursion),
                fmt(ratio),
                fmt(worst.slope),
                fmt(max(f.excursion for f in momentum)),
                fmt(traj.group_residual()[-1]),
                fmt(dlp),
            ]
        )
    buf = io.StringIO()
    buf.write(metadata(config, {} if methods == config.methods else {"compared_methods": ",".join(methods)}, timestamp))
    buf.write(",".join(COMPARE_COLUMNS) + "\n")
    for row in rows:
        buf.write(",".join(row) + "\n")
    if code != EXIT_OK:
        buf.write("# ABORTED\n")
    _emit(output or config.output, buf.getvalue())
    for row in rows:
        print(f"{row[0]}: energy slope {float(row[1]):.3e}, ratio {float(row[4]):.3g}")
    return code


def cmd_selftest(corrupt_bernoulli: bool = False, only=None) -> int:
    from .selftest import run_selftest

    try:
        return run_selftest(corrupt_bernoulli=corrupt_bernoulli, only=only)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


# -- entry point --------------------------------------------------------------


def _float_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lievprk", description="Lie-group variational integrators")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_config=True):
        p.add_argument("--config", required=needs_config, help="run configuration file")
        p.add_argument("--output", help="output CSV path ('-' for stdout); overrides the config")
        p.add_argument("--seed", type=int, help="replace the initial state by a random one")
        p.add_argument("--timestamp", action="store_true", help="add a timestamp to the metadata block")

    p = sub.add_parser("simulate", help="integrate one trajectory and write it as CSV")
    common(p)
    p.add_argument("--debug-stages", action="store_true", help="add per-stage columns (vprk methods)")
    p = sub.add_parser("converge", help="measure the convergence order")
    common(p)
    p.add_argument("--h-list", type=_float_list, help="comma-separated step sizes (at least 4)")
    p = sub.add_parser("poincare", help="write Poincare section points")
    common(p)
    p = sub.add_parser("compare", help="compare drift of several methods")
    common(p)
    p.add_argument("--methods", type=lambda s: [m for m in s.split(",") if m], help="comma-separated method ids")
    p = sub.add_parser("selftest", help="run the invariant self-test suite")
    p.add_argument("--only", type=lambda s: [g for g in s.split(",") if g], help="comma-separated check groups")
    p.add_argument("--corrupt-bernoulli", action="store_true", help=argparse.SUPPRESS)
    return parser


def _randomize(config, seed):
    rng = np.random.default_rng(seed)
    model = config.build_model()
    g = model.group.random_element(rng)
    xi = rng.standard_normal(model.group.dim)
    return runconfig.RunConfig(**{**config.__dict__, "initial_g": g.ravel().tolist(), "initial_xi": xi.tolist()})


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "selftest":
        return cmd_selftest(args.corrupt_bernoulli, args.only)
    try:
        config = runconfig.load(args.config)
        if args.seed is not None:
            config = _randomize(config, args.seed)
        if args.command == "simulate":
            return cmd_simulate(config, args.output, args.debug_stages, args.timestamp)
        if args.command == "converge":
            return cmd_converge(config, args.h_list, args.output, args.timestamp)
        if args.command == "poincare":
            return cmd_poincare(config, args.output, args.timestamp)
        return cmd_compare(config, args.methods, args.output, args.timestamp)
    except runconfig.ConfigError as exc:
        for message in exc.errors:
            print(f"config error: {message}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
