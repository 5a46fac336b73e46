"""Command-line runner for the extension experiments.

Each subcommand runs one experiment and emits a machine-readable report,
either as JSON mirroring the report structure or as long-format CSV rows.
The exit status encodes the outcome: 0 pass, 1 fail, 2 inconclusive, 3
bad configuration, 4 a declared runtime failure such as degenerate input
data or a non-finite sample.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from datetime import datetime, timezone

from . import __version__
from .experiments import (
    Params,
    ZeroSeminormError,
    chart_report,
    check_decomposition,
    check_lp_identity,
    compute_J,
    derivative_check,
    divergence_probe,
    kernel_bound_scan,
    operator_sweep,
    scaling_law,
)
from .functions import DerivativeDataError, make_test_function
from .geometry import cap_chart_build
from .norms import EstimatorConfig, NonFiniteSampleError

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_INCONCLUSIVE = 2
EXIT_CONFIG = 3
EXIT_RUNTIME = 4

_EPILOG = """\
exit status:
  0 every check passed        2 some check was inconclusive
  1 some check failed         3 bad flag, config file, or precondition
                              4 declared runtime failure (degenerate data,
                                non-finite sample, missing derivative data)

config file (--config FILE): one `key = value` per line, keys named after
the long flags without the leading dashes; `#` starts a comment.  Explicit
flags override file entries.  The RSL_SEED environment variable supplies
the seed when neither a flag nor the file does.
"""

# long option names each subcommand accepts from a config file
CONFIG_KEYS: dict[str, set] = {}


class _Parser(argparse.ArgumentParser):
    """Parser whose usage errors exit with the configuration status."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


class ConfigFileError(Exception):
    """A config file line that cannot be turned into flags."""


def _opt(sp, name, **kw):
    sp.add_argument(name, **kw)
    CONFIG_KEYS[sp.prog.split()[-1]].add(name[2:])


def _sub(subparsers, name, description):
    sp = subparsers.add_parser(name, help=description, description=description)
    CONFIG_KEYS[name] = set()
    return sp


def _common(sp):
    _opt(sp, "--seed", type=int, default=None,
         help="random seed (default: RSL_SEED env var, then 0)")
    _opt(sp, "--config", default=None, metavar="FILE",
         help="read key = value defaults from FILE; flags override")
    _opt(sp, "--output", default=None, metavar="PATH",
         help="write the report to PATH atomically instead of stdout")
    _opt(sp, "--format", choices=("json", "csv"), default="json",
         help="report format (default json)")


def _estimator(sp, samples=100_000, sampling="uniform-pair"):
    _opt(sp, "--samples", type=int, default=samples,
         help=f"Monte Carlo samples per estimate (default {samples})")
    _opt(sp, "--sampling", choices=("uniform-pair", "radial-importance"),
         default=sampling,
         help=f"pair sampling strategy for the double integrals "
              f"(default {sampling})")
    _opt(sp, "--threads", type=int, default=1,
         help="worker threads for the deterministic chunked reduction")


def _exponents(sp, s=True, a=True, s_note=""):
    _opt(sp, "--n", type=int, required=True, help="ambient dimension, at least 2")
    if s:
        _opt(sp, "--s", type=float, default=0.5,
             help="smoothness exponent" + s_note)
    _opt(sp, "--p", type=float, default=2.0, help="integrability exponent in [1, inf)")
    if a:
        _opt(sp, "--a", type=float, default=0.0, help="homogeneity weight")


def _boundary(kind, n):
    kind = kind.replace("-", "_")
    if kind in ("bump", "random_mix"):
        chart = cap_chart_build(n)
        if kind == "bump":
            return make_test_function("bump", n, chart=chart, support="cap"), chart
        return make_test_function("random_mix", n, chart=chart, seed=0), chart
    return make_test_function(kind, n), None


def _cfg(args, seed):
    return EstimatorConfig(samples=args.samples, mode=args.sampling,
                           seed=seed, threads=args.threads)


def _run_lp_identity(args, seed):
    params = Params(args.n, args.s, args.p, args.a)
    f, _ = _boundary(args.f, args.n)
    return check_lp_identity(params, f=f, cfg=_cfg(args, seed))


def _run_decomposition(args, seed):
    params = Params(args.n, args.s, args.p, args.a)
    f, _ = _boundary(args.f, args.n)
    return check_decomposition(params, f=f, cfg=_cfg(args, seed))


def _run_kernel_bound(args, seed):
    return kernel_bound_scan(Params(args.n, args.s, args.p), pairs=args.pairs,
                             seed=seed)


def _run_compute_j(args, seed):
    return compute_J(Params(args.n, args.s, args.p), cfg=_cfg(args, seed))


def _run_scaling_law(args, seed):
    if args.j < 1:
        raise ValueError("--j must be at least 1")
    params = Params(args.n, args.s, args.p, args.a)
    f, chart = _boundary(args.f, args.n)
    return scaling_law(params, f=f, j_list=tuple(range(args.j + 1)),
                       cfg=_cfg(args, seed), chart=chart, mode=args.mode)


def _run_divergence(args, seed):
    params = Params(args.n, args.s, args.p, args.a)
    f, chart = _boundary(args.f, args.n)
    return divergence_probe(params, f=f, j_max=args.jmax, cfg=_cfg(args, seed),
                            chart=chart)


def _run_operator_sweep(args, seed):
    params = Params(args.n, args.s, args.p, args.a)
    return operator_sweep(params, count=args.count, cfg=_cfg(args, seed),
                          geometry=args.geometry)


def _run_derivative_check(args, seed):
    params = Params(args.n, args.s, args.p, args.a)
    return derivative_check(params, max_order=args.max_order,
                            points=args.points, seed=seed)


def _run_solve_epsilon(args, seed):
    return chart_report(n=args.n, target_radius=args.target_radius,
                        probe=args.probe, seed=seed)


def build_parser():
    parser = _Parser(
        prog="radext",
        description="Numerical verification runner for homogeneous radial "
                    "extensions of fractional-smoothness boundary data.",
        epilog=_EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_Parser, metavar="EXPERIMENT")

    sp = _sub(sub, "verify-lp-identity",
              "Check the exact volume identity of the radial extension: the "
              "p-th power integral of |X|^a f(X/|X|) over the unit ball "
              "equals the boundary p-th power integral divided by n + a p.")
    _exponents(sp, s_note=" (recorded in the report; the identity itself "
                          "does not involve it)")
    _opt(sp, "--f", choices=("constant", "coordinate", "bump"),
         default="constant", help="boundary function (default constant)")
    _estimator(sp)
    _common(sp)
    sp.set_defaults(run=_run_lp_identity)

    sp = _sub(sub, "verify-decomposition",
              "Rewrite the smoothness seminorm of the extension as a double "
              "integral over boundary points and a radial factor, and verify "
              "its split into a near-origin block, a boundary-difference "
              "block, and a weight-defect block, each controlled by the "
              "boundary data.  Requires 0 < s < 1 and (s - a) p < n.")
    _exponents(sp)
    _opt(sp, "--f", choices=("coordinate", "bump", "constant", "cusp"),
         default="coordinate", help="boundary function (default coordinate)")
    _estimator(sp)
    _common(sp)
    sp.set_defaults(run=_run_decomposition)

    sp = _sub(sub, "kernel-bound",
              "Scan random sphere pairs and verify the radial line integral "
              "of |x - t y|^{-(n+sp)} over t in [1/2, 1] stays below the "
              "explicit constant times |x - y|^{-(n-1+sp)}, and below 1/2 "
              "when the pair subtends an obtuse angle.")
    _exponents(sp, a=False)
    _opt(sp, "--pairs", type=int, default=2000,
         help="number of scanned pairs (default 2000)")
    _common(sp)
    sp.set_defaults(run=_run_kernel_bound)

    sp = _sub(sub, "compute-j",
              "Estimate the base-point-independent double integral of "
              "(1 - t)^p |x - t y|^{-(n+sp)} over the sphere and t in "
              "[1/2, 1], and compare against direct quadrature, a doubled "
              "run, and a second base point.")
    _exponents(sp, a=False)
    _estimator(sp)
    _common(sp)
    sp.set_defaults(run=_run_compute_j)

    sp = _sub(sub, "scaling-law",
              "Verify the dyadic scaling of the leading seminorm block "
              "across shrinking annuli: shared random streams must "
              "reproduce the factor 2^{j[(s-a)p-n]} to near machine "
              "precision, and independent streams confirm it statistically.")
    _exponents(sp)
    _opt(sp, "--j", type=int, default=3,
         help="deepest annulus level (default 3)")
    _opt(sp, "--mode", choices=("exact", "independent", "both"),
         default="both", help="which legs to run (default both)")
    _opt(sp, "--f", choices=("bump", "random-mix", "coordinate", "constant"),
         default="bump", help="boundary function (default bump)")
    _estimator(sp, sampling="radial-importance")
    _common(sp)
    sp.set_defaults(run=_run_scaling_law)

    sp = _sub(sub, "divergence",
              "Decide whether the extension's seminorm diverges by measuring "
              "the geometric ratio of consecutive annulus contributions; the "
              "series diverges exactly when (s - a) p >= n, and the partial "
              "sums and limit are reported.")
    _exponents(sp)
    _opt(sp, "--jmax", type=int, default=40,
         help="deepest partial sum reported (default 40)")
    _opt(sp, "--f", choices=("bump", "random-mix", "coordinate", "constant"),
         default="bump", help="boundary function (default bump)")
    _estimator(sp, sampling="radial-importance")
    _common(sp)
    sp.set_defaults(run=_run_divergence)

    sp = _sub(sub, "operator-sweep",
              "Estimate the worst ratio of extension norm to boundary norm "
              "over random families of boundary functions, on the ball or "
              "on the cube via the sup-norm rescaling map, and check the "
              "maximum is stable as the family doubles.")
    _exponents(sp)
    _opt(sp, "--count", type=int, default=4,
         help="half the family size (default 4)")
    _opt(sp, "--geometry", choices=("ball", "cube"), default="ball",
         help="extension target (cube requires s < 1 and a = 0)")
    _estimator(sp, sampling="radial-importance")
    _common(sp)
    sp.set_defaults(run=_run_operator_sweep)

    sp = _sub(sub, "derivative-check",
              "Compare the closed-form derivative expansion of the "
              "homogeneous cone extension against Richardson-extrapolated "
              "central differences, verify second-order convergence of the "
              "raw differences, bitwise mixed-partial order independence, "
              "and the radial moment integral behind each derivative level.")
    _exponents(sp, s_note=" (recorded in the report; the moment bookkeeping "
                          "uses p and a)")
    _opt(sp, "--max-order", type=int, default=3,
         help="highest derivative order checked (default 3)")
    _opt(sp, "--points", type=int, default=100,
         help="cone evaluation points (default 100)")
    _common(sp)
    sp.set_defaults(run=_run_derivative_check)

    sp = _sub(sub, "solve-epsilon",
              "Solve for the cap aperture whose slope-chart image has a "
              "prescribed radius, and verify the residual and the lift / "
              "projection round trips of the chart.")
    _opt(sp, "--n", type=int, default=3, help="ambient dimension (default 3)")
    _opt(sp, "--target-radius", type=float, default=0.5,
         help="prescribed chart image radius (default 0.5)")
    _opt(sp, "--probe", type=int, default=10000,
         help="round-trip sample count (default 10000)")
    _common(sp)
    sp.set_defaults(run=_run_solve_epsilon)

    return parser


def _read_config(path, known):
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise ConfigFileError(f"{path}: {exc.strerror or exc}") from exc
    tokens = []
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, eq, value = line.partition("=")
        key = key.strip().replace("_", "-")
        value = value.strip()
        if not eq or not key:
            raise ConfigFileError(f"{path}:{lineno}: expected 'key = value'")
        if key == "config":
            raise ConfigFileError(f"{path}:{lineno}: config files do not nest")
        if key not in known:
            raise ConfigFileError(f"{path}:{lineno}: unknown key {key!r}")
        if not value:
            raise ConfigFileError(f"{path}:{lineno}: empty value for {key!r}")
        tokens += [f"--{key}", value]
    return tokens


def _find_config(argv):
    for i, tok in enumerate(argv):
        if tok == "--config":
            return argv[i + 1] if i + 1 < len(argv) else None
        if tok.startswith("--config="):
            return tok.split("=", 1)[1]
    return None


def _atomic_write(path, text):
    path = os.path.abspath(path)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path),
                               prefix=".radext-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def _emit(report, args, seed):
    if args.format == "json":
        payload = {
            "meta": {
                "seed": seed,
                "timestamp": datetime.now(timezone.utc).isoformat(),
                "version": __version__,
            },
            "report": report.as_dict(),
        }
        text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
    else:
        fields = ["experiment", "check", "value", "reference", "stderr",
                  "tolerance", "verdict"]
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
        writer.writeheader()
        for row in report.rows():
            writer.writerow({k: ("" if row[k] is None else row[k])
                             for k in fields})
        text = buf.getvalue()
    if args.output:
        _atomic_write(args.output, text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()

    # splice config-file entries in right after the subcommand, so explicit
    # flags, parsed later, override them
    if argv and argv[0] in CONFIG_KEYS:
        path = _find_config(argv)
        if path is not None:
            try:
                tokens = _read_config(path, CONFIG_KEYS[argv[0]])
            except ConfigFileError as exc:
                print(f"radext: {exc}", file=sys.stderr)
                return EXIT_CONFIG
            argv = [argv[0]] + tokens + argv[1:]

    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    seed = args.seed
    if seed is None:
        raw = os.environ.get("RSL_SEED", "0")
        try:
            seed = int(raw)
        except ValueError:
            print(f"radext: RSL_SEED must be an integer, got {raw!r}",
                  file=sys.stderr)
            return EXIT_CONFIG

    try:
        report = args.run(args, seed)
    except (ZeroSeminormError, NonFiniteSampleError, DerivativeDataError) as exc:
        print(f"radext: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except ValueError as exc:
        # precondition violations from the experiment modules are
        # configuration problems: nothing was computed or written
        print(f"radext: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    _emit(report, args, seed)
    return {"pass": EXIT_PASS, "fail": EXIT_FAIL,
            "inconclusive": EXIT_INCONCLUSIVE}[report.verdict]


if __name__ == "__main__":
    sys.exit(main())
