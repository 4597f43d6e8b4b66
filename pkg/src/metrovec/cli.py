"""Command-line entry point: ``metrovec {generate,run,bench,validate,exp-scan}``.

Every subcommand accepts ``--config FILE``, a flat ``key = value`` file whose
keys are flag names (dashes or underscores); flags given on the command line
override the file.  Exit status: 0 success, 1 validation failure, 2
configuration error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time

import numpy as np

EXIT_OK, EXIT_FAILED, EXIT_CONFIG = 0, 1, 2
ENGINE_NAMES = ("reference", "basic", "vector4", "coalesced")
EXP_NAMES = ("exact", "fast", "accurate")


class ConfigError(Exception):
    pass


# ------------------------------------------------------------------ parsing

def _int_list(text):
    try:
        return tuple(int(t) for t in str(text).replace(" ", "").split(",") if t)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text):
    try:
        return tuple(float(t) for t in str(text).replace(" ", "").split(",") if t)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _str_list(text):
    return tuple(t for t in str(text).replace(" ", "").split(",") if t)


def _degree(text):
    parts = _int_list(str(text).replace("-", ","))
    if len(parts) == 1:
        return (parts[0], parts[0])
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"space degree must be N or LO,HI, got {text!r}")
    return parts


def _exp_map(text):
    out = {}
    for item in _str_list(text):
        if "=" not in item:
            raise argparse.ArgumentTypeError(f"expected engine=kind pairs, got {item!r}")
        k, v = item.split("=", 1)
        if v not in EXP_NAMES:
            raise argparse.ArgumentTypeError(f"unknown exp kind {v!r}")
        out[k] = v
    return out


def _add_generator_flags(p, required=False):
    p.add_argument("--layers", type=int, default=256, help="number of layers L")
    p.add_argument("--per-layer", type=int, default=96, help="positions per layer P")
    p.add_argument("--space-degree", type=_degree, default=(4, 6), help="space degree N or range LO,HI")
    p.add_argument("--distribution", choices=("uniform", "pm1"), default="uniform")
    p.add_argument("--model-seed", type=int, default=0, help="seed of the generated model")
    p.add_argument("--j-tau", type=float, default=1.0)
    p.add_argument("--allow-degenerate", action="store_true", help="permit space degrees below 4")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="metrovec", description="Sparse Ising Metropolis engines and benchmarks.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--config", help="key = value file of defaults for this command")
        return p

    g = add("generate", "write a random layered model file")
    _add_generator_flags(g)
    g.add_argument("--seed", type=int, default=None, help="alias for --model-seed")
    g.add_argument("--out", default="-", help="output path ('-' for stdout)")

    r = add("run", "run one engine on a model file and report the final state")
    r.add_argument("--model", required=True, help="model file")
    r.add_argument("--engine", choices=ENGINE_NAMES, default="basic")
    r.add_argument("--sweeps", type=int, default=1000)
    r.add_argument("--beta", type=float, default=1.0)
    r.add_argument("--tau-scale", type=float, default=1.0)
    r.add_argument("--exp", choices=EXP_NAMES, default=None, help="exponential (default: the engine's)")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--workers", type=int, default=1, help="coalesced engine worker threads")
    r.add_argument("--lane-updates", choices=("grouped", "per-lane"), default="grouped",
                   help="vector4 neighbour updates")
    r.add_argument("--stats-widths", type=_int_list, default=(1, 4, 32))
    r.add_argument("--out", default="-", help="JSON report path ('-' for stdout)")

    b = add("bench", "time engines over a beta ladder")
    b.add_argument("--model", default=None, help="model file (default: generate from the flags below)")
    _add_generator_flags(b)
    b.add_argument("--engines", type=_str_list, default=("reference", "basic", "vector4"))
    b.add_argument("--sweeps", type=int, default=1000)
    b.add_argument("--reps", type=int, default=10)
    b.add_argument("--betas", type=_float_list, default=(0.25, 0.5, 1.0, 2.0))
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--exp", type=_exp_map, default={}, help="per-engine kinds, e.g. basic=exact,vector4=fast")
    b.add_argument("--stats-widths", type=_int_list, default=(1, 4, 32))
    b.add_argument("--workers", type=int, default=None, help="concurrent chains (default: one per CPU)")
    b.add_argument("--single", action="store_true", help="pin everything to one worker")
    b.add_argument("--coalesced-workers", type=int, default=1)
    b.add_argument("--tau-scale", type=float, default=1.0)
    b.add_argument("--format", choices=("csv", "json"), default="csv")
    b.add_argument("--out", default="-")
    b.add_argument("--quiet", action="store_true", help="no progress on stderr")

    v = add("validate", "run the self-check suites")
    v.add_argument("--suite", choices=("rng", "exp", "trajectory", "boltzmann", "all"), default="all")
    v.add_argument("--scale", type=float, default=1.0, help="workload multiplier (1.0 = full size)")
    v.add_argument("--out", default=None, help="JSON detail report path")
    v.add_argument("--quiet", action="store_true")

    e = add("exp-scan", "relative error of an exponential approximation over a range")
    e.add_argument("--variant", choices=("fast", "accurate"), default="fast")
    e.add_argument("--lo", type=float, default=None)
    e.add_argument("--hi", type=float, default=None)
    e.add_argument("--samples", type=int, default=10001)
    e.add_argument("--out", default="-")
    return parser


def read_config(path) -> dict[str, str]:
    """Parse a flat ``key = value`` file; ``#`` starts a comment."""
    values = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    for no, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{no}: expected 'key = value'")
        key, value = (t.strip() for t in line.split("=", 1))
        if not key:
            raise ConfigError(f"{path}:{no}: empty key")
        values[key.replace("_", "-")] = value
    return values


def _config_argv(subparser, values, path) -> list[str]:
    by_flag = {}
    for action in subparser._actions:
        for opt in action.option_strings:
            if opt.startswith("--"):
                by_flag[opt[2:]] = action
    argv = []
    for key, value in values.items():
        action = by_flag.get(key)
        if action is None or key == "config":
            raise ConfigError(f"{path}: unknown key {key!r}")
        if isinstance(action, argparse._StoreTrueAction):
            flag = value.lower()
            if flag in ("1", "true", "yes", "on"):
                argv.append(f"--{key}")
            elif flag not in ("0", "false", "no", "off"):
                raise ConfigError(f"{path}: {key} expects true or false, got {value!r}")
        else:
            argv.append(f"--{key}={value}")
    return argv


def parse_args(argv=None) -> argparse.Namespace:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    choices = parser._subparsers._group_actions[0].choices
    # a bare pre-parse: the full parser would reject flags the file supplies
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    command = next((a for a in argv if a in choices), None)
    if known.config and command is not None:
        extra = _config_argv(choices[command], read_config(known.config), known.config)
        i = argv.index(command) + 1
        # file values first so that command-line flags win
        argv = argv[:i] + extra + argv[i:]
    return parser.parse_args(argv)


# ------------------------------------------------------------------ helpers

def _open_out(path):
    if path in (None, "-"):
        return sys.stdout, False
    try:
        return open(path, "w", encoding="utf-8", newline=""), True
    except OSError as exc:
        raise ConfigError(f"cannot write {path}: {exc.strerror}") from None


def _emit(path, text):
    fh, close = _open_out(path)
    try:
        fh.write(text)
    finally:
        if close:
            fh.close()


def _generator(args):
    from .bench import GeneratorSpec

    seed = args.model_seed
    if getattr(args, "seed", None) is not None and args.command == "generate":
        seed = args.seed
    return GeneratorSpec(args.layers, args.per_layer, tuple(args.space_degree), args.distribution,
                         seed, args.j_tau, args.allow_degenerate)


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o).__name__)


# ---------------------------------------------------------------- commands

def cmd_generate(args):
    from .modelio import dumps

    _emit(args.out, dumps(_generator(args).build()))
    return EXIT_OK


def run_report(model, engine_name, sweeps, params, seed, workers=1, widths=(1, 4, 32), grouped=True) -> dict:
    """Run one engine from seeded random spins; the report is in canonical spin order."""
    from .model import prepare_for_engine, total_cost
    from .sweep import collect_wait_stats, field_ulp_error, make_engine

    options = {}
    if engine_name == "coalesced":
        options["workers"] = workers
    elif engine_name == "vector4":
        options["lane_parallel_updates"] = grouped
    prepared = prepare_for_engine(model, engine_name)
    engine = make_engine(engine_name, prepared, **options)
    origin = prepared.layered.origin if prepared.layered is not None else np.arange(model.n_spins)
    initial = np.random.default_rng(seed).choice(np.array([-1, 1], np.int8), model.n_spins)
    state = engine.new_state(initial[origin], params, seed=seed, widths=widths)
    t0 = time.perf_counter()
    engine.run(state, sweeps)
    seconds = time.perf_counter() - t0
    canon = np.empty_like(state.spins)
    canon[origin] = state.spins
    import hashlib

    return {
        "engine": engine_name,
        "spins": model.n_spins,
        "sweeps": sweeps,
        "beta": params.beta,
        "tau_scale": params.tau_scale,
        "exp": params.resolved(engine.default_exp).exp_kind,
        "seed": seed,
        "final_cost": total_cost(model, canon),
        "flip_rate": state.stats.flip_rate,
        "wait": {str(w): p for w, p in collect_wait_stats(state.stats, state.stats.widths).items()},
        "field_ulp_error": field_ulp_error(prepared, state),
        "checksum": hashlib.sha256(canon.tobytes()).hexdigest()[:16],
        "seconds": seconds,
    }


def cmd_run(args):
    from .modelio import load_model
    from .sweep import SweepParams

    model = load_model(args.model)
    params = SweepParams(args.beta, args.tau_scale, args.exp)
    report = run_report(model, args.engine, args.sweeps, params, args.seed, args.workers,
                        args.stats_widths, args.lane_updates == "grouped")
    _emit(args.out, json.dumps(report, indent=2, default=_json_default) + "\n")
    return EXIT_OK


def cmd_bench(args):
    from .bench import BenchConfig, run_benchmark, write_report

    source = args.model if args.model else _generator(args)
    workers = 1 if args.single else args.workers
    config = BenchConfig(source, tuple(args.engines), args.sweeps, args.reps, tuple(args.betas), args.seed,
                         dict(args.exp), tuple(args.stats_widths), workers, args.coalesced_workers,
                         args.tau_scale)
    progress = None
    if not args.quiet:
        def progress(rep, engine, seconds):
            print(f"rep {rep + 1}/{args.reps} {engine:10s} {seconds:.4f}s", file=sys.stderr)
    report = run_benchmark(config, progress)
    if args.out in (None, "-"):
        write_report(report, args.format, sys.stdout)
    else:
        write_report(report, args.format, args.out)
    return EXIT_OK


def cmd_validate(args):
    from .validation import SUITES, run_suites

    names = SUITES if args.suite == "all" else (args.suite,)
    progress = None
    if not args.quiet:
        def progress(c):
            print(f"{'PASS' if c.passed else 'FAIL'}  {c.suite:10s} {c.name}  ({c.seconds:.2f}s)", file=sys.stderr)
    checks = run_suites(names, args.scale, progress)
    ok = all(c.passed for c in checks)
    if args.out:
        doc = {"passed": ok, "suites": list(names), "scale": args.scale, "checks": [c.to_dict() for c in checks]}
        _emit(args.out, json.dumps(doc, indent=2, default=_json_default) + "\n")
    return EXIT_OK if ok else EXIT_FAILED


def cmd_exp_scan(args):
    from . import fastexp

    _, vlo, vhi = fastexp.VARIANTS[args.variant]
    default = {"fast": (-80.0, 80.0), "accurate": (-21.8, 22.1)}[args.variant]
    lo = default[0] if args.lo is None else args.lo
    hi = default[1] if args.hi is None else args.hi
    fastexp.check_domain(args.variant, lo, hi, args.samples)
    x = fastexp.scan_points(lo, hi, args.samples) if args.samples > 1 else np.array([lo], np.float32)
    err = fastexp.relative_errors(args.variant, x)
    fh, close = _open_out(args.out)
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "relative_error"])
        for xi, ei in zip(x.tolist(), err.tolist()):
            w.writerow([repr(xi), repr(ei)])
        fh.write(f"# summary variant={args.variant} lo={lo!r} hi={hi!r} samples={x.size} "
                 f"min={float(err.min())!r} max={float(err.max())!r} mean={math.fsum(err) / x.size!r}\n")
    finally:
        if close:
            fh.close()
    return EXIT_OK


COMMANDS = {"generate": cmd_generate, "run": cmd_run, "bench": cmd_bench, "validate": cmd_validate,
            "exp-scan": cmd_exp_scan}


def main(argv=None) -> int:
    from .bench import BenchError
    from .model import ModelError

    try:
        args = parse_args(argv)
    except ConfigError as exc:
        print(f"metrovec: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SystemExit as exc:
        # argparse exits 2 on bad flags and 0 on --help
        return EXIT_OK if exc.code in (0, None) else EXIT_CONFIG
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, ModelError, BenchError, ValueError, OSError) as exc:
        print(f"metrovec {args.command}: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
