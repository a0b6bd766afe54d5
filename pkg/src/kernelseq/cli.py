"""Command-line driver.

    kernelseq train         --config F (--data CSV | --generator G) --out DIR
    kernelseq benchmark     --config F (--data CSV | --generator G) --folds K --out DIR
    kernelseq simulate-thm1 [--generator G] --out DIR
    kernelseq dump-kernel   --network NET (--data CSV | --generator G) --layer L --out DIR
    kernelseq sigma-sweep   (--data CSV | --generator G) --out DIR

Exit codes: 0 success, 1 runtime or convergence failure, 2 usage or
config error.
"""
import argparse
import configparser
import dataclasses
import os
import sys

import numpy as np

from kernelseq import __version__
from kernelseq._backend import BACKEND
from kernelseq.data import GENERATORS, load_csv
from kernelseq.errors import InvalidArgumentError, KernelSeqError
from kernelseq.kernel_core import (
    PairSets, gamma_matrix, gaussian_kernel, median_distance,
)
from kernelseq.network import (
    RunConfig, centroid_projection, forward, kernel_block_means, load_network,
    save_network, separable_1d, standardize_input, train,
)
from kernelseq.report import run_benchmark, write_metrics, write_report
from kernelseq.sigma_search import (
    IsmObjective, default_bracket, optimize_sigma_hsic, optimize_sigma_separation,
    separation_objective,
)

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


# ---------------------------------------------------------------- inputs

def _coerce(value, like):
    if isinstance(like, bool):
        if value.lower() in ("1", "true", "yes", "on"):
            return True
        if value.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {value!r}")
    if isinstance(like, int):
        f = float(value)
        if f != int(f):
            raise ValueError(f"not an integer: {value!r}")
        return int(f)
    if isinstance(like, float):
        return float(value)
    return value


def parse_config_text(text, source="<config>"):
    """Flat ``key = value`` lines (``#`` comments) into a :class:`RunConfig`."""
    parser = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"),
                                       inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        parser.read_string("[run]\n" + text, source=source)
    except configparser.Error as exc:
        raise UsageError(f"{source}: {exc}") from None
    defaults = RunConfig()
    known = {f.name for f in dataclasses.fields(RunConfig)}
    values = {}
    for key, raw in parser.items("run"):
        if key not in known:
            raise UsageError(f"{source}: unknown config key '{key}'")
        try:
            values[key] = _coerce(raw.strip(), getattr(defaults, key))
        except ValueError as exc:
            raise UsageError(f"{source}: bad value for '{key}': {exc}") from None
    try:
        return RunConfig(**values)
    except InvalidArgumentError as exc:
        raise UsageError(f"{source}: {exc}") from None


def load_config(path, seed=None):
    if path is None:
        config = RunConfig()
    else:
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from None
        config = parse_config_text(text, path)
    if seed is not None:
        config = dataclasses.replace(config, seed=seed)
    return config


def parse_generator(spec):
    """``name`` or ``name:key=value,key=value``."""
    name, _, rest = spec.partition(":")
    if name not in GENERATORS:
        raise UsageError(f"unknown generator '{name}' (choose from {', '.join(GENERATORS)})")
    kwargs = {}
    for item in filter(None, rest.split(",")):
        key, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"generator argument '{item}' is not key=value")
        try:
            kwargs[key.strip()] = float(value) if "." in value or "e" in value else int(value)
        except ValueError:
            raise UsageError(f"generator argument '{item}' is not numeric") from None
    return name, kwargs


def load_dataset(args, seed=0):
    if (args.data is None) == (args.generator is None):
        raise UsageError("give exactly one of --data or --generator")
    if args.data is not None:
        return load_csv(args.data, getattr(args, "label_column", None))
    name, kwargs = parse_generator(args.generator)
    kwargs.setdefault("seed", seed)
    try:
        return GENERATORS[name](**kwargs)
    except TypeError as exc:
        raise UsageError(f"generator '{name}': {exc}") from None


def _out_dir(path):
    os.makedirs(path, exist_ok=True)
    return path


def _header(command, args, extra=None):
    h = {"kernelseq": command, "version": __version__,
         "seed": args.seed if args.seed is not None else 0}
    h.update(extra or {})
    return h


# ---------------------------------------------------------------- commands

def cmd_train(args):
    config = load_config(args.config, args.seed)
    ds = load_dataset(args, config.seed)
    out = _out_dir(args.out)
    net = train(ds, config)
    save_network(net, os.path.join(out, "network.json"))
    header = {"kernelseq": "train", "version": __version__, "data": ds.name}
    header.update({f"config.{k}": v for k, v in config.to_dict().items()})
    write_metrics(net.history, os.path.join(out, "metrics.tsv"), header)
    last = net.history[-1]
    print(f"layers={net.depth} hsic={last.hsic_norm:.4f} train_accuracy={last.train_accuracy:.4f}")
    return EXIT_OK


def cmd_benchmark(args):
    config = load_config(args.config, args.seed)
    ds = load_dataset(args, config.seed)
    out = _out_dir(args.out)

    def progress(fold):
        last = fold.history[-1]
        print(f"fold {fold.fold}: layers={len(fold.history)} hsic={last.hsic_norm:.4f} "
              f"train={last.train_accuracy:.4f} test={fold.test_accuracy:.4f}", file=sys.stderr)

    report = run_benchmark(ds, config, k=args.folds, seed=config.seed, callback=progress)
    write_report(report, os.path.join(out, "report.tsv"), os.path.join(out, "timing.tsv"))
    for name in ("train_accuracy", "test_accuracy", "hsic_norm"):
        m, s = report.aggregates[name]
        print(f"{name}={m:.4f}+-{s:.4f}")
    return EXIT_OK


def _simulate(ds, config):
    """Train and return (network, trace rows, ladder rows, projection rows, ok)."""
    net = train(ds, config)
    outs = forward(net, ds.X)
    trace, ladder, proj = [], [], []
    ok = True
    best = -np.inf
    for layer, record, (_, Phi) in zip(net.layers, net.history, outs):
        values = centroid_projection(Phi, ds.labels)
        sep = separable_1d(values, ds.labels)
        if record.improved and record.layer > 1 and not record.hsic_norm > best:
            ok = False
        best = max(best, record.hsic_norm)
        trace.append((record.layer, layer.sigma, record.hsic_norm, record.improved,
                      len(layer.trace), sep))
        for k, (s, h) in enumerate(layer.trace):
            ladder.append((record.layer, k, s, h))
        for i, v in enumerate(values):
            proj.append((record.layer, i, int(ds.labels[i]), float(v)))
    return net, trace, ladder, proj, ok


def cmd_simulate_thm1(args):
    base = load_config(args.config, args.seed)
    if args.config is None:
        base = dataclasses.replace(base, solver="ws", sigma_strategy="decay", feature_map="exact")
    names = [args.generator] if args.generator else ["adversarial", "random"]
    out = _out_dir(args.out)
    variants = [("decay", base),
                ("two_layer", dataclasses.replace(base, sigma_strategy="fixed",
                                                  fixed_sigma=args.two_layer_sigma, max_layers=2))]
    trace_rows, ladder_rows, proj_rows = [], [], []
    failed = []
    for spec in names:
        name, kwargs = parse_generator(spec)
        kwargs.setdefault("seed", base.seed)
        ds = GENERATORS[name](**kwargs)
        for variant, config in variants:
            net, trace, ladder, proj, ok = _simulate(ds, config)
            if not ok:
                failed.append(f"{name}/{variant}")
            trace_rows += [(name, variant) + r for r in trace]
            ladder_rows += [(name, variant) + r for r in ladder]
            proj_rows += [(name, variant) + r for r in proj]
            last = net.history[-1]
            print(f"{name} {variant}: layers={net.depth} hsic={last.hsic_norm:.4f} "
                  f"separable={trace[-1][-1]}")
    header = "\n".join(f"# {k}={v}" for k, v in _header("simulate-thm1", args).items())

    def dump(fname, columns, rows):
        with open(os.path.join(out, fname), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(header + "\n" + "\t".join(columns) + "\n")
            for r in rows:
                fh.write("\t".join(_cell(v) for v in r) + "\n")

    dump("trace.tsv", ("dataset", "variant", "layer", "sigma", "hsic_norm", "improved",
                       "ladder_steps", "separable"), trace_rows)
    dump("ladder.tsv", ("dataset", "variant", "layer", "step", "sigma", "hsic_norm"), ladder_rows)
    dump("projections.tsv", ("dataset", "variant", "layer", "sample", "label", "value"), proj_rows)
    if failed:
        print(f"improvement-flagged layer without strict HSIC increase: {', '.join(failed)}",
              file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def kernel_at_layer(net, X, layer):
    """Layer 0: Gaussian kernel of the input at its median distance.
    Layer l >= 1: the activation Gram matrix of layer l."""
    if layer == 0:
        m = median_distance(X)
        return gaussian_kernel(X, m if m > 0 else 1.0)
    if not 1 <= layer <= net.depth:
        raise UsageError(f"--layer must be in [0, {net.depth}], got {layer}")
    Phi = forward(net, X)[layer - 1][1]
    return Phi @ Phi.T


def write_pgm(path, K):
    """8-bit binary PGM; kernel value 1 is black, 0 is white."""
    img = np.round(255.0 * (1.0 - np.clip(K, 0.0, 1.0))).astype(np.uint8)
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(img.tobytes())


def read_pgm(path):
    with open(path, "rb") as fh:
        data = fh.read()
    parts = data.split(maxsplit=4)
    if parts[0] != b"P5":
        raise InvalidArgumentError("not a binary PGM")
    w, h = int(parts[1]), int(parts[2])
    return np.frombuffer(parts[4][: w * h], dtype=np.uint8).reshape(h, w)


def cmd_dump_kernel(args):
    try:
        net = load_network(args.network)
    except OSError as exc:
        raise UsageError(f"cannot read network: {exc}") from None
    ds = load_dataset(args, args.seed or 0)
    X = standardize_input(net, ds.raw)
    order = np.argsort(ds.labels, kind="stable")
    K = kernel_at_layer(net, X[order], args.layer)
    out = _out_dir(args.out)
    stem = os.path.join(out, f"kernel_layer{args.layer}")
    with open(stem + ".csv", "w", encoding="utf-8", newline="\n") as fh:
        for row in K:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
    write_pgm(stem + ".pgm", K)
    within, between = kernel_block_means(K, ds.labels[order])
    print(f"n={K.shape[0]} within={within:.4f} between={between:.4f}")
    return EXIT_OK


def peak_shape(values, tol=1e-9):
    """True when discrete differences go up, then down, changing sign once."""
    d = np.diff(np.asarray(values, dtype=np.float64))
    scale = max(float(np.abs(values).max()), 1e-300)
    signs = np.sign(d[np.abs(d) > tol * scale])
    if signs.size == 0:
        return False
    changes = np.count_nonzero(signs[1:] != signs[:-1])
    return bool(changes == 1 and signs[0] > 0 and signs[-1] < 0)


def sigma_sweep(ds, grid_points=256):
    """Both bandwidth objectives on a dense log grid plus the optimizer picks."""
    X = ds.X
    pairs = PairSets(ds.labels)
    gamma = gamma_matrix(ds.Y)
    lo, hi = default_bracket(X)
    grid = np.geomspace(lo, hi, grid_points)
    ism = IsmObjective(X, gamma)
    sep = np.array([separation_objective(X, pairs, s) for s in grid])
    hs = np.array([ism(s) for s in grid])
    sep_opt = optimize_sigma_separation(X, pairs)
    hs_opt = optimize_sigma_hsic(X, gamma)
    summary = {
        "separation_opt_sigma": sep_opt.sigma, "separation_opt_value": sep_opt.objective,
        "separation_grid_max": float(sep.max()), "separation_peak_shape": peak_shape(sep),
        "hsic_opt_sigma": hs_opt.sigma, "hsic_opt_value": hs_opt.objective,
        "hsic_grid_max": float(hs.max()), "hsic_peak_shape": peak_shape(hs),
    }
    return grid, sep, hs, summary


def cmd_sigma_sweep(args):
    ds = load_dataset(args, args.seed or 0)
    out = _out_dir(args.out)
    grid, sep, hs, summary = sigma_sweep(ds, args.grid)
    with open(os.path.join(out, "sigma_sweep.tsv"), "w", encoding="utf-8", newline="\n") as fh:
        for k, v in {**_header("sigma-sweep", args, {"data": ds.name}), **summary}.items():
            fh.write(f"# {k}={_cell(v)}\n")
        fh.write("sigma\tseparation\thsic_norm\n")
        for row in zip(grid, sep, hs):
            fh.write("\t".join(repr(float(v)) for v in row) + "\n")
    print(f"separation: sigma={summary['separation_opt_sigma']:.4g} "
          f"value={summary['separation_opt_value']:.4f}")
    print(f"hsic: sigma={summary['hsic_opt_sigma']:.4g} value={summary['hsic_opt_value']:.4f}")
    return EXIT_OK


# ---------------------------------------------------------------- entry point

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser():
    p = _Parser(prog="kernelseq", description="Greedy layer-wise kernel networks.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__} ({BACKEND})")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def data_args(sp):
        sp.add_argument("--data", help="CSV file (label in the last column by default)")
        sp.add_argument("--label-column", help="label column name or index")
        sp.add_argument("--generator", help="synthetic data: name[:key=value,...]")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--out", required=True, help="output directory")

    sp = sub.add_parser("train", help="train one network")
    sp.add_argument("--config")
    data_args(sp)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("benchmark", help="stratified k-fold cross-validation")
    sp.add_argument("--config")
    sp.add_argument("--folds", type=int, default=10)
    data_args(sp)
    sp.set_defaults(func=cmd_benchmark)

    sp = sub.add_parser("simulate-thm1", help="decreasing-bandwidth kernel-mean-embedding runs")
    sp.add_argument("--config")
    sp.add_argument("--generator", help="one dataset (default: adversarial and random)")
    sp.add_argument("--two-layer-sigma", type=float, default=1e-5)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_simulate_thm1)

    sp = sub.add_parser("dump-kernel", help="kernel matrix of one layer as CSV and PGM")
    sp.add_argument("--network", required=True)
    sp.add_argument("--layer", type=int, required=True)
    data_args(sp)
    sp.set_defaults(func=cmd_dump_kernel)

    sp = sub.add_parser("sigma-sweep", help="bandwidth objectives on a dense grid")
    sp.add_argument("--grid", type=int, default=256)
    data_args(sp)
    sp.set_defaults(func=cmd_sigma_sweep)
    return p


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        if args.command is None:
            raise UsageError("missing command")
        return args.func(args)
    except UsageError as exc:
        print(f"kernelseq: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InvalidArgumentError as exc:
        print(f"kernelseq: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (KernelSeqError, OSError, ArithmeticError) as exc:
        print(f"kernelseq: runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
