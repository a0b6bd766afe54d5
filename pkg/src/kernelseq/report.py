"""Cross-validation benchmark and the tab-separated report files.

Report layout: ``#``-prefixed header lines (``key=value``), then one
column-header line, then rows. The ``kind`` column says what a row is:

* ``layer`` - one per trained layer per fold;
* ``fold``  - the final layer of a fold plus its test accuracy;
* ``mean`` / ``std`` - aggregates over the fold rows.

Floats are written with ``repr`` so files round-trip exactly. Wall-clock
times go to a separate file so reports stay byte-identical across reruns.
"""
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from kernelseq import __version__
from kernelseq.data import kfold
from kernelseq.errors import InvalidArgumentError
from kernelseq.network import MetricsRecord, RunConfig, predict, train

REPORT_COLUMNS = ("kind", "fold", "layer", "hsic_norm", "scatter_ratio", "csr", "mse", "ce",
                  "train_accuracy", "test_accuracy", "sigma", "width", "improved", "converged")
AGGREGATED = ("layer", "hsic_norm", "scatter_ratio", "csr", "mse", "ce",
              "train_accuracy", "test_accuracy")
METRIC_COLUMNS = ("layer", "hsic_norm", "scatter_ratio", "csr", "mse", "ce",
                  "train_accuracy", "sigma", "width", "improved", "converged", "flags")


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return "" if v is None else str(v)


def _header_lines(header):
    return [f"# {k}={_fmt(v)}" for k, v in header.items()]


def write_metrics(history, path, header=None):
    """One row per layer: the per-layer training metrics."""
    lines = _header_lines(header or {})
    lines.append("\t".join(METRIC_COLUMNS))
    for r in history:
        lines.append("\t".join(_fmt(getattr(r, c)) for c in METRIC_COLUMNS))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_metrics(path):
    header, rows = _read_table(path)
    out = []
    for row in rows:
        out.append(MetricsRecord(
            layer=int(row["layer"]), hsic_norm=float(row["hsic_norm"]),
            scatter_ratio=float(row["scatter_ratio"]), csr=float(row["csr"]),
            mse=float(row["mse"]), ce=float(row["ce"]),
            train_accuracy=float(row["train_accuracy"]), sigma=float(row["sigma"]),
            width=int(row["width"]), improved=row["improved"] == "1",
            converged=row["converged"] == "1", flags=row.get("flags", ""),
        ))
    return header, out


def _read_table(path):
    header, rows, columns = {}, [], None
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                header[key] = value
            elif columns is None:
                columns = line.split("\t")
            else:
                cells = line.split("\t")
                cells += [""] * (len(columns) - len(cells))
                rows.append(dict(zip(columns, cells)))
    return header, rows


@dataclass
class FoldResult:
    fold: int
    history: list
    test_accuracy: float
    seconds: float


@dataclass
class BenchmarkReport:
    folds: list
    config: RunConfig
    k: int
    seed: int
    data: str = ""
    version: str = __version__
    aggregates: dict = field(default_factory=dict)

    def final_records(self):
        return [f.history[-1] for f in self.folds]

    def fold_values(self, name):
        if name == "test_accuracy":
            return np.array([f.test_accuracy for f in self.folds], dtype=np.float64)
        return np.array([float(getattr(f.history[-1], name)) for f in self.folds])

    def aggregate(self):
        """Mean and population standard deviation of each metric over folds."""
        self.aggregates = {}
        for name in AGGREGATED:
            v = self.fold_values(name)
            self.aggregates[name] = (float(np.mean(v)), float(np.std(v)))
        return self.aggregates

    def mean(self, name):
        return self.aggregates[name][0]

    def header(self):
        h = {"kernelseq": "benchmark", "version": self.version, "data": self.data,
             "folds": self.k, "seed": self.seed}
        for k, v in self.config.to_dict().items():
            h[f"config.{k}"] = v
        return h

    def rows(self):
        for f in self.folds:
            for r in f.history:
                yield self._row("layer", f.fold, r, math.nan)
        for f in self.folds:
            yield self._row("fold", f.fold, f.history[-1], f.test_accuracy)
        for i, kind in enumerate(("mean", "std")):
            row = {c: "" for c in REPORT_COLUMNS}
            row["kind"] = kind
            for name in AGGREGATED:
                row[name] = _fmt(self.aggregates[name][i])
            yield row

    @staticmethod
    def _row(kind, fold, r, test_accuracy):
        row = {c: _fmt(getattr(r, c, None)) for c in REPORT_COLUMNS}
        row.update(kind=kind, fold=str(fold), test_accuracy=_fmt(float(test_accuracy)))
        return row


def fold_seed(seed, fold):
    return int(np.random.SeedSequence([int(seed), 1000 + int(fold)]).generate_state(1)[0])


def run_benchmark(dataset, config=None, k=10, seed=0, callback=None):
    """Stratified k-fold training and evaluation.

    Standardization statistics come from each training split. With
    ``k=1`` the model is trained and scored on the full dataset and the
    test accuracy is left undefined (NaN).
    """
    config = config or RunConfig()
    split = kfold(dataset, k, seed)
    results = []
    for f in range(k):
        fold_config = replace(config, seed=fold_seed(config.seed, f))
        if k == 1:
            train_ds = test_ds = dataset
        else:
            train_ds, test_ds = dataset.split(split.train_indices(f), split.test_indices(f))
        t0 = time.perf_counter()
        net = train(train_ds, fold_config)
        seconds = time.perf_counter() - t0
        test_acc = math.nan
        if k > 1:
            test_acc = float(np.mean(predict(net, test_ds.X) == test_ds.labels))
        results.append(FoldResult(fold=f, history=net.history, test_accuracy=test_acc,
                                  seconds=seconds))
        if callback is not None:
            callback(results[-1])
    report = BenchmarkReport(folds=results, config=config, k=k, seed=seed,
                             data=getattr(dataset, "name", ""))
    report.aggregate()
    return report


def write_report(report, path, timing_path=None):
    lines = _header_lines(report.header())
    lines.append("\t".join(REPORT_COLUMNS))
    for row in report.rows():
        lines.append("\t".join(row[c] for c in REPORT_COLUMNS))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    if timing_path is not None:
        with open(timing_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("fold\tseconds\n")
            for f in report.folds:
                fh.write(f"{f.fold}\t{f.seconds:.3f}\n")


def read_report(path, tol=1e-12):
    """Parse a report file and check its aggregates against the fold rows."""
    header, rows = _read_table(path)
    folds = [r for r in rows if r["kind"] == "fold"]
    agg = {r["kind"]: r for r in rows if r["kind"] in ("mean", "std")}
    if not folds or set(agg) != {"mean", "std"}:
        raise InvalidArgumentError(f"{path}: missing fold or aggregate rows")
    for name in AGGREGATED:
        v = np.array([float(r[name]) for r in folds])
        for kind, value in (("mean", np.mean(v)), ("std", np.std(v))):
            stored = float(agg[kind][name])
            if not (np.isnan(stored) and np.isnan(value)) and abs(stored - value) > tol:
                raise InvalidArgumentError(
                    f"{path}: {kind} of {name} is {stored}, recomputed {value}")
    return header, rows
