"""Command-line entry point: ``aliasnet <subcommand> [flags]``.

Every subcommand writes its artifacts under ``--out`` together with a
``manifest.json`` listing versions, seed, flags and artifact checksums.
Errors go to stderr as ``{"error": ..., "context": {...}}``; usage problems
exit with 2, numeric failures with 1.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import platform
import sys
from pathlib import Path

import numpy as np
import scipy

from . import __version__, bench, io, plot
from .activations import KINDS as ACTIVATIONS
from .activations import decay_exponent, spectral_leakage
from .filters import binomial_kernel, psd_sweep
from .graphlint import BLUR_SIZES, POLICIES, VARIANTS, GraphError, RewriteError, lint, parameter_count, resolve_graph, rewrite
from .micronn import checkpoint
from .micronn.data import KINDS as DATASETS
from .micronn.data import make_dataset, train_test_split
from .micronn.model import Model, micro_resnet
from .micronn.train import TrainConfig, TrainingDiverged, accuracy, train
from .spectral import aliasing_energy, dft1d, fold_spectrum, subsample

log = logging.getLogger("aliasnet")


class UsageError(Exception):
    def __init__(self, message: str, **context):
        super().__init__(message)
        self.context = context


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message, prog=self.prog)


def _odd_k(text: str) -> int:
    try:
        k = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if k < 3 or k % 2 == 0:
        raise argparse.ArgumentTypeError(f"binomial size must be odd and >= 3, got {k}")
    return k


def _positive(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _existing(text: str) -> Path:
    p = Path(text)
    if not p.exists() and not p.with_suffix(".json").exists():
        raise UsageError(f"no such file: {text}", path=text)
    return p


# ----------------------------------------------------------------------------- artifacts


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _dump(path: Path, obj) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    return path


def _flags(args) -> dict:
    skip = {"func", "out", "verbose"}
    return {k: (str(v) if isinstance(v, Path) else v) for k, v in sorted(vars(args).items()) if k not in skip}


def write_manifest(out: Path, args, seed: int | None = None) -> Path:
    """Record versions, seed, flags and a checksum of every file under ``out``.

    The output directory itself is not recorded, so identical runs into
    different directories produce identical manifests.
    """
    files = sorted(p for p in out.rglob("*") if p.is_file() and p.name != "manifest.json")
    manifest = {
        "tool": "aliasnet",
        "version": __version__,
        "command": args.command,
        "seed": seed,
        "flags": _flags(args),
        "versions": {"python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__},
        "artifacts": {p.relative_to(out).as_posix(): _sha256(p) for p in files},
    }
    return _dump(out / "manifest.json", manifest)


def _print(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True))


# ----------------------------------------------------------------------------- analysis commands


def cmd_filter_psd(args) -> int:
    out = args.out
    rows = psd_sweep(args.k, args.samples, args.stride)
    io.write_csv(out / "psd.csv", ["series", "w", "magnitude"], rows)
    series: dict[str, tuple[list, list]] = {}
    for name, w, m in rows:
        series.setdefault(name, ([], []))
        series[name][0].append(w)
        series[name][1].append(m)
    plot.line_chart(series, out / "psd.svg", "binomial filter response", "w (rad/sample)", "|H(w)| / H(0)")
    for k in args.k:
        io.write_kernel(out / f"kernel_k{k}.csv", binomial_kernel(k))
    write_manifest(out, args)
    _print({name: {"w=pi": ys[-1]} for name, (_, ys) in series.items()})
    return 0


def cmd_alias_demo(args) -> int:
    out = args.out
    n = args.n
    if n % args.stride:
        raise UsageError("--n must be divisible by --stride", n=n, stride=args.stride)
    t = np.arange(n)
    if args.signal == "sine":
        x = np.cos(2 * np.pi * args.freq * t)
    else:
        x = np.random.default_rng(args.seed).normal(size=n)
    spec = dft1d(x)
    folded = fold_spectrum(spec, args.stride)
    actual = dft1d(subsample(x, args.stride))
    io.write_spectrum(out / "original.csv", spec)
    io.write_spectrum(out / "folded.csv", folded)
    io.write_spectrum(out / "subsampled.csv", actual)
    summary = {
        "aliasing_energy": aliasing_energy(x, args.stride),
        "fold_identity_max_abs_err": float(np.max(np.abs(folded - actual))),
    }
    if args.prefilter_k:
        summary["aliasing_energy_prefiltered"] = aliasing_energy(x, args.stride, binomial_kernel(args.prefilter_k))
    _dump(out / "summary.json", summary)
    bins = np.arange(n // 2 + 1)
    m = len(actual) // 2 + 1
    plot.line_chart(
        {"original": (list(bins / n), list(np.abs(spec[: n // 2 + 1]))),
         "subsampled": (list(np.arange(m) / n), list(np.abs(actual[:m])))},
        out / "spectra.svg", "spectrum before and after subsampling", "cycles/sample (input rate)", "|X|",
    )
    write_manifest(out, args, args.seed)
    _print(summary)
    return 0


def cmd_activation_spectra(args) -> int:
    out = args.out
    freq = args.cycles / args.n
    profiles = {a: spectral_leakage(a, freq, args.n, args.amplitude, args.offset, args.harmonics) for a in ACTIVATIONS}
    rows = [r for p in profiles.values() for r in p.rows()]
    io.write_csv(out / "harmonics.csv", ["activation", "harmonic", "power"], rows)
    summary = {}
    for a, p in profiles.items():
        entry = {"tail_power_m4": p.tail_power(4)}
        try:
            entry["decay_exponent"] = decay_exponent(p, (3, min(8, args.harmonics)))
        except ValueError:
            entry["decay_exponent"] = None
        summary[a] = entry
    _dump(out / "summary.json", summary)
    plot.line_chart(
        {a: (list(p.harmonics[1:].astype(float)), list(np.log10(np.maximum(p.power[1:], 1e-300)))) for a, p in profiles.items()},
        out / "harmonics.svg", "activated sinusoid", "harmonic", "log10 power",
    )
    write_manifest(out, args)
    _print(summary)
    return 0


# ----------------------------------------------------------------------------- graph commands


def cmd_lint(args) -> int:
    g = resolve_graph(args.graph)
    report = lint(g).to_dict()
    report["parameter_count"] = parameter_count(g)
    if args.out:
        _dump(args.out / "lint.json", report)
        write_manifest(args.out, args)
    _print(report)
    return 0


def cmd_rewrite(args) -> int:
    g = resolve_graph(args.graph)
    new = rewrite(g, args.variant, args.k, args.policy, args.strided_lead)
    after = lint(new)
    summary = {
        "inserted": sorted(set(new.nodes) - set(g.nodes)),
        "parameter_count_before": parameter_count(g),
        "parameter_count_after": parameter_count(new),
        "violations_after": after.violations,
    }
    out = args.out
    (out / "graph.json").parent.mkdir(parents=True, exist_ok=True)
    (out / "graph.json").write_text(new.to_json() + "\n")
    _dump(out / "lint_after.json", after.to_dict())
    write_manifest(out, args)
    _print(summary)
    return 0


# ----------------------------------------------------------------------------- training and evaluation


def _base_graph(name: str):
    return micro_resnet() if name == "micro_resnet" else resolve_graph(name)


def _variant_graph(base, variant: str, k: int, policy: str):
    return base if variant == "baseline" else rewrite(base, variant, k, policy)


def cmd_train(args) -> int:
    out = args.out
    graph = _variant_graph(_base_graph(args.graph), args.variant, args.k, args.policy)
    tr, te = train_test_split(args.dataset, args.n_train, args.n_test, seed=args.seed)
    if args.cache_data:
        io.write_dataset(out / "data" / "train", tr)
        io.write_dataset(out / "data" / "test", te)
    cfg = TrainConfig(epochs=args.epochs, batch_size=args.batch_size, learning_rate=args.lr, seed=args.seed)
    model, hist = train(graph, cfg, tr)
    summary = {
        "train_accuracy": hist.train_accuracy[-1],
        "test_accuracy": accuracy(model, te),
        "parameter_count": model.parameter_count(),
    }
    meta = {"variant": args.variant, "k": args.k, "policy": args.policy, "dataset": args.dataset,
            "n_train": args.n_train, "n_test": args.n_test, "config": cfg.to_dict(), **summary}
    checkpoint.save(model, out / "model", meta)
    io.write_csv(out / "history.csv", ["epoch", "loss", "train_accuracy"],
                 ((i, l, a) for i, (l, a) in enumerate(zip(hist.loss, hist.train_accuracy))))
    _dump(out / "summary.json", summary)
    write_manifest(out, args, args.seed)
    _print(summary)
    return 0


def _load_model(path) -> Model:
    model, _ = checkpoint.load(path)
    return model


def _suites(name: str) -> tuple[str, ...]:
    return bench.SUITES if name == "all" else (name,)


def _write_report(out: Path, report: bench.EvalReport) -> None:
    _dump(out / "report.json", report.to_dict())
    if report.per_band_accuracy:
        delta = report.per_band_delta or [None] * len(report.per_band_accuracy)
        io.write_csv(out / "bands.csv", ["band", "accuracy", "delta"],
                     ((b, a, "" if d is None else d) for b, (a, d) in enumerate(zip(report.per_band_accuracy, delta))))
        bands = list(range(len(report.per_band_accuracy)))
        plot.line_chart({"accuracy": (bands, report.per_band_accuracy)}, out / "bands.svg",
                        "accuracy with one band removed", "band", "accuracy")
    if report.corruption_errors:
        io.write_csv(out / "corruption.csv", ["corruption", "severity", "error"],
                     ((k, s + 1, e) for k, errs in report.corruption_errors.items() for s, e in enumerate(errs)))
        plot.line_chart({k: (list(range(1, 6)), v) for k, v in report.corruption_errors.items()}, out / "corruption.svg",
                        "error against severity", "severity", "top-1 error")


def cmd_eval(args) -> int:
    out = args.out
    model = _load_model(args.model)
    data = make_dataset(args.dataset, args.n_test, seed=args.seed + 10_000)
    reference = _load_model(args.reference) if args.reference else bench.load_reference()
    baseline = _load_model(args.baseline) if args.baseline else None
    report = bench.evaluate(model, data, _suites(args.suite), reference=reference, baseline=baseline,
                            n_bands=args.bands, seed=args.seed, max_shift=args.max_shift)
    _write_report(out, report)
    write_manifest(out, args, args.seed)
    _print({k: v for k, v in report.to_dict().items() if k in ("clean_accuracy", "mce", "shift_consistency")})
    return 0


def run_pipeline(seed: int, variants, policies, k: int, epochs: int, n_train: int, n_test: int, lr: float,
                 bands: int, dataset: str, out: Path) -> list[dict]:
    """Train the baseline and every (policy, variant) rewrite; evaluate all suites against the baseline."""
    tr, te = train_test_split(dataset, n_train, n_test, seed=seed)
    cfg = TrainConfig(epochs=epochs, learning_rate=lr, seed=seed)
    base_graph = micro_resnet()

    def fit_and_eval(name, graph, reference, baseline_bands):
        model, hist = train(graph, cfg, tr)
        report = bench.evaluate(model, te, reference=reference, baseline=baseline_bands, n_bands=bands, seed=seed)
        checkpoint.save(model, out / "runs" / name / "model", {"config": cfg.to_dict()})
        _write_report(out / "runs" / name, report)
        log.info("%s: test accuracy %.4f", name, report.clean_accuracy)
        return model, report, hist

    base_model, base_report, base_hist = fit_and_eval("baseline", base_graph, None, None)
    ref_errors = base_report.corruption_errors
    base_report.per_corruption_ce = {c: bench.corruption_error(e, e) for c, e in ref_errors.items()}
    base_report.mce = bench.mce(base_report.per_corruption_ce)
    _write_report(out / "runs" / "baseline", base_report)

    def row(policy, variant, report, hist):
        delta = report.per_band_delta
        return {
            "policy": policy, "variant": variant,
            "train_accuracy": hist.train_accuracy[-1] if hist else None,
            "test_accuracy": report.clean_accuracy if report else None,
            "mce": report.mce if report else None,
            "shift_consistency": report.shift_consistency if report else None,
            "bands_nonnegative": sum(d >= 0 for d in delta) if report and delta is not None else None,
        }

    rows = [row("none", "baseline", base_report, base_hist)]
    for policy in policies:
        for variant in variants:
            try:
                graph = rewrite(base_graph, variant, k, policy)
            except RewriteError as exc:
                log.warning("%s/%s skipped: %s", policy, variant, exc)
                rows.append(row(policy, variant, None, None))
                continue
            _, report, hist = fit_and_eval(f"{policy}_{variant}", graph, ref_errors, base_report.per_band_accuracy)
            rows.append(row(policy, variant, report, hist))
    return rows


def _markdown_table(rows, variants, policies, metric: str) -> str:
    cell = {(r["policy"], r["variant"]): r[metric] for r in rows}
    base = cell[("none", "baseline")]
    lines = [f"{metric} (baseline: {base:.4f})", "", "| policy | " + " | ".join(variants) + " |",
             "|---|" + "---|" * len(variants)]
    for p in policies:
        vals = [cell.get((p, v)) for v in variants]
        lines.append(f"| {p} | " + " | ".join("n/a" if x is None else f"{x:.4f}" for x in vals) + " |")
    return "\n".join(lines)


def cmd_pipeline(args) -> int:
    out = args.out
    rows = run_pipeline(args.seed, args.variants, args.policies, args.k, args.epochs, args.n_train, args.n_test,
                        args.lr, args.bands, args.dataset, out)
    cols = list(rows[0])
    io.write_csv(out / "table.csv", cols, ([("" if r[c] is None else r[c]) for c in cols] for r in rows))
    md = "\n\n".join(_markdown_table(rows, args.variants, args.policies, m)
                     for m in ("test_accuracy", "mce", "shift_consistency"))
    (out / "table.md").write_text(md + "\n")
    _dump(out / "report.json", {"rows": rows})
    write_manifest(out, args, args.seed)
    print(md)
    return 0


# ----------------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="aliasnet", description="Aliasing analysis, graph lint/rewrite and desk-scale CNN experiments.")
    p.add_argument("--version", action="version", version=f"aliasnet {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, func, help_, out_default=True):
        sp = sub.add_parser(name, help=help_, description=help_)
        sp.set_defaults(func=func)
        if out_default:
            sp.add_argument("--out", type=Path, default=Path("out") / name, help="output directory")
        return sp

    sp = add("filter-psd", cmd_filter_psd, "magnitude response of binomial blur kernels")
    sp.add_argument("--k", type=_odd_k, nargs="+", default=[3, 5, 7], help="kernel sizes (odd, >= 3)")
    sp.add_argument("--samples", type=_positive, default=128, help="frequencies on [0, pi]")
    sp.add_argument("--stride", type=_positive, default=2, help="stride of the ideal low-pass reference")

    sp = add("alias-demo", cmd_alias_demo, "spectrum of a signal before and after subsampling")
    sp.add_argument("--signal", choices=("sine", "noise"), default="sine")
    sp.add_argument("--freq", type=float, default=0.375, help="sine frequency, cycles/sample")
    sp.add_argument("--n", type=_positive, default=64)
    sp.add_argument("--stride", type=_positive, default=2)
    sp.add_argument("--prefilter-k", type=_odd_k, default=None, help="also report energy after a binomial prefilter")
    sp.add_argument("--seed", type=int, default=0)

    sp = add("activation-spectra", cmd_activation_spectra, "harmonic power of activated sinusoids")
    sp.add_argument("--cycles", type=_positive, default=4, help="sine periods in the window")
    sp.add_argument("--n", type=_positive, default=256)
    sp.add_argument("--amplitude", type=float, default=1.0)
    sp.add_argument("--offset", type=float, default=0.0)
    sp.add_argument("--harmonics", type=_positive, default=16)

    sp = add("lint", cmd_lint, "find aliasing critical paths and capacity violations", out_default=False)
    sp.add_argument("graph", help="fixture name or path to a graph JSON file")
    sp.add_argument("--out", type=Path, default=None)

    sp = add("rewrite", cmd_rewrite, "insert fixed blur filters into a graph")
    sp.add_argument("graph")
    sp.add_argument("--variant", choices=VARIANTS, default="post")
    sp.add_argument("--k", type=int, choices=BLUR_SIZES, default=3)
    sp.add_argument("--policy", choices=POLICIES, default="violations_only")
    sp.add_argument("--strided-lead", action="store_true", help="prepost: stride on the leading blur")

    def training_flags(sp):
        sp.add_argument("--seed", type=int, default=7)
        sp.add_argument("--epochs", type=_positive, default=20)
        sp.add_argument("--n-train", type=_positive, default=5000)
        sp.add_argument("--n-test", type=_positive, default=1000)
        sp.add_argument("--lr", type=float, default=TrainConfig.learning_rate)
        sp.add_argument("--dataset", choices=DATASETS, default="textures")

    sp = add("train", cmd_train, "train micro-ResNet or a rewritten variant")
    sp.add_argument("--graph", default="micro_resnet", help="micro_resnet, a fixture name or a graph JSON path")
    sp.add_argument("--variant", choices=("baseline",) + VARIANTS, default="baseline")
    sp.add_argument("--k", type=int, choices=BLUR_SIZES, default=3)
    sp.add_argument("--policy", choices=POLICIES, default="all_strided")
    sp.add_argument("--batch-size", type=_positive, default=TrainConfig.batch_size)
    sp.add_argument("--cache-data", action="store_true", help="also write the datasets as CSV")
    training_flags(sp)

    sp = add("eval", cmd_eval, "notch, corruption and shift-consistency evaluation")
    sp.add_argument("--model", type=_existing, required=True, help="checkpoint (.json/.bin or stem)")
    sp.add_argument("--suite", choices=bench.SUITES + ("all",), default="all")
    sp.add_argument("--bands", type=_positive, default=16)
    sp.add_argument("--seed", type=int, default=7)
    sp.add_argument("--n-test", type=_positive, default=1000)
    sp.add_argument("--dataset", choices=DATASETS, default="textures")
    sp.add_argument("--reference", type=_existing, default=None, help="CE reference checkpoint (default: bundled)")
    sp.add_argument("--baseline", type=_existing, default=None, help="model for per-band deltas")
    sp.add_argument("--max-shift", type=int, default=4)

    sp = add("pipeline", cmd_pipeline, "baseline plus every rewrite, all suites, comparison table")
    sp.add_argument("--variants", nargs="+", choices=VARIANTS, default=list(VARIANTS))
    sp.add_argument("--policies", nargs="+", choices=POLICIES, default=list(POLICIES))
    sp.add_argument("--k", type=int, choices=BLUR_SIZES, default=3)
    sp.add_argument("--bands", type=_positive, default=16)
    training_flags(sp)
    return p


def _fail(message: str, code: int, **context) -> int:
    sys.stderr.write(json.dumps({"error": message, "context": context}, sort_keys=True, default=str) + "\n")
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        return _fail(str(exc), 2, **exc.context)
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        return _fail(str(exc), 2, command=args.command, **exc.context)
    except FileNotFoundError as exc:
        return _fail(f"file not found: {exc.filename}", 2, command=args.command)
    except (GraphError, RewriteError) as exc:
        return _fail(str(exc), 2, command=args.command, kind=type(exc).__name__)
    except TrainingDiverged as exc:
        return _fail(str(exc), 1, command=args.command, epoch=exc.epoch)
    except (ValueError, FloatingPointError, np.linalg.LinAlgError) as exc:
        return _fail(str(exc), 1, command=args.command, kind=type(exc).__name__)


if __name__ == "__main__":
    sys.exit(main())
