"""``lzspa`` command line.

Exit codes: 0 success, 1 other failure, 2 usage error, 3 I/O or corrupt
input, 4 model / alphabet mismatch.  Errors go to stderr as one JSON line.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import struct
import sys
from pathlib import Path

import numpy as np

from . import bench as bench_mod
from . import codec
from .classification import (
    DEFAULT_GAMMA_GRID,
    ClassificationError,
    SweepConfig,
    classify,
    fit,
    load_bundle,
    save_bundle,
    sweep,
)
from .core import AlphabetError, TokenSequence
from .evaluation import (
    SourceSpec,
    convergence_experiment,
    exact_kl_sourcelaw_vs_model,
    symbol_histogram,
    wasserstein_1d,
)
from .filtering import (
    MARKOV_CHANNEL,
    Channel,
    ChannelError,
    FilterConfig,
    HMMTrueSPA,
    LossMatrix,
    MarkovSource,
    dp_optimal_filter,
    excess_loss_bound,
    kl_estimate_nats,
    run_filter,
    simulate_markov_channel,
    squared_loss_pm1,
)
from .generation import GenConfig, GenerationError, generate_traced
from .tokens import TokenFileError, format_tokens, read_labels_file, read_token_file
from .transform import LZTransformSPA
from .tree import ModelFormatError

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_IO, EXIT_MISMATCH = 0, 1, 2, 3, 4

# compressed-file envelope: magic, token format, number of sequences, then u64 lengths
_ENVELOPE = struct.Struct("<4sBI")
_ENV_MAGIC = b"LZTF"
_FORMATS = {"bytes": 0, "ints": 1}


class MismatchError(ValueError):
    pass


def _emit(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True, default=_json_default))


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


def _write_csv(path: Path, rows: list[dict]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fields = list(rows[0]) if rows else []
    for r in rows:
        fields += [k for k in r if k not in fields]
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields)
        w.writeheader()
        w.writerows(rows)
    return path


def _write_json(path: Path, obj) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default))
    return path


def _load_model(path) -> LZTransformSPA:
    return LZTransformSPA.load(path)


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _ints(text: str) -> list[int]:
    return [int(float(x)) for x in text.split(",") if x.strip()]


# -- commands ----------------------------------------------------------------------------


def cmd_train(args) -> int:
    corpora = [read_token_file(p, args.format) for p in args.corpus]
    sizes = {c.alphabet_size for c in corpora}
    if len(sizes) != 1:
        raise MismatchError(f"corpus files disagree on alphabet size: {sorted(sizes)}")
    A = sizes.pop()
    model = LZTransformSPA(A, gamma=args.gamma)
    model.train([s for c in corpora for s in c.sequences], epochs=args.epochs)
    if not args.no_freeze:
        model.freeze()
    model.save(args.out)
    report = model.complexity_report()
    report.update({"model": args.out, "gamma": args.gamma, "epochs": args.epochs, "alphabet_size": A})
    _emit(report)
    return EXIT_OK


def cmd_compress(args) -> int:
    corpus = read_token_file(args.input, args.format)
    tokens = corpus.concatenated()
    if args.model:
        model = _load_model(args.model)
        if model.alphabet_size != corpus.alphabet_size:
            raise MismatchError(f"model alphabet {model.alphabet_size} != input alphabet {corpus.alphabet_size}")
        model.freeze()
    else:
        model = LZTransformSPA(corpus.alphabet_size, gamma=args.gamma)
    stream = codec.encode(model, tokens)
    head = _ENVELOPE.pack(_ENV_MAGIC, _FORMATS[corpus.fmt], len(corpus.sequences))
    lengths = struct.pack(f"<{len(corpus.sequences)}Q", *corpus.lengths)
    Path(args.out).write_bytes(head + lengths + stream.to_bytes())
    _emit({
        "input": args.input,
        "output": args.out,
        "mode": stream.mode.name.lower(),
        "symbols": len(tokens),
        "payload_bits": stream.payload_bits,
        "bits_per_symbol": stream.payload_bits / len(tokens) if tokens else 0.0,
    })
    return EXIT_OK


def cmd_decompress(args) -> int:
    data = Path(args.input).read_bytes()
    if len(data) < _ENVELOPE.size:
        raise codec.StreamTruncatedError("file shorter than its envelope")
    magic, fmt_code, nseq = _ENVELOPE.unpack_from(data)
    if magic != _ENV_MAGIC:
        raise codec.CodecError("not an lzspa compressed token file")
    off = _ENVELOPE.size + 8 * nseq
    if len(data) < off:
        raise codec.StreamTruncatedError("sequence table truncated")
    lengths = struct.unpack_from(f"<{nseq}Q", data, _ENVELOPE.size)
    stream = codec.EncodedStream.from_bytes(data[off:])
    model = _load_model(args.model).freeze() if args.model else None
    if model is not None and model.alphabet_size != stream.alphabet_size:
        raise MismatchError("model alphabet does not match stream")
    tokens = codec.decode(stream, model)
    if sum(lengths) != len(tokens):
        raise codec.CodecError("sequence table does not match stream length")
    seqs, pos = [], 0
    for n in lengths:
        seqs.append(tokens[pos: pos + n])
        pos += n
    fmt = {v: k for k, v in _FORMATS.items()}[fmt_code]
    Path(args.out).write_bytes(format_tokens(seqs, stream.alphabet_size, fmt))
    _emit({"input": args.input, "output": args.out, "symbols": len(tokens)})
    return EXIT_OK


def _labelled(args) -> tuple[list, int]:
    entries = read_labels_file(args.labels)
    data, sizes = [], set()
    for path, label in entries:
        corpus = read_token_file(path, args.format)
        sizes.add(corpus.alphabet_size)
        data += [(TokenSequence.of(s, corpus.alphabet_size), label) for s in corpus.sequences if s]
    if len(sizes) != 1:
        raise MismatchError(f"labelled files disagree on alphabet size: {sorted(sizes)}")
    return data, sizes.pop()


def _sweep_config(args) -> SweepConfig:
    return SweepConfig(
        gamma_grid=tuple(_floats(args.grid)) if args.grid else DEFAULT_GAMMA_GRID,
        validation_fraction=args.val_fraction,
        epochs=args.epochs,
        epoch_grid=tuple(_ints(args.epoch_grid)) if args.epoch_grid else None,
        seed=args.seed,
    )


def cmd_fit(args) -> int:
    data, A = _labelled(args)
    gamma, epochs, table = args.gamma, args.epochs, None
    if args.gamma_sweep:
        result = sweep(data, _sweep_config(args), alphabet_size=A)
        gamma, epochs, table = result.best_gamma, result.best_epochs, result.table
    model = fit(data, gamma=gamma, epochs=epochs, alphabet_size=A)
    manifest = save_bundle(model, args.out)
    out = {"bundle": str(Path(args.out)), "manifest": manifest, "gamma": gamma, "epochs": epochs,
           "labels": model.labels, "seed": args.seed}
    if table is not None:
        out["sweep_csv"] = _write_csv(Path(args.out) / "sweep.csv", table)
        out["sweep"] = table
    _emit(out)
    return EXIT_OK


def cmd_sweep(args) -> int:
    data, A = _labelled(args)
    result = sweep(data, _sweep_config(args), alphabet_size=A)
    out = {"best_gamma": result.best_gamma, "best_epochs": result.best_epochs, "table": result.table,
           "seed": args.seed}
    if args.report_dir:
        d = Path(args.report_dir)
        out["csv"] = _write_csv(d / "sweep.csv", result.table)
        out["json"] = _write_json(d / "sweep.json", out.copy())
    _emit(out)
    return EXIT_OK


def cmd_classify(args) -> int:
    model = load_bundle(args.bundle)
    rows = []
    for path in args.inputs:
        corpus = read_token_file(path, args.format)
        if corpus.alphabet_size != model.alphabet_size:
            raise MismatchError(f"{path}: alphabet {corpus.alphabet_size} != model alphabet {model.alphabet_size}")
        for i, seq in enumerate(corpus.sequences):
            label, losses = classify(model, seq, workers=args.threads)
            row = {"file": str(path), "index": i, "label": label, "symbols": len(seq)}
            row.update({f"loss_{lab}": v for lab, v in zip(model.labels, losses)})
            rows.append(row)
    if args.csv:
        _write_csv(Path(args.csv), rows)
    _emit(rows)
    return EXIT_OK


def _load_matrix_json(path, key: str):
    obj = json.loads(Path(path).read_text())
    return obj, np.asarray(obj[key] if isinstance(obj, dict) else obj, dtype=np.float64)


def _resolve_channel(args) -> Channel:
    if args.channel:
        _, pi = _load_matrix_json(args.channel, "pi")
        return Channel(pi)
    return Channel(MARKOV_CHANNEL)


def _resolve_loss(args, channel: Channel, markov: bool) -> LossMatrix:
    if args.loss == "hamming":
        return LossMatrix.hamming(channel.n_inputs)
    if args.loss == "squared":
        if markov:
            return squared_loss_pm1()
        return LossMatrix.squared(np.arange(channel.n_inputs, dtype=np.float64))
    obj, lam = _load_matrix_json(args.loss, "lambda")
    recon = obj.get("recon") if isinstance(obj, dict) else None
    return LossMatrix(lam, None if recon is None else np.asarray(recon, dtype=np.float64))


def cmd_filter(args) -> int:
    markov = args.simulate_markov is not None
    channel = _resolve_channel(args)
    loss = _resolve_loss(args, channel, markov)
    x_vals = None
    if markov:
        if args.channel:
            raise MismatchError("--simulate-markov uses its own channel; drop --channel")
        x_vals, z = simulate_markov_channel(args.simulate_markov, args.length, args.seed)
        zs = z.tolist()
        source = MarkovSource.symmetric_binary(args.simulate_markov)
    else:
        if not args.input:
            raise TokenFileError("give a noisy token file or --simulate-markov P")
        corpus = read_token_file(args.input, args.format)
        if corpus.alphabet_size != channel.n_outputs:
            raise MismatchError(f"input alphabet {corpus.alphabet_size} != channel outputs {channel.n_outputs}")
        zs = corpus.concatenated()
        source = None
    rows = []
    last = None
    for regime in args.regime.split(","):
        cfg = FilterConfig.parse(regime.strip(), args.mc, args.seed)
        res = run_filter(LZTransformSPA(channel.n_outputs, gamma=args.gamma), channel, loss, zs, cfg)
        last = res
        row = {"regime": cfg.label, "index": -cfg.lag if cfg.regime == "delay" else cfg.lag,
               "mc_samples": args.mc if cfg.regime == "delay" else None, "clamp_max": res.clamp_max}
        if markov:
            vals = res.values(loss)
            row["mse"] = float(np.mean((vals - x_vals) ** 2))
            _, oracle, _ = dp_optimal_filter(source, channel, loss, np.asarray(zs), cfg, x_vals)
            row["oracle_mse"] = oracle
            row["excess"] = row["mse"] - oracle
            kl = max(kl_estimate_nats(zs, HMMTrueSPA(source, channel), LZTransformSPA(channel.n_outputs, gamma=args.gamma)), 0.0)
            b = excess_loss_bound(kl, len(zs), channel, loss, cfg)
            row.update({"bound": b.bound, "kl_per_symbol_nats": b.kl_per_symbol, "c1": b.c1, "lambda_max": b.lambda_max})
        rows.append(row)
    if args.out and last is not None:
        recon = last.estimates.tolist()
        Path(args.out).write_bytes(format_tokens([recon], loss.lam.shape[1], "ints"))
    out = {"rows": rows, "seed": args.seed, "n": len(zs)}
    if args.report_dir:
        d = Path(args.report_dir)
        out["csv"] = _write_csv(d / "filter.csv", rows)
        out["json"] = _write_json(d / "filter.json", {"rows": rows, "seed": args.seed, "n": len(zs)})
        if markov:
            from .plotting import plot_filter_mse
            out["figure"] = plot_filter_mse(rows, d / "filter_mse.png")
    _emit(out)
    return EXIT_OK


def cmd_generate(args) -> int:
    model = _load_model(args.model).freeze()
    seed_data = ()
    if args.seed_file:
        corpus = read_token_file(args.seed_file, args.format)
        if corpus.alphabet_size != model.alphabet_size:
            raise MismatchError("seed file alphabet does not match model")
        seed_data = tuple(corpus.concatenated())
    cfg = GenConfig(args.length, args.temperature, args.top_k, args.min_context, seed_data, args.rng_seed)
    trace = generate_traced(model, cfg)
    fmt = args.out_format or ("bytes" if model.alphabet_size == 256 else "ints")
    data = format_tokens([list(trace.tokens.tokens)], model.alphabet_size, fmt)
    if args.out:
        Path(args.out).write_bytes(data)
    _emit({"output": args.out, "length": args.length, "rng_seed": args.rng_seed, "backshifts": trace.backshifts,
           "root_fallbacks": trace.root_fallbacks,
           "tokens": None if args.out else list(trace.tokens.tokens)})
    return EXIT_OK


def _read_source(path) -> SourceSpec:
    obj = json.loads(Path(path).read_text())
    kind = obj.get("kind")
    if kind == "iid":
        return SourceSpec.iid(obj["pmf"])
    if kind == "markov1":
        return SourceSpec.markov1(obj["transition"], obj["initial"])
    raise ValueError(f"unknown source kind {kind!r}")


def cmd_eval(args) -> int:
    if args.metric == "kl":
        source = _read_source(args.source)
        model = _load_model(args.model).freeze()
        if model.alphabet_size != source.alphabet_size:
            raise MismatchError("model and source alphabets differ")
        _emit({"kl_bits": exact_kl_sourcelaw_vs_model(source, model, args.n), "n": args.n})
        return EXIT_OK
    if args.metric == "wd":
        a = read_token_file(args.a, args.format)
        b = read_token_file(args.b, args.format)
        if a.alphabet_size != b.alphabet_size:
            raise MismatchError("token files use different alphabets")
        ha = symbol_histogram(a.concatenated(), a.alphabet_size)
        hb = symbol_histogram(b.concatenated(), b.alphabet_size)
        out = {"wasserstein": wasserstein_1d(ha, hb)}
        if args.report_dir:
            d = Path(args.report_dir)
            rows = [{"symbol": i, "a": float(x), "b": float(y)} for i, (x, y) in enumerate(zip(ha, hb))]
            out["csv"] = _write_csv(d / "histograms.csv", rows)
            out["json"] = _write_json(d / "wd.json", dict(out, rows=rows))
            from .plotting import plot_histograms
            out["figure"] = plot_histograms(ha.tolist(), hb.tolist(), d / "histograms.png")
        _emit(out)
        return EXIT_OK
    source = _read_source(args.source)
    gammas = _floats(args.gammas)
    report = convergence_experiment(source, gammas, _ints(args.m_grid), args.n, _ints(args.seeds))
    meds = {g: report.medians(g) for g in gammas}
    out = {
        "n": args.n,
        "medians": {str(g): v for g, v in meds.items()},
        "non_increasing": {str(g): report.non_increasing(g) for g in gammas},
        "final_median": {str(g): report.final_median(g) for g in gammas},
    }
    if args.report_dir:
        d = Path(args.report_dir)
        out["csv"] = _write_csv(d / "convergence.csv", report.to_records())
        out["json"] = _write_json(d / "convergence.json", dict(out, rows=report.to_records()))
        from .plotting import plot_convergence
        out["figure"] = plot_convergence(meds, d / "convergence.png")
    _emit(out)
    return EXIT_OK


def cmd_inspect(args) -> int:
    model = _load_model(args.model)
    rep = model.complexity_report()
    _emit({
        "model": args.model,
        "alphabet_size": model.alphabet_size,
        "family": model.family.descriptor(),
        "gamma": model.gamma,
        "epochs": model.epochs_trained,
        "frozen": model.frozen,
        "nodes": model.tree.phrase_count(),
        "symbols": model.tree.symbols_parsed,
        "max_depth": rep["max_depth"],
        "depth_histogram": model.tree.depth_histogram(),
    })
    return EXIT_OK


def cmd_bench(args) -> int:
    sizes = _ints(args.sizes)
    train = bench_mod.bench_train_throughput(sizes, repeats=args.repeats, seed=args.seed)
    gen = bench_mod.bench_generation_latency(seed=args.seed)
    out = {"train": train, "generation": gen}
    if args.parallel:
        out["parallel_classify"] = bench_mod.bench_parallel_classify(seed=args.seed)
    if args.report_dir:
        d = Path(args.report_dir)
        out["json"] = _write_json(d / "bench.json", dict(out))
        out["csv"] = _write_csv(d / "bench_train.csv", train["rows"])
        from .plotting import plot_scaling
        rows = train["rows"]
        out["figure"] = plot_scaling([r["n"] for r in rows], [r["seconds"] for r in rows],
                                     [r["nodes"] for r in rows], d / "bench_scaling.png")
    _emit(out)
    return EXIT_OK


# -- parser ------------------------------------------------------------------------------


def _default_threads() -> int:
    env = os.environ.get("LZSPA_THREADS")
    return max(1, int(env)) if env else 1


def build_parser() -> tuple[argparse.ArgumentParser, dict]:
    p = argparse.ArgumentParser(prog="lzspa", description="LZ78-transform SPAs: compression, classification, filtering, generation.")
    p.add_argument("--config", help="JSON file whose keys supply defaults for the chosen subcommand's flags")
    sub = p.add_subparsers(dest="command", required=True)
    subs = {}

    def add(name, fn, help_):
        sp = sub.add_parser(name, help=help_)
        sp.set_defaults(func=fn)
        subs[name] = sp
        return sp

    def fmt(sp):
        sp.add_argument("--format", default="auto", choices=["auto", "bytes", "ints"], help="token file format")

    sp = add("train", cmd_train, "train an LZ78-transform model on token files")
    sp.add_argument("corpus", nargs="+")
    sp.add_argument("--out", required=True)
    sp.add_argument("--gamma", type=float, default=0.5)
    sp.add_argument("--epochs", type=int, default=1)
    sp.add_argument("--no-freeze", action="store_true", help="save the model unfrozen")
    fmt(sp)

    sp = add("compress", cmd_compress, "arithmetic-code a token file")
    sp.add_argument("input")
    sp.add_argument("--out", required=True)
    sp.add_argument("--model", help="frozen model (static mode); default is adaptive")
    sp.add_argument("--gamma", type=float, default=0.5)
    fmt(sp)

    sp = add("decompress", cmd_decompress, "invert compress")
    sp.add_argument("input")
    sp.add_argument("--out", required=True)
    sp.add_argument("--model")

    sp = add("fit", cmd_fit, "fit one model per label and save a bundle")
    sp.add_argument("--labels", required=True, help="lines of '<token file> <label>'")
    sp.add_argument("--out", required=True, help="bundle directory")
    sp.add_argument("--gamma", type=float, default=0.5)
    sp.add_argument("--epochs", type=int, default=1)
    sp.add_argument("--gamma-sweep", action="store_true", help="pick gamma (and epochs) on a validation split first")
    sp.add_argument("--grid", help="comma-separated gamma grid")
    sp.add_argument("--epoch-grid", help="comma-separated epoch counts")
    sp.add_argument("--val-fraction", type=float, default=0.2)
    sp.add_argument("--seed", type=int, default=0)
    fmt(sp)

    sp = add("sweep", cmd_sweep, "validation sweep over gamma (and epochs)")
    sp.add_argument("--labels", required=True)
    sp.add_argument("--grid")
    sp.add_argument("--epochs", type=int, default=1)
    sp.add_argument("--epoch-grid")
    sp.add_argument("--val-fraction", type=float, default=0.2)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--report-dir")
    fmt(sp)

    sp = add("classify", cmd_classify, "label token files with a fitted bundle")
    sp.add_argument("inputs", nargs="+")
    sp.add_argument("--bundle", required=True)
    sp.add_argument("--threads", type=int, default=_default_threads())
    sp.add_argument("--csv")
    fmt(sp)

    sp = add("filter", cmd_filter, "universal filtering of a noisy token stream")
    sp.add_argument("input", nargs="?")
    sp.add_argument("--simulate-markov", type=float, metavar="P", help="run the binary Markov / additive-noise experiment")
    sp.add_argument("--length", type=int, default=10**4)
    sp.add_argument("--channel", help="JSON: {\"pi\": [[P(z|x)]]}")
    sp.add_argument("--loss", default="hamming", help="hamming | squared | JSON {\"lambda\": ..., \"recon\": ...}")
    sp.add_argument("--regime", default="causal", help="comma list of causal | delay:d | lookahead:l")
    sp.add_argument("--mc", type=int, help="Monte-Carlo samples for delayed filtering")
    sp.add_argument("--gamma", type=float, default=0.5)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", help="write estimate indices of the last regime")
    sp.add_argument("--report-dir")
    fmt(sp)

    sp = add("generate", cmd_generate, "sample from a frozen model")
    sp.add_argument("--model", required=True)
    sp.add_argument("--length", type=int, required=True)
    sp.add_argument("--temperature", type=float, default=1.0)
    sp.add_argument("--top-k", type=int)
    sp.add_argument("--min-context", type=int, default=64)
    sp.add_argument("--seed-file")
    sp.add_argument("--rng-seed", type=int, default=0)
    sp.add_argument("--out")
    sp.add_argument("--out-format", choices=["bytes", "ints"])
    fmt(sp)

    sp = add("eval", cmd_eval, "kl | wd | convergence")
    esub = sp.add_subparsers(dest="metric", required=True)
    e = esub.add_parser("kl")
    e.add_argument("--model", required=True)
    e.add_argument("--source", required=True, help="path to a JSON source description: {\"kind\": \"iid\", \"pmf\": [...]} or {\"kind\": \"markov1\", ...}")
    e.add_argument("--n", type=int, required=True)
    e = esub.add_parser("wd")
    e.add_argument("a")
    e.add_argument("b")
    e.add_argument("--report-dir")
    e.add_argument("--format", default="auto", choices=["auto", "bytes", "ints"])
    e = esub.add_parser("convergence")
    e.add_argument("--source", required=True)
    e.add_argument("--gammas", default="0.05")
    e.add_argument("--m-grid", default="100,1000,10000")
    e.add_argument("--n", type=int, default=4)
    e.add_argument("--seeds", default="0,1,2,3,4")
    e.add_argument("--report-dir")

    sp = add("inspect", cmd_inspect, "print model metadata")
    sp.add_argument("model")

    sp = add("bench", cmd_bench, "throughput and latency benchmarks")
    sp.add_argument("--sizes", default="100000,1000000,10000000")
    sp.add_argument("--repeats", type=int, default=1)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--parallel", action="store_true")
    sp.add_argument("--report-dir")
    return p, subs


def _apply_config(argv: list[str], parser: argparse.ArgumentParser, subs: dict) -> None:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, rest = pre.parse_known_args(argv)
    if not known.config:
        return
    cfg = json.loads(Path(known.config).read_text())
    if not isinstance(cfg, dict):
        raise ValueError("config file must hold a JSON object")
    name = next((a for a in rest if a in subs), None)
    if name is None:
        return
    sp = subs[name]
    valid = {a.dest for a in sp._actions}
    unknown = sorted(k.replace("-", "_") for k in cfg if k.replace("-", "_") not in valid)
    if unknown:
        parser.error(f"unknown config keys for {name}: {', '.join(unknown)}")
    sp.set_defaults(**{k.replace("-", "_"): v for k, v in cfg.items()})
    # a config value satisfies an otherwise required flag
    for a in sp._actions:
        if a.dest in {k.replace("-", "_") for k in cfg}:
            a.required = False


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, (MismatchError, AlphabetError, codec.ModelMismatchError, ChannelError)):
        return EXIT_MISMATCH
    if isinstance(exc, (OSError, ModelFormatError, codec.CodecError, TokenFileError, json.JSONDecodeError)):
        return EXIT_IO
    if isinstance(exc, (ClassificationError, GenerationError)):
        # the request itself is unsatisfiable (too little data, bad sampling settings)
        return EXIT_USAGE
    return EXIT_FAIL


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, subs = build_parser()
    try:
        _apply_config(argv, parser, subs)
    except SystemExit as exc:
        return int(exc.code or 0)
    except (OSError, ValueError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return _exit_code(exc)
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (OSError, ValueError, RuntimeError, ClassificationError, GenerationError) as exc:
        code = _exit_code(exc)
        print(json.dumps({"error": type(exc).__name__, "message": str(exc), "exit_code": code}), file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
