"""``commpd`` command line: predict, simulate, analyze, cluster-chats.

Exit codes: 0 success, 2 invalid input or configuration, 3 I/O failure.
"""

from __future__ import annotations

import argparse
import io as _io
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import pandas as pd

from . import game_theory as gt
from . import stats, textlab
from .io import (
    ConfigError,
    dataset_to_csv,
    format_table,
    load_config,
    manifest_text,
    read_dataset,
    sha256_bytes,
    write_outputs_atomically,
)
from .sim_engine import RNG_ALGORITHM, run_treatment_suite

EXIT_OK, EXIT_INVALID, EXIT_IO = 0, 2, 3


def _err(msg: str) -> None:
    print(f"commpd: error: {msg}", file=sys.stderr)


# ---------------------------------------------------------------- predict

def cmd_predict(args) -> int:
    payoffs = gt.StagePayoffs(args.T, args.R, args.P, args.S)
    try:
        check = gt.validate_pd(payoffs)
    except ValueError as exc:
        _err(str(exc))
        return EXIT_INVALID
    if not check:
        _err("not a prisoner's dilemma; violated: " + ", ".join(check.violations))
        return EXIT_INVALID
    if not 0.0 < args.delta < 1.0:
        _err("delta must lie in (0, 1)")
        return EXIT_INVALID
    game = gt.normalize(payoffs)
    p_star = gt.cooperation_threshold(game, args.delta)
    lines = [
        f"payoffs        T={args.T:g} R={args.R:g} P={args.P:g} S={args.S:g}",
        "valid_pd       yes",
        f"g              {game.g:.4f}",
        f"l              {game.l:.4f}",
        f"delta          {args.delta:.4f}",
        f"delta_pd       {gt.delta_pd(game):.4f}",
        f"delta_rd       {gt.delta_rd(game):.4f}",
    ]
    if args.p is not None:
        if not 0.0 <= args.p <= 1.0:
            _err("p must lie in [0, 1]")
            return EXIT_INVALID
        lines.append(f"delta_plus     {gt.delta_plus(game, args.p):.4f}  (p={args.p:g})")
    lines.append("threshold_p    " + ("never" if gt.is_never(p_star) else f"{p_star:.4f}"))
    print("\n".join(lines))
    return EXIT_OK


# ---------------------------------------------------------------- simulate

def cmd_simulate(args) -> int:
    started = datetime.now(timezone.utc)
    try:
        config_bytes = Path(args.config).read_bytes()
    except OSError as exc:
        _err(f"cannot read config: {exc}")
        return EXIT_IO
    try:
        configs = load_config(args.config, master_seed=args.seed)
        data = run_treatment_suite(configs)
    except (ConfigError, ValueError) as exc:
        _err(str(exc))
        return EXIT_INVALID
    csv_bytes = dataset_to_csv(data).encode("utf-8")
    out = Path(args.out)
    manifest = manifest_text(
        "simulate", args.seed, sha256_bytes(config_bytes), RNG_ALGORITHM,
        {out.name: sha256_bytes(csv_bytes)}, started,
        extra={"config": args.config, "rows": len(data)},
    )
    try:
        write_outputs_atomically({
            out: csv_bytes,
            out.with_name(out.name + ".manifest"): manifest.encode("utf-8"),
        })
    except OSError as exc:
        _err(f"cannot write outputs: {exc}")
        return EXIT_IO
    print(f"wrote {len(data)} rows for {len(configs)} treatments to {out}")
    return EXIT_OK


# ---------------------------------------------------------------- analyze

def _csv_bytes(df: pd.DataFrame) -> bytes:
    buf = _io.StringIO()
    df.to_csv(buf, index=False, lineterminator="\n")
    return buf.getvalue().encode("utf-8")


def cmd_analyze(args) -> int:
    started = datetime.now(timezone.utc)
    try:
        data = read_dataset(args.data)
    except (OSError, FileNotFoundError) as exc:
        _err(f"cannot read dataset: {exc}")
        return EXIT_IO
    except ConfigError as exc:
        _err(str(exc))
        return EXIT_INVALID
    if data.empty:
        _err("dataset has no rows")
        return EXIT_INVALID
    try:
        first = stats.cooperation_table(data, "first", treatments=None)
        every = stats.cooperation_table(data, "all", treatments=None)
        tests = stats.hypothesis_tests(data, unit=args.unit)
    except ValueError as exc:
        _err(str(exc))
        return EXIT_INVALID
    outputs = {"cooperation_first_round.csv": first, "cooperation_all_rounds.csv": every}
    print("Cooperation rate, first round (mean and sd over matching graphs)")
    print(format_table(first))
    print("\nCooperation rate, all rounds")
    print(format_table(every))
    try:
        beliefs = stats.belief_summary(data)
    except ValueError:
        beliefs = None
        print("\nno elicited beliefs in the dataset; belief summary skipped")
    if beliefs is not None:
        outputs["beliefs.csv"] = beliefs
        print("\nBeliefs (round 1 of elicited supergames)")
        print(format_table(beliefs))
    outputs["tests.csv"] = tests
    print(f"\nOne-sided Wilcoxon-Mann-Whitney tests (continuity corrected, unit={args.unit})")
    print(format_table(tests) if not tests.empty else "no comparable treatment pairs")
    if args.out_dir:
        out_dir = Path(args.out_dir)
        files = {out_dir / name: _csv_bytes(df) for name, df in outputs.items()}
        manifest = manifest_text(
            "analyze", "", sha256_bytes(Path(args.data).read_bytes()), "none",
            {p.name: sha256_bytes(b) for p, b in files.items()}, started,
            extra={"data": args.data, "unit": args.unit},
        )
        files[out_dir / "analyze.manifest"] = manifest.encode("utf-8")
        try:
            write_outputs_atomically(files)
        except OSError as exc:
            _err(f"cannot write outputs: {exc}")
            return EXIT_IO
    return EXIT_OK


# ---------------------------------------------------------------- cluster-chats

def _parse_k(value: str):
    if value == "auto":
        return value
    try:
        k = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError("k must be a positive integer or 'auto'") from None
    if k < 1:
        raise argparse.ArgumentTypeError("k must be >= 1")
    return k


def _input_bytes(path: Path) -> bytes:
    if path.is_dir():
        return b"".join(f.name.encode() + b"\0" + f.read_bytes()
                        for f in sorted(path.glob("*.txt")))
    return path.read_bytes()


def _runner_up(choice) -> str:
    # second-best curvature; the curve often admits two plausible readings
    if choice is None or len(choice.curvature) < 2:
        return ""
    ranked = sorted(choice.curvature, key=lambda k: (-choice.curvature[k], k))
    return str(ranked[1] if ranked[0] == choice.k else ranked[0])


def cmd_cluster(args) -> int:
    started = datetime.now(timezone.utc)
    inputs = [args.corpus, args.embeddings] + [
        p for p in (args.spelling, args.lemmas, args.stopwords) if p
    ]
    for p in inputs:
        if not Path(p).exists():
            _err(f"no such file or directory: {p}")
            return EXIT_IO
    try:
        corpus = textlab.load_corpus(args.corpus)
        table = textlab.load_embeddings(args.embeddings)
        tokens = textlab.preprocess(corpus, args.spelling, args.lemmas, args.stopwords)
    except OSError as exc:
        _err(str(exc))
        return EXIT_IO
    except ValueError as exc:
        _err(str(exc))
        return EXIT_INVALID

    ids = list(tokens)
    docs = [textlab.embed_document(tokens[i], table, i) for i in ids]
    if all(d.empty for d in docs):
        _err("no document shares any token with the embedding vocabulary")
        return EXIT_INVALID
    X = np.vstack([d.vector for d in docs])
    try:
        curve = textlab.wcss_curve(X, args.k_max, seed=args.seed, restarts=args.restarts,
                                   metric=args.metric)
        if args.k == "auto":
            choice = textlab.select_k(curve)
            k = choice.k
        else:
            choice = None
            k = args.k
        result = textlab.best_kmeans(X, k, seed=args.seed, restarts=args.restarts,
                                     metric=args.metric)
    except ValueError as exc:
        _err(str(exc))
        return EXIT_INVALID
    labels = textlab.canonical_labels(result.labels)

    out_dir = Path(args.out_dir)
    files = {}
    assign = pd.DataFrame({"id": ids, "cluster": labels})
    files[out_dir / "assignments.csv"] = _csv_bytes(assign)
    curve_df = pd.DataFrame(curve, columns=["k", "wcss"])
    if choice is not None:
        curve_df["curvature"] = [choice.curvature.get(int(kk), np.nan) for kk in curve_df["k"]]
    files[out_dir / "wcss_curve.csv"] = _csv_bytes(curve_df)

    rrd_pair = None
    if args.rrd_clusters:
        rrd_pair = tuple(int(c) for c in args.rrd_clusters.split(","))
    elif k == 2:
        rrd_pair = (0, 1)
    if rrd_pair is not None and k >= 2:
        try:
            rows = textlab.rank_and_rrd(dict(zip(ids, labels)), tokens, rrd_pair,
                                        top_n=args.top_n, k=k)
        except ValueError as exc:
            _err(str(exc))
            return EXIT_INVALID
        rrd = pd.DataFrame([
            dict(token=r.token, r1=r.r1, r2=r.r2, rrd1=r.rrd1, rrd2=r.rrd2,
                 distinguishing=int(r.distinguishing))
            for r in rows
        ])
        files[out_dir / "rrd_report.csv"] = _csv_bytes(rrd)

    digest_inputs = b"".join(_input_bytes(Path(p)) for p in inputs)
    manifest = manifest_text(
        "cluster-chats", args.seed, sha256_bytes(digest_inputs), "numpy.random.PCG64 "
        "(default_rng(seed + restart))", {p.name: sha256_bytes(b) for p, b in files.items()},
        started,
        extra={"k": k, "k_mode": "auto" if args.k == "auto" else "fixed",
               "flat_curve": bool(choice.flat) if choice else "",
               "elbow_runner_up": _runner_up(choice), "metric": args.metric,
               "documents": len(ids), "empty_documents": sum(d.empty for d in docs)},
    )
    files[out_dir / "cluster.manifest"] = manifest.encode("utf-8")
    try:
        write_outputs_atomically(files)
    except OSError as exc:
        _err(f"cannot write outputs: {exc}")
        return EXIT_IO
    sizes = np.bincount(labels, minlength=k)
    print(f"k={k} ({'elbow' if choice else 'fixed'}); cluster sizes: "
          + ", ".join(f"{c}:{n}" for c, n in enumerate(sizes)))
    if choice is not None and choice.flat:
        print("warning: WCSS curve is flat; inspect wcss_curve.csv")
    return EXIT_OK


# ---------------------------------------------------------------- entry point

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="commpd", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("predict", help="critical discount factors for a stage game")
    for name in ("T", "R", "P", "S"):
        p.add_argument(name, type=float)
    p.add_argument("delta", type=float)
    p.add_argument("--p", type=float, default=None,
                   help="communication belief for delta_plus")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("simulate", help="simulate treatments from a config file")
    p.add_argument("config")
    p.add_argument("out", help="output CSV path (manifest written next to it)")
    p.add_argument("--seed", type=int, required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("analyze", help="tables and tests for a dataset CSV")
    p.add_argument("data")
    p.add_argument("--out-dir", default=None)
    p.add_argument("--unit", choices=("graph", "subject"), default="graph")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("cluster-chats", help="k-means over embedding-sum chat vectors")
    p.add_argument("corpus", help="directory of .txt files or id,text CSV")
    p.add_argument("embeddings", help="word2vec text-format vectors")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--k", type=_parse_k, default="auto")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--k-max", type=int, default=10)
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--top-n", type=int, default=30)
    p.add_argument("--rrd-clusters", default=None, help="two cluster ids, e.g. 0,2")
    p.add_argument("--metric", choices=("euclidean", "cosine"), default="euclidean")
    p.add_argument("--spelling", default=None)
    p.add_argument("--lemmas", default=None)
    p.add_argument("--stopwords", default=None)
    p.set_defaults(func=cmd_cluster)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
