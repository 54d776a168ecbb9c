"""Command-line entry point.

Every command prints JSON or CSV on stdout. Failures print a JSON object
``{"error": ..., "message": ...}`` on stderr and exit with a code that
identifies the failure class (see EXIT_CODES).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .backend import HttpBackend, LocalBackend, Registry, Snapshotter, make_server, seed_registry
from .embedding import load_model
from .errors import BackendUnavailable, FormatError, LatentSimError, ModelUnavailable
from .netgraph import (
    LabeledNetwork,
    knn_accuracy,
    mds_layout,
    pairwise_matrix,
    read_labels,
    read_matrix_csv,
    write_layout_csv,
    write_matrix_csv,
)
from .pipeline import SignConfig, classification_grid, sign_document, sign_many
from .relevance import bow_from_document, user_df
from .signature import load as load_signature
from .signature import save as save_signature
from .synthetic import generate_corpus, random_signature
from .textprep import PrepConfig, build_reference, load_wordlist, parse_plain, read_history
from .transport import similarity, wmd

log = logging.getLogger("latentsim")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CODES = [
    (BackendUnavailable, 3),
    (ModelUnavailable, 4),
    (FormatError, 5),
    (LatentSimError, 6),
    (OSError, 7),
    (ValueError, 8),
]

ENV_PREFIX = "LATENTSIM_"


def _env(name: str, default=None):
    return os.environ.get(ENV_PREFIX + name, default)


@dataclass
class RunConfig:
    backend_url: str | None = None
    model_path: str | None = None
    snapshot_path: str | None = None
    k: int = 50
    p_min: float = 0.05
    decoys: int = 0
    jitter_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if not 0.0 <= self.p_min <= 1.0:
            raise ValueError("p_min must lie in [0, 1]")
        if self.jitter_sigma < 0:
            raise ValueError("jitter sigma must be >= 0")


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _prep_config(args) -> PrepConfig:
    return PrepConfig(
        stoplist_path=getattr(args, "stoplist", None),
        english_threshold=getattr(args, "english_threshold", 0.5),
        language_filter=getattr(args, "language_filter", False),
    )


def _run_config(args) -> RunConfig:
    return RunConfig(
        backend_url=getattr(args, "backend_url", None),
        model_path=getattr(args, "model", None),
        snapshot_path=getattr(args, "snapshot", None),
        k=getattr(args, "k", 50),
        p_min=getattr(args, "p_min", 0.05),
        decoys=getattr(args, "decoys", 0),
        jitter_sigma=getattr(args, "jitter", 0.0),
        seed=getattr(args, "seed", 0),
    )


class _Session:
    """Backend access for one command: HTTP, or an in-process registry file."""

    def __init__(self, cfg: RunConfig, need_model: bool):
        self.cfg = cfg
        self.local: LocalBackend | None = None
        if cfg.backend_url:
            self.client = HttpBackend(cfg.backend_url)
            return
        if not cfg.snapshot_path:
            raise ValueError("give --backend-url, or --snapshot for a local registry")
        snap = Path(cfg.snapshot_path)
        registry = Registry.load(snap) if snap.exists() else Registry()
        model = load_model(cfg.model_path) if cfg.model_path else None
        if need_model and model is None:
            raise ModelUnavailable("local mode needs --model")
        self.local = LocalBackend(registry, model)
        self.client = self.local

    def close(self):
        if self.local is not None:
            self.local.registry.save(self.cfg.snapshot_path)


def _emit(obj) -> None:
    print(json.dumps(obj, indent=2, ensure_ascii=False))


# commands


def cmd_serve(args) -> int:
    registry = Registry()
    if args.snapshot and Path(args.snapshot).exists():
        registry = Registry.load(args.snapshot)
    model = load_model(args.model) if args.model else None
    backend = LocalBackend(registry, model)
    if args.seed_dir:
        n = seed_registry(registry, args.seed_dir, _prep_config(args))
        log.info("seeded %d users", n)
    server = make_server(backend, args.host, args.port)
    snap = Snapshotter(registry, args.snapshot, args.snapshot_interval).start() if args.snapshot else None
    host, port = server.server_address[:2]
    print(json.dumps({"listening": f"http://{host}:{port}", **registry.health()}), flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
        if snap is not None:
            snap.stop()
    return EXIT_OK


def cmd_seed(args) -> int:
    session = _Session(_run_config(args), need_model=False)
    skipped: list[tuple[str, str]] = []
    n = seed_registry(session.client, args.corpus_dir, _prep_config(args), skipped)
    session.close()
    out = {"seeded": n, "skipped": [{"file": f, "reason": r} for f, r in skipped]}
    if session.local is not None:
        out.update(session.local.registry.health())
    _emit(out)
    return EXIT_OK


def _sign_config(args) -> SignConfig:
    cfg = _run_config(args)
    pool = sorted(load_wordlist(args.decoy_pool)) if getattr(args, "decoy_pool", None) else None
    return SignConfig(cfg.k, cfg.p_min, cfg.decoys, pool, cfg.jitter_sigma, cfg.seed, _prep_config(args))


def cmd_sign(args) -> int:
    session = _Session(_run_config(args), need_model=True)
    user_id = args.user_id or Path(args.history).stem
    doc = build_reference(read_history(args.history), _prep_config(args), user_id)
    sig = sign_document(doc, session.client, _sign_config(args))
    session.close()
    out = args.out or f"{user_id}.afsg"
    save_signature(sig, out)
    _emit({"written": str(out), "bytes": Path(out).stat().st_size, **sig.summary()})
    return EXIT_OK


def cmd_inspect(args) -> int:
    _emit(load_signature(args.signature).summary(full=args.full))
    return EXIT_OK


def cmd_bow(args) -> int:
    doc = build_reference(read_history(args.history), _prep_config(args), Path(args.history).stem)
    bow = bow_from_document(doc)
    _emit({"bow": bow.counts, "user_df": user_df(bow).to_json()["df"]})
    return EXIT_OK


def cmd_compare(args) -> int:
    a, b = load_signature(args.a), load_signature(args.b)
    start = time.perf_counter()
    distance, plan = wmd(a, b)
    elapsed = time.perf_counter() - start
    if args.plan:
        with open(args.plan, "w", newline="", encoding="utf-8") as fh:
            csv.writer(fh, lineterminator="\n").writerows(plan.flow.tolist())
    _emit({"wmd": distance, "similarity": 1.0 - distance / 2.0, "seconds": elapsed})
    return EXIT_OK


def cmd_matrix(args) -> int:
    sigs = [load_signature(p) for p in args.signatures]
    text = write_matrix_csv(pairwise_matrix(sigs, args.workers), args.out)
    if not args.out:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_mds(args) -> int:
    matrix = read_matrix_csv(args.matrix)
    labels = read_labels(args.labels) if args.labels else None
    text = write_layout_csv(matrix.ids, mds_layout(matrix), labels, args.out)
    if not args.out:
        sys.stdout.write(text)
    return EXIT_OK


def _load_corpus_dir(root: Path, prep: PrepConfig):
    labels = read_labels(root / "labels.tsv")
    users_dir = root / "users"
    docs = []
    for uid in labels:
        matches = sorted(users_dir.glob(f"{uid}.*"))
        if not matches:
            raise FormatError(f"no history file for labeled user {uid!r} in {users_dir}")
        docs.append(build_reference(read_history(matches[0]), prep, uid))
    return docs, labels


def grid_csv(grid: dict[int, dict[int, float]], n_values) -> str:
    """Table with one row per n, one column per k, and a closing average row."""
    ks = sorted(grid)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", *(f"k={k}" for k in ks)])
    for n in n_values:
        w.writerow([n, *(f"{grid[k][n]:.3f}" for k in ks)])
    w.writerow(["avg", *(f"{np.mean([grid[k][n] for n in n_values]):.3f}" for k in ks)])
    return buf.getvalue()


def cmd_classify(args) -> int:
    prep = _prep_config(args)
    cfg = _sign_config(args)
    registry = Registry()
    if args.synthetic:
        corpus = generate_corpus(n_per_class=args.per_class, n_seed=args.seeds, seed=args.seed)
        model = corpus.embedding(args.dim, args.seed)
        labels = corpus.labels
        docs = [build_reference(parse_plain("\n".join(m)), prep, u) for u, m in corpus.users.items()]
        for sid, msgs in corpus.seeds.items():
            seed_doc = build_reference(parse_plain("\n".join(msgs)), prep, "seed:" + sid)
            registry.submit_df(seed_doc.user_id, user_df(bow_from_document(seed_doc)).df)
    else:
        if not args.corpus:
            raise ValueError("give --corpus DIR or --synthetic")
        root = Path(args.corpus)
        model_path = args.model or root / "model.vec"
        model = load_model(model_path)
        docs, labels = _load_corpus_dir(root, prep)
        seed_dir = Path(args.seed_dir) if args.seed_dir else root / "seeds"
        if seed_dir.is_dir():
            seed_registry(registry, seed_dir, prep)
    backend = LocalBackend(registry, model)
    sigs = sign_many(docs, backend, cfg, args.k_values)
    grid = classification_grid(sigs, labels, args.n_values, args.workers)
    sys.stdout.write(grid_csv(grid, args.n_values))
    return EXIT_OK


def cmd_bench(args) -> int:
    rows = bench(args.k_values, args.repeats, args.dim, args.seed)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["k", "mean_seconds"])
    for k, t in rows:
        w.writerow([k, f"{t:.6f}"])
    sys.stdout.write(buf.getvalue())
    return EXIT_OK


def bench(k_values, repeats: int = 3, dim: int = 100, seed: int = 0) -> list[tuple[int, float]]:
    """Mean wall-clock time of one signature comparison per signature size."""
    rng = np.random.default_rng(seed)
    rows = []
    for k in k_values:
        times = []
        for _ in range(repeats):
            a = random_signature(k, dim, rng)
            b = random_signature(k, dim, rng)
            start = time.perf_counter()
            similarity(a, b)
            times.append(time.perf_counter() - start)
        rows.append((k, float(np.mean(times))))
    return rows


def cmd_synth(args) -> int:
    corpus = generate_corpus(n_per_class=args.per_class, n_seed=args.seeds, seed=args.seed)
    root = corpus.write(args.out_dir, args.dim, args.seed)
    _emit({"written": str(root), "users": len(corpus.users), "seeds": len(corpus.seeds)})
    return EXIT_OK


# argument parsing


def _add_prep(p):
    p.add_argument("--stoplist", default=_env("STOPLIST"), help="stop-word file, one word per line")
    p.add_argument("--language-filter", action="store_true", help="drop histories that are mostly non-English")
    p.add_argument("--english-threshold", type=float, default=0.5)


def _add_backend(p):
    p.add_argument("--backend-url", default=_env("BACKEND_URL"))
    p.add_argument("--snapshot", default=_env("SNAPSHOT"), help="local registry file (when no backend URL)")
    p.add_argument("--model", default=_env("MODEL"), help="word-vector file for local mode")


def _add_sign_options(p):
    p.add_argument("--k", type=int, default=int(_env("K", 50)))
    p.add_argument("--p-min", type=float, default=float(_env("P_MIN", 0.05)))
    p.add_argument("--decoys", type=int, default=int(_env("DECOYS", 0)))
    p.add_argument("--decoy-pool", help="word list to draw decoys from (default: own vocabulary)")
    p.add_argument("--jitter", type=float, default=float(_env("JITTER", 0.0)))
    p.add_argument("--seed", type=int, default=int(_env("SEED", 0)))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="latentsim", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run the DF/vector backend over HTTP")
    p.add_argument("--host", default=_env("HOST", "127.0.0.1"))
    p.add_argument("--port", type=int, default=int(_env("PORT", 8080)))
    p.add_argument("--model", default=_env("MODEL"))
    p.add_argument("--snapshot", default=_env("SNAPSHOT"))
    p.add_argument("--snapshot-interval", type=float, default=float(_env("SNAPSHOT_INTERVAL", 60)))
    p.add_argument("--seed-dir", help="register seed documents on startup")
    _add_prep(p)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("seed", help="register seed documents (cold start)")
    p.add_argument("corpus_dir")
    _add_backend(p)
    _add_prep(p)
    p.set_defaults(func=cmd_seed)

    p = sub.add_parser("sign", help="build a signature file from a text history")
    p.add_argument("history", help="plain text (one own message per line) or author<TAB>text .tsv")
    p.add_argument("--user-id")
    p.add_argument("-o", "--out")
    _add_backend(p)
    _add_sign_options(p)
    _add_prep(p)
    p.set_defaults(func=cmd_sign)

    p = sub.add_parser("inspect", help="summarize a signature file")
    p.add_argument("signature")
    p.add_argument("--full", action="store_true", help="include vectors and weights")
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("bow", help="print the BoW and user DF vectors of a history")
    p.add_argument("history")
    _add_prep(p)
    p.set_defaults(func=cmd_bow)

    p = sub.add_parser("compare", help="WMD and similarity of two signature files")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--plan", help="write the optimal flow matrix as CSV")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("matrix", help="pairwise similarity matrix as CSV")
    p.add_argument("signatures", nargs="+")
    p.add_argument("-o", "--out")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_matrix)

    p = sub.add_parser("classify", help="n-NN accuracy grid over (n, k)")
    p.add_argument("--corpus", help="dir with users/, labels.tsv, optional seeds/ and model.vec")
    p.add_argument("--synthetic", action="store_true", help="use a generated two-topic corpus")
    p.add_argument("--model")
    p.add_argument("--seed-dir")
    p.add_argument("--k", dest="k_values", type=_int_list, default=[10, 50, 100])
    p.add_argument("--n", dest="n_values", type=_int_list, default=[1, 3, 5, 7, 9])
    p.add_argument("--p-min", type=float, default=0.05)
    p.add_argument("--decoys", type=int, default=0)
    p.add_argument("--jitter", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--per-class", type=int, default=30)
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--dim", type=int, default=100)
    p.add_argument("--workers", type=int, default=1)
    _add_prep(p)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("mds", help="2-D classical MDS layout of a similarity matrix")
    p.add_argument("matrix")
    p.add_argument("--labels", help="id<TAB>label file")
    p.add_argument("-o", "--out")
    p.set_defaults(func=cmd_mds)

    p = sub.add_parser("bench", help="mean comparison time per signature size")
    p.add_argument("--k", dest="k_values", type=_int_list, default=[10, 50, 100, 200, 400])
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--dim", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("synth", help="write the synthetic two-topic corpus to a directory")
    p.add_argument("out_dir")
    p.add_argument("--per-class", type=int, default=30)
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--dim", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)
    return parser


def exit_code(exc: BaseException) -> int:
    for cls, code in EXIT_CODES:
        if isinstance(exc, cls):
            return code
    return 1


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if getattr(args, "k_values", None) is not None and (
        not args.k_values or args.k_values != sorted(args.k_values) or min(args.k_values) < 1
    ):
        parser.error("--k values must be positive and ascending")
    try:
        return args.func(args)
    except (LatentSimError, OSError, ValueError) as exc:
        json.dump({"error": type(exc).__name__, "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return exit_code(exc)


if __name__ == "__main__":
    sys.exit(main())
