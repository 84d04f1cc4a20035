"""Command-line surface and evaluation orchestration.

Subcommands: prepare, synth, embed, train-classifier, eval, jsd.
Exit codes: 0 success, 1 processing failure, 2 usage error.

Reports are JSON documents carrying every parameter that produced each
number.  For byte-reproducible reports set SOURCE_DATE_EPOCH; the timestamp
then derives from it instead of the wall clock.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, diversity, features, metrics, prep, synthloop, tensorio
from .features import FeatureFormatError
from .prep import AnnotationError
from .audio_io import AudioDecodeError
from .tensorio import TensorFormatError

KNOWN_METRICS = ("is", "fad", "ndb", "jsd")


class UsageError(Exception):
    """Bad flag combinations: exit code 2."""


def _timestamp() -> str:
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch is not None:
        return datetime.fromtimestamp(int(epoch), tz=timezone.utc).isoformat()
    return datetime.now(tz=timezone.utc).isoformat()


def _write_json(path, doc) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


# -- prepare -------------------------------------------------------------------


def cmd_prepare(args) -> int:
    summary = prep.prepare_dataset(
        input_dir=args.input,
        out_dir=args.out,
        annotations=args.annotations,
        grid_bpm=args.grid_bpm,
        target_bpm=args.target_bpm,
        bar_beats=args.bar_beats,
        sample_rate=args.sr,
    )
    print(
        f"prepared {summary.bars_written} bars from {summary.files_processed} files "
        f"(dropped: {summary.bars_dropped_tempo} tempo-range, "
        f"{summary.bars_dropped_ratio} stretch-ratio)"
    )
    print(f"manifest: {summary.manifest_path}")
    if summary.bars_written == 0:
        print(
            f"error: every bar was dropped ({summary.bars_dropped_tempo} tempo-range, "
            f"{summary.bars_dropped_ratio} stretch-ratio)",
            file=sys.stderr,
        )
        return 1
    return 0


# -- synth ---------------------------------------------------------------------


def cmd_synth(args) -> int:
    manifest = synthloop.generate_set(
        count=args.count, diversity=args.diversity, seed=args.seed, out_dir=args.out
    )
    print(f"wrote {manifest['count']} {args.diversity} loops to {args.out} (seed {args.seed})")
    return 0


# -- embed ---------------------------------------------------------------------


def _load_mel_stack(path) -> np.ndarray:
    path = Path(path)
    if path.is_dir():
        mels, _ = prep.load_prepared_mels(path)
        return mels
    arr = tensorio.read_lten(path).astype(np.float64)
    if arr.ndim == 2:
        return arr[None, :, :]
    if arr.ndim == 3:
        return arr
    raise ValueError(f"{path}: expected a 2-D or 3-D mel tensor, got shape {arr.shape}")


def cmd_embed(args) -> int:
    mels = _load_mel_stack(args.input)
    vectors = features.embed_mel_stack(mels)
    tensorio.write_lten(args.out, vectors)
    print(f"embedded {vectors.shape[0]} mels -> {args.out} dims {vectors.shape} (seed {args.seed})")
    return 0


# -- train-classifier ----------------------------------------------------------


def _read_labels(path) -> np.ndarray:
    import csv as _csv

    with open(path, newline="") as fh:
        reader = _csv.reader(fh)
        header = next(reader, None)
        if not header:
            raise FeatureFormatError(f"{path}: empty label file")
        labels = []
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            try:
                labels.append(int(row[-1]))
            except ValueError as exc:
                raise FeatureFormatError(f"{path}:{lineno}: non-integer label") from exc
    if not labels:
        raise FeatureFormatError(f"{path}: no label rows")
    return np.asarray(labels, dtype=np.int64)


def cmd_train_classifier(args) -> int:
    ids, _, matrix = features._load_matrix(args.features)
    labels = _read_labels(args.labels)
    if len(labels) != matrix.shape[0]:
        raise UsageError(
            f"{len(labels)} labels for {matrix.shape[0]} feature rows"
        )
    model = features.train_classifier(
        matrix, labels, l2=args.l2, step=args.step, epochs=args.epochs, seed=args.seed
    )
    accuracy = features.training_accuracy(model, matrix, labels)
    model.save(args.out)
    print(f"trained {model.n_classes}-class classifier on {len(labels)} rows (seed {args.seed})")
    print(f"training accuracy: {accuracy}")
    print(f"model: {args.out}")
    return 0


# -- eval ----------------------------------------------------------------------


def _load_eval_set(path) -> tuple[str, np.ndarray]:
    """Returns ("mels", (N,80,T) stack) for a prepared dir, ("vectors", (N,D))
    for a 2-D LTEN matrix file whose rows are used directly."""
    p = Path(path)
    if p.is_dir():
        mels, _ = prep.load_prepared_mels(p)
        return "mels", mels
    if p.suffix.lower() == ".lten":
        arr = tensorio.read_lten(p).astype(np.float64)
        if arr.ndim == 3:
            return "mels", arr
        if arr.ndim == 2:
            return "vectors", arr
        raise ValueError(f"{p}: expected 2-D vectors or 3-D mels, got shape {arr.shape}")
    raise UsageError(f"{p}: eval sets must be a prepared directory or an .lten file")


def _as_diversity_vectors(kind: str, data: np.ndarray) -> np.ndarray:
    if kind == "mels":
        return data.reshape(data.shape[0], -1)
    return data


def _as_embeddings(kind: str, data: np.ndarray) -> tuple[np.ndarray, str]:
    if kind == "mels":
        return features.embed_mel_stack(data), features.MELSTAT_PROVIDER
    return data, "external-vectors"


def cmd_eval(args) -> int:
    wanted = [m.strip() for m in args.metrics.split(",") if m.strip()]
    unknown = [m for m in wanted if m not in KNOWN_METRICS]
    if unknown:
        raise UsageError(f"unknown metrics: {', '.join(unknown)} (known: {', '.join(KNOWN_METRICS)})")
    if not wanted:
        raise UsageError("no metrics requested")

    embeddings_pair = None
    if args.embeddings:
        parts = args.embeddings.split(",")
        if len(parts) != 2:
            raise UsageError("--embeddings takes REAL_FILE,FAKE_FILE")
        embeddings_pair = (parts[0], parts[1])

    needs_fad_features = "fad" in wanted and embeddings_pair is None
    needs_vectors = "ndb" in wanted or "jsd" in wanted
    needs_is = "is" in wanted
    if needs_is and not args.posteriors and not args.classifier:
        raise UsageError(
            "metric 'is' needs a posterior source: pass --posteriors FILE or --classifier MODEL"
        )
    needs_fake_mels_for_is = needs_is and not args.posteriors

    real_kind = real_data = fake_kind = fake_data = None
    if needs_vectors or needs_fad_features:
        if not args.real:
            raise UsageError("--real is required for the requested metrics")
        if not args.fake:
            raise UsageError("--fake is required for the requested metrics")
        real_kind, real_data = _load_eval_set(args.real)
        fake_kind, fake_data = _load_eval_set(args.fake)
    elif needs_fake_mels_for_is:
        if not args.fake:
            raise UsageError("--fake is required to compute posteriors with --classifier")
        fake_kind, fake_data = _load_eval_set(args.fake)

    values: dict[str, object] = {}
    parameters: dict[str, object] = {
        "seed": args.seed,
        "real": args.real,
        "fake": args.fake,
    }

    if "fad" in wanted:
        if embeddings_pair is not None:
            real_emb = features.embeddings_matrix(features.load_embeddings(embeddings_pair[0]))
            fake_emb = features.embeddings_matrix(features.load_embeddings(embeddings_pair[1]))
            provider = f"{Path(embeddings_pair[0]).stem},{Path(embeddings_pair[1]).stem}"
        else:
            real_emb, provider_r = _as_embeddings(real_kind, real_data)
            fake_emb, provider_f = _as_embeddings(fake_kind, fake_data)
            provider = provider_r if provider_r == provider_f else f"{provider_r},{provider_f}"
        if real_emb.shape[1] != fake_emb.shape[1]:
            raise ValueError(
                f"embedding dims differ: real {real_emb.shape[1]} vs fake {fake_emb.shape[1]}"
            )
        values["fad"] = metrics.frechet_distance(
            metrics.fit_gaussian(real_emb), metrics.fit_gaussian(fake_emb)
        )
        parameters["embedding_provider"] = provider
        parameters["fad_real_count"] = int(real_emb.shape[0])
        parameters["fad_fake_count"] = int(fake_emb.shape[0])

    if needs_vectors:
        real_vec = _as_diversity_vectors(real_kind, real_data)
        fake_vec = _as_diversity_vectors(fake_kind, fake_data)
        if real_vec.shape[1] != fake_vec.shape[1]:
            raise ValueError(
                f"vector dims differ: real {real_vec.shape[1]} vs fake {fake_vec.shape[1]}"
            )
        result = diversity.evaluate_diversity_vectors(
            real_vec, fake_vec, k=args.k, alpha=args.alpha, seed=args.seed
        )
        if "ndb" in wanted:
            values["ndb"] = result.ndb
            values["ndb_over_k"] = result.ndb_over_k
        if "jsd" in wanted:
            values["jsd"] = result.jsd
        parameters.update(
            {
                "k": args.k,
                "alpha": args.alpha,
                "z_critical": result.params["z_critical"],
                "diversity_real_count": result.params["n_reference"],
                "diversity_fake_count": result.params["n_generated"],
            }
        )

    if needs_is:
        if args.posteriors:
            posteriors = features.load_posteriors(args.posteriors)
        else:
            model = features.SoftmaxClassifier.load(args.classifier)
            if fake_kind != "mels":
                raise UsageError("--classifier needs --fake to be a prepared mel directory")
            feats = features.embed_mel_stack(fake_data)
            if feats.shape[1] != model.feature_dim:
                raise ValueError(
                    f"classifier expects {model.feature_dim}-dim features, "
                    f"embeddings are {feats.shape[1]}-dim"
                )
            posteriors = features.predict_posteriors(model, feats)
        is_result = metrics.inception_score(posteriors, splits=args.splits, seed=args.seed)
        values["is_mean"] = is_result.mean
        values["is_std"] = is_result.std
        parameters.update(
            {
                "splits": args.splits,
                "posterior_provider": posteriors.provider_id,
                "is_sample_count": posteriors.n_clips,
                "is_class_count": posteriors.n_classes,
                "is_split_scores": is_result.split_scores,
            }
        )

    report = dict(values)
    report["parameters"] = parameters
    report["toolkit_version"] = __version__
    report["timestamp"] = _timestamp()
    report["command"] = args._raw

    _print_table(wanted, values)
    if args.report:
        _write_json(args.report, report)
        print(f"report: {args.report}")
    return 0


def _print_table(wanted, values) -> None:
    headers = []
    cells = []
    if "is" in wanted:
        headers.append("IS↑")
        cells.append(f"{values['is_mean']:.4f}±{values['is_std']:.4f}")
    if "fad" in wanted:
        headers.append("FAD↓")
        cells.append(f"{values['fad']:.4f}")
    if "jsd" in wanted:
        headers.append("JS↓")
        cells.append(f"{values['jsd']:.4f}")
    if "ndb" in wanted:
        headers.append("NDB/K↓")
        cells.append(f"{values['ndb_over_k']:.4f}")
    widths = [max(len(h), len(c)) + 2 for h, c in zip(headers, cells)]
    print("".join(h.ljust(w) for h, w in zip(headers, widths)).rstrip())
    print("".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip())


# -- jsd -----------------------------------------------------------------------


def cmd_jsd(args) -> int:
    p = tensorio.read_lten(args.p).ravel().astype(np.float64)
    q = tensorio.read_lten(args.q).ravel().astype(np.float64)
    value = diversity.jsd(p, q)
    print(f"jsd: {value}")
    if args.report:
        _write_json(
            args.report,
            {
                "jsd": value,
                "parameters": {"p": args.p, "q": args.q, "bins": int(len(p))},
                "toolkit_version": __version__,
                "timestamp": _timestamp(),
            },
        )
        print(f"report: {args.report}")
    return 0


# -- parser --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="loopeval",
        description="One-bar drum-loop evaluation toolkit: preparation, "
        "synthesis, and model-based quality/diversity metrics.",
    )
    parser.add_argument("--version", action="version", version=f"loopeval {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="slice, tempo-normalize, and mel-render a WAV corpus")
    p.add_argument("--input", required=True, help="directory of WAV files")
    p.add_argument("--out", required=True, help="output directory for tensors + manifest")
    p.add_argument("--annotations", help="CSV of downbeats (path,downbeat_seconds)")
    p.add_argument("--grid-bpm", type=float, help="fixed-grid slicing tempo when no annotations")
    p.add_argument("--target-bpm", type=float, default=120.0)
    p.add_argument("--bar-beats", type=int, default=4)
    p.add_argument("--sr", type=int, default=44100)
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("synth", help="generate procedural drum loops")
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--diversity", choices=synthloop.DIVERSITY_LEVELS, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("embed", help="mel-statistics embeddings of prepared tensors")
    p.add_argument("--input", required=True, help="prepared directory or .lten mel stack")
    p.add_argument("--out", required=True, help="output .lten (N x 160)")
    p.add_argument("--seed", type=int, default=0, help="echoed for provenance (no RNG here)")
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("train-classifier", help="train the softmax posterior provider")
    p.add_argument("--features", required=True, help="N x D matrix (.lten or CSV)")
    p.add_argument("--labels", required=True, help="CSV of integer labels (header + one per row)")
    p.add_argument("--out", required=True, help="output model JSON")
    p.add_argument("--l2", type=float, default=1e-3)
    p.add_argument("--step", type=float, default=1.0)
    p.add_argument("--epochs", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train_classifier)

    p = sub.add_parser("eval", help="run metrics over real vs generated sets")
    p.add_argument("--real", help="prepared directory or .lten matrix")
    p.add_argument("--fake", help="prepared directory or .lten matrix")
    p.add_argument("--metrics", default="fad,ndb,jsd", help="comma list from: is,fad,ndb,jsd")
    p.add_argument("--k", type=int, default=100)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--splits", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--embeddings", help="external embeddings: REAL_FILE,FAKE_FILE")
    p.add_argument("--posteriors", help="external posteriors for the generated set")
    p.add_argument("--classifier", help="softmax model JSON for computing posteriors")
    p.add_argument("--report", help="write the MetricReport JSON here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("jsd", help="Jensen-Shannon divergence of two count vectors")
    p.add_argument("--p", required=True, help="first count vector (.lten)")
    p.add_argument("--q", required=True, help="second count vector (.lten)")
    p.add_argument("--report", help="write a JSON report here")
    p.set_defaults(func=cmd_jsd)

    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    args._raw = argv
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except (
        AudioDecodeError,
        AnnotationError,
        TensorFormatError,
        FeatureFormatError,
        FileNotFoundError,
        ValueError,
        OSError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
