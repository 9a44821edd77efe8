"""Command-line entry points: gen-synthetic, synth-text, train, eval, serve."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .evaluation import PoolSpec, QUERY_MODES, evaluate
from .features import read_store
from .model import ViMLModel
from .synthetic import SyntheticSpec, generate_synthetic, synthetic_records
from .tagtext import (
    AnalogyExample,
    GENERATOR_METHODS,
    TrackTextRecord,
    filter_tags,
    read_records,
    synthesize_description,
    tags_to_text,
    write_records,
)
from .training import TrainConfig, train


def _cmd_gen_synthetic(args: argparse.Namespace) -> int:
    spec = SyntheticSpec(
        num_tracks=args.num_tracks,
        latent_dim=args.latent_dim,
        noise_sigma=args.noise,
        segments_per_track=args.segments,
        seed=args.seed,
        music_dim=args.music_dim,
    )
    store, tag_sets, texts = generate_synthetic(spec, args.out)
    texts_path = Path(args.out) / "texts.jsonl"
    write_records(texts_path, synthetic_records(tag_sets, texts))
    print(f"wrote {spec.num_tracks} tracks to {store.root} and {texts_path}")
    return 0


def _cmd_synth_text(args: argparse.Namespace) -> int:
    records = read_records(args.tags_file)
    examples = []
    if args.method == "prompt2text":
        for i, rec in enumerate(records[:16]):
            if len(rec.tags) == 0:
                continue
            desc = rec.text or tags_to_text(rec.tags, args.seed + i)
            examples.append(AnalogyExample(tags=rec.tags, description=desc))
    out_records = []
    for i, rec in enumerate(records):
        tags = filter_tags(
            rec.tags.predictions, threshold=args.threshold, track_id=rec.track_id
        )
        text = synthesize_description(
            args.method,
            tags,
            rng_seed=args.seed + i,
            examples=examples,
            k=min(args.k, max(len(examples), 1)),
        )
        out_records.append(
            TrackTextRecord(track_id=rec.track_id, tags=tags, text=text)
        )
    write_records(args.out, out_records)
    print(f"wrote {len(out_records)} descriptions to {args.out}")
    return 0


def _cmd_train(args: argparse.Namespace) -> int:
    config = TrainConfig.from_dict(json.loads(Path(args.config).read_text()))
    store = read_store(args.store)
    records = read_records(args.texts) if args.texts else None
    model, log = train(config, store, records, out_dir=args.out)
    if log.steps:
        print(
            f"trained {len(log.steps)} steps; "
            f"first loss {log.steps[0].loss:.4f}, last loss {log.steps[-1].loss:.4f}"
        )
    (Path(args.out) / "train_log.json").write_text(json.dumps(log.to_dict()))
    print(f"checkpoint written to {args.out}")
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    model = ViMLModel.load(args.ckpt)
    store = read_store(args.store)
    records = read_records(args.texts) if args.texts else None
    spec = PoolSpec(pool_size=args.pool_size, seed=args.seed)
    report = evaluate(model, store, records, spec, query_mode=args.mode)
    print(
        f"mode={args.mode} pool={spec.pool_size} queries={len(report.ranks)}  "
        f"MR={report.median_rank:.0f}  "
        + "  ".join(f"R@{k}={v:.2f}" for k, v in sorted(report.recall_at.items()))
    )
    if args.report:
        report.save(args.report)
        print(f"report written to {args.report}")
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app_from_paths

    app = create_app_from_paths(args.ckpt, args.store, frontend_dir=args.frontend)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="viml", description="language-guided music-for-video retrieval"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-synthetic", help="generate a synthetic feature store")
    p.add_argument("--num-tracks", type=int, required=True)
    p.add_argument("--latent-dim", type=int, default=16)
    p.add_argument("--noise", type=float, default=0.1)
    p.add_argument("--segments", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--music-dim", type=int, default=256)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_gen_synthetic)

    p = sub.add_parser("synth-text", help="synthesize music descriptions from tags")
    p.add_argument("--method", choices=GENERATOR_METHODS, required=True)
    p.add_argument("--tags-file", required=True, help="JSONL of per-track tags")
    p.add_argument("--threshold", type=float, default=0.3)
    p.add_argument("--k", type=int, default=3, help="few-shot examples per prompt")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_synth_text)

    p = sub.add_parser("train", help="train a model on a feature store")
    p.add_argument("--config", required=True, help="JSON file of TrainConfig keys")
    p.add_argument("--store", required=True)
    p.add_argument("--texts", default=None, help="JSONL of per-track tags/texts")
    p.add_argument("--out", required=True, help="checkpoint directory")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="run the retrieval protocol on a checkpoint")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--store", required=True)
    p.add_argument("--texts", default=None)
    p.add_argument("--pool-size", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mode", choices=QUERY_MODES, default="video_plus_text")
    p.add_argument("--report", default=None, help="write the report JSON here")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("serve", help="serve the retrieval API")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--store", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--frontend", default=None, help="static frontend directory")
    p.set_defaults(func=_cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
