"""Command line: train an encoder or serve one over HTTP."""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

from .encoder import HashedBagEncoder, save_model
from .server import serve_embeddings
from .train import TrainConfig, train


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="embed-trainer")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="fine-tune an encoder on a labeled pair CSV")
    p_train.add_argument("--pairs", required=True, help="training CSV (question1, question2, is_duplicate)")
    p_train.add_argument("--out", required=True, help="output directory for model.pt and summary.json")
    p_train.add_argument("--seed", type=int, default=0)
    defaults = TrainConfig()
    p_train.add_argument("--epochs", type=int, default=defaults.epochs)
    p_train.add_argument("--learning-rate", type=float, default=defaults.learning_rate)
    p_train.add_argument("--batch-size", type=int, default=defaults.batch_size)
    p_train.add_argument("--max-grad-norm", type=float, default=defaults.max_grad_norm)
    p_train.add_argument("--margin", type=float, default=defaults.margin)

    p_init = sub.add_parser("init", help="save an untrained (base) encoder")
    p_init.add_argument("--out", required=True, help="path for the model file")
    p_init.add_argument("--seed", type=int, default=0)

    p_serve = sub.add_parser("serve", help="serve a saved encoder over HTTP")
    p_serve.add_argument("--model", required=True, help="path to model.pt")
    p_serve.add_argument("--bind", default="127.0.0.1:8901")
    p_serve.add_argument("--name", default="hashed-bag", help="model name echoed in responses")

    args = parser.parse_args(argv)
    if args.command == "train":
        config = dataclasses.replace(
            TrainConfig(),
            epochs=args.epochs,
            learning_rate=args.learning_rate,
            batch_size=args.batch_size,
            max_grad_norm=args.max_grad_norm,
            margin=args.margin,
        )
        summary = train(config, args.pairs, args.out, seed=args.seed)
        payload = summary.to_dict()
        del payload["post_clip_grad_norms"]  # long; lives in summary.json
        print(json.dumps(payload))
    elif args.command == "init":
        save_model(HashedBagEncoder(seed=args.seed), args.out)
        print(json.dumps({"model_path": args.out, "seed": args.seed}))
    else:
        server = serve_embeddings(args.model, args.bind, model_name=args.name)
        print(f"serving embeddings on {server.url}", file=sys.stderr)
        try:
            server._thread.join()
        except KeyboardInterrupt:
            server.shutdown()
    return 0


if __name__ == "__main__":
    sys.exit(main())
