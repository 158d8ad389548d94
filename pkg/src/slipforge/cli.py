"""Command-line front end.

Subcommands mirror the pipeline stages: generate a dataset, calibrate
physics against a reference, train the matcher, evaluate methods, export a
similarity matrix, and serve the review API.

Exit codes: 0 success, 2 usage error, 3 missing input file, 4 violated
data invariant, 1 anything else.  Failures print a single machine-parsable
line to stderr: ``error code=<kind> msg="..."``.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__, calibration, datastore, evaluation, features, matcher, physics
from .datastore import DatastoreError, InvariantError, ParseError

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_MISSING = 3
EXIT_INVARIANT = 4

ENV_DATASET = "SLIPFORGE_DATASET"
ENV_MODEL = "SLIPFORGE_MODEL"
ENV_LEDGER = "SLIPFORGE_LEDGER"
ENV_ADDR = "SLIPFORGE_ADDR"


class CliError(Exception):
    def __init__(self, exit_code: int, code: str, message: str):
        super().__init__(message)
        self.exit_code = exit_code
        self.code = code
        self.message = message


def _fail(exit_code: int, code: str, message: str) -> CliError:
    return CliError(exit_code, code, message)


def _require_file(path: str, what: str) -> str:
    if not path:
        raise _fail(EXIT_USAGE, "usage", f"no {what} given")
    if not os.path.exists(path):
        raise _fail(EXIT_MISSING, "missing-file", f"{what} not found: {path}")
    return path


def _load_manifest(path: str) -> datastore.DatasetManifest:
    return datastore.load_manifest(_require_file(path, "dataset manifest"))


def _load_params(path: str | None) -> physics.PhysicsParams:
    if not path:
        return physics.PhysicsParams()
    doc = datastore.load_params(_require_file(path, "params file"))
    return physics.PhysicsParams.from_dict(doc)


# --------------------------------------------------------------------------
# subcommands


def _cmd_generate(args: argparse.Namespace) -> int:
    params = _load_params(args.params)
    manifest = physics.generate_dataset(
        params,
        n_pairs=args.pairs,
        n_interference=args.interference,
        seed=args.seed,
        name=args.name,
    )
    datastore.save_manifest(manifest, args.out)
    print(
        f"wrote {args.out}: {manifest.n_pairs} pairs, "
        f"{len(manifest.interference_fragments())} interference fragments, "
        f"{len(manifest.fragments)} fragments total"
    )
    return EXIT_OK


def _cmd_calibrate(args: argparse.Namespace) -> int:
    manifest = _load_manifest(args.reference)
    vectors = [
        features.extract_edge_vector(f.heights, features.role_for_group(f.group), f.id)
        for f in sorted(manifest.fragments, key=lambda f: f.id)
    ]
    reference = calibration.ReferenceSet(vectors=vectors)
    config = calibration.GAConfig(
        population_size=args.population,
        generations=args.generations,
        n_samples=args.samples,
        seed=args.seed,
    )

    def report(generation: int, best: float) -> None:
        print(f"generation {generation:3d}: best |silhouette| = {best:.4f}")

    genome, history = calibration.calibrate(reference, config, progress=report)
    params = calibration.decode_genome(genome)
    datastore.save_params(params.to_dict(), args.out)
    print(f"wrote {args.out}: best |silhouette| = {history[-1]:.4f}")

    if args.scatter_out:
        generated = calibration.sample_edge_matrix(params, len(reference), seed=config.seed)
        pooled = np.vstack([generated, reference.matrix])
        projected = calibration.pca_2d(pooled)
        doc = {
            "points": [[float(a), float(b)] for a, b in projected],
            "labels": ["generated"] * len(generated) + ["reference"] * len(reference),
            "best_objective": history[-1],
            "history": history,
        }
        with open(args.scatter_out, "w", encoding="utf-8") as fh:
            json.dump(doc, fh)
            fh.write("\n")
        print(f"wrote {args.scatter_out}")
    return EXIT_OK


def _cmd_train(args: argparse.Namespace) -> int:
    manifest = _load_manifest(args.dataset)
    model = matcher.init_model(seed=args.seed)
    config = matcher.TrainConfig(
        epochs=args.epochs,
        learning_rate=args.lr,
        batch_size=args.batch_size,
        seed=args.seed,
    )
    trained = matcher.train(model, manifest, config)
    datastore.save_model(trained, args.out)
    history = trained.training_meta.get("loss_history", [])
    tail = f", final loss {history[-1]:.4f}" if history else ""
    print(f"wrote {args.out}: {config.epochs} epochs on {manifest.n_pairs} pairs{tail}")
    return EXIT_OK


def _parse_ks(text: str) -> tuple[int, ...]:
    try:
        ks = tuple(int(part) for part in text.split(","))
    except ValueError:
        raise _fail(EXIT_USAGE, "usage", f"bad k list {text!r}") from None
    if not ks or any(k < 1 for k in ks):
        raise _fail(EXIT_USAGE, "usage", f"bad k list {text!r}")
    return ks


def _cmd_eval(args: argparse.Namespace) -> int:
    manifest = _load_manifest(args.dataset)
    ks = _parse_ks(args.ks)
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    if not methods:
        raise _fail(EXIT_USAGE, "usage", "no methods given")
    model = None
    if "wisepanda" in methods:
        model = datastore.load_model(_require_file(args.model, "model file"))

    reports = []
    for method in methods:
        if method not in evaluation.METHOD_NAMES:
            raise _fail(EXIT_USAGE, "usage", f"unknown method {method!r}")
        scorer = evaluation.make_scorer(method, model=model, seed=args.seed)
        reports.append(evaluation.evaluate_topk(manifest, scorer, ks))

    header = "method".ljust(10) + "".join(f"top-{k}".rjust(9) for k in ks)
    print(header)
    for report in reports:
        row = report.method.ljust(10)
        row += "".join(f"{report.accuracy[k]:8.2f}%" for k in ks)
        print(row)
    if args.out:
        doc = {"dataset": manifest.name, "reports": [r.to_dict() for r in reports]}
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=1)
            fh.write("\n")
        print(f"wrote {args.out}")
    return EXIT_OK


def _cmd_matrix(args: argparse.Namespace) -> int:
    manifest = _load_manifest(args.dataset)
    model = datastore.load_model(_require_file(args.model, "model file"))
    scorer = evaluation.make_scorer("wisepanda", model=model)
    result = evaluation.similarity_matrix(manifest, scorer)
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(result.to_dict(), fh)
        fh.write("\n")
    print(f"wrote {args.out}: {len(result.upper_ids)} pairs, contrast {result.contrast:.4f}")
    return EXIT_OK


def _cmd_serve(args: argparse.Namespace) -> int:
    from . import service

    manifest = _load_manifest(args.dataset)
    model = datastore.load_model(_require_file(args.model, "model file"))
    if not args.ledger:
        raise _fail(EXIT_USAGE, "usage", "no ledger path given")
    print(f"serving {manifest.name} on {args.addr} (ledger: {args.ledger})")
    service.serve(
        manifest, model, args.ledger, addr=args.addr, ui_dir=args.ui_dir
    )
    return EXIT_OK


# --------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="slipforge",
        description="Synthetic fracture-pair generation, matching and review.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="simulate a dataset of fracture pairs")
    p.add_argument("--pairs", type=int, required=True)
    p.add_argument("--interference", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--params", default=None, help="physics params JSON (defaults used if omitted)")
    p.add_argument("--name", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("calibrate", help="fit physics params to a reference dataset")
    p.add_argument("--reference", required=True, help="dataset manifest with reference edges")
    p.add_argument("--generations", type=int, default=30)
    p.add_argument("--population", type=int, default=24)
    p.add_argument("--samples", type=int, default=None, help="edges generated per fitness call")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--scatter-out", default=None, help="optional PCA scatter JSON export")
    p.set_defaults(func=_cmd_calibrate)

    p = sub.add_parser("train", help="train the embedding matcher")
    p.add_argument("--dataset", required=True)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="Top-k accuracy for one or more methods")
    p.add_argument("--dataset", required=True)
    p.add_argument("--model", default=os.environ.get(ENV_MODEL))
    p.add_argument("--methods", default="wisepanda,dtw,cosine,random")
    p.add_argument("--ks", default="1,5,10,20,50,100")
    p.add_argument("--seed", type=int, default=0, help="seed for the random method")
    p.add_argument("--out", default=None, help="optional JSON report path")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("matrix", help="export the pairwise similarity matrix")
    p.add_argument("--dataset", required=True)
    p.add_argument("--model", default=os.environ.get(ENV_MODEL))
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_matrix)

    p = sub.add_parser("serve", help="run the review HTTP service")
    p.add_argument("--dataset", default=os.environ.get(ENV_DATASET))
    p.add_argument("--model", default=os.environ.get(ENV_MODEL))
    p.add_argument("--ledger", default=os.environ.get(ENV_LEDGER))
    p.add_argument("--addr", default=os.environ.get(ENV_ADDR, "127.0.0.1:8000"))
    p.add_argument("--ui-dir", default=None, help="static review UI directory")
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f'error code={exc.code} msg="{exc.message}"', file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f'error code=missing-file msg="{exc}"', file=sys.stderr)
        return EXIT_MISSING
    except (ParseError, InvariantError, DatastoreError) as exc:
        print(f'error code=invariant msg="{exc}"', file=sys.stderr)
        return EXIT_INVARIANT
    except (physics.ParameterError, calibration.CalibrationError, ValueError) as exc:
        print(f'error code=invalid msg="{exc}"', file=sys.stderr)
        return EXIT_INVARIANT
    except KeyboardInterrupt:
        return EXIT_ERROR
    except Exception as exc:
        print(f'error code=error msg="{type(exc).__name__}: {exc}"', file=sys.stderr)
        return EXIT_ERROR


def entrypoint() -> None:
    sys.exit(main(argv=None))


if __name__ == "__main__":
    entrypoint()
