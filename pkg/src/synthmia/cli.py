"""Command-line interface.

Subcommands mirror the pipeline stages: generate, recover, shadow, attack,
evaluate, replicate. Errors print machine-readable JSON on stderr and exit
nonzero.
"""

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import attack as attack_mod
from . import evaluation, harness, recovery, sdg
from .data import MEMBER_COLUMN, load_csv, write_csv
from .dp import DpParams, derive_seed
from .errors import ConfigurationError, SynthmiaError


def _dp_from_args(args):
    return DpParams(
        epsilon=harness.parse_epsilon(args.epsilon),
        delta=args.delta,
        theta=args.theta,
        seed=args.seed,
    )


def _write_structure(structure, method, path):
    if method == sdg.METHOD_MST:
        obj = {"method": method, "edges": [list(e) for e in structure]}
    else:
        obj = {"method": method, "order": [[node, list(parents)] for node, parents in structure]}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2)


def _read_structure(path):
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    if "edges" in obj:
        return tuple(tuple(e) for e in obj["edges"])
    return tuple((node, tuple(parents)) for node, parents in obj["order"])


def cmd_generate(args):
    train = load_csv(args.data)
    cfg = sdg.GeneratorConfig(args.method, _dp_from_args(args), args.n_synth)
    model = sdg.fit(train, cfg)
    synth = sdg.sample(model, args.n_synth, derive_seed(args.seed, 1))
    os.makedirs(args.out, exist_ok=True)
    write_csv(synth, os.path.join(args.out, "synth.csv"))
    sdg.model_to_file(model, os.path.join(args.out, "model.json"))
    structure = model.edges if args.method == sdg.METHOD_MST else model.order
    _write_structure(structure, args.method, os.path.join(args.out, "structure.json"))
    print(json.dumps({"synth": os.path.join(args.out, "synth.csv"), "rows": len(synth)}))


def cmd_recover(args):
    synth = load_csv(args.synth)
    if args.method == sdg.METHOD_MST:
        structure = recovery.recover_tree(synth)
    else:
        structure = recovery.recover_bayesnet(synth, _dp_from_args(args))
    _write_structure(structure, args.method, args.out)
    print(json.dumps({"structure": args.out}))


def cmd_shadow(args):
    aux = load_csv(args.aux)
    cfg = recovery.ShadowConfig(K=args.k, subset_size=args.subset_size, dp=_dp_from_args(args), seed=args.seed)
    weights = recovery.shadow_weights(aux, cfg, args.method)
    recovery.weights_to_file(weights, args.out)
    print(json.dumps({"weights": args.out, "total": weights.total()}))


def cmd_attack(args):
    # aux is the population superset, so its inferred domain covers the others
    aux = load_csv(args.aux)
    target = load_csv(args.target, schema=aux.domain)
    synth = load_csv(args.synth, schema=aux.domain)
    base = args.attack.rstrip("*")
    if base in ("mamamia-mst", "mamamia-pb"):
        if not args.weights:
            raise ConfigurationError(f"{args.attack} needs --weights")
        weights = recovery.weights_from_file(args.weights)
        fn = attack_mod.mamamia_mst if base == "mamamia-mst" else attack_mod.mamamia_pb
        sv = fn(target, weights, synth, aux)
    elif base in ("marginals-sigma", "marginals-pi"):
        fn = attack_mod.marginals_sigma if base == "marginals-sigma" else attack_mod.marginals_pi
        sv = fn(target, synth, aux)
    else:
        if not args.structure:
            raise ConfigurationError(f"{args.attack} needs --structure")
        structure = _read_structure(args.structure)
        fn = {
            "tamis-mst": attack_mod.tamis_mst,
            "tamis-mst-avg": attack_mod.tamis_mst_avg,
            "hybrid-mst": attack_mod.hybrid_mst,
            "tamis-pb": attack_mod.tamis_pb,
            "hybrid-pb": attack_mod.hybrid_pb,
        }.get(base)
        if fn is None:
            raise ConfigurationError(f"unknown attack {args.attack!r}")
        sv = fn(target, structure, synth, aux)

    if args.prior is not None:
        probs, preds = attack_mod.activate_calibrated(sv, args.prior, args.threshold)
    else:
        probs, preds = attack_mod.activate_simple(sv, args.threshold)

    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        header = ["record_id", "household_id", "raw_score", "probability", "prediction"]
        if target.membership_label is not None:
            header.append("label")
        writer.writerow(header)
        for r in range(len(sv)):
            row = [
                r,
                int(target.household_id[r]) if target.household_id is not None else -1,
                f"{float(sv.scores[r]):.12g}",
                f"{float(probs[r]):.12g}",
                int(preds[r]),
            ]
            if target.membership_label is not None:
                row.append(int(target.membership_label[r]))
            writer.writerow(row)
    print(json.dumps({"scores": args.out, "records": len(sv)}))


def cmd_evaluate(args):
    with open(args.scores, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ConfigurationError(f"{args.scores}: no score rows")
    if "label" not in rows[0]:
        raise ConfigurationError(f"{args.scores}: has no 'label' column ({MEMBER_COLUMN} missing upstream)")
    scores = np.array([float(r["raw_score"]) for r in rows])
    preds = np.array([int(r["prediction"]) for r in rows])
    labels = np.array([int(r["label"]) for r in rows])
    out = {
        "auroc": evaluation.auroc(scores, labels),
        "balanced_accuracy": evaluation.balanced_accuracy(preds, labels),
        "n": len(rows),
    }
    text = json.dumps(out, indent=2, sort_keys=True)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    print(text)


def cmd_replicate(args):
    with open(args.config, encoding="utf-8") as fh:
        obj = json.load(fh)
    if args.out:
        obj["out_dir"] = args.out
    if args.seed is not None:
        obj["seed"] = args.seed
    cfg = harness.ExperimentConfig.from_json(obj)
    paths = harness.run_experiment(cfg)
    print(json.dumps({"files": paths}))


def _add_dp_args(p, delta_default=0.0):
    p.add_argument("--epsilon", default="inf", help="privacy budget; 'inf' disables noise")
    p.add_argument("--delta", type=float, default=delta_default)
    p.add_argument("--theta", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)


def build_parser():
    parser = argparse.ArgumentParser(prog="synthmia", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="fit a generator and sample synthetic data")
    p.add_argument("--data", required=True, help="training CSV")
    p.add_argument("--method", choices=(sdg.METHOD_MST, sdg.METHOD_PRIVBAYES), default=sdg.METHOD_MST)
    p.add_argument("--n-synth", type=int, default=10000)
    p.add_argument("--out", required=True, help="output directory")
    _add_dp_args(p, delta_default=1e-9)
    p.set_defaults(fn=cmd_generate)

    p = sub.add_parser("recover", help="estimate structure from synthetic data")
    p.add_argument("--synth", required=True)
    p.add_argument("--method", choices=(sdg.METHOD_MST, sdg.METHOD_PRIVBAYES), default=sdg.METHOD_MST)
    p.add_argument("--out", required=True)
    _add_dp_args(p)
    p.set_defaults(fn=cmd_recover)

    p = sub.add_parser("shadow", help="accumulate selection weights over shadow runs")
    p.add_argument("--aux", required=True)
    p.add_argument("--method", choices=(sdg.METHOD_MST, sdg.METHOD_PRIVBAYES), default=sdg.METHOD_MST)
    p.add_argument("--k", type=int, default=50)
    p.add_argument("--subset-size", type=int, required=True)
    p.add_argument("--out", required=True)
    _add_dp_args(p)
    p.set_defaults(fn=cmd_shadow)

    p = sub.add_parser("attack", help="score records against synthetic data")
    p.add_argument("--attack", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--synth", required=True)
    p.add_argument("--aux", required=True)
    p.add_argument("--structure", help="structure JSON from 'recover' or 'generate'")
    p.add_argument("--weights", help="shadow weights JSON from 'shadow'")
    p.add_argument("--prior", type=float, default=None, help="use calibrated activation with this prior")
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_attack)

    p = sub.add_parser("evaluate", help="metrics from a labeled scores CSV")
    p.add_argument("--scores", required=True)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("replicate", help="run the full experiment from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="override output directory")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(fn=cmd_replicate)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.fn(args)
    except SynthmiaError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1
    except OSError as exc:
        print(json.dumps({"error": "OSError", "message": str(exc)}), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
