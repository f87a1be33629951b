"""Command-line entry point: snapshot-build, mine-properties, train, predict, evaluate."""

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import ensemble as ens_mod
from . import hnn as hnn_mod
from . import p2vec as p2vec_mod
from . import predict as predict_mod
from .config import RunConfig, apply_overrides, load_config
from .encoder import EmbeddingTable, mean_word_vector
from .kb import (KBSnapshot, NTriplesParseError, QueryCache, RemoteKB,
                 build_snapshot, load_snapshot, save_snapshot)
from .sampler import Sample, build_training_set, extract_micro_tables
from .tables import (ClassCatalog, load_catalog, load_gold_labels,
                     load_table_csv, load_table_json)

EXIT_OK = 0
EXIT_PARSE_ERROR = 2
EXIT_MISMATCH = 3

ABLATIONS = {
    "fc": (False, False),
    "cnn-c": (True, False),
    "cnn-r": (False, True),
    "cnn-cr": (True, True),
}


def _err(msg):
    print("error: %s" % msg, file=sys.stderr)


def _load_kb(kb_spec, cache_dir=None, offline=False):
    if kb_spec is None:
        endpoint = os.environ.get("TABSEMA_KB_ENDPOINT")
        if endpoint:
            kb_spec = "endpoint:" + endpoint
    if kb_spec is None:
        raise ValueError("no KB configured (--kb or TABSEMA_KB_ENDPOINT)")
    if kb_spec.startswith("snapshot:"):
        return load_snapshot(kb_spec[len("snapshot:"):])
    if kb_spec.startswith("endpoint:"):
        cache_dir = cache_dir or os.environ.get("TABSEMA_CACHE_DIR")
        cache = QueryCache(cache_dir) if cache_dir else None
        return RemoteKB(kb_spec[len("endpoint:"):], cache=cache, offline=offline)
    raise ValueError("--kb must be snapshot:PATH or endpoint:URL")


def _load_tables(path):
    """Load one table file or a directory of .csv/.json tables, keyed by id."""
    path = Path(path)
    tables = {}
    if path.is_dir():
        entries = sorted(path.iterdir())
    else:
        entries = [path]
    for entry in entries:
        if entry.suffix == ".csv":
            t = load_table_csv(entry, table_id=entry.stem)
        elif entry.suffix == ".json":
            t = load_table_json(entry)
        else:
            continue
        tables[t.id] = t
    return tables


def _build_run_config(args):
    cfg = load_config(args.config) if args.config else RunConfig()
    overrides = {}
    for key in ("seed", "m", "l", "sigma", "alpha", "epochs",
                "batch_size", "learning_rate", "hidden", "attn_size",
                "t_len", "base_kind", "train_fraction"):
        if hasattr(args, key):
            overrides[key] = getattr(args, key)
    if getattr(args, "n_lookup", None) is not None:
        overrides["n_lookup"] = args.n_lookup
    if getattr(args, "ablation", None) is not None:
        col, row = ABLATIONS[args.ablation]
        overrides["use_conv_column"] = col
        overrides["use_conv_row"] = row
    if getattr(args, "no_att_birnn", False):
        overrides["use_att_birnn"] = False
    return apply_overrides(cfg, overrides)


# ---------------------------------------------------------------------------
# snapshot-build
# ---------------------------------------------------------------------------

def cmd_snapshot_build(args):
    try:
        snapshot = build_snapshot(args.ntriples)
    except NTriplesParseError as exc:
        _err(str(exc))
        return EXIT_PARSE_ERROR
    save_snapshot(snapshot, args.out)
    print("snapshot: %d entities, %d subjects with triples"
          % (len(snapshot.entities), len(snapshot.triples_by_subject)))
    return EXIT_OK


# ---------------------------------------------------------------------------
# mine-properties
# ---------------------------------------------------------------------------

def cmd_mine_properties(args):
    run_cfg = _build_run_config(args)
    catalog = load_catalog(args.catalog)
    kb = _load_kb(args.kb, args.cache_dir, args.offline)
    props = p2vec_mod.mine_candidate_properties(
        catalog, run_cfg.sigma, kb, log=lambda m: print(m, file=sys.stderr))
    p2vec_mod.save_properties(props, args.out)
    print(props.d1)
    return EXIT_OK


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------

def _labeled_columns(tables, gold, catalog):
    labeled = []
    for (table_id, column_index), class_id in sorted(gold.items()):
        if class_id not in catalog.index:
            raise KeyError("gold class %r not in catalog" % class_id)
        if table_id not in tables:
            raise KeyError("gold table %r not found" % table_id)
        labeled.append((tables[table_id], column_index, class_id))
    return labeled


def cmd_train(args):
    run_cfg = _build_run_config(args)
    catalog = load_catalog(args.catalog)
    tables = _load_tables(args.tables)
    gold = load_gold_labels(args.gold)
    emb = EmbeddingTable.load(args.embeddings)
    try:
        labeled = _labeled_columns(tables, gold, catalog)
    except KeyError as exc:
        _err(str(exc))
        return EXIT_MISMATCH

    samples = build_training_set(labeled, catalog, run_cfg.m, run_cfg.l)
    hnn_cfg = run_cfg.hnn_config(catalog.k, emb.dim)
    model = hnn_mod.HNNModel.init(hnn_cfg, run_cfg.seed)
    train_cfg = hnn_mod.TrainConfig(run_cfg.learning_rate, run_cfg.batch_size,
                                    run_cfg.epochs, run_cfg.seed)
    losses = hnn_mod.train(samples, train_cfg, model, emb,
                           log=lambda m: print(m, file=sys.stderr))

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cat_hash = hnn_mod.catalog_hash(catalog)
    hnn_mod.save_checkpoint(model, out / "hnn.ckpt", cat_hash)
    with open(out / "losses.json", "w", encoding="utf-8") as f:
        json.dump(losses, f)

    meta = {
        "fingerprint": run_cfg.fingerprint(),
        "catalog": [list(pair) for pair in catalog.classes],
        "catalog_hash": cat_hash,
        "embedding_dim": emb.dim,
        "scorers": ["hnn"],
        "run_config": json.loads(json.dumps(run_cfg.__dict__, default=list)),
    }

    if args.properties and args.kb:
        kb = _load_kb(args.kb, args.cache_dir, args.offline)
        props = p2vec_mod.load_properties(args.properties)
        p2vec_mod.save_properties(props, out / "properties.json")
        hnn_ref = ens_mod.model_fingerprint(model)
        feats_v, feats_e1, feats_e2, labels = [], [], [], []
        for s in samples:
            v = p2vec_mod.p2vec_extract(s.micro_table, props, run_cfg.n_lookup,
                                        run_cfg.alpha, kb)
            feats_v.append((v, s.label))
            feats_e1.append((ens_mod.main_cell_p2vec_features(
                s.micro_table, emb, run_cfg.t_len, v), s.label))
            feats_e2.append((ens_mod.fhnn_p2vec_features(
                s.micro_table, model, emb, v), s.label))
        base_cfg = ens_mod.BaseTrainConfig(epochs=run_cfg.base_epochs,
                                           seed=run_cfg.seed)
        base_v = ens_mod.train_base(feats_v, run_cfg.base_kind, catalog.k,
                                    run_cfg.base_hidden, base_cfg)
        base_e1 = ens_mod.train_base(feats_e1, run_cfg.base_kind, catalog.k,
                                     run_cfg.base_hidden, base_cfg)
        base_e2 = ens_mod.train_base(feats_e2, run_cfg.base_kind, catalog.k,
                                     run_cfg.base_hidden, base_cfg)
        ens_mod.save_base(base_v, out / "base_p2vec.npz")
        ens_mod.save_ensemble(ens_mod.EnsembleModel("I", base_e1, hnn_ref),
                              out / "ensemble1.npz")
        ens_mod.save_ensemble(ens_mod.EnsembleModel("II", base_e2, hnn_ref),
                              out / "ensemble2.npz")
        meta["scorers"] += ["p2vec", "ensemble1", "ensemble2"]

    with open(out / "meta.json", "w", encoding="utf-8") as f:
        json.dump(meta, f, indent=2, sort_keys=True)
    print("trained; final loss %.6f" % losses[-1])
    return EXIT_OK


# ---------------------------------------------------------------------------
# predict
# ---------------------------------------------------------------------------

def cmd_predict(args):
    model_dir = Path(args.model)
    meta_path = model_dir / "meta.json"
    if not meta_path.exists():
        _err("missing model metadata: %s" % meta_path)
        return EXIT_MISMATCH
    with open(meta_path, encoding="utf-8") as f:
        meta = json.load(f)
    catalog = ClassCatalog(meta["catalog"])
    run_cfg = apply_overrides(RunConfig(), meta["run_config"])
    tables = _load_tables(args.tables)
    targets = sorted(load_gold_labels(args.targets))

    needs_hnn = args.scorer in ("hnn", "ensemble1", "ensemble2")
    needs_kb = args.scorer in ("p2vec", "ensemble1", "ensemble2", "lookup-vote")
    model = emb = kb = props = None
    if needs_hnn:
        ckpt = model_dir / "hnn.ckpt"
        if not ckpt.exists():
            _err("missing checkpoint: %s" % ckpt)
            return EXIT_MISMATCH
        model, ckpt_hash = hnn_mod.load_checkpoint(ckpt)
        if ckpt_hash != hnn_mod.catalog_hash(catalog):
            _err("checkpoint catalog hash does not match model catalog")
            return EXIT_MISMATCH
        emb = EmbeddingTable.load(args.embeddings)
    if needs_kb:
        kb = _load_kb(args.kb, args.cache_dir, args.offline)
        if args.scorer != "lookup-vote":
            props_path = model_dir / "properties.json"
            if not props_path.exists():
                _err("model has no mined properties (train with --properties)")
                return EXIT_MISMATCH
            props = p2vec_mod.load_properties(props_path)

    if args.scorer == "hnn":
        scorer = predict_mod.make_hnn_scorer(model, emb)
    elif args.scorer == "p2vec":
        base = ens_mod.load_base(model_dir / "base_p2vec.npz")
        scorer = predict_mod.make_p2vec_scorer(base, props, kb,
                                               run_cfg.n_lookup, run_cfg.alpha)
    elif args.scorer == "ensemble1":
        ens = ens_mod.load_ensemble(model_dir / "ensemble1.npz")
        scorer = predict_mod.make_ensemble1_scorer(
            model, ens, emb, props, kb, run_cfg.n_lookup, run_cfg.alpha)
    elif args.scorer == "ensemble2":
        ens = ens_mod.load_ensemble(model_dir / "ensemble2.npz")
        scorer = predict_mod.make_ensemble2_scorer(
            model, ens, emb, props, kb, run_cfg.n_lookup, run_cfg.alpha)
    elif args.scorer == "lookup-vote":
        scorer = None
    else:
        raise ValueError("unknown scorer %r" % args.scorer)

    predictions = []
    for table_id, column_index in targets:
        if table_id not in tables:
            _err("target table %r not found" % table_id)
            return EXIT_MISMATCH
        table = tables[table_id]
        if args.scorer == "lookup-vote":
            predictions.append(predict_mod.lookup_vote(
                table.columns[column_index], table_id, column_index, kb,
                catalog, run_cfg.alpha, run_cfg.n_lookup))
        else:
            predictions.append(predict_mod.score_column(
                table, column_index, scorer, catalog, run_cfg.m, run_cfg.l))
    predict_mod.save_predictions(predictions, catalog, args.out,
                                 meta["fingerprint"])
    print("wrote %d predictions" % len(predictions))
    return EXIT_OK


# ---------------------------------------------------------------------------
# evaluate
# ---------------------------------------------------------------------------

def cmd_evaluate(args):
    predictions, fingerprint = predict_mod.load_predictions(args.predictions)
    if args.config:
        run_cfg = _build_run_config(args)
        if fingerprint and fingerprint != run_cfg.fingerprint() and not args.force:
            _err("predictions fingerprint does not match config (use --force)")
            return EXIT_MISMATCH
    gold = load_gold_labels(args.gold)
    try:
        report = predict_mod.evaluate(predictions, gold, fingerprint)
    except KeyError as exc:
        _err(str(exc))
        return EXIT_MISMATCH
    if args.out:
        predict_mod.save_report(report, args.out, args.text)
    print(predict_mod.format_report(report), end="")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _add_config_flags(p, training=False):
    p.add_argument("--config", help="INI-style config file; flags win")
    p.add_argument("--seed", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--l", type=int)
    p.add_argument("--sigma", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--n-lookup", dest="n_lookup", type=int)
    if training:
        p.add_argument("--epochs", type=int)
        p.add_argument("--batch-size", dest="batch_size", type=int)
        p.add_argument("--learning-rate", dest="learning_rate", type=float)
        p.add_argument("--hidden", type=int)
        p.add_argument("--attn-size", dest="attn_size", type=int)
        p.add_argument("--t-len", dest="t_len", type=int)
        p.add_argument("--base-kind", dest="base_kind", choices=["lr", "mlp"])
        p.add_argument("--ablation", choices=sorted(ABLATIONS))
        p.add_argument("--no-att-birnn", action="store_true")


def _add_kb_flags(p):
    p.add_argument("--kb", help="snapshot:PATH or endpoint:URL")
    p.add_argument("--cache-dir")
    p.add_argument("--offline", action="store_true")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="tabsema",
        description="Semantic type prediction for entity columns of tables.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("snapshot-build", help="build a KB snapshot from N-Triples")
    p.add_argument("ntriples")
    p.add_argument("out")
    p.set_defaults(func=cmd_snapshot_build)

    p = sub.add_parser("mine-properties", help="mine frequent candidate properties")
    p.add_argument("--catalog", required=True)
    p.add_argument("--out", required=True)
    _add_config_flags(p)
    _add_kb_flags(p)
    p.set_defaults(func=cmd_mine_properties)

    p = sub.add_parser("train", help="train the network and base classifiers")
    p.add_argument("--tables", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--catalog", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--properties", help="mined properties JSON (enables ensembles)")
    _add_config_flags(p, training=True)
    _add_kb_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="score target columns")
    p.add_argument("--model", required=True)
    p.add_argument("--tables", required=True)
    p.add_argument("--targets", required=True,
                   help="CSV of table_id,column_index[,ignored]")
    p.add_argument("--out", required=True)
    p.add_argument("--embeddings")
    p.add_argument("--scorer", default="hnn",
                   choices=["hnn", "ensemble1", "ensemble2", "p2vec",
                            "lookup-vote"])
    _add_kb_flags(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="accuracy report from predictions + gold")
    p.add_argument("--predictions", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--out")
    p.add_argument("--text")
    p.add_argument("--force", action="store_true")
    _add_config_flags(p)
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
