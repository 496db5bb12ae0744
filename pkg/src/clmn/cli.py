"""Command-line entry point.

Every command accepts ``--config FILE`` (flat ``key=value`` lines, ``#`` comments);
explicit flags override file values.  Each run writes ``config.resolved`` beside its
outputs, which can be fed back through ``--config`` to repeat the run.

Exit codes: 0 success, 1 validation or runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .datasets import SynthConfig, load_fnc, load_target, synth_generate
from .errors import ClmnError, ConfigError
from .gradcheck import gradcheck_params
from .memnet import NetConfig, StanceLabel, rank_evidence
from .metrics import evaluate, precision_at_k, random_precision_at_1
from .text import build_embedding_table, load_embeddings
from .trainer import (MODES, TrainConfig, TrainData, Trainer, alpha_sweep, build_vocab, clmn_losses, fit,
                      fold_assignment, load_model, predict, pretrain_source, split_train_dev)

SOURCE_BODIES = "source_bodies.csv"
SOURCE_STANCES = "source_stances.csv"
TARGET = "target.csv"
EMBEDDINGS = "embeddings.vec"


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


def _floats(text) -> tuple[float, ...]:
    if isinstance(text, tuple):
        return text
    try:
        return tuple(float(x) for x in str(text).split(",") if x.strip())
    except ValueError:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}") from None


@dataclass(frozen=True)
class Opt:
    name: str
    kind: Callable
    default: object
    help: str = ""


# emb_dim defaults to the width of the embeddings file
NET_OPTS = [Opt(f.name, int, None if f.name == "emb_dim" else f.default, "network size")
            for f in fields(NetConfig)]
TRAIN_OPTS = [
    Opt("mode", str, "clmn", f"one of {', '.join(MODES)}"),
    Opt("alpha", float, 0.7, "classification/alignment balance"),
    Opt("margin", float, 1.0, "SSA hinge margin"),
    Opt("epochs", int, 50, "maximum epochs"),
    Opt("pretrain_epochs", int, 30, "source pretraining epochs"),
    Opt("batch_size", int, 32, "pairs or examples per step"),
    Opt("lr", float, 1e-3, "Adam learning rate"),
    Opt("patience", int, 10, "early-stopping patience in epochs"),
    Opt("folds", int, 5, "cross-validation folds"),
    Opt("policy", str, "balanced", "pair sampling policy"),
    Opt("cover", str, "target", "pairs anchored on target only, or on both sets"),
] + NET_OPTS
DATA_OPTS = [Opt("data", str, None, "directory holding source_*.csv, target.csv, embeddings.vec")]
SYNTH_OPTS = [Opt("source_per_class", int, 60, "source examples per class"),
              Opt("target_per_class", int, 30, "target examples per class")] + [
    Opt(f.name, _bool if f.type in (bool, "bool") else type(f.default), f.default, "generator setting")
    for f in fields(SynthConfig) if f.name not in ("source_counts", "target_counts", "seed")]


def _all_folds_opts():
    return [Opt("fold", int, 0, "which fold is the test set"),
            Opt("all_folds", _bool, False, "run every fold and aggregate"),
            Opt("init", str, None, "pretrained checkpoint directory to start from")]


COMMANDS: dict[str, tuple[str, list[Opt]]] = {
    "synth-data": ("write a synthetic bilingual corpus", SYNTH_OPTS),
    "pretrain": ("pretrain the source network and classifier", DATA_OPTS + TRAIN_OPTS),
    "train": ("train one mode on a cross-validation split", DATA_OPTS + TRAIN_OPTS + _all_folds_opts()),
    "evaluate": ("score a checkpoint on a target file", [
        Opt("checkpoint", str, None, "checkpoint directory"),
        Opt("target", str, None, "target CSV (defaults to <data>/target.csv)")] + DATA_OPTS),
    "rank-evidence": ("rank target paragraphs by P^cnn", [
        Opt("checkpoint", str, None, "checkpoint directory"),
        Opt("target", str, None, "target CSV (defaults to <data>/target.csv)")] + DATA_OPTS),
    "gradcheck": ("finite-difference check of the full loss on a tiny model", [
        Opt("tolerance", float, 1e-4, "maximum allowed relative error"),
        Opt("alpha", float, 0.7, "loss balance"), Opt("margin", float, 1.0, "SSA margin")]),
    "alpha-sweep": ("mean dev macro-F1 over an alpha grid", DATA_OPTS + TRAIN_OPTS + [
        Opt("alphas", _floats, (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9), "comma-separated grid"),
        Opt("pretrained", _bool, False, "sweep clmn_pretrained instead of clmn")]),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="clmn", description="Cross-lingual memory networks for stance detection.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, (help_text, opts) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--config", help="key=value file; flags override it")
        p.add_argument("--out", help="output directory", required=name != "gradcheck")
        p.add_argument("--seed", type=int, default=None, help="run seed (default 0)")
        for o in opts:
            flag = "--" + o.name.replace("_", "-")
            if o.kind is _bool:
                p.add_argument(flag, dest=o.name, nargs="?", const="true", default=None, help=o.help)
            else:
                p.add_argument(flag, dest=o.name, default=None, help=o.help)
    return parser


def read_config_file(path) -> dict[str, str]:
    values = {}
    for no, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}: line {no}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        values[key.replace("-", "_")] = value
    return values


def resolve(command: str, args: argparse.Namespace) -> dict:
    """Defaults < config file < flags, converted to typed values."""
    opts = {o.name: o for o in COMMANDS[command][1]}
    opts["seed"] = Opt("seed", int, 0)
    values = {k: o.default for k, o in opts.items()}
    if args.config:
        for key, value in read_config_file(args.config).items():
            if key == "command":
                if value != command:
                    raise ConfigError(f"config was written for {value!r}, not {command!r}")
                continue
            if key not in opts:
                raise ConfigError(f"unknown config key {key!r} for {command}")
            values[key] = value
    for key in opts:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    out = {}
    for key, value in values.items():
        if value is None:
            out[key] = None
            continue
        try:
            out[key] = opts[key].kind(value)
        except (TypeError, ValueError):
            raise ConfigError(f"{key}: cannot parse {value!r}") from None
    return out


def _render(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(repr(float(v)) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_snapshot(out: Path, command: str, values: dict) -> None:
    lines = [f"command={command}"]
    lines += [f"{k}={_render(v)}" for k, v in sorted(values.items()) if v is not None]
    (out / "config.resolved").write_text("\n".join(lines) + "\n", encoding="utf-8")


def _require(values: dict, *keys: str) -> None:
    missing = [k for k in keys if values.get(k) is None]
    if missing:
        raise ConfigError("missing required setting(s): " + ", ".join("--" + k.replace("_", "-") for k in missing))


# -- builders -------------------------------------------------------------
def _net_config(v: dict) -> NetConfig:
    return NetConfig(**{f.name: v[f.name] for f in fields(NetConfig)})


def _train_config(v: dict, **over) -> TrainConfig:
    kw = {k: v[k] for k in ("mode", "alpha", "margin", "epochs", "pretrain_epochs", "batch_size", "lr",
                            "seed", "patience", "folds", "policy", "cover")}
    kw.update(over)
    return TrainConfig(net=_net_config(v), **kw)


@dataclass
class Corpus:
    source: list
    target: list
    vocab: object
    embeddings: object


def _load_corpus(v: dict, need_source: bool = True) -> Corpus:
    _require(v, "data")
    d = Path(v["data"])
    source = []
    if need_source or (d / SOURCE_STANCES).exists():
        source = load_fnc(d / SOURCE_BODIES, d / SOURCE_STANCES)
    target = load_target(d / TARGET, v["max_paragraphs"])
    vocab = build_vocab([source, target])
    emb = load_embeddings(d / EMBEDDINGS, vocab, v["emb_dim"])
    v["emb_dim"] = emb.dim
    return Corpus(source, target, vocab, emb)


def _fold_data(corpus: Corpus, cfg: TrainConfig, fold: int) -> TrainData:
    folds = fold_assignment(len(corpus.target), cfg.folds, cfg.seed)
    if not 0 <= fold < len(folds):
        raise ConfigError(f"fold must lie in [0, {len(folds) - 1}], got {fold}")
    test_idx = folds[fold]
    rest = np.setdiff1d(np.arange(len(corpus.target)), test_idx)
    train_idx, dev_idx = split_train_dev(rest, cfg.seed, fold)
    pick = lambda idx: [corpus.target[i] for i in idx]
    source = corpus.source if cfg.mode != "target_only" else []
    return TrainData(source=source, target_train=pick(train_idx), target_dev=pick(dev_idx),
                     vocab=corpus.vocab, embeddings=corpus.embeddings, target_test=pick(test_idx))


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


# -- commands -------------------------------------------------------------
def cmd_synth_data(v: dict, out: Path) -> None:
    kw = {f.name: v[f.name] for f in fields(SynthConfig)
          if f.name not in ("source_counts", "target_counts", "seed")}
    cfg = SynthConfig(source_counts=(v["source_per_class"],) * 4, target_counts=(v["target_per_class"],) * 4,
                      seed=v["seed"], **kw)
    synth_generate(cfg).write(out)


def cmd_pretrain(v: dict, out: Path) -> None:
    mode = v["mode"] if v["mode"] in ("pretrain_finetune", "clmn_pretrained") else "clmn_pretrained"
    corpus = _load_corpus(v)
    cfg = _train_config(v, mode=mode)
    pretrain_source(cfg, _fold_data(corpus, cfg, 0), out)


def cmd_train(v: dict, out: Path) -> None:
    corpus = _load_corpus(v, need_source=v["mode"] != "target_only")
    cfg = _train_config(v)
    init_state = None
    if v["init"]:
        init_state = load_model(v["init"]).model.state_dict()
    folds = range(cfg.folds) if v["all_folds"] else [v["fold"]]
    reports = []
    for f in folds:
        sub = out / f"fold_{f}" if v["all_folds"] else out
        res = fit(cfg, _fold_data(corpus, cfg, f), sub, init_state)
        if res.test_report is not None:
            _write_json(sub / "metrics.json", res.test_report.to_dict())
            reports.append(res.test_report)
        if res.dev_report is not None:
            _write_json(sub / "dev_metrics.json", res.dev_report.to_dict())
    if v["all_folds"] and reports:
        agg = {}
        for key in ("accuracy", "macro_f1", "weighted_accuracy"):
            vals = np.array([getattr(r, key) for r in reports])
            agg[key] = {"mean": float(vals.mean()), "std": float(vals.std())}
        _write_json(out / "cv_metrics.json", {"folds": [r.to_dict() for r in reports], "aggregate": agg})


def _eval_inputs(v: dict):
    _require(v, "checkpoint")
    loaded = load_model(v["checkpoint"])
    if v["target"] is None:
        _require(v, "data")
        path = Path(v["data"]) / TARGET
    else:
        path = Path(v["target"])
    examples = load_target(path, loaded.config.net.max_paragraphs)
    if not examples:
        raise ConfigError(f"{path} holds no examples")
    enc = [loaded.featurizer.encode(e) for e in examples]
    return loaded, examples, predict(loaded.net, loaded.model, loaded.featurizer, enc)


def cmd_evaluate(v: dict, out: Path) -> None:
    _, examples, preds = _eval_inputs(v)
    prec = None
    if any(r is not None and np.any(r) for r in preds.rationales):
        prec = precision_at_k(preds.p_cnn, preds.para_mask, preds.rationales)
    d = evaluate(preds.labels, preds.pred, prec).to_dict()
    if prec is not None:
        d["random_precision_at_1"] = random_precision_at_1(preds.para_mask, preds.rationales)
    _write_json(out / "metrics.json", d)
    with open(out / "predictions.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["example_id", "gold", "predicted"] + [f"p_{s}" for s in StanceLabel])
        for ex, g, p, probs in zip(examples, preds.labels, preds.pred, preds.probs):
            w.writerow([ex.example_id, str(StanceLabel(int(g))), str(StanceLabel(int(p)))]
                       + [repr(float(x)) for x in probs])


def cmd_rank_evidence(v: dict, out: Path) -> None:
    _, examples, preds = _eval_inputs(v)
    with open(out / "evidence.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["example_id", "rank", "paragraph_index", "p_cnn_score", "is_gold_rationale"])
        for ex, scores, mask, gold in zip(examples, preds.p_cnn, preds.para_mask, preds.rationales):
            for rank, j in enumerate(rank_evidence(scores, mask), 1):
                flag = "" if gold is None else str(int(bool(gold[j])))
                w.writerow([ex.example_id, rank, j + 1, repr(float(scores[j])), flag])


def tiny_gradcheck(seed: int = 0, alpha: float = 0.7, margin: float = 1.0):
    """Worst relative error of the full cross-lingual loss on a q=q'=4, l=2 model and one pair per label case."""
    synth = SynthConfig(source_counts=(1, 1, 1, 1), target_counts=(1, 1, 1, 1), n_topics=3, topic_vocab=3,
                        filler_vocab=4, claim_len=2, paragraphs=2, paragraph_len=3, topic_tokens_in_evidence=1,
                        emb_dim=3, seed=seed)
    corpus = synth_generate(synth)
    vocab = build_vocab([corpus.source, corpus.target])
    emb = build_embedding_table(dict(zip(corpus.words, corpus.vectors)), vocab, synth.emb_dim)
    net = NetConfig(emb_dim=3, lstm_hidden=4, cnn_filters=4, cnn_width=3, max_paragraphs=2, max_tokens=4)
    cfg = TrainConfig(mode="clmn", alpha=alpha, margin=margin, seed=seed, net=net)
    tr = Trainer(cfg, TrainData(corpus.source, corpus.target, corpus.target, vocab, emb))
    src = next(e for e in tr.src if e.label == 0)
    results = {}
    for same in (1, 0):
        tgt = next(e for e in tr.tgt if (e.label == 0) == bool(same))
        loss = lambda: clmn_losses(tr.model, tr.featurizer, [src], [tgt], np.array([same]), alpha, margin)[0]
        worst, per = gradcheck_params(loss, tr.model.named_parameters())
        results["same_label" if same else "different_label"] = {"max_rel_error": worst, "per_parameter": per}
    return max(r["max_rel_error"] for r in results.values()), results


def cmd_gradcheck(v: dict, out: Path | None) -> int:
    worst, results = tiny_gradcheck(v["seed"], v["alpha"], v["margin"])
    ok = worst < v["tolerance"]
    report = {"max_rel_error": worst, "tolerance": v["tolerance"], "passed": ok, "cases": results}
    if out is not None:
        _write_json(out / "gradcheck.json", report)
    print(f"gradcheck: max relative error {worst:.3e} ({'ok' if ok else 'FAILED'}, tolerance {v['tolerance']:g})")
    return 0 if ok else 1


def cmd_alpha_sweep(v: dict, out: Path) -> None:
    corpus = _load_corpus(v)
    cfg = _train_config(v)
    rows = alpha_sweep(cfg, v["alphas"], v["pretrained"], corpus.target, corpus.source, corpus.vocab,
                       corpus.embeddings)
    with open(out / "alpha_sweep.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["alpha", "pretrained", "dev_macro_f1"])
        for a, pre, f1 in rows:
            w.writerow([repr(a), "true" if pre else "false", repr(f1)])


HANDLERS = {
    "synth-data": cmd_synth_data,
    "pretrain": cmd_pretrain,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "rank-evidence": cmd_rank_evidence,
    "gradcheck": cmd_gradcheck,
    "alpha-sweep": cmd_alpha_sweep,
}


def run(argv: Sequence[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        values = resolve(args.command, args)
        out = Path(args.out) if args.out else None
        if out is not None:
            out.mkdir(parents=True, exist_ok=True)
            write_snapshot(out, args.command, values)
        code = HANDLERS[args.command](values, out)
        return int(code or 0)
    except (ClmnError, OSError, KeyError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"clmn {args.command}: error: {msg}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
