"""Training loops: mono-lingual baselines, source pretraining, and joint cross-lingual training.

A cross-lingual step takes a batch of (source, target) pairs, runs each side through
its own memory network, and averages the per-pair totals of both supervision roles::

    L_s = (1 - alpha) * CE(source) + alpha * CSA(pair)
    L_t = (1 - alpha) * CE(target) + alpha * CSA(pair)
    L   = mean({L_s} + {L_t})
"""

from __future__ import annotations

import csv
import json
import math
import zlib
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import tensor as T
from .adaptation import check_alpha, csa_loss, sample_pairs, total_loss, POLICIES, COVERS
from .checkpoint import load_checkpoint, save_checkpoint
from .datasets import StanceExample
from .errors import ConfigError, TrainingError
from .memnet import (CLMNModel, EncodedExample, Featurizer, MemoryNetwork, NetConfig,
                     forward_batch)
from .metrics import MetricReport, evaluate, precision_at_k
from .optim import Adam
from .text import EmbeddingTable, TfidfModel, Vocabulary, tokenize

MODES = ("target_only", "source_only", "pretrain_finetune", "clmn", "clmn_pretrained")
CROSS_MODES = ("clmn", "clmn_pretrained")
PRETRAIN_MODES = ("pretrain_finetune", "clmn_pretrained")
EPOCH_COLUMNS = ("epoch", "l_ca", "l_csa", "l_total", "dev_acc", "dev_macro_f1", "dev_weighted_acc")
DEV_LOSS_COLUMNS = ("epoch", "dev_l_ca", "dev_l_csa", "dev_l_total")


def sub_rng(seed: int, name: str) -> np.random.Generator:
    """Independent generator for a named component of a seeded run."""
    return np.random.default_rng([int(seed), zlib.crc32(name.encode())])


@dataclass(frozen=True)
class TrainConfig:
    mode: str = "clmn"
    alpha: float = 0.7
    margin: float = 1.0
    epochs: int = 50
    pretrain_epochs: int = 30
    batch_size: int = 32
    lr: float = 1e-3
    seed: int = 0
    patience: int = 10
    folds: int = 5
    policy: str = "balanced"
    cover: str = "target"
    net: NetConfig = field(default_factory=NetConfig)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; choose from {', '.join(MODES)}")
        check_alpha(self.alpha)
        if not self.margin > 0:
            raise ConfigError("margin must be > 0")
        for name in ("epochs", "batch_size", "patience"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.pretrain_epochs < 0:
            raise ConfigError("pretrain_epochs must be >= 0")
        if self.folds < 2:
            raise ConfigError("fold count must be >= 2")
        if self.lr <= 0:
            raise ConfigError("lr must be > 0")
        if self.policy not in POLICIES:
            raise ConfigError(f"unknown pairing policy {self.policy!r}")
        if self.cover not in COVERS:
            raise ConfigError(f"unknown pair cover {self.cover!r}")

    @property
    def eval_network(self) -> str:
        return "source" if self.mode == "source_only" else "target"

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class EpochLog:
    epoch: int
    l_ca: float
    l_csa: float
    l_total: float
    dev_acc: float = float("nan")
    dev_macro_f1: float = float("nan")
    dev_weighted_acc: float = float("nan")
    dev_l_ca: float = float("nan")
    dev_l_csa: float = float("nan")
    dev_l_total: float = float("nan")


@dataclass
class TrainData:
    source: list[StanceExample]
    target_train: list[StanceExample]
    target_dev: list[StanceExample]
    vocab: Vocabulary
    embeddings: EmbeddingTable
    target_test: list[StanceExample] = field(default_factory=list)


@dataclass
class FitResult:
    model: CLMNModel
    featurizer: Featurizer
    config: TrainConfig
    logs: list[EpochLog]
    pretrain_logs: list[EpochLog]
    best_epoch: int
    dev_report: MetricReport | None
    test_report: MetricReport | None


def build_vocab(example_sets: Iterable[Iterable[StanceExample]]) -> Vocabulary:
    vocab = Vocabulary()
    for examples in example_sets:
        for ex in examples:
            for tok in tokenize(ex.claim):
                vocab.add(tok)
            for tok in tokenize(ex.document):
                vocab.add(tok)
    return vocab


def fit_tfidf(examples: Sequence[StanceExample]) -> TfidfModel:
    """One TF.IDF "document" per article and one per claim."""
    docs = []
    for ex in examples:
        docs.append(tokenize(ex.document))
        docs.append(tokenize(ex.claim))
    return TfidfModel.fit(docs)


# -- per-step losses ------------------------------------------------------
def _finite(name: str, arr: np.ndarray) -> None:
    if not np.all(np.isfinite(arr)):
        raise TrainingError(f"non-finite {name} encountered")


def supervised_losses(net: MemoryNetwork, model: CLMNModel, featurizer: Featurizer,
                      examples: Sequence[EncodedExample]) -> T.Tensor:
    batch = featurizer.collate(examples)
    trace = forward_batch(net, model.classifier, batch)
    ce = T.cross_entropy(trace.logits, batch.labels)
    _finite("L_CA", ce.data)
    return ce


@dataclass
class StepStats:
    n_terms: int
    sum_ca: float
    sum_csa: float
    sum_total: float


def clmn_losses(model: CLMNModel, featurizer: Featurizer, src: Sequence[EncodedExample],
                tgt: Sequence[EncodedExample], same: np.ndarray, alpha: float, margin: float):
    """Mean loss over both supervision roles for a batch of pairs, plus bookkeeping sums."""
    sb, tb = featurizer.collate(src), featurizer.collate(tgt)
    ts = forward_batch(model.source, model.classifier, sb)
    tt = forward_batch(model.target, model.classifier, tb)
    ce_s = T.cross_entropy(ts.logits, sb.labels)
    ce_t = T.cross_entropy(tt.logits, tb.labels)
    csa = csa_loss(ts.r, tt.r, same, margin)
    for name, arr in (("source L_CA", ce_s.data), ("target L_CA", ce_t.data), ("L_CSA", csa.data)):
        _finite(name, arr)
    l_s = total_loss(ce_s, csa, alpha)
    l_t = total_loss(ce_t, csa, alpha)
    per = T.concat([l_s, l_t], axis=0)
    loss = T.mean(per)
    _finite("total loss", loss.data)
    stats = StepStats(n_terms=2 * len(same),
                      sum_ca=float(ce_s.data.sum() + ce_t.data.sum()),
                      sum_csa=float(2.0 * csa.data.sum()),
                      sum_total=float(per.data.sum()))
    return loss, stats


def clmn_step(model: CLMNModel, featurizer: Featurizer, optimizer: Adam,
              src: Sequence[EncodedExample], tgt: Sequence[EncodedExample], same: np.ndarray,
              alpha: float, margin: float) -> StepStats:
    loss, stats = clmn_losses(model, featurizer, src, tgt, same, alpha, margin)
    optimizer.zero_grad()
    loss.backward()
    optimizer.step()
    return stats


# -- inference ------------------------------------------------------------
@dataclass
class Predictions:
    probs: np.ndarray
    r: np.ndarray
    p_cnn: np.ndarray
    para_mask: np.ndarray
    labels: np.ndarray
    rationales: list

    @property
    def pred(self) -> np.ndarray:
        return np.argmax(self.probs, axis=1)


def predict(net: MemoryNetwork, model: CLMNModel, featurizer: Featurizer,
            examples: Sequence[EncodedExample], batch_size: int = 64) -> Predictions:
    probs, rs, pc, masks = [], [], [], []
    with T.no_grad():
        for start in range(0, len(examples), batch_size):
            chunk = examples[start:start + batch_size]
            tr = forward_batch(net, model.classifier, featurizer.collate(chunk))
            probs.append(tr.probs.data)
            rs.append(tr.r.data)
            pc.append(tr.p_cnn.data)
            masks.append(tr.para_mask)
    return Predictions(probs=np.concatenate(probs), r=np.concatenate(rs), p_cnn=np.concatenate(pc),
                       para_mask=np.concatenate(masks),
                       labels=np.array([e.label for e in examples], dtype=np.int64),
                       rationales=[e.rationale for e in examples])


def report(preds: Predictions, with_precision: bool = True) -> MetricReport:
    prec = None
    if with_precision and any(r is not None and np.any(r) for r in preds.rationales):
        prec = precision_at_k(preds.p_cnn, preds.para_mask, preds.rationales)
    return evaluate(preds.labels, preds.pred, prec)


# -- trainer --------------------------------------------------------------
class _CsvSink:
    def __init__(self, path: Path | None, columns: Sequence[str]):
        self.columns = columns
        self.fh = None
        if path is not None:
            self.fh = open(path, "w", newline="", encoding="utf-8")
            self.w = csv.writer(self.fh, lineterminator="\n")
            self.w.writerow(columns)
            self.fh.flush()

    def write(self, log: EpochLog) -> None:
        if self.fh is None:
            return
        self.w.writerow([_fmt(getattr(log, c)) for c in self.columns])
        self.fh.flush()

    def close(self) -> None:
        if self.fh is not None:
            self.fh.close()


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_epoch_csv(logs: Sequence[EpochLog], path, columns: Sequence[str] = EPOCH_COLUMNS) -> None:
    sink = _CsvSink(Path(path), columns)
    for log in logs:
        sink.write(log)
    sink.close()


def read_epoch_csv(path) -> list[dict[str, float]]:
    with open(path, newline="", encoding="utf-8") as fh:
        return [{k: float(v) for k, v in row.items()} for row in csv.DictReader(fh)]


class Trainer:
    """Runs one configuration on one data split."""

    def __init__(self, cfg: TrainConfig, data: TrainData):
        self.cfg = cfg
        self.data = data
        needs_source = cfg.mode != "target_only"
        needs_target = cfg.mode != "source_only"
        if needs_source and not data.source:
            raise ConfigError(f"mode {cfg.mode} requires source data")
        if needs_target and not data.target_train:
            raise ConfigError(f"mode {cfg.mode} requires target training data")
        if data.embeddings.dim != cfg.net.emb_dim:
            raise ConfigError(f"embedding dim {data.embeddings.dim} != configured emb_dim {cfg.net.emb_dim}")
        # Without target training text (source_only), target slots fall back to source statistics.
        src_tfidf = fit_tfidf(data.source) if data.source else TfidfModel({}, 0)
        tfidf = {"source": src_tfidf,
                 "target": fit_tfidf(data.target_train) if data.target_train else src_tfidf}
        self.featurizer = Featurizer(data.vocab, data.embeddings, tfidf,
                                     cfg.net.max_paragraphs, cfg.net.max_tokens)
        self.model = CLMNModel(cfg.net, seed=int(sub_rng(cfg.seed, "init").integers(2**31)))
        enc = self.featurizer.encode
        self.src = [enc(e) for e in data.source]
        self.tgt = [enc(e) for e in data.target_train]
        self.dev = [enc(replace(e, language="target")) for e in data.target_dev]
        self.test = [enc(replace(e, language="target")) for e in data.target_test]
        self._dev_pairs = None

    # Evaluation of target examples always uses the target TF.IDF model; the
    # source-only baseline then runs them through the source network.
    @property
    def eval_net(self) -> MemoryNetwork:
        return self.model.network(self.cfg.eval_network)

    def _batches(self, n: int, rng: np.random.Generator):
        order = rng.permutation(n)
        bs = self.cfg.batch_size
        return [order[i:i + bs] for i in range(0, n, bs)]

    def _supervised_epoch(self, net, examples, optimizer, rng) -> tuple[float, int]:
        total, count = 0.0, 0
        for idx in self._batches(len(examples), rng):
            ce = supervised_losses(net, self.model, self.featurizer, [examples[i] for i in idx])
            loss = T.mean(ce)
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            total += float(ce.data.sum())
            count += len(idx)
        return total, count

    def _dev_snapshot(self, log: EpochLog, with_cross: bool) -> MetricReport | None:
        if not self.dev:
            return None
        preds = predict(self.eval_net, self.model, self.featurizer, self.dev)
        rep = report(preds, with_precision=False)
        log.dev_acc, log.dev_macro_f1, log.dev_weighted_acc = rep.accuracy, rep.macro_f1, rep.weighted_accuracy
        probs = np.clip(preds.probs[np.arange(len(preds.labels)), preds.labels], 1e-300, None)
        log.dev_l_ca = float(np.mean(-np.log(probs)))
        if with_cross and self.src:
            if self._dev_pairs is None:
                self._dev_pairs = sample_pairs([e.label for e in self.src], [e.label for e in self.dev],
                                               self.cfg.policy, sub_rng(self.cfg.seed, "dev-pairs"))
            pairs = self._dev_pairs
            with T.no_grad():
                loss, st = clmn_losses(self.model, self.featurizer, [self.src[p.source] for p in pairs],
                                       [self.dev[p.target] for p in pairs],
                                       np.array([p.same for p in pairs]), self.cfg.alpha, self.cfg.margin)
            log.dev_l_ca = st.sum_ca / st.n_terms
            log.dev_l_csa = st.sum_csa / st.n_terms
            log.dev_l_total = st.sum_total / st.n_terms
        else:
            log.dev_l_csa = 0.0
            log.dev_l_total = log.dev_l_ca
        return rep

    def pretrain(self, sink: _CsvSink | None = None) -> list[EpochLog]:
        """Source network + classifier on source cross-entropy, then copy source into target."""
        params = self.model.named_parameters(("source", "shared"))
        opt = Adam(params, lr=self.cfg.lr)
        rng = sub_rng(self.cfg.seed, "pretrain-shuffle")
        logs = []
        for epoch in range(1, self.cfg.pretrain_epochs + 1):
            total, count = self._supervised_epoch(self.model.source, self.src, opt, rng)
            log = EpochLog(epoch, total / count, 0.0, total / count)
            preds = predict(self.model.source, self.model, self.featurizer, self.src)
            rep = report(preds, with_precision=False)
            log.dev_acc, log.dev_macro_f1, log.dev_weighted_acc = rep.accuracy, rep.macro_f1, rep.weighted_accuracy
            logs.append(log)
            if sink:
                sink.write(log)
        self.model.target.copy_from(self.model.source)
        return logs

    def run(self, out_dir=None, init_state: dict[str, np.ndarray] | None = None) -> FitResult:
        """Train and evaluate.  ``init_state`` (a pretrained state dict) replaces the pretraining phase."""
        cfg = self.cfg
        out = Path(out_dir) if out_dir is not None else None
        if out is not None:
            out.mkdir(parents=True, exist_ok=True)
        sink = _CsvSink(out / "epochs.csv" if out else None, EPOCH_COLUMNS)
        dev_sink = _CsvSink(out / "dev_losses.csv" if out else None, DEV_LOSS_COLUMNS)
        pre_sink = None
        try:
            pretrain_logs = []
            if init_state is not None:
                self.model.load_state_dict(init_state)
                if cfg.mode in PRETRAIN_MODES:
                    self.model.target.copy_from(self.model.source)
            elif cfg.mode in PRETRAIN_MODES:
                pre_sink = _CsvSink(out / "pretrain_epochs.csv" if out else None, EPOCH_COLUMNS)
                pretrain_logs = self.pretrain(pre_sink)
            logs, best_epoch, best_state, best_dev = self._main_loop(sink, dev_sink)
        finally:
            for s in (sink, dev_sink, pre_sink):
                if s is not None:
                    s.close()
        self.model.load_state_dict(best_state)
        test_report = None
        if self.test:
            test_report = report(predict(self.eval_net, self.model, self.featurizer, self.test))
        result = FitResult(self.model, self.featurizer, cfg, logs, pretrain_logs, best_epoch,
                           best_dev, test_report)
        if out is not None:
            save_model(out / "checkpoint", result)
        return result

    def _main_loop(self, sink, dev_sink):
        cfg = self.cfg
        cross = cfg.mode in CROSS_MODES
        if cfg.mode == "source_only":
            net, examples = self.model.source, self.src
            params = self.model.named_parameters(("source", "shared"))
        elif cross:
            params = self.model.named_parameters()
        else:
            net, examples = self.model.target, self.tgt
            params = self.model.named_parameters(("target", "shared"))
        opt = Adam(params, lr=cfg.lr)
        shuffle = sub_rng(cfg.seed, "shuffle")
        sampler = sub_rng(cfg.seed, "sampler")
        logs = []
        best_f1, best_epoch, best_state, best_dev = -math.inf, 0, self.model.state_dict(), None
        bad = 0
        for epoch in range(1, cfg.epochs + 1):
            if cross:
                log = self._cross_epoch(epoch, opt, sampler)
            else:
                total, count = self._supervised_epoch(net, examples, opt, shuffle)
                log = EpochLog(epoch, total / count, 0.0, total / count)
            rep = self._dev_snapshot(log, cross)
            logs.append(log)
            sink.write(log)
            dev_sink.write(log)
            score = rep.macro_f1 if rep is not None else -log.l_total
            if score > best_f1:
                best_f1, best_epoch, best_state, best_dev = score, epoch, self.model.state_dict(), rep
                bad = 0
            else:
                bad += 1
                if bad >= cfg.patience:
                    break
        return logs, best_epoch, best_state, best_dev

    def _cross_epoch(self, epoch: int, opt: Adam, sampler: np.random.Generator) -> EpochLog:
        cfg = self.cfg
        pairs = sample_pairs([e.label for e in self.src], [e.label for e in self.tgt], cfg.policy,
                             sampler, cfg.cover)
        n, s_ca, s_csa, s_tot = 0, 0.0, 0.0, 0.0
        for start in range(0, len(pairs), cfg.batch_size):
            chunk = pairs[start:start + cfg.batch_size]
            st = clmn_step(self.model, self.featurizer, opt, [self.src[p.source] for p in chunk],
                           [self.tgt[p.target] for p in chunk], np.array([p.same for p in chunk]),
                           cfg.alpha, cfg.margin)
            n += st.n_terms
            s_ca += st.sum_ca
            s_csa += st.sum_csa
            s_tot += st.sum_total
        return EpochLog(epoch, s_ca / n, s_csa / n, s_tot / n)


def fit(cfg: TrainConfig, data: TrainData, out_dir=None, init_state=None) -> FitResult:
    return Trainer(cfg, data).run(out_dir, init_state)


def pretrain_source(cfg: TrainConfig, data: TrainData, out_dir=None) -> CLMNModel:
    """Pretrain only; the returned model has target.* == source.*."""
    if cfg.mode not in PRETRAIN_MODES:
        raise ConfigError(f"pretraining requires mode pretrain_finetune or clmn_pretrained, got {cfg.mode}")
    if not data.source:
        raise ConfigError("pretraining requires source data")
    tr = Trainer(cfg, data)
    out = Path(out_dir) if out_dir is not None else None
    sink = None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        sink = _CsvSink(out / "pretrain_epochs.csv", EPOCH_COLUMNS)
    try:
        logs = tr.pretrain(sink)
    finally:
        if sink:
            sink.close()
    if out is not None:
        save_model(out / "checkpoint", FitResult(tr.model, tr.featurizer, cfg, [], logs,
                                                 len(logs), None, None))
    return tr.model


# -- checkpoint of a whole fitted model -----------------------------------
def save_model(directory, result: FitResult) -> Path:
    directory = Path(directory)
    params = result.model.state_dict()
    params["frozen.embeddings"] = result.featurizer.embeddings.vectors
    meta = {
        "train_config": _config_json(result.config),
        "eval_network": result.config.eval_network,
        "best_epoch": result.best_epoch,
    }
    save_checkpoint(directory, params, meta)
    result.featurizer.vocab.save(directory / "vocab.txt")
    tfidf = {k: v.to_dict() for k, v in sorted(result.featurizer.tfidf.items())}
    (directory / "tfidf.json").write_text(json.dumps(tfidf, sort_keys=True, indent=1) + "\n")
    return directory


def _config_json(cfg: TrainConfig) -> dict:
    return asdict(cfg)


def config_from_json(d: dict) -> TrainConfig:
    d = dict(d)
    d["net"] = NetConfig(**d["net"])
    return TrainConfig(**d)


@dataclass
class LoadedModel:
    model: CLMNModel
    featurizer: Featurizer
    config: TrainConfig
    eval_network: str

    @property
    def net(self) -> MemoryNetwork:
        return self.model.network(self.eval_network)


def load_model(directory) -> LoadedModel:
    directory = Path(directory)
    params, meta = load_checkpoint(directory)
    cfg = config_from_json(meta["train_config"])
    model = CLMNModel(cfg.net)
    emb = params.pop("frozen.embeddings")
    model.load_state_dict(params)
    vocab = Vocabulary.load(directory / "vocab.txt")
    tfidf = {k: TfidfModel.from_dict(v) for k, v in json.loads((directory / "tfidf.json").read_text()).items()}
    feat = Featurizer(vocab, EmbeddingTable(emb, frozen=True), tfidf, cfg.net.max_paragraphs, cfg.net.max_tokens)
    return LoadedModel(model, feat, cfg, meta["eval_network"])


# -- cross-validation and alpha sweep -------------------------------------
def fold_assignment(n: int, k: int, seed: int) -> list[np.ndarray]:
    """Seeded partition of range(n) into k folds whose sizes differ by at most one."""
    if k < 2:
        raise ConfigError("fold count must be >= 2")
    if n < k:
        raise ConfigError(f"dataset of {n} examples is smaller than the fold count {k}")
    perm = sub_rng(seed, "folds").permutation(n)
    return [np.sort(part) for part in np.array_split(perm, k)]


def split_train_dev(indices: np.ndarray, seed: int, fold: int) -> tuple[np.ndarray, np.ndarray]:
    """80/20 split; train gets floor(0.8 n), dev gets the remainder."""
    perm = sub_rng(seed, f"dev-split-{fold}").permutation(indices)
    n_train = int(math.floor(0.8 * len(perm)))
    return np.sort(perm[:n_train]), np.sort(perm[n_train:])


@dataclass
class CVResult:
    fold_reports: list[MetricReport]
    dev_reports: list[MetricReport]
    fits: list[FitResult]

    def aggregate(self) -> dict[str, dict[str, float]]:
        out = {}
        for key in ("accuracy", "macro_f1", "weighted_accuracy"):
            vals = np.array([getattr(r, key) for r in self.fold_reports])
            out[key] = {"mean": float(vals.mean()), "std": float(vals.std())}
        dev = np.array([r.macro_f1 for r in self.dev_reports if r is not None])
        if dev.size:
            out["dev_macro_f1"] = {"mean": float(dev.mean()), "std": float(dev.std())}
        return out


def cross_validate(cfg: TrainConfig, target: Sequence[StanceExample], source: Sequence[StanceExample],
                   vocab: Vocabulary, embeddings: EmbeddingTable, out_dir=None) -> CVResult:
    folds = fold_assignment(len(target), cfg.folds, cfg.seed)
    reports, devs, fits = [], [], []
    for f, test_idx in enumerate(folds):
        rest = np.setdiff1d(np.arange(len(target)), test_idx)
        train_idx, dev_idx = split_train_dev(rest, cfg.seed, f)
        data = TrainData(source=list(source), target_train=[target[i] for i in train_idx],
                         target_dev=[target[i] for i in dev_idx], vocab=vocab, embeddings=embeddings,
                         target_test=[target[i] for i in test_idx])
        sub = Path(out_dir) / f"fold_{f}" if out_dir is not None else None
        res = fit(cfg, data, sub)
        reports.append(res.test_report)
        devs.append(res.dev_report)
        fits.append(res)
    return CVResult(reports, devs, fits)


def alpha_sweep(cfg: TrainConfig, alphas: Sequence[float], pretrained: bool,
                target: Sequence[StanceExample], source: Sequence[StanceExample], vocab: Vocabulary,
                embeddings: EmbeddingTable) -> list[tuple[float, bool, float]]:
    """Mean best-dev macro-F1 across CV folds for each alpha."""
    mode = "clmn_pretrained" if pretrained else "clmn"
    rows = []
    for a in alphas:
        res = cross_validate(replace(cfg, mode=mode, alpha=float(a)), target, source, vocab, embeddings)
        dev = [r.macro_f1 for r in res.dev_reports if r is not None]
        rows.append((float(a), pretrained, float(np.mean(dev))))
    return rows


def best_alpha(rows: Sequence[tuple[float, bool, float]]) -> float:
    """Argmax of dev macro-F1; ties resolve to the earliest grid entry."""
    best = max(range(len(rows)), key=lambda i: (rows[i][2], -i))
    return rows[best][0]
