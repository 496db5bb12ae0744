"""Corpus ingestion and the synthetic bilingual stance generator.

Source corpora use the Fake News Challenge CSV pair (bodies + stances).  Target
corpora use a single CSV with columns ``id,claim,document,stance,rationale`` where
``id`` and ``rationale`` are optional.  ``rationale`` holds ``index:flag`` entries
separated by ``;`` with 1-based paragraph indices, e.g. ``1:0;2:1``.  Documents keep
their paragraphs separated by blank lines; standard CSV quoting handles newlines.
"""

from __future__ import annotations

import csv
import io
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, DataError, ParseError
from .memnet import StanceLabel
from .text import MAX_PARAGRAPHS, split_paragraphs, write_word_vectors


@dataclass(frozen=True)
class StanceExample:
    claim: str
    document: str
    label: StanceLabel
    language: str
    example_id: str
    rationale: tuple[bool, ...] | None = None


def _read_rows(path, required: Sequence[str], optional: Sequence[str] = ()) -> list[tuple[int, dict]]:
    try:
        text = Path(path).read_text(encoding="utf-8-sig")
    except OSError as e:
        raise ParseError(f"cannot read {path}: {e}") from None
    reader = csv.reader(io.StringIO(text, newline=""))
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError(f"{path} is empty", line=1) from None
    except csv.Error as e:
        raise ParseError(f"{path}: {e}", line=reader.line_num) from None
    header = [h.strip() for h in header]
    missing = [c for c in required if c not in header]
    if missing:
        raise ParseError(f"{path}: missing column(s) {', '.join(missing)}", line=1)
    rows = []
    row_no = 1
    while True:
        try:
            row = next(reader)
        except StopIteration:
            break
        except csv.Error as e:
            raise ParseError(f"{path}: {e}", line=reader.line_num) from None
        row_no += 1
        if not row:
            continue
        if len(row) != len(header):
            raise ParseError(f"{path}: row {row_no} has {len(row)} fields, header has {len(header)}",
                             line=row_no)
        rows.append((row_no, dict(zip(header, row))))
    return rows


def _parse_label(text: str, path, row_no: int) -> StanceLabel:
    try:
        return StanceLabel.parse(text)
    except DataError:
        raise DataError(f"{path}: row {row_no}: unknown stance {text!r}") from None


def load_fnc(bodies_path, stances_path) -> list[StanceExample]:
    bodies = {}
    for row_no, row in _read_rows(bodies_path, ("Body ID", "articleBody")):
        bodies[row["Body ID"].strip()] = row["articleBody"]
    examples = []
    unknown = []
    for i, (row_no, row) in enumerate(_read_rows(stances_path, ("Headline", "Body ID", "Stance"))):
        body_id = row["Body ID"].strip()
        if body_id not in bodies:
            unknown.append(body_id)
            continue
        examples.append(StanceExample(
            claim=row["Headline"], document=bodies[body_id],
            label=_parse_label(row["Stance"], stances_path, row_no),
            language="source", example_id=str(i)))
    if unknown:
        raise DataError(f"{stances_path}: unknown Body ID(s): {', '.join(sorted(set(unknown)))}")
    return examples


def write_fnc(examples: Iterable[StanceExample], bodies_path, stances_path) -> None:
    body_ids: dict[str, int] = {}
    stance_rows = []
    for ex in examples:
        bid = body_ids.setdefault(ex.document, len(body_ids))
        stance_rows.append([ex.claim, str(bid), str(ex.label)])
    with open(bodies_path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["Body ID", "articleBody"])
        for doc, bid in body_ids.items():
            w.writerow([str(bid), doc])
    with open(stances_path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["Headline", "Body ID", "Stance"])
        w.writerows(stance_rows)


def _parse_rationale(cell: str, n_real: int, path, row_no: int) -> tuple[bool, ...]:
    flags = [False] * n_real
    for entry in cell.split(";"):
        entry = entry.strip()
        if not entry:
            continue
        try:
            idx_s, flag_s = entry.split(":")
            idx, flag = int(idx_s), int(flag_s)
        except ValueError:
            raise ParseError(f"{path}: bad rationale entry {entry!r}", line=row_no) from None
        if flag not in (0, 1):
            raise ParseError(f"{path}: rationale flag must be 0 or 1 in {entry!r}", line=row_no)
        if not 1 <= idx <= n_real:
            raise DataError(f"{path}: row {row_no}: rationale paragraph {idx} outside 1..{n_real}")
        flags[idx - 1] = bool(flag)
    return tuple(flags)


def load_target(path, max_paragraphs: int = MAX_PARAGRAPHS) -> list[StanceExample]:
    examples = []
    for i, (row_no, row) in enumerate(_read_rows(path, ("claim", "document", "stance"))):
        label = _parse_label(row["stance"], path, row_no)
        cell = (row.get("rationale") or "").strip()
        rationale = None
        if cell:
            if not label.related:
                raise DataError(f"{path}: row {row_no}: rationale given for an unrelated example")
            n_real = sum(not p.padding for p in split_paragraphs(row["document"], max_paragraphs))
            rationale = _parse_rationale(cell, n_real, path, row_no)
        examples.append(StanceExample(
            claim=row["claim"], document=row["document"], label=label, language="target",
            example_id=(row.get("id") or "").strip() or str(i), rationale=rationale))
    return examples


def write_target(examples: Iterable[StanceExample], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "claim", "document", "stance", "rationale"])
        for ex in examples:
            rat = ""
            if ex.rationale is not None:
                rat = ";".join(f"{j + 1}:{int(f)}" for j, f in enumerate(ex.rationale))
            w.writerow([ex.example_id, ex.claim, ex.document, str(ex.label), rat])


# -- synthetic bilingual corpus ------------------------------------------
@dataclass(frozen=True)
class SynthConfig:
    source_counts: tuple[int, int, int, int] = (60, 60, 60, 60)
    target_counts: tuple[int, int, int, int] = (30, 30, 30, 30)
    n_topics: int = 20
    topic_vocab: int = 6
    filler_vocab: int = 60
    markers_per_class: int = 3
    signal: float = 1.0
    paragraphs: int = 4
    claim_len: int = 4
    paragraph_len: int = 8
    topic_tokens_in_evidence: int = 2
    rationale_fraction: float = 1.0
    emb_dim: int = 16
    noise: float = 0.1
    topic_cohesion: float = 0.0
    disjoint_evidence: bool = False
    seed: int = 0

    def __post_init__(self):
        for counts in (self.source_counts, self.target_counts):
            if len(counts) != 4 or min(counts) < 1:
                raise ConfigError(f"class counts must be four values >= 1, got {counts}")
        if not 0.0 <= self.signal <= 1.0:
            raise ConfigError(f"signal strength must lie in [0, 1], got {self.signal}")
        if not 0.0 <= self.rationale_fraction <= 1.0:
            raise ConfigError("rationale_fraction must lie in [0, 1]")
        if self.n_topics < 2:
            raise ConfigError("need at least two topics so unrelated pairs exist")
        if self.claim_len > self.topic_vocab or self.topic_tokens_in_evidence > self.topic_vocab:
            raise ConfigError("claim_len and topic_tokens_in_evidence must not exceed topic_vocab")
        if self.paragraph_len < self.topic_tokens_in_evidence + 1:
            raise ConfigError("paragraph_len too small to hold topic tokens and a marker")
        if not 0.0 <= self.topic_cohesion < 1.0:
            raise ConfigError("topic_cohesion must lie in [0, 1)")
        if self.disjoint_evidence and self.claim_len + self.topic_tokens_in_evidence > self.topic_vocab:
            raise ConfigError("disjoint evidence needs claim_len + topic_tokens_in_evidence <= topic_vocab")


@dataclass
class SynthCorpus:
    source: list[StanceExample]
    target: list[StanceExample]
    words: list[str]
    vectors: np.ndarray
    config: SynthConfig
    markers: dict[str, dict[StanceLabel, list[str]]] = field(default_factory=dict)
    topics: dict[str, list[list[str]]] = field(default_factory=dict)

    def write(self, out_dir) -> dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {"source_bodies": out / "source_bodies.csv", "source_stances": out / "source_stances.csv",
                 "target": out / "target.csv", "embeddings": out / "embeddings.vec"}
        write_fnc(self.source, paths["source_bodies"], paths["source_stances"])
        write_target(self.target, paths["target"])
        write_word_vectors(paths["embeddings"], self.words, self.vectors)
        return paths


def _lexicon(prefix: str, cfg: SynthConfig):
    topics = [[f"{prefix}top{k}x{i}" for i in range(cfg.topic_vocab)] for k in range(cfg.n_topics)]
    filler = [f"{prefix}fil{i}" for i in range(cfg.filler_vocab)]
    markers = {StanceLabel.AGREE: [f"{prefix}agr{i}" for i in range(cfg.markers_per_class)],
               StanceLabel.DISAGREE: [f"{prefix}dis{i}" for i in range(cfg.markers_per_class)]}
    return topics, filler, markers


def _make_example(rng, cfg, label: StanceLabel, topics, filler, markers, language, idx, with_rationale):
    k = int(rng.integers(cfg.n_topics))
    claim_idx = rng.choice(cfg.topic_vocab, cfg.claim_len, replace=False)
    claim = [topics[k][i] for i in claim_idx]
    if label is StanceLabel.UNRELATED:
        other = int(rng.integers(cfg.n_topics - 1))
        doc_topic = other if other < k else other + 1
    else:
        doc_topic = k
    slot = int(rng.integers(cfg.paragraphs))
    paras = []
    has_marker = False
    for j in range(cfg.paragraphs):
        toks = [filler[i] for i in rng.integers(cfg.filler_vocab, size=cfg.paragraph_len)]
        if j == slot:
            n_top = cfg.topic_tokens_in_evidence
            pos = rng.choice(cfg.paragraph_len, n_top + 1, replace=False)
            pool = np.arange(cfg.topic_vocab)
            if cfg.disjoint_evidence and doc_topic == k:
                pool = np.setdiff1d(pool, claim_idx)
            for p, ti in zip(pos[:n_top], rng.choice(pool, n_top, replace=False)):
                toks[p] = topics[doc_topic][ti]
            if label in markers and rng.random() < cfg.signal:
                toks[pos[n_top]] = markers[label][int(rng.integers(cfg.markers_per_class))]
                has_marker = True
        paras.append(" ".join(toks))
    rationale = None
    if with_rationale and label in markers and has_marker:
        if rng.random() < cfg.rationale_fraction:
            rationale = tuple(j == slot for j in range(cfg.paragraphs))
    return StanceExample(claim=" ".join(claim), document="\n\n".join(paras), label=label,
                         language=language, example_id=f"{language[0]}{idx}", rationale=rationale)


def synth_generate(cfg: SynthConfig) -> SynthCorpus:
    """Two disjoint-vocabulary "languages" sharing one latent embedding space.

    Token k of the source lexicon and token k of the target lexicon get vectors
    ``z_k + noise`` from the same latent ``z_k``.  Agree/disagree documents carry a
    class marker in one topical (rationale) paragraph, discuss documents carry the
    topical paragraph without a marker, unrelated documents are about another topic.
    """
    rng = np.random.default_rng(cfg.seed)
    s_top, s_fil, s_mark = _lexicon("s", cfg)
    t_top, t_fil, t_mark = _lexicon("t", cfg)

    def flat(top, fil, mark):
        return [w for t in top for w in t] + fil + [w for lab in sorted(mark) for w in mark[lab]]

    s_words, t_words = flat(s_top, s_fil, s_mark), flat(t_top, t_fil, t_mark)
    latent = rng.normal(size=(len(s_words), cfg.emb_dim))
    if cfg.topic_cohesion > 0:
        # words of one topic (and markers of one class) share a centroid
        groups = [k for k in range(cfg.n_topics) for _ in range(cfg.topic_vocab)]
        groups += [-1] * cfg.filler_vocab
        groups += [cfg.n_topics + c for c in range(len(s_mark)) for _ in range(cfg.markers_per_class)]
        centroids = rng.normal(size=(cfg.n_topics + len(s_mark), cfg.emb_dim))
        w = np.sqrt(cfg.topic_cohesion)
        for i, g in enumerate(groups):
            if g >= 0:
                latent[i] = w * centroids[g] + np.sqrt(1.0 - cfg.topic_cohesion) * latent[i]
    s_vec = latent + cfg.noise * rng.normal(size=latent.shape)
    t_vec = latent + cfg.noise * rng.normal(size=latent.shape)

    def build(counts, top, fil, mark, language, with_rationale):
        labels = [lab for lab, c in zip(StanceLabel, counts) for _ in range(c)]
        order = rng.permutation(len(labels))
        return [_make_example(rng, cfg, labels[o], top, fil, mark, language, i, with_rationale)
                for i, o in enumerate(order)]

    source = build(cfg.source_counts, s_top, s_fil, s_mark, "source", False)
    target = build(cfg.target_counts, t_top, t_fil, t_mark, "target", True)
    vectors = np.round(np.concatenate([s_vec, t_vec]), 6)
    return SynthCorpus(source=source, target=target, words=s_words + t_words, vectors=vectors,
                       config=cfg, markers={"source": s_mark, "target": t_mark},
                       topics={"source": s_top, "target": t_top})


def stratified_split(examples: Sequence[StanceExample], sizes: Sequence[int], seed: int):
    """Split into consecutive parts of the given sizes, keeping class proportions close."""
    if sum(sizes) > len(examples):
        raise ConfigError(f"requested {sum(sizes)} examples from a set of {len(examples)}")
    rng = np.random.default_rng(seed)
    by_label: dict[int, list[int]] = defaultdict(list)
    for i in rng.permutation(len(examples)):
        by_label[int(examples[i].label)].append(int(i))
    # round-robin over labels gives a class-interleaved ordering
    order = []
    queues = [by_label[k] for k in sorted(by_label)]
    while any(queues):
        for q in queues:
            if q:
                order.append(q.pop(0))
    parts, start = [], 0
    for n in sizes:
        parts.append([examples[i] for i in order[start:start + n]])
        start += n
    return parts
