"""Memory network over claim--document pairs.

One network encodes a claim and the paragraphs of a document (one memory slot per
paragraph), scores each slot against the claim three ways (TF.IDF cosine, and
bilinear forms over LSTM and CNN encodings), gates the slot encodings with those
scores, and emits a joint representation ``r`` that a softmax classifier maps to a
stance distribution.

Shapes (B = batch, l = slots, q/d = LSTM sizes, q'/d' = CNN sizes)::

    c_lstm (B, q)   c_cnn (B, q')   m (B, l, d)   n (B, l, d')
    p_tfidf, p_lstm, p_cnn (B, l)
    r (B, d' + 6 + q + q')
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from typing import Sequence

import numpy as np

from . import tensor as T
from .encoders import CnnParams, LstmParams, cnn_encode, init_cnn, init_lstm, lstm_encode
from .errors import ConfigError, DataError, ShapeError
from .tensor import Tensor
from .text import (MAX_PARAGRAPHS, MAX_TOKENS, PAD_ID, EmbeddingTable, TfidfModel, Vocabulary,
                   split_paragraphs, tfidf_cosine, tokenize)


class StanceLabel(IntEnum):
    AGREE = 0
    DISAGREE = 1
    DISCUSS = 2
    UNRELATED = 3

    @classmethod
    def parse(cls, text: str) -> "StanceLabel":
        try:
            return cls[text.strip().upper()]
        except KeyError:
            raise DataError(f"unknown stance label {text!r}") from None

    def __str__(self) -> str:
        return self.name.lower()

    @property
    def related(self) -> bool:
        return self is not StanceLabel.UNRELATED


N_CLASSES = len(StanceLabel)


@dataclass(frozen=True)
class NetConfig:
    emb_dim: int = 300
    lstm_hidden: int = 300
    cnn_filters: int = 100
    cnn_width: int = 5
    max_paragraphs: int = MAX_PARAGRAPHS
    max_tokens: int = MAX_TOKENS

    def __post_init__(self):
        for name in ("emb_dim", "lstm_hidden", "cnn_filters", "cnn_width", "max_paragraphs", "max_tokens"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")

    @property
    def repr_dim(self) -> int:
        return self.cnn_filters + 6 + self.lstm_hidden + self.cnn_filters


class MemoryNetwork:
    """Encoders plus the two similarity matrices for one language."""

    def __init__(self, doc_lstm: LstmParams, doc_cnn: CnnParams, claim_lstm: LstmParams,
                 claim_cnn: CnnParams, sim_lstm: Tensor, sim_cnn: Tensor):
        self.doc_lstm = doc_lstm
        self.doc_cnn = doc_cnn
        self.claim_lstm = claim_lstm
        self.claim_cnn = claim_cnn
        self.sim_lstm = sim_lstm
        self.sim_cnn = sim_cnn

    @classmethod
    def init(cls, rng: np.random.Generator, cfg: NetConfig) -> "MemoryNetwork":
        q = cfg.lstm_hidden
        f = cfg.cnn_filters
        return cls(
            doc_lstm=init_lstm(rng, cfg.emb_dim, q),
            doc_cnn=init_cnn(rng, cfg.emb_dim, f, cfg.cnn_width),
            claim_lstm=init_lstm(rng, cfg.emb_dim, q),
            claim_cnn=init_cnn(rng, cfg.emb_dim, f, cfg.cnn_width),
            sim_lstm=Tensor(rng.uniform(-0.08, 0.08, (q, q)), requires_grad=True),
            sim_cnn=Tensor(rng.uniform(-0.08, 0.08, (f, f)), requires_grad=True),
        )

    def tensors(self) -> dict[str, Tensor]:
        out = {}
        for part in ("doc_lstm", "doc_cnn", "claim_lstm", "claim_cnn"):
            for k, v in getattr(self, part).tensors().items():
                out[f"{part}.{k}"] = v
        out["sim_lstm"] = self.sim_lstm
        out["sim_cnn"] = self.sim_cnn
        return out

    def copy_from(self, other: "MemoryNetwork") -> None:
        mine = self.tensors()
        for name, t in other.tensors().items():
            mine[name].data = t.data.copy()


class Classifier:
    """Softmax response layer over the joint representation."""

    def __init__(self, w: Tensor, b: Tensor):
        self.w = w
        self.b = b

    @classmethod
    def init(cls, rng: np.random.Generator, repr_dim: int) -> "Classifier":
        return cls(Tensor(rng.uniform(-0.08, 0.08, (repr_dim, N_CLASSES)), requires_grad=True),
                   Tensor(np.zeros(N_CLASSES), requires_grad=True))

    def tensors(self) -> dict[str, Tensor]:
        return {"w": self.w, "b": self.b}

    def logits(self, r: Tensor) -> Tensor:
        return r @ self.w + self.b


class CLMNModel:
    """Source and target memory networks with one shared classifier."""

    def __init__(self, cfg: NetConfig, seed: int = 0):
        rng = np.random.default_rng(seed)
        self.cfg = cfg
        self.source = MemoryNetwork.init(rng, cfg)
        self.target = MemoryNetwork.init(rng, cfg)
        self.classifier = Classifier.init(rng, cfg.repr_dim)

    def network(self, language: str) -> MemoryNetwork:
        if language == "source":
            return self.source
        if language == "target":
            return self.target
        raise ConfigError(f"unknown language {language!r}")

    def named_parameters(self, parts: Sequence[str] = ("source", "target", "shared")) -> dict[str, Tensor]:
        out = {}
        if "source" in parts:
            out.update({f"source.{k}": v for k, v in self.source.tensors().items()})
        if "target" in parts:
            out.update({f"target.{k}": v for k, v in self.target.tensors().items()})
        if "shared" in parts:
            out.update({f"shared.classifier.{k}": v for k, v in self.classifier.tensors().items()})
        return out

    def state_dict(self) -> dict[str, np.ndarray]:
        return {k: v.data.copy() for k, v in self.named_parameters().items()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        params = self.named_parameters()
        missing = sorted(set(params) - set(state))
        if missing:
            raise ConfigError(f"checkpoint lacks parameters: {', '.join(missing)}")
        for k, t in params.items():
            arr = np.asarray(state[k], dtype=np.float64)
            if arr.shape != t.shape:
                raise ShapeError(f"{k}: checkpoint shape {arr.shape} != model shape {t.shape}")
            t.data = arr.copy()


# -- featurization --------------------------------------------------------
@dataclass(frozen=True)
class EncodedExample:
    example_id: str
    claim_ids: np.ndarray
    para_ids: tuple
    para_mask: np.ndarray
    tfidf: np.ndarray
    label: int
    rationale: np.ndarray | None = None


@dataclass
class Batch:
    claim_x: np.ndarray
    claim_mask: np.ndarray
    para_x: np.ndarray
    para_mask_tok: np.ndarray
    slot_index: np.ndarray
    para_mask: np.ndarray
    tfidf: np.ndarray
    labels: np.ndarray
    examples: list[EncodedExample] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.labels)


class Featurizer:
    """Turns raw examples into padded index arrays and embedded batches."""

    def __init__(self, vocab: Vocabulary, embeddings: EmbeddingTable, tfidf: dict[str, TfidfModel],
                 max_paragraphs: int = MAX_PARAGRAPHS, max_tokens: int = MAX_TOKENS):
        self.vocab = vocab
        self.embeddings = embeddings
        self.tfidf = tfidf
        self.max_paragraphs = max_paragraphs
        self.max_tokens = max_tokens

    def encode_text(self, claim: str, document: str, language: str, label: int = 0,
                    example_id: str = "", rationale=None) -> EncodedExample:
        claim_toks = tokenize(claim)[:self.max_tokens]
        paras = split_paragraphs(document, self.max_paragraphs)
        model = self.tfidf[language]
        ids, mask, scores = [], [], []
        for p in paras:
            toks = tokenize(p.text)[:self.max_tokens]
            ids.append(np.array(self.vocab.encode(toks, self.max_tokens), dtype=np.int64))
            mask.append(not p.padding)
            scores.append(0.0 if p.padding else tfidf_cosine(model, claim_toks, toks))
        gold = None
        if rationale is not None:
            gold = np.zeros(self.max_paragraphs, dtype=bool)
            flags = np.asarray(rationale, dtype=bool)[:self.max_paragraphs]
            gold[:len(flags)] = flags
        return EncodedExample(
            example_id=example_id,
            claim_ids=np.array(self.vocab.encode(claim_toks, self.max_tokens), dtype=np.int64),
            para_ids=tuple(ids),
            para_mask=np.array(mask, dtype=bool),
            tfidf=np.array(scores),
            label=int(label),
            rationale=gold,
        )

    def encode(self, ex) -> EncodedExample:
        return self.encode_text(ex.claim, ex.document, ex.language, int(ex.label), ex.example_id,
                                ex.rationale)

    def _embed(self, seqs: Sequence[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
        width = max((len(s) for s in seqs), default=0)
        ids = np.full((len(seqs), width), PAD_ID, dtype=np.int64)
        for i, s in enumerate(seqs):
            ids[i, :len(s)] = s
        return self.embeddings.lookup(ids), ids != PAD_ID

    def collate(self, examples: Sequence[EncodedExample]) -> Batch:
        if not examples:
            raise ShapeError("collate: empty batch")
        l = self.max_paragraphs
        claim_x, claim_mask = self._embed([e.claim_ids for e in examples])
        real_seqs, slots = [], []
        for b, e in enumerate(examples):
            if len(e.para_mask) != l:
                raise ShapeError(f"example {e.example_id!r} has {len(e.para_mask)} slots, expected {l}")
            for j in np.flatnonzero(e.para_mask):
                real_seqs.append(e.para_ids[j])
                slots.append(b * l + j)
        para_x, para_mask_tok = self._embed(real_seqs)
        if not real_seqs:
            para_x = np.zeros((0, 0, self.embeddings.dim))
        return Batch(
            claim_x=claim_x, claim_mask=claim_mask,
            para_x=para_x, para_mask_tok=para_mask_tok,
            slot_index=np.array(slots, dtype=np.int64),
            para_mask=np.stack([e.para_mask for e in examples]),
            tfidf=np.stack([e.tfidf for e in examples]),
            labels=np.array([e.label for e in examples], dtype=np.int64),
            examples=list(examples),
        )


# -- forward computation --------------------------------------------------
@dataclass
class BatchTrace:
    c_lstm: Tensor
    c_cnn: Tensor
    m: Tensor
    n: Tensor
    m_gated: Tensor
    n_gated: Tensor
    p_tfidf: Tensor
    p_lstm: Tensor
    p_cnn: Tensor
    r: Tensor
    logits: Tensor
    probs: Tensor
    para_mask: np.ndarray

    def example(self, i: int) -> "ForwardTrace":
        return ForwardTrace(**{k: (v[i].data.copy() if isinstance(v, Tensor) else v[i].copy())
                               for k, v in self.__dict__.items()})


@dataclass
class ForwardTrace:
    """Per-example snapshot of every intermediate quantity (numpy arrays)."""

    c_lstm: np.ndarray
    c_cnn: np.ndarray
    m: np.ndarray
    n: np.ndarray
    m_gated: np.ndarray
    n_gated: np.ndarray
    p_tfidf: np.ndarray
    p_lstm: np.ndarray
    p_cnn: np.ndarray
    r: np.ndarray
    logits: np.ndarray
    probs: np.ndarray
    para_mask: np.ndarray


def _encode_slots(lstm: LstmParams, cnn: CnnParams, batch: Batch) -> tuple[Tensor, Tensor]:
    bsz, l = batch.para_mask.shape
    if len(batch.slot_index) == 0:
        return (T.as_tensor(np.zeros((bsz, l, lstm.hidden))),
                T.as_tensor(np.zeros((bsz, l, cnn.filters))))
    m_real = lstm_encode(lstm, batch.para_x, batch.para_mask_tok)
    n_real = cnn_encode(cnn, batch.para_x, batch.para_mask_tok)
    m = T.scatter_rows(m_real, batch.slot_index, bsz * l).reshape(bsz, l, lstm.hidden)
    n = T.scatter_rows(n_real, batch.slot_index, bsz * l).reshape(bsz, l, cnn.filters)
    return m, n


def encode_inputs(net: MemoryNetwork, batch: Batch):
    """Claim encodings and per-slot paragraph encodings; padded slots are zero."""
    c_lstm = lstm_encode(net.claim_lstm, batch.claim_x, batch.claim_mask)
    c_cnn = cnn_encode(net.claim_cnn, batch.claim_x, batch.claim_mask)
    m, n = _encode_slots(net.doc_lstm, net.doc_cnn, batch)
    return c_lstm, c_cnn, m, n


def bilinear_similarity(c, mat, mem) -> Tensor:
    """score_j = c^T mat mem_j, for c (q,) / mem (l, d) or batched c (B, q) / mem (B, l, d)."""
    c, mat, mem = T.as_tensor(c), T.as_tensor(mat), T.as_tensor(mem)
    if mat.ndim != 2 or c.shape[-1] != mat.shape[0] or mem.shape[-1] != mat.shape[1]:
        raise ShapeError(f"bilinear_similarity: c {c.shape}, matrix {mat.shape}, memory {mem.shape}")
    if c.ndim == 1 and mem.ndim == 2:
        return mem @ (c @ mat)
    if c.ndim == 2 and mem.ndim == 3 and c.shape[0] == mem.shape[0]:
        cm = c @ mat
        return T.tsum(mem * cm.reshape(cm.shape[0], 1, cm.shape[1]), axis=-1)
    raise ShapeError(f"bilinear_similarity: c {c.shape} and memory {mem.shape} are not aligned")


def generalize(net: MemoryNetwork, c_lstm: Tensor, c_cnn: Tensor, m: Tensor, n: Tensor,
               p_tfidf: np.ndarray, para_mask: np.ndarray):
    """The two gating updates, in order.

    m_j is scaled by P^tfidf_j, P^lstm is scored from the scaled m_j, n_j is scaled by
    sigmoid(P^lstm_j), and P^cnn is scored from the scaled n_j.  Returns
    (m_gated, n_gated, p_lstm, p_cnn) with raw (unsquashed) similarity scores.
    """
    p_tfidf = np.asarray(p_tfidf, dtype=np.float64)
    m_gated = m * p_tfidf[..., None]
    p_lstm = bilinear_similarity(c_lstm, net.sim_lstm, m_gated)
    gate = T.sigmoid(p_lstm) * np.asarray(para_mask, dtype=np.float64)
    n_gated = n * gate.reshape(*gate.shape, 1)
    p_cnn = bilinear_similarity(c_cnn, net.sim_cnn, n_gated)
    return m_gated, n_gated, p_lstm, p_cnn


def output_repr(n_gated: Tensor, p_tfidf, p_lstm: Tensor, p_cnn: Tensor, para_mask) -> Tensor:
    """[mean n_j | max,mean P^tfidf | max,mean P^lstm | max,mean P^cnn] over real slots."""
    mask = np.asarray(para_mask, dtype=bool)
    axis = mask.ndim - 1
    parts = [T.masked_mean(n_gated, mask[..., None], axis=axis)]
    for p in (T.as_tensor(p_tfidf), p_lstm, p_cnn):
        parts.append(T.masked_max(p, mask, axis=axis).reshape(*mask.shape[:-1], 1))
        parts.append(T.masked_mean(p, mask, axis=axis).reshape(*mask.shape[:-1], 1))
    return T.concat(parts, axis=-1)


def forward_batch(net: MemoryNetwork, classifier: Classifier, batch: Batch) -> BatchTrace:
    c_lstm, c_cnn, m, n = encode_inputs(net, batch)
    m_g, n_g, p_lstm, p_cnn = generalize(net, c_lstm, c_cnn, m, n, batch.tfidf, batch.para_mask)
    o = output_repr(n_g, batch.tfidf, p_lstm, p_cnn, batch.para_mask)
    r = T.concat([o, c_lstm, c_cnn], axis=-1)
    logits = classifier.logits(r)
    return BatchTrace(c_lstm=c_lstm, c_cnn=c_cnn, m=m, n=n, m_gated=m_g, n_gated=n_g,
                      p_tfidf=T.as_tensor(batch.tfidf), p_lstm=p_lstm, p_cnn=p_cnn, r=r,
                      logits=logits, probs=T.softmax(logits, axis=-1), para_mask=batch.para_mask)


def forward(net: MemoryNetwork, classifier: Classifier, featurizer: Featurizer, claim: str,
            document: str, language: str) -> ForwardTrace:
    enc = featurizer.encode_text(claim, document, language)
    with T.no_grad():
        trace = forward_batch(net, classifier, featurizer.collate([enc]))
    return trace.example(0)


def rank_evidence(p_cnn: np.ndarray, para_mask: np.ndarray) -> list[int]:
    """Real slot indices by descending P^cnn; ties go to the lower index."""
    real = np.flatnonzero(para_mask)
    return sorted(real.tolist(), key=lambda j: (-float(p_cnn[j]), j))
