"""Tokenization, vocabulary, word-vector loading, paragraph splitting and TF.IDF."""

from __future__ import annotations

import math
import re
import unicodedata
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import ConfigError, ParseError

PAD = "<pad>"
UNK = "<unk>"
PAD_ID = 0
UNK_ID = 1
MAX_TOKENS = 100
MAX_PARAGRAPHS = 9


def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def tokenize(text: str) -> list[str]:
    """Lowercase, split on Unicode whitespace, strip punctuation from token edges."""
    tokens = []
    for raw in text.lower().split():
        start, end = 0, len(raw)
        while start < end and _is_punct(raw[start]):
            start += 1
        while end > start and _is_punct(raw[end - 1]):
            end -= 1
        if start < end:
            tokens.append(raw[start:end])
    return tokens


class Vocabulary:
    """Token <-> index map with ``<pad>`` at 0 and ``<unk>`` at 1."""

    def __init__(self, tokens: Iterable[str] = ()):
        self.itos: list[str] = [PAD, UNK]
        self.stoi: dict[str, int] = {PAD: PAD_ID, UNK: UNK_ID}
        for tok in tokens:
            self.add(tok)

    def add(self, token: str) -> int:
        idx = self.stoi.get(token)
        if idx is None:
            idx = len(self.itos)
            self.stoi[token] = idx
            self.itos.append(token)
        return idx

    def __len__(self) -> int:
        return len(self.itos)

    def __contains__(self, token: str) -> bool:
        return token in self.stoi

    def index(self, token: str) -> int:
        return self.stoi.get(token, UNK_ID)

    def encode(self, tokens: Sequence[str], max_tokens: int = MAX_TOKENS) -> list[int]:
        return [self.index(t) for t in tokens[:max_tokens]]

    def save(self, path) -> None:
        body = "\n".join(self.itos[2:])
        Path(path).write_text(f"vocab {len(self.itos) - 2}\n" + body + ("\n" if body else ""),
                              encoding="utf-8")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        lines = Path(path).read_text(encoding="utf-8").split("\n")
        header = lines[0].split()
        if len(header) != 2 or header[0] != "vocab" or not header[1].isdigit():
            raise ParseError(f"bad vocabulary header {lines[0]!r}", line=1)
        n = int(header[1])
        tokens = lines[1:1 + n]
        if len(tokens) != n:
            raise ParseError(f"vocabulary declares {n} tokens, found {len(tokens)}")
        return cls(tokens)


@dataclass
class EmbeddingTable:
    vectors: np.ndarray
    frozen: bool = True

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def lookup(self, ids: np.ndarray) -> np.ndarray:
        return self.vectors[np.asarray(ids, dtype=np.int64)]


def read_word_vectors(path, dim: int | None = None) -> dict[str, np.ndarray]:
    """Parse the word-vector text format: optional ``count dim`` header, then ``token f1 .. fd``."""
    out: dict[str, np.ndarray] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").rstrip().split(" ")
            if not line.strip():
                continue
            if lineno == 1 and len(parts) == 2 and parts[0].isdigit() and parts[1].isdigit():
                header_dim = int(parts[1])
                if dim is not None and header_dim != dim:
                    raise ConfigError(f"embedding file dimension {header_dim} != configured {dim}")
                dim = header_dim
                continue
            tok, vals = parts[0], parts[1:]
            if dim is None:
                dim = len(vals)
            if len(vals) != dim:
                raise ParseError(f"expected {dim} floats for {tok!r}, got {len(vals)}", line=lineno)
            try:
                out[tok] = np.array([float(v) for v in vals], dtype=np.float64)
            except ValueError:
                raise ParseError(f"non-numeric vector component for {tok!r}", line=lineno) from None
    return out


def load_embeddings(path, vocab: Vocabulary, dim: int | None = None) -> EmbeddingTable:
    """Build a frozen table for ``vocab`` from a word-vector text file."""
    return build_embedding_table(read_word_vectors(path, dim), vocab, dim)


def build_embedding_table(vecs: dict[str, np.ndarray], vocab: Vocabulary,
                          dim: int | None = None) -> EmbeddingTable:
    """Vocabulary tokens absent from ``vecs``, and ``<unk>``, share one row equal to the
    element-wise mean of all loaded rows; ``<pad>`` is all zeros.
    """
    if vecs:
        file_dim = len(next(iter(vecs.values())))
    elif dim is not None:
        file_dim = dim
    else:
        raise ConfigError("no vectors loaded and no dimension configured")
    if dim is not None and file_dim != dim:
        raise ConfigError(f"embedding file dimension {file_dim} != configured {dim}")
    unk = np.mean(np.stack(list(vecs.values())), axis=0) if vecs else np.zeros(file_dim)
    table = np.empty((len(vocab), file_dim))
    table[PAD_ID] = 0.0
    for i, tok in enumerate(vocab.itos[1:], start=1):
        table[i] = vecs.get(tok, unk)
    table[UNK_ID] = unk
    return EmbeddingTable(table, frozen=True)


def write_word_vectors(path, words: Sequence[str], vectors: np.ndarray, precision: int = 6) -> None:
    fmt = f"{{:.{precision}f}}"
    lines = [f"{len(words)} {vectors.shape[1]}"]
    for w, row in zip(words, vectors):
        lines.append(w + " " + " ".join(fmt.format(x) for x in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


class Paragraph(NamedTuple):
    text: str
    padding: bool


_BLANK_LINE = re.compile(r"\n[ \t\r\f\v]*\n")


def split_paragraphs(document: str, max_paragraphs: int = MAX_PARAGRAPHS) -> list[Paragraph]:
    """Blank-line paragraphs, first ``max_paragraphs`` kept, padded to exactly that many."""
    if max_paragraphs < 1:
        raise ConfigError(f"max_paragraphs must be >= 1, got {max_paragraphs}")
    chunks = [c.strip() for c in _BLANK_LINE.split(document.replace("\r\n", "\n"))]
    real = [Paragraph(c, False) for c in chunks if c][:max_paragraphs]
    return real + [Paragraph("", True)] * (max_paragraphs - len(real))


class TfidfModel:
    """Document frequencies over a fitted corpus; idf(t) = ln(N / (1 + df(t))) + 1."""

    def __init__(self, df: dict[str, int], n_docs: int):
        self.df = dict(df)
        self.n_docs = n_docs

    @classmethod
    def fit(cls, docs: Iterable[Sequence[str]]) -> "TfidfModel":
        df: Counter[str] = Counter()
        n = 0
        for toks in docs:
            n += 1
            df.update(set(toks))
        return cls(dict(df), n)

    def idf(self, token: str) -> float:
        n = max(self.n_docs, 1)
        return math.log(n / (1 + self.df.get(token, 0))) + 1.0

    def vector(self, tokens: Sequence[str]) -> dict[str, float]:
        counts = Counter(tokens)
        return {t: c * self.idf(t) for t, c in counts.items()}

    def to_dict(self) -> dict:
        return {"n_docs": self.n_docs, "df": {k: self.df[k] for k in sorted(self.df)}}

    @classmethod
    def from_dict(cls, d: dict) -> "TfidfModel":
        return cls({k: int(v) for k, v in d["df"].items()}, int(d["n_docs"]))


def tfidf_cosine(model: TfidfModel, a: Sequence[str], b: Sequence[str]) -> float:
    va, vb = model.vector(a), model.vector(b)
    if not va or not vb:
        return 0.0
    # sorted iteration keeps the result bit-symmetric in (a, b)
    num = sum(va[t] * vb[t] for t in sorted(va.keys() & vb.keys()))
    na = math.sqrt(sum(va[t] ** 2 for t in sorted(va)))
    nb = math.sqrt(sum(vb[t] ** 2 for t in sorted(vb)))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return min(1.0, max(0.0, num / (na * nb)))
