import sys
from dataclasses import dataclass

import numpy as np
import pytest

from clmn.datasets import SynthConfig, synth_generate
from clmn.memnet import CLMNModel, Featurizer, NetConfig
from clmn.text import build_embedding_table
from clmn.trainer import TrainData, build_vocab, fit_tfidf


@dataclass
class World:
    corpus: object
    data: TrainData
    featurizer: Featurizer
    model: CLMNModel
    net: NetConfig


def make_world(seed=0, per_class=2, q=4, l=2, emb_dim=3, max_tokens=6) -> World:
    synth = SynthConfig(source_counts=(per_class,) * 4, target_counts=(per_class,) * 4, n_topics=3,
                        topic_vocab=3, filler_vocab=5, claim_len=2, paragraphs=l, paragraph_len=3,
                        topic_tokens_in_evidence=1, emb_dim=emb_dim, seed=seed)
    corpus = synth_generate(synth)
    vocab = build_vocab([corpus.source, corpus.target])
    emb = build_embedding_table(dict(zip(corpus.words, corpus.vectors)), vocab, emb_dim)
    net = NetConfig(emb_dim=emb_dim, lstm_hidden=q, cnn_filters=q, cnn_width=3, max_paragraphs=l,
                    max_tokens=max_tokens)
    feat = Featurizer(vocab, emb, {"source": fit_tfidf(corpus.source), "target": fit_tfidf(corpus.target)},
                      l, max_tokens)
    data = TrainData(corpus.source, corpus.target, corpus.target, vocab, emb)
    return World(corpus, data, feat, CLMNModel(net, seed), net)


@pytest.fixture
def world():
    return make_world()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for line in mod.DETAILS:
        terminalreporter.write_line("  " + line)
    for line in sorted(mod.RESULTS, key=lambda l: int(l.split()[2].rstrip(":"))):
        terminalreporter.write_line(line)
