from collections import Counter
from dataclasses import replace

import pytest

from clmn.datasets import (StanceExample, SynthConfig, load_fnc, load_target, stratified_split,
                           synth_generate, write_fnc, write_target)
from clmn.errors import ConfigError, DataError, ParseError
from clmn.memnet import StanceLabel
from clmn.text import split_paragraphs, tokenize


def _write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def test_fnc_join_and_case_folding(tmp_path):
    bodies = _write(tmp_path / "b.csv", 'Body ID,articleBody\n1,"first body, with comma"\n2,"second\n\nbody"\n')
    stances = _write(tmp_path / "s.csv", "Headline,Body ID,Stance\nh1,1,agree\nh2,2,UNRELATED\nh3,1,Discuss\n")
    ex = load_fnc(bodies, stances)
    assert len(ex) == 3
    assert [e.label for e in ex] == [StanceLabel.AGREE, StanceLabel.UNRELATED, StanceLabel.DISCUSS]
    assert ex[0].document == "first body, with comma" and ex[1].document == "second\n\nbody"
    assert all(e.language == "source" for e in ex)


def test_fnc_missing_body_id(tmp_path):
    bodies = _write(tmp_path / "b.csv", "Body ID,articleBody\n1,x\n")
    stances = _write(tmp_path / "s.csv", "Headline,Body ID,Stance\nh,99,agree\n")
    with pytest.raises(DataError, match="99"):
        load_fnc(bodies, stances)


def test_fnc_bad_stance_and_malformed(tmp_path):
    bodies = _write(tmp_path / "b.csv", "Body ID,articleBody\n1,x\n")
    with pytest.raises(DataError, match="maybe"):
        load_fnc(bodies, _write(tmp_path / "s.csv", "Headline,Body ID,Stance\nh,1,maybe\n"))
    with pytest.raises(ParseError) as e:
        load_fnc(bodies, _write(tmp_path / "s2.csv", "Headline,Body ID,Stance\nh,1,agree\nh,1\n"))
    assert e.value.line == 3
    with pytest.raises(ParseError):
        load_fnc(bodies, _write(tmp_path / "s3.csv", "Headline,Stance\nh,agree\n"))


def test_target_rationale_parsing(tmp_path):
    p = _write(tmp_path / "t.csv", 'claim,document,stance,rationale\nc,"p1\n\np2\n\np3",agree,2:1\n'
                                   'c2,,discuss,\n')
    ex = load_target(p)
    assert ex[0].rationale == (False, True, False)
    assert ex[1].rationale is None and ex[1].document == ""
    assert all(s.padding for s in split_paragraphs(ex[1].document))
    assert ex[0].language == "target"


def test_target_rationale_validation(tmp_path):
    with pytest.raises(DataError, match="unrelated"):
        load_target(_write(tmp_path / "t.csv", "claim,document,stance,rationale\nc,p1,unrelated,1:1\n"))
    with pytest.raises(DataError):
        load_target(_write(tmp_path / "t2.csv", "claim,document,stance,rationale\nc,p1,agree,4:1\n"))
    with pytest.raises(ParseError):
        load_target(_write(tmp_path / "t3.csv", "claim,document,stance,rationale\nc,p1,agree,x\n"))


def _small(**kw):
    base = dict(source_counts=(10, 10, 10, 10), target_counts=(10, 10, 10, 10), seed=3)
    base.update(kw)
    return SynthConfig(**base)


def test_round_trip_loaders(tmp_path):
    corpus = synth_generate(_small())
    paths = corpus.write(tmp_path)
    src = load_fnc(paths["source_bodies"], paths["source_stances"])
    tgt = load_target(paths["target"])
    key = lambda e: (e.claim, e.document, e.label, e.rationale)
    assert [key(e) for e in src] == [key(e) for e in corpus.source]
    assert tgt == corpus.target
    write_target(tgt, tmp_path / "again.csv")
    assert load_target(tmp_path / "again.csv") == tgt
    write_fnc(src, tmp_path / "b2.csv", tmp_path / "s2.csv")
    assert load_fnc(tmp_path / "b2.csv", tmp_path / "s2.csv") == src


def test_synth_determinism(tmp_path):
    a = synth_generate(_small()).write(tmp_path / "a")
    b = synth_generate(_small()).write(tmp_path / "b")
    for k in a:
        assert a[k].read_bytes() == b[k].read_bytes()
    c = synth_generate(_small(seed=4)).write(tmp_path / "c")
    assert a["target"].read_bytes() != c["target"].read_bytes()


def test_synth_balanced_counts():
    corpus = synth_generate(_small())
    for part in (corpus.source, corpus.target):
        assert len(part) == 40
        assert Counter(e.label for e in part) == {lab: 10 for lab in StanceLabel}


def test_synth_disjoint_vocabularies():
    corpus = synth_generate(_small())
    vocab = lambda xs: {t for e in xs for t in tokenize(e.claim) + tokenize(e.document)}
    assert not vocab(corpus.source) & vocab(corpus.target)
    assert len(set(corpus.words)) == len(corpus.words)


def _rule(ex, markers, topics):
    """Bag-of-marker rule: markers decide agree/disagree, claim-topic overlap decides discuss."""
    toks = set(tokenize(ex.document))
    for lab, words in markers.items():
        if toks & set(words):
            return lab
    claim_topic = next(k for k, words in enumerate(topics) if set(tokenize(ex.claim)) <= set(words))
    return StanceLabel.DISCUSS if toks & set(topics[claim_topic]) else StanceLabel.UNRELATED


def test_bag_of_markers_rule_is_perfect():
    corpus = synth_generate(_small(signal=1.0))
    for lang, part in (("source", corpus.source), ("target", corpus.target)):
        preds = [_rule(e, corpus.markers[lang], corpus.topics[lang]) for e in part]
        assert preds == [e.label for e in part]


def test_rationale_flags_mark_planted_paragraph():
    corpus = synth_generate(_small())
    marks = {w for ws in corpus.markers["target"].values() for w in ws}
    flagged = 0
    for e in corpus.target:
        paras = [p for p in split_paragraphs(e.document, 9) if not p.padding]
        if e.rationale is None:
            assert not e.label.related or e.label == StanceLabel.DISCUSS
            continue
        flagged += 1
        assert e.label in (StanceLabel.AGREE, StanceLabel.DISAGREE)
        has = tuple(bool(set(tokenize(p.text)) & marks) for p in paras)
        assert has == e.rationale and sum(has) == 1
    assert flagged == 20


def test_synth_config_validation():
    with pytest.raises(ConfigError):
        SynthConfig(signal=1.5)
    with pytest.raises(ConfigError):
        SynthConfig(source_counts=(0, 1, 1, 1))


def test_stratified_split_sizes():
    corpus = synth_generate(_small())
    a, b = stratified_split(corpus.target, [8, 12], seed=0)
    assert len(a) == 8 and len(b) == 12 and not {e.example_id for e in a} & {e.example_id for e in b}
    assert Counter(e.label for e in a) == {lab: 2 for lab in StanceLabel}
    with pytest.raises(ConfigError):
        stratified_split(corpus.target, [41], 0)


def test_example_is_frozen():
    e = StanceExample("c", "d", StanceLabel.AGREE, "source", "0")
    assert replace(e, language="target").language == "target"
