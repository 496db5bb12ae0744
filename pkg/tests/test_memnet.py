import numpy as np
import pytest

from clmn import tensor as T
from clmn.errors import ConfigError, ShapeError
from clmn.gradcheck import gradcheck_params
from clmn.memnet import (CLMNModel, MemoryNetwork, NetConfig, StanceLabel, bilinear_similarity, encode_inputs,
                         forward_batch, generalize, output_repr, rank_evidence)
from clmn.tensor import Tensor

from conftest import make_world


def test_bilinear_examples():
    eye = np.eye(2)
    assert bilinear_similarity([1.0, 0.0], eye, [[0.0, 1.0]]).data[0] == 0.0
    assert bilinear_similarity([1.0, 2.0], eye, [[3.0, 4.0]]).data[0] == 11.0
    assert bilinear_similarity([1.0, 2.0], eye, np.zeros((1, 2))).data[0] == 0.0
    batched = bilinear_similarity([[1.0, 2.0]], eye, [[[3.0, 4.0], [0.0, 0.0]]]).data
    np.testing.assert_array_equal(batched, [[11.0, 0.0]])
    with pytest.raises(ShapeError):
        bilinear_similarity([1.0, 2.0, 3.0], eye, [[3.0, 4.0]])


def _net_with(sim_lstm, sim_cnn):
    net = MemoryNetwork.init(np.random.default_rng(0), NetConfig(2, 2, 2, 3, 2, 4))
    net.sim_lstm = Tensor(np.asarray(sim_lstm, float))
    net.sim_cnn = Tensor(np.asarray(sim_cnn, float))
    return net


def test_generalize_tfidf_gate():
    net = _net_with(np.eye(2), np.eye(2))
    c = Tensor([1.0, 1.0])
    m = Tensor([[2.0, 4.0], [1.0, 1.0]])
    n = Tensor([[1.0, 0.0], [0.0, 1.0]])
    m_g, n_g, p_lstm, p_cnn = generalize(net, c, c, m, n, np.array([0.5, 0.0]), np.array([True, True]))
    np.testing.assert_array_equal(m_g.data[0], [1.0, 2.0])
    np.testing.assert_array_equal(m_g.data[1], [0.0, 0.0])
    assert p_lstm.data[1] == 0.0 and p_lstm.data[0] == 3.0
    # n_j is scaled by sigmoid of the raw P^lstm
    np.testing.assert_allclose(n_g.data[0], [1.0 / (1.0 + np.exp(-3.0)), 0.0])
    np.testing.assert_allclose(n_g.data[1], [0.0, 0.5])
    unchanged, *_ = generalize(net, c, c, m, n, np.array([1.0, 1.0]), np.array([True, True]))
    np.testing.assert_array_equal(unchanged.data, m.data)


def test_output_repr_max_mean():
    l = 9
    tf = np.zeros(l)
    tf[:2] = [0.2, 0.8]
    mask = np.zeros(l, bool)
    mask[:2] = True
    n_g = Tensor(np.zeros((l, 3)))
    o = output_repr(n_g, tf, Tensor(np.zeros(l)), Tensor(np.zeros(l)), mask).data
    assert o.shape == (3 + 6,)
    assert o[3] == 0.8 and o[4] == pytest.approx(0.5)


def test_output_repr_all_pad_and_singleton():
    l = 4
    o = output_repr(Tensor(np.ones((l, 3))), np.ones(l), Tensor(np.ones(l)), Tensor(np.ones(l)),
                    np.zeros(l, bool)).data
    np.testing.assert_array_equal(o, np.zeros(9))
    mask = np.array([False, True, False, False])
    p = Tensor(np.array([5.0, -1.5, 7.0, 2.0]))
    o = output_repr(Tensor(np.ones((l, 3))), np.array([0.9, 0.3, 0.1, 0.0]), p, p, mask).data
    assert o[3] == o[4] == 0.3 and o[5] == o[6] == -1.5 and o[7] == o[8] == -1.5


def test_repr_dim_default():
    assert NetConfig().repr_dim == 506


def test_forward_probabilities_and_determinism(world):
    feat, model = world.featurizer, world.model
    enc = [feat.encode(e) for e in world.corpus.target]
    batch = feat.collate(enc)
    with T.no_grad():
        a = forward_batch(model.target, model.classifier, batch)
        b = forward_batch(model.target, model.classifier, batch)
    np.testing.assert_allclose(a.probs.data.sum(axis=1), 1.0, atol=1e-9)
    assert a.probs.data.tobytes() == b.probs.data.tobytes()
    assert a.r.shape == (len(enc), world.net.repr_dim)
    assert a.m.shape[1] == world.net.max_paragraphs


def test_all_padding_document(world):
    feat, model = world.featurizer, world.model
    enc = feat.encode_text("some claim words", "", "target")
    tr = forward_batch(model.target, model.classifier, feat.collate([enc])).example(0)
    np.testing.assert_array_equal(tr.m, 0.0)
    np.testing.assert_array_equal(tr.n, 0.0)
    np.testing.assert_array_equal(tr.r[:world.net.cnn_filters + 6], 0.0)


def test_claim_and_paragraph_encoders_are_separate(world):
    feat, model = world.featurizer, world.model
    text = " ".join(world.corpus.words[:3])
    tr = forward_batch(model.target, model.classifier, feat.collate([feat.encode_text(text, text, "target")]))
    assert not np.allclose(tr.c_lstm.data[0], tr.m.data[0, 0])


def test_padding_slots_do_not_change_r():
    short = make_world(l=2)
    wide = make_world(l=5)
    wide.model.load_state_dict(short.model.state_dict())
    ex = short.corpus.target[0]
    r = []
    for w in (short, wide):
        tr = forward_batch(w.model.target, w.model.classifier, w.featurizer.collate([w.featurizer.encode(ex)]))
        r.append(tr.r.data[0])
    assert r[0].tobytes() == r[1].tobytes()


def test_scaling_similarity_matrix(world):
    feat, model = world.featurizer, world.model
    batch = feat.collate([feat.encode(e) for e in world.corpus.target])
    with T.no_grad():
        c_l, c_c, m, n = encode_inputs(model.target, batch)
        _, _, p1, _ = generalize(model.target, c_l, c_c, m, n, batch.tfidf, batch.para_mask)
        model.target.sim_lstm.data *= 3.0
        _, _, p3, _ = generalize(model.target, c_l, c_c, m, n, batch.tfidf, batch.para_mask)
    np.testing.assert_allclose(p3.data, 3.0 * p1.data, rtol=1e-12, atol=1e-15)
    assert (p3.data.argmax(1) == p1.data.argmax(1)).all()


def test_rank_evidence_ties():
    assert rank_evidence(np.array([0.5, 0.9, 0.5, 2.0]), np.array([1, 1, 1, 0], bool)) == [1, 0, 2]


def test_end_to_end_cross_entropy_gradcheck():
    w = make_world(q=4, l=2)
    feat, model = w.featurizer, w.model
    batch = feat.collate([feat.encode(e) for e in w.corpus.target[:3]])

    def loss():
        tr = forward_batch(model.target, model.classifier, batch)
        return T.mean(T.cross_entropy(tr.logits, batch.labels))

    params = model.named_parameters(("target", "shared"))
    worst, _ = gradcheck_params(loss, params)
    assert worst < 1e-4


def test_state_dict_namespaces_and_errors(world):
    sd = world.model.state_dict()
    assert {k.split(".")[0] for k in sd} == {"source", "target", "shared"}
    other = CLMNModel(world.net, seed=99)
    other.load_state_dict(sd)
    assert all(np.array_equal(other.state_dict()[k], v) for k, v in sd.items())
    sd.pop("shared.classifier.b")
    with pytest.raises(ConfigError, match="shared.classifier.b"):
        other.load_state_dict(sd)


def test_source_and_target_are_independent(world):
    s, t = world.model.source.tensors(), world.model.target.tensors()
    assert all(s[k] is not t[k] for k in s)
    assert not np.array_equal(s["sim_lstm"].data, t["sim_lstm"].data)


def test_stance_label_parsing():
    assert StanceLabel.parse("UNRELATED") is StanceLabel.UNRELATED
    assert str(StanceLabel.DISCUSS) == "discuss"
    with pytest.raises(Exception):
        StanceLabel.parse("maybe")
