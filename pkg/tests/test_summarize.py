import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mixbicluster.summarize import (SummaryReport, chi_accuracy, coclustering_matrix,
                                    credible_interval, dahl_allocation, dahl_losses,
                                    log_bayes_factor_pdp, read_allocation, summarize,
                                    write_allocation, write_outputs)
from mixbicluster.sampler import ChainTrace

from oracles import coclustering_bruteforce, dahl_bruteforce

labels_st = st.integers(2, 8).flatmap(
    lambda p: st.lists(st.lists(st.integers(0, 3), min_size=p, max_size=p), min_size=1, max_size=12))


def toy_trace(C, d=None):
    C = np.asarray(C)
    d = np.full(len(C), 0.3) if d is None else d
    tr = ChainTrace({}, "x", 3, C.shape[1])
    for t, (c, dv) in enumerate(zip(C, d), start=1):
        tr.samples.append({"iter": t, "c": [int(v) + 1 for v in c], "q": int(np.unique(c).size),
                           "d": float(dv), "phi": 1.0, "tau": 1.0, "log_eppf": 0.0})
    return tr


def test_coclustering_examples():
    P = coclustering_matrix(np.array([[0, 0, 1]]))
    assert np.array_equal(P, [[1, 1, 0], [1, 1, 0], [0, 0, 1]])
    P = coclustering_matrix(np.array([[0, 0, 1], [0, 1, 2]]))
    assert P[0, 1] == 0.5


@settings(max_examples=100, deadline=None)
@given(labels_st)
def test_coclustering_properties(C):
    P = coclustering_matrix(np.array(C))
    assert np.allclose(P, P.T)
    assert np.all(np.diag(P) == 1.0)
    assert np.all((P >= 0) & (P <= 1))
    assert np.allclose(P, coclustering_bruteforce(C))


@settings(max_examples=100, deadline=None)
@given(labels_st)
def test_dahl_matches_bruteforce(C):
    C = np.array(C)
    P = coclustering_matrix(C)
    best = dahl_allocation(C, P)
    assert list(best) == dahl_bruteforce(C)
    losses = dahl_losses(C, P)
    assert np.all(losses.min() <= losses)


def test_dahl_ties_pick_earliest():
    C = np.array([[0, 0, 1], [1, 1, 0]])
    assert list(dahl_allocation(C)) == [0, 0, 1]
    C = np.array([[0, 1, 1], [0, 0, 1]])
    assert list(dahl_allocation(C)) == [0, 1, 1]


def test_chi_examples():
    c = np.array([0, 0, 1, 2])
    assert chi_accuracy(c, c) == 1.0
    assert chi_accuracy(np.arange(4), np.zeros(4, int)) == 0.0
    assert chi_accuracy(np.array([0, 0, 1]), np.array([5, 5, 5]), subset=[0, 1]) == 1.0
    with pytest.raises(ValueError):
        chi_accuracy(c, c, subset=[1])
    with pytest.raises(ValueError):
        chi_accuracy(c, c[:3])


@given(st.lists(st.integers(0, 4), min_size=2, max_size=15), st.data())
def test_chi_invariances(a, data):
    a = np.array(a)
    b = np.array(data.draw(st.lists(st.integers(0, 4), min_size=a.size, max_size=a.size)))
    perm = data.draw(st.permutations(range(5)))
    relabelled = np.array(perm)[a]
    chi = chi_accuracy(a, b)
    assert chi_accuracy(relabelled, b) == chi
    assert chi_accuracy(b, a) == chi
    assert 0.0 <= chi <= 1.0


def test_bayes_factor():
    assert log_bayes_factor_pdp(np.full(5, 0.2)) == math.inf
    assert log_bayes_factor_pdp(np.zeros(5)) == -math.inf
    assert log_bayes_factor_pdp(np.array([0, 0.1])) == 0.0
    assert log_bayes_factor_pdp(np.array([0.0] + [0.3] * 9)) == pytest.approx(math.log(9), abs=1e-3)
    with pytest.raises(ValueError):
        log_bayes_factor_pdp(np.array([]))


@given(st.integers(1, 30), st.integers(1, 30))
def test_bayes_factor_sign_flip(nz, z):
    d1 = np.array([0.5] * nz + [0.0] * z)
    d2 = np.array([0.5] * z + [0.0] * nz)
    assert log_bayes_factor_pdp(d1) == pytest.approx(-log_bayes_factor_pdp(d2))


def test_credible_interval():
    assert credible_interval(np.full(10, 2.5)) == (2.5, 2.5)
    lo, hi = credible_interval(np.arange(1, 101))
    assert lo == pytest.approx(3.475) and hi == pytest.approx(97.525)
    with pytest.raises(ValueError):
        credible_interval([1.0])


def test_summary_report(tmp_path):
    C = np.array([[0, 0, 1, 1], [0, 0, 1, 2], [0, 0, 1, 1]])
    tr = toy_trace(C, d=[0.0, 0.4, 0.5])
    rep, P = summarize(tr, truth=np.array([0, 0, 1, 1]), names=["a", "b", "c", "e"])
    assert rep.allocation == [1, 1, 2, 2] and rep.chi == 1.0 and rep.misclassification == 0.0
    assert rep.q_hist == {2: 2, 3: 1}
    assert rep.clusters == [["a", "b"], ["c", "e"]]
    assert rep.log_bayes_factor == pytest.approx(math.log(2))
    assert len(rep.d_density) == 50 and len(rep.d_bins) == 51
    assert SummaryReport.from_json(rep.to_json()) == rep
    write_outputs(rep, P, tmp_path, ["a", "b", "c", "e"])
    for f in ("cocluster.csv", "allocation.csv", "report.json", "q_hist.csv", "d_density.csv"):
        assert (tmp_path / f).exists()
    names, labels = read_allocation(tmp_path / "allocation.csv")
    assert names == ["a", "b", "c", "e"] and list(labels) == [1, 1, 2, 2]
    assert np.allclose(np.loadtxt(tmp_path / "cocluster.csv", delimiter=","), P, atol=1e-6)


def test_constant_q_single_bar_and_inf_json():
    tr = toy_trace([[0, 1], [0, 1]])
    rep, _ = summarize(tr)
    assert rep.q_hist == {2: 2}
    assert rep.log_bayes_factor == math.inf
    assert '"Inf"' in rep.to_json()
    assert SummaryReport.from_json(rep.to_json()).log_bayes_factor == math.inf


def test_pooling_traces():
    t1 = toy_trace([[0, 0, 1]])
    t2 = toy_trace([[0, 1, 1]])
    assert coclustering_matrix([t1, t2])[0, 1] == 0.5
    with pytest.raises(ValueError):
        coclustering_matrix([toy_trace(np.empty((0, 3), int))])


def test_allocation_io(tmp_path):
    write_allocation(tmp_path / "a.csv", [3, 1, 3])
    names, labels = read_allocation(tmp_path / "a.csv")
    assert names == ["x1", "x2", "x3"] and list(labels) == [3, 1, 3]
    (tmp_path / "b.csv").write_text("col,k\nx,1\n")
    with pytest.raises(ValueError):
        read_allocation(tmp_path / "b.csv")
