import math

import numpy as np
import pytest

from oracles import brute_form_factor
from qgraph import library
from qgraph.errors import GraphInputError, InsufficientDataError, KDependentError
from qgraph.graph import DIRICHLET
from qgraph.spectrum import find_spectrum
from qgraph.statistics import (form_factor_diagonal, form_factor_exact_small, form_factor_mc,
                               form_factor_sweep_csv, spacing_distribution, tanner_gap_report, weyl_ratio)

SMALL = [library.tadpole(1.0, math.sqrt(2)), library.figure_eight(), library.star([1.0, 1.3, 1.7]),
         library.interval(1.0, DIRICHLET, DIRICHLET)]


def test_tadpole_first_form_factor_is_four_ninths():
    g = library.tadpole(1.0, math.sqrt(2))
    assert brute_form_factor(g, 1) == pytest.approx(4 / 9, abs=1e-15)
    assert form_factor_exact_small(g, 1) == pytest.approx(4 / 9, abs=1e-14)


@pytest.mark.parametrize("g", SMALL)
def test_exact_form_factor_matches_walk_oracle(g):
    for n in range(1, 7):
        assert form_factor_exact_small(g, n) == pytest.approx(brute_form_factor(g, n), rel=1e-11, abs=1e-13)


def test_form_factor_zero():
    g = library.star([1.0, 1.3, 1.7])
    assert form_factor_mc(g, 0, 10).K == 6.0
    assert form_factor_exact_small(g, 0) == 6.0


def test_mc_deterministic_and_thread_independent():
    g = library.figure_eight()
    a = form_factor_mc(g, 3, 10000, seed=7, threads=1)
    b = form_factor_mc(g, 3, 10000, seed=7, threads=4)
    assert a.K == b.K and a.stderr == b.stderr
    c = form_factor_mc(g, 3, 10000, seed=8, threads=1)
    assert c.K != a.K


@pytest.mark.parametrize("g", SMALL[:3])
def test_mc_within_three_sigma(g):
    for n in (2, 4):
        est = form_factor_mc(g, n, 20000, seed=3, threads=1)
        assert abs(est.K - brute_form_factor(g, n)) <= 3 * est.stderr
        assert est.tau == pytest.approx(n / (2 * g.n_bonds))


def test_form_factor_errors():
    with pytest.raises(KDependentError):
        form_factor_mc(library.tadpole(alpha=1.0), 2, 10)
    with pytest.raises(GraphInputError):
        form_factor_mc(library.open_loop(), 2, 10)
    with pytest.raises(GraphInputError):
        form_factor_exact_small(library.tadpole(), 11)


def test_diagonal_dirichlet_bond():
    # single bond between Dirichlet ends, n = 2: tau = 1
    g = library.interval(1.0, DIRICHLET, DIRICHLET)
    d = form_factor_diagonal(g, 2)
    assert d.tau == 1.0
    assert d.leading == pytest.approx(4.0)
    assert d.self_retracing == pytest.approx(-2.0)
    assert d.repetition == pytest.approx(0.0)
    assert d.value == pytest.approx(form_factor_exact_small(g, 2))


def test_tree_odd_form_factor_vanishes():
    # closed walks on a tree have even length
    g = library.star([1.0, 1.3, 1.7])
    for n in (1, 3, 5):
        assert form_factor_exact_small(g, n) == 0.0
        assert form_factor_diagonal(g, n).leading == pytest.approx(0.0, abs=1e-14)


def test_sweep_csv():
    csv = form_factor_sweep_csv(library.figure_eight(), [1, 2], 1000, 1, threads=1).splitlines()
    assert csv[0] == "n,tau,K_mc,stderr,K_diag_leading"
    assert len(csv) == 3


def test_tanner_verdicts():
    assert tanner_gap_report(library.star([1.0 + 0.01 * i for i in range(30)])).verdict == "non-universal-expected"
    assert tanner_gap_report(library.complete_graph(5)).verdict == "universal-expected"
    rep = tanner_gap_report(library.complete_graph(5)).to_dict()
    assert set(rep) >= {"gap", "verdict", "c", "convention"}


def test_weyl_ratio_interval():
    sp = find_spectrum(library.interval(2.0), 100.0)
    # N(K) = floor(K L / pi) exactly for the NK interval
    assert weyl_ratio(sp) == pytest.approx(1.0, abs=1e-12)
    assert weyl_ratio(sp.k, total_length=2.0, n=10, include_zero=1) == pytest.approx(11 / 10)
    with pytest.raises(GraphInputError):
        weyl_ratio(sp.k)
    with pytest.raises(InsufficientDataError):
        weyl_ratio(sp, n=10 ** 6)


def test_spacing_distribution():
    sp = find_spectrum(library.complete_graph(4), 80.0)
    s = spacing_distribution(sp)
    assert s.mean == pytest.approx(1.0, abs=0.05)
    assert s.counts.sum() <= len(s.spacings)
    lines = s.histogram_csv().splitlines()
    assert lines[0] == "bin_lo,bin_hi,count,pdf" and len(lines) == 41
    with pytest.raises(InsufficientDataError):
        spacing_distribution(sp.restricted(5.0))
    with pytest.raises(GraphInputError):
        spacing_distribution(np.arange(200.0))
