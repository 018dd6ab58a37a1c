import json
import math

import numpy as np
import pytest

from qgraph import library
from qgraph.errors import GraphInputError, IncompleteSpectrumError
from qgraph.graph import DIRICHLET, Delta, Dirichlet, validate_graph
from qgraph.surgery import (EnergySpectrum, check_interlacing, coupling_surgery, dirichlet_surgery, energy_spectrum,
                            impose_dirichlet, increase_coupling, split_surgery, split_vertex, verify_surgery)


def test_impose_dirichlet():
    g = impose_dirichlet(library.star([1.0, 2.0]), [0])
    assert isinstance(g.vertices[0].condition, Dirichlet)
    with pytest.raises(GraphInputError):
        impose_dirichlet(g, [9])


def test_interval_dirichlet_example():
    # NK interval of length 1: 0, pi^2, 4pi^2, ...; Dirichlet at one end: (n - 1/2)^2 pi^2
    rec = dirichlet_surgery(library.interval(1.0), [1])
    before = energy_spectrum(rec.before, 10)
    after = energy_spectrum(rec.after, 10)
    assert before.E[0] == 0.0
    assert np.allclose(before.E[1:10], (np.arange(1, 10) * math.pi) ** 2)
    assert np.allclose(after.E[:10], ((np.arange(10) + 0.5) * math.pi) ** 2)
    assert verify_surgery(rec, 8).ok


def test_split_star_center():
    g = library.star([1.0, math.sqrt(2), math.sqrt(3)])
    rec = split_surgery(g, 0, [[0], [1, 2]])
    assert rec.d == 1 and rec.direction == "down"
    assert len(rec.after.component_graphs()) == 2
    rep = verify_surgery(rec, 15)
    assert rep.ok and rep.checked_n == 15
    assert json.loads(rep.to_json())["operation"] == "split"


def test_split_accepts_endpoint_forms():
    g = library.tadpole(1.0, 2.0)
    eps = g.endpoints[0]
    a = split_vertex(g, 0, [[0], [1, 2]])
    b = split_vertex(g, 0, [[eps[0]], [eps[1], eps[2]]])
    c = split_vertex(g, 0, [[(eps[0].edge, eps[0].side)], [(e.edge, e.side) for e in eps[1:]]])
    assert a.edges == b.edges == c.edges
    assert validate_graph(a).violations == ["disconnected"]
    assert len(a.component_graphs()) == 2


def test_split_errors():
    g = library.star([1.0, 2.0, 3.0])
    with pytest.raises(GraphInputError):
        split_vertex(g, 0, [[0], [1]])  # not covering
    with pytest.raises(GraphInputError):
        split_vertex(g, 0, [[0, 1], [1, 2]])  # overlapping
    with pytest.raises(GraphInputError):
        split_vertex(g, 0, [[0], []])
    with pytest.raises(GraphInputError):
        split_vertex(g.with_conditions({0: DIRICHLET}), 0, [[0], [1, 2]])
    with pytest.raises(GraphInputError):
        split_vertex(g, 7, [[0]])


def test_split_delta_redistributes_coupling():
    g = library.star([1.0, 2.0, 3.0], center=Delta(3.0))
    with pytest.raises(GraphInputError):
        split_vertex(g, 0, [[0], [1, 2]])
    with pytest.raises(GraphInputError):
        split_vertex(g, 0, [[0], [1, 2]], couplings=[1.0, 1.0])
    h = split_vertex(g, 0, [[0], [1, 2]], couplings=[1.0, 2.0])
    assert h.vertices[0].condition == Delta(1.0)
    assert h.vertices[-1].condition == Delta(2.0)


def test_increase_coupling():
    g = library.tadpole(1.0, math.sqrt(2))
    h = increase_coupling(g, {0: 2.5})
    assert h.vertices[0].condition == Delta(2.5)
    with pytest.raises(GraphInputError):
        increase_coupling(h, {0: 1.0})
    with pytest.raises(GraphInputError):
        increase_coupling(g.with_conditions({1: DIRICHLET}), {1: 1.0})


def test_large_coupling_approaches_dirichlet():
    g = library.star([1.0, math.sqrt(2), math.sqrt(3)])
    big = energy_spectrum(increase_coupling(g, {0: 1e6}), 12)
    dir_ = energy_spectrum(impose_dirichlet(g, [0]), 12)
    k_big, k_dir = np.sqrt(big.E[:12]), np.sqrt(dir_.E[:12])
    assert np.max(np.abs(k_big - k_dir)) <= 1e-3


def test_coupling_monotone():
    g = library.tadpole(1.0, math.sqrt(2))
    specs = [energy_spectrum(increase_coupling(g, {0: a}) if a else g, 15).E[:15]
             for a in (0.0, 1.0, 10.0, 100.0, 1e6)]
    for lo, hi in zip(specs, specs[1:]):
        assert np.all(hi >= lo - 1e-8 * (1 + lo))


def test_energy_spectrum_rejects_negative_coupling():
    with pytest.raises(GraphInputError):
        energy_spectrum(library.tadpole(alpha=-1.0), 5)


def test_interlacing_checker_detects_violation():
    before = EnergySpectrum(np.array([0.0, 1.0, 2.0, 3.0]), 3.0)
    after = EnergySpectrum(np.array([0.5, 2.5, 2.6]), 3.0)
    rep = check_interlacing(before, after, 1, "up", 3)
    assert not rep.ok and rep.violations[0]["n"] == 2
    assert EnergySpectrum(np.array([1.0]), 1.0).at(0) == -math.inf
    with pytest.raises(IncompleteSpectrumError):
        check_interlacing(before, after, 2, "up", 3)
    with pytest.raises(GraphInputError):
        check_interlacing(before, after, 1, "sideways", 2)


def test_coupling_surgery_record():
    rec = coupling_surgery(library.figure_eight(), {0: 4.0})
    assert rec.d == 1 and rec.direction == "up"
    assert verify_surgery(rec, 20).ok
