import math

import numpy as np
import pytest
from scipy.integrate import quad

from qgraph import library
from qgraph.errors import BudgetExceededError, GraphInputError, KDependentError
from qgraph.graph import DIRICHLET
from qgraph.orbits import (GaussianTestFunction, canonical_rotation, classical_map, enumerate_primitive_orbits,
                           orbit_table, orbits_of_length, orbits_to_csv, scattering_trajectory_expansion,
                           trace_formula_check, trace_identity_check)
from qgraph.scattering import open_scattering_matrix
from qgraph.spectrum import find_spectrum

TEST_GRAPHS = [library.interval(1.0), library.tadpole(1.0, math.sqrt(2)), library.figure_eight(),
               library.star([1.0, 1.3, 1.7]), library.complete_graph(4), library.complete_graph(5),
               library.star([1.0] * 30), library.star_dirichlet_tips(), library.square_with_diagonal()]


@pytest.mark.parametrize("g", TEST_GRAPHS)
def test_classical_map_bistochastic(g):
    cm = classical_map(g)
    assert cm.bistochastic_error() <= 1e-12
    u = np.ones(len(cm.M)) / len(cm.M)
    assert np.allclose(cm.M @ u, u, atol=1e-12)
    assert abs(cm.eigenvalues[0] - 1) < 1e-10


def test_classical_map_bipartite_and_delta():
    # the NK interval bounces back and forth: eigenvalue -1 present
    assert classical_map(library.interval()).has_minus_one
    assert not classical_map(library.complete_graph(5)).has_minus_one
    with pytest.raises(KDependentError):
        classical_map(library.tadpole(alpha=1.0))


def test_canonical_rotation():
    assert canonical_rotation((2, 0, 1)) == (0, 1, 2)
    assert canonical_rotation(()) == ()


def test_tadpole_short_orbits():
    g = library.tadpole(1.0, math.sqrt(2))
    orbs = enumerate_primitive_orbits(g, 2)
    by_seq = {o.sequence: o for o in orbs}
    # loop traversed once either way, amplitude 2/3
    assert by_seq[(1,)].A == pytest.approx(2 / 3)
    assert by_seq[(3,)].A == pytest.approx(2 / 3)
    assert by_seq[(1,)].partner == orbs.index(by_seq[(3,)])
    # bounce along the tail: 1 * (-1/3)
    assert by_seq[(0, 2)].A == pytest.approx(-1 / 3)
    assert by_seq[(0, 2)].L == pytest.approx(2.0)


def test_repetitions_and_csv():
    g = library.tadpole(1.0, math.sqrt(2))
    orbs = orbits_of_length(g, 4)
    reps = [o for o in orbs if o.r > 1]
    assert {o.r for o in reps} == {2, 4}
    csv = orbits_to_csv(orbs).splitlines()
    assert csv[0].startswith("length_topological,length_metric")
    assert len(csv) == len(orbs) + 1


def test_budget_guard():
    with pytest.raises(BudgetExceededError):
        orbit_table(library.complete_graph(5), 8, max_orbits=1000)
    with pytest.raises(GraphInputError):
        orbit_table(library.tadpole(), 0)


def test_trace_identity_single_graph(rng):
    g = library.complete_graph(4)
    tab = orbit_table(g, 6)
    for n in range(1, 7):
        k = rng.uniform(0, 40)
        a, b = trace_identity_check(g, k, n, tab)
        assert abs(a - b) <= 1e-10 * (1 + abs(a))


def test_trace_identity_delta_graph():
    g = library.tadpole(1.0, math.sqrt(2), alpha=2.0)
    for n in (1, 3, 5):
        a, b = trace_identity_check(g, 4.3, n)
        assert abs(a - b) <= 1e-10 * (1 + abs(a))


def test_gaussian_transform_numerically():
    for h in (GaussianTestFunction(0.7), GaussianTestFunction(0.5, center=3.0)):
        for x in (0.0, 0.9, 2.5):
            num = quad(lambda k: h(k) * math.cos(k * x), -60, 60, limit=400)[0]
            assert float(h.hat(x)) == pytest.approx(num, abs=1e-10)


def test_gaussian_for_cutoff():
    h = GaussianTestFunction.for_cutoff(20.0)
    assert float(h.hat(20.0) / h.hat(0.0)) == pytest.approx(1e-12, rel=1e-9)


def test_interval_trace_formula_is_poisson():
    L = 1.0
    g = library.interval(L)
    h = GaussianTestFunction.for_cutoff(20.0)
    sp = find_spectrum(g, h.support_radius(1e-16) + 1)
    rep = trace_formula_check(g, sp, h, 20.0)
    # Poisson summation: sum_n h(n pi / L) = (L/pi) sum_m hat h(2 L m)
    m = np.arange(-50, 51)
    poisson = L / math.pi * float(np.sum(h.hat(2 * L * m)))
    direct = float(np.sum(h(m * math.pi / L)))
    assert rep.zero_mode_multiplicity == 1
    assert rep.geometric_side == pytest.approx(poisson, abs=1e-12)
    assert rep.spectral_side == pytest.approx(direct, abs=1e-12)
    assert rep.ok


def test_trace_formula_delta_rejected():
    g = library.tadpole(alpha=1.0)
    with pytest.raises(KDependentError):
        trace_formula_check(g, find_spectrum(g, 5.0), GaussianTestFunction(1.0), 5.0)


def test_trajectory_expansion_converges():
    g = library.open_star(2, [1.0, math.sqrt(2)])
    k = 2.3
    S = open_scattering_matrix(g, k).S
    part = scattering_trajectory_expansion(g, 0, 1, k, 400)
    assert abs(part - S[1, 0]) < 1e-8


def test_trajectory_expansion_dirichlet_lead():
    g = library.dirichlet_wall()
    assert scattering_trajectory_expansion(g, 0, 0, 1.0, 3) == pytest.approx(-1.0)
    with pytest.raises(GraphInputError):
        scattering_trajectory_expansion(library.interval(1.0, DIRICHLET), 0, 0, 1.0, 3)
