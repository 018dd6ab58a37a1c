import math

import numpy as np
import pytest

from oracles import cross_validate, delta_tadpole_roots, on_mask
from qgraph import library
from qgraph.dtn import (all_vertex_dtn, dtn_secular_function, edge_dtn, find_spectrum_dtn, masked_lengths,
                        reduce_dtn)
from qgraph.errors import GraphInputError, PoleError, SingularInteriorError
from qgraph.graph import CustomUnitary
from qgraph.spectrum import find_spectrum


def test_edge_dtn_coefficients():
    k, ln = 1.3, 0.7
    e = edge_dtn(ln, k)
    assert e.A == pytest.approx(-k / math.tan(k * ln), rel=1e-14)
    assert e.B == pytest.approx(k / math.sin(k * ln), rel=1e-14)
    # A^2 - B^2 = -k^2
    assert e.A ** 2 - e.B ** 2 == pytest.approx(-k * k, rel=1e-12)


def test_edge_dtn_pole():
    with pytest.raises(PoleError) as info:
        edge_dtn(1.0, math.pi, edge_id=4)
    assert info.value.edge_id == 4


def test_all_vertex_dtn_tadpole_matrix():
    l1, l2, k = 1.0, math.sqrt(2), 0.9
    lam = all_vertex_dtn(library.tadpole(l1, l2), k)
    A1, B1 = -k / math.tan(k * l1), k / math.sin(k * l1)
    A2, B2 = -k / math.tan(k * l2 / 2), k / math.sin(k * l2 / 2)
    ref = np.array([[A1 + 2 * A2, B1, 2 * B2], [B1, A1, 0], [2 * B2, 0, 2 * A2]])
    assert lam.labels == (0, 1, ("dummy", 1))
    assert np.allclose(lam.matrix, ref, rtol=1e-13)
    # direct loop treatment: 2(A + B) on the diagonal
    d = all_vertex_dtn(library.tadpole(l1, l2), k, loops="direct")
    A, B = -k / math.tan(k * l2), k / math.sin(k * l2)
    assert d.matrix[0, 0] == pytest.approx(A1 + 2 * A + 2 * B, rel=1e-13)
    assert np.allclose(reduce_dtn(lam, [0, 1]).matrix, d.matrix, rtol=1e-12)


def test_reduction_of_interval_chain():
    # subdividing an interval does not change the boundary DtN map
    k = 2.1
    g = library.interval(1.0).subdivided(0, 0.37)
    red = reduce_dtn(all_vertex_dtn(g, k), [0, 1])
    e = edge_dtn(1.0, k)
    assert np.allclose(red.matrix, [[e.A, e.B], [e.B, e.A]], rtol=1e-12)


def test_reduction_singular_interior():
    g = library.interval(2.0).subdivided(0, 0.5)
    lam = all_vertex_dtn(g, 0.5 * math.pi + 1e-3)
    with pytest.raises(GraphInputError):
        reduce_dtn(lam, ["nope"])
    # interior Neumann point of a Dirichlet-Dirichlet interval of length 2 at k = pi/2
    lam = all_vertex_dtn(g, math.pi / 2 * (1 + 1e-15))
    with pytest.raises(SingularInteriorError):
        reduce_dtn(lam, [0, 1])


def test_custom_unitary_rejected():
    g = library.interval(1.0, CustomUnitary(np.array([[1j]])))
    with pytest.raises(GraphInputError):
        find_spectrum_dtn(g, 5.0)


@pytest.mark.parametrize("loops", ["split", "direct"])
def test_tadpole_cross_validation(loops):
    g = library.tadpole(1.0, math.sqrt(2))
    matched, worst, unmatched, ok = cross_validate(g, 30.0, loops)
    assert ok and worst <= 1e-8 and matched > 10
    assert len(unmatched) > 0
    assert all(on_mask(k, [math.sqrt(2)] if loops == "direct" else [math.sqrt(2) / 2, 1.0]) for k in unmatched)


@pytest.mark.parametrize("alpha", [-2.0, 0.0, 3.0])
def test_delta_tadpole_roots(alpha):
    l1, l2 = 1.0, math.sqrt(2)
    g = library.tadpole(l1, l2, alpha=alpha)
    ref = delta_tadpole_roots(l1, l2, alpha, 30.0)
    lens = masked_lengths(g)
    ref = ref[[not on_mask(k, lens, 1e-6) for k in ref]]
    dt = find_spectrum_dtn(g, 30.0)
    sc = find_spectrum(g, 30.0, threads=1)
    dk = dt.k[[not on_mask(k, lens, 1e-6) for k in dt.k]]
    assert len(dk) == len(ref)
    assert np.max(np.abs(dk - ref)) <= 1e-8
    for k in ref:
        assert np.min(np.abs(sc.k - k)) <= 1e-8


def test_dirichlet_vertices_removed():
    g = library.star_dirichlet_tips()
    f = dtn_secular_function(g, np.array([1.0, 2.0]))
    assert f.shape == (2,)
    assert set(masked_lengths(g)) == {e.length for e in g.edges}
