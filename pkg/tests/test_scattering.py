import math

import numpy as np
import pytest
import sympy as sp

from qgraph import library
from qgraph.errors import GraphInputError
from qgraph.graph import DIRICHLET, NK, CustomUnitary, Delta, MetricGraph
from qgraph.scattering import (QuantumMapEvaluator, assemble_edge_scattering, open_scattering_matrix,
                               quantum_map, vertex_scattering_matrix, wigner_smith)


def test_nk_vertex_matrix():
    for d in range(1, 6):
        s = vertex_scattering_matrix(NK, d)
        assert np.allclose(np.diag(s), 2.0 / d - 1.0)
        assert np.allclose(s.conj().T @ s, np.eye(d), atol=1e-14)
    assert np.allclose(vertex_scattering_matrix(NK, 1), [[1.0]])
    assert np.allclose(vertex_scattering_matrix(DIRICHLET, 3), -np.eye(3))


def test_delta_vertex_formula():
    d, a, k = 3, 2.5, 1.7
    s = vertex_scattering_matrix(Delta(a), d, k)
    ref = -np.eye(d) + 2.0 / (d + 1j * a / k) * np.ones((d, d))
    assert np.allclose(s, ref, atol=1e-15)
    assert np.allclose(s.conj().T @ s, np.eye(d), atol=1e-14)
    # large coupling tends to Dirichlet
    assert np.allclose(vertex_scattering_matrix(Delta(1e12), d, 1.0), -np.eye(d), atol=1e-10)
    with pytest.raises(GraphInputError):
        vertex_scattering_matrix(Delta(a), d, None)


def test_custom_unitary_passthrough():
    U = np.array([[0, 1], [1, 0]], dtype=complex)
    assert np.array_equal(vertex_scattering_matrix(CustomUnitary(U), 2), U)
    with pytest.raises(GraphInputError):
        vertex_scattering_matrix(CustomUnitary(U), 3)


def test_tadpole_bond_scattering_matrix():
    ref = np.array([[0, 2, -1, 2], [0, 2, 2, -1], [3, 0, 0, 0], [0, -1, 2, 2]]) / 3.0
    S = assemble_edge_scattering(library.tadpole(1.0, 2.0)).matrix
    assert np.allclose(S, ref, atol=1e-15)


def test_delta_graph_requires_k():
    g = library.tadpole(1.0, 2.0, alpha=1.0)
    with pytest.raises(GraphInputError):
        assemble_edge_scattering(g)
    es = assemble_edge_scattering(g, 2.0)
    assert es.k_dependent
    assert np.allclose(es.matrix.conj().T @ es.matrix, np.eye(4), atol=1e-14)


def test_quantum_map_unitary_and_batch(rng):
    g = library.complete_graph(4)
    ev = QuantumMapEvaluator(g)
    ks = rng.uniform(0.1, 30, 5)
    al = rng.uniform(-1, 1, g.n_bonds)
    Ub = ev.batch(ks, al)
    for k, U in zip(ks, Ub):
        assert np.allclose(U, quantum_map(g, k, al), atol=1e-14)
        assert np.allclose(U.conj().T @ U, np.eye(ev.size), atol=1e-12)


def open_loop_closed_form(k, ell):
    z = np.exp(1j * k * ell)
    return z * (3 - 1 / z) / (3 - z)


def test_open_loop_closed_form(rng):
    ell = 1.3
    g = library.open_loop(ell)
    for k in rng.uniform(0.01, 50.0, 1000):
        res = open_scattering_matrix(g, k)
        assert abs(res.S[0, 0] - open_loop_closed_form(k, ell)) <= 1e-12
        assert np.linalg.norm(res.S @ res.S.conj().T - np.eye(1)) <= 1e-10
        z = np.exp(1j * k * ell)
        if not res.singular:
            assert np.allclose(res.R[:, 0], 2 * z / (3 - z), atol=1e-10)


def test_open_loop_removable_singularity():
    ell = 1.0
    g = library.open_loop(ell)
    for n in (1, 2, 5):
        res = open_scattering_matrix(g, 2 * math.pi * n / ell)
        assert res.singular
        assert abs(res.S[0, 0] - 1.0) <= 1e-6


def test_open_star_unitary(rng):
    g = library.open_star(3, [1.0, math.sqrt(2)])
    for k in rng.uniform(0.1, 20, 50):
        S = open_scattering_matrix(g, k).S
        assert S.shape == (3, 3)
        assert np.allclose(S @ S.conj().T, np.eye(3), atol=1e-10)


def test_dirichlet_wall_reflects():
    S = open_scattering_matrix(library.dirichlet_wall(), 2.0).S
    assert np.allclose(S, [[-1.0]])


def test_closed_graph_rejected():
    with pytest.raises(GraphInputError):
        open_scattering_matrix(library.tadpole(), 1.0)


def test_wigner_smith_matches_symbolic_derivative():
    ell = 1.3
    k = sp.symbols("k", real=True)
    z = sp.exp(sp.I * k * ell)
    S = z * (3 - 1 / z) / (3 - z)
    Q = sp.lambdify(k, -sp.I * sp.conjugate(S) * sp.diff(S, k), "numpy")
    g = library.open_loop(ell)
    for kv in (0.3, 1.1, 2.9, 7.7):
        ws = wigner_smith(g, kv)
        assert not ws.singular
        assert abs(ws.Q[0, 0] - complex(Q(kv))) <= 1e-6 * (1 + abs(Q(kv)))
        # Q is Hermitian with positive time delay for this graph
        assert abs(ws.Q[0, 0].imag) <= 1e-8


def test_lead_with_delta_vertex_unitary():
    g = MetricGraph.from_edges([(0, None, 0.0), (0, 1, 1.0)], {0: Delta(2.0), 1: NK})
    for k in (0.5, 1.5, 4.0):
        S = open_scattering_matrix(g, k).S
        assert abs(abs(S[0, 0]) - 1.0) <= 1e-12
