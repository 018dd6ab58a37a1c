import json
import math

import numpy as np
import pytest

from qgraph import library
from qgraph.errors import GraphInputError
from qgraph.graph import (DIRICHLET, NK, CustomUnitary, Delta, Edge, MetricGraph, Vertex, betti_number,
                          graph_from_dict, graph_to_dict, load_graph, save_graph, validate_graph)


def test_directed_edge_order_and_reversal():
    g = library.tadpole(1.0, 2.0)
    idx = g.index
    assert idx.size == 4
    assert [idx.label(i) for i in range(4)] == ["e0+", "e1+", "e0-", "e1-"]
    assert list(idx.reversal) == [2, 3, 0, 1]
    assert np.allclose(idx.lengths, [1.0, 2.0, 1.0, 2.0])


def test_leads_come_last():
    g = library.open_loop(1.5)
    idx = g.index
    assert idx.n_bonds == 1 and idx.n_leads == 1
    assert idx.size == 3
    assert idx.lead(0) == 2


def test_betti_numbers():
    assert betti_number(library.interval()) == 0
    assert betti_number(library.tadpole()) == 1
    assert betti_number(library.figure_eight()) == 2
    assert betti_number(library.complete_graph(5)) == 6


def test_betti_rejects_disconnected():
    g = MetricGraph.from_edges([(0, 1, 1.0), (2, 3, 1.0)])
    with pytest.raises(GraphInputError):
        betti_number(g)


def test_validation_lists_violations():
    g = MetricGraph((Vertex(0, NK), Vertex(1, NK)), (Edge(0, 0, 1, -1.0),))
    rep = validate_graph(g)
    assert not rep.ok
    assert any("nonpositive length" in v for v in rep.violations)
    g2 = MetricGraph.from_edges([(0, 1, 1.0), (2, 3, 1.0)])
    assert "disconnected" in validate_graph(g2).violations


def test_custom_unitary_shape_and_unitarity():
    bad = np.array([[1.0, 1.0], [0.0, 1.0]])
    g = MetricGraph.from_edges([(0, 1, 1.0), (0, 2, 1.0)], {0: CustomUnitary(bad)})
    assert any("not unitary" in v for v in validate_graph(g).violations)
    g = MetricGraph.from_edges([(0, 1, 1.0)], {0: CustomUnitary(np.eye(2))})
    assert any("shape" in v for v in validate_graph(g).violations)


def test_json_roundtrip(tmp_path):
    g = MetricGraph.from_edges([(0, 1, 1.25), (1, 1, 0.5), (1, None, 0.0)],
                               {0: DIRICHLET, 1: Delta(-0.75)})
    p = tmp_path / "g.json"
    save_graph(g, p)
    h = load_graph(p)
    assert graph_to_dict(h) == graph_to_dict(g)
    assert h.edges[2].is_lead and math.isinf(h.edges[2].length)


def test_unitary_condition_roundtrip():
    th = 0.3
    U = np.array([[math.cos(th), 1j * math.sin(th)], [1j * math.sin(th), math.cos(th)]])
    g = MetricGraph.from_edges([(0, 1, 1.0), (0, 2, 1.0)], {0: CustomUnitary(U)})
    h = graph_from_dict(json.loads(json.dumps(graph_to_dict(g))))
    assert np.allclose(h.vertices[0].condition.matrix, U)


@pytest.mark.parametrize("data, field", [
    ({"vertices": [{"id": 0}, {"id": 1}], "edges": [{"id": 0, "from": 0, "to": 1, "length": -1}]},
     "edges[0].length"),
    ({"vertices": [{"id": 0}], "edges": [{"id": 0, "from": 0, "to": 3, "length": 1}]}, "edges[0].to"),
    ({"vertices": [{"id": 0, "condition": "robin"}], "edges": []}, "vertices[0].condition"),
    ({"vertices": [{"id": 0, "condition": {"delta": "x"}}], "edges": []}, "vertices[0].condition.delta"),
    ({"edges": []}, "vertices"),
    ({"vertices": [{"id": 0}, {"id": 1}], "edges": [{"id": 0, "from": 0, "to": 1}]}, "edges[0].length"),
])
def test_malformed_input_names_field(data, field):
    with pytest.raises(GraphInputError) as info:
        graph_from_dict(data)
    assert info.value.field == field


def test_load_reports_bad_json(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(GraphInputError) as info:
        load_graph(p)
    assert info.value.field == "<json>"


def test_components_and_renumbering():
    g = MetricGraph.from_edges([(0, 1, 1.0), (2, 3, 2.0), (3, 3, 0.5)])
    comps = g.component_graphs()
    assert len(comps) == 2
    assert sorted(c.total_length for c in comps) == [1.0, 2.5]
    for c in comps:
        assert validate_graph(c).ok


def test_subdivision_keeps_length():
    g = library.tadpole(1.0, 2.0)
    h = g.subdivided(1, 0.25)
    assert h.total_length == pytest.approx(g.total_length)
    assert len(h.vertices) == 3 and betti_number(h) == 1


def test_channels_at_vertex():
    g = library.tadpole()
    out, inc = g.index.channels_at(g, 0)
    # origin endpoints: out = e+, in = e-; loop terminus: out = e-, in = e+
    assert out == [0, 1, 3] and inc == [2, 3, 1]
