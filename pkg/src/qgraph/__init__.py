"""Quantum graph spectral toolkit."""
from .errors import (BudgetExceededError, ContinuationError, GraphInputError, IncompleteSpectrumError,
                     InsufficientDataError, KDependentError, NonGenericError, NumericalError, PoleError,
                     QGraphError, ResidualError, SingularInteriorError)
from .graph import (DIRICHLET, NK, CustomUnitary, Delta, Dirichlet, Edge, MetricGraph, NeumannKirchhoff,
                    Vertex, betti_number, directed_edge_index, graph_from_dict, graph_to_dict, load_graph,
                    save_graph, validate_graph)
from .scattering import (assemble_edge_scattering, open_scattering_matrix, quantum_map,
                         transport_diagonal, vertex_scattering_matrix, wigner_smith)
from .spectrum import (Eigenfunction, Spectrum, detect_perfect_scars, eigenfunctions_at, find_n_states,
                       find_spectrum, secular_function)
from .dtn import all_vertex_dtn, dtn_secular_function, edge_dtn, find_spectrum_dtn, reduce_dtn
from .orbits import (GaussianTestFunction, classical_map, enumerate_primitive_orbits, orbit_table,
                     trace_formula_check, trace_identity_check)
from .statistics import (form_factor_diagonal, form_factor_exact_small, form_factor_mc,
                         spacing_distribution, tanner_gap_report, weyl_ratio)
from .nodal import (magnetic_hessian_morse_index, nodal_count, nodal_data, nodal_domain_count,
                    surplus_distribution)
from .surgery import (check_interlacing, energy_spectrum, impose_dirichlet, increase_coupling,
                      split_vertex, verify_surgery)
from .kernels import BACKEND

__version__ = "0.1.0"
