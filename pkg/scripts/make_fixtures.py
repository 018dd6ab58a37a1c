"""Regenerate tests/fixtures from the graphs/ directory.

Run from the repository root after an intentional output change:
    python3 scripts/make_fixtures.py
"""
import io
import json
import os
from contextlib import redirect_stderr, redirect_stdout

from qgraph.cli import run

CASES = {
    "tadpole_spectrum": ["spectrum", "{root}/graphs/tadpole.json", "--kmax", "20"],
    "tadpole_secular": ["secular", "{root}/graphs/tadpole.json", "--k", "1.3"],
    "tadpole_ks_orbits": ["orbits", "{root}/graphs/tadpole_ks.json", "--nmax", "5"],
    "tadpole_ks_formfactor": ["formfactor", "{root}/graphs/tadpole_ks.json", "--n", "0-4",
                              "--samples", "4000", "--seed", "12345"],
    "tadpole_ks_nodal": ["nodal", "{root}/graphs/tadpole_ks.json", "--n-states", "12", "--morse"],
    "delta_tadpole_spectrum": ["spectrum", "{root}/graphs/delta_tadpole.json", "--kmax", "15"],
    "open_loop_scatter": ["scatter", "{root}/graphs/open_loop.json", "--k", "1.0"],
    "star3_equal_spectrum": ["spectrum", "{root}/graphs/star3_equal.json", "--kmax", "13"],
    "star_dirichlet_tips_dtn": ["dtn", "{root}/graphs/star_dirichlet_tips.json", "--k", "2.2",
                                "--boundary", "1,2", "--kmax", "10"],
    "tadpole_two_tails_dtn": ["dtn", "{root}/graphs/tadpole_two_tails.json", "--kmax", "10"],
    "square_with_diagonal_dtn": ["dtn", "{root}/graphs/square_with_diagonal.json", "--kmax", "10"],
    "figure_eight_magnetic": ["magnetic", "{root}/graphs/figure_eight.json", "--n", "6", "--full"],
    "dirichlet_bond_classical": ["classical", "{root}/graphs/dirichlet_bond.json"],
    "complete_k5_classical": ["classical", "{root}/graphs/complete_k5.json"],
    "star30_classical": ["classical", "{root}/graphs/star30.json"],
    "neumann_bond_surgery": ["surgery", "{root}/graphs/neumann_bond.json", "--op", "dirichlet",
                             "--vertices", "1", "--check"],
    "star3_split_surgery": ["surgery", "{root}/graphs/star3_generic.json", "--op", "split",
                            "--vertex", "0", "--partition", "0;1;2", "--check"],
    "star3_generic_trace": ["trace-check", "{root}/graphs/star3_generic.json"],
}


def main():
    root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
    out_dir = os.path.join(root, "tests", "fixtures")
    os.makedirs(out_dir, exist_ok=True)
    for name, argv in CASES.items():
        buf = io.StringIO()
        with redirect_stdout(buf), redirect_stderr(io.StringIO()):
            code = run([a.replace("{root}", root) for a in argv] + ["--threads", "1"])
        with open(os.path.join(out_dir, name + ".json"), "w") as fh:
            json.dump({"argv": argv + ["--threads", "1"], "exit": code, "rtol": 1e-8,
                       "stdout": buf.getvalue()}, fh, indent=1)
            fh.write("\n")
        print(name, code)


if __name__ == "__main__":
    main()
