#!/usr/bin/env python3
"""Generate the two canonical structure fixtures.

tbar.json    4 nodes, 2 bars, 4 strings, planar, built in exact prestress
             equilibrium; motion comes from a symmetric initial velocity
             field (radial breathing + twist about z). Gravity is on; the
             free-fall mode is removed by centering downstream. Its only
             geometric half-turn with a 2-orbit permutation is the one about
             the z axis (the arms have different lengths on purpose).

lander.json  12 nodes, 6 bars, 24 strings: a distorted expanded octahedron.
             Three distinct pair offsets plus a shift of the x-bar pair leave
             exactly one non-trivial geometric symmetry, a half-turn whose
             axis is then tilted by conjugating every coordinate with a
             rotation W taking e_z to (0,1,2)/sqrt(5). Slight string
             prestretch plus a least-squares bar precompression keeps the
             initial imbalance small; a decaying radial pulse and a symmetric
             velocity field supply the motion. Gravity is zero: the tilted
             axis is incompatible with a vertical load.

Run from the repository root:  python3 scripts/gen_fixtures.py
"""

import json
import math
import os

OUT_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "fixtures")


def sub(a, b):
    return [a[0] - b[0], a[1] - b[1], a[2] - b[2]]


def norm(a):
    return math.sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2])


def dist(a, b):
    return norm(sub(a, b))


def tbar():
    nodes = [
        [0.5, 0.0, 0.0],
        [0.0, 0.3, 0.0],
        [-0.5, 0.0, 0.0],
        [0.0, -0.3, 0.0],
    ]
    bars = [[0, 2], [1, 3]]
    strings = [[0, 1], [1, 2], [2, 3], [3, 0]]

    E_bar, A_bar = 8.10e9, 2.0e-7
    E_str, A_str = 2.00e6, 2.5e-4
    m_bar, m_str = 2.0, 0.4

    # Uniform string force density x_s > 0 balances when every bar carries
    # exactly -x_s (check: the x component at node 0 is -x_b - x_s).
    l_str = dist(nodes[0], nodes[1])  # sqrt(0.34), same for all four
    l0_str = 0.55
    x_s = E_str * A_str * (1.0 / l0_str - 1.0 / l_str)
    assert x_s > 0

    materials = []
    for i, j in bars:
        L = dist(nodes[i], nodes[j])
        inv_l0 = 1.0 / L - x_s / (E_bar * A_bar)  # force density -x_s
        materials.append({"E": E_bar, "A": A_bar, "rest_length": 1.0 / inv_l0, "mass": m_bar})
    for _ in strings:
        materials.append({"E": E_str, "A": A_str, "rest_length": l0_str, "mass": m_str})

    # Residual check: per-node force sum under the chosen densities.
    dens = [-x_s, -x_s, x_s, x_s, x_s, x_s]
    worst = 0.0
    for i in range(4):
        f = [0.0, 0.0, 0.0]
        for e, (a, b) in enumerate(bars + strings):
            if i == a or i == b:
                j = b if i == a else a
                d = sub(nodes[j], nodes[i])
                for k in range(3):
                    f[k] += dens[e] * d[k]
        worst = max(worst, max(abs(v) for v in f))
    assert worst < 1e-9, worst

    return {
        "name": "tbar",
        "nodes": nodes,
        "bars": bars,
        "strings": strings,
        "materials": materials,
        "free": [0, 1, 2, 3],
        "constrained": [],
        "gravity": 9.81,
        "initial_velocity": {"radial": 0.14, "angular": [0.0, 0.0, 0.5]},
    }


def lander():
    a, d = 0.5, 0.05
    c1, c2, c3 = 0.24, 0.30, 0.36
    raw = [
        [-a + d, -c1, 0.0],
        [a + d, -c1, 0.0],
        [a - d, c1, 0.0],
        [-a - d, c1, 0.0],
        [0.0, -a, -c2],
        [0.0, a, -c2],
        [0.0, -a, c2],
        [0.0, a, c2],
        [-c3, 0.0, -a],
        [-c3, 0.0, a],
        [c3, 0.0, a],
        [c3, 0.0, -a],
    ]
    bars = [[0, 1], [2, 3], [4, 5], [6, 7], [8, 9], [10, 11]]
    strings = [
        [0, 4], [0, 6], [0, 8], [0, 9],
        [1, 4], [1, 6], [1, 10], [1, 11],
        [2, 5], [2, 7], [2, 10], [2, 11],
        [3, 5], [3, 7], [3, 8], [3, 9],
        [4, 8], [4, 11], [5, 8], [5, 11],
        [6, 9], [6, 10], [7, 9], [7, 10],
    ]

    # Half-turn about z maps the raw coordinates onto themselves with the
    # permutation (2,3,0,1, 5,4, 7,6, 11,10,9,8); conjugate by W (e_z -> u)
    # so the realized rotation axis is u = (0,1,2)/sqrt(5).
    s5 = math.sqrt(5.0)
    W = [
        [1.0, 0.0, 0.0],
        [0.0, 2.0 / s5, 1.0 / s5],
        [0.0, -1.0 / s5, 2.0 / s5],
    ]
    perm = [2, 3, 0, 1, 5, 4, 7, 6, 11, 10, 9, 8]
    for i in range(12):
        p, q = raw[i], raw[perm[i]]
        assert max(abs(-p[0] - q[0]), abs(-p[1] - q[1]), abs(p[2] - q[2])) < 1e-12
    sset = {tuple(sorted(e)) for e in strings}
    assert all(tuple(sorted((perm[i], perm[j]))) in sset for i, j in strings)
    nodes = [[sum(W[r][k] * q[k] for k in range(3)) for r in range(3)] for q in raw]

    E_bar, A_bar = 2.06e11, 1.0e-8
    E_str, A_str = 7.60e10, 8.0e-9
    m_bar, m_str = 3.0, 0.5

    # Strings: 2% prestretch. Bars: per-bar force densities from the
    # least-squares fit that best cancels the string pull at every node.
    stretch = 1.02
    x_str = []
    for i, j in strings:
        L = dist(nodes[i], nodes[j])
        l0 = L / stretch
        x_str.append(E_str * A_str * (1.0 / l0 - 1.0 / L))
    assert all(x > 0 for x in x_str)

    # Net string force per node.
    f_str = [[0.0, 0.0, 0.0] for _ in range(12)]
    for e, (i, j) in enumerate(strings):
        dv = sub(nodes[j], nodes[i])
        for k in range(3):
            f_str[i][k] += x_str[e] * dv[k]
            f_str[j][k] -= x_str[e] * dv[k]

    # Bar b with density x_b adds x_b * (q_j - q_i) at node i. Solve the 6x6
    # normal equations of min_x sum_i |f_str_i + A_i x|^2.
    cols = []  # cols[b][node][k]
    for i, j in bars:
        col = [[0.0, 0.0, 0.0] for _ in range(12)]
        dv = sub(nodes[j], nodes[i])
        for k in range(3):
            col[i][k] = dv[k]
            col[j][k] = -dv[k]
        cols.append(col)
    G = [[sum(cols[p][n][k] * cols[q][n][k] for n in range(12) for k in range(3)) for q in range(6)] for p in range(6)]
    rhs = [-sum(cols[p][n][k] * f_str[n][k] for n in range(12) for k in range(3)) for p in range(6)]
    # Gaussian elimination with partial pivoting.
    for c in range(6):
        piv = max(range(c, 6), key=lambda r: abs(G[r][c]))
        G[c], G[piv] = G[piv], G[c]
        rhs[c], rhs[piv] = rhs[piv], rhs[c]
        for r in range(c + 1, 6):
            f = G[r][c] / G[c][c]
            for k in range(c, 6):
                G[r][k] -= f * G[c][k]
            rhs[r] -= f * rhs[c]
    x_bar = [0.0] * 6
    for r in range(5, -1, -1):
        x_bar[r] = (rhs[r] - sum(G[r][k] * x_bar[k] for k in range(r + 1, 6))) / G[r][r]
    assert all(x < 0 for x in x_bar), x_bar  # bars must end up in compression

    materials = []
    for b, (i, j) in enumerate(bars):
        L = dist(nodes[i], nodes[j])
        inv_l0 = 1.0 / L + x_bar[b] / (E_bar * A_bar)
        materials.append({"E": E_bar, "A": A_bar, "rest_length": 1.0 / inv_l0, "mass": m_bar})
    for e, (i, j) in enumerate(strings):
        L = dist(nodes[i], nodes[j])
        materials.append({"E": E_str, "A": A_str, "rest_length": L / stretch, "mass": m_str})

    u = [0.0, 1.0 / s5, 2.0 / s5]
    return {
        "name": "lander",
        "nodes": nodes,
        "bars": bars,
        "strings": strings,
        "materials": materials,
        "free": list(range(12)),
        "constrained": [],
        "gravity": 0.0,
        "initial_velocity": {"radial": 0.4, "angular": [0.6 * u[0], 0.6 * u[1], 0.6 * u[2]]},
        "external_force": {"type": "radial_pulse", "amplitude": 25.0, "frequency": 3.0, "decay": 0.4},
    }


def main():
    os.makedirs(OUT_DIR, exist_ok=True)
    for build in (tbar, lander):
        spec = build()
        path = os.path.join(OUT_DIR, spec["name"] + ".json")
        with open(path, "w") as f:
            json.dump(spec, f, indent=1)
            f.write("\n")
        print("wrote", path)


if __name__ == "__main__":
    main()
