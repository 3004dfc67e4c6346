from __future__ import annotations

import math

import numpy as np
import pytest
import scipy.linalg

from noisy_mps.circuits import (
    SYCAMORE_COLUMNS,
    Circuit,
    Gate,
    Grid,
    brick_1d,
    gate_matrix,
    grid_2d,
    haar_average_fidelity,
    iswap_theta,
    named_gate,
    noisy_gate,
    parse_grid,
    random_1q,
    rotation,
    swap_qubit_order,
    with_noisy_gates,
)
from noisy_mps.errors import ValidationError

X = gate_matrix("X")
Y = gate_matrix("Y")
Z = gate_matrix("Z")


def test_square_root_gates_square_to_paulis():
    w = (X + Y) / math.sqrt(2)
    np.testing.assert_allclose(gate_matrix("SX") @ gate_matrix("SX"), X, atol=1e-15)
    np.testing.assert_allclose(gate_matrix("SY") @ gate_matrix("SY"), Y, atol=1e-15)
    np.testing.assert_allclose(gate_matrix("SW") @ gate_matrix("SW"), w, atol=1e-15)


def test_cx_is_hadamard_conjugated_cz():
    h = np.kron(np.eye(2), gate_matrix("H"))
    np.testing.assert_allclose(h @ gate_matrix("CZ") @ h, gate_matrix("CX"), atol=1e-15)


def test_iswap_theta_entries():
    u = iswap_theta(0.7)
    assert u[1, 2] == -1j and u[2, 1] == -1j
    assert u[3, 3] == pytest.approx(np.exp(-0.7j))
    np.testing.assert_allclose(gate_matrix("iS_theta"), iswap_theta(1.0))
    np.testing.assert_allclose(gate_matrix("iS_theta:0.5"), iswap_theta(0.5))
    np.testing.assert_allclose(gate_matrix("iS_pi/6"), iswap_theta(math.pi / 6))
    np.testing.assert_allclose(gate_matrix("iSWAP"), iswap_theta(0.0))


def test_unknown_tag():
    with pytest.raises(ValidationError):
        gate_matrix("FOO")


def test_rotation_matches_matrix_exponential():
    theta, alpha, phi = 0.4, 1.1, 2.5
    m = (math.sin(alpha) * math.cos(phi), math.sin(alpha) * math.sin(phi), math.cos(alpha))
    expected = scipy.linalg.expm(-1j * theta * (m[0] * X + m[1] * Y + m[2] * Z))
    np.testing.assert_allclose(rotation(theta, alpha, phi), expected, atol=1e-14)


def test_random_rotations_are_unitary_and_seeded():
    a = [random_1q(np.random.default_rng(3), q) for q in range(3)]
    b = [random_1q(np.random.default_rng(3), q) for q in range(3)]
    assert a == b
    for g in a:
        np.testing.assert_allclose(g.matrix.conj().T @ g.matrix, np.eye(2), atol=1e-14)


def test_gate_rejects_non_unitary_and_bad_targets():
    with pytest.raises(ValidationError):
        Gate(np.array([[1, 1], [0, 1]], dtype=complex), (0,), "bad")
    with pytest.raises(ValidationError):
        Gate(np.eye(4), (1, 1), "I4")
    with pytest.raises(ValidationError):
        Gate(np.eye(4), (0,), "I4")


def test_swap_qubit_order_is_swap_conjugation():
    rng = np.random.default_rng(0)
    u = scipy.linalg.expm(1j * (lambda a: a + a.conj().T)(rng.standard_normal((4, 4)) + 0j))
    s = gate_matrix("SWAP")
    np.testing.assert_allclose(swap_qubit_order(u), s @ u @ s, atol=1e-14)


def test_haar_average_fidelity_monte_carlo():
    rng = np.random.default_rng(1)
    v = noisy_gate(named_gate("I4", 0, 1), 0.9, rng).matrix
    psi = rng.standard_normal((20000, 4)) + 1j * rng.standard_normal((20000, 4))
    psi /= np.linalg.norm(psi, axis=1, keepdims=True)
    mc = np.mean(np.abs(np.einsum("si,ij,sj->s", psi.conj(), v, psi)) ** 2)
    assert mc == pytest.approx(haar_average_fidelity(v), abs=4e-3)
    assert haar_average_fidelity(v) == pytest.approx(0.9, abs=1e-9)


@pytest.mark.parametrize("f", [0.995, 0.99, 0.98])
def test_noisy_gate_calibration(f):
    rng = np.random.default_rng(2)
    g = named_gate("CZ", 3, 4)
    noisy = noisy_gate(g, f, rng)
    assert noisy.targets == (3, 4)
    assert haar_average_fidelity(g.matrix.conj().T @ noisy.matrix) == pytest.approx(f, abs=1e-10)
    assert noisy_gate(g, 1.0, rng) is g


def test_brick_two_qubits_two_layers():
    c = brick_1d(2, 2, seed=0)
    assert c.n_two_qubit_gates == 2 and c.depth == 2


def test_brick_structure():
    c = brick_1d(12, 24, seed=5)
    assert c.depth == 24
    assert c.n_two_qubit_gates == 12 * 6 + 12 * 5
    two_q = [c.layers[i] for i in c.two_qubit_layers()]
    assert [g.targets for g in two_q[0]] == [(i, i + 1) for i in range(0, 11, 2)]
    assert [g.targets for g in two_q[1]] == [(i, i + 1) for i in range(1, 11, 2)]
    assert brick_1d(12, 24, seed=5) == c
    assert brick_1d(12, 24, seed=6) != c


def test_truncated_prefix():
    c = brick_1d(6, 10, seed=1)
    t = c.truncated(4)
    assert t.depth == 4
    assert t.layers == c.layers[: len(t.layers)]


def test_layer_overlap_rejected():
    c = Circuit(3)
    with pytest.raises(ValidationError):
        c.append_layer([named_gate("CZ", 0, 1), named_gate("CZ", 1, 2)])
    with pytest.raises(ValidationError):
        c.append_layer([named_gate("X", 3)])


def test_circuit_round_trip(tmp_path):
    c = with_noisy_gates(grid_2d("[2,1,2]", 5, seed=4, gate_set="iS_theta"), 0.99, seed=1)
    c.layers.append([])
    path = tmp_path / "c.txt"
    c.save(path)
    back = Circuit.load(path)
    assert back == c
    assert back.layers[-1] == []


def test_circuit_schema_rejected():
    text = brick_1d(3, 1, seed=0).dumps().replace("v1", "v9", 1)
    with pytest.raises(ValidationError):
        Circuit.loads(text)


def test_sycamore_grid_edges():
    g = parse_grid("sycamore54")
    assert g.heights == SYCAMORE_COLUMNS and g.n_qubits == 54
    classes = g.edges()
    all_edges = [e for es in classes.values() for e in es]
    assert len(all_edges) == 88 and len(set(all_edges)) == 88
    for es in classes.values():
        touched = [q for e in es for q in e]
        assert len(touched) == len(set(touched))  # each class is a matching
    for a, b in all_edges:
        ca, cb = g.column_of(a), g.column_of(b)
        assert cb == ca + 1
        ya = 2 * (a - g.column_start(ca)) + ca % 2
        yb = 2 * (b - g.column_start(cb)) + cb % 2
        assert abs(ya - yb) == 1


def test_grid_every_qubit_has_four_neighbours_in_bulk():
    g = Grid((5, 4, 5, 4, 5))
    deg = np.zeros(g.n_qubits, dtype=int)
    for es in g.edges().values():
        for a, b in es:
            deg[a] += 1
            deg[b] += 1
    assert deg.max() == 4
    assert deg[g.qubit(2, 2)] == 4


def test_grid_circuit_counts():
    c = grid_2d(None, 20, seed=0)
    assert c.n_qubits == 54 and c.depth == 20
    sizes = {k: len(v) for k, v in Grid(SYCAMORE_COLUMNS).edges().items()}
    order = "ABCDCDAB"
    assert c.n_two_qubit_gates == sum(sizes[order[k % 8]] for k in range(20))


def test_grid_is_gate_set_uses_square_roots():
    c = grid_2d("4x3", 3, seed=2, gate_set="iS_theta")
    tags = {g.tag for layer in c.layers for g in layer if g.n_targets == 1}
    assert tags <= {"SX", "SY", "SW"}
    assert parse_grid("4x3").heights == (4, 4, 4)
