import numpy as np
import pytest

from hamlearn.errors import OracleSizeError
from hamlearn.model import HamiltonianSpec, enumerate_subspaces, make_pair, project_block, select_subspaces
from hamlearn.oracle import (
    dense_circuit_distribution,
    dense_hamiltonian,
    dense_propagator,
    pauli_on,
    verify_block_structure,
)
from hamlearn.sim import ExperimentConfig, block_propagator, run_circuit


def random_spec(n, rng):
    c = np.triu(rng.uniform(-50, 50, (n, n)), 1)
    return HamiltonianSpec(a=rng.uniform(1, 20, n), c=c + c.T, phi=rng.uniform(-0.5, 0.5))


def test_pure_drive():
    spec = HamiltonianSpec(a=[1.0, 0.0], c=np.zeros((2, 2)))
    X = np.array([[0, 1], [1, 0]])
    assert np.allclose(dense_hamiltonian(spec, 1), np.kron(X, np.eye(2)))


def test_pure_coupling():
    spec = HamiltonianSpec(a=[0.0, 0.0], c=[[0, 1.0], [1.0, 0]])
    assert np.allclose(dense_hamiltonian(spec, 1), np.diag([1, -1, -1, 1]))


def test_size_cap():
    spec = HamiltonianSpec(a=np.ones(11), c=np.zeros((11, 11)))
    with pytest.raises(OracleSizeError):
        dense_hamiltonian(spec, 1)


def test_matches_projected_blocks_n3():
    spec = random_spec(3, np.random.default_rng(4))
    for drive in (1, 2, 3):
        H = dense_hamiltonian(spec, drive)
        for p in enumerate_subspaces(spec, drive):
            b = project_block(spec, p, 1.0)
            sub = H[np.ix_([p.m_code, p.n_code], [p.m_code, p.n_code])]
            expect = [[b.C + b.B, b.A * np.exp(1j * b.phi)], [b.A * np.exp(-1j * b.phi), b.C - b.B]]
            assert np.allclose(sub, expect, atol=1e-12)


def test_propagator_basics():
    H = np.kron(pauli_on(1, {1: "X"}), np.eye(1))
    assert np.allclose(dense_propagator(H, 0.0), np.eye(2))
    assert np.allclose(dense_propagator(H, np.pi / 2), -1j * pauli_on(1, {1: "X"}), atol=1e-15)
    with pytest.raises(ValueError):
        dense_propagator(np.array([[0, 1], [0, 0]]), 1.0)


def test_two_qubit_closed_form_block():
    spec = HamiltonianSpec(a=[10.0, 0.0], c=[[0, 40.0], [40.0, 0]])
    U = dense_propagator(dense_hamiltonian(spec, 1), 1e-3)
    blk = U[np.ix_([0, 2], [0, 2])]
    a, c = 0.01, 0.04
    w = np.hypot(a, c)
    expect = np.array(
        [[np.cos(w) - 1j * c * np.sin(w) / w, -1j * a * np.sin(w) / w], [-1j * a * np.sin(w) / w, np.cos(w) + 1j * c * np.sin(w) / w]]
    )
    assert np.allclose(blk, expect, atol=1e-14)
    assert np.allclose(blk, block_propagator(project_block(spec, make_pair("00", 1), 1e-3)), atol=1e-14)


@pytest.mark.parametrize("n", range(2, 7))
def test_block_structure_random(n):
    rng = np.random.default_rng(100 + n)
    spec = random_spec(n, rng)
    for drive in range(1, n + 1):
        U = dense_propagator(dense_hamiltonian(spec, drive), rng.uniform(1e-3, 0.05))
        assert verify_block_structure(U, enumerate_subspaces(spec, drive)) <= 1e-10


def test_swap_violates():
    swap = np.eye(4)[[0, 2, 1, 3]]
    assert verify_block_structure(swap, enumerate_subspaces(2, 1)) == 1.0


def test_diagonal_is_block():
    U = np.diag(np.exp(1j * np.arange(8)))
    assert verify_block_structure(U, enumerate_subspaces(3, 2)) == 0.0


@pytest.mark.parametrize("n", range(2, 7))
def test_sim_matches_dense_pipeline(n):
    rng = np.random.default_rng(7 * n)
    spec = random_spec(n, rng)
    drive = int(rng.integers(1, n))
    pairs = select_subspaces(n, drive, n - drive)
    cfg = ExperimentConfig(d=5, N=1, T=2e-3, mode="hybrid")
    for w in cfg.omegas()[::2]:
        for kind in ("plus", "i"):
            block = run_circuit(spec, pairs, cfg, w, kind).dense()
            dense = dense_circuit_distribution(spec, pairs, cfg.d, cfg.T, w, kind)
            assert np.max(np.abs(block - dense)) <= 1e-10


def test_two_qubit_reference_pipeline():
    spec = HamiltonianSpec(a=[10.0, 10.0], c=[[0, 40.0], [40.0, 0]])
    cfg = ExperimentConfig(d=5, N=1, T=1e-3, mode="analog")
    pair = [make_pair("00", 1)]
    for w in cfg.omegas():
        a = run_circuit(spec, pair, cfg, w, "plus").dense()
        b = dense_circuit_distribution(spec, pair, 5, 1e-3, w, "plus")
        assert np.max(np.abs(a - b)) <= 1e-10


def test_prep_error_pipeline_agrees():
    spec = random_spec(3, np.random.default_rng(9))
    pairs = select_subspaces(3, 1, 2)
    cfg = ExperimentConfig(d=4, N=1, T=1e-2)
    a = run_circuit(spec, pairs, cfg, 0.3, "i", prep_alpha=0.02).dense()
    b = dense_circuit_distribution(spec, pairs, 4, 1e-2, 0.3, "i", prep_alpha=0.02)
    assert np.max(np.abs(a - b)) <= 1e-10
