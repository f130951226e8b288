"""Tests for the random instance generators."""

import numpy as np
import pytest

from wrdyn import ensembles, identities, structure
from wrdyn.errors import InvalidStart


def test_haar_unitary_is_unitary_and_deterministic():
    U = ensembles.haar_unitary(5, np.random.default_rng(7))
    assert np.linalg.norm(U @ U.conj().T - np.eye(5)) <= 1e-12
    V = ensembles.haar_unitary(5, np.random.default_rng(7))
    np.testing.assert_array_equal(U, V)
    with pytest.raises(InvalidStart):
        ensembles.haar_unitary(0, np.random.default_rng(7))


def test_positive_block_spectrum_in_range():
    rng = np.random.default_rng(11)
    for dim in (2, 3, 6):
        W = ensembles.positive_block(dim, rng, lam_range=(0.2, 1.0))
        assert np.linalg.norm(W - W.conj().T) <= 1e-13
        eigs = np.linalg.eigvalsh(W)
        assert eigs.min() >= 0.2 - 1e-12
        assert eigs.max() <= 1.0 + 1e-12
    with pytest.raises(InvalidStart):
        ensembles.positive_block(3, rng, lam_range=(0.0, 1.0))
    with pytest.raises(InvalidStart):
        ensembles.positive_block(3, rng, lam_range=(1.0, 0.5))


def test_wishart_is_psd_with_floor():
    rng = np.random.default_rng(3)
    R = ensembles.wishart(4, rng, floor=1e-6)
    assert np.linalg.norm(R - R.conj().T) <= 1e-12
    assert np.linalg.eigvalsh(R).min() >= 0.9e-6
    with pytest.raises(InvalidStart):
        ensembles.wishart(4, rng, floor=-1.0)


def test_random_direction_unit_norm():
    rng = np.random.default_rng(5)
    u = ensembles.random_direction(6, rng)
    assert abs(np.linalg.norm(u) - 1.0) <= 1e-12
    assert np.iscomplexobj(u)


def test_coupled_block_realises_exact_coordinates():
    T = ensembles.coupled_block(0.7, 0.3, 1.4)
    e = np.array([1.0, 0.0])
    coords = identities.block_coordinates(T, e)
    assert coords.transverse_trace == 1.4
    assert coords.coupling_norm / coords.transverse_trace == pytest.approx(0.7, abs=1e-15)
    root_det = np.sqrt(np.linalg.det(T))
    assert root_det / 1.4 == pytest.approx(0.3, abs=1e-12)
    assert np.linalg.eigvalsh(T).min() > 0.0
    with pytest.raises(InvalidStart):
        ensembles.coupled_block(0.7, 0.3, 0.0)
    with pytest.raises(InvalidStart):
        ensembles.coupled_block(-0.1, 0.3, 1.0)


def test_random_coupled_block_respects_ranges():
    rng = np.random.default_rng(13)
    for _ in range(20):
        T = ensembles.random_coupled_block(
            rng, xi_range=(0.3, 1.5), zeta_range=(0.1, 0.6), d_range=(0.5, 1.5)
        )
        d = T[1, 1]
        xi = T[0, 1] / d
        zeta = np.sqrt(np.linalg.det(T)) / d
        assert 0.5 - 1e-12 <= d <= 1.5 + 1e-12
        assert 0.3 - 1e-9 <= xi <= 1.5 + 1e-9
        assert 0.1 - 1e-9 <= zeta <= 0.6 + 1e-9
        assert np.linalg.eigvalsh(T).min() > 0.0


def test_decoupled_block():
    T = ensembles.decoupled_block(0.8, 1.3)
    np.testing.assert_array_equal(T, np.diag([0.8, 1.3]))
    with pytest.raises(InvalidStart):
        ensembles.decoupled_block(-0.1, 1.0)


@pytest.mark.parametrize(
    "kind", [ensembles.KIND_COLLAPSE, ensembles.KIND_COUPLED, ensembles.KIND_DECOUPLED]
)
def test_planted_instance_geometry(kind):
    rng = np.random.default_rng(42)
    inst = ensembles.planted_split_instance(rng, frozen_dim=2, active_kind=kind, tau=0.4)
    n = inst.matrix.shape[0]
    assert n == 2 + (2 if kind == ensembles.KIND_COLLAPSE else 3)
    assert abs(np.linalg.norm(inst.direction) - 1.0) <= 1e-12
    assert np.linalg.norm(inst.matrix - inst.matrix.conj().T) <= 1e-12
    assert np.linalg.eigvalsh(inst.matrix).min() >= -1e-12
    assert np.linalg.eigvalsh(inst.expected_limit).min() >= -1e-12
    # The known limit annihilates the direction.
    assert np.linalg.norm(inst.expected_limit @ inst.direction) <= 1e-10


@pytest.mark.parametrize(
    "kind,expected",
    [
        (ensembles.KIND_COLLAPSE, structure.KIND_DIM2_COLLAPSE),
        (ensembles.KIND_COUPLED, structure.KIND_ACTIVE_DIM2),
        (ensembles.KIND_DECOUPLED, structure.KIND_DIM2_COLLAPSE),
    ],
)
def test_planted_instance_analysis_recovers_plant(kind, expected):
    rng = np.random.default_rng(99)
    inst = ensembles.planted_split_instance(rng, frozen_dim=2, active_kind=kind, tau=0.5)
    assert inst.expected_kind == expected
    report = structure.analyze_instance(inst.matrix, inst.direction)
    assert report.classification.kind == expected
    assert report.classification.predicted_limit is not None
    err = np.linalg.norm(report.classification.predicted_limit - inst.expected_limit, 2)
    assert err <= 1e-7 * max(1.0, np.linalg.norm(inst.matrix, 2))
    if kind == ensembles.KIND_DECOUPLED:
        # The untouched diagonal direction is reducing, so the detected
        # frozen part is one dimension larger than the planted block.
        assert report.split.frozen_dim == inst.frozen_dim + 1
    else:
        assert report.split.frozen_dim == inst.frozen_dim


def test_planted_instance_rejects_bad_parameters():
    rng = np.random.default_rng(1)
    with pytest.raises(InvalidStart):
        ensembles.planted_split_instance(rng, frozen_dim=0, active_kind=ensembles.KIND_COUPLED)
    with pytest.raises(InvalidStart):
        ensembles.planted_split_instance(rng, frozen_dim=1, active_kind="bogus")
    with pytest.raises(InvalidStart):
        ensembles.planted_split_instance(
            rng, frozen_dim=1, active_kind=ensembles.KIND_COUPLED, tau=1.0
        )


def test_wishart_instance_direction_split():
    rng = np.random.default_rng(8)
    R, u = ensembles.wishart_instance(5, 0.3, rng)
    assert abs(np.linalg.norm(u) - 1.0) <= 1e-12
    _, V = np.linalg.eigh(R)
    overlap = abs(V[:, -1].conj() @ u) ** 2
    assert overlap == pytest.approx(0.7, abs=1e-10)
    with pytest.raises(InvalidStart):
        ensembles.wishart_instance(5, 1.0, rng)


def test_coupled_block_instance_dimensions():
    rng = np.random.default_rng(17)
    for dim in (3, 4, 6):
        R, u = ensembles.coupled_block_instance(dim, 0.4, rng)
        assert R.shape == (dim, dim)
        assert abs(np.linalg.norm(u) - 1.0) <= 1e-12
        assert np.linalg.eigvalsh(R).min() >= -1e-12
    with pytest.raises(InvalidStart):
        ensembles.coupled_block_instance(2, 0.4, rng)


def test_sweep_instance_deterministic():
    R1, u1 = ensembles.sweep_instance(ensembles.ENSEMBLE_WISHART, 4, 0.5, 123)
    R2, u2 = ensembles.sweep_instance(ensembles.ENSEMBLE_WISHART, 4, 0.5, 123)
    np.testing.assert_array_equal(R1, R2)
    np.testing.assert_array_equal(u1, u2)
    R3, _ = ensembles.sweep_instance(ensembles.ENSEMBLE_WISHART, 4, 0.5, 124)
    assert np.linalg.norm(R1 - R3) > 1e-3
    R4, u4 = ensembles.sweep_instance(ensembles.ENSEMBLE_COUPLED_BLOCK, 4, 0.5, 123)
    assert R4.shape == (4, 4)
    with pytest.raises(InvalidStart):
        ensembles.sweep_instance("bogus", 4, 0.5, 1)
