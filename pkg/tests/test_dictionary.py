"""Convolutional dictionary: geometry, synthesis, adjoint, atom management."""

import numpy as np
import pytest

from cscforge import (
    ConvDictionary,
    DomainError,
    GeometryError,
    Rng,
    ShapeError,
    adjoint,
    export_atom_grid,
    geometry_for_output,
    geometry_for_representation,
    inner,
    normalize_atoms,
    random_dictionary,
    synthesize,
)
from conftest import dense_synthesis_matrix, random_geometry


def identity_dictionary():
    return ConvDictionary(np.ones((1, 1, 1, 1), np.float32), 1, 0)


def test_constructor_validation():
    with pytest.raises(ShapeError):
        ConvDictionary(np.ones((2, 3, 4, 1), np.float32))  # not square
    with pytest.raises(ShapeError):
        ConvDictionary(np.ones((3, 3, 1), np.float32))  # not 4-d
    with pytest.raises(GeometryError):
        ConvDictionary(np.ones((1, 3, 3, 1), np.float32), stride=0)
    with pytest.raises(GeometryError):
        ConvDictionary(np.ones((1, 3, 3, 1), np.float32), padding=-1)
    with pytest.raises(GeometryError):
        ConvDictionary(np.ones((1, 3, 3, 1), np.float32), padding=2)  # 2p >= n
    with pytest.raises(DomainError):
        ConvDictionary(np.full((1, 2, 2, 1), np.nan, np.float32))


def test_atoms_are_read_only_and_not_rescaled():
    atoms = np.full((2, 2, 2, 1), 3.0, np.float32)
    D = ConvDictionary(atoms, 1, 0)
    assert float(D.atoms[0, 0, 0, 0]) == 3.0
    with pytest.raises(ValueError):
        D.atoms[0, 0, 0, 0] = 1.0


def test_output_geometry_law():
    D = ConvDictionary(np.ones((1, 4, 4, 1), np.float32), 2, 1)
    geo = geometry_for_representation(D, 5, 7)
    assert (geo.out_height, geo.out_width) == ((5 - 1) * 2 + 4 - 2, (7 - 1) * 2 + 4 - 2)
    back = geometry_for_output(D, geo.out_height, geo.out_width)
    assert (back.rep_height, back.rep_width) == (5, 7)


def test_output_geometry_rejects_impossible_dims():
    D = ConvDictionary(np.ones((1, 4, 4, 1), np.float32), 2, 1)
    with pytest.raises(ShapeError):
        geometry_for_output(D, 9, 10)  # (9-4+2) = 7 not divisible by 2
    with pytest.raises(ShapeError):
        geometry_for_output(D, 1, 10)  # negative numerator


def test_synthesize_matches_dense_matrix_oracle():
    rng = Rng(100)
    for _ in range(30):
        D, rep_h, rep_w = random_geometry(rng)
        gamma = rng.normal(rep_h * rep_w * D.atom_count).reshape(
            rep_h, rep_w, D.atom_count
        ).astype(np.float32)
        M = dense_synthesis_matrix(D, rep_h, rep_w)
        want = (M @ gamma.astype(np.float64).reshape(-1)).reshape(
            synthesize(D, gamma).shape
        )
        assert np.max(np.abs(synthesize(D, gamma) - want)) < 1e-5


def test_adjoint_matches_dense_matrix_transpose():
    rng = Rng(200)
    for _ in range(30):
        D, rep_h, rep_w = random_geometry(rng)
        geo = geometry_for_representation(D, rep_h, rep_w)
        x = rng.normal(geo.out_height * geo.out_width * D.out_channels).reshape(
            geo.out_height, geo.out_width, D.out_channels
        ).astype(np.float32)
        M = dense_synthesis_matrix(D, rep_h, rep_w)
        want = (M.T @ x.astype(np.float64).reshape(-1)).reshape(
            rep_h, rep_w, D.atom_count
        )
        assert np.max(np.abs(adjoint(D, x) - want)) < 1e-5


def test_adjoint_identity():
    rng = Rng(300)
    for _ in range(100):
        D, rep_h, rep_w = random_geometry(rng)
        geo = geometry_for_representation(D, rep_h, rep_w)
        gamma = rng.normal(rep_h * rep_w * D.atom_count).reshape(
            rep_h, rep_w, D.atom_count
        ).astype(np.float32)
        x = rng.normal(geo.out_height * geo.out_width * D.out_channels).reshape(
            geo.out_height, geo.out_width, D.out_channels
        ).astype(np.float32)
        lhs = inner(synthesize(D, gamma), x)
        rhs = inner(gamma, adjoint(D, x))
        bound = 1e-4 * np.linalg.norm(gamma) * np.linalg.norm(x)
        assert abs(lhs - rhs) <= bound


def test_unit_impulse_places_atom():
    rng = Rng(17)
    D = random_dictionary(3, 3, 2, 2, 1, rng)
    gamma = np.zeros((4, 4, 3), np.float32)
    gamma[2, 1, 1] = 1.0
    out = synthesize(D, gamma)
    want = np.zeros_like(out)
    for a in range(3):
        for b in range(3):
            y, x = 2 * 2 - 1 + a, 1 * 2 - 1 + b
            if 0 <= y < out.shape[0] and 0 <= x < out.shape[1]:
                want[y, x, :] = D.atoms[1, a, b, :]
    assert np.array_equal(out, want)


def test_zero_input_zero_output():
    D = random_dictionary(4, 3, 1, 1, 1, Rng(5))
    assert not np.any(synthesize(D, np.zeros((6, 6, 4), np.float32)))


def test_synthesize_rejects_channel_mismatch():
    D = random_dictionary(4, 3, 1, 1, 0, Rng(5))
    with pytest.raises(ShapeError):
        synthesize(D, np.zeros((6, 6, 3), np.float32))
    with pytest.raises(ShapeError):
        adjoint(D, np.zeros((6, 6, 2), np.float32))


def test_normalize_atoms_unit_norm_and_idempotent():
    D = ConvDictionary(Rng(1).normal(4 * 3 * 3 * 2).reshape(4, 3, 3, 2).astype(np.float32) * 7.0)
    N = normalize_atoms(D)
    norms = np.linalg.norm(N.atoms.reshape(4, -1), axis=1)
    assert np.all(np.abs(norms - 1.0) < 1e-5)
    again = normalize_atoms(N)
    assert np.array_equal(N.atoms, again.atoms)


def test_normalize_atoms_replaces_dead_atom():
    atoms = np.zeros((2, 2, 2, 1), np.float32)
    atoms[0] = 1.0
    N = normalize_atoms(ConvDictionary(atoms))
    norms = np.linalg.norm(N.atoms.reshape(2, -1), axis=1)
    assert np.all(np.abs(norms - 1.0) < 1e-5)
    # replacement is deterministic
    M = normalize_atoms(ConvDictionary(atoms))
    assert np.array_equal(N.atoms, M.atoms)


def test_random_dictionary_is_normalized():
    D = random_dictionary(6, 4, 3, 2, 1, Rng(3))
    norms = np.linalg.norm(D.atoms.reshape(6, -1), axis=1)
    assert np.all(np.abs(norms - 1.0) < 1e-5)
    assert (D.stride, D.padding) == (2, 1)


def test_atom_grid_layout():
    D = random_dictionary(5, 3, 1, 1, 0, Rng(8))
    grid = export_atom_grid(D, cols=2)
    rows = 3  # ceil(5 / 2)
    assert grid.shape == (rows * 4 + 1, 2 * 4 + 1, 1)
    # borders stay zero
    assert not np.any(grid[0, :, :]) and not np.any(grid[:, 0, :])
    # each atom tile spans [0, 255]
    tile = grid[1:4, 1:4, 0]
    assert tile.min() == pytest.approx(0.0, abs=1e-4)
    assert tile.max() == pytest.approx(255.0, abs=1e-4)
    # the unused sixth cell stays zero
    assert not np.any(grid[9:12, 5:8, :])


def test_atom_grid_constant_atom_maps_to_midgray():
    atoms = np.full((1, 2, 2, 1), 0.25, np.float32)
    grid = export_atom_grid(ConvDictionary(atoms), cols=1)
    assert np.all(grid[1:3, 1:3, 0] == 127.5)


def test_atom_grid_rejects_odd_channel_counts():
    D = random_dictionary(2, 2, 2, 1, 0, Rng(0))
    with pytest.raises(DomainError):
        export_atom_grid(D, cols=2)
    with pytest.raises(DomainError):
        export_atom_grid(random_dictionary(2, 2, 1, 1, 0, Rng(0)), cols=0)
