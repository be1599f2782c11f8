import math

import numpy as np
import pytest

from periodic_rips import ValidationError, intra_unit_distance_matrix, periodic_distance_matrix
from periodic_rips.metric import read_matrix_binary, write_matrix_binary, write_matrix_csv
from periodic_rips.polymer import CoordinateFrame


def frames_from(arrays):
    return [CoordinateFrame(k, np.asarray(a, dtype=np.float64)) for k, a in enumerate(arrays)]


def brute_force_periodic(arrays):
    """Independent oracle: explicit triple loop over (alpha, beta, frame)."""
    arrays = [np.asarray(a, dtype=np.float64) for a in arrays]
    n = arrays[0].shape[0]
    d = np.zeros((n, n))
    for a in range(n):
        for b in range(n):
            best = math.inf
            for coords in arrays:
                dx = coords[a, 0] - coords[b, 0]
                dy = coords[a, 1] - coords[b, 1]
                dz = coords[a, 2] - coords[b, 2]
                best = min(best, math.sqrt(dx * dx + dy * dy + dz * dz))
            d[a, b] = best
    return d


def test_single_frame_equals_plain_pairwise():
    rng = np.random.default_rng(1)
    coords = rng.normal(size=(6, 3))
    periodic = periodic_distance_matrix(frames_from([coords]))
    intra = intra_unit_distance_matrix(CoordinateFrame(0, coords))
    assert np.array_equal(periodic.values, intra.values)
    assert periodic.mode == "periodic" and intra.mode == "intra_unit"


def test_elementwise_min_across_two_frames():
    f1 = [[0, 0, 0], [5.0, 0, 0]]
    f2 = [[0, 0, 0], [3.0, 0, 0]]
    d = periodic_distance_matrix(frames_from([f1, f2]))
    assert d.values[0, 1] == 3.0


def test_matches_brute_force_on_random_instance():
    rng = np.random.default_rng(7)
    arrays = [rng.normal(size=(5, 3)) for _ in range(3)]
    d = periodic_distance_matrix(frames_from(arrays))
    assert np.array_equal(d.values, brute_force_periodic(arrays))


def test_unit_square_intra_distances():
    square = [[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]]
    d = intra_unit_distance_matrix(CoordinateFrame(0, np.asarray(square, dtype=np.float64)))
    assert d.values[0, 1] == 1.0
    assert d.values[1, 2] == 1.0
    assert d.values[0, 2] == pytest.approx(math.sqrt(2), abs=0)
    assert d.values[0, 3] == 1.0


def test_single_atom_gives_zero_matrix():
    d = intra_unit_distance_matrix(CoordinateFrame(0, np.zeros((1, 3))))
    assert d.values.shape == (1, 1)
    assert d.values[0, 0] == 0.0


def test_coincident_atoms_warn_but_pass():
    coords = np.zeros((2, 3))
    with pytest.warns(UserWarning, match="degenerate"):
        d = intra_unit_distance_matrix(CoordinateFrame(0, coords))
    assert d.values[0, 1] == 0.0


def test_empty_frame_list_rejected():
    with pytest.raises(ValidationError, match="empty frame list"):
        periodic_distance_matrix([])


def test_frame_size_mismatch_rejected():
    frames = frames_from([np.zeros((3, 3)), np.zeros((4, 3))])
    with pytest.raises(ValidationError, match="frame size mismatch"):
        periodic_distance_matrix(frames)


# properties ----------------------------------------------------------------


def test_periodic_never_exceeds_any_single_frame():
    rng = np.random.default_rng(11)
    arrays = [rng.normal(size=(7, 3)) for _ in range(4)]
    d = periodic_distance_matrix(frames_from(arrays)).values
    for coords in arrays:
        intra = intra_unit_distance_matrix(CoordinateFrame(0, coords)).values
        assert (d <= intra).all()


def test_frame_order_irrelevant():
    rng = np.random.default_rng(13)
    arrays = [rng.normal(size=(6, 3)) for _ in range(3)]
    a = periodic_distance_matrix(frames_from(arrays)).values
    b = periodic_distance_matrix(frames_from(arrays[::-1])).values
    assert np.array_equal(a, b)


def test_duplicate_frame_idempotent():
    rng = np.random.default_rng(17)
    arrays = [rng.normal(size=(6, 3)) for _ in range(2)]
    a = periodic_distance_matrix(frames_from(arrays)).values
    b = periodic_distance_matrix(frames_from(arrays + [arrays[0]])).values
    assert np.array_equal(a, b)


def test_relabeling_conjugates_matrix():
    rng = np.random.default_rng(19)
    arrays = [rng.normal(size=(6, 3)) for _ in range(3)]
    perm = rng.permutation(6)
    d = periodic_distance_matrix(frames_from(arrays)).values
    d_perm = periodic_distance_matrix(frames_from([a[perm] for a in arrays])).values
    for a in range(6):
        for b in range(6):
            assert d_perm[a, b] == d[perm[a], perm[b]]


def test_symmetry_and_zero_diagonal():
    rng = np.random.default_rng(23)
    arrays = [rng.normal(size=(8, 3)) for _ in range(3)]
    d = periodic_distance_matrix(frames_from(arrays)).values
    assert np.array_equal(d, d.T)
    assert (np.diag(d) == 0).all()
    assert (d >= 0).all() and np.isfinite(d).all()


# exports ---------------------------------------------------------------------


def test_binary_roundtrip(tmp_path):
    rng = np.random.default_rng(29)
    d = periodic_distance_matrix(frames_from([rng.normal(size=(5, 3))]))
    path = tmp_path / "m.bin"
    write_matrix_binary(path, d)
    back = read_matrix_binary(path)
    assert back.n == 5
    assert np.array_equal(back.values, d.values)


def test_csv_export_has_header_and_rows(tmp_path):
    d = intra_unit_distance_matrix(CoordinateFrame(0, np.eye(3)))
    path = tmp_path / "m.csv"
    write_matrix_csv(path, d)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == ",0,1,2"
    assert len(lines) == 4
