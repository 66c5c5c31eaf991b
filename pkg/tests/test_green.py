import numpy as np
import pytest

from dgff.green import (G_CONST, POTENTIAL_KERNEL_C0, GreenOperator,
                        conformal_radius, continuum_green_disc,
                        dirichlet_laplacian, green_1d, green_heat_split,
                        green_matrix, green_via_kernel, harmonic_measure,
                        lazy_kernel, potential_kernel,
                        potential_kernel_asymptotic)
from dgff.lattice import make_box, make_centered_box, make_disc
from dgff.sampler import seed_stream

# centre-of-box Green values G^{B(r)}(0,0) for B(r) = [-r,r]^2, r = 2^k - 1
CENTER_GREEN = {0: 1.0, 1: 1.5, 2: 1.9558823529411764, 3: 2.4003730586371184,
                4: 2.8424295235240404}


@pytest.mark.parametrize("N", [4, 8, 16])
def test_green_poisson(N):
    dom = make_box(N)
    A = dirichlet_laplacian(dom).toarray()
    G = green_matrix(dom).matrix
    resid = np.abs(A @ G - 4.0 * np.eye(len(dom))).max()
    assert resid <= 1e-10


def test_green_symmetry_positivity():
    G = green_matrix(make_box(8)).matrix
    assert np.abs(G - G.T).max() <= 1e-12
    assert G.min() > 0.0
    assert np.all(np.diag(G) >= G.max(axis=1) - 1e-12)


def test_green_1d():
    N = 8
    G = green_1d(N)
    x = np.arange(1, N)
    assert np.abs(np.diag(G) - 2.0 * x * (N - x) / N).max() <= 1e-12
    assert np.abs(G - G.T).max() <= 1e-12


def test_column_matches_matrix():
    op = green_matrix(make_box(6))
    i = op.domain.index((3, 2))
    assert np.abs(op.column((3, 2)) - op.matrix[:, i]).max() <= 1e-12
    e = np.zeros(len(op.domain))
    e[i] = 1.0
    assert np.abs(4.0 * op.solve_many(e[:, None])[:, 0] - op.column((3, 2))).max() <= 1e-12


def test_dense_refusal():
    with pytest.raises(ValueError):
        green_matrix(make_box(128)).matrix


def test_potential_kernel_values():
    assert potential_kernel((0, 0)) == 0.0
    assert abs(potential_kernel((1, 0)) - 1.0) <= 1e-12
    assert abs(potential_kernel((1, 1)) - 4.0 / np.pi) <= 1e-12
    assert abs(potential_kernel((2, 0)) - (4.0 - 8.0 / np.pi)) <= 1e-12


def test_potential_kernel_symmetry():
    for x in [(3, 1), (2, 5)]:
        a = potential_kernel(x)
        assert abs(a - potential_kernel((-x[0], -x[1]))) <= 1e-13
        assert abs(a - potential_kernel((x[1], x[0]))) <= 1e-13


@pytest.mark.parametrize("r", [8, 16, 32])
def test_potential_kernel_asymptotic(r):
    dev = potential_kernel((r, 0)) - potential_kernel_asymptotic((r, 0))
    assert abs(dev) <= 2.0 / r ** 2


def test_asymptotic_formula():
    x = (5, 12)
    expect = G_CONST * np.log(13.0) + POTENTIAL_KERNEL_C0
    assert abs(potential_kernel_asymptotic(x) - expect) <= 1e-12


def test_representation_identity():
    op = green_matrix(make_box(8))
    rng = seed_stream(7)
    v = op.domain.vertices
    for _ in range(20):
        x, y = v[rng.integers(len(v))], v[rng.integers(len(v))]
        direct = op.matrix[op.domain.index(x), op.domain.index(y)]
        assert abs(green_via_kernel(op, x, y) - direct) <= 1e-7


def test_green_monotone_in_domain():
    small = green_matrix(make_box(8))
    big = green_matrix(make_box(16))
    idx = big.domain.index_of(small.domain.vertices)
    gap = big.matrix[np.ix_(idx, idx)] - small.matrix
    assert gap.min() > 0.0


@pytest.mark.parametrize("k", sorted(CENTER_GREEN))
def test_center_green_values(k):
    op = green_matrix(make_centered_box(2 ** k - 1))
    assert abs(op.diag_entry((0, 0)) - CENTER_GREEN[k]) <= 1e-9


def test_center_drift_increments():
    # G^{B(N)}(center) grows by g log 2 per doubling, up to O(N^-2)
    vals = {N: green_matrix(make_box(N)).diag_entry((N // 2, N // 2))
            for N in (16, 32, 64, 128)}
    for N, tol in ((16, 1e-3), (32, 3e-4), (64, 1e-4)):
        inc = vals[2 * N] - vals[N]
        assert abs(inc - G_CONST * np.log(2.0)) <= tol


def test_harmonic_measure_box():
    hm = harmonic_measure(make_box(4), (2, 2))
    w = hm.as_dict()
    assert abs(sum(w.values()) - 1.0) <= 1e-12
    assert min(w.values()) > 0.0
    # central source in a symmetric domain: four-fold symmetric weights
    assert abs(w[(0, 2)] - w[(4, 2)]) <= 1e-12
    assert abs(w[(0, 2)] - w[(2, 0)]) <= 1e-12


def test_harmonic_measure_disc():
    dom = make_disc(128)
    hm = harmonic_measure(dom, (0, 0))
    bd = hm.boundary
    w = hm.weights
    assert abs(w.sum() - 1.0) <= 1e-10
    # from the centre the exit law is near-uniform in angle: 16 arcs
    ang = np.arctan2(bd[:, 1], bd[:, 0])
    arcs = np.floor((ang + np.pi) / (2 * np.pi / 16)).astype(int).clip(0, 15)
    mass = np.bincount(arcs, weights=w, minlength=16)
    assert np.abs(mass - 1.0 / 16).sum() <= 0.05


def test_conformal_radius():
    dom = make_disc(128)
    assert abs(conformal_radius(dom, (0, 0)) - 1.0) <= 0.03
    assert abs(conformal_radius(dom, (64, 0)) - 0.75) <= 0.03


def test_continuum_disc_green():
    assert abs(continuum_green_disc((0, 0), (0.5, 0)) - G_CONST * np.log(2.0)) <= 1e-12
    a = continuum_green_disc((0.3, 0.1), (-0.2, 0.4))
    b = continuum_green_disc((-0.2, 0.4), (0.3, 0.1))
    assert abs(a - b) <= 1e-12


def test_heat_split():
    op = green_matrix(make_box(6))
    G1, C2 = green_heat_split(op, 200)
    assert np.abs(G1 + C2 - op.matrix).max() <= 1e-12
    assert np.abs(C2).max() <= 1e-6
    assert np.linalg.eigvalsh(C2).min() >= -1e-10
    # the tail shrinks with the cutoff
    _, C2b = green_heat_split(op, 300)
    assert np.abs(C2b).max() < np.abs(C2).max()


def test_heat_split_refusal():
    with pytest.raises(ValueError):
        green_heat_split(make_box(60), 10)


def test_lazy_kernel():
    Q = lazy_kernel(make_box(4))
    assert np.abs(Q - Q.T).max() == 0.0
    rows = Q.sum(axis=1)
    assert rows.max() <= 1.0 + 1e-12
    assert rows.min() >= 0.75 - 1e-12
    assert np.allclose(np.diag(Q), 0.5)
