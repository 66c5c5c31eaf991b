import numpy as np
import pytest
import scipy.linalg as sla

from dgff.green import green_matrix, harmonic_measure, potential_kernel
from dgff.lattice import LatticeDomain, make_box, make_centered_box
from dgff.sampler import (BindingField, Field, concentric_decompose,
                          gibbs_markov_split, harmonic_extension,
                          hierarchical_sample, read_fields, sample_batch,
                          sample_dense_batch, sample_field, sample_pinned,
                          seed_stream, sqrt_factor, write_fields)

ZBAND = 3.5  # pinned-seed z-score band for the law checks

# G^{B(2^k-1)}(0,0) increments: Var phi_k(0) for the concentric layers
VAR_PHI = {1: 0.5, 2: 0.45588235294117646, 3: 0.44449070569594197}


def test_seed_stream():
    a = seed_stream(5, 1, 2).standard_normal(4)
    b = seed_stream(5, 1, 2).standard_normal(4)
    c = seed_stream(5, 1, 3).standard_normal(4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_sqrt_factor_pd():
    rng = seed_stream(1)
    A = rng.standard_normal((12, 12))
    C = A @ A.T + 12.0 * np.eye(12)
    L = sqrt_factor(C)
    assert np.abs(L @ L.T - C).max() <= 1e-10
    assert np.abs(L - sla.cholesky(C, lower=True)).max() <= 1e-10


def test_sqrt_factor_semidefinite():
    rng = seed_stream(2)
    A = rng.standard_normal((20, 5))
    C = A @ A.T
    L = sqrt_factor(C)
    assert np.abs(L @ L.T - C).max() <= 1e-10
    assert (np.abs(L).max(axis=0) > 1e-8).sum() == 5


def test_sqrt_factor_conditional_covariance():
    # the Gibbs-Markov conditional covariance is singular on the
    # separator; the pivoted factorization must not amplify the cut
    V = make_box(12)
    keep = (V.vertices[:, 0] != 6) & (V.vertices[:, 1] != 6)
    U = LatticeDomain(V.vertices[keep], scale=12, shape="quadrants")
    GV = green_matrix(V).matrix
    GU = green_matrix(U).matrix
    C = GV.copy()
    idx = V.index_of(U.vertices)
    C[np.ix_(idx, idx)] -= GU
    L = sqrt_factor(C)
    assert np.abs(L @ L.T - C).max() <= 1e-10


def test_sample_field():
    box = make_box(6)
    f = sample_field(box, seed_stream(4))
    g = sample_field(box, seed_stream(4))
    assert isinstance(f, Field)
    assert f.domain is box and len(f.values) == len(box)
    assert np.array_equal(f.values, g.values)
    # large domain switches to the sparse route
    h = sample_field(make_box(60), seed_stream(4))
    assert np.isfinite(h.values).all() and len(h.values) == 59 * 59


def test_sample_batch_shape():
    op = green_matrix(make_box(5))
    X = sample_batch(op, seed_stream(6), 7)
    assert X.shape == (7, 16)
    Y = sample_batch(op, seed_stream(6), 7)
    assert np.array_equal(X, Y)


def test_single_vertex_variance():
    op = green_matrix(make_box(2))
    X = sample_dense_batch(op, seed_stream(8), 2000)
    assert X.shape == (2000, 1)
    assert abs(X.var(ddof=1) - 1.0) <= 0.15


def test_rotation_symmetry():
    cb = make_centered_box(5)
    G = green_matrix(cb).matrix
    rot = np.stack([-cb.vertices[:, 1], cb.vertices[:, 0]], axis=1)
    pr = cb.index_of(rot)
    assert np.abs(G[np.ix_(pr, pr)] - G).max() <= 1e-12


@pytest.mark.parametrize("method", ["covariance", "harmonic"])
def test_gibbs_markov_law(method):
    # sum of the independent pair must have the full-box law
    V = make_box(12)
    keep = (V.vertices[:, 0] != 6) & (V.vertices[:, 1] != 6)
    U = LatticeDomain(V.vertices[keep], scale=12, shape="quadrants")
    GV = green_matrix(V).matrix
    probes = [V.index(p) for p in ((3, 3), (6, 6), (9, 3), (4, 8))]
    reps = 3000
    rng = seed_stream(13)
    tot = np.empty((reps, len(V)))
    harm = 0.0
    for r in range(reps):
        bulk, binding = gibbs_markov_split(V, U, rng, method=method)
        vals = binding.values.copy()
        vals[V.index_of(U.vertices)] += bulk.values
        tot[r] = vals
        if r < 20:
            harm = max(harm, binding.max_laplacian_on_inner())
    assert harm <= 1e-8
    for i in probes:
        v = tot[:, i].var(ddof=1)
        se = GV[i, i] * np.sqrt(2.0 / reps)
        assert abs(v - GV[i, i]) <= ZBAND * se


def test_gibbs_markov_validation():
    V = make_box(8)
    with pytest.raises(ValueError):
        gibbs_markov_split(V, make_box(12), seed_stream(0))
    U = LatticeDomain(V.vertices[:10], scale=8)
    with pytest.raises(ValueError):
        gibbs_markov_split(V, U, seed_stream(0), method="magic")


def test_harmonic_extension():
    V = make_box(8)
    sub = V.vertices[(np.abs(V.vertices - 4) < 3).all(axis=1)]
    U = LatticeDomain(sub, scale=8)
    rng = seed_stream(9)
    data = Field(V, np.where(U.index_of(V.vertices) >= 0, 0.0, rng.standard_normal(len(V))))
    ext = harmonic_extension(green_matrix(U), V, data)
    out = Field(V, ext)
    # harmonic at every vertex of U, untouched outside
    lap = out.laplacian()[V.index_of(U.vertices)]
    assert np.abs(lap).max() <= 1e-10
    off = U.index_of(V.vertices) < 0
    assert np.array_equal(ext[off], data.values[off])


def test_pinned_basics():
    f = sample_pinned(make_centered_box(6), seed_stream(21))
    assert f.value_at((0, 0)) == 0.0
    with pytest.raises(ValueError):
        sample_pinned(make_box(5), seed_stream(0))


def test_pinned_law():
    dom = make_centered_box(8)
    i0 = dom.index_of(np.array([[0, 0]]))[0]
    sub = LatticeDomain(np.delete(dom.vertices, i0, axis=0), scale=dom.scale)
    Gp = green_matrix(sub).matrix
    reps = 20_000
    Y = sample_batch(sub, seed_stream(21), reps)
    ia, ib = sub.index((3, 0)), sub.index((-2, 4))
    va = Y[:, ia].var(ddof=1)
    cab = (Y[:, ia] * Y[:, ib]).mean()
    se_v = Gp[ia, ia] * np.sqrt(2.0 / reps)
    se_c = np.sqrt((Gp[ia, ia] * Gp[ib, ib] + Gp[ia, ib] ** 2) / reps)
    assert abs(va - Gp[ia, ia]) <= ZBAND * se_v
    assert abs(cab - Gp[ia, ib]) <= ZBAND * se_c


def test_pinned_green_kernel_identity():
    # two routes to the pinned Green function: direct matrix vs the
    # potential-kernel formula with its boundary correction
    big = make_centered_box(32)
    keep = ~((big.vertices[:, 0] == 0) & (big.vertices[:, 1] == 0))
    punct = LatticeDomain(big.vertices[keep], scale=big.scale)
    op = green_matrix(punct)
    x, y = (3, 0), (-2, 4)
    direct = op.matrix[punct.index(x), punct.index(y)]
    hm = harmonic_measure(op, x)
    corr = sum(w * (potential_kernel(z) + potential_kernel(y)
                    - potential_kernel((z[0] - y[0], z[1] - y[1])))
               for w, z in zip(hm.weights, hm.boundary))
    target = (potential_kernel(x) + potential_kernel(y)
              - potential_kernel((x[0] - y[0], x[1] - y[1])))
    assert abs(direct + corr - target) <= 1e-10


def test_hierarchical_law():
    n, reps = 3, 1500
    rng = seed_stream(15, n)
    side = 2 ** n
    box = make_box(side)
    c = box.index((side // 2, side // 2))
    vals = np.array([hierarchical_sample(n, rng).values[c] for _ in range(reps)])
    Gc = green_matrix(box).diag_entry((side // 2, side // 2))
    assert abs(vals.var(ddof=1) - Gc) <= ZBAND * Gc * np.sqrt(2.0 / reps)


def test_hierarchical_validation():
    with pytest.raises(ValueError):
        hierarchical_sample(0, seed_stream(0))
    with pytest.raises(ValueError):
        hierarchical_sample(10, seed_stream(0))


def test_concentric_layers():
    lay = concentric_decompose(4, make_centered_box(32))
    for k, v in VAR_PHI.items():
        assert abs(lay.var_phi0(k) - v) <= 1e-9
    # top layer picks up the outer domain itself
    top = green_matrix(make_centered_box(32)).diag_entry((0, 0))
    assert abs(lay.var_phi0(4) - (top - 2.4003730586371184)) <= 1e-9
    i0 = lay.outer.index((0, 0))
    for k in (1, 2, 3):
        b = lay.b(k)
        assert b[i0] == 0.0
        off = np.max(np.abs(lay.outer.vertices), axis=1) >= 2 ** k
        assert np.all(b[off] == -1.0)
    assert len(lay.ring(2)) == 32
    assert lay.covariance_identity_gap() <= 1e-8


def test_concentric_sample():
    lay = concentric_decompose(3, make_centered_box(16))
    s = lay.sample(seed_stream(16))
    assert s.field.domain is lay.outer
    assert np.allclose(np.diff(s.S), s.phi0)
    # all layer pieces vanish at the origin except the phi_k(0) chain
    assert abs(s.field.value_at((0, 0)) - s.phi0.sum()) <= 1e-12


def test_concentric_validation():
    with pytest.raises(ValueError):
        concentric_decompose(0, make_centered_box(8))
    with pytest.raises(ValueError):
        concentric_decompose(4, make_centered_box(16))


def test_fields_roundtrip(tmp_path):
    box = make_box(6)
    S = sample_batch(box, seed_stream(3), 7)
    p = tmp_path / "f.bin"
    write_fields(p, box, S)
    N, count, S2 = read_fields(p)
    assert (N, count) == (6, 25)
    assert np.array_equal(S, S2)
    with pytest.raises(ValueError):
        write_fields(p, box, np.zeros((2, 7)))
    p.write_bytes(b"\x00" * 21)
    with pytest.raises(ValueError):
        read_fields(p)
