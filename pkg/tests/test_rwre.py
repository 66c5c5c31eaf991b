import numpy as np
import pytest

from dgff.lattice import make_box, make_centered_box
from dgff.rwre import (BETA_C, build_kernel, commute_time,
                       exit_time_upper_bound, expected_exit_time, heat_kernel,
                       hitting_time, theta_exponent, walk_simulate)
from dgff.sampler import Field, sample_dense, seed_stream

ZBAND = 3.5


def zero_kernel(dom):
    return build_kernel(Field(dom, np.zeros(len(dom))), 0.0)


def test_kernel_structure():
    dom = make_box(5)
    f = sample_dense(dom, seed_stream(33))
    ker = build_kernel(f, 0.7)
    assert ker.n == len(dom) + len(dom.boundary())
    assert np.abs(ker.row_sums() - 1.0).max() <= 1e-12
    assert ker.detailed_balance_residual() <= 1e-12
    assert ker.form_agreement <= 1e-12


def test_kernel_zero_field_is_srw():
    ker = zero_kernel(make_box(4))
    i = ker.index((2, 2))
    row = ker.P[i].toarray().ravel()
    nz = np.nonzero(row)[0]
    assert len(nz) == 4
    assert np.allclose(row[nz], 0.25)


def test_to_network_consistency():
    f = sample_dense(make_box(4), seed_stream(5))
    ker = build_kernel(f, 0.4)
    net = ker.to_network()
    # transition probability = edge conductance / total at the site
    i = ker.index((2, 2))
    pi = net.pi()[net.index[(2, 2)]]
    for step in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        y = (2 + step[0], 2 + step[1])
        c = net.conduct[net.edges_between((2, 2), y)[0]]
        assert abs(ker.P[i, ker.index(y)] - c / pi) <= 1e-12


def test_exit_time_zero_field():
    ker = zero_kernel(make_box(5))
    region = make_box(5).vertices
    ts = expected_exit_time(ker, (2, 3), region, method="solve")
    ti = expected_exit_time(ker, (2, 3), region, method="identity")
    assert abs(ts - 20.0 / 3.0) <= 1e-10
    assert abs(ti - ts) <= 1e-10
    te, ti2 = expected_exit_time(ker, (2, 3), region, method="both")
    assert abs(te - ts) <= 1e-12 and abs(ti2 - ti) <= 1e-12


def test_exit_time_dense_oracle():
    # independent route: absorbing-chain fundamental-matrix solve
    ker = zero_kernel(make_box(5))
    region = make_box(5).vertices
    A = ker.states.index_of(region)
    P = ker.P.toarray()
    tA = np.linalg.solve(np.eye(len(A)) - P[np.ix_(A, A)], np.ones(len(A)))
    dense = tA[np.searchsorted(A, ker.index((2, 3)))]
    assert abs(expected_exit_time(ker, (2, 3), region) - dense) <= 1e-10


def test_exit_time_validation():
    ker = zero_kernel(make_box(5))
    with pytest.raises(KeyError):
        expected_exit_time(ker, (0, 0), make_box(5).vertices)
    with pytest.raises(ValueError):
        expected_exit_time(ker, (2, 2), make_box(5).vertices, method="guess")


def test_exit_time_upper_bound():
    f = sample_dense(make_box(6), seed_stream(12))
    ker = build_kernel(f, 0.6)
    region = make_box(6).vertices
    t = expected_exit_time(ker, (3, 3), region)
    assert exit_time_upper_bound(ker, (3, 3), region) >= t - 1e-9


def test_hitting_symmetric():
    ker = zero_kernel(make_box(5))
    gap = hitting_time(ker, (1, 1), (4, 4)) - hitting_time(ker, (4, 4), (1, 1))
    assert abs(gap) <= 1e-9


@pytest.mark.parametrize("beta", [0.0, 0.8])
def test_commute_identity(beta):
    f = sample_dense(make_box(6), seed_stream(47))
    ker = build_kernel(f, beta)
    lhs, rhs = commute_time(ker, (1, 1), (5, 5))
    assert abs(lhs - rhs) <= 1e-8 * abs(rhs)


def test_heat_kernel_basics():
    ker = zero_kernel(make_centered_box(12))
    assert heat_kernel(ker, (0, 0), 0) == 1.0
    assert heat_kernel(ker, (0, 0), 7) == 0.0
    with pytest.raises(ValueError):
        heat_kernel(ker, (0, 0), -2)
    ps = [heat_kernel(ker, (0, 0), T) for T in (2, 4, 8, 16)]
    assert np.all(np.diff(ps) < 0)


def test_heat_kernel_mc():
    ker = zero_kernel(make_centered_box(12))
    pe = heat_kernel(ker, (0, 0), 8)
    pm, se = heat_kernel(ker, (0, 0), 8, mode="mc", reps=20000, rng=seed_stream(37))
    assert abs(pm - pe) <= ZBAND * se


def test_one_step_frequencies():
    f = sample_dense(make_box(6), seed_stream(33))
    ker = build_kernel(f, 0.7)
    reps = 20000
    sim = walk_simulate(ker, (3, 3), 1, seed_stream(34), reps=reps)
    i = ker.index((3, 3))
    row = ker.P[i].toarray().ravel()
    final = ker.states.index_of(sim["final"])
    for j in np.nonzero(row)[0]:
        hits = (final == j).mean()
        se = np.sqrt(row[j] * (1 - row[j]) / reps)
        assert abs(hits - row[j]) <= ZBAND * se


def test_mean_square_displacement():
    # simple random walk diffuses at rate one per step
    dom = make_centered_box(60)
    ker = zero_kernel(dom)
    sim = walk_simulate(ker, (0, 0), 400, seed_stream(35), reps=4000)
    assert abs(sim["mean_sq_displacement"] / 400.0 - 1.0) <= 0.1


def test_absorbed_walk():
    dom = make_centered_box(10)
    ker = zero_kernel(dom)
    sim = walk_simulate(ker, (0, 0), 4000, seed_stream(36), reps=3000,
                        absorbing=dom.boundary())
    tau = sim["exit_times"]
    assert np.all(tau >= 0)
    exact = expected_exit_time(ker, (0, 0), dom.vertices)
    se = tau.std(ddof=1) / np.sqrt(len(tau))
    assert abs(tau.mean() - exact) <= ZBAND * se


def test_theta_exponent():
    assert theta_exponent(0.0) == 2.0
    assert abs(theta_exponent(0.5 * BETA_C) - 2.5) <= 1e-12
    assert abs(theta_exponent(BETA_C) - 4.0) <= 1e-12
    assert abs(theta_exponent(2.0 * BETA_C) - 8.0) <= 1e-12
    with pytest.raises(ValueError):
        theta_exponent(-0.1)
