import math

import numpy as np
import pytest

from conftest import random_weight_table
from qmap.empirics import complexity_cost
from qmap.projection import InfeasibleProjection, enumerate_sequences, sequence_costs
from qmap.quantize import build_alphabet, quantize_vector
from qmap.sensing import SenseMatrix, gen_gaussian, measure
from qmap.solver import (
    ConstrainedProjector,
    L0Projector,
    LagrangianProjector,
    PgdConfig,
    contraction_floor,
    contraction_fraction,
    default_gamma,
    pgd_solve,
    qmap_bruteforce,
    qmap_lagrangian_bruteforce,
)
from qmap.sources import (
    PiecewiseConstant,
    SpikeSlab,
    cond_entropy,
    quantized_kernel,
    sample_path,
    weights_from_kernel,
)


def spike_setup(n, b, p, seed, m=None, sigma=0.0, scale="unit"):
    m = m or n
    x = sample_path(SpikeSlab(p), n, seed)
    ab = build_alphabet(0, 1, b)
    xq = ab.values[quantize_vector(x, ab)]
    A = gen_gaussian(m, n, scale, seed + 1)
    y = measure(A, xq, sigma, seed + 2)
    w = weights_from_kernel(quantized_kernel(SpikeSlab(p), b))
    return x, xq, ab, A, y, w


def test_identity_design_recovers_in_one_step():
    n, b, p = 16, 4, 0.3
    x, xq, ab, A, y, w = spike_setup(n, b, p, 7)
    A = SenseMatrix(n, n, np.eye(n), "unit", 0)
    y = A.entries @ xq
    cfg = PgdConfig(projector=L0Projector(n), b=b, k=0, mu=1.0, allow_unpaired_mu=True)
    est, trace = pgd_solve(A, y, w, ab, cfg, truth=x)
    assert np.array_equal(est, xq)
    assert trace.err_quantized[1] == 0.0
    assert trace.status == "converged"


def test_feasibility_invariant_l0_and_constrained():
    n, b, p = 24, 2, 0.2
    x, xq, ab, A, y, w = spike_setup(n, b, p, 11, m=16)
    cfg = PgdConfig(projector=L0Projector(5), b=b, k=0, max_iters=12)
    est, trace = pgd_solve(A, y, w, ab, cfg, truth=x)
    assert np.count_nonzero(est) <= 5
    gamma = default_gamma(quantized_kernel(SpikeSlab(p), b), delta=0.15)
    cfg = PgdConfig(projector=ConstrainedProjector(gamma), b=b, k=0, max_iters=12)
    est, trace = pgd_solve(A, y, w, ab, cfg)
    idx = quantize_vector(est, ab)
    assert complexity_cost(idx, w) <= gamma
    assert all(c <= gamma for c in trace.costs[1:])


def test_noiseless_fixed_point_is_stationary():
    n, b, p = 12, 3, 0.25
    x, xq, ab, A, y, w = spike_setup(n, b, p, 23)
    start = quantize_vector(xq, ab)
    cfg = PgdConfig(
        projector=L0Projector(int(np.count_nonzero(xq)) + 1), b=b, k=0,
        max_iters=5, start=start,
    )
    est, trace = pgd_solve(A, y, w, ab, cfg, truth=x)
    assert np.array_equal(est, xq)
    assert trace.status == "converged"
    assert trace.residuals[-1] == 0.0


def test_residual_mostly_nonincreasing_noiseless():
    n, b, p = 64, 4, 0.1
    x, xq, ab, A, y, w = spike_setup(n, b, p, 31, m=48)
    cfg = PgdConfig(
        projector=L0Projector(12), b=b, k=0, max_iters=40,
        mu=0.4 / 48, allow_unpaired_mu=True,
    )
    est, trace = pgd_solve(A, y, w, ab, cfg, truth=x)
    drops = sum(
        1 for r0, r1 in zip(trace.residuals[1:], trace.residuals[2:]) if r1 <= r0 + 1e-12
    )
    total = len(trace.residuals) - 2
    assert total == 0 or drops / total >= 0.9  # telemetry, not a theorem


def test_paired_step_enforced():
    n, b, p = 8, 2, 0.3
    x, xq, ab, A, y, w = spike_setup(n, b, p, 5, m=4)
    cfg = PgdConfig(projector=L0Projector(3), b=b, k=0, mu=0.123)
    with pytest.raises(ValueError, match="paired"):
        pgd_solve(A, y, w, ab, cfg)
    cfg = PgdConfig(projector=L0Projector(3), b=b, k=0, mu=0.123, allow_unpaired_mu=True)
    pgd_solve(A, y, w, ab, cfg)  # override accepted


def test_infeasible_projection_carries_iteration():
    n, b = 6, 2
    ab = build_alphabet(0, 1, b)
    w = weights_from_kernel(quantized_kernel(SpikeSlab(0.3), b))
    A = gen_gaussian(4, n, "unit", 2)
    y = A.entries @ np.full(n, 0.75)
    cfg = PgdConfig(projector=ConstrainedProjector(-1.0), b=b, k=0, max_iters=3)
    with pytest.raises(InfeasibleProjection) as exc:
        pgd_solve(A, y, w, ab, cfg)
    assert exc.value.iteration == 1
    assert exc.value.trace.status == "infeasible"


def test_zero_not_in_alphabet_requires_start():
    ab = build_alphabet(0.5, 1.0, 2)
    w = random_weight_table(np.random.default_rng(0), ab.size, 0)
    w2 = type(w)(alphabet=ab, k=0, w=w.w)
    A = gen_gaussian(3, 4, "unit", 0)
    cfg = PgdConfig(projector=LagrangianProjector(0.0), b=2, k=0)
    with pytest.raises(ValueError, match="zero"):
        pgd_solve(A, np.zeros(3), w2, ab, cfg)


def test_trace_rows_export(tmp_path):
    n, b, p = 10, 2, 0.5
    x, xq, ab, A, y, w = spike_setup(n, b, p, 3, m=8)
    assert np.count_nonzero(xq) > 0  # a moving iterate, not an instant fix point
    cfg = PgdConfig(projector=L0Projector(4), b=b, k=0, max_iters=4)
    est, trace = pgd_solve(A, y, w, ab, cfg, truth=x)
    rows = trace.rows()
    assert [r["t"] for r in rows] == list(range(len(trace.residuals)))
    assert set(rows[0]) == {"t", "residual", "cost", "err_quantized", "err_analog"}
    assert len(trace.estimate_hashes) == len(trace.residuals)
    assert len(set(trace.estimate_hashes)) > 1  # the iterate actually moved
    path = tmp_path / "trace.csv"
    trace.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,residual,cost,err_quantized,err_analog"
    assert len(lines) == len(rows) + 1


def test_qmap_bruteforce_unconstrained_square():
    n, b, p = 4, 1, 0.4
    ab = build_alphabet(0, 1, b)
    w = weights_from_kernel(quantized_kernel(SpikeSlab(p), b))
    A = gen_gaussian(n, n, "unit", 9)
    u_true = np.array([0, 1, 0, 1])
    y = A.entries @ ab.values[u_true]
    got = qmap_bruteforce(A, y, w, ab, gamma=math.inf)
    assert np.array_equal(got, u_true)


def test_qmap_bruteforce_is_exhaustive_minimum(rng):
    n, m, b, p = 6, 4, 1, 0.3
    ab = build_alphabet(0, 1, b)
    w = weights_from_kernel(quantized_kernel(SpikeSlab(p), b))
    gamma = default_gamma(quantized_kernel(SpikeSlab(p), b), delta=0.3)
    for seed in range(10):
        x = sample_path(SpikeSlab(p), n, 200 + seed)
        A = gen_gaussian(m, n, "unit", 300 + seed)
        y = A.entries @ ab.values[quantize_vector(x, ab)]
        got = qmap_bruteforce(A, y, w, ab, gamma)
        seqs = enumerate_sequences(ab.size, n)
        costs = sequence_costs(seqs, w) / (n - w.k)
        resid = np.linalg.norm(ab.values[seqs] @ A.entries.T - y, axis=1)
        feasible = costs <= gamma
        r_got = float(np.linalg.norm(A.entries @ ab.values[got] - y))
        assert np.all(r_got <= resid[feasible] + 1e-12)


def test_qmap_lagrangian_bruteforce_limits(rng):
    n, m, b, p = 5, 3, 1, 0.3
    ab = build_alphabet(0, 1, b)
    w = weights_from_kernel(quantized_kernel(SpikeSlab(p), b))
    u_true = np.array([1, 0, 0, 1, 0])
    A = gen_gaussian(m, n, "unit", 77)
    y = A.entries @ ab.values[u_true]
    # huge lambda forces an exact interpolation of the noiseless data
    got = qmap_lagrangian_bruteforce(A, y, w, ab, lam=1e12)
    assert np.linalg.norm(A.entries @ ab.values[got] - y) < 1e-4
    # lambda = 0 minimizes the complexity cost alone: the all-zero sequence
    got0 = qmap_lagrangian_bruteforce(A, y, w, ab, lam=0.0)
    assert np.array_equal(got0, np.zeros(n, dtype=np.int64))


def test_qmap_lagrangian_matches_permuted_enumeration(rng):
    n, m, b, p = 6, 4, 1, 0.35
    ab = build_alphabet(0, 1, b)
    w = weights_from_kernel(quantized_kernel(SpikeSlab(p), b))
    A = gen_gaussian(m, n, "unit", 13)
    y = A.entries @ rng.uniform(0, 1, n)
    lam = 4.0
    got = qmap_lagrangian_bruteforce(A, y, w, ab, lam)
    # independent enumeration in a permuted order, lex tie-break made explicit
    seqs = enumerate_sequences(ab.size, n)
    costs = sequence_costs(seqs, w) / (n - w.k)
    resid2 = ((ab.values[seqs] @ A.entries.T - y) ** 2).sum(axis=1)
    objective = costs + lam / n ** 2 * resid2
    order = rng.permutation(len(seqs))
    best = None
    for i in order:
        cand = (objective[i], tuple(seqs[i]))
        if best is None or cand[0] < best[0] or (cand[0] == best[0] and cand[1] < best[1]):
            best = cand
    assert tuple(got) == best[1]


def test_pgd_feasible_and_dominated_by_oracle():
    n, m, b, p = 6, 4, 1, 0.3
    ab = build_alphabet(0, 1, b)
    kern = quantized_kernel(SpikeSlab(p), b)
    w = weights_from_kernel(kern)
    gamma = default_gamma(kern, delta=0.3)
    for seed in range(10):
        x = sample_path(SpikeSlab(p), n, 400 + seed)
        A = gen_gaussian(m, n, "unit", 500 + seed)
        xq = ab.values[quantize_vector(x, ab)]
        y = A.entries @ xq
        oracle = qmap_bruteforce(A, y, w, ab, gamma)
        cfg = PgdConfig(
            projector=ConstrainedProjector(gamma), b=b, k=0, max_iters=25,
            stop_tol=0.0,
        )
        est, trace = pgd_solve(A, y, w, ab, cfg, truth=x)
        idx = quantize_vector(est, ab)
        assert complexity_cost(idx, w) <= gamma
        r_pgd = float(np.linalg.norm(A.entries @ est - y))
        r_orc = float(np.linalg.norm(A.entries @ ab.values[oracle] - y))
        assert r_pgd >= r_orc - 1e-12


def test_noisy_contraction_telemetry():
    # normalized design with its paired step n/m; the per-iteration error
    # recursion holds with the theorem floor in nearly all iterations
    n, m, b, p, sigma = 256, 2048, 6, 0.05, 0.1
    model = SpikeSlab(p)
    x = sample_path(model, n, 1234)
    ab = build_alphabet(0, 1, b)
    xq = ab.values[quantize_vector(x, ab)]
    A = gen_gaussian(m, n, "normalized", 4321)
    y = measure(A, xq, sigma, 999)
    kern = quantized_kernel(model, b)
    w = weights_from_kernel(kern)
    cfg = PgdConfig(projector=L0Projector(20), b=b, k=0, max_iters=30)
    est, trace = pgd_solve(A, y, w, ab, cfg, truth=x)
    dbar = cond_entropy(kern) / b
    floor = contraction_floor(n, m, b, sigma, dbar, 0.1, "normalized")
    assert contraction_fraction(trace.err_quantized, floor) >= 0.9


def test_contraction_fraction_edge_cases():
    assert contraction_fraction([5.0, 0.0], 1.0) == 1.0  # no countable pairs
    assert contraction_fraction([9.0, 8.0, 7.0, 6.2], 0.1) == 1.0
    assert contraction_fraction([9.0, 8.0, 7.0, 7.3], 0.1) == 0.5
    assert contraction_fraction([9.0, 8.0, 9.5], 0.1) == 0.0


def test_default_gamma_tracks_entropy():
    kern = quantized_kernel(SpikeSlab(0.1), 5)
    assert default_gamma(kern, delta=0.1) == pytest.approx(
        cond_entropy(kern) + 0.5, abs=1e-12
    )


def test_pc_markov_constrained_pgd_runs():
    # a first-order model exercises the Viterbi projector inside the solver
    n, m, b, p = 24, 20, 2, 0.15
    model = PiecewiseConstant(p)
    x = sample_path(model, n, 60)
    ab = build_alphabet(0, 1, b)
    xq = ab.values[quantize_vector(x, ab)]
    A = gen_gaussian(m, n, "unit", 61)
    y = A.entries @ xq
    kern = quantized_kernel(model, b)
    w = weights_from_kernel(kern)
    gamma = default_gamma(kern, delta=0.4)
    cfg = PgdConfig(
        projector=ConstrainedProjector(gamma), b=b, k=1, max_iters=15,
        mu=0.5 / m, allow_unpaired_mu=True,
    )
    est, trace = pgd_solve(A, y, w, ab, cfg, truth=x)
    idx = quantize_vector(est, ab)
    assert complexity_cost(idx, w) <= gamma
    assert trace.residuals[-1] <= trace.residuals[0]
