"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Solver runs are cached so the invariant audit can aggregate every run of the
suite without repeating them.
"""

import math
import time
from functools import lru_cache

import numpy as np
import pytest

from _helpers import (
    central_difference,
    euclidean_regret,
    kl_violations,
    surrogate_bound_violations,
    mean_regret,
    reference_synthetic_gap,
    rel_err,
    simplex_regret,
)
from pfminmax import bettor as eb
from pfminmax.cli import main
from pfminmax.data import REMAPS, LabelRemap, make_classification, parse_libsvm, remap_labels, serialize_libsvm
from pfminmax.errors import EmptyDatasetError, FormatError, ParseError, RemapError
from pfminmax.metrics import duality_gap, hinge_losses, robust_objective, synthetic_gap, synthetic_monitor
from pfminmax.problems import DroProblem, SyntheticProblem
from pfminmax.solvers import (
    RestartSchedule,
    cb_min_max,
    cb_min_max_simplex,
    default_step_sizes,
    primal_dual_gradient,
    restart_cb_min_max,
)

SYN = SyntheticProblem(0.5, 5.0, 5.0)
RESTART = RestartSchedule(epsilon0=4.0, epsilon=0.25, theta=0.25, C=100.0)


def _pt(v):
    return np.array([float(v)])


def _timed(fn, *args, **kwargs):
    t0 = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, time.perf_counter() - t0


def _dist(out):
    return math.hypot(float(out.x_bar[0]), float(out.y_bar[0]))


@lru_cache(maxsize=None)
def synthetic_run(algorithm, start, T):
    if algorithm == "cb":
        return _timed(cb_min_max, SYN, SYN.X, SYN.Y, _pt(start), _pt(start), T, monitor=synthetic_monitor(SYN))
    ex, ey = default_step_sizes(SYN, T)
    return _timed(primal_dual_gradient, SYN, SYN.X, SYN.Y, _pt(start), _pt(start), T, ex, ey,
                  monitor=synthetic_monitor(SYN))


@lru_cache(maxsize=None)
def restart_run():
    return _timed(restart_cb_min_max, SYN, SYN.X, SYN.Y, _pt(1), _pt(1), RESTART, monitor=synthetic_monitor(SYN))


@lru_cache(maxsize=None)
def desk_problem():
    ds = make_classification(200, 20, seed=42)
    return ds, DroProblem.from_dataset(ds, R=1e5, lam=1e-4, rho=1e-4)


@lru_cache(maxsize=None)
def desk_runs():
    _, prob = desk_problem()
    w0, p0 = np.zeros(prob.dim), np.full(prob.n, 1 / prob.n)
    cb = _timed(cb_min_max_simplex, prob, prob.X, w0, p0, 1000)
    ex, ey = default_step_sizes(prob, 1000, "entropic")
    pdg = _timed(primal_dual_gradient, prob, prob.X, prob.Y, w0, p0, 1000, ex, ey, "entropic")
    return cb, pdg


def reference_dro_pdg(X, y, T, R, lam, rho):
    """Dense projected-gradient / exponentiated-gradient solve, written independently
    of the package: returns the averaged primal iterate."""
    n, d = X.shape
    A = y[:, None] * X
    xmax = float(np.linalg.norm(X, axis=1).max())
    Gw, Gp = xmax + rho * R, 1.0 + R * xmax + lam
    eta_w = 2 * R / (Gw * math.sqrt(T))
    eta_p = math.log(n) / (Gp * math.sqrt(T))
    w, p = np.zeros(d), np.full(n, 1.0 / n)
    w_sum = np.zeros(d)
    for _ in range(T):
        w_sum += w
        margin = 1.0 - A @ w
        gw = -A.T @ (p * (margin > 0)) + rho * w
        gp = np.maximum(margin, 0.0) + lam * (p - 1.0 / n)
        w = w - eta_w * gw
        nrm = np.linalg.norm(w)
        if nrm > R:
            w *= R / nrm
        z = eta_p * gp
        p = p * np.exp(z - z.max())
        p /= p.sum()
    return w_sum / T


def test_criterion_01_synthetic_final_distance(acceptance_log):
    ok, parts = True, []
    for start in (1.0, 0.1):
        cb, t_cb = synthetic_run("cb", start, 10_000)
        pdg, t_pdg = synthetic_run("pdg", start, 10_000)
        d_cb, d_pdg = _dist(cb), _dist(pdg)
        ok &= d_cb < d_pdg and t_cb < 5.0 and t_pdg < 5.0
        parts.append(f"start {start}: cb {d_cb:.3g} vs pdg {d_pdg:.3g} ({t_cb:.2f}s/{t_pdg:.2f}s)")
    assert acceptance_log(1, ok, "; ".join(parts))


def test_criterion_02_gap_decay_slope(acceptance_log):
    Ts = (250, 1000, 4000, 16000)
    t0 = time.perf_counter()
    gaps = []
    for T in Ts:
        out = cb_min_max(SYN, SYN.X, SYN.Y, _pt(1), _pt(1), T)
        gaps.append(synthetic_gap(SYN, out.x_bar, out.y_bar))
    elapsed = time.perf_counter() - t0
    ratios = [b / a for a, b in zip(gaps, gaps[1:])]
    ok = all(r <= 0.7 for r in ratios) and elapsed < 10.0
    assert acceptance_log(2, ok, "ratios " + ", ".join(f"{r:.3f}" for r in ratios) + f" in {elapsed:.2f}s")


def test_criterion_03_exact_gap_oracle(acceptance_log):
    gap, exact = duality_gap(SYN, _pt(1), _pt(1))
    oracle = reference_synthetic_gap(0.5, 5.0, 5.0, 1.0, 1.0)
    zero, _ = duality_gap(SYN, _pt(0), _pt(0))
    ok = exact and abs(gap - oracle) <= 1e-6 and abs(gap - 2.1398814) <= 1e-6 and zero == 0.0
    assert acceptance_log(3, ok, f"gap(1,1)={gap:.9f} oracle={oracle:.9f} gap(0,0)={zero!r}")


def test_criterion_04_bettor_micro_oracle(acceptance_log):
    state = eb.BettorState.fresh(np.zeros(1), epsilon_prime=1.0)
    xs = [float(state.current_unconstrained[0])]
    for g in (-1.0, -1.0):
        _, x = eb.bettor_step(state, np.array([g]))
        xs.append(float(x[0]))
    assert acceptance_log(4, xs == [0.0, 0.5, 1.0], f"iterates {xs}")


def test_criterion_05_surrogate_regret_inequality(acceptance_log):
    violations, worst = surrogate_bound_violations(1000, seed=0)
    assert acceptance_log(5, violations == 0, f"{violations} violations over 1000 sequences, worst slack {worst:.3g}")


def test_criterion_06_regret_decay(acceptance_log):
    Ts = (256, 1024, 4096)
    ok, parts = True, []
    for name, fn in (("euclidean", euclidean_regret), ("simplex", simplex_regret)):
        means = [mean_regret(fn, T, n_sequences=50, seed=1) for T in Ts]
        ratios = [b / a for a, b in zip(means, means[1:])]
        ok &= all(r <= 0.75 for r in ratios)
        parts.append(f"{name} ratios " + ", ".join(f"{r:.3f}" for r in ratios))
    assert acceptance_log(6, ok, "; ".join(parts))


def test_criterion_07_invariants_across_runs(acceptance_log):
    outputs = [synthetic_run(a, s, 10_000)[0] for a in ("cb", "pdg") for s in (1.0, 0.1)]
    outputs.append(restart_run()[0])
    outputs.extend(o for o, _ in desk_runs())
    feas = sum(o.audit.feasibility_violations for o in outputs)
    max_infeas = max(o.audit.max_infeasibility for o in outputs)
    scaled = max(o.audit.max_scaled_norm for o in outputs)
    wealth = min(o.audit.min_wealth for o in outputs)
    ok = feas == 0 and wealth > 0.0 and scaled <= 1.0 + 1e-9
    assert acceptance_log(7, ok, f"{len(outputs)} runs: feasibility violations {feas} (max {max_infeas:.2g}), "
                                 f"max scaled norm {scaled:.6g}, min wealth {wealth:.4g}")


def test_criterion_08_desk_dro(acceptance_log):
    t0 = time.perf_counter()
    ds, prob = desk_problem()
    (cb, t_cb), (pdg, t_pdg) = desk_runs()
    robust_cb, robust_pdg = robust_objective(prob, cb.x_bar), robust_objective(prob, pdg.x_bar)
    X = ds.matrix().toarray()
    y = np.asarray(ds.labels)
    w_ref = reference_dro_pdg(X, y, 100_000, prob.R, prob.lam, prob.rho)
    train_ref = hinge_losses(ds, w_ref)[0]
    train_cb = hinge_losses(ds, cb.x_bar)[0]
    rel = abs(train_cb - train_ref) / train_ref
    # solver runs may already be cached by the invariant audit; count their own time
    elapsed = time.perf_counter() - t0 + t_cb + t_pdg
    ok = robust_cb <= robust_pdg and rel <= 0.05 and elapsed < 30.0
    assert acceptance_log(8, ok, f"robust cb {robust_cb:.6g} vs pdg {robust_pdg:.6g}; train cb {train_cb:.6g} "
                                 f"vs reference {train_ref:.6g} ({rel:.1%}) in {elapsed:.1f}s; regularizer sign +1")


def test_criterion_09_restart_schedule(acceptance_log):
    expected = [math.ceil(100 / e**1.5) for e in RESTART.stage_epsilons()]
    out, _ = restart_run()
    total = out.stage_ends[-1]
    single = cb_min_max(SYN, SYN.X, SYN.Y, _pt(1), _pt(1), total)
    g_restart = synthetic_gap(SYN, out.x_bar, out.y_bar)
    g_single = synthetic_gap(SYN, single.x_bar, single.y_bar)
    ok = RESTART.stage_lengths() == expected and g_restart <= 1.5 * g_single
    assert acceptance_log(9, ok, f"lengths {RESTART.stage_lengths()}, gap {g_restart:.3g} vs single "
                                 f"{g_single:.3g} at {total} iterations")


@pytest.mark.xfail(strict=True, reason="the three-point KL bound with the positive-part log factor does not "
                                       "hold; roughly 1% of uniform triples violate it")
def test_criterion_10_kl_three_point_bound(acceptance_log):
    bad = kl_violations(1000, seed=0)
    assert acceptance_log(10, bad == 0, f"{bad} violations over 1000 triples")


def _dro_non_kink(prob, rng, k):
    pts = []
    while len(pts) < k:
        w = rng.standard_normal(prob.dim) * 0.3
        if np.min(np.abs(1.0 - prob.A @ w)) > 1e-4:
            pts.append(w)
    return pts


def test_criterion_11_gradient_checks(acceptance_log):
    rng = np.random.default_rng(11)
    worst_syn = 0.0
    for x, y in rng.uniform(-5, 5, (100, 2)):
        gx, gy = SYN.subgrads(_pt(x), _pt(y))
        fx = central_difference(lambda v: SYN.value(v[0], y), _pt(x), 1e-5)
        fy = central_difference(lambda v: -SYN.value(x, v[0]), _pt(y), 1e-5)
        worst_syn = max(worst_syn, rel_err(gx, fx), rel_err(gy, fy))
    ds, _ = desk_problem()
    prob = DroProblem.from_dataset(ds, rho=1e-2, lam=0.3)
    worst_dro = 0.0
    for w in _dro_non_kink(prob, rng, 100):
        p = rng.dirichlet(np.ones(prob.n))
        gw, gp = prob.subgrads(w, p)
        fw = central_difference(lambda v: prob.value(v, p), w, 1e-6)
        fp = central_difference(lambda q: -prob.value(w, q), p, 1e-4)
        worst_dro = max(worst_dro, rel_err(gw, fw), rel_err(gp, fp))
    ok = worst_syn <= 1e-5 and worst_dro <= 1e-5
    assert acceptance_log(11, ok, f"worst rel err synthetic {worst_syn:.2g}, dro {worst_dro:.2g}")


def _raises(fn, exc, line=None):
    try:
        fn()
    except exc as err:
        return line is None or getattr(err, "line", None) == line
    return False


def test_criterion_12_parser_fixtures(acceptance_log):
    text = "1 1:0.5 3:-2.25 10:1e-07\n-1 2:3.0\n2.5 4:0.1\n0\n"
    ds = parse_libsvm(text)
    checks = {
        "round-trip": serialize_libsvm(ds) == text and parse_libsvm(serialize_libsvm(ds)) == ds,
        "sensit": remap_labels(parse_libsvm("1 1:1\n2 1:2\n3 1:3\n"), REMAPS["sensit"]).labels == [1.0, -1.0, -1.0],
        "protein": remap_labels(parse_libsvm("0 1:1\n1 2:1\n2 3:1\n"), REMAPS["protein"]).labels == [-1.0, 1.0, -1.0],
        "identity": (lambda d: remap_labels(d, LabelRemap.of([1], [-1])) == d)(parse_libsvm("1 1:1\n-1 2:1\n")),
        "format": _raises(lambda: parse_libsvm("1 5:0.1 3:0.2"), FormatError, 1),
        "parse": _raises(lambda: parse_libsvm("1 1:1\n1 2:x"), ParseError, 2),
        "empty": _raises(lambda: parse_libsvm(""), EmptyDatasetError),
        "remap": _raises(lambda: remap_labels(parse_libsvm("7 1:1"), REMAPS["sensit"]), RemapError),
    }
    failed = [k for k, v in checks.items() if not v]
    assert acceptance_log(12, not failed, f"{len(checks) - len(failed)}/{len(checks)} fixtures"
                                          + (f", failed: {failed}" if failed else ""))


DETERMINISM_RUNS = {
    "synthetic": ["--experiment", "synthetic", "--algorithm", "cb_min_max", "--x0", "1", "--y0", "1",
                  "--T", "10000"],
    "restart": ["--experiment", "synthetic", "--algorithm", "restart", "--x0", "1", "--y0", "1"],
    "dro": ["--experiment", "dro", "--algorithm", "cb_min_max_simplex", "--T", "1000"],
}


def test_criterion_13_determinism(acceptance_log, tmp_path, monkeypatch):
    monkeypatch.delenv("PFMINMAX_OUTPUT_DIR", raising=False)
    same = []
    for name, args in DETERMINISM_RUNS.items():
        blobs = []
        for rep in range(2):
            out = tmp_path / f"{name}_{rep}.csv"
            assert main(["run", *args, "--timing", "off", "--output", str(out)]) == 0
            blobs.append(out.read_bytes())
        same.append(blobs[0] == blobs[1])
    assert acceptance_log(13, all(same), ", ".join(f"{n} {'identical' if s else 'DIFFERENT'}"
                                                   for n, s in zip(DETERMINISM_RUNS, same)))
