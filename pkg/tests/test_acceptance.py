"""One test per acceptance criterion; each prints a single pass/fail line."""

import json
import math
import time
from fractions import Fraction as F

import numpy as np
import pytest

from capsulelab import cli, construction, covering, fields, functionals, geometry, kernels, maximal
from capsulelab.verification import (
    STRONG_TYPE_FIELDS,
    STRONG_TYPE_SCALARS,
    biot_savart_decay,
    biot_savart_inversion,
    centered_maximal_1d,
    chord_by_quadrature,
    gaussian_bump,
    polynomial_potential,
    random_family,
    random_shell,
    smoothed_indicator,
)


def test_01_kernel_residual(report_criterion):
    t0 = time.perf_counter()
    x = random_shell(1000, 0.1, 10.0, seed=1)
    worst = max(float(np.max(kernels.relative_residual(kernels.OseenKernel(1.0, U), x))) for U in (0.0, 1.0, 10.0))
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-8 and elapsed < 1.0
    assert report_criterion(1, ok, f"max relative residual {worst:.2e} < 1e-8, {elapsed:.3f}s < 1s")


def test_02_delta_normalization(report_criterion):
    exact = [kernels.delta_normalization(kernels.OseenKernel(1.0, 0.0), r) for r in (1e-3, 1.0, 1e3)]
    drift = kernels.delta_normalization(kernels.OseenKernel(1.0, 1.0), 1e-3)
    err = max(abs(v - 1) for v in exact)
    ok = err <= 1e-10 and abs(drift - 1) <= 1e-3
    assert report_criterion(2, ok, f"U=0 max error {err:.1e}; U=1, r=1e-3 gives {drift:.6f}")


def test_03_mixed_norm(report_criterion):
    xs = (0.1, 1.0, 10.0)
    vals = [kernels.mixed_norm_bound(x) for x in xs]
    bound_ok = all(v <= 4 / x for v, x in zip(vals, xs))
    scaled = [kernels.mixed_norm_bound(x) * x for x in (0.1, 1.0, 2.0, 5.0, 10.0)]
    spread = (max(scaled) - min(scaled)) / min(scaled)
    ok = bound_ok and spread <= 1e-6
    text = (
        f"value*x1 = {scaled[1]:.6f} (= 8 pi) vs bound 4; homogeneity spread {spread:.1e}"
        + ("" if bound_ok else "; the integral exceeds 4/|x1| by the factor 2 pi")
    )
    assert report_criterion(3, ok, text)


def test_04_sandwich(report_criterion):
    t0 = time.perf_counter()
    ok = True
    worst = 0.0
    for f in (gaussian_bump, smoothed_indicator):
        for l in (2.0, 5.0):
            lo, mid, hi = geometry.sandwich_check(f, 1.0, l)
            ok &= lo <= mid * 1.02 and mid <= hi * 1.02
            worst = max(worst, lo / mid, mid / hi)
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 30
    assert report_criterion(4, ok, f"largest side ratio {worst:.3f} <= 1.02, {elapsed:.2f}s < 30s")


def test_05_chord_length(report_criterion):
    rng = np.random.default_rng(5)
    x = rng.uniform([-4, -1, -1], [4, 1, 1], size=(1000, 3))
    err = float(np.max(np.abs(geometry.chord_length(1.0, 3.0, x) - chord_by_quadrature(1.0, 3.0, x))))
    assert report_criterion(5, err <= 1e-6, f"max |closed form - t-integration| = {err:.1e}")


def test_06_streamwise(report_criterion):
    rng = np.random.default_rng(6)
    U = 2.0
    cfg = maximal.MaximalConfig(horizon=1.0)
    x = rng.uniform(-2, 2, size=(100, 3))
    got = maximal.streamwise_maximal(gaussian_bump, fields.FlowMap(fields.constant(U), h=1e-2), x, cfg)
    oracle = centered_maximal_1d(lambda t: gaussian_bump(x[None] + (U * t)[:, None, None] * np.array([1.0, 0, 0])).T, cfg.windows())
    rel = float(np.max(np.abs(got - oracle) / oracle))
    slack = 2.0 * U * cfg.s_min
    dom = bool(np.all(got >= gaussian_bump(x) - slack))
    assert report_criterion(6, rel <= 0.05 and dom, f"max relative error {rel:.1e} vs 1D oracle; domination {dom}")


def test_07_strong_type(report_criterion):
    cfg = maximal.MaximalConfig(horizon=1.0, n_s=30, flow_steps=50)
    worst = 0.0
    for make, speed in STRONG_TYPE_FIELDS.values():
        fm = fields.FlowMap(make(), h=1.0 / 50)
        for f in STRONG_TYPE_SCALARS.values():
            worst = max(worst, maximal.strong_type_ratio(f, fm, (-1, 1, -1, 1, -1, 1), cfg, 2.0, 20, speed)[2])
    assert report_criterion(7, worst <= 5.0, f"empirical (2,2) constant {worst:.3f} (recorded; hard limit 5)")


def test_08_construction(report_criterion):
    params = construction.CapsuleParams(eps0=0.01)
    shear = construction.find_capsule(fields.shear(), (0, 0, 0), params)
    pts = np.random.default_rng(8).uniform(-1, 1, size=(4, 3))
    fam = construction.classify_points(fields.gaussian_curl(), pts, params)
    built = [c for c in fam.constructed() if not c.unbounded] + [shear]
    worst = max(c.residual for c in built)
    ok = abs(shear.R - 0.1) <= 1e-4 and worst <= 1e-6 * params.eps0 and not fam.errors
    assert report_criterion(8, ok, f"R* = {shear.R:.10f}; max residual {worst:.1e} <= 1e-8")


def test_09_covering(report_criterion):
    fam = random_family(1000, seed=9)
    t0 = time.perf_counter()
    sel = covering.vitali_select(fam)
    elapsed = time.perf_counter() - t0
    ok = sel.disjoint and sel.elimination_verified and sel.iterations <= 1000 and elapsed < 10
    text = f"{len(sel.selected)} selected, disjoint {sel.disjoint}, unexplained {len(sel.unexplained)}, {sel.iterations} iterations, {elapsed:.2f}s"
    assert report_criterion(9, ok, text)


def test_10_weak_norm(report_criterion):
    box = (-1, 1, -1, 1, -1, 1)
    p = 2.0
    ind = maximal.weak_norm(lambda y: np.all(np.abs(y) < 0.5, axis=-1).astype(float), p, box, np.linspace(0.005, 0.995, 199), 400_000, seed=10)
    r = lambda y: np.linalg.norm(y, axis=-1)
    pw = maximal.weak_norm(lambda y: np.where(r(y) < 1, r(y) ** (-3 / p), 0.0), p, box, np.geomspace(1.0, 10.0, 64), 1_000_000, seed=11)
    e1 = abs(ind.estimate - 1.0)
    e2 = abs(pw.estimate / (4 * math.pi / 3) ** (1 / p) - 1)
    assert report_criterion(10, e1 <= 0.03 and e2 <= 0.05, f"indicator error {e1:.2%}, power-law error {e2:.2%}")


def test_11_line_integral(report_criterion):
    rng = np.random.default_rng(11)
    ratios = []
    for _ in range(100):
        e = rng.normal(size=3)
        e /= np.linalg.norm(e)
        U, R = rng.uniform(0.1, 10.0), rng.uniform(0.1, 2.0)
        L = R * rng.uniform(1.5, 20.0)
        k, phase, amp = rng.normal(size=3) / R, rng.uniform(0, 2 * math.pi), rng.uniform(0.0, 0.5)
        d = rng.normal(size=3)
        d /= np.linalg.norm(d)
        u = lambda y, U=U, e=e, k=k, phase=phase, amp=amp, d=d: U * e + amp * U * np.sin(y @ k + phase)[..., None] * d
        cc = construction.synthetic_capsule(tuple(rng.uniform(-5, 5, 3)), R, L, tuple(e), U)
        ratios.append(functionals.line_integral_comparability(u, cc))
    ok = min(ratios) >= 0.5 and max(ratios) <= 1.5
    assert report_criterion(11, ok, f"ratios in [{min(ratios):.3f}, {max(ratios):.3f}] over 100 trials")


def test_12_stream_moment(report_criterion):
    rng = np.random.default_rng(12)
    worst = 0.0
    for _ in range(20):
        psi = polynomial_potential(rng.normal(size=(3, 13)))
        lhs = functionals.stream_moment(psi, (0, 0, 0), 1.3)
        rhs = functionals.curl_moment(psi.curl, (0, 0, 0), 1.3)
        worst = max(worst, abs(lhs - rhs) / abs(rhs))
    psi_c = fields.VectorField("potential_of_e1", lambda y: np.stack([0 * y[..., 0], 0 * y[..., 0], y[..., 1]], -1))
    U, R = 1.0, 1.0
    value = functionals.stream_moment(psi_c, (0, 0, 0), R)
    exact = 4 * math.pi / 15 * U * R**5
    const_err = abs(value / exact - 1)
    ok = worst <= 1e-6 and const_err <= 0.005
    text = f"identity error {worst:.1e}; constant-field moment {value:.6f} = (4 pi/15)UR^5 (a constant U/15 = {U / 15:.6f} is off by 4 pi)"
    assert report_criterion(12, ok, text)


def test_13_thresholds(report_criterion):
    pa = functionals.thresholds(functionals.ExponentInputs(alpha=F(1, 9))).p_alpha
    pb = functionals.thresholds(functionals.ExponentInputs(beta=F(29, 193))).p_beta
    s1 = functionals.seregin_crossover(F(1, 9))
    s2 = functionals.chae_wolf_crossover(F(1, 9))
    ok = pa == F(9, 2) and pb == F(9, 2) and s1 == 7 and s2 == F(9, 2)
    ok &= functionals.seregin_alpha(s1) == F(1, 9) and functionals.chae_wolf_alpha(s2) == F(1, 9)
    assert report_criterion(13, ok, f"p(1/9) = {pa}, p(29/193) = {pb}, crossovers s = {s1} and {s2}")


def test_14_proximity(report_criterion):
    drift = maximal.streamline_proximity(fields.FlowMap(fields.constant(1.0), h=0.05), 1.0, 0.0, 3.0, 1.0, 20_000)
    lens = maximal.streamline_proximity(fields.FlowMap(fields.zero(), h=0.05), 1.0, 0.0, 1.0, 1.0, 200_000, seed=14)
    target = 11 / 32
    ok = abs(drift - 1) <= 0.01 and abs(lens - target) <= 0.02 * target
    text = f"drift fraction {drift:.4f}; lens fraction {lens:.4f} vs target 11/32 = {target:.5f} (closed form 5/16 = {maximal.lens_fraction(1.0, 1.0):.5f})"
    assert report_criterion(14, ok, text)


def test_15_biot_savart(report_criterion):
    t0 = time.perf_counter()
    err, _ = biot_savart_inversion(n=16)
    exponent, _, _ = biot_savart_decay()
    elapsed = time.perf_counter() - t0
    ok = err < 0.05 and 1.8 <= exponent <= 2.2 and elapsed < 120
    assert report_criterion(15, ok, f"curl inversion L2 error {err:.2%} on 16^3; decay exponent {exponent:.3f}; {elapsed:.1f}s")


@pytest.mark.slow
def test_16_verify_pipeline(report_criterion, tmp_path, capsys):
    outputs = []
    times = []
    for _ in range(2):
        t0 = time.perf_counter()
        cli.main(["verify", "--seed", "3", "--out", str(tmp_path)])
        times.append(time.perf_counter() - t0)
        text = (tmp_path / "verify.json").read_text()
        outputs.append("\n".join(line for line in text.splitlines() if '"timestamp"' not in line))
    capsys.readouterr()
    same = outputs[0] == outputs[1]
    report = json.loads(text)
    ok = same and max(times) < 600
    assert report_criterion(16, ok, f"byte-identical modulo timestamp: {same}; {len(report['checks'])} checks; runtime {max(times):.1f}s < 600s")
