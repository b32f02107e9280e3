import math

import numpy as np
import pytest

from bdgas import quadrature
from bdgas.core import ContinuumConfiguration, ReservoirParams, ValidationError
from bdgas.interval import (DEFAULT_CONFIG, abs_density,
                            absorption_split, density_array, doob_intensity,
                            dual_box_moment, dual_density, gas_intensity,
                            gas_intensity_array, kernel_cross_consistency,
                            q0_array, sample_abs_bm_marginal, sample_bdbg,
                            sample_interior_conditional, stationary_intensity,
                            theta_dual_density, total_intensity)
from bdgas.rng import stream_generator

P12 = ReservoirParams(1.0, 2.0)


def q0_pde_oracle(x_targets, t_final, n_grid=600, n_steps=1200):
    """Crank-Nicolson solve of du/dt = (1/2) u_xx with u(0)=1, u(1)=0,
    u(.,0)=0; u(x,t) equals the probability of absorption at 0 by t."""
    h = 1.0 / n_grid
    dt = t_final / n_steps
    xs = np.linspace(0.0, 1.0, n_grid + 1)
    u = np.zeros(n_grid + 1)
    u[0] = 1.0
    r = 0.5 * dt / (2 * h * h)
    # tridiagonal (I - r L) u_new = (I + r L) u_old on interior nodes
    n_int = n_grid - 1
    main_new = np.full(n_int, 1.0 + 2.0 * r)
    off_new = np.full(n_int - 1, -r)
    for _ in range(n_steps):
        rhs = (1.0 - 2.0 * r) * u[1:-1] + r * (u[:-2] + u[2:])
        rhs[0] += r * u[0]  # new-level boundary term; old level is in the stencil
        a = off_new.copy()
        b = main_new.copy()
        c = off_new.copy()
        d = rhs
        for i in range(1, n_int):
            w = a[i - 1] / b[i - 1]
            b[i] -= w * c[i - 1]
            d[i] -= w * d[i - 1]
        sol = np.empty(n_int)
        sol[-1] = d[-1] / b[-1]
        for i in range(n_int - 2, -1, -1):
            sol[i] = (d[i] - c[i] * sol[i + 1]) / b[i]
        u[1:-1] = sol
    return np.interp(x_targets, xs, u)


def test_kernel_symmetry_and_bound():
    for x, y, t in [(0.3, 0.7, 0.5), (0.2, 0.9, 0.04), (0.55, 0.1, 1.5)]:
        a = abs_density(x, y, t)
        b = abs_density(y, x, t)
        assert a.value == pytest.approx(b.value, abs=1e-14)
        assert a.trunc_error_bound <= 10 * DEFAULT_CONFIG.tol


def test_kernel_cross_series_consistency():
    assert kernel_cross_consistency(DEFAULT_CONFIG, grid=50) <= 10 * DEFAULT_CONFIG.tol


def test_kernel_large_time_spectral_gap():
    # dominant mode decays at rate pi^2/2
    x, y = 0.35, 0.6
    v1 = abs_density(x, y, 2.0).value
    v2 = abs_density(x, y, 3.0).value
    slope = math.log(v2 / v1)
    assert slope == pytest.approx(-math.pi ** 2 / 2, rel=1e-4)
    lead = 2 * math.exp(-math.pi ** 2 * 3.0 / 2) * math.sin(math.pi * x) * math.sin(math.pi * y)
    assert v2 == pytest.approx(lead, rel=1e-4)


def test_kernel_conservation():
    rng = np.random.default_rng(1)
    for _ in range(6):
        x = float(rng.uniform(0.05, 0.95))
        t = float(rng.uniform(0.01, 2.0))
        split = absorption_split(x, t)
        integ = quadrature.adaptive(lambda ys: density_array(x, ys, t)[0],
                                    0.0, 1.0, 1e-10)
        assert abs(integ + split.q0 + split.q1 - 1.0) < 1e-8


def test_kernel_chapman_kolmogorov():
    rng = np.random.default_rng(2)
    for _ in range(4):
        x = float(rng.uniform(0.1, 0.9))
        y = float(rng.uniform(0.1, 0.9))
        s = float(rng.uniform(0.03, 0.7))
        t = float(rng.uniform(0.03, 0.7))
        conv = quadrature.adaptive(
            lambda us: density_array(x, us, s)[0] * density_array(y, us, t)[0],
            0.0, 1.0, 1e-10)
        assert abs(conv - abs_density(x, y, s + t).value) < 1e-7


def test_absorption_split_examples():
    s = absorption_split(0.3, 0.0)
    assert (s.q0, s.q1, s.survive) == (0.0, 0.0, 1.0)
    s = absorption_split(0.25, 60.0)
    assert s.q0 == pytest.approx(0.75, abs=1e-12)
    assert s.q1 == pytest.approx(0.25, abs=1e-12)
    for t in (0.05, 0.3, 2.0):
        s = absorption_split(0.5, t)
        assert s.q0 == pytest.approx(s.q1, abs=1e-13)
        assert s.q0 + s.q1 + s.survive == pytest.approx(1.0, abs=1e-10)


def test_absorption_split_against_pde_oracle():
    xs = np.array([0.15, 0.4, 0.75])
    t = 0.25
    oracle = q0_pde_oracle(xs, t)
    series = q0_array(xs, t)
    assert np.max(np.abs(oracle - series)) < 2e-5


def test_absorption_split_against_bridge_path_oracle():
    # Euler-Maruyama with Brownian-bridge crossing probabilities per step
    x0, t_final, dt = 0.3, 0.3, 2e-4
    n_paths = 20000
    rng = stream_generator(77, 0)
    n_steps = int(round(t_final / dt))
    pos = np.full(n_paths, x0)
    state = np.zeros(n_paths, dtype=np.int8)  # 0 live, 1 at 0, 2 at 1
    sq = math.sqrt(dt)
    for _ in range(n_steps):
        live = state == 0
        if not live.any():
            break
        a = pos[live]
        b = a + sq * rng.standard_normal(a.size)
        new_state = np.zeros(a.size, dtype=np.int8)
        new_state[b <= 0.0] = 1
        new_state[b >= 1.0] = 2
        inside = new_state == 0
        if inside.any():
            ai, bi = a[inside], b[inside]
            cross0 = np.exp(-2.0 * ai * bi / dt)
            cross1 = np.exp(-2.0 * (1 - ai) * (1 - bi) / dt)
            u = rng.random(ai.size)
            hit0 = u < cross0
            hit1 = (~hit0) & (u < cross0 + cross1)
            sub = new_state[inside]
            sub[hit0] = 1
            sub[hit1] = 2
            new_state[inside] = sub
        state_live = state[live]
        state_live[:] = new_state
        state[live] = state_live
        pos_live = pos[live]
        pos_live[new_state == 0] = b[new_state == 0]
        pos[live] = pos_live
    split = absorption_split(x0, t_final)
    for observed, expect in [((state == 1).mean(), split.q0),
                             ((state == 2).mean(), split.q1),
                             ((state == 0).mean(), split.survive)]:
        se = math.sqrt(max(expect * (1 - expect), 1e-6) / n_paths)
        assert abs(observed - expect) < 4 * se + 5 * dt


def test_gas_intensity_examples():
    theta = 1.3
    p_eq = ReservoirParams(theta, theta)
    for (x, t) in [(0.3, 0.2), (0.7, 1.0)]:
        s = absorption_split(x, t)
        assert gas_intensity(x, t, p_eq) == pytest.approx(theta * (1 - s.survive))
    p = ReservoirParams(2.0, 0.0)
    assert gas_intensity(0.25, 80.0, p) == pytest.approx(1.5, abs=1e-10)
    # monotone nondecreasing in t, bounded by max intensity
    prev = 0.0
    for t in (0.05, 0.2, 0.5, 1.0, 3.0):
        cur = gas_intensity(0.4, t, P12)
        assert cur >= prev - 1e-12
        assert cur <= max(P12.lambda_left, P12.lambda_right) + 1e-12
        prev = cur


def test_marginal_sampler_frequencies():
    x, t = 0.3, 0.5
    split = absorption_split(x, t)
    rng = stream_generator(3, 0)
    n = 30000
    tallies = {"left": 0, "right": 0, "interior": 0}
    interior = []
    for _ in range(n):
        o = sample_abs_bm_marginal(x, t, rng)
        tallies[o.kind] += 1
        if o.kind == "interior":
            interior.append(o.position)
    for key, expect in [("left", split.q0), ("right", split.q1),
                        ("interior", split.survive)]:
        se = math.sqrt(expect * (1 - expect) / n)
        assert abs(tallies[key] / n - expect) < 4 * se
    assert all(0.0 < y < 1.0 for y in interior)


def test_marginal_sampler_symmetry_at_center():
    rng = stream_generator(4, 0)
    ys = sample_interior_conditional(0.5, 0.4, rng, size=4000)
    # two-sample KS between y and 1-y
    a = np.sort(ys)
    b = np.sort(1.0 - ys)
    grid = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, grid, side="right") / a.size
    cdf_b = np.searchsorted(b, grid, side="right") / b.size
    ks = np.max(np.abs(cdf_a - cdf_b))
    # critical value at alpha=0.01 for the two-sample statistic
    crit = 1.63 * math.sqrt(2.0 / a.size)
    assert ks < crit


def test_marginal_sampler_small_time_moments():
    x, t = 0.5, 1e-4
    rng = stream_generator(5, 0)
    split = absorption_split(x, t)
    assert split.survive == pytest.approx(1.0, abs=1e-12)
    ys = sample_interior_conditional(x, t, rng, size=20000)
    assert ys.mean() == pytest.approx(x, abs=4 * math.sqrt(t / 20000))
    assert ys.var() == pytest.approx(t, rel=0.1)


def test_conditional_sampler_matches_kernel_distribution():
    # empirical CDF against quadrature of the normalized kernel
    x, t = 0.35, 0.25
    rng = stream_generator(6, 0)
    ys = sample_interior_conditional(x, t, rng, size=20000)
    survive = absorption_split(x, t).survive
    for edge in (0.25, 0.5, 0.75):
        prob = quadrature.adaptive(lambda u: density_array(x, u, t)[0],
                                   0.0, edge, 1e-10) / survive
        obs = (ys < edge).mean()
        se = math.sqrt(prob * (1 - prob) / ys.size)
        assert abs(obs - prob) < 4 * se


def test_sample_bdbg_empty_start_poisson_counts():
    t = 0.4
    lam_tot = total_intensity(t, P12)
    rng = stream_generator(7, 0)
    n = 20000
    counts = np.empty(n)
    box = (0.3, 0.8)
    box_mean = quadrature.adaptive(
        lambda xs: gas_intensity_array(xs, t, P12), box[0], box[1], 1e-10)
    empty = ContinuumConfiguration(())
    for r in range(n):
        g = sample_bdbg(empty, t, P12, rng, lam_total=lam_tot)
        counts[r] = g.count_in(*box)
    for k, expect in [(1, box_mean), (2, box_mean ** 2)]:
        vals = np.ones(n)
        for j in range(k):
            vals *= np.maximum(counts - j, 0)
        se = vals.std(ddof=1) / math.sqrt(n)
        assert abs(vals.mean() - expect) < 4 * se


def test_sample_bdbg_pure_absorption_when_no_reservoirs():
    p0 = ReservoirParams(0.0, 0.0)
    eta0 = ContinuumConfiguration((0.4, 0.6))
    rng = stream_generator(8, 0)
    for _ in range(40):
        g = sample_bdbg(eta0, 0.3, p0, rng)
        assert len(g.positions) + g.absorbed_left + g.absorbed_right == 2


def test_dual_density_examples():
    p = P12
    kv = dual_density((0.4,), 0.3, ContinuumConfiguration(()), p)
    assert kv.value == pytest.approx(gas_intensity(0.4, 0.3, p), abs=1e-12)
    p0 = ReservoirParams(0.0, 0.0)
    kv = dual_density((0.4,), 0.3, ContinuumConfiguration((0.7,)), p0)
    assert kv.value == pytest.approx(abs_density(0.4, 0.7, 0.3).value, abs=1e-12)
    kv = dual_density((0.3, 0.6), 50.0, ContinuumConfiguration((0.5,)), p)
    expect = stationary_intensity(0.3, p) * stationary_intensity(0.6, p)
    assert kv.value == pytest.approx(float(expect), abs=1e-9)


def test_dual_density_caps():
    with pytest.raises(ValidationError):
        dual_density((0.1, 0.2, 0.3, 0.4, 0.5), 0.5, ContinuumConfiguration(()), P12)


def test_theta_dual_density_examples():
    pth = ReservoirParams(1.0, 2.0, theta=0.7)
    kv = theta_dual_density((0.4,), 0.3, ContinuumConfiguration(()), pth)
    assert kv.value == pytest.approx(gas_intensity(0.4, 0.3, pth) - 0.7, abs=1e-12)
    eta0 = ContinuumConfiguration((0.2, 0.9))
    z = (0.4, 0.55)
    kv0 = theta_dual_density(z, 0.3, eta0, pth, theta=0.0)
    kv1 = dual_density(z, 0.3, eta0, pth)
    assert kv0.value == pytest.approx(kv1.value, abs=1e-12)
    p_eq = ReservoirParams(1.5, 1.5, theta=1.5)
    kv = theta_dual_density((0.3,), 40.0, ContinuumConfiguration(()), p_eq)
    assert kv.value == pytest.approx(0.0, abs=1e-10)
    kv2 = theta_dual_density((0.3, 0.7), 40.0, ContinuumConfiguration((0.5,)), p_eq)
    assert kv2.value == pytest.approx(0.0, abs=1e-8)


def test_dual_box_moment_matches_pointwise_quadrature():
    # independent cross-check: integrate the pointwise density over a
    # 2-d box by tensor quadrature
    eta0 = ContinuumConfiguration((0.3,))
    t = 0.4
    box = ((0.2, 0.5), (0.55, 0.8))
    fast = dual_box_moment(list(box), t, eta0, P12)
    nodes, weights = np.polynomial.legendre.leggauss(32)

    def scale(nodes, a, b):
        return 0.5 * (a + b) + 0.5 * (b - a) * nodes

    total = 0.0
    for u, wu in zip(scale(nodes, *box[0]), weights):
        for v, wv in zip(scale(nodes, *box[1]), weights):
            total += (wu * wv * dual_density((float(u), float(v)), t, eta0, P12).value)
    total *= 0.25 * (box[0][1] - box[0][0]) * (box[1][1] - box[1][0])
    assert fast == pytest.approx(total, rel=1e-9)


def test_stationary_intensity_examples():
    p = ReservoirParams(1.0, 3.0)
    assert float(stationary_intensity(0.5, p)) == 2.0
    assert float(stationary_intensity(1e-12, p)) == pytest.approx(1.0, abs=1e-9)
    assert float(stationary_intensity(1 - 1e-12, p)) == pytest.approx(3.0, abs=1e-9)
    p_eq = ReservoirParams(1.5, 1.5)
    assert float(stationary_intensity(0.3, p_eq)) == pytest.approx(1.5, abs=1e-14)


def test_doob_intensity_fixed_point_and_degenerate():
    p = ReservoirParams(1.0, 3.0)
    evolve = doob_intensity(lambda xs: stationary_intensity(xs, p), 0.5, p)
    for z in (0.2, 0.5, 0.8):
        assert abs(evolve(z) - float(stationary_intensity(z, p))) < 1e-6
    lam_only = doob_intensity(lambda xs: np.zeros_like(np.asarray(xs)), 0.5, p)
    for z in (0.3, 0.7):
        assert lam_only(z) == pytest.approx(gas_intensity(z, 0.5, p), abs=1e-10)


def test_doob_intensity_mass_balance():
    p = P12
    t = 0.3
    rho = lambda xs: 1.0 + 0.5 * np.sin(np.pi * np.asarray(xs))
    evolve = doob_intensity(rho, t, p)
    total = quadrature.adaptive(lambda zs: np.array([evolve(float(z)) for z in zs]),
                                0.0, 1.0, 1e-8)
    survive_mass = quadrature.adaptive(
        lambda xs: rho(xs) * (1.0 - q0_array(xs, t) - q0_array(1.0 - xs, t)),
        0.0, 1.0, 1e-10)
    assert total == pytest.approx(survive_mass + total_intensity(t, p), abs=1e-6)
