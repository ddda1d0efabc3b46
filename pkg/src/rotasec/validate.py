"""Built-in self checks behind the ``validate`` CLI subcommand.

Three quick suites: analytic gradients against central finite differences,
the direction-estimator error statistics against the closed-form variance
bound, and the surrogate inequalities (Jensen dominance and the smooth-min
sandwich).  Each check prints one line; any failure flips the exit code.
"""
from __future__ import annotations

import numpy as np

from .config import ExperimentConfig
from .harness import generate_scene
from .objective import softmin, surrogate_secrecy_values
from .optimizer import (BeamformingSolution, ProblemData, context_for,
                        euclidean_grad_w, grad_phi_arr, grad_varphi)
from .sensing import crb, mle_estimate, simulate_echoes, uncertainty_region


def _random_problem(ecfg: ExperimentConfig, rng: np.random.Generator) -> ProblemData:
    scene = generate_scene(ecfg, rng)
    theta_hat = ecfg.eav_position.azimuth + rng.normal(0.0, 0.01)
    outcome = uncertainty_region(theta_hat, 1e-4, ecfg.n_samples)
    return ProblemData(ecfg.array, ecfg.link, scene.user_ranges,
                       scene.user_azimuths, ecfg.eav_position.range_m,
                       outcome.sampled_angles, outcome.weights)


def _random_point(ecfg: ExperimentConfig, rng: np.random.Generator):
    nt = ecfg.array.n_tx
    w = np.exp(1j * rng.uniform(0, 2 * np.pi, nt)) / np.sqrt(nt)
    phi = rng.uniform(-ecfg.array.phi_arr_max, ecfg.array.phi_arr_max)
    varphi = rng.uniform(-ecfg.array.varphi_max, ecfg.array.varphi_max, nt)
    return BeamformingSolution(w, float(phi), varphi)


def _objective_at(prob: ProblemData, sol: BeamformingSolution, beta: float) -> float:
    ctx = context_for(prob, sol.rotation(), beta)
    return softmin(surrogate_secrecy_values(sol.w, ctx, prob.lb), beta)


def _min_projection(prob: ProblemData, sol: BeamformingSolution) -> float:
    """Distance of the point from the nearest gain-clip boundary."""
    from .geometry import _geometry_parts
    parts = _geometry_parts(prob.cfg, sol.rotation(),
                            prob._all_ranges, prob._all_azimuths)
    return float(np.abs(parts.proj).min())


def check_gradients(ecfg: ExperimentConfig, n_points: int = 25,
                    seed: int = 2024, tol: float = 1e-5) -> tuple[bool, str]:
    """Central finite differences vs the analytic gradients at random points."""
    rng = np.random.Generator(np.random.Philox(seed))
    beta = 10.0
    step = 1e-6
    worst = 0.0
    checked = 0
    while checked < n_points:
        prob = _random_problem(ecfg, rng)
        sol = _random_point(ecfg, rng)
        if _min_projection(prob, sol) < 1e-4:
            continue
        checked += 1
        ctx = context_for(prob, sol.rotation(), beta)
        v = sol.w * np.sqrt(prob.cfg.n_tx)

        g_an = euclidean_grad_w(v, ctx, prob.lb)
        g_fd = np.zeros_like(g_an)
        for i in range(v.size):
            for part, unit in ((1.0, 1.0), (1j, 1j)):
                dv = np.zeros_like(v)
                dv[i] = unit * step
                fp = softmin(surrogate_secrecy_values((v + dv) / np.sqrt(v.size),
                                                      ctx, prob.lb), beta)
                fm = softmin(surrogate_secrecy_values((v - dv) / np.sqrt(v.size),
                                                      ctx, prob.lb), beta)
                d = (fp - fm) / (2 * step)
                if part == 1.0:
                    g_fd[i] += d / 2.0
                else:
                    g_fd[i] += 1j * d / 2.0
        rel = np.linalg.norm(g_fd - g_an) / max(np.linalg.norm(g_an), 1e-3)
        worst = max(worst, rel)

        g_an_phi = grad_phi_arr(prob, sol, beta)
        fp = _objective_at(prob, BeamformingSolution(sol.w, sol.phi_arr + step,
                                                     sol.varphi), beta)
        fm = _objective_at(prob, BeamformingSolution(sol.w, sol.phi_arr - step,
                                                     sol.varphi), beta)
        rel = abs((fp - fm) / (2 * step) - g_an_phi) / max(abs(g_an_phi), 1e-3)
        worst = max(worst, rel)

        g_an_el = grad_varphi(prob, sol, beta)
        g_fd_el = np.zeros_like(g_an_el)
        for n in range(prob.cfg.n_tx):
            dv = np.zeros(prob.cfg.n_tx)
            dv[n] = step
            fp = _objective_at(prob, BeamformingSolution(sol.w, sol.phi_arr,
                                                         sol.varphi + dv), beta)
            fm = _objective_at(prob, BeamformingSolution(sol.w, sol.phi_arr,
                                                         sol.varphi - dv), beta)
            g_fd_el[n] = (fp - fm) / (2 * step)
        rel = np.linalg.norm(g_fd_el - g_an_el) / max(np.linalg.norm(g_an_el), 1e-3)
        worst = max(worst, rel)
    ok = worst <= tol
    return ok, f"gradient check: worst relative error {worst:.3e} (tol {tol:g})"


def check_estimator(ecfg: ExperimentConfig, n_trials: int = 1000,
                    seed: int = 77) -> tuple[bool, str]:
    """Empirical estimator MSE against the closed-form bound, plus coverage."""
    theta_true = ecfg.eav_position.azimuth
    r_true = ecfg.eav_position.range_m
    bound = crb(theta_true, r_true, ecfg.sensing, ecfg.array)
    errors = np.empty(n_trials)
    for i in range(n_trials):
        seq = np.random.SeedSequence(entropy=seed, spawn_key=(i,))
        y_s, x_s = simulate_echoes(theta_true, r_true, ecfg.sensing, ecfg.array, seq)
        errors[i] = mle_estimate(y_s, x_s, ecfg.sensing, ecfg.array) - theta_true
    mse = float(np.mean(errors ** 2))
    ratio = mse / bound
    coverage = float(np.mean(np.abs(errors) <= 3.0 * np.sqrt(bound)))
    ok = 0.5 <= ratio <= 2.0 and coverage >= 0.99
    return ok, (f"estimator check: MSE/bound {ratio:.3f} (want [0.5, 2.0]), "
                f"3-sigma coverage {coverage:.4f} (want >= 0.99), {n_trials} trials")


def check_inequalities(n_instances: int = 1000, seed: int = 5,
                       slack: float = 1e-12) -> tuple[bool, str]:
    """Jensen dominance of the leakage surrogate and the smooth-min sandwich."""
    rng = np.random.Generator(np.random.Philox(seed))
    jensen_viol = 0
    sandwich_viol = 0
    for _ in range(n_instances):
        m, nt = int(rng.integers(1, 8)), 6
        he = (rng.standard_normal((m, nt)) + 1j * rng.standard_normal((m, nt)))
        mu = rng.uniform(0.1, 1.0, m)
        mu /= mu.sum()
        w = np.exp(1j * rng.uniform(0, 2 * np.pi, nt)) / np.sqrt(nt)
        gamma = float(rng.uniform(0.5, 50.0))
        s2 = np.abs(he.conj() @ w) ** 2
        avg_rate = float(mu @ np.log2(1 + gamma * s2))
        sur_rate = float(np.log2(1 + gamma * float(mu @ s2)))
        if sur_rate < avg_rate - slack:
            jensen_viol += 1

        k = int(rng.integers(1, 6))
        c = rng.normal(0.0, 3.0, k)
        for beta in (1.0, 10.0, 100.0):
            sm = softmin(c, beta)
            if not (c.min() - np.log(k) / beta - slack <= sm <= c.min() + slack):
                sandwich_viol += 1
    ok = jensen_viol == 0 and sandwich_viol == 0
    return ok, (f"inequality check: {jensen_viol} Jensen violations, "
                f"{sandwich_viol} sandwich violations over {n_instances} instances")


def run_all(ecfg: ExperimentConfig, mse_trials: int = 1000) -> tuple[bool, list[str]]:
    checks = [
        check_gradients(ecfg),
        check_estimator(ecfg, n_trials=mse_trials),
        check_inequalities(),
    ]
    lines = [("PASS " if ok else "FAIL ") + msg for ok, msg in checks]
    return all(ok for ok, _ in checks), lines
