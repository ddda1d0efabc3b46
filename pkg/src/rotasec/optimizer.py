"""Three-block alternating maximization of the smoothed worst-user secrecy rate.

Block 1 updates the constant-modulus beamformer by Riemannian conjugate
gradient on the per-element unit-circle manifold, block 2 updates the array
rotation angle by projected gradient ascent on its interval, and block 3
updates the element orientations by a greedy grid pass followed by
box-projected gradient ascent.  The outer driver alternates the blocks while
geometrically tightening the softmin smoothing factor.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import (ArrayConfig, RotationState, _gain_amplitude,
                       _geometry_parts, channel_and_rotation_grads,
                       channel_matrix)
from .objective import (LOG2, LinkBudget, ObjectiveContext, leakage_covariance,
                        softmin, softmin_weights, surrogate_secrecy_values)


@dataclass(frozen=True)
class BeamformingSolution:
    """Decision variables: analog beamformer, array rotation, element orientations."""

    w: np.ndarray
    phi_arr: float
    varphi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "w", np.asarray(self.w, dtype=complex))
        object.__setattr__(self, "varphi", np.asarray(self.varphi, dtype=float))

    def rotation(self) -> RotationState:
        return RotationState(self.phi_arr, self.varphi)

    def check_feasible(self, cfg: ArrayConfig, atol: float = 1e-9) -> None:
        mod = np.abs(self.w) * np.sqrt(cfg.n_tx)
        if np.any(np.abs(mod - 1.0) > atol):
            raise ValueError("beamformer violates the constant-modulus constraint "
                             f"|w_n| = 1/sqrt({cfg.n_tx})")
        if abs(self.phi_arr) > cfg.phi_arr_max + atol:
            raise ValueError("array rotation angle outside its allowed interval")
        if self.varphi.shape != (cfg.n_tx,):
            raise ValueError("element orientation vector has wrong length")
        if np.any(np.abs(self.varphi) > cfg.varphi_max + atol):
            raise ValueError("element orientation outside its allowed interval")


@dataclass(frozen=True)
class SolverSettings:
    """Tolerances, iteration caps and schedule constants for all three blocks."""

    tol: float = 1e-6
    max_iter_inner: int = 200
    max_iter_ao: int = 30
    armijo_c: float = 1e-4
    armijo_shrink: float = 0.5
    armijo_max_backtracks: int = 30
    beta_sm_init: float = 5.0
    beta_sm_growth: float = 1.5
    beta_sm_cap: float = 1e4
    grid_points_init: int = 15
    step_init: float = 1.0

    def __post_init__(self):
        if min(self.tol, self.armijo_c, self.beta_sm_init, self.step_init) <= 0:
            raise ValueError("tolerances, Armijo constant, smoothing init and "
                             "step must be positive")
        if not (0.0 < self.armijo_shrink < 1.0):
            raise ValueError("Armijo shrink factor must lie in (0, 1)")
        if self.beta_sm_growth <= 1.0:
            raise ValueError("smoothing growth factor must exceed 1")
        if min(self.max_iter_inner, self.max_iter_ao,
               self.armijo_max_backtracks, self.grid_points_init) < 1:
            raise ValueError("iteration counts must be positive")


@dataclass(frozen=True)
class ProblemData:
    """One robust-design instance: geometry, scene targets and link budget."""

    cfg: ArrayConfig
    lb: LinkBudget
    user_ranges: np.ndarray
    user_azimuths: np.ndarray
    eav_range: float
    sample_angles: np.ndarray
    sample_weights: np.ndarray

    def __post_init__(self):
        for name in ("user_ranges", "user_azimuths", "sample_angles", "sample_weights"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        all_r = np.concatenate([self.user_ranges,
                                np.full(self.sample_angles.shape, self.eav_range)])
        all_az = np.concatenate([self.user_azimuths, self.sample_angles])
        object.__setattr__(self, "_all_ranges", all_r)
        object.__setattr__(self, "_all_azimuths", all_az)

    @property
    def n_users(self) -> int:
        return self.user_ranges.size


def context_for(prob: ProblemData, rot: RotationState, beta_sm: float) -> ObjectiveContext:
    """Channels and leakage covariance for one rotation state."""
    h = channel_matrix(prob.cfg, rot, prob._all_ranges, prob._all_azimuths)
    k = prob.n_users
    he = h[k:]
    return ObjectiveContext(h[:k], he, prob.sample_weights,
                            leakage_covariance(he, prob.sample_weights), beta_sm)


def surrogate_objective(prob: ProblemData, sol: BeamformingSolution,
                        beta_sm: float) -> float:
    """Smoothed worst-user surrogate secrecy rate at a full solution point."""
    ctx = context_for(prob, sol.rotation(), beta_sm)
    return softmin(surrogate_secrecy_values(sol.w, ctx, prob.lb), beta_sm)


# ---------------------------------------------------------------------------
# beamformer block: Riemannian conjugate gradient on the unit-modulus circle
# ---------------------------------------------------------------------------

def euclidean_grad_w(v: np.ndarray, ctx: ObjectiveContext, lb: LinkBudget) -> np.ndarray:
    """Euclidean (Wirtinger) gradient of the smoothed objective in v-space.

    ``v`` is the unit-modulus manifold variable, w = v / sqrt(n_tx).  The
    softmin weights are refreshed from the current surrogate secrecy values on
    every call.  The returned vector g satisfies dG = 2 Re{g^H dv}.
    """
    nt = ctx.n_tx
    geff = lb.gamma / nt
    su = ctx.user_channels.conj() @ v
    su2 = np.abs(su) ** 2
    sv = ctx.leakage_covariance @ v
    quad = float(np.vdot(v, sv).real)
    cvals = np.log2(1.0 + geff * su2) - np.log2(1.0 + geff * quad)
    omega = softmin_weights(cvals, ctx.beta_sm)
    coef_u = omega * (geff / LOG2) / (1.0 + geff * su2)
    coef_e = (geff / LOG2) / (1.0 + geff * quad)
    return (coef_u * su) @ ctx.user_channels - coef_e * sv


def riemannian_grad(v: np.ndarray, egrad: np.ndarray) -> np.ndarray:
    """Project a Euclidean gradient onto the tangent space at v."""
    return egrad - (egrad * v.conj()).real * v


def retract(v: np.ndarray, tangent_step: np.ndarray) -> np.ndarray:
    """Entrywise renormalization of v + step back to unit modulus.

    An entry that lands exactly on zero keeps its previous value (measure-zero
    event; preserves feasibility).
    """
    z = v + tangent_step
    az = np.abs(z)
    safe = np.where(az == 0.0, 1.0, az)
    return np.where(az == 0.0, v, z / safe)


def transport(v_new: np.ndarray, d_old: np.ndarray) -> np.ndarray:
    """Carry a direction into the tangent space at the new point."""
    return d_old - (d_old * v_new.conj()).real * v_new


def _inner(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.vdot(a, b).real)


def solve_w(ctx: ObjectiveContext, lb: LinkBudget, w_start: np.ndarray,
            settings: SolverSettings) -> np.ndarray:
    """Conjugate-gradient ascent of the beamformer on the frozen context.

    Polak-Ribiere with nonnegativity clipping; a failed line search falls back
    to steepest ascent once, then terminates on the best iterate.  Accepted
    steps never decrease the objective.
    """
    nt = ctx.n_tx
    geff = lb.gamma / nt
    huc = ctx.user_channels.conj()
    hec = ctx.eav_channels.conj()
    mu = ctx.weights
    beta = ctx.beta_sm

    def fval(v):
        su2 = np.abs(huc @ v) ** 2
        se2 = np.abs(hec @ v) ** 2
        leak = np.log2(1.0 + geff * float(mu @ se2))
        return softmin(np.log2(1.0 + geff * su2) - leak, beta)

    v = w_start * np.sqrt(nt)
    v = retract(v, np.zeros_like(v))      # guard against modulus drift
    f0 = fval(v)
    g = riemannian_grad(v, euclidean_grad_w(v, ctx, lb))
    d = g
    disp = settings.step_init             # accepted displacement, remembered
    stalls = 0
    for _ in range(settings.max_iter_inner):
        gn2 = _inner(g, g)
        if gn2 <= 1e-20:
            break
        s0 = _inner(g, d)
        if s0 <= 0.0:                     # conjugate direction lost ascent
            d, s0 = g, gn2
        accepted = False
        tried_steepest = d is g
        while True:
            dnorm = np.sqrt(_inner(d, d))
            trial = min(disp / settings.armijo_shrink, 16.0 * settings.step_init)
            delta = trial / dnorm
            for _ in range(settings.armijo_max_backtracks):
                v_new = retract(v, delta * d)
                f_new = fval(v_new)
                if f_new >= f0 + settings.armijo_c * delta * s0:
                    accepted = True
                    disp = delta * dnorm
                    break
                delta *= settings.armijo_shrink
            if accepted or tried_steepest:
                break
            d, s0, tried_steepest = g, gn2, True
        if not accepted:
            break
        g_new = riemannian_grad(v_new, euclidean_grad_w(v_new, ctx, lb))
        kappa = max(0.0, _inner(g_new, g_new - transport(v_new, g)) / gn2)
        d = g_new + kappa * transport(v_new, d)
        moved = float(np.linalg.norm(v_new - v))
        stalls = stalls + 1 if f_new - f0 <= 1e-12 * max(1.0, abs(f0)) else 0
        v, g, f0 = v_new, g_new, f_new
        if moved <= settings.tol or stalls >= 2:
            break
    return v / np.sqrt(nt)


# ---------------------------------------------------------------------------
# rotation blocks: projected gradient ascent with Armijo backtracking
# ---------------------------------------------------------------------------

def _link_stats(prob: ProblemData, h: np.ndarray, w: np.ndarray, beta_sm: float):
    """Inner products, surrogate values and softmin weights shared by both
    rotation gradients."""
    k = prob.n_users
    s = h.conj() @ w
    su, se = s[:k], s[k:]
    gamma = prob.lb.gamma
    su2 = np.abs(su) ** 2
    quad = float(prob.sample_weights @ (np.abs(se) ** 2))
    cvals = np.log2(1.0 + gamma * su2) - np.log2(1.0 + gamma * quad)
    omega = softmin_weights(cvals, beta_sm)
    coef_u = omega * (2.0 * gamma / LOG2) / (1.0 + gamma * su2)
    coef_e = (2.0 * gamma / LOG2) / (1.0 + gamma * quad)
    return su, se, coef_u, coef_e


def grad_phi_arr(prob: ProblemData, sol: BeamformingSolution, beta_sm: float) -> float:
    """Analytic derivative of the smoothed objective in the array rotation."""
    h, dh, _ = channel_and_rotation_grads(
        prob.cfg, sol.rotation(), prob._all_ranges, prob._all_azimuths)
    k = prob.n_users
    su, se, coef_u, coef_e = _link_stats(prob, h, sol.w, beta_sm)
    ds = dh.conj() @ sol.w
    term_u = float(coef_u @ (su.conj() * ds[:k]).real)
    term_e = float(prob.sample_weights @ (se.conj() * ds[k:]).real)
    return term_u - coef_e * term_e


def grad_varphi(prob: ProblemData, sol: BeamformingSolution, beta_sm: float) -> np.ndarray:
    """Analytic gradient of the smoothed objective in the element orientations."""
    h, _, dh = channel_and_rotation_grads(
        prob.cfg, sol.rotation(), prob._all_ranges, prob._all_azimuths)
    k = prob.n_users
    su, se, coef_u, coef_e = _link_stats(prob, h, sol.w, beta_sm)
    ds = dh.conj() * sol.w[None, :]           # (Q, n_tx): ds_q / dvarphi_n
    ru = (su.conj()[:, None] * ds[:k]).real
    re = (se.conj()[:, None] * ds[k:]).real
    return coef_u @ ru - coef_e * (prob.sample_weights @ re)


def solve_phi_arr(prob: ProblemData, sol: BeamformingSolution, beta_sm: float,
                  settings: SolverSettings) -> float:
    """Projected gradient ascent of the array rotation on its interval."""
    lim = prob.cfg.phi_arr_max
    w, varphi = sol.w, sol.varphi

    def obj(phi):
        ctx = context_for(prob, RotationState(phi, varphi), beta_sm)
        return softmin(surrogate_secrecy_values(w, ctx, prob.lb), beta_sm)

    x = float(np.clip(sol.phi_arr, -lim, lim))
    fx = obj(x)
    disp = settings.step_init
    for _ in range(settings.max_iter_inner):
        g = grad_phi_arr(prob, BeamformingSolution(w, x, varphi), beta_sm)
        if abs(g) < settings.tol:
            break
        delta = min(disp / settings.armijo_shrink, settings.step_init) / abs(g)
        accepted = False
        f_new = fx
        for _ in range(settings.armijo_max_backtracks):
            x_new = float(np.clip(x + delta * g, -lim, lim))
            move = x_new - x
            if move == 0.0:               # gradient points out of the box
                break
            f_new = obj(x_new)
            if f_new >= fx + settings.armijo_c * g * move:
                accepted = True
                disp = abs(move)
                break
            delta *= settings.armijo_shrink
        if not accepted:
            break
        gain = f_new - fx
        x, fx = x_new, f_new
        assert abs(x) <= lim + 1e-15
        if gain <= settings.tol:
            break
    return x


def _greedy_orientation_sweep(prob: ProblemData, w: np.ndarray, phi_arr: float,
                              x: np.ndarray, grid: np.ndarray,
                              beta_sm: float) -> tuple[np.ndarray, float]:
    """One greedy pass over the elements, each set to its best grid candidate.

    Only the swept element's channel column changes between candidates, so all
    candidates of one element are scored in a single vectorized pass against
    cached inner products.  The incumbent value always competes; ties break
    toward the smallest actuation.  Returns the updated vector and objective.
    """
    cfg = prob.cfg
    p = cfg.directivity_p
    k = prob.n_users
    mu = prob.sample_weights
    gamma = prob.lb.gamma
    x = x.copy()
    parts = _geometry_parts(cfg, RotationState(phi_arr, x),
                            prob._all_ranges, prob._all_azimuths)
    h = parts.beta[:, None] * _gain_amplitude(parts.proj, p) * parts.a
    s = h.conj() @ w

    def scores(s_mat):
        su2 = np.abs(s_mat[:k]) ** 2
        se2 = np.abs(s_mat[k:]) ** 2
        leak = np.log2(1.0 + gamma * (mu @ se2))
        c = np.log2(1.0 + gamma * su2) - leak[None, :]
        lo = c.min(axis=0)
        return lo - np.log(np.exp(-beta_sm * (c - lo[None, :])).sum(axis=0)) / beta_sm

    cphi, sphi = np.cos(phi_arr), np.sin(phi_arr)
    fx = float(scores(s[:, None])[0])
    for n in range(cfg.n_tx):
        cand = np.concatenate([[x[n]], grid])
        sv, cv = np.sin(cand), np.cos(cand)
        bx = cphi * sv + sphi * cv
        by = -sphi * sv + cphi * cv
        proj = parts.ux[:, n, None] * bx[None, :] + parts.uy[:, n, None] * by[None, :]
        col = parts.beta[:, None] * _gain_amplitude(proj, p) * parts.a[:, n, None]
        s_cand = (s - h[:, n].conj() * w[n])[:, None] + col.conj() * w[n]
        vals = scores(s_cand)
        best = vals.max()
        near = np.flatnonzero(vals >= best - 1e-12)
        pick = near[np.argmin(np.abs(cand[near]))]
        if cand[pick] != x[n]:
            x[n] = cand[pick]
            h[:, n] = col[:, pick]
            s = s_cand[:, pick]
        fx = float(vals[pick])
    return x, fx


def solve_varphi(prob: ProblemData, sol: BeamformingSolution, beta_sm: float,
                 settings: SolverSettings) -> np.ndarray:
    """Greedy per-element grid pass, then box-projected gradient refinement.

    Stage 1 sweeps the elements once, setting each orientation to the best of
    the grid candidates (keeping the incumbent when it already wins; ties
    break toward the smallest actuation).  Stage 2 polishes all orientations
    jointly.  The objective never decreases across either stage.
    """
    lim = prob.cfg.varphi_max
    w, phi_arr = sol.w, sol.phi_arr

    def obj(varphi):
        ctx = context_for(prob, RotationState(phi_arr, varphi), beta_sm)
        return softmin(surrogate_secrecy_values(w, ctx, prob.lb), beta_sm)

    if settings.grid_points_init == 1:
        grid = np.array([0.0])
    else:
        grid = np.linspace(-lim, lim, settings.grid_points_init)

    x, fx = _greedy_orientation_sweep(prob, w, phi_arr,
                                      sol.varphi.astype(float), grid, beta_sm)

    disp = settings.step_init
    for _ in range(settings.max_iter_inner):
        g = grad_varphi(prob, BeamformingSolution(w, phi_arr, x), beta_sm)
        gnorm = float(np.linalg.norm(g))
        if gnorm < settings.tol:
            break
        delta = min(disp / settings.armijo_shrink, settings.step_init) / gnorm
        accepted = False
        f_new = fx
        for _ in range(settings.armijo_max_backtracks):
            x_new = np.clip(x + delta * g, -lim, lim)
            move = x_new - x
            if not np.any(move):
                break
            f_new = obj(x_new)
            if f_new >= fx + settings.armijo_c * float(g @ move):
                accepted = True
                disp = float(np.linalg.norm(move))
                break
            delta *= settings.armijo_shrink
        if not accepted:
            break
        gain = f_new - fx
        x, fx = x_new, f_new
        assert np.all(np.abs(x) <= lim + 1e-15)
        if gain <= settings.tol:
            break
    return x


# ---------------------------------------------------------------------------
# outer driver
# ---------------------------------------------------------------------------

@dataclass
class TraceRow:
    """Objective bookkeeping for one outer iteration (fixed smoothing factor)."""

    iteration: int
    beta_sm: float
    obj_start: float
    obj_after_w: float
    obj_after_phi_arr: float
    obj_after_varphi: float
    surrogate_min: float            # unsmoothed min_k surrogate secrecy
    true_secrecy: float = float("nan")


def default_initial_solution(prob: ProblemData) -> BeamformingSolution:
    """Phase-match the mean user channel at zero rotation; rotations start at 0."""
    nt = prob.cfg.n_tx
    rot0 = RotationState.zeros(nt)
    hu = channel_matrix(prob.cfg, rot0, prob.user_ranges, prob.user_azimuths)
    hbar = hu.mean(axis=0)
    w0 = np.exp(1j * np.angle(hbar)) / np.sqrt(nt)
    return BeamformingSolution(w0, 0.0, np.zeros(nt))


def _best_grid_phi(prob: ProblemData, sol: BeamformingSolution, beta_sm: float,
                   grid: np.ndarray) -> float:
    """Exhaustive array-rotation search used by the enumeration benchmark.

    The incumbent angle competes against the grid so the update can never
    lose objective to a coarse grid; ties break toward the smaller rotation.
    """
    cand = np.append(np.asarray(grid, dtype=float), sol.phi_arr)
    vals = np.array([surrogate_objective(
        prob, BeamformingSolution(sol.w, float(p), sol.varphi), beta_sm)
        for p in cand])
    best = vals.max()
    near = cand[vals >= best - 1e-12]
    return float(near[np.argmin(np.abs(near))])


def ao_solve(prob: ProblemData, settings: SolverSettings,
             init: BeamformingSolution | None = None,
             update_phi_arr: bool = True, update_varphi: bool = True,
             phi_arr_grid: np.ndarray | None = None,
             true_secrecy_fn=None) -> tuple[BeamformingSolution, list[TraceRow]]:
    """Alternating optimization of (w, phi_arr, varphi) with smoothing schedule.

    Parameters
    ----------
    init : optional feasible starting point; defaults to the phase-matched
        beamformer at zero rotation.
    update_phi_arr, update_varphi : freeze masks for the benchmark schemes
        (a frozen block keeps its initial value).
    phi_arr_grid : when given, the array rotation is updated by enumeration
        over this grid instead of projected gradient ascent.
    true_secrecy_fn : optional callback sol -> float recorded per iteration.

    Returns the final solution and the per-iteration trace.  Within one
    iteration (fixed smoothing factor) each block update never decreases the
    surrogate objective; the loop stops once the end-of-iteration objective
    changes by at most ``settings.tol`` or ``max_iter_ao`` is reached.
    """
    sol = init if init is not None else default_initial_solution(prob)
    sol.check_feasible(prob.cfg)
    beta = settings.beta_sm_init
    trace: list[TraceRow] = []
    prev_obj = None
    for it in range(settings.max_iter_ao):
        ctx = context_for(prob, sol.rotation(), beta)
        g0 = softmin(surrogate_secrecy_values(sol.w, ctx, prob.lb), beta)
        w = solve_w(ctx, prob.lb, sol.w, settings)
        g1 = softmin(surrogate_secrecy_values(w, ctx, prob.lb), beta)
        sol = BeamformingSolution(w, sol.phi_arr, sol.varphi)
        if update_phi_arr:
            if phi_arr_grid is not None:
                phi = _best_grid_phi(prob, sol, beta, phi_arr_grid)
            else:
                phi = solve_phi_arr(prob, sol, beta, settings)
            sol = BeamformingSolution(w, phi, sol.varphi)
            g2 = surrogate_objective(prob, sol, beta)
        else:
            g2 = g1
        if update_varphi:
            varphi = solve_varphi(prob, sol, beta, settings)
            sol = BeamformingSolution(w, sol.phi_arr, varphi)
            g3 = surrogate_objective(prob, sol, beta)
        else:
            g3 = g2
        ctx_end = context_for(prob, sol.rotation(), beta)
        smin = float(surrogate_secrecy_values(sol.w, ctx_end, prob.lb).min())
        row = TraceRow(it, beta, g0, g1, g2, g3, smin)
        if true_secrecy_fn is not None:
            row.true_secrecy = float(true_secrecy_fn(sol))
        trace.append(row)
        if prev_obj is not None and abs(g3 - prev_obj) <= settings.tol:
            break
        prev_obj = g3
        beta = min(beta * settings.beta_sm_growth, settings.beta_sm_cap)
    return sol, trace
