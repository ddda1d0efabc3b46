"""Monte-Carlo experiment runner.

Generates random scenes, runs the sensing stage once per trial, optimizes
every requested scheme on identical inputs (paired design), evaluates the
achieved secrecy against the true eavesdropper direction, and serializes
plot-ready records.  All randomness derives from the master seed through
named per-trial streams, so a configuration plus seed determines every
output byte; wall-clock timings go to a separate sidecar table for that
reason.
"""
from __future__ import annotations

import io
import json
import time
from dataclasses import dataclass

import numpy as np

from .config import ExperimentConfig, with_value
from .geometry import PolarPosition, RotationState, beam_gain
from .objective import evaluate_true_secrecy
from .optimizer import (BeamformingSolution, ProblemData, ao_solve,
                        default_initial_solution)
from .sensing import (SensingOutcome, as_generator, crb, mle_estimate,
                      point_mass_outcome, simulate_echoes, uncertainty_region)

RECORD_FIELDS = (
    "trial", "scheme", "sweep_param", "sweep_value", "theta_true_deg",
    "theta_hat_deg", "crb_rad2", "secrecy_bps_hz", "surrogate_final",
    "ao_iters", "status",
)

SUMMARY_FIELDS = ("sweep_param", "sweep_value", "scheme", "n_trials",
                  "mean_secrecy", "stderr_secrecy")

_STREAM_SCENE = 0
_STREAM_SENSING = 1
_STREAM_ROTATION_ERROR = 2


@dataclass(frozen=True)
class SceneRealization:
    """User and eavesdropper positions for one Monte-Carlo trial."""

    users: tuple[PolarPosition, ...]
    eav: PolarPosition

    @property
    def user_ranges(self) -> np.ndarray:
        return np.array([u.range_m for u in self.users])

    @property
    def user_azimuths(self) -> np.ndarray:
        return np.array([u.azimuth for u in self.users])


@dataclass
class ResultRecord:
    """One optimized trial: sensing products, achieved secrecy, bookkeeping."""

    trial: int
    scheme: str
    sweep_param: str
    sweep_value: float
    theta_true: float
    theta_hat: float
    crb: float
    secrecy: float
    surrogate_final: float
    ao_iters: int
    wall_ms: float
    status: str = "ok"


@dataclass(frozen=True)
class SchemeBehavior:
    """Which decision blocks a benchmark scheme is allowed to move."""

    update_phi_arr: bool
    update_varphi: bool
    point_estimate: bool = False
    enumerate_phi_arr: bool = False


SCHEME_BEHAVIOR = {
    "FPA-ABF": SchemeBehavior(False, False),
    "GRA-ABF": SchemeBehavior(True, False),
    "ERA-ABF": SchemeBehavior(False, True),
    "TRA-ABF": SchemeBehavior(True, True),
    "TRA-ABF-PE": SchemeBehavior(True, True, point_estimate=True),
    "TRA-ABF-ES": SchemeBehavior(True, True, enumerate_phi_arr=True),
}


def derive_seed(master_seed: int, trial: int, stream: int) -> np.random.SeedSequence:
    """Named per-trial random stream; schemes and sweep values never enter,
    so compared schemes (and sweep points) share scenes and sensing noise."""
    return np.random.SeedSequence(entropy=master_seed, spawn_key=(trial, stream))


def generate_scene(ecfg: ExperimentConfig, trial_seed) -> SceneRealization:
    """Draw user positions uniformly over the configured intervals."""
    rng = as_generator(trial_seed)
    lo_r, hi_r = ecfg.user_range_interval
    lo_a, hi_a = ecfg.user_azimuth_interval
    ranges = rng.uniform(lo_r, hi_r, ecfg.n_users)
    azimuths = rng.uniform(lo_a, hi_a, ecfg.n_users)
    users = tuple(PolarPosition(float(r), float(a)) for r, a in zip(ranges, azimuths))
    return SceneRealization(users, ecfg.eav_position)


def run_sensing(ecfg: ExperimentConfig, trial: int) -> tuple[float, float]:
    """One beam sweep against the true eavesdropper: estimate and its variance bound."""
    seed = derive_seed(ecfg.master_seed, trial, _STREAM_SENSING)
    y_s, x_s = simulate_echoes(ecfg.eav_position.azimuth, ecfg.eav_position.range_m,
                               ecfg.sensing, ecfg.array, seed)
    theta_hat = mle_estimate(y_s, x_s, ecfg.sensing, ecfg.array)
    crb_value = crb(theta_hat, ecfg.eav_position.range_m, ecfg.sensing, ecfg.array)
    return theta_hat, crb_value


def sensing_outcome_for_scheme(ecfg: ExperimentConfig, scheme: str,
                               theta_hat: float, crb_value: float) -> SensingOutcome:
    behavior = _behavior(scheme)
    if behavior.point_estimate or ecfg.n_samples == 1:
        return point_mass_outcome(theta_hat, crb_value)
    return uncertainty_region(theta_hat, crb_value, ecfg.n_samples)


def _behavior(scheme: str) -> SchemeBehavior:
    try:
        return SCHEME_BEHAVIOR[scheme]
    except KeyError:
        raise ValueError(f"unknown scheme tag {scheme!r}") from None


def _es_grid(ecfg: ExperimentConfig) -> np.ndarray:
    lim = ecfg.array.phi_arr_max
    n = int(round(2.0 * lim / ecfg.es_grid_step)) + 1
    return np.linspace(-lim, lim, max(n, 2))


def solve_scheme(ecfg: ExperimentConfig, scheme: str, scene: SceneRealization,
                 sensing: SensingOutcome):
    """Run the alternating optimizer under the scheme's frozen-variable mask."""
    behavior = _behavior(scheme)
    prob = ProblemData(ecfg.array, ecfg.link, scene.user_ranges,
                       scene.user_azimuths, ecfg.eav_position.range_m,
                       sensing.sampled_angles, sensing.weights)
    grid = _es_grid(ecfg) if behavior.enumerate_phi_arr else None
    return ao_solve(prob, ecfg.solver,
                    init=default_initial_solution(prob),
                    update_phi_arr=behavior.update_phi_arr,
                    update_varphi=behavior.update_varphi,
                    phi_arr_grid=grid)


def _true_secrecy(ecfg: ExperimentConfig, scene: SceneRealization,
                  sol: BeamformingSolution) -> float:
    return evaluate_true_secrecy(ecfg.array, sol.rotation(), sol.w,
                                 scene.user_ranges, scene.user_azimuths,
                                 scene.eav, ecfg.link)


def _run_with_inputs(ecfg: ExperimentConfig, scheme: str, trial: int,
                     scene: SceneRealization, theta_hat: float,
                     crb_value: float) -> tuple[ResultRecord, BeamformingSolution]:
    sweep_param = ecfg.sweep_parameter
    sweep_value = float("nan")
    record = ResultRecord(trial, scheme, sweep_param, sweep_value,
                          scene.eav.azimuth, theta_hat, crb_value,
                          float("nan"), float("nan"), 0, 0.0)
    outcome = sensing_outcome_for_scheme(ecfg, scheme, theta_hat, crb_value)
    start = time.perf_counter()
    try:
        sol, trace = solve_scheme(ecfg, scheme, scene, outcome)
    except Exception as exc:       # solver failure: keep the trial, flag it
        record.wall_ms = (time.perf_counter() - start) * 1e3
        record.secrecy = 0.0
        record.surrogate_final = 0.0
        record.status = f"solver-error: {exc}"
        return record, default_initial_solution(
            ProblemData(ecfg.array, ecfg.link, scene.user_ranges,
                        scene.user_azimuths, ecfg.eav_position.range_m,
                        outcome.sampled_angles, outcome.weights))
    record.wall_ms = (time.perf_counter() - start) * 1e3
    record.secrecy = _true_secrecy(ecfg, scene, sol)
    record.surrogate_final = trace[-1].obj_after_varphi if trace else float("nan")
    record.ao_iters = len(trace)
    return record, sol


def run_trial(ecfg: ExperimentConfig, scheme: str, trial: int) -> ResultRecord:
    """Full pipeline for one trial of one scheme: scene, sensing, design, score."""
    _behavior(scheme)
    scene = generate_scene(ecfg, derive_seed(ecfg.master_seed, trial, _STREAM_SCENE))
    theta_hat, crb_value = run_sensing(ecfg, trial)
    record, _ = _run_with_inputs(ecfg, scheme, trial, scene, theta_hat, crb_value)
    return record


def run_experiment(ecfg: ExperimentConfig,
                   progress=None) -> list[ResultRecord]:
    """All trials of all configured schemes on shared per-trial inputs."""
    records: list[ResultRecord] = []
    for trial in range(ecfg.n_trials):
        scene = generate_scene(ecfg, derive_seed(ecfg.master_seed, trial, _STREAM_SCENE))
        theta_hat, crb_value = run_sensing(ecfg, trial)
        for scheme in ecfg.schemes:
            record, _ = _run_with_inputs(ecfg, scheme, trial, scene,
                                         theta_hat, crb_value)
            records.append(record)
        if progress is not None:
            progress(trial + 1, ecfg.n_trials)
    return records


def run_sweep(ecfg: ExperimentConfig, progress=None) -> list[ResultRecord]:
    """Cross product sweep values x schemes x trials with paired inputs.

    The swept key is applied on top of the resolved configuration for each
    value; trial streams do not depend on the value, so every sweep point
    reuses the same scenes and sensing noise (common random numbers).
    """
    if not ecfg.sweep_parameter:
        raise ValueError("no sweep parameter configured")
    records: list[ResultRecord] = []
    for value in ecfg.sweep_values:
        cell_cfg = with_value(ecfg, ecfg.sweep_parameter, value)
        for trial in range(cell_cfg.n_trials):
            scene = generate_scene(cell_cfg,
                                   derive_seed(cell_cfg.master_seed, trial, _STREAM_SCENE))
            theta_hat, crb_value = run_sensing(cell_cfg, trial)
            for scheme in cell_cfg.schemes:
                record, _ = _run_with_inputs(cell_cfg, scheme, trial, scene,
                                             theta_hat, crb_value)
                record.sweep_param = ecfg.sweep_parameter
                record.sweep_value = float(value)
                records.append(record)
            if progress is not None:
                progress(value, trial + 1, cell_cfg.n_trials)
    return records


def _perturbed_solution(ecfg: ExperimentConfig, scheme: str,
                        sol: BeamformingSolution, bound: float,
                        unit_arr: float, unit_elem: np.ndarray) -> BeamformingSolution:
    """Apply bounded execution errors to the rotations a scheme actually moves."""
    behavior = _behavior(scheme)
    phi = sol.phi_arr
    varphi = sol.varphi
    if behavior.update_phi_arr:
        lim = ecfg.array.phi_arr_max
        phi = float(np.clip(phi + bound * unit_arr, -lim, lim))
    if behavior.update_varphi:
        lim = ecfg.array.varphi_max
        varphi = np.clip(varphi + bound * unit_elem, -lim, lim)
    return BeamformingSolution(sol.w, phi, varphi)


def rotation_error_study(ecfg: ExperimentConfig,
                         bounds: tuple[float, ...] | None = None,
                         progress=None) -> list[ResultRecord]:
    """Re-evaluate optimized designs under bounded rotation execution errors.

    Each trial optimizes every scheme once, then re-scores the same design at
    every error bound; the per-trial error directions are drawn once and
    scaled by the bound, so bounds are directly comparable.  Schemes that
    never rotate are exempt by construction.
    """
    if bounds is None:
        bounds = ecfg.rotation_error_bounds
    if not bounds:
        raise ValueError("no rotation error bounds configured")
    records: list[ResultRecord] = []
    for trial in range(ecfg.n_trials):
        scene = generate_scene(ecfg, derive_seed(ecfg.master_seed, trial, _STREAM_SCENE))
        theta_hat, crb_value = run_sensing(ecfg, trial)
        err_rng = as_generator(derive_seed(ecfg.master_seed, trial,
                                           _STREAM_ROTATION_ERROR))
        unit_arr = float(err_rng.uniform(-1.0, 1.0))
        unit_elem = err_rng.uniform(-1.0, 1.0, ecfg.array.n_tx)
        for scheme in ecfg.schemes:
            base, sol = _run_with_inputs(ecfg, scheme, trial, scene,
                                         theta_hat, crb_value)
            for bound in bounds:
                rec = ResultRecord(trial, scheme, "rotation_error_bound_deg",
                                   float(np.rad2deg(bound)), base.theta_true,
                                   base.theta_hat, base.crb, base.secrecy,
                                   base.surrogate_final, base.ao_iters,
                                   base.wall_ms, base.status)
                if base.status == "ok" and bound > 0.0:
                    perturbed = _perturbed_solution(ecfg, scheme, sol, bound,
                                                    unit_arr, unit_elem)
                    rec.secrecy = _true_secrecy(ecfg, scene, perturbed)
                records.append(rec)
        if progress is not None:
            progress(trial + 1, ecfg.n_trials)
    return records


def export_beam_pattern(ecfg: ExperimentConfig, sol: BeamformingSolution,
                        scene: SceneRealization, sensing: SensingOutcome,
                        resolution: float | None = None) -> list[dict]:
    """Transmit gain pattern over the sector, probed at the eavesdropper range.

    Rows carry the angle (degrees), the gain (dB, floored), and marker flags
    for user directions, the direction estimate and the uncertainty interval.
    """
    if resolution is None:
        resolution = ecfg.beam_pattern_resolution
    n = int(round(np.pi / resolution)) + 1
    angles = np.linspace(-np.pi / 2, np.pi / 2, n)
    rot = sol.rotation()
    half = resolution / 2.0
    rows = []
    for ang in angles:
        gain = beam_gain(ecfg.array, rot, sol.w, float(ang),
                         ecfg.eav_position.range_m)
        rows.append({
            "angle_deg": float(np.rad2deg(ang)),
            "gain_db": float(gain),
            "user_marker": int(any(abs(ang - u.azimuth) <= half for u in scene.users)),
            "theta_hat_marker": int(abs(ang - sensing.theta_hat) <= half),
            "region_marker": int(sensing.xi_lo <= ang <= sensing.xi_hi),
        })
    return rows


def region_peak_gain(ecfg: ExperimentConfig, sol: BeamformingSolution,
                     sensing: SensingOutcome, n_probe: int = 256) -> float:
    """Largest beam gain over the angular uncertainty interval (dense probe)."""
    angles = np.linspace(sensing.xi_lo, sensing.xi_hi, n_probe)
    rot = sol.rotation()
    return max(beam_gain(ecfg.array, rot, sol.w, float(a),
                         ecfg.eav_position.range_m) for a in angles)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def _fmt(value) -> str:
    if isinstance(value, float):
        return format(value, ".12g")
    return str(value)


def _record_row(rec: ResultRecord) -> dict:
    return {
        "trial": rec.trial,
        "scheme": rec.scheme,
        "sweep_param": rec.sweep_param,
        "sweep_value": rec.sweep_value,
        "theta_true_deg": float(np.rad2deg(rec.theta_true)),
        "theta_hat_deg": float(np.rad2deg(rec.theta_hat)),
        "crb_rad2": rec.crb,
        "secrecy_bps_hz": rec.secrecy,
        "surrogate_final": rec.surrogate_final,
        "ao_iters": rec.ao_iters,
        "status": rec.status,
    }


def records_to_csv(records: list[ResultRecord]) -> str:
    """Deterministic CSV with the documented fixed header (no timings)."""
    buf = io.StringIO()
    buf.write(",".join(RECORD_FIELDS) + "\n")
    for rec in records:
        row = _record_row(rec)
        buf.write(",".join(_fmt(row[f]) for f in RECORD_FIELDS) + "\n")
    return buf.getvalue()


def records_to_jsonl(records: list[ResultRecord]) -> str:
    lines = []
    for rec in records:
        row = _record_row(rec)
        row = {k: (float(_fmt(v)) if isinstance(v, float) else v)
               for k, v in row.items()}
        lines.append(json.dumps(row))
    return "\n".join(lines) + "\n"


def timings_to_csv(records: list[ResultRecord]) -> str:
    """Wall-clock sidecar; kept out of the main table so outputs stay
    byte-reproducible."""
    buf = io.StringIO()
    buf.write("trial,scheme,sweep_param,sweep_value,wall_ms\n")
    for rec in records:
        buf.write(f"{rec.trial},{rec.scheme},{rec.sweep_param},"
                  f"{_fmt(rec.sweep_value)},{_fmt(rec.wall_ms)}\n")
    return buf.getvalue()


def summarize(records: list[ResultRecord]) -> list[dict]:
    """Per (sweep value, scheme) mean secrecy with its standard error."""
    groups: dict[tuple, list[float]] = {}
    order: list[tuple] = []
    for rec in records:
        key = (rec.sweep_param, rec.sweep_value, rec.scheme)
        if key not in groups:
            groups[key] = []
            order.append(key)
        groups[key].append(rec.secrecy)
    rows = []
    for key in order:
        vals = np.array(groups[key])
        n = vals.size
        stderr = float(vals.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
        rows.append({
            "sweep_param": key[0], "sweep_value": key[1], "scheme": key[2],
            "n_trials": n, "mean_secrecy": float(vals.mean()),
            "stderr_secrecy": stderr,
        })
    return rows


def summary_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    buf.write(",".join(SUMMARY_FIELDS) + "\n")
    for row in rows:
        buf.write(",".join(_fmt(row[f]) for f in SUMMARY_FIELDS) + "\n")
    return buf.getvalue()


def beam_pattern_to_csv(rows_by_scheme: dict[str, list[dict]]) -> str:
    buf = io.StringIO()
    buf.write("scheme,angle_deg,gain_db,user_marker,theta_hat_marker,region_marker\n")
    for scheme, rows in rows_by_scheme.items():
        for row in rows:
            buf.write(f"{scheme},{_fmt(row['angle_deg'])},{_fmt(row['gain_db'])},"
                      f"{row['user_marker']},{row['theta_hat_marker']},"
                      f"{row['region_marker']}\n")
    return buf.getvalue()
