//! Deterministic calibration of the wake-oscillator constants against the
//! rig's measured observables.
//!
//! Two coupled properties are fitted: the unforced lock-in curve (peak
//! amplitude and high-amplitude band) constrains (vdp_epsilon, coupling_a),
//! and the forced lock-on response under the PID speed loop constrains
//! rotation_coupling. Because the stage-one optimum is not always reachable
//! by the forced stage, the search keeps the best few stage-one candidates
//! and picks the pair that satisfies every target.

use std::fmt::Write as _;

use crate::actuator::MotorParams;
use crate::error::{Result, VivError};
use crate::lockon::{self, SpeedPidGains, SweepPoint};
use crate::plant::{
    amplitude_sweep, flow_for_reduced_velocity, CylinderProperties, Plant, WakeModelParams,
};

/// Observables the calibration drives toward.
#[derive(Debug, Clone, Copy)]
pub struct CalibrationTargets {
    /// Peak steady A/D of the unforced lock-in curve.
    pub peak_a_over_d: f64,
    /// Acceptable |peak - target|.
    pub peak_tolerance: f64,
    /// Reduced-velocity interval that must stay above `band_min_a_over_d`.
    pub band_u: (f64, f64),
    pub band_min_a_over_d: f64,
    /// A/D ceiling far below lock-in (checked at U = 2).
    pub low_u_max_a_over_d: f64,
    /// Forced response at ratio 1.0.
    pub lockon_peak_a_over_d: f64,
    pub lockon_peak_tolerance: f64,
    /// Forced response ceiling at ratio 1.6.
    pub lockon_high_max: f64,
}

impl Default for CalibrationTargets {
    fn default() -> Self {
        Self {
            peak_a_over_d: 0.6,
            peak_tolerance: 0.05,
            band_u: (5.0, 8.0),
            band_min_a_over_d: 0.1,
            low_u_max_a_over_d: 0.05,
            lockon_peak_a_over_d: 0.65,
            lockon_peak_tolerance: 0.1,
            lockon_high_max: 0.1,
        }
    }
}

/// Calibration outcome: chosen parameters plus the curves that justified them.
#[derive(Debug, Clone)]
pub struct CalibrationReport {
    pub params: WakeModelParams,
    pub cost: f64,
    pub sweep: Vec<(f64, f64)>,
    pub lockon: Vec<SweepPoint>,
    pub log: String,
}

const SWEEP_U: [f64; 13] = [
    2.0, 3.0, 4.0, 4.5, 5.0, 5.5, 6.0, 6.5, 7.0, 7.5, 8.0, 9.0, 10.0,
];

const LOCKON_RATIOS: [f64; 4] = [0.6, 0.8, 1.0, 1.6];

fn sweep_peak(sweep: &[(f64, f64)]) -> f64 {
    sweep.iter().map(|&(_, a)| a).fold(0.0, f64::max)
}

fn band_satisfied(sweep: &[(f64, f64)], t: &CalibrationTargets) -> bool {
    sweep
        .iter()
        .filter(|&&(u, _)| u >= t.band_u.0 && u <= t.band_u.1)
        .all(|&(_, a)| a >= t.band_min_a_over_d)
}

fn unforced_cost(sweep: &[(f64, f64)], t: &CalibrationTargets) -> f64 {
    let peak = sweep_peak(sweep);
    let mut cost = 10.0 * ((peak - t.peak_a_over_d) / t.peak_a_over_d).powi(2);
    // Mild preference for a stronger limit cycle at the training point
    // (U = 6); the forced lock-on peak rides on it.
    let a6 = sweep
        .iter()
        .find(|&&(u, _)| (u - 6.0).abs() < 1e-9)
        .map(|&(_, a)| a)
        .unwrap_or(0.0);
    cost += 8.0 * ((a6 - 0.46) / 0.46).powi(2);
    for &(u, a) in sweep {
        if u >= t.band_u.0 && u <= t.band_u.1 && a < t.band_min_a_over_d {
            cost += 20.0 * ((t.band_min_a_over_d - a) / t.band_min_a_over_d).powi(2);
        }
        if u <= 2.5 && a > t.low_u_max_a_over_d {
            cost += 20.0 * ((a - t.low_u_max_a_over_d) / t.low_u_max_a_over_d).powi(2);
        }
    }
    cost
}

fn unforced_feasible(sweep: &[(f64, f64)], t: &CalibrationTargets) -> bool {
    (sweep_peak(sweep) - t.peak_a_over_d).abs() <= t.peak_tolerance && band_satisfied(sweep, t)
}

fn lockon_at(points: &[SweepPoint], ratio: f64) -> f64 {
    points
        .iter()
        .find(|p| (p.ratio - ratio).abs() < 1e-9)
        .map(|p| p.a_over_d)
        .unwrap_or(f64::INFINITY)
}

fn lockon_cost(points: &[SweepPoint], t: &CalibrationTargets) -> f64 {
    let a06 = lockon_at(points, 0.6);
    let a08 = lockon_at(points, 0.8);
    let a10 = lockon_at(points, 1.0);
    let a16 = lockon_at(points, 1.6);
    // Margined violations of the target shape: a point that meets every
    // target with ~10-15% headroom costs only its shaping term, so the
    // search settles away from threshold edges.
    let peak_err = (a10 - t.lockon_peak_a_over_d).abs();
    let v_peak = (peak_err - 0.9 * t.lockon_peak_tolerance).max(0.0);
    let v_high = (a16 - 0.85 * t.lockon_high_max).max(0.0);
    let v_dip_low = (a08 - (a06 - 0.01)).max(0.0);
    let v_dip_peak = (a08 - (a10 - 0.05)).max(0.0);
    2.0 * (peak_err / t.lockon_peak_a_over_d).powi(2)
        + 1000.0
            * (v_peak.powi(2) + v_high.powi(2) + v_dip_low.powi(2) + v_dip_peak.powi(2))
}

fn lockon_feasible(points: &[SweepPoint], t: &CalibrationTargets) -> bool {
    let a06 = lockon_at(points, 0.6);
    let a08 = lockon_at(points, 0.8);
    let a10 = lockon_at(points, 1.0);
    let a16 = lockon_at(points, 1.6);
    (a10 - t.lockon_peak_a_over_d).abs() <= t.lockon_peak_tolerance
        && a16 <= t.lockon_high_max
        && a08 < a06
        && a08 < a10
}

struct Stage1Candidate {
    wake: WakeModelParams,
    cost: f64,
    sweep: Vec<(f64, f64)>,
}

fn evaluate_stage1(
    cylinder: CylinderProperties,
    wake: WakeModelParams,
    t: &CalibrationTargets,
) -> Option<Stage1Candidate> {
    let sweep = amplitude_sweep(cylinder, wake, &SWEEP_U).ok()?;
    let cost = unforced_cost(&sweep, t);
    Some(Stage1Candidate { wake, cost, sweep })
}

/// Fit (vdp_epsilon, coupling_a) to the unforced lock-in targets and
/// rotation_coupling to the forced lock-on targets. Deterministic: fixed
/// grids, fixed refinement, no randomness.
pub fn calibrate(
    cylinder: CylinderProperties,
    base: WakeModelParams,
    motor: &MotorParams,
    targets: &CalibrationTargets,
) -> Result<CalibrationReport> {
    let mut log = String::new();

    if targets.peak_a_over_d <= 0.0 {
        return Err(VivError::Calibration(
            "target peak amplitude must be positive: the wake oscillator self-excites, \
             so a zero-amplitude lock-in curve is unreachable"
                .into(),
        ));
    }

    // Stage 1: coarse grid, then one local refinement around the best point.
    let eps_grid = [0.3, 0.5, 0.7, 0.9, 1.2];
    let a_grid = [16.0, 24.0, 32.0, 40.0, 48.0];
    let mut candidates: Vec<Stage1Candidate> = Vec::new();
    for &eps in &eps_grid {
        for &a in &a_grid {
            let wake = WakeModelParams {
                vdp_epsilon: eps,
                coupling_a: a,
                ..base
            };
            if let Some(c) = evaluate_stage1(cylinder, wake, targets) {
                candidates.push(c);
            }
        }
    }
    candidates.sort_by(|x, y| x.cost.total_cmp(&y.cost));
    if let Some(best) = candidates.first() {
        let (e0, a0) = (best.wake.vdp_epsilon, best.wake.coupling_a);
        for &fe in &[0.8, 0.9, 1.1, 1.2] {
            for &fa in &[0.85, 0.95, 1.05, 1.15] {
                let wake = WakeModelParams {
                    vdp_epsilon: e0 * fe,
                    coupling_a: a0 * fa,
                    ..base
                };
                if let Some(c) = evaluate_stage1(cylinder, wake, targets) {
                    candidates.push(c);
                }
            }
        }
    }
    candidates.sort_by(|x, y| x.cost.total_cmp(&y.cost));
    candidates.retain(|c| unforced_feasible(&c.sweep, targets));
    if candidates.is_empty() {
        return Err(VivError::Calibration(format!(
            "no (vdp_epsilon, coupling_a) candidate met the lock-in targets \
             (peak {:.2} +/- {:.2}, A/D >= {:.2} over U in [{:.1}, {:.1}])\n{log}",
            targets.peak_a_over_d,
            targets.peak_tolerance,
            targets.band_min_a_over_d,
            targets.band_u.0,
            targets.band_u.1
        )));
    }
    candidates.truncate(8);
    for c in &candidates {
        writeln!(
            log,
            "stage1 candidate: eps = {:.3}, A = {:.2}, cost = {:.4}, peak = {:.3}",
            c.wake.vdp_epsilon,
            c.wake.coupling_a,
            c.cost,
            sweep_peak(&c.sweep)
        )
        .ok();
    }

    // Stage 2: rotation coupling per candidate, forced sweep at U = 6.
    // Candidates are visited in stage-one cost order; the first one whose
    // forced sweep meets every target with margin ends the search.
    let kappa_coarse = [8.0, 10.0, 11.0, 12.0, 13.0, 14.0, 15.0, 16.0, 18.0];
    let mut best_total: Option<(f64, WakeModelParams, Vec<(f64, f64)>, Vec<SweepPoint>, bool)> =
        None;
    for cand in &candidates {
        let probe = Plant::still_water(cylinder, cand.wake);
        let f_n = probe.natural_frequency_hz();
        let flow = flow_for_reduced_velocity(6.0, f_n, cylinder.diameter_m, 1000.0, 0.21);
        let gains =
            SpeedPidGains::tuned_for(motor, flow.velocity_m_per_s, cylinder.diameter_m, f_n);

        let eval_kappa = |kappa: f64| -> Option<(f64, Vec<SweepPoint>)> {
            let wake = WakeModelParams {
                rotation_coupling: kappa,
                ..cand.wake
            };
            let plant = Plant::in_flow(cylinder, flow, wake).ok()?;
            let points = lockon::frequency_sweep(&plant, motor, &LOCKON_RATIOS, 1.0, &gains).ok()?;
            Some((lockon_cost(&points, targets), points))
        };

        let mut best_kappa: Option<(f64, f64, Vec<SweepPoint>)> = None;
        for &kappa in &kappa_coarse {
            if let Some((cost, points)) = eval_kappa(kappa) {
                if best_kappa.as_ref().map_or(true, |b| cost < b.0) {
                    best_kappa = Some((cost, kappa, points));
                }
            }
        }
        let Some((_, k0, _)) = best_kappa else { continue };
        for &dk in &[-0.5, -0.25, 0.25, 0.5] {
            let kappa = k0 + dk;
            if kappa <= 0.0 {
                continue;
            }
            if let Some((cost, points)) = eval_kappa(kappa) {
                if best_kappa.as_ref().map_or(true, |b| cost < b.0) {
                    best_kappa = Some((cost, kappa, points));
                }
            }
        }
        let (cost2, kappa, points) = best_kappa.unwrap();
        let feasible = lockon_feasible(&points, targets);
        let total = cand.cost + cost2;
        writeln!(
            log,
            "stage2: eps = {:.3}, A = {:.2} -> kappa = {kappa:.2}, cost = {cost2:.4}, \
             lockon ok = {feasible}",
            cand.wake.vdp_epsilon, cand.wake.coupling_a
        )
        .ok();
        let wake = WakeModelParams {
            rotation_coupling: kappa,
            ..cand.wake
        };
        let better = match &best_total {
            None => true,
            // A feasible pair always beats an infeasible one.
            Some((bt, _, _, _, bf)) => (feasible, -total) > (*bf, -*bt),
        };
        let settled = feasible && cost2 <= 0.08;
        if better {
            best_total = Some((total, wake, cand.sweep.clone(), points, feasible));
        }
        if settled {
            break;
        }
    }

    let Some((cost, wake, sweep, lockon_points, feasible)) = best_total else {
        return Err(VivError::Calibration(format!(
            "forced lock-on sweep failed for every stage-one candidate\n{log}"
        )));
    };
    if !feasible {
        return Err(VivError::Calibration(format!(
            "no rotation_coupling met the lock-on targets; best: eps = {:.3}, A = {:.2}, \
             kappa = {:.2} with A/D(0.6, 0.8, 1.0, 1.6) = ({:.3}, {:.3}, {:.3}, {:.3})\n{log}",
            wake.vdp_epsilon,
            wake.coupling_a,
            wake.rotation_coupling,
            lockon_at(&lockon_points, 0.6),
            lockon_at(&lockon_points, 0.8),
            lockon_at(&lockon_points, 1.0),
            lockon_at(&lockon_points, 1.6),
        )));
    }

    for &(u, a) in &sweep {
        writeln!(log, "sweep U = {u:.2}: A/D = {a:.4}").ok();
    }
    for p in &lockon_points {
        writeln!(
            log,
            "lockon ratio = {:.2}: A/D = {:.4}, tracking rms = {:.4}",
            p.ratio, p.a_over_d, p.tracking_rms
        )
        .ok();
    }

    Ok(CalibrationReport {
        params: wake,
        cost,
        sweep,
        lockon: lockon_points,
        log,
    })
}
