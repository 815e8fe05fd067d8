//! Switched time-domain engine: exact per-phase affine propagation, periodic
//! steady state from the cycle map, waveform statistics, and duty sweeps.

use crate::exec;
use crate::linalg::affine_step;
use crate::model::*;
use crate::params::*;
use nalgebra::Complex;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Propagation {
    /// Matrix exponential of the augmented affine system; no step error.
    ExactExponential,
    /// Classic fixed-step RK4; cross-validation route.
    Rk4,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    /// Samples recorded per phase (also the RK4 step count per phase).
    pub steps_per_phase: usize,
    pub n_max_cycles: usize,
    /// Relative fixed-point tolerance on the periodic orbit.
    pub fp_tol: f64,
    pub propagation: Propagation,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            steps_per_phase: 64,
            n_max_cycles: 100_000,
            fp_tol: 1e-9,
            propagation: Propagation::ExactExponential,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.steps_per_phase < 4 {
            return Err(SimError::Config {
                what: "steps_per_phase must be >= 4",
            });
        }
        if !(self.fp_tol > 0.0) {
            return Err(SimError::Config {
                what: "fp_tol must be > 0",
            });
        }
        Ok(())
    }
}

/// Samples of one phase, endpoints included.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSamples {
    pub t: Vec<f64>,
    pub x: Vec<Vec7>,
}

/// One switching cycle. The Off block's first sample coincides in time and
/// state with the On block's last; flat exports skip the duplicate so
/// timestamps stay strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub on: PhaseSamples,
    pub off: PhaseSamples,
    pub d: f64,
    pub fs: f64,
}

impl Trajectory {
    /// Switch current: the three magnetizing branches sum through the switch
    /// while it conducts.
    pub fn switch_current(x: &Vec7, phase: SwitchPhase) -> f64 {
        match phase {
            SwitchPhase::On => x[IL1] + x[IL2] + x[IL3],
            SwitchPhase::Off => 0.0,
        }
    }

    /// Flat (t, x, phase) view without the duplicated boundary instant.
    pub fn flat(&self) -> impl Iterator<Item = (f64, &Vec7, SwitchPhase)> {
        let on = self
            .on
            .t
            .iter()
            .zip(self.on.x.iter())
            .map(|(&t, x)| (t, x, SwitchPhase::On));
        let off = self
            .off
            .t
            .iter()
            .zip(self.off.x.iter())
            .skip(1)
            .map(|(&t, x)| (t, x, SwitchPhase::Off));
        on.chain(off)
    }
}

/// Exact affine propagation over one phase interval.
pub fn propagate_phase(model: &PhaseModel, x0: &Vec7, u: &SourceInputs, tau: f64) -> Vec7 {
    if tau == 0.0 {
        return *x0;
    }
    let g = model.affine(u);
    let (f, c) = affine_step(&model.a, &g, tau);
    f * x0 + c
}

/// RK4 over one phase interval with `steps` fixed steps; oracle route.
pub fn propagate_phase_rk4(
    model: &PhaseModel,
    x0: &Vec7,
    u: &SourceInputs,
    tau: f64,
    steps: usize,
) -> Vec7 {
    let h = tau / steps as f64;
    let mut x = *x0;
    for _ in 0..steps {
        x = rk4_step(model, &x, u, h);
    }
    x
}

fn rk4_step(model: &PhaseModel, x: &Vec7, u: &SourceInputs, h: f64) -> Vec7 {
    let k1 = state_derivative(model, x, u);
    let k2 = state_derivative(model, &(x + k1 * (h / 2.0)), u);
    let k3 = state_derivative(model, &(x + k2 * (h / 2.0)), u);
    let k4 = state_derivative(model, &(x + k3 * h), u);
    x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

fn propagate_sampled(
    model: &PhaseModel,
    u: &SourceInputs,
    x0: &Vec7,
    t0: f64,
    tau: f64,
    cfg: &SimConfig,
) -> Result<PhaseSamples, SimError> {
    let n = cfg.steps_per_phase;
    let h = tau / n as f64;
    let mut t = Vec::with_capacity(n + 1);
    let mut xs = Vec::with_capacity(n + 1);
    t.push(t0);
    xs.push(*x0);
    match cfg.propagation {
        Propagation::ExactExponential => {
            let g = model.affine(u);
            let (f, c) = affine_step(&model.a, &g, h);
            let mut x = *x0;
            for k in 1..=n {
                x = f * x + c;
                if !x.iter().all(|v| v.is_finite()) {
                    return Err(SimError::Diverged {
                        phase: model.phase.label(),
                    });
                }
                t.push(t0 + h * k as f64);
                xs.push(x);
            }
        }
        Propagation::Rk4 => {
            let mut x = *x0;
            for k in 1..=n {
                x = rk4_step(model, &x, u, h);
                if !x.iter().all(|v| v.is_finite()) {
                    return Err(SimError::Diverged {
                        phase: model.phase.label(),
                    });
                }
                t.push(t0 + h * k as f64);
                xs.push(x);
            }
        }
    }
    Ok(PhaseSamples { t, x: xs })
}

/// Integrate one switching cycle: On for D·Ts, then Off for (1-D)·Ts.
pub fn integrate_cycle(
    p: &ConverterParams,
    variant: ModelVariant,
    u: &SourceInputs,
    x0: &Vec7,
    cfg: &SimConfig,
) -> Result<(Vec7, Trajectory), SimError> {
    p.validate()?;
    cfg.validate()?;
    let on_model = build_phase_model(p, SwitchPhase::On, variant);
    let off_model = build_phase_model(p, SwitchPhase::Off, variant);
    let t_on = SwitchPhase::On.duration(p);
    let t_off = SwitchPhase::Off.duration(p);
    let on = propagate_sampled(&on_model, u, x0, 0.0, t_on, cfg)?;
    let x_mid = *on.x.last().expect("on block nonempty");
    let off = propagate_sampled(&off_model, u, &x_mid, t_on, t_off, cfg)?;
    let x_end = *off.x.last().expect("off block nonempty");
    Ok((
        x_end,
        Trajectory {
            on,
            off,
            d: p.d,
            fs: p.fs,
        },
    ))
}

/// Apply the exact one-cycle affine map `n` times from `x0`. Equivalent to
/// chaining integrate_cycle (the per-phase operators are the same closed
/// forms), without recording samples.
pub fn iterate_cycles(
    p: &ConverterParams,
    variant: ModelVariant,
    u: &SourceInputs,
    x0: &Vec7,
    n: usize,
) -> Result<Vec7, SimError> {
    p.validate()?;
    let on_model = build_phase_model(p, SwitchPhase::On, variant);
    let off_model = build_phase_model(p, SwitchPhase::Off, variant);
    let (f_on, c_on) = affine_step(&on_model.a, &on_model.affine(u), SwitchPhase::On.duration(p));
    let (f_off, c_off) =
        affine_step(&off_model.a, &off_model.affine(u), SwitchPhase::Off.duration(p));
    let mut x = *x0;
    for k in 0..n {
        x = f_off * (f_on * x + c_on) + c_off;
        if k % 1024 == 0 && !x.iter().all(|v| v.is_finite()) {
            return Err(SimError::Diverged { phase: "cycle" });
        }
    }
    if !x.iter().all(|v| v.is_finite()) {
        return Err(SimError::Diverged { phase: "cycle" });
    }
    Ok(x)
}

/// Per-device cycle statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceStats {
    pub name: &'static str,
    pub avg_a: f64,
    pub rms_a: f64,
    pub peak_a: f64,
    pub peak_v: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Measurements {
    /// Cycle averages in state order.
    pub avg_state: Vec7,
    pub avg_vo: f64,
    /// max - min per inductor current over the cycle.
    pub ripple_il: [f64; 4],
    /// max - min per capacitor voltage over the cycle.
    pub ripple_vc: [f64; 3],
    /// Switch first, then D1..D7, Do.
    pub devices: Vec<DeviceStats>,
    /// |I_Q| at the On->Off commutation instant.
    pub zcs_residual_a: f64,
    /// Inductor current changes sign during the cycle (model stays linear;
    /// a real diode set would enter discontinuous conduction).
    pub dcm_flags: [bool; 4],
}

#[derive(Debug, Clone)]
pub struct SteadyStateResult {
    pub x_periodic: Vec7,
    pub cycle: Trajectory,
    pub meas: Measurements,
    pub params: ConverterParams,
    pub variant: ModelVariant,
    pub u: SourceInputs,
    /// Floquet multipliers of the cycle map as (re, im).
    pub floquet: Vec<(f64, f64)>,
    /// Spectral radius of the cycle map.
    pub rho: f64,
    /// True when the conserved-mode pinning row was needed (ideal input pair).
    pub deflated: bool,
    /// Relative orbit-closure residual actually achieved.
    pub residual_rel: f64,
}

/// Closed-form periodic steady state.
///
/// The affine cycle map x(Ts) = Φ·x(0) + d is recovered from 8 probe
/// integrations (the zero state and the 7 unit states), then (I-Φ)x = d is
/// solved directly. With ideal parts the input windings see identical
/// voltages in both phases, so z = L1·iL1 - L2·iL2 is conserved: Φ has an
/// exact unit multiplier and (I-Φ) is singular along that direction. The
/// solver detects the failure and re-solves with the pinning row z = 0
/// appended (the value every orbit started from rest keeps). Growth beyond
/// the unit circle is reported as an unstable orbit.
pub fn find_steady_state(
    p: &ConverterParams,
    variant: ModelVariant,
    u: &SourceInputs,
    cfg: &SimConfig,
) -> Result<SteadyStateResult, SimError> {
    p.validate()?;
    cfg.validate()?;

    // probe the affine map
    let d_vec = integrate_cycle(p, variant, u, &Vec7::zeros(), cfg)?.0;
    let mut phi = Mat7::zeros();
    for k in 0..7 {
        let mut e = Vec7::zeros();
        e[k] = 1.0;
        let xk = integrate_cycle(p, variant, u, &e, cfg)?.0;
        phi.set_column(k, &(xk - d_vec));
    }

    let eig = phi.complex_eigenvalues();
    let floquet: Vec<(f64, f64)> = eig.iter().map(|l| (l.re, l.im)).collect();
    let rho = eig.iter().map(|l| l.norm()).fold(0.0f64, f64::max);
    if rho > 1.0 + 1e-9 {
        return Err(SimError::UnstableOrbit { rho });
    }

    let i_minus_phi = Mat7::identity() - phi;
    let orbit_residual = |x: &Vec7| -> f64 {
        let x_next = phi * x + d_vec;
        (x_next - x).norm() / (1.0 + x.norm())
    };

    // a multiplier at +1 makes (I-Phi) structurally singular; the plain LU
    // route would still "solve" it (roundoff breaks exact singularity) but
    // with an arbitrary component along the conserved direction that the
    // orbit residual cannot see, so route by the spectrum instead
    let unit_multiplier = eig.iter().any(|l| (l - Complex::new(1.0, 0.0)).norm() <= 1e-9);

    let mut deflated = false;
    let mut x_star = if unit_multiplier {
        None
    } else {
        i_minus_phi
            .lu()
            .solve(&d_vec)
            .filter(|x| orbit_residual(x) <= cfg.fp_tol)
    };

    if x_star.is_none() {
        // append the conserved-direction pin l'x = 0, l = (L1, -L2, 0, ...)
        let mut m = nalgebra::SMatrix::<f64, 8, 7>::zeros();
        for r in 0..7 {
            for c in 0..7 {
                m[(r, c)] = i_minus_phi[(r, c)];
            }
        }
        // scaled to the O(1) magnitude of the map rows so the least-squares
        // solve does not lose digits to millihenry-sized pin coefficients
        let pin = 1.0 / p.l1.max(p.l2);
        m[(7, IL1)] = pin * p.l1;
        m[(7, IL2)] = -pin * p.l2;
        let mut rhs = nalgebra::SVector::<f64, 8>::zeros();
        for r in 0..7 {
            rhs[r] = d_vec[r];
        }
        let svd = m.svd(true, true);
        let sol = svd
            .solve(&rhs, 1e-14)
            .map_err(|_| SimError::MarginalStability { residual: f64::NAN })?;
        deflated = true;
        x_star = Some(sol);
    }

    let x_star = x_star.expect("solver produced a candidate");
    let residual_rel = orbit_residual(&x_star);
    if !residual_rel.is_finite() || residual_rel > cfg.fp_tol {
        return Err(SimError::MarginalStability {
            residual: residual_rel,
        });
    }

    let (_, cycle) = integrate_cycle(p, variant, u, &x_star, cfg)?;
    let meas = measure_cycle(&cycle, p, variant, u);
    Ok(SteadyStateResult {
        x_periodic: x_star,
        cycle,
        meas,
        params: *p,
        variant,
        u: *u,
        floquet,
        rho,
        deflated,
        residual_rel,
    })
}

/// Recompute waveform statistics from a steady-state orbit.
pub fn measure(ss: &SteadyStateResult, p: &ConverterParams) -> Measurements {
    measure_cycle(&ss.cycle, p, ss.variant, &ss.u)
}

fn trapz(t: &[f64], y: &[f64]) -> f64 {
    let mut acc = 0.0;
    for k in 1..t.len() {
        acc += 0.5 * (y[k] + y[k - 1]) * (t[k] - t[k - 1]);
    }
    acc
}

/// Integrate f over the full cycle (both phase blocks, boundary deduped by
/// per-phase integration).
fn cycle_integral<F>(traj: &Trajectory, mut f: F) -> f64
where
    F: FnMut(&Vec7, SwitchPhase) -> f64,
{
    let yon: Vec<f64> = traj.on.x.iter().map(|x| f(x, SwitchPhase::On)).collect();
    let yoff: Vec<f64> = traj.off.x.iter().map(|x| f(x, SwitchPhase::Off)).collect();
    trapz(&traj.on.t, &yon) + trapz(&traj.off.t, &yoff)
}

/// Diode current by conduction convention. Conducting-phase branch currents:
/// On: D1 carries iL2, D3 carries iL1, D5 and Do carry iL4;
/// Off: D2 carries iL1+iL2, D4 carries iL3, D6 and D7 carry iL4.
pub fn diode_current(name: &str, x: &Vec7, phase: SwitchPhase) -> f64 {
    match (name, phase) {
        ("D1", SwitchPhase::On) => x[IL2],
        ("D3", SwitchPhase::On) => x[IL1],
        ("D5", SwitchPhase::On) | ("Do", SwitchPhase::On) => x[IL4],
        ("D2", SwitchPhase::Off) => x[IL1] + x[IL2],
        ("D4", SwitchPhase::Off) => x[IL3],
        ("D6", SwitchPhase::Off) | ("D7", SwitchPhase::Off) => x[IL4],
        _ => 0.0,
    }
}

/// Blocking-voltage magnitude per device from the instantaneous states,
/// following the published stress identities.
fn blocking_voltage(name: &str, x: &Vec7, v_src: f64, v_bat: f64, phase: SwitchPhase) -> f64 {
    match (name, phase) {
        ("Q", SwitchPhase::Off)
        | ("D1", SwitchPhase::Off)
        | ("D4", SwitchPhase::On)
        | ("D3", SwitchPhase::Off) => x[VC1].abs(),
        ("D2", SwitchPhase::On) => (v_src - x[VC1]).abs(),
        ("D5", SwitchPhase::Off) | ("D6", SwitchPhase::On) => x[VCO].abs() / 2.0,
        ("D7", SwitchPhase::On) => (v_bat - x[VCO]).abs() / 2.0,
        ("Do", SwitchPhase::Off) => (x[VCO] - x[VC2]).abs(),
        _ => 0.0,
    }
}

fn measure_cycle(
    traj: &Trajectory,
    p: &ConverterParams,
    _variant: ModelVariant,
    u: &SourceInputs,
) -> Measurements {
    let ts = 1.0 / traj.fs;
    let mut avg_state = Vec7::zeros();
    for k in 0..7 {
        avg_state[k] = cycle_integral(traj, |x, _| x[k]) / ts;
    }

    let minmax = |idx: usize| -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for x in traj.on.x.iter().chain(traj.off.x.iter()) {
            lo = lo.min(x[idx]);
            hi = hi.max(x[idx]);
        }
        (lo, hi)
    };

    let mut ripple_il = [0.0; 4];
    let mut dcm_flags = [false; 4];
    for k in 0..4 {
        let (lo, hi) = minmax(k);
        ripple_il[k] = hi - lo;
        dcm_flags[k] = lo < 0.0 && hi > 0.0;
    }
    let mut ripple_vc = [0.0; 3];
    for j in 0..3 {
        let (lo, hi) = minmax(4 + j);
        ripple_vc[j] = hi - lo;
    }

    let mut devices = Vec::with_capacity(9);
    let q_avg = cycle_integral(traj, |x, ph| Trajectory::switch_current(x, ph)) / ts;
    let q_ms = cycle_integral(traj, |x, ph| {
        let i = Trajectory::switch_current(x, ph);
        i * i
    }) / ts;
    let q_peak = traj
        .on
        .x
        .iter()
        .map(|x| Trajectory::switch_current(x, SwitchPhase::On).abs())
        .fold(0.0f64, f64::max);
    let q_peak_v = traj
        .off
        .x
        .iter()
        .map(|x| blocking_voltage("Q", x, u.v_src, p.v_bat, SwitchPhase::Off))
        .fold(0.0f64, f64::max);
    devices.push(DeviceStats {
        name: "Q",
        avg_a: q_avg,
        rms_a: q_ms.max(0.0).sqrt(),
        peak_a: q_peak,
        peak_v: q_peak_v,
    });

    for name in DiodeSet::NAMES {
        let avg = cycle_integral(traj, |x, ph| diode_current(name, x, ph)) / ts;
        let ms = cycle_integral(traj, |x, ph| {
            let i = diode_current(name, x, ph);
            i * i
        }) / ts;
        let mut peak = 0.0f64;
        let mut peak_v = 0.0f64;
        for (block, phase) in [(&traj.on, SwitchPhase::On), (&traj.off, SwitchPhase::Off)] {
            for x in &block.x {
                peak = peak.max(diode_current(name, x, phase).abs());
                peak_v = peak_v.max(blocking_voltage(name, x, u.v_src, p.v_bat, phase));
            }
        }
        devices.push(DeviceStats {
            name,
            avg_a: avg,
            rms_a: ms.max(0.0).sqrt(),
            peak_a: peak,
            peak_v,
        });
    }

    let boundary = traj.on.x.last().expect("on block nonempty");
    let zcs_residual_a = Trajectory::switch_current(boundary, SwitchPhase::On).abs();

    Measurements {
        avg_state,
        avg_vo: avg_state[VCO],
        ripple_il,
        ripple_vc,
        devices,
        zcs_residual_a,
        dcm_flags,
    }
}

/// Conduction-window and winding statistics consumed by the loss accounting.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceCycleStats {
    /// rms of the switch current over its conduction window only.
    pub switch_rms_on: f64,
    /// Sum of full-period average currents over all eight diodes.
    pub diode_avg_sum: f64,
    /// Full-period rms per winding.
    pub inductor_rms: [f64; 4],
    /// Full-period rms of each bank's current C·dv/dt.
    pub capacitor_rms: [f64; 3],
}

pub fn device_cycle_stats(ss: &SteadyStateResult, p: &ConverterParams) -> DeviceCycleStats {
    let traj = &ss.cycle;
    let ts = 1.0 / traj.fs;
    let t_on = traj.d * ts;

    let yon: Vec<f64> = traj
        .on
        .x
        .iter()
        .map(|x| {
            let i = Trajectory::switch_current(x, SwitchPhase::On);
            i * i
        })
        .collect();
    let switch_rms_on = (trapz(&traj.on.t, &yon) / t_on).max(0.0).sqrt();

    let mut diode_avg_sum = 0.0;
    for name in DiodeSet::NAMES {
        diode_avg_sum += cycle_integral(traj, |x, ph| diode_current(name, x, ph)) / ts;
    }

    let mut inductor_rms = [0.0; 4];
    for k in 0..4 {
        let ms = cycle_integral(traj, |x, _| x[k] * x[k]) / ts;
        inductor_rms[k] = ms.max(0.0).sqrt();
    }

    // bank currents from the phase dynamics C·dv/dt
    let on_model = build_phase_model(p, SwitchPhase::On, ss.variant);
    let off_model = build_phase_model(p, SwitchPhase::Off, ss.variant);
    let caps = p.capacitances();
    let mut capacitor_rms = [0.0; 3];
    for j in 0..3 {
        let ms = cycle_integral(traj, |x, ph| {
            let model = match ph {
                SwitchPhase::On => &on_model,
                SwitchPhase::Off => &off_model,
            };
            let i = caps[j] * state_derivative(model, x, &ss.u)[4 + j];
            i * i
        }) / ts;
        capacitor_rms[j] = ms.max(0.0).sqrt();
    }

    DeviceCycleStats {
        switch_rms_on,
        diode_avg_sum,
        inductor_rms,
        capacitor_rms,
    }
}

/// Volt-second and charge residuals over the recorded cycle. The residual is
/// the trapezoidal integral of each winding voltage L·di/dt (resp. bank
/// current C·dv/dt); `_rel` columns normalize by the integral of the
/// rectified waveform.
#[derive(Debug, Clone, PartialEq)]
pub struct BalanceReport {
    pub volt_sec: [f64; 4],
    pub volt_sec_rel: [f64; 4],
    pub charge: [f64; 3],
    pub charge_rel: [f64; 3],
}

pub fn balance_check(ss: &SteadyStateResult) -> BalanceReport {
    let p = &ss.params;
    let traj = &ss.cycle;
    let on_model = build_phase_model(p, SwitchPhase::On, ss.variant);
    let off_model = build_phase_model(p, SwitchPhase::Off, ss.variant);
    let deriv = |x: &Vec7, ph: SwitchPhase| -> Vec7 {
        let model = match ph {
            SwitchPhase::On => &on_model,
            SwitchPhase::Off => &off_model,
        };
        state_derivative(model, x, &ss.u)
    };

    let ls = p.inductances();
    let mut volt_sec = [0.0; 4];
    let mut volt_sec_rel = [0.0; 4];
    for k in 0..4 {
        let vs = cycle_integral(traj, |x, ph| ls[k] * deriv(x, ph)[k]);
        let mag = cycle_integral(traj, |x, ph| (ls[k] * deriv(x, ph)[k]).abs());
        volt_sec[k] = vs;
        volt_sec_rel[k] = vs.abs() / mag.max(1e-300);
    }

    let cs = p.capacitances();
    let mut charge = [0.0; 3];
    let mut charge_rel = [0.0; 3];
    for j in 0..3 {
        let q = cycle_integral(traj, |x, ph| cs[j] * deriv(x, ph)[4 + j]);
        let mag = cycle_integral(traj, |x, ph| (cs[j] * deriv(x, ph)[4 + j]).abs());
        charge[j] = q;
        charge_rel[j] = q.abs() / mag.max(1e-300);
    }

    BalanceReport {
        volt_sec,
        volt_sec_rel,
        charge,
        charge_rel,
    }
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub d: f64,
    pub meas: Option<Measurements>,
    pub gain_observed: Option<f64>,
    pub gain_formula: f64,
    pub deviation: Option<f64>,
    pub rho: Option<f64>,
    pub error: Option<String>,
}

/// Steady-state rows over a duty list. Rows are independent and run through
/// the data-parallel mapper; failures are recorded per row and the sweep
/// continues. Output order follows the input list.
pub fn sweep(
    p: &ConverterParams,
    duty_list: &[f64],
    variant: ModelVariant,
    cfg: &SimConfig,
) -> Vec<SweepRow> {
    let u = SourceInputs::from_params(p);
    exec::map(duty_list, |&d| {
        let gain_formula = crate::formulas::ideal_gain(d);
        let pd = p.with_duty(d);
        match find_steady_state(&pd, variant, &u, cfg) {
            Ok(ss) => {
                let gain_observed = if u.v_src != 0.0 {
                    Some(ss.meas.avg_vo / u.v_src)
                } else {
                    None
                };
                let deviation = gain_observed.map(|g| (g - gain_formula).abs() / gain_formula);
                SweepRow {
                    d,
                    rho: Some(ss.rho),
                    meas: Some(ss.meas.clone()),
                    gain_observed,
                    gain_formula,
                    deviation,
                    error: None,
                }
            }
            Err(e) => SweepRow {
                d,
                meas: None,
                gain_observed: None,
                gain_formula,
                deviation: None,
                rho: None,
                error: Some(e.to_string()),
            },
        }
    })
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error("sim config: {what}")]
    Config { what: &'static str },
    #[error("state diverged during {phase} phase")]
    Diverged { phase: &'static str },
    #[error("unstable periodic orbit: spectral radius {rho:.9}")]
    UnstableOrbit { rho: f64 },
    #[error("cycle map is marginally stable; orbit residual {residual:.3e}")]
    MarginalStability { residual: f64 },
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn zero_interval_is_identity() {
        let p = ConverterParams::sim_bench();
        let model = build_phase_model(&p, SwitchPhase::On, ModelVariant::Reconciled);
        let u = SourceInputs::from_params(&p);
        let x0 = Vec7::from_iterator((0..7).map(|k| 0.3 * k as f64 - 1.0));
        assert_eq!(propagate_phase(&model, &x0, &u, 0.0), x0);
    }

    #[test]
    fn config_gate_rejects_bad_fields() {
        let mut cfg = SimConfig::default();
        cfg.steps_per_phase = 3;
        assert!(cfg.validate().is_err());
        let mut cfg = SimConfig::default();
        cfg.fp_tol = 0.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn trapz_matches_linear_ramp() {
        let t: Vec<f64> = (0..=10).map(|k| k as f64 * 0.1).collect();
        let y: Vec<f64> = t.iter().map(|&t| 2.0 * t).collect();
        assert_relative_eq!(trapz(&t, &y), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn flat_view_has_strictly_increasing_time() {
        let p = ConverterParams::sim_bench();
        let u = SourceInputs::from_params(&p);
        let cfg = SimConfig::default();
        let (_, traj) =
            integrate_cycle(&p, ModelVariant::Reconciled, &u, &Vec7::zeros(), &cfg).unwrap();
        let times: Vec<f64> = traj.flat().map(|(t, _, _)| t).collect();
        assert_eq!(times.len(), 2 * cfg.steps_per_phase + 1);
        for w in times.windows(2) {
            assert!(w[1] > w[0], "t must be strictly increasing: {w:?}");
        }
        assert_relative_eq!(*times.last().unwrap(), 1.0 / p.fs, max_relative = 1e-12);
    }

    #[test]
    fn ideal_input_pair_conserves_flux_difference() {
        // L1*iL1 - L2*iL2 is invariant under both phase maps when the
        // windings are lossless; one full cycle must preserve it.
        let p = ConverterParams::sim_bench();
        let u = SourceInputs::from_params(&p);
        let cfg = SimConfig::default();
        let mut x0 = Vec7::zeros();
        x0[IL1] = 1.7;
        x0[IL2] = -0.4;
        x0[VC1] = 5.0;
        let (x1, _) = integrate_cycle(&p, ModelVariant::Reconciled, &u, &x0, &cfg).unwrap();
        let z0 = p.l1 * x0[IL1] - p.l2 * x0[IL2];
        let z1 = p.l1 * x1[IL1] - p.l2 * x1[IL2];
        assert_relative_eq!(z1, z0, max_relative = 1e-9);
    }

    #[test]
    fn diode_currents_partition_the_cycle() {
        // exactly four diodes carry current in each phase
        let mut x = Vec7::zeros();
        x[IL1] = 1.0;
        x[IL2] = 2.0;
        x[IL3] = 3.0;
        x[IL4] = 4.0;
        for phase in [SwitchPhase::On, SwitchPhase::Off] {
            let live = DiodeSet::NAMES
                .iter()
                .filter(|n| diode_current(n, &x, phase) != 0.0)
                .count();
            assert_eq!(live, 4, "{phase:?}");
        }
    }
}
