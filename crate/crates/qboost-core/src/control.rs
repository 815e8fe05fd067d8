//! Closed-loop regulation: positional PID, a five-layer Sugeno fuzzy
//! controller trained by full-batch backpropagation, behavior-cloning data
//! generation, cycle-synchronous plant stepping, and a single-diode PV fit.

use crate::linalg::affine_step;
use crate::model::{build_phase_model, ModelVariant};
use crate::params::*;
use std::collections::HashMap;
use thiserror::Error;

/// Actuation clamp shared by every controller.
pub const DUTY_MIN: f64 = 0.05;
pub const DUTY_MAX: f64 = 0.95;
/// Quantization grid for the cached cycle operators.
pub const DUTY_GRID: usize = 4096;
/// Reference soft-start ramp (s).
pub const DEFAULT_RAMP_S: f64 = 0.5;
/// Voltage-error coverage of the fuzzy inputs (V, V/s).
pub const DEFAULT_E_RANGE: (f64, f64) = (-3.0, 3.0);
pub const DEFAULT_DE_RANGE: (f64, f64) = (-500.0, 500.0);
pub const DEFAULT_EPOCHS: usize = 300;
pub const DEFAULT_LR: f64 = 0.05;
pub const DEFAULT_MF_RATE_SCALE: f64 = 0.1;

// ---------------------------------------------------------------- PID

#[derive(Debug, Clone, PartialEq)]
pub struct PidController {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    /// Output bias: duty applied at zero error.
    pub d_nom: f64,
    pub d_min: f64,
    pub d_max: f64,
    pub integ: f64,
    pub prev_e: Option<f64>,
}

impl PidController {
    pub fn new(kp: f64, ki: f64, kd: f64, d_nom: f64) -> Self {
        PidController {
            kp,
            ki,
            kd,
            d_nom,
            d_min: DUTY_MIN,
            d_max: DUTY_MAX,
            integ: 0.0,
            prev_e: None,
        }
    }

    /// Gains that settle the winding-damped plant at the bench scale.
    pub fn tuned_default() -> Self {
        PidController::new(1e-3, 0.05, 0.0, 0.4)
    }

    /// Proportional-only variant biased at a settled duty; used for cloning
    /// data so the recorded duty is a clean function of the error.
    pub fn proportional_at(&self, d_nom: f64) -> Self {
        let mut c = self.clone();
        c.ki = 0.0;
        c.kd = 0.0;
        c.d_nom = d_nom;
        c.integ = 0.0;
        c.prev_e = None;
        c
    }

    pub fn reset(&mut self) {
        self.integ = 0.0;
        self.prev_e = None;
    }
}

/// Positional PID with conditional integration: the integrator only commits
/// when the unclamped output is inside the clamp, so it cannot wind up while
/// saturated.
pub fn pid_step(ctrl: &mut PidController, e: f64, dt: f64) -> f64 {
    let de = ctrl.prev_e.map(|pe| (e - pe) / dt).unwrap_or(0.0);
    let integ_next = ctrl.integ + e * dt;
    let raw = ctrl.d_nom + ctrl.kp * e + ctrl.ki * integ_next + ctrl.kd * de;
    let out = raw.clamp(ctrl.d_min, ctrl.d_max);
    if out == raw {
        ctrl.integ = integ_next;
    }
    ctrl.prev_e = Some(e);
    out
}

// ---------------------------------------------------------------- fuzzy net

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triangle {
    pub left: f64,
    pub peak: f64,
    pub right: f64,
}

impl Triangle {
    pub fn mu(&self, x: f64) -> f64 {
        if x <= self.left || x >= self.right {
            0.0
        } else if x < self.peak {
            (x - self.left) / (self.peak - self.left)
        } else {
            (self.right - x) / (self.right - self.peak)
        }
    }
}

/// Two-input first-order Sugeno network. Layer 1: triangular memberships,
/// layer 2: product firing, layer 3: normalization, layer 4: linear
/// consequents p e + q de + r (one per rule), layer 5: weighted sum.
#[derive(Debug, Clone, PartialEq)]
pub struct Anfis {
    pub mf_e: Vec<Triangle>,
    pub mf_de: Vec<Triangle>,
    /// Row-major rule grid, `[p, q, r]` each: cons[i * mf_de.len() + j].
    pub cons: Vec<[f64; 3]>,
    pub e_range: (f64, f64),
    pub de_range: (f64, f64),
    /// Relative learning rate of the membership abscissae; 0 freezes them.
    pub mf_rate_scale: f64,
}

/// Evenly spaced triangular partition: peaks on a grid over [lo, hi], each
/// foot on the neighboring peak, end feet one grid gap outside the range so
/// clamped inputs keep nonzero membership.
fn ruspini_grid(k: usize, lo: f64, hi: f64) -> Vec<Triangle> {
    assert!(k >= 1 && hi > lo);
    if k == 1 {
        let w = hi - lo;
        return vec![Triangle {
            left: lo - w,
            peak: 0.5 * (lo + hi),
            right: hi + w,
        }];
    }
    let gap = (hi - lo) / (k - 1) as f64;
    (0..k)
        .map(|i| {
            let peak = lo + gap * i as f64;
            Triangle {
                left: peak - gap,
                peak,
                right: peak + gap,
            }
        })
        .collect()
}

impl Anfis {
    /// Fresh grid-initialized network; consequents start flat at `d_init`.
    pub fn grid_init(k: usize, e_range: (f64, f64), de_range: (f64, f64), d_init: f64) -> Self {
        let mf_e = ruspini_grid(k, e_range.0, e_range.1);
        let mf_de = ruspini_grid(k, de_range.0, de_range.1);
        let cons = vec![[0.0, 0.0, d_init]; k * k];
        Anfis {
            mf_e,
            mf_de,
            cons,
            e_range,
            de_range,
            mf_rate_scale: DEFAULT_MF_RATE_SCALE,
        }
    }

    pub fn rule_count(&self) -> usize {
        self.mf_e.len() * self.mf_de.len()
    }
}

struct Forward {
    e_c: f64,
    de_c: f64,
    mu_e: Vec<f64>,
    mu_de: Vec<f64>,
    /// Unnormalized firing strengths, row-major.
    w: Vec<f64>,
    w_sum: f64,
    /// Raw layer-5 output before the duty clamp.
    out: f64,
}

fn forward(model: &Anfis, e: f64, de: f64) -> Result<Forward, ControlError> {
    let e_c = e.clamp(model.e_range.0, model.e_range.1);
    let de_c = de.clamp(model.de_range.0, model.de_range.1);
    let mu_e: Vec<f64> = model.mf_e.iter().map(|t| t.mu(e_c)).collect();
    let mu_de: Vec<f64> = model.mf_de.iter().map(|t| t.mu(de_c)).collect();
    let kd = model.mf_de.len();
    let mut w = vec![0.0; model.rule_count()];
    let mut w_sum = 0.0;
    for (i, &me) in mu_e.iter().enumerate() {
        for (j, &md) in mu_de.iter().enumerate() {
            let wij = me * md;
            w[i * kd + j] = wij;
            w_sum += wij;
        }
    }
    if !(w_sum > 0.0) {
        return Err(ControlError::CoverageHole { e: e_c, de: de_c });
    }
    let mut out = 0.0;
    for (idx, &wij) in w.iter().enumerate() {
        if wij > 0.0 {
            let [p, q, r] = model.cons[idx];
            out += wij / w_sum * (p * e_c + q * de_c + r);
        }
    }
    Ok(Forward {
        e_c,
        de_c,
        mu_e,
        mu_de,
        w,
        w_sum,
        out,
    })
}

/// Crisp duty from the rule base; inputs clamped to the covered ranges,
/// output clamped to [0, 1].
pub fn anfis_infer(model: &Anfis, e: f64, de: f64) -> Result<f64, ControlError> {
    Ok(forward(model, e, de)?.out.clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSample {
    pub e: f64,
    pub de: f64,
    pub duty: f64,
}

/// Gradients of the mean squared error over a batch, in parameter order
/// matching the model fields.
#[derive(Debug, Clone)]
pub struct AnfisGrads {
    pub cons: Vec<[f64; 3]>,
    pub mf_e: Vec<[f64; 3]>,
    pub mf_de: Vec<[f64; 3]>,
}

/// d mu / d (left, peak, right) at x for one triangle.
fn triangle_grad(t: &Triangle, x: f64) -> [f64; 3] {
    if x <= t.left || x >= t.right {
        [0.0; 3]
    } else if x < t.peak {
        let w = t.peak - t.left;
        [(x - t.peak) / (w * w), -(x - t.left) / (w * w), 0.0]
    } else {
        let w = t.right - t.peak;
        [0.0, (t.right - x) / (w * w), (x - t.peak) / (w * w)]
    }
}

/// Mean squared error and its exact gradient over the batch. The raw layer-5
/// output is used (no duty clamp) so the loss stays differentiable.
pub fn anfis_loss_and_grads(
    model: &Anfis,
    data: &[TrainingSample],
) -> Result<(f64, AnfisGrads), ControlError> {
    if data.is_empty() {
        return Err(ControlError::EmptyTrainingSet);
    }
    let ke = model.mf_e.len();
    let kd = model.mf_de.len();
    let mut loss = 0.0;
    let mut g = AnfisGrads {
        cons: vec![[0.0; 3]; model.rule_count()],
        mf_e: vec![[0.0; 3]; ke],
        mf_de: vec![[0.0; 3]; kd],
    };
    let n = data.len() as f64;
    for s in data {
        let fwd = forward(model, s.e, s.de)?;
        let err = fwd.out - s.duty;
        loss += err * err / n;
        let scale = 2.0 * err / n;
        // consequents
        for i in 0..ke {
            for j in 0..kd {
                let idx = i * kd + j;
                let wn = fwd.w[idx] / fwd.w_sum;
                if wn == 0.0 {
                    continue;
                }
                g.cons[idx][0] += scale * wn * fwd.e_c;
                g.cons[idx][1] += scale * wn * fwd.de_c;
                g.cons[idx][2] += scale * wn;
            }
        }
        // memberships: d out / d w_ij = (y_ij - out) / w_sum
        for i in 0..ke {
            let dmu = triangle_grad(&model.mf_e[i], fwd.e_c);
            if dmu == [0.0; 3] && fwd.mu_e[i] == 0.0 {
                continue;
            }
            let mut acc = 0.0;
            for j in 0..kd {
                let idx = i * kd + j;
                let [p, q, r] = model.cons[idx];
                let y = p * fwd.e_c + q * fwd.de_c + r;
                acc += (y - fwd.out) / fwd.w_sum * fwd.mu_de[j];
            }
            for a in 0..3 {
                g.mf_e[i][a] += scale * acc * dmu[a];
            }
        }
        for j in 0..kd {
            let dmu = triangle_grad(&model.mf_de[j], fwd.de_c);
            if dmu == [0.0; 3] && fwd.mu_de[j] == 0.0 {
                continue;
            }
            let mut acc = 0.0;
            for i in 0..ke {
                let idx = i * kd + j;
                let [p, q, r] = model.cons[idx];
                let y = p * fwd.e_c + q * fwd.de_c + r;
                acc += (y - fwd.out) / fwd.w_sum * fwd.mu_e[i];
            }
            for a in 0..3 {
                g.mf_de[j][a] += scale * acc * dmu[a];
            }
        }
    }
    Ok((loss, g))
}

/// Keep each fan ordered and covering after a gradient step: end peaks stay
/// pinned to the range limits, interior peaks keep a minimum separation,
/// every triangle keeps a minimum half-width, and adjacent feet are stitched
/// so no dead zone opens between peaks.
fn project_fan(fan: &mut [Triangle], lo: f64, hi: f64) {
    let k = fan.len();
    let wmin = 1e-3 * (hi - lo);
    if k >= 2 {
        fan[0].peak = lo;
        fan[k - 1].peak = hi;
        for i in 1..k - 1 {
            fan[i].peak = fan[i].peak.clamp(lo + wmin, hi - wmin);
        }
        for i in 1..k {
            if fan[i].peak < fan[i - 1].peak + wmin {
                fan[i].peak = fan[i - 1].peak + wmin;
            }
        }
    }
    for t in fan.iter_mut() {
        t.left = t.left.min(t.peak - wmin);
        t.right = t.right.max(t.peak + wmin);
    }
    for i in 1..k {
        if fan[i - 1].right < fan[i].left + wmin {
            fan[i - 1].right = fan[i].left + wmin;
        }
    }
}

/// Full-batch gradient descent on consequents and membership abscissae.
/// Steps are preconditioned by the input scales so one learning rate serves
/// both parameter families: slope terms step as 1/scale^2, abscissae as
/// scale^2 times `mf_rate_scale`. One RMSE entry is recorded per epoch,
/// evaluated before that epoch's update.
pub fn anfis_train(
    mut model: Anfis,
    data: &[TrainingSample],
    epochs: usize,
    learning_rate: f64,
) -> Result<(Anfis, Vec<f64>), ControlError> {
    if data.is_empty() {
        return Err(ControlError::EmptyTrainingSet);
    }
    let s1 = 0.5 * (model.e_range.1 - model.e_range.0);
    let s2 = 0.5 * (model.de_range.1 - model.de_range.0);
    let mut history = Vec::with_capacity(epochs);
    for _ in 0..epochs {
        let (loss, g) = anfis_loss_and_grads(&model, data)?;
        history.push(loss.sqrt());
        for (c, gc) in model.cons.iter_mut().zip(g.cons.iter()) {
            c[0] -= learning_rate * gc[0] / (s1 * s1);
            c[1] -= learning_rate * gc[1] / (s2 * s2);
            c[2] -= learning_rate * gc[2];
        }
        if model.mf_rate_scale > 0.0 {
            let re = learning_rate * model.mf_rate_scale * s1 * s1;
            let rd = learning_rate * model.mf_rate_scale * s2 * s2;
            for (t, gt) in model.mf_e.iter_mut().zip(g.mf_e.iter()) {
                t.left -= re * gt[0];
                t.peak -= re * gt[1];
                t.right -= re * gt[2];
            }
            for (t, gt) in model.mf_de.iter_mut().zip(g.mf_de.iter()) {
                t.left -= rd * gt[0];
                t.peak -= rd * gt[1];
                t.right -= rd * gt[2];
            }
            let (lo, hi) = model.e_range;
            project_fan(&mut model.mf_e, lo, hi);
            let (lo, hi) = model.de_range;
            project_fan(&mut model.mf_de, lo, hi);
        }
    }
    Ok((model, history))
}

// ---------------------------------------------------------------- loop

/// Stateful duty source stepping once per switching cycle.
#[derive(Debug, Clone)]
pub enum Controller {
    Pid(PidController),
    Anfis { model: Anfis, prev_e: Option<f64> },
}

impl Controller {
    pub fn step(&mut self, e: f64, dt: f64) -> Result<f64, ControlError> {
        match self {
            Controller::Pid(c) => Ok(pid_step(c, e, dt)),
            Controller::Anfis { model, prev_e } => {
                let de = prev_e.map(|pe| (e - pe) / dt).unwrap_or(0.0);
                *prev_e = Some(e);
                anfis_infer(model, e, de)
            }
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Controller::Pid(_) => "pid",
            Controller::Anfis { .. } => "anfis",
        }
    }
}

/// Setpoint or plant change applied from time `t` on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepEvent {
    pub t: f64,
    pub kind: StepKind,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepKind {
    /// Load resistance change (ohm).
    Load(f64),
    /// Source voltage change (V).
    SourceVoltage(f64),
    /// Reference change (V).
    Reference(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopMetrics {
    /// Earliest time after which the output stays inside the +-2% band of
    /// the final reference; None when the run ends outside the band.
    pub settling_time_s: Option<f64>,
    pub overshoot_pct: f64,
    /// |tail mean - final reference| over the last tenth of the run.
    pub steady_state_error_v: f64,
}

/// Metrics from a recorded output series; shared by the simulator and any
/// re-analysis of the exported series.
pub fn loop_metrics(t: &[f64], vo: &[f64], vref_final: f64) -> LoopMetrics {
    let band = 0.02 * vref_final.abs();
    let mut settle_idx = None;
    for k in (0..vo.len()).rev() {
        if (vo[k] - vref_final).abs() > band {
            break;
        }
        settle_idx = Some(k);
    }
    let peak = vo.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let overshoot_pct = if vref_final != 0.0 {
        ((peak - vref_final).max(0.0)) / vref_final.abs() * 100.0
    } else {
        0.0
    };
    let tail = (vo.len() / 10).max(1);
    let mean_tail = vo[vo.len() - tail..].iter().sum::<f64>() / tail as f64;
    LoopMetrics {
        settling_time_s: settle_idx.map(|k| t[k]),
        overshoot_pct,
        steady_state_error_v: (mean_tail - vref_final).abs(),
    }
}

#[derive(Debug, Clone)]
pub struct ClosedLoopResult {
    pub t: Vec<f64>,
    pub vo: Vec<f64>,
    pub duty: Vec<f64>,
    pub e: Vec<f64>,
    pub vref_final: f64,
    pub metrics: LoopMetrics,
}

fn quantize_duty(d: f64) -> f64 {
    let step = (DUTY_MAX - DUTY_MIN) / (DUTY_GRID - 1) as f64;
    let idx = ((d - DUTY_MIN) / step).round().clamp(0.0, (DUTY_GRID - 1) as f64);
    DUTY_MIN + idx * step
}

/// Cycle-synchronous closed loop on the reconciled plant. The controller
/// runs once per switching cycle and the duty is held for the cycle, so the
/// plant advance is the exact two-phase affine map; operators are cached per
/// quantized duty and plant configuration.
///
/// The plant starts on its open-loop periodic orbit at the controller's
/// nominal duty and the reference ramps linearly from that orbit's output
/// voltage to `vref` over `DEFAULT_RAMP_S`; a cold start from the zero state
/// would kick the lightly damped output resonance hard enough to ring for
/// the whole run. Step events apply after their timestamps. Divergence
/// reports the last stable time.
pub fn closed_loop_simulate(
    p: &ConverterParams,
    controller: &mut Controller,
    vref: f64,
    profile: &[StepEvent],
    horizon_s: f64,
) -> Result<ClosedLoopResult, ControlError> {
    p.validate()?;
    let ts = p.ts();
    let n_cycles = (horizon_s / ts).ceil() as usize;
    let mut events: Vec<StepEvent> = profile.to_vec();
    events.sort_by(|a, b| a.t.total_cmp(&b.t));
    let mut next_event = 0usize;

    let mut pk = *p;
    let mut vref_now = vref;

    let d_start = match controller {
        Controller::Pid(c) => c.d_nom,
        Controller::Anfis { .. } => p.d,
    };
    let p_start = pk.with_duty(quantize_duty(d_start.clamp(DUTY_MIN, DUTY_MAX)));
    let u_start = SourceInputs::from_params(&p_start);
    let start = crate::sim::find_steady_state(
        &p_start,
        ModelVariant::Reconciled,
        &u_start,
        &crate::sim::SimConfig::default(),
    )?;
    let mut x = start.x_periodic;
    let vref0 = x[VCO];

    let mut cache: HashMap<(u64, u64, u64), (Mat7, Vec7, Mat7, Vec7)> = HashMap::new();

    let mut t_series = Vec::with_capacity(n_cycles);
    let mut vo_series = Vec::with_capacity(n_cycles);
    let mut d_series = Vec::with_capacity(n_cycles);
    let mut e_series = Vec::with_capacity(n_cycles);

    for k in 0..n_cycles {
        let t = k as f64 * ts;
        while next_event < events.len() && events[next_event].t <= t {
            match events[next_event].kind {
                StepKind::Load(r) => pk.r = r,
                StepKind::SourceVoltage(v) => pk.v_pv = v,
                StepKind::Reference(v) => vref_now = v,
            }
            next_event += 1;
        }
        let ramp = (t / DEFAULT_RAMP_S).min(1.0);
        let reference = vref0 + (vref_now - vref0) * ramp;
        let vo = x[VCO];
        let e = reference - vo;
        let d_cmd = controller.step(e, ts)?;
        let d_q = quantize_duty(d_cmd.clamp(DUTY_MIN, DUTY_MAX));

        let key = (d_q.to_bits(), pk.r.to_bits(), pk.v_pv.to_bits());
        let (f_on, c_on, f_off, c_off) = *cache.entry(key).or_insert_with(|| {
            let pq = pk.with_duty(d_q);
            let u = SourceInputs::from_params(&pq);
            let on = build_phase_model(&pq, SwitchPhase::On, ModelVariant::Reconciled);
            let off = build_phase_model(&pq, SwitchPhase::Off, ModelVariant::Reconciled);
            let (f_on, c_on) = affine_step(&on.a, &on.affine(&u), SwitchPhase::On.duration(&pq));
            let (f_off, c_off) =
                affine_step(&off.a, &off.affine(&u), SwitchPhase::Off.duration(&pq));
            (f_on, c_on, f_off, c_off)
        });

        t_series.push(t);
        vo_series.push(vo);
        d_series.push(d_q);
        e_series.push(e);

        x = f_off * (f_on * x + c_on) + c_off;
        if !x.iter().all(|v| v.is_finite()) {
            return Err(ControlError::LoopDiverged { t_last: t });
        }
    }

    let metrics = loop_metrics(&t_series, &vo_series, vref_now);
    Ok(ClosedLoopResult {
        t: t_series,
        vo: vo_series,
        duty: d_series,
        e: e_series,
        vref_final: vref_now,
        metrics,
    })
}

// ---------------------------------------------------------------- cloning

/// One recorded closed-loop run for data generation.
#[derive(Debug, Clone)]
pub struct TrainingScenario {
    pub vref: f64,
    pub profile: Vec<StepEvent>,
    pub horizon_s: f64,
    /// Recording starts here so ramp-in transients are excluded.
    pub record_from_s: f64,
    /// Keep every n-th cycle.
    pub decimate: usize,
}

/// Reference-perturbation plan around `vref`: +-1 V and +-2 V steps after
/// the loop has settled, recorded at a 30-cycle stride.
pub fn default_training_scenarios(vref: f64) -> Vec<TrainingScenario> {
    vec![TrainingScenario {
        vref,
        profile: vec![
            StepEvent { t: 0.9, kind: StepKind::Reference(vref + 1.0) },
            StepEvent { t: 1.1, kind: StepKind::Reference(vref - 1.0) },
            StepEvent { t: 1.3, kind: StepKind::Reference(vref + 2.0) },
            StepEvent { t: 1.5, kind: StepKind::Reference(vref - 2.0) },
            StepEvent { t: 1.7, kind: StepKind::Reference(vref) },
        ],
        horizon_s: 2.0,
        record_from_s: 0.8,
        decimate: 30,
    }]
}

/// Run the PID through each scenario and record (e, de, duty) tuples.
/// Diverging scenarios are skipped with a warning instead of failing the
/// batch. Fully deterministic.
pub fn build_training_set(
    p: &ConverterParams,
    pid: &PidController,
    scenarios: &[TrainingScenario],
) -> (Vec<TrainingSample>, Vec<String>) {
    let mut samples = Vec::new();
    let mut warnings = Vec::new();
    let ts = p.ts();
    for (si, sc) in scenarios.iter().enumerate() {
        let mut ctrl = Controller::Pid({
            let mut c = pid.clone();
            c.reset();
            c
        });
        match closed_loop_simulate(p, &mut ctrl, sc.vref, &sc.profile, sc.horizon_s) {
            Ok(run) => {
                let stride = sc.decimate.max(1);
                let mut kept = 0usize;
                for k in 0..run.t.len() {
                    if run.t[k] < sc.record_from_s {
                        continue;
                    }
                    if kept % stride == 0 {
                        let de = if k > 0 { (run.e[k] - run.e[k - 1]) / ts } else { 0.0 };
                        samples.push(TrainingSample {
                            e: run.e[k],
                            de,
                            duty: run.duty[k],
                        });
                    }
                    kept += 1;
                }
            }
            Err(err) => warnings.push(format!("scenario {si} skipped: {err}")),
        }
    }
    (samples, warnings)
}

#[derive(Debug, Clone)]
pub struct CloningOutcome {
    pub model: Anfis,
    pub d_settled: f64,
    pub samples: Vec<TrainingSample>,
    pub rmse_history: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Two-stage behavior cloning. Stage 1 settles the tuned PID loop at the
/// reference and reads off the settled duty. Stage 2 replays reference
/// perturbations under a proportional-only PID biased at that duty, records
/// the tuples, and fits the rule base to them with frozen membership fans
/// (the grid already covers the perturbation range; freezing keeps the
/// regression convex-like and monotone).
pub fn train_cloned_controller(
    p: &ConverterParams,
    vref: f64,
    epochs: usize,
    learning_rate: f64,
) -> Result<CloningOutcome, ControlError> {
    let tuned = PidController::tuned_default();
    let mut stage1 = Controller::Pid(tuned.clone());
    let settle = closed_loop_simulate(p, &mut stage1, vref, &[], 1.2)?;
    let d_settled = *settle.duty.last().expect("settle run is nonempty");

    let cloner = tuned.proportional_at(d_settled);
    let scenarios = default_training_scenarios(vref);
    let (samples, warnings) = build_training_set(p, &cloner, &scenarios);
    if samples.is_empty() {
        return Err(ControlError::EmptyTrainingSet);
    }

    let mut model = Anfis::grid_init(5, DEFAULT_E_RANGE, DEFAULT_DE_RANGE, d_settled);
    model.mf_rate_scale = 0.0;
    let (model, rmse_history) = anfis_train(model, &samples, epochs, learning_rate)?;
    Ok(CloningOutcome {
        model,
        d_settled,
        samples,
        rmse_history,
        warnings,
    })
}

// ---------------------------------------------------------------- PV

/// Photovoltaic panel plate data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PvPanel {
    pub v_mp: f64,
    pub i_mp: f64,
    pub i_sc: f64,
    pub v_oc: f64,
    /// Plate maximum power as published; conflicts with v_mp * i_mp.
    pub p_max_published: f64,
}

/// The bench panel's plate values.
pub fn bench_pv_panel() -> PvPanel {
    PvPanel {
        v_mp: 36.3,
        i_mp: 7.35,
        i_sc: 8.3,
        v_oc: 37.8,
        p_max_published: 213.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PvFit {
    /// Lumped diode scale n*Vt (V).
    pub a: f64,
    /// Saturation current (A).
    pub i0: f64,
    /// |I(Vmp) - Imp| / Imp achieved by the fit.
    pub residual: f64,
    /// v_mp * i_mp, for comparison against the plate maximum power.
    pub vmp_imp_w: f64,
}

fn ln_expm1(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp_m1().ln()
    }
}

/// Fit I(V) = Isc - I0 (exp(V/a) - 1) through (Voc, 0) and (Vmp, Imp).
/// Eliminating I0 leaves one equation in a, monotone in a, solved by
/// bisection in log space to dodge the exp overflow at small a.
pub fn fit_single_diode(panel: &PvPanel) -> Result<PvFit, ControlError> {
    if !(panel.i_sc > panel.i_mp && panel.i_mp > 0.0 && panel.v_oc > panel.v_mp && panel.v_mp > 0.0)
    {
        return Err(ControlError::Domain {
            what: "panel plate values must satisfy 0 < Imp < Isc and 0 < Vmp < Voc".into(),
        });
    }
    let target = ((panel.i_sc - panel.i_mp) / panel.i_sc).ln();
    let g = |a: f64| ln_expm1(panel.v_mp / a) - ln_expm1(panel.v_oc / a) - target;
    let (mut lo, mut hi) = (0.05, 20.0);
    if g(lo) > 0.0 || g(hi) < 0.0 {
        return Err(ControlError::Domain {
            what: "single-diode bracket failed for these plate values".into(),
        });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let a = 0.5 * (lo + hi);
    let i0 = panel.i_sc / (panel.v_oc / a).exp_m1();
    let i_at_vmp = panel.i_sc - i0 * (panel.v_mp / a).exp_m1();
    Ok(PvFit {
        a,
        i0,
        residual: (i_at_vmp - panel.i_mp).abs() / panel.i_mp,
        vmp_imp_w: panel.v_mp * panel.i_mp,
    })
}

/// Terminal current at voltage V on the fitted single-diode curve.
pub fn pv_operating_point(panel: &PvPanel, v: f64) -> Result<f64, ControlError> {
    if !(0.0..=panel.v_oc).contains(&v) {
        return Err(ControlError::Domain {
            what: format!("V = {v} outside [0, Voc = {}]", panel.v_oc),
        });
    }
    let fit = fit_single_diode(panel)?;
    Ok(panel.i_sc - fit.i0 * (v / fit.a).exp_m1())
}

#[derive(Debug, Error)]
pub enum ControlError {
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error("no rule fires at (e = {e}, de = {de}); membership fans do not cover the input")]
    CoverageHole { e: f64, de: f64 },
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("start orbit: {0}")]
    StartOrbit(#[from] crate::sim::SimError),
    #[error("closed loop diverged; last stable time {t_last} s")]
    LoopDiverged { t_last: f64 },
    #[error("{what}")]
    Domain { what: String },
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn pid_proportional_only() {
        let mut c = PidController::new(0.1, 0.0, 0.0, 0.4);
        assert_relative_eq!(pid_step(&mut c, 1.0, 2e-5), 0.5, max_relative = 1e-12);
    }

    #[test]
    fn pid_zero_error_holds_output() {
        let mut c = PidController::tuned_default();
        let first = pid_step(&mut c, 0.0, 2e-5);
        for _ in 0..10 {
            assert_eq!(pid_step(&mut c, 0.0, 2e-5), first);
        }
    }

    #[test]
    fn pid_saturation_freezes_integrator() {
        let mut c = PidController::new(0.1, 10.0, 0.0, 0.4);
        let dt = 1e-2;
        for _ in 0..3 {
            let out = pid_step(&mut c, 1e4, dt);
            assert_eq!(out, c.d_max);
            assert_eq!(c.integ, 0.0, "integrator must not wind while clamped");
        }
    }

    #[test]
    fn single_rule_network_is_linear() {
        let mut m = Anfis::grid_init(1, (-3.0, 3.0), (-500.0, 500.0), 0.0);
        m.cons[0] = [0.05, 1e-4, 0.4];
        let (e, de) = (1.5, -200.0);
        let want = 0.05 * e + 1e-4 * de + 0.4;
        assert_relative_eq!(anfis_infer(&m, e, de).unwrap(), want, max_relative = 1e-12);
    }

    #[test]
    fn fresh_grid_returns_bias_at_origin() {
        let m = Anfis::grid_init(5, DEFAULT_E_RANGE, DEFAULT_DE_RANGE, 0.37);
        assert_relative_eq!(anfis_infer(&m, 0.0, 0.0).unwrap(), 0.37, max_relative = 1e-12);
    }

    #[test]
    fn normalized_strengths_sum_to_one() {
        let m = Anfis::grid_init(5, DEFAULT_E_RANGE, DEFAULT_DE_RANGE, 0.4);
        let mut xs = 0.123_f64;
        for _ in 0..100 {
            // cheap deterministic scatter over the covered box
            xs = (xs * 9301.0 + 49297.0) % 233280.0;
            let e = -3.0 + 6.0 * (xs / 233280.0);
            xs = (xs * 9301.0 + 49297.0) % 233280.0;
            let de = -500.0 + 1000.0 * (xs / 233280.0);
            let fwd = forward(&m, e, de).unwrap();
            let wn_sum: f64 = fwd.w.iter().map(|w| w / fwd.w_sum).sum();
            assert_relative_eq!(wn_sum, 1.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn clamped_inputs_keep_coverage() {
        let m = Anfis::grid_init(5, DEFAULT_E_RANGE, DEFAULT_DE_RANGE, 0.4);
        assert!(anfis_infer(&m, 1e6, -1e9).is_ok());
        assert!(anfis_infer(&m, -1e6, 1e9).is_ok());
    }

    #[test]
    fn zero_epochs_is_identity() {
        let m = Anfis::grid_init(3, (-1.0, 1.0), (-1.0, 1.0), 0.5);
        let data = vec![TrainingSample { e: 0.2, de: 0.1, duty: 0.6 }];
        let (out, hist) = anfis_train(m.clone(), &data, 0, 0.1).unwrap();
        assert_eq!(out, m);
        assert!(hist.is_empty());
    }

    #[test]
    fn empty_training_set_rejected() {
        let m = Anfis::grid_init(3, (-1.0, 1.0), (-1.0, 1.0), 0.5);
        assert!(matches!(
            anfis_train(m, &[], 5, 0.1),
            Err(ControlError::EmptyTrainingSet)
        ));
    }

    #[test]
    fn vanishing_rate_leaves_parameters() {
        let m = Anfis::grid_init(3, (-1.0, 1.0), (-1.0, 1.0), 0.5);
        let data = vec![
            TrainingSample { e: 0.2, de: 0.1, duty: 0.6 },
            TrainingSample { e: -0.4, de: 0.0, duty: 0.45 },
        ];
        let (out, _) = anfis_train(m.clone(), &data, 3, 0.0).unwrap();
        for (a, b) in out.cons.iter().zip(m.cons.iter()) {
            for k in 0..3 {
                assert_eq!(a[k], b[k]);
            }
        }
    }

    #[test]
    fn duty_quantizer_is_idempotent_and_bounded() {
        for d in [0.049_f64, 0.05, 0.31415, 0.5, 0.95, 1.2] {
            let q = quantize_duty(d.clamp(DUTY_MIN, DUTY_MAX));
            assert!((DUTY_MIN..=DUTY_MAX).contains(&q));
            assert_eq!(quantize_duty(q), q);
        }
    }

    #[test]
    fn metrics_from_a_synthetic_series() {
        let t: Vec<f64> = (0..100).map(|k| k as f64 * 0.01).collect();
        // rises to 10, peaks at 11, settles to 10.05
        let vo: Vec<f64> = t
            .iter()
            .map(|&t| {
                if t < 0.3 {
                    t / 0.3 * 11.0
                } else if t < 0.5 {
                    11.0 - (t - 0.3) / 0.2 * 0.95
                } else {
                    10.05
                }
            })
            .collect();
        let m = loop_metrics(&t, &vo, 10.0);
        assert_relative_eq!(m.overshoot_pct, 10.0, max_relative = 1e-9);
        assert_relative_eq!(m.steady_state_error_v, 0.05, max_relative = 1e-9);
        let settle = m.settling_time_s.unwrap();
        assert!(settle > 0.2 && settle < 0.5, "settle = {settle}");
    }

    #[test]
    fn pv_fit_honors_plate_corners() {
        let panel = bench_pv_panel();
        assert_relative_eq!(pv_operating_point(&panel, 0.0).unwrap(), 8.3, max_relative = 1e-12);
        let at_voc = pv_operating_point(&panel, panel.v_oc).unwrap();
        assert!(at_voc.abs() < 1e-9, "I(Voc) = {at_voc}");
        let at_vmp = pv_operating_point(&panel, panel.v_mp).unwrap();
        assert_relative_eq!(at_vmp, panel.i_mp, max_relative = 1e-2);
        let fit = fit_single_diode(&panel).unwrap();
        assert!(fit.residual < 1e-9, "fit residual {}", fit.residual);
        assert_relative_eq!(fit.vmp_imp_w, 266.805, max_relative = 1e-9);
    }

    #[test]
    fn pv_rejects_out_of_range_voltage() {
        let panel = bench_pv_panel();
        assert!(pv_operating_point(&panel, 40.0).is_err());
        assert!(pv_operating_point(&panel, -1.0).is_err());
    }
}
