//! Run configuration: a versioned JSON document naming one scenario, the
//! converter parameters (inline or borrowed from a shipped preset), an
//! output directory, and a seed. `validate` reports every violated
//! invariant with a field path and has no side effects.

use qboost_core::control::{DEFAULT_EPOCHS, DEFAULT_LR};
use qboost_core::losses::{bench_loss_inputs, LossInputs};
use qboost_core::smallsignal::InputChannel;
use qboost_core::{ConverterParams, ModelVariant, Parasitics};
use serde::Deserialize;

/// Schema revision this build reads.
pub const SCHEMA_VERSION: u32 = 1;

/// Shipped presets, embedded so name references resolve from any directory.
pub const PRESETS: &[(&str, &str)] = &[
    ("table2_pv", include_str!("../presets/table2_pv.json")),
    ("table3_sim", include_str!("../presets/table3_sim.json")),
    ("table4_hw", include_str!("../presets/table4_hw.json")),
];

pub fn preset_source(name: &str) -> Option<&'static str> {
    PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, body)| *body)
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema: u32,
    pub seed: u64,
    pub out_dir: String,
    #[serde(default)]
    pub params: Option<ParamsBlock>,
    /// Borrow the params block of a shipped preset instead of inlining one.
    #[serde(default)]
    pub params_preset: Option<String>,
    #[serde(default)]
    pub simulate: Option<SimulateBlock>,
    #[serde(default)]
    pub design: Option<DesignBlock>,
    #[serde(default)]
    pub stress: Option<StressBlock>,
    #[serde(default)]
    pub bode: Option<BodeBlock>,
    #[serde(default)]
    pub losses: Option<LossesBlock>,
    #[serde(default)]
    pub compare: Option<CompareBlock>,
    #[serde(default)]
    pub train: Option<TrainBlock>,
    #[serde(default)]
    pub closedloop: Option<ClosedLoopBlock>,
}

/// Plant parameters with the symbol spellings used in the published tables.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsBlock {
    #[serde(rename = "L1")]
    pub l1: f64,
    #[serde(rename = "L2")]
    pub l2: f64,
    #[serde(rename = "L3")]
    pub l3: f64,
    #[serde(rename = "L4")]
    pub l4: f64,
    #[serde(rename = "C1")]
    pub c1: f64,
    #[serde(rename = "C2")]
    pub c2: f64,
    #[serde(rename = "Co")]
    pub co: f64,
    #[serde(rename = "R")]
    pub r: f64,
    #[serde(rename = "Vpv")]
    pub v_pv: f64,
    #[serde(rename = "Vbat")]
    pub v_bat: f64,
    pub fs: f64,
    #[serde(rename = "D")]
    pub d: f64,
    #[serde(default)]
    pub parasitics: ParasiticsBlock,
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParasiticsBlock {
    #[serde(rename = "Rds_on", default)]
    pub rds_on: f64,
    #[serde(rename = "Vf_diode", default)]
    pub vf_diode: f64,
    #[serde(rename = "RL_copper", default)]
    pub rl_copper: f64,
    #[serde(default)]
    pub esr_cap: f64,
}

impl ParamsBlock {
    pub fn to_core(self) -> ConverterParams {
        ConverterParams {
            l1: self.l1,
            l2: self.l2,
            l3: self.l3,
            l4: self.l4,
            c1: self.c1,
            c2: self.c2,
            co: self.co,
            r: self.r,
            v_pv: self.v_pv,
            v_bat: self.v_bat,
            fs: self.fs,
            d: self.d,
            parasitics: Parasitics {
                rds_on: self.parasitics.rds_on,
                vf_diode: self.parasitics.vf_diode,
                rl_copper: self.parasitics.rl_copper,
                esr_cap: self.parasitics.esr_cap,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VariantName {
    Reconciled,
    AsPrinted,
}

impl VariantName {
    pub fn to_core(self) -> ModelVariant {
        match self {
            VariantName::Reconciled => ModelVariant::Reconciled,
            VariantName::AsPrinted => ModelVariant::AsPrinted,
        }
    }
}

fn default_variant() -> VariantName {
    VariantName::Reconciled
}

fn default_steps() -> usize {
    64
}

/// Periodic steady state at the configured duty, plus an optional duty sweep.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateBlock {
    #[serde(default = "default_variant")]
    pub variant: VariantName,
    #[serde(default = "default_steps")]
    pub steps_per_phase: usize,
    #[serde(default)]
    pub sweep_duties: Vec<f64>,
}

/// Duty inversion and ripple-budget component sizing; an optional panel
/// block adds a single-diode fit and an I-V curve, and its Vmp becomes the
/// design input voltage.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignBlock {
    #[serde(rename = "Vo_target")]
    pub vo_target: f64,
    /// Inductor current ripple budget (A).
    pub delta_i: f64,
    /// Capacitor voltage ripple budget (V).
    pub delta_v: f64,
    #[serde(default)]
    pub pv: Option<PvBlock>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PvBlock {
    #[serde(rename = "Vmp")]
    pub v_mp: f64,
    #[serde(rename = "Imp")]
    pub i_mp: f64,
    #[serde(rename = "Isc")]
    pub i_sc: f64,
    #[serde(rename = "Voc")]
    pub v_oc: f64,
    #[serde(rename = "P_max_plate")]
    pub p_max_plate: f64,
}

/// Published device stress identities at a load point.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StressBlock {
    #[serde(rename = "Io")]
    pub io: f64,
    /// Output voltage the blocking expressions use; defaults to (3-D)*Vpv.
    #[serde(rename = "Vo", default)]
    pub vo: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChannelName {
    SourceVoltage,
    SourceCurrent,
    Duty,
}

impl ChannelName {
    pub fn to_core(self) -> InputChannel {
        match self {
            ChannelName::SourceVoltage => InputChannel::SourceVoltage,
            ChannelName::SourceCurrent => InputChannel::SourceCurrent,
            ChannelName::Duty => InputChannel::Duty,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BodeMethod {
    /// Evaluate the reduced rational form.
    Rational,
    /// Solve the resolvent system at each frequency.
    Pointwise,
}

fn default_f_min() -> f64 {
    1e-2
}
fn default_f_max() -> f64 {
    1e6
}
fn default_points() -> usize {
    200
}
fn default_method() -> BodeMethod {
    BodeMethod::Rational
}

/// Frequency response of the averaged model around its equilibrium.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BodeBlock {
    pub channel: ChannelName,
    #[serde(default = "default_f_min")]
    pub f_min_hz: f64,
    #[serde(default = "default_f_max")]
    pub f_max_hz: f64,
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default = "default_method")]
    pub method: BodeMethod,
}

/// Loss-chain inputs; unset fields fall back to the published worked
/// example at 200 W.
#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossesBlock {
    #[serde(rename = "P_out", default)]
    pub p_out: Option<f64>,
    #[serde(default)]
    pub i_d_rms: Option<f64>,
    #[serde(default)]
    pub duty: Option<f64>,
    #[serde(default)]
    pub rds_on: Option<f64>,
    #[serde(default)]
    pub v_sw: Option<f64>,
    #[serde(default)]
    pub i_sw: Option<f64>,
    #[serde(default)]
    pub t_on: Option<f64>,
    #[serde(default)]
    pub t_off: Option<f64>,
    #[serde(default)]
    pub fsw: Option<f64>,
    #[serde(default)]
    pub i_d_avg: Option<f64>,
    #[serde(default)]
    pub vf: Option<f64>,
    #[serde(default)]
    pub i_l_rms: Option<f64>,
    #[serde(default)]
    pub r_l: Option<f64>,
    #[serde(default)]
    pub i_co_rms: Option<f64>,
    #[serde(default)]
    pub esr: Option<f64>,
    #[serde(default)]
    pub copper_quadratic: Option<bool>,
}

impl LossesBlock {
    pub fn resolve(&self) -> (LossInputs, f64) {
        let mut inp = bench_loss_inputs();
        let set = |dst: &mut f64, src: Option<f64>| {
            if let Some(v) = src {
                *dst = v;
            }
        };
        set(&mut inp.i_d_rms, self.i_d_rms);
        set(&mut inp.duty, self.duty);
        set(&mut inp.rds_on, self.rds_on);
        set(&mut inp.v_sw, self.v_sw);
        set(&mut inp.i_sw, self.i_sw);
        set(&mut inp.t_on, self.t_on);
        set(&mut inp.t_off, self.t_off);
        set(&mut inp.fsw, self.fsw);
        set(&mut inp.i_d_avg, self.i_d_avg);
        set(&mut inp.vf, self.vf);
        set(&mut inp.i_l_rms, self.i_l_rms);
        set(&mut inp.r_l, self.r_l);
        set(&mut inp.i_co_rms, self.i_co_rms);
        set(&mut inp.esr, self.esr);
        if let Some(q) = self.copper_quadratic {
            inp.copper_quadratic = q;
        }
        (inp, self.p_out.unwrap_or(qboost_core::losses::PUBLISHED_P_OUT_W))
    }
}

/// Topology comparison table plus the literal-vs-reconciled model ledger.
#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareBlock {}

/// Controller-cloning pipeline: settle a tuned loop, record teacher data,
/// fit the rule base, rerun the clone.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainBlock {
    pub vref: f64,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
}

fn default_epochs() -> usize {
    DEFAULT_EPOCHS
}
fn default_lr() -> f64 {
    DEFAULT_LR
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControllerName {
    Pid,
    Anfis,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKindName {
    Load,
    SourceVoltage,
    Reference,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventBlock {
    pub t: f64,
    pub kind: EventKindName,
    pub value: f64,
}

fn default_horizon() -> f64 {
    1.5
}

/// Closed-loop regulation run; the anfis controller is cloned from the
/// tuned loop before the run.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClosedLoopBlock {
    pub controller: ControllerName,
    pub vref: f64,
    #[serde(default = "default_horizon")]
    pub horizon_s: f64,
    #[serde(default)]
    pub kp: Option<f64>,
    #[serde(default)]
    pub ki: Option<f64>,
    #[serde(default)]
    pub kd: Option<f64>,
    /// Nominal duty the loop starts from; defaults to params.D.
    #[serde(default)]
    pub d_init: Option<f64>,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default)]
    pub events: Vec<EventBlock>,
}

/// The single scenario a config selects.
#[derive(Debug, Clone)]
pub enum Scenario {
    Simulate(SimulateBlock),
    Design(DesignBlock),
    Stress(StressBlock),
    Bode(BodeBlock),
    Losses(LossesBlock),
    Compare(CompareBlock),
    Train(TrainBlock),
    ClosedLoop(ClosedLoopBlock),
}

impl Scenario {
    pub fn kind(&self) -> &'static str {
        match self {
            Scenario::Simulate(_) => "simulate",
            Scenario::Design(_) => "design",
            Scenario::Stress(_) => "stress",
            Scenario::Bode(_) => "bode",
            Scenario::Losses(_) => "losses",
            Scenario::Compare(_) => "compare",
            Scenario::Train(_) => "train",
            Scenario::ClosedLoop(_) => "closedloop",
        }
    }
}

/// A config that passed validation, with presets resolved.
#[derive(Debug, Clone)]
pub struct Validated {
    pub params: ConverterParams,
    pub scenario: Scenario,
    pub out_dir: String,
    pub seed: u64,
}

/// Parse a config document. serde_json's message carries line and column.
pub fn parse(text: &str) -> Result<RunConfig, String> {
    serde_json::from_str(text).map_err(|e| format!("parse error: {e}"))
}

/// Check every invariant; either a resolved config or the full error list.
pub fn validate(cfg: &RunConfig) -> Result<Validated, Vec<String>> {
    let mut errs: Vec<String> = Vec::new();

    if cfg.schema != SCHEMA_VERSION {
        errs.push(format!(
            "schema: unsupported version {}, this build reads {}",
            cfg.schema, SCHEMA_VERSION
        ));
    }
    if cfg.out_dir.is_empty() {
        errs.push("out_dir: must be non-empty".to_string());
    }

    let params = resolve_params(cfg, &mut errs);
    if let Some(p) = &params {
        for e in p.validate_all() {
            errs.push(e.to_string());
        }
    }

    let scenario = resolve_scenario(cfg, &mut errs);
    if let (Some(s), Some(p)) = (&scenario, &params) {
        validate_scenario(s, p, &mut errs);
    }

    match (params, scenario) {
        (Some(params), Some(scenario)) if errs.is_empty() => Ok(Validated {
            params,
            scenario,
            out_dir: cfg.out_dir.clone(),
            seed: cfg.seed,
        }),
        _ => Err(errs),
    }
}

fn resolve_params(cfg: &RunConfig, errs: &mut Vec<String>) -> Option<ConverterParams> {
    match (&cfg.params, &cfg.params_preset) {
        (Some(p), None) => Some(p.to_core()),
        (None, Some(name)) => match preset_source(name) {
            None => {
                let known: Vec<&str> = PRESETS.iter().map(|(n, _)| *n).collect();
                errs.push(format!(
                    "params_preset: unknown preset \"{}\"; shipped presets are {}",
                    name,
                    known.join(", ")
                ));
                None
            }
            Some(body) => {
                // shipped presets are embedded and parse by construction
                let preset: RunConfig =
                    serde_json::from_str(body).expect("shipped preset parses");
                match preset.params {
                    Some(p) => Some(p.to_core()),
                    None => {
                        errs.push(format!(
                            "params_preset: preset \"{}\" carries no inline params block",
                            name
                        ));
                        None
                    }
                }
            }
        },
        (Some(_), Some(_)) => {
            errs.push(
                "params: give either an inline block or params_preset, not both".to_string(),
            );
            None
        }
        (None, None) => {
            errs.push("params: required (inline block or params_preset)".to_string());
            None
        }
    }
}

fn resolve_scenario(cfg: &RunConfig, errs: &mut Vec<String>) -> Option<Scenario> {
    let mut found: Vec<Scenario> = Vec::new();
    if let Some(b) = &cfg.simulate {
        found.push(Scenario::Simulate(b.clone()));
    }
    if let Some(b) = &cfg.design {
        found.push(Scenario::Design(b.clone()));
    }
    if let Some(b) = &cfg.stress {
        found.push(Scenario::Stress(*b));
    }
    if let Some(b) = &cfg.bode {
        found.push(Scenario::Bode(*b));
    }
    if let Some(b) = &cfg.losses {
        found.push(Scenario::Losses(*b));
    }
    if let Some(b) = &cfg.compare {
        found.push(Scenario::Compare(*b));
    }
    if let Some(b) = &cfg.train {
        found.push(Scenario::Train(*b));
    }
    if let Some(b) = &cfg.closedloop {
        found.push(Scenario::ClosedLoop(b.clone()));
    }
    match found.len() {
        1 => found.into_iter().next(),
        0 => {
            errs.push(
                "scenario: exactly one of simulate | design | stress | bode | losses | compare | train | closedloop is required"
                    .to_string(),
            );
            None
        }
        _ => {
            let names: Vec<&str> = found.iter().map(|s| s.kind()).collect();
            errs.push(format!(
                "scenario: exactly one block allowed, found {}",
                names.join(" and ")
            ));
            None
        }
    }
}

fn check_pos(errs: &mut Vec<String>, path: &str, v: f64) {
    if !(v > 0.0) || !v.is_finite() {
        errs.push(format!("{path}: must be strictly positive, got {v}"));
    }
}

fn validate_scenario(s: &Scenario, p: &ConverterParams, errs: &mut Vec<String>) {
    match s {
        Scenario::Simulate(b) => {
            if b.steps_per_phase < 2 {
                errs.push(format!(
                    "simulate.steps_per_phase: need at least 2, got {}",
                    b.steps_per_phase
                ));
            }
            for (i, d) in b.sweep_duties.iter().enumerate() {
                if !(*d > 0.0 && *d < 1.0) {
                    errs.push(format!(
                        "simulate.sweep_duties[{i}]: duty must lie in (0,1), got {d}"
                    ));
                }
            }
        }
        Scenario::Design(b) => {
            check_pos(errs, "design.delta_i", b.delta_i);
            check_pos(errs, "design.delta_v", b.delta_v);
            let vin = b.pv.map(|pv| pv.v_mp).unwrap_or(p.v_pv);
            if vin > 0.0 {
                let m = b.vo_target / vin;
                if !(m > 2.0 && m < 3.0) {
                    errs.push(format!(
                        "design.Vo_target: gain {m:.4} at Vin = {vin} V falls outside the reachable (2,3) band"
                    ));
                }
            }
            if let Some(pv) = &b.pv {
                if !(pv.i_sc > pv.i_mp && pv.i_mp > 0.0 && pv.v_oc > pv.v_mp && pv.v_mp > 0.0) {
                    errs.push(
                        "design.pv: plate values must satisfy 0 < Imp < Isc and 0 < Vmp < Voc"
                            .to_string(),
                    );
                }
                check_pos(errs, "design.pv.P_max_plate", pv.p_max_plate);
            }
        }
        Scenario::Stress(b) => {
            check_pos(errs, "stress.Io", b.io);
            if let Some(vo) = b.vo {
                check_pos(errs, "stress.Vo", vo);
            }
        }
        Scenario::Bode(b) => {
            check_pos(errs, "bode.f_min_hz", b.f_min_hz);
            if !(b.f_max_hz > b.f_min_hz) {
                errs.push(format!(
                    "bode.f_max_hz: must exceed f_min_hz = {}, got {}",
                    b.f_min_hz, b.f_max_hz
                ));
            }
            if b.points < 2 {
                errs.push(format!("bode.points: need at least 2, got {}", b.points));
            }
        }
        Scenario::Losses(b) => {
            let (inp, p_out) = b.resolve();
            check_pos(errs, "losses.P_out", p_out);
            if !(inp.duty > 0.0 && inp.duty < 1.0) {
                errs.push(format!(
                    "losses.duty: duty must lie in (0,1), got {}",
                    inp.duty
                ));
            }
            let nonneg = [
                ("losses.i_d_rms", inp.i_d_rms),
                ("losses.rds_on", inp.rds_on),
                ("losses.v_sw", inp.v_sw),
                ("losses.i_sw", inp.i_sw),
                ("losses.t_on", inp.t_on),
                ("losses.t_off", inp.t_off),
                ("losses.i_d_avg", inp.i_d_avg),
                ("losses.vf", inp.vf),
                ("losses.i_l_rms", inp.i_l_rms),
                ("losses.r_l", inp.r_l),
                ("losses.i_co_rms", inp.i_co_rms),
                ("losses.esr", inp.esr),
            ];
            for (path, v) in nonneg {
                if v < 0.0 || !v.is_finite() {
                    errs.push(format!("{path}: must be finite and >= 0, got {v}"));
                }
            }
            check_pos(errs, "losses.fsw", inp.fsw);
        }
        Scenario::Compare(_) => {}
        Scenario::Train(b) => {
            let m = b.vref / p.v_pv;
            if !(m > 2.0 && m < 3.0) {
                errs.push(format!(
                    "train.vref: gain {m:.4} at Vpv = {} V falls outside the reachable (2,3) band",
                    p.v_pv
                ));
            }
            if b.epochs == 0 {
                errs.push("train.epochs: need at least 1".to_string());
            }
            check_pos(errs, "train.learning_rate", b.learning_rate);
        }
        Scenario::ClosedLoop(b) => {
            check_pos(errs, "closedloop.vref", b.vref);
            check_pos(errs, "closedloop.horizon_s", b.horizon_s);
            for (path, v) in [
                ("closedloop.kp", b.kp),
                ("closedloop.ki", b.ki),
                ("closedloop.kd", b.kd),
            ] {
                if let Some(v) = v {
                    if v < 0.0 || !v.is_finite() {
                        errs.push(format!("{path}: must be finite and >= 0, got {v}"));
                    }
                }
            }
            if let Some(d) = b.d_init {
                if !(d > 0.0 && d < 1.0) {
                    errs.push(format!(
                        "closedloop.d_init: duty must lie in (0,1), got {d}"
                    ));
                }
            }
            if b.epochs == 0 {
                errs.push("closedloop.epochs: need at least 1".to_string());
            }
            check_pos(errs, "closedloop.learning_rate", b.learning_rate);
            for (i, ev) in b.events.iter().enumerate() {
                if !(ev.t >= 0.0 && ev.t <= b.horizon_s) {
                    errs.push(format!(
                        "closedloop.events[{i}].t: must lie in [0, horizon_s], got {}",
                        ev.t
                    ));
                }
                match ev.kind {
                    EventKindName::Load => {
                        if !(ev.value > 0.0) {
                            errs.push(format!(
                                "closedloop.events[{i}].value: load resistance must be > 0, got {}",
                                ev.value
                            ));
                        }
                    }
                    EventKindName::SourceVoltage | EventKindName::Reference => {
                        if !ev.value.is_finite() {
                            errs.push(format!(
                                "closedloop.events[{i}].value: must be finite"
                            ));
                        }
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table3() -> String {
        preset_source("table3_sim").unwrap().to_string()
    }

    #[test]
    fn shipped_presets_parse_and_validate() {
        for (name, body) in PRESETS {
            let cfg = parse(body).unwrap_or_else(|e| panic!("{name}: {e}"));
            if let Err(errs) = validate(&cfg) {
                panic!("{name}: {errs:?}");
            }
        }
    }

    #[test]
    fn bad_duty_reports_field_path() {
        let cfg = parse(&table3().replace("\"D\": 0.4", "\"D\": 1.2")).unwrap();
        let errs = validate(&cfg).unwrap_err();
        assert!(errs.iter().any(|e| e.contains("params.D")), "{errs:?}");
    }

    #[test]
    fn two_scenario_blocks_rejected() {
        let cfg = parse(
            &table3().replace("\"simulate\"", "\"compare\": {}, \"simulate\""),
        )
        .unwrap();
        let errs = validate(&cfg).unwrap_err();
        assert!(errs.iter().any(|e| e.contains("exactly one")), "{errs:?}");
    }

    #[test]
    fn missing_scenario_rejected() {
        let text = r#"{"schema": 1, "seed": 0, "out_dir": "o", "params_preset": "table3_sim"}"#;
        let cfg = parse(text).unwrap();
        let errs = validate(&cfg).unwrap_err();
        assert!(errs.iter().any(|e| e.starts_with("scenario:")), "{errs:?}");
    }

    #[test]
    fn unknown_preset_named_in_error() {
        let text =
            r#"{"schema": 1, "seed": 0, "out_dir": "o", "params_preset": "table9", "compare": {}}"#;
        let errs = validate(&parse(text).unwrap()).unwrap_err();
        assert!(
            errs.iter().any(|e| e.contains("params_preset") && e.contains("table9")),
            "{errs:?}"
        );
    }

    #[test]
    fn schema_version_checked() {
        let cfg = parse(&table3().replace("\"schema\": 1", "\"schema\": 2")).unwrap();
        let errs = validate(&cfg).unwrap_err();
        assert!(errs.iter().any(|e| e.starts_with("schema:")), "{errs:?}");
    }

    #[test]
    fn parse_error_carries_position() {
        let e = parse("{\n  \"schema\": 1,\n  oops\n}").unwrap_err();
        assert!(e.contains("line 3"), "{e}");
        assert!(e.contains("column"), "{e}");
    }

    #[test]
    fn error_list_collects_several_violations() {
        let text = r#"{
            "schema": 1, "seed": 0, "out_dir": "",
            "params_preset": "table3_sim",
            "bode": {"channel": "duty", "f_min_hz": -1.0, "points": 1}
        }"#;
        let errs = validate(&parse(text).unwrap()).unwrap_err();
        assert!(errs.len() >= 3, "{errs:?}");
        assert!(errs.iter().any(|e| e.starts_with("out_dir:")));
        assert!(errs.iter().any(|e| e.starts_with("bode.f_min_hz:")));
        assert!(errs.iter().any(|e| e.starts_with("bode.points:")));
    }

    #[test]
    fn losses_defaults_are_the_published_example() {
        let (inp, p_out) = LossesBlock::default().resolve();
        assert_eq!(inp, bench_loss_inputs());
        assert_eq!(p_out, 200.0);
    }
}
