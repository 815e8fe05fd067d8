//! Converter parameter set, state ordering, and input bundle.

use nalgebra::{SMatrix, SVector};
use thiserror::Error;

pub type Vec7 = SVector<f64, 7>;
pub type Mat7 = SMatrix<f64, 7, 7>;
pub type Mat7x2 = SMatrix<f64, 7, 2>;

/// State ordering: x = [iL1, iL2, iL3, iL4, vC1, vC2, vCo].
pub const IL1: usize = 0;
pub const IL2: usize = 1;
pub const IL3: usize = 2;
pub const IL4: usize = 3;
pub const VC1: usize = 4;
pub const VC2: usize = 5;
pub const VCO: usize = 6;

pub const STATE_NAMES: [&str; 7] = ["iL1", "iL2", "iL3", "iL4", "vC1", "vC2", "vCo"];

/// Conduction-path parasitics. All default 0 (ideal components).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Parasitics {
    /// Switch on-resistance (ohm).
    pub rds_on: f64,
    /// Diode forward drop (V).
    pub vf_diode: f64,
    /// Series copper resistance per inductor (ohm). Also damps the state matrices.
    pub rl_copper: f64,
    /// Capacitor equivalent series resistance (ohm).
    pub esr_cap: f64,
}

impl Parasitics {
    pub fn is_ideal(&self) -> bool {
        self.rds_on == 0.0 && self.vf_diode == 0.0 && self.rl_copper == 0.0 && self.esr_cap == 0.0
    }
}

/// Plant parameters. Inductances in H, capacitances in F, resistances in ohm,
/// voltages in V, `fs` in Hz, duty dimensionless in (0,1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConverterParams {
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
    pub l4: f64,
    pub c1: f64,
    pub c2: f64,
    pub co: f64,
    pub r: f64,
    pub v_pv: f64,
    pub v_bat: f64,
    pub fs: f64,
    pub d: f64,
    pub parasitics: Parasitics,
}

impl ConverterParams {
    /// Simulation bench point: 20 V PV port, 12 V battery port, 50 kHz,
    /// 2 mH input pair, 150 mH output pair, 100 uF banks, 1 kohm load, D = 0.4.
    pub fn sim_bench() -> Self {
        ConverterParams {
            l1: 2e-3,
            l2: 2e-3,
            l3: 150e-3,
            l4: 150e-3,
            c1: 100e-6,
            c2: 100e-6,
            co: 100e-6,
            r: 1000.0,
            v_pv: 20.0,
            v_bat: 12.0,
            fs: 50e3,
            d: 0.4,
            parasitics: Parasitics::default(),
        }
    }

    pub fn with_duty(mut self, d: f64) -> Self {
        self.d = d;
        self
    }

    pub fn ts(&self) -> f64 {
        1.0 / self.fs
    }

    /// Inductances in state order.
    pub fn inductances(&self) -> [f64; 4] {
        [self.l1, self.l2, self.l3, self.l4]
    }

    /// Capacitances in state order.
    pub fn capacitances(&self) -> [f64; 3] {
        [self.c1, self.c2, self.co]
    }

    /// Energy weights diag(L1..L4, C1, C2, Co), so E = x' W x / 2.
    pub fn energy_weights(&self) -> Vec7 {
        Vec7::from_column_slice(&[self.l1, self.l2, self.l3, self.l4, self.c1, self.c2, self.co])
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        match self.validate_all().into_iter().next() {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }

    /// Every violation at once, for callers that report error lists.
    pub fn validate_all(&self) -> Vec<ParamError> {
        let mut errs = Vec::new();
        let pos = [
            ("L1", self.l1),
            ("L2", self.l2),
            ("L3", self.l3),
            ("L4", self.l4),
            ("C1", self.c1),
            ("C2", self.c2),
            ("Co", self.co),
            ("R", self.r),
            ("fs", self.fs),
        ];
        for (name, v) in pos {
            if !(v > 0.0) || !v.is_finite() {
                errs.push(ParamError::NonPositive { field: name, value: v });
            }
        }
        if !(self.d > 0.0 && self.d < 1.0) {
            errs.push(ParamError::DutyOutOfRange { value: self.d });
        }
        let para = [
            ("Rds_on", self.parasitics.rds_on),
            ("Vf_diode", self.parasitics.vf_diode),
            ("RL_copper", self.parasitics.rl_copper),
            ("esr_cap", self.parasitics.esr_cap),
        ];
        for (name, v) in para {
            if v < 0.0 || !v.is_finite() {
                errs.push(ParamError::NegativeParasitic { field: name, value: v });
            }
        }
        if !self.v_pv.is_finite() || !self.v_bat.is_finite() {
            errs.push(ParamError::NonFiniteSource);
        }
        errs
    }
}

/// External inputs u = [v_src, i_src]: the source-port voltage and the injected
/// current that feeds both capacitor banks during the On phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceInputs {
    pub v_src: f64,
    pub i_src: f64,
}

impl SourceInputs {
    pub fn new(v_src: f64, i_src: f64) -> Self {
        SourceInputs { v_src, i_src }
    }

    /// PV port voltage as the source, no injected current.
    pub fn from_params(p: &ConverterParams) -> Self {
        SourceInputs { v_src: p.v_pv, i_src: 0.0 }
    }

    pub fn zero() -> Self {
        SourceInputs { v_src: 0.0, i_src: 0.0 }
    }

    pub fn as_vector(&self) -> SVector<f64, 2> {
        SVector::<f64, 2>::new(self.v_src, self.i_src)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SwitchPhase {
    On,
    Off,
}

impl SwitchPhase {
    /// Phase duration in seconds: On holds D*Ts, Off the remainder.
    pub fn duration(&self, p: &ConverterParams) -> f64 {
        match self {
            SwitchPhase::On => p.d / p.fs,
            SwitchPhase::Off => (1.0 - p.d) / p.fs,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            SwitchPhase::On => "On",
            SwitchPhase::Off => "Off",
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ParamError {
    #[error("params.{field}: must be strictly positive, got {value}")]
    NonPositive { field: &'static str, value: f64 },
    #[error("params.D: duty must lie in (0,1), got {value}")]
    DutyOutOfRange { value: f64 },
    #[error("params.parasitics.{field}: must be >= 0, got {value}")]
    NegativeParasitic { field: &'static str, value: f64 },
    #[error("params: source voltages must be finite")]
    NonFiniteSource,
}
