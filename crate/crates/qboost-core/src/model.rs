//! Two-phase affine models of the converter: dx/dt = A·x + B·u + f.
//!
//! Two variants are built from the same parameter set. `AsPrinted`
//! transcribes the published per-mode equations exactly as printed, including
//! their internal sign defects. `Reconciled` is the unique passive completion:
//! with sources zeroed and ideal parts its Off phase dissipates energy only in
//! the load, dE/dt = -vCo^2/R exactly. Every cell where the variants differ is
//! enumerated by `discrepancy::report`.

use crate::params::*;

/// One switching phase as an affine system. `b` routes u = [v_src, i_src];
/// `f` carries the battery-port offset (On phase only).
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseModel {
    pub a: Mat7,
    pub b: Mat7x2,
    pub f: Vec7,
    pub phase: SwitchPhase,
    pub variant: ModelVariant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelVariant {
    /// Mode equations exactly as printed.
    AsPrinted,
    /// Passive completion; differs from the literal form only at the cells
    /// listed in the discrepancy report.
    Reconciled,
}

impl ModelVariant {
    pub fn label(&self) -> &'static str {
        match self {
            ModelVariant::AsPrinted => "as-printed",
            ModelVariant::Reconciled => "reconciled",
        }
    }
}

/// Build one phase of the chosen variant.
///
/// The series copper resistance (if nonzero) adds -RL/Lk damping on each
/// inductor row in both phases and both variants; the remaining parasitics
/// only enter the loss accounting.
pub fn build_phase_model(p: &ConverterParams, phase: SwitchPhase, variant: ModelVariant) -> PhaseModel {
    let mut a = Mat7::zeros();
    let mut b = Mat7x2::zeros();
    let mut f = Vec7::zeros();

    match (phase, variant) {
        (SwitchPhase::On, v) => {
            // Switch conducts: source magnetizes L1/L2, C1 drives L3,
            // battery and C2 feed the output stage.
            if v == ModelVariant::AsPrinted {
                // Printed On equation for iL1 carries an extra vC1/L1 term
                // that contradicts the mode-1 KVL (vL1 = v_src).
                a[(IL1, VC1)] = 1.0 / p.l1;
            }
            b[(IL1, 0)] = 1.0 / p.l1;
            b[(IL2, 0)] = 1.0 / p.l2;
            a[(IL3, VC1)] = 1.0 / p.l3;
            a[(IL4, VC2)] = 1.0 / p.l4;
            a[(IL4, VCO)] = -1.0 / p.l4;
            f[IL4] = p.v_bat / p.l4;
            a[(VC1, IL1)] = 1.0 / p.c1;
            a[(VC1, IL2)] = -1.0 / p.c1;
            b[(VC1, 1)] = 1.0 / p.c1;
            a[(VC2, IL4)] = -1.0 / p.c2;
            b[(VC2, 1)] = 1.0 / p.c2;
            a[(VCO, IL4)] = 1.0 / p.co;
            a[(VCO, VCO)] = -1.0 / (p.r * p.co);
        }
        (SwitchPhase::Off, ModelVariant::AsPrinted) => {
            a[(IL1, VC1)] = 1.0 / p.l1; // printed sign; demagnetization requires -vC1/L1
            a[(IL2, VC1)] = -1.0 / p.l2;
            a[(IL3, VC1)] = 1.0 / p.l3;
            a[(IL3, VC2)] = 1.0 / p.l3; // printed +vC2; KVL of the printed loop gives -vC2
            a[(IL4, VC2)] = -1.0 / p.l4; // printed polarity swap against the On equation
            a[(IL4, VCO)] = 1.0 / p.l4;
            a[(VC1, IL1)] = 1.0 / p.c1; // iL2 recharge path missing as printed
            a[(VC1, IL3)] = -1.0 / p.c1;
            a[(VC2, IL3)] = 1.0 / p.c2;
            a[(VC2, IL4)] = -1.0 / p.c2;
            a[(VCO, VCO)] = 1.0 / (p.r * p.co); // printed +vCo/(R*Co); also omits the iL4 feed
        }
        (SwitchPhase::Off, ModelVariant::Reconciled) => {
            a[(IL1, VC1)] = -1.0 / p.l1;
            a[(IL2, VC1)] = -1.0 / p.l2;
            a[(IL3, VC1)] = 1.0 / p.l3;
            a[(IL3, VC2)] = -1.0 / p.l3;
            a[(IL4, VC2)] = 1.0 / p.l4;
            a[(IL4, VCO)] = -1.0 / p.l4;
            a[(VC1, IL1)] = 1.0 / p.c1;
            a[(VC1, IL2)] = 1.0 / p.c1;
            a[(VC1, IL3)] = -1.0 / p.c1;
            a[(VC2, IL3)] = 1.0 / p.c2;
            a[(VC2, IL4)] = -1.0 / p.c2;
            a[(VCO, IL4)] = 1.0 / p.co;
            a[(VCO, VCO)] = -1.0 / (p.r * p.co);
        }
    }

    let rl = p.parasitics.rl_copper;
    if rl > 0.0 {
        for (k, l) in p.inductances().iter().enumerate() {
            a[(k, k)] -= rl / l;
        }
    }

    PhaseModel { a, b, f, phase, variant }
}

/// dx/dt = A·x + B·u + f.
pub fn state_derivative(model: &PhaseModel, x: &Vec7, u: &SourceInputs) -> Vec7 {
    model.a * x + model.b * u.as_vector() + model.f
}

impl PhaseModel {
    /// Constant drive term B·u + f for a fixed input.
    pub fn affine(&self, u: &SourceInputs) -> Vec7 {
        self.b * u.as_vector() + self.f
    }
}

/// Conduction flags for the eight diodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DiodeSet {
    pub d1: bool,
    pub d2: bool,
    pub d3: bool,
    pub d4: bool,
    pub d5: bool,
    pub d6: bool,
    pub d7: bool,
    pub d_o: bool,
}

impl DiodeSet {
    pub fn flags(&self) -> [bool; 8] {
        [self.d1, self.d2, self.d3, self.d4, self.d5, self.d6, self.d7, self.d_o]
    }

    pub const NAMES: [&'static str; 8] = ["D1", "D2", "D3", "D4", "D5", "D6", "D7", "Do"];
}

/// On: {D1, D3, D5, Do}. Off: {D2, D4, D6, D7}. The two sets partition all
/// eight diodes.
pub fn conduction_set(phase: SwitchPhase) -> DiodeSet {
    match phase {
        SwitchPhase::On => DiodeSet {
            d1: true,
            d2: false,
            d3: true,
            d4: false,
            d5: true,
            d6: false,
            d7: false,
            d_o: true,
        },
        SwitchPhase::Off => DiodeSet {
            d1: false,
            d2: true,
            d3: false,
            d4: true,
            d5: false,
            d6: true,
            d7: true,
            d_o: false,
        },
    }
}

/// Stored energy E = (sum L·i^2 + sum C·v^2) / 2 in joules.
pub fn stored_energy(p: &ConverterParams, x: &Vec7) -> f64 {
    let w = p.energy_weights();
    0.5 * x.iter().zip(w.iter()).map(|(xi, wi)| wi * xi * xi).sum::<f64>()
}

/// dE/dt along the phase dynamics at state x (sources as given).
pub fn energy_rate(p: &ConverterParams, model: &PhaseModel, x: &Vec7, u: &SourceInputs) -> f64 {
    let w = p.energy_weights();
    let dx = state_derivative(model, x, u);
    x.iter().zip(w.iter()).zip(dx.iter()).map(|((xi, wi), di)| wi * xi * di).sum()
}

/// Duty-weighted average of a variant's two phases:
/// A = D·A_on + (1-D)·A_off, same weighting for B and f.
pub fn duty_weighted_average(p: &ConverterParams, variant: ModelVariant) -> (Mat7, Mat7x2, Vec7) {
    let on = build_phase_model(p, SwitchPhase::On, variant);
    let off = build_phase_model(p, SwitchPhase::Off, variant);
    let d = p.d;
    (
        on.a * d + off.a * (1.0 - d),
        on.b * d + off.b * (1.0 - d),
        on.f * d + off.f * (1.0 - d),
    )
}

/// The published averaged state matrix, transcribed symbolically and
/// evaluated at the given parameters. Used only by the audit; the working
/// averaged model is assembled from the phase models instead.
pub fn printed_a_av(p: &ConverterParams) -> Mat7 {
    let d = p.d;
    let mut a = Mat7::zeros();
    a[(IL1, VC1)] = 1.0 / p.l1;
    a[(IL2, VC1)] = -(1.0 - d) / p.l2;
    a[(IL3, VC1)] = 1.0 / p.l3;
    a[(IL3, VC2)] = (d - 1.0) / p.l3;
    a[(IL4, VC1)] = d / p.l4;
    a[(IL4, VC2)] = -(d - 1.0) / p.l4;
    a[(VC1, IL1)] = 1.0 / p.c1;
    a[(VC1, IL2)] = -d / p.c1;
    a[(VC1, IL3)] = -(d - 1.0) / p.c1;
    a[(VC2, IL3)] = (1.0 - d) / p.c2;
    a[(VC2, IL4)] = -1.0 / p.c2;
    a[(VCO, IL4)] = -d / p.co;
    a[(VCO, VCO)] = (1.0 - d) / (p.r * p.co);
    a
}

/// The published averaged input matrix for u = [v_src, i_src].
pub fn printed_b_av(p: &ConverterParams) -> Mat7x2 {
    let d = p.d;
    let mut b = Mat7x2::zeros();
    b[(IL1, 0)] = d / p.l1;
    b[(IL2, 0)] = d / p.l2;
    b[(IL4, 0)] = -d / p.l4;
    b[(VC1, 1)] = d / p.c1;
    b[(VC2, 1)] = d / p.c2;
    b
}

/// The published output row: y = vCo.
pub fn printed_c_av() -> nalgebra::SMatrix<f64, 1, 7> {
    let mut c = nalgebra::SMatrix::<f64, 1, 7>::zeros();
    c[(0, VCO)] = 1.0;
    c
}

/// Cell-by-cell comparison of the duty-weighted literal assembly against the
/// published averaged matrices. Cells are 0-indexed (row, col) in state order.
#[derive(Debug, Clone)]
pub struct AverageAudit {
    pub assembled_a: Mat7,
    pub printed_a: Mat7,
    pub a_mismatches: Vec<(usize, usize)>,
    pub assembled_b: Mat7x2,
    pub printed_b: Mat7x2,
    pub b_mismatches: Vec<(usize, usize)>,
}

/// Audit the published averaged model against D·A_on + (1-D)·A_off of the
/// literal phase equations. A cell counts as mismatched when it differs by
/// more than 1e-9 relative to the larger magnitude (both sides are exact
/// rational combinations, so true mismatches are orders above this).
pub fn audit_printed_average(p: &ConverterParams) -> AverageAudit {
    let (asm_a, asm_b, _) = duty_weighted_average(p, ModelVariant::AsPrinted);
    let pr_a = printed_a_av(p);
    let pr_b = printed_b_av(p);

    let mut a_mismatches = Vec::new();
    for r in 0..7 {
        for c in 0..7 {
            if !cells_agree(asm_a[(r, c)], pr_a[(r, c)]) {
                a_mismatches.push((r, c));
            }
        }
    }
    let mut b_mismatches = Vec::new();
    for r in 0..7 {
        for c in 0..2 {
            if !cells_agree(asm_b[(r, c)], pr_b[(r, c)]) {
                b_mismatches.push((r, c));
            }
        }
    }

    AverageAudit {
        assembled_a: asm_a,
        printed_a: pr_a,
        a_mismatches,
        assembled_b: asm_b,
        printed_b: pr_b,
        b_mismatches,
    }
}

fn cells_agree(a: f64, b: f64) -> bool {
    let scale = a.abs().max(b.abs());
    scale == 0.0 || (a - b).abs() <= 1e-9 * scale
}
