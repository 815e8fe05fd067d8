//! Machine-checked ledger of the published source material's internal
//! conflicts: every cell where the literal and reconciled models differ,
//! every cell where the printed duty-averaged matrices disagree with their
//! own per-phase assembly, and the scalar-level conflicts in the gain chain,
//! stress identities, loss arithmetic, and panel plate data.

use crate::model::*;
use crate::params::*;

/// Which matrix a discrepancy entry points into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MatrixTag {
    AOn,
    AOff,
    /// Printed duty-averaged state matrix.
    APrintedAverage,
    /// Printed duty-averaged input matrix.
    BPrintedAverage,
}

impl MatrixTag {
    pub fn label(&self) -> &'static str {
        match self {
            MatrixTag::AOn => "A_on",
            MatrixTag::AOff => "A_off",
            MatrixTag::APrintedAverage => "A_avg_printed",
            MatrixTag::BPrintedAverage => "B_avg_printed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MatrixCell {
    pub tag: MatrixTag,
    pub row: usize,
    pub col: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DiscrepancyKind {
    /// On-phase input-winding row carries the bank voltage term on top of
    /// the source term even though the bank is clamped out of that loop.
    OnPhaseDoubleTerm,
    OffPhaseSignConflict,
    OffPhaseMissingTerm,
    /// Printed duty-averaged cell differs from the duty-weighted assembly of
    /// the printed per-phase equations.
    PrintedMatrixConflict,
    /// Printed input-matrix cell with no per-phase source; collides with the
    /// battery offset handling.
    InputMatrixQuestion,
    GainChainConflict,
    StressConflict,
    StressSignQuestion,
    CopperLossForm,
    CapRippleConflict,
    TotalsMismatch,
    EfficiencyMismatch,
    PvPowerConflict,
    DiodeCountQuestion,
}

impl DiscrepancyKind {
    pub fn label(&self) -> &'static str {
        match self {
            DiscrepancyKind::OnPhaseDoubleTerm => "on-phase-double-term",
            DiscrepancyKind::OffPhaseSignConflict => "off-phase-sign-conflict",
            DiscrepancyKind::OffPhaseMissingTerm => "off-phase-missing-term",
            DiscrepancyKind::PrintedMatrixConflict => "printed-matrix-conflict",
            DiscrepancyKind::InputMatrixQuestion => "input-matrix-question",
            DiscrepancyKind::GainChainConflict => "gain-chain-conflict",
            DiscrepancyKind::StressConflict => "stress-conflict",
            DiscrepancyKind::StressSignQuestion => "stress-sign-question",
            DiscrepancyKind::CopperLossForm => "copper-loss-form",
            DiscrepancyKind::CapRippleConflict => "cap-ripple-conflict",
            DiscrepancyKind::TotalsMismatch => "totals-mismatch",
            DiscrepancyKind::EfficiencyMismatch => "efficiency-mismatch",
            DiscrepancyKind::PvPowerConflict => "pv-power-conflict",
            DiscrepancyKind::DiodeCountQuestion => "diode-count-question",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscrepancyEntry {
    pub kind: DiscrepancyKind,
    /// Where in the source material the conflict lives, described by role.
    pub location: String,
    /// The relation as printed.
    pub literal_form: String,
    /// The relation the reconciled model uses (or the recomputed value).
    pub reconciled_form: String,
    /// The exact cell that differs, when the conflict is a matrix entry.
    pub affected_cell: Option<MatrixCell>,
}

/// Cells where the two variants' phase matrix differ, row-major order.
pub fn variant_diff_cells(p: &ConverterParams, phase: SwitchPhase) -> Vec<(usize, usize)> {
    let lit = build_phase_model(p, phase, ModelVariant::AsPrinted);
    let rec = build_phase_model(p, phase, ModelVariant::Reconciled);
    let mut cells = Vec::new();
    for r in 0..7 {
        for c in 0..7 {
            if lit.a[(r, c)] != rec.a[(r, c)] {
                cells.push((r, c));
            }
        }
    }
    cells
}

fn cell(tag: MatrixTag, row: usize, col: usize) -> Option<MatrixCell> {
    Some(MatrixCell { tag, row, col })
}

/// Deterministic, ordered conflict ledger. Matrix-cell entries come first
/// (On phase, Off phase, printed averages), then the scalar conflicts.
pub fn discrepancy_report(p: &ConverterParams) -> Vec<DiscrepancyEntry> {
    let d = p.d;
    let mut out = Vec::with_capacity(27);

    // --- variant differences, On phase
    out.push(DiscrepancyEntry {
        kind: DiscrepancyKind::OnPhaseDoubleTerm,
        location: "On phase, first input-winding voltage loop".into(),
        literal_form: format!(
            "diL1/dt includes +vC1/L1 alongside +v_src/L1 ({:+.6e} 1/s per volt)",
            1.0 / p.l1
        ),
        reconciled_form: "diL1/dt = +v_src/L1 only; the first bank is outside the conducting loop"
            .into(),
        affected_cell: cell(MatrixTag::AOn, IL1, VC1),
    });

    // --- variant differences, Off phase (row-major)
    out.push(DiscrepancyEntry {
        kind: DiscrepancyKind::OffPhaseSignConflict,
        location: "Off phase, first input-winding voltage loop".into(),
        literal_form: format!("diL1/dt = +vC1/L1 ({:+.6e})", 1.0 / p.l1),
        reconciled_form: format!(
            "diL1/dt = -vC1/L1 ({:+.6e}); the winding discharges into the first bank",
            -1.0 / p.l1
        ),
        affected_cell: cell(MatrixTag::AOff, IL1, VC1),
    });
    out.push(DiscrepancyEntry {
        kind: DiscrepancyKind::OffPhaseSignConflict,
        location: "Off phase, interstage winding vs second bank".into(),
        literal_form: format!("diL3/dt term +vC2/L3 ({:+.6e})", 1.0 / p.l3),
        reconciled_form: format!(
            "diL3/dt term -vC2/L3 ({:+.6e}); the second bank opposes the interstage winding",
            -1.0 / p.l3
        ),
        affected_cell: cell(MatrixTag::AOff, IL3, VC2),
    });
    out.push(DiscrepancyEntry {
        kind: DiscrepancyKind::OffPhaseSignConflict,
        location: "Off phase, output winding vs second bank".into(),
        literal_form: format!("diL4/dt term -vC2/L4 ({:+.6e})", -1.0 / p.l4),
        reconciled_form: format!(
            "diL4/dt term +vC2/L4 ({:+.6e}); the second bank drives the output winding",
            1.0 / p.l4
        ),
        affected_cell: cell(MatrixTag::AOff, IL4, VC2),
    });
    out.push(DiscrepancyEntry {
        kind: DiscrepancyKind::OffPhaseSignConflict,
        location: "Off phase, output winding vs load capacitor".into(),
        literal_form: format!("diL4/dt term +vCo/L4 ({:+.6e})", 1.0 / p.l4),
        reconciled_form: format!(
            "diL4/dt term -vCo/L4 ({:+.6e}); the load voltage opposes the winding",
            -1.0 / p.l4
        ),
        affected_cell: cell(MatrixTag::AOff, IL4, VCO),
    });
    out.push(DiscrepancyEntry {
        kind: DiscrepancyKind::OffPhaseMissingTerm,
        location: "Off phase, first bank charge balance".into(),
        literal_form: "dvC1/dt collects iL1 and iL3 only".into(),
        reconciled_form: format!(
            "dvC1/dt also collects +iL2/C1 ({:+.6e}); both input windings feed the bank",
            1.0 / p.c1
        ),
        affected_cell: cell(MatrixTag::AOff, VC1, IL2),
    });
    out.push(DiscrepancyEntry {
        kind: DiscrepancyKind::OffPhaseMissingTerm,
        location: "Off phase, load capacitor charge balance".into(),
        literal_form: "dvCo/dt has no winding inflow; only the load term".into(),
        reconciled_form: format!(
            "dvCo/dt includes +iL4/Co ({:+.6e}); the output winding charges the load bank",
            1.0 / p.co
        ),
        affected_cell: cell(MatrixTag::AOff, VCO, IL4),
    });
    out.push(DiscrepancyEntry {
        kind: DiscrepancyKind::OffPhaseSignConflict,
        location: "Off phase, load capacitor self term".into(),
        literal_form: format!(
            "dvCo/dt = +vCo/(R Co) ({:+.6e}); stored energy grows without a source",
            1.0 / (p.r * p.co)
        ),
        reconciled_form: format!(
            "dvCo/dt = -vCo/(R Co) ({:+.6e}); the load resistor dissipates",
            -1.0 / (p.r * p.co)
        ),
        affected_cell: cell(MatrixTag::AOff, VCO, VCO),
    });

    // --- printed duty-averaged state matrix vs per-phase assembly (row-major)
    out.push(DiscrepancyEntry {
        kind: DiscrepancyKind::PrintedMatrixConflict,
        location: "printed averaged matrix, interstage winding vs second bank".into(),
        literal_form: format!("(D-1)/L3 ({:+.6e})", (d - 1.0) / p.l3),
        reconciled_form: format!("assembly gives +(1-D)/L3 ({:+.6e})", (1.0 - d) / p.l3),
        affected_cell: cell(MatrixTag::APrintedAverage, IL3, VC2),
    });
    out.push(DiscrepancyEntry {
        kind: DiscrepancyKind::PrintedMatrixConflict,
        location: "printed averaged matrix, output winding vs first bank".into(),
        literal_form: format!("+D/L4 ({:+.6e})", d / p.l4),
        reconciled_form: "assembly gives 0; no phase couples the output winding to the first bank"
            .into(),
        affected_cell: cell(MatrixTag::APrintedAverage, IL4, VC1),
    });
    out.push(DiscrepancyEntry {
        kind: DiscrepancyKind::PrintedMatrixConflict,
        location: "printed averaged matrix, output winding vs second bank".into(),
        literal_form: format!("-(D-1)/L4 ({:+.6e})", -(d - 1.0) / p.l4),
        reconciled_form: format!(
            "assembly gives -(1-2D)/L4 ({:+.6e}) from the two phase terms",
            -(1.0 - 2.0 * d) / p.l4
        ),
        affected_cell: cell(MatrixTag::APrintedAverage, IL4, VC2),
    });
    out.push(DiscrepancyEntry {
        kind: DiscrepancyKind::PrintedMatrixConflict,
        location: "printed averaged matrix, output winding vs load capacitor".into(),
        literal_form: "0 as printed".into(),
        reconciled_form: format!(
            "assembly gives +(1-2D)/L4 ({:+.6e})",
            (1.0 - 2.0 * d) / p.l4
        ),
        affected_cell: cell(MatrixTag::APrintedAverage, IL4, VCO),
    });
    out.push(DiscrepancyEntry {
        kind: DiscrepancyKind::PrintedMatrixConflict,
        location: "printed averaged matrix, first bank vs interstage winding".into(),
        literal_form: format!("-(D-1)/C1 ({:+.6e})", -(d - 1.0) / p.c1),
        reconciled_form: format!("assembly gives -(1-D)/C1 ({:+.6e})", -(1.0 - d) / p.c1),
        affected_cell: cell(MatrixTag::APrintedAverage, VC1, IL3),
    });
    out.push(DiscrepancyEntry {
        kind: DiscrepancyKind::PrintedMatrixConflict,
        location: "printed averaged matrix, load capacitor vs output winding".into(),
        literal_form: format!("-D/Co ({:+.6e})", -d / p.co),
        reconciled_form: format!(
            "assembly gives +D/Co ({:+.6e}); the On phase feeds the load bank",
            d / p.co
        ),
        affected_cell: cell(MatrixTag::APrintedAverage, VCO, IL4),
    });
    out.push(DiscrepancyEntry {
        kind: DiscrepancyKind::PrintedMatrixConflict,
        location: "printed averaged matrix, load capacitor self term".into(),
        literal_form: format!("+(1-D)/(R Co) ({:+.6e})", (1.0 - d) / (p.r * p.co)),
        reconciled_form: format!(
            "assembly gives +(1-2D)/(R Co) ({:+.6e}) from the printed phase signs",
            (1.0 - 2.0 * d) / (p.r * p.co)
        ),
        affected_cell: cell(MatrixTag::APrintedAverage, VCO, VCO),
    });

    // --- printed duty-averaged input matrix
    out.push(DiscrepancyEntry {
        kind: DiscrepancyKind::InputMatrixQuestion,
        location: "printed averaged input matrix, output-winding source row".into(),
        literal_form: format!("-D/L4 on the voltage input ({:+.6e})", -d / p.l4),
        reconciled_form:
            "per-phase equations route the battery as an On-phase offset +Vbat/L4 instead; \
             no voltage-input coupling survives the assembly"
                .into(),
        affected_cell: cell(MatrixTag::BPrintedAverage, IL4, 0),
    });

    // --- scalar-level conflicts
    let m_chain = 3.0 - d;
    let m_avg = d * p.v_bat / p.v_pv + d / (1.0 - d).powi(2);
    out.push(DiscrepancyEntry {
        kind: DiscrepancyKind::GainChainConflict,
        location: "steady-state conversion ratio".into(),
        literal_form: format!("clamp-chain formula gives M = 3 - D = {m_chain:.6}"),
        reconciled_form: format!(
            "reconciled averaged equilibrium gives M = D Vbat/Vpv + D/(1-D)^2 = {m_avg:.6}"
        ),
        affected_cell: None,
    });
    out.push(DiscrepancyEntry {
        kind: DiscrepancyKind::GainChainConflict,
        location: "first-bank steady voltage inside the gain chain".into(),
        literal_form: format!("chain clamps vC1 = Vpv = {:.6}", p.v_pv),
        reconciled_form: format!(
            "reconciled equilibrium gives vC1 = D Vpv/(1-D) = {:.6}",
            d * p.v_pv / (1.0 - d)
        ),
        affected_cell: None,
    });
    out.push(DiscrepancyEntry {
        kind: DiscrepancyKind::StressConflict,
        location: "blocking voltage of the switch and first-bank diodes".into(),
        literal_form: "switch line states V = vC1 = Vpv".into(),
        reconciled_form: "adjacent lines state V_D3 = V_D4 = vC1 = Vpv/2; both recorded".into(),
        affected_cell: None,
    });
    out.push(DiscrepancyEntry {
        kind: DiscrepancyKind::StressConflict,
        location: "blocking voltage of the output-section diodes".into(),
        literal_form: "half-output form Vo/2".into(),
        reconciled_form: "battery-referenced form Vo - Vbat on the same device; both recorded"
            .into(),
        affected_cell: None,
    });
    out.push(DiscrepancyEntry {
        kind: DiscrepancyKind::StressSignQuestion,
        location: "seventh diode blocking voltage".into(),
        literal_form: format!(
            "(Vbat - Vo)/2 evaluates negative at the bench point ({:.3} V)",
            (p.v_bat - (3.0 - d) * p.v_pv) / 2.0
        ),
        reconciled_form: "magnitude reported alongside the printed signed value".into(),
        affected_cell: None,
    });
    out.push(DiscrepancyEntry {
        kind: DiscrepancyKind::CopperLossForm,
        location: "winding conduction loss".into(),
        literal_form: "linear form I R = 2.5 * 0.5 = 1.25 W as printed".into(),
        reconciled_form: "physical form I^2 R = 3.125 W; shipped behind a flag".into(),
        affected_cell: None,
    });
    out.push(DiscrepancyEntry {
        kind: DiscrepancyKind::CapRippleConflict,
        location: "output-capacitor rms current for the ESR loss".into(),
        literal_form: "text equates it to the load current (~52 mA -> 0.8 mW at 0.29 ohm)".into(),
        reconciled_form: "printed 0.15 W at 0.29 ohm implies ~0.719 A rms; both recorded".into(),
        affected_cell: None,
    });
    out.push(DiscrepancyEntry {
        kind: DiscrepancyKind::TotalsMismatch,
        location: "total loss figure".into(),
        literal_form: "stated total 7.13 W".into(),
        reconciled_form: "printed components sum to 5.03 + 0.6 + 1.25 + 0.15 = 7.03 W".into(),
        affected_cell: None,
    });
    out.push(DiscrepancyEntry {
        kind: DiscrepancyKind::EfficiencyMismatch,
        location: "peak efficiency figure".into(),
        literal_form: "printed 96.7%".into(),
        reconciled_form: "100*200/(200 + 7.13) = 96.56%".into(),
        affected_cell: None,
    });
    out.push(DiscrepancyEntry {
        kind: DiscrepancyKind::PvPowerConflict,
        location: "panel plate maximum power".into(),
        literal_form: "plate Pmax = 213 W".into(),
        reconciled_form: "Vmp * Imp = 36.3 * 7.35 = 266.805 W".into(),
        affected_cell: None,
    });
    out.push(DiscrepancyEntry {
        kind: DiscrepancyKind::DiodeCountQuestion,
        location: "diode count".into(),
        literal_form: "schematic text says seven diodes".into(),
        reconciled_form: "component tables and the conduction sets count eight (D1..D7 plus Do)"
            .into(),
        affected_cell: None,
    });

    out
}
