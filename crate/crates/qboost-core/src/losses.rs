//! Conduction, switching, copper, and capacitor loss accounting with the
//! published worked example as a pinned preset.

use crate::params::ConverterParams;
use crate::sim::SteadyStateResult;
use thiserror::Error;

/// Inputs to the loss chain. Currents in A, voltages in V, times in s,
/// resistances in ohm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossInputs {
    /// Switch conduction-window rms current.
    pub i_d_rms: f64,
    pub duty: f64,
    pub rds_on: f64,
    /// Commutation voltage/current product terms.
    pub v_sw: f64,
    pub i_sw: f64,
    pub t_on: f64,
    pub t_off: f64,
    pub fsw: f64,
    /// Diode average current and forward drop.
    pub i_d_avg: f64,
    pub vf: f64,
    /// Inductor rms current and copper resistance.
    pub i_l_rms: f64,
    pub r_l: f64,
    /// Output-capacitor ripple rms and ESR.
    pub i_co_rms: f64,
    pub esr: f64,
    /// false reproduces the published linear I·R copper form; true uses the
    /// physical I²·R.
    pub copper_quadratic: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub p_cond: f64,
    pub p_sw: f64,
    /// p_cond + p_sw.
    pub p_switch_total: f64,
    pub p_diode: f64,
    pub p_copper: f64,
    pub p_cap: f64,
}

impl LossBreakdown {
    pub fn total(&self) -> f64 {
        self.p_switch_total + self.p_diode + self.p_copper + self.p_cap
    }

    /// (component, watts) pairs in report order.
    pub fn components(&self) -> [(&'static str, f64); 5] {
        [
            ("switch_conduction", self.p_cond),
            ("switch_commutation", self.p_sw),
            ("diode", self.p_diode),
            ("inductor_copper", self.p_copper),
            ("capacitor_esr", self.p_cap),
        ]
    }

    /// A breakdown holding a single already-summed figure, for efficiency
    /// bookkeeping when only the total is known.
    pub fn lumped(total: f64) -> Self {
        LossBreakdown {
            p_cond: 0.0,
            p_sw: 0.0,
            p_switch_total: total,
            p_diode: 0.0,
            p_copper: 0.0,
            p_cap: 0.0,
        }
    }
}

/// Loss chain:
/// P_cond = I_rms²·D·Rds, P_sw = V·I·(t_on+t_off)·fs/2, P_diode = I_avg·Vf,
/// P_copper = I·R (as published; I²·R behind the flag), P_cap = I_rms²·ESR.
pub fn loss_breakdown(inp: &LossInputs) -> LossBreakdown {
    let p_cond = inp.i_d_rms * inp.i_d_rms * inp.duty * inp.rds_on;
    let p_sw = inp.v_sw * inp.i_sw * (inp.t_on + inp.t_off) * inp.fsw / 2.0;
    let p_diode = inp.i_d_avg * inp.vf;
    let p_copper = if inp.copper_quadratic {
        inp.i_l_rms * inp.i_l_rms * inp.r_l
    } else {
        inp.i_l_rms * inp.r_l
    };
    let p_cap = inp.i_co_rms * inp.i_co_rms * inp.esr;
    LossBreakdown {
        p_cond,
        p_sw,
        p_switch_total: p_cond + p_sw,
        p_diode,
        p_copper,
        p_cap,
    }
}

/// Efficiency in percent from output power and a loss breakdown.
pub fn efficiency(p_out: f64, losses: &LossBreakdown) -> f64 {
    efficiency_pct(p_out, losses.total())
}

pub fn efficiency_pct(p_out: f64, p_loss: f64) -> f64 {
    100.0 * p_out / (p_out + p_loss)
}

/// The published worked example at 200 W. Two inputs are not stated and are
/// back-solved from the printed results: the commutation VA product
/// (0.030 W at 140 ns, 50 kHz requires V·I = 60/7 VA, split here as 20 V
/// times 3/7 A) and the diode average current (0.6 W at 1.1 V requires
/// 6/11 A). The output-capacitor rms is likewise back-solved from 0.15 W at
/// 0.29 ohm; the accompanying text claims it equals the load current, which
/// it does not, and the report carries that conflict.
pub fn bench_loss_inputs() -> LossInputs {
    LossInputs {
        i_d_rms: 2.0,
        duty: 0.5,
        rds_on: 2.5,
        v_sw: 20.0,
        i_sw: 3.0 / 7.0,
        t_on: 50e-9,
        t_off: 90e-9,
        fsw: 50e3,
        i_d_avg: 6.0 / 11.0,
        vf: 1.1,
        i_l_rms: 2.5,
        r_l: 0.5,
        i_co_rms: (0.15f64 / 0.29).sqrt(),
        esr: 0.29,
        copper_quadratic: false,
    }
}

/// Component sum of the published example (5 + 0.03 + 0.6 + 1.25 + 0.15).
pub const PUBLISHED_COMPONENT_SUM_W: f64 = 7.03;
/// Total the published efficiency computation actually divides by.
pub const PUBLISHED_TOTAL_LOSS_W: f64 = 7.13;
/// Efficiency figure as published (the chain above gives 96.56%).
pub const PUBLISHED_EFFICIENCY_PCT: f64 = 96.7;
/// Output power of the published example.
pub const PUBLISHED_P_OUT_W: f64 = 200.0;

/// Rebuild loss inputs from a converged orbit and the configured parasitics,
/// then run the loss chain. Quantities a waveform cannot supply (commutation
/// times and voltages) produce a zero contribution and a warning. Diode loss
/// sums over all eight diodes; copper over all four windings; ESR loss over
/// all three banks.
pub fn breakdown_from_waveforms(
    ss: &SteadyStateResult,
    p: &ConverterParams,
) -> (LossBreakdown, Vec<String>) {
    let mut warnings = Vec::new();
    let para = p.parasitics;
    let stats = crate::sim::device_cycle_stats(ss, p);

    let p_cond = if para.rds_on > 0.0 {
        // conduction-window rms of the switch current
        stats.switch_rms_on * stats.switch_rms_on * p.d * para.rds_on
    } else {
        warnings.push("Rds_on = 0: switch conduction loss omitted".to_string());
        0.0
    };

    warnings.push("commutation times unavailable from waveforms: switching loss omitted".to_string());
    let p_sw = 0.0;

    let p_diode = if para.vf_diode > 0.0 {
        stats.diode_avg_sum * para.vf_diode
    } else {
        warnings.push("Vf_diode = 0: diode loss omitted".to_string());
        0.0
    };

    let p_copper = if para.rl_copper > 0.0 {
        stats
            .inductor_rms
            .iter()
            .map(|i| i * i * para.rl_copper)
            .sum::<f64>()
    } else {
        warnings.push("RL_copper = 0: copper loss omitted".to_string());
        0.0
    };

    let p_cap = if para.esr_cap > 0.0 {
        stats
            .capacitor_rms
            .iter()
            .map(|i| i * i * para.esr_cap)
            .sum::<f64>()
    } else {
        warnings.push("esr_cap = 0: capacitor loss omitted".to_string());
        0.0
    };

    (
        LossBreakdown {
            p_cond,
            p_sw,
            p_switch_total: p_cond + p_sw,
            p_diode,
            p_copper,
            p_cap,
        },
        warnings,
    )
}

#[derive(Debug, Error)]
pub enum LossError {
    #[error("loss inputs must be finite and non-negative: {field}")]
    BadInput { field: &'static str },
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn published_chain_reproduced() {
        let b = loss_breakdown(&bench_loss_inputs());
        assert!(rel(b.p_cond, 5.0) < 1e-12);
        assert!(rel(b.p_sw, 0.030) < 1e-12);
        assert!(rel(b.p_switch_total, 5.03) < 1e-12);
        assert!(rel(b.p_diode, 0.6) < 1e-12);
        assert!(rel(b.p_copper, 1.25) < 1e-12);
        assert!(rel(b.p_cap, 0.15) < 1e-12);
        assert!(rel(b.total(), PUBLISHED_COMPONENT_SUM_W) < 1e-12);
    }

    #[test]
    fn quadratic_copper_mode() {
        let mut inp = bench_loss_inputs();
        inp.copper_quadratic = true;
        let b = loss_breakdown(&inp);
        assert!(rel(b.p_copper, 3.125) < 1e-12);
    }

    #[test]
    fn efficiency_at_published_totals() {
        let eta = efficiency_pct(PUBLISHED_P_OUT_W, PUBLISHED_TOTAL_LOSS_W);
        assert!((eta - 96.56).abs() < 0.05);
        // the published "96.7%" does not follow from its own totals
        assert!((eta - PUBLISHED_EFFICIENCY_PCT).abs() > 0.05);
    }

    #[test]
    fn efficiency_monotone_and_bounded() {
        let mut last = 101.0;
        for loss in [0.0, 1.0, 5.0, 20.0, 100.0] {
            let eta = efficiency_pct(200.0, loss);
            assert!(eta < last);
            last = eta;
        }
        assert_eq!(efficiency_pct(200.0, 0.0), 100.0);
    }

    #[test]
    fn component_losses_monotone_in_inputs() {
        let base = loss_breakdown(&bench_loss_inputs());
        let mut inp = bench_loss_inputs();
        inp.rds_on *= 2.0;
        assert!(rel(loss_breakdown(&inp).p_cond, 2.0 * base.p_cond) < 1e-12);
        let mut inp = bench_loss_inputs();
        inp.i_co_rms *= 2.0;
        assert!(rel(loss_breakdown(&inp).p_cap, 4.0 * base.p_cap) < 1e-12);
    }
}
