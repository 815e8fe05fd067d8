//! Closed-form steady-state layer: gain, duty inversion, device stresses,
//! component sizing, soft-switching calculators, and the topology comparator.

use crate::params::ConverterParams;
use nalgebra::{Matrix2, Vector2};
use thiserror::Error;

/// Ideal voltage gain M(D) = 3 - D, valid for D in (0,1).
pub fn ideal_gain(d: f64) -> f64 {
    3.0 - d
}

/// Invert M(D) = 3 - D for the duty that yields `vo` from `vin`.
/// Feasible only for vo/vin in (2,3).
pub fn duty_for_output(vin: f64, vo: f64) -> Result<f64, FormulaError> {
    if !(vin > 0.0) {
        return Err(FormulaError::NonPositiveInput { field: "vin" });
    }
    let m = vo / vin;
    if m <= 2.0 || m >= 3.0 {
        return Err(FormulaError::GainOutOfRange {
            requested: m,
            lo: 2.0 * vin,
            hi: 3.0 * vin,
        });
    }
    Ok(3.0 - m)
}

/// Reproduce the published volt-second-balance chain by solving its
/// 2-unknown linear system numerically: the clamped bank voltage equals the
/// source, and 2·Vsrc + vC1·(1-D) - vC2 = 0. Returns vC2/Vsrc, which the
/// derivation identifies with the voltage gain; the result is 3 - D to
/// machine precision. The switched model does not obey the clamping premise,
/// and the discrepancy report carries that conflict.
pub fn gain_from_balance(d: f64) -> f64 {
    let v_src = 1.0;
    let m = Matrix2::new(1.0, 0.0, 1.0 - d, -1.0);
    let rhs = Vector2::new(v_src, -2.0 * v_src);
    let sol = m.lu().solve(&rhs).expect("2x2 balance system is nonsingular");
    sol[1] / v_src
}

/// One device's published stress figures. `voltage_alt_v` is present where
/// the source text prints two inconsistent expressions for the same device.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceStress {
    pub name: &'static str,
    pub voltage_v: Option<f64>,
    pub voltage_alt_v: Option<f64>,
    pub current_a: Option<f64>,
    pub note: Option<&'static str>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StressReport {
    pub d: f64,
    pub io: f64,
    pub entries: Vec<DeviceStress>,
    /// Input-port current Io·(3-D).
    pub i_in: f64,
}

/// Evaluate the published stress identities at an operating point.
/// Conventions as printed, conflicts preserved: D3/D4 blocking uses the
/// printed Vpv/2 (which contradicts the clamp vC1 = Vpv), D6 carries both
/// printed forms, and D7's printed expression goes negative for Vo > Vbat.
pub fn device_stress_report(d: f64, io: f64, vpv: f64, vbat: f64, vo: f64) -> StressReport {
    let i_in = io * (3.0 - d);
    let i_q = (4.0 - d) * io;
    let entries = vec![
        DeviceStress {
            name: "Q",
            voltage_v: Some(vpv),
            voltage_alt_v: None,
            current_a: Some(i_q),
            note: None,
        },
        DeviceStress {
            name: "D1",
            voltage_v: Some(vpv),
            voltage_alt_v: None,
            current_a: Some(i_in), // carries the L2 branch current
            note: None,
        },
        DeviceStress {
            name: "D2",
            voltage_v: Some(vpv - vpv), // printed Vpv - vC1 with vC1 clamped to Vpv
            voltage_alt_v: None,
            current_a: Some(2.0 * io * (3.0 - d)),
            note: None,
        },
        DeviceStress {
            name: "D3",
            voltage_v: Some(vpv / 2.0),
            voltage_alt_v: Some(vpv),
            current_a: Some(i_in),
            note: Some("printed Vpv/2 conflicts with the clamp vC1 = Vpv"),
        },
        DeviceStress {
            name: "D4",
            voltage_v: Some(vpv / 2.0),
            voltage_alt_v: Some(vpv),
            current_a: Some(i_q),
            note: Some("printed Vpv/2 conflicts with the clamp vC1 = Vpv"),
        },
        DeviceStress {
            name: "D5",
            voltage_v: Some(vo / 2.0),
            voltage_alt_v: None,
            current_a: Some(io),
            note: None,
        },
        DeviceStress {
            name: "D6",
            voltage_v: Some(vo / 2.0),
            voltage_alt_v: Some(vo - vbat), // second printed form vC2 - Vbat with vC2 = Vo
            current_a: Some(io),
            note: Some("two inconsistent printed forms"),
        },
        DeviceStress {
            name: "D7",
            voltage_v: Some((vbat - vo) / 2.0),
            voltage_alt_v: None,
            current_a: Some(io),
            note: Some("printed form is negative whenever Vo > Vbat"),
        },
        DeviceStress {
            name: "Do",
            voltage_v: None,
            voltage_alt_v: None,
            current_a: Some(io),
            note: None,
        },
    ];
    StressReport { d, io, entries, i_in }
}

/// Published inductor-branch averages: L3 carries (2-D)·Io, L4 carries Io.
pub fn branch_current_l3(d: f64, io: f64) -> f64 {
    (2.0 - d) * io
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SizingSpec {
    pub vin: f64,
    pub vo: f64,
    pub d: f64,
    pub fs: f64,
    pub r: f64,
    /// Allowed inductor current ripple (A).
    pub delta_i: f64,
    /// Allowed capacitor voltage ripple (V).
    pub delta_v: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SizedComponents {
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
    pub l4: f64,
    pub c1: f64,
    pub c2: f64,
    pub co: f64,
}

/// Ripple-budget component sizing as published:
/// L1 = L2 = Vin·D/(ΔI·fs), L3 = L4 = Vin·D²/(ΔI·fs·(1-D)),
/// C1 = Vo·D/(ΔV·fs·R·(1-D)), C2 = Vo·D/(ΔV·fs·R), Co = Vo/(ΔV·fs·3·(1-D)·R).
pub fn size_components(spec: &SizingSpec) -> Result<SizedComponents, FormulaError> {
    for (field, v) in [
        ("vin", spec.vin),
        ("vo", spec.vo),
        ("fs", spec.fs),
        ("r", spec.r),
        ("delta_i", spec.delta_i),
        ("delta_v", spec.delta_v),
    ] {
        if !(v > 0.0) {
            return Err(FormulaError::NonPositiveInput { field });
        }
    }
    if !(spec.d > 0.0 && spec.d < 1.0) {
        return Err(FormulaError::DutyOutOfRange { value: spec.d });
    }
    let l12 = spec.vin * spec.d / (spec.delta_i * spec.fs);
    let l34 = spec.vin * spec.d * spec.d / (spec.delta_i * spec.fs * (1.0 - spec.d));
    let c1 = spec.vo * spec.d / (spec.delta_v * spec.fs * spec.r * (1.0 - spec.d));
    let c2 = spec.vo * spec.d / (spec.delta_v * spec.fs * spec.r);
    let co = spec.vo / (spec.delta_v * spec.fs * 3.0 * (1.0 - spec.d) * spec.r);
    Ok(SizedComponents {
        l1: l12,
        l2: l12,
        l3: l34,
        l4: l34,
        c1,
        c2,
        co,
    })
}

/// Input-winding current ripple the sizing rule predicts at a parameter set:
/// ΔiL1 = Vpv·D/(L1·fs).
pub fn input_ripple_prediction(p: &ConverterParams) -> f64 {
    p.v_pv * p.d / (p.l1 * p.fs)
}

/// Minimum snubber inductance L = V_off·t_r/(2·γ·I_on).
pub fn min_snubber_inductance(
    v_q_off: f64,
    t_r: f64,
    gamma_i: f64,
    i_q_on: f64,
) -> Result<f64, FormulaError> {
    for (field, v) in [
        ("v_q_off", v_q_off),
        ("t_r", t_r),
        ("gamma_i", gamma_i),
        ("i_q_on", i_q_on),
    ] {
        if !(v > 0.0) {
            return Err(FormulaError::NonPositiveInput { field });
        }
    }
    Ok(v_q_off * t_r / (2.0 * gamma_i * i_q_on))
}

/// Zero-current turn-off instant t_zCT = t_zVT + 4·I_L·Leq/(n·Vin).
pub fn zcs_turnoff_instant(
    t_zvt: f64,
    i_l_t2: f64,
    leq: f64,
    n: f64,
    vin: f64,
) -> Result<f64, FormulaError> {
    for (field, v) in [("n", n), ("vin", vin)] {
        if !(v > 0.0) {
            return Err(FormulaError::NonPositiveInput { field });
        }
    }
    Ok(t_zvt + 4.0 * i_l_t2 * leq / (n * vin))
}

/// One comparator row. `gain_at_d` is None outside the expression's validity
/// domain. Evaluation conventions for rows whose gain uses symbols foreign to
/// a single-duty comparison are fixed here: the two-duty interleaved row takes
/// D1 = 1-D, the coupled-inductor row n = 1, the three-switch row D1 = D with
/// D2 = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct TopologyEntry {
    pub name: &'static str,
    pub switches: u32,
    pub diodes: u32,
    pub inductors: u32,
    pub capacitors: u32,
    pub fs_khz: f64,
    pub gain_expr: &'static str,
    pub gain_at_d: Option<f64>,
    pub efficiency_pct: f64,
    pub power_w: f64,
}

/// Reported comparison table: six alternatives plus this converter.
pub fn topology_comparison(d: f64) -> Vec<TopologyEntry> {
    let omd = 1.0 - d;
    let rows = vec![
        TopologyEntry {
            name: "alt-a",
            switches: 1,
            diodes: 4,
            inductors: 2,
            capacitors: 3,
            fs_khz: 118.0,
            gain_expr: "(2-D)/(1-D)^2",
            gain_at_d: valid(d, (2.0 - d) / (omd * omd)),
            efficiency_pct: 91.2,
            power_w: 500.0,
        },
        TopologyEntry {
            name: "alt-b",
            switches: 1,
            diodes: 2,
            inductors: 3,
            capacitors: 2,
            fs_khz: 50.0,
            gain_expr: "(D/D1)^2, D1=1-D",
            gain_at_d: valid(d, (d / omd) * (d / omd)),
            efficiency_pct: 95.9,
            power_w: 100.0,
        },
        TopologyEntry {
            name: "alt-c",
            switches: 1,
            diodes: 5,
            inductors: 2,
            capacitors: 4,
            fs_khz: 40.0,
            gain_expr: "(1+n)/(1-D)^2, n=1",
            gain_at_d: valid(d, 2.0 / (omd * omd)),
            efficiency_pct: 92.0,
            power_w: 200.0,
        },
        TopologyEntry {
            name: "alt-d",
            switches: 2,
            diodes: 4,
            inductors: 2,
            capacitors: 3,
            fs_khz: 50.0,
            gain_expr: "(3-D)/(1-3D)",
            gain_at_d: if d < 1.0 / 3.0 {
                valid(d, (3.0 - d) / (1.0 - 3.0 * d))
            } else {
                None
            },
            efficiency_pct: 93.2,
            power_w: 200.0,
        },
        TopologyEntry {
            name: "alt-e",
            switches: 3,
            diodes: 2,
            inductors: 2,
            capacitors: 1,
            fs_khz: 50.0,
            gain_expr: "(1+D1)/(1-D1-D2), D1=D, D2=0",
            gain_at_d: valid(d, (1.0 + d) / omd),
            efficiency_pct: 93.6,
            power_w: 200.0,
        },
        TopologyEntry {
            name: "alt-f",
            switches: 1,
            diodes: 3,
            inductors: 2,
            capacitors: 3,
            fs_khz: 100.0,
            gain_expr: "(3+D)/(2(1-D))",
            gain_at_d: valid(d, (3.0 + d) / (2.0 * omd)),
            efficiency_pct: 92.2,
            power_w: 250.0,
        },
        TopologyEntry {
            name: "proposed",
            switches: 1,
            diodes: 8,
            inductors: 4,
            capacitors: 3,
            fs_khz: 50.0,
            gain_expr: "3-D",
            gain_at_d: valid(d, 3.0 - d),
            efficiency_pct: 96.7,
            power_w: 200.0,
        },
    ];
    rows
}

fn valid(d: f64, gain: f64) -> Option<f64> {
    if d > 0.0 && d < 1.0 && gain.is_finite() {
        Some(gain)
    } else {
        None
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum FormulaError {
    #[error("{field}: must be strictly positive")]
    NonPositiveInput { field: &'static str },
    #[error("duty must lie in (0,1), got {value}")]
    DutyOutOfRange { value: f64 },
    #[error("requested gain {requested:.6} infeasible; reachable output band is ({lo:.6}, {hi:.6}) V")]
    GainOutOfRange { requested: f64, lo: f64, hi: f64 },
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gain_and_inverse() {
        assert!((ideal_gain(0.4) * 20.0 - 52.0).abs() < 1e-12);
        assert!((duty_for_output(20.0, 52.0).unwrap() - 0.4).abs() < 1e-12);
        assert!(matches!(
            duty_for_output(20.0, 80.0),
            Err(FormulaError::GainOutOfRange { .. })
        ));
    }

    #[test]
    fn balance_chain_matches_closed_form() {
        for k in 0..100 {
            let d = 0.005 + 0.99 * (k as f64) / 99.0;
            assert!((gain_from_balance(d) - (3.0 - d)).abs() < 1e-12);
        }
    }

    #[test]
    fn stress_values_at_half_duty() {
        let r = device_stress_report(0.5, 1.0, 20.0, 12.0, 50.0);
        let q = r.entries.iter().find(|e| e.name == "Q").unwrap();
        assert!((q.current_a.unwrap() - 3.5).abs() < 1e-12);
        let d2 = r.entries.iter().find(|e| e.name == "D2").unwrap();
        assert!((d2.current_a.unwrap() - 5.0).abs() < 1e-12);
        assert!((r.i_in - 2.5).abs() < 1e-12);
        assert!((branch_current_l3(0.5, 1.0) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn sizing_rules() {
        let spec = SizingSpec {
            vin: 20.0,
            vo: 52.0,
            d: 0.4,
            fs: 50e3,
            r: 1000.0,
            delta_i: 0.08,
            delta_v: 0.05,
        };
        let s = size_components(&spec).unwrap();
        assert!((s.l1 - 2e-3).abs() < 1e-12);
        assert!((s.l3 - 20.0 * 0.16 / (0.08 * 50e3 * 0.6)).abs() < 1e-15);
        assert!(s.c2 < s.c1);
    }

    #[test]
    fn soft_switching_calculators() {
        let l = min_snubber_inductance(20.0, 50e-9, 0.5, 3.5).unwrap();
        assert!((l - 0.2857e-6).abs() < 1e-10);
        let t = zcs_turnoff_instant(1e-6, 2.0, 10e-6, 1.0, 20.0).unwrap();
        assert!((t - 5e-6).abs() < 1e-18);
    }

    #[test]
    fn comparator_rows() {
        let rows = topology_comparison(0.5);
        assert_eq!(rows.len(), 7);
        let prop = rows.iter().find(|r| r.name == "proposed").unwrap();
        assert!((prop.gain_at_d.unwrap() - 2.5).abs() < 1e-12);
        // the (3-D)/(1-3D) row is out of domain at D = 0.5
        let altd = rows.iter().find(|r| r.name == "alt-d").unwrap();
        assert!(altd.gain_at_d.is_none());
        let rows = topology_comparison(0.2);
        let altd = rows.iter().find(|r| r.name == "alt-d").unwrap();
        assert!((altd.gain_at_d.unwrap() - 7.0).abs() < 1e-12);
    }
}
