//! Duty-weighted averaged model: equilibrium solve, rational transfer
//! functions through the Faddeev-LeVerrier recursion, frequency response,
//! and the published identified reference constants.

use crate::linalg::{self, C64};
use crate::model::*;
use crate::params::*;
use thiserror::Error;

/// Relative residual accepted on an equilibrium solve.
pub const EQUILIBRIUM_RESIDUAL_TOL: f64 = 1e-10;

/// Averaged continuous model dx/dt = A x + B u + f, y = C x.
#[derive(Debug, Clone, PartialEq)]
pub struct AveragedModel {
    pub a: Mat7,
    pub b: Mat7x2,
    pub f: Vec7,
    /// Output row; selects the load voltage.
    pub c: nalgebra::SMatrix<f64, 1, 7>,
    pub d_value: f64,
    pub variant: ModelVariant,
    pub params: ConverterParams,
}

/// Entrywise duty-weighted combination of the two phase models.
pub fn assemble_averaged(p: &ConverterParams, variant: ModelVariant) -> AveragedModel {
    let (a, b, f) = duty_weighted_average(p, variant);
    AveragedModel {
        a,
        b,
        f,
        c: printed_c_av(),
        d_value: p.d,
        variant,
        params: *p,
    }
}

/// Small-signal injection port.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputChannel {
    SourceVoltage,
    SourceCurrent,
    Duty,
}

impl InputChannel {
    pub fn label(&self) -> &'static str {
        match self {
            InputChannel::SourceVoltage => "v_src",
            InputChannel::SourceCurrent => "i_src",
            InputChannel::Duty => "duty",
        }
    }
}

/// Input column seen by the averaged dynamics for the selected channel. The
/// duty channel's column is the operating-point-dependent difference of the
/// two phase affine fields.
pub fn input_column(avg: &AveragedModel, channel: InputChannel, x_op: &Vec7) -> Vec7 {
    match channel {
        InputChannel::SourceVoltage => avg.b.column(0).into(),
        InputChannel::SourceCurrent => avg.b.column(1).into(),
        InputChannel::Duty => {
            let p = &avg.params;
            let u_op = SourceInputs::from_params(p).as_vector();
            let on = build_phase_model(p, SwitchPhase::On, avg.variant);
            let off = build_phase_model(p, SwitchPhase::Off, avg.variant);
            (on.a - off.a) * x_op + (on.b - off.b) * u_op + (on.f - off.f)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumSolve {
    pub x: Vec7,
    /// True when the conserved-mode pinning row was needed.
    pub deflated: bool,
    pub residual_rel: f64,
}

/// Solve A x + B u + f = 0. With ideal parts A is exactly singular along the
/// conserved input-winding mode z = L1 iL1 - L2 iL2, so a failed or inaccurate
/// plain solve falls back to least squares with the pinning row z = 0 (the
/// value the converter keeps when started from rest). A residual above
/// `EQUILIBRIUM_RESIDUAL_TOL` after both attempts reports marginal
/// equilibrium.
pub fn equilibrium(
    avg: &AveragedModel,
    u: &SourceInputs,
) -> Result<EquilibriumSolve, SmallSignalError> {
    let rhs_vec = avg.b * u.as_vector() + avg.f;
    let residual = |x: &Vec7| -> f64 {
        let r = avg.a * x + rhs_vec;
        r.norm() / (1.0 + rhs_vec.norm())
    };

    let plain = avg
        .a
        .lu()
        .solve(&(-rhs_vec))
        .filter(|x| x.iter().all(|v| v.is_finite()) && residual(x) <= EQUILIBRIUM_RESIDUAL_TOL);
    if let Some(x) = plain {
        let residual_rel = residual(&x);
        return Ok(EquilibriumSolve {
            x,
            deflated: false,
            residual_rel,
        });
    }

    let p = &avg.params;
    let mut m = nalgebra::SMatrix::<f64, 8, 7>::zeros();
    for r in 0..7 {
        for c in 0..7 {
            m[(r, c)] = avg.a[(r, c)];
        }
    }
    // scale the pinning row up to the magnitude of the state-matrix rows so
    // the least-squares system stays well conditioned (henry-sized
    // coefficients against 1/C-sized rows would cost ~7 digits)
    let a_scale = avg.a.iter().fold(1.0_f64, |acc, v| acc.max(v.abs()));
    let pin = a_scale / p.l1.max(p.l2);
    m[(7, IL1)] = pin * p.l1;
    m[(7, IL2)] = -pin * p.l2;
    let mut b8 = nalgebra::SVector::<f64, 8>::zeros();
    for r in 0..7 {
        b8[r] = -rhs_vec[r];
    }
    let x = m
        .svd(true, true)
        .solve(&b8, 1e-14)
        .map_err(|_| SmallSignalError::MarginalEquilibrium { residual: f64::NAN })?;
    let residual_rel = residual(&x);
    if !residual_rel.is_finite() || residual_rel > EQUILIBRIUM_RESIDUAL_TOL {
        return Err(SmallSignalError::MarginalEquilibrium {
            residual: residual_rel,
        });
    }
    Ok(EquilibriumSolve {
        x,
        deflated: true,
        residual_rel,
    })
}

/// Closed-form averaged equilibrium for the reconciled model with ideal
/// parts: capacitor ladder from the duty ratio, winding currents from charge
/// balance plus the conserved-mode pin.
pub fn ideal_reconciled_equilibrium(p: &ConverterParams) -> Vec7 {
    let d = p.d;
    let vc1 = d * p.v_pv / (1.0 - d);
    let vc2 = vc1 / (1.0 - d);
    let vco = d * p.v_bat + vc2;
    let io = vco / p.r;
    let il4 = io;
    let il3 = io / (1.0 - d);
    // charge balance on the first bank with L1 iL1 = L2 iL2 pinned:
    //   iL1 + (1-2D) iL2 = (1-D) iL3
    let m = nalgebra::Matrix2::new(1.0, 1.0 - 2.0 * d, p.l1, -p.l2);
    let rhs = nalgebra::Vector2::new((1.0 - d) * il3, 0.0);
    let sol = m.lu().solve(&rhs).expect("winding pair is nonsingular");
    let mut x = Vec7::zeros();
    x[IL1] = sol[0];
    x[IL2] = sol[1];
    x[IL3] = il3;
    x[IL4] = il4;
    x[VC1] = vc1;
    x[VC2] = vc2;
    x[VCO] = vco;
    x
}

/// Predicted low-frequency output sensitivities of the reconciled averaged
/// model with ideal parts. None when no closed form is kept.
pub fn reconciled_dc_gain_prediction(p: &ConverterParams, channel: InputChannel) -> Option<f64> {
    let d = p.d;
    match channel {
        InputChannel::Duty => Some(p.v_bat + p.v_pv * (1.0 + d) / (1.0 - d).powi(3)),
        InputChannel::SourceVoltage => Some(d / (1.0 - d).powi(2)),
        InputChannel::SourceCurrent => None,
    }
}

/// Rational transfer function with real coefficients stored in descending
/// powers of s. The denominator is monic of degree 7.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalTF {
    pub num: [f64; 7],
    pub den: [f64; 8],
    pub channel: InputChannel,
}

fn horner_desc(coeffs: &[f64], s: C64) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for &c in coeffs {
        acc = acc * s + C64::new(c, 0.0);
    }
    acc
}

impl RationalTF {
    pub fn eval(&self, s: C64) -> C64 {
        if s.re == 0.0 && s.im == 0.0 {
            return C64::new(self.dc_gain(), 0.0);
        }
        horner_desc(&self.num, s) / horner_desc(&self.den, s)
    }

    /// Steady gain. When the trailing coefficients of both polynomials sit at
    /// structural round-off (a factor of s cancels: the averaged matrix
    /// carries an exact zero eigenvalue along the conserved mode), the shared
    /// root is removed and the gain is the ratio of the next coefficients.
    pub fn dc_gain(&self) -> f64 {
        let n0 = self.num[6];
        let n1 = self.num[5];
        let d0 = self.den[7];
        let d1 = self.den[6];
        let d2 = self.den[5];
        if d1 != 0.0 && d2 != 0.0 {
            // pseudo-root magnitudes: |d0/d1| is the smallest root scale,
            // |d1/d2| the next; a gap of 6 decades marks a structural zero
            let r0 = (d0 / d1).abs();
            let r1 = (d1 / d2).abs();
            let den_structural = r0 < 1e-6 * r1;
            let num_structural = n1 != 0.0 && (n0 / n1).abs() < 1e-6 * r1;
            if den_structural && num_structural {
                return n1 / d1;
            }
        }
        n0 / d0
    }

    /// Evaluate along s = j 2 pi f for each frequency in hertz.
    pub fn response(&self, freqs_hz: &[f64]) -> Vec<FreqPoint> {
        freqs_hz
            .iter()
            .map(|&f| {
                let s = C64::new(0.0, 2.0 * std::f64::consts::PI * f);
                FreqPoint::from_complex(f, self.eval(s))
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreqPoint {
    pub freq_hz: f64,
    pub re: f64,
    pub im: f64,
    pub mag_db: f64,
    pub phase_deg: f64,
}

impl FreqPoint {
    pub fn from_complex(freq_hz: f64, g: C64) -> Self {
        FreqPoint {
            freq_hz,
            re: g.re,
            im: g.im,
            mag_db: 20.0 * g.norm().log10(),
            phase_deg: g.arg().to_degrees(),
        }
    }
}

/// Transfer function from the selected channel to the output row, computed on
/// the energy-balanced similarity so the degree-7 recursion stays well
/// conditioned. The denominator is the characteristic polynomial of the
/// averaged matrix.
pub fn transfer_function(avg: &AveragedModel, channel: InputChannel, x_op: &Vec7) -> RationalTF {
    let b_ch = input_column(avg, channel, x_op);
    let w = avg.params.energy_weights();
    let (a_bal, b_bal, c_bal) = linalg::balance_similarity(&avg.a, &b_ch, &avg.c, &w);
    let (den_asc, mats) = linalg::faddeev_leverrier(&a_bal);
    let mut num = [0.0f64; 7];
    for (j, m) in mats.iter().enumerate() {
        num[j] = (c_bal * m * b_bal)[(0, 0)];
    }
    let mut den = [0.0f64; 8];
    for k in 0..8 {
        den[k] = den_asc[7 - k];
    }
    RationalTF { num, den, channel }
}

/// Pointwise frequency response by direct complex solve of (j w I - A);
/// cross-check route for the rational form.
pub fn frequency_response_solve(
    avg: &AveragedModel,
    channel: InputChannel,
    x_op: &Vec7,
    freqs_hz: &[f64],
) -> Vec<FreqPoint> {
    let b_ch = input_column(avg, channel, x_op);
    freqs_hz
        .iter()
        .map(|&f| {
            let s = C64::new(0.0, 2.0 * std::f64::consts::PI * f);
            let mut m = nalgebra::SMatrix::<C64, 7, 7>::zeros();
            for r in 0..7 {
                for c in 0..7 {
                    m[(r, c)] = C64::new(-avg.a[(r, c)], 0.0);
                }
                m[(r, r)] += s;
            }
            let rhs = nalgebra::SVector::<C64, 7>::from_iterator(
                b_ch.iter().map(|&v| C64::new(v, 0.0)),
            );
            let y = m.lu().solve(&rhs).expect("jwI - A is nonsingular off the spectrum");
            let mut g = C64::new(0.0, 0.0);
            for k in 0..7 {
                g += C64::new(avg.c[(0, k)], 0.0) * y[k];
            }
            FreqPoint::from_complex(f, g)
        })
        .collect()
}

/// Published identified reference constants, stored digit for digit. The
/// 4-state realization and the second-order response are kept as data only;
/// the degree-7 model above is the authoritative dynamics.
pub mod identified {
    use super::*;

    pub const A4: [[f64; 4]; 4] = [
        [-7.759e-5, 0.0009677, 1.597e-5, -5.414e-5],
        [0.002662, -0.006506, -0.03907, 0.0573],
        [-0.002347, 0.02966, -0.05055, 0.5153],
        [-0.001938, 0.008198, -0.06152, -0.411],
    ];
    pub const B4: [f64; 4] = [1.072e-6, -0.006722, 0.01811, -0.04098];
    pub const C4: [f64; 4] = [-3414.0, -1.634, 0.01353, -0.0003253];
    pub const D4: f64 = 0.0;
    /// Innovation gain of the identified realization.
    pub const K4: [f64; 4] = [-0.0002757, -0.4944, 0.777, 0.6606];
    /// Final prediction error reported with the fit.
    pub const FPE: f64 = 1.787e-6;
    pub const MSE: f64 = 1.782e-6;
    /// Second-order response, descending powers of s.
    pub const TF_NUM: [f64; 2] = [0.005823, -4.897e-6];
    pub const TF_DEN: [f64; 3] = [1.0, 0.0004363, 1.428e-15];

    /// Evaluate the second-order reference response at complex s.
    pub fn identified_reference_eval(s: C64) -> Result<C64, SmallSignalError> {
        let den = horner_desc(&TF_DEN, s);
        // triangle-inequality coefficient scale at |s|
        let m = s.norm();
        let scale = m * m + TF_DEN[1].abs() * m + TF_DEN[2].abs();
        if den.norm() <= 1e-12 * scale.max(f64::MIN_POSITIVE) {
            return Err(SmallSignalError::PoleEval);
        }
        Ok(horner_desc(&TF_NUM, s) / den)
    }
}

#[derive(Debug, Error)]
pub enum SmallSignalError {
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error("averaged matrix is marginally stable; equilibrium residual {residual:.3e}")]
    MarginalEquilibrium { residual: f64 },
    #[error("evaluation point is a pole of the reference response")]
    PoleEval,
}
