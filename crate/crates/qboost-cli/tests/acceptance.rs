//! Acceptance gate. One test per published claim bundle; each prints a
//! single verdict line listing its sub-checks with pinned tolerances, then
//! asserts it, so the harness outcome mirrors the printed verdict.
//!
//! Two of the claims are internally inconsistent with the model they
//! describe, and their checks fail by design rather than being weakened:
//! the ideal plant carries undamped modes, so a 1e5-cycle power iteration
//! cannot reach the pinned fixed point to 1e-6 (criterion 4); and the
//! printed averaged matrix disagrees with its own assembly on more rows
//! than the two it concedes (criterion 6). The failure text carries the
//! numbers.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::Complex;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use qboost_core::control::{
    anfis_loss_and_grads, anfis_train, closed_loop_simulate, train_cloned_controller, Anfis,
    Controller, PidController, TrainingSample, DEFAULT_DE_RANGE, DEFAULT_EPOCHS, DEFAULT_E_RANGE,
    DEFAULT_LR,
};
use qboost_core::formulas::{
    device_stress_report, duty_for_output, gain_from_balance, ideal_gain, input_ripple_prediction,
    topology_comparison,
};
use qboost_core::losses::{
    bench_loss_inputs, efficiency_pct, loss_breakdown, PUBLISHED_COMPONENT_SUM_W,
    PUBLISHED_EFFICIENCY_PCT, PUBLISHED_TOTAL_LOSS_W,
};
use qboost_core::model::audit_printed_average;
use qboost_core::params::{Vec7, VCO};
use qboost_core::sim::{find_steady_state, iterate_cycles, SimConfig};
use qboost_core::smallsignal::{
    assemble_averaged, equilibrium, transfer_function, InputChannel,
};
use qboost_core::{discrepancy, ConverterParams, ModelVariant, Parasitics, SourceInputs};

// ------------------------------------------------------------- scaffolding

struct Checks {
    n: usize,
    items: Vec<(String, bool)>,
}

impl Checks {
    fn new(n: usize) -> Self {
        Checks { n, items: Vec::new() }
    }

    fn check(&mut self, ok: bool, label: String) {
        self.items.push((label, ok));
    }

    /// Print exactly one verdict line, then fail the test if any sub-check
    /// failed.
    fn verdict(self) {
        let ok = self.items.iter().all(|(_, b)| *b);
        let mut line = String::new();
        for (label, b) in &self.items {
            let _ = write!(line, "; {} {}", if *b { "[pass]" } else { "[FAIL]" }, label);
        }
        println!(
            "acceptance criterion {}: {}{}",
            self.n,
            if ok { "PASS" } else { "FAIL" },
            line
        );
        assert!(ok, "criterion {} failed:{}", self.n, line);
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn bench() -> ConverterParams {
    ConverterParams::sim_bench()
}

/// Bench plant with the published 0.5 ohm winding copper; the loop tests
/// run on this damped variant.
fn loop_plant() -> ConverterParams {
    let mut p = bench();
    p.parasitics = Parasitics {
        rl_copper: 0.5,
        ..Parasitics::default()
    };
    p
}

// ---------------------------------------------------------------- criteria

#[test]
fn criterion_1_formula_reproduction() {
    let mut c = Checks::new(1);
    const TOL: f64 = 1e-12;

    let vo = ideal_gain(0.4) * 20.0;
    c.check((vo - 52.0).abs() <= TOL, format!("ideal_gain(0.4)*20 = {vo} (want 52, tol 1e-12)"));

    let d = duty_for_output(20.0, 52.0).unwrap();
    c.check((d - 0.4).abs() <= TOL, format!("duty_for_output(20,52) = {d} (want 0.4)"));

    let sr = device_stress_report(0.5, 1.0, 20.0, 12.0, 50.0);
    let i_q = sr.entries.iter().find(|e| e.name == "Q").unwrap().current_a.unwrap();
    let i_d2 = sr.entries.iter().find(|e| e.name == "D2").unwrap().current_a.unwrap();
    c.check((i_q - 3.5).abs() <= TOL, format!("I_Q at D=0.5, Io=1 = {i_q} (want 3.5)"));
    c.check((i_d2 - 5.0).abs() <= TOL, format!("I_D2 at D=0.5, Io=1 = {i_d2} (want 5)"));

    let rows = topology_comparison(0.5);
    let prop = rows.iter().find(|r| r.name == "proposed").unwrap();
    c.check(
        prop.gain_expr == "3-D" && (prop.gain_at_d.unwrap() - 2.5).abs() <= TOL,
        format!("comparator proposed row gain 3-D = {}", prop.gain_at_d.unwrap()),
    );
    c.verdict();
}

#[test]
fn criterion_2_balance_identity() {
    let mut c = Checks::new(2);
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0_f64;
    for _ in 0..1000 {
        let d: f64 = rng.gen_range(1e-12..1.0);
        worst = worst.max((gain_from_balance(d) - (3.0 - d)).abs());
    }
    let dt = t0.elapsed().as_secs_f64();
    c.check(
        worst <= 1e-12,
        format!("gain_from_balance vs 3-D over 1000 random duties: worst |err| = {worst:.3e} (tol 1e-12)"),
    );
    c.check(dt < 1.0, format!("runtime {dt:.3} s < 1 s"));
    c.verdict();
}

#[test]
fn criterion_3_loss_pipeline() {
    let mut c = Checks::new(3);
    let b = loss_breakdown(&bench_loss_inputs());
    for (label, got, want) in [
        ("switch conduction", b.p_cond, 5.0),
        ("switch commutation", b.p_sw, 0.030),
        ("switch total", b.p_switch_total, 5.03),
        ("diode", b.p_diode, 0.6),
        ("copper", b.p_copper, 1.25),
        ("capacitor", b.p_cap, 0.15),
        ("component sum", b.total(), PUBLISHED_COMPONENT_SUM_W),
    ] {
        c.check(rel(got, want) <= 1e-12, format!("{label} = {got} W (want {want})"));
    }
    let eta = efficiency_pct(200.0, PUBLISHED_TOTAL_LOSS_W);
    c.check(
        (eta - 96.56).abs() <= 0.05,
        format!("efficiency(200, 7.13) = {eta:.4}% (want 96.56 +- 0.05)"),
    );
    // the printed figure does not follow from its own totals; assert the
    // discrepancy rather than hiding it
    c.check(
        (eta - PUBLISHED_EFFICIENCY_PCT).abs() > 0.05,
        format!("published {PUBLISHED_EFFICIENCY_PCT}% stays outside the band"),
    );
    c.verdict();
}

#[test]
fn criterion_4_switched_steady_state() {
    let mut c = Checks::new(4);
    let t0 = Instant::now();
    let p = bench();
    let u = SourceInputs::from_params(&p);
    let cfg = SimConfig::default();
    let ss = find_steady_state(&p, ModelVariant::Reconciled, &u, &cfg).unwrap();

    c.check(
        ss.residual_rel < 1e-9,
        format!("fixed-point residual {:.3e} < 1e-9 rel", ss.residual_rel),
    );

    let bal = qboost_core::sim::balance_check(&ss);
    let worst_vs = bal.volt_sec_rel.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let worst_q = bal.charge_rel.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    c.check(worst_vs < 1e-6, format!("volt-second residual {worst_vs:.3e} < 1e-6 rel"));
    c.check(worst_q < 1e-6, format!("charge residual {worst_q:.3e} < 1e-6 rel"));

    let predicted = input_ripple_prediction(&p);
    let ripple = ss.meas.ripple_il[0];
    c.check(
        rel(ripple, predicted) <= 0.05,
        format!("input ripple {ripple:.5} A within 5% of predicted {predicted:.5} A"),
    );

    // 1e5-cycle iteration of the exact cycle map from rest, against the
    // pinned fixed point
    let x = iterate_cycles(&p, ModelVariant::Reconciled, &u, &Vec7::zeros(), 100_000).unwrap();
    let mismatch = (x - ss.x_periodic).norm() / ss.x_periodic.norm();

    // the magnitude of the slowest non-conserved multiplier explains the gap
    let mut mags: Vec<f64> = ss
        .floquet
        .iter()
        .map(|(re, im)| Complex::new(*re, *im).norm())
        .collect();
    mags.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let lambda2 = mags.get(1).copied().unwrap_or(0.0);
    let decay_note = if lambda2 >= 1.0 - 1e-12 {
        "that mode never contracts, so no cycle horizon reaches the gate".to_string()
    } else {
        format!(
            "reaching the gate would need ~{:.1e} cycles",
            -6.0 * std::f64::consts::LN_10 / lambda2.ln()
        )
    };
    c.check(
        mismatch <= 1e-6,
        format!(
            "cycle iteration after 1e5 periods sits {mismatch:.3e} rel from the pinned fixed \
             point (gate 1e-6); with ideal parts the slowest non-conserved multiplier has \
             |lambda| = {lambda2:.12} and {decay_note}"
        ),
    );

    let dt = t0.elapsed().as_secs_f64();
    c.check(dt < 5.0, format!("runtime {dt:.2} s < 5 s"));
    c.verdict();
}

#[test]
fn criterion_5_averaging_consistency() {
    let mut c = Checks::new(5);
    let p = bench();
    let u = SourceInputs::from_params(&p);
    let ss = find_steady_state(&p, ModelVariant::Reconciled, &u, &SimConfig::default()).unwrap();
    let avg = assemble_averaged(&p, ModelVariant::Reconciled);
    let eq = equilibrium(&avg, &u).unwrap();

    let mut worst_state = 0.0_f64;
    for k in 0..7 {
        worst_state = worst_state.max(rel(ss.meas.avg_state[k], eq.x[k]));
    }
    c.check(
        worst_state <= 0.05,
        format!("cycle-averaged orbit vs averaged equilibrium: worst state error {worst_state:.4} (tol 5%)"),
    );

    // dc gain against a finite-difference equilibrium sensitivity, source port
    let tf_v = transfer_function(&avg, InputChannel::SourceVoltage, &eq.x);
    let h = 1e-3 * p.v_pv;
    let up = SourceInputs::new(p.v_pv + h, 0.0);
    let dn = SourceInputs::new(p.v_pv - h, 0.0);
    let fd_v = (equilibrium(&avg, &up).unwrap().x[VCO] - equilibrium(&avg, &dn).unwrap().x[VCO])
        / (2.0 * h);
    c.check(
        rel(tf_v.dc_gain(), fd_v) <= 1e-6,
        format!("source-voltage G(0) = {:.9} vs FD {:.9} (tol 1e-6 rel)", tf_v.dc_gain(), fd_v),
    );

    // dc gain against a finite-difference sensitivity, duty channel
    let tf_d = transfer_function(&avg, InputChannel::Duty, &eq.x);
    let hd = 1e-5;
    let fd_d = {
        let solve = |d: f64| {
            let pd = p.with_duty(d);
            let avg_d = assemble_averaged(&pd, ModelVariant::Reconciled);
            equilibrium(&avg_d, &u).unwrap().x[VCO]
        };
        (solve(p.d + hd) - solve(p.d - hd)) / (2.0 * hd)
    };
    c.check(
        rel(tf_d.dc_gain(), fd_d) <= 1e-6,
        format!("duty G(0) = {:.6} vs FD {:.6} (tol 1e-6 rel)", tf_d.dc_gain(), fd_d),
    );

    // characteristic polynomial against determinant sampling at 5 random s
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut asc = tf_d.den.to_vec();
    asc.reverse();
    let mut worst_poly = 0.0_f64;
    for _ in 0..5 {
        let f = 10.0_f64.powf(rng.gen_range(0.0..6.0));
        let s = Complex::new(0.0, 2.0 * std::f64::consts::PI * f);
        let from_poly = qboost_core::linalg::polyval(&asc, s);
        let from_det = qboost_core::linalg::resolvent_det(&avg.a, s);
        worst_poly = worst_poly.max((from_poly - from_det).norm() / from_det.norm());
    }
    c.check(
        worst_poly <= 1e-8,
        format!("denominator vs det-sampling at 5 random s: worst {worst_poly:.3e} rel (tol 1e-8)"),
    );
    c.verdict();
}

#[test]
fn criterion_6_printed_matrix_audit() {
    let mut c = Checks::new(6);
    let p = bench();
    let audit = audit_printed_average(&p);

    // claimed: rows 1, 2, 5, 6, 7 (1-indexed) of the printed averaged state
    // matrix match the duty-weighted assembly entrywise
    let claimed_rows_0idx = [0usize, 1, 4, 5, 6];
    let offending: Vec<(usize, usize)> = audit
        .a_mismatches
        .iter()
        .copied()
        .filter(|(r, _)| claimed_rows_0idx.contains(r))
        .collect();
    c.check(
        offending.is_empty(),
        format!(
            "rows 1,2,5,6,7 match entrywise; found mismatches at (1-indexed) {:?} - the printed \
             matrix also disagrees with its own assembly on rows 5 and 7, which the discrepancy \
             ledger records",
            offending.iter().map(|(r, s)| (r + 1, s + 1)).collect::<Vec<_>>()
        ),
    );

    // mismatching cells on rows 3-4 are exactly the set the report names
    let rows34_0idx = [2usize, 3];
    let mut from_audit: Vec<(usize, usize)> = audit
        .a_mismatches
        .iter()
        .copied()
        .filter(|(r, _)| rows34_0idx.contains(r))
        .collect();
    from_audit.sort_unstable();
    let mut from_report: Vec<(usize, usize)> = discrepancy::discrepancy_report(&p)
        .iter()
        .filter_map(|e| e.affected_cell.as_ref())
        .filter(|cell| {
            cell.tag == discrepancy::MatrixTag::APrintedAverage && rows34_0idx.contains(&cell.row)
        })
        .map(|cell| (cell.row, cell.col))
        .collect();
    from_report.sort_unstable();
    c.check(
        from_audit == from_report && !from_audit.is_empty(),
        format!("rows 3-4 mismatch set {from_audit:?} equals the report's set {from_report:?}"),
    );
    c.verdict();
}

#[test]
fn criterion_7_gain_sweep_regression() {
    let mut c = Checks::new(7);
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("o");
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_qboost"))
        .arg("run")
        .arg(preset("table3_sim.json"))
        .env("QBOOST_OUT_DIR", &out_dir)
        .output()
        .unwrap();
    c.check(out.status.success(), format!("table3 sweep run exits 0 (status {:?})", out.status));

    let produced = std::fs::read_to_string(out_dir.join("sweep.csv")).unwrap_or_default();
    let rows: Vec<&str> = produced.lines().skip(1).collect();
    c.check(rows.len() == 4, format!("sweep holds rows for duties 0.35..0.5 ({} rows)", rows.len()));

    // log the deviation from the 3-D closed form per row
    for r in &rows {
        let cells: Vec<&str> = r.split(',').collect();
        let d_cell = cells.first().copied().unwrap_or("?");
        let dev_cell = cells.get(4).copied().unwrap_or("");
        println!("  sweep d={d_cell}: observed gain deviates from 3-D by {dev_cell}");
        let dev: f64 = dev_cell.parse().unwrap_or(f64::NAN);
        c.check(
            dev.is_finite(),
            format!("d={d_cell} deviation {dev:.4} logged and finite"),
        );
    }

    let golden = include_str!("golden/sweep_table3.csv");
    c.check(
        produced == golden,
        "sweep output byte-matches the pinned regression file".to_string(),
    );
    c.verdict();
}

#[test]
fn criterion_8_anfis_and_closed_loop() {
    let mut c = Checks::new(8);
    let t0 = Instant::now();

    // gradient check on 10 randomly chosen parameters
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut model = Anfis::grid_init(3, DEFAULT_E_RANGE, DEFAULT_DE_RANGE, 0.4);
    for (k, cons) in model.cons.iter_mut().enumerate() {
        cons[0] = 0.01 + 0.002 * k as f64;
        cons[1] = -1e-4 * (k as f64 + 1.0);
        cons[2] = 0.35 + 0.02 * k as f64;
    }
    let data: Vec<TrainingSample> = (0..40)
        .map(|_| {
            let e = rng.gen_range(-2.0..2.0);
            let de = rng.gen_range(-400.0..400.0);
            TrainingSample {
                e,
                de,
                duty: 0.4 + 0.04 * (e / 2.0).tanh() - 1e-4 * de,
            }
        })
        .collect();

    // parameter slots: 27 consequents, then 9 error-fan corners, then 9
    // rate-fan corners
    let slot_count = 27 + 9 + 9;
    let mut picked: Vec<usize> = Vec::new();
    while picked.len() < 10 {
        let s = rng.gen_range(0..slot_count);
        if !picked.contains(&s) {
            picked.push(s);
        }
    }
    let read_slot = |m: &Anfis, s: usize| -> f64 {
        if s < 27 {
            m.cons[s / 3][s % 3]
        } else if s < 36 {
            let i = s - 27;
            let t = &m.mf_e[i / 3];
            [t.left, t.peak, t.right][i % 3]
        } else {
            let i = s - 36;
            let t = &m.mf_de[i / 3];
            [t.left, t.peak, t.right][i % 3]
        }
    };
    let write_slot = |m: &mut Anfis, s: usize, v: f64| {
        if s < 27 {
            m.cons[s / 3][s % 3] = v;
        } else if s < 36 {
            let i = s - 27;
            let t = &mut m.mf_e[i / 3];
            match i % 3 {
                0 => t.left = v,
                1 => t.peak = v,
                _ => t.right = v,
            }
        } else {
            let i = s - 36;
            let t = &mut m.mf_de[i / 3];
            match i % 3 {
                0 => t.left = v,
                1 => t.peak = v,
                _ => t.right = v,
            }
        }
    };
    let grad_slot = |g: &qboost_core::control::AnfisGrads, s: usize| -> f64 {
        if s < 27 {
            g.cons[s / 3][s % 3]
        } else if s < 36 {
            let i = s - 27;
            g.mf_e[i / 3][i % 3]
        } else {
            let i = s - 36;
            g.mf_de[i / 3][i % 3]
        }
    };

    let (_, grads) = anfis_loss_and_grads(&model, &data).unwrap();
    let mut worst_grad = 0.0_f64;
    for &s in &picked {
        // step scaled to the input span the parameter lives on
        let h = if s >= 36 { 1e-4 } else { 1e-6 };
        let base = read_slot(&model, s);
        let mut m_p = model.clone();
        write_slot(&mut m_p, s, base + h);
        let (lp, _) = anfis_loss_and_grads(&m_p, &data).unwrap();
        let mut m_m = model.clone();
        write_slot(&mut m_m, s, base - h);
        let (lm, _) = anfis_loss_and_grads(&m_m, &data).unwrap();
        let fd = (lp - lm) / (2.0 * h);
        let an = grad_slot(&grads, s);
        let err = (an - fd).abs() / an.abs().max(fd.abs()).max(1e-8);
        worst_grad = worst_grad.max(err);
    }
    c.check(
        worst_grad <= 1e-4,
        format!("analytic vs central-difference gradients on 10 random parameters: worst {worst_grad:.3e} rel (tol 1e-4)"),
    );

    // linear-target training: single-rule net, frozen fans, 200 epochs
    let mut rng_t = ChaCha8Rng::seed_from_u64(88);
    let lin: Vec<TrainingSample> = (0..400)
        .map(|_| {
            let e = rng_t.gen_range(-2.0..2.0);
            let de = rng_t.gen_range(-400.0..400.0);
            TrainingSample {
                e,
                de,
                duty: 0.4 + 0.05 * e - 1e-4 * de,
            }
        })
        .collect();
    let mut single = Anfis::grid_init(1, DEFAULT_E_RANGE, DEFAULT_DE_RANGE, 0.4);
    single.mf_rate_scale = 0.0;
    // rate 0.25: the preconditioned quadratic is stable up to 1.0 and the
    // slowest mode then contracts fast enough to clear the gate with margin
    let (_, history) = anfis_train(single, &lin, 200, 0.25).unwrap();
    let final_rmse = *history.last().unwrap();
    c.check(
        final_rmse < 1e-3,
        format!("linear-target RMSE after 200 epochs = {final_rmse:.3e} (gate 1e-3, fixed seed)"),
    );

    // closed loop at the simulation bench values, both controllers
    let plant = loop_plant();
    let mut pid = Controller::Pid(PidController::tuned_default());
    let res_pid = closed_loop_simulate(&plant, &mut pid, 52.0, &[], 1.5).unwrap();
    c.check(
        res_pid.metrics.steady_state_error_v <= 1.04,
        format!(
            "pid holds |Vo - 52| = {:.4} V <= 1.04 V at steady state",
            res_pid.metrics.steady_state_error_v
        ),
    );

    let clone = train_cloned_controller(&plant, 52.0, DEFAULT_EPOCHS, DEFAULT_LR).unwrap();
    let mut fuzzy = Controller::Anfis {
        model: clone.model,
        prev_e: None,
    };
    let res_fuzzy = closed_loop_simulate(&plant, &mut fuzzy, 52.0, &[], 1.5).unwrap();
    c.check(
        res_fuzzy.metrics.steady_state_error_v <= 1.04,
        format!(
            "anfis clone holds |Vo - 52| = {:.4} V <= 1.04 V at steady state",
            res_fuzzy.metrics.steady_state_error_v
        ),
    );

    let dt = t0.elapsed().as_secs_f64();
    c.check(dt < 30.0, format!("runtime {dt:.1} s < 30 s"));
    c.verdict();
}

#[test]
fn criterion_9_cli_determinism() {
    let mut c = Checks::new(9);
    let dir = tempfile::tempdir().unwrap();
    let mut passes: Vec<Vec<(String, Vec<u8>)>> = Vec::new();
    for k in 0..2 {
        let out_dir = dir.path().join(format!("run{k}"));
        let out = std::process::Command::new(env!("CARGO_BIN_EXE_qboost"))
            .arg("run")
            .arg(preset("table3_sim.json"))
            .env("QBOOST_OUT_DIR", &out_dir)
            .output()
            .unwrap();
        assert!(out.status.success(), "{out:?}");
        let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(&out_dir)
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                (
                    e.file_name().to_string_lossy().to_string(),
                    std::fs::read(e.path()).unwrap(),
                )
            })
            .collect();
        files.sort_by(|a, b| a.0.cmp(&b.0));
        passes.push(files);
    }
    let names: Vec<&str> = passes[0].iter().map(|(n, _)| n.as_str()).collect();
    c.check(
        names == ["devices.csv", "measurements.csv", "sweep.csv", "waveform.csv"],
        format!("run emits the full artifact set {names:?}"),
    );
    c.check(
        passes[0] == passes[1],
        "identical config and seed produce byte-identical CSVs across two runs".to_string(),
    );
    c.verdict();
}

fn preset(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("presets")
        .join(name)
}
