//! Scenario execution: dispatch a validated config to the analysis
//! pipelines and emit CSV/markdown artifacts into the output directory.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use qboost_core::control::{
    closed_loop_simulate, fit_single_diode, pv_operating_point, train_cloned_controller,
    Controller, PidController, PvPanel, StepEvent, StepKind,
};
use qboost_core::formulas::{
    device_stress_report, duty_for_output, ideal_gain, size_components, topology_comparison,
    SizingSpec,
};
use qboost_core::losses::{
    bench_loss_inputs, efficiency_pct, loss_breakdown, PUBLISHED_COMPONENT_SUM_W,
    PUBLISHED_EFFICIENCY_PCT, PUBLISHED_P_OUT_W, PUBLISHED_TOTAL_LOSS_W,
};
use qboost_core::params::STATE_NAMES;
use qboost_core::sim::{find_steady_state, sweep, SimConfig, Trajectory};
use qboost_core::smallsignal::{
    assemble_averaged, equilibrium, frequency_response_solve, transfer_function, FreqPoint,
};
use qboost_core::{discrepancy, ConverterParams, ModelVariant, SourceInputs};
use serde::Serialize;

use crate::config::{
    BodeMethod, ClosedLoopBlock, CompareBlock, ControllerName, DesignBlock, EventKindName,
    LossesBlock, Scenario, SimulateBlock, StressBlock, TrainBlock, Validated,
};
use crate::emit::{int, markdown_table, num, Csv};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    /// Diverged, unstable, or otherwise numerically infeasible.
    #[error("{0}")]
    Numerical(String),
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
}

fn numerical<E: std::fmt::Display>(e: E) -> RunError {
    RunError::Numerical(e.to_string())
}

/// Output-directory handle. File names are bare (checked), so nothing can
/// land outside the configured directory.
struct OutDir {
    root: PathBuf,
    written: Vec<PathBuf>,
}

impl OutDir {
    fn create(root: &Path) -> Result<Self, RunError> {
        fs::create_dir_all(root)?;
        Ok(OutDir {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, content: &str) -> Result<(), RunError> {
        assert!(
            !name.contains(['/', '\\']) && name != "." && name != "..",
            "output names are bare file names"
        );
        let path = self.root.join(name);
        fs::write(&path, content)?;
        self.written.push(path);
        Ok(())
    }
}

/// Execute the scenario; returns the paths of every file written.
pub fn run(v: &Validated, out_root: &Path) -> Result<Vec<PathBuf>, RunError> {
    let mut out = OutDir::create(out_root)?;
    match &v.scenario {
        Scenario::Simulate(b) => run_simulate(&v.params, b, &mut out)?,
        Scenario::Design(b) => run_design(&v.params, b, &mut out)?,
        Scenario::Stress(b) => run_stress(&v.params, b, &mut out)?,
        Scenario::Bode(b) => run_bode(&v.params, b, &mut out)?,
        Scenario::Losses(b) => run_losses(b, &mut out)?,
        Scenario::Compare(b) => run_compare(&v.params, b, &mut out)?,
        Scenario::Train(b) => run_train(&v.params, b, &mut out)?,
        Scenario::ClosedLoop(b) => run_closedloop(&v.params, b, &mut out)?,
    }
    Ok(out.written)
}

// ------------------------------------------------------------- simulate

fn run_simulate(
    p: &ConverterParams,
    b: &SimulateBlock,
    out: &mut OutDir,
) -> Result<(), RunError> {
    let cfg = SimConfig {
        steps_per_phase: b.steps_per_phase,
        ..SimConfig::default()
    };
    let u = SourceInputs::from_params(p);
    let variant = b.variant.to_core();
    let ss = find_steady_state(p, variant, &u, &cfg).map_err(numerical)?;

    let mut wf = Csv::new(&[
        "t", "iL1", "iL2", "iL3", "iL4", "vC1", "vC2", "vCo", "i_Q", "phase",
    ]);
    for (t, x, phase) in ss.cycle.flat() {
        let mut cells: Vec<String> = vec![num(t)];
        cells.extend(x.iter().map(|v| num(*v)));
        cells.push(num(Trajectory::switch_current(x, phase)));
        cells.push(phase.label().to_string());
        wf.row(cells);
    }
    out.write("waveform.csv", &wf.finish())?;

    let m = &ss.meas;
    let mut meas = Csv::new(&["quantity", "value"]);
    for (name, v) in STATE_NAMES.iter().zip(m.avg_state.iter()) {
        meas.kv(&format!("avg_{name}"), num(*v));
    }
    meas.kv("avg_vo", num(m.avg_vo));
    for (k, r) in m.ripple_il.iter().enumerate() {
        meas.kv(&format!("ripple_iL{}", k + 1), num(*r));
    }
    for (name, r) in ["vC1", "vC2", "vCo"].iter().zip(m.ripple_vc.iter()) {
        meas.kv(&format!("ripple_{name}"), num(*r));
    }
    meas.kv("zcs_residual_a", num(m.zcs_residual_a));
    for (k, f) in m.dcm_flags.iter().enumerate() {
        meas.kv(&format!("dcm_iL{}", k + 1), int(*f as usize));
    }
    meas.kv("orbit_residual_rel", num(ss.residual_rel));
    meas.kv("spectral_radius", num(ss.rho));
    meas.kv("deflated", int(ss.deflated as usize));
    out.write("measurements.csv", &meas.finish())?;

    let mut dev = Csv::new(&["device", "avg_a", "rms_a", "peak_a", "peak_v"]);
    for d in &m.devices {
        dev.row([
            d.name.to_string(),
            num(d.avg_a),
            num(d.rms_a),
            num(d.peak_a),
            num(d.peak_v),
        ]);
    }
    out.write("devices.csv", &dev.finish())?;

    if !b.sweep_duties.is_empty() {
        let rows = sweep(p, &b.sweep_duties, variant, &cfg);
        let mut sw = Csv::new(&[
            "d",
            "avg_vo",
            "gain_observed",
            "gain_formula",
            "deviation",
            "rho",
            "error",
        ]);
        let opt = |v: Option<f64>| v.map(num).unwrap_or_default();
        for r in &rows {
            sw.row([
                num(r.d),
                opt(r.meas.as_ref().map(|m| m.avg_vo)),
                opt(r.gain_observed),
                num(r.gain_formula),
                opt(r.deviation),
                opt(r.rho),
                r.error.clone().unwrap_or_default(),
            ]);
        }
        out.write("sweep.csv", &sw.finish())?;
    }
    Ok(())
}

// --------------------------------------------------------------- design

fn run_design(p: &ConverterParams, b: &DesignBlock, out: &mut OutDir) -> Result<(), RunError> {
    let vin = b.pv.map(|pv| pv.v_mp).unwrap_or(p.v_pv);
    let duty = duty_for_output(vin, b.vo_target).map_err(numerical)?;
    let sized = size_components(&SizingSpec {
        vin,
        vo: b.vo_target,
        d: duty,
        fs: p.fs,
        r: p.r,
        delta_i: b.delta_i,
        delta_v: b.delta_v,
    })
    .map_err(numerical)?;

    let mut csv = Csv::new(&["quantity", "value"]);
    csv.kv("vin_v", num(vin));
    csv.kv("vo_target_v", num(b.vo_target));
    csv.kv("gain", num(b.vo_target / vin));
    csv.kv("duty", num(duty));
    csv.kv("L1_h", num(sized.l1));
    csv.kv("L2_h", num(sized.l2));
    csv.kv("L3_h", num(sized.l3));
    csv.kv("L4_h", num(sized.l4));
    csv.kv("C1_f", num(sized.c1));
    csv.kv("C2_f", num(sized.c2));
    csv.kv("Co_f", num(sized.co));
    // round trip: the sized input inductor must give back the ripple budget
    csv.kv("ripple_check_a", num(vin * duty / (sized.l1 * p.fs)));
    out.write("design.csv", &csv.finish())?;

    if let Some(pv) = &b.pv {
        let panel = PvPanel {
            v_mp: pv.v_mp,
            i_mp: pv.i_mp,
            i_sc: pv.i_sc,
            v_oc: pv.v_oc,
            p_max_published: pv.p_max_plate,
        };
        let fit = fit_single_diode(&panel).map_err(numerical)?;
        let mut f = Csv::new(&["quantity", "value"]);
        f.kv("a_v", num(fit.a));
        f.kv("i0_a", num(fit.i0));
        f.kv("fit_residual_rel", num(fit.residual));
        f.kv("vmp_imp_w", num(fit.vmp_imp_w));
        f.kv("p_max_plate_w", num(pv.p_max_plate));
        out.write("pv_fit.csv", &f.finish())?;

        let mut curve = Csv::new(&["v", "i_a", "p_w"]);
        let n = 200;
        for k in 0..=n {
            let v = panel.v_oc * k as f64 / n as f64;
            let i = pv_operating_point(&panel, v).map_err(numerical)?;
            curve.row([num(v), num(i), num(v * i)]);
        }
        out.write("pv_curve.csv", &curve.finish())?;
    }
    Ok(())
}

// --------------------------------------------------------------- stress

fn run_stress(p: &ConverterParams, b: &StressBlock, out: &mut OutDir) -> Result<(), RunError> {
    let vo = b.vo.unwrap_or(ideal_gain(p.d) * p.v_pv);
    let report = device_stress_report(p.d, b.io, p.v_pv, p.v_bat, vo);
    let mut csv = Csv::new(&["device", "voltage_v", "voltage_alt_v", "current_a", "note"]);
    let opt = |v: Option<f64>| v.map(num).unwrap_or_default();
    for e in &report.entries {
        csv.row([
            e.name.to_string(),
            opt(e.voltage_v),
            opt(e.voltage_alt_v),
            opt(e.current_a),
            e.note.unwrap_or_default().to_string(),
        ]);
    }
    csv.row([
        "input".into(),
        String::new(),
        String::new(),
        num(report.i_in),
        "port average".into(),
    ]);
    out.write("stress.csv", &csv.finish())?;
    Ok(())
}

// ----------------------------------------------------------------- bode

fn run_bode(p: &ConverterParams, b: &crate::config::BodeBlock, out: &mut OutDir) -> Result<(), RunError> {
    let avg = assemble_averaged(p, ModelVariant::Reconciled);
    let u = SourceInputs::from_params(p);
    let eq = equilibrium(&avg, &u).map_err(numerical)?;

    let n = b.points;
    let ratio = b.f_max_hz / b.f_min_hz;
    let mut freqs: Vec<f64> = (0..n)
        .map(|k| b.f_min_hz * ratio.powf(k as f64 / (n - 1) as f64))
        .collect();
    freqs[n - 1] = b.f_max_hz;

    let channel = b.channel.to_core();
    let points: Vec<FreqPoint> = match b.method {
        BodeMethod::Rational => transfer_function(&avg, channel, &eq.x).response(&freqs),
        BodeMethod::Pointwise => frequency_response_solve(&avg, channel, &eq.x, &freqs),
    };

    let mut csv = Csv::new(&["freq_hz", "re", "im", "mag_db", "phase_deg"]);
    for pt in &points {
        csv.row([
            num(pt.freq_hz),
            num(pt.re),
            num(pt.im),
            num(pt.mag_db),
            num(pt.phase_deg),
        ]);
    }
    out.write("bode.csv", &csv.finish())?;
    Ok(())
}

// --------------------------------------------------------------- losses

fn run_losses(b: &LossesBlock, out: &mut OutDir) -> Result<(), RunError> {
    let (inp, p_out) = b.resolve();
    let bench = bench_loss_inputs();
    let bd = loss_breakdown(&inp);

    // back-solved members of the published example keep their flag as long
    // as the config does not override them
    let mut inputs = Csv::new(&["input", "value", "derived"]);
    let rows: [(&str, f64, bool); 14] = [
        ("i_d_rms", inp.i_d_rms, false),
        ("duty", inp.duty, false),
        ("rds_on", inp.rds_on, false),
        ("v_sw", inp.v_sw, false),
        ("i_sw", inp.i_sw, inp.i_sw == bench.i_sw),
        ("t_on", inp.t_on, false),
        ("t_off", inp.t_off, false),
        ("fsw", inp.fsw, false),
        ("i_d_avg", inp.i_d_avg, inp.i_d_avg == bench.i_d_avg),
        ("vf", inp.vf, false),
        ("i_l_rms", inp.i_l_rms, false),
        ("r_l", inp.r_l, false),
        ("i_co_rms", inp.i_co_rms, inp.i_co_rms == bench.i_co_rms),
        ("esr", inp.esr, false),
    ];
    for (name, v, derived) in rows {
        inputs.row([name.to_string(), num(v), int(derived as usize)]);
    }
    inputs.row([
        "copper_quadratic".into(),
        int(inp.copper_quadratic as usize),
        int(0),
    ]);
    out.write("loss_inputs.csv", &inputs.finish())?;

    let total = bd.total();
    let mut csv = Csv::new(&["component", "watts", "percent_of_total"]);
    for (name, w) in bd.components() {
        let pct = if total > 0.0 { 100.0 * w / total } else { 0.0 };
        csv.row([name.to_string(), num(w), num(pct)]);
    }
    csv.row(["total".into(), num(total), num(100.0)]);
    out.write("losses.csv", &csv.finish())?;

    let mut eff = Csv::new(&["quantity", "value"]);
    eff.kv("p_out_w", num(p_out));
    eff.kv("component_sum_w", num(total));
    eff.kv("efficiency_pct", num(efficiency_pct(p_out, total)));
    eff.kv("published_component_sum_w", num(PUBLISHED_COMPONENT_SUM_W));
    eff.kv("published_total_w", num(PUBLISHED_TOTAL_LOSS_W));
    eff.kv(
        "efficiency_pct_at_published_total",
        num(efficiency_pct(PUBLISHED_P_OUT_W, PUBLISHED_TOTAL_LOSS_W)),
    );
    eff.kv("published_efficiency_pct", num(PUBLISHED_EFFICIENCY_PCT));
    out.write("efficiency.csv", &eff.finish())?;
    Ok(())
}

// -------------------------------------------------------------- compare

fn run_compare(p: &ConverterParams, _b: &CompareBlock, out: &mut OutDir) -> Result<(), RunError> {
    let rows = topology_comparison(p.d);
    let header = [
        "name",
        "switches",
        "diodes",
        "inductors",
        "capacitors",
        "fs_khz",
        "gain_expr",
        "gain_at_d",
        "efficiency_pct",
        "power_w",
    ];
    let cells: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.name.to_string(),
                int(r.switches as usize),
                int(r.diodes as usize),
                int(r.inductors as usize),
                int(r.capacitors as usize),
                num(r.fs_khz),
                r.gain_expr.to_string(),
                r.gain_at_d.map(num).unwrap_or_default(),
                num(r.efficiency_pct),
                num(r.power_w),
            ]
        })
        .collect();
    let mut csv = Csv::new(&header);
    for row in &cells {
        csv.row(row.iter().map(|s| s.as_str()));
    }
    out.write("comparison.csv", &csv.finish())?;
    out.write("comparison.md", &markdown_table(&header, &cells))?;

    let report = discrepancy::discrepancy_report(p);
    let mut disc = Csv::new(&[
        "kind",
        "location",
        "literal",
        "reconciled",
        "matrix",
        "row",
        "col",
    ]);
    for e in &report {
        let (mat, row, col) = match &e.affected_cell {
            Some(c) => (c.tag.label().to_string(), int(c.row), int(c.col)),
            None => (String::new(), String::new(), String::new()),
        };
        disc.row([
            e.kind.label().to_string(),
            e.location.clone(),
            e.literal_form.clone(),
            e.reconciled_form.clone(),
            mat,
            row,
            col,
        ]);
    }
    out.write("discrepancies.csv", &disc.finish())?;
    Ok(())
}

// ---------------------------------------------------------------- train

/// Serialization mirror of the fitted rule base.
#[derive(Serialize)]
struct ModelDump {
    e_range: (f64, f64),
    de_range: (f64, f64),
    mf_rate_scale: f64,
    mf_e: Vec<[f64; 3]>,
    mf_de: Vec<[f64; 3]>,
    cons: Vec<[f64; 3]>,
}

fn dump_model(model: &qboost_core::control::Anfis) -> String {
    let tri = |t: &qboost_core::control::Triangle| [t.left, t.peak, t.right];
    let dump = ModelDump {
        e_range: model.e_range,
        de_range: model.de_range,
        mf_rate_scale: model.mf_rate_scale,
        mf_e: model.mf_e.iter().map(tri).collect(),
        mf_de: model.mf_de.iter().map(tri).collect(),
        cons: model.cons.clone(),
    };
    let mut s = serde_json::to_string_pretty(&dump).expect("plain data serializes");
    s.push('\n');
    s
}

fn run_train(p: &ConverterParams, b: &TrainBlock, out: &mut OutDir) -> Result<(), RunError> {
    let outcome =
        train_cloned_controller(p, b.vref, b.epochs, b.learning_rate).map_err(numerical)?;
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }

    let mut set = Csv::new(&["e", "de", "duty"]);
    for s in &outcome.samples {
        set.row([num(s.e), num(s.de), num(s.duty)]);
    }
    out.write("training_set.csv", &set.finish())?;

    let mut hist = Csv::new(&["epoch", "rmse"]);
    for (k, r) in outcome.rmse_history.iter().enumerate() {
        hist.row([int(k + 1), num(*r)]);
    }
    out.write("rmse_history.csv", &hist.finish())?;

    let mut summary = Csv::new(&["quantity", "value"]);
    summary.kv("d_settled", num(outcome.d_settled));
    summary.kv("sample_count", int(outcome.samples.len()));
    summary.kv("epochs", int(b.epochs));
    summary.kv("learning_rate", num(b.learning_rate));
    summary.kv(
        "final_rmse",
        num(outcome.rmse_history.last().copied().unwrap_or(f64::NAN)),
    );
    out.write("clone.csv", &summary.finish())?;

    out.write("model.json", &dump_model(&outcome.model))?;
    Ok(())
}

// ----------------------------------------------------------- closedloop

fn run_closedloop(
    p: &ConverterParams,
    b: &ClosedLoopBlock,
    out: &mut OutDir,
) -> Result<(), RunError> {
    let d_init = b.d_init.unwrap_or(p.d);
    let mut controller = match b.controller {
        ControllerName::Pid => {
            let base = PidController::tuned_default();
            Controller::Pid(PidController::new(
                b.kp.unwrap_or(base.kp),
                b.ki.unwrap_or(base.ki),
                b.kd.unwrap_or(base.kd),
                d_init,
            ))
        }
        ControllerName::Anfis => {
            let outcome = train_cloned_controller(p, b.vref, b.epochs, b.learning_rate)
                .map_err(numerical)?;
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            Controller::Anfis {
                model: outcome.model,
                prev_e: None,
            }
        }
    };

    let events: Vec<StepEvent> = b
        .events
        .iter()
        .map(|ev| StepEvent {
            t: ev.t,
            kind: match ev.kind {
                EventKindName::Load => StepKind::Load(ev.value),
                EventKindName::SourceVoltage => StepKind::SourceVoltage(ev.value),
                EventKindName::Reference => StepKind::Reference(ev.value),
            },
        })
        .collect();

    let res =
        closed_loop_simulate(p, &mut controller, b.vref, &events, b.horizon_s).map_err(numerical)?;

    let mut csv = Csv::new(&["t", "vo", "duty", "e"]);
    for k in 0..res.t.len() {
        csv.row([num(res.t[k]), num(res.vo[k]), num(res.duty[k]), num(res.e[k])]);
    }
    out.write("closedloop.csv", &csv.finish())?;

    let mut metrics = Csv::new(&["quantity", "value"]);
    metrics.kv("controller", controller.label().to_string());
    metrics.kv("vref_final", num(res.vref_final));
    metrics.kv(
        "settling_time_s",
        res.metrics.settling_time_s.map(num).unwrap_or_default(),
    );
    metrics.kv("overshoot_pct", num(res.metrics.overshoot_pct));
    metrics.kv("steady_state_error_v", num(res.metrics.steady_state_error_v));
    metrics.kv("vo_final", num(res.vo.last().copied().unwrap_or(f64::NAN)));
    metrics.kv("duty_final", num(res.duty.last().copied().unwrap_or(f64::NAN)));
    out.write("metrics.csv", &metrics.finish())?;
    Ok(())
}
