//! One function per subcommand. Each returns the files to write, the
//! summary lines for standard output, and optionally an error to report
//! after the files are written (for example a fit that hit its iteration
//! limit).

use serde_json::{json, Value};

use magnonlink_core::calibration::{
    extract_transfer_function, magnon_spectral_density, predict_snr, snr_to_zeta, spectrum_snr,
    subtract_electronic_noise, svv_spectrum, CavityPorts, ChainCalibration, ShotNoiseRun,
};
use magnonlink_core::fitting::{
    fit_s11_coil, fit_s11_hybrid, fit_s11_power, fit_s_lm, initial_guess_coil, initial_guess_s11_hybrid, linspace,
    synthesize_trace, CoilInit, FitFlag, FitOptions, FitParam, FitResult, SignalModel, SpectrumTrace, TraceKind,
};
use magnonlink_core::microscopic::{
    gamma_from_gilbert, gilbert_from_gamma, kittel_shift, predicted_coupling, single_spin_coupling,
    verdet_to_coupling_constant, zero_point_field, zeta_from_coupling_constant, GeometryWarning, OpticalDriveParams,
};
use magnonlink_core::model::{cooperativity, efficiency_detuned, s21_cavity, Detunings};
use magnonlink_core::optimizer::{
    efficiency_landscape, find_optimum, optimum_at_fixed_magnon, LandscapeSpec, OptimizerOptions, SearchSpan,
};
use magnonlink_core::sweep::{run_sweep, SweepSpec};
use magnonlink_core::units::{db_to_linear, hz_to_rad, linear_to_db, rad_to_hz};

use crate::config::{check_positive, default_window, omega_m_at, InitMode, LoadedConfig};
use crate::error::{CliError, CliResult};
use crate::output::{
    column, csv_table, grid_csv, grid_json, read_columns, read_trace, trace_csv, trace_json, Format, OutputSet,
};

pub struct Outcome {
    pub outputs: OutputSet,
    pub stdout: Vec<String>,
    pub deferred: Option<CliError>,
}

impl Outcome {
    fn new(outputs: OutputSet) -> Self {
        Self {
            outputs,
            stdout: Vec::new(),
            deferred: None,
        }
    }

    fn say(&mut self, key: &str, value: impl std::fmt::Display) {
        self.stdout.push(format!("{key}={value}"));
    }
}

fn write_trace(out: &mut OutputSet, name: &str, t: &SpectrumTrace<f64>, format: Format) {
    match format {
        Format::Csv => out.add(&format!("{name}.csv"), trace_csv(t)),
        Format::Json => out.add_json(&format!("{name}.json"), &trace_json(t)),
    }
}

pub fn simulate(cfg: &LoadedConfig, mut out: OutputSet, format: Format) -> CliResult<Outcome> {
    let c = &cfg.config;
    let sim = &c.simulate;
    let mut p = c.system.params()?;
    if let Some(i) = sim.current_a {
        p.omega_m = omega_m_at(c, i)?;
    }
    let gamma_c = hz_to_rad(sim.gamma_c_hz.unwrap_or(c.system.gamma_hz));
    let (lo, hi) = match sim.kind {
        TraceKind::S11Coil => {
            let f = rad_to_hz(p.omega_m);
            let half = 10.0 * (c.system.gamma_hz + rad_to_hz(gamma_c));
            (f - half, f + half)
        }
        _ => default_window(&c.system),
    };
    let start = sim.freq_start_hz.unwrap_or(lo);
    let stop = sim.freq_stop_hz.unwrap_or(hi);
    if !(stop > start) {
        return Err(CliError::Input(
            "simulate: freq_stop_hz must exceed freq_start_hz".into(),
        ));
    }
    let model = match sim.kind {
        TraceKind::S11Hybrid => SignalModel::Hybrid(p),
        TraceKind::SLm => SignalModel::Conversion {
            params: p,
            eta: sim.eta,
            phase: sim.phase_rad,
        },
        TraceKind::S11Coil => SignalModel::Coil {
            omega_m: p.omega_m,
            gamma: p.gamma,
            gamma_c,
        },
        TraceKind::PowerOnly => SignalModel::Power(Box::new(SignalModel::Hybrid(p))),
    };
    let freq = linspace(start, stop, sim.points);
    let trace = synthesize_trace(&model, &freq, sim.noise_sigma, sim.seed)?;
    write_trace(&mut out, "trace", &trace, format);
    let mut o = Outcome::new(out);
    o.say("kind", sim.kind);
    o.say("points", trace.len());
    o.say("omega_m_hz", rad_to_hz(p.omega_m));
    Ok(o)
}

pub fn sweep(cfg: &LoadedConfig, mut out: OutputSet, format: Format) -> CliResult<Outcome> {
    let c = &cfg.config;
    let s = &c.sweep;
    let consts = c.constants.constants()?;
    let spec = SweepSpec {
        freq_start: s.freq_start_hz,
        freq_stop: s.freq_stop_hz,
        freq_points: s.freq_points,
        current_start: s.current_start_a,
        current_stop: s.current_stop_a,
        current_points: s.current_points,
        quantity: s.quantity,
        eta: s.eta,
    };
    let grid = run_sweep(&c.system.params()?, &c.bias.bias(&c.system)?, consts.gamma_e, &spec)?;
    match format {
        Format::Csv => out.add("grid.csv", grid_csv(&grid)),
        Format::Json => out.add_json("grid.json", &grid_json(&grid)),
    }
    let mut o = Outcome::new(out);
    o.say("quantity", s.quantity.as_str());
    o.say("rows", grid.current_axis.len());
    o.say("columns", grid.freq_axis.len());
    Ok(o)
}

fn flag_text(f: &FitFlag) -> String {
    match f {
        FitFlag::NotConverged => "not_converged".into(),
        FitFlag::AmbiguousModeLabels => "ambiguous_mode_labels".into(),
        FitFlag::Unidentifiable(p) => format!("unidentifiable:{}", p.name()),
        FitFlag::Reseeded => "reseeded".into(),
    }
}

/// Boundary name and scale (1/2π for angular quantities).
fn boundary(p: FitParam) -> (String, f64) {
    if p.is_angular() {
        (format!("{}_hz", p.name()), 1.0 / std::f64::consts::TAU)
    } else {
        (format!("{}_rad", p.name()), 1.0)
    }
}

fn fit_json(r: &FitResult<f64>, fixed: &[FitParam]) -> Value {
    let mut params = serde_json::Map::new();
    for (i, &name) in r.names.iter().enumerate() {
        let (key, scale) = boundary(name);
        params.insert(
            key,
            json!({
                "value": r.values[i] * scale,
                "std_err": r.covariance[i][i].max(0.0).sqrt() * scale,
            }),
        );
    }
    let scales: Vec<f64> = r.names.iter().map(|&n| boundary(n).1).collect();
    let cov: Vec<Vec<f64>> = r
        .covariance
        .iter()
        .enumerate()
        .map(|(i, row)| row.iter().enumerate().map(|(j, v)| v * scales[i] * scales[j]).collect())
        .collect();
    let system = r.params().map(|p| {
        json!({
            "omega_c_hz": rad_to_hz(p.omega_c),
            "omega_m_hz": rad_to_hz(p.omega_m),
            "kappa_hz": rad_to_hz(p.kappa),
            "kappa_c_hz": rad_to_hz(p.kappa_c),
            "gamma_hz": rad_to_hz(p.gamma),
            "g_hz": rad_to_hz(p.g),
        })
    });
    json!({
        "kind": r.kind.as_str(),
        "converged": r.converged,
        "iterations": r.iterations,
        "residual_norm": r.residual_norm,
        "parameters": params,
        "fixed": fixed.iter().map(|p| p.name()).collect::<Vec<_>>(),
        "covariance": {
            "names": r.names.iter().map(|&n| boundary(n).0).collect::<Vec<_>>(),
            "matrix": cov,
        },
        "system": system,
        "eta_zeta_hz": r.eta_zeta.map(rad_to_hz),
        "regime": r.regime,
        "flags": r.flags.iter().map(flag_text).collect::<Vec<_>>(),
    })
}

fn fit_csv(r: &FitResult<f64>) -> String {
    let mut s = String::from("name,value,std_err\n");
    for (i, &name) in r.names.iter().enumerate() {
        let (key, scale) = boundary(name);
        s.push_str(&format!(
            "{key},{},{}\n",
            crate::output::num(r.values[i] * scale),
            crate::output::num(r.covariance[i][i].max(0.0).sqrt() * scale)
        ));
    }
    s
}

pub fn fit(cfg: &LoadedConfig, mut out: OutputSet, format: Format) -> CliResult<Outcome> {
    let c = &cfg.config;
    let f = &c.fit;
    let path = f
        .trace
        .as_deref()
        .ok_or_else(|| CliError::Input("fit.trace: no trace file given".into()))?;
    let trace = read_trace(&cfg.resolve(path), f.kind)?;
    let mut opts = FitOptions::default();
    opts.lsq.max_iter = f.max_iter;
    let system_init = || c.system.params();
    let mut fixed = Vec::new();
    let result = match trace.kind {
        TraceKind::S11Hybrid | TraceKind::PowerOnly => {
            let init = match f.init {
                InitMode::Auto => initial_guess_s11_hybrid(&trace)?,
                InitMode::System => system_init()?,
            };
            if trace.kind == TraceKind::S11Hybrid {
                fit_s11_hybrid(&trace, &init, &opts)?
            } else {
                fit_s11_power(&trace, &init, &opts)?
            }
        }
        TraceKind::SLm => {
            fixed = f.fixed.clone();
            fit_s_lm(&trace, &system_init()?, &fixed, &opts)?
        }
        TraceKind::S11Coil => {
            let init = match f.init {
                InitMode::Auto => {
                    let (w, g, gc) = initial_guess_coil(&trace)?;
                    CoilInit {
                        omega_m: w,
                        gamma: g,
                        gamma_c: gc,
                    }
                }
                InitMode::System => CoilInit {
                    omega_m: hz_to_rad(f.coil_init.omega_m_hz),
                    gamma: hz_to_rad(f.coil_init.gamma_hz),
                    gamma_c: hz_to_rad(f.coil_init.gamma_c_hz),
                },
            };
            fit_s11_coil(&trace, &init, &opts)?
        }
    };
    out.add_json("fit.json", &fit_json(&result, &fixed));
    if format == Format::Csv {
        out.add("fit.csv", fit_csv(&result));
    }
    let curve = synthesize_trace(&result.model, &trace.freq, 0.0, 0)?;
    write_trace(&mut out, "fit_model", &curve, format);
    let mut o = Outcome::new(out);
    o.say("kind", trace.kind);
    o.say("converged", result.converged);
    o.say("iterations", result.iterations);
    for (i, &name) in result.names.iter().enumerate() {
        let (key, scale) = boundary(name);
        o.say(&key, format!("{:.9e}", result.values[i] * scale));
    }
    if !result.converged {
        o.deferred = Some(CliError::Numerical(format!(
            "fit did not converge within {} iterations; best point written",
            f.max_iter
        )));
    }
    Ok(o)
}

pub fn derive_params(cfg: &LoadedConfig, mut out: OutputSet, _format: Format) -> CliResult<Outcome> {
    let c = &cfg.config;
    let consts = c.constants.constants()?;
    let geom = c.material.geometry(&consts)?;
    let drive = c.drive.drive()?;
    let p = c.system.params()?;
    let g_const = verdet_to_coupling_constant(geom.verdet, geom.spin_density)?;
    let zeta = zeta_from_coupling_constant(g_const, &geom, &drive, &consts);
    let zpf = zero_point_field(geom.cavity_volume, p.omega_c, &consts);
    let g0 = single_spin_coupling(zpf, consts.gamma_e);
    let g_pred = predicted_coupling(&geom, p.omega_c, c.material.overlap_factor, &consts)?;
    let bias = c.bias.bias(&c.system)?;
    let warnings: Vec<String> = geom
        .warnings()
        .iter()
        .map(|w| match w {
            GeometryWarning::PathExceedsSphereDiameter { path, diameter } => {
                format!("optical path {path:e} m exceeds equivalent sphere diameter {diameter:e} m")
            }
        })
        .collect();
    let coop = cooperativity(&p)?;
    let doc = json!({
        "G_m2": g_const,
        "zeta_rad_s": zeta,
        "zeta_hz": rad_to_hz(zeta),
        "photon_flux_per_s": drive.photon_flux(consts.hbar),
        "zero_point_field_t": zpf,
        "g0_hz": rad_to_hz(g0),
        "spin_count": geom.spin_count(),
        "g_predicted_hz": rad_to_hz(g_pred),
        "g_configured_hz": c.system.g_hz,
        "g_ratio_predicted_to_configured": g_pred / p.g,
        "gilbert_alpha_from_gamma": gilbert_from_gamma(p.gamma, p.omega_m),
        "gamma_from_gilbert_hz": rad_to_hz(gamma_from_gilbert(geom.gilbert_alpha, p.omega_m)),
        "kittel_freq_damped_hz": rad_to_hz(kittel_shift(geom.bare_kittel_freq, geom.gilbert_alpha)),
        "cooperativity": coop,
        "current_for_omega_m_a": bias.current_for(p.omega_m, consts.gamma_e),
        "warnings": warnings,
    });
    out.add_json("derived.json", &doc);
    let mut o = Outcome::new(out);
    o.say("G_m2", format!("{g_const:.4e}"));
    o.say("zeta_hz", format!("{:.4e}", rad_to_hz(zeta)));
    o.say("g0_hz", format!("{:.4e}", rad_to_hz(g0)));
    o.say("g_predicted_hz", format!("{:.4e}", rad_to_hz(g_pred)));
    o.say("cooperativity", format!("{coop:.4}"));
    for w in &warnings {
        o.say("warning", w);
    }
    Ok(o)
}

fn calibration_doc(run_type: &str, inputs: Value, grid: Vec<f64>, outputs: Value, flags: Vec<String>) -> Value {
    json!({
        "run_type": run_type,
        "inputs": inputs,
        "grid": grid,
        "outputs": outputs,
        "flags": flags,
    })
}

pub fn calibrate_shotnoise(cfg: &LoadedConfig, mut out: OutputSet, format: Format) -> CliResult<Outcome> {
    let c = &cfg.config;
    let s = &c.shotnoise;
    let consts = c.constants.constants()?;
    let geom = c.material.geometry(&consts)?;
    let drive = c.drive.drive()?;
    check_positive("shotnoise.reference_zeta_hz", s.reference_zeta_hz)?;
    let mut flags = Vec::new();
    let omega_m = hz_to_rad(s.magnon_freq_hz);
    let gamma_c = hz_to_rad(s.coil_coupling_hz);
    let gamma = hz_to_rad(s.intrinsic_gamma_hz.unwrap_or(s.coil_coupling_hz));
    let weight = magnon_spectral_density(s.microwave_power.0, omega_m, gamma_c, gamma, &consts)?;

    let measured_snr = match &s.spectrum {
        Some(rel) => {
            let path = cfg.resolve(rel);
            let cols = read_columns(&path)?;
            let freq = column(&cols, "freq_hz", &path)?.to_vec();
            let mut psd = column(&cols, "psd_w_per_hz", &path)?.to_vec();
            if let Some(rel_e) = &s.electronic_noise {
                let epath = cfg.resolve(rel_e);
                let ecols = read_columns(&epath)?;
                if column(&ecols, "freq_hz", &epath)? != freq.as_slice() {
                    return Err(CliError::Input(format!(
                        "{}: frequency grid differs from {}",
                        epath.display(),
                        path.display()
                    )));
                }
                let sub = subtract_electronic_noise(&psd, column(&ecols, "psd_w_per_hz", &epath)?)?;
                if !sub.clamped.is_empty() {
                    flags.push(format!("electronic_noise_clamped_bins:{}", sub.clamped.len()));
                }
                psd = sub.psd;
            }
            let bin = freq
                .iter()
                .enumerate()
                .min_by(|a, b| {
                    (a.1 - s.magnon_freq_hz)
                        .abs()
                        .total_cmp(&(b.1 - s.magnon_freq_hz).abs())
                })
                .map(|(i, _)| i)
                .ok_or_else(|| CliError::Input(format!("{}: empty spectrum", path.display())))?;
            flags.push("snr_from_spectrum".into());
            spectrum_snr(&psd, bin)?
        }
        None => db_to_linear(s.measured_snr_db),
    };
    let run = ShotNoiseRun {
        microwave_power: s.microwave_power.0,
        probe_photon_flux: s.probe_photon_flux,
        resolution_bandwidth: hz_to_rad(s.resolution_bandwidth_hz),
        coil_coupling: gamma_c,
        magnon_freq: omega_m,
        measured_snr,
        electronic_noise_psd: None,
    };
    let cal = snr_to_zeta(&run, &geom, &drive, &consts)?;
    let round_trip = predict_snr(cal.coupling_constant, &geom, &run, &consts);
    let ratio = cal.discrepancy_ratio(hz_to_rad(s.reference_zeta_hz));

    // model spectrum with the probe flux of the measurement
    let probe = OpticalDriveParams::new(
        s.probe_photon_flux * consts.hbar * drive.carrier_angular_freq,
        drive.carrier_angular_freq,
    )?;
    let n = s.spectrum_points.max(1);
    let rbw = s.resolution_bandwidth_hz;
    let half = (n / 2) as f64;
    let grid_hz: Vec<f64> = (0..n).map(|k| s.magnon_freq_hz + (k as f64 - half) * rbw).collect();
    let grid_rad: Vec<f64> = grid_hz.iter().map(|&f| hz_to_rad(f)).collect();
    let spec = svv_spectrum(
        cal.coupling_constant,
        &geom,
        &probe,
        s.microwave_power.0,
        omega_m,
        gamma_c,
        run.resolution_bandwidth,
        &grid_rad,
        &consts,
    )?;
    let rel: Vec<[f64; 2]> = grid_hz
        .iter()
        .zip(&spec.power)
        .map(|(&f, &p)| [f, p / spec.floor])
        .collect();
    match format {
        Format::Csv => out.add(
            "spectrum.csv",
            csv_table(&["freq_hz", "relative_to_shot_noise"], rel.iter().map(|r| r.as_slice())),
        ),
        Format::Json => out.add_json(
            "spectrum.json",
            &json!({"freq_hz": grid_hz, "relative_to_shot_noise": rel.iter().map(|r| r[1]).collect::<Vec<_>>()}),
        ),
    }

    let inputs = json!({
        "microwave_power_w": s.microwave_power.0,
        "probe_photon_flux_per_s": s.probe_photon_flux,
        "resolution_bandwidth_hz": s.resolution_bandwidth_hz,
        "coil_coupling_hz": s.coil_coupling_hz,
        "intrinsic_gamma_hz": rad_to_hz(gamma),
        "magnon_freq_hz": s.magnon_freq_hz,
        "measured_snr": measured_snr,
        "drive_power_w": drive.power,
        "drive_carrier_hz": rad_to_hz(drive.carrier_angular_freq),
        "sample_length_m": geom.sample_length,
        "sample_volume_m3": geom.sample_volume,
        "spin_density_m3": geom.spin_density,
        "spectrum": s.spectrum,
        "electronic_noise": s.electronic_noise,
    });
    let outputs = json!({
        "G_m2": cal.coupling_constant,
        "zeta_rad_s": cal.zeta,
        "zeta_hz": rad_to_hz(cal.zeta),
        "reference_zeta_hz": s.reference_zeta_hz,
        "discrepancy_ratio": ratio,
        "measured_snr_db": linear_to_db(measured_snr),
        "predicted_snr_round_trip": round_trip,
        "magnon_spectral_weight": weight,
        "T_a": [],
    });
    out.add_json(
        "calibration.json",
        &calibration_doc("shotnoise", inputs, grid_hz, outputs, flags),
    );
    let mut o = Outcome::new(out);
    o.say("G_m2", format!("{:.4e}", cal.coupling_constant));
    o.say("zeta_hz", format!("{:.4e}", rad_to_hz(cal.zeta)));
    o.say("reference_zeta_hz", format!("{:.4e}", s.reference_zeta_hz));
    o.say("discrepancy_ratio", format!("{ratio:.4}"));
    Ok(o)
}

pub fn calibrate_chain(cfg: &LoadedConfig, mut out: OutputSet, format: Format) -> CliResult<Outcome> {
    let c = &cfg.config;
    let ch = &c.chain;
    let p = c.system.params()?;
    let rel = ch
        .measured
        .as_deref()
        .ok_or_else(|| CliError::Input("chain.measured: no measurement file given".into()))?;
    let path = cfg.resolve(rel);
    let cols = read_columns(&path)?;
    let freq = column(&cols, "freq_hz", &path)?.to_vec();
    let measured = column(&cols, "measured_power_w", &path)?.to_vec();
    let tone = match cols.get("tone_power_w") {
        Some(t) => t.clone(),
        None => vec![ch.tone_power.0; freq.len()],
    };
    let cal = ChainCalibration {
        omega: freq.iter().map(|&f| hz_to_rad(f)).collect(),
        tone_power_in: tone,
        measured_power: measured,
        cavity: CavityPorts {
            omega_c: p.omega_c,
            kappa: p.kappa,
            kappa_c: p.kappa_c,
            kappa_1: hz_to_rad(ch.kappa_1_hz),
        },
    };
    let tf = extract_transfer_function(&cal)?;
    let s21: Vec<f64> = cal
        .omega
        .iter()
        .map(|&w| s21_cavity(p.omega_c, p.kappa, p.kappa_c, cal.cavity.kappa_1, w))
        .collect::<Result<_, _>>()?;
    let peak = s21_cavity(p.omega_c, p.kappa, p.kappa_c, cal.cavity.kappa_1, p.omega_c)?;
    let rows: Vec<[f64; 2]> = freq
        .iter()
        .zip(&tf.t_a)
        .filter_map(|(&f, t)| t.map(|t| [f, t]))
        .collect();
    match format {
        Format::Csv => out.add("transfer.csv", csv_table(&["freq_hz", "t_a"], rows.iter().map(|r| r.as_slice()))),
        Format::Json => out.add_json(
            "transfer.json",
            &json!({"freq_hz": rows.iter().map(|r| r[0]).collect::<Vec<_>>(), "t_a": rows.iter().map(|r| r[1]).collect::<Vec<_>>()}),
        ),
    }
    let mut flags = Vec::new();
    if !tf.excluded.is_empty() {
        flags.push(format!("excluded_bins:{}", tf.excluded.len()));
    }
    let inputs = json!({
        "measured": rel,
        "kappa_1_hz": ch.kappa_1_hz,
        "tone_power_w": cols.contains_key("tone_power_w").then_some(Value::Null).unwrap_or(json!(ch.tone_power.0)),
        "omega_c_hz": c.system.omega_c_hz,
        "kappa_hz": c.system.kappa_hz,
        "kappa_c_hz": c.system.kappa_c_hz,
    });
    let outputs = json!({
        "G_m2": Value::Null,
        "zeta_rad_s": Value::Null,
        "T_a": tf.t_a,
        "T_a_db": tf.t_a.iter().map(|t| t.map(linear_to_db)).collect::<Vec<_>>(),
        "s21_power": s21,
        "s21_peak": peak,
        "excluded": tf.excluded,
    });
    out.add_json(
        "calibration.json",
        &calibration_doc("chain", inputs, freq.clone(), outputs, flags),
    );
    let mut o = Outcome::new(out);
    o.say("bins", freq.len());
    o.say("excluded", tf.excluded.len());
    o.say("s21_peak", format!("{peak:.6e}"));
    Ok(o)
}

pub fn optimize_detuning(cfg: &LoadedConfig, mut out: OutputSet, format: Format) -> CliResult<Outcome> {
    let c = &cfg.config;
    let o_cfg = &c.optimize;
    let p = c.system.params()?;
    let coop = cooperativity(&p)?;
    let default_span = SearchSpan::default_for(coop);
    let span = SearchSpan {
        x: o_cfg.span_c.unwrap_or(default_span.x),
        y: o_cfg.span_m.unwrap_or(default_span.y),
    };
    let opts = OptimizerOptions {
        span: Some(span),
        grid_points: o_cfg.grid_points,
        ..Default::default()
    };
    let r = find_optimum(&p, &opts)?;

    let [ref_c, ref_m] = o_cfg.reference_point_hz;
    let ref_det = Detunings::new(hz_to_rad(ref_c), hz_to_rad(ref_m))?;
    let ref_eff = efficiency_detuned(&p, ref_det)?;
    let mut fixed = p;
    fixed.omega_m = p.omega_c + ref_det.delta_c - ref_det.delta_m;
    let search = 2.0 * (ref_det.delta_c.abs() + p.kappa_total()).max(r.det.delta_c.abs() + p.kappa_total());
    let con = optimum_at_fixed_magnon(&fixed, search, 4001, &r)?;

    let doc = json!({
        "cooperativity": coop,
        "optimum": {
            "delta_c_hz": rad_to_hz(r.det.delta_c),
            "delta_m_hz": rad_to_hz(r.det.delta_m),
            "x": r.normalized.0,
            "y": r.normalized.1,
            "efficiency": r.efficiency,
            "gradient_norm": r.gradient_norm,
            "hessian_definiteness": r.hessian_definiteness,
            "gain_over_resonant": r.gain_over_resonant,
            "resonant_efficiency": r.resonant_efficiency,
            "iterations": r.iterations,
        },
        "reference": {
            "delta_c_hz": ref_c,
            "delta_m_hz": ref_m,
            "efficiency": ref_eff,
            "fraction_of_optimum": ref_eff / r.efficiency,
        },
        "constrained": {
            "omega_m_hz": rad_to_hz(fixed.omega_m),
            "probe_freq_hz": rad_to_hz(con.omega),
            "delta_c_hz": rad_to_hz(con.det.delta_c),
            "delta_m_hz": rad_to_hz(con.det.delta_m),
            "efficiency": con.efficiency,
            "fraction_of_unconstrained": con.fraction_of_unconstrained,
        },
        "difference_reference_minus_optimum_hz": {
            "delta_c": ref_c - rad_to_hz(r.det.delta_c),
            "delta_m": ref_m - rad_to_hz(r.det.delta_m),
        },
    });
    out.add_json("optimum.json", &doc);

    if o_cfg.landscape {
        let l = efficiency_landscape(
            &p,
            &LandscapeSpec {
                span,
                points_c: o_cfg.landscape_points,
                points_m: o_cfg.landscape_points,
            },
        )?;
        match format {
            Format::Csv => {
                let mut rows = Vec::with_capacity(l.delta_c.len() * l.delta_m.len());
                for (i, &dc) in l.delta_c.iter().enumerate() {
                    for (j, &dm) in l.delta_m.iter().enumerate() {
                        rows.push([rad_to_hz(dc), rad_to_hz(dm), l.efficiency[i][j]]);
                    }
                }
                out.add(
                    "landscape.csv",
                    csv_table(&["dc_hz", "dm_hz", "efficiency"], rows.iter().map(|r| r.as_slice())),
                );
            }
            Format::Json => out.add_json(
                "landscape.json",
                &json!({
                    "dc_hz": l.delta_c.iter().map(|&d| rad_to_hz(d)).collect::<Vec<_>>(),
                    "dm_hz": l.delta_m.iter().map(|&d| rad_to_hz(d)).collect::<Vec<_>>(),
                    "efficiency": l.efficiency,
                }),
            ),
        }
    }
    let mut o = Outcome::new(out);
    o.say("delta_c_hz", format!("{:.6e}", rad_to_hz(r.det.delta_c)));
    o.say("delta_m_hz", format!("{:.6e}", rad_to_hz(r.det.delta_m)));
    o.say("efficiency", format!("{:.6e}", r.efficiency));
    o.say("gain_over_resonant", format!("{:.4}", r.gain_over_resonant));
    o.say("constrained_fraction", format!("{:.6}", con.fraction_of_unconstrained));
    Ok(o)
}
