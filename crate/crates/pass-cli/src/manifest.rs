//! Run manifest: a fully resolved configuration tree.
//!
//! A manifest is a TOML document with `[system]`, `[grid]`, `[optimizer]`,
//! `[experiment]`, and `[run]` sections. Loading applies defaults for every
//! missing key, converts units exactly once (`*_dbm`, `*_dbw`, `*_db`,
//! `*_m`, `*_hz` names mark the unit), and reports every unknown key, type
//! error, and invariant violation with its key path rather than stopping at
//! the first. The manifest written next to each output reproduces the run
//! when passed back through `--config`.

use std::collections::BTreeSet;

use pass_core::config::{default_y_bar, SystemConfig, UserLayout};
use pass_core::experiment::{content_hash, ExperimentKind, ExperimentSpec};
use pass_core::optim::OptimizerConfig;
use pass_core::protocol::{GridConfig, ProtocolKind};
use pass_core::Real;
use toml::Value;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Every recognized key, as `section.key`.
const SCHEMA: &[(&str, &str)] = &[
    ("system", "waveguides"),
    ("system", "pas_per_waveguide"),
    ("system", "bandwidth_hz"),
    ("system", "carrier_frequency_hz"),
    ("system", "guide_index"),
    ("system", "attenuation_db"),
    ("system", "attenuation_ref_length_m"),
    ("system", "ref_gain_db"),
    ("system", "path_loss_exponent"),
    ("system", "rician_factor"),
    ("system", "amplifier_efficiency"),
    ("system", "p_max_dbw"),
    ("system", "noise_power_dbm"),
    ("system", "bs_static_power_dbw"),
    ("system", "pa_activation_dbm"),
    ("system", "pa_motor_dbm"),
    ("system", "pa_piezo_dbm"),
    ("system", "x_min_m"),
    ("system", "x_max_m"),
    ("system", "min_pa_spacing_m"),
    ("system", "area_side_m"),
    ("system", "waveguide_y_m"),
    ("system", "motor_speed_m_s"),
    ("system", "piezo_speed_m_s"),
    ("system", "user_x_m"),
    ("system", "user_y_m"),
    ("grid", "protocol"),
    ("grid", "coarse_step_m"),
    ("grid", "fine_step_m"),
    ("grid", "fine_range_m"),
    ("grid", "base_multiplier"),
    ("grid", "pa_multiplier"),
    ("optimizer", "eps_radiation"),
    ("optimizer", "eps_inner"),
    ("optimizer", "eps_outer"),
    ("optimizer", "step_init"),
    ("optimizer", "armijo_contraction"),
    ("optimizer", "armijo_slope"),
    ("optimizer", "armijo_max_halvings"),
    ("optimizer", "max_radiation_iters"),
    ("optimizer", "max_inner_iters"),
    ("optimizer", "max_outer_iters"),
    ("optimizer", "bisection_rel_tol"),
    ("optimizer", "bisection_growth"),
    ("optimizer", "penalty_init"),
    ("optimizer", "penalty_growth"),
    ("experiment", "kind"),
    ("experiment", "p_max_dbw"),
    ("experiment", "mn_pairs"),
    ("experiment", "protocols"),
    ("experiment", "coarse_steps_m"),
    ("experiment", "fine_steps_m"),
    ("experiment", "seeds"),
    ("experiment", "mc_draws"),
    ("experiment", "mc_batches"),
    ("experiment", "penalty_init"),
    ("experiment", "penalty_growth"),
    ("experiment", "sat_base_multiplier"),
    ("run", "seed"),
    ("run", "version"),
    ("run", "timestamp_unix"),
    ("run", "config_hash"),
];

/// Fully resolved run description.
#[derive(Debug, Clone)]
pub struct RunManifest {
    pub system: SystemConfig<f64>,
    pub users: UserLayout<f64>,
    pub grid: GridConfig<f64>,
    pub protocol: ProtocolKind,
    pub optimizer: OptimizerConfig<f64>,
    pub experiment: ExperimentSpec,
    pub seed: u64,
    pub timestamp_unix: u64,
    /// Raw (unit-suffixed) key values, kept so the manifest echoes exactly
    /// what resolution consumed.
    raw: toml::Table,
}

struct Reader<'a> {
    section: &'static str,
    table: Option<&'a toml::Table>,
    errors: Vec<String>,
}

impl<'a> Reader<'a> {
    fn new(root: &'a toml::Table, section: &'static str, errors: &mut Vec<String>) -> Self {
        let table = match root.get(section) {
            None => None,
            Some(Value::Table(t)) => Some(t),
            Some(other) => {
                errors.push(format!(
                    "{section}: expected a table, found {}",
                    other.type_str()
                ));
                None
            }
        };
        Self { section, table, errors: Vec::new() }
    }

    fn get(&self, key: &str) -> Option<&'a Value> {
        self.table.and_then(|t| t.get(key))
    }

    fn f64_or(&mut self, key: &str, default: f64) -> f64 {
        match self.get(key) {
            None => default,
            Some(v) => match value_as_f64(v) {
                Some(x) => x,
                None => {
                    self.errors.push(format!(
                        "{}.{key}: expected a number, found {}",
                        self.section,
                        v.type_str()
                    ));
                    default
                }
            },
        }
    }

    fn usize_or(&mut self, key: &str, default: usize) -> usize {
        match self.get(key) {
            None => default,
            Some(Value::Integer(i)) if *i >= 0 => *i as usize,
            Some(v) => {
                self.errors.push(format!(
                    "{}.{key}: expected a nonnegative integer, found {v}",
                    self.section
                ));
                default
            }
        }
    }

    fn string_or(&mut self, key: &str, default: &str) -> String {
        match self.get(key) {
            None => default.to_string(),
            Some(Value::String(s)) => s.clone(),
            Some(v) => {
                self.errors.push(format!(
                    "{}.{key}: expected a string, found {}",
                    self.section,
                    v.type_str()
                ));
                default.to_string()
            }
        }
    }

    /// A number, or the string "auto" meaning a derived default.
    fn auto_f64(&mut self, key: &str) -> Option<f64> {
        match self.get(key) {
            None => None,
            Some(Value::String(s)) if s == "auto" => None,
            Some(v) => match value_as_f64(v) {
                Some(x) => Some(x),
                None => {
                    self.errors.push(format!(
                        "{}.{key}: expected a number or \"auto\", found {}",
                        self.section,
                        v.type_str()
                    ));
                    None
                }
            },
        }
    }

    fn f64_list_or(&mut self, key: &str, default: &[f64]) -> Vec<f64> {
        match self.get(key) {
            None => default.to_vec(),
            Some(Value::Array(a)) => {
                let mut out = Vec::with_capacity(a.len());
                for (i, v) in a.iter().enumerate() {
                    match value_as_f64(v) {
                        Some(x) => out.push(x),
                        None => self.errors.push(format!(
                            "{}.{key}[{i}]: expected a number, found {}",
                            self.section,
                            v.type_str()
                        )),
                    }
                }
                out
            }
            Some(v) => {
                self.errors.push(format!(
                    "{}.{key}: expected an array, found {}",
                    self.section,
                    v.type_str()
                ));
                default.to_vec()
            }
        }
    }

    fn u64_list_or(&mut self, key: &str, default: &[u64]) -> Vec<u64> {
        match self.get(key) {
            None => default.to_vec(),
            Some(Value::Array(a)) => {
                let mut out = Vec::with_capacity(a.len());
                for (i, v) in a.iter().enumerate() {
                    match v {
                        Value::Integer(x) if *x >= 0 => out.push(*x as u64),
                        other => self.errors.push(format!(
                            "{}.{key}[{i}]: expected a nonnegative integer, found {other}",
                            self.section
                        )),
                    }
                }
                out
            }
            Some(v) => {
                self.errors.push(format!(
                    "{}.{key}: expected an array, found {}",
                    self.section,
                    v.type_str()
                ));
                default.to_vec()
            }
        }
    }

    fn finish(self, sink: &mut Vec<String>) {
        sink.extend(self.errors);
    }
}

fn value_as_f64(v: &Value) -> Option<f64> {
    match v {
        Value::Float(f) => Some(*f),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

/// Reject unknown sections and keys, each with its path.
fn check_unknown_keys(root: &toml::Table, errors: &mut Vec<String>) {
    let sections: BTreeSet<&str> = SCHEMA.iter().map(|(s, _)| *s).collect();
    for (name, value) in root {
        if !sections.contains(name.as_str()) {
            errors.push(format!("{name}: unknown section"));
            continue;
        }
        if let Value::Table(t) = value {
            for key in t.keys() {
                let known = SCHEMA
                    .iter()
                    .any(|(s, k)| *s == name.as_str() && *k == key.as_str());
                if !known {
                    errors.push(format!("{name}.{key}: unknown key"));
                }
            }
        }
    }
}

/// Apply one `--set KEY=VALUE` override onto the raw tree. Dotted paths pick
/// the section; bare keys resolve when unique in the schema.
fn apply_override(root: &mut toml::Table, spec: &str) -> Result<(), String> {
    let (raw_key, raw_value) = spec
        .split_once('=')
        .ok_or_else(|| format!("--set {spec:?}: expected KEY=VALUE"))?;
    let raw_key = raw_key.trim();
    let raw_value = raw_value.trim();
    let (section, key) = if let Some((s, k)) = raw_key.split_once('.') {
        let known = SCHEMA.iter().any(|(ss, kk)| *ss == s && *kk == k);
        if !known {
            return Err(format!("--set {raw_key}: unknown key"));
        }
        (s.to_string(), k.to_string())
    } else {
        let matches: Vec<&(&str, &str)> =
            SCHEMA.iter().filter(|(_, k)| *k == raw_key).collect();
        match matches.len() {
            0 => return Err(format!("--set {raw_key}: unknown key")),
            1 => (matches[0].0.to_string(), matches[0].1.to_string()),
            _ => {
                let opts: Vec<String> =
                    matches.iter().map(|(s, k)| format!("{s}.{k}")).collect();
                return Err(format!(
                    "--set {raw_key}: ambiguous key, use one of {}",
                    opts.join(" | ")
                ));
            }
        }
    };
    // Interpret the value as TOML when possible, else as a bare string.
    let parsed: Value = format!("v = {raw_value}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|t| t.get("v").cloned())
        .unwrap_or_else(|| Value::String(raw_value.to_string()));
    let entry = root
        .entry(section)
        .or_insert_with(|| Value::Table(toml::Table::new()));
    match entry {
        Value::Table(t) => {
            t.insert(key, parsed);
            Ok(())
        }
        _ => Err(format!("--set {raw_key}: section is not a table")),
    }
}

impl RunManifest {
    /// Parse a config tree (TOML text), apply overrides, fill defaults,
    /// convert units, and validate. Collects every error.
    pub fn load(
        text: &str,
        overrides: &[String],
        kind_flag: Option<ExperimentKind>,
        protocol_flag: Option<ProtocolKind>,
        seed_flag: Option<u64>,
    ) -> Result<Self, Vec<String>> {
        let mut errors = Vec::new();
        let mut root: toml::Table = match text.parse() {
            Ok(t) => t,
            Err(e) => return Err(vec![format!("config parse error: {e}")]),
        };
        for o in overrides {
            if let Err(e) = apply_override(&mut root, o) {
                errors.push(e);
            }
        }
        if let Some(p) = protocol_flag {
            let _ = apply_override(&mut root, &format!("grid.protocol={p}"));
        }
        if let Some(k) = kind_flag {
            let _ = apply_override(&mut root, &format!("experiment.kind={k}"));
        }
        check_unknown_keys(&root, &mut errors);

        // ---- system ----
        let mut sys = Reader::new(&root, "system", &mut errors);
        let waveguides = sys.usize_or("waveguides", 3);
        let pas = sys.usize_or("pas_per_waveguide", 4);
        let bandwidth = sys.f64_or("bandwidth_hz", 180e6);
        let carrier = sys.f64_or("carrier_frequency_hz", 28e9);
        let guide_index = sys.f64_or("guide_index", 1.4);
        let att_db = sys.f64_or("attenuation_db", 18.0);
        let att_ref = sys.f64_or("attenuation_ref_length_m", 100.0);
        let ref_gain_db = sys.auto_f64("ref_gain_db");
        let beta_u = sys.f64_or("path_loss_exponent", 2.2);
        let k_rician = sys.f64_or("rician_factor", 0.5);
        let nu = sys.f64_or("amplifier_efficiency", 0.9);
        let p_max_dbw = sys.f64_or("p_max_dbw", 5.0);
        let noise_dbm = sys.f64_or("noise_power_dbm", -80.0);
        let bs_static_dbw = sys.f64_or("bs_static_power_dbw", 9.0);
        let pa_act_dbm = sys.f64_or("pa_activation_dbm", 5.0);
        let pa_mot_dbm = sys.f64_or("pa_motor_dbm", 20.0);
        let pa_pie_dbm = sys.f64_or("pa_piezo_dbm", 8.0);
        let x_min = sys.f64_or("x_min_m", 0.0);
        let x_max = sys.f64_or("x_max_m", 100.0);
        let spacing = sys.auto_f64("min_pa_spacing_m");
        let area = sys.f64_or("area_side_m", 100.0);
        let y_bar_raw = match sys.get("waveguide_y_m") {
            Some(Value::String(s)) if s == "auto" => None,
            Some(_) => Some(sys.f64_list_or("waveguide_y_m", &[])),
            None => None,
        };
        let motor = sys.f64_or("motor_speed_m_s", 10.0);
        let piezo = sys.f64_or("piezo_speed_m_s", 1e-2);
        let user_x = sys.f64_list_or("user_x_m", &[15.9, 98.6, 74.5, 37.4]);
        let user_y = sys.f64_list_or("user_y_m", &[54.3, 85.4, 24.1, 23.9]);
        sys.finish(&mut errors);

        if user_x.len() != user_y.len() {
            errors.push(format!(
                "system.user_x_m / user_y_m: {} x-coordinates but {} y-coordinates",
                user_x.len(),
                user_y.len()
            ));
        }
        let lambda = pass_core::config::SPEED_OF_LIGHT / carrier;
        let system = SystemConfig::<f64> {
            waveguides,
            pas_per_waveguide: pas,
            users: user_x.len(),
            bandwidth,
            carrier_freq: carrier,
            lambda,
            lambda_g: lambda / guide_index,
            alpha_g: att_db * std::f64::consts::LN_10 / (20.0 * att_ref),
            c0: match ref_gain_db {
                Some(db) => f64::db_to_linear(db),
                None => (lambda / (4.0 * std::f64::consts::PI)).powi(2),
            },
            beta_u,
            k_rician,
            nu,
            p_max: f64::dbw_to_watts(p_max_dbw),
            n0: f64::dbm_to_watts(noise_dbm),
            delta_x: spacing.unwrap_or(lambda / 2.0),
            x_min,
            x_max,
            y_bar: y_bar_raw.clone().unwrap_or_else(|| default_y_bar(waveguides, area)),
            p_bs_static: f64::dbw_to_watts(bs_static_dbw),
            pa_power: pass_core::protocol::PAPowerComponents {
                activation: f64::dbm_to_watts(pa_act_dbm),
                motor: f64::dbm_to_watts(pa_mot_dbm),
                piezo: f64::dbm_to_watts(pa_pie_dbm),
            },
            speeds: pass_core::protocol::MotionSpeeds { motor, piezo },
            area_side: area,
        };
        let users = UserLayout {
            positions: user_x.iter().zip(&user_y).map(|(&x, &y)| (x, y)).collect(),
        };

        // ---- grid ----
        let mut grid_r = Reader::new(&root, "grid", &mut errors);
        let protocol_s = grid_r.string_or("protocol", "stt");
        let grid = GridConfig {
            coarse_step: grid_r.f64_or("coarse_step_m", 1.0),
            fine_step: grid_r.f64_or("fine_step_m", 1e-4),
            fine_range: grid_r.f64_or("fine_range_m", 0.2),
            base_multiplier: grid_r.usize_or("base_multiplier", 1),
            pa_multiplier: grid_r.usize_or("pa_multiplier", 1),
        };
        grid_r.finish(&mut errors);
        let protocol = match protocol_s.parse::<ProtocolKind>() {
            Ok(p) => p,
            Err(_) => {
                errors.push(format!(
                    "grid.protocol: unknown value {protocol_s:?} (expected stt | sta | sat | saa)"
                ));
                ProtocolKind::Stt
            }
        };

        // ---- optimizer ----
        let mut opt_r = Reader::new(&root, "optimizer", &mut errors);
        let d = OptimizerConfig::<f64>::defaults();
        let optimizer = OptimizerConfig {
            eps_radiation: opt_r.f64_or("eps_radiation", d.eps_radiation),
            eps_inner: opt_r.f64_or("eps_inner", d.eps_inner),
            eps_outer: opt_r.f64_or("eps_outer", d.eps_outer),
            step_init: opt_r.f64_or("step_init", d.step_init),
            armijo_contraction: opt_r.f64_or("armijo_contraction", d.armijo_contraction),
            armijo_slope: opt_r.f64_or("armijo_slope", d.armijo_slope),
            armijo_max_halvings: opt_r.usize_or("armijo_max_halvings", d.armijo_max_halvings),
            max_radiation_iters: opt_r.usize_or("max_radiation_iters", d.max_radiation_iters),
            max_inner_iters: opt_r.usize_or("max_inner_iters", d.max_inner_iters),
            max_outer_iters: opt_r.usize_or("max_outer_iters", d.max_outer_iters),
            bisection_rel_tol: opt_r.f64_or("bisection_rel_tol", d.bisection_rel_tol),
            bisection_growth: opt_r.f64_or("bisection_growth", d.bisection_growth),
            penalty_init: opt_r.f64_or("penalty_init", d.penalty_init),
            penalty_growth: opt_r.f64_or("penalty_growth", d.penalty_growth),
        };
        opt_r.finish(&mut errors);

        // ---- experiment ----
        let mut exp_r = Reader::new(&root, "experiment", &mut errors);
        let kind_s = exp_r.string_or("kind", "theory-validation");
        let kind = match kind_s.parse::<ExperimentKind>() {
            Ok(k) => k,
            Err(_) => {
                errors.push(format!("experiment.kind: unknown value {kind_s:?}"));
                ExperimentKind::TheoryValidation
            }
        };
        let ed = ExperimentSpec::defaults_for(kind);
        let mn_pairs = match exp_r.get("mn_pairs") {
            None => ed.mn_pairs.clone(),
            Some(Value::Array(a)) => {
                let mut out = Vec::new();
                for (i, v) in a.iter().enumerate() {
                    match v {
                        Value::Array(p) if p.len() == 2 => {
                            match (p[0].as_integer(), p[1].as_integer()) {
                                (Some(m), Some(n)) if m > 0 && n > 0 => {
                                    out.push((m as usize, n as usize))
                                }
                                _ => errors.push(format!(
                                    "experiment.mn_pairs[{i}]: expected two positive integers"
                                )),
                            }
                        }
                        _ => errors.push(format!(
                            "experiment.mn_pairs[{i}]: expected a [M, N] pair"
                        )),
                    }
                }
                out
            }
            Some(v) => {
                errors.push(format!(
                    "experiment.mn_pairs: expected an array of pairs, found {}",
                    v.type_str()
                ));
                ed.mn_pairs.clone()
            }
        };
        let protocols = match exp_r.get("protocols") {
            None => ed.protocols.clone(),
            Some(Value::Array(a)) => {
                let mut out = Vec::new();
                for (i, v) in a.iter().enumerate() {
                    match v.as_str().map(str::parse::<ProtocolKind>) {
                        Some(Ok(p)) => out.push(p),
                        _ => errors.push(format!(
                            "experiment.protocols[{i}]: expected stt | sta | sat | saa"
                        )),
                    }
                }
                out
            }
            Some(v) => {
                errors.push(format!(
                    "experiment.protocols: expected an array, found {}",
                    v.type_str()
                ));
                ed.protocols.clone()
            }
        };
        let experiment = ExperimentSpec {
            kind,
            p_max_dbw: exp_r.f64_list_or("p_max_dbw", &ed.p_max_dbw),
            mn_pairs,
            protocols,
            coarse_steps_m: exp_r.f64_list_or("coarse_steps_m", &ed.coarse_steps_m),
            fine_steps_m: exp_r.f64_list_or("fine_steps_m", &ed.fine_steps_m),
            seeds: exp_r.u64_list_or("seeds", &ed.seeds),
            mc_draws: exp_r.usize_or("mc_draws", ed.mc_draws),
            mc_batches: exp_r.usize_or("mc_batches", ed.mc_batches),
            penalty_init: exp_r.f64_or("penalty_init", ed.penalty_init),
            penalty_growth: exp_r.f64_or("penalty_growth", ed.penalty_growth),
            sat_base_multiplier: exp_r.usize_or("sat_base_multiplier", ed.sat_base_multiplier),
        };
        exp_r.finish(&mut errors);

        // ---- run ----
        let mut run_r = Reader::new(&root, "run", &mut errors);
        let seed_file = match run_r.get("seed") {
            Some(Value::Integer(i)) if *i >= 0 => Some(*i as u64),
            Some(v) => {
                run_r.errors.push(format!(
                    "run.seed: expected a nonnegative integer, found {}",
                    v.type_str()
                ));
                None
            }
            None => None,
        };
        let _ = run_r.string_or("version", TOOL_VERSION);
        let _ = run_r.usize_or("timestamp_unix", 0);
        let _ = run_r.string_or("config_hash", "");
        run_r.finish(&mut errors);
        let seed = seed_flag.or(seed_file).unwrap_or(0);

        // ---- validation, exhaustively collected ----
        errors.extend(system.validate());
        errors.extend(users.validate());
        errors.extend(grid.validate());
        errors.extend(optimizer.validate());
        errors.extend(experiment.validate());
        if system.users != users.len() {
            errors.push("system.users: user coordinate lists disagree".into());
        }

        if !errors.is_empty() {
            return Err(errors);
        }

        let timestamp_unix = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);

        let mut manifest = Self {
            system,
            users,
            grid,
            protocol,
            optimizer,
            experiment,
            seed,
            timestamp_unix,
            raw: toml::Table::new(),
        };
        manifest.raw = manifest.materialized_tree(
            waveguides,
            pas,
            bandwidth,
            carrier,
            guide_index,
            att_db,
            att_ref,
            ref_gain_db,
            beta_u,
            k_rician,
            nu,
            p_max_dbw,
            noise_dbm,
            bs_static_dbw,
            pa_act_dbm,
            pa_mot_dbm,
            pa_pie_dbm,
            x_min,
            x_max,
            spacing,
            area,
            y_bar_raw,
            motor,
            piezo,
            user_x,
            user_y,
            protocol_s,
        );
        Ok(manifest)
    }

    #[allow(clippy::too_many_arguments)]
    fn materialized_tree(
        &self,
        waveguides: usize,
        pas: usize,
        bandwidth: f64,
        carrier: f64,
        guide_index: f64,
        att_db: f64,
        att_ref: f64,
        ref_gain_db: Option<f64>,
        beta_u: f64,
        k_rician: f64,
        nu: f64,
        p_max_dbw: f64,
        noise_dbm: f64,
        bs_static_dbw: f64,
        pa_act_dbm: f64,
        pa_mot_dbm: f64,
        pa_pie_dbm: f64,
        x_min: f64,
        x_max: f64,
        spacing: Option<f64>,
        area: f64,
        y_bar_raw: Option<Vec<f64>>,
        motor: f64,
        piezo: f64,
        user_x: Vec<f64>,
        user_y: Vec<f64>,
        protocol_s: String,
    ) -> toml::Table {
        fn fv(x: f64) -> Value {
            Value::Float(x)
        }
        fn iv(x: usize) -> Value {
            Value::Integer(x as i64)
        }
        fn fl(xs: &[f64]) -> Value {
            Value::Array(xs.iter().map(|&x| fv(x)).collect())
        }
        let auto_or = |o: Option<f64>| match o {
            Some(x) => fv(x),
            None => Value::String("auto".into()),
        };

        let mut system = toml::Table::new();
        system.insert("waveguides".into(), iv(waveguides));
        system.insert("pas_per_waveguide".into(), iv(pas));
        system.insert("bandwidth_hz".into(), fv(bandwidth));
        system.insert("carrier_frequency_hz".into(), fv(carrier));
        system.insert("guide_index".into(), fv(guide_index));
        system.insert("attenuation_db".into(), fv(att_db));
        system.insert("attenuation_ref_length_m".into(), fv(att_ref));
        system.insert("ref_gain_db".into(), auto_or(ref_gain_db));
        system.insert("path_loss_exponent".into(), fv(beta_u));
        system.insert("rician_factor".into(), fv(k_rician));
        system.insert("amplifier_efficiency".into(), fv(nu));
        system.insert("p_max_dbw".into(), fv(p_max_dbw));
        system.insert("noise_power_dbm".into(), fv(noise_dbm));
        system.insert("bs_static_power_dbw".into(), fv(bs_static_dbw));
        system.insert("pa_activation_dbm".into(), fv(pa_act_dbm));
        system.insert("pa_motor_dbm".into(), fv(pa_mot_dbm));
        system.insert("pa_piezo_dbm".into(), fv(pa_pie_dbm));
        system.insert("x_min_m".into(), fv(x_min));
        system.insert("x_max_m".into(), fv(x_max));
        system.insert("min_pa_spacing_m".into(), auto_or(spacing));
        system.insert("area_side_m".into(), fv(area));
        system.insert(
            "waveguide_y_m".into(),
            match y_bar_raw {
                Some(ref ys) => fl(ys),
                None => Value::String("auto".into()),
            },
        );
        system.insert("motor_speed_m_s".into(), fv(motor));
        system.insert("piezo_speed_m_s".into(), fv(piezo));
        system.insert("user_x_m".into(), fl(&user_x));
        system.insert("user_y_m".into(), fl(&user_y));

        let mut grid = toml::Table::new();
        grid.insert("protocol".into(), Value::String(protocol_s));
        grid.insert("coarse_step_m".into(), fv(self.grid.coarse_step));
        grid.insert("fine_step_m".into(), fv(self.grid.fine_step));
        grid.insert("fine_range_m".into(), fv(self.grid.fine_range));
        grid.insert("base_multiplier".into(), iv(self.grid.base_multiplier));
        grid.insert("pa_multiplier".into(), iv(self.grid.pa_multiplier));

        let mut opt = toml::Table::new();
        opt.insert("eps_radiation".into(), fv(self.optimizer.eps_radiation));
        opt.insert("eps_inner".into(), fv(self.optimizer.eps_inner));
        opt.insert("eps_outer".into(), fv(self.optimizer.eps_outer));
        opt.insert("step_init".into(), fv(self.optimizer.step_init));
        opt.insert("armijo_contraction".into(), fv(self.optimizer.armijo_contraction));
        opt.insert("armijo_slope".into(), fv(self.optimizer.armijo_slope));
        opt.insert("armijo_max_halvings".into(), iv(self.optimizer.armijo_max_halvings));
        opt.insert("max_radiation_iters".into(), iv(self.optimizer.max_radiation_iters));
        opt.insert("max_inner_iters".into(), iv(self.optimizer.max_inner_iters));
        opt.insert("max_outer_iters".into(), iv(self.optimizer.max_outer_iters));
        opt.insert("bisection_rel_tol".into(), fv(self.optimizer.bisection_rel_tol));
        opt.insert("bisection_growth".into(), fv(self.optimizer.bisection_growth));
        opt.insert("penalty_init".into(), fv(self.optimizer.penalty_init));
        opt.insert("penalty_growth".into(), fv(self.optimizer.penalty_growth));

        let mut exp = toml::Table::new();
        exp.insert("kind".into(), Value::String(self.experiment.kind.to_string()));
        exp.insert("p_max_dbw".into(), fl(&self.experiment.p_max_dbw));
        exp.insert(
            "mn_pairs".into(),
            Value::Array(
                self.experiment
                    .mn_pairs
                    .iter()
                    .map(|&(m, n)| Value::Array(vec![iv(m), iv(n)]))
                    .collect(),
            ),
        );
        exp.insert(
            "protocols".into(),
            Value::Array(
                self.experiment
                    .protocols
                    .iter()
                    .map(|p| Value::String(p.to_string()))
                    .collect(),
            ),
        );
        exp.insert("coarse_steps_m".into(), fl(&self.experiment.coarse_steps_m));
        exp.insert("fine_steps_m".into(), fl(&self.experiment.fine_steps_m));
        exp.insert(
            "seeds".into(),
            Value::Array(
                self.experiment
                    .seeds
                    .iter()
                    .map(|&s| Value::Integer(s as i64))
                    .collect(),
            ),
        );
        exp.insert("mc_draws".into(), iv(self.experiment.mc_draws));
        exp.insert("mc_batches".into(), iv(self.experiment.mc_batches));
        exp.insert("penalty_init".into(), fv(self.experiment.penalty_init));
        exp.insert("penalty_growth".into(), fv(self.experiment.penalty_growth));
        exp.insert(
            "sat_base_multiplier".into(),
            iv(self.experiment.sat_base_multiplier),
        );

        let mut root = toml::Table::new();
        root.insert("system".into(), Value::Table(system));
        root.insert("grid".into(), Value::Table(grid));
        root.insert("optimizer".into(), Value::Table(opt));
        root.insert("experiment".into(), Value::Table(exp));
        root
    }

    /// Content hash over the configuration sections and seed (timestamp
    /// excluded, so reruns hash identically).
    pub fn config_hash(&self) -> String {
        let body = toml::to_string(&Value::Table(self.raw.clone()))
            .expect("manifest serializes");
        content_hash(format!("{body}\nseed = {}\n", self.seed).as_bytes())
    }

    /// Full manifest document, ready to be written next to the outputs and
    /// fed back through `--config`.
    pub fn to_toml_string(&self) -> String {
        let mut root = self.raw.clone();
        let mut run = toml::Table::new();
        run.insert("seed".into(), Value::Integer(self.seed as i64));
        run.insert("version".into(), Value::String(TOOL_VERSION.into()));
        run.insert(
            "timestamp_unix".into(),
            Value::Integer(self.timestamp_unix as i64),
        );
        run.insert("config_hash".into(), Value::String(self.config_hash()));
        root.insert("run".into(), Value::Table(run));
        toml::to_string(&Value::Table(root)).expect("manifest serializes")
    }
}
