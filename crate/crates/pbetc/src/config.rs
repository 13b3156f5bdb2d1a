//! Flat key = value run-configuration files.
//!
//! A configuration has three sections and looks like
//!
//! ```text
//! [plant]
//! epsilon = 0.1
//! lambda  = constant:0.25
//! q       = 2.0
//! theta1  = 1
//! theta2  = 0
//! n_nodes = 201
//! u0      = bump:10.0
//!
//! [trigger]
//! kind  = cetc
//! gamma = 1.0
//! eta   = 0.0383
//! c     = 0.0
//! sigma = 0.9
//! m0    = 1e-4
//! kappa = 5.0
//! B     = 3308.7
//! h     = 0.01
//!
//! [sim]
//! dt      = 0.001
//! t_final = 500.0
//! ```
//!
//! Comments start with `#` or `;` and run to the end of the line. Spatial
//! profiles (`lambda`, `u0`) are written as presets:
//!
//! * `constant:<v>` — the same value everywhere,
//! * `affine:<a>,<b>` — `a + b x`,
//! * `bump:<amp>` — `amp x^2 (x - 1)^2`,
//! * `values:<v0>,<v1>,...` — explicit node values, one per grid node,
//! * `csv:<path>` — two-column `x,value` file with one row per grid node
//!   (the path resolves relative to the configuration file).
//!
//! [`serialize`] writes a canonical document (profiles inlined as `values:`
//! with full-precision floats) such that parsing it back reproduces the
//! configuration exactly.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::kernels::PlantConfig;
use crate::numerics::{Grid, SpatialProfile};
use crate::simulator::{Disturbance, SimConfig};
use crate::trigger_params::{BSpec, UserParams};
use crate::triggers::TriggerKind;

/// Keys accepted in `[plant]`.
const PLANT_KEYS: &[&str] = &["epsilon", "lambda", "q", "theta1", "theta2", "n_nodes", "u0"];
/// Keys accepted in `[trigger]`.
const TRIGGER_KEYS: &[&str] = &[
    "kind",
    "gamma",
    "eta",
    "c",
    "sigma",
    "m0",
    "kappa",
    "B",
    "h",
    "robust_residual",
    "stc_cap_factor",
];
/// Keys accepted in `[sim]`.
const SIM_KEYS: &[&str] =
    &["dt", "t_final", "record_stride", "kernel_refine", "disturbance"];

/// Default trace-recording stride.
const DEFAULT_RECORD_STRIDE: usize = 100;
/// Default kernel-grid refinement factor.
const DEFAULT_KERNEL_REFINE: usize = 8;
/// Default self-triggered dwell cap as a multiple of tau.
const DEFAULT_STC_CAP_FACTOR: f64 = 100.0;

/// Parsed document: `"section.key" -> (value, line number)`.
struct Doc {
    entries: HashMap<String, (String, usize)>,
}

impl Doc {
    fn get(&self, section: &str, key: &str) -> Option<(&str, usize)> {
        self.entries.get(&format!("{section}.{key}")).map(|(v, l)| (v.as_str(), *l))
    }

    /// Required key; a missing key is a validation error named after the key.
    fn require(&self, section: &str, key: &str) -> Result<(&str, usize)> {
        self.get(section, key).ok_or_else(|| Error::ValidationError(key.to_string()))
    }
}

fn allowed_keys(section: &str) -> Option<&'static [&'static str]> {
    match section {
        "plant" => Some(PLANT_KEYS),
        "trigger" => Some(TRIGGER_KEYS),
        "sim" => Some(SIM_KEYS),
        _ => None,
    }
}

fn parse_doc(text: &str) -> Result<Doc> {
    let mut entries = HashMap::new();
    let mut section: Option<String> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let stripped = match raw.find(['#', ';']) {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let s = stripped.trim();
        if s.is_empty() {
            continue;
        }
        if let Some(name) = s.strip_prefix('[') {
            let Some(name) = name.strip_suffix(']') else {
                return Err(Error::ParseError {
                    line,
                    msg: format!("malformed section header '{s}'"),
                });
            };
            let name = name.trim();
            if allowed_keys(name).is_none() {
                return Err(Error::ParseError {
                    line,
                    msg: format!("unknown section '[{name}]' (expected [plant], [trigger], or [sim])"),
                });
            }
            section = Some(name.to_string());
            continue;
        }
        let Some((key, value)) = s.split_once('=') else {
            return Err(Error::ParseError { line, msg: format!("expected 'key = value', got '{s}'") });
        };
        let key = key.trim();
        let value = value.trim();
        let Some(section) = section.as_deref() else {
            return Err(Error::ParseError {
                line,
                msg: format!("key '{key}' appears before any section header"),
            });
        };
        if !allowed_keys(section).unwrap().contains(&key) {
            return Err(Error::ParseError {
                line,
                msg: format!("unknown key '{key}' in [{section}]"),
            });
        }
        if value.is_empty() {
            return Err(Error::ParseError { line, msg: format!("empty value for '{key}'") });
        }
        if entries.insert(format!("{section}.{key}"), (value.to_string(), line)).is_some() {
            return Err(Error::ParseError {
                line,
                msg: format!("duplicate key '{key}' in [{section}]"),
            });
        }
    }
    Ok(Doc { entries })
}

fn parse_f64(value: &str, key: &str, line: usize) -> Result<f64> {
    value.parse::<f64>().map_err(|_| Error::ParseError {
        line,
        msg: format!("invalid number for '{key}': '{value}'"),
    })
}

fn parse_usize(value: &str, key: &str, line: usize) -> Result<usize> {
    value.parse::<usize>().map_err(|_| Error::ParseError {
        line,
        msg: format!("invalid integer for '{key}': '{value}'"),
    })
}

fn parse_bool(value: &str, key: &str, line: usize) -> Result<bool> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(Error::ParseError {
            line,
            msg: format!("invalid boolean for '{key}': '{value}' (expected true or false)"),
        }),
    }
}

fn req_f64(doc: &Doc, section: &str, key: &str) -> Result<f64> {
    let (v, line) = doc.require(section, key)?;
    parse_f64(v, key, line)
}

fn opt_f64(doc: &Doc, section: &str, key: &str, default: f64) -> Result<f64> {
    match doc.get(section, key) {
        Some((v, line)) => parse_f64(v, key, line),
        None => Ok(default),
    }
}

fn opt_usize(doc: &Doc, section: &str, key: &str, default: usize) -> Result<usize> {
    match doc.get(section, key) {
        Some((v, line)) => parse_usize(v, key, line),
        None => Ok(default),
    }
}

fn comma_floats(spec: &str, key: &str, line: usize) -> Result<Vec<f64>> {
    spec.split(',').map(|p| parse_f64(p.trim(), key, line)).collect()
}

/// Parse a spatial-profile preset onto `grid`.
fn parse_profile(
    spec: &str,
    grid: Grid,
    key: &str,
    line: usize,
    base_dir: &Path,
) -> Result<SpatialProfile> {
    let Some((tag, rest)) = spec.split_once(':') else {
        return Err(Error::ParseError {
            line,
            msg: format!(
                "profile '{key}' must be preset:args (constant:, affine:, bump:, values:, csv:), got '{spec}'"
            ),
        });
    };
    match tag {
        "constant" => {
            let v = parse_f64(rest, key, line)?;
            SpatialProfile::constant(grid, v)
        }
        "affine" => {
            let parts = comma_floats(rest, key, line)?;
            if parts.len() != 2 {
                return Err(Error::ParseError {
                    line,
                    msg: format!("affine profile for '{key}' needs exactly a,b; got '{rest}'"),
                });
            }
            SpatialProfile::from_fn(grid, |x| parts[0] + parts[1] * x)
        }
        "bump" => {
            let amp = parse_f64(rest, key, line)?;
            SpatialProfile::from_fn(grid, |x| amp * x * x * (x - 1.0) * (x - 1.0))
        }
        "values" => {
            let vals = comma_floats(rest, key, line)?;
            if vals.len() != grid.n_nodes() {
                return Err(Error::GridMismatch { left: vals.len(), right: grid.n_nodes() });
            }
            SpatialProfile::new(grid, vals)
        }
        "csv" => profile_from_csv(&base_dir.join(rest.trim()), grid),
        other => Err(Error::ParseError {
            line,
            msg: format!("unknown profile preset '{other}' for '{key}'"),
        }),
    }
}

/// Load a two-column `x,value` CSV whose rows are exactly the grid nodes.
pub fn profile_from_csv(path: &Path, grid: Grid) -> Result<SpatialProfile> {
    let text = fs::read_to_string(path)?;
    let mut xs = Vec::new();
    let mut vals = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let s = raw.trim();
        if s.is_empty() || s.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = s.split(',').map(str::trim).collect();
        if fields.len() != 2 {
            return Err(Error::ParseError {
                line,
                msg: format!("expected two comma-separated columns in {}", path.display()),
            });
        }
        match (fields[0].parse::<f64>(), fields[1].parse::<f64>()) {
            (Ok(x), Ok(v)) => {
                xs.push(x);
                vals.push(v);
            }
            _ if xs.is_empty() => continue, // header row
            _ => {
                return Err(Error::ParseError {
                    line,
                    msg: format!("invalid numeric row in {}: '{s}'", path.display()),
                });
            }
        }
    }
    if xs.len() != grid.n_nodes() {
        return Err(Error::GridMismatch { left: xs.len(), right: grid.n_nodes() });
    }
    for (i, &x) in xs.iter().enumerate() {
        if (x - grid.x(i)).abs() > 1e-9 {
            return Err(Error::ValidationError(format!(
                "profile csv {} node {} is x = {}, expected grid node {}",
                path.display(),
                i,
                x,
                grid.x(i)
            )));
        }
    }
    SpatialProfile::new(grid, vals)
}

/// Parse a configuration file into a validated [`SimConfig`].
pub fn parse_config(path: &Path) -> Result<SimConfig> {
    let text = fs::read_to_string(path)?;
    let base_dir = path.parent().unwrap_or_else(|| Path::new("."));
    parse_config_str(&text, base_dir)
}

/// Parse configuration text; `base_dir` anchors relative `csv:` profile paths.
pub fn parse_config_str(text: &str, base_dir: &Path) -> Result<SimConfig> {
    let doc = parse_doc(text)?;

    // [plant]
    let epsilon = req_f64(&doc, "plant", "epsilon")?;
    let q = req_f64(&doc, "plant", "q")?;
    let theta1 = {
        let (v, line) = doc.require("plant", "theta1")?;
        u8::try_from(parse_usize(v, "theta1", line)?).map_err(|_| Error::ParseError {
            line,
            msg: format!("theta1 must be 0 or 1, got '{v}'"),
        })?
    };
    let theta2 = {
        let (v, line) = doc.require("plant", "theta2")?;
        u8::try_from(parse_usize(v, "theta2", line)?).map_err(|_| Error::ParseError {
            line,
            msg: format!("theta2 must be 0 or 1, got '{v}'"),
        })?
    };
    let n_nodes = {
        let (v, line) = doc.require("plant", "n_nodes")?;
        parse_usize(v, "n_nodes", line)?
    };
    let grid = Grid::new(n_nodes)?;
    let lambda = {
        let (v, line) = doc.require("plant", "lambda")?;
        parse_profile(v, grid, "lambda", line, base_dir)?
    };
    let u0 = {
        let (v, line) = doc.require("plant", "u0")?;
        parse_profile(v, grid, "u0", line, base_dir)?
    };
    let plant = PlantConfig::new(epsilon, lambda, q, theta1, theta2, u0)?;

    // [trigger]
    let kind = {
        let (v, line) = doc.require("trigger", "kind")?;
        v.parse::<TriggerKind>().map_err(|e| Error::ParseError { line, msg: e.to_string() })?
    };
    let sigma = req_f64(&doc, "trigger", "sigma")?;
    if !(sigma > 0.0 && sigma < 1.0) {
        return Err(Error::ValidationError(format!("sigma in (0,1), got {sigma}")));
    }
    let b_spec = {
        let (v, _line) = doc.require("trigger", "B")?;
        if v.eq_ignore_ascii_case("auto") {
            BSpec::Auto
        } else {
            let (v, line) = doc.require("trigger", "B")?;
            BSpec::Value(parse_f64(v, "B", line)?)
        }
    };
    let robust_residual = match doc.get("trigger", "robust_residual") {
        Some((v, line)) => parse_bool(v, "robust_residual", line)?,
        None => false,
    };
    let user = UserParams {
        gamma: req_f64(&doc, "trigger", "gamma")?,
        eta: req_f64(&doc, "trigger", "eta")?,
        c: opt_f64(&doc, "trigger", "c", 0.0)?,
        sigma,
        m0: req_f64(&doc, "trigger", "m0")?,
        kappa: req_f64(&doc, "trigger", "kappa")?,
        b_spec,
        h: opt_f64(&doc, "trigger", "h", 0.0)?,
        robust_residual,
        stc_cap_factor: opt_f64(&doc, "trigger", "stc_cap_factor", DEFAULT_STC_CAP_FACTOR)?,
    };
    user.validate()?;

    // [sim]
    let disturbance = match doc.get("sim", "disturbance") {
        Some((v, line)) => {
            let parts = comma_floats(v, "disturbance", line)?;
            if parts.len() != 3 {
                return Err(Error::ParseError {
                    line,
                    msg: format!(
                        "disturbance needs amplitude,start,duration; got '{v}'"
                    ),
                });
            }
            Some(Disturbance { amplitude: parts[0], start: parts[1], duration: parts[2] })
        }
        None => None,
    };
    let cfg = SimConfig {
        plant,
        user,
        kind,
        dt: req_f64(&doc, "sim", "dt")?,
        t_final: req_f64(&doc, "sim", "t_final")?,
        record_stride: opt_usize(&doc, "sim", "record_stride", DEFAULT_RECORD_STRIDE)?,
        disturbance,
        kernel_refine: opt_usize(&doc, "sim", "kernel_refine", DEFAULT_KERNEL_REFINE)?,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn push_values_profile(out: &mut String, key: &str, profile: &SpatialProfile) {
    out.push_str(key);
    out.push_str(" = values:");
    for (i, v) in profile.values().iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&format!("{v}"));
    }
    out.push('\n');
}

/// Serialize a configuration to canonical text; `parse_config_str` on the
/// result reproduces the configuration exactly (floats are written in
/// shortest round-trip form, profiles as explicit `values:` lists).
pub fn serialize(cfg: &SimConfig) -> String {
    let mut out = String::new();
    out.push_str("[plant]\n");
    out.push_str(&format!("epsilon = {}\n", cfg.plant.epsilon()));
    push_values_profile(&mut out, "lambda", cfg.plant.lambda());
    out.push_str(&format!("q = {}\n", cfg.plant.q()));
    out.push_str(&format!("theta1 = {}\n", cfg.plant.theta1()));
    out.push_str(&format!("theta2 = {}\n", cfg.plant.theta2()));
    out.push_str(&format!("n_nodes = {}\n", cfg.plant.grid().n_nodes()));
    push_values_profile(&mut out, "u0", cfg.plant.u0());
    out.push_str("\n[trigger]\n");
    out.push_str(&format!("kind = {}\n", cfg.kind.as_str()));
    out.push_str(&format!("gamma = {}\n", cfg.user.gamma));
    out.push_str(&format!("eta = {}\n", cfg.user.eta));
    out.push_str(&format!("c = {}\n", cfg.user.c));
    out.push_str(&format!("sigma = {}\n", cfg.user.sigma));
    out.push_str(&format!("m0 = {}\n", cfg.user.m0));
    out.push_str(&format!("kappa = {}\n", cfg.user.kappa));
    match cfg.user.b_spec {
        BSpec::Auto => out.push_str("B = auto\n"),
        BSpec::Value(b) => out.push_str(&format!("B = {b}\n")),
    }
    out.push_str(&format!("h = {}\n", cfg.user.h));
    out.push_str(&format!("robust_residual = {}\n", cfg.user.robust_residual));
    out.push_str(&format!("stc_cap_factor = {}\n", cfg.user.stc_cap_factor));
    out.push_str("\n[sim]\n");
    out.push_str(&format!("dt = {}\n", cfg.dt));
    out.push_str(&format!("t_final = {}\n", cfg.t_final));
    out.push_str(&format!("record_stride = {}\n", cfg.record_stride));
    out.push_str(&format!("kernel_refine = {}\n", cfg.kernel_refine));
    if let Some(d) = &cfg.disturbance {
        out.push_str(&format!("disturbance = {},{},{}\n", d.amplitude, d.start, d.duration));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn benchmark_text() -> String {
        "\
[plant]
epsilon = 0.1
lambda = constant:0.25
q = 2.0
theta1 = 1
theta2 = 0
n_nodes = 201
u0 = bump:10.0

[trigger]
kind = cetc
gamma = 1.0
eta = 0.0383
c = 0.0
sigma = 0.9
m0 = 1e-4
kappa = 5.0
B = 3308.7
h = 0.01

[sim]
dt = 0.001
t_final = 500.0
record_stride = 100
kernel_refine = 8
"
        .to_string()
    }

    fn parse_text(text: &str) -> Result<SimConfig> {
        parse_config_str(text, Path::new("."))
    }

    #[test]
    fn benchmark_file_parses_to_the_expected_run() {
        let cfg = parse_text(&benchmark_text()).unwrap();
        assert_eq!(cfg.plant.epsilon(), 0.1);
        assert_eq!(cfg.plant.q(), 2.0);
        assert_eq!(cfg.plant.theta1(), 1);
        assert_eq!(cfg.plant.grid().n_nodes(), 201);
        assert!(cfg.plant.lambda().values().iter().all(|&v| v == 0.25));
        let bump = crate::trigger_params::bump_profile(cfg.plant.grid(), 10.0).unwrap();
        assert_eq!(cfg.plant.u0().values(), bump.values());
        assert_eq!(cfg.kind, TriggerKind::Cetc);
        assert_eq!(cfg.user.gamma, 1.0);
        assert_eq!(cfg.user.eta, 0.0383);
        assert_eq!(cfg.user.c, 0.0);
        assert_eq!(cfg.user.sigma, 0.9);
        assert_eq!(cfg.user.m0, 1e-4);
        assert_eq!(cfg.user.kappa, 5.0);
        assert_eq!(cfg.user.b_spec, BSpec::Value(3308.7));
        assert_eq!(cfg.user.h, 0.01);
        assert!(!cfg.user.robust_residual);
        assert_eq!(cfg.user.stc_cap_factor, 100.0);
        assert_eq!(cfg.dt, 0.001);
        assert_eq!(cfg.t_final, 500.0);
        assert_eq!(cfg.record_stride, 100);
        assert_eq!(cfg.kernel_refine, 8);
        assert!(cfg.disturbance.is_none());
    }

    #[test]
    fn comments_and_whitespace_are_ignored() {
        let text = benchmark_text()
            .replace("epsilon = 0.1", "  epsilon =   0.1   # diffusion")
            .replace("[trigger]", "; a full-line comment\n[trigger]");
        let cfg = parse_text(&text).unwrap();
        assert_eq!(cfg.plant.epsilon(), 0.1);
    }

    #[test]
    fn missing_epsilon_is_reported_by_name() {
        let text = benchmark_text().replace("epsilon = 0.1\n", "");
        match parse_text(&text) {
            Err(Error::ValidationError(msg)) => assert_eq!(msg, "epsilon"),
            other => panic!("expected ValidationError(\"epsilon\"), got {other:?}"),
        }
    }

    #[test]
    fn sigma_outside_the_open_interval_is_rejected() {
        let text = benchmark_text().replace("sigma = 0.9", "sigma = 1.5");
        match parse_text(&text) {
            Err(Error::ValidationError(msg)) => {
                assert!(msg.starts_with("sigma in (0,1)"), "got '{msg}'")
            }
            other => panic!("expected a sigma validation error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_key_is_a_parse_error_with_the_line_number() {
        let text = benchmark_text().replace("q = 2.0", "q = 2.0\nviscosity = 3");
        match parse_text(&text) {
            Err(Error::ParseError { line, msg }) => {
                assert_eq!(line, 5);
                assert!(msg.contains("viscosity"), "got '{msg}'");
            }
            other => panic!("expected ParseError, got {other:?}"),
        }
    }

    #[test]
    fn malformed_lines_are_parse_errors() {
        for (needle, replacement) in [
            ("[plant]", "[plant"),             // malformed header
            ("[plant]", "[reactor]"),          // unknown section
            ("q = 2.0", "q 2.0"),              // missing '='
            ("q = 2.0", "q ="),                // empty value
            ("q = 2.0", "q = fast"),           // bad number
            ("n_nodes = 201", "n_nodes = 2.5"), // bad integer
            ("kind = cetc", "kind = manual"),  // bad trigger kind
        ] {
            let text = benchmark_text().replace(needle, replacement);
            match parse_text(&text) {
                Err(Error::ParseError { .. }) => {}
                other => panic!("'{replacement}' should be a ParseError, got {other:?}"),
            }
        }
    }

    #[test]
    fn keys_before_any_section_and_duplicates_are_rejected() {
        let loose = format!("epsilon = 0.1\n{}", benchmark_text());
        assert!(matches!(parse_text(&loose), Err(Error::ParseError { line: 1, .. })));
        let dup = benchmark_text().replace("q = 2.0", "q = 2.0\nq = 3.0");
        assert!(matches!(parse_text(&dup), Err(Error::ParseError { .. })));
    }

    #[test]
    fn affine_and_values_profiles_evaluate_correctly() {
        let text = benchmark_text().replace("lambda = constant:0.25", "lambda = affine:0.05,0.1");
        let cfg = parse_text(&text).unwrap();
        let g = cfg.plant.grid();
        for i in 0..g.n_nodes() {
            assert!((cfg.plant.lambda().value(i) - (0.05 + 0.1 * g.x(i))).abs() < 1e-15);
        }

        let small = benchmark_text()
            .replace("n_nodes = 201", "n_nodes = 3")
            .replace("lambda = constant:0.25", "lambda = values:0.1,0.15,0.2")
            .replace("u0 = bump:10.0", "u0 = values:0,1,0");
        let cfg = parse_text(&small).unwrap();
        assert_eq!(cfg.plant.lambda().values(), &[0.1, 0.15, 0.2]);
        assert_eq!(cfg.plant.u0().values(), &[0.0, 1.0, 0.0]);

        let wrong_len = benchmark_text().replace(
            "lambda = constant:0.25",
            "lambda = values:0.1,0.2,0.3",
        );
        assert!(matches!(parse_text(&wrong_len), Err(Error::GridMismatch { left: 3, right: 201 })));
    }

    #[test]
    fn csv_profiles_load_and_validate_nodes() {
        let dir = tempfile::tempdir().unwrap();
        let grid = Grid::new(5).unwrap();
        let mut rows = String::from("x,lambda\n");
        for i in 0..5 {
            rows.push_str(&format!("{},{}\n", grid.x(i), 0.05 * i as f64));
        }
        fs::write(dir.path().join("lam.csv"), &rows).unwrap();
        let text = benchmark_text()
            .replace("n_nodes = 201", "n_nodes = 5")
            .replace("lambda = constant:0.25", "lambda = csv:lam.csv");
        let cfg = parse_config_str(&text, dir.path()).unwrap();
        let expected: Vec<f64> = (0..5).map(|i| 0.05 * i as f64).collect();
        assert_eq!(cfg.plant.lambda().values(), &expected[..]);

        // Shifted nodes are rejected.
        let shifted = rows.replace("0.25,", "0.26,");
        fs::write(dir.path().join("lam.csv"), shifted).unwrap();
        assert!(matches!(parse_config_str(&text, dir.path()), Err(Error::ValidationError(_))));
    }

    #[test]
    fn auto_b_and_disturbance_round_trip_through_text() {
        let text = benchmark_text().replace("B = 3308.7", "B = auto")
            + "disturbance = 100,1,0.5\n";
        let cfg = parse_text(&text).unwrap();
        assert_eq!(cfg.user.b_spec, BSpec::Auto);
        assert_eq!(
            cfg.disturbance,
            Some(Disturbance { amplitude: 100.0, start: 1.0, duration: 0.5 })
        );
        let back = parse_text(&serialize(&cfg)).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn petc_sampling_must_sit_on_the_step_grid() {
        let text = benchmark_text()
            .replace("kind = cetc", "kind = petc")
            .replace("h = 0.01", "h = 0.0015");
        assert!(matches!(parse_text(&text), Err(Error::ValidationError(_))));
    }

    #[test]
    fn benchmark_round_trip_is_exact() {
        let cfg = parse_text(&benchmark_text()).unwrap();
        let back = parse_text(&serialize(&cfg)).unwrap();
        assert_eq!(back, cfg);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        /// parse(serialize(cfg)) == cfg over a family of valid configurations.
        #[test]
        fn serialization_round_trips_random_valid_configs(
            eps_scale in 0.05f64..1.0,
            lam0 in 0.0f64..0.6,
            lam_slope in 0.0f64..0.4,
            q_extra in 0.1f64..4.0,
            dirichlet in proptest::bool::ANY,
            n_sel in 0usize..3,
            gamma in 0.2f64..4.0,
            eta in 0.005f64..0.2,
            c in 0.0f64..10.0,
            sigma in 0.05f64..0.95,
            m0 in 1e-6f64..1e-2,
            kappa in 0.5f64..10.0,
            auto_b in proptest::bool::ANY,
            robust in proptest::bool::ANY,
            amp in 0.0f64..50.0,
            with_dist in proptest::bool::ANY,
        ) {
            let n_nodes = [11, 21, 41][n_sel];
            let grid = Grid::new(n_nodes).unwrap();
            let (theta1, theta2) = if dirichlet { (0u8, 1u8) } else { (1u8, 0u8) };
            let lam_max = lam0 + lam_slope;
            let q = lam_max / (2.0 * eps_scale) + f64::from(theta1) / 2.0 + q_extra;
            let lambda = SpatialProfile::from_fn(grid, |x| lam0 + lam_slope * x).unwrap();
            let u0 = crate::trigger_params::bump_profile(grid, 10.0).unwrap();
            let plant = PlantConfig::new(eps_scale, lambda, q, theta1, theta2, u0).unwrap();
            let user = UserParams {
                gamma,
                eta,
                c,
                sigma,
                m0,
                kappa,
                b_spec: if auto_b { BSpec::Auto } else { BSpec::Value(1000.0 + gamma) },
                h: 0.01,
                robust_residual: robust,
                stc_cap_factor: 100.0,
            };
            let cfg = SimConfig {
                plant,
                user,
                kind: TriggerKind::Petc,
                dt: 0.001,
                t_final: 5.0,
                record_stride: 10,
                disturbance: if with_dist {
                    Some(Disturbance { amplitude: amp, start: 1.0, duration: 0.5 })
                } else {
                    None
                },
                kernel_refine: 4,
            };
            let back = parse_text(&serialize(&cfg)).unwrap();
            prop_assert_eq!(back, cfg);
        }
    }
}
