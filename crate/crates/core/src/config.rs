//! Run configuration documents (TOML).
//!
//! ```toml
//! epsilon = 0.1
//! n = 128
//! t_end = 0.2
//!
//! [initial]
//! family = "flattened_sine"
//! amplitude = 0.05
//!
//! [sweep]                      # present only for sweeps
//! epsilons = [0.2, 0.1, 0.05]
//! delta = 0.01
//! k_max = 1
//! ```
//!
//! Every omitted flow key takes the [`FlowConfig::new`] default; `t_end`
//! defaults to [`DEFAULT_T_END`] and the initial curve to a flattened sine of
//! amplitude [`DEFAULT_AMPLITUDE`].

use toml::{Table, Value};

use crate::convergence::SweepConfig;
use crate::error::{FlowError, Result};
use crate::flow::FlowConfig;
use crate::geometry::InitialFamily;

pub const DEFAULT_N: usize = 128;
pub const DEFAULT_T_END: f64 = 0.2;
pub const DEFAULT_AMPLITUDE: f64 = 0.05;

const FLOW_KEYS: [&str; 7] = [
    "epsilon",
    "dt",
    "n",
    "t_end",
    "reparam_every",
    "kappa_blowup_threshold",
    "solver_tol",
];
const SWEEP_KEYS: [&str; 4] = ["epsilons", "delta", "k_max", "snapshot_times"];

/// A single run: flow parameters plus initial data.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowDocument {
    pub flow: FlowConfig,
    pub initial: InitialFamily,
}

/// An ε-ladder experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepDocument {
    pub sweep: SweepConfig,
    pub initial: InitialFamily,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParsedConfig {
    Flow(FlowDocument),
    Sweep(SweepDocument),
}

fn config_error(key: &str, reason: impl Into<String>) -> FlowError {
    FlowError::Config {
        key: key.into(),
        reason: reason.into(),
    }
}

fn real(table: &Table, key: &str, path: &str) -> Result<Option<f64>> {
    match table.get(key) {
        None => Ok(None),
        Some(Value::Float(v)) => Ok(Some(*v)),
        Some(Value::Integer(v)) => Ok(Some(*v as f64)),
        Some(other) => Err(config_error(path, format!("expected a number, found {}", other.type_str()))),
    }
}

fn count(table: &Table, key: &str, path: &str) -> Result<Option<usize>> {
    match table.get(key) {
        None => Ok(None),
        Some(Value::Integer(v)) if *v >= 0 => Ok(Some(*v as usize)),
        Some(other) => Err(config_error(path, format!("expected a nonnegative integer, found {other}"))),
    }
}

fn reals(table: &Table, key: &str, path: &str) -> Result<Option<Vec<f64>>> {
    match table.get(key) {
        None => Ok(None),
        Some(Value::Array(items)) => items
            .iter()
            .enumerate()
            .map(|(i, v)| match v {
                Value::Float(x) => Ok(*x),
                Value::Integer(x) => Ok(*x as f64),
                other => Err(config_error(&format!("{path}[{i}]"), format!("expected a number, found {other}"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Some),
        Some(other) => Err(config_error(path, format!("expected an array, found {}", other.type_str()))),
    }
}

fn reject_unknown(table: &Table, allowed: &[&str], prefix: &str) -> Result<()> {
    for key in table.keys() {
        if !allowed.contains(&key.as_str()) {
            let path = if prefix.is_empty() {
                key.clone()
            } else {
                format!("{prefix}.{key}")
            };
            return Err(config_error(&path, "unknown key"));
        }
    }
    Ok(())
}

fn flow_from(table: &Table) -> Result<FlowConfig> {
    let n = count(table, "n", "n")?.unwrap_or(DEFAULT_N);
    let epsilon = real(table, "epsilon", "epsilon")?.unwrap_or(0.0);
    let t_end = real(table, "t_end", "t_end")?.unwrap_or(DEFAULT_T_END);
    let mut flow = FlowConfig::new(epsilon, n, t_end);
    if let Some(dt) = real(table, "dt", "dt")? {
        flow.dt = dt;
    }
    if let Some(r) = count(table, "reparam_every", "reparam_every")? {
        flow.reparam_every = r;
    }
    if let Some(k) = real(table, "kappa_blowup_threshold", "kappa_blowup_threshold")? {
        flow.kappa_blowup_threshold = k;
    }
    if let Some(t) = real(table, "solver_tol", "solver_tol")? {
        flow.solver_tol = t;
    }
    flow.validate()?;
    Ok(flow)
}

fn initial_from(table: &Table) -> Result<InitialFamily> {
    match table.get("initial") {
        None => Ok(InitialFamily::FlattenedSine {
            amplitude: DEFAULT_AMPLITUDE,
        }),
        Some(Value::Table(t)) => Value::Table(t.clone())
            .try_into::<InitialFamily>()
            .map_err(|e| config_error("initial", e.message().to_string())),
        Some(other) => Err(config_error("initial", format!("expected a table, found {}", other.type_str()))),
    }
}

/// Whether every even derivative of the curvature vanishes at the ends, which
/// allows a comparison window starting at zero.
fn is_flattened(family: &InitialFamily) -> bool {
    matches!(family, InitialFamily::FlattenedSine { .. } | InitialFamily::Segment { .. })
}

fn sweep_from(table: &Table, base: FlowConfig, initial: &InitialFamily) -> Result<SweepConfig> {
    reject_unknown(table, &SWEEP_KEYS, "sweep")?;
    let epsilons =
        reals(table, "epsilons", "sweep.epsilons")?.ok_or_else(|| config_error("sweep.epsilons", "missing"))?;
    let mut sweep = SweepConfig::new(epsilons, base);
    if let Some(d) = real(table, "delta", "sweep.delta")? {
        sweep.delta = d;
        sweep.snapshot_times = SweepConfig::default_snapshot_times(&sweep.base, d);
    }
    if let Some(k) = count(table, "k_max", "sweep.k_max")? {
        sweep.k_max = k;
    }
    if let Some(times) = reals(table, "snapshot_times", "sweep.snapshot_times")? {
        sweep.snapshot_times = times;
    }
    if sweep.delta == 0.0 && !is_flattened(initial) {
        return Err(config_error(
            "sweep.delta",
            "a window starting at 0 needs initial data from the flattened family",
        ));
    }
    sweep.validate()?;
    Ok(sweep)
}

/// Parses and validates a configuration document. A `[sweep]` section makes
/// it a sweep; its flow keys then act as the shared base.
pub fn parse_config(text: &str) -> Result<ParsedConfig> {
    let table: Table = text
        .parse()
        .map_err(|e: toml::de::Error| config_error("<document>", e.message().to_string()))?;
    let mut allowed: Vec<&str> = FLOW_KEYS.to_vec();
    allowed.extend(["initial", "sweep"]);
    reject_unknown(&table, &allowed, "")?;
    let initial = initial_from(&table)?;
    let flow = flow_from(&table)?;
    match table.get("sweep") {
        None => Ok(ParsedConfig::Flow(FlowDocument { flow, initial })),
        Some(Value::Table(t)) => Ok(ParsedConfig::Sweep(SweepDocument {
            sweep: sweep_from(t, flow, &initial)?,
            initial,
        })),
        Some(other) => Err(config_error("sweep", format!("expected a table, found {}", other.type_str()))),
    }
}

/// Reads and parses a configuration file.
pub fn load_config(path: &std::path::Path) -> Result<ParsedConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key_of(text: &str) -> String {
        match parse_config(text) {
            Err(FlowError::Config { key, .. }) => key,
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_document_takes_defaults() {
        let ParsedConfig::Flow(doc) = parse_config("epsilon = 0.1").unwrap() else {
            panic!("not a flow document");
        };
        assert_eq!(doc.flow, FlowConfig::new(0.1, DEFAULT_N, DEFAULT_T_END));
        assert_eq!(doc.initial, InitialFamily::FlattenedSine { amplitude: DEFAULT_AMPLITUDE });
    }

    #[test]
    fn full_flow_document() {
        let text = r#"
            epsilon = 0.25
            dt = 1e-4
            n = 64
            t_end = 1
            reparam_every = 2
            kappa_blowup_threshold = 50.0
            solver_tol = 1e-9

            [initial]
            family = "arc_with_flat_ends"
            length = 1.5
            turning = 3.0
        "#;
        let ParsedConfig::Flow(doc) = parse_config(text).unwrap() else {
            panic!("not a flow document");
        };
        assert_eq!(doc.flow.n, 64);
        assert_eq!(doc.flow.dt, 1e-4);
        assert_eq!(doc.flow.t_end, 1.0);
        assert_eq!(doc.flow.reparam_every, 2);
        assert_eq!(doc.flow.kappa_blowup_threshold, 50.0);
        assert_eq!(doc.initial, InitialFamily::ArcWithFlatEnds { length: 1.5, turning: 3.0 });
    }

    #[test]
    fn out_of_range_epsilon() {
        assert_eq!(key_of("epsilon = 1.5"), "epsilon");
    }

    #[test]
    fn unknown_keys_are_rejected_with_their_path() {
        assert_eq!(key_of("epsilon = 0.1\nmystery = 2"), "mystery");
        assert_eq!(key_of("[sweep]\nepsilons = [0.2]\nwidth = 3"), "sweep.width");
        assert_eq!(key_of("[initial]\nfamily = \"flattened_sine\"\namplitude = 0.1\nphase = 1"), "initial");
        assert_eq!(key_of("[initial]\nfamily = \"helix\""), "initial");
    }

    #[test]
    fn type_errors_name_the_key() {
        assert_eq!(key_of("n = 1.5"), "n");
        assert_eq!(key_of("dt = \"small\""), "dt");
        assert_eq!(key_of("[sweep]\nepsilons = [0.2, \"x\"]"), "sweep.epsilons[1]");
        assert_eq!(key_of("epsilon = "), "<document>");
    }

    #[test]
    fn sweep_document() {
        let text = "dt = 1e-3\nt_end = 0.1\n[sweep]\nepsilons = [0.2, 0.1, 0.05]\nk_max = 2";
        let ParsedConfig::Sweep(doc) = parse_config(text).unwrap() else {
            panic!("not a sweep document");
        };
        assert_eq!(doc.sweep.epsilons, vec![0.2, 0.1, 0.05]);
        assert_eq!(doc.sweep.k_max, 2);
        assert!((doc.sweep.delta - 0.005).abs() < 1e-15);
        assert_eq!(key_of("[sweep]\nepsilons = [0.1, 0.2]"), "sweep.epsilons");
        assert_eq!(key_of("[sweep]\nk_max = 1"), "sweep.epsilons");
        assert_eq!(key_of("dt = 1e-3\n[sweep]\nepsilons = [0.1]\nsnapshot_times = [0.0005]"), "sweep.snapshot_times");
    }

    #[test]
    fn zero_window_needs_flattened_data() {
        let ok = "dt = 1e-3\nt_end = 0.1\n[sweep]\nepsilons = [0.1]\ndelta = 0";
        assert!(parse_config(ok).is_ok());
        let bump = "dt = 1e-3\nt_end = 0.1\n[initial]\nfamily = \"bump_perturbed_segment\"\namplitude = 0.1\n\
                    support_start = 0.2\nsupport_end = 0.8\n[sweep]\nepsilons = [0.1]\ndelta = 0";
        assert_eq!(key_of(bump), "sweep.delta");
    }
}
