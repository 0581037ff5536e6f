//! Command-line front end. Every report is deterministic for a given
//! configuration and embeds that configuration.

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::exotic::{
    build_system, defect_exotic, indecomposability_evidence, t_entries, truncated_defect_gp,
    truncated_dims, verify_exotic, ExoticCertificate, ExoticSpec, DEFAULT_TAIL_EPS,
    DEFAULT_TRUNCATION,
};
use crate::linalg::TolerancePolicy;
use crate::systems::system_report;
use crate::weights::{
    sequence_property_report, BreakpointSchedule, SequenceCheckOptions, WeightFamily,
};

pub const SCHEMA_VERSION: u32 = 1;
/// Above this ambient dimension `build` skips the dense numeric summary.
pub const BUILD_DENSE_LIMIT: usize = 256;
/// The sequence report sums logs term by term up to the last breakpoint.
pub const MAX_SEQUENCE_SWEEP: u64 = 2_000_000_000;

#[derive(Debug, Parser)]
#[command(
    name = "exotic-systems",
    version,
    about = "Exotic systems of four subspaces"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub options: Options,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Breakpoint schedule, weight sequences and their property report
    Weights,
    /// Summary of the truncated system
    Build,
    /// Exact defect ledger
    Defect,
    /// Intersection diagram
    Diagram,
    /// Endomorphisms of a small truncation and indecomposability evidence
    Endo,
    /// Full certificate bundle
    Verify,
    /// Defects for N = 1..n_blocks
    Sweep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
    Dot,
}

#[derive(Debug, Clone, Args)]
pub struct Options {
    #[arg(long, global = true, default_value_t = 1)]
    pub n_blocks: usize,
    #[arg(long, global = true, default_value_t = DEFAULT_TRUNCATION)]
    pub truncation: usize,
    #[arg(long, global = true, default_value_t = TolerancePolicy::default().rank_tol)]
    pub tol_rank: f64,
    #[arg(long, global = true, default_value_t = TolerancePolicy::default().angle_tol)]
    pub tol_angle: f64,
    #[arg(long, global = true, default_value_t = TolerancePolicy::default().residual_tol)]
    pub tol_residual: f64,
    #[arg(long, global = true, default_value_t = DEFAULT_TAIL_EPS)]
    pub tail_eps: f64,
    /// Number of breakpoints for `weights`
    #[arg(long, global = true, default_value_t = 7)]
    pub j_max: usize,
    /// Number of sequences for `weights`
    #[arg(long, global = true, default_value_t = 6)]
    pub i_max: usize,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub subcommand: Command,
    pub n_blocks: usize,
    pub truncation: usize,
    pub j_max: usize,
    pub i_max: usize,
    pub policy: TolerancePolicy,
    pub tail_eps: f64,
    pub seed: u64,
    pub format: Format,
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_cli(cli: &Cli) -> Self {
        let o = &cli.options;
        Self {
            subcommand: cli.command,
            n_blocks: o.n_blocks,
            truncation: o.truncation,
            j_max: o.j_max,
            i_max: o.i_max,
            policy: TolerancePolicy {
                rank_tol: o.tol_rank,
                angle_tol: o.tol_angle,
                residual_tol: o.tol_residual,
            },
            tail_eps: o.tail_eps,
            seed: o.seed,
            format: o.format,
            out: o.out.clone(),
        }
    }

    /// Defaults for `subcommand`, as if no flags were given.
    pub fn defaults(subcommand: Command) -> Self {
        let cli =
            Cli::try_parse_from(["exotic-systems", name(subcommand)]).expect("default flags parse");
        Self::from_cli(&cli)
    }

    fn spec(&self) -> Result<ExoticSpec> {
        let policy = TolerancePolicy::new(
            self.policy.rank_tol,
            self.policy.angle_tol,
            self.policy.residual_tol,
        )?;
        ExoticSpec::new(self.n_blocks, self.truncation, policy, self.tail_eps)
    }
}

fn name(c: Command) -> &'static str {
    match c {
        Command::Weights => "weights",
        Command::Build => "build",
        Command::Defect => "defect",
        Command::Diagram => "diagram",
        Command::Endo => "endo",
        Command::Verify => "verify",
        Command::Sweep => "sweep",
    }
}

/// Result of one run: exit code, report text and the failing clause if any.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub code: i32,
    pub output: String,
    pub failure: Option<String>,
}

impl Outcome {
    fn usage(msg: String) -> Self {
        Self {
            code: 2,
            output: String::new(),
            failure: Some(msg),
        }
    }
}

struct Body {
    result: Value,
    failure: Option<String>,
    csv: Option<String>,
    dot: Option<String>,
}

impl Body {
    fn json(result: Value) -> Self {
        Self {
            result,
            failure: None,
            csv: None,
            dot: None,
        }
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("reports serialize")
}

fn envelope(config: &RunConfig, status_failure: Option<&str>, result: Value) -> String {
    let doc = json!({
        "schema": SCHEMA_VERSION,
        "config": to_value(config),
        "status": if status_failure.is_some() { "fail" } else { "pass" },
        "failing_clause": status_failure,
        "result": result,
    });
    let mut s = serde_json::to_string_pretty(&doc).expect("reports serialize");
    s.push('\n');
    s
}

fn header_comment(config: &RunConfig) -> String {
    format!(
        "# schema {SCHEMA_VERSION} config {}\n",
        serde_json::to_string(config).expect("config serializes")
    )
}

pub fn run(config: &RunConfig) -> Outcome {
    let body = match config.subcommand {
        Command::Weights => weights(config),
        Command::Build => build(config),
        Command::Defect => defect(config),
        Command::Diagram => diagram(config),
        Command::Endo => endo(config),
        Command::Verify => verify(config),
        Command::Sweep => sweep(config),
    };
    let body = match body {
        Ok(b) => b,
        Err(
            e @ (Error::InvalidSpec(_) | Error::InvalidPolicy(_) | Error::ShiftIndexOutOfRange(_)),
        ) => {
            return Outcome::usage(e.to_string());
        }
        Err(e) => {
            let clause = e.to_string();
            let output = envelope(
                config,
                Some(&clause),
                json!({ "error": to_value(&ErrorRecord::from(&e)) }),
            );
            return Outcome {
                code: 1,
                output,
                failure: Some(clause),
            };
        }
    };
    let output = match config.format {
        Format::Json => envelope(config, body.failure.as_deref(), body.result),
        Format::Csv => match body.csv {
            Some(csv) => header_comment(config) + &csv,
            None => {
                return Outcome::usage(format!(
                    "{} does not support --format csv",
                    name(config.subcommand)
                ))
            }
        },
        Format::Dot => match body.dot {
            Some(dot) => dot,
            None => {
                return Outcome::usage(format!(
                    "{} does not support --format dot",
                    name(config.subcommand)
                ))
            }
        },
    };
    Outcome {
        code: if body.failure.is_some() { 1 } else { 0 },
        output,
        failure: body.failure,
    }
}

#[derive(Serialize)]
struct ErrorRecord {
    message: String,
    residual: Option<f64>,
    tolerance: Option<f64>,
}

impl From<&Error> for ErrorRecord {
    fn from(e: &Error) -> Self {
        let (residual, tolerance) = match e {
            Error::CertificateRefused {
                residual,
                tolerance,
                ..
            } => (Some(*residual), Some(*tolerance)),
            _ => (None, None),
        };
        Self {
            message: e.to_string(),
            residual: residual.filter(|r| r.is_finite()),
            tolerance,
        }
    }
}

fn weights(config: &RunConfig) -> Result<Body> {
    if config.j_max == 0 || config.i_max == 0 {
        return Err(Error::InvalidSpec(
            "--j-max and --i-max must be positive".into(),
        ));
    }
    let family = WeightFamily::new(BreakpointSchedule::build(config.j_max)?);
    let last = family.schedule().covered();
    if last > MAX_SEQUENCE_SWEEP {
        return Err(Error::InvalidSpec(format!(
            "--j-max {} needs a sweep to n = {last}, above the limit {MAX_SEQUENCE_SWEEP}",
            config.j_max
        )));
    }
    let options = SequenceCheckOptions {
        bounds_k_max: SequenceCheckOptions::default()
            .bounds_k_max
            .min(family.schedule().covered()),
        ..Default::default()
    };
    let report = sequence_property_report(&family, config.i_max, config.j_max, &options)?;
    let mut csv = Vec::new();
    family.write_csv(&mut csv, config.i_max, config.truncation as u64)?;
    Ok(Body {
        failure: report.first_failure().map(|c| c.clause.clone()),
        result: to_value(&report),
        csv: Some(String::from_utf8(csv).expect("csv is utf-8")),
        dot: None,
    })
}

fn build(config: &RunConfig) -> Result<Body> {
    let spec = config.spec()?;
    let mut result = json!({
        "spec": to_value(&spec.record()),
        "k_dim": spec.k_dim(),
        "ambient_dim": 2 * spec.k_dim(),
        "dims": truncated_dims(&spec),
        "defect_gp": truncated_defect_gp(&spec),
        "t_nonzeros": t_entries(&spec).len(),
    });
    if 2 * spec.k_dim() <= BUILD_DENSE_LIMIT {
        let sys = build_system(&spec)?;
        result["numeric"] = to_value(&system_report(&sys, spec.policy())?);
    } else {
        result["numeric"] = Value::Null;
    }
    Ok(Body::json(result))
}

fn defect(config: &RunConfig) -> Result<Body> {
    let spec = config.spec()?;
    let ledger = defect_exotic(&spec)?;
    let mut csv = String::from("i,j,dim_intersection,dim_sum_complement\n");
    for e in &ledger.entries {
        writeln!(
            csv,
            "{},{},{},{}",
            e.i, e.j, e.dim_intersection, e.dim_sum_complement
        )
        .unwrap();
    }
    writeln!(csv, "# defect {}", ledger.defect).unwrap();
    Ok(Body {
        result: to_value(&ledger),
        failure: None,
        csv: Some(csv),
        dot: None,
    })
}

fn diagram(config: &RunConfig) -> Result<Body> {
    let spec = config.spec()?;
    let ledger = defect_exotic(&spec)?;
    let d = crate::systems::IntersectionDiagram::from_edges(
        ledger
            .entries
            .iter()
            .filter(|e| e.dim_intersection == 0)
            .map(|e| (e.i, e.j)),
    );
    let witness = crate::systems::operator_system_necessary_condition(&d);
    Ok(Body {
        result: json!({
            "diagram": to_value(&d),
            "connected": d.is_connected(),
            "isolated_vertices": d.isolated_vertices(),
            "path_witness": witness,
            "exotic": witness.is_none(),
        }),
        failure: None,
        csv: None,
        dot: Some(d.to_dot()),
    })
}

fn endo(config: &RunConfig) -> Result<Body> {
    let spec = config.spec()?;
    let ev = indecomposability_evidence(&spec, config.seed)?;
    let failure = ev
        .cascade
        .iter()
        .find(|c| c.asserted && !c.passed)
        .map(|c| c.name.to_string())
        .or_else(|| (!ev.a12.passed).then(|| "A_12 divergence".to_string()))
        .or_else(|| (!ev.idempotent_lemma.passed).then(|| "idempotent lemma".to_string()));
    Ok(Body {
        result: to_value(&ev),
        failure,
        csv: None,
        dot: None,
    })
}

fn witness_csv(cert: &ExoticCertificate) -> String {
    let mut csv = String::from("pair,parameter,form,index,value\n");
    for w in &cert.witnesses {
        let form = serde_json::to_string(&w.form).unwrap();
        for (k, v) in w.x.iter().enumerate() {
            writeln!(
                csv,
                "{}-{},{},{},{},{:.17e}",
                w.pair.0,
                w.pair.1,
                w.parameter,
                form.trim_matches('"'),
                k,
                v
            )
            .unwrap();
        }
    }
    csv
}

fn verify(config: &RunConfig) -> Result<Body> {
    let spec = config.spec()?;
    let cert = verify_exotic(&spec)?;
    let evidence = indecomposability_evidence(&spec, config.seed)?;
    let failure = (!cert.exotic).then(|| "diagram criterion".to_string());
    Ok(Body {
        csv: Some(witness_csv(&cert)),
        dot: Some(cert.diagram.to_dot()),
        result: json!({
            "exotic": cert.exotic,
            "defect": cert.ledger.defect,
            "certificate": to_value(&cert),
            "evidence": to_value(&evidence),
        }),
        failure,
    })
}

#[derive(Debug, Serialize)]
struct SweepRow {
    n_blocks: usize,
    defect: String,
    truncated_defect_gp: i64,
    exotic: Option<bool>,
    refusal: Option<String>,
}

fn sweep(config: &RunConfig) -> Result<Body> {
    let base = config.spec()?;
    let rows: Vec<SweepRow> = (1..=config.n_blocks)
        .into_par_iter()
        .map(|n| -> Result<SweepRow> {
            let spec = ExoticSpec::new(
                n,
                base.truncation().max(n + 2),
                *base.policy(),
                base.tail_eps(),
            )?;
            let ledger = defect_exotic(&spec)?;
            let (exotic, refusal) = match verify_exotic(&spec) {
                Ok(c) => (Some(c.exotic), None),
                Err(e @ Error::CertificateRefused { .. }) => (None, Some(e.to_string())),
                Err(e) => return Err(e),
            };
            Ok(SweepRow {
                n_blocks: n,
                defect: ledger.defect,
                truncated_defect_gp: ledger.truncated_defect_gp,
                exotic,
                refusal,
            })
        })
        .collect::<Result<_>>()?;
    let failure = rows.iter().find_map(|r| {
        r.refusal
            .clone()
            .or_else(|| (r.exotic == Some(false)).then(|| "diagram criterion".into()))
    });
    let mut csv = String::from("n_blocks,defect,truncated_defect_gp,exotic\n");
    for r in &rows {
        let ex = r.exotic.map_or("refused".to_string(), |e| e.to_string());
        writeln!(
            csv,
            "{},{},{},{}",
            r.n_blocks, r.defect, r.truncated_defect_gp, ex
        )
        .unwrap();
    }
    Ok(Body {
        result: json!({ "rows": to_value(&rows) }),
        failure,
        csv: Some(csv),
        dot: None,
    })
}

/// Parses `args`, runs, and writes the report. Returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let config = RunConfig::from_cli(&cli);
    let outcome = run(&config);
    if let Some(f) = &outcome.failure {
        eprintln!(
            "{}: {f}",
            if outcome.code == 2 { "usage" } else { "failed" }
        );
    }
    if !outcome.output.is_empty() {
        let written = match &config.out {
            Some(path) => std::fs::write(path, &outcome.output),
            None => {
                use std::io::Write;
                std::io::stdout().write_all(outcome.output.as_bytes())
            }
        };
        if let Err(e) = written {
            eprintln!("failed to write report: {e}");
            return 1;
        }
    }
    outcome.code
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(args: &[&str]) -> RunConfig {
        let mut full = vec!["exotic-systems"];
        full.extend_from_slice(args);
        RunConfig::from_cli(&Cli::try_parse_from(full).unwrap())
    }

    #[test]
    fn defaults() {
        let c = RunConfig::defaults(Command::Verify);
        assert_eq!(c.truncation, 256);
        assert_eq!(c.seed, 0);
        assert_eq!(c.policy, TolerancePolicy::default());
    }

    #[test]
    fn flags_after_subcommand() {
        let c = cfg(&["defect", "--n-blocks", "4", "--format", "csv"]);
        assert_eq!(c.n_blocks, 4);
        assert_eq!(c.format, Format::Csv);
    }

    #[test]
    fn defect_report() {
        let o = run(&cfg(&["defect", "--n-blocks", "4", "--truncation", "32"]));
        assert_eq!(o.code, 0);
        let v: Value = serde_json::from_str(&o.output).unwrap();
        assert_eq!(v["schema"], 1);
        assert_eq!(v["result"]["defect"], "3");
        assert_eq!(v["config"]["policy"]["rank_tol"], 1e-10);
    }

    #[test]
    fn bad_spec_is_usage_error() {
        assert_eq!(run(&cfg(&["defect", "--n-blocks", "0"])).code, 2);
        assert_eq!(run(&cfg(&["build", "--format", "dot"])).code, 2);
        assert_eq!(run(&cfg(&["defect", "--tol-rank=-1"])).code, 2);
    }

    #[test]
    fn refusal_exits_one() {
        let o = run(&cfg(&["verify", "--n-blocks", "2", "--truncation", "10"]));
        assert_eq!(o.code, 1);
        assert!(o.failure.unwrap().contains("tail"));
        let v: Value = serde_json::from_str(&o.output).unwrap();
        assert_eq!(v["status"], "fail");
    }
}
