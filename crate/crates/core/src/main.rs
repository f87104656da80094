use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use ipwm::bootstrap::bootstrap;
use ipwm::data_model::{ingest_csv, ColumnSchema, Dataset};
use ipwm::estimators::{estimate, EstimatorConfig, Method, DEFAULT_S};
use ipwm::glm::DesignSpec;
use ipwm::reinfarction;
use ipwm::rng::mix_seed;
use ipwm::simulation::{calibrate_gamma, run_study, ScenarioConfig, TARGET_LOG_OR};
use ipwm::{Error, Result};

#[derive(Parser)]
#[command(name = "ipwm", version, about = "Weighted odds-ratio estimation under joint exposure and outcome misclassification")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the built-in reinfarction example end to end.
    Example {
        /// Shrinkage sample-size constant.
        #[arg(long, default_value_t = DEFAULT_S)]
        s: f64,
        /// Emit a JSON object instead of labeled text.
        #[arg(long)]
        json: bool,
    },
    /// Estimate odds ratios from a CSV study file.
    Estimate {
        /// Input CSV with columns z,b,r_y,r_a,y,a,l1..lk.
        #[arg(long)]
        input: PathBuf,
        /// Optional file of model formulas, one `name = formula` per line.
        #[arg(long)]
        formulas_file: Option<PathBuf>,
        /// Comma-separated methods to run.
        #[arg(long, value_delimiter = ',', default_values_t = [Method::Crude, Method::Ps, Method::Cca, Method::Gp, Method::Ipwm])]
        methods: Vec<Method>,
        #[arg(long, default_value_t = DEFAULT_S)]
        s: f64,
        /// Number of bootstrap replicates (0 disables the bootstrap).
        #[arg(long, default_value_t = 0)]
        boot: usize,
        #[arg(long, default_value_t = 0.95)]
        level: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Output path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a Monte Carlo scenario and emit the metrics table as CSV.
    Simulate {
        /// Built-in scenario id (1-36).
        #[arg(long, conflicts_with = "input")]
        scenario: Option<u32>,
        /// Scenario config as a JSON file.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_values_t = [Method::Crude, Method::Ps, Method::Cca, Method::Gp, Method::Ipwm])]
        methods: Vec<Method>,
        /// Methods to bootstrap for SSE/CP; defaults to all requested methods.
        #[arg(long, value_delimiter = ',')]
        boot_methods: Option<Vec<Method>>,
        #[arg(long)]
        nsim: Option<usize>,
        #[arg(long)]
        boot: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the example's exact expected count tables as CSV.
    ExpectedCounts {
        /// Which table: "misclassified" (full joint) or "validation" (m-vector).
        #[arg(long, default_value = "validation")]
        table: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Verify a scenario's effect size against the target marginal log-OR.
    CalibrateGamma {
        #[arg(long)]
        scenario: u32,
        #[arg(long, default_value_t = TARGET_LOG_OR)]
        target: f64,
        #[arg(long, default_value_t = 0.005)]
        tol: f64,
        #[arg(long, default_value_t = 1_000_000)]
        n_mc: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        json: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Example { s, json } => cmd_example(s, json),
        Cmd::Estimate { input, formulas_file, methods, s, boot, level, seed, out } => {
            cmd_estimate(&input, formulas_file.as_deref(), &methods, s, boot, level, seed, out.as_deref())
        }
        Cmd::Simulate { scenario, input, methods, boot_methods, nsim, boot, seed, out } => {
            cmd_simulate(scenario, input.as_deref(), &methods, boot_methods, nsim, boot, seed, out.as_deref())
        }
        Cmd::ExpectedCounts { table, out } => cmd_expected_counts(&table, out.as_deref()),
        Cmd::CalibrateGamma { scenario, target, tol, n_mc, seed, json } => {
            cmd_calibrate_gamma(scenario, target, tol, n_mc, seed, json)
        }
    }
}

fn write_output(out: Option<&Path>, content: &str) -> Result<()> {
    match out {
        Some(path) => {
            fs::write(path, content)?;
            Ok(())
        }
        None => {
            std::io::stdout().write_all(content.as_bytes())?;
            Ok(())
        }
    }
}

fn cmd_example(s: f64, as_json: bool) -> Result<()> {
    let a = reinfarction::anchor_estimates_with_s(s)?;
    let entries = [
        ("crude_true", "crude OR, true (Y, A)", a.crude_true.odds_ratio()),
        ("ipw_true", "IPW OR, true (Y, A)", a.ipw_true.odds_ratio()),
        ("crude_observed", "crude OR, misclassified (Z, B)", a.crude_observed.odds_ratio()),
        ("ps_observed", "PS OR, misclassified (Z, B)", a.ps_observed.odds_ratio()),
        ("gp_observed", "outcome-only corrected OR", a.gp_observed.odds_ratio()),
        ("ipwm_estimated", "IPWM OR, validation-estimated weights", a.ipwm_estimated.odds_ratio()),
    ];
    let text = if as_json {
        let map: BTreeMap<&str, f64> = entries.iter().map(|(k, _, v)| (*k, *v)).collect();
        format!("{}\n", serde_json::to_string_pretty(&map)?)
    } else {
        let mut t = String::new();
        for (_, label, v) in entries {
            t.push_str(&format!("{label:<40} {v:.6}\n"));
        }
        t
    };
    write_output(None, &text)
}

/// Parses a formulas file with lines like `y = y ~ a + z*b + l1`.  Recognized
/// names: y, a, z, b (joint-correction models), gp_y, gp_b, gp_z
/// (outcome-only models), ps_b, ps_a (propensity models).
fn apply_formulas_file(cfg: &mut EstimatorConfig, path: &Path) -> Result<()> {
    let content = fs::read_to_string(path)?;
    for (lineno, line) in content.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (name, formula) = line.split_once('=').ok_or_else(|| {
            Error::Formula(format!("line {}: expected 'name = formula'", lineno + 1))
        })?;
        let spec = DesignSpec::parse(formula.trim())?;
        match name.trim() {
            "y" => cfg.nuisance.y = spec,
            "a" => cfg.nuisance.a = spec,
            "z" => cfg.nuisance.z = spec,
            "b" => cfg.nuisance.b = spec,
            "gp_y" => cfg.gp.y = spec,
            "gp_b" => cfg.gp.b = spec,
            "gp_z" => cfg.gp.z = spec,
            "ps_b" => cfg.propensity_b = spec,
            "ps_a" => cfg.propensity_a = spec,
            other => {
                return Err(Error::Formula(format!(
                    "line {}: unknown model name '{other}'",
                    lineno + 1
                )))
            }
        }
    }
    Ok(())
}

fn count_l_columns(path: &Path) -> Result<usize> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?;
    let mut k = 0;
    while headers.iter().any(|h| h == format!("l{}", k + 1)) {
        k += 1;
    }
    if k == 0 {
        return Err(Error::Schema { row: 0, message: "no covariate columns l1..lk found".into() });
    }
    Ok(k)
}

#[allow(clippy::too_many_arguments)]
fn cmd_estimate(
    input: &Path,
    formulas_file: Option<&Path>,
    methods: &[Method],
    s: f64,
    boot: usize,
    level: f64,
    seed: u64,
    out: Option<&Path>,
) -> Result<()> {
    let k = count_l_columns(input)?;
    let records = ingest_csv(input, &ColumnSchema::standard(k))?;
    let ds = Dataset::from_records(&records);
    let mut cfg = EstimatorConfig::main_effects(k);
    cfg.s = s;
    if let Some(path) = formulas_file {
        apply_formulas_file(&mut cfg, path)?;
    }
    let mut results = Vec::new();
    for (mi, &method) in methods.iter().enumerate() {
        let r = estimate(method, &ds, &cfg)?;
        let mut obj = json!({
            "method": method.to_string(),
            "or": r.odds_ratio(),
            "log_or": r.log_or,
            "p1": r.p1,
            "p0": r.p0,
            "s": r.s,
        });
        if boot > 0 {
            let stat = |d: &Dataset| estimate(method, d, &cfg).map(|r| r.log_or);
            let summary = bootstrap(&ds, &stat, boot, level, mix_seed(seed, &[mi as u64]))?;
            obj["bootstrap"] = json!({
                "level": summary.level,
                "log_or_lower": summary.lower,
                "log_or_upper": summary.upper,
                "or_lower": summary.lower.exp(),
                "or_upper": summary.upper.exp(),
                "se": summary.se,
                "replicates": summary.replicates,
                "failed": summary.failed,
            });
        }
        results.push(obj);
    }
    write_output(out, &format!("{}\n", serde_json::to_string_pretty(&json!(results))?))
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    scenario: Option<u32>,
    input: Option<&Path>,
    methods: &[Method],
    boot_methods: Option<Vec<Method>>,
    nsim: Option<usize>,
    boot: Option<usize>,
    seed: Option<u64>,
    out: Option<&Path>,
) -> Result<()> {
    let mut cfg: ScenarioConfig = match (scenario, input) {
        (Some(id), None) => ScenarioConfig::scenario(id)?,
        (None, Some(path)) => serde_json::from_str(&fs::read_to_string(path)?)?,
        _ => {
            return Err(Error::InvalidInput(
                "provide exactly one of --scenario or --input".into(),
            ))
        }
    };
    if let Some(v) = nsim {
        cfg.nsim = v;
    }
    if let Some(v) = boot {
        cfg.boot_b = v;
    }
    if let Some(v) = seed {
        cfg.seed = v;
    }
    let boot_methods = boot_methods.unwrap_or_else(|| methods.to_vec());
    let rows = run_study(&cfg, methods, &boot_methods)?;
    let mut csv = String::from("scenario,method,bias,bse,mse,se,sse,cp,nsim\n");
    for r in rows {
        csv.push_str(&format!(
            "{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{}\n",
            r.scenario, r.method, r.bias, r.bse, r.mse, r.se, r.sse, r.cp, r.nsim
        ));
    }
    write_output(out, &csv)
}

fn cmd_expected_counts(table: &str, out: Option<&Path>) -> Result<()> {
    let csv = match table {
        "misclassified" => {
            let t = reinfarction::table3_expected();
            let mut s = String::from("z,b,y,a,l,count\n");
            for l in 0..2u8 {
                for z in 0..2u8 {
                    for b in 0..2u8 {
                        for y in 0..2u8 {
                            for a in 0..2u8 {
                                s.push_str(&format!(
                                    "{z},{b},{y},{a},{l},{:.6}\n",
                                    t.zbyal(z, b, y, a, l)
                                ));
                            }
                        }
                    }
                }
            }
            s
        }
        "validation" => {
            let m = reinfarction::table5_expected().m_vector();
            let mut s = String::from("j,count\n");
            for (j, v) in m.iter().enumerate() {
                s.push_str(&format!("{},{:.6}\n", j + 1, v));
            }
            s
        }
        other => {
            return Err(Error::InvalidInput(format!(
                "unknown table '{other}' (expected 'misclassified' or 'validation')"
            )))
        }
    };
    write_output(out, &csv)
}

fn cmd_calibrate_gamma(
    scenario: u32,
    target: f64,
    tol: f64,
    n_mc: usize,
    seed: u64,
    as_json: bool,
) -> Result<()> {
    let cfg = ScenarioConfig::scenario(scenario)?;
    let mut rng = ipwm::rng::stream(seed, &[0x63_616c, scenario as u64]);
    let gamma = calibrate_gamma(&cfg, target, tol, n_mc, &mut rng)?;
    let text = if as_json {
        format!(
            "{}\n",
            serde_json::to_string_pretty(&json!({
                "scenario": scenario,
                "target": target,
                "gamma": gamma,
                "table_gamma": cfg.gamma,
            }))?
        )
    } else {
        format!(
            "scenario {scenario}: calibrated gamma = {gamma:.4} (table value {:.3})\n",
            cfg.gamma
        )
    };
    write_output(None, &text)
}
