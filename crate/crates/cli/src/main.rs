use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use autosmote_cli::config::{Ablate, ExperimentConfig, Method, Seeds, DEFAULT_K};
use autosmote_cli::report;
use autosmote_cli::runner::{run_method, run_with_space, search_space, Hyper, RunRecord, Workbench};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

#[derive(Parser)]
#[command(name = "autosmote", version, about = "Oversampling experiments with learnable SMOTE")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Train and evaluate each method on each dataset.
    Run(Flags),
    /// Run every method and emit the average-rank table.
    Bench(Flags),
    /// Per-epoch training error and test F1 for the learnable oversamplers.
    Curves(Flags),
    /// Compare a variant against its runs without each decision criterion.
    Ablation(Flags),
    /// Wall-clock training time per method.
    Timeit(Flags),
}

#[derive(Args, Clone)]
struct Flags {
    /// JSON file with the same fields as the flags; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    data: Vec<PathBuf>,
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    label_col: Vec<String>,
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    method: Vec<Method>,
    /// `N` for 0..N, `a..b`, or a comma list.
    #[arg(long)]
    seeds: Option<Seeds>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    groups: Option<usize>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    ratio: Option<f64>,
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    ablate: Vec<Ablate>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Flags {
    fn resolve(self, default_methods: &[Method]) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        if !self.data.is_empty() {
            cfg.data = self.data;
        }
        if !self.label_col.is_empty() {
            cfg.label_col = self.label_col;
        }
        if !self.method.is_empty() {
            cfg.method = self.method;
        }
        if !self.ablate.is_empty() {
            cfg.ablate = self.ablate;
        }
        macro_rules! take {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { cfg.$f = v; } )* };
        }
        take!(seeds, epochs, batch_size, learning_rate, tau, ratio);
        cfg.k = self.k.or(cfg.k);
        cfg.groups = self.groups.or(cfg.groups);
        cfg.out = self.out.or(cfg.out);
        if cfg.method.is_empty() {
            cfg.method = default_methods.to_vec();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn out_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.out.clone().unwrap_or_else(|| PathBuf::from("results"))
}

fn workbenches(cfg: &ExperimentConfig) -> Result<Vec<Workbench>> {
    cfg.datasets()?
        .iter()
        .map(|(path, label)| Workbench::load(path, label, cfg))
        .collect()
}

fn run_all(cfg: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    let out = out_dir(cfg);
    let mut records = Vec::new();
    for bench in workbenches(cfg)? {
        for &method in &cfg.method {
            log::info!("{} {}", bench.name, method);
            let record = run_method(&bench, method, cfg.ablation(), cfg)?;
            report::write_record(&out, &record)?;
            records.push(record);
        }
    }
    report::write_text(&out.join("summary.csv"), &report::summary_csv(&records))?;
    Ok(records)
}

fn ablation(cfg: &ExperimentConfig) -> Result<serde_json::Value> {
    let out = out_dir(cfg);
    let mut tables = Vec::new();
    let mut all = Vec::new();
    for bench in workbenches(cfg)? {
        for &method in cfg.method.iter().filter(|m| m.is_autosmote()) {
            let baseline = run_method(&bench, method, cfg.ablation(), cfg)?;
            let selected = baseline.selected.unwrap_or_default();
            let mut variants = Vec::new();
            for dc in Ablate::ALL {
                let mut removed = cfg.ablate.clone();
                if removed.contains(&dc) {
                    continue;
                }
                removed.push(dc);
                let sub = ExperimentConfig {
                    ablate: removed,
                    ..cfg.clone()
                };
                let hyper = match dc {
                    Ablate::Dc2 => Hyper {
                        k: Some(cfg.k.unwrap_or(DEFAULT_K)),
                        ..selected
                    },
                    _ => selected,
                };
                let record = run_with_space(&bench, method, sub.ablation(), &sub, vec![hyper])?;
                report::write_record(&out, &record)?;
                variants.push((format!("without-{}", serde_json::to_value(dc)?.as_str().unwrap_or("")), record));
            }
            report::write_record(&out, &baseline)?;
            let rows = report::ablation_rows(&baseline, &variants);
            tables.push(report::ablation_csv(&bench.name, method.name(), &rows));
            all.push(json!({"dataset": bench.name, "method": method, "rows": rows}));
            let mut records = vec![baseline];
            records.extend(variants.into_iter().map(|(_, r)| r));
            report::write_text(
                &out.join(&bench.name).join(format!("{method}-summary.csv")),
                &report::summary_csv(&records),
            )?;
        }
    }
    let mut csv = String::new();
    for (i, t) in tables.iter().enumerate() {
        csv.push_str(if i == 0 { t } else { t.split_once('\n').map_or("", |(_, rest)| rest) });
    }
    report::write_text(&out.join("ablation.csv"), &csv)?;
    report::write_json(&out.join("ablation.json"), &all)?;
    Ok(json!({"ablation": all}))
}

fn timeit(cfg: &ExperimentConfig) -> Result<serde_json::Value> {
    let out = out_dir(cfg);
    let mut records = Vec::new();
    for bench in workbenches(cfg)? {
        for &method in &cfg.method {
            // one fixed configuration per method, so timings exclude the search
            let mut hyper = search_space(method, cfg)[0];
            if method.uses_neighbors() {
                hyper.k = Some(cfg.k.unwrap_or(DEFAULT_K));
            }
            let record = run_with_space(&bench, method, cfg.ablation(), cfg, vec![hyper])?;
            records.push(record);
        }
    }
    let csv = report::timing_csv(&records, cfg.epochs);
    report::write_text(&out.join("timing.csv"), &csv)?;
    Ok(json!({"timing": out.join("timing.csv")}))
}

fn summarize(records: &[RunRecord]) -> serde_json::Value {
    let cells: Vec<_> = records
        .iter()
        .map(|r| {
            json!({
                "dataset": r.dataset,
                "method": r.method,
                "selected": r.selected,
                "f1": r.summary.as_ref().map(|s| s.f1),
                "missing": r.missing,
            })
        })
        .collect();
    json!({ "runs": cells })
}

fn execute(verb: Verb) -> Result<serde_json::Value> {
    const LEARNABLE: [Method; 3] = [Method::AutosmoteSelf, Method::AutosmoteCohort, Method::MlpOversampler];
    match verb {
        Verb::Run(f) => {
            let cfg = f.resolve(&[Method::AutosmoteSelf])?;
            Ok(summarize(&run_all(&cfg)?))
        }
        Verb::Bench(f) => {
            let cfg = f.resolve(&Method::ALL)?;
            let records = run_all(&cfg)?;
            let table = report::ranking(&records)?;
            let out = out_dir(&cfg);
            report::write_text(&out.join("ranking.csv"), &report::ranking_csv(&table))?;
            report::write_json(&out.join("ranking.json"), &table)?;
            let mut value = summarize(&records);
            value["ranking"] = serde_json::to_value(&table)?;
            Ok(value)
        }
        Verb::Curves(f) => {
            let cfg = f.resolve(&LEARNABLE)?;
            let records = run_all(&cfg)?;
            let out = out_dir(&cfg);
            report::write_text(&out.join("curves.csv"), &report::curves_csv(&records))?;
            Ok(summarize(&records))
        }
        Verb::Ablation(f) => ablation(&f.resolve(&[Method::AutosmoteSelf])?),
        Verb::Timeit(f) => timeit(&f.resolve(&Method::ALL)?),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.verb).context("experiment failed") {
        Ok(value) => {
            println!("{value}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            let chain: Vec<String> = e.chain().map(|c| c.to_string()).collect();
            println!("{}", json!({"error": {"message": format!("{e:#}"), "causes": chain}}));
            ExitCode::FAILURE
        }
    }
}
