use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use behavior_epi::analysis;
use behavior_epi::calendar::DateWindow;
use behavior_epi::calibration::{self, FitResult, ModelKind};
use behavior_epi::integrator::wave_metrics;
use behavior_epi::params::ModelParams;
use behavior_epi::scenarios::{self, Grid, StudyConfig};
use behavior_epi::sensitivity;
use chrono::NaiveDate;
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "behavior-epi", version, about = "Behavior-coupled epidemic model toolkit")]
struct Cli {
    /// Seed for every random stage (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    TwoGroup,
    BehaviorFree,
}

impl From<Model> for ModelKind {
    fn from(m: Model) -> Self {
        match m {
            Model::TwoGroup => ModelKind::TwoGroup,
            Model::BehaviorFree => ModelKind::BehaviorFree,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepKind {
    Contact,
    Influence,
    Split,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one scenario and write its trajectory.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum)]
        model: Option<Model>,
        /// Parameter JSON replacing the model's baseline.
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        days: Option<u32>,
        #[arg(long)]
        k: Option<f64>,
    },
    /// Fit a model to a hospitalization series.
    Fit {
        #[arg(long, value_enum)]
        model: Model,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Compare a saved fit against data over a window without refitting.
    Validate {
        /// fit_result.json written by `fit`.
        #[arg(long)]
        fit: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        start: Option<NaiveDate>,
        #[arg(long)]
        end: Option<NaiveDate>,
    },
    /// Latin hypercube sampling and partial rank correlation.
    Prcc {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        samples: Option<usize>,
        /// Sample θ above 1 instead of capping it.
        #[arg(long)]
        uncapped: bool,
    },
    /// Grid sweep over behavior parameters or the initial group split.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "contact")]
        grid: SweepKind,
    },
    /// Wave-1 mortality over phase-1 start day and lockdown efficacy.
    LockdownSweep {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Disease-free equilibrium map and the G1DFE verdict.
    Stability {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Parameter JSON for the verdict (two-group baseline when absent).
        #[arg(long)]
        params: Option<PathBuf>,
        /// Lockdown multiplier for the verdict.
        #[arg(long, default_value_t = 1.0)]
        theta: f64,
    },
    /// Run every configured stage and write a manifest.
    Report {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
    },
}

fn load_config(path: Option<&Path>, seed: Option<u64>) -> Result<StudyConfig> {
    let mut c = match path {
        Some(p) => StudyConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => StudyConfig::default(),
    };
    c.propagate_initial();
    Ok(match seed {
        Some(s) => c.with_seed(s),
        None => {
            c.apply_seed();
            c
        }
    })
}

fn load_params(path: &Path) -> Result<ModelParams> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(ModelParams::from_json(&text)?)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let p = dir.join(name);
    Ok(BufWriter::new(File::create(&p).with_context(|| format!("creating {}", p.display()))?))
}

fn write_text(dir: &Path, name: &str, text: &str) -> Result<()> {
    let mut f = create(dir, name)?;
    f.write_all(text.as_bytes())?;
    f.flush()?;
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let out = cli.out.as_path();
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;

    match cli.command {
        Command::Simulate { config, model, params, days, k } => {
            let c = load_config(config.as_deref(), cli.seed)?;
            let mut s = c.simulate.clone();
            if let Some(m) = model {
                s.model = m.into();
                s.params = None;
            }
            if let Some(p) = params {
                s.params = Some(load_params(&p)?);
            }
            s.days = days.unwrap_or(s.days);
            s.k = k.unwrap_or(s.k);
            let tr = s.run(&c.initial)?;
            tr.write_csv(create(out, "trajectory.csv")?, Some(c.calibration.two_group.calendar.epoch))?;
            let p = s.params.clone().unwrap_or_else(|| s.model.baseline());
            let end = tr.times.last().copied().unwrap_or(0.0);
            let w = wave_metrics(&tr, (0.0, end))?;
            let summary = serde_json::json!({
                "model": s.model,
                "days": s.days,
                "k": s.k,
                "peak_daily_hosp": w.peak_daily_hosp,
                "peak_day": w.peak_day,
                "cumulative_deaths": w.cum_mortality,
                "phase_reproduction_numbers": analysis::phase_reproduction_numbers(&p)?,
            });
            write_text(out, "summary.json", &serde_json::to_string_pretty(&summary)?)?;
            println!("peak Ih {:.0} on day {}, deaths {:.0}", w.peak_daily_hosp, w.peak_day, w.cum_mortality);
        }
        Command::Fit { model, data, config } => {
            let c = load_config(config.as_deref(), cli.seed)?;
            let fc = match model {
                Model::TwoGroup => c.calibration.two_group,
                Model::BehaviorFree => c.calibration.behavior_free,
            };
            let series = calibration::load_series(&data, &c.calibration.columns)?;
            let res = calibration::fit(&fc, &series)?;
            write_text(out, "fit_result.json", &res.to_json())?;
            let last = fc.calendar.day(fc.fit_window.end.max(fc.validation_window.end));
            let tr = calibration::simulate(res.model, &res.params, &res.initial, last)?;
            tr.write_csv(create(out, "trajectory.csv")?, Some(fc.calendar.epoch))?;
            calibration::write_prediction_csv(&res, Some(&series), create(out, "prediction.csv")?)?;
            match &res.validation {
                Some(v) => {
                    v.write_csv(create(out, "validation.csv")?)?;
                    println!("validation end error {:+.1}%", 100.0 * v.end_relative_error);
                }
                None => eprintln!("series does not cover {}..{}; validation.csv not written", fc.validation_window.start, fc.validation_window.end),
            }
            for e in &res.estimates {
                match (e.lower, e.upper) {
                    (Some(lo), Some(hi)) => println!("{:>8} = {:.6} [{lo:.6}, {hi:.6}]", e.name, e.value),
                    _ => println!("{:>8} = {:.6}", e.name, e.value),
                }
            }
            println!("sse {:.4e}", res.sse);
        }
        Command::Validate { fit, data, config, start, end } => {
            let c = load_config(config.as_deref(), cli.seed)?;
            let text = fs::read_to_string(&fit).with_context(|| format!("reading {}", fit.display()))?;
            let res = FitResult::from_json(&text)?;
            let series = calibration::load_series(&data, &c.calibration.columns)?;
            let w = DateWindow::new(start.unwrap_or(res.validation_window.start), end.unwrap_or(res.validation_window.end));
            let v = calibration::cross_validate(&res, &series, w)?;
            v.write_csv(create(out, "validation.csv")?)?;
            write_text(out, "validation.json", &serde_json::to_string_pretty(&v)?)?;
            println!(
                "{}: observed {:.1}, predicted {:.1}, error {:+.1}%, MAPE {:.1}%",
                v.end_date,
                v.observed_end,
                v.predicted_end,
                100.0 * v.end_relative_error,
                100.0 * v.mape
            );
        }
        Command::Prcc { config, samples, uncapped } => {
            let c = load_config(config.as_deref(), cli.seed)?;
            let mut pc = c.sensitivity.unwrap_or_default();
            if let Some(n) = samples {
                pc.samples = n;
            }
            if uncapped {
                pc.cap_theta = false;
            }
            let run = sensitivity::run_prcc(&pc)?;
            run.write_prcc_csv(create(out, "prcc.csv")?)?;
            run.write_samples_csv(create(out, "samples.csv")?)?;
            if run.excluded > 0 {
                eprintln!("{} samples excluded after integration failure", run.excluded);
            }
            for r in &run.results {
                let mut top = r.coefficients.clone();
                top.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()));
                let s: Vec<String> = top.iter().take(5).map(|(n, v)| format!("{n} {v:+.3}")).collect();
                println!("{} {}: {}", r.response.name(), r.snapshot, s.join(", "));
            }
        }
        Command::Sweep { config, grid } => {
            let c = load_config(config.as_deref(), cli.seed)?;
            let (spec, name) = match grid {
                SweepKind::Contact => (c.sweeps.contact, "contact"),
                SweepKind::Influence => (c.sweeps.influence, "influence"),
                SweepKind::Split => (c.sweeps.split, "split"),
            };
            let Some(spec) = spec else { bail!("config has no {name} sweep") };
            let res = scenarios::sweep(&spec)?;
            res.write_csv(create(out, &format!("sweep_{name}.csv"))?)?;
            let failed = res.cells.iter().filter(|c| c.error.is_some()).count();
            println!("{} cells, {failed} failed", res.cells.len());
        }
        Command::LockdownSweep { config } => {
            let c = load_config(config.as_deref(), cli.seed)?;
            let Some(spec) = c.sweeps.lockdown else { bail!("config has no lockdown sweep") };
            let cells = scenarios::lockdown_sweep(&spec)?;
            scenarios::write_lockdown_csv(&cells, create(out, "lockdown_sweep.csv")?)?;
            let failed = cells.iter().filter(|c| c.cum_mortality.is_none()).count();
            println!("{} cells, {failed} invalid", cells.len());
        }
        Command::Stability { config, params, theta } => {
            let c = load_config(config.as_deref(), cli.seed)?;
            let cells = analysis::stability_region(&grid_values(c.stability.gammas)?, &grid_values(c.stability.r_cs)?);
            analysis::write_region_csv(&cells, create(out, "stability.csv")?)?;
            let p = match params {
                Some(p) => load_params(&p)?,
                None => ModelParams::nyc_two_group(),
            };
            let v = analysis::g1dfe_stability(&p, theta)?;
            write_text(out, "verdict.json", &v.to_json())?;
            println!("G1DFE: {:?} (eigenvalue check agrees: {})", v.verdict, v.eigen_agrees());
        }
        Command::Report { config, data } => {
            let mut c = load_config(config.as_deref(), cli.seed)?;
            if data.is_some() {
                c.calibration.data = data;
            }
            let m = scenarios::run_report(&c, out)?;
            for s in &m.stages {
                println!("{:<22} {:?}{}", s.stage, s.status, s.detail.as_ref().map(|d| format!(" ({d})")).unwrap_or_default());
            }
            if !m.complete {
                eprintln!("bundle is partial; see manifest.json");
            }
        }
    }
    Ok(())
}

fn grid_values(g: Grid) -> Result<Vec<f64>> {
    g.validate()?;
    Ok(g.values())
}
