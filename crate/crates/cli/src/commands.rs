use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use cfcal_core::bayes::BayesError;
use cfcal_core::data::{
    generate_synthetic, ingest_trajectories, parse_trajectories, random_leader_profiles, sample_driver_params,
    write_trajectories,
};
use cfcal_core::de::write_tuning_csv;
use cfcal_core::hmc::HmcError;
use cfcal_core::report::{
    bayes_report, de_report, literature_report, params_report, read_posterior_means, table1_rows,
    write_histogram_csv, write_posterior_csv, write_table1_csv,
};
use cfcal_core::{
    bayes_opt_tune, calibrate_bayes, grid_search, run_de, CalibrationReport, Dataset, DriverParams, IdmParams,
    Method, ModelSpec, N_PARAMS,
};
use serde::Serialize;
use serde_json::json;

use crate::config::{RunConfig, TuneMethod};
use crate::error::{config, data, CliError};
use crate::{Command, Common};

const HISTOGRAM_BINS: usize = 30;

/// Resolved settings shared by all commands.
struct Ctx {
    cfg: RunConfig,
    seed: u64,
    out: PathBuf,
    started: Instant,
}

impl Ctx {
    fn new(common: &Common) -> Result<Self, CliError> {
        let cfg = RunConfig::load(common.config.as_deref())?;
        let seed = common
            .seed
            .or(cfg.seed)
            .ok_or_else(|| CliError::Config("a seed is required (--seed or `seed` in the config)".into()))?;
        let out = common
            .out
            .clone()
            .or_else(|| cfg.out.clone())
            .ok_or_else(|| CliError::Config("an output directory is required (--out)".into()))?;
        fs::create_dir_all(&out).map_err(|e| CliError::Config(format!("cannot create {}: {e}", out.display())))?;
        Ok(Self {
            cfg,
            seed,
            out,
            started: Instant::now(),
        })
    }

    fn data_path(&self, flag: &Option<PathBuf>) -> Result<PathBuf, CliError> {
        flag.clone()
            .or_else(|| self.cfg.data.clone())
            .ok_or_else(|| CliError::Config("a dataset is required (--data)".into()))
    }

    fn load_data(&self, flag: &Option<PathBuf>) -> Result<Dataset, CliError> {
        let path = self.data_path(flag)?;
        let file = File::open(&path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        parse_trajectories(BufReader::new(file)).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
    }

    fn create(&self, name: &str) -> Result<BufWriter<File>, CliError> {
        let path = self.out.join(name);
        File::create(&path)
            .map(BufWriter::new)
            .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<(), CliError> {
        let mut w = self.create(name)?;
        serde_json::to_writer_pretty(&mut w, value).map_err(data)?;
        writeln!(w).and_then(|_| w.flush()).map_err(data)
    }

    /// Wall time and timestamp live apart from the deterministic outputs.
    fn write_provenance(&self, command: &str) -> Result<(), CliError> {
        let unix = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        self.write_json(
            "provenance.json",
            &json!({
                "command": command,
                "seed": self.seed,
                "version": env!("CARGO_PKG_VERSION"),
                "finished_unix_s": unix,
                "wall_time_s": self.started.elapsed().as_secs_f64(),
            }),
        )
    }
}

pub fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Ingest { common, data } => ingest(Ctx::new(&common)?, &data),
        Command::Synth {
            common,
            drivers,
            instances,
            steps,
            noise,
            dt,
        } => {
            let mut ctx = Ctx::new(&common)?;
            let s = &mut ctx.cfg.synth;
            s.n_drivers = drivers.unwrap_or(s.n_drivers);
            s.n_instances = instances.unwrap_or(s.n_instances);
            s.n_steps = steps.unwrap_or(s.n_steps);
            s.noise_std = noise.unwrap_or(s.noise_std);
            s.dt = dt.unwrap_or(s.dt);
            synth(ctx)
        }
        Command::CalibrateBayes {
            common,
            data,
            formulation,
            prior_sigma,
            step_size,
            n_leapfrog,
            base_run_steps,
            max_total_steps,
            tol,
            kl_direction,
        } => {
            let mut ctx = Ctx::new(&common)?;
            let b = &mut ctx.cfg.bayes;
            b.formulation = formulation.unwrap_or(b.formulation);
            b.prior_sigma = prior_sigma.unwrap_or(b.prior_sigma);
            b.hmc.step_size = step_size.unwrap_or(b.hmc.step_size);
            b.hmc.n_leapfrog = n_leapfrog.unwrap_or(b.hmc.n_leapfrog);
            b.hmc.base_run_steps = base_run_steps.unwrap_or(b.hmc.base_run_steps);
            b.hmc.max_total_steps = max_total_steps.unwrap_or(b.hmc.max_total_steps);
            b.hmc.convergence_tol = tol.unwrap_or(b.hmc.convergence_tol);
            b.hmc.seed = ctx.seed;
            if let Some(d) = kl_direction {
                ctx.cfg.metrics.kl_direction = d;
            }
            calibrate_bayes_cmd(ctx, &data)
        }
        Command::CalibrateDe {
            common,
            data,
            f,
            cr,
            lambda,
            population,
            generations,
            kl_direction,
        } => {
            let mut ctx = Ctx::new(&common)?;
            let d = &mut ctx.cfg.de;
            d.differential_weight = f.unwrap_or(d.differential_weight);
            d.crossover_prob = cr.unwrap_or(d.crossover_prob);
            d.lambda = lambda.unwrap_or(d.lambda);
            d.population_size = population.unwrap_or(d.population_size);
            d.n_generations = generations.unwrap_or(d.n_generations);
            d.seed = ctx.seed;
            if let Some(k) = kl_direction {
                ctx.cfg.metrics.kl_direction = k;
            }
            calibrate_de_cmd(ctx, &data)
        }
        Command::Tune {
            common,
            data,
            method,
            budget,
            population,
            generations,
        } => {
            let mut ctx = Ctx::new(&common)?;
            let method = method
                .or(ctx.cfg.tune.method)
                .ok_or_else(|| CliError::Config("a tuning method is required (--method grid|bo)".into()))?;
            ctx.cfg.tune.budget = budget.unwrap_or(ctx.cfg.tune.budget);
            let d = &mut ctx.cfg.de;
            d.population_size = population.unwrap_or(d.population_size);
            d.n_generations = generations.unwrap_or(d.n_generations);
            d.seed = ctx.seed;
            tune(ctx, &data, method)
        }
        Command::Evaluate {
            common,
            data,
            params,
            posterior,
            report,
            kl_direction,
        } => {
            let mut ctx = Ctx::new(&common)?;
            if let Some(k) = kl_direction {
                ctx.cfg.metrics.kl_direction = k;
            }
            evaluate(ctx, &data, params, posterior, report)
        }
        Command::Report {
            common,
            inputs,
            data,
            kl_direction,
        } => {
            let mut ctx = Ctx::new(&common)?;
            if let Some(k) = kl_direction {
                ctx.cfg.metrics.kl_direction = k;
            }
            report(ctx, &inputs, &data)
        }
    }
}

fn ingest(ctx: Ctx, flag: &Option<PathBuf>) -> Result<(), CliError> {
    let path = ctx.data_path(flag)?;
    let file = File::open(&path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let ingested =
        ingest_trajectories(BufReader::new(file)).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let rejections: Vec<_> = ingested
        .rejections
        .iter()
        .map(|r| {
            json!({
                "driver_id": r.driver_id,
                "instance_id": r.instance_id,
                "reason": r.reason.to_string(),
                "detail": r.reason,
            })
        })
        .collect();
    let kept = ingested.dataset.n_instances();
    ctx.write_json(
        "ingest_summary.json",
        &json!({
            "instances_kept": kept,
            "instances_rejected": rejections.len(),
            "drivers": ingested.dataset.n_drivers(),
            "rejections": rejections,
        }),
    )?;
    write_trajectories(&ingested.dataset, ctx.create("trajectories.csv")?).map_err(data)?;
    ctx.write_provenance("ingest")?;
    println!("kept {kept} instances, rejected {}", ingested.rejections.len());
    for r in &ingested.rejections {
        println!("  rejected {}/{}: {}", r.driver_id, r.instance_id, r.reason);
    }
    if kept == 0 {
        return Err(CliError::Data("no instance survived validation".into()));
    }
    Ok(())
}

fn synth(ctx: Ctx) -> Result<(), CliError> {
    let s = &ctx.cfg.synth;
    if s.n_drivers == 0 || s.n_instances == 0 || s.n_steps < 2 {
        return Err(CliError::Config("synth needs at least 1 driver, 1 instance and 2 steps".into()));
    }
    let truth_in = sample_driver_params(s.n_drivers, &IdmParams::LITERATURE, s.spread, ctx.seed);
    let leaders = random_leader_profiles(s.n_drivers * s.n_instances, s.n_steps, s.dt, s.v_max, ctx.seed);
    let synth = generate_synthetic(&truth_in, &leaders, s.noise_std, s.n_instances, s.dt, ctx.seed).map_err(config)?;
    write_trajectories(&synth.dataset, ctx.create("trajectories.csv")?).map_err(data)?;
    ctx.write_json("truth.json", &synth.truth)?;
    ctx.write_provenance("synth")?;
    println!(
        "wrote {} instances for {} drivers to {}",
        synth.dataset.n_instances(),
        synth.dataset.n_drivers(),
        ctx.out.display()
    );
    Ok(())
}

fn calibrate_bayes_cmd(ctx: Ctx, flag: &Option<PathBuf>) -> Result<(), CliError> {
    let b = &ctx.cfg.bayes;
    let spec = ModelSpec::new(b.formulation, b.prior_sigma, 1).map_err(config)?;
    if b.hmc.mass.is_none() {
        b.hmc.validate(spec.dim()).map_err(config)?;
    }
    let bins = ctx.cfg.metrics.histogram_bins.unwrap_or(HISTOGRAM_BINS);
    if bins == 0 {
        return Err(CliError::Config("histogram_bins must be positive".into()));
    }
    let dataset = ctx.load_data(flag)?;
    let cal = calibrate_bayes(&dataset, b).map_err(|e| match e {
        BayesError::Hmc(HmcError::InvalidConfig(_) | HmcError::DimensionMismatch { .. }) => config(e),
        _ => data(e),
    })?;
    let rep = bayes_report(&cal, &dataset, ctx.cfg.metrics.kl_direction).map_err(data)?;
    ctx.write_json("report.json", &rep)?;
    write_posterior_csv(&cal.drivers, &cal.posterior, ctx.create("posterior.csv")?).map_err(data)?;
    write_histogram_csv(&cal.drivers, &cal.posterior, bins, ctx.create("histogram.csv")?).map_err(data)?;
    ctx.write_provenance("calibrate-bayes")?;
    println!(
        "{} sigma={} schedule={:?} converged={} rmse={} avg_kl={}",
        rep.method, b.prior_sigma, cal.outcome.schedule_log, cal.outcome.converged, rep.rmse, rep.avg_kl
    );
    if !cal.outcome.converged {
        return Err(CliError::NotConverged);
    }
    Ok(())
}

fn calibrate_de_cmd(ctx: Ctx, flag: &Option<PathBuf>) -> Result<(), CliError> {
    let de = &ctx.cfg.de;
    de.validate_idm().map_err(config)?;
    let dataset = ctx.load_data(flag)?;
    let cal = run_de(de, &dataset).map_err(data)?;
    let rep = de_report(&cal, de, &dataset, ctx.cfg.metrics.kl_direction).map_err(data)?;
    ctx.write_json("report.json", &rep)?;
    ctx.write_provenance("calibrate-de")?;
    println!("DE best fitness={} rmse={} avg_kl={}", cal.run.best.fitness, rep.rmse, rep.avg_kl);
    Ok(())
}

fn tune(ctx: Ctx, flag: &Option<PathBuf>, method: TuneMethod) -> Result<(), CliError> {
    let t = &ctx.cfg.tune;
    ctx.cfg.de.validate_idm().map_err(config)?;
    let dataset = ctx.load_data(flag)?;
    let result = match method {
        TuneMethod::Grid => grid_search(&dataset, &t.grid, &ctx.cfg.de).map_err(config)?,
        TuneMethod::Bo => bayes_opt_tune(&dataset, &t.bo_bounds, t.budget, &ctx.cfg.de, ctx.seed).map_err(config)?,
    };
    write_tuning_csv(&result.rows, ctx.create("tuning.csv")?).map_err(data)?;
    let name = match method {
        TuneMethod::Grid => "grid",
        TuneMethod::Bo => "bo",
    };
    ctx.write_json(
        "incumbent.json",
        &json!({ "method": name, "evaluations": result.rows.len(), "best": result.best }),
    )?;
    ctx.write_provenance("tune")?;
    println!(
        "{name}: {} evaluations, best CR={} F={} lambda={} rmse={}",
        result.rows.len(),
        result.best.cr,
        result.best.f,
        result.best.lambda,
        result.best.best_rmse
    );
    Ok(())
}

fn parse_params(text: &str) -> Result<IdmParams, CliError> {
    let values: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Data(format!("bad parameter list {text:?}: {e}")))?;
    if values.len() != N_PARAMS {
        return Err(CliError::Data(format!("expected {N_PARAMS} parameters, got {}", values.len())));
    }
    let p = IdmParams::from_slice(&values);
    p.validate().map_err(data)?;
    Ok(p)
}

fn read_file(path: &Path) -> Result<File, CliError> {
    File::open(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn evaluate(
    ctx: Ctx,
    flag: &Option<PathBuf>,
    params: Option<String>,
    posterior: Option<PathBuf>,
    report: Option<PathBuf>,
) -> Result<(), CliError> {
    let (method, driver_params) = match (params, posterior, report) {
        (Some(text), None, None) => {
            let p = parse_params(&text)?;
            let method = if p == IdmParams::LITERATURE { Method::Literature } else { Method::Custom };
            (method, DriverParams::Shared(p))
        }
        (None, Some(path), None) => {
            let means = read_posterior_means(BufReader::new(read_file(&path)?))
                .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
            (Method::Custom, DriverParams::PerDriver(means))
        }
        (None, None, Some(path)) => {
            let text = fs::read_to_string(&path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
            let rep = CalibrationReport::from_json(&text)
                .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
            (rep.method, rep.point_params())
        }
        _ => {
            return Err(CliError::Config(
                "exactly one of --params, --posterior or --report is required".into(),
            ))
        }
    };
    let dataset = ctx.load_data(flag)?;
    let rep = params_report(method, &driver_params, &dataset, ctx.cfg.metrics.kl_direction).map_err(data)?;
    ctx.write_json("evaluation.json", &rep)?;
    ctx.write_provenance("evaluate")?;
    println!("{} rmse={} avg_kl={}", rep.method, rep.rmse, rep.avg_kl);
    Ok(())
}

fn report(ctx: Ctx, inputs: &[PathBuf], flag: &Option<PathBuf>) -> Result<(), CliError> {
    let mut reports = inputs
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?;
            CalibrationReport::from_json(&text).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if flag.is_some() || ctx.cfg.data.is_some() {
        let dataset = ctx.load_data(flag)?;
        reports.push(literature_report(&dataset, ctx.cfg.metrics.kl_direction).map_err(data)?);
    }
    let rows = table1_rows(&reports);
    write_table1_csv(&rows, ctx.create("table1.csv")?).map_err(data)?;
    ctx.write_json("table1.json", &rows)?;
    ctx.write_provenance("report")?;
    for r in &rows {
        let sigma = r.prior_sigma.map(|s| s.to_string()).unwrap_or_else(|| "-".into());
        println!("{:<20} {:>6} {:>14.6} {:>14.6}", r.method.as_str(), sigma, r.rmse, r.avg_kl);
    }
    Ok(())
}
