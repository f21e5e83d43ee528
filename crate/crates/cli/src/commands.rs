use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use log::info;
use serde::Serialize;

use selfsim_core::compare::{compare, kappa_statistics};
use selfsim_core::curve::curves_to_csv;
use selfsim_core::estimators::{kappa_error_bars, Bootstrap, Statistic};
use selfsim_core::theory::{calibrate, CalibrationTargets, PowerLawInit};
use selfsim_core::{
    build_ensemble, collapse, detrend, ensemble_report, estimate_d, load_prices, simulate_ensemble, CorrelatorCurve,
    Ensemble, ProcessModel,
};

use crate::config::{self, AnalyzeConfig, CalibrateConfig, CompareConfig, Grids, IngestConfig, SimulateConfig};
use crate::Failure::{self, Runtime, Usage};

pub struct Common {
    pub config: PathBuf,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub quiet: bool,
}

impl Common {
    fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", msg.as_ref());
        }
    }

    fn prepare_out(&self) -> Result<(), Failure> {
        fs::create_dir_all(&self.out)
            .with_context(|| format!("creating output directory {}", self.out.display()))
            .map_err(Runtime)
    }

    fn write(&self, name: &str, contents: impl AsRef<[u8]>) -> Result<PathBuf, Failure> {
        let path = self.out.join(name);
        fs::write(&path, contents)
            .with_context(|| format!("writing {}", path.display()))
            .map_err(Runtime)?;
        Ok(path)
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf, Failure> {
        let text = serde_json::to_string_pretty(value).map_err(|e| Runtime(e.into()))? + "\n";
        self.write(name, text)
    }

    fn seed(&self, from_config: Option<u64>) -> Result<u64, Failure> {
        self.seed
            .or(from_config)
            .ok_or_else(|| Usage(anyhow!("a seed is required: pass --seed or set \"seed\" in the config")))
    }
}

fn read_ensemble(path: &Path) -> Result<Ensemble, Failure> {
    if !path.exists() {
        return Err(Usage(anyhow!("ensemble file {} not found", path.display())));
    }
    Ensemble::read(path)
        .with_context(|| format!("reading ensemble {}", path.display()))
        .map_err(Runtime)
}

pub fn simulate(c: &Common) -> Result<(), Failure> {
    let loaded = config::load::<SimulateConfig>(&c.config).map_err(Usage)?;
    let model = config::load_model(&loaded, &loaded.cfg.model).map_err(Usage)?;
    let seed = c.seed(loaded.cfg.seed)?;
    if loaded.cfg.histories == 0 {
        return Err(Usage(anyhow!("histories must be >= 1")));
    }
    c.prepare_out()?;
    let e = simulate_ensemble(&model, loaded.cfg.histories, seed).map_err(|e| Runtime(e.into()))?;
    let path = c.out.join("ensemble.csv");
    e.write(&path)
        .with_context(|| format!("writing {}", path.display()))
        .map_err(Runtime)?;
    c.say(format!(
        "simulated {} histories x {} returns (seed {seed}) -> {}",
        e.histories(),
        e.horizon(),
        path.display()
    ));
    Ok(())
}

pub fn ingest(c: &Common) -> Result<(), Failure> {
    let loaded = config::load::<IngestConfig>(&c.config).map_err(Usage)?;
    loaded.cfg.session.validate().map_err(|e| Usage(e.into()))?;
    let input = loaded.resolve(&loaded.cfg.input);
    if !input.exists() {
        return Err(Usage(anyhow!("input file {} not found", input.display())));
    }
    c.prepare_out()?;
    let records = load_prices(&input, &loaded.cfg.session)
        .with_context(|| format!("loading {}", input.display()))
        .map_err(Runtime)?;
    let e =
        build_ensemble(&records, &loaded.cfg.session, &input.display().to_string()).map_err(|e| Runtime(e.into()))?;
    let path = c.out.join("ensemble.csv");
    e.write(&path).map_err(|e| Runtime(e.into()))?;
    c.write_json("ingest_report.json", &ensemble_report(&e))?;
    c.say(format!(
        "ingested {} sessions x {} bars -> {}",
        e.histories(),
        e.horizon(),
        path.display()
    ));
    Ok(())
}

fn named<T>(label: &str, r: selfsim_core::Result<T>) -> Result<T, Failure> {
    r.map_err(|e| Runtime(anyhow!("statistic {label}: {e}")))
}

fn statistics(grids: &Grids, horizon: usize) -> Vec<Statistic> {
    let mut stats = kappa_statistics(&grids.alphas, &grids.betas);
    stats.push(Statistic::VolAutocorr);
    stats.push(Statistic::Linear);
    let pairs = grids.k_pairs(horizon);
    stats.extend(grids.k_exponents.iter().map(|&(alpha, beta)| Statistic::K {
        alpha,
        beta,
        pairs: pairs.clone(),
    }));
    stats
}

pub fn analyze(c: &Common) -> Result<(), Failure> {
    let loaded = config::load::<AnalyzeConfig>(&c.config).map_err(Usage)?;
    let cfg = &loaded.cfg;
    let grids = cfg.grids();
    grids.validate().map_err(Usage)?;
    if cfg.bins < 10 {
        return Err(Usage(anyhow!("bins must be >= 10, got {}", cfg.bins)));
    }
    let mut e = read_ensemble(&loaded.resolve(&cfg.ensemble))?;
    if cfg.detrend {
        e = detrend(&e);
    }
    c.prepare_out()?;
    let n = e.horizon();

    let m2 = named("increment_m2", Statistic::IncrementM2.empirical(&e))?;
    c.write("increment_m2.csv", curves_to_csv(&[m2]))?;

    let moments: Vec<CorrelatorCurve> = cfg
        .d_alphas
        .iter()
        .map(|&alpha| named(&format!("moment({alpha})"), Statistic::Moment { alpha }.empirical(&e)))
        .collect::<Result<_, _>>()?;
    c.write("moments.csv", curves_to_csv(&moments))?;

    let d_est = named("D regression", estimate_d(&e, &cfg.d_alphas))?;
    c.write_json("d_estimate.json", &d_est)?;

    let linear = named("linear", Statistic::Linear.empirical(&e))?;
    c.write("linear.csv", curves_to_csv(&[linear]))?;

    let mut kappas = Vec::new();
    for stat in kappa_statistics(&grids.alphas, &grids.betas) {
        let label = stat.label();
        let curve = named(&label, stat.empirical(&e))?;
        let err = if curve.points.len() >= 2 {
            named(&label, kappa_error_bars(&curve))?
        } else {
            0.0
        };
        kappas.push(named(&label, curve.with_uniform_err(err))?);
    }
    c.write("kappa.csv", curves_to_csv(&kappas))?;

    let vol = named("vol_autocorr", Statistic::VolAutocorr.empirical(&e))?;
    c.write("vol_autocorr.csv", curves_to_csv(&[vol]))?;

    let pairs = grids.k_pairs(n);
    let ks: Vec<CorrelatorCurve> = grids
        .k_exponents
        .iter()
        .map(|&(alpha, beta)| {
            let stat = Statistic::K {
                alpha,
                beta,
                pairs: pairs.clone(),
            };
            named(&stat.label(), stat.empirical(&e))
        })
        .collect::<Result<_, _>>()?;
    c.write("K.csv", curves_to_csv(&ks))?;

    let d_collapse = cfg.d_exponent.unwrap_or(d_est.d);
    let plot = named("collapse", collapse(&e, d_collapse, &cfg.collapse_spec(n), cfg.bins))?;
    c.write("collapse.csv", plot.to_csv())?;

    c.say(format!(
        "analyzed {} histories x {n}: D = {:.4} +/- {:.4}; outputs in {}",
        e.histories(),
        d_est.d,
        d_est.stderr,
        c.out.display()
    ));
    Ok(())
}

pub fn compare_cmd(c: &Common) -> Result<(), Failure> {
    let loaded = config::load::<CompareConfig>(&c.config).map_err(Usage)?;
    let cfg = &loaded.cfg;
    let grids = cfg.grids();
    grids.validate().map_err(Usage)?;
    if cfg.reps < 2 {
        return Err(Usage(anyhow!("reps must be >= 2, got {}", cfg.reps)));
    }
    let model = config::load_model(&loaded, &cfg.model).map_err(Usage)?;
    let seed = c.seed(cfg.seed)?;
    let mut e = read_ensemble(&loaded.resolve(&cfg.ensemble))?;
    if model.horizon() != e.horizon() {
        return Err(Usage(anyhow!(
            "model horizon {} differs from ensemble horizon {}",
            model.horizon(),
            e.horizon()
        )));
    }
    if cfg.detrend {
        e = detrend(&e);
    }
    c.prepare_out()?;
    let stats = statistics(&grids, e.horizon());
    let boot = Bootstrap {
        histories: e.histories(),
        reps: cfg.reps,
        seed,
        detrend: cfg.detrend,
    };
    info!("bootstrap: {} replicates of {} histories", boot.reps, boot.histories);
    let report = compare(&model, &e, &stats, boot).map_err(|e| Runtime(anyhow!("comparison failed: {e}")))?;
    c.write_json("comparison.json", &report)?;
    c.write("comparison.csv", report.to_csv())?;
    c.say(format!(
        "{} of {} points with |z| > 3; report in {}",
        report.outliers,
        report.total,
        c.out.display()
    ));
    Ok(())
}

fn read_samples(path: &Path) -> anyhow::Result<Vec<f64>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(k, l)| {
            l.trim()
                .parse::<f64>()
                .with_context(|| format!("{}:{}: not a number", path.display(), k + 1))
        })
        .collect()
}

pub fn calibrate_cmd(c: &Common) -> Result<(), Failure> {
    let loaded = config::load::<CalibrateConfig>(&c.config).map_err(Usage)?;
    let cfg = &loaded.cfg;
    let shape_samples = match &cfg.shape_samples {
        Some(p) => Some(read_samples(&loaded.resolve(p)).map_err(Usage)?),
        None => None,
    };
    let targets = CalibrationTargets {
        variance: cfg.variance,
        tail_index: cfg.tail_index.value(),
        shape_samples,
    };
    let init = PowerLawInit {
        gamma: cfg.gamma,
        sigma_min: cfg.sigma_min,
    };
    let mixture = calibrate(&targets, init).map_err(|e| match e {
        selfsim_core::Error::InvalidParameter(_) => Usage(e.into()),
        other => Runtime(other.into()),
    })?;
    let model = ProcessModel::new(cfg.d_exponent, mixture, cfg.horizon_n).map_err(|e| Usage(e.into()))?;
    c.prepare_out()?;
    let path = c.write_json("model.json", &model)?;
    c.say(format!("calibrated model -> {}", path.display()));
    Ok(())
}
