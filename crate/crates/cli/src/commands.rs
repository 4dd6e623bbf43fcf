use std::fs;
use std::path::{Path, PathBuf};

use islet_core::model::WorldState;
use islet_core::quatex::instances;
use islet_core::smc::{summarize_runs, Estimation, InstanceEstimate};
use islet_core::{compare_series, derive_seed, estimate as smc_estimate, IslandSimulator, ModelParams, QuerySpec};

use crate::config::{self, Loaded};
use crate::error::{CliError, Result};
use crate::exec::{thread_count, Pool};
use crate::output::{
    comparison_table, estimation_table, num, read_decisions, read_estimation, read_samples, samples_table,
    write_file, ComparisonEntry, EstimateEntry, Manifest, SweepRecord, Table, TraceEntry, SWEEP_HEADER, TRACE_HEADER,
};
use crate::plot::{render, MarkerRow, Series};
use crate::{Common, PlotArgs};

struct Context {
    loaded: Loaded,
    out: PathBuf,
}

impl Context {
    fn new(config: &Path, seed: Option<u64>, out: Option<&Path>) -> Result<Self> {
        let mut loaded = config::load(config)?;
        if let Some(s) = seed {
            loaded.config.smc.master_seed = s;
        }
        let out = out.map_or_else(|| loaded.output_dir.clone(), Path::to_path_buf);
        fs::create_dir_all(&out).map_err(|e| CliError::io(&out, e))?;
        Ok(Context { loaded, out })
    }

    fn fresh_manifest(&self) -> Manifest {
        let c = &self.loaded.config;
        Manifest::new(c.to_toml(), self.loaded.config_hash(&c.model), c.smc.master_seed, self.loaded.defaults_applied.clone())
    }

    fn manifest(&self) -> Result<Manifest> {
        Manifest::open(&self.out, self.fresh_manifest())
    }

    fn save(&self, manifest: &mut Manifest, name: &str, bytes: &[u8]) -> Result<()> {
        write_file(&self.out.join(name), bytes)?;
        manifest.files.insert(name.to_owned());
        Ok(())
    }
}

fn pool(threads: Option<usize>) -> Result<Pool> {
    let env = std::env::var("ISLET_THREADS").ok();
    Pool::new(thread_count(threads, env.as_deref())?)
}

pub fn simulate(args: &Common) -> Result<()> {
    let ctx = Context::new(&args.config, args.seed, args.out.as_deref())?;
    let model = &ctx.loaded.config.model;
    let seed = derive_seed(ctx.loaded.config.smc.master_seed, 0);
    let mut world = WorldState::reset(model, seed).map_err(|e| CliError::config(format!("model.{e}")))?;
    let mut table = Table::new(&TRACE_HEADER);
    while world.step_count() < model.horizon {
        world.step().map_err(|e| CliError::runtime(e.to_string()))?;
        let gdp = *world.gdp_series().last().expect("stepped");
        table.row([
            world.step_count().to_string(),
            num(gdp),
            num(gdp.ln()),
            world.n_miners().to_string(),
            world.n_imitators().to_string(),
            world.n_explorers().to_string(),
            world.islands().len().to_string(),
        ]);
    }
    let mut manifest = ctx.manifest()?;
    let name = "trace.csv";
    ctx.save(&mut manifest, name, &table.into_bytes())?;
    manifest.simulate = Some(TraceEntry { seed, file: name.to_owned(), steps: world.step_count() });
    manifest.save(&ctx.out)?;
    println!("wrote {} ({} steps, seed {seed})", ctx.out.join(name).display(), world.step_count());
    Ok(())
}

/// Runs one estimation and writes its tables; failures land in the entry.
fn estimate_one(
    ctx: &Context,
    manifest: &mut Manifest,
    pool: &Pool,
    model: &ModelParams,
    query: &QuerySpec,
    estimation_file: String,
    param_value: Option<String>,
) -> Result<(EstimateEntry, Option<Estimation>)> {
    let config_hash = ctx.loaded.config_hash(model);
    let mut entry = EstimateEntry {
        param_value,
        config_hash: config_hash.clone(),
        estimation_file: None,
        samples_file: None,
        runs: 0,
        blocks: 0,
        all_converged: false,
        not_converged: Vec::new(),
        error: None,
    };
    let sim = IslandSimulator::new(model.clone()).map_err(|e| CliError::config(format!("model.{e}")))?;
    let factory = || sim.clone();
    let est = match smc_estimate(&factory, query, &ctx.loaded.config.smc, pool) {
        Ok(est) => est,
        Err(e) => {
            entry.error = Some(e.to_string());
            return Ok((entry, None));
        }
    };
    let samples_file = format!("samples_{config_hash}.csv");
    ctx.save(manifest, &estimation_file, &estimation_table(&est).into_bytes())?;
    ctx.save(manifest, &samples_file, &samples_table(&est).into_bytes())?;
    let delta = est.settings.ci_width_threshold;
    for w in est.warnings() {
        eprintln!(
            "warning: {}instance {} not converged after {} runs (CI width {} > {delta})",
            entry.param_value.as_ref().map_or(String::new(), |v| format!("[{v}] ")),
            w.label,
            w.n,
            2.0 * w.ci_halfwidth
        );
    }
    entry.estimation_file = Some(estimation_file);
    entry.samples_file = Some(samples_file);
    entry.runs = est.runs();
    entry.blocks = est.blocks;
    entry.all_converged = est.all_converged();
    entry.not_converged = est.warnings().map(|w| w.label.clone()).collect();
    Ok((entry, Some(est)))
}

pub fn estimate(args: &Common) -> Result<()> {
    let ctx = Context::new(&args.config, args.seed, args.out.as_deref())?;
    let query = ctx.loaded.require_query()?.clone();
    let pool = pool(args.threads)?;
    let mut manifest = ctx.manifest()?;
    let model = ctx.loaded.config.model.clone();
    let (entry, _) = estimate_one(&ctx, &mut manifest, &pool, &model, &query, "estimation.csv".into(), None)?;
    let error = entry.error.clone();
    report(&ctx.out, &entry);
    manifest.estimate = Some(entry);
    manifest.save(&ctx.out)?;
    match error {
        Some(e) => Err(CliError::runtime(e)),
        None => Ok(()),
    }
}

fn report(out: &Path, e: &EstimateEntry) {
    let tag = e.param_value.as_ref().map_or(String::new(), |v| format!("[{v}] "));
    match (&e.error, &e.estimation_file) {
        (Some(err), _) => eprintln!("error: {tag}{err}"),
        (None, Some(f)) => println!(
            "{tag}wrote {} ({} runs in {} blocks, {} not converged)",
            out.join(f).display(),
            e.runs,
            e.blocks,
            e.not_converged.len()
        ),
        (None, None) => {}
    }
}

pub fn sweep(args: &Common) -> Result<()> {
    let ctx = Context::new(&args.config, args.seed, args.out.as_deref())?;
    let query = ctx.loaded.require_query()?.clone();
    let sweep = ctx.loaded.config.sweep.clone().ok_or_else(|| CliError::config("missing [sweep] section"))?;
    let pool = pool(args.threads)?;
    let mut manifest = ctx.manifest()?;
    let param = sweep.param_name;

    let mut entries = Vec::new();
    let mut long = Table::new(&SWEEP_HEADER);
    for &v in &sweep.values {
        let model = ctx.loaded.config.model_at(param, v);
        let file = format!("estimation_{}_{}.csv", param.as_str(), num(v));
        let (entry, est) = estimate_one(&ctx, &mut manifest, &pool, &model, &query, file, Some(num(v)))?;
        if let Some(est) = est {
            for i in &est.instances {
                long.row([num(v), i.label.clone(), num(i.mean), num(i.ci_halfwidth), i.n.to_string()]);
            }
        }
        report(&ctx.out, &entry);
        entries.push(entry);
    }
    let long_file = "sweep.csv".to_owned();
    ctx.save(&mut manifest, &long_file, &long.into_bytes())?;
    let failed: Vec<String> = entries.iter().filter(|e| e.error.is_some()).filter_map(|e| e.param_value.clone()).collect();
    manifest.sweep = Some(SweepRecord { param_name: param.as_str().to_owned(), long_file, values: entries });
    manifest.save(&ctx.out)?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::runtime(format!("{} failed for {} = {}", "sweep", param.as_str(), failed.join(", "))))
    }
}

/// Regroups a samples file into `samples[run][instance]`, checking it
/// matches the query's instance grid.
fn load_samples(path: &Path, query: &QuerySpec) -> Result<Vec<Vec<f64>>> {
    let labels: Vec<String> = instances(query).into_iter().map(|i| i.label).collect();
    let triples = read_samples(path)?;
    if labels.is_empty() || triples.len() % labels.len() != 0 {
        return Err(CliError::runtime(format!("{}: sample count does not match the query's instances", path.display())));
    }
    let mut out = Vec::with_capacity(triples.len() / labels.len());
    for (k, chunk) in triples.chunks(labels.len()).enumerate() {
        let mut row = Vec::with_capacity(labels.len());
        for ((run, label, value), want) in chunk.iter().zip(&labels) {
            if *run != k as u64 || label != want {
                return Err(CliError::runtime(format!(
                    "{}: expected run {k}, instance {want}; found run {run}, instance {label}",
                    path.display()
                )));
            }
            row.push(*value);
        }
        out.push(row);
    }
    Ok(out)
}

pub fn compare(args: &Common) -> Result<()> {
    let ctx = Context::new(&args.config, args.seed, args.out.as_deref())?;
    let query = ctx.loaded.require_query()?.clone();
    let cfg = &ctx.loaded.config;
    let sweep = cfg.sweep.clone().ok_or_else(|| CliError::config("missing [sweep] section"))?;
    let pairs = cfg.compare.clone().ok_or_else(|| CliError::config("missing [compare] section"))?.pairs;
    let param = sweep.param_name;
    let stored = Manifest::load(&ctx.out)?;
    let mut manifest = ctx.manifest()?;
    let record = stored.as_ref().and_then(|m| m.sweep.clone()).filter(|s| s.param_name == param.as_str());

    let resolve = |v: f64| -> std::result::Result<Vec<InstanceEstimate>, String> {
        let key = num(v);
        let record = record.as_ref().ok_or_else(|| format!("no sweep output over {} in {}", param.as_str(), ctx.out.display()))?;
        let entry = record
            .values
            .iter()
            .find(|e| e.param_value.as_deref() == Some(&key))
            .ok_or_else(|| format!("no sweep output for {} = {key}", param.as_str()))?;
        if let Some(err) = &entry.error {
            return Err(format!("sweep value {key} failed: {err}"));
        }
        if entry.config_hash != ctx.loaded.config_hash(&cfg.model_at(param, v)) {
            return Err(format!("sweep output for {key} is stale (configuration changed); rerun `islet sweep`"));
        }
        let file = entry.samples_file.as_ref().ok_or_else(|| format!("no samples recorded for {key}"))?;
        let samples = load_samples(&ctx.out.join(file), &query).map_err(|e| e.message)?;
        summarize_runs(&query, &samples, &cfg.smc).map_err(|e| e.to_string())
    };

    let mut first_error = None;
    let mut comparisons = Vec::new();
    for [a, b] in pairs {
        let (ka, kb) = (num(a), num(b));
        let mut entry = ComparisonEntry { a: ka.clone(), b: kb.clone(), file: None, rejections: 0, instances: 0, error: None };
        let rows = resolve(a)
            .and_then(|ea| resolve(b).map(|eb| (ea, eb)))
            .and_then(|(ea, eb)| compare_series(&ea, &eb, cfg.smc.confidence_alpha).map_err(|e| e.to_string()));
        match rows {
            Ok(rows) => {
                let name = format!("comparison_{ka}_vs_{kb}.csv");
                ctx.save(&mut manifest, &name, &comparison_table(&rows).into_bytes())?;
                entry.rejections = rows.iter().filter(|r| r.reject).count();
                entry.instances = rows.len();
                println!("wrote {} ({} of {} instances differ)", ctx.out.join(&name).display(), entry.rejections, entry.instances);
                entry.file = Some(name);
            }
            Err(e) => {
                let msg = format!("compare pair ({ka}, {kb}): {e}");
                eprintln!("error: {msg}");
                first_error.get_or_insert(msg);
                entry.error = Some(e);
            }
        }
        comparisons.push(entry);
    }
    manifest.comparisons = comparisons;
    manifest.save(&ctx.out)?;
    match first_error {
        Some(msg) => Err(CliError::runtime(msg)),
        None => Ok(()),
    }
}

pub fn plot(args: &PlotArgs) -> Result<()> {
    match &args.config {
        Some(config) => plot_manifest(config, args),
        None => plot_files(args),
    }
}

fn plot_files(args: &PlotArgs) -> Result<()> {
    let mut series = Vec::new();
    for spec in &args.series {
        let (label, path) =
            spec.split_once('=').ok_or_else(|| CliError::config(format!("--series expects LABEL=PATH, got `{spec}`")))?;
        series.push(Series { label: label.to_owned(), rows: read_estimation(Path::new(path))? });
    }
    let mut markers = Vec::new();
    for path in &args.comparison {
        let label = path.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
        markers.push(MarkerRow { label, decisions: read_decisions(path)? });
    }
    let svg = args.svg.clone().unwrap_or_else(|| PathBuf::from("plot.svg"));
    write_file(&svg, render(&args.title, "mean", &series, &markers).as_bytes())?;
    println!("wrote {}", svg.display());
    Ok(())
}

fn plot_manifest(config: &Path, args: &PlotArgs) -> Result<()> {
    let ctx = Context::new(config, args.seed, args.out.as_deref())?;
    let mut manifest = Manifest::load(&ctx.out)?
        .ok_or_else(|| CliError::runtime(format!("no manifest in {}; run estimate or sweep first", ctx.out.display())))?;
    let mut plots = Vec::new();

    if let Some(e) = &manifest.estimate {
        if let Some(file) = &e.estimation_file {
            let rows = read_estimation(&ctx.out.join(file))?;
            let title = if args.title.is_empty() { "estimate" } else { &args.title };
            let svg = render(title, "mean", &[Series { label: "estimate".into(), rows }], &[]);
            plots.push(("estimation.svg".to_owned(), svg));
        }
    }
    if let Some(s) = &manifest.sweep {
        let mut series = Vec::new();
        for e in &s.values {
            if let (Some(file), Some(v)) = (&e.estimation_file, &e.param_value) {
                series.push(Series { label: format!("{} = {v}", s.param_name), rows: read_estimation(&ctx.out.join(file))? });
            }
        }
        let mut markers = Vec::new();
        for c in &manifest.comparisons {
            if let Some(file) = &c.file {
                markers.push(MarkerRow { label: format!("{} vs {}", c.a, c.b), decisions: read_decisions(&ctx.out.join(file))? });
            }
        }
        let title = if args.title.is_empty() { format!("{} sweep", s.param_name) } else { args.title.clone() };
        plots.push(("sweep.svg".to_owned(), render(&title, "mean", &series, &markers)));
    }
    if plots.is_empty() {
        return Err(CliError::runtime(format!("nothing to plot in {}", ctx.out.display())));
    }
    for (name, svg) in plots {
        ctx.save(&mut manifest, &name, svg.as_bytes())?;
        if !manifest.plots.contains(&name) {
            manifest.plots.push(name.clone());
        }
        println!("wrote {}", ctx.out.join(&name).display());
    }
    manifest.save(&ctx.out)?;
    Ok(())
}
