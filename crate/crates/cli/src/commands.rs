use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use jointgibbs::data::{md_pattern as pattern_of, read_csv, write_csv_string, Dataset};
use jointgibbs::diagnostics::{
    gelman_rubin, gelman_rubin_text, mc_error, mc_error_text, summarize_with, summary_text, SubsetSpec, SummaryOptions,
};
use jointgibbs::error::{Error, Result};
use jointgibbs::graph::{ModelConfig, ModelGraph};
use jointgibbs::postprocess::{
    emit_plot_data, get_mi_dat, imp_distr_data, pred_df, predict as predict_draws, MiOptions, PlotKind, PredictOptions,
};
use jointgibbs::sampler::{run_engine, Engine, McmcSamples, McmcSettings};
use serde::{Deserialize, Serialize};

use crate::manifest::{sha256_file, sha256_hex, Manifest};
use crate::{DiagnoseArgs, FitArgs, ImputeArgs, MdPatternArgs, PredictArgs, RunArgs, SubsetArgs, SummaryArgs};

const CONFIG: &str = "config.json";
const DATA: &str = "data.csv";
const SAMPLES: &str = "samples";

/// Everything `fit` needs: where the data is, the model and the sampler
/// settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    /// Relative paths are taken from the directory of the config file.
    pub data: Option<PathBuf>,
    pub na: String,
    pub model: ModelConfig,
    pub mcmc: McmcSettings,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig { data: None, na: "NA".into(), model: ModelConfig::default(), mcmc: McmcSettings::default() }
    }
}

fn read_config(path: &Path) -> Result<FitConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config '{}': {e}", path.display())))?;
    let mut c: FitConfig =
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("invalid config '{}': {e}", path.display())))?;
    if let Some(d) = &c.data {
        if d.is_relative() {
            c.data = Some(path.parent().unwrap_or(Path::new(".")).join(d));
        }
    }
    Ok(c)
}

fn effective_config(a: &FitArgs) -> Result<FitConfig> {
    let mut c = match &a.config {
        Some(p) => read_config(p)?,
        None => FitConfig::default(),
    };
    if let Some(d) = &a.data {
        c.data = Some(d.clone());
    }
    if let Some(na) = &a.na {
        c.na = na.clone();
    }
    match a.formula.as_slice() {
        [] => {}
        [one] => c.model.formula = Some(jointgibbs::graph::Formulas::One(one.clone())),
        many => c.model.formula = Some(jointgibbs::graph::Formulas::Many(many.to_vec())),
    }
    if a.family.is_some() {
        c.model.family = a.family.clone();
        c.model.link = a.link.clone();
    } else if a.link.is_some() {
        c.model.link = a.link.clone();
    }
    if !a.monitor.is_empty() {
        let mut map = match std::mem::take(&mut c.model.monitor_params) {
            serde_json::Value::Object(m) => m,
            serde_json::Value::Null => serde_json::Map::new(),
            _ => return Err(Error::Config("monitor_params must be an object".into())),
        };
        for k in &a.monitor {
            let (key, on) = match k.split_once('=') {
                Some((key, v)) => (key, v.parse::<bool>().map_err(|_| Error::Config(format!("invalid monitor flag '{k}'")))?),
                None => (k.as_str(), true),
            };
            map.insert(key.trim().to_string(), on.into());
        }
        c.model.monitor_params = serde_json::Value::Object(map);
    }
    let m = &mut c.mcmc;
    m.seed = a.seed.unwrap_or(m.seed);
    m.n_iter = a.n_iter.unwrap_or(m.n_iter);
    m.n_adapt = a.n_adapt.unwrap_or(m.n_adapt);
    m.n_chains = a.n_chains.unwrap_or(m.n_chains);
    m.thin = a.thin.unwrap_or(m.thin);
    if a.threads.is_some() {
        m.threads = a.threads;
    }
    Ok(c)
}

fn is_inside(path: &Path, dir: &Path) -> bool {
    match (path.canonicalize(), dir.canonicalize()) {
        (Ok(p), Ok(d)) => p.starts_with(d),
        _ => false,
    }
}

fn prepare_run_dir(out: &Path, force: bool, inputs: &[&Path]) -> Result<()> {
    if out.exists() {
        let empty = fs::read_dir(out)?.next().is_none();
        if !empty {
            if !force {
                return Err(Error::Config(format!(
                    "output directory '{}' is not empty (use --force to replace it)",
                    out.display()
                )));
            }
            if let Some(p) = inputs.iter().find(|p| is_inside(p, out)) {
                return Err(Error::Config(format!("input '{}' lies inside the output directory", p.display())));
            }
            fs::remove_dir_all(out)?;
        }
    }
    fs::create_dir_all(out)?;
    Ok(())
}

/// Predictor column names of each sub-model.
fn model_listing(engine: &Engine) -> String {
    let cols: Vec<Vec<String>> = engine.models.iter().map(|cm| cm.design.names()).collect();
    engine.graph.list_models(&cols)
}

pub fn fit(a: &FitArgs) -> Result<()> {
    let mut cfg = effective_config(a)?;
    let data_path = cfg
        .data
        .clone()
        .ok_or_else(|| Error::Config("no data given (use --data or set \"data\" in the config)".into()))?;
    cfg.mcmc.validate()?;
    let formulas = cfg.model.formulas()?;
    let opts = cfg.model.graph_options(&formulas)?;

    let mut inputs: Vec<&Path> = vec![&data_path];
    if let Some(c) = &a.config {
        inputs.push(c);
    }
    let data_bytes = fs::read(&data_path)
        .map_err(|e| Error::Data(format!("cannot read '{}': {e}", data_path.display())))?;
    let ds = read_csv(&data_path, &cfg.na)?;
    prepare_run_dir(&a.out, a.force, &inputs)?;

    let mut man = Manifest::new("fit");
    man.inputs.insert("data".into(), sha256_hex(&data_bytes));
    man.output(&a.out, DATA, &data_bytes)?;
    // the stored config reads the copy next to it
    cfg.data = Some(PathBuf::from(DATA));
    let cfg_text = serde_json::to_string_pretty(&cfg)? + "\n";
    man.config_sha256 = Some(sha256_hex(cfg_text.as_bytes()));
    man.seed = Some(cfg.mcmc.seed);
    man.output(&a.out, CONFIG, &cfg_text)?;

    let graph = jointgibbs::graph::build_model_graph(&formulas, &ds, &opts)?;
    let engine = Engine::new(&graph, &ds)?;
    man.output(&a.out, "model_graph.json", serde_json::to_string_pretty(&graph)? + "\n")?;
    man.output(&a.out, "model_graph.txt", model_listing(&engine))?;

    let samples = run_engine(&engine, &cfg.mcmc)?;
    samples.write_dir(&a.out.join(SAMPLES))?;
    man.outputs.push(SAMPLES.into());
    let mut log = String::new();
    for w in &samples.meta.warnings {
        log.push_str(w);
        log.push('\n');
    }
    man.output(&a.out, "warnings.log", log)?;
    man.write(&a.out)?;
    log::info!("wrote {}", a.out.display());
    Ok(())
}

struct Run {
    dir: PathBuf,
    config: FitConfig,
    data: Dataset,
    graph: ModelGraph,
    samples: McmcSamples,
}

fn load_run(dir: &Path) -> Result<Run> {
    let cfg_path = dir.join(CONFIG);
    if !cfg_path.exists() {
        return Err(Error::Config(format!("'{}' is not a run directory (no {CONFIG})", dir.display())));
    }
    let config = read_config(&cfg_path)?;
    let data = read_csv(dir.join(DATA), &config.na)?;
    let graph = config.model.build(&data)?;
    let samples = McmcSamples::read_dir(&dir.join(SAMPLES))?;
    Ok(Run { dir: dir.to_path_buf(), config, data, graph, samples })
}

impl Run {
    /// Manifest with the hashes of everything the run provides.
    fn manifest(&self, command: &str) -> Result<Manifest> {
        let mut m = Manifest::new(command);
        m.config_sha256 = Some(sha256_file(&self.dir.join(CONFIG))?);
        m.seed = Some(self.config.mcmc.seed);
        m.input("data", &self.dir.join(DATA))?;
        let sdir = self.dir.join(SAMPLES);
        m.input("samples/samples_meta.json", &sdir.join("samples_meta.json"))?;
        for c in 1..=self.samples.n_chains() {
            let name = format!("chain_{c}.csv");
            m.input(&format!("samples/{name}"), &sdir.join(&name))?;
        }
        Ok(m)
    }
}

/// Output directory of a post-processing command; never the run itself.
fn output_dir(r: &RunArgs, name: &str) -> Result<PathBuf> {
    let out = r.out.clone().unwrap_or_else(|| r.run.join(name));
    let protected = [r.run.clone(), r.run.join(SAMPLES)];
    if out.exists() && protected.iter().any(|p| p.canonicalize().ok() == out.canonicalize().ok()) {
        return Err(Error::Config(format!("'{}' belongs to the run and cannot be an output directory", out.display())));
    }
    fs::create_dir_all(&out)?;
    Ok(out)
}

fn subset_spec(a: &SubsetArgs) -> Result<SubsetSpec> {
    let mut s: SubsetSpec = match &a.subset {
        None => SubsetSpec::default(),
        Some(t) => {
            let text = if t.trim_start().starts_with('{') {
                t.clone()
            } else {
                fs::read_to_string(t).map_err(|e| Error::Config(format!("cannot read subset '{t}': {e}")))?
            };
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("invalid subset: {e}")))?
        }
    };
    if a.start.is_some() {
        s.start = a.start;
    }
    if a.end.is_some() {
        s.end = a.end;
    }
    if a.thin.is_some() {
        s.thin = a.thin;
    }
    if !a.exclude_chains.is_empty() {
        s.exclude_chains = a.exclude_chains.clone();
    }
    Ok(s)
}

fn quantile_pair(q: &Option<Vec<f64>>, default: (f64, f64)) -> Result<(f64, f64)> {
    let (lo, hi) = match q.as_deref() {
        None => return Ok(default),
        Some([lo, hi]) => (*lo, *hi),
        Some(_) => return Err(Error::Config("give two quantiles".into())),
    };
    if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
        return Err(Error::Config(format!("invalid quantiles {lo}, {hi}")));
    }
    Ok((lo, hi))
}

pub fn summary(a: &SummaryArgs) -> Result<()> {
    let run = load_run(&a.run.run)?;
    let spec = subset_spec(&a.subset)?;
    let mut opts = SummaryOptions { missinfo: a.missinfo, ..Default::default() };
    opts.probs = quantile_pair(&a.quantiles, opts.probs)?;
    let s = summarize_with(&run.samples, &spec, &opts)?;
    let text = summary_text(&s);
    let json = serde_json::to_string_pretty(&s)? + "\n";
    let out = output_dir(&a.run, "summary")?;
    let mut man = run.manifest("summary")?;
    man.output(&out, "summary.txt", &text)?;
    man.output(&out, "summary.json", &json)?;
    man.write(&out)?;
    if a.json {
        print!("{json}");
    } else {
        print!("{text}");
    }
    Ok(())
}

pub fn diagnose(a: &DiagnoseArgs) -> Result<()> {
    let run = load_run(&a.run.run)?;
    let spec = subset_spec(&a.subset)?;
    let kinds: Vec<PlotKind> = a.plots.iter().map(|p| p.parse()).collect::<Result<_>>()?;
    let out = output_dir(&a.run, "diagnostics")?;
    let mut man = run.manifest("diagnose")?;
    let mut text = String::new();
    if spec.apply(&run.samples)?.n_chains() >= 2 {
        let gr = gelman_rubin(&run.samples, &spec, a.confidence, a.autoburnin)?;
        let t = gelman_rubin_text(&gr);
        man.output(&out, "gelman_rubin.txt", &t)?;
        man.output(&out, "gelman_rubin.json", serde_json::to_string_pretty(&gr)? + "\n")?;
        text.push_str(&t);
    } else {
        text.push_str("The Gelman-Rubin criterion needs at least two chains.\n");
    }
    let mc = mc_error(&run.samples, &spec)?;
    let t = mc_error_text(&mc);
    man.output(&out, "mc_error.txt", &t)?;
    man.output(&out, "mc_error.json", serde_json::to_string_pretty(&mc)? + "\n")?;
    text.push('\n');
    text.push_str(&t);
    for k in kinds {
        let pd = emit_plot_data(&run.samples, k, &spec, None)?;
        let stem = format!("plot_{}", serde_json::to_value(k)?.as_str().unwrap_or("plot"));
        pd.write(&out.join(&stem))?;
        man.outputs.push(format!("{stem}.csv"));
        man.outputs.push(format!("{stem}.json"));
    }
    man.write(&out)?;
    print!("{text}");
    Ok(())
}

fn grid_overrides(set: &[String]) -> Result<BTreeMap<String, Vec<String>>> {
    let mut m = BTreeMap::new();
    for s in set {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set needs name=value, got '{s}'")))?;
        m.insert(k.trim().to_string(), v.split(',').map(|x| x.trim().to_string()).collect());
    }
    Ok(m)
}

pub fn predict(a: &PredictArgs) -> Result<()> {
    let run = load_run(&a.run.run)?;
    let mut man = run.manifest("predict")?;
    let newdata = match (&a.newdata, &a.vars) {
        (Some(p), _) => {
            man.input("newdata", p)?;
            read_csv(p, &run.config.na)?
        }
        (None, Some(v)) => pred_df(&run.graph, &run.data, v, a.grid_length, &grid_overrides(&a.set)?)?,
        (None, None) => return Err(Error::Config("give --newdata or --vars".into())),
    };
    let mut opts = PredictOptions {
        pred_type: a.pred_type.parse()?,
        outcome: a.outcome.clone(),
        subset: subset_spec(&a.subset)?,
        ..Default::default()
    };
    opts.quantiles = quantile_pair(&a.quantiles, opts.quantiles)?;
    let res = predict_draws(&run.samples, &run.graph, &newdata, &opts)?;
    let out = output_dir(&a.run, "predict")?;
    man.output(&out, "predictions.csv", write_csv_string(&res.table()?, &run.config.na)?)?;
    man.write(&out)?;
    log::info!("wrote {}", out.join("predictions.csv").display());
    Ok(())
}

pub fn impute_export(a: &ImputeArgs) -> Result<()> {
    let run = load_run(&a.run.run)?;
    let opts = MiOptions { m: a.m, include: !a.no_include, start: a.start, minspace: a.minspace, seed: a.seed };
    let stack = get_mi_dat(&run.samples, &run.graph, &run.data, &opts)?;
    let out = output_dir(&a.run, "imputed")?;
    let mut man = run.manifest("impute-export")?;
    man.seed = Some(opts.seed);
    man.output(&out, "imputed.csv", write_csv_string(&stack.data, &run.config.na)?)?;
    man.output(&out, "picks.json", serde_json::to_string_pretty(&stack.picks)? + "\n")?;
    if opts.include && opts.m > 0 {
        let pd = imp_distr_data(&stack, &run.graph, &stack.imputed)?;
        pd.write(&out.join("imp_distr"))?;
        man.outputs.push("imp_distr.csv".into());
        man.outputs.push("imp_distr.json".into());
    }
    man.write(&out)?;
    log::info!("wrote {}", out.join("imputed.csv").display());
    Ok(())
}

pub fn md_pattern(a: &MdPatternArgs) -> Result<()> {
    let ds = read_csv(&a.data, &a.na)?;
    for v in &a.vars {
        ds.require(v)?;
    }
    let vars = (!a.vars.is_empty()).then_some(a.vars.as_slice());
    let p = pattern_of(&ds, vars);
    let csv = p.to_csv();
    if let Some(out) = &a.out {
        if is_inside(&a.data, out) && out.join("md_pattern.csv").canonicalize().ok() == a.data.canonicalize().ok() {
            return Err(Error::Config("the output would overwrite the input".into()));
        }
        fs::create_dir_all(out)?;
        let mut man = Manifest::new("md-pattern");
        man.input("data", &a.data)?;
        man.output(out, "md_pattern.csv", &csv)?;
        man.output(out, "md_pattern.json", serde_json::to_string_pretty(&p)? + "\n")?;
        man.write(out)?;
    }
    print!("{csv}");
    Ok(())
}
