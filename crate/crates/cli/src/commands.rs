use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use ordmix::baselines;
use ordmix::continuous;
use ordmix::dataset::{
    build_category_map, load_ratings, load_truth, write_ratings, CategoryMap, Granularity,
    GroundTruth, OrdinalScale, RatingsTable,
};
use ordmix::dawid_skene;
use ordmix::evaluation::{
    evaluate_all, inject_spam, synth_generate, EpsilonPrior, SpamConfig, SynthConfig,
};
use ordmix::fit::{restart_seed, FitConfig};
use ordmix::glad;
use ordmix::odm;
use ordmix::ord_binary;

#[derive(Parser)]
#[command(
    name = "ordmix",
    version,
    about = "Infer ground truth from sparse multi-annotator ordinal ratings"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one aggregation method over a ratings file.
    Infer(InferArgs),
    /// Score an estimates file against ground truth.
    Evaluate(EvaluateArgs),
    /// Sweep injected spam levels and report metrics per method.
    SpamBench(SpamBenchArgs),
    /// Sample a synthetic benchmark dataset.
    Synth(SynthArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Odm,
    DawidSkene,
    Glad,
    OrdBinary,
    Continuous,
    Mean,
    Median,
    Majority,
}

impl Method {
    fn name(self) -> &'static str {
        match self {
            Method::Odm => "odm",
            Method::DawidSkene => "dawid-skene",
            Method::Glad => "glad",
            Method::OrdBinary => "ord-binary",
            Method::Continuous => "continuous",
            Method::Mean => "mean",
            Method::Median => "median",
            Method::Majority => "majority",
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum GranularityArg {
    /// One shared difficulty category for all instances.
    Single,
    /// Every instance is its own category.
    PerInstance,
}

#[derive(Args)]
struct InferArgs {
    /// Ratings TSV: instance<TAB>annotator<TAB>rating.
    #[arg(long)]
    ratings: PathBuf,
    #[arg(long, value_enum)]
    method: Method,
    /// Category (query) file for instance-difficulty grouping.
    #[arg(long, conflicts_with = "granularity")]
    categories: Option<PathBuf>,
    /// Built-in difficulty granularity (default: single).
    #[arg(long, value_enum)]
    granularity: Option<GranularityArg>,
    /// Number of ordinal levels K.
    #[arg(long, default_value_t = 5)]
    scale: usize,
    #[arg(long, default_value_t = 10)]
    restarts: usize,
    #[arg(long, default_value_t = 1000)]
    max_iters: usize,
    #[arg(long, default_value_t = 0.1)]
    tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Treat ratings as directly observed real values (ablation).
    #[arg(long)]
    no_ordinal_link: bool,
    /// Remove the spam mixture component (ablation).
    #[arg(long)]
    no_spam_mixture: bool,
    /// Output estimates TSV; a JSON sidecar is written next to it (.json).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Estimates TSV: instance<TAB>z_hat.
    #[arg(long)]
    estimates: PathBuf,
    /// Ground truth TSV: instance<TAB>value (coverage may be partial).
    #[arg(long)]
    truth: PathBuf,
    /// Query file instance<TAB>query for NDCG grouping (default: one query).
    #[arg(long)]
    queries: Option<PathBuf>,
    /// Append a `estimates<TAB>mse<TAB>correlation<TAB>ndcg<TAB>covered` row here.
    #[arg(long)]
    tsv_out: Option<PathBuf>,
}

#[derive(Args)]
struct SpamBenchArgs {
    #[arg(long)]
    ratings: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    /// Comma-separated methods to benchmark.
    #[arg(long, value_enum, value_delimiter = ',', required = true)]
    methods: Vec<Method>,
    /// Spam levels, inclusive range `a..b` or comma list.
    #[arg(long, default_value = "0..9", value_parser = parse_levels)]
    levels: Levels,
    #[arg(long, default_value_t = 5)]
    scale: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    restarts: usize,
    #[arg(long, default_value_t = 1000)]
    max_iters: usize,
    #[arg(long, default_value_t = 0.1)]
    tol: f64,
    /// Output TSV path (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Debug)]
struct Levels(Vec<usize>);

fn parse_levels(s: &str) -> Result<Levels, String> {
    let parse_one = |t: &str| {
        t.trim()
            .parse::<usize>()
            .map_err(|_| format!("invalid level {t:?}"))
    };
    let levels = if let Some((a, b)) = s.split_once("..") {
        let (a, b) = (parse_one(a)?, parse_one(b)?);
        if a > b {
            return Err(format!("empty range {s:?}"));
        }
        (a..=b).collect()
    } else {
        s.split(',').map(parse_one).collect::<Result<Vec<_>, _>>()?
    };
    for &l in &levels {
        if l > 9 {
            return Err(format!("spam level {l} outside the supported 0..=9 sweep"));
        }
    }
    Ok(Levels(levels))
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    m: usize,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long)]
    ratings_per_instance: usize,
    #[arg(long, default_value_t = 1)]
    categories: usize,
    /// Non-spam probability of reliable annotators.
    #[arg(long, default_value_t = 0.95)]
    eps_hi: f64,
    /// Non-spam probability of spammy annotators.
    #[arg(long, default_value_t = 0.05)]
    eps_lo: f64,
    /// Fraction of annotators that are reliable.
    #[arg(long, default_value_t = 1.0)]
    frac_hi: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Prefix P for P.ratings.tsv, P.truth.tsv, P.queries.tsv, P.params.json.
    #[arg(long)]
    out_prefix: String,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Infer(args) => cmd_infer(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::SpamBench(args) => cmd_spam_bench(args),
        Command::Synth(args) => cmd_synth(args),
    }
}

struct MethodOutput {
    z_hat: Vec<f64>,
    details: serde_json::Value,
}

fn run_method(
    method: Method,
    table: &RatingsTable,
    scale: &OrdinalScale<f64>,
    cats: &CategoryMap,
    config: &FitConfig<f64>,
    use_ordinal_link: bool,
    use_spam_mixture: bool,
) -> Result<MethodOutput> {
    let out = match method {
        Method::Odm => {
            let mut hypers = odm::OdmHyperParams::defaults(scale.clone(), table.num_annotators());
            hypers.use_ordinal_link = use_ordinal_link;
            hypers.use_spam_mixture = use_spam_mixture;
            let fit = odm::fit(table, cats, &hypers, config)?;
            MethodOutput {
                details: json!({
                    "objective": fit.elbo,
                    "iterations": fit.iterations,
                    "restarts_run": fit.restarts_run,
                    "use_ordinal_link": use_ordinal_link,
                    "use_spam_mixture": use_spam_mixture,
                    "annotators": table.annotator_ids(),
                    "spamminess": fit.spamminess,
                    "expertise": fit.expertise,
                    "epsilon": fit.hypers.epsilon,
                    "inv_difficulty": fit.inv_difficulty,
                }),
                z_hat: fit.z_hat,
            }
        }
        Method::DawidSkene => {
            let fit = dawid_skene::fit(table, scale, config)?;
            MethodOutput {
                details: json!({
                    "objective": fit.objective,
                    "iterations": fit.iterations,
                    "restarts_run": fit.restarts_run,
                    "annotators": table.annotator_ids(),
                    "class_prior": fit.params.params.pi,
                    "confusion": fit.params.params.phi,
                }),
                z_hat: fit.z_hat,
            }
        }
        Method::Glad => {
            let fit = glad::fit(table, scale, config)?;
            MethodOutput {
                details: json!({
                    "objective": fit.objective,
                    "iterations": fit.iterations,
                    "restarts_run": fit.restarts_run,
                    "annotators": table.annotator_ids(),
                    "class_prior": fit.params.params.pi,
                    "expertise": fit.params.params.a,
                    "log_inv_difficulty": fit.params.params.log_b,
                    "cg_stalled": fit.params.cg_stalled,
                }),
                z_hat: fit.z_hat,
            }
        }
        Method::OrdBinary => {
            let fit = ord_binary::fit(table, scale, config)?;
            MethodOutput {
                details: json!({
                    "objective": fit.objective,
                    "iterations": fit.iterations,
                    "restarts_run": fit.restarts_run,
                    "annotators": table.annotator_ids(),
                    "class_prior": fit.params.params.pi,
                    "sensitivity": fit.params.params.sens,
                    "specificity": fit.params.params.spec,
                }),
                z_hat: fit.z_hat,
            }
        }
        Method::Continuous => {
            let fit = continuous::fit(table, scale, config)?;
            MethodOutput {
                details: json!({
                    "objective": fit.objective,
                    "iterations": fit.iterations,
                    "restarts_run": fit.restarts_run,
                    "annotators": table.annotator_ids(),
                    "tau": fit.params.tau,
                    "capped": fit.params.capped,
                }),
                z_hat: fit.z_hat,
            }
        }
        Method::Mean => MethodOutput {
            z_hat: baselines::mean_agg(table, scale)?,
            details: json!({}),
        },
        Method::Median => MethodOutput {
            z_hat: baselines::median_agg(table, scale)?,
            details: json!({}),
        },
        Method::Majority => MethodOutput {
            z_hat: baselines::majority_vote(table, scale)?,
            details: json!({}),
        },
    };
    Ok(out)
}

fn cmd_infer(args: InferArgs) -> Result<()> {
    let scale: OrdinalScale<f64> = OrdinalScale::uniform(args.scale);
    let table = load_ratings(&args.ratings, &scale)
        .with_context(|| format!("loading {}", args.ratings.display()))?;
    let granularity = match (&args.categories, args.granularity) {
        (Some(path), _) => Granularity::FromFile(path.clone()),
        (None, Some(GranularityArg::PerInstance)) => Granularity::PerInstance,
        _ => Granularity::Single,
    };
    let cats = build_category_map(&table, &granularity)?;
    let config = FitConfig {
        restarts: args.restarts,
        max_iters: args.max_iters,
        tol: args.tol,
        seed: args.seed,
    };
    let output = run_method(
        args.method,
        &table,
        &scale,
        &cats,
        &config,
        !args.no_ordinal_link,
        !args.no_spam_mixture,
    )?;

    crate::io::write_estimates(&args.out, table.instance_ids(), &output.z_hat)?;
    let mut sidecar = json!({
        "method": args.method.name(),
        "seed": args.seed,
        "restarts": args.restarts,
        "max_iters": args.max_iters,
        "tol": args.tol,
        "scale_levels": args.scale,
        "num_instances": table.num_instances(),
        "num_annotators": table.num_annotators(),
        "num_ratings": table.len(),
        "num_categories": cats.num_categories(),
    });
    merge(&mut sidecar, output.details);
    crate::io::write_json(&crate::io::sidecar_path(&args.out), &sidecar)?;
    Ok(())
}

fn merge(base: &mut serde_json::Value, extra: serde_json::Value) {
    if let (Some(base_map), serde_json::Value::Object(extra_map)) = (base.as_object_mut(), extra) {
        base_map.extend(extra_map);
    }
}

/// Estimates plus id dictionary as read back from an `infer` output file.
fn read_estimates(path: &Path) -> Result<(Vec<String>, Vec<f64>)> {
    let rows = crate::io::read_two_col(path, ["instance", "z_hat"])?;
    let mut ids = Vec::with_capacity(rows.len());
    let mut values = Vec::with_capacity(rows.len());
    for (id, v) in rows {
        values.push(
            v.parse::<f64>()
                .map_err(|_| anyhow!("estimate {v:?} for {id:?} is not numeric"))?,
        );
        ids.push(id);
    }
    Ok((ids, values))
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<()> {
    let (ids, z_hat) = read_estimates(&args.estimates)?;
    let index: BTreeMap<&str, usize> = ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();

    let mut truth_values = vec![None; ids.len()];
    for (id, v) in crate::io::read_two_col(&args.truth, ["instance", "value"])? {
        let m = *index
            .get(id.as_str())
            .ok_or_else(|| anyhow!("truth instance {id:?} not present in estimates"))?;
        truth_values[m] = Some(
            v.parse::<f64>()
                .map_err(|_| anyhow!("truth value {v:?} for {id:?} is not numeric"))?,
        );
    }
    let truth = GroundTruth::partial(
        ids.len(),
        truth_values
            .iter()
            .enumerate()
            .filter_map(|(m, v)| v.map(|v| (m, v))),
    );

    let queries = match &args.queries {
        Some(path) => {
            let rows = crate::io::read_two_col(path, ["instance", "query"])?;
            let by_id: BTreeMap<String, String> = rows.into_iter().collect();
            let mut names = Vec::new();
            let mut name_index: BTreeMap<String, usize> = BTreeMap::new();
            let mut assignment = Vec::with_capacity(ids.len());
            for id in &ids {
                let q = by_id
                    .get(id)
                    .ok_or_else(|| anyhow!("query file is missing instance {id:?}"))?;
                let qi = *name_index.entry(q.clone()).or_insert_with(|| {
                    names.push(q.clone());
                    names.len() - 1
                });
                assignment.push(qi);
            }
            CategoryMap::from_instance_assignment(assignment, names)
        }
        None => CategoryMap::from_instance_assignment(
            vec![0; ids.len()],
            vec!["all".to_string()],
        ),
    };

    let report = evaluate_all(&truth, &z_hat, &queries)?;
    let per_query: BTreeMap<String, f64> = report
        .per_query_ndcg
        .iter()
        .map(|(&q, &v)| (queries.category_id(q).to_string(), v))
        .collect();
    let json = json!({
        "mse": report.mse,
        "correlation": report.correlation,
        "ndcg": report.ndcg,
        "covered": report.covered,
        "per_query_ndcg": per_query,
    });
    println!("{}", serde_json::to_string_pretty(&json)?);

    if let Some(tsv) = &args.tsv_out {
        use std::io::Write;
        let mut f = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(tsv)
            .with_context(|| format!("opening {}", tsv.display()))?;
        writeln!(
            f,
            "{}\t{}\t{}\t{}\t{}",
            args.estimates.display(),
            report.mse,
            report.correlation,
            report.ndcg,
            report.covered
        )?;
    }
    Ok(())
}

fn cmd_spam_bench(args: SpamBenchArgs) -> Result<()> {
    let scale: OrdinalScale<f64> = OrdinalScale::uniform(args.scale);
    let table = load_ratings(&args.ratings, &scale)?;
    let truth: GroundTruth<f64> = load_truth(&args.truth, &table)?;
    let queries = build_category_map(&table, &Granularity::FromFile(args.queries.clone()))?;

    let mut rows = vec!["method\tspam_level\tmse\tcorrelation\tndcg".to_string()];
    for &level in &args.levels.0 {
        let spammed = inject_spam(&table, &SpamConfig::new(level, restart_seed(args.seed, level)));
        let cats = build_category_map(&spammed, &Granularity::Single)?;
        for &method in &args.methods {
            let config = FitConfig {
                restarts: args.restarts,
                max_iters: args.max_iters,
                tol: args.tol,
                seed: args.seed,
            };
            let output = run_method(method, &spammed, &scale, &cats, &config, true, true)?;
            let report = evaluate_all(&truth, &output.z_hat, &queries)?;
            rows.push(format!(
                "{}\t{}\t{}\t{}\t{}",
                method.name(),
                level,
                report.mse,
                report.correlation,
                report.ndcg
            ));
        }
    }
    let body = rows.join("\n") + "\n";
    match &args.out {
        Some(path) => std::fs::write(path, body)?,
        None => print!("{body}"),
    }
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    if !(0.0..=1.0).contains(&args.frac_hi) {
        bail!("--frac-hi must lie in [0, 1]");
    }
    let mut cfg: SynthConfig<f64> = SynthConfig::new(args.m, args.n, args.k);
    cfg.num_categories = args.categories;
    cfg.ratings_per_instance = args.ratings_per_instance;
    cfg.seed = args.seed;
    cfg.epsilon = if args.frac_hi >= 1.0 {
        EpsilonPrior::Fixed(args.eps_hi)
    } else {
        EpsilonPrior::TwoPoint {
            hi: args.eps_hi,
            lo: args.eps_lo,
            frac_hi: args.frac_hi,
        }
    };
    let out = synth_generate(&cfg);

    let prefix = &args.out_prefix;
    write_ratings(&out.table, format!("{prefix}.ratings.tsv"))?;

    use std::io::Write;
    let mut truth_file = std::fs::File::create(format!("{prefix}.truth.tsv"))?;
    writeln!(truth_file, "instance\tvalue")?;
    for (m, z) in out.truth.covered() {
        writeln!(truth_file, "{}\t{}", out.table.instance_id(m), z)?;
    }
    let mut query_file = std::fs::File::create(format!("{prefix}.queries.tsv"))?;
    writeln!(query_file, "instance\tquery")?;
    for m in 0..out.table.num_instances() {
        writeln!(
            query_file,
            "{}\t{}",
            out.table.instance_id(m),
            out.categories.category_id(out.categories.of_instance(m))
        )?;
    }
    let params = json!({
        "config": cfg,
        "z": out.params.z,
        "tau": out.params.tau,
        "delta": out.params.delta,
        "epsilon": out.params.epsilon,
    });
    crate::io::write_json(Path::new(&format!("{prefix}.params.json")), &params)?;
    Ok(())
}
