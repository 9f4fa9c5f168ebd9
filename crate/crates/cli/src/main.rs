use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use poolstat::agreement::{
    agreement_report, krippendorff_alpha_projected, leave_one_out_alpha, mean_per_topic_alpha, mean_topic_kappa,
    Projection,
};
use poolstat::efficiency::{criterion_table, efficiency_report, efficiency_stats, parse_activity_log, Criterion};
use poolstat::io::{
    load_run_dir, parse_label_matrix_file, parse_qrels_file, parse_score_matrix_file, parse_team_map_file,
    parse_topic_list_file, parse_version_map_file, write_file, write_qrels, write_score_matrix,
};
use poolstat::measures::{score_matrix, Measure, MeasureConfig};
use poolstat::model::{Qrels, TopicId, VersionId};
use poolstat::pooling::{build_pools, parse_pool_file, write_pool_dir, PoolConfig};
use poolstat::rankstats::{
    kendall_tau_maps, mean_tau_partition, paired_t, power_pairedt, tukey_hsd_paired, tukey_hsd_unpaired, TauTable,
};
use poolstat::robustness::{loto_experiment, rank_label_histogram, rr_filter, rr_provenance, valid_topics, OrderMap};
use poolstat::Strategy;

#[derive(Parser)]
#[command(name = "poolstat", version, about = "Pooling, evaluation and meta-evaluation of test collections")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Pri,
    Rnd,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Pri => Strategy::Pri,
            StrategyArg::Rnd => Strategy::Rnd,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MeasureArg {
    Ndcg,
    Q,
    Nerr,
    Irbu,
}

impl From<MeasureArg> for Measure {
    fn from(m: MeasureArg) -> Self {
        match m {
            MeasureArg::Ndcg => Measure::Ndcg,
            MeasureArg::Q => Measure::Q,
            MeasureArg::Nerr => Measure::Nerr,
            MeasureArg::Irbu => Measure::Irbu,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ProjectionArg {
    All,
    Rnd,
    Pri,
}

impl From<ProjectionArg> for Projection {
    fn from(p: ProjectionArg) -> Self {
        match p {
            ProjectionArg::All => Projection::All,
            ProjectionArg::Rnd => Projection::RndOnly,
            ProjectionArg::Pri => Projection::PriOnly,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum CriterionArg {
    Tj1d,
    Tf1rh,
    Tf1h,
    Atbj,
    Nrej,
}

impl From<CriterionArg> for Criterion {
    fn from(c: CriterionArg) -> Self {
        match c {
            CriterionArg::Tj1d => Criterion::Tj1d,
            CriterionArg::Tf1rh => Criterion::Tf1rh,
            CriterionArg::Tf1h => Criterion::Tf1h,
            CriterionArg::Atbj => Criterion::Atbj,
            CriterionArg::Nrej => Criterion::Nrej,
        }
    }
}

/// Topic inclusion and exclusion lists.
#[derive(clap::Args, Clone, Default)]
struct TopicArgs {
    /// File listing the topics to use.
    #[arg(long)]
    topics: Option<PathBuf>,
    /// File listing topics to leave out.
    #[arg(long)]
    exclude_topics: Option<PathBuf>,
}

impl TopicArgs {
    fn apply(&self, mut candidates: Vec<TopicId>) -> Result<Vec<TopicId>> {
        if let Some(p) = &self.topics {
            let keep = parse_topic_list_file(p)?;
            candidates = keep;
        }
        if let Some(p) = &self.exclude_topics {
            let drop = parse_topic_list_file(p)?;
            candidates.retain(|t| !drop.contains(t));
        }
        if candidates.is_empty() {
            bail!("topic selection is empty");
        }
        Ok(candidates)
    }
}

#[derive(clap::Args)]
struct MeasureArgs {
    #[arg(long, value_enum, default_value = "ndcg")]
    measure: MeasureArg,
    /// Measurement cutoff l.
    #[arg(long, default_value_t = 10)]
    cutoff: usize,
    /// iRBU persistence p.
    #[arg(long, default_value_t = 0.99)]
    persistence: f64,
}

impl MeasureArgs {
    fn config(&self) -> MeasureConfig {
        MeasureConfig {
            cutoff: self.cutoff,
            persistence: self.persistence,
            ..MeasureConfig::default()
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Build depth-k pools and write one `<qid>.pool` file per topic.
    Pool {
        #[arg(long)]
        runs: PathBuf,
        #[arg(long, default_value_t = 15)]
        depth: usize,
        #[arg(long, value_enum)]
        strategy: StrategyArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score runs against one or more qrels files.
    Eval {
        #[arg(long)]
        runs: PathBuf,
        /// Qrels files; the version id is the file stem.
        #[arg(long, required = true, num_args = 1..)]
        qrels: Vec<PathBuf>,
        #[command(flatten)]
        measure: MeasureArgs,
        #[command(flatten)]
        topics: TopicArgs,
        /// Directory for `<version>.tsv` score matrices; stdout when absent and one qrels is given.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the topic set that was evaluated.
        #[arg(long)]
        topics_out: Option<PathBuf>,
    },
    /// Ordinal Krippendorff's α over a label matrix.
    Agree {
        #[arg(long)]
        matrix: PathBuf,
        /// `topic assessor version` file; required for projections and per-topic α.
        #[arg(long)]
        versions: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "all")]
        projection: ProjectionArg,
        /// Also report α with each assessor left out.
        #[arg(long)]
        leave_one_out: bool,
        /// Per-topic α and its mean instead of the pooled α.
        #[arg(long)]
        per_topic: bool,
        /// With --per-topic, compare RND and PRI per-topic α by a paired t-test.
        #[arg(long, requires = "per_topic")]
        paired_t: bool,
        #[command(flatten)]
        topics: TopicArgs,
    },
    /// Mean per-topic quadratic weighted κ between two qrels versions.
    Kappa {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        versions: PathBuf,
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
        #[command(flatten)]
        topics: TopicArgs,
    },
    /// Kendall's τ between run rankings from score matrices.
    Rankcmp {
        #[arg(long, requires = "b", conflicts_with = "dir")]
        a: Option<PathBuf>,
        #[arg(long, requires = "a")]
        b: Option<PathBuf>,
        /// Compare every pair of `<version>.tsv` matrices in a directory.
        #[arg(long)]
        dir: Option<PathBuf>,
        /// Print the 95% interval.
        #[arg(long)]
        ci: bool,
        /// With --dir, run an unpaired Tukey HSD on the RND-RND, PRI-PRI and RND-PRI groups.
        #[arg(long)]
        tukey: bool,
    },
    /// Tukey HSD on a table file.
    Tukey {
        /// TSV `block T1 T2 ...` with NA for missing cells.
        #[arg(long, conflicts_with = "unpaired", required_unless_present = "unpaired")]
        paired: Option<PathBuf>,
        /// Lines `group value`.
        #[arg(long)]
        unpaired: Option<PathBuf>,
    },
    /// Achieved power and required sample size of a paired t-test.
    Power {
        #[arg(long)]
        t: f64,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value_t = 0.70)]
        target: f64,
    },
    /// Leave-one-team-out experiment.
    Loto {
        /// Runs that formed the pool.
        #[arg(long)]
        runs: PathBuf,
        /// Runs to rank; defaults to --runs.
        #[arg(long)]
        eval_runs: Option<PathBuf>,
        #[arg(long)]
        qrels: PathBuf,
        /// `run team` file.
        #[arg(long)]
        teams: PathBuf,
        #[arg(long, default_value_t = 15)]
        depth: usize,
        #[command(flatten)]
        measure: MeasureArgs,
        #[command(flatten)]
        topics: TopicArgs,
        /// V-dip plot CSV.
        #[arg(long)]
        vdip: Option<PathBuf>,
    },
    /// Keep only labels of documents some run ranks within [lo, hi].
    Rrfilter {
        #[arg(long)]
        qrels: PathBuf,
        #[arg(long)]
        runs: PathBuf,
        #[arg(long)]
        lo: usize,
        #[arg(long)]
        hi: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Efficiency criteria from an activity log.
    Efficiency {
        #[arg(long)]
        log: PathBuf,
        /// With --criterion, arrange by version and run a paired Tukey HSD.
        #[arg(long, requires = "criterion")]
        versions: Option<PathBuf>,
        #[arg(long, value_enum)]
        criterion: Option<CriterionArg>,
    },
    /// Relevant labels per presentation rank.
    Histogram {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        versions: PathBuf,
        /// Directory of `<version>/<qid>.pool` files.
        #[arg(long)]
        pools: PathBuf,
        #[arg(long, value_enum)]
        strategy: StrategyArg,
        #[arg(long)]
        max_rank: usize,
    },
    /// Run the judging service.
    Serve {
        #[arg(long)]
        versions: PathBuf,
        /// Directory of `<version>/<qid>.pool` files.
        #[arg(long)]
        pools: PathBuf,
        /// Append-only event file.
        #[arg(long)]
        events: PathBuf,
        /// Directory of `<docid>.html` files.
        #[arg(long)]
        docs: Option<PathBuf>,
        /// Topic file with qid/content/description elements.
        #[arg(long)]
        topic_file: Option<PathBuf>,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
    },
}

fn version_of(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn load_qrels(path: &Path) -> Result<Qrels> {
    Ok(parse_qrels_file(path, &version_of(path))?)
}

fn load_orders(pools: &Path, versions: &[VersionId]) -> Result<OrderMap> {
    let mut orders = OrderMap::new();
    for version in versions {
        let dir = pools.join(version);
        for entry in std::fs::read_dir(&dir).with_context(|| format!("reading {}", dir.display()))? {
            let path = entry?.path();
            if path.extension().is_some_and(|x| x == "pool") {
                let p = parse_pool_file(&path)?;
                orders.insert((p.pool.topic.clone(), version.clone()), p.presentation_order);
            }
        }
    }
    Ok(orders)
}

fn parse_paired_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<Option<f64>>>)> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
    let (_, header) = lines.next().context("empty table")?;
    let treatments: Vec<String> = header.split('\t').skip(1).map(str::to_string).collect();
    let mut rows = Vec::new();
    for (i, line) in lines {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != treatments.len() + 1 {
            bail!("{}:{}: expected {} columns", path.display(), i + 1, treatments.len() + 1);
        }
        let row = fields[1..]
            .iter()
            .map(|f| match *f {
                "NA" => Ok(None),
                v => v
                    .parse::<f64>()
                    .map(Some)
                    .with_context(|| format!("{}:{}: bad value {v:?}", path.display(), i + 1)),
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok((treatments, rows))
}

fn parse_groups(path: &Path) -> Result<Vec<(String, Vec<f64>)>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut groups: Vec<(String, Vec<f64>)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 2 {
            bail!("{}:{}: expected `group value`", path.display(), i + 1);
        }
        let v: f64 = f[1].parse().with_context(|| format!("{}:{}: bad value", path.display(), i + 1))?;
        match groups.iter_mut().find(|(g, _)| g == f[0]) {
            Some((_, vals)) => vals.push(v),
            None => groups.push((f[0].to_string(), vec![v])),
        }
    }
    Ok(groups)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Pool { runs, depth, strategy, seed, out } => {
            let config = PoolConfig::new(depth, strategy.into(), seed)?;
            let runs = load_run_dir(&runs)?;
            let pools: Vec<_> = build_pools(&runs, config.depth)?
                .into_values()
                .map(|p| p.ordered(config.strategy, config.seed))
                .collect();
            write_pool_dir(&out, &pools)?;
            let total: usize = pools.iter().map(|p| p.pool.len()).sum();
            println!(
                "topics={} topicdocs={} mean_pool={:.1}",
                pools.len(),
                total,
                total as f64 / pools.len().max(1) as f64
            );
        }
        Command::Eval { runs, qrels, measure, topics, out, topics_out } => {
            let runs = load_run_dir(&runs)?;
            let all: Vec<Qrels> = qrels.iter().map(|p| load_qrels(p)).collect::<Result<_>>()?;
            let mut universe: Vec<TopicId> = all.iter().flat_map(|q| q.topics().cloned()).collect();
            universe.sort();
            universe.dedup();
            let universe = topics.apply(universe)?;
            let refs: Vec<&Qrels> = all.iter().collect();
            let selection = valid_topics(&refs, &universe)?;
            for (t, v) in &selection.excluded {
                log::warn!("topic {t} excluded: no relevant document in {v}");
            }
            if let Some(p) = &topics_out {
                write_file(p, &(selection.kept.join("\n") + "\n"))?;
            }
            let cfg = measure.config();
            if out.is_none() && all.len() > 1 {
                bail!("--out is required with more than one qrels file");
            }
            for q in &all {
                let m = score_matrix(&runs, q, measure.measure.into(), &cfg, &selection.kept)?;
                let text = write_score_matrix(&m);
                match &out {
                    Some(dir) => write_file(&dir.join(format!("{}.tsv", q.version_id)), &text)?,
                    None => print!("{text}"),
                }
            }
        }
        Command::Agree { matrix, versions, projection, leave_one_out, per_topic, paired_t: compare, topics } => {
            let matrix = parse_label_matrix_file(&matrix)?;
            let versions = versions.map(parse_version_map_file).transpose()?;
            let projection: Projection = projection.into();
            if per_topic {
                let vm = versions.context("--per-topic needs --versions")?;
                let topics = topics.apply(matrix.topics())?;
                if compare {
                    let rnd = mean_per_topic_alpha(&matrix, &vm, &topics, Projection::RndOnly)?;
                    let pri = mean_per_topic_alpha(&matrix, &vm, &topics, Projection::PriOnly)?;
                    let pri_map: BTreeMap<&TopicId, f64> = pri.per_topic.iter().map(|(t, a)| (t, a.alpha)).collect();
                    let (a, b): (Vec<f64>, Vec<f64>) = rnd
                        .per_topic
                        .iter()
                        .filter_map(|(t, r)| pri_map.get(t).map(|p| (r.alpha, *p)))
                        .unzip();
                    let t = paired_t(&a, &b)?;
                    let power = power_pairedt(t.t.abs(), a.len(), 0.05, 0.70)?;
                    println!(
                        "n={} rnd_mean={:.3} pri_mean={:.3} t={:.3} p={:.3} glass_delta={:.4} achieved_power={:.3} required_n={}",
                        a.len(),
                        rnd.mean,
                        pri.mean,
                        t.t,
                        t.p_value,
                        t.glass_delta,
                        power.achieved_power,
                        power.required_n
                    );
                    return Ok(());
                }
                let r = mean_per_topic_alpha(&matrix, &vm, &topics, projection)?;
                println!("topic\talpha");
                for (t, a) in &r.per_topic {
                    println!("{t}\t{:.4}", a.alpha);
                }
                for (t, why) in &r.failed {
                    println!("{t}\tNA\t# {why}");
                }
                println!("mean\t{:.4}", r.mean);
                return Ok(());
            }
            let vm = versions.unwrap_or_default();
            if projection != Projection::All && vm.is_empty() {
                bail!("projections need --versions");
            }
            let mut rows = vec![("all".to_string(), projection, krippendorff_alpha_projected(&matrix, &vm, projection)?)];
            if leave_one_out {
                for a in matrix.assessors() {
                    rows.push((format!("w/o {a}"), Projection::All, leave_one_out_alpha(&matrix, a)?));
                }
            }
            print!("{}", agreement_report(&rows));
        }
        Command::Kappa { matrix, versions, a, b, topics } => {
            let matrix = parse_label_matrix_file(&matrix)?;
            let vm = parse_version_map_file(&versions)?;
            let topics = topics.apply(matrix.topics())?;
            let r = mean_topic_kappa(&matrix, &vm, &a, &b, &topics)?;
            println!("topic\tkappa");
            for (t, k) in &r.per_topic {
                println!("{t}\t{k:.4}");
            }
            for (t, why) in &r.failed {
                println!("{t}\tNA\t# {why}");
            }
            println!("mean\t{:.4}", r.mean);
        }
        Command::Rankcmp { a, b, dir, ci, tukey } => {
            if let (Some(a), Some(b)) = (a, b) {
                let ma = parse_score_matrix_file(&a)?.run_mean_map();
                let mb = parse_score_matrix_file(&b)?.run_mean_map();
                let mut r = kendall_tau_maps(&ma, &mb)?;
                if ci {
                    r = r.with_ci()?;
                }
                let mut line = format!("tau={:.3} n={} tied_pairs={}", r.tau, r.n, r.tied_pairs);
                if let Some((lo, hi)) = r.ci {
                    line.push_str(&format!(" ci=[{lo:.3}, {hi:.3}]"));
                }
                println!("{line}");
            } else if let Some(dir) = dir {
                let mut means = BTreeMap::new();
                for entry in std::fs::read_dir(&dir).with_context(|| format!("reading {}", dir.display()))? {
                    let path = entry?.path();
                    if path.extension().is_some_and(|x| x == "tsv") {
                        means.insert(version_of(&path), parse_score_matrix_file(&path)?.run_mean_map());
                    }
                }
                let versions: Vec<VersionId> = means.keys().cloned().collect();
                let mut table = TauTable::new();
                for (i, va) in versions.iter().enumerate() {
                    for vb in &versions[i + 1..] {
                        table.insert(va, vb, kendall_tau_maps(&means[va], &means[vb])?.tau);
                    }
                }
                print!("{}", table.to_csv(&versions));
                if tukey {
                    let part = mean_tau_partition(&table, &versions)?;
                    let (rr, pp, rp) = part.means();
                    println!("# RND-RND={rr:.4} PRI-PRI={pp:.4} RND-PRI={rp:.4}");
                    print!("{}", tukey_hsd_unpaired(&part.groups())?.report());
                }
            } else {
                bail!("give --a and --b, or --dir");
            }
        }
        Command::Tukey { paired, unpaired } => {
            let result = match (paired, unpaired) {
                (Some(p), _) => {
                    let (treatments, rows) = parse_paired_table(&p)?;
                    tukey_hsd_paired(&treatments, &rows)?
                }
                (None, Some(u)) => tukey_hsd_unpaired(&parse_groups(&u)?)?,
                (None, None) => bail!("give --paired or --unpaired"),
            };
            println!("# residual_variance={:.6} df={}", result.residual_variance, result.residual_df);
            print!("{}", result.report());
        }
        Command::Power { t, n, alpha, target } => {
            let r = power_pairedt(t, n, alpha, target)?;
            println!("achieved={:.3} required_n={}", r.achieved_power, r.required_n);
        }
        Command::Loto { runs, eval_runs, qrels, teams, depth, measure, topics, vdip } => {
            let pool_runs = load_run_dir(&runs)?;
            let eval = match eval_runs {
                Some(p) => load_run_dir(&p)?,
                None => pool_runs.clone(),
            };
            let qrels = load_qrels(&qrels)?;
            let team_map = parse_team_map_file(&teams)?;
            let topics = topics.apply(qrels.topics().cloned().collect())?;
            let report = loto_experiment(
                &pool_runs,
                &eval,
                &qrels,
                &team_map,
                measure.measure.into(),
                &measure.config(),
                depth,
                &topics,
            )?;
            print!("{}", report.to_tsv());
            if let Some(p) = vdip {
                write_file(&p, &report.vdip_csv())?;
            }
        }
        Command::Rrfilter { qrels, runs, lo, hi, out } => {
            let q = load_qrels(&qrels)?;
            let runs = load_run_dir(&runs)?;
            let filtered = rr_filter(&q, &runs, lo, hi)?;
            let head = rr_provenance(&q.version_id, lo, hi, runs.len());
            write_file(&out, &write_qrels(&filtered, &[head.as_str()]))?;
            println!("kept={} of {}", filtered.len(), q.len());
        }
        Command::Efficiency { log, versions, criterion } => {
            let stats: Vec<_> = parse_activity_log(&log)?.iter().map(efficiency_stats).collect();
            match (versions, criterion) {
                (Some(vpath), Some(c)) => {
                    let vm = parse_version_map_file(&vpath)?;
                    let table = criterion_table(&stats, &vm, &vm.versions(), c.into())?;
                    println!("# {} blocks={} complete={}", table.criterion, table.topics.len(), table.complete_blocks());
                    print!("{}", table.tukey()?.report());
                }
                _ => print!("{}", efficiency_report(&stats)),
            }
        }
        Command::Histogram { matrix, versions, pools, strategy, max_rank } => {
            let matrix = parse_label_matrix_file(&matrix)?;
            let vm = parse_version_map_file(&versions)?;
            let strategy: Strategy = strategy.into();
            let wanted: Vec<VersionId> = vm
                .versions()
                .into_iter()
                .filter(|v| Strategy::of_version(v) == Some(strategy))
                .collect();
            let orders = load_orders(&pools, &wanted)?;
            let counts = rank_label_histogram(&matrix, &vm, &orders, strategy, max_rank)?;
            println!("rank,relevant");
            for (i, c) in counts.iter().enumerate() {
                println!("{},{c}", i + 1);
            }
        }
        Command::Serve { versions, pools, events, docs, topic_file, addr } => {
            let catalog = poolstat_service::Catalog::load(&versions, &pools, topic_file.as_deref())?;
            let store = poolstat_service::EventStore::open(&events)?;
            let state = poolstat_service::AppState::new(
                catalog,
                store,
                std::sync::Arc::new(poolstat_service::SystemClock),
                docs,
            );
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(poolstat_service::serve(state, addr))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
