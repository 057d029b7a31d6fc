//! Subcommand implementations. Each writes plain-text outputs under the run's
//! output directory, headed by the tool version and the config digest.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use bitewise::advisor::{self, CurveOverK, DecisionRecord};
use bitewise::estimator::{self, EstimateRequest};
use bitewise::learners::{
    export_scores_with_note, gen_synthetic, import_scores, train_logreg, train_pool, LogregParams, PoolConfig,
    ScoreMatrix, SyntheticSpec,
};
use bitewise::oracle::{self, OraclePoint, CurveRow, CurveSource, PoolEnsembleSpec};
use bitewise::rng::derive_seed;
use bitewise::tables::{
    build_pm_table, build_vote_tables_with_order, load_table, required_tables, save_table, StatKind, TableGrid,
    TableMeta, TableSet, UniversalTable,
};
use bitewise::{
    eval_loss, stats_for_matrix, EnsembleRule, Error, LabeledDataset, LossKind, MixScheme, Result,
};
use log::{info, warn};
use serde_json::json;

use crate::config::{DataSource, RunConfig};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

const TRAIN_TAG: u64 = 1;
const EVAL_TAG: u64 = 2;
const ONE_SAMP_TAG: u64 = 3;
const GT_TAG: u64 = 4;
const POOL_TAG_BASE: u64 = 1 << 20;

fn banner(cfg: &RunConfig) -> String {
    format!("bitewise {VERSION}, config={}", cfg.digest())
}

fn write_output(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text)?;
    info!("wrote {}", path.display());
    Ok(())
}

fn synthetic_spec(n: usize, d: usize, separation: f64, prior: f64) -> SyntheticSpec {
    SyntheticSpec { prior, ..SyntheticSpec::symmetric(n, d, separation) }
}

/// Training and evaluation sets, or `None` when the run starts from a score file.
fn load_data(cfg: &RunConfig) -> Result<Option<(LabeledDataset, LabeledDataset)>> {
    match &cfg.data {
        DataSource::Synthetic { n, n_eval, d, separation, prior } => {
            let train = gen_synthetic(&synthetic_spec(*n, *d, *separation, *prior), derive_seed(cfg.seed, TRAIN_TAG))?;
            let eval = gen_synthetic(&synthetic_spec(*n_eval, *d, *separation, *prior), derive_seed(cfg.seed, EVAL_TAG))?;
            Ok(Some((train, eval)))
        }
        DataSource::Files { train, eval } => Ok(Some((LabeledDataset::read_csv(train)?, LabeledDataset::read_csv(eval)?))),
        DataSource::Scores { .. } => Ok(None),
    }
}

/// Source of score matrices: trains pools on demand or serves a fixed file.
enum Pools {
    Train { train: LabeledDataset, eval: LabeledDataset },
    File(ScoreMatrix),
}

impl Pools {
    fn open(cfg: &RunConfig) -> Result<Self> {
        match (load_data(cfg)?, &cfg.data) {
            (Some((train, eval)), _) => Ok(Pools::Train { train, eval }),
            (None, DataSource::Scores { path }) => Ok(Pools::File(import_scores(path)?)),
            (None, _) => unreachable!("only score sources skip the datasets"),
        }
    }

    fn m_values(&self, cfg: &RunConfig) -> Vec<usize> {
        match self {
            Pools::Train { .. } => cfg.m_values.clone(),
            Pools::File(matrix) => vec![matrix.meta.m],
        }
    }

    /// A pool of `size` members for bite size `m`. The same `m` always uses the
    /// same bite seed, so smaller pools are prefixes of larger ones in iid mode.
    fn pool(&self, cfg: &RunConfig, m: usize, size: usize, mode: bitewise::learners::BiteMode) -> Result<ScoreMatrix> {
        match self {
            Pools::Train { train, eval } => {
                let mut pc = PoolConfig::new(size, m, mode, derive_seed(cfg.seed, POOL_TAG_BASE + m as u64));
                pc.params = LogregParams::for_bite_size(m);
                let trained = train_pool(train, eval, &pc)?;
                if trained.single_class_bites > 0 {
                    warn!("m={m}: {} single-class bites fell back to the log-odds rule", trained.single_class_bites);
                }
                if trained.unconverged > 0 {
                    warn!("m={m}: {} members hit the iteration limit", trained.unconverged);
                }
                Ok(trained.scores)
            }
            Pools::File(matrix) => {
                if size > matrix.pool_size() {
                    return Err(Error::Config(format!(
                        "score file has {} members but {size} are needed",
                        matrix.pool_size()
                    )));
                }
                matrix.leading_columns(size)
            }
        }
    }
}

pub fn gen_data(cfg: &RunConfig) -> Result<()> {
    let Some((train, eval)) = load_data(cfg)? else {
        return Err(Error::Config("gen-data needs a synthetic or file data source".into()));
    };
    if !matches!(cfg.data, DataSource::Synthetic { .. }) {
        return Err(Error::Config("gen-data needs [data] source = synthetic".into()));
    }
    fs::create_dir_all(&cfg.out)?;
    let note = banner(cfg);
    for (name, ds) in [("train.csv", &train), ("eval.csv", &eval)] {
        let path = cfg.out.join(name);
        ds.write_csv(&path, Some(&note))?;
        info!("wrote {} ({} rows)", path.display(), ds.n());
    }
    Ok(())
}

pub fn train_pools(cfg: &RunConfig) -> Result<()> {
    let pools = Pools::open(cfg)?;
    fs::create_dir_all(&cfg.out)?;
    for m in pools.m_values(cfg) {
        let matrix = pools.pool(cfg, m, cfg.k_tilde, cfg.mode)?;
        let path = cfg.out.join(format!("scores_m{m}.csv"));
        export_scores_with_note(&matrix, &path, Some(&banner(cfg)))?;
        info!("wrote {}", path.display());
    }
    Ok(())
}

fn table_path(dir: &Path, stat: StatKind, mix: MixScheme) -> PathBuf {
    dir.join(format!("{mix}_{stat}.utbl"))
}

fn expected_grid(cfg: &RunConfig, mix: MixScheme) -> TableGrid {
    match mix {
        MixScheme::ParameterMixing => TableGrid::default_pm(),
        MixScheme::Voting => TableGrid::default_voting().with_k_values(cfg.tables.k_values.clone()),
    }
}

fn expected_meta(cfg: &RunConfig, mix: MixScheme) -> TableMeta {
    let order = cfg.tables.quadrature_order as u32;
    match mix {
        MixScheme::ParameterMixing => TableMeta { mc_samples: 0, seed: 0, quadrature_order: order },
        MixScheme::Voting => {
            TableMeta { mc_samples: cfg.tables.mc_samples as u64, seed: cfg.tables.seed, quadrature_order: order }
        }
    }
}

fn table_specs(cfg: &RunConfig) -> Vec<(StatKind, MixScheme)> {
    let mut specs = Vec::new();
    for &loss in &cfg.losses {
        for &mix in &cfg.mixes {
            for spec in required_tables(loss, cfg.link_for(loss), mix) {
                if !specs.contains(&spec) {
                    specs.push(spec);
                }
            }
        }
    }
    specs
}

fn is_current(table: &UniversalTable, cfg: &RunConfig, mix: MixScheme) -> bool {
    table.grid() == &expected_grid(cfg, mix) && table.meta() == expected_meta(cfg, mix)
}

/// Loads every table the run needs, building missing or stale ones when allowed.
fn ensure_tables(cfg: &RunConfig, build: bool) -> Result<TableSet> {
    let dir = &cfg.tables.dir;
    let mut set = TableSet::new();
    let mut stale = Vec::new();
    for (stat, mix) in table_specs(cfg) {
        let path = table_path(dir, stat, mix);
        match load_table(&path) {
            Ok(t) if t.stat() == stat && t.mix() == mix && is_current(&t, cfg, mix) => {
                info!("{} is up to date, skipping", path.display());
                set.insert(t);
            }
            Ok(_) => stale.push((stat, mix)),
            Err(_) if path.exists() => stale.push((stat, mix)),
            Err(_) => stale.push((stat, mix)),
        }
    }
    if stale.is_empty() {
        return Ok(set);
    }
    if !build {
        let names: Vec<String> = stale.iter().map(|(s, m)| format!("{m}/{s}")).collect();
        return Err(Error::Config(format!(
            "tables missing or out of date in {}: {}; run build-tables",
            dir.display(),
            names.join(", ")
        )));
    }
    fs::create_dir_all(dir)?;
    for &(stat, mix) in stale.iter().filter(|(_, m)| *m == MixScheme::ParameterMixing) {
        info!("building parameter-mixing table {stat}");
        let t = build_pm_table(stat, &expected_grid(cfg, mix), cfg.tables.quadrature_order)?;
        save_table(&t, table_path(dir, stat, mix))?;
        set.insert(t);
    }
    let vote: Vec<StatKind> = stale.iter().filter(|(_, m)| *m == MixScheme::Voting).map(|(s, _)| *s).collect();
    if !vote.is_empty() {
        let names: Vec<String> = vote.iter().map(ToString::to_string).collect();
        info!("building voting tables {}", names.join(", "));
        let built = build_vote_tables_with_order(
            &vote,
            &expected_grid(cfg, MixScheme::Voting),
            cfg.tables.mc_samples,
            cfg.tables.seed,
            cfg.tables.quadrature_order,
        )?;
        for t in built {
            save_table(&t, table_path(dir, t.stat(), MixScheme::Voting))?;
            set.insert(t);
        }
    }
    Ok(set)
}

pub fn build_tables(cfg: &RunConfig) -> Result<()> {
    let set = ensure_tables(cfg, true)?;
    info!("{} tables ready in {}", set.len(), cfg.tables.dir.display());
    Ok(())
}

pub fn table_info(path: &Path) -> Result<String> {
    let t = load_table(path)?;
    let g = t.grid();
    let stat = t.stat();
    let mut s = String::new();
    let _ = writeln!(s, "file: {}", path.display());
    let _ = writeln!(s, "statistic: {stat}");
    let _ = writeln!(s, "mix: {}", t.mix());
    let _ = writeln!(s, "loss: {}", stat.loss().map_or("none".to_string(), |l| l.to_string()));
    let _ = writeln!(s, "link: {}", stat.link());
    let _ = writeln!(s, "a: {} values in [{}, {}]", g.a_values.len(), g.a_values[0], g.a_values[g.a_values.len() - 1]);
    let _ = writeln!(s, "b: {} values in [{}, {}]", g.b_values.len(), g.b_values[0], g.b_values[g.b_values.len() - 1]);
    match (g.k_values.first(), g.k_values.last()) {
        (Some(lo), Some(hi)) => {
            let _ = writeln!(s, "K: {} values in [{lo}, {hi}]", g.k_values.len());
        }
        _ => {
            let _ = writeln!(s, "K: none");
        }
    }
    let meta = t.meta();
    let _ = writeln!(s, "mc_samples: {}", meta.mc_samples);
    let _ = writeln!(s, "seed: {}", meta.seed);
    let _ = writeln!(s, "quadrature_order: {}", meta.quadrature_order);
    Ok(s)
}

fn estimate_path(cfg: &RunConfig, m: usize) -> PathBuf {
    cfg.out.join(format!("estimate_m{m}.csv"))
}

fn baseline_path(cfg: &RunConfig, m: usize) -> PathBuf {
    cfg.out.join(format!("baseline_m{m}.csv"))
}

pub fn estimate(cfg: &RunConfig) -> Result<()> {
    let tables = ensure_tables(cfg, cfg.tables.build)?;
    let pools = Pools::open(cfg)?;
    for m in pools.m_values(cfg) {
        let matrix = pools.pool(cfg, m, cfg.k_tilde, cfg.mode)?;
        let stats = stats_for_matrix(&matrix)?;
        let mut reports = Vec::new();
        for &loss in &cfg.losses {
            for &mix in &cfg.mixes {
                for &k in &cfg.k_values {
                    let req = EstimateRequest {
                        loss,
                        link: cfg.link_for(loss),
                        mix,
                        k,
                        m: Some(m),
                        per_point: cfg.per_point,
                    };
                    let report = estimator::estimate(&stats, matrix.labels(), &req, &tables)?;
                    if let Some(points) = &report.per_point {
                        let mut buf = format!("# {}\n", banner(cfg)).into_bytes();
                        estimator::write_per_point_csv(&mut buf, matrix.ids(), matrix.labels(), &stats, points)?;
                        let path = cfg.out.join(format!("points_m{m}_{loss}_{mix}_K{k}.csv"));
                        write_output(&path, &String::from_utf8(buf).expect("utf-8 csv"))?;
                    }
                    reports.push(report);
                }
            }
        }
        let mut buf =
            format!("# {}\n# m={m}, k_tilde={}, n_eval={}\n", banner(cfg), cfg.k_tilde, matrix.rows()).into_bytes();
        estimator::write_report_csv(&mut buf, &reports)?;
        write_output(&estimate_path(cfg, m), &String::from_utf8(buf).expect("utf-8 csv"))?;
    }
    Ok(())
}

pub fn baseline(cfg: &RunConfig) -> Result<()> {
    let pools = Pools::open(cfg)?;
    let p = cfg.baseline.pool_size;
    for m in pools.m_values(cfg) {
        let matrix = pools.pool(cfg, m, p, cfg.baseline.mode)?;
        let ks: Vec<usize> = cfg.k_values.iter().copied().filter(|&k| k <= p).collect();
        if ks.len() < cfg.k_values.len() {
            warn!("skipping ensemble sizes above the pool size {p}");
        }
        let emp_ks: Vec<usize> = ks.iter().copied().filter(|&k| k <= cfg.k_tilde).collect();
        let k_max = ks.iter().copied().max().unwrap_or(0);
        let mut rows = Vec::new();
        for &loss in &cfg.losses {
            for &mix in &cfg.mixes {
                let rule = EnsembleRule::new(mix, cfg.link_for(loss));
                let spec = PoolEnsembleSpec::new(ks.clone(), cfg.baseline.ensembles, derive_seed(cfg.seed, GT_TAG));
                let gt = oracle::ground_truth(&matrix, loss, rule, &spec)?;
                rows.extend(gt.iter().map(|g| curve_row(g, CurveSource::GroundTruth, loss, rule)));
                if k_max > 0 {
                    let one = oracle::one_samp_curve(&matrix, loss, rule, k_max, Some(derive_seed(cfg.seed, ONE_SAMP_TAG)))?;
                    rows.extend(ks.iter().map(|&k| CurveRow {
                        k,
                        method: CurveSource::OneSamp,
                        loss,
                        rule,
                        mean: one[k - 1],
                        std: None,
                    }));
                }
                if !emp_ks.is_empty() {
                    let spec = PoolEnsembleSpec { k_values: emp_ks.clone(), ..spec.clone() };
                    let emp = oracle::emp_samp_ktilde(&matrix, cfg.k_tilde.min(p), loss, rule, &spec)?;
                    rows.extend(emp.iter().map(|g| curve_row(g, CurveSource::EmpSamp, loss, rule)));
                }
            }
        }
        let mut buf = format!(
            "# {}\n# m={m}, pool_size={p}, ensembles={}, pool_mode={}, k_tilde={}, n_eval={}\n",
            banner(cfg),
            cfg.baseline.ensembles,
            cfg.baseline.mode,
            cfg.k_tilde,
            matrix.rows()
        )
        .into_bytes();
        oracle::write_curve_csv(&mut buf, &rows)?;
        write_output(&baseline_path(cfg, m), &String::from_utf8(buf).expect("utf-8 csv"))?;
    }
    Ok(())
}

fn curve_row(g: &OraclePoint, method: CurveSource, loss: LossKind, rule: EnsembleRule) -> CurveRow {
    CurveRow { k: g.k, method, loss, rule, mean: g.mean, std: Some(g.std) }
}

/// Data rows of a CSV with `#` comment lines, keyed by column name.
fn read_table_csv(path: &Path) -> Result<Vec<BTreeMap<String, String>>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.starts_with('#') && !l.trim().is_empty());
    let Some((_, header)) = lines.next() else {
        return Err(Error::Parse { line: 1, msg: format!("{}: missing header", path.display()) });
    };
    let cols: Vec<&str> = header.split(',').collect();
    lines
        .map(|(i, l)| {
            let vals: Vec<&str> = l.split(',').collect();
            if vals.len() != cols.len() {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: format!("{}: expected {} fields", path.display(), cols.len()),
                });
            }
            Ok(cols.iter().zip(vals).map(|(c, v)| (c.to_string(), v.to_string())).collect())
        })
        .collect()
}

fn field<T: std::str::FromStr>(row: &BTreeMap<String, String>, key: &str) -> Result<T> {
    row.get(key)
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::Parse { line: 0, msg: format!("bad or missing `{key}` field") })
}

type CurveKey = (CurveSource, LossKind, MixScheme);
/// Curves by name, each with its `(K, loss)` points.
type Curves = BTreeMap<String, (CurveKey, Vec<(usize, f64)>)>;
/// Per-curve `(m, loss)` points at the K used for choosing m.
type CurvesOverM = BTreeMap<String, (CurveKey, Vec<(f64, f64)>, usize)>;

/// Loss-vs-K curves from one estimate file and, if present, one baseline file.
fn read_curves(cfg: &RunConfig, m: usize) -> Result<Curves> {
    let mut curves = Curves::new();
    let mut push = |key: CurveKey, k: usize, v: f64| {
        let name = format!("{}/{}/{}", key.0, key.1, key.2);
        curves.entry(name).or_insert_with(|| (key, Vec::new())).1.push((k, v));
    };
    for row in read_table_csv(&estimate_path(cfg, m))? {
        push((CurveSource::Analytical, field(&row, "loss")?, field(&row, "mix")?), field(&row, "K")?, field(&row, "G")?);
    }
    let base = baseline_path(cfg, m);
    if base.exists() {
        for row in read_table_csv(&base)? {
            let method: CurveSource = field(&row, "method")?;
            if method == CurveSource::GroundTruth {
                push((method, field(&row, "loss")?, field(&row, "mix")?), field(&row, "K")?, field(&row, "mean")?);
            }
        }
    }
    for (_, points) in curves.values_mut() {
        points.sort_by_key(|(k, _)| *k);
    }
    Ok(curves)
}

/// Expected loss of one classifier trained on all training data.
fn full_data_loss(cfg: &RunConfig, loss: LossKind) -> Result<Option<f64>> {
    let Some((train, eval)) = load_data(cfg)? else {
        return Ok(None);
    };
    let all: Vec<usize> = (0..train.n()).collect();
    let fit = train_logreg(&train, &all, &LogregParams::for_bite_size(train.n()))?;
    let link = cfg.link_for(loss);
    let total = (0..eval.n())
        .map(|i| eval_loss(loss, eval.y(i), link.apply(fit.model.score(eval.x(i)))))
        .sum::<Result<f64>>()?;
    Ok(Some(total / eval.n() as f64))
}

fn error_record(rule: &'static str, e: &Error) -> serde_json::Value {
    json!({ "rule": rule, "error": e.to_string() })
}

pub fn advise(cfg: &RunConfig) -> Result<()> {
    let m_values = match &cfg.data {
        DataSource::Scores { path } => vec![import_scores(path)?.meta.m],
        _ => cfg.m_values.clone(),
    };
    if m_values.iter().any(|&m| !estimate_path(cfg, m).exists()) {
        info!("estimate outputs missing, running estimation first");
        estimate(cfg)?;
    }
    let mut records = Vec::new();
    let mut at_k = CurvesOverM::new();
    for &m in &m_values {
        let curves = read_curves(cfg, m)?;
        for (name, (key, points)) in &curves {
            let (ks, losses): (Vec<usize>, Vec<f64>) = points.iter().copied().unzip();
            let record = CurveOverK::new(ks.clone(), losses, key.0, key.1, key.2)
                .and_then(|c| advisor::choose_k_record(&c, cfg.advise.tau));
            records.push(tag(record, "choose_k", m));
            let k_used = cfg.advise.k.unwrap_or(*ks.last().unwrap());
            if let Some(&(_, v)) = points.iter().find(|(k, _)| *k == k_used) {
                at_k.entry(name.clone()).or_insert_with(|| (*key, Vec::new(), k_used)).1.push((m as f64, v));
            }
        }
        for source in [CurveSource::Analytical, CurveSource::GroundTruth] {
            for &loss in &cfg.losses {
                let find = |mix: MixScheme| curves.get(&format!("{source}/{loss}/{mix}"));
                let (Some((_, pm)), Some((_, vote))) = (find(MixScheme::ParameterMixing), find(MixScheme::Voting)) else {
                    continue;
                };
                let k_used = cfg.advise.k.unwrap_or(pm.last().unwrap().0);
                let value = |pts: &Vec<(usize, f64)>| pts.iter().find(|(k, _)| *k == k_used).map(|p| p.1);
                if let (Some(g_pm), Some(g_vote)) = (value(pm), value(vote)) {
                    let record = advisor::compare_mix_record(g_pm, g_vote, cfg.advise.band);
                    let mut v = tag(record, "compare_mix", m);
                    v["source"] = json!(source.to_string());
                    v["loss"] = json!(loss.to_string());
                    v["k"] = json!(k_used);
                    records.push(v);
                }
            }
        }
    }
    if m_values.len() >= 2 {
        let mut targets: BTreeMap<String, Option<f64>> = BTreeMap::new();
        for (key, points, k_used) in at_k.values() {
            let target = match cfg.advise.target {
                Some(t) => Some(t),
                None => match targets.get(&key.1.to_string()) {
                    Some(t) => *t,
                    None => {
                        let t = full_data_loss(cfg, key.1)?;
                        targets.insert(key.1.to_string(), t);
                        t
                    }
                },
            };
            let Some(target) = target else {
                warn!("no target loss for choose_m; set [advise] target");
                continue;
            };
            let mut v = match advisor::choose_m_record(points, target, *k_used) {
                Ok(r) => r.to_json(),
                Err(e) => error_record("choose_m", &e),
            };
            v["source"] = json!(key.0.to_string());
            v["loss"] = json!(key.1.to_string());
            v["mix"] = json!(key.2.to_string());
            records.push(v);
        }
    }
    let doc = json!({
        "tool": "bitewise",
        "version": VERSION,
        "config_digest": cfg.digest(),
        "decisions": records,
    });
    let text = serde_json::to_string_pretty(&doc).expect("json values serialize") + "\n";
    write_output(&cfg.out.join("decisions.json"), &text)
}

fn tag(record: Result<DecisionRecord>, rule: &'static str, m: usize) -> serde_json::Value {
    let mut v = match record {
        Ok(r) => r.to_json(),
        Err(e) => error_record(rule, &e),
    };
    v["m"] = json!(m);
    v
}
