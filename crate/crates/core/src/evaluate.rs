//! Replicated train/test evaluation and multi-method comparison reports.

use std::collections::hash_map::DefaultHasher;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

use crate::classifiers::{
    dda_fit, lda_fit, linda_fit, pp_fit_with, rsimca_fit, Classifier, LindaConfig, PPSearchConfig,
};
use crate::dataset::{split_indices, LabeledDataset, SplitIndices, SplitPlan};
use crate::error::{Error, Result};
use crate::estimators::{RegularizationSpec, UnivariateKind};
use crate::forest::{rsl_fit, ForestConfig, TreeConfig};
use crate::seed::derive_seed;
use crate::synth::{design_name, DesignSampler, SimDesign};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Lda,
    Linda,
    Dda,
    PpClass,
    PpHuber,
    PpMad,
    PpSest,
    Rsimca,
    Rf,
}

impl Method {
    pub const ALL: [Method; 9] = [
        Method::Lda,
        Method::Linda,
        Method::Dda,
        Method::PpClass,
        Method::PpHuber,
        Method::PpMad,
        Method::PpSest,
        Method::Rsimca,
        Method::Rf,
    ];

    pub const PP: [Method; 4] = [Method::PpClass, Method::PpHuber, Method::PpMad, Method::PpSest];

    pub fn name(self) -> &'static str {
        match self {
            Method::Lda => "lda",
            Method::Linda => "linda",
            Method::Dda => "dda",
            Method::PpClass => "pp-class",
            Method::PpHuber => "pp-huber",
            Method::PpMad => "pp-mad",
            Method::PpSest => "pp-sest",
            Method::Rsimca => "rsimca",
            Method::Rf => "rf",
        }
    }

    fn ordinal(self) -> u64 {
        Method::ALL.iter().position(|&m| m == self).unwrap() as u64
    }

    /// Parses a comma-separated method list.
    pub fn parse_list(s: &str) -> Result<Vec<Method>> {
        let methods: Vec<Method> = s
            .split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(str::parse)
            .collect::<Result<_>>()?;
        if methods.is_empty() {
            return Err(Error::invalid("empty method list"));
        }
        Ok(methods)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::UnknownMethod(s.to_string()))
    }
}

/// Tuning shared by every method; per-fit seeds are filled in by the harness.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodConfig {
    pub lda_regularization: RegularizationSpec,
    pub linda: LindaConfig,
    pub pp: PPSearchConfig,
    pub simca_variance: f64,
    pub simca_trim: f64,
    pub forest: ForestConfig,
    pub tree: TreeConfig,
}

impl Default for MethodConfig {
    fn default() -> Self {
        Self {
            lda_regularization: RegularizationSpec::None,
            linda: LindaConfig::default(),
            pp: PPSearchConfig::default(),
            simca_variance: 0.90,
            simca_trim: 0.25,
            forest: ForestConfig::default(),
            tree: TreeConfig::default(),
        }
    }
}

pub fn fit_method(method: Method, train: &LabeledDataset, cfg: &MethodConfig, seed: u64) -> Result<Box<dyn Classifier>> {
    let pp = |kind| -> Result<Box<dyn Classifier>> {
        Ok(Box::new(pp_fit_with(train, kind, &PPSearchConfig { seed, ..cfg.pp })?))
    };
    Ok(match method {
        Method::Lda => Box::new(lda_fit(train, cfg.lda_regularization)?),
        Method::Linda => Box::new(linda_fit(train, &LindaConfig { seed, ..cfg.linda })?),
        Method::Dda => Box::new(dda_fit(train)?),
        Method::PpClass => return pp(UnivariateKind::Classical),
        Method::PpHuber => return pp(UnivariateKind::Huber),
        Method::PpMad => return pp(UnivariateKind::MedianMad),
        Method::PpSest => return pp(UnivariateKind::SEstimator),
        Method::Rsimca => Box::new(rsimca_fit(train, cfg.simca_variance, cfg.simca_trim)?),
        Method::Rf => Box::new(rsl_fit(train, &ForestConfig { seed, ..cfg.forest }, &cfg.tree)?),
    })
}

pub fn zero_one_loss(y: usize, yhat: usize) -> u8 {
    u8::from(y != yhat)
}

/// Mean zero-one loss of `model` over every row of `data`.
pub fn misclassification_rate(model: &dyn Classifier, data: &LabeledDataset) -> Result<f64> {
    if data.n_rows() == 0 {
        return Err(Error::invalid("cannot score an empty dataset"));
    }
    let mut wrong = 0usize;
    for i in 0..data.n_rows() {
        wrong += zero_one_loss(data.labels()[i], model.predict(&data.row(i))?) as usize;
    }
    Ok(wrong as f64 / data.n_rows() as f64)
}

/// Training-set error of `method` fitted on `train`.
pub fn apparent_error(method: Method, train: &LabeledDataset, cfg: &MethodConfig, seed: u64) -> Result<f64> {
    let model = fit_method(method, train, cfg, seed)?;
    misclassification_rate(model.as_ref(), train)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub replications: usize,
    pub train_fraction: f64,
    pub master_seed: u64,
    pub methods: Vec<Method>,
    /// Re-split one generated dataset instead of drawing fresh data for
    /// every replication of a synthetic source.
    pub fixed_dataset: bool,
    /// Record wall-clock fit and predict time; off keeps reports
    /// reproducible byte for byte.
    pub timing: bool,
    pub method_config: MethodConfig,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            replications: 200,
            train_fraction: 2.0 / 3.0,
            master_seed: 0,
            methods: Method::ALL.to_vec(),
            fixed_dataset: false,
            timing: false,
            method_config: MethodConfig::default(),
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::invalid("R must be at least 1"));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::invalid(format!("train fraction {} outside (0, 1)", self.train_fraction)));
        }
        if self.methods.is_empty() {
            return Err(Error::invalid("no methods requested"));
        }
        Ok(())
    }
}

/// Where replication data comes from.
#[derive(Debug, Clone)]
pub enum Source {
    Dataset(LabeledDataset),
    Design(SimDesign),
}

impl Source {
    pub fn name(&self) -> String {
        match self {
            Source::Dataset(d) => d.name.clone(),
            Source::Design(d) => design_name(d),
        }
    }

    fn shape(&self) -> (usize, usize, usize) {
        match self {
            Source::Dataset(d) => (d.n_rows(), d.n_features(), d.n_classes()),
            Source::Design(d) => (d.n_total(), d.p, d.n_classes),
        }
    }
}

enum Prepared {
    Fixed(LabeledDataset),
    Fresh(DesignSampler),
}

impl Prepared {
    fn new(source: &Source, cfg: &EvalConfig) -> Result<Self> {
        Ok(match source {
            Source::Dataset(d) => Prepared::Fixed(d.clone()),
            Source::Design(d) if cfg.fixed_dataset => Prepared::Fixed(DesignSampler::new(d)?.generate()),
            Source::Design(d) => Prepared::Fresh(DesignSampler::new(d)?),
        })
    }

    fn data(&self, r: usize, master_seed: u64) -> std::borrow::Cow<'_, LabeledDataset> {
        match self {
            Prepared::Fixed(d) => std::borrow::Cow::Borrowed(d),
            Prepared::Fresh(s) => std::borrow::Cow::Owned(s.generate_seeded(derive_seed(master_seed, r as u64)).0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodOutcome {
    pub method: Method,
    pub test_error: Option<f64>,
    pub apparent_error: Option<f64>,
    pub error: Option<String>,
    pub runtime_ms: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationResult {
    pub replication_index: usize,
    /// Hash of the train/test index sets every method saw.
    pub split_hash: u64,
    pub outcomes: Vec<MethodOutcome>,
}

pub fn split_hash(idx: &SplitIndices) -> u64 {
    let mut h = DefaultHasher::new();
    idx.hash(&mut h);
    h.finish()
}

fn run_method(method: Method, train: &LabeledDataset, test: &LabeledDataset, cfg: &EvalConfig, seed: u64) -> MethodOutcome {
    let start = Instant::now();
    let result = fit_method(method, train, &cfg.method_config, derive_seed(seed, method.ordinal())).and_then(|m| {
        let test_error = misclassification_rate(m.as_ref(), test)?;
        let apparent = misclassification_rate(m.as_ref(), train)?;
        Ok((test_error, apparent))
    });
    let runtime_ms = if cfg.timing { start.elapsed().as_millis() as u64 } else { 0 };
    match result {
        Ok((t, a)) => MethodOutcome { method, test_error: Some(t), apparent_error: Some(a), error: None, runtime_ms },
        Err(e) => MethodOutcome { method, test_error: None, apparent_error: None, error: Some(e.to_string()), runtime_ms },
    }
}

/// Runs all replications of `source` for every configured method. Each
/// replication fits every method on the same split.
pub fn run_replications(source: &Source, cfg: &EvalConfig) -> Result<Vec<ReplicationResult>> {
    cfg.validate()?;
    let prepared = Prepared::new(source, cfg)?;
    (0..cfg.replications)
        .into_par_iter()
        .map(|r| {
            let data = prepared.data(r, cfg.master_seed);
            let plan = SplitPlan { train_fraction: cfg.train_fraction, seed: cfg.master_seed, replication_index: r as u64 };
            let idx = split_indices(&data, &plan)?;
            let train = data.subset(&idx.train)?;
            let test = data.subset(&idx.test)?;
            let outcomes = cfg
                .methods
                .iter()
                .map(|&m| run_method(m, &train, &test, cfg, plan.replication_seed()))
                .collect();
            Ok(ReplicationResult { replication_index: r, split_hash: split_hash(&idx), outcomes })
        })
        .collect()
}

/// Mean and sample standard deviation of the successful replications.
#[derive(Debug, Clone, PartialEq)]
pub struct AvteSummary {
    pub mean: Option<f64>,
    pub sd: Option<f64>,
    /// Set when fewer than two replications succeeded, so `sd` is reported
    /// as 0 by convention.
    pub sd_undefined: bool,
    pub apparent_mean: Option<f64>,
    pub failure_count: usize,
    pub trace: Vec<Option<f64>>,
    pub runtime_ms: u64,
    pub first_error: Option<String>,
}

fn summarize(outcomes: &[&MethodOutcome]) -> AvteSummary {
    let trace: Vec<Option<f64>> = outcomes.iter().map(|o| o.test_error).collect();
    let ok: Vec<f64> = trace.iter().flatten().copied().collect();
    let app: Vec<f64> = outcomes.iter().filter_map(|o| o.apparent_error).collect();
    let mean_of = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
    let mean = mean_of(&ok);
    let sd = mean.map(|m| {
        if ok.len() < 2 {
            0.0
        } else {
            (ok.iter().map(|e| (e - m).powi(2)).sum::<f64>() / (ok.len() - 1) as f64).sqrt()
        }
    });
    AvteSummary {
        mean,
        sd,
        sd_undefined: ok.len() < 2,
        apparent_mean: mean_of(&app),
        failure_count: trace.len() - ok.len(),
        trace,
        runtime_ms: outcomes.iter().map(|o| o.runtime_ms).sum(),
        first_error: outcomes.iter().find_map(|o| o.error.clone()),
    }
}

/// Average test error of one method over `cfg.replications` splits.
pub fn avte(method: Method, source: &Source, cfg: &EvalConfig) -> Result<AvteSummary> {
    let cfg = EvalConfig { methods: vec![method], ..cfg.clone() };
    let reps = run_replications(source, &cfg)?;
    let outcomes: Vec<&MethodOutcome> = reps.iter().map(|r| &r.outcomes[0]).collect();
    let s = summarize(&outcomes);
    match s.mean {
        Some(_) => Ok(s),
        None => Err(Error::invalid(format!(
            "{method} failed in all {} replications: {}",
            cfg.replications,
            s.first_error.unwrap_or_default()
        ))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Marker {
    Best,
    Worst,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkReport {
    pub source: String,
    pub method: Method,
    pub n: usize,
    pub p: usize,
    pub g: usize,
    pub epsilon: Option<f64>,
    pub kappa: Option<f64>,
    pub rho: Option<f64>,
    pub replications: usize,
    pub summary: AvteSummary,
    pub marker: Option<Marker>,
    pub split_hashes: Vec<u64>,
}

/// One report row per (source, method), in that order.
pub fn compare(sources: &[Source], cfg: &EvalConfig) -> Result<Vec<BenchmarkReport>> {
    if sources.is_empty() {
        return Err(Error::invalid("no sources to compare"));
    }
    cfg.validate()?;
    let mut rows = Vec::with_capacity(sources.len() * cfg.methods.len());
    for source in sources {
        rows.extend(compare_source(source, cfg)?);
    }
    Ok(rows)
}

fn compare_source(source: &Source, cfg: &EvalConfig) -> Result<Vec<BenchmarkReport>> {
    let reps = run_replications(source, cfg)?;
    let (n, p, g) = source.shape();
    let (epsilon, kappa, rho) = match source {
        Source::Design(d) => (Some(d.contamination.epsilon), Some(d.contamination.kappa), Some(d.cov.rho)),
        Source::Dataset(_) => (None, None, None),
    };
    let split_hashes: Vec<u64> = reps.iter().map(|r| r.split_hash).collect();
    let mut rows: Vec<BenchmarkReport> = cfg
        .methods
        .iter()
        .enumerate()
        .map(|(j, &method)| {
            let outcomes: Vec<&MethodOutcome> = reps.iter().map(|r| &r.outcomes[j]).collect();
            BenchmarkReport {
                source: source.name(),
                method,
                n,
                p,
                g,
                epsilon,
                kappa,
                rho,
                replications: cfg.replications,
                summary: summarize(&outcomes),
                marker: None,
                split_hashes: split_hashes.clone(),
            }
        })
        .collect();
    mark_extremes(&mut rows);
    Ok(rows)
}

/// Flags the lowest and highest mean test error among methods that
/// succeeded at least once; ties share the marker.
fn mark_extremes(rows: &mut [BenchmarkReport]) {
    let means: Vec<f64> = rows.iter().filter_map(|r| r.summary.mean).collect();
    let (Some(lo), Some(hi)) = (means.iter().copied().reduce(f64::min), means.iter().copied().reduce(f64::max)) else {
        return;
    };
    for r in rows.iter_mut() {
        r.marker = match r.summary.mean {
            Some(m) if m == lo => Some(Marker::Best),
            Some(m) if m == hi && hi > lo => Some(Marker::Worst),
            _ => None,
        };
    }
}

pub const REPORT_COLUMNS: [&str; 18] = [
    "source",
    "method",
    "n",
    "p",
    "G",
    "epsilon",
    "kappa",
    "rho",
    "R",
    "avte_mean",
    "avte_sd",
    "apparent_mean",
    "failure_count",
    "runtime_ms",
    "avte_mean_raw",
    "avte_sd_raw",
    "apparent_mean_raw",
    "marker",
];

fn pct(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".into(), |x| format!("{:.2}", 100.0 * x))
}

fn raw(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".into(), |x| format!("{x:.17e}"))
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".into(), |x| x.to_string())
}

/// Writes the report CSV. Percent columns carry two decimals; the `_raw`
/// columns carry the fractions at full precision.
pub fn write_report_csv<W: Write>(rows: &[BenchmarkReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(REPORT_COLUMNS).map_err(csv_err)?;
    for r in rows {
        let s = &r.summary;
        let marker = match r.marker {
            Some(Marker::Best) => "best",
            Some(Marker::Worst) => "worst",
            None => "",
        };
        w.write_record([
            r.source.clone(),
            r.method.to_string(),
            r.n.to_string(),
            r.p.to_string(),
            r.g.to_string(),
            opt(r.epsilon),
            opt(r.kappa),
            opt(r.rho),
            r.replications.to_string(),
            pct(s.mean),
            pct(s.sd),
            pct(s.apparent_mean),
            s.failure_count.to_string(),
            s.runtime_ms.to_string(),
            raw(s.mean),
            raw(s.sd),
            raw(s.apparent_mean),
            marker.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Csv(e.to_string()))
}

/// Long-format per-replication test errors: `source,method,replication,test_error`.
pub fn write_plot_csv<W: Write>(rows: &[BenchmarkReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["source", "method", "replication", "test_error"]).map_err(csv_err)?;
    for r in rows {
        for (i, e) in r.summary.trace.iter().enumerate() {
            w.write_record([r.source.clone(), r.method.to_string(), (i + 1).to_string(), raw(*e)])
                .map_err(csv_err)?;
        }
    }
    w.flush().map_err(|e| Error::Csv(e.to_string()))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Csv(e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, shifted_means};
    use nalgebra::DMatrix;

    struct Constant(usize, usize);

    impl Classifier for Constant {
        fn n_features(&self) -> usize {
            self.1
        }
        fn predict(&self, _: &[f64]) -> Result<usize> {
            Ok(self.0)
        }
    }

    fn separated(n: usize, seed: u64) -> SimDesign {
        SimDesign {
            class_means: shifted_means(2, 3, 20.0),
            ..SimDesign::default_layout(vec![n, n], 3, 0.0, 0.0, 1.0, seed)
        }
    }

    fn quick(methods: Vec<Method>, r: usize) -> EvalConfig {
        let mut cfg = EvalConfig { replications: r, methods, master_seed: 11, ..Default::default() };
        cfg.method_config.forest.n_trees = 25;
        cfg.method_config.linda.n_starts = 50;
        cfg
    }

    #[test]
    fn losses() {
        assert_eq!(zero_one_loss(2, 2), 0);
        assert_eq!(zero_one_loss(1, 3), 1);
        let mean = [(1, 1), (1, 2)].iter().map(|&(a, b)| zero_one_loss(a, b) as f64).sum::<f64>() / 2.0;
        assert_eq!(mean, 0.5);
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!(matches!("qda".parse::<Method>(), Err(Error::UnknownMethod(_))));
        assert_eq!(Method::parse_list("lda, rf").unwrap(), vec![Method::Lda, Method::Rf]);
    }

    #[test]
    fn apparent_error_examples() {
        let d = generate(&separated(20, 1)).unwrap();
        assert_eq!(apparent_error(Method::Lda, &d, &MethodConfig::default(), 0).unwrap(), 0.0);
        assert_eq!(misclassification_rate(&Constant(1, 3), &d).unwrap(), 0.5);
        let wide = generate(&SimDesign::default_layout(vec![10, 10], 20, 0.0, 0.0, 1.0, 1)).unwrap();
        let err = apparent_error(Method::Linda, &wide, &MethodConfig::default(), 0).unwrap_err();
        assert!(err.to_string().contains("p>h"));
    }

    #[test]
    fn perfect_classifier_has_zero_avte() {
        let s = avte(Method::Lda, &Source::Design(separated(15, 2)), &quick(vec![], 8)).unwrap();
        assert_eq!(s.mean, Some(0.0));
        assert_eq!(s.sd, Some(0.0));
        assert!(!s.sd_undefined);
    }

    #[test]
    fn single_replication_flags_sd() {
        let s = avte(Method::Dda, &Source::Design(separated(15, 2)), &quick(vec![], 1)).unwrap();
        assert_eq!(s.trace.len(), 1);
        assert_eq!(s.mean, s.trace[0]);
        assert_eq!(s.sd, Some(0.0));
        assert!(s.sd_undefined);
    }

    #[test]
    fn majority_predictor_on_sixty_forty() {
        // the test part of every split has 20 of 50 rows in the minority class
        let x = DMatrix::from_fn(150, 2, |i, j| ((i * 31 + j * 17) % 23) as f64);
        let labels: Vec<usize> = (0..150).map(|i| if i < 90 { 1 } else { 2 }).collect();
        let d = LabeledDataset::new("mix", x, labels).unwrap();
        let plan = SplitPlan::new(3, 0);
        let idx = split_indices(&d, &plan).unwrap();
        let test = d.subset(&idx.test).unwrap();
        let e = misclassification_rate(&Constant(1, 2), &test).unwrap();
        let se = (0.4f64 * 0.6 / test.n_rows() as f64).sqrt();
        assert!((e - 0.4).abs() <= 3.0 * se, "{e}");
    }

    #[test]
    fn failing_method_is_reported_not_fatal() {
        let wide = SimDesign::default_layout(vec![10, 10], 20, 0.0, 0.0, 1.0, 1);
        let cfg = quick(vec![Method::Linda, Method::Dda], 3);
        let rows = compare(&[Source::Design(wide.clone())], &cfg).unwrap();
        assert_eq!(rows[0].summary.failure_count, 3);
        assert_eq!(rows[0].summary.mean, None);
        assert!(rows[1].summary.mean.is_some());
        assert!(avte(Method::Linda, &Source::Design(wide), &cfg).is_err());
    }

    #[test]
    fn rows_follow_source_then_method_order() {
        let sources = [Source::Design(separated(12, 1)), Source::Design(separated(12, 2).with_seed(9))];
        let methods = vec![Method::Rf, Method::Lda, Method::Dda];
        let rows = compare(&sources, &quick(methods.clone(), 2)).unwrap();
        assert_eq!(rows.len(), 6);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.method, methods[i % 3]);
        }
        assert!(compare(&[], &quick(methods, 2)).is_err());
    }

    #[test]
    fn methods_share_splits() {
        let d = generate(&SimDesign::default_layout(vec![12, 12], 4, 0.3, 0.0, 1.0, 4)).unwrap();
        let cfg = quick(vec![Method::Lda, Method::Rf], 4);
        let a = compare(&[Source::Dataset(d.clone())], &cfg).unwrap();
        let b = compare(&[Source::Dataset(d)], &EvalConfig { methods: vec![Method::Dda], ..cfg }).unwrap();
        assert_eq!(a[0].split_hashes, a[1].split_hashes);
        assert_eq!(a[0].split_hashes, b[0].split_hashes);
        let distinct: std::collections::HashSet<_> = a[0].split_hashes.iter().collect();
        assert_eq!(distinct.len(), 4);
    }

    #[test]
    fn trace_mean_matches_report() {
        let cfg = quick(vec![Method::Dda, Method::PpMad], 6);
        let rows = compare(&[Source::Design(SimDesign::default_layout(vec![12, 12], 5, 0.5, 0.1, 9.0, 3))], &cfg).unwrap();
        for r in rows {
            let ok: Vec<f64> = r.summary.trace.iter().flatten().copied().collect();
            let m = ok.iter().sum::<f64>() / ok.len() as f64;
            assert!((m - r.summary.mean.unwrap()).abs() < 1e-12);
            assert_eq!(r.summary.failure_count + ok.len(), r.replications);
            assert!((0.0..=1.0).contains(&m));
        }
    }

    #[test]
    fn reports_are_reproducible() {
        let cfg = quick(vec![Method::Rf, Method::PpHuber, Method::Linda], 3);
        let src = [Source::Design(SimDesign::default_layout(vec![10, 10], 3, 0.2, 0.05, 25.0, 8))];
        let render = || {
            let rows = compare(&src, &cfg).unwrap();
            let mut report = Vec::new();
            let mut plot = Vec::new();
            write_report_csv(&rows, &mut report).unwrap();
            write_plot_csv(&rows, &mut plot).unwrap();
            (report, plot)
        };
        let first = render();
        assert_eq!(first, render());
        let text = String::from_utf8(first.0).unwrap();
        assert!(text.starts_with("source,method,n,p,G,epsilon,kappa,rho,R,avte_mean,avte_sd,apparent_mean,failure_count,runtime_ms"));
        assert_eq!(String::from_utf8(first.1).unwrap().lines().count(), 1 + 3 * 3);
    }

    #[test]
    fn markers_pick_extremes() {
        let cfg = quick(vec![Method::Lda, Method::Linda, Method::Dda], 2);
        let d = SimDesign::default_layout(vec![10, 10], 20, 0.0, 0.0, 1.0, 5);
        let rows = compare(&[Source::Design(d)], &cfg).unwrap();
        // lda and linda both fail at p = 20 > n, leaving dda as the only finite row
        assert_eq!(rows[2].marker, Some(Marker::Best));
        assert!(rows[0].marker.is_none() && rows[1].marker.is_none());
    }
}
