//! INI-style run configuration.
//!
//! Grammar: `[section]` headers, `key = value` lines, `#` or `;` comments,
//! comma-separated lists. Unknown sections or keys are errors.

use std::path::Path;

use crate::error::{Error, Result};
use crate::estimators::RegularizationSpec;
use crate::evaluate::{EvalConfig, Method};
use crate::forest::SubspaceMode;
use crate::synth::{shifted_means, ContaminationSpec, CovKind, CovSpec, SimDesign};

/// Axes of the simulation grid; cells are their Cartesian product.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub epsilon: Vec<f64>,
    pub kappa: Vec<f64>,
    pub rho: Vec<f64>,
    pub p: Vec<usize>,
    pub g: Vec<usize>,
}

impl Default for Grid {
    fn default() -> Self {
        Self { epsilon: vec![0.0], kappa: vec![9.0], rho: vec![0.0], p: vec![10], g: vec![2] }
    }
}

/// Fixed parts of every generated design.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignDefaults {
    pub n_per_class: usize,
    pub delta: f64,
    pub eta: f64,
    pub tau: f64,
    pub cov: CovKind,
}

impl Default for DesignDefaults {
    fn default() -> Self {
        Self { n_per_class: 30, delta: 2.0, eta: 3.0, tau: 1.0, cov: CovKind::Equicorrelation }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub grid: Grid,
    pub design: DesignDefaults,
    pub eval: EvalConfig,
    pub output_dir: Option<String>,
}

/// One point of the grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub epsilon: f64,
    pub kappa: f64,
    pub rho: f64,
    pub p: usize,
    pub g: usize,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut section = String::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| Error::Config { line: line_no, message: format!("unterminated section header {line:?}") })?;
                section = name.trim().to_string();
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config { line: line_no, message: format!("expected key = value, got {line:?}") })?;
            cfg.set(&section, key.trim(), value.trim())
                .map_err(|message| Error::Config { line: line_no, message })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, section: &str, key: &str, value: &str) -> std::result::Result<(), String> {
        let e = &mut self.eval;
        let mc = &mut e.method_config;
        match (section, key) {
            ("grid", "epsilon") => self.grid.epsilon = list(value)?,
            ("grid", "kappa") => self.grid.kappa = list(value)?,
            ("grid", "rho") => self.grid.rho = list(value)?,
            ("grid", "p") => self.grid.p = list(value)?,
            ("grid", "G") => self.grid.g = list(value)?,
            ("design", "n_per_class") => self.design.n_per_class = one(value)?,
            ("design", "delta") => self.design.delta = one(value)?,
            ("design", "eta") => self.design.eta = one(value)?,
            ("design", "tau") => self.design.tau = one(value)?,
            ("design", "cov") => {
                self.design.cov = CovKind::parse(value).ok_or_else(|| format!("unknown covariance kind {value:?}"))?
            }
            ("eval", "R") => e.replications = one(value)?,
            ("eval", "train_fraction") => e.train_fraction = one(value)?,
            ("eval", "master_seed") => e.master_seed = one(value)?,
            ("eval", "methods") => e.methods = Method::parse_list(value).map_err(|err| err.to_string())?,
            ("eval", "fixed_dataset") => e.fixed_dataset = one(value)?,
            ("eval", "timing") => e.timing = one(value)?,
            ("forest", "B") => mc.forest.n_trees = one(value)?,
            ("forest", "d_mode") => {
                mc.forest.subspace = SubspaceMode::parse(value).ok_or_else(|| format!("unknown d_mode {value:?}"))?
            }
            ("forest", "max_depth") => mc.tree.max_depth = one(value)?,
            ("forest", "min_leaf") => mc.tree.min_leaf = one(value)?,
            ("estimators", "huber_c") => mc.pp.univariate.huber_c = one(value)?,
            ("estimators", "mcd_starts") => mc.linda.n_starts = one(value)?,
            ("estimators", "pp_random_directions") => mc.pp.n_random = one(value)?,
            ("estimators", "pp_refine_rounds") => mc.pp.refine_rounds = one(value)?,
            ("regularization", "lda") => mc.lda_regularization = regularization(value)?,
            ("regularization", "linda") => mc.linda.regularization = regularization(value)?,
            ("simca", "variance_retained") => mc.simca_variance = one(value)?,
            ("simca", "trim") => mc.simca_trim = one(value)?,
            ("output", "dir") => self.output_dir = Some(value.to_string()),
            ("", _) => return Err(format!("key {key:?} appears before any section")),
            _ => return Err(format!("unknown key {key:?} in section [{section}]")),
        }
        Ok(())
    }

    /// Checks every value against the preconditions of the module that
    /// consumes it, before any work starts.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::invalid(m));
        let g = &self.grid;
        if g.epsilon.is_empty() || g.kappa.is_empty() || g.rho.is_empty() || g.p.is_empty() || g.g.is_empty() {
            return bad("every grid axis needs at least one value".into());
        }
        if let Some(e) = g.epsilon.iter().find(|e| !(0.0..=1.0).contains(*e)) {
            return bad(format!("epsilon {e} outside [0, 1]"));
        }
        if let Some(k) = g.kappa.iter().find(|k| !(**k > 0.0 && k.is_finite())) {
            return bad(format!("kappa {k} must be positive"));
        }
        if let Some(k) = g.g.iter().find(|k| **k < 2) {
            return bad(format!("G = {k} needs at least 2 classes"));
        }
        if g.p.contains(&0) {
            return bad("p must be at least 1".into());
        }
        for cell in self.cells() {
            self.design_for(&cell, 0).validate()?;
        }
        self.eval.validate()?;
        self.eval.method_config.linda.regularization.validate()?;
        self.eval.method_config.lda_regularization.validate()?;
        let mc = &self.eval.method_config;
        if mc.forest.n_trees == 0 || mc.tree.max_depth == 0 || mc.tree.min_leaf == 0 {
            return bad("B, max_depth and min_leaf must be at least 1".into());
        }
        if !(mc.simca_variance > 0.0 && mc.simca_variance <= 1.0) || !(0.0..1.0).contains(&mc.simca_trim) {
            return bad("simca variance_retained must be in (0, 1] and trim in [0, 1)".into());
        }
        if mc.linda.n_starts == 0 {
            return bad("mcd_starts must be at least 1".into());
        }
        Ok(())
    }

    /// Grid cells with epsilon varying slowest and G fastest.
    pub fn cells(&self) -> Vec<Cell> {
        let g = &self.grid;
        let mut out = Vec::with_capacity(g.epsilon.len() * g.kappa.len() * g.rho.len() * g.p.len() * g.g.len());
        for &epsilon in &g.epsilon {
            for &kappa in &g.kappa {
                for &rho in &g.rho {
                    for &p in &g.p {
                        for &classes in &g.g {
                            out.push(Cell { epsilon, kappa, rho, p, g: classes });
                        }
                    }
                }
            }
        }
        out
    }

    pub fn design_for(&self, cell: &Cell, seed: u64) -> SimDesign {
        let d = &self.design;
        SimDesign {
            n_classes: cell.g,
            p: cell.p,
            n_per_class: vec![d.n_per_class; cell.g],
            class_means: shifted_means(cell.g, cell.p, d.delta),
            cov: CovSpec { kind: d.cov, tau: d.tau, rho: cell.rho, p: cell.p },
            contamination: ContaminationSpec::constant_shift(cell.epsilon, d.eta, cell.kappa, cell.p),
            seed,
        }
    }

    /// The configuration with every default written out; parsing the result
    /// gives back an equal configuration.
    pub fn to_ini(&self) -> String {
        let join = |v: &[String]| v.join(", ");
        let f = |v: &[f64]| join(&v.iter().map(|x| x.to_string()).collect::<Vec<_>>());
        let u = |v: &[usize]| join(&v.iter().map(|x| x.to_string()).collect::<Vec<_>>());
        let e = &self.eval;
        let mc = &e.method_config;
        let mut s = String::new();
        s += "[grid]\n";
        s += &format!("epsilon = {}\nkappa = {}\nrho = {}\np = {}\nG = {}\n", f(&self.grid.epsilon), f(&self.grid.kappa), f(&self.grid.rho), u(&self.grid.p), u(&self.grid.g));
        s += "\n[design]\n";
        s += &format!(
            "n_per_class = {}\ndelta = {}\neta = {}\ntau = {}\ncov = {}\n",
            self.design.n_per_class,
            self.design.delta,
            self.design.eta,
            self.design.tau,
            self.design.cov.name()
        );
        s += "\n[eval]\n";
        s += &format!(
            "R = {}\ntrain_fraction = {}\nmaster_seed = {}\nmethods = {}\nfixed_dataset = {}\ntiming = {}\n",
            e.replications,
            e.train_fraction,
            e.master_seed,
            join(&e.methods.iter().map(|m| m.to_string()).collect::<Vec<_>>()),
            e.fixed_dataset,
            e.timing
        );
        s += "\n[forest]\n";
        s += &format!(
            "B = {}\nd_mode = {}\nmax_depth = {}\nmin_leaf = {}\n",
            mc.forest.n_trees,
            mc.forest.subspace.describe(),
            mc.tree.max_depth,
            mc.tree.min_leaf
        );
        s += "\n[estimators]\n";
        s += &format!(
            "huber_c = {}\nmcd_starts = {}\npp_random_directions = {}\npp_refine_rounds = {}\n",
            mc.pp.univariate.huber_c, mc.linda.n_starts, mc.pp.n_random, mc.pp.refine_rounds
        );
        s += "\n[regularization]\n";
        s += &format!("lda = {}\nlinda = {}\n", mc.lda_regularization.describe(), mc.linda.regularization.describe());
        s += "\n[simca]\n";
        s += &format!("variance_retained = {}\ntrim = {}\n", mc.simca_variance, mc.simca_trim);
        if let Some(dir) = &self.output_dir {
            s += &format!("\n[output]\ndir = {dir}\n");
        }
        s
    }
}

fn one<T: std::str::FromStr>(v: &str) -> std::result::Result<T, String> {
    v.trim().parse().map_err(|_| format!("cannot parse {v:?}"))
}

fn list<T: std::str::FromStr>(v: &str) -> std::result::Result<Vec<T>, String> {
    v.split(',').map(one).collect()
}

fn regularization(v: &str) -> std::result::Result<RegularizationSpec, String> {
    let spec = match v.split_once(':') {
        None if v == "none" => RegularizationSpec::None,
        Some(("ridge", x)) => RegularizationSpec::Ridge { lambda: one(x)? },
        Some(("convex", x)) => RegularizationSpec::Convex { alpha: one(x)? },
        _ => return Err(format!("unknown regularization {v:?}; use none, ridge:<lambda> or convex:<alpha>")),
    };
    spec.validate().map_err(|e| e.to_string())?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_all_defaults() {
        let c = RunConfig::parse("").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.cells().len(), 1);
    }

    #[test]
    fn grid_expands_to_product() {
        let c = RunConfig::parse("[grid]\nepsilon = 0, 0.05, 0.15\nkappa = 9, 25\nrho=0,0.75\np = 5\nG = 2,3\n").unwrap();
        assert_eq!(c.cells().len(), 3 * 2 * 2 * 2);
        assert_eq!(c.cells()[0], Cell { epsilon: 0.0, kappa: 9.0, rho: 0.0, p: 5, g: 2 });
        assert_eq!(c.cells()[1].g, 3);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = RunConfig::parse("[eval]\nR = 5\n\nbogus = 1\n").unwrap_err();
        assert!(matches!(err, Error::Config { line: 4, .. }), "{err}");
        let err = RunConfig::parse("[grid]\np = ten\n").unwrap_err();
        assert!(matches!(err, Error::Config { line: 2, .. }));
        let err = RunConfig::parse("[eval\n").unwrap_err();
        assert!(matches!(err, Error::Config { line: 1, .. }));
        let err = RunConfig::parse("[eval]\nmethods = lda, qda\n").unwrap_err();
        assert!(err.to_string().contains("qda"));
    }

    #[test]
    fn out_of_range_values_are_rejected() {
        assert!(RunConfig::parse("[grid]\nepsilon = 0, 1.5\n").is_err());
        assert!(RunConfig::parse("[grid]\nG = 1\n").is_err());
        assert!(RunConfig::parse("[grid]\nrho = 1.0\n").is_err());
        assert!(RunConfig::parse("[eval]\nR = 0\n").is_err());
        assert!(RunConfig::parse("[regularization]\nlda = ridge:-1\n").is_err());
    }

    #[test]
    fn resolved_config_round_trips() {
        let text = "[grid]\nepsilon = 0.05\nkappa = 25, 100\n[eval]\nR = 7\nmethods = rf, pp-mad\nmaster_seed = 99\n\
                    [forest]\nd_mode = fixed:3\nB = 40\n[regularization]\nlda = convex:0.5\n[design]\ncov = ar1\n";
        let c = RunConfig::parse(text).unwrap();
        let again = RunConfig::parse(&c.to_ini()).unwrap();
        assert_eq!(c, again);
        assert_eq!(RunConfig::parse(&RunConfig::default().to_ini()).unwrap(), RunConfig::default());
    }
}
