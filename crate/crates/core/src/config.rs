//! Line-oriented `key = value` scenario files.
//!
//! `#` starts a comment, lists are comma separated, unknown and duplicate
//! keys are rejected, and every problem found is reported at once.

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;

use thiserror::Error;

use crate::diagnostics::CheckKind;
use crate::kernels::{CoagKernel, DaughterDist, FragRate, KernelSpec, Table1d, Table2d};
use crate::solver::{InitialCondition, Scenario, StepControl};

/// A scenario plus optional convergence-study lists.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub scenario: Scenario,
    pub study_j: Vec<f64>,
    pub study_resolutions: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigIssue {
    pub line: Option<usize>,
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}: {}", self.key, self.message),
            None => write!(f, "{}: {}", self.key, self.message),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{} configuration error(s):\n{}", .0.len(), .0.iter().map(|e| format!("  {e}")).collect::<Vec<_>>().join("\n"))]
pub struct ConfigErrors(pub Vec<ConfigIssue>);

impl ConfigErrors {
    pub fn mentions(&self, key: &str) -> bool {
        self.0.iter().any(|e| e.key == key)
    }
}

const KEYS: &[&str] = &[
    "coag", "coag_alpha", "coag_beta", "coag_c", "coag_sizes", "coag_values",
    "frag", "frag_gamma", "frag_sizes", "frag_values",
    "nu", "m0", "delta",
    "x_min", "j", "cells_per_decade",
    "ic", "ic_mean", "ic_mass", "ic_size", "ic_p", "ic_cutoff", "ic_edges", "ic_density",
    "t_end", "cadence",
    "dt_init", "dt_max", "safety", "positivity_fraction", "negligible_mass",
    "checks", "checks_fatal", "tolerance", "allowance", "moment_order", "subgrid_threshold",
    "perturbation", "hypothesis_radius", "sample_budget",
    "study_j", "study_resolutions",
];

const REQUIRED: &[&str] = &["coag", "frag", "nu", "m0", "x_min", "j", "cells_per_decade", "ic", "t_end"];

/// Short decimal rendering for messages.
fn num(x: f64) -> String {
    let s = format!("{x:.10}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    s.to_string()
}

struct Reader {
    values: BTreeMap<String, (usize, String)>,
    issues: Vec<ConfigIssue>,
}

impl Reader {
    fn issue(&mut self, key: &str, message: impl Into<String>) {
        let line = self.values.get(key).map(|(l, _)| *l);
        self.issues.push(ConfigIssue { line, key: key.to_string(), message: message.into() });
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|(_, v)| v.as_str())
    }

    fn f64_opt(&mut self, key: &str) -> Option<f64> {
        let raw = self.raw(key)?.to_string();
        match raw.parse::<f64>() {
            Ok(v) if v.is_finite() => Some(v),
            _ => {
                self.issue(key, format!("expected a finite number, got `{raw}`"));
                None
            }
        }
    }

    fn f64_or(&mut self, key: &str, default: f64) -> f64 {
        if self.raw(key).is_none() {
            return default;
        }
        self.f64_opt(key).unwrap_or(default)
    }

    fn f64_req(&mut self, key: &str) -> Option<f64> {
        // a missing key is reported once by the required-key pass
        self.raw(key)?;
        self.f64_opt(key)
    }

    fn needed(&mut self, key: &str, context: &str) -> Option<f64> {
        if self.raw(key).is_none() {
            self.issue(key, format!("required when {context}"));
            return None;
        }
        self.f64_opt(key)
    }

    fn usize_opt(&mut self, key: &str) -> Option<usize> {
        let raw = self.raw(key)?.to_string();
        match raw.parse::<usize>() {
            Ok(v) => Some(v),
            Err(_) => {
                self.issue(key, format!("expected a nonnegative integer, got `{raw}`"));
                None
            }
        }
    }

    fn list(&mut self, key: &str) -> Option<Vec<f64>> {
        let raw = self.raw(key)?.to_string();
        let mut out = Vec::new();
        for part in raw.split(',') {
            match part.trim().parse::<f64>() {
                Ok(v) if v.is_finite() => out.push(v),
                _ => {
                    self.issue(key, format!("expected a comma-separated list of numbers, got `{raw}`"));
                    return None;
                }
            }
        }
        Some(out)
    }

    fn needed_list(&mut self, key: &str, context: &str) -> Option<Vec<f64>> {
        if self.raw(key).is_none() {
            self.issue(key, format!("required when {context}"));
            return None;
        }
        self.list(key)
    }

    fn bool_or(&mut self, key: &str, default: bool) -> bool {
        match self.raw(key) {
            None => default,
            Some("true") => true,
            Some("false") => false,
            Some(other) => {
                let msg = format!("expected true or false, got `{other}`");
                self.issue(key, msg);
                default
            }
        }
    }

    fn choice(&mut self, key: &str, options: &[&str]) -> Option<String> {
        let raw = self.raw(key)?.to_string();
        if options.contains(&raw.as_str()) {
            Some(raw)
        } else {
            self.issue(key, format!("expected one of {}, got `{raw}`", options.join(", ")));
            None
        }
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Config, ConfigErrors> {
        let mut r = Reader { values: BTreeMap::new(), issues: Vec::new() };
        for (idx, line) in text.lines().enumerate() {
            let lineno = idx + 1;
            let content = line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((k, v)) = content.split_once('=') else {
                r.issues.push(ConfigIssue {
                    line: Some(lineno),
                    key: content.to_string(),
                    message: "expected `key = value`".into(),
                });
                continue;
            };
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.contains(&k) {
                r.issues.push(ConfigIssue { line: Some(lineno), key: k.into(), message: "unknown key".into() });
                continue;
            }
            if let Some((first, _)) = r.values.get(k) {
                let message = format!("duplicate key (first set on line {first})");
                r.issues.push(ConfigIssue { line: Some(lineno), key: k.into(), message });
                continue;
            }
            r.values.insert(k.to_string(), (lineno, v.to_string()));
        }
        for key in REQUIRED {
            if r.raw(key).is_none() {
                r.issue(key, "missing required key");
            }
        }

        let nu = r.f64_req("nu");
        let m0 = r.f64_req("m0");
        let daughter = nu.and_then(|nu| match DaughterDist::new(nu) {
            Ok(d) => Some(d),
            Err(_) => {
                r.issue("nu", format!("nu = {} outside the range (-2, -1]", num(nu)));
                None
            }
        });

        let coag = match r.choice("coag", &["power_law_sum", "constant", "additive", "tabulated"]).as_deref() {
            Some("power_law_sum") => {
                let a = r.needed("coag_alpha", "coag = power_law_sum");
                let b = r.needed("coag_beta", "coag = power_law_sum");
                a.zip(b).map(|(alpha, beta)| CoagKernel::PowerLawSum { alpha, beta })
            }
            Some("constant") => r.needed("coag_c", "coag = constant").and_then(|c| {
                if c >= 0.0 {
                    Some(CoagKernel::Constant(c))
                } else {
                    r.issue("coag_c", "must be nonnegative");
                    None
                }
            }),
            Some("additive") => Some(CoagKernel::Additive),
            Some("tabulated") => {
                let s = r.needed_list("coag_sizes", "coag = tabulated");
                let v = r.needed_list("coag_values", "coag = tabulated");
                s.zip(v).and_then(|(s, v)| match Table2d::new(s, v) {
                    Ok(t) => Some(CoagKernel::Tabulated(t)),
                    Err(e) => {
                        r.issue("coag_values", e.to_string());
                        None
                    }
                })
            }
            _ => None,
        };

        let frag = match r.choice("frag", &["power_law", "zero", "tabulated"]).as_deref() {
            Some("power_law") => r.needed("frag_gamma", "frag = power_law").map(|gamma| FragRate::PowerLaw { gamma }),
            Some("zero") => Some(FragRate::Zero),
            Some("tabulated") => {
                let s = r.needed_list("frag_sizes", "frag = tabulated");
                let v = r.needed_list("frag_values", "frag = tabulated");
                s.zip(v).and_then(|(s, v)| match Table1d::new(s, v) {
                    Ok(t) => Some(FragRate::Tabulated(t)),
                    Err(e) => {
                        r.issue("frag_values", e.to_string());
                        None
                    }
                })
            }
            _ => None,
        };

        let spec = match (coag, frag, daughter, m0) {
            (Some(c), Some(f), Some(d), Some(m0)) => match KernelSpec::new(c, f, d, m0) {
                Ok(s) => Some(s),
                Err(_) => {
                    let lower = -1.0 - d.nu();
                    r.issue("m0", format!("m0 = {} must satisfy -1 - nu < m0 < 1, i.e. lie in ({}, 1)", num(m0), num(lower)));
                    None
                }
            },
            (_, _, Some(d), Some(m0)) => {
                let lower = -1.0 - d.nu();
                if !(m0 > lower && m0 < 1.0) {
                    r.issue("m0", format!("m0 = {} must satisfy -1 - nu < m0 < 1, i.e. lie in ({}, 1)", num(m0), num(lower)));
                }
                None
            }
            _ => None,
        };

        let ic = match r.choice("ic", &["exponential", "monodisperse", "power_cutoff", "tabulated"]).as_deref() {
            Some("exponential") => {
                let mean = r.needed("ic_mean", "ic = exponential");
                let mass = r.f64_or("ic_mass", 1.0);
                mean.map(|mean| InitialCondition::Exponential { mean, mass })
            }
            Some("monodisperse") => {
                let size = r.needed("ic_size", "ic = monodisperse");
                let mass = r.f64_or("ic_mass", 1.0);
                size.map(|size| InitialCondition::Monodisperse { size, mass })
            }
            Some("power_cutoff") => {
                let p = r.needed("ic_p", "ic = power_cutoff");
                let cutoff = r.needed("ic_cutoff", "ic = power_cutoff");
                let mass = r.f64_or("ic_mass", 1.0);
                p.zip(cutoff).map(|(p, cutoff)| InitialCondition::PowerCutoff { p, cutoff, mass })
            }
            Some("tabulated") => {
                let edges = r.needed_list("ic_edges", "ic = tabulated");
                let density = r.needed_list("ic_density", "ic = tabulated");
                edges.zip(density).map(|(edges, density)| InitialCondition::Tabulated { edges, density })
            }
            _ => None,
        };

        let x_min = r.f64_req("x_min");
        let j = r.f64_req("j");
        let cpd = if r.raw("cells_per_decade").is_some() { r.usize_opt("cells_per_decade") } else { None };
        let t_end = r.f64_req("t_end");
        let defaults = StepControl::default();
        let control = StepControl {
            dt_init: r.f64_or("dt_init", defaults.dt_init),
            dt_max: r.f64_or("dt_max", defaults.dt_max),
            safety: r.f64_or("safety", defaults.safety),
            positivity_fraction: r.f64_or("positivity_fraction", defaults.positivity_fraction),
            negligible_mass: r.f64_or("negligible_mass", defaults.negligible_mass),
        };
        let checks = match r.raw("checks").map(str::to_string) {
            None => CheckKind::ALL.to_vec(),
            Some(raw) if raw.trim() == "all" => CheckKind::ALL.to_vec(),
            Some(raw) if raw.trim() == "none" => Vec::new(),
            Some(raw) => {
                let mut out = Vec::new();
                for name in raw.split(',').map(str::trim) {
                    match CheckKind::from_name(name) {
                        Some(k) if !out.contains(&k) => out.push(k),
                        Some(_) => {}
                        None => r.issue("checks", format!("unknown check `{name}`")),
                    }
                }
                out
            }
        };
        let checks_fatal = r.bool_or("checks_fatal", false);
        let canonical = Scenario::canonical();
        let tolerance = r.f64_or("tolerance", canonical.tolerance);
        let allowance = r.f64_or("allowance", canonical.allowance);
        let delta = r.f64_or("delta", canonical.delta);
        let moment_order = r.f64_or("moment_order", canonical.moment_order);
        let subgrid_threshold = r.f64_or("subgrid_threshold", canonical.subgrid_threshold);
        let perturbation = r.f64_or("perturbation", canonical.perturbation);
        let hypothesis_radius = r.f64_or("hypothesis_radius", canonical.hypothesis_radius);
        let sample_budget = if r.raw("sample_budget").is_some() {
            r.usize_opt("sample_budget").unwrap_or(canonical.sample_budget)
        } else {
            canonical.sample_budget
        };
        let study_j = r.list("study_j").unwrap_or_default();
        let study_resolutions = match r.list("study_resolutions") {
            Some(v) if v.iter().all(|x| *x >= 0.0 && x.fract() == 0.0) => v.into_iter().map(|x| x as usize).collect(),
            Some(_) => {
                r.issue("study_resolutions", "expected nonnegative integers");
                Vec::new()
            }
            None => Vec::new(),
        };
        let cadence = match (r.raw("cadence").is_some(), t_end) {
            (true, _) => r.f64_opt("cadence"),
            (false, Some(t)) => Some(t / 50.0),
            _ => None,
        };

        let mut issues = std::mem::take(&mut r.issues);
        let (Some(spec), Some(initial), Some(x_min), Some(j), Some(cells_per_decade), Some(t_end), Some(cadence)) =
            (spec, ic, x_min, j, cpd, t_end, cadence)
        else {
            return Err(ConfigErrors(issues));
        };
        let scenario = Scenario {
            spec,
            x_min,
            j,
            cells_per_decade,
            initial,
            t_end,
            cadence,
            control,
            checks,
            checks_fatal,
            tolerance,
            allowance,
            delta,
            moment_order,
            subgrid_threshold,
            perturbation,
            hypothesis_radius,
            sample_budget,
        };
        if let Err(e) = scenario.validate() {
            issues.push(ConfigIssue { line: None, key: "scenario".into(), message: e.to_string() });
        }
        if !issues.is_empty() {
            return Err(ConfigErrors(issues));
        }
        Ok(Config { scenario, study_j, study_resolutions })
    }

    /// Fully resolved configuration; parsing the result gives back `self`.
    pub fn to_text(&self) -> String {
        let s = &self.scenario;
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        let list = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ");
        match &s.spec.coag {
            CoagKernel::PowerLawSum { alpha, beta } => {
                put("coag", "power_law_sum".into());
                put("coag_alpha", format!("{alpha:?}"));
                put("coag_beta", format!("{beta:?}"));
            }
            CoagKernel::Constant(c) => {
                put("coag", "constant".into());
                put("coag_c", format!("{c:?}"));
            }
            CoagKernel::Additive => put("coag", "additive".into()),
            CoagKernel::Tabulated(t) => {
                put("coag", "tabulated".into());
                put("coag_sizes", list(t.sizes()));
                put("coag_values", list(t.values()));
            }
        }
        match &s.spec.frag {
            FragRate::PowerLaw { gamma } => {
                put("frag", "power_law".into());
                put("frag_gamma", format!("{gamma:?}"));
            }
            FragRate::Zero => put("frag", "zero".into()),
            FragRate::Tabulated(t) => {
                put("frag", "tabulated".into());
                put("frag_sizes", list(t.sizes()));
                put("frag_values", list(t.values()));
            }
        }
        put("nu", format!("{:?}", s.spec.nu()));
        put("m0", format!("{:?}", s.spec.m0()));
        put("delta", format!("{:?}", s.delta));
        put("x_min", format!("{:?}", s.x_min));
        put("j", format!("{:?}", s.j));
        put("cells_per_decade", s.cells_per_decade.to_string());
        match &s.initial {
            InitialCondition::Exponential { mean, mass } => {
                put("ic", "exponential".into());
                put("ic_mean", format!("{mean:?}"));
                put("ic_mass", format!("{mass:?}"));
            }
            InitialCondition::Monodisperse { size, mass } => {
                put("ic", "monodisperse".into());
                put("ic_size", format!("{size:?}"));
                put("ic_mass", format!("{mass:?}"));
            }
            InitialCondition::PowerCutoff { p, cutoff, mass } => {
                put("ic", "power_cutoff".into());
                put("ic_p", format!("{p:?}"));
                put("ic_cutoff", format!("{cutoff:?}"));
                put("ic_mass", format!("{mass:?}"));
            }
            InitialCondition::Tabulated { edges, density } => {
                put("ic", "tabulated".into());
                put("ic_edges", list(edges));
                put("ic_density", list(density));
            }
        }
        put("t_end", format!("{:?}", s.t_end));
        put("cadence", format!("{:?}", s.cadence));
        put("dt_init", format!("{:?}", s.control.dt_init));
        put("dt_max", format!("{:?}", s.control.dt_max));
        put("safety", format!("{:?}", s.control.safety));
        put("positivity_fraction", format!("{:?}", s.control.positivity_fraction));
        put("negligible_mass", format!("{:?}", s.control.negligible_mass));
        let checks = if s.checks.is_empty() {
            "none".to_string()
        } else {
            s.checks.iter().map(|c| c.name()).collect::<Vec<_>>().join(", ")
        };
        put("checks", checks);
        put("checks_fatal", s.checks_fatal.to_string());
        put("tolerance", format!("{:?}", s.tolerance));
        put("allowance", format!("{:?}", s.allowance));
        put("moment_order", format!("{:?}", s.moment_order));
        put("subgrid_threshold", format!("{:?}", s.subgrid_threshold));
        put("perturbation", format!("{:?}", s.perturbation));
        put("hypothesis_radius", format!("{:?}", s.hypothesis_radius));
        put("sample_budget", s.sample_budget.to_string());
        if !self.study_j.is_empty() {
            put("study_j", list(&self.study_j));
        }
        if !self.study_resolutions.is_empty() {
            let v: Vec<String> = self.study_resolutions.iter().map(|r| r.to_string()).collect();
            put("study_resolutions", v.join(", "));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const CANONICAL: &str = "\
# canonical scenario
coag = power_law_sum
coag_alpha = 0.3
coag_beta = 0.3
frag = power_law
frag_gamma = 1
nu = -1.2
m0 = 0.3
x_min = 1e-4
j = 1e3
cells_per_decade = 32
ic = exponential
ic_mean = 1
ic_mass = 1
t_end = 5
cadence = 0.1
";

    #[test]
    fn canonical_parses() {
        let c = Config::parse(CANONICAL).unwrap();
        assert_eq!(c.scenario, Scenario::canonical());
    }

    #[test]
    fn nu_range_error() {
        let text = CANONICAL.replace("nu = -1.2", "nu = -2.5");
        let e = Config::parse(&text).unwrap_err();
        assert!(e.mentions("nu"));
        assert!(e.to_string().contains("(-2, -1]"), "{e}");
    }

    #[test]
    fn m0_range_error() {
        let text = CANONICAL.replace("m0 = 0.3", "m0 = 0.1");
        let e = Config::parse(&text).unwrap_err();
        assert!(e.mentions("m0"));
        assert!(e.to_string().contains("(0.2, 1)"), "{e}");
    }

    #[test]
    fn all_errors_reported() {
        let text = CANONICAL
            .replace("nu = -1.2", "nu = abc")
            .replace("t_end = 5", "bogus = 1")
            .replace("cells_per_decade = 32", "cells_per_decade = 32\ncells_per_decade = 16");
        let e = Config::parse(&text).unwrap_err();
        assert!(e.mentions("nu"));
        assert!(e.mentions("bogus"));
        assert!(e.mentions("t_end"));
        assert!(e.mentions("cells_per_decade"));
        assert!(e.0.len() >= 4);
    }

    #[test]
    fn round_trip_canonical() {
        let c = Config::parse(CANONICAL).unwrap();
        assert_eq!(Config::parse(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn checks_list() {
        let text = format!("{CANONICAL}checks = frag_flux, subgrid\n");
        let c = Config::parse(&text).unwrap();
        assert_eq!(c.scenario.checks, vec![CheckKind::FragFlux, CheckKind::Subgrid]);
        let text = format!("{CANONICAL}checks = nonsense\n");
        assert!(Config::parse(&text).unwrap_err().mentions("checks"));
    }
}
