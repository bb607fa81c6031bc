use std::fmt::Write as _;

/// The envelope checks a run can be gated on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CheckKind {
    /// Gronwall envelope of the log-log weight functional.
    WeightEnvelope,
    /// Time integral of the large-size fragmentation flux.
    FragFlux,
    /// Gronwall envelope of the `m0` moment.
    SmallMoment,
    /// Exponential envelope of a moment of order `m > 1`.
    HighMoment,
    /// Two-run distance against the contraction envelope.
    Stability,
    /// Lumped sub-grid mass below its threshold.
    Subgrid,
}

impl CheckKind {
    pub const ALL: [CheckKind; 6] = [
        CheckKind::WeightEnvelope,
        CheckKind::FragFlux,
        CheckKind::SmallMoment,
        CheckKind::HighMoment,
        CheckKind::Stability,
        CheckKind::Subgrid,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            CheckKind::WeightEnvelope => "weight_envelope",
            CheckKind::FragFlux => "frag_flux",
            CheckKind::SmallMoment => "small_moment",
            CheckKind::HighMoment => "high_moment",
            CheckKind::Stability => "stability",
            CheckKind::Subgrid => "subgrid",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }
}

/// One observed trajectory against its envelope.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundCheck {
    pub kind: CheckKind,
    pub times: Vec<f64>,
    pub observed: Vec<f64>,
    pub envelope: Vec<f64>,
    /// Smallest `(envelope - observed) / envelope` over `t > 0`.
    pub worst_margin: f64,
    pub pass: bool,
    pub warnings: Vec<String>,
}

impl BoundCheck {
    /// Build a check; it passes iff the worst margin is at least `-tolerance`.
    pub fn new(kind: CheckKind, times: Vec<f64>, observed: Vec<f64>, envelope: Vec<f64>, tolerance: f64) -> Self {
        let worst_margin = worst_margin(&times, &observed, &envelope);
        Self {
            kind,
            times,
            observed,
            envelope,
            worst_margin,
            pass: worst_margin >= -tolerance,
            warnings: Vec::new(),
        }
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }
}

fn margin(obs: f64, env: f64) -> f64 {
    if env == f64::INFINITY {
        1.0
    } else if env > 0.0 {
        (env - obs) / env
    } else if obs <= env {
        0.0
    } else {
        f64::NEG_INFINITY
    }
}

fn worst_margin(times: &[f64], observed: &[f64], envelope: &[f64]) -> f64 {
    let later: Vec<usize> = (0..times.len()).filter(|&i| times[i] > 0.0).collect();
    let idx: Vec<usize> = if later.is_empty() { (0..times.len()).collect() } else { later };
    idx.into_iter()
        .map(|i| {
            let m = margin(observed[i], envelope[i]);
            if m.is_nan() {
                f64::NEG_INFINITY
            } else {
                m
            }
        })
        .fold(f64::INFINITY, f64::min)
}

/// Results of all evaluated checks.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BoundReport {
    pub checks: Vec<BoundCheck>,
}

impl BoundReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn get(&self, kind: CheckKind) -> Option<&BoundCheck> {
        self.checks.iter().find(|c| c.kind == kind)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let _ = writeln!(
                out,
                "{:<16} {}  worst margin {:+.6e}",
                c.name(),
                if c.pass { "pass" } else { "FAIL" },
                c.worst_margin
            );
            for w in &c.warnings {
                let _ = writeln!(out, "    warning: {w}");
            }
        }
        if self.checks.is_empty() {
            out.push_str("no checks evaluated\n");
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("name,worst_margin,pass\n");
        for c in &self.checks {
            let _ = writeln!(out, "{},{:.16e},{}", c.name(), c.worst_margin, c.pass);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn margins() {
        let c = BoundCheck::new(CheckKind::Subgrid, vec![0.0, 1.0], vec![2.0, 1.0], vec![1.0, 2.0], 0.0);
        // the t = 0 violation is ignored
        assert_eq!(c.worst_margin, 0.5);
        assert!(c.pass);
        let c = BoundCheck::new(CheckKind::Subgrid, vec![0.0, 1.0], vec![0.0, 3.0], vec![0.0, 2.0], 1e-6);
        assert!(!c.pass);
        let c = BoundCheck::new(CheckKind::Subgrid, vec![0.0, 1.0], vec![0.0, 0.0], vec![0.0, 0.0], 0.0);
        assert!(c.pass);
    }

    #[test]
    fn names_round_trip() {
        for k in CheckKind::ALL {
            assert_eq!(CheckKind::from_name(k.name()), Some(k));
        }
    }

    #[test]
    fn csv_layout() {
        let r = BoundReport {
            checks: vec![BoundCheck::new(CheckKind::FragFlux, vec![0.0, 1.0], vec![0.0, 1.0], vec![1.0, 2.0], 0.0)],
        };
        assert_eq!(r.to_csv(), "name,worst_margin,pass\nfrag_flux,5.0000000000000000e-1,true\n");
    }
}
