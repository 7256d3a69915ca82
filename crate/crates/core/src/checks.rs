use serde::Serialize;
use std::fmt;

/// Documented soft-failure conditions. In strict mode each one aborts the
/// operation that raised it; otherwise it is collected for the run summary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WarningKind {
    /// A field or displaced support runs into the edge of its grid.
    Clipping,
    /// Quadrature sampling is too coarse for the structure it integrates.
    Convergence,
    /// A hard aperture spans too few samples for its edges to be resolved.
    Staircase,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Warning {
    pub kind: WarningKind,
    pub message: String,
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}: {}", self.kind, self.message)
    }
}

/// Collector for warnings raised while a scenario runs.
#[derive(Clone, Debug, Default)]
pub struct Checks {
    strict: bool,
    warnings: Vec<Warning>,
}

impl Checks {
    pub fn lenient() -> Self {
        Self::default()
    }

    pub fn strict() -> Self {
        Self {
            strict: true,
            warnings: Vec::new(),
        }
    }

    pub fn new(strict: bool) -> Self {
        Self {
            strict,
            warnings: Vec::new(),
        }
    }

    pub fn is_strict(&self) -> bool {
        self.strict
    }

    /// Record a warning. Strict collectors hand it back as an error instead.
    pub fn raise(&mut self, kind: WarningKind, message: impl Into<String>) -> Result<(), Warning> {
        let w = Warning {
            kind,
            message: message.into(),
        };
        if self.strict {
            return Err(w);
        }
        if !self.warnings.contains(&w) {
            self.warnings.push(w);
        }
        Ok(())
    }

    pub fn warnings(&self) -> &[Warning] {
        &self.warnings
    }

    pub fn into_warnings(self) -> Vec<Warning> {
        self.warnings
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strict_escalates_and_lenient_collects() {
        let mut s = Checks::strict();
        assert!(s.raise(WarningKind::Clipping, "edge").is_err());
        assert!(s.warnings().is_empty());

        let mut l = Checks::lenient();
        l.raise(WarningKind::Staircase, "coarse").unwrap();
        l.raise(WarningKind::Staircase, "coarse").unwrap();
        assert_eq!(l.warnings().len(), 1);
    }
}
