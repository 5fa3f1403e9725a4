/// Soft diagnostics attached to otherwise successful results.
///
/// `ratio` fields are always "offending magnitude / reference magnitude", so a
/// warning fires when the ratio exceeds the documented threshold of the
/// operation that produced it.
#[derive(Debug, Clone, PartialEq)]
pub enum Warning {
    /// Integrand or sample mass at the edge of a grid box is not negligible.
    BoundaryMass { context: String, ratio: f64 },
    /// A truncated sum (lattice, quadrature shell) still carries visible mass.
    TailTruncation { context: String, ratio: f64 },
    /// A quantity kept growing when the integration box was enlarged.
    Divergence { context: String, rel_change: f64 },
    /// Composed kernel mass reached the boundary, so wrap-around is possible.
    Aliasing { context: String, ratio: f64 },
    /// Oscillatory quadrature with per-cell phase increment beyond resolution.
    PhaseResolution { max_increment: f64 },
}

impl Warning {
    /// Status label used by report records.
    pub fn label(&self) -> &'static str {
        match self {
            Warning::BoundaryMass { .. } => "warn-boundary",
            Warning::TailTruncation { .. } => "warn-tail",
            Warning::Divergence { .. } => "warn-tail",
            Warning::Aliasing { .. } => "warn-boundary",
            Warning::PhaseResolution { .. } => "warn-tail",
        }
    }
}

/// A value together with the warnings gathered while computing it.
#[derive(Debug, Clone)]
pub struct Flagged<T> {
    pub value: T,
    pub warnings: Vec<Warning>,
}

impl<T> Flagged<T> {
    pub fn clean(value: T) -> Self {
        Flagged {
            value,
            warnings: Vec::new(),
        }
    }

    pub fn with(value: T, warnings: Vec<Warning>) -> Self {
        Flagged { value, warnings }
    }

    pub fn is_clean(&self) -> bool {
        self.warnings.is_empty()
    }

    /// Keep the warnings, replace the value.
    pub fn map<U>(self, f: impl FnOnce(T) -> U) -> Flagged<U> {
        Flagged {
            value: f(self.value),
            warnings: self.warnings,
        }
    }
}
