//! Tabular residual reports shared by the complementarity and lifted checks.

use std::fmt;

use serde::Serialize;

use crate::tensor::{sym_eig, DenseMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RowKind {
    /// Passes when `|residual| <= tolerance`.
    Equality,
    /// Passes when `residual <= tolerance`.
    Upper,
    /// Necessary-condition surrogate for cone membership; passes when
    /// `residual <= tolerance`, where residual is the negated min eigenvalue.
    Surrogate,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConstraintRow {
    pub name: String,
    pub kind: RowKind,
    pub residual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// How cone membership of a lifted point was established.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Membership {
    /// Built as a convex combination of generators, so membership is exact.
    AtomCertified,
    /// Only necessary PSD conditions were checked.
    SurrogateChecked,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ConstraintReport {
    pub rows: Vec<ConstraintRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub membership: Option<Membership>,
}

impl ConstraintReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ConstraintRow> {
        self.rows.iter().filter(|r| !r.passed)
    }

    pub fn row(&self, name: &str) -> Option<&ConstraintRow> {
        self.rows.iter().find(|r| r.name == name)
    }

    pub fn residual(&self, name: &str) -> Option<f64> {
        self.row(name).map(|r| r.residual)
    }

    pub fn max_abs_residual(&self) -> f64 {
        self.rows.iter().fold(0.0, |m, r| m.max(r.residual.abs()))
    }

    fn push(&mut self, name: impl Into<String>, kind: RowKind, residual: f64, tolerance: f64) {
        let passed = residual.is_finite()
            && match kind {
                RowKind::Equality => residual.abs() <= tolerance,
                RowKind::Upper | RowKind::Surrogate => residual <= tolerance,
            };
        self.rows.push(ConstraintRow {
            name: name.into(),
            kind,
            residual,
            tolerance,
            passed,
        });
    }

    pub fn equality(&mut self, name: impl Into<String>, residual: f64, tolerance: f64) {
        self.push(name, RowKind::Equality, residual, tolerance);
    }

    pub fn upper(&mut self, name: impl Into<String>, value: f64, tolerance: f64) {
        self.push(name, RowKind::Upper, value, tolerance);
    }

    /// PSD row: residual is `−λ_min`, tolerance scaled by `max(1, ‖M‖_F)`.
    /// An eigensolver failure (asymmetric or non-finite input) records an
    /// infinite residual.
    pub fn psd(
        &mut self,
        name: impl Into<String>,
        m: &DenseMatrix,
        tolerance: f64,
        surrogate: bool,
    ) {
        let residual = sym_eig(m)
            .map(|e| -e.min_eigenvalue())
            .unwrap_or(f64::INFINITY);
        let kind = if surrogate {
            RowKind::Surrogate
        } else {
            RowKind::Upper
        };
        self.push(
            name,
            kind,
            residual,
            tolerance * m.frobenius_norm().max(1.0),
        );
    }

    pub fn extend(&mut self, other: ConstraintReport) {
        self.rows.extend(other.rows);
    }
}

impl fmt::Display for ConstraintReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.rows {
            writeln!(
                f,
                "  [{}] {:<44} residual {:>12.4e}  tol {:.1e}",
                if r.passed { "pass" } else { "FAIL" },
                r.name,
                r.residual,
                r.tolerance
            )?;
        }
        if let Some(m) = self.membership {
            writeln!(f, "  membership: {m:?}")?;
        }
        write!(
            f,
            "  overall: {}",
            if self.passed() { "pass" } else { "FAIL" }
        )
    }
}
