//! Structured check reports and table rendering.
//!
//! Reports serialize to JSON (object model, schema version 1) and to a flat
//! tab-separated summary table. All floating point output in tables is
//! printed with 17 significant digits so values round-trip exactly.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// 17-significant-digit form, exact under parse-back.
pub fn fmt_g17(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridMeta {
    pub dim: usize,
    pub shape: Vec<usize>,
    pub spacing: f64,
}

impl GridMeta {
    pub fn of(grid: &crate::grid::GridSpec) -> GridMeta {
        GridMeta { dim: grid.dim(), shape: grid.shape().to_vec(), spacing: grid.spacing() }
    }
}

/// Outcome of one inequality or equivalence check.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckReport {
    pub schema_version: u32,
    pub check_id: String,
    pub passed: bool,
    pub grid: GridMeta,
    /// Full configuration echo, keyed deterministically.
    pub config: BTreeMap<String, String>,
    pub points_inside: usize,
    pub points_checked: usize,
    pub excluded_margin: usize,
    /// Points where the maximizing radius jumps between neighbors.
    pub excluded_switch: usize,
    /// Points with an empty radius window for the requested branch.
    pub excluded_window: usize,
    /// max over checked points of LHS − RHS − slack (None when nothing was checked).
    pub max_signed_violation: Option<f64>,
    pub violated_fraction: f64,
    /// Fitted constant for checks with an unspecified constant.
    pub empirical_constant: Option<f64>,
    /// Named scalar outputs (norms, ratios, integrals, slack used, ...).
    pub quantities: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

impl CheckReport {
    pub fn new(check_id: &str, grid: GridMeta) -> CheckReport {
        CheckReport {
            schema_version: 1,
            check_id: check_id.to_string(),
            passed: false,
            grid,
            config: BTreeMap::new(),
            points_inside: 0,
            points_checked: 0,
            excluded_margin: 0,
            excluded_switch: 0,
            excluded_window: 0,
            max_signed_violation: None,
            violated_fraction: 0.0,
            empirical_constant: None,
            quantities: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    pub fn set_config(&mut self, key: &str, value: impl ToString) {
        self.config.insert(key.to_string(), value.to_string());
    }

    pub fn set_quantity(&mut self, key: &str, value: f64) {
        self.quantities.insert(key.to_string(), value);
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization")
    }
}

/// Render a batch of reports as one tab-separated summary table.
pub fn summary_table(reports: &[CheckReport]) -> String {
    let mut out = String::from(
        "check_id\tpassed\tdim\tshape\tspacing\tpoints_checked\texcluded_margin\t\
         excluded_switch\texcluded_window\tviolated_fraction\tmax_signed_violation\t\
         empirical_constant\n",
    );
    for r in reports {
        let shape = r
            .grid
            .shape
            .iter()
            .map(|s| s.to_string())
            .collect::<Vec<_>>()
            .join("x");
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            r.check_id,
            r.passed,
            r.grid.dim,
            shape,
            fmt_g17(r.grid.spacing),
            r.points_checked,
            r.excluded_margin,
            r.excluded_switch,
            r.excluded_window,
            fmt_g17(r.violated_fraction),
            r.max_signed_violation.map(fmt_g17).unwrap_or_else(|| "-".into()),
            r.empirical_constant.map(fmt_g17).unwrap_or_else(|| "-".into()),
        ));
    }
    out
}

/// Flat table for sweeps and convergence studies.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TableReport {
    pub schema_version: u32,
    pub id: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub passed: bool,
    pub notes: Vec<String>,
}

impl TableReport {
    pub fn new(id: &str, columns: &[&str]) -> TableReport {
        TableReport {
            schema_version: 1,
            id: id.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            passed: true,
            notes: Vec::new(),
        }
    }

    pub fn push_row(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_tsv(&self) -> String {
        let mut out = self.columns.join("\t");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join("\t"));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serialization")
    }
}
