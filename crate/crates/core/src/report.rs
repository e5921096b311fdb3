//! Machine-readable outputs: per-location records CSV, map summaries and
//! experiment reports.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::dataset::Dataset;
use crate::diagnostics::{local_moran, reliability_mask, AdjacencySpec};
use crate::engine::{GimbalConfig, LocationRecord};
use crate::error::Result;
use crate::experiments::ExperimentRun;
use crate::summary::MapSummary;

pub const RECORDS_SCHEMA: &str = "gimbal.records.v1";
pub const SUMMARY_SCHEMA: &str = "gimbal.summary.v1";

/// Reliability defaults: κ above the 95th percentile or `n_eff_post < 4`.
pub const DEFAULT_KAPPA_QUANTILE: f64 = 0.95;
pub const DEFAULT_NEFF_FLOOR: f64 = 4.0;

/// Post-estimation columns attached to each record.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Annotations {
    /// `β̂₀ + β̂₁ x` at the target.
    pub fitted: Vec<Option<f64>>,
    /// `y − fitted`, where `y` is known.
    pub residual: Vec<Option<f64>>,
    pub local_moran: Vec<Option<f64>>,
    pub fragile: Vec<bool>,
    /// Optional extra column (name, values), e.g. a residual-corrected prediction.
    pub extra: Option<(String, Vec<Option<f64>>)>,
}

/// Fitted values, residuals, local Moran's I (on the well-posed subset) and
/// the reliability mask for a set of records against `targets`.
pub fn annotate(targets: &Dataset, records: &[LocationRecord], adjacency: AdjacencySpec) -> Result<Annotations> {
    let fitted: Vec<Option<f64>> = records.iter().map(|r| r.predict_at_origin(targets.x[r.index])).collect();
    let residual: Vec<Option<f64>> = records
        .iter()
        .zip(&fitted)
        .map(|(r, f)| {
            let y = targets.y[r.index];
            f.filter(|_| y.is_finite()).map(|f| y - f)
        })
        .collect();

    let usable: Vec<usize> = (0..records.len()).filter(|&i| residual[i].is_some()).collect();
    let mut moran = vec![None; records.len()];
    if usable.len() >= 2 {
        let res: Vec<f64> = usable.iter().map(|&i| residual[i].unwrap_or(0.0)).collect();
        let pts: Vec<_> = usable.iter().map(|&i| targets.points[records[i].index]).collect();
        let lm = local_moran(&res, &pts, adjacency)?;
        for (slot, v) in usable.iter().zip(lm.values) {
            moran[*slot] = Some(v);
        }
    }
    Ok(Annotations {
        fitted,
        residual,
        local_moran: moran,
        fragile: reliability_mask(records, DEFAULT_KAPPA_QUANTILE, DEFAULT_NEFF_FLOOR),
        extra: None,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

const COLUMNS: [&str; 33] = [
    "index",
    "id",
    "lat",
    "lon",
    "x",
    "y",
    "well_posed",
    "beta0",
    "beta1",
    "beta2",
    "kappa_nor",
    "lambda_min_nor",
    "stability_bound",
    "cond_wls2",
    "h_eff",
    "phi",
    "r_phi",
    "theta_z",
    "g_ident",
    "eta",
    "s_lambda_max",
    "s_lambda_min",
    "n_eff_raw",
    "n_eff_post",
    "n_eff_final",
    "safeguard_branch",
    "branch_codes",
    "rmse",
    "r2",
    "fitted",
    "residual",
    "local_moran",
    "fragile",
];

/// One row per record. Missing values are empty fields.
pub fn write_records<W: Write>(
    mut writer: W,
    targets: &Dataset,
    records: &[LocationRecord],
    notes: &Annotations,
) -> Result<()> {
    writeln!(writer, "# schema: {RECORDS_SCHEMA}")?;
    let mut out = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = COLUMNS.to_vec();
    if let Some((name, _)) = &notes.extra {
        header.push(name);
    }
    out.write_record(&header)?;
    for (i, r) in records.iter().enumerate() {
        let t = r.index;
        let beta = |j: usize| opt(r.fit.beta.as_ref().map(|b| b[j]));
        let o = &r.weight_map.orientation;
        let w = &r.weight_map;
        let codes: Vec<&str> = r.branch_codes.iter().map(|c| c.as_str()).collect();
        let branch = serde_json::to_value(w.branch)?;
        let mut row = vec![
            t.to_string(),
            targets.id(t),
            targets.points[t].lat.to_string(),
            targets.points[t].lon.to_string(),
            targets.x[t].to_string(),
            opt(Some(targets.y[t]).filter(|y| y.is_finite())),
            r.fit.well_posed.to_string(),
            beta(0),
            beta(1),
            beta(2),
            r.fit.m_nor_condition.to_string(),
            r.fit.lambda_min.to_string(),
            opt(r.fit.operator_norm_bound),
            r.cond_wls2.to_string(),
            w.h_eff.to_string(),
            o.phi.to_string(),
            o.r_phi.to_string(),
            o.theta_z.to_string(),
            o.g_ident.to_string(),
            o.eta.to_string(),
            o.s_matrix_eigs.0.to_string(),
            o.s_matrix_eigs.1.to_string(),
            w.n_eff_raw.to_string(),
            w.n_eff_post.to_string(),
            w.n_eff_final.to_string(),
            branch.as_str().unwrap_or_default().to_string(),
            codes.join("|"),
            opt(r.fit.rmse_local),
            opt(r.fit.r2_local),
            opt(notes.fitted.get(i).copied().flatten()),
            opt(notes.residual.get(i).copied().flatten()),
            opt(notes.local_moran.get(i).copied().flatten()),
            notes.fragile.get(i).copied().unwrap_or(false).to_string(),
        ];
        if let Some((_, values)) = &notes.extra {
            row.push(opt(values.get(i).copied().flatten()));
        }
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct SummaryDoc<'a> {
    schema: &'static str,
    config: &'a GimbalConfig,
    variant: &'a str,
    summary: &'a MapSummary,
}

pub fn write_summary<W: Write>(
    mut writer: W,
    config: &GimbalConfig,
    variant: &str,
    summary: &MapSummary,
) -> Result<()> {
    let doc = SummaryDoc { schema: SUMMARY_SCHEMA, config, variant, summary };
    serde_json::to_writer_pretty(&mut writer, &doc)?;
    writeln!(writer)?;
    Ok(())
}

/// `dataset.csv` (with the true β₁), one `records_<label>.csv` per variant and `report.json`.
pub fn write_experiment(run: &ExperimentRun, out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir)?;
    let ds = &run.data.dataset;
    run.data
        .dataset
        .write_csv(fs::File::create(out_dir.join("dataset.csv"))?, Some(("beta1_true", &run.data.beta1)))?;
    for v in &run.variants {
        let notes = annotate(ds, &v.records, AdjacencySpec::default())?;
        let file = fs::File::create(out_dir.join(format!("records_{}.csv", v.label)))?;
        write_records(std::io::BufWriter::new(file), ds, &v.records, &notes)?;
    }
    let mut f = fs::File::create(out_dir.join("report.json"))?;
    serde_json::to_writer_pretty(&mut f, &run.report())?;
    writeln!(f)?;
    Ok(())
}
