//! Plot-ready text artifacts: CSV tables and JSON summaries for the
//! report types produced by the other modules.
//!
//! All numbers are written with the shortest round-trip formatting, so a
//! fixed input produces byte-identical files on every run.

use serde::Serialize;
use serde_json::json;

use crate::evolution::EvolutionTrace;
use crate::resolvent::ResolventSolution;
use crate::spaces::{NodeDofs, OperatorBundle};
use crate::spectral::{KornReport, SectorReport};

/// One refinement level of a convergence experiment.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceLevel {
    pub h: f64,
    pub dt: Option<f64>,
    pub n_dofs: usize,
    pub error: f64,
}

/// Errors against a reference across a refinement ladder, with the order
/// fitted by least squares in log-log coordinates.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceTable {
    pub quantity: String,
    /// Which column drives the fit: `"h"` or `"dt"`.
    pub axis: String,
    pub levels: Vec<ConvergenceLevel>,
    pub fitted_order: f64,
}

impl ConvergenceTable {
    /// Fits `error ~ C * axis^p` over the levels and records `p`.
    pub fn fit(quantity: &str, axis: &str, levels: Vec<ConvergenceLevel>) -> ConvergenceTable {
        let xs: Vec<f64> = levels
            .iter()
            .map(|l| match axis {
                "dt" => l.dt.unwrap_or(f64::NAN),
                _ => l.h,
            })
            .collect();
        let pts: Vec<(f64, f64)> = xs
            .iter()
            .zip(&levels)
            .filter(|(x, l)| x.is_finite() && **x > 0.0 && l.error > 0.0)
            .map(|(x, l)| (x.ln(), l.error.ln()))
            .collect();
        let fitted_order = if pts.len() < 2 {
            f64::NAN
        } else {
            let n = pts.len() as f64;
            let xm = pts.iter().map(|p| p.0).sum::<f64>() / n;
            let ym = pts.iter().map(|p| p.1).sum::<f64>() / n;
            let num: f64 = pts.iter().map(|p| (p.0 - xm) * (p.1 - ym)).sum();
            let den: f64 = pts.iter().map(|p| (p.0 - xm) * (p.0 - xm)).sum();
            num / den
        };
        ConvergenceTable {
            quantity: quantity.to_string(),
            axis: axis.to_string(),
            levels,
            fitted_order,
        }
    }
}

/// `SectorReport` as a CSV table, one row per sweep point.
pub fn sector_csv(report: &SectorReport) -> String {
    let mut out = String::from("re_lambda,im_lambda,distance,estimate,ratio,flagged,note\n");
    for r in &report.records {
        let note = r.note.as_deref().unwrap_or("");
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.re,
            r.im,
            r.distance,
            r.estimate,
            r.ratio,
            r.flagged,
            note.replace(',', ";")
        ));
    }
    out
}

pub fn sector_summary_json(report: &SectorReport) -> String {
    let flagged = report.records.iter().filter(|r| r.flagged).count();
    let value = json!({
        "theta": report.theta,
        "omega": report.omega,
        "c_sector": report.c_sector,
        "n_points": report.records.len(),
        "n_flagged": flagged,
    });
    serde_json::to_string_pretty(&value).expect("summary serializes")
}

pub fn korn_json(report: &KornReport) -> String {
    serde_json::to_string_pretty(report).expect("korn report serializes")
}

/// Evolution trace as a CSV table, one row per time step.
pub fn trace_csv(trace: &EvolutionTrace) -> String {
    let mut out = String::from("step,t,h_norm,x0_dt_norm,au_norm,pressure_h1\n");
    for (n, rec) in trace.steps.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            n + 1,
            rec.t,
            rec.h_norm,
            rec.dt_x0,
            rec.au_x0,
            rec.pressure_h1
        ));
    }
    out
}

/// Integrated norms and fit results of a trace; the maximal-regularity
/// ratio is attached when the caller computed one.
pub fn trace_summary_json(trace: &EvolutionTrace, max_reg: Option<f64>) -> String {
    let value = json!({
        "q": trace.q,
        "t_end": trace.grid.t_end,
        "n_steps": trace.grid.n_steps,
        "dt_lq": trace.dt_lq,
        "au_lq": trace.au_lq,
        "f_lq": trace.f_lq,
        "pressure_lq": trace.pressure_lq,
        "fitted_decay": trace.fitted_decay,
        "max_reg_ratio": max_reg,
        "flagged": trace.flagged,
    });
    serde_json::to_string_pretty(&value).expect("trace summary serializes")
}

/// Per-node solution export: Cartesian velocity at every P2 node, the P1
/// pressure where one lives (vertex nodes), then the boundary Fourier
/// coefficients of the trace as a second table.
pub fn solution_csv(bundle: &OperatorBundle, sol: &ResolventSolution) -> String {
    let vs = &bundle.velocity;
    let values = vs.nodal_values(&sol.u);
    let mut out =
        String::from("node,x,y,kind,u_x_re,u_x_im,u_y_re,u_y_im,p_re,p_im\n");
    for (node, v) in values.iter().enumerate() {
        let [x, y] = vs.node_coords[node];
        let kind = match vs.node_dofs[node] {
            NodeDofs::Interior { .. } => "interior",
            NodeDofs::Boundary { .. } => "boundary",
        };
        let pressure = if node < bundle.n_pressure {
            format!("{},{}", sol.pressure[node].re, sol.pressure[node].im)
        } else {
            ",".to_string()
        };
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            node, x, y, kind, v[0].re, v[0].im, v[1].re, v[1].im, pressure
        ));
    }
    out.push('\n');
    out.push_str("mode,coef_re,coef_im\n");
    let coeffs = bundle.fourier.transform(&sol.u_b.values);
    let n_modes = bundle.fourier.n_modes as i64;
    for (row, k) in (-n_modes..=n_modes).enumerate() {
        out.push_str(&format!("{},{},{}\n", k, coeffs[row].re, coeffs[row].im));
    }
    out
}

pub fn diagnostics_json(sol: &ResolventSolution) -> String {
    let d = &sol.diagnostics;
    let value = json!({
        "lambda_re": sol.lambda.re,
        "lambda_im": sol.lambda.im,
        "u_l2": d.u_l2,
        "ub_l2": d.ub_l2,
        "ub_h_half": d.ub_h_half,
        "pressure_h1": d.pressure_h1,
        "residual": d.residual,
        "condest": d.condest,
        "regime": d.regime.map(|r| format!("{r:?}")),
        "flagged": d.flagged,
    });
    serde_json::to_string_pretty(&value).expect("diagnostics serialize")
}

pub fn convergence_csv(table: &ConvergenceTable) -> String {
    let mut out = String::from("h,dt,n_dofs,error\n");
    for l in &table.levels {
        let dt = l.dt.map(|v| v.to_string()).unwrap_or_default();
        out.push_str(&format!("{},{},{},{}\n", l.h, dt, l.n_dofs, l.error));
    }
    out
}

pub fn convergence_json(table: &ConvergenceTable) -> String {
    serde_json::to_string_pretty(table).expect("convergence table serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn convergence_fit_recovers_slope() {
        let levels: Vec<ConvergenceLevel> = [0.4f64, 0.2, 0.1, 0.05]
            .iter()
            .map(|&h| ConvergenceLevel {
                h,
                dt: None,
                n_dofs: 100,
                error: 3.0 * h.powi(2),
            })
            .collect();
        let table = ConvergenceTable::fit("err_l2", "h", levels);
        assert!((table.fitted_order - 2.0).abs() < 1e-12);
    }

    #[test]
    fn convergence_fit_on_dt_axis() {
        let levels: Vec<ConvergenceLevel> = [0.1f64, 0.05, 0.025]
            .iter()
            .map(|&dt| ConvergenceLevel {
                h: 0.3,
                dt: Some(dt),
                n_dofs: 50,
                error: 0.7 * dt,
            })
            .collect();
        let table = ConvergenceTable::fit("err_final", "dt", levels);
        assert!((table.fitted_order - 1.0).abs() < 1e-12);
        assert!(convergence_csv(&table).lines().count() == 4);
        assert!(convergence_json(&table).contains("\"fitted_order\""));
    }

    #[test]
    fn degenerate_fit_is_nan() {
        let table = ConvergenceTable::fit(
            "err",
            "h",
            vec![ConvergenceLevel {
                h: 0.1,
                dt: None,
                n_dofs: 10,
                error: 1.0,
            }],
        );
        assert!(table.fitted_order.is_nan());
    }
}
