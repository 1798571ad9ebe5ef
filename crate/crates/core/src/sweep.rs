//! Convergence sweeps: run a scheme over an (epsilon, tau) grid against
//! fine-step references, assemble error tables with local orders, locate
//! regime boundaries, and emit CSV/JSON.

use crate::band;
use crate::cache::{ReferenceCache, ReferenceSpec};
use crate::dirac::{relative_l2_error, Potential, Scheme, SimParams, SpinorForm};
use crate::field::SpectralField;
use crate::grid::PeriodicGrid;
use crate::numeric::lsq_slope;
use crate::preset::{Profile, ProblemPreset};
use crate::resonance;
use crate::split;
use crate::{Error, Result};
use serde::Serialize;
use std::str::FromStr;
use std::time::Instant;

#[derive(Debug, Clone)]
pub struct SweepRequest {
    /// Label recorded in the outputs; "inline" for ad-hoc problems.
    pub preset_id: String,
    pub profile: Profile,
    pub scheme: Scheme,
    pub form: SpinorForm,
    pub grid: PeriodicGrid,
    pub potential: Potential,
    pub initial: SpectralField,
    /// Registry id of the initial data; part of the reference cache key,
    /// so it must identify the content of `initial`.
    pub initial_id: String,
    pub t_final: f64,
    pub ref_steps: usize,
    pub epsilons: Vec<f64>,
    pub taus: Vec<f64>,
    /// Resonance-classification threshold.
    pub delta: f64,
    pub workers: usize,
    /// When false, a cache miss is an error instead of a long compute.
    pub allow_compute_references: bool,
}

impl SweepRequest {
    pub fn from_preset(p: &ProblemPreset, scheme: Scheme, delta: f64, workers: usize) -> Result<Self> {
        Ok(SweepRequest {
            preset_id: p.id.clone(),
            profile: p.profile,
            scheme,
            form: p.form,
            grid: p.grid()?,
            potential: p.potential()?,
            initial: p.initial()?,
            initial_id: p.initial_id.clone(),
            t_final: p.t_final,
            ref_steps: p.ref_steps,
            epsilons: p.epsilons.clone(),
            taus: p.tau_ladder()?,
            delta,
            workers,
            allow_compute_references: true,
        })
    }

    fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.epsilons.is_empty() {
            problems.push("no epsilon values".to_string());
        }
        for &e in &self.epsilons {
            if !(e.is_finite() && e > 0.0 && e <= 1.0) {
                problems.push(format!("epsilon {e} outside (0, 1]"));
            }
        }
        if self.taus.is_empty() {
            problems.push("no step sizes".to_string());
        }
        for &t in &self.taus {
            if !(t.is_finite() && t > 0.0) {
                problems.push(format!("step size {t} not positive"));
            }
            let n = (self.t_final / t).round();
            if n < 1.0 || (n * t - self.t_final).abs() > 1e-9 * self.t_final.max(1.0) {
                problems.push(format!("step size {t} does not divide T = {}", self.t_final));
            }
        }
        if !(self.t_final.is_finite() && self.t_final > 0.0) {
            problems.push(format!("final time {} not positive", self.t_final));
        }
        if self.ref_steps == 0 || self.ref_steps % 2 != 0 {
            problems.push(format!(
                "reference step count {} must be even and positive (the noise probe halves it)",
                self.ref_steps
            ));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            problems.push(format!("classification threshold {} outside (0, 1)", self.delta));
        }
        if self.workers == 0 {
            problems.push("worker count must be at least 1".to_string());
        }
        if self.form.components() != self.initial.components() {
            problems.push("initial data does not match the spinor form".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Param(problems.join("; ")))
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CellResult {
    pub epsilon: f64,
    pub tau: f64,
    pub error: f64,
    /// Local order against the previous (coarser) column; absent in the
    /// first column and where the noise floor rule withholds it.
    pub order: Option<f64>,
    pub nonresonant: bool,
    pub margin: f64,
    pub mass_drift: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct UniformCell {
    pub tau: f64,
    /// Columnwise max of the error over the epsilon rows actually run.
    pub error: f64,
    pub order: Option<f64>,
    pub argmax_epsilon: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Diagnostics {
    pub max_mass_drift: f64,
    pub projector_identity_residual: f64,
    pub flow_decomposition_residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceTable {
    pub preset: String,
    pub scheme: Scheme,
    pub profile: Profile,
    /// Nodes per axis.
    pub m_per_axis: usize,
    pub t_final: f64,
    pub tau_ref: f64,
    pub delta: f64,
    /// Descending.
    pub epsilons: Vec<f64>,
    /// Descending.
    pub taus: Vec<f64>,
    /// cells[i][m] is the (epsilons[i], taus[m]) result.
    pub cells: Vec<Vec<CellResult>>,
    pub uniform: Vec<UniformCell>,
    /// Measured reference discrepancy at the probe epsilon.
    pub noise_floor: f64,
    pub noise_floor_epsilon: f64,
    pub references_computed: usize,
    pub references_loaded: usize,
    pub diagnostics: Diagnostics,
    pub workers: usize,
    pub wall_seconds_references: f64,
    pub wall_seconds_cells: f64,
}

/// Worst-case reference-error model used only to pick the probe epsilon
/// and to transfer the measured floor to the other rows: tau_e^2 / eps^3
/// once tau_e clears eps^2, saturating at tau_e^(3/2) below.
fn predicted_reference_error(tau_e: f64, epsilon: f64) -> f64 {
    if tau_e <= epsilon * epsilon {
        tau_e * tau_e / (epsilon * epsilon * epsilon)
    } else {
        tau_e.powf(1.5)
    }
}

fn sorted_desc_dedup(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(|a, b| b.partial_cmp(a).expect("finite values"));
    v.dedup();
    v
}

pub fn run_sweep(req: &SweepRequest, cache: Option<&ReferenceCache>) -> Result<ConvergenceTable> {
    req.validate()?;
    let epsilons = sorted_desc_dedup(&req.epsilons);
    let taus = sorted_desc_dedup(&req.taus);
    let tau_ref = req.t_final / req.ref_steps as f64;

    let spec_for = |eps: f64, steps: usize| {
        ReferenceSpec::for_problem(
            &req.grid,
            req.form,
            eps,
            req.t_final,
            steps,
            &req.potential.id(),
            &req.initial_id,
        )
    };

    // References first, sequentially: they dominate the cost and the cells
    // need all of them anyway.
    let t_refs = Instant::now();
    let mut references = Vec::with_capacity(epsilons.len());
    let mut computed = 0usize;
    let mut loaded = 0usize;
    for &eps in &epsilons {
        let (field, was_loaded) = split::reference_solution(
            &req.initial,
            &req.potential,
            &spec_for(eps, req.ref_steps),
            cache,
            req.allow_compute_references,
        )?;
        if was_loaded {
            loaded += 1;
        } else {
            computed += 1;
        }
        references.push(field);
    }

    // Noise probe: rerun the reference with a doubled step at the epsilon
    // the error model distrusts most, and take the relative discrepancy as
    // the measured floor there.
    let probe_idx = (0..epsilons.len())
        .max_by(|&a, &b| {
            predicted_reference_error(tau_ref, epsilons[a])
                .partial_cmp(&predicted_reference_error(tau_ref, epsilons[b]))
                .expect("finite predictions")
        })
        .expect("nonempty epsilon list");
    let probe_eps = epsilons[probe_idx];
    let (coarse_ref, probe_loaded) = split::reference_solution(
        &req.initial,
        &req.potential,
        &spec_for(probe_eps, req.ref_steps / 2),
        cache,
        req.allow_compute_references,
    )?;
    if probe_loaded {
        loaded += 1;
    } else {
        computed += 1;
    }
    let noise_floor = relative_l2_error(&coarse_ref, &references[probe_idx])?;
    let wall_refs = t_refs.elapsed().as_secs_f64();

    // The floor transfers to other rows through the error-model ratio; the
    // probe row keeps the measured value and rows the model trusts more get
    // proportionally smaller floors.
    let probe_pred = predicted_reference_error(tau_ref, probe_eps);
    let row_floor: Vec<f64> = epsilons
        .iter()
        .map(|&e| noise_floor * predicted_reference_error(tau_ref, e) / probe_pred)
        .collect();

    // Independent cells in a bounded pool; results land in (eps, tau) order
    // no matter the completion order.
    let t_cells = Instant::now();
    let jobs: Vec<(usize, usize)> = (0..epsilons.len())
        .flat_map(|i| (0..taus.len()).map(move |m| (i, m)))
        .collect();
    let workers = req.workers.min(jobs.len()).max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Param(format!("cannot build worker pool: {e}")))?;
    let raw: Vec<CellResult> = pool.install(|| {
        use rayon::prelude::*;
        jobs.par_iter()
            .map(|&(i, m)| -> Result<CellResult> {
                let eps = epsilons[i];
                let tau = taus[m];
                let params = SimParams {
                    form: req.form,
                    epsilon: eps,
                    tau,
                    t_final: req.t_final,
                    scheme: req.scheme,
                };
                let run = split::evolve(&req.initial, &req.potential, &params)?;
                let error = relative_l2_error(&run.field, &references[i])?;
                let class = resonance::classify(tau, eps, req.delta)?;
                Ok(CellResult {
                    epsilon: eps,
                    tau,
                    error,
                    order: None,
                    nonresonant: class.nonresonant,
                    margin: class.margin,
                    mass_drift: run.mass_drift,
                    steps: run.steps,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let wall_cells = t_cells.elapsed().as_secs_f64();

    let mut cells: Vec<Vec<CellResult>> = Vec::with_capacity(epsilons.len());
    for i in 0..epsilons.len() {
        cells.push(raw[i * taus.len()..(i + 1) * taus.len()].to_vec());
    }

    // Local orders, with cells near the reference floor withheld.
    for (i, row) in cells.iter_mut().enumerate() {
        let floor = row_floor[i];
        for m in 1..row.len() {
            let (prev, cur) = (row[m - 1].error, row[m].error);
            if prev.min(cur) > 10.0 * floor && prev > 0.0 && cur > 0.0 {
                row[m].order = Some((prev / cur).ln() / (taus[m - 1] / taus[m]).ln());
            }
        }
    }

    // Uniform row: columnwise max with its own order ladder; the max is
    // far above any floor by construction, except when every row is, so
    // the same rule is applied with the largest row floor.
    let max_floor = row_floor.iter().cloned().fold(0.0f64, f64::max);
    let mut uniform = Vec::with_capacity(taus.len());
    for m in 0..taus.len() {
        let (mut best, mut arg) = (f64::NEG_INFINITY, epsilons[0]);
        for (i, row) in cells.iter().enumerate() {
            if row[m].error > best {
                best = row[m].error;
                arg = epsilons[i];
            }
        }
        uniform.push(UniformCell { tau: taus[m], error: best, order: None, argmax_epsilon: arg });
    }
    for m in 1..uniform.len() {
        let (prev, cur) = (uniform[m - 1].error, uniform[m].error);
        if prev.min(cur) > 10.0 * max_floor && prev > 0.0 && cur > 0.0 {
            uniform[m].order = Some((prev / cur).ln() / (taus[m - 1] / taus[m]).ln());
        }
    }

    let max_mass_drift = cells
        .iter()
        .flatten()
        .map(|c| c.mass_drift)
        .fold(0.0f64, f64::max);
    // Structural residuals evaluated on the initial data at the largest
    // epsilon, where the assembled phases stay well-conditioned.
    let diag_eps = epsilons[0];
    let projector_identity_residual = {
        let plus = band::project(&req.initial, diag_eps, band::Band::Upper)?;
        let minus = band::project(&req.initial, diag_eps, band::Band::Lower)?;
        let mut sum = plus.clone();
        for (s, m) in sum.data_mut().iter_mut().zip(minus.data()) {
            *s += m;
        }
        let completeness = relative_l2_error(&sum, &req.initial)?;
        let twice = band::project(&plus, diag_eps, band::Band::Upper)?;
        let idempotence = relative_l2_error(&twice, &plus)?;
        completeness.max(idempotence)
    };
    let flow_decomposition_residual =
        band::flow_decomposition_residual(&req.initial, diag_eps, 0.5)?;

    Ok(ConvergenceTable {
        preset: req.preset_id.clone(),
        scheme: req.scheme,
        profile: req.profile,
        m_per_axis: req.grid.axis(0).points,
        t_final: req.t_final,
        tau_ref,
        delta: req.delta,
        epsilons,
        taus,
        cells,
        uniform,
        noise_floor,
        noise_floor_epsilon: probe_eps,
        references_computed: computed,
        references_loaded: loaded,
        diagnostics: Diagnostics {
            max_mass_drift,
            projector_identity_residual,
            flow_decomposition_residual,
        },
        workers,
        wall_seconds_references: wall_refs,
        wall_seconds_cells: wall_cells,
    })
}

/// Least-squares slope of ln(uniform error) against ln(tau). Needs at
/// least three columns to say anything.
pub fn fit_uniform_order(table: &ConvergenceTable) -> Result<f64> {
    let pts: Vec<(f64, f64)> = table
        .uniform
        .iter()
        .filter(|u| u.error > 0.0)
        .map(|u| (u.tau.ln(), u.error.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::Param(format!(
            "uniform order fit needs at least 3 usable columns, got {}",
            pts.len()
        )));
    }
    let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
    Ok(lsq_slope(&xs, &ys))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryKind {
    /// Boundary tau ~ eps, approached from large tau.
    TauEps,
    /// Boundary tau ~ sqrt(eps), approached from large tau.
    TauSqrtEps,
    /// Boundary tau ~ eps^2, approached from small tau.
    TauEps2,
}

impl BoundaryKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundaryKind::TauEps => "tau~eps",
            BoundaryKind::TauSqrtEps => "tau~sqrt_eps",
            BoundaryKind::TauEps2 => "tau~eps2",
        }
    }

    /// The scale g(eps) the boundary step is compared against.
    pub fn scale(self, epsilon: f64) -> f64 {
        match self {
            BoundaryKind::TauEps => epsilon,
            BoundaryKind::TauSqrtEps => epsilon.sqrt(),
            BoundaryKind::TauEps2 => epsilon * epsilon,
        }
    }

    fn from_small_tau(self) -> bool {
        matches!(self, BoundaryKind::TauEps2)
    }
}

impl FromStr for BoundaryKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tau~eps" => Ok(BoundaryKind::TauEps),
            "tau~sqrt_eps" => Ok(BoundaryKind::TauSqrtEps),
            "tau~eps2" => Ok(BoundaryKind::TauEps2),
            other => Err(Error::UnknownId(format!(
                "boundary kind '{other}' (known: tau~eps, tau~sqrt_eps, tau~eps2)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundaryCell {
    pub epsilon: f64,
    /// The column the order transition straddles.
    pub tau: f64,
    /// Order cell on the coarser-step side of the shared column.
    pub order_coarse: f64,
    /// Order cell on the finer-step side.
    pub order_fine: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundaryScan {
    pub kind: String,
    pub nominal_order: f64,
    pub band: f64,
    pub cells: Vec<BoundaryCell>,
    /// Epsilon rows where no transition was found.
    pub rows_without_transition: Vec<f64>,
}

impl BoundaryScan {
    /// Per-row scale factors C = tau_boundary / g(eps), their median, and
    /// how many rows sit within a factor of 4 of that median.
    pub fn consistency(&self, kind: BoundaryKind) -> Option<BoundaryConsistency> {
        if self.cells.is_empty() {
            return None;
        }
        let factors: Vec<f64> = self
            .cells
            .iter()
            .map(|c| c.tau / kind.scale(c.epsilon))
            .collect();
        let mut sorted = factors.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite factors"));
        // Geometric median for an even count: the factors live on a log scale.
        let median = if sorted.len() % 2 == 1 {
            sorted[sorted.len() / 2]
        } else {
            let k = sorted.len() / 2;
            (sorted[k - 1] * sorted[k]).sqrt()
        };
        let consistent = factors
            .iter()
            .filter(|&&c| (c / median).ln().abs() <= 4f64.ln())
            .count();
        Some(BoundaryConsistency { median_factor: median, consistent_rows: consistent, total_rows: factors.len() })
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct BoundaryConsistency {
    pub median_factor: f64,
    pub consistent_rows: usize,
    pub total_rows: usize,
}

/// Locate, per epsilon row, the column where the local order ladder
/// crosses into or out of the nominal band (scheme order +- 0.2). Kinds
/// approached from large tau scan left to right; tau ~ eps^2 scans from
/// the smallest step upward. A transition is a pair of adjacent defined
/// order cells with exactly one inside the band; the shared error column
/// is reported as the boundary.
pub fn detect_regime_boundary(table: &ConvergenceTable, kind: BoundaryKind) -> BoundaryScan {
    let nominal = match table.scheme {
        Scheme::LieTrotter => 1.0,
        Scheme::Strang => 2.0,
    };
    let band = 0.2;
    let in_band = |o: f64| (o - nominal).abs() <= band;

    let mut cells = Vec::new();
    let mut skipped = Vec::new();
    for (i, row) in table.cells.iter().enumerate() {
        // Adjacent defined order pairs (o_m, o_{m+1}); the shared column m.
        let mut pairs: Vec<(usize, f64, f64)> = Vec::new();
        for m in 1..row.len().saturating_sub(1) {
            if let (Some(a), Some(b)) = (row[m].order, row[m + 1].order) {
                pairs.push((m, a, b));
            }
        }
        if kind.from_small_tau() {
            pairs.reverse();
        }
        let hit = pairs
            .iter()
            .find(|&&(_, a, b)| in_band(a) != in_band(b));
        match hit {
            Some(&(m, a, b)) => cells.push(BoundaryCell {
                epsilon: table.epsilons[i],
                tau: table.taus[m],
                order_coarse: a,
                order_fine: b,
            }),
            None => skipped.push(table.epsilons[i]),
        }
    }
    BoundaryScan {
        kind: kind.as_str().to_string(),
        nominal_order: nominal,
        band,
        cells,
        rows_without_transition: skipped,
    }
}

/// CSV rows: one line per (epsilon, tau) cell.
pub fn write_csv<W: std::io::Write>(table: &ConvergenceTable, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "epsilon",
        "tau",
        "error",
        "order",
        "nonresonant",
        "margin",
        "scheme",
        "preset",
        "M",
        "T",
        "tau_ref",
    ])
    .map_err(|e| Error::Param(format!("csv: {e}")))?;
    for row in &table.cells {
        for c in row {
            w.write_record([
                format!("{}", c.epsilon),
                format!("{}", c.tau),
                format!("{}", c.error),
                c.order.map(|o| format!("{o}")).unwrap_or_default(),
                format!("{}", c.nonresonant),
                format!("{}", c.margin),
                table.scheme.as_str().to_string(),
                table.preset.clone(),
                format!("{}", table.m_per_axis),
                format!("{}", table.t_final),
                format!("{}", table.tau_ref),
            ])
            .map_err(|e| Error::Param(format!("csv: {e}")))?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct RunMetadata {
    pub version: String,
    pub git_hash: String,
    pub created_unix: u64,
    pub wall_seconds_total: f64,
}

impl RunMetadata {
    pub fn collect(wall_seconds_total: f64) -> Self {
        RunMetadata {
            version: env!("CARGO_PKG_VERSION").to_string(),
            git_hash: option_env!("DIRAC_SPLIT_GIT_HASH").unwrap_or("unknown").to_string(),
            created_unix: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            wall_seconds_total,
        }
    }
}

/// Full JSON document: metadata, sweep description, cells, uniform row,
/// diagnostics. Timing lives only under "metadata" and "timing" so
/// determinism checks can strip it.
pub fn table_json(table: &ConvergenceTable, meta: &RunMetadata) -> serde_json::Value {
    serde_json::json!({
        "metadata": {
            "version": meta.version,
            "git_hash": meta.git_hash,
            "created_unix": meta.created_unix,
        },
        "timing": {
            "wall_seconds_total": meta.wall_seconds_total,
            "wall_seconds_references": table.wall_seconds_references,
            "wall_seconds_cells": table.wall_seconds_cells,
        },
        "sweep": {
            "preset": table.preset,
            "scheme": table.scheme.as_str(),
            "profile": table.profile.as_str(),
            "M": table.m_per_axis,
            "T": table.t_final,
            "tau_ref": table.tau_ref,
            "delta": table.delta,
            "epsilons": table.epsilons,
            "taus": table.taus,
            "workers": table.workers,
            "references_computed": table.references_computed,
            "references_loaded": table.references_loaded,
            "noise_floor": table.noise_floor,
            "noise_floor_epsilon": table.noise_floor_epsilon,
        },
        "cells": table.cells.iter().flatten().collect::<Vec<_>>(),
        "uniform": table.uniform,
        "diagnostics": table.diagnostics,
    })
}

pub fn write_json<W: std::io::Write>(
    table: &ConvergenceTable,
    meta: &RunMetadata,
    mut out: W,
) -> Result<()> {
    let doc = table_json(table, meta);
    serde_json::to_writer_pretty(&mut out, &doc).map_err(|e| Error::Param(format!("json: {e}")))?;
    out.write_all(b"\n")?;
    Ok(())
}

/// {preset}_{scheme}_{profile}_{timestamp} with a UTC timestamp like
/// 20260822T141503Z.
pub fn output_basename(table: &ConvergenceTable, created_unix: u64) -> String {
    format!(
        "{}_{}_{}_{}",
        table.preset,
        table.scheme.as_str(),
        table.profile.as_str(),
        utc_stamp(created_unix)
    )
}

// Civil-from-days conversion on the proleptic Gregorian calendar.
fn utc_stamp(unix: u64) -> String {
    let secs_of_day = unix % 86_400;
    let days = (unix / 86_400) as i64;
    let (y, m, d) = {
        let z = days + 719_468;
        let era = z.div_euclid(146_097);
        let doe = z.rem_euclid(146_097);
        let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
        let y = yoe + era * 400;
        let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
        let mp = (5 * doy + 2) / 153;
        let d = doy - (153 * mp + 2) / 5 + 1;
        let m = if mp < 10 { mp + 3 } else { mp - 9 };
        (if m <= 2 { y + 1 } else { y }, m, d)
    };
    format!(
        "{y:04}{m:02}{d:02}T{:02}{:02}{:02}Z",
        secs_of_day / 3600,
        (secs_of_day % 3600) / 60,
        secs_of_day % 60
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preset;

    fn synthetic_table(scheme: Scheme, errors: &[Vec<f64>], taus: &[f64], eps: &[f64]) -> ConvergenceTable {
        let cells: Vec<Vec<CellResult>> = errors
            .iter()
            .zip(eps)
            .map(|(row, &e)| {
                row.iter()
                    .zip(taus)
                    .map(|(&err, &tau)| CellResult {
                        epsilon: e,
                        tau,
                        error: err,
                        order: None,
                        nonresonant: true,
                        margin: 1.0,
                        mass_drift: 0.0,
                        steps: 1,
                    })
                    .collect()
            })
            .collect();
        let mut table = ConvergenceTable {
            preset: "synthetic".into(),
            scheme,
            profile: Profile::Desk,
            m_per_axis: 8,
            t_final: 1.0,
            tau_ref: 1e-6,
            delta: 0.1,
            epsilons: eps.to_vec(),
            taus: taus.to_vec(),
            cells,
            uniform: Vec::new(),
            noise_floor: 1e-14,
            noise_floor_epsilon: eps[0],
            references_computed: 0,
            references_loaded: 0,
            diagnostics: Diagnostics {
                max_mass_drift: 0.0,
                projector_identity_residual: 0.0,
                flow_decomposition_residual: 0.0,
            },
            workers: 1,
            wall_seconds_references: 0.0,
            wall_seconds_cells: 0.0,
        };
        // Orders with no floor in play.
        for row in &mut table.cells {
            for m in 1..row.len() {
                let (a, b) = (row[m - 1].error, row[m].error);
                row[m].order = Some((a / b).ln() / (taus[m - 1] / taus[m]).ln());
            }
        }
        for m in 0..taus.len() {
            let best = table
                .cells
                .iter()
                .map(|r| r[m].error)
                .fold(f64::NEG_INFINITY, f64::max);
            table.uniform.push(UniformCell {
                tau: taus[m],
                error: best,
                order: None,
                argmax_epsilon: eps[0],
            });
        }
        table
    }

    #[test]
    fn uniform_fit_recovers_known_slope() {
        let taus: [f64; 4] = [0.5, 0.25, 0.125, 0.0625];
        let errors = vec![taus.iter().map(|t| 3.0 * t.powf(1.5)).collect::<Vec<_>>()];
        let table = synthetic_table(Scheme::Strang, &errors, &taus, &[1.0]);
        let slope = fit_uniform_order(&table).unwrap();
        assert!((slope - 1.5).abs() < 1e-12);

        let short = synthetic_table(Scheme::Strang, &[vec![1.0, 0.5]], &[0.5, 0.25], &[1.0]);
        assert!(fit_uniform_order(&short).is_err());
    }

    #[test]
    fn boundary_detector_finds_catch_up_column() {
        // Staircase rows shaped like the resonant first-order tables: order
        // near 1 for tau >> eps^2, a dip, a catch-up column, then settled
        // first order. Errors are built to produce the order sequence.
        let taus: Vec<f64> = (0..6).map(|m| 0.8 / 4f64.powi(m)).collect();
        // Row orders by construction: [1.0, 0.3, 2.4, 1.0, 1.0].
        let orders = [1.0, 0.3, 2.4, 1.0, 1.0];
        let mut row = vec![0.5];
        for (m, o) in orders.iter().enumerate() {
            let next = row[m] / 4f64.powf(*o);
            row.push(next);
        }
        let eps = 0.125; // boundary at taus[3] ~ eps^2 scale
        let table = synthetic_table(Scheme::LieTrotter, &[row], &taus, &[eps]);
        let scan = detect_regime_boundary(&table, BoundaryKind::TauEps2);
        assert_eq!(scan.cells.len(), 1);
        let cell = &scan.cells[0];
        // From the small-tau side the first mixed pair is (o_3, o_4) =
        // (2.4, 1.0), sharing column 3.
        assert_eq!(cell.tau, taus[3]);
        assert!((cell.order_coarse - 2.4).abs() < 1e-9);
        assert!((cell.order_fine - 1.0).abs() < 1e-9);
        let consistency = scan.consistency(BoundaryKind::TauEps2).unwrap();
        assert_eq!(consistency.total_rows, 1);
        assert_eq!(consistency.consistent_rows, 1);
        // taus[3] = 0.0125 against eps^2 = 0.015625.
        assert!((consistency.median_factor - 0.8).abs() < 1e-12);

        // From the large-tau side the first mixed pair is (o_1, o_2) =
        // (1.0, 0.3), sharing column 1.
        let scan = detect_regime_boundary(&table, BoundaryKind::TauEps);
        assert_eq!(scan.cells.len(), 1);
        assert_eq!(scan.cells[0].tau, taus[1]);
    }

    #[test]
    fn boundary_detector_notes_rows_without_transition() {
        let taus: Vec<f64> = (0..4).map(|m| 0.8 / 4f64.powi(m)).collect();
        // Clean first order everywhere: no transition.
        let row: Vec<f64> = taus.iter().map(|t| 0.4 * t).collect();
        let table = synthetic_table(Scheme::LieTrotter, &[row], &taus, &[1.0]);
        let scan = detect_regime_boundary(&table, BoundaryKind::TauEps2);
        assert!(scan.cells.is_empty());
        assert_eq!(scan.rows_without_transition, vec![1.0]);
        assert!(scan.consistency(BoundaryKind::TauEps2).is_none());
    }

    #[test]
    fn small_sweep_end_to_end() {
        let p = ProblemPreset {
            id: "smoke".into(),
            profile: Profile::Desk,
            form: SpinorForm::TwoComponent,
            bounds: (-16.0, 16.0),
            points: 64,
            t_final: 0.5,
            ref_steps: 2000,
            potential_id: "rational-ramp".into(),
            initial_id: "gaussian-pair".into(),
            epsilons: vec![1.0, 0.5],
            tau0: 0.1,
            tau_ratio: 2.0,
            tau_levels: 3,
        };
        let dir = tempfile::tempdir().unwrap();
        let cache = ReferenceCache::new(dir.path()).unwrap();
        let req = SweepRequest::from_preset(&p, Scheme::Strang, 0.1, 1).unwrap();

        let table = run_sweep(&req, Some(&cache)).unwrap();
        assert_eq!(table.cells.len(), 2);
        assert_eq!(table.cells[0].len(), 3);
        assert_eq!(table.references_computed, 3); // 2 rows + noise probe
        assert_eq!(table.references_loaded, 0);
        // Second order shows up already on this coarse ladder.
        for row in &table.cells {
            for c in &row[1..] {
                let o = c.order.expect("orders defined well above the floor");
                assert!((o - 2.0).abs() < 0.5, "order {o}");
            }
        }
        // Uniform row is the columnwise max.
        for (m, u) in table.uniform.iter().enumerate() {
            let max = table.cells.iter().map(|r| r[m].error).fold(0.0f64, f64::max);
            assert_eq!(u.error, max);
        }
        assert!(table.diagnostics.max_mass_drift < 1e-10);
        assert!(table.diagnostics.projector_identity_residual < 1e-12);
        assert!(table.diagnostics.flow_decomposition_residual < 1e-11);

        // Warm rerun: identical table, zero recomputation.
        let again = run_sweep(&req, Some(&cache)).unwrap();
        assert_eq!(again.references_computed, 0);
        assert_eq!(again.references_loaded, 3);
        let mut csv_a = Vec::new();
        let mut csv_b = Vec::new();
        write_csv(&table, &mut csv_a).unwrap();
        write_csv(&again, &mut csv_b).unwrap();
        assert_eq!(csv_a, csv_b, "cold and warm sweeps must agree byte for byte");

        // JSON round-trips bit-exactly.
        let meta = RunMetadata::collect(1.25);
        let doc = table_json(&table, &meta);
        let text = serde_json::to_string(&doc).unwrap();
        let reparsed: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(doc, reparsed);
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let p = ProblemPreset {
            id: "smoke".into(),
            profile: Profile::Desk,
            form: SpinorForm::TwoComponent,
            bounds: (-16.0, 16.0),
            points: 64,
            t_final: 0.5,
            ref_steps: 1000,
            potential_id: "rational-ramp".into(),
            initial_id: "gaussian-pair".into(),
            epsilons: vec![1.0, 0.5],
            tau0: 0.1,
            tau_ratio: 2.0,
            tau_levels: 2,
        };
        let dir = tempfile::tempdir().unwrap();
        let cache = ReferenceCache::new(dir.path()).unwrap();
        let mut req = SweepRequest::from_preset(&p, Scheme::LieTrotter, 0.1, 1).unwrap();
        let one = run_sweep(&req, Some(&cache)).unwrap();
        req.workers = 4;
        let four = run_sweep(&req, Some(&cache)).unwrap();
        let (mut a, mut b) = (Vec::new(), Vec::new());
        write_csv(&one, &mut a).unwrap();
        write_csv(&four, &mut b).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn missing_reference_without_compute_permission_fails() {
        let p = preset::preset("example1", Scheme::LieTrotter, Profile::Desk).unwrap();
        let mut req = SweepRequest::from_preset(&p, Scheme::LieTrotter, 0.1, 1).unwrap();
        req.allow_compute_references = false;
        let dir = tempfile::tempdir().unwrap();
        let cache = ReferenceCache::new(dir.path()).unwrap();
        match run_sweep(&req, Some(&cache)) {
            Err(Error::MissingReference { .. }) => {}
            other => panic!("expected a missing-reference error, got {other:?}"),
        }
    }

    #[test]
    fn validation_collects_every_problem() {
        let p = preset::preset("example1", Scheme::LieTrotter, Profile::Desk).unwrap();
        let mut req = SweepRequest::from_preset(&p, Scheme::LieTrotter, 0.1, 1).unwrap();
        req.epsilons = vec![2.0];
        req.taus = vec![0.33];
        req.delta = 1.5;
        let err = run_sweep(&req, None).unwrap_err().to_string();
        assert!(err.contains("2"), "epsilon problem reported: {err}");
        assert!(err.contains("0.33"), "step problem reported: {err}");
        assert!(err.contains("1.5"), "threshold problem reported: {err}");
    }

    #[test]
    fn timestamp_and_basename() {
        assert_eq!(utc_stamp(0), "19700101T000000Z");
        assert_eq!(utc_stamp(86_399), "19700101T235959Z");
        // 2026-08-22 14:15:03 UTC.
        assert_eq!(utc_stamp(1_787_408_103), "20260822T141503Z");
        let taus = [0.5, 0.25, 0.125];
        let errors = vec![taus.iter().map(|t| t * 0.3).collect::<Vec<_>>()];
        let table = synthetic_table(Scheme::Strang, &errors, &taus, &[1.0]);
        assert_eq!(
            output_basename(&table, 1_787_408_103),
            "synthetic_s2_desk_20260822T141503Z"
        );
    }

    #[test]
    fn reference_error_model_shape() {
        // Saturates below eps^2 = tau_e, decays like eps^-3 above.
        let tau_e = 1e-4;
        assert_eq!(predicted_reference_error(tau_e, 1e-3), tau_e.powf(1.5));
        let a = predicted_reference_error(tau_e, 0.5);
        let b = predicted_reference_error(tau_e, 1.0);
        assert!((a / b - 8.0).abs() < 1e-12);
    }
}
