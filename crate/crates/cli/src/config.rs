//! Run configuration: a TOML file overlaid with command-line flags, flags
//! winning field by field. The resolved form is what `--dump-config`
//! echoes, and the echo re-parses to the identical run.

use dirac_split::dirac::{Scheme, SpinorForm};
use dirac_split::field::SpectralField;
use dirac_split::grid::PeriodicGrid;
use dirac_split::preset::{self, Profile, ProblemPreset};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::PathBuf;
use std::str::FromStr;

/// Step sizes in config files may be plain numbers or pi literals like
/// "pi/4" or "2pi". Dumps always emit numbers, which round-trip exactly.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TauLiteral {
    Number(f64),
    Text(String),
}

impl TauLiteral {
    pub fn value(&self) -> Result<f64, String> {
        match self {
            TauLiteral::Number(v) => Ok(*v),
            TauLiteral::Text(s) => parse_pi_literal(s),
        }
    }
}

/// "pi/4", "2pi", "3pi/16", "0.125" and friends.
pub fn parse_pi_literal(text: &str) -> Result<f64, String> {
    let bad = || format!("step size {text:?} is not a number or a pi literal like pi/4 or 2pi");
    let s = text.trim().to_ascii_lowercase();
    let Some(at) = s.find("pi") else {
        return s.parse::<f64>().map_err(|_| bad());
    };
    let coef_text = s[..at].trim_end_matches('*').trim();
    let coef = if coef_text.is_empty() { 1.0 } else { coef_text.parse::<f64>().map_err(|_| bad())? };
    let rest = s[at + 2..].trim();
    let denom = if rest.is_empty() {
        1.0
    } else if let Some(d) = rest.strip_prefix('/') {
        d.trim().parse::<f64>().map_err(|_| bad())?
    } else {
        return Err(bad());
    };
    if denom == 0.0 {
        return Err(bad());
    }
    Ok(coef * PI / denom)
}

/// Ad-hoc problem description used when no preset is named. The box is the
/// same interval on every axis; the initial-data id fixes the spinor form
/// and hence the dimension.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct InlineProblem {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
    pub potential: String,
    pub initial: String,
    pub t_final: f64,
    #[serde(default = "default_inline_ref_steps")]
    pub ref_steps: usize,
}

fn default_inline_ref_steps() -> usize {
    20_000
}

/// The on-disk config shape. Every field optional so a file can pin just
/// the parts it cares about and leave the rest to flags or defaults.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct FileConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scheme: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub profile: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub epsilon: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tau: Vec<TauLiteral>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau0: Option<TauLiteral>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub levels: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cache: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub compute_references: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inline: Option<InlineProblem>,
}

/// Flag values as clap hands them over; `None`/empty means "not given".
#[derive(Debug, Clone, Default)]
pub struct FlagOverrides {
    pub preset: Option<String>,
    pub scheme: Option<String>,
    pub profile: Option<String>,
    pub full: bool,
    pub epsilon: Vec<f64>,
    pub tau: Vec<String>,
    pub tau0: Option<String>,
    pub ratio: Option<f64>,
    pub levels: Option<usize>,
    pub delta: Option<f64>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub cache: Option<PathBuf>,
    pub no_compute_references: bool,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub points: Option<usize>,
    pub potential: Option<String>,
    pub initial: Option<String>,
    pub t_final: Option<f64>,
    pub ref_steps: Option<usize>,
}

impl FileConfig {
    /// Flags win over file fields. Inline-problem flags patch the inline
    /// table field by field, starting from an empty template when the file
    /// had none.
    pub fn overlay(mut self, flags: &FlagOverrides) -> Result<FileConfig, Vec<String>> {
        if let Some(p) = &flags.preset {
            self.preset = Some(p.clone());
        }
        if let Some(s) = &flags.scheme {
            self.scheme = Some(s.clone());
        }
        if flags.full {
            self.profile = Some("full".into());
        } else if let Some(p) = &flags.profile {
            self.profile = Some(p.clone());
        }
        if !flags.epsilon.is_empty() {
            self.epsilon = flags.epsilon.clone();
        }
        if !flags.tau.is_empty() {
            self.tau = flags.tau.iter().map(|t| TauLiteral::Text(t.clone())).collect();
        }
        if let Some(t) = &flags.tau0 {
            self.tau0 = Some(TauLiteral::Text(t.clone()));
        }
        if let Some(r) = flags.ratio {
            self.ratio = Some(r);
        }
        if let Some(l) = flags.levels {
            self.levels = Some(l);
        }
        if let Some(d) = flags.delta {
            self.delta = Some(d);
        }
        if let Some(o) = &flags.out {
            self.out = Some(o.clone());
        }
        if let Some(w) = flags.workers {
            self.workers = Some(w);
        }
        if let Some(c) = &flags.cache {
            self.cache = Some(c.clone());
        }
        if flags.no_compute_references {
            self.compute_references = Some(false);
        }

        let wants_inline = flags.lo.is_some()
            || flags.hi.is_some()
            || flags.points.is_some()
            || flags.potential.is_some()
            || flags.initial.is_some()
            || flags.t_final.is_some()
            || flags.ref_steps.is_some();
        if wants_inline {
            let mut missing = Vec::new();
            let base = self.inline.take();
            let pick_f64 = |flag: Option<f64>, file: Option<f64>, name: &str, missing: &mut Vec<String>| {
                flag.or(file).unwrap_or_else(|| {
                    missing.push(format!("inline problem needs --{name}"));
                    f64::NAN
                })
            };
            let lo = pick_f64(flags.lo, base.as_ref().map(|b| b.lo), "lo", &mut missing);
            let hi = pick_f64(flags.hi, base.as_ref().map(|b| b.hi), "hi", &mut missing);
            let t_final =
                pick_f64(flags.t_final, base.as_ref().map(|b| b.t_final), "t-final", &mut missing);
            let points = flags.points.or(base.as_ref().map(|b| b.points)).unwrap_or_else(|| {
                missing.push("inline problem needs --points".into());
                0
            });
            let potential = flags
                .potential
                .clone()
                .or(base.as_ref().map(|b| b.potential.clone()))
                .unwrap_or_else(|| {
                    missing.push("inline problem needs --potential".into());
                    String::new()
                });
            let initial = flags
                .initial
                .clone()
                .or(base.as_ref().map(|b| b.initial.clone()))
                .unwrap_or_else(|| {
                    missing.push("inline problem needs --initial".into());
                    String::new()
                });
            let ref_steps = flags
                .ref_steps
                .or(base.as_ref().map(|b| b.ref_steps))
                .unwrap_or_else(default_inline_ref_steps);
            if !missing.is_empty() {
                return Err(missing);
            }
            self.inline =
                Some(InlineProblem { lo, hi, points, potential, initial, t_final, ref_steps });
        }
        Ok(self)
    }
}

/// A fully resolved sweep-shaped run: concrete problem, numeric step list,
/// concrete directories. Built once, validated once, then executed.
#[derive(Debug)]
pub struct ResolvedRun {
    pub preset_id: String,
    pub profile: Profile,
    pub scheme: Scheme,
    pub form: SpinorForm,
    pub grid: PeriodicGrid,
    pub potential_id: String,
    pub initial_id: String,
    pub t_final: f64,
    pub ref_steps: usize,
    pub epsilons: Vec<f64>,
    pub taus: Vec<f64>,
    pub delta: f64,
    pub out: PathBuf,
    pub workers: usize,
    pub cache_dir: PathBuf,
    pub compute_references: bool,
    /// The echo shape: re-parsing this must reproduce the same run.
    pub echo: FileConfig,
}

impl ResolvedRun {
    pub fn initial(&self) -> dirac_split::Result<SpectralField> {
        preset::initial_by_id(&self.initial_id, self.grid.clone())
    }

    pub fn potential(&self) -> dirac_split::Result<dirac_split::dirac::Potential> {
        preset::potential_by_id(&self.potential_id)
    }
}

pub const CACHE_ENV: &str = "DIRAC_SPLIT_CACHE";

fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

/// Turn the merged file+flag config into a concrete run. Every problem is
/// collected before reporting so one pass shows them all.
pub fn resolve(merged: FileConfig) -> Result<ResolvedRun, Vec<String>> {
    let mut problems = Vec::new();

    let scheme = match merged.scheme.as_deref() {
        None => Scheme::Strang,
        Some(text) => Scheme::from_str(text).unwrap_or_else(|e| {
            problems.push(e.to_string());
            Scheme::Strang
        }),
    };
    let profile = match merged.profile.as_deref() {
        None => Profile::Desk,
        Some(text) => Profile::from_str(text).unwrap_or_else(|e| {
            problems.push(e.to_string());
            Profile::Desk
        }),
    };
    let delta = merged.delta.unwrap_or(0.01);
    if !(delta > 0.0 && delta < 1.0) {
        problems.push(format!("classification threshold {delta} outside (0, 1)"));
    }
    let workers = merged.workers.unwrap_or_else(default_workers);
    if workers == 0 {
        problems.push("worker count must be at least 1".into());
    }

    // Ladder spec sanity, reported together with everything else. The
    // preset branch fills unset pieces from the preset's defaults.
    let tau0 = match &merged.tau0 {
        None => None,
        Some(t) => match t.value() {
            Ok(v) => {
                if !(v.is_finite() && v > 0.0) {
                    problems.push(format!("ladder start must be positive, got {v}"));
                }
                Some(v)
            }
            Err(e) => {
                problems.push(e);
                None
            }
        },
    };
    if let Some(r) = merged.ratio {
        if !(r.is_finite() && r > 1.0) {
            problems.push(format!("ladder ratio must exceed 1, got {r}"));
        }
    }
    if merged.levels == Some(0) {
        problems.push("ladder needs at least one level".into());
    }
    let explicit_taus: Vec<f64> = merged
        .tau
        .iter()
        .filter_map(|t| t.value().map_err(|e| problems.push(e)).ok())
        .collect();
    if !merged.tau.is_empty() && (merged.tau0.is_some() || merged.ratio.is_some() || merged.levels.is_some())
    {
        problems.push("give either an explicit step list or a ladder spec, not both".into());
    }

    let base: Option<ProblemPreset> = match (&merged.preset, &merged.inline) {
        (Some(id), None) => match preset::preset(id, scheme, profile) {
            Ok(p) => Some(p),
            Err(e) => {
                problems.push(e.to_string());
                None
            }
        },
        (None, Some(_)) => None,
        (Some(_), Some(_)) => {
            problems.push("config names a preset and an inline problem; pick one".into());
            None
        }
        (None, None) => {
            problems.push("no problem given: name a --preset or describe one inline".into());
            None
        }
    };

    // Resolve the problem geometry. Inline problems take their dimension
    // from the initial-data id.
    struct Shape {
        preset_id: String,
        form: SpinorForm,
        grid: Option<PeriodicGrid>,
        potential_id: String,
        initial_id: String,
        t_final: f64,
        ref_steps: usize,
        epsilons: Vec<f64>,
        taus: Vec<f64>,
    }

    let shape = if let Some(p) = &base {
        let taus = if !explicit_taus.is_empty() {
            explicit_taus.clone()
        } else {
            let t0 = tau0.unwrap_or(p.tau0);
            let ratio = merged.ratio.unwrap_or(p.tau_ratio);
            let levels = merged.levels.unwrap_or(p.tau_levels);
            match dirac_split::resonance::geometric_ladder(t0, ratio, levels) {
                Ok(l) => l,
                Err(e) => {
                    // Range problems were already collected above; this
                    // only fires for combinations they missed.
                    if !problems.iter().any(|p| p.contains("ladder")) {
                        problems.push(e.to_string());
                    }
                    Vec::new()
                }
            }
        };
        Some(Shape {
            preset_id: p.id.clone(),
            form: p.form,
            grid: p.grid().map_err(|e| problems.push(e.to_string())).ok(),
            potential_id: p.potential_id.clone(),
            initial_id: p.initial_id.clone(),
            t_final: p.t_final,
            ref_steps: p.ref_steps,
            epsilons: if merged.epsilon.is_empty() { p.epsilons.clone() } else { merged.epsilon.clone() },
            taus,
        })
    } else if let Some(inline) = &merged.inline {
        let form = match inline.initial.as_str() {
            "gaussian-pair" => Some(SpinorForm::TwoComponent),
            "gaussian-quartet" => Some(SpinorForm::FourComponent),
            other => {
                problems.push(format!(
                    "initial data '{other}' unknown (gaussian-pair is 1D, gaussian-quartet is 2D)"
                ));
                None
            }
        };
        if let Err(e) = preset::potential_by_id(&inline.potential) {
            problems.push(e.to_string());
        }
        let grid = form.and_then(|f| {
            let built = match f {
                SpinorForm::TwoComponent => PeriodicGrid::line(inline.lo, inline.hi, inline.points),
                SpinorForm::FourComponent => {
                    PeriodicGrid::square(inline.lo, inline.hi, inline.points)
                }
            };
            built.map_err(|e| problems.push(e.to_string())).ok()
        });
        let taus = if !explicit_taus.is_empty() {
            explicit_taus.clone()
        } else if let (Some(t0), Some(r), Some(l)) = (tau0, merged.ratio, merged.levels) {
            dirac_split::resonance::geometric_ladder(t0, r, l).unwrap_or_default()
        } else {
            problems.push("no step sizes: give --tau or a full ladder spec (--tau0 --ratio --levels)".into());
            Vec::new()
        };
        if merged.epsilon.is_empty() {
            problems.push("inline problems need at least one --epsilon".into());
        }
        form.map(|f| Shape {
            preset_id: "inline".into(),
            form: f,
            grid,
            potential_id: inline.potential.clone(),
            initial_id: inline.initial.clone(),
            t_final: inline.t_final,
            ref_steps: inline.ref_steps,
            epsilons: merged.epsilon.clone(),
            taus,
        })
    } else {
        None
    };

    // Value-range checks mirror the solver's own validation so a bad config
    // dies here, before any reference work starts.
    if let Some(s) = &shape {
        for &e in &s.epsilons {
            if !(e.is_finite() && e > 0.0 && e <= 1.0) {
                problems.push(format!("epsilon {e} outside (0, 1]"));
            }
        }
        for &t in &s.taus {
            if !(t.is_finite() && t > 0.0) {
                problems.push(format!("step size {t} not positive"));
            } else {
                let n = (s.t_final / t).round();
                if n < 1.0 || (n * t - s.t_final).abs() > 1e-9 * s.t_final.max(1.0) {
                    problems.push(format!("step size {t} does not divide T = {}", s.t_final));
                }
            }
        }
        if !(s.t_final.is_finite() && s.t_final > 0.0) {
            problems.push(format!("final time {} not positive", s.t_final));
        }
        if s.ref_steps == 0 || s.ref_steps % 2 != 0 {
            problems.push(format!("reference step count {} must be even and positive", s.ref_steps));
        }
    }

    if !problems.is_empty() {
        return Err(problems);
    }
    let shape = shape.expect("problem list empty means the shape resolved");
    let grid = shape.grid.expect("problem list empty means the grid built");

    let out = merged.out.clone().unwrap_or_else(|| PathBuf::from("runs"));
    let cache_dir = merged
        .cache
        .clone()
        .or_else(|| std::env::var_os(CACHE_ENV).map(PathBuf::from))
        .unwrap_or_else(|| out.join("cache"));
    let compute_references = merged.compute_references.unwrap_or(true);

    // The echo pins every resolved value numerically, so a re-parse with no
    // flags reproduces this exact run.
    let echo = FileConfig {
        preset: (shape.preset_id != "inline").then(|| shape.preset_id.clone()),
        scheme: Some(scheme.as_str().into()),
        profile: Some(profile.as_str().into()),
        epsilon: shape.epsilons.clone(),
        tau: shape.taus.iter().map(|&t| TauLiteral::Number(t)).collect(),
        tau0: None,
        ratio: None,
        levels: None,
        delta: Some(delta),
        out: Some(out.clone()),
        workers: Some(workers),
        cache: Some(cache_dir.clone()),
        compute_references: Some(compute_references),
        inline: merged.inline.clone(),
    };

    Ok(ResolvedRun {
        preset_id: shape.preset_id,
        profile,
        scheme,
        form: shape.form,
        grid,
        potential_id: shape.potential_id,
        initial_id: shape.initial_id,
        t_final: shape.t_final,
        ref_steps: shape.ref_steps,
        epsilons: shape.epsilons,
        taus: shape.taus,
        delta,
        out,
        workers,
        cache_dir,
        compute_references,
        echo,
    })
}
