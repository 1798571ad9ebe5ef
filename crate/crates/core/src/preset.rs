//! Named benchmark problems: grids, potentials, initial data, reference
//! resolutions and default sweep ladders.
//!
//! Every preset exists in two sizes. The desk profile is meant to finish
//! on a laptop core in minutes; the full profile reproduces the published
//! working resolutions and runs for hours. Both share the same physics,
//! only epsilon rows, reference step counts and (for the 2D problem) the
//! box change.

use crate::dirac::{Potential, Scheme, SpinorForm};
use crate::field::SpectralField;
use crate::grid::PeriodicGrid;
use crate::numeric::c64;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    Desk,
    Full,
}

impl Profile {
    pub fn as_str(self) -> &'static str {
        match self {
            Profile::Desk => "desk",
            Profile::Full => "full",
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Profile {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Profile::Desk),
            "full" => Ok(Profile::Full),
            other => Err(Error::UnknownId(format!("profile '{other}' (try desk or full)"))),
        }
    }
}

/// A fully resolved problem instance plus its sweep defaults.
#[derive(Debug, Clone)]
pub struct ProblemPreset {
    pub id: String,
    pub profile: Profile,
    pub form: SpinorForm,
    /// Same interval on every axis.
    pub bounds: (f64, f64),
    /// Nodes per axis.
    pub points: usize,
    pub t_final: f64,
    /// Reference runs use t_final / ref_steps as their step.
    pub ref_steps: usize,
    pub potential_id: String,
    pub initial_id: String,
    pub epsilons: Vec<f64>,
    pub tau0: f64,
    pub tau_ratio: f64,
    pub tau_levels: usize,
}

impl ProblemPreset {
    pub fn grid(&self) -> Result<PeriodicGrid> {
        match self.form {
            SpinorForm::TwoComponent => {
                PeriodicGrid::line(self.bounds.0, self.bounds.1, self.points)
            }
            SpinorForm::FourComponent => {
                PeriodicGrid::square(self.bounds.0, self.bounds.1, self.points)
            }
        }
    }

    pub fn potential(&self) -> Result<Potential> {
        potential_by_id(&self.potential_id)
    }

    pub fn initial(&self) -> Result<SpectralField> {
        initial_by_id(&self.initial_id, self.grid()?)
    }

    pub fn tau_ladder(&self) -> Result<Vec<f64>> {
        crate::resonance::geometric_ladder(self.tau0, self.tau_ratio, self.tau_levels)
    }

    pub fn tau_ref(&self) -> f64 {
        self.t_final / self.ref_steps as f64
    }
}

pub const PRESET_IDS: [&str; 4] = ["example1", "example2", "example3", "example3nr"];

fn dyadic(js: &[i32]) -> Vec<f64> {
    js.iter().map(|&j| 2f64.powi(-j)).collect()
}

fn powers(exponents: &[f64]) -> Vec<f64> {
    exponents.iter().map(|&e| 2f64.powf(-e)).collect()
}

/// Resolve a preset. The scheme matters only where the published step
/// ladders differ between S1 and S2.
pub fn preset(id: &str, scheme: Scheme, profile: Profile) -> Result<ProblemPreset> {
    let desk = profile == Profile::Desk;
    let p = match id {
        // 1D, smooth ramp potential, resonant step ladder tau0 = pi/4.
        "example1" => ProblemPreset {
            id: id.into(),
            profile,
            form: SpinorForm::TwoComponent,
            bounds: (-32.0, 32.0),
            points: 1024,
            t_final: 2.0 * PI,
            ref_steps: if desk { 100_000 } else { 1_000_000 },
            potential_id: "rational-ramp".into(),
            initial_id: "gaussian-pair".into(),
            epsilons: if desk {
                dyadic(&[0, 1, 2, 3, 4, 5, 6, 7])
            } else {
                dyadic(&[0, 1, 2, 3, 4, 5, 7, 9, 11])
            },
            tau0: PI / 4.0,
            tau_ratio: 4.0,
            // The extra desk level gives the boundary detector one more
            // settled column on the small-eps rows.
            tau_levels: if desk { 7 } else { 6 },
        },
        // Same physics on a tighter box over T = 4 with dyadic steps,
        // which keep every (eps, tau) pair away from the resonance set.
        "example2" => ProblemPreset {
            id: id.into(),
            profile,
            form: SpinorForm::TwoComponent,
            bounds: (-16.0, 16.0),
            points: 512,
            t_final: 4.0,
            ref_steps: 500_000,
            potential_id: "rational-ramp".into(),
            initial_id: "gaussian-pair".into(),
            epsilons: match (scheme, desk) {
                (Scheme::Strang, false) => dyadic(&[1, 2, 3, 4, 5, 6, 8, 10, 12, 14]),
                _ => dyadic(&[0, 1, 2, 3, 4, 5, 6, 7]),
            },
            tau0: 0.5,
            tau_ratio: if scheme == Scheme::Strang { 4.0 } else { 2.0 },
            tau_levels: if scheme == Scheme::Strang { 6 } else { 7 },
        },
        // 2D honeycomb lattice potential, resonant ladder tau0 = pi/16.
        "example3" => ProblemPreset {
            id: id.into(),
            profile,
            form: SpinorForm::FourComponent,
            bounds: if desk { (-8.0, 8.0) } else { (-10.0, 10.0) },
            points: if desk { 128 } else { 320 },
            t_final: 2.0 * PI,
            ref_steps: 100_000,
            potential_id: "honeycomb".into(),
            initial_id: "gaussian-quartet".into(),
            epsilons: if desk {
                dyadic(&[0, 1, 2, 3, 4])
            } else {
                dyadic(&[0, 1, 2, 3, 4, 8, 12, 16])
            },
            tau0: PI / 16.0,
            tau_ratio: 4.0,
            tau_levels: 6,
        },
        // 2D honeycomb over T = 4 with nonresonant dyadic steps.
        "example3nr" => ProblemPreset {
            id: id.into(),
            profile,
            form: SpinorForm::FourComponent,
            bounds: if desk { (-8.0, 8.0) } else { (-10.0, 10.0) },
            points: if desk { 128 } else { 320 },
            t_final: 4.0,
            ref_steps: if desk { 100_000 } else { 400_000 },
            potential_id: "honeycomb".into(),
            initial_id: "gaussian-quartet".into(),
            epsilons: if desk {
                dyadic(&[0, 1, 2, 3, 4])
            } else {
                powers(&[0.0, 1.5, 3.0, 4.5, 6.0, 9.0, 12.0, 15.0])
            },
            tau0: 0.125,
            tau_ratio: 8.0,
            tau_levels: 5,
        },
        other => {
            return Err(Error::UnknownId(format!(
                "preset '{other}' (known: {})",
                PRESET_IDS.join(", ")
            )))
        }
    };
    debug_assert!(p.ref_steps % 2 == 0, "noise-floor probe halves the reference step count");
    Ok(p)
}

/// Potentials addressable by id: "zero", "const:<value>", "rational-ramp"
/// (the 1D benchmark ramp (1 - x) / (1 + x^2)) and "honeycomb" (the 2D
/// three-cosine lattice).
pub fn potential_by_id(id: &str) -> Result<Potential> {
    if id == "zero" {
        return Ok(Potential::zero());
    }
    if let Some(v) = id.strip_prefix("const:") {
        let value: f64 = v
            .parse()
            .map_err(|_| Error::UnknownId(format!("constant potential value '{v}'")))?;
        if !value.is_finite() {
            return Err(Error::UnknownId(format!("constant potential value '{v}'")));
        }
        return Ok(Potential::constant(value));
    }
    match id {
        "rational-ramp" => Ok(Potential::time_independent("rational-ramp", |x| {
            (1.0 - x[0]) / (1.0 + x[0] * x[0])
        })),
        "honeycomb" => Ok(Potential::time_independent("honeycomb", |x| {
            let s = 2.0 * PI / 3f64.sqrt();
            (-2.0 * s * x[0]).cos() + (s * (x[0] + 3f64.sqrt() * x[1])).cos()
                + (s * (x[0] - 3f64.sqrt() * x[1])).cos()
        })),
        other => Err(Error::UnknownId(format!(
            "potential '{other}' (known: zero, const:<v>, rational-ramp, honeycomb)"
        ))),
    }
}

/// Initial data addressable by id. "gaussian-pair" needs a 1D grid,
/// "gaussian-quartet" a 2D grid.
pub fn initial_by_id(id: &str, grid: PeriodicGrid) -> Result<SpectralField> {
    match id {
        "gaussian-pair" => {
            if grid.dim() != 1 {
                return Err(Error::Mismatch("gaussian-pair lives on a 1D grid".into()));
            }
            Ok(SpectralField::from_fn(grid, 2, |x, c| {
                let shift = if c == 0 { 0.0 } else { 1.0 };
                let d = x[0] - shift;
                c64((-0.5 * d * d).exp(), 0.0)
            }))
        }
        "gaussian-quartet" => {
            if grid.dim() != 2 {
                return Err(Error::Mismatch("gaussian-quartet lives on a 2D grid".into()));
            }
            Ok(SpectralField::from_fn(grid, 4, |x, c| {
                let (dx, dy) = match c {
                    0 => (0.0, 0.0),
                    1 => (1.0, 0.0),
                    2 => (-1.0, -1.0),
                    _ => (0.0, 1.0),
                };
                let (u, v) = (x[0] - dx, x[1] - dy);
                c64((-0.5 * (u * u + v * v)).exp(), 0.0)
            }))
        }
        other => Err(Error::UnknownId(format!(
            "initial data '{other}' (known: gaussian-pair, gaussian-quartet)"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dirac::mass;

    #[test]
    fn registry_resolves_every_preset() {
        for id in PRESET_IDS {
            for scheme in [Scheme::LieTrotter, Scheme::Strang] {
                for profile in [Profile::Desk, Profile::Full] {
                    let p = preset(id, scheme, profile).unwrap();
                    assert_eq!(p.id, id);
                    p.grid().unwrap();
                    p.potential().unwrap();
                    assert!(!p.epsilons.is_empty());
                    assert!(p.epsilons.iter().all(|&e| e > 0.0 && e <= 1.0));
                    let ladder = p.tau_ladder().unwrap();
                    assert_eq!(ladder.len(), p.tau_levels);
                    // Precision guard: every cell and the reference step
                    // count divide the horizon cleanly.
                    for tau in ladder {
                        let n = (p.t_final / tau).round();
                        assert!((n * tau - p.t_final).abs() < 1e-9 * p.t_final.max(1.0));
                    }
                }
            }
        }
        assert!(preset("example9", Scheme::Strang, Profile::Desk).is_err());
    }

    #[test]
    fn desk_and_full_differ_only_where_expected() {
        let desk = preset("example1", Scheme::LieTrotter, Profile::Desk).unwrap();
        let full = preset("example1", Scheme::LieTrotter, Profile::Full).unwrap();
        assert_eq!(desk.points, full.points);
        assert_eq!(desk.bounds, full.bounds);
        assert!(full.ref_steps > desk.ref_steps);
        assert!(full.epsilons.len() > desk.epsilons.len());
    }

    #[test]
    fn gaussian_pair_mass_is_two_root_pi() {
        // Both components are unit Gaussians; the box is wide enough that
        // the periodization error sits far below rounding.
        let p = preset("example1", Scheme::LieTrotter, Profile::Desk).unwrap();
        let u = p.initial().unwrap();
        let expected = 2.0 * PI.sqrt();
        assert!((mass(&u) - expected).abs() < 1e-12, "mass {}", mass(&u));
    }

    #[test]
    fn gaussian_quartet_mass_is_four_pi() {
        // Four unit 2D Gaussians, each of squared norm pi.
        let p = preset("example3", Scheme::Strang, Profile::Desk).unwrap();
        let u = p.initial().unwrap();
        let expected = 4.0 * PI;
        assert!((mass(&u) - expected).abs() < 1e-10, "mass {}", mass(&u));
    }

    #[test]
    fn potential_registry_values() {
        let ramp = potential_by_id("rational-ramp").unwrap();
        assert_eq!(ramp.eval(0.0, [0.0, 0.0]), 1.0);
        assert_eq!(ramp.eval(0.0, [1.0, 0.0]), 0.0);
        assert!((ramp.eval(0.0, [-1.0, 0.0]) - 1.0).abs() < 1e-15);

        let honey = potential_by_id("honeycomb").unwrap();
        assert!((honey.eval(0.0, [0.0, 0.0]) - 3.0).abs() < 1e-15);
        // Lattice periodicity: sqrt(3) along x1, 1 along x2.
        let a = honey.eval(0.0, [0.37, -0.61]);
        let b = honey.eval(0.0, [0.37 + 3f64.sqrt(), -0.61 + 1.0]);
        assert!((a - b).abs() < 1e-12);

        let c = potential_by_id("const:2.5").unwrap();
        assert_eq!(c.eval(1.0, [4.0, 0.0]), 2.5);
        assert_eq!(c.id(), "const:2.5");
        assert!(potential_by_id("const:abc").is_err());
        assert!(potential_by_id("nope").is_err());
    }

    #[test]
    fn initial_data_rejects_wrong_dimension() {
        let line = PeriodicGrid::line(-8.0, 8.0, 32).unwrap();
        let square = PeriodicGrid::square(-8.0, 8.0, 16).unwrap();
        assert!(initial_by_id("gaussian-pair", square).is_err());
        assert!(initial_by_id("gaussian-quartet", line).is_err());
    }
}
