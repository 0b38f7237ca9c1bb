//! Named analytic fields for scenarios and property suites.
//!
//! Smooth profiles carry closed-form first and second derivatives so that
//! discrete operators can be compared against the continuum values.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::calculus::{bochner_margin, ScalarField};
use crate::error::{LabError, Result};
use crate::space::{CurvatureDimension, ModelSpace, Topology};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    Constant {
        value: f64,
    },
    /// `offset + amplitude cos(frequency x)`
    Cosine {
        #[serde(default = "one")]
        offset: f64,
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default = "one")]
        frequency: f64,
    },
    /// `floor + height exp(-(x - center)^2 / (2 width^2))`
    GaussianBump {
        center: f64,
        width: f64,
        #[serde(default = "one")]
        height: f64,
        #[serde(default)]
        floor: f64,
    },
    Tabulated {
        values: Vec<f64>,
    },
    /// Random trigonometric polynomial adapted to the boundary conditions, shifted so its
    /// minimum is `floor`; coefficients decay like `1/k^2`.
    RandomSmooth {
        #[serde(default = "default_modes")]
        modes: usize,
        #[serde(default = "default_floor")]
        floor: f64,
        /// Added to the scenario seed so several random fields can coexist.
        #[serde(default)]
        stream: u64,
    },
}

fn one() -> f64 {
    1.0
}

fn default_modes() -> usize {
    4
}

fn default_floor() -> f64 {
    0.1
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wave {
    pub amplitude: f64,
    pub frequency: f64,
    pub phase: f64,
}

/// A field spec bound to a concrete space and seed.
#[derive(Debug, Clone, PartialEq)]
pub enum ResolvedField {
    Trig { constant: f64, origin: f64, waves: Vec<Wave> },
    Gaussian { center: f64, width: f64, height: f64, floor: f64 },
    Table(Vec<f64>),
}

impl FieldSpec {
    pub fn random_smooth(stream: u64) -> Self {
        FieldSpec::RandomSmooth { modes: default_modes(), floor: default_floor(), stream }
    }

    pub fn resolve(&self, space: &ModelSpace, seed: u64) -> Result<ResolvedField> {
        let finite = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(v)
            } else {
                Err(LabError::InvalidParameter(format!("field parameter {name} must be finite, got {v}")))
            }
        };
        Ok(match self {
            FieldSpec::Constant { value } => {
                ResolvedField::Trig { constant: finite("value", *value)?, origin: 0.0, waves: Vec::new() }
            }
            FieldSpec::Cosine { offset, amplitude, frequency } => ResolvedField::Trig {
                constant: finite("offset", *offset)?,
                origin: 0.0,
                waves: vec![Wave { amplitude: finite("amplitude", *amplitude)?, frequency: finite("frequency", *frequency)?, phase: 0.0 }],
            },
            FieldSpec::GaussianBump { center, width, height, floor } => {
                if !(*width > 0.0) {
                    return Err(LabError::InvalidParameter(format!("bump width must be > 0, got {width}")));
                }
                ResolvedField::Gaussian {
                    center: finite("center", *center)?,
                    width: *width,
                    height: finite("height", *height)?,
                    floor: finite("floor", *floor)?,
                }
            }
            FieldSpec::Tabulated { values } => {
                if values.len() != space.len() {
                    return Err(LabError::Dimension { expected: space.len(), actual: values.len() });
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(LabError::InvalidParameter("tabulated field has non-finite entries".into()));
                }
                ResolvedField::Table(values.clone())
            }
            FieldSpec::RandomSmooth { modes, floor, stream } => {
                if *modes == 0 {
                    return Err(LabError::InvalidParameter("random_smooth needs at least one mode".into()));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(stream.wrapping_mul(0x9e37_79b9_7f4a_7c15)));
                let nodes = space.nodes();
                let (origin, base) = match space.topology() {
                    Topology::Circle => (0.0, 2.0 * std::f64::consts::PI / space.extent()),
                    Topology::IntervalNeumann => (nodes[0], std::f64::consts::PI / (nodes[nodes.len() - 1] - nodes[0])),
                };
                let waves: Vec<Wave> = (1..=*modes)
                    .map(|k| {
                        let amplitude = rng.random_range(-1.0..1.0) / (k * k) as f64;
                        let phase = match space.topology() {
                            Topology::Circle => rng.random_range(0.0..2.0 * std::f64::consts::PI),
                            Topology::IntervalNeumann => 0.0,
                        };
                        Wave { amplitude, frequency: base * k as f64, phase }
                    })
                    .collect();
                let trial = ResolvedField::Trig { constant: 0.0, origin, waves };
                let lowest = nodes.iter().map(|&x| trial.value(x)).fold(f64::INFINITY, f64::min);
                let ResolvedField::Trig { waves, .. } = trial else { unreachable!() };
                ResolvedField::Trig { constant: floor - lowest, origin, waves }
            }
        })
    }

    pub fn sample(&self, space: &ModelSpace, seed: u64) -> Result<ScalarField> {
        self.resolve(space, seed)?.sample(space)
    }
}

impl ResolvedField {
    pub fn value(&self, x: f64) -> f64 {
        self.derivatives(x).map_or(f64::NAN, |d| d[0])
    }

    /// `[f, f', f'']` at `x`, or `None` for tabulated data.
    pub fn derivatives(&self, x: f64) -> Option<[f64; 3]> {
        match self {
            ResolvedField::Trig { constant, origin, waves } => {
                let mut out = [*constant, 0.0, 0.0];
                for w in waves {
                    let arg = w.frequency * (x - origin) + w.phase;
                    let (s, c) = arg.sin_cos();
                    out[0] += w.amplitude * c;
                    out[1] -= w.amplitude * w.frequency * s;
                    out[2] -= w.amplitude * w.frequency * w.frequency * c;
                }
                Some(out)
            }
            ResolvedField::Gaussian { center, width, height, floor } => {
                let z = (x - center) / width;
                let g = height * (-0.5 * z * z).exp();
                Some([floor + g, -z / width * g, (z * z - 1.0) / (width * width) * g])
            }
            ResolvedField::Table(_) => None,
        }
    }

    pub fn sample(&self, space: &ModelSpace) -> Result<ScalarField> {
        match self {
            ResolvedField::Table(values) => Ok(ScalarField(values.clone())),
            _ => Ok(ScalarField::from_fn(space, |x| self.value(x))),
        }
    }
}

/// Continuum Bochner margin `f''^2 - V'' f'^2 - K f'^2 - (f'' + V' f')^2 / N` for `w = e^V`.
pub fn bochner_oracle(space: &ModelSpace, field: &ResolvedField, x: f64, cd: CurvatureDimension) -> Option<f64> {
    let [_, d1, d2] = field.derivatives(x)?;
    let (v1, v2) = space.profile().log_derivatives(x)?;
    let lap = d2 + v1 * d1;
    Some(d2 * d2 - v2 * d1 * d1 - cd.k * d1 * d1 - lap * lap / cd.n)
}

/// Largest gap between discrete and continuum Bochner margins over nodes whose
/// coordinate lies in `[lo, hi]`.
pub fn bochner_oracle_error(
    space: &ModelSpace,
    field: &ResolvedField,
    cd: CurvatureDimension,
    lo: f64,
    hi: f64,
) -> Result<f64> {
    let discrete = bochner_margin(space, &field.sample(space)?, cd)?;
    let mut worst = 0.0_f64;
    let mut seen = false;
    for (i, &x) in space.nodes().iter().enumerate() {
        if x < lo || x > hi {
            continue;
        }
        let exact = bochner_oracle(space, field, x, cd)
            .ok_or_else(|| LabError::InvalidParameter("no analytic Bochner margin for this field or model".into()))?;
        worst = worst.max((discrete[i] - exact).abs());
        seen = true;
    }
    if !seen {
        return Err(LabError::InvalidParameter(format!("no nodes inside [{lo}, {hi}]")));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_fields_are_seeded_and_floored() {
        let space = ModelSpace::sphere_model(101, 3.0).unwrap();
        let spec = FieldSpec::random_smooth(0);
        let a = spec.sample(&space, 42).unwrap();
        let b = spec.sample(&space, 42).unwrap();
        let c = spec.sample(&space, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!((a.min() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let space = ModelSpace::circle(64, 5.0).unwrap();
        let fields = [
            FieldSpec::random_smooth(3).resolve(&space, 9).unwrap(),
            FieldSpec::GaussianBump { center: 2.0, width: 0.4, height: 1.5, floor: 0.2 }.resolve(&space, 0).unwrap(),
        ];
        let eps = 1e-4;
        for f in &fields {
            for x in [0.3, 1.7, 2.2, 4.1] {
                let [v, d1, d2] = f.derivatives(x).unwrap();
                let (p, m) = (f.value(x + eps), f.value(x - eps));
                assert!(((p - m) / (2.0 * eps) - d1).abs() < 1e-6);
                assert!(((p - 2.0 * v + m) / (eps * eps) - d2).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn bochner_oracle_error_is_second_order() {
        let field = FieldSpec::Cosine { offset: 2.0, amplitude: 1.0, frequency: 1.0 };
        let errs: Vec<f64> = [100, 200, 400]
            .iter()
            .map(|&n| {
                let s = ModelSpace::circle(n, 2.0 * std::f64::consts::PI).unwrap();
                let r = field.resolve(&s, 0).unwrap();
                bochner_oracle_error(&s, &r, s.expected_cd(), 0.0, 7.0).unwrap()
            })
            .collect();
        let p = (errs[0] / errs[2]).log2() / 2.0;
        assert!(p > 1.8, "order {p}, errors {errs:?}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = serde_json::from_str::<FieldSpec>(r#"{"kind": "cosine", "amplitud": 1.0}"#);
        assert!(bad.is_err());
        let ok: FieldSpec = serde_json::from_str(r#"{"kind": "constant", "value": 3.0}"#).unwrap();
        assert_eq!(ok, FieldSpec::Constant { value: 3.0 });
    }
}
