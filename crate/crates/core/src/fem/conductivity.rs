use crate::cutoff::{chi, chi_derivative};
use crate::geometry::Point;

use super::FemError;

/// Closed-form conductivity families.
#[derive(Debug, Clone, PartialEq)]
pub enum Preset {
    Constant { c: f64 },
    /// exp(a·x)
    Exponential { a: [f64; 2] },
    /// 1 + b|x|²
    Radial { b: f64 },
    /// 1 + A·χ(|x − x₀|/ρ)
    Bump {
        amplitude: f64,
        center: Point,
        width: f64,
    },
}

impl Preset {
    fn value(&self, x: Point) -> f64 {
        match *self {
            Preset::Constant { c } => c,
            Preset::Exponential { a } => (a[0] * x[0] + a[1] * x[1]).exp(),
            Preset::Radial { b } => 1.0 + b * (x[0] * x[0] + x[1] * x[1]),
            Preset::Bump {
                amplitude,
                center,
                width,
            } => {
                let r = (x[0] - center[0]).hypot(x[1] - center[1]);
                1.0 + amplitude * chi(r / width)
            }
        }
    }

    fn gradient(&self, x: Point) -> [f64; 2] {
        match *self {
            Preset::Constant { .. } => [0.0, 0.0],
            Preset::Exponential { a } => {
                let v = self.value(x);
                [a[0] * v, a[1] * v]
            }
            Preset::Radial { b } => [2.0 * b * x[0], 2.0 * b * x[1]],
            Preset::Bump {
                amplitude,
                center,
                width,
            } => {
                let d = [x[0] - center[0], x[1] - center[1]];
                let r = d[0].hypot(d[1]);
                if r == 0.0 {
                    return [0.0, 0.0];
                }
                let k = amplitude * chi_derivative(r / width) / (width * r);
                [k * d[0], k * d[1]]
            }
        }
    }

    /// Exact range over an axis-aligned box.
    fn range(&self, bbox: [Point; 2]) -> (f64, f64) {
        let [lo, hi] = bbox;
        match *self {
            Preset::Constant { c } => (c, c),
            Preset::Exponential { a } => {
                let lin = |x: f64, y: f64| a[0] * x + a[1] * y;
                let vals = [lin(lo[0], lo[1]), lin(hi[0], lo[1]), lin(lo[0], hi[1]), lin(hi[0], hi[1])];
                let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
                let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                (min.exp(), max.exp())
            }
            Preset::Radial { b } => {
                let nearest = [0.0f64.clamp(lo[0], hi[0]), 0.0f64.clamp(lo[1], hi[1])];
                let far = [
                    if lo[0].abs() > hi[0].abs() { lo[0] } else { hi[0] },
                    if lo[1].abs() > hi[1].abs() { lo[1] } else { hi[1] },
                ];
                let r2 = |p: Point| p[0] * p[0] + p[1] * p[1];
                let (a, c) = (1.0 + b * r2(nearest), 1.0 + b * r2(far));
                (a.min(c), a.max(c))
            }
            Preset::Bump { amplitude, .. } => {
                // χ takes every value in [0, 1]; conservative over the box
                (1.0f64.min(1.0 + amplitude), 1.0f64.max(1.0 + amplitude))
            }
        }
    }
}

/// A conductivity γ = scale·preset(x) with bounds over a region.
#[derive(Debug, Clone, PartialEq)]
pub struct ConductivityField {
    preset: Preset,
    scale: f64,
    lower: f64,
    upper: f64,
}

impl ConductivityField {
    /// Validates positivity over `region` (an axis-aligned box containing the
    /// domain) and records the bounds.
    pub fn new(preset: Preset, region: [Point; 2]) -> Result<Self, FemError> {
        Self::scaled_preset(preset, 1.0, region)
    }

    pub fn constant(c: f64) -> Self {
        Self {
            preset: Preset::Constant { c },
            scale: 1.0,
            lower: c,
            upper: c,
        }
    }

    fn scaled_preset(preset: Preset, scale: f64, region: [Point; 2]) -> Result<Self, FemError> {
        match preset {
            Preset::Bump { width, .. } if !(width > 0.0) => {
                return Err(FemError::InvalidConductivity(format!(
                    "bump width must be positive, got {width}"
                )))
            }
            _ => {}
        }
        let (lo, hi) = preset.range(region);
        let (lower, upper) = (scale * lo, scale * hi);
        if !(lower > 0.0) || !upper.is_finite() {
            return Err(FemError::InvalidConductivity(format!(
                "bounds [{lower}, {upper}] are not strictly positive and finite"
            )));
        }
        Ok(Self {
            preset,
            scale,
            lower,
            upper,
        })
    }

    /// `k·γ`, same region bounds scaled.
    pub fn scaled(&self, k: f64) -> Result<Self, FemError> {
        if !(k > 0.0) {
            return Err(FemError::InvalidConductivity(format!(
                "scale factor must be positive, got {k}"
            )));
        }
        Ok(Self {
            preset: self.preset.clone(),
            scale: self.scale * k,
            lower: self.lower * k,
            upper: self.upper * k,
        })
    }

    pub fn preset(&self) -> &Preset {
        &self.preset
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.lower, self.upper)
    }

    pub fn value(&self, x: Point) -> f64 {
        self.scale * self.preset.value(x)
    }

    pub fn gradient(&self, x: Point) -> [f64; 2] {
        let g = self.preset.gradient(x);
        [self.scale * g[0], self.scale * g[1]]
    }

    /// ∇ log γ = ∇γ/γ.
    pub fn log_gradient(&self, x: Point) -> [f64; 2] {
        let v = self.value(x);
        let g = self.gradient(x);
        [g[0] / v, g[1] / v]
    }

    /// ∇γ^{1/2} = ∇γ/(2√γ).
    pub fn sqrt_gradient(&self, x: Point) -> [f64; 2] {
        let k = 0.5 / self.value(x).sqrt();
        let g = self.gradient(x);
        [k * g[0], k * g[1]]
    }
}
