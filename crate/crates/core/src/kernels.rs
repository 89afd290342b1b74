//! Jump kernels K(x, y, t) of fractional order α ∈ (0, 2) with ellipticity
//! envelope
//!
//! ```text
//! 1_{|x−y| ≤ r} / Λ · |x−y|^{−(n+α)}  ≤  K(x,y,t)  ≤  Λ |x−y|^{−(n+α)}
//! ```
//!
//! plus Monte Carlo envelope validation and the shrinking-cylinder rescaling
//! K̄(x,y,t) = s^{n+α} K(x₀+sx, x₀+sy, t₀+s^α t), s = R/2^k, under which the
//! envelope holds with the truncation radius widened by 1/s.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Shared kernel evaluation handle: (x, y, t) ↦ K(x, y, t).
pub type KernelFn = Arc<dyn Fn(&[f64], &[f64], f64) -> f64 + Send + Sync>;

const BOUNDS_SEED: u64 = 0x4b45524e; // fixed seed: validation is deterministic

#[derive(Clone)]
enum Form {
    Pure,
    Truncated,
    Custom { eval: KernelFn, label: String },
}

/// A symmetric jump kernel with its declared ellipticity envelope.
#[derive(Clone)]
pub struct KernelSpec {
    alpha: f64,
    lambda: f64,
    dimension: usize,
    truncation_radius: f64,
    form: Form,
}

impl KernelSpec {
    /// Exactly |x−y|^{−(n+α)}; envelope constants Λ = 1, r = 2.
    pub fn pure_fractional(dimension: usize, alpha: f64) -> Result<Self> {
        Self::validate(dimension, alpha, 1.0, 2.0)?;
        Ok(Self { alpha, lambda: 1.0, dimension, truncation_radius: 2.0, form: Form::Pure })
    }

    /// |x−y|^{−(n+α)} inside radius `truncation_radius`, zero beyond.
    pub fn truncated_fractional(
        dimension: usize,
        alpha: f64,
        lambda: f64,
        truncation_radius: f64,
    ) -> Result<Self> {
        Self::validate(dimension, alpha, lambda, truncation_radius)?;
        Ok(Self { alpha, lambda, dimension, truncation_radius, form: Form::Truncated })
    }

    /// Caller-supplied kernel, declared against the (α, Λ, r) envelope.
    /// Symmetry and the envelope are the caller's obligation, checkable with
    /// [`KernelSpec::check_bounds`].
    pub fn custom<F>(
        dimension: usize,
        alpha: f64,
        lambda: f64,
        truncation_radius: f64,
        label: &str,
        eval: F,
    ) -> Result<Self>
    where
        F: Fn(&[f64], &[f64], f64) -> f64 + Send + Sync + 'static,
    {
        Self::validate(dimension, alpha, lambda, truncation_radius)?;
        Ok(Self {
            alpha,
            lambda,
            dimension,
            truncation_radius,
            form: Form::Custom { eval: Arc::new(eval), label: label.to_string() },
        })
    }

    fn validate(dimension: usize, alpha: f64, lambda: f64, radius: f64) -> Result<()> {
        if dimension == 0 {
            return Err(Error::param("kernel.dimension", "dimension must be >= 1"));
        }
        if !(alpha > 0.0 && alpha < 2.0) {
            return Err(Error::param("kernel.alpha", format!("order must lie in (0, 2), got {alpha}")));
        }
        if !(lambda >= 1.0) || !lambda.is_finite() {
            return Err(Error::param("kernel.lambda", format!("ellipticity constant must be >= 1, got {lambda}")));
        }
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::param(
                "kernel.truncation_radius",
                format!("positive radius required, got {radius}"),
            ));
        }
        Ok(())
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Radius of the lower ellipticity envelope's indicator.
    pub fn truncation_radius(&self) -> f64 {
        self.truncation_radius
    }

    /// For the built-in radial forms, the profile K = d^{−(n+α)}·1_{d ≤ cutoff}
    /// (cutoff `None` means no cutoff). `None` for custom kernels, which force
    /// numeric tail integration in the operator build.
    pub fn radial_profile(&self) -> Option<RadialProfile> {
        match self.form {
            Form::Pure => Some(RadialProfile { cutoff: None }),
            Form::Truncated => Some(RadialProfile { cutoff: Some(self.truncation_radius) }),
            Form::Custom { .. } => None,
        }
    }

    /// K(x, y, t). Errors on the non-integrable diagonal x = y and on
    /// dimension mismatches.
    pub fn eval(&self, x: &[f64], y: &[f64], t: f64) -> Result<f64> {
        if x.len() != self.dimension || y.len() != self.dimension {
            return Err(Error::DimensionMismatch(format!(
                "kernel dimension {} but points of dimension {}/{}",
                self.dimension,
                x.len(),
                y.len()
            )));
        }
        if x == y {
            return Err(Error::KernelDiagonal);
        }
        Ok(self.eval_unchecked(x, y, t))
    }

    pub(crate) fn eval_unchecked(&self, x: &[f64], y: &[f64], t: f64) -> f64 {
        match &self.form {
            Form::Pure => distance(x, y).powf(-(self.dimension as f64 + self.alpha)),
            Form::Truncated => {
                let d = distance(x, y);
                if d <= self.truncation_radius {
                    d.powf(-(self.dimension as f64 + self.alpha))
                } else {
                    0.0
                }
            }
            Form::Custom { eval, .. } => eval(x, y, t),
        }
    }

    /// Monte Carlo validation of symmetry and both ellipticity envelopes.
    ///
    /// Base points are uniform in [−1, 1]^n, offsets log-uniform in distance
    /// over [1e-4, 1e2] with uniform direction, times uniform in [0, 1]; the
    /// sampling is deterministic (fixed seed).
    pub fn check_bounds(&self, sample_count: usize) -> BoundsReport {
        let mut rng = ChaCha8Rng::seed_from_u64(BOUNDS_SEED);
        let n = self.dimension;
        let power = n as f64 + self.alpha;
        let mut report = BoundsReport {
            samples: sample_count,
            worst_upper_ratio: f64::NEG_INFINITY,
            worst_upper_distance: f64::NAN,
            worst_lower_ratio: f64::INFINITY,
            worst_lower_distance: f64::NAN,
            worst_symmetry_gap: 0.0,
            upper_ok: true,
            lower_ok: true,
            symmetric: true,
        };
        let mut x = vec![0.0f64; n];
        let mut y = vec![0.0f64; n];
        for _ in 0..sample_count {
            for c in x.iter_mut() {
                *c = rng.gen_range(-1.0..1.0);
            }
            let d = 10f64.powf(rng.gen_range(-4.0..2.0));
            let dir = random_direction(&mut rng, n);
            for (i, c) in y.iter_mut().enumerate() {
                *c = x[i] + d * dir[i];
            }
            let t = rng.gen_range(0.0..1.0);
            let k_xy = self.eval_unchecked(&x, &y, t);
            let k_yx = self.eval_unchecked(&y, &x, t);

            let scale = d.powf(-power);
            let gap = (k_xy - k_yx).abs() / scale.max(f64::MIN_POSITIVE);
            report.worst_symmetry_gap = report.worst_symmetry_gap.max(gap);

            let upper = k_xy / (self.lambda * scale);
            if upper > report.worst_upper_ratio {
                report.worst_upper_ratio = upper;
                report.worst_upper_distance = d;
            }
            if d <= self.truncation_radius {
                let lower = k_xy * self.lambda / scale;
                if lower < report.worst_lower_ratio {
                    report.worst_lower_ratio = lower;
                    report.worst_lower_distance = d;
                }
            }
        }
        report.upper_ok = report.worst_upper_ratio <= 1.0 + 1e-9;
        report.lower_ok = report.worst_lower_ratio >= 1.0 - 1e-9;
        report.symmetric = report.worst_symmetry_gap <= 1e-9;
        report
    }

    /// Shrinking-cylinder rescaling: with s = R/2^k,
    /// K̄(x,y,t) = s^{n+α} K(x₀ + s x, x₀ + s y, t₀ + s^α t).
    ///
    /// Built-in radial forms rescale exactly (the pure kernel is scale
    /// invariant; the truncated one widens its cutoff by 1/s); custom kernels
    /// are wrapped. The envelope truncation radius widens to r/s, which for
    /// the default r = 2 is the usual 2^{k+1}/R.
    pub fn rescale(&self, x0: &[f64], t0: f64, big_r: f64, k: u32) -> Result<KernelSpec> {
        if x0.len() != self.dimension {
            return Err(Error::DimensionMismatch(format!(
                "rescale center has dimension {} but kernel is {}-dimensional",
                x0.len(),
                self.dimension
            )));
        }
        if !(big_r > 0.0 && big_r <= 1.0) {
            return Err(Error::param("R", format!("rescaling requires 0 < R <= 1, got {big_r}")));
        }
        let s = big_r * 0.5f64.powi(k as i32);
        let widened = self.truncation_radius / s;
        let mut out = self.clone();
        out.truncation_radius = widened;
        match &self.form {
            Form::Pure | Form::Truncated => Ok(out),
            Form::Custom { eval, label } => {
                let base = eval.clone();
                let center = x0.to_vec();
                let power = self.dimension as f64 + self.alpha;
                let alpha = self.alpha;
                let mapped = move |x: &[f64], y: &[f64], t: f64| -> f64 {
                    let xm: Vec<f64> = x.iter().zip(&center).map(|(c, o)| o + s * c).collect();
                    let ym: Vec<f64> = y.iter().zip(&center).map(|(c, o)| o + s * c).collect();
                    s.powf(power) * base(&xm, &ym, t0 + s.powf(alpha) * t)
                };
                out.form = Form::Custom {
                    eval: Arc::new(mapped),
                    label: format!("rescaled({label},R={big_r:?},k={k})"),
                };
                Ok(out)
            }
        }
    }

    /// Stable parameter string used in run metadata and hashes.
    pub fn descriptor(&self) -> String {
        let name = match &self.form {
            Form::Pure => "pure_fractional".to_string(),
            Form::Truncated => "truncated_fractional".to_string(),
            Form::Custom { label, .. } => format!("custom:{label}"),
        };
        format!(
            "{name}(n={},alpha={:?},lambda={:?},r={:?})",
            self.dimension, self.alpha, self.lambda, self.truncation_radius
        )
    }

    /// Whether persistence can reconstruct this kernel from its descriptor.
    pub fn is_persistable(&self) -> bool {
        !matches!(self.form, Form::Custom { .. })
    }
}

impl fmt::Debug for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.descriptor())
    }
}

/// Radial form K(d) = d^{−(n+α)} 1_{d ≤ cutoff} of the built-in kernels.
#[derive(Debug, Clone, Copy)]
pub struct RadialProfile {
    pub cutoff: Option<f64>,
}

/// Worst-case envelope ratios from [`KernelSpec::check_bounds`].
///
/// `worst_upper_ratio` is max K/(Λ d^{−(n+α)}) (must be ≤ 1);
/// `worst_lower_ratio` is min K Λ d^{n+α} over sampled d ≤ r (must be ≥ 1).
#[derive(Debug, Clone)]
pub struct BoundsReport {
    pub samples: usize,
    pub worst_upper_ratio: f64,
    pub worst_upper_distance: f64,
    pub worst_lower_ratio: f64,
    pub worst_lower_distance: f64,
    pub worst_symmetry_gap: f64,
    pub upper_ok: bool,
    pub lower_ok: bool,
    pub symmetric: bool,
}

impl BoundsReport {
    pub fn pass(&self) -> bool {
        self.upper_ok && self.lower_ok && self.symmetric
    }
}

pub(crate) fn distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

fn random_direction(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![if rng.gen::<bool>() { 1.0 } else { -1.0 }];
    }
    // Box-Muller normals, normalized; resample in the (measure-zero) case of
    // a near-zero vector.
    loop {
        let v: Vec<f64> = (0..n)
            .map(|_| {
                let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
                let u2: f64 = rng.gen_range(0.0..1.0);
                (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
            })
            .collect();
        let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|c| c / norm).collect();
        }
    }
}
