//! Monotone nonlinearities β, their inverses φ = β⁻¹, the single-valued
//! regularization ladder (β_ε, φ_ε), and the truncation functional
//! B((u−k)⁺) = ∫₀^{(u−k)⁺} β_ε'(k+τ) τ dτ.
//!
//! Three families are supported:
//! * `stefan(a, b)`: the two-phase graph ax−1 for x<0, the segment [−1, 1]
//!   at x = 0, bx+1 for x>0; regularized by the chord across [−ε, ε].
//! * `porous(m)`: sign(x)|x|^{1/m} with m > 1, whose derivative blows up at 0
//!   and decays at infinity; regularized by clamping the derivative into
//!   [c1, C(ε)] and integrating from 0.
//! * `smooth`: caller-supplied strictly increasing β with its derivative;
//!   regularized by the same derivative clamp, evaluated by quadrature.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::quadrature::{adaptive_simpson, adaptive_simpson_split};

/// Shared scalar function handle.
pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Absolute tolerance for the quadrature fallback of [`RegularizedNonlinearity::b_functional`].
const B_FUNCTIONAL_TOL: f64 = 1e-10;

/// Default lower clamp for derivatives of the porous and smooth families.
const DEFAULT_C1: f64 = 1e-6;

#[derive(Clone)]
enum Kind {
    Stefan { a: f64, b: f64 },
    Porous { m: f64 },
    Smooth { beta: ScalarFn, beta_prime: ScalarFn, label: String },
}

/// A monotone nonlinearity β together with the structural constants of its
/// admissibility conditions (derivative floor `c1`, regularized cap ε ↦ C(ε)).
#[derive(Clone)]
pub struct NonlinearitySpec {
    kind: Kind,
    c1: f64,
    cap: Option<ScalarFn>,
}

/// Value of the possibly set-valued graph β at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BetaValue {
    Point(f64),
    /// Closed interval (only the Stefan graph at x = 0).
    Interval(f64, f64),
}

impl BetaValue {
    pub fn inf(self) -> f64 {
        match self {
            BetaValue::Point(v) => v,
            BetaValue::Interval(lo, _) => lo,
        }
    }

    pub fn sup(self) -> f64 {
        match self {
            BetaValue::Point(v) => v,
            BetaValue::Interval(_, hi) => hi,
        }
    }

    /// Midpoint selection (the single value for non-graph points).
    pub fn selection(self) -> f64 {
        match self {
            BetaValue::Point(v) => v,
            BetaValue::Interval(lo, hi) => 0.5 * (lo + hi),
        }
    }
}

impl NonlinearitySpec {
    /// Two-phase Stefan graph with slopes `a` (x < 0) and `b` (x > 0).
    pub fn stefan(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0) || !a.is_finite() {
            return Err(Error::param("a", format!("positive slope required, got {a}")));
        }
        if !(b > 0.0) || !b.is_finite() {
            return Err(Error::param("b", format!("positive slope required, got {b}")));
        }
        Ok(Self { kind: Kind::Stefan { a, b }, c1: DEFAULT_C1, cap: None })
    }

    /// Porous-medium nonlinearity sign(x)|x|^{1/m}, `m > 1`.
    pub fn porous(m: f64) -> Result<Self> {
        if !(m > 1.0) || !m.is_finite() {
            return Err(Error::param("m", format!("exponent > 1 required, got {m}")));
        }
        Ok(Self { kind: Kind::Porous { m }, c1: DEFAULT_C1, cap: None })
    }

    /// Caller-supplied strictly increasing β with β(0) = 0 and its derivative.
    pub fn smooth<F, G>(beta: F, beta_prime: G) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        G: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self::smooth_labeled(beta, beta_prime, "smooth")
    }

    /// Identity nonlinearity β(x) = x; turns the solver into the nonlocal
    /// heat equation.
    pub fn linear() -> Self {
        Self::smooth_labeled(|x| x, |_| 1.0, "linear").expect("identity is admissible")
    }

    /// `smooth` with a stable label used in metadata and persistence.
    pub fn smooth_labeled<F, G>(beta: F, beta_prime: G, label: &str) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        G: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if beta(0.0).abs() > 1e-12 {
            return Err(Error::param("beta", format!("beta(0) = {} but 0 is required", beta(0.0))));
        }
        Ok(Self {
            kind: Kind::Smooth {
                beta: Arc::new(beta),
                beta_prime: Arc::new(beta_prime),
                label: label.to_string(),
            },
            c1: DEFAULT_C1,
            cap: None,
        })
    }

    /// Overrides the lower derivative clamp c1 (default 1e-6).
    pub fn with_floor(mut self, c1: f64) -> Result<Self> {
        if !(c1 > 0.0) || !c1.is_finite() {
            return Err(Error::param("c1", format!("positive floor required, got {c1}")));
        }
        self.c1 = c1;
        Ok(self)
    }

    /// Overrides the regularized derivative cap ε ↦ C(ε).
    pub fn with_derivative_cap<F>(mut self, cap: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        self.cap = Some(Arc::new(cap));
        self
    }

    pub fn floor_constant(&self) -> f64 {
        self.c1
    }

    /// Derivative cap C(ε): the configured function, or the family default
    /// (β'(ε) = ε^{(1−m)/m}/m for porous, 1/ε for smooth, the chord slope for
    /// the Stefan graph).
    pub fn derivative_cap(&self, epsilon: f64) -> f64 {
        if let Some(cap) = &self.cap {
            return cap(epsilon);
        }
        match &self.kind {
            Kind::Stefan { a, b } => ((a + b) * epsilon + 2.0) / (2.0 * epsilon),
            Kind::Porous { m } => epsilon.powf((1.0 - m) / m) / m,
            Kind::Smooth { .. } => 1.0 / epsilon,
        }
    }

    /// Evaluates the graph β at `x`; an interval only for the Stefan graph at 0.
    pub fn beta_eval(&self, x: f64) -> BetaValue {
        match &self.kind {
            Kind::Stefan { a, b } => {
                if x < 0.0 {
                    BetaValue::Point(a * x - 1.0)
                } else if x > 0.0 {
                    BetaValue::Point(b * x + 1.0)
                } else {
                    BetaValue::Interval(-1.0, 1.0)
                }
            }
            Kind::Porous { m } => BetaValue::Point(x.signum() * x.abs().powf(1.0 / m)),
            Kind::Smooth { beta, .. } => BetaValue::Point(beta(x)),
        }
    }

    /// Derivative β'(x) of the unregularized family; `None` on the Stefan
    /// graph's vertical segment (x = 0) and at the porous singularity.
    pub fn beta_prime_eval(&self, x: f64) -> Option<f64> {
        match &self.kind {
            Kind::Stefan { a, b } => {
                if x < 0.0 {
                    Some(*a)
                } else if x > 0.0 {
                    Some(*b)
                } else {
                    None
                }
            }
            Kind::Porous { m } => {
                if x == 0.0 {
                    None
                } else {
                    Some(x.abs().powf(1.0 / m - 1.0) / m)
                }
            }
            Kind::Smooth { beta_prime, .. } => Some(beta_prime(x)),
        }
    }

    /// Inverse φ = β⁻¹ (single valued; the graph's vertical segment inverts to
    /// the flat piece φ ≡ 0 on [−1, 1]).
    pub fn phi_eval(&self, v: f64) -> f64 {
        match &self.kind {
            Kind::Stefan { a, b } => {
                if v <= -1.0 {
                    (v + 1.0) / a
                } else if v >= 1.0 {
                    (v - 1.0) / b
                } else {
                    0.0
                }
            }
            Kind::Porous { m } => v.signum() * v.abs().powf(*m),
            Kind::Smooth { beta, beta_prime, .. } => {
                invert_increasing(|x| beta(x), |x| beta_prime(x), v)
            }
        }
    }

    /// Constructs the single-valued regularization (β_ε, φ_ε).
    pub fn regularize(&self, epsilon: f64) -> Result<RegularizedNonlinearity> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::param("epsilon", format!("positive scale required, got {epsilon}")));
        }
        let imp = match &self.kind {
            Kind::Stefan { a, b } => RegImpl::Stefan {
                a: *a,
                b: *b,
                eps: epsilon,
                chord: ((a + b) * epsilon + 2.0) / (2.0 * epsilon),
                v_mid: epsilon * (b - a) / 2.0,
            },
            Kind::Porous { m } => {
                let cap = self.derivative_cap(epsilon);
                if !(cap >= self.c1) || !cap.is_finite() {
                    return Err(Error::param(
                        "derivative_cap",
                        format!("cap C({epsilon}) = {cap} must be finite and >= c1 = {}", self.c1),
                    ));
                }
                // x_cap: where the derivative |x|^{1/m-1}/m falls to the cap;
                // s_star: where it falls to the floor c1.
                let x_cap = (m * cap).powf(m / (1.0 - m));
                let s_star = (m * self.c1).powf(m / (1.0 - m));
                let v_cap = cap * x_cap;
                let v_star = s_star.powf(1.0 / m) - x_cap.powf(1.0 / m) + v_cap;
                RegImpl::Porous {
                    m: *m,
                    c1: self.c1,
                    cap,
                    x_cap,
                    s_star,
                    v_cap,
                    v_star,
                }
            }
            Kind::Smooth { beta, beta_prime, .. } => {
                let cap = self.derivative_cap(epsilon);
                if !(cap >= self.c1) || !cap.is_finite() {
                    return Err(Error::param(
                        "derivative_cap",
                        format!("cap C({epsilon}) = {cap} must be finite and >= c1 = {}", self.c1),
                    ));
                }
                RegImpl::Smooth {
                    beta: beta.clone(),
                    beta_prime: beta_prime.clone(),
                    c1: self.c1,
                    cap,
                }
            }
        };
        Ok(RegularizedNonlinearity { base: self.clone(), epsilon, imp })
    }

    /// Checks the structural admissibility conditions over `[range.0, range.1]`:
    /// strict monotonicity, β(0) = 0, the derivative floor, the regularized
    /// derivative cap, and the degeneracy ratio
    /// ℓ = inf β' · (M − m) / (β(M) − β(m)).
    pub fn check_conditions(
        &self,
        range: (f64, f64),
        sample_count: usize,
    ) -> Result<ConditionReport> {
        let (lo, hi) = range;
        if sample_count < 2 {
            return Err(Error::param("sample_count", "need at least 2 samples"));
        }
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::param("range", format!("need finite lo < hi, got [{lo}, {hi}]")));
        }

        let mut report = ConditionReport {
            monotone: true,
            zero_at_zero: true,
            derivative_defined: true,
            derivative_floor: f64::INFINITY,
            floor_ok: true,
            cap_ok: true,
            degeneracy_ratio: f64::NAN,
            flags: Vec::new(),
            notes: Vec::new(),
        };

        let sample = |i: usize| lo + (hi - lo) * i as f64 / (sample_count - 1) as f64;

        // Strict monotonicity with interval semantics at graph points.
        let mut prev = self.beta_eval(sample(0));
        for i in 1..sample_count {
            let cur = self.beta_eval(sample(i));
            if !(prev.sup() < cur.inf()) {
                report.monotone = false;
                report.flags.push(format!(
                    "monotonicity fails between x = {} and x = {}",
                    sample(i - 1),
                    sample(i)
                ));
                break;
            }
            prev = cur;
        }

        // beta(0) = 0, with the graph convention 0 in beta(0).
        let at_zero = self.beta_eval(0.0);
        if !(at_zero.inf() <= 0.0 && at_zero.sup() >= 0.0) {
            report.zero_at_zero = false;
            report.flags.push(format!("beta(0) = {at_zero:?} does not contain 0"));
        }

        // Derivative floor over the sampled range.
        for i in 0..sample_count {
            let x = sample(i);
            match self.beta_prime_eval(x) {
                Some(d) => report.derivative_floor = report.derivative_floor.min(d),
                None => {
                    report.derivative_defined = false;
                    if matches!(self.kind, Kind::Stefan { .. }) {
                        report
                            .flags
                            .push("derivative undefined at x = 0 (vertical graph segment)".into());
                    } else {
                        report.notes.push("derivative unbounded at x = 0 (sample skipped)".into());
                    }
                }
            }
        }
        if report.derivative_floor < self.c1 {
            report.floor_ok = false;
            report.flags.push(format!(
                "inf beta' = {} falls below c1 = {} on the range",
                report.derivative_floor, self.c1
            ));
        }
        if let Kind::Porous { m } = self.kind {
            let fade = (m * self.c1).powf(m / (1.0 - m));
            report.notes.push(format!(
                "porous derivative decays below c1 = {} for |x| > {fade:.3e}; \
                 the floor condition only holds on bounded ranges",
                self.c1
            ));
        }

        // Regularized cap: beta_eps' <= C(eps) sampled over the range.
        for &eps in &[1e-1, 1e-2, 1e-3] {
            let reg = self.regularize(eps)?;
            let cap = self.derivative_cap(eps);
            for i in 0..sample_count {
                let d = reg.beta_prime(sample(i));
                if d > cap * (1.0 + 1e-12) {
                    report.cap_ok = false;
                    report.flags.push(format!(
                        "regularized derivative {d} exceeds cap C({eps}) = {cap} at x = {}",
                        sample(i)
                    ));
                    break;
                }
            }
        }

        // Degeneracy ratio of the range.
        let denom = self.beta_eval(hi).selection() - self.beta_eval(lo).selection();
        if denom > 0.0 && report.derivative_floor.is_finite() {
            report.degeneracy_ratio = report.derivative_floor * (hi - lo) / denom;
        }

        Ok(report)
    }

    /// Stable parameter string used in run metadata and hashes.
    pub fn descriptor(&self) -> String {
        match &self.kind {
            Kind::Stefan { a, b } => format!("stefan(a={a:?},b={b:?},c1={:?})", self.c1),
            Kind::Porous { m } => format!("porous(m={m:?},c1={:?})", self.c1),
            Kind::Smooth { label, .. } => format!("{label}(c1={:?})", self.c1),
        }
    }

    pub fn is_stefan(&self) -> bool {
        matches!(self.kind, Kind::Stefan { .. })
    }

    pub fn is_porous(&self) -> bool {
        matches!(self.kind, Kind::Porous { .. })
    }
}

impl fmt::Debug for NonlinearitySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.descriptor())
    }
}

/// Outcome of [`NonlinearitySpec::check_conditions`].
#[derive(Debug, Clone)]
pub struct ConditionReport {
    pub monotone: bool,
    pub zero_at_zero: bool,
    /// False when the range meets a point where β' does not exist as a number
    /// (the Stefan graph's vertical segment).
    pub derivative_defined: bool,
    /// inf of β' over the sampled range (ignoring undefined points).
    pub derivative_floor: f64,
    pub floor_ok: bool,
    pub cap_ok: bool,
    /// ℓ(m, M) = inf β' · (M − m) / (β(M) − β(m)).
    pub degeneracy_ratio: f64,
    /// Human-readable descriptions of each violated condition.
    pub flags: Vec<String>,
    pub notes: Vec<String>,
}

impl ConditionReport {
    pub fn all_passed(&self) -> bool {
        self.monotone && self.zero_at_zero && self.derivative_defined && self.floor_ok && self.cap_ok
    }
}

#[derive(Clone)]
enum RegImpl {
    Stefan {
        a: f64,
        b: f64,
        eps: f64,
        /// Chord slope ((a+b)ε + 2) / 2ε across [−ε, ε].
        chord: f64,
        /// β_ε(0) = ε(b−a)/2, the chord midpoint.
        v_mid: f64,
    },
    Porous {
        m: f64,
        c1: f64,
        cap: f64,
        /// |x| below which the derivative is capped at C(ε).
        x_cap: f64,
        /// |x| beyond which the derivative is floored at c1.
        s_star: f64,
        /// β_ε(x_cap) = cap · x_cap.
        v_cap: f64,
        /// β_ε(s_star).
        v_star: f64,
    },
    Smooth {
        beta: ScalarFn,
        beta_prime: ScalarFn,
        c1: f64,
        cap: f64,
    },
}

/// Where the derivative floor of β_ε over a range is attained; the CFL report
/// uses this to distinguish an ε-independent branch floor from a floor inside
/// the regularization band.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FloorLocation {
    /// Inside the ε-band where the regularization replaces the graph/cap.
    RegularizationBand,
    /// On the unmodified branches of the nonlinearity.
    Branch,
    /// Estimated by dense sampling (smooth kind only).
    Sampled,
}

/// A single-valued strictly increasing regularization β_ε with exact inverse.
#[derive(Clone)]
pub struct RegularizedNonlinearity {
    base: NonlinearitySpec,
    epsilon: f64,
    imp: RegImpl,
}

impl RegularizedNonlinearity {
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn base(&self) -> &NonlinearitySpec {
        &self.base
    }

    /// β_ε(x).
    pub fn beta(&self, x: f64) -> f64 {
        match &self.imp {
            RegImpl::Stefan { a, b, eps, chord, v_mid } => {
                if x <= -eps {
                    a * x - 1.0
                } else if x >= *eps {
                    b * x + 1.0
                } else {
                    v_mid + chord * x
                }
            }
            RegImpl::Porous { m, c1, cap, x_cap, s_star, v_cap, v_star } => {
                let ax = x.abs();
                let v = if ax <= *x_cap {
                    cap * ax
                } else if ax <= *s_star {
                    ax.powf(1.0 / m) - x_cap.powf(1.0 / m) + v_cap
                } else {
                    v_star + c1 * (ax - s_star)
                };
                v.copysign(if x == 0.0 { 1.0 } else { x })
            }
            RegImpl::Smooth { beta, beta_prime, c1, cap } => {
                // beta_eps = beta plus the integral of (clamped - raw) derivative;
                // the correction integrand vanishes wherever the clamp is inactive.
                let correction = |s: f64| beta_prime(s).clamp(*c1, *cap) - beta_prime(s);
                beta(x) + adaptive_simpson(&correction, 0.0, x, 1e-13 * (1.0 + x.abs()))
            }
        }
    }

    /// β_ε'(x); bounded between min(a, b, c1) and the cap by construction.
    pub fn beta_prime(&self, x: f64) -> f64 {
        match &self.imp {
            RegImpl::Stefan { a, b, eps, chord, .. } => {
                if x <= -eps {
                    *a
                } else if x >= *eps {
                    *b
                } else {
                    *chord
                }
            }
            RegImpl::Porous { m, c1, cap, x_cap, s_star, .. } => {
                let ax = x.abs();
                if ax <= *x_cap {
                    *cap
                } else if ax <= *s_star {
                    ax.powf(1.0 / m - 1.0) / m
                } else {
                    *c1
                }
            }
            RegImpl::Smooth { beta_prime, c1, cap, .. } => beta_prime(x).clamp(*c1, *cap),
        }
    }

    /// φ_ε(v) = β_ε⁻¹(v), exact piecewise inverse for stefan/porous and a
    /// safeguarded Newton inversion for the smooth kind.
    pub fn phi(&self, v: f64) -> f64 {
        match &self.imp {
            RegImpl::Stefan { a, b, eps, chord, v_mid } => {
                let v_lo = -(a * eps) - 1.0;
                let v_hi = b * eps + 1.0;
                if v <= v_lo {
                    (v + 1.0) / a
                } else if v >= v_hi {
                    (v - 1.0) / b
                } else {
                    (v - v_mid) / chord
                }
            }
            RegImpl::Porous { m, c1, cap, x_cap, s_star, v_cap, v_star } => {
                let av = v.abs();
                let x = if av <= *v_cap {
                    av / cap
                } else if av <= *v_star {
                    (av - v_cap + x_cap.powf(1.0 / m)).powf(*m)
                } else {
                    s_star + (av - v_star) / c1
                };
                x.copysign(if v == 0.0 { 1.0 } else { v })
            }
            RegImpl::Smooth { .. } => invert_increasing(|x| self.beta(x), |x| self.beta_prime(x), v),
        }
    }

    /// φ_ε'(v) = 1 / β_ε'(φ_ε(v)).
    pub fn phi_prime(&self, v: f64) -> f64 {
        match &self.imp {
            RegImpl::Stefan { a, b, eps, chord, .. } => {
                let v_lo = -(a * eps) - 1.0;
                let v_hi = b * eps + 1.0;
                if v <= v_lo {
                    1.0 / a
                } else if v >= v_hi {
                    1.0 / b
                } else {
                    1.0 / chord
                }
            }
            _ => 1.0 / self.beta_prime(self.phi(v)),
        }
    }

    /// B((u−k)⁺) = ∫₀^{(u−k)⁺} β_ε'(k+τ) τ dτ; zero for u ≤ k. Closed form on
    /// the piecewise-linear Stefan family, adaptive Simpson (absolute
    /// tolerance 1e-10, split at derivative kinks) otherwise.
    pub fn b_functional(&self, u: f64, k: f64) -> f64 {
        let w = u - k;
        if w <= 0.0 {
            return 0.0;
        }
        match &self.imp {
            RegImpl::Stefan { eps, .. } => {
                // Piecewise-constant slope: sum c * [(x1-k)^2 - (x0-k)^2] / 2
                // over the pieces of [k, u] cut at the band edges.
                let mut cuts = vec![k, u];
                for edge in [-*eps, *eps] {
                    if edge > k && edge < u {
                        cuts.push(edge);
                    }
                }
                cuts.sort_by(|p, q| p.partial_cmp(q).unwrap());
                let mut total = 0.0;
                for pair in cuts.windows(2) {
                    let (x0, x1) = (pair[0], pair[1]);
                    let slope = self.beta_prime(0.5 * (x0 + x1));
                    total += slope * ((x1 - k).powi(2) - (x0 - k).powi(2)) / 2.0;
                }
                total
            }
            RegImpl::Porous { x_cap, s_star, .. } => {
                let breaks: Vec<f64> =
                    [-*s_star, -*x_cap, *x_cap, *s_star].iter().map(|e| e - k).collect();
                let f = |tau: f64| self.beta_prime(k + tau) * tau;
                adaptive_simpson_split(&f, 0.0, w, &breaks, B_FUNCTIONAL_TOL)
            }
            RegImpl::Smooth { .. } => {
                let f = |tau: f64| self.beta_prime(k + tau) * tau;
                adaptive_simpson(&f, 0.0, w, B_FUNCTIONAL_TOL)
            }
        }
    }

    /// inf of β_ε' over `[lo, hi]`, with the location of the infimum.
    ///
    /// Analytic for stefan (piecewise constant) and porous (nonincreasing in
    /// |x|); sampled on 4097 points for the smooth kind.
    pub fn derivative_floor(&self, lo: f64, hi: f64) -> (f64, FloorLocation) {
        assert!(lo <= hi, "empty range [{lo}, {hi}]");
        match &self.imp {
            RegImpl::Stefan { a, b, eps, chord, .. } => {
                let mut best = f64::INFINITY;
                let mut loc = FloorLocation::RegularizationBand;
                if lo < -eps {
                    best = *a;
                    loc = FloorLocation::Branch;
                }
                if hi > *eps && *b < best {
                    best = *b;
                    loc = FloorLocation::Branch;
                }
                if hi >= -eps && lo <= *eps && *chord < best {
                    best = *chord;
                    loc = FloorLocation::RegularizationBand;
                }
                (best, loc)
            }
            RegImpl::Porous { x_cap, .. } => {
                // beta_eps' depends only on |x| and is nonincreasing in it.
                let far = lo.abs().max(hi.abs());
                let floor = self.beta_prime(far);
                let loc = if far <= *x_cap {
                    FloorLocation::RegularizationBand
                } else {
                    FloorLocation::Branch
                };
                (floor, loc)
            }
            RegImpl::Smooth { .. } => {
                let samples = 4096;
                let mut best = f64::INFINITY;
                for i in 0..=samples {
                    let x = lo + (hi - lo) * i as f64 / samples as f64;
                    best = best.min(self.beta_prime(x));
                }
                (best, FloorLocation::Sampled)
            }
        }
    }

    /// sup over a sampled v-grid of |φ_ε(v) − φ(v)|.
    pub fn phi_distance(&self, v_lo: f64, v_hi: f64, samples: usize) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..=samples {
            let v = v_lo + (v_hi - v_lo) * i as f64 / samples as f64;
            worst = worst.max((self.phi(v) - self.base.phi_eval(v)).abs());
        }
        worst
    }
}

impl fmt::Debug for RegularizedNonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@eps={:?}", self.base.descriptor(), self.epsilon)
    }
}

/// Inverts a strictly increasing function by bracket expansion followed by
/// Newton steps safeguarded with bisection.
fn invert_increasing<F, D>(f: F, df: D, target: f64) -> f64
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let f0 = f(0.0);
    if target == f0 {
        return 0.0;
    }
    // Expand a bracket away from 0 in the direction of the target.
    let dir = if target > f0 { 1.0 } else { -1.0 };
    let mut step = 1.0;
    let mut lo = 0.0;
    let mut hi = dir;
    for _ in 0..200 {
        let fh = f(hi);
        if (target - f0) * (target - fh) <= 0.0 {
            break;
        }
        lo = hi;
        step *= 2.0;
        hi = dir * step;
    }
    let (mut lo, mut hi) = if lo < hi { (lo, hi) } else { (hi, lo) };
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let fx = f(x);
        let err = fx - target;
        if err.abs() <= 1e-14 * (1.0 + target.abs()) {
            return x;
        }
        if err > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let d = df(x);
        let newton = x - err / d;
        x = if d > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if hi - lo <= f64::EPSILON * (1.0 + x.abs()) {
            return x;
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stefan(a: f64, b: f64) -> NonlinearitySpec {
        NonlinearitySpec::stefan(a, b).unwrap()
    }

    fn porous(m: f64) -> NonlinearitySpec {
        NonlinearitySpec::porous(m).unwrap()
    }

    // Deterministic LCG so the tests need no RNG dependency here.
    fn lcg(seed: &mut u64) -> f64 {
        *seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (*seed >> 11) as f64 / (1u64 << 53) as f64
    }

    #[test]
    fn stefan_graph_values() {
        let s = stefan(2.0, 1.0);
        assert_eq!(s.beta_eval(-1.0), BetaValue::Point(-3.0));
        assert_eq!(s.beta_eval(0.0), BetaValue::Interval(-1.0, 1.0));
        assert_eq!(porous(2.0).beta_eval(0.0), BetaValue::Point(0.0));
    }

    #[test]
    fn stefan_inverse_branches() {
        let s = stefan(1.0, 1.0);
        assert_eq!(s.phi_eval(-2.0), -1.0);
        assert_eq!(s.phi_eval(0.5), 0.0);
        let s = stefan(1.0, 2.0);
        assert_eq!(s.phi_eval(3.0), 1.0);
    }

    #[test]
    fn chord_endpoint_continuity_and_slope() {
        let s = stefan(1.0, 1.0);
        let reg = s.regularize(0.1).unwrap();
        assert!((reg.beta(0.1) - 1.1).abs() < 1e-15);
        assert!((reg.beta(-0.1) - (-1.1)).abs() < 1e-15);
        // chord slope (0.1 + 0.1 + 2) / 0.2 = 11, cross-checked by finite difference
        let fd = (reg.beta(0.01) - reg.beta(-0.01)) / 0.02;
        assert!((reg.beta_prime(0.0) - 11.0).abs() < 1e-12);
        assert!((fd - 11.0).abs() < 1e-9, "fd = {fd}");
    }

    #[test]
    fn inverse_round_trip_all_kinds() {
        let specs = [
            stefan(1.0, 1.0),
            stefan(2.0, 0.5),
            porous(2.0),
            porous(3.5),
            NonlinearitySpec::smooth(|x: f64| x + 0.25 * x.tanh(), |x: f64| {
                1.0 + 0.25 / x.cosh().powi(2)
            })
            .unwrap(),
        ];
        let mut seed = 0x5eed;
        for spec in &specs {
            for &eps in &[1e-1, 1e-2, 1e-3, 1e-4] {
                let reg = spec.regularize(eps).unwrap();
                for _ in 0..100 {
                    let x = 8.0 * (lcg(&mut seed) - 0.5);
                    let rt = reg.phi(reg.beta(x));
                    assert!(
                        (rt - x).abs() <= 1e-12 * (1.0 + x.abs()),
                        "{spec:?} eps={eps}: phi(beta({x})) = {rt}"
                    );
                    let v = 8.0 * (lcg(&mut seed) - 0.5);
                    let rt = reg.beta(reg.phi(v));
                    assert!(
                        (rt - v).abs() <= 1e-12 * (1.0 + v.abs()),
                        "{spec:?} eps={eps}: beta(phi({v})) = {rt}"
                    );
                }
            }
        }
    }

    #[test]
    fn phi_at_zero_and_phi_prime_bounds() {
        // odd graphs: phi_eps(0) = 0 exactly
        for spec in [stefan(1.0, 1.0), porous(2.0)] {
            for &eps in &[1e-1, 1e-3] {
                let reg = spec.regularize(eps).unwrap();
                assert!(reg.phi(0.0).abs() <= 1e-15, "phi_eps(0) != 0");
            }
        }
        // asymmetric stefan graph: the chord lifts beta_eps(0) to eps(b-a)/2,
        // so phi_eps(0) is nonzero but O(eps^2)
        for &eps in &[1e-1, 1e-3] {
            let reg = stefan(2.0, 0.5).regularize(eps).unwrap();
            let v0 = reg.phi(0.0);
            assert!(v0 != 0.0 && v0.abs() <= eps * eps, "phi_eps(0) = {v0}");
        }
        // stefan: 0 < phi_eps' <= max(1/a, 1/b)
        let reg = stefan(2.0, 0.5).regularize(1e-2).unwrap();
        let bound: f64 = 2.0; // max(1/2, 1/0.5)
        for i in -400..=400 {
            let v = i as f64 / 40.0;
            let p = reg.phi_prime(v);
            assert!(p > 0.0 && p <= bound + 1e-15, "phi'({v}) = {p}");
        }
    }

    #[test]
    fn regularization_rejects_bad_epsilon() {
        assert!(stefan(1.0, 1.0).regularize(0.0).is_err());
        assert!(stefan(1.0, 1.0).regularize(-1e-3).is_err());
        assert!(porous(2.0).regularize(f64::NAN).is_err());
    }

    #[test]
    fn porous_regularization_piecewise_values() {
        let m = 2.0;
        let eps = 1e-2;
        let reg = porous(m).regularize(eps).unwrap();
        let cap = eps.powf((1.0 - m) / m) / m; // 5 at eps = 1e-2
        assert!((cap - 5.0).abs() < 1e-12);
        assert!((reg.beta_prime(0.0) - cap).abs() < 1e-12);
        // at |x| = eps the capped zone hands over to the raw derivative
        let expect_at_eps = cap * eps;
        assert!((reg.beta(eps) - expect_at_eps).abs() < 1e-14);
        // mid branch: beta_eps(x) = sqrt(x) - sqrt(eps)(1 - 1/m)
        let x = 0.5f64;
        let expect = x.sqrt() - eps.sqrt() * (1.0 - 1.0 / m);
        assert!((reg.beta(x) - expect).abs() < 1e-14);
        // odd extension
        assert_eq!(reg.beta(-x), -reg.beta(x));
    }

    #[test]
    fn smooth_regularization_clamps_derivative() {
        // beta' = 3x^2 + 1e-9 dips below c1 near 0 and exceeds 1/eps for large x.
        let spec = NonlinearitySpec::smooth(
            |x: f64| x.powi(3) + 1e-9 * x,
            |x: f64| 3.0 * x * x + 1e-9,
        )
        .unwrap()
        .with_floor(1e-4)
        .unwrap();
        let eps = 1e-2;
        let reg = spec.regularize(eps).unwrap();
        assert!((reg.beta_prime(0.0) - 1e-4).abs() < 1e-18);
        assert!((reg.beta_prime(100.0) - 100.0).abs() < 1e-9); // cap = 1/eps
        // integral picks up the clamp: beta_eps(x) >= beta(x) near 0
        assert!(reg.beta(1e-3) > 1e-9 + 1e-12);
        // inverse still round-trips through the clamped zones
        for &x in &[0.0, 1e-4, 0.3, 2.0, -1.5, 40.0] {
            let rt = reg.phi(reg.beta(x));
            assert!((rt - x).abs() <= 1e-10 * (1.0 + x.abs()), "x = {x}, rt = {rt}");
        }
    }

    #[test]
    fn uniform_convergence_bound_for_stefan() {
        for (a, b) in [(1.0, 1.0), (2.0, 0.5), (0.3, 4.0)] {
            let spec = stefan(a, b);
            let bound = |eps: f64| 2.0 * eps * a.max(b).max(1.0) / a.min(b);
            let mut last = f64::INFINITY;
            for &eps in &[1e-1, 1e-2, 1e-3, 1e-4] {
                let reg = spec.regularize(eps).unwrap();
                let d = reg.phi_distance(-6.0, 6.0, 4000);
                assert!(d <= bound(eps), "a={a} b={b} eps={eps}: {d} > {}", bound(eps));
                assert!(d <= last + 1e-15, "phi distance not monotone in eps");
                last = d;
            }
        }
    }

    #[test]
    fn porous_phi_converges_on_bounded_range() {
        // the cap zone shifts beta_eps by (1 - 1/m) eps^{1/m}, so on a fixed
        // range sup |phi_eps - phi| ~ m |v|^{m-1} (1 - 1/m) eps^{1/m}: for
        // m = 2 on |v| <= 3 that is 3 sqrt(eps)
        let spec = porous(2.0);
        let dists: Vec<f64> = [1e-1, 1e-2, 1e-3, 1e-4]
            .iter()
            .map(|&eps| spec.regularize(eps).unwrap().phi_distance(-3.0, 3.0, 2000))
            .collect();
        for pair in dists.windows(2) {
            assert!(pair[1] < pair[0], "not monotone: {dists:?}");
        }
        for (d, &eps) in dists.iter().zip(&[1e-1, 1e-2, 1e-3, 1e-4]) {
            let predicted = 3.0 * f64::sqrt(eps);
            assert!(*d <= 1.1 * predicted, "eps={eps}: {d} vs predicted {predicted}");
            assert!(*d >= 0.5 * predicted, "eps={eps}: {d} vs predicted {predicted}");
        }
    }

    #[test]
    fn b_functional_constant_slope() {
        // beta' == c: B = (c/2) w^2; linear kind has c = 1.
        let reg = NonlinearitySpec::linear().regularize(1e-2).unwrap();
        let b = reg.b_functional(0.4, 0.0);
        assert!((b - 0.08).abs() < 1e-12);
        // shifted level
        let b = reg.b_functional(1.4, 1.0);
        assert!((b - 0.08).abs() < 1e-12);
    }

    #[test]
    fn b_functional_zero_when_u_below_k() {
        for spec in [stefan(1.0, 1.0), porous(2.0)] {
            let reg = spec.regularize(1e-2).unwrap();
            assert_eq!(reg.b_functional(0.3, 0.3), 0.0);
            assert_eq!(reg.b_functional(-1.0, 0.5), 0.0);
        }
    }

    #[test]
    fn b_functional_matches_brute_force_trapezoid() {
        // 1e6-point trapezoid oracle across the chord band.
        let reg = stefan(1.0, 1.0).regularize(0.1).unwrap();
        let (k, u) = (-0.05, 0.05);
        let n = 1_000_000usize;
        let w = u - k;
        let f = |tau: f64| reg.beta_prime(k + tau) * tau;
        let mut oracle = 0.5 * (f(0.0) + f(w));
        for i in 1..n {
            oracle += f(w * i as f64 / n as f64);
        }
        oracle *= w / n as f64;
        let got = reg.b_functional(u, k);
        assert!(
            (got - oracle).abs() <= 1e-8 * oracle.abs(),
            "closed form {got} vs oracle {oracle}"
        );
    }

    #[test]
    fn b_functional_porous_matches_brute_force() {
        let reg = porous(2.0).regularize(1e-2).unwrap();
        let (k, u) = (0.005, 0.8); // crosses the cap kink at x = eps
        let n = 2_000_000usize;
        let w = u - k;
        let f = |tau: f64| reg.beta_prime(k + tau) * tau;
        let mut oracle = 0.5 * (f(0.0) + f(w));
        for i in 1..n {
            oracle += f(w * i as f64 / n as f64);
        }
        oracle *= w / n as f64;
        let got = reg.b_functional(u, k);
        assert!(
            (got - oracle).abs() <= 1e-7 * oracle.abs(),
            "quadrature {got} vs oracle {oracle}"
        );
    }

    #[test]
    fn b_functional_monotone_nonnegative() {
        let reg = stefan(2.0, 0.5).regularize(1e-2).unwrap();
        let k = -0.4;
        let mut last = 0.0;
        for i in 0..200 {
            let u = k + i as f64 * 0.01;
            let b = reg.b_functional(u, k);
            assert!(b >= 0.0);
            assert!(b >= last - 1e-15, "not nondecreasing at u = {u}");
            if u > k {
                assert!(b > 0.0, "zero for u > k at u = {u}");
            }
            last = b;
        }
    }

    #[test]
    fn b_functional_stefan_lower_bound() {
        // B >= (min(a,b)/2) [(u-k)^+]^2 holds once eps <= 1 (chord slope >= 1).
        let mut seed = 0xb0b;
        for (a, b) in [(1.0, 1.0), (2.0, 0.5)] {
            let reg = stefan(a, b).regularize(1e-3).unwrap();
            for _ in 0..200 {
                let k = 4.0 * (lcg(&mut seed) - 0.5);
                let u = k + 4.0 * lcg(&mut seed);
                let lhs = reg.b_functional(u, k);
                let rhs = 0.5 * a.min(b) * (u - k).powi(2);
                assert!(lhs >= rhs - 1e-12 * (1.0 + rhs), "B = {lhs} < bound {rhs}");
            }
        }
    }

    #[test]
    fn degeneracy_ratio_porous_matches_dense_oracle() {
        let spec = porous(2.0);
        let report = spec.check_conditions((0.1, 1.0), 1001).unwrap();
        // dense 1e6-sample brute force of inf beta' * (M - m) / (beta(M) - beta(m))
        let n = 1_000_000usize;
        let mut inf = f64::INFINITY;
        for i in 0..=n {
            let x = 0.1 + 0.9 * i as f64 / n as f64;
            inf = inf.min(spec.beta_prime_eval(x).unwrap());
        }
        let oracle = inf * 0.9 / (1.0 - 0.1f64.sqrt());
        assert!(
            (report.degeneracy_ratio - oracle).abs() <= 1e-6 * oracle,
            "ratio {} vs oracle {oracle}",
            report.degeneracy_ratio
        );
    }

    #[test]
    fn degeneracy_ratio_is_one_for_identity() {
        let spec = NonlinearitySpec::linear();
        for range in [(0.1, 1.0), (-2.0, 3.0), (5.0, 9.0)] {
            let report = spec.check_conditions(range, 101).unwrap();
            assert!((report.degeneracy_ratio - 1.0).abs() < 1e-12);
            assert!(report.all_passed());
        }
    }

    #[test]
    fn stefan_graph_flagged_by_condition_check() {
        let report = stefan(1.0, 1.0).check_conditions((-1.0, 1.0), 101).unwrap();
        assert!(!report.derivative_defined);
        assert!(report.flags.iter().any(|f| f.contains("vertical graph segment")));
        assert!(report.monotone);
    }

    #[test]
    fn porous_floor_note_reported() {
        let report = porous(2.0).check_conditions((0.1, 1.0), 101).unwrap();
        assert!(report.notes.iter().any(|n| n.contains("bounded ranges")));
        assert!(report.floor_ok);
    }

    #[test]
    fn derivative_floor_locations() {
        let reg = stefan(2.0, 0.5).regularize(1e-2).unwrap();
        // range spanning past the band: floor = min(a, b) on a branch
        let (floor, loc) = reg.derivative_floor(0.0, 2.0);
        assert_eq!(floor, 0.5);
        assert_eq!(loc, FloorLocation::Branch);
        // range inside the band: floor = chord slope
        let (floor, loc) = reg.derivative_floor(-5e-3, 5e-3);
        assert!(floor > 100.0);
        assert_eq!(loc, FloorLocation::RegularizationBand);

        let regp = porous(2.0).regularize(1e-2).unwrap();
        let (floor, loc) = regp.derivative_floor(0.0, 1.0);
        assert!((floor - 0.5).abs() < 1e-12); // beta'(1) = 1/2
        assert_eq!(loc, FloorLocation::Branch);
    }

    #[test]
    fn monotone_regularization_in_epsilon() {
        let spec = stefan(1.5, 0.75);
        let d1 = spec.regularize(1e-3).unwrap().phi_distance(-4.0, 4.0, 3000);
        let d2 = spec.regularize(1e-2).unwrap().phi_distance(-4.0, 4.0, 3000);
        let d3 = spec.regularize(1e-1).unwrap().phi_distance(-4.0, 4.0, 3000);
        assert!(d1 <= d2 && d2 <= d3, "{d1} {d2} {d3}");
    }
}
