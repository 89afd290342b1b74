//! The dyadic level/cylinder ladder and its cutoff family.
//!
//! Level m carries k_m = (1/2)(1 − 2^{−m}) climbing to 1/2 and radius
//! R_m = (1/2)(1 + 2^{−m}) shrinking to 1/2; the cylinder Q_m is
//! {|x − x0| ≤ R_m, t0 − R_m^α ≤ t ≤ t0}. The cutoff ζ_m is a product of a
//! radial cubic-smoothstep ramp (1 inside R_{m+1}, 0 outside R_m) and the
//! matching ramp in time, so 1_{Q_{m+1}} ≤ ζ_m ≤ 1_{Q_m} holds exactly and
//! the spatial slope is 1.5/(R_m − R_{m+1}) = 6·2^m.
//!
//! The time ramp uses the full gap R_m^α − R_{m+1}^α. For α < 1 that gap is
//! Θ(2^{−m}), so no cutoff family can keep |∂_t ζ_m| under C·2^{αm} with one
//! constant; [`DeGiorgiLadder::time_slope`] reports the realized slope
//! instead of asserting that bound.

use crate::error::{Error, Result};

use super::ParabolicCylinder;

#[derive(Debug, Clone, Copy)]
pub struct DeGiorgiLadder {
    pub m: u32,
    pub alpha: f64,
    /// k_m, the truncation level.
    pub level: f64,
    /// R_m, the outer radius (cutoff support).
    pub radius: f64,
    /// k_{m+1}, the next level up.
    pub next_level: f64,
    /// R_{m+1}, the radius of the inner plateau where the cutoff is 1.
    pub inner_radius: f64,
    /// Cylinder anchor: top center point.
    pub x0: [f64; 2],
    /// Cylinder anchor: top time.
    pub t0: f64,
}

/// Closed-form ladder data for level `m`, anchored at the origin with top
/// time 0 (use [`DeGiorgiLadder::anchored`] to move it onto a run).
pub fn degiorgi_levels(m: u32, alpha: f64) -> Result<DeGiorgiLadder> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(Error::param("alpha", format!("must lie in (0, 2), got {alpha}")));
    }
    if m > 60 {
        return Err(Error::param("m", "level index beyond 60 is pure rounding noise"));
    }
    let pow = f64::exp2(-(m as f64));
    let pow_next = 0.5 * pow;
    Ok(DeGiorgiLadder {
        m,
        alpha,
        level: 0.5 * (1.0 - pow),
        radius: 0.5 * (1.0 + pow),
        next_level: 0.5 * (1.0 - pow_next),
        inner_radius: 0.5 * (1.0 + pow_next),
        x0: [0.0, 0.0],
        t0: 0.0,
    })
}

fn smoothstep(s: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else if s >= 1.0 {
        1.0
    } else {
        s * s * (3.0 - 2.0 * s)
    }
}

impl DeGiorgiLadder {
    pub fn anchored(mut self, x0: [f64; 2], t0: f64) -> Self {
        self.x0 = x0;
        self.t0 = t0;
        self
    }

    /// R_m^α, how far back in time Q_m reaches.
    pub fn time_depth(&self) -> f64 {
        self.radius.powf(self.alpha)
    }

    /// R_{m+1}^α, depth of the inner plateau.
    pub fn inner_time_depth(&self) -> f64 {
        self.inner_radius.powf(self.alpha)
    }

    /// The open-carcass cylinder at the outer radius, for measures and
    /// oscillations over Q_m.
    pub fn cylinder(&self) -> Result<ParabolicCylinder> {
        ParabolicCylinder::new(self.x0, self.t0, self.radius, self.alpha)
    }

    /// Radial cutoff factor at distance `d` from the anchor.
    pub fn cutoff_space_radial(&self, d: f64) -> f64 {
        if d <= self.inner_radius {
            1.0
        } else if d >= self.radius {
            0.0
        } else {
            smoothstep((self.radius - d) / (self.radius - self.inner_radius))
        }
    }

    /// Temporal cutoff factor: 0 before the cylinder bottom and after the top
    /// time, 1 on the inner window, cubic ramp across the gap between depths.
    pub fn cutoff_time(&self, t: f64) -> f64 {
        if t > self.t0 {
            return 0.0;
        }
        let bottom = self.t0 - self.time_depth();
        let inner_bottom = self.t0 - self.inner_time_depth();
        if t >= inner_bottom {
            1.0
        } else if t <= bottom {
            0.0
        } else {
            smoothstep((t - bottom) / (inner_bottom - bottom))
        }
    }

    /// ζ_m(x, t).
    pub fn cutoff(&self, p: [f64; 2], t: f64) -> f64 {
        self.cutoff_space_radial(super::distance(p, self.x0)) * self.cutoff_time(t)
    }

    /// Supremum of the radial slope, 1.5/(R_m − R_{m+1}) = 6·2^m.
    pub fn space_slope(&self) -> f64 {
        1.5 / (self.radius - self.inner_radius)
    }

    /// Supremum of the time slope, 1.5/(R_m^α − R_{m+1}^α). Reported, not
    /// asserted (see the module docs).
    pub fn time_slope(&self) -> f64 {
        1.5 / (self.time_depth() - self.inner_time_depth())
    }

    /// Membership in the closed cylinder Q_m.
    pub fn contains(&self, p: [f64; 2], t: f64) -> bool {
        super::distance(p, self.x0) <= self.radius
            && t <= self.t0
            && t >= self.t0 - self.time_depth()
    }

    /// Membership in the closed inner cylinder Q_{m+1}.
    pub fn contains_inner(&self, p: [f64; 2], t: f64) -> bool {
        super::distance(p, self.x0) <= self.inner_radius
            && t <= self.t0
            && t >= self.t0 - self.inner_time_depth()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_values_at_small_levels() {
        let l0 = degiorgi_levels(0, 1.0).unwrap();
        assert_eq!(l0.level, 0.0);
        assert_eq!(l0.radius, 1.0);
        let l2 = degiorgi_levels(2, 1.0).unwrap();
        assert_eq!(l2.level, 3.0 / 8.0);
        assert_eq!(l2.radius, 5.0 / 8.0);
        assert_eq!(l2.next_level, 7.0 / 16.0);
        assert_eq!(l2.inner_radius, 9.0 / 16.0);
    }

    #[test]
    fn ladder_limits_and_monotonicity() {
        let l20 = degiorgi_levels(20, 1.0).unwrap();
        assert!((l20.level - 0.5).abs() < 1e-6);
        assert!((l20.radius - 0.5).abs() < 1e-6);
        let mut prev = degiorgi_levels(0, 0.8).unwrap();
        for m in 1..=16 {
            let cur = degiorgi_levels(m, 0.8).unwrap();
            assert!(cur.level > prev.level, "levels must climb");
            assert!(cur.radius < prev.radius, "radii must shrink");
            // Q_{m+1} ⊂ Q_m: inner data of the previous level bounds the next
            assert!(cur.radius <= prev.inner_radius + 1e-15);
            prev = cur;
        }
        assert!(degiorgi_levels(0, 2.0).is_err());
    }

    #[test]
    fn cutoff_sandwich_is_exact() {
        for &alpha in &[0.6, 1.0, 1.4] {
            for m in 0..=8u32 {
                let l = degiorgi_levels(m, alpha).unwrap().anchored([0.25, 0.0], 2.0);
                // sample a lattice of points and times straddling every region
                for i in 0..60 {
                    let d = i as f64 * 0.02;
                    let p = [0.25 + d, 0.0];
                    for j in 0..40 {
                        let t = 2.0 - 1.3 * j as f64 / 39.0 * l.time_depth();
                        let z = l.cutoff(p, t);
                        assert!((0.0..=1.0).contains(&z));
                        if l.contains_inner(p, t) {
                            assert_eq!(z, 1.0, "must be exactly 1 on the inner cylinder");
                        }
                        if !l.contains(p, t) {
                            assert_eq!(z, 0.0, "must vanish outside the outer cylinder");
                        }
                    }
                    // after the top time the cutoff vanishes identically
                    assert_eq!(l.cutoff(p, 2.0 + 1e-9), 0.0);
                }
            }
        }
    }

    #[test]
    fn finite_difference_gradient_stays_under_eight_2m() {
        // central differences on a fine axis through the anchor, m <= 12
        for m in 0..=12u32 {
            let l = degiorgi_levels(m, 1.0).unwrap();
            let bound = 8.0 * f64::exp2(m as f64);
            let h = 1e-4 * f64::exp2(-(m as f64));
            let mut worst = 0.0f64;
            let samples = 4000;
            for i in 1..samples {
                let x = 0.45 + 0.2 * (i as f64 / samples as f64); // straddles the ramp
                let f = |x: f64| l.cutoff_space_radial(x.abs());
                let g = (f(x + h) - f(x - h)) / (2.0 * h);
                worst = worst.max(g.abs());
            }
            assert!(
                worst <= bound,
                "m = {m}: measured slope {worst} exceeds {bound}"
            );
            // the analytic slope is 6·2^m, comfortably inside the constant 8
            assert!((l.space_slope() - 6.0 * f64::exp2(m as f64)).abs() < 1e-9 * bound);
        }
    }

    #[test]
    fn time_slope_is_reported() {
        // at alpha = 1 the gap is exactly 2^{-m-2}, slope 6·2^m
        let l = degiorgi_levels(3, 1.0).unwrap();
        assert!((l.time_slope() - 6.0 * 8.0).abs() < 1e-12);
        // for alpha < 1 the slope outgrows 2^{alpha m}: document, don't assert
        let l = degiorgi_levels(10, 0.5).unwrap();
        assert!(l.time_slope() > f64::exp2(0.5 * 10.0));
    }
}
