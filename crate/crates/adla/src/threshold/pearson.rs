//! Pearson-system curve fitting by moment matching.
//!
//! A member of the Pearson family is selected from (mean, variance,
//! skewness, kurtosis) via the standard criterion on beta1 = gamma1^2 and
//! beta2 = gamma2, its density written in closed form from the roots of
//! the system's quadratic, and its CDF evaluated by adaptive quadrature.
//! Quantiles come from bracketed bisection on the upper-tail mass, so no
//! incomplete-beta or incomplete-gamma machinery is needed.
//!
//! Types I, IV and VI (the criterion's three main regions) are supported,
//! plus the normal point beta1 = 0, beta2 = 3. Boundary types (III, V)
//! and degenerate coefficient sets are reported as unsupported.

use serde::{Deserialize, Serialize};

use super::ThresholdError;
use super::quad::integrate;

const ABS_TOL: f64 = 1e-13;
const REL_TOL: f64 = 1e-11;

/// Pearson family member selected by the moment criterion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PearsonType {
    /// The beta1 = 0, beta2 = 3 boundary point.
    #[serde(rename = "normal")]
    Normal,
    #[serde(rename = "I")]
    TypeI,
    #[serde(rename = "IV")]
    TypeIV,
    #[serde(rename = "VI")]
    TypeVI,
}

impl std::fmt::Display for PearsonType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            PearsonType::Normal => "normal",
            PearsonType::TypeI => "I",
            PearsonType::TypeIV => "IV",
            PearsonType::TypeVI => "VI",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy)]
enum Kind {
    Normal {
        sd: f64,
    },
    /// Bounded support (lo, hi); density prop. to (x-lo)^e_lo (hi-x)^e_hi.
    TypeI {
        lo: f64,
        hi: f64,
        e_lo: f64,
        e_hi: f64,
    },
    /// Support R; log density log_coef*ln((x+h)^2+w^2) + atan_coef*atan((x+h)/w).
    TypeIV {
        h: f64,
        w: f64,
        log_coef: f64,
        atan_coef: f64,
    },
    /// Semi-infinite support starting at `near`; `far` is the other root.
    /// `upper` support is (near, +inf), otherwise (-inf, near).
    TypeVI {
        near: f64,
        far: f64,
        e_near: f64,
        e_far: f64,
        upper: bool,
    },
}

/// A fitted Pearson curve in deviation-from-mean coordinates.
#[derive(Debug, Clone)]
pub(crate) struct PearsonCurve {
    ptype: PearsonType,
    mean: f64,
    sd: f64,
    kind: Kind,
    /// Log of the density's probe-grid peak; densities are scaled by
    /// exp(-log_peak) before integrating to keep magnitudes moderate.
    log_peak: f64,
    /// Mass of the scaled density over the whole support.
    mass: f64,
}

impl PearsonCurve {
    pub(crate) fn fit(
        mean: f64,
        mu2: f64,
        gamma1: f64,
        gamma2: f64,
    ) -> Result<Self, ThresholdError> {
        if !mu2.is_finite() || mu2 <= 0.0 {
            return Err(ThresholdError::VarianceNotPositive(mu2));
        }
        let b1 = gamma1 * gamma1;
        let b2 = gamma2;
        if !(b2 > b1 + 1.0) {
            return Err(ThresholdError::InfeasibleMoments {
                beta1: b1,
                beta2: b2,
            });
        }
        let sd = mu2.sqrt();
        if b1 == 0.0 && b2 == 3.0 {
            return Ok(Self::finish(PearsonType::Normal, mean, sd, Kind::Normal { sd }));
        }

        let scale = 10.0 * b2 - 12.0 * b1 - 18.0;
        let crit_den = (4.0 * b2 - 3.0 * b1) * (2.0 * b2 - 3.0 * b1 - 6.0);
        let criterion = if crit_den == 0.0 {
            f64::INFINITY
        } else {
            b1 * (b2 + 3.0) * (b2 + 3.0) / (4.0 * crit_den)
        };
        if crit_den == 0.0 || scale == 0.0 || criterion == 1.0 {
            return Err(ThresholdError::UnsupportedPearsonRegion { criterion });
        }

        // Quadratic of the Pearson differential equation, origin at the mean.
        let c0 = (4.0 * b2 - 3.0 * b1) * mu2 / scale;
        let c1 = gamma1 * sd * (b2 + 3.0) / scale;
        let c2 = (2.0 * b2 - 3.0 * b1 - 6.0) / scale;

        let region_i = if b1 == 0.0 { b2 < 3.0 } else { criterion < 0.0 };
        let kind = if region_i {
            let (lo, hi) = real_roots(c0, c1, c2, criterion)?;
            let e_lo = -(lo + c1) / (c2 * (lo - hi));
            let e_hi = -(hi + c1) / (c2 * (hi - lo));
            if !(e_lo > -1.0 && e_hi > -1.0) || !(lo < 0.0 && hi > 0.0) {
                return Err(ThresholdError::UnsupportedPearsonRegion { criterion });
            }
            Kind::TypeI { lo, hi, e_lo, e_hi }
        } else if criterion > 1.0 {
            let (r_lo, r_hi) = real_roots(c0, c1, c2, criterion)?;
            let upper = r_hi < 0.0;
            if !upper && !(r_lo > 0.0) {
                // roots must share a sign in the VI region
                return Err(ThresholdError::UnsupportedPearsonRegion { criterion });
            }
            let (near, far) = if upper { (r_hi, r_lo) } else { (r_lo, r_hi) };
            let e_near = -(near + c1) / (c2 * (near - far));
            let e_far = -(far + c1) / (c2 * (far - near));
            if !(e_near > -1.0) || !(e_near + e_far < -1.0) {
                return Err(ThresholdError::UnsupportedPearsonRegion { criterion });
            }
            Kind::TypeVI {
                near,
                far,
                e_near,
                e_far,
                upper,
            }
        } else {
            // 0 <= criterion < 1, including the symmetric beta2 > 3 case
            if !(c2 > 0.0 && c2 < 1.0) {
                return Err(ThresholdError::UnsupportedPearsonRegion { criterion });
            }
            let h = c1 / (2.0 * c2);
            let w_sq = c0 / c2 - h * h;
            if !(w_sq > 0.0) {
                return Err(ThresholdError::UnsupportedPearsonRegion { criterion });
            }
            Kind::TypeIV {
                h,
                w: w_sq.sqrt(),
                log_coef: -1.0 / (2.0 * c2),
                atan_coef: -(c1 - h) / (c2 * w_sq.sqrt()),
            }
        };
        let ptype = match kind {
            Kind::Normal { .. } => PearsonType::Normal,
            Kind::TypeI { .. } => PearsonType::TypeI,
            Kind::TypeIV { .. } => PearsonType::TypeIV,
            Kind::TypeVI { .. } => PearsonType::TypeVI,
        };
        Ok(Self::finish(ptype, mean, sd, kind))
    }

    fn finish(ptype: PearsonType, mean: f64, sd: f64, kind: Kind) -> Self {
        let mut curve = Self {
            ptype,
            mean,
            sd,
            kind,
            log_peak: 0.0,
            mass: 1.0,
        };
        if !matches!(kind, Kind::Normal { .. }) {
            curve.log_peak = curve.probe_log_peak();
            curve.mass = curve.total_mass();
        }
        curve
    }

    pub(crate) fn pearson_type(&self) -> PearsonType {
        self.ptype
    }

    /// Log of the unnormalized density at deviation x (inside the support).
    fn log_density(&self, x: f64) -> f64 {
        match self.kind {
            Kind::Normal { sd } => -0.5 * (x / sd) * (x / sd),
            Kind::TypeI { lo, hi, e_lo, e_hi } => e_lo * (x - lo).ln() + e_hi * (hi - x).ln(),
            Kind::TypeIV {
                h,
                w,
                log_coef,
                atan_coef,
            } => {
                let u = x + h;
                log_coef * (u * u + w * w).ln() + atan_coef * (u / w).atan()
            }
            Kind::TypeVI {
                near,
                far,
                e_near,
                e_far,
                upper,
            } => {
                if upper {
                    e_near * (x - near).ln() + e_far * (x - far).ln()
                } else {
                    e_near * (near - x).ln() + e_far * (far - x).ln()
                }
            }
        }
    }

    fn density(&self, x: f64) -> f64 {
        (self.log_density(x) - self.log_peak).exp()
    }

    fn probe_log_peak(&self) -> f64 {
        let mut best = f64::NEG_INFINITY;
        let mut visit = |x: f64| {
            let v = self.log_density(x);
            if v > best {
                best = v;
            }
        };
        match self.kind {
            Kind::Normal { .. } => return 0.0,
            Kind::TypeI { lo, hi, .. } => {
                let span = hi - lo;
                for k in 1..512 {
                    visit(lo + span * k as f64 / 512.0);
                }
            }
            Kind::TypeIV { h, .. } => {
                // unimodal with mode at the zero of x + c1; probe around it
                let center = -h; // close to the mode for moderate skew
                for k in -256..=256 {
                    visit(center + self.sd * 12.0 * k as f64 / 256.0);
                }
            }
            Kind::TypeVI { near, upper, .. } => {
                let dir = if upper { 1.0 } else { -1.0 };
                let mut exp = -9.0;
                while exp <= 2.0 {
                    visit(near + dir * self.sd * 10f64.powf(exp));
                    exp += 0.25;
                }
                for k in 1..=400 {
                    visit(near + dir * self.sd * 20.0 * k as f64 / 400.0);
                }
            }
        }
        best
    }

    /// Integral of the scaled density over [a, b] with an integrable power
    /// singularity of exponent m at the left edge `root` (a == root).
    /// Substituting x = root + u^(1/(1+m)) removes the singularity.
    fn sub_left(&self, root: f64, b: f64, m: f64, smooth: &dyn Fn(f64) -> f64) -> f64 {
        let s = 1.0 / (1.0 + m);
        let ub = (b - root).powf(1.0 + m);
        integrate(&|u: f64| s * smooth(root + u.powf(s)), 0.0, ub, ABS_TOL, REL_TOL)
    }

    /// Mirror of `sub_left` for a singularity at the right edge (b == root).
    fn sub_right(&self, a: f64, root: f64, m: f64, smooth: &dyn Fn(f64) -> f64) -> f64 {
        let s = 1.0 / (1.0 + m);
        let ua = (root - a).powf(1.0 + m);
        integrate(&|u: f64| s * smooth(root - u.powf(s)), 0.0, ua, ABS_TOL, REL_TOL)
    }

    /// Integral of the scaled density over (c, +inf) via x = c + sd*t/(1-t).
    fn tail_right_of(&self, c: f64) -> f64 {
        let sd = self.sd;
        integrate(
            &|t: f64| {
                let om = 1.0 - t;
                self.density(c + sd * t / om) * sd / (om * om)
            },
            0.0,
            1.0,
            ABS_TOL,
            REL_TOL,
        )
    }

    /// Integral of the scaled density over (-inf, c).
    fn tail_left_of(&self, c: f64) -> f64 {
        let sd = self.sd;
        integrate(
            &|t: f64| {
                let om = 1.0 - t;
                self.density(c - sd * t / om) * sd / (om * om)
            },
            0.0,
            1.0,
            ABS_TOL,
            REL_TOL,
        )
    }

    fn total_mass(&self) -> f64 {
        match self.kind {
            Kind::Normal { .. } => 1.0,
            Kind::TypeI { lo, hi, e_lo, e_hi } => {
                let span = hi - lo;
                let cut_lo = lo + 0.125 * span;
                let cut_hi = hi - 0.125 * span;
                let left = if e_lo < 0.0 {
                    self.sub_left(lo, cut_lo, e_lo, &|x| {
                        (e_hi * (hi - x).ln() - self.log_peak).exp()
                    })
                } else {
                    integrate(&|x| self.density(x), lo, cut_lo, ABS_TOL, REL_TOL)
                };
                let right = if e_hi < 0.0 {
                    self.sub_right(cut_hi, hi, e_hi, &|x| {
                        (e_lo * (x - lo).ln() - self.log_peak).exp()
                    })
                } else {
                    integrate(&|x| self.density(x), cut_hi, hi, ABS_TOL, REL_TOL)
                };
                left + integrate(&|x| self.density(x), cut_lo, cut_hi, ABS_TOL, REL_TOL) + right
            }
            Kind::TypeIV { h, .. } => {
                let center = -h;
                self.tail_left_of(center) + self.tail_right_of(center)
            }
            Kind::TypeVI {
                near,
                far,
                e_near,
                e_far,
                upper,
            } => {
                let cut = if upper {
                    near + self.sd
                } else {
                    near - self.sd
                };
                let near_piece = if e_near < 0.0 {
                    if upper {
                        self.sub_left(near, cut, e_near, &|x| {
                            (e_far * (x - far).ln() - self.log_peak).exp()
                        })
                    } else {
                        self.sub_right(cut, near, e_near, &|x| {
                            (e_far * (far - x).ln() - self.log_peak).exp()
                        })
                    }
                } else if upper {
                    integrate(&|x| self.density(x), near, cut, ABS_TOL, REL_TOL)
                } else {
                    integrate(&|x| self.density(x), cut, near, ABS_TOL, REL_TOL)
                };
                let far_piece = if upper {
                    self.tail_right_of(cut)
                } else {
                    self.tail_left_of(cut)
                };
                near_piece + far_piece
            }
        }
    }

    /// Upper-tail mass P(X > mean + q) of the scaled, unnormalized density.
    fn upper_tail_unscaled(&self, q: f64) -> f64 {
        match self.kind {
            Kind::Normal { .. } => unreachable!("normal kind uses closed forms"),
            Kind::TypeI { lo, hi, e_lo, e_hi } => {
                if q <= lo {
                    return self.mass;
                }
                if q >= hi {
                    return 0.0;
                }
                let span = hi - lo;
                let cut_hi = hi - 0.125 * span;
                let right = if e_hi < 0.0 {
                    self.sub_right(cut_hi.max(q), hi, e_hi, &|x| {
                        (e_lo * (x - lo).ln() - self.log_peak).exp()
                    })
                } else {
                    integrate(&|x| self.density(x), cut_hi.max(q), hi, ABS_TOL, REL_TOL)
                };
                if q < cut_hi {
                    right + integrate(&|x| self.density(x), q, cut_hi, ABS_TOL, REL_TOL)
                } else {
                    right
                }
            }
            Kind::TypeIV { .. } => self.tail_right_of(q),
            Kind::TypeVI {
                near,
                far,
                e_near,
                e_far,
                upper,
            } => {
                if upper {
                    if q <= near {
                        self.mass
                    } else {
                        self.tail_right_of(q)
                    }
                } else {
                    if q >= near {
                        return 0.0;
                    }
                    let cut = near - self.sd;
                    let near_piece = if e_near < 0.0 {
                        self.sub_right(cut.max(q), near, e_near, &|x| {
                            (e_far * (far - x).ln() - self.log_peak).exp()
                        })
                    } else {
                        integrate(&|x| self.density(x), cut.max(q), near, ABS_TOL, REL_TOL)
                    };
                    if q < cut {
                        near_piece + integrate(&|x| self.density(x), q, cut, ABS_TOL, REL_TOL)
                    } else {
                        near_piece
                    }
                }
            }
        }
    }

    /// Upper-tail probability P(X > x) in original coordinates.
    #[cfg(test)]
    pub(crate) fn upper_tail(&self, x: f64) -> f64 {
        let q = x - self.mean;
        match self.kind {
            Kind::Normal { sd } => crate::stats::normal_sf(q / sd),
            _ => self.upper_tail_unscaled(q) / self.mass,
        }
    }

    /// Upper (1 - alpha) quantile for any alpha in (0, 1): bracketed
    /// bisection on the tail mass until |CDF(q) - (1 - alpha)| <= 1e-9.
    pub(crate) fn upper_quantile(&self, alpha: f64) -> Result<f64, ThresholdError> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(ThresholdError::AlphaOutOfRange(alpha));
        }
        if let Kind::Normal { sd } = self.kind {
            let z = crate::stats::normal_quantile(1.0 - alpha)?;
            return Ok(self.mean + sd * z);
        }
        let tail = |q: f64| self.upper_tail_unscaled(q) / self.mass;

        // Bracket [lo, hi] with tail(lo) >= alpha >= tail(hi).
        let (mut lo, mut hi) = match self.kind {
            Kind::TypeI { lo, hi, .. } => (lo, hi),
            Kind::TypeIV { .. } => {
                let mut left = 0.0;
                let mut step = self.sd;
                while tail(left) < alpha {
                    left -= step;
                    step *= 2.0;
                    if !left.is_finite() {
                        return Err(ThresholdError::QuantileBracketFailed);
                    }
                }
                let mut right = left + self.sd;
                while tail(right) > alpha {
                    right += step;
                    step *= 2.0;
                    if !right.is_finite() {
                        return Err(ThresholdError::QuantileBracketFailed);
                    }
                }
                (left, right)
            }
            Kind::TypeVI { near, upper, .. } => {
                if upper {
                    let mut right = near + self.sd;
                    let mut steps = 0;
                    while tail(right) > alpha {
                        right = near + 2.0 * (right - near);
                        steps += 1;
                        if steps > 2000 || !right.is_finite() {
                            return Err(ThresholdError::QuantileBracketFailed);
                        }
                    }
                    (near, right)
                } else {
                    let mut left = near - self.sd;
                    let mut steps = 0;
                    while tail(left) < alpha {
                        left = near - 2.0 * (near - left);
                        steps += 1;
                        if steps > 2000 || !left.is_finite() {
                            return Err(ThresholdError::QuantileBracketFailed);
                        }
                    }
                    (left, near)
                }
            }
            Kind::Normal { .. } => unreachable!(),
        };

        let mut mid = 0.5 * (lo + hi);
        for _ in 0..120 {
            mid = 0.5 * (lo + hi);
            if tail(mid) > alpha {
                lo = mid;
            } else {
                hi = mid;
            }
            if (hi - lo) <= 1e-12 * (1.0 + mid.abs()) {
                break;
            }
        }
        Ok(self.mean + mid)
    }
}

fn real_roots(c0: f64, c1: f64, c2: f64, criterion: f64) -> Result<(f64, f64), ThresholdError> {
    let disc = c1 * c1 - 4.0 * c0 * c2;
    if !(disc > 0.0) || c2 == 0.0 {
        return Err(ThresholdError::UnsupportedPearsonRegion { criterion });
    }
    let sq = disc.sqrt();
    let r1 = (-c1 - sq) / (2.0 * c2);
    let r2 = (-c1 + sq) / (2.0 * c2);
    Ok((r1.min(r2), r1.max(r2)))
}
