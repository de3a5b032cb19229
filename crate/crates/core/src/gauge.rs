//! Dimension gauges h(r): the kernels of all energies and contents.
//!
//! A gauge is increasing with h(0) = 0 and h(r)·r^-d nonincreasing. The
//! power gauge r^s covers the classical s-energies and t-contents; the
//! power-log gauge r^d·(log r)^2 is the borderline case whose energies still
//! converge.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GaugeError {
    #[error("invalid gauge: {0}")]
    Invalid(String),
}

/// Volume of the unit ball in R^d.
pub fn unit_ball_volume(dim: usize) -> f64 {
    match dim {
        1 => 2.0,
        2 => std::f64::consts::PI,
        3 => 4.0 * std::f64::consts::PI / 3.0,
        _ => unreachable!("dimension checked on construction"),
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    /// h(r) = r^s
    Power { s: f64 },
    /// h(r) = r^d (log min(r, r0))^2 with r0 = e^{-2/d}, the largest cutoff
    /// keeping h increasing; beyond r0 the log factor is frozen.
    PowerLog { dim: usize, r0: f64 },
    /// Monotone samples with linear interpolation, constant above the last
    /// abscissa.
    Tabulated { rs: Vec<f64>, hs: Vec<f64> },
}

/// A gauge function h together with the ambient dimension it is used in.
#[derive(Debug, Clone, PartialEq)]
pub struct Gauge {
    dim: usize,
    kind: Kind,
}

impl Gauge {
    /// Power gauge h(r) = r^s. Any s > 0 is representable; energies diverge
    /// when s >= d, which the energy module reports as +inf.
    pub fn power(dim: usize, s: f64) -> Result<Self, GaugeError> {
        if !(1..=crate::dyadic::MAX_DIM).contains(&dim) {
            return Err(GaugeError::Invalid(format!("dimension {dim}")));
        }
        if !(s > 0.0) || !s.is_finite() {
            return Err(GaugeError::Invalid(format!("power exponent {s}")));
        }
        Ok(Gauge { dim, kind: Kind::Power { s } })
    }

    /// Borderline gauge h(r) = r^d (log r)^2 (log exponent fixed at 2).
    pub fn power_log(dim: usize) -> Result<Self, GaugeError> {
        if !(1..=crate::dyadic::MAX_DIM).contains(&dim) {
            return Err(GaugeError::Invalid(format!("dimension {dim}")));
        }
        let r0 = (-2.0 / dim as f64).exp();
        Ok(Gauge { dim, kind: Kind::PowerLog { dim, r0 } })
    }

    /// Tabulated gauge from monotone samples; the gauge-class conditions
    /// (h increasing, h(0)=0, h(r) r^-d nonincreasing) are verified on the
    /// sample grid.
    pub fn tabulated(dim: usize, rs: Vec<f64>, hs: Vec<f64>) -> Result<Self, GaugeError> {
        if !(1..=crate::dyadic::MAX_DIM).contains(&dim) {
            return Err(GaugeError::Invalid(format!("dimension {dim}")));
        }
        if rs.len() != hs.len() || rs.len() < 2 {
            return Err(GaugeError::Invalid("need at least two samples".into()));
        }
        for i in 0..rs.len() {
            if !(rs[i] > 0.0) || !(hs[i] > 0.0) {
                return Err(GaugeError::Invalid("samples must be positive".into()));
            }
            if i > 0 {
                if rs[i] <= rs[i - 1] || hs[i] < hs[i - 1] {
                    return Err(GaugeError::Invalid("h must be increasing".into()));
                }
                let a = hs[i - 1] / rs[i - 1].powi(dim as i32);
                let b = hs[i] / rs[i].powi(dim as i32);
                if b > a * (1.0 + 1e-12) {
                    return Err(GaugeError::Invalid("h(r) r^-d must be nonincreasing".into()));
                }
            }
        }
        Ok(Gauge { dim, kind: Kind::Tabulated { rs, hs } })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// The exponent s of a power gauge, if this is one.
    pub fn power_exponent(&self) -> Option<f64> {
        match self.kind {
            Kind::Power { s } => Some(s),
            _ => None,
        }
    }

    /// h(r); h(0) = 0 by convention for every kind.
    pub fn eval(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        match &self.kind {
            Kind::Power { s } => r.powf(*s),
            Kind::PowerLog { dim, r0 } => {
                let l = r.min(*r0).ln();
                r.powi(*dim as i32) * l * l
            }
            Kind::Tabulated { rs, hs } => {
                if r <= rs[0] {
                    // extend below the first sample preserving h r^-d slope
                    return hs[0] * (r / rs[0]).powi(self.dim as i32);
                }
                if r >= *rs.last().unwrap() {
                    return *hs.last().unwrap();
                }
                let i = rs.partition_point(|&x| x <= r);
                let (r0, r1, h0, h1) = (rs[i - 1], rs[i], hs[i - 1], hs[i]);
                h0 + (h1 - h0) * (r - r0) / (r1 - r0)
            }
        }
    }

    /// Kernel 1/h(r); +inf at r = 0.
    pub fn kernel(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return f64::INFINITY;
        }
        1.0 / self.eval(r)
    }

    /// `∫_{B(0,rho)} h(|u|)^-1 du` in R^d, or `None` when the integral
    /// diverges. Used as a rigorous rearrangement bound for touching cells.
    pub fn radial_ball_integral(&self, rho: f64) -> Option<f64> {
        let d = self.dim as f64;
        let surf = d * unit_ball_volume(self.dim); // surface area of the unit sphere
        match &self.kind {
            Kind::Power { s } => {
                if *s >= d {
                    return None;
                }
                Some(surf * rho.powf(d - s) / (d - s))
            }
            Kind::PowerLog { r0, .. } => {
                // kernel r^-d (ln min(r,r0))^-2: radial integrand 1/(r ln^2) below r0
                let l0 = r0.ln();
                if rho <= *r0 {
                    Some(surf * (-1.0 / rho.ln()))
                } else {
                    Some(surf * ((-1.0 / l0) + (rho / r0).ln() / (l0 * l0)))
                }
            }
            Kind::Tabulated { .. } => {
                // dyadic shells with the monotone kernel bound; report divergence
                // if the partial sums fail to settle
                let mut total = 0.0;
                let mut r_hi = rho;
                for _ in 0..200 {
                    let r_lo = r_hi / 2.0;
                    let shell =
                        unit_ball_volume(self.dim) * (r_hi.powi(self.dim as i32) - r_lo.powi(self.dim as i32));
                    let term = shell * self.kernel(r_lo);
                    total += term;
                    if term < 1e-12 * total {
                        return Some(total);
                    }
                    r_hi = r_lo;
                }
                None
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_eval() {
        let g = Gauge::power(1, 0.5).unwrap();
        assert_eq!(g.eval(0.25), 0.5);
        assert_eq!(g.eval(0.0), 0.0);
        assert_eq!(g.kernel(0.0), f64::INFINITY);
    }

    #[test]
    fn power_radial_integral_matches_quadrature() {
        let g = Gauge::power(2, 0.7).unwrap();
        let rho = 0.3;
        // midpoint quadrature of surf * r^{d-1-s}
        let n = 200_000;
        let mut acc = 0.0;
        for i in 0..n {
            let r = (i as f64 + 0.5) * rho / n as f64;
            acc += r.powf(2.0 - 1.0 - 0.7) * rho / n as f64;
        }
        acc *= 2.0 * std::f64::consts::PI;
        assert!((g.radial_ball_integral(rho).unwrap() - acc).abs() / acc < 1e-4);
    }

    #[test]
    fn power_log_is_increasing_and_integrable() {
        let g = Gauge::power_log(1).unwrap();
        let mut prev = 0.0;
        for i in 1..do_steps() {
            let r = i as f64 / do_steps() as f64;
            let h = g.eval(r * 0.5);
            assert!(h >= prev);
            prev = h;
        }
        let v = g.radial_ball_integral(0.01).unwrap();
        assert!((v - 2.0 / (-(0.01f64.ln()))).abs() < 1e-12);
    }

    fn do_steps() -> usize {
        1000
    }

    #[test]
    fn tabulated_validation() {
        assert!(Gauge::tabulated(1, vec![0.1, 0.2], vec![0.1, 0.2]).is_ok());
        // h decreasing rejected
        assert!(Gauge::tabulated(1, vec![0.1, 0.2], vec![0.2, 0.1]).is_err());
        // h r^-d increasing rejected (h grows faster than r^d)
        assert!(Gauge::tabulated(1, vec![0.1, 0.2], vec![0.1, 0.5]).is_err());
    }
}
