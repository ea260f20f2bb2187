/// `C¹` smoothstep `3s² − 2s³`, clamped to `[0, 1]`.
pub fn smoothstep(s: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else if s >= 1.0 {
        1.0
    } else {
        s * s * (3.0 - 2.0 * s)
    }
}

/// Periodic impulse of height `1/δ` at the start of every period.
///
/// The regularised version keeps the plateau on `[0, δ]` and adds smooth
/// ramps of width `δ²` on both sides: down on `(δ, δ+δ²)`, up on `(T−δ², T)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ImpulseProfile {
    pub delta: f64,
    pub period: f64,
    pub regularised: bool,
}

impl ImpulseProfile {
    pub fn new(delta: f64, period: f64, regularised: bool) -> Self {
        Self {
            delta,
            period,
            regularised,
        }
    }

    pub fn fits_period(&self) -> bool {
        let d = self.delta;
        if !(d > 0.0 && d < self.period) {
            return false;
        }
        !self.regularised || 2.0 * d * d + d < self.period
    }

    pub fn value(&self, t: f64) -> f64 {
        let d = self.delta;
        let tp = self.period;
        let s = t.rem_euclid(tp);
        if s <= d {
            return 1.0 / d;
        }
        if !self.regularised {
            return 0.0;
        }
        let d2 = d * d;
        if s < d + d2 {
            smoothstep((d + d2 - s) / d2) / d
        } else if s > tp - d2 {
            smoothstep((s - tp + d2) / d2) / d
        } else {
            0.0
        }
    }

    /// `∫₀ᵀ Δ(t) dt`: `1` unregularised, `1 + δ` regularised (each ramp adds
    /// `δ²/(2δ)` since the smoothstep averages to `1/2`).
    pub fn integral(&self) -> f64 {
        if self.regularised {
            1.0 + self.delta
        } else {
            1.0
        }
    }

    /// Support within one period `[0, T]`, as closed intervals.
    pub fn support(&self) -> Vec<(f64, f64)> {
        let d = self.delta;
        if self.regularised {
            let d2 = d * d;
            vec![(0.0, d + d2), (self.period - d2, self.period)]
        } else {
            vec![(0.0, d)]
        }
    }

    /// Edges of the piecewise definition that lie strictly inside `(t0, t1)`.
    pub fn breakpoints(&self, t0: f64, t1: f64) -> Vec<f64> {
        let tp = self.period;
        let d = self.delta;
        let mut offsets = vec![0.0, d];
        if self.regularised {
            offsets.push(d + d * d);
            offsets.push(tp - d * d);
        }
        let k0 = (t0 / tp).floor() as i64 - 1;
        let k1 = (t1 / tp).ceil() as i64 + 1;
        let mut out = Vec::new();
        for k in k0..=k1 {
            for &o in &offsets {
                let t = k as f64 * tp + o;
                if t > t0 && t < t1 {
                    out.push(t);
                }
            }
        }
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn quad(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        // composite 3-point Gauss-Legendre, exact on each cubic ramp piece
        let nodes = [-(0.6f64).sqrt(), 0.0, (0.6f64).sqrt()];
        let weights = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];
        let h = (b - a) / n as f64;
        let mut s = 0.0;
        for i in 0..n {
            let m = a + (i as f64 + 0.5) * h;
            for (x, w) in nodes.iter().zip(weights) {
                s += w * f(m + 0.5 * h * x);
            }
        }
        s * h / 2.0
    }

    #[test]
    fn smoothstep_endpoints_and_midpoint() {
        assert_eq!(smoothstep(-1.0), 0.0);
        assert_eq!(smoothstep(0.0), 0.0);
        assert_eq!(smoothstep(1.0), 1.0);
        assert_eq!(smoothstep(2.0), 1.0);
        assert_eq!(smoothstep(0.5), 0.5);
    }

    #[test]
    fn plateau_and_off_values() {
        let tp = 2.0 * PI;
        let d = tp / 500.0;
        for reg in [false, true] {
            let p = ImpulseProfile::new(d, tp, reg);
            assert_eq!(p.value(d / 2.0), 1.0 / d);
            assert_eq!(p.value(tp / 2.0), 0.0);
            assert_eq!(p.value(d / 2.0 + 3.0 * tp), 1.0 / d);
            assert_eq!(p.value(d / 2.0 - tp), 1.0 / d);
        }
    }

    #[test]
    fn regularised_ramp_midpoint() {
        let d = 0.1;
        let p = ImpulseProfile::new(d, 2.0, true);
        let v = p.value(d + d * d / 2.0);
        assert!((v - smoothstep(0.5) / d).abs() < 1e-12);
        let v = p.value(2.0 - d * d / 2.0);
        assert!((v - smoothstep(0.5) / d).abs() < 1e-12);
    }

    #[test]
    fn integrals_match_closed_form() {
        let tp = 1.0;
        let d = 0.05;
        for reg in [false, true] {
            let p = ImpulseProfile::new(d, tp, reg);
            let mut total = 0.0;
            let mut edges = vec![0.0];
            edges.extend(p.breakpoints(0.0, tp));
            edges.push(tp);
            for w in edges.windows(2) {
                total += quad(|t| p.value(t), w[0], w[1], 2000);
            }
            assert!((total - p.integral()).abs() < 1e-10, "reg={reg}: {total}");
        }
    }

    #[test]
    fn profiles_agree_off_ramps() {
        let d = 0.1;
        let tp = 1.0;
        let a = ImpulseProfile::new(d, tp, false);
        let b = ImpulseProfile::new(d, tp, true);
        for i in 0..1000 {
            let t = i as f64 / 1000.0 * tp;
            let on_ramp = (t > d && t < d + d * d) || t > tp - d * d;
            if !on_ramp {
                assert_eq!(a.value(t), b.value(t), "t = {t}");
            }
        }
    }

    #[test]
    fn bounded_by_inverse_width() {
        let p = ImpulseProfile::new(0.2, 1.0, true);
        for i in 0..5000 {
            let v = p.value(i as f64 * 7.3e-4 - 1.0);
            assert!((0.0..=5.0).contains(&v));
        }
    }

    #[test]
    fn breakpoints_over_two_periods() {
        let p = ImpulseProfile::new(0.1, 1.0, true);
        let bp = p.breakpoints(0.0, 2.0);
        let expect = [0.1, 0.11, 0.99, 1.0, 1.1, 1.11, 1.99];
        assert_eq!(bp.len(), expect.len());
        for (a, b) in bp.iter().zip(expect) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!(!ImpulseProfile::new(0.7, 1.0, true).fits_period());
        assert!(ImpulseProfile::new(0.7, 1.0, false).fits_period());
    }
}
