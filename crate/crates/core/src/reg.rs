//! Separable regularizers: value, proximal map and nonconvexity descriptors.
//!
//! SCAD and MCP are written as `λ|t| + q_λ(t)` with a concave part `q_λ`
//! whose derivative has slope in `[-ζ₋, -ζ₊]`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub const DEFAULT_SCAD_A: f64 = 3.7;
pub const DEFAULT_MCP_B: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Penalty {
    None,
    Ridge,
    L1,
    Scad { a: f64 },
    Mcp { b: f64 },
}

impl Penalty {
    pub fn name(&self) -> &'static str {
        match self {
            Penalty::None => "none",
            Penalty::Ridge => "ridge",
            Penalty::L1 => "l1",
            Penalty::Scad { .. } => "scad",
            Penalty::Mcp { .. } => "mcp",
        }
    }
}

impl fmt::Display for Penalty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Penalty {
    type Err = Error;

    /// Parses a kind name; shape parameters take their defaults.
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" => Ok(Penalty::None),
            "ridge" | "l2" => Ok(Penalty::Ridge),
            "l1" | "lasso" => Ok(Penalty::L1),
            "scad" => Ok(Penalty::Scad { a: DEFAULT_SCAD_A }),
            "mcp" => Ok(Penalty::Mcp { b: DEFAULT_MCP_B }),
            other => Err(Error::InvalidParameter(format!("unknown regularizer `{other}`"))),
        }
    }
}

/// Curvature summary of a regularizer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Descriptors {
    /// Strong-convexity modulus σ.
    pub strong_convexity: f64,
    pub zeta_minus: f64,
    pub zeta_plus: f64,
    /// Smoothness bound `L_h` of the subdifferential of the concave part.
    pub smoothness: f64,
}

/// `h_λ(β) = Σ_j p_λ(β_j)` over penalized coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Regularizer {
    penalty: Penalty,
    lambda: f64,
    unpenalized: Vec<usize>,
}

impl Regularizer {
    pub fn new(penalty: Penalty, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!("lambda must be finite and >= 0, got {lambda}")));
        }
        match penalty {
            Penalty::Scad { a } if !(a > 2.0 && a.is_finite()) => {
                return Err(Error::InvalidParameter(format!("SCAD needs a > 2, got {a}")))
            }
            Penalty::Mcp { b } if !(b > 0.0 && b.is_finite()) => {
                return Err(Error::InvalidParameter(format!("MCP needs b > 0, got {b}")))
            }
            _ => {}
        }
        Ok(Self {
            penalty,
            lambda,
            unpenalized: Vec::new(),
        })
    }

    pub fn none() -> Self {
        Self {
            penalty: Penalty::None,
            lambda: 0.0,
            unpenalized: Vec::new(),
        }
    }

    pub fn ridge(lambda: f64) -> Result<Self> {
        Self::new(Penalty::Ridge, lambda)
    }

    pub fn l1(lambda: f64) -> Result<Self> {
        Self::new(Penalty::L1, lambda)
    }

    pub fn scad(lambda: f64, a: f64) -> Result<Self> {
        Self::new(Penalty::Scad { a }, lambda)
    }

    pub fn mcp(lambda: f64, b: f64) -> Result<Self> {
        Self::new(Penalty::Mcp { b }, lambda)
    }

    /// Leaves the listed coordinates out of the penalty.
    pub fn with_unpenalized(mut self, mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        indices.dedup();
        self.unpenalized = indices;
        self
    }

    /// Same family and coordinates with a different weight.
    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        let mut next = Self::new(self.penalty, lambda)?;
        next.unpenalized = self.unpenalized.clone();
        Ok(next)
    }

    pub fn penalty(&self) -> Penalty {
        self.penalty
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn unpenalized(&self) -> &[usize] {
        &self.unpenalized
    }

    pub fn is_convex(&self) -> bool {
        matches!(self.penalty, Penalty::None | Penalty::Ridge | Penalty::L1) || self.lambda == 0.0
    }

    pub fn descriptors(&self) -> Descriptors {
        let lam = self.lambda;
        let (strong_convexity, zeta_minus) = match self.penalty {
            Penalty::Ridge if self.unpenalized.is_empty() => (2.0 * lam, 0.0),
            Penalty::Scad { a } if lam > 0.0 => (0.0, 1.0 / (a - 1.0)),
            Penalty::Mcp { b } if lam > 0.0 => (0.0, 1.0 / b),
            _ => (0.0, 0.0),
        };
        Descriptors {
            strong_convexity,
            zeta_minus,
            zeta_plus: 0.0,
            smoothness: zeta_minus,
        }
    }

    /// Penalty `p_λ(t)` of a single coordinate.
    pub fn scalar_value(&self, t: f64) -> f64 {
        let lam = self.lambda;
        let x = t.abs();
        match self.penalty {
            Penalty::None => 0.0,
            Penalty::Ridge => lam * t * t,
            Penalty::L1 => lam * x,
            Penalty::Scad { a } => {
                if x <= lam {
                    lam * x
                } else if x <= a * lam {
                    (2.0 * a * lam * x - x * x - lam * lam) / (2.0 * (a - 1.0))
                } else {
                    lam * lam * (a + 1.0) / 2.0
                }
            }
            Penalty::Mcp { b } => {
                if x <= b * lam {
                    lam * x - x * x / (2.0 * b)
                } else {
                    b * lam * lam / 2.0
                }
            }
        }
    }

    /// `argmin_β ½(β − v)² + step · p_λ(β)`; ties go to the smaller `|β|`.
    pub fn scalar_prox(&self, v: f64, step: f64) -> f64 {
        let lam = self.lambda;
        let s = step * lam;
        match self.penalty {
            Penalty::None => v,
            Penalty::Ridge => v / (1.0 + 2.0 * step * lam),
            Penalty::L1 => v.signum() * (v.abs() - s).max(0.0),
            Penalty::Scad { a } => {
                let u = v.abs();
                let mut cands = vec![0.0, (u - s).clamp(0.0, lam), lam, a * lam, u.max(a * lam)];
                let curvature = a - 1.0 - step;
                if curvature > 0.0 {
                    cands.push((((a - 1.0) * u - step * a * lam) / curvature).clamp(lam, a * lam));
                }
                v.signum() * self.best_candidate(u, step, &mut cands)
            }
            Penalty::Mcp { b } => {
                let u = v.abs();
                let mut cands = vec![0.0, b * lam, u.max(b * lam)];
                if b > step {
                    cands.push(((u - s) / (1.0 - step / b)).clamp(0.0, b * lam));
                }
                v.signum() * self.best_candidate(u, step, &mut cands)
            }
        }
    }

    fn best_candidate(&self, u: f64, step: f64, cands: &mut [f64]) -> f64 {
        cands.sort_by(|x, y| x.total_cmp(y));
        let objective = |b: f64| 0.5 * (b - u) * (b - u) + step * self.scalar_value(b);
        let mut best = cands[0];
        let mut best_val = objective(best);
        for &c in cands.iter().skip(1) {
            let val = objective(c);
            if val < best_val {
                best = c;
                best_val = val;
            }
        }
        best
    }

    /// Derivative of the concave part `q_λ` (zero for convex kinds).
    pub fn concave_part_derivative(&self, t: f64) -> f64 {
        let lam = self.lambda;
        let x = t.abs();
        let sign = if t > 0.0 {
            1.0
        } else if t < 0.0 {
            -1.0
        } else {
            return 0.0;
        };
        match self.penalty {
            Penalty::Scad { a } => {
                if x <= lam {
                    0.0
                } else if x <= a * lam {
                    sign * ((a * lam - x) / (a - 1.0) - lam)
                } else {
                    -sign * lam
                }
            }
            Penalty::Mcp { b } => {
                if x <= b * lam {
                    -t / b
                } else {
                    -sign * lam
                }
            }
            _ => 0.0,
        }
    }

    fn penalized(&self, len: usize) -> impl Iterator<Item = bool> + '_ {
        let mut next = self.unpenalized.iter().peekable();
        (0..len).map(move |j| {
            if next.peek() == Some(&&j) {
                next.next();
                false
            } else {
                true
            }
        })
    }

    pub fn value(&self, beta: &DVector<f64>) -> f64 {
        beta.iter()
            .zip(self.penalized(beta.len()))
            .filter(|(_, on)| *on)
            .map(|(&t, _)| self.scalar_value(t))
            .sum()
    }

    fn scalar_change(&self, a: f64, b: f64) -> f64 {
        if a == b {
            return 0.0;
        }
        match self.penalty {
            Penalty::Ridge => self.lambda * (b - a) * (b + a),
            Penalty::L1 => self.lambda * (b.abs() - a.abs()),
            _ => self.scalar_value(b) - self.scalar_value(a),
        }
    }

    /// `h(to) − h(from)` summed coordinatewise, accurate when the points are close.
    pub fn value_change(&self, from: &DVector<f64>, to: &DVector<f64>) -> f64 {
        from.iter()
            .zip(to.iter())
            .zip(self.penalized(from.len()))
            .filter(|(_, on)| *on)
            .map(|((&a, &b), _)| self.scalar_change(a, b))
            .sum()
    }

    pub fn prox(&self, v: &DVector<f64>, step: f64) -> DVector<f64> {
        let mut out = v.clone();
        self.prox_in_place(&mut out, step);
        out
    }

    pub fn prox_in_place(&self, v: &mut DVector<f64>, step: f64) {
        if matches!(self.penalty, Penalty::None) {
            return;
        }
        let len = v.len();
        for (x, on) in v.iter_mut().zip(self.penalized(len)) {
            if on {
                *x = self.scalar_prox(*x, step);
            }
        }
    }
}

/// Chain-difference transform `u = D^ext β`: `u_i = β_{i+1} − β_i` for
/// `i < d−1` and `u_{d−1} = β_{d−1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FusedTransform {
    dim: usize,
}

impl FusedTransform {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDimension("fused transform needs d >= 1".into()));
        }
        Ok(Self { dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn forward(&self, beta: &DVector<f64>) -> Result<DVector<f64>> {
        crate::error::check_dims("fused forward", self.dim, beta.len())?;
        let d = self.dim;
        Ok(DVector::from_fn(d, |i, _| if i + 1 < d { beta[i + 1] - beta[i] } else { beta[i] }))
    }

    pub fn inverse(&self, u: &DVector<f64>) -> Result<DVector<f64>> {
        crate::error::check_dims("fused inverse", self.dim, u.len())?;
        let d = self.dim;
        let mut beta = DVector::zeros(d);
        beta[d - 1] = u[d - 1];
        for i in (0..d - 1).rev() {
            beta[i] = beta[i + 1] - u[i];
        }
        Ok(beta)
    }

    /// `X (D^ext)⁻¹`, so that `X β = (X (D^ext)⁻¹) u`.
    pub fn transform_design(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        crate::error::check_dims("fused design", self.dim, x.ncols())?;
        let (n, d) = x.shape();
        let mut out = DMatrix::zeros(n, d);
        let mut running = DVector::zeros(n);
        for j in 0..d {
            running += x.column(j);
            if j + 1 < d {
                out.set_column(j, &(-&running));
            } else {
                out.set_column(j, &running);
            }
        }
        Ok(out)
    }

    /// L1 on the differences, the level coordinate left free.
    pub fn regularizer(&self, lambda: f64) -> Result<Regularizer> {
        Ok(Regularizer::l1(lambda)?.with_unpenalized(vec![self.dim - 1]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_argmin(reg: &Regularizer, v: f64, step: f64, lo: f64, hi: f64, pitch: f64) -> (f64, f64) {
        let steps = ((hi - lo) / pitch).round() as usize;
        let mut best = (f64::INFINITY, 0.0);
        for k in 0..=steps {
            let b = lo + k as f64 * pitch;
            let val = 0.5 * (b - v) * (b - v) + step * reg.scalar_value(b);
            if val < best.0 {
                best = (val, b);
            }
        }
        best
    }

    #[test]
    fn l1_and_ridge_values() {
        let b = DVector::from_vec(vec![1.0, -3.0]);
        assert_eq!(Regularizer::l1(2.0).unwrap().value(&b), 8.0);
        let r = DVector::from_vec(vec![2.0, 0.0]);
        assert_eq!(Regularizer::ridge(0.5).unwrap().value(&r), 2.0);
    }

    #[test]
    fn l1_prox_matches_grid() {
        let reg = Regularizer::l1(1.0).unwrap();
        let v = DVector::from_vec(vec![3.0, -0.5, 0.0]);
        let p = reg.prox(&v, 1.0);
        assert_eq!(p.as_slice(), &[2.0, 0.0, 0.0]);
        for (&vi, &pi) in v.iter().zip(p.iter()) {
            let (_, arg) = grid_argmin(&reg, vi, 1.0, -10.0, 10.0, 1e-4);
            assert!((arg - pi).abs() < 1e-4);
        }
    }

    #[test]
    fn zero_penalty_prox_is_identity() {
        for pen in [Penalty::None, Penalty::Ridge, Penalty::L1, Penalty::Scad { a: 3.7 }, Penalty::Mcp { b: 2.0 }] {
            let reg = Regularizer::new(pen, 0.0).unwrap();
            for v in [-2.5, -0.1, 0.0, 0.7, 4.0] {
                assert_eq!(reg.scalar_prox(v, 0.8), v, "{pen}");
            }
        }
    }

    #[test]
    fn mcp_prox_sweep_matches_grid() {
        let reg = Regularizer::mcp(1.0, 2.0).unwrap();
        let mut v = -4.0;
        while v <= 4.0 {
            let p = reg.scalar_prox(v, 1.0);
            let (best, arg) = grid_argmin(&reg, v, 1.0, -5.0, 5.0, 1e-4);
            let val = 0.5 * (p - v) * (p - v) + reg.scalar_value(p);
            assert!(val <= best + 1e-9, "v={v}");
            assert!((p - arg).abs() < 1e-3, "v={v} prox={p} grid={arg}");
            v += 0.01;
        }
    }

    #[test]
    fn scad_value_matches_quadrature_of_derivative() {
        let (lam, a) = (1.0, 3.7);
        let reg = Regularizer::scad(lam, a).unwrap();
        let deriv = |z: f64| {
            if z <= lam {
                lam
            } else {
                (a * lam - z).max(0.0) / (a - 1.0)
            }
        };
        for k in 0..=60 {
            let t = -6.0 + 0.2 * k as f64;
            // composite Simpson on [0, |t|] with breakpoints at λ and aλ
            let upper = t.abs();
            let mut knots = vec![0.0];
            for bp in [lam, a * lam] {
                if bp < upper {
                    knots.push(bp);
                }
            }
            knots.push(upper);
            let mut total = 0.0;
            for w in knots.windows(2) {
                let (lo, hi) = (w[0], w[1]);
                let m = 2000;
                let h = (hi - lo) / m as f64;
                let mut acc = deriv(lo) + deriv(hi);
                for i in 1..m {
                    acc += deriv(lo + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
                }
                total += acc * h / 3.0;
            }
            assert!((reg.scalar_value(t) - total).abs() < 1e-6, "t={t}");
        }
    }

    #[test]
    fn concave_derivative_cases() {
        let scad = Regularizer::scad(1.5, 3.7).unwrap();
        for t in [-1.5, -0.3, 0.0, 0.9, 1.5] {
            assert_eq!(scad.concave_part_derivative(t), 0.0);
        }
        let mcp = Regularizer::mcp(1.0, 2.0).unwrap();
        assert_eq!(mcp.concave_part_derivative(2.5), -1.0);
        assert_eq!(mcp.concave_part_derivative(-3.0), 1.0);
        assert_eq!(mcp.concave_part_derivative(0.0), 0.0);
        // finite-difference check of p = λ|t| + q
        for t in [2.2, 3.0, 5.0, -4.0] {
            let h = 1e-6;
            let fd = (mcp.scalar_value(t + h) - mcp.scalar_value(t - h)) / (2.0 * h);
            let total = 1.0 * t.signum() + mcp.concave_part_derivative(t);
            assert!((fd - total).abs() < 1e-6);
            assert!(fd.abs() < 1e-6);
        }
    }

    #[test]
    fn descriptors_per_kind() {
        let d = Regularizer::ridge(0.3).unwrap().descriptors();
        assert_eq!((d.strong_convexity, d.zeta_minus, d.zeta_plus, d.smoothness), (0.6, 0.0, 0.0, 0.0));
        let d = Regularizer::l1(0.3).unwrap().descriptors();
        assert_eq!((d.strong_convexity, d.zeta_minus), (0.0, 0.0));
        let d = Regularizer::scad(0.3, 3.7).unwrap().descriptors();
        assert!((d.zeta_minus - 1.0 / 2.7).abs() < 1e-15);
        let d = Regularizer::mcp(0.3, 2.0).unwrap().descriptors();
        assert_eq!(d.zeta_minus, 0.5);
    }

    #[test]
    fn invalid_shape_parameters() {
        assert!(Regularizer::scad(1.0, 2.0).is_err());
        assert!(Regularizer::mcp(1.0, 0.0).is_err());
        assert!(Regularizer::l1(-1.0).is_err());
        assert!(Regularizer::l1(f64::NAN).is_err());
    }

    #[test]
    fn unpenalized_coordinates_pass_through() {
        let reg = Regularizer::l1(1.0).unwrap().with_unpenalized(vec![2]);
        let v = DVector::from_vec(vec![0.5, -2.0, 0.5]);
        assert_eq!(reg.prox(&v, 1.0).as_slice(), &[0.0, -1.0, 0.5]);
        assert_eq!(reg.value(&v), 2.5);
    }

    #[test]
    fn fused_transform_examples() {
        let f = FusedTransform::new(3).unwrap();
        let beta = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let u = f.forward(&beta).unwrap();
        assert_eq!(u.as_slice(), &[1.0, 1.0, 3.0]);
        assert_eq!(f.inverse(&u).unwrap(), beta);
        assert!(FusedTransform::new(0).is_err());
    }

    #[test]
    fn fused_design_reproduces_products() {
        use crate::rng::{gaussian_matrix, gaussian_vector, seeded};
        let mut rng = seeded(4);
        let x = gaussian_matrix(7, 5, &mut rng);
        let beta = gaussian_vector(5, &mut rng);
        let f = FusedTransform::new(5).unwrap();
        let xu = f.transform_design(&x).unwrap();
        let lhs = &x * &beta;
        let rhs = &xu * f.forward(&beta).unwrap();
        assert!((lhs - rhs).amax() < 1e-12);
        let reg = f.regularizer(0.7).unwrap();
        let tv: f64 = (0..4).map(|i| (beta[i + 1] - beta[i]).abs()).sum::<f64>() * 0.7;
        assert!((reg.value(&f.forward(&beta).unwrap()) - tv).abs() < 1e-12);
    }
}
