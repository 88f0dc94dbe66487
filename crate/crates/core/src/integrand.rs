//! Power-law energy densities `w·|ξ|^p/p` and their conjugates.

use crate::error::{Error, Result};
use crate::geometry::Rect;
use crate::mesh::GridMesh;

/// Cell weights of a density.
#[derive(Debug, Clone, PartialEq)]
pub enum Weight {
    Constant(f64),
    PerCell(Vec<f64>),
}

impl Weight {
    fn at(&self, cell: usize) -> f64 {
        match self {
            Weight::Constant(w) => *w,
            Weight::PerCell(v) => v[cell],
        }
    }

    fn range(&self) -> (f64, f64) {
        match self {
            Weight::Constant(w) => (*w, *w),
            Weight::PerCell(v) => v
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &w| (lo.min(w), hi.max(w))),
        }
    }

    fn map(&self, f: impl Fn(f64) -> f64) -> Weight {
        match self {
            Weight::Constant(w) => Weight::Constant(f(*w)),
            Weight::PerCell(v) => Weight::PerCell(v.iter().map(|&w| f(w)).collect()),
        }
    }
}

/// Constants of the two-sided growth bound
/// `alpha·|ξ|^p − lower_slack ≤ f(ξ) ≤ beta·|ξ|^p + gamma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Growth {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    /// Zero except for regularized densities with `p < 2`, which are
    /// quadratic near the origin.
    pub lower_slack: f64,
}

/// `f(x, ξ) = w(x)·((|ξ|² + ε²)^{p/2} − ε^p)/p`.
#[derive(Debug, Clone, PartialEq)]
pub struct Integrand {
    p: f64,
    epsilon: f64,
    weight: Weight,
}

impl Integrand {
    /// Unweighted, unregularized `|ξ|^p/p`.
    pub fn power(p: f64) -> Result<Self> {
        if !(p > 1.0 && p.is_finite()) {
            return Err(Error::InvalidExponent(p));
        }
        Ok(Self {
            p,
            epsilon: 0.0,
            weight: Weight::Constant(1.0),
        })
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Result<Self> {
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(Error::Config(format!("regularization {epsilon} must be nonnegative")));
        }
        self.epsilon = epsilon;
        Ok(self)
    }

    pub fn with_weight(mut self, weight: Weight) -> Result<Self> {
        let (lo, hi) = weight.range();
        if !(lo > 0.0 && hi.is_finite()) {
            return Err(Error::Config("weights must be positive and finite".into()));
        }
        self.weight = weight;
        Ok(self)
    }

    /// Weight `default` everywhere except inside the listed rectangles; a
    /// triangle takes the value of the first rectangle containing its
    /// centroid.
    pub fn with_region_weights(self, mesh: &GridMesh, default: f64, regions: &[(Rect, f64)]) -> Result<Self> {
        let grid = mesh.grid();
        let w = mesh
            .cells()
            .iter()
            .map(|c| {
                let p = c.nodes.map(|n| grid.node_pos(n));
                let centroid = [(p[0][0] + p[1][0] + p[2][0]) / 3.0, (p[0][1] + p[1][1] + p[2][1]) / 3.0];
                regions
                    .iter()
                    .find(|(r, _)| r.contains(centroid))
                    .map_or(default, |&(_, w)| w)
            })
            .collect();
        self.with_weight(Weight::PerCell(w))
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn weight_of(&self) -> &Weight {
        &self.weight
    }

    pub fn weight(&self, cell: usize) -> f64 {
        self.weight.at(cell)
    }

    pub fn eval(&self, cell: usize, xi: [f64; 2]) -> f64 {
        self.weight(cell) * power_density(self.p, self.epsilon, xi[0] * xi[0] + xi[1] * xi[1])
    }

    pub fn grad(&self, cell: usize, xi: [f64; 2]) -> Result<[f64; 2]> {
        let s = xi[0] * xi[0] + xi[1] * xi[1] + self.epsilon * self.epsilon;
        if s == 0.0 {
            return if self.p >= 2.0 {
                Ok([0.0, 0.0])
            } else {
                Err(Error::Singular)
            };
        }
        let k = self.weight(cell) * s.powf(0.5 * (self.p - 2.0));
        Ok([k * xi[0], k * xi[1]])
    }

    pub fn growth(&self) -> Growth {
        let (lo, hi) = self.weight.range();
        let (p, e) = (self.p, self.epsilon);
        if p >= 2.0 {
            let c = 2f64.powf(0.5 * p - 1.0);
            Growth {
                alpha: lo / p,
                beta: hi * c / p,
                gamma: hi * (c - 1.0) * e.powf(p) / p,
                lower_slack: 0.0,
            }
        } else {
            Growth {
                alpha: lo / p,
                beta: hi / p,
                gamma: 0.0,
                lower_slack: hi * e.powf(p) / p,
            }
        }
    }

    /// Legendre transform; only for unregularized densities.
    pub fn conjugate(&self) -> Result<ConjugateIntegrand> {
        if self.epsilon != 0.0 {
            return Err(Error::UnsupportedConjugate);
        }
        Ok(ConjugateIntegrand {
            q: self.p / (self.p - 1.0),
            p: self.p,
            weight: self.weight.clone(),
        })
    }
}

/// `((s + ε²)^{p/2} − ε^p)/p` with `s = |ξ|²`.
pub(crate) fn power_density(p: f64, epsilon: f64, s: f64) -> f64 {
    if epsilon == 0.0 {
        return s.powf(0.5 * p) / p;
    }
    let e2 = epsilon * epsilon;
    if p == 2.0 {
        return 0.5 * s;
    }
    // (1 + s/ε²)^{p/2} − 1 loses accuracy for tiny s; expm1/ln_1p keep it.
    e2.powf(0.5 * p) * (0.5 * p * (s / e2).ln_1p()).exp_m1() / p
}

/// `f*(x, ζ) = w^{1−q}·|ζ|^q/q` with `q = p/(p−1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConjugateIntegrand {
    q: f64,
    p: f64,
    weight: Weight,
}

impl ConjugateIntegrand {
    pub fn q(&self) -> f64 {
        self.q
    }

    /// Exponent of the density this is the conjugate of.
    pub fn p(&self) -> f64 {
        self.p
    }

    fn scale(&self, cell: usize) -> f64 {
        self.weight.at(cell).powf(1.0 - self.q)
    }

    pub fn eval(&self, cell: usize, zeta: [f64; 2]) -> f64 {
        self.scale(cell) * (zeta[0] * zeta[0] + zeta[1] * zeta[1]).powf(0.5 * self.q) / self.q
    }

    pub fn grad(&self, cell: usize, zeta: [f64; 2]) -> Result<[f64; 2]> {
        let s = zeta[0] * zeta[0] + zeta[1] * zeta[1];
        if s == 0.0 {
            return Err(Error::Singular);
        }
        let k = self.scale(cell) * s.powf(0.5 * (self.q - 2.0));
        Ok([k * zeta[0], k * zeta[1]])
    }

    /// The conjugate seen as a power density of exponent `q`, optionally
    /// regularized, for use by the solvers.
    pub fn as_power_density(&self, epsilon: f64) -> Integrand {
        Integrand {
            p: self.q,
            epsilon,
            weight: self.weight.map(|w| w.powf(1.0 - self.q)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn quadratic_case() {
        let f = Integrand::power(2.0).unwrap();
        assert_eq!(f.eval(0, [3.0, 4.0]), 12.5);
        assert_eq!(f.grad(0, [3.0, -1.5]).unwrap(), [3.0, -1.5]);
        let fs = f.conjugate().unwrap();
        assert_eq!(fs.q(), 2.0);
        assert_eq!(fs.eval(0, [3.0, 4.0]), 12.5);
    }

    #[test]
    fn cubic_and_quartic_cases() {
        let f = Integrand::power(3.0).unwrap();
        assert_eq!(f.eval(0, [0.0, 0.0]), 0.0);
        let g = f.clone().with_epsilon(0.1).unwrap();
        let oracle = (1.01f64.powf(1.5) - 1e-3) / 3.0;
        assert!((g.eval(0, [1.0, 0.0]) - oracle).abs() < 1e-15);
        let fs = f.conjugate().unwrap();
        assert_eq!(fs.q(), 1.5);
        assert!((fs.eval(0, [4.0, 0.0]) - 2.0 / 3.0 * 8.0).abs() < 1e-14);
        assert_eq!(Integrand::power(4.0).unwrap().grad(0, [1.0, 0.0]).unwrap(), [1.0, 0.0]);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(Integrand::power(1.0), Err(Error::InvalidExponent(_))));
        let f = Integrand::power(1.5).unwrap();
        assert!(matches!(f.grad(0, [0.0, 0.0]), Err(Error::Singular)));
        let g = f.with_epsilon(0.1).unwrap();
        assert!(matches!(g.conjugate(), Err(Error::UnsupportedConjugate)));
    }

    #[test]
    fn small_gradients_keep_relative_accuracy() {
        let f = Integrand::power(3.0).unwrap().with_epsilon(1e-3).unwrap();
        let xi = [1e-9, 0.0];
        // Quadratic regime: ε^{p−2}|ξ|²/2.
        let expected = 1e-3 * 1e-18 / 2.0;
        assert!((f.eval(0, xi) / expected - 1.0).abs() < 1e-6);
    }

    fn arb_xi() -> impl Strategy<Value = [f64; 2]> {
        (-50.0..50.0f64, -50.0..50.0f64).prop_map(|(a, b)| [a, b])
    }

    proptest! {
        #[test]
        fn gradient_matches_finite_differences(
            p in 1.2..5.0f64, eps in prop_oneof![Just(0.0), 1e-3..1.0f64],
            w in 0.2..5.0f64, xi in arb_xi(),
        ) {
            prop_assume!(xi[0].hypot(xi[1]) > 1e-2);
            let f = Integrand::power(p).unwrap().with_epsilon(eps).unwrap()
                .with_weight(Weight::Constant(w)).unwrap();
            let g = f.grad(0, xi).unwrap();
            for d in 0..2 {
                let h = 1e-6 * (1.0 + xi[d].abs());
                let mut a = xi; a[d] += h;
                let mut b = xi; b[d] -= h;
                let fd = (f.eval(0, a) - f.eval(0, b)) / (2.0 * h);
                let scale = g[0].abs().max(g[1].abs()).max(1e-8);
                prop_assert!((fd - g[d]).abs() <= 1e-6 * scale, "{} vs {}", fd, g[d]);
            }
        }

        #[test]
        fn fenchel_young(p in 1.2..5.0f64, w in 0.2..5.0f64, xi in arb_xi(), zeta in arb_xi()) {
            let f = Integrand::power(p).unwrap().with_weight(Weight::Constant(w)).unwrap();
            let fs = f.conjugate().unwrap();
            let gap = f.eval(0, xi) + fs.eval(0, zeta) - (xi[0] * zeta[0] + xi[1] * zeta[1]);
            let scale = f.eval(0, xi) + fs.eval(0, zeta);
            prop_assert!(gap >= -1e-12 * (1.0 + scale));
            prop_assume!(xi[0].hypot(xi[1]) > 1e-3);
            let s = f.grad(0, xi).unwrap();
            let eq = f.eval(0, xi) + fs.eval(0, s) - (xi[0] * s[0] + xi[1] * s[1]);
            let scale = f.eval(0, xi) + fs.eval(0, s);
            prop_assert!(eq.abs() <= 1e-10 * (1.0 + scale), "{}", eq);
        }
    }

    #[test]
    fn growth_bounds_hold_on_samples() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for (p, eps) in [(1.5, 0.0), (1.5, 0.1), (2.0, 0.0), (3.0, 0.1), (4.0, 0.5)] {
            let weights: Vec<f64> = (0..8).map(|k| 0.5 + k as f64 * 0.25).collect();
            let f = Integrand::power(p)
                .unwrap()
                .with_epsilon(eps)
                .unwrap()
                .with_weight(Weight::PerCell(weights))
                .unwrap();
            let g = f.growth();
            for _ in 0..10_000 {
                let r: f64 = 1e3 * rng.random::<f64>().powi(3);
                let th: f64 = rng.random::<f64>() * std::f64::consts::TAU;
                let xi = [r * th.cos(), r * th.sin()];
                let cell = rng.random_range(0..8);
                let v = f.eval(cell, xi);
                let rp = r.powf(p);
                assert!(g.alpha * rp - g.lower_slack <= v * (1.0 + 1e-12) + 1e-300, "p={p} r={r}");
                assert!(v <= (g.beta * rp + g.gamma) * (1.0 + 1e-12) + 1e-300, "p={p} r={r}");
            }
        }
    }
}
