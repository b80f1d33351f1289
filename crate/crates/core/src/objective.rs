//! The CP least-squares objective f(x) = 1/2 ||X - [[A...]]||_F^2 and its
//! gradient over flattened factor matrices, evaluated in expanded form so
//! the reconstruction is never materialized.

use ndarray::Array2;

use crate::error::{CpdError, Result};
use crate::kruskal::FlatPoint;
use crate::tensor::{mttkrp, DenseTensor};

/// Per-problem evaluation context: the data tensor, its cached squared
/// norm, and monotone evaluation counters.
#[derive(Debug)]
pub struct ObjectiveWorkspace<'a> {
    tensor: &'a DenseTensor,
    norm_x_sq: f64,
    fevals: u64,
    gevals: u64,
}

impl<'a> ObjectiveWorkspace<'a> {
    pub fn new(tensor: &'a DenseTensor) -> Self {
        let norm = tensor.frobenius_norm();
        Self {
            tensor,
            norm_x_sq: norm * norm,
            fevals: 0,
            gevals: 0,
        }
    }

    pub fn tensor(&self) -> &DenseTensor {
        self.tensor
    }

    pub fn norm_x_sq(&self) -> f64 {
        self.norm_x_sq
    }

    pub fn fevals(&self) -> u64 {
        self.fevals
    }

    pub fn gevals(&self) -> u64 {
        self.gevals
    }

    pub(crate) fn note_feval(&mut self) {
        self.fevals += 1;
    }

    pub(crate) fn note_geval(&mut self) {
        self.gevals += 1;
    }

    fn check_point(&self, p: &FlatPoint) -> Result<()> {
        if p.dims() != self.tensor.dims() {
            return Err(CpdError::ShapeMismatch(format!(
                "point dims {:?} do not match tensor dims {:?}",
                p.dims(),
                self.tensor.dims()
            )));
        }
        Ok(())
    }

    /// f(p) = 1/2 ||X - [[A...]]||^2 via the expanded inner-product form.
    pub fn objective(&mut self, p: &FlatPoint) -> Result<f64> {
        self.check_point(p)?;
        self.fevals += 1;
        let model = p.unflatten();
        let factors = model.factors();
        let grams = gram_matrices(factors);
        let last = factors.len() - 1;
        let m_last = mttkrp(self.tensor, factors, last)?;
        Ok(objective_from_parts(
            self.norm_x_sq,
            &m_last,
            &factors[last],
            &grams,
        ))
    }

    /// Gradient blocks G(n) = -mttkrp(X, A, n) + A(n) Gamma(n).
    pub fn gradient(&mut self, p: &FlatPoint) -> Result<FlatPoint> {
        self.check_point(p)?;
        self.gevals += 1;
        let model = p.unflatten();
        let factors = model.factors();
        let grams = gram_matrices(factors);
        let mut blocks = Vec::with_capacity(factors.len());
        for n in 0..factors.len() {
            let m = mttkrp(self.tensor, factors, n)?;
            let g = &factors[n].dot(&gamma(&grams, n)) - &m;
            blocks.push(g);
        }
        Ok(FlatPoint::from_factors(&blocks))
    }

    /// Combined evaluation sharing one MTTKRP per mode: the mode-(N-1)
    /// product feeds both the gradient block and the objective value.
    pub fn objective_and_gradient(&mut self, p: &FlatPoint) -> Result<(f64, FlatPoint)> {
        self.check_point(p)?;
        self.fevals += 1;
        self.gevals += 1;
        let model = p.unflatten();
        let factors = model.factors();
        let grams = gram_matrices(factors);
        let last = factors.len() - 1;
        let mut blocks = Vec::with_capacity(factors.len());
        let mut f = 0.0;
        for n in 0..factors.len() {
            let m = mttkrp(self.tensor, factors, n)?;
            if n == last {
                f = objective_from_parts(self.norm_x_sq, &m, &factors[last], &grams);
            }
            let g = &factors[n].dot(&gamma(&grams, n)) - &m;
            blocks.push(g);
        }
        Ok((f, FlatPoint::from_factors(&blocks)))
    }
}

/// Gram matrices Upsilon(n) = A(n)^T A(n), symmetrized exactly.
pub fn gram_matrices(factors: &[Array2<f64>]) -> Vec<Array2<f64>> {
    factors
        .iter()
        .map(|f| {
            let rank = f.ncols();
            let mut g = Array2::<f64>::zeros((rank, rank));
            for r in 0..rank {
                for s in 0..=r {
                    let v = f.column(r).dot(&f.column(s));
                    g[[r, s]] = v;
                    g[[s, r]] = v;
                }
            }
            g
        })
        .collect()
}

/// Gamma(n): elementwise product of all Gram matrices except mode n.
/// With a single mode the empty product is the all-ones matrix.
pub fn gamma(grams: &[Array2<f64>], mode: usize) -> Array2<f64> {
    assert!(mode < grams.len(), "mode {mode} out of range");
    let rank = grams[0].nrows();
    let mut out = Array2::<f64>::ones((rank, rank));
    for (n, g) in grams.iter().enumerate() {
        if n != mode {
            out = &out * g;
        }
    }
    out
}

/// Objective from sweep byproducts: the mode-n MTTKRP of the current
/// factors, that factor itself, and all Gram matrices.
pub(crate) fn objective_from_parts(
    norm_x_sq: f64,
    m_last: &Array2<f64>,
    a_last: &Array2<f64>,
    grams: &[Array2<f64>],
) -> f64 {
    let inner = (m_last * a_last).sum();
    let last = grams.len() - 1;
    let model_norm_sq = (gamma(grams, last) * &grams[last]).sum();
    let f = 0.5 * (norm_x_sq - 2.0 * inner + model_norm_sq);
    f.max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kruskal::KruskalModel;
    use ndarray::{array, Array1};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn random_model(dims: &[usize], rank: usize, seed: u64) -> KruskalModel {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let factors = dims
            .iter()
            .map(|&d| {
                let mut f = Array2::<f64>::zeros((d, rank));
                f.mapv_inplace(|_| rng.random::<f64>() - 0.5);
                f
            })
            .collect();
        KruskalModel::from_factors(factors).unwrap()
    }

    fn random_tensor(dims: &[usize], seed: u64) -> DenseTensor {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let len: usize = dims.iter().product();
        let values = (0..len).map(|_| rng.random::<f64>() - 0.5).collect();
        DenseTensor::new(dims.to_vec(), values).unwrap()
    }

    #[test]
    fn gamma_scalar_rank_one() {
        let grams = vec![array![[2.0]], array![[3.0]], array![[5.0]]];
        assert_eq!(gamma(&grams, 0), array![[15.0]]);
        assert_eq!(gamma(&grams, 2), array![[6.0]]);
    }

    #[test]
    fn gamma_identity_factors() {
        let grams = vec![
            array![[7.0, 1.0], [1.0, 7.0]],
            Array2::eye(2),
            Array2::eye(2),
        ];
        assert_eq!(gamma(&grams, 0), Array2::eye(2));
    }

    #[test]
    fn gamma_matches_elementwise_loop() {
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let grams: Vec<Array2<f64>> = (0..4)
            .map(|_| {
                let mut g = Array2::<f64>::zeros((3, 3));
                g.mapv_inplace(|_| rng.random::<f64>());
                let gt = g.t().to_owned();
                g + gt
            })
            .collect();
        for mode in 0..4 {
            let got = gamma(&grams, mode);
            for r in 0..3 {
                for s in 0..3 {
                    let mut expect = 1.0;
                    for (n, g) in grams.iter().enumerate() {
                        if n != mode {
                            expect *= g[[r, s]];
                        }
                    }
                    assert_eq!(got[[r, s]], expect);
                }
            }
        }
    }

    #[test]
    fn objective_zero_point_is_half_norm_sq() {
        let t = random_tensor(&[3, 4, 2], 11);
        let mut ws = ObjectiveWorkspace::new(&t);
        let zero = FlatPoint::new(Array1::zeros(2 * (3 + 4 + 2)), vec![3, 4, 2], 2).unwrap();
        let f = ws.objective(&zero).unwrap();
        assert!((f - 0.5 * ws.norm_x_sq()).abs() < 1e-12 * ws.norm_x_sq().max(1.0));
        assert_eq!(ws.fevals(), 1);
    }

    #[test]
    fn objective_exact_factorization_is_zero() {
        let m = random_model(&[3, 4, 2], 2, 5);
        let t = m.full().unwrap();
        let mut ws = ObjectiveWorkspace::new(&t);
        let f = ws.objective(&m.flatten().unwrap()).unwrap();
        assert!(f <= 1e-12 * ws.norm_x_sq());
    }

    #[test]
    fn objective_matches_materialized_residual() {
        let t = random_tensor(&[3, 4, 5], 21);
        let m = random_model(&[3, 4, 5], 2, 22);
        let mut ws = ObjectiveWorkspace::new(&t);
        let f = ws.objective(&m.flatten().unwrap()).unwrap();
        let full = m.full().unwrap();
        let resid: f64 = t
            .values()
            .iter()
            .zip(full.values())
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        let expect = 0.5 * resid;
        assert!(
            (f - expect).abs() <= 1e-10 * expect.max(1.0),
            "expanded {f} vs materialized {expect}"
        );
    }

    #[test]
    fn gradient_zero_point_is_zero() {
        let t = random_tensor(&[3, 3, 3], 31);
        let mut ws = ObjectiveWorkspace::new(&t);
        let zero = FlatPoint::new(Array1::zeros(2 * 9), vec![3, 3, 3], 2).unwrap();
        let g = ws.gradient(&zero).unwrap();
        assert!(g.values().iter().all(|&v| v == 0.0));
        assert_eq!(ws.gevals(), 1);
    }

    #[test]
    fn gradient_vanishes_at_exact_factorization() {
        let m = random_model(&[4, 3, 2], 2, 41);
        let t = m.full().unwrap();
        let mut ws = ObjectiveWorkspace::new(&t);
        let g = ws.gradient(&m.flatten().unwrap()).unwrap();
        let gnorm = g.values().dot(g.values()).sqrt();
        assert!(gnorm <= 1e-10 * t.frobenius_norm().max(1.0));
    }

    #[test]
    fn gradient_matches_central_differences() {
        for seed in 0..5 {
            let t = random_tensor(&[4, 4, 4], 100 + seed);
            let m = random_model(&[4, 4, 4], 2, 200 + seed);
            let mut ws = ObjectiveWorkspace::new(&t);
            let p = m.flatten().unwrap();
            let g = ws.gradient(&p).unwrap();
            let x = p.values().clone();
            for i in 0..x.len() {
                let h = 1e-6 * x[i].abs().max(1.0);
                let mut xp = x.clone();
                xp[i] += h;
                let mut xm = x.clone();
                xm[i] -= h;
                let fp = ws
                    .objective(&FlatPoint::new(xp, vec![4, 4, 4], 2).unwrap())
                    .unwrap();
                let fm = ws
                    .objective(&FlatPoint::new(xm, vec![4, 4, 4], 2).unwrap())
                    .unwrap();
                let fd = (fp - fm) / (2.0 * h);
                let err = (g.values()[i] - fd).abs() / fd.abs().max(1.0);
                assert!(
                    err < 1e-6,
                    "seed {seed} component {i}: grad {} vs fd {fd}",
                    g.values()[i]
                );
            }
        }
    }

    #[test]
    fn combined_matches_separate_calls() {
        let t = random_tensor(&[3, 4, 2], 51);
        let m = random_model(&[3, 4, 2], 3, 52);
        let p = m.flatten().unwrap();
        let mut ws = ObjectiveWorkspace::new(&t);
        let (f, g) = ws.objective_and_gradient(&p).unwrap();
        let f2 = ws.objective(&p).unwrap();
        let g2 = ws.gradient(&p).unwrap();
        assert_eq!(f, f2);
        assert_eq!(g.values(), g2.values());
        assert_eq!(ws.fevals(), 2);
        assert_eq!(ws.gevals(), 2);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let t = random_tensor(&[3, 3], 61);
        let mut ws = ObjectiveWorkspace::new(&t);
        let p = FlatPoint::new(Array1::zeros(8), vec![2, 2], 2).unwrap();
        assert!(ws.objective(&p).is_err());
    }
}
