//! Quadrature building blocks: Gauss–Hermite rules (Golub–Welsch), an
//! adaptive Gauss–Kronrod 7/15 integrator, compensated (Neumaier) summation
//! for scalars and matrices, and deterministic unit-sphere direction sets.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_distr::Distribution;

use crate::spectral::CMatrix;
use crate::{Error, Result};

/// Nodes and weights of the `order`-point Gauss–Hermite rule for the weight
/// `exp(-x^2)` on the real line: `integral = sum_i w_i f(x_i)`; the weights
/// sum to `sqrt(pi)`. Nodes are ascending and symmetric about zero.
pub fn gauss_hermite(order: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if order == 0 || order > 512 {
        return Err(Error::ShapeMismatch {
            context: format!("Gauss-Hermite order {order} outside 1..=512"),
        });
    }
    // Golub-Welsch: eigenvalues of the Jacobi matrix are the nodes; the
    // squared first eigenvector components give the weights.
    let mut jacobi = DMatrix::<f64>::zeros(order, order);
    for k in 1..order {
        let beta = (k as f64 / 2.0).sqrt();
        jacobi[(k - 1, k)] = beta;
        jacobi[(k, k - 1)] = beta;
    }
    let eig = nalgebra::SymmetricEigen::try_new(jacobi, f64::EPSILON, 100_000)
        .ok_or(Error::ConvergenceFailure { order })?;
    let mut idx: Vec<usize> = (0..order).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let sqrt_pi = std::f64::consts::PI.sqrt();
    let nodes: Vec<f64> = idx.iter().map(|&j| eig.eigenvalues[j]).collect();
    let weights: Vec<f64> = idx
        .iter()
        .map(|&j| {
            let v0 = eig.eigenvectors[(0, j)];
            sqrt_pi * v0 * v0
        })
        .collect();
    Ok((nodes, weights))
}

/// Gauss-Kronrod 7/15 nodes on [-1, 1] (positive half; the rule is symmetric).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_46,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_225,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_94,
    0.417_959_183_673_469_4,
];

/// One Gauss-Kronrod 7/15 panel on [a, b]: returns (K15 value, |K15 - G7|).
fn gk15_panel(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut resk = WGK[7] * fc;
    let mut resg = WG[3] * fc;
    for j in 0..3 {
        // Gauss nodes sit at the odd Kronrod positions.
        let x = XGK[2 * j + 1];
        let f1 = f(center - half * x);
        let f2 = f(center + half * x);
        resg += WG[j] * (f1 + f2);
        resk += WGK[2 * j + 1] * (f1 + f2);
    }
    for j in 0..4 {
        let x = XGK[2 * j];
        let f1 = f(center - half * x);
        let f2 = f(center + half * x);
        resk += WGK[2 * j] * (f1 + f2);
    }
    (resk * half, (resk - resg).abs() * half)
}

/// Hard cap on the number of adaptive panels.
pub const MAX_PANELS: usize = 1 << 15;

/// Adaptive Gauss-Kronrod integration of `f` over [a, b] to absolute
/// tolerance `abs_tol`. Returns the integral and an error estimate. Panels
/// are bisected left-to-right with a deterministic schedule; when the panel
/// budget is exhausted the current best values are accumulated and reflected
/// in the returned error estimate.
pub fn adaptive_gk(f: &dyn Fn(f64) -> f64, a: f64, b: f64, abs_tol: f64) -> (f64, f64) {
    let mut panels_used = 0usize;
    let mut value = NeumaierSum::new();
    let mut err_total = 0.0;
    adaptive_rec(f, a, b, abs_tol, 0, &mut panels_used, &mut value, &mut err_total);
    (value.value(), err_total)
}

#[allow(clippy::too_many_arguments)]
fn adaptive_rec(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    tol: f64,
    depth: usize,
    panels_used: &mut usize,
    value: &mut NeumaierSum,
    err_total: &mut f64,
) {
    let (v, e) = gk15_panel(f, a, b);
    *panels_used += 1;
    if e <= tol || depth >= 48 || *panels_used >= MAX_PANELS {
        value.add(v);
        *err_total += e;
        return;
    }
    let mid = 0.5 * (a + b);
    adaptive_rec(f, a, mid, tol / 2.0, depth + 1, panels_used, value, err_total);
    adaptive_rec(f, mid, b, tol / 2.0, depth + 1, panels_used, value, err_total);
}

/// Neumaier-compensated scalar accumulator; the summation order fully
/// determines the result bit-for-bit.
#[derive(Debug, Clone, Default)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Entrywise-compensated accumulator for complex matrices.
#[derive(Debug, Clone)]
pub struct MatrixSum {
    re: Vec<NeumaierSum>,
    im: Vec<NeumaierSum>,
    nrows: usize,
    ncols: usize,
}

impl MatrixSum {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            re: vec![NeumaierSum::new(); nrows * ncols],
            im: vec![NeumaierSum::new(); nrows * ncols],
            nrows,
            ncols,
        }
    }

    /// Add `scale * m`.
    pub fn add_scaled(&mut self, m: &CMatrix, scale: f64) {
        debug_assert_eq!((m.nrows(), m.ncols()), (self.nrows, self.ncols));
        for (k, z) in m.iter().enumerate() {
            self.re[k].add(scale * z.re);
            self.im[k].add(scale * z.im);
        }
    }

    pub fn value(&self) -> CMatrix {
        CMatrix::from_iterator(
            self.nrows,
            self.ncols,
            self.re
                .iter()
                .zip(&self.im)
                .map(|(r, i)| Complex64::new(r.value(), i.value())),
        )
    }
}

/// Deterministic unit directions on the sphere `S^{dim-1}` in `R^dim`.
///
/// * `dim = 1`: the two points {+1, -1} (`n` is ignored — exhaustive);
/// * `dim = 2`: `n` uniformly spaced angles;
/// * `dim = 3`: an `n`-point Fibonacci lattice;
/// * `dim >= 4`: `n` seeded quasi-random Gaussian directions.
///
/// Every returned vector has unit Euclidean norm; the set is identical from
/// run to run.
pub fn unit_directions(dim: usize, n: usize) -> Result<Vec<DVector<f64>>> {
    if dim == 0 {
        return Err(Error::ShapeMismatch {
            context: "direction sphere needs dimension >= 1".to_string(),
        });
    }
    let n = n.max(1);
    let dirs = match dim {
        1 => vec![
            DVector::from_element(1, 1.0),
            DVector::from_element(1, -1.0),
        ],
        2 => (0..n)
            .map(|k| {
                let theta = 2.0 * std::f64::consts::PI * (k as f64) / (n as f64);
                DVector::from_vec(vec![theta.cos(), theta.sin()])
            })
            .collect(),
        3 => {
            // Fibonacci lattice: near-uniform, fully deterministic.
            let golden = (1.0 + 5.0_f64.sqrt()) / 2.0;
            (0..n)
                .map(|k| {
                    let z = 1.0 - (2.0 * k as f64 + 1.0) / (n as f64);
                    let r = (1.0 - z * z).max(0.0).sqrt();
                    let phi = 2.0 * std::f64::consts::PI * (k as f64) / golden;
                    DVector::from_vec(vec![r * phi.cos(), r * phi.sin(), z])
                })
                .collect()
        }
        _ => {
            let seed = 0x6773_6276_5f64_6972 ^ ((dim as u64) << 32) ^ n as u64;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let normal = rand_distr::StandardNormal;
            let mut out = Vec::with_capacity(n);
            while out.len() < n {
                let v = DVector::from_fn(dim, |_, _| -> f64 { normal.sample(&mut rng) });
                let norm = v.norm();
                if norm > 1e-6 {
                    out.push(v / norm);
                }
            }
            out
        }
    };
    Ok(dirs)
}
