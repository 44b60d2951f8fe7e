//! The localized summability kernel Φ̃_{n,q} and the manifold estimator
//! Φ̃-weighted sample average F̂_{n,α}.
//!
//! The kernel is a cutoff-weighted sum of projection components
//!
//! ```text
//! Φ̃_{n,q}(x) = Σ_{m=0}^{⌊n²/2⌋} H(√(2m)/n) · P_{m,q}(x),
//! ```
//!
//! where each P_{m,q} expands into even-index weighted Hermite functions
//! ψ_{2ℓ}. Exchanging the two finite sums stores Φ̃ as a single coefficient
//! list on ψ_{2ℓ}, so evaluating the kernel at a point costs one Hermite
//! recurrence pass of length 2⌊n²/2⌋ instead of quadratic work. The exchange
//! is an exact identity, enforced against the naive double sum by tests.
//!
//! All coefficient arithmetic runs on multiplicative recurrences
//! (√((2ℓ)!)/(2^ℓ ℓ!) via ratios √((2ℓ−1)/(2ℓ)), Gamma ratios by repeated
//! multiplication); no factorial or Gamma function is ever evaluated, which
//! keeps every intermediate finite up to Hermite degree 100 and beyond.

use crate::error::{Error, Result};
use crate::hermite::{cutoff, hermite_sequence};

/// Parameters of the kernel and estimator: degree `n`, localization exponent
/// `alpha` ∈ (0, 1], and manifold dimension `q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    n: u32,
    alpha: f64,
    q: u32,
}

impl KernelParams {
    pub fn new(n: u32, alpha: f64, q: u32) -> Result<Self> {
        if n < 1 {
            return Err(Error::InvalidInput("kernel degree n must be ≥ 1".into()));
        }
        if !(alpha > 0.0 && alpha <= 1.0) || !alpha.is_finite() {
            return Err(Error::InvalidInput(format!(
                "alpha must lie in (0, 1], got {alpha}"
            )));
        }
        if q < 1 {
            return Err(Error::InvalidInput(
                "manifold dimension q must be ≥ 1".into(),
            ));
        }
        Ok(KernelParams { n, alpha, q })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn q(&self) -> u32 {
        self.q
    }
}

/// One observed sample: a point in ℝ^d and the (noisy) value seen there.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub point: Vec<f64>,
    pub value: f64,
}

impl LabeledSample {
    pub fn new(point: Vec<f64>, value: f64) -> Result<Self> {
        if point.is_empty() {
            return Err(Error::InvalidInput("sample point must be non-empty".into()));
        }
        if !point.iter().all(|v| v.is_finite()) || !value.is_finite() {
            return Err(Error::InvalidInput(
                "sample coordinates and value must be finite".into(),
            ));
        }
        Ok(LabeledSample { point, value })
    }
}

/// Coefficients `w_ℓ` of the projection component
/// P_{m,q}(x) = Σ_ℓ w_ℓ ψ_{2ℓ}(x), returned as (ℓ, w_ℓ) pairs.
///
/// For q = 1 the component is the single term ℓ = m; for q ≥ 2 it spans
/// ℓ = 0..m. The two branches are dispatched strictly on q (the q ≥ 2
/// formula is undefined at q = 1, where Γ((q−1)/2) diverges).
pub fn projection_weights(m: usize, q: u32) -> Vec<(usize, f64)> {
    assert!(q >= 1, "manifold dimension q must be ≥ 1");
    let c = sqrt_factorial_ratios(m);
    if q == 1 {
        let w = std::f64::consts::PI.powf(-0.25) * parity_sign(m) * c[m];
        return vec![(m, w)];
    }
    let beta = (q as f64 - 1.0) / 2.0;
    let prefactor = std::f64::consts::PI.powf(-(2.0 * q as f64 - 1.0) / 4.0);
    let g = gamma_ratios(beta, m);
    (0..=m)
        .map(|l| (l, parity_sign(l) * prefactor * g[m - l] * c[l]))
        .collect()
}

/// c_ℓ = √((2ℓ)!)/(2^ℓ ℓ!) for ℓ = 0..=l_max, via c_ℓ/c_{ℓ−1} = √((2ℓ−1)/(2ℓ)).
fn sqrt_factorial_ratios(l_max: usize) -> Vec<f64> {
    let mut c = Vec::with_capacity(l_max + 1);
    c.push(1.0);
    for l in 1..=l_max {
        let lf = l as f64;
        c.push(c[l - 1] * ((2.0 * lf - 1.0) / (2.0 * lf)).sqrt());
    }
    c
}

/// (−1)^k.
fn parity_sign(k: usize) -> f64 {
    if k.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// g_j = Γ(β + j)/(j! Γ(β)) for j = 0..=j_max, via g_j/g_{j−1} = (β + j − 1)/j.
fn gamma_ratios(beta: f64, j_max: usize) -> Vec<f64> {
    let mut g = Vec::with_capacity(j_max + 1);
    g.push(1.0);
    for j in 1..=j_max {
        let jf = j as f64;
        g.push(g[j - 1] * (beta + jf - 1.0) / jf);
    }
    g
}

/// Precomputed representation of Φ̃_{n,q} as coefficients on ψ_{2ℓ},
/// ℓ = 0..=⌊n²/2⌋. Depends only on (n, q); immutable after construction and
/// safe for unlimited concurrent readers.
#[derive(Debug, Clone)]
pub struct KernelTable {
    params: KernelParams,
    coefficients: Vec<f64>,
}

impl KernelTable {
    /// Builds the table by exchanging the (m, ℓ) summation order:
    /// a_ℓ = Σ_{m ≥ ℓ} H(√(2m)/n) · w_ℓ(m, q).
    pub fn build(params: KernelParams) -> KernelTable {
        let n = params.n;
        let l_max = (n as usize * n as usize) / 2;
        let nf = n as f64;
        let h: Vec<f64> = (0..=l_max)
            .map(|m| cutoff((2.0 * m as f64).sqrt() / nf).expect("cutoff argument is ≥ 0"))
            .collect();
        let c = sqrt_factorial_ratios(l_max);

        let mut coefficients = vec![0.0; l_max + 1];
        if params.q == 1 {
            let p = std::f64::consts::PI.powf(-0.25);
            for (l, coeff) in coefficients.iter_mut().enumerate() {
                *coeff = h[l] * p * parity_sign(l) * c[l];
            }
        } else {
            let beta = (params.q as f64 - 1.0) / 2.0;
            let prefactor = std::f64::consts::PI.powf(-(2.0 * params.q as f64 - 1.0) / 4.0);
            let g = gamma_ratios(beta, l_max);
            for (l, coeff) in coefficients.iter_mut().enumerate() {
                let mut sum = 0.0;
                for (j, gj) in g[..=(l_max - l)].iter().enumerate() {
                    sum += h[l + j] * gj;
                }
                *coeff = parity_sign(l) * prefactor * c[l] * sum;
            }
        }
        KernelTable {
            params,
            coefficients,
        }
    }

    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    /// Coefficients a_0..a_L with L = ⌊n²/2⌋.
    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    /// Evaluates Φ̃_{n,q}(x) = Σ_ℓ a_ℓ ψ_{2ℓ}(x).
    ///
    /// The kernel is even; evaluation runs on |x| so that x and −x take the
    /// same arithmetic path bit for bit. Panics on a non-finite argument
    /// (callers validate; [`Estimator::eval`] never passes one).
    pub fn eval(&self, x: f64) -> f64 {
        let x = x.abs();
        let l_max = self.coefficients.len() - 1;
        let h = hermite_sequence(x, 2 * l_max).expect("|x| is finite");
        let weight = (-x * x / 2.0).exp();
        let mut sum = 0.0;
        for (l, a) in self.coefficients.iter().enumerate() {
            sum += a * h[2 * l];
        }
        sum * weight
    }
}

/// Reusable evaluator for F̂_{n,α}(Y; ·) over a fixed sample set.
///
/// Holds the kernel table, validated samples, and the scale factors
/// n^{1−α} (distance magnification) and n^{q(1−α)}/M′ (normalization).
/// Pure and reentrant: one estimator may serve many threads.
pub struct Estimator<'a> {
    table: KernelTable,
    samples: &'a [LabeledSample],
    dim: usize,
    distance_scale: f64,
    prefactor: f64,
}

impl<'a> Estimator<'a> {
    pub fn new(samples: &'a [LabeledSample], params: KernelParams) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidInput(
                "estimator needs at least one sample".into(),
            ));
        }
        let dim = samples[0].point.len();
        for (i, s) in samples.iter().enumerate() {
            if s.point.len() != dim {
                return Err(Error::InvalidInput(format!(
                    "sample {i} has dimension {}, expected {dim}",
                    s.point.len()
                )));
            }
            if !s.point.iter().all(|v| v.is_finite()) || !s.value.is_finite() {
                return Err(Error::InvalidInput(format!("sample {i} is not finite")));
            }
        }
        if params.q as usize > dim {
            return Err(Error::InvalidInput(format!(
                "manifold dimension q = {} exceeds ambient dimension d = {dim}",
                params.q
            )));
        }
        let nf = params.n as f64;
        let distance_scale = nf.powf(1.0 - params.alpha);
        let prefactor = nf.powf(params.q as f64 * (1.0 - params.alpha)) / samples.len() as f64;
        Ok(Estimator {
            table: KernelTable::build(params),
            samples,
            dim,
            distance_scale,
            prefactor,
        })
    }

    pub fn table(&self) -> &KernelTable {
        &self.table
    }

    /// F̂_{n,α}(Y; x) = (n^{q(1−α)}/M′) Σ_j value_j · Φ̃_{n,q}(n^{1−α}·‖x − point_j‖₂).
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::InvalidInput(format!(
                "evaluation point has dimension {}, expected {}",
                x.len(),
                self.dim
            )));
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput(
                "evaluation point must be finite".into(),
            ));
        }
        let mut sum = 0.0;
        for s in self.samples {
            let dist = euclidean(x, &s.point);
            sum += s.value * self.table.eval(self.distance_scale * dist);
        }
        Ok(self.prefactor * sum)
    }
}

/// One-shot form of the estimator; builds the kernel table internally.
pub fn estimate(samples: &[LabeledSample], x: &[f64], params: KernelParams) -> Result<f64> {
    Estimator::new(samples, params)?.eval(x)
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(u, v)| (u - v) * (u - v))
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermite::weighted_hermite;

    fn table(n: u32, q: u32) -> KernelTable {
        KernelTable::build(KernelParams::new(n, 1.0, q).unwrap())
    }

    #[test]
    fn params_validation() {
        assert!(KernelParams::new(0, 1.0, 1).is_err());
        assert!(KernelParams::new(3, 0.0, 1).is_err());
        assert!(KernelParams::new(3, 1.5, 1).is_err());
        assert!(KernelParams::new(3, 1.0, 0).is_err());
        assert!(KernelParams::new(3, 0.5, 2).is_ok());
    }

    #[test]
    fn projection_weights_q1() {
        let p = std::f64::consts::PI.powf(-0.25);

        let w = projection_weights(0, 1);
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].0, 0);
        assert!((w[0].1 - p).abs() < 1e-15);

        // m = 1: −π^{-1/4}·√(2!)/2 = −π^{-1/4}·√2/2 ≈ −0.5311260.
        let w = projection_weights(1, 1);
        assert_eq!(w[0].0, 1);
        assert!((w[0].1 - (-0.531_125_966_013_598_5)).abs() < 1e-12);
    }

    #[test]
    fn projection_weights_q3_m0() {
        // Γ(1)·1/(π^{5/4}·Γ(1)) = π^{-5/4}.
        let w = projection_weights(0, 3);
        assert_eq!(w.len(), 1);
        assert!((w[0].1 - std::f64::consts::PI.powf(-1.25)).abs() < 1e-15);
        assert!((w[0].1 - 0.239_090_686_568_373_6).abs() < 1e-12);
    }

    #[test]
    fn table_n1_q1_single_coefficient() {
        let t = table(1, 1);
        assert_eq!(t.coefficients().len(), 1);
        assert!((t.coefficients()[0] - std::f64::consts::PI.powf(-0.25)).abs() < 1e-15);
    }

    #[test]
    fn table_n2_q1_clipped_coefficient() {
        let t = table(2, 1);
        let p = std::f64::consts::PI.powf(-0.25);
        assert!((t.coefficients()[0] - p).abs() < 1e-15);
        // √2/2 ∈ (1/2, 1), so a_1 is strictly between its unclipped value and 0.
        let unclipped = -p * 2.0f64.sqrt() / 2.0;
        let a1 = t.coefficients()[1];
        assert!(a1 > unclipped && a1 < 0.0, "a_1 = {a1}");
        assert_eq!(t.coefficients()[2], 0.0); // H(1) = 0
    }

    #[test]
    fn eval_at_zero_matches_hand_computation() {
        // π^{-1/4}·ψ_0(0) = π^{-1/2}.
        let v = table(1, 1).eval(0.0);
        assert!((v - std::f64::consts::PI.powf(-0.5)).abs() < 1e-15);
    }

    #[test]
    fn eval_is_even_bit_for_bit() {
        for &(n, q) in &[(1u32, 1u32), (3, 2), (5, 4), (7, 7)] {
            let t = table(n, q);
            for &x in &[0.1, 0.5, 1.7, 3.25, 9.0] {
                assert_eq!(t.eval(x).to_bits(), t.eval(-x).to_bits());
            }
        }
    }

    #[test]
    fn localization_n5_q2() {
        let t = table(5, 2);
        let peak = (0..=400)
            .map(|i| t.eval(-1.0 + i as f64 / 200.0).abs())
            .fold(0.0f64, f64::max);
        assert!(t.eval(10.0).abs() < 1e-3 * peak);
    }

    /// Straight-line double sum Σ_m H(√(2m)/n) P_{m,q}(x), no summation
    /// exchange; the oracle for the table representation.
    fn naive_kernel(n: u32, q: u32, x: f64) -> f64 {
        let l_max = (n as usize * n as usize) / 2;
        let mut total = 0.0;
        for m in 0..=l_max {
            let h = cutoff((2.0 * m as f64).sqrt() / n as f64).unwrap();
            if h == 0.0 {
                continue;
            }
            let p: f64 = projection_weights(m, q)
                .iter()
                .map(|&(l, w)| w * weighted_hermite(x, 2 * l).unwrap())
                .sum();
            total += h * p;
        }
        total
    }

    #[test]
    fn table_matches_naive_double_sum() {
        for n in 1..=5u32 {
            for q in 1..=5u32 {
                let t = table(n, q);
                for i in 0..=20 {
                    let x = -10.0 + i as f64;
                    let diff = (t.eval(x) - naive_kernel(n, q, x)).abs();
                    assert!(diff < 1e-10, "n={n} q={q} x={x}: diff {diff}");
                }
            }
        }
    }

    #[test]
    fn frozen_reference_values() {
        // Cross-checked against an independent implementation of the same
        // formulas in double precision.
        let t = table(3, 2);
        let expected = [
            7.992_242_462_076_321e-1,
            -4.527_118_849_442_882e-1,
            2.591_346_855_952_052e-1,
            -2.178_595_738_474_909e-2,
            5.402_276_368_904_467e-8,
        ];
        assert_eq!(t.coefficients().len(), expected.len());
        for (got, want) in t.coefficients().iter().zip(expected) {
            assert!((got - want).abs() < 1e-14, "{got} vs {want}");
        }

        let t51 = table(5, 1);
        for (got, want) in t51.coefficients().iter().zip([
            7.511_255_444_649_425e-1,
            -5.311_259_660_135_985e-1,
            4.599_685_791_773_267e-1,
            -4.198_919_442_650_381e-1,
        ]) {
            assert!((got - want).abs() < 1e-14, "{got} vs {want}");
        }

        let t32 = table(3, 2);
        for (x, want) in [
            (0.0, 9.691_063_666_705_905e-1),
            (0.5, 6.425_556_174_428_555e-1),
            (2.0, -3.587_776_771_008_0e-2),
        ] {
            assert!((t32.eval(x) - want).abs() < 1e-13, "x={x}");
        }
    }

    #[test]
    fn kernel_has_unit_mass_at_high_degree() {
        // ∫ℝ Φ̃_{n,1}(|u|) du tends to 1; at n = 7 it is within 1e-2.
        let t = table(7, 1);
        let nodes = 8001;
        let (a, b) = (-20.0, 20.0);
        let step = (b - a) / (nodes - 1) as f64;
        let mut mass = 0.0;
        for i in 0..nodes {
            let w = if i == 0 || i == nodes - 1 { 0.5 } else { 1.0 };
            mass += w * t.eval(a + step * i as f64) * step;
        }
        assert!((mass - 1.0).abs() < 1e-2, "mass = {mass}");
    }

    #[test]
    fn coefficients_finite_up_to_n10_q10() {
        for n in 1..=10u32 {
            for q in 1..=10u32 {
                let t = table(n, q);
                assert!(
                    t.coefficients().iter().all(|a| a.is_finite()),
                    "non-finite coefficient at n={n} q={q}"
                );
            }
        }
    }

    #[test]
    fn single_sample_alpha_one() {
        let params = KernelParams::new(4, 1.0, 2).unwrap();
        let t = KernelTable::build(params);
        let y = vec![0.2, -0.1, 0.4];
        let v = 37.5;
        let samples = vec![LabeledSample::new(y.clone(), v).unwrap()];
        let x = vec![0.0, 0.3, -0.2];
        let dist = euclidean(&x, &y);
        let got = estimate(&samples, &x, params).unwrap();
        assert!((got - v * t.eval(dist)).abs() < 1e-12);
    }

    #[test]
    fn estimate_is_linear_in_values() {
        let params = KernelParams::new(3, 0.5, 1).unwrap();
        let samples: Vec<LabeledSample> = (0..10)
            .map(|i| {
                let z = i as f64 / 10.0 - 0.5;
                LabeledSample::new(vec![z, z * z], 1.0 + z).unwrap()
            })
            .collect();
        let doubled: Vec<LabeledSample> = samples
            .iter()
            .map(|s| LabeledSample::new(s.point.clone(), 2.0 * s.value).unwrap())
            .collect();
        let x = vec![0.1, 0.2];
        let a = estimate(&samples, &x, params).unwrap();
        let b = estimate(&doubled, &x, params).unwrap();
        assert!((b - 2.0 * a).abs() < 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn estimator_rejects_bad_input() {
        let params = KernelParams::new(3, 1.0, 1).unwrap();
        assert!(estimate(&[], &[0.0], params).is_err());

        let samples = vec![LabeledSample::new(vec![0.0, 0.0], 1.0).unwrap()];
        assert!(estimate(&samples, &[0.0], params).is_err()); // dimension mismatch
        assert!(estimate(&samples, &[f64::NAN, 0.0], params).is_err());

        let q3 = KernelParams::new(3, 1.0, 3).unwrap();
        assert!(estimate(&samples, &[0.0, 0.0], q3).is_err()); // q > d
    }
}
