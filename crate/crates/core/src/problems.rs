//! Instance generators.
//!
//! Random instances use `Pcg32` (64-bit state) seeded from a `u64`, so a seed
//! reproduces the same matrices on every platform.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rand_pcg::Pcg32;

use crate::error::{Error, Result};
use crate::linalg::{cx, mul, solve_lyapunov, spectral_abscissa, Mask};
use crate::model::{CompletionData, PlantModel};
use crate::scalar::{CMat, Real};

/// Swift–Hohenberg parameters on the periodic domain `[0, 2π]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShParams {
    pub n: usize,
    pub c: f64,
    pub alpha: f64,
    pub omega: f64,
    /// Control weight, `R = r·I`.
    pub r: f64,
}

impl Default for ShParams {
    fn default() -> Self {
        ShParams { n: 32, c: -0.2, alpha: 2.0, omega: 1.25, r: 10.0 }
    }
}

impl ShParams {
    pub fn with_n(n: usize) -> Self {
        ShParams { n, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 8 || self.n % 2 != 0 {
            return Err(Error::InvalidInput(format!("Swift-Hohenberg grid size must be even and at least 8, got {}", self.n)));
        }
        if ![self.c, self.alpha, self.omega, self.r].iter().all(|v| v.is_finite()) || self.r <= 0.0 {
            return Err(Error::InvalidInput("Swift-Hohenberg parameters must be finite with r > 0".into()));
        }
        Ok(())
    }
}

/// Fourier second-derivative matrix on `ξ_j = 2πj/n`, `n` even.
pub fn fourier_d2<T: Real>(n: usize) -> Result<CMat<T>> {
    if n < 2 || n % 2 != 0 {
        return Err(Error::InvalidInput(format!("Fourier differentiation needs an even grid, got {n}")));
    }
    let h = 2.0 * std::f64::consts::PI / n as f64;
    let diag = -std::f64::consts::PI.powi(2) / (3.0 * h * h) - 1.0 / 6.0;
    Ok(CMat::from_fn(n, n, |j, k| {
        if j == k {
            return cx(T::lit(diag));
        }
        let d = j as f64 - k as f64;
        let sign = if (j + n - k) % 2 == 0 { 1.0 } else { -1.0 };
        let s = (d * h / 2.0).sin();
        cx(T::lit(-sign / (2.0 * s * s)))
    }))
}

/// `A = −(D₂ + I)² − cI + diag(α cos(ωξ_j))`, `B = C = V = Q = I`, `R = rI`.
pub fn swift_hohenberg<T: Real>(params: &ShParams) -> Result<PlantModel<T>> {
    params.validate()?;
    let n = params.n;
    let mut l = fourier_d2::<T>(n)?;
    for i in 0..n {
        l[(i, i)] += cx(T::one());
    }
    let mut a = -mul(&l, &l);
    for j in 0..n {
        let xi = 2.0 * std::f64::consts::PI * j as f64 / n as f64;
        a[(j, j)] += cx(T::lit(-params.c + params.alpha * (params.omega * xi).cos()));
    }
    let id = CMat::<T>::identity(n, n);
    PlantModel::new(a, id.clone(), id.clone(), id.clone(), id.clone(), id * cx(T::lit(params.r)))
}

fn gaussian<T: Real>(rng: &mut Pcg32) -> Complex<T> {
    cx(T::lit(rng.sample::<f64, _>(StandardNormal)))
}

fn random_hurwitz<T: Real>(rng: &mut Pcg32, n: usize, margin: f64) -> Result<CMat<T>> {
    let scale = 1.0 / (n as f64).sqrt();
    let mut a = CMat::<T>::from_fn(n, n, |_, _| gaussian::<T>(rng) * cx(T::lit(scale)));
    let shift = spectral_abscissa(&a)? + T::lit(margin);
    for i in 0..n {
        a[(i, i)] -= cx(shift);
    }
    Ok(a)
}

fn unit_columns<T: Real>(rng: &mut Pcg32, rows: usize, cols: usize) -> CMat<T> {
    let mut m = CMat::<T>::from_fn(rows, cols, |_, _| gaussian::<T>(rng));
    for mut col in m.column_iter_mut() {
        let norm = col.norm();
        if norm > T::zero() {
            col /= cx(norm);
        }
    }
    m
}

/// Random real model with Hurwitz `A` (spectral abscissa `−0.5`), unit-norm
/// columns in `B` and `C*`, and `V = Q = I`, `R = I`.
pub fn random_stable_model<T: Real>(seed: u64, n: usize, m: usize, p: usize) -> Result<PlantModel<T>> {
    if n == 0 || m > n || p > n {
        return Err(Error::InvalidInput(format!("random model needs n >= m, n >= p, n > 0 (n={n}, m={m}, p={p})")));
    }
    let mut rng = Pcg32::seed_from_u64(seed);
    let a = random_hurwitz::<T>(&mut rng, n, 0.5)?;
    let b = unit_columns::<T>(&mut rng, n, m);
    let c = unit_columns::<T>(&mut rng, n, p).adjoint();
    let id = CMat::<T>::identity(n, n);
    PlantModel::new(a, b, c, id.clone(), id, CMat::identity(m, m))
}

/// Which output-covariance entries are known.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MaskKind {
    /// One-point correlations only.
    Diagonal,
    Full,
    /// Symmetric random pattern with the given off-diagonal density; the
    /// diagonal is always included.
    RandomSym(f64),
}

/// A completion problem together with the covariance that generated it.
#[derive(Debug, Clone)]
pub struct CompletionInstance<T: Real> {
    pub model: PlantModel<T>,
    pub data: CompletionData<T>,
    /// Steady-state covariance of the filter-augmented system; its leading
    /// `n×n` block is a feasible `X`.
    pub sigma: CMat<T>,
}

impl<T: Real> CompletionInstance<T> {
    /// Leading `n×n` block of `Σ`.
    pub fn sigma11(&self) -> CMat<T> {
        let n = self.model.n();
        self.sigma.view((0, 0), (n, n)).into_owned()
    }
}

/// A random stable system driven by low-pass filtered white noise
/// (`ξ̇ = −ξ + w`). The output covariance of the augmented system, masked by
/// `E`, becomes the data `G`. The returned model has `B = C = V = R = I` and
/// `Q = 0`.
pub fn synthetic_completion<T: Real>(seed: u64, n: usize, mask: MaskKind) -> Result<CompletionInstance<T>> {
    if n == 0 {
        return Err(Error::InvalidInput("completion instance needs n > 0".into()));
    }
    let mut rng = Pcg32::seed_from_u64(seed);
    let a = random_hurwitz::<T>(&mut rng, n, 0.5)?;
    let e = match mask {
        MaskKind::Diagonal => Mask::diagonal(n),
        MaskKind::Full => Mask::full(n),
        MaskKind::RandomSym(density) => {
            if !(0.0..=1.0).contains(&density) {
                return Err(Error::InvalidInput(format!("mask density must lie in [0, 1], got {density}")));
            }
            let mut bits = nalgebra::DMatrix::from_element(n, n, false);
            for j in 0..n {
                bits[(j, j)] = true;
                for i in 0..j {
                    let on = rng.gen::<f64>() < density;
                    bits[(i, j)] = on;
                    bits[(j, i)] = on;
                }
            }
            Mask::new(bits)
        }
    };

    let nn = 2 * n;
    let mut aug = CMat::<T>::zeros(nn, nn);
    aug.view_mut((0, 0), (n, n)).copy_from(&a);
    for i in 0..n {
        aug[(i, n + i)] = cx(T::one());
        aug[(n + i, n + i)] = cx(-T::one());
    }
    let mut forcing = CMat::<T>::zeros(nn, nn);
    for i in n..nn {
        forcing[(i, i)] = cx(T::one());
    }
    let sigma = solve_lyapunov(&aug, &forcing)?;
    let sigma11 = sigma.view((0, 0), (n, n)).into_owned();
    let data = CompletionData::new(e, sigma11)?;

    let id = CMat::<T>::identity(n, n);
    let model = PlantModel::new(a, id.clone(), id.clone(), id.clone(), CMat::zeros(n, n), id)?;
    Ok(CompletionInstance { model, data, sigma })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{eigenvalues, hermitian_extreme_eigenvalues, is_positive_definite};

    #[test]
    fn d2_differentiates_cosines() {
        let n = 32;
        let d2 = fourier_d2::<f64>(n).unwrap();
        for k in 1..=n / 4 {
            let v = nalgebra::DVector::from_fn(n, |j, _| cx((k as f64 * 2.0 * std::f64::consts::PI * j as f64 / n as f64).cos()));
            let err = (&d2 * &v + &v * cx(k as f64 * k as f64)).norm();
            assert!(err < 1e-8 * (1.0 + (k * k) as f64) * (n as f64).sqrt(), "k={k} err={err}");
        }
    }

    #[test]
    fn unmodulated_spectrum_matches_fourier_symbol() {
        let params = ShParams { alpha: 0.0, ..ShParams::with_n(16) };
        let a = swift_hohenberg::<f64>(&params).unwrap().a;
        let mut ev: Vec<f64> = eigenvalues(&a).unwrap().iter().map(|z| z.re).collect();
        ev.sort_by(|x, y| y.partial_cmp(x).unwrap());
        assert!((ev[0] - 0.2).abs() < 1e-8 && (ev[1] - 0.2).abs() < 1e-8);
        assert!(ev[2] < 0.0);
    }

    #[test]
    fn default_swift_hohenberg_has_two_unstable_modes() {
        for n in [32, 64] {
            let a = swift_hohenberg::<f64>(&ShParams::with_n(n)).unwrap().a;
            assert!(a.iter().all(|z| z.im.abs() <= 1e-12));
            let unstable = eigenvalues(&a).unwrap().iter().filter(|z| z.re > 0.0).count();
            assert_eq!(unstable, 2, "n={n}");
        }
        assert!(swift_hohenberg::<f64>(&ShParams::with_n(31)).is_err());
    }

    #[test]
    fn random_model_is_deterministic_and_hurwitz() {
        let m1 = random_stable_model::<f64>(7, 6, 3, 2).unwrap();
        let m2 = random_stable_model::<f64>(7, 6, 3, 2).unwrap();
        assert_eq!(m1, m2);
        assert!((spectral_abscissa(&m1.a).unwrap() + 0.5).abs() < 1e-8);
        assert_ne!(m1, random_stable_model::<f64>(8, 6, 3, 2).unwrap());
    }

    #[test]
    fn synthetic_completion_is_consistent() {
        let inst = synthetic_completion::<f64>(3, 6, MaskKind::Diagonal).unwrap();
        assert_eq!(inst.data.e.count_ones(), 6);
        assert!(is_positive_definite(&inst.sigma11()));
        let (lo, _) = hermitian_extreme_eigenvalues(&inst.sigma);
        assert!(lo > -1e-12);
        let g = inst.data.e.apply(&inst.sigma11());
        assert!((g - &inst.data.g).norm() < 1e-15);
        let sym = synthetic_completion::<f64>(3, 6, MaskKind::RandomSym(0.4)).unwrap();
        assert!(sym.data.e.is_symmetric());
    }
}
