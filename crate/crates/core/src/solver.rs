//! Ridge / minimum-norm interpolation in Gram space.
//!
//! All linear algebra happens on `n × n` matrices. The Gram matrix `Q Qᵀ` is
//! diagonalized once per dataset; `A = λ I + Q Qᵀ` for any admissible `λ`
//! then shares its eigenvectors, so sweeps over `λ` cost one decomposition.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::Dataset;
use crate::spectrum::Spectrum;

/// Relative safety margin above `-μ_n(QQᵀ)` for negative regularization.
pub const NEGATIVE_FLOOR_REL: f64 = 1e-6;
/// Eigenvalues below this fraction of the largest one count as zero.
const RANK_TOL: f64 = 1e-12;

fn sym_eigen(m: DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>) {
    let e = SymmetricEigen::new(m);
    (e.eigenvectors, e.eigenvalues)
}

/// Smallest admissible regularization for a Gram matrix with the given
/// extreme eigenvalues.
fn lambda_floor(min_eig: f64, max_eig: f64) -> f64 {
    -min_eig + (NEGATIVE_FLOOR_REL * min_eig.abs()).max(RANK_TOL * max_eig.abs())
}

/// Eigendecomposition of `M Mᵀ` before a regularization is chosen.
#[derive(Debug, Clone)]
pub struct GramFactor {
    vectors: DMatrix<f64>,
    gram_eigs: DVector<f64>,
}

impl GramFactor {
    pub fn from_rows(m: &DMatrix<f64>) -> Self {
        let (vectors, gram_eigs) = sym_eigen(m * m.transpose());
        Self { vectors, gram_eigs }
    }

    /// Smallest admissible regularization.
    pub fn floor(&self) -> f64 {
        lambda_floor(self.gram_eigs.min(), self.gram_eigs.max())
    }

    pub fn at_lambda(&self, lambda_reg: f64) -> Result<GramState> {
        GramState::from_parts(self.vectors.clone(), self.gram_eigs.clone(), lambda_reg)
    }
}

/// Eigendecomposition of `λ I + Q Qᵀ` at a fixed admissible `λ`.
#[derive(Debug, Clone)]
pub struct GramState {
    vectors: DMatrix<f64>,
    /// Eigenvalues of `Q Qᵀ` (not shifted by `λ`).
    gram_eigs: DVector<f64>,
    inv: DVector<f64>,
    lambda_reg: f64,
}

impl GramState {
    /// Diagonalize `λ I + M Mᵀ`.
    pub fn from_rows(m: &DMatrix<f64>, lambda_reg: f64) -> Result<Self> {
        GramFactor::from_rows(m).at_lambda(lambda_reg)
    }

    /// Diagonalize `λ I + G` for a symmetric `G`.
    pub fn from_gram(gram: DMatrix<f64>, lambda_reg: f64) -> Result<Self> {
        let (vectors, gram_eigs) = sym_eigen(gram);
        Self::from_parts(vectors, gram_eigs, lambda_reg)
    }

    fn from_parts(vectors: DMatrix<f64>, gram_eigs: DVector<f64>, lambda_reg: f64) -> Result<Self> {
        let min_eig = gram_eigs.min();
        let max_eig = gram_eigs.max();
        let floor = lambda_floor(min_eig, max_eig);
        if !(lambda_reg >= floor) {
            return Err(Error::SingularRegularization {
                lambda_reg,
                min_eig,
                floor,
            });
        }
        let inv = gram_eigs.map(|s| 1.0 / (s + lambda_reg));
        Ok(Self {
            vectors,
            gram_eigs,
            inv,
            lambda_reg,
        })
    }

    /// The same Gram matrix at another regularization, without refactorizing.
    pub fn at_lambda(&self, lambda_reg: f64) -> Result<Self> {
        Self::from_parts(self.vectors.clone(), self.gram_eigs.clone(), lambda_reg)
    }

    pub fn lambda_reg(&self) -> f64 {
        self.lambda_reg
    }

    pub fn n(&self) -> usize {
        self.gram_eigs.len()
    }

    /// `μ_n(QQᵀ)`.
    pub fn min_eig_gram(&self) -> f64 {
        self.gram_eigs.min()
    }

    /// `μ_1(QQᵀ)`.
    pub fn max_eig_gram(&self) -> f64 {
        self.gram_eigs.max()
    }

    /// Smallest regularization accepted for this Gram matrix.
    pub fn floor(&self) -> f64 {
        lambda_floor(self.min_eig_gram(), self.max_eig_gram())
    }

    /// `A⁻¹ v`.
    pub fn solve(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut c = self.vectors.tr_mul(v);
        c.component_mul_assign(&self.inv);
        &self.vectors * c
    }

    /// Dense `A = λI + QQᵀ`, reassembled from the eigendecomposition.
    pub fn a_matrix(&self) -> DMatrix<f64> {
        let d = self.gram_eigs.map(|s| s + self.lambda_reg);
        &self.vectors * DMatrix::from_diagonal(&d) * self.vectors.transpose()
    }

    /// Dense `A⁻¹`.
    pub fn a_inverse(&self) -> DMatrix<f64> {
        &self.vectors * DMatrix::from_diagonal(&self.inv) * self.vectors.transpose()
    }
}

/// Factorize `A = λI + QQᵀ` for a dataset.
pub fn gram(dataset: &Dataset, lambda_reg: f64) -> Result<GramState> {
    GramState::from_rows(&dataset.q, lambda_reg)
}

/// Scalars entering the ridge decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecompScalars {
    /// `yᵀA⁻¹y`
    pub y_a_y: f64,
    /// `yᵀA⁻¹ŷ`
    pub y_a_yhat: f64,
    /// `νᵀA⁻¹y`
    pub nu_a_y: f64,
    /// `νᵀA⁻¹ŷ`
    pub nu_a_yhat: f64,
    /// `νᵀA⁻¹Δy`
    pub nu_a_dy: f64,
    /// `ΔyᵀA⁻¹y`
    pub dy_a_y: f64,
    /// `μᵀμ̃⊥`
    pub mu_mu_perp: f64,
}

/// Ridge solution with its decomposition.
#[derive(Debug, Clone)]
pub struct RidgeSolution {
    pub w: DVector<f64>,
    pub s: f64,
    /// `ν = Qμ`.
    pub nu: DVector<f64>,
    /// `μ̃⊥ = (I - QᵀA⁻¹Q) μ`.
    pub mu_perp_tilde: DVector<f64>,
    /// `ξ = yᵀA⁻¹ŷ / yᵀA⁻¹y`.
    pub xi: f64,
    /// `ỹ = ŷ - ξ y`.
    pub y_tilde: DVector<f64>,
    pub scalars: DecompScalars,
    /// Coefficients of `QᵀA⁻¹Δy`, `QᵀA⁻¹y`, `μ̃⊥` in `S·w`.
    pub coefficients: [f64; 3],
    pub lambda_reg: f64,
}

impl RidgeSolution {
    /// `S μᵀw` predicted by the scalar identity
    /// `yᵀA⁻¹ŷ · μᵀμ̃⊥ + (1 + νᵀA⁻¹y) νᵀA⁻¹ŷ`.
    pub fn s_inner_identity(&self) -> f64 {
        let c = &self.scalars;
        c.y_a_yhat * c.mu_mu_perp + (1.0 + c.nu_a_y) * c.nu_a_yhat
    }
}

/// Assemble the ridge solution from the decomposition, reusing a
/// factorization of `A`.
pub fn decompose(gram: &GramState, dataset: &Dataset, mu: &[f64]) -> Result<RidgeSolution> {
    decompose_with_labels(gram, dataset, mu, &dataset.y_hat)
}

/// As [`decompose`] but with the noisy labels replaced by `y_hat`.
pub fn decompose_with_labels(
    gram: &GramState,
    dataset: &Dataset,
    mu: &[f64],
    y_hat: &DVector<f64>,
) -> Result<RidgeSolution> {
    decompose_perturbed(gram, dataset, mu, y_hat, 0.0)
}

/// Decomposition with `S` multiplied by `1 + s_perturbation`. Only used to
/// check that the identity suites detect corrupted solutions.
pub fn decompose_perturbed(
    gram: &GramState,
    dataset: &Dataset,
    mu: &[f64],
    y_hat: &DVector<f64>,
    s_perturbation: f64,
) -> Result<RidgeSolution> {
    let q = &dataset.q;
    let y = &dataset.y;
    let mu_v = DVector::from_column_slice(mu);
    let dy = y_hat - y;
    let nu = q * &mu_v;

    let a_y = gram.solve(y);
    let a_dy = gram.solve(&dy);
    let a_nu = gram.solve(&nu);

    let y_a_y = y.dot(&a_y);
    let dy_a_y = dy.dot(&a_y);
    let y_a_yhat = y_a_y + dy_a_y;
    let nu_a_y = nu.dot(&a_y);
    let nu_a_dy = nu.dot(&a_dy);
    let nu_a_yhat = nu_a_y + nu_a_dy;
    let mu_sq = mu_v.norm_squared();
    let mu_mu_perp = mu_sq - nu.dot(&a_nu);

    let one_nu = 1.0 + nu_a_y;
    let s = (one_nu * one_nu + mu_mu_perp * y_a_y) * (1.0 + s_perturbation);
    let lambda_tail_proxy = gram.lambda_reg() + q.norm_squared() / q.nrows() as f64;
    let scale = if lambda_tail_proxy > 0.0 {
        1.0 + mu_sq * q.nrows() as f64 / lambda_tail_proxy
    } else {
        1.0
    };
    if !(s > 1e-12 * scale) {
        return Err(Error::DegenerateS(s));
    }

    let c2 = one_nu * (1.0 - nu_a_dy) - dy_a_y * mu_mu_perp;
    let c3 = y_a_y + one_nu * dy_a_y - y_a_y * nu_a_dy;

    let mut mu_perp_tilde = mu_v.clone();
    mu_perp_tilde -= q.tr_mul(&a_nu);

    // w = Qᵀ[A⁻¹Δy + (c2/S) A⁻¹y - (c3/S) A⁻¹ν] + (c3/S) μ
    let mut g = a_dy;
    g.axpy(c2 / s, &a_y, 1.0);
    g.axpy(-c3 / s, &a_nu, 1.0);
    let mut w = q.tr_mul(&g);
    w.axpy(c3 / s, &mu_v, 1.0);

    let xi = y_a_yhat / y_a_y;
    let y_tilde = y_hat - y * xi;
    Ok(RidgeSolution {
        w,
        s,
        nu,
        mu_perp_tilde,
        xi,
        y_tilde,
        scalars: DecompScalars {
            y_a_y,
            y_a_yhat,
            nu_a_y,
            nu_a_yhat,
            nu_a_dy,
            dy_a_y,
            mu_mu_perp,
        },
        coefficients: [s, c2, c3],
        lambda_reg: gram.lambda_reg(),
    })
}

/// `w = Xᵀ (XXᵀ + λI)⁻¹ ŷ` computed directly from the design matrix.
pub fn ridge_direct(dataset: &Dataset, mu: &[f64], lambda_reg: f64) -> Result<DVector<f64>> {
    ridge_direct_design(&dataset.design(mu), &dataset.y_hat, lambda_reg)
}

/// Ridge solution for an explicit design matrix.
pub fn ridge_direct_design(x: &DMatrix<f64>, y_hat: &DVector<f64>, lambda_reg: f64) -> Result<DVector<f64>> {
    let g = GramState::from_rows(x, lambda_reg)?;
    Ok(x.tr_mul(&g.solve(y_hat)))
}

/// `w̃ = w / ‖w‖²`, the projection of the origin onto the affine span of the
/// columns of `Xᵀ D_ŷ`, computed from the minimum-norm interpolator.
pub fn mni_dual(w_mni: &DVector<f64>) -> Result<DVector<f64>> {
    let nrm = w_mni.norm_squared();
    if nrm == 0.0 || !nrm.is_finite() {
        return Err(Error::ZeroSolution);
    }
    Ok(w_mni / nrm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MarginStats {
    /// `μᵀw`
    pub inner: f64,
    /// `‖w‖_Σ`
    pub sigma_norm: f64,
    /// `μᵀw / ‖w‖_Σ`
    pub ratio: f64,
}

/// The margin ratio `μᵀw / ‖w‖_Σ`.
pub fn margin_stats(w: &[f64], mu: &[f64], spectrum: &Spectrum) -> Result<MarginStats> {
    let inner: f64 = w.iter().zip(mu).map(|(a, b)| a * b).sum();
    let sigma_sq: f64 = w
        .iter()
        .zip(spectrum.values())
        .map(|(a, l)| l * a * a)
        .sum();
    let sigma_norm = sigma_sq.sqrt();
    if sigma_norm == 0.0 || !sigma_norm.is_finite() {
        return Err(Error::ZeroSolution);
    }
    Ok(MarginStats {
        inner,
        sigma_norm,
        ratio: inner / sigma_norm,
    })
}

/// `Φ(-ratio)`: misclassification probability against clean test labels.
pub fn gaussian_error(ratio: f64) -> f64 {
    0.5 * libm::erfc(ratio / std::f64::consts::SQRT_2)
}

/// Misclassification probability against noisy test labels,
/// `η + (1 - 2η) Φ(-ratio)`.
pub fn noisy_test_error(ratio: f64, eta: f64) -> f64 {
    eta + (1.0 - 2.0 * eta) * gaussian_error(ratio)
}

/// Training residual `‖Xw - ŷ‖ / ‖ŷ‖`.
pub fn train_residual(dataset: &Dataset, mu: &[f64], w: &DVector<f64>) -> f64 {
    let inner: f64 = w.iter().zip(mu).map(|(a, b)| a * b).sum();
    let mut r = &dataset.q * w;
    r.axpy(inner, &dataset.y, 1.0);
    r -= &dataset.y_hat;
    r.norm() / dataset.y_hat.norm()
}

/// Residuals of the three Sherman–Morrison–Woodbury identities splitting
/// `A` at index `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SmwResiduals {
    /// `A⁻¹ = A_k⁻¹ - A_k⁻¹Q₀ₖK⁻¹Q₀ₖᵀA_k⁻¹`
    pub inverse: f64,
    /// `A⁻¹Q₀ₖ = A_k⁻¹Q₀ₖK⁻¹`
    pub head_product: f64,
    /// `I_k - Q₀ₖᵀA⁻¹Q₀ₖ = K⁻¹`
    pub projector: f64,
}

impl SmwResiduals {
    pub fn max(&self) -> f64 {
        self.inverse.max(self.head_product).max(self.projector)
    }
}

fn rel_frobenius(lhs: &DMatrix<f64>, rhs: &DMatrix<f64>) -> f64 {
    let scale = lhs.norm().max(rhs.norm());
    if scale == 0.0 {
        0.0
    } else {
        (lhs - rhs).norm() / scale
    }
}

/// Check the SMW identities with `A_k = λI + Q_{k:}Q_{k:}ᵀ` and
/// `K = I_k + Q₀ₖᵀA_k⁻¹Q₀ₖ` against dense inverses.
pub fn smw_check(dataset: &Dataset, k: usize, lambda_reg: f64) -> Result<SmwResiduals> {
    let q = &dataset.q;
    let p = q.ncols();
    if k > p {
        return Err(Error::InvalidParams(format!("split index {k} exceeds dimension {p}")));
    }
    let head = q.columns(0, k).into_owned();
    let tail = q.columns(k, p - k).into_owned();
    let a_k = GramState::from_rows(&tail, lambda_reg)?;
    let a = GramState::from_rows(q, lambda_reg)?;
    let a_inv = a.a_inverse();
    let a_k_inv = a_k.a_inverse();
    if k == 0 {
        return Ok(SmwResiduals {
            inverse: rel_frobenius(&a_inv, &a_k_inv),
            head_product: 0.0,
            projector: 0.0,
        });
    }
    let ak_head = &a_k_inv * &head;
    let kmat = DMatrix::identity(k, k) + head.tr_mul(&ak_head);
    let k_inv = GramState::from_gram(kmat, 0.0)?.a_inverse();
    let smw = &a_k_inv - &ak_head * &k_inv * ak_head.transpose();
    let a_head = &a_inv * &head;
    let proj = DMatrix::identity(k, k) - head.tr_mul(&a_head);
    Ok(SmwResiduals {
        inverse: rel_frobenius(&a_inv, &smw),
        head_product: rel_frobenius(&a_head, &(&ak_head * &k_inv)),
        projector: rel_frobenius(&proj, &k_inv),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{sample_dataset, CovariateLaw, ProblemSpec};
    use proptest::prelude::*;

    fn instance(n: usize, p: usize, eta: f64, mu_scale: f64, seed: u64) -> (ProblemSpec, Dataset) {
        let values: Vec<f64> = (0..p).map(|i| 1.0 / (1.0 + i as f64 / 10.0)).collect();
        let spectrum = Spectrum::new(values).unwrap();
        let mu: Vec<f64> = (0..p).map(|i| mu_scale * (0.7f64).powi(i as i32)).collect();
        let pr = ProblemSpec::new(spectrum, mu, n, eta, 0.0, CovariateLaw::Gaussian).unwrap();
        let d = sample_dataset(&pr, seed, 0);
        (pr, d)
    }

    fn rel_err(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        (a - b).norm() / b.norm()
    }

    /// Minimum-norm solution from an SVD pseudo-inverse, independent of the
    /// Gram-space path.
    fn pinv_solution(x: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
        x.clone().pseudo_inverse(1e-12).unwrap() * y
    }

    #[test]
    fn zero_rows_give_identity() {
        let g = GramState::from_rows(&DMatrix::zeros(3, 5), 1.0).unwrap();
        assert!((g.a_matrix() - DMatrix::<f64>::identity(3, 3)).norm() < 1e-15);
    }

    #[test]
    fn boundary_regularization_is_rejected() {
        let (_, d) = instance(10, 40, 0.0, 1.0, 1);
        let g = gram(&d, 0.0).unwrap();
        assert!(g.min_eig_gram() > 0.0);
        assert!(matches!(
            g.at_lambda(-g.min_eig_gram()),
            Err(Error::SingularRegularization { .. })
        ));
        assert!(g.at_lambda(-0.5 * g.min_eig_gram()).is_ok());
    }

    #[test]
    fn tiny_direct_example() {
        let x = DMatrix::from_row_slice(1, 2, &[3.0, 4.0]);
        let w = ridge_direct_design(&x, &DVector::from_vec(vec![1.0]), 0.0).unwrap();
        assert!((w[0] - 0.12).abs() < 1e-15 && (w[1] - 0.16).abs() < 1e-15);
    }

    #[test]
    fn direct_matches_pseudo_inverse() {
        let (pr, d) = instance(15, 60, 0.2, 2.0, 3);
        let x = d.design(pr.mu());
        let w = ridge_direct(&d, pr.mu(), 0.0).unwrap();
        assert!(rel_err(&w, &pinv_solution(&x, &d.y_hat)) < 1e-8);
    }

    #[test]
    fn zero_mean_reduces_to_q_solution() {
        let (pr, d) = instance(12, 50, 0.2, 0.0, 4);
        let g = gram(&d, 0.0).unwrap();
        let sol = decompose(&g, &d, pr.mu()).unwrap();
        assert!((sol.s - 1.0).abs() < 1e-12);
        assert!(sol.mu_perp_tilde.norm() == 0.0);
        let expect = d.q.tr_mul(&g.solve(&d.y_hat));
        assert!(rel_err(&sol.w, &expect) < 1e-12);
        assert!(rel_err(&sol.w, &pinv_solution(&d.q, &d.y_hat)) < 1e-8);
    }

    #[test]
    fn noiseless_coefficients_collapse() {
        let (pr, d) = instance(12, 50, 0.0, 1.5, 5);
        let g = gram(&d, 0.3).unwrap();
        let sol = decompose(&g, &d, pr.mu()).unwrap();
        let c = sol.scalars;
        let mut expect = d.q.tr_mul(&g.solve(&d.y)) * (1.0 + c.nu_a_y);
        expect.axpy(c.y_a_y, &sol.mu_perp_tilde, 1.0);
        expect /= sol.s;
        assert!(rel_err(&sol.w, &expect) < 1e-12);
        assert_eq!(sol.xi, 1.0);
    }

    #[test]
    fn decomposition_matches_direct_for_all_signs_of_lambda() {
        let (pr, d) = instance(20, 80, 0.3, 1.0, 6);
        let g0 = gram(&d, 0.0).unwrap();
        for lam in [0.0, 0.7, -0.5 * g0.min_eig_gram()] {
            let g = g0.at_lambda(lam).unwrap();
            let sol = decompose(&g, &d, pr.mu()).unwrap();
            let w = ridge_direct(&d, pr.mu(), lam).unwrap();
            assert!(rel_err(&sol.w, &w) < 1e-9, "lambda {lam}");
            let inner = sol.w.dot(&DVector::from_column_slice(pr.mu()));
            assert!((sol.s * inner - sol.s_inner_identity()).abs() < 1e-9 * sol.s_inner_identity().abs());
        }
    }

    #[test]
    fn mni_interpolates_and_mu_perp_is_projection() {
        let (pr, d) = instance(20, 70, 0.2, 1.0, 7);
        let g = gram(&d, 0.0).unwrap();
        let sol = decompose(&g, &d, pr.mu()).unwrap();
        assert!(train_residual(&d, pr.mu(), &sol.w) < 1e-9);
        // projection of μ onto the orthogonal complement of the rows of Q
        let mu = DVector::from_column_slice(pr.mu());
        let proj = d.q.transpose() * pinv_solution(&d.q.transpose(), &mu);
        assert!(rel_err(&sol.mu_perp_tilde, &(&mu - proj)) < 1e-8);
    }

    #[test]
    fn dual_solution_matches_affine_projection() {
        let (pr, d) = instance(10, 40, 0.2, 1.0, 8);
        let g = gram(&d, 0.0).unwrap();
        let sol = decompose(&g, &d, pr.mu()).unwrap();
        let wt = mni_dual(&sol.w).unwrap();
        assert!((sol.w.dot(&wt) - 1.0).abs() < 1e-10);
        // α ∝ (MᵀM)⁻¹1 with M = Xᵀ D_ŷ, normalized to sum to one
        let x = d.design(pr.mu());
        let m = x.transpose() * DMatrix::from_diagonal(&d.y_hat);
        let a = (m.transpose() * &m).lu().solve(&DVector::from_element(10, 1.0)).unwrap();
        let alpha = &a / a.sum();
        assert!(rel_err(&wt, &(m * alpha)) < 1e-8);
        assert!(matches!(mni_dual(&DVector::zeros(3)), Err(Error::ZeroSolution)));
    }

    #[test]
    fn noiseless_dual_matches_three_term_formula() {
        let (pr, d) = instance(10, 40, 0.0, 1.3, 9);
        let g = gram(&d, 0.0).unwrap();
        let sol = decompose(&g, &d, pr.mu()).unwrap();
        let wt = mni_dual(&sol.w).unwrap();
        let c = sol.scalars;
        let qay = d.q.tr_mul(&g.solve(&d.y));
        let expect = &qay / c.y_a_y + &sol.mu_perp_tilde + &qay * (c.nu_a_y / c.y_a_y);
        assert!(rel_err(&wt, &expect) < 1e-8);
    }

    #[test]
    fn zero_mean_clean_dual() {
        let (pr, d) = instance(10, 40, 0.0, 0.0, 10);
        let g = gram(&d, 0.0).unwrap();
        let sol = decompose(&g, &d, pr.mu()).unwrap();
        let wt = mni_dual(&sol.w).unwrap();
        let qay = d.q.tr_mul(&g.solve(&d.y));
        assert!(rel_err(&wt, &(&qay / sol.scalars.y_a_y)) < 1e-10);
    }

    #[test]
    fn margin_stats_examples() {
        let s = Spectrum::isotropic(3).unwrap();
        let m = margin_stats(&[3.0, 4.0, 0.0], &[3.0, 4.0, 0.0], &s).unwrap();
        assert!((m.ratio - 5.0).abs() < 1e-15);
        let m = margin_stats(&[0.0, 0.0, 1.0], &[3.0, 4.0, 0.0], &s).unwrap();
        assert_eq!((m.inner, m.ratio), (0.0, 0.0));
        assert!(matches!(margin_stats(&[0.0; 3], &[1.0; 3], &s), Err(Error::ZeroSolution)));
    }

    #[test]
    fn gaussian_error_values() {
        assert_eq!(gaussian_error(0.0), 0.5);
        assert!(gaussian_error(40.0) < 1e-300);
        // Φ(-1)
        assert!((gaussian_error(1.0) - 0.158_655_253_931_457_05).abs() < 1e-14);
        assert!((noisy_test_error(0.0, 0.1) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn smw_identities() {
        let (_, d) = instance(12, 50, 0.0, 0.0, 11);
        assert_eq!(smw_check(&d, 0, 0.0).unwrap().max(), 0.0);
        assert!(smw_check(&d, 5, 0.0).unwrap().max() < 1e-9);
        assert!(smw_check(&d, 12, 0.0).unwrap().max() < 1e-9);
        // tail of rank one cannot make A_k PD without regularization
        assert!(matches!(smw_check(&d, 49, 0.0), Err(Error::SingularRegularization { .. })));
    }

    #[test]
    fn ridge_equals_augmented_mni() {
        let (pr, d) = instance(10, 30, 0.2, 1.0, 12);
        let lam = 0.8;
        let w = ridge_direct(&d, pr.mu(), lam).unwrap();
        let x = d.design(pr.mu());
        let mut aug = DMatrix::zeros(10, 40);
        aug.columns_mut(0, 30).copy_from(&x);
        aug.columns_mut(30, 10).copy_from(&(DMatrix::<f64>::identity(10, 10) * lam.sqrt()));
        let w_aug = pinv_solution(&aug, &d.y_hat);
        assert!(rel_err(&w, &w_aug.rows(0, 30).into_owned()) < 1e-9);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn decomposition_agrees_with_direct(
            n in 3usize..25,
            extra in 1usize..60,
            eta in prop_oneof![Just(0.0), Just(0.1), Just(0.3)],
            mu_scale in 0.0f64..3.0,
            seed in 0u64..1000,
        ) {
            let (pr, d) = instance(n, n + extra, eta, mu_scale, seed);
            let g = gram(&d, 0.0).unwrap();
            let sol = decompose(&g, &d, pr.mu()).unwrap();
            let w = ridge_direct(&d, pr.mu(), 0.0).unwrap();
            prop_assert!(rel_err(&sol.w, &w) < 1e-8);
            prop_assert!(train_residual(&d, pr.mu(), &sol.w) < 1e-8);
        }

        #[test]
        fn rescaling_identity(
            n in 3usize..25,
            extra in 1usize..60,
            mu_scale in 0.1f64..3.0,
            seed in 0u64..1000,
        ) {
            let (pr, d) = instance(n, n + extra, 0.3, mu_scale, seed);
            let g = gram(&d, 0.0).unwrap();
            let sol = decompose(&g, &d, pr.mu()).unwrap();
            let clean = decompose_with_labels(&g, &d, pr.mu(), &d.y).unwrap();
            let a_yt = g.solve(&sol.y_tilde);
            let coef = sol.xi - sol.nu.dot(&a_yt);
            let mut rhs = d.q.tr_mul(&a_yt);
            rhs.axpy(coef, &clean.w, 1.0);
            prop_assert!(rel_err(&rhs, &sol.w) < 1e-9);
        }
    }
}
