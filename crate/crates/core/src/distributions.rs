//! Log densities and conjugate updates for the multinomial/Dirichlet pair
//! and for Gaussian linear regression under a normal-inverse-gamma prior.
//!
//! Everything is evaluated in log space. Matrix inverses go through a
//! Cholesky factorization and fail loudly on loss of definiteness.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{CgnError, Result};
use crate::linalg::{asymmetry, symmetrize, Cholesky};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEFFICIENTS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_7e-7,
];

/// `ln Γ(x)` for `x > 0` via the Lanczos series (g = 7, 9 terms).
pub fn ln_gamma(x: f64) -> f64 {
    debug_assert!(x > 0.0, "ln_gamma is only used on the positive axis");
    if x < 0.5 {
        // reflection: Γ(x)Γ(1-x) = π / sin(πx)
        return (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = LANCZOS_COEFFICIENTS[0];
    let t = x + LANCZOS_G + 0.5;
    for (i, c) in LANCZOS_COEFFICIENTS.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * LN_2PI + (x + 0.5) * t.ln() - t + a.ln()
}

/// `ln Σ exp(xᵢ)` without overflow. Empty input gives `-∞`.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Probability vector of a categorical (multinomial with one trial) variable.
#[derive(Debug, Clone, PartialEq)]
pub struct MultinomialParams {
    theta: Vec<f64>,
}

impl MultinomialParams {
    pub fn new(theta: Vec<f64>) -> Result<Self> {
        if theta.len() < 1 {
            return Err(CgnError::Domain("empty probability vector".into()));
        }
        if theta.iter().any(|t| !(*t > 0.0) || !t.is_finite()) {
            return Err(CgnError::Domain(format!(
                "multinomial probabilities must be strictly positive: {theta:?}"
            )));
        }
        let total: f64 = theta.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(CgnError::Domain(format!(
                "multinomial probabilities sum to {total}, not 1"
            )));
        }
        Ok(Self { theta })
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn ln_prob(&self, category: usize) -> f64 {
        self.theta[category].ln()
    }
}

/// Dirichlet pseudo-counts.
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletParams {
    psi: Vec<f64>,
}

impl DirichletParams {
    pub fn new(psi: Vec<f64>) -> Result<Self> {
        if psi.is_empty() {
            return Err(CgnError::Domain("empty Dirichlet parameter vector".into()));
        }
        if psi.iter().any(|p| !(*p > 0.0) || !p.is_finite()) {
            return Err(CgnError::Domain(format!(
                "Dirichlet parameters must be positive and finite: {psi:?}"
            )));
        }
        Ok(Self { psi })
    }

    pub fn uniform(len: usize, pseudocount: f64) -> Result<Self> {
        Self::new(vec![pseudocount; len])
    }

    pub fn psi(&self) -> &[f64] {
        &self.psi
    }

    pub fn len(&self) -> usize {
        self.psi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.psi.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.psi.iter().sum()
    }
}

/// Parameters of a Gaussian linear regression `y ~ N(βᵀz, σ²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussLinRegParams {
    beta: DVector<f64>,
    sigma2: f64,
}

impl GaussLinRegParams {
    pub fn new(beta: DVector<f64>, sigma2: f64) -> Result<Self> {
        if !(sigma2 > 0.0) || !sigma2.is_finite() {
            return Err(CgnError::Domain(format!(
                "regression variance must be positive, got {sigma2}"
            )));
        }
        if beta.iter().any(|b| !b.is_finite()) {
            return Err(CgnError::Domain("regression coefficients must be finite".into()));
        }
        Ok(Self { beta, sigma2 })
    }

    pub fn beta(&self) -> &DVector<f64> {
        &self.beta
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn mean(&self, z: &DVector<f64>) -> f64 {
        self.beta.dot(z)
    }

    pub fn ln_density(&self, y: f64, z: &DVector<f64>) -> f64 {
        log_gaussian(y, self.mean(z), self.sigma2).expect("sigma2 > 0 by construction")
    }
}

/// Normal-inverse-gamma hyperparameters: `σ² ~ IG(ρ, φ)`, `β | σ² ~ N(μ, σ² V)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NigParams {
    mu: DVector<f64>,
    v: DMatrix<f64>,
    rho: f64,
    phi: f64,
}

impl NigParams {
    pub fn new(mu: DVector<f64>, v: DMatrix<f64>, rho: f64, phi: f64) -> Result<Self> {
        let p = mu.len();
        if v.nrows() != p || v.ncols() != p {
            return Err(CgnError::Contract(format!(
                "NIG scale matrix is {}x{} but the mean has length {p}",
                v.nrows(),
                v.ncols()
            )));
        }
        if !(rho > 0.0) || !rho.is_finite() || !(phi > 0.0) || !phi.is_finite() {
            return Err(CgnError::Domain(format!(
                "NIG shape and rate must be positive: rho={rho}, phi={phi}"
            )));
        }
        if mu.iter().chain(v.iter()).any(|x| !x.is_finite()) {
            return Err(CgnError::Domain("NIG mean and scale must be finite".into()));
        }
        if asymmetry(&v) > 1e-10 {
            return Err(CgnError::Domain("NIG scale matrix is not symmetric".into()));
        }
        Cholesky::factor(&v, "NIG scale matrix")?;
        Ok(Self { mu, v, rho, phi })
    }

    pub fn mu(&self) -> &DVector<f64> {
        &self.mu
    }

    pub fn v(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    /// Draws `(β, σ²)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (DVector<f64>, f64) {
        let precision = Gamma::new(self.rho, 1.0 / self.phi)
            .expect("rho and phi are positive")
            .sample(rng);
        let sigma2 = 1.0 / precision;
        let chol = Cholesky::factor(&self.v, "NIG scale matrix").expect("validated at construction");
        let e = DVector::from_fn(self.dim(), |_, _| StandardNormal.sample(rng));
        let beta = &self.mu + chol.l() * e * sigma2.sqrt();
        (beta, sigma2)
    }
}

/// Multivariate Student-t with `ν` degrees of freedom, location `μ` and
/// scale matrix `Σ`.
#[derive(Debug, Clone, PartialEq)]
pub struct StudentParams {
    pub nu: f64,
    pub location: DVector<f64>,
    pub scale: DMatrix<f64>,
}

impl StudentParams {
    pub fn univariate(nu: f64, location: f64, scale: f64) -> Self {
        Self {
            nu,
            location: DVector::from_element(1, location),
            scale: DMatrix::from_element(1, 1, scale),
        }
    }

    pub fn dim(&self) -> usize {
        self.location.len()
    }
}

/// `ln N(y | mean, variance)`
pub fn log_gaussian(y: f64, mean: f64, variance: f64) -> Result<f64> {
    if !(variance > 0.0) {
        return Err(CgnError::Domain(format!(
            "Gaussian variance must be positive, got {variance}"
        )));
    }
    let d = y - mean;
    Ok(-0.5 * (LN_2PI + variance.ln()) - 0.5 * d * d / variance)
}

/// `ln MVSt(x | ν, μ, Σ)`
pub fn log_mv_student(x: &DVector<f64>, params: &StudentParams) -> Result<f64> {
    let m = params.dim();
    if x.len() != m || params.scale.nrows() != m || params.scale.ncols() != m {
        return Err(CgnError::Contract(format!(
            "Student dimension mismatch: x has {} entries, location {m}, scale {}x{}",
            x.len(),
            params.scale.nrows(),
            params.scale.ncols()
        )));
    }
    if !(params.nu > 0.0) {
        return Err(CgnError::Domain(format!(
            "Student degrees of freedom must be positive, got {}",
            params.nu
        )));
    }
    let chol = Cholesky::factor(&params.scale, "Student scale matrix")
        .map_err(|e| CgnError::Domain(e.to_string()))?;
    let nu = params.nu;
    let mf = m as f64;
    let diff = x - &params.location;
    let quad = chol.inv_quad(&diff);
    Ok(ln_gamma(0.5 * (nu + mf))
        - ln_gamma(0.5 * nu)
        - 0.5 * mf * (PI * nu).ln()
        - 0.5 * chol.ln_det()
        - 0.5 * (nu + mf) * (quad / nu).ln_1p())
}

/// Univariate shorthand for [`log_mv_student`].
pub fn log_student(y: f64, nu: f64, location: f64, scale: f64) -> Result<f64> {
    log_mv_student(
        &DVector::from_element(1, y),
        &StudentParams::univariate(nu, location, scale),
    )
}

/// Adds observed category counts to the Dirichlet pseudo-counts.
pub fn dirichlet_posterior(prior: &DirichletParams, counts: &[u64]) -> Result<DirichletParams> {
    if counts.len() != prior.len() {
        return Err(CgnError::Contract(format!(
            "{} counts for a Dirichlet over {} categories",
            counts.len(),
            prior.len()
        )));
    }
    Ok(DirichletParams {
        psi: prior
            .psi
            .iter()
            .zip(counts)
            .map(|(p, &c)| p + c as f64)
            .collect(),
    })
}

/// Predictive distribution of one draw: the normalized pseudo-counts.
pub fn multinomial_predictive(psi: &DirichletParams) -> MultinomialParams {
    let total = psi.total();
    MultinomialParams {
        theta: psi.psi.iter().map(|p| p / total).collect(),
    }
}

/// Cross products of a regression sample: `ZᵀZ`, `Zᵀy`, `yᵀy`, `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionMoments {
    pub ztz: DMatrix<f64>,
    pub zty: DVector<f64>,
    pub yty: f64,
    pub n: usize,
}

impl RegressionMoments {
    pub fn zeros(p: usize) -> Self {
        Self {
            ztz: DMatrix::zeros(p, p),
            zty: DVector::zeros(p),
            yty: 0.0,
            n: 0,
        }
    }

    pub fn from_design(z: &DMatrix<f64>, y: &DVector<f64>) -> Result<Self> {
        if z.nrows() != y.len() {
            return Err(CgnError::Contract(format!(
                "design has {} rows but there are {} responses",
                z.nrows(),
                y.len()
            )));
        }
        Ok(Self {
            ztz: z.transpose() * z,
            zty: z.transpose() * y,
            yty: y.dot(y),
            n: y.len(),
        })
    }

    pub fn push(&mut self, z: &DVector<f64>, y: f64) {
        self.ztz.ger(1.0, z, z, 1.0);
        self.zty.axpy(y, z, 1.0);
        self.yty += y * y;
        self.n += 1;
    }
}

/// NIG posterior after observing responses `y` with design rows `z`.
pub fn nig_posterior(prior: &NigParams, z: &DMatrix<f64>, y: &DVector<f64>) -> Result<NigParams> {
    if z.ncols() != prior.dim() && z.nrows() > 0 {
        return Err(CgnError::Contract(format!(
            "design has {} columns, prior has dimension {}",
            z.ncols(),
            prior.dim()
        )));
    }
    if z.nrows() == 0 {
        if !y.is_empty() {
            return Err(CgnError::Contract("responses without design rows".into()));
        }
        return Ok(prior.clone());
    }
    nig_posterior_from_moments(prior, &RegressionMoments::from_design(z, y)?)
}

/// NIG posterior from the sufficient cross products of the sample.
pub fn nig_posterior_from_moments(prior: &NigParams, m: &RegressionMoments) -> Result<NigParams> {
    let p = prior.dim();
    if m.ztz.nrows() != p || m.zty.len() != p {
        return Err(CgnError::Contract(format!(
            "moments have dimension {}, prior has dimension {p}",
            m.zty.len()
        )));
    }
    if m.n == 0 {
        return Ok(prior.clone());
    }
    let v_chol = Cholesky::factor(&prior.v, "prior NIG scale")?;
    let v_inv = v_chol.inverse();
    let precision = symmetrize(&v_inv + &m.ztz);
    let post_chol = Cholesky::factor(&precision, "posterior NIG precision")?;
    let v_post = post_chol.inverse();
    let rhs = &v_inv * &prior.mu + &m.zty;
    let mu_post = post_chol.solve(&rhs);

    let prior_quad = v_chol.inv_quad(&prior.mu);
    let post_quad = mu_post.dot(&(&precision * &mu_post));
    let phi_post = prior.phi + 0.5 * (prior_quad + m.yty - post_quad);
    if !(phi_post > 0.0) {
        return Err(CgnError::NotPositiveDefinite {
            context: "posterior NIG rate".into(),
            pivot: 0,
            value: phi_post,
        });
    }
    Cholesky::factor(&v_post, "posterior NIG scale")?;
    Ok(NigParams {
        mu: mu_post,
        v: v_post,
        rho: prior.rho + 0.5 * m.n as f64,
        phi: phi_post,
    })
}

/// Predictive Student-t of a single response with regressor vector `z`.
pub fn nig_predictive(params: &NigParams, z: &DVector<f64>) -> Result<StudentParams> {
    if z.len() != params.dim() {
        return Err(CgnError::Contract(format!(
            "regressor vector has length {}, NIG has dimension {}",
            z.len(),
            params.dim()
        )));
    }
    let location = z.dot(&params.mu);
    let spread = 1.0 + z.dot(&(&params.v * z));
    Ok(StudentParams::univariate(
        2.0 * params.rho,
        location,
        params.phi / params.rho * spread,
    ))
}

/// Predictive Student-t of several responses with design matrix `z`.
pub fn nig_predictive_block(params: &NigParams, z: &DMatrix<f64>) -> Result<StudentParams> {
    if z.ncols() != params.dim() {
        return Err(CgnError::Contract(format!(
            "design has {} columns, NIG has dimension {}",
            z.ncols(),
            params.dim()
        )));
    }
    let m = z.nrows();
    let scale = (DMatrix::identity(m, m) + z * &params.v * z.transpose()) * (params.phi / params.rho);
    Ok(StudentParams {
        nu: 2.0 * params.rho,
        location: z * &params.mu,
        scale: symmetrize(scale),
    })
}
