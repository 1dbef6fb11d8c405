//! Polynomial link latency family.
//!
//! Every link shares one congestion multiplier `f(r) = 1 + sum_i beta_i r^i`
//! of the flow-to-capacity ratio; link travel time is
//! `t_a(x_a) = t_a0 * f(x_a / m_a)`. `f(0) = 1` pins travel time at free flow,
//! and nonnegative coefficients keep `f` nondecreasing on `r >= 0`.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::netcore::{FlowVector, NetError, Network};

#[derive(Debug, Error)]
pub enum LatencyError {
    #[error("coefficient vector must have at least two entries (degree >= 1)")]
    DegreeTooSmall,
    #[error("leading coefficient must be 1, got {0}")]
    LeadingCoefficientNotOne(f64),
    #[error("coefficient {index} is negative ({value}); latency must be nondecreasing")]
    NegativeCoefficient { index: usize, value: f64 },
    #[error("flow-to-capacity ratio is negative ({0})")]
    NegativeRatio(f64),
    #[error(transparent)]
    Net(#[from] NetError),
}

/// Coefficients `beta_0..beta_n` of the congestion multiplier, with
/// `beta_0 = 1` and `beta_i >= 0` for `i >= 1`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LatencyCoefficients {
    degree: usize,
    beta: Vec<f64>,
}

impl LatencyCoefficients {
    pub fn new(beta: Vec<f64>) -> Result<Self, LatencyError> {
        if beta.len() < 2 {
            return Err(LatencyError::DegreeTooSmall);
        }
        if beta[0] != 1.0 {
            return Err(LatencyError::LeadingCoefficientNotOne(beta[0]));
        }
        for (index, &value) in beta.iter().enumerate().skip(1) {
            if value < 0.0 || !value.is_finite() {
                return Err(LatencyError::NegativeCoefficient { index, value });
            }
        }
        Ok(LatencyCoefficients { degree: beta.len() - 1, beta })
    }

    /// Builds coefficients from the tail `beta_1..beta_n`, prepending
    /// `beta_0 = 1`. Entries within `clamp_tol` below zero are clamped to 0,
    /// absorbing solver-level rounding.
    pub fn from_tail(tail: &[f64], clamp_tol: f64) -> Result<Self, LatencyError> {
        let mut beta = Vec::with_capacity(tail.len() + 1);
        beta.push(1.0);
        for &b in tail {
            beta.push(if b < 0.0 && b >= -clamp_tol { 0.0 } else { b });
        }
        Self::new(beta)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// All coefficients including the leading 1.
    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    /// The free coefficients `beta_1..beta_n`.
    pub fn tail(&self) -> &[f64] {
        &self.beta[1..]
    }

    /// Zero-pads the coefficient vector up to `degree`. Errors if the
    /// current degree already exceeds it.
    pub fn padded_to(&self, degree: usize) -> Result<Self, LatencyError> {
        if self.degree > degree {
            return Err(LatencyError::DegreeTooSmall);
        }
        let mut beta = self.beta.clone();
        beta.resize(degree + 1, 0.0);
        Self::new(beta)
    }
}

/// Standard road-capacity multiplier `f(r) = 1 + 0.15 r^4`, padded with
/// zeros up to the requested degree.
pub fn bpr_coefficients(degree: usize) -> Result<LatencyCoefficients, LatencyError> {
    if degree < 4 {
        return Err(LatencyError::DegreeTooSmall);
    }
    let mut beta = vec![0.0; degree + 1];
    beta[0] = 1.0;
    beta[4] = 0.15;
    LatencyCoefficients::new(beta)
}

/// Evaluates the congestion multiplier at a flow-to-capacity ratio.
pub fn f_eval(coeffs: &LatencyCoefficients, ratio: f64) -> Result<f64, LatencyError> {
    if ratio < 0.0 || !ratio.is_finite() {
        return Err(LatencyError::NegativeRatio(ratio));
    }
    // Horner evaluation of the tail, then the constant 1.
    let mut acc = 0.0;
    for &b in coeffs.beta.iter().skip(1).rev() {
        acc = acc * ratio + b;
    }
    Ok(1.0 + acc * ratio)
}

/// Per-link travel times `t_a = t_a0 * f(x_a / m_a)`.
pub fn link_travel_time(
    net: &Network,
    coeffs: &LatencyCoefficients,
    flow: &FlowVector,
) -> Result<Vec<f64>, LatencyError> {
    if flow.len() != net.num_links() {
        return Err(NetError::DimensionMismatch(format!(
            "flow has {} entries for {} links",
            flow.len(),
            net.num_links()
        ))
        .into());
    }
    net.links()
        .iter()
        .enumerate()
        .map(|(pos, link)| {
            let f = f_eval(coeffs, flow.get(pos) / link.capacity)?;
            Ok(link.free_flow_time * f)
        })
        .collect()
}

/// Exact value of `sum_a integral_0^{x_a} t_a(s) ds`, using the closed-form
/// antiderivative of the polynomial latency.
pub fn potential(
    net: &Network,
    coeffs: &LatencyCoefficients,
    flow: &FlowVector,
) -> Result<f64, LatencyError> {
    if flow.len() != net.num_links() {
        return Err(NetError::DimensionMismatch(format!(
            "flow has {} entries for {} links",
            flow.len(),
            net.num_links()
        ))
        .into());
    }
    let mut total = 0.0;
    for (pos, link) in net.links().iter().enumerate() {
        let x = flow.get(pos);
        if x < 0.0 {
            return Err(LatencyError::NegativeRatio(x / link.capacity));
        }
        let ratio = x / link.capacity;
        // integral_0^x t0 (1 + sum_i b_i (s/m)^i) ds
        //   = t0 [ x + sum_i b_i m ratio^{i+1} / (i+1) ]
        let mut tail = 0.0;
        let mut r_pow = ratio;
        for (i, &b) in coeffs.beta.iter().enumerate().skip(1) {
            r_pow *= ratio;
            tail += b * r_pow / (i as f64 + 1.0);
        }
        total += link.free_flow_time * (x + link.capacity * tail);
    }
    Ok(total)
}

/// How the quadratic coefficient penalty weights each monomial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormWeighting {
    /// Weights from the polynomial kernel `(c + xy)^n` monomial expansion:
    /// the norm of `sum_i beta_i x^i` is `sum_i beta_i^2 / (C(n,i) c^{n-i})`.
    Kernel,
    /// Plain identity weighting.
    Identity,
}

/// Kernel and regularization settings for the coefficient-recovery program.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct KernelConfig {
    /// Polynomial degree `n >= 1`.
    pub degree: usize,
    /// Kernel offset `c > 0`.
    pub offset: f64,
    /// Regularization weight `gamma > 0`.
    pub gamma: f64,
    /// Norm realization; defaults to [`NormWeighting::Kernel`].
    #[serde(default = "default_weighting")]
    pub weighting: NormWeighting,
}

fn default_weighting() -> NormWeighting {
    NormWeighting::Kernel
}

impl KernelConfig {
    pub fn new(degree: usize, offset: f64, gamma: f64) -> Self {
        assert!(degree >= 1, "kernel degree must be at least 1");
        assert!(offset > 0.0, "kernel offset must be positive");
        assert!(gamma > 0.0, "regularization weight must be positive");
        KernelConfig { degree, offset, gamma, weighting: NormWeighting::Kernel }
    }

    pub fn with_weighting(mut self, weighting: NormWeighting) -> Self {
        self.weighting = weighting;
        self
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    let mut v = 1.0;
    for i in 0..k {
        v = v * (n - i) as f64 / (i + 1) as f64;
    }
    v
}

/// Positive definite penalty matrix over `beta_1..beta_n` realizing
/// `gamma * ||f||^2` for the configured weighting. Diagonal by construction.
pub fn rkhs_norm_matrix(cfg: &KernelConfig) -> DMatrix<f64> {
    let n = cfg.degree;
    let mut m = DMatrix::zeros(n, n);
    for i in 1..=n {
        let d = match cfg.weighting {
            NormWeighting::Kernel => 1.0 / (binomial(n, i) * cfg.offset.powi((n - i) as i32)),
            NormWeighting::Identity => 1.0,
        };
        m[(i - 1, i - 1)] = cfg.gamma * d;
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::braess_network;
    use crate::netcore::Network;

    #[test]
    fn f_eval_examples() {
        let linear = LatencyCoefficients::new(vec![1.0, 1.0]).unwrap();
        assert_eq!(f_eval(&linear, 0.0).unwrap(), 1.0);

        let bpr6 = LatencyCoefficients::new(vec![1.0, 0.0, 0.0, 0.0, 0.15, 0.0]).unwrap();
        assert!((f_eval(&bpr6, 1.0).unwrap() - 1.15).abs() < 1e-15);

        let steep = LatencyCoefficients::new(vec![1.0, 1.45]).unwrap();
        assert!((f_eval(&steep, 2.0).unwrap() - 3.9).abs() < 1e-15);
    }

    #[test]
    fn f_eval_rejects_negative_ratio() {
        let c = LatencyCoefficients::new(vec![1.0, 1.0]).unwrap();
        assert!(matches!(f_eval(&c, -0.5), Err(LatencyError::NegativeRatio(_))));
    }

    #[test]
    fn coefficient_invariants() {
        assert!(matches!(
            LatencyCoefficients::new(vec![1.0]),
            Err(LatencyError::DegreeTooSmall)
        ));
        assert!(matches!(
            LatencyCoefficients::new(vec![2.0, 1.0]),
            Err(LatencyError::LeadingCoefficientNotOne(_))
        ));
        assert!(matches!(
            LatencyCoefficients::new(vec![1.0, -0.1]),
            Err(LatencyError::NegativeCoefficient { index: 1, .. })
        ));
        let clamped = LatencyCoefficients::from_tail(&[1.0, -1e-12], 1e-9).unwrap();
        assert_eq!(clamped.tail(), &[1.0, 0.0]);
    }

    #[test]
    fn travel_time_at_zero_flow_is_free_flow() {
        let net = braess_network();
        let coeffs = LatencyCoefficients::new(vec![1.0, 1.0]).unwrap();
        let t = link_travel_time(&net, &coeffs, &FlowVector::zeros(5)).unwrap();
        assert_eq!(t, net.free_flow_times());
    }

    #[test]
    fn travel_time_hand_examples() {
        let net = Network::build(&[(1, 2, 1.0, 100.0), (2, 1, 10.0, 50.0)]).unwrap();
        let linear = LatencyCoefficients::new(vec![1.0, 1.0]).unwrap();
        let t = link_travel_time(&net, &linear, &FlowVector::new(vec![100.0, 0.0])).unwrap();
        assert!((t[0] - 2.0).abs() < 1e-15);

        let bpr = bpr_coefficients(4).unwrap();
        let t = link_travel_time(&net, &bpr, &FlowVector::new(vec![0.0, 50.0])).unwrap();
        assert!((t[1] - 11.5).abs() < 1e-12);
    }

    #[test]
    fn bpr_coefficient_layout() {
        assert_eq!(bpr_coefficients(5).unwrap().beta(), &[1.0, 0.0, 0.0, 0.0, 0.15, 0.0]);
        assert_eq!(bpr_coefficients(4).unwrap().beta(), &[1.0, 0.0, 0.0, 0.0, 0.15]);
        assert!(matches!(bpr_coefficients(3), Err(LatencyError::DegreeTooSmall)));
    }

    #[test]
    fn potential_closed_form() {
        let net = Network::build(&[(1, 2, 1.0, 1.0), (2, 1, 1.0, 1.0)]).unwrap();
        let linear = LatencyCoefficients::new(vec![1.0, 1.0]).unwrap();
        assert_eq!(potential(&net, &linear, &FlowVector::zeros(2)).unwrap(), 0.0);
        // One link with t(s) = 1 + s carrying flow 2: integral = 2 + 4/2 = 4.
        let v = potential(&net, &linear, &FlowVector::new(vec![2.0, 0.0])).unwrap();
        assert!((v - 4.0).abs() < 1e-15);
    }

    #[test]
    fn potential_gradient_is_travel_time() {
        let net = braess_network();
        let coeffs = LatencyCoefficients::new(vec![1.0, 0.3, 0.0, 0.2, 0.15]).unwrap();
        let flow = FlowVector::new(vec![1200.0, 900.0, 300.0, 2500.0, 100.0]);
        let t = link_travel_time(&net, &coeffs, &flow).unwrap();
        let h = 1e-3;
        for a in 0..net.num_links() {
            let mut up = flow.clone();
            up.set(a, flow.get(a) + h);
            let mut dn = flow.clone();
            dn.set(a, flow.get(a) - h);
            let fd = (potential(&net, &coeffs, &up).unwrap()
                - potential(&net, &coeffs, &dn).unwrap())
                / (2.0 * h);
            assert!(
                (fd - t[a]).abs() <= 1e-6 * t[a].abs(),
                "link {a}: finite difference {fd} vs travel time {}",
                t[a]
            );
        }
    }

    #[test]
    fn norm_matrix_identity_realization() {
        let cfg = KernelConfig::new(2, 30.0, 1.0).with_weighting(NormWeighting::Identity);
        let m = rkhs_norm_matrix(&cfg);
        assert_eq!(m, DMatrix::identity(2, 2));
    }

    #[test]
    fn norm_matrix_scales_linearly_in_gamma() {
        let base = rkhs_norm_matrix(&KernelConfig::new(5, 30.0, 1.0));
        let scaled = rkhs_norm_matrix(&KernelConfig::new(5, 30.0, 30.0));
        assert_eq!(scaled, base * 30.0);
    }

    #[test]
    fn norm_matrix_is_positive_definite_up_to_degree_ten() {
        for n in 1..=10 {
            let m = rkhs_norm_matrix(&KernelConfig::new(n, 30.0, 1.0));
            let eig = m.symmetric_eigen();
            let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
            assert!(min > 0.0, "degree {n}: smallest eigenvalue {min}");
        }
    }

    #[test]
    fn kernel_weighting_matches_binomial_expansion() {
        // (c + xy)^n expands with monomial weights C(n,i) c^{n-i}; the norm
        // matrix holds their reciprocals.
        let cfg = KernelConfig::new(3, 2.0, 1.0);
        let m = rkhs_norm_matrix(&cfg);
        assert!((m[(0, 0)] - 1.0 / (3.0 * 4.0)).abs() < 1e-15);
        assert!((m[(1, 1)] - 1.0 / (3.0 * 2.0)).abs() < 1e-15);
        assert!((m[(2, 2)] - 1.0).abs() < 1e-15);
    }
}
