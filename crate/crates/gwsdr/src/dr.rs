//! Directional regularization: an eigenvector-alignment penalty that pushes
//! the significant directions of a classifier's reshaped parameter matrix
//! toward those of a fixed reference classifier.
//!
//! Parameters are flattened (layer by layer, weight rows row-major, then the
//! bias), zero-padded to the next square, and reshaped row-major into an
//! `n x n` matrix. Eigendecomposition is taken on the symmetric part
//! `(M + M^T)/2`, which guarantees a real orthonormal basis; eigenvectors are
//! sorted by descending |eigenvalue| and each column's sign is fixed so its
//! largest-magnitude entry is positive. The penalty is
//!
//!   L = || E_theta^T E_phi - I_k ||_F
//!
//! after flipping any column of `E_theta` whose diagonal product with
//! `E_phi` is negative (eigenvectors are only defined up to sign; without
//! the flip a pure sign change would be penalized).
//!
//! The analytic gradient uses first-order perturbation of simple symmetric
//! eigenvectors, `d e_i = sum_{j != i} (e_j^T dS e_i) / (l_i - l_j) e_j`,
//! chained through symmetrization and reshaping. Padding slots are not
//! parameters and receive no gradient. Sign choices are locally constant.

use nalgebra::{DMatrix, DVector};

use crate::classifier::{ce_loss, ClassifierModel};
use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};

/// Minimum eigenvalue separation for a stable first-order gradient.
pub const EIGENGAP_TOLERANCE: f64 = 1e-8;

/// Below this the penalty sits at its minimum and the (non-differentiable)
/// Frobenius norm gets a zero gradient.
const LOSS_FLOOR: f64 = 1e-12;

/// Reshaping and truncated-basis bundle for a (theta, phi) pair.
#[derive(Debug, Clone)]
pub struct DrContext {
    pub m_theta: DMatrix<f64>,
    pub m_phi: DMatrix<f64>,
    /// Truncated basis of theta, sign-aligned to phi's.
    pub e_theta_hat: DMatrix<f64>,
    pub e_phi_hat: DMatrix<f64>,
    pub k: usize,
    pub pad_count: usize,
    /// Per-column flip (+1/-1) applied to theta's basis during alignment.
    pub sign_alignment: Vec<f64>,
}

/// Flatten to the next square: `n = ceil(sqrt(P))`, row-major fill,
/// zero padding at the tail.
pub fn reshape_flat(params: &[f64]) -> (DMatrix<f64>, usize) {
    let p = params.len();
    assert!(p >= 1, "reshape needs at least one parameter");
    let n = (p as f64).sqrt().ceil() as usize;
    let pad = n * n - p;
    debug_assert!(pad < 2 * n - 1 || n == 1);
    let m = DMatrix::from_fn(n, n, |r, c| {
        let idx = r * n + c;
        if idx < p {
            params[idx]
        } else {
            0.0
        }
    });
    (m, pad)
}

pub fn reshape_params(model: &ClassifierModel) -> DMatrix<f64> {
    reshape_flat(&model.flat_params()).0
}

/// Full eigendecomposition of the symmetric part of `m`, sorted by
/// descending |eigenvalue|, each eigenvector's largest-|entry| made positive.
#[derive(Debug, Clone)]
pub struct SortedEigen {
    pub values: Vec<f64>,
    /// Column `i` is the eigenvector of `values[i]`.
    pub vectors: DMatrix<f64>,
}

pub fn sorted_eigen(m: &DMatrix<f64>) -> Result<SortedEigen> {
    if m.nrows() != m.ncols() {
        return Err(Error::ShapeMismatch(format!(
            "expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("matrix contains non-finite entries".into()));
    }
    let n = m.nrows();
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .abs()
            .partial_cmp(&eig.eigenvalues[a].abs())
            .unwrap()
            .then(a.cmp(&b))
    });

    let mut values = Vec::with_capacity(n);
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        values.push(eig.eigenvalues[src]);
        let col = eig.eigenvectors.column(src);
        let mut lead = 0;
        for r in 1..n {
            if col[r].abs() > col[lead].abs() {
                lead = r;
            }
        }
        let sign = if col[lead] < 0.0 { -1.0 } else { 1.0 };
        for r in 0..n {
            vectors[(r, dst)] = sign * col[r];
        }
    }
    Ok(SortedEigen { values, vectors })
}

/// First `k` significant eigenvectors of the symmetrized matrix, `n x k`.
pub fn significant_eigvecs(m: &DMatrix<f64>, k: usize) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    if k == 0 || k > n {
        return Err(Error::InvalidInput(format!("rank k={k} must be in 1..={n}")));
    }
    let eig = sorted_eigen(m)?;
    Ok(eig.vectors.columns(0, k).into_owned())
}

/// Flip columns of `e_theta` whose diagonal product with `e_phi` is negative.
/// Returns the aligned basis and the per-column signs.
fn align_columns(e_theta: &DMatrix<f64>, e_phi: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>) {
    let k = e_theta.ncols();
    let mut aligned = e_theta.clone();
    let mut signs = vec![1.0; k];
    for i in 0..k {
        if e_theta.column(i).dot(&e_phi.column(i)) < 0.0 {
            signs[i] = -1.0;
            for r in 0..aligned.nrows() {
                aligned[(r, i)] = -aligned[(r, i)];
            }
        }
    }
    (aligned, signs)
}

/// `|| A - I ||_F` for `A = E_theta^T E_phi` after sign alignment.
fn aligned_frobenius(e_theta: &DMatrix<f64>, e_phi: &DMatrix<f64>) -> f64 {
    let (aligned, _) = align_columns(e_theta, e_phi);
    let mut a = aligned.transpose() * e_phi;
    for i in 0..a.ncols() {
        a[(i, i)] -= 1.0;
    }
    a.norm()
}

pub fn dr_context(
    theta: &ClassifierModel,
    phi: &ClassifierModel,
    k: usize,
) -> Result<DrContext> {
    if theta.layer_sizes != phi.layer_sizes {
        return Err(Error::ShapeMismatch(
            "models must share layer sizes for directional regularization".into(),
        ));
    }
    let (m_theta, pad_count) = reshape_flat(&theta.flat_params());
    let (m_phi, _) = reshape_flat(&phi.flat_params());
    let e_theta = significant_eigvecs(&m_theta, k)?;
    let e_phi = significant_eigvecs(&m_phi, k)?;
    let (e_theta_hat, sign_alignment) = align_columns(&e_theta, &e_phi);
    Ok(DrContext {
        m_theta,
        m_phi,
        e_theta_hat,
        e_phi_hat: e_phi,
        k,
        pad_count,
        sign_alignment,
    })
}

/// The directional penalty for a model pair.
pub fn dr_loss(theta: &ClassifierModel, phi: &ClassifierModel, k: usize) -> Result<f64> {
    if theta.layer_sizes != phi.layer_sizes {
        return Err(Error::ShapeMismatch(
            "models must share layer sizes for directional regularization".into(),
        ));
    }
    let e_theta = significant_eigvecs(&reshape_params(theta), k)?;
    let e_phi = significant_eigvecs(&reshape_params(phi), k)?;
    Ok(aligned_frobenius(&e_theta, &e_phi))
}

/// Reject spectra where a first-order eigenvector gradient is unstable:
/// some top-k eigenvalue sits within tolerance of another eigenvalue
/// (perturbation denominators), or consecutive |eigenvalues| through the
/// truncation boundary are within tolerance (selection/order instability).
fn check_eigengap(values: &[f64], k: usize) -> Result<()> {
    let n = values.len();
    let mut min_gap = f64::INFINITY;
    for i in 0..k {
        for j in 0..n {
            if j != i {
                min_gap = min_gap.min((values[i] - values[j]).abs());
            }
        }
    }
    for i in 0..k.min(n - 1) {
        min_gap = min_gap.min((values[i].abs() - values[i + 1].abs()).abs());
    }
    if min_gap < EIGENGAP_TOLERANCE {
        return Err(Error::DegenerateSpectrum {
            gap: min_gap,
            tolerance: EIGENGAP_TOLERANCE,
        });
    }
    Ok(())
}

/// Penalty value and its gradient with respect to the flattened theta
/// parameters, given phi's precomputed truncated basis. Used per training
/// step; phi is fixed so its basis never changes.
pub fn loss_and_grad_flat(
    theta_flat: &[f64],
    e_phi: &DMatrix<f64>,
    k: usize,
) -> Result<(f64, Vec<f64>)> {
    let p_count = theta_flat.len();
    let (m, _) = reshape_flat(theta_flat);
    let n = m.nrows();
    if k == 0 || k > n {
        return Err(Error::InvalidInput(format!("rank k={k} must be in 1..={n}")));
    }
    if e_phi.nrows() != n || e_phi.ncols() != k {
        return Err(Error::ShapeMismatch(format!(
            "reference basis is {}x{}, expected {n}x{k}",
            e_phi.nrows(),
            e_phi.ncols()
        )));
    }
    let eig = sorted_eigen(&m)?;
    check_eigengap(&eig.values, k)?;

    let mut signs = vec![1.0; k];
    for i in 0..k {
        if eig.vectors.column(i).dot(&e_phi.column(i)) < 0.0 {
            signs[i] = -1.0;
        }
    }
    // G = A - I with A_ij = s_i (e_theta_i . e_phi_j).
    let mut g = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            g[(i, j)] = signs[i] * eig.vectors.column(i).dot(&e_phi.column(j));
        }
        g[(i, i)] -= 1.0;
    }
    let loss = g.norm();
    if loss < LOSS_FLOOR {
        return Ok((loss, vec![0.0; p_count]));
    }

    // dL/dS as a free matrix: Gamma = sum_i w_i e_i^T where
    // w_i = sum_{m != i} ((u_i . e_m) / (l_i - l_m)) e_m and
    // u_i = dL/d(e_theta_i) = (s_i / L) sum_j G_ij e_phi_j.
    let mut gamma = DMatrix::zeros(n, n);
    for i in 0..k {
        let mut u = DVector::zeros(n);
        for j in 0..k {
            u += e_phi.column(j) * (signs[i] / loss * g[(i, j)]);
        }
        let mut w = DVector::zeros(n);
        for m_idx in 0..n {
            if m_idx == i {
                continue;
            }
            let coef =
                u.dot(&eig.vectors.column(m_idx)) / (eig.values[i] - eig.values[m_idx]);
            w += eig.vectors.column(m_idx) * coef;
        }
        gamma += w * eig.vectors.column(i).transpose();
    }
    // Chain through S = (M + M^T)/2, then drop the padding tail.
    let dm = (&gamma + gamma.transpose()) * 0.5;
    let mut grad = Vec::with_capacity(p_count);
    'fill: for r in 0..n {
        for c in 0..n {
            if grad.len() == p_count {
                break 'fill;
            }
            grad.push(dm[(r, c)]);
        }
    }
    Ok((loss, grad))
}

/// Analytic gradient of the penalty with respect to theta's parameters.
/// Errors with a degenerate-spectrum diagnostic when the eigengap is below
/// tolerance; callers training with the penalty should skip it for that step.
pub fn dr_grad(theta: &ClassifierModel, phi: &ClassifierModel, k: usize) -> Result<Vec<f64>> {
    if theta.layer_sizes != phi.layer_sizes {
        return Err(Error::ShapeMismatch(
            "models must share layer sizes for directional regularization".into(),
        ));
    }
    let e_phi = significant_eigvecs(&reshape_params(phi), k)?;
    Ok(loss_and_grad_flat(&theta.flat_params(), &e_phi, k)?.1)
}

/// Cross-entropy over the batch plus `lambda` times the directional penalty.
pub fn total_loss(
    theta: &ClassifierModel,
    data: &LabeledDataset,
    ids: &[usize],
    phi: &ClassifierModel,
    lambda: f64,
    k: usize,
) -> Result<f64> {
    let ce = ce_loss(theta, data, ids)?;
    if lambda == 0.0 {
        return Ok(ce);
    }
    Ok(ce + lambda * dr_loss(theta, phi, k)?)
}
