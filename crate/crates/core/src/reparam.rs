//! Unconstrained coordinate charts over the bounded parameter space, one per
//! family, and the analytic gradient of the conditional classification
//! log-likelihood in those coordinates.
//!
//! Weights use a floored logit-simplex, means a per-coordinate logistic box
//! map, and covariances a log-eigenvalue box map (diagonal structures) or a
//! log-Cholesky chart (full structure, where the diagonal of the factor is
//! box-mapped and eigenvalue bounds are enforced by projection). The chart
//! dimension always equals the family's free-parameter count.

use nalgebra::{DMatrix, DVector};

use crate::contrast::{log_sum_exp, MixtureEvaluator};
use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::gaussian::LN_2PI;
use crate::model::{
    count_free_parameters, Component, CovarianceStructure, MixtureParams, ModelFamily, Proportions,
};
use crate::parallel;

fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

fn box_decode(u: f64, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * sigmoid(u)
}

fn box_encode(x: f64, lo: f64, hi: f64, strict: bool) -> Result<f64> {
    let f = (x - lo) / (hi - lo);
    let f = if strict {
        if f <= 0.0 || f >= 1.0 {
            return Err(Error::OnBoundary);
        }
        f
    } else {
        f.clamp(1e-12, 1.0 - 1e-12)
    };
    Ok((f / (1.0 - f)).ln())
}

/// d(box_decode)/du expressed through the decoded value.
fn box_chain(x: f64, lo: f64, hi: f64) -> f64 {
    (x - lo) * (hi - x) / (hi - lo)
}

/// Fixed coordinate chart for one `(family, K, d)` triple.
#[derive(Debug, Clone)]
pub struct Reparameterization {
    family: ModelFamily,
    n_components: usize,
    dim_data: usize,
}

impl Reparameterization {
    pub fn new(family: &ModelFamily, n_components: usize, dim_data: usize) -> Result<Self> {
        family.validate(n_components, dim_data)?;
        if family.proportions == Proportions::Free
            && n_components > 1
            && family.bounds.prop_floor * n_components as f64 >= 1.0
        {
            return Err(Error::InvalidFamily(
                "free proportions need prop_floor * K < 1".into(),
            ));
        }
        Ok(Self {
            family: family.clone(),
            n_components,
            dim_data,
        })
    }

    pub fn n_coords(&self) -> usize {
        count_free_parameters(&self.family, self.n_components, self.dim_data)
    }

    fn n_weight_coords(&self) -> usize {
        match self.family.proportions {
            Proportions::Free => self.n_components - 1,
            Proportions::Equal => 0,
        }
    }

    fn mean_offset(&self) -> usize {
        self.n_weight_coords()
    }

    fn cov_offset(&self) -> usize {
        self.mean_offset() + self.n_components * self.dim_data
    }

    fn log_var_bounds(&self) -> (f64, f64) {
        (
            self.family.bounds.var_floor.ln(),
            self.family.bounds.var_ceil.ln(),
        )
    }

    /// Maps feasible parameters to chart coordinates. Fails with
    /// [`Error::OnBoundary`] when a box-mapped coordinate sits exactly on a
    /// bound, where the chart has no finite preimage.
    pub fn encode(&self, params: &MixtureParams) -> Result<Vec<f64>> {
        self.encode_inner(params, true)
    }

    /// Like [`encode`](Self::encode) but pulls boundary coordinates just
    /// inside; used by the optimizer after projection steps.
    pub(crate) fn encode_clamped(&self, params: &MixtureParams) -> Vec<f64> {
        self.encode_inner(params, false)
            .expect("clamped encoding cannot hit a boundary")
    }

    fn encode_inner(&self, params: &MixtureParams, strict: bool) -> Result<Vec<f64>> {
        let k = self.n_components;
        let d = self.dim_data;
        if params.n_components() != k || params.dim() != d {
            return Err(Error::DimensionMismatch(format!(
                "parameters are {}-component in dimension {}, chart expects K = {k}, d = {d}",
                params.n_components(),
                params.dim()
            )));
        }
        let mut coords = Vec::with_capacity(self.n_coords());

        if self.family.proportions == Proportions::Free && k > 1 {
            let floor = self.family.bounds.prop_floor;
            let c = 1.0 - floor * k as f64;
            let mut s: Vec<f64> = params.weights().iter().map(|w| (w - floor) / c).collect();
            for v in &mut s {
                if strict {
                    if *v <= 0.0 {
                        return Err(Error::OnBoundary);
                    }
                } else {
                    *v = v.max(1e-12);
                }
            }
            let log_last = s[k - 1].ln();
            for v in s.iter().take(k - 1) {
                coords.push(v.ln() - log_last);
            }
        }

        for comp in params.components() {
            for j in 0..d {
                let (lo, hi) = self.family.bounds.mean_box[j];
                coords.push(box_encode(comp.mean[j], lo, hi, strict)?);
            }
        }

        let (log_floor, log_ceil) = self.log_var_bounds();
        match self.family.structure {
            CovarianceStructure::Spherical => {
                for comp in params.components() {
                    let v = (0..d).map(|j| comp.covariance[(j, j)]).sum::<f64>() / d as f64;
                    coords.push(box_encode(v.ln(), log_floor, log_ceil, strict)?);
                }
            }
            CovarianceStructure::Diagonal => {
                for comp in params.components() {
                    for j in 0..d {
                        coords.push(box_encode(
                            comp.covariance[(j, j)].ln(),
                            log_floor,
                            log_ceil,
                            strict,
                        )?);
                    }
                }
            }
            CovarianceStructure::DiagonalEqualVolume => {
                let per_comp_logs: Vec<Vec<f64>> = params
                    .components()
                    .iter()
                    .map(|c| (0..d).map(|j| c.covariance[(j, j)].ln()).collect())
                    .collect();
                let volumes: Vec<f64> = per_comp_logs
                    .iter()
                    .map(|logs| logs.iter().sum::<f64>() / d as f64)
                    .collect();
                let log_volume = volumes.iter().sum::<f64>() / k as f64;
                coords.push(box_encode(log_volume, log_floor, log_ceil, strict)?);
                for (logs, volume) in per_comp_logs.iter().zip(&volumes) {
                    for j in 0..d - 1 {
                        coords.push(logs[j] - volume);
                    }
                }
            }
            CovarianceStructure::Full => {
                let (half_floor, half_ceil) = (0.5 * log_floor, 0.5 * log_ceil);
                for comp in params.components() {
                    let chol = nalgebra::Cholesky::new(comp.covariance.clone())
                        .ok_or(Error::NotPositiveDefinite)?;
                    let lower = chol.l();
                    for j in 0..d {
                        coords.push(box_encode(
                            lower[(j, j)].ln(),
                            half_floor,
                            half_ceil,
                            strict,
                        )?);
                        for i in (j + 1)..d {
                            coords.push(lower[(i, j)]);
                        }
                    }
                }
            }
        }
        debug_assert_eq!(coords.len(), self.n_coords());
        Ok(coords)
    }

    /// Maps chart coordinates back to mixture parameters.
    pub fn decode(&self, coords: &[f64]) -> Result<MixtureParams> {
        if coords.len() != self.n_coords() {
            return Err(Error::DimensionMismatch(format!(
                "{} coordinates, chart has {}",
                coords.len(),
                self.n_coords()
            )));
        }
        let k = self.n_components;
        let d = self.dim_data;

        let weights = match self.family.proportions {
            Proportions::Equal => vec![1.0 / k as f64; k],
            Proportions::Free => {
                if k == 1 {
                    vec![1.0]
                } else {
                    let floor = self.family.bounds.prop_floor;
                    let c = 1.0 - floor * k as f64;
                    let mut logits: Vec<f64> = coords[..k - 1].to_vec();
                    logits.push(0.0);
                    let lse = log_sum_exp(&logits);
                    logits.iter().map(|a| floor + c * (a - lse).exp()).collect()
                }
            }
        };

        let mut means = Vec::with_capacity(k);
        for ck in 0..k {
            let base = self.mean_offset() + ck * d;
            let mean = DVector::from_iterator(
                d,
                (0..d).map(|j| {
                    let (lo, hi) = self.family.bounds.mean_box[j];
                    box_decode(coords[base + j], lo, hi)
                }),
            );
            means.push(mean);
        }

        let (log_floor, log_ceil) = self.log_var_bounds();
        let cov_base = self.cov_offset();
        let mut covariances = Vec::with_capacity(k);
        match self.family.structure {
            CovarianceStructure::Spherical => {
                for ck in 0..k {
                    let v = box_decode(coords[cov_base + ck], log_floor, log_ceil).exp();
                    covariances.push(DMatrix::from_diagonal_element(d, d, v));
                }
            }
            CovarianceStructure::Diagonal => {
                for ck in 0..k {
                    let diag = DVector::from_iterator(
                        d,
                        (0..d).map(|j| {
                            box_decode(coords[cov_base + ck * d + j], log_floor, log_ceil).exp()
                        }),
                    );
                    covariances.push(DMatrix::from_diagonal(&diag));
                }
            }
            CovarianceStructure::DiagonalEqualVolume => {
                let log_volume = box_decode(coords[cov_base], log_floor, log_ceil);
                for ck in 0..k {
                    let base = cov_base + 1 + ck * (d - 1);
                    let mut shape = vec![0.0; d];
                    let mut sum = 0.0;
                    for j in 0..d - 1 {
                        shape[j] = coords[base + j];
                        sum += coords[base + j];
                    }
                    shape[d - 1] = -sum;
                    let diag =
                        DVector::from_iterator(d, shape.iter().map(|s| (log_volume + s).exp()));
                    covariances.push(DMatrix::from_diagonal(&diag));
                }
            }
            CovarianceStructure::Full => {
                let (half_floor, half_ceil) = (0.5 * log_floor, 0.5 * log_ceil);
                let per_comp = d * (d + 1) / 2;
                for ck in 0..k {
                    let mut idx = cov_base + ck * per_comp;
                    let mut lower = DMatrix::zeros(d, d);
                    for j in 0..d {
                        lower[(j, j)] = box_decode(coords[idx], half_floor, half_ceil).exp();
                        idx += 1;
                        for i in (j + 1)..d {
                            lower[(i, j)] = coords[idx];
                            idx += 1;
                        }
                    }
                    let cov = &lower * lower.transpose();
                    covariances.push((&cov + cov.transpose()) * 0.5);
                }
            }
        }

        let components = means
            .into_iter()
            .zip(covariances)
            .map(|(mean, covariance)| Component::new(mean, covariance))
            .collect();
        MixtureParams::new(weights, components)
    }

    /// Gradient of the conditional classification log-likelihood with respect
    /// to the chart coordinates, evaluated at `decode(coords)`.
    ///
    /// Writing `l_ik = log pi_k + log phi(x_i; omega_k)` and `tau` for the
    /// responsibilities, the contrast is `sum_ik tau_ik l_ik`, and its
    /// derivative along any parameter is `sum_ik w_ik dl_ik` with per-term
    /// weights `w_ik = tau_ik (1 + l_ik - sum_m tau_im l_im)`.
    pub fn lcc_gradient(&self, coords: &[f64], data: &DataMatrix) -> Result<Vec<f64>> {
        let params = self.decode(coords)?;
        if params.dim() != data.n_cols() {
            return Err(Error::DimensionMismatch(format!(
                "chart dimension {} does not match data with {} columns",
                params.dim(),
                data.n_cols()
            )));
        }
        data.check_finite()?;
        let eval = MixtureEvaluator::new(&params)?;
        let k = self.n_components;
        let d = self.dim_data;
        let full = self.family.structure == CovarianceStructure::Full;

        #[derive(Clone)]
        struct Acc {
            w_sum: Vec<f64>,
            mean: Vec<f64>,
            quad_diag: Vec<f64>,
            outer: Vec<f64>,
        }
        let acc = parallel::fold_chunks(
            data.n_rows(),
            |range| {
                let mut acc = Acc {
                    w_sum: vec![0.0; k],
                    mean: vec![0.0; k * d],
                    quad_diag: vec![0.0; k * d],
                    outer: vec![0.0; if full { k * d * d } else { 0 }],
                };
                let mut lj = vec![0.0; k];
                let mut delta = vec![0.0; k * d];
                let mut z = vec![0.0; k * d];
                let mut tau = vec![0.0; k];
                for i in range {
                    let x = data.row(i);
                    for ck in 0..k {
                        let dl = &mut delta[ck * d..(ck + 1) * d];
                        for j in 0..d {
                            dl[j] = x[j] - eval.means[ck][j];
                        }
                        let zl = &mut z[ck * d..(ck + 1) * d];
                        zl.copy_from_slice(dl);
                        eval.factors[ck].forward_solve(zl);
                        let quad: f64 = zl.iter().map(|v| v * v).sum();
                        lj[ck] = eval.log_weights[ck]
                            - 0.5 * (d as f64 * LN_2PI + eval.factors[ck].log_det() + quad);
                    }
                    let lse = log_sum_exp(&lj);
                    let mut l_bar = 0.0;
                    for ck in 0..k {
                        tau[ck] = (lj[ck] - lse).exp();
                        l_bar += tau[ck] * lj[ck];
                    }
                    for ck in 0..k {
                        let w = tau[ck] * (1.0 + lj[ck] - l_bar);
                        acc.w_sum[ck] += w;
                        let zl = &mut z[ck * d..(ck + 1) * d];
                        if full {
                            // u = Sigma^{-1} delta, via the two triangular solves
                            let mut u = zl.to_vec();
                            eval.factors[ck].backward_solve_transpose(&mut u);
                            for j in 0..d {
                                acc.mean[ck * d + j] += w * u[j];
                                for m in 0..d {
                                    acc.outer[ck * d * d + j * d + m] += w * u[j] * zl[m];
                                }
                            }
                        } else {
                            let dl = &delta[ck * d..(ck + 1) * d];
                            for j in 0..d {
                                let v = eval.factors[ck].lower()[(j, j)].powi(2);
                                acc.mean[ck * d + j] += w * dl[j] / v;
                                acc.quad_diag[ck * d + j] += w * dl[j] * dl[j];
                            }
                        }
                    }
                }
                acc
            },
            |mut a, b| {
                for (x, y) in a.w_sum.iter_mut().zip(&b.w_sum) {
                    *x += y;
                }
                for (x, y) in a.mean.iter_mut().zip(&b.mean) {
                    *x += y;
                }
                for (x, y) in a.quad_diag.iter_mut().zip(&b.quad_diag) {
                    *x += y;
                }
                for (x, y) in a.outer.iter_mut().zip(&b.outer) {
                    *x += y;
                }
                a
            },
        )
        .expect("data matrix has at least one row");

        let mut grad = vec![0.0; self.n_coords()];

        if self.family.proportions == Proportions::Free && k > 1 {
            let floor = self.family.bounds.prop_floor;
            let c = 1.0 - floor * k as f64;
            let weights = params.weights();
            let softmax: Vec<f64> = weights.iter().map(|w| (w - floor) / c).collect();
            let cross: f64 = (0..k)
                .map(|ck| acc.w_sum[ck] * softmax[ck] / weights[ck])
                .sum();
            for m in 0..k - 1 {
                grad[m] = c * softmax[m] * (acc.w_sum[m] / weights[m] - cross);
            }
        }

        for ck in 0..k {
            for j in 0..d {
                let (lo, hi) = self.family.bounds.mean_box[j];
                let mu = params.components()[ck].mean[j];
                grad[self.mean_offset() + ck * d + j] =
                    acc.mean[ck * d + j] * box_chain(mu, lo, hi);
            }
        }

        let (log_floor, log_ceil) = self.log_var_bounds();
        let cov_base = self.cov_offset();
        match self.family.structure {
            CovarianceStructure::Spherical => {
                for ck in 0..k {
                    let v = params.components()[ck].covariance[(0, 0)];
                    let quad: f64 = (0..d).map(|j| acc.quad_diag[ck * d + j]).sum();
                    let d_log_v = -0.5 * d as f64 * acc.w_sum[ck] + 0.5 * quad / v;
                    grad[cov_base + ck] = d_log_v * box_chain(v.ln(), log_floor, log_ceil);
                }
            }
            CovarianceStructure::Diagonal => {
                for ck in 0..k {
                    for j in 0..d {
                        let v = params.components()[ck].covariance[(j, j)];
                        let d_log_v = -0.5 * acc.w_sum[ck] + 0.5 * acc.quad_diag[ck * d + j] / v;
                        grad[cov_base + ck * d + j] =
                            d_log_v * box_chain(v.ln(), log_floor, log_ceil);
                    }
                }
            }
            CovarianceStructure::DiagonalEqualVolume => {
                let mut d_log: Vec<f64> = vec![0.0; k * d];
                for ck in 0..k {
                    for j in 0..d {
                        let v = params.components()[ck].covariance[(j, j)];
                        d_log[ck * d + j] =
                            -0.5 * acc.w_sum[ck] + 0.5 * acc.quad_diag[ck * d + j] / v;
                    }
                }
                let log_volume = (0..k)
                    .map(|ck| {
                        (0..d)
                            .map(|j| params.components()[ck].covariance[(j, j)].ln())
                            .sum::<f64>()
                            / d as f64
                    })
                    .sum::<f64>()
                    / k as f64;
                grad[cov_base] =
                    d_log.iter().sum::<f64>() * box_chain(log_volume, log_floor, log_ceil);
                for ck in 0..k {
                    for j in 0..d - 1 {
                        grad[cov_base + 1 + ck * (d - 1) + j] =
                            d_log[ck * d + j] - d_log[ck * d + d - 1];
                    }
                }
            }
            CovarianceStructure::Full => {
                let (half_floor, half_ceil) = (0.5 * log_floor, 0.5 * log_ceil);
                let per_comp = d * (d + 1) / 2;
                for ck in 0..k {
                    let lower = eval.factors[ck].lower();
                    let mut idx = cov_base + ck * per_comp;
                    for j in 0..d {
                        // dl/dL = (Sigma^{-1} delta) z^T - diag(1/L_jj)
                        let ljj = lower[(j, j)];
                        let g_l = acc.outer[ck * d * d + j * d + j] - acc.w_sum[ck] / ljj;
                        grad[idx] = g_l * ljj * box_chain(ljj.ln(), half_floor, half_ceil);
                        idx += 1;
                        for i in (j + 1)..d {
                            grad[idx] = acc.outer[ck * d * d + i * d + j];
                            idx += 1;
                        }
                    }
                }
            }
        }

        Ok(grad)
    }
}
