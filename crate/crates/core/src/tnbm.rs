//! Matrix-product-state Born machine.
//!
//! The model stores one order-3 tensor per site, kept in mixed-canonical form
//! with a unit-norm center tensor so the Born-rule distribution is normalized
//! by construction. Training is a DMRG-like sweep: merge two adjacent sites,
//! take one SGD step of the (optionally weighted) negative log-likelihood,
//! split back with a truncated SVD, renormalize, and move the center.

use nalgebra::{DMatrix, RowDVector, SVD};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bitcore::{Bitstring, SampleMultiset};
use crate::error::{Error, Result};
use crate::tasks::TrainingSet;

/// Probability floor inside the training log so exact zeros surface as a
/// diagnosable divergence instead of NaN.
const PROB_FLOOR: f64 = 1e-300;

/// One MPS site: `mats[s]` is the (left_bond x right_bond) matrix for
/// physical value `s`.
type Site = [DMatrix<f64>; 2];

#[derive(Debug, Clone)]
pub struct MpsModel {
    sites: Vec<Site>,
    center: usize,
    max_bond: usize,
}

/// Training hyperparameters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TnbmTrainConfig {
    pub max_bond: usize,
    pub learning_rate: f64,
    pub n_epochs: usize,
    /// Relative singular-value threshold: values below
    /// `svd_cutoff * sigma_max` are dropped at each split.
    pub svd_cutoff: f64,
    pub seed: u64,
}

impl Default for TnbmTrainConfig {
    fn default() -> Self {
        Self {
            max_bond: 7,
            learning_rate: 3e-3,
            n_epochs: 100,
            svd_cutoff: 1e-2,
            seed: 0,
        }
    }
}

fn bond_cap(n: usize, j: usize, max_bond: usize) -> usize {
    let left = if j >= 31 { usize::MAX } else { 1usize << j };
    let right = if n - j >= 31 { usize::MAX } else { 1usize << (n - j) };
    max_bond.min(left).min(right)
}

/// Random MPS, canonicalized and normalized; deterministic in `seed`.
pub fn init_mps(n: usize, max_bond: usize, seed: u64) -> Result<MpsModel> {
    if n < 2 {
        return Err(Error::InvalidParam(format!("MPS needs N >= 2, got {n}")));
    }
    if max_bond < 1 {
        return Err(Error::InvalidParam("max_bond must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sites = Vec::with_capacity(n);
    for i in 0..n {
        let l = bond_cap(n, i, max_bond);
        let r = bond_cap(n, i + 1, max_bond);
        let mut site = [DMatrix::zeros(l, r), DMatrix::zeros(l, r)];
        for mat in site.iter_mut() {
            for v in mat.iter_mut() {
                *v = rng.gen_range(-0.5..0.5);
            }
        }
        sites.push(site);
    }
    let mut m = MpsModel {
        sites,
        center: n - 1,
        max_bond,
    };
    m.canonicalize_to(0);
    m.normalize_center();
    Ok(m)
}

impl MpsModel {
    pub fn n_sites(&self) -> usize {
        self.sites.len()
    }

    pub fn max_bond(&self) -> usize {
        self.max_bond
    }

    pub fn gauge_center(&self) -> usize {
        self.center
    }

    /// Bond dimensions including the trivial boundaries (length N + 1).
    pub fn bond_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.sites[0][0].nrows()];
        for site in &self.sites {
            dims.push(site[0].ncols());
        }
        dims
    }

    /// Total number of stored tensor entries (both physical slices).
    pub fn param_count(&self) -> usize {
        self.sites.iter().map(|s| 2 * s[0].len()).sum()
    }

    /// Raw wavefunction amplitude by left-to-right contraction. Only equals a
    /// Born amplitude up to the global norm; `prob` assumes canonical form.
    pub fn amplitude(&self, x: Bitstring) -> f64 {
        debug_assert_eq!(x.width(), self.n_sites());
        let mut v = RowDVector::from_element(1, 1.0);
        for (i, site) in self.sites.iter().enumerate() {
            v = &v * &site[x.bit(i) as usize];
        }
        v[0]
    }

    /// Born-rule probability; requires the model to be canonical-normalized.
    pub fn prob(&self, x: Bitstring) -> Result<f64> {
        if x.width() != self.n_sites() {
            return Err(Error::WidthMismatch {
                expected: self.n_sites(),
                got: x.width(),
            });
        }
        let a = self.amplitude(x);
        Ok(a * a)
    }

    /// Exact probability of every bitstring in encoding order.
    pub fn full_distribution(&self) -> Result<Vec<f64>> {
        let n = self.n_sites();
        if n > 24 {
            return Err(Error::SpaceTooLarge(1u64 << n));
        }
        let mut out = vec![0.0; 1 << n];
        let root = RowDVector::from_element(1, 1.0);
        self.dfs_probs(0, 0, &root, &mut out);
        Ok(out)
    }

    fn dfs_probs(&self, site: usize, prefix: u32, v: &RowDVector<f64>, out: &mut [f64]) {
        if site == self.n_sites() {
            out[prefix as usize] = v[0] * v[0];
            return;
        }
        for s in 0..2u32 {
            let u = v * &self.sites[site][s as usize];
            // bit `site` is the low end of the encoding at position `site`
            self.dfs_probs(site + 1, prefix | (s << site), &u, out);
        }
    }

    fn normalize_center(&mut self) {
        let c = self.center;
        let norm = (self.sites[c][0].norm_squared() + self.sites[c][1].norm_squared()).sqrt();
        if norm > 0.0 {
            self.sites[c][0] /= norm;
            self.sites[c][1] /= norm;
        }
    }

    /// Moves the center one site to the right via thin QR (site becomes
    /// left-canonical).
    fn shift_center_right(&mut self) {
        let i = self.center;
        assert!(i + 1 < self.n_sites());
        let (l, r) = (self.sites[i][0].nrows(), self.sites[i][0].ncols());
        // rows indexed by (s, l): row = s * l_dim + l
        let mut m = DMatrix::zeros(2 * l, r);
        for s in 0..2 {
            m.view_mut((s * l, 0), (l, r)).copy_from(&self.sites[i][s]);
        }
        let qr = m.qr();
        let q = qr.q();
        let rr = qr.r();
        let new_r = q.ncols();
        for s in 0..2 {
            self.sites[i][s] = q.view((s * l, 0), (l, new_r)).into();
        }
        for s in 0..2 {
            self.sites[i + 1][s] = &rr * &self.sites[i + 1][s];
        }
        self.center = i + 1;
    }

    /// Moves the center one site to the left via LQ (site becomes
    /// right-canonical).
    fn shift_center_left(&mut self) {
        let i = self.center;
        assert!(i > 0);
        let (l, r) = (self.sites[i][0].nrows(), self.sites[i][0].ncols());
        // columns indexed by (s, r): col = s * r_dim + r
        let mut m = DMatrix::zeros(l, 2 * r);
        for s in 0..2 {
            m.view_mut((0, s * r), (l, r)).copy_from(&self.sites[i][s]);
        }
        let qr = m.transpose().qr();
        let q_t = qr.q().transpose(); // orthonormal rows
        let l_mat = qr.r().transpose();
        let new_l = q_t.nrows();
        for s in 0..2 {
            self.sites[i][s] = q_t.view((0, s * r), (new_l, r)).into();
        }
        for s in 0..2 {
            self.sites[i - 1][s] = &self.sites[i - 1][s] * &l_mat;
        }
        self.center = i - 1;
    }

    pub fn canonicalize_to(&mut self, target: usize) {
        assert!(target < self.n_sites());
        while self.center < target {
            self.shift_center_right();
        }
        while self.center > target {
            self.shift_center_left();
        }
    }

    /// Contracts sites `i` and `i + 1` into the merged two-site tensor.
    fn merge_pair(&self, i: usize) -> [[DMatrix<f64>; 2]; 2] {
        let a = &self.sites[i];
        let b = &self.sites[i + 1];
        [
            [&a[0] * &b[0], &a[0] * &b[1]],
            [&a[1] * &b[0], &a[1] * &b[1]],
        ]
    }

    /// Splits a merged tensor back into two sites by truncated SVD and leaves
    /// the center on `i` (move left) or `i + 1` (move right). The kept
    /// singular values are renormalized so the state stays unit norm.
    fn split_pair(&mut self, i: usize, theta: &[[DMatrix<f64>; 2]; 2], move_right: bool, cutoff: f64) {
        let l = theta[0][0].nrows();
        let r = theta[0][0].ncols();
        let mut m = DMatrix::zeros(2 * l, 2 * r);
        for s1 in 0..2 {
            for s2 in 0..2 {
                m.view_mut((s1 * l, s2 * r), (l, r)).copy_from(&theta[s1][s2]);
            }
        }
        let (u, sigma, v_t) = robust_svd(m);

        let mut order: Vec<usize> = (0..sigma.len()).collect();
        order.sort_by(|&a, &b| sigma[b].partial_cmp(&sigma[a]).unwrap());
        let smax = sigma[order[0]].max(f64::MIN_POSITIVE);
        let mut keep: Vec<usize> = order
            .into_iter()
            .take(self.max_bond)
            .filter(|&j| sigma[j] / smax >= cutoff)
            .collect();
        if keep.is_empty() {
            keep.push(0);
        }
        let k = keep.len();

        let mut kept_sigma = Vec::with_capacity(k);
        let mut u_k = DMatrix::zeros(2 * l, k);
        let mut v_k = DMatrix::zeros(k, 2 * r);
        for (col, &j) in keep.iter().enumerate() {
            kept_sigma.push(sigma[j]);
            u_k.set_column(col, &u.column(j));
            v_k.set_row(col, &v_t.row(j));
        }
        let snorm = kept_sigma.iter().map(|s| s * s).sum::<f64>().sqrt();
        let sig = DMatrix::from_fn(k, k, |a, b| {
            if a == b {
                kept_sigma[a] / snorm
            } else {
                0.0
            }
        });

        if move_right {
            for s1 in 0..2 {
                self.sites[i][s1] = u_k.view((s1 * l, 0), (l, k)).into();
            }
            let c = &sig * &v_k;
            for s2 in 0..2 {
                self.sites[i + 1][s2] = c.view((0, s2 * r), (k, r)).into();
            }
            self.center = i + 1;
        } else {
            let c = &u_k * &sig;
            for s1 in 0..2 {
                self.sites[i][s1] = c.view((s1 * l, 0), (l, k)).into();
            }
            for s2 in 0..2 {
                self.sites[i + 1][s2] = v_k.view((0, s2 * r), (k, r)).into();
            }
            self.center = i;
        }
    }

    /// Draws Q exact samples by sequential conditional sampling.
    pub fn sample(&self, q: u64, seed: u64) -> Result<SampleMultiset> {
        let n = self.n_sites();
        let mut model;
        let m = if self.center == 0 {
            self
        } else {
            model = self.clone();
            model.canonicalize_to(0);
            model.normalize_center();
            &model
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = SampleMultiset::new(n);
        for _ in 0..q {
            let mut v = RowDVector::from_element(1, 1.0);
            let mut bits = 0u32;
            for i in 0..n {
                let u0 = &v * &m.sites[i][0];
                let u1 = &v * &m.sites[i][1];
                let w0 = u0.norm_squared();
                let w1 = u1.norm_squared();
                let p1 = w1 / (w0 + w1);
                let s = if rng.gen::<f64>() < p1 { 1 } else { 0 };
                bits |= (s as u32) << i;
                v = if s == 1 { u1 } else { u0 };
                let norm = v.norm();
                if norm > 0.0 {
                    v /= norm;
                }
            }
            out.insert(Bitstring::new(n, bits))?;
        }
        Ok(out)
    }

    pub fn save_checkpoint(&self, path: &std::path::Path) -> Result<()> {
        let ckpt = MpsCheckpoint::from_model(self);
        let json = serde_json::to_string(&ckpt)?;
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load_checkpoint(path: &std::path::Path) -> Result<Self> {
        let json = std::fs::read_to_string(path)?;
        let ckpt: MpsCheckpoint = serde_json::from_str(&json)?;
        ckpt.into_model()
    }
}

/// Versioned checkpoint container. Tensor entries are stored per site in
/// (physical, left bond, right bond) order, row-major over the bonds.
#[derive(Debug, Serialize, Deserialize)]
pub struct MpsCheckpoint {
    pub format_version: u32,
    pub n_sites: usize,
    pub max_bond: usize,
    pub gauge_center: usize,
    pub bond_dims: Vec<usize>,
    pub tensors: Vec<Vec<f64>>,
}

pub const MPS_CHECKPOINT_VERSION: u32 = 1;

impl MpsCheckpoint {
    fn from_model(m: &MpsModel) -> Self {
        let bond_dims = m.bond_dims();
        let tensors = m
            .sites
            .iter()
            .map(|site| {
                let mut data = Vec::with_capacity(2 * site[0].len());
                for s in 0..2 {
                    for row in 0..site[s].nrows() {
                        for col in 0..site[s].ncols() {
                            data.push(site[s][(row, col)]);
                        }
                    }
                }
                data
            })
            .collect();
        Self {
            format_version: MPS_CHECKPOINT_VERSION,
            n_sites: m.n_sites(),
            max_bond: m.max_bond,
            gauge_center: m.center,
            bond_dims,
            tensors,
        }
    }

    fn into_model(self) -> Result<MpsModel> {
        if self.format_version != MPS_CHECKPOINT_VERSION {
            return Err(Error::Parse(format!(
                "unsupported checkpoint version {}",
                self.format_version
            )));
        }
        if self.bond_dims.len() != self.n_sites + 1 || self.tensors.len() != self.n_sites {
            return Err(Error::Parse("inconsistent checkpoint shape".into()));
        }
        let mut sites = Vec::with_capacity(self.n_sites);
        for (i, data) in self.tensors.iter().enumerate() {
            let (l, r) = (self.bond_dims[i], self.bond_dims[i + 1]);
            if data.len() != 2 * l * r {
                return Err(Error::Parse(format!("site {i} entry count mismatch")));
            }
            let mut site = [DMatrix::zeros(l, r), DMatrix::zeros(l, r)];
            let mut it = data.iter();
            for s in 0..2 {
                for row in 0..l {
                    for col in 0..r {
                        site[s][(row, col)] = *it.next().unwrap();
                    }
                }
            }
            sites.push(site);
        }
        Ok(MpsModel {
            sites,
            center: self.gauge_center,
            max_bond: self.max_bond,
        })
    }
}

/// Thin SVD with a correctness check. nalgebra's Golub-Kahan SVD can return
/// an inaccurate factorization for some rank-deficient matrices; when the
/// reconstruction residual is large we recompute from a symmetric
/// eigendecomposition of the smaller Gram matrix, which is reliable here
/// (singular values below ~1e-9 of the largest are treated as exact zeros).
fn robust_svd(
    m: DMatrix<f64>,
) -> (
    DMatrix<f64>,
    nalgebra::DVector<f64>,
    DMatrix<f64>,
) {
    let m0 = m.clone();
    let svd = SVD::new(m, true, true);
    let u = svd.u.expect("svd u");
    let v_t = svd.v_t.expect("svd v_t");
    let sigma = svd.singular_values;
    let residual = (&u * DMatrix::from_diagonal(&sigma) * &v_t - &m0).norm();
    if residual <= 1e-10 * m0.norm().max(1.0) {
        return (u, sigma, v_t);
    }

    let (rows, cols) = (m0.nrows(), m0.ncols());
    let k = rows.min(cols);
    let wide = cols < rows;
    // eigendecompose the smaller Gram matrix
    let gram = if wide {
        m0.transpose() * &m0
    } else {
        &m0 * m0.transpose()
    };
    let eig = nalgebra::SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    let mut u2 = DMatrix::zeros(rows, k);
    let mut v_t2 = DMatrix::zeros(k, cols);
    let mut sigma2 = nalgebra::DVector::zeros(k);
    let smax = eig.eigenvalues[order[0]].max(0.0).sqrt();
    for (j, &e) in order.iter().enumerate() {
        let s = eig.eigenvalues[e].max(0.0).sqrt();
        if s <= 1e-9 * smax {
            continue; // numerically zero: leave zero columns/rows
        }
        sigma2[j] = s;
        let w = eig.eigenvectors.column(e);
        if wide {
            v_t2.row_mut(j).copy_from(&w.transpose());
            u2.column_mut(j).copy_from(&(&m0 * w / s));
        } else {
            u2.column_mut(j).copy_from(&w);
            v_t2.row_mut(j).copy_from(&(w.transpose() * &m0 / s));
        }
    }
    (u2, sigma2, v_t2)
}

/// NLL gradient of the merged two-site tensor in mixed-canonical gauge:
/// grad = 2 * [theta / |theta|^2 - sum_t w_t * E_t / psi_t] where E_t is the
/// outer product of the sample's left and right environments at the bond.
fn pair_gradient(
    theta: &[[DMatrix<f64>; 2]; 2],
    samples: &[(Vec<u8>, f64)],
    left: &[RowDVector<f64>],
    right: &[Vec<nalgebra::DVector<f64>>],
    site: usize,
) -> Result<([[DMatrix<f64>; 2]; 2], f64)> {
    let l = theta[0][0].nrows();
    let r = theta[0][0].ncols();
    let norm_sq: f64 = theta.iter().flatten().map(|m| m.norm_squared()).sum();
    let mut grad = [
        [
            &theta[0][0] * (2.0 / norm_sq),
            &theta[0][1] * (2.0 / norm_sq),
        ],
        [
            &theta[1][0] * (2.0 / norm_sq),
            &theta[1][1] * (2.0 / norm_sq),
        ],
    ];
    let mut nll = 0.0;
    for (t, (bits, w)) in samples.iter().enumerate() {
        let s1 = bits[site] as usize;
        let s2 = bits[site + 1] as usize;
        let lv = &left[t];
        let rv = &right[t][site + 2];
        let psi = (lv * &theta[s1][s2] * rv)[(0, 0)];
        let p = (psi * psi / norm_sq).max(PROB_FLOOR);
        if p <= PROB_FLOOR {
            return Err(Error::TrainingDiverged(format!(
                "sample probability hit the floor at bond {site}"
            )));
        }
        nll -= w * p.ln();
        let scale = 2.0 * w / psi;
        // rank-1 update: grad[s1][s2] -= scale * l^T r^T
        for a in 0..l {
            for b in 0..r {
                grad[s1][s2][(a, b)] -= scale * lv[a] * rv[b];
            }
        }
    }
    Ok((grad, nll))
}

/// Data-driven initialization: the maximum-entropy wavefunction consistent
/// with the empirical Hamming-weight histogram of the training set. Strings
/// of weight w get probability h_w / C(N, w), where h_w is the (weighted)
/// fraction of training samples with weight w. This count-based prior is the
/// natural coarse backbone for bitstring data; DMRG training then refines the
/// structure within and across weight sectors. Deterministic.
pub fn init_mps_from_histogram(train: &TrainingSet, max_bond: usize) -> Result<MpsModel> {
    let n = train.space().width();
    if n < 2 {
        return Err(Error::InvalidParam(format!("MPS needs N >= 2, got {n}")));
    }
    if max_bond < 1 {
        return Err(Error::InvalidParam("max_bond must be >= 1".into()));
    }
    if train.is_empty() {
        return Err(Error::InvalidParam("empty training set".into()));
    }
    let mut hist = vec![0.0f64; n + 1];
    for x in train.samples().keys() {
        let w: usize = (0..n).map(|i| x.bit(i) as usize).sum();
        hist[w] += train.weight_of(x);
    }
    let w_max = (0..=n).rev().find(|&w| hist[w] > 0.0).unwrap_or(0);
    // amplitude for a weight-w string: sqrt(h_w / C(n, w))
    let binom = |w: usize| -> f64 {
        let mut b = 1.0f64;
        for j in 0..w {
            b = b * (n - j) as f64 / (j + 1) as f64;
        }
        b
    };
    let amp: Vec<f64> = (0..=w_max).map(|w| (hist[w] / binom(w)).sqrt()).collect();
    // count-tracking MPS: bond index = number of ones seen so far
    let mut sites = Vec::with_capacity(n);
    for i in 0..n {
        let l = if i == 0 { 1 } else { i.min(w_max) + 1 };
        if i + 1 < n {
            let r = (i + 1).min(w_max) + 1;
            let mut site = [DMatrix::zeros(l, r), DMatrix::zeros(l, r)];
            for c in 0..l {
                site[0][(c, c)] = 1.0;
                if c + 1 < r {
                    site[1][(c, c + 1)] = 1.0;
                }
            }
            sites.push(site);
        } else {
            let mut site = [DMatrix::zeros(l, 1), DMatrix::zeros(l, 1)];
            for c in 0..l {
                site[0][(c, 0)] = amp[c];
                if c + 1 <= w_max {
                    site[1][(c, 0)] = amp[c + 1];
                }
            }
            sites.push(site);
        }
    }
    let mut m = MpsModel {
        sites,
        center: n - 1,
        max_bond,
    };
    // compress to the bond cap (exact zero modes and, if w_max + 1 exceeds
    // max_bond, the least significant weight structure are truncated)
    m.canonicalize_to(0);
    for _ in 0..2 {
        for i in 0..n - 1 {
            let theta = m.merge_pair(i);
            m.split_pair(i, &theta, true, 1e-12);
        }
        for i in (0..n - 1).rev() {
            let theta = m.merge_pair(i);
            m.split_pair(i, &theta, false, 1e-12);
        }
    }
    m.canonicalize_to(0);
    m.normalize_center();
    Ok(m)
}

/// Per-epoch negative log-likelihood of the training set under the model.
pub fn nll(m: &MpsModel, train: &TrainingSet) -> Result<f64> {
    let mut acc = 0.0;
    for x in train.samples().keys() {
        let w = train.weight_of(x);
        let p = m.prob(x)?.max(PROB_FLOOR);
        acc -= w * p.ln();
    }
    Ok(acc)
}

/// Re-gauge the model so its orthogonality center sits at `bond` and return
/// the re-gauged model with the merged two-site tensor at that bond.
pub fn centered_pair(m: &MpsModel, bond: usize) -> Result<(MpsModel, [[DMatrix<f64>; 2]; 2])> {
    if bond + 1 >= m.n_sites() {
        return Err(Error::InvalidParam(format!(
            "bond {bond} out of range for {} sites",
            m.n_sites()
        )));
    }
    let mut m = m.clone();
    m.canonicalize_to(bond);
    let theta = m.merge_pair(bond);
    Ok((m, theta))
}

/// Analytic NLL gradient of the merged two-site tensor `theta` at `bond`.
/// The model must already be centered at `bond` (see [`centered_pair`]).
pub fn two_site_gradient(
    m: &MpsModel,
    bond: usize,
    theta: &[[DMatrix<f64>; 2]; 2],
    train: &TrainingSet,
) -> Result<[[DMatrix<f64>; 2]; 2]> {
    let n = m.n_sites();
    if train.space().width() != n {
        return Err(Error::WidthMismatch {
            expected: n,
            got: train.space().width(),
        });
    }
    if m.center != bond || bond + 1 >= n {
        return Err(Error::InvalidParam(format!(
            "model center {} is not at bond {bond}",
            m.center
        )));
    }
    let samples: Vec<(Vec<u8>, f64)> = train
        .samples()
        .keys()
        .map(|x| ((0..n).map(|i| x.bit(i)).collect(), train.weight_of(x)))
        .collect();
    let mut right: Vec<Vec<nalgebra::DVector<f64>>> = Vec::with_capacity(samples.len());
    let mut left: Vec<RowDVector<f64>> = Vec::with_capacity(samples.len());
    for (bits, _) in &samples {
        let mut envs = vec![nalgebra::DVector::zeros(0); n + 1];
        envs[n] = nalgebra::DVector::from_element(1, 1.0);
        for i in (bond + 2..n).rev() {
            envs[i] = &m.sites[i][bits[i] as usize] * &envs[i + 1];
        }
        right.push(envs);
        let mut v = RowDVector::from_element(1, 1.0);
        for i in 0..bond {
            v = &v * &m.sites[i][bits[i] as usize];
        }
        left.push(v);
    }
    let (grad, _) = pair_gradient(theta, &samples, &left, &right, bond)?;
    Ok(grad)
}

/// Training NLL with the pair at `bond` replaced by `theta` verbatim:
/// probabilities come from raw amplitudes and an explicitly enumerated
/// partition function, so no canonical gauge is assumed. The width must stay
/// small enough to enumerate.
pub fn nll_with_pair(
    m: &MpsModel,
    bond: usize,
    theta: &[[DMatrix<f64>; 2]; 2],
    train: &TrainingSet,
) -> Result<f64> {
    let n = m.n_sites();
    if n > 24 {
        return Err(Error::InvalidParam(format!(
            "{n} sites is too wide to enumerate"
        )));
    }
    if bond + 1 >= n {
        return Err(Error::InvalidParam(format!(
            "bond {bond} out of range for {n} sites"
        )));
    }
    let amp = |x: Bitstring| -> f64 {
        let mut v = RowDVector::from_element(1, 1.0);
        for i in 0..bond {
            v = &v * &m.sites[i][x.bit(i) as usize];
        }
        v = &v * &theta[x.bit(bond) as usize][x.bit(bond + 1) as usize];
        for i in bond + 2..n {
            v = &v * &m.sites[i][x.bit(i) as usize];
        }
        v[0]
    };
    let z: f64 = (0u64..1 << n)
        .map(|b| {
            let a = amp(Bitstring::new(n, b as u32));
            a * a
        })
        .sum();
    let mut acc = 0.0;
    for x in train.samples().keys() {
        let a = amp(x);
        let p = (a * a / z).max(PROB_FLOOR);
        acc -= train.weight_of(x) * p.ln();
    }
    Ok(acc)
}

/// DMRG-like training: each epoch performs a left-to-right then a
/// right-to-left sweep of two-site SGD updates. Returns the trained model and
/// the per-epoch NLL history.
pub fn train_dmrg(
    mut m: MpsModel,
    train: &TrainingSet,
    cfg: &TnbmTrainConfig,
) -> Result<(MpsModel, Vec<f64>)> {
    let n = m.n_sites();
    if train.is_empty() {
        return Err(Error::InvalidParam("empty training set".into()));
    }
    if train.space().width() != n {
        return Err(Error::WidthMismatch {
            expected: n,
            got: train.space().width(),
        });
    }
    let all_samples: Vec<(Vec<u8>, f64)> = train
        .samples()
        .keys()
        .map(|x| ((0..n).map(|i| x.bit(i)).collect(), train.weight_of(x)))
        .collect();
    let eta = cfg.learning_rate;
    let mut history = Vec::with_capacity(cfg.n_epochs);

    for _ in 0..cfg.n_epochs {
        let samples = &all_samples;
        let nt = samples.len();
        // left-to-right sweep
        m.canonicalize_to(0);
        // right environments per sample: right[t][i] = A^{x_i} ... A^{x_{n-1}}
        let mut right: Vec<Vec<nalgebra::DVector<f64>>> = Vec::with_capacity(nt);
        for (bits, _) in samples {
            let mut envs = vec![nalgebra::DVector::zeros(0); n + 1];
            envs[n] = nalgebra::DVector::from_element(1, 1.0);
            for i in (0..n).rev() {
                envs[i] = &m.sites[i][bits[i] as usize] * &envs[i + 1];
            }
            right.push(envs);
        }
        let mut left: Vec<RowDVector<f64>> =
            (0..nt).map(|_| RowDVector::from_element(1, 1.0)).collect();
        for i in 0..n - 1 {
            let theta = m.merge_pair(i);
            let (grad, _) = pair_gradient(&theta, samples, &left, &right, i)?;
            let theta = [
                [&theta[0][0] - &grad[0][0] * eta, &theta[0][1] - &grad[0][1] * eta],
                [&theta[1][0] - &grad[1][0] * eta, &theta[1][1] - &grad[1][1] * eta],
            ];
            m.split_pair(i, &theta, true, cfg.svd_cutoff);
            for (t, (bits, _)) in samples.iter().enumerate() {
                left[t] = &left[t] * &m.sites[i][bits[i] as usize];
            }
        }

        // right-to-left sweep: left environments are now valid up to each bond
        let mut left_envs: Vec<Vec<RowDVector<f64>>> = Vec::with_capacity(nt);
        for (bits, _) in samples {
            let mut envs = vec![RowDVector::zeros(0); n + 1];
            envs[0] = RowDVector::from_element(1, 1.0);
            for i in 0..n {
                envs[i + 1] = &envs[i] * &m.sites[i][bits[i] as usize];
            }
            left_envs.push(envs);
        }
        let mut right_run: Vec<nalgebra::DVector<f64>> = (0..nt)
            .map(|_| nalgebra::DVector::from_element(1, 1.0))
            .collect();
        for i in (0..n - 1).rev() {
            let theta = m.merge_pair(i);
            let lefts: Vec<RowDVector<f64>> =
                (0..nt).map(|t| left_envs[t][i].clone()).collect();
            let rights: Vec<Vec<nalgebra::DVector<f64>>> = (0..nt)
                .map(|t| {
                    let mut envs = vec![nalgebra::DVector::zeros(0); n + 1];
                    envs[i + 2] = right_run[t].clone();
                    envs
                })
                .collect();
            let (grad, _) = pair_gradient(&theta, samples, &lefts, &rights, i)?;
            let theta = [
                [&theta[0][0] - &grad[0][0] * eta, &theta[0][1] - &grad[0][1] * eta],
                [&theta[1][0] - &grad[1][0] * eta, &theta[1][1] - &grad[1][1] * eta],
            ];
            m.split_pair(i, &theta, false, cfg.svd_cutoff);
            for (t, (bits, _)) in samples.iter().enumerate() {
                right_run[t] = &m.sites[i + 1][bits[i + 1] as usize] * &right_run[t];
            }
        }
        m.normalize_center();

        let epoch_nll = nll(&m, train)?;
        if !epoch_nll.is_finite() {
            return Err(Error::TrainingDiverged(format!("NLL = {epoch_nll}")));
        }
        history.push(epoch_nll);
    }
    Ok((m, history))
}
