//! Seeded generation of complete longitudinal panels from the growth model.

use rand::SeedableRng;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::gcm::{loading_matrix, GcmParams};
use crate::linalg::Mat;
use crate::scalar::Scalar;

/// Default standard deviation of the noise added to the latent slope when
/// forming the auxiliary variable (corr(A, slope) = 1/√2 at unit slope variance).
pub const DEFAULT_AUX_NOISE_SD: f64 = 1.0;

/// An N×T panel with an observation mask and an optional auxiliary column.
///
/// Values under a `false` mask entry are unspecified and must not be read by
/// any analysis. The auxiliary column drives MNAR amputation only; no
/// estimator or imputer looks at it.
#[derive(Debug, Clone, PartialEq)]
pub struct LongData<T> {
    y: Mat<T>,
    mask: Vec<bool>,
    pub aux: Option<Vec<T>>,
    pub true_params: Option<GcmParams<T>>,
}

impl<T: Scalar> LongData<T> {
    /// Complete data (all cells observed).
    pub fn complete(y: Mat<T>) -> Self {
        let mask = vec![true; y.rows() * y.cols()];
        LongData { y, mask, aux: None, true_params: None }
    }

    /// Builds a panel from optional cells; `None` is missing.
    pub fn from_options(rows: &[Vec<Option<T>>]) -> Result<Self> {
        let t = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != t) {
            return Err(Error::InvalidDimension("ragged rows".into()));
        }
        let y = Mat::from_fn(rows.len(), t, |i, j| rows[i][j].unwrap_or_else(T::nan));
        let mask = rows.iter().flat_map(|r| r.iter().map(Option::is_some)).collect();
        Ok(LongData { y, mask, aux: None, true_params: None })
    }

    pub fn with_mask(y: Mat<T>, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != y.rows() * y.cols() {
            return Err(Error::InvalidDimension(format!(
                "mask of length {} for {}x{} panel",
                mask.len(),
                y.rows(),
                y.cols()
            )));
        }
        Ok(LongData { y, mask, aux: None, true_params: None })
    }

    #[inline]
    pub fn n_rows(&self) -> usize {
        self.y.rows()
    }

    #[inline]
    pub fn n_occasions(&self) -> usize {
        self.y.cols()
    }

    #[inline]
    pub fn is_observed(&self, i: usize, t: usize) -> bool {
        self.mask[i * self.y.cols() + t]
    }

    #[inline]
    pub fn get(&self, i: usize, t: usize) -> Option<T> {
        self.is_observed(i, t).then(|| self.y[(i, t)])
    }

    /// Raw stored value, regardless of mask.
    #[inline]
    pub fn raw(&self, i: usize, t: usize) -> T {
        self.y[(i, t)]
    }

    pub fn row(&self, i: usize) -> &[T] {
        self.y.row(i)
    }

    pub fn mask_row(&self, i: usize) -> &[bool] {
        let t = self.y.cols();
        &self.mask[i * t..(i + 1) * t]
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn values(&self) -> &Mat<T> {
        &self.y
    }

    pub fn observed_indices(&self, i: usize) -> Vec<usize> {
        (0..self.n_occasions()).filter(|&t| self.is_observed(i, t)).collect()
    }

    pub fn set_missing(&mut self, i: usize, t: usize) {
        let c = self.y.cols();
        self.mask[i * c + t] = false;
    }

    /// Fills a cell and marks it observed.
    pub fn fill(&mut self, i: usize, t: usize, v: T) {
        let c = self.y.cols();
        self.y[(i, t)] = v;
        self.mask[i * c + t] = true;
    }

    pub fn missing_count(&self) -> usize {
        self.mask.iter().filter(|&&m| !m).count()
    }

    pub fn column_missing_count(&self, t: usize) -> usize {
        (0..self.n_rows()).filter(|&i| !self.is_observed(i, t)).count()
    }

    pub fn is_complete(&self) -> bool {
        self.mask.iter().all(|&m| m)
    }

    pub fn observed_column(&self, t: usize) -> Vec<T> {
        (0..self.n_rows()).filter_map(|i| self.get(i, t)).collect()
    }

    /// Copy with the rows at `keep` (in that order).
    pub fn select_rows(&self, keep: &[usize]) -> Self {
        let t = self.n_occasions();
        let y = Mat::from_fn(keep.len(), t, |r, c| self.y[(keep[r], c)]);
        let mask = keep.iter().flat_map(|&i| self.mask_row(i).iter().copied()).collect();
        let aux = self.aux.as_ref().map(|a| keep.iter().map(|&i| a[i]).collect());
        LongData { y, mask, aux, true_params: self.true_params }
    }
}

/// A (base, stream) pair naming an independent random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Seed {
    pub base: u64,
    pub stream: u64,
}

impl Seed {
    pub const fn new(base: u64, stream: u64) -> Self {
        Seed { base, stream }
    }

    /// Child stream for a named sub-task; distinct tags give distinct streams.
    pub fn derive(self, tag: u64) -> Seed {
        Seed { base: self.base, stream: splitmix64(self.stream ^ splitmix64(tag.wrapping_add(0x632B_E59B_D9B4_E019))) }
    }

    pub fn rng(self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.base);
        rng.set_stream(self.stream);
        rng
    }
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const TAG_TRAJECTORIES: u64 = 1;
const TAG_AUX: u64 = 2;

#[inline]
fn std_normal<T: Scalar>(rng: &mut ChaCha8Rng) -> T {
    T::lit(rng.sample::<f64, _>(StandardNormal))
}

fn draw<T: Scalar>(p: &GcmParams<T>, n: usize, occasions: usize, seed: Seed) -> Result<(LongData<T>, Vec<T>)> {
    p.validate()?;
    if n == 0 {
        return Err(Error::InvalidDimension("sample size must be at least 1".into()));
    }
    let lambda = loading_matrix::<T>(occasions)?;
    let mut rng = seed.derive(TAG_TRAJECTORIES).rng();
    let sd_l = p.var_l.sqrt();
    let sd_s = p.var_s.sqrt();
    let sd_e = p.var_e.sqrt();
    let rho = p.corr_ls;
    let rho_c = (T::one() - rho * rho).max(T::zero()).sqrt();
    let mut y = Mat::zeros(n, occasions);
    let mut slopes = Vec::with_capacity(n);
    for i in 0..n {
        let z1: T = std_normal(&mut rng);
        let z2: T = std_normal(&mut rng);
        let b_l = p.beta_l + sd_l * z1;
        let b_s = p.beta_s + sd_s * (rho * z1 + rho_c * z2);
        for t in 0..occasions {
            let e: T = std_normal(&mut rng);
            y[(i, t)] = lambda[(t, 0)] * b_l + lambda[(t, 1)] * b_s + sd_e * e;
        }
        slopes.push(b_s);
    }
    let mut data = LongData::complete(y);
    data.true_params = Some(*p);
    Ok((data, slopes))
}

/// Draws N complete trajectories yᵢ = Λ(β + uᵢ) + eᵢ.
pub fn sample_dataset<T: Scalar>(p: &GcmParams<T>, n: usize, occasions: usize, seed: Seed) -> Result<LongData<T>> {
    draw(p, n, occasions, seed).map(|(d, _)| d)
}

/// As [`sample_dataset`], additionally attaching the auxiliary variable derived
/// from the (then discarded) latent slopes. The `y` panel is identical to the
/// one `sample_dataset` returns for the same seed.
pub fn sample_dataset_with_aux<T: Scalar>(
    p: &GcmParams<T>,
    n: usize,
    occasions: usize,
    aux_noise_sd: T,
    seed: Seed,
) -> Result<LongData<T>> {
    let (mut data, slopes) = draw(p, n, occasions, seed)?;
    data.aux = Some(derive_aux(&slopes, aux_noise_sd, seed.derive(TAG_AUX))?);
    Ok(data)
}

/// Aᵢ = slopeᵢ + ζᵢ with ζᵢ ~ N(0, noise_sd²).
pub fn derive_aux<T: Scalar>(slopes: &[T], noise_sd: T, seed: Seed) -> Result<Vec<T>> {
    if !(noise_sd >= T::zero()) {
        return Err(Error::Validation("auxiliary noise sd must be non-negative".into()));
    }
    let mut rng = seed.rng();
    Ok(slopes
        .iter()
        .map(|&s| {
            let z: T = std_normal(&mut rng);
            s + noise_sd * z
        })
        .collect())
}
