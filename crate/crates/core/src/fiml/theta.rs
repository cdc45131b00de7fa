//! Unconstrained parameterization used by the optimizer:
//! (β_L, β_S, ln σ²_L, ln σ²_S, atanh ρ, ln σ²_e).

use crate::gcm::GcmParams;
use crate::scalar::Scalar;

pub type Theta<T> = [T; 6];

pub fn to_theta<T: Scalar>(p: &GcmParams<T>) -> Theta<T> {
    [p.beta_l, p.beta_s, p.var_l.ln(), p.var_s.ln(), p.corr_ls.atanh(), p.var_e.ln()]
}

pub fn from_theta<T: Scalar>(th: &Theta<T>) -> GcmParams<T> {
    GcmParams {
        beta_l: th[0],
        beta_s: th[1],
        var_l: th[2].exp(),
        var_s: th[3].exp(),
        corr_ls: th[4].tanh(),
        var_e: th[5].exp(),
    }
}

/// Diagonal of ∂(natural)/∂θ.
pub fn jacobian_diag<T: Scalar>(p: &GcmParams<T>) -> [T; 6] {
    let one = T::one();
    [one, one, p.var_l, p.var_s, one - p.corr_ls * p.corr_ls, p.var_e]
}
