//! Single-photon scattering matrices.
//!
//! An [`AtomModel`] holds the rank-4 tensor `S[j_out, β_out, i_in, α_in]`
//! mapping a photon in internal state `i` and an atom in ground state `α` to
//! the superposition `Σ S[j, β, i, α] |j, β⟩`. Grouping `(j, β)` as rows and
//! `(i, α)` as columns gives a `(d·D) × (d·D)` matrix that must be unitary.

use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::{from_pair, to_pair, Pair};
use crate::linalg;
use crate::tensor::Tensor;

pub const J_OUT: &str = "j_out";
pub const B_OUT: &str = "b_out";
pub const I_IN: &str = "i_in";
pub const A_IN: &str = "a_in";

/// Tolerance for accepting a scattering matrix or atom rotation as unitary.
pub const UNITARITY_TOL: f64 = 1e-10;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

#[derive(Clone, Debug, PartialEq)]
pub struct AtomModel {
    photon_dim: usize,
    atom_dim: usize,
    s: Tensor,
}

impl AtomModel {
    /// Wraps a tensor carrying the four axes `j_out, b_out, i_in, a_in` in any
    /// order. Unitarity is not enforced here; see [`validate_unitarity`].
    pub fn from_tensor(t: Tensor) -> Result<Self> {
        let s = t.permuted(&[J_OUT, B_OUT, I_IN, A_IN])?;
        let sh = s.shape();
        if sh[0] != sh[2] {
            return Err(Error::InvalidModel(format!(
                "photon output dimension {} differs from input dimension {}",
                sh[0], sh[2]
            )));
        }
        if sh[1] != sh[3] {
            return Err(Error::InvalidModel(format!(
                "atom output dimension {} differs from input dimension {}",
                sh[1], sh[3]
            )));
        }
        Ok(AtomModel {
            photon_dim: sh[0],
            atom_dim: sh[1],
            s,
        })
    }

    /// Builds a model from its matrix form, rows `(j, β)` and columns
    /// `(i, α)` with the photon index major.
    pub fn from_matrix(photon_dim: usize, atom_dim: usize, m: &DMatrix<C64>) -> Result<Self> {
        let n = photon_dim * atom_dim;
        if m.shape() != (n, n) {
            return Err(Error::Dimension {
                what: "scattering matrix".into(),
                expected: n,
                got: m.nrows(),
            });
        }
        let s = Tensor::from_fn(
            [J_OUT, B_OUT, I_IN, A_IN],
            vec![photon_dim, atom_dim, photon_dim, atom_dim],
            |x| m[(x[0] * atom_dim + x[1], x[2] * atom_dim + x[3])],
        )?;
        Self::from_tensor(s)
    }

    pub fn identity(photon_dim: usize, atom_dim: usize) -> Result<Self> {
        Self::from_matrix(
            photon_dim,
            atom_dim,
            &DMatrix::identity(photon_dim * atom_dim, photon_dim * atom_dim),
        )
    }

    pub fn photon_dim(&self) -> usize {
        self.photon_dim
    }

    pub fn atom_dim(&self) -> usize {
        self.atom_dim
    }

    pub fn tensor(&self) -> &Tensor {
        &self.s
    }

    pub fn entry(&self, j: usize, beta: usize, i: usize, alpha: usize) -> C64 {
        let (d, dd) = (self.photon_dim, self.atom_dim);
        self.s.data()[((j * dd + beta) * d + i) * dd + alpha]
    }

    pub fn matrix(&self) -> DMatrix<C64> {
        let n = self.photon_dim * self.atom_dim;
        DMatrix::from_row_slice(n, n, self.s.data())
    }

    /// The `D × D` block `S^{ji}` (rows β, columns α) for photon `i → j`.
    pub fn block(&self, j: usize, i: usize) -> DMatrix<C64> {
        DMatrix::from_fn(self.atom_dim, self.atom_dim, |b, a| self.entry(j, b, i, a))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitarityReport {
    pub max_deviation: f64,
    pub pass: bool,
}

/// Max deviation of `Σ_{l,γ} conj(S[l,γ,i,α]) S[l,γ,j,β]` from `δ_ij δ_αβ`.
pub fn validate_unitarity(m: &AtomModel) -> UnitarityReport {
    let dev = linalg::unitarity_deviation(&m.matrix());
    UnitarityReport {
        max_deviation: dev,
        pass: dev <= UNITARITY_TOL,
    }
}

/// Couplings and detunings of the four-level atom with two waveguide-coupled
/// ground states `g₀, g₁`, an excited state, and an optional uncoupled
/// spectator level `g₂`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourLevelParams {
    pub gamma0: f64,
    pub gamma1: f64,
    pub delta0: f64,
    pub delta1: f64,
    pub spectator: bool,
}

impl FourLevelParams {
    pub fn new(
        gamma0: f64,
        gamma1: f64,
        delta0: f64,
        delta1: f64,
        spectator: bool,
    ) -> Result<Self> {
        let p = FourLevelParams {
            gamma0,
            gamma1,
            delta0,
            delta1,
            spectator,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma0 > 0.0 && self.gamma0.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "gamma0 must be positive, got {}",
                self.gamma0
            )));
        }
        if !(self.gamma1 > 0.0 && self.gamma1.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "gamma1 must be positive, got {}",
                self.gamma1
            )));
        }
        if !(self.delta0.is_finite() && self.delta1.is_finite()) || self.delta0 == self.delta1 {
            return Err(Error::InvalidModel(format!(
                "delta0 and delta1 must be finite and distinct, got {} and {}",
                self.delta0, self.delta1
            )));
        }
        Ok(())
    }

    fn gamma(&self, level: usize) -> f64 {
        if level == 0 {
            self.gamma0
        } else {
            self.gamma1
        }
    }

    fn delta(&self, level: usize) -> f64 {
        if level == 0 {
            self.delta0
        } else {
            self.delta1
        }
    }

    fn atom_dim(&self) -> usize {
        if self.spectator {
            3
        } else {
            2
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReducedBlockValues {
    pub xi: f64,
    pub eta: f64,
}

impl ReducedBlockValues {
    pub fn from_params(p: &FourLevelParams) -> Self {
        Self::from_gammas(p.gamma0, p.gamma1)
    }

    pub fn from_gammas(gamma0: f64, gamma1: f64) -> Self {
        let sum = gamma0 + gamma1;
        ReducedBlockValues {
            xi: (gamma1 - gamma0) / sum,
            eta: -2.0 * (gamma0 * gamma1).sqrt() / sum,
        }
    }
}

/// `t_{βα}(k)`: amplitude for a photon at frequency `k` to leave the atom in
/// `g_β` given it started in `g_α`.
pub fn transmission_amplitude(
    p: &FourLevelParams,
    beta: usize,
    alpha: usize,
    k: f64,
) -> Result<C64> {
    if beta > 1 || alpha > 1 {
        return Err(Error::InvalidModel(format!(
            "transmission amplitude defined only for coupled levels 0 and 1, got ({beta}, {alpha})"
        )));
    }
    let kron = if alpha == beta { ONE } else { ZERO };
    let coupling = (p.gamma(alpha) * p.gamma(beta)).sqrt();
    let denom = C64::new(k - p.delta(alpha), 0.5 * (p.gamma0 + p.gamma1));
    Ok(kron - C64::i() * coupling / denom)
}

/// The two-bin model in the limit of well separated transition frequencies.
pub fn reduced_blocks(p: &FourLevelParams) -> AtomModel {
    let ReducedBlockValues { xi, eta } = ReducedBlockValues::from_params(p);
    let dd = p.atom_dim();
    let s = Tensor::from_fn([J_OUT, B_OUT, I_IN, A_IN], vec![2, dd, 2, dd], |x| {
        let (j, b, i, a) = (x[0], x[1], x[2], x[3]);
        let v = match (j, i, b, a) {
            (_, _, 2, 2) if i == j => 1.0,
            (0, 0, 0, 0) => xi,
            (0, 0, 1, 1) => 1.0,
            (0, 1, 0, 1) => eta,
            (1, 0, 1, 0) => eta,
            (1, 1, 0, 0) => 1.0,
            (1, 1, 1, 1) => -xi,
            _ => 0.0,
        };
        C64::new(v, 0.0)
    })
    .expect("static shape");
    AtomModel::from_tensor(s).expect("static axes")
}

/// Two-bin model evaluated from the transmission amplitudes at the bin
/// frequencies `Δ₀, Δ₁`, together with its max-entry distance from
/// [`reduced_blocks`].
///
/// Energy conservation sends a photon entering at `Δ_i` with the atom going
/// `g_α → g_β` out at `Δ_β + Δ_i − Δ_α`. Amplitudes whose outgoing frequency
/// is neither bin are dropped, so the returned matrix is only approximately
/// unitary.
pub fn finite_detuning_model(p: &FourLevelParams) -> Result<(AtomModel, f64)> {
    p.validate()?;
    let dd = p.atom_dim();
    let mut m = DMatrix::<C64>::zeros(2 * dd, 2 * dd);
    for i in 0..2 {
        let k = p.delta(i);
        for alpha in 0..dd {
            if alpha == 2 {
                m[(i * dd + 2, i * dd + 2)] = ONE;
                continue;
            }
            for beta in 0..2 {
                let out_bin = if beta == alpha {
                    Some(i)
                } else if i == alpha {
                    Some(beta)
                } else {
                    None
                };
                if let Some(j) = out_bin {
                    m[(j * dd + beta, i * dd + alpha)] = transmission_amplitude(p, beta, alpha, k)?;
                }
            }
        }
    }
    let model = AtomModel::from_matrix(2, dd, &m)?;
    let err = linalg::max_abs(&(m - reduced_blocks(p).matrix()));
    Ok((model, err))
}

/// Photon–atom controlled-Z: `|i, g_α⟩ → (−1)^{iα} |i, g_α⟩`.
pub fn cz_model() -> AtomModel {
    let mut m = DMatrix::<C64>::identity(4, 4);
    m[(3, 3)] = -ONE;
    AtomModel::from_matrix(2, 2, &m).expect("static shape")
}

/// On-disk model document: either an explicit tensor or a named builder.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub photon_dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atom_dim: Option<usize>,
    /// Indexed `[j][beta][i][alpha]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<Vec<Vec<Vec<Vec<Pair>>>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builder: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectator: Option<bool>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LoadedModel {
    pub model: AtomModel,
    /// Set when the loaded tensor is not unitary within [`UNITARITY_TOL`];
    /// loading still succeeds.
    pub unitarity: UnitarityReport,
}

impl ModelDoc {
    pub fn explicit(m: &AtomModel) -> Self {
        let (d, dd) = (m.photon_dim, m.atom_dim);
        let s = (0..d)
            .map(|j| {
                (0..dd)
                    .map(|b| {
                        (0..d)
                            .map(|i| (0..dd).map(|a| to_pair(m.entry(j, b, i, a))).collect())
                            .collect()
                    })
                    .collect()
            })
            .collect();
        ModelDoc {
            photon_dim: Some(d),
            atom_dim: Some(dd),
            s: Some(s),
            ..Default::default()
        }
    }

    pub fn four_level_reduced(p: &FourLevelParams) -> Self {
        ModelDoc {
            builder: Some("four_level_reduced".into()),
            gamma0: Some(p.gamma0),
            gamma1: Some(p.gamma1),
            delta0: Some(p.delta0),
            delta1: Some(p.delta1),
            spectator: Some(p.spectator),
            ..Default::default()
        }
    }

    pub fn cz() -> Self {
        ModelDoc {
            builder: Some("cz".into()),
            ..Default::default()
        }
    }

    pub fn build(&self) -> Result<LoadedModel> {
        let model = match self.builder.as_deref() {
            Some(b) => {
                if self.s.is_some() || self.photon_dim.is_some() || self.atom_dim.is_some() {
                    return Err(Error::Parse(format!(
                        "builder '{b}' cannot be combined with explicit fields photon_dim/atom_dim/s"
                    )));
                }
                match b {
                    "cz" => cz_model(),
                    "four_level_reduced" => {
                        let need = |v: Option<f64>, name: &str| {
                            v.ok_or_else(|| {
                                Error::Parse(format!("builder '{b}' requires field '{name}'"))
                            })
                        };
                        let p = FourLevelParams::new(
                            need(self.gamma0, "gamma0")?,
                            need(self.gamma1, "gamma1")?,
                            need(self.delta0, "delta0")?,
                            need(self.delta1, "delta1")?,
                            self.spectator.unwrap_or(false),
                        )?;
                        reduced_blocks(&p)
                    }
                    other => {
                        return Err(Error::Parse(format!(
                            "unknown builder '{other}' (expected 'four_level_reduced' or 'cz')"
                        )))
                    }
                }
            }
            None => self.build_explicit()?,
        };
        let unitarity = validate_unitarity(&model);
        Ok(LoadedModel { model, unitarity })
    }

    fn build_explicit(&self) -> Result<AtomModel> {
        let d = self
            .photon_dim
            .ok_or_else(|| Error::Parse("missing field 'photon_dim'".into()))?;
        let dd = self
            .atom_dim
            .ok_or_else(|| Error::Parse("missing field 'atom_dim'".into()))?;
        let s = self
            .s
            .as_ref()
            .ok_or_else(|| Error::Parse("missing field 's'".into()))?;
        if d == 0 || dd == 0 {
            return Err(Error::Parse(
                "photon_dim and atom_dim must be positive".into(),
            ));
        }
        let bad = |path: &str, expected: usize, got: usize| {
            Error::Parse(format!(
                "field 's'{path}: expected length {expected}, got {got}"
            ))
        };
        if s.len() != d {
            return Err(bad("", d, s.len()));
        }
        let mut data = Vec::with_capacity(d * dd * d * dd);
        for (j, sj) in s.iter().enumerate() {
            if sj.len() != dd {
                return Err(bad(&format!("[{j}]"), dd, sj.len()));
            }
            for (b, sb) in sj.iter().enumerate() {
                if sb.len() != d {
                    return Err(bad(&format!("[{j}][{b}]"), d, sb.len()));
                }
                for (i, si) in sb.iter().enumerate() {
                    if si.len() != dd {
                        return Err(bad(&format!("[{j}][{b}][{i}]"), dd, si.len()));
                    }
                    data.extend(si.iter().copied().map(from_pair));
                }
            }
        }
        let t = Tensor::new([J_OUT, B_OUT, I_IN, A_IN], vec![d, dd, d, dd], data)?;
        AtomModel::from_tensor(t)
    }
}

pub fn parse_model(text: &str) -> Result<LoadedModel> {
    let doc: ModelDoc = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    doc.build()
}

pub fn load_model(path: impl AsRef<Path>) -> Result<LoadedModel> {
    parse_model(&std::fs::read_to_string(path)?)
}

/// Serializes the explicit tensor form. Floats are written in shortest
/// round-trip form, so loading reproduces every entry bit for bit.
pub fn save_model(m: &AtomModel) -> String {
    serde_json::to_string_pretty(&ModelDoc::explicit(m)).expect("model serializes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(g0: f64, g1: f64) -> FourLevelParams {
        FourLevelParams::new(g0, g1, 0.0, 1000.0, false).unwrap()
    }

    /// Independent evaluation of t_{βα}(k) in real arithmetic.
    fn t_oracle(
        g0: f64,
        g1: f64,
        d_alpha: f64,
        same: bool,
        ga: f64,
        gb: f64,
        k: f64,
    ) -> (f64, f64) {
        // -i c / (x + i y) = -i c (x - i y) / (x² + y²) = (-c y, -c x) / (x² + y²)
        let (x, y) = (k - d_alpha, 0.5 * (g0 + g1));
        let c = (ga * gb).sqrt();
        let den = x * x + y * y;
        let re = if same { 1.0 } else { 0.0 } - c * y / den;
        (re, -c * x / den)
    }

    #[test]
    fn identity_is_unitary() {
        let r = validate_unitarity(&AtomModel::identity(2, 2).unwrap());
        assert_eq!(r.max_deviation, 0.0);
        assert!(r.pass);
    }

    #[test]
    fn perturbed_identity_fails() {
        let mut m = DMatrix::<C64>::identity(4, 4);
        m[(2, 2)] = C64::new(1.1, 0.0);
        let r = validate_unitarity(&AtomModel::from_matrix(2, 2, &m).unwrap());
        assert!(!r.pass);
        assert!(r.max_deviation >= 0.1);
    }

    #[test]
    fn reduced_blocks_gamma_1_2() {
        let m = reduced_blocks(&params(1.0, 2.0));
        let xi = 1.0 / 3.0;
        let eta = -2.0 * 2f64.sqrt() / 3.0;
        let b00 = m.block(0, 0);
        let b01 = m.block(0, 1);
        let b10 = m.block(1, 0);
        let b11 = m.block(1, 1);
        assert!((b00[(0, 0)].re - xi).abs() < 1e-15 && b00[(1, 1)] == ONE);
        assert!((b01[(0, 1)].re - eta).abs() < 1e-15);
        assert!((b10[(1, 0)].re - eta).abs() < 1e-15);
        assert!(b11[(0, 0)] == ONE && (b11[(1, 1)].re + xi).abs() < 1e-15);
        assert_eq!(b01[(1, 0)], ZERO);
        assert!(validate_unitarity(&m).max_deviation < 1e-15);
    }

    #[test]
    fn equal_gammas_give_xi_zero_eta_minus_one() {
        let v = ReducedBlockValues::from_gammas(0.7, 0.7);
        assert_eq!(v.xi, 0.0);
        assert!((v.eta + 1.0).abs() < 1e-15);
    }

    #[test]
    fn spectator_is_untouched() {
        let p = FourLevelParams::new(1.0, 2.0, 0.0, 1000.0, true).unwrap();
        let m = reduced_blocks(&p);
        assert_eq!(m.atom_dim(), 3);
        for i in 0..2 {
            for j in 0..2 {
                for b in 0..3 {
                    let want = if i == j && b == 2 { ONE } else { ZERO };
                    assert_eq!(m.entry(j, b, i, 2), want);
                    if b != 2 {
                        assert_eq!(m.entry(j, 2, i, b), ZERO);
                    }
                }
            }
        }
        assert!(validate_unitarity(&m).pass);
    }

    #[test]
    fn transmission_at_resonance() {
        let p = params(1.0, 2.0);
        let t00 = transmission_amplitude(&p, 0, 0, p.delta0).unwrap();
        assert!((t00 - C64::new(1.0 / 3.0, 0.0)).norm() < 1e-15);
        let t10 = transmission_amplitude(&p, 1, 0, p.delta0).unwrap();
        assert!((t10 - C64::new(-2.0 * 2f64.sqrt() / 3.0, 0.0)).norm() < 1e-15);
        let pe = params(1.5, 1.5);
        assert!(transmission_amplitude(&pe, 0, 0, 0.0).unwrap().norm() < 1e-15);
        assert!(transmission_amplitude(&p, 2, 0, 0.0).is_err());
    }

    #[test]
    fn transmission_matches_real_arithmetic_oracle() {
        let p = FourLevelParams::new(0.3, 1.7, -2.0, 5.0, false).unwrap();
        for &k in &[-10.0, -2.0, 0.0, 1.3, 5.0, 40.0] {
            for (b, a) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                let t = transmission_amplitude(&p, b, a, k).unwrap();
                let (re, im) = t_oracle(
                    p.gamma0,
                    p.gamma1,
                    p.delta(a),
                    a == b,
                    p.gamma(a),
                    p.gamma(b),
                    k,
                );
                assert!((t.re - re).abs() < 1e-14 && (t.im - im).abs() < 1e-14);
            }
        }
    }

    /// The off-resonant diagonal entries dominate the truncation error:
    /// |t₁₁(Δ₀) − 1| and |t₀₀(Δ₁) − 1|.
    fn detuning_oracle(g0: f64, g1: f64, sep: f64) -> f64 {
        let a = t_oracle(g0, g1, sep, true, g1, g1, 0.0);
        let b = t_oracle(g0, g1, 0.0, true, g0, g0, sep);
        let e1 = ((a.0 - 1.0).powi(2) + a.1.powi(2)).sqrt();
        let e2 = ((b.0 - 1.0).powi(2) + b.1.powi(2)).sqrt();
        e1.max(e2)
    }

    #[test]
    fn finite_detuning_error_bounds() {
        let e1000 = finite_detuning_model(&params(1.0, 1.0)).unwrap().1;
        let p2 = FourLevelParams::new(1.0, 1.0, 0.0, 2000.0, false).unwrap();
        let e2000 = finite_detuning_model(&p2).unwrap().1;
        assert!(e1000 <= 0.01, "{e1000}");
        let ratio = e2000 / e1000;
        assert!((0.4..=0.6).contains(&ratio), "{ratio}");
        assert!((e1000 - detuning_oracle(1.0, 1.0, 1000.0)).abs() < 1e-15);
    }

    #[test]
    fn finite_detuning_monotone_sweep() {
        let errs: Vec<f64> = [1e2, 1e3, 1e4, 1e5]
            .iter()
            .map(|&sep| {
                let p = FourLevelParams::new(1.0, 1.0, 0.0, sep, false).unwrap();
                finite_detuning_model(&p).unwrap().1
            })
            .collect();
        assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
    }

    #[test]
    fn finite_detuning_spectator_and_resonant_entries() {
        let p = FourLevelParams::new(1.0, 2.0, 0.0, 1e4, true).unwrap();
        let (m, err) = finite_detuning_model(&p).unwrap();
        assert_eq!(m.atom_dim(), 3);
        // resonant entries are exact
        assert!((m.entry(0, 0, 0, 0).re - 1.0 / 3.0).abs() < 1e-15);
        assert!((m.entry(1, 1, 0, 0).re + 2.0 * 2f64.sqrt() / 3.0).abs() < 1e-15);
        assert!(err < 1e-3);
        assert!(!validate_unitarity(&m).pass);
    }

    #[test]
    fn params_validated() {
        assert!(FourLevelParams::new(0.0, 1.0, 0.0, 1.0, false).is_err());
        assert!(FourLevelParams::new(1.0, -1.0, 0.0, 1.0, false).is_err());
        assert!(FourLevelParams::new(1.0, 1.0, 2.0, 2.0, false).is_err());
    }

    #[test]
    fn cz_phases() {
        let m = cz_model();
        assert_eq!(m.entry(1, 1, 1, 1), -ONE);
        assert_eq!(m.entry(0, 1, 0, 1), ONE);
        assert_eq!(validate_unitarity(&m).max_deviation, 0.0);
        let sq = m.matrix() * m.matrix();
        assert_eq!(sq, DMatrix::identity(4, 4));
        let mat = m.matrix();
        assert!((0..4).all(|r| (0..4).all(|c| r == c || mat[(r, c)] == ZERO)));
    }

    #[test]
    fn save_load_round_trip_is_bit_exact() {
        for m in [cz_model(), reduced_blocks(&params(1.0, 2.0))] {
            let loaded = parse_model(&save_model(&m)).unwrap();
            assert_eq!(loaded.model, m);
            assert!(loaded.unitarity.pass);
        }
    }

    #[test]
    fn malformed_field_named_in_error() {
        let err = parse_model(r#"{"photon_dimm": 2, "atom_dim": 2}"#).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("photon_dimm"), "{msg}");
        assert!(msg.contains("line 1"), "{msg}");
    }

    #[test]
    fn non_unitary_explicit_tensor_loads_with_flag() {
        let mut m = DMatrix::<C64>::identity(4, 4);
        m[(0, 0)] = C64::new(0.8, 0.0);
        let model = AtomModel::from_matrix(2, 2, &m).unwrap();
        let loaded = parse_model(&save_model(&model)).unwrap();
        let expected = validate_unitarity(&model);
        assert!(!loaded.unitarity.pass);
        assert_eq!(loaded.unitarity, expected);
        assert!((loaded.unitarity.max_deviation - (1.0 - 0.64)).abs() < 1e-15);
    }

    #[test]
    fn builder_documents() {
        let p = FourLevelParams::new(1.0, 2.0, 0.0, 1000.0, true).unwrap();
        let doc = serde_json::to_string(&ModelDoc::four_level_reduced(&p)).unwrap();
        assert_eq!(parse_model(&doc).unwrap().model, reduced_blocks(&p));
        assert_eq!(
            parse_model(r#"{"builder":"cz"}"#).unwrap().model,
            cz_model()
        );
        assert!(parse_model(r#"{"builder":"four_level_reduced","gamma0":1}"#).is_err());
        assert!(parse_model(r#"{"builder":"nope"}"#).is_err());
        assert!(parse_model(r#"{"photon_dim":2,"atom_dim":2,"s":[[[[[1,0]]]]]}"#).is_err());
    }

    proptest! {
        #[test]
        fn reduced_blocks_unitary_for_log_uniform_gammas(l0 in -2.0f64..2.0, l1 in -2.0f64..2.0) {
            let p = params(10f64.powf(l0), 10f64.powf(l1));
            let v = ReducedBlockValues::from_params(&p);
            prop_assert!((v.xi * v.xi + v.eta * v.eta - 1.0).abs() <= 1e-12);
            prop_assert!(v.eta <= 0.0);
            prop_assert!(validate_unitarity(&reduced_blocks(&p)).max_deviation <= 1e-12);
        }

        #[test]
        fn single_photon_flux_conserved(g0 in 0.01f64..100.0, g1 in 0.01f64..100.0, d0 in -50.0f64..50.0) {
            let p = FourLevelParams::new(g0, g1, d0, d0 + 1.0, false).unwrap();
            for n in 0..1000 {
                let k = d0 + (n as f64 - 500.0) * 0.1 * (g0 + g1);
                let t00 = transmission_amplitude(&p, 0, 0, k).unwrap();
                let t10 = transmission_amplitude(&p, 1, 0, k).unwrap();
                prop_assert!((t00.norm_sqr() + t10.norm_sqr() - 1.0).abs() <= 1e-12);
            }
        }
    }
}
