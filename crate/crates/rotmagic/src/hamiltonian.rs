//! Hamiltonian terms over the |J, M; m1, m2> basis.
//!
//! Every builder returns a real symmetric matrix of energies in joules.
//! The quantization axis is the magnetic field direction (z); the laser is
//! linearly polarized at angle theta in the x-z plane, with spherical
//! components eps_0 = cos(theta), eps_{+-1} = -+ sin(theta)/sqrt(2).

use ndarray::Array2;

use crate::analytic::branch_poles;
use crate::angmom::{ck_element, t2_spin_element};
use crate::consts::*;
use crate::model::{Basis, FieldConfig, MoleculeParams};

#[derive(Debug, thiserror::Error)]
pub enum HamError {
    #[error(
        "laser sits on the v'={vprime} pole ({branch} branch, J={j}): \
         |denominator| = 2pi x {distance_hz:.3e} Hz < 10 Gamma"
    )]
    Resonance { vprime: u32, j: i32, branch: &'static str, distance_hz: f64 },
}

/// Dense Hermitian Hamiltonian over a tagged basis, entries in J.
#[derive(Clone, Debug)]
pub struct HamMatrix {
    pub mat: Array2<f64>,
    pub basis_tag: u64,
}

impl HamMatrix {
    fn zeros(basis: &Basis) -> Self {
        HamMatrix { mat: Array2::zeros((basis.len(), basis.len())), basis_tag: basis.tag() }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn add(&mut self, other: &HamMatrix) {
        assert_eq!(self.basis_tag, other.basis_tag, "basis mismatch");
        self.mat += &other.mat;
    }
}

/// Rotational term: diagonal hbar * Bv * J(J+1).
pub fn rotational(basis: &Basis, params: &MoleculeParams) -> HamMatrix {
    let mut h = HamMatrix::zeros(basis);
    for (i, s) in basis.states().iter().enumerate() {
        h.mat[[i, i]] = HBAR * params.b_v * (s.j * (s.j + 1)) as f64;
    }
    h
}

/// Zeeman term: diagonal -g_r mu_N M B - sum_k g_k mu_N m_k B (1 - sigma_k).
pub fn zeeman(basis: &Basis, params: &MoleculeParams, b_tesla: f64) -> HamMatrix {
    let mut h = HamMatrix::zeros(basis);
    for (i, s) in basis.states().iter().enumerate() {
        h.mat[[i, i]] = -MU_N
            * b_tesla
            * (params.g_r * s.m as f64
                + params.g1 * s.m1.value() * (1.0 - params.sigma1)
                + params.g2 * s.m2.value() * (1.0 - params.sigma2));
    }
    h
}

/// Nuclear quadrupole term, sum over both nuclei of the scalar contraction
/// of C2 (rotation) with T2(I_k, I_k) (spin).
///
/// The prefactor per nucleus is (eqQ)_k sqrt(6) / (4 I_k (2 I_k - 1)),
/// which pairs with the T2_0 = (3 Iz^2 - I.I)/sqrt(6) normalization so that
/// the static limit reproduces eqQ [3m^2 - I(I+1)] / [4 I (2I-1)].
pub fn quadrupole(basis: &Basis, params: &MoleculeParams) -> HamMatrix {
    let mut h = HamMatrix::zeros(basis);
    let nuclei = [
        (params.eqq1, basis.i1, 0usize),
        (params.eqq2, basis.i2, 1usize),
    ];
    for (i, si) in basis.states().iter().enumerate() {
        for (k, sk) in basis.states().iter().enumerate().skip(i) {
            if si.j != sk.j && (si.j - sk.j).abs() != 2 {
                continue;
            }
            let mut elem = 0.0;
            for &(eqq, ispin, which) in &nuclei {
                if ispin.twice() < 2 {
                    continue; // no quadrupole moment for spin < 1
                }
                // the other nucleus is a spectator
                let (ms_p, ms, spect_p, spect) = if which == 0 {
                    (si.m1, sk.m1, si.m2, sk.m2)
                } else {
                    (si.m2, sk.m2, si.m1, sk.m1)
                };
                if spect_p != spect {
                    continue;
                }
                let q = si.m - sk.m;
                if q.abs() > 2 {
                    continue;
                }
                let spin_q = -q; // m_k' = m_k - q for a scalar contraction
                if ms_p.twice() != ms.twice() + 2 * spin_q {
                    continue;
                }
                let ival = ispin.value();
                let pref = eqq * 6f64.sqrt() / (4.0 * ival * (2.0 * ival - 1.0));
                let sign = if q.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                elem += pref
                    * sign
                    * ck_element(si.j, si.m, 2, q, sk.j, sk.m)
                    * t2_spin_element(ispin, ms_p, ms, spin_q);
            }
            h.mat[[i, k]] = elem;
            h.mat[[k, i]] = elem;
        }
    }
    h
}

/// DC Stark term: -d_perm E <J'M'|C1_0|JM>, diagonal in the nuclear spins.
pub fn dc_stark(basis: &Basis, params: &MoleculeParams, e_v_per_m: f64) -> HamMatrix {
    let mut h = HamMatrix::zeros(basis);
    if e_v_per_m == 0.0 {
        return h;
    }
    for (i, si) in basis.states().iter().enumerate() {
        for (k, sk) in basis.states().iter().enumerate().skip(i) {
            if (si.j - sk.j).abs() != 1 || si.m != sk.m || si.m1 != sk.m1 || si.m2 != sk.m2 {
                continue;
            }
            let elem = -params.d_perm * e_v_per_m * ck_element(si.j, si.m, 1, 0, sk.j, sk.m);
            h.mat[[i, k]] = elem;
            h.mat[[k, i]] = elem;
        }
    }
    h
}

/// Spherical components of the linear polarization tilted by theta.
fn eps_components(theta: f64) -> [(i32, f64); 3] {
    let (s, c) = theta.sin_cos();
    [(-1, s / 2f64.sqrt()), (0, c), (1, -s / 2f64.sqrt())]
}

/// AC Stark term: vibrational poles plus the far-detuned background tensor.
///
/// Block diagonal in J and diagonal in (m1, m2); within a J block it
/// couples |M' - M| <= 2 and scales linearly with intensity.
pub fn ac_stark(
    basis: &Basis,
    params: &MoleculeParams,
    fields: &FieldConfig,
) -> Result<HamMatrix, HamError> {
    let mut h = HamMatrix::zeros(basis);
    if fields.intensity == 0.0 {
        return Ok(h);
    }
    let theta = fields.theta;
    let eps = eps_components(theta);
    let intensity = fields.intensity;

    check_resonance(basis.jmax, params, fields.omega_laser)?;

    // per-J angular tables: amp[(jpp index, M'' index, M index)]
    for j in 0..=basis.jmax {
        let block: Vec<usize> = (0..basis.len()).filter(|&i| basis.state(i).j == j).collect();
        if block.is_empty() {
            continue;
        }
        let nm = (2 * j + 1) as usize;
        let m_of = |idx: usize| idx as i32 - j;

        // <J'' M''| eps . C1 |J M> for both branches
        let mut amp: Vec<Array2<f64>> = Vec::new();
        let mut branch_j: Vec<i32> = Vec::new();
        for jpp in [j - 1, j + 1] {
            if jpp < 0 {
                continue;
            }
            let nmpp = (2 * jpp + 1) as usize;
            let mut a = Array2::zeros((nmpp, nm));
            for mi in 0..nm {
                let m = m_of(mi);
                for &(p, e) in &eps {
                    if e == 0.0 {
                        continue;
                    }
                    let mpp = m + p;
                    if mpp.abs() > jpp {
                        continue;
                    }
                    a[[(mpp + jpp) as usize, mi]] += e * ck_element(jpp, mpp, 1, p, j, m);
                }
            }
            amp.push(a);
            branch_j.push(jpp);
        }

        // pole part, summed over all vibrational poles and both branches
        let mut pole_block = Array2::<f64>::zeros((nm, nm));
        for pole in &params.poles {
            let delta = fields.omega_laser - pole.omega;
            let strength = intensity * 3.0 * std::f64::consts::PI * C * C * pole.gamma
                / (2.0 * pole.omega.powi(3));
            for (bi, &jpp) in branch_j.iter().enumerate() {
                let (l, r) = branch_poles(j, params.b_v, params.b_vp);
                let offset = if jpp == j - 1 { l } else { r };
                let denom = delta + offset;
                let a = &amp[bi];
                for mi in 0..nm {
                    for mk in mi..nm {
                        if (m_of(mk) - m_of(mi)).abs() > 2 {
                            continue;
                        }
                        let g: f64 = a.column(mi).dot(&a.column(mk));
                        let v = strength * g / denom;
                        pole_block[[mi, mk]] += v;
                        if mk != mi {
                            pole_block[[mk, mi]] += v;
                        }
                    }
                }
            }
        }

        // background tensor: -I [alpha_perp + (alpha_par - alpha_perp) (eps.n)^2]
        let dalpha = params.alpha_bg_par - params.alpha_bg_perp;
        let (s, c) = theta.sin_cos();
        let (s2, c2) = (s * s, c * c);
        let mut bg_block = Array2::<f64>::zeros((nm, nm));
        for mi in 0..nm {
            for mk in mi..nm {
                let (mp, m) = (m_of(mi), m_of(mk));
                let q = mp - m;
                if q.abs() > 2 {
                    continue;
                }
                let c2q = |q: i32| ck_element(j, mp, 2, q, j, m);
                let diag = if mi == mk { 1.0 } else { 0.0 };
                let eps_n_sq = c2 * (diag + 2.0 * c2q(0)) / 3.0
                    + s2 * ((diag - c2q(0)) / 3.0 + (c2q(2) + c2q(-2)) / 6f64.sqrt())
                    + 2.0 * s * c * (c2q(-1) - c2q(1)) / 6f64.sqrt();
                let v = -intensity * (params.alpha_bg_perp * diag + dalpha * eps_n_sq);
                bg_block[[mi, mk]] = v;
                if mk != mi {
                    bg_block[[mk, mi]] = v;
                }
            }
        }

        // scatter into the full matrix: diagonal in (m1, m2)
        for &bi in &block {
            let sb = basis.state(bi);
            for &bk in &block {
                let sk = basis.state(bk);
                if sb.m1 != sk.m1 || sb.m2 != sk.m2 {
                    continue;
                }
                let mi = (sb.m + j) as usize;
                let mk = (sk.m + j) as usize;
                h.mat[[bi, bk]] = pole_block[[mi, mk]] + bg_block[[mi, mk]];
            }
        }
    }
    Ok(h)
}

fn check_resonance(jmax: i32, params: &MoleculeParams, omega_laser: f64) -> Result<(), HamError> {
    for pole in &params.poles {
        let delta = omega_laser - pole.omega;
        for j in 0..=jmax {
            let (l, r) = branch_poles(j, params.b_v, params.b_vp);
            for (branch, offset) in [("left", l), ("right", r)] {
                if j == 0 && branch == "left" {
                    continue; // no J'' = -1 level
                }
                let denom = delta + offset;
                if denom.abs() < 10.0 * pole.gamma {
                    return Err(HamError::Resonance {
                        vprime: pole.vprime,
                        j,
                        branch,
                        distance_hz: denom.abs() / TWO_PI,
                    });
                }
            }
        }
    }
    Ok(())
}

/// Full effective Hamiltonian: rotation + Zeeman + quadrupole + DC + AC.
pub fn total(
    basis: &Basis,
    params: &MoleculeParams,
    fields: &FieldConfig,
) -> Result<HamMatrix, HamError> {
    let mut h = rotational(basis, params);
    h.add(&zeeman(basis, params, fields.b));
    h.add(&quadrupole(basis, params));
    h.add(&dc_stark(basis, params, fields.e));
    h.add(&ac_stark(basis, params, fields)?);
    Ok(h)
}
