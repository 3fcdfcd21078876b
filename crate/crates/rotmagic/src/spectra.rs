//! Diagonalization, adiabatic eigenstate tracking, and field-scan maps.

use faer::{Mat, Side};
use ndarray::Array2;
use rayon::prelude::*;

use crate::consts::*;
use crate::hamiltonian::{self, HamMatrix};
use crate::model::{Basis, BasisState, FieldConfig, MoleculeParams};

#[derive(Debug, thiserror::Error)]
pub enum SpectraError {
    #[error("eigensolver produced non-finite output (dim {dim}, max |H| = {scale:.3e} J)")]
    Convergence { dim: usize, scale: f64 },
    #[error("matrix is not block diagonal in the given labels (|H[{i},{k}]| = {value:.3e})")]
    NotBlockDiagonal { i: usize, k: usize, value: f64 },
    #[error(
        "no eigenstate with more than 50% weight on |J={j}, M=0; m1={m1}, m2={m2}> \
         (best weight {best:.3})"
    )]
    TargetNotFound { j: i32, m1: String, m2: String, best: f64 },
    #[error(transparent)]
    Ham(#[from] hamiltonian::HamError),
    #[error("scan grid must be monotone and non-empty")]
    BadGrid,
}

/// Full eigensystem of a Hermitian matrix, ascending energies.
#[derive(Clone, Debug)]
pub struct EigenSolution {
    pub energies: Vec<f64>,
    /// Column i is the eigenvector of energies[i].
    pub vectors: Array2<f64>,
    pub basis_tag: u64,
}

impl EigenSolution {
    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    /// Squared weight of eigenstate `col` on basis index `idx`.
    pub fn weight(&self, col: usize, idx: usize) -> f64 {
        let v = self.vectors[[idx, col]];
        v * v
    }
}

fn fix_phases(vectors: &mut Array2<f64>) {
    for mut col in vectors.columns_mut() {
        let mut imax = 0;
        let mut vmax = 0.0f64;
        for (i, &v) in col.iter().enumerate() {
            if v.abs() > vmax {
                vmax = v.abs();
                imax = i;
            }
        }
        if col[imax] < 0.0 {
            col.mapv_inplace(|x| -x);
        }
    }
}

/// Dense symmetric eigendecomposition, ascending eigenvalues, with the
/// largest-magnitude component of every eigenvector made positive.
pub fn diagonalize(h: &HamMatrix) -> Result<EigenSolution, SpectraError> {
    let n = h.dim();
    let scale = h.mat.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let m = Mat::from_fn(n, n, |i, j| h.mat[[i, j]]);
    let evd = m.selfadjoint_eigendecomposition(Side::Lower);
    let s = evd.s().column_vector().to_owned();
    let u = evd.u();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| s[a].partial_cmp(&s[b]).unwrap_or(std::cmp::Ordering::Equal));

    let mut energies = Vec::with_capacity(n);
    let mut vectors = Array2::zeros((n, n));
    for (col, &src) in order.iter().enumerate() {
        let e = s[src];
        if !e.is_finite() {
            return Err(SpectraError::Convergence { dim: n, scale });
        }
        energies.push(e);
        for i in 0..n {
            vectors[[i, col]] = u[(i, src)];
        }
    }
    fix_phases(&mut vectors);
    Ok(EigenSolution { energies, vectors, basis_tag: h.basis_tag })
}

/// Like [`diagonalize`], but exploiting block structure: `labels[i]` assigns
/// each basis index to a symmetry block (for theta = 0 scans, twice the
/// total projection M_F). Returns the globally sorted spectrum.
pub fn diagonalize_blocked(h: &HamMatrix, labels: &[i32]) -> Result<EigenSolution, SpectraError> {
    let n = h.dim();
    assert_eq!(labels.len(), n, "one label per basis index");
    let scale = h.mat.iter().fold(0.0f64, |a, x| a.max(x.abs()));

    // refuse silently wrong results if H couples different labels
    for i in 0..n {
        for k in i + 1..n {
            if labels[i] != labels[k] && h.mat[[i, k]].abs() > 1e-12 * scale {
                return Err(SpectraError::NotBlockDiagonal { i, k, value: h.mat[[i, k]].abs() });
            }
        }
    }

    let mut groups: std::collections::BTreeMap<i32, Vec<usize>> = Default::default();
    for (i, &l) in labels.iter().enumerate() {
        groups.entry(l).or_default().push(i);
    }

    let solved: Vec<(Vec<usize>, Vec<f64>, Mat<f64>)> = groups
        .into_iter()
        .par_bridge()
        .map(|(_, idx)| {
            let d = idx.len();
            let m = Mat::from_fn(d, d, |a, b| h.mat[[idx[a], idx[b]]]);
            let evd = m.selfadjoint_eigendecomposition(Side::Lower);
            let vals: Vec<f64> = (0..d).map(|i| evd.s().column_vector()[i]).collect();
            (idx, vals, evd.u().to_owned())
        })
        .collect();

    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(n); // (E, group, col)
    for (g, (_, vals, _)) in solved.iter().enumerate() {
        for (c, &e) in vals.iter().enumerate() {
            if !e.is_finite() {
                return Err(SpectraError::Convergence { dim: n, scale });
            }
            pairs.push((e, g, c));
        }
    }
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));

    let mut energies = Vec::with_capacity(n);
    let mut vectors = Array2::zeros((n, n));
    for (col, &(e, g, c)) in pairs.iter().enumerate() {
        energies.push(e);
        let (idx, _, u) = &solved[g];
        for (a, &i) in idx.iter().enumerate() {
            vectors[[i, col]] = u[(a, c)];
        }
    }
    fix_phases(&mut vectors);
    Ok(EigenSolution { energies, vectors, basis_tag: h.basis_tag })
}

/// Diagonalize the full Hamiltonian at the given fields, using the M_F block
/// structure whenever the polarization is parallel to z.
pub fn solve(
    basis: &Basis,
    params: &MoleculeParams,
    fields: &FieldConfig,
) -> Result<EigenSolution, SpectraError> {
    let h = hamiltonian::total(basis, params, fields)?;
    if fields.theta == 0.0 {
        let labels: Vec<i32> = basis.states().iter().map(|s| s.mf_twice()).collect();
        diagonalize_blocked(&h, &labels)
    } else {
        diagonalize(&h)
    }
}

/// Index and weight of the eigenstate dominated by |J, M=0; m1, m2>.
pub fn find_target_state(
    sol: &EigenSolution,
    basis: &Basis,
    j: i32,
    stretched: (crate::angmom::HalfInt, crate::angmom::HalfInt),
) -> Result<(usize, f64), SpectraError> {
    let (m1, m2) = stretched;
    let idx = basis
        .index_of(&BasisState { j, m: 0, m1, m2 })
        .unwrap_or_else(|| panic!("target state J={j} not in basis"));
    let mut best = 0.0;
    let mut best_col = 0;
    for col in 0..sol.dim() {
        let w = sol.weight(col, idx);
        if w > best {
            best = w;
            best_col = col;
        }
    }
    if best > 0.5 {
        Ok((best_col, best))
    } else {
        Err(SpectraError::TargetNotFound {
            j,
            m1: m1.to_string(),
            m2: m2.to_string(),
            best,
        })
    }
}

/// Adiabatically tracked level energies along a one-parameter scan.
#[derive(Clone, Debug)]
pub struct TrackedScan {
    /// Scan parameter values (SI units of the scanned quantity).
    pub grid: Vec<f64>,
    /// energies[[point, level]], J; level order follows the first point's
    /// ascending spectrum and stays with each adiabatic state.
    pub energies: Array2<f64>,
    /// |<v(level, point-1)|v(level, point)>|, 1.0 at the first point.
    pub overlaps: Array2<f64>,
    /// Dominant J and M of each tracked level at each point.
    pub j_dominant: Array2<i32>,
    pub m_dominant: Array2<i32>,
    /// Weight on |J_dominant, M=0; stretched> at each point.
    pub target_weight: Array2<f64>,
    /// (point, level) pairs where the matched overlap fell below 0.5.
    pub diabatic: Vec<(usize, usize)>,
    pub basis_tag: u64,
}

pub struct ScanOptions {
    /// Bisect an interval when any matched overlap falls below this.
    pub refine_threshold: f64,
    pub max_refine_depth: u32,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions { refine_threshold: 0.7, max_refine_depth: 4 }
    }
}

/// Default number of points for CLI-driven scans.
pub const DEFAULT_SCAN_POINTS: usize = 201;

fn degenerate_clusters(energies: &[f64]) -> Vec<(usize, usize)> {
    let n = energies.len();
    let span = (energies[n - 1] - energies[0]).abs().max(1e-300);
    let tol = 1e-10 * span;
    let mut clusters = Vec::new();
    let mut start = 0;
    for i in 1..=n {
        if i == n || (energies[i] - energies[i - 1]).abs() > tol {
            clusters.push((start, i));
            start = i;
        }
    }
    clusters
}

/// Match the new solution's levels to the previous tracked order.
/// Returns (permuted energies, permuted/rotated vectors, overlaps).
fn match_levels(prev: &Array2<f64>, sol: &EigenSolution) -> (Vec<f64>, Array2<f64>, Vec<f64>) {
    let n = sol.dim();
    let clusters = degenerate_clusters(&sol.energies);

    // overlap of each previous tracked vector with each cluster subspace
    let nc = clusters.len();
    let mut cluster_overlap = Array2::<f64>::zeros((n, nc));
    for (ci, &(lo, hi)) in clusters.iter().enumerate() {
        for a in 0..n {
            let mut acc = 0.0;
            for c in lo..hi {
                let dot = prev.column(a).dot(&sol.vectors.column(c));
                acc += dot * dot;
            }
            cluster_overlap[[a, ci]] = acc.sqrt();
        }
    }

    // greedy global assignment of previous levels to cluster slots
    let mut capacity: Vec<usize> = clusters.iter().map(|&(lo, hi)| hi - lo).collect();
    let mut assigned_cluster = vec![usize::MAX; n];
    let mut unassigned: Vec<usize> = (0..n).collect();
    while !unassigned.is_empty() {
        let mut best = (0.0, usize::MAX, usize::MAX); // (overlap, a, cluster)
        for &a in &unassigned {
            for ci in 0..nc {
                if capacity[ci] == 0 {
                    continue;
                }
                let o = cluster_overlap[[a, ci]];
                if o > best.0 {
                    best = (o, a, ci);
                }
            }
        }
        let (_, a, ci) = best;
        assigned_cluster[a] = ci;
        capacity[ci] -= 1;
        unassigned.retain(|&x| x != a);
    }

    // rotate within each cluster to align with the previous vectors
    let mut energies = vec![0.0; n];
    let mut vectors = Array2::<f64>::zeros((n, n));
    let mut overlaps = vec![0.0; n];
    for (ci, &(lo, hi)) in clusters.iter().enumerate() {
        let members: Vec<usize> = (0..n).filter(|&a| assigned_cluster[a] == ci).collect();
        let d = hi - lo;
        debug_assert_eq!(members.len(), d);
        let e_mean: f64 = sol.energies[lo..hi].iter().sum::<f64>() / d as f64;
        if d == 1 {
            let a = members[0];
            energies[a] = sol.energies[lo];
            let mut col = sol.vectors.column(lo).to_owned();
            let dot = prev.column(a).dot(&col);
            if dot < 0.0 {
                col.mapv_inplace(|x| -x);
            }
            overlaps[a] = dot.abs();
            vectors.column_mut(a).assign(&col);
            continue;
        }
        // M[c, k] = <u_c | prev_{members[k]}>
        let m = Mat::from_fn(d, d, |c, k| {
            sol.vectors.column(lo + c).dot(&prev.column(members[k]))
        });
        let svd = m.svd();
        let q = svd.u() * svd.v().transpose(); // orthogonal polar factor
        for (k, &a) in members.iter().enumerate() {
            energies[a] = e_mean;
            let mut col = ndarray::Array1::<f64>::zeros(n);
            for c in 0..d {
                let w = q[(c, k)];
                if w != 0.0 {
                    col.scaled_add(w, &sol.vectors.column(lo + c));
                }
            }
            overlaps[a] = prev.column(a).dot(&col).abs();
            vectors.column_mut(a).assign(&col);
        }
    }
    (energies, vectors, overlaps)
}

fn dominant_labels(basis: &Basis, col: ndarray::ArrayView1<f64>) -> (i32, i32) {
    let mut wj: std::collections::HashMap<i32, f64> = Default::default();
    let mut wm: std::collections::HashMap<i32, f64> = Default::default();
    for (i, &v) in col.iter().enumerate() {
        let s = basis.state(i);
        *wj.entry(s.j).or_default() += v * v;
        *wm.entry(s.m).or_default() += v * v;
    }
    let pick = |m: &std::collections::HashMap<i32, f64>| {
        m.iter()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap().then(b.0.cmp(a.0)))
            .map(|(&k, _)| k)
            .unwrap()
    };
    (pick(&wj), pick(&wm))
}

/// Track all levels of `H(x)` over a monotone grid.
pub fn track_scan(
    basis: &Basis,
    params: &MoleculeParams,
    grid: &[f64],
    mut fields_at: impl FnMut(f64) -> FieldConfig,
    opts: &ScanOptions,
) -> Result<TrackedScan, SpectraError> {
    if grid.len() < 2 || !(grid.windows(2).all(|w| w[1] > w[0]) || grid.windows(2).all(|w| w[1] < w[0]))
    {
        return Err(SpectraError::BadGrid);
    }
    let n = basis.len();
    let npts = grid.len();
    let (m1s, m2s) = (basis.i1, basis.i2);

    let mut energies = Array2::zeros((npts, n));
    let mut overlaps = Array2::zeros((npts, n));
    let mut j_dom = Array2::zeros((npts, n));
    let mut m_dom = Array2::zeros((npts, n));
    let mut target_w = Array2::zeros((npts, n));
    let mut diabatic = Vec::new();

    let first = solve(basis, params, &fields_at(grid[0]))?;
    let tag = first.basis_tag;
    let mut prev_vectors = first.vectors.clone();
    for l in 0..n {
        energies[[0, l]] = first.energies[l];
        overlaps[[0, l]] = 1.0;
        let (j, m) = dominant_labels(basis, first.vectors.column(l));
        j_dom[[0, l]] = j;
        m_dom[[0, l]] = m;
        if let Some(idx) = basis.index_of(&BasisState { j, m: 0, m1: m1s, m2: m2s }) {
            target_w[[0, l]] = first.weight(l, idx);
        }
    }

    for p in 1..npts {
        let (e, v, o) = step_with_refinement(
            basis,
            params,
            grid[p - 1],
            grid[p],
            &prev_vectors,
            &mut fields_at,
            opts,
            opts.max_refine_depth,
        )?;
        for l in 0..n {
            energies[[p, l]] = e[l];
            overlaps[[p, l]] = o[l];
            if o[l] < 0.5 {
                diabatic.push((p, l));
            }
            let (j, m) = dominant_labels(basis, v.column(l));
            j_dom[[p, l]] = j;
            m_dom[[p, l]] = m;
            if let Some(idx) = basis.index_of(&BasisState { j, m: 0, m1: m1s, m2: m2s }) {
                let w = v.column(l)[idx];
                target_w[[p, l]] = w * w;
            }
        }
        prev_vectors = v;
    }

    Ok(TrackedScan {
        grid: grid.to_vec(),
        energies,
        overlaps,
        j_dominant: j_dom,
        m_dominant: m_dom,
        target_weight: target_w,
        diabatic,
        basis_tag: tag,
    })
}

#[allow(clippy::too_many_arguments)]
fn step_with_refinement(
    basis: &Basis,
    params: &MoleculeParams,
    x0: f64,
    x1: f64,
    prev: &Array2<f64>,
    fields_at: &mut impl FnMut(f64) -> FieldConfig,
    opts: &ScanOptions,
    depth: u32,
) -> Result<(Vec<f64>, Array2<f64>, Vec<f64>), SpectraError> {
    let sol = solve(basis, params, &fields_at(x1))?;
    let (e, v, o) = match_levels(prev, &sol);
    let worst = o.iter().cloned().fold(1.0f64, f64::min);
    if worst >= opts.refine_threshold || depth == 0 {
        return Ok((e, v, o));
    }
    // bisect: walk through the midpoint to disambiguate the matching
    let xm = 0.5 * (x0 + x1);
    let (_, vm, om) = step_with_refinement(basis, params, x0, xm, prev, fields_at, opts, depth - 1)?;
    let (e1, v1, o1) = step_with_refinement(basis, params, xm, x1, &vm, fields_at, opts, depth - 1)?;
    // combined step overlap: the product lower-bounds the direct overlap
    let o: Vec<f64> = om.iter().zip(&o1).map(|(a, b)| (a * b).min(1.0)).collect();
    Ok((e1, v1, o))
}

/// Hyperfine/Zeeman map versus magnetic field (Fig. 1, left column).
pub fn zeeman_map(
    params: &MoleculeParams,
    b_grid_tesla: &[f64],
    e_v_per_m: f64,
    jmax: i32,
    opts: &ScanOptions,
) -> Result<TrackedScan, SpectraError> {
    let basis = Basis::build(params, jmax);
    track_scan(
        &basis,
        params,
        b_grid_tesla,
        |b| FieldConfig { b, e: e_v_per_m, ..Default::default() },
        opts,
    )
}

/// Hyperfine/DC-Stark map versus electric field (Fig. 1, right column).
pub fn dc_stark_map(
    params: &MoleculeParams,
    e_grid_v_per_m: &[f64],
    b_tesla: f64,
    jmax: i32,
    opts: &ScanOptions,
) -> Result<TrackedScan, SpectraError> {
    let basis = Basis::build(params, jmax);
    track_scan(
        &basis,
        params,
        e_grid_v_per_m,
        |e| FieldConfig { b: b_tesla, e, ..Default::default() },
        opts,
    )
}

/// Microwave transition frequencies from the J=0 target state to the J=1
/// manifold versus laser intensity (Fig. 3).
#[derive(Clone, Debug)]
pub struct AcStarkMap {
    /// W/m^2
    pub intensity: Vec<f64>,
    /// transition_hz[[point, k]] = (E_k - E_target0)/h for the J=1 levels
    pub transition_hz: Array2<f64>,
    /// tracked-level indices (into the full scan) of the J=1 manifold
    pub j1_levels: Vec<usize>,
    /// position of the J=1 target level inside `j1_levels`
    pub target_j1: usize,
    /// weight of the J=1 target level on its |J=1, M=0; stretched> component
    pub target_weight: Vec<f64>,
    /// (intensity, transition_hz gap) at local minima of the gap between the
    /// target level and its neighbors, flagging (avoided) crossings
    pub crossing_events: Vec<(f64, f64)>,
    pub scan: TrackedScan,
}

pub fn ac_stark_map(
    params: &MoleculeParams,
    intensity_grid_si: &[f64],
    fields: &FieldConfig,
    jmax: i32,
    opts: &ScanOptions,
) -> Result<AcStarkMap, SpectraError> {
    let basis = Basis::build(params, jmax);
    let template = *fields;
    let scan = track_scan(
        &basis,
        params,
        intensity_grid_si,
        |i| FieldConfig { intensity: i, ..template },
        opts,
    )?;

    // the J=0 target and the J=1 band, identified at the first point
    let sol0 = solve(&basis, params, &FieldConfig { intensity: intensity_grid_si[0], ..template })?;
    let (t0, _) = find_target_state(&sol0, &basis, 0, params.stretched())?;
    let (t1, _) = find_target_state(&sol0, &basis, 1, params.stretched())?;

    let npts = scan.grid.len();
    let j1_levels: Vec<usize> =
        (0..basis.len()).filter(|&l| scan.j_dominant[[0, l]] == 1).collect();
    let target_j1 = j1_levels.iter().position(|&l| l == t1).expect("target inside J=1 band");

    let mut transition_hz = Array2::zeros((npts, j1_levels.len()));
    for p in 0..npts {
        for (k, &l) in j1_levels.iter().enumerate() {
            transition_hz[[p, k]] = (scan.energies[[p, l]] - scan.energies[[p, t0]]) / PLANCK;
        }
    }
    let target_weight: Vec<f64> = (0..npts).map(|p| scan.target_weight[[p, t1]]).collect();

    // local minima of the gap between the target transition and any other
    let mut crossing_events = Vec::new();
    let mut gaps = vec![f64::INFINITY; npts];
    for p in 0..npts {
        for (k, _) in j1_levels.iter().enumerate() {
            if k == target_j1 {
                continue;
            }
            let g = (transition_hz[[p, k]] - transition_hz[[p, target_j1]]).abs();
            gaps[p] = gaps[p].min(g);
        }
    }
    for p in 1..npts.saturating_sub(1) {
        if gaps[p] < gaps[p - 1] && gaps[p] <= gaps[p + 1] {
            crossing_events.push((scan.grid[p], gaps[p]));
        }
    }

    Ok(AcStarkMap {
        intensity: intensity_grid_si.to_vec(),
        transition_hz,
        j1_levels,
        target_j1,
        target_weight,
        crossing_events,
        scan,
    })
}

/// Evenly spaced grid helper.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2);
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}
