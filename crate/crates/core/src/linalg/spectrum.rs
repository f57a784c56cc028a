use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::decomp::{self, svd};
use super::matrix::{c64, ComplexMatrix, CVector, C64};
use super::tolerance::ToleranceConfig;
use crate::error::{Error, Result};

/// Set of eigenvalue representatives, sorted by real then imaginary part.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub values: Vec<C64>,
    pub scale: f64,
}

/// Clustered eigenvalues together with their algebraic multiplicities.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumDetail {
    pub clusters: Vec<(C64, usize)>,
    pub scale: f64,
}

impl SpectrumDetail {
    pub fn weighted_sum(&self) -> C64 {
        self.clusters.iter().map(|&(v, k)| v * k as f64).sum()
    }

    pub fn to_spectrum(&self) -> Spectrum {
        Spectrum { values: self.clusters.iter().map(|c| c.0).collect(), scale: self.scale }
    }
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Representatives other than the collapsed zero.
    pub fn nonzero(&self) -> Vec<C64> {
        self.values.iter().copied().filter(|v| *v != c64(0.0, 0.0)).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.nonzero().is_empty()
    }

    pub fn contains(&self, z: C64, radius: f64) -> bool {
        self.values.iter().any(|v| (v - z).norm() <= radius)
    }
}

/// Eigenvalues of `m` with multiplicity.
///
/// Numerically rank deficient inputs are compressed first: for `m = U S V*`
/// truncated to rank `k`, the nonzero eigenvalues of `m` are those of the
/// `k x k` matrix `S V* U`. Repeating this until the compressed matrix is
/// invertible keeps exact zeros exact for nilpotent parts.
pub fn eigenvalues(m: &ComplexMatrix, tol: &ToleranceConfig) -> Result<Vec<C64>> {
    let n = m.dim();
    let top = decomp::singular_values(m.as_dmatrix()).first().copied().unwrap_or(0.0);
    if top == 0.0 {
        return Ok(vec![c64(0.0, 0.0); n]);
    }
    let threshold = tol.rank * top;
    let mut current = m.as_dmatrix().clone();
    let mut zeros = 0;
    loop {
        let k = current.nrows();
        if k == 0 {
            break;
        }
        let d = svd(&current);
        let rank = d.sigma.iter().filter(|&&s| s > threshold).count();
        if rank == k {
            break;
        }
        zeros += k - rank;
        let u = d.u.columns(0, rank);
        let v = d.v.columns(0, rank);
        let mut compressed = v.adjoint() * u;
        for (i, mut row) in compressed.row_iter_mut().enumerate() {
            row *= c64(d.sigma[i], 0.0);
        }
        current = compressed;
    }
    let mut vals = decomp::eigenvalues(&current)?;
    vals.extend(std::iter::repeat_n(c64(0.0, 0.0), zeros));
    Ok(vals)
}

fn canonical_cmp(a: &C64, b: &C64) -> std::cmp::Ordering {
    a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im))
}

fn find(parent: &mut [usize], i: usize) -> usize {
    let mut root = i;
    while parent[root] != root {
        root = parent[root];
    }
    let mut cur = i;
    while parent[cur] != root {
        let next = parent[cur];
        parent[cur] = root;
        cur = next;
    }
    root
}

/// Groups `(value, weight, touches_zero)` items by single linkage at `radius`.
fn link(items: &[(C64, usize, bool)], radius: f64) -> Vec<(C64, usize, bool)> {
    let n = items.len();
    let mut parent: Vec<usize> = (0..n).collect();
    for i in 0..n {
        for j in (i + 1)..n {
            if (items[i].0 - items[j].0).norm() <= radius {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: Vec<(C64, usize, bool)> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for i in 0..n {
        let root = find(&mut parent, i);
        if slot[root] == usize::MAX {
            slot[root] = groups.len();
            groups.push((c64(0.0, 0.0), 0, false));
        }
        let g = &mut groups[slot[root]];
        g.0 += items[i].0 * items[i].1 as f64;
        g.1 += items[i].1;
        g.2 |= items[i].2;
    }
    groups
        .into_iter()
        .map(|(sum, w, z)| if z { (c64(0.0, 0.0), w, true) } else { (sum / w as f64, w, false) })
        .collect()
}

/// Clusters raw eigenvalues according to the tolerance policy.
pub fn cluster(raw: &[C64], tol: &ToleranceConfig) -> SpectrumDetail {
    let scale = raw.iter().map(|z| z.norm()).fold(1.0, f64::max);
    cluster_at_scale(raw, scale, tol)
}

/// Clusters with an explicit calibration scale instead of the eigenvalue modulus.
pub fn cluster_at_scale(raw: &[C64], scale: f64, tol: &ToleranceConfig) -> SpectrumDetail {
    let zero_radius = tol.zero * scale;
    let radius = tol.distinct * scale;
    let mut items: Vec<(C64, usize, bool)> = raw
        .iter()
        .map(|&z| if z.norm() <= zero_radius { (c64(0.0, 0.0), 1, true) } else { (z, 1, false) })
        .collect();
    loop {
        let merged = link(&items, radius);
        let done = merged.len() == items.len();
        items = merged;
        if done {
            break;
        }
    }
    items.sort_by(|a, b| canonical_cmp(&a.0, &b.0));
    SpectrumDetail { clusters: items.into_iter().map(|(v, w, _)| (v, w)).collect(), scale }
}

pub fn spectrum_detail(m: &ComplexMatrix, tol: &ToleranceConfig) -> Result<SpectrumDetail> {
    Ok(cluster(&eigenvalues(m, tol)?, tol))
}

pub fn spectrum(m: &ComplexMatrix, tol: &ToleranceConfig) -> Result<Spectrum> {
    Ok(spectrum_detail(m, tol)?.to_spectrum())
}

pub fn rank(m: &ComplexMatrix, tol: &ToleranceConfig) -> usize {
    decomp::numerical_rank(&decomp::singular_values(m.as_dmatrix()), tol.rank)
}

/// Number of representatives with modulus above `zero * scale`.
pub fn distinct_nonzero_count(s: &Spectrum, tol: &ToleranceConfig) -> usize {
    s.values.iter().filter(|v| v.norm() > tol.zero * s.scale).count()
}

/// Kuhn's augmenting path step over the bipartite "within radius" graph.
fn augment(
    i: usize,
    adj: &[Vec<usize>],
    seen: &mut [bool],
    owner: &mut [Option<usize>],
) -> bool {
    for &j in &adj[i] {
        if seen[j] {
            continue;
        }
        seen[j] = true;
        if owner[j].is_none() || augment(owner[j].unwrap(), adj, seen, owner) {
            owner[j] = Some(i);
            return true;
        }
    }
    false
}

/// Perfect matching test at radius `match * max(scale1, scale2)`.
pub fn spectra_equal(a: &Spectrum, b: &Spectrum, tol: &ToleranceConfig) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let radius = tol.match_radius * a.scale.max(b.scale);
    let adj: Vec<Vec<usize>> = a
        .values
        .iter()
        .map(|x| (0..b.len()).filter(|&j| (x - b.values[j]).norm() <= radius).collect())
        .collect();
    let mut owner = vec![None; b.len()];
    (0..a.len()).all(|i| {
        let mut seen = vec![false; b.len()];
        augment(i, &adj, &mut seen, &mut owner)
    })
}

/// Hausdorff distance between the two representative sets.
pub fn spectral_distance(a: &Spectrum, b: &Spectrum) -> f64 {
    fn one_sided(from: &Spectrum, to: &Spectrum) -> f64 {
        from.values
            .iter()
            .map(|x| to.values.iter().map(|y| (x - y).norm()).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    }
    if a.is_empty() && b.is_empty() {
        return 0.0;
    }
    one_sided(a, b).max(one_sided(b, a))
}

/// Rank-one matrix `x ⊗ f` with entries `x_i f_j`.
pub fn outer(x: &CVector, f: &CVector) -> Result<ComplexMatrix> {
    if x.len() != f.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), found: f.len() });
    }
    // probes in this crate are O(1); anything this small is a zero vector
    const ZERO: f64 = 1e-14;
    if x.norm() <= ZERO || f.norm() <= ZERO {
        return Err(Error::DegenerateInput("outer product factor is zero".into()));
    }
    ComplexMatrix::new(DMatrix::from_fn(x.len(), x.len(), |i, j| x[i] * f[j]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn tol() -> ToleranceConfig {
        ToleranceConfig::default()
    }

    fn set(v: &[C64]) -> Spectrum {
        cluster(v, &tol()).to_spectrum()
    }

    #[test]
    fn diagonal_spectrum() {
        let s = spectrum(&ComplexMatrix::diag_real(&[3.0, 1.0, 2.0]), &tol()).unwrap();
        assert!(spectra_equal(&s, &set(&[c64(1.0, 0.0), c64(2.0, 0.0), c64(3.0, 0.0)]), &tol()));
    }

    #[test]
    fn cyclic_block_has_cube_roots_of_two() {
        let mut m = DMatrix::zeros(5, 5);
        m[(0, 1)] = c64(1.0, 0.0);
        m[(1, 2)] = c64(1.0, 0.0);
        m[(2, 0)] = c64(2.0, 0.0);
        let s = spectrum(&ComplexMatrix::new(m).unwrap(), &tol()).unwrap();
        let r = 2f64.powf(1.0 / 3.0);
        let expected: Vec<C64> = [0.0, 2.0 * PI / 3.0, 4.0 * PI / 3.0]
            .iter()
            .map(|&t| C64::from_polar(r, t))
            .chain([c64(0.0, 0.0)])
            .collect();
        assert_eq!(s.len(), 4);
        for e in &expected {
            assert!(s.contains(*e, 1e-10));
        }
    }

    #[test]
    fn nilpotent_block_collapses_to_zero() {
        let n = 8;
        let m = ComplexMatrix::from_fn(n, |i, j| if j == i + 1 { c64(1.0, 0.0) } else { c64(0.0, 0.0) });
        let d = spectrum_detail(&m, &tol()).unwrap();
        assert_eq!(d.clusters, vec![(c64(0.0, 0.0), n)]);
    }

    #[test]
    fn rank_examples() {
        assert_eq!(rank(&ComplexMatrix::zeros(3), &tol()), 0);
        let mut m = DMatrix::zeros(4, 4);
        m[(0, 2)] = c64(1.0, 0.0);
        m[(1, 3)] = c64(1.0, 0.0);
        assert_eq!(rank(&ComplexMatrix::new(m).unwrap(), &tol()), 2);
    }

    #[test]
    fn equality_is_set_based() {
        let a = set(&[c64(1.0, 0.0), c64(2.0, 0.0), c64(3.0, 0.0)]);
        let b = set(&[c64(3.0, 0.0), c64(2.0, 0.0), c64(1.0, 0.0)]);
        assert!(spectra_equal(&a, &b, &tol()));
        let z = set(&[c64(0.0, 0.0)]);
        let tiny = set(&[c64(1e-14, 0.0)]);
        assert!(spectra_equal(&z, &tiny, &tol()));
        let short = set(&[c64(1.0, 0.0), c64(2.0, 0.0)]);
        assert!(!spectra_equal(&short, &a, &tol()));
    }

    #[test]
    fn clusters_are_separated_and_zero_is_exact() {
        let s = set(&[c64(1.0, 0.0), c64(1.0 + 4e-7, 0.0), c64(1.0 + 8e-7, 0.0), c64(5e-9, 0.0)]);
        assert_eq!(s.values.len(), 2);
        assert_eq!(s.values[0], c64(0.0, 0.0));
        assert!((s.values[1] - c64(1.0 + 4e-7, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn outer_examples() {
        let e = |i: usize| CVector::from_fn(3, |k, _| c64(if k == i { 1.0 } else { 0.0 }, 0.0));
        let p = outer(&e(0), &e(0)).unwrap();
        assert_eq!(p, ComplexMatrix::diag_real(&[1.0, 0.0, 0.0]));
        let q = outer(&(e(0) + e(1)), &e(0)).unwrap();
        assert_eq!(q.trace(), c64(1.0, 0.0));
        assert_eq!(q.get(1, 0), c64(1.0, 0.0));
        assert!(matches!(outer(&e(0), &CVector::zeros(3)), Err(Error::DegenerateInput(_))));
    }
}
