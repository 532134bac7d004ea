//! Coherent single-snapshot ESPRIT over the stacked two-ULA subspace, with
//! alias resolution between a one-element shift and the ULA-center shift.

use nalgebra::Schur;
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::geometry::ArrayConfig;
use crate::num::{arg, cis, lit, modulus, to_f64, CMatrix, Real};
use crate::subspace::{concatenated_subspace, stacked_subspace, HankelParams};

/// Two equal-size row selections of the stacked subspace whose array
/// responses differ by a displacement `delta` (meters).
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftPair<T> {
    rows_a: Vec<usize>,
    rows_b: Vec<usize>,
    delta: T,
}

impl<T: Real> ShiftPair<T> {
    pub fn new(rows_a: Vec<usize>, rows_b: Vec<usize>, delta: T) -> Result<Self> {
        if rows_a.is_empty() || rows_a.len() != rows_b.len() {
            return Err(Error::LengthMismatch { expected: rows_a.len(), got: rows_b.len() });
        }
        if !(delta > T::zero()) {
            return Err(Error::InvalidConfig("shift length must be positive".into()));
        }
        Ok(Self { rows_a, rows_b, delta })
    }

    pub fn rows_a(&self) -> &[usize] {
        &self.rows_a
    }

    pub fn rows_b(&self) -> &[usize] {
        &self.rows_b
    }

    pub fn delta(&self) -> T {
        self.delta
    }

    pub fn len(&self) -> usize {
        self.rows_a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows_a.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionPairs<T> {
    /// One-element shift (`Δ = d`) inside each block.
    pub coarse: ShiftPair<T>,
    /// Top block against bottom block (`Δ = D_s + (M−1)d`).
    pub fine: ShiftPair<T>,
}

/// Row selections for a stacked subspace of two `(L+1)`-row blocks.
pub fn selection_pairs<T: Real>(cfg: &ArrayConfig<T>, pencil: usize, order: usize) -> Result<SelectionPairs<T>> {
    let params = HankelParams::new(pencil, cfg.elements_per_ula())?;
    if pencil < order + 1 {
        return Err(Error::InvalidOrder { order, max: pencil.saturating_sub(1) });
    }
    let block = params.rows();
    let coarse_a = (0..pencil).chain(block..block + pencil).collect();
    let coarse_b = (1..=pencil).chain(block + 1..=block + pencil).collect();
    let fine_a = (0..block).collect();
    let fine_b = (block..2 * block).collect();
    Ok(SelectionPairs {
        coarse: ShiftPair::new(coarse_a, coarse_b, cfg.spacing())?,
        fine: ShiftPair::new(fine_a, fine_b, cfg.center_separation())?,
    })
}

const CONDITION_LIMIT: f64 = 1e12;

/// Least-squares `Ψ̂ = (U_aᴴU_a)⁻¹ U_aᴴ U_b`.
pub fn solve_psi<T: Real>(u: &CMatrix<T>, pair: &ShiftPair<T>) -> Result<CMatrix<T>> {
    if let Some(&bad) = pair.rows_a.iter().chain(&pair.rows_b).find(|&&r| r >= u.nrows()) {
        return Err(Error::LengthMismatch { expected: u.nrows(), got: bad + 1 });
    }
    let ua = u.select_rows(pair.rows_a.iter());
    let ub = u.select_rows(pair.rows_b.iter());
    let gram = ua.adjoint() * &ua;
    let sv = gram.singular_values();
    let (max, min) = sv.iter().fold((T::zero(), T::max_value().unwrap_or_else(T::one)), |(hi, lo), s| {
        (hi.max(*s), lo.min(*s))
    });
    let condition = if min > T::zero() { to_f64(max / min) } else { f64::INFINITY };
    if !(condition <= CONDITION_LIMIT) {
        return Err(Error::IllConditioned { condition });
    }
    let rhs = ua.adjoint() * ub;
    let chol = gram.cholesky().ok_or(Error::IllConditioned { condition })?;
    Ok(chol.solve(&rhs))
}

/// Eigenvalues and unit-norm eigenvectors (as columns) of a small complex
/// matrix, via the complex Schur form and back-substitution.
pub fn eigen<T: Real>(m: &CMatrix<T>) -> Result<(Vec<Complex<T>>, CMatrix<T>)> {
    let k = m.nrows();
    if k != m.ncols() {
        return Err(Error::LengthMismatch { expected: k, got: m.ncols() });
    }
    let scale = m.iter().fold(T::zero(), |acc, z| acc.max(modulus(*z))).max(T::one());
    let (q, t) = Schur::try_new(m.clone(), T::eps(), 0).ok_or(Error::NoConvergence)?.unpack();
    let values: Vec<_> = (0..k).map(|i| t[(i, i)]).collect();
    let tiny = T::eps() * scale;
    let mut x = CMatrix::<T>::zeros(k, k);
    for c in 0..k {
        x[(c, c)] = Complex::new(T::one(), T::zero());
        for i in (0..c).rev() {
            let s = (i + 1..=c).fold(Complex::new(T::zero(), T::zero()), |acc, j| acc + t[(i, j)] * x[(j, c)]);
            let mut den = t[(i, i)] - values[c];
            if modulus(den) < tiny {
                den = Complex::new(tiny, T::zero());
            }
            x[(i, c)] = -s / den;
        }
    }
    let mut e = q * x;
    for mut col in e.column_iter_mut() {
        let n = col.iter().fold(T::zero(), |acc, z| acc + z.norm_sqr()).sqrt();
        if n > T::zero() {
            col.unscale_mut(n);
        }
    }
    Ok((values, e))
}

/// One aliased angle hypothesis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate<T> {
    /// Integer alias index `q`.
    pub alias: i64,
    /// Broadside angle, radians.
    pub angle: T,
}

/// Every angle consistent with one rotational eigenvalue, ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet<T> {
    eigenvalue: Complex<T>,
    delta: T,
    candidates: Vec<Candidate<T>>,
}

impl<T: Real> CandidateSet<T> {
    pub fn eigenvalue(&self) -> Complex<T> {
        self.eigenvalue
    }

    pub fn delta(&self) -> T {
        self.delta
    }

    pub fn candidates(&self) -> &[Candidate<T>] {
        &self.candidates
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }
}

/// `ν = arg(ξ)/2π ∈ (−½, ½]`.
pub fn normalized_phase<T: Real>(xi: Complex<T>) -> T {
    arg(xi) / T::two_pi()
}

/// `θ⁽q⁾ = arcsin(λ(ν+q)/Δ)` for every integer `q` inside the visible region.
/// The eigenvalue magnitude is ignored.
pub fn angles_from_eigenvalue<T: Real>(xi: Complex<T>, delta: T, wavelength: T) -> CandidateSet<T> {
    let nu = normalized_phase(xi);
    let ratio = delta / wavelength;
    let slack = lit::<T>(1e-9);
    let lo = to_f64(-ratio - nu).floor() as i64 - 1;
    let hi = to_f64(ratio - nu).ceil() as i64 + 1;
    let candidates = (lo..=hi)
        .filter_map(|q| {
            let s = (nu + lit::<T>(q as f64)) / ratio;
            if s.abs() > T::one() + slack {
                return None;
            }
            Some(Candidate { alias: q, angle: s.max(-T::one()).min(T::one()).asin() })
        })
        .collect();
    CandidateSet { eigenvalue: xi, delta, candidates }
}

pub fn angles_from_eigenvalues<T: Real>(eigs: &[Complex<T>], delta: T, wavelength: T) -> Vec<CandidateSet<T>> {
    eigs.iter().map(|xi| angles_from_eigenvalue(*xi, delta, wavelength)).collect()
}

/// Per-source outcome of alias resolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resolved<T> {
    pub angle: T,
    pub alias: i64,
    pub coarse: T,
    /// `|θ − θ_coarse|`.
    pub disagreement: T,
    /// Gap between the two best distances-to-coarse as a fraction of their
    /// candidate spacing; 1 when only one candidate exists.
    pub margin: T,
}

const TIE_TOLERANCE: f64 = 0.1;

/// Picks, per source, the fine candidate closest to the coarse angle.
/// Output is sorted by angle.
pub fn dealias<T: Real>(coarse: &[T], fine: &[CandidateSet<T>]) -> Result<Vec<Resolved<T>>> {
    if coarse.len() != fine.len() {
        return Err(Error::LengthMismatch { expected: coarse.len(), got: fine.len() });
    }
    let mut out = Vec::with_capacity(coarse.len());
    for (source_index, (&c, set)) in coarse.iter().zip(fine).enumerate() {
        let mut ranked: Vec<(T, Candidate<T>)> =
            set.candidates.iter().map(|cand| ((cand.angle - c).abs(), *cand)).collect();
        ranked.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
        let (best_dist, best) = *ranked.first().ok_or(Error::AmbiguousDealias { source_index, margin: 0.0 })?;
        let margin = match ranked.get(1) {
            None => T::one(),
            Some(&(second_dist, second)) => {
                let spacing = (second.angle - best.angle).abs();
                let margin = if spacing > T::zero() { (second_dist - best_dist) / spacing } else { T::zero() };
                if margin < lit(TIE_TOLERANCE) {
                    return Err(Error::AmbiguousDealias { source_index, margin: to_f64(margin) });
                }
                margin
            }
        };
        out.push(Resolved { angle: best.angle, alias: best.alias, coarse: c, disagreement: best_dist, margin });
    }
    out.sort_by(|a, b| a.angle.partial_cmp(&b.angle).unwrap_or(std::cmp::Ordering::Equal));
    Ok(out)
}

/// Which rotational operator supplies the common eigenbasis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PairingBasis {
    /// Diagonalize `Ψ̂_coarse`; fine eigenvalues are the diagonal of
    /// `E⁻¹ Ψ̂_fine E`.
    Coarse,
    /// Diagonalize whichever operator has the larger minimum eigenvalue gap.
    /// When that is `Ψ̂_fine`, each coarse eigenvalue is the shift-invariance
    /// Rayleigh quotient of the recovered steering column `U·e_k`.
    #[default]
    BestSeparated,
}

/// Coarse/fine eigenvalue pairs, one per source.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenPairing<T> {
    pub coarse: Vec<Complex<T>>,
    pub fine: Vec<Complex<T>>,
    /// Off-diagonal to diagonal energy ratio of the non-diagonalized operator
    /// in the chosen eigenbasis.
    pub quality: T,
}

fn min_gap<T: Real>(values: &[Complex<T>]) -> T {
    let mut gap = T::max_value().unwrap_or_else(T::one);
    for (i, a) in values.iter().enumerate() {
        for b in &values[i + 1..] {
            gap = gap.min(modulus(*a - *b));
        }
    }
    gap
}

fn off_diagonal_ratio<T: Real>(m: &CMatrix<T>) -> T {
    let (mut diag, mut off) = (T::zero(), T::zero());
    for ((i, j), z) in m.iter().enumerate().map(|(n, z)| ((n % m.nrows(), n / m.nrows()), z)) {
        if i == j {
            diag += z.norm_sqr();
        } else {
            off += z.norm_sqr();
        }
    }
    if diag > T::zero() {
        off / diag
    } else {
        T::max_value().unwrap_or_else(T::one)
    }
}

fn similarity<T: Real>(e: &CMatrix<T>, psi: &CMatrix<T>) -> Result<CMatrix<T>> {
    let sv = e.singular_values();
    let max = sv.iter().fold(T::zero(), |acc, s| acc.max(*s));
    let min = sv.iter().fold(max, |acc, s| acc.min(*s));
    if !(min > lit::<T>(1e-12) * max) {
        return Err(Error::SingularEigenbasis);
    }
    let inv = e.clone().try_inverse().ok_or(Error::SingularEigenbasis)?;
    Ok(inv * psi * e)
}

fn rayleigh<T: Real>(v: &[Complex<T>], pair: &ShiftPair<T>) -> Complex<T> {
    let zero = Complex::new(T::zero(), T::zero());
    let (num, den) = pair.rows_a.iter().zip(&pair.rows_b).fold((zero, T::zero()), |(n, d), (&a, &b)| {
        (n + v[a].conj() * v[b], d + v[a].norm_sqr())
    });
    if den > T::zero() {
        num.unscale(den)
    } else {
        zero
    }
}

/// Associates coarse and fine rotational eigenvalues source by source.
pub fn pair_eigenvalues<T: Real>(
    u: &CMatrix<T>,
    coarse_pair: &ShiftPair<T>,
    fine_pair: &ShiftPair<T>,
    basis: PairingBasis,
) -> Result<EigenPairing<T>> {
    let psi_c = solve_psi(u, coarse_pair)?;
    let psi_f = solve_psi(u, fine_pair)?;
    let (coarse_vals, e_c) = eigen(&psi_c)?;
    let use_fine = match basis {
        PairingBasis::Coarse => false,
        PairingBasis::BestSeparated if coarse_vals.len() < 2 => false,
        PairingBasis::BestSeparated => {
            let (fine_vals, _) = eigen(&psi_f)?;
            min_gap(&fine_vals) > min_gap(&coarse_vals)
        }
    };
    if !use_fine {
        let rotated = similarity(&e_c, &psi_f)?;
        let fine = (0..rotated.nrows()).map(|i| rotated[(i, i)]).collect();
        return Ok(EigenPairing { coarse: coarse_vals, fine, quality: off_diagonal_ratio(&rotated) });
    }
    let (fine_vals, e_f) = eigen(&psi_f)?;
    let rotated = similarity(&e_f, &psi_c)?;
    let columns = u * &e_f;
    let coarse = columns
        .column_iter()
        .map(|col| rayleigh(col.as_slice(), coarse_pair))
        .collect();
    Ok(EigenPairing { coarse, fine: fine_vals, quality: off_diagonal_ratio(&rotated) })
}

/// How the two-block signal subspace is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SubspaceMode {
    /// One SVD of `[H(y1); H(y2)]`.
    #[default]
    Stacked,
    /// Independent per-ULA SVDs, concatenated. Loses the inter-ULA phase.
    Concatenated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EspritOptions {
    /// Pencil parameter; `None` selects `⌊M/2⌋`.
    pub pencil: Option<usize>,
    pub subspace: SubspaceMode,
    pub pairing: PairingBasis,
}

/// Estimated angles (ascending, radians) with per-source diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct EspritEstimate<T> {
    pub angles: Vec<T>,
    pub sources: Vec<Resolved<T>>,
    pub pairing_quality: T,
}

impl<T: Real> EspritEstimate<T> {
    pub fn min_margin(&self) -> T {
        self.sources.iter().fold(T::one(), |acc, s| acc.min(s.margin))
    }
}

/// Stacked subspace → shift pairs → `Ψ̂` → eigenvalue pairing → candidates →
/// alias resolution.
pub fn estimate_doa_esprit<T: Real>(
    y: &[Complex<T>],
    cfg: &ArrayConfig<T>,
    k: usize,
    opts: &EspritOptions,
) -> Result<EspritEstimate<T>> {
    let m = cfg.elements_per_ula();
    if y.len() != 2 * m {
        return Err(Error::LengthMismatch { expected: 2 * m, got: y.len() });
    }
    if k == 0 {
        return Err(Error::InvalidOrder { order: 0, max: m / 2 });
    }
    let pencil = match opts.pencil {
        Some(l) => HankelParams::new(l, m)?.pencil(),
        None => HankelParams::balanced(m)?.pencil(),
    };
    let (y1, y2) = y.split_at(m);
    let u = match opts.subspace {
        SubspaceMode::Stacked => stacked_subspace(y1, y2, pencil, k)?.signal().clone(),
        SubspaceMode::Concatenated => concatenated_subspace(y1, y2, pencil, k)?,
    };
    let pairs = selection_pairs(cfg, pencil, k)?;
    let pairing = pair_eigenvalues(&u, &pairs.coarse, &pairs.fine, opts.pairing)?;
    let lambda = cfg.wavelength();
    let coarse: Vec<T> = pairing
        .coarse
        .iter()
        .map(|xi| {
            let set = angles_from_eigenvalue(*xi, pairs.coarse.delta, lambda);
            nearest_to_broadside(&set)
        })
        .collect();
    let fine = angles_from_eigenvalues(&pairing.fine, pairs.fine.delta, lambda);
    let sources = dealias(&coarse, &fine)?;
    Ok(EspritEstimate { angles: sources.iter().map(|s| s.angle).collect(), sources, pairing_quality: pairing.quality })
}

/// The candidate with the smallest alias index; `q = 0` whenever `Δ ≤ λ/2`.
fn nearest_to_broadside<T: Real>(set: &CandidateSet<T>) -> T {
    set.candidates
        .iter()
        .min_by(|a, b| a.alias.abs().cmp(&b.alias.abs()).then(b.alias.cmp(&a.alias)))
        .map(|c| c.angle)
        .unwrap_or_else(T::zero)
}

/// Unit eigenvalue `e^{j2πΔ sin θ/λ}` for a source at `theta`.
pub fn rotation<T: Real>(theta: T, delta: T, wavelength: T) -> Complex<T> {
    cis(T::two_pi() * delta * theta.sin() / wavelength)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Target;
    use crate::signal::{snapshot_with, AmplitudePolicy, ModelChoice, SnapshotOptions, SteeringModel};
    use proptest::prelude::*;

    fn automotive() -> ArrayConfig<f64> {
        ArrayConfig::automotive_76ghz()
    }

    fn far_snapshot(degs: &[f64], snr: f64, seed: u64) -> Vec<Complex<f64>> {
        let cfg = automotive();
        let targets: Vec<_> = degs.iter().map(|d| Target::from_degrees(250.0, *d).unwrap()).collect();
        let opts = SnapshotOptions { model: ModelChoice::Fixed(SteeringModel::FarField), amplitudes: AmplitudePolicy::RandomPhase };
        snapshot_with(&cfg, &targets, snr, seed, &opts).unwrap().y
    }

    fn stacked(y: &[Complex<f64>], k: usize) -> CMatrix<f64> {
        stacked_subspace(&y[..16], &y[16..], 8, k).unwrap().signal().clone()
    }

    fn degs(est: &EspritEstimate<f64>) -> Vec<f64> {
        est.angles.iter().map(|a| a.to_degrees()).collect()
    }

    #[test]
    fn selection_pair_shapes() {
        let cfg = automotive();
        let p = selection_pairs(&cfg, 8, 2).unwrap();
        assert_eq!((p.coarse.len(), p.fine.len()), (16, 9));
        assert_eq!(p.coarse.delta(), cfg.spacing());
        let lambda = cfg.wavelength();
        assert!((p.fine.delta() - 157.5 * lambda).abs() < 1e-12);
        assert!((p.fine.delta() - 0.6213).abs() < 1e-4);
        assert_eq!(p.coarse.rows_a()[8], 9);
        assert_eq!(p.coarse.rows_b()[8], 10);
        assert_eq!(p.fine.rows_b()[0], 9);
        assert!(selection_pairs(&cfg, 2, 2).is_err());
        assert!(ShiftPair::new(vec![0], vec![1], 0.0).is_err());
        assert!(ShiftPair::new(vec![0, 1], vec![1], 1.0).is_err());
    }

    #[test]
    fn zero_shift_gives_identity() {
        let u = stacked(&far_snapshot(&[-3.0, 4.0], 20.0, 1), 2);
        let rows: Vec<usize> = (0..9).collect();
        let psi = solve_psi(&u, &ShiftPair::new(rows.clone(), rows, 1.0).unwrap()).unwrap();
        assert!((psi - CMatrix::<f64>::identity(2, 2)).norm() < 1e-10);
    }

    #[test]
    fn rank_deficient_selection_is_ill_conditioned() {
        let u = stacked(&far_snapshot(&[-3.0, 4.0], 20.0, 1), 2);
        let pair = ShiftPair::new(vec![0], vec![1], 1.0).unwrap();
        assert!(matches!(solve_psi(&u, &pair), Err(Error::IllConditioned { .. })));
    }

    #[test]
    fn single_source_fine_phase_matches_closed_form() {
        let cfg = automotive();
        let theta = 7.3f64.to_radians();
        let u = stacked(&far_snapshot(&[7.3], f64::INFINITY, 2), 1);
        let p = selection_pairs(&cfg, 8, 1).unwrap();
        let psi = solve_psi(&u, &p.fine).unwrap();
        let expected = rotation(theta, cfg.center_separation(), cfg.wavelength());
        assert!((psi[(0, 0)].norm() - 1.0).abs() < 1e-10);
        assert!((psi[(0, 0)] - expected).norm() < 1e-8);
    }

    #[test]
    fn noiseless_pair_eigenvalues_on_unit_circle() {
        let cfg = automotive();
        let u = stacked(&far_snapshot(&[-0.2, 0.2], f64::INFINITY, 3), 2);
        let p = selection_pairs(&cfg, 8, 2).unwrap();
        for pair in [&p.coarse, &p.fine] {
            let (vals, _) = eigen(&solve_psi(&u, pair).unwrap()).unwrap();
            for v in vals {
                assert!((v.norm() - 1.0).abs() < 1e-8, "{v}");
            }
        }
    }

    #[test]
    fn eigen_reconstructs_matrix() {
        let m = CMatrix::<f64>::from_fn(3, 3, |i, j| Complex::new((i * 3 + j) as f64 * 0.37 - 1.0, (i + 2 * j) as f64 * 0.21));
        let (vals, e) = eigen(&m).unwrap();
        for (c, v) in vals.iter().enumerate() {
            let col = e.column(c);
            assert!((&m * col - col * *v).norm() < 1e-10);
        }
    }

    #[test]
    fn candidate_examples() {
        let lambda: f64 = 1.0;
        let set = angles_from_eigenvalue(Complex::new(1.0, 0.0), 0.5, lambda);
        assert_eq!(set.len(), 1);
        assert_eq!(set.candidates()[0].angle, 0.0);
        let set = angles_from_eigenvalue(Complex::new(0.0, 3.0), 0.5, lambda);
        assert_eq!(set.len(), 1);
        assert!((set.candidates()[0].angle.to_degrees() - 30.0).abs() < 1e-12);
        let set = angles_from_eigenvalue(Complex::new(1.0, 0.0), 165.0, lambda);
        assert_eq!(set.len(), 331);
        let set = angles_from_eigenvalue(cis(0.4), 165.0, lambda);
        assert_eq!(set.len(), 330);
    }

    #[test]
    fn dealias_picks_nearest_fine_candidate() {
        let lambda: f64 = 1.0;
        let delta = 330.0;
        let xi = rotation(10.002f64.to_radians(), delta, lambda);
        let set = angles_from_eigenvalue(xi, delta, lambda);
        let idx = set.candidates().iter().position(|c| (c.angle.to_degrees() - 10.002).abs() < 1e-9).unwrap();
        let below = set.candidates()[idx - 1].angle.to_degrees();
        let above = set.candidates()[idx + 1].angle.to_degrees();
        assert!((below - 9.83).abs() < 0.01 && (above - 10.18).abs() < 0.01);
        let got = dealias(&[10f64.to_radians()], std::slice::from_ref(&set)).unwrap();
        assert!((got[0].angle.to_degrees() - 10.002).abs() < 1e-9);
        assert!(got[0].margin > 0.5);

        let mid = 0.5 * (set.candidates()[idx].angle + set.candidates()[idx + 1].angle);
        assert!(matches!(dealias(&[mid], &[set]), Err(Error::AmbiguousDealias { source_index: 0, .. })));
    }

    #[test]
    fn dealias_sorts_output() {
        let lambda: f64 = 1.0;
        let sets: Vec<_> = [20.0f64, -15.0].iter().map(|d| angles_from_eigenvalue(rotation(d.to_radians(), 40.0, lambda), 40.0, lambda)).collect();
        let got = dealias(&[20f64.to_radians(), -15f64.to_radians()], &sets).unwrap();
        assert!(got[0].angle < got[1].angle);
        assert!((got[0].coarse.to_degrees() + 15.0).abs() < 1e-9);
    }

    #[test]
    fn pairing_quality_noiseless() {
        let cfg = automotive();
        let p = selection_pairs(&cfg, 8, 2).unwrap();
        let u = stacked(&far_snapshot(&[-5.0, 5.0], f64::INFINITY, 4), 2);
        for basis in [PairingBasis::Coarse, PairingBasis::BestSeparated] {
            let pairing = pair_eigenvalues(&u, &p.coarse, &p.fine, basis).unwrap();
            assert!(pairing.quality < 1e-8, "{basis:?}: {}", pairing.quality);
        }
        let p1 = selection_pairs(&cfg, 8, 1).unwrap();
        let u1 = stacked(&far_snapshot(&[12.0], f64::INFINITY, 4), 1);
        let pairing = pair_eigenvalues(&u1, &p1.coarse, &p1.fine, PairingBasis::BestSeparated).unwrap();
        assert_eq!(pairing.quality, 0.0);
        assert_eq!(pairing.coarse.len(), 1);
    }

    #[test]
    fn degenerate_coarse_operator_is_low_quality() {
        let cfg = automotive();
        let p = selection_pairs(&cfg, 8, 2).unwrap();
        let u = stacked(&far_snapshot(&[-5.0, 5.0], f64::INFINITY, 4), 2);
        let rows: Vec<usize> = (0..16).collect();
        let flat = ShiftPair::new(rows.clone(), rows, cfg.spacing()).unwrap();
        let pairing = pair_eigenvalues(&u, &flat, &p.fine, PairingBasis::Coarse).unwrap();
        assert!(pairing.quality > 1e-3, "{}", pairing.quality);
    }

    #[test]
    fn noiseless_close_pair_recovered() {
        let cfg = automotive();
        let y = far_snapshot(&[-0.2, 0.2], f64::INFINITY, 5);
        for pairing in [PairingBasis::Coarse, PairingBasis::BestSeparated] {
            let est = estimate_doa_esprit(&y, &cfg, 2, &EspritOptions { pairing, ..Default::default() }).unwrap();
            let got = degs(&est);
            assert!((got[0] + 0.2).abs() < 1e-3 && (got[1] - 0.2).abs() < 1e-3, "{got:?}");
        }
    }

    #[test]
    fn concatenated_subspace_runs_but_loses_fine_phase() {
        let cfg = automotive();
        let y = far_snapshot(&[-5.0, 5.0], f64::INFINITY, 6);
        let opts = EspritOptions { subspace: SubspaceMode::Concatenated, ..Default::default() };
        match estimate_doa_esprit(&y, &cfg, 2, &opts) {
            Ok(est) => assert_eq!(est.angles.len(), 2),
            Err(e) => assert!(matches!(e, Error::AmbiguousDealias { .. } | Error::IllConditioned { .. } | Error::SingularEigenbasis)),
        }
    }

    #[test]
    fn input_validation() {
        let cfg = automotive();
        let y = far_snapshot(&[1.0], 20.0, 0);
        assert!(estimate_doa_esprit(&y[..10], &cfg, 1, &EspritOptions::default()).is_err());
        assert!(estimate_doa_esprit(&y, &cfg, 0, &EspritOptions::default()).is_err());
        assert!(estimate_doa_esprit(&y, &cfg, 8, &EspritOptions::default()).is_err());
    }

    #[test]
    fn fine_shift_is_less_sensitive_to_phase_error() {
        let cfg = automotive();
        let lambda = cfg.wavelength();
        let dphi = 1e-4;
        let angle_shift = |delta: f64| {
            let base = nearest(&angles_from_eigenvalue(Complex::new(1.0, 0.0), delta, lambda), 0.0);
            let moved = nearest(&angles_from_eigenvalue(cis(dphi), delta, lambda), 0.0);
            (moved - base).abs()
        };
        let ratio = angle_shift(cfg.spacing()) / angle_shift(cfg.center_separation());
        let expected = cfg.center_separation() / cfg.spacing();
        assert!(ratio >= 0.8 * expected && ratio <= 1.2 * expected, "{ratio} vs {expected}");
    }

    fn nearest(set: &CandidateSet<f64>, target: f64) -> f64 {
        set.candidates()
            .iter()
            .min_by(|a, b| (a.angle - target).abs().total_cmp(&(b.angle - target).abs()))
            .unwrap()
            .angle
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn coarse_shift_is_alias_free(phase in -std::f64::consts::PI..std::f64::consts::PI, mag in 0.1..10.0f64) {
            let set = angles_from_eigenvalue(cis(phase) * mag, 0.5, 1.0);
            prop_assert_eq!(set.len(), 1);
            prop_assert_eq!(set.candidates()[0].alias, 0);
        }

        #[test]
        fn candidate_count_matches_lattice_oracle(phase in -std::f64::consts::PI..std::f64::consts::PI, ratio in 1.0..200.0f64) {
            let set = angles_from_eigenvalue(cis(phase), ratio, 1.0);
            let nu = phase / (2.0 * std::f64::consts::PI);
            let oracle = (-1000i64..=1000).filter(|q| (nu + *q as f64).abs() <= ratio).count();
            prop_assert!((set.len() as i64 - oracle as i64).abs() <= 1);
            for c in set.candidates() {
                prop_assert!(c.angle.sin().abs() <= 1.0);
                let q_bound = ratio.ceil() as i64 + 1;
                prop_assert!(c.alias.abs() <= q_bound);
            }
            prop_assert!(set.candidates().windows(2).all(|w| w[0].angle < w[1].angle));
        }

        #[test]
        fn noiseless_single_source_exact(deg in -60.0..60.0f64, seed in 0u64..100) {
            let cfg = automotive();
            let y = far_snapshot(&[deg], f64::INFINITY, seed);
            let est = estimate_doa_esprit(&y, &cfg, 1, &EspritOptions::default()).unwrap();
            prop_assert!((est.angles[0].to_degrees() - deg).abs() < 1e-6);
        }

        #[test]
        fn invariant_to_global_scaling(seed in 0u64..200, re in -3.0..3.0f64, im in -3.0..3.0f64) {
            prop_assume!(re.hypot(im) > 0.1);
            let cfg = automotive();
            let y = far_snapshot(&[-5.0, 5.0], 25.0, seed);
            let scaled: Vec<_> = y.iter().map(|z| z * Complex::new(re, im)).collect();
            let a = estimate_doa_esprit(&y, &cfg, 2, &EspritOptions::default()).map(|e| e.angles);
            let b = estimate_doa_esprit(&scaled, &cfg, 2, &EspritOptions::default()).map(|e| e.angles);
            match (a, b) {
                (Ok(a), Ok(b)) => for (x, z) in a.iter().zip(&b) { prop_assert!((x - z).abs() < 1e-9); },
                (a, b) => prop_assert_eq!(a.is_err(), b.is_err()),
            }
        }
    }
}
