//! Near-field localization: per-ULA MUSIC bearings, cross-ULA association by
//! matching pursuit, and least-squares bearing-line intersection.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::geometry::{ArrayConfig, Target, Ula};
use crate::music::{estimate_doa_music, MusicAperture, MusicOptions};
use crate::num::{inner, lit, norm, CMatrix, Real};
use crate::signal::steering_exact;

/// Ray `origin + r·direction`, `r > 0`, in the array plane (x along the
/// array, y toward the scene).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BearingLine<T> {
    origin: [T; 2],
    direction: [T; 2],
}

impl<T: Real> BearingLine<T> {
    /// Line through `origin` at broadside angle `angle`.
    pub fn new(origin: [T; 2], angle: T) -> Self {
        Self { origin, direction: [angle.sin(), angle.cos()] }
    }

    /// Line from the first element of `ula`.
    pub fn from_ula(cfg: &ArrayConfig<T>, ula: Ula, angle: T) -> Self {
        Self::new([cfg.reference_position(ula), T::zero()], angle)
    }

    pub fn origin(&self) -> [T; 2] {
        self.origin
    }

    /// Unit vector.
    pub fn direction(&self) -> [T; 2] {
        self.direction
    }

    pub fn at(&self, r: T) -> [T; 2] {
        [self.origin[0] + r * self.direction[0], self.origin[1] + r * self.direction[1]]
    }
}

/// Closest-approach point of two bearing lines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fix<T> {
    /// Midpoint of the two closest points.
    pub position: [T; 2],
    /// Distances along each line.
    pub ranges: [T; 2],
    /// Gap between the two closest points.
    pub residual: T,
}

const PARALLEL_LIMIT: f64 = 1e-6;

/// Least-squares intersection of two rays.
pub fn triangulate<T: Real>(first: &BearingLine<T>, second: &BearingLine<T>) -> Result<Fix<T>> {
    let [a0, a1] = first.direction;
    let [b0, b1] = second.direction;
    let cross = a0 * b1 - a1 * b0;
    if cross.abs() < lit(PARALLEL_LIMIT) {
        return Err(Error::ParallelBearings { cross: crate::num::to_f64(cross.abs()) });
    }
    let w = [second.origin[0] - first.origin[0], second.origin[1] - first.origin[1]];
    let dot = a0 * b0 + a1 * b1;
    let aa = a0 * a0 + a1 * a1;
    let bb = b0 * b0 + b1 * b1;
    let aw = a0 * w[0] + a1 * w[1];
    let bw = b0 * w[0] + b1 * w[1];
    // [aa, −dot; dot, −bb]·[r1; r2] = [aw; bw]
    let det = dot * dot - aa * bb;
    let r1 = (dot * bw - bb * aw) / det;
    let r2 = (aa * bw - dot * aw) / det;
    if !(r1 > T::zero()) || !(r2 > T::zero()) {
        return Err(Error::BehindArray);
    }
    let p1 = first.at(r1);
    let p2 = second.at(r2);
    let half = lit::<T>(0.5);
    Ok(Fix {
        position: [half * (p1[0] + p2[0]), half * (p1[1] + p2[1])],
        ranges: [r1, r2],
        residual: (p1[0] - p2[0]).hypot(p1[1] - p2[1]),
    })
}

/// Intersection of the bearings `theta1` (ULA 1) and `theta2` (ULA 2).
pub fn triangulate_angles<T: Real>(cfg: &ArrayConfig<T>, theta1: T, theta2: T) -> Result<Fix<T>> {
    triangulate(&BearingLine::from_ula(cfg, Ula::First, theta1), &BearingLine::from_ula(cfg, Ula::Second, theta2))
}

/// Local DOAs per ULA, each in descending order of peak height.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalDoas<T> {
    pub first: Vec<T>,
    pub second: Vec<T>,
}

/// Independent single-ULA MUSIC on each half of the snapshot.
pub fn local_doas<T: Real>(y: &[Complex<T>], cfg: &ArrayConfig<T>, k: usize, opts: &MusicOptions) -> Result<LocalDoas<T>> {
    let per_ula = |ula| estimate_doa_music(y, cfg, k, &MusicOptions { aperture: MusicAperture::Single(ula), ..*opts });
    Ok(LocalDoas { first: per_ula(Ula::First)?, second: per_ula(Ula::Second)? })
}

/// One-to-one pairing of ULA 1 and ULA 2 bearings, in selection order.
#[derive(Debug, Clone, PartialEq)]
pub struct Association<T> {
    /// `(index into first, index into second)`.
    pub pairs: Vec<(usize, usize)>,
    /// Normalized correlation of each selected atom with the residual at the
    /// time it was selected.
    pub scores: Vec<T>,
}

fn correlation<T: Real>(atom: &[Complex<T>], residual: &[Complex<T>]) -> T {
    let denom = norm(atom) * norm(residual);
    if denom > T::zero() {
        inner(atom, residual).norm_sqr().sqrt() / denom
    } else {
        T::zero()
    }
}

/// Exact-model response at the intersection of a bearing pair, or `None`
/// when the pair does not intersect in front of the array.
pub fn pair_atom<T: Real>(cfg: &ArrayConfig<T>, theta1: T, theta2: T) -> Option<Vec<Complex<T>>> {
    let fix = triangulate_angles(cfg, theta1, theta2).ok()?;
    let target = Target::from_position(fix.position[0], fix.position[1]).ok()?;
    steering_exact(cfg, &target).ok().map(|s| s.entries)
}

/// Greedy matching pursuit over the `K²` bearing-pair atoms: pick the atom
/// most correlated with the residual, remove its projection, repeat.
pub fn associate<T: Real>(first: &[T], second: &[T], y: &[Complex<T>], cfg: &ArrayConfig<T>) -> Result<Association<T>> {
    if first.is_empty() || second.is_empty() {
        return Err(Error::EmptyDoaList);
    }
    if first.len() != second.len() {
        return Err(Error::UnequalDoaLists { first: first.len(), second: second.len() });
    }
    if y.len() != cfg.total_elements() {
        return Err(Error::LengthMismatch { expected: cfg.total_elements(), got: y.len() });
    }
    let k = first.len();
    let atoms: Vec<Vec<Option<Vec<Complex<T>>>>> =
        first.iter().map(|&a| second.iter().map(|&b| pair_atom(cfg, a, b)).collect()).collect();
    let mut residual = y.to_vec();
    let mut used_first = vec![false; k];
    let mut used_second = vec![false; k];
    let mut pairs = Vec::with_capacity(k);
    let mut scores = Vec::with_capacity(k);
    for _ in 0..k {
        let mut best: Option<(usize, usize, T)> = None;
        for i in (0..k).filter(|&i| !used_first[i]) {
            for j in (0..k).filter(|&j| !used_second[j]) {
                let score = atoms[i][j].as_ref().map_or(T::zero(), |a| correlation(a, &residual));
                if best.is_none_or(|(_, _, s)| score > s) {
                    best = Some((i, j, score));
                }
            }
        }
        let (i, j, score) = best.ok_or(Error::EmptyDoaList)?;
        if let Some(atom) = &atoms[i][j] {
            let coeff = inner(atom, &residual).unscale(atom.iter().fold(T::zero(), |acc, z| acc + z.norm_sqr()));
            for (r, a) in residual.iter_mut().zip(atom) {
                *r -= *a * coeff;
            }
        }
        used_first[i] = true;
        used_second[j] = true;
        pairs.push((i, j));
        scores.push(score);
    }
    Ok(Association { pairs, scores })
}

/// Least-squares residual `‖y − A·c‖` of `y` on the span of `atoms`, or
/// `None` when the atoms are linearly dependent.
fn span_residual<T: Real>(atoms: &[&Vec<Complex<T>>], y: &[Complex<T>]) -> Option<T> {
    let a = CMatrix::<T>::from_fn(y.len(), atoms.len(), |m, i| atoms[i][m]);
    let yv = nalgebra::DVector::from_column_slice(y);
    let coeffs = (a.adjoint() * &a).cholesky()?.solve(&(a.adjoint() * &yv));
    Some((yv - a * coeffs).norm())
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for base in permutations(k - 1) {
        for pos in 0..=base.len() {
            let mut p = base.clone();
            p.insert(pos, k - 1);
            out.push(p);
        }
    }
    out
}

/// Exhaustive counterpart of [`associate`]: the one-to-one pairing whose
/// atoms leave the smallest least-squares residual. Scores are each atom's
/// normalized correlation with `y`; pairs are ordered by score.
pub fn associate_exhaustive<T: Real>(
    first: &[T],
    second: &[T],
    y: &[Complex<T>],
    cfg: &ArrayConfig<T>,
) -> Result<Association<T>> {
    if first.is_empty() || second.is_empty() {
        return Err(Error::EmptyDoaList);
    }
    if first.len() != second.len() {
        return Err(Error::UnequalDoaLists { first: first.len(), second: second.len() });
    }
    if y.len() != cfg.total_elements() {
        return Err(Error::LengthMismatch { expected: cfg.total_elements(), got: y.len() });
    }
    let k = first.len();
    let atoms: Vec<Vec<Option<Vec<Complex<T>>>>> =
        first.iter().map(|&a| second.iter().map(|&b| pair_atom(cfg, a, b)).collect()).collect();
    let mut best: Option<(T, Vec<usize>)> = None;
    for perm in permutations(k) {
        let chosen: Option<Vec<&Vec<Complex<T>>>> = perm.iter().enumerate().map(|(i, &j)| atoms[i][j].as_ref()).collect();
        let Some(residual) = chosen.and_then(|c| span_residual(&c, y)) else { continue };
        if best.as_ref().is_none_or(|(r, _)| residual < *r) {
            best = Some((residual, perm));
        }
    }
    // No pairing yields a valid, independent atom set: fall back to the greedy rule.
    let Some((_, perm)) = best else { return associate(first, second, y, cfg) };
    let mut scored: Vec<((usize, usize), T)> = perm
        .iter()
        .enumerate()
        .map(|(i, &j)| ((i, j), atoms[i][j].as_ref().map_or(T::zero(), |a| correlation(a, y))))
        .collect();
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal));
    Ok(Association { pairs: scored.iter().map(|s| s.0).collect(), scores: scored.iter().map(|s| s.1).collect() })
}

/// How bearings from the two ULAs are paired.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AssociationRule {
    /// Greedy matching pursuit ([`associate`]).
    #[default]
    MatchingPursuit,
    /// Best of all `K!` one-to-one pairings ([`associate_exhaustive`]).
    Exhaustive,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LocalizeOptions {
    /// Per-ULA spectrum settings; the aperture field is ignored.
    pub music: MusicOptions,
    pub association: AssociationRule,
}

/// One associated bearing pair and its intersection.
#[derive(Debug, Clone, PartialEq)]
pub struct Located<T> {
    /// Local angles `(θ₁, θ₂)`.
    pub angles: (T, T),
    pub score: T,
    pub fix: Result<Fix<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Localization<T> {
    pub local: LocalDoas<T>,
    /// Descending association score.
    pub targets: Vec<Located<T>>,
}

impl<T: Real> Localization<T> {
    /// Positions of every target, or the first per-target failure.
    pub fn positions(&self) -> Result<Vec<[T; 2]>> {
        self.targets.iter().map(|t| t.fix.clone().map(|f| f.position)).collect()
    }
}

/// Local DOAs → association → triangulation. Per-target triangulation
/// failures are kept in [`Located::fix`] rather than failing the call.
pub fn localize<T: Real>(
    y: &[Complex<T>],
    cfg: &ArrayConfig<T>,
    k: usize,
    opts: &LocalizeOptions,
) -> Result<Localization<T>> {
    let local = local_doas(y, cfg, k, &opts.music)?;
    let association = match opts.association {
        AssociationRule::MatchingPursuit => associate(&local.first, &local.second, y, cfg)?,
        AssociationRule::Exhaustive => associate_exhaustive(&local.first, &local.second, y, cfg)?,
    };
    let mut targets: Vec<Located<T>> = association
        .pairs
        .iter()
        .zip(&association.scores)
        .map(|(&(i, j), &score)| {
            let angles = (local.first[i], local.second[j]);
            Located { angles, score, fix: triangulate_angles(cfg, angles.0, angles.1) }
        })
        .collect();
    targets.sort_by(|a, b| b.score.partial_cmp(&a.score).unwrap_or(std::cmp::Ordering::Equal));
    Ok(Localization { local, targets })
}
