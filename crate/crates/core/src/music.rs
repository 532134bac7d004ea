//! Single-snapshot MUSIC: per-ULA Hankel pseudospectra, fusion across the two
//! ULAs and peak extraction.

use std::fmt::Write as _;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::geometry::{ArrayConfig, Ula};
use crate::num::{cis, deg_to_rad, lit, norm, rad_to_deg, to_f64, CMatrix, Real};
use crate::subspace::{hankel, split_subspaces, HankelParams, SubspacePair};

/// Pseudospectrum sampled on a strictly increasing grid of broadside angles.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum<T> {
    grid: Vec<T>,
    values: Vec<T>,
}

impl<T: Real> Spectrum<T> {
    pub fn new(grid: Vec<T>, values: Vec<T>) -> Result<Self> {
        if grid.is_empty() {
            return Err(Error::EmptyGrid);
        }
        if grid.len() != values.len() {
            return Err(Error::LengthMismatch { expected: grid.len(), got: values.len() });
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::GridMismatch);
        }
        Ok(Self { grid, values })
    }

    /// Angles in radians.
    pub fn grid(&self) -> &[T] {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Two-column CSV with header `angle_deg,value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("angle_deg,value\n");
        for (theta, v) in self.grid.iter().zip(&self.values) {
            let _ = writeln!(out, "{},{}", to_f64(rad_to_deg(*theta)), to_f64(*v));
        }
        out
    }
}

/// Half-open grid `[start, stop)` in degrees with the given step, returned in
/// radians. Nodes are `start + i·step`, so round-degree values land exactly.
pub fn angle_grid<T: Real>(start_deg: f64, stop_deg: f64, step_deg: f64) -> Result<Vec<T>> {
    if !(step_deg > 0.0) || !(stop_deg > start_deg) {
        return Err(Error::EmptyGrid);
    }
    let count = ((stop_deg - start_deg) / step_deg - 1e-9).ceil() as usize;
    Ok((0..count)
        .map(|i| deg_to_rad(lit::<T>(start_deg + i as f64 * step_deg)))
        .collect())
}

/// Hankel-domain ULA steering `[1, e^{jkdu}, …, e^{jkdu·(len−1)}]`.
pub fn hankel_steering<T: Real>(spacing: T, wavelength: T, len: usize) -> impl Fn(T) -> Vec<Complex<T>> {
    let kd = T::two_pi() * spacing / wavelength;
    move |theta: T| {
        let step = cis(kd * theta.sin());
        let mut out = Vec::with_capacity(len);
        let mut z = Complex::new(T::one(), T::zero());
        for _ in 0..len {
            out.push(z);
            z *= step;
        }
        out
    }
}

/// `‖a‖ / max(‖U_nᴴ a‖, 10⁻¹²·‖a‖)`.
fn pseudo_value<T: Real>(noise: &CMatrix<T>, a: &[Complex<T>]) -> T {
    let a_norm = norm(a);
    let mut proj = T::zero();
    for col in noise.column_iter() {
        let dot = col
            .iter()
            .zip(a)
            .fold(Complex::new(T::zero(), T::zero()), |acc, (u, x)| acc + u.conj() * *x);
        proj += dot.norm_sqr();
    }
    a_norm / proj.sqrt().max(lit::<T>(1e-12) * a_norm)
}

/// `S(θ) = ‖a(θ)‖ / ‖U_nᴴ a(θ)‖` on `grid`.
pub fn pseudospectrum<T: Real, F>(sub: &SubspacePair<T>, grid: &[T], steering: F) -> Result<Spectrum<T>>
where
    F: Fn(T) -> Vec<Complex<T>>,
{
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if sub.noise().ncols() == 0 {
        return Err(Error::EmptyNoiseSubspace);
    }
    let values = grid
        .iter()
        .map(|&theta| {
            let a = steering(theta);
            if a.len() != sub.rows() {
                return Err(Error::LengthMismatch { expected: sub.rows(), got: a.len() });
            }
            Ok(pseudo_value(sub.noise(), &a))
        })
        .collect::<Result<Vec<_>>>()?;
    Spectrum::new(grid.to_vec(), values)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FusionMode {
    /// `S₁(θ)·S₂(θ)`.
    #[default]
    Product,
    /// `max{S₁(θ), S₂(θ)}`.
    Max,
}

impl FusionMode {
    fn apply<T: Real>(self, a: T, b: T) -> T {
        match self {
            FusionMode::Product => a * b,
            FusionMode::Max => a.max(b),
        }
    }
}

pub fn fuse<T: Real>(s1: &Spectrum<T>, s2: &Spectrum<T>, mode: FusionMode) -> Result<Spectrum<T>> {
    if s1.grid != s2.grid {
        return Err(Error::GridMismatch);
    }
    let values = s1.values.iter().zip(&s2.values).map(|(a, b)| mode.apply(*a, *b)).collect();
    Ok(Spectrum { grid: s1.grid.clone(), values })
}

/// Interior local maxima (`v[i−1] < v[i] ≥ v[i+1]`), strongest first, ties
/// broken by lower angle.
fn local_maxima<T: Real>(values: &[T]) -> Vec<usize> {
    let mut peaks: Vec<usize> = (1..values.len().saturating_sub(1))
        .filter(|&i| values[i] > values[i - 1] && values[i] >= values[i + 1])
        .collect();
    peaks.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
    peaks
}

/// Three-point parabolic vertex in the log domain.
fn refine_peak<T: Real>(grid: &[T], values: &[T], i: usize) -> T {
    let (l, c, r) = (values[i - 1].ln(), values[i].ln(), values[i + 1].ln());
    let curvature = l - lit::<T>(2.0) * c + r;
    if !(curvature < T::zero()) {
        return grid[i];
    }
    let half = lit::<T>(0.5);
    let delta = (half * (l - r) / curvature).max(-half).min(half);
    if delta >= T::zero() {
        grid[i] + delta * (grid[i + 1] - grid[i])
    } else {
        grid[i] + delta * (grid[i] - grid[i - 1])
    }
}

/// The `k` largest local maxima, refined by log-domain parabolic
/// interpolation, in descending order of peak height.
pub fn peak_pick<T: Real>(spec: &Spectrum<T>, k: usize) -> Result<Vec<T>> {
    let peaks = local_maxima(&spec.values);
    if peaks.len() < k {
        return Err(Error::UnderResolved { found: peaks.len(), wanted: k });
    }
    Ok(peaks[..k].iter().map(|&i| refine_peak(&spec.grid, &spec.values, i)).collect())
}

/// Which ULAs contribute to the spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MusicAperture {
    /// Both ULAs, spectra fused.
    #[default]
    Elaa,
    /// One ULA only, angles relative to that ULA.
    Single(Ula),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub start_deg: f64,
    pub stop_deg: f64,
    pub step_deg: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { start_deg: -90.0, stop_deg: 90.0, step_deg: 0.01 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MusicOptions {
    /// Pencil parameter; `None` selects `⌊M/2⌋`.
    pub pencil: Option<usize>,
    pub grid: GridSpec,
    pub fusion: FusionMode,
    pub aperture: MusicAperture,
    /// Golden-section search of the continuous pseudospectrum within one grid
    /// step of each picked peak.
    pub polish: bool,
}

impl Default for MusicOptions {
    fn default() -> Self {
        Self {
            pencil: None,
            grid: GridSpec::default(),
            fusion: FusionMode::Product,
            aperture: MusicAperture::Elaa,
            polish: true,
        }
    }
}

/// Noise subspaces of the contributing ULAs plus what is needed to evaluate
/// the fused pseudospectrum at arbitrary angles.
struct MusicModel<T: Real> {
    noise: Vec<CMatrix<T>>,
    rows: usize,
    spacing: T,
    wavelength: T,
    fusion: FusionMode,
}

impl<T: Real> MusicModel<T> {
    fn build(y: &[Complex<T>], cfg: &ArrayConfig<T>, k: usize, opts: &MusicOptions) -> Result<Self> {
        let m = cfg.elements_per_ula();
        if y.len() != 2 * m {
            return Err(Error::LengthMismatch { expected: 2 * m, got: y.len() });
        }
        if k == 0 {
            return Err(Error::InvalidOrder { order: 0, max: m / 2 });
        }
        let params = match opts.pencil {
            Some(l) => HankelParams::new(l, m)?,
            None => HankelParams::balanced(m)?,
        };
        let ulas: &[Ula] = match opts.aperture {
            MusicAperture::Elaa => &Ula::BOTH,
            MusicAperture::Single(Ula::First) => &[Ula::First],
            MusicAperture::Single(Ula::Second) => &[Ula::Second],
        };
        let noise = ulas
            .iter()
            .map(|ula| {
                let sub = &y[ula.index() * m..(ula.index() + 1) * m];
                let pair = split_subspaces(&hankel(sub, params.pencil())?, k)?;
                if pair.noise().ncols() == 0 {
                    return Err(Error::EmptyNoiseSubspace);
                }
                Ok(pair.noise().clone())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            noise,
            rows: params.rows(),
            spacing: cfg.spacing(),
            wavelength: cfg.wavelength(),
            fusion: opts.fusion,
        })
    }

    fn eval_with(&self, steer: &impl Fn(T) -> Vec<Complex<T>>, theta: T) -> T {
        let a = steer(theta);
        let mut values = self.noise.iter().map(|u| pseudo_value(u, &a));
        let first = values.next().unwrap_or_else(T::zero);
        values.fold(first, |acc, v| self.fusion.apply(acc, v))
    }

    fn spectrum(&self, grid: Vec<T>) -> Result<Spectrum<T>> {
        let steer = hankel_steering(self.spacing, self.wavelength, self.rows);
        let values = grid.iter().map(|&t| self.eval_with(&steer, t)).collect();
        Spectrum::new(grid, values)
    }

    /// Golden-section maximization on `[lo, hi]`.
    fn polish(&self, lo: T, hi: T, start: T) -> T {
        let steer = hankel_steering(self.spacing, self.wavelength, self.rows);
        let f = |t: T| self.eval_with(&steer, t);
        let ratio = lit::<T>(0.618_033_988_749_894_8);
        let (mut a, mut b) = (lo, hi);
        let mut c = b - ratio * (b - a);
        let mut d = a + ratio * (b - a);
        let (mut fc, mut fd) = (f(c), f(d));
        for _ in 0..60 {
            if fc > fd {
                b = d;
                d = c;
                fd = fc;
                c = b - ratio * (b - a);
                fc = f(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + ratio * (b - a);
                fd = f(d);
            }
        }
        let best = if fc > fd { c } else { d };
        if f(best) >= f(start) {
            best
        } else {
            start
        }
    }
}

/// Fused (or single-ULA) pseudospectrum of a snapshot on the configured grid.
pub fn music_spectrum<T: Real>(
    y: &[Complex<T>],
    cfg: &ArrayConfig<T>,
    k: usize,
    opts: &MusicOptions,
) -> Result<Spectrum<T>> {
    let model = MusicModel::build(y, cfg, k, opts)?;
    model.spectrum(angle_grid(opts.grid.start_deg, opts.grid.stop_deg, opts.grid.step_deg)?)
}

/// Per-ULA Hankel → SVD → pseudospectra → fusion → `k` peaks.
///
/// Angles are broadside radians in descending order of peak height. With
/// [`MusicAperture::Single`] they are relative to that ULA.
pub fn estimate_doa_music<T: Real>(
    y: &[Complex<T>],
    cfg: &ArrayConfig<T>,
    k: usize,
    opts: &MusicOptions,
) -> Result<Vec<T>> {
    let model = MusicModel::build(y, cfg, k, opts)?;
    let spectrum = model.spectrum(angle_grid(opts.grid.start_deg, opts.grid.stop_deg, opts.grid.step_deg)?)?;
    let peaks = peak_pick(&spectrum, k)?;
    if !opts.polish {
        return Ok(peaks);
    }
    let step = deg_to_rad(lit::<T>(opts.grid.step_deg));
    Ok(peaks.into_iter().map(|theta| model.polish(theta - step, theta + step, theta)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Target;
    use crate::signal::{snapshot, snapshot_with, AmplitudePolicy, ModelChoice, SnapshotOptions, SteeringModel};
    use proptest::prelude::*;

    fn automotive() -> ArrayConfig<f64> {
        ArrayConfig::automotive_76ghz()
    }

    fn spectrum(values: &[f64]) -> Spectrum<f64> {
        let grid = (0..values.len()).map(|i| i as f64 * 0.1).collect();
        Spectrum::new(grid, values.to_vec()).unwrap()
    }

    fn far_snapshot(degs: &[f64], snr: f64, seed: u64) -> Vec<Complex<f64>> {
        let cfg = automotive();
        let targets: Vec<_> = degs.iter().map(|d| Target::from_degrees(250.0, *d).unwrap()).collect();
        let opts = SnapshotOptions { model: ModelChoice::Fixed(SteeringModel::FarField), amplitudes: AmplitudePolicy::RandomPhase };
        snapshot_with(&cfg, &targets, snr, seed, &opts).unwrap().y
    }

    fn ula_pair(y: &[Complex<f64>], k: usize) -> SubspacePair<f64> {
        split_subspaces(&hankel(&y[..16], 8).unwrap(), k).unwrap()
    }

    #[test]
    fn grid_construction() {
        let g: Vec<f64> = angle_grid(-90.0, 90.0, 0.01).unwrap();
        assert_eq!(g.len(), 18_000);
        assert_eq!(g[9_000], 0.0);
        assert!(angle_grid::<f64>(0.0, 0.0, 0.1).is_err());
        assert!(angle_grid::<f64>(0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn on_grid_noiseless_source_peaks_exactly() {
        let cfg = automotive();
        let y = far_snapshot(&[5.0], f64::INFINITY, 1);
        let grid: Vec<f64> = angle_grid(-90.0, 90.0, 0.01).unwrap();
        let spec = pseudospectrum(&ula_pair(&y, 1), &grid, hankel_steering(cfg.spacing(), cfg.wavelength(), 9)).unwrap();
        let best = spec.values().iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        assert_eq!(best, 9_500);
        assert!(spec.values().iter().all(|v| *v > 0.0 && v.is_finite()));
    }

    #[test]
    fn off_grid_source_refines_toward_fine_grid_optimum() {
        let cfg = automotive();
        let truth = 5.0037;
        let y = far_snapshot(&[truth], 50.0, 4);
        let pair = ula_pair(&y, 1);
        let steer = hankel_steering(cfg.spacing(), cfg.wavelength(), 9);
        let coarse_step = 0.01;
        let coarse = pseudospectrum(&pair, &angle_grid(4.0, 6.0, coarse_step).unwrap(), &steer).unwrap();
        // Oracle: exhaustive evaluation at 0.001° steps.
        let fine = pseudospectrum(&pair, &angle_grid(4.0, 6.0, 0.001).unwrap(), &steer).unwrap();
        let fine_best = fine
            .grid()
            .iter()
            .zip(fine.values())
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(t, _)| t.to_degrees())
            .unwrap();
        let raw = coarse.grid()[local_maxima(coarse.values())[0]].to_degrees();
        let refined = peak_pick(&coarse, 1).unwrap()[0].to_degrees();
        assert!((raw - fine_best).abs() <= coarse_step / 2.0 + 1e-3);
        assert!((refined - fine_best).abs() <= coarse_step / 20.0 + 1e-3, "{refined} vs {fine_best}");
    }

    #[test]
    fn empty_noise_subspace_is_rejected() {
        let signal = CMatrix::<f64>::identity(3, 3);
        let noise = CMatrix::<f64>::zeros(3, 0);
        let pair = SubspacePair::from_parts(signal, noise, vec![1.0; 3]).unwrap();
        let err = pseudospectrum(&pair, &[0.0], hankel_steering(0.5, 1.0, 3)).unwrap_err();
        assert_eq!(err, Error::EmptyNoiseSubspace);
        let pair = ula_pair(&far_snapshot(&[1.0], 20.0, 0), 1);
        assert_eq!(pseudospectrum(&pair, &[], hankel_steering(0.5, 1.0, 9)).unwrap_err(), Error::EmptyGrid);
    }

    #[test]
    fn fusion_identity_max_and_grid_mismatch() {
        let s1 = spectrum(&[1.0, 3.0, 2.0, 5.0]);
        let ones = spectrum(&[1.0; 4]);
        assert_eq!(fuse(&s1, &ones, FusionMode::Product).unwrap(), s1);
        let s2 = spectrum(&[2.0, 3.0, 4.0, 6.0]);
        assert_eq!(fuse(&s1, &s2, FusionMode::Max).unwrap(), s2);
        let other = Spectrum::new(vec![0.0, 1.0, 2.0, 3.0], vec![1.0; 4]).unwrap();
        assert_eq!(fuse(&s1, &other, FusionMode::Product), Err(Error::GridMismatch));
    }

    #[test]
    fn fusion_modes_agree_on_common_peak() {
        let cfg = automotive();
        let opts = MusicOptions { grid: GridSpec { start_deg: -30.0, stop_deg: 30.0, step_deg: 0.05 }, ..Default::default() };
        for seed in 0..10 {
            let a = -20.0 + 3.7 * seed as f64;
            let b = a + 11.3;
            let y = far_snapshot(&[a, b], f64::INFINITY, seed);
            let p = music_spectrum(&y, &cfg, 2, &MusicOptions { fusion: FusionMode::Product, ..opts }).unwrap();
            let m = music_spectrum(&y, &cfg, 2, &MusicOptions { fusion: FusionMode::Max, ..opts }).unwrap();
            assert_eq!(local_maxima(p.values())[0], local_maxima(m.values())[0]);
        }
    }

    #[test]
    fn peak_pick_cases() {
        let tri = spectrum(&[1.0, 2.0, 3.0, 2.0, 1.0]);
        assert!((peak_pick(&tri, 1).unwrap()[0] - 0.2).abs() < 1e-12);
        let twins = spectrum(&[1.0, 3.0, 1.0, 3.0, 1.0]);
        let got = peak_pick(&twins, 2).unwrap();
        assert!((got[0] - 0.1).abs() < 1e-12 && (got[1] - 0.3).abs() < 1e-12);
        let flat = spectrum(&[2.0; 6]);
        assert_eq!(peak_pick(&flat, 1), Err(Error::UnderResolved { found: 0, wanted: 1 }));
        let tall_small = spectrum(&[1.0, 2.0, 1.0, 5.0, 1.0]);
        let got = peak_pick(&tall_small, 2).unwrap();
        assert!(got[0] > got[1]);
    }

    #[test]
    fn noiseless_single_source_estimate() {
        let cfg = automotive();
        let y = far_snapshot(&[5.0], f64::INFINITY, 2);
        let got = estimate_doa_music(&y, &cfg, 1, &MusicOptions::default()).unwrap();
        assert!((got[0].to_degrees() - 5.0).abs() < 0.01);
    }

    #[test]
    fn noiseless_off_grid_pair_is_polished() {
        let cfg = automotive();
        let truth = [-12.3456, 7.891];
        let y = far_snapshot(&truth, f64::INFINITY, 3);
        let mut got: Vec<f64> = estimate_doa_music(&y, &cfg, 2, &MusicOptions::default())
            .unwrap()
            .into_iter()
            .map(f64::to_degrees)
            .collect();
        got.sort_by(f64::total_cmp);
        for (g, t) in got.iter().zip(truth) {
            assert!((g - t).abs() < 1e-3, "{g} vs {t}");
        }
    }

    #[test]
    fn single_ula_mode_and_errors() {
        let cfg = automotive();
        let y = far_snapshot(&[-5.0, 5.0], 30.0, 9);
        for ula in Ula::BOTH {
            let opts = MusicOptions { aperture: MusicAperture::Single(ula), ..Default::default() };
            let mut got = estimate_doa_music(&y, &cfg, 2, &opts).unwrap();
            got.sort_by(f64::total_cmp);
            assert!((got[0].to_degrees() + 5.0).abs() < 0.5);
            assert!((got[1].to_degrees() - 5.0).abs() < 0.5);
        }
        assert!(estimate_doa_music(&y[..20], &cfg, 2, &MusicOptions::default()).is_err());
        assert!(estimate_doa_music(&y, &cfg, 0, &MusicOptions::default()).is_err());
        assert!(estimate_doa_music(&y, &cfg, 8, &MusicOptions::default()).is_err());
    }

    #[test]
    fn csv_export() {
        let s = spectrum(&[1.0, 2.0]);
        let csv = s.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("angle_deg,value"));
        assert_eq!(lines.count(), 2);
    }

    #[test]
    fn deterministic_given_snapshot() {
        let cfg = automotive();
        let snap = snapshot(&cfg, &[Target::from_degrees(250.0, 3.0).unwrap()], 10.0, 5).unwrap();
        let a = estimate_doa_music(&snap.y, &cfg, 1, &MusicOptions::default()).unwrap();
        let b = estimate_doa_music(&snap.y, &cfg, 1, &MusicOptions::default()).unwrap();
        assert_eq!(a, b);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn product_fusion_commutes_and_associates(
            a in proptest::collection::vec(0.1..10.0f64, 8),
            b in proptest::collection::vec(0.1..10.0f64, 8),
            c in proptest::collection::vec(0.1..10.0f64, 8),
        ) {
            let (sa, sb, sc) = (spectrum(&a), spectrum(&b), spectrum(&c));
            let ab = fuse(&sa, &sb, FusionMode::Product).unwrap();
            let ba = fuse(&sb, &sa, FusionMode::Product).unwrap();
            prop_assert_eq!(&ab, &ba);
            let left = fuse(&ab, &sc, FusionMode::Product).unwrap();
            let right = fuse(&sa, &fuse(&sb, &sc, FusionMode::Product).unwrap(), FusionMode::Product).unwrap();
            for (l, r) in left.values().iter().zip(right.values()) {
                prop_assert!((l - r).abs() <= 1e-12 * l.abs());
            }
        }

        #[test]
        fn argmax_invariant_to_snapshot_scaling(seed in 0u64..1000, re in -3.0..3.0f64, im in -3.0..3.0f64) {
            prop_assume!(re.hypot(im) > 0.1);
            let cfg = automotive();
            let opts = MusicOptions { grid: GridSpec { start_deg: -20.0, stop_deg: 20.0, step_deg: 0.1 }, ..Default::default() };
            let y = far_snapshot(&[-6.0, 4.0], 20.0, seed);
            let scaled: Vec<_> = y.iter().map(|z| z * Complex::new(re, im)).collect();
            let s1 = music_spectrum(&y, &cfg, 2, &opts).unwrap();
            let s2 = music_spectrum(&scaled, &cfg, 2, &opts).unwrap();
            prop_assert_eq!(&local_maxima(s1.values())[..2], &local_maxima(s2.values())[..2]);
        }
    }
}
