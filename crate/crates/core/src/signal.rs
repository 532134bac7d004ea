//! Steering vectors, single-snapshot measurements and the array-factor
//! diagnostic.
//!
//! Element ordering everywhere is ULA 1 (m = 0..M−1) followed by ULA 2.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::geometry::{local_geometry, ArrayConfig, FieldRegions, Target, Ula};
use crate::num::{cis, lit, modulus, to_f64, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SteeringModel {
    /// Spherical wavefront, exact element distances.
    Exact,
    /// Planar wavefront across the whole ELAA, common range phase dropped.
    FarField,
    /// Planar within each ULA, per-ULA range and local DOA.
    NearFieldLocalPlanar,
    /// Planar within each ULA, per-ULA range, global DOA for both ULAs.
    NearFieldSharedDoa,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteeringVector<T> {
    pub entries: Vec<Complex<T>>,
    pub model: SteeringModel,
}

impl<T: Real> SteeringVector<T> {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Splits into the ULA 1 and ULA 2 halves.
    pub fn halves(&self) -> (&[Complex<T>], &[Complex<T>]) {
        self.entries.split_at(self.entries.len() / 2)
    }
}

/// `a(n,m) = exp(−j·2π/λ·‖p − u(n,m)‖)`.
pub fn steering_exact<T: Real>(cfg: &ArrayConfig<T>, target: &Target<T>) -> Result<SteeringVector<T>> {
    // Route through local_geometry so coincident targets are rejected.
    local_geometry(cfg, target)?;
    let k = cfg.wavenumber();
    let [px, py] = target.position();
    let entries = cfg
        .element_positions()
        .into_iter()
        .map(|x| {
            let dx = px - x;
            cis(-k * dx.hypot(py))
        })
        .collect();
    Ok(SteeringVector { entries, model: SteeringModel::Exact })
}

/// `a(n,m) = exp(+j·2π/λ·x(n,m)·sin θ)`.
pub fn steering_farfield<T: Real>(cfg: &ArrayConfig<T>, theta: T) -> SteeringVector<T> {
    let ku = cfg.wavenumber() * theta.sin();
    let entries = cfg.element_positions().into_iter().map(|x| cis(ku * x)).collect();
    SteeringVector { entries, model: SteeringModel::FarField }
}

/// `a(n,m) = exp(−j·2π/λ·r(n,0))·exp(+j·2π/λ·m·d·sin θ_n)`, with `θ_n` the
/// local DOA, or the global DOA when `shared_doa` is set.
pub fn steering_nearfield<T: Real>(
    cfg: &ArrayConfig<T>,
    target: &Target<T>,
    shared_doa: bool,
) -> Result<SteeringVector<T>> {
    let views = local_geometry(cfg, target)?;
    let k = cfg.wavenumber();
    let d = cfg.spacing();
    let mut entries = Vec::with_capacity(cfg.total_elements());
    for ula in Ula::BOTH {
        let view = views[ula.index()];
        let u = if shared_doa { target.direction_cosine() } else { view.direction_cosine() };
        let reference = cis(-k * view.range);
        for m in 0..cfg.elements_per_ula() {
            entries.push(reference * cis(k * lit::<T>(m as f64) * d * u));
        }
    }
    let model = if shared_doa {
        SteeringModel::NearFieldSharedDoa
    } else {
        SteeringModel::NearFieldLocalPlanar
    };
    Ok(SteeringVector { entries, model })
}

/// Picks the cheapest model that is valid at `range`.
pub fn select_model<T: Real>(range: T, regions: &FieldRegions<T>) -> SteeringModel {
    if range >= regions.fraunhofer {
        SteeringModel::FarField
    } else if range >= regions.shared_doa {
        SteeringModel::NearFieldSharedDoa
    } else if range >= regions.local_far_field {
        SteeringModel::NearFieldLocalPlanar
    } else {
        SteeringModel::Exact
    }
}

pub fn steering<T: Real>(
    cfg: &ArrayConfig<T>,
    target: &Target<T>,
    model: SteeringModel,
) -> Result<SteeringVector<T>> {
    match model {
        SteeringModel::Exact => steering_exact(cfg, target),
        SteeringModel::FarField => Ok(steering_farfield(cfg, target.angle)),
        SteeringModel::NearFieldLocalPlanar => steering_nearfield(cfg, target, false),
        SteeringModel::NearFieldSharedDoa => steering_nearfield(cfg, target, true),
    }
}

/// How the generating steering model is chosen per target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelChoice<T> {
    /// By target range against the given thresholds.
    Auto(FieldRegions<T>),
    Fixed(SteeringModel),
}

/// How per-target complex amplitudes are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AmplitudePolicy {
    /// `|s_k| = |target.amplitude|`, phase uniform on [0, 2π) from the seed.
    RandomPhase,
    /// `s_k = target.amplitude`.
    AsGiven,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnapshotOptions<T> {
    pub model: ModelChoice<T>,
    pub amplitudes: AmplitudePolicy,
}

impl<T: Real> SnapshotOptions<T> {
    pub fn auto(cfg: &ArrayConfig<T>) -> Self {
        Self { model: ModelChoice::Auto(cfg.field_regions()), amplitudes: AmplitudePolicy::RandomPhase }
    }
}

/// One simultaneous complex sample across all 2M elements.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot<T> {
    pub y: Vec<Complex<T>>,
    /// Per-element SNR; `+∞` means noise was disabled.
    pub snr_db: T,
    pub seed: u64,
    pub truth: Vec<Target<T>>,
}

impl<T: Real> Snapshot<T> {
    /// Splits into the ULA 1 and ULA 2 measurement halves.
    pub fn halves(&self) -> (&[Complex<T>], &[Complex<T>]) {
        self.y.split_at(self.y.len() / 2)
    }
}

impl Snapshot<f64> {
    /// Little-endian f64 pairs, `re` then `im`, element order as in `y`.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        self.y
            .iter()
            .flat_map(|z| z.re.to_le_bytes().into_iter().chain(z.im.to_le_bytes()))
            .collect()
    }

    /// Inverse of [`Snapshot::to_le_bytes`]; `None` if the length is not a
    /// multiple of 16 bytes.
    pub fn samples_from_le_bytes(bytes: &[u8]) -> Option<Vec<Complex<f64>>> {
        if !bytes.len().is_multiple_of(16) {
            return None;
        }
        Some(
            bytes
                .chunks_exact(16)
                .map(|c| {
                    let re = f64::from_le_bytes(c[..8].try_into().unwrap());
                    let im = f64::from_le_bytes(c[8..].try_into().unwrap());
                    Complex::new(re, im)
                })
                .collect(),
        )
    }
}

/// Per-element noise variance for a unit-power source at `snr_db`.
pub fn noise_variance<T: Real>(snr_db: T) -> T {
    if !snr_db.is_finite() && snr_db > T::zero() {
        return T::zero();
    }
    lit::<T>(10.0).powf(-snr_db / lit(10.0))
}

/// `y = Σ s_k·a(r_k, θ_k) + n` with the model chosen by range.
pub fn snapshot<T: Real>(cfg: &ArrayConfig<T>, targets: &[Target<T>], snr_db: T, seed: u64) -> Result<Snapshot<T>> {
    snapshot_with(cfg, targets, snr_db, seed, &SnapshotOptions::auto(cfg))
}

/// Like [`snapshot`] with explicit model and amplitude policies. Deterministic
/// in `seed`: target phases are drawn first, then noise, element by element
/// (real part before imaginary part).
pub fn snapshot_with<T: Real>(
    cfg: &ArrayConfig<T>,
    targets: &[Target<T>],
    snr_db: T,
    seed: u64,
    opts: &SnapshotOptions<T>,
) -> Result<Snapshot<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = cfg.total_elements();
    let mut y = vec![Complex::new(T::zero(), T::zero()); n];
    for target in targets {
        let model = match opts.model {
            ModelChoice::Auto(regions) => select_model(target.range, &regions),
            ModelChoice::Fixed(model) => model,
        };
        let a = steering(cfg, target, model)?;
        let s = match opts.amplitudes {
            AmplitudePolicy::AsGiven => target.amplitude,
            AmplitudePolicy::RandomPhase => {
                let phase: f64 = rng.random::<f64>() * std::f64::consts::TAU;
                cis(lit::<T>(phase)) * modulus(target.amplitude)
            }
        };
        for (yi, ai) in y.iter_mut().zip(&a.entries) {
            *yi += *ai * s;
        }
    }
    let variance = noise_variance(snr_db);
    if variance > T::zero() {
        let scale = to_f64(variance / lit(2.0)).sqrt();
        for yi in y.iter_mut() {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *yi += Complex::new(lit::<T>(re * scale), lit::<T>(im * scale));
        }
    }
    Ok(Snapshot { y, snr_db, seed, truth: targets.to_vec() })
}

/// Which elements the array factor sums over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Aperture {
    Elaa,
    SubUla,
}

/// Normalized array factor `|Σ e^{j2πxu/λ}| / N` in dB on a grid of broadside
/// angles (radians). The peak is 0 dB at broadside.
pub fn array_factor<T: Real>(cfg: &ArrayConfig<T>, grid: &[T], aperture: Aperture) -> Vec<T> {
    let positions: Vec<T> = match aperture {
        Aperture::Elaa => cfg.element_positions(),
        Aperture::SubUla => (0..cfg.elements_per_ula()).map(|m| cfg.position(Ula::First, m)).collect(),
    };
    let count = lit::<T>(positions.len() as f64);
    let k = cfg.wavenumber();
    let floor = lit::<T>(1e-15);
    grid.iter()
        .map(|theta| {
            let ku = k * theta.sin();
            let sum = positions
                .iter()
                .fold(Complex::new(T::zero(), T::zero()), |acc, &x| acc + cis(ku * x));
            let magnitude = (modulus(sum) / count).max(floor);
            lit::<T>(20.0) * magnitude.log10()
        })
        .collect()
}
