//! Array layout: two identical ULAs on the x-axis, symmetric about the origin.
//!
//! Angles are broadside-referenced throughout the crate. A target at range `r`
//! and angle `θ` sits at `(r·sin θ, r·cos θ)`, and `u = sin θ` is its direction
//! cosine along the array axis.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::num::{lit, Real};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// One of the two sub-arrays. `First` is the one at negative x.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Ula {
    First,
    Second,
}

impl Ula {
    pub const BOTH: [Ula; 2] = [Ula::First, Ula::Second];

    pub fn index(self) -> usize {
        match self {
            Ula::First => 0,
            Ula::Second => 1,
        }
    }
}

/// Sparse ELAA geometry and carrier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrayConfig<T> {
    elements: usize,
    spacing: T,
    gap: T,
    wavelength: T,
}

impl<T: Real> ArrayConfig<T> {
    /// `elements` per ULA, intra-ULA `spacing`, edge-to-edge `gap` (D_s), all in
    /// meters except the count.
    pub fn new(elements: usize, spacing: T, gap: T, wavelength: T) -> Result<Self> {
        if elements < 2 {
            return Err(Error::InvalidConfig(format!(
                "need at least 2 elements per ULA, got {elements}"
            )));
        }
        let positive = |v: T| v > T::zero() && v.is_finite();
        if !positive(spacing) {
            return Err(Error::InvalidConfig(format!("spacing must be > 0, got {spacing}")));
        }
        if !positive(gap) {
            return Err(Error::InvalidConfig(format!("gap must be > 0, got {gap}")));
        }
        if !positive(wavelength) {
            return Err(Error::InvalidConfig(format!(
                "wavelength must be > 0, got {wavelength}"
            )));
        }
        Ok(Self { elements, spacing, gap, wavelength })
    }

    /// Half-wavelength spacing, wavelength from the carrier frequency.
    pub fn from_carrier(elements: usize, carrier_hz: T, gap: T) -> Result<Self> {
        if !(carrier_hz > T::zero()) {
            return Err(Error::InvalidConfig(format!(
                "carrier frequency must be > 0, got {carrier_hz}"
            )));
        }
        let wavelength = lit::<T>(SPEED_OF_LIGHT) / carrier_hz;
        Self::new(elements, wavelength / lit(2.0), gap, wavelength)
    }

    /// The 76 GHz automotive layout: 16 elements per ULA at λ/2, D_s = 150λ.
    pub fn automotive_76ghz() -> Self {
        let wavelength = lit::<T>(SPEED_OF_LIGHT) / lit(76e9);
        Self::new(16, wavelength / lit(2.0), wavelength * lit(150.0), wavelength)
            .expect("built-in layout is valid")
    }

    pub fn elements_per_ula(&self) -> usize {
        self.elements
    }

    pub fn total_elements(&self) -> usize {
        2 * self.elements
    }

    pub fn spacing(&self) -> T {
        self.spacing
    }

    pub fn gap(&self) -> T {
        self.gap
    }

    pub fn wavelength(&self) -> T {
        self.wavelength
    }

    pub fn carrier_hz(&self) -> T {
        lit::<T>(SPEED_OF_LIGHT) / self.wavelength
    }

    /// 2π/λ.
    pub fn wavenumber(&self) -> T {
        T::two_pi() / self.wavelength
    }

    /// S_a = (M−1)·d.
    pub fn sub_aperture(&self) -> T {
        self.spacing * lit((self.elements - 1) as f64)
    }

    /// D_a = D_s + 2(M−1)·d.
    pub fn total_aperture(&self) -> T {
        self.gap + self.sub_aperture() * lit(2.0)
    }

    /// D_c = D_s + (M−1)·d, the distance between corresponding elements of the
    /// two ULAs.
    pub fn center_separation(&self) -> T {
        self.gap + self.sub_aperture()
    }

    /// x-coordinate of element `m` of `ula`.
    pub fn position(&self, ula: Ula, m: usize) -> T {
        let half = lit::<T>((self.elements - 1) as f64 / 2.0);
        let side = match ula {
            Ula::First => lit::<T>(-0.5),
            Ula::Second => lit::<T>(0.5),
        };
        (lit::<T>(m as f64) - half) * self.spacing + side * self.center_separation()
    }

    /// x-coordinate of the reference (m = 0) element of `ula`.
    pub fn reference_position(&self, ula: Ula) -> T {
        match ula {
            Ula::First => -(self.sub_aperture() + self.gap / lit(2.0)),
            Ula::Second => self.gap / lit(2.0),
        }
    }

    /// All 2M element x-coordinates, first ULA then second, strictly increasing.
    pub fn element_positions(&self) -> Vec<T> {
        Ula::BOTH
            .iter()
            .flat_map(|&ula| (0..self.elements).map(move |m| self.position(ula, m)))
            .collect()
    }

    pub fn field_regions(&self) -> FieldRegions<T> {
        let lambda = self.wavelength;
        let da = self.total_aperture();
        let sa = self.sub_aperture();
        let dc = self.center_separation();
        let two = lit::<T>(2.0);
        FieldRegions {
            fraunhofer: two * da * da / lambda,
            local_far_field: two * sa * sa / lambda,
            shared_doa: (lit::<T>(5.0) * da).max(lit::<T>(4.0) * da * self.gap / lambda),
            fraunhofer_center_span: two * dc * dc / lambda,
        }
    }
}

/// Range thresholds separating the propagation regimes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldRegions<T> {
    /// 2·D_a²/λ: beyond this the whole ELAA sees a planar wavefront.
    pub fraunhofer: T,
    /// 2·S_a²/λ: beyond this each ULA individually sees a planar wavefront.
    pub local_far_field: T,
    /// max(5·D_a, 4·D_a·D_s/λ): beyond this both ULAs see the same DOA.
    pub shared_doa: T,
    /// 2·(D_s + (M−1)d)²/λ, the Fraunhofer distance under the alternate
    /// aperture reading. Reported only; never used for model selection.
    pub fraunhofer_center_span: T,
}

/// Target state relative to the array center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Target<T> {
    pub range: T,
    /// Broadside-referenced angle in radians, in (−π/2, π/2).
    pub angle: T,
    pub amplitude: Complex<T>,
}

impl<T: Real> Target<T> {
    pub fn new(range: T, angle: T) -> Result<Self> {
        if !(range > T::zero()) || !range.is_finite() {
            return Err(Error::InvalidTarget(format!("range must be > 0, got {range}")));
        }
        if !(angle.abs() < T::frac_pi_2()) {
            return Err(Error::InvalidTarget(format!(
                "angle must lie in (-90°, 90°), got {angle} rad"
            )));
        }
        Ok(Self { range, angle, amplitude: Complex::new(T::one(), T::zero()) })
    }

    pub fn from_degrees(range: T, angle_deg: T) -> Result<Self> {
        Self::new(range, crate::num::deg_to_rad(angle_deg))
    }

    /// Target at Cartesian `(x, y)`, `y > 0` in front of the array.
    pub fn from_position(x: T, y: T) -> Result<Self> {
        if !(y > T::zero()) {
            return Err(Error::InvalidTarget(format!("target must lie in front of the array (y = {y})")));
        }
        Self::new(x.hypot(y), x.atan2(y))
    }

    pub fn with_amplitude(mut self, amplitude: Complex<T>) -> Self {
        self.amplitude = amplitude;
        self
    }

    /// `u = sin θ`.
    pub fn direction_cosine(&self) -> T {
        self.angle.sin()
    }

    pub fn position(&self) -> [T; 2] {
        [self.range * self.angle.sin(), self.range * self.angle.cos()]
    }
}

/// Range and DOA of a target as seen from one ULA's reference element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalView<T> {
    pub range: T,
    /// Broadside angle from the reference element to the target.
    pub angle: T,
}

impl<T: Real> LocalView<T> {
    pub fn direction_cosine(&self) -> T {
        self.angle.sin()
    }
}

/// Per-ULA range and DOA, indexed by [`Ula::index`].
pub fn local_geometry<T: Real>(cfg: &ArrayConfig<T>, target: &Target<T>) -> Result<[LocalView<T>; 2]> {
    let r = target.range;
    let u = target.direction_cosine();
    let view = |ula: Ula| -> Result<LocalView<T>> {
        let x = cfg.reference_position(ula);
        let range = (r * r - lit::<T>(2.0) * r * x * u + x * x).max(T::zero()).sqrt();
        if range <= T::eps() * lit(16.0) * r.max(x.abs()) {
            return Err(Error::CoincidentTarget { ula: ula.index() + 1 });
        }
        let local_u = ((r * u - x) / range).max(-T::one()).min(T::one());
        Ok(LocalView { range, angle: local_u.asin() })
    };
    Ok([view(Ula::First)?, view(Ula::Second)?])
}
