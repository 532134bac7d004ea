//! Single-snapshot direction-of-arrival estimation and near-field localization
//! for sparse arrays built from two widely separated uniform linear arrays.
//!
//! Every estimator is generic over the real scalar ([`Real`], `f32` or `f64`);
//! the `*64` aliases at the crate root fix the common double-precision case.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod esprit;
pub mod geometry;
pub mod music;
pub mod nearfield;
pub mod num;
pub mod signal;
pub mod subspace;

pub use error::{Error, Result};
pub use esprit::{
    angles_from_eigenvalue, angles_from_eigenvalues, dealias, estimate_doa_esprit, pair_eigenvalues, selection_pairs,
    solve_psi, Candidate, CandidateSet, EigenPairing, EspritEstimate, EspritOptions, PairingBasis, Resolved, ShiftPair,
    SubspaceMode,
};
pub use geometry::{local_geometry, ArrayConfig, FieldRegions, LocalView, Target, Ula, SPEED_OF_LIGHT};
pub use music::{
    angle_grid, estimate_doa_music, fuse, hankel_steering, music_spectrum, peak_pick, pseudospectrum, FusionMode,
    GridSpec, MusicAperture, MusicOptions, Spectrum,
};
pub use nearfield::{
    associate, associate_exhaustive, local_doas, localize, triangulate, triangulate_angles, Association, AssociationRule,
    BearingLine, Fix, LocalDoas, LocalizeOptions, Localization, Located,
};
pub use num::Real;
pub use signal::{
    array_factor, snapshot, snapshot_with, steering, steering_exact, steering_farfield, steering_nearfield,
    Aperture, AmplitudePolicy, ModelChoice, Snapshot, SnapshotOptions, SteeringModel, SteeringVector,
};

pub type ArrayConfig64 = ArrayConfig<f64>;
pub type ArrayConfig32 = ArrayConfig<f32>;
pub type Target64 = Target<f64>;
pub type Target32 = Target<f32>;
pub type Snapshot64 = Snapshot<f64>;
pub type Snapshot32 = Snapshot<f32>;
