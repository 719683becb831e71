//! Numerical ergodic theory on circle and torus maps: transfer operators and
//! conformal measures, pressure and entropy estimators, hyperbolic times,
//! and detection of SRB-like measures through pseudo-basins.

pub mod error;
pub mod hyperbolic;
pub mod maps;
pub mod measure;
pub mod orbit;
pub mod point;
pub mod potential;
pub mod precision;
pub mod pressure;
pub mod rng;
pub mod srb;
pub mod stats;
pub mod transfer;

pub use error::{ErgoError, Result};
pub use maps::{make_map, make_map_named, CircleMap, MapModel, MapSpec};
pub use measure::{
    birkhoff, empirical, partition_entropy, pushforward, weak_star_dist, BirkhoffAverage,
    EmpiricalMeasure, Measure, Moments, Observable, ReferenceMeasure, TestFunctionBasis,
    UlamMeasure,
};
pub use orbit::{dyn_ball, iterate, DynBall, Orbit, OrbitRecord};
pub use point::{CirclePoint, TorusPoint};
pub use potential::Potential;
pub use precision::Dd;
pub use transfer::{
    conformal_solve, gibbs_check, jacobian_check, transfer_apply, ConformalSolution, GibbsReport,
    TransferDiscretization,
};
pub use pressure::{
    entropy_spanning, local_entropy, pesin_defect, pressure_separated, DefectReport, PesinConfig,
    PressureEstimate,
};
pub use hyperbolic::{
    contraction_check, expanding_membership, ht_frequency, scan_hyperbolic_times,
    HyperbolicTimeRecord,
};
pub use srb::{
    ldp_rate, pseudo_basin_mass, pseudo_basin_masses, srb_cluster, srb_cluster_horizons,
    weak_srb_verdict, ClusterReport, LdpReport, PseudoBasinEstimate, WeakSrbVerdict,
};
