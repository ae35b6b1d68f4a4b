//! Energy, variations, ellipticity symbols and the second-variation spectrum.

pub mod eigen;
mod energy;
mod identities;
pub mod operator;
pub mod symbol;
mod variation;

pub use eigen::{
    deformation_report, spectrum, DeformationReport, DenseSolver, EigenSolver, Eigenpairs, Lobpcg,
    SpectrumReport, DENSE_LIMIT, KERNEL_THRESHOLD,
};
pub use energy::{
    dirichlet_energy, energy, perturb_spinor, perturb_state, torsion_energy, torsion_energy_of,
};
pub use identities::{state_identity_checks, torsion_identity_checks, IdentityReport};
pub use operator::{
    self_adjointness, BochnerLaplacian, LinearOperator, MidpointSecondVariation,
    SecondVariationOperator, SelfAdjointness,
};
pub use symbol::{
    discrete_symbol, sample_symbols, symbol_check, DiscreteSymbol, SymbolReport, SymbolSampling,
};
pub use variation::{
    delta_t, delta_t_continuum, delta_t_spinor, first_variation, gradient_check, hessian_fd,
    GradientCheckRow,
};
