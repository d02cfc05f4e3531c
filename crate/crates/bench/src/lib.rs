//! Benchmark fixtures shared by the criterion targets.

use kerr_herald::SystemParams;

/// Bistable coherent-drive point at a cutoff of `dim`.
pub fn bistable(dim: usize) -> SystemParams {
    SystemParams::semiclassical(1.5, 2.2, 1.5).with_fock_dim(dim)
}

/// Resonant two-photon drive at a cutoff of `dim`.
pub fn parametric(dim: usize) -> SystemParams {
    SystemParams::parametric(0.0, 10.0, 5.3).with_fock_dim(dim)
}
