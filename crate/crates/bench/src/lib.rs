//! Shared configuration builders for the benchmark targets.

use secmimo_core::{PilotDesign, SystemConfig, ValidatedConfig};

/// Reference-scale configuration (N = 128, K = 4) with a subsampled slot grid.
pub fn reference(n_o: usize, t_grid: Vec<usize>) -> ValidatedConfig {
    SystemConfig {
        n: 128,
        k: 4,
        n_e: 4,
        n_o,
        b: 4,
        t: 500,
        p_t_db: 10.0,
        phi: 0.5,
        p_tau: 2.5,
        sigma_psi_deg: 6.0,
        sigma_phi_deg: 6.0,
        beta: vec![1.0; 4],
        beta_e: 1.0,
        xi_ul: 1.0,
        xi_dl: 1.0,
        pilot_design: PilotDesign::TimeOrthogonal,
        t0: 5,
        trials: 64,
        seed: 77,
        t_grid,
    }
    .validate()
    .unwrap()
}
