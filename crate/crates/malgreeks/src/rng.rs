//! Counter-based per-path random number streams.
//!
//! Each path owns an independent ChaCha substream keyed by
//! `(seed, path_index)`, so the increment sequence of a path does not
//! depend on execution order or worker count. Two standard-normal draws
//! are consumed per step (one for each driving Brownian motion).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::path::TimeGrid;

/// Address of one path's random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStream {
    pub seed: u64,
    pub path_index: u64,
}

impl RngStream {
    pub fn new(seed: u64, path_index: u64) -> Self {
        RngStream { seed, path_index }
    }

    /// Generator positioned at the start of this path's substream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.path_index);
        rng
    }
}

/// Draw the two increment sequences for one path; `dw[i] ~ N(0, dt_i)`.
pub fn draw_increments_into(stream: &RngStream, grid: &TimeGrid, dw: &mut [f64], dwp: &mut [f64]) {
    debug_assert_eq!(dw.len(), grid.n_steps());
    debug_assert_eq!(dwp.len(), grid.n_steps());
    let mut rng = stream.rng();
    for i in 0..grid.n_steps() {
        let sqrt_dt = grid.dt(i).sqrt();
        let z1: f64 = StandardNormal.sample(&mut rng);
        let z2: f64 = StandardNormal.sample(&mut rng);
        dw[i] = z1 * sqrt_dt;
        dwp[i] = z2 * sqrt_dt;
    }
}

/// Allocating variant of [`draw_increments_into`].
pub fn draw_increments(stream: &RngStream, grid: &TimeGrid) -> (Vec<f64>, Vec<f64>) {
    let mut dw = vec![0.0; grid.n_steps()];
    let mut dwp = vec![0.0; grid.n_steps()];
    draw_increments_into(stream, grid, &mut dw, &mut dwp);
    (dw, dwp)
}
