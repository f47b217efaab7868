//! Unitary N-dimensional FFT over row-major scalar fields, built on `rustfft`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::grid::GridSpec;

type Plans = (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>);

fn plans(n: usize) -> Plans {
    static CACHE: OnceLock<Mutex<HashMap<usize, Plans>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("fft plan cache poisoned");
    guard
        .entry(n)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            (planner.plan_fft_forward(n), planner.plan_fft_inverse(n))
        })
        .clone()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

/// In-place unitary transform of one scalar field (scaled by `n^{-N/2}`).
pub fn transform(grid: &GridSpec, data: &mut [Complex64], direction: Direction) {
    let n = grid.points();
    let (fwd, inv) = plans(n);
    let plan = match direction {
        Direction::Forward => fwd,
        Direction::Inverse => inv,
    };
    let mut line = vec![Complex64::new(0.0, 0.0); n];
    let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
    for axis in 0..grid.dim() {
        let stride = grid.stride(axis);
        let block = stride * n;
        let outer = grid.len() / block;
        for o in 0..outer {
            for inner in 0..stride {
                let base = o * block + inner;
                for (k, slot) in line.iter_mut().enumerate() {
                    *slot = data[base + k * stride];
                }
                plan.process_with_scratch(&mut line, &mut scratch);
                for (k, v) in line.iter().enumerate() {
                    data[base + k * stride] = *v;
                }
            }
        }
    }
    let scale = (grid.len() as f64).sqrt().recip();
    data.iter_mut().for_each(|v| *v *= scale);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_maps_to_zero_mode() {
        let g = GridSpec::periodic(2, 1.0, 8).unwrap();
        let mut data = vec![Complex64::new(1.0, 0.0); g.len()];
        transform(&g, &mut data, Direction::Forward);
        assert!((data[0].re - 8.0).abs() < 1e-12);
        assert!(data[1..].iter().all(|v| v.norm() < 1e-12));
    }

    #[test]
    fn roundtrip() {
        let g = GridSpec::periodic(3, 1.0, 6).unwrap();
        let orig: Vec<Complex64> = (0..g.len())
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect();
        let mut data = orig.clone();
        transform(&g, &mut data, Direction::Forward);
        transform(&g, &mut data, Direction::Inverse);
        for (a, b) in data.iter().zip(&orig) {
            assert!((a - b).norm() < 1e-13);
        }
    }
}
