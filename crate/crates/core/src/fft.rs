//! Complex FFTs of arbitrary length.
//!
//! Power-of-two lengths use an iterative radix-2 transform; every other
//! length goes through Bluestein's chirp-z algorithm on a padded radix-2
//! plan. Forward transforms are unnormalized, inverse transforms divide by
//! the length, so `inverse(forward(x)) == x` up to rounding.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::grid::Grid;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

#[derive(Debug, Clone)]
struct Radix2 {
    n: usize,
    // twiddles[k] = exp(-2πik/n), k < n/2
    twiddles: Vec<Complex64>,
    bitrev: Vec<u32>,
}

impl Radix2 {
    fn new(n: usize) -> Self {
        debug_assert!(n.is_power_of_two());
        let bits = n.trailing_zeros();
        let bitrev = (0..n as u32)
            .map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (32 - bits) })
            .collect();
        let twiddles = (0..n / 2)
            .map(|k| {
                let a = -2.0 * PI * k as f64 / n as f64;
                Complex64::new(libm::cos(a), libm::sin(a))
            })
            .collect();
        Self { n, twiddles, bitrev }
    }

    /// Unnormalized transform; `inverse` conjugates the twiddles.
    fn run(&self, data: &mut [Complex64], inverse: bool) {
        let n = self.n;
        for i in 0..n {
            let j = self.bitrev[i] as usize;
            if i < j {
                data.swap(i, j);
            }
        }
        let mut len = 2;
        while len <= n {
            let half = len / 2;
            let step = n / len;
            for start in (0..n).step_by(len) {
                for k in 0..half {
                    let mut w = self.twiddles[k * step];
                    if inverse {
                        w = w.conj();
                    }
                    let a = data[start + k];
                    let b = data[start + k + half] * w;
                    data[start + k] = a + b;
                    data[start + k + half] = a - b;
                }
            }
            len <<= 1;
        }
    }
}

#[derive(Debug, Clone)]
struct Bluestein {
    n: usize,
    inner: Radix2,
    // chirp[k] = exp(-iπk²/n)
    chirp: Vec<Complex64>,
    // forward transform of the conjugate chirp filter
    filter: Vec<Complex64>,
}

impl Bluestein {
    fn new(n: usize) -> Self {
        let m = (2 * n - 1).next_power_of_two();
        let inner = Radix2::new(m);
        let chirp: Vec<Complex64> = (0..n)
            .map(|k| {
                // k² mod 2n keeps the angle small for large k
                let k2 = ((k as u128 * k as u128) % (2 * n as u128)) as f64;
                let a = -PI * k2 / n as f64;
                Complex64::new(libm::cos(a), libm::sin(a))
            })
            .collect();
        let mut filter = vec![Complex64::new(0.0, 0.0); m];
        filter[0] = chirp[0].conj();
        for k in 1..n {
            filter[k] = chirp[k].conj();
            filter[m - k] = chirp[k].conj();
        }
        inner.run(&mut filter, false);
        Self {
            n,
            inner,
            chirp,
            filter,
        }
    }

    fn run(&self, data: &mut [Complex64], inverse: bool, scratch: &mut Vec<Complex64>) {
        let n = self.n;
        let m = self.inner.n;
        scratch.clear();
        scratch.resize(m, Complex64::new(0.0, 0.0));
        for k in 0..n {
            let x = if inverse { data[k].conj() } else { data[k] };
            scratch[k] = x * self.chirp[k];
        }
        self.inner.run(scratch, false);
        for (s, f) in scratch.iter_mut().zip(self.filter.iter()) {
            *s *= f;
        }
        self.inner.run(scratch, true);
        let norm = 1.0 / m as f64;
        for k in 0..n {
            let y = scratch[k] * self.chirp[k] * norm;
            data[k] = if inverse { y.conj() } else { y };
        }
    }
}

#[derive(Debug, Clone)]
enum Kernel {
    Trivial,
    Radix2(Radix2),
    Bluestein(Bluestein),
}

/// A reusable 1-D transform plan for one length.
#[derive(Debug, Clone)]
pub struct Fft {
    n: usize,
    kernel: Kernel,
}

impl Fft {
    pub fn new(n: usize) -> Self {
        let kernel = if n <= 1 {
            Kernel::Trivial
        } else if n.is_power_of_two() {
            Kernel::Radix2(Radix2::new(n))
        } else {
            Kernel::Bluestein(Bluestein::new(n))
        };
        Self { n, kernel }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn process(&self, data: &mut [Complex64], dir: Direction) {
        let mut scratch = Vec::new();
        self.process_with_scratch(data, dir, &mut scratch);
    }

    pub fn process_with_scratch(&self, data: &mut [Complex64], dir: Direction, scratch: &mut Vec<Complex64>) {
        assert_eq!(data.len(), self.n, "fft length mismatch");
        let inverse = dir == Direction::Inverse;
        match &self.kernel {
            Kernel::Trivial => {}
            Kernel::Radix2(p) => p.run(data, inverse),
            Kernel::Bluestein(p) => p.run(data, inverse, scratch),
        }
        if inverse && self.n > 1 {
            let norm = 1.0 / self.n as f64;
            for v in data.iter_mut() {
                *v *= norm;
            }
        }
    }
}

/// Separable 2-D transform plan.
#[derive(Debug, Clone)]
pub struct Fft2d {
    rows: usize,
    cols: usize,
    row_plan: Fft,
    col_plan: Fft,
}

impl Fft2d {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            row_plan: Fft::new(cols),
            col_plan: Fft::new(rows),
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn process(&self, grid: &mut Grid<Complex64>, dir: Direction) {
        assert_eq!(grid.dims(), (self.rows, self.cols), "fft2d dims mismatch");
        let mut scratch = Vec::new();
        for r in 0..self.rows {
            self.row_plan.process_with_scratch(grid.row_mut(r), dir, &mut scratch);
        }
        let mut column = vec![Complex64::new(0.0, 0.0); self.rows];
        let data = grid.as_mut_slice();
        for c in 0..self.cols {
            for r in 0..self.rows {
                column[r] = data[r * self.cols + c];
            }
            self.col_plan.process_with_scratch(&mut column, dir, &mut scratch);
            for r in 0..self.rows {
                data[r * self.cols + c] = column[r];
            }
        }
    }

    /// Forward transform of a real grid.
    pub fn forward_real(&self, grid: &Grid<f64>) -> Grid<Complex64> {
        let mut out = grid.map(|&v| Complex64::new(v, 0.0));
        self.process(&mut out, Direction::Forward);
        out
    }

    /// Inverse transform keeping only the real part.
    pub fn inverse_real(&self, spectrum: &Grid<Complex64>) -> Grid<f64> {
        let mut tmp = spectrum.clone();
        self.process(&mut tmp, Direction::Inverse);
        tmp.map(|v| v.re)
    }
}

/// Signed frequency index of FFT bin `k` out of `n` (bins above n/2 are negative).
#[inline]
pub fn signed_bin(k: usize, n: usize) -> isize {
    if k <= n / 2 {
        k as isize
    } else {
        k as isize - n as isize
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::vec::Vec;

    fn naive_dft(x: &[Complex64]) -> Vec<Complex64> {
        let n = x.len();
        (0..n)
            .map(|k| {
                x.iter().enumerate().fold(Complex64::new(0.0, 0.0), |acc, (j, v)| {
                    let a = -2.0 * PI * (k * j) as f64 / n as f64;
                    acc + v * Complex64::new(a.cos(), a.sin())
                })
            })
            .collect()
    }

    fn signal(n: usize) -> Vec<Complex64> {
        (0..n)
            .map(|i| Complex64::new((i as f64 * 0.37).sin() + 0.1 * i as f64, (i as f64 * 1.3).cos()))
            .collect()
    }

    #[test]
    fn matches_naive_dft_for_many_lengths() {
        for n in [1usize, 2, 3, 5, 8, 12, 16, 17, 30, 64, 70, 100] {
            let x = signal(n);
            let expected = naive_dft(&x);
            let mut y = x.clone();
            Fft::new(n).process(&mut y, Direction::Forward);
            for (a, b) in y.iter().zip(expected.iter()) {
                assert!((a - b).norm() < 1e-9 * (1.0 + b.norm()), "n={n}");
            }
        }
    }

    #[test]
    fn inverse_round_trips() {
        for n in [7usize, 32, 45] {
            let x = signal(n);
            let plan = Fft::new(n);
            let mut y = x.clone();
            plan.process(&mut y, Direction::Forward);
            plan.process(&mut y, Direction::Inverse);
            for (a, b) in y.iter().zip(x.iter()) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn two_d_round_trip_non_square() {
        let g = Grid::from_fn(6, 10, |r, c| (r * 3 + c) as f64 * 0.25 - 2.0);
        let plan = Fft2d::new(6, 10);
        let spec = plan.forward_real(&g);
        // DC bin carries the sum
        let sum: f64 = g.iter().sum();
        assert!((spec[(0, 0)].re - sum).abs() < 1e-10);
        let back = plan.inverse_real(&spec);
        for (a, b) in back.iter().zip(g.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
