//! Cyclic d-dimensional FFT helpers over the full dyadic grid.
//!
//! Grids are laid out axis-major: linear index = Σ idx[a] · n^a with axis 0
//! fastest. Cyclic correlation on this layout is exactly the torus offset
//! count/convolution the energy and Γ modules need.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

fn fft_all_axes(buf: &mut [Complex64], dim: usize, n: usize, inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let fft = if inverse { planner.plan_fft_inverse(n) } else { planner.plan_fft_forward(n) };
    let total = buf.len();
    let mut line = vec![Complex64::default(); n];
    for axis in 0..dim {
        let stride = n.pow(axis as u32);
        let block = stride * n;
        // every line along `axis` starts at base + offset with offset < stride
        for base in (0..total).step_by(block) {
            for off in 0..stride {
                let start = base + off;
                for k in 0..n {
                    line[k] = buf[start + k * stride];
                }
                fft.process(&mut line);
                for k in 0..n {
                    buf[start + k * stride] = line[k];
                }
            }
        }
    }
}

/// Cyclic autocorrelation `c(δ) = Σ_x v(x) v(x+δ)` of a real grid.
pub fn autocorrelation(values: &[f64], dim: usize, n: usize) -> Vec<f64> {
    assert_eq!(values.len(), n.pow(dim as u32));
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft_all_axes(&mut buf, dim, n, false);
    for z in buf.iter_mut() {
        *z = Complex64::new(z.norm_sqr(), 0.0);
    }
    fft_all_axes(&mut buf, dim, n, true);
    let scale = 1.0 / values.len() as f64;
    buf.iter().map(|z| z.re * scale).collect()
}

/// Cyclic convolution of a real grid with a fixed real kernel.
pub struct CyclicConvolver {
    kernel_hat: Vec<Complex64>,
    dim: usize,
    n: usize,
}

impl CyclicConvolver {
    pub fn new(kernel: &[f64], dim: usize, n: usize) -> Self {
        assert_eq!(kernel.len(), n.pow(dim as u32));
        let mut kernel_hat: Vec<Complex64> =
            kernel.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft_all_axes(&mut kernel_hat, dim, n, false);
        CyclicConvolver { kernel_hat, dim, n }
    }

    pub fn apply(&self, values: &[f64]) -> Vec<f64> {
        assert_eq!(values.len(), self.kernel_hat.len());
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft_all_axes(&mut buf, self.dim, self.n, false);
        for (z, k) in buf.iter_mut().zip(&self.kernel_hat) {
            *z *= k;
        }
        fft_all_axes(&mut buf, self.dim, self.n, true);
        let scale = 1.0 / values.len() as f64;
        buf.iter().map(|z| z.re * scale).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn autocorrelation_matches_direct_2d() {
        let n = 8;
        let dim = 2;
        let mut v = vec![0.0; n * n];
        for (i, x) in v.iter_mut().enumerate() {
            *x = ((i * 2654435761) % 7) as f64 / 3.0;
        }
        let fast = autocorrelation(&v, dim, n);
        for dy in 0..n {
            for dx in 0..n {
                let mut acc = 0.0;
                for y in 0..n {
                    for x in 0..n {
                        acc += v[x + n * y] * v[(x + dx) % n + n * ((y + dy) % n)];
                    }
                }
                let got = fast[dx + n * dy];
                assert!((acc - got).abs() < 1e-9, "δ=({dx},{dy}): {acc} vs {got}");
            }
        }
    }

    #[test]
    fn convolver_matches_direct_1d() {
        let n = 16;
        let kernel: Vec<f64> = (0..n).map(|i| 1.0 / (1.0 + i as f64)).collect();
        let v: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let conv = CyclicConvolver::new(&kernel, 1, n);
        let fast = conv.apply(&v);
        for x in 0..n {
            let mut acc = 0.0;
            for y in 0..n {
                acc += kernel[(x + n - y) % n] * v[y];
            }
            assert!((acc - fast[x]).abs() < 1e-10);
        }
    }
}
