//! Shared FFT helpers on top of rustfft, with per-thread plan caching.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

thread_local! {
    static PLANS: RefCell<HashMap<(usize, bool), Arc<dyn Fft<f64>>>> =
        RefCell::new(HashMap::new());
}

fn plan(len: usize, forward: bool) -> Arc<dyn Fft<f64>> {
    PLANS.with(|cache| {
        cache
            .borrow_mut()
            .entry((len, forward))
            .or_insert_with(|| {
                let mut planner = FftPlanner::new();
                if forward {
                    planner.plan_fft_forward(len)
                } else {
                    planner.plan_fft_inverse(len)
                }
            })
            .clone()
    })
}

pub fn fft_forward(buf: &mut [Complex64]) {
    plan(buf.len(), true).process(buf);
}

/// Inverse FFT including the 1/N normalization.
pub fn fft_inverse(buf: &mut [Complex64]) {
    let n = buf.len();
    plan(n, false).process(buf);
    let scale = 1.0 / n as f64;
    for v in buf.iter_mut() {
        *v *= scale;
    }
}

/// Forward transform of a real signal, zero-padded or truncated to `n` bins.
pub fn real_to_spectrum(signal: &[f64], n: usize) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = signal
        .iter()
        .take(n)
        .map(|&x| Complex64::new(x, 0.0))
        .collect();
    buf.resize(n, Complex64::ZERO);
    fft_forward(&mut buf);
    buf
}

/// Inverse transform keeping the real part only.
pub fn spectrum_to_real(spectrum: &[Complex64]) -> Vec<f64> {
    let mut buf = spectrum.to_vec();
    fft_inverse(&mut buf);
    buf.into_iter().map(|c| c.re).collect()
}

/// Real inverse transform of a real (conjugate-symmetric) spectrum.
pub fn real_spectrum_to_real(spectrum: &[f64]) -> Vec<f64> {
    let buf: Vec<Complex64> = spectrum.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    spectrum_to_real(&buf)
}

/// Full linear convolution, length `a + b - 1`.
pub fn conv_full(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &av) in a.iter().enumerate() {
        if av == 0.0 {
            continue;
        }
        for (j, &bv) in b.iter().enumerate() {
            out[i + j] += av * bv;
        }
    }
    out
}

/// Causal FIR applied to a signal, output truncated to the signal length.
/// Long kernels go through overlap-save; short ones stay direct.
pub fn filter_same(fir: &[f64], x: &[f64]) -> Vec<f64> {
    if fir.len() > 192 && x.len() > 4 * fir.len() {
        return filter_overlap_save(fir, x);
    }
    let mut y = vec![0.0; x.len()];
    for (k, &h) in fir.iter().enumerate() {
        if h == 0.0 {
            continue;
        }
        for n in k..x.len() {
            y[n] += h * x[n - k];
        }
    }
    y
}

fn filter_overlap_save(fir: &[f64], x: &[f64]) -> Vec<f64> {
    let m = fir.len();
    let block = (4 * m).next_power_of_two();
    let step = block - (m - 1);
    let mut h_spec: Vec<Complex64> = fir.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    h_spec.resize(block, Complex64::ZERO);
    fft_forward(&mut h_spec);

    let mut y = vec![0.0; x.len()];
    let mut buf = vec![Complex64::ZERO; block];
    let mut pos = 0usize;
    while pos < x.len() {
        // Segment covering [pos - (m-1), pos + step), zero-padded at the ends.
        for (i, slot) in buf.iter_mut().enumerate() {
            let idx = pos as i64 + i as i64 - (m as i64 - 1);
            *slot = if idx >= 0 && (idx as usize) < x.len() {
                Complex64::new(x[idx as usize], 0.0)
            } else {
                Complex64::ZERO
            };
        }
        fft_forward(&mut buf);
        for (b, h) in buf.iter_mut().zip(&h_spec) {
            *b *= h;
        }
        fft_inverse(&mut buf);
        let take = step.min(x.len() - pos);
        for i in 0..take {
            y[pos + i] = buf[m - 1 + i].re;
        }
        pos += step;
    }
    y
}
