//! Single-precision forward pass with AVX2/FMA kernels.

use crate::approximator::{Layer, MAX_WIDTH};

/// Pre-activation network output for `input`, or `None` when the CPU lacks
/// AVX2/FMA.
pub(crate) fn forward_f32(layers: &[Layer<f32>], input: &[f32]) -> Option<f32> {
    #[cfg(target_arch = "x86_64")]
    if std::arch::is_x86_feature_detected!("avx2") && std::arch::is_x86_feature_detected!("fma") {
        // SAFETY: both features were detected at runtime.
        return Some(unsafe { x86::forward(layers, input) });
    }
    let _ = (layers, input);
    None
}

#[cfg(target_arch = "x86_64")]
mod x86 {
    use std::arch::x86_64::*;

    use super::{Layer, MAX_WIDTH};

    #[target_feature(enable = "avx2,fma")]
    pub(super) fn forward(layers: &[Layer<f32>], input: &[f32]) -> f32 {
        let mut buf_a = [0f32; MAX_WIDTH];
        let mut buf_b = [0f32; MAX_WIDTH];
        buf_a[..input.len()].copy_from_slice(input);
        let (mut a, mut b) = (&mut buf_a, &mut buf_b);
        let last = layers.len() - 1;
        for (i, l) in layers.iter().enumerate() {
            let relu = i < last;
            let (x, out) = (&a[..l.inputs], &mut b[..l.outputs]);
            match l.outputs {
                8 => blocked::<1>(l, x, out, relu),
                16 => blocked::<2>(l, x, out, relu),
                24 => blocked::<3>(l, x, out, relu),
                32 => blocked::<4>(l, x, out, relu),
                40 => blocked::<5>(l, x, out, relu),
                48 => blocked::<6>(l, x, out, relu),
                56 => blocked::<7>(l, x, out, relu),
                64 => blocked::<8>(l, x, out, relu),
                _ => plain(l, x, out, relu),
            }
            std::mem::swap(&mut a, &mut b);
        }
        a[0]
    }

    /// `NB` eight-lane accumulators held in registers across all inputs.
    #[target_feature(enable = "avx2,fma")]
    fn blocked<const NB: usize>(l: &Layer<f32>, x: &[f32], out: &mut [f32], relu: bool) {
        assert!(l.outputs == 8 * NB && out.len() == l.outputs && l.weights.len() == x.len() * l.outputs);
        let mut acc = [_mm256_setzero_ps(); NB];
        for (j, a) in acc.iter_mut().enumerate() {
            // SAFETY: bias holds 8·NB values.
            *a = unsafe { _mm256_loadu_ps(l.bias.as_ptr().add(8 * j)) };
        }
        // Branch-free compaction of the non-zero inputs; after ReLU about
        // half are zero in no predictable pattern.
        let mut active = [0u16; MAX_WIDTH];
        let mut k = 0;
        for (i, &xi) in x.iter().enumerate() {
            active[k] = i as u16;
            k += usize::from(xi != 0.0);
        }
        for &i in &active[..k] {
            let i = usize::from(i);
            let xb = _mm256_set1_ps(x[i]);
            // SAFETY: row i spans weights[i·8NB .. (i+1)·8NB], checked above.
            let row = unsafe { l.weights.as_ptr().add(i * 8 * NB) };
            for (j, a) in acc.iter_mut().enumerate() {
                *a = _mm256_fmadd_ps(xb, unsafe { _mm256_loadu_ps(row.add(8 * j)) }, *a);
            }
        }
        let zero = _mm256_setzero_ps();
        for (j, a) in acc.into_iter().enumerate() {
            let v = if relu { _mm256_max_ps(a, zero) } else { a };
            // SAFETY: out holds 8·NB values.
            unsafe { _mm256_storeu_ps(out.as_mut_ptr().add(8 * j), v) };
        }
    }

    #[target_feature(enable = "avx2,fma")]
    fn plain(l: &Layer<f32>, x: &[f32], out: &mut [f32], relu: bool) {
        let n = l.outputs;
        out.copy_from_slice(&l.bias);
        for (i, &xi) in x.iter().enumerate() {
            if xi != 0.0 {
                for (y, &w) in out.iter_mut().zip(&l.weights[i * n..(i + 1) * n]) {
                    *y = xi.mul_add(w, *y);
                }
            }
        }
        if relu {
            out.iter_mut().for_each(|y| *y = y.max(0.0));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::approximator::{GainApproximator, NetworkConfig};
    use crate::geom::Vec3;

    #[test]
    fn matches_generic_forward() {
        for width in [8, 24, 64, 72] {
            let cfg = NetworkConfig { width, hidden_layers: 4, seed: width as u64, ..NetworkConfig::default() };
            let net = GainApproximator::<f32>::new(&cfg, Vec3::zero(), 1.0).unwrap();
            let wide = GainApproximator::<f64>::new(&cfg, Vec3::zero(), 1.0).unwrap();
            for k in 0..20 {
                let p = Vec3::new(0.1 * k as f64 - 1.0, 0.3, -0.05 * k as f64);
                let x = net.normalize(p);
                if let Some(z) = forward_f32(net.layers(), &x) {
                    let fast = 1.0 / (1.0 + (-z as f64).exp());
                    let exact = wide.predict(p);
                    assert!((fast - exact).abs() < 1e-4, "width {width}: {fast} vs {exact}");
                }
            }
        }
    }
}
