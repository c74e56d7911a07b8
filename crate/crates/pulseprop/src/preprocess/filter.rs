use std::f64::consts::PI;

use nalgebra::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BandpassSpec {
    pub low_cut_hz: f64,
    pub high_cut_hz: f64,
    /// Band-pass order (twice the low-pass prototype order); must be even.
    pub order: usize,
}

impl Default for BandpassSpec {
    fn default() -> Self {
        BandpassSpec {
            low_cut_hz: 0.5,
            high_cut_hz: 5.0,
            order: 4,
        }
    }
}

/// Second-order section; `a[0]` is always 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

impl Biquad {
    fn response(&self, w: f64) -> Complex<f64> {
        let z1 = Complex::from_polar(1.0, -w);
        let z2 = z1 * z1;
        let num = self.b[0] + z1 * self.b[1] + z2 * self.b[2];
        let den = self.a[0] + z1 * self.a[1] + z2 * self.a[2];
        num / den
    }

    /// Steady-state transposed direct-form II state for a unit step.
    fn step_state(&self) -> ([f64; 2], f64) {
        let [b0, b1, b2] = self.b;
        let [_, a1, a2] = self.a;
        let g = (b0 + b1 + b2) / (1.0 + a1 + a2);
        let z2 = b2 - a2 * g;
        let z1 = b1 - a1 * g + z2;
        ([z1, z2], g)
    }
}

/// Butterworth band-pass as cascaded second-order sections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bandpass {
    pub spec: BandpassSpec,
    pub sampling_rate_hz: f64,
    pub sections: Vec<Biquad>,
}

impl Bandpass {
    pub fn order(&self) -> usize {
        2 * self.sections.len()
    }

    pub fn response(&self, f_hz: f64) -> Complex<f64> {
        let w = 2.0 * PI * f_hz / self.sampling_rate_hz;
        self.sections
            .iter()
            .fold(Complex::new(1.0, 0.0), |acc, s| acc * s.response(w))
    }

    pub fn magnitude(&self, f_hz: f64) -> f64 {
        self.response(f_hz).norm()
    }

    /// Expanded numerator polynomial in z⁻¹.
    pub fn numerator(&self) -> Vec<f64> {
        self.sections.iter().fold(vec![1.0], |p, s| poly_mul(&p, &s.b))
    }

    /// Expanded denominator polynomial in z⁻¹.
    pub fn denominator(&self) -> Vec<f64> {
        self.sections.iter().fold(vec![1.0], |p, s| poly_mul(&p, &s.a))
    }

    /// Edge padding used by [`filtfilt`].
    pub fn padlen(&self) -> usize {
        3 * (self.order() + 1)
    }

    fn sosfilt(&self, x: &mut [f64], x0: f64) {
        let mut scale = x0;
        for s in &self.sections {
            let ([mut z1, mut z2], g) = s.step_state();
            z1 *= scale;
            z2 *= scale;
            scale *= g;
            let [b0, b1, b2] = s.b;
            let [_, a1, a2] = s.a;
            for v in x.iter_mut() {
                let xi = *v;
                let y = b0 * xi + z1;
                z1 = b1 * xi - a1 * y + z2;
                z2 = b2 * xi - a2 * y;
                *v = y;
            }
        }
    }
}

fn poly_mul(p: &[f64], q: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; p.len() + q.len() - 1];
    for (i, a) in p.iter().enumerate() {
        for (j, b) in q.iter().enumerate() {
            out[i + j] += a * b;
        }
    }
    out
}

/// Digital Butterworth band-pass by the bilinear transform with prewarping.
///
/// Each section carries the zero pair at z = ±1 and one conjugate (or real)
/// pole pair, and is scaled to unit gain at the geometric centre frequency.
pub fn design_bandpass(spec: &BandpassSpec, sampling_rate_hz: f64) -> Result<Bandpass> {
    let fs = sampling_rate_hz;
    let BandpassSpec {
        low_cut_hz: f1,
        high_cut_hz: f2,
        order,
    } = *spec;
    if !(fs > 0.0) {
        return Err(Error::invalid("sampling rate must be positive"));
    }
    if !(0.0 < f1 && f1 < f2 && f2 < fs / 2.0) {
        return Err(Error::invalid(format!(
            "cut-offs must satisfy 0 < {f1} < {f2} < {} (Nyquist)",
            fs / 2.0
        )));
    }
    if order == 0 || order % 2 != 0 {
        return Err(Error::invalid(format!("band-pass order {order} must be positive and even")));
    }
    let n = order / 2;
    let w1 = 2.0 * fs * (PI * f1 / fs).tan();
    let w2 = 2.0 * fs * (PI * f2 / fs).tan();
    let w0 = (w1 * w2).sqrt();
    let bw = w2 - w1;

    let mut poles = Vec::with_capacity(2 * n);
    for k in 1..=n {
        let p = Complex::from_polar(1.0, PI * (2 * k + n - 1) as f64 / (2 * n) as f64);
        let q = p * (bw / 2.0);
        let d = (q * q - w0 * w0).sqrt();
        for s in [q + d, q - d] {
            poles.push((2.0 * fs + s) / (2.0 * fs - s));
        }
    }

    let tiny = 1e-10;
    let mut upper: Vec<Complex<f64>> = poles.iter().copied().filter(|z| z.im > tiny).collect();
    let mut real: Vec<f64> = poles.iter().filter(|z| z.im.abs() <= tiny).map(|z| z.re).collect();
    upper.sort_by(|a, b| a.arg().total_cmp(&b.arg()));
    real.sort_by(|a, b| a.total_cmp(b));

    let mut dens = Vec::with_capacity(n);
    for z in &upper {
        dens.push([1.0, -2.0 * z.re, z.norm_sqr()]);
    }
    for pair in real.chunks(2) {
        let (r1, r2) = (pair[0], pair.get(1).copied().unwrap_or(0.0));
        dens.push([1.0, -(r1 + r2), r1 * r2]);
    }
    if dens.len() != n {
        return Err(Error::invalid("pole pairing failed"));
    }

    let wc = 2.0 * (w0 / (2.0 * fs)).atan();
    let sections = dens
        .into_iter()
        .map(|a| {
            let raw = Biquad { b: [1.0, 0.0, -1.0], a };
            let g = raw.response(wc).norm();
            Biquad {
                b: [1.0 / g, 0.0, -1.0 / g],
                a,
            }
        })
        .collect();
    Ok(Bandpass {
        spec: *spec,
        sampling_rate_hz: fs,
        sections,
    })
}

/// Zero-phase forward-backward filtering.
///
/// The signal is extended by odd reflection of [`Bandpass::padlen`] samples at
/// each end, filtered forward and backward from steady-state initial
/// conditions, and trimmed. The result is averaged with the same operation on
/// the time-reversed signal, which makes the operator exactly commute with
/// time reversal; in the interior the two passes agree to within the edge
/// transient.
pub fn filtfilt(filter: &Bandpass, x: &[f64]) -> Result<Vec<f64>> {
    let pad = filter.padlen();
    if x.len() <= pad {
        return Err(Error::TooShort {
            len: x.len(),
            required: pad,
        });
    }
    let fwd = forward_backward(filter, x, pad);
    let rev: Vec<f64> = x.iter().rev().copied().collect();
    let bwd = forward_backward(filter, &rev, pad);
    Ok(fwd
        .iter()
        .zip(bwd.iter().rev())
        .map(|(a, b)| 0.5 * (a + b))
        .collect())
}

fn forward_backward(filter: &Bandpass, x: &[f64], pad: usize) -> Vec<f64> {
    let n = x.len();
    let (first, last) = (x[0], x[n - 1]);
    let mut ext = Vec::with_capacity(n + 2 * pad);
    ext.extend((1..=pad).rev().map(|i| 2.0 * first - x[i]));
    ext.extend_from_slice(x);
    ext.extend((1..=pad).map(|i| 2.0 * last - x[n - 1 - i]));

    let x0 = ext[0];
    filter.sosfilt(&mut ext, x0);
    ext.reverse();
    let y0 = ext[0];
    filter.sosfilt(&mut ext, y0);
    ext.reverse();
    ext[pad..pad + n].to_vec()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_filter() -> Bandpass {
        design_bandpass(&BandpassSpec::default(), 128.0).unwrap()
    }

    #[test]
    fn cutoffs_at_half_power() {
        let f = default_filter();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        for fc in [0.5, 5.0] {
            let m = f.magnitude(fc);
            assert!((m - h).abs() < 0.01 * h, "|H({fc})| = {m}");
        }
        assert!(f.magnitude(0.0) < 1e-12);
        assert!(f.magnitude(2.0) >= 0.99);
    }

    #[test]
    fn expanded_polynomials_match_sections() {
        let f = default_filter();
        let (b, a) = (f.numerator(), f.denominator());
        assert_eq!(b.len(), 5);
        assert_eq!(a[0], 1.0);
        let w = 2.0 * PI * 1.3 / 128.0;
        let eval = |p: &[f64]| {
            p.iter()
                .enumerate()
                .fold(Complex::new(0.0, 0.0), |acc, (k, c)| acc + Complex::from_polar(*c, -w * k as f64))
        };
        let h = eval(&b) / eval(&a);
        // The expanded form loses a few digits to poles near z = 1.
        assert!((h - f.response(1.3)).norm() < 1e-10);
    }

    #[test]
    fn rejects_bad_specs() {
        let bad = BandpassSpec {
            high_cut_hz: 70.0,
            ..Default::default()
        };
        assert!(design_bandpass(&bad, 128.0).is_err());
        let odd = BandpassSpec {
            order: 3,
            ..Default::default()
        };
        assert!(design_bandpass(&odd, 128.0).is_err());
    }

    #[test]
    fn higher_orders_keep_half_power_edges() {
        for order in [2, 6, 8] {
            let spec = BandpassSpec {
                order,
                ..Default::default()
            };
            let f = design_bandpass(&spec, 128.0).unwrap();
            for fc in [0.5, 5.0] {
                assert!((f.magnitude(fc) - std::f64::consts::FRAC_1_SQRT_2).abs() < 0.007);
            }
        }
    }

    #[test]
    fn too_short_input() {
        let f = default_filter();
        assert!(matches!(filtfilt(&f, &[0.0; 15]), Err(Error::TooShort { .. })));
        assert_eq!(filtfilt(&f, &[0.0; 16]).unwrap().len(), 16);
    }
}
