//! Signal analysis: FFT dominant frequency, steady amplitude, suppression
//! ratio, and time-series averages.
//!
//! The dominant-frequency estimator follows the usual recipe for short
//! experimental records: mean removal, Hann window, zero-padding to a power
//! of two, radix-2 FFT, then 3-point parabolic interpolation around the peak
//! bin. The amplitude estimator is sqrt(2) times the RMS of the trailing
//! window, which is exact for sinusoids and robust to mild beating.

use std::f64::consts::PI;

use crate::error::{Result, VivError};

/// One-sided magnitude spectrum of a real signal.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub freqs_hz: Vec<f64>,
    pub magnitudes: Vec<f64>,
    pub bin_width_hz: f64,
}

/// In-place iterative radix-2 FFT. `re` and `im` must have equal power-of-two
/// length. Forward transform, unnormalized.
pub fn fft_radix2(re: &mut [f64], im: &mut [f64]) {
    let n = re.len();
    assert_eq!(n, im.len(), "re/im length mismatch");
    assert!(n.is_power_of_two(), "fft length must be a power of two");
    if n < 2 {
        return;
    }

    // Bit-reversal permutation.
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            re.swap(i, j);
            im.swap(i, j);
        }
    }

    let mut len = 2;
    while len <= n {
        let ang = -2.0 * PI / len as f64;
        let (w_re, w_im) = (ang.cos(), ang.sin());
        for start in (0..n).step_by(len) {
            let mut cur_re = 1.0;
            let mut cur_im = 0.0;
            for k in 0..len / 2 {
                let a = start + k;
                let b = start + k + len / 2;
                let t_re = re[b] * cur_re - im[b] * cur_im;
                let t_im = re[b] * cur_im + im[b] * cur_re;
                re[b] = re[a] - t_re;
                im[b] = im[a] - t_im;
                re[a] += t_re;
                im[a] += t_im;
                let next_re = cur_re * w_re - cur_im * w_im;
                cur_im = cur_re * w_im + cur_im * w_re;
                cur_re = next_re;
            }
        }
        len <<= 1;
    }
}

/// Hann window of length `n`.
pub fn hann_window(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|i| 0.5 * (1.0 - (2.0 * PI * i as f64 / (n - 1) as f64).cos()))
        .collect()
}

/// Detrend (mean removal), Hann-window, and zero-pad `signal` to the next
/// power of two. Returns the padded real series.
pub fn windowed_padded(signal: &[f64]) -> Vec<f64> {
    let n = signal.len();
    let mean = signal.iter().sum::<f64>() / n as f64;
    let w = hann_window(n);
    let n_pad = n.next_power_of_two();
    let mut out = vec![0.0; n_pad];
    for i in 0..n {
        out[i] = (signal[i] - mean) * w[i];
    }
    out
}

/// One-sided magnitude spectrum of a uniformly sampled signal.
pub fn spectrum(signal: &[f64], fs_hz: f64) -> Result<Spectrum> {
    if signal.len() < 64 {
        return Err(VivError::ParameterDomain(format!(
            "spectrum needs >= 64 samples, got {}",
            signal.len()
        )));
    }
    if fs_hz <= 0.0 {
        return Err(VivError::ParameterDomain(
            "sampling frequency must be positive".into(),
        ));
    }
    let mut re = windowed_padded(signal);
    let n_pad = re.len();
    let mut im = vec![0.0; n_pad];
    fft_radix2(&mut re, &mut im);

    let bin = fs_hz / n_pad as f64;
    let half = n_pad / 2;
    let freqs: Vec<f64> = (0..=half).map(|k| k as f64 * bin).collect();
    let mags: Vec<f64> = (0..=half)
        .map(|k| (re[k] * re[k] + im[k] * im[k]).sqrt())
        .collect();
    Ok(Spectrum {
        freqs_hz: freqs,
        magnitudes: mags,
        bin_width_hz: bin,
    })
}

/// Dominant frequency of a uniformly sampled signal, in Hz.
///
/// Peak-bin search over the one-sided spectrum (DC excluded), refined by
/// 3-point parabolic interpolation when the peak has two neighbors.
pub fn dominant_frequency(signal: &[f64], fs_hz: f64) -> Result<f64> {
    // Constant signals (up to summation roundoff) carry no frequency.
    let m = mean(signal);
    let max_dev = signal.iter().map(|v| (v - m).abs()).fold(0.0, f64::max);
    if max_dev <= 1e-12 * m.abs().max(1e-300) {
        return Err(VivError::NoDominantFrequency(
            "signal is constant".into(),
        ));
    }

    let spec = spectrum(signal, fs_hz)?;
    let mags = &spec.magnitudes;
    let peak_mag = mags.iter().skip(1).cloned().fold(0.0, f64::max);
    if peak_mag <= 0.0 {
        return Err(VivError::NoDominantFrequency(
            "signal has no spectral content".into(),
        ));
    }
    let k_peak = (1..mags.len())
        .max_by(|&a, &b| mags[a].partial_cmp(&mags[b]).unwrap())
        .unwrap();

    let mut k_refined = k_peak as f64;
    if k_peak + 1 < mags.len() && k_peak >= 2 {
        let (m_l, m_c, m_r) = (mags[k_peak - 1], mags[k_peak], mags[k_peak + 1]);
        let denom = m_l - 2.0 * m_c + m_r;
        if denom.abs() > 1e-300 {
            let delta = 0.5 * (m_l - m_r) / denom;
            if delta.abs() <= 0.5 {
                k_refined += delta;
            }
        }
    }
    Ok(k_refined * spec.bin_width_hz)
}

/// Steady amplitude estimate over the trailing `window_fraction` of `y`:
/// A = sqrt(2) * RMS. `period_s` is the expected oscillation period; the
/// window must span at least five periods.
pub fn steady_amplitude(y: &[f64], dt_s: f64, window_fraction: f64, period_s: f64) -> Result<f64> {
    if !(0.0 < window_fraction && window_fraction <= 1.0) {
        return Err(VivError::ParameterDomain(
            "window_fraction must be in (0, 1]".into(),
        ));
    }
    if dt_s <= 0.0 || period_s <= 0.0 {
        return Err(VivError::ParameterDomain(
            "dt and period must be positive".into(),
        ));
    }
    let n = y.len();
    let start = n - ((n as f64 * window_fraction).floor() as usize).min(n);
    let window = &y[start..];
    let span_s = window.len() as f64 * dt_s;
    if span_s < 5.0 * period_s {
        return Err(VivError::Identification(format!(
            "steady window spans {span_s:.2} s, needs >= {:.2} s (5 periods)",
            5.0 * period_s
        )));
    }
    let ms = window.iter().map(|v| v * v).sum::<f64>() / window.len() as f64;
    Ok((2.0 * ms).sqrt())
}

/// 1 - controlled/uncontrolled.
pub fn suppression_ratio(controlled: f64, uncontrolled: f64) -> Result<f64> {
    if uncontrolled <= 0.0 {
        return Err(VivError::ParameterDomain(
            "uncontrolled amplitude must be positive".into(),
        ));
    }
    Ok(1.0 - controlled / uncontrolled)
}

/// Arithmetic mean of a series.
pub fn mean(series: &[f64]) -> f64 {
    if series.is_empty() {
        return 0.0;
    }
    series.iter().sum::<f64>() / series.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sine(amp: f64, freq: f64, fs: f64, dur: f64, phase: f64) -> Vec<f64> {
        let n = (dur * fs) as usize;
        (0..n)
            .map(|i| amp * (2.0 * PI * freq * i as f64 / fs + phase).sin())
            .collect()
    }

    #[test]
    fn fft_matches_naive_dft() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 128;
        let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
        let mut re = x.clone();
        let mut im = vec![0.0; n];
        fft_radix2(&mut re, &mut im);
        for k in 0..n {
            let mut dr = 0.0;
            let mut di = 0.0;
            for (t, &v) in x.iter().enumerate() {
                let ang = -2.0 * PI * (k * t) as f64 / n as f64;
                dr += v * ang.cos();
                di += v * ang.sin();
            }
            assert!((re[k] - dr).abs() < 1e-9, "bin {k} re: {} vs {}", re[k], dr);
            assert!((im[k] - di).abs() < 1e-9, "bin {k} im: {} vs {}", im[k], di);
        }
    }

    #[test]
    fn parseval_energy_equality() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let signal: Vec<f64> = (0..500).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let xw = windowed_padded(&signal);
        let n_pad = xw.len();
        let time_energy: f64 = xw.iter().map(|v| v * v).sum();
        let mut re = xw.clone();
        let mut im = vec![0.0; n_pad];
        fft_radix2(&mut re, &mut im);
        let freq_energy: f64 =
            re.iter().zip(&im).map(|(r, i)| r * r + i * i).sum::<f64>() / n_pad as f64;
        assert!(
            (time_energy - freq_energy).abs() / time_energy < 1e-6,
            "parseval: {time_energy} vs {freq_energy}"
        );
    }

    #[test]
    fn dominant_frequency_pure_sine() {
        let fs = 100.0;
        let x = sine(1.0, 3.0, fs, 10.0, 0.3);
        let f = dominant_frequency(&x, fs).unwrap();
        let bin = fs / (x.len().next_power_of_two() as f64);
        assert!((f - 3.0).abs() < bin / 2.0, "estimated {f}");
    }

    #[test]
    fn dominant_frequency_two_tone_picks_larger() {
        let fs = 100.0;
        let a = sine(1.0, 2.0, fs, 10.0, 0.0);
        let b = sine(0.3, 5.0, fs, 10.0, 1.0);
        let x: Vec<f64> = a.iter().zip(&b).map(|(u, v)| u + v).collect();
        let f = dominant_frequency(&x, fs).unwrap();
        assert!((f - 2.0).abs() < 0.1, "estimated {f}");
    }

    #[test]
    fn dominant_frequency_constant_signal_errors() {
        let x = vec![4.2; 256];
        assert!(matches!(
            dominant_frequency(&x, 50.0),
            Err(VivError::NoDominantFrequency(_))
        ));
    }

    #[test]
    fn dominant_frequency_scale_and_offset_invariant() {
        let fs = 80.0;
        let x = sine(0.7, 4.2, fs, 8.0, 0.9);
        let f0 = dominant_frequency(&x, fs).unwrap();
        let scaled: Vec<f64> = x.iter().map(|v| 13.0 * v + 5.0).collect();
        let f1 = dominant_frequency(&scaled, fs).unwrap();
        assert!((f0 - f1).abs() < 1e-9);
    }

    #[test]
    fn steady_amplitude_sinusoid_identity() {
        // Phase-invariance across several phases.
        for phase in [0.0, 0.7, 1.9, 3.1] {
            let x = sine(0.6, 1.96, 100.0, 10.0, phase);
            let a = steady_amplitude(&x, 0.01, 0.4, 1.0 / 1.96).unwrap();
            assert!((a - 0.6).abs() < 0.006, "phase {phase}: {a}");
        }
    }

    #[test]
    fn steady_amplitude_zero_signal() {
        let x = vec![0.0; 2000];
        let a = steady_amplitude(&x, 0.01, 0.4, 0.5).unwrap();
        assert_eq!(a, 0.0);
    }

    #[test]
    fn steady_amplitude_short_window_errors() {
        let x = vec![0.1; 100];
        assert!(matches!(
            steady_amplitude(&x, 0.01, 0.4, 0.5),
            Err(VivError::Identification(_))
        ));
    }

    #[test]
    fn suppression_examples() {
        assert!((suppression_ratio(0.03, 0.6).unwrap() - 0.95).abs() < 1e-12);
        assert_eq!(suppression_ratio(0.6, 0.6).unwrap(), 0.0);
        assert!((suppression_ratio(0.12, 0.6).unwrap() - 0.8).abs() < 1e-12);
        assert!(suppression_ratio(0.1, 0.0).is_err());
    }

    #[test]
    fn mean_basics() {
        assert_eq!(mean(&[]), 0.0);
        assert!((mean(&[0.3, 0.3, 0.3]) - 0.3).abs() < 1e-15);
        let x = sine(1.0, 2.0, 100.0, 5.0, 0.0);
        assert!(mean(&x).abs() < 1e-2);
    }
}
