//! Synthetic micro-Doppler radar returns from vibrating metal sheets.
//!
//! A continuous-wave radar illuminating a target whose surface displacement
//! is `d(t)` receives a baseband return that is phase modulated by the
//! round-trip path change:
//!
//! ```text
//! s(t) = a * exp(j * (4*pi/lambda) * d(t)) + noise(t)
//! ```
//!
//! For a sinusoidal displacement of amplitude `D` the modulation index is
//! `beta = 4*pi*D/lambda` and the spectrum of `s` is a line spectrum at
//! multiples of the vibration frequency with amplitudes `|J_n(beta)|`
//! (Bessel functions of the first kind) — the symmetric sidebands that make
//! different metals distinguishable in a spectrogram. Bulk radial motion and
//! rotation shift frequencies by `2*v_r/lambda` and `2*omega*r/lambda`
//! respectively.
//!
//! Everything here is a pure function of its arguments including the seed,
//! so batch generation can run on any number of threads without changing a
//! single output bit.

use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::seed::{derive_seed, tags};

pub const DEFAULT_CARRIER_HZ: f64 = 2.45e9;
pub const DEFAULT_PROPAGATION_SPEED: f64 = 3.0e8;
pub const DEFAULT_SAMPLE_RATE_HZ: f64 = 8192.0;
pub const DEFAULT_TARGET_RANGE_M: f64 = 1.5;
pub const DEFAULT_DURATION_S: f64 = 2.0;
pub const DEFAULT_VIBRATION_HZ: f64 = 200.0;
pub const DEFAULT_SNR_DB: f64 = 20.0;

/// Continuous-wave radar parameters.
///
/// `target_range_m` is carried as metadata only: a constant path delay is
/// indistinguishable from a phase offset at baseband and is folded into the
/// reflectivity of the profile.
#[derive(Debug, Clone, PartialEq)]
pub struct RadarParams {
    pub carrier_hz: f64,
    pub wavelength_m: f64,
    pub sample_rate_hz: f64,
    pub target_range_m: f64,
    pub propagation_speed_mps: f64,
}

impl Default for RadarParams {
    fn default() -> Self {
        RadarParams::new(
            DEFAULT_CARRIER_HZ,
            DEFAULT_SAMPLE_RATE_HZ,
            DEFAULT_TARGET_RANGE_M,
            DEFAULT_PROPAGATION_SPEED,
        )
        .expect("default radar parameters are valid")
    }
}

impl RadarParams {
    /// Builds parameters with the wavelength derived from carrier and
    /// propagation speed.
    pub fn new(
        carrier_hz: f64,
        sample_rate_hz: f64,
        target_range_m: f64,
        propagation_speed_mps: f64,
    ) -> Result<Self> {
        let params = RadarParams {
            carrier_hz,
            wavelength_m: propagation_speed_mps / carrier_hz,
            sample_rate_hz,
            target_range_m,
            propagation_speed_mps,
        };
        params.validate()?;
        Ok(params)
    }

    /// As [`RadarParams::new`] but with an explicit wavelength, which must
    /// agree with `propagation_speed / carrier` to 1e-9 relative.
    pub fn with_wavelength(
        carrier_hz: f64,
        wavelength_m: f64,
        sample_rate_hz: f64,
        target_range_m: f64,
        propagation_speed_mps: f64,
    ) -> Result<Self> {
        let derived = propagation_speed_mps / carrier_hz;
        if carrier_hz <= 0.0 || ((wavelength_m - derived) / derived).abs() > 1e-9 {
            return Err(Error::argument(format!(
                "wavelength {wavelength_m} inconsistent with c/f = {derived}"
            )));
        }
        let params = RadarParams {
            carrier_hz,
            wavelength_m,
            sample_rate_hz,
            target_range_m,
            propagation_speed_mps,
        };
        params.validate()?;
        Ok(params)
    }

    fn validate(&self) -> Result<()> {
        let fields = [
            ("carrier_hz", self.carrier_hz),
            ("wavelength_m", self.wavelength_m),
            ("sample_rate_hz", self.sample_rate_hz),
            ("target_range_m", self.target_range_m),
            ("propagation_speed_mps", self.propagation_speed_mps),
        ];
        for (name, value) in fields {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::argument(format!(
                    "radar parameter {name} must be strictly positive, got {value}"
                )));
            }
        }
        Ok(())
    }

    /// Checks that the sample rate exceeds four times the largest
    /// instantaneous micro-Doppler excursion the profile can produce.
    pub fn check_profile(&self, profile: &MaterialProfile) -> Result<()> {
        let excursion = profile.max_micro_doppler_hz(self.wavelength_m);
        if self.sample_rate_hz <= 4.0 * excursion {
            return Err(Error::argument(format!(
                "sample rate {} Hz must exceed 4 x micro-Doppler excursion ({:.3} Hz)",
                self.sample_rate_hz, excursion
            )));
        }
        Ok(())
    }
}

/// The three sheet metals the classifier distinguishes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Material {
    Brass,
    Copper,
    Aluminum,
}

impl Material {
    pub const ALL: [Material; 3] = [Material::Brass, Material::Copper, Material::Aluminum];

    pub fn name(self) -> &'static str {
        match self {
            Material::Brass => "Brass",
            Material::Copper => "Copper",
            Material::Aluminum => "Aluminum",
        }
    }

    pub fn index(self) -> usize {
        match self {
            Material::Brass => 0,
            Material::Copper => 1,
            Material::Aluminum => 2,
        }
    }

    pub fn from_index(index: usize) -> Result<Material> {
        Material::ALL
            .get(index)
            .copied()
            .ok_or_else(|| Error::argument(format!("material index {index} out of range")))
    }

    pub fn from_name(name: &str) -> Result<Material> {
        match name.to_ascii_lowercase().as_str() {
            "brass" => Ok(Material::Brass),
            "copper" => Ok(Material::Copper),
            "aluminum" | "aluminium" => Ok(Material::Aluminum),
            other => Err(Error::argument(format!("unknown material '{other}'"))),
        }
    }
}

impl std::fmt::Display for Material {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// One sinusoidal component of the sheet's displacement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Harmonic {
    /// Multiple of the drive frequency; 1 is the fundamental.
    pub index: u32,
    /// Peak displacement in meters.
    pub amplitude_m: f64,
    /// Phase offset in radians.
    pub phase_rad: f64,
}

/// Vibration response and reflectivity of one metal.
///
/// `snr_db = f64::INFINITY` disables the additive noise entirely.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialProfile {
    pub material: Material,
    pub vibration_hz: f64,
    pub harmonics: Vec<Harmonic>,
    pub reflectivity: f64,
    pub spectral_jitter_hz: f64,
    pub snr_db: f64,
}

impl MaterialProfile {
    pub fn validate(&self) -> Result<()> {
        if !(self.vibration_hz > 0.0) {
            return Err(Error::argument(format!(
                "vibration frequency must be positive, got {}",
                self.vibration_hz
            )));
        }
        if !(self.reflectivity > 0.0) || self.spectral_jitter_hz < 0.0 {
            return Err(Error::argument(
                "reflectivity must be positive and jitter non-negative".to_string(),
            ));
        }
        let mut seen = std::collections::BTreeSet::new();
        for h in &self.harmonics {
            if h.index < 1 {
                return Err(Error::argument("harmonic indices start at 1".to_string()));
            }
            if !seen.insert(h.index) {
                return Err(Error::argument(format!(
                    "duplicate harmonic index {}",
                    h.index
                )));
            }
            if h.amplitude_m < 0.0 || !h.amplitude_m.is_finite() {
                return Err(Error::argument(format!(
                    "harmonic amplitude must be finite and >= 0, got {}",
                    h.amplitude_m
                )));
            }
        }
        Ok(())
    }

    /// Phase modulation index `beta_k = 4*pi*D_k/lambda` of one harmonic.
    pub fn modulation_index(&self, harmonic_index: u32, wavelength_m: f64) -> Result<f64> {
        if wavelength_m <= 0.0 {
            return Err(Error::domain("wavelength must be positive".to_string()));
        }
        let amplitude = self
            .harmonics
            .iter()
            .find(|h| h.index == harmonic_index)
            .map_or(0.0, |h| h.amplitude_m);
        Ok(4.0 * std::f64::consts::PI * amplitude / wavelength_m)
    }

    /// Upper bound on the instantaneous micro-Doppler `2*max|d'(t)|/lambda`.
    pub fn max_micro_doppler_hz(&self, wavelength_m: f64) -> f64 {
        let max_velocity: f64 = self
            .harmonics
            .iter()
            .map(|h| {
                2.0 * std::f64::consts::PI * f64::from(h.index) * self.vibration_hz * h.amplitude_m
            })
            .sum();
        2.0 * max_velocity / wavelength_m
    }

    /// Returns a copy with noise and jitter removed.
    pub fn noiseless(&self) -> MaterialProfile {
        MaterialProfile {
            snr_db: f64::INFINITY,
            spectral_jitter_hz: 0.0,
            ..self.clone()
        }
    }
}

/// Built-in vibration profile for a metal.
///
/// The presets encode the qualitative signatures observed on lab sheets:
/// brass concentrates energy in a strong fundamental comb (distinct
/// low-order peaks), copper carries substantial drive-frequency jitter on a
/// weaker comb (broadened lines), and aluminum pushes energy into the
/// second and third harmonics (sharp high-frequency lines). Displacement
/// amplitudes are centimeter-scale resonant flexing, which puts the
/// modulation indices near 1-2 so several sideband orders stay visible
/// after the spectrogram is downsampled for the classifier.
pub fn material_profile(material: Material) -> MaterialProfile {
    let harmonics = match material {
        // beta_1 ~ 2.0, beta_2 ~ 0.21 at 2.45 GHz
        Material::Brass => vec![
            Harmonic { index: 1, amplitude_m: 19.5e-3, phase_rad: 0.0 },
            Harmonic { index: 2, amplitude_m: 2.0e-3, phase_rad: 0.0 },
        ],
        // beta_1 ~ 1.0, beta_2 ~ 0.3
        Material::Copper => vec![
            Harmonic { index: 1, amplitude_m: 9.7e-3, phase_rad: 0.0 },
            Harmonic { index: 2, amplitude_m: 2.9e-3, phase_rad: 0.0 },
        ],
        // beta_1 ~ 0.21, beta_2 ~ 1.2, beta_3 ~ 0.8
        Material::Aluminum => vec![
            Harmonic { index: 1, amplitude_m: 2.0e-3, phase_rad: 0.0 },
            Harmonic { index: 2, amplitude_m: 11.7e-3, phase_rad: 0.0 },
            Harmonic { index: 3, amplitude_m: 7.8e-3, phase_rad: 0.0 },
        ],
    };
    let (jitter, reflectivity) = match material {
        Material::Brass => (0.5, 1.0),
        Material::Copper => (25.0, 0.9),
        Material::Aluminum => (0.2, 1.1),
    };
    MaterialProfile {
        material,
        vibration_hz: DEFAULT_VIBRATION_HZ,
        harmonics,
        reflectivity,
        spectral_jitter_hz: jitter,
        snr_db: DEFAULT_SNR_DB,
    }
}

/// Complex baseband receive stream.
#[derive(Debug, Clone, PartialEq)]
pub struct IQSignal {
    pub samples: Vec<Complex64>,
    pub sample_rate_hz: f64,
    /// Seed the signal was generated from; 0 when loaded from a file.
    pub seed: u64,
}

impl IQSignal {
    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }
}

/// A point target rotating about an axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationSpec {
    pub angular_speed_rad_s: f64,
    pub radius_m: f64,
}

/// Doppler shift `2*v_r/lambda` of a target with radial velocity `v_r`.
pub fn doppler_shift(radial_velocity_mps: f64, wavelength_m: f64) -> Result<f64> {
    if !(wavelength_m > 0.0) {
        return Err(Error::domain(format!(
            "wavelength must be positive, got {wavelength_m}"
        )));
    }
    Ok(2.0 * radial_velocity_mps / wavelength_m)
}

/// Micro-Doppler `2*omega*r/lambda` of a point at radius `r` rotating with
/// angular speed `omega`; identical to the Doppler shift of its tangential
/// radial velocity `omega*r`.
pub fn rotational_micro_doppler(spec: RotationSpec, wavelength_m: f64) -> Result<f64> {
    if !spec.angular_speed_rad_s.is_finite() || spec.radius_m < 0.0 {
        return Err(Error::argument(
            "rotation requires finite angular speed and radius >= 0".to_string(),
        ));
    }
    doppler_shift(spec.angular_speed_rad_s * spec.radius_m, wavelength_m)
}

/// Sheet displacement `d(t) = sum_k D_k * sin(2*pi*k*f_v*t + phi_k)`.
///
/// Jitter never enters here; it only perturbs [`synthesize_return`].
pub fn vibration_displacement(profile: &MaterialProfile, t_s: f64) -> f64 {
    let base = 2.0 * std::f64::consts::PI * profile.vibration_hz * t_s;
    profile
        .harmonics
        .iter()
        .map(|h| h.amplitude_m * (f64::from(h.index) * base + h.phase_rad).sin())
        .sum()
}

/// Simulates the baseband return of one vibrating sheet.
///
/// The displacement phase-modulates the carrier; drive-frequency jitter is a
/// bounded random walk on the instantaneous vibration frequency (clamped to
/// three standard deviations) and the additive noise is complex white
/// Gaussian with power `reflectivity^2 * 10^(-snr_db/10)`. Identical
/// arguments and seed reproduce the exact sample sequence.
pub fn synthesize_return(
    profile: &MaterialProfile,
    radar: &RadarParams,
    duration_s: f64,
    seed: u64,
) -> Result<IQSignal> {
    profile.validate()?;
    radar.validate()?;
    radar.check_profile(profile)?;

    if duration_s < 10.0 / profile.vibration_hz {
        return Err(Error::argument(format!(
            "duration {duration_s} s too short; need at least 10 vibration periods ({} s)",
            10.0 / profile.vibration_hz
        )));
    }
    let count = (duration_s * radar.sample_rate_hz).round() as usize;
    if count < 256 {
        return Err(Error::argument(format!(
            "duration {duration_s} s at {} Hz yields {count} samples; need at least 256",
            radar.sample_rate_hz
        )));
    }

    let dt = 1.0 / radar.sample_rate_hz;
    let phase_scale = 4.0 * std::f64::consts::PI / radar.wavelength_m;
    let sigma = profile.spectral_jitter_hz;

    // Jitter shifts the fundamental's phase; harmonics stay phase locked to
    // the (perturbed) drive, so the walk accumulates into a common phase
    // offset scaled by the harmonic index.
    let mut jitter_phase = vec![0.0f64; count];
    if sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, tags::SYNTH_JITTER, &[]));
        let step = sigma * dt.sqrt();
        let mut offset_hz = 0.0f64;
        let mut accum = 0.0f64;
        for slot in jitter_phase.iter_mut() {
            *slot = accum;
            let g: f64 = StandardNormal.sample(&mut rng);
            offset_hz = (offset_hz + step * g).clamp(-3.0 * sigma, 3.0 * sigma);
            accum += 2.0 * std::f64::consts::PI * offset_hz * dt;
        }
    }

    let mut samples = Vec::with_capacity(count);
    for i in 0..count {
        let t = i as f64 * dt;
        let base = 2.0 * std::f64::consts::PI * profile.vibration_hz * t + jitter_phase[i];
        let displacement: f64 = profile
            .harmonics
            .iter()
            .map(|h| h.amplitude_m * (f64::from(h.index) * base + h.phase_rad).sin())
            .sum();
        samples.push(Complex64::from_polar(
            profile.reflectivity,
            phase_scale * displacement,
        ));
    }

    if profile.snr_db.is_finite() {
        let noise_power =
            profile.reflectivity * profile.reflectivity * 10f64.powf(-profile.snr_db / 10.0);
        let component_std = (noise_power / 2.0).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, tags::SYNTH_NOISE, &[]));
        for sample in &mut samples {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            *sample += Complex64::new(component_std * re, component_std * im);
        }
    }

    Ok(IQSignal {
        samples,
        sample_rate_hz: radar.sample_rate_hz,
        seed,
    })
}

/// Bessel function of the first kind by its power series,
/// `J_n(x) = sum_m (-1)^m (x/2)^(n+2m) / (m! (n+m)!)`,
/// summed until the next term falls below 1e-12 in magnitude.
fn bessel_j(order: u32, x: f64) -> f64 {
    let half = x / 2.0;
    // First term: half^n / n!
    let mut term = 1.0f64;
    for k in 1..=order {
        term *= half / f64::from(k);
    }
    let mut sum = term;
    let mut m = 1.0f64;
    let n = f64::from(order);
    while term.abs() >= 1e-12 {
        term *= -(half * half) / (m * (n + m));
        sum += term;
        m += 1.0;
        if m > 512.0 {
            break;
        }
    }
    sum
}

/// `|J_0(beta)| ..= |J_n_max(beta)|`: the relative amplitudes of the carrier
/// line and its first `n_max` sideband pairs under single-harmonic phase
/// modulation with index `beta`.
pub fn sideband_amplitudes(beta: f64, n_max: u32) -> Vec<f64> {
    (0..=n_max).map(|n| bessel_j(n, beta).abs()).collect()
}

// ---------------------------------------------------------------------------
// IQ file format: 8-byte magic "MDIQv001", u32 LE sample rate (Hz, rounded),
// u64 LE sample count, then interleaved little-endian f32 (I, Q) pairs.
// ---------------------------------------------------------------------------

pub const IQ_MAGIC: &[u8; 8] = b"MDIQv001";

/// Serializes a signal into the binary IQ container.
pub fn iq_to_bytes(signal: &IQSignal) -> Vec<u8> {
    let mut bytes = Vec::with_capacity(20 + signal.samples.len() * 8);
    bytes.extend_from_slice(IQ_MAGIC);
    bytes.extend_from_slice(&(signal.sample_rate_hz.round() as u32).to_le_bytes());
    bytes.extend_from_slice(&(signal.samples.len() as u64).to_le_bytes());
    for sample in &signal.samples {
        bytes.extend_from_slice(&(sample.re as f32).to_le_bytes());
        bytes.extend_from_slice(&(sample.im as f32).to_le_bytes());
    }
    bytes
}

/// Parses the binary IQ container. The loaded signal carries seed 0.
pub fn iq_from_bytes(bytes: &[u8]) -> Result<IQSignal> {
    if bytes.len() < 20 || &bytes[..8] != IQ_MAGIC {
        return Err(Error::format("not an MDIQv001 file".to_string()));
    }
    let sample_rate = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    let count = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
    let payload = &bytes[20..];
    if payload.len() != count * 8 {
        return Err(Error::format(format!(
            "IQ payload holds {} bytes, expected {} for {count} samples",
            payload.len(),
            count * 8
        )));
    }
    if count == 0 {
        return Err(Error::format("IQ file contains no samples".to_string()));
    }
    let mut samples = Vec::with_capacity(count);
    for pair in payload.chunks_exact(8) {
        let re = f32::from_le_bytes(pair[0..4].try_into().unwrap()) as f64;
        let im = f32::from_le_bytes(pair[4..8].try_into().unwrap()) as f64;
        if !re.is_finite() || !im.is_finite() {
            return Err(Error::format("IQ file contains non-finite samples".to_string()));
        }
        samples.push(Complex64::new(re, im));
    }
    Ok(IQSignal {
        samples,
        sample_rate_hz: f64::from(sample_rate),
        seed: 0,
    })
}

pub fn write_iq_file(path: &Path, signal: &IQSignal) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    file.write_all(&iq_to_bytes(signal))?;
    Ok(())
}

pub fn read_iq_file(path: &Path) -> Result<IQSignal> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    iq_from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const WAVELENGTH: f64 = DEFAULT_PROPAGATION_SPEED / DEFAULT_CARRIER_HZ;

    fn single_harmonic(amplitude_m: f64) -> MaterialProfile {
        MaterialProfile {
            material: Material::Brass,
            vibration_hz: 200.0,
            harmonics: vec![Harmonic { index: 1, amplitude_m, phase_rad: 0.0 }],
            reflectivity: 1.0,
            spectral_jitter_hz: 0.0,
            snr_db: f64::INFINITY,
        }
    }

    /// O(N^2) reference DFT used only as a test oracle.
    fn naive_dft(input: &[Complex64]) -> Vec<Complex64> {
        let n = input.len();
        (0..n)
            .map(|k| {
                let mut acc = Complex64::new(0.0, 0.0);
                for (i, x) in input.iter().enumerate() {
                    let angle = -2.0 * std::f64::consts::PI * (k * i) as f64 / n as f64;
                    acc += x * Complex64::new(angle.cos(), angle.sin());
                }
                acc
            })
            .collect()
    }

    #[test]
    fn default_wavelength_matches_c_over_f() {
        let radar = RadarParams::default();
        assert!((radar.wavelength_m - 0.122449).abs() < 1e-6);
        let derived = radar.propagation_speed_mps / radar.carrier_hz;
        assert!(((radar.wavelength_m - derived) / derived).abs() < 1e-9);
    }

    #[test]
    fn doppler_shift_examples() {
        assert_eq!(doppler_shift(0.0, 0.122449).unwrap(), 0.0);
        let shift = doppler_shift(6.12245, 0.122449).unwrap();
        assert!((shift - 100.0).abs() < 1e-9, "got {shift}");
        assert!(doppler_shift(1.0, 0.0).is_err());
        assert!(doppler_shift(1.0, -0.1).is_err());
    }

    #[test]
    fn halving_wavelength_doubles_shift() {
        let a = doppler_shift(3.7, 0.2).unwrap();
        let b = doppler_shift(3.7, 0.1).unwrap();
        assert!((b - 2.0 * a).abs() < 1e-12);
    }

    #[test]
    fn rotational_micro_doppler_examples() {
        let still = RotationSpec { angular_speed_rad_s: 0.0, radius_m: 1.0 };
        assert_eq!(rotational_micro_doppler(still, 0.122449).unwrap(), 0.0);

        let spec = RotationSpec {
            angular_speed_rad_s: 2.0 * std::f64::consts::PI,
            radius_m: 1.0,
        };
        let shift = rotational_micro_doppler(spec, 0.122449).unwrap();
        assert!((shift - 102.63).abs() < 0.01, "got {shift}");
    }

    proptest! {
        #[test]
        fn rotation_composes_with_doppler(
            omega in -100.0f64..100.0,
            radius in 0.0f64..10.0,
            wavelength in 0.01f64..1.0,
        ) {
            let spec = RotationSpec { angular_speed_rad_s: omega, radius_m: radius };
            let direct = rotational_micro_doppler(spec, wavelength).unwrap();
            let composed = doppler_shift(omega * radius, wavelength).unwrap();
            prop_assert_eq!(direct, composed);
        }
    }

    #[test]
    fn displacement_of_zero_amplitudes_is_zero() {
        let profile = single_harmonic(0.0);
        for i in 0..50 {
            assert_eq!(vibration_displacement(&profile, i as f64 * 1e-3), 0.0);
        }
    }

    #[test]
    fn displacement_hand_value() {
        let profile = single_harmonic(1e-3);
        let d = vibration_displacement(&profile, 1.0 / 800.0);
        assert!((d - 1e-3).abs() < 1e-15, "got {d}");
    }

    #[test]
    fn displacement_is_periodic() {
        let profile = material_profile(Material::Aluminum).noiseless();
        let period = 1.0 / profile.vibration_hz;
        for i in 0..20 {
            let t = i as f64 * 7.3e-4;
            let a = vibration_displacement(&profile, t);
            let b = vibration_displacement(&profile, t + period);
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn bessel_at_zero() {
        let amps = sideband_amplitudes(0.0, 4);
        assert_eq!(amps.len(), 5);
        assert_eq!(amps[0], 1.0);
        assert!(amps[1..].iter().all(|&a| a == 0.0));
    }

    #[test]
    fn bessel_small_beta() {
        let amps = sideband_amplitudes(0.10264, 2);
        assert!((amps[0] - 0.99737).abs() < 1e-4, "J0 = {}", amps[0]);
        assert!((amps[1] - 0.05125).abs() < 1e-4, "J1 = {}", amps[1]);
        assert!((amps[2] - 0.00132).abs() < 1e-4, "J2 = {}", amps[2]);
    }

    #[test]
    fn bessel_known_values() {
        // Abramowitz & Stegun table values.
        assert!((bessel_j(0, 1.0) - 0.7651976866).abs() < 1e-9);
        assert!((bessel_j(1, 1.0) - 0.4400505857).abs() < 1e-9);
        assert!((bessel_j(2, 2.0) - 0.3528340286).abs() < 1e-9);
        assert!((bessel_j(0, 2.4048255577) - 0.0).abs() < 1e-9);
    }

    #[test]
    fn no_modulation_is_a_pure_carrier() {
        let profile = single_harmonic(0.0);
        let radar = RadarParams::default();
        let signal = synthesize_return(&profile, &radar, 0.0625, 1).unwrap();
        assert_eq!(signal.samples.len(), 512);
        for s in &signal.samples {
            assert!((s.norm() - 1.0).abs() < 1e-12);
        }
        let spectrum = naive_dft(&signal.samples);
        let dc = spectrum[0].norm();
        for (k, bin) in spectrum.iter().enumerate().skip(1) {
            assert!(bin.norm() < dc * 1e-9, "leakage at bin {k}");
        }
    }

    #[test]
    fn sideband_ratios_match_bessel_oracle() {
        // One harmonic, noise free, over an integer number of vibration
        // periods: DFT lines at n*f_v with amplitudes |J_n(beta)|.
        let radar = RadarParams::default();
        for beta in [0.05f64, 0.10264, 0.5] {
            let amplitude = beta * radar.wavelength_m / (4.0 * std::f64::consts::PI);
            let profile = single_harmonic(amplitude);
            let signal = synthesize_return(&profile, &radar, 0.25, 9).unwrap();
            let n = signal.samples.len();
            assert_eq!(n, 2048);
            let spectrum = naive_dft(&signal.samples);
            let bin_per_fv = (profile.vibration_hz * n as f64 / radar.sample_rate_hz) as usize;
            assert_eq!(bin_per_fv, 50);

            let oracle = sideband_amplitudes(beta, 3);
            for order in 1..=3usize {
                let upper = spectrum[order * bin_per_fv].norm();
                let lower = spectrum[n - order * bin_per_fv].norm();
                let expected = oracle[order] / oracle[0];
                let measured = upper / spectrum[0].norm();
                assert!(
                    (measured - expected).abs() <= 0.01 * expected,
                    "beta {beta} order {order}: measured {measured}, expected {expected}"
                );
                let sym = (upper - lower).abs() / upper.max(lower);
                assert!(sym < 1e-6, "asymmetry {sym} at order {order}");
            }
        }
    }

    #[test]
    fn spectral_lines_only_at_vibration_multiples() {
        let radar = RadarParams::default();
        let profile = single_harmonic(2.0e-3);
        let signal = synthesize_return(&profile, &radar, 0.25, 3).unwrap();
        let spectrum = naive_dft(&signal.samples);
        let n = signal.samples.len();
        let bin_per_fv = 50;
        let carrier = spectrum[0].norm();
        let floor = carrier * 10f64.powf(-60.0 / 20.0);
        for (k, bin) in spectrum.iter().enumerate() {
            // Lines sit at +n*f_v and, wrapped, at N - n*f_v.
            if k % bin_per_fv == 0 || (n - k) % bin_per_fv == 0 {
                continue;
            }
            assert!(
                bin.norm() < floor,
                "bin {k} ({} Hz) is {:.1} dB below carrier",
                k as f64 * radar.sample_rate_hz / n as f64,
                20.0 * (bin.norm() / carrier).log10()
            );
        }
    }

    #[test]
    fn synthesis_is_bit_deterministic() {
        let radar = RadarParams::default();
        let profile = material_profile(Material::Copper);
        let a = synthesize_return(&profile, &radar, 0.5, 42).unwrap();
        let b = synthesize_return(&profile, &radar, 0.5, 42).unwrap();
        assert_eq!(a.samples.len(), b.samples.len());
        for (x, y) in a.samples.iter().zip(&b.samples) {
            assert_eq!(x.re.to_bits(), y.re.to_bits());
            assert_eq!(x.im.to_bits(), y.im.to_bits());
        }
        let c = synthesize_return(&profile, &radar, 0.5, 43).unwrap();
        assert_ne!(a.samples, c.samples);
    }

    #[test]
    fn noise_power_follows_snr_and_reflectivity() {
        let radar = RadarParams::default();
        let mut profile = single_harmonic(0.0);
        profile.reflectivity = 2.0;
        profile.snr_db = 10.0;
        let signal = synthesize_return(&profile, &radar, 2.0, 5).unwrap();
        // Carrier is the constant 2.0; what remains is the noise.
        let noise_power: f64 = signal
            .samples
            .iter()
            .map(|s| (s - Complex64::new(2.0, 0.0)).norm_sqr())
            .sum::<f64>()
            / signal.samples.len() as f64;
        let expected = 4.0 * 10f64.powf(-1.0);
        assert!(
            (noise_power - expected).abs() < 0.05 * expected,
            "noise power {noise_power}, expected {expected}"
        );
    }

    #[test]
    fn rejects_bad_durations_and_sample_rates() {
        let radar = RadarParams::default();
        let profile = material_profile(Material::Brass);
        assert!(matches!(
            synthesize_return(&profile, &radar, 0.04, 1),
            Err(Error::Argument(_))
        ));

        let slow = RadarParams::new(2.45e9, 64.0, 1.5, 3.0e8).unwrap();
        assert!(matches!(
            synthesize_return(&profile, &slow, 2.0, 1),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn presets_are_valid_and_distinct() {
        let radar = RadarParams::default();
        for material in Material::ALL {
            let profile = material_profile(material);
            profile.validate().unwrap();
            radar.check_profile(&profile).unwrap();
            assert_eq!(profile.vibration_hz, 200.0);
        }
        let brass = material_profile(Material::Brass);
        let copper = material_profile(Material::Copper);
        let aluminum = material_profile(Material::Aluminum);
        assert!(copper.spectral_jitter_hz > 10.0 * brass.spectral_jitter_hz);
        assert!(aluminum.harmonics.iter().any(|h| h.index == 3));
    }

    #[test]
    fn iq_roundtrip_and_header_layout() {
        let radar = RadarParams::default();
        let profile = material_profile(Material::Brass);
        let signal = synthesize_return(&profile, &radar, 0.0625, 11).unwrap();
        let bytes = iq_to_bytes(&signal);
        assert_eq!(&bytes[..8], b"MDIQv001");
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 8192);
        assert_eq!(
            u64::from_le_bytes(bytes[12..20].try_into().unwrap()),
            signal.samples.len() as u64
        );

        let loaded = iq_from_bytes(&bytes).unwrap();
        assert_eq!(loaded.samples.len(), signal.samples.len());
        for (a, b) in loaded.samples.iter().zip(&signal.samples) {
            assert_eq!(a.re, f64::from(b.re as f32));
            assert_eq!(a.im, f64::from(b.im as f32));
        }

        assert!(iq_from_bytes(b"BADMAGIC").is_err());
        let mut truncated = bytes.clone();
        truncated.truncate(bytes.len() - 4);
        assert!(iq_from_bytes(&truncated).is_err());
    }

    #[test]
    fn profile_validation_rejects_bad_harmonics() {
        let mut profile = material_profile(Material::Brass);
        profile.harmonics.push(Harmonic { index: 1, amplitude_m: 1e-4, phase_rad: 0.0 });
        assert!(profile.validate().is_err());

        let mut profile = material_profile(Material::Brass);
        profile.harmonics[0].index = 0;
        assert!(profile.validate().is_err());

        let mut profile = material_profile(Material::Brass);
        profile.harmonics[0].amplitude_m = -1.0;
        assert!(profile.validate().is_err());
    }
}
