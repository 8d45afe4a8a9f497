//! FMCW MIMO front-end model: array geometry, chirp parameters, synthetic
//! frame generation and the range-profile transform.
//!
//! The sensing setup is a 20 Tx × 20 Rx L-shaped array observing a boxed
//! scene from broadside. Each virtual channel's beat signal follows the
//! stretch-processing approximation: every scatterer contributes one complex
//! tone whose frequency is set by its round-trip delay, so range-bin ground
//! truth is analytic and the whole pipeline can be validated without
//! hardware.

use crate::ctensor::{CTensor, Cplx};
use crate::error::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub const N_TX: usize = 20;
pub const N_RX: usize = 20;
pub const N_VIRTUAL: usize = N_TX * N_RX;
pub const N_SAMPLES: usize = 100;

/// Operating band tag carried by every frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Band {
    Ghz64,
    Ghz67,
}

impl Band {
    pub fn ghz(self) -> f64 {
        match self {
            Band::Ghz64 => 64.0,
            Band::Ghz67 => 67.0,
        }
    }

    pub fn center_hz(self) -> f64 {
        self.ghz() * 1e9
    }

    pub fn tag(self) -> u8 {
        self.ghz() as u8
    }

    pub fn from_tag(tag: u8) -> Result<Band> {
        match tag {
            64 => Ok(Band::Ghz64),
            67 => Ok(Band::Ghz67),
            other => Err(Error::format(format!("unknown band tag {other}"))),
        }
    }

    pub fn wavelength_m(self) -> f64 {
        SPEED_OF_LIGHT / self.center_hz()
    }
}

/// Transmit chirp description. `amplitude` is the constant a[t] of the
/// transmitted tone; the receive chain normalizes it away.
#[derive(Debug, Clone)]
pub struct ChirpParams {
    pub center_frequency_hz: f64,
    pub bandwidth_hz: f64,
    pub n_samples: usize,
    pub amplitude: f64,
    pub chirp_duration_s: f64,
}

impl ChirpParams {
    pub fn for_band(band: Band) -> Self {
        ChirpParams {
            center_frequency_hz: band.center_hz(),
            bandwidth_hz: 4e9,
            n_samples: N_SAMPLES,
            amplitude: 1.0,
            chirp_duration_s: 100e-6,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth_hz > 0.0) {
            return Err(Error::usage("chirp bandwidth must be positive"));
        }
        if self.n_samples < 2 {
            return Err(Error::usage("chirp must have at least 2 samples"));
        }
        if !(self.amplitude > 0.0) {
            return Err(Error::usage("chirp amplitude must be positive"));
        }
        if !(self.chirp_duration_s > 0.0) || !self.center_frequency_hz.is_finite() {
            return Err(Error::usage("chirp duration/center frequency invalid"));
        }
        Ok(())
    }

    pub fn band(&self) -> Band {
        if self.center_frequency_hz >= 65.5e9 {
            Band::Ghz67
        } else {
            Band::Ghz64
        }
    }

    /// Range-bin width: Δr = c / (2B).
    pub fn range_resolution_m(&self) -> f64 {
        SPEED_OF_LIGHT / (2.0 * self.bandwidth_hz)
    }

    /// One-way range beyond which beat frequencies alias: N·Δr.
    pub fn unambiguous_range_m(&self) -> f64 {
        self.n_samples as f64 * self.range_resolution_m()
    }
}

/// L-shaped physical array: Rx elements along +x, Tx elements along +y,
/// both in the z = 0 plane; scenes sit at z > 0.
#[derive(Debug, Clone)]
pub struct AntennaArray {
    pub tx_positions: Vec<[f64; 3]>,
    pub rx_positions: Vec<[f64; 3]>,
    pub spacing_m: f64,
}

impl AntennaArray {
    pub fn l_shaped(spacing_m: f64) -> Self {
        let rx_positions = (0..N_RX)
            .map(|i| [(i + 1) as f64 * spacing_m, 0.0, 0.0])
            .collect();
        let tx_positions = (0..N_TX)
            .map(|j| [0.0, (j + 1) as f64 * spacing_m, 0.0])
            .collect();
        AntennaArray {
            tx_positions,
            rx_positions,
            spacing_m,
        }
    }

    /// Half-wavelength element spacing at the band's center frequency.
    pub fn for_band(band: Band) -> Self {
        AntennaArray::l_shaped(band.wavelength_m() / 2.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.tx_positions.len() != N_TX || self.rx_positions.len() != N_RX {
            return Err(Error::usage(format!(
                "array must have exactly {N_TX} Tx and {N_RX} Rx elements"
            )));
        }
        Ok(())
    }

    /// Centroid of the virtual aperture, used to aim broadside scenes.
    pub fn virtual_center(&self) -> [f64; 3] {
        let mut c = [0.0; 3];
        for tx in &self.tx_positions {
            for rx in &self.rx_positions {
                for d in 0..3 {
                    c[d] += (tx[d] + rx[d]) / 2.0;
                }
            }
        }
        for d in c.iter_mut() {
            *d /= N_VIRTUAL as f64;
        }
        c
    }
}

/// One Tx/Rx pairing of the MIMO array.
#[derive(Debug, Clone)]
pub struct VirtualChannel {
    pub index: usize,
    pub tx: [f64; 3],
    pub rx: [f64; 3],
    pub midpoint: [f64; 3],
}

/// Enumerate all antenna pairs tx-major: channel c = tx·20 + rx.
pub fn build_virtual_array(array: &AntennaArray) -> Result<Vec<VirtualChannel>> {
    array.validate()?;
    let mut out = Vec::with_capacity(N_VIRTUAL);
    for (ti, tx) in array.tx_positions.iter().enumerate() {
        for (ri, rx) in array.rx_positions.iter().enumerate() {
            let midpoint = [
                (tx[0] + rx[0]) / 2.0,
                (tx[1] + rx[1]) / 2.0,
                (tx[2] + rx[2]) / 2.0,
            ];
            out.push(VirtualChannel {
                index: ti * N_RX + ri,
                tx: *tx,
                rx: *rx,
                midpoint,
            });
        }
    }
    Ok(out)
}

/// Point reflector with a complex amplitude.
#[derive(Debug, Clone)]
pub struct Scatterer {
    pub position: [f64; 3],
    pub reflectivity: Cplx,
}

/// A class template: object scatterers inside an attenuating box.
#[derive(Debug, Clone)]
pub struct SceneConfig {
    pub scatterers: Vec<Scatterer>,
    pub box_attenuation: f64,
    pub noise_snr_db: Option<f64>,
    pub class_label: usize,
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.box_attenuation > 0.0 && self.box_attenuation <= 1.0) {
            return Err(Error::usage(format!(
                "box attenuation {} outside (0, 1]",
                self.box_attenuation
            )));
        }
        for (i, s) in self.scatterers.iter().enumerate() {
            if s.position[2] <= 0.0 {
                return Err(Error::usage(format!(
                    "scatterer {i} at z = {} is behind the array plane",
                    s.position[2]
                )));
            }
            if !s.reflectivity.is_finite() {
                return Err(Error::usage(format!("scatterer {i} reflectivity not finite")));
            }
        }
        Ok(())
    }
}

/// One radar sample: 400 virtual channels × 100 complex time samples.
#[derive(Debug, Clone)]
pub struct IQFrame {
    pub data: CTensor,
    pub label: usize,
    pub band: Band,
}

impl IQFrame {
    pub fn new(data: CTensor, label: usize, band: Band) -> Result<Self> {
        if data.shape() != [N_VIRTUAL, N_SAMPLES] {
            return Err(Error::usage(format!(
                "frame shape {:?} must be ({N_VIRTUAL}, {N_SAMPLES})",
                data.shape()
            )));
        }
        Ok(IQFrame { data, label, band })
    }
}

fn dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Synthesize one frame from a scene.
///
/// Per virtual channel c and scatterer k with round-trip path
/// `d = |tx−q| + |rx−q|` and delay `τ = d/c_light`, the beat signal is
/// `s_c[n] = attenuation · Σ_k σ_k · exp(j2π(f_c·τ + B·τ·n/N))`. Complex
/// white Gaussian noise is then added at the configured SNR (relative to
/// the frame's own mean signal power) from the given seed.
pub fn simulate_frame(
    scene: &SceneConfig,
    chirp: &ChirpParams,
    array: &AntennaArray,
    seed: u64,
) -> Result<IQFrame> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    simulate_frame_with_rng(scene, chirp, array, &mut rng)
}

pub(crate) fn simulate_frame_with_rng(
    scene: &SceneConfig,
    chirp: &ChirpParams,
    array: &AntennaArray,
    rng: &mut ChaCha20Rng,
) -> Result<IQFrame> {
    scene.validate()?;
    chirp.validate()?;
    array.validate()?;
    if chirp.n_samples != N_SAMPLES {
        return Err(Error::usage(format!(
            "pipeline frames are fixed at N = {N_SAMPLES} samples, got {}",
            chirp.n_samples
        )));
    }

    let n = chirp.n_samples;
    let mut frame = CTensor::zeros(&[N_VIRTUAL, n]);

    for (ti, tx) in array.tx_positions.iter().enumerate() {
        for (ri, rx) in array.rx_positions.iter().enumerate() {
            let c = ti * N_RX + ri;
            let base = c * n;
            let re = &mut frame.re_mut()[base..base + n];
            // accumulate per-scatterer tones, then apply attenuation
            let mut acc_re = vec![0.0f64; n];
            let mut acc_im = vec![0.0f64; n];
            for sc in &scene.scatterers {
                let d = dist(tx, &sc.position) + dist(rx, &sc.position);
                let tau = d / SPEED_OF_LIGHT;
                // phase(n) = 2π(f_c·τ + B·τ·n/N); the chirp-duration factors
                // in (B/T)·τ·n·(T/N) cancel exactly
                let phase0 = 2.0 * std::f64::consts::PI * chirp.center_frequency_hz * tau;
                let dphase =
                    2.0 * std::f64::consts::PI * chirp.bandwidth_hz * tau / n as f64;
                let rot = Cplx::from_polar(1.0, dphase);
                let mut cur = Cplx::from_polar(1.0, phase0);
                for t in 0..n {
                    let v = sc.reflectivity * cur;
                    acc_re[t] += v.re;
                    acc_im[t] += v.im;
                    cur = cur * rot;
                }
            }
            for t in 0..n {
                re[t] = scene.box_attenuation * acc_re[t];
            }
            let im = &mut frame.im_mut()[base..base + n];
            for t in 0..n {
                im[t] = scene.box_attenuation * acc_im[t];
            }
        }
    }

    if let Some(snr_db) = scene.noise_snr_db {
        let total = frame.len() as f64;
        let p_signal = frame.energy() / total;
        if p_signal > 0.0 {
            let p_noise = p_signal * 10f64.powf(-snr_db / 10.0);
            let sd = (p_noise / 2.0).sqrt();
            for i in 0..frame.len() {
                let nr: f64 = StandardNormal.sample(rng);
                let ni: f64 = StandardNormal.sample(rng);
                frame.re_mut()[i] += sd * nr;
                frame.im_mut()[i] += sd * ni;
            }
        }
    }

    IQFrame::new(frame, scene.class_label, chirp.band())
}

/// Per-channel DFT of the beat signals: the complex range profile.
pub fn range_profile(frame: &IQFrame) -> Result<CTensor> {
    frame.data.dft_1d()
}

/// Orientation-variation model applied per generated frame.
#[derive(Debug, Clone)]
pub struct JitterSpec {
    /// Isotropic Gaussian position jitter, metres per axis.
    pub position_sigma_m: f64,
    /// Log-normal multiplier on reflectivity magnitude.
    pub reflectivity_log_sigma: f64,
}

impl Default for JitterSpec {
    fn default() -> Self {
        JitterSpec {
            position_sigma_m: 0.01,
            reflectivity_log_sigma: 0.1,
        }
    }
}

/// Draw `per_class` frames per template with randomized scatterer jitter.
///
/// Frames are ordered class-major; frame f uses the generator seeded with
/// `seed ⊕ f`, so parallel and serial generation are identical and the whole
/// dataset is reproducible from one seed. Templates whose jittered
/// round-trip paths could exceed the unambiguous range are rejected.
pub fn generate_dataset(
    templates: &[SceneConfig],
    per_class: usize,
    jitter: &JitterSpec,
    chirp: &ChirpParams,
    array: &AntennaArray,
    seed: u64,
) -> Result<Vec<IQFrame>> {
    if templates.is_empty() {
        return Err(Error::usage("generate_dataset: empty template list"));
    }
    if templates.len() < 2 {
        return Err(Error::usage("generate_dataset requires at least 2 classes"));
    }
    if per_class == 0 {
        return Err(Error::usage("generate_dataset: per_class must be >= 1"));
    }
    chirp.validate()?;
    array.validate()?;
    for t in templates {
        t.validate()?;
        check_unambiguous(t, jitter, chirp, array)?;
    }

    let n_total = templates.len() * per_class;
    let frames: Result<Vec<IQFrame>> = (0..n_total)
        .into_par_iter()
        .map(|f| {
            let class = f / per_class;
            let mut rng = ChaCha20Rng::seed_from_u64(seed ^ f as u64);
            let scene = jittered_scene(&templates[class], jitter, &mut rng);
            simulate_frame_with_rng(&scene, chirp, array, &mut rng)
        })
        .collect();
    frames
}

fn jittered_scene(template: &SceneConfig, jitter: &JitterSpec, rng: &mut ChaCha20Rng) -> SceneConfig {
    let mut scene = template.clone();
    for sc in scene.scatterers.iter_mut() {
        for d in 0..3 {
            let g: f64 = StandardNormal.sample(rng);
            sc.position[d] += jitter.position_sigma_m * g;
        }
        let g: f64 = StandardNormal.sample(rng);
        let mult = (jitter.reflectivity_log_sigma * g).exp();
        sc.reflectivity = sc.reflectivity.scale(mult);
    }
    // position jitter could push a scatterer through the array plane
    for sc in scene.scatterers.iter_mut() {
        if sc.position[2] < 1e-3 {
            sc.position[2] = 1e-3;
        }
    }
    scene
}

/// Reject templates whose scatterers (including a 4σ jitter margin) reach
/// beat frequencies at or beyond bin N.
fn check_unambiguous(
    template: &SceneConfig,
    jitter: &JitterSpec,
    chirp: &ChirpParams,
    array: &AntennaArray,
) -> Result<()> {
    let dr = chirp.range_resolution_m();
    let margin = 8.0 * jitter.position_sigma_m; // 4σ per axis on a round trip
    for sc in &template.scatterers {
        let mut d_max = 0.0f64;
        for tx in &array.tx_positions {
            for rx in &array.rx_positions {
                d_max = d_max.max(dist(tx, &sc.position) + dist(rx, &sc.position));
            }
        }
        let worst_bin = (d_max + margin) / (2.0 * dr);
        if worst_bin >= (chirp.n_samples - 1) as f64 {
            return Err(Error::SceneAliases {
                class: template.class_label,
                detail: format!(
                    "scatterer at range {:.3} m maps to bin {:.1} ≥ {} (unambiguous range {:.3} m)",
                    d_max / 2.0,
                    worst_bin,
                    chirp.n_samples - 1,
                    chirp.unambiguous_range_m()
                ),
            });
        }
    }
    Ok(())
}

/// Difficulty preset for the built-in synthetic benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Difficulty {
    Moderate,
    Hard,
}

impl Difficulty {
    pub fn jitter(self) -> JitterSpec {
        match self {
            Difficulty::Moderate => JitterSpec {
                position_sigma_m: 0.01,
                reflectivity_log_sigma: 0.1,
            },
            Difficulty::Hard => JitterSpec {
                position_sigma_m: 0.03,
                reflectivity_log_sigma: 0.3,
            },
        }
    }

    pub fn noise_snr_db(self) -> f64 {
        match self {
            Difficulty::Moderate => 20.0,
            Difficulty::Hard => 5.0,
        }
    }

    pub fn box_attenuation(self) -> f64 {
        match self {
            Difficulty::Moderate => 0.6,
            Difficulty::Hard => 0.4,
        }
    }
}

/// Built-in object templates: each class is a small constellation of
/// scatterers with a class-specific range layout, plus two weak box-face
/// reflections common to all classes.
pub fn benchmark_scenes(
    n_classes: usize,
    difficulty: Difficulty,
    array: &AntennaArray,
) -> Vec<SceneConfig> {
    let center = array.virtual_center();
    (0..n_classes)
        .map(|c| {
            let n_scat = 2 + (c % 3);
            let base_range = 0.40 + 0.055 * c as f64;
            let spread = 0.12 + 0.015 * (c % 4) as f64;
            let mut scatterers = Vec::new();
            for k in 0..n_scat {
                let lateral = (k as f64 - 0.5 * (n_scat as f64 - 1.0)) * 0.03;
                let side = if c % 2 == 0 { 1.0 } else { -1.0 };
                scatterers.push(Scatterer {
                    position: [
                        center[0] + lateral,
                        center[1] + side * 0.015 * k as f64,
                        base_range + spread * k as f64,
                    ],
                    reflectivity: Cplx::from_polar(
                        1.0 / (k as f64 + 1.0),
                        0.35 * (c + k) as f64,
                    ),
                });
            }
            // box faces: class-independent clutter
            scatterers.push(Scatterer {
                position: [center[0], center[1], 0.28],
                reflectivity: Cplx::from_polar(0.25, 0.0),
            });
            scatterers.push(Scatterer {
                position: [center[0], center[1], 1.55],
                reflectivity: Cplx::from_polar(0.2, 1.0),
            });
            SceneConfig {
                scatterers,
                box_attenuation: difficulty.box_attenuation(),
                noise_snr_db: Some(difficulty.noise_snr_db()),
                class_label: c,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn test_chirp() -> ChirpParams {
        ChirpParams::for_band(Band::Ghz64)
    }

    fn test_array() -> AntennaArray {
        AntennaArray::for_band(Band::Ghz64)
    }

    #[test]
    fn virtual_array_ordering_and_count() {
        let array = test_array();
        let channels = build_virtual_array(&array).unwrap();
        assert_eq!(channels.len(), 400);
        assert_eq!(channels[0].index, 0);
        assert_eq!(channels[0].tx, array.tx_positions[0]);
        assert_eq!(channels[0].rx, array.rx_positions[0]);
        // tx-major: channel index c = tx·20 + rx
        assert_eq!(channels[21].tx, array.tx_positions[1]);
        assert_eq!(channels[21].rx, array.rx_positions[1]);
    }

    #[test]
    fn virtual_midpoints_fill_a_20x20_grid() {
        let array = test_array();
        let channels = build_virtual_array(&array).unwrap();
        let s = array.spacing_m;
        let mut seen = std::collections::HashSet::new();
        for ch in &channels {
            // midpoint of ((i+1)s, 0, 0) and (0, (j+1)s, 0) is ((i+1)s/2, (j+1)s/2, 0)
            let gx = (ch.midpoint[0] / (s / 2.0)).round() as i64;
            let gy = (ch.midpoint[1] / (s / 2.0)).round() as i64;
            assert!((ch.midpoint[0] - gx as f64 * s / 2.0).abs() < 1e-12);
            assert!((ch.midpoint[1] - gy as f64 * s / 2.0).abs() < 1e-12);
            assert!((1..=20).contains(&gx) && (1..=20).contains(&gy));
            seen.insert((gx, gy));
        }
        assert_eq!(seen.len(), 400);
    }

    #[test]
    fn zero_scatterers_give_zero_frame() {
        let scene = SceneConfig {
            scatterers: vec![],
            box_attenuation: 1.0,
            noise_snr_db: None,
            class_label: 0,
        };
        let frame = simulate_frame(&scene, &test_chirp(), &test_array(), 1).unwrap();
        assert!(frame.data.energy() == 0.0);
    }

    #[test]
    fn two_scatterers_superpose() {
        let array = test_array();
        let chirp = test_chirp();
        let mk = |scatterers| SceneConfig {
            scatterers,
            box_attenuation: 0.7,
            noise_snr_db: None,
            class_label: 0,
        };
        let a = Scatterer {
            position: [0.0, 0.0, 0.5],
            reflectivity: Cplx::new(1.0, 0.0),
        };
        let b = Scatterer {
            position: [0.02, -0.01, 0.8],
            reflectivity: Cplx::new(0.0, 0.5),
        };
        let fa = simulate_frame(&mk(vec![a.clone()]), &chirp, &array, 1).unwrap();
        let fb = simulate_frame(&mk(vec![b.clone()]), &chirp, &array, 1).unwrap();
        let fab = simulate_frame(&mk(vec![a, b]), &chirp, &array, 1).unwrap();
        for i in 0..fab.data.len() {
            let sum = fa.data.at(i) + fb.data.at(i);
            assert!((fab.data.at(i) - sum).abs() <= 1e-12);
        }
    }

    #[test]
    fn reflectivity_scales_linearly() {
        let array = test_array();
        let chirp = test_chirp();
        let mk = |r: Cplx| SceneConfig {
            scatterers: vec![Scatterer {
                position: [0.01, 0.0, 0.6],
                reflectivity: r,
            }],
            box_attenuation: 0.5,
            noise_snr_db: None,
            class_label: 0,
        };
        let f1 = simulate_frame(&mk(Cplx::new(0.3, -0.2)), &chirp, &array, 1).unwrap();
        let f2 = simulate_frame(&mk(Cplx::new(0.6, -0.4)), &chirp, &array, 1).unwrap();
        for i in 0..f1.data.len() {
            let doubled = f1.data.at(i).scale(2.0);
            assert!((f2.data.at(i) - doubled).abs() <= 1e-12);
        }
    }

    #[test]
    fn broadside_scatterer_peaks_at_the_closed_form_bin() {
        // one-way range R = 0.375 m, B = 4 GHz ⇒ Δr = 3.75 cm ⇒ bin 10
        let array = test_array();
        let chirp = test_chirp();
        let center = array.virtual_center();
        let scene = SceneConfig {
            scatterers: vec![Scatterer {
                position: [center[0], center[1], 0.375],
                reflectivity: Cplx::new(1.0, 0.0),
            }],
            box_attenuation: 1.0,
            noise_snr_db: None,
            class_label: 0,
        };
        let frame = simulate_frame(&scene, &chirp, &array, 1).unwrap();
        let profile = range_profile(&frame).unwrap();
        let expected = (0.375 / chirp.range_resolution_m()).round() as usize;
        assert_eq!(expected, 10);
        for c in 0..N_VIRTUAL {
            let mut best = 0;
            let mut best_mag = -1.0;
            for k in 0..N_SAMPLES {
                let mag = profile.at(c * N_SAMPLES + k).abs();
                if mag > best_mag {
                    best_mag = mag;
                    best = k;
                }
            }
            assert_eq!(best, 10, "channel {c} peaked at {best}");
        }
    }

    #[test]
    fn radial_shift_increases_argmax_bin() {
        let array = test_array();
        let chirp = test_chirp();
        let center = array.virtual_center();
        let mut last_bin = 0usize;
        for step in 0..6 {
            let range = 0.4 + 0.3 * step as f64;
            let scene = SceneConfig {
                scatterers: vec![Scatterer {
                    position: [center[0], center[1], range],
                    reflectivity: Cplx::new(1.0, 0.0),
                }],
                box_attenuation: 1.0,
                noise_snr_db: None,
                class_label: 0,
            };
            let frame = simulate_frame(&scene, &chirp, &array, 1).unwrap();
            let profile = range_profile(&frame).unwrap();
            let mut best = 0;
            let mut best_mag = -1.0;
            for k in 0..N_SAMPLES {
                let mag = profile.at(k).abs();
                if mag > best_mag {
                    best_mag = mag;
                    best = k;
                }
            }
            assert!(best >= last_bin, "bin decreased: {best} < {last_bin}");
            last_bin = best;
        }
        assert!(last_bin > 10);
    }

    #[test]
    fn range_profile_preserves_energy_per_channel() {
        let array = test_array();
        let chirp = test_chirp();
        let scene = SceneConfig {
            scatterers: vec![Scatterer {
                position: [0.0, 0.01, 0.7],
                reflectivity: Cplx::new(0.8, 0.3),
            }],
            box_attenuation: 0.9,
            noise_snr_db: Some(10.0),
            class_label: 0,
        };
        let frame = simulate_frame(&scene, &chirp, &array, 3).unwrap();
        let profile = range_profile(&frame).unwrap();
        for c in 0..4 {
            let mut e_time = 0.0;
            let mut e_freq = 0.0;
            for t in 0..N_SAMPLES {
                e_time += frame.data.at(c * N_SAMPLES + t).abs_sq();
                e_freq += profile.at(c * N_SAMPLES + t).abs_sq();
            }
            assert!((e_time - e_freq / N_SAMPLES as f64).abs() / e_time <= 1e-9);
        }
    }

    #[test]
    fn measured_snr_matches_configuration() {
        let array = test_array();
        let chirp = test_chirp();
        let center = array.virtual_center();
        let snr_db = 12.0;
        let mk = |noise| SceneConfig {
            scatterers: vec![Scatterer {
                position: [center[0], center[1], 0.55],
                reflectivity: Cplx::new(1.0, 0.0),
            }],
            box_attenuation: 1.0,
            noise_snr_db: noise,
            class_label: 0,
        };
        let clean = simulate_frame(&mk(None), &chirp, &array, 7).unwrap();
        let noisy = simulate_frame(&mk(Some(snr_db)), &chirp, &array, 7).unwrap();
        // 40_000 complex samples ≥ the 10⁴ the tolerance is stated for
        let mut p_sig = 0.0;
        let mut p_noise = 0.0;
        for i in 0..clean.data.len() {
            p_sig += clean.data.at(i).abs_sq();
            p_noise += (noisy.data.at(i) - clean.data.at(i)).abs_sq();
        }
        let measured = 10.0 * (p_sig / p_noise).log10();
        assert!(
            (measured - snr_db).abs() <= 1.0,
            "measured {measured:.2} dB vs configured {snr_db} dB"
        );
    }

    #[test]
    fn scatterer_behind_array_rejected() {
        let scene = SceneConfig {
            scatterers: vec![Scatterer {
                position: [0.0, 0.0, -0.1],
                reflectivity: Cplx::ONE,
            }],
            box_attenuation: 1.0,
            noise_snr_db: None,
            class_label: 0,
        };
        assert!(simulate_frame(&scene, &test_chirp(), &test_array(), 1).is_err());
    }

    #[test]
    fn dataset_counts_and_determinism() {
        let array = test_array();
        let chirp = test_chirp();
        let templates = benchmark_scenes(3, Difficulty::Moderate, &array);
        let jitter = JitterSpec::default();
        let d1 = generate_dataset(&templates, 4, &jitter, &chirp, &array, 99).unwrap();
        let d2 = generate_dataset(&templates, 4, &jitter, &chirp, &array, 99).unwrap();
        assert_eq!(d1.len(), 12);
        for c in 0..3 {
            let count = d1.iter().filter(|f| f.label == c).count();
            assert_eq!(count, 4);
        }
        for (a, b) in d1.iter().zip(&d2) {
            assert_eq!(a.data, b.data, "same seed must be bit-identical");
            assert_eq!(a.label, b.label);
        }
    }

    #[test]
    fn zero_jitter_single_frame_equals_template() {
        let array = test_array();
        let chirp = test_chirp();
        let mut templates = benchmark_scenes(2, Difficulty::Moderate, &array);
        for t in templates.iter_mut() {
            t.noise_snr_db = None;
        }
        let jitter = JitterSpec {
            position_sigma_m: 0.0,
            reflectivity_log_sigma: 0.0,
        };
        let set = generate_dataset(&templates, 1, &jitter, &chirp, &array, 5).unwrap();
        for (c, t) in templates.iter().enumerate() {
            let direct = simulate_frame(t, &chirp, &array, 123).unwrap();
            assert_eq!(set[c].data, direct.data);
        }
    }

    #[test]
    fn aliasing_template_rejected_with_class_named() {
        let array = test_array();
        let chirp = test_chirp();
        let templates = vec![
            SceneConfig {
                scatterers: vec![Scatterer {
                    position: [0.0, 0.0, 0.5],
                    reflectivity: Cplx::ONE,
                }],
                box_attenuation: 1.0,
                noise_snr_db: None,
                class_label: 0,
            },
            SceneConfig {
                // beyond the 3.75 m unambiguous range
                scatterers: vec![Scatterer {
                    position: [0.0, 0.0, 4.2],
                    reflectivity: Cplx::ONE,
                }],
                box_attenuation: 1.0,
                noise_snr_db: None,
                class_label: 1,
            },
        ];
        let err = generate_dataset(
            &templates,
            1,
            &JitterSpec::default(),
            &chirp,
            &array,
            1,
        )
        .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("class 1"), "error must name the template: {msg}");
    }

    #[test]
    fn benchmark_scenes_fit_unambiguous_range() {
        let array = test_array();
        let chirp = test_chirp();
        let templates = benchmark_scenes(10, Difficulty::Hard, &array);
        assert!(generate_dataset(
            &templates,
            1,
            &Difficulty::Hard.jitter(),
            &chirp,
            &array,
            1
        )
        .is_ok());
    }
}
