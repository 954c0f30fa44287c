//! Channel model for a chain of `K + 1` hops.
//!
//! Each hop gain is `|h_k|^2 = xi_k * |h~_k|^2`, a deterministic large-scale
//! pathloss term `xi_k = C_k (d_k / d_0)^(-alpha_k)` times a unit-mean Rayleigh
//! power gain. Small-scale coefficients are complex Gaussian; only their power
//! is kept. The cumulative gain `Gamma_k = prod_{j<=k} beta_j |h_j|^2` is what
//! the closed-form solvers consume.
//!
//! Randomness is drawn from one ChaCha stream per `(seed, trial, hop)` triple,
//! so a Monte Carlo trial is a pure function of its indices and trials may run
//! in any order or in parallel.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HopGeometry {
    /// Transmitter-receiver distance in meters.
    pub distance: f64,
    /// Reference distance `d_0` in meters.
    pub ref_distance: f64,
    pub pathloss_exponent: f64,
    /// Linear attenuation at the reference distance.
    pub attenuation: f64,
}

impl HopGeometry {
    pub fn new(
        distance: f64,
        ref_distance: f64,
        pathloss_exponent: f64,
        attenuation: f64,
    ) -> Result<Self> {
        let geom = HopGeometry {
            distance,
            ref_distance,
            pathloss_exponent,
            attenuation,
        };
        geom.validate()?;
        Ok(geom)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.distance > 0.0 && self.distance.is_finite()) {
            return Err(Error::invalid(
                "distance",
                format!("{} must be positive", self.distance),
            ));
        }
        if !(self.ref_distance > 0.0 && self.ref_distance.is_finite()) {
            return Err(Error::invalid(
                "reference distance",
                format!("{} must be positive", self.ref_distance),
            ));
        }
        if !(self.pathloss_exponent >= 0.0 && self.pathloss_exponent.is_finite()) {
            return Err(Error::invalid(
                "pathloss exponent",
                format!("{} must be nonnegative", self.pathloss_exponent),
            ));
        }
        if !(self.attenuation > 0.0 && self.attenuation.is_finite()) {
            return Err(Error::invalid(
                "attenuation",
                format!("{} must be positive", self.attenuation),
            ));
        }
        Ok(())
    }

    pub fn large_scale_gain(&self) -> Result<f64> {
        large_scale_gain(self)
    }
}

/// `C * (d / d_0)^(-alpha)`.
pub fn large_scale_gain(geom: &HopGeometry) -> Result<f64> {
    geom.validate()?;
    Ok(geom.attenuation * (geom.distance / geom.ref_distance).powf(-geom.pathloss_exponent))
}

/// One small-scale fading realization for a hop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FadingDraw {
    /// `|h~|^2` of the channel the signal actually sees.
    pub true_gain: f64,
    /// `|h^|^2` of the channel estimate available to the optimizer.
    pub estimated_gain: f64,
    /// Seed of the RNG stream that produced this draw.
    pub seed_tag: u64,
}

/// Derive the seed of an independent stream from a master seed and two
/// indices (splitmix64 finalizer over a simple combination).
pub fn stream_seed(master: u64, trial: u64, hop: u64) -> u64 {
    let mut z = master
        ^ trial.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ hop.wrapping_mul(0xD1B5_4A32_D192_ED03).rotate_left(29);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy)]
struct Complex {
    re: f64,
    im: f64,
}

impl Complex {
    fn power(self) -> f64 {
        self.re * self.re + self.im * self.im
    }
}

fn standard_complex(rng: &mut ChaCha8Rng) -> Complex {
    // CN(0, 1): independent real and imaginary parts of variance 1/2 each.
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex {
        re: scale * re,
        im: scale * im,
    }
}

fn check_error_variance(sigma_e2: f64) -> Result<()> {
    if (0.0..1.0).contains(&sigma_e2) {
        Ok(())
    } else {
        Err(Error::invalid(
            "estimation error variance",
            format!("{sigma_e2} must lie in [0, 1)"),
        ))
    }
}

/// Draw one hop's fading from the stream `seed`.
///
/// The estimate is `CN(0, 1 - sigma_e2)` and the error `CN(0, sigma_e2)`; the
/// true coefficient is their sum. Both components come from the same stream
/// regardless of `sigma_e2`, so at `sigma_e2 = 0` the draw coincides with the
/// perfect-CSI draw for the same seed.
pub fn draw_fading(seed: u64, sigma_e2: f64) -> Result<FadingDraw> {
    check_error_variance(sigma_e2)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = standard_complex(&mut rng);
    let noise = standard_complex(&mut rng);
    let est_scale = (1.0 - sigma_e2).sqrt();
    let err_scale = sigma_e2.sqrt();
    let estimate = Complex {
        re: est_scale * base.re,
        im: est_scale * base.im,
    };
    let truth = Complex {
        re: estimate.re + err_scale * noise.re,
        im: estimate.im + err_scale * noise.im,
    };
    Ok(FadingDraw {
        true_gain: truth.power(),
        estimated_gain: estimate.power(),
        seed_tag: seed,
    })
}

/// `count` perfect-CSI Rayleigh power gains, one stream per draw.
pub fn sample_small_scale(count: usize, seed: u64) -> Vec<FadingDraw> {
    (0..count)
        .map(|i| draw_fading(stream_seed(seed, 0, i as u64), 0.0).expect("zero error variance"))
        .collect()
}

/// Like [`sample_small_scale`] but with an imperfect estimate of each draw.
pub fn apply_estimation_error(count: usize, sigma_e2: f64, seed: u64) -> Result<Vec<FadingDraw>> {
    check_error_variance(sigma_e2)?;
    (0..count)
        .map(|i| draw_fading(stream_seed(seed, 0, i as u64), sigma_e2))
        .collect()
}

/// Per-hop power gains and cumulative gains of a `K + 1` hop chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelState {
    hop_gains: Vec<f64>,
    cumulative_gains: Vec<f64>,
}

impl ChannelState {
    /// Build from total per-hop power gains `|h_k|^2` and per-node
    /// efficiencies. The destination's efficiency is taken as 1 whatever
    /// `betas` says for it.
    pub fn from_hop_gains(hop_gains: Vec<f64>, betas: &[f64]) -> Result<Self> {
        if hop_gains.is_empty() {
            return Err(Error::invalid("channel", "at least one hop is required"));
        }
        if betas.len() != hop_gains.len() {
            return Err(Error::LengthMismatch {
                what: "betas",
                expected: hop_gains.len(),
                got: betas.len(),
            });
        }
        if let Some(g) = hop_gains.iter().find(|g| !(**g >= 0.0 && g.is_finite())) {
            return Err(Error::invalid(
                "hop gain",
                format!("{g} must be finite and nonnegative"),
            ));
        }
        let last = hop_gains.len() - 1;
        let mut cumulative_gains = Vec::with_capacity(hop_gains.len());
        let mut acc = 1.0;
        for (k, (&g, &b)) in hop_gains.iter().zip(betas).enumerate() {
            let beta = if k == last { 1.0 } else { b };
            acc *= beta * g;
            cumulative_gains.push(acc);
        }
        Ok(ChannelState {
            hop_gains,
            cumulative_gains,
        })
    }

    /// Number of relays `K`.
    pub fn relays(&self) -> usize {
        self.hop_gains.len() - 1
    }

    pub fn hops(&self) -> usize {
        self.hop_gains.len()
    }

    pub fn hop_gains(&self) -> &[f64] {
        &self.hop_gains
    }

    pub fn cumulative_gains(&self) -> &[f64] {
        &self.cumulative_gains
    }

    /// `|h_k|^2` for 1-based hop `k`.
    pub fn hop_gain(&self, k: usize) -> f64 {
        self.hop_gains[k - 1]
    }

    /// `Gamma_k` for 1-based `k`, with `Gamma_0 = 1`.
    pub fn cumulative(&self, k: usize) -> f64 {
        if k == 0 {
            1.0
        } else {
            self.cumulative_gains[k - 1]
        }
    }

    /// Fail if some `Gamma_k` is zero (or not finite).
    pub fn ensure_nondegenerate(&self) -> Result<()> {
        match self
            .cumulative_gains
            .iter()
            .position(|g| !(*g > 0.0 && g.is_finite()))
        {
            Some(i) => Err(Error::DegenerateChannel {
                hop: i + 1,
                value: self.cumulative_gains[i],
            }),
            None => Ok(()),
        }
    }
}

/// Combine geometry, node efficiencies and small-scale power gains into a
/// [`ChannelState`]. All three slices have one entry per hop.
pub fn build_channel_state(
    geometries: &[HopGeometry],
    betas: &[f64],
    fading: &[f64],
) -> Result<ChannelState> {
    if fading.len() != geometries.len() {
        return Err(Error::LengthMismatch {
            what: "fading gains",
            expected: geometries.len(),
            got: fading.len(),
        });
    }
    let hop_gains = geometries
        .iter()
        .zip(fading)
        .map(|(g, f)| Ok(g.large_scale_gain()? * f))
        .collect::<Result<Vec<_>>>()?;
    ChannelState::from_hop_gains(hop_gains, betas)
}
