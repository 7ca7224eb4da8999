//! Path loss, fading and the power/departure link budget.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::mobility::{LinkClass, LinkGeometry};
use crate::scenario::{FadingModel, ScenarioConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathLossParams {
    /// LOS/WLOS scale ρ.
    pub rho: f64,
    /// NLOS scale ξ.
    pub xi: f64,
    /// Distance exponent e.
    pub exponent: f64,
}

impl PathLossParams {
    pub fn from_config(config: &ScenarioConfig) -> Self {
        PathLossParams {
            rho: config.pathloss_exponent_coeff,
            xi: config.nlos_exponent,
            exponent: config.pathloss_coefficient,
        }
    }
}

/// Linear path loss for a classified link.
pub fn path_loss(geometry: &LinkGeometry, params: &PathLossParams) -> Result<f64, Error> {
    let (dx, dy) = (geometry.dx.abs(), geometry.dy.abs());
    let (scale, distance) = match geometry.class {
        LinkClass::Los => (params.rho, dx.hypot(dy)),
        LinkClass::Wlos => (params.rho, dx + dy),
        LinkClass::Nlos => (params.xi, dx * dy),
    };
    if !(distance > 0.0) || !distance.is_finite() {
        return Err(Error::DegenerateLink);
    }
    Ok(scale * distance.powf(-params.exponent))
}

pub fn draw_fading<R: Rng + ?Sized>(model: FadingModel, rng: &mut R) -> f64 {
    match model {
        FadingModel::Exponential => Exp1.sample(rng),
        FadingModel::RayleighAmplitude => {
            // inverse CDF of Rayleigh(1): sqrt(-2 ln U), U in (0, 1]
            let u: f64 = 1.0 - rng.random::<f64>();
            (-2.0 * u.ln()).sqrt()
        }
        FadingModel::Unit => 1.0,
    }
}

/// One slot's channel: path loss, fading and their product.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelState {
    pub path_loss: f64,
    pub fading: f64,
    pub quality: f64,
}

impl ChannelState {
    pub fn new(path_loss: f64, fading: f64) -> Self {
        ChannelState {
            path_loss,
            fading,
            quality: fading * path_loss,
        }
    }
}

/// Constants linking channel quality, packets and transmit power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    /// N + w·σ², in W.
    pub noise_floor: f64,
    pub bandwidth: f64,
    pub slot_duration: f64,
    pub packet_bits: f64,
    pub max_power: f64,
}

impl LinkBudget {
    pub fn from_config(config: &ScenarioConfig) -> Self {
        LinkBudget {
            noise_floor: config.interference + config.bandwidth * config.noise_psd,
            bandwidth: config.bandwidth,
            slot_duration: config.slot_duration,
            packet_bits: config.packet_size,
            max_power: config.max_power,
        }
    }

    /// Power needed to deliver `departures` packets within one slot when
    /// `won` the resource; zero when nothing is sent.
    pub fn required_power(&self, quality: f64, won: bool, departures: usize) -> f64 {
        if !won || departures == 0 {
            return 0.0;
        }
        let exponent = self.packet_bits * departures as f64 / (self.bandwidth * self.slot_duration);
        self.noise_floor / quality * (exponent.exp2() - 1.0)
    }

    /// Packets the channel can carry at full power, ignoring the queue.
    pub fn capacity(&self, quality: f64) -> usize {
        let bits = self.slot_duration * self.bandwidth * (quality * self.max_power / self.noise_floor).ln_1p()
            / std::f64::consts::LN_2;
        let packets = (bits / self.packet_bits).floor();
        if packets.is_finite() && packets > 0.0 {
            packets as usize
        } else {
            0
        }
    }

    /// Largest departure count that is both queued and power-feasible.
    ///
    /// Starts from the closed-form capacity and settles the floor boundary
    /// against [`LinkBudget::required_power`], so the two always agree.
    pub fn max_departures(&self, quality: f64, queue: usize) -> usize {
        let mut d = self.capacity(quality).min(queue);
        while d > 0 && self.required_power(quality, true, d) > self.max_power {
            d -= 1;
        }
        while d < queue && self.required_power(quality, true, d + 1) <= self.max_power {
            d += 1;
        }
        d
    }
}
