use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::mcs::McsTable;
use crate::error::{Error, Result};

/// Cell, channel, traffic and feature-scaling parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub carrier_frequency_ghz: f64,
    pub bandwidth_mhz: f64,
    pub tx_power_dbm: f64,
    /// Control period T, ms. One action per vehicle per period.
    pub control_period_ms: u32,
    pub episode_duration_s: f64,
    pub n_vehicles: usize,
    pub frame_rate_hz: f64,
    pub rng_seed: u64,

    // channel
    pub pathloss_exponent: f64,
    pub shadowing_std_db: f64,
    /// Shadowing decorrelation time for the per-ms AR(1) process.
    pub shadowing_corr_ms: f64,
    pub antenna_gain_db: f64,
    pub noise_figure_db: f64,
    pub cell_radius_m: f64,

    // mobility: closed rectangle centred on the origin
    pub route_half_length_m: f64,
    pub route_half_width_m: f64,
    pub vehicle_speed_mps: f64,
    pub gnb_x_m: f64,
    pub gnb_y_m: f64,
    pub gnb_height_m: f64,

    // scheduler and traffic
    /// Fraction of resource elements carrying uplink user data.
    pub usable_fraction: f64,
    pub symbols_per_ms: u32,
    pub packet_size_bytes: u32,
    /// Coefficient of variation of the frame size.
    pub payload_cv: f64,
    /// Packets older than this are dropped from the transmit queue.
    pub max_queue_delay_ms: f64,
    /// Delay before a newly chosen mode takes effect at the vehicle.
    pub notification_delay_ms: u32,
    /// Optional replacement for the shipped MCS table.
    pub mcs_table: Option<PathBuf>,

    // state feature bounds
    pub delay_bound_ms: f64,
    pub sinr_min_db: f64,
    pub sinr_max_db: f64,
    pub mcs_max: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            carrier_frequency_ghz: 3.5,
            bandwidth_mhz: 50.0,
            tx_power_dbm: 23.0,
            control_period_ms: 100,
            episode_duration_s: 80.0,
            n_vehicles: 1,
            frame_rate_hz: 10.0,
            rng_seed: 0,
            pathloss_exponent: 3.0,
            shadowing_std_db: 4.0,
            shadowing_corr_ms: 1000.0,
            antenna_gain_db: 8.0,
            noise_figure_db: 7.0,
            cell_radius_m: 400.0,
            route_half_length_m: 200.0,
            route_half_width_m: 100.0,
            vehicle_speed_mps: 10.0,
            gnb_x_m: 60.0,
            gnb_y_m: 30.0,
            gnb_height_m: 25.0,
            usable_fraction: 0.5,
            symbols_per_ms: 14,
            packet_size_bytes: 1500,
            payload_cv: 0.1,
            max_queue_delay_ms: 400.0,
            notification_delay_ms: 0,
            mcs_table: None,
            delay_bound_ms: 400.0,
            sinr_min_db: -10.0,
            sinr_max_db: 40.0,
            mcs_max: 14.0,
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("sim.{name} must be positive, got {v}")))
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        positive("carrier_frequency_ghz", self.carrier_frequency_ghz)?;
        positive("bandwidth_mhz", self.bandwidth_mhz)?;
        positive("episode_duration_s", self.episode_duration_s)?;
        positive("frame_rate_hz", self.frame_rate_hz)?;
        positive("pathloss_exponent", self.pathloss_exponent)?;
        positive("shadowing_corr_ms", self.shadowing_corr_ms)?;
        positive("cell_radius_m", self.cell_radius_m)?;
        positive("route_half_length_m", self.route_half_length_m)?;
        positive("route_half_width_m", self.route_half_width_m)?;
        positive("max_queue_delay_ms", self.max_queue_delay_ms)?;
        positive("delay_bound_ms", self.delay_bound_ms)?;
        positive("mcs_max", self.mcs_max)?;
        if self.n_vehicles == 0 {
            return Err(Error::Config("sim.n_vehicles must be at least 1".into()));
        }
        if self.control_period_ms == 0 {
            return Err(Error::Config("sim.control_period_ms must be positive".into()));
        }
        if self.symbols_per_ms == 0 || self.packet_size_bytes == 0 {
            return Err(Error::Config(
                "sim.symbols_per_ms and sim.packet_size_bytes must be positive".into(),
            ));
        }
        if !(self.usable_fraction > 0.0 && self.usable_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "sim.usable_fraction must lie in (0, 1], got {}",
                self.usable_fraction
            )));
        }
        if !(self.shadowing_std_db >= 0.0 && self.shadowing_std_db.is_finite()) {
            return Err(Error::Config("sim.shadowing_std_db must be non-negative".into()));
        }
        if !(self.payload_cv >= 0.0 && self.payload_cv < 1.0) {
            return Err(Error::Config("sim.payload_cv must lie in [0, 1)".into()));
        }
        if !(self.vehicle_speed_mps >= 0.0 && self.vehicle_speed_mps.is_finite()) {
            return Err(Error::Config("sim.vehicle_speed_mps must be non-negative".into()));
        }
        if self.sinr_max_db <= self.sinr_min_db {
            return Err(Error::Config("sim.sinr_max_db must exceed sim.sinr_min_db".into()));
        }
        if self.notification_delay_ms >= self.control_period_ms {
            return Err(Error::Config(
                "sim.notification_delay_ms must be shorter than the control period".into(),
            ));
        }
        let duration_ms = self.episode_duration_s * 1000.0;
        if (duration_ms - duration_ms.round()).abs() > 1e-6
            || !(duration_ms.round() as u64).is_multiple_of(u64::from(self.control_period_ms))
        {
            return Err(Error::Config(format!(
                "control period {} ms must divide the episode duration {} s",
                self.control_period_ms, self.episode_duration_s
            )));
        }
        let interval = 1000.0 / self.frame_rate_hz;
        if (interval - interval.round()).abs() > 1e-9 || interval.round() < 1.0 {
            return Err(Error::Config(format!(
                "frame interval 1000/{} ms must be a whole number of milliseconds",
                self.frame_rate_hz
            )));
        }
        let corners = [
            (self.route_half_length_m, self.route_half_width_m),
            (-self.route_half_length_m, self.route_half_width_m),
            (self.route_half_length_m, -self.route_half_width_m),
            (-self.route_half_length_m, -self.route_half_width_m),
        ];
        for (x, y) in corners {
            if (x - self.gnb_x_m).hypot(y - self.gnb_y_m) > self.cell_radius_m {
                return Err(Error::Config(format!(
                    "route corner ({x}, {y}) lies outside the {} m cell",
                    self.cell_radius_m
                )));
            }
        }
        Ok(())
    }

    pub fn steps_per_episode(&self) -> usize {
        ((self.episode_duration_s * 1000.0).round() as u64 / u64::from(self.control_period_ms)) as usize
    }

    pub fn frame_interval_ms(&self) -> u64 {
        (1000.0 / self.frame_rate_hz).round() as u64
    }

    /// Symbols the cell can grant in one control period.
    pub fn symbol_budget(&self) -> u32 {
        self.symbols_per_ms * self.control_period_ms
    }

    pub fn load_mcs_table(&self) -> Result<McsTable> {
        match &self.mcs_table {
            Some(path) => McsTable::load(path),
            None => Ok(McsTable::default()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_give_800_steps() {
        let c = SimConfig::default();
        c.validate().unwrap();
        assert_eq!(c.steps_per_episode(), 800);
        assert_eq!(c.frame_interval_ms(), 100);
        assert_eq!(c.symbol_budget(), 1400);
    }

    #[test]
    fn rejects_bad_fields() {
        let bad = [
            SimConfig { n_vehicles: 0, ..Default::default() },
            SimConfig { control_period_ms: 30, ..Default::default() },
            SimConfig { frame_rate_hz: 3.0, ..Default::default() },
            SimConfig { usable_fraction: 0.0, ..Default::default() },
            SimConfig { cell_radius_m: 50.0, ..Default::default() },
            SimConfig { bandwidth_mhz: -1.0, ..Default::default() },
            SimConfig { notification_delay_ms: 100, ..Default::default() },
        ];
        for c in bad {
            assert!(matches!(c.validate(), Err(Error::Config(_))), "{c:?}");
        }
    }
}
