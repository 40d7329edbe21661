use std::collections::VecDeque;
use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::config::SimConfig;
use super::mcs::McsTable;
use super::mode::ApplicationMode;
use crate::error::{Error, Result};
use crate::reward::QosSample;
use crate::seeds;

const SPEED_OF_LIGHT: f64 = 299_792_458.0;
const THERMAL_NOISE_DBM_HZ: f64 = -174.0;

const STREAM_MOBILITY: u64 = 1;
const STREAM_SHADOWING: u64 = 2;
const STREAM_PAYLOAD: u64 = 3;

pub const STATE_DIM: usize = 8;

/// Normalised per-vehicle observation, in order: MCS, OFDM symbols, SINR,
/// mean/max/min/std delay, PRR. Every entry lies in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateVector(pub [f64; STATE_DIM]);

impl StateVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Per-vehicle KPIs aggregated over one control period.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StepKpis {
    /// MCS selected for the period-mean SINR.
    pub mcs_index: u8,
    pub ofdm_symbols_used: u32,
    /// Mean of the per-millisecond SINR samples, dB.
    pub sinr_db: f64,
    pub delay_mean_ms: f64,
    pub delay_max_ms: f64,
    pub delay_min_ms: f64,
    pub delay_std_ms: f64,
    /// `packets_delivered / packets_generated`.
    pub prr: f64,
    pub packets_generated: u64,
    /// Packets generated in this period and delivered before it ended.
    pub packets_delivered: u64,
    /// All deliveries in the period, including backlog from earlier periods.
    pub packets_delivered_total: u64,
    pub packets_dropped: u64,
    /// Queue length at the end of the period.
    pub packets_queued: u64,
    pub frames_generated: u32,
    pub payload_bytes: u64,
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub states: Vec<StateVector>,
    /// `None` when the vehicle generated no packets in the period.
    pub qos: Vec<Option<QosSample>>,
    pub kpis: Vec<StepKpis>,
    pub done: bool,
}

#[derive(Debug, Clone, Copy)]
struct Packet {
    created_ms: f64,
    remaining_bits: f64,
    period: usize,
}

#[derive(Debug, Clone)]
struct Vehicle {
    route_offset_m: f64,
    shadow_db: f64,
    sinr_db: f64,
    efficiency: f64,
    mode: ApplicationMode,
    queue: VecDeque<Packet>,
}

#[derive(Debug, Clone)]
struct PeriodStats {
    sinr_sum: f64,
    ticks: u32,
    symbols: u32,
    delays: u64,
    delay_mean: f64,
    delay_m2: f64,
    delay_min: f64,
    delay_max: f64,
    generated: u64,
    delivered: u64,
    dropped: u64,
    frames: u32,
    payload_bytes: u64,
    cd: f64,
}

impl PeriodStats {
    fn new() -> Self {
        Self {
            sinr_sum: 0.0,
            ticks: 0,
            symbols: 0,
            delays: 0,
            delay_mean: 0.0,
            delay_m2: 0.0,
            delay_min: f64::INFINITY,
            delay_max: f64::NEG_INFINITY,
            generated: 0,
            delivered: 0,
            dropped: 0,
            frames: 0,
            payload_bytes: 0,
            cd: 0.0,
        }
    }

    // Welford update
    fn record_delay(&mut self, d: f64) {
        self.delays += 1;
        let delta = d - self.delay_mean;
        self.delay_mean += delta / self.delays as f64;
        self.delay_m2 += delta * (d - self.delay_mean);
        self.delay_min = self.delay_min.min(d);
        self.delay_max = self.delay_max.max(d);
    }
}

/// One cell with `n_vehicles` uplink LiDAR streams.
///
/// Time advances in 1 ms scheduling ticks. Each tick the per-vehicle SINR is
/// recomputed from log-distance pathloss and AR(1) shadowing, mapped to a
/// spectral efficiency, and the cell's OFDM symbols are handed out
/// round-robin to backlogged vehicles with a usable link.
#[derive(Debug, Clone)]
pub struct NetworkEnv {
    config: SimConfig,
    table: McsTable,
    vehicles: Vec<Vehicle>,
    shadow_rng: ChaCha8Rng,
    payload_rng: ChaCha8Rng,
    now_ms: u64,
    step: usize,
    steps_per_episode: usize,
    done: bool,
    next_grant: usize,
    link_budget_db: f64,
    shadow_rho: f64,
    shadow_innovation: f64,
    bits_per_symbol_per_efficiency: f64,
}

/// Validates `config` and starts an episode. Returns the environment and the
/// initial state of every vehicle.
pub fn reset(config: SimConfig, seed: u64) -> Result<(NetworkEnv, Vec<StateVector>)> {
    let mut env = NetworkEnv::new(config)?;
    let states = env.reset(seed);
    Ok((env, states))
}

impl NetworkEnv {
    pub fn new(config: SimConfig) -> Result<Self> {
        config.validate()?;
        let table = config.load_mcs_table()?;
        let bandwidth_hz = config.bandwidth_mhz * 1e6;
        let wavelength = SPEED_OF_LIGHT / (config.carrier_frequency_ghz * 1e9);
        let fspl_1m = 20.0 * (4.0 * PI / wavelength).log10();
        let noise_dbm = THERMAL_NOISE_DBM_HZ + 10.0 * bandwidth_hz.log10() + config.noise_figure_db;
        let link_budget_db = config.tx_power_dbm + config.antenna_gain_db - fspl_1m - noise_dbm;
        let shadow_rho = (-1.0 / config.shadowing_corr_ms).exp();
        let shadow_innovation = (1.0 - shadow_rho * shadow_rho).sqrt() * config.shadowing_std_db;
        let bits_per_symbol_per_efficiency = bandwidth_hz * config.usable_fraction
            / (f64::from(config.symbols_per_ms) * 1000.0);
        Ok(Self {
            steps_per_episode: config.steps_per_episode(),
            vehicles: Vec::new(),
            shadow_rng: seeds::rng(config.rng_seed, &[STREAM_SHADOWING]),
            payload_rng: seeds::rng(config.rng_seed, &[STREAM_PAYLOAD]),
            now_ms: 0,
            step: 0,
            done: true,
            next_grant: 0,
            link_budget_db,
            shadow_rho,
            shadow_innovation,
            bits_per_symbol_per_efficiency,
            config,
            table,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn mcs_table(&self) -> &McsTable {
        &self.table
    }

    pub fn n_vehicles(&self) -> usize {
        self.config.n_vehicles
    }

    pub fn steps_per_episode(&self) -> usize {
        self.steps_per_episode
    }

    pub fn step_index(&self) -> usize {
        self.step
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn now_ms(&self) -> u64 {
        self.now_ms
    }

    /// Bits carried by one OFDM symbol at the given spectral efficiency.
    pub fn bits_per_symbol(&self, efficiency: f64) -> f64 {
        efficiency * self.bits_per_symbol_per_efficiency
    }

    /// Peak cell throughput in Mbit/s at the table's best MCS.
    pub fn peak_capacity_mbps(&self) -> f64 {
        let best = self.table.entries().last().map_or(0.0, |e| e.efficiency);
        self.bits_per_symbol(best) * f64::from(self.config.symbols_per_ms) * 1000.0 / 1e6
    }

    pub fn reset(&mut self, seed: u64) -> Vec<StateVector> {
        let mut mobility = seeds::rng(seed, &[STREAM_MOBILITY]);
        self.shadow_rng = seeds::rng(seed, &[STREAM_SHADOWING]);
        self.payload_rng = seeds::rng(seed, &[STREAM_PAYLOAD]);
        let perimeter = self.perimeter();
        let sigma = self.config.shadowing_std_db;
        self.vehicles = (0..self.config.n_vehicles)
            .map(|_| {
                let z: f64 = self.shadow_rng.sample(StandardNormal);
                Vehicle {
                    route_offset_m: mobility.random_range(0.0..perimeter),
                    shadow_db: sigma * z,
                    sinr_db: 0.0,
                    efficiency: 0.0,
                    mode: ApplicationMode::COMPRESSED,
                    queue: VecDeque::new(),
                }
            })
            .collect();
        self.now_ms = 0;
        self.step = 0;
        self.done = false;
        self.next_grant = 0;
        for v in 0..self.vehicles.len() {
            self.refresh_link(v);
        }
        self.vehicles
            .iter()
            .map(|veh| {
                let (mcs, _) = self.table.lookup(veh.sinr_db);
                self.normalize(&StepKpis {
                    mcs_index: mcs,
                    sinr_db: veh.sinr_db,
                    prr: 1.0,
                    ..StepKpis::default()
                })
            })
            .collect()
    }

    /// Advances one control period with one mode per vehicle.
    pub fn step(&mut self, actions: &[ApplicationMode]) -> Result<StepOutcome> {
        if self.done {
            return Err(Error::Precondition(
                "episode is finished (or never started); call reset".into(),
            ));
        }
        if actions.len() != self.vehicles.len() {
            return Err(Error::Domain(format!(
                "got {} actions for {} vehicles",
                actions.len(),
                self.vehicles.len()
            )));
        }
        let period = self.step;
        let mut stats = vec![PeriodStats::new(); self.vehicles.len()];
        let frame_interval = self.config.frame_interval_ms();
        for tick in 0..self.config.control_period_ms {
            if tick == self.config.notification_delay_ms {
                for (veh, &mode) in self.vehicles.iter_mut().zip(actions) {
                    veh.mode = mode;
                }
            }
            if self.now_ms.is_multiple_of(frame_interval) {
                for (v, st) in stats.iter_mut().enumerate() {
                    self.generate_frame(v, period, st);
                }
            }
            for (v, st) in stats.iter_mut().enumerate() {
                self.advance_shadowing(v);
                self.refresh_link(v);
                st.sinr_sum += self.vehicles[v].sinr_db;
                st.ticks += 1;
            }
            self.drop_stale(&mut stats);
            self.schedule_tick(period, &mut stats);
            self.now_ms += 1;
        }
        self.step += 1;
        self.done = self.step >= self.steps_per_episode;

        let mut outcome = StepOutcome {
            states: Vec::with_capacity(stats.len()),
            qos: Vec::with_capacity(stats.len()),
            kpis: Vec::with_capacity(stats.len()),
            done: self.done,
        };
        for (veh, st) in self.vehicles.iter().zip(&stats) {
            let kpis = self.period_kpis(veh, st);
            outcome.states.push(self.normalize(&kpis));
            outcome.qos.push((kpis.packets_generated > 0).then_some(QosSample {
                prr: kpis.prr,
                mean_delay: kpis.delay_mean_ms,
                cd: st.cd,
            }));
            outcome.kpis.push(kpis);
        }
        Ok(outcome)
    }

    fn perimeter(&self) -> f64 {
        4.0 * (self.config.route_half_length_m + self.config.route_half_width_m)
    }

    /// Position on the rectangular route after travelling `s` metres
    /// counter-clockwise from the south-west corner.
    fn route_position(&self, s: f64) -> (f64, f64) {
        let l = self.config.route_half_length_m;
        let w = self.config.route_half_width_m;
        let s = s.rem_euclid(self.perimeter());
        if s < 2.0 * l {
            (-l + s, -w)
        } else if s < 2.0 * l + 2.0 * w {
            (l, -w + (s - 2.0 * l))
        } else if s < 4.0 * l + 2.0 * w {
            (l - (s - 2.0 * l - 2.0 * w), w)
        } else {
            (-l, w - (s - 4.0 * l - 2.0 * w))
        }
    }

    /// 3-D distance from vehicle `v` to the gNB at the current time.
    pub fn distance_m(&self, v: usize) -> f64 {
        let travelled = self.vehicles[v].route_offset_m
            + self.config.vehicle_speed_mps * self.now_ms as f64 / 1000.0;
        let (x, y) = self.route_position(travelled);
        let dx = x - self.config.gnb_x_m;
        let dy = y - self.config.gnb_y_m;
        (dx * dx + dy * dy + self.config.gnb_height_m * self.config.gnb_height_m)
            .sqrt()
            .max(1.0)
    }

    fn advance_shadowing(&mut self, v: usize) {
        let z: f64 = self.shadow_rng.sample(StandardNormal);
        let veh = &mut self.vehicles[v];
        veh.shadow_db = self.shadow_rho * veh.shadow_db + self.shadow_innovation * z;
    }

    fn refresh_link(&mut self, v: usize) {
        let pathloss = 10.0 * self.config.pathloss_exponent * self.distance_m(v).log10();
        let sinr = self.link_budget_db - pathloss + self.vehicles[v].shadow_db;
        let (_, efficiency) = self.table.lookup(sinr);
        let veh = &mut self.vehicles[v];
        veh.sinr_db = sinr;
        veh.efficiency = efficiency;
    }

    fn draw_payload_kb(&mut self, mean_kb: f64) -> f64 {
        let cv = self.config.payload_cv;
        if cv == 0.0 {
            return mean_kb.max(1.0);
        }
        loop {
            let z: f64 = self.payload_rng.sample(StandardNormal);
            if z.abs() <= 3.0 {
                return (mean_kb * (1.0 + cv * z)).max(1.0);
            }
        }
    }

    fn generate_frame(&mut self, v: usize, period: usize, st: &mut PeriodStats) {
        let mode = self.vehicles[v].mode;
        let bytes = (self.draw_payload_kb(mode.mean_payload_kb) * 1000.0).round() as u64;
        let packet_size = u64::from(self.config.packet_size_bytes);
        let n_packets = bytes.div_ceil(packet_size);
        let created_ms = self.now_ms as f64;
        let queue = &mut self.vehicles[v].queue;
        for i in 0..n_packets {
            let size = if i + 1 == n_packets {
                bytes - (n_packets - 1) * packet_size
            } else {
                packet_size
            };
            queue.push_back(Packet {
                created_ms,
                remaining_bits: (size * 8) as f64,
                period,
            });
        }
        st.generated += n_packets;
        st.frames += 1;
        st.payload_bytes += bytes;
        st.cd = mode.cd_sym;
    }

    fn drop_stale(&mut self, stats: &mut [PeriodStats]) {
        let now = self.now_ms as f64;
        let limit = self.config.max_queue_delay_ms;
        for (veh, st) in self.vehicles.iter_mut().zip(stats) {
            while veh
                .queue
                .front()
                .is_some_and(|p| now - p.created_ms > limit)
            {
                veh.queue.pop_front();
                st.dropped += 1;
            }
        }
    }

    fn schedule_tick(&mut self, period: usize, stats: &mut [PeriodStats]) {
        let n = self.vehicles.len();
        let symbols = self.config.symbols_per_ms;
        let now = self.now_ms as f64;
        for sym in 0..symbols {
            let grant = (0..n)
                .map(|k| (self.next_grant + k) % n)
                .find(|&v| {
                    let veh = &self.vehicles[v];
                    !veh.queue.is_empty() && veh.efficiency > 0.0
                });
            let Some(v) = grant else { break };
            self.next_grant = (v + 1) % n;
            let delivered_at = now + f64::from(sym + 1) / f64::from(symbols);
            let mut bits = self.bits_per_symbol(self.vehicles[v].efficiency);
            let st = &mut stats[v];
            st.symbols += 1;
            let queue = &mut self.vehicles[v].queue;
            while let Some(head) = queue.front_mut() {
                if head.remaining_bits <= bits {
                    bits -= head.remaining_bits;
                    let packet = queue.pop_front().expect("front exists");
                    st.record_delay(delivered_at - packet.created_ms);
                    if packet.period == period {
                        st.delivered += 1;
                    }
                } else {
                    head.remaining_bits -= bits;
                    break;
                }
            }
        }
    }

    fn period_kpis(&self, veh: &Vehicle, st: &PeriodStats) -> StepKpis {
        let sinr_db = st.sinr_sum / f64::from(st.ticks.max(1));
        let (mcs_index, _) = self.table.lookup(sinr_db);
        let (mean, max, min, std) = if st.delays > 0 {
            (
                st.delay_mean,
                st.delay_max,
                st.delay_min,
                (st.delay_m2 / st.delays as f64).sqrt(),
            )
        } else if let Some(head) = veh.queue.front() {
            // Nothing delivered: report the head-of-line age.
            let age = self.now_ms as f64 - head.created_ms;
            (age, age, age, 0.0)
        } else {
            (0.0, 0.0, 0.0, 0.0)
        };
        let prr = if st.generated > 0 {
            st.delivered as f64 / st.generated as f64
        } else {
            1.0
        };
        StepKpis {
            mcs_index,
            ofdm_symbols_used: st.symbols,
            sinr_db,
            delay_mean_ms: mean,
            delay_max_ms: max,
            delay_min_ms: min,
            delay_std_ms: std,
            prr,
            packets_generated: st.generated,
            packets_delivered: st.delivered,
            packets_delivered_total: st.delays,
            packets_dropped: st.dropped,
            packets_queued: veh.queue.len() as u64,
            frames_generated: st.frames,
            payload_bytes: st.payload_bytes,
        }
    }

    /// Min-max scales KPIs into the state vector, clamping to `[0, 1]`.
    pub fn normalize(&self, k: &StepKpis) -> StateVector {
        let c = &self.config;
        let unit = |x: f64| if x.is_finite() { x.clamp(0.0, 1.0) } else { 0.0 };
        let delay = |d: f64| unit(d / c.delay_bound_ms);
        StateVector([
            unit(f64::from(k.mcs_index) / c.mcs_max),
            unit(f64::from(k.ofdm_symbols_used) / f64::from(c.symbol_budget())),
            unit((k.sinr_db - c.sinr_min_db) / (c.sinr_max_db - c.sinr_min_db)),
            delay(k.delay_mean_ms),
            delay(k.delay_max_ms),
            delay(k.delay_min_ms),
            delay(k.delay_std_ms),
            unit(k.prr),
        ])
    }
}
