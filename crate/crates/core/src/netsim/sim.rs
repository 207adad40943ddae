use alloc::collections::VecDeque;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use super::{positive, NetsimError, PacketSizeKind, PacketSizes, MIN_ACCEPTED};

/// Measurements of one simulated queue over its measurement window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOutput {
    pub window: f64,
    pub arrivals: u64,
    pub accepted: u64,
    pub blocked: u64,
    /// Arrivals per second.
    pub arrival_rate: f64,
    /// Accepted arrivals per second.
    pub effective_arrival_rate: f64,
    /// Mean size of accepted packets, or the configured mean if none.
    pub mean_packet_bits: f64,
    pub buffer_slots: u32,
    /// Time-averaged number in system.
    pub occupancy: f64,
    /// Mean sojourn time of accepted packets.
    pub delay: f64,
    pub blocked_fraction: f64,
}

impl SimOutput {
    pub fn low_confidence(&self) -> bool {
        self.accepted < MIN_ACCEPTED
    }
}

struct Area {
    from: f64,
    to: f64,
    last: f64,
    sum: f64,
}

impl Area {
    fn advance(&mut self, t: f64, n: usize) {
        let a = self.last.clamp(self.from, self.to);
        let b = t.clamp(self.from, self.to);
        self.sum += n as f64 * (b - a);
        self.last = t;
    }
}

/// Simulates a FIFO single-server queue with Poisson arrivals, service time
/// `size / capacity` and room for `floor(buffer_bits / mean_bits)` packets in
/// the system; arrivals to a full system are dropped.
///
/// Statistics cover arrivals in `[warmup, duration]`. Sojourn times are exact
/// because FIFO departure times are known on arrival.
pub fn simulate_link(
    arrival_rate: f64,
    capacity: f64,
    sizes: PacketSizes,
    buffer_bits: f64,
    duration: f64,
    warmup: f64,
    seed: u64,
) -> Result<SimOutput, NetsimError> {
    if !(arrival_rate.is_finite() && arrival_rate >= 0.0) {
        return Err(NetsimError::Parameter {
            name: "arrival rate",
            value: arrival_rate,
        });
    }
    positive("capacity", capacity)?;
    positive("duration", duration)?;
    if !(warmup >= 0.0 && warmup < duration) {
        return Err(NetsimError::Parameter {
            name: "warmup",
            value: warmup,
        });
    }
    let k = sizes.buffer_slots(buffer_bits)? as usize;
    let window = duration - warmup;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut area = Area {
        from: warmup,
        to: duration,
        last: 0.0,
        sum: 0.0,
    };
    let (mut arrivals, mut accepted, mut blocked) = (0u64, 0u64, 0u64);
    let (mut sojourn, mut bits) = (0.0f64, 0.0f64);

    if arrival_rate > 0.0 {
        let gap = Exp::new(arrival_rate).map_err(|_| NetsimError::Parameter {
            name: "arrival rate",
            value: arrival_rate,
        })?;
        let size_dist = Exp::new(1.0 / sizes.mean_bits).map_err(|_| NetsimError::Parameter {
            name: "mean packet bits",
            value: sizes.mean_bits,
        })?;
        let mut in_system: VecDeque<f64> = VecDeque::with_capacity(k);
        let mut last_departure = 0.0f64;
        let mut t = 0.0f64;
        loop {
            t += gap.sample(&mut rng);
            if t > duration {
                break;
            }
            while let Some(&d) = in_system.front() {
                if d > t {
                    break;
                }
                area.advance(d, in_system.len());
                in_system.pop_front();
            }
            area.advance(t, in_system.len());
            let counted = t >= warmup;
            if counted {
                arrivals += 1;
            }
            if in_system.len() >= k {
                if counted {
                    blocked += 1;
                }
                continue;
            }
            let size = match sizes.kind {
                PacketSizeKind::Exponential => size_dist.sample(&mut rng),
                PacketSizeKind::Constant => sizes.mean_bits,
            };
            let departure = last_departure.max(t) + size / capacity;
            last_departure = departure;
            in_system.push_back(departure);
            if counted {
                accepted += 1;
                sojourn += departure - t;
                bits += size;
            }
        }
        while let Some(&d) = in_system.front() {
            if d > duration {
                break;
            }
            area.advance(d, in_system.len());
            in_system.pop_front();
        }
        area.advance(duration, in_system.len());
    }

    debug_assert_eq!(arrivals, accepted + blocked);
    Ok(SimOutput {
        window,
        arrivals,
        accepted,
        blocked,
        arrival_rate: arrivals as f64 / window,
        effective_arrival_rate: accepted as f64 / window,
        mean_packet_bits: if accepted > 0 { bits / accepted as f64 } else { sizes.mean_bits },
        buffer_slots: k as u32,
        occupancy: area.sum / window,
        delay: if accepted > 0 { sojourn / accepted as f64 } else { 0.0 },
        blocked_fraction: if arrivals > 0 { blocked as f64 / arrivals as f64 } else { 0.0 },
    })
}
