use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};

use crate::error::{invalid, Result};

/// One charged oracle access.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MeterEvent {
    /// Large-batch gradient of `batch` components out of `n`.
    Snapshot { batch: usize, n: usize },
    /// Two restricted small-batch gradients on `k` of `d` coordinates.
    Inner { batch: usize, k: usize, d: usize },
    /// One dense small-batch gradient.
    Sgd { batch: usize },
}

impl MeterEvent {
    /// Closed-form cost in gradient-query units.
    pub fn cost(&self) -> Ratio<i128> {
        match *self {
            MeterEvent::Snapshot { batch, n } => Ratio::from_integer(batch.min(n) as i128),
            MeterEvent::Inner { batch, k, d } => Ratio::new(2 * batch as i128 * k as i128, d as i128),
            MeterEvent::Sgd { batch } => Ratio::from_integer(batch as i128),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            MeterEvent::Snapshot { batch, n } => batch > 0 && n > 0,
            MeterEvent::Inner { batch, k, d } => batch > 0 && k > 0 && d > 0 && k <= d,
            MeterEvent::Sgd { batch } => batch > 0,
        };
        if ok {
            Ok(())
        } else {
            Err(invalid(format!("meter event with non-positive parameters: {self:?}")))
        }
    }
}

/// Exact accumulator of gradient-query units.
///
/// Events are stored run-length encoded, so a run of a million identical inner
/// steps occupies one entry.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct QueryMeter {
    units: Ratio<i128>,
    events: Vec<(MeterEvent, u64)>,
}

impl QueryMeter {
    pub fn new() -> Self {
        Self {
            units: Ratio::zero(),
            events: Vec::new(),
        }
    }

    pub fn charge(&mut self, event: MeterEvent) -> Result<()> {
        event.validate()?;
        self.units += event.cost();
        match self.events.last_mut() {
            Some((last, count)) if *last == event => *count += 1,
            _ => self.events.push((event, 1)),
        }
        Ok(())
    }

    pub fn units(&self) -> Ratio<i128> {
        self.units
    }

    pub fn units_f64(&self) -> f64 {
        self.units.to_f64().unwrap_or(f64::INFINITY)
    }

    /// Charged events with repeat counts, in charge order.
    pub fn events(&self) -> &[(MeterEvent, u64)] {
        &self.events
    }

    /// Sum of closed-form costs over the recorded events.
    pub fn recomputed_units(&self) -> Ratio<i128> {
        self.events
            .iter()
            .map(|(e, c)| e.cost() * Ratio::from_integer(*c as i128))
            .fold(Ratio::zero(), |a, b| a + b)
    }

    /// Adds another meter's units and events. Units are order-independent.
    pub fn merge(&mut self, other: &QueryMeter) {
        self.units += other.units;
        for &(e, c) in &other.events {
            match self.events.last_mut() {
                Some((last, count)) if *last == e => *count += c,
                _ => self.events.push((e, c)),
            }
        }
    }
}

/// Value-returning form of [`QueryMeter::charge`].
pub fn meter_charge(mut meter: QueryMeter, event: MeterEvent) -> Result<QueryMeter> {
    meter.charge(event)?;
    Ok(meter)
}
