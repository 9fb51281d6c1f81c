//! Arrival and service-time traces.
//!
//! A [`Trace`] holds the four input sequences of one replication: PU and ED
//! arrival instants and their service demands. Traces are generated from a
//! [`SimConfig`] with a seeded ChaCha20 generator; each replication and each
//! random quantity (ED arrivals, PU services, ED services) draws from its own
//! ChaCha stream, so replications are independent and a trace can be rebuilt
//! bit-for-bit from `(seed, replication)`.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::model::{PacketClass, SensorConfig, SimConfig};
use crate::time::SimTime;

/// Identifier of the generator and sampling procedure. Bump it whenever a
/// change would alter generated traces.
pub const RNG_ALGORITHM: &str = "chacha20-v1";

const STREAM_ED_ARRIVALS: u64 = 0;
const STREAM_PU_SERVICES: u64 = 1;
const STREAM_ED_SERVICES: u64 = 2;

#[derive(Debug, thiserror::Error)]
pub enum WorkloadError {
    #[error("NON_POSITIVE_RATE: service rate {0} must be finite and > 0")]
    NonPositiveRate(f64),
    #[error("MALFORMED_TRACE: {0}")]
    MalformedTrace(String),
    #[error("trace CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("trace CSV line {line}: {msg}")]
    Parse { line: u64, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Per-class arrival instants and service demands for one replication.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub pu_arrivals: Vec<SimTime>,
    pub ed_arrivals: Vec<SimTime>,
    pub pu_services: Vec<SimTime>,
    pub ed_services: Vec<SimTime>,
    pub seed: u64,
    pub replication: u32,
    pub rng: String,
}

impl Trace {
    /// Builds a trace from explicit sequences, checking the invariants.
    pub fn new(
        pu_arrivals: Vec<SimTime>,
        pu_services: Vec<SimTime>,
        ed_arrivals: Vec<SimTime>,
        ed_services: Vec<SimTime>,
    ) -> Result<Trace, WorkloadError> {
        let trace = Trace {
            pu_arrivals,
            ed_arrivals,
            pu_services,
            ed_services,
            seed: 0,
            replication: 0,
            rng: "manual".into(),
        };
        trace.check()?;
        Ok(trace)
    }

    /// Convenience constructor from `(arrival_ms, service_ms)` pairs.
    pub fn from_ms(pu: &[(f64, f64)], ed: &[(f64, f64)]) -> Result<Trace, WorkloadError> {
        let split = |v: &[(f64, f64)]| -> (Vec<SimTime>, Vec<SimTime>) {
            v.iter().map(|&(a, s)| (SimTime::from_ms(a), SimTime::from_ms(s))).unzip()
        };
        let (pa, ps) = split(pu);
        let (ea, es) = split(ed);
        Trace::new(pa, ps, ea, es)
    }

    /// Verifies length agreement, sorted arrivals and positive services.
    pub fn check(&self) -> Result<(), WorkloadError> {
        for (class, arrivals, services) in [
            (PacketClass::Pu, &self.pu_arrivals, &self.pu_services),
            (PacketClass::Ed, &self.ed_arrivals, &self.ed_services),
        ] {
            if arrivals.len() != services.len() {
                return Err(WorkloadError::MalformedTrace(format!(
                    "{class}: {} arrivals but {} service times",
                    arrivals.len(),
                    services.len()
                )));
            }
            if let Some(i) = arrivals.windows(2).position(|w| w[1] < w[0]) {
                return Err(WorkloadError::MalformedTrace(format!(
                    "{class}: arrival {} precedes arrival {}",
                    i + 1,
                    i
                )));
            }
            if arrivals.first().is_some_and(|a| *a < SimTime::ZERO) {
                return Err(WorkloadError::MalformedTrace(format!("{class}: negative arrival time")));
            }
            if let Some(i) = services.iter().position(|s| *s <= SimTime::ZERO) {
                return Err(WorkloadError::MalformedTrace(format!(
                    "{class}: service time {i} is not positive"
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self, class: PacketClass) -> usize {
        match class {
            PacketClass::Pu => self.pu_arrivals.len(),
            PacketClass::Ed => self.ed_arrivals.len(),
        }
    }

    pub fn total_len(&self) -> usize {
        self.pu_arrivals.len() + self.ed_arrivals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.total_len() == 0
    }

    pub fn arrivals(&self, class: PacketClass) -> &[SimTime] {
        match class {
            PacketClass::Pu => &self.pu_arrivals,
            PacketClass::Ed => &self.ed_arrivals,
        }
    }

    pub fn services(&self, class: PacketClass) -> &[SimTime] {
        match class {
            PacketClass::Pu => &self.pu_services,
            PacketClass::Ed => &self.ed_services,
        }
    }

    /// All packets as `(class, index)` in arrival order; simultaneous
    /// arrivals list PU before ED.
    pub fn interleaved(&self) -> Vec<(PacketClass, usize)> {
        let mut out = Vec::with_capacity(self.total_len());
        let (mut i, mut j) = (0, 0);
        while i < self.pu_arrivals.len() || j < self.ed_arrivals.len() {
            let take_pu = match (self.pu_arrivals.get(i), self.ed_arrivals.get(j)) {
                (Some(p), Some(e)) => p <= e,
                (Some(_), None) => true,
                _ => false,
            };
            if take_pu {
                out.push((PacketClass::Pu, i));
                i += 1;
            } else {
                out.push((PacketClass::Ed, j));
                j += 1;
            }
        }
        out
    }

    /// Writes the trace as CSV: a `#` provenance line, then
    /// `class,arrival_ms,service_ms` rows in arrival order.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<(), WorkloadError> {
        writeln!(out, "# rng={} seed={} replication={}", self.rng, self.seed, self.replication)?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["class", "arrival_ms", "service_ms"])?;
        for (class, i) in self.interleaved() {
            w.write_record([
                class.label().to_string(),
                self.arrivals(class)[i].format_ms(6),
                self.services(class)[i].format_ms(6),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("CSV is UTF-8")
    }

    /// Reads a trace written by [`Trace::write_csv`]. The provenance line is
    /// optional.
    pub fn read_csv<R: Read>(mut input: R) -> Result<Trace, WorkloadError> {
        let mut text = String::new();
        input.read_to_string(&mut text)?;
        let (mut seed, mut replication, mut rng) = (0u64, 0u32, "imported".to_string());
        if let Some(first) = text.lines().next().and_then(|l| l.strip_prefix('#')) {
            for kv in first.split_whitespace() {
                match kv.split_once('=') {
                    Some(("seed", v)) => seed = v.parse().unwrap_or(0),
                    Some(("replication", v)) => replication = v.parse().unwrap_or(0),
                    Some(("rng", v)) => rng = v.to_string(),
                    _ => {}
                }
            }
        }
        let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
        let headers = reader.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["class", "arrival_ms", "service_ms"] {
            return Err(WorkloadError::Parse { line: 1, msg: format!("unexpected header {headers:?}") });
        }
        let (mut pa, mut ps, mut ea, mut es) = (vec![], vec![], vec![], vec![]);
        for rec in reader.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line());
            let bad = |msg: String| WorkloadError::Parse { line, msg };
            if rec.len() != 3 {
                return Err(bad(format!("expected 3 fields, found {}", rec.len())));
            }
            let class = PacketClass::parse(&rec[0]).ok_or_else(|| bad(format!("unknown class `{}`", &rec[0])))?;
            let arrival = SimTime::parse_ms(&rec[1]).map_err(|e| bad(e.to_string()))?;
            let service = SimTime::parse_ms(&rec[2]).map_err(|e| bad(e.to_string()))?;
            match class {
                PacketClass::Pu => {
                    pa.push(arrival);
                    ps.push(service);
                }
                PacketClass::Ed => {
                    ea.push(arrival);
                    es.push(service);
                }
            }
        }
        let mut trace = Trace::new(pa, ps, ea, es)?;
        trace.seed = seed;
        trace.replication = replication;
        trace.rng = rng;
        Ok(trace)
    }
}

/// Merged, sorted PU arrival instants of all sensors within `[0, horizon)`.
pub fn gen_pu_arrivals(sensors: &[SensorConfig], horizon_ms: f64) -> Vec<SimTime> {
    let horizon = SimTime::from_ms(horizon_ms);
    let mut out = Vec::new();
    for s in sensors {
        let period = SimTime::from_ms(s.pu_period);
        let mut t = SimTime::from_ms(s.pu_phase);
        if period <= SimTime::ZERO {
            continue;
        }
        while t < horizon {
            out.push(t);
            t += period;
        }
    }
    out.sort_unstable();
    out
}

/// One exponential draw with the given rate, by inversion.
fn exp_draw<R: Rng + ?Sized>(rate: f64, rng: &mut R) -> f64 {
    let u: f64 = rng.gen();
    -(1.0 - u).ln() / rate
}

/// Poisson arrival instants with rate `total_rate` per ms within `[0, horizon)`.
pub fn gen_ed_arrivals<R: Rng + ?Sized>(total_rate: f64, horizon_ms: f64, rng: &mut R) -> Vec<SimTime> {
    let mut out = Vec::new();
    if !(total_rate > 0.0) {
        return out;
    }
    let horizon = SimTime::from_ms(horizon_ms);
    let mut t = 0.0;
    loop {
        t += exp_draw(total_rate, rng);
        let tick = SimTime::from_ms(t);
        if tick >= horizon {
            break;
        }
        out.push(tick);
    }
    out
}

/// `count` exponential service times with mean `1/rate` ms, each at least
/// one tick.
pub fn sample_service_times<R: Rng + ?Sized>(
    rate: f64,
    count: usize,
    rng: &mut R,
) -> Result<Vec<SimTime>, WorkloadError> {
    if !(rate.is_finite() && rate > 0.0) {
        return Err(WorkloadError::NonPositiveRate(rate));
    }
    Ok((0..count)
        .map(|_| SimTime::from_ms(exp_draw(rate, rng)).max(SimTime::TICK))
        .collect())
}

/// The generator for one `(seed, replication, stream)` triple.
pub fn substream(seed: u64, replication: u32, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(((replication as u64) << 2) | stream);
    rng
}

/// Generates replication `replication` of `config`. The caller is expected
/// to have validated the configuration.
pub fn build_trace(config: &SimConfig, replication: u32) -> Result<Trace, WorkloadError> {
    let pu_arrivals = gen_pu_arrivals(&config.sensors, config.horizon);
    let ed_arrivals = gen_ed_arrivals(
        config.ed_rate_total(),
        config.horizon,
        &mut substream(config.seed, replication, STREAM_ED_ARRIVALS),
    );
    let pu_services = sample_service_times(
        config.service.pu_rate(),
        pu_arrivals.len(),
        &mut substream(config.seed, replication, STREAM_PU_SERVICES),
    )?;
    let ed_services = sample_service_times(
        config.service.ed_rate(),
        ed_arrivals.len(),
        &mut substream(config.seed, replication, STREAM_ED_SERVICES),
    )?;
    Ok(Trace {
        pu_arrivals,
        ed_arrivals,
        pu_services,
        ed_services,
        seed: config.seed,
        replication,
        rng: RNG_ALGORITHM.into(),
    })
}
