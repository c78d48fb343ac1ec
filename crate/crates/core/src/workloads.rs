//! Seeded victim and background activity: interrupt sources, website
//! network-interrupt traces, keystroke interrupt pairs, and a memory hog
//! that shares the attacker's core.
//!
//! Every generator is a pure function of its inputs and seed.

use std::io::{Read, Write};

use rand::Rng;
use rand_distr::{Distribution, Gamma, LogNormal, Normal, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::core_sim::{Core, Cycle, EventKind, EventQueue, SimError};
use crate::mem_model::{LINE_BYTES, PAGE_SIZE};
use crate::seed;

pub const WEBSITE_BINS: usize = 400;
pub const WEBSITE_BIN_US: u64 = 5_000;

#[derive(Debug, Error)]
pub enum WorkloadError {
    #[error("invalid interrupt source: {0}")]
    InvalidSource(String),
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Schedule {
    /// First event at `offset`, then every `period` cycles.
    Periodic { period: u64, offset: u64 },
    /// Poisson arrivals at `rate_hz` events per simulated second.
    Poisson { rate_hz: f64 },
    /// Explicit times, relative to the window start.
    TraceDriven { times: Vec<u64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterruptSource {
    pub vector: u8,
    pub schedule: Schedule,
}

impl InterruptSource {
    pub fn periodic(vector: u8, period: u64) -> Self {
        Self { vector, schedule: Schedule::Periodic { period, offset: period } }
    }

    pub fn poisson(vector: u8, rate_hz: f64) -> Self {
        Self { vector, schedule: Schedule::Poisson { rate_hz } }
    }

    pub fn validate(&self) -> Result<(), WorkloadError> {
        match &self.schedule {
            Schedule::Periodic { period: 0, .. } => Err(WorkloadError::InvalidSource("zero period".into())),
            Schedule::Poisson { rate_hz } if !(*rate_hz > 0.0 && rate_hz.is_finite()) => {
                Err(WorkloadError::InvalidSource(format!("rate {rate_hz} must be positive")))
            }
            Schedule::TraceDriven { times } if times.windows(2).any(|w| w[0] > w[1]) => {
                Err(WorkloadError::InvalidSource("trace times not sorted".into()))
            }
            _ => Ok(()),
        }
    }

    /// Event times inside `[start, end)`.
    pub fn times(&self, start: Cycle, end: Cycle, cycles_per_us: u64, seed: u64) -> Vec<Cycle> {
        let mut out = Vec::new();
        match &self.schedule {
            Schedule::Periodic { period, offset } => {
                assert!(*period > 0, "zero period");
                let mut t = start + *offset;
                while t < end {
                    out.push(t);
                    t += *period;
                }
            }
            Schedule::Poisson { rate_hz } => {
                let mean_gap = cycles_per_us as f64 * 1e6 / rate_hz;
                let mut rng = seed::rng(seed);
                let mut t = start.0 as f64;
                loop {
                    let u: f64 = rng.random();
                    t += -mean_gap * (1.0 - u).ln();
                    if t >= end.0 as f64 {
                        break;
                    }
                    out.push(Cycle(t as u64));
                }
            }
            Schedule::TraceDriven { times } => {
                out.extend(times.iter().map(|t| start + *t).filter(|t| *t < end));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StressSource {
    pub vector: u8,
    pub rate_hz: f64,
}

/// A memory hog time-sharing the attacker's core: every `period_us` it runs
/// for `slice_us`, during which the attacker is descheduled, and sweeps
/// `sweep_pages` pages of its buffer through the cache.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HogConfig {
    pub period_us: f64,
    pub slice_us: f64,
    pub sweep_pages: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackgroundConfig {
    /// Local APIC timer rate; 0 disables it.
    pub timer_hz: f64,
    pub timer_vector: u8,
    /// Peripheral NIC interrupt period; `None` disables it.
    pub nic_period_ms: Option<f64>,
    pub nic_vector: u8,
    pub stress_sources: Vec<StressSource>,
    pub hog: Option<HogConfig>,
    pub streamer: Option<StreamerConfig>,
}

/// A co-running process streaming through its buffer at Poisson times,
/// `lines_per_burst` consecutive lines per burst. It does not deschedule
/// the attacker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamerConfig {
    pub rate_hz: f64,
    pub lines_per_burst: usize,
}

impl Default for BackgroundConfig {
    fn default() -> Self {
        Self::quiet()
    }
}

impl BackgroundConfig {
    /// Nothing at all; useful for isolated measurements.
    pub fn silent() -> Self {
        Self {
            timer_hz: 0.0,
            timer_vector: 236,
            nic_period_ms: None,
            nic_vector: 33,
            stress_sources: Vec::new(),
            hog: None,
            streamer: None,
        }
    }

    /// Timer tick only.
    pub fn quiet() -> Self {
        Self { timer_hz: 250.0, ..Self::silent() }
    }

    /// Timer plus a peripheral NIC interrupting every 2 s.
    pub fn realistic() -> Self {
        Self { nic_period_ms: Some(2_000.0), ..Self::quiet() }
    }

    /// A memory-streaming co-runner and nothing else.
    pub fn streaming() -> Self {
        Self { streamer: Some(StreamerConfig { rate_hz: 1_200_000.0, lines_per_burst: 64 }), ..Self::silent() }
    }

    /// Realistic plus a `stress -m 2 -c 2`-style load: rescheduling and
    /// function-call IPIs, and a memory hog sharing the core.
    pub fn stress() -> Self {
        Self {
            stress_sources: vec![
                StressSource { vector: 0xfd, rate_hz: 2_000.0 },
                StressSource { vector: 0xfb, rate_hz: 500.0 },
            ],
            hog: Some(HogConfig { period_us: 4_000.0, slice_us: 300.0, sweep_pages: 16 }),
            ..Self::realistic()
        }
    }
}

/// Interrupt sources for a background configuration.
pub fn gen_background(config: &BackgroundConfig, cycles_per_us: u64) -> Vec<InterruptSource> {
    let mut out = Vec::new();
    if config.timer_hz > 0.0 {
        let period = (cycles_per_us as f64 * 1e6 / config.timer_hz).round() as u64;
        out.push(InterruptSource::periodic(config.timer_vector, period));
    }
    if let Some(ms) = config.nic_period_ms {
        let period = (ms * 1e3 * cycles_per_us as f64).round() as u64;
        out.push(InterruptSource::periodic(config.nic_vector, period));
    }
    for s in &config.stress_sources {
        out.push(InterruptSource::poisson(s.vector, s.rate_hz));
    }
    out
}

/// Hog slices inside `[start, end)`: (sweep tick time, blocked window).
pub fn gen_hog_schedule(
    hog: &HogConfig,
    start: Cycle,
    end: Cycle,
    cycles_per_us: u64,
    seed: u64,
) -> Vec<(Cycle, (Cycle, Cycle))> {
    let period = Cycle::from_us(hog.period_us, cycles_per_us).0.max(1);
    let slice = Cycle::from_us(hog.slice_us, cycles_per_us).0.min(period);
    let phase = seed::rng(seed).random_range(0..period);
    let mut out = Vec::new();
    let mut s = start + phase;
    while s < end {
        let e = s + slice;
        out.push((e, (s, e)));
        s += period;
    }
    out
}

/// Queues a background configuration's activity inside `[start, end)`:
/// its interrupts, and for a hog, the sweep ticks and the windows during
/// which the attacker is descheduled.
pub fn install_background(
    core: &mut Core,
    queue: &mut EventQueue,
    config: &BackgroundConfig,
    start: Cycle,
    end: Cycle,
    seed: u64,
) -> Result<(), SimError> {
    let cpu = core.cycles_per_us();
    for (i, source) in gen_background(config, cpu).iter().enumerate() {
        let times = source.times(start, end, cpu, seed::indexed_seed(seed, "background-source", i as u64));
        queue.push_interrupts(source.vector, times);
    }
    let lines_per_page = (PAGE_SIZE / LINE_BYTES) as usize;
    let region = core.space().workload;
    let buffer = || {
        (0..region.pages)
            .flat_map(|p| (0..lines_per_page as u64).map(move |l| region.page(p).offset(l * LINE_BYTES)))
            .collect::<Vec<_>>()
    };
    if let Some(streamer) = &config.streamer {
        let lines = buffer();
        let id = core.add_workload(&lines, streamer.lines_per_burst)?;
        let source = InterruptSource::poisson(0, streamer.rate_hz);
        for t in source.times(start, end, cpu, seed::sub_seed(seed, &["streamer"])) {
            queue.push(t, EventKind::WorkloadTick(id));
        }
    }
    if let Some(hog) = &config.hog {
        let lines = buffer();
        let id = core.add_workload(&lines, hog.sweep_pages * lines_per_page)?;
        for (tick, (a, b)) in gen_hog_schedule(hog, start, end, cpu, seed::sub_seed(seed, &["hog"])) {
            core.block_attacker(a, b);
            queue.push(tick, EventKind::WorkloadTick(id));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WebsiteProfile {
    pub label: String,
    /// Expected interrupts per 5 ms bin.
    pub bins: Vec<f64>,
    /// Variance of the unit-mean gamma multiplier applied to every bin rate.
    /// Zero makes every trace identical up to event placement.
    pub dispersion: f64,
}

impl WebsiteProfile {
    pub fn validate(&self) -> Result<(), WorkloadError> {
        if self.bins.len() != WEBSITE_BINS {
            return Err(WorkloadError::InvalidProfile(format!(
                "{}: {} bins, expected {WEBSITE_BINS}",
                self.label,
                self.bins.len()
            )));
        }
        if self.bins.iter().any(|m| !(*m >= 0.0 && m.is_finite())) {
            return Err(WorkloadError::InvalidProfile(format!("{}: negative or non-finite mean", self.label)));
        }
        if !(self.dispersion >= 0.0 && self.dispersion.is_finite()) {
            return Err(WorkloadError::InvalidProfile(format!("{}: bad dispersion", self.label)));
        }
        Ok(())
    }
}

/// Network-interrupt times for one page load, relative to the load start.
pub fn gen_website_trace(profile: &WebsiteProfile, cycles_per_us: u64, seed: u64) -> Vec<Cycle> {
    let mut rng = seed::rng(seed);
    let bin_cycles = WEBSITE_BIN_US * cycles_per_us;
    let gamma = (profile.dispersion > 0.0)
        .then(|| Gamma::new(1.0 / profile.dispersion, profile.dispersion).expect("valid gamma"));
    let mut out = Vec::new();
    for (i, &mean) in profile.bins.iter().enumerate() {
        let count = match &gamma {
            None => mean.round() as u64,
            Some(g) => {
                let rate = mean * g.sample(&mut rng);
                if rate > 0.0 {
                    Poisson::new(rate).expect("positive rate").sample(&mut rng) as u64
                } else {
                    0
                }
            }
        };
        let bin_start = i as u64 * bin_cycles;
        let mut times: Vec<u64> = (0..count).map(|_| bin_start + rng.random_range(0..bin_cycles)).collect();
        times.sort_unstable();
        out.extend(times.into_iter().map(Cycle));
    }
    out
}

/// Synthetic profile library.
///
/// Every profile mixes a shared baseline page-load shape with its own seeded
/// random walk; `separability` is the weight of the private walk.
pub fn gen_profile_library(n: usize, separability: f64, dispersion: f64, seed: u64) -> Vec<WebsiteProfile> {
    let baseline = load_shape(seed::sub_seed(seed, &["profiles", "baseline"]));
    (0..n)
        .map(|k| {
            let own = load_shape(seed::indexed_seed(seed, "profile", k as u64));
            let bins = baseline
                .iter()
                .zip(&own)
                .map(|(b, o)| ((1.0 - separability) * b + separability * o).max(0.0))
                .collect();
            WebsiteProfile { label: format!("site{k:02}"), bins, dispersion }
        })
        .collect()
}

/// Mean interrupts per bin of every generated shape, so that libraries
/// differ in shape rather than in overall load.
const SHAPE_MEAN_PER_BIN: f64 = 4.0;

/// A page load: an initial burst that decays, then a dozen resource
/// fetches as bumps at random offsets over a small idle floor, scaled to
/// [`SHAPE_MEAN_PER_BIN`].
fn load_shape(seed: u64) -> Vec<f64> {
    let mut rng = seed::rng(seed);
    let burst_len = rng.random_range(20.0..120.0);
    let burst_height = rng.random_range(4.0..12.0);
    let fetches: Vec<(f64, f64, f64)> = (0..12)
        .map(|_| {
            let center = rng.random_range(0.0..WEBSITE_BINS as f64);
            let width: f64 = rng.random_range(2.0..12.0);
            let height = rng.random_range(2.0..10.0);
            (center, width, height)
        })
        .collect();
    let shape: Vec<f64> = (0..WEBSITE_BINS)
        .map(|i| {
            let x = i as f64;
            let bumps: f64 = fetches.iter().map(|(c, w, h)| h * (-((x - c) / w).powi(2) / 2.0).exp()).sum();
            0.5 + burst_height * (-x / burst_len).exp() + bumps
        })
        .collect();
    let scale = SHAPE_MEAN_PER_BIN * WEBSITE_BINS as f64 / shape.iter().sum::<f64>();
    shape.into_iter().map(|m| m * scale).collect()
}

const PROFILE_HEADER_PREFIX: [&str; 2] = ["label", "dispersion"];

/// Writes profiles as CSV: `label,dispersion,mean0..mean399`.
pub fn write_profiles<W: Write>(profiles: &[WebsiteProfile], out: W) -> Result<(), WorkloadError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = PROFILE_HEADER_PREFIX.iter().map(|s| s.to_string()).collect();
    header.extend((0..WEBSITE_BINS).map(|i| format!("mean{i}")));
    w.write_record(&header)?;
    for p in profiles {
        let mut rec = vec![p.label.clone(), p.dispersion.to_string()];
        rec.extend(p.bins.iter().map(|m| m.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_profiles<R: Read>(input: R) -> Result<Vec<WebsiteProfile>, WorkloadError> {
    let mut rdr = csv::Reader::from_reader(input);
    let header = rdr.headers()?.clone();
    if header.len() != WEBSITE_BINS + 2 || header.get(0) != Some("label") || header.get(1) != Some("dispersion") {
        return Err(WorkloadError::InvalidProfile("bad profile header".into()));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let num = |s: &str| s.parse::<f64>().map_err(|e| WorkloadError::InvalidProfile(format!("{s:?}: {e}")));
        let profile = WebsiteProfile {
            label: rec[0].to_string(),
            dispersion: num(&rec[1])?,
            bins: rec.iter().skip(2).map(num).collect::<Result<_, _>>()?,
        };
        profile.validate()?;
        out.push(profile);
    }
    Ok(out)
}

/// Typing model. Gaps between key presses are log-normal, clamped to
/// `[gap_min_ms, gap_max_ms]`; holds are uniform. The victim's stdin
/// timestamp trails the key-down interrupt by `stdin_latency_us`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KeystrokeTiming {
    pub first_key_ms: f64,
    pub gap_median_ms: f64,
    pub gap_sigma: f64,
    pub gap_min_ms: f64,
    pub gap_max_ms: f64,
    pub hold_min_ms: f64,
    pub hold_max_ms: f64,
    pub stdin_latency_us: f64,
    pub stdin_latency_sd_us: f64,
}

impl Default for KeystrokeTiming {
    fn default() -> Self {
        Self {
            first_key_ms: 50.0,
            gap_median_ms: 160.0,
            gap_sigma: 0.35,
            gap_min_ms: 80.0,
            gap_max_ms: 300.0,
            hold_min_ms: 20.0,
            hold_max_ms: 60.0,
            stdin_latency_us: 325.0,
            stdin_latency_sd_us: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeystrokeScript {
    /// Ground truth: stdin timestamps of each key, strictly increasing.
    pub key_times: Vec<Cycle>,
    /// Key-up trails key-down by a hold in `[hold_min, hold_max]`.
    pub hold_min: Cycle,
    pub hold_max: Cycle,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeystrokeRun {
    pub script: KeystrokeScript,
    /// Key-down and key-up interrupt times, sorted.
    pub interrupts: Vec<Cycle>,
}

pub fn gen_keystrokes(n_keys: usize, timing: &KeystrokeTiming, cycles_per_us: u64, seed: u64) -> KeystrokeRun {
    assert!(n_keys >= 1, "need at least one key");
    assert!(timing.hold_min_ms > 0.0 && timing.hold_max_ms >= timing.hold_min_ms);
    let ms = |v: f64| Cycle::from_us(v * 1e3, cycles_per_us);
    let mut rng = seed::rng(seed);
    let gaps = LogNormal::new(timing.gap_median_ms.ln(), timing.gap_sigma.max(1e-12)).expect("valid lognormal");
    let latency = Normal::new(timing.stdin_latency_us, timing.stdin_latency_sd_us.max(0.0)).expect("valid normal");

    let mut press = ms(timing.first_key_ms);
    let mut key_times = Vec::with_capacity(n_keys);
    let mut interrupts = Vec::with_capacity(2 * n_keys);
    for k in 0..n_keys {
        if k > 0 {
            let gap = gaps.sample(&mut rng).clamp(timing.gap_min_ms, timing.gap_max_ms);
            press = press + ms(gap);
        }
        let hold = if timing.hold_max_ms > timing.hold_min_ms {
            rng.random_range(timing.hold_min_ms..timing.hold_max_ms)
        } else {
            timing.hold_min_ms
        };
        interrupts.push(press);
        interrupts.push(press + ms(hold));
        let lat = latency.sample(&mut rng).max(0.0);
        key_times.push(press + Cycle::from_us(lat, cycles_per_us));
    }
    interrupts.sort_unstable();
    KeystrokeRun {
        script: KeystrokeScript { key_times, hold_min: ms(timing.hold_min_ms), hold_max: ms(timing.hold_max_ms) },
        interrupts,
    }
}

/// Ground truth CSV: `key_index,time_cycles`.
pub fn write_keystroke_truth<W: Write>(script: &KeystrokeScript, out: W) -> Result<(), WorkloadError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["key_index", "time_cycles"])?;
    for (i, t) in script.key_times.iter().enumerate() {
        w.write_record([i.to_string(), t.0.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const CPU: u64 = 3_000;

    fn flat(mean: f64, dispersion: f64) -> WebsiteProfile {
        WebsiteProfile { label: "flat".into(), bins: vec![mean; WEBSITE_BINS], dispersion }
    }

    #[test]
    fn zero_profile_is_empty() {
        assert!(gen_website_trace(&flat(0.0, 0.5), CPU, 1).is_empty());
    }

    #[test]
    fn noiseless_single_bin() {
        let mut p = flat(0.0, 0.0);
        p.bins[7] = 3.0;
        let t = gen_website_trace(&p, CPU, 9);
        assert_eq!(t.len(), 3);
        let bin = WEBSITE_BIN_US * CPU;
        assert!(t.iter().all(|c| c.0 >= 7 * bin && c.0 < 8 * bin));
    }

    #[test]
    fn traces_stay_inside_two_seconds_and_sorted() {
        let lib = gen_profile_library(3, 0.5, 0.8, 4);
        for p in &lib {
            p.validate().unwrap();
            let t = gen_website_trace(p, CPU, 11);
            assert!(t.windows(2).all(|w| w[0] <= w[1]));
            assert!(t.iter().all(|c| c.0 < 2_000_000 * CPU));
        }
    }

    #[test]
    fn generators_are_pure() {
        let lib = gen_profile_library(2, 0.3, 0.5, 77);
        assert_eq!(lib, gen_profile_library(2, 0.3, 0.5, 77));
        assert_eq!(gen_website_trace(&lib[0], CPU, 5), gen_website_trace(&lib[0], CPU, 5));
        let timing = KeystrokeTiming::default();
        assert_eq!(gen_keystrokes(20, &timing, CPU, 3), gen_keystrokes(20, &timing, CPU, 3));
    }

    #[test]
    fn one_key_fixed_hold() {
        let timing = KeystrokeTiming { hold_min_ms: 30.0, hold_max_ms: 30.0, ..Default::default() };
        let run = gen_keystrokes(1, &timing, CPU, 0);
        assert_eq!(run.interrupts.len(), 2);
        assert_eq!(run.interrupts[1] - run.interrupts[0], 30_000 * CPU);
        assert_eq!(run.script.key_times.len(), 1);
    }

    #[test]
    fn two_hundred_keys() {
        let run = gen_keystrokes(200, &KeystrokeTiming::default(), CPU, 8);
        assert_eq!(run.interrupts.len(), 400);
        assert!(run.script.key_times.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn gaps_within_clamp() {
        let timing = KeystrokeTiming { gap_sigma: 1.5, ..Default::default() };
        let run = gen_keystrokes(500, &timing, CPU, 21);
        for w in run.script.key_times.windows(2) {
            let gap_ms = (w[1] - w[0]) as f64 / (CPU as f64 * 1e3);
            assert!((80.0 - 1e-6..=300.0 + 1e-6).contains(&gap_ms), "gap {gap_ms}");
        }
    }

    #[test]
    fn background_presets() {
        let quiet = gen_background(&BackgroundConfig::quiet(), CPU);
        assert_eq!(quiet.len(), 1);
        assert_eq!(quiet[0].vector, 236);

        let realistic = gen_background(&BackgroundConfig::realistic(), CPU);
        let nic = realistic.iter().find(|s| s.vector == 33).expect("nic source");
        assert_eq!(nic.schedule, Schedule::Periodic { period: 2 * 3_000_000_000, offset: 2 * 3_000_000_000 });

        let stress_cfg = BackgroundConfig::stress();
        let stress = gen_background(&stress_cfg, CPU);
        let poisson = stress.iter().filter(|s| matches!(s.schedule, Schedule::Poisson { .. })).count();
        assert_eq!(poisson, stress_cfg.stress_sources.len());
        assert!(poisson >= 2);
    }

    #[test]
    fn source_schedules() {
        let p = InterruptSource::periodic(35, 50_000);
        let t = p.times(Cycle(0), Cycle(500_001), CPU, 0);
        assert_eq!(t.len(), 10);
        assert_eq!(t[0], Cycle(50_000));

        let poisson = InterruptSource::poisson(35, 1_000.0);
        // 1 s at 1 kHz
        let n = poisson.times(Cycle(0), Cycle(3_000_000_000), CPU, 4).len();
        assert!((900..1100).contains(&n), "{n}");

        assert!(InterruptSource::periodic(1, 0).validate().is_err());
        assert!(InterruptSource::poisson(1, 0.0).validate().is_err());
        let unsorted = InterruptSource { vector: 1, schedule: Schedule::TraceDriven { times: vec![5, 3] } };
        assert!(unsorted.validate().is_err());
    }

    #[test]
    fn profile_csv_round_trip() {
        let lib = gen_profile_library(2, 0.4, 0.25, 3);
        let mut buf = Vec::new();
        write_profiles(&lib, &mut buf).unwrap();
        assert_eq!(read_profiles(buf.as_slice()).unwrap(), lib);
    }

    #[test]
    fn hog_slices() {
        let hog = HogConfig { period_us: 4_000.0, slice_us: 300.0, sweep_pages: 16 };
        let s = gen_hog_schedule(&hog, Cycle(0), Cycle(12_000 * CPU), CPU, 1);
        assert_eq!(s.len(), 3);
        for (tick, (a, b)) in &s {
            assert_eq!(*tick, *b);
            assert_eq!(*b - *a, 300 * CPU);
        }
    }
}
