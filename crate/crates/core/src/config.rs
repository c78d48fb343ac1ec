//! Simulator and experiment configuration.
//!
//! Configs are TOML: machine keys at the top level, cost table under `[costs]`,
//! and one optional section per experiment. Every field has a default, so an
//! empty file is a valid config. 64-bit addresses may be written as integers
//! or as `"0x..."` strings (TOML integers are signed and cannot hold kernel
//! addresses).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mem_model::ContentTag;
use crate::workloads::BackgroundConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parsing config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

pub const DEFAULT_IDT_BASE: u64 = 0xffff_fe00_0000_0000;

/// One contiguous run of kernel pages that stays mapped in the user view.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelRange {
    pub name: String,
    #[serde(with = "hex_u64")]
    pub start: u64,
    pub pages: u64,
    pub tag: ContentTag,
}

/// Cycle costs charged by the core and the attacker programs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostTable {
    /// One full oracle iteration: flush, transient read, encode, reload.
    pub probe_cost: u64,
    /// Two passes over an eviction set.
    pub evict_cost: u64,
    /// Interrupt entry, handler body and return.
    pub isr_cost: u64,
    pub hit_latency: u64,
    pub miss_latency: u64,
    /// Core time consumed by one background workload tick.
    pub tick_cost: u64,
    /// Delay from the end of an ISR to its deferred tail (bottom half).
    pub tail_delay: u64,
    pub tail_cost: u64,
}

impl Default for CostTable {
    fn default() -> Self {
        Self {
            probe_cost: 2_000,
            evict_cost: 1_500,
            isr_cost: 4_000,
            hit_latency: 5,
            miss_latency: 200,
            tick_cost: 100,
            tail_delay: 1_000,
            tail_cost: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    #[serde(with = "hex_u64")]
    pub idt_base: u64,
    pub phys_mem_bytes: u64,
    pub mtrr_budget: usize,
    pub kernel_ranges: Vec<KernelRange>,
    /// Kernel-only pages holding data the attacker must never see.
    pub secret_pages: u64,
    /// Kernel text pages holding ISR bodies.
    pub kernel_text_pages: u64,
    pub user_heap_pages: u64,
    /// Victim process memory swept by background workloads.
    pub workload_pages: u64,
    pub l1d_sets: usize,
    pub l1d_ways: usize,
    pub cycles_per_us: u64,
    /// Probability that a transient read of a resident line leaks nothing.
    pub noise_p: f64,
    pub costs: CostTable,
    pub distinguish: DistinguishParams,
    pub curve: CurveParams,
    pub compare: CompareParams,
    pub template: TemplateParams,
    pub fingerprint: FingerprintParams,
    pub keystrokes: KeystrokeParams,
    pub mitigate: MitigateParams,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            idt_base: DEFAULT_IDT_BASE,
            phys_mem_bytes: 1 << 30,
            mtrr_budget: 8,
            kernel_ranges: default_kernel_ranges(DEFAULT_IDT_BASE),
            secret_pages: 4,
            kernel_text_pages: 64,
            user_heap_pages: 64,
            workload_pages: 32,
            l1d_sets: 64,
            l1d_ways: 8,
            cycles_per_us: 3_000,
            noise_p: 0.004,
            costs: CostTable::default(),
            distinguish: DistinguishParams::default(),
            curve: CurveParams::default(),
            compare: CompareParams::default(),
            template: TemplateParams::default(),
            fingerprint: FingerprintParams::default(),
            keystrokes: KeystrokeParams::default(),
            mitigate: MitigateParams::default(),
        }
    }
}

/// The three kernel ranges KPTI leaves in the user view: the descriptor
/// tables (IDT first), the entry trampolines, and four direct-map pages.
pub fn default_kernel_ranges(idt_base: u64) -> Vec<KernelRange> {
    vec![
        KernelRange { name: "descriptor_tables".into(), start: idt_base, pages: 2, tag: ContentTag::DescriptorTable },
        KernelRange {
            name: "kernel_entry".into(),
            start: 0xffff_ffff_81e0_0000,
            pages: 8,
            tag: ContentTag::KernelEntry,
        },
        KernelRange { name: "direct_map".into(), start: 0xffff_8880_0010_0000, pages: 4, tag: ContentTag::DirectMap },
    ]
}

impl SimConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: SimConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |msg: String| Err(ConfigError::Invalid(msg));
        if !(0.0..=1.0).contains(&self.noise_p) {
            return invalid(format!("noise_p {} outside [0, 1]", self.noise_p));
        }
        if self.cycles_per_us == 0 {
            return invalid("cycles_per_us must be positive".into());
        }
        if self.l1d_ways == 0 || !self.l1d_ways.is_power_of_two() || self.l1d_ways > 64 {
            return invalid(format!("l1d_ways {} must be a power of two <= 64", self.l1d_ways));
        }
        if self.l1d_sets == 0 || !self.l1d_sets.is_power_of_two() || self.l1d_sets > 64 {
            return invalid(format!(
                "l1d_sets {} must be a power of two <= 64 (virtually indexed within a page)",
                self.l1d_sets
            ));
        }
        if self.costs.probe_cost == 0 || self.costs.isr_cost == 0 {
            return invalid("probe_cost and isr_cost must be positive".into());
        }
        Ok(())
    }

    /// Converts microseconds to cycles.
    pub fn us(&self, micros: f64) -> u64 {
        (micros * self.cycles_per_us as f64).round() as u64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DistinguishParams {
    pub trials: u64,
    pub vector: u8,
}

impl Default for DistinguishParams {
    fn default() -> Self {
        Self { trials: 100_000, vector: 35 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurveParams {
    pub spacings: Vec<u64>,
    pub n_interrupts: u64,
    pub vector: u8,
}

impl Default for CurveParams {
    fn default() -> Self {
        Self {
            spacings: vec![
                1_000, 2_500, 5_000, 7_500, 10_000, 15_000, 20_000, 25_000, 30_000, 40_000, 50_000, 75_000, 100_000,
            ],
            n_interrupts: 10_000,
            vector: 35,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareParams {
    pub victim_accesses: u64,
    /// Mean cycles between two victim accesses.
    pub victim_period: u64,
    /// Uniform jitter added to every victim period.
    pub victim_jitter: u64,
    pub vector: u8,
    /// Matching window for scoring detections against victim accesses.
    pub match_window: u64,
    pub background: BackgroundConfig,
}

impl Default for CompareParams {
    fn default() -> Self {
        Self {
            victim_accesses: 50_000,
            victim_period: 10_000,
            victim_jitter: 2_000,
            vector: 35,
            match_window: 10_000,
            background: BackgroundConfig::streaming(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TemplateParams {
    /// Independent templating runs, each with its own seed.
    pub runs: u64,
    pub induced_vector: u8,
    pub induced_rate_hz: f64,
    pub window_us: u64,
    pub background: BackgroundConfig,
}

impl Default for TemplateParams {
    fn default() -> Self {
        Self {
            runs: 100,
            induced_vector: 35,
            induced_rate_hz: 1_000.0,
            window_us: 100_000,
            background: BackgroundConfig::quiet(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FingerprintParams {
    pub profiles: usize,
    pub traces_per_profile: usize,
    pub train_fraction: f64,
    /// How far each profile departs from the shared baseline shape, in [0, 1].
    pub separability: f64,
    pub dispersion: f64,
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub nic_vector: u8,
    pub background: BackgroundConfig,
    /// Optional profile library file; synthetic profiles are generated when absent.
    pub profile_library: Option<PathBuf>,
}

impl Default for FingerprintParams {
    fn default() -> Self {
        Self {
            profiles: 15,
            traces_per_profile: 100,
            train_fraction: 0.7,
            separability: 0.3,
            dispersion: 0.3,
            n_trees: 100,
            max_depth: None,
            nic_vector: 34,
            background: BackgroundConfig::quiet(),
            profile_library: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KeystrokeParams {
    pub runs: u64,
    pub keys: usize,
    pub xhci_vector: u8,
    pub timing: crate::workloads::KeystrokeTiming,
    pub match_window_us: f64,
    pub lab: KeystrokeScenario,
    pub realistic: KeystrokeScenario,
}

/// Where the victim types: the background sharing the xHCI core, and how
/// long the victim's reader takes to see a key on stdin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KeystrokeScenario {
    pub background: BackgroundConfig,
    pub stdin_latency_us: f64,
    pub stdin_latency_sd_us: f64,
}

impl Default for KeystrokeScenario {
    fn default() -> Self {
        Self::lab()
    }
}

impl KeystrokeScenario {
    pub fn lab() -> Self {
        Self { background: BackgroundConfig::quiet(), stdin_latency_us: 325.0, stdin_latency_sd_us: 33.0 }
    }

    /// Loaded machine: the reader is scheduled later.
    pub fn realistic() -> Self {
        Self { background: BackgroundConfig::stress(), stdin_latency_us: 565.0, stdin_latency_sd_us: 55.0 }
    }
}

impl Default for KeystrokeParams {
    fn default() -> Self {
        Self {
            runs: 3,
            keys: 200,
            xhci_vector: 35,
            timing: crate::workloads::KeystrokeTiming::default(),
            match_window_us: 2_000.0,
            lab: KeystrokeScenario::lab(),
            realistic: KeystrokeScenario::realistic(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MitigateParams {
    pub n_interrupts: u64,
    pub spacing: u64,
    pub vector: u8,
}

impl Default for MitigateParams {
    fn default() -> Self {
        Self { n_interrupts: 10_000, spacing: 50_000, vector: 35 }
    }
}

/// Accepts `0x...` strings or plain integers; always writes hex strings.
pub(crate) mod hex_u64 {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(value: &u64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{value:#x}"))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(u64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(v) => Ok(v),
            Raw::Str(s) => parse(&s).map_err(de::Error::custom),
        }
    }

    pub fn parse(s: &str) -> Result<u64, String> {
        let t = s.trim().replace('_', "");
        let parsed = match t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")) {
            Some(hex) => u64::from_str_radix(hex, 16),
            None => t.parse::<u64>(),
        };
        parsed.map_err(|e| format!("bad address {s:?}: {e}"))
    }
}
