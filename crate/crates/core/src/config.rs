//! Run configuration shared by every command.
//!
//! Values come from defaults, then an optional TOML file, then command-line
//! overrides. The result is validated before any work starts and embedded in
//! every output header as one `#config {json}` line.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::batch_sparse::GStorage;
use crate::error::{Error, Result};
use crate::flow_model::{FieldKind, FlowField, GroupingMode};
use crate::io::Format;
use crate::partitioner::{partition, PartitionMode, Stage};
use crate::pipeline::FitOptions;
use crate::spline_kernel::{BlendParams, FifthElement};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(rename = "M")]
    pub m: usize,
    /// Samples per trajectory. When absent it is derived from `N` as `3N + 1`.
    #[serde(rename = "S")]
    pub s: Option<usize>,
    #[serde(rename = "N")]
    pub n: Option<usize>,
    #[serde(rename = "V")]
    pub v: usize,
    pub p: usize,
    pub alpha: f64,
    pub beta: f64,
    pub unnormalized: bool,
    pub convention: FifthElement,
    pub raw: bool,
    pub storage: GStorage,
    pub grouping: GroupingMode,
    pub partition: PartitionMode,
    pub field: FieldKind,
    pub speed: f64,
    pub radius: f64,
    pub axial_speed: f64,
    pub height: f64,
    pub width: f64,
    pub spacing: f64,
    pub jitter: f64,
    /// Coarse sample interval (sec).
    pub dt: f64,
    /// For the vortex, overrides `dt` so one revolution spans this many
    /// coarse samples.
    pub samples_per_rev: Option<usize>,
    /// Ground-truth sample interval; defaults to `dt / 100`.
    pub fine_dt: Option<f64>,
    pub seed: u64,
    pub format: Format,
    pub stage: Stage,
    pub m_list: Vec<usize>,
    pub p_list: Vec<usize>,
    pub repeats: usize,
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            m: 4,
            s: None,
            n: None,
            v: 10,
            p: 1,
            alpha: 0.5,
            beta: 0.5,
            unnormalized: false,
            convention: FifthElement::default(),
            raw: false,
            storage: GStorage::default(),
            grouping: GroupingMode::default(),
            partition: PartitionMode::default(),
            field: FieldKind::Uniform,
            speed: 1.0,
            radius: 1.0,
            axial_speed: 0.0,
            height: 1.0,
            width: 2.0,
            spacing: 1.0,
            jitter: 0.0,
            dt: 0.1,
            samples_per_rev: None,
            fine_dt: None,
            seed: 0,
            format: Format::Csv,
            stage: Stage::Eval,
            m_list: vec![2048, 4096],
            p_list: vec![1, 2, 4],
            repeats: 3,
            input: None,
            output: None,
        }
    }
}

/// Which command a configuration is checked against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Gen,
    Fit,
    Eval,
    Pipeline,
    Bench,
    Compare,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let line = e.span().map_or(0, |s| {
                text[..s.start.min(text.len())].matches('\n').count() + 1
            });
            Error::parse(line, e.message().to_string())
        })
    }

    pub fn from_toml_file(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    /// Sample count, from `S` or `3N + 1`.
    pub fn samples(&self) -> Result<usize> {
        match (self.s, self.n) {
            (Some(s), None) => Ok(s),
            (None, Some(n)) => Ok(3 * n + 1),
            (None, None) => Ok(7),
            (Some(s), Some(n)) if s == 3 * n + 1 => Ok(s),
            (Some(s), Some(n)) => Err(Error::invalid(format!(
                "S={s} and N={n} disagree (S must be 3N+1)"
            ))),
        }
    }

    pub fn flow_field(&self) -> FlowField {
        let mut f = FlowField::with_kind(self.field, self.speed);
        f.radius = self.radius;
        f.axial_speed = self.axial_speed;
        f.height = self.height;
        f.width = self.width;
        f.spacing = self.spacing;
        f.jitter = self.jitter;
        f.seed = self.seed;
        f
    }

    /// The coarse interval actually used for generation.
    pub fn coarse_dt(&self) -> f64 {
        match (self.field, self.samples_per_rev) {
            (FieldKind::Vortex, Some(k)) if k > 0 => {
                let period = 2.0 * std::f64::consts::PI / self.flow_field().angular_speed();
                period / k as f64
            }
            _ => self.dt,
        }
    }

    pub fn fine_dt(&self) -> f64 {
        self.fine_dt.unwrap_or(self.coarse_dt() / 100.0)
    }

    pub fn blend(&self) -> Result<BlendParams> {
        if self.unnormalized {
            BlendParams::unnormalized(self.alpha, self.beta)
        } else {
            BlendParams::new(self.alpha, self.beta)
        }
    }

    pub fn fit_options(&self) -> Result<FitOptions> {
        Ok(FitOptions {
            convention: self.convention,
            blend: self.blend()?,
            raw: self.raw,
            storage: self.storage,
            grouping: self.grouping,
        })
    }

    /// Check everything `cmd` depends on. Returns the first violation.
    pub fn validate(&self, cmd: Command) -> Result<()> {
        self.fit_options()?;
        if self.v == 0 {
            return Err(Error::invalid("V must be at least 1"));
        }
        if matches!(
            cmd,
            Command::Gen | Command::Pipeline | Command::Compare | Command::Bench
        ) {
            if self.m == 0 {
                return Err(Error::invalid("M must be at least 1"));
            }
            let s = self.samples()?;
            if s < 4 {
                return Err(Error::shape(format!("S={s} is below one group of four")));
            }
            if self.grouping == GroupingMode::Strict && (s - 1) % 3 != 0 {
                return Err(Error::shape(format!(
                    "S={s} is not of the form 3N+1 (S-1 mod 3 = {})",
                    (s - 1) % 3
                )));
            }
            let dt = self.coarse_dt();
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::invalid(format!("dt must be positive, got {dt}")));
            }
            self.flow_field().validate()?;
        }
        if matches!(cmd, Command::Fit | Command::Eval | Command::Pipeline) {
            if self.p == 0 {
                return Err(Error::invalid("p must be at least 1"));
            }
            if cmd == Command::Pipeline {
                partition(self.m, self.p, self.partition)?;
            }
        }
        if cmd == Command::Compare {
            let fine = self.fine_dt();
            if !(fine > 0.0 && fine <= self.coarse_dt()) {
                return Err(Error::invalid(format!(
                    "fine_dt must be in (0, dt], got {fine}"
                )));
            }
        }
        if cmd == Command::Bench {
            if self.m_list.is_empty() || self.p_list.is_empty() {
                return Err(Error::invalid("bench needs non-empty M and p lists"));
            }
            if self.repeats == 0 {
                return Err(Error::invalid("repeats must be at least 1"));
            }
            for &m in &self.m_list {
                for &p in &self.p_list {
                    partition(m, p, self.partition)?;
                }
            }
        }
        Ok(())
    }

    /// Single-line JSON form used in output headers.
    pub fn header_line(&self) -> String {
        format!(
            "config {}",
            serde_json::to_string(self).expect("config is always serializable")
        )
    }
}
