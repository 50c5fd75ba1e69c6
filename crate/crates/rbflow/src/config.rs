//! JSON run configuration: schema-validated, unknown keys rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{profiles, signals, BoundaryData, PhysicalParams, SpatialProfile, TimeSignal};
use crate::greedy::IndexMode;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshBlock {
    /// Channel length, cm.
    pub length: f64,
    /// Channel height, cm.
    pub height: f64,
    pub nx: usize,
    pub ny: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsBlock {
    pub rho_f: f64,
    pub rho_s: f64,
    pub mu: f64,
    pub h_s: f64,
    pub lambda_s: f64,
    pub mu_s: f64,
}

/// Named waveform for a boundary signal.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub struct WaveformSpec {
    pub kind: WaveformKind,
    pub amplitude: f64,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum WaveformKind {
    Constant,
    /// `a sin(2 pi t / T)`; zero at t = 0.
    Sine,
    /// `a (1 + sin(2 pi t / T) / 2)`; positive pulsatile.
    OffsetSine,
    /// `a (1 - cos(2 pi t / T)) / 2`; positive pulsatile, zero at t = 0.
    Pulse,
}

impl WaveformSpec {
    pub fn signal(&self, period: f64) -> TimeSignal {
        let a = self.amplitude;
        match self.kind {
            WaveformKind::Constant => signals::constant(a),
            WaveformKind::Sine => signals::sine(a, period),
            WaveformKind::OffsetSine => signals::offset_sine(a, period),
            WaveformKind::Pulse => Box::new(move |t| {
                0.5 * a * (1.0 - (2.0 * std::f64::consts::PI * t / period).cos())
            }),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalsBlock {
    pub sigma1: WaveformSpec,
    pub sigma2: WaveformSpec,
    /// Common period of both signals, s.
    pub period: f64,
    /// Peak of the parabolic inlet profile, cm/s.
    pub inlet_peak: f64,
    /// Outlet traction magnitude (applied as a mean-pressure condition).
    pub outlet_traction: f64,
    /// Inlet perturbation amplitude for the high-fidelity run.
    #[serde(default)]
    pub alpha: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeBlock {
    /// Time step, s.
    pub dt: f64,
    /// Recorded steps per run.
    pub n_steps: usize,
    /// Snapshot sampling stride.
    pub stride: usize,
    #[serde(default = "default_warmup")]
    pub warmup_periods: usize,
}

fn default_warmup() -> usize {
    1
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PodBlock {
    /// Energy tolerance of the truncation.
    pub tol: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GreedyBlock {
    pub n_max_triplets: usize,
    pub alpha_train: f64,
    #[serde(default = "default_index_mode")]
    pub index_mode: IndexMode,
    #[serde(default)]
    pub residual_floor: f64,
}

fn default_index_mode() -> IndexMode {
    IndexMode::SingleRun
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsBlock {
    pub workspace: PathBuf,
}

/// Whole-run configuration; one JSON file drives every command.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mesh: MeshBlock,
    pub physics: PhysicsBlock,
    pub signals: SignalsBlock,
    pub time: TimeBlock,
    pub pod: PodBlock,
    #[serde(default)]
    pub greedy: Option<GreedyBlock>,
    pub paths: PathsBlock,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let bytes = std::fs::read(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg: RunConfig = serde_json::from_slice(&bytes)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.mesh.length > 0.0) || !(self.mesh.height > 0.0) {
            return err("mesh dimensions must be positive");
        }
        if self.mesh.nx < 2 || self.mesh.ny < 2 {
            return err("mesh cell counts must be at least 2");
        }
        self.physical_params().validate().map_err(|e| {
            Error::Config(format!("physics block: {e}"))
        })?;
        if !(self.signals.period > 0.0) {
            return err("signal period must be positive");
        }
        if self.time.n_steps < 1 || self.time.stride < 1 {
            return err("time.n_steps and time.stride must be at least 1");
        }
        if self.time.n_steps % self.time.stride != 0 {
            return err("time.stride must divide time.n_steps");
        }
        if !(0.0..1.0).contains(&self.pod.tol) {
            return err("pod.tol must lie in [0, 1)");
        }
        if !(0.0..=crate::affine::ALPHA_MAX).contains(&self.signals.alpha) {
            return err("signals.alpha must lie in [0, 0.2]");
        }
        if let Some(g) = &self.greedy {
            crate::greedy::EnrichmentConfig {
                n_max_triplets: g.n_max_triplets,
                alpha_train: g.alpha_train,
                index_mode: g.index_mode,
                residual_floor: g.residual_floor,
            }
            .validate()
            .map_err(|e| Error::Config(format!("greedy block: {e}")))?;
        }
        Ok(())
    }

    pub fn physical_params(&self) -> PhysicalParams {
        PhysicalParams {
            rho_f: self.physics.rho_f,
            rho_s: self.physics.rho_s,
            mu: self.physics.mu,
            h_s: self.physics.h_s,
            lambda_s: self.physics.lambda_s,
            mu_s: self.physics.mu_s,
            dt: self.time.dt,
        }
    }

    /// Boundary data assembled from the signal blocks: parabolic inlet,
    /// uniform mean-pressure outlet traction.
    pub fn boundary_data(&self) -> BoundaryData {
        let inlet: SpatialProfile = profiles::poiseuille(self.mesh.height, self.signals.inlet_peak);
        let outlet: SpatialProfile = profiles::uniform([-self.signals.outlet_traction, 0.0]);
        BoundaryData {
            g_d_profile: inlet,
            sigma1: self.signals.sigma1.signal(self.signals.period),
            g_n_profile: outlet,
            sigma2: self.signals.sigma2.signal(self.signals.period),
            period: self.signals.period,
        }
    }

    pub fn greedy_config(&self) -> Result<crate::greedy::EnrichmentConfig> {
        let g = self
            .greedy
            .as_ref()
            .ok_or_else(|| Error::Config("greedy block missing from configuration".into()))?;
        Ok(crate::greedy::EnrichmentConfig {
            n_max_triplets: g.n_max_triplets,
            alpha_train: g.alpha_train,
            index_mode: g.index_mode,
            residual_floor: g.residual_floor,
        })
    }

    /// Desk-scale default: a 5 x 1 channel at blood-like parameters, one
    /// 0.8 s period of 400 steps sampled every 5.
    pub fn desk_default(workspace: PathBuf) -> RunConfig {
        RunConfig {
            mesh: MeshBlock {
                length: 5.0,
                height: 1.0,
                nx: 20,
                ny: 6,
            },
            physics: PhysicsBlock {
                rho_f: 1.06,
                rho_s: 1.1,
                mu: 0.035,
                h_s: 0.05,
                lambda_s: 1e6,
                mu_s: 1e6,
            },
            signals: SignalsBlock {
                sigma1: WaveformSpec {
                    kind: WaveformKind::Pulse,
                    amplitude: 1.0,
                },
                sigma2: WaveformSpec {
                    kind: WaveformKind::OffsetSine,
                    amplitude: 1.0,
                },
                period: 0.8,
                inlet_peak: 5.0,
                outlet_traction: 10.0,
                alpha: 0.0,
            },
            time: TimeBlock {
                dt: 0.002,
                n_steps: 400,
                stride: 5,
                warmup_periods: 1,
            },
            pod: PodBlock { tol: 1e-4 },
            greedy: Some(GreedyBlock {
                n_max_triplets: 4,
                alpha_train: 0.2,
                index_mode: IndexMode::SingleRun,
                residual_floor: 0.0,
            }),
            paths: PathsBlock { workspace },
        }
    }
}
