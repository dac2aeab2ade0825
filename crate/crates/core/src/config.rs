//! Study configuration: a flat `key = value` text format with strict
//! unknown-key rejection. Omitted keys fall back to the defaults listed in
//! the README schema table; `StudyConfig::default()` is the shipped study.

use crate::coeffs::{CoefficientSet, DriftSpec, InitialSpec, SigmaFamily, SigmaSpec};
use crate::dyadic::DyadicDomain;
use crate::error::{Error, Result};
use crate::grid::SpaceTimeGrid;
use crate::sm::{SmKind, Weight};
use crate::solver::SolveSettings;

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub sm_kind_tag: String,
    pub sm_weight: Weight,
    pub sm_hurst: f64,
    pub sm_alpha: f64,
    pub sm_intensity: f64,
    pub domain_j_min: i32,
    pub domain_j_max: i32,
    pub sigma_family: SigmaFamily,
    pub sigma_beta: f64,
    pub drift: DriftSpec,
    pub initial: InitialSpec,
    pub grid_radius: u32,
    pub grid_depth: u32,
    pub horizon: f64,
    pub time_steps: usize,
    pub epsilons: Vec<f64>,
    pub replications: usize,
    pub base_seed: u64,
    pub picard_tol: f64,
    pub picard_max_iter: usize,
    pub kernel_c_dx: f64,
    pub kernel_lambda_dx: f64,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            sm_kind_tag: "wiener".into(),
            sm_weight: Weight::Gauss,
            sm_hurst: 0.75,
            sm_alpha: 1.5,
            sm_intensity: 8.0,
            domain_j_min: -8,
            domain_j_max: 8,
            sigma_family: SigmaFamily::ShiftedCos,
            sigma_beta: 0.75,
            drift: DriftSpec::BoundedFraction,
            initial: InitialSpec::Gaussian,
            grid_radius: 4,
            grid_depth: 8,
            horizon: 1.0,
            time_steps: 64,
            epsilons: vec![0.25, 0.0625, 0.015625, 0.00390625, 0.0009765625],
            replications: 16,
            base_seed: 20260809,
            picard_tol: 1e-8,
            picard_max_iter: 50,
            kernel_c_dx: crate::kernel::SHIPPED_C_DX,
            kernel_lambda_dx: crate::kernel::SHIPPED_LAMBDA_DX,
        }
    }
}

impl StudyConfig {
    pub fn sm_kind(&self) -> Result<SmKind> {
        let kind = match self.sm_kind_tag.as_str() {
            "wiener" => SmKind::Wiener {
                weight: self.sm_weight,
            },
            "fbm" => SmKind::Fbm {
                hurst: self.sm_hurst,
                weight: self.sm_weight,
            },
            "alpha_stable" => SmKind::AlphaStable {
                alpha: self.sm_alpha,
                weight: self.sm_weight,
            },
            "pure_jump" => SmKind::PureJump {
                intensity: self.sm_intensity,
            },
            other => {
                return Err(Error::Config(format!("unknown sm kind '{other}'")));
            }
        };
        kind.validate()?;
        Ok(kind)
    }

    pub fn domain(&self) -> Result<DyadicDomain> {
        DyadicDomain::new(self.domain_j_min, self.domain_j_max, self.grid_depth)
    }

    pub fn grid(&self) -> Result<SpaceTimeGrid> {
        SpaceTimeGrid::new(
            self.grid_radius,
            self.grid_depth,
            self.horizon,
            self.time_steps,
        )
    }

    pub fn sigma(&self) -> Result<SigmaSpec> {
        SigmaSpec::new(self.sigma_family, self.sigma_beta)
    }

    pub fn coefficients(&self) -> Result<CoefficientSet> {
        Ok(CoefficientSet {
            sigma: self.sigma()?,
            drift: self.drift,
            initial: self.initial,
        })
    }

    pub fn solve_settings(&self) -> SolveSettings {
        SolveSettings {
            tol: self.picard_tol,
            max_iter: self.picard_max_iter,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.sm_kind()?;
        let domain = self.domain()?;
        let grid = self.grid()?;
        grid.check_alignment(&domain)?;
        self.sigma()?;
        if self.epsilons.is_empty() {
            return Err(Error::Config("epsilon list must not be empty".into()));
        }
        for w in self.epsilons.windows(2) {
            if w[1] >= w[0] {
                return Err(Error::Config(
                    "epsilon list must be strictly decreasing".into(),
                ));
            }
        }
        if self.epsilons.iter().any(|&e| !(e > 0.0 && e <= 1.0)) {
            return Err(Error::Config("epsilons must lie in (0, 1]".into()));
        }
        if self.replications == 0 {
            return Err(Error::Config("need at least one replication".into()));
        }
        if !(self.picard_tol > 0.0) || self.picard_max_iter == 0 {
            return Err(Error::Config("bad fixed-point settings".into()));
        }
        if !(self.kernel_c_dx > 0.0) || !(self.kernel_lambda_dx > 0.0) {
            return Err(Error::Config(
                "kernel envelope constants must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Canonical key = value listing (the manifest's config echo).
    pub fn echo(&self) -> String {
        let eps = self
            .epsilons
            .iter()
            .map(|e| format!("{e:.16e}"))
            .collect::<Vec<_>>()
            .join(",");
        let weight = match self.sm_weight {
            Weight::Zero => "zero",
            Weight::One => "one",
            Weight::Gauss => "gauss",
        };
        format!(
            "sm.kind = {}\nsm.weight = {}\nsm.hurst = {:.16e}\nsm.alpha = {:.16e}\nsm.intensity = {:.16e}\n\
             domain.j_min = {}\ndomain.j_max = {}\n\
             sigma.family = {}\nsigma.beta = {:.16e}\n\
             drift.kind = {}\ninitial.kind = {}\n\
             grid.radius = {}\ngrid.depth = {}\ngrid.horizon = {:.16e}\ngrid.steps = {}\n\
             study.epsilons = {}\nstudy.replications = {}\nstudy.seed = {}\n\
             picard.tol = {:.16e}\npicard.max_iter = {}\n\
             kernel.c_dx = {:.16e}\nkernel.lambda_dx = {:.16e}",
            self.sm_kind_tag,
            weight,
            self.sm_hurst,
            self.sm_alpha,
            self.sm_intensity,
            self.domain_j_min,
            self.domain_j_max,
            self.sigma_family.tag(),
            self.sigma_beta,
            self.drift.tag(),
            self.initial.tag(),
            self.grid_radius,
            self.grid_depth,
            self.horizon,
            self.time_steps,
            eps,
            self.replications,
            self.base_seed,
            self.picard_tol,
            self.picard_max_iter,
            self.kernel_c_dx,
            self.kernel_lambda_dx
        )
    }

    /// Parses the flat key-value format; unknown keys are rejected.
    pub fn parse(text: &str) -> Result<StudyConfig> {
        let mut cfg = StudyConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected 'key = value'", lineno + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            let bad =
                |what: &str| Error::Config(format!("line {}: bad {what} '{value}'", lineno + 1));
            match key {
                "sm.kind" => cfg.sm_kind_tag = value.to_string(),
                "sm.weight" => {
                    cfg.sm_weight = match value {
                        "zero" => Weight::Zero,
                        "one" => Weight::One,
                        "gauss" => Weight::Gauss,
                        _ => return Err(bad("weight")),
                    }
                }
                "sm.hurst" => cfg.sm_hurst = value.parse().map_err(|_| bad("float"))?,
                "sm.alpha" => cfg.sm_alpha = value.parse().map_err(|_| bad("float"))?,
                "sm.intensity" => cfg.sm_intensity = value.parse().map_err(|_| bad("float"))?,
                "domain.j_min" => cfg.domain_j_min = value.parse().map_err(|_| bad("integer"))?,
                "domain.j_max" => cfg.domain_j_max = value.parse().map_err(|_| bad("integer"))?,
                "sigma.family" => cfg.sigma_family = SigmaFamily::from_tag(value)?,
                "sigma.beta" => cfg.sigma_beta = value.parse().map_err(|_| bad("float"))?,
                "drift.kind" => cfg.drift = DriftSpec::from_tag(value)?,
                "initial.kind" => cfg.initial = InitialSpec::from_tag(value)?,
                "grid.radius" => cfg.grid_radius = value.parse().map_err(|_| bad("integer"))?,
                "grid.depth" => cfg.grid_depth = value.parse().map_err(|_| bad("integer"))?,
                "grid.horizon" => cfg.horizon = value.parse().map_err(|_| bad("float"))?,
                "grid.steps" => cfg.time_steps = value.parse().map_err(|_| bad("integer"))?,
                "study.epsilons" => {
                    cfg.epsilons = value
                        .split(',')
                        .map(|s| s.trim().parse::<f64>().map_err(|_| bad("epsilon list")))
                        .collect::<Result<Vec<f64>>>()?;
                }
                "study.replications" => {
                    cfg.replications = value.parse().map_err(|_| bad("integer"))?
                }
                "study.seed" => cfg.base_seed = value.parse().map_err(|_| bad("integer"))?,
                "picard.tol" => cfg.picard_tol = value.parse().map_err(|_| bad("float"))?,
                "picard.max_iter" => {
                    cfg.picard_max_iter = value.parse().map_err(|_| bad("integer"))?
                }
                "kernel.c_dx" => cfg.kernel_c_dx = value.parse().map_err(|_| bad("float"))?,
                "kernel.lambda_dx" => {
                    cfg.kernel_lambda_dx = value.parse().map_err(|_| bad("float"))?
                }
                other => {
                    return Err(Error::Config(format!(
                        "line {}: unknown key '{other}'",
                        lineno + 1
                    )));
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
