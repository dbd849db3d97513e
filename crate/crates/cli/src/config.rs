//! JSON run configuration and its translation into core objects.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use kpp_core::analysis::{AttractorOptions, FrontOptions, FrontProfile};
use kpp_core::dispersal::NeighborRate;
use kpp_core::spectral::{EigenOptions, SpeedOptions};
use kpp_core::{
    build_domain, Coefficient, DispersalSpec, Domain, DomainSpec, Field, IntegratorSpec, KernelSpec, KppError,
    LatticeRates, Model, ParametricKpp, Perturbation, ReactionSpec,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub domain: DomainSpec,
    pub dispersal: DispersalBlock,
    pub reaction: ReactionBlock,
    #[serde(default)]
    pub integrator: IntegratorSpec,
    #[serde(default)]
    pub experiment: ExperimentBlock,
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
}

fn default_record_every() -> usize {
    100
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DispersalBlock {
    Random,
    Nonlocal {
        kernel: Option<KernelSpec>,
        /// Two-column `radius,value` file, relative to the config file.
        kernel_csv: Option<PathBuf>,
    },
    Discrete {
        rates: Option<Vec<NeighborRate>>,
        /// Symmetric rate to every unit neighbour when `rates` is absent.
        rate: Option<f64>,
    },
}

fn one() -> Coefficient {
    Coefficient::constant(1.0)
}

fn unit_period() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReactionBlock {
    #[serde(default = "one")]
    pub r0: Coefficient,
    #[serde(default = "one")]
    pub b: Coefficient,
    /// CSV of cell values for `r0`, one row per time slab; overrides `r0`.
    pub r0_table: Option<PathBuf>,
    #[serde(default)]
    pub perturbation: Option<Perturbation>,
    #[serde(default = "unit_period")]
    pub period: f64,
    /// Spatial periods of the medium; the domain periods when absent.
    pub spatial_periods: Option<Vec<f64>>,
    pub m0: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialData {
    Constant { value: f64 },
    /// Front-like data along `xi`.
    Front {
        profile: FrontProfile,
        offset: f64,
        height: f64,
    },
    /// `height` on `|x| <= radius`, zero elsewhere.
    Patch { radius: f64, height: f64 },
    /// A field CSV written by `simulate`.
    Csv { path: PathBuf },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StartSpec {
    /// The constant `factor * M0 + offset`.
    Constant {
        #[serde(default = "unit_period")]
        factor: f64,
        #[serde(default)]
        offset: f64,
    },
    /// Independent uniform values in `[lo, hi]` drawn from the run seed.
    Seeded { lo: f64, hi: f64 },
}

fn default_starts() -> Vec<StartSpec> {
    vec![
        StartSpec::Constant {
            factor: 1.0,
            offset: 1.0,
        },
        StartSpec::Constant {
            factor: 2.0,
            offset: 0.0,
        },
        StartSpec::Constant {
            factor: 5.0,
            offset: 0.0,
        },
        StartSpec::Seeded { lo: 0.1, hi: 2.0 },
    ]
}

/// Front tracking attached to `speed` or to a consistency check.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrontBlock {
    pub t_end: f64,
    pub profile: FrontProfile,
    /// Start of the front along `xi`.
    pub offset: f64,
    /// Level and initial height; half the reference attractor minimum when absent.
    pub level: Option<f64>,
    pub options: FrontOptions,
}

impl Default for FrontBlock {
    fn default() -> Self {
        FrontBlock {
            t_end: 150.0,
            profile: FrontProfile::Psi0,
            offset: -350.0,
            level: None,
            options: FrontOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "snake_case", deny_unknown_fields)]
pub enum CheckSpec {
    Liouville,
    Tail,
    /// Fitted front speed against the variational speed.
    SpeedConsistency {
        #[serde(default = "default_rel_tol")]
        rel_tol: f64,
    },
    /// Cone check from the configured initial data.
    Spreading {
        c_low: f64,
        c_high: f64,
        t_end: f64,
        #[serde(default = "default_outer_tol")]
        outer_tol: f64,
        #[serde(default = "default_inner_tol")]
        inner_tol: f64,
        /// A negative control: failure of the check is the expected outcome.
        #[serde(default)]
        expect_fail: bool,
    },
    /// Randomized ordered pairs under the configured model.
    Comparison {
        pairs: usize,
        t_end: f64,
    },
    /// Part metric along two solutions from seeded positive data.
    Decay {
        n_periods: usize,
        #[serde(default = "default_sigma")]
        sigma: f64,
    },
}

fn default_rel_tol() -> f64 {
    0.05
}

fn default_outer_tol() -> f64 {
    1e-3
}

fn default_inner_tol() -> f64 {
    1e-2
}

fn default_sigma() -> f64 {
    1e-6
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentBlock {
    pub t_end: f64,
    pub initial: InitialData,
    pub xi: Vec<f64>,
    /// Tilt used by `eigen`.
    pub mu: f64,
    pub eigen: EigenOptions,
    pub speed: SpeedOptions,
    pub front: Option<FrontBlock>,
    pub attractor: AttractorOptions,
    pub starts: Vec<StartSpec>,
    pub radii: Vec<f64>,
    pub tail_tol: f64,
    pub checks: Vec<CheckSpec>,
}

impl Default for ExperimentBlock {
    fn default() -> Self {
        ExperimentBlock {
            t_end: 10.0,
            initial: InitialData::Constant { value: 0.5 },
            xi: vec![1.0],
            mu: 0.0,
            eigen: EigenOptions::default(),
            speed: SpeedOptions::default(),
            front: None,
            attractor: AttractorOptions::default(),
            starts: default_starts(),
            radii: vec![2.0, 5.0, 10.0, 20.0, 40.0],
            tail_tol: 1e-2,
            checks: Vec::new(),
        }
    }
}

/// A validated configuration with every core object built.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub config: RunConfig,
    pub domain: Arc<Domain>,
    pub dispersal: DispersalSpec,
    pub reaction: ReactionSpec,
    pub base_dir: PathBuf,
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn read_table(path: &Path, domain: &Domain) -> Result<Coefficient, KppError> {
    let text = fs::read_to_string(path).map_err(|e| KppError::Config {
        field: "reaction.r0_table".into(),
        message: format!("{}: {e}", path.display()),
    })?;
    let mut slabs = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| KppError::Config {
                field: "reaction.r0_table".into(),
                message: format!("line {}: {e}", n + 1),
            })?;
        slabs.push(row);
    }
    Coefficient::table(domain.cell().clone(), slabs)
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<(RunConfig, PathBuf), KppError> {
        let text = fs::read_to_string(path).map_err(|e| KppError::Io(format!("{}: {e}", path.display())))?;
        let config: RunConfig = serde_json::from_str(&text).map_err(|e| KppError::Config {
            field: "config".into(),
            message: e.to_string(),
        })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((config, base))
    }

    /// Builds domain, dispersal and reaction, checking cross-block consistency.
    pub fn prepare(self, base_dir: &Path) -> Result<Prepared, KppError> {
        let domain = Arc::new(build_domain(&self.domain)?);
        let dispersal = match &self.dispersal {
            DispersalBlock::Random => DispersalSpec::Random,
            DispersalBlock::Nonlocal { kernel, kernel_csv } => {
                let kernel = match (kernel, kernel_csv) {
                    (Some(k), None) => k.clone(),
                    (None, Some(p)) => KernelSpec::from_csv(resolve(base_dir, p))?,
                    _ => {
                        return Err(KppError::Config {
                            field: "dispersal.kernel".into(),
                            message: "give exactly one of `kernel` and `kernel_csv`".into(),
                        })
                    }
                };
                DispersalSpec::Nonlocal { kernel }
            }
            DispersalBlock::Discrete { rates, rate } => {
                let rates = match rates {
                    Some(r) => LatticeRates { rates: r.clone() },
                    None => LatticeRates::symmetric(self.domain.dim, rate.unwrap_or(1.0)),
                };
                DispersalSpec::Discrete { rates }
            }
        };
        dispersal.check_lattice(domain.is_lattice())?;
        let rb = &self.reaction;
        let r0 = match &rb.r0_table {
            Some(p) => read_table(&resolve(base_dir, p), &domain)?,
            None => rb.r0.clone(),
        };
        let kpp = ParametricKpp {
            r0,
            b: rb.b.clone(),
            perturbation: rb.perturbation.clone().unwrap_or(Perturbation::None),
        };
        let spatial = rb.spatial_periods.clone().unwrap_or_else(|| self.domain.periods.clone());
        let mut reaction = ReactionSpec::kpp(kpp, rb.period, &spatial)?;
        if let Some(m0) = rb.m0 {
            if m0 < reaction.m0() {
                return Err(KppError::Config {
                    field: "reaction.m0".into(),
                    message: format!("declared M0 = {m0} is below the KPP bound {}", reaction.m0()),
                });
            }
            reaction = reaction.with_m0(m0);
        }
        if self.experiment.xi.len() != self.domain.dim {
            return Err(KppError::Config {
                field: "experiment.xi".into(),
                message: format!("direction has {} components, domain has dim {}", self.experiment.xi.len(), self.domain.dim),
            });
        }
        Ok(Prepared {
            config: self,
            domain,
            dispersal,
            reaction,
            base_dir: base_dir.to_path_buf(),
        })
    }
}

impl Prepared {
    pub fn model(&self) -> Result<Model, KppError> {
        Model::new(&self.domain, &self.dispersal, self.reaction.clone(), self.config.integrator)
    }

    pub fn xi(&self) -> [f64; 2] {
        let x = &self.config.experiment.xi;
        [x[0], x.get(1).copied().unwrap_or(0.0)]
    }

    pub fn initial(&self) -> Result<Field, KppError> {
        let d = self.domain.clone();
        match &self.config.experiment.initial {
            InitialData::Constant { value } => Field::new(d.clone(), vec![*value; d.len()], 0.0),
            InitialData::Front {
                profile,
                offset,
                height,
            } => kpp_core::analysis::make_front_profile(&d, self.xi(), *profile, *offset, *height),
            InitialData::Patch { radius, height } => Field::from_fn(d, |x| {
                if kpp_core::domain::norm(x) <= *radius {
                    *height
                } else {
                    0.0
                }
            }),
            InitialData::Csv { path } => {
                let file = fs::File::open(resolve(&self.base_dir, path))?;
                let u = kpp_core::io::read_field(std::io::BufReader::new(file))?;
                if **u.domain() != *d {
                    return Err(KppError::Config {
                        field: "experiment.initial.path".into(),
                        message: "field file was written on another domain".into(),
                    });
                }
                Ok(u)
            }
        }
    }

    /// Starting fields for the uniqueness check.
    pub fn starts(&self) -> Result<Vec<Field>, KppError> {
        let m0 = self.reaction.m0();
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        self.config
            .experiment
            .starts
            .iter()
            .map(|s| match *s {
                StartSpec::Constant { factor, offset } => Ok(Field::constant(self.domain.clone(), factor * m0 + offset)),
                StartSpec::Seeded { lo, hi } => {
                    if !(lo > 0.0 && hi > lo) {
                        return Err(KppError::Config {
                            field: "experiment.starts".into(),
                            message: "seeded start needs 0 < lo < hi".into(),
                        });
                    }
                    let values = (0..self.domain.len()).map(|_| rng.gen_range(lo..hi)).collect();
                    Field::new(self.domain.clone(), values, 0.0)
                }
            })
            .collect()
    }
}
