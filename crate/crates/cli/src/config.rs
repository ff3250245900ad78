//! Experiment configuration: a TOML document whose every table rejects unknown keys.

use std::f64::consts::PI;
use std::path::PathBuf;
use std::sync::Arc;

use fracblow_core::barriers::{BarrierConfig, BoundaryFn, OperatorSpec};
use fracblow_core::field::{Affine, BallProfile, ConstantField, DistPow, Gaussian, HalfspaceLinearProfile, HalfspacePower, Indicator};
use fracblow_core::kernels::normalizing_constant;
use fracblow_core::solver::{ProblemData, SolveConfig, SolverOperator};
use fracblow_core::{Anisotropy, Domain, EllipticityBounds, Error, FieldRef, Kernel, KernelFamily, Point, QuadratureConfig};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Order of the operators.
    pub s: f64,
    pub seed: u64,
    pub domain: DomainSpec,
    pub kernel: KernelSpec,
    pub operator: OperatorChoice,
    pub data: DataSpec,
    /// Field evaluated by `eval` and used as the subject of `profile` and `rates` when
    /// `analysis.subject = "field"`.
    pub field: Option<FieldSpec>,
    pub solver: SolveConfig,
    pub quadrature: QuadratureConfig,
    pub barriers: BarrierConfig,
    pub analysis: AnalysisSpec,
    pub output: OutputSpec,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            s: 0.5,
            seed: 0,
            domain: DomainSpec::default(),
            kernel: KernelSpec::default(),
            operator: OperatorChoice::default(),
            data: DataSpec::default(),
            field: None,
            solver: SolveConfig::default(),
            quadrature: QuadratureConfig::default(),
            barriers: BarrierConfig::default(),
            analysis: AnalysisSpec::default(),
            output: OutputSpec::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainSpec {
    Ball {
        dim: usize,
        #[serde(default)]
        center: Option<Vec<f64>>,
        #[serde(default = "one")]
        radius: f64,
    },
    Superellipse {
        dim: usize,
        #[serde(default)]
        center: Option<Vec<f64>>,
        semi_axes: Vec<f64>,
        exponent: f64,
    },
    HalfSpace {
        dim: usize,
        normal: Vec<f64>,
        #[serde(default)]
        offset: f64,
        half_width: f64,
    },
}

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

impl Default for DomainSpec {
    fn default() -> Self {
        DomainSpec::Ball {
            dim: 2,
            center: None,
            radius: 1.0,
        }
    }
}

fn point(name: &'static str, c: &[f64], dim: usize) -> Result<Point<f64>, CliError> {
    if c.len() != dim {
        return Err(CliError::Config(format!("`{name}` has {} coordinates, expected {dim}", c.len())));
    }
    Ok(Point::from_f64(c))
}

impl DomainSpec {
    pub fn dim(&self) -> usize {
        match self {
            DomainSpec::Ball { dim, .. } | DomainSpec::Superellipse { dim, .. } | DomainSpec::HalfSpace { dim, .. } => *dim,
        }
    }

    pub fn build(&self) -> Result<Domain<f64>, CliError> {
        let dim = self.dim();
        if !(1..=3).contains(&dim) {
            return Err(CliError::Config(format!("domain.dim = {dim} must be 1, 2 or 3")));
        }
        let center = |c: &Option<Vec<f64>>| c.as_ref().map_or(Ok(Point::zero()), |c| point("domain.center", c, dim));
        Ok(match self {
            DomainSpec::Ball { center: c, radius, .. } => Domain::ball(dim, center(c)?, *radius)?,
            DomainSpec::Superellipse {
                center: c,
                semi_axes,
                exponent,
                ..
            } => Domain::superellipse(dim, center(c)?, point("domain.semi_axes", semi_axes, dim)?, *exponent)?,
            DomainSpec::HalfSpace {
                normal,
                offset,
                half_width,
                ..
            } => Domain::half_space(dim, point("domain.normal", normal, dim)?, *offset, *half_width)?,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelSpec {
    /// `C_{N,s} |z|^{-N-2s}` times `scale`, or without the constant when `normalized = false`.
    Isotropic {
        #[serde(default = "one")]
        scale: f64,
        #[serde(default = "yes")]
        normalized: bool,
    },
    /// Piecewise constant in the polar angle (dimension two); `breaks` start at 0.
    Sectors {
        breaks: Vec<f64>,
        values: Vec<f64>,
        #[serde(default = "yes")]
        normalized: bool,
    },
    /// Piecewise constant in `|q_N|` (dimension three).
    Zonal {
        edges: Vec<f64>,
        values: Vec<f64>,
        #[serde(default = "yes")]
        normalized: bool,
    },
}

impl Default for KernelSpec {
    fn default() -> Self {
        KernelSpec::Isotropic {
            scale: 1.0,
            normalized: true,
        }
    }
}

impl KernelSpec {
    pub fn anisotropy(&self) -> Result<Anisotropy<f64>, CliError> {
        Ok(match self {
            KernelSpec::Isotropic { scale, .. } => Anisotropy::constant(*scale),
            KernelSpec::Sectors { breaks, values, .. } => Anisotropy::sectors_full_circle(breaks, values)?,
            KernelSpec::Zonal { edges, values, .. } => Anisotropy::zonal(edges.clone(), values.clone())?,
        })
    }

    pub fn build(&self, dim: usize, s: f64) -> Result<Kernel<f64>, CliError> {
        let normalized = match self {
            KernelSpec::Isotropic { normalized, .. } | KernelSpec::Sectors { normalized, .. } | KernelSpec::Zonal { normalized, .. } => *normalized,
        };
        Ok(Kernel::new(dim, s, self.anisotropy()?, normalized)?)
    }
}

/// Which operator `eval`, `solve` and `verify-barriers` use.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
#[derive(Default)]
pub enum OperatorChoice {
    /// The configured kernel.
    #[default]
    Linear,
    /// Extremal operators over kernels with anisotropy in `[gamma, big_gamma]`, given as
    /// multiples of `C_{N,s}` unless `relative = false`.
    PucciPlus {
        gamma: f64,
        big_gamma: f64,
        #[serde(default = "yes")]
        relative: bool,
    },
    PucciMinus {
        gamma: f64,
        big_gamma: f64,
        #[serde(default = "yes")]
        relative: bool,
    },
    /// `inf_i sup_j` over the configured kernel scaled by `scales[i][j]`.
    Isaacs {
        scales: Vec<Vec<f64>>,
        gamma: f64,
        big_gamma: f64,
        #[serde(default = "yes")]
        relative: bool,
    },
}


pub enum BuiltOperator {
    Linear(Kernel<f64>),
    Pucci { bounds: EllipticityBounds<f64>, plus: bool },
    Isaacs(KernelFamily<f64>),
}

fn bounds(dim: usize, s: f64, gamma: f64, big_gamma: f64, relative: bool) -> Result<EllipticityBounds<f64>, CliError> {
    let c = if relative { normalizing_constant(dim, s)? } else { 1.0 };
    Ok(EllipticityBounds::new(c * gamma, c * big_gamma)?)
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.s > 0.0 && self.s < 1.0) {
            return Err(CliError::Config(format!("s = {} must lie in (0, 1)", self.s)));
        }
        self.solver.validate()?;
        self.quadrature.validate()?;
        self.barriers.validate()?;
        self.domain.build()?;
        self.operator()?;
        if let Some(f) = &self.field {
            f.build(&self.domain.build()?)?;
        }
        self.problem_data()?;
        Ok(())
    }

    pub fn kernel(&self) -> Result<Kernel<f64>, CliError> {
        self.kernel.build(self.domain.dim(), self.s)
    }

    pub fn operator(&self) -> Result<BuiltOperator, CliError> {
        let dim = self.domain.dim();
        let s = self.s;
        Ok(match &self.operator {
            OperatorChoice::Linear => BuiltOperator::Linear(self.kernel()?),
            OperatorChoice::PucciPlus { gamma, big_gamma, relative } => BuiltOperator::Pucci {
                bounds: bounds(dim, s, *gamma, *big_gamma, *relative)?,
                plus: true,
            },
            OperatorChoice::PucciMinus { gamma, big_gamma, relative } => BuiltOperator::Pucci {
                bounds: bounds(dim, s, *gamma, *big_gamma, *relative)?,
                plus: false,
            },
            OperatorChoice::Isaacs {
                scales,
                gamma,
                big_gamma,
                relative,
            } => {
                let k = self.kernel()?;
                let members = scales.iter().map(|row| row.iter().map(|c| k.scaled(*c)).collect()).collect();
                BuiltOperator::Isaacs(KernelFamily::new(members, bounds(dim, s, *gamma, *big_gamma, *relative)?)?)
            }
        })
    }

    pub fn solver_operator(&self) -> Result<SolverOperator, CliError> {
        let dim = self.domain.dim();
        Ok(match self.operator()? {
            BuiltOperator::Linear(k) => SolverOperator::Linear(k),
            BuiltOperator::Pucci { bounds, plus: true } => SolverOperator::PucciPlus { bounds, order: self.s, dim },
            BuiltOperator::Pucci { bounds, plus: false } => SolverOperator::PucciMinus { bounds, order: self.s, dim },
            BuiltOperator::Isaacs(f) => SolverOperator::Isaacs(f),
        })
    }

    /// The barrier operator: the configured family, or the maximal operator of the
    /// configured bounds.
    pub fn barrier_operator(&self) -> Result<OperatorSpec<f64>, CliError> {
        Ok(match self.operator()? {
            BuiltOperator::Linear(k) => {
                let c = k.normalizer();
                let (lo, hi) = self.barriers.pucci_bounds;
                OperatorSpec::Family(KernelFamily::singleton(k, EllipticityBounds::new(lo * c, hi * c)?)?)
            }
            BuiltOperator::Pucci { bounds, .. } => OperatorSpec::Pucci { bounds, order: self.s },
            BuiltOperator::Isaacs(f) => OperatorSpec::Family(f),
        })
    }

    pub fn problem_data(&self) -> Result<ProblemData, CliError> {
        let dom = self.domain.build()?;
        let mut data = ProblemData::new(self.data.h.build(dom.dim())?);
        if let Some(f) = &self.data.f {
            data = data.with_f(f.build(&dom)?);
        }
        if let Some(g) = &self.data.g {
            data = data.with_g(g.build(&dom)?);
        }
        Ok(data)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSpec {
    /// Renormalized boundary trace `h`.
    pub h: TraceSpec,
    /// Right-hand side.
    pub f: Option<FieldSpec>,
    /// Exterior datum.
    pub g: Option<FieldSpec>,
}

impl Default for DataSpec {
    fn default() -> Self {
        DataSpec {
            h: TraceSpec::Constant { value: 1.0 },
            f: None,
            g: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TraceSpec {
    Constant {
        value: f64,
    },
    /// `slope . y + offset`.
    Linear {
        slope: Vec<f64>,
        #[serde(default)]
        offset: f64,
    },
    /// `mean + sum_k cos[k] cos((k+1) theta) + sin[k] sin((k+1) theta)` in the polar angle
    /// of the first two coordinates.
    Fourier {
        mean: f64,
        #[serde(default)]
        cos: Vec<f64>,
        #[serde(default)]
        sin: Vec<f64>,
    },
}

impl TraceSpec {
    pub fn build(&self, dim: usize) -> Result<BoundaryFn<f64>, CliError> {
        Ok(match self.clone() {
            TraceSpec::Constant { value } => Arc::new(move |_: &Point<f64>| value),
            TraceSpec::Linear { slope, offset } => {
                let p = point("data.h.slope", &slope, dim)?;
                Arc::new(move |y: &Point<f64>| p.dot(y) + offset)
            }
            TraceSpec::Fourier { mean, cos, sin } => {
                if dim < 2 && !(cos.is_empty() && sin.is_empty()) {
                    return Err(CliError::Config("Fourier traces need dimension at least 2".into()));
                }
                Arc::new(move |y: &Point<f64>| {
                    let t = y[1].atan2(y[0]);
                    let a: f64 = cos.iter().enumerate().map(|(k, c)| c * ((k + 1) as f64 * t).cos()).sum();
                    let b: f64 = sin.iter().enumerate().map(|(k, c)| c * ((k + 1) as f64 * t).sin()).sum();
                    mean + a + b
                })
            }
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    Constant {
        value: f64,
    },
    Affine {
        slope: Vec<f64>,
        #[serde(default)]
        offset: f64,
    },
    Gaussian {
        center: Vec<f64>,
        sigma: f64,
        #[serde(default = "one")]
        amplitude: f64,
    },
    /// `(R^2 - |x - c|^2)_+^exponent` on the configured ball.
    BallProfile {
        exponent: f64,
    },
    /// `d(x)^tau` on the configured domain.
    DistPow {
        tau: f64,
    },
    /// `(x_N)_+^tau`.
    HalfspacePower {
        tau: f64,
    },
    /// `(p' . x') (x_N)_+^{s-1}`.
    HalfspaceLinear {
        slope: Vec<f64>,
        s: f64,
    },
    /// Indicator of the configured domain.
    Indicator,
}

impl FieldSpec {
    pub fn build(&self, dom: &Domain<f64>) -> Result<FieldRef<f64>, CliError> {
        let dim = dom.dim();
        Ok(match self {
            FieldSpec::Constant { value } => Arc::new(ConstantField { dim, value: *value }),
            FieldSpec::Affine { slope, offset } => Arc::new(Affine {
                dim,
                slope: point("field.slope", slope, dim)?,
                offset: *offset,
            }),
            FieldSpec::Gaussian { center, sigma, amplitude } => {
                if !(*sigma > 0.0) {
                    return Err(CliError::Config("gaussian sigma must be positive".into()));
                }
                Arc::new(Gaussian {
                    dim,
                    center: point("field.center", center, dim)?,
                    sigma: *sigma,
                    amplitude: *amplitude,
                })
            }
            FieldSpec::BallProfile { exponent } => {
                if !matches!(dom.shape(), fracblow_core::Shape::Ball { .. }) {
                    return Err(CliError::Config("ball_profile needs a ball domain".into()));
                }
                Arc::new(BallProfile {
                    domain: dom.clone(),
                    exponent: *exponent,
                })
            }
            FieldSpec::DistPow { tau } => Arc::new(DistPow {
                domain: dom.clone(),
                tau: *tau,
            }),
            FieldSpec::HalfspacePower { tau } => Arc::new(HalfspacePower { dim, tau: *tau }),
            FieldSpec::HalfspaceLinear { slope, s } => {
                if slope.len() + 1 != dim {
                    return Err(CliError::Config(format!("field.slope needs {} coordinates", dim.saturating_sub(1))));
                }
                Arc::new(HalfspaceLinearProfile {
                    dim,
                    slope: Point::from_f64(slope),
                    s: *s,
                })
            }
            FieldSpec::Indicator => Arc::new(Indicator { domain: dom.clone() }),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subject {
    /// Solve the configured problem and analyse the discrete solution.
    Solver,
    /// Analyse the `[field]` table directly.
    Field,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisSpec {
    pub subject: Subject,
    /// Evaluation points; defaults to `n_points` quasi-random interior points.
    pub points: Option<Vec<Vec<f64>>>,
    pub n_points: usize,
    pub n_rays: usize,
    /// Profile distances, strictly decreasing; defaults to six values from `inradius/2.5`
    /// down to the layer width.
    pub distances: Option<Vec<f64>>,
    /// Gradient fit band; defaults to `[2 delta, inradius/4]`.
    pub band: Option<[f64; 2]>,
    pub per_ray: usize,
    /// Reference solution for `solve` errors and the layer-shrinking table.
    pub reference: Option<FieldSpec>,
    /// Layer widths for the shrinking sequence reported by `solve`; empty to skip it.
    pub shrink_deltas: Vec<f64>,
    pub tau: f64,
    pub alpha: f64,
    /// Polar angles of the centre of `|x - x0|^alpha` and of the approach point (dimension two);
    /// other dimensions use opposite boundary samples.
    pub lemma_angles: Option<[f64; 2]>,
    pub lemma_distances: Vec<f64>,
    pub orders: Vec<f64>,
    pub sphere_order: usize,
    pub halfspace_slope: Vec<f64>,
    /// Lower and upper ellipticity multiples of `C_{N,s}` for `check-lemma`'s indicator pass.
    pub indicator_bounds: [f64; 2],
}

impl Default for AnalysisSpec {
    fn default() -> Self {
        AnalysisSpec {
            subject: Subject::Solver,
            points: None,
            n_points: 20,
            n_rays: 16,
            distances: None,
            band: None,
            per_ray: 6,
            reference: None,
            shrink_deltas: Vec::new(),
            tau: 0.3,
            alpha: 0.4,
            lemma_angles: None,
            lemma_distances: vec![0.08, 0.04, 0.02, 0.01, 0.005, 0.0025],
            orders: vec![0.9, 0.95, 0.99],
            sphere_order: 8,
            halfspace_slope: vec![1.0],
            indicator_bounds: [0.5, 2.0],
        }
    }
}

impl AnalysisSpec {
    pub fn points(&self, dom: &Domain<f64>) -> Result<Vec<Point<f64>>, CliError> {
        match &self.points {
            Some(p) => p.iter().map(|c| point("analysis.points", c, dom.dim())).collect(),
            None => Ok(dom.interior_points(self.n_points, dom.inradius() / 20.0)),
        }
    }

    pub fn lemma_points(&self, dom: &Domain<f64>) -> Result<(Point<f64>, Point<f64>), CliError> {
        match (self.lemma_angles, dom.dim()) {
            (Some([a, b]), 2) => {
                let on = |t: f64| -> Result<Point<f64>, CliError> {
                    let far = Point::from_f64(&[t.cos(), t.sin()]) * (10.0 * dom.diameter());
                    Ok(dom.project(&far)?)
                };
                Ok((on(a)?, on(b)?))
            }
            (Some(_), _) => Err(CliError::Config("analysis.lemma_angles needs dimension 2".into())),
            (None, 2) => {
                let on = |t: f64| dom.project(&(Point::from_f64(&[t.cos(), t.sin()]) * (10.0 * dom.diameter())));
                Ok((on(PI)?, on(0.0)?))
            }
            (None, _) => {
                let b = dom.boundary_samples(2);
                if b.len() < 2 {
                    return Err(CliError::Config("the domain has fewer than two boundary samples".into()));
                }
                Ok((b[1], b[0]))
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    pub dir: PathBuf,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec {
            dir: PathBuf::from("fracblow-out"),
        }
    }
}

/// Parses `key.path=value`; the value is read as a TOML literal, or as a string when that fails.
pub fn apply_override(doc: &mut toml::Table, entry: &str) -> Result<(), CliError> {
    let (path, raw) = entry
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override `{entry}` is not of the form key=value")))?;
    let value: toml::Value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let keys: Vec<&str> = path.trim().split('.').collect();
    let mut table = doc;
    for k in &keys[..keys.len() - 1] {
        let slot = table.entry(k.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = slot
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("override `{entry}`: `{k}` is not a table")))?;
    }
    table.insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}

pub fn load(text: &str, overrides: &[String]) -> Result<ExperimentConfig, CliError> {
    let cfg: ExperimentConfig = if overrides.is_empty() {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?
    } else {
        with_overrides(text, overrides)?
    };
    cfg.validate()?;
    Ok(cfg)
}

fn with_overrides(text: &str, overrides: &[String]) -> Result<ExperimentConfig, CliError> {
    let mut doc: toml::Table = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    for o in overrides {
        apply_override(&mut doc, o)?;
    }
    toml::Value::Table(doc).try_into().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}
