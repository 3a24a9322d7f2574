//! Domain types shared by every solver: growth profiles, the boundary
//! operator at `x = 0`, initial data and the full problem specification.
//!
//! All types are immutable once built and can be shared freely between
//! concurrent solver runs.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};

/// Relative tolerance for the discrete boundary compatibility of `u0`.
pub const TOL_BC: f64 = 1e-8;

fn default_ramp() -> f64 {
    1.0
}

/// The closed family of evaluable growth profiles `m(x)`, `x >= 0`.
///
/// Serialized as a tagged union keyed by `"kind"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProfileKind {
    Constant {
        c: f64,
    },
    /// Linear interpolation between `[x, m(x)]` knots, held constant outside
    /// the knot range.
    PiecewiseLinear {
        knots: Vec<[f64; 2]>,
    },
    /// Level `rho` on each favourable interval `[x_n, y_n]`, `background <= 0`
    /// elsewhere, joined by linear ramps of width `ramp`.
    Patchy {
        rho: f64,
        intervals: Vec<[f64; 2]>,
        background: f64,
        #[serde(default = "default_ramp")]
        ramp: f64,
    },
    /// `rho * x^gamma` on each window `[x_n, k x_n]`, `background` elsewhere,
    /// joined by linear ramps of width `ramp`.
    AlgebraicFloor {
        rho: f64,
        gamma: f64,
        k: f64,
        anchors: Vec<f64>,
        background: f64,
        #[serde(default = "default_ramp")]
        ramp: f64,
    },
    /// Piecewise-linear core followed by the oscillating tail
    /// `x^gamma * (m1 + m2)/2 + x^gamma * (m2 - m1)/2 * sin(2 pi (x - x_c) / period)`,
    /// blended linearly over one period after the last core knot `x_c`.
    TailPrescribed {
        gamma: f64,
        m1: f64,
        m2: f64,
        period: f64,
        core: Vec<[f64; 2]>,
    },
}

/// A growth rate `m(x)` with certified bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProfileKind", into = "ProfileKind")]
pub struct GrowthProfile {
    kind: ProfileKind,
    sup_bound: f64,
    inf_bound: f64,
    witness: Option<f64>,
}

impl From<GrowthProfile> for ProfileKind {
    fn from(p: GrowthProfile) -> Self {
        p.kind
    }
}

impl TryFrom<ProfileKind> for GrowthProfile {
    type Error = Error;
    fn try_from(kind: ProfileKind) -> Result<Self> {
        GrowthProfile::new(kind)
    }
}

fn check_knots(knots: &[[f64; 2]], what: &str) -> Result<()> {
    if knots.is_empty() {
        return Err(Error::InvalidProfile(format!("{what}: no knots")));
    }
    if knots.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidProfile(format!("{what}: non-finite knot")));
    }
    if knots[0][0] < 0.0 {
        return Err(Error::InvalidProfile(format!("{what}: knot abscissa below zero")));
    }
    if knots.windows(2).any(|w| w[1][0] <= w[0][0]) {
        return Err(Error::InvalidProfile(format!("{what}: knots must be strictly increasing in x")));
    }
    Ok(())
}

fn interpolate_knots(knots: &[[f64; 2]], x: f64) -> f64 {
    let first = knots[0];
    let last = knots[knots.len() - 1];
    if x <= first[0] {
        return first[1];
    }
    if x >= last[0] {
        return last[1];
    }
    let i = knots.partition_point(|k| k[0] <= x);
    let (a, b) = (knots[i - 1], knots[i]);
    let s = (x - a[0]) / (b[0] - a[0]);
    a[1] + s * (b[1] - a[1])
}

/// Plateau value `top(x)` on `[lo, hi]` with linear ramps of width `ramp`
/// down to `background`.
fn ramped(x: f64, lo: f64, hi: f64, ramp: f64, background: f64, top: impl Fn(f64) -> f64) -> f64 {
    if x >= lo && x <= hi {
        return top(x);
    }
    let (dist, edge) = if x < lo { (lo - x, top(lo)) } else { (x - hi, top(hi)) };
    if dist >= ramp {
        background
    } else {
        background + (edge - background) * (1.0 - dist / ramp)
    }
}

impl GrowthProfile {
    pub fn new(kind: ProfileKind) -> Result<Self> {
        let bad = |msg: &str| Err(Error::InvalidProfile(msg.to_string()));
        let (sup_bound, inf_bound, witness) = match &kind {
            ProfileKind::Constant { c } => {
                if !c.is_finite() {
                    return bad("constant must be finite");
                }
                (*c, *c, (*c > 0.0).then_some(1.0))
            }
            ProfileKind::PiecewiseLinear { knots } => {
                check_knots(knots, "piecewise_linear")?;
                let sup = knots.iter().map(|k| k[1]).fold(f64::NEG_INFINITY, f64::max);
                let inf = knots.iter().map(|k| k[1]).fold(f64::INFINITY, f64::min);
                // Knot at zero is not inside (0, inf); nudge the witness inward.
                let witness = knots.iter().find(|k| k[1] == sup && sup > 0.0).map(|k| {
                    if k[0] > 0.0 {
                        k[0]
                    } else {
                        let next = knots.get(1).map_or(1.0, |n| n[0]);
                        let x = 1e-3 * next.max(1e-3);
                        if interpolate_knots(knots, x) > 0.0 {
                            x
                        } else {
                            k[0]
                        }
                    }
                });
                (sup, inf, witness.filter(|&x| interpolate_knots(knots, x) > 0.0 && x > 0.0))
            }
            ProfileKind::Patchy { rho, intervals, background, ramp } => {
                if !(rho.is_finite() && *rho > 0.0) {
                    return bad("patchy: rho must be positive");
                }
                if !(background.is_finite() && *background <= 0.0) {
                    return bad("patchy: background level must be <= 0");
                }
                if !(ramp.is_finite() && *ramp > 0.0) {
                    return bad("patchy: ramp width must be positive");
                }
                if intervals.is_empty() || intervals.iter().any(|iv| !(iv[0] >= 0.0 && iv[1] > iv[0] && iv[1].is_finite())) {
                    return bad("patchy: intervals must satisfy 0 <= x_n < y_n");
                }
                let w = 0.5 * (intervals[0][0] + intervals[0][1]);
                (*rho, *background, Some(w))
            }
            ProfileKind::AlgebraicFloor { rho, gamma, k, anchors, background, ramp } => {
                if !(rho.is_finite() && *rho > 0.0) {
                    return bad("algebraic_floor: rho must be positive");
                }
                if !(*gamma > -2.0 && *gamma <= 0.0) {
                    return bad("algebraic_floor: gamma must lie in (-2, 0]");
                }
                if !(k.is_finite() && *k > 1.0) {
                    return bad("algebraic_floor: interval factor k must exceed 1");
                }
                if !(background.is_finite() && *background <= 0.0) {
                    return bad("algebraic_floor: background level must be <= 0");
                }
                if !(ramp.is_finite() && *ramp > 0.0) {
                    return bad("algebraic_floor: ramp width must be positive");
                }
                if anchors.is_empty() || anchors.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
                    return bad("algebraic_floor: anchors must be positive");
                }
                let smallest = anchors.iter().copied().fold(f64::INFINITY, f64::min);
                (rho * smallest.powf(*gamma), *background, Some(anchors[0]))
            }
            ProfileKind::TailPrescribed { gamma, m1, m2, period, core } => {
                check_knots(core, "tail_prescribed core")?;
                if !(*gamma > -2.0 && *gamma <= 0.0) {
                    return bad("tail_prescribed: gamma must lie in (-2, 0]");
                }
                if !(m1.is_finite() && m2.is_finite() && *m1 > 0.0 && m2 >= m1) {
                    return bad("tail_prescribed: need 0 < m1 <= m2");
                }
                if !(period.is_finite() && *period > 0.0) {
                    return bad("tail_prescribed: period must be positive");
                }
                let x_c = core[core.len() - 1][0];
                if *gamma < 0.0 && x_c <= 0.0 {
                    return bad("tail_prescribed: a decaying tail needs the core to end at x > 0");
                }
                let core_sup = core.iter().map(|k| k[1]).fold(f64::NEG_INFINITY, f64::max);
                let core_inf = core.iter().map(|k| k[1]).fold(f64::INFINITY, f64::min);
                let tail_sup = m2 * if *gamma < 0.0 { x_c.powf(*gamma) } else { 1.0 };
                let tail_inf = if *gamma < 0.0 { 0.0 } else { *m1 };
                // sin = 1 one quarter period into the pure tail.
                let witness = x_c + 1.25 * period;
                (core_sup.max(tail_sup), core_inf.min(tail_inf), Some(witness))
            }
        };
        let mut profile = Self { kind, sup_bound, inf_bound, witness };
        if let Some(w) = profile.witness {
            if profile.eval(w) <= 0.0 {
                profile.witness = None;
            }
        }
        Ok(profile)
    }

    pub fn constant(c: f64) -> Self {
        Self::new(ProfileKind::Constant { c }).expect("finite constant")
    }

    pub fn piecewise_linear(knots: Vec<[f64; 2]>) -> Result<Self> {
        Self::new(ProfileKind::PiecewiseLinear { knots })
    }

    pub fn kind(&self) -> &ProfileKind {
        &self.kind
    }

    pub fn sup_bound(&self) -> f64 {
        self.sup_bound
    }

    pub fn inf_bound(&self) -> f64 {
        self.inf_bound
    }

    /// A point `x > 0` with `m(x) > 0`, when one is known.
    pub fn witness(&self) -> Option<f64> {
        self.witness
    }

    /// Evaluate `m(x)`. Negative `x` is clamped to zero.
    pub fn eval(&self, x: f64) -> f64 {
        let x = x.max(0.0);
        match &self.kind {
            ProfileKind::Constant { c } => *c,
            ProfileKind::PiecewiseLinear { knots } => interpolate_knots(knots, x),
            ProfileKind::Patchy { rho, intervals, background, ramp } => intervals
                .iter()
                .map(|iv| ramped(x, iv[0], iv[1], *ramp, *background, |_| *rho))
                .fold(*background, f64::max),
            ProfileKind::AlgebraicFloor { rho, gamma, k, anchors, background, ramp } => anchors
                .iter()
                .map(|&a| ramped(x, a, k * a, *ramp, *background, |s| rho * s.powf(*gamma)))
                .fold(*background, f64::max),
            ProfileKind::TailPrescribed { gamma, m1, m2, period, core } => {
                let x_c = core[core.len() - 1][0];
                if x <= x_c {
                    return interpolate_knots(core, x);
                }
                let scale = if *gamma == 0.0 { 1.0 } else { x.powf(*gamma) };
                let phase = 2.0 * std::f64::consts::PI * (x - x_c) / period;
                let tail = scale * (0.5 * (m1 + m2) + 0.5 * (m2 - m1) * phase.sin());
                let s = (x - x_c) / period;
                if s >= 1.0 {
                    tail
                } else {
                    (1.0 - s) * core[core.len() - 1][1] + s * tail
                }
            }
        }
    }

    /// Abscissae where the profile changes formula.
    fn breakpoints(&self) -> Vec<f64> {
        match &self.kind {
            ProfileKind::Constant { .. } => Vec::new(),
            ProfileKind::PiecewiseLinear { knots } => knots.iter().map(|k| k[0]).collect(),
            ProfileKind::Patchy { intervals, ramp, .. } => intervals
                .iter()
                .flat_map(|iv| [iv[0] - ramp, iv[0], iv[1], iv[1] + ramp])
                .collect(),
            ProfileKind::AlgebraicFloor { k, anchors, ramp, .. } => anchors
                .iter()
                .flat_map(|&a| [a - ramp, a, k * a, k * a + ramp])
                .collect(),
            ProfileKind::TailPrescribed { core, period, .. } => {
                let x_c = core[core.len() - 1][0];
                let mut pts: Vec<f64> = core.iter().map(|k| k[0]).collect();
                pts.push(x_c + period);
                pts
            }
        }
    }

    /// Maximum of `m` over `[a, b]`, taken over breakpoints plus a dense
    /// uniform sample.
    pub fn max_on(&self, a: f64, b: f64) -> f64 {
        let (a, b) = (a.max(0.0), b.max(a.max(0.0)));
        let samples = 4096;
        let dense = (0..=samples).map(|i| a + (b - a) * i as f64 / samples as f64);
        let extra = self.breakpoints().into_iter().filter(|&x| x >= a && x <= b);
        dense.chain(extra).map(|x| self.eval(x)).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Evaluate `m(x)` for `x >= 0`.
pub fn evaluate_m(profile: &GrowthProfile, x: f64) -> f64 {
    profile.eval(x)
}

/// The boundary operator `B[u] = alpha u - beta u_x` at `x = 0`, normalized so
/// that `alpha + beta = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryOperator {
    alpha: f64,
    beta: f64,
}

impl BoundaryOperator {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha.is_finite() && beta.is_finite() && alpha >= 0.0 && beta >= 0.0 && alpha + beta > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "boundary weights must be non-negative with positive sum (alpha = {alpha}, beta = {beta})"
            )));
        }
        let s = alpha + beta;
        let alpha = alpha / s;
        Ok(Self { alpha, beta: 1.0 - alpha })
    }

    pub fn dirichlet() -> Self {
        Self { alpha: 1.0, beta: 0.0 }
    }

    pub fn neumann() -> Self {
        Self { alpha: 0.0, beta: 1.0 }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn is_dirichlet(&self) -> bool {
        self.beta == 0.0
    }

    pub fn is_neumann(&self) -> bool {
        self.alpha == 0.0
    }

    /// `alpha / beta`, the Robin coefficient in `u_x(0) = (alpha / beta) u(0)`.
    /// Only meaningful when `beta > 0`.
    pub fn robin_ratio(&self) -> f64 {
        self.alpha / self.beta
    }
}

/// Second-order one-sided forward difference at the first node.
pub fn forward_difference(v: &[f64], dx: f64) -> f64 {
    (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * dx)
}

/// Initial density `u0` sampled on a uniform grid over `[0, h0]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialProfile {
    pub h0: f64,
    pub samples: Vec<f64>,
}

impl InitialProfile {
    pub fn new(h0: f64, samples: Vec<f64>) -> Result<Self> {
        if !(h0.is_finite() && h0 > 0.0) {
            return Err(Error::InvalidParameter(format!("h0 must be positive (got {h0})")));
        }
        if samples.len() < 3 {
            return Err(Error::InvalidParameter("u0 needs at least three samples".into()));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("u0 samples must be finite".into()));
        }
        Ok(Self { h0, samples })
    }

    /// Sample `f` on `intervals + 1` uniform nodes, pin `u0(h0) = 0` and set the
    /// first sample so the discrete boundary relation at `x = 0` holds exactly.
    pub fn sampled(h0: f64, intervals: usize, boundary: &BoundaryOperator, f: impl Fn(f64) -> f64) -> Result<Self> {
        if intervals < 2 {
            return Err(Error::InvalidParameter("u0 needs at least two intervals".into()));
        }
        let dx = h0 / intervals as f64;
        let mut samples: Vec<f64> = (0..=intervals).map(|i| f(i as f64 * dx)).collect();
        samples[intervals] = 0.0;
        let (alpha, beta) = (boundary.alpha(), boundary.beta());
        samples[0] = beta * (4.0 * samples[1] - samples[2]) / (2.0 * dx * alpha + 3.0 * beta);
        Self::new(h0, samples)
    }

    pub fn dx(&self) -> f64 {
        self.h0 / (self.samples.len() - 1) as f64
    }

    pub fn max(&self) -> f64 {
        self.samples.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { h0: self.h0, samples: self.samples.iter().map(|v| v * factor).collect() }
    }
}

/// Full parameter set of the free boundary problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpecDocument", into = "SpecDocument")]
pub struct ProblemSpec {
    d: f64,
    mu: f64,
    boundary: BoundaryOperator,
    m: GrowthProfile,
    u0: InitialProfile,
}

/// JSON layout of a [`ProblemSpec`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecDocument {
    d: f64,
    mu: f64,
    h0: f64,
    alpha: f64,
    beta: f64,
    m: GrowthProfile,
    u0: InitialProfile,
}

impl TryFrom<SpecDocument> for ProblemSpec {
    type Error = Error;
    fn try_from(doc: SpecDocument) -> Result<Self> {
        if (doc.h0 - doc.u0.h0).abs() > 1e-12 * doc.h0.abs().max(1.0) {
            return Err(Error::InvalidParameter(format!(
                "top-level h0 = {} disagrees with u0.h0 = {}",
                doc.h0, doc.u0.h0
            )));
        }
        let u0 = InitialProfile::new(doc.u0.h0, doc.u0.samples)?;
        ProblemSpec::new(doc.d, doc.mu, BoundaryOperator::new(doc.alpha, doc.beta)?, doc.m, u0)
    }
}

impl From<ProblemSpec> for SpecDocument {
    fn from(s: ProblemSpec) -> Self {
        SpecDocument {
            d: s.d,
            mu: s.mu,
            h0: s.u0.h0,
            alpha: s.boundary.alpha,
            beta: s.boundary.beta,
            m: s.m,
            u0: s.u0,
        }
    }
}

impl ProblemSpec {
    pub fn new(d: f64, mu: f64, boundary: BoundaryOperator, m: GrowthProfile, u0: InitialProfile) -> Result<Self> {
        if !(d.is_finite() && d > 0.0) {
            return Err(Error::InvalidParameter(format!("d must be positive (got {d})")));
        }
        if !(mu.is_finite() && mu > 0.0) {
            return Err(Error::InvalidParameter(format!("mu must be positive (got {mu})")));
        }
        if !(u0.h0.is_finite() && u0.h0 > 0.0) {
            return Err(Error::InvalidParameter(format!("h0 must be positive (got {})", u0.h0)));
        }
        Ok(Self { d, mu, boundary, m, u0 })
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn h0(&self) -> f64 {
        self.u0.h0
    }

    pub fn boundary(&self) -> &BoundaryOperator {
        &self.boundary
    }

    pub fn m(&self) -> &GrowthProfile {
        &self.m
    }

    pub fn u0(&self) -> &InitialProfile {
        &self.u0
    }

    /// `M = max(max u0, sup m)`, the a priori bound on the density.
    pub fn density_bound(&self) -> f64 {
        self.u0.max().max(self.m.sup_bound)
    }

    pub fn with_mu(&self, mu: f64) -> Result<Self> {
        Self::new(self.d, mu, self.boundary, self.m.clone(), self.u0.clone())
    }

    pub fn with_d(&self, d: f64) -> Result<Self> {
        Self::new(d, self.mu, self.boundary, self.m.clone(), self.u0.clone())
    }

    pub fn with_u0(&self, u0: InitialProfile) -> Result<Self> {
        Self::new(self.d, self.mu, self.boundary, self.m.clone(), u0)
    }

    /// Fail with [`Error::InvalidSpec`] unless [`validate_spec`] is empty.
    pub fn ensure_valid(&self) -> Result<()> {
        let v = validate_spec(self);
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidSpec(v.iter().map(ToString::to_string).collect()))
        }
    }
}

/// A failed hypothesis on a [`ProblemSpec`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    GrowthNowherePositive,
    GrowthUnbounded,
    NonPositive { name: &'static str, value: f64 },
    BoundaryWeights { sum: f64 },
    InitialNotPositive { node: usize, value: f64 },
    InitialEndpoint { value: f64 },
    Compatibility { residual: f64, tolerance: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::GrowthNowherePositive => write!(f, "condition (A) violated: m nowhere positive"),
            Violation::GrowthUnbounded => write!(f, "condition (A) violated: m not bounded"),
            Violation::NonPositive { name, value } => write!(f, "{name} must be positive (got {value})"),
            Violation::BoundaryWeights { sum } => write!(f, "alpha + beta must equal 1 (got {sum})"),
            Violation::InitialNotPositive { node, value } => {
                write!(f, "u0 must be positive at interior nodes (node {node}: {value})")
            }
            Violation::InitialEndpoint { .. } => write!(f, "u0 endpoint must vanish"),
            Violation::Compatibility { residual, tolerance } => write!(
                f,
                "u0 violates the boundary condition at x = 0 (residual {residual:e} > {tolerance:e})"
            ),
        }
    }
}

/// Check every standing hypothesis on `spec`; empty when valid.
pub fn validate_spec(spec: &ProblemSpec) -> Vec<Violation> {
    let mut out = Vec::new();
    for (name, value) in [("d", spec.d), ("mu", spec.mu), ("h0", spec.u0.h0)] {
        if !(value > 0.0) {
            out.push(Violation::NonPositive { name, value });
        }
    }
    if !(spec.m.sup_bound.is_finite() && spec.m.inf_bound.is_finite()) {
        out.push(Violation::GrowthUnbounded);
    }
    if spec.m.witness.is_none() {
        out.push(Violation::GrowthNowherePositive);
    }
    let sum = spec.boundary.alpha + spec.boundary.beta;
    if (sum - 1.0).abs() > 1e-14 {
        out.push(Violation::BoundaryWeights { sum });
    }
    let s = &spec.u0.samples;
    let last = s.len() - 1;
    if let Some((node, &value)) = s[1..last].iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        out.push(Violation::InitialNotPositive { node: node + 1, value });
    }
    if s[last] != 0.0 {
        out.push(Violation::InitialEndpoint { value: s[last] });
    }
    let residual = (spec.boundary.alpha * s[0] - spec.boundary.beta * forward_difference(s, spec.u0.dx())).abs();
    let tolerance = TOL_BC * spec.u0.max().abs().max(f64::MIN_POSITIVE);
    if residual > tolerance {
        out.push(Violation::Compatibility { residual, tolerance });
    }
    out
}
