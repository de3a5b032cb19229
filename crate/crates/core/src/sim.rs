//! Random covering sets: center sampling, displacement families, truncated
//! limsup chains, and dimension estimators.
//!
//! Every simulation output is a pure function of (configuration, seed); the
//! per-trial seeds come from one master seed through [`trial_seed`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dyadic::{
    cell_side, level_cap, morton_encode, rasterize_ball, rasterize_rectangle, DyadicError,
    DyadicSet, RasterMode, TorusPoint, MAX_DIM,
};
use crate::energy::DiscreteMeasure;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid parameter: {0}")]
    BadParameter(String),
    #[error("nonlinear family not contractive: 2πkε = {0} must stay below 1/2")]
    NotContractive(f64),
    #[error("inverse solve failed to converge on sample {0}")]
    InverseNoConvergence(u64),
    #[error("need at least 3 usable scale points, got {0}")]
    TooFewScales(usize),
    #[error(transparent)]
    Dyadic(#[from] DyadicError),
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for one trial: `splitmix64(master XOR (trial+1)·golden)`. Documented
/// so parallel runs and reruns agree on every trial's stream.
pub fn trial_seed(master: u64, trial: u64) -> u64 {
    splitmix64(master ^ (trial + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Law of the random centers.
#[derive(Debug, Clone)]
pub enum SamplingDistribution {
    Uniform { dim: usize },
    /// Cell-weighted density with total mass 1; absolutely continuous by
    /// construction.
    Density(DiscreteMeasure),
}

impl SamplingDistribution {
    pub fn dim(&self) -> usize {
        match self {
            SamplingDistribution::Uniform { dim } => *dim,
            SamplingDistribution::Density(mu) => mu.support().dim(),
        }
    }
}

/// I.i.d. centers; identical output for identical `(dist, n, seed)`.
pub fn sample_centers(
    dist: &SamplingDistribution,
    n: u64,
    seed: u64,
) -> Result<Vec<TorusPoint>, SimError> {
    if n == 0 {
        return Err(SimError::BadParameter("need at least one center".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = dist.dim();
    let mut out = Vec::with_capacity(n as usize);
    match dist {
        SamplingDistribution::Uniform { .. } => {
            for _ in 0..n {
                out.push(TorusPoint::new((0..dim).map(|_| rng.gen::<f64>()).collect()));
            }
        }
        SamplingDistribution::Density(mu) => {
            if !mu.is_probability() {
                return Err(SimError::BadParameter("density must have total mass 1".into()));
            }
            let cum: Vec<f64> = mu
                .weights()
                .iter()
                .scan(0.0, |acc, &w| {
                    *acc += w;
                    Some(*acc)
                })
                .collect();
            let support = mu.support();
            let idx_table: Vec<[u32; MAX_DIM]> = support.iter_indices().collect();
            let w = cell_side(support.level());
            let total = *cum.last().unwrap();
            for _ in 0..n {
                let u = rng.gen::<f64>() * total;
                let i = cum.partition_point(|&c| c < u).min(cum.len() - 1);
                let idx = &idx_table[i];
                let coords =
                    (0..dim).map(|a| (idx[a] as f64 + rng.gen::<f64>()) * w).collect();
                out.push(TorusPoint::new(coords));
            }
        }
    }
    Ok(out)
}

/// Per-axis size law `c · n^{-alpha}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SizeLaw {
    pub c: f64,
    pub alpha: f64,
}

impl SizeLaw {
    pub fn eval(&self, n: u64) -> f64 {
        self.c * (n as f64).powf(-self.alpha)
    }
}

/// The generator shapes.
#[derive(Debug, Clone)]
pub enum ShapeFamily {
    /// `A_n = B(0, r_n)` with `r_n` from the first size law.
    Ball,
    /// `A_n = [0, a_n) × [0, b_n) × …` with one law per axis.
    Rectangle,
    /// `A_n = λ_n · K` for a fixed fat-Cantor reference `K`; `λ_n` from the
    /// first size law. One-dimensional.
    FatCantorCopy { reference: DyadicSet },
    /// Explicit per-n sets, cycled when `n` exceeds the list.
    Custom(Vec<DyadicSet>),
}

/// The deterministic sequence `A_n` driving an experiment.
#[derive(Debug, Clone)]
pub struct GeneratorSchedule {
    pub dim: usize,
    pub family: ShapeFamily,
    pub laws: Vec<SizeLaw>,
    pub n_max: u64,
}

impl GeneratorSchedule {
    pub fn balls(dim: usize, c: f64, alpha: f64, n_max: u64) -> Result<Self, SimError> {
        if !(c > 0.0 && c <= 1.0) {
            return Err(SimError::BadParameter(format!("ball radius scale {c} outside (0, 1]")));
        }
        Ok(GeneratorSchedule { dim, family: ShapeFamily::Ball, laws: vec![SizeLaw { c, alpha }], n_max })
    }

    pub fn rectangles(dim: usize, laws: Vec<SizeLaw>, n_max: u64) -> Result<Self, SimError> {
        if laws.len() != dim {
            return Err(SimError::BadParameter("one size law per axis".into()));
        }
        for l in &laws {
            if !(l.c > 0.0 && l.c <= 1.0) {
                return Err(SimError::BadParameter(format!("side scale {} outside (0, 1]", l.c)));
            }
        }
        Ok(GeneratorSchedule { dim, family: ShapeFamily::Rectangle, laws, n_max })
    }

    /// Scaled copies of a fat Cantor set; the reference is rasterized once
    /// at `reference_level` and rescaled per generator.
    pub fn fat_cantor_copies(
        gaps: &[f64],
        reference_level: u8,
        c: f64,
        alpha: f64,
        n_max: u64,
    ) -> Result<Self, SimError> {
        if !(c > 0.0 && c <= 1.0) {
            return Err(SimError::BadParameter(format!("scale {c} outside (0, 1]")));
        }
        let reference = crate::dyadic::fat_cantor(gaps, reference_level)?;
        Ok(GeneratorSchedule {
            dim: 1,
            family: ShapeFamily::FatCantorCopy { reference },
            laws: vec![SizeLaw { c, alpha }],
            n_max,
        })
    }

    pub fn custom(dim: usize, sets: Vec<DyadicSet>, n_max: u64) -> Result<Self, SimError> {
        if sets.is_empty() || sets.iter().any(|s| s.dim() != dim) {
            return Err(SimError::BadParameter("custom sets empty or wrong dimension".into()));
        }
        Ok(GeneratorSchedule { dim, family: ShapeFamily::Custom(sets), laws: Vec::new(), n_max })
    }

    /// Diameter of `A_n`, used to match counting scales to generator scales.
    pub fn shape_diam(&self, n: u64) -> f64 {
        match &self.family {
            ShapeFamily::Ball => 2.0 * self.laws[0].eval(n),
            ShapeFamily::Rectangle => {
                let sq: f64 = self.laws.iter().map(|l| l.eval(n).powi(2)).sum();
                sq.sqrt()
            }
            ShapeFamily::FatCantorCopy { .. } => self.laws[0].eval(n),
            ShapeFamily::Custom(_) => (self.dim as f64).sqrt(),
        }
    }

    /// Lebesgue measure of `A_n` (exact for analytic shapes).
    pub fn shape_measure(&self, n: u64) -> f64 {
        match &self.family {
            ShapeFamily::Ball => {
                let r = self.laws[0].eval(n);
                crate::gauge::unit_ball_volume(self.dim) * r.powi(self.dim as i32)
            }
            ShapeFamily::Rectangle => self.laws.iter().map(|l| l.eval(n)).product(),
            ShapeFamily::FatCantorCopy { reference } => {
                self.laws[0].eval(n) * reference.measure()
            }
            ShapeFamily::Custom(sets) => sets[(n as usize - 1) % sets.len()].measure(),
        }
    }
}

/// The map `f(x, y)` placing generator points `y` around the random center
/// `x`.
#[derive(Debug, Clone)]
pub enum DisplacementFamily {
    /// `f(x, y) = x + y`.
    Translation,
    /// `f(x, y) = x + y + ε·φ_k(x, y)` with
    /// `φ_k(x, y)_i = sin(2πk x_i) sin(2πk y_i)`; requires `2πkε < 1/2`.
    Nonlinear { eps: f64, k: u32, c_u: f64 },
}

impl DisplacementFamily {
    pub fn translation() -> Self {
        DisplacementFamily::Translation
    }

    pub fn nonlinear(eps: f64, k: u32) -> Result<Self, SimError> {
        let a = 2.0 * std::f64::consts::PI * k as f64 * eps;
        if !(a >= 0.0) || a >= 0.5 {
            return Err(SimError::NotContractive(a));
        }
        let c_u = (1.0 + a) / (1.0 - a);
        let fam = DisplacementFamily::Nonlinear { eps, k, c_u };
        // derivative bounds verified on a sample grid at construction
        let grid = 17;
        for i in 0..grid {
            for j in 0..grid {
                let x = TorusPoint::new(vec![i as f64 / grid as f64]);
                let y = TorusPoint::new(vec![j as f64 / grid as f64]);
                for arg in [1u8, 2] {
                    for &d in fam.derivative_diag(&x, &y, arg).iter() {
                        if !(d.abs() <= c_u && d.abs() >= 1.0 / c_u) {
                            return Err(SimError::NotContractive(a));
                        }
                    }
                }
            }
        }
        Ok(fam)
    }

    pub fn c_u(&self) -> f64 {
        match self {
            DisplacementFamily::Translation => 1.0,
            DisplacementFamily::Nonlinear { c_u, .. } => *c_u,
        }
    }

    pub fn apply(&self, x: &TorusPoint, y: &TorusPoint) -> TorusPoint {
        match self {
            DisplacementFamily::Translation => TorusPoint::new(
                x.coords().iter().zip(y.coords()).map(|(&a, &b)| a + b).collect(),
            ),
            DisplacementFamily::Nonlinear { eps, k, .. } => {
                let tau = 2.0 * std::f64::consts::PI * *k as f64;
                TorusPoint::new(
                    x.coords()
                        .iter()
                        .zip(y.coords())
                        .map(|(&a, &b)| a + b + eps * (tau * a).sin() * (tau * b).sin())
                        .collect(),
                )
            }
        }
    }

    /// Diagonal of `D_i f(x, y)` (both derivatives are diagonal here);
    /// `arg = 1` differentiates in x, `arg = 2` in y.
    pub fn derivative_diag(&self, x: &TorusPoint, y: &TorusPoint, arg: u8) -> Vec<f64> {
        match self {
            DisplacementFamily::Translation => vec![1.0; x.dim()],
            DisplacementFamily::Nonlinear { eps, k, .. } => {
                let tau = 2.0 * std::f64::consts::PI * *k as f64;
                x.coords()
                    .iter()
                    .zip(y.coords())
                    .map(|(&a, &b)| {
                        if arg == 1 {
                            1.0 + eps * tau * (tau * a).cos() * (tau * b).sin()
                        } else {
                            1.0 + eps * tau * (tau * a).sin() * (tau * b).cos()
                        }
                    })
                    .collect()
            }
        }
    }

    /// Solve `f(x, y) = z` for `x` (the inverse family applied to `z`).
    pub fn invert_in_x(&self, z: &TorusPoint, y: &TorusPoint) -> Result<TorusPoint, SimError> {
        match self {
            DisplacementFamily::Translation => Ok(TorusPoint::new(
                z.coords().iter().zip(y.coords()).map(|(&a, &b)| a - b).collect(),
            )),
            DisplacementFamily::Nonlinear { eps, k, .. } => {
                let tau = 2.0 * std::f64::consts::PI * *k as f64;
                // per-axis contraction x = z - y - ε sin(2πk x) sin(2πk y)
                let mut out = Vec::with_capacity(z.dim());
                for (&zi, &yi) in z.coords().iter().zip(y.coords()) {
                    let sy = (tau * yi).sin();
                    let mut x = zi - yi;
                    let mut converged = false;
                    for _ in 0..200 {
                        let next = zi - yi - eps * (tau * x).sin() * sy;
                        if (next - x).abs() < 1e-15 {
                            x = next;
                            converged = true;
                            break;
                        }
                        x = next;
                    }
                    if !converged {
                        return Err(SimError::InverseNoConvergence(0));
                    }
                    out.push(x);
                }
                Ok(TorusPoint::new(out))
            }
        }
    }
}

fn scale_raster(reference: &DyadicSet, factor: f64, level: u8) -> Result<DyadicSet, DyadicError> {
    let dim = reference.dim();
    let w_ref = cell_side(reference.level());
    let mut acc: Vec<u64> = Vec::new();
    if dim == 1 {
        // maximal runs of the reference rescale as whole intervals
        let keys = reference.keys();
        let mut i = 0usize;
        while i < keys.len() {
            let mut j = i + 1;
            while j < keys.len() && keys[j] == keys[j - 1] + 1 {
                j += 1;
            }
            let lo = keys[i] as f64 * w_ref * factor;
            let len = (keys[j - 1] + 1 - keys[i]) as f64 * w_ref * factor;
            let piece = rasterize_rectangle(
                &TorusPoint::new(vec![lo]),
                &[len.min(1.0)],
                level,
                RasterMode::Outer,
            )?;
            acc.extend_from_slice(piece.keys());
            i = j;
        }
    } else {
        for idx in reference.iter_indices() {
            let corner: Vec<f64> = (0..dim).map(|a| idx[a] as f64 * w_ref * factor).collect();
            let piece = rasterize_rectangle(
                &TorusPoint::new(corner),
                &vec![w_ref * factor; dim],
                level,
                RasterMode::Outer,
            )?;
            acc.extend_from_slice(piece.keys());
        }
    }
    DyadicSet::from_morton(dim, level, acc)
}

/// Cells of the outer rasterization of `f(x, A_n)` pushed into `out`.
fn push_displaced_shape(
    out: &mut Vec<u64>,
    sched: &GeneratorSchedule,
    disp: &DisplacementFamily,
    x: &TorusPoint,
    n: u64,
    level: u8,
) -> Result<(), SimError> {
    let dim = sched.dim;
    match disp {
        DisplacementFamily::Translation => {
            let set = match &sched.family {
                ShapeFamily::Ball => {
                    rasterize_ball(x, sched.laws[0].eval(n), level, RasterMode::Outer)?
                }
                ShapeFamily::Rectangle => {
                    let sides: Vec<f64> = sched.laws.iter().map(|l| l.eval(n)).collect();
                    rasterize_rectangle(x, &sides, level, RasterMode::Outer)?
                }
                ShapeFamily::FatCantorCopy { reference } => {
                    let scaled = scale_raster(reference, sched.laws[0].eval(n), level)?;
                    scaled.translate(x)?.set
                }
                ShapeFamily::Custom(sets) => {
                    let base = &sets[(n as usize - 1) % sets.len()];
                    base.refine(level.max(base.level()))?.translate(x)?.set
                }
            };
            out.extend_from_slice(set.keys());
            Ok(())
        }
        DisplacementFamily::Nonlinear { c_u, .. } => {
            // base raster of A_n at the origin, then image cover of each cell
            // center with the Lipschitz safety margin C_u sqrt(d) 2^-l
            let origin = TorusPoint::new(vec![0.0; dim]);
            let base = match &sched.family {
                ShapeFamily::Ball => {
                    rasterize_ball(&origin, sched.laws[0].eval(n), level, RasterMode::Outer)?
                }
                ShapeFamily::Rectangle => {
                    let sides: Vec<f64> = sched.laws.iter().map(|l| l.eval(n)).collect();
                    rasterize_rectangle(&origin, &sides, level, RasterMode::Outer)?
                }
                ShapeFamily::FatCantorCopy { reference } => {
                    scale_raster(reference, sched.laws[0].eval(n), level)?
                }
                ShapeFamily::Custom(sets) => {
                    let b = &sets[(n as usize - 1) % sets.len()];
                    b.refine(level.max(b.level()))?
                }
            };
            let w = cell_side(level);
            let margin = c_u * (dim as f64).sqrt() * w;
            let reach = (margin / w).ceil() as i64;
            let grid = 1i64 << level;
            let mut stamp = [0u32; MAX_DIM];
            for idx in base.iter_indices() {
                let y = TorusPoint::new((0..dim).map(|a| (idx[a] as f64 + 0.5) * w).collect());
                let z = disp.apply(x, &y);
                let zc: Vec<i64> =
                    z.coords().iter().map(|&c| (c * grid as f64).floor() as i64).collect();
                let mut off = vec![-reach; dim];
                'stamp: loop {
                    for a in 0..dim {
                        stamp[a] = (zc[a] + off[a]).rem_euclid(grid) as u32;
                    }
                    out.push(morton_encode(dim, level, &stamp[..dim]));
                    let mut a = 0;
                    loop {
                        if a == dim {
                            break 'stamp;
                        }
                        off[a] += 1;
                        if off[a] <= reach {
                            break;
                        }
                        off[a] = -reach;
                        a += 1;
                    }
                }
            }
            Ok(())
        }
    }
}

/// Outer rasterization of `∪_{n in (lo, hi]} f(x_n, A_n)` at the given level.
pub fn stage_union(
    centers: &[TorusPoint],
    sched: &GeneratorSchedule,
    disp: &DisplacementFamily,
    block: (u64, u64),
    level: u8,
) -> Result<DyadicSet, SimError> {
    let (lo, hi) = block;
    if lo >= hi || hi > centers.len() as u64 || hi > sched.n_max {
        return Err(SimError::BadParameter(format!(
            "block ({lo}, {hi}] outside centers ({}) or schedule ({})",
            centers.len(),
            sched.n_max
        )));
    }
    let mut keys = Vec::new();
    for n in lo + 1..=hi {
        push_displaced_shape(&mut keys, sched, disp, &centers[(n - 1) as usize], n, level)?;
    }
    Ok(DyadicSet::from_morton(sched.dim, level, keys)?)
}

/// Block boundaries and matched counting levels for a truncated limsup
/// experiment.
#[derive(Debug, Clone)]
pub struct BlockSchedule {
    /// `N_0 = 0 < N_1 < … <= n_max`.
    pub boundaries: Vec<u64>,
    /// Counting level per block, nondecreasing.
    pub levels: Vec<u8>,
}

impl BlockSchedule {
    pub fn blocks(&self) -> usize {
        self.boundaries.len() - 1
    }
}

/// Geometric boundaries `N_j = ceil(N_{j-1} ρ)` with the counting scale of
/// block j matched to the smallest generator diameter in the block. The
/// final block is truncated at the last generator still matched to the level
/// cap, so no block ever counts sub-cell generators; blocks stop there or
/// when `n_max` is exhausted.
pub fn geometric_blocks(
    sched: &GeneratorSchedule,
    n1: u64,
    rho: f64,
    l_max: u8,
) -> Result<BlockSchedule, SimError> {
    if n1 < 1 || rho <= 1.0 {
        return Err(SimError::BadParameter("need n1 >= 1 and rho > 1".into()));
    }
    let cap = l_max.min(level_cap(sched.dim));
    let cap_cell = cell_side(cap);
    // last generator whose diameter is still at least one cap-level cell
    let n_at_cap = if sched.shape_diam(sched.n_max) >= cap_cell {
        sched.n_max
    } else if sched.shape_diam(1) < cap_cell {
        1
    } else {
        let (mut lo, mut hi) = (1u64, sched.n_max);
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if sched.shape_diam(mid) >= cap_cell {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    };
    let horizon = sched.n_max.min(n_at_cap.max(n1));
    let mut boundaries = vec![0u64];
    let mut levels = Vec::new();
    let mut next = n1;
    let mut prev_level = 1u8;
    loop {
        let n_j = next.min(horizon);
        let diam = sched.shape_diam(n_j).max(1e-300);
        let matched = (-diam.log2()).round().max(1.0) as u8;
        let lvl = matched.clamp(prev_level, cap);
        boundaries.push(n_j);
        levels.push(lvl);
        prev_level = lvl;
        if n_j >= horizon {
            break;
        }
        next = ((n_j as f64) * rho).ceil() as u64;
    }
    Ok(BlockSchedule { boundaries, levels })
}

/// Stage unions and the strict nested chain of a truncated limsup set.
#[derive(Debug, Clone)]
pub struct LimsupChain {
    /// `U_j`, each at its own counting level.
    pub stages: Vec<DyadicSet>,
    /// `E_j = ∩_{i<=j} U_i`, refined to the finest level so far.
    pub chain: Vec<DyadicSet>,
    pub levels: Vec<u8>,
    pub boundaries: Vec<u64>,
    /// First block index (0-based) with an empty intersection, if any.
    pub empty_at: Option<usize>,
    /// Analytic occupancy of each block at its counting scale:
    /// `1 - exp(-Σ_n (L(A_n)^{1/d} + 2^{-ℓ_j})^d)`, the expected fraction of
    /// level-ℓ_j cells the stage hits. Depends only on the schedule, never on
    /// the displacement or the rasterization.
    pub block_occupancy: Vec<f64>,
}

impl LimsupChain {
    /// Number of leading blocks with nonempty intersection.
    pub fn survival(&self) -> usize {
        self.empty_at.unwrap_or(self.chain.len())
    }
}

/// Build the nested chain `E_1 ⊇ E_2 ⊇ …` over the given blocks.
pub fn truncated_limsup(
    centers: &[TorusPoint],
    sched: &GeneratorSchedule,
    disp: &DisplacementFamily,
    blocks: &BlockSchedule,
) -> Result<LimsupChain, SimError> {
    if blocks.blocks() == 0 {
        return Err(SimError::BadParameter("no blocks".into()));
    }
    let mut stages = Vec::with_capacity(blocks.blocks());
    let mut chain: Vec<DyadicSet> = Vec::with_capacity(blocks.blocks());
    let mut block_occupancy: Vec<f64> = Vec::with_capacity(blocks.blocks());
    let mut empty_at = None;
    // Image rasters carry a Lipschitz safety margin of whole cells; building
    // nonlinear stages two levels finer keeps that margin below the counting
    // scale, so counts match the translation family's.
    let raster_margin = match disp {
        DisplacementFamily::Translation => 0u8,
        DisplacementFamily::Nonlinear { .. } => 2u8,
    };
    for j in 0..blocks.blocks() {
        let block = (blocks.boundaries[j], blocks.boundaries[j + 1]);
        let raster_level =
            (blocks.levels[j] + raster_margin).min(level_cap(sched.dim));
        let u_j = stage_union(centers, sched, disp, block, raster_level)?;
        let e_j = match chain.last() {
            None => u_j.clone(),
            Some(prev) => prev.intersect(&u_j)?,
        };
        if e_j.is_empty() && empty_at.is_none() {
            empty_at = Some(j);
        }
        let w = crate::dyadic::cell_side(blocks.levels[j]);
        let d = sched.dim as f64;
        let mass: f64 = (block.0 + 1..=block.1)
            .map(|n| {
                let side = sched.shape_measure(n).max(0.0).powf(1.0 / d);
                ((side + w).powf(d)).min(1.0)
            })
            .sum();
        block_occupancy.push(1.0 - (-mass).exp());
        stages.push(u_j);
        chain.push(e_j);
    }
    Ok(LimsupChain {
        stages,
        chain,
        levels: blocks.levels.clone(),
        boundaries: blocks.boundaries.clone(),
        empty_at,
        block_occupancy,
    })
}

/// What the box-count slope is measured on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EstimatorMode {
    /// Counts of the strict nested chain.
    StrictChain,
    /// Counts of `U_j` intersected with every earlier stage whose analytic
    /// occupancy reaches `full_threshold`. In the convergent-measure regime
    /// only the early unions have full-measure tendency; stages below the
    /// threshold carry the scaling law on their own and must not thin later
    /// scale points. Blocks with occupancy above `saturation_skip` count the
    /// torus rather than the covering law at their own scale, so they
    /// contribute no scale point. Both gates depend only on the schedule,
    /// keeping the estimator identical across displacement families and
    /// seeds.
    GuardedChain { full_threshold: f64, saturation_skip: f64 },
    /// Counts of the stage unions alone.
    StageUnions,
}

/// Box-count slope over the chain's matched scales.
#[derive(Debug, Clone)]
pub struct DimensionEstimate {
    pub value: f64,
    /// `(ℓ_j · ln 2, ln N_j)` pairs actually used.
    pub scale_points: Vec<(f64, f64)>,
    pub r_squared: f64,
    pub blocks: Vec<u64>,
    /// Slope between consecutive scale points.
    pub local_slopes: Vec<f64>,
}

pub fn box_dimension_estimate(
    chain: &LimsupChain,
    mode: EstimatorMode,
) -> Result<DimensionEstimate, SimError> {
    let dim = chain.stages[0].dim();
    let mut pts: Vec<(f64, f64)> = Vec::new();
    let mut guard: Option<DyadicSet> = None;
    for j in 0..chain.stages.len() {
        let lvl = chain.levels[j];
        let count = match mode {
            EstimatorMode::StrictChain => chain.chain[j].count_positive_cells(lvl),
            EstimatorMode::StageUnions => chain.stages[j].count_positive_cells(lvl),
            EstimatorMode::GuardedChain { full_threshold, saturation_skip } => {
                let u_j = &chain.stages[j];
                let counted = match &guard {
                    None => u_j.count_positive_cells(lvl),
                    Some(g) => g.intersect(u_j)?.count_positive_cells(lvl),
                };
                if chain.block_occupancy[j] >= full_threshold {
                    guard = Some(match guard.take() {
                        None => u_j.clone(),
                        Some(g) => g.intersect(u_j)?,
                    });
                }
                if chain.block_occupancy[j] >= saturation_skip {
                    0
                } else {
                    counted
                }
            }
        };
        if count > 0 {
            pts.push((lvl as f64 * std::f64::consts::LN_2, (count as f64).ln()));
        }
    }
    // duplicate scales (level cap) carry no slope information
    pts.dedup_by(|a, b| a.0 == b.0);
    if pts.len() < 3 {
        return Err(SimError::TooFewScales(pts.len()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut cov, mut vx, mut vy) = (0.0, 0.0, 0.0);
    for &(x, y) in &pts {
        cov += (x - mx) * (y - my);
        vx += (x - mx) * (x - mx);
        vy += (y - my) * (y - my);
    }
    let slope = cov / vx;
    let r_squared = if vy > 0.0 { (cov * cov / (vx * vy)).min(1.0) } else { 1.0 };
    let local_slopes =
        pts.windows(2).map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0)).collect();
    Ok(DimensionEstimate {
        value: slope.clamp(0.0, dim as f64),
        scale_points: pts,
        r_squared,
        blocks: chain.boundaries.clone(),
        local_slopes,
    })
}

/// How fast the tail union saturates the positive-measure cube count of `F`.
#[derive(Debug, Clone)]
pub struct SaturationReport {
    /// Total level-ℓ cubes meeting `F` in positive measure.
    pub target: u64,
    /// First generator index at which the ratio reached 1.
    pub first_saturation: Option<u64>,
    pub terminal_ratio: f64,
}

/// Track `N*_ℓ(F ∩ ∪_{i >= n_start} f(x_i, A_i)) / N*_ℓ(F)` until it
/// saturates or the schedule runs out.
pub fn packing_saturation_check(
    centers: &[TorusPoint],
    sched: &GeneratorSchedule,
    disp: &DisplacementFamily,
    f: &DyadicSet,
    level: u8,
    n_start: u64,
) -> Result<SaturationReport, SimError> {
    if f.measure() == 0.0 {
        return Err(SimError::BadParameter("saturation target has measure zero".into()));
    }
    if n_start < 1 {
        return Err(SimError::BadParameter("generator indices start at 1".into()));
    }
    let work_level = f.level().max(level);
    let f_fine = f.refine(work_level)?;
    let target = f.count_positive_cells(level);
    let shift = (f.dim() as u32) * (work_level - level) as u32;
    let mut hit: std::collections::HashSet<u64> = std::collections::HashSet::new();
    let n_end = sched.n_max.min(centers.len() as u64);
    let mut first_saturation = None;
    let mut n = n_start;
    while n <= n_end {
        let mut keys = Vec::new();
        push_displaced_shape(&mut keys, sched, disp, &centers[(n - 1) as usize], n, work_level)?;
        let piece = DyadicSet::from_morton(f.dim(), work_level, keys)?;
        let meet = f_fine.intersect(&piece)?;
        for &k in meet.keys() {
            hit.insert(k >> shift);
        }
        if hit.len() as u64 >= target {
            first_saturation = Some(n);
            break;
        }
        n += 1;
    }
    Ok(SaturationReport {
        target,
        first_saturation,
        terminal_ratio: hit.len().min(target as usize) as f64 / target as f64,
    })
}

/// Forward/inverse consistency of a displacement family.
#[derive(Debug, Clone)]
pub struct InverseFamilyReport {
    pub samples: u64,
    pub max_recovery_error: f64,
    pub max_inverse_derivative_norm: f64,
    pub failures: u64,
}

pub fn verify_inverse_family(
    disp: &DisplacementFamily,
    dim: usize,
    samples: u64,
    seed: u64,
) -> Result<InverseFamilyReport, SimError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_err = 0.0f64;
    let mut max_norm = 0.0f64;
    let mut failures = 0u64;
    for _ in 0..samples {
        let x = TorusPoint::new((0..dim).map(|_| rng.gen::<f64>()).collect());
        let y = TorusPoint::new((0..dim).map(|_| rng.gen::<f64>()).collect());
        let z = disp.apply(&x, &y);
        match disp.invert_in_x(&z, &y) {
            Ok(back) => {
                let err = crate::dyadic::torus_distance(&back, &x)?;
                max_err = max_err.max(err);
            }
            Err(_) => failures += 1,
        }
        // inverse-family derivative is -D1^{-1} D2 (diagonal here)
        let d1 = disp.derivative_diag(&x, &y, 1);
        let d2 = disp.derivative_diag(&x, &y, 2);
        let norm = d1
            .iter()
            .zip(&d2)
            .map(|(&a, &b)| (b / a).abs().max((a / b).abs()))
            .fold(0.0f64, f64::max);
        max_norm = max_norm.max(norm);
    }
    Ok(InverseFamilyReport {
        samples,
        max_recovery_error: max_err,
        max_inverse_derivative_norm: max_norm,
        failures,
    })
}

/// Monte Carlo check of the density interaction: for most `x` in `F` the
/// image `W_x(E)` meets `F` in nearly full relative measure.
#[derive(Debug, Clone)]
pub struct DensityInteractionReport {
    pub fraction: f64,
    pub stderr: f64,
    pub threshold: f64,
    pub passes: bool,
    pub vacuous: bool,
}

pub fn density_interaction_check(
    f: &DyadicSet,
    disp: &DisplacementFamily,
    e: &DyadicSet,
    eps: f64,
    x_samples: u64,
    y_samples: u64,
    seed: u64,
) -> Result<DensityInteractionReport, SimError> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(SimError::BadParameter(format!("eps {eps} outside (0,1)")));
    }
    let threshold = 1.0 - eps;
    if e.measure() == 0.0 {
        return Ok(DensityInteractionReport {
            fraction: 0.0,
            stderr: 0.0,
            threshold,
            passes: false,
            vacuous: true,
        });
    }
    if f.measure() == 0.0 {
        return Err(SimError::BadParameter("base set has measure zero".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = f.dim();
    let wf = cell_side(f.level());
    let we = cell_side(e.level());
    let f_idx: Vec<[u32; MAX_DIM]> = f.iter_indices().collect();
    let e_idx: Vec<[u32; MAX_DIM]> = e.iter_indices().collect();
    let mut good = 0u64;
    for _ in 0..x_samples {
        let fc = &f_idx[rng.gen_range(0..f_idx.len())];
        let x =
            TorusPoint::new((0..dim).map(|a| (fc[a] as f64 + rng.gen::<f64>()) * wf).collect());
        let mut num = 0.0;
        let mut den = 0.0;
        for _ in 0..y_samples {
            let ec = &e_idx[rng.gen_range(0..e_idx.len())];
            let y = TorusPoint::new(
                (0..dim).map(|a| (ec[a] as f64 + rng.gen::<f64>()) * we).collect(),
            );
            let z = disp.apply(&x, &y);
            // importance weight |det D2 f| corrects the push-forward density
            let det: f64 = disp.derivative_diag(&x, &y, 2).iter().product();
            den += det.abs();
            if f.contains_point(&z)? {
                num += det.abs();
            }
        }
        if den > 0.0 && num / den >= threshold {
            good += 1;
        }
    }
    let fraction = good as f64 / x_samples as f64;
    let stderr = (fraction * (1.0 - fraction) / x_samples as f64).sqrt();
    Ok(DensityInteractionReport {
        fraction,
        stderr,
        threshold,
        passes: fraction + 2.0 * stderr >= threshold,
        vacuous: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::fat_cantor;

    #[test]
    fn trial_seeds_deterministic_and_distinct() {
        assert_eq!(trial_seed(42, 0), trial_seed(42, 0));
        let seeds: std::collections::HashSet<u64> =
            (0..1000).map(|t| trial_seed(42, t)).collect();
        assert_eq!(seeds.len(), 1000);
    }

    #[test]
    fn sampling_is_reproducible() {
        let dist = SamplingDistribution::Uniform { dim: 2 };
        let a = sample_centers(&dist, 100, 7).unwrap();
        let b = sample_centers(&dist, 100, 7).unwrap();
        assert_eq!(a, b);
        let c = sample_centers(&dist, 100, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn uniform_sampling_chi_square() {
        let dist = SamplingDistribution::Uniform { dim: 1 };
        let pts = sample_centers(&dist, 100_000, 3).unwrap();
        let bins = 16usize;
        let mut counts = vec![0.0; bins];
        for p in &pts {
            counts[(p.coords()[0] * bins as f64) as usize] += 1.0;
        }
        let expect = 100_000.0 / bins as f64;
        let chi2: f64 = counts.iter().map(|&c| (c - expect) * (c - expect) / expect).sum();
        // chi-square 0.999 quantile at 15 degrees of freedom
        assert!(chi2 < 37.70, "chi2 {chi2}");
    }

    #[test]
    fn density_sampling_stays_in_cell() {
        let support = DyadicSet::from_indices(2, 3, [[5u32, 2u32]]).unwrap();
        let mu = DiscreteMeasure::new(support, vec![1.0]).unwrap();
        let pts = sample_centers(&SamplingDistribution::Density(mu), 200, 11).unwrap();
        for p in pts {
            assert!(p.coords()[0] >= 5.0 / 8.0 && p.coords()[0] < 6.0 / 8.0);
            assert!(p.coords()[1] >= 2.0 / 8.0 && p.coords()[1] < 3.0 / 8.0);
        }
    }

    #[test]
    fn stage_union_translation_is_exact_on_grid() {
        let sched = GeneratorSchedule::balls(1, 0.25, 0.0, 4).unwrap();
        let x = TorusPoint::new(vec![0.5]);
        let centers = vec![x.clone(), x.clone(), x.clone(), x.clone()];
        let u = stage_union(&centers, &sched, &DisplacementFamily::translation(), (0, 1), 6)
            .unwrap();
        let direct = rasterize_ball(&x, 0.25, 6, RasterMode::Outer).unwrap();
        assert_eq!(u, direct);
    }

    #[test]
    fn stage_union_subadditive_measure() {
        let sched = GeneratorSchedule::balls(2, 0.2, 0.3, 50).unwrap();
        let centers =
            sample_centers(&SamplingDistribution::Uniform { dim: 2 }, 50, 5).unwrap();
        let disp = DisplacementFamily::translation();
        let u = stage_union(&centers, &sched, &disp, (0, 50), 7).unwrap();
        let total: f64 = (1..=50u64)
            .map(|n| stage_union(&centers, &sched, &disp, (n - 1, n), 7).unwrap().measure())
            .sum();
        assert!(u.measure() <= total + 1e-12);
    }

    #[test]
    fn nonlinear_image_measure_distortion() {
        let disp = DisplacementFamily::nonlinear(0.02, 1).unwrap();
        let c_u = disp.c_u();
        let sched = GeneratorSchedule::rectangles(
            2,
            vec![SizeLaw { c: 0.125, alpha: 0.0 }, SizeLaw { c: 0.125, alpha: 0.0 }],
            4,
        )
        .unwrap();
        let centers = sample_centers(&SamplingDistribution::Uniform { dim: 2 }, 4, 9).unwrap();
        let cube_measure = 0.125f64 * 0.125;
        for n in 1..=4u64 {
            let img = stage_union(&centers, &sched, &disp, (n - 1, n), 10).unwrap();
            let ratio = img.measure() / cube_measure;
            // outer raster adds a boundary band on top of the C_u bounds
            let slack = 1.10;
            assert!(
                ratio <= c_u.powi(2) * slack && ratio >= c_u.powi(-2) / slack,
                "n {n}: ratio {ratio} vs [{}, {}]",
                c_u.powi(-2),
                c_u.powi(2)
            );
        }
    }

    #[test]
    fn chain_is_nested_and_single_block_is_stage() {
        let sched = GeneratorSchedule::balls(1, 1.0, 2.0, 2000).unwrap();
        let centers =
            sample_centers(&SamplingDistribution::Uniform { dim: 1 }, 2000, 17).unwrap();
        let disp = DisplacementFamily::translation();
        let blocks = geometric_blocks(&sched, 4, 4.0, 14).unwrap();
        let chain = truncated_limsup(&centers, &sched, &disp, &blocks).unwrap();
        assert_eq!(chain.chain[0], chain.stages[0]);
        for j in 1..chain.chain.len() {
            let prev = chain.chain[j - 1].refine(chain.levels[j]).unwrap();
            assert!(chain.chain[j].difference(&prev).unwrap().is_empty());
        }
    }

    #[test]
    fn shrinking_ball_chain_survives_a_few_blocks() {
        // alpha = 2: the strict chain keeps positive measure through J <= 4
        let sched = GeneratorSchedule::balls(1, 1.0, 2.0, 100_000).unwrap();
        let disp = DisplacementFamily::translation();
        let mut survivals = Vec::new();
        for trial in 0..20u64 {
            let centers = sample_centers(
                &SamplingDistribution::Uniform { dim: 1 },
                100_000,
                trial_seed(99, trial),
            )
            .unwrap();
            let blocks = geometric_blocks(&sched, 4, 4.0, 18).unwrap();
            let chain = truncated_limsup(&centers, &sched, &disp, &blocks).unwrap();
            survivals.push(chain.survival());
        }
        survivals.sort_unstable();
        let median = survivals[survivals.len() / 2];
        assert!(median >= 4, "median survival {median} (profile {survivals:?})");
    }

    #[test]
    fn estimator_degenerate_chains() {
        // full tori at growing levels: slope d
        let stages: Vec<DyadicSet> = (3..=6u8).map(|l| DyadicSet::full(2, l).unwrap()).collect();
        let chain = LimsupChain {
            chain: stages.clone(),
            stages,
            levels: vec![3, 4, 5, 6],
            boundaries: vec![0, 1, 2, 3, 4],
            empty_at: None,
            block_occupancy: vec![1.0; 4],
        };
        let est = box_dimension_estimate(&chain, EstimatorMode::StrictChain).unwrap();
        assert!((est.value - 2.0).abs() < 1e-9);
        assert!(est.r_squared > 0.999999);
        // single cell at growing levels: slope 0
        let single: Vec<DyadicSet> =
            (3..=6u8).map(|l| DyadicSet::from_indices(1, l, [[0u32]]).unwrap()).collect();
        let chain = LimsupChain {
            chain: single.clone(),
            stages: single,
            levels: vec![3, 4, 5, 6],
            boundaries: vec![0, 1, 2, 3, 4],
            empty_at: None,
            block_occupancy: vec![0.0; 4],
        };
        let est = box_dimension_estimate(&chain, EstimatorMode::StrictChain).unwrap();
        assert_eq!(est.value, 0.0);
        // fewer than 3 usable scales rejected
        let two: Vec<DyadicSet> = (3..=4u8).map(|l| DyadicSet::full(1, l).unwrap()).collect();
        let chain = LimsupChain {
            chain: two.clone(),
            stages: two,
            levels: vec![3, 4],
            boundaries: vec![0, 1, 2],
            empty_at: None,
            block_occupancy: vec![1.0; 2],
        };
        assert!(matches!(
            box_dimension_estimate(&chain, EstimatorMode::StrictChain),
            Err(SimError::TooFewScales(_))
        ));
    }

    #[test]
    fn guarded_estimate_recovers_ball_dimension() {
        let alpha = 2.0;
        let sched = GeneratorSchedule::balls(1, 1.0, alpha, 100_000).unwrap();
        let disp = DisplacementFamily::translation();
        let mut estimates = Vec::new();
        for trial in 0..5u64 {
            let centers = sample_centers(
                &SamplingDistribution::Uniform { dim: 1 },
                100_000,
                trial_seed(1234, trial),
            )
            .unwrap();
            let blocks = geometric_blocks(&sched, 4, 4.0, 18).unwrap();
            let chain = truncated_limsup(&centers, &sched, &disp, &blocks).unwrap();
            let est = box_dimension_estimate(
                &chain,
                EstimatorMode::GuardedChain { full_threshold: 0.98, saturation_skip: 0.5 },
            )
            .unwrap();
            estimates.push(est.value);
        }
        estimates.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = estimates[estimates.len() / 2];
        assert!((median - 0.5).abs() <= 0.15, "median {median} of {estimates:?}");
    }

    #[test]
    fn enlarging_a_block_grows_the_union() {
        let sched = GeneratorSchedule::balls(1, 0.4, 1.0, 60).unwrap();
        let centers = sample_centers(&SamplingDistribution::Uniform { dim: 1 }, 60, 21).unwrap();
        let disp = DisplacementFamily::translation();
        let small = stage_union(&centers, &sched, &disp, (0, 20), 8).unwrap();
        let big = stage_union(&centers, &sched, &disp, (0, 60), 8).unwrap();
        assert!(small.difference(&big).unwrap().is_empty());
    }

    #[test]
    fn nonlinear_estimates_approach_translation_as_eps_shrinks() {
        let sched = GeneratorSchedule::balls(1, 1.0, 2.0, 20_000).unwrap();
        let blocks = geometric_blocks(&sched, 4, 2.0, 16).unwrap();
        let centers = sample_centers(
            &SamplingDistribution::Uniform { dim: 1 },
            20_000,
            trial_seed(5150, 0),
        )
        .unwrap();
        let estimate = |disp: &DisplacementFamily| {
            let chain = truncated_limsup(&centers, &sched, disp, &blocks).unwrap();
            box_dimension_estimate(
                &chain,
                EstimatorMode::GuardedChain { full_threshold: 0.98, saturation_skip: 0.5 },
            )
            .unwrap()
            .value
        };
        let base = estimate(&DisplacementFamily::translation());
        let ladder: Vec<f64> = [0.05, 0.02, 0.01]
            .iter()
            .map(|&eps| estimate(&DisplacementFamily::nonlinear(eps, 1).unwrap()))
            .collect();
        // deviations shrink along the ladder, with sampling slack
        let dev: Vec<f64> = ladder.iter().map(|e| (e - base).abs()).collect();
        assert!(dev[2] <= dev[0] + 0.02, "ladder {ladder:?} vs base {base}");
        assert!(dev[2] <= 0.05, "eps=0.01 deviation {}", dev[2]);
    }

    #[test]
    fn saturation_immediate_for_full_generator() {
        let full = DyadicSet::full(1, 4).unwrap();
        let sched = GeneratorSchedule::custom(1, vec![full], 10).unwrap();
        let centers = sample_centers(&SamplingDistribution::Uniform { dim: 1 }, 10, 3).unwrap();
        let f = fat_cantor(&[0.25], 6).unwrap();
        let rep = packing_saturation_check(
            &centers,
            &sched,
            &DisplacementFamily::translation(),
            &f,
            4,
            1,
        )
        .unwrap();
        assert_eq!(rep.first_saturation, Some(1));
        assert_eq!(rep.terminal_ratio, 1.0);
    }

    #[test]
    fn saturation_empty_tail() {
        let sched = GeneratorSchedule::balls(1, 0.25, 1.0, 100).unwrap();
        let centers = sample_centers(&SamplingDistribution::Uniform { dim: 1 }, 100, 3).unwrap();
        let f = DyadicSet::full(1, 5).unwrap();
        let rep = packing_saturation_check(
            &centers,
            &sched,
            &DisplacementFamily::translation(),
            &f,
            5,
            101,
        )
        .unwrap();
        assert_eq!(rep.first_saturation, None);
        assert_eq!(rep.terminal_ratio, 0.0);
    }

    #[test]
    fn inverse_family_translation_exact() {
        let rep = verify_inverse_family(&DisplacementFamily::translation(), 2, 1000, 5).unwrap();
        assert_eq!(rep.failures, 0);
        assert!(rep.max_recovery_error < 1e-12);
        assert!((rep.max_inverse_derivative_norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn inverse_family_nonlinear_contraction() {
        let disp = DisplacementFamily::nonlinear(0.02, 1).unwrap();
        let rep = verify_inverse_family(&disp, 1, 10_000, 5).unwrap();
        assert_eq!(rep.failures, 0);
        assert!(rep.max_recovery_error < 1e-10, "err {}", rep.max_recovery_error);
        let c2 = disp.c_u() * disp.c_u();
        assert!(rep.max_inverse_derivative_norm <= c2 + 1e-6);
    }

    #[test]
    fn nonlinear_requires_contraction() {
        assert!(DisplacementFamily::nonlinear(0.1, 1).is_err());
        assert!(DisplacementFamily::nonlinear(0.02, 1).is_ok());
    }

    #[test]
    fn density_interaction_full_torus() {
        let f = DyadicSet::full(1, 6).unwrap();
        let e = rasterize_ball(&TorusPoint::new(vec![0.0]), 1.0 / 64.0, 8, RasterMode::Outer)
            .unwrap();
        let rep =
            density_interaction_check(&f, &DisplacementFamily::translation(), &e, 0.2, 100, 50, 9)
                .unwrap();
        assert_eq!(rep.fraction, 1.0);
        assert!(rep.passes);
    }

    #[test]
    fn density_interaction_vacuous_on_null_set() {
        let f = DyadicSet::full(1, 4).unwrap();
        let e = DyadicSet::empty(1).unwrap();
        let rep =
            density_interaction_check(&f, &DisplacementFamily::translation(), &e, 0.2, 10, 10, 9)
                .unwrap();
        assert!(rep.vacuous);
    }

    #[test]
    fn density_interaction_fat_cantor() {
        // positive-density set: fraction >= 1 - eps for small enough balls
        let f = fat_cantor(&[0.25], 12).unwrap();
        let e =
            rasterize_ball(&TorusPoint::new(vec![0.0]), (0.5f64).powi(6), 12, RasterMode::Outer)
                .unwrap();
        let rep =
            density_interaction_check(&f, &DisplacementFamily::translation(), &e, 0.2, 400, 200, 31)
                .unwrap();
        assert!(rep.passes, "fraction {} vs {}", rep.fraction, rep.threshold);
    }
}
