//! Gauge-kernel energies of dyadic sets and cell-weighted measures.
//!
//! Every energy reduces to pair energies `e(ℓ, m) = ∬_{A×B} h(|x-y|)^-1`
//! over cells at torus offset `m`. Pair energies carry rigorous interval
//! enclosures: monotone kernel bounds from the per-axis min/max torus
//! distances, a midpoint rule with a second-order remainder on well
//! separated power-kernel pairs, and a rearrangement bound on touching
//! pairs. A pair whose enclosure is wider than the requested relative
//! tolerance is subdivided; since all terms are positive, per-offset
//! relative tolerance gives the same relative tolerance for every sum.
//!
//! For power kernels the pair energy is scale-free,
//! `e(ℓ, m) = 2^{-ℓ(2d-s)} κ(m)`, and the dimensionless table κ is shared
//! across levels. Same-cell and touching offsets satisfy the exact scaling
//! identities `κ(m) = 2^{s-2d} Σ mult(ε) κ(|2m+ε|)` in which κ(m) reappears
//! on the right; solving the linear fixed point removes the kernel
//! singularity analytically (κ(0) is the unit-cube self-energy constant,
//! computed once per (d, s) at tolerance 1e-4 and cached).

use std::collections::HashMap;
use std::sync::Mutex;

use thiserror::Error;

use crate::dyadic::{cell_side, DyadicCell, DyadicError, DyadicSet, MAX_DIM};
use crate::gauge::{unit_ball_volume, Gauge};
use crate::grid_fft;

/// Default relative tolerance; one order below all acceptance tolerances.
pub const DEFAULT_REL_TOL: f64 = 1e-3;

/// κ entries are computed once per (d, s); keep them below every caller tol.
const KAPPA_TOL: f64 = 1e-4;

const DIRECT_PAIR_LIMIT: usize = 2048;
const MAX_GRID_CELLS: u64 = 1 << 22;
const MAX_SUBDIVISION_DEPTH: u8 = 48;

#[derive(Debug, Error)]
pub enum EnergyError {
    #[error("pair quadrature did not converge: {0}")]
    ConvergenceNotReached(String),
    #[error("cells at different levels: {0} vs {1}")]
    LevelMismatch(u8, u8),
    #[error("gauge dimension {0} does not match set dimension {1}")]
    DimMismatch(usize, usize),
    #[error("dense offset grid too large: {0} cells (cap {MAX_GRID_CELLS})")]
    GridTooLarge(u64),
    #[error("invalid measure: {0}")]
    BadMeasure(String),
    #[error(transparent)]
    Dyadic(#[from] DyadicError),
}

/// Canonical torus offset between two cells of a common level: per-axis
/// min-image absolute offsets, sorted descending.
type Offset = [u32; MAX_DIM];

fn pack(m: &Offset) -> u64 {
    m[0] as u64 | (m[1] as u64) << 24 | (m[2] as u64) << 48
}

fn canonicalize(dim: usize, level: u8, raw: &[i64]) -> Offset {
    let n = 1i64 << level;
    let mut m = [0u32; MAX_DIM];
    for a in 0..dim {
        let v = raw[a].rem_euclid(n);
        m[a] = v.min(n - v) as u32;
    }
    m[..dim].sort_unstable_by(|a, b| b.cmp(a));
    m
}

/// Per-axis distance bounds for a canonical offset at a level.
fn distance_bounds(dim: usize, level: u8, m: &Offset) -> (f64, f64) {
    let w = cell_side(level);
    let mut lo_sq = 0.0;
    let mut hi_sq = 0.0;
    for &mi in m.iter().take(dim) {
        let lo = mi.saturating_sub(1) as f64 * w;
        let hi = ((mi + 1) as f64 * w).min(0.5);
        lo_sq += lo * lo;
        hi_sq += hi * hi;
    }
    (lo_sq.sqrt(), hi_sq.sqrt())
}

/// Whether the pair never feels the torus cut locus, so Euclidean formulas
/// (and power-kernel scale invariance) apply.
fn euclidean_safe(dim: usize, level: u8, m: &Offset) -> bool {
    let half = 1u64 << level.saturating_sub(1);
    level >= 1 && m.iter().take(dim).all(|&mi| (mi as u64 + 1) <= half)
}

fn touching(dim: usize, m: &Offset) -> bool {
    m.iter().take(dim).all(|&mi| mi <= 1)
}

struct Memos {
    kappa: HashMap<u64, f64>,
    pairs: HashMap<(u8, u64), f64>,
}

/// Energy evaluator for one gauge at one relative tolerance.
///
/// All methods are pure with respect to the inputs; the internal caches are
/// behind a mutex, so a shared engine serialises its callers. Independent
/// workers should hold their own engine (construction is cheap, the pair
/// tables rebuild on demand).
pub struct EnergyEngine {
    gauge: Gauge,
    rel_tol: f64,
    memos: Mutex<Memos>,
}

impl EnergyEngine {
    pub fn new(gauge: Gauge) -> Self {
        Self::with_tol(gauge, DEFAULT_REL_TOL)
    }

    pub fn with_tol(gauge: Gauge, rel_tol: f64) -> Self {
        EnergyEngine {
            gauge,
            rel_tol: rel_tol.max(1e-9),
            memos: Mutex::new(Memos { kappa: HashMap::new(), pairs: HashMap::new() }),
        }
    }

    pub fn gauge(&self) -> &Gauge {
        &self.gauge
    }

    pub fn rel_tol(&self) -> f64 {
        self.rel_tol
    }

    /// `∬_{A×B} h(|x-y|)^-1` over two cells of a common level (torus metric).
    /// Divergent cases (power kernel with s ≥ d on touching cells) come back
    /// as +inf.
    pub fn cell_pair_energy(&self, a: &DyadicCell, b: &DyadicCell) -> Result<f64, EnergyError> {
        if a.level() != b.level() {
            return Err(EnergyError::LevelMismatch(a.level(), b.level()));
        }
        if a.dim() != b.dim() || a.dim() != self.gauge.dim() {
            return Err(EnergyError::DimMismatch(self.gauge.dim(), a.dim()));
        }
        let dim = a.dim();
        let raw: Vec<i64> =
            (0..dim).map(|i| a.index()[i] as i64 - b.index()[i] as i64).collect();
        let m = canonicalize(dim, a.level(), &raw);
        let mut memos = self.memos.lock().unwrap();
        self.offset_value(&mut memos, dim, a.level(), &m)
    }

    /// `I_h(F)`: the h-energy of a dyadic set.
    pub fn set_energy(&self, f: &DyadicSet) -> Result<f64, EnergyError> {
        Ok(self.set_energy_split(f, 0.0)?.1)
    }

    /// Split `I_h(F)` into the mass on pairs at min distance < `near_dist`
    /// and the total. Same-cell pairs always count as near when
    /// `near_dist > 0`.
    pub fn set_energy_split(
        &self,
        f: &DyadicSet,
        near_dist: f64,
    ) -> Result<(f64, f64), EnergyError> {
        if f.dim() != self.gauge.dim() {
            return Err(EnergyError::DimMismatch(self.gauge.dim(), f.dim()));
        }
        if f.is_empty() {
            return Ok((0.0, 0.0));
        }
        if self.power_divergent() {
            return Ok((f64::INFINITY, f64::INFINITY));
        }
        let refined;
        let f = if f.level() == 0 {
            refined = f.refine(1)?;
            &refined
        } else {
            f
        };
        let mut memos = self.memos.lock().unwrap();
        let mut near = 0.0;
        let mut total = 0.0;
        let dim = f.dim();
        let level = f.level();
        for_each_offset_weight(f, None, &mut |m: &Offset, count: f64| {
            let e = self.offset_value(&mut memos, dim, level, m)?;
            let term = count * e;
            total += term;
            if distance_bounds(dim, level, m).0 < near_dist {
                near += term;
            }
            Ok(())
        })?;
        Ok((near, total))
    }

    /// `I_h(μ)` for a cell-weighted measure.
    pub fn measure_energy(&self, mu: &DiscreteMeasure) -> Result<f64, EnergyError> {
        let f = mu.support();
        if f.dim() != self.gauge.dim() {
            return Err(EnergyError::DimMismatch(self.gauge.dim(), f.dim()));
        }
        if mu.total_mass() == 0.0 {
            return Ok(0.0);
        }
        if self.power_divergent() {
            return Ok(f64::INFINITY);
        }
        debug_assert!(f.level() >= 1 || f.cell_count() <= 1);
        let mu_ref;
        let mu = if f.level() == 0 && !f.is_empty() {
            mu_ref = mu.refined(1)?;
            &mu_ref
        } else {
            mu
        };
        let f = mu.support();
        let dim = f.dim();
        let level = f.level();
        let vol = cell_side(level).powi(dim as i32);
        let mut memos = self.memos.lock().unwrap();
        let mut total = 0.0;
        for_each_offset_weight(f, Some(mu.weights()), &mut |m: &Offset, weight: f64| {
            total += weight * self.offset_value(&mut memos, dim, level, m)?;
            Ok(())
        })?;
        Ok(total / (vol * vol))
    }

    /// `g_h(F) = L(F)^2 / I_h(F)`, with g = 0 when the set is null or the
    /// energy diverges.
    pub fn g_value(&self, f: &DyadicSet) -> Result<f64, EnergyError> {
        let l = f.measure();
        if l == 0.0 {
            return Ok(0.0);
        }
        let i = self.set_energy(f)?;
        if i.is_infinite() {
            return Ok(0.0);
        }
        Ok(l * l / i)
    }

    /// Unit-scale self-energy constant of the cube, `I_s([0,1]^d)`, for power
    /// gauges.
    pub fn unit_cube_constant(&self) -> Result<f64, EnergyError> {
        let mut memos = self.memos.lock().unwrap();
        self.kappa(&mut memos, [0; MAX_DIM])
    }

    /// Kernel matrix row generator for the Γ solver: `e(δ)/vol²` over the
    /// full linear grid at `level`.
    pub fn kernel_grid(&self, dim: usize, level: u8) -> Result<Vec<f64>, EnergyError> {
        if dim != self.gauge.dim() {
            return Err(EnergyError::DimMismatch(self.gauge.dim(), dim));
        }
        let n = 1usize << level;
        let grid_len = (n as u64).pow(dim as u32);
        if grid_len > MAX_GRID_CELLS {
            return Err(EnergyError::GridTooLarge(grid_len));
        }
        let vol = cell_side(level).powi(dim as i32);
        let mut memos = self.memos.lock().unwrap();
        let mut out = Vec::with_capacity(grid_len as usize);
        for lin in 0..grid_len as usize {
            let m = linear_to_offset(dim, level, n, lin);
            out.push(self.offset_value(&mut memos, dim, level, &m)? / (vol * vol));
        }
        Ok(out)
    }

    fn power_divergent(&self) -> bool {
        match self.gauge.power_exponent() {
            Some(s) => s >= self.gauge.dim() as f64,
            None => false,
        }
    }

    /// Pair energy for a canonical offset at a level.
    fn offset_value(
        &self,
        memos: &mut Memos,
        dim: usize,
        level: u8,
        m: &Offset,
    ) -> Result<f64, EnergyError> {
        if let Some(s) = self.gauge.power_exponent() {
            if s >= dim as f64 && touching(dim, m) {
                return Ok(f64::INFINITY);
            }
            if euclidean_safe(dim, level, m) {
                let k = self.kappa(memos, *m)?;
                let w = cell_side(level);
                return Ok(w.powf(2.0 * dim as f64 - s) * k);
            }
            return self.leveled(memos, dim, level, m, 0);
        }
        if dim == 1 {
            return Ok(self.tent_energy_1d(level, m[0]));
        }
        self.leveled(memos, dim, level, m, 0)
    }

    /// Dimensionless pair energy κ(m) for power kernels (unit cells at
    /// integer offset m, Euclidean metric).
    fn kappa(&self, memos: &mut Memos, m: Offset) -> Result<f64, EnergyError> {
        let key = pack(&m);
        if let Some(&v) = memos.kappa.get(&key) {
            return Ok(v);
        }
        let dim = self.gauge.dim();
        let s = self.gauge.power_exponent().expect("kappa is power-kernel only");
        let is_touching = touching(dim, &m);
        if !is_touching {
            if let Some(v) = self.kappa_enclosure(dim, s, &m) {
                memos.kappa.insert(key, v);
                return Ok(v);
            }
        }
        // Subdivide both cells; children of offset m live at offsets 2m+ε.
        // Touching offsets reproduce themselves among their children, which
        // yields a linear fixed point instead of an infinite recursion.
        let c = (2f64).powf(s - 2.0 * dim as f64);
        let mut self_mult = 0.0;
        let mut rest = 0.0;
        let mut eps = [-1i64; MAX_DIM];
        loop {
            let mut mult = 1.0;
            let mut child = [0u32; MAX_DIM];
            for a in 0..dim {
                if eps[a] == 0 {
                    mult *= 2.0;
                }
                child[a] = (2 * m[a] as i64 + eps[a]).unsigned_abs() as u32;
            }
            child[..dim].sort_unstable_by(|x, y| y.cmp(x));
            if child == m {
                self_mult += mult;
            } else {
                rest += mult * self.kappa(memos, child)?;
            }
            // odometer over ε ∈ {-1,0,1}^d
            let mut a = 0;
            loop {
                if a == dim {
                    let v = c * rest / (1.0 - c * self_mult);
                    memos.kappa.insert(key, v);
                    return Ok(v);
                }
                eps[a] += 1;
                if eps[a] <= 1 {
                    break;
                }
                eps[a] = -1;
                a += 1;
            }
        }
    }

    /// Rigorous enclosure of κ(m) for separated offsets; `None` when wider
    /// than the κ tolerance.
    fn kappa_enclosure(&self, dim: usize, s: f64, m: &Offset) -> Option<f64> {
        let mut lo_sq = 0.0;
        let mut hi_sq = 0.0;
        let mut mid_sq = 0.0;
        for &mi in m.iter().take(dim) {
            let lo = mi.saturating_sub(1) as f64;
            let hi = (mi + 1) as f64;
            lo_sq += lo * lo;
            hi_sq += hi * hi;
            mid_sq += (mi as f64) * (mi as f64);
        }
        let dmin = lo_sq.sqrt();
        if dmin <= 0.0 {
            return None;
        }
        let mut lo = hi_sq.sqrt().powf(-s);
        let mut hi = dmin.powf(-s);
        // midpoint rule over the correlation tent: per-axis variance 1/6
        let mid2 = mid_sq.sqrt().powf(-s);
        let rem = s * (s + 1.0) * dim as f64 / 12.0 * dmin.powf(-s - 2.0);
        lo = lo.max(mid2 - rem);
        hi = hi.min(mid2 + rem);
        let mid = 0.5 * (lo + hi);
        if hi - lo <= 2.0 * KAPPA_TOL * mid {
            Some(mid)
        } else {
            None
        }
    }

    /// Level-aware recursive evaluation; handles offsets near the torus cut
    /// locus for power kernels and all offsets for non-power kernels in
    /// dimension ≥ 2.
    fn leveled(
        &self,
        memos: &mut Memos,
        dim: usize,
        level: u8,
        m: &Offset,
        depth: u8,
    ) -> Result<f64, EnergyError> {
        let key = (level, pack(m));
        if let Some(&v) = memos.pairs.get(&key) {
            return Ok(v);
        }
        let w = cell_side(level);
        let vol = w.powi(dim as i32);
        let (dmin, dmax) = distance_bounds(dim, level, m);
        let lo = vol * vol * self.gauge.kernel(dmax);
        let hi = if dmin > 0.0 {
            vol * vol * self.gauge.kernel(dmin)
        } else {
            let rho = w / unit_ball_volume(dim).powf(1.0 / dim as f64);
            match self.gauge.radial_ball_integral(rho) {
                Some(r) => vol * r,
                None => {
                    memos.pairs.insert(key, f64::INFINITY);
                    return Ok(f64::INFINITY);
                }
            }
        };
        let mid = 0.5 * (lo + hi);
        if hi - lo <= 2.0 * self.rel_tol * mid || level >= MAX_SUBDIVISION_DEPTH {
            if hi - lo > 2.0 * self.rel_tol * mid {
                return Err(EnergyError::ConvergenceNotReached(format!(
                    "pair offset {:?} at level {level}: enclosure [{lo:.3e}, {hi:.3e}]",
                    &m[..dim]
                )));
            }
            memos.pairs.insert(key, mid);
            return Ok(mid);
        }
        if depth >= MAX_SUBDIVISION_DEPTH {
            return Err(EnergyError::ConvergenceNotReached(format!(
                "offset {:?} at level {level}",
                &m[..dim]
            )));
        }
        let modulus = 1i64 << (level + 1);
        let mut total = 0.0;
        let mut eps = [-1i64; MAX_DIM];
        loop {
            let mut mult = 1.0;
            let mut raw = [0i64; MAX_DIM];
            for a in 0..dim {
                if eps[a] == 0 {
                    mult *= 2.0;
                }
                let v = (2 * m[a] as i64 + eps[a]).rem_euclid(modulus);
                raw[a] = v.min(modulus - v);
            }
            let mut child = [0u32; MAX_DIM];
            for a in 0..dim {
                child[a] = raw[a] as u32;
            }
            child[..dim].sort_unstable_by(|x, y| y.cmp(x));
            let v = if self.gauge.power_exponent().is_some()
                && euclidean_safe(dim, level + 1, &child)
            {
                let s = self.gauge.power_exponent().unwrap();
                cell_side(level + 1).powf(2.0 * dim as f64 - s) * self.kappa(memos, child)?
            } else {
                self.leveled(memos, dim, level + 1, &child, depth + 1)?
            };
            total += mult * v;
            let mut a = 0;
            loop {
                if a == dim {
                    memos.pairs.insert(key, total);
                    return Ok(total);
                }
                eps[a] += 1;
                if eps[a] <= 1 {
                    break;
                }
                eps[a] = -1;
                a += 1;
            }
        }
    }

    /// Direct 1-d pair energy for arbitrary gauges: integrate the tent
    /// correlation of the two cells against the kernel.
    fn tent_energy_1d(&self, level: u8, m: u32) -> f64 {
        let w = cell_side(level);
        let kernel = |u: f64| self.gauge.kernel(u.min(1.0 - u));
        if m == 0 {
            // 2 ∫_0^w (w-u) k(u) du with an analytic head on [0, a]
            let a = w * 1e-8;
            let head = match self.gauge.radial_ball_integral(a) {
                Some(r) => (w - 0.5 * a) * r, // surf = 2 in d=1, ∫_0^a k = r/2
                None => return f64::INFINITY,
            };
            let body = adaptive_simpson(
                &|u: f64| 2.0 * (w - u) * kernel(u),
                a,
                w,
                self.rel_tol * 1e-2,
            );
            return head + body;
        }
        let c = m as f64 * w;
        let f = |u: f64| {
            let t = w - (u - c).abs();
            if t <= 0.0 || u <= 0.0 {
                0.0
            } else {
                t * kernel(u)
            }
        };
        let tol = self.rel_tol * 1e-2;
        adaptive_simpson(&f, c - w, c, tol) + adaptive_simpson(&f, c, c + w, tol)
    }
}

fn linear_to_offset(dim: usize, level: u8, n: usize, lin: usize) -> Offset {
    let mut m = [0u32; MAX_DIM];
    let mut rest = lin;
    for mi in m.iter_mut().take(dim) {
        let v = rest % n;
        rest /= n;
        *mi = v.min(n - v) as u32;
    }
    m[..dim].sort_unstable_by(|a, b| b.cmp(a));
    debug_assert_eq!(level as usize, n.trailing_zeros() as usize);
    m
}

/// Visit every canonical offset with its total ordered-pair weight
/// `Σ_{(a,b): offset = m} w_a w_b` (w ≡ 1 for plain counts), in a
/// deterministic order. Strategy: direct double loop for small sets, FFT
/// autocorrelation on a bounding-box grid when the set sits in half the
/// torus, FFT on the full grid otherwise.
fn for_each_offset_weight(
    f: &DyadicSet,
    weights: Option<&[f64]>,
    visit: &mut dyn FnMut(&Offset, f64) -> Result<(), EnergyError>,
) -> Result<(), EnergyError> {
    let dim = f.dim();
    let level = f.level();
    let n = 1usize << level;
    if f.cell_count() <= DIRECT_PAIR_LIMIT {
        let idx: Vec<[u32; MAX_DIM]> = f.iter_indices().collect();
        let mut acc: HashMap<u64, (Offset, f64)> = HashMap::new();
        let mut raw = [0i64; MAX_DIM];
        for i in 0..idx.len() {
            let wi = weights.map_or(1.0, |w| w[i]);
            if wi == 0.0 {
                continue;
            }
            for j in i..idx.len() {
                let wj = weights.map_or(1.0, |w| w[j]);
                if wj == 0.0 {
                    continue;
                }
                for (a, r) in raw.iter_mut().enumerate().take(dim) {
                    *r = idx[i][a] as i64 - idx[j][a] as i64;
                }
                let m = canonicalize(dim, level, &raw[..dim]);
                let wt = if i == j { wi * wj } else { 2.0 * wi * wj };
                acc.entry(pack(&m)).and_modify(|e| e.1 += wt).or_insert((m, wt));
            }
        }
        let mut entries: Vec<(u64, (Offset, f64))> = acc.into_iter().collect();
        entries.sort_unstable_by_key(|e| e.0);
        for (_, (m, wt)) in entries {
            visit(&m, wt)?;
        }
        return Ok(());
    }
    // plain (unwrapped) bounding box; a set confined to half the torus gets
    // a padded local grid, which is much smaller for pieces of a cube
    let mut mins = [u32::MAX; MAX_DIM];
    let mut maxs = [0u32; MAX_DIM];
    for idx in f.iter_indices() {
        for a in 0..dim {
            mins[a] = mins[a].min(idx[a]);
            maxs[a] = maxs[a].max(idx[a]);
        }
    }
    let span = (0..dim).map(|a| (maxs[a] - mins[a] + 1) as usize).max().unwrap();
    let p = (2 * span).next_power_of_two();
    let local_ok = span <= n / 2 && p < n;
    let (grid_n, base) = if local_ok { (p, mins) } else { (n, [0u32; MAX_DIM]) };
    let grid_len = (grid_n as u64).pow(dim as u32);
    if grid_len > MAX_GRID_CELLS {
        return Err(EnergyError::GridTooLarge(grid_len));
    }
    let mut grid = vec![0.0f64; grid_len as usize];
    for (i, idx) in f.iter_indices().enumerate() {
        let w = weights.map_or(1.0, |w| w[i]);
        let mut lin = 0usize;
        for a in (0..dim).rev() {
            lin = lin * grid_n + (idx[a] - base[a]) as usize;
        }
        grid[lin] = w;
    }
    let corr = grid_fft::autocorrelation(&grid, dim, grid_n);
    let thresh = if weights.is_some() { 1e-300 } else { 0.5 };
    for (lin, &c) in corr.iter().enumerate() {
        if c.abs() < thresh {
            continue;
        }
        // local min-image offsets never exceed span <= n/2, so they agree
        // with the torus min-image
        let mut m = [0u32; MAX_DIM];
        let mut rest = lin;
        for mi in m.iter_mut().take(dim) {
            let v = rest % grid_n;
            rest /= grid_n;
            *mi = v.min(grid_n - v) as u32;
        }
        m[..dim].sort_unstable_by(|a, b| b.cmp(a));
        let w = if weights.is_some() { c } else { c.round() };
        visit(&m, w)?;
    }
    Ok(())
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> f64 {
    fn simpson(a: f64, fa: f64, b: f64, fb: f64, fm: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn rec(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        fm: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(a, fa, m, fm, flm);
        let right = simpson(m, fm, b, fb, frm);
        let err = left + right - whole;
        if depth >= 40 || err.abs() <= 15.0 * tol {
            return left + right + err / 15.0;
        }
        rec(f, a, fa, m, fm, flm, left, tol * 0.5, depth + 1)
            + rec(f, m, fm, b, fb, frm, right, tol * 0.5, depth + 1)
    }
    if b <= a {
        return 0.0;
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = simpson(a, fa, b, fb, fm);
    let tol = whole.abs().max(1e-300) * rel_tol;
    rec(f, a, fa, b, fb, fm, whole, tol, 0)
}

/// A nonnegative cell-weighted measure: weight = mass carried by each
/// support cell, density uniform within a cell.
#[derive(Debug, Clone)]
pub struct DiscreteMeasure {
    support: DyadicSet,
    weights: Vec<f64>,
    total_mass: f64,
}

impl DiscreteMeasure {
    pub fn new(support: DyadicSet, weights: Vec<f64>) -> Result<Self, EnergyError> {
        if weights.len() != support.cell_count() {
            return Err(EnergyError::BadMeasure(format!(
                "{} weights for {} cells",
                weights.len(),
                support.cell_count()
            )));
        }
        if weights.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
            return Err(EnergyError::BadMeasure("weights must be finite and >= 0".into()));
        }
        let total_mass = weights.iter().sum();
        Ok(DiscreteMeasure { support, weights, total_mass })
    }

    /// The normalised restriction of Lebesgue measure, `L(F)^-1 L|_F`.
    pub fn uniform_probability(support: &DyadicSet) -> Result<Self, EnergyError> {
        if support.is_empty() {
            return Err(EnergyError::BadMeasure("uniform measure on the empty set".into()));
        }
        let n = support.cell_count();
        DiscreteMeasure::new(support.clone(), vec![1.0 / n as f64; n])
    }

    pub fn support(&self) -> &DyadicSet {
        &self.support
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn is_probability(&self) -> bool {
        (self.total_mass - 1.0).abs() < 1e-9
    }

    /// Same measure expressed on a finer grid.
    pub fn refined(&self, level: u8) -> Result<Self, EnergyError> {
        let support = self.support.refine(level)?;
        let fanout = support.cell_count() / self.support.cell_count().max(1);
        let mut weights = Vec::with_capacity(support.cell_count());
        for &w in &self.weights {
            weights.extend(std::iter::repeat(w / fanout as f64).take(fanout));
        }
        DiscreteMeasure::new(support, weights)
    }
}
