//! Dyadic-cell subsets of the d-dimensional torus.
//!
//! A [`DyadicSet`] is a finite union of half-open level-ℓ cells
//! `[0, 2^-ℓ)^d + 2^-ℓ·α` stored as sorted Morton keys, so set algebra is a
//! sorted merge, refinement is a contiguous key expansion, and Lebesgue
//! measure is exact. Torus wraparound is index arithmetic mod `2^ℓ`
//! throughout.
//!
//! Resolution is capped per dimension (ℓ ≤ 24 for d=1, 12 for d=2, 8 for
//! d=3) and every constructor enforces a 2^24 cell budget; both limits
//! produce errors rather than silent truncation.

use thiserror::Error;

/// Highest supported ambient dimension.
pub const MAX_DIM: usize = 3;

/// Cell budget shared by all constructors (matches a full grid at the level cap).
pub const MAX_CELLS: usize = 1 << 24;

/// Default level cap per dimension (index 0 unused).
const LEVEL_CAP: [u8; 4] = [0, 24, 12, 8];

#[derive(Debug, Error)]
pub enum DyadicError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("dimension {0} unsupported (expected 1..={MAX_DIM})")]
    BadDimension(usize),
    #[error("level {requested} exceeds cap {cap} for dimension {dim}")]
    LevelCap { requested: u8, cap: u8, dim: usize },
    #[error("cell budget exceeded: {needed} cells, cap {MAX_CELLS}")]
    CellBudget { needed: usize },
    #[error("cell index {0} out of range at level {1}")]
    IndexRange(u32, u8),
    #[error("coarsening from level {0} to {1} is not supported")]
    CoarsenUnsupported(u8, u8),
    #[error("gap schedule rejected: {0}")]
    GapSchedule(String),
    #[error("cubes overlap or do not fit in the torus")]
    CubesOverlap,
    #[error("invalid parameter: {0}")]
    BadParameter(String),
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

fn check_dim(dim: usize) -> Result<(), DyadicError> {
    if dim == 0 || dim > MAX_DIM {
        return Err(DyadicError::BadDimension(dim));
    }
    Ok(())
}

fn check_level(dim: usize, level: u8) -> Result<(), DyadicError> {
    check_dim(dim)?;
    let cap = LEVEL_CAP[dim];
    if level > cap {
        return Err(DyadicError::LevelCap { requested: level, cap, dim });
    }
    Ok(())
}

/// Resolution cap for a dimension.
pub fn level_cap(dim: usize) -> u8 {
    if dim == 0 || dim > MAX_DIM {
        return 0;
    }
    LEVEL_CAP[dim]
}

/// Side length `2^-level` of a cell.
pub fn cell_side(level: u8) -> f64 {
    (0.5f64).powi(level as i32)
}

/// Diameter `sqrt(d)·2^-level` of a cell.
pub fn cell_diam(dim: usize, level: u8) -> f64 {
    (dim as f64).sqrt() * cell_side(level)
}

/// A point of the torus R^d / Z^d; coordinates are reduced mod 1.
#[derive(Debug, Clone, PartialEq)]
pub struct TorusPoint {
    coords: Vec<f64>,
}

impl TorusPoint {
    pub fn new(coords: Vec<f64>) -> Self {
        let coords = coords
            .into_iter()
            .map(|c| {
                let r = c.rem_euclid(1.0);
                if r >= 1.0 { 0.0 } else { r }
            })
            .collect();
        TorusPoint { coords }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }
}

/// Distance between two angles of the circle R/Z.
pub fn circle_distance(a: f64, b: f64) -> f64 {
    let t = (a - b).rem_euclid(1.0);
    t.min(1.0 - t)
}

/// Geodesic (min over integer translates of the Euclidean) distance on the torus.
pub fn torus_distance(p: &TorusPoint, q: &TorusPoint) -> Result<f64, DyadicError> {
    if p.dim() != q.dim() {
        return Err(DyadicError::DimensionMismatch(p.dim(), q.dim()));
    }
    let sq: f64 = p
        .coords
        .iter()
        .zip(&q.coords)
        .map(|(&a, &b)| {
            let t = circle_distance(a, b);
            t * t
        })
        .sum();
    Ok(sq.sqrt())
}

/// Interleave `level` low bits of each coordinate into a Morton key.
pub fn morton_encode(dim: usize, level: u8, idx: &[u32]) -> u64 {
    let mut key = 0u64;
    for b in 0..level as usize {
        for (a, &x) in idx.iter().enumerate().take(dim) {
            key |= (((x >> b) & 1) as u64) << (b * dim + a);
        }
    }
    key
}

/// Inverse of [`morton_encode`].
pub fn morton_decode(dim: usize, level: u8, key: u64) -> [u32; MAX_DIM] {
    let mut idx = [0u32; MAX_DIM];
    for b in 0..level as usize {
        for (a, x) in idx.iter_mut().enumerate().take(dim) {
            *x |= (((key >> (b * dim + a)) & 1) as u32) << b;
        }
    }
    idx
}

/// One half-open dyadic cell `[0, 2^-level)^d + 2^-level · index`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DyadicCell {
    dim: usize,
    level: u8,
    index: [u32; MAX_DIM],
}

impl DyadicCell {
    pub fn new(dim: usize, level: u8, index: &[u32]) -> Result<Self, DyadicError> {
        check_level(dim, level)?;
        if index.len() != dim {
            return Err(DyadicError::DimensionMismatch(index.len(), dim));
        }
        let mut idx = [0u32; MAX_DIM];
        for (a, &x) in index.iter().enumerate() {
            if x >= (1u32 << level) {
                return Err(DyadicError::IndexRange(x, level));
            }
            idx[a] = x;
        }
        Ok(DyadicCell { dim, level, index: idx })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn level(&self) -> u8 {
        self.level
    }

    pub fn index(&self) -> &[u32] {
        &self.index[..self.dim]
    }

    pub fn morton(&self) -> u64 {
        morton_encode(self.dim, self.level, &self.index)
    }

    /// Corner with the smallest coordinates.
    pub fn corner(&self) -> TorusPoint {
        let w = cell_side(self.level);
        TorusPoint::new(self.index().iter().map(|&i| i as f64 * w).collect())
    }

    pub fn center(&self) -> TorusPoint {
        let w = cell_side(self.level);
        TorusPoint::new(self.index().iter().map(|&i| (i as f64 + 0.5) * w).collect())
    }
}

/// Inner or outer rasterization of an analytic shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RasterMode {
    /// Cells entirely inside the shape.
    Inner,
    /// Cells meeting the shape.
    Outer,
}

/// A measurable subset of the torus: a canonical (sorted, deduplicated)
/// union of level-ℓ dyadic cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DyadicSet {
    dim: usize,
    level: u8,
    cells: Vec<u64>,
}

/// Result of translating a set by a not-necessarily-grid-aligned vector.
#[derive(Debug, Clone)]
pub struct TranslateOutcome {
    pub set: DyadicSet,
    /// Grid shift actually applied, in cells per axis.
    pub shift: Vec<u32>,
    /// Torus distance between the requested vector and the applied shift,
    /// at most `sqrt(d)·2^-ℓ-1`.
    pub snap_error: f64,
}

impl DyadicSet {
    pub fn empty(dim: usize) -> Result<Self, DyadicError> {
        check_dim(dim)?;
        Ok(DyadicSet { dim, level: 0, cells: Vec::new() })
    }

    pub fn full(dim: usize, level: u8) -> Result<Self, DyadicError> {
        check_level(dim, level)?;
        let n = 1u64 << (dim as u32 * level as u32);
        if n as usize > MAX_CELLS {
            return Err(DyadicError::CellBudget { needed: n as usize });
        }
        Ok(DyadicSet { dim, level, cells: (0..n).collect() })
    }

    /// Build from index vectors; duplicates collapse, order is irrelevant.
    pub fn from_indices<I>(dim: usize, level: u8, indices: I) -> Result<Self, DyadicError>
    where
        I: IntoIterator,
        I::Item: AsRef<[u32]>,
    {
        check_level(dim, level)?;
        let mut cells = Vec::new();
        for iv in indices {
            let iv = iv.as_ref();
            if iv.len() != dim {
                return Err(DyadicError::DimensionMismatch(iv.len(), dim));
            }
            for &x in iv {
                if x >= (1u32 << level) {
                    return Err(DyadicError::IndexRange(x, level));
                }
            }
            cells.push(morton_encode(dim, level, iv));
            if cells.len() > MAX_CELLS {
                return Err(DyadicError::CellBudget { needed: cells.len() });
            }
        }
        cells.sort_unstable();
        cells.dedup();
        Ok(DyadicSet { dim, level, cells })
    }

    pub(crate) fn from_morton(dim: usize, level: u8, mut cells: Vec<u64>) -> Result<Self, DyadicError> {
        check_level(dim, level)?;
        if cells.len() > MAX_CELLS {
            return Err(DyadicError::CellBudget { needed: cells.len() });
        }
        cells.sort_unstable();
        cells.dedup();
        Ok(DyadicSet { dim, level, cells })
    }

    /// Build directly from Morton keys at the given level.
    pub fn from_sorted_keys(dim: usize, level: u8, keys: Vec<u64>) -> Result<Self, DyadicError> {
        let limit = 1u64 << (dim as u32 * level as u32);
        if let Some(&bad) = keys.iter().find(|&&k| k >= limit) {
            return Err(DyadicError::IndexRange(bad.min(u32::MAX as u64) as u32, level));
        }
        Self::from_morton(dim, level, keys)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn level(&self) -> u8 {
        self.level
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Sorted Morton keys of the member cells.
    pub fn keys(&self) -> &[u64] {
        &self.cells
    }

    /// Decoded index vectors, in key order.
    pub fn iter_indices(&self) -> impl Iterator<Item = [u32; MAX_DIM]> + '_ {
        self.cells.iter().map(move |&k| morton_decode(self.dim, self.level, k))
    }

    /// Exact Lebesgue measure `|cells| · 2^-ℓd`.
    pub fn measure(&self) -> f64 {
        self.cells.len() as f64 * cell_side(self.level).powi(self.dim as i32)
    }

    /// Re-express at a finer level; the set of points is unchanged.
    pub fn refine(&self, level: u8) -> Result<Self, DyadicError> {
        if level < self.level {
            return Err(DyadicError::CoarsenUnsupported(self.level, level));
        }
        check_level(self.dim, level)?;
        if level == self.level {
            return Ok(self.clone());
        }
        let shift = (self.dim as u32) * (level - self.level) as u32;
        let fanout = 1u64 << shift;
        let needed = self.cells.len().saturating_mul(fanout as usize);
        if needed > MAX_CELLS {
            return Err(DyadicError::CellBudget { needed });
        }
        // Morton children of a cell form one contiguous key run, so the
        // refined vector is already sorted.
        let mut cells = Vec::with_capacity(needed);
        for &k in &self.cells {
            let base = k << shift;
            cells.extend(base..base + fanout);
        }
        Ok(DyadicSet { dim: self.dim, level, cells })
    }

    fn co_refined(&self, other: &Self) -> Result<(Self, Self), DyadicError> {
        if self.dim != other.dim {
            return Err(DyadicError::DimensionMismatch(self.dim, other.dim));
        }
        let level = self.level.max(other.level);
        Ok((self.refine(level)?, other.refine(level)?))
    }

    pub fn union(&self, other: &Self) -> Result<Self, DyadicError> {
        let (a, b) = self.co_refined(other)?;
        let mut cells = Vec::with_capacity(a.cells.len() + b.cells.len());
        let (mut i, mut j) = (0, 0);
        while i < a.cells.len() && j < b.cells.len() {
            let (x, y) = (a.cells[i], b.cells[j]);
            cells.push(x.min(y));
            if x <= y {
                i += 1;
            }
            if y <= x {
                j += 1;
            }
        }
        cells.extend_from_slice(&a.cells[i..]);
        cells.extend_from_slice(&b.cells[j..]);
        if cells.len() > MAX_CELLS {
            return Err(DyadicError::CellBudget { needed: cells.len() });
        }
        Ok(DyadicSet { dim: a.dim, level: a.level, cells })
    }

    pub fn intersect(&self, other: &Self) -> Result<Self, DyadicError> {
        let (a, b) = self.co_refined(other)?;
        let mut cells = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < a.cells.len() && j < b.cells.len() {
            match a.cells[i].cmp(&b.cells[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    cells.push(a.cells[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        Ok(DyadicSet { dim: a.dim, level: a.level, cells })
    }

    pub fn difference(&self, other: &Self) -> Result<Self, DyadicError> {
        let (a, b) = self.co_refined(other)?;
        let mut cells = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < a.cells.len() {
            if j >= b.cells.len() || a.cells[i] < b.cells[j] {
                cells.push(a.cells[i]);
                i += 1;
            } else if a.cells[i] == b.cells[j] {
                i += 1;
                j += 1;
            } else {
                j += 1;
            }
        }
        Ok(DyadicSet { dim: a.dim, level: a.level, cells })
    }

    pub fn complement(&self) -> Result<Self, DyadicError> {
        let full = DyadicSet::full(self.dim, self.level)?;
        full.difference(self)
    }

    /// Translate by `v`, snapping `v` to the grid at this set's level.
    pub fn translate(&self, v: &TorusPoint) -> Result<TranslateOutcome, DyadicError> {
        if v.dim() != self.dim {
            return Err(DyadicError::DimensionMismatch(v.dim(), self.dim));
        }
        let n = 1u64 << self.level;
        let w = cell_side(self.level);
        let mut shift = Vec::with_capacity(self.dim);
        let mut err_sq = 0.0;
        for &c in v.coords() {
            let k = ((c / w).round() as i64).rem_euclid(n as i64) as u32;
            let e = circle_distance(c, k as f64 * w);
            err_sq += e * e;
            shift.push(k);
        }
        let mut cells: Vec<u64> = self
            .iter_indices()
            .map(|idx| {
                let mut t = [0u32; MAX_DIM];
                for a in 0..self.dim {
                    t[a] = (idx[a].wrapping_add(shift[a])) & (n as u32 - 1);
                }
                morton_encode(self.dim, self.level, &t)
            })
            .collect();
        cells.sort_unstable();
        Ok(TranslateOutcome {
            set: DyadicSet { dim: self.dim, level: self.level, cells },
            shift,
            snap_error: err_sq.sqrt(),
        })
    }

    /// `N*_ℓ`: number of level-ℓ cubes whose intersection with the set has
    /// positive measure.
    pub fn count_positive_cells(&self, level: u8) -> u64 {
        if self.cells.is_empty() {
            return 0;
        }
        if level >= self.level {
            let shift = (self.dim as u32) * (level - self.level) as u32;
            return (self.cells.len() as u64) << shift;
        }
        let shift = (self.dim as u32) * (self.level - level) as u32;
        let mut count = 1u64;
        let mut prev = self.cells[0] >> shift;
        for &k in &self.cells[1..] {
            let p = k >> shift;
            if p != prev {
                count += 1;
                prev = p;
            }
        }
        count
    }

    /// Whether the cell containing `p` belongs to the set.
    pub fn contains_point(&self, p: &TorusPoint) -> Result<bool, DyadicError> {
        if p.dim() != self.dim {
            return Err(DyadicError::DimensionMismatch(p.dim(), self.dim));
        }
        let n = 1u64 << self.level;
        let mut idx = [0u32; MAX_DIM];
        for (a, &c) in p.coords().iter().enumerate() {
            idx[a] = ((c * n as f64).floor() as u64).min(n - 1) as u32;
        }
        let key = morton_encode(self.dim, self.level, &idx[..self.dim]);
        Ok(self.cells.binary_search(&key).is_ok())
    }

    /// Text serialization: header `d ℓ count`, then one index vector per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("{} {} {}\n", self.dim, self.level, self.cells.len()));
        for idx in self.iter_indices() {
            let parts: Vec<String> = idx[..self.dim].iter().map(|x| x.to_string()).collect();
            out.push_str(&parts.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn from_text(s: &str) -> Result<Self, DyadicError> {
        let mut lines = s.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or(DyadicError::Parse { line: 1, msg: "empty input".into() })?;
        let head: Vec<&str> = header.split_whitespace().collect();
        if head.len() != 3 {
            return Err(DyadicError::Parse { line: 1, msg: "expected `d level count`".into() });
        }
        let parse =
            |s: &str, line: usize| -> Result<u64, DyadicError> {
                s.parse().map_err(|_| DyadicError::Parse { line, msg: format!("bad integer `{s}`") })
            };
        let dim = parse(head[0], 1)? as usize;
        let level = parse(head[1], 1)? as u8;
        let count = parse(head[2], 1)? as usize;
        let mut indices = Vec::with_capacity(count);
        for (ln, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let mut iv = Vec::with_capacity(dim);
            for tok in line.split_whitespace() {
                iv.push(parse(tok, ln + 1)? as u32);
            }
            indices.push(iv);
        }
        if indices.len() != count {
            return Err(DyadicError::Parse {
                line: indices.len() + 1,
                msg: format!("expected {count} cells, found {}", indices.len()),
            });
        }
        DyadicSet::from_indices(dim, level, indices)
    }
}

/// Per-axis candidate with squared min/max circle distance to the center.
struct AxisBand {
    idx: u32,
    dmin_sq: f64,
    dmax_sq: f64,
}

fn axis_bands(c: f64, r: f64, level: u8) -> Vec<AxisBand> {
    let n = 1u64 << level;
    let w = cell_side(level);
    let all = 2.0 * r + w >= 1.0;
    let (lo, hi) = if all {
        (0i64, n as i64 - 1)
    } else {
        (((c - r) / w).floor() as i64, ((c + r) / w).floor() as i64)
    };
    let mut bands = Vec::with_capacity((hi - lo + 1) as usize);
    for k in lo..=hi {
        let idx = k.rem_euclid(n as i64) as u32;
        let a = idx as f64 * w;
        let b = a + w;
        let (da, db) = (circle_distance(c, a), circle_distance(c, b));
        // Nearest point of the arc [a, b] is an endpoint unless c lies inside;
        // farthest is an endpoint unless the antipode lies inside.
        let inside = {
            let u = (c - a).rem_euclid(1.0);
            u <= w
        };
        let anti_inside = {
            let u = (c + 0.5 - a).rem_euclid(1.0);
            u <= w
        };
        let dmin = if inside { 0.0 } else { da.min(db) };
        let dmax = if anti_inside { 0.5 } else { da.max(db) };
        bands.push(AxisBand { idx, dmin_sq: dmin * dmin, dmax_sq: dmax * dmax });
    }
    bands
}

/// Rasterize the geodesic ball `B(center, r)` at the given level.
///
/// Inner cells satisfy `sup_{x in cell} |x-center| < r`, outer cells
/// `inf < r`, so inner ⊆ outer always and both converge to the ball as the
/// level grows.
pub fn rasterize_ball(
    center: &TorusPoint,
    r: f64,
    level: u8,
    mode: RasterMode,
) -> Result<DyadicSet, DyadicError> {
    let dim = center.dim();
    check_level(dim, level)?;
    if !(r > 0.0) {
        return Err(DyadicError::BadParameter(format!("ball radius must be positive, got {r}")));
    }
    let bands: Vec<Vec<AxisBand>> =
        center.coords().iter().map(|&c| axis_bands(c, r, level)).collect();
    let r_sq = r * r;
    let mut cells = Vec::new();
    let mut idx = [0u32; MAX_DIM];
    // Depth-first product over per-axis bands, pruning on partial min distance.
    fn rec(
        bands: &[Vec<AxisBand>],
        axis: usize,
        dim: usize,
        level: u8,
        min_acc: f64,
        max_acc: f64,
        r_sq: f64,
        mode: RasterMode,
        idx: &mut [u32; MAX_DIM],
        cells: &mut Vec<u64>,
    ) -> Result<(), DyadicError> {
        if min_acc >= r_sq {
            return Ok(());
        }
        if axis == dim {
            let keep = match mode {
                RasterMode::Inner => max_acc < r_sq,
                RasterMode::Outer => min_acc < r_sq,
            };
            if keep {
                cells.push(morton_encode(dim, level, &idx[..dim]));
                if cells.len() > MAX_CELLS {
                    return Err(DyadicError::CellBudget { needed: cells.len() });
                }
            }
            return Ok(());
        }
        for band in &bands[axis] {
            idx[axis] = band.idx;
            rec(
                bands,
                axis + 1,
                dim,
                level,
                min_acc + band.dmin_sq,
                max_acc + band.dmax_sq,
                r_sq,
                mode,
                idx,
                cells,
            )?;
        }
        Ok(())
    }
    rec(&bands, 0, dim, level, 0.0, 0.0, r_sq, mode, &mut idx, &mut cells)?;
    DyadicSet::from_morton(dim, level, cells)
}

/// Rasterize the axis-aligned box `corner + [0, sides_i)` at the given level.
pub fn rasterize_rectangle(
    corner: &TorusPoint,
    sides: &[f64],
    level: u8,
    mode: RasterMode,
) -> Result<DyadicSet, DyadicError> {
    let dim = corner.dim();
    check_level(dim, level)?;
    if sides.len() != dim {
        return Err(DyadicError::DimensionMismatch(sides.len(), dim));
    }
    for &s in sides {
        if !(s > 0.0 && s <= 1.0) {
            return Err(DyadicError::BadParameter(format!("side {s} outside (0, 1]")));
        }
    }
    let n = 1u64 << level;
    let w = cell_side(level);
    // Per-axis admissible indices. With dyadic-rational parameters every
    // comparison below is exact in f64.
    let mut per_axis: Vec<Vec<u32>> = Vec::with_capacity(dim);
    for (a, &s) in sides.iter().enumerate() {
        let p = corner.coords()[a];
        let mut ids = Vec::new();
        for idx in 0..n as u32 {
            let u = (idx as f64 * w - p).rem_euclid(1.0);
            let keep = if s >= 1.0 {
                true
            } else {
                match mode {
                    // positive-length overlap of [u, u+w) with [0, s) on the circle
                    RasterMode::Outer => u < s || u > 1.0 - w,
                    RasterMode::Inner => u + w <= s,
                }
            };
            if keep {
                ids.push(idx);
            }
        }
        per_axis.push(ids);
    }
    let total: usize = per_axis.iter().map(|v| v.len()).product();
    if total > MAX_CELLS {
        return Err(DyadicError::CellBudget { needed: total });
    }
    let mut cells = Vec::with_capacity(total);
    let mut idx = [0u32; MAX_DIM];
    fn rec(
        per_axis: &[Vec<u32>],
        axis: usize,
        dim: usize,
        level: u8,
        idx: &mut [u32; MAX_DIM],
        cells: &mut Vec<u64>,
    ) {
        if axis == dim {
            cells.push(morton_encode(dim, level, &idx[..dim]));
            return;
        }
        for &i in &per_axis[axis] {
            idx[axis] = i;
            rec(per_axis, axis + 1, dim, level, idx, cells);
        }
    }
    rec(&per_axis, 0, dim, level, &mut idx, &mut cells);
    DyadicSet::from_morton(dim, level, cells)
}

/// Positive-measure Cantor-type subset of the circle, truncated at `level`.
///
/// Stage k removes (approximately) the middle `gap_ratios[k]` fraction of
/// every surviving interval, rounded to whole level-ℓ cells. Intervals too
/// short to split are kept whole, so the result is the stated construction
/// truncated at resolution `2^-ℓ`.
pub fn fat_cantor(gap_ratios: &[f64], level: u8) -> Result<DyadicSet, DyadicError> {
    check_level(1, level)?;
    let mut limit = 1.0;
    for &g in gap_ratios {
        if !(0.0..1.0).contains(&g) {
            return Err(DyadicError::GapSchedule(format!("ratio {g} outside [0, 1)")));
        }
        limit *= 1.0 - g;
    }
    if limit < cell_side(level) {
        return Err(DyadicError::GapSchedule(format!(
            "limiting measure {limit:.3e} below one cell at level {level}"
        )));
    }
    let mut intervals: Vec<(u64, u64)> = vec![(0, 1u64 << level)];
    for &g in gap_ratios {
        let mut next = Vec::with_capacity(intervals.len() * 2);
        for &(lo, hi) in &intervals {
            let len = hi - lo;
            let gap = (g * len as f64).round() as u64;
            if gap == 0 || len - gap < 2 {
                next.push((lo, hi));
                continue;
            }
            let left = (len - gap).div_ceil(2);
            let right = len - gap - left;
            next.push((lo, lo + left));
            next.push((hi - right, hi));
        }
        intervals = next;
    }
    let needed: u64 = intervals.iter().map(|&(lo, hi)| hi - lo).sum();
    if needed as usize > MAX_CELLS {
        return Err(DyadicError::CellBudget { needed: needed as usize });
    }
    let mut cells = Vec::with_capacity(needed as usize);
    for (lo, hi) in intervals {
        cells.extend(lo..hi);
    }
    if cells.is_empty() {
        return Err(DyadicError::GapSchedule("construction emptied at this resolution".into()));
    }
    DyadicSet::from_morton(1, level, cells)
}

/// The two-cube set `A = Q1 ∪ F_Q2`: a solid cube of side `r1` next to a
/// cube of side `r2` that is replaced by its `2^{n·d}` concentric ρ-shrunk
/// subcubes. Cubes sit at `0` and `1/2` along the first axis.
pub fn example_two_cubes(
    dim: usize,
    r1: f64,
    r2: f64,
    rho: f64,
    n_sub: u32,
    level: u8,
) -> Result<DyadicSet, DyadicError> {
    check_level(dim, level)?;
    if !(r1 > 0.0 && r2 > 0.0) {
        return Err(DyadicError::BadParameter("cube sides must be positive".into()));
    }
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(DyadicError::BadParameter(format!("rho {rho} outside (0, 1]")));
    }
    if r1 > 0.5 || r2 > 0.5 {
        return Err(DyadicError::CubesOverlap);
    }
    let q1 = rasterize_rectangle(
        &TorusPoint::new(vec![0.0; dim]),
        &vec![r1; dim],
        level,
        RasterMode::Outer,
    )?;
    let per_axis = 1u64 << n_sub;
    let sub = r2 / per_axis as f64;
    let inset = (1.0 - rho) * sub / 2.0;
    let side = rho * sub;
    let mut acc = q1;
    let mut j = vec![0u64; dim];
    loop {
        let mut corner = vec![0.0; dim];
        corner[0] = 0.5;
        for a in 0..dim {
            corner[a] += j[a] as f64 * sub + inset;
        }
        let piece =
            rasterize_rectangle(&TorusPoint::new(corner), &vec![side; dim], level, RasterMode::Outer)?;
        acc = acc.union(&piece)?;
        // odometer over {0..2^n-1}^d
        let mut a = 0;
        loop {
            if a == dim {
                return Ok(acc);
            }
            j[a] += 1;
            if j[a] < per_axis {
                break;
            }
            j[a] = 0;
            a += 1;
        }
    }
}
