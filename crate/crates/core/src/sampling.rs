//! Seeded uniform sampling of box interiors and boundaries, plus
//! deterministic evaluation grids.
//!
//! All randomness comes from ChaCha20. A run seed is split into independent
//! streams (network init, interior draws, boundary draws, evaluation draws)
//! so changing one sample count never perturbs the others.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use crate::problem::{BoxDomain, Support};

/// Name recorded in run reports.
pub const RNG_NAME: &str = "ChaCha20";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SamplingError {
    #[error(
        "rejection cap of {attempts} draws exceeded with {accepted} of {wanted} points accepted"
    )]
    RejectionCap {
        attempts: usize,
        accepted: usize,
        wanted: usize,
    },
    #[error("sample count must be at least 1")]
    ZeroCount,
    #[error("grid resolution must be at least 2, got {0}")]
    Resolution(usize),
    #[error("slice coordinate x{axis} = {value} lies outside the domain", axis = .axis + 1)]
    SliceOutside { axis: usize, value: f64 },
    #[error("slice fixes axis {0} which is out of range or repeated")]
    SliceAxis(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Init = 0,
    Interior = 1,
    Boundary = 2,
    Eval = 3,
    HoldoutInterior = 4,
    HoldoutBoundary = 5,
}

/// Generator for one purpose of a seeded run.
pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// Rejection of draws closer than `radius` to any listed support.
#[derive(Debug, Clone, Copy)]
pub struct Exclusion<'a> {
    pub supports: &'a [Support],
    pub radius: f64,
}

impl Exclusion<'_> {
    fn rejects(&self, x: &[f64]) -> bool {
        self.radius > 0.0 && self.supports.iter().any(|s| s.distance(x) < self.radius)
    }
}

/// Points stored row-major (`N × d`), with outward normals for boundary
/// batches.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pub dim: usize,
    pub points: Vec<f64>,
    pub normals: Option<Vec<f64>>,
    /// Seed of the run the batch came from, if any.
    pub seed: Option<u64>,
    /// Index of this batch among the draws of its stream.
    pub draw_index: usize,
    /// Draws discarded by exclusion.
    pub rejected: usize,
}

impl SampleBatch {
    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn normal(&self, i: usize) -> Option<&[f64]> {
        self.normals
            .as_ref()
            .map(|n| &n[i * self.dim..(i + 1) * self.dim])
    }

    pub fn with_provenance(mut self, seed: u64, draw_index: usize) -> Self {
        self.seed = Some(seed);
        self.draw_index = draw_index;
        self
    }
}

/// Uniform in the open interval `(lo, hi)`.
fn open_uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    loop {
        let v = rng.gen_range(lo..hi);
        if v > lo {
            return v;
        }
    }
}

/// `n` i.i.d. uniform points strictly inside the box, redrawing any point
/// within the exclusion radius of a support.
pub fn sample_interior<R: Rng>(
    domain: &BoxDomain,
    n: usize,
    rng: &mut R,
    exclusion: Option<Exclusion<'_>>,
) -> Result<SampleBatch, SamplingError> {
    if n == 0 {
        return Err(SamplingError::ZeroCount);
    }
    let d = domain.dim();
    let cap = 100 * n;
    let mut points = Vec::with_capacity(n * d);
    let mut x = vec![0.0; d];
    let mut attempts = 0;
    let mut accepted = 0;
    while accepted < n {
        if attempts == cap {
            return Err(SamplingError::RejectionCap {
                attempts,
                accepted,
                wanted: n,
            });
        }
        attempts += 1;
        for (i, xi) in x.iter_mut().enumerate() {
            *xi = open_uniform(rng, domain.lower()[i], domain.upper()[i]);
        }
        if exclusion.is_some_and(|e| e.rejects(&x)) {
            continue;
        }
        points.extend_from_slice(&x);
        accepted += 1;
    }
    Ok(SampleBatch {
        dim: d,
        points,
        normals: None,
        seed: None,
        draw_index: 0,
        rejected: attempts - n,
    })
}

/// `n` uniform boundary points: a face is picked with probability
/// proportional to its measure, then a point uniformly on it.
pub fn sample_boundary<R: Rng>(
    domain: &BoxDomain,
    n: usize,
    rng: &mut R,
) -> Result<SampleBatch, SamplingError> {
    sample_boundary_excluding(domain, n, rng, None)
}

pub fn sample_boundary_excluding<R: Rng>(
    domain: &BoxDomain,
    n: usize,
    rng: &mut R,
    exclusion: Option<Exclusion<'_>>,
) -> Result<SampleBatch, SamplingError> {
    if n == 0 {
        return Err(SamplingError::ZeroCount);
    }
    let d = domain.dim();
    let weights: Vec<f64> = (0..d).map(|i| domain.face_measure(i)).collect();
    let total: f64 = weights.iter().sum();
    let cap = 100 * n;
    let mut points = Vec::with_capacity(n * d);
    let mut normals = Vec::with_capacity(n * d);
    let mut y = vec![0.0; d];
    let mut attempts = 0;
    let mut accepted = 0;
    while accepted < n {
        if attempts == cap {
            return Err(SamplingError::RejectionCap {
                attempts,
                accepted,
                wanted: n,
            });
        }
        attempts += 1;
        let mut pick = rng.gen_range(0.0..total);
        let mut axis = d - 1;
        for (i, w) in weights.iter().enumerate() {
            if pick < *w {
                axis = i;
                break;
            }
            pick -= w;
        }
        let upper = rng.gen_bool(0.5);
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = if i == axis {
                if upper {
                    domain.upper()[i]
                } else {
                    domain.lower()[i]
                }
            } else {
                open_uniform(rng, domain.lower()[i], domain.upper()[i])
            };
        }
        if exclusion.is_some_and(|e| e.rejects(&y)) {
            continue;
        }
        points.extend_from_slice(&y);
        normals.extend((0..d).map(|i| match (i == axis, upper) {
            (false, _) => 0.0,
            (true, true) => 1.0,
            (true, false) => -1.0,
        }));
        accepted += 1;
    }
    Ok(SampleBatch {
        dim: d,
        points,
        normals: Some(normals),
        seed: None,
        draw_index: 0,
        rejected: attempts - n,
    })
}

/// Tensor grid with `resolution` nodes on every free axis (bounds included)
/// and the `fixed` coordinates substituted. Rows are in lexicographic order
/// with the last free axis varying fastest.
pub fn eval_grid(
    domain: &BoxDomain,
    resolution: usize,
    fixed: &[(usize, f64)],
) -> Result<Vec<f64>, SamplingError> {
    if resolution < 2 {
        return Err(SamplingError::Resolution(resolution));
    }
    let d = domain.dim();
    let mut slot: Vec<Option<f64>> = vec![None; d];
    for &(axis, value) in fixed {
        if axis >= d || slot[axis].is_some() {
            return Err(SamplingError::SliceAxis(axis));
        }
        if !(domain.lower()[axis]..=domain.upper()[axis]).contains(&value) {
            return Err(SamplingError::SliceOutside { axis, value });
        }
        slot[axis] = Some(value);
    }
    let free: Vec<usize> = (0..d).filter(|&i| slot[i].is_none()).collect();
    let count = resolution.pow(free.len() as u32);
    let node = |axis: usize, k: usize| {
        if k + 1 == resolution {
            domain.upper()[axis]
        } else {
            domain.lower()[axis] + domain.width(axis) * k as f64 / (resolution - 1) as f64
        }
    };
    let mut out = Vec::with_capacity(count * d);
    let mut idx = vec![0usize; free.len()];
    for _ in 0..count {
        for axis in 0..d {
            out.push(match slot[axis] {
                Some(v) => v,
                None => {
                    let pos = free.iter().position(|&f| f == axis).unwrap();
                    node(axis, idx[pos])
                }
            });
        }
        for pos in (0..free.len()).rev() {
            idx[pos] += 1;
            if idx[pos] < resolution {
                break;
            }
            idx[pos] = 0;
        }
    }
    Ok(out)
}
