//! Nodal-length measurement on grids: marching-squares contour
//! extraction, restricted-ball nodal length, the doubling-index
//! statistic, and small-ball probability estimation.
//!
//! Conventions: a grid value that is exactly zero counts as positive
//! (deterministic tie-break; relevant for Rademacher ensembles on
//! symmetric grids). The two ambiguous saddle cases are resolved by the
//! sign of the cell-centre value, re-evaluated exactly through the
//! sample's attached evaluator when present and by the bilinear centre
//! (corner mean) otherwise.

use serde::Serialize;

use crate::ensembles::{FieldSample, PointSampler};
use crate::error::{Error, Result};
use crate::grid::GridGeometry;
use crate::laws::SeedStream;
use crate::special::{kac_rice_density, KernelSpec};

/// Estimated nodal length with grid step and refinement history.
#[derive(Debug, Clone, Serialize)]
pub struct NodalEstimate {
    /// Length in manifold units.
    pub length: f64,
    pub grid_step: f64,
    /// Lengths from two coarser grids, when a refinement ladder ran.
    pub refinement: Option<[f64; 2]>,
    /// Bound on nodal length in regions the grid cannot see (the two
    /// polar caps on sphere grids); reported as uncertainty, never
    /// added to the estimate.
    pub excluded_region_bound: f64,
}

/// One contour segment in intrinsic grid coordinates.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Segment {
    pub a: [f64; 2],
    pub b: [f64; 2],
    pub length: f64,
}

#[inline]
fn positive(v: f64) -> bool {
    // exact zero counts as positive
    v >= 0.0
}

#[inline]
fn crossing(p: f64, q: f64) -> f64 {
    p / (p - q)
}

/// Marching-squares contour extraction over every grid cell.
pub fn contour_segments(sample: &FieldSample) -> Result<Vec<Segment>> {
    check_resolution(sample)?;
    let geometry = sample.geometry;
    let (rows, cols) = geometry.node_dims();
    if rows < 2 {
        return Err(Error::InvalidExperiment(
            "contour extraction needs a 2d grid".into(),
        ));
    }
    let (wrap_rows, wrap_cols) = geometry.wraps();
    let cell_rows = if wrap_rows { rows } else { rows - 1 };
    let cell_cols = if wrap_cols { cols } else { cols - 1 };
    let v = &sample.values;
    let mut segments = Vec::new();
    for r in 0..cell_rows {
        let r1 = (r + 1) % rows;
        for c in 0..cell_cols {
            let c1 = (c + 1) % cols;
            // corners: a = (r, c), b = (r+1, c), cc = (r+1, c+1), d = (r, c+1)
            let va = v[r * cols + c];
            let vb = v[r1 * cols + c];
            let vc = v[r1 * cols + c1];
            let vd = v[r * cols + c1];
            let idx = (positive(va) as usize)
                | (positive(vb) as usize) << 1
                | (positive(vc) as usize) << 2
                | (positive(vd) as usize) << 3;
            if idx == 0 || idx == 15 {
                continue;
            }
            // unwrapped cell corner coordinates
            let pa = geometry.node_coords(r, c);
            let pc = geometry.node_coords(r + 1, c + 1);
            let (u0, v0) = (pa[0], pa[1]);
            let (u1, v1) = (pc[0], pc[1]);
            // edge crossing points (first coordinate = u)
            let on_ab = || [u0 + crossing(va, vb) * (u1 - u0), v0];
            let on_bc = || [u1, v0 + crossing(vb, vc) * (v1 - v0)];
            let on_dc = || [u0 + crossing(vd, vc) * (u1 - u0), v1];
            let on_ad = || [u0, v0 + crossing(va, vd) * (v1 - v0)];
            let mut push = |p: [f64; 2], q: [f64; 2]| {
                let length = geometry.segment_length(p, q);
                if length > 0.0 {
                    segments.push(Segment { a: p, b: q, length });
                }
            };
            match idx {
                1 | 14 => push(on_ab(), on_ad()),
                2 | 13 => push(on_ab(), on_bc()),
                4 | 11 => push(on_bc(), on_dc()),
                8 | 7 => push(on_dc(), on_ad()),
                3 | 12 => push(on_ad(), on_bc()),
                6 | 9 => push(on_ab(), on_dc()),
                5 | 10 => {
                    let centre = [0.5 * (u0 + u1), 0.5 * (v0 + v1)];
                    let cv = match &sample.eval {
                        Some(f) => f(centre),
                        None => 0.25 * (va + vb + vc + vd),
                    };
                    let centre_pos = positive(cv);
                    // idx 5: a, c positive; idx 10: b, d positive
                    if (idx == 5) == centre_pos {
                        // isolate the two negative (resp. positive) corners
                        push(on_ab(), on_bc());
                        push(on_dc(), on_ad());
                    } else {
                        push(on_ab(), on_ad());
                        push(on_bc(), on_dc());
                    }
                }
                _ => unreachable!(),
            }
        }
    }
    Ok(segments)
}

/// Total nodal length of the sample, with the sphere polar-cap bound
/// attached as `excluded_region_bound`.
pub fn nodal_length(sample: &FieldSample) -> Result<NodalEstimate> {
    let segments = contour_segments(sample)?;
    let length: f64 = segments.iter().map(|s| s.length).sum();
    Ok(NodalEstimate {
        length,
        grid_step: sample.geometry.grid_step(),
        refinement: None,
        excluded_region_bound: excluded_bound(sample),
    })
}

impl NodalEstimate {
    /// Attaches a pair of coarser-grid lengths `[L(2h), L(4h)]` as the
    /// refinement history. The Cauchy-like behaviour
    /// |L(4h) - L(2h)| >= |L(2h) - L(h)| is logged, not asserted.
    pub fn with_refinement(mut self, coarser: [f64; 2]) -> Self {
        let d_fine = (coarser[0] - self.length).abs();
        let d_coarse = (coarser[1] - coarser[0]).abs();
        if d_coarse < d_fine {
            log::debug!(
                "refinement ladder not Cauchy-like: |L(4h)-L(2h)| = {d_coarse:.3e} < |L(2h)-L(h)| = {d_fine:.3e}"
            );
        }
        self.refinement = Some(coarser);
        self
    }
}

fn check_resolution(sample: &FieldSample) -> Result<()> {
    let scale = sample.unit_speed_scale();
    if scale <= 0.0 {
        return Ok(());
    }
    let ppw = 1.0 / (sample.geometry.grid_step() * scale);
    if ppw < 4.0 * (1.0 - 1e-12) {
        return Err(Error::Resolution(format!(
            "{:.2} points per wavelength < 4 (grid step {:.4}, frequency {:.3})",
            ppw,
            sample.geometry.grid_step(),
            scale
        )));
    }
    Ok(())
}

/// Expected-length bound for the two polar caps the staggered sphere
/// grid cannot reach: kac_rice_density * frequency * cap area * 2.
fn excluded_bound(sample: &FieldSample) -> f64 {
    match sample.geometry {
        GridGeometry::Sphere { n_theta, .. } => {
            let cap_angle = std::f64::consts::PI / n_theta as f64;
            let cap_area = 2.0 * std::f64::consts::PI * (1.0 - cap_angle.cos());
            let density = kac_rice_density(&KernelSpec::monochromatic(2).expect("n = 2"));
            2.0 * density * sample.unit_speed_scale() * 2.0 * cap_area
        }
        _ => 0.0,
    }
}

/// Sum of the segment portions inside the geodesic ball, clipping
/// boundary-crossing segments by bisection on the distance function.
pub fn clip_length_to_ball(
    geometry: &GridGeometry,
    segments: &[Segment],
    center: [f64; 2],
    radius: f64,
) -> f64 {
    if radius <= 0.0 {
        return 0.0;
    }
    let mut total = 0.0;
    for seg in segments {
        let da = geometry.distance(seg.a, center);
        let db = geometry.distance(seg.b, center);
        let ina = da <= radius;
        let inb = db <= radius;
        if ina && inb {
            total += seg.length;
        } else if ina != inb {
            // bisect for the boundary crossing along the segment
            let (mut lo, mut hi) = if ina { (0.0, 1.0) } else { (1.0, 0.0) };
            for _ in 0..40 {
                let mid = 0.5 * (lo + hi);
                let p = lerp(seg.a, seg.b, mid);
                if geometry.distance(p, center) <= radius {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let t = 0.5 * (lo + hi);
            let inside_end = if ina { seg.a } else { seg.b };
            total += geometry.segment_length(inside_end, lerp(seg.a, seg.b, t));
        }
        // both endpoints outside: segments are at most one cell long,
        // far below any admissible ball radius, so the dip-through case
        // is negligible by construction
    }
    total
}

fn lerp(a: [f64; 2], b: [f64; 2], t: f64) -> [f64; 2] {
    [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
}

/// Nodal length inside the geodesic ball of the given radius centred at
/// a grid node.
pub fn restricted_nodal_length(
    sample: &FieldSample,
    center: (usize, usize),
    radius: f64,
) -> Result<NodalEstimate> {
    if radius < 0.0 {
        return Err(Error::Domain(format!("ball radius must be >= 0, got {radius}")));
    }
    let center_coords = sample.geometry.node_coords(center.0, center.1);
    check_ball_radius(&sample.geometry, center_coords, radius)?;
    let segments = contour_segments(sample)?;
    let length = clip_length_to_ball(&sample.geometry, &segments, center_coords, radius);
    Ok(NodalEstimate {
        length,
        grid_step: sample.geometry.grid_step(),
        refinement: None,
        excluded_region_bound: 0.0,
    })
}

/// Metric sanity for ball measurements. Plane charts accept any radius:
/// a ball reaching past the chart clips against the contour that exists,
/// and a radius covering the whole chart makes clipping a no-op.
fn check_ball_radius(geometry: &GridGeometry, center: [f64; 2], radius: f64) -> Result<()> {
    let ok = match *geometry {
        GridGeometry::Torus2 { .. } => radius <= 0.5,
        GridGeometry::Sphere { .. } => radius <= std::f64::consts::PI,
        GridGeometry::PlaneChart { .. } => true,
        GridGeometry::Torus1 { .. } => false,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "ball of radius {radius} at {center:?} is not a metric ball on this grid"
        )))
    }
}

/// Containment check for the doubling index: both concentric balls must
/// lie inside the chart, or the grid maxima are not comparable.
fn check_ball_fits(geometry: &GridGeometry, center: [f64; 2], radius: f64) -> Result<()> {
    let ok = match *geometry {
        GridGeometry::Torus2 { .. } => radius <= 0.5,
        GridGeometry::Sphere { .. } => radius <= std::f64::consts::PI,
        GridGeometry::PlaneChart { n: _, side } => {
            let half = side / 2.0;
            center[0].abs() + radius <= half + 1e-12 && center[1].abs() + radius <= half + 1e-12
        }
        GridGeometry::Torus1 { .. } => false,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "ball of radius {radius} at {center:?} does not fit the grid"
        )))
    }
}

/// Doubling index: log of the ratio of grid maxima of |f| over the
/// concentric balls 2B and B.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DoublingIndex {
    pub value: f64,
    /// Fewer than 100 grid nodes fell inside B; the grid maxima are
    /// then crude lower bounds for the suprema.
    pub coarse: bool,
}

pub fn doubling_index(sample: &FieldSample, center: (usize, usize), r: f64) -> Result<DoublingIndex> {
    if r <= 0.0 {
        return Err(Error::Domain("doubling radius must be positive".into()));
    }
    let geometry = sample.geometry;
    let center_coords = geometry.node_coords(center.0, center.1);
    check_ball_fits(&geometry, center_coords, 2.0 * r)?;
    let (rows, cols) = geometry.node_dims();
    let mut sup_inner = 0.0_f64;
    let mut sup_outer = 0.0_f64;
    let mut count_inner = 0usize;
    for row in 0..rows {
        for col in 0..cols {
            let d = geometry.distance(geometry.node_coords(row, col), center_coords);
            if d <= 2.0 * r {
                let a = sample.values[row * cols + col].abs();
                sup_outer = sup_outer.max(a);
                if d <= r {
                    sup_inner = sup_inner.max(a);
                    count_inner += 1;
                }
            }
        }
    }
    if count_inner < 16 {
        return Err(Error::Resolution(format!(
            "only {count_inner} grid nodes inside the inner ball (need >= 16)"
        )));
    }
    if sup_inner == 0.0 {
        return Err(Error::FieldVanishes);
    }
    Ok(DoublingIndex {
        value: (sup_outer / sup_inner).ln(),
        coarse: count_inner < 100,
    })
}

/// Small-ball probability estimate with binomial standard error.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SmallBallEstimate {
    pub probability: f64,
    pub std_error: f64,
    pub tau: f64,
    pub replicates: u64,
    pub modes: usize,
}

/// Fraction of independent replicates with |f(point)| <= tau. The point
/// is given in intrinsic coordinates of the ensemble's natural grid.
pub fn small_ball_probability(
    sampler: &PointSampler,
    tau: f64,
    replicates: u64,
    master_seed: u64,
) -> Result<SmallBallEstimate> {
    if tau <= 0.0 {
        return Err(Error::Domain("tau must be positive".into()));
    }
    if replicates < 1000 {
        return Err(Error::InvalidExperiment(format!(
            "small-ball estimation needs >= 1000 replicates, got {replicates}"
        )));
    }
    let mut hits = 0u64;
    for idx in 0..replicates {
        let v = sampler.value(SeedStream::new(master_seed, idx));
        if v.abs() <= tau {
            hits += 1;
        }
    }
    let p = hits as f64 / replicates as f64;
    let se = (p * (1.0 - p) / replicates as f64).sqrt();
    Ok(SmallBallEstimate {
        probability: p,
        std_error: se,
        tau,
        replicates,
        modes: sampler.descriptor().mode_count()?,
    })
}

/// The anti-concentration envelope `C (tau + modes^{-1/2})`.
pub fn small_ball_envelope(tau: f64, modes: usize, constant: f64) -> f64 {
    constant * (tau + 1.0 / (modes as f64).sqrt())
}

/// Contour segments as CSV rows `x1,y1,x2,y2,length`, stamped with the
/// sample's seed and fingerprint as comment lines.
pub fn export_contours(sample: &FieldSample, path: &std::path::Path) -> std::io::Result<()> {
    use std::io::Write;
    let segments = contour_segments(sample).map_err(|e| {
        std::io::Error::new(std::io::ErrorKind::InvalidInput, e.to_string())
    })?;
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "# schema=1")?;
    writeln!(out, "# fingerprint={}", crate::ensembles::sample_fingerprint(sample))?;
    if let Some(stream) = sample.stream {
        writeln!(out, "# seed={} replicate={}", stream.master_seed, stream.stream_index)?;
    }
    writeln!(out, "x1,y1,x2,y2,length")?;
    for s in &segments {
        writeln!(
            out,
            "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
            s.a[0], s.a[1], s.b[0], s.b[1], s.length
        )?;
    }
    Ok(())
}
