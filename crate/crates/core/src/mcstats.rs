//! Monte Carlo experiment driver: expectations with confidence
//! intervals, distributional comparison between coefficient laws,
//! variance scans, and the locality cross-check.
//!
//! Replicate `i` of an experiment always consumes the seed stream
//! `(master_seed, i)`, and aggregation runs over the replicate-ordered
//! vector with compensated summation, so results are bit-identical for
//! any worker count and scheduling order.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ensembles::{
    sample_rwm_plane, EnsembleDescriptor, FieldSample, PointSampler, SphereSynthesizer,
    TorusSynthesizer,
};
use crate::error::{Error, Result};
use crate::grid::GridGeometry;
use crate::laws::SeedStream;
use crate::nodal::{clip_length_to_ball, contour_segments, nodal_length, restricted_nodal_length};
use crate::spectra::{annulus_points, circle_points, FrequencySet};

/// What is measured on each replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Measurement {
    /// Total nodal length of the realization.
    GlobalLength,
    /// Nodal length inside the geodesic ball at `center` (intrinsic
    /// coordinates; snapped to the nearest grid node on global grids).
    RestrictedLength { center: [f64; 2], radius: f64 },
    /// Indicator of |f(point)| <= tau.
    SmallBall { tau: f64, point: [f64; 2] },
}

/// A fully specified Monte Carlo experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub ensemble: EnsembleDescriptor,
    pub geometry: GridGeometry,
    pub replicates: u64,
    pub master_seed: u64,
    pub measurement: Measurement,
    /// For global length: also measure on the half-resolution grid and
    /// report the Richardson-extrapolated value (marching-squares bias
    /// is O(h^2) and systematic).
    pub richardson: bool,
}

impl ExperimentSpec {
    /// Hash of the canonical JSON encoding; stamped into every output.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_string(self).expect("spec serializes");
        let digest = Sha256::digest(json.as_bytes());
        let mut hex = String::with_capacity(16);
        for b in &digest[..8] {
            hex.push_str(&format!("{b:02x}"));
        }
        hex
    }
}

/// Replicate summary statistics.
#[derive(Debug, Clone, Serialize)]
pub struct MCSummary {
    pub replicates: u64,
    pub mean: f64,
    /// Unbiased sample variance.
    pub variance: f64,
    pub std_error: f64,
    pub ci95: (f64, f64),
    pub fingerprint: String,
}

/// Neumaier compensated sum; the reduction order is fixed by replicate
/// index, independent of the worker count.
fn compensated_sum(values: &[f64]) -> f64 {
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for &v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

pub fn summarize(values: &[f64], fingerprint: String) -> Result<MCSummary> {
    let m = values.len() as u64;
    if m < 2 {
        return Err(Error::InvalidExperiment(format!("need >= 2 replicates, got {m}")));
    }
    let mean = compensated_sum(values) / m as f64;
    let centred: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    let variance = compensated_sum(&centred) / (m as f64 - 1.0);
    let std_error = (variance / m as f64).sqrt();
    Ok(MCSummary {
        replicates: m,
        mean,
        variance,
        std_error,
        ci95: (mean - 1.96 * std_error, mean + 1.96 * std_error),
        fingerprint,
    })
}

/// Expectation driver output: raw measurements and, when a refinement
/// ladder ran, the Richardson-extrapolated sequence.
#[derive(Debug, Clone, Serialize)]
pub struct ExpectationReport {
    pub raw: MCSummary,
    pub extrapolated: Option<MCSummary>,
    #[serde(skip)]
    pub raw_values: Vec<f64>,
    #[serde(skip)]
    pub extrapolated_values: Option<Vec<f64>>,
}

impl ExpectationReport {
    /// The extrapolated summary when present, the raw one otherwise.
    pub fn best(&self) -> &MCSummary {
        self.extrapolated.as_ref().unwrap_or(&self.raw)
    }

    pub fn best_values(&self) -> &[f64] {
        self.extrapolated_values.as_deref().unwrap_or(&self.raw_values)
    }
}

/// Fine-resolution factor for restricted measurements on torus spectral
/// ensembles: the local patch grid refines the global step by this much.
const PATCH_REFINEMENT: usize = 4;

enum ReplicateSampler {
    Torus {
        synth: TorusSynthesizer,
        coarse: Option<TorusSynthesizer>,
        /// (center, radius, patch nodes, patch half-width): restricted
        /// measurements evaluate a local patch instead of the full grid.
        patch: Option<([f64; 2], f64, usize, f64)>,
    },
    Sphere {
        synth: SphereSynthesizer,
        coarse: Option<SphereSynthesizer>,
    },
    Rwm,
    Point(PointSampler),
}

fn torus_frequency_set(ensemble: &EnsembleDescriptor) -> Result<Option<FrequencySet>> {
    match ensemble {
        EnsembleDescriptor::Arw { n, .. } => Ok(Some(circle_points(*n))),
        EnsembleDescriptor::TorusWindow { dim: 2, t, rho, .. } => {
            Ok(Some(annulus_points(2, *t, *rho)?))
        }
        _ => Ok(None),
    }
}

fn build_sampler(spec: &ExperimentSpec) -> Result<ReplicateSampler> {
    if let Measurement::SmallBall { point, .. } = spec.measurement {
        return Ok(ReplicateSampler::Point(PointSampler::new(&spec.ensemble, point)?));
    }
    if let Some(fs) = torus_frequency_set(&spec.ensemble)? {
        if fs.is_empty() {
            return Err(Error::EmptyFrequencySet(format!("{:?}", fs.kind)));
        }
        let synth = TorusSynthesizer::new(&fs, &spec.geometry, spec.ensemble.clone())?;
        let patch = if let Measurement::RestrictedLength { center, radius } = spec.measurement {
            let GridGeometry::Torus2 { n } = spec.geometry else {
                return Err(Error::InvalidExperiment("torus ensemble needs a torus grid".into()));
            };
            let step = 1.0 / (n * PATCH_REFINEMENT) as f64;
            let half_steps = (radius / step).ceil() as usize + 4;
            let nodes = 2 * half_steps + 1;
            let half_width = half_steps as f64 * step;
            Some((center, radius, nodes, half_width))
        } else {
            None
        };
        let coarse = if spec.richardson && patch.is_none() {
            let GridGeometry::Torus2 { n } = spec.geometry else { unreachable!() };
            let coarse_geom = GridGeometry::torus2(n / 2)?;
            Some(TorusSynthesizer::new(&fs, &coarse_geom, spec.ensemble.clone())?)
        } else {
            None
        };
        return Ok(ReplicateSampler::Torus { synth, coarse, patch });
    }
    match &spec.ensemble {
        EnsembleDescriptor::Sphere { ell, law, basis } => {
            let synth = SphereSynthesizer::new(*ell, &spec.geometry, *law, *basis)?;
            let coarse = if spec.richardson {
                let GridGeometry::Sphere { n_theta, n_phi } = spec.geometry else {
                    return Err(Error::InvalidExperiment("sphere ensemble needs a sphere grid".into()));
                };
                let geom = GridGeometry::sphere(n_theta / 2, n_phi / 2)?;
                Some(SphereSynthesizer::new(*ell, &geom, *law, *basis)?)
            } else {
                None
            };
            Ok(ReplicateSampler::Sphere { synth, coarse })
        }
        EnsembleDescriptor::Rwm { .. } => {
            if spec.richardson {
                return Err(Error::InvalidExperiment(
                    "refinement ladder is not defined for plane charts".into(),
                ));
            }
            Ok(ReplicateSampler::Rwm)
        }
        EnsembleDescriptor::TorusWindow { dim, .. } => Err(Error::InvalidExperiment(format!(
            "nodal measurement requires a dim-2 window, got dim {dim}"
        ))),
        EnsembleDescriptor::Synthetic { .. } => Err(Error::InvalidExperiment(
            "synthetic descriptors cannot be drawn".into(),
        )),
        EnsembleDescriptor::Arw { .. } => unreachable!("handled above"),
    }
}

fn nearest_node(geometry: &GridGeometry, p: [f64; 2]) -> (usize, usize) {
    match *geometry {
        GridGeometry::Torus2 { n } => (
            (p[0].rem_euclid(1.0) * n as f64).round() as usize % n,
            (p[1].rem_euclid(1.0) * n as f64).round() as usize % n,
        ),
        GridGeometry::Sphere { n_theta, n_phi } => {
            let r = ((p[0] / std::f64::consts::PI * n_theta as f64) - 0.5).round();
            let c = (p[1].rem_euclid(2.0 * std::f64::consts::PI) / (2.0 * std::f64::consts::PI)
                * n_phi as f64)
                .round();
            ((r.max(0.0) as usize).min(n_theta - 1), (c as usize) % n_phi)
        }
        GridGeometry::PlaneChart { n, side } => {
            let h = side / (n as f64 - 1.0);
            let idx = |x: f64| (((x + side / 2.0) / h).round().max(0.0) as usize).min(n - 1);
            (idx(p[0]), idx(p[1]))
        }
        GridGeometry::Torus1 { n } => {
            (0, (p[1].rem_euclid(1.0) * n as f64).round() as usize % n)
        }
    }
}

fn measure_sample(sample: &FieldSample, measurement: &Measurement) -> Result<f64> {
    match measurement {
        Measurement::GlobalLength => Ok(nodal_length(sample)?.length),
        Measurement::RestrictedLength { center, radius } => {
            let node = nearest_node(&sample.geometry, *center);
            Ok(restricted_nodal_length(sample, node, *radius)?.length)
        }
        Measurement::SmallBall { .. } => unreachable!("point path handles small-ball"),
    }
}

/// Runs the experiment: `replicates` independent replicates on derived
/// streams, aggregated deterministically.
pub fn mc_expectation(spec: &ExperimentSpec) -> Result<ExpectationReport> {
    if spec.replicates < 2 {
        return Err(Error::InvalidExperiment("need at least 2 replicates".into()));
    }
    let sampler = build_sampler(spec)?;
    let fingerprint = spec.fingerprint();

    let run = |idx: u64| -> Result<(f64, Option<f64>)> {
        let stream = SeedStream::new(spec.master_seed, idx);
        match &sampler {
            ReplicateSampler::Point(ps) => {
                let Measurement::SmallBall { tau, .. } = spec.measurement else {
                    unreachable!()
                };
                let v = ps.value(stream);
                Ok((if v.abs() <= tau { 1.0 } else { 0.0 }, None))
            }
            ReplicateSampler::Torus { synth, coarse, patch } => {
                let coeffs = synth.coefficients(stream)?;
                if let Some((center, radius, nodes, half_width)) = patch {
                    let sample =
                        synth.sample_patch(&coeffs, *center, *half_width, *nodes, idx)?;
                    let mid = (nodes - 1) / 2;
                    let est = restricted_nodal_length(&sample, (mid, mid), *radius)?;
                    return Ok((est.length, None));
                }
                let sample = synth.sample_with_coeffs(&coeffs, idx);
                let fine = measure_sample(&sample, &spec.measurement)?;
                let coarse_val = match coarse {
                    Some(cs) => {
                        let c = cs.sample_with_coeffs(&coeffs, idx);
                        Some(measure_sample(&c, &spec.measurement)?)
                    }
                    None => None,
                };
                Ok((fine, coarse_val))
            }
            ReplicateSampler::Sphere { synth, coarse } => {
                let sample = synth.sample(stream, idx);
                let fine = measure_sample(&sample, &spec.measurement)?;
                let coarse_val = match coarse {
                    Some(cs) => {
                        let draws = {
                            let mut rng = stream.rng();
                            crate::laws::draw_real_with(
                                spec.ensemble.law().expect("sphere has a law"),
                                &mut rng,
                                sample_draw_count(&spec.ensemble),
                            )
                        };
                        let c = cs.sample_with_draws(&draws, idx);
                        Some(measure_sample(&c, &spec.measurement)?)
                    }
                    None => None,
                };
                Ok((fine, coarse_val))
            }
            ReplicateSampler::Rwm => {
                let EnsembleDescriptor::Rwm { j, law } = spec.ensemble else { unreachable!() };
                let sample = sample_rwm_plane(j, &spec.geometry, stream, law)?;
                Ok((measure_sample(&sample, &spec.measurement)?, None))
            }
        }
    };

    let outcomes: Vec<(f64, Option<f64>)> = (0..spec.replicates)
        .into_par_iter()
        .map(|idx| {
            run(idx).map_err(|e| Error::Replicate { index: idx, source: Box::new(e) })
        })
        .collect::<Result<Vec<_>>>()?;

    let raw_values: Vec<f64> = outcomes.iter().map(|(f, _)| *f).collect();
    let raw = summarize(&raw_values, fingerprint.clone())?;
    let (extrapolated, extrapolated_values) = if outcomes.iter().all(|(_, c)| c.is_some()) {
        // second-order Richardson: L* = (4 L_h - L_2h) / 3
        let vals: Vec<f64> = outcomes
            .iter()
            .map(|(f, c)| (4.0 * f - c.unwrap()) / 3.0)
            .collect();
        (Some(summarize(&vals, fingerprint)?), Some(vals))
    } else {
        (None, None)
    };
    Ok(ExpectationReport { raw, extrapolated, raw_values, extrapolated_values })
}

fn sample_draw_count(ensemble: &EnsembleDescriptor) -> usize {
    match ensemble {
        EnsembleDescriptor::Sphere { ell, .. } => 2 * *ell as usize + 1,
        _ => 0,
    }
}

// ---------------------------------------------------------------------
// Two-sample comparison
// ---------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct CompareReport {
    pub ks_distance: f64,
    pub p_value: f64,
    pub permutations: usize,
    pub m_a: u64,
    pub m_b: u64,
    pub fingerprint_a: String,
    pub fingerprint_b: String,
}

/// Two-sample Kolmogorov-Smirnov distance (tie-aware).
pub fn ks_distance(xs: &[f64], ys: &[f64]) -> f64 {
    let mut a = xs.to_vec();
    let mut b = ys.to_vec();
    a.sort_unstable_by(|p, q| p.partial_cmp(q).unwrap());
    b.sort_unstable_by(|p, q| p.partial_cmp(q).unwrap());
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let mut i = 0usize;
    let mut j = 0usize;
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Compares the measured functional between two experiments sharing the
/// same measurement and geometry: KS distance plus a label-permutation
/// p-value (add-one estimator).
pub fn distribution_compare(
    spec_a: &ExperimentSpec,
    spec_b: &ExperimentSpec,
    permutations: usize,
    perm_seed: u64,
) -> Result<CompareReport> {
    if spec_a.measurement != spec_b.measurement {
        return Err(Error::Incompatible("measurements differ".into()));
    }
    if spec_a.geometry != spec_b.geometry {
        return Err(Error::Incompatible("geometries differ".into()));
    }
    if spec_a.replicates < 500 || spec_b.replicates < 500 {
        return Err(Error::InvalidExperiment(
            "distribution comparison needs >= 500 replicates per side".into(),
        ));
    }
    if permutations < 1000 {
        return Err(Error::InvalidExperiment("need >= 1000 permutations".into()));
    }
    let a = mc_expectation(spec_a)?;
    let b = mc_expectation(spec_b)?;
    let xs = a.best_values();
    let ys = b.best_values();
    let observed = ks_distance(xs, ys);

    // permutation test on pooled, pre-sorted values: reshuffle labels
    // and recompute the KS statistic in one pass
    let mut pooled: Vec<f64> = xs.iter().chain(ys.iter()).copied().collect();
    let mut labels: Vec<bool> = vec![true; xs.len()];
    labels.resize(xs.len() + ys.len(), false);
    let mut order: Vec<usize> = (0..pooled.len()).collect();
    order.sort_unstable_by(|&p, &q| pooled[p].partial_cmp(&pooled[q]).unwrap());
    let sorted: Vec<f64> = order.iter().map(|&i| pooled[i]).collect();
    pooled.clear();

    let (na, nb) = (xs.len() as f64, ys.len() as f64);
    let ks_of_labels = |labels: &[bool], order: &[usize], sorted: &[f64]| -> f64 {
        let mut ca = 0usize;
        let mut cb = 0usize;
        let mut d: f64 = 0.0;
        for (pos, &idx) in order.iter().enumerate() {
            if labels[idx] {
                ca += 1;
            } else {
                cb += 1;
            }
            // only evaluate at the end of a tie group
            if pos + 1 == order.len() || sorted[pos + 1] > sorted[pos] {
                d = d.max((ca as f64 / na - cb as f64 / nb).abs());
            }
        }
        d
    };
    debug_assert!((ks_of_labels(&labels, &order, &sorted) - observed).abs() < 1e-12);

    let mut rng = SeedStream::new(perm_seed, 0).rng();
    let mut exceed = 0usize;
    for _ in 0..permutations {
        // Fisher-Yates label shuffle
        for i in (1..labels.len()).rev() {
            let j = rng.gen_range(0..=i);
            labels.swap(i, j);
        }
        if ks_of_labels(&labels, &order, &sorted) >= observed {
            exceed += 1;
        }
    }
    let p_value = (1 + exceed) as f64 / (permutations + 1) as f64;
    Ok(CompareReport {
        ks_distance: observed,
        p_value,
        permutations,
        m_a: spec_a.replicates,
        m_b: spec_b.replicates,
        fingerprint_a: spec_a.fingerprint(),
        fingerprint_b: spec_b.fingerprint(),
    })
}

// ---------------------------------------------------------------------
// Variance scan
// ---------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct ScanRow {
    pub parameter: f64,
    pub mean: f64,
    pub variance: f64,
    /// Moment-based standard error of the variance estimate.
    pub variance_se: f64,
    /// Mean of V log V across replicates (uniform-integrability probe).
    pub mean_v_log_v: f64,
    pub fingerprint: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct VarianceScan {
    pub rows: Vec<ScanRow>,
    /// Least-squares slope of log(variance) against log(parameter).
    pub loglog_slope: f64,
}

fn ladder_parameter(ensemble: &EnsembleDescriptor) -> f64 {
    match ensemble {
        EnsembleDescriptor::Arw { n, .. } => *n as f64,
        EnsembleDescriptor::TorusWindow { t, .. } => *t,
        EnsembleDescriptor::Sphere { ell, .. } => *ell as f64,
        EnsembleDescriptor::Rwm { j, .. } => *j as f64,
        EnsembleDescriptor::Synthetic { .. } => f64::NAN,
    }
}

/// Exploratory variance scan over a parameter ladder. Emits data for
/// human analysis; no pass/fail thresholds are attached.
pub fn variance_scan(family: &[ExperimentSpec]) -> Result<VarianceScan> {
    if family.len() < 3 {
        return Err(Error::InvalidExperiment("variance scan needs a ladder of >= 3".into()));
    }
    let mut rows = Vec::with_capacity(family.len());
    for spec in family {
        let report = mc_expectation(spec)?;
        let values = report.best_values();
        let summary = report.best();
        let m = values.len() as f64;
        let mu4 = values
            .iter()
            .map(|v| {
                let d = v - summary.mean;
                d * d * d * d
            })
            .sum::<f64>()
            / m;
        let var = summary.variance;
        let var_of_var = ((mu4 - var * var * (m - 3.0) / (m - 1.0)) / m).max(0.0);
        let mean_v_log_v = values
            .iter()
            .map(|&v| if v > 0.0 { v * v.ln() } else { 0.0 })
            .sum::<f64>()
            / m;
        rows.push(ScanRow {
            parameter: ladder_parameter(&spec.ensemble),
            mean: summary.mean,
            variance: var,
            variance_se: var_of_var.sqrt(),
            mean_v_log_v,
            fingerprint: summary.fingerprint.clone(),
        });
    }
    // log-log least squares on rows with positive variance
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.parameter > 0.0 && r.variance > 0.0)
        .map(|r| (r.parameter.ln(), r.variance.ln()))
        .collect();
    let slope = if pts.len() >= 2 {
        let n = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        let denom = n * sxx - sx * sx;
        if denom.abs() > 1e-12 {
            (n * sxy - sx * sy) / denom
        } else {
            f64::NAN
        }
    } else {
        f64::NAN
    };
    Ok(VarianceScan { rows, loglog_slope: slope })
}

// ---------------------------------------------------------------------
// Locality cross-check
// ---------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct LocalitySample {
    pub global: f64,
    pub reconstructed: f64,
    pub relative_discrepancy: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LocalityReport {
    pub radius: f64,
    pub centers: usize,
    pub mean_relative_discrepancy: f64,
    pub per_sample: Vec<LocalitySample>,
}

/// Compares global nodal length against its reconstruction from
/// restricted lengths in balls of radius 1/(2 lambda):
/// `V(f) ~ (2^n lambda^n / omega_n) * mean_centers V(f, B(x, 1/(2 lambda)))`
/// (unit-volume torus, n = 2), the scaled-ball locality identity.
pub fn locality_check(samples: &[FieldSample], centers_per_side: usize) -> Result<LocalityReport> {
    let Some(first) = samples.first() else {
        return Err(Error::InvalidExperiment("locality check needs samples".into()));
    };
    let GridGeometry::Torus2 { n } = first.geometry else {
        return Err(Error::InvalidExperiment("locality check runs on torus grids".into()));
    };
    if centers_per_side * centers_per_side < 100 {
        return Err(Error::InvalidExperiment(
            "locality check needs >= 100 ball centers".into(),
        ));
    }
    let lambda = first.unit_speed_scale();
    let radius = 1.0 / (2.0 * lambda);
    if radius > 0.5 {
        return Err(Error::Domain(format!(
            "locality ball radius {radius} exceeds the torus injectivity radius"
        )));
    }
    let centers: Vec<[f64; 2]> = (0..centers_per_side)
        .flat_map(|i| {
            (0..centers_per_side).map(move |j| (i, j))
        })
        .map(|(i, j)| {
            let row = i * n / centers_per_side;
            let col = j * n / centers_per_side;
            first.geometry.node_coords(row, col)
        })
        .collect();
    // 2^n lambda^n / omega_n for n = 2: 4 lambda^2 / pi
    let factor = 4.0 * lambda * lambda / std::f64::consts::PI;
    let per_sample: Vec<LocalitySample> = samples
        .par_iter()
        .map(|sample| -> Result<LocalitySample> {
            let segments = contour_segments(sample)?;
            let global: f64 = segments.iter().map(|s| s.length).sum();
            let mean_restricted = centers
                .iter()
                .map(|&c| clip_length_to_ball(&sample.geometry, &segments, c, radius))
                .sum::<f64>()
                / centers.len() as f64;
            let reconstructed = factor * mean_restricted;
            let relative_discrepancy = if global == 0.0 && reconstructed == 0.0 {
                0.0
            } else {
                (reconstructed - global).abs() / global.max(1e-12)
            };
            Ok(LocalitySample { global, reconstructed, relative_discrepancy })
        })
        .collect::<Result<Vec<_>>>()?;
    let mean = per_sample.iter().map(|s| s.relative_discrepancy).sum::<f64>()
        / per_sample.len() as f64;
    Ok(LocalityReport {
        radius,
        centers: centers.len(),
        mean_relative_discrepancy: mean,
        per_sample,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::FieldSample;
    use crate::laws::CoefficientLaw;

    #[test]
    fn fingerprint_stable_and_sensitive() {
        let spec = ExperimentSpec {
            ensemble: EnsembleDescriptor::Arw { n: 5, law: CoefficientLaw::Gaussian },
            geometry: GridGeometry::Torus2 { n: 64 },
            replicates: 10,
            master_seed: 7,
            measurement: Measurement::GlobalLength,
            richardson: false,
        };
        assert_eq!(spec.fingerprint(), spec.fingerprint());
        let mut other = spec.clone();
        other.master_seed = 8;
        assert_ne!(spec.fingerprint(), other.fingerprint());
    }

    #[test]
    fn summary_invariants() {
        let s = summarize(&[1.0, 2.0, 3.0, 4.0], "x".into()).unwrap();
        assert!((s.mean - 2.5).abs() < 1e-15);
        assert!((s.std_error - (s.variance / 4.0).sqrt()).abs() < 1e-15);
        assert!((s.ci95.1 - s.mean - 1.96 * s.std_error).abs() < 1e-12);
        assert!(summarize(&[1.0], "x".into()).is_err());
    }

    #[test]
    fn ks_distance_known_values() {
        assert_eq!(ks_distance(&[1.0, 2.0, 3.0, 4.0], &[2.0, 1.0, 4.0, 3.0]), 0.0);
        let d = ks_distance(&[1.0, 1.0, 4.0, 4.0], &[1.0, 1.0, 1.0, 4.0]);
        assert!((d - 0.25).abs() < 1e-12);
    }

    #[test]
    fn compare_rejects_mismatched_measurements() {
        let base = ExperimentSpec {
            ensemble: EnsembleDescriptor::Arw { n: 5, law: CoefficientLaw::Gaussian },
            geometry: GridGeometry::Torus2 { n: 64 },
            replicates: 600,
            master_seed: 7,
            measurement: Measurement::GlobalLength,
            richardson: false,
        };
        let mut other = base.clone();
        other.measurement = Measurement::RestrictedLength { center: [0.5, 0.5], radius: 0.1 };
        assert!(matches!(
            distribution_compare(&base, &other, 1000, 1),
            Err(Error::Incompatible(_))
        ));
    }

    #[test]
    fn locality_on_zero_free_field_is_exact() {
        let samples: Vec<FieldSample> = (0..3)
            .map(|i| {
                FieldSample::from_fn(
                    GridGeometry::Torus2 { n: 64 },
                    1.0,
                    "zero-free",
                    move |p| 2.0 + 0.1 * (2.0 * std::f64::consts::PI * p[0]).sin() + i as f64 * 0.0,
                )
            })
            .collect();
        let report = locality_check(&samples, 10).unwrap();
        assert_eq!(report.mean_relative_discrepancy, 0.0);
    }

    #[test]
    fn locality_sine_identity() {
        let samples = vec![FieldSample::from_fn(
            GridGeometry::Torus2 { n: 128 },
            1.0,
            "sin(2 pi x)",
            |p| (2.0 * std::f64::consts::PI * p[0]).sin(),
        )];
        let report = locality_check(&samples, 16).unwrap();
        assert!(
            report.mean_relative_discrepancy < 0.05,
            "discrepancy {}",
            report.mean_relative_discrepancy
        );
    }
}
