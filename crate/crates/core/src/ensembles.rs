//! Synthesis of random field realizations on structured grids, plus
//! empirical covariance extraction.
//!
//! Torus ensembles are synthesized by placing Hermitian coefficients on
//! the integer frequency lattice and running an inverse FFT; the result
//! must match direct summation at randomly chosen nodes to 1e-9 (see the
//! tests). Sphere ensembles evaluate a normalized associated Legendre
//! basis per latitude row with a trigonometric sum in phi. Every sample
//! carries an exact point evaluator so the nodal extractor can resolve
//! saddle cells without bilinear guessing.

use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rustfft::{Fft, FftDirection, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridGeometry;
use crate::laws::{draw_hermitian_with, draw_real_with, CoefficientLaw, SeedStream};
use crate::spectra::{annulus_points, circle_points, FrequencySet};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Which expansion the sphere sampler uses for the coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SphereBasis {
    /// Real orthonormal basis with i.i.d. real coefficients; the field
    /// has exact unit pointwise variance for every law (default).
    RealBasis,
    /// The literal complex combination `sum a_m Y_{l,m}` with i.i.d.
    /// real coefficients, real part taken. Note: the real part is not
    /// phi-stationary; this variant exists for comparison only.
    ComplexBernoulli,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "ensemble", rename_all = "snake_case")]
pub enum EnsembleDescriptor {
    /// 2d arithmetic random wave with |mu|^2 = n on the unit torus.
    Arw { n: u64, law: CoefficientLaw },
    /// Band-limited torus field over the window T - rho < |k| <= T.
    TorusWindow { dim: usize, t: f64, rho: f64, law: CoefficientLaw },
    /// Random spherical harmonic of degree ell.
    Sphere { ell: u32, law: CoefficientLaw, basis: SphereBasis },
    /// Planar monochromatic superposition of J random plane waves.
    Rwm { j: usize, law: CoefficientLaw },
    /// Deterministic test field; not drawn from a law.
    Synthetic { label: String },
}

impl EnsembleDescriptor {
    pub fn law(&self) -> Option<CoefficientLaw> {
        match self {
            EnsembleDescriptor::Arw { law, .. }
            | EnsembleDescriptor::TorusWindow { law, .. }
            | EnsembleDescriptor::Sphere { law, .. }
            | EnsembleDescriptor::Rwm { law, .. } => Some(*law),
            EnsembleDescriptor::Synthetic { .. } => None,
        }
    }

    /// The spectral parameter of the ensemble: sqrt(n), T, ell, or 1.
    pub fn frequency_scale(&self) -> f64 {
        match self {
            EnsembleDescriptor::Arw { n, .. } => (*n as f64).sqrt(),
            EnsembleDescriptor::TorusWindow { t, .. } => *t,
            EnsembleDescriptor::Sphere { ell, .. } => *ell as f64,
            EnsembleDescriptor::Rwm { .. } => 1.0,
            EnsembleDescriptor::Synthetic { .. } => 1.0,
        }
    }

    /// Frequency in cycles per unit length, the scale under which the
    /// rescaled field has the unit-speed covariance kernel. Equal to the
    /// spectral parameter except on the sphere, where the physical
    /// wavenumber is sqrt(ell (ell + 1)).
    pub fn unit_speed_scale(&self) -> f64 {
        match self {
            EnsembleDescriptor::Sphere { ell, .. } => {
                let l = *ell as f64;
                (l * (l + 1.0)).sqrt() / TWO_PI
            }
            other => other.frequency_scale(),
        }
    }

    /// Number of modes (summands) in the expansion.
    pub fn mode_count(&self) -> Result<usize> {
        match self {
            EnsembleDescriptor::Arw { n, .. } => {
                let c = circle_points(*n).count;
                if c == 0 {
                    Err(Error::EmptyFrequencySet(format!("{n} is not a sum of two squares")))
                } else {
                    Ok(c)
                }
            }
            EnsembleDescriptor::TorusWindow { dim, t, rho, .. } => {
                let fs = annulus_points(*dim, *t, *rho)?;
                if fs.is_empty() {
                    Err(Error::EmptyFrequencySet(format!("window ({},{t},{rho}) is empty", dim)))
                } else {
                    Ok(fs.count)
                }
            }
            EnsembleDescriptor::Sphere { ell, .. } => Ok(2 * *ell as usize + 1),
            EnsembleDescriptor::Rwm { j, .. } => Ok(*j),
            EnsembleDescriptor::Synthetic { .. } => {
                Err(Error::InvalidExperiment("synthetic fields have no modes".into()))
            }
        }
    }
}

/// Exact field evaluator attached to a sample.
pub type FieldEval = Arc<dyn Fn([f64; 2]) -> f64 + Send + Sync>;

/// One realization of a random field on a structured grid.
///
/// `values` is row-major over [`GridGeometry::node_dims`]. `freq_scale`
/// is the ensemble's spectral parameter (sqrt(n), T, ell; 1 for plane
/// waves); nodal measurement preconditions are stated against it.
#[derive(Clone, Serialize)]
pub struct FieldSample {
    pub geometry: GridGeometry,
    pub descriptor: EnsembleDescriptor,
    pub replicate: u64,
    pub freq_scale: f64,
    pub stream: Option<SeedStream>,
    #[serde(skip)]
    pub values: Vec<f64>,
    #[serde(skip)]
    pub eval: Option<FieldEval>,
}

impl std::fmt::Debug for FieldSample {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FieldSample")
            .field("geometry", &self.geometry)
            .field("descriptor", &self.descriptor)
            .field("replicate", &self.replicate)
            .field("freq_scale", &self.freq_scale)
            .field("values", &format_args!("[{} nodes]", self.values.len()))
            .finish()
    }
}

impl FieldSample {
    /// Build a deterministic sample by evaluating a function at grid
    /// nodes. `freq_scale` must bound the field's frequency content so
    /// resolution preconditions stay meaningful.
    pub fn from_fn<F>(geometry: GridGeometry, freq_scale: f64, label: &str, f: F) -> Self
    where
        F: Fn([f64; 2]) -> f64 + Send + Sync + 'static,
    {
        let (rows, cols) = geometry.node_dims();
        let mut values = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                values.push(f(geometry.node_coords(r, c)));
            }
        }
        FieldSample {
            geometry,
            descriptor: EnsembleDescriptor::Synthetic { label: label.to_string() },
            replicate: 0,
            freq_scale,
            stream: None,
            values,
            eval: Some(Arc::new(f)),
        }
    }

    pub fn value(&self, row: usize, col: usize) -> f64 {
        let (_, cols) = self.geometry.node_dims();
        self.values[row * cols + col]
    }

    /// Frequency in cycles per unit length (see
    /// [`EnsembleDescriptor::unit_speed_scale`]); for synthetic fields
    /// this is the declared `freq_scale`.
    pub fn unit_speed_scale(&self) -> f64 {
        match &self.descriptor {
            EnsembleDescriptor::Synthetic { .. } => self.freq_scale,
            d => d.unit_speed_scale(),
        }
    }

    /// Grid mean of squared values (diagnostic for unit variance).
    pub fn mean_square(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>() / self.values.len() as f64
    }
}

// ---------------------------------------------------------------------
// Torus spectral synthesis
// ---------------------------------------------------------------------

/// Shared synthesis state for a torus spectral ensemble: the sorted
/// half-lattice representatives, the total mode count and a cached FFT
/// plan for the target grid.
pub struct TorusSynthesizer {
    grid_n: usize,
    modes_total: usize,
    reps: Arc<Vec<[i64; 2]>>,
    fft: Arc<dyn Fft<f64>>,
    descriptor: EnsembleDescriptor,
    freq_scale: f64,
}

impl TorusSynthesizer {
    pub fn new(
        fs: &FrequencySet,
        geometry: &GridGeometry,
        descriptor: EnsembleDescriptor,
    ) -> Result<Self> {
        let GridGeometry::Torus2 { n } = *geometry else {
            return Err(Error::InvalidExperiment(
                "torus synthesis requires a Torus2 grid".into(),
            ));
        };
        if fs.is_empty() {
            return Err(Error::EmptyFrequencySet(format!("{:?}", fs.kind)));
        }
        let freq_scale = descriptor.frequency_scale();
        // Nyquist margin of 2x over the highest frequency
        if (n as f64) <= 4.0 * freq_scale {
            return Err(Error::Resolution(format!(
                "grid {n} too coarse for frequency scale {freq_scale} (need n > 4 * scale)"
            )));
        }
        let reps = fs.half_lattice_representatives();
        if reps.len() * 2 != fs.count {
            return Err(Error::InvalidExperiment(
                "frequency set is not closed under antipodal pairing".into(),
            ));
        }
        let fft = FftPlanner::new().plan_fft(n, FftDirection::Inverse);
        Ok(Self {
            grid_n: n,
            modes_total: fs.count,
            reps: Arc::new(reps),
            fft,
            descriptor,
            freq_scale,
        })
    }

    pub fn mode_count(&self) -> usize {
        self.modes_total
    }

    /// One Hermitian coefficient per representative, in the sorted
    /// representative order (deterministic given the stream).
    pub fn coefficients(&self, stream: SeedStream) -> Result<Vec<Complex64>> {
        let law = self.descriptor.law().ok_or_else(|| {
            Error::InvalidExperiment("synthetic descriptor cannot be drawn".into())
        })?;
        let mut rng = stream.rng();
        Ok(draw_hermitian_with(law, &mut rng, self.reps.len()))
    }

    pub fn sample(&self, stream: SeedStream, replicate: u64) -> Result<FieldSample> {
        let coeffs = self.coefficients(stream)?;
        let mut sample = self.sample_with_coeffs(&coeffs, replicate);
        sample.stream = Some(stream);
        Ok(sample)
    }

    /// Synthesis from explicit coefficients (also the test hook for
    /// degenerate coefficient patterns).
    pub fn sample_with_coeffs(&self, coeffs: &[Complex64], replicate: u64) -> FieldSample {
        assert_eq!(coeffs.len(), self.reps.len());
        let n = self.grid_n;
        let mut buf = vec![Complex64::new(0.0, 0.0); n * n];
        for (rep, &a) in self.reps.iter().zip(coeffs.iter()) {
            let r = rep[0].rem_euclid(n as i64) as usize;
            let c = rep[1].rem_euclid(n as i64) as usize;
            let rm = (-rep[0]).rem_euclid(n as i64) as usize;
            let cm = (-rep[1]).rem_euclid(n as i64) as usize;
            buf[r * n + c] += a;
            buf[rm * n + cm] += a.conj();
        }
        self.ifft2(&mut buf);
        let norm = 1.0 / (self.modes_total as f64).sqrt();
        let mut max_imag = 0.0_f64;
        let values: Vec<f64> = buf
            .iter()
            .map(|z| {
                max_imag = max_imag.max(z.im.abs());
                z.re * norm
            })
            .collect();
        assert!(
            max_imag * norm < 1e-10,
            "Hermitian reduction left imaginary residue {:.3e}",
            max_imag * norm
        );
        let eval = self.evaluator(coeffs);
        FieldSample {
            geometry: GridGeometry::Torus2 { n },
            descriptor: self.descriptor.clone(),
            replicate,
            freq_scale: self.freq_scale,
            stream: None,
            values,
            eval: Some(eval),
        }
    }

    /// Direct (non-FFT) evaluation of the same field at arbitrary torus
    /// points; the FFT output must agree with this to 1e-9.
    pub fn eval_direct(&self, coeffs: &[Complex64], points: &[[f64; 2]]) -> Vec<f64> {
        let eval = self.evaluator(coeffs);
        points.iter().map(|&p| eval(p)).collect()
    }

    fn evaluator(&self, coeffs: &[Complex64]) -> FieldEval {
        let reps = Arc::clone(&self.reps);
        let coeffs: Arc<Vec<Complex64>> = Arc::new(coeffs.to_vec());
        let norm = 2.0 / (self.modes_total as f64).sqrt();
        Arc::new(move |p: [f64; 2]| {
            let mut acc = 0.0;
            for (rep, a) in reps.iter().zip(coeffs.iter()) {
                let arg = TWO_PI * (rep[0] as f64 * p[0] + rep[1] as f64 * p[1]);
                let (s, c) = arg.sin_cos();
                acc += a.re * c - a.im * s;
            }
            acc * norm
        })
    }

    /// Evaluate the field with the given coefficients on a local square
    /// patch (plane-chart sample) centred at a torus point. Used for
    /// fine-resolution restricted nodal measurements; the patch must be
    /// small against the torus period.
    pub fn sample_patch(
        &self,
        coeffs: &[Complex64],
        center: [f64; 2],
        half_width: f64,
        nodes: usize,
        replicate: u64,
    ) -> Result<FieldSample> {
        if half_width <= 0.0 || half_width > 0.25 {
            return Err(Error::Domain(format!(
                "patch half-width must lie in (0, 0.25], got {half_width}"
            )));
        }
        let geometry = GridGeometry::plane_chart(nodes, 2.0 * half_width)?;
        let h = 2.0 * half_width / (nodes as f64 - 1.0);
        let norm = 2.0 / (self.modes_total as f64).sqrt();
        let mut values = vec![0.0_f64; nodes * nodes];
        let origin = [center[0] - half_width, center[1] - half_width];
        for (rep, a) in self.reps.iter().zip(coeffs.iter()) {
            let k0 = rep[0] as f64;
            let k1 = rep[1] as f64;
            let base = TWO_PI * (k0 * origin[0] + k1 * origin[1]);
            let mut row_phase = Complex64::from_polar(1.0, base) * Complex64::new(a.re, a.im);
            let step_row = Complex64::from_polar(1.0, TWO_PI * k0 * h);
            let step_col = Complex64::from_polar(1.0, TWO_PI * k1 * h);
            for r in 0..nodes {
                let mut w = row_phase;
                let row = &mut values[r * nodes..(r + 1) * nodes];
                for v in row.iter_mut() {
                    *v += w.re;
                    w *= step_col;
                }
                row_phase *= step_row;
            }
        }
        for v in values.iter_mut() {
            *v *= norm;
        }
        let inner = self.evaluator(coeffs);
        let eval: FieldEval = Arc::new(move |p: [f64; 2]| {
            inner([origin[0] + half_width + p[0], origin[1] + half_width + p[1]])
        });
        Ok(FieldSample {
            geometry,
            descriptor: self.descriptor.clone(),
            replicate,
            freq_scale: self.freq_scale,
            stream: None,
            values,
            eval: Some(eval),
        })
    }

    fn ifft2(&self, buf: &mut [Complex64]) {
        let n = self.grid_n;
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.fft.get_inplace_scratch_len()];
        for row in buf.chunks_exact_mut(n) {
            self.fft.process_with_scratch(row, &mut scratch);
        }
        // transpose, transform rows again, transpose back
        let mut t = vec![Complex64::new(0.0, 0.0); n * n];
        for r in 0..n {
            for c in 0..n {
                t[c * n + r] = buf[r * n + c];
            }
        }
        for row in t.chunks_exact_mut(n) {
            self.fft.process_with_scratch(row, &mut scratch);
        }
        for r in 0..n {
            for c in 0..n {
                buf[r * n + c] = t[c * n + r];
            }
        }
    }
}

/// Arithmetic random wave `g(x) = r2(n)^{-1/2} sum_{|mu|^2=n} a_mu e(<mu, x>)`.
pub fn sample_arw(
    n: u64,
    law: CoefficientLaw,
    geometry: &GridGeometry,
    stream: SeedStream,
) -> Result<FieldSample> {
    let fs = circle_points(n);
    if fs.is_empty() {
        return Err(Error::EmptyFrequencySet(format!("{n} is not a sum of two squares")));
    }
    let synth = TorusSynthesizer::new(&fs, geometry, EnsembleDescriptor::Arw { n, law })?;
    synth.sample(stream, stream.stream_index)
}

/// Band-limited torus field over the energy window (T - rho, T].
pub fn sample_bandlimited_torus(
    dim: usize,
    t: f64,
    rho: f64,
    law: CoefficientLaw,
    geometry: &GridGeometry,
    stream: SeedStream,
) -> Result<FieldSample> {
    let fs = annulus_points(dim, t, rho)?;
    if fs.is_empty() {
        return Err(Error::EmptyFrequencySet(format!(
            "window ({dim}, T={t}, rho={rho}) contains no lattice points"
        )));
    }
    let descriptor = EnsembleDescriptor::TorusWindow { dim, t, rho, law };
    match dim {
        2 => {
            let synth = TorusSynthesizer::new(&fs, geometry, descriptor)?;
            synth.sample(stream, stream.stream_index)
        }
        1 => {
            let GridGeometry::Torus1 { n } = *geometry else {
                return Err(Error::InvalidExperiment(
                    "dim-1 window requires a Torus1 grid".into(),
                ));
            };
            if (n as f64) <= 4.0 * t {
                return Err(Error::Resolution(format!(
                    "grid {n} too coarse for frequency scale {t}"
                )));
            }
            let reps: Vec<i64> = fs
                .points2()
                .filter(|p| p[0] > 0)
                .map(|p| p[0])
                .collect();
            let mut rng = stream.rng();
            let coeffs = draw_hermitian_with(law, &mut rng, reps.len());
            let norm = 2.0 / (fs.count as f64).sqrt();
            let values: Vec<f64> = (0..n)
                .map(|j| {
                    let x = j as f64 / n as f64;
                    let mut acc = 0.0;
                    for (&k, a) in reps.iter().zip(coeffs.iter()) {
                        let arg = TWO_PI * k as f64 * x;
                        let (s, c) = arg.sin_cos();
                        acc += a.re * c - a.im * s;
                    }
                    acc * norm
                })
                .collect();
            Ok(FieldSample {
                geometry: *geometry,
                descriptor,
                replicate: stream.stream_index,
                freq_scale: t,
                stream: Some(stream),
                values,
                eval: None,
            })
        }
        other => Err(Error::Domain(format!("band-limited sampling supports dim 1 or 2, got {other}"))),
    }
}

// ---------------------------------------------------------------------
// Sphere synthesis
// ---------------------------------------------------------------------

/// Precomputed degree-ell basis tables on a latitude-longitude grid.
///
/// `legendre[m][row]` holds `Q_ell^m(cos theta_row)`; the phi factors
/// are plain trigonometric tables. One instance serves any number of
/// replicates.
pub struct SphereSynthesizer {
    ell: u32,
    n_theta: usize,
    n_phi: usize,
    legendre: Vec<Vec<f64>>,
    cos_m: Vec<Vec<f64>>,
    sin_m: Vec<Vec<f64>>,
    law: CoefficientLaw,
    basis: SphereBasis,
}

impl SphereSynthesizer {
    pub fn new(
        ell: u32,
        geometry: &GridGeometry,
        law: CoefficientLaw,
        basis: SphereBasis,
    ) -> Result<Self> {
        let GridGeometry::Sphere { n_theta, n_phi } = *geometry else {
            return Err(Error::InvalidExperiment("sphere synthesis requires a Sphere grid".into()));
        };
        if ell < 1 {
            return Err(Error::Domain("sphere degree must be >= 1".into()));
        }
        // points per wavelength along theta and (equatorial) phi
        let wavenumber = (ell as f64 * (ell as f64 + 1.0)).sqrt();
        let ppw_theta = 2.0 * n_theta as f64 / wavenumber;
        let ppw_phi = n_phi as f64 / ell as f64;
        let ppw = ppw_theta.min(ppw_phi);
        if ppw < 2.0 {
            return Err(Error::Resolution(format!(
                "sphere grid {n_theta}x{n_phi} below 2 points per wavelength for ell={ell}"
            )));
        }
        if ppw < 4.0 {
            log::warn!(
                "sphere grid {n_theta}x{n_phi} below 4 points per wavelength for ell={ell}"
            );
        } else if n_theta < 8 * ell as usize {
            log::info!("sphere grid {n_theta}x{n_phi} below the recommended n_theta >= 8 ell");
        }
        let lmax = ell as usize;
        let mut legendre = vec![vec![0.0; n_theta]; lmax + 1];
        for row in 0..n_theta {
            let theta = (row as f64 + 0.5) * std::f64::consts::PI / n_theta as f64;
            let x = theta.cos();
            for (m, table) in legendre.iter_mut().enumerate() {
                table[row] = crate::special::legendre_assoc_normalized(ell, m as i32, x)
                    .expect("order within degree");
            }
        }
        let mut cos_m = vec![vec![0.0; n_phi]; lmax + 1];
        let mut sin_m = vec![vec![0.0; n_phi]; lmax + 1];
        for m in 0..=lmax {
            for col in 0..n_phi {
                let phi = col as f64 * TWO_PI / n_phi as f64;
                let (s, c) = (m as f64 * phi).sin_cos();
                cos_m[m][col] = c;
                sin_m[m][col] = s;
            }
        }
        Ok(Self { ell, n_theta, n_phi, legendre, cos_m, sin_m, law, basis })
    }

    /// Draws 2 ell + 1 coefficients in the documented order and
    /// synthesizes the realization.
    ///
    /// Real basis: order `[a_0, a_1, b_1, ..., a_ell, b_ell]` and
    /// `f = a_0 Q_0 + sqrt(2) sum_m Q_m (a_m cos(m phi) + b_m sin(m phi))`.
    /// Complex Bernoulli: order `[a_{-ell}, ..., a_{ell}]`, real part of
    /// `(2 ell + 1)^{-1/2} sum_m a_m Y_{l,m}`.
    pub fn sample(&self, stream: SeedStream, replicate: u64) -> FieldSample {
        let mut rng = stream.rng();
        let draws = draw_real_with(self.law, &mut rng, 2 * self.ell as usize + 1);
        let mut sample = self.sample_with_draws(&draws, replicate);
        sample.stream = Some(stream);
        sample
    }

    pub fn sample_with_draws(&self, draws: &[f64], replicate: u64) -> FieldSample {
        assert_eq!(draws.len(), 2 * self.ell as usize + 1);
        let lmax = self.ell as usize;
        let (coef_a, coef_b) = self.combine_draws(draws);
        let mut values = vec![0.0_f64; self.n_theta * self.n_phi];
        for row in 0..self.n_theta {
            let out = &mut values[row * self.n_phi..(row + 1) * self.n_phi];
            for m in 0..=lmax {
                let qa = self.legendre[m][row] * coef_a[m];
                let qb = self.legendre[m][row] * coef_b[m];
                if qa == 0.0 && qb == 0.0 {
                    continue;
                }
                let cm = &self.cos_m[m];
                let sm = &self.sin_m[m];
                for (col, v) in out.iter_mut().enumerate() {
                    *v += qa * cm[col] + qb * sm[col];
                }
            }
        }
        let ell = self.ell;
        let (ca, cb) = (coef_a.clone(), coef_b.clone());
        let eval: FieldEval = Arc::new(move |p: [f64; 2]| {
            let x = p[0].cos();
            let mut acc = 0.0;
            for (m, (a, b)) in ca.iter().zip(cb.iter()).enumerate() {
                if *a == 0.0 && *b == 0.0 {
                    continue;
                }
                let q = crate::special::legendre_assoc_normalized(ell, m as i32, x)
                    .expect("order within degree");
                let (s, c) = (m as f64 * p[1]).sin_cos();
                acc += q * (a * c + b * s);
            }
            acc
        });
        FieldSample {
            geometry: GridGeometry::Sphere { n_theta: self.n_theta, n_phi: self.n_phi },
            descriptor: EnsembleDescriptor::Sphere {
                ell: self.ell,
                law: self.law,
                basis: self.basis,
            },
            replicate,
            freq_scale: self.ell as f64,
            stream: None,
            values,
            eval: Some(eval),
        }
    }

    /// Per-order cos/sin coefficients from the raw draws.
    fn combine_draws(&self, draws: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let lmax = self.ell as usize;
        let mut coef_a = vec![0.0; lmax + 1];
        let mut coef_b = vec![0.0; lmax + 1];
        match self.basis {
            SphereBasis::RealBasis => {
                let sqrt2 = std::f64::consts::SQRT_2;
                coef_a[0] = draws[0];
                for m in 1..=lmax {
                    coef_a[m] = sqrt2 * draws[2 * m - 1];
                    coef_b[m] = sqrt2 * draws[2 * m];
                }
            }
            SphereBasis::ComplexBernoulli => {
                // Re sum_{m=-l}^{l} a_m Q_|m| e^{i m phi} with
                // Q_{-m} = (-1)^m Q_m; draws indexed by m + l
                coef_a[0] = draws[lmax];
                for m in 1..=lmax {
                    let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                    coef_a[m] = draws[lmax + m] + sign * draws[lmax - m];
                }
            }
        }
        (coef_a, coef_b)
    }
}

/// Convenience wrapper constructing the synthesizer per call.
pub fn sample_sphere(
    ell: u32,
    law: CoefficientLaw,
    geometry: &GridGeometry,
    stream: SeedStream,
    basis: SphereBasis,
) -> Result<FieldSample> {
    let synth = SphereSynthesizer::new(ell, geometry, law, basis)?;
    Ok(synth.sample(stream, stream.stream_index))
}

// ---------------------------------------------------------------------
// Random plane-wave superposition
// ---------------------------------------------------------------------

/// `F(x) = sqrt(2/J) sum_j a_j cos(2 pi <x, xi_j> + theta_j)` with unit
/// directions `xi_j` and phases `theta_j` uniform. Draw order per
/// replicate: the J amplitudes first, then (direction, phase) pairs.
pub fn sample_rwm_plane(
    j: usize,
    geometry: &GridGeometry,
    stream: SeedStream,
    law: CoefficientLaw,
) -> Result<FieldSample> {
    if j < 16 {
        return Err(Error::Domain(format!("plane-wave count must be >= 16, got {j}")));
    }
    let GridGeometry::PlaneChart { n, side } = *geometry else {
        return Err(Error::InvalidExperiment("plane-wave sampling requires a PlaneChart".into()));
    };
    let mut rng = stream.rng();
    let amps = draw_real_with(law, &mut rng, j);
    let mut dirs = Vec::with_capacity(j);
    let mut phases = Vec::with_capacity(j);
    for _ in 0..j {
        dirs.push(rng.gen::<f64>() * TWO_PI);
        phases.push(rng.gen::<f64>() * TWO_PI);
    }
    let scale = (2.0 / j as f64).sqrt();
    let h = side / (n as f64 - 1.0);
    let origin = -side / 2.0;
    let mut values = vec![0.0_f64; n * n];
    for idx in 0..j {
        let (sd, cd) = dirs[idx].sin_cos();
        let amp = scale * amps[idx];
        let base = TWO_PI * (origin * cd + origin * sd) + phases[idx];
        let mut row_phase = Complex64::from_polar(amp, base);
        let step_row = Complex64::from_polar(1.0, TWO_PI * cd * h);
        let step_col = Complex64::from_polar(1.0, TWO_PI * sd * h);
        for r in 0..n {
            let mut w = row_phase;
            let row = &mut values[r * n..(r + 1) * n];
            for v in row.iter_mut() {
                *v += w.re;
                w *= step_col;
            }
            row_phase *= step_row;
        }
    }
    let eval: FieldEval = {
        let amps = amps.clone();
        let dirs = dirs.clone();
        let phases = phases.clone();
        Arc::new(move |p: [f64; 2]| {
            let mut acc = 0.0;
            for i in 0..amps.len() {
                let (sd, cd) = dirs[i].sin_cos();
                acc += amps[i] * (TWO_PI * (p[0] * cd + p[1] * sd) + phases[i]).cos();
            }
            acc * scale
        })
    };
    Ok(FieldSample {
        geometry: *geometry,
        descriptor: EnsembleDescriptor::Rwm { j, law },
        replicate: stream.stream_index,
        freq_scale: 1.0,
        stream: Some(stream),
        values,
        eval: Some(eval),
    })
}

// ---------------------------------------------------------------------
// Point sampling (for small-ball probabilities)
// ---------------------------------------------------------------------

/// Evaluates fresh replicates of an ensemble at one fixed point without
/// synthesizing a grid.
pub struct PointSampler {
    descriptor: EnsembleDescriptor,
    kind: PointSamplerKind,
}

enum PointSamplerKind {
    Torus { reps: Vec<[i64; 2]>, modes_total: usize, law: CoefficientLaw, point: [f64; 2] },
    Sphere {
        legendre: Vec<f64>,
        phi: f64,
        ell: u32,
        law: CoefficientLaw,
        basis: SphereBasis,
    },
    Rwm { j: usize, law: CoefficientLaw, point: [f64; 2] },
}

impl PointSampler {
    pub fn new(descriptor: &EnsembleDescriptor, point: [f64; 2]) -> Result<Self> {
        let kind = match descriptor {
            EnsembleDescriptor::Arw { n, law } => {
                let fs = circle_points(*n);
                if fs.is_empty() {
                    return Err(Error::EmptyFrequencySet(format!(
                        "{n} is not a sum of two squares"
                    )));
                }
                PointSamplerKind::Torus {
                    reps: fs.half_lattice_representatives(),
                    modes_total: fs.count,
                    law: *law,
                    point,
                }
            }
            EnsembleDescriptor::TorusWindow { dim, t, rho, law } => {
                if *dim != 2 {
                    return Err(Error::Domain("point sampling supports dim-2 windows".into()));
                }
                let fs = annulus_points(*dim, *t, *rho)?;
                if fs.is_empty() {
                    return Err(Error::EmptyFrequencySet("empty window".into()));
                }
                PointSamplerKind::Torus {
                    reps: fs.half_lattice_representatives(),
                    modes_total: fs.count,
                    law: *law,
                    point,
                }
            }
            EnsembleDescriptor::Sphere { ell, law, basis } => {
                let x = point[0].cos();
                let legendre: Vec<f64> = (0..=*ell as i32)
                    .map(|m| crate::special::legendre_assoc_normalized(*ell, m, x).unwrap())
                    .collect();
                PointSamplerKind::Sphere { legendre, phi: point[1], ell: *ell, law: *law, basis: *basis }
            }
            EnsembleDescriptor::Rwm { j, law } => {
                PointSamplerKind::Rwm { j: *j, law: *law, point }
            }
            EnsembleDescriptor::Synthetic { .. } => {
                return Err(Error::InvalidExperiment("synthetic fields cannot be redrawn".into()))
            }
        };
        Ok(Self { descriptor: descriptor.clone(), kind })
    }

    pub fn descriptor(&self) -> &EnsembleDescriptor {
        &self.descriptor
    }

    /// The field value of replicate `stream` at the fixed point. Draw
    /// order matches the corresponding grid sampler exactly.
    pub fn value(&self, stream: SeedStream) -> f64 {
        let mut rng = stream.rng();
        match &self.kind {
            PointSamplerKind::Torus { reps, modes_total, law, point } => {
                let coeffs = draw_hermitian_with(*law, &mut rng, reps.len());
                let norm = 2.0 / (*modes_total as f64).sqrt();
                let mut acc = 0.0;
                for (rep, a) in reps.iter().zip(coeffs.iter()) {
                    let arg = TWO_PI * (rep[0] as f64 * point[0] + rep[1] as f64 * point[1]);
                    let (s, c) = arg.sin_cos();
                    acc += a.re * c - a.im * s;
                }
                acc * norm
            }
            PointSamplerKind::Sphere { legendre, phi, ell, law, basis } => {
                let lmax = *ell as usize;
                let draws = draw_real_with(*law, &mut rng, 2 * lmax + 1);
                let mut acc;
                match basis {
                    SphereBasis::RealBasis => {
                        let sqrt2 = std::f64::consts::SQRT_2;
                        acc = draws[0] * legendre[0];
                        for m in 1..=lmax {
                            let (s, c) = (m as f64 * phi).sin_cos();
                            acc += sqrt2
                                * legendre[m]
                                * (draws[2 * m - 1] * c + draws[2 * m] * s);
                        }
                    }
                    SphereBasis::ComplexBernoulli => {
                        acc = draws[lmax] * legendre[0];
                        for m in 1..=lmax {
                            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                            let c = (m as f64 * phi).cos();
                            acc += legendre[m] * c * (draws[lmax + m] + sign * draws[lmax - m]);
                        }
                    }
                }
                acc
            }
            PointSamplerKind::Rwm { j, law, point } => {
                let amps = draw_real_with(*law, &mut rng, *j);
                let scale = (2.0 / *j as f64).sqrt();
                let mut acc = 0.0;
                for &a in &amps {
                    let dir = rng.gen::<f64>() * TWO_PI;
                    let phase = rng.gen::<f64>() * TWO_PI;
                    let (sd, cd) = dir.sin_cos();
                    acc += a * (TWO_PI * (point[0] * cd + point[1] * sd) + phase).cos();
                }
                acc * scale
            }
        }
    }
}

// ---------------------------------------------------------------------
// Empirical covariance
// ---------------------------------------------------------------------

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CovEstimate {
    pub mean: f64,
    pub std_error: f64,
}

/// Unbiased sample mean of value products over the given node pairs
/// (flat node indices), with standard errors across samples.
pub fn empirical_covariance(
    samples: &[FieldSample],
    pairs: &[(usize, usize)],
) -> Result<Vec<CovEstimate>> {
    if samples.len() < 100 {
        return Err(Error::InvalidExperiment(format!(
            "covariance estimation needs >= 100 samples, got {}",
            samples.len()
        )));
    }
    let nodes = samples[0].values.len();
    if let Some(&(i, j)) = pairs.iter().find(|&&(i, j)| i >= nodes || j >= nodes) {
        return Err(Error::Domain(format!(
            "pair ({i}, {j}) outside the grid of {nodes} nodes"
        )));
    }
    let m = samples.len() as f64;
    Ok(pairs
        .iter()
        .map(|&(i, j)| {
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for s in samples {
                let p = s.values[i] * s.values[j];
                sum += p;
                sum_sq += p * p;
            }
            let mean = sum / m;
            let var = (sum_sq - m * mean * mean) / (m - 1.0);
            CovEstimate { mean, std_error: (var.max(0.0) / m).sqrt() }
        })
        .collect())
}

/// Covariance at a grid-aligned lag on the torus, spatially averaged
/// over all node pairs per sample; the per-sample spatial means are
/// i.i.d., so the standard error across samples is valid.
pub fn lag_covariance_torus(samples: &[FieldSample], lag: [usize; 2]) -> Result<CovEstimate> {
    let Some(first) = samples.first() else {
        return Err(Error::InvalidExperiment("no samples".into()));
    };
    let GridGeometry::Torus2 { n } = first.geometry else {
        return Err(Error::InvalidExperiment("lag covariance requires a torus grid".into()));
    };
    let mut per_sample = Vec::with_capacity(samples.len());
    for s in samples {
        let v = &s.values;
        let mut acc = 0.0;
        for r in 0..n {
            let r2 = (r + lag[0]) % n;
            for c in 0..n {
                let c2 = (c + lag[1]) % n;
                acc += v[r * n + c] * v[r2 * n + c2];
            }
        }
        per_sample.push(acc / (n * n) as f64);
    }
    Ok(mean_se(&per_sample))
}

/// Covariance at a chart-aligned lag (in grid steps) on a plane chart,
/// averaged over both axis directions.
pub fn lag_covariance_plane(samples: &[FieldSample], lag_steps: usize) -> Result<CovEstimate> {
    let Some(first) = samples.first() else {
        return Err(Error::InvalidExperiment("no samples".into()));
    };
    let GridGeometry::PlaneChart { n, .. } = first.geometry else {
        return Err(Error::InvalidExperiment("plane lag covariance requires a chart".into()));
    };
    if lag_steps >= n {
        return Err(Error::Domain("lag exceeds chart".into()));
    }
    let mut per_sample = Vec::with_capacity(samples.len());
    for s in samples {
        let v = &s.values;
        let mut acc = 0.0;
        let mut count = 0usize;
        for r in 0..n {
            for c in 0..n - lag_steps {
                acc += v[r * n + c] * v[r * n + c + lag_steps];
                count += 1;
            }
        }
        for r in 0..n - lag_steps {
            for c in 0..n {
                acc += v[r * n + c] * v[(r + lag_steps) * n + c];
                count += 1;
            }
        }
        per_sample.push(acc / count as f64);
    }
    Ok(mean_se(&per_sample))
}

/// Covariance between same-row sphere nodes `dcol` columns apart,
/// averaged around the row; returns the estimate and the angular
/// distance of such a pair.
pub fn row_lag_covariance_sphere(
    samples: &[FieldSample],
    row: usize,
    dcol: usize,
) -> Result<(CovEstimate, f64)> {
    let Some(first) = samples.first() else {
        return Err(Error::InvalidExperiment("no samples".into()));
    };
    let GridGeometry::Sphere { n_theta, n_phi } = first.geometry else {
        return Err(Error::InvalidExperiment("requires a sphere grid".into()));
    };
    if row >= n_theta {
        return Err(Error::Domain("row outside grid".into()));
    }
    let mut per_sample = Vec::with_capacity(samples.len());
    for s in samples {
        let v = &s.values[row * n_phi..(row + 1) * n_phi];
        let mut acc = 0.0;
        for c in 0..n_phi {
            acc += v[c] * v[(c + dcol) % n_phi];
        }
        per_sample.push(acc / n_phi as f64);
    }
    let a = first.geometry.node_coords(row, 0);
    let b = first.geometry.node_coords(row, dcol % n_phi);
    let d = first.geometry.distance(a, b);
    Ok((mean_se(&per_sample), d))
}

fn mean_se(values: &[f64]) -> CovEstimate {
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1.0);
    CovEstimate { mean, std_error: (var / m).sqrt() }
}

// ---------------------------------------------------------------------
// Export
// ---------------------------------------------------------------------

/// Hash of the sample's identity (geometry, descriptor, seed,
/// replicate); stamped into exported artifacts.
pub fn sample_fingerprint(sample: &FieldSample) -> String {
    use sha2::{Digest, Sha256};
    let identity = serde_json::json!({
        "geometry": sample.geometry,
        "descriptor": sample.descriptor,
        "replicate": sample.replicate,
        "seed": sample.stream,
    });
    let digest = Sha256::digest(identity.to_string().as_bytes());
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes grid values as CSV (or flat little-endian f64 binary) next to
/// a JSON header describing geometry, ensemble, seed and replicate.
pub fn export_sample(
    sample: &FieldSample,
    base: &std::path::Path,
    binary: bool,
) -> std::io::Result<()> {
    #[derive(Serialize)]
    struct Header<'a> {
        schema: u32,
        geometry: &'a GridGeometry,
        descriptor: &'a EnsembleDescriptor,
        replicate: u64,
        freq_scale: f64,
        seed: Option<SeedStream>,
        fingerprint: String,
        values_file: String,
        layout: &'static str,
    }
    let data_name = if binary {
        base.with_extension("f64")
    } else {
        base.with_extension("csv")
    };
    let header = Header {
        schema: 1,
        geometry: &sample.geometry,
        descriptor: &sample.descriptor,
        replicate: sample.replicate,
        freq_scale: sample.freq_scale,
        seed: sample.stream,
        fingerprint: sample_fingerprint(sample),
        values_file: data_name
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default(),
        layout: "row-major",
    };
    let json = serde_json::to_string_pretty(&header).expect("header serializes");
    std::fs::write(base.with_extension("json"), json)?;
    let mut out = std::io::BufWriter::new(std::fs::File::create(&data_name)?);
    if binary {
        for v in &sample.values {
            out.write_all(&v.to_le_bytes())?;
        }
    } else {
        let (_, cols) = sample.geometry.node_dims();
        for row in sample.values.chunks(cols) {
            let line: Vec<String> = row.iter().map(|v| format!("{v:.17e}")).collect();
            writeln!(out, "{}", line.join(","))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn degenerate_arw_n1_is_cosine_sum() {
        // all coefficients forced to 1: g = (2/sqrt(4)) (cos 2 pi x + cos 2 pi y)
        let fs = circle_points(1);
        let geometry = GridGeometry::torus2(16).unwrap();
        let synth = TorusSynthesizer::new(
            &fs,
            &geometry,
            EnsembleDescriptor::Arw { n: 1, law: CoefficientLaw::Gaussian },
        )
        .unwrap();
        let coeffs = vec![Complex64::new(1.0, 0.0); 2];
        let sample = synth.sample_with_coeffs(&coeffs, 0);
        assert!((sample.value(0, 0) - 2.0).abs() < 1e-12);
        let x = 3.0 / 16.0;
        let expected = (TWO_PI * x).cos() + 1.0;
        assert!((sample.value(3, 0) - expected).abs() < 1e-12);
    }

    #[test]
    fn fft_matches_direct_summation() {
        let fs = annulus_points(2, 12.0, 3.0).unwrap();
        let geometry = GridGeometry::torus2(64).unwrap();
        let synth = TorusSynthesizer::new(
            &fs,
            &geometry,
            EnsembleDescriptor::TorusWindow {
                dim: 2,
                t: 12.0,
                rho: 3.0,
                law: CoefficientLaw::Gaussian,
            },
        )
        .unwrap();
        let stream = SeedStream::new(99, 0);
        let coeffs = synth.coefficients(stream).unwrap();
        let sample = synth.sample_with_coeffs(&coeffs, 0);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..25 {
            let r = rng.gen_range(0..64usize);
            let c = rng.gen_range(0..64usize);
            let p = geometry.node_coords(r, c);
            let direct = synth.eval_direct(&coeffs, &[p])[0];
            assert!(
                (sample.value(r, c) - direct).abs() < 1e-9,
                "node ({r},{c}): fft {} vs direct {direct}",
                sample.value(r, c)
            );
        }
    }

    #[test]
    fn patch_matches_direct_summation() {
        let fs = circle_points(25);
        let geometry = GridGeometry::torus2(64).unwrap();
        let synth = TorusSynthesizer::new(
            &fs,
            &geometry,
            EnsembleDescriptor::Arw { n: 25, law: CoefficientLaw::Rademacher },
        )
        .unwrap();
        let coeffs = synth.coefficients(SeedStream::new(4, 7)).unwrap();
        let patch = synth
            .sample_patch(&coeffs, [0.3, 0.7], 0.05, 17, 0)
            .unwrap();
        for (r, c) in [(0usize, 0usize), (5, 11), (16, 16), (8, 3)] {
            let local = patch.geometry.node_coords(r, c);
            let global = [0.3 - 0.05 + (local[0] + 0.05), 0.7 - 0.05 + (local[1] + 0.05)];
            let direct = synth.eval_direct(&coeffs, &[global])[0];
            assert!((patch.value(r, c) - direct).abs() < 1e-9);
        }
    }

    #[test]
    fn rademacher_arw_bounded_by_sqrt_mode_count() {
        let geometry = GridGeometry::torus2(32).unwrap();
        for idx in 0..5 {
            let s = sample_arw(5, CoefficientLaw::Rademacher, &geometry, SeedStream::new(8, idx))
                .unwrap();
            let max = s.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            assert!(max <= 8f64.sqrt() + 1e-12, "max {max}");
        }
    }

    #[test]
    fn arw_rejects_non_representable_and_coarse_grids() {
        let geometry = GridGeometry::torus2(64).unwrap();
        assert!(matches!(
            sample_arw(3, CoefficientLaw::Gaussian, &geometry, SeedStream::new(0, 0)),
            Err(Error::EmptyFrequencySet(_))
        ));
        let coarse = GridGeometry::torus2(16).unwrap();
        assert!(matches!(
            sample_arw(25, CoefficientLaw::Gaussian, &coarse, SeedStream::new(0, 0)),
            Err(Error::Resolution(_))
        ));
    }

    #[test]
    fn dim1_window_has_unit_variance() {
        // window {+-3}: f(x) = sqrt(2) Re((xi + i eta)/sqrt(2) e(3x)) has
        // pointwise variance 1 over replicates
        let geometry = GridGeometry::Torus1 { n: 64 };
        let mut acc = 0.0;
        let m = 4000;
        for idx in 0..m {
            let s = sample_bandlimited_torus(
                1,
                3.5,
                1.0,
                CoefficientLaw::Gaussian,
                &geometry,
                SeedStream::new(21, idx),
            )
            .unwrap();
            let v = s.values[10];
            acc += v * v;
        }
        let var = acc / m as f64;
        assert!((var - 1.0).abs() < 3.0 * (2.0 / m as f64).sqrt(), "variance {var}");
    }

    #[test]
    fn sphere_real_basis_matches_exact_evaluator() {
        let geometry = GridGeometry::sphere(32, 64).unwrap();
        let synth =
            SphereSynthesizer::new(6, &geometry, CoefficientLaw::Gaussian, SphereBasis::RealBasis)
                .unwrap();
        let s = synth.sample(SeedStream::new(17, 2), 2);
        let eval = s.eval.as_ref().unwrap();
        for (r, c) in [(0usize, 0usize), (13, 40), (31, 63)] {
            let p = geometry.node_coords(r, c);
            assert!((s.value(r, c) - eval(p)).abs() < 1e-11);
        }
    }

    #[test]
    fn rwm_matches_exact_evaluator() {
        let geometry = GridGeometry::plane_chart(33, 2.0).unwrap();
        let s = sample_rwm_plane(32, &geometry, SeedStream::new(5, 1), CoefficientLaw::Gaussian)
            .unwrap();
        let eval = s.eval.as_ref().unwrap();
        for (r, c) in [(0usize, 0usize), (16, 16), (32, 32), (7, 25)] {
            let p = geometry.node_coords(r, c);
            assert!((s.value(r, c) - eval(p)).abs() < 1e-10);
        }
    }

    #[test]
    fn rwm_requires_enough_waves() {
        let geometry = GridGeometry::plane_chart(33, 2.0).unwrap();
        assert!(sample_rwm_plane(8, &geometry, SeedStream::new(0, 0), CoefficientLaw::Gaussian)
            .is_err());
    }

    #[test]
    fn point_sampler_agrees_with_grid_sampler() {
        let geometry = GridGeometry::torus2(64).unwrap();
        let desc = EnsembleDescriptor::Arw { n: 5, law: CoefficientLaw::Gaussian };
        let point = GridGeometry::torus2(64).unwrap().node_coords(10, 20);
        let ps = PointSampler::new(&desc, point).unwrap();
        for idx in 0..5 {
            let stream = SeedStream::new(31, idx);
            let s = sample_arw(5, CoefficientLaw::Gaussian, &geometry, stream).unwrap();
            assert!((ps.value(stream) - s.value(10, 20)).abs() < 1e-9);
        }

        let sdesc = EnsembleDescriptor::Sphere {
            ell: 8,
            law: CoefficientLaw::Rademacher,
            basis: SphereBasis::RealBasis,
        };
        let sgeom = GridGeometry::sphere(32, 64).unwrap();
        let spoint = sgeom.node_coords(7, 11);
        let sps = PointSampler::new(&sdesc, spoint).unwrap();
        for idx in 0..5 {
            let stream = SeedStream::new(13, idx);
            let s = sample_sphere(
                8,
                CoefficientLaw::Rademacher,
                &sgeom,
                stream,
                SphereBasis::RealBasis,
            )
            .unwrap();
            assert!((sps.value(stream) - s.value(7, 11)).abs() < 1e-11);
        }
    }

    #[test]
    fn empirical_covariance_requires_samples() {
        let geometry = GridGeometry::torus2(16).unwrap();
        let samples: Vec<FieldSample> = (0..10)
            .map(|i| {
                sample_arw(5, CoefficientLaw::Gaussian, &geometry, SeedStream::new(1, i)).unwrap()
            })
            .collect();
        assert!(empirical_covariance(&samples, &[(0, 0)]).is_err());
    }
}
