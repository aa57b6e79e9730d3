//! Seeded generators for the directional, noisy directional and spiked
//! angular Gaussian models, plus a replication harness that records the
//! estimated spike location of each criterion.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::angular::{empirical_angular_covariance, select_extremes};
use crate::criteria::{estimate_p, CriterionKind};
use crate::data::{euclidean_norm, DataMatrix};
use crate::error::{Error, Result};
use crate::spectrum::{eigenvalues_descending, Spectrum};

/// Per-coordinate noise variance is `NOISE_SCALE / d`.
pub const NOISE_SCALE: f64 = 100.0;

pub type SimRng = ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE5_E4B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed of replication `r`: the experiment seed XOR `r`, mixed.
pub fn child_seed(seed: u64, replication: usize) -> u64 {
    splitmix64(seed ^ replication as u64)
}

pub fn replication_rng(seed: u64, replication: usize) -> SimRng {
    SimRng::seed_from_u64(child_seed(seed, replication))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Directional,
    NoisyDirectional,
    SpikedAngularGaussian,
}

/// Law of the entries of the latent vector `V` in the directional models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VDistribution {
    #[default]
    Normal,
    /// Uniform on {−1, 1}.
    Rademacher,
}

/// Number of extremes: an absolute count or a fraction of `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KSpec {
    Count(usize),
    Fraction(f64),
}

impl KSpec {
    /// Resolves against `n` observations. Fractions are rounded half up,
    /// then clamped to `[3, n − 1]`; counts are returned unchanged.
    pub fn resolve(self, n: usize) -> Result<usize> {
        match self {
            KSpec::Count(k) => Ok(k),
            KSpec::Fraction(f) => {
                if !(f > 0.0 && f.is_finite()) {
                    return Err(Error::InvalidInput(format!(
                        "fraction of extremes must be positive, got {f}"
                    )));
                }
                let k = round_half_up(f * n as f64);
                Ok(k.max(3).min(n.saturating_sub(1)))
            }
        }
    }
}

pub(crate) fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor() as usize
}

/// Parameters of one generative model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub model: ModelKind,
    pub d: usize,
    pub n: usize,
    pub p_star: usize,
    /// Spike eigenvalues, descending, one per spike.
    pub spike_values: Vec<f64>,
    /// Bulk eigenvalue `λ` of the spiked angular Gaussian covariance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bulk_lambda: Option<f64>,
    pub k: KSpec,
    pub seed: u64,
    #[serde(default)]
    pub v_distribution: VDistribution,
}

impl ModelSpec {
    /// Directional model with `p_star` equal spikes of size `spike`.
    pub fn directional(d: usize, n: usize, p_star: usize, spike: f64, k: KSpec, seed: u64) -> Self {
        Self {
            model: ModelKind::Directional,
            d,
            n,
            p_star,
            spike_values: vec![spike; p_star],
            bulk_lambda: None,
            k,
            seed,
            v_distribution: VDistribution::Normal,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidModel(msg));
        if self.d < 2 {
            return fail(format!("d must be >= 2, got {}", self.d));
        }
        if self.n < 2 {
            return fail(format!("n must be >= 2, got {}", self.n));
        }
        if self.p_star >= self.d {
            return fail(format!("p_star ({}) must be < d ({})", self.p_star, self.d));
        }
        if self.spike_values.len() != self.p_star {
            return fail(format!(
                "{} spike values for p_star = {}",
                self.spike_values.len(),
                self.p_star
            ));
        }
        if self.spike_values.iter().any(|v| !v.is_finite()) {
            return fail("spike values must be finite".into());
        }
        if self.spike_values.windows(2).any(|w| w[0] < w[1]) {
            return fail("spike values must be descending".into());
        }
        match self.model {
            ModelKind::Directional | ModelKind::NoisyDirectional => {
                if self.spike_values.iter().any(|v| *v <= 1.0) {
                    return fail("directional spike values must exceed 1".into());
                }
            }
            ModelKind::SpikedAngularGaussian => {
                let Some(lambda) = self.bulk_lambda else {
                    return fail("spiked angular Gaussian needs bulk_lambda".into());
                };
                if !(lambda > 0.0 && lambda.is_finite()) {
                    return fail(format!("bulk_lambda must be positive, got {lambda}"));
                }
                if self.spike_values.iter().any(|v| *v <= lambda) {
                    return fail("spike values must exceed bulk_lambda".into());
                }
            }
        }
        let k = self.k.resolve(self.n)?;
        if k < 2 || k >= self.n {
            return fail(format!("k = {k} must be in 2..{}", self.n));
        }
        Ok(())
    }

    pub fn resolved_k(&self) -> Result<usize> {
        self.k.resolve(self.n)
    }
}

/// Standard Fréchet quantile `−1/log(u)`.
pub fn frechet_from_uniform(u: f64) -> f64 {
    -1.0 / u.ln()
}

fn open_uniform<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

/// `n` i.i.d. standard Fréchet draws.
pub fn sample_frechet<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n)
        .map(|_| frechet_from_uniform(open_uniform(rng)))
        .collect()
}

fn latent<R: Rng + ?Sized>(dist: VDistribution, rng: &mut R) -> f64 {
    match dist {
        VDistribution::Normal => StandardNormal.sample(rng),
        VDistribution::Rademacher => {
            if rng.random::<bool>() {
                1.0
            } else {
                -1.0
            }
        }
    }
}

/// Unit direction `Σ̄^{1/2}V / ‖Σ̄^{1/2}V‖` with `Σ̄ = diag(spikes, 1, …, 1)`.
fn directional_row<R: Rng + ?Sized>(spec: &ModelSpec, scales: &[f64], rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = scales
            .iter()
            .map(|s| s * latent(spec.v_distribution, rng))
            .collect();
        let norm = euclidean_norm(&v);
        if norm > 0.0 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

fn directional_scales(spec: &ModelSpec) -> Vec<f64> {
    let mut scales = vec![1.0; spec.d];
    for (s, v) in scales.iter_mut().zip(&spec.spike_values) {
        *s = v.sqrt();
    }
    scales
}

fn require_model(spec: &ModelSpec, model: ModelKind) -> Result<()> {
    if spec.model != model {
        return Err(Error::InvalidModel(format!(
            "expected a {model:?} spec, got {:?}",
            spec.model
        )));
    }
    Ok(())
}

fn directional_matrix<R: Rng + ?Sized>(spec: &ModelSpec, rng: &mut R) -> Vec<f64> {
    let scales = directional_scales(spec);
    let mut values = Vec::with_capacity(spec.n * spec.d);
    for _ in 0..spec.n {
        let z = frechet_from_uniform(open_uniform(rng));
        values.extend(
            directional_row(spec, &scales, rng)
                .into_iter()
                .map(|x| x * z),
        );
    }
    values
}

/// Directional model: each row is an independent Fréchet radius times a
/// normalized `Σ̄^{1/2}V`, so the row norm equals the radius.
pub fn sample_directional<R: Rng + ?Sized>(spec: &ModelSpec, rng: &mut R) -> Result<DataMatrix> {
    require_model(spec, ModelKind::Directional)?;
    spec.validate()?;
    DataMatrix::new(spec.n, spec.d, directional_matrix(spec, rng))
}

/// Entrywise `|N(0, 100/d)|` noise vector.
pub fn noise_vector<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    let sd = (NOISE_SCALE / d as f64).sqrt();
    (0..d)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            (sd * z).abs()
        })
        .collect()
}

/// Directional sample plus independent non-negative noise per row.
pub fn sample_noisy_directional<R: Rng + ?Sized>(
    spec: &ModelSpec,
    rng: &mut R,
) -> Result<DataMatrix> {
    require_model(spec, ModelKind::NoisyDirectional)?;
    spec.validate()?;
    let scales = directional_scales(spec);
    let mut values = Vec::with_capacity(spec.n * spec.d);
    for _ in 0..spec.n {
        let z = frechet_from_uniform(open_uniform(rng));
        let dir = directional_row(spec, &scales, rng);
        let eps = noise_vector(spec.d, rng);
        values.extend(dir.iter().zip(&eps).map(|(x, e)| x * z + e));
    }
    DataMatrix::new(spec.n, spec.d, values)
}

/// `p` orthonormal columns in `ℝ^d`, Haar distributed: QR of a Gaussian
/// matrix with the signs of `R`'s diagonal folded into `Q`.
pub fn random_orthonormal_vectors<R: Rng + ?Sized>(
    p: usize,
    d: usize,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    if p > d || p == 0 {
        return Err(Error::InvalidInput(format!(
            "need 1 <= p <= d, got p = {p}, d = {d}"
        )));
    }
    let g = DMatrix::from_fn(d, p, |_, _| StandardNormal.sample(rng));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..p {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    Ok(q)
}

/// Square root of `H = Σ λᵢ vᵢvᵢᵀ + λI`, applied implicitly.
#[derive(Debug, Clone)]
pub struct SpikedCovariance {
    basis: DMatrix<f64>,
    spikes: Vec<f64>,
    bulk: f64,
}

impl SpikedCovariance {
    pub fn new(basis: DMatrix<f64>, spikes: Vec<f64>, bulk: f64) -> Result<Self> {
        if basis.ncols() != spikes.len() {
            return Err(Error::InvalidInput("one spike per basis vector".into()));
        }
        Ok(Self {
            basis,
            spikes,
            bulk,
        })
    }

    /// Draws a fresh basis for `spec` from the experiment seed. All
    /// replications of one experiment share it.
    pub fn for_spec(spec: &ModelSpec) -> Result<Self> {
        let bulk = spec.bulk_lambda.ok_or_else(|| {
            Error::InvalidModel("spiked angular Gaussian needs bulk_lambda".into())
        })?;
        let mut rng = SimRng::seed_from_u64(splitmix64(spec.seed));
        rng.set_stream(1);
        let basis = if spec.p_star == 0 {
            DMatrix::zeros(spec.d, 0)
        } else {
            random_orthonormal_vectors(spec.p_star, spec.d, &mut rng)?
        };
        Self::new(basis, spec.spike_values.clone(), bulk)
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.nrows()
    }

    /// Dense `H`.
    pub fn matrix(&self) -> DMatrix<f64> {
        let d = self.dim();
        let mut h = DMatrix::identity(d, d) * self.bulk;
        for (i, s) in self.spikes.iter().enumerate() {
            let v = self.basis.column(i);
            h += *s * (v * v.transpose());
        }
        h
    }

    /// `H^{1/2} g = √λ g + Σ (√(λᵢ+λ) − √λ)(vᵢᵀg) vᵢ`.
    fn apply_sqrt(&self, g: &DVector<f64>) -> DVector<f64> {
        let root = self.bulk.sqrt();
        let mut out = g * root;
        for (i, s) in self.spikes.iter().enumerate() {
            let v = self.basis.column(i);
            let coeff = ((s + self.bulk).sqrt() - root) * v.dot(g);
            out.axpy(coeff, &v, 1.0);
        }
        out
    }
}

/// Rows `N·Z` with `N ~ N(0, H)` and an independent Fréchet `Z`.
pub fn sample_spiked_angular_gaussian<R: Rng + ?Sized>(
    spec: &ModelSpec,
    cov: &SpikedCovariance,
    rng: &mut R,
) -> Result<DataMatrix> {
    require_model(spec, ModelKind::SpikedAngularGaussian)?;
    spec.validate()?;
    if cov.dim() != spec.d {
        return Err(Error::InvalidModel(
            "covariance dimension differs from d".into(),
        ));
    }
    let mut values = Vec::with_capacity(spec.n * spec.d);
    for _ in 0..spec.n {
        let z = frechet_from_uniform(open_uniform(rng));
        let g = DVector::from_fn(spec.d, |_, _| StandardNormal.sample(rng));
        values.extend(cov.apply_sqrt(&g).iter().map(|x| x * z));
    }
    DataMatrix::new(spec.n, spec.d, values)
}

/// Generates one data set for the model in `spec`.
pub fn sample_model<R: Rng + ?Sized>(
    spec: &ModelSpec,
    cov: Option<&SpikedCovariance>,
    rng: &mut R,
) -> Result<DataMatrix> {
    match spec.model {
        ModelKind::Directional => sample_directional(spec, rng),
        ModelKind::NoisyDirectional => sample_noisy_directional(spec, rng),
        ModelKind::SpikedAngularGaussian => match cov {
            Some(cov) => sample_spiked_angular_gaussian(spec, cov, rng),
            None => sample_spiked_angular_gaussian(spec, &SpikedCovariance::for_spec(spec)?, rng),
        },
    }
}

/// Extremes → angular covariance → spectrum.
pub fn angular_spectrum(data: &DataMatrix, k: usize) -> Result<Spectrum> {
    let sample = select_extremes(data, k)?;
    let cov = empirical_angular_covariance(&sample)?;
    eigenvalues_descending(&cov)
}

/// Shared per-experiment state: resolved `k` and the spiked covariance, if any.
struct Prepared {
    k: usize,
    cov: Option<SpikedCovariance>,
}

fn prepare(spec: &ModelSpec) -> Result<Prepared> {
    spec.validate()?;
    let cov = match spec.model {
        ModelKind::SpikedAngularGaussian => Some(SpikedCovariance::for_spec(spec)?),
        _ => None,
    };
    Ok(Prepared {
        k: spec.resolved_k()?,
        cov,
    })
}

fn replicate(spec: &ModelSpec, prepared: &Prepared, replication: usize) -> Result<Spectrum> {
    let mut rng = replication_rng(spec.seed, replication);
    let data = sample_model(spec, prepared.cov.as_ref(), &mut rng)?;
    angular_spectrum(&data, prepared.k)
}

/// Spectrum of replication `replication` of the experiment in `spec`.
pub fn simulate_spectrum(spec: &ModelSpec, replication: usize) -> Result<Spectrum> {
    let prepared = prepare(spec)?;
    replicate(spec, &prepared, replication).map_err(|e| annotate(e, replication))
}

fn annotate(e: Error, replication: usize) -> Error {
    Error::Replication {
        replication,
        source: Box::new(e),
    }
}

/// Estimated spike locations per criterion over a set of replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub spec: ModelSpec,
    pub replications: usize,
    pub k: usize,
    /// Candidate bound used for each criterion.
    pub q: BTreeMap<CriterionKind, usize>,
    pub p_hats: BTreeMap<CriterionKind, Vec<usize>>,
}

/// Per-criterion distribution of `p̂`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KindSummary {
    pub kind: CriterionKind,
    pub label: String,
    pub q: usize,
    pub histogram: BTreeMap<usize, usize>,
    pub mean: f64,
    pub median: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub spec: ModelSpec,
    pub replications: usize,
    pub k: usize,
    pub criteria: Vec<KindSummary>,
}

pub fn median_usize(values: &[usize]) -> f64 {
    let mut v = values.to_vec();
    v.sort_unstable();
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2] as f64
    } else {
        (v[n / 2 - 1] + v[n / 2]) as f64 / 2.0
    }
}

impl ExperimentResult {
    /// Fraction of replications where `kind` recovered `p`.
    pub fn hit_rate(&self, kind: CriterionKind, p: usize) -> f64 {
        self.p_hats.get(&kind).map_or(0.0, |v| {
            v.iter().filter(|x| **x == p).count() as f64 / v.len() as f64
        })
    }

    pub fn summary(&self) -> ExperimentSummary {
        let criteria = self
            .p_hats
            .iter()
            .map(|(kind, values)| {
                let mut histogram = BTreeMap::new();
                for v in values {
                    *histogram.entry(*v).or_insert(0) += 1;
                }
                KindSummary {
                    kind: *kind,
                    label: kind.label().to_string(),
                    q: self.q[kind],
                    histogram,
                    mean: values.iter().sum::<usize>() as f64 / values.len() as f64,
                    median: median_usize(values),
                }
            })
            .collect();
        ExperimentSummary {
            spec: self.spec.clone(),
            replications: self.replications,
            k: self.k,
            criteria,
        }
    }

    /// Long format: `replication,kind,p_hat`, replication-major.
    pub fn write_long_csv<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "replication,kind,p_hat")?;
        for r in 0..self.replications {
            for (kind, values) in &self.p_hats {
                writeln!(out, "{},{},{}", r, kind.cli_name(), values[r])?;
            }
        }
        Ok(())
    }
}

/// Runs `replications` independent copies of the experiment and estimates
/// `p̂` with every criterion in `kinds`.
///
/// Replication `r` draws from its own generator seeded by
/// [`child_seed`]`(spec.seed, r)`, so the result does not depend on how the
/// work is scheduled. `q = None` uses each criterion's default bound.
pub fn run_experiment(
    spec: &ModelSpec,
    replications: usize,
    kinds: &[CriterionKind],
    q: Option<usize>,
) -> Result<ExperimentResult> {
    if replications == 0 {
        return Err(Error::InvalidInput("need at least one replication".into()));
    }
    if kinds.is_empty() {
        return Err(Error::InvalidInput("no criteria requested".into()));
    }
    let prepared = prepare(spec)?;
    let k = prepared.k;
    let mut bounds = BTreeMap::new();
    for kind in kinds {
        kind.check_regime(spec.d, k)?;
        let max = kind.max_p(spec.d, k);
        let bound = q.unwrap_or_else(|| kind.default_q(spec.d, k));
        if bound < 1 || bound > max {
            return Err(Error::CandidateOutOfRange(format!(
                "{} admits q in 1..={max} for d = {}, k = {k}; got {bound}",
                kind.label(),
                spec.d
            )));
        }
        bounds.insert(*kind, bound);
    }

    let per_rep: Vec<Vec<usize>> = (0..replications)
        .into_par_iter()
        .map(|r| {
            let spectrum = replicate(spec, &prepared, r)?;
            bounds
                .iter()
                .map(|(kind, bound)| estimate_p(&spectrum, *kind, *bound).map(|c| c.p_hat))
                .collect::<Result<Vec<_>>>()
        })
        .enumerate()
        .map(|(r, res)| res.map_err(|e| annotate(e, r)))
        .collect::<Result<Vec<_>>>()?;

    let mut p_hats: BTreeMap<CriterionKind, Vec<usize>> = BTreeMap::new();
    for (i, kind) in bounds.keys().enumerate() {
        p_hats.insert(*kind, per_rep.iter().map(|row| row[i]).collect());
    }
    Ok(ExperimentResult {
        spec: spec.clone(),
        replications,
        k,
        q: bounds,
        p_hats,
    })
}

/// [`run_experiment`] on a dedicated pool of `threads` workers.
pub fn run_experiment_with_threads(
    spec: &ModelSpec,
    replications: usize,
    kinds: &[CriterionKind],
    q: Option<usize>,
    threads: usize,
) -> Result<ExperimentResult> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
    pool.install(|| run_experiment(spec, replications, kinds, q))
}
