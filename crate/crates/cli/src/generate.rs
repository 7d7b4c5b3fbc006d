//! Seeded random covariance instances.
//!
//! The algorithm is fixed so that instances can be regenerated by any
//! implementation:
//!
//! 1. Random numbers come from SplitMix64 seeded with `seed`. A uniform
//!    draw in `[0, 1)` is `(next >> 11) · 2⁻⁵³`; a bounded integer in
//!    `[0, m)` is `(next · m) >> 64` computed in 128 bits.
//! 2. The `n(n-1)/2` upper-triangle pairs are listed row-major
//!    (`(0,1), (0,2), …, (1,2), …`). The first `k = round(density · n(n-1)/2)`
//!    slots of a Fisher–Yates shuffle (slot `s` swaps with
//!    `s + bounded(len - s)`) pick the nonzero pairs.
//! 3. Each chosen pair, in selection order, receives a standard normal from
//!    Box–Muller on two uniforms: `sqrt(-2 ln(1 - u₁)) · cos(2π u₂)`.
//! 4. The symmetric matrix `B` (zero diagonal) is shifted to
//!    `B + (margin - λ_min(B)) I`, whose smallest eigenvalue is `margin`.
//! 5. `Σ` is the inverse of the shifted matrix.

use std::fmt;
use std::str::FromStr;

use covpath::SymMatrix;
use nalgebra::DMatrix;

#[derive(Clone, Debug)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)` with 53 random bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Integer in `[0, m)`.
    pub fn bounded(&mut self, m: u64) -> u64 {
        ((self.next_u64() as u128 * m as u128) >> 64) as u64
    }

    pub fn standard_normal(&mut self) -> f64 {
        let u1 = self.next_f64();
        let u2 = self.next_f64();
        (-2.0 * (1.0 - u1).ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorSpec {
    pub n: usize,
    pub density: f64,
    pub seed: u64,
    pub margin: f64,
}

impl GeneratorSpec {
    pub fn new(n: usize, density: f64, seed: u64) -> Self {
        Self {
            n,
            density,
            seed,
            margin: 0.1,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.n < 2 {
            return Err(format!("generator needs n >= 2, got {}", self.n));
        }
        if !(0.0..=1.0).contains(&self.density) {
            return Err(format!("density must lie in [0, 1], got {}", self.density));
        }
        if !(self.margin > 0.0) {
            return Err(format!("margin must be positive, got {}", self.margin));
        }
        Ok(())
    }

    /// Number of nonzero upper-triangle pairs in the ground truth.
    pub fn nonzero_pairs(&self) -> usize {
        let total = self.n * (self.n - 1) / 2;
        (self.density * total as f64).round() as usize
    }
}

impl fmt::Display for GeneratorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n={},density={},seed={},margin={}", self.n, self.density, self.seed, self.margin)
    }
}

/// Parses `n=30,density=0.1,seed=1[,margin=0.1]`; density defaults to 0.1
/// and seed to 0.
impl FromStr for GeneratorSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let mut spec = GeneratorSpec::new(0, 0.1, 0);
        let mut have_n = false;
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| format!("expected key=value in generator spec, got `{part}`"))?;
            let bad = |e: &dyn fmt::Display| format!("bad value for `{key}`: {e}");
            match key.trim() {
                "n" => {
                    spec.n = value.trim().parse().map_err(|e| bad(&e))?;
                    have_n = true;
                }
                "density" => spec.density = value.trim().parse().map_err(|e| bad(&e))?,
                "seed" => spec.seed = value.trim().parse().map_err(|e| bad(&e))?,
                "margin" => spec.margin = value.trim().parse().map_err(|e| bad(&e))?,
                other => return Err(format!("unknown generator key `{other}`")),
            }
        }
        if !have_n {
            return Err("generator spec needs n=<dimension>".into());
        }
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Clone, Debug)]
pub struct GeneratedProblem {
    pub sigma: SymMatrix,
    /// Sparse precision matrix whose inverse is `sigma`.
    pub ground_truth: SymMatrix,
}

pub fn generate_problem(spec: &GeneratorSpec) -> GeneratedProblem {
    let n = spec.n;
    let mut rng = SplitMix64::new(spec.seed);
    let mut pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).collect();
    let k = spec.nonzero_pairs().min(pairs.len());
    for s in 0..k {
        let r = s + rng.bounded((pairs.len() - s) as u64) as usize;
        pairs.swap(s, r);
    }
    let mut b = DMatrix::<f64>::zeros(n, n);
    for &(i, j) in &pairs[..k] {
        let v = rng.standard_normal();
        b[(i, j)] = v;
        b[(j, i)] = v;
    }
    let lambda_min = b.clone().symmetric_eigen().eigenvalues.min();
    let shift = spec.margin - lambda_min;
    for i in 0..n {
        b[(i, i)] = shift;
    }
    let sigma = b
        .clone()
        .cholesky()
        .expect("shifted matrix has smallest eigenvalue equal to the margin")
        .inverse();
    GeneratedProblem {
        sigma: SymMatrix::symmetrize(&sigma),
        ground_truth: SymMatrix::symmetrize(&b),
    }
}

/// Fraction of nonzero off-diagonal pairs in `m`.
pub fn offdiagonal_density(m: &SymMatrix) -> f64 {
    let n = m.dim();
    let nonzero = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).filter(|&(i, j)| m.get(i, j) != 0.0).count();
    nonzero as f64 / (n * (n - 1) / 2) as f64
}
