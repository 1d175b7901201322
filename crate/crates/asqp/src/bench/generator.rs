//! Random instance generation.
//!
//! Instances follow a fixed recipe around a reference point `x_ref`:
//!
//! * `Q = M'M + n * 0.01 * I` with `M` standard normal, so the Hessian is
//!   positive definite with smallest eigenvalue at least `n * 0.01`.
//! * `A`, `G`, `q`, `x_ref` standard normal; `A` is redrawn in the
//!   vanishingly unlikely event that it loses full row rank.
//! * `b = A x_ref`, so `x_ref` satisfies the equalities exactly.
//! * `h_i = G_i x_ref + s_i` with slack `s_i = 0` with probability 0.3
//!   (the row starts active) and `s_i` uniform in `[0.1, 1.1)` otherwise.
//!   Active rows beyond the dimension budget `n - n_e` are demoted to
//!   inactive, keeping the earliest rows.
//! * `x0 = x_ref`, which is feasible by construction.
//!
//! All randomness comes from one ChaCha stream seeded by the spec, and the
//! draw order is fixed, so a spec identifies its instances exactly.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::Error;
use crate::linalg::{default_rank_tol, svd_null_basis};
use crate::model::QpProblem;

/// Scale of the `n * REGULARIZATION * I` term added to `M'M`.
pub const REGULARIZATION: f64 = 1e-2;
const ACTIVE_PROBABILITY: f64 = 0.3;

/// Row count that may depend on the drawn dimension.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CountSpec {
    Fixed(usize),
    /// `n / 2`, rounded down.
    HalfN,
    /// `n - 1`.
    NMinusOne,
}

impl CountSpec {
    pub fn resolve(&self, n: usize) -> usize {
        match self {
            CountSpec::Fixed(v) => *v,
            CountSpec::HalfN => n / 2,
            CountSpec::NMinusOne => n.saturating_sub(1),
        }
    }
}

impl std::str::FromStr for CountSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.trim() {
            "n/2" => Ok(CountSpec::HalfN),
            "n-1" => Ok(CountSpec::NMinusOne),
            other => other.parse::<usize>().map(CountSpec::Fixed).map_err(|_| {
                Error::InvalidGeneratorSpec(format!(
                    "count `{other}` must be an integer, `n/2`, or `n-1`"
                ))
            }),
        }
    }
}

impl std::fmt::Display for CountSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CountSpec::Fixed(v) => write!(f, "{v}"),
            CountSpec::HalfN => f.write_str("n/2"),
            CountSpec::NMinusOne => f.write_str("n-1"),
        }
    }
}

/// Parses a seed given as decimal or `0x`-prefixed hex.
pub fn parse_seed(s: &str) -> Result<u64, Error> {
    let t = s.trim();
    let parsed = match t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => t.parse::<u64>(),
    };
    parsed.map_err(|_| Error::InvalidGeneratorSpec(format!("seed `{s}` is not a valid u64")))
}

/// Description of a family of random instances.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GeneratorSpec {
    /// Inclusive dimension range; each instance draws `n` uniformly from it.
    pub n_range: (usize, usize),
    pub n_eq: CountSpec,
    pub n_ineq: CountSpec,
    pub count: usize,
    pub seed: u64,
}

impl GeneratorSpec {
    /// Rejects specs that cannot produce well-posed instances: zero count,
    /// an empty dimension range, or equality rows exceeding the smallest
    /// possible dimension.
    pub fn validate(&self) -> Result<(), Error> {
        if self.count == 0 {
            return Err(Error::InvalidGeneratorSpec("count must be at least 1".into()));
        }
        let (lo, hi) = self.n_range;
        if lo == 0 {
            return Err(Error::InvalidGeneratorSpec("n must be at least 1".into()));
        }
        if lo > hi {
            return Err(Error::InvalidGeneratorSpec(format!(
                "empty dimension range {lo}:{hi}"
            )));
        }
        let worst_eq = self.n_eq.resolve(lo);
        if worst_eq > lo {
            return Err(Error::InvalidGeneratorSpec(format!(
                "n_e = {worst_eq} exceeds the smallest dimension n = {lo}; the equality \
                 matrix could not keep full row rank"
            )));
        }
        Ok(())
    }

    /// Parses the compact spec syntax used by the command line:
    ///
    /// ```text
    /// n=10:20,ne=1,ni=n/2,count=5,seed=0x7
    /// ```
    ///
    /// `n` is required and takes a single value or an inclusive `lo:hi`
    /// range; `ne` and `ni` default to 0, `count` to 1, `seed` to 0.
    pub fn parse(text: &str) -> Result<Self, Error> {
        let mut n_range = None;
        let mut n_eq = CountSpec::Fixed(0);
        let mut n_ineq = CountSpec::Fixed(0);
        let mut count = 1usize;
        let mut seed = 0u64;

        for part in text.split(',') {
            let part = part.trim();
            if part.is_empty() {
                continue;
            }
            let (key, value) = part.split_once('=').ok_or_else(|| {
                Error::InvalidGeneratorSpec(format!("`{part}` is not a key=value pair"))
            })?;
            let value = value.trim();
            match key.trim() {
                "n" => {
                    let range = match value.split_once(':') {
                        Some((lo, hi)) => (parse_usize("n", lo)?, parse_usize("n", hi)?),
                        None => {
                            let v = parse_usize("n", value)?;
                            (v, v)
                        }
                    };
                    n_range = Some(range);
                }
                "ne" => n_eq = value.parse()?,
                "ni" => n_ineq = value.parse()?,
                "count" => count = parse_usize("count", value)?,
                "seed" => seed = parse_seed(value)?,
                other => {
                    return Err(Error::InvalidGeneratorSpec(format!("unknown key `{other}`")));
                }
            }
        }

        let n_range = n_range.ok_or_else(|| {
            Error::InvalidGeneratorSpec("missing required key `n`".into())
        })?;
        let spec = GeneratorSpec { n_range, n_eq, n_ineq, count, seed };
        spec.validate()?;
        Ok(spec)
    }
}

fn parse_usize(key: &str, value: &str) -> Result<usize, Error> {
    value.trim().parse::<usize>().map_err(|_| {
        Error::InvalidGeneratorSpec(format!("`{key}` value `{value}` is not an integer"))
    })
}

/// Iterator over the instances of a spec.
pub struct ProblemStream {
    rng: ChaCha8Rng,
    spec: GeneratorSpec,
    remaining: Option<usize>,
}

impl ProblemStream {
    /// Stream that keeps drawing past `count`; the suite runner uses the
    /// extra instances to replace ones whose oracle is inconclusive.
    pub(crate) fn unbounded(spec: &GeneratorSpec) -> Result<Self, Error> {
        spec.validate()?;
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(spec.seed),
            spec: spec.clone(),
            remaining: None,
        })
    }
}

impl Iterator for ProblemStream {
    type Item = QpProblem;

    fn next(&mut self) -> Option<QpProblem> {
        match &mut self.remaining {
            Some(0) => return None,
            Some(left) => *left -= 1,
            None => {}
        }
        Some(draw_instance(&mut self.rng, &self.spec))
    }
}

/// Deterministic stream of `spec.count` instances.
pub fn generate(spec: &GeneratorSpec) -> Result<ProblemStream, Error> {
    spec.validate()?;
    Ok(ProblemStream {
        rng: ChaCha8Rng::seed_from_u64(spec.seed),
        spec: spec.clone(),
        remaining: Some(spec.count),
    })
}

fn normal_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    let data: Vec<f64> = (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect();
    DMatrix::from_row_slice(rows, cols, &data)
}

fn normal_vector(rng: &mut ChaCha8Rng, len: usize) -> DVector<f64> {
    DVector::from_iterator(len, (0..len).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

// Draw order is part of the determinism contract: n, M, q, x_ref, A (with
// redraws), G, then one activity coin and one slack per inequality row.
fn draw_instance(rng: &mut ChaCha8Rng, spec: &GeneratorSpec) -> QpProblem {
    let (lo, hi) = spec.n_range;
    let n = rng.gen_range(lo..=hi);
    let n_eq = spec.n_eq.resolve(n);
    let n_ineq = spec.n_ineq.resolve(n);

    let m_mat = normal_matrix(rng, n, n);
    let hess = m_mat.tr_mul(&m_mat)
        + DMatrix::identity(n, n) * (n as f64 * REGULARIZATION);
    let lin = normal_vector(rng, n);
    let x_ref = normal_vector(rng, n);

    let a_eq = if n_eq == 0 {
        DMatrix::zeros(0, n)
    } else {
        let mut tries = 0;
        loop {
            let a = normal_matrix(rng, n_eq, n);
            let basis = svd_null_basis(&a, default_rank_tol(n_eq, n))
                .expect("finite Gaussian matrix");
            if basis.rank() == n_eq {
                break a;
            }
            tries += 1;
            assert!(tries < 16, "Gaussian equality block kept losing rank");
        }
    };
    let b_eq = &a_eq * &x_ref;

    let a_ineq = normal_matrix(rng, n_ineq, n);
    let mut active = Vec::with_capacity(n_ineq);
    let mut slacks = Vec::with_capacity(n_ineq);
    for _ in 0..n_ineq {
        active.push(rng.gen::<f64>() < ACTIVE_PROBABILITY);
        slacks.push(rng.gen_range(0.1..1.1));
    }
    // Active rows must fit next to the equalities in dimension n.
    let mut budget = n - n_eq;
    for flag in active.iter_mut() {
        if *flag {
            if budget > 0 {
                budget -= 1;
            } else {
                *flag = false;
            }
        }
    }
    let mut b_ineq = &a_ineq * &x_ref;
    for i in 0..n_ineq {
        if !active[i] {
            b_ineq[i] += slacks[i];
        }
    }

    QpProblem {
        hess,
        lin,
        a_eq,
        b_eq,
        a_ineq,
        b_ineq,
        x0: Some(x_ref),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate;
    use nalgebra::SymmetricEigen;

    fn small_spec() -> GeneratorSpec {
        GeneratorSpec {
            n_range: (4, 10),
            n_eq: CountSpec::Fixed(1),
            n_ineq: CountSpec::HalfN,
            count: 8,
            seed: 42,
        }
    }

    #[test]
    fn count_spec_resolution() {
        assert_eq!(CountSpec::Fixed(3).resolve(10), 3);
        assert_eq!(CountSpec::HalfN.resolve(10), 5);
        assert_eq!(CountSpec::HalfN.resolve(9), 4);
        assert_eq!(CountSpec::NMinusOne.resolve(10), 9);
    }

    #[test]
    fn count_spec_parsing() {
        assert_eq!("7".parse::<CountSpec>().unwrap(), CountSpec::Fixed(7));
        assert_eq!("n/2".parse::<CountSpec>().unwrap(), CountSpec::HalfN);
        assert_eq!("n-1".parse::<CountSpec>().unwrap(), CountSpec::NMinusOne);
        assert!("n*2".parse::<CountSpec>().is_err());
    }

    #[test]
    fn seed_parsing_accepts_decimal_and_hex() {
        assert_eq!(parse_seed("42").unwrap(), 42);
        assert_eq!(parse_seed("0x2a").unwrap(), 42);
        assert_eq!(parse_seed("0X2A").unwrap(), 42);
        assert!(parse_seed("zebra").is_err());
        assert!(parse_seed("-3").is_err());
    }

    #[test]
    fn spec_string_round_trip() {
        let spec = GeneratorSpec::parse("n=10:20,ne=1,ni=n/2,count=5,seed=0x7").unwrap();
        assert_eq!(spec.n_range, (10, 20));
        assert_eq!(spec.n_eq, CountSpec::Fixed(1));
        assert_eq!(spec.n_ineq, CountSpec::HalfN);
        assert_eq!(spec.count, 5);
        assert_eq!(spec.seed, 7);

        let single = GeneratorSpec::parse("n=16").unwrap();
        assert_eq!(single.n_range, (16, 16));
        assert_eq!(single.count, 1);
    }

    #[test]
    fn spec_string_rejects_malformed_input() {
        assert!(GeneratorSpec::parse("").is_err()); // missing n
        assert!(GeneratorSpec::parse("n=0").is_err());
        assert!(GeneratorSpec::parse("n=5:3").is_err());
        assert!(GeneratorSpec::parse("n=10,bogus=1").is_err());
        assert!(GeneratorSpec::parse("n=10,count=0").is_err());
        assert!(GeneratorSpec::parse("n=10,ne=11").is_err());
        assert!(GeneratorSpec::parse("n=10:20,ne=15").is_err()); // fails at n=10
        assert!(GeneratorSpec::parse("nonsense").is_err());
    }

    #[test]
    fn over_determined_equalities_are_rejected() {
        let spec = GeneratorSpec {
            n_range: (3, 3),
            n_eq: CountSpec::Fixed(4),
            n_ineq: CountSpec::Fixed(0),
            count: 1,
            seed: 0,
        };
        assert!(matches!(spec.validate(), Err(Error::InvalidGeneratorSpec(_))));
    }

    #[test]
    fn instances_pass_validation_and_match_spec() {
        let spec = small_spec();
        let problems: Vec<_> = generate(&spec).unwrap().collect();
        assert_eq!(problems.len(), spec.count);
        for p in &problems {
            assert!((4..=10).contains(&p.n()));
            assert_eq!(p.num_eq(), 1);
            assert_eq!(p.num_ineq(), p.n() / 2);
            assert!(validate(p, 1e-8).is_empty(), "instance failed validation");
        }
    }

    #[test]
    fn benchmark_grids_generate_valid_instances() {
        // The four row-count regimes the benchmark suites sweep, at full size.
        let grids = [
            (CountSpec::Fixed(1), CountSpec::Fixed(10)),
            (CountSpec::Fixed(10), CountSpec::Fixed(10)),
            (CountSpec::NMinusOne, CountSpec::Fixed(1)),
            (CountSpec::HalfN, CountSpec::HalfN),
        ];
        for (grid, (n_eq, n_ineq)) in grids.into_iter().enumerate() {
            let spec = GeneratorSpec {
                n_range: (20, 60),
                n_eq,
                n_ineq,
                count: 4,
                seed: 100 + grid as u64,
            };
            for p in generate(&spec).unwrap() {
                assert_eq!(p.num_eq(), n_eq.resolve(p.n()));
                assert_eq!(p.num_ineq(), n_ineq.resolve(p.n()));
                assert!(
                    validate(&p, 1e-8).is_empty(),
                    "grid {grid} produced an invalid instance"
                );
            }
        }
    }

    #[test]
    fn same_seed_reproduces_identical_instances() {
        let spec = small_spec();
        let a: Vec<_> = generate(&spec).unwrap().collect();
        let b: Vec<_> = generate(&spec).unwrap().collect();
        assert_eq!(a, b);

        let other = GeneratorSpec { seed: 43, ..small_spec() };
        let c: Vec<_> = generate(&other).unwrap().collect();
        assert_ne!(a, c);
    }

    #[test]
    fn hessian_eigenvalues_respect_regularization_floor() {
        let spec = GeneratorSpec {
            n_range: (6, 12),
            n_eq: CountSpec::Fixed(0),
            n_ineq: CountSpec::Fixed(4),
            count: 6,
            seed: 7,
        };
        for p in generate(&spec).unwrap() {
            let eig = SymmetricEigen::new(p.hess.clone());
            let min = eig.eigenvalues.min();
            let floor = p.n() as f64 * REGULARIZATION;
            assert!(min >= floor - 1e-9, "min eigenvalue {min} below {floor}");
        }
    }

    #[test]
    fn active_rows_fit_next_to_equalities() {
        // Tight dimension with many inequalities: actives must be capped.
        let spec = GeneratorSpec {
            n_range: (3, 3),
            n_eq: CountSpec::Fixed(2),
            n_ineq: CountSpec::Fixed(12),
            count: 10,
            seed: 11,
        };
        for p in generate(&spec).unwrap() {
            let x0 = p.x0.as_ref().unwrap();
            let tight = (0..p.num_ineq())
                .filter(|&i| {
                    (p.a_ineq.row(i).transpose().dot(x0) - p.b_ineq[i]).abs() <= 1e-12
                })
                .count();
            assert!(p.num_eq() + tight <= p.n(), "too many active rows: {tight}");
        }
    }

    #[test]
    fn n_minus_one_equalities_leave_one_degree_of_freedom() {
        let spec = GeneratorSpec {
            n_range: (5, 5),
            n_eq: CountSpec::NMinusOne,
            n_ineq: CountSpec::Fixed(1),
            count: 3,
            seed: 13,
        };
        for p in generate(&spec).unwrap() {
            assert_eq!(p.num_eq(), 4);
            let basis = svd_null_basis(&p.a_eq, default_rank_tol(4, 5)).unwrap();
            assert_eq!(basis.rank(), 4);
        }
    }
}
