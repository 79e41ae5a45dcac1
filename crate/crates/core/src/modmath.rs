//! Arbitrary-precision modular arithmetic over a prime field.
//!
//! Everything else in the crate computes inside the group described by a
//! [`GroupParams`]: a prime modulus `p` and an ordered set of public bases.
//! All integers are arbitrary precision so behavior is uniform from toy
//! 5-bit parameters up to desk-scale 512-bit ones. Operations are pure
//! functions of their inputs and safe to call from any thread.

use num_bigint::{BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Miller-Rabin rounds used wherever this crate tests primality internally.
pub const DEFAULT_PRIMALITY_ROUNDS: u32 = 32;

/// Trial-division candidates attempted when factoring p-1 for order checks.
pub const DEFAULT_FACTOR_BUDGET: u64 = 1_000_000;

/// Below this bound primality is decided exactly by trial division.
const TRIAL_DIVISION_BOUND: u64 = 1 << 16;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModMathError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("zero divisor: no inverse of a multiple of the modulus")]
    ZeroDivisor,
}

/// The public arena every computation lives in: a prime modulus, the ordered
/// list of public bases, and the minimum multiplicative order each base is
/// required to have.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupParams {
    pub p: BigUint,
    pub bases: Vec<BigUint>,
    pub min_order: u64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamsWire {
    p: String,
    bases: Vec<String>,
    min_order: u64,
}

#[derive(Debug, Error)]
pub enum ParamsFormatError {
    #[error("malformed params JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("field {field} is not a decimal integer: {text:?}")]
    BadInteger { field: String, text: String },
}

impl GroupParams {
    pub fn new(p: BigUint, bases: Vec<BigUint>, min_order: u64) -> Self {
        GroupParams { p, bases, min_order }
    }

    pub fn num_bases(&self) -> usize {
        self.bases.len()
    }

    pub fn base(&self, index: usize) -> Option<&BigUint> {
        self.bases.get(index)
    }

    /// Serializes as `{"p": "<decimal>", "bases": ["<decimal>", ...],
    /// "min_order": <integer>}`. Decimal strings keep consumers free of
    /// integer-width concerns.
    pub fn to_json(&self) -> String {
        let wire = ParamsWire {
            p: self.p.to_string(),
            bases: self.bases.iter().map(|b| b.to_string()).collect(),
            min_order: self.min_order,
        };
        serde_json::to_string(&wire).expect("params serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self, ParamsFormatError> {
        let wire: ParamsWire = serde_json::from_str(text)?;
        let p = parse_decimal(&wire.p, "p")?;
        let bases = wire
            .bases
            .iter()
            .enumerate()
            .map(|(i, b)| parse_decimal(b, &format!("bases[{i}]")))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(GroupParams::new(p, bases, wire.min_order))
    }
}

fn parse_decimal(text: &str, field: &str) -> Result<BigUint, ParamsFormatError> {
    if text.is_empty() || !text.bytes().all(|b| b.is_ascii_digit()) {
        return Err(ParamsFormatError::BadInteger {
            field: field.to_string(),
            text: text.to_string(),
        });
    }
    text.parse::<BigUint>().map_err(|_| ParamsFormatError::BadInteger {
        field: field.to_string(),
        text: text.to_string(),
    })
}

/// A group element: an integer in `[0, p)` for some modulus fixed at
/// construction time by the caller.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Element(BigUint);

impl Element {
    pub fn new(value: BigUint, p: &BigUint) -> Result<Self, ModMathError> {
        if &value >= p {
            return Err(ModMathError::InvalidArgument(format!(
                "element {value} not below modulus {p}"
            )));
        }
        Ok(Element(value))
    }

    /// Wraps a value the caller has already reduced below the modulus.
    pub(crate) fn from_reduced(value: BigUint) -> Self {
        Element(value)
    }

    pub fn value(&self) -> &BigUint {
        &self.0
    }

    pub fn into_value(self) -> BigUint {
        self.0
    }
}

impl std::fmt::Display for Element {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

/// base^exponent mod p by square-and-multiply, O(log exponent) multiplications.
///
/// Requires p >= 2 and base < p.
pub fn mod_pow(base: &BigUint, exponent: &BigUint, p: &BigUint) -> Result<BigUint, ModMathError> {
    check_modulus(p)?;
    if base >= p {
        return Err(ModMathError::InvalidArgument(format!(
            "base {base} not below modulus {p}"
        )));
    }
    Ok(base.modpow(exponent, p))
}

/// Same result as [`mod_pow`] whenever `p` is prime, after first reducing the
/// exponent mod p-1 (Fermat). The reduction never applies to base 0, whose
/// powers are not periodic with period p-1.
pub fn mod_pow_reduced(
    base: &BigUint,
    exponent: &BigUint,
    p: &BigUint,
) -> Result<BigUint, ModMathError> {
    check_modulus(p)?;
    if base >= p {
        return Err(ModMathError::InvalidArgument(format!(
            "base {base} not below modulus {p}"
        )));
    }
    let group_order = p - 1u32;
    if base.is_zero() || group_order.is_zero() || exponent < &group_order {
        return Ok(base.modpow(exponent, p));
    }
    Ok(base.modpow(&(exponent % group_order), p))
}

/// Multiplicative inverse mod a prime p.
pub fn mod_inv(a: &BigUint, p: &BigUint) -> Result<BigUint, ModMathError> {
    check_modulus(p)?;
    let a = a % p;
    if a.is_zero() {
        return Err(ModMathError::ZeroDivisor);
    }
    // p prime, so a^(p-2) is the inverse.
    Ok(a.modpow(&(p - 2u32), p))
}

/// Probabilistic primality: deterministic trial division below 2^16,
/// Miller-Rabin above with error probability at most 4^-rounds.
///
/// Witnesses are derived from a hash of the input so the answer is a pure
/// function of `(n, rounds)`.
pub fn is_probable_prime(n: &BigUint, rounds: u32) -> bool {
    let rounds = rounds.max(1);
    if n < &BigUint::from(TRIAL_DIVISION_BOUND) {
        let small = n.to_u64_digits().first().copied().unwrap_or(0);
        return trial_division_is_prime(small);
    }
    if n.is_multiple_of(&BigUint::from(2u32)) {
        return false;
    }
    miller_rabin(n, rounds)
}

fn trial_division_is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n % 2 == 0 {
        return n == 2;
    }
    let mut d = 3u64;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 2;
    }
    true
}

fn miller_rabin(n: &BigUint, rounds: u32) -> bool {
    let one = BigUint::one();
    let two = BigUint::from(2u32);
    let n_minus_1 = n - &one;
    let s = n_minus_1.trailing_zeros().expect("n odd and > 2");
    let d = &n_minus_1 >> s;

    let mut seed_input = n.to_bytes_be();
    seed_input.extend_from_slice(&rounds.to_be_bytes());
    let seed: [u8; 32] = Sha256::digest(&seed_input).into();
    let mut rng = ChaCha20Rng::from_seed(seed);

    'witness: for _ in 0..rounds {
        let a = rng.gen_biguint_range(&two, &n_minus_1);
        let mut x = a.modpow(&d, n);
        if x == one || x == n_minus_1 {
            continue;
        }
        for _ in 1..s {
            x = x.modpow(&two, n);
            if x == n_minus_1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Result of a multiplicative-order computation: exact when p-1 could be
/// fully factored within the trial-division budget, Unknown otherwise.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Order {
    Exact(BigUint),
    Unknown,
}

/// Multiplicative order of g mod a prime p. Factoring p-1 is attempted by
/// trial division over at most `factor_budget` candidate divisors; if the
/// remaining cofactor is neither 1 nor probably prime, the order is Unknown
/// rather than stalling.
pub fn multiplicative_order(
    g: &BigUint,
    p: &BigUint,
    factor_budget: u64,
) -> Result<Order, ModMathError> {
    check_modulus(p)?;
    if g.is_zero() || g >= p {
        return Err(ModMathError::InvalidArgument(format!(
            "element {g} not in (0, {p})"
        )));
    }
    let totient = p - 1u32;
    match trial_factor(&totient, factor_budget) {
        Some(factors) => Ok(Order::Exact(order_from_factors(g, p, &totient, &factors))),
        None => Ok(Order::Unknown),
    }
}

/// Trial-division factorization of n, trying at most `budget` candidate
/// divisors (2, then the odd numbers). Returns the distinct prime factors, or
/// None when the unfactored cofactor is composite and the budget is exhausted.
fn trial_factor(n: &BigUint, budget: u64) -> Option<Vec<BigUint>> {
    let mut remaining = n.clone();
    let mut factors: Vec<BigUint> = Vec::new();
    let one = BigUint::one();
    if remaining <= one {
        return Some(factors);
    }
    let mut candidate = BigUint::from(2u32);
    let mut tried: u64 = 0;
    while tried < budget {
        tried += 1;
        if (&candidate * &candidate) > remaining {
            break;
        }
        if remaining.is_multiple_of(&candidate) {
            factors.push(candidate.clone());
            while remaining.is_multiple_of(&candidate) {
                remaining /= &candidate;
            }
        }
        candidate = if candidate == BigUint::from(2u32) {
            BigUint::from(3u32)
        } else {
            candidate + 2u32
        };
    }
    if remaining > one {
        if is_probable_prime(&remaining, DEFAULT_PRIMALITY_ROUNDS) {
            factors.push(remaining);
        } else {
            return None;
        }
    }
    Some(factors)
}

fn order_from_factors(g: &BigUint, p: &BigUint, totient: &BigUint, factors: &[BigUint]) -> BigUint {
    let one = BigUint::one();
    let mut order = totient.clone();
    for q in factors {
        while order.is_multiple_of(q) {
            let reduced = &order / q;
            if g.modpow(&reduced, p) == one {
                order = reduced;
            } else {
                break;
            }
        }
    }
    order
}

/// One broken [`GroupParams`] invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParamViolation {
    NotPrime,
    BaseOutOfRange { index: usize },
    DuplicateBases { first: usize, second: usize },
    OrderTooSmall { index: usize, order: BigUint },
}

impl std::fmt::Display for ParamViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ParamViolation::NotPrime => write!(f, "modulus is not prime"),
            ParamViolation::BaseOutOfRange { index } => {
                write!(f, "base[{index}] outside the open interval (1, p)")
            }
            ParamViolation::DuplicateBases { first, second } => {
                write!(f, "base[{first}] and base[{second}] coincide mod p")
            }
            ParamViolation::OrderTooSmall { index, order } => {
                write!(f, "base[{index}] has multiplicative order {order} below the minimum")
            }
        }
    }
}

/// Outcome of [`validate_params`]: every violated invariant (never only the
/// first), plus a flag recording that order checks were skipped because p-1
/// could not be factored within budget.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ValidationReport {
    pub violations: Vec<ParamViolation>,
    pub order_check_skipped: bool,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn validate_params(params: &GroupParams) -> ValidationReport {
    validate_params_with_budget(params, DEFAULT_FACTOR_BUDGET)
}

pub fn validate_params_with_budget(params: &GroupParams, factor_budget: u64) -> ValidationReport {
    let mut report = ValidationReport::default();
    let p = &params.p;
    let one = BigUint::one();

    let p_prime = p >= &BigUint::from(2u32) && is_probable_prime(p, DEFAULT_PRIMALITY_ROUNDS);
    if !p_prime {
        report.violations.push(ParamViolation::NotPrime);
    }

    let mut in_range = vec![false; params.bases.len()];
    for (i, b) in params.bases.iter().enumerate() {
        if b <= &one || b >= p {
            report.violations.push(ParamViolation::BaseOutOfRange { index: i });
        } else {
            in_range[i] = true;
        }
    }

    for i in 0..params.bases.len() {
        for j in (i + 1)..params.bases.len() {
            if &params.bases[i] % p == &params.bases[j] % p {
                report
                    .violations
                    .push(ParamViolation::DuplicateBases { first: i, second: j });
            }
        }
    }

    if !p_prime {
        report.order_check_skipped = true;
        return report;
    }

    let totient = p - 1u32;
    let factors = trial_factor(&totient, factor_budget);
    match factors {
        None => report.order_check_skipped = true,
        Some(factors) => {
            let min_order = BigUint::from(params.min_order);
            for (i, b) in params.bases.iter().enumerate() {
                if !in_range[i] {
                    continue;
                }
                let order = order_from_factors(b, p, &totient, &factors);
                if order < min_order {
                    report
                        .violations
                        .push(ParamViolation::OrderTooSmall { index: i, order });
                }
            }
        }
    }
    report
}

fn check_modulus(p: &BigUint) -> Result<(), ModMathError> {
    if p < &BigUint::from(2u32) {
        return Err(ModMathError::InvalidArgument(format!(
            "modulus {p} below 2"
        )));
    }
    Ok(())
}
