//! Security-parameter arithmetic, carried out in the `log2` domain.
//!
//! A session of `R` rounds tolerating `F` timing failures has
//!
//! - per-round classical value `ω* ≤ 2/3 + (n! 2^{4n} / Q)^{1/4}`;
//! - cheating probability at most
//!   `2^{R(λ log2(λ*/λ) + (1-λ) log2(ω*/(1-λ)))}` with `λ = F/R` and
//!   `λ* = 1 - ω*`;
//! - honest failure probability at most
//!   `2^{R(λ log2(p/λ) + (1-λ) log2((1-p)/(1-λ)))}` for loss rate `p`.

use std::fmt;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::fq::MERSENNE_EXPONENTS;

/// Exponent of the best known generic attack on syndrome decoding at the
/// hardest rate, as a fraction of `n`.
pub const SD_HARDNESS_EXPONENT: f64 = 0.05869;
/// Rate `k/n` at which [`SD_HARDNESS_EXPONENT`] is attained.
pub const SD_HARDEST_RATE: f64 = 0.4514;
/// Relative weight `w/n` at which [`SD_HARDNESS_EXPONENT`] is attained.
pub const SD_HARDEST_WEIGHT: f64 = 0.1268;
/// Field elements sent per round: `B`, `Y`, and two openings.
pub const FIELD_ELEMENTS_PER_ROUND: f64 = 6.0;
/// Default soundness slack above 2/3 used when sizing `Q`.
pub const DEFAULT_SOUNDNESS_SLACK: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamsError {
    #[error("bound does not apply: {0}")]
    Inapplicable(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("no parameters satisfy the constraints: {0}")]
    Infeasible(String),
}

/// `log2(n!)` via the log-gamma function.
pub fn log2_factorial(n: u64) -> f64 {
    if n < 2 {
        return 0.0;
    }
    ln_gamma(n as f64 + 1.0) / std::f64::consts::LN_2
}

/// `log2((n! 2^{4n} / Q)^{1/4})`, the bound on `ω* - 2/3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoundnessBound {
    pub log2_excess: f64,
}

impl SoundnessBound {
    /// Upper bound on the per-round value.
    pub fn omega_star(&self) -> f64 {
        2.0 / 3.0 + self.log2_excess.exp2()
    }

    /// True when the bound says nothing, i.e. `ω* ≥ 1`.
    pub fn is_vacuous(&self) -> bool {
        self.omega_star() >= 1.0
    }
}

/// `(log2(n!) + 4n - log2 Q) / 4`.
pub fn soundness_bound(n: u64, log2_q: f64) -> SoundnessBound {
    SoundnessBound {
        log2_excess: (log2_factorial(n) + 4.0 * n as f64 - log2_q) / 4.0,
    }
}

/// Shorthand for `soundness_bound(n, log2_q).log2_excess`.
pub fn soundness_bound_log2(n: u64, log2_q: f64) -> f64 {
    soundness_bound(n, log2_q).log2_excess
}

/// The constant-carrying form `(2 n! 2^{4n} / (9 Q))^{1/4}`, which is tighter
/// by `log2(9/2)/4` bits.
pub fn soundness_bound_with_constant(n: u64, log2_q: f64) -> SoundnessBound {
    SoundnessBound {
        log2_excess: (log2_factorial(n) + 4.0 * n as f64 + 1.0 - 9f64.log2() - log2_q) / 4.0,
    }
}

/// `log2 Q` needed for `ω* ≤ 2/3 + ε`: `log2(n!) + 4n + 4 log2(1/ε)`.
pub fn min_log2_q(n: u64, epsilon: f64) -> f64 {
    log2_factorial(n) + 4.0 * n as f64 + 4.0 * (1.0 / epsilon).log2()
}

/// Bits sent per round for a field of `log2_q` bits.
pub fn comm_bits_per_round(log2_q: f64) -> f64 {
    FIELD_ELEMENTS_PER_ROUND * log2_q
}

fn loss_fraction(r: u64, f: u64) -> Result<f64, ParamsError> {
    if r == 0 || f > r {
        return Err(ParamsError::InvalidInput(format!("need 0 <= F <= R and R > 0, got R={r}, F={f}")));
    }
    Ok(f as f64 / r as f64)
}

/// `x log2(y / x)` with the convention `0 log2(·) = 0`.
fn xlog(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * (y / x).log2()
    }
}

/// Chernoff bound on the cheating probability for per-round value `omega`.
pub fn cheat_prob_log2_for_value(r: u64, f: u64, omega: f64) -> Result<f64, ParamsError> {
    let lambda = loss_fraction(r, f)?;
    if !(0.0..1.0).contains(&omega) {
        return Err(ParamsError::Inapplicable(format!("per-round value {omega} not in [0, 1)")));
    }
    let lambda_star = 1.0 - omega;
    if lambda >= lambda_star {
        return Err(ParamsError::Inapplicable(format!(
            "loss fraction {lambda} is not below the optimal abort rate {lambda_star}"
        )));
    }
    Ok(r as f64 * (xlog(lambda, lambda_star) + xlog(1.0 - lambda, omega)))
}

/// Chernoff bound on the cheating probability with
/// `ω* = 2/3 + 2^{log2_soundness_gap}`; `-∞` gives `ω* = 2/3`.
pub fn cheat_prob_log2(r: u64, f: u64, log2_soundness_gap: f64) -> Result<f64, ParamsError> {
    cheat_prob_log2_for_value(r, f, 2.0 / 3.0 + log2_soundness_gap.exp2())
}

/// Chernoff bound on the probability that more than `F` of `R` honest
/// rounds are lost at rate `p_loss`.
pub fn completeness_error_log2(r: u64, f: u64, p_loss: f64) -> Result<f64, ParamsError> {
    let lambda = loss_fraction(r, f)?;
    if !(0.0..=1.0).contains(&p_loss) {
        return Err(ParamsError::InvalidInput(format!("loss rate {p_loss} not in [0, 1]")));
    }
    if p_loss >= lambda {
        return Err(ParamsError::Inapplicable(format!(
            "loss rate {p_loss} is not below the loss fraction {lambda}"
        )));
    }
    if p_loss == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(r as f64 * (xlog(lambda, p_loss) + xlog(1.0 - lambda, 1.0 - p_loss)))
}

/// Generic attack cost and the hardest `(k, w)` for code length `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdHardness {
    pub bits: f64,
    pub k: u64,
    pub w: u64,
}

pub fn sd_hardness_bits(n: u64) -> SdHardness {
    let nf = n as f64;
    SdHardness {
        bits: SD_HARDNESS_EXPONENT * nf,
        k: (SD_HARDEST_RATE * nf).round() as u64,
        w: (SD_HARDEST_WEIGHT * nf).round() as u64,
    }
}

/// Smallest Mersenne exponent `q` with `2^q - 1 ≥ 2^log2_q`.
pub fn mersenne_exponent_at_least(log2_q: f64) -> Option<u32> {
    MERSENNE_EXPONENTS.iter().copied().find(|&q| q as f64 > log2_q)
}

/// A complete parameter set with its derived bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecurityPlan {
    pub n: u64,
    pub k: u64,
    pub w: u64,
    #[serde(rename = "R")]
    pub r: u64,
    #[serde(rename = "F")]
    pub f: u64,
    pub lambda: f64,
    pub q_exponent: u32,
    pub log2_q: f64,
    pub log2_soundness_excess: f64,
    pub omega_star: f64,
    pub log2_p_star: f64,
    pub log2_ce: f64,
    pub p_loss: f64,
    pub comm_bits_per_round: f64,
    pub sd_hardness_bits: f64,
}

impl SecurityPlan {
    /// Evaluates every bound for fixed parameters, with `Q = 2^q_exponent - 1`.
    pub fn evaluate(
        n: u64,
        k: u64,
        w: u64,
        q_exponent: u32,
        r: u64,
        f: u64,
        p_loss: f64,
    ) -> Result<SecurityPlan, ParamsError> {
        let log2_q = q_exponent as f64;
        let soundness = soundness_bound(n, log2_q);
        if soundness.is_vacuous() {
            return Err(ParamsError::Inapplicable(format!(
                "Q = 2^{q_exponent} - 1 is too small for n = {n}"
            )));
        }
        let omega_star = soundness.omega_star();
        Ok(SecurityPlan {
            n,
            k,
            w,
            r,
            f,
            lambda: loss_fraction(r, f)?,
            q_exponent,
            log2_q,
            log2_soundness_excess: soundness.log2_excess,
            omega_star,
            log2_p_star: cheat_prob_log2_for_value(r, f, omega_star)?,
            log2_ce: completeness_error_log2(r, f, p_loss)?,
            p_loss,
            comm_bits_per_round: comm_bits_per_round(log2_q),
            sd_hardness_bits: sd_hardness_bits(n).bits,
        })
    }

    /// Human-readable parameter block.
    pub fn to_table(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for SecurityPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "n = {}, k = {}, w = {}", self.n, self.k, self.w)?;
        writeln!(f, "R = {}, F = {} (lambda = {:.5})", self.r, self.f, self.lambda)?;
        writeln!(f, "Q = 2^{} - 1", self.q_exponent)?;
        writeln!(f, "omega* <= 2/3 + 2^{:.3}", self.log2_soundness_excess)?;
        writeln!(f, "P*(R,F) <= 2^{:.3}", self.log2_p_star)?;
        writeln!(f, "CE(R,F,p_loss = {}) <= 2^{:.3}", self.p_loss, self.log2_ce)?;
        writeln!(f, "SD hardness ~ 2^{:.3}", self.sd_hardness_bits)?;
        write!(
            f,
            "communication per round = {:.0} bits ({:.2} KB)",
            self.comm_bits_per_round,
            self.comm_bits_per_round / 8.0 / 1000.0
        )
    }
}

/// Search policy: smallest `n` with enough SD hardness, `(k, w)` at the
/// hardest rate, `Q` the first Mersenne prime above the `2/3 + 0.001`
/// requirement, then the smallest `R` in steps of 10 for which some `F`
/// with `F/R ≥ p_loss · loss_margin` drives both Chernoff bounds to
/// `-target_bits` or below. Among valid `F` the one minimising the larger of
/// the two bounds wins, ties to the smaller `F`.
pub fn plan(target_bits: f64, p_loss: f64, loss_margin: f64) -> Result<SecurityPlan, ParamsError> {
    const MAX_ROUNDS: u64 = 1_000_000;
    if !(target_bits > 0.0 && target_bits.is_finite()) {
        return Err(ParamsError::InvalidInput(format!("target must be positive, got {target_bits}")));
    }
    if !(0.0..1.0).contains(&p_loss) || !(loss_margin >= 1.0) {
        return Err(ParamsError::InvalidInput(format!(
            "need 0 <= p_loss < 1 and loss_margin >= 1, got {p_loss}, {loss_margin}"
        )));
    }
    let n = (target_bits / SD_HARDNESS_EXPONENT).ceil().max(2.0) as u64;
    let hardness = sd_hardness_bits(n);
    let k = hardness.k.clamp(1, n - 1);
    let w = hardness.w.clamp(1, n);
    let need = min_log2_q(n, DEFAULT_SOUNDNESS_SLACK);
    let q_exponent = mersenne_exponent_at_least(need).ok_or_else(|| {
        ParamsError::Infeasible(format!("no tabulated Mersenne prime reaches 2^{need:.1}"))
    })?;
    let omega = soundness_bound(n, q_exponent as f64).omega_star();
    let lambda_min = p_loss * loss_margin;
    if lambda_min >= 1.0 - omega {
        return Err(ParamsError::Infeasible(format!(
            "loss allowance {lambda_min} leaves no room below the abort rate {}",
            1.0 - omega
        )));
    }

    let mut r = 10;
    while r <= MAX_ROUNDS {
        let mut best: Option<(f64, u64)> = None;
        let f_min = (lambda_min * r as f64).ceil() as u64;
        for f in f_min..=r {
            let lambda = f as f64 / r as f64;
            if lambda < lambda_min || (p_loss > 0.0 && lambda <= p_loss) {
                continue;
            }
            let (Ok(cheat), Ok(ce)) = (
                cheat_prob_log2_for_value(r, f, omega),
                completeness_error_log2(r, f, p_loss),
            ) else {
                if lambda >= 1.0 - omega {
                    break;
                }
                continue;
            };
            let worst = cheat.max(ce);
            if best.is_none_or(|(b, _)| worst < b) {
                best = Some((worst, f));
            }
        }
        if let Some((worst, f)) = best {
            if worst <= -target_bits {
                return SecurityPlan::evaluate(n, k, w, q_exponent, r, f, p_loss);
            }
        }
        r += 10;
    }
    Err(ParamsError::Infeasible(format!(
        "no R up to {MAX_ROUNDS} reaches 2^-{target_bits} for p_loss = {p_loss}"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigUint;
    use num_traits::{One, ToPrimitive};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    /// `log2` of a big integer from its leading 64 bits.
    fn big_log2(x: &BigUint) -> f64 {
        let bits = x.bits();
        let shift = bits.saturating_sub(64);
        let top = (x >> shift).to_u64().unwrap() as f64;
        top.log2() + shift as f64
    }

    fn big_factorial(n: u64) -> BigUint {
        (1..=n).fold(BigUint::one(), |acc, i| acc * i)
    }

    #[test]
    fn log2_factorial_matches_direct_sum() {
        let mut sum = 0.0;
        for n in 1..=3000u64 {
            sum += (n as f64).log2();
            let got = log2_factorial(n);
            assert!((got - sum).abs() <= 1e-9 * sum.max(1.0), "n={n}: {got} vs {sum}");
        }
        assert_eq!(log2_factorial(0), 0.0);
    }

    #[test]
    fn operating_point_soundness() {
        let x = soundness_bound_log2(1704, 23209.0);
        assert!((-140.0..=-138.0).contains(&x), "{x}");
        let tighter = soundness_bound_with_constant(1704, 23209.0).log2_excess;
        assert!((x - tighter - (4.5f64).log2() / 4.0).abs() < 1e-9);
    }

    #[test]
    fn soundness_at_exact_threshold_is_zero() {
        let n = 50;
        let log2_q = big_log2(&(big_factorial(n) << (4 * n as usize)));
        assert!(soundness_bound_log2(n, log2_q).abs() < 1e-9);
        assert!(soundness_bound(n, log2_q).is_vacuous());
    }

    #[test]
    fn soundness_small_n_exact_oracle() {
        let n = 10u64;
        let num = big_factorial(n) << 40usize;
        for q in [107u32, 127, 521] {
            let modulus = (BigUint::one() << q as usize) - 1u32;
            // (num / Q)^{1/4} from an integer quotient scaled by 2^200
            let scaled = (&num << 200usize) / &modulus;
            let exact = (big_log2(&scaled) - 200.0) / 4.0;
            let got = soundness_bound_log2(n, big_log2(&modulus));
            assert!((got - exact).abs() <= 1e-6 * exact.abs(), "q={q}: {got} vs {exact}");
        }
    }

    #[test]
    fn min_log2_q_examples() {
        let base = log2_factorial(1704) + 4.0 * 1704.0;
        assert!((min_log2_q(1704, 1e-3) - base - 1e12f64.log2()).abs() < 1e-9);
        assert!((1e12f64.log2() - 39.86).abs() < 0.01);
        assert!((min_log2_q(1704, 1.0) - base).abs() < 1e-9);
        let comm = comm_bits_per_round(min_log2_q(1704, 1e-3));
        assert!((comm - 136_177.0).abs() <= 1.0, "{comm}");
        assert_eq!(comm_bits_per_round(23209.0), 139_254.0);
    }

    #[test]
    fn operating_point_chernoff() {
        let p = cheat_prob_log2(340, 22, -138.0).unwrap();
        assert!((-104.0..=-103.0).contains(&p), "{p}");
        let ce = completeness_error_log2(340, 22, 0.001).unwrap();
        assert!((-103.0..=-102.0).contains(&ce), "{ce}");
    }

    #[test]
    fn chernoff_limits() {
        let pure = cheat_prob_log2(340, 0, f64::NEG_INFINITY).unwrap();
        assert!((pure - 340.0 * (2.0f64 / 3.0).log2()).abs() < 1e-9);
        assert_eq!(completeness_error_log2(340, 22, 0.0).unwrap(), f64::NEG_INFINITY);
        assert!(completeness_error_log2(340, 22, 1e-12).unwrap() < -700.0);
        assert!(completeness_error_log2(340, 22, 1e-100).unwrap() < -7000.0);
        assert!(matches!(cheat_prob_log2(30, 10, -50.0), Err(ParamsError::Inapplicable(_))));
        assert!(matches!(completeness_error_log2(100, 1, 0.01), Err(ParamsError::Inapplicable(_))));
        assert!(matches!(completeness_error_log2(0, 0, 0.01), Err(ParamsError::InvalidInput(_))));
    }

    /// `Pr[Bin(r, num/den) ≤ f]` or its complement, exactly, as `log2`.
    fn exact_tail_log2(r: u64, num: u64, den: u64, f: u64, upper: bool) -> f64 {
        let mut total = BigUint::default();
        let mut choose = BigUint::one();
        for j in 0..=r {
            if (j <= f) != upper {
                total += &choose * BigUint::from(num).pow(j as u32) * BigUint::from(den - num).pow((r - j) as u32);
            }
            choose = choose * (r - j) / (j + 1);
        }
        big_log2(&total) - r as f64 * (den as f64).log2()
    }

    #[test]
    fn completeness_bound_dominates_binomial_tail() {
        let exact = exact_tail_log2(100, 1, 100, 10, true);
        let bound = completeness_error_log2(100, 10, 0.01).unwrap();
        assert!(bound >= exact, "{bound} < {exact}");
    }

    #[test]
    fn abort_strategy_monte_carlo() {
        let (r, f) = (30u64, 2u64);
        let bound = cheat_prob_log2(r, f, f64::NEG_INFINITY).unwrap().exp2();
        let mut rng = ChaCha20Rng::seed_from_u64(77);
        let trials = 1_000_000;
        let wins = (0..trials)
            .filter(|_| (0..r).filter(|_| rng.gen_bool(1.0 / 3.0)).count() as u64 <= f)
            .count();
        let freq = wins as f64 / trials as f64;
        assert!(bound >= freq, "{bound} < {freq}");
        assert!(wins > 0);
    }

    #[test]
    fn sd_hardness_examples() {
        let h = sd_hardness_bits(1704);
        assert!((h.bits - 100.0).abs() < 0.05);
        assert_eq!((h.k, h.w), (769, 216));
        assert_eq!(sd_hardness_bits(0).bits, 0.0);
    }

    #[test]
    fn plan_reproduces_implementation_parameters() {
        let p = plan(100.0, 0.001, 2.0).unwrap();
        assert_eq!((p.n, p.k, p.w, p.q_exponent), (1704, 769, 216, 23209));
        assert!(p.r >= 100 && p.r < 1000, "R = {}", p.r);
        assert!(p.log2_p_star <= -100.0 && p.log2_ce <= -100.0);
        assert_eq!(p.comm_bits_per_round, 6.0 * 23209.0);

        let fixed = SecurityPlan::evaluate(1704, 769, 216, 23209, 340, 22, 0.001).unwrap();
        assert!((-104.0..=-103.0).contains(&fixed.log2_p_star));
        assert!((-103.0..=-102.0).contains(&fixed.log2_ce));
        assert!(fixed.to_table().contains("Q = 2^23209 - 1"));
    }

    #[test]
    fn plan_small_targets() {
        let tiny = plan(1.0, 0.001, 2.0).unwrap();
        assert!(tiny.n < 30 && tiny.log2_p_star <= -1.0);
        let mid = plan(40.0, 0.001, 2.0).unwrap();
        assert!(mid.log2_p_star <= -40.0 && mid.log2_ce <= -40.0);
        assert!(mid.lambda >= 0.002 && mid.lambda < 1.0 - mid.omega_star);
        assert!(mid.n < 1704 && mid.r <= plan(100.0, 0.001, 2.0).unwrap().r);
    }

    #[test]
    fn plan_infeasible() {
        assert!(matches!(plan(100.0, 0.3, 2.0), Err(ParamsError::Infeasible(_))));
        assert!(matches!(plan(0.0, 0.001, 2.0), Err(ParamsError::InvalidInput(_))));
    }

    proptest! {
        #[test]
        fn cheat_bound_monotone_in_f(r in 10u64..500, f in 0u64..100, gap in -200.0f64..-3.0) {
            prop_assume!(f + 1 < r);
            if let (Ok(a), Ok(b)) = (cheat_prob_log2(r, f, gap), cheat_prob_log2(r, f + 1, gap)) {
                prop_assert!(b >= a - 1e-9);
            }
        }

        #[test]
        fn cheat_bound_monotone_in_omega(r in 10u64..500, f in 0u64..50, w1 in 0.5f64..0.9, dw in 0.0f64..0.05) {
            prop_assume!(f < r);
            if let (Ok(a), Ok(b)) = (cheat_prob_log2_for_value(r, f, w1), cheat_prob_log2_for_value(r, f, w1 + dw)) {
                prop_assert!(b >= a - 1e-9);
            }
        }

        #[test]
        fn completeness_bound_monotone_in_lambda(r in 10u64..500, f in 1u64..100, p in 1e-4f64..0.05) {
            prop_assume!(f < r);
            if let (Ok(a), Ok(b)) = (completeness_error_log2(r, f, p), completeness_error_log2(r, f + 1, p)) {
                prop_assert!(b <= a + 1e-9);
            }
        }
    }
}
