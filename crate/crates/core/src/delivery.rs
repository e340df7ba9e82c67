//! Delivery probability of a data item over an opportunistic path.
//!
//! The estimate combines three pieces:
//!
//! * the time for `n_i` contacts at every hop, a sum of gamma variables
//!   approximated by one moment-matched gamma ([`gamma_approx`]);
//! * the probability that `c` Pareto-distributed contacts move at least `D`
//!   data units, approximated through the largest contact and the expected
//!   sum-to-max ratio ([`mean_max_ratio`], [`transfer_prob`]);
//! * the distribution of the contact count at which a hop first completes
//!   the item ([`contact_count_weights`]).
//!
//! A k-hop estimate enumerates every tuple of per-hop contact counts, so its
//! cost grows with `Π ⌈D/β_i⌉`; [`EstimatorOptions::tuple_cap`] turns an
//! oversized tuple space into [`Error::Complexity`].

use serde::{Deserialize, Serialize};

use crate::contact_model::PairContactParams;
use crate::error::{Error, Result};
use crate::special::{log_beta, reg_lower_incomplete_gamma};

/// Default upper bound on the number of contact-count tuples per estimate.
pub const DEFAULT_TUPLE_CAP: u64 = 1_000_000;

/// Shape values within this distance of 1 use the harmonic form of R̄.
const HARMONIC_BRANCH_EPS: f64 = 1e-9;

/// Slack when rounding `D/β` up to a contact count, so that `6.0/2.0`
/// style ratios carrying float dust do not gain a spurious contact.
const CEIL_SLACK: f64 = 1e-9;

/// An ordered sequence of hops, source first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSpec {
    hops: Vec<PairContactParams>,
}

impl PathSpec {
    pub fn new(hops: Vec<PairContactParams>) -> Result<Self> {
        if hops.is_empty() {
            return Err(Error::Domain("a path needs at least one hop".into()));
        }
        for h in &hops {
            h.validate()?;
        }
        Ok(Self { hops })
    }

    pub fn single(hop: PairContactParams) -> Result<Self> {
        Self::new(vec![hop])
    }

    pub fn hops(&self) -> &[PairContactParams] {
        &self.hops
    }

    pub fn len(&self) -> usize {
        self.hops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hops.is_empty()
    }

    /// Serial transmission time of `data` units over every hop.
    pub fn transmission_time(&self, data: f64) -> f64 {
        self.hops.iter().map(|h| data / h.rate).sum()
    }
}

/// Gamma(γ, δ) with shape γ and rate δ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaApprox {
    pub gamma_shape: f64,
    pub delta_rate: f64,
}

impl GammaApprox {
    pub fn mean(&self) -> f64 {
        self.gamma_shape / self.delta_rate
    }

    pub fn variance(&self) -> f64 {
        self.gamma_shape / (self.delta_rate * self.delta_rate)
    }

    pub fn cdf(&self, t: f64) -> Result<f64> {
        if t <= 0.0 {
            return Ok(0.0);
        }
        reg_lower_incomplete_gamma(self.gamma_shape, self.delta_rate * t)
    }
}

/// A data item of `data_size` units that must arrive within `deadline`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeliveryQuery {
    pub data_size: f64,
    pub deadline: f64,
}

impl DeliveryQuery {
    pub fn new(data_size: f64, deadline: f64) -> Result<Self> {
        let q = Self {
            data_size,
            deadline,
        };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.data_size > 0.0) || !self.data_size.is_finite() {
            return Err(Error::Domain(format!(
                "data size must be positive, got {}",
                self.data_size
            )));
        }
        if !(self.deadline >= 0.0) || !self.deadline.is_finite() {
            return Err(Error::Domain(format!(
                "deadline must be nonnegative, got {}",
                self.deadline
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorOptions {
    pub tuple_cap: u64,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        Self {
            tuple_cap: DEFAULT_TUPLE_CAP,
        }
    }
}

/// Moment-matched gamma for a sum of independent Gamma(n_i, λ_i) variables.
///
/// With `M = Σ n_i/λ_i` and `V = Σ n_i/λ_i²` this returns `γ = M²/V`,
/// `δ = M/V`, so the approximation reproduces the mean and variance exactly.
pub fn gamma_approx(contact_counts: &[u64], lambdas: &[f64]) -> Result<GammaApprox> {
    if contact_counts.len() != lambdas.len() {
        return Err(Error::Domain(format!(
            "{} contact counts for {} rates",
            contact_counts.len(),
            lambdas.len()
        )));
    }
    if contact_counts.is_empty() {
        return Err(Error::Domain(
            "gamma approximation needs at least one hop".into(),
        ));
    }
    let mut mean = 0.0;
    let mut var = 0.0;
    for (&n, &lambda) in contact_counts.iter().zip(lambdas) {
        if n == 0 || !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::Domain(format!(
                "contact counts and rates must be positive, got n = {n}, λ = {lambda}"
            )));
        }
        let n = n as f64;
        mean += n / lambda;
        var += n / (lambda * lambda);
    }
    Ok(GammaApprox {
        gamma_shape: mean * mean / var,
        delta_rate: mean / var,
    })
}

/// Probability that the path materializes (one contact per hop, in order)
/// within `deadline`.
pub fn availability(path: &PathSpec, deadline: f64) -> Result<f64> {
    if !(deadline >= 0.0) {
        return Err(Error::Domain(format!(
            "deadline must be nonnegative, got {deadline}"
        )));
    }
    let counts = vec![1u64; path.len()];
    let lambdas: Vec<f64> = path.hops().iter().map(|h| h.lambda).collect();
    gamma_approx(&counts, &lambdas)?.cdf(deadline)
}

/// Expected ratio between the sum and the maximum of `c` i.i.d.
/// Pareto(α, ·) variables: `(1 − c·B(c, 1/α)) / (1 − α)`, or the
/// harmonic number `H_c` when α = 1.
pub fn mean_max_ratio(contact_count: u64, alpha: f64) -> Result<f64> {
    if contact_count == 0 {
        return Err(Error::Domain("contact count must be at least 1".into()));
    }
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::Domain(format!(
            "Pareto shape must be positive, got {alpha}"
        )));
    }
    if contact_count == 1 {
        return Ok(1.0);
    }
    if (alpha - 1.0).abs() < HARMONIC_BRANCH_EPS {
        return Ok((1..=contact_count).map(|i| 1.0 / i as f64).sum());
    }
    let c = contact_count as f64;
    let c_beta = (c.ln() + log_beta(c, 1.0 / alpha)?).exp();
    let ratio = (1.0 - c_beta) / (1.0 - alpha);
    Ok(ratio.clamp(1.0, c))
}

/// `P(𝒟 ≥ D)` for the data moved by `contact_count` contacts of `hop`:
/// `1 − (1 − min(1, (β·R̄/D)^α))^c`. Zero contacts move nothing.
pub fn transfer_prob(hop: &PairContactParams, contact_count: u64, data_size: f64) -> Result<f64> {
    if contact_count == 0 {
        return Ok(0.0);
    }
    if !(data_size > 0.0) {
        return Err(Error::Domain(format!(
            "data size must be positive, got {data_size}"
        )));
    }
    let r_bar = mean_max_ratio(contact_count, hop.alpha)?;
    let base = hop.beta * r_bar / data_size;
    if base >= 1.0 {
        return Ok(1.0);
    }
    let tail = base.powf(hop.alpha);
    // 1 − (1 − tail)^c, evaluated without cancellation for small tails.
    let miss = (contact_count as f64 * (-tail).ln_1p()).exp();
    Ok((1.0 - miss).clamp(0.0, 1.0))
}

/// Maximum contacts a hop needs: every contact moves at least β.
pub fn max_contacts(hop: &PairContactParams, data_size: f64) -> u64 {
    let ratio = data_size / hop.beta;
    ((ratio - CEIL_SLACK).ceil() as u64).max(1)
}

/// Probability that the hop first completes the item at contact `n`,
/// for `n = 1..=⌈D/β⌉` (index `n − 1`).
///
/// The weights are the increments of [`transfer_prob`] in `n`; the last
/// entry takes all remaining mass since `⌈D/β⌉` contacts always suffice.
/// The weights therefore sum to one.
pub fn contact_count_weights(hop: &PairContactParams, data_size: f64) -> Result<Vec<f64>> {
    let l = max_contacts(hop, data_size);
    let mut weights = Vec::with_capacity(l as usize);
    let mut prev = 0.0f64;
    for n in 1..=l {
        if n == l {
            weights.push((1.0 - prev).max(0.0));
            break;
        }
        let cur = transfer_prob(hop, n, data_size)?.max(prev);
        weights.push(cur - prev);
        prev = cur;
    }
    Ok(weights)
}

/// Delivery probability over a single hop.
///
/// `Σ_n w(n) · P(Gamma(n, λ) ≤ T − D/r)`, with `w` from
/// [`contact_count_weights`].
pub fn delivery_prob_onehop(hop: &PairContactParams, query: &DeliveryQuery) -> Result<f64> {
    query.validate()?;
    hop.validate()?;
    let slack = query.deadline - query.data_size / hop.rate;
    if slack <= 0.0 {
        return Ok(0.0);
    }
    let weights = contact_count_weights(hop, query.data_size)?;
    let mut p = 0.0;
    for (i, w) in weights.iter().enumerate() {
        if *w == 0.0 {
            continue;
        }
        let n = (i + 1) as f64;
        p += w * reg_lower_incomplete_gamma(n, hop.lambda * slack)?;
    }
    Ok(p.clamp(0.0, 1.0))
}

/// The one-hop sum with the failure prefix taken literally as a product of
/// per-contact "arrived in time and failed" terms:
/// `Σ_i P̃_{i−1} · P(𝕋_i ≤ T−T′) · P(𝒟_i ≥ D)`,
/// `P̃_i = Π_{j≤i} P(𝕋_j ≤ T−T′) · (1 − P(𝒟_j ≥ D))`.
///
/// Kept for comparison; it underestimates whenever the contact-time
/// probabilities are well below one.
pub fn delivery_prob_onehop_verbatim(
    hop: &PairContactParams,
    query: &DeliveryQuery,
) -> Result<f64> {
    query.validate()?;
    hop.validate()?;
    let slack = query.deadline - query.data_size / hop.rate;
    if slack <= 0.0 {
        return Ok(0.0);
    }
    let l = max_contacts(hop, query.data_size);
    let mut p = 0.0;
    let mut prefix = 1.0;
    for i in 1..=l {
        let arrive = reg_lower_incomplete_gamma(i as f64, hop.lambda * slack)?;
        let moved = transfer_prob(hop, i, query.data_size)?;
        p += prefix * arrive * moved;
        prefix *= arrive * (1.0 - moved);
    }
    Ok(p.clamp(0.0, 1.0))
}

/// Delivery probability over a k-hop path with the default tuple cap.
pub fn delivery_prob_path(path: &PathSpec, query: &DeliveryQuery) -> Result<f64> {
    delivery_prob_path_with(path, query, &EstimatorOptions::default())
}

/// Number of contact-count tuples a k-hop estimate enumerates (saturating).
pub fn tuple_count(path: &PathSpec, data_size: f64) -> u128 {
    path.hops().iter().fold(1u128, |acc, h| {
        acc.saturating_mul(max_contacts(h, data_size) as u128)
    })
}

/// Delivery probability over a k-hop path.
///
/// Enumerates every tuple `⟨n_1..n_k⟩` with `1 ≤ n_i ≤ ⌈D/β_i⌉` and sums
/// `Π_i w_i(n_i) · P(Gamma(γ, δ) ≤ T − Σ D/r_i)` where `(γ, δ)` is the
/// moment-matched gamma of the tuple. For one hop this is exactly
/// [`delivery_prob_onehop`].
pub fn delivery_prob_path_with(
    path: &PathSpec,
    query: &DeliveryQuery,
    opts: &EstimatorOptions,
) -> Result<f64> {
    query.validate()?;
    let tuples = tuple_count(path, query.data_size);
    if tuples > opts.tuple_cap as u128 {
        return Err(Error::Complexity {
            tuples,
            cap: opts.tuple_cap,
        });
    }
    let slack = query.deadline - path.transmission_time(query.data_size);
    if slack <= 0.0 {
        return Ok(0.0);
    }
    let hops = path.hops();
    // Per-hop log-weights; products across hops are sums here.
    let log_weights: Vec<Vec<f64>> = hops
        .iter()
        .map(|h| {
            contact_count_weights(h, query.data_size)
                .map(|ws| ws.into_iter().map(f64::ln).collect())
        })
        .collect::<Result<_>>()?;
    let inv: Vec<f64> = hops.iter().map(|h| 1.0 / h.lambda).collect();
    let inv_sq: Vec<f64> = inv.iter().map(|x| x * x).collect();

    let k = hops.len();
    let mut counts = vec![1u64; k];
    let mut total = 0.0;
    loop {
        let log_w: f64 = counts
            .iter()
            .zip(&log_weights)
            .map(|(&n, lw)| lw[(n - 1) as usize])
            .sum();
        if log_w > f64::NEG_INFINITY {
            let mut mean = 0.0;
            let mut var = 0.0;
            for i in 0..k {
                let n = counts[i] as f64;
                mean += n * inv[i];
                var += n * inv_sq[i];
            }
            let shape = mean * mean / var;
            let rate = mean / var;
            total += log_w.exp() * reg_lower_incomplete_gamma(shape, rate * slack)?;
        }
        // Odometer increment over the tuple space.
        let mut i = 0;
        loop {
            if i == k {
                return Ok(total.clamp(0.0, 1.0));
            }
            counts[i] += 1;
            if counts[i] as usize <= log_weights[i].len() {
                break;
            }
            counts[i] = 1;
            i += 1;
        }
    }
}

/// Data amount a materialized path is guaranteed to carry: min β.
pub fn path_capacity(path: &PathSpec) -> f64 {
    path.hops()
        .iter()
        .map(|h| h.beta)
        .fold(f64::INFINITY, f64::min)
}

/// Probability that at least one of `copies` independent replicas, each
/// succeeding with `p`, arrives: `Σ_{n≥1} C(m, n) p^n (1−p)^{m−n}`.
pub fn replicated_delivery_prob(p: f64, copies: u32) -> f64 {
    let m = copies as i32;
    let mut total = 0.0;
    let mut binom = 1.0;
    for n in 1..=m {
        binom = binom * (m - n + 1) as f64 / n as f64;
        total += binom * p.powi(n) * (1.0 - p).powi(m - n);
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn hop(lambda: f64, alpha: f64, beta: f64, rate: f64) -> PairContactParams {
        PairContactParams::new(lambda, alpha, beta, rate).unwrap()
    }

    #[test]
    fn gamma_approx_examples() {
        let g = gamma_approx(&[1], &[0.5]).unwrap();
        assert!((g.gamma_shape - 1.0).abs() < 1e-12 && (g.delta_rate - 0.5).abs() < 1e-12);
        let g = gamma_approx(&[3], &[2.0]).unwrap();
        assert!((g.gamma_shape - 3.0).abs() < 1e-12 && (g.delta_rate - 2.0).abs() < 1e-12);
        // M = 1.5, V = 1.25 by hand.
        let g = gamma_approx(&[1, 1], &[1.0, 2.0]).unwrap();
        assert!((g.gamma_shape - 1.8).abs() < 1e-12);
        assert!((g.delta_rate - 1.2).abs() < 1e-12);
    }

    #[test]
    fn gamma_approx_rejects_bad_input() {
        assert!(gamma_approx(&[1, 2], &[1.0]).is_err());
        assert!(gamma_approx(&[0], &[1.0]).is_err());
        assert!(gamma_approx(&[1], &[0.0]).is_err());
        assert!(gamma_approx(&[], &[]).is_err());
    }

    #[test]
    fn availability_examples() {
        let one = PathSpec::single(hop(0.01, 2.0, 1.0, 1.0)).unwrap();
        assert!((availability(&one, 100.0).unwrap() - (1.0 - (-1.0f64).exp())).abs() < 1e-12);
        let two = PathSpec::new(vec![hop(0.1, 2.0, 1.0, 1.0), hop(0.1, 2.0, 1.0, 1.0)]).unwrap();
        let erlang = 1.0 - (-3.0f64).exp() * 4.0;
        assert!((availability(&two, 30.0).unwrap() - erlang).abs() < 1e-12);
        assert_eq!(availability(&two, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn mean_max_ratio_examples() {
        for alpha in [0.3, 1.0, 2.0, 9.0] {
            assert_eq!(mean_max_ratio(1, alpha).unwrap(), 1.0);
        }
        assert!((mean_max_ratio(3, 1.0).unwrap() - 11.0 / 6.0).abs() < 1e-12);
        assert!((mean_max_ratio(2, 2.0).unwrap() - 5.0 / 3.0).abs() < 1e-12);
        // Within 1e-9 of one takes the harmonic branch.
        assert!((mean_max_ratio(3, 1.0 + 5e-10).unwrap() - 11.0 / 6.0).abs() < 1e-12);
        assert!(mean_max_ratio(0, 2.0).is_err());
        assert!(mean_max_ratio(2, 0.0).is_err());
    }

    #[test]
    fn mean_max_ratio_approaches_harmonic_near_one() {
        let h = mean_max_ratio(6, 1.0).unwrap();
        let near = mean_max_ratio(6, 1.0 + 1e-5).unwrap();
        assert!((h - near).abs() < 1e-4);
    }

    #[test]
    fn transfer_prob_examples() {
        let h = hop(0.1, 2.0, 2.0, 1.0);
        assert!((transfer_prob(&h, 1, 4.0).unwrap() - 0.25).abs() < 1e-12);
        assert!((transfer_prob(&h, 2, 10.0).unwrap() - 17.0 / 81.0).abs() < 1e-12);
        assert_eq!(transfer_prob(&h, 1, 1.5).unwrap(), 1.0);
        assert_eq!(transfer_prob(&h, 1, 2.0).unwrap(), 1.0);
        assert_eq!(transfer_prob(&h, 0, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn weights_sum_to_one() {
        for (alpha, beta, d) in [
            (2.0, 5.0, 12.0),
            (3.5, 2.2, 17.3),
            (8.0, 2.0, 2.0),
            (1.0, 1.0, 9.5),
        ] {
            let ws = contact_count_weights(&hop(0.1, alpha, beta, 1.0), d).unwrap();
            assert_eq!(
                ws.len() as u64,
                max_contacts(&hop(0.1, alpha, beta, 1.0), d)
            );
            assert!((ws.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(ws.iter().all(|w| *w >= 0.0));
        }
    }

    #[test]
    fn max_contacts_ignores_float_dust() {
        let h = hop(0.1, 2.0, 0.1, 1.0);
        assert_eq!(max_contacts(&h, 0.1 * 3.0), 3);
        assert_eq!(max_contacts(&hop(0.1, 2.0, 2.0, 1.0), 6.0), 3);
        assert_eq!(max_contacts(&hop(0.1, 2.0, 2.0, 1.0), 6.1), 4);
    }

    #[test]
    fn onehop_small_item_is_exponential_cdf() {
        let h = hop(0.1, 2.0, 5.0, 1.0);
        let q = DeliveryQuery::new(5.0, 20.0).unwrap();
        let expected = 1.0 - (-1.5f64).exp();
        assert!((delivery_prob_onehop(&h, &q).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 0.7769).abs() < 1e-4);
    }

    #[test]
    fn onehop_deadline_equal_to_transmission_time() {
        let h = hop(0.1, 2.0, 5.0, 2.0);
        let q = DeliveryQuery::new(10.0, 5.0).unwrap();
        assert_eq!(delivery_prob_onehop(&h, &q).unwrap(), 0.0);
        assert_eq!(delivery_prob_onehop_verbatim(&h, &q).unwrap(), 0.0);
        let path = PathSpec::new(vec![h, h]).unwrap();
        let q = DeliveryQuery::new(10.0, 10.0).unwrap();
        assert_eq!(delivery_prob_path(&path, &q).unwrap(), 0.0);
    }

    #[test]
    fn verbatim_agrees_for_single_contact_items() {
        let h = hop(0.03, 3.0, 4.0, 1.0);
        let q = DeliveryQuery::new(3.0, 90.0).unwrap();
        let a = delivery_prob_onehop(&h, &q).unwrap();
        let b = delivery_prob_onehop_verbatim(&h, &q).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn tuple_cap_is_enforced() {
        let h = hop(0.1, 2.0, 1.0, 100.0);
        let path = PathSpec::new(vec![h; 3]).unwrap();
        let q = DeliveryQuery::new(200.0, 1e5).unwrap();
        match delivery_prob_path(&path, &q) {
            Err(Error::Complexity { tuples, cap }) => {
                assert_eq!(tuples, 8_000_000);
                assert_eq!(cap, DEFAULT_TUPLE_CAP);
            }
            other => panic!("expected complexity error, got {other:?}"),
        }
        let opts = EstimatorOptions { tuple_cap: 10 };
        let q = DeliveryQuery::new(3.0, 100.0).unwrap();
        assert!(delivery_prob_path_with(&path, &q, &opts).is_err());
    }

    #[test]
    fn path_capacity_examples() {
        let mk = |betas: &[f64]| {
            PathSpec::new(betas.iter().map(|b| hop(0.1, 2.0, *b, 1.0)).collect()).unwrap()
        };
        assert_eq!(path_capacity(&mk(&[5.0])), 5.0);
        assert_eq!(path_capacity(&mk(&[3.0, 7.0, 5.0])), 3.0);
        assert_eq!(path_capacity(&mk(&[2.0, 2.0])), 2.0);
    }

    #[test]
    fn replication_formula() {
        assert!((replicated_delivery_prob(0.23, 2) - 0.4071).abs() < 1e-4);
        assert!((replicated_delivery_prob(0.23, 1) - 0.23).abs() < 1e-15);
        assert!(replicated_delivery_prob(0.23, 4) > 0.504);
    }

    #[test]
    fn query_validation() {
        assert!(DeliveryQuery::new(0.0, 1.0).is_err());
        assert!(DeliveryQuery::new(1.0, -1.0).is_err());
        assert!(PathSpec::new(vec![]).is_err());
    }

    fn arb_hop() -> impl Strategy<Value = PairContactParams> {
        (0.001f64..0.2, 1.2f64..10.0, 1.0f64..5.0, 0.5f64..4.0)
            .prop_map(|(l, a, b, r)| PairContactParams::new(l, a, b, r).unwrap())
    }

    /// Hops from the experimental parameter ranges sharing one data rate.
    fn arb_table_hop(rate: f64) -> impl Strategy<Value = PairContactParams> {
        (0.001f64..0.2, 3.0f64..10.0, 2.0f64..3.0)
            .prop_map(move |(l, a, b)| PairContactParams::new(l, a, b, rate).unwrap())
    }

    #[test]
    fn moment_matching_can_rise_with_size_on_mismatched_hops() {
        // A fast hop with a small β needs a second contact at D = 2β while
        // the slow hop still needs one; the matched Gamma gains shape and
        // its upper tail thins. The rise is small but real.
        let a = PairContactParams::new(0.081_335_52, 9.195_947, 1.226_361_9, 1.0).unwrap();
        let b = PairContactParams::new(0.007_708_697, 5.387_716, 3.671_509, 1.0).unwrap();
        let path = PathSpec::new(vec![a, b]).unwrap();
        let t = 4.0 * 241.688;
        let p1 = delivery_prob_path(&path, &DeliveryQuery::new(a.beta, t).unwrap()).unwrap();
        let p2 = delivery_prob_path(&path, &DeliveryQuery::new(2.0 * a.beta, t).unwrap()).unwrap();
        assert!(p2 > p1);
        assert!(p2 - p1 < 1e-4, "{p1} -> {p2}");
    }

    proptest! {
        #[test]
        fn gamma_moments_match(
            pairs in proptest::collection::vec((1u64..30, 0.001f64..5.0), 1..6)
        ) {
            let counts: Vec<u64> = pairs.iter().map(|p| p.0).collect();
            let lambdas: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            let g = gamma_approx(&counts, &lambdas).unwrap();
            let m: f64 = pairs.iter().map(|(n, l)| *n as f64 / l).sum();
            let v: f64 = pairs.iter().map(|(n, l)| *n as f64 / (l * l)).sum();
            prop_assert!(((g.mean() - m) / m).abs() < 1e-12);
            prop_assert!(((g.variance() - v) / v).abs() < 1e-12);
        }

        #[test]
        fn mean_max_ratio_bounds(alpha in 0.05f64..20.0, c in 1u64..60) {
            let r = mean_max_ratio(c, alpha).unwrap();
            let next = mean_max_ratio(c + 1, alpha).unwrap();
            prop_assert!(r >= 1.0 && r <= c as f64);
            prop_assert!(next >= r - 1e-9);
        }

        #[test]
        fn transfer_prob_monotone(h in arb_hop(), c in 1u64..20, d in 0.5f64..60.0) {
            let p = transfer_prob(&h, c, d).unwrap();
            prop_assert!((0.0..=1.0).contains(&p));
            prop_assert!(transfer_prob(&h, c + 1, d).unwrap() >= p - 1e-12);
            prop_assert!(transfer_prob(&h, c, d * 1.1).unwrap() <= p + 1e-12);
            let mut wider = h;
            wider.beta *= 1.1;
            prop_assert!(transfer_prob(&wider, c, d).unwrap() >= p - 1e-12);
        }

        #[test]
        fn path_reduces_to_onehop(h in arb_hop(), dmul in 0.2f64..8.0, t in 0.0f64..2000.0) {
            let q = DeliveryQuery::new(h.beta * dmul, t).unwrap();
            let one = delivery_prob_onehop(&h, &q).unwrap();
            let path = delivery_prob_path(&PathSpec::single(h).unwrap(), &q).unwrap();
            prop_assert!((one - path).abs() < 1e-9, "{one} vs {path}");
        }

        #[test]
        fn onehop_monotone_on_grid(h in arb_hop(), t0 in 5.0f64..300.0) {
            let mut last = f64::INFINITY;
            for k in 1..=8 {
                let q = DeliveryQuery::new(h.beta * k as f64, 4.0 * t0).unwrap();
                let p = delivery_prob_onehop(&h, &q).unwrap();
                prop_assert!(p <= last + 1e-12, "size step {k}: {p} > {last}");
                last = p;
            }
            let mut last = 0.0;
            for k in 1..=8 {
                let q = DeliveryQuery::new(3.0 * h.beta, t0 * k as f64).unwrap();
                let p = delivery_prob_onehop(&h, &q).unwrap();
                prop_assert!(p >= last - 1e-12);
                last = p;
            }
        }

        #[test]
        fn twohop_monotone_on_grid(
            (a, b) in (0.5f64..4.0).prop_flat_map(|r| (arb_table_hop(r), arb_table_hop(r))),
            t0 in 5.0f64..300.0,
        ) {
            let path = PathSpec::new(vec![a, b]).unwrap();
            let beta = path_capacity(&path);
            let mut last = f64::INFINITY;
            for k in 1..=8 {
                let q = DeliveryQuery::new(beta * k as f64, 4.0 * t0).unwrap();
                let p = delivery_prob_path(&path, &q).unwrap();
                prop_assert!(p <= last + 1e-12, "size step {k}: {p} > {last}");
                last = p;
            }
            let mut last = 0.0;
            for k in 1..=8 {
                let q = DeliveryQuery::new(2.0 * beta, t0 * k as f64).unwrap();
                let p = delivery_prob_path(&path, &q).unwrap();
                prop_assert!(p >= last - 1e-12);
                last = p;
            }
        }

        #[test]
        fn probabilities_in_unit_interval(
            hops in proptest::collection::vec(arb_hop(), 1..4),
            d in 0.01f64..20.0,
            t in 0.0f64..5000.0,
        ) {
            let path = PathSpec::new(hops.clone()).unwrap();
            let q = DeliveryQuery::new(d, t).unwrap();
            let p = delivery_prob_path(&path, &q).unwrap();
            prop_assert!((0.0..=1.0).contains(&p));
            let v = delivery_prob_onehop_verbatim(&hops[0], &q).unwrap();
            prop_assert!((0.0..=1.0).contains(&v));
            let a = availability(&path, t).unwrap();
            prop_assert!((0.0..=1.0).contains(&a));
        }
    }
}
