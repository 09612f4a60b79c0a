//! IR-UWB physical layer: energy-detection bit error probability and the
//! success probabilities of the PPDU segments.
//!
//! A PPDU is the synchronization header (four preamble Kasami sequences plus
//! one SFD sequence), the BCH-protected PHY header, and a PSDU of `N_T / n`
//! BCH codewords. Every segment succeeds when the number of bit errors stays
//! within its correction margin, so each success probability is a lower
//! binomial tail evaluated at the same bit error probability.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Code and frame constants of the UWB PHY.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhyConfig {
    /// PSDU BCH codeword length in bits.
    pub n: u32,
    /// PSDU BCH message length in bits.
    pub k: u32,
    /// PSDU BCH error-correction capability in bits.
    pub t: u32,
    /// PHR length in bits.
    pub n_phr: u32,
    /// PHR BCH error-correction capability in bits.
    pub t_phr: u32,
    /// Kasami sequence length in bits.
    pub kasami_len: u32,
    /// Bit errors tolerated when detecting one Kasami sequence.
    pub rho: u32,
    /// Number of Kasami sequences in the preamble.
    pub preamble_reps: u32,
    /// Symbol period override in seconds. When absent the period follows the
    /// burst structure, see [`PhyConfig::symbol_period`].
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_sym: Option<f64>,
    /// Single pulse width in seconds.
    pub t_p: f64,
    /// Symbol period measured in burst durations (`n_cpb * t_p`).
    pub burst_spacing: f64,
    /// Receiver front-end equivalent noise bandwidth in hertz.
    pub w_rx: f64,
    /// Minimum encoded PSDU length in bits.
    pub n_t_min: u32,
    /// Maximum encoded PSDU length in bits (255-octet MAC body).
    pub n_t_max: u32,
}

/// Chip rate of the IR-UWB PHY; one pulse occupies one chip.
pub const CHIP_RATE_HZ: f64 = 499.2e6;

/// Allowed pulses-per-burst values.
pub const NCPB_VALUES: [u32; 6] = [1, 2, 4, 8, 16, 32];

impl Default for PhyConfig {
    fn default() -> Self {
        Self {
            n: 63,
            k: 51,
            t: 2,
            n_phr: 40,
            t_phr: 2,
            kasami_len: 63,
            rho: 6,
            preamble_reps: 4,
            t_sym: None,
            t_p: 1.0 / CHIP_RATE_HZ,
            burst_spacing: 32.0,
            w_rx: 1.0e9,
            n_t_min: 126,
            n_t_max: 2646,
        }
    }
}

impl PhyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.k >= self.n {
            return Err(Error::config(
                "phy.k",
                format!("must satisfy 0 < k < n (k = {}, n = {})", self.k, self.n),
            ));
        }
        if self.k == 0 {
            return Err(Error::config("phy.k", "must be positive"));
        }
        if self.t >= self.n {
            return Err(Error::config("phy.t", "must be smaller than n"));
        }
        if self.n_phr == 0 || self.t_phr >= self.n_phr {
            return Err(Error::config("phy.t_phr", "must satisfy t_phr < n_phr"));
        }
        if self.kasami_len == 0 || self.rho > self.kasami_len {
            return Err(Error::config(
                "phy.rho",
                format!(
                    "must satisfy rho <= kasami_len (rho = {}, kasami_len = {})",
                    self.rho, self.kasami_len
                ),
            ));
        }
        if self.preamble_reps == 0 {
            return Err(Error::config("phy.preamble_reps", "must be at least 1"));
        }
        for (key, value) in [
            ("phy.t_p", self.t_p),
            ("phy.burst_spacing", self.burst_spacing),
            ("phy.w_rx", self.w_rx),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::config(
                    key,
                    format!("must be finite and strictly positive (got {value})"),
                ));
            }
        }
        if let Some(t_sym) = self.t_sym {
            if !(t_sym.is_finite() && t_sym > 0.0) {
                return Err(Error::config(
                    "phy.t_sym",
                    format!("must be finite and strictly positive (got {t_sym})"),
                ));
            }
        }
        for (key, value) in [("phy.n_t_min", self.n_t_min), ("phy.n_t_max", self.n_t_max)] {
            if value == 0 || value % self.n != 0 {
                return Err(Error::config(
                    key,
                    format!("must be a positive multiple of n = {} (got {value})", self.n),
                ));
            }
        }
        if self.n_t_min > self.n_t_max {
            return Err(Error::config("phy.n_t_max", "must not be smaller than n_t_min"));
        }
        Ok(())
    }

    /// Symbol period for bursts of `n_cpb` pulses.
    pub fn symbol_period(&self, n_cpb: u32) -> f64 {
        self.t_sym.unwrap_or(n_cpb as f64 * self.t_p * self.burst_spacing)
    }

    /// All admissible encoded payload lengths, ascending.
    pub fn payload_grid(&self) -> Vec<u32> {
        (self.n_t_min..=self.n_t_max).step_by(self.n as usize).collect()
    }

    pub fn check_payload(&self, n_t: u32) -> Result<()> {
        if n_t == 0 || !n_t.is_multiple_of(self.n) || n_t < self.n_t_min || n_t > self.n_t_max {
            return Err(Error::PayloadOffGrid {
                n_t,
                n: self.n,
                min: self.n_t_min,
                max: self.n_t_max,
            });
        }
        Ok(())
    }
}

/// Received signal quality of one link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    /// Channel power coefficient.
    pub h: f64,
    /// Burst energy over noise density.
    pub eb_over_n0: f64,
    /// Pulses per burst.
    pub n_cpb: u32,
    /// Integration interval in seconds.
    pub t_int: f64,
}

impl LinkBudget {
    pub fn snr(&self) -> f64 {
        self.h * self.eb_over_n0
    }
}

/// Gaussian tail probability `Q(x) = P(Z > x)`.
///
/// Evaluated through `erfc`, which keeps full relative precision in the far
/// tail where `1 - Phi(x)` would cancel.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// Bit error probability of the non-coherent energy-detection receiver.
pub fn bit_error_prob(link: &LinkBudget, phy: &PhyConfig) -> f64 {
    let snr = link.snr();
    if snr <= 0.0 {
        return 0.5;
    }
    if snr.is_infinite() {
        return 0.0;
    }
    let noise = link.n_cpb as f64 * link.t_int * phy.w_rx;
    let arg = (0.5 * snr * snr / (snr + noise)).sqrt();
    q_function(arg).clamp(0.0, 0.5)
}

/// `P(X <= max_errors)` for `X ~ Binomial(len, p)`.
///
/// Terms are formed in log space and added with Neumaier compensation, so the
/// result keeps its relative accuracy when `p` is tiny or close to one.
pub fn binomial_tail(p: f64, len: u32, max_errors: u32) -> f64 {
    if max_errors >= len {
        return 1.0;
    }
    if p <= 0.0 {
        return 1.0;
    }
    if p >= 1.0 {
        return 0.0;
    }
    let ln_p = p.ln();
    let ln_q = (-p).ln_1p();
    let mut ln_choose = 0.0;
    let mut sum = 0.0;
    let mut comp = 0.0;
    for i in 0..=max_errors {
        if i > 0 {
            ln_choose += ((len - i + 1) as f64 / i as f64).ln();
        }
        let term = (ln_choose + i as f64 * ln_p + (len - i) as f64 * ln_q).exp();
        let next = sum + term;
        if sum.abs() >= term.abs() {
            comp += (sum - next) + term;
        } else {
            comp += (term - next) + sum;
        }
        sum = next;
    }
    (sum + comp).clamp(0.0, 1.0)
}

/// Probability of detecting one Kasami sequence.
pub fn kasami_success_prob(p_b: f64, phy: &PhyConfig) -> f64 {
    binomial_tail(p_b, phy.kasami_len, phy.rho)
}

/// Probability of receiving the synchronization header: at least one of the
/// preamble sequences and the SFD sequence must be detected.
pub fn shr_success_prob(p_b: f64, phy: &PhyConfig) -> f64 {
    let kasami = kasami_success_prob(p_b, phy);
    // 1 - (1 - P)^m without cancellation for small P.
    let preamble = -(phy.preamble_reps as f64 * (-kasami).ln_1p()).exp_m1();
    (preamble.clamp(0.0, 1.0) * kasami).clamp(0.0, 1.0)
}

pub fn phr_success_prob(p_b: f64, phy: &PhyConfig) -> f64 {
    binomial_tail(p_b, phy.n_phr, phy.t_phr)
}

/// Probability of decoding one PSDU codeword.
pub fn codeword_success_prob(p_b: f64, phy: &PhyConfig) -> f64 {
    binomial_tail(p_b, phy.n, phy.t)
}

/// Probability that all `n_t / n` codewords of the PSDU decode.
pub fn psdu_success_prob(p_cw: f64, n_t: u32, phy: &PhyConfig) -> Result<f64> {
    if n_t == 0 || !n_t.is_multiple_of(phy.n) {
        return Err(Error::PayloadOffGrid {
            n_t,
            n: phy.n,
            min: phy.n_t_min,
            max: phy.n_t_max,
        });
    }
    Ok(p_cw.powi((n_t / phy.n) as i32))
}

/// Probability of receiving the whole PPDU.
pub fn ppdu_success_prob(link: &LinkBudget, n_t: u32, phy: &PhyConfig) -> Result<f64> {
    SegmentProbs::from_link(link, phy).delivery(n_t, phy)
}

/// Number of BCH codewords needed for a MAC frame body of `n_mac_body`
/// octets. The encoded PSDU length is this count times `n`.
pub fn codewords_for_payload(n_mac_body: u32, phy: &PhyConfig) -> Result<u32> {
    if n_mac_body > 255 {
        return Err(Error::FrameBodyTooLarge(n_mac_body));
    }
    Ok((8 * n_mac_body + 72).div_ceil(phy.k))
}

/// Segment success probabilities of one link, all derived from one bit error
/// probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentProbs {
    pub p_b: f64,
    pub shr: f64,
    pub phr: f64,
    pub cw: f64,
}

impl SegmentProbs {
    pub fn from_bit_error(p_b: f64, phy: &PhyConfig) -> Self {
        Self {
            p_b,
            shr: shr_success_prob(p_b, phy),
            phr: phr_success_prob(p_b, phy),
            cw: codeword_success_prob(p_b, phy),
        }
    }

    pub fn from_link(link: &LinkBudget, phy: &PhyConfig) -> Self {
        Self::from_bit_error(bit_error_prob(link, phy), phy)
    }

    /// An error-free link.
    pub fn ideal() -> Self {
        Self {
            p_b: 0.0,
            shr: 1.0,
            phr: 1.0,
            cw: 1.0,
        }
    }

    /// PPDU success probability for an `n_t`-bit payload.
    pub fn delivery(&self, n_t: u32, phy: &PhyConfig) -> Result<f64> {
        Ok(self.shr * self.phr * psdu_success_prob(self.cw, n_t, phy)?)
    }
}
