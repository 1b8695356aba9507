use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Behaviour of `α_i` beyond the explicit head.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Tail {
    /// `α_i = 0` for `i > K`.
    #[default]
    None,
    /// `α_i = coef · γ^i` for `i > K`, `0 < γ < 1`.
    Geometric { coef: f64, gamma: f64 },
    /// `α_i = coef · i^{-exponent}` for `i > K`. Only the closed-form
    /// oracles accept this family; simulation refuses it.
    PowerLaw { coef: f64, exponent: f64 },
}

/// The weight vector `α = (α_1, α_2, ...)`, all entries non-negative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawAlpha")]
pub struct AlphaSpec {
    head: Vec<f64>,
    tail: Tail,
}

#[derive(Deserialize)]
struct RawAlpha {
    head: Vec<f64>,
    #[serde(default)]
    tail: Tail,
}

impl TryFrom<RawAlpha> for AlphaSpec {
    type Error = Error;

    fn try_from(raw: RawAlpha) -> Result<Self> {
        AlphaSpec::new(raw.head, raw.tail)
    }
}

/// A series value that may diverge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Moment {
    Finite(f64),
    Infinite,
}

impl Moment {
    pub fn finite(self) -> Option<f64> {
        match self {
            Moment::Finite(v) => Some(v),
            Moment::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Moment::Infinite)
    }

    fn from_f64(v: f64) -> Self {
        if v.is_finite() {
            Moment::Finite(v)
        } else {
            Moment::Infinite
        }
    }
}

impl AlphaSpec {
    pub fn new(head: Vec<f64>, tail: Tail) -> Result<Self> {
        if let Some((i, a)) = head
            .iter()
            .enumerate()
            .find(|(_, a)| !(a.is_finite() && **a >= 0.0))
        {
            return Err(Error::domain(
                "AlphaSpec",
                format!("alpha_{} = {a} must be finite and >= 0", i + 1),
            ));
        }
        match tail {
            Tail::None => {}
            Tail::Geometric { coef, gamma } => {
                if !(gamma > 0.0 && gamma < 1.0) {
                    return Err(Error::domain(
                        "AlphaSpec",
                        format!("geometric tail needs 0 < gamma < 1, got {gamma}"),
                    ));
                }
                if !(coef.is_finite() && coef >= 0.0) {
                    return Err(Error::domain(
                        "AlphaSpec",
                        format!("tail coefficient {coef} must be >= 0"),
                    ));
                }
            }
            Tail::PowerLaw { coef, exponent } => {
                if !(coef.is_finite() && coef >= 0.0 && exponent.is_finite()) {
                    return Err(Error::domain(
                        "AlphaSpec",
                        format!("power-law tail needs finite coef >= 0 and exponent, got ({coef}, {exponent})"),
                    ));
                }
            }
        }
        Ok(AlphaSpec { head, tail })
    }

    /// Finite-support vector.
    pub fn finite(head: Vec<f64>) -> Result<Self> {
        Self::new(head, Tail::None)
    }

    /// `GN_k(d, a)`: only `α_k = a` is non-zero.
    pub fn gn_k(k: usize, a: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::domain("AlphaSpec::gn_k", "k must be >= 1"));
        }
        let mut head = vec![0.0; k];
        head[k - 1] = a;
        Self::finite(head)
    }

    /// `α_i = γ^i` for every `i >= 1`.
    pub fn geometric(gamma: f64) -> Result<Self> {
        Self::new(Vec::new(), Tail::Geometric { coef: 1.0, gamma })
    }

    /// `α_i = coef · i^{-exponent}` for every `i >= 1`.
    pub fn power_law(coef: f64, exponent: f64) -> Result<Self> {
        Self::new(Vec::new(), Tail::PowerLaw { coef, exponent })
    }

    pub fn head(&self) -> &[f64] {
        &self.head
    }

    pub fn tail(&self) -> Tail {
        self.tail
    }

    /// `a · α`.
    pub fn scaled(&self, a: f64) -> Result<Self> {
        let tail = match self.tail {
            Tail::None => Tail::None,
            Tail::Geometric { coef, gamma } => Tail::Geometric {
                coef: coef * a,
                gamma,
            },
            Tail::PowerLaw { coef, exponent } => Tail::PowerLaw {
                coef: coef * a,
                exponent,
            },
        };
        Self::new(self.head.iter().map(|x| x * a).collect(), tail)
    }

    fn tail_is_zero(&self) -> bool {
        match self.tail {
            Tail::None => true,
            Tail::Geometric { coef, .. } | Tail::PowerLaw { coef, .. } => coef == 0.0,
        }
    }

    /// `α_i` for `i >= 1`.
    pub fn coefficient(&self, i: usize) -> f64 {
        assert!(i >= 1, "alpha is 1-indexed");
        if i <= self.head.len() {
            return self.head[i - 1];
        }
        match self.tail {
            Tail::None => 0.0,
            Tail::Geometric { coef, gamma } => coef * gamma.powi(i as i32),
            Tail::PowerLaw { coef, exponent } => coef * (i as f64).powf(-exponent),
        }
    }

    /// Largest index with `α_i != 0`, when the support is finite.
    pub fn support(&self) -> Option<usize> {
        if self.tail_is_zero() {
            Some(
                self.head
                    .iter()
                    .rposition(|&a| a != 0.0)
                    .map_or(0, |p| p + 1),
            )
        } else {
            None
        }
    }

    /// `Σ_{j>=m} α_j` restricted to the tail (`m > K`).
    fn tail_sum0(&self, m: usize) -> f64 {
        match self.tail {
            _ if self.tail_is_zero() => 0.0,
            Tail::None => 0.0,
            Tail::Geometric { coef, gamma } => coef * gamma.powi(m as i32) / (1.0 - gamma),
            Tail::PowerLaw { coef, exponent } => coef * hurwitz_zeta(exponent, m as f64),
        }
    }

    /// `Σ_{j>=m} j α_j` restricted to the tail (`m > K`).
    fn tail_sum1(&self, m: usize) -> f64 {
        match self.tail {
            _ if self.tail_is_zero() => 0.0,
            Tail::None => 0.0,
            Tail::Geometric { coef, gamma } => {
                let mf = m as f64;
                coef * gamma.powi(m as i32) * (mf - (mf - 1.0) * gamma)
                    / ((1.0 - gamma) * (1.0 - gamma))
            }
            Tail::PowerLaw { coef, exponent } => coef * hurwitz_zeta(exponent - 1.0, m as f64),
        }
    }

    /// `|α| = Σ α_i`.
    pub fn total(&self) -> Moment {
        Moment::from_f64(self.beta(1))
    }

    /// `Σ i α_i`, which also equals `Σ β_i`.
    pub fn sum_i_alpha(&self) -> Moment {
        Moment::from_f64(self.sum_beta_from(1))
    }

    /// `β_i = Σ_{j>=i} α_j` (infinite when the series diverges).
    pub fn beta(&self, i: usize) -> f64 {
        let k = self.head.len();
        let head: f64 = if i <= k {
            self.head[i - 1..].iter().sum()
        } else {
            0.0
        };
        head + self.tail_sum0(i.max(k + 1))
    }

    /// `Σ_{j>=i} β_j = Σ_{j>=i} (j - i + 1) α_j`.
    pub fn sum_beta_from(&self, i: usize) -> f64 {
        let k = self.head.len();
        let head: f64 = if i <= k {
            self.head[i - 1..]
                .iter()
                .enumerate()
                .map(|(off, a)| (off + 1) as f64 * a)
                .sum()
        } else {
            0.0
        };
        let m = i.max(k + 1);
        let s0 = self.tail_sum0(m);
        let s1 = self.tail_sum1(m);
        if !s0.is_finite() || !s1.is_finite() {
            return f64::INFINITY;
        }
        head + s1 - (i as f64 - 1.0) * s0
    }
}

/// Hurwitz zeta `ζ(s, q) = Σ_{n>=0} (q + n)^{-s}`; infinite for `s <= 1`.
pub fn hurwitz_zeta(s: f64, q: f64) -> f64 {
    if s <= 1.0 {
        return f64::INFINITY;
    }
    const N: usize = 16;
    // B_2k / (2k)!
    const B: [f64; 6] = [
        1.0 / 12.0,
        -1.0 / 720.0,
        1.0 / 30240.0,
        -1.0 / 1209600.0,
        1.0 / 47900160.0,
        -691.0 / 1307674368000.0,
    ];
    let mut sum: f64 = (0..N).map(|n| (q + n as f64).powf(-s)).sum();
    let a = q + N as f64;
    sum += a.powf(1.0 - s) / (s - 1.0) + 0.5 * a.powf(-s);
    // rising factorial s (s+1) ... (s+2k-2)
    let mut fac = s;
    let mut pow = a.powf(-s - 1.0);
    for (k, b) in B.iter().enumerate() {
        sum += b * fac * pow;
        let j = (2 * k + 1) as f64;
        fac *= (s + j) * (s + j + 1.0);
        pow /= a * a;
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zeta_known_values() {
        let z2 = std::f64::consts::PI.powi(2) / 6.0;
        assert!((hurwitz_zeta(2.0, 1.0) - z2).abs() < 1e-13);
        assert!((hurwitz_zeta(2.0, 2.0) - (z2 - 1.0)).abs() < 1e-13);
        assert!((hurwitz_zeta(4.0, 1.0) - std::f64::consts::PI.powi(4) / 90.0).abs() < 1e-13);
        assert!(hurwitz_zeta(1.0, 1.0).is_infinite());
    }

    #[test]
    fn geometric_tail_sums_match_direct_summation() {
        let a = AlphaSpec::new(
            vec![0.3, 0.0, 0.7],
            Tail::Geometric {
                coef: 2.0,
                gamma: 0.6,
            },
        )
        .unwrap();
        let direct = |f: &dyn Fn(usize) -> f64| (1..2000).map(f).sum::<f64>();
        for i in 1..7 {
            let b = direct(&|j| if j >= i { a.coefficient(j) } else { 0.0 });
            assert!((a.beta(i) - b).abs() < 1e-12, "beta_{i}");
            let r = direct(&|j| {
                if j >= i {
                    (j - i + 1) as f64 * a.coefficient(j)
                } else {
                    0.0
                }
            });
            assert!((a.sum_beta_from(i) - r).abs() < 1e-12, "R_{i}");
        }
    }

    #[test]
    fn support_and_gn_k() {
        assert_eq!(AlphaSpec::gn_k(3, 2.0).unwrap().support(), Some(3));
        assert_eq!(
            AlphaSpec::finite(vec![1.0, 0.0, 0.0]).unwrap().support(),
            Some(1)
        );
        assert_eq!(AlphaSpec::finite(vec![]).unwrap().support(), Some(0));
        assert_eq!(AlphaSpec::geometric(0.5).unwrap().support(), None);
        assert!(AlphaSpec::gn_k(0, 1.0).is_err());
    }

    #[test]
    fn validation() {
        assert!(AlphaSpec::finite(vec![-1.0]).is_err());
        assert!(AlphaSpec::geometric(1.0).is_err());
        assert!(AlphaSpec::geometric(0.0).is_err());
        assert!(AlphaSpec::power_law(1.0, f64::NAN).is_err());
    }

    #[test]
    fn serde_round_trip() {
        let a = AlphaSpec::new(
            vec![1.0],
            Tail::Geometric {
                coef: 1.0,
                gamma: 0.5,
            },
        )
        .unwrap();
        let s = serde_json::to_string(&a).unwrap();
        assert_eq!(serde_json::from_str::<AlphaSpec>(&s).unwrap(), a);
        assert!(serde_json::from_str::<AlphaSpec>(r#"{"head":[-1.0]}"#).is_err());
    }
}
