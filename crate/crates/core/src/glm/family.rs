use crate::error::{Error, Result};
use crate::Scalar;
use serde::Serialize;
use std::fmt;
use std::str::FromStr;

/// Response family with its canonical link.
///
/// Binomial means are success probabilities; a grouped binomial row with
/// `t` trials and `y` successes enters IWLS as the proportion `y/t` with its
/// iterative weight multiplied by `t`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    GaussianIdentity,
    BinomialLogit,
    PoissonLog,
}

fn sigmoid<T: Scalar>(eta: T) -> T {
    if eta >= T::zero() {
        T::one() / (T::one() + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (T::one() + e)
    }
}

fn xlogy<T: Scalar>(x: T, y: T) -> T {
    if x == T::zero() {
        T::zero()
    } else {
        x * y.ln()
    }
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::GaussianIdentity => "gaussian-identity",
            Family::BinomialLogit => "binomial-logit",
            Family::PoissonLog => "poisson-log",
        }
    }

    pub fn link<T: Scalar>(self, mu: T) -> T {
        match self {
            Family::GaussianIdentity => mu,
            Family::BinomialLogit => (mu / (T::one() - mu)).ln(),
            Family::PoissonLog => mu.ln(),
        }
    }

    pub fn inv_link<T: Scalar>(self, eta: T) -> T {
        match self {
            Family::GaussianIdentity => eta,
            Family::BinomialLogit => sigmoid(eta),
            Family::PoissonLog => eta.exp(),
        }
    }

    /// dμ/dη as a function of η.
    pub fn mu_eta<T: Scalar>(self, eta: T) -> T {
        match self {
            Family::GaussianIdentity => T::one(),
            Family::BinomialLogit => {
                let e = (-eta.abs()).exp();
                e / ((T::one() + e) * (T::one() + e))
            }
            Family::PoissonLog => eta.exp(),
        }
    }

    pub fn variance<T: Scalar>(self, mu: T) -> T {
        match self {
            Family::GaussianIdentity => T::one(),
            Family::BinomialLogit => mu * (T::one() - mu),
            Family::PoissonLog => mu,
        }
    }

    /// Variance function evaluated from η, avoiding the cancellation in `1 − μ`.
    pub fn variance_at_eta<T: Scalar>(self, eta: T) -> T {
        match self {
            Family::BinomialLogit => sigmoid(eta) * sigmoid(-eta),
            _ => self.variance(self.inv_link(eta)),
        }
    }

    /// Bound on |η| applied before evaluating the mean, if any. At 36 a
    /// logistic probability is within 10 machine epsilons of 0 or 1.
    pub fn eta_bound(self) -> Option<f64> {
        match self {
            Family::GaussianIdentity => None,
            Family::BinomialLogit | Family::PoissonLog => Some(36.0),
        }
    }

    /// Unit deviance of one row: `y` on the response scale (successes for
    /// binomial), `mu` the mean (probability for binomial), `trials` the
    /// binomial denominator.
    pub fn unit_deviance<T: Scalar>(self, y: T, mu: T, trials: T) -> T {
        let two = T::lit(2.0);
        match self {
            Family::GaussianIdentity => (y - mu) * (y - mu),
            Family::PoissonLog => {
                if mu == T::zero() {
                    return if y == T::zero() { T::zero() } else { T::infinity() };
                }
                two * (xlogy(y, y / mu) - (y - mu))
            }
            Family::BinomialLogit => {
                let fail = trials - y;
                let expect_s = trials * mu;
                let expect_f = trials * (T::one() - mu);
                let s = if y == T::zero() {
                    T::zero()
                } else {
                    xlogy(y, y / expect_s)
                };
                let f = if fail == T::zero() {
                    T::zero()
                } else {
                    xlogy(fail, fail / expect_f)
                };
                two * (s + f)
            }
        }
    }

    /// Checks one response value against the family's domain.
    pub fn check_response<T: Scalar>(self, y: T, trials: T, grouped: bool) -> Result<()> {
        if !y.is_finite() {
            return Err(Error::InvalidResponse(format!("non-finite response {y}")));
        }
        match self {
            Family::GaussianIdentity => Ok(()),
            Family::PoissonLog if y < T::zero() => Err(Error::InvalidResponse(format!("negative count {y}"))),
            Family::PoissonLog => Ok(()),
            Family::BinomialLogit if !grouped && y != T::zero() && y != T::one() => Err(Error::InvalidResponse(
                format!("ungrouped binomial response must be 0/1, got {y}"),
            )),
            Family::BinomialLogit if y < T::zero() || y > trials || trials <= T::zero() => Err(Error::InvalidResponse(
                format!("need 0 <= y <= trials, got y={y}, trials={trials}"),
            )),
            Family::BinomialLogit => Ok(()),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" | "gaussian-identity" | "normal" => Ok(Family::GaussianIdentity),
            "binomial" | "binomial-logit" | "logistic" => Ok(Family::BinomialLogit),
            "poisson" | "poisson-log" => Ok(Family::PoissonLog),
            other => Err(Error::Parse(format!("unknown family `{other}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ALL: [Family; 3] = [Family::GaussianIdentity, Family::BinomialLogit, Family::PoissonLog];

    #[test]
    fn link_inverts() {
        // |η| ≤ 10: beyond that 1 − μ carries fewer than 10 significant digits.
        for fam in ALL {
            for i in -40..=40 {
                let eta = i as f64 * 0.25;
                let back = fam.link(fam.inv_link(eta));
                assert!((back - eta).abs() < 1e-10, "{fam} at {eta}: {back}");
            }
        }
    }

    #[test]
    fn variance_positive_inside_domain() {
        for mu in [1e-6, 0.01, 0.3, 0.5, 0.99, 1.0 - 1e-6] {
            assert!(Family::BinomialLogit.variance(mu) > 0.0);
            assert!(Family::PoissonLog.variance(mu * 50.0) > 0.0);
        }
    }

    #[test]
    fn mu_eta_matches_finite_difference() {
        for fam in ALL {
            for eta in [-3.0f64, -0.5, 0.0, 1.2, 4.0] {
                let h = 1e-6;
                let fd = (fam.inv_link(eta + h) - fam.inv_link(eta - h)) / (2.0 * h);
                assert!((fd - fam.mu_eta(eta)).abs() < 1e-7 * fd.abs().max(1.0));
            }
        }
    }

    #[test]
    fn unit_deviance_cases() {
        assert_eq!(Family::PoissonLog.unit_deviance(0.0, 1.0, 1.0), 2.0);
        assert_eq!(Family::PoissonLog.unit_deviance(0.0, 0.0, 1.0), 0.0);
        assert!(Family::PoissonLog.unit_deviance(3.0f64, 3.0, 1.0).abs() < 1e-15);
        assert_eq!(Family::BinomialLogit.unit_deviance(1.0, 1.0, 1.0), 0.0);
        assert_eq!(Family::BinomialLogit.unit_deviance(0.0, 0.0, 1.0), 0.0);
        let d = Family::BinomialLogit.unit_deviance(1.0, 0.5, 1.0);
        assert!((d - 2.0 * 2f64.ln()).abs() < 1e-15);
        assert!(Family::BinomialLogit.unit_deviance(2.0f64, 0.4, 5.0).abs() < 1e-15);
    }

    #[test]
    fn parses_names() {
        assert_eq!("binomial".parse::<Family>().unwrap(), Family::BinomialLogit);
        assert_eq!("poisson-log".parse::<Family>().unwrap(), Family::PoissonLog);
        assert!("gamma".parse::<Family>().is_err());
    }

    #[test]
    fn response_domain() {
        assert!(Family::BinomialLogit.check_response(2.0, 1.0, false).is_err());
        assert!(Family::BinomialLogit.check_response(2.0, 3.0, true).is_ok());
        assert!(Family::BinomialLogit.check_response(4.0, 3.0, true).is_err());
        assert!(Family::PoissonLog.check_response(-1.0, 1.0, false).is_err());
    }
}
