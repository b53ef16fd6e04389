use std::cmp::Ordering;
use std::fmt;
use std::ops::{Div, Mul, Neg};

use serde::{Deserialize, Serialize};

/// A real number stored as `sign * exp(log_abs)`.
///
/// Products and quotients are sums and differences of logs, so values such as
/// `Γ(10⁵)` or `c₂ⁿ` at `n = 10⁴` stay representable. `log_abs` is ignored when
/// `sign == 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogScalar {
    pub sign: i8,
    pub log_abs: f64,
}

impl LogScalar {
    pub const ZERO: LogScalar = LogScalar { sign: 0, log_abs: f64::NEG_INFINITY };
    pub const ONE: LogScalar = LogScalar { sign: 1, log_abs: 0.0 };

    /// A positive value given by its natural logarithm.
    pub fn from_ln(log_abs: f64) -> Self {
        if log_abs == f64::NEG_INFINITY {
            Self::ZERO
        } else {
            LogScalar { sign: 1, log_abs }
        }
    }

    pub fn new(sign: i8, log_abs: f64) -> Self {
        match sign.cmp(&0) {
            Ordering::Equal => Self::ZERO,
            Ordering::Greater => LogScalar { sign: 1, log_abs },
            Ordering::Less => LogScalar { sign: -1, log_abs },
        }
    }

    pub fn from_f64(x: f64) -> Self {
        if x == 0.0 {
            Self::ZERO
        } else {
            LogScalar { sign: if x > 0.0 { 1 } else { -1 }, log_abs: x.abs().ln() }
        }
    }

    pub fn to_f64(self) -> f64 {
        if self.sign == 0 {
            0.0
        } else {
            f64::from(self.sign) * self.log_abs.exp()
        }
    }

    pub fn is_zero(self) -> bool {
        self.sign == 0
    }

    /// Natural log of a positive value; `None` for zero or negative values.
    pub fn ln(self) -> Option<f64> {
        (self.sign > 0).then_some(self.log_abs)
    }

    pub fn abs(self) -> Self {
        if self.sign == 0 {
            self
        } else {
            LogScalar { sign: 1, log_abs: self.log_abs }
        }
    }

    /// `self^e` for a positive base.
    pub fn powf(self, e: f64) -> Self {
        match self.sign {
            0 if e > 0.0 => Self::ZERO,
            0 => LogScalar { sign: 1, log_abs: f64::INFINITY },
            1 => LogScalar { sign: 1, log_abs: self.log_abs * e },
            _ => panic!("LogScalar::powf on a negative value"),
        }
    }

    pub fn recip(self) -> Self {
        LogScalar { sign: self.sign, log_abs: -self.log_abs }
    }

    /// Signed addition via log-sum-exp.
    pub fn add(self, other: Self) -> Self {
        if self.sign == 0 {
            return other;
        }
        if other.sign == 0 {
            return self;
        }
        let (big, small) = if self.log_abs >= other.log_abs { (self, other) } else { (other, self) };
        let d = small.log_abs - big.log_abs;
        if big.sign == small.sign {
            LogScalar { sign: big.sign, log_abs: big.log_abs + d.exp().ln_1p() }
        } else {
            if d == 0.0 {
                return Self::ZERO;
            }
            LogScalar { sign: big.sign, log_abs: big.log_abs + (-d.exp()).ln_1p() }
        }
    }

    pub fn sub(self, other: Self) -> Self {
        self.add(-other)
    }
}

impl Mul for LogScalar {
    type Output = LogScalar;
    fn mul(self, rhs: LogScalar) -> LogScalar {
        if self.sign == 0 || rhs.sign == 0 {
            return LogScalar::ZERO;
        }
        LogScalar { sign: self.sign * rhs.sign, log_abs: self.log_abs + rhs.log_abs }
    }
}

impl Div for LogScalar {
    type Output = LogScalar;
    fn div(self, rhs: LogScalar) -> LogScalar {
        if self.sign == 0 {
            return LogScalar::ZERO;
        }
        if rhs.sign == 0 {
            return LogScalar { sign: self.sign, log_abs: f64::INFINITY };
        }
        LogScalar { sign: self.sign * rhs.sign, log_abs: self.log_abs - rhs.log_abs }
    }
}

impl Neg for LogScalar {
    type Output = LogScalar;
    fn neg(self) -> LogScalar {
        LogScalar { sign: -self.sign, log_abs: self.log_abs }
    }
}

impl fmt::Display for LogScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.sign {
            0 => write!(f, "0"),
            s => write!(f, "{}exp({})", if s < 0 { "-" } else { "" }, self.log_abs),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn huge_products_do_not_overflow() {
        let big = LogScalar::from_ln(600.0);
        let prod = big * big * big;
        assert_eq!(prod.log_abs, 1800.0);
        let back = prod / big / big;
        // exp() amplifies the absolute error of the stored log by |ln x|.
        assert!((back.to_f64() - 600f64.exp()).abs() / 600f64.exp() < 1e3 * f64::EPSILON);
    }

    #[test]
    fn signed_addition() {
        let a = LogScalar::from_f64(3.0);
        let b = LogScalar::from_f64(-5.0);
        assert!((a.add(b).to_f64() + 2.0).abs() < 1e-15);
        assert!(a.sub(a).is_zero());
        assert_eq!(LogScalar::ZERO.add(b), b);
    }

    proptest! {
        #[test]
        fn roundtrip_is_ulp_scale(x in -1e300f64..1e300) {
            prop_assume!(x != 0.0);
            let y = LogScalar::from_f64(x).to_f64();
            let scale = 4.0 + x.abs().ln().abs();
            prop_assert!((y - x).abs() <= scale * f64::EPSILON * x.abs());
        }

        #[test]
        fn product_matches_f64(x in -1e6f64..1e6, y in -1e6f64..1e6) {
            prop_assume!(x != 0.0 && y != 0.0);
            let p = (LogScalar::from_f64(x) * LogScalar::from_f64(y)).to_f64();
            prop_assert!((p - x * y).abs() <= 1e-12 * (x * y).abs());
        }
    }
}
