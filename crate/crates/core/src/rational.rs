//! Exact rational numbers and their `"num/den"` text form.

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use crate::Error;

/// Arbitrary-precision rational, always kept in lowest terms with a positive
/// denominator.
pub type Rational = num_rational::BigRational;

pub fn int(v: i64) -> Rational {
    Rational::from_integer(BigInt::from(v))
}

pub fn ratio(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

/// `2^exp` for any (possibly negative) exponent.
pub fn pow2(exp: i64) -> Rational {
    let mag = BigInt::one() << exp.unsigned_abs();
    if exp >= 0 {
        Rational::from_integer(mag)
    } else {
        Rational::new(BigInt::one(), mag)
    }
}

/// Renders `num/den`, omitting the denominator when it is one.
pub fn format(q: &Rational) -> String {
    q.to_string()
}

pub fn parse(s: &str) -> Result<Rational, Error> {
    let t = s.trim();
    if let Some((n, d)) = t.split_once('/') {
        let num: BigInt = n
            .parse()
            .map_err(|_| Error::Parse(format!("bad rational numerator in {s:?}")))?;
        let den: BigInt = d
            .parse()
            .map_err(|_| Error::Parse(format!("bad rational denominator in {s:?}")))?;
        if den.is_zero() {
            return Err(Error::Parse(format!("zero denominator in {s:?}")));
        }
        Ok(Rational::new(num, den))
    } else {
        let num: BigInt = t
            .parse()
            .map_err(|_| Error::Parse(format!("bad rational {s:?}")))?;
        Ok(Rational::from_integer(num))
    }
}

/// Number of decimal digits in the exact expansion of `q`, or `None` when the
/// expansion does not terminate.
pub fn exact_decimal_digits(q: &Rational) -> Option<usize> {
    let mut den = q.denom().clone();
    let two = BigInt::from(2);
    let five = BigInt::from(5);
    let mut twos = 0usize;
    let mut fives = 0usize;
    while (&den % &two).is_zero() {
        den /= &two;
        twos += 1;
    }
    while (&den % &five).is_zero() {
        den /= &five;
        fives += 1;
    }
    if !den.is_one() {
        return None;
    }
    let frac_digits = twos.max(fives);
    let scaled = q.numer().abs() * BigInt::from(10).pow(frac_digits as u32) / q.denom();
    let int_digits = scaled.to_string().len();
    Some(int_digits.max(frac_digits + 1))
}

/// Decimal rendering for lossy text output. Exact when the expansion fits in
/// `max_digits`, otherwise scientific notation with `sig` significant digits.
pub fn to_decimal(q: &Rational, max_digits: usize, sig: usize) -> String {
    if q.is_zero() {
        return "0".to_string();
    }
    let neg = q.is_negative();
    let a = q.abs();
    if let Some(d) = exact_decimal_digits(q) {
        if d <= max_digits {
            let int_part = a.trunc().to_integer();
            let mut frac = a.fract();
            let mut out = int_part.to_string();
            if !frac.is_zero() {
                out.push('.');
                let ten = int(10);
                while !frac.is_zero() {
                    frac *= &ten;
                    let digit = frac.trunc().to_integer();
                    out.push_str(&digit.to_string());
                    frac = frac.fract();
                }
            }
            return if neg { format!("-{out}") } else { out };
        }
    }
    // |q| = m * 10^e with 1 <= m < 10.
    let mut exp: i64 = a.numer().to_string().len() as i64 - a.denom().to_string().len() as i64;
    let pow10 = |e: i64| -> Rational {
        if e >= 0 {
            Rational::from_integer(BigInt::from(10).pow(e as u32))
        } else {
            Rational::new(BigInt::one(), BigInt::from(10).pow((-e) as u32))
        }
    };
    while a < pow10(exp) {
        exp -= 1;
    }
    while a >= pow10(exp + 1) {
        exp += 1;
    }
    let scaled = &a / pow10(exp) * pow10(sig as i64 - 1);
    let mut digits = (scaled + ratio(1, 2)).floor().to_integer();
    if digits >= BigInt::from(10).pow(sig as u32) {
        digits /= 10;
        exp += 1;
    }
    let ds = digits.to_string();
    let mantissa = if ds.len() > 1 {
        let trimmed = ds[1..].trim_end_matches('0');
        if trimmed.is_empty() {
            ds[..1].to_string()
        } else {
            format!("{}.{}", &ds[..1], trimmed)
        }
    } else {
        ds
    };
    format!("{}{}e{}", if neg { "-" } else { "" }, mantissa, exp)
}

/// Serde adapter for a single rational stored as a `"num/den"` string.
pub mod serde_str {
    use super::Rational;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(q: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&super::format(q))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let s = String::deserialize(d)?;
        super::parse(&s).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_form() {
        assert_eq!(format(&ratio(123, 4)), "123/4");
        assert_eq!(format(&ratio(8, 4)), "2");
        assert_eq!(format(&ratio(-3, 4)), "-3/4");
        assert_eq!(parse("6/-8").unwrap(), ratio(-3, 4));
        assert_eq!(parse("-59/4").unwrap(), ratio(-59, 4));
        assert!(parse("1/0").is_err());
        assert!(parse("x").is_err());
    }

    #[test]
    fn powers_of_two() {
        assert_eq!(pow2(-9), ratio(1, 512));
        assert_eq!(pow2(4), int(16));
        assert_eq!(format(&pow2(-17)), "1/131072");
    }

    #[test]
    fn decimal_digits() {
        assert_eq!(exact_decimal_digits(&ratio(3, 4)), Some(3));
        assert_eq!(exact_decimal_digits(&ratio(-59, 4)), Some(4));
        assert_eq!(exact_decimal_digits(&ratio(1, 3)), None);
        assert_eq!(exact_decimal_digits(&int(16)), Some(2));
        assert!(exact_decimal_digits(&pow2(-200)).unwrap() > 40);
    }

    #[test]
    fn decimal_rendering() {
        assert_eq!(to_decimal(&ratio(-59, 4), 40, 17), "-14.75");
        assert_eq!(to_decimal(&int(16), 40, 17), "16");
        assert_eq!(to_decimal(&ratio(1, 3), 40, 5), "3.3333e-1");
        assert_eq!(to_decimal(&pow2(-200), 40, 6), "6.22302e-61");
        assert_eq!(to_decimal(&int(0), 40, 6), "0");
    }

    proptest::proptest! {
        #[test]
        fn format_parse_round_trip(n in -1_000_000i64..1_000_000, d in 1i64..1_000_000) {
            let q = ratio(n, d);
            let s = format(&q);
            proptest::prop_assert_eq!(parse(&s).unwrap(), q.clone());
            proptest::prop_assert_eq!(format(&parse(&s).unwrap()), s);
        }
    }
}
