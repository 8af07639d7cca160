//! Extended-real helpers.
//!
//! Log-likelihood ratios take values in `[-inf, +inf]`. Infinities are kept
//! as explicit `f64` sentinels and never produced by overflow: the ratio is
//! classified by the zero pattern of its arguments before any logarithm is
//! taken. `0 log(0/q) = 0` and `p log(p/0) = +inf`.

use serde::{Deserialize, Deserializer, Serializer};

/// `log(a / b)` with `log(a/0) = +inf` for `a > 0` and `log(0/b) = -inf`.
///
/// Returns `None` when both arguments are zero; such outcomes carry no mass
/// under either hypothesis and are dropped by callers.
pub fn log_ratio(a: f64, b: f64) -> Option<f64> {
    match (a > 0.0, b > 0.0) {
        (false, false) => None,
        (true, false) => Some(f64::INFINITY),
        (false, true) => Some(f64::NEG_INFINITY),
        (true, true) => Some(a.ln() - b.ln()),
    }
}

/// `p log(p/q)` under the information-theoretic conventions.
pub fn plogpq(p: f64, q: f64) -> f64 {
    if p <= 0.0 {
        0.0
    } else if q <= 0.0 {
        f64::INFINITY
    } else {
        p * (p.ln() - q.ln())
    }
}

/// Kullback-Leibler divergence in nats.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(&a, &b)| plogpq(a, b)).sum()
}

/// `a <= b + slack`, treating equal infinities as equal.
pub fn le_with_slack(a: f64, b: f64, slack: f64) -> bool {
    if a == b {
        return true;
    }
    a <= b + slack
}

/// Serde adapter for extended reals: finite values are plain JSON numbers,
/// infinities are the strings `"inf"` / `"-inf"`.
pub mod serde_ext {
    use super::*;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Str(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Str(s) => match s.as_str() {
                "inf" | "+inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(serde::de::Error::custom(format!("invalid extended real {other:?}"))),
            },
        }
    }
}

/// Same as [`serde_ext`] for optional values.
pub mod serde_ext_opt {
    use super::*;

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(x) => serde_ext::serialize(x, s),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        #[derive(Deserialize)]
        struct Wrap(#[serde(with = "serde_ext")] f64);
        Ok(Option::<Wrap>::deserialize(d)?.map(|w| w.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_classification() {
        assert_eq!(log_ratio(0.0, 0.0), None);
        assert_eq!(log_ratio(0.5, 0.0), Some(f64::INFINITY));
        assert_eq!(log_ratio(0.0, 0.5), Some(f64::NEG_INFINITY));
        assert!((log_ratio(0.9, 0.5).unwrap() - 1.8f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn divergence_conventions() {
        assert_eq!(kl_divergence(&[0.0, 1.0], &[0.5, 0.5]), 2f64.ln());
        assert_eq!(kl_divergence(&[0.5, 0.5], &[1.0, 0.0]), f64::INFINITY);
    }

    #[test]
    fn ext_serde_round_trip() {
        #[derive(serde::Serialize, serde::Deserialize, PartialEq, Debug)]
        struct S {
            #[serde(with = "serde_ext")]
            a: f64,
            #[serde(with = "serde_ext")]
            b: f64,
        }
        let v = S {
            a: f64::NEG_INFINITY,
            b: 0.25,
        };
        let txt = serde_json::to_string(&v).unwrap();
        assert_eq!(txt, r#"{"a":"-inf","b":0.25}"#);
        assert_eq!(serde_json::from_str::<S>(&txt).unwrap(), v);
    }
}
