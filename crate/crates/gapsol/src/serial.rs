//! Serde adapters that persist binary64 values as C99 hex-float strings,
//! so candidate and certificate files round-trip bit-exactly.

use num_complex::Complex64;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::interval::{from_hex, to_hex};

/// `f64` as a hex-float string.
pub mod hex_f64 {
    use super::*;

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        to_hex(*x).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        let s = String::deserialize(d)?;
        from_hex(&s).map_err(D::Error::custom)
    }
}

/// `Vec<f64>` as an array of hex-float strings.
pub mod hex_vec_f64 {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|x| to_hex(*x)).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Vec::<String>::deserialize(d)?.iter().map(|s| from_hex(s).map_err(D::Error::custom)).collect()
    }
}

fn c64_to_pair(z: &Complex64) -> [String; 2] {
    [to_hex(z.re), to_hex(z.im)]
}

fn pair_to_c64<E: serde::de::Error>(p: &[String; 2]) -> Result<Complex64, E> {
    Ok(Complex64::new(from_hex(&p[0]).map_err(E::custom)?, from_hex(&p[1]).map_err(E::custom)?))
}

/// `Vec<Complex64>` as an array of `[re_hex, im_hex]` pairs.
pub mod hex_vec_c64 {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[Complex64], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(c64_to_pair).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Complex64>, D::Error> {
        Vec::<[String; 2]>::deserialize(d)?.iter().map(pair_to_c64).collect()
    }
}

/// `Vec<Vec<Complex64>>` (Taylor orders of Fourier coefficients).
pub mod hex_vec_vec_c64 {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[Vec<Complex64>], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|o| o.iter().map(c64_to_pair).collect::<Vec<_>>()).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<Complex64>>, D::Error> {
        Vec::<Vec<[String; 2]>>::deserialize(d)?.iter().map(|o| o.iter().map(pair_to_c64).collect()).collect()
    }
}

/// `[Vec<f64>; 4]` (Chebyshev coefficient quadruple).
pub mod hex_quad_f64 {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[Vec<f64>; 4], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|c| c.iter().map(|x| to_hex(*x)).collect::<Vec<_>>()).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[Vec<f64>; 4], D::Error> {
        let raw = Vec::<Vec<String>>::deserialize(d)?;
        if raw.len() != 4 {
            return Err(D::Error::custom(format!("expected 4 components, found {}", raw.len())));
        }
        let mut out: [Vec<f64>; 4] = Default::default();
        for (o, r) in out.iter_mut().zip(&raw) {
            *o = r.iter().map(|s| from_hex(s).map_err(D::Error::custom)).collect::<Result<_, _>>()?;
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize, Deserialize, PartialEq, Debug)]
    struct Probe {
        #[serde(with = "hex_f64")]
        x: f64,
        #[serde(with = "hex_vec_c64")]
        z: Vec<Complex64>,
        #[serde(with = "hex_quad_f64")]
        q: [Vec<f64>; 4],
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let p = Probe { x: 0.1, z: vec![Complex64::new(-1.0 / 3.0, 5e-324)], q: [vec![1.1025], vec![], vec![f64::MAX], vec![-0.0]] };
        let s = serde_json::to_string(&p).unwrap();
        let back: Probe = serde_json::from_str(&s).unwrap();
        assert_eq!(back.x.to_bits(), p.x.to_bits());
        assert_eq!(back.z[0].im.to_bits(), p.z[0].im.to_bits());
        assert_eq!(back.q[3][0].to_bits(), (-0.0f64).to_bits());
        assert_eq!(back, p);
    }
}
