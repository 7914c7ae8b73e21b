//! Serde adapters that store complex numbers as `[re, im]` pairs.

use crate::{CMat, CVec, C64};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

type Pair = [f64; 2];

fn pair(z: &C64) -> Pair {
    [z.re, z.im]
}

fn unpair(p: Pair) -> C64 {
    C64::new(p[0], p[1])
}

pub mod scalar {
    use super::*;

    pub fn serialize<S: Serializer>(z: &C64, s: S) -> Result<S::Ok, S::Error> {
        pair(z).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<C64, D::Error> {
        Pair::deserialize(d).map(unpair)
    }
}

pub mod vec {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[C64], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(pair).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<C64>, D::Error> {
        Ok(Vec::<Pair>::deserialize(d)?.into_iter().map(unpair).collect())
    }
}

pub mod dvec {
    use super::*;

    pub fn serialize<S: Serializer>(v: &CVec, s: S) -> Result<S::Ok, S::Error> {
        super::vec::serialize(v.as_slice(), s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<CVec, D::Error> {
        super::vec::deserialize(d).map(CVec::from_vec)
    }
}

pub mod dvecs {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[CVec], s: S) -> Result<S::Ok, S::Error> {
        v.iter()
            .map(|x| x.iter().map(pair).collect::<Vec<_>>())
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<CVec>, D::Error> {
        let raw = Vec::<Vec<Pair>>::deserialize(d)?;
        Ok(raw
            .into_iter()
            .map(|x| CVec::from_iterator(x.len(), x.into_iter().map(unpair)))
            .collect())
    }
}

/// Row-major nested arrays.
pub mod dmat {
    use super::*;
    use serde::de::Error;

    pub fn serialize<S: Serializer>(m: &CMat, s: S) -> Result<S::Ok, S::Error> {
        (0..m.nrows())
            .map(|i| m.row(i).iter().map(pair).collect::<Vec<_>>())
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<CMat, D::Error> {
        let rows = Vec::<Vec<Pair>>::deserialize(d)?;
        let nr = rows.len();
        let nc = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != nc) {
            return Err(D::Error::custom("ragged complex matrix"));
        }
        Ok(CMat::from_fn(nr, nc, |i, j| unpair(rows[i][j])))
    }
}
