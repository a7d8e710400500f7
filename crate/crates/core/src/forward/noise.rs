use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Result, TsimError};
use crate::grid::RealVolume;

/// Signal-to-noise ratio in dB, or noiseless.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Snr {
    Infinite,
    Db(f64),
}

impl Snr {
    pub fn is_infinite(&self) -> bool {
        matches!(self, Snr::Infinite)
    }

    /// Default Wiener regularization for this noise level.
    pub fn default_alpha(&self) -> f64 {
        match *self {
            Snr::Infinite => 1e-4,
            Snr::Db(db) if db >= 17.5 => 5.5e-4,
            Snr::Db(_) => 1e-3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Snr::Db(db) if !db.is_finite() => Err(TsimError::config("snr", "must be finite or \"inf\"")),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for Snr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Snr::Infinite => write!(f, "inf"),
            Snr::Db(db) => write!(f, "{db}"),
        }
    }
}

impl FromStr for Snr {
    type Err = TsimError;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("inf") || t.eq_ignore_ascii_case("infinity") {
            return Ok(Snr::Infinite);
        }
        let db: f64 = t
            .parse()
            .map_err(|_| TsimError::config("snr", format!("cannot parse {s:?}")))?;
        if db.is_infinite() && db > 0.0 {
            return Ok(Snr::Infinite);
        }
        let snr = Snr::Db(db);
        snr.validate()?;
        Ok(snr)
    }
}

impl Serialize for Snr {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Snr::Infinite => s.serialize_str("inf"),
            Snr::Db(db) => s.serialize_f64(*db),
        }
    }
}

impl<'de> Deserialize<'de> for Snr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(db) => Ok(Snr::Db(db)),
            Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// `20·log10(mean(sqrt(v)))`: the SNR of Poisson counts with mean `v`.
pub fn measure_snr_db(v: &RealVolume) -> Result<f64> {
    if v.data().iter().any(|&x| x < 0.0) {
        return Err(TsimError::Numerical("negative intensities have no photon SNR".into()));
    }
    let mean_sqrt = v.data().iter().map(|x| x.sqrt()).sum::<f64>() / v.data().len() as f64;
    if mean_sqrt <= 0.0 {
        return Err(TsimError::Numerical("SNR of an all-zero volume is undefined".into()));
    }
    Ok(20.0 * mean_sqrt.log10())
}

/// Photon scale that brings volumes with the given `mean(sqrt(v))` to `snr_db`.
pub fn photon_scale(mean_sqrt: f64, snr_db: f64) -> Result<f64> {
    if !(mean_sqrt > 0.0) {
        return Err(TsimError::Numerical("cannot scale an all-zero volume to a finite SNR".into()));
    }
    Ok((10f64.powf(snr_db / 20.0) / mean_sqrt).powi(2))
}

/// `Poisson(s·v)/s` with a ChaCha8 generator on `(seed, stream)`.
pub fn poisson_scaled(v: &RealVolume, scale: f64, seed: u64, stream: u64) -> Result<RealVolume> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut out = Vec::with_capacity(v.data().len());
    for &x in v.data() {
        let lambda = scale * x;
        let k = if lambda > 0.0 {
            Poisson::new(lambda)
                .map_err(|e| TsimError::Numerical(format!("Poisson rate {lambda}: {e}")))?
                .sample(&mut rng)
        } else {
            0.0
        };
        out.push(k / scale);
    }
    RealVolume::new(*v.grid(), out)
}

/// Adds Poisson noise so that `measure_snr_db` of the clean input equals `snr`.
pub fn add_poisson(v: &RealVolume, snr: Snr, seed: u64) -> Result<RealVolume> {
    add_poisson_stream(v, snr, seed, 0)
}

pub fn add_poisson_stream(v: &RealVolume, snr: Snr, seed: u64, stream: u64) -> Result<RealVolume> {
    snr.validate()?;
    let db = match snr {
        Snr::Infinite => return Ok(v.clone()),
        Snr::Db(db) => db,
    };
    if v.data().iter().any(|&x| x < 0.0) {
        return Err(TsimError::Numerical("Poisson rates must be non-negative".into()));
    }
    let n = v.data().len() as f64;
    let mean_sqrt = v.data().iter().map(|x| x.sqrt()).sum::<f64>() / n;
    poisson_scaled(v, photon_scale(mean_sqrt, db)?, seed, stream)
}
