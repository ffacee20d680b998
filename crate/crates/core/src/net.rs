//! Bipartite link networks: geometry, path-loss gains, SINR and sum-rate.
//!
//! Powers are linear ratios to the thermal noise power, which is fixed at 1.

use nalgebra::DMatrix;
use rand::Rng as _;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

pub type Point = [f64; 2];

const NOISE_POWER: f64 = 1.0;
const LINK_DISTANCE_RTOL: f64 = 1e-9;

pub fn distance(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// M transmitter/receiver pairs with a fixed link distance and power-law
/// path loss. `gains[(i, j)]` is the gain from Tx `i` to Rx `j`; the matrix is
/// not symmetric in general.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NetworkRecord", into = "NetworkRecord")]
pub struct LinkNetwork {
    tx: Vec<Point>,
    rx: Vec<Point>,
    link_distance: f64,
    pathloss_exponent: f64,
    gains: DMatrix<f64>,
}

/// Wire form of a network: geometry only, gains are recomputed on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkRecord {
    pub tx: Vec<Point>,
    pub rx: Vec<Point>,
    pub d: f64,
    pub alpha: f64,
}

impl TryFrom<NetworkRecord> for LinkNetwork {
    type Error = Error;

    fn try_from(r: NetworkRecord) -> Result<Self> {
        LinkNetwork::from_positions(r.tx, r.rx, r.d, r.alpha)
    }
}

impl From<LinkNetwork> for NetworkRecord {
    fn from(n: LinkNetwork) -> Self {
        NetworkRecord {
            tx: n.tx,
            rx: n.rx,
            d: n.link_distance,
            alpha: n.pathloss_exponent,
        }
    }
}

impl LinkNetwork {
    pub fn from_positions(tx: Vec<Point>, rx: Vec<Point>, d: f64, alpha: f64) -> Result<Self> {
        if tx.is_empty() || tx.len() != rx.len() {
            return Err(Error::InvalidParameter(format!(
                "need matching non-empty Tx/Rx lists, got {} and {}",
                tx.len(),
                rx.len()
            )));
        }
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::InvalidParameter(format!("link distance must be positive, got {d}")));
        }
        if !alpha.is_finite() {
            return Err(Error::InvalidParameter(format!("path-loss exponent must be finite, got {alpha}")));
        }
        for (l, (&t, &r)) in tx.iter().zip(&rx).enumerate() {
            let dl = distance(t, r);
            if (dl - d).abs() > LINK_DISTANCE_RTOL * d {
                return Err(Error::InvalidParameter(format!(
                    "link {l} has length {dl}, expected {d}"
                )));
            }
        }
        let m = tx.len();
        let gains = DMatrix::from_fn(m, m, |i, j| distance(tx[i], rx[j]).powf(-alpha));
        if let Some(bad) = gains.iter().find(|g| !(g.is_finite() && **g > 0.0)) {
            return Err(Error::InvalidParameter(format!("degenerate geometry yields gain {bad}")));
        }
        Ok(Self {
            tx,
            rx,
            link_distance: d,
            pathloss_exponent: alpha,
            gains,
        })
    }

    pub fn len(&self) -> usize {
        self.tx.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tx.is_empty()
    }

    pub fn tx(&self) -> &[Point] {
        &self.tx
    }

    pub fn rx(&self) -> &[Point] {
        &self.rx
    }

    pub fn link_distance(&self) -> f64 {
        self.link_distance
    }

    pub fn pathloss_exponent(&self) -> f64 {
        self.pathloss_exponent
    }

    pub fn gains(&self) -> &DMatrix<f64> {
        &self.gains
    }

    /// Gain from Tx `from` to Rx `to`.
    pub fn gain(&self, from: usize, to: usize) -> f64 {
        self.gains[(from, to)]
    }

    /// Relabels links so that new link `k` is old link `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        check_permutation(perm, self.len())?;
        let tx = perm.iter().map(|&p| self.tx[p]).collect();
        let rx = perm.iter().map(|&p| self.rx[p]).collect();
        Self::from_positions(tx, rx, self.link_distance, self.pathloss_exponent)
    }

    pub fn to_record(&self) -> NetworkRecord {
        self.clone().into()
    }
}

pub(crate) fn check_permutation(perm: &[usize], m: usize) -> Result<()> {
    let mut seen = vec![false; m];
    if perm.len() != m {
        return Err(Error::InvalidParameter("permutation length mismatch".into()));
    }
    for &p in perm {
        if p >= m || seen[p] {
            return Err(Error::InvalidParameter("not a permutation".into()));
        }
        seen[p] = true;
    }
    Ok(())
}

/// Two-level power configuration, linear units relative to noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerConfig {
    pub p_high: f64,
    pub p_low: f64,
    pub p_max: f64,
    pub p_threshold: f64,
}

impl PowerConfig {
    pub fn new(p_high: f64, p_low: f64, p_max: f64, p_threshold: f64) -> Result<Self> {
        let ordered = 0.0 <= p_low && p_low < p_threshold && p_threshold < p_high && p_high <= p_max;
        if !ordered || !p_max.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "power levels must satisfy 0 <= p_low < p_threshold < p_high <= p_max, got \
                 p_low={p_low}, p_threshold={p_threshold}, p_high={p_high}, p_max={p_max}"
            )));
        }
        Ok(Self {
            p_high,
            p_low,
            p_max,
            p_threshold,
        })
    }

    pub fn from_db(p_high_db: f64, p_low_db: f64, p_max_db: f64, p_threshold_db: f64) -> Result<Self> {
        Self::new(
            db_to_linear(p_high_db),
            db_to_linear(p_low_db),
            db_to_linear(p_max_db),
            db_to_linear(p_threshold_db),
        )
    }

    /// 33 dB active and maximum power, 13 dB inactive power, 23 dB threshold.
    pub fn paper_default() -> Self {
        Self::from_db(33.0, 13.0, 33.0, 23.0).expect("default power levels are ordered")
    }

    /// `p_high` on active links, `p_low` elsewhere.
    pub fn power_vector(&self, subset: &ActiveSubset, m: usize) -> Vec<f64> {
        power_vector_at_levels(subset, m, self.p_high, self.p_low)
    }
}

pub fn power_vector_at_levels(subset: &ActiveSubset, m: usize, high: f64, low: f64) -> Vec<f64> {
    let mut p = vec![low; m];
    for &l in subset.indices() {
        p[l] = high;
    }
    p
}

/// Sorted, duplicate-free set of link indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActiveSubset(Vec<usize>);

impl ActiveSubset {
    /// Validates against a ground set of `m` links.
    pub fn new(mut indices: Vec<usize>, m: usize) -> Result<Self> {
        indices.sort_unstable();
        if let Some(&bad) = indices.iter().find(|&&i| i >= m) {
            return Err(Error::IndexOutOfRange { index: bad, len: m });
        }
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidParameter("duplicate link index in subset".into()));
        }
        Ok(Self(indices))
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn full(m: usize) -> Self {
        Self((0..m).collect())
    }

    pub fn from_mask(mask: &[bool]) -> Self {
        Self(mask.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect())
    }

    /// Bit `i` of `bits` selects link `i`.
    pub fn from_bits(bits: u64, m: usize) -> Self {
        Self((0..m).filter(|&i| bits >> i & 1 == 1).collect())
    }

    pub fn to_mask(&self, m: usize) -> Vec<bool> {
        let mut mask = vec![false; m];
        for &i in &self.0 {
            mask[i] = true;
        }
        mask
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn into_indices(self) -> Vec<usize> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.binary_search(&i).is_ok()
    }

    /// Checks the subset against a ground set of size `m`.
    pub fn validate(&self, m: usize) -> Result<()> {
        match self.0.last() {
            Some(&i) if i >= m => Err(Error::IndexOutOfRange { index: i, len: m }),
            _ => Ok(()),
        }
    }

    /// Image of the subset under the relabeling used by [`LinkNetwork::permuted`].
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut inverse = vec![0; perm.len()];
        for (new, &old) in perm.iter().enumerate() {
            inverse[old] = new;
        }
        let mut v: Vec<usize> = self.0.iter().map(|&i| inverse[i]).collect();
        v.sort_unstable();
        Self(v)
    }
}

/// Draws `m` links: Tx uniform in a disc centered at the origin, each Rx at
/// distance `d` from its Tx in a uniformly random direction. Draws where a Tx
/// lands on a foreign Rx are rejected.
pub fn generate_network(m: usize, disc_radius: f64, d: f64, alpha: f64, seed: u64) -> Result<LinkNetwork> {
    if m == 0 {
        return Err(Error::InvalidParameter("network needs at least one link".into()));
    }
    if !(disc_radius > 0.0 && disc_radius.is_finite()) {
        return Err(Error::InvalidParameter(format!("disc radius must be positive, got {disc_radius}")));
    }
    if !(d > 0.0 && d.is_finite()) {
        return Err(Error::InvalidParameter(format!("link distance must be positive, got {d}")));
    }
    let mut rng = rng_from_seed(seed);
    loop {
        let mut tx = Vec::with_capacity(m);
        let mut rx = Vec::with_capacity(m);
        for _ in 0..m {
            let r = disc_radius * rng.random::<f64>().sqrt();
            let phi = std::f64::consts::TAU * rng.random::<f64>();
            let t = [r * phi.cos(), r * phi.sin()];
            let psi = std::f64::consts::TAU * rng.random::<f64>();
            tx.push(t);
            rx.push([t[0] + d * psi.cos(), t[1] + d * psi.sin()]);
        }
        match LinkNetwork::from_positions(tx, rx, d, alpha) {
            Ok(n) => return Ok(n),
            Err(Error::InvalidParameter(_)) => continue,
            Err(e) => return Err(e),
        }
    }
}

/// Poisson(mean) draw conditioned on being positive.
pub fn sample_network_size(mean: f64, seed: u64) -> Result<usize> {
    let poisson = Poisson::new(mean)
        .map_err(|_| Error::InvalidParameter(format!("Poisson mean must be positive, got {mean}")))?;
    let mut rng = rng_from_seed(seed);
    loop {
        let m = poisson.sample(&mut rng) as usize;
        if m > 0 {
            return Ok(m);
        }
    }
}

/// SINR at Rx `l` for the given transmit powers.
pub fn sinr(network: &LinkNetwork, powers: &[f64], l: usize) -> Result<f64> {
    let m = network.len();
    if l >= m {
        return Err(Error::IndexOutOfRange { index: l, len: m });
    }
    if powers.len() != m {
        return Err(Error::InvalidParameter(format!("expected {m} powers, got {}", powers.len())));
    }
    Ok(sinr_unchecked(network, powers, l))
}

pub(crate) fn sinr_unchecked(network: &LinkNetwork, powers: &[f64], l: usize) -> f64 {
    let g = network.gains();
    let interference: f64 = (0..powers.len())
        .filter(|&j| j != l)
        .map(|j| g[(j, l)] * powers[j])
        .sum();
    g[(l, l)] * powers[l] / (NOISE_POWER + interference)
}

/// SINR at every receiver.
pub fn sinr_all(network: &LinkNetwork, powers: &[f64]) -> Vec<f64> {
    assert_eq!(powers.len(), network.len(), "one power per link");
    (0..network.len()).map(|l| sinr_unchecked(network, powers, l)).collect()
}

pub fn sum_rate_with_powers(network: &LinkNetwork, powers: &[f64]) -> f64 {
    sinr_all(network, powers).iter().map(|g| g.ln_1p()).sum::<f64>() / std::f64::consts::LN_2
}

/// Sum over all links of log2(1 + SINR) with `p_high` on the subset and
/// `p_low` elsewhere; inactive links contribute their own rate too.
pub fn sum_rate(network: &LinkNetwork, subset: &ActiveSubset, cfg: &PowerConfig) -> f64 {
    sum_rate_with_powers(network, &cfg.power_vector(subset, network.len()))
}

pub fn sum_rate_at_levels(network: &LinkNetwork, subset: &ActiveSubset, high: f64, low: f64) -> f64 {
    sum_rate_with_powers(network, &power_vector_at_levels(subset, network.len(), high, low))
}
