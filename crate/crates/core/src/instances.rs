//! Ising problem instances: generation, energies, file round-trip, and an
//! exhaustive ground-state oracle for small sizes.

use ndarray::Array2;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

use crate::noise::normal_from_words;

/// Provenance of an instance, kept for file headers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum InstanceMeta {
    /// Couplings drawn from the 21-value set {-1, -0.9, ..., 1}.
    Discrete { seed: u64 },
    /// Wishart planted ensemble with density parameter alpha.
    Wishart { alpha: f64, seed: u64 },
    /// Hand-built or externally supplied couplings.
    Custom,
}

/// A symmetric zero-diagonal coupling matrix, optionally with a known planted
/// ground state and its energy.
#[derive(Clone, Debug)]
pub struct Instance {
    pub n: usize,
    pub j: Array2<f64>,
    pub planted: Option<Vec<i8>>,
    pub ground_energy: Option<f64>,
    pub meta: InstanceMeta,
}

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("instance needs at least two sites, got {0}")]
    TooSmall(usize),
    #[error("spin vector has length {got}, instance has {want} sites")]
    DimensionMismatch { got: usize, want: usize },
    #[error("spin entries must be +1 or -1")]
    BadSpin,
    #[error("exhaustive search limited to n <= {limit}, got {n}")]
    TooLargeForBruteForce { n: usize, limit: usize },
    #[error("wishart parameter alpha must give round(alpha n) >= 1, got alpha = {alpha}, n = {n}")]
    DegenerateAlpha { alpha: f64, n: usize },
    #[error("instance file parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Largest site count the exhaustive oracle will accept.
pub const BRUTE_FORCE_LIMIT: usize = 24;

/// Ising energy E = -1/2 sum_{r r'} J_{r r'} s_r s_{r'}.
pub fn ising_energy(inst: &Instance, sigma: &[i8]) -> Result<f64, InstanceError> {
    if sigma.len() != inst.n {
        return Err(InstanceError::DimensionMismatch {
            got: sigma.len(),
            want: inst.n,
        });
    }
    if sigma.iter().any(|&s| s != 1 && s != -1) {
        return Err(InstanceError::BadSpin);
    }
    Ok(energy_unchecked(&inst.j, sigma))
}

fn energy_unchecked(j: &Array2<f64>, sigma: &[i8]) -> f64 {
    let n = sigma.len();
    let mut e = 0.0;
    for r in 0..n {
        let row = j.row(r);
        let mut acc = 0.0;
        for rp in (r + 1)..n {
            acc += row[rp] * f64::from(sigma[rp]);
        }
        e -= f64::from(sigma[r]) * acc;
    }
    e
}

/// Energy from real-valued amplitudes, taking sgn with sgn(0) = +1.
pub fn spins_from_amplitudes(amps: &[f64]) -> Vec<i8> {
    amps.iter().map(|&a| if a < 0.0 { -1 } else { 1 }).collect()
}

/// Couplings drawn independently and uniformly from {-1, -0.9, ..., 0.9, 1}.
pub fn gen_discrete_instance(n: usize, seed: u64) -> Result<Instance, InstanceError> {
    if n < 2 {
        return Err(InstanceError::TooSmall(n));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5DEE_CE66_D612_747B);
    let mut j = Array2::zeros((n, n));
    for r in 0..n {
        for rp in (r + 1)..n {
            // rejection-free: 21 values from the top bits of a 64-bit word
            let k = (rng.next_u64() % 21) as i64 - 10;
            let v = k as f64 / 10.0;
            j[(r, rp)] = v;
            j[(rp, r)] = v;
        }
    }
    Ok(Instance {
        n,
        j,
        planted: None,
        ground_energy: None,
        meta: InstanceMeta::Discrete { seed },
    })
}

/// Wishart planted instance: J = -(W W^T)/n with zeroed diagonal, where the
/// n x round(alpha n) Gaussian matrix W has every column projected orthogonal
/// to the all-ones planted configuration. Any spin vector s has energy
/// |W^T s|^2/(2n) + const, so the planted vector is a global minimum by
/// construction.
pub fn gen_wishart_planted(n: usize, alpha: f64, seed: u64) -> Result<Instance, InstanceError> {
    if n < 2 {
        return Err(InstanceError::TooSmall(n));
    }
    let cols = (alpha * n as f64).round() as usize;
    if !(alpha > 0.0) || cols < 1 {
        return Err(InstanceError::DegenerateAlpha { alpha, n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9E6A_55B3_C2F0_193D);
    let mut gaussian = || {
        let a = rng.next_u64();
        let b = rng.next_u64();
        normal_from_words(a, b)
    };
    let mut w = Array2::<f64>::zeros((n, cols));
    let mut col = vec![0.0f64; n];
    for c in 0..cols {
        loop {
            for slot in col.iter_mut() {
                *slot = gaussian();
            }
            // project orthogonal to the all-ones planted vector
            let mean = col.iter().sum::<f64>() / n as f64;
            for slot in col.iter_mut() {
                *slot -= mean;
            }
            let norm2 = col.iter().map(|x| x * x).sum::<f64>();
            if norm2 > 1e-12 {
                break;
            }
            // numerically collinear with the planted vector: redraw
        }
        for r in 0..n {
            w[(r, c)] = col[r];
        }
    }
    let mut j = Array2::zeros((n, n));
    for r in 0..n {
        for rp in r..n {
            let mut dot = 0.0;
            for c in 0..cols {
                dot += w[(r, c)] * w[(rp, c)];
            }
            let v = -dot / n as f64;
            if r != rp {
                j[(r, rp)] = v;
                j[(rp, r)] = v;
            }
        }
    }
    let planted = vec![1i8; n];
    let ground_energy = energy_unchecked(&j, &planted);
    Ok(Instance {
        n,
        j,
        planted: Some(planted),
        ground_energy: Some(ground_energy),
        meta: InstanceMeta::Wishart { alpha, seed },
    })
}

/// Result of the exhaustive search.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundState {
    pub energy: f64,
    /// One minimizing configuration (with the first spin fixed to +1).
    pub config: Vec<i8>,
    /// Number of distinct minimizing configurations up to global flip,
    /// counted with a 1e-9 energy tolerance.
    pub degeneracy: usize,
}

/// Exhaustive minimum over all 2^(n-1) configurations (first spin fixed by
/// the global flip symmetry). Uses Gray-code single-flip updates of the local
/// fields; candidate minima are re-evaluated with the exact energy sum so the
/// returned value matches `ising_energy` of the returned configuration
/// bit for bit.
pub fn brute_force_ground(inst: &Instance) -> Result<GroundState, InstanceError> {
    let n = inst.n;
    if n < 2 {
        return Err(InstanceError::TooSmall(n));
    }
    if n > BRUTE_FORCE_LIMIT {
        return Err(InstanceError::TooLargeForBruteForce {
            n,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    const TOL: f64 = 1e-9;
    // incremental energies drift by far less than this re-check band
    const BAND: f64 = 1e-6;
    let mut sigma = vec![1i8; n];
    // local field h_r = sum_rp J[r][rp] sigma_rp
    let mut field: Vec<f64> = (0..n)
        .map(|r| (0..n).map(|rp| inst.j[(r, rp)] * f64::from(sigma[rp])).sum())
        .collect();
    let mut energy = energy_unchecked(&inst.j, &sigma);
    let mut best = energy;
    let mut config = sigma.clone();
    let mut degeneracy = 1usize;
    let total = 1u64 << (n - 1);
    let mut prev_gray = 0u64;
    for i in 1..total {
        let gray = i ^ (i >> 1);
        let flip = (gray ^ prev_gray).trailing_zeros() as usize; // spins 0..n-2 map to indices 1..n-1
        prev_gray = gray;
        let k = flip + 1;
        // flipping spin k changes E by 2 sigma_k h_k
        energy += 2.0 * f64::from(sigma[k]) * field[k];
        let old = sigma[k];
        sigma[k] = -old;
        let delta = f64::from(sigma[k]) - f64::from(old);
        for r in 0..n {
            field[r] += inst.j[(r, k)] * delta;
        }
        if energy < best + BAND {
            let exact = energy_unchecked(&inst.j, &sigma);
            if exact < best - TOL {
                best = exact;
                config = sigma.clone();
                degeneracy = 1;
            } else if (exact - best).abs() <= TOL {
                degeneracy += 1;
                if exact < best {
                    best = exact;
                    config = sigma.clone();
                }
            }
        }
    }
    Ok(GroundState {
        energy: best,
        config,
        degeneracy,
    })
}

/// Ground-state energy: the planted value when recorded, otherwise exhaustive
/// search (n <= 24).
pub fn ground_energy(inst: &Instance) -> Result<f64, InstanceError> {
    if let Some(e) = inst.ground_energy {
        return Ok(e);
    }
    Ok(brute_force_ground(inst)?.energy)
}

impl Instance {
    /// Build directly from a coupling matrix; symmetrizes nothing, the caller
    /// must supply a symmetric zero-diagonal matrix.
    pub fn from_matrix(j: Array2<f64>) -> Self {
        let n = j.nrows();
        assert_eq!(n, j.ncols(), "coupling matrix must be square");
        Instance {
            n,
            j,
            planted: None,
            ground_energy: None,
            meta: InstanceMeta::Custom,
        }
    }

    /// Serialize to the plain-text format: a small header followed by the
    /// row-major couplings with 17 significant digits (enough for f64 values
    /// to round-trip exactly).
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("n {}\n", self.n));
        match self.meta {
            InstanceMeta::Discrete { seed } => {
                out.push_str("ensemble discrete\n");
                out.push_str(&format!("seed {seed}\n"));
            }
            InstanceMeta::Wishart { alpha, seed } => {
                out.push_str(&format!("ensemble wishart {alpha:.17e}\n"));
                out.push_str(&format!("seed {seed}\n"));
            }
            InstanceMeta::Custom => out.push_str("ensemble custom\n"),
        }
        if let Some(e) = self.ground_energy {
            out.push_str(&format!("ground_energy {e:.17e}\n"));
        }
        if let Some(p) = &self.planted {
            out.push_str("planted");
            for s in p {
                let _ = write!(out, " {s}");
            }
            out.push('\n');
        }
        for r in 0..self.n {
            let mut line = String::new();
            for c in 0..self.n {
                if c > 0 {
                    line.push(' ');
                }
                let _ = write!(line, "{:.17e}", self.j[(r, c)]);
            }
            out.push_str(&line);
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, InstanceError> {
        let mut n = None;
        let mut meta = InstanceMeta::Custom;
        let mut ground_energy = None;
        let mut planted = None;
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut seed: Option<u64> = None;
        let mut wishart_alpha: Option<f64> = None;
        let mut is_discrete = false;
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            let head = parts.next().unwrap();
            match head {
                "n" => {
                    n = Some(
                        parts
                            .next()
                            .ok_or_else(|| InstanceError::Parse("missing n value".into()))?
                            .parse::<usize>()
                            .map_err(|e| InstanceError::Parse(e.to_string()))?,
                    );
                }
                "ensemble" => match parts.next() {
                    Some("discrete") => is_discrete = true,
                    Some("wishart") => {
                        let a = parts
                            .next()
                            .ok_or_else(|| InstanceError::Parse("missing wishart alpha".into()))?
                            .parse::<f64>()
                            .map_err(|e| InstanceError::Parse(e.to_string()))?;
                        wishart_alpha = Some(a);
                    }
                    _ => {}
                },
                "seed" => {
                    seed = Some(
                        parts
                            .next()
                            .ok_or_else(|| InstanceError::Parse("missing seed value".into()))?
                            .parse::<u64>()
                            .map_err(|e| InstanceError::Parse(e.to_string()))?,
                    );
                }
                "ground_energy" => {
                    ground_energy = Some(
                        parts
                            .next()
                            .ok_or_else(|| InstanceError::Parse("missing energy value".into()))?
                            .parse::<f64>()
                            .map_err(|e| InstanceError::Parse(e.to_string()))?,
                    );
                }
                "planted" => {
                    let spins: Result<Vec<i8>, _> = parts.map(|p| p.parse::<i8>()).collect();
                    planted =
                        Some(spins.map_err(|e| InstanceError::Parse(e.to_string()))?);
                }
                _ => {
                    let row: Result<Vec<f64>, _> = line
                        .split_whitespace()
                        .map(|p| p.parse::<f64>())
                        .collect();
                    rows.push(row.map_err(|e| InstanceError::Parse(e.to_string()))?);
                }
            }
        }
        let n = n.ok_or_else(|| InstanceError::Parse("missing n header".into()))?;
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(InstanceError::Parse(format!(
                "expected {n} rows of {n} entries, got {} rows",
                rows.len()
            )));
        }
        let mut j = Array2::zeros((n, n));
        for (r, row) in rows.iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                j[(r, c)] = v;
            }
        }
        if is_discrete {
            meta = InstanceMeta::Discrete {
                seed: seed.unwrap_or(0),
            };
        } else if let Some(alpha) = wishart_alpha {
            meta = InstanceMeta::Wishart {
                alpha,
                seed: seed.unwrap_or(0),
            };
        }
        Ok(Instance {
            n,
            j,
            planted,
            ground_energy,
            meta,
        })
    }

    pub fn write_file<P: AsRef<Path>>(&self, path: P) -> Result<(), InstanceError> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read_file<P: AsRef<Path>>(path: P) -> Result<Self, InstanceError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_text(&text)
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use proptest::prelude::*;

    /// Six-site reference instance with known ground and first-excited levels.
    pub(crate) fn reference_six_site() -> Instance {
        Instance::from_matrix(array![
            [0.0, -0.5, 0.0, -0.6, 0.2, -0.1],
            [-0.5, 0.0, -0.4, 0.4, 0.2, -0.2],
            [0.0, -0.4, 0.0, 1.0, 0.8, -0.6],
            [-0.6, 0.4, 1.0, 0.0, -0.6, -0.4],
            [0.2, 0.2, 0.8, -0.6, 0.0, 0.5],
            [-0.1, -0.2, -0.6, -0.4, 0.5, 0.0]
        ])
    }

    #[test]
    fn two_site_ferromagnet() {
        let inst = Instance::from_matrix(array![[0.0, 1.0], [1.0, 0.0]]);
        assert_eq!(ising_energy(&inst, &[1, 1]).unwrap(), -1.0);
        let gs = brute_force_ground(&inst).unwrap();
        assert_eq!(gs.energy, -1.0);
        assert_eq!(gs.degeneracy, 1);
    }

    #[test]
    fn reference_instance_levels() {
        let inst = reference_six_site();
        let ground = [1i8, -1, -1, -1, 1, 1];
        let excited = [1i8, -1, -1, -1, -1, 1];
        assert_abs_diff_eq!(ising_energy(&inst, &ground).unwrap(), -3.5, epsilon = 1e-12);
        assert_abs_diff_eq!(
            ising_energy(&inst, &excited).unwrap(),
            -2.9,
            epsilon = 1e-12
        );
        let gs = brute_force_ground(&inst).unwrap();
        assert_abs_diff_eq!(gs.energy, -3.5, epsilon = 1e-12);
    }

    #[test]
    fn discrete_instance_structure() {
        let inst = gen_discrete_instance(6, 99).unwrap();
        assert_eq!(inst.n, 6);
        let mut independent = 0;
        for r in 0..6 {
            assert_eq!(inst.j[(r, r)], 0.0);
            for c in (r + 1)..6 {
                independent += 1;
                assert_eq!(inst.j[(r, c)], inst.j[(c, r)]);
                let scaled = inst.j[(r, c)] * 10.0;
                assert_abs_diff_eq!(scaled, scaled.round(), epsilon = 1e-12);
                assert!(inst.j[(r, c)].abs() <= 1.0);
            }
        }
        assert_eq!(independent, 15);
    }

    #[test]
    fn discrete_instance_deterministic() {
        let a = gen_discrete_instance(8, 7).unwrap();
        let b = gen_discrete_instance(8, 7).unwrap();
        assert_eq!(a.j, b.j);
        let c = gen_discrete_instance(8, 8).unwrap();
        assert_ne!(a.j, c.j);
    }

    #[test]
    fn rejects_small_sizes() {
        assert!(gen_discrete_instance(1, 0).is_err());
        assert!(gen_wishart_planted(1, 0.8, 0).is_err());
    }

    #[test]
    fn energy_checks_dimensions() {
        let inst = gen_discrete_instance(4, 0).unwrap();
        assert!(matches!(
            ising_energy(&inst, &[1, 1, 1]),
            Err(InstanceError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            ising_energy(&inst, &[1, 1, 0, 1]),
            Err(InstanceError::BadSpin)
        ));
    }

    #[test]
    fn wishart_planted_is_ground_state() {
        for seed in 0..20 {
            let inst = gen_wishart_planted(8, 0.8, seed).unwrap();
            let gs = brute_force_ground(&inst).unwrap();
            let planted_e = inst.ground_energy.unwrap();
            assert!(
                (planted_e - gs.energy).abs() <= 1e-9,
                "seed {seed}: planted {planted_e} vs brute force {}",
                gs.energy
            );
        }
    }

    #[test]
    fn wishart_flip_symmetry() {
        let inst = gen_wishart_planted(6, 0.8, 3).unwrap();
        let planted = inst.planted.clone().unwrap();
        let flipped: Vec<i8> = planted.iter().map(|s| -s).collect();
        assert_eq!(
            ising_energy(&inst, &planted).unwrap(),
            ising_energy(&inst, &flipped).unwrap()
        );
    }

    #[test]
    fn wishart_consumes_alpha_n_squared_gaussians() {
        // not observable directly; checked via the column count
        let inst = gen_wishart_planted(100, 0.8, 0).unwrap();
        match inst.meta {
            InstanceMeta::Wishart { alpha, .. } => assert_eq!((alpha * 100.0).round(), 80.0),
            _ => panic!("wrong meta"),
        }
        // 80 columns of 100 gaussians = 8000 = 0.8 * 100^2 draws
    }

    #[test]
    fn brute_force_size_guard() {
        let inst = gen_discrete_instance(25, 0).unwrap();
        assert!(matches!(
            brute_force_ground(&inst),
            Err(InstanceError::TooLargeForBruteForce { .. })
        ));
    }

    #[test]
    fn file_round_trip_is_exact() {
        let mut inst = gen_wishart_planted(7, 0.8, 11).unwrap();
        inst.ground_energy = Some(inst.ground_energy.unwrap());
        let text = inst.to_text();
        let back = Instance::from_text(&text).unwrap();
        assert_eq!(back.n, inst.n);
        assert_eq!(back.j, inst.j);
        assert_eq!(back.planted, inst.planted);
        assert_eq!(back.ground_energy, inst.ground_energy);
        assert_eq!(back.meta, inst.meta);
    }

    #[test]
    fn sgn_convention() {
        assert_eq!(spins_from_amplitudes(&[0.3, -0.2, 0.0]), vec![1, -1, 1]);
    }

    proptest! {
        #[test]
        fn flip_invariance(seed in 0u64..500, n in 2usize..9) {
            let inst = gen_discrete_instance(n, seed).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let sigma: Vec<i8> = (0..n).map(|_| if rand::RngCore::next_u64(&mut rng) % 2 == 0 { 1 } else { -1 }).collect();
            let flipped: Vec<i8> = sigma.iter().map(|s| -s).collect();
            let e1 = ising_energy(&inst, &sigma).unwrap();
            let e2 = ising_energy(&inst, &flipped).unwrap();
            prop_assert_eq!(e1, e2);
        }

        #[test]
        fn ground_is_lower_bound(seed in 0u64..100, n in 2usize..8) {
            let inst = gen_discrete_instance(n, seed).unwrap();
            let gs = brute_force_ground(&inst).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
            for _ in 0..16 {
                let sigma: Vec<i8> = (0..n).map(|_| if rand::RngCore::next_u64(&mut rng) % 2 == 0 { 1 } else { -1 }).collect();
                prop_assert!(ising_energy(&inst, &sigma).unwrap() >= gs.energy - 1e-9);
            }
        }
    }
}
