//! Sampled realizations of stochastic measures on a truncated dyadic domain.
//!
//! A realization stores one value per finest atom; the measure of any coarser
//! dyadic set is the exact sum of its atoms, so sigma-additivity holds at
//! machine precision by construction. Four driving noises are supported:
//! weighted white noise, a weighted fractional Brownian integrator, symmetric
//! alpha-stable noise, and a compensated Poisson (pure-jump martingale).

use crate::dyadic::DyadicDomain;
use crate::error::{Error, Result};
use crate::{fbm, stable};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Poisson, StandardNormal};
use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

/// Deterministic spatial weight applied to the driving noise. The Gaussian
/// choice decays like `exp(-y^2)`, fast enough for the heavy-tail
/// integrability check; the flat choice deliberately is not.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weight {
    Zero,
    One,
    Gauss,
}

impl Weight {
    pub fn eval(self, y: f64) -> f64 {
        match self {
            Weight::Zero => 0.0,
            Weight::One => 1.0,
            Weight::Gauss => (-y * y).exp(),
        }
    }

    fn tag(self) -> &'static str {
        match self {
            Weight::Zero => "zero",
            Weight::One => "one",
            Weight::Gauss => "gauss",
        }
    }

    fn from_tag(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(Weight::Zero),
            "one" => Ok(Weight::One),
            "gauss" => Ok(Weight::Gauss),
            _ => Err(Error::InvalidInput(format!("unknown weight tag '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SmKind {
    Wiener { weight: Weight },
    Fbm { hurst: f64, weight: Weight },
    AlphaStable { alpha: f64, weight: Weight },
    PureJump { intensity: f64 },
}

impl SmKind {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SmKind::Wiener { .. } => Ok(()),
            SmKind::Fbm { hurst, .. } => {
                if hurst > 0.5 && hurst < 1.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidInput(format!(
                        "Hurst index must lie in (1/2, 1), got {hurst}"
                    )))
                }
            }
            SmKind::AlphaStable { alpha, .. } => {
                if stable::validate_alpha(alpha) {
                    Ok(())
                } else {
                    Err(Error::InvalidInput(format!(
                        "stability index must lie in (1, 2), got {alpha}"
                    )))
                }
            }
            SmKind::PureJump { intensity } => {
                if intensity > 0.0 && intensity.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidInput(format!(
                        "jump intensity must be positive, got {intensity}"
                    )))
                }
            }
        }
    }

    pub fn weight(&self) -> Weight {
        match *self {
            SmKind::Wiener { weight } => weight,
            SmKind::Fbm { weight, .. } => weight,
            SmKind::AlphaStable { weight, .. } => weight,
            SmKind::PureJump { .. } => Weight::One,
        }
    }
}

/// One sampled stochastic measure: finest-atom values plus the generating
/// parameters. Aggregates at coarser levels are always computed, never stored.
#[derive(Debug, Clone)]
pub struct SmRealization {
    kind: SmKind,
    domain: DyadicDomain,
    seed: u64,
    /// Levels of aggregation applied after generation (0 for a fresh draw).
    coarsened_by: u32,
    atoms: Vec<f64>,
}

/// Draws a realization of the requested measure on `domain`. The same
/// `(kind, domain, seed)` triple reproduces atom values bit-exactly.
pub fn realize(kind: SmKind, domain: DyadicDomain, seed: u64) -> Result<SmRealization> {
    kind.validate()?;
    let n = domain.total_atoms();
    let len = domain.atom_len();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let atoms = match kind {
        SmKind::Wiener { weight } => (0..n)
            .map(|k| {
                let w = weight.eval(domain.left_endpoint(k));
                let z: f64 = rng.sample(StandardNormal);
                z * (w * len).sqrt()
            })
            .collect(),
        SmKind::Fbm { hurst, weight } => {
            let incr = fbm::sample_fgn(hurst, len, n, &mut rng);
            (0..n)
                .map(|k| weight.eval(domain.left_endpoint(k)) * incr[k])
                .collect()
        }
        SmKind::AlphaStable { alpha, weight } => (0..n)
            .map(|k| {
                let w = weight.eval(domain.left_endpoint(k));
                let scale = (w * len).powf(1.0 / alpha);
                scale * stable::sample_standard(alpha, &mut rng)
            })
            .collect(),
        SmKind::PureJump { intensity } => {
            let mean = intensity * len;
            let pois = Poisson::new(mean)
                .map_err(|e| Error::InvalidInput(format!("invalid Poisson intensity: {e:?}")))?;
            (0..n)
                .map(|_| {
                    let jumps: f64 = rng.sample(pois);
                    jumps - mean
                })
                .collect()
        }
    };
    Ok(SmRealization {
        kind,
        domain,
        seed,
        coarsened_by: 0,
        atoms,
    })
}

impl SmRealization {
    pub fn kind(&self) -> SmKind {
        self.kind
    }

    pub fn domain(&self) -> &DyadicDomain {
        &self.domain
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    /// Measure of the half-open interval `(left, right]`. Endpoints must sit
    /// on the finest dyadic grid inside the domain; an empty interval is 0.
    ///
    /// Aggregation follows the dyadic tree: the value of a level-n interval
    /// is computed as the sum of its two children, recursively down to the
    /// atoms. A parent therefore equals the sum of its children bit-exactly,
    /// not merely up to summation-order rounding.
    pub fn measure_of(&self, left: f64, right: f64) -> Result<f64> {
        if right < left {
            return Err(Error::InvalidInput(format!(
                "interval ({left}, {right}] has negative length"
            )));
        }
        let a = self.domain.grid_index(left)?;
        let b = self.domain.grid_index(right)?;
        Ok(aligned_dyadic_sum(
            &self.atoms,
            a,
            b,
            self.domain.atoms_per_unit(),
        ))
    }

    /// Measure of the unit interval `(j, j+1]`.
    pub fn unit_measure(&self, j: i32) -> Result<f64> {
        self.measure_of(j as f64, (j + 1) as f64)
    }

    /// Atom values restricted to the unit interval `(j, j+1]`.
    pub fn unit_atoms(&self, j: i32) -> Result<&[f64]> {
        if !self.domain.contains_unit(j) {
            return Err(Error::InvalidInput(format!(
                "unit interval ({j}, {}] outside domain",
                j + 1
            )));
        }
        let per = self.domain.atoms_per_unit();
        let off = (j - self.domain.j_min()) as usize * per;
        Ok(&self.atoms[off..off + per])
    }

    /// Left-endpoint integral of a deterministic function against the measure:
    /// `sum_k g(left endpoint of atom k) * mu(atom k)`. The products are
    /// folded in the same dyadic-tree order as `measure_of`, so an indicator
    /// of a dyadic set reproduces the measure of that set exactly.
    pub fn integrate<F: Fn(f64) -> f64>(&self, g: F) -> Result<f64> {
        let mut products = Vec::with_capacity(self.atoms.len());
        for (k, &m) in self.atoms.iter().enumerate() {
            let v = g(self.domain.left_endpoint(k));
            if !v.is_finite() {
                return Err(Error::NonFinite(format!(
                    "integrand at y={}",
                    self.domain.left_endpoint(k)
                )));
            }
            products.push(v * m);
        }
        Ok(aligned_dyadic_sum(
            &products,
            0,
            products.len(),
            self.domain.atoms_per_unit(),
        ))
    }

    /// Exact aggregation by `levels` halvings of the resolution; the result
    /// is the same sampled path seen on a coarser grid.
    pub fn coarsen(&self, levels: u32) -> Result<SmRealization> {
        if levels >= self.domain.depth() {
            return Err(Error::InvalidInput(format!(
                "cannot coarsen depth {} by {levels} levels",
                self.domain.depth()
            )));
        }
        let domain = DyadicDomain::new(
            self.domain.j_min(),
            self.domain.j_max(),
            self.domain.depth() - levels,
        )?;
        let stride = 1usize << levels;
        let atoms = self.atoms.chunks(stride).map(|c| c.iter().sum()).collect();
        Ok(SmRealization {
            kind: self.kind,
            domain,
            seed: self.seed,
            coarsened_by: self.coarsened_by + levels,
            atoms,
        })
    }

    /// FNV-1a over the atom bit patterns; used for coupling audits.
    pub fn checksum(&self) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        for a in &self.atoms {
            for b in a.to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
        }
        h
    }

    /// Writes the textual form: a header with the generating parameters, then
    /// one atom value per line at 17 significant digits (round-trips exactly).
    pub fn save_text(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        let mut w = BufWriter::new(f);
        let (tag, p1, p2) = match self.kind {
            SmKind::Wiener { weight } => ("wiener", weight.tag().to_string(), String::new()),
            SmKind::Fbm { hurst, weight } => {
                ("fbm", format!("{hurst:.16e}"), weight.tag().to_string())
            }
            SmKind::AlphaStable { alpha, weight } => (
                "alpha_stable",
                format!("{alpha:.16e}"),
                weight.tag().to_string(),
            ),
            SmKind::PureJump { intensity } => {
                ("pure_jump", format!("{intensity:.16e}"), String::new())
            }
        };
        writeln!(w, "smrealization v1")?;
        writeln!(w, "kind {tag} {p1} {p2}")?;
        writeln!(
            w,
            "domain {} {} {}",
            self.domain.j_min(),
            self.domain.j_max(),
            self.domain.depth()
        )?;
        writeln!(w, "seed {}", self.seed)?;
        writeln!(w, "coarsened_by {}", self.coarsened_by)?;
        writeln!(w, "atoms {}", self.atoms.len())?;
        for a in &self.atoms {
            writeln!(w, "{a:.16e}")?;
        }
        Ok(())
    }

    pub fn load_text(path: &Path) -> Result<SmRealization> {
        let f = std::fs::File::open(path)?;
        let mut lines = std::io::BufReader::new(f).lines();
        let mut next = || -> Result<String> {
            lines
                .next()
                .ok_or_else(|| Error::InvalidInput("truncated realization file".into()))?
                .map_err(Error::Io)
        };
        let magic = next()?;
        if magic.trim() != "smrealization v1" {
            return Err(Error::InvalidInput(format!("bad header '{magic}'")));
        }
        let kind_line = next()?;
        let kp: Vec<&str> = kind_line.split_whitespace().collect();
        let parse_f = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| Error::InvalidInput(format!("bad float '{s}'")))
        };
        let kind = match kp.get(1).copied() {
            Some("wiener") => SmKind::Wiener {
                weight: Weight::from_tag(kp.get(2).copied().unwrap_or(""))?,
            },
            Some("fbm") => SmKind::Fbm {
                hurst: parse_f(kp.get(2).copied().unwrap_or(""))?,
                weight: Weight::from_tag(kp.get(3).copied().unwrap_or(""))?,
            },
            Some("alpha_stable") => SmKind::AlphaStable {
                alpha: parse_f(kp.get(2).copied().unwrap_or(""))?,
                weight: Weight::from_tag(kp.get(3).copied().unwrap_or(""))?,
            },
            Some("pure_jump") => SmKind::PureJump {
                intensity: parse_f(kp.get(2).copied().unwrap_or(""))?,
            },
            other => {
                return Err(Error::InvalidInput(format!("unknown kind {other:?}")));
            }
        };
        let dom_line = next()?;
        let dp: Vec<&str> = dom_line.split_whitespace().collect();
        if dp.len() != 4 || dp[0] != "domain" {
            return Err(Error::InvalidInput(format!("bad domain line '{dom_line}'")));
        }
        let parse_i = |s: &str| -> Result<i64> {
            s.parse()
                .map_err(|_| Error::InvalidInput(format!("bad integer '{s}'")))
        };
        let domain = DyadicDomain::new(
            parse_i(dp[1])? as i32,
            parse_i(dp[2])? as i32,
            parse_i(dp[3])? as u32,
        )?;
        let seed = parse_i(next()?.split_whitespace().nth(1).unwrap_or(""))? as u64;
        let coarsened_by = parse_i(next()?.split_whitespace().nth(1).unwrap_or(""))? as u32;
        let count = parse_i(next()?.split_whitespace().nth(1).unwrap_or(""))? as usize;
        if count != domain.total_atoms() {
            return Err(Error::InvalidInput(format!(
                "atom count {count} does not match domain ({})",
                domain.total_atoms()
            )));
        }
        let mut atoms = Vec::with_capacity(count);
        for _ in 0..count {
            atoms.push(parse_f(next()?.trim())?);
        }
        Ok(SmRealization {
            kind,
            domain,
            seed,
            coarsened_by,
            atoms,
        })
    }
}

/// The identically-zero measure on `domain`; the deterministic comparison
/// baseline for solver tests.
pub fn zero_measure(domain: DyadicDomain) -> SmRealization {
    SmRealization {
        kind: SmKind::Wiener {
            weight: Weight::One,
        },
        domain,
        seed: 0,
        coarsened_by: 0,
        atoms: vec![0.0; domain.total_atoms()],
    }
}

/// Pairwise sum of a power-of-two block whose start index is aligned to its
/// own length; splitting in half reproduces the two dyadic children exactly.
fn block_tree_sum(atoms: &[f64], start: usize, len: usize) -> f64 {
    if len == 1 {
        atoms[start]
    } else {
        let half = len / 2;
        block_tree_sum(atoms, start, half) + block_tree_sum(atoms, start + half, half)
    }
}

/// Sums `atoms[a..b]` as a left fold over maximal aligned dyadic blocks,
/// each block evaluated by the pairwise tree. Blocks are capped at one unit
/// interval so unit measures match the per-unit trees.
fn aligned_dyadic_sum(atoms: &[f64], a: usize, b: usize, per_unit: usize) -> f64 {
    let mut acc = 0.0;
    let mut i = a;
    while i < b {
        let mut len = per_unit;
        while len > 1 && (i % len != 0 || i + len > b) {
            len /= 2;
        }
        acc += block_tree_sum(atoms, i, len);
        i += len;
    }
    acc
}

/// An indexed family of integrands together with a human-readable tag.
pub struct IntegrandFamily {
    funcs: Vec<Box<dyn Fn(f64) -> f64 + Sync + Send>>,
    pub tag: String,
}

impl IntegrandFamily {
    pub fn new(funcs: Vec<Box<dyn Fn(f64) -> f64 + Sync + Send>>, tag: &str) -> Self {
        Self {
            funcs,
            tag: tag.to_string(),
        }
    }

    pub fn len(&self) -> usize {
        self.funcs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.funcs.is_empty()
    }

    /// The family `(|j|+1)^{rho/2} * 1_{(j, j+1]}`, one member per unit
    /// interval of `domain`, enumerated by increasing |j|.
    pub fn weighted_unit_indicators(rho: f64, domain: &DyadicDomain) -> Self {
        let mut js: Vec<i32> = (domain.j_min()..domain.j_max()).collect();
        js.sort_by_key(|j| (j.unsigned_abs().max((j + 1).unsigned_abs()), *j));
        let funcs = js
            .into_iter()
            .map(|j| {
                let w = ((j.abs() as f64) + 1.0).powf(rho / 2.0);
                let f: Box<dyn Fn(f64) -> f64 + Sync + Send> = Box::new(move |y: f64| {
                    if y >= j as f64 && y < (j + 1) as f64 {
                        w
                    } else {
                        0.0
                    }
                });
                f
            })
            .collect();
        Self::new(funcs, &format!("weighted_unit_indicators rho={rho}"))
    }

    /// Checks the envelope `sum_l |phi_l|` is finite at every finest endpoint.
    pub fn envelope_finite(&self, domain: &DyadicDomain) -> bool {
        (0..domain.total_atoms()).all(|k| {
            let y = domain.left_endpoint(k);
            let s: f64 = self.funcs.iter().map(|f| f(y).abs()).sum();
            s.is_finite()
        })
    }
}

/// Partial sums `s_L = sum_{l<=L} (int phi_l dmu)^2` for `L = 1..=limit`.
/// Integrands are evaluated by left-endpoint sums on the finest grid.
pub fn squared_integral_series(
    sm: &SmRealization,
    family: &IntegrandFamily,
    limit: usize,
) -> Result<Vec<f64>> {
    let limit = limit.min(family.len());
    let mut out = Vec::with_capacity(limit);
    let mut acc = 0.0;
    for f in family.funcs.iter().take(limit) {
        let v = sm.integrate(f)?;
        acc += v * v;
        out.push(acc);
    }
    Ok(out)
}

/// Report of the heavy-tail integrability probe: partial integrals of
/// `|y|^tau` over nested radii and whether they have stabilized.
#[derive(Debug, Clone)]
pub struct TauReport {
    pub tau: f64,
    pub partials: Vec<(u32, f64)>,
    pub stabilized: bool,
}

/// `I_R = int_{[-R,R]} |y|^tau dmu` on an existing realization over nested
/// radii; stabilized when the last increment is below `rel_tol` relative to
/// the final value. Certifies the truncation radius used elsewhere.
pub fn tau_integrability_report(
    sm: &SmRealization,
    tau: f64,
    radii: &[u32],
    rel_tol: f64,
) -> Result<TauReport> {
    if tau <= 2.5 {
        return Err(Error::InvalidInput(format!(
            "tail exponent must exceed 5/2, got {tau}"
        )));
    }
    if radii.len() < 2 || radii.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput(
            "radii must be strictly increasing".into(),
        ));
    }
    let r_max = *radii.last().unwrap() as i32;
    if sm.domain().j_min() > -r_max || sm.domain().j_max() < r_max {
        return Err(Error::InvalidInput(format!(
            "radius {r_max} exceeds the realized domain [{}, {}]",
            sm.domain().j_min(),
            sm.domain().j_max()
        )));
    }
    let mut partials = Vec::with_capacity(radii.len());
    for &r in radii {
        let r = r as f64;
        let v = sm.integrate(|y| if y.abs() <= r { y.abs().powf(tau) } else { 0.0 })?;
        partials.push((r as u32, v));
    }
    let last = partials[partials.len() - 1].1;
    let prev = partials[partials.len() - 2].1;
    let scale = last.abs().max(1e-12);
    let stabilized = (last - prev).abs() / scale < rel_tol;
    Ok(TauReport {
        tau,
        partials,
        stabilized,
    })
}

/// Draws one realization of `kind` covering the largest radius and runs the
/// integrability probe on it.
pub fn check_tau_integrability(
    kind: SmKind,
    tau: f64,
    radii: &[u32],
    depth: u32,
    seed: u64,
    rel_tol: f64,
) -> Result<TauReport> {
    if radii.is_empty() {
        return Err(Error::InvalidInput("need at least two radii".into()));
    }
    let r_max = *radii.last().unwrap() as i32;
    let domain = DyadicDomain::new(-r_max, r_max, depth)?;
    let sm = realize(kind, domain, seed)?;
    tau_integrability_report(&sm, tau, radii, rel_tol)
}
