//! Mild-form solver for the forced heat equation and its time-averaged
//! counterpart on a shared noise realization.
//!
//! The noise term is the iterated integral: for each grid node `z = (t, x)`
//! the inner kernel-time integral is evaluated at every dyadic left endpoint
//! `y_k` and then summed against the atom values. Two structural facts keep
//! this affordable without changing its value:
//!
//! * the inner integral depends on `y` only through the displacement
//!   `d = x - y` (one table per time row over the displacement lattice), and
//! * after the singularity-removing substitution `u = sqrt(t - s)` each
//!   harmonic of the fast modulation splits into `cos(f t / eps)` and
//!   `sin(f t / eps)` factors times prefix integrals over `u` whose
//!   integrands do not depend on `t`, so one sweep over `u` yields every
//!   time row at once.
//!
//! The averaged contribution is accumulated on its own base-resolution
//! quadrature shared by both solve modes; the fast modes live entirely in the
//! difference tables. The averaged and the fast-forced noise fields therefore
//! differ exactly by the assembled difference field.

use crate::coeffs::{CoefficientSet, SigmaSpec};
use crate::conv::{self, Plans};
use crate::dyadic::DyadicDomain;
use crate::error::{Error, Result};
use crate::grid::{FieldKind, FieldTrajectory, SolveMode, SpaceTimeGrid, TrajectoryMeta};
use crate::kernel;
use crate::par::{self, ExecMode};
use crate::sm::SmRealization;
use rustfft::num_complex::Complex64;
use std::f64::consts::PI;

/// Uniform intervals of the base (non-oscillatory) quadrature in `u`.
const BASE_U_STEPS: usize = 512;
/// Oscillatory quadrature resolves the substituted fast period with this
/// many steps; at 32 the worst-position trapezoid phase distortion stays
/// near one percent.
const OSC_STEPS_PER_PERIOD: f64 = 32.0;
const MAX_U_NODES: usize = 1 << 23;

#[derive(Debug, Clone, Copy)]
pub struct SolveSettings {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolveSettings {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 50,
        }
    }
}

/// u-grid shared by all displacement columns: uniform nodes unioned with the
/// exact snapshot positions sqrt(t_i), so every prefix integral is a
/// composite trapezoid ending exactly at a grid row time.
struct UGrid {
    nodes: Vec<f64>,
    /// node index of sqrt(t_i) for each row i
    snap_node: Vec<usize>,
}

fn build_u_grid(u_max: f64, n_uniform: usize, snaps: &[f64]) -> UGrid {
    let tol = 1e-14 * u_max.max(1.0);
    let mut nodes: Vec<f64> = (0..=n_uniform)
        .map(|q| u_max * q as f64 / n_uniform as f64)
        .collect();
    nodes.extend_from_slice(snaps);
    nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut dedup: Vec<f64> = Vec::with_capacity(nodes.len());
    for v in nodes {
        if let Some(&last) = dedup.last() {
            if (v - last).abs() <= tol {
                continue;
            }
        }
        dedup.push(v);
    }
    let snap_node = snaps
        .iter()
        .map(|s| {
            let i = dedup.partition_point(|v| *v < s - tol);
            debug_assert!((dedup[i] - s).abs() <= tol);
            i
        })
        .collect();
    UGrid {
        nodes: dedup,
        snap_node,
    }
}

/// One trigonometric component of the prefix pass: per-node factor arrays and
/// per-row assembly weights.
struct PassComponent {
    cos_nodes: Vec<f64>,
    sin_nodes: Vec<f64>,
    /// weight of the cosine prefix per time row
    a: Vec<f64>,
    /// weight of the sine prefix per time row
    b: Vec<f64>,
}

/// Sweeps the u-grid once per displacement column, accumulating trapezoid
/// prefix integrals of `exp(-d^2/(4u^2)) * {cos, sin}` and assembling
/// `sum_c a_c C + b_c S` (scaled by 1/sqrt(pi)) at each snapshot. Returns
/// rows in time-major layout: `out[i * n_d + m]`.
fn prefix_pass(
    exec: ExecMode,
    d_vals: &[f64],
    ugrid: &UGrid,
    comps: &[PassComponent],
    n_rows: usize,
) -> Vec<f64> {
    let n_d = d_vals.len();
    let nodes = &ugrid.nodes;
    let inv_sqrt_pi = 1.0 / PI.sqrt();
    // reverse map: node index -> rows snapshotted there
    let mut rows_at_node: Vec<Vec<usize>> = vec![Vec::new(); nodes.len()];
    for (i, &q) in ugrid.snap_node.iter().enumerate() {
        rows_at_node[q].push(i);
    }

    let mut out = vec![0.0f64; n_rows * n_d];
    let chunk = 64.min(n_d).max(1);
    // the pass scatters into per-column cells of every row; compute into a
    // column-major scratch per chunk, then write through
    let col_major: Vec<f64> = {
        let mut buf = vec![0.0f64; n_d * n_rows];
        par::for_each_chunk_mut(exec, &mut buf, chunk * n_rows, |ci, cells| {
            let d_lo = ci * chunk;
            let mut acc_c = vec![0.0f64; comps.len()];
            let mut acc_s = vec![0.0f64; comps.len()];
            let mut prev_c = vec![0.0f64; comps.len()];
            let mut prev_s = vec![0.0f64; comps.len()];
            for (local, cell_col) in cells.chunks_mut(n_rows).enumerate() {
                let d = d_vals[d_lo + local];
                let d2 = d * d;
                for v in acc_c.iter_mut().chain(acc_s.iter_mut()) {
                    *v = 0.0;
                }
                // u = 0 endpoint: the Gaussian factor vanishes for d != 0
                let e0 = if d == 0.0 { 1.0 } else { 0.0 };
                for (c, comp) in comps.iter().enumerate() {
                    prev_c[c] = e0 * comp.cos_nodes[0];
                    prev_s[c] = e0 * comp.sin_nodes[0];
                }
                for i in &rows_at_node[0] {
                    cell_col[*i] = 0.0;
                }
                for q in 1..nodes.len() {
                    let u = nodes[q];
                    let du = u - nodes[q - 1];
                    let e = (-d2 / (4.0 * u * u)).exp();
                    for (c, comp) in comps.iter().enumerate() {
                        let fc = e * comp.cos_nodes[q];
                        let fs = e * comp.sin_nodes[q];
                        acc_c[c] += 0.5 * (prev_c[c] + fc) * du;
                        acc_s[c] += 0.5 * (prev_s[c] + fs) * du;
                        prev_c[c] = fc;
                        prev_s[c] = fs;
                    }
                    for &i in &rows_at_node[q] {
                        let mut v = 0.0;
                        for (c, comp) in comps.iter().enumerate() {
                            v += comp.a[i] * acc_c[c] + comp.b[i] * acc_s[c];
                        }
                        cell_col[i] = v * inv_sqrt_pi;
                    }
                }
            }
        });
        buf
    };
    for m in 0..n_d {
        for i in 0..n_rows {
            out[i * n_d + m] = col_major[m * n_rows + i];
        }
    }
    out
}

/// Per-epsilon difference tables: the assembled kernel-time integrals of
/// `sigma(s/eps, .) - averaged(.)` on the displacement lattice, with their
/// transforms ready for atom correlation.
pub struct OscTables {
    pub eps: f64,
    rows: Vec<Vec<f64>>,
    rows_hat: Vec<Vec<Complex64>>,
}

impl OscTables {
    /// Raw table rows (one per time row, indexed by displacement).
    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }
}

/// Precomputed noise geometry for one (grid, domain, sigma) triple. Immutable
/// and shared by every realization and epsilon of a study.
pub struct NoiseEngine {
    grid: SpaceTimeGrid,
    domain: DyadicDomain,
    sigma: SigmaSpec,
    exec: ExecMode,
    plans: Plans,
    d_vals: Vec<f64>,
    i0_hat: Vec<Vec<Complex64>>,
}

impl NoiseEngine {
    pub fn new(
        grid: SpaceTimeGrid,
        domain: DyadicDomain,
        sigma: SigmaSpec,
        exec: ExecMode,
    ) -> Result<Self> {
        grid.check_alignment(&domain)?;
        let n_atoms = domain.total_atoms();
        let n_d = grid.nx() + n_atoms;
        let base = -grid.radius() - domain.j_min() as f64;
        let dx = grid.dx();
        let d_vals: Vec<f64> = (0..n_d)
            .map(|m| base + (m as f64 - (n_atoms - 1) as f64) * dx)
            .collect();

        let u_max = grid.horizon().sqrt();
        let snaps: Vec<f64> = (0..=grid.nt()).map(|i| grid.t(i).sqrt()).collect();
        let ugrid = build_u_grid(u_max, BASE_U_STEPS, &snaps);
        let ones = vec![1.0; ugrid.nodes.len()];
        let zeros = vec![0.0; ugrid.nodes.len()];
        let comp = PassComponent {
            cos_nodes: ones,
            sin_nodes: zeros,
            a: vec![1.0; grid.nt() + 1],
            b: vec![0.0; grid.nt() + 1],
        };
        let flat = prefix_pass(exec, &d_vals, &ugrid, &[comp], grid.nt() + 1);
        let rows: Vec<Vec<f64>> = (0..=grid.nt())
            .map(|i| flat[i * n_d..(i + 1) * n_d].to_vec())
            .collect();

        let corr_len = conv::next_pow2(n_d + n_atoms - 1);
        let plans = Plans::new(corr_len);
        let hats = par::map_range(exec, rows.len(), |i| plans.forward_real(&rows[i]));

        Ok(Self {
            grid,
            domain,
            sigma,
            exec,
            plans,
            d_vals,
            i0_hat: hats,
        })
    }

    pub fn grid(&self) -> &SpaceTimeGrid {
        &self.grid
    }

    pub fn domain(&self) -> &DyadicDomain {
        &self.domain
    }

    fn osc_node_count(&self, eps: f64) -> Result<usize> {
        let f_max = self.sigma.max_freq();
        if f_max == 0.0 {
            return Ok(BASE_U_STEPS);
        }
        let u_max = self.grid.horizon().sqrt();
        let du = eps * (2.0 * PI / f_max) / OSC_STEPS_PER_PERIOD;
        let n = ((u_max / du).ceil() as usize).max(BASE_U_STEPS);
        if n > MAX_U_NODES {
            return Err(Error::InvalidInput(format!(
                "epsilon {eps} needs {n} quadrature nodes, over the {MAX_U_NODES} budget"
            )));
        }
        Ok(n)
    }

    /// Builds the difference tables for one fast scale.
    pub fn osc_tables(&self, eps: f64) -> Result<OscTables> {
        if !(eps > 0.0) {
            return Err(Error::InvalidInput(format!(
                "scale parameter must be positive, got {eps}"
            )));
        }
        let harmonics = self.sigma.harmonics();
        let n_rows = self.grid.nt() + 1;
        let n_d = self.d_vals.len();
        if harmonics.is_empty() {
            // time-constant modulation: the difference field vanishes
            let rows: Vec<Vec<f64>> = (0..n_rows).map(|_| vec![0.0; n_d]).collect();
            let rows_hat = rows.iter().map(|r| self.plans.forward_real(r)).collect();
            return Ok(OscTables {
                eps,
                rows,
                rows_hat,
            });
        }
        let n_uniform = self.osc_node_count(eps)?;
        let u_max = self.grid.horizon().sqrt();
        let snaps: Vec<f64> = (0..=self.grid.nt())
            .map(|i| self.grid.t(i).sqrt())
            .collect();
        let ugrid = build_u_grid(u_max, n_uniform, &snaps);

        let comps: Vec<PassComponent> = harmonics
            .iter()
            .map(|h| {
                let cos_nodes: Vec<f64> = ugrid
                    .nodes
                    .iter()
                    .map(|u| (h.freq * u * u / eps).cos())
                    .collect();
                let sin_nodes: Vec<f64> = ugrid
                    .nodes
                    .iter()
                    .map(|u| (h.freq * u * u / eps).sin())
                    .collect();
                let mut a = Vec::with_capacity(n_rows);
                let mut b = Vec::with_capacity(n_rows);
                for i in 0..n_rows {
                    let phase = h.freq * self.grid.t(i) / eps;
                    a.push(h.cos_amp * phase.cos() + h.sin_amp * phase.sin());
                    b.push(h.cos_amp * phase.sin() - h.sin_amp * phase.cos());
                }
                PassComponent {
                    cos_nodes,
                    sin_nodes,
                    a,
                    b,
                }
            })
            .collect();

        let flat = prefix_pass(self.exec, &self.d_vals, &ugrid, &comps, n_rows);
        let rows: Vec<Vec<f64>> = (0..n_rows)
            .map(|i| flat[i * n_d..(i + 1) * n_d].to_vec())
            .collect();
        let rows_hat = par::map_range(self.exec, rows.len(), |i| self.plans.forward_real(&rows[i]));
        Ok(OscTables {
            eps,
            rows,
            rows_hat,
        })
    }

    fn weighted_atoms(&self, sm: &SmRealization) -> Result<Vec<f64>> {
        if sm.domain() != &self.domain {
            return Err(Error::Misaligned(
                "realization domain differs from engine domain".into(),
            ));
        }
        Ok(sm
            .atoms()
            .iter()
            .enumerate()
            .map(|(k, &mu)| self.sigma.profile(self.domain.left_endpoint(k)) * mu)
            .collect())
    }

    fn correlate_rows(&self, rows_hat: &[Vec<Complex64>], catoms: &[f64], scale: f64) -> Vec<f64> {
        let n_atoms = catoms.len();
        let nx1 = self.grid.nx() + 1;
        let c_hat = self.plans.forward_real(catoms);
        let mut out = vec![0.0; rows_hat.len() * nx1];
        for (i, row_hat) in rows_hat.iter().enumerate() {
            let mut prod = vec![Complex64::new(0.0, 0.0); self.plans.len()];
            conv::multiply_accumulate(&mut prod, row_hat, &c_hat, scale);
            let real = self.plans.inverse_real(prod);
            out[i * nx1..(i + 1) * nx1].copy_from_slice(&real[n_atoms - 1..n_atoms - 1 + nx1]);
        }
        out
    }

    fn meta(&self, sm: &SmRealization, kind: FieldKind, mode: SolveMode) -> TrajectoryMeta {
        TrajectoryMeta {
            kind,
            mode,
            seed: sm.seed(),
            iterations: 0,
            residual: 0.0,
            residual_history: Vec::new(),
        }
    }

    /// Noise term of the averaged equation: `averaged(y)` against the kernel
    /// time integral, correlated with the atoms.
    pub fn averaged_field(&self, sm: &SmRealization) -> Result<FieldTrajectory> {
        let catoms = self.weighted_atoms(sm)?;
        let mean = self.sigma.mean_level();
        let values = if mean == 0.0 {
            vec![0.0; (self.grid.nt() + 1) * (self.grid.nx() + 1)]
        } else {
            self.correlate_rows(&self.i0_hat, &catoms, mean)
        };
        FieldTrajectory::new(
            self.grid,
            values,
            self.meta(sm, FieldKind::NoiseTerm, SolveMode::Averaged),
        )
    }

    /// The noise-difference field: fast-forced minus averaged noise term,
    /// built in a single pass from the centered integrand.
    pub fn difference_field(&self, sm: &SmRealization, osc: &OscTables) -> Result<FieldTrajectory> {
        let catoms = self.weighted_atoms(sm)?;
        let values = self.correlate_rows(&osc.rows_hat, &catoms, 1.0);
        FieldTrajectory::new(
            self.grid,
            values,
            self.meta(sm, FieldKind::NoiseDifference, SolveMode::Epsilon(osc.eps)),
        )
    }

    /// Noise term of the fast-forced equation at the tables' scale:
    /// exactly `averaged_field + difference_field`.
    pub fn forced_field(&self, sm: &SmRealization, osc: &OscTables) -> Result<FieldTrajectory> {
        let avg = self.averaged_field(sm)?;
        let diff = self.difference_field(sm, osc)?;
        let values = avg
            .values()
            .iter()
            .zip(diff.values())
            .map(|(a, b)| a + b)
            .collect();
        FieldTrajectory::new(
            self.grid,
            values,
            self.meta(sm, FieldKind::NoiseTerm, SolveMode::Epsilon(osc.eps)),
        )
    }
}

/// Kernel rows over time lags with shared padding, transformed once and
/// applied to many fields in the frequency domain.
struct HeatConvOp {
    grid: SpaceTimeGrid,
    pad: usize,
    plans: Plans,
    khat: Vec<Option<Vec<Complex64>>>,
}

impl HeatConvOp {
    fn new(grid: SpaceTimeGrid) -> Self {
        let dx = grid.dx();
        let pad = (kernel::truncation_halfwidth(grid.horizon()) / dx).ceil() as usize + 2;
        let len = conv::next_pow2(grid.nx() + 1 + 4 * pad);
        let plans = Plans::new(len);
        let mut khat: Vec<Option<Vec<Complex64>>> = Vec::with_capacity(grid.nt() + 1);
        khat.push(None); // lag zero is the identity, applied pointwise
        for k in 1..=grid.nt() {
            let tau = grid.t(k);
            let half = ((kernel::truncation_halfwidth(tau) / dx).ceil() as usize + 2).min(pad);
            let mut row = vec![0.0; 2 * pad + 1];
            for i in (pad - half)..=(pad + half) {
                let d = (i as f64 - pad as f64) * dx;
                let w = if i == pad - half || i == pad + half {
                    0.5
                } else {
                    1.0
                };
                row[i] = w * kernel::heat_kernel_unchecked(tau, d) * dx;
            }
            khat.push(Some(plans.forward_real(&row)));
        }
        Self {
            grid,
            pad,
            plans,
            khat,
        }
    }

    /// Edge-extended padding matching the direct convolution semantics.
    fn field_hat(&self, row: &[f64]) -> Vec<Complex64> {
        let nx1 = self.grid.nx() + 1;
        debug_assert_eq!(row.len(), nx1);
        let mut padded = Vec::with_capacity(nx1 + 2 * self.pad);
        padded.resize(self.pad, row[0]);
        padded.extend_from_slice(row);
        padded.resize(nx1 + 2 * self.pad, row[nx1 - 1]);
        self.plans.forward_real(&padded)
    }

    fn read_row(&self, conv_real: &[f64]) -> Vec<f64> {
        let nx1 = self.grid.nx() + 1;
        conv_real[2 * self.pad..2 * self.pad + nx1].to_vec()
    }

    /// Single convolution at lag `k` (used for the initial-data term).
    fn apply(&self, field_hat: &[Complex64], k: usize) -> Vec<f64> {
        let kh = self.khat[k].as_ref().expect("lag must be positive");
        let mut prod = vec![Complex64::new(0.0, 0.0); self.plans.len()];
        conv::multiply_accumulate(&mut prod, field_hat, kh, 1.0);
        self.read_row(&self.plans.inverse_real(prod))
    }
}

/// Shared solver state for one study configuration: the noise engine plus the
/// heat-semigroup tables.
pub struct Solver {
    engine: NoiseEngine,
    heat: HeatConvOp,
    coeffs: CoefficientSet,
    settings: SolveSettings,
}

impl Solver {
    pub fn new(
        grid: SpaceTimeGrid,
        domain: DyadicDomain,
        coeffs: CoefficientSet,
        settings: SolveSettings,
        exec: ExecMode,
    ) -> Result<Self> {
        if settings.tol <= 0.0 || settings.max_iter == 0 {
            return Err(Error::InvalidInput("bad solver settings".into()));
        }
        let engine = NoiseEngine::new(grid, domain, coeffs.sigma, exec)?;
        let heat = HeatConvOp::new(grid);
        Ok(Self {
            engine,
            heat,
            coeffs,
            settings,
        })
    }

    pub fn engine(&self) -> &NoiseEngine {
        &self.engine
    }

    pub fn prepare(&self, eps: f64) -> Result<OscTables> {
        self.engine.osc_tables(eps)
    }

    /// Fixed-point iteration on the mild form. The noise field is computed
    /// once and reused across iterations; iteration stops when the sup-norm
    /// increment drops below the tolerance.
    pub fn solve(
        &self,
        sm: &SmRealization,
        mode: SolveMode,
        osc: Option<&OscTables>,
    ) -> Result<FieldTrajectory> {
        let grid = self.engine.grid;
        let nx1 = grid.nx() + 1;
        let nt = grid.nt();

        let noise = match mode {
            SolveMode::Averaged => self.engine.averaged_field(sm)?,
            SolveMode::Epsilon(eps) => {
                let tables = osc.ok_or_else(|| {
                    Error::InvalidInput("fast-forced solve needs difference tables".into())
                })?;
                if tables.eps != eps {
                    return Err(Error::InvalidInput(format!(
                        "tables built for eps={}, solve asked for {eps}",
                        tables.eps
                    )));
                }
                self.engine.forced_field(sm, tables)?
            }
        };

        let u0: Vec<f64> = (0..nx1)
            .map(|j| self.coeffs.initial.eval(grid.x(j)))
            .collect();
        let u0_hat = self.heat.field_hat(&u0);
        let mut base = vec![0.0f64; (nt + 1) * nx1];
        base[0..nx1].copy_from_slice(&u0);
        for i in 1..=nt {
            let det = self.heat.apply(&u0_hat, i);
            for j in 0..nx1 {
                base[i * nx1 + j] = det[j] + noise.at(i, j);
            }
        }

        let drift = self.coeffs.drift;
        let dt = grid.dt();
        let mut cur = base.clone();
        let mut iterations = 0usize;
        let mut residual = f64::INFINITY;
        let mut history = Vec::new();
        for iter in 1..=self.settings.max_iter {
            let f_rows: Vec<Vec<f64>> = (0..=nt)
                .map(|i| {
                    (0..nx1)
                        .map(|j| drift.eval(grid.x(j), cur[i * nx1 + j]))
                        .collect()
                })
                .collect();
            let f_hat: Vec<Vec<Complex64>> =
                (0..nt).map(|i| self.heat.field_hat(&f_rows[i])).collect();

            let mut next = base.clone();
            for i in 1..=nt {
                let mut acc = vec![Complex64::new(0.0, 0.0); self.heat.plans.len()];
                let kh_i = self.heat.khat[i].as_ref().unwrap();
                conv::multiply_accumulate(&mut acc, &f_hat[0], kh_i, 0.5);
                for j in 1..i {
                    let kh = self.heat.khat[i - j].as_ref().unwrap();
                    conv::multiply_accumulate(&mut acc, &f_hat[j], kh, 1.0);
                }
                let duh = self.heat.read_row(&self.heat.plans.inverse_real(acc));
                for j in 0..nx1 {
                    next[i * nx1 + j] += dt * (duh[j] + 0.5 * f_rows[i][j]);
                }
            }

            residual = cur
                .iter()
                .zip(&next)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            if !residual.is_finite() {
                return Err(Error::NonFinite(format!(
                    "solve diverged at iteration {iter}"
                )));
            }
            history.push(residual);
            cur = next;
            iterations = iter;
            if residual < self.settings.tol {
                let meta = TrajectoryMeta {
                    kind: FieldKind::Solution,
                    mode,
                    seed: sm.seed(),
                    iterations,
                    residual,
                    residual_history: history,
                };
                return FieldTrajectory::new(grid, cur, meta);
            }
        }
        Err(Error::PicardDiverged {
            residual,
            iterations,
        })
    }
}

/// Noise term of the mild equation for one realization; `mode` selects the
/// fast-forced or the averaged coefficient.
pub fn noise_term(
    sm: &SmRealization,
    sigma: &SigmaSpec,
    mode: SolveMode,
    grid: SpaceTimeGrid,
    exec: ExecMode,
) -> Result<FieldTrajectory> {
    let engine = NoiseEngine::new(grid, *sm.domain(), *sigma, exec)?;
    match mode {
        SolveMode::Averaged => engine.averaged_field(sm),
        SolveMode::Epsilon(eps) => {
            let tables = engine.osc_tables(eps)?;
            engine.forced_field(sm, &tables)
        }
    }
}

/// The coupled noise difference (fast-forced minus averaged noise term).
pub fn noise_difference(
    sm: &SmRealization,
    sigma: &SigmaSpec,
    eps: f64,
    grid: SpaceTimeGrid,
    exec: ExecMode,
) -> Result<FieldTrajectory> {
    let engine = NoiseEngine::new(grid, *sm.domain(), *sigma, exec)?;
    let tables = engine.osc_tables(eps)?;
    engine.difference_field(sm, &tables)
}

/// One-call solve of the mild equation on a fixed realization.
pub fn solve_mild(
    sm: &SmRealization,
    coeffs: &CoefficientSet,
    mode: SolveMode,
    grid: SpaceTimeGrid,
    settings: SolveSettings,
    exec: ExecMode,
) -> Result<FieldTrajectory> {
    let solver = Solver::new(grid, *sm.domain(), *coeffs, settings, exec)?;
    let osc = match mode {
        SolveMode::Epsilon(eps) => Some(solver.prepare(eps)?),
        SolveMode::Averaged => None,
    };
    solver.solve(sm, mode, osc.as_ref())
}

/// Samples of the centered kernel-time integral
/// `y -> int_0^t p(t - s, x - y) (sigma(s/eps, y) - averaged(y)) ds`
/// on a uniform y-grid, by direct quadrature at the oscillation-resolving
/// step. This is the per-point field whose regularity the Besov probes test.
pub fn oscillation_gap_samples(
    sigma: &SigmaSpec,
    eps: f64,
    t: f64,
    x: f64,
    y_start: f64,
    y_end: f64,
    count: usize,
) -> Result<Vec<f64>> {
    if !(eps > 0.0 && t > 0.0) {
        return Err(Error::InvalidInput("need positive eps and t".into()));
    }
    if count < 2 || !(y_end > y_start) {
        return Err(Error::InvalidInput("bad sampling interval".into()));
    }
    let harmonics = sigma.harmonics();
    if harmonics.is_empty() {
        return Ok(vec![0.0; count]);
    }
    let f_max = sigma.max_freq().max(1.0);
    let u_max = t.sqrt();
    let n = ((u_max * OSC_STEPS_PER_PERIOD * f_max / (2.0 * PI * eps)).ceil() as usize)
        .clamp(BASE_U_STEPS, MAX_U_NODES);
    let du = u_max / n as f64;
    let mean = sigma.mean_level();
    let step = (y_end - y_start) / (count - 1) as f64;
    let inv_sqrt_pi = 1.0 / PI.sqrt();
    let out = (0..count)
        .map(|iy| {
            let y = y_start + iy as f64 * step;
            let d2 = (x - y) * (x - y);
            let mut acc = 0.0;
            let mut prev = 0.0; // u = 0: Gaussian factor vanishes (d != 0 a.e.)
            if d2 == 0.0 {
                prev = sigma.modulation(t / eps) - mean;
            }
            for q in 1..=n {
                let u = q as f64 * du;
                let v = (-d2 / (4.0 * u * u)).exp() * (sigma.modulation((t - u * u) / eps) - mean);
                acc += 0.5 * (prev + v) * du;
                prev = v;
            }
            sigma.profile(y) * acc * inv_sqrt_pi
        })
        .collect();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::{DriftSpec, InitialSpec, SigmaFamily};
    use crate::quad;
    use crate::sm::{realize, zero_measure, SmKind, Weight};

    fn small_setup(family: SigmaFamily) -> (SpaceTimeGrid, DyadicDomain, SigmaSpec, SmRealization) {
        let grid = SpaceTimeGrid::new(1, 5, 0.5, 8).unwrap();
        let domain = DyadicDomain::new(-2, 2, 5).unwrap();
        let sigma = SigmaSpec::new(family, 0.75).unwrap();
        let sm = realize(
            SmKind::Wiener {
                weight: Weight::Gauss,
            },
            domain,
            42,
        )
        .unwrap();
        (grid, domain, sigma, sm)
    }

    #[test]
    fn noise_row_zero_is_zero() {
        let (grid, _, sigma, sm) = small_setup(SigmaFamily::ShiftedCos);
        let n = noise_term(
            &sm,
            &sigma,
            SolveMode::Epsilon(0.25),
            grid,
            ExecMode::Sequential,
        )
        .unwrap();
        assert!(n.row(0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn averaged_of_zero_mean_family_is_zero() {
        let (grid, _, sigma, sm) = small_setup(SigmaFamily::Sin);
        let n = noise_term(&sm, &sigma, SolveMode::Averaged, grid, ExecMode::Sequential).unwrap();
        assert!(n.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn time_constant_forced_equals_averaged_exactly() {
        let (grid, _, sigma, sm) = small_setup(SigmaFamily::Constant);
        for eps in [0.25, 1e-3] {
            let forced = noise_term(
                &sm,
                &sigma,
                SolveMode::Epsilon(eps),
                grid,
                ExecMode::Sequential,
            )
            .unwrap();
            let avg =
                noise_term(&sm, &sigma, SolveMode::Averaged, grid, ExecMode::Sequential).unwrap();
            assert_eq!(forced.values(), avg.values());
            let diff = noise_difference(&sm, &sigma, eps, grid, ExecMode::Sequential).unwrap();
            assert!(diff.values().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn forced_is_exactly_averaged_plus_difference() {
        let (grid, _, sigma, sm) = small_setup(SigmaFamily::ShiftedCos);
        let eps = 0.0625;
        let forced = noise_term(
            &sm,
            &sigma,
            SolveMode::Epsilon(eps),
            grid,
            ExecMode::Sequential,
        )
        .unwrap();
        let avg = noise_term(&sm, &sigma, SolveMode::Averaged, grid, ExecMode::Sequential).unwrap();
        let diff = noise_difference(&sm, &sigma, eps, grid, ExecMode::Sequential).unwrap();
        for ((f, a), d) in forced.values().iter().zip(avg.values()).zip(diff.values()) {
            assert_eq!(*f, a + d);
        }
    }

    #[test]
    fn parallel_and_sequential_tables_agree() {
        let (grid, domain, sigma, sm) = small_setup(SigmaFamily::ShiftedCos);
        let seq = NoiseEngine::new(grid, domain, sigma, ExecMode::Sequential).unwrap();
        let par_ = NoiseEngine::new(grid, domain, sigma, ExecMode::Parallel).unwrap();
        let a = seq.averaged_field(&sm).unwrap();
        let b = par_.averaged_field(&sm).unwrap();
        assert_eq!(a.values(), b.values());
        let ta = seq.osc_tables(0.125).unwrap();
        let tb = par_.osc_tables(0.125).unwrap();
        let da = seq.difference_field(&sm, &ta).unwrap();
        let db = par_.difference_field(&sm, &tb).unwrap();
        assert_eq!(da.values(), db.values());
    }

    #[test]
    fn correlation_matches_direct_sum() {
        let (grid, domain, sigma, sm) = small_setup(SigmaFamily::ShiftedCos);
        let engine = NoiseEngine::new(grid, domain, sigma, ExecMode::Sequential).unwrap();
        let tables = engine.osc_tables(0.125).unwrap();
        let field = engine.difference_field(&sm, &tables).unwrap();
        let n_atoms = domain.total_atoms();
        // direct evaluation of sum_k rows[i][(j - k) + (N-1)] * a(y_k) mu_k
        for i in [1usize, 4, 8] {
            for j in [0usize, 7, grid.nx()] {
                let mut direct = 0.0;
                for k in 0..n_atoms {
                    let w = sigma.profile(domain.left_endpoint(k)) * sm.atoms()[k];
                    direct += tables.rows[i][j + (n_atoms - 1) - k] * w;
                }
                let got = field.at(i, j);
                assert!(
                    (got - direct).abs() < 1e-11 * direct.abs().max(1.0),
                    "row {i} col {j}: {got} vs {direct}"
                );
            }
        }
    }

    #[test]
    fn difference_table_matches_independent_quadrature() {
        // one displacement entry of the assembled table against a direct
        // integral of p(t - s, d) (m(s/eps) - mean) ds with substitution
        let (grid, domain, sigma, _) = small_setup(SigmaFamily::ShiftedCos);
        let engine = NoiseEngine::new(grid, domain, sigma, ExecMode::Sequential).unwrap();
        let eps = 0.125;
        let tables = engine.osc_tables(eps).unwrap();
        let n_atoms = domain.total_atoms();
        for (i, m) in [(4usize, n_atoms - 1 + 3), (8, n_atoms - 1 - 17)] {
            let t = grid.t(i);
            let d = engine.d_vals[m];
            let oracle = quad::trapezoid(
                |u| {
                    if u == 0.0 {
                        return 0.0;
                    }
                    (-d * d / (4.0 * u * u)).exp() * ((t - u * u) / eps).cos()
                },
                0.0,
                t.sqrt(),
                200_000,
            ) / PI.sqrt();
            let got = tables.rows[i][m];
            assert!(
                (got - oracle).abs() < 2e-4 * oracle.abs().max(1e-3),
                "row {i} d={d}: {got} vs {oracle}"
            );
        }
    }

    #[test]
    fn gap_samples_match_difference_field_on_grid() {
        let (grid, domain, sigma, sm) = small_setup(SigmaFamily::ShiftedCos);
        let _ = sm;
        let eps = 0.125;
        // pointwise g(z, y) samples on atom endpoints vs the engine tables
        let engine = NoiseEngine::new(grid, domain, sigma, ExecMode::Sequential).unwrap();
        let tables = engine.osc_tables(eps).unwrap();
        let i = grid.nt();
        let t = grid.t(i);
        let x = 0.5;
        let j = ((x + grid.radius()) / grid.dx()).round() as usize;
        let count = 33;
        let gap = oscillation_gap_samples(&sigma, eps, t, x, 0.0, 1.0, count).unwrap();
        for (iy, g) in gap.iter().enumerate() {
            let y = iy as f64 / (count - 1) as f64;
            let k = domain.grid_index(y).unwrap();
            let m = j + (domain.total_atoms() - 1) - k;
            let table_val = tables.rows[i][m] * sigma.profile(y);
            assert!(
                (g - table_val).abs() < 1e-5 * table_val.abs().max(1e-3),
                "y={y}: {g} vs {table_val}"
            );
        }
    }

    #[test]
    fn deterministic_solve_matches_gaussian_closed_form() {
        // mu = 0, f = 0, Gaussian initial data: the solution is the heat
        // evolution sqrt(1/(1+t)) exp(-x^2/(4(1+t)))
        let grid = SpaceTimeGrid::new(8, 6, 1.0, 16).unwrap();
        let domain = DyadicDomain::new(-8, 8, 6).unwrap();
        let sm = zero_measure(domain);
        let coeffs = CoefficientSet {
            sigma: SigmaSpec::new(SigmaFamily::Constant, 0.75).unwrap(),
            drift: DriftSpec::Zero,
            initial: InitialSpec::Gaussian,
        };
        let u = solve_mild(
            &sm,
            &coeffs,
            SolveMode::Averaged,
            grid,
            SolveSettings::default(),
            ExecMode::Sequential,
        )
        .unwrap();
        assert_eq!(u.meta.iterations, 1);
        let mut worst = 0.0f64;
        for i in 0..=grid.nt() {
            let t = grid.t(i);
            for j in 0..=grid.nx() {
                let x = grid.x(j);
                let expect = (1.0 / (1.0 + t)).sqrt() * (-x * x / (4.0 * (1.0 + t))).exp();
                worst = worst.max((u.at(i, j) - expect).abs());
            }
        }
        assert!(worst < 1e-3, "closed-form defect {worst}");
    }

    #[test]
    fn zero_drift_solution_is_base_after_one_iteration() {
        let (grid, _, sigma, sm) = small_setup(SigmaFamily::ShiftedCos);
        let coeffs = CoefficientSet {
            sigma,
            drift: DriftSpec::Zero,
            initial: InitialSpec::Gaussian,
        };
        let solver = Solver::new(
            grid,
            *sm.domain(),
            coeffs,
            SolveSettings::default(),
            ExecMode::Sequential,
        )
        .unwrap();
        let tables = solver.prepare(0.25).unwrap();
        let u = solver
            .solve(&sm, SolveMode::Epsilon(0.25), Some(&tables))
            .unwrap();
        assert_eq!(u.meta.iterations, 1);
        assert_eq!(u.meta.residual, 0.0);
        // row 0 is the initial data
        for j in 0..=grid.nx() {
            assert_eq!(u.at(0, j), coeffs.initial.eval(grid.x(j)));
        }
    }

    #[test]
    fn picard_increments_contract() {
        // increments must decay at least geometrically with ratio
        // <= L_f T (1 + 0.1); measure them by running with increasing
        // iteration caps
        let grid = SpaceTimeGrid::new(2, 5, 1.0, 16).unwrap();
        let domain = DyadicDomain::new(-2, 2, 5).unwrap();
        let sm = realize(
            SmKind::Wiener {
                weight: Weight::Gauss,
            },
            domain,
            7,
        )
        .unwrap();
        let coeffs = CoefficientSet {
            sigma: SigmaSpec::new(SigmaFamily::ShiftedCos, 0.75).unwrap(),
            drift: DriftSpec::Clamp,
            initial: InitialSpec::Gaussian,
        };
        let solver = Solver::new(
            grid,
            domain,
            coeffs,
            SolveSettings {
                tol: 1e-12,
                max_iter: 40,
            },
            ExecMode::Sequential,
        )
        .unwrap();
        let tables = solver.prepare(0.25).unwrap();
        let u = solver
            .solve(&sm, SolveMode::Epsilon(0.25), Some(&tables))
            .unwrap();
        let lip_t = coeffs.drift.lipschitz() * grid.horizon();
        let hist = &u.meta.residual_history;
        assert!(hist.len() >= 3, "history {hist:?}");
        for w in hist.windows(2) {
            if w[0] > 1e-13 {
                let ratio = w[1] / w[0];
                assert!(
                    ratio <= lip_t * 1.1,
                    "increment ratio {ratio} vs bound {}",
                    lip_t * 1.1
                );
            }
        }
        // increments are summable: the geometric tail-ratio certificate
        let sum: f64 = hist.iter().sum();
        assert!(sum.is_finite() && sum > 0.0);
        assert!(u.meta.residual < 1e-12);
    }

    #[test]
    fn time_constant_solves_identically() {
        let (grid, domain, _, sm) = small_setup(SigmaFamily::Constant);
        let coeffs = CoefficientSet {
            sigma: SigmaSpec::new(SigmaFamily::Constant, 0.75).unwrap(),
            drift: DriftSpec::BoundedFraction,
            initial: InitialSpec::Gaussian,
        };
        let solver = Solver::new(
            grid,
            domain,
            coeffs,
            SolveSettings::default(),
            ExecMode::Sequential,
        )
        .unwrap();
        let tables = solver.prepare(1e-3).unwrap();
        let ue = solver
            .solve(&sm, SolveMode::Epsilon(1e-3), Some(&tables))
            .unwrap();
        let ub = solver.solve(&sm, SolveMode::Averaged, None).unwrap();
        let d = ue.sup_distance(&ub).unwrap();
        assert!(d <= 2.0 * SolveSettings::default().tol, "distance {d}");
    }

    #[test]
    fn difference_field_shrinks_with_eps() {
        let (grid, _, sigma, sm) = small_setup(SigmaFamily::Sin);
        let d2 = noise_difference(&sm, &sigma, 1e-2, grid, ExecMode::Sequential).unwrap();
        let d4 = noise_difference(&sm, &sigma, 1e-4, grid, ExecMode::Sequential).unwrap();
        let sup2 = d2.values().iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        let sup4 = d4.values().iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        assert!(sup2 > sup4, "sup at 1e-2 = {sup2}, at 1e-4 = {sup4}");
        // rescaled-by-rate boundedness probe: within a factor 10
        let g1 = 1.0 / 6.0;
        let r2 = sup2 * (1e-2f64).powf(-g1);
        let r4 = sup4 * (1e-4f64).powf(-g1);
        let ratio = (r2 / r4).max(r4 / r2);
        assert!(ratio < 10.0, "rescaled ratio {ratio}");
    }

    #[test]
    fn heat_conv_op_matches_direct_convolution() {
        let grid = SpaceTimeGrid::new(2, 6, 0.5, 8).unwrap();
        let op = HeatConvOp::new(grid);
        let nx1 = grid.nx() + 1;
        let field: Vec<f64> = (0..nx1)
            .map(|j| {
                let x = grid.x(j);
                (-x * x).exp() * (3.0 * x).cos()
            })
            .collect();
        let fh = op.field_hat(&field);
        for lag in [1usize, 4, 8] {
            let got = op.apply(&fh, lag);
            let want = kernel::kernel_convolve(&field, grid.dx(), grid.t(lag)).unwrap();
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() < 1e-10, "lag {lag}: {g} vs {w}");
            }
        }
    }

    #[test]
    fn solve_rejects_mismatched_tables() {
        let (grid, domain, sigma, sm) = small_setup(SigmaFamily::ShiftedCos);
        let coeffs = CoefficientSet {
            sigma,
            drift: DriftSpec::Zero,
            initial: InitialSpec::Zero,
        };
        let solver = Solver::new(
            grid,
            domain,
            coeffs,
            SolveSettings::default(),
            ExecMode::Sequential,
        )
        .unwrap();
        let tables = solver.prepare(0.25).unwrap();
        assert!(solver
            .solve(&sm, SolveMode::Epsilon(0.125), Some(&tables))
            .is_err());
        assert!(solver.solve(&sm, SolveMode::Epsilon(0.125), None).is_err());
    }
}
