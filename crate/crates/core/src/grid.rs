//! Space-time discretization and solved-field storage.

use crate::dyadic::DyadicDomain;
use crate::error::{Error, Result};
use std::io::{BufWriter, Write};
use std::path::Path;

/// Uniform grid on `[-R, R] x [0, T]` whose spatial step is exactly the
/// dyadic atom length `2^-depth`, so every grid point is a dyadic endpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpaceTimeGrid {
    radius: u32,
    depth: u32,
    horizon: f64,
    nt: usize,
}

impl SpaceTimeGrid {
    pub fn new(radius: u32, depth: u32, horizon: f64, nt: usize) -> Result<Self> {
        if radius == 0 {
            return Err(Error::InvalidInput(
                "spatial radius must be positive".into(),
            ));
        }
        if depth == 0 || depth > 16 {
            return Err(Error::InvalidInput(format!(
                "grid depth must lie in 1..=16, got {depth}"
            )));
        }
        if !(horizon > 0.0) {
            return Err(Error::InvalidInput("time horizon must be positive".into()));
        }
        if nt < 2 {
            return Err(Error::InvalidInput("need at least two time steps".into()));
        }
        let nx = (2 * radius as usize) << depth;
        if nx > 1 << 22 {
            return Err(Error::InvalidInput("spatial grid too large".into()));
        }
        Ok(Self {
            radius,
            depth,
            horizon,
            nt,
        })
    }

    pub fn radius(&self) -> f64 {
        self.radius as f64
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Spatial step, exactly `2^-depth`.
    pub fn dx(&self) -> f64 {
        0.5f64.powi(self.depth as i32)
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.nt as f64
    }

    /// Number of spatial intervals; there are `nx() + 1` grid points.
    pub fn nx(&self) -> usize {
        (2 * self.radius as usize) << self.depth
    }

    /// Number of time steps; there are `nt() + 1` grid rows.
    pub fn nt(&self) -> usize {
        self.nt
    }

    pub fn x(&self, j: usize) -> f64 {
        -(self.radius as f64) + j as f64 * self.dx()
    }

    pub fn t(&self, i: usize) -> f64 {
        self.horizon * i as f64 / self.nt as f64
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..=self.nx()).map(|j| self.x(j)).collect()
    }

    /// Checks that the grid shares its resolution with a dyadic domain and
    /// sits inside it.
    pub fn check_alignment(&self, domain: &DyadicDomain) -> Result<()> {
        if domain.depth() != self.depth {
            return Err(Error::Misaligned(format!(
                "grid depth {} vs domain depth {}",
                self.depth,
                domain.depth()
            )));
        }
        if domain.j_min() > -(self.radius as i32) || domain.j_max() < self.radius as i32 {
            return Err(Error::Misaligned(format!(
                "grid [-{r}, {r}] not inside domain [{}, {}]",
                domain.j_min(),
                domain.j_max(),
                r = self.radius
            )));
        }
        Ok(())
    }
}

/// What a stored field represents.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FieldKind {
    Solution,
    NoiseTerm,
    NoiseDifference,
}

/// Which equation a solve targeted: the fast-forced one at a given scale, or
/// the time-averaged one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SolveMode {
    Epsilon(f64),
    Averaged,
}

impl SolveMode {
    pub fn label(&self) -> String {
        match self {
            SolveMode::Epsilon(e) => format!("{e:.16e}"),
            SolveMode::Averaged => "averaged".to_string(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrajectoryMeta {
    pub kind: FieldKind,
    pub mode: SolveMode,
    pub seed: u64,
    pub iterations: usize,
    pub residual: f64,
    /// Sup-norm increment after each fixed-point iteration (empty for
    /// fields that are not produced by iteration).
    pub residual_history: Vec<f64>,
}

/// Field values on the full grid, row-major with `nt + 1` rows of
/// `nx + 1` spatial samples. Row 0 is the initial data.
#[derive(Debug, Clone)]
pub struct FieldTrajectory {
    grid: SpaceTimeGrid,
    values: Vec<f64>,
    pub meta: TrajectoryMeta,
}

impl FieldTrajectory {
    pub fn new(grid: SpaceTimeGrid, values: Vec<f64>, meta: TrajectoryMeta) -> Result<Self> {
        let want = (grid.nt() + 1) * (grid.nx() + 1);
        if values.len() != want {
            return Err(Error::InvalidInput(format!(
                "trajectory needs {want} values, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("trajectory values".into()));
        }
        Ok(Self { grid, values, meta })
    }

    pub fn grid(&self) -> &SpaceTimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * (self.grid.nx() + 1) + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.grid.nx() + 1;
        &self.values[i * w..(i + 1) * w]
    }

    /// Max absolute difference over every grid node.
    pub fn sup_distance(&self, other: &FieldTrajectory) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::Misaligned("trajectories on different grids".into()));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// Max absolute difference restricted to `|x| <= radius - margin`
    /// (boundary band excluded from convergence measurements).
    pub fn sup_distance_within(&self, other: &FieldTrajectory, margin: f64) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::Misaligned("trajectories on different grids".into()));
        }
        let band = (self.grid.radius() - margin).max(self.grid.radius() * 0.25);
        let w = self.grid.nx() + 1;
        let mut sup: f64 = 0.0;
        for j in 0..w {
            if self.grid.x(j).abs() > band {
                continue;
            }
            for i in 0..=self.grid.nt() {
                sup = sup.max((self.values[i * w + j] - other.values[i * w + j]).abs());
            }
        }
        Ok(sup)
    }

    /// Per-row sup distance, for inequality chains over time.
    pub fn row_sup_distance(&self, other: &FieldTrajectory, i: usize) -> f64 {
        self.row(i)
            .iter()
            .zip(other.row(i))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Writes `t, x, u` rows at 17 significant digits after a metadata header.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        let mut w = BufWriter::new(f);
        writeln!(
            w,
            "# mode={} seed={} iterations={} residual={:.16e} radius={} depth={} horizon={:.16e} nt={}",
            self.meta.mode.label(),
            self.meta.seed,
            self.meta.iterations,
            self.meta.residual,
            self.grid.radius(),
            self.grid.depth(),
            self.grid.horizon(),
            self.grid.nt()
        )?;
        writeln!(w, "t,x,u")?;
        for i in 0..=self.grid.nt() {
            let t = self.grid.t(i);
            for j in 0..=self.grid.nx() {
                writeln!(w, "{t:.16e},{:.16e},{:.16e}", self.grid.x(j), self.at(i, j))?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_alignment_with_dyadic_domain() {
        let g = SpaceTimeGrid::new(4, 8, 1.0, 64).unwrap();
        assert_eq!(g.dx(), 1.0 / 256.0);
        assert_eq!(g.nx(), 2048);
        let d = DyadicDomain::new(-8, 8, 8).unwrap();
        assert!(g.check_alignment(&d).is_ok());
        assert_eq!(g.dx(), d.atom_len());
        let d_wrong_depth = DyadicDomain::new(-8, 8, 7).unwrap();
        assert!(g.check_alignment(&d_wrong_depth).is_err());
        let d_small = DyadicDomain::new(-2, 2, 8).unwrap();
        assert!(g.check_alignment(&d_small).is_err());
    }

    #[test]
    fn grid_validation() {
        assert!(SpaceTimeGrid::new(0, 8, 1.0, 64).is_err());
        assert!(SpaceTimeGrid::new(4, 8, 0.0, 64).is_err());
        assert!(SpaceTimeGrid::new(4, 8, 1.0, 1).is_err());
    }

    fn tiny_traj(c: f64) -> FieldTrajectory {
        let g = SpaceTimeGrid::new(1, 2, 1.0, 2).unwrap();
        let n = (g.nt() + 1) * (g.nx() + 1);
        FieldTrajectory::new(
            g,
            vec![c; n],
            TrajectoryMeta {
                kind: FieldKind::Solution,
                mode: SolveMode::Averaged,
                seed: 0,
                iterations: 1,
                residual: 0.0,
                residual_history: Vec::new(),
            },
        )
        .unwrap()
    }

    #[test]
    fn sup_distance_basics() {
        let a = tiny_traj(1.0);
        let b = tiny_traj(1.0);
        assert_eq!(a.sup_distance(&b).unwrap(), 0.0);
        let mut c = tiny_traj(1.0);
        let m = c.values.len() / 2;
        c.values[m] += 0.25;
        assert_eq!(a.sup_distance(&c).unwrap(), 0.25);
    }

    #[test]
    fn rejects_nonfinite_or_mis_sized() {
        let g = SpaceTimeGrid::new(1, 2, 1.0, 2).unwrap();
        let meta = TrajectoryMeta {
            kind: FieldKind::Solution,
            mode: SolveMode::Averaged,
            seed: 0,
            iterations: 0,
            residual: 0.0,
            residual_history: Vec::new(),
        };
        assert!(FieldTrajectory::new(g, vec![0.0; 3], meta.clone()).is_err());
        let n = (g.nt() + 1) * (g.nx() + 1);
        let mut vals = vec![0.0; n];
        vals[0] = f64::NAN;
        assert!(FieldTrajectory::new(g, vals, meta).is_err());
    }

    #[test]
    fn csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("traj.csv");
        let t = tiny_traj(0.5);
        t.write_csv(&p).unwrap();
        let body = std::fs::read_to_string(&p).unwrap();
        let lines: Vec<&str> = body.lines().collect();
        assert!(lines[0].starts_with("# mode=averaged"));
        assert_eq!(lines[1], "t,x,u");
        let g = t.grid();
        assert_eq!(lines.len(), 2 + (g.nt() + 1) * (g.nx() + 1));
    }
}
