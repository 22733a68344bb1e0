//! Time series of P1 coefficient vectors on a fixed mesh, with the discrete
//! energy norm and a plain-text dump format.
//!
//! The energy norm combines, over the time steps, the dual norm of the
//! discrete time derivative (as a functional, i.e. of M times the difference
//! quotient) with the H1 norm of the current snapshot:
//!   sqrt( sum_n tau_n * ( ||M du^n||_dual^2 + ||u^n||_H1^2 ) ).

use std::io::{BufRead, Write};
use std::sync::Arc;

use crate::assembly::mass_matrix;
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::norms::{dual_norm_with_guess, h1_norm};

#[derive(Debug, Clone)]
pub struct Trajectory {
    mesh: Arc<Mesh>,
    times: Vec<f64>,
    snapshots: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn new(mesh: Arc<Mesh>, times: Vec<f64>, snapshots: Vec<Vec<f64>>) -> Result<Trajectory> {
        if times.len() != snapshots.len() {
            return Err(Error::InvalidInput(format!(
                "{} times but {} snapshots",
                times.len(),
                snapshots.len()
            )));
        }
        if times.len() < 2 {
            return Err(Error::InvalidInput(
                "a trajectory needs at least two time levels".into(),
            ));
        }
        for w in times.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::InvalidInput(format!(
                    "times must increase strictly ({} then {})",
                    w[0], w[1]
                )));
            }
        }
        for s in &snapshots {
            if s.len() != mesh.n_free() {
                return Err(Error::InvalidInput(format!(
                    "snapshot has {} values, mesh has {} interior vertices",
                    s.len(),
                    mesh.n_free()
                )));
            }
        }
        Ok(Trajectory {
            mesh,
            times,
            snapshots,
        })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn n_steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn snapshot(&self, n: usize) -> &[f64] {
        &self.snapshots[n]
    }

    pub fn last(&self) -> &[f64] {
        self.snapshots.last().unwrap()
    }

    /// Step size if the grid is uniform (relative tolerance 1e-12).
    pub fn uniform_tau(&self) -> Option<f64> {
        let tau = self.times[1] - self.times[0];
        for w in self.times.windows(2) {
            if ((w[1] - w[0]) - tau).abs() > 1e-12 * tau.abs() {
                return None;
            }
        }
        Some(tau)
    }

    /// Keeps every `stride`-th snapshot (always including the first and
    /// last); the step count must divide evenly.
    pub fn restrict_every(&self, stride: usize) -> Result<Trajectory> {
        if stride == 0 || !self.n_steps().is_multiple_of(stride) {
            return Err(Error::InvalidInput(format!(
                "stride {stride} does not divide {} steps",
                self.n_steps()
            )));
        }
        let times = self.times.iter().copied().step_by(stride).collect();
        let snapshots = self.snapshots.iter().cloned().step_by(stride).collect();
        Trajectory::new(Arc::clone(&self.mesh), times, snapshots)
    }

    /// Snapshot-wise difference; meshes must be the same object and the time
    /// grids must agree.
    pub fn difference(&self, other: &Trajectory) -> Result<Trajectory> {
        if !Arc::ptr_eq(&self.mesh, &other.mesh) {
            return Err(Error::InvalidInput(
                "trajectories live on different meshes".into(),
            ));
        }
        if self.times.len() != other.times.len() {
            return Err(Error::InvalidInput(format!(
                "time grids have {} and {} levels",
                self.times.len(),
                other.times.len()
            )));
        }
        for (a, b) in self.times.iter().zip(&other.times) {
            if (a - b).abs() > 1e-12 * a.abs().max(1.0) {
                return Err(Error::InvalidInput(format!(
                    "time grids differ at {a} vs {b}"
                )));
            }
        }
        let snapshots = self
            .snapshots
            .iter()
            .zip(&other.snapshots)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
            .collect();
        Trajectory::new(Arc::clone(&self.mesh), self.times.clone(), snapshots)
    }

    /// Discrete energy norm over the whole trajectory (dual solves are
    /// warm-started across steps).
    pub fn discrete_energy_norm(&self) -> Result<f64> {
        let m = mass_matrix(&self.mesh);
        let mut guess = vec![0.0; self.mesh.n_free()];
        let mut acc = 0.0;
        for n in 1..self.times.len() {
            let tau = self.times[n] - self.times[n - 1];
            let u = &self.snapshots[n];
            let uprev = &self.snapshots[n - 1];
            let du: Vec<f64> = u
                .iter()
                .zip(uprev)
                .map(|(a, b)| (a - b) / tau)
                .collect();
            let fdual = m.matvec(&du);
            let dual = dual_norm_with_guess(&self.mesh, &fdual, Some(&mut guess))?;
            let h1 = h1_norm(&self.mesh, u);
            acc += tau * (dual * dual + h1 * h1);
        }
        Ok(acc.sqrt())
    }

    /// Mesh dump, then the number of time levels, the times, and one line of
    /// interior values per level, all at 17 significant digits.
    pub fn write_text<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        self.mesh.write_text(w)?;
        writeln!(w, "{}", self.times.len())?;
        for t in &self.times {
            writeln!(w, "{t:.16e}")?;
        }
        for snap in &self.snapshots {
            let line: Vec<String> = snap.iter().map(|v| format!("{v:.16e}")).collect();
            writeln!(w, "{}", line.join(" "))?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: &mut R) -> Result<Trajectory> {
        let mesh = Arc::new(Mesh::read_text(r)?);
        let mut lines = r.lines();
        let count_line = lines
            .next()
            .ok_or_else(|| Error::Parse("missing time-level count".into()))??;
        let count: usize = count_line
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad time-level count `{count_line}`")))?;
        let mut times = Vec::with_capacity(count);
        for _ in 0..count {
            let line = lines
                .next()
                .ok_or_else(|| Error::Parse("truncated time block".into()))??;
            times.push(
                line.trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad time `{line}`")))?,
            );
        }
        let mut snapshots = Vec::with_capacity(count);
        for _ in 0..count {
            let line = lines
                .next()
                .ok_or_else(|| Error::Parse("truncated snapshot block".into()))??;
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(|t| {
                    t.parse()
                        .map_err(|_| Error::Parse(format!("bad value `{t}`")))
                })
                .collect::<Result<_>>()?;
            snapshots.push(vals);
        }
        Trajectory::new(mesh, times, snapshots)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_trajectory() -> Trajectory {
        let mesh = Arc::new(Mesh::interval(4, 0.0, 1.0).unwrap());
        let times = vec![0.0, 0.25, 0.5, 0.75, 1.0];
        let snapshots = (0..5)
            .map(|n| {
                (0..mesh.n_free())
                    .map(|i| (n as f64 + 1.0) * 0.1 * (i as f64 + 1.0))
                    .collect()
            })
            .collect();
        Trajectory::new(mesh, times, snapshots).unwrap()
    }

    #[test]
    fn validation_catches_shape_mismatches() {
        let mesh = Arc::new(Mesh::interval(4, 0.0, 1.0).unwrap());
        assert!(Trajectory::new(
            Arc::clone(&mesh),
            vec![0.0, 1.0],
            vec![vec![0.0; 3]]
        )
        .is_err());
        assert!(Trajectory::new(
            Arc::clone(&mesh),
            vec![0.0, 0.0],
            vec![vec![0.0; 3], vec![0.0; 3]]
        )
        .is_err());
        assert!(Trajectory::new(mesh, vec![0.0, 1.0], vec![vec![0.0; 2], vec![0.0; 3]]).is_err());
    }

    #[test]
    fn restriction_keeps_endpoints() {
        let traj = toy_trajectory();
        let half = traj.restrict_every(2).unwrap();
        assert_eq!(half.times(), &[0.0, 0.5, 1.0]);
        assert_eq!(half.snapshot(0), traj.snapshot(0));
        assert_eq!(half.snapshot(2), traj.snapshot(4));
        assert!(traj.restrict_every(3).is_err());
    }

    #[test]
    fn uniform_tau_detection() {
        let traj = toy_trajectory();
        assert_eq!(traj.uniform_tau(), Some(0.25));
        let mesh = Arc::clone(traj.mesh());
        let skew = Trajectory::new(
            mesh,
            vec![0.0, 0.25, 0.6],
            vec![vec![0.0; 3], vec![0.0; 3], vec![0.0; 3]],
        )
        .unwrap();
        assert_eq!(skew.uniform_tau(), None);
    }

    #[test]
    fn difference_of_trajectory_with_itself_is_zero() {
        let traj = toy_trajectory();
        let diff = traj.difference(&traj).unwrap();
        for n in 0..diff.times().len() {
            assert!(diff.snapshot(n).iter().all(|&v| v == 0.0));
        }
        assert!(diff.discrete_energy_norm().unwrap() == 0.0);
    }

    #[test]
    fn difference_rejects_foreign_meshes() {
        let a = toy_trajectory();
        let b = toy_trajectory(); // same construction, different Arc
        assert!(a.difference(&b).is_err());
    }

    #[test]
    fn energy_norm_on_a_single_dof_matches_hand_computation() {
        // one interior vertex: M = [1/3], S = [4], G = [13/3];
        // u = 0 -> 1 over tau = 1/2:
        //   dual(M du)^2 = (c/(3 tau))^2 / (13/3), H1(u1)^2 = 13/3
        let mesh = Arc::new(Mesh::interval(2, 0.0, 1.0).unwrap());
        let traj = Trajectory::new(mesh, vec![0.0, 0.5], vec![vec![0.0], vec![1.0]]).unwrap();
        let tau = 0.5;
        let dual_sq = (1.0 / (3.0 * tau)) * (1.0 / (3.0 * tau)) / (13.0 / 3.0);
        let want = f64::sqrt(tau * (dual_sq + 13.0 / 3.0));
        let got = traj.discrete_energy_norm().unwrap();
        assert!((got - want).abs() < 1e-10 * want, "got {got}, want {want}");
    }

    #[test]
    fn text_round_trip_is_exact() {
        let traj = toy_trajectory();
        let mut buf = Vec::new();
        traj.write_text(&mut buf).unwrap();
        let back = Trajectory::read_text(&mut buf.as_slice()).unwrap();
        assert_eq!(back.times(), traj.times());
        for n in 0..traj.times().len() {
            assert_eq!(back.snapshot(n), traj.snapshot(n));
        }
        assert_eq!(back.mesh().n_vertices(), traj.mesh().n_vertices());
    }
}
