//! Trajectory output: observable CSV series and flat binary field snapshots.
//!
//! Snapshot layout, all little-endian: `u64 n`, `f64 L`, `f64 T`, `f64 dt`,
//! then for every snapshot `f64 t` followed by `n` interleaved `(re, im)`
//! pairs of `f64`.

use std::io::{self, Read, Write};

use num_complex::Complex64;

use crate::dynamics::Trajectory;
use crate::error::Result;
use crate::grid::{Field, Grid};
use crate::observables::{ObservableRecord, CSV_HEADER};

/// Observable rows for every stored snapshot.
pub fn observe_trajectory(
    traj: &Trajectory,
    grid: &Grid,
    window: f64,
    threshold: f64,
) -> Result<Vec<ObservableRecord>> {
    traj.times
        .iter()
        .zip(&traj.states)
        .map(|(&t, u)| ObservableRecord::observe(t, u, grid, window, threshold))
        .collect()
}

/// Writes `# `-prefixed comment lines, the header and one row per record.
pub fn write_observables_csv<W: Write>(mut w: W, comments: &[String], records: &[ObservableRecord]) -> io::Result<()> {
    for c in comments {
        writeln!(w, "# {c}")?;
    }
    writeln!(w, "{CSV_HEADER}")?;
    for r in records {
        writeln!(w, "{}", r.csv_row())?;
    }
    Ok(())
}

pub fn write_snapshots<W: Write>(mut w: W, grid: &Grid, total_time: f64, dt: f64, traj: &Trajectory) -> io::Result<()> {
    w.write_all(&(grid.n_points() as u64).to_le_bytes())?;
    for v in [grid.half_length(), total_time, dt] {
        w.write_all(&v.to_le_bytes())?;
    }
    for (&t, u) in traj.times.iter().zip(&traj.states) {
        w.write_all(&t.to_le_bytes())?;
        for z in &u.values {
            w.write_all(&z.re.to_le_bytes())?;
            w.write_all(&z.im.to_le_bytes())?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotFile {
    pub n_points: usize,
    pub half_length: f64,
    pub total_time: f64,
    pub dt: f64,
    pub times: Vec<f64>,
    pub states: Vec<Vec<Complex64>>,
}

fn read_f64<R: Read>(r: &mut R) -> io::Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

pub fn read_snapshots<R: Read>(mut r: R) -> io::Result<SnapshotFile> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    let n = u64::from_le_bytes(b) as usize;
    let half_length = read_f64(&mut r)?;
    let total_time = read_f64(&mut r)?;
    let dt = read_f64(&mut r)?;
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    let record = 8 * (1 + 2 * n);
    if n == 0 || rest.len() % record != 0 {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "truncated snapshot file"));
    }
    let f = |c: &[u8]| f64::from_le_bytes(c.try_into().unwrap());
    let mut times = Vec::new();
    let mut states = Vec::new();
    for chunk in rest.chunks_exact(record) {
        times.push(f(&chunk[..8]));
        states.push(
            chunk[8..]
                .chunks_exact(16)
                .map(|p| Complex64::new(f(&p[..8]), f(&p[8..])))
                .collect(),
        );
    }
    Ok(SnapshotFile {
        n_points: n,
        half_length,
        total_time,
        dt,
        times,
        states,
    })
}

impl SnapshotFile {
    pub fn fields(&self) -> Result<(Grid, Vec<Field>)> {
        let grid = Grid::new(self.half_length, self.n_points)?;
        let fields = self
            .states
            .iter()
            .map(|v| Field::from_values(&grid, v.clone()))
            .collect::<Result<_>>()?;
        Ok((grid, fields))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{soliton_profile, SolitonParams};
    use crate::observables::DEFAULT_BOUNDARY_THRESHOLD;

    #[test]
    fn snapshot_round_trip() {
        let g = Grid::new(10.0, 64).unwrap();
        let mut traj = Trajectory::default();
        traj.push(0.0, soliton_profile(SolitonParams::at_rest(1.0), 0.0, &g).unwrap());
        traj.push(0.5, soliton_profile(SolitonParams::at_rest(1.0), 0.5, &g).unwrap());
        let mut buf = Vec::new();
        write_snapshots(&mut buf, &g, 0.5, 1e-3, &traj).unwrap();
        assert_eq!(buf.len(), 32 + 2 * 8 * (1 + 2 * 64));
        let back = read_snapshots(buf.as_slice()).unwrap();
        assert_eq!(back.times, traj.times);
        let (g2, fields) = back.fields().unwrap();
        assert_eq!(g2, g);
        assert_eq!(fields, traj.states);
        assert!(read_snapshots(&buf[..buf.len() - 3]).is_err());
    }

    #[test]
    fn csv_layout() {
        let g = Grid::new(10.0, 64).unwrap();
        let mut traj = Trajectory::default();
        traj.push(0.0, soliton_profile(SolitonParams::at_rest(1.0), 0.0, &g).unwrap());
        let rows = observe_trajectory(&traj, &g, 4.0, DEFAULT_BOUNDARY_THRESHOLD).unwrap();
        let mut buf = Vec::new();
        write_observables_csv(&mut buf, &["digest".into()], &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# digest");
        assert_eq!(lines[1], CSV_HEADER);
        assert_eq!(lines[2].split(',').count(), 7);
    }
}
