//! Machine file format: a single self-describing text file.
//!
//! Header lines carry the format version, provenance, hyperparameters, β,
//! the data step and the three seeds, followed by the normalization and the
//! three matrices in row-major order. Floats are rendered with 17
//! significant decimal digits, which round-trips every f64 exactly, so a
//! saved machine reloads bit-identically.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use ndarray::prelude::*;
use thiserror::Error;

use crate::dynamics::{NormSpec, VarNorm};

use super::{Hyperparams, MatrixSeeds, Provenance, ReservoirMatrices, TrainedMachine};

pub const FORMAT_HEADER: &str = "balanced-rc machine v1";

#[derive(Debug, Error)]
pub enum MachineFileError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("unsupported format header `{0}`")]
    BadHeader(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("missing field `{0}`")]
    Missing(&'static str),
}

fn f(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn save(machine: &TrainedMachine, path: &Path) -> std::io::Result<()> {
    let mut out = String::new();
    let hp = &machine.hp;
    let seeds = machine.matrices.seeds;
    writeln!(out, "{FORMAT_HEADER}").unwrap();
    writeln!(out, "experiment = {}", machine.provenance.experiment_id).unwrap();
    writeln!(out, "config_digest = {}", machine.provenance.config_digest).unwrap();
    writeln!(out, "data_digest = {}", machine.provenance.data_digest).unwrap();
    writeln!(out, "beta = {}", f(machine.beta)).unwrap();
    writeln!(out, "dt = {}", f(machine.dt)).unwrap();
    writeln!(out, "n = {}", hp.n).unwrap();
    writeln!(out, "d = {}", hp.d).unwrap();
    writeln!(out, "connectivity = {}", f(hp.connectivity)).unwrap();
    writeln!(out, "spectral_radius = {}", f(hp.spectral_radius)).unwrap();
    writeln!(out, "input_scale = {}", f(hp.input_scale)).unwrap();
    writeln!(out, "leak = {}", f(hp.leak)).unwrap();
    writeln!(out, "ridge = {}", f(hp.ridge)).unwrap();
    writeln!(out, "input_seed = {}", seeds.input).unwrap();
    writeln!(out, "adjacency_seed = {}", seeds.adjacency).unwrap();
    writeln!(out, "init_state_seed = {}", seeds.init_state).unwrap();
    let norm: Vec<String> = machine.normalization.0.iter().map(|v| v.token()).collect();
    writeln!(out, "normalization = {}", norm.join(" ")).unwrap();
    write_matrix(&mut out, "w_in", &machine.matrices.w_in);
    write_matrix(&mut out, "adjacency", &machine.matrices.adjacency);
    write_matrix(&mut out, "w_out", &machine.w_out);
    writeln!(out, "end").unwrap();

    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    file.write_all(out.as_bytes())?;
    file.flush()
}

fn write_matrix(out: &mut String, name: &str, m: &Array2<f64>) {
    writeln!(out, "matrix {name} {} {}", m.nrows(), m.ncols()).unwrap();
    for row in m.rows() {
        let mut line = String::with_capacity(row.len() * 25);
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                line.push(' ');
            }
            let _ = write!(line, "{v:.16e}");
        }
        out.push_str(&line);
        out.push('\n');
    }
}

struct Reader<R> {
    lines: std::io::Lines<R>,
    line_no: usize,
}

impl<R: BufRead> Reader<R> {
    fn next_line(&mut self) -> Result<String, MachineFileError> {
        self.line_no += 1;
        match self.lines.next() {
            Some(l) => Ok(l?),
            None => Err(MachineFileError::Parse {
                line: self.line_no,
                msg: "unexpected end of file".into(),
            }),
        }
    }

    fn err(&self, msg: impl Into<String>) -> MachineFileError {
        MachineFileError::Parse { line: self.line_no, msg: msg.into() }
    }

    fn key_value(&mut self, key: &'static str) -> Result<String, MachineFileError> {
        let line = self.next_line()?;
        let (k, v) = line
            .split_once(" = ")
            .ok_or_else(|| self.err(format!("expected `{key} = ...`")))?;
        if k != key {
            return Err(self.err(format!("expected field `{key}`, found `{k}`")));
        }
        Ok(v.to_string())
    }

    fn float(&mut self, key: &'static str) -> Result<f64, MachineFileError> {
        let v = self.key_value(key)?;
        v.parse().map_err(|_| self.err(format!("bad float for `{key}`: {v}")))
    }

    fn int(&mut self, key: &'static str) -> Result<u64, MachineFileError> {
        let v = self.key_value(key)?;
        v.parse().map_err(|_| self.err(format!("bad integer for `{key}`: {v}")))
    }

    fn matrix(&mut self, name: &str) -> Result<Array2<f64>, MachineFileError> {
        let header = self.next_line()?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 4 || parts[0] != "matrix" || parts[1] != name {
            return Err(self.err(format!("expected `matrix {name} <rows> <cols>`")));
        }
        let rows: usize = parts[2].parse().map_err(|_| self.err("bad row count"))?;
        let cols: usize = parts[3].parse().map_err(|_| self.err("bad column count"))?;
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let line = self.next_line()?;
            let before = data.len();
            for tok in line.split_ascii_whitespace() {
                let v: f64 = tok.parse().map_err(|_| self.err(format!("bad float `{tok}`")))?;
                data.push(v);
            }
            if data.len() - before != cols {
                return Err(self.err(format!(
                    "expected {cols} values in matrix row, found {}",
                    data.len() - before
                )));
            }
        }
        Array2::from_shape_vec((rows, cols), data)
            .map_err(|_| self.err("matrix shape mismatch"))
    }
}

pub fn load(path: &Path) -> Result<TrainedMachine, MachineFileError> {
    let file = std::fs::File::open(path)?;
    let mut r = Reader { lines: BufReader::new(file).lines(), line_no: 0 };

    let header = r.next_line()?;
    if header != FORMAT_HEADER {
        return Err(MachineFileError::BadHeader(header));
    }
    let experiment_id = r.key_value("experiment")?;
    let config_digest = r.key_value("config_digest")?;
    let data_digest = r.key_value("data_digest")?;
    let beta = r.float("beta")?;
    let dt = r.float("dt")?;
    let n = r.int("n")? as usize;
    let d = r.int("d")? as usize;
    let hp = Hyperparams {
        n,
        d,
        connectivity: r.float("connectivity")?,
        spectral_radius: r.float("spectral_radius")?,
        input_scale: r.float("input_scale")?,
        leak: r.float("leak")?,
        ridge: r.float("ridge")?,
    };
    let seeds = MatrixSeeds {
        input: r.int("input_seed")?,
        adjacency: r.int("adjacency_seed")?,
        init_state: r.int("init_state_seed")?,
    };
    let norm_line = r.key_value("normalization")?;
    let mut vars = Vec::new();
    for tok in norm_line.split_whitespace() {
        vars.push(
            VarNorm::from_token(tok)
                .ok_or_else(|| r.err(format!("unknown normalization `{tok}`")))?,
        );
    }
    let w_in = r.matrix("w_in")?;
    let adjacency = r.matrix("adjacency")?;
    let w_out = r.matrix("w_out")?;
    let end = r.next_line()?;
    if end != "end" {
        return Err(r.err("missing `end` marker"));
    }
    if w_in.nrows() != n || w_in.ncols() != d || adjacency.nrows() != n || adjacency.ncols() != n {
        return Err(r.err("matrix shapes do not match n/d header"));
    }
    if w_out.nrows() != d || w_out.ncols() != n {
        return Err(r.err("readout shape does not match n/d header"));
    }
    Ok(TrainedMachine {
        hp,
        matrices: ReservoirMatrices { w_in, adjacency, seeds },
        w_out,
        beta,
        dt,
        normalization: NormSpec(vars),
        provenance: Provenance { experiment_id, config_digest, data_digest },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::TimeSeries;
    use crate::reservoir::TrainedMachine;

    #[test]
    fn save_load_round_trips_exactly() {
        let hp = Hyperparams {
            n: 12,
            d: 2,
            connectivity: 0.480,
            spectral_radius: 0.033,
            input_scale: 2.917,
            leak: 0.574,
            ridge: 3.458e-4,
        };
        let series = TimeSeries::new(
            0.05,
            0.0,
            Array2::from_shape_fn((40, 2), |(i, j)| ((i * (j + 2)) as f64 * 0.31).sin() * 0.6),
        )
        .unwrap();
        let m = TrainedMachine::train(
            &hp,
            MatrixSeeds { input: 11, adjacency: 22, init_state: 33 },
            &[series],
            4,
            10.0,
            NormSpec(vec![VarNorm::Arctan, VarNorm::MinMax { lo: -2.5, hi: 3.125 }]),
            Provenance {
                experiment_id: "roundtrip".into(),
                config_digest: "cafe".into(),
                data_digest: "beef".into(),
            },
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.brcm");
        m.save(&path).unwrap();
        let loaded = TrainedMachine::load(&path).unwrap();
        assert_eq!(m, loaded);

        // byte-identical re-save
        let path2 = dir.path().join("m2.brcm");
        loaded.save(&path2).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
    }
}
