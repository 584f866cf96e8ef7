//! Per-edge (pre-activation, post-activation) samples as CSV, for fitting
//! stubborn edges with external symbolic-regression tools.

use std::path::{Path, PathBuf};

use survkan_core::{ForwardCache, Network};

use crate::error::{Error, Result};
use crate::io::write_file;

pub fn edge_file_stem(layer: usize, input: usize, output: usize) -> String {
    format!("layer{layer}_in{input}_out{output}")
}

/// Writes `x,y` samples of every active edge into `dir`; returns the paths
/// in layer, output, input order.
pub fn export_edge_samples(net: &Network, cache: &ForwardCache, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::new();
    for (l, layer) in net.layers().iter().enumerate() {
        for j in 0..layer.n_out {
            for i in 0..layer.n_in {
                let e = j * layer.n_in + i;
                if !layer.edges[e].active {
                    continue;
                }
                let path = dir.join(format!("{}.csv", edge_file_stem(l, i, j)));
                let mut out = Vec::new();
                {
                    let mut w = csv::Writer::from_writer(&mut out);
                    w.write_record(["x", "y"]).map_err(Error::csv(&path))?;
                    for (x, y) in cache.nodes[l][i].iter().zip(&cache.post[l][e]) {
                        w.write_record([format!("{x}"), format!("{y}")]).map_err(Error::csv(&path))?;
                    }
                    w.flush().map_err(Error::io(&path))?;
                }
                write_file(&path, &out)?;
                paths.push(path);
            }
        }
    }
    Ok(paths)
}

/// Reads one exported edge file back.
pub fn read_edge_samples(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut reader = csv::Reader::from_path(path).map_err(Error::csv(path))?;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (row, rec) in reader.records().enumerate() {
        let rec = rec.map_err(Error::csv(path))?;
        let parse = |k: usize| {
            rec.get(k)
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| Error::Data(format!("{}: row {} is malformed", path.display(), row + 1)))
        };
        xs.push(parse(0)?);
        ys.push(parse(1)?);
    }
    Ok((xs, ys))
}
