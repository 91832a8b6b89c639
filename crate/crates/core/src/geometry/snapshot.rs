//! Plain-text curve snapshots.
//!
//! ```text
//! n=<int> length=<float> t=<float> eps=<float>
//! x y kappa        (n + 1 lines)
//! ```
//!
//! Floats are written with 17 significant digits so that reading a snapshot
//! back reproduces every value bit for bit.

use std::fmt::Write as _;
use std::path::Path;

use super::{DiscreteCurve, GeometryCache, Point2};
use crate::error::{FlowError, Result};

/// Formats a float with 17 significant digits.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub length: f64,
    pub t: f64,
    pub eps: f64,
    pub nodes: Vec<Point2>,
    pub kappa: Vec<f64>,
}

impl Snapshot {
    pub fn from_state(curve: &DiscreteCurve, cache: &GeometryCache, t: f64, eps: f64) -> Self {
        Self {
            length: cache.total_length,
            t,
            eps,
            nodes: curve.nodes().to_vec(),
            kappa: cache.kappa.clone(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "n={} length={} t={} eps={}",
            self.nodes.len() - 1,
            fmt17(self.length),
            fmt17(self.t),
            fmt17(self.eps)
        );
        for (p, k) in self.nodes.iter().zip(&self.kappa) {
            let _ = writeln!(out, "{} {} {}", fmt17(p.x), fmt17(p.y), fmt17(*k));
        }
        out
    }

    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let err = |reason: String| FlowError::Parse {
            path: origin.to_path_buf(),
            reason,
        };
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| err("empty snapshot".into()))?;
        let mut n = None;
        let (mut length, mut t, mut eps) = (None, None, None);
        for field in header.split_whitespace() {
            let (k, v) = field
                .split_once('=')
                .ok_or_else(|| err(format!("bad header field `{field}`")))?;
            let num = |v: &str| v.parse::<f64>().map_err(|e| err(format!("{k}: {e}")));
            match k {
                "n" => n = Some(v.parse::<usize>().map_err(|e| err(format!("n: {e}")))?),
                "length" => length = Some(num(v)?),
                "t" => t = Some(num(v)?),
                "eps" => eps = Some(num(v)?),
                other => return Err(err(format!("unknown header key `{other}`"))),
            }
        }
        let n = n.ok_or_else(|| err("missing n".into()))?;
        let mut nodes = Vec::with_capacity(n + 1);
        let mut kappa = Vec::with_capacity(n + 1);
        for (i, line) in lines.enumerate() {
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(|v| v.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| err(format!("line {}: {e}", i + 2)))?;
            if vals.len() != 3 {
                return Err(err(format!("line {} has {} columns", i + 2, vals.len())));
            }
            nodes.push(Point2::new(vals[0], vals[1]));
            kappa.push(vals[2]);
        }
        if nodes.len() != n + 1 {
            return Err(err(format!("expected {} node lines, found {}", n + 1, nodes.len())));
        }
        Ok(Self {
            length: length.ok_or_else(|| err("missing length".into()))?,
            t: t.ok_or_else(|| err("missing t".into()))?,
            eps: eps.ok_or_else(|| err("missing eps".into()))?,
            nodes,
            kappa,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, path)
    }
}
