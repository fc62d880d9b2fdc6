//! Versioned plain-text model files.
//!
//! Layout (one item per line, keys in this exact order):
//!
//! ```text
//! camel-model 1
//! variant <camel|cmel|supervised|euclidean>
//! views <V>
//! in_dim <M>
//! out_dim <T>
//! lambda <f>
//! clusters <K>
//! config_out_dim <auto|T>
//! ridge <fixed|relative> <f>
//! epsilon <f>
//! max_iter <n>
//! kmeans_max_iter <n>
//! seed <n>
//! iterations <n>
//! converged <true|false>
//! objective_history <count>
//! <f>                      (count lines)
//! transform <p>            (p = 1..V, each followed by M rows of T values)
//! <f> <f> ... <f>
//! end
//! ```
//!
//! Floats are written with 17 significant digits (`{:.16e}`), which reads back
//! to the identical `f64`.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;

use crate::config::{CamelConfig, Ridge};
use crate::error::{CamelError, Result};
use crate::model::{ProjectionModel, TrainingInfo, Variant};

pub const MODEL_MAGIC: &str = "camel-model";
pub const MODEL_VERSION: u32 = 1;

fn float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Serializes a model to the text layout above.
pub fn model_to_string(model: &ProjectionModel) -> String {
    let info = &model.info;
    let cfg = &info.config;
    let mut s = String::new();
    let _ = writeln!(s, "{MODEL_MAGIC} {MODEL_VERSION}");
    let _ = writeln!(s, "variant {}", info.variant);
    let _ = writeln!(s, "views {}", model.views());
    let _ = writeln!(s, "in_dim {}", model.in_dim());
    let _ = writeln!(s, "out_dim {}", model.out_dim());
    let _ = writeln!(s, "lambda {}", float(cfg.lambda));
    let _ = writeln!(s, "clusters {}", cfg.clusters);
    match cfg.out_dim {
        Some(t) => {
            let _ = writeln!(s, "config_out_dim {t}");
        }
        None => {
            let _ = writeln!(s, "config_out_dim auto");
        }
    }
    match cfg.ridge {
        Ridge::Fixed(a) => {
            let _ = writeln!(s, "ridge fixed {}", float(a));
        }
        Ridge::Relative(a) => {
            let _ = writeln!(s, "ridge relative {}", float(a));
        }
    }
    let _ = writeln!(s, "epsilon {}", float(cfg.epsilon));
    let _ = writeln!(s, "max_iter {}", cfg.max_iter);
    let _ = writeln!(s, "kmeans_max_iter {}", cfg.kmeans_max_iter);
    let _ = writeln!(s, "seed {}", cfg.seed);
    let _ = writeln!(s, "iterations {}", info.iterations);
    let _ = writeln!(s, "converged {}", info.converged);
    let _ = writeln!(s, "objective_history {}", info.objective_history.len());
    for v in &info.objective_history {
        let _ = writeln!(s, "{}", float(*v));
    }
    for (p, u) in model.transforms().iter().enumerate() {
        let _ = writeln!(s, "transform {}", p + 1);
        for r in 0..u.nrows() {
            let row: Vec<String> = u.row(r).iter().map(|v| float(*v)).collect();
            let _ = writeln!(s, "{}", row.join(" "));
        }
    }
    s.push_str("end\n");
    s
}

pub fn save_model(model: &ProjectionModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, model_to_string(model)).map_err(|e| CamelError::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ProjectionModel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| CamelError::io(path, e))?;
    model_from_str(&text).map_err(|message| CamelError::ModelFormat {
        path: path.to_path_buf(),
        message,
    })
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next_line(&mut self) -> std::result::Result<(usize, &'a str), String> {
        self.inner
            .next()
            .map(|(i, l)| (i + 1, l.trim()))
            .ok_or_else(|| "unexpected end of file (truncated?)".to_string())
    }

    /// Reads `key value...` and returns the value part.
    fn field(&mut self, key: &str) -> std::result::Result<(usize, &'a str), String> {
        let (n, line) = self.next_line()?;
        match line.split_once(' ') {
            Some((k, rest)) if k == key => Ok((n, rest.trim())),
            _ => Err(format!("line {n}: expected `{key} ...`, found `{line}`")),
        }
    }

    fn parsed<T: std::str::FromStr>(&mut self, key: &str) -> std::result::Result<T, String> {
        let (n, v) = self.field(key)?;
        v.parse()
            .map_err(|_| format!("line {n}: cannot parse `{v}` for `{key}`"))
    }
}

fn parse_float(n: usize, s: &str) -> std::result::Result<f64, String> {
    s.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| format!("line {n}: invalid number `{s}`"))
}

/// Parses the text layout; the error string names the offending line.
pub fn model_from_str(text: &str) -> std::result::Result<ProjectionModel, String> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
    };
    let (_, magic) = lines.field(MODEL_MAGIC)?;
    let version: u32 = magic
        .parse()
        .map_err(|_| format!("line 1: invalid version `{magic}`"))?;
    if version != MODEL_VERSION {
        return Err(format!(
            "unsupported model version {version} (expected {MODEL_VERSION})"
        ));
    }
    let (n, variant) = lines.field("variant")?;
    let variant: Variant = variant.parse().map_err(|e| format!("line {n}: {e}"))?;
    let views: usize = lines.parsed("views")?;
    let in_dim: usize = lines.parsed("in_dim")?;
    let out_dim: usize = lines.parsed("out_dim")?;
    let (n, lambda) = lines.field("lambda")?;
    let lambda = parse_float(n, lambda)?;
    let clusters: usize = lines.parsed("clusters")?;
    let (n, cod) = lines.field("config_out_dim")?;
    let config_out_dim = match cod {
        "auto" => None,
        s => Some(
            s.parse::<usize>()
                .map_err(|_| format!("line {n}: invalid config_out_dim `{s}`"))?,
        ),
    };
    let (n, ridge) = lines.field("ridge")?;
    let ridge = match ridge.split_once(' ') {
        Some(("fixed", v)) => Ridge::Fixed(parse_float(n, v.trim())?),
        Some(("relative", v)) => Ridge::Relative(parse_float(n, v.trim())?),
        _ => return Err(format!("line {n}: invalid ridge `{ridge}`")),
    };
    let (n, eps) = lines.field("epsilon")?;
    let epsilon = parse_float(n, eps)?;
    let max_iter: usize = lines.parsed("max_iter")?;
    let kmeans_max_iter: usize = lines.parsed("kmeans_max_iter")?;
    let seed: u64 = lines.parsed("seed")?;
    let iterations: usize = lines.parsed("iterations")?;
    let converged: bool = lines.parsed("converged")?;
    let count: usize = lines.parsed("objective_history")?;
    let mut objective_history = Vec::with_capacity(count);
    for _ in 0..count {
        let (n, v) = lines.next_line()?;
        objective_history.push(parse_float(n, v)?);
    }

    if views == 0 || in_dim == 0 || out_dim == 0 {
        return Err("views and dimensions must be positive".into());
    }
    let mut transforms = Vec::with_capacity(views);
    for p in 1..=views {
        let index: usize = lines.parsed("transform")?;
        if index != p {
            return Err(format!("expected transform {p}, found transform {index}"));
        }
        let mut values = Vec::with_capacity(in_dim * out_dim);
        for _ in 0..in_dim {
            let (n, row) = lines.next_line()?;
            let before = values.len();
            for tok in row.split_whitespace() {
                values.push(parse_float(n, tok)?);
            }
            if values.len() - before != out_dim {
                return Err(format!(
                    "line {n}: expected {out_dim} values, found {}",
                    values.len() - before
                ));
            }
        }
        transforms.push(DMatrix::from_row_slice(in_dim, out_dim, &values));
    }
    let (n, end) = lines.next_line()?;
    if end != "end" {
        return Err(format!("line {n}: expected `end`, found `{end}`"));
    }

    let config = CamelConfig {
        lambda,
        clusters,
        out_dim: config_out_dim,
        ridge,
        epsilon,
        max_iter,
        kmeans_max_iter,
        seed,
    };
    let info = TrainingInfo {
        variant,
        config,
        objective_history,
        iterations,
        converged,
    };
    ProjectionModel::new(transforms, info).map_err(|e| e.to_string())
}
