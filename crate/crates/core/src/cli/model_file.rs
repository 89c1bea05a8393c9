//! Plain-text model files.
//!
//! ```text
//! cointcast-model 1
//! kind vecm                  # or var
//! d 4
//! p 2
//! rank 2                     # d for var
//! det constant
//! labels y1,y2,y3,y4
//! eigenvalues 4 <v1> <v2> <v3> <v4>
//! matrix phi_1 4 4
//! <row 1>
//! ...
//! end
//! ```
//!
//! Both kinds carry `phi_1..phi_p`, `psi` and `resid_cov`; a VECM adds
//! `alpha`, `beta` and `gamma_1..gamma_{p-1}` and is rebuilt from those on
//! load, the `phi_k` blocks being its VAR form. Rows are space separated,
//! every value written as `{:.16e}` (17 significant digits), so loading
//! reproduces each coefficient exactly.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::panel::DeterministicSpec;
use crate::var::VarModel;
use crate::vecm::{vecm_to_var, VecmModel};

const MAGIC: &str = "cointcast-model 1";

#[derive(Debug, Clone, PartialEq)]
pub enum StoredModel {
    Var(VarModel),
    Vecm(VecmModel),
}

impl StoredModel {
    pub fn var_form(&self) -> VarModel {
        match self {
            StoredModel::Var(m) => m.clone(),
            StoredModel::Vecm(m) => vecm_to_var(m),
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            StoredModel::Var(_) => "var",
            StoredModel::Vecm(_) => "vecm",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub labels: Vec<String>,
    pub model: StoredModel,
}

fn push_matrix(out: &mut String, name: &str, m: &DMatrix<f64>) {
    writeln!(out, "matrix {name} {} {}", m.nrows(), m.ncols()).unwrap();
    for i in 0..m.nrows() {
        let row: Vec<String> = m.row(i).iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(out, "{}", row.join(" ")).unwrap();
    }
}

pub fn render(file: &ModelFile) -> Result<String> {
    if file.labels.iter().any(|l| l.contains(',') || l.contains('\n') || l.is_empty()) {
        return Err(Error::InvalidInput("labels must be non-empty and free of commas and newlines".into()));
    }
    let var = file.model.var_form();
    let (rank, eigenvalues) = match &file.model {
        StoredModel::Var(m) => (m.dim(), Vec::new()),
        StoredModel::Vecm(m) => (m.rank(), m.eigenvalues.clone()),
    };
    let mut out = String::new();
    writeln!(out, "{MAGIC}").unwrap();
    writeln!(out, "kind {}", file.model.kind()).unwrap();
    writeln!(out, "d {}", var.dim()).unwrap();
    writeln!(out, "p {}", var.p()).unwrap();
    writeln!(out, "rank {rank}").unwrap();
    writeln!(out, "det {}", var.det).unwrap();
    writeln!(out, "labels {}", file.labels.join(",")).unwrap();
    let ev: Vec<String> = eigenvalues.iter().map(|v| format!("{v:.16e}")).collect();
    writeln!(out, "eigenvalues {}{}{}", ev.len(), if ev.is_empty() { "" } else { " " }, ev.join(" ")).unwrap();
    for (k, phi) in var.phi.iter().enumerate() {
        push_matrix(&mut out, &format!("phi_{}", k + 1), phi);
    }
    if let StoredModel::Vecm(m) = &file.model {
        push_matrix(&mut out, "alpha", &m.alpha);
        push_matrix(&mut out, "beta", &m.beta);
        for (k, g) in m.gamma.iter().enumerate() {
            push_matrix(&mut out, &format!("gamma_{}", k + 1), g);
        }
    }
    push_matrix(&mut out, "psi", &var.psi);
    push_matrix(&mut out, "resid_cov", &var.resid_cov);
    writeln!(out, "end").unwrap();
    Ok(out)
}

pub fn write(path: &Path, file: &ModelFile) -> Result<()> {
    std::fs::write(path, render(file)?).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

pub fn read(path: &Path) -> Result<ModelFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse(&text).map_err(|(line, message)| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    })
}

type ParseResult<T> = std::result::Result<T, (u64, String)>;

fn num(tok: &str, line: u64) -> ParseResult<f64> {
    tok.parse::<f64>().map_err(|_| (line, format!("bad number `{tok}`")))
}

fn count(tok: Option<&str>, line: u64) -> ParseResult<usize> {
    tok.and_then(|t| t.parse().ok()).ok_or((line, "expected a nonnegative integer".to_string()))
}

pub fn parse(text: &str) -> ParseResult<ModelFile> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i as u64 + 1, l));
    match lines.next() {
        Some((_, l)) if l.trim() == MAGIC => {}
        _ => return Err((1, format!("missing `{MAGIC}` header"))),
    }
    let mut scalars: HashMap<String, (u64, String)> = HashMap::new();
    let mut matrices: HashMap<String, DMatrix<f64>> = HashMap::new();
    let mut eigenvalues = Vec::new();
    let mut ended = false;
    while let Some((ln, line)) = lines.next() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (key, rest) = line.split_once(' ').unwrap_or((line, ""));
        match key {
            "end" => {
                ended = true;
                break;
            }
            "eigenvalues" => {
                let mut toks = rest.split_whitespace();
                let n = count(toks.next(), ln)?;
                eigenvalues = toks.map(|t| num(t, ln)).collect::<ParseResult<Vec<_>>>()?;
                if eigenvalues.len() != n {
                    return Err((ln, format!("expected {n} eigenvalues, found {}", eigenvalues.len())));
                }
            }
            "matrix" => {
                let mut toks = rest.split_whitespace();
                let name = toks.next().ok_or((ln, "matrix without a name".to_string()))?.to_string();
                let rows = count(toks.next(), ln)?;
                let cols = count(toks.next(), ln)?;
                let mut data = Vec::with_capacity(rows * cols);
                for _ in 0..rows {
                    let (rl, row) = lines.next().ok_or((ln, format!("matrix {name} truncated")))?;
                    let vals = row.split_whitespace().map(|t| num(t, rl)).collect::<ParseResult<Vec<_>>>()?;
                    if vals.len() != cols {
                        return Err((rl, format!("matrix {name}: expected {cols} values, found {}", vals.len())));
                    }
                    data.extend(vals);
                }
                matrices.insert(name, DMatrix::from_row_slice(rows, cols, &data));
            }
            _ => {
                scalars.insert(key.to_string(), (ln, rest.trim().to_string()));
            }
        }
    }
    if !ended {
        return Err((text.lines().count() as u64, "missing `end`".into()));
    }

    let scalar = |k: &str| scalars.get(k).cloned().ok_or((0, format!("missing `{k}`")));
    let int = |k: &str| -> ParseResult<usize> {
        let (ln, v) = scalar(k)?;
        v.parse().map_err(|_| (ln, format!("`{k}` must be an integer")))
    };
    let d = int("d")?;
    let p = int("p")?;
    let rank = int("rank")?;
    let (det_ln, det) = scalar("det")?;
    let det: DeterministicSpec = det.parse().map_err(|_| (det_ln, format!("unknown det `{det}`")))?;
    let (_, labels) = scalar("labels")?;
    let labels: Vec<String> = labels.split(',').map(str::to_string).collect();
    if labels.len() != d {
        return Err((0, format!("{} labels for d = {d}", labels.len())));
    }
    let take = |name: &str, r: usize, c: usize| -> ParseResult<DMatrix<f64>> {
        let m = matrices.get(name).ok_or((0, format!("missing matrix `{name}`")))?;
        if m.shape() != (r, c) {
            return Err((0, format!("matrix `{name}` must be {r}x{c}")));
        }
        Ok(m.clone())
    };
    let m = det.columns();
    let psi = take("psi", d, m)?;
    let resid_cov = take("resid_cov", d, d)?;
    let (kind_ln, kind) = scalar("kind")?;
    let model = match kind.as_str() {
        "var" => {
            let phi = (1..=p).map(|k| take(&format!("phi_{k}"), d, d)).collect::<ParseResult<Vec<_>>>()?;
            let model = VarModel::new(phi, psi, det, resid_cov).map_err(|e| (0, e.to_string()))?;
            StoredModel::Var(model)
        }
        "vecm" => {
            if p == 0 || rank > d {
                return Err((0, format!("invalid p = {p} or rank = {rank} for d = {d}")));
            }
            let gamma = (1..p).map(|k| take(&format!("gamma_{k}"), d, d)).collect::<ParseResult<Vec<_>>>()?;
            StoredModel::Vecm(VecmModel {
                alpha: take("alpha", d, rank)?,
                beta: take("beta", d, rank)?,
                gamma,
                psi,
                det,
                eigenvalues,
                resid_cov,
            })
        }
        other => return Err((kind_ln, format!("unknown kind `{other}`"))),
    };
    Ok(ModelFile { labels, model })
}
