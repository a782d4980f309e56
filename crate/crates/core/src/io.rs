//! Plain-text codebook files.
//!
//! ```text
//! upa-codebook 0.1.0
//! kind = proposed
//! m_h = 12
//! ...
//! [entry 1 1]
//! F = <re> <im> <re> <im> ...     one line per row of F
//! v = <re> <im> ...
//! c = <re> <im> ...
//! ```
//!
//! Floats are written with 17 significant digits so a write/read cycle is
//! bit-exact.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use num_complex::Complex64;

use crate::beamformer::Beamformer;
use crate::codebook::{BuildStats, Codebook, CodebookKind, Coverage};
use crate::error::{Error, Result};
use crate::ideal::CodebookConfig;
use crate::upa::{CMatrix, CVector, UpaConfig};

pub const FORMAT_TAG: &str = "upa-codebook";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// `|c - F v|` above this marks an entry as corrupt.
const CONSISTENCY_TOL: f64 = 1e-9;

fn push_complex(out: &mut String, z: &[Complex64]) {
    let mut first = true;
    for x in z {
        if !first {
            out.push(' ');
        }
        first = false;
        let _ = write!(out, "{:.16e} {:.16e}", x.re, x.im);
    }
}

fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_else(|| "none".into())
}

fn fmt_indices(v: &[usize]) -> String {
    v.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(" ")
}

pub fn to_string(book: &Codebook) -> String {
    let mut s = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(s, "{k} = {v}");
    };
    let (u, c, st, cov) = (&book.upa, &book.cb, &book.stats, &book.coverage);
    kv("kind", book.kind.as_str().into());
    kv("m_h", u.m_h.to_string());
    kv("m_v", u.m_v.to_string());
    kv("n_rf", u.n_rf.to_string());
    kv("b_phase", u.b_phase.to_string());
    kv("spacing_over_lambda", fmt_f64(u.spacing_over_lambda));
    kv("q_h", c.q_h.to_string());
    kv("q_v", c.q_v.to_string());
    kv("gamma", fmt_f64(c.gamma));
    kv("l_h", c.l_h.to_string());
    kv("l_v", c.l_v.to_string());
    kv("i_phases", c.i_phases.to_string());
    kv("mse_grid_per_beam", c.mse_grid_per_beam.to_string());
    kv("quantize", book.quantize.to_string());
    kv("requantize_shift", book.requantize_shift.to_string());
    kv("sweep", book.sweep.clone());
    kv("seed", book.seed.to_string());
    kv("candidates_evaluated", st.candidates_evaluated.to_string());
    kv("best_index", st.best_index.to_string());
    kv("best_mse", fmt_f64(st.best_mse));
    kv("requantize_mse_delta", fmt_opt(st.requantize_mse_delta));
    kv("ideal_clipped", st.ideal_clipped.to_string());
    match &book.selected {
        Some((gh, gv)) => {
            kv("selected_h", fmt_indices(gh));
            kv("selected_v", fmt_indices(gv));
        }
        None => {
            kv("selected_h", "none".into());
            kv("selected_v", "none".into());
        }
    }
    kv("mean_gain", fmt_f64(cov.mean_gain));
    kv("min_gain", fmt_f64(cov.min_gain));
    kv("mean_gain_psi", fmt_f64(cov.mean_gain_psi));
    kv("min_gain_psi", fmt_f64(cov.min_gain_psi));

    let mut out = format!("{FORMAT_TAG} {VERSION}\n");
    out.push_str(&s);
    for q in 0..c.q_h {
        for p in 0..c.q_v {
            let e = book.entry(q, p);
            let _ = writeln!(out, "\n[entry {} {}]", q + 1, p + 1);
            let _ = writeln!(out, "quantized = {}", e.quantized);
            let _ = writeln!(out, "regularized = {}", e.regularized);
            for row in e.analog.row_iter() {
                out.push_str("F = ");
                let vals: Vec<Complex64> = row.iter().copied().collect();
                push_complex(&mut out, &vals);
                out.push('\n');
            }
            out.push_str("v = ");
            push_complex(&mut out, e.baseband.as_slice());
            out.push_str("\nc = ");
            push_complex(&mut out, e.composite.as_slice());
            out.push('\n');
        }
    }
    out
}

pub fn write_codebook(path: &Path, book: &Codebook) -> Result<()> {
    fs::write(path, to_string(book))?;
    Ok(())
}

pub fn read_codebook(path: &Path) -> Result<Codebook> {
    from_str(&fs::read_to_string(path)?)
}

fn perr(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

struct Meta {
    values: BTreeMap<String, (usize, String)>,
    last_line: usize,
}

impl Meta {
    fn raw(&self, key: &str) -> Result<(usize, &str)> {
        self.values
            .get(key)
            .map(|(l, v)| (*l, v.as_str()))
            .ok_or_else(|| perr(self.last_line, format!("missing meta field `{key}`")))
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let (line, v) = self.raw(key)?;
        v.parse()
            .map_err(|_| perr(line, format!("bad value `{v}` for `{key}`")))
    }

    fn opt_f64(&self, key: &str) -> Result<Option<f64>> {
        let (line, v) = self.raw(key)?;
        if v == "none" {
            return Ok(None);
        }
        v.parse()
            .map(Some)
            .map_err(|_| perr(line, format!("bad value `{v}` for `{key}`")))
    }

    fn indices(&self, key: &str) -> Result<Option<Vec<usize>>> {
        let (line, v) = self.raw(key)?;
        if v == "none" {
            return Ok(None);
        }
        v.split_whitespace()
            .map(|t| t.parse().map_err(|_| perr(line, format!("bad index `{t}` in `{key}`"))))
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }
}

fn parse_complex(line: usize, s: &str) -> Result<Vec<Complex64>> {
    let nums: Vec<f64> = s
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| perr(line, format!("bad number `{t}`"))))
        .collect::<Result<_>>()?;
    if !nums.len().is_multiple_of(2) {
        return Err(perr(line, "odd number of values in complex list"));
    }
    Ok(nums.chunks(2).map(|p| Complex64::new(p[0], p[1])).collect())
}

#[derive(Default)]
struct EntryBuf {
    header_line: usize,
    q: usize,
    p: usize,
    quantized: Option<bool>,
    regularized: Option<bool>,
    rows: Vec<Vec<Complex64>>,
    v: Option<Vec<Complex64>>,
    c: Option<(usize, Vec<Complex64>)>,
}

pub fn from_str(text: &str) -> Result<Codebook> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let (_, header) = lines.next().ok_or_else(|| perr(1, "empty file"))?;
    let mut h = header.split_whitespace();
    if h.next() != Some(FORMAT_TAG) || h.next().is_none() {
        return Err(perr(1, format!("expected `{FORMAT_TAG} <version>` header")));
    }

    let mut meta = Meta {
        values: BTreeMap::new(),
        last_line: 1,
    };
    let mut entries: Vec<EntryBuf> = Vec::new();
    for (n, line) in lines {
        meta.last_line = n;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(rest) = line.strip_prefix("[entry").and_then(|r| r.strip_suffix(']')) {
            let idx: Vec<usize> = rest
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| perr(n, format!("bad entry index `{t}`"))))
                .collect::<Result<_>>()?;
            if idx.len() != 2 || idx[0] == 0 || idx[1] == 0 {
                return Err(perr(n, "entry header needs two one-based indices"));
            }
            entries.push(EntryBuf {
                header_line: n,
                q: idx[0] - 1,
                p: idx[1] - 1,
                ..Default::default()
            });
            continue;
        }
        let (key, val) = line
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| perr(n, "expected `key = value`"))?;
        match entries.last_mut() {
            None => {
                if meta.values.insert(key.to_string(), (n, val.to_string())).is_some() {
                    return Err(perr(n, format!("duplicate meta field `{key}`")));
                }
            }
            Some(e) => match key {
                "quantized" => {
                    e.quantized = Some(val.parse().map_err(|_| perr(n, "bad bool"))?)
                }
                "regularized" => {
                    e.regularized = Some(val.parse().map_err(|_| perr(n, "bad bool"))?)
                }
                "F" => e.rows.push(parse_complex(n, val)?),
                "v" => e.v = Some(parse_complex(n, val)?),
                "c" => e.c = Some((n, parse_complex(n, val)?)),
                other => return Err(perr(n, format!("unknown entry field `{other}`"))),
            },
        }
    }

    let upa = UpaConfig {
        m_h: meta.get("m_h")?,
        m_v: meta.get("m_v")?,
        n_rf: meta.get("n_rf")?,
        b_phase: meta.get("b_phase")?,
        spacing_over_lambda: meta.get("spacing_over_lambda")?,
    };
    let m_line = meta.raw("m_h")?.0;
    upa.validate().map_err(|e| perr(m_line, e.to_string()))?;
    let cb = CodebookConfig {
        q_h: meta.get("q_h")?,
        q_v: meta.get("q_v")?,
        gamma: meta.get("gamma")?,
        l_h: meta.get("l_h")?,
        l_v: meta.get("l_v")?,
        i_phases: meta.get("i_phases")?,
        mse_grid_per_beam: meta.get("mse_grid_per_beam")?,
    };
    let (kind_line, kind) = meta.raw("kind")?;
    let kind = CodebookKind::parse(kind).map_err(|e| perr(kind_line, e.to_string()))?;
    let selected = match (meta.indices("selected_h")?, meta.indices("selected_v")?) {
        (Some(h), Some(v)) => Some((h, v)),
        (None, None) => None,
        _ => return Err(perr(meta.raw("selected_v")?.0, "selected_h/selected_v mismatch")),
    };

    let q = cb.q_h * cb.q_v;
    if q == 0 {
        return Err(Error::EmptyCodebook);
    }
    if entries.len() != q {
        return Err(perr(
            meta.last_line,
            format!("expected {q} entries, found {}", entries.len()),
        ));
    }
    let m = upa.m();
    let mut out = Vec::with_capacity(q);
    for (k, e) in entries.into_iter().enumerate() {
        let at = e.header_line;
        if e.q * cb.q_v + e.p != k || e.q >= cb.q_h || e.p >= cb.q_v {
            return Err(perr(at, "entries out of order"));
        }
        if e.rows.len() != m {
            return Err(perr(at, format!("F has {} rows, expected {m}", e.rows.len())));
        }
        let n = e.rows[0].len();
        if n == 0 || e.rows.iter().any(|r| r.len() != n) {
            return Err(perr(at, "F rows have inconsistent lengths"));
        }
        let analog = CMatrix::from_fn(m, n, |i, j| e.rows[i][j]);
        let v = e.v.ok_or_else(|| perr(at, "missing v"))?;
        if v.len() != n {
            return Err(perr(at, format!("v has {} values, expected {n}", v.len())));
        }
        let (c_line, c) = e.c.ok_or_else(|| perr(at, "missing c"))?;
        if c.len() != m {
            return Err(perr(c_line, format!("c has {} values, expected {m}", c.len())));
        }
        let baseband = CVector::from_vec(v);
        let composite = CVector::from_vec(c);
        if (&analog * &baseband - &composite).norm() > CONSISTENCY_TOL {
            return Err(perr(c_line, "c does not equal F v"));
        }
        if (composite.norm() - 1.0).abs() > CONSISTENCY_TOL {
            return Err(perr(c_line, "c is not unit norm"));
        }
        out.push(Beamformer {
            analog,
            baseband,
            composite,
            quantized: e.quantized.ok_or_else(|| perr(at, "missing quantized"))?,
            regularized: e.regularized.ok_or_else(|| perr(at, "missing regularized"))?,
        });
    }

    Ok(Codebook {
        kind,
        upa,
        cb,
        entries: out,
        selected,
        quantize: meta.get("quantize")?,
        requantize_shift: meta.get("requantize_shift")?,
        sweep: meta.raw("sweep")?.1.to_string(),
        seed: meta.get("seed")?,
        stats: BuildStats {
            candidates_evaluated: meta.get("candidates_evaluated")?,
            best_index: meta.get("best_index")?,
            best_mse: meta.get("best_mse")?,
            requantize_mse_delta: meta.opt_f64("requantize_mse_delta")?,
            ideal_clipped: meta.get("ideal_clipped")?,
        },
        coverage: Coverage {
            mean_gain: meta.get("mean_gain")?,
            min_gain: meta.get("min_gain")?,
            mean_gain_psi: meta.get("mean_gain_psi")?,
            min_gain_psi: meta.get("min_gain_psi")?,
        },
    })
}
