//! Plain-text model files.
//!
//! ```text
//! mars-model v1
//! n_features 7
//! penalty 2.0000000000000000e0
//! n_train 10014
//! rss 1.5234000000000000e7
//! gcv 1.5301000000000000e3
//! term 4.1200000000000000e2
//! term 1.0300000000000000e2 0:+:6.5000000000000000e0
//! term -3.1000000000000000e1 0:-:6.5000000000000000e0 6:+:3.0000000000000000e0
//! ```
//!
//! Reals are written with 17 significant digits, so parsing restores them bit for bit.

use std::io::{BufRead, Write};

use super::{BasisFunction, HingeFactor, MarsModel, Sign};
use crate::error::{Error, Result};

const MAGIC: &str = "mars-model v1";

fn real(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_model<W: Write>(model: &MarsModel, mut out: W) -> Result<()> {
    let mut text = String::new();
    text.push_str(MAGIC);
    text.push('\n');
    text.push_str(&format!("n_features {}\n", model.n_features()));
    text.push_str(&format!("penalty {}\n", real(model.penalty())));
    text.push_str(&format!("n_train {}\n", model.n_train()));
    text.push_str(&format!("rss {}\n", real(model.rss())));
    text.push_str(&format!("gcv {}\n", real(model.gcv_score())));
    for (b, c) in model.basis().iter().zip(model.coeffs()) {
        text.push_str("term ");
        text.push_str(&real(*c));
        for f in b.factors() {
            let sign = match f.sign {
                Sign::Pos => '+',
                Sign::Neg => '-',
            };
            text.push_str(&format!(" {}:{}:{}", f.var, sign, real(f.knot)));
        }
        text.push('\n');
    }
    out.write_all(text.as_bytes())
        .map_err(|e| Error::io("<model output>", e))
}

fn parse_real(s: &str, what: &str) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|_| Error::Parse(format!("bad {what} `{s}`")))
}

fn parse_factor(tok: &str) -> Result<HingeFactor> {
    let mut parts = tok.splitn(3, ':');
    let (Some(var), Some(sign), Some(knot)) = (parts.next(), parts.next(), parts.next()) else {
        return Err(Error::Parse(format!("bad hinge factor `{tok}`")));
    };
    let var = var
        .parse::<usize>()
        .map_err(|_| Error::Parse(format!("bad variable index in `{tok}`")))?;
    let sign = match sign {
        "+" => Sign::Pos,
        "-" => Sign::Neg,
        _ => return Err(Error::Parse(format!("bad sign in `{tok}`"))),
    };
    Ok(HingeFactor::new(var, sign, parse_real(knot, "knot")?))
}

pub fn parse_model<R: BufRead>(input: R) -> Result<MarsModel> {
    let mut lines = input.lines();
    let first = lines
        .next()
        .transpose()
        .map_err(|e| Error::io("<model input>", e))?;
    if first.as_deref().map(str::trim) != Some(MAGIC) {
        return Err(Error::Parse("missing `mars-model v1` header".into()));
    }

    let mut n_features = None;
    let mut penalty = None;
    let mut n_train = None;
    let mut rss = None;
    let mut gcv = None;
    let mut basis = Vec::new();
    let mut coeffs = Vec::new();

    for line in lines {
        let line = line.map_err(|e| Error::io("<model input>", e))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut toks = line.split_whitespace();
        let key = toks.next().unwrap_or_default();
        let mut value = || {
            toks.next()
                .ok_or_else(|| Error::Parse(format!("`{key}` has no value")))
        };
        match key {
            "n_features" => {
                n_features = Some(
                    value()?
                        .parse::<usize>()
                        .map_err(|_| Error::Parse("bad n_features".into()))?,
                )
            }
            "n_train" => {
                n_train = Some(
                    value()?
                        .parse::<usize>()
                        .map_err(|_| Error::Parse("bad n_train".into()))?,
                )
            }
            "penalty" => penalty = Some(parse_real(value()?, "penalty")?),
            "rss" => rss = Some(parse_real(value()?, "rss")?),
            "gcv" => gcv = Some(parse_real(value()?, "gcv")?),
            "term" => {
                coeffs.push(parse_real(value()?, "coefficient")?);
                let factors = toks.map(parse_factor).collect::<Result<Vec<_>>>()?;
                basis.push(BasisFunction::new(factors)?);
            }
            other => return Err(Error::Parse(format!("unknown key `{other}`"))),
        }
    }

    let missing = |k: &str| Error::Parse(format!("model file lacks `{k}`"));
    MarsModel::from_parts(
        basis,
        coeffs,
        n_features.ok_or_else(|| missing("n_features"))?,
        penalty.ok_or_else(|| missing("penalty"))?,
        n_train.ok_or_else(|| missing("n_train"))?,
        rss.ok_or_else(|| missing("rss"))?,
        gcv.ok_or_else(|| missing("gcv"))?,
    )
}
