//! Plain-text canonical form of a MILP instance.
//!
//! ```text
//! milp 1
//! dims <vars> <inequalities> <equalities>
//! offset <value>
//! objective <c_1> ... <c_n>
//! lower <l_1> ... <l_n>
//! upper <u_1> ... <u_n>
//! integer <0|1> ... <0|1>
//! ineq <rhs> <a_1> ... <a_n>      one line per inequality row
//! eq <rhs> <a_1> ... <a_n>        one line per equality row
//! ```
//!
//! Values are written in shortest round-trip form, infinities as `inf`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use super::{LinearProgram, MilpInstance};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

const HEADER: &str = "milp 1";

fn push_line(out: &mut String, tag: &str, values: impl Iterator<Item = f64>) {
    out.push_str(tag);
    for v in values {
        let _ = write!(out, " {v:?}");
    }
    out.push('\n');
}

impl MilpInstance {
    pub fn to_text(&self) -> String {
        let lp = &self.lp;
        let mut out = String::new();
        let _ = writeln!(out, "{HEADER}");
        let _ = writeln!(out, "dims {} {} {}", lp.num_vars(), lp.ineq_rhs.len(), lp.eq_rhs.len());
        let _ = writeln!(out, "offset {:?}", lp.objective_offset);
        push_line(&mut out, "objective", lp.objective.iter().copied());
        push_line(&mut out, "lower", lp.lower.iter().copied());
        push_line(&mut out, "upper", lp.upper.iter().copied());
        out.push_str("integer");
        for &b in &self.integer {
            out.push_str(if b { " 1" } else { " 0" });
        }
        out.push('\n');
        for (i, rhs) in lp.ineq_rhs.iter().enumerate() {
            push_line(&mut out, "ineq", core::iter::once(*rhs).chain(lp.ineq.row(i).iter().copied()));
        }
        for (i, rhs) in lp.eq_rhs.iter().enumerate() {
            push_line(&mut out, "eq", core::iter::once(*rhs).chain(lp.eq.row(i).iter().copied()));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let mut next = |tag: &str| -> Result<(usize, Vec<&str>)> {
            let (no, line) = lines
                .next()
                .ok_or_else(|| Error::contract(format!("instance text ends before `{tag}`")))?;
            let mut words = line.split_whitespace();
            if words.next() != Some(tag) {
                return Err(Error::contract(format!("line {}: expected `{tag}`", no + 1)));
            }
            Ok((no + 1, words.collect()))
        };
        let (no, version) = next("milp")?;
        if version != ["1"] {
            return Err(Error::contract(format!("line {no}: unsupported instance version")));
        }
        let (no, dims) = next("dims")?;
        let dims: Vec<usize> = dims
            .iter()
            .map(|w| w.parse::<usize>())
            .collect::<core::result::Result<_, _>>()
            .map_err(|_| Error::contract(format!("line {no}: bad dimension")))?;
        let [n, m, p] = dims[..] else {
            return Err(Error::contract(format!("line {no}: expected three dimensions")));
        };
        let floats = |no: usize, words: &[&str], len: usize| -> Result<Vec<f64>> {
            if words.len() != len {
                return Err(Error::Dimension {
                    context: "instance text row",
                    expected: len,
                    found: words.len(),
                });
            }
            words
                .iter()
                .map(|w| w.parse::<f64>().map_err(|_| Error::contract(format!("line {no}: bad number `{w}`"))))
                .collect()
        };
        let (no, w) = next("offset")?;
        let offset = floats(no, &w, 1)?[0];
        let (no, w) = next("objective")?;
        let mut lp = LinearProgram::new(floats(no, &w, n)?);
        lp.objective_offset = offset;
        let (no, w) = next("lower")?;
        lp.lower = floats(no, &w, n)?;
        let (no, w) = next("upper")?;
        lp.upper = floats(no, &w, n)?;
        let (no, w) = next("integer")?;
        let integer = floats(no, &w, n)?.iter().map(|v| *v != 0.0).collect();
        for (tag, count) in [("ineq", m), ("eq", p)] {
            let mut rows = Matrix::zeros(0, n);
            let mut rhs = Vec::with_capacity(count);
            for _ in 0..count {
                let (no, w) = next(tag)?;
                let vals = floats(no, &w, n + 1)?;
                rhs.push(vals[0]);
                rows.push_row(&vals[1..])?;
            }
            if tag == "ineq" {
                lp.ineq = rows;
                lp.ineq_rhs = rhs;
            } else {
                lp.eq = rows;
                lp.eq_rhs = rhs;
            }
        }
        let inst = MilpInstance { lp, integer };
        inst.validate()?;
        Ok(inst)
    }
}
